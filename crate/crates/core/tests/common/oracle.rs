//! Reference values for virtual functions computed from their defining data.
//!
//! A member of the standard face edge space is fixed by its tangential edge
//! traces `g`, `div v = d` and `rot v = r`. Writing `v = ∇φ + rot ψ` gives two
//! Poisson problems, `Δφ = d` with `φ = 0` on the boundary and `-Δψ = r` with
//! `∂ψ/∂n = -v·t` (counterclockwise `t`), which are solved with high order
//! Lagrange elements on a refined fan triangulation.

use nalgebra::{DMatrix, DVector};
use polyvem::cell_vem::{cross_gen, CellOps};
use polyvem::face_vem::{FaceData, FaceGeom};
use polyvem::mesh::geom::*;
use polyvem::mesh::Mesh;
use polyvem::poly::{full_dim, Monomials};
use polyvem::quadrature::{cell_rule, gauss_legendre01};
use rand::Rng;

use super::fe2d::{Fe2, P2};

/// FE resolution used by the oracle: fan subdivisions and element degree.
pub const FE_SUBDIV: usize = 2;
pub const FE_DEGREE: usize = 5;

pub fn poly_eval(coef: &[f64], s: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

/// `∫_{-1}^{1} f(s) ds` by Gauss–Legendre.
fn int_m11(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre01(n);
    x.iter().zip(&w).map(|(&t, &wt)| 2.0 * wt * f(2.0 * t - 1.0)).sum()
}

fn signed_area(p: &[P2]) -> f64 {
    let m = p.len();
    (0..m).map(|i| p[i][0] * p[(i + 1) % m][1] - p[(i + 1) % m][0] * p[i][1]).sum::<f64>() / 2.0
}

/// A member of the standard face edge space, sampled at FE quadrature points.
pub struct FaceFn {
    pub k: usize,
    pub h: f64,
    pub area: f64,
    /// Per loop edge: `v·t_e` (canonical tangent) in powers of `s ∈ [-1, 1]`.
    pub g: Vec<Vec<f64>>,
    /// `div v` over `P_k`, `rot v` over `P_{k-1}`, monomials in `x / h`.
    pub d: Vec<f64>,
    pub r: Vec<f64>,
    pub q: Vec<(P2, f64)>,
    pub v: Vec<P2>,
    /// FE coefficients of the potentials, `v = ∇φ + rot ψ`.
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl FaceFn {
    /// Builds the function from its data; the constant part of `r` is
    /// overwritten to satisfy `∫ rot v = ∮ v·t`.
    pub fn new(geom: &FaceGeom, fe: &Fe2, k: usize, g: Vec<Vec<f64>>, d: Vec<f64>, r: Vec<f64>) -> FaceFn {
        let (r, psi, vpsi) = psi_part(geom, fe, k, &g, r);
        let (phi, vphi) = phi_part(fe, geom.h, k, &d);
        let v = vphi.iter().zip(&vpsi).map(|(a, b)| [a[0] + b[0], a[1] + b[1]]).collect();
        FaceFn { k, h: geom.h, area: geom.area, g, d, r, q: fe.quadrature(), v, phi, psi }
    }

    /// The unique member with the given standard DOF vector.
    pub fn from_dofs(geom: &FaceGeom, fe: &Fe2, k: usize, dofs: &[f64]) -> FaceFn {
        let (h, area) = (geom.h, geom.area);
        let ne = geom.edges.len() * (k + 1);
        let gram = DMatrix::from_fn(k + 1, k + 1, |p, q| if (p + q) % 2 == 0 { 1.0 / (p + q + 1) as f64 } else { 0.0 });
        let glu = gram.lu();
        let g = (0..geom.edges.len())
            .map(|i| {
                let rhs = DVector::from_column_slice(&dofs[i * (k + 1)..(i + 1) * (k + 1)]);
                glu.solve(&rhs).expect("edge gram").as_slice().to_vec()
            })
            .collect::<Vec<_>>();
        let nx = full_dim(2, k as i32);
        let monor = Monomials::new(2, k as i32 - 1);
        let nr = monor.len();
        let q = fe.quadrature();
        let mut r = vec![0.0; nr];
        if nr > 1 {
            // (h/|f|) ∫ r (m_b - mean m_b) for b >= 1 against the coefficients of m_c, c >= 1
            let mut mean = vec![0.0; nr];
            let mut gm = DMatrix::<f64>::zeros(nr, nr);
            for (x, w) in &q {
                let m = monor.eval(&[x[0] / h, x[1] / h]);
                for b in 0..nr {
                    mean[b] += w * m[b] / area;
                    for c in 0..nr {
                        gm[(b, c)] += w * m[b] * m[c];
                    }
                }
            }
            let a = DMatrix::from_fn(nr - 1, nr - 1, |b, c| h / area * (gm[(b + 1, c + 1)] - mean[b + 1] * area * mean[c + 1]));
            let rhs = DVector::from_column_slice(&dofs[ne + nx..ne + nx + nr - 1]);
            let sol = a.lu().solve(&rhs).expect("rot moments");
            r[1..].copy_from_slice(sol.as_slice());
        }
        let (r, psi, vpsi) = psi_part(geom, fe, k, &g, r);
        let base = x_moments(&q, &vpsi, h, area, k);
        let units: Vec<(Vec<f64>, Vec<P2>)> = (0..nx)
            .map(|j| {
                let mut d = vec![0.0; nx];
                d[j] = 1.0;
                phi_part(fe, h, k, &d)
            })
            .collect();
        let lmat = DMatrix::from_fn(nx, nx, |i, j| x_moments(&q, &units[j].1, h, area, k)[i]);
        let rhs = DVector::from_fn(nx, |i, _| dofs[ne + i] - base[i]);
        let d = lmat.lu().solve(&rhs).expect("x moments").as_slice().to_vec();
        let mut v = vpsi;
        let mut phi = vec![0.0; fe.nnodes];
        for (j, (uc, ug)) in units.iter().enumerate() {
            for (a, b) in v.iter_mut().zip(ug) {
                a[0] += d[j] * b[0];
                a[1] += d[j] * b[1];
            }
            for (a, b) in phi.iter_mut().zip(uc) {
                *a += d[j] * b;
            }
        }
        FaceFn { k, h, area, g, d, r, q, v, phi, psi }
    }

    pub fn random<R: Rng>(geom: &FaceGeom, fe: &Fe2, k: usize, rng: &mut R) -> FaceFn {
        let g = (0..geom.edges.len()).map(|_| random_vec(rng, k + 1)).collect();
        let d = random_vec(rng, full_dim(2, k as i32));
        let r = random_vec(rng, full_dim(2, k as i32 - 1));
        FaceFn::new(geom, fe, k, g, d, r)
    }

    /// Value at an arbitrary point of the face (local coordinates).
    pub fn value_at(&self, fe: &Fe2, x: P2) -> P2 {
        let (a, b) = (fe.grad_at(&self.phi, x), fe.grad_at(&self.psi, x));
        [a[0] + b[1], a[1] - b[0]]
    }

    pub fn rot_at(&self, x: &P2) -> f64 {
        let mono = Monomials::new(2, self.k as i32 - 1);
        mono.eval(&[x[0] / self.h, x[1] / self.h]).iter().zip(&self.r).map(|(a, b)| a * b).sum()
    }

    /// Standard DOF vector: edge moments, `x_f`-moments, rot moments.
    pub fn std_dofs(&self) -> Vec<f64> {
        let k = self.k;
        let mut out = Vec::new();
        for g in &self.g {
            for p in 0..=k {
                out.push(0.5 * int_m11(k + 2, |s| poly_eval(g, s) * s.powi(p as i32)));
            }
        }
        let xm = x_moments(&self.q, &self.v, self.h, self.area, k);
        out.extend(xm);
        if k > 1 {
            let monor = Monomials::new(2, k as i32 - 1);
            let mut mean = vec![0.0; monor.len()];
            let mut mom = vec![0.0; monor.len()];
            for (x, w) in &self.q {
                let r = self.rot_at(x);
                for (b, m) in monor.eval(&[x[0] / self.h, x[1] / self.h]).into_iter().enumerate() {
                    mean[b] += w * m / self.area;
                    mom[b] += w * r * m;
                }
            }
            let total: f64 = self.q.iter().map(|(x, w)| w * self.rot_at(x)).sum();
            for b in 1..monor.len() {
                out.push(self.h / self.area * (mom[b] - mean[b] * total));
            }
        }
        out
    }

    /// `L²` projection onto `(P_deg)²`, component-major coefficients.
    pub fn projection(&self, deg: i32) -> Vec<f64> {
        let mono = Monomials::new(2, deg);
        let n = mono.len();
        let mut mass = DMatrix::zeros(n, n);
        let mut rhs = DMatrix::zeros(n, 2);
        for ((x, w), v) in self.q.iter().zip(&self.v) {
            let m = mono.eval(&[x[0] / self.h, x[1] / self.h]);
            for a in 0..n {
                rhs[(a, 0)] += w * v[0] * m[a];
                rhs[(a, 1)] += w * v[1] * m[a];
                for b in 0..n {
                    mass[(a, b)] += w * m[a] * m[b];
                }
            }
        }
        let c = mass.lu().solve(&rhs).expect("face mass");
        c.column(0).iter().chain(c.column(1).iter()).cloned().collect()
    }

    /// Relative `L²(f)` distance between two coefficient vectors over `(P_deg)^ncomp`.
    pub fn rel_l2(&self, deg: i32, ncomp: usize, a: &[f64], b: &[f64]) -> f64 {
        let mono = Monomials::new(2, deg);
        let n = mono.len();
        let (mut num, mut den) = (0.0, 0.0);
        for (x, w) in &self.q {
            let m = mono.eval(&[x[0] / self.h, x[1] / self.h]);
            for c in 0..ncomp {
                let va: f64 = (0..n).map(|i| a[c * n + i] * m[i]).sum();
                let vb: f64 = (0..n).map(|i| b[c * n + i] * m[i]).sum();
                num += w * (va - vb).powi(2);
                den += w * vb * vb;
            }
        }
        (num / den).sqrt()
    }
}

/// `(1/|f|) ∫ v·(x/h) m_α`, `|α| <= k`.
fn x_moments(q: &[(P2, f64)], v: &[P2], h: f64, area: f64, k: usize) -> Vec<f64> {
    let mono = Monomials::new(2, k as i32);
    let mut xm = vec![0.0; mono.len()];
    for ((x, w), v) in q.iter().zip(v) {
        let xi = [x[0] / h, x[1] / h];
        let vx = v[0] * xi[0] + v[1] * xi[1];
        for (a, m) in xm.iter_mut().zip(mono.eval(&xi)) {
            *a += w * vx * m / area;
        }
    }
    xm
}

/// `∇φ` with `Δφ = d`, `φ = 0` on the boundary.
fn phi_part(fe: &Fe2, h: f64, k: usize, d: &[f64]) -> (Vec<f64>, Vec<P2>) {
    let mono = Monomials::new(2, k as i32);
    let phi = fe.solve_dirichlet(&|x| -mono.eval(&[x[0] / h, x[1] / h]).iter().zip(d).map(|(a, b)| a * b).sum::<f64>());
    let g = fe.gradients(&phi);
    (phi, g)
}

/// `rot ψ` with `-Δψ = r`, `∂ψ/∂n = -v·t`; fixes the constant of `r` first.
fn psi_part(geom: &FaceGeom, fe: &Fe2, k: usize, g: &[Vec<f64>], mut r: Vec<f64>) -> (Vec<f64>, Vec<f64>, Vec<P2>) {
    let h = geom.h;
    let m = geom.verts.len();
    let orient = signed_area(&geom.verts).signum();
    // counterclockwise tangent sign relative to the canonical one, per loop edge
    let ccw: Vec<f64> = (0..m)
        .map(|i| {
            let (a, b) = (geom.verts[i], geom.verts[(i + 1) % m]);
            let t = geom.edges[i].tangent;
            orient * ((b[0] - a[0]) * t[0] + (b[1] - a[1]) * t[1]).signum()
        })
        .collect();
    let circ: f64 = (0..m).map(|i| ccw[i] * geom.edges[i].len / 2.0 * int_m11(k + 2, |s| poly_eval(&g[i], s))).sum();
    let monor = Monomials::new(2, k as i32 - 1);
    let rval = |x: &P2, r: &[f64]| -> f64 { monor.eval(&[x[0] / h, x[1] / h]).iter().zip(r).map(|(a, b)| a * b).sum() };
    r[0] = 0.0;
    let rest: f64 = fe.quadrature().iter().map(|(x, w)| w * rval(x, &r)).sum();
    r[0] = (circ - rest) / geom.area;
    let edges = &geom.edges;
    let gn = |i: usize, x: P2| -> f64 {
        let e = &edges[i];
        let s = 2.0 * ((x[0] - e.start[0]) * e.tangent[0] + (x[1] - e.start[1]) * e.tangent[1]) / e.len - 1.0;
        -ccw[i] * poly_eval(&g[i], s)
    };
    let psi = fe.solve_neumann(&|x| rval(&x, &r), &gn);
    let v = fe.gradients(&psi).iter().map(|b| [b[1], -b[0]]).collect();
    (r, psi, v)
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// A member of the standard cell edge space: face functions glued along
/// shared edge traces, plus arbitrary interior moments.
pub struct CellFn {
    pub faces: Vec<FaceFn>,
    pub interior: Vec<f64>,
    pub dofs: DVector<f64>,
}

pub struct CellOracle<'a> {
    pub mesh: &'a Mesh,
    pub faces: &'a [FaceData],
    pub ops: &'a CellOps,
    pub fes: Vec<Fe2>,
    cell_q: Vec<(Point, f64)>,
}

impl<'a> CellOracle<'a> {
    pub fn new(mesh: &'a Mesh, faces: &'a [FaceData], ops: &'a CellOps, n: usize, p: usize) -> CellOracle<'a> {
        let c = &mesh.cells[ops.cell];
        let fes = c.faces.iter().map(|&f| Fe2::new(&faces[f].geom.verts, n, p)).collect();
        let rule = cell_rule(mesh, ops.cell, 2 * ops.k + 2).expect("cell rule");
        let cell_q = rule.points.into_iter().zip(rule.weights).collect();
        CellOracle { mesh, faces, ops, fes, cell_q }
    }

    /// The member with the given local DOF vector; face DOFs are expanded to
    /// the standard layout first (identity unless the faces are reduced).
    pub fn from_dofs(&self, dofs: DVector<f64>) -> CellFn {
        let (mesh, ops, k) = (self.mesh, self.ops, self.ops.k);
        let c = &mesh.cells[ops.cell];
        let faces = c
            .faces
            .iter()
            .enumerate()
            .map(|(lf, &f)| {
                let fd = &self.faces[f];
                let active = DVector::from_iterator(fd.edge.ndofs, ops.edge_gather[lf].iter().map(|&i| dofs[i]));
                let std = &fd.edge.ext * active;
                FaceFn::from_dofs(&fd.geom, &self.fes[lf], k, std.as_slice())
            })
            .collect();
        let ie = ops.edge_interior_offset();
        CellFn { faces, interior: dofs.as_slice()[ie..].to_vec(), dofs }
    }

    pub fn random<R: Rng>(&self, rng: &mut R) -> CellFn {
        self.from_dofs(DVector::from_vec(random_vec(rng, self.ops.n_edge())))
    }

    /// Face-space DOFs of `curl v`: normal moments of the face rots, then the
    /// interior moments through integration by parts.
    pub fn curl_dofs(&self, v: &CellFn) -> DVector<f64> {
        let (mesh, ops, k) = (self.mesh, self.ops, self.ops.k);
        let c = &mesh.cells[ops.cell];
        let (h, vol) = (ops.frame.h, ops.frame.volume);
        let mut out = DVector::zeros(ops.n_face());
        let mono2 = Monomials::new(2, k as i32 - 1);
        let mono3 = Monomials::new(3, k as i32 - 1);
        let n4 = mono3.len();
        let n2 = if k > 1 { n4 - 1 } else { 0 };
        let io = ops.face_interior_offset();
        for (lf, &f) in c.faces.iter().enumerate() {
            let (face, ff) = (&mesh.faces[f], &v.faces[lf]);
            for (x, w) in &ff.q {
                let r = ff.rot_at(x);
                for (b, m) in mono2.eval(&[x[0] / ff.h, x[1] / ff.h]).into_iter().enumerate() {
                    out[ops.face_offset[lf] + b] += w * r * m / ff.area;
                }
                let m3 = mono3.eval(&ops.frame.xi(&face.to_global(x)));
                for a in 1..=n2 {
                    out[io + a - 1] += c.face_signs[lf] * h / vol * w * r * m3[a];
                }
            }
        }
        let ie = ops.edge_interior_offset();
        for j in 0..ops.fam.len() {
            out[io + n2 + j] = v.dofs[ie + n4 + j] / h;
        }
        out
    }

    /// Coefficients of `Π⁰_k v` over `(P_k)³` (cell-scaled monomials, component-major).
    pub fn pi0(&self, v: &CellFn) -> DVector<f64> {
        let (mesh, ops, k) = (self.mesh, self.ops, self.ops.k);
        let c = &mesh.cells[ops.cell];
        let fr = &ops.frame;
        let (h, vol) = (fr.h, fr.volume);
        let monok = Monomials::new(3, k as i32);
        let mono4 = Monomials::new(3, k as i32 - 1);
        let (nk, n4) = (monok.len(), mono4.len());
        let gens = &ops.fam.generators;
        let n5 = gens.len();
        let ie = ops.edge_interior_offset();
        let (i4, i5) = (&v.dofs.as_slice()[ie..ie + n4], &v.dofs.as_slice()[ie + n4..]);

        // ∫ v·curl z_j = ∫ curl v·z_j - Σ σ_f ∫_f v·(z_j × n_f)
        let mut vcurlz: Vec<f64> = i5.iter().map(|d| d * vol / h).collect();
        for (lf, &f) in c.faces.iter().enumerate() {
            let (face, ff) = (&mesh.faces[f], &v.faces[lf]);
            for ((x, w), vt) in ff.q.iter().zip(&ff.v) {
                let xi = fr.xi(&face.to_global(x));
                let mk = monok.eval(&xi);
                for (j, &(i, cc)) in gens.iter().enumerate() {
                    let zn = face.tangential(&cross(&cross_gen(&xi, mk[i], cc), &face.normal));
                    vcurlz[j] -= c.face_signs[lf] * w * (vt[0] * zn[0] + vt[1] * zn[1]);
                }
            }
        }

        // p = Σ a_j curl z_j + x_P Σ b_α m_α, fitted at sample points
        let npts = 4 * nk;
        let pts: Vec<Point> = (0..npts)
            .map(|i| {
                let t = i as f64 + 0.5;
                [(t * 0.618034).fract() - 0.5, (t * 0.7548777).fract() - 0.5, (t * 0.5698403).fract() - 0.5]
            })
            .collect();
        let mut a = DMatrix::zeros(3 * npts, n5 + n4);
        let mut b = DMatrix::zeros(3 * npts, 3 * nk);
        for (s, xi) in pts.iter().enumerate() {
            let (mv, mg) = monok.eval_grad(xi);
            for (j, &(i, cc)) in gens.iter().enumerate() {
                // curl_x (ξ ∧ m e_c) = (ξ ∂_c m - 2 m e_c - (ξ·∇m) e_c) / h
                let xg = dot(xi, &mg[i]);
                for comp in 0..3 {
                    let mut val = xi[comp] * mg[i][cc];
                    if comp == cc {
                        val -= 2.0 * mv[i] + xg;
                    }
                    a[(3 * s + comp, j)] = val / h;
                }
            }
            let m4 = mono4.eval(xi);
            for al in 0..n4 {
                for comp in 0..3 {
                    a[(3 * s + comp, n5 + al)] = xi[comp] * m4[al];
                }
            }
            for comp in 0..3 {
                for al in 0..nk {
                    b[(3 * s + comp, comp * nk + al)] = mv[al];
                }
            }
        }
        let coef = a.svd(true, true).solve(&b, 1e-12).expect("decomposition fit");
        let mut rhs = DVector::zeros(3 * nk);
        for col in 0..3 * nk {
            let mut s = 0.0;
            for j in 0..n5 {
                s += coef[(j, col)] * vcurlz[j];
            }
            for al in 0..n4 {
                s += coef[(n5 + al, col)] * vol * i4[al];
            }
            rhs[col] = s;
        }
        let mut mass = DMatrix::zeros(nk, nk);
        for (x, w) in &self.cell_q {
            let m = monok.eval(&fr.xi(x));
            for i in 0..nk {
                for j in 0..nk {
                    mass[(i, j)] += w * m[i] * m[j];
                }
            }
        }
        let lu = mass.lu();
        let mut out = DVector::zeros(3 * nk);
        for comp in 0..3 {
            let blk = lu.solve(&rhs.rows(comp * nk, nk).into_owned()).expect("cell mass");
            out.rows_mut(comp * nk, nk).copy_from(&blk);
        }
        out
    }

    /// Relative `L²(P)` distance of two `(P_k)³` coefficient vectors.
    pub fn rel_l2(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let monok = Monomials::new(3, self.ops.k as i32);
        let nk = monok.len();
        let (mut num, mut den) = (0.0, 0.0);
        for (x, w) in &self.cell_q {
            let m = monok.eval(&self.ops.frame.xi(x));
            for c in 0..3 {
                let va: f64 = (0..nk).map(|i| a[c * nk + i] * m[i]).sum();
                let vb: f64 = (0..nk).map(|i| b[c * nk + i] * m[i]).sum();
                num += w * (va - vb).powi(2);
                den += w * vb * vb;
            }
        }
        (num / den).sqrt()
    }
}
