//! Two-dimensional virtual element spaces on mesh faces.
//!
//! All computations happen in the face frame: local coordinates are relative
//! to the face barycenter and polynomials use monomials in `x_f / h_f`.
//!
//! Edge space DOFs (standard layout):
//! * per loop edge `e`, `(1/|e|) ∫_e (v·t_e) s^i`, `i = 0..=k`, with `s ∈ [-1, 1]`
//!   running along the canonical tangent;
//! * `(1/|f|) ∫_f v·(x_f/h_f) m_α` for `|α| <= κ` (`κ = k`, or `β` in serendipity mode);
//! * for `k > 1`, `(h_f/|f|) ∫_f rot v (m_α - mean m_α)` for `1 <= |α| <= k-1`.
//!
//! Nodal space DOFs: vertex values in loop order, per loop edge
//! `(1/|e|) ∫_e q s^i` for `i < k`, and `(1/|f|) ∫_f ∇q·(x_f/h_f) m_α`, `|α| <= κ`.

use nalgebra::DMatrix;

use crate::error::{Result, VemError};
use crate::linalg;
use crate::mesh::Mesh;
use crate::poly::{decomposition_matrix, full_dim, Decomp, Monomials};
use crate::quadrature::{face_rule, gauss_legendre01};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Standard,
    Serendipity,
}

pub fn beta(k: usize, eta: usize) -> i32 {
    k as i32 + 1 - eta as i32
}

/// Degree of the face `x_f`-moments kept as true degrees of freedom.
pub fn kept_degree(k: usize, eta: usize, mode: Mode) -> i32 {
    match mode {
        Mode::Standard => k as i32,
        Mode::Serendipity => beta(k, eta),
    }
}

pub type P2 = [f64; 2];

#[derive(Clone, Debug)]
pub struct EdgeGeom {
    pub id: usize,
    /// `+1` when the face loop runs along the canonical tangent.
    pub sign: f64,
    pub len: f64,
    pub start: P2,
    pub tangent: P2,
    /// Outward in-plane normal.
    pub nout: P2,
    /// Quadrature parameters in `[-1, 1]`, local points and weights (summing to `len`).
    pub qs: Vec<f64>,
    pub qx: Vec<P2>,
    pub qw: Vec<f64>,
}

impl EdgeGeom {
    pub fn point(&self, s: f64) -> P2 {
        let a = 0.5 * (s + 1.0) * self.len;
        [self.start[0] + a * self.tangent[0], self.start[1] + a * self.tangent[1]]
    }

    /// `∫_e s^i s^j ds` for `i, j <= d`.
    pub fn gram(&self, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(d + 1, d + 1, |i, j| if (i + j) % 2 == 0 { self.len / (i + j + 1) as f64 } else { 0.0 })
    }
}

/// Face geometry in local coordinates together with a quadrature rule.
#[derive(Clone, Debug)]
pub struct FaceGeom {
    pub face: usize,
    pub h: f64,
    pub area: f64,
    pub verts: Vec<P2>,
    pub qx: Vec<P2>,
    pub qw: Vec<f64>,
    pub edges: Vec<EdgeGeom>,
}

impl FaceGeom {
    pub fn new(mesh: &Mesh, face: usize, degree: usize) -> FaceGeom {
        let f = &mesh.faces[face];
        let rule = face_rule(mesh, face, degree);
        let qx = rule.points.iter().map(|p| f.to_local(p)).collect();
        let verts: Vec<P2> = f.vertices.iter().map(|&v| f.to_local(&mesh.vertices[v])).collect();
        let m = verts.len();
        let (gs, gw) = gauss_legendre01(degree / 2 + 1);
        let edges = (0..m)
            .map(|i| {
                let sign = f.edge_signs[i];
                let (a, b) = if sign > 0.0 { (verts[i], verts[(i + 1) % m]) } else { (verts[(i + 1) % m], verts[i]) };
                let d = [b[0] - a[0], b[1] - a[1]];
                let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                let t = [d[0] / len, d[1] / len];
                let tl = [sign * t[0], sign * t[1]];
                EdgeGeom {
                    id: f.edges[i],
                    sign,
                    len,
                    start: a,
                    tangent: t,
                    nout: [tl[1], -tl[0]],
                    qs: gs.iter().map(|&x| 2.0 * x - 1.0).collect(),
                    qx: gs.iter().map(|&x| [a[0] + x * d[0], a[1] + x * d[1]]).collect(),
                    qw: gw.iter().map(|&w| w * len).collect(),
                }
            })
            .collect();
        FaceGeom { face, h: f.diameter, area: f.area, verts, qx, qw: rule.weights, edges }
    }

    pub fn xi(&self, x: &P2) -> [f64; 2] {
        [x[0] / self.h, x[1] / self.h]
    }

    /// Gram matrix `∫_f m_α m_β` between `P_d1` and `P_d2`.
    pub fn mixed_mass(&self, d1: i32, d2: i32) -> DMatrix<f64> {
        let (m1, m2) = (Monomials::new(2, d1), Monomials::new(2, d2));
        let mut g = DMatrix::zeros(m1.len(), m2.len());
        for (x, &w) in self.qx.iter().zip(&self.qw) {
            let xi = self.xi(x);
            let (a, b) = (m1.eval(&xi), m2.eval(&xi));
            for i in 0..a.len() {
                for j in 0..b.len() {
                    g[(i, j)] += w * a[i] * b[j];
                }
            }
        }
        g
    }

    pub fn mass(&self, d: i32) -> DMatrix<f64> {
        self.mixed_mass(d, d)
    }

    /// Face means of the monomials of degree at most `d`.
    pub fn means(&self, d: i32) -> Vec<f64> {
        let m = Monomials::new(2, d);
        let mut s = vec![0.0; m.len()];
        for (x, &w) in self.qx.iter().zip(&self.qw) {
            for (a, v) in s.iter_mut().zip(m.eval(&self.xi(x))) {
                *a += w * v;
            }
        }
        s.iter().map(|v| v / self.area).collect()
    }
}

/// Evaluates a 2D vector polynomial (component-major coefficients over `P_d`)
/// and its rot at a local point.
pub fn eval_vec2(mono: &Monomials, h: f64, coeffs: &[f64], x: &P2) -> (P2, f64) {
    let n = mono.len();
    let (v, g) = mono.eval_grad(&[x[0] / h, x[1] / h]);
    let mut val = [0.0; 2];
    let mut rot = 0.0;
    for i in 0..n {
        val[0] += coeffs[i] * v[i];
        val[1] += coeffs[n + i] * v[i];
        rot += (coeffs[n + i] * g[i][0] - coeffs[i] * g[i][1]) / h;
    }
    (val, rot)
}

fn mono_grad(mono: &Monomials, h: f64, x: &P2) -> (Vec<f64>, Vec<P2>) {
    let (v, g) = mono.eval_grad(&[x[0] / h, x[1] / h]);
    (v, g.iter().map(|d| [d[0] / h, d[1] / h]).collect())
}

fn unit_row(n: usize, j: usize, s: f64) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(1, n);
    r[(0, j)] = s;
    r
}

/// Solves the (possibly over-determined, consistent) projector system
/// `A p = B`, normalizing rows first and checking full column rank.
fn solve_projector(face: usize, mut a: DMatrix<f64>, mut b: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let amax = linalg::max_abs(&a);
    for r in 0..a.nrows() {
        let s = a.row(r).norm();
        if s > 1e-13 * amax {
            a.row_mut(r).scale_mut(1.0 / s);
            b.row_mut(r).scale_mut(1.0 / s);
        }
    }
    let (x, rank) = linalg::lstsq(&a, &b, linalg::RANK_TOL);
    if rank < a.ncols() {
        return Err(VemError::Unisolvence { face, rank, expected: a.ncols() });
    }
    Ok(x)
}

/// Edge space `V^e_k(f)` or its serendipity reduction, with its DOF-level operators.
#[derive(Clone, Debug)]
pub struct FaceEdgeSpace {
    pub face: usize,
    pub k: usize,
    pub mode: Mode,
    pub eta: usize,
    pub beta: i32,
    pub kappa: i32,
    pub n_edges: usize,
    pub nx: usize,
    pub nx_std: usize,
    pub nr: usize,
    pub n_std: usize,
    pub ndofs: usize,
    /// Picks the active DOFs out of a standard DOF vector.
    pub select: DMatrix<f64>,
    /// Reconstructs the standard DOFs from the active ones.
    pub ext: DMatrix<f64>,
    /// Per loop edge: coefficients of `v·t_e` in powers of `s`.
    pub trace: Vec<DMatrix<f64>>,
    /// Coefficients of `rot v` in `P_{k-1}(f)`.
    pub rot: DMatrix<f64>,
    /// Coefficients of `Π⁰_{k+1} v` in `(P_{k+1}(f))²`, component-major.
    pub pi0: DMatrix<f64>,
    /// Serendipity projector onto `(P_k(f))²` (serendipity mode only).
    pub pi_s: Option<DMatrix<f64>>,
}

impl FaceEdgeSpace {
    pub fn std_sizes(k: usize, n_edges: usize) -> (usize, usize, usize) {
        let nx = full_dim(2, k as i32);
        let nr = if k > 1 { full_dim(2, k as i32 - 1) - 1 } else { 0 };
        (n_edges * (k + 1), nx, nr)
    }

    pub fn x_offset(&self) -> usize {
        self.n_edges * (self.k + 1)
    }

    pub fn r_offset(&self) -> usize {
        self.x_offset() + self.nx
    }

    pub fn new(mesh: &Mesh, geom: &FaceGeom, k: usize, mode: Mode) -> Result<FaceEdgeSpace> {
        let face = geom.face;
        let eta = mesh.faces[face].eta;
        let m = geom.edges.len();
        let b = beta(k, eta);
        let kappa = kept_degree(k, eta, mode);
        let (ne, nx_std, nr) = Self::std_sizes(k, m);
        let nx = full_dim(2, kappa);
        let n_std = ne + nx_std + nr;
        let ndofs = ne + nx + nr;
        let (xo, ro) = (ne, ne + nx_std);
        let h = geom.h;
        let ki = k as i32;

        // tangential traces
        let trace_std: Vec<DMatrix<f64>> = geom
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let ginv = linalg::inverse(&e.gram(k), "edge gram").expect("edge gram invertible") * e.len;
                let mut t = DMatrix::zeros(k + 1, n_std);
                t.columns_mut(i * (k + 1), k + 1).copy_from(&ginv);
                t
            })
            .collect();

        // rot recovery
        let dr = full_dim(2, ki - 1);
        let mut rot_std = DMatrix::zeros(dr, n_std);
        if dr > 0 {
            let mass = geom.mass(ki - 1);
            let means = geom.means(ki - 1);
            let mut rm = DMatrix::zeros(dr, dr);
            for a in 0..dr {
                rm[(0, a)] = mass[(0, a)];
            }
            for bb in 1..dr {
                for a in 0..dr {
                    rm[(bb, a)] = h / geom.area * (mass[(bb, a)] - means[bb] * mass[(0, a)]);
                }
            }
            let mut rb = DMatrix::zeros(dr, n_std);
            for (i, e) in geom.edges.iter().enumerate() {
                rb[(0, i * (k + 1))] = e.sign * e.len;
            }
            for bb in 1..dr {
                rb[(bb, ro + bb - 1)] = 1.0;
            }
            rot_std = linalg::solve_square(&rm, &rb, "face rot recovery")?;
        }

        // L2 projection onto (P_{k+1})^2
        let (dmat, npot) = decomposition_matrix(Decomp::Rot2d, ki + 1, [0.0; 3], h);
        let n1 = full_dim(2, ki + 1);
        let mono_q = Monomials::new(2, ki + 2);
        let mut fmat = DMatrix::zeros(dmat.ncols(), n_std);
        {
            // ∫ rot v m_γ
            let mq_r = geom.mixed_mass(ki + 2, ki - 1);
            let rot_part = &mq_r * &rot_std;
            for g in 1..mono_q.len() {
                let mut row = rot_part.row(g).into_owned();
                for (i, e) in geom.edges.iter().enumerate() {
                    // - σ_e ∫_e (v·t_e) m_γ
                    for (q, (&s, x)) in e.qs.iter().zip(&e.qx).enumerate() {
                        let mg = mono_q.eval(&geom.xi(x))[g];
                        let mut sp = 1.0;
                        for p in 0..=k {
                            let c = -e.sign * e.qw[q] * mg * sp;
                            row += trace_std[i].row(p) * c;
                            sp *= s;
                        }
                    }
                }
                fmat.row_mut(g - 1).copy_from(&row);
            }
            for a in 0..nx_std {
                fmat[(npot + a, xo + a)] = geom.area;
            }
        }
        let dinv_t = linalg::inverse(&dmat, "face decomposition")?.transpose();
        let rhs = dinv_t * fmat;
        let mass1 = geom.mass(ki + 1);
        let minv1 = linalg::inverse(&mass1, "face mass")?;
        let mut pi0_std = DMatrix::zeros(2 * n1, n_std);
        for c in 0..2 {
            let blk = &minv1 * rhs.rows(c * n1, n1);
            pi0_std.rows_mut(c * n1, n1).copy_from(&blk);
        }

        // active-DOF embedding
        let mut ext0 = DMatrix::zeros(n_std, ndofs);
        let mut select = DMatrix::zeros(ndofs, n_std);
        for j in 0..ndofs {
            let sj = if j < ne + nx { j } else { j - nx + nx_std };
            ext0[(sj, j)] = 1.0;
            select[(j, sj)] = 1.0;
        }

        let mut space = FaceEdgeSpace {
            face,
            k,
            mode,
            eta,
            beta: b,
            kappa,
            n_edges: m,
            nx,
            nx_std,
            nr,
            n_std,
            ndofs,
            select,
            ext: ext0.clone(),
            trace: trace_std.clone(),
            rot: rot_std.clone(),
            pi0: pi0_std.clone(),
            pi_s: None,
        };
        if mode == Mode::Standard {
            return Ok(space);
        }

        // serendipity projector onto (P_k)^2
        let nk = full_dim(2, ki);
        let dp = {
            let mono = Monomials::new(2, ki);
            let mut d = DMatrix::zeros(n_std, 2 * nk);
            for j in 0..2 * nk {
                let mut c = vec![0.0; 2 * nk];
                c[j] = 1.0;
                let col = std_edge_dofs(geom, k, |x| eval_vec2(&mono, h, &c, x));
                d.column_mut(j).copy_from(&col);
            }
            d
        };
        let mono1 = Monomials::new(2, ki + 1);
        let mut rows: Vec<DMatrix<f64>> = Vec::new();
        for g in 1..mono1.len() {
            let mut row = DMatrix::zeros(1, n_std);
            for (i, e) in geom.edges.iter().enumerate() {
                for (q, (&s, x)) in e.qs.iter().zip(&e.qx).enumerate() {
                    let (_, gr) = mono_grad(&mono1, h, x);
                    let dt = gr[g][0] * e.tangent[0] + gr[g][1] * e.tangent[1];
                    let mut sp = 1.0;
                    for p in 0..=k {
                        row += trace_std[i].row(p) * (e.qw[q] * dt * sp);
                        sp *= s;
                    }
                }
            }
            rows.push(row);
        }
        let mut s2 = DMatrix::zeros(1, n_std);
        for (i, e) in geom.edges.iter().enumerate() {
            s2[(0, i * (k + 1))] = e.sign * e.len;
        }
        rows.push(s2);
        for r in 0..nr {
            rows.push(unit_row(n_std, ro + r, 1.0));
        }
        for a in 0..nx {
            rows.push(unit_row(n_std, xo + a, 1.0));
        }
        let l = vstack(&rows, n_std);
        let pis = solve_projector(face, &l * &dp, &l * &ext0)?;
        let mut ext = ext0;
        for a in nx..nx_std {
            let r = dp.row(xo + a) * &pis;
            ext.row_mut(xo + a).copy_from(&r);
        }
        space.trace = trace_std.iter().map(|t| t * &ext).collect();
        space.rot = &rot_std * &ext;
        space.pi0 = &pi0_std * &ext;
        space.ext = ext;
        space.pi_s = Some(pis);
        Ok(space)
    }

    /// Active DOFs of a vector field given pointwise value and rot (local coordinates).
    pub fn dofs_of<F: Fn(&P2) -> (P2, f64)>(&self, geom: &FaceGeom, f: F) -> nalgebra::DVector<f64> {
        &self.select * std_edge_dofs(geom, self.k, f)
    }
}

fn vstack(rows: &[DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let nr: usize = rows.iter().map(|r| r.nrows()).sum();
    let mut m = DMatrix::zeros(nr, ncols);
    let mut o = 0;
    for r in rows {
        m.rows_mut(o, r.nrows()).copy_from(r);
        o += r.nrows();
    }
    m
}

/// Standard edge-space DOFs of a field, by quadrature on `geom`.
pub fn std_edge_dofs<F: Fn(&P2) -> (P2, f64)>(geom: &FaceGeom, k: usize, f: F) -> nalgebra::DVector<f64> {
    let m = geom.edges.len();
    let (ne, nx, nr) = FaceEdgeSpace::std_sizes(k, m);
    let mut d = nalgebra::DVector::zeros(ne + nx + nr);
    for (i, e) in geom.edges.iter().enumerate() {
        for (q, (&s, x)) in e.qs.iter().zip(&e.qx).enumerate() {
            let (v, _) = f(x);
            let vt = v[0] * e.tangent[0] + v[1] * e.tangent[1];
            let mut sp = 1.0;
            for p in 0..=k {
                d[i * (k + 1) + p] += e.qw[q] * vt * sp / e.len;
                sp *= s;
            }
        }
    }
    let mono = Monomials::new(2, k as i32);
    let monor = Monomials::new(2, k as i32 - 1);
    let means = geom.means(k as i32 - 1);
    for (x, &w) in geom.qx.iter().zip(&geom.qw) {
        let (v, r) = f(x);
        let xi = geom.xi(x);
        let vx = v[0] * xi[0] + v[1] * xi[1];
        for (a, ma) in mono.eval(&xi).iter().enumerate() {
            d[ne + a] += w * vx * ma / geom.area;
        }
        if nr > 0 {
            let mr = monor.eval(&xi);
            for b in 1..mr.len() {
                d[ne + nx + b - 1] += w * r * (mr[b] - means[b]) * geom.h / geom.area;
            }
        }
    }
    d
}

/// Nodal space `V^n_{k+1}(f)` or its serendipity reduction.
#[derive(Clone, Debug)]
pub struct FaceNodalSpace {
    pub face: usize,
    pub k: usize,
    pub mode: Mode,
    pub eta: usize,
    pub beta: i32,
    pub kappa: i32,
    pub n_verts: usize,
    pub nx: usize,
    pub nx_std: usize,
    pub n_std: usize,
    pub ndofs: usize,
    pub select: DMatrix<f64>,
    pub ext: DMatrix<f64>,
    /// Per loop edge: coefficients of `q|_e` in powers of `s` (degree `k+1`).
    pub trace: Vec<DMatrix<f64>>,
    /// Moments `∫_f q m_α` for `|α| <= k`.
    pub l2mom: DMatrix<f64>,
    pub pi_s: Option<DMatrix<f64>>,
}

impl FaceNodalSpace {
    pub fn x_offset(&self) -> usize {
        self.n_verts * (self.k + 1)
    }

    pub fn new(mesh: &Mesh, geom: &FaceGeom, k: usize, mode: Mode) -> Result<FaceNodalSpace> {
        let face = geom.face;
        let eta = mesh.faces[face].eta;
        let m = geom.edges.len();
        let b = beta(k, eta);
        let kappa = kept_degree(k, eta, mode);
        let ki = k as i32;
        let nx_std = full_dim(2, ki);
        let nx = full_dim(2, kappa);
        let xo = m * (k + 1);
        let n_std = xo + nx_std;
        let ndofs = xo + nx;
        let h = geom.h;

        // trace on each edge from end values and k moments
        let mut cm = DMatrix::zeros(k + 2, k + 2);
        for i in 0..k + 2 {
            cm[(0, i)] = if i % 2 == 0 { 1.0 } else { -1.0 };
            cm[(1, i)] = 1.0;
            for j in 0..k {
                cm[(2 + j, i)] = if (i + j) % 2 == 0 { 1.0 / (i + j + 1) as f64 } else { 0.0 };
            }
        }
        let cinv = linalg::inverse(&cm, "edge trace")?;
        let trace_std: Vec<DMatrix<f64>> = geom
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let (a, bb) = if e.sign > 0.0 { (i, (i + 1) % m) } else { ((i + 1) % m, i) };
                let mut sel = DMatrix::zeros(k + 2, n_std);
                sel[(0, a)] = 1.0;
                sel[(1, bb)] = 1.0;
                for j in 0..k {
                    sel[(2 + j, m + i * k + j)] = 1.0;
                }
                &cinv * sel
            })
            .collect();

        let mono_k = Monomials::new(2, ki);
        let mut l2_std = DMatrix::zeros(nx_std, n_std);
        for (i, e) in geom.edges.iter().enumerate() {
            let xn = e.qx[0][0] * e.nout[0] + e.qx[0][1] * e.nout[1];
            for (q, (&s, x)) in e.qs.iter().zip(&e.qx).enumerate() {
                let mv = mono_k.eval(&geom.xi(x));
                let mut sp = 1.0;
                for p in 0..k + 2 {
                    for a in 0..nx_std {
                        let c = e.qw[q] * xn * mv[a] * sp;
                        for col in 0..n_std {
                            l2_std[(a, col)] += c * trace_std[i][(p, col)];
                        }
                    }
                    sp *= s;
                }
            }
        }
        for a in 0..nx_std {
            l2_std[(a, xo + a)] -= h * geom.area;
            let deg = mono_k.total_degree(a) as f64;
            l2_std.row_mut(a).scale_mut(1.0 / (2.0 + deg));
        }

        let mut ext0 = DMatrix::zeros(n_std, ndofs);
        let mut select = DMatrix::zeros(ndofs, n_std);
        for j in 0..ndofs {
            ext0[(j, j)] = 1.0;
            select[(j, j)] = 1.0;
        }
        let mut space = FaceNodalSpace {
            face,
            k,
            mode,
            eta,
            beta: b,
            kappa,
            n_verts: m,
            nx,
            nx_std,
            n_std,
            ndofs,
            select,
            ext: ext0.clone(),
            trace: trace_std.clone(),
            l2mom: l2_std.clone(),
            pi_s: None,
        };
        if mode == Mode::Standard {
            return Ok(space);
        }

        let mono1 = Monomials::new(2, ki + 1);
        let n1 = mono1.len();
        let dq = {
            let mut d = DMatrix::zeros(n_std, n1);
            for j in 0..n1 {
                let col = std_nodal_dofs(geom, k, |x| {
                    let (v, g) = mono_grad(&mono1, h, x);
                    (v[j], g[j])
                });
                d.column_mut(j).copy_from(&col);
            }
            d
        };
        let mut rows: Vec<DMatrix<f64>> = Vec::new();
        for g in 1..n1 {
            let mut row = DMatrix::zeros(1, n_std);
            for (i, e) in geom.edges.iter().enumerate() {
                for (q, (&s, x)) in e.qs.iter().zip(&e.qx).enumerate() {
                    let (_, gr) = mono_grad(&mono1, h, x);
                    let dt = gr[g][0] * e.tangent[0] + gr[g][1] * e.tangent[1];
                    // d/ds along the edge: q' = (2/len) Σ p a_p s^{p-1}
                    let mut sp = 1.0;
                    for p in 1..k + 2 {
                        row += trace_std[i].row(p) * (e.qw[q] * dt * (2.0 / e.len) * p as f64 * sp);
                        sp *= s;
                    }
                }
            }
            rows.push(row);
        }
        let mut n2 = DMatrix::zeros(1, n_std);
        for (i, e) in geom.edges.iter().enumerate() {
            let xn = e.qx[0][0] * e.nout[0] + e.qx[0][1] * e.nout[1];
            for (q, &s) in e.qs.iter().enumerate() {
                let mut sp = 1.0;
                for p in 0..k + 2 {
                    n2 += trace_std[i].row(p) * (e.qw[q] * xn * sp / h);
                    sp *= s;
                }
            }
        }
        rows.push(n2);
        for a in 0..nx {
            rows.push(unit_row(n_std, xo + a, 1.0));
        }
        let l = vstack(&rows, n_std);
        let pis = solve_projector(face, &l * &dq, &l * &ext0)?;
        let mut ext = ext0;
        for a in nx..nx_std {
            let r = dq.row(xo + a) * &pis;
            ext.row_mut(xo + a).copy_from(&r);
        }
        space.trace = trace_std.iter().map(|t| t * &ext).collect();
        space.l2mom = &l2_std * &ext;
        space.ext = ext;
        space.pi_s = Some(pis);
        Ok(space)
    }

    pub fn dofs_of<F: Fn(&P2) -> (f64, P2)>(&self, geom: &FaceGeom, f: F) -> nalgebra::DVector<f64> {
        &self.select * std_nodal_dofs(geom, self.k, f)
    }

    /// Coefficients of the `L²(f)` projection onto `P_k(f)`.
    pub fn pi0(&self, geom: &FaceGeom) -> Result<DMatrix<f64>> {
        let mass = geom.mass(self.k as i32);
        linalg::solve_square(&mass, &self.l2mom, "face nodal projection")
    }
}

/// Standard nodal-space DOFs of a scalar field given value and gradient.
pub fn std_nodal_dofs<F: Fn(&P2) -> (f64, P2)>(geom: &FaceGeom, k: usize, f: F) -> nalgebra::DVector<f64> {
    let m = geom.edges.len();
    let nx = full_dim(2, k as i32);
    let mut d = nalgebra::DVector::zeros(m * (k + 1) + nx);
    for (i, v) in geom.verts.iter().enumerate() {
        d[i] = f(v).0;
    }
    for (i, e) in geom.edges.iter().enumerate() {
        for (q, (&s, x)) in e.qs.iter().zip(&e.qx).enumerate() {
            let qv = f(x).0;
            let mut sp = 1.0;
            for p in 0..k {
                d[m + i * k + p] += e.qw[q] * qv * sp / e.len;
                sp *= s;
            }
        }
    }
    let mono = Monomials::new(2, k as i32);
    let xo = m * (k + 1);
    for (x, &w) in geom.qx.iter().zip(&geom.qw) {
        let (_, g) = f(x);
        let xi = geom.xi(x);
        let gx = g[0] * xi[0] + g[1] * xi[1];
        for (a, ma) in mono.eval(&xi).iter().enumerate() {
            d[xo + a] += w * gx * ma / geom.area;
        }
    }
    d
}

/// DOF-level tangential gradient: nodal DOFs of `q` to edge DOFs of `∇q`.
pub fn face_grad_dofs(geom: &FaceGeom, nodal: &FaceNodalSpace, edge: &FaceEdgeSpace) -> DMatrix<f64> {
    let k = edge.k;
    let mut g = DMatrix::zeros(edge.ndofs, nodal.ndofs);
    for (i, tr) in nodal.trace.iter().enumerate() {
        let len = geom.edges[i].len;
        for j in 0..=k {
            // (1/|e|) ∫_e ∂_t q s^j ds = (1/|e|) ∫_{-1}^{1} q'(s) s^j ds
            let mut row = nalgebra::RowDVector::zeros(nodal.ndofs);
            for p in 1..k + 2 {
                let e = p - 1 + j;
                if e % 2 == 0 {
                    row += tr.row(p) * (p as f64 * 2.0 / ((e + 1) as f64 * len));
                }
            }
            g.row_mut(i * (k + 1) + j).copy_from(&row);
        }
    }
    let (xo_n, xo_e) = (nodal.x_offset(), edge.x_offset());
    for a in 0..edge.nx.min(nodal.nx) {
        g[(xo_e + a, xo_n + a)] = 1.0;
    }
    g
}

/// Face inner product `‖Π⁰_{k+1} v‖² + h_f ‖(I - Π⁰_{k+1}) v·t‖²_{∂f}`.
pub fn edge_product_boundary(space: &FaceEdgeSpace, geom: &FaceGeom) -> DMatrix<f64> {
    let k = space.k as i32;
    let n1 = full_dim(2, k + 1);
    let mass = geom.mass(k + 1);
    let mut g = DMatrix::zeros(2 * n1, 2 * n1);
    g.view_mut((0, 0), (n1, n1)).copy_from(&mass);
    g.view_mut((n1, n1), (n1, n1)).copy_from(&mass);
    let mut m = space.pi0.transpose() * g * &space.pi0;
    let mono = Monomials::new(2, k + 1);
    for (i, e) in geom.edges.iter().enumerate() {
        for (q, (&s, x)) in e.qs.iter().zip(&e.qx).enumerate() {
            let mv = mono.eval(&geom.xi(x));
            let mut row = nalgebra::RowDVector::zeros(space.ndofs);
            let mut sp = 1.0;
            for p in 0..=space.k {
                row += space.trace[i].row(p) * sp;
                sp *= s;
            }
            for a in 0..n1 {
                let c = mv[a];
                row -= space.pi0.row(a) * (c * e.tangent[0]);
                row -= space.pi0.row(n1 + a) * (c * e.tangent[1]);
            }
            m += row.transpose() * &row * (geom.h * e.qw[q]);
        }
    }
    m
}

/// Face inner product `‖Π⁰_k v‖² + Σ_i (h_f dof_i((I - Π⁰_k) v))²`.
pub fn edge_product_dofs(space: &FaceEdgeSpace, geom: &FaceGeom) -> Result<DMatrix<f64>> {
    let k = space.k as i32;
    let (nk, n1) = (full_dim(2, k), full_dim(2, k + 1));
    let mk = geom.mass(k);
    let mixed = geom.mixed_mass(k, k + 1);
    let red = linalg::solve_square(&mk, &mixed, "face mass")?;
    let mut pik = DMatrix::zeros(2 * nk, space.ndofs);
    for c in 0..2 {
        let b = &red * space.pi0.rows(c * n1, n1);
        pik.rows_mut(c * nk, nk).copy_from(&b);
    }
    let mut g = DMatrix::zeros(2 * nk, 2 * nk);
    g.view_mut((0, 0), (nk, nk)).copy_from(&mk);
    g.view_mut((nk, nk), (nk, nk)).copy_from(&mk);
    let mono = Monomials::new(2, k);
    let mut dp = DMatrix::zeros(space.ndofs, 2 * nk);
    for j in 0..2 * nk {
        let mut c = vec![0.0; 2 * nk];
        c[j] = 1.0;
        dp.column_mut(j).copy_from(&space.dofs_of(geom, |x| eval_vec2(&mono, geom.h, &c, x)));
    }
    let s = (DMatrix::identity(space.ndofs, space.ndofs) - dp * &pik) * geom.h;
    Ok(pik.transpose() * g * &pik + s.transpose() * s)
}

/// Face inner product used for tangential traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FaceProduct {
    #[default]
    Boundary,
    Dofs,
}

/// Per-face spaces and operators shared by the adjacent cells.
#[derive(Clone, Debug)]
pub struct FaceData {
    pub geom: FaceGeom,
    pub edge: FaceEdgeSpace,
    pub nodal: FaceNodalSpace,
    /// Nodal DOFs to edge DOFs of the tangential gradient.
    pub grad: DMatrix<f64>,
    /// Inner product matrix on the edge space.
    pub product: DMatrix<f64>,
}

impl FaceData {
    pub fn new(mesh: &Mesh, face: usize, k: usize, mode: Mode, product: FaceProduct) -> Result<FaceData> {
        let geom = FaceGeom::new(mesh, face, 2 * k + 4);
        let edge = FaceEdgeSpace::new(mesh, &geom, k, mode)?;
        let nodal = FaceNodalSpace::new(mesh, &geom, k, mode)?;
        let grad = face_grad_dofs(&geom, &nodal, &edge);
        let product = match product {
            FaceProduct::Boundary => edge_product_boundary(&edge, &geom),
            FaceProduct::Dofs => edge_product_dofs(&edge, &geom)?,
        };
        Ok(FaceData { geom, edge, nodal, grad, product })
    }
}
