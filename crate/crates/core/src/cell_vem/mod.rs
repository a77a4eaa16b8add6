//! Local spaces on a polyhedron: edge, nodal, face and volume layouts, the
//! L² projections, the DOF-level grad/curl/div and the local inner products.
//!
//! Face-attached DOFs always use the global face frame and the canonical edge
//! tangents, so two cells sharing an entity produce identical functionals and
//! assembly needs no sign flips. Outward orientation enters only through the
//! cell face signs inside integration by parts.

mod dofs;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use dofs::*;

use crate::error::Result;
use crate::face_vem::{FaceData, FaceGeom, FaceProduct, Mode};
use crate::linalg;
use crate::mesh::geom::*;
use crate::mesh::Mesh;
use crate::poly::{cross_family_basis, decomposition_matrix, full_dim, CrossFamily, Decomp, Monomials};
use crate::quadrature::cell_rule;

/// Builds the face data of every mesh face in parallel.
pub fn build_face_data(mesh: &Mesh, k: usize, mode: Mode, product: FaceProduct) -> Result<Vec<FaceData>> {
    (0..mesh.num_faces()).into_par_iter().map(|f| FaceData::new(mesh, f, k, mode, product)).collect()
}

/// Quadrature used to evaluate the DOFs of a given field on one cell.
pub struct Sampling<'a> {
    pub geoms: Vec<&'a FaceGeom>,
    pub frame: &'a CellFrame,
    /// Exactness of the edge rules.
    pub deg: usize,
}

/// Owned high-order rules for interpolating non-polynomial data.
pub struct SamplingRules {
    geoms: Vec<FaceGeom>,
    frame: CellFrame,
    deg: usize,
}

impl SamplingRules {
    pub fn new(mesh: &Mesh, ops: &CellOps, deg: usize) -> Result<SamplingRules> {
        let frame = CellFrame { rule: cell_rule(mesh, ops.cell, deg)?, ..ops.frame.clone() };
        Ok(SamplingRules { geoms: cell_face_geoms(mesh, ops.cell, deg), frame, deg })
    }

    pub fn view(&self) -> Sampling<'_> {
        Sampling { geoms: self.geoms.iter().collect(), frame: &self.frame, deg: self.deg }
    }
}

/// Mesh entity carrying a DOF.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DofEntity {
    Vertex(usize),
    Edge(usize),
    Face(usize),
    Cell(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LocalDof {
    pub entity: DofEntity,
    pub index: usize,
}

/// Stabilization of the local edge inner product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EdgeStab {
    /// Euclidean product of the DOFs of `(I - Π⁰_k) v`.
    #[default]
    Dofs,
    /// Face inner products of the tangential traces of `(I - Π⁰_k) v`.
    Faces,
}

/// Local face inner product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FaceSpaceProduct {
    /// Scaled Euclidean product of the DOFs.
    #[default]
    Cheap,
    /// `‖Π⁰_{k+1} w‖² + h_P Σ_f ‖(I - Π⁰_{k+1}) w·n_f‖²_f`.
    Full,
}

/// Local spaces and operators of one cell.
#[derive(Clone, Debug)]
pub struct CellOps {
    pub cell: usize,
    pub k: usize,
    pub frame: CellFrame,
    pub fam: CrossFamily,
    pub edge_dofs: Vec<LocalDof>,
    pub nodal_dofs: Vec<LocalDof>,
    pub face_dofs: Vec<LocalDof>,
    /// Per cell face: positions of the face edge-space DOFs among the cell edge DOFs.
    pub edge_gather: Vec<Vec<usize>>,
    /// Per cell face: positions of the face nodal DOFs among the cell nodal DOFs.
    pub nodal_gather: Vec<Vec<usize>>,
    /// Per cell face: offset of its normal moments among the cell face DOFs.
    pub face_offset: Vec<usize>,
    /// Edge DOFs to `(P_k)³` coefficients of `Π⁰_k`.
    pub pi0_edge: DMatrix<f64>,
    /// Nodal DOFs to `P_{k-1}` coefficients of `Π⁰_{k-1}`.
    pub pi0_nodal: DMatrix<f64>,
    pub grad: DMatrix<f64>,
    pub curl: DMatrix<f64>,
    /// Face DOFs to `P_{k-1}` coefficients of the divergence.
    pub div: DMatrix<f64>,
    /// Edge DOFs of the monomial fields `m_a e_c`, `|a| <= k`.
    pub edge_poly: DMatrix<f64>,
    /// Face DOFs of the monomial fields `m_a e_c`, `|a| <= k-1`.
    pub face_poly: DMatrix<f64>,
    restrict: Vec<DMatrix<f64>>,
}

impl CellOps {
    pub fn n_edge(&self) -> usize {
        self.edge_dofs.len()
    }

    pub fn n_nodal(&self) -> usize {
        self.nodal_dofs.len()
    }

    pub fn n_face(&self) -> usize {
        self.face_dofs.len()
    }

    pub fn n_volume(&self) -> usize {
        full_dim(3, self.k as i32 - 1)
    }

    /// Offset of the interior block of the edge DOFs.
    pub fn edge_interior_offset(&self) -> usize {
        self.edge_dofs.iter().position(|d| matches!(d.entity, DofEntity::Cell(_))).unwrap_or(self.n_edge())
    }

    pub fn nodal_interior_offset(&self) -> usize {
        self.nodal_dofs.iter().position(|d| matches!(d.entity, DofEntity::Cell(_))).unwrap_or(self.n_nodal())
    }

    pub fn face_interior_offset(&self) -> usize {
        self.face_dofs.iter().position(|d| matches!(d.entity, DofEntity::Cell(_))).unwrap_or(self.n_face())
    }

    pub fn new(mesh: &Mesh, cell: usize, k: usize, faces: &[FaceData]) -> Result<CellOps> {
        let c = &mesh.cells[cell];
        let ki = k as i32;
        let h = c.diameter;
        let frame = CellFrame { center: c.barycenter, h, volume: c.volume, rule: cell_rule(mesh, cell, 2 * k + 4)? };
        let fam = cross_family_basis(ki, c.barycenter, h);
        let n4 = full_dim(3, ki - 1);
        let n5 = fam.len();
        let vloc: HashMap<usize, usize> = c.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let eloc: HashMap<usize, usize> = c.edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let nv = c.vertices.len();

        // edge-space layout
        let mut edge_dofs = Vec::new();
        for &e in &c.edges {
            edge_dofs.extend((0..=k).map(|i| LocalDof { entity: DofEntity::Edge(e), index: i }));
        }
        let mut edge_gather = Vec::with_capacity(c.faces.len());
        for &f in &c.faces {
            let sp = &faces[f].edge;
            let mut g: Vec<usize> = Vec::with_capacity(sp.ndofs);
            for &e in &mesh.faces[f].edges {
                g.extend((0..=k).map(|j| eloc[&e] * (k + 1) + j));
            }
            for t in 0..sp.ndofs - sp.x_offset() {
                g.push(edge_dofs.len());
                edge_dofs.push(LocalDof { entity: DofEntity::Face(f), index: t });
            }
            edge_gather.push(g);
        }
        let ie = edge_dofs.len();
        edge_dofs.extend((0..n4 + n5).map(|i| LocalDof { entity: DofEntity::Cell(cell), index: i }));

        // nodal layout
        let mut nodal_dofs: Vec<LocalDof> = c.vertices.iter().map(|&v| LocalDof { entity: DofEntity::Vertex(v), index: 0 }).collect();
        for &e in &c.edges {
            nodal_dofs.extend((0..k).map(|i| LocalDof { entity: DofEntity::Edge(e), index: i }));
        }
        let mut nodal_gather = Vec::with_capacity(c.faces.len());
        for &f in &c.faces {
            let sp = &faces[f].nodal;
            let face = &mesh.faces[f];
            let mut g: Vec<usize> = face.vertices.iter().map(|v| vloc[v]).collect();
            for &e in &face.edges {
                g.extend((0..k).map(|j| nv + eloc[&e] * k + j));
            }
            for t in 0..sp.nx {
                g.push(nodal_dofs.len());
                nodal_dofs.push(LocalDof { entity: DofEntity::Face(f), index: t });
            }
            nodal_gather.push(g);
        }
        let inn = nodal_dofs.len();
        nodal_dofs.extend((0..n4).map(|i| LocalDof { entity: DofEntity::Cell(cell), index: i }));

        // face-space layout
        let nf2 = full_dim(2, ki - 1);
        let mut face_dofs = Vec::new();
        let mut face_offset = Vec::new();
        for &f in &c.faces {
            face_offset.push(face_dofs.len());
            face_dofs.extend((0..nf2).map(|i| LocalDof { entity: DofEntity::Face(f), index: i }));
        }
        let iface = face_dofs.len();
        let n2 = if k > 1 { n4 - 1 } else { 0 };
        face_dofs.extend((0..n2 + n5).map(|i| LocalDof { entity: DofEntity::Cell(cell), index: i }));
        let (nde, ndn, ndf) = (edge_dofs.len(), nodal_dofs.len(), face_dofs.len());

        // restriction of cell monomials of degree <= k+2 to each face
        let restrict: Vec<DMatrix<f64>> = c
            .faces
            .iter()
            .map(|&f| restriction(mesh, &faces[f].geom, &frame, ki + 2))
            .collect::<Result<_>>()?;

        let mut ops = CellOps {
            cell,
            k,
            frame,
            fam,
            edge_dofs,
            nodal_dofs,
            face_dofs,
            edge_gather,
            nodal_gather,
            face_offset,
            pi0_edge: DMatrix::zeros(0, 0),
            pi0_nodal: DMatrix::zeros(0, 0),
            grad: DMatrix::zeros(nde, ndn),
            curl: DMatrix::zeros(ndf, nde),
            div: DMatrix::zeros(n4, ndf),
            edge_poly: DMatrix::zeros(0, 0),
            face_poly: DMatrix::zeros(0, 0),
            restrict,
        };
        let vol = c.volume;

        // Π⁰_{k-1} on the nodal space
        let m4 = ops.cell_mass(ki - 1, ki - 1);
        let mut sel = DMatrix::zeros(n4, ndn);
        for a in 0..n4 {
            sel[(a, inn + a)] = vol;
        }
        ops.pi0_nodal = linalg::solve_square(&m4, &sel, "cell mass")?;

        // grad
        for (lf, &f) in c.faces.iter().enumerate() {
            let fd = &faces[f];
            let (eg, ng) = (&ops.edge_gather[lf], &ops.nodal_gather[lf]);
            for (r, &gr) in eg.iter().enumerate() {
                for (cc, &gc) in ng.iter().enumerate() {
                    ops.grad[(gr, gc)] = fd.grad[(r, cc)];
                }
            }
        }
        {
            // (1/|P|) ∫ ∇q·x_P m_β = -(3+|β|)/h (1/|P|)∫ q m_β + (1/|P|) Σ σ_f (x_P·n_f)/h ∫_f q m_β
            let mono = Monomials::new(3, ki - 1);
            for b in 0..n4 {
                let deg = mono.total_degree(b) as f64;
                ops.grad[(ie + b, inn + b)] = -(3.0 + deg) / h;
            }
            for (lf, &f) in c.faces.iter().enumerate() {
                let fd = &faces[f];
                let face = &mesh.faces[f];
                let xn = c.face_signs[lf] * dot(&sub(&face.barycenter, &c.barycenter), &face.normal) / h;
                let r = ops.restrict[lf].view((0, 0), (nf2, n4));
                let l2 = fd.nodal.l2mom.rows(0, nf2);
                let contrib = r.transpose() * l2 * (xn / vol);
                for b in 0..n4 {
                    for (cc, &gc) in ops.nodal_gather[lf].iter().enumerate() {
                        ops.grad[(ie + b, gc)] += contrib[(b, cc)];
                    }
                }
            }
        }

        // curl
        for (lf, &f) in c.faces.iter().enumerate() {
            let fd = &faces[f];
            let sign = c.face_signs[lf];
            let mf = fd.geom.mass(ki - 1);
            let mrot = &mf * &fd.edge.rot;
            for a in 0..nf2 {
                for (cc, &gc) in ops.edge_gather[lf].iter().enumerate() {
                    ops.curl[(ops.face_offset[lf] + a, gc)] = mrot[(a, cc)] / fd.geom.area;
                }
            }
            if n2 > 0 {
                // (h/|P|) σ_f ∫_f m_α rot_f v
                let r = ops.restrict[lf].view((0, 0), (nf2, n4));
                let contrib = r.transpose() * &mrot * (sign * h / vol);
                for a in 1..n4 {
                    for (cc, &gc) in ops.edge_gather[lf].iter().enumerate() {
                        ops.curl[(iface + a - 1, gc)] += contrib[(a, cc)];
                    }
                }
            }
        }
        for j in 0..n5 {
            ops.curl[(iface + n2 + j, ie + n4 + j)] = 1.0 / h;
        }

        // div: ∫ div w m_α = -∫ w·∇m_α + Σ σ_f ∫_f (w·n_f) m_α
        {
            let mut mom = DMatrix::zeros(n4, ndf);
            for a in 1..n4.min(n2 + 1) {
                mom[(a, iface + a - 1)] = -vol / h;
            }
            for (lf, &f) in c.faces.iter().enumerate() {
                let area = faces[f].geom.area;
                let r = ops.restrict[lf].view((0, 0), (nf2, n4));
                for a in 0..n4 {
                    for g in 0..nf2 {
                        mom[(a, ops.face_offset[lf] + g)] += c.face_signs[lf] * area * r[(g, a)];
                    }
                }
            }
            ops.div = linalg::solve_square(&m4, &mom, "cell mass")?;
        }

        // polynomial DOF tables
        let monok = Monomials::new(3, ki);
        let nk = monok.len();
        let frame = ops.frame.clone();
        let smp = Sampling { geoms: c.faces.iter().map(|&f| &faces[f].geom).collect(), frame: &frame, deg: 2 * k + 4 };
        let cols: Vec<DVector<f64>> = (0..3 * nk)
            .map(|j| {
                let (comp, a) = (j / nk, j % nk);
                let (fr, monok) = (&ops.frame, &monok);
                let field = move |x: &Point| {
                    let (v, g) = monok.eval_grad(&fr.xi(x));
                    let mut val = [0.0; 3];
                    val[comp] = v[a];
                    let mut ec = [0.0; 3];
                    ec[comp] = 1.0;
                    (val, scale(&cross(&g[a], &ec), 1.0 / fr.h))
                };
                ops.edge_dofs_of(mesh, faces, &smp, &field)
            })
            .collect();
        ops.edge_poly = DMatrix::from_columns(&cols);
        let monok1 = Monomials::new(3, ki - 1);
        let nk1 = monok1.len();
        let cols: Vec<DVector<f64>> = (0..3 * nk1)
            .map(|j| {
                let (comp, a) = (j / nk1, j % nk1);
                let (fr, monok1) = (&ops.frame, &monok1);
                let field = move |x: &Point| {
                    let mut val = [0.0; 3];
                    val[comp] = monok1.eval(&fr.xi(x))[a];
                    val
                };
                ops.face_dofs_of(mesh, &smp, &field)
            })
            .collect();
        ops.face_poly = DMatrix::from_columns(&cols);

        ops.pi0_edge = ops.build_pi0_edge(mesh, faces)?;
        Ok(ops)
    }

    /// `∫_P m_a m_b` for `|a| <= d1`, `|b| <= d2`.
    pub fn cell_mass(&self, d1: i32, d2: i32) -> DMatrix<f64> {
        self.weighted_mass(d1, d2, None)
    }

    fn weighted_mass(&self, d1: i32, d2: i32, weight: Option<&[f64]>) -> DMatrix<f64> {
        let (m1, m2) = (Monomials::new(3, d1), Monomials::new(3, d2));
        let mut g = DMatrix::zeros(m1.len(), m2.len());
        for (q, (p, &w)) in self.frame.rule.points.iter().zip(&self.frame.rule.weights).enumerate() {
            let xi = self.frame.xi(p);
            let (a, b) = (m1.eval(&xi), m2.eval(&xi));
            let w = w * weight.map_or(1.0, |mu| mu[q]);
            for i in 0..a.len() {
                for j in 0..b.len() {
                    g[(i, j)] += w * a[i] * b[j];
                }
            }
        }
        g
    }

    /// Cell edge DOFs of a field, with face/edge integrals on the given face geometries.
    pub fn edge_dofs_of(&self, mesh: &Mesh, faces: &[FaceData], s: &Sampling, v: VecField) -> DVector<f64> {
        let c = &mesh.cells[self.cell];
        let k = self.k;
        let mut d = DVector::zeros(self.n_edge());
        for (le, &e) in c.edges.iter().enumerate() {
            let m = edge_tangent_moments(mesh, e, k, s.deg, v);
            d.rows_mut(le * (k + 1), k + 1).copy_from_slice(&m);
        }
        for (lf, &f) in c.faces.iter().enumerate() {
            let sp = &faces[f].edge;
            let m = face_edge_interior(mesh, sp, s.geoms[lf], v);
            for (t, x) in m.into_iter().enumerate() {
                d[self.edge_gather[lf][sp.x_offset() + t]] = x;
            }
        }
        let ie = self.edge_interior_offset();
        let m = cell_edge_interior(s.frame, k, &self.fam, v);
        d.rows_mut(ie, m.len()).copy_from_slice(&m);
        d
    }

    /// Cell nodal DOFs of a scalar field.
    pub fn nodal_dofs_of(&self, mesh: &Mesh, faces: &[FaceData], s: &Sampling, q: ScalarField) -> DVector<f64> {
        let c = &mesh.cells[self.cell];
        let k = self.k;
        let mut d = DVector::zeros(self.n_nodal());
        for (i, &v) in c.vertices.iter().enumerate() {
            d[i] = q(&mesh.vertices[v]).0;
        }
        let nv = c.vertices.len();
        for (le, &e) in c.edges.iter().enumerate() {
            let m = edge_scalar_moments(mesh, e, k, s.deg, q);
            d.rows_mut(nv + le * k, k).copy_from_slice(&m);
        }
        for (lf, &f) in c.faces.iter().enumerate() {
            let sp = &faces[f].nodal;
            let m = face_nodal_interior(mesh, sp, s.geoms[lf], q);
            for (t, x) in m.into_iter().enumerate() {
                d[self.nodal_gather[lf][sp.x_offset() + t]] = x;
            }
        }
        let io = self.nodal_interior_offset();
        let m = cell_nodal_interior(s.frame, k, q);
        d.rows_mut(io, m.len()).copy_from_slice(&m);
        d
    }

    /// Cell face-space DOFs of a vector field.
    pub fn face_dofs_of(&self, mesh: &Mesh, s: &Sampling, w: &(dyn Fn(&Point) -> Vec3 + Sync)) -> DVector<f64> {
        let mut d = DVector::zeros(self.n_face());
        for (lf, g) in s.geoms.iter().enumerate() {
            let m = face_normal_moments(mesh, g, self.k, w);
            d.rows_mut(self.face_offset[lf], m.len()).copy_from_slice(&m);
        }
        let io = self.face_interior_offset();
        let m = cell_face_interior(s.frame, self.k, &self.fam, w);
        d.rows_mut(io, m.len()).copy_from_slice(&m);
        d
    }

    fn build_pi0_edge(&self, mesh: &Mesh, faces: &[FaceData]) -> Result<DMatrix<f64>> {
        let (dmat, fmat) = self.pi0_edge_system(mesh, faces);
        let dinv_t = linalg::inverse(&dmat, "cell curl decomposition")?.transpose();
        let rhs = dinv_t * fmat;
        let ki = self.k as i32;
        let mk = self.cell_mass(ki, ki);
        let nk = mk.nrows();
        let mut out = DMatrix::zeros(3 * nk, self.n_edge());
        for comp in 0..3 {
            let blk = linalg::solve_square(&mk, &rhs.rows(comp * nk, nk).into_owned(), "cell mass")?;
            out.rows_mut(comp * nk, nk).copy_from(&blk);
        }
        Ok(out)
    }

    /// Decomposition matrix and the moments `∫ v·(generator)` as rows over the edge DOFs.
    pub(crate) fn pi0_edge_system(&self, mesh: &Mesh, faces: &[FaceData]) -> (DMatrix<f64>, DMatrix<f64>) {
        let c = &mesh.cells[self.cell];
        let ki = self.k as i32;
        let (h, vol) = (self.frame.h, self.frame.volume);
        let (dmat, npot) = decomposition_matrix(Decomp::Curl3d, ki, self.frame.center, h);
        let n4 = full_dim(3, ki - 1);
        let ie = self.edge_interior_offset();
        let monok = Monomials::new(3, ki);
        let mut fmat = DMatrix::zeros(dmat.ncols(), self.n_edge());
        for j in 0..npot {
            fmat[(j, ie + n4 + j)] = vol / h;
        }
        for b in 0..n4 {
            fmat[(npot + b, ie + b)] = vol;
        }
        // Σ_f σ_f ∫_f (n_f ∧ g_j)^τ · Π⁰_{k+1} v^τ
        for (lf, &f) in c.faces.iter().enumerate() {
            let fd = &faces[f];
            let face = &mesh.faces[f];
            let mono_f = Monomials::new(2, ki + 1);
            let n1 = mono_f.len();
            let mut mom = DMatrix::zeros(npot, 2 * n1);
            for (x, &w) in fd.geom.qx.iter().zip(&fd.geom.qw) {
                let p = face.to_global(x);
                let xi = self.frame.xi(&p);
                let mk = monok.eval(&xi);
                let mf = mono_f.eval(&fd.geom.xi(x));
                for (j, &(i, cc)) in self.fam.generators.iter().enumerate() {
                    let t = face.tangential(&cross(&face.normal, &cross_gen(&xi, mk[i], cc)));
                    for b in 0..n1 {
                        mom[(j, b)] += w * t[0] * mf[b];
                        mom[(j, n1 + b)] += w * t[1] * mf[b];
                    }
                }
            }
            let contrib = mom * &fd.edge.pi0 * c.face_signs[lf];
            for j in 0..npot {
                for (cc, &gc) in self.edge_gather[lf].iter().enumerate() {
                    fmat[(j, gc)] += contrib[(j, cc)];
                }
            }
        }
        (dmat, fmat)
    }

    /// Face DOFs to `(P_s)³` coefficients of `Π⁰_s`, `0 <= s <= k+1`.
    pub fn pi0_face(&self, mesh: &Mesh, faces: &[FaceData], s: usize) -> Result<DMatrix<f64>> {
        let c = &mesh.cells[self.cell];
        let (ki, si) = (self.k as i32, s as i32);
        let (h, vol) = (self.frame.h, self.frame.volume);
        let (dmat, npot) = decomposition_matrix(Decomp::Grad3d, si, self.frame.center, h);
        let nf2 = full_dim(2, ki - 1);
        let mut fmat = DMatrix::zeros(dmat.ncols(), self.n_face());
        // ∫ w·∇r = -∫ div w r + Σ σ_f ∫_f (w·n_f) r, r = m_i, 1 <= i < dim P_{s+1}
        let mixed = self.cell_mass(ki - 1, si + 1);
        let divpart = mixed.transpose() * &self.div;
        for i in 1..=npot {
            fmat.row_mut(i - 1).copy_from(&(-divpart.row(i)));
        }
        for (lf, &f) in c.faces.iter().enumerate() {
            let g = &faces[f].geom;
            // (w·n)|_f = Σ_γ coef_γ m_γ with coef = |f| M^{-1} D
            let mf = g.mass(ki - 1);
            let mut dsel = DMatrix::zeros(nf2, self.n_face());
            for a in 0..nf2 {
                dsel[(a, self.face_offset[lf] + a)] = g.area;
            }
            let coef = linalg::solve_square(&mf, &dsel, "face mass")?;
            let r = self.restriction_to(lf, si + 1);
            let contrib = r.transpose() * g.mixed_mass(si + 1, ki - 1) * coef * c.face_signs[lf];
            for i in 1..=npot {
                let row = fmat.row(i - 1) + contrib.row(i);
                fmat.row_mut(i - 1).copy_from(&row);
            }
        }
        // ∫ w·(x_P ∧ q) for the cross family of degree s-1, expressed in the degree-k family
        if dmat.ncols() > npot {
            let lower = cross_family_basis(si - 1, self.frame.center, h);
            let nk1 = full_dim(3, ki + 1);
            let to_vec = |p: &crate::poly::PolyCoeffs| {
                let p = p.raised(ki + 1);
                DVector::from_iterator(3 * nk1, (0..3).flat_map(|cc| p.component(cc)[..nk1].to_vec()))
            };
            let a = DMatrix::from_columns(&self.fam.polys.iter().map(to_vec).collect::<Vec<_>>());
            let b = DMatrix::from_columns(&lower.polys.iter().map(to_vec).collect::<Vec<_>>());
            let (coef, _) = linalg::lstsq(&a, &b, linalg::RANK_TOL);
            let n2 = if self.k > 1 { full_dim(3, ki - 1) - 1 } else { 0 };
            let io = self.face_interior_offset() + n2;
            for t in 0..lower.len() {
                for j in 0..self.fam.len() {
                    fmat[(npot + t, io + j)] = vol * coef[(j, t)];
                }
            }
        }
        let dinv_t = linalg::inverse(&dmat, "cell grad decomposition")?.transpose();
        let rhs = dinv_t * fmat;
        let ns = full_dim(3, si);
        let ms = self.cell_mass(si, si);
        let mut out = DMatrix::zeros(3 * ns, self.n_face());
        for comp in 0..3 {
            let blk = linalg::solve_square(&ms, &rhs.rows(comp * ns, ns).into_owned(), "cell mass")?;
            out.rows_mut(comp * ns, ns).copy_from(&blk);
        }
        Ok(out)
    }

    /// Coefficients on face `lf` of the restrictions of the cell monomials of degree `<= d`.
    fn restriction_to(&self, lf: usize, d: i32) -> DMatrix<f64> {
        let r = &self.restrict[lf];
        r.view((0, 0), (full_dim(2, d), full_dim(3, d))).into_owned()
    }

    /// Stabilized local edge inner product with permeability samples `mu`.
    pub fn edge_product(&self, mesh: &Mesh, faces: &[FaceData], mu: &(dyn Fn(&Point) -> f64 + Sync), stab: EdgeStab) -> DMatrix<f64> {
        let ki = self.k as i32;
        let muv: Vec<f64> = self.frame.rule.points.iter().map(|p| mu(p)).collect();
        let mu0 = muv.iter().cloned().fold(f64::INFINITY, f64::min);
        let gm = self.weighted_mass(ki, ki, Some(&muv));
        let nk = gm.nrows();
        let mut g = DMatrix::zeros(3 * nk, 3 * nk);
        for comp in 0..3 {
            g.view_mut((comp * nk, comp * nk), (nk, nk)).copy_from(&gm);
        }
        let p = &self.pi0_edge;
        let mut m = p.transpose() * g * p;
        let n = self.n_edge();
        let s = DMatrix::identity(n, n) - &self.edge_poly * p;
        let h = self.frame.h;
        match stab {
            EdgeStab::Dofs => m += s.transpose() * &s * (mu0 * h.powi(3)),
            EdgeStab::Faces => {
                let c = &mesh.cells[self.cell];
                for (lf, &f) in c.faces.iter().enumerate() {
                    let sf = s.select_rows(self.edge_gather[lf].iter());
                    m += sf.transpose() * &faces[f].product * sf * (mu0 * h);
                }
            }
        }
        m
    }

    /// Local face inner product.
    pub fn face_product(&self, mesh: &Mesh, faces: &[FaceData], variant: FaceSpaceProduct) -> Result<DMatrix<f64>> {
        let n = self.n_face();
        let h = self.frame.h;
        match variant {
            FaceSpaceProduct::Cheap => Ok(DMatrix::identity(n, n) * h.powi(3)),
            FaceSpaceProduct::Full => {
                let ki = self.k as i32;
                // Π_{k+1} sees every interior moment, so the form is definite
                let p = self.pi0_face(mesh, faces, self.k + 1)?;
                let mk = self.cell_mass(ki + 1, ki + 1);
                let nk = mk.nrows();
                let mut g = DMatrix::zeros(3 * nk, 3 * nk);
                for comp in 0..3 {
                    g.view_mut((comp * nk, comp * nk), (nk, nk)).copy_from(&mk);
                }
                let mut m = p.transpose() * g * &p;
                let c = &mesh.cells[self.cell];
                let mono = Monomials::new(3, ki + 1);
                let mono_f = Monomials::new(2, ki - 1);
                for (lf, &f) in c.faces.iter().enumerate() {
                    let fd = &faces[f];
                    let face = &mesh.faces[f];
                    let mf = fd.geom.mass(ki - 1);
                    let nf2 = mf.nrows();
                    let mut dsel = DMatrix::zeros(nf2, n);
                    for a in 0..nf2 {
                        dsel[(a, self.face_offset[lf] + a)] = fd.geom.area;
                    }
                    let coef = linalg::solve_square(&mf, &dsel, "face mass")?;
                    for (x, &w) in fd.geom.qx.iter().zip(&fd.geom.qw) {
                        let xp = face.to_global(x);
                        let mv = mono.eval(&self.frame.xi(&xp));
                        let mfv = mono_f.eval(&fd.geom.xi(x));
                        let mut row = DVector::zeros(n);
                        for (a, v) in mfv.iter().enumerate() {
                            row += coef.row(a).transpose() * *v;
                        }
                        for comp in 0..3 {
                            for (a, v) in mv.iter().enumerate() {
                                row -= p.row(comp * nk + a).transpose() * (face.normal[comp] * v);
                            }
                        }
                        m += &row * row.transpose() * (w * h);
                    }
                }
                Ok(m)
            }
        }
    }
}

/// Restriction of the cell monomials of degree `<= d` to a face, as face
/// monomial coefficients, by expanding products of the affine coordinate maps.
fn restriction(mesh: &Mesh, geom: &FaceGeom, frame: &CellFrame, d: i32) -> Result<DMatrix<f64>> {
    let face = &mesh.faces[geom.face];
    let (m3, m2) = (Monomials::new(3, d), Monomials::new(2, d));
    let r = geom.h / frame.h;
    // cell coordinate i as a + b ξ₁ + c ξ₂ in face coordinates
    let aff: Vec<[f64; 3]> = (0..3)
        .map(|i| [(face.barycenter[i] - frame.center[i]) / frame.h, r * face.frame[0][i], r * face.frame[1][i]])
        .collect();
    let mut out = DMatrix::zeros(m2.len(), m3.len());
    for (j, e) in m3.exponents().iter().enumerate() {
        let mut p = vec![0.0; m2.len()];
        p[0] = 1.0;
        for (i, &pow) in e.iter().enumerate() {
            for _ in 0..pow {
                let mut q = vec![0.0; m2.len()];
                for (t, f) in m2.exponents().iter().enumerate() {
                    if p[t] == 0.0 {
                        continue;
                    }
                    q[t] += aff[i][0] * p[t];
                    if ((f[0] + f[1]) as i32) < d {
                        q[Monomials::index_of(2, [f[0] + 1, f[1], 0])] += aff[i][1] * p[t];
                        q[Monomials::index_of(2, [f[0], f[1] + 1, 0])] += aff[i][2] * p[t];
                    }
                }
                p = q;
            }
        }
        out.set_column(j, &DVector::from_vec(p));
    }
    Ok(out)
}

/// Face geometries of one cell at a given quadrature degree (for interpolation).
pub fn cell_face_geoms(mesh: &Mesh, cell: usize, deg: usize) -> Vec<FaceGeom> {
    mesh.cells[cell].faces.iter().map(|&f| FaceGeom::new(mesh, f, deg)).collect()
}
