//! Degrees of freedom of given fields, one mesh entity at a time.
//!
//! The same functions serve the polynomial DOF tables of the local
//! operators and the interpolation of exact fields, so both always use
//! identical functionals.

use crate::face_vem::{FaceEdgeSpace, FaceGeom, FaceNodalSpace};
use crate::mesh::geom::*;
use crate::mesh::Mesh;
use crate::poly::{full_dim, CrossFamily, Monomials};
use crate::quadrature::{edge_rule, QuadRule};

pub type Vec3 = [f64; 3];

/// Value and curl of a vector field.
pub type VecField<'a> = &'a (dyn Fn(&Point) -> (Vec3, Vec3) + Sync);
/// Value and gradient of a scalar field.
pub type ScalarField<'a> = &'a (dyn Fn(&Point) -> (f64, Vec3) + Sync);

/// `xi ∧ (m e_c)`.
pub fn cross_gen(xi: &Vec3, m: f64, c: usize) -> Vec3 {
    match c {
        0 => [0.0, m * xi[2], -m * xi[1]],
        1 => [-m * xi[2], 0.0, m * xi[0]],
        _ => [m * xi[1], -m * xi[0], 0.0],
    }
}

fn edge_points(mesh: &Mesh, e: usize, deg: usize) -> (QuadRule, Vec<f64>) {
    let rule = edge_rule(mesh, e, deg);
    let ed = &mesh.edges[e];
    let a = mesh.vertices[ed.vertices[0]];
    let s = rule.points.iter().map(|p| 2.0 * dot(&sub(p, &a), &ed.tangent) / ed.length - 1.0).collect();
    (rule, s)
}

/// `(1/|e|) ∫_e (v·t_e) s^i` for `i = 0..=k`, `s ∈ [-1, 1]` along the canonical tangent.
pub fn edge_tangent_moments(mesh: &Mesh, e: usize, k: usize, deg: usize, v: VecField) -> Vec<f64> {
    let ed = &mesh.edges[e];
    let (rule, s) = edge_points(mesh, e, deg);
    let mut d = vec![0.0; k + 1];
    for ((p, w), &s) in rule.points.iter().zip(&rule.weights).zip(&s) {
        let vt = dot(&v(p).0, &ed.tangent) * w / ed.length;
        let mut sp = 1.0;
        for x in d.iter_mut() {
            *x += vt * sp;
            sp *= s;
        }
    }
    d
}

/// `(1/|e|) ∫_e q s^i` for `i < k`.
pub fn edge_scalar_moments(mesh: &Mesh, e: usize, k: usize, deg: usize, q: ScalarField) -> Vec<f64> {
    let ed = &mesh.edges[e];
    let (rule, s) = edge_points(mesh, e, deg);
    let mut d = vec![0.0; k];
    for ((p, w), &s) in rule.points.iter().zip(&rule.weights).zip(&s) {
        let qv = q(p).0 * w / ed.length;
        let mut sp = 1.0;
        for x in d.iter_mut() {
            *x += qv * sp;
            sp *= s;
        }
    }
    d
}

/// Active face-interior DOFs (x-moments, then rot moments) of the tangential trace.
pub fn face_edge_interior(mesh: &Mesh, space: &FaceEdgeSpace, geom: &FaceGeom, v: VecField) -> Vec<f64> {
    let face = &mesh.faces[space.face];
    let d = space.dofs_of(geom, |x| {
        let (val, curl) = v(&face.to_global(x));
        (face.tangential(&val), dot(&curl, &face.normal))
    });
    d.as_slice()[space.x_offset()..].to_vec()
}

/// Active face-interior DOFs of the nodal space (moments of `∇_f q · x_f`).
pub fn face_nodal_interior(mesh: &Mesh, space: &FaceNodalSpace, geom: &FaceGeom, q: ScalarField) -> Vec<f64> {
    let face = &mesh.faces[space.face];
    let d = space.dofs_of(geom, |x| {
        let (val, g) = q(&face.to_global(x));
        (val, face.tangential(&g))
    });
    d.as_slice()[space.x_offset()..].to_vec()
}

/// `(1/|f|) ∫_f (w·n_f) m_β` for `|β| <= k - 1` (face-scaled monomials).
pub fn face_normal_moments(mesh: &Mesh, geom: &FaceGeom, k: usize, w: &(dyn Fn(&Point) -> Vec3 + Sync)) -> Vec<f64> {
    let face = &mesh.faces[geom.face];
    let mono = Monomials::new(2, k as i32 - 1);
    let mut d = vec![0.0; mono.len()];
    for (x, &wt) in geom.qx.iter().zip(&geom.qw) {
        let wn = dot(&w(&face.to_global(x)), &face.normal) * wt / geom.area;
        for (a, m) in d.iter_mut().zip(mono.eval(&geom.xi(x))) {
            *a += wn * m;
        }
    }
    d
}

/// Cell quadrature together with the cell scaling.
#[derive(Clone, Debug)]
pub struct CellFrame {
    pub center: Point,
    pub h: f64,
    pub volume: f64,
    pub rule: QuadRule,
}

impl CellFrame {
    pub fn xi(&self, x: &Point) -> Vec3 {
        scale(&sub(x, &self.center), 1.0 / self.h)
    }
}

/// Interior edge-space DOFs: `(1/|P|) ∫ v·x_P m_α`, `|α| <= k-1`, then
/// `(h_P/|P|) ∫ curl v · (x_P ∧ m e_c)` over the cross family.
pub fn cell_edge_interior(frame: &CellFrame, k: usize, fam: &CrossFamily, v: VecField) -> Vec<f64> {
    let mono = Monomials::new(3, k as i32 - 1);
    let monok = Monomials::new(3, k as i32);
    let n4 = mono.len();
    let mut d = vec![0.0; n4 + fam.len()];
    for (p, &w) in frame.rule.points.iter().zip(&frame.rule.weights) {
        let xi = frame.xi(p);
        let (val, curl) = v(p);
        let vx = dot(&val, &xi) * w / frame.volume;
        for (a, m) in mono.eval(&xi).iter().enumerate() {
            d[a] += vx * m;
        }
        let mk = monok.eval(&xi);
        let cw = frame.h * w / frame.volume;
        for (j, &(i, c)) in fam.generators.iter().enumerate() {
            d[n4 + j] += cw * dot(&curl, &cross_gen(&xi, mk[i], c));
        }
    }
    d
}

/// Interior nodal DOFs `(1/|P|) ∫ q m_α`, `|α| <= k-1`.
pub fn cell_nodal_interior(frame: &CellFrame, k: usize, q: ScalarField) -> Vec<f64> {
    let mono = Monomials::new(3, k as i32 - 1);
    let mut d = vec![0.0; mono.len()];
    for (p, &w) in frame.rule.points.iter().zip(&frame.rule.weights) {
        let qv = q(p).0 * w / frame.volume;
        for (a, m) in d.iter_mut().zip(mono.eval(&frame.xi(p))) {
            *a += qv * m;
        }
    }
    d
}

/// Interior face-space DOFs: `(h_P/|P|) ∫ w·∇m_α` for `1 <= |α| <= k-1`, then
/// `(1/|P|) ∫ w · (x_P ∧ m e_c)` over the cross family.
pub fn cell_face_interior(frame: &CellFrame, k: usize, fam: &CrossFamily, w: &(dyn Fn(&Point) -> Vec3 + Sync)) -> Vec<f64> {
    let mono = Monomials::new(3, k as i32 - 1);
    let monok = Monomials::new(3, k as i32);
    let n2 = if k > 1 { full_dim(3, k as i32 - 1) - 1 } else { 0 };
    let mut d = vec![0.0; n2 + fam.len()];
    for (p, &wt) in frame.rule.points.iter().zip(&frame.rule.weights) {
        let xi = frame.xi(p);
        let val = w(p);
        let c = wt / frame.volume;
        if n2 > 0 {
            // h_P ∇m_α = ∇_ξ m_α
            let (_, g) = mono.eval_grad(&xi);
            for a in 1..mono.len() {
                d[a - 1] += c * dot(&val, &g[a]);
            }
        }
        let mk = monok.eval(&xi);
        for (j, &(i, cc)) in fam.generators.iter().enumerate() {
            d[n2 + j] += c * dot(&val, &cross_gen(&xi, mk[i], cc));
        }
    }
    d
}
