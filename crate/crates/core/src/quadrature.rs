//! Quadrature on edges, polygonal faces and star-shaped polyhedra.
//!
//! Triangles and tetrahedra use collapsed tensor Gauss–Legendre rules, so a
//! rule of any requested exactness is available without tabulated data.
//! Faces are fanned from their barycenter, cells are split into pyramids over
//! their faces with apex at the cell barycenter.

use std::sync::OnceLock;

use crate::error::{Result, VemError};
use crate::mesh::geom::*;
use crate::mesh::Mesh;

#[derive(Clone, Debug, Default)]
pub struct QuadRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: FnMut(&Point) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

const MAX_CACHED: usize = 40;

/// Gauss–Legendre nodes and weights on `[0, 1]` with `n` points.
pub fn gauss_legendre01(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..=MAX_CACHED).map(compute_gauss_legendre01).collect());
    if n <= MAX_CACHED {
        cache[n].clone()
    } else {
        compute_gauss_legendre01(n)
    }
}

fn compute_gauss_legendre01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * t * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { t } else { p1 };
            let pm = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (t * pn - pm) / (t * t - 1.0);
            let dt = pn / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = 0.5 * (t + 1.0);
        w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn npoints(exactness: usize) -> usize {
    exactness / 2 + 1
}

/// Gauss–Legendre rule on the segment `[a, b]`.
pub fn segment_rule(a: &Point, b: &Point, degree: usize) -> QuadRule {
    let (x, w) = gauss_legendre01(npoints(degree));
    let len = norm(&sub(b, a));
    let d = sub(b, a);
    QuadRule {
        points: x.iter().map(|&s| add(a, &scale(&d, s))).collect(),
        weights: w.iter().map(|&wi| wi * len).collect(),
        degree,
    }
}

fn push_triangle(rule: &mut QuadRule, a: &Point, b: &Point, c: &Point, degree: usize) {
    let area = 0.5 * norm(&cross(&sub(b, a), &sub(c, a)));
    let (x, w) = gauss_legendre01(npoints(degree + 1));
    for (i, &s) in x.iter().enumerate() {
        for (j, &t) in x.iter().enumerate() {
            let (u, v) = (s, t * (1.0 - s));
            let p = add(a, &add(&scale(&sub(b, a), u), &scale(&sub(c, a), v)));
            rule.points.push(p);
            rule.weights.push(2.0 * area * w[i] * w[j] * (1.0 - s));
        }
    }
}

fn push_tet(rule: &mut QuadRule, a: &Point, b: &Point, c: &Point, d: &Point, vol6: f64, degree: usize) {
    let (x, w) = gauss_legendre01(npoints(degree + 2));
    let (ab, ac, ad) = (sub(b, a), sub(c, a), sub(d, a));
    for (i, &r) in x.iter().enumerate() {
        for (j, &s) in x.iter().enumerate() {
            for (l, &t) in x.iter().enumerate() {
                let u = r;
                let v = s * (1.0 - r);
                let z = t * (1.0 - r) * (1.0 - s);
                let p = add(a, &add(&scale(&ab, u), &add(&scale(&ac, v), &scale(&ad, z))));
                rule.points.push(p);
                rule.weights.push(vol6 * w[i] * w[j] * w[l] * (1.0 - r) * (1.0 - r) * (1.0 - s));
            }
        }
    }
}

pub fn triangle_rule(a: &Point, b: &Point, c: &Point, degree: usize) -> QuadRule {
    let mut r = QuadRule { degree, ..Default::default() };
    push_triangle(&mut r, a, b, c, degree);
    r
}

pub fn tet_rule(a: &Point, b: &Point, c: &Point, d: &Point, degree: usize) -> QuadRule {
    let mut r = QuadRule { degree, ..Default::default() };
    let v6 = det3(&sub(b, a), &sub(c, a), &sub(d, a)).abs();
    push_tet(&mut r, a, b, c, d, v6, degree);
    r
}

pub fn edge_rule(mesh: &Mesh, edge: usize, degree: usize) -> QuadRule {
    let e = &mesh.edges[edge];
    segment_rule(&mesh.vertices[e.vertices[0]], &mesh.vertices[e.vertices[1]], degree)
}

pub fn face_rule(mesh: &Mesh, face: usize, degree: usize) -> QuadRule {
    let f = &mesh.faces[face];
    let m = f.vertices.len();
    let mut r = QuadRule { degree, ..Default::default() };
    for i in 0..m {
        let (p, q) = (&mesh.vertices[f.vertices[i]], &mesh.vertices[f.vertices[(i + 1) % m]]);
        push_triangle(&mut r, &f.barycenter, p, q, degree);
    }
    r
}

/// Pyramid-to-tetrahedra rule; fails if some tetrahedron is inverted.
pub fn cell_rule(mesh: &Mesh, cell: usize, degree: usize) -> Result<QuadRule> {
    let c = &mesh.cells[cell];
    let mut r = QuadRule { degree, ..Default::default() };
    let apex = c.barycenter;
    for (&f, &sg) in c.faces.iter().zip(&c.face_signs) {
        let face = &mesh.faces[f];
        let m = face.vertices.len();
        for i in 0..m {
            let (p, q) = (&mesh.vertices[face.vertices[i]], &mesh.vertices[face.vertices[(i + 1) % m]]);
            let v6 = sg * det3(&sub(&face.barycenter, &apex), &sub(p, &apex), &sub(q, &apex));
            if v6 <= 1e-14 * c.diameter.powi(3) {
                return Err(VemError::NotStarShaped { cell });
            }
            push_tet(&mut r, &apex, &face.barycenter, p, q, v6, degree);
        }
    }
    Ok(r)
}
