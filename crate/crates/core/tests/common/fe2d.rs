//! Continuous P_p Lagrange elements on a refined fan triangulation of a convex polygon.

use std::collections::HashMap;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;
use polyvem::poly::Monomials;
use polyvem::quadrature::{gauss_legendre01, triangle_rule};

pub type P2 = [f64; 2];

/// Shape functions of the reference triangle `(0,0), (1,0), (0,1)`.
pub struct RefTriangle {
    pub p: usize,
    /// Lattice offsets `(i, j)` of the local nodes.
    pub nodes: Vec<(usize, usize)>,
    mono: Monomials,
    /// Monomial coefficients of the nodal basis, one column per node.
    coef: DMatrix<f64>,
}

impl RefTriangle {
    pub fn new(p: usize) -> RefTriangle {
        let mut nodes = Vec::new();
        for j in 0..=p {
            for i in 0..=p - j {
                nodes.push((i, j));
            }
        }
        let mono = Monomials::new(2, p as i32);
        let v = DMatrix::from_fn(nodes.len(), mono.len(), |r, c| {
            let (i, j) = nodes[r];
            mono.eval(&[i as f64 / p as f64, j as f64 / p as f64])[c]
        });
        let coef = v.try_inverse().expect("lagrange vandermonde");
        RefTriangle { p, nodes, mono, coef }
    }

    pub fn eval(&self, xi: P2) -> (Vec<f64>, Vec<P2>) {
        let (v, g) = self.mono.eval_grad(&xi);
        let n = self.nodes.len();
        let mut val = vec![0.0; n];
        let mut grad = vec![[0.0; 2]; n];
        for a in 0..n {
            for m in 0..v.len() {
                let c = self.coef[(m, a)];
                val[a] += c * v[m];
                grad[a][0] += c * g[m][0];
                grad[a][1] += c * g[m][1];
            }
        }
        (val, grad)
    }
}

pub struct Elem {
    pub x0: P2,
    /// Columns are the images of the reference axes.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    pub dofs: Vec<usize>,
}

impl Elem {
    pub fn map(&self, xi: P2) -> P2 {
        [
            self.x0[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.x0[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    /// Physical gradient from a reference one (`J^{-T} g`).
    pub fn grad(&self, g: P2) -> P2 {
        let [[a, b], [c, d]] = self.jac;
        [(d * g[0] - c * g[1]) / self.det, (-b * g[0] + a * g[1]) / self.det]
    }
}

/// Boundary side of an element lying on polygon edge `edge`: reference
/// points run from local vertex 1 to local vertex 2.
pub struct BoundarySide {
    pub elem: usize,
    pub edge: usize,
}

pub struct Fe2 {
    pub poly: Vec<P2>,
    pub reference: RefTriangle,
    pub elems: Vec<Elem>,
    pub nnodes: usize,
    pub on_boundary: Vec<bool>,
    pub sides: Vec<BoundarySide>,
    /// Reference quadrature (points, weights) shared by all elements.
    pub rq: Vec<(P2, f64)>,
    /// Gauss points on `[0, 1]` for boundary sides.
    pub sq: (Vec<f64>, Vec<f64>),
    /// Per element and reference quadrature point: basis values and physical gradients.
    tab: Vec<Vec<(Vec<f64>, Vec<P2>)>>,
    side_tab: Vec<Vec<f64>>,
}

#[derive(Hash, PartialEq, Eq, Clone, Copy)]
enum Key {
    Center,
    Spoke(usize, usize),
    Inner(usize, usize, usize),
}

impl Fe2 {
    /// Fans `poly` from its vertex mean, splits every fan triangle into `n²`
    /// congruent triangles and uses degree `p` elements.
    pub fn new(poly: &[P2], n: usize, p: usize) -> Fe2 {
        let m = poly.len();
        let c = [poly.iter().map(|v| v[0]).sum::<f64>() / m as f64, poly.iter().map(|v| v[1]).sum::<f64>() / m as f64];
        let big = n * p;
        let mut ids: HashMap<Key, usize> = HashMap::new();
        let mut on_boundary = Vec::new();
        let mut id = |key: Key, bnd: bool, on_boundary: &mut Vec<bool>| -> usize {
            let next = ids.len();
            *ids.entry(key).or_insert_with(|| {
                on_boundary.push(bnd);
                next
            })
        };
        let reference = RefTriangle::new(p);
        let mut elems = Vec::new();
        let mut sides = Vec::new();
        for i in 0..m {
            let (a, b) = (poly[i], poly[(i + 1) % m]);
            let ea = [(a[0] - c[0]) / n as f64, (a[1] - c[1]) / n as f64];
            let eb = [(b[0] - c[0]) / n as f64, (b[1] - c[1]) / n as f64];
            let at = |u: f64, v: f64| [c[0] + u * ea[0] + v * eb[0], c[1] + u * ea[1] + v * eb[1]];
            let key = |aa: usize, bb: usize| {
                if aa == 0 && bb == 0 {
                    Key::Center
                } else if bb == 0 {
                    Key::Spoke(i, aa)
                } else if aa == 0 {
                    Key::Spoke((i + 1) % m, bb)
                } else {
                    Key::Inner(i, aa, bb)
                }
            };
            for ca in 0..n {
                for cb in 0..n - ca {
                    // up triangle, then the down triangle sharing its hypotenuse
                    let mut shapes = vec![((ca, cb), (1i64, 0i64), (0i64, 1i64))];
                    if ca + cb + 2 <= n {
                        shapes.push(((ca + 1, cb + 1), (-1, 0), (0, -1)));
                    }
                    for (s, ((va, vb), d1, d2)) in shapes.into_iter().enumerate() {
                        let x0 = at(va as f64, vb as f64);
                        let p1 = at(va as f64 + d1.0 as f64, vb as f64 + d1.1 as f64);
                        let p2 = at(va as f64 + d2.0 as f64, vb as f64 + d2.1 as f64);
                        let jac = [[p1[0] - x0[0], p2[0] - x0[0]], [p1[1] - x0[1], p2[1] - x0[1]]];
                        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                        let dofs = reference
                            .nodes
                            .iter()
                            .map(|&(li, lj)| {
                                let la = (p * va) as i64 + d1.0 * li as i64 + d2.0 * lj as i64;
                                let lb = (p * vb) as i64 + d1.1 * li as i64 + d2.1 * lj as i64;
                                let (la, lb) = (la as usize, lb as usize);
                                id(key(la, lb), la + lb == big, &mut on_boundary)
                            })
                            .collect();
                        if s == 0 && ca + cb + 1 == n {
                            sides.push(BoundarySide { elem: elems.len(), edge: i });
                        }
                        elems.push(Elem { x0, jac, det, dofs });
                    }
                }
            }
        }
        let nnodes = on_boundary.len();
        let tri = triangle_rule(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 2 * p + 4);
        let rq: Vec<(P2, f64)> = tri.points.iter().zip(&tri.weights).map(|(x, &w)| ([x[0], x[1]], w)).collect();
        let ref_tab: Vec<(Vec<f64>, Vec<P2>)> = rq.iter().map(|(x, _)| reference.eval(*x)).collect();
        let tab = elems
            .iter()
            .map(|e| ref_tab.iter().map(|(v, g)| (v.clone(), g.iter().map(|d| e.grad(*d)).collect())).collect())
            .collect();
        let sq = gauss_legendre01(p + 4);
        let side_tab = sq.0.iter().map(|&t| reference.eval([1.0 - t, t]).0).collect();
        Fe2 { poly: poly.to_vec(), reference, elems, nnodes, on_boundary, sides, rq, sq, tab, side_tab }
    }

    /// Calls `f(x, w, values, gradients, dofs)` at every quadrature point.
    pub fn for_each_qp<F: FnMut(P2, f64, &[f64], &[P2], &[usize])>(&self, mut f: F) {
        for (e, el) in self.elems.iter().enumerate() {
            for (q, (xi, w)) in self.rq.iter().enumerate() {
                let (v, g) = &self.tab[e][q];
                f(el.map(*xi), w * el.det.abs(), v, g, &el.dofs);
            }
        }
    }

    /// Quadrature points and weights over the whole polygon.
    pub fn quadrature(&self) -> Vec<(P2, f64)> {
        let mut out = Vec::new();
        self.for_each_qp(|x, w, _, _, _| out.push((x, w)));
        out
    }

    /// Gradients of the FE function `u` at the points of [`Fe2::quadrature`].
    pub fn gradients(&self, u: &[f64]) -> Vec<P2> {
        let mut out = Vec::new();
        self.for_each_qp(|_, _, _, g, dofs| {
            let mut s = [0.0; 2];
            for (a, &d) in dofs.iter().enumerate() {
                s[0] += u[d] * g[a][0];
                s[1] += u[d] * g[a][1];
            }
            out.push(s);
        });
        out
    }

    /// Element containing `x` (largest minimal barycentric coordinate) and
    /// the reference coordinates of `x` in it.
    pub fn locate(&self, x: P2) -> (usize, P2) {
        let mut best = (usize::MAX, [0.0; 2], f64::NEG_INFINITY);
        for (e, el) in self.elems.iter().enumerate() {
            let [[a, b], [c, d]] = el.jac;
            let (dx, dy) = (x[0] - el.x0[0], x[1] - el.x0[1]);
            let xi = [(d * dx - b * dy) / el.det, (-c * dx + a * dy) / el.det];
            let score = xi[0].min(xi[1]).min(1.0 - xi[0] - xi[1]);
            if score > best.2 {
                best = (e, xi, score);
            }
        }
        (best.0, best.1)
    }

    /// Gradient of the FE function `u` at an arbitrary point of the polygon.
    pub fn grad_at(&self, u: &[f64], x: P2) -> P2 {
        let (e, xi) = self.locate(x);
        let el = &self.elems[e];
        let (_, g) = self.reference.eval(xi);
        let mut s = [0.0; 2];
        for (a, &d) in el.dofs.iter().enumerate() {
            let gp = el.grad(g[a]);
            s[0] += u[d] * gp[0];
            s[1] += u[d] * gp[1];
        }
        s
    }

    /// Stiffness triplets and load vector of `-Δu = f`.
    fn system(&self, f: &dyn Fn(P2) -> f64) -> (Vec<(usize, usize, f64)>, Vec<f64>) {
        let mut t = Vec::new();
        let mut b = vec![0.0; self.nnodes];
        for (e, el) in self.elems.iter().enumerate() {
            let nl = el.dofs.len();
            let mut k = vec![0.0; nl * nl];
            for (q, (xi, w)) in self.rq.iter().enumerate() {
                let w = w * el.det.abs();
                let (v, g) = &self.tab[e][q];
                let fx = f(el.map(*xi));
                for a in 0..nl {
                    b[el.dofs[a]] += w * fx * v[a];
                    for c in 0..nl {
                        k[a * nl + c] += w * (g[a][0] * g[c][0] + g[a][1] * g[c][1]);
                    }
                }
            }
            for a in 0..nl {
                for c in 0..nl {
                    t.push((el.dofs[a], el.dofs[c], k[a * nl + c]));
                }
            }
        }
        (t, b)
    }

    /// `-Δu = f` with `u = 0` on the boundary.
    pub fn solve_dirichlet(&self, f: &dyn Fn(P2) -> f64) -> Vec<f64> {
        let (t, mut b) = self.system(f);
        let bd = &self.on_boundary;
        let mut t: Vec<_> = t.into_iter().filter(|&(i, j, _)| !bd[i] && !bd[j]).collect();
        for i in 0..self.nnodes {
            if bd[i] {
                t.push((i, i, 1.0));
                b[i] = 0.0;
            }
        }
        sparse_solve(self.nnodes, &t, &b)
    }

    /// `-Δu = f` with `∂u/∂n = gn(edge, x)` on polygon edge `edge`, zero mean.
    pub fn solve_neumann(&self, f: &dyn Fn(P2) -> f64, gn: &dyn Fn(usize, P2) -> f64) -> Vec<f64> {
        let (mut t, mut b) = self.system(f);
        for s in &self.sides {
            let el = &self.elems[s.elem];
            let (p1, p2) = (el.map([1.0, 0.0]), el.map([0.0, 1.0]));
            let len = ((p2[0] - p1[0]).powi(2) + (p2[1] - p1[1]).powi(2)).sqrt();
            for (q, (&tq, &wq)) in self.sq.0.iter().zip(&self.sq.1).enumerate() {
                let x = [p1[0] + tq * (p2[0] - p1[0]), p1[1] + tq * (p2[1] - p1[1])];
                let g = gn(s.edge, x);
                for (a, &d) in el.dofs.iter().enumerate() {
                    b[d] += wq * len * g * self.side_tab[q][a];
                }
            }
        }
        let n = self.nnodes;
        let mut mean = vec![0.0; n];
        self.for_each_qp(|_, w, v, _, dofs| {
            for (a, &d) in dofs.iter().enumerate() {
                mean[d] += w * v[a];
            }
        });
        for (i, &m) in mean.iter().enumerate() {
            t.push((i, n, m));
            t.push((n, i, m));
        }
        b.push(0.0);
        let mut u = sparse_solve(n + 1, &t, &b);
        u.truncate(n);
        u
    }
}

pub fn sparse_solve(n: usize, t: &[(usize, usize, f64)], b: &[f64]) -> Vec<f64> {
    let trips: Vec<Triplet<usize, usize, f64>> = t.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).expect("triplets");
    let lu = a.sp_lu().expect("sparse lu");
    let x = lu.solve(&Mat::from_fn(n, 1, |i, _| b[i]));
    (0..n).map(|i| x[(i, 0)]).collect()
}
