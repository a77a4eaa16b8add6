//! Lowest order finite elements on red-refined tetrahedralizations of a
//! convex polyhedral cell: Whitney edge elements for the curl-curl problem
//! with a divergence constraint, and P1 elements for the Neumann problem.

use std::collections::HashMap;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use polyvem::mesh::geom::*;
use polyvem::mesh::Mesh;
use polyvem::quadrature::{tet_rule, triangle_rule};

pub type Vec3 = [f64; 3];

pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Geometry of one tetrahedron with a shared quadrature rule.
pub struct Tet {
    pub v: [usize; 4],
    pub x0: Point,
    pub vol: f64,
    /// Gradients of the barycentric coordinates.
    pub grads: [Vec3; 4],
    pub qp: Vec<(Point, f64)>,
}

impl Tet {
    pub fn bary(&self, x: &Point) -> [f64; 4] {
        let d = sub(x, &self.x0);
        let l1 = dot(&self.grads[1], &d);
        let l2 = dot(&self.grads[2], &d);
        let l3 = dot(&self.grads[3], &d);
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    /// Whitney function of local edge `(i, j)` oriented from `i` to `j`, and its curl.
    pub fn whitney(&self, i: usize, j: usize, lam: &[f64; 4]) -> (Vec3, Vec3) {
        let (gi, gj) = (&self.grads[i], &self.grads[j]);
        (sub(&scale(gj, lam[i]), &scale(gi, lam[j])), scale(&cross(gi, gj), 2.0))
    }
}

pub struct TetMesh {
    pub nodes: Vec<Point>,
    pub tets: Vec<Tet>,
    /// Boundary triangles with the local index of the cell face they lie on.
    pub bfaces: Vec<([usize; 3], usize)>,
    pub edges: Vec<[usize; 2]>,
    pub edge_of: HashMap<(usize, usize), usize>,
    pub bnd_edge: Vec<bool>,
    pub bnd_node: Vec<bool>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl TetMesh {
    /// Pyramids from the cell barycenter over fans from the face vertex means,
    /// refined `levels` times.
    pub fn new(mesh: &Mesh, cell: usize, levels: usize, qdeg: usize) -> TetMesh {
        let c = &mesh.cells[cell];
        let mut nodes: Vec<Point> = Vec::new();
        let mut vid: HashMap<usize, usize> = HashMap::new();
        let mut node = |v: usize, nodes: &mut Vec<Point>| *vid.entry(v).or_insert_with(|| {
            nodes.push(mesh.vertices[v]);
            nodes.len() - 1
        });
        nodes.push(c.barycenter);
        let mut tets: Vec<[usize; 4]> = Vec::new();
        let mut bfaces = Vec::new();
        for (lf, &f) in c.faces.iter().enumerate() {
            let fv = &mesh.faces[f].vertices;
            let pts = mesh.face_points(f);
            let fc = scale(&pts.iter().fold([0.0; 3], |a, p| add(&a, p)), 1.0 / pts.len() as f64);
            nodes.push(fc);
            let ic = nodes.len() - 1;
            for i in 0..fv.len() {
                let (a, b) = (node(fv[i], &mut nodes), node(fv[(i + 1) % fv.len()], &mut nodes));
                tets.push([0, ic, a, b]);
                bfaces.push(([ic, a, b], lf));
            }
        }
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        for _ in 0..levels {
            let mut m = |a: usize, b: usize, nodes: &mut Vec<Point>| {
                *mid.entry(key(a, b)).or_insert_with(|| {
                    nodes.push(scale(&add(&nodes[a], &nodes[b]), 0.5));
                    nodes.len() - 1
                })
            };
            let mut nt = Vec::with_capacity(8 * tets.len());
            for &[x0, x1, x2, x3] in &tets {
                let (x01, x02, x03) = (m(x0, x1, &mut nodes), m(x0, x2, &mut nodes), m(x0, x3, &mut nodes));
                let (x12, x13, x23) = (m(x1, x2, &mut nodes), m(x1, x3, &mut nodes), m(x2, x3, &mut nodes));
                nt.extend([
                    [x0, x01, x02, x03],
                    [x01, x1, x12, x13],
                    [x02, x12, x2, x23],
                    [x03, x13, x23, x3],
                    [x01, x02, x03, x13],
                    [x01, x02, x12, x13],
                    [x02, x03, x13, x23],
                    [x02, x12, x13, x23],
                ]);
            }
            tets = nt;
            let mut nb = Vec::with_capacity(4 * bfaces.len());
            for &([a, b, cc], lf) in &bfaces {
                let (ab, bc, ca) = (m(a, b, &mut nodes), m(b, cc, &mut nodes), m(cc, a, &mut nodes));
                nb.extend([([a, ab, ca], lf), ([ab, b, bc], lf), ([ca, bc, cc], lf), ([ab, bc, ca], lf)]);
            }
            bfaces = nb;
        }
        let mut edge_of = HashMap::new();
        let mut edges = Vec::new();
        for t in &tets {
            for &(i, j) in &TET_EDGES {
                edge_of.entry(key(t[i], t[j])).or_insert_with(|| {
                    edges.push([t[i].min(t[j]), t[i].max(t[j])]);
                    edges.len() - 1
                });
            }
        }
        let mut bnd_edge = vec![false; edges.len()];
        let mut bnd_node = vec![false; nodes.len()];
        for (t, _) in &bfaces {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                bnd_edge[edge_of[&key(a, b)]] = true;
                bnd_node[a] = true;
            }
        }
        let tets = tets
            .into_iter()
            .map(|v| {
                let x = v.map(|i| nodes[i]);
                let (a, b, cc) = (sub(&x[1], &x[0]), sub(&x[2], &x[0]), sub(&x[3], &x[0]));
                let det = dot(&a, &cross(&b, &cc));
                let g1 = scale(&cross(&b, &cc), 1.0 / det);
                let g2 = scale(&cross(&cc, &a), 1.0 / det);
                let g3 = scale(&cross(&a, &b), 1.0 / det);
                let g0 = scale(&add(&add(&g1, &g2), &g3), -1.0);
                let r = tet_rule(&x[0], &x[1], &x[2], &x[3], qdeg);
                Tet { v, x0: x[0], vol: det.abs() / 6.0, grads: [g0, g1, g2, g3], qp: r.points.into_iter().zip(r.weights).collect() }
            })
            .collect();
        TetMesh { nodes, tets, bfaces, edges, edge_of, bnd_edge, bnd_node }
    }

    /// Local edges of a tet: global edge id and orientation sign (`+1` when
    /// the local direction matches the global low-to-high one).
    pub fn local_edges(&self, t: &Tet) -> [(usize, f64); 6] {
        TET_EDGES.map(|(i, j)| (self.edge_of[&key(t.v[i], t.v[j])], if t.v[i] < t.v[j] { 1.0 } else { -1.0 }))
    }

    /// Value and curl of a Whitney field at a point of tet `t`.
    pub fn eval_edge(&self, t: &Tet, x: &[f64], p: &Point) -> (Vec3, Vec3) {
        let lam = t.bary(p);
        let mut v = [0.0; 3];
        let mut c = [0.0; 3];
        for (le, (e, s)) in self.local_edges(t).into_iter().enumerate() {
            let (i, j) = TET_EDGES[le];
            let (w, cw) = t.whitney(i, j, &lam);
            v = add(&v, &scale(&w, s * x[e]));
            c = add(&c, &scale(&cw, s * x[e]));
        }
        (v, c)
    }

    /// Gradient of a P1 field on tet `t`.
    pub fn grad_node(&self, t: &Tet, u: &[f64]) -> Vec3 {
        (0..4).fold([0.0; 3], |a, i| add(&a, &scale(&t.grads[i], u[t.v[i]])))
    }
}

fn factor(n: usize, t: &[(usize, usize, f64)]) -> Lu<usize, f64> {
    let trips: Vec<Triplet<usize, usize, f64>> = t.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).expect("triplets");
    a.sp_lu().expect("sparse lu")
}

fn lu_solve(lu: &Lu<usize, f64>, b: &[f64]) -> Vec<f64> {
    let x = lu.solve(&Mat::from_fn(b.len(), 1, |i, _| b[i]));
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}

/// `curl curl v + ∇λ = c`, `div v = d`, prescribed tangential edge integrals
/// on the boundary, `λ = 0` on the boundary.
pub struct WhitneySolver<'a> {
    pub tm: &'a TetMesh,
    /// Unknown index of each edge / node, `None` when prescribed.
    edge_unk: Vec<Option<usize>>,
    node_unk: Vec<Option<usize>>,
    n: usize,
    /// Couplings of the unknowns with the prescribed boundary edges.
    bnd_coupling: Vec<(usize, usize, f64)>,
    lu: Lu<usize, f64>,
}

impl<'a> WhitneySolver<'a> {
    pub fn new(tm: &'a TetMesh) -> WhitneySolver<'a> {
        let mut n = 0;
        let edge_unk: Vec<Option<usize>> = tm.bnd_edge.iter().map(|&b| (!b).then(|| (n, n += 1).0)).collect();
        let node_unk: Vec<Option<usize>> = tm.bnd_node.iter().map(|&b| (!b).then(|| (n, n += 1).0)).collect();
        let mut t = Vec::new();
        let mut bnd_coupling = Vec::new();
        for tet in &tm.tets {
            let le = tm.local_edges(tet);
            let curls: Vec<Vec3> = TET_EDGES.iter().zip(&le).map(|(&(i, j), &(_, s))| scale(&tet.whitney(i, j, &[0.0; 4]).1, s)).collect();
            for a in 0..6 {
                let Some(ra) = edge_unk[le[a].0] else { continue };
                for b in 0..6 {
                    let val = tet.vol * dot(&curls[a], &curls[b]);
                    match edge_unk[le[b].0] {
                        Some(cb) => t.push((ra, cb, val)),
                        None => bnd_coupling.push((ra, le[b].0, val)),
                    }
                }
            }
            // (∇μ_n, w_e) = |T|/4 ∇λ_n·(∇λ_j - ∇λ_i)
            for nd in 0..4 {
                let Some(rn) = node_unk[tet.v[nd]] else { continue };
                for (a, &(i, j)) in TET_EDGES.iter().enumerate() {
                    let val = le[a].1 * tet.vol / 4.0 * dot(&tet.grads[nd], &sub(&tet.grads[j], &tet.grads[i]));
                    match edge_unk[le[a].0] {
                        Some(ca) => {
                            t.push((rn, ca, val));
                            t.push((ca, rn, val));
                        }
                        None => bnd_coupling.push((rn, le[a].0, val)),
                    }
                }
            }
        }
        let lu = factor(n, &t);
        WhitneySolver { tm, edge_unk, node_unk, n, bnd_coupling, lu }
    }

    /// Edge coefficients of the solution; `bnd[e]` is read on boundary edges.
    pub fn solve(&self, bnd: &[f64], c: &dyn Fn(&Point) -> Vec3, d: &dyn Fn(&Point) -> f64) -> Vec<f64> {
        let tm = self.tm;
        let mut b = vec![0.0; self.n];
        for tet in &tm.tets {
            let le = tm.local_edges(tet);
            for (p, w) in &tet.qp {
                let lam = tet.bary(p);
                let (cv, dv) = (c(p), d(p));
                for (a, &(i, j)) in TET_EDGES.iter().enumerate() {
                    if let Some(r) = self.edge_unk[le[a].0] {
                        b[r] += w * le[a].1 * dot(&cv, &tet.whitney(i, j, &lam).0);
                    }
                }
                for nd in 0..4 {
                    if let Some(r) = self.node_unk[tet.v[nd]] {
                        b[r] -= w * dv * lam[nd];
                    }
                }
            }
        }
        for &(r, e, val) in &self.bnd_coupling {
            b[r] -= val * bnd[e];
        }
        let y = lu_solve(&self.lu, &b);
        (0..tm.edges.len()).map(|e| self.edge_unk[e].map_or(bnd[e], |r| y[r])).collect()
    }
}

/// `-Δu = f` with `∂u/∂n = gn(lf, x)` on cell face `lf`, zero mean, P1 elements.
pub struct NeumannSolver<'a> {
    pub tm: &'a TetMesh,
    lu: Lu<usize, f64>,
    mean: Vec<f64>,
}

impl<'a> NeumannSolver<'a> {
    pub fn new(tm: &'a TetMesh) -> NeumannSolver<'a> {
        let n = tm.nodes.len();
        let mut t = Vec::new();
        let mut mean = vec![0.0; n];
        for tet in &tm.tets {
            for a in 0..4 {
                mean[tet.v[a]] += tet.vol / 4.0;
                for b in 0..4 {
                    t.push((tet.v[a], tet.v[b], tet.vol * dot(&tet.grads[a], &tet.grads[b])));
                }
            }
        }
        for (i, &m) in mean.iter().enumerate() {
            t.push((i, n, m));
            t.push((n, i, m));
        }
        NeumannSolver { tm, lu: factor(n + 1, &t), mean }
    }

    pub fn solve(&self, f: &dyn Fn(&Point) -> f64, gn: &dyn Fn(usize, &Point) -> f64, qdeg: usize) -> Vec<f64> {
        let tm = self.tm;
        let n = tm.nodes.len();
        let mut b = vec![0.0; n + 1];
        for tet in &tm.tets {
            for (p, w) in &tet.qp {
                let lam = tet.bary(p);
                let fv = f(p);
                for a in 0..4 {
                    b[tet.v[a]] += w * fv * lam[a];
                }
            }
        }
        for &(t, lf) in &tm.bfaces {
            let x = t.map(|i| tm.nodes[i]);
            let r = triangle_rule(&x[0], &x[1], &x[2], qdeg);
            let (e1, e2) = (sub(&x[1], &x[0]), sub(&x[2], &x[0]));
            let n2 = cross(&e1, &e2);
            let nn = dot(&n2, &n2);
            for (p, w) in r.points.iter().zip(&r.weights) {
                // barycentric coordinates inside the triangle
                let d = sub(p, &x[0]);
                let l1 = dot(&cross(&d, &e2), &n2) / nn;
                let l2 = dot(&cross(&e1, &d), &n2) / nn;
                let lam = [1.0 - l1 - l2, l1, l2];
                let g = gn(lf, p);
                for a in 0..3 {
                    b[t[a]] += w * g * lam[a];
                }
            }
        }
        let _ = &self.mean;
        let mut u = lu_solve(&self.lu, &b);
        u.truncate(n);
        u
    }
}
