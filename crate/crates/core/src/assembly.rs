//! Global DOF numbering, interpolation and assembly of the saddle-point system
//!
//! ```text
//! [ A  Bᵀ ] [H]   [f]
//! [ B  0  ] [p] = [0]
//! ```
//!
//! with `A = Cᵀ M_f C` (curl–curl), `B = Gᵀ M_e` (mixed term) and
//! `f = Cᵀ M_f j_I`. Tangential boundary data enter through the boundary edge
//! DOFs of the interpolant; boundary nodal DOFs are eliminated.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cell_vem::{
    build_face_data, CellOps, DofEntity, EdgeStab, FaceSpaceProduct, LocalDof, SamplingRules, ScalarField, Vec3, VecField,
};
use crate::error::{Result, VemError};
use crate::face_vem::{FaceData, FaceProduct, Mode};
use crate::linalg;
use crate::mesh::geom::Point;
use crate::mesh::Mesh;
use crate::problems::Problem;

/// Global numbering of one discrete space.
#[derive(Clone, Debug, Default)]
pub struct SpaceMap {
    pub n: usize,
    /// Global index of every local DOF, per cell.
    pub cell_dofs: Vec<Vec<usize>>,
    /// Global DOFs attached to entities on the domain boundary.
    pub boundary: Vec<bool>,
    pub entity: Vec<LocalDof>,
}

impl SpaceMap {
    fn build(mesh: &Mesh, cells: &[CellOps], pick: impl Fn(&CellOps) -> &[LocalDof]) -> SpaceMap {
        let mut index: HashMap<LocalDof, usize> = HashMap::new();
        let mut map = SpaceMap::default();
        for ops in cells {
            let ids = pick(ops)
                .iter()
                .map(|d| {
                    *index.entry(*d).or_insert_with(|| {
                        map.entity.push(*d);
                        map.boundary.push(on_boundary(mesh, d.entity));
                        map.entity.len() - 1
                    })
                })
                .collect();
            map.cell_dofs.push(ids);
        }
        map.n = map.entity.len();
        map
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    /// DOFs attached to vertices, edges and faces.
    pub fn n_skeleton(&self) -> usize {
        self.entity.iter().filter(|d| !matches!(d.entity, DofEntity::Cell(_))).count()
    }
}

pub fn on_boundary(mesh: &Mesh, e: DofEntity) -> bool {
    match e {
        DofEntity::Vertex(v) => mesh.boundary_vertex[v],
        DofEntity::Edge(e) => mesh.edges[e].boundary,
        DofEntity::Face(f) => mesh.faces[f].boundary,
        DofEntity::Cell(_) => false,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub k: usize,
    pub mode: Mode,
    pub edge_stab: EdgeStab,
    pub face_product: FaceSpaceProduct,
    /// Eliminate cell-interior DOFs before global assembly.
    pub condense: bool,
    /// Quadrature exactness used to interpolate non-polynomial data.
    pub interp_degree: usize,
}

impl Options {
    pub fn new(k: usize, mode: Mode) -> Options {
        Options {
            k,
            mode,
            edge_stab: EdgeStab::default(),
            face_product: FaceSpaceProduct::default(),
            condense: true,
            interp_degree: (2 * k + 6).max(14),
        }
    }
}

/// All local spaces of a mesh together with their global numbering.
pub struct Discretization {
    pub opts: Options,
    pub faces: Vec<FaceData>,
    pub cells: Vec<CellOps>,
    pub edge: SpaceMap,
    pub nodal: SpaceMap,
    pub face: SpaceMap,
}

/// Sparse matrix as a list of `(row, col, value)` entries.
pub type Triplets = Vec<(usize, usize, f64)>;

impl Discretization {
    pub fn new(mesh: &Mesh, opts: Options) -> Result<Discretization> {
        if opts.k == 0 {
            return Err(VemError::InvalidArgument("k must be at least 1".into()));
        }
        let faces = build_face_data(mesh, opts.k, opts.mode, FaceProduct::default())?;
        let cells: Vec<CellOps> =
            (0..mesh.num_cells()).into_par_iter().map(|c| CellOps::new(mesh, c, opts.k, &faces)).collect::<Result<_>>()?;
        let edge = SpaceMap::build(mesh, &cells, |o| &o.edge_dofs);
        let nodal = SpaceMap::build(mesh, &cells, |o| &o.nodal_dofs);
        let face = SpaceMap::build(mesh, &cells, |o| &o.face_dofs);
        Ok(Discretization { opts, faces, cells, edge, nodal, face })
    }

    pub fn n_volume(&self) -> usize {
        self.cells.iter().map(|c| c.n_volume()).sum()
    }

    fn scatter_set(&self, map: &SpaceMap, local: Vec<DVector<f64>>) -> DVector<f64> {
        let mut out = DVector::zeros(map.n);
        for (ids, v) in map.cell_dofs.iter().zip(local) {
            for (&g, x) in ids.iter().zip(v.iter()) {
                out[g] = *x;
            }
        }
        out
    }

    /// Global edge DOFs of a field given with its curl.
    pub fn interpolate_edge(&self, mesh: &Mesh, v: VecField) -> Result<DVector<f64>> {
        let local: Vec<DVector<f64>> = self
            .cells
            .par_iter()
            .map(|ops| {
                let rules = SamplingRules::new(mesh, ops, self.opts.interp_degree)?;
                Ok(ops.edge_dofs_of(mesh, &self.faces, &rules.view(), v))
            })
            .collect::<Result<_>>()?;
        Ok(self.scatter_set(&self.edge, local))
    }

    /// Global nodal DOFs of a scalar field given with its gradient.
    pub fn interpolate_nodal(&self, mesh: &Mesh, q: ScalarField) -> Result<DVector<f64>> {
        let local: Vec<DVector<f64>> = self
            .cells
            .par_iter()
            .map(|ops| {
                let rules = SamplingRules::new(mesh, ops, self.opts.interp_degree)?;
                Ok(ops.nodal_dofs_of(mesh, &self.faces, &rules.view(), q))
            })
            .collect::<Result<_>>()?;
        Ok(self.scatter_set(&self.nodal, local))
    }

    /// Global face-space DOFs of a vector field.
    pub fn interpolate_face(&self, mesh: &Mesh, w: &(dyn Fn(&Point) -> Vec3 + Sync)) -> Result<DVector<f64>> {
        let local: Vec<DVector<f64>> = self
            .cells
            .par_iter()
            .map(|ops| {
                let rules = SamplingRules::new(mesh, ops, self.opts.interp_degree)?;
                Ok(ops.face_dofs_of(mesh, &rules.view(), w))
            })
            .collect::<Result<_>>()?;
        Ok(self.scatter_set(&self.face, local))
    }

    pub fn gather(&self, map: &SpaceMap, cell: usize, global: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(map.cell_dofs[cell].len(), map.cell_dofs[cell].iter().map(|&g| global[g]))
    }

    /// Row-wise assembly of a local operator: shared rows are set, not summed,
    /// since every cell computes the same functional there.
    fn global_operator(&self, rows: impl Fn(usize) -> Vec<usize>, cols: &SpaceMap, op: impl Fn(&CellOps) -> &DMatrix<f64>) -> Triplets {
        let mut seen: HashMap<(usize, usize), f64> = HashMap::new();
        for (c, ops) in self.cells.iter().enumerate() {
            let (r, m) = (rows(c), op(ops));
            for (i, &gi) in r.iter().enumerate() {
                for (j, &gj) in cols.cell_dofs[c].iter().enumerate() {
                    if m[(i, j)] != 0.0 {
                        seen.insert((gi, gj), m[(i, j)]);
                    }
                }
            }
        }
        let mut t: Triplets = seen.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        t.sort_by_key(|&(i, j, _)| (i, j));
        t
    }

    /// Nodal to edge DOFs.
    pub fn global_grad(&self) -> Triplets {
        self.global_operator(|c| self.edge.cell_dofs[c].clone(), &self.nodal, |o| &o.grad)
    }

    /// Edge to face DOFs.
    pub fn global_curl(&self) -> Triplets {
        self.global_operator(|c| self.face.cell_dofs[c].clone(), &self.edge, |o| &o.curl)
    }

    /// Face DOFs to per-cell divergence coefficients.
    pub fn global_div(&self) -> Triplets {
        let mut off = vec![0];
        for ops in &self.cells {
            off.push(off.last().unwrap() + ops.n_volume());
        }
        self.global_operator(|c| (off[c]..off[c + 1]).collect(), &self.face, |o| &o.div)
    }

    /// Local blocks `(A_P, B_P, M_f)` of one cell.
    pub fn local_blocks(&self, mesh: &Mesh, cell: usize, mu: &(dyn Fn(&Point) -> f64 + Sync)) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let ops = &self.cells[cell];
        let mf = ops.face_product(mesh, &self.faces, self.opts.face_product)?;
        let me = ops.edge_product(mesh, &self.faces, mu, self.opts.edge_stab);
        let a = ops.curl.transpose() * &mf * &ops.curl;
        let b = ops.grad.transpose() * me;
        Ok((a, b, mf))
    }

    /// Assembles the saddle-point system for a manufactured problem.
    pub fn assemble(&self, mesh: &Mesh, problem: &Problem) -> Result<SparseSystem> {
        let jfield = |x: &Point| problem.j(x);
        let j_i = self.interpolate_face(mesh, &jfield)?;
        let hfield = |x: &Point| problem.field(x);
        let h_i = self.interpolate_edge(mesh, &hfield)?;
        let mu = |x: &Point| problem.mu(x);
        self.assemble_with(mesh, &mu, &j_i, &h_i)
    }

    /// Assembles the system for given face DOFs of `j` and edge DOFs providing
    /// the tangential boundary values.
    pub fn assemble_with(
        &self,
        mesh: &Mesh,
        mu: &(dyn Fn(&Point) -> f64 + Sync),
        j_i: &DVector<f64>,
        lifting: &DVector<f64>,
    ) -> Result<SparseSystem> {
        let ne = self.edge.n;
        // unknown numbering: free edge DOFs, then free nodal DOFs
        let mut unknown = vec![usize::MAX; ne + self.nodal.n];
        let interior = |d: &LocalDof| self.opts.condense && matches!(d.entity, DofEntity::Cell(_));
        let mut n = 0;
        for g in 0..ne {
            if !self.edge.boundary[g] && !interior(&self.edge.entity[g]) {
                unknown[g] = n;
                n += 1;
            }
        }
        let n_h = n;
        for g in 0..self.nodal.n {
            if !self.nodal.boundary[g] && !interior(&self.nodal.entity[g]) {
                unknown[ne + g] = n;
                n += 1;
            }
        }
        let n_p = n - n_h;

        let locals: Vec<LocalSystem> = (0..self.cells.len())
            .into_par_iter()
            .map(|c| self.local_system(mesh, c, mu, j_i))
            .collect::<Result<_>>()?;

        let mut triplets = Vec::new();
        let mut rhs = vec![0.0; n];
        let mut condensed = Vec::with_capacity(locals.len());
        for (c, ls) in locals.into_iter().enumerate() {
            let glob: Vec<usize> = ls.keep.iter().map(|&l| self.local_to_global(c, l)).collect();
            for (i, &gi) in glob.iter().enumerate() {
                let ui = unknown[gi];
                if ui == usize::MAX {
                    continue;
                }
                rhs[ui] += ls.rhs[i];
                for (j, &gj) in glob.iter().enumerate() {
                    let v = ls.k[(i, j)];
                    if v == 0.0 {
                        continue;
                    }
                    let uj = unknown[gj];
                    if uj != usize::MAX {
                        triplets.push((ui, uj, v));
                    } else if gj < ne {
                        rhs[ui] -= v * lifting[gj];
                    }
                }
            }
            condensed.push(ls.recover);
        }
        Ok(SparseSystem { n_h, n_p, triplets, rhs, unknown, lifting: lifting.clone(), n_edge: ne, n_nodal: self.nodal.n, condensed })
    }

    /// Global index in the stacked `(edge, nodal)` numbering.
    fn local_to_global(&self, cell: usize, l: usize) -> usize {
        let n_e = self.cells[cell].n_edge();
        if l < n_e {
            self.edge.cell_dofs[cell][l]
        } else {
            self.edge.n + self.nodal.cell_dofs[cell][l - n_e]
        }
    }

    fn local_system(&self, mesh: &Mesh, cell: usize, mu: &(dyn Fn(&Point) -> f64 + Sync), j_i: &DVector<f64>) -> Result<LocalSystem> {
        let ops = &self.cells[cell];
        let (a, b, mf) = self.local_blocks(mesh, cell, mu)?;
        let (ne, nn) = (ops.n_edge(), ops.n_nodal());
        let mut k = DMatrix::zeros(ne + nn, ne + nn);
        k.view_mut((0, 0), (ne, ne)).copy_from(&a);
        k.view_mut((ne, 0), (nn, ne)).copy_from(&b);
        k.view_mut((0, ne), (ne, nn)).copy_from(&b.transpose());
        let jl = self.gather(&self.face, cell, j_i);
        let mut f = DVector::zeros(ne + nn);
        f.rows_mut(0, ne).copy_from(&(ops.curl.transpose() * (&mf * jl)));

        let all: Vec<usize> = (0..ne + nn).collect();
        if !self.opts.condense {
            return Ok(LocalSystem { keep: all, k, rhs: f, recover: None });
        }
        let (ie, inn) = (ops.edge_interior_offset(), ops.nodal_interior_offset());
        let (interior, keep): (Vec<usize>, Vec<usize>) = all.into_iter().partition(|&l| (l >= ie && l < ne) || l >= ne + inn);
        let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| k[(r[i], c[j])]);
        let k_ii = sub(&interior, &interior);
        let k_is = sub(&interior, &keep);
        let f_i = DVector::from_iterator(interior.len(), interior.iter().map(|&l| f[l]));
        let mut rhs_blk = DMatrix::zeros(interior.len(), keep.len() + 1);
        rhs_blk.view_mut((0, 0), (interior.len(), keep.len())).copy_from(&k_is);
        rhs_blk.set_column(keep.len(), &f_i);
        let sol = linalg::solve_square(&k_ii, &rhs_blk, "interior block")?;
        let x = sol.columns(0, keep.len()).into_owned();
        let y = sol.column(keep.len()).into_owned();
        let k_ss = sub(&keep, &keep) - k_is.transpose() * &x;
        let f_s = DVector::from_iterator(keep.len(), keep.iter().map(|&l| f[l])) - k_is.transpose() * &y;
        let gl = |ls: &[usize]| ls.iter().map(|&l| self.local_to_global(cell, l)).collect::<Vec<_>>();
        let recover = Some(Condensed { interior: gl(&interior), keep: gl(&keep), x, y });
        Ok(LocalSystem { keep, k: k_ss, rhs: f_s, recover })
    }
}

struct LocalSystem {
    keep: Vec<usize>,
    k: DMatrix<f64>,
    rhs: DVector<f64>,
    recover: Option<Condensed>,
}

/// Interior elimination data of one cell: `u_I = y - x u_S`.
#[derive(Clone, Debug)]
pub struct Condensed {
    interior: Vec<usize>,
    keep: Vec<usize>,
    x: DMatrix<f64>,
    y: DVector<f64>,
}

/// Assembled saddle-point system on the free unknowns.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub n_h: usize,
    pub n_p: usize,
    /// Entries of the full symmetric matrix (duplicates are summed).
    pub triplets: Triplets,
    pub rhs: Vec<f64>,
    /// Stacked `(edge, nodal)` global index to unknown index, `usize::MAX` if
    /// constrained or condensed.
    pub unknown: Vec<usize>,
    /// Edge DOFs whose boundary entries are imposed.
    pub lifting: DVector<f64>,
    n_edge: usize,
    n_nodal: usize,
    condensed: Vec<Option<Condensed>>,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.n_h + self.n_p
    }

    /// Dense copy, for small systems and checks.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for &(i, j, v) in &self.triplets {
            m[(i, j)] += v;
        }
        m
    }

    /// Global edge and nodal DOF vectors from the solved unknowns.
    pub fn expand(&self, u: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let mut full = DVector::zeros(self.n_edge + self.n_nodal);
        for (g, &ui) in self.unknown.iter().enumerate() {
            full[g] = if ui != usize::MAX {
                u[ui]
            } else if g < self.n_edge {
                self.lifting[g]
            } else {
                0.0
            };
        }
        for c in self.condensed.iter().flatten() {
            let us = DVector::from_iterator(c.keep.len(), c.keep.iter().map(|&g| full[g]));
            let ui = &c.y - &c.x * us;
            for (&g, v) in c.interior.iter().zip(ui.iter()) {
                full[g] = *v;
            }
        }
        let h = full.rows(0, self.n_edge).into_owned();
        let p = full.rows(self.n_edge, self.n_nodal).into_owned();
        (h, p)
    }

    /// Writes the matrix in Matrix Market coordinate format, duplicates summed.
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut acc: HashMap<(usize, usize), f64> = HashMap::new();
        for &(i, j, v) in &self.triplets {
            *acc.entry((i, j)).or_insert(0.0) += v;
        }
        let mut entries: Vec<_> = acc.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        let io = |e: std::io::Error| VemError::Io { path: path.display().to_string(), source: e };
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
        writeln!(w, "{} {} {}", self.dim(), self.dim(), entries.len()).map_err(io)?;
        for ((i, j), v) in entries {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v).map_err(io)?;
        }
        Ok(())
    }
}

/// Dense matrix from triplets (duplicates summed).
pub fn dense(t: &Triplets, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for &(i, j, v) in t {
        m[(i, j)] += v;
    }
    m
}
