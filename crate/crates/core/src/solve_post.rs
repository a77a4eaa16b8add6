//! Sparse solve, error indicators, convergence and DOF-gain studies.

use std::fmt::Write as _;
use std::time::Instant;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::assembly::{Discretization, Options, SparseSystem};
use crate::cell_vem::build_face_data;
use crate::error::{Result, VemError};
use crate::face_vem::{FaceProduct, Mode};
use crate::mesh::Mesh;
use crate::poly::Monomials;
use crate::problems::Problem;
use crate::quadrature::cell_rule;

/// Relative residual above which a direct solve is reported as failed.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Maximum number of iterative refinement steps after the direct solve.
const REFINE_STEPS: usize = 3;

/// Solves the system with a sparse LU factorization; returns the unknowns and
/// the relative residual.
pub fn solve(sys: &SparseSystem) -> Result<(Vec<f64>, f64)> {
    let n = sys.dim();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let trips: Vec<Triplet<usize, usize, f64>> = sys.triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).map_err(|e| VemError::Solver(format!("{e:?}")))?;
    let lu = a.sp_lu().map_err(|e| VemError::Solver(format!("factorization: {e:?}")))?;
    let b = Mat::from_fn(n, 1, |i, _| sys.rhs[i]);
    let x = lu.solve(&b);
    let mut u: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if u.iter().any(|v| !v.is_finite()) {
        return Err(VemError::Solver("non-finite solution".into()));
    }
    let mut res = residual(sys, &u);
    // iterative refinement against the pivoting error on badly scaled cells
    for _ in 0..REFINE_STEPS {
        let r = residual_vector(sys, &u);
        let d = lu.solve(&Mat::from_fn(n, 1, |i, _| r[i]));
        let cand: Vec<f64> = u.iter().enumerate().map(|(i, v)| v + d[(i, 0)]).collect();
        let rc = residual(sys, &cand);
        if !(rc < res) {
            break;
        }
        (u, res) = (cand, rc);
    }
    if res > RESIDUAL_TOL {
        return Err(VemError::Solver(format!("relative residual {res:.3e}")));
    }
    Ok((u, res))
}

/// `f − K u`.
fn residual_vector(sys: &SparseSystem, u: &[f64]) -> Vec<f64> {
    let mut r = sys.rhs.clone();
    for &(i, j, v) in &sys.triplets {
        r[i] -= v * u[j];
    }
    r
}

/// `‖K u − f‖ / max(‖f‖, ‖K‖‖u‖)`.
pub fn residual(sys: &SparseSystem, u: &[f64]) -> f64 {
    let r = residual_vector(sys, u);
    let knorm = sys.triplets.iter().fold(0.0f64, |a, t| a.max(t.2.abs()));
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = l2(&sys.rhs).max(knorm * l2(u));
    if scale == 0.0 {
        0.0
    } else {
        l2(&r) / scale
    }
}

/// Error indicators of one discrete solution.
#[derive(Clone, Copy, Debug, Default)]
pub struct Errors {
    /// `‖H − Π⁰_k H_h‖₀`.
    pub l2: f64,
    /// `‖j − Π⁰_k curl H_h‖₀`.
    pub curl: f64,
    /// `‖H‖₀` and `‖j‖₀`.
    pub h_norm: f64,
    pub j_norm: f64,
    /// Scaled DOF norm of `p_h`: `(Σ_P |P| mean_i p_i²)^½`.
    pub p: f64,
}

impl Errors {
    /// Relative value, falling back to the absolute one when the reference vanishes.
    fn rel(v: f64, r: f64) -> f64 {
        if r > 0.0 {
            v / r
        } else {
            v
        }
    }

    pub fn l2_rel(&self) -> f64 {
        Self::rel(self.l2, self.h_norm)
    }

    pub fn curl_rel(&self) -> f64 {
        Self::rel(self.curl, self.j_norm)
    }

    pub fn p_rel(&self) -> f64 {
        Self::rel(self.p, self.h_norm)
    }
}

pub fn compute_errors(disc: &Discretization, mesh: &Mesh, problem: &Problem, h_dofs: &DVector<f64>, p_dofs: &DVector<f64>) -> Result<Errors> {
    let k = disc.opts.k;
    let deg = (2 * k + 4).max(10);
    let mono = Monomials::new(3, k as i32);
    let nk = mono.len();
    let parts: Vec<[f64; 5]> = disc
        .cells
        .par_iter()
        .enumerate()
        .map(|(c, ops)| {
            let rule = cell_rule(mesh, c, deg)?;
            let hl = disc.gather(&disc.edge, c, h_dofs);
            let ph = &ops.pi0_edge * &hl;
            let pc = ops.pi0_face(mesh, &disc.faces, k)? * (&ops.curl * &hl);
            let mut acc = [0.0; 5];
            for (x, &w) in rule.points.iter().zip(&rule.weights) {
                let m = mono.eval(&ops.frame.xi(x));
                let (hv, jv) = problem.field(x);
                for comp in 0..3 {
                    let a: f64 = (0..nk).map(|i| ph[comp * nk + i] * m[i]).sum();
                    let b: f64 = (0..nk).map(|i| pc[comp * nk + i] * m[i]).sum();
                    acc[0] += w * (hv[comp] - a).powi(2);
                    acc[1] += w * (jv[comp] - b).powi(2);
                    acc[2] += w * hv[comp].powi(2);
                    acc[3] += w * jv[comp].powi(2);
                }
            }
            let pl = disc.gather(&disc.nodal, c, p_dofs);
            acc[4] = ops.frame.volume * pl.norm_squared() / pl.len() as f64;
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let s = |i: usize| parts.iter().map(|a| a[i]).sum::<f64>().sqrt();
    Ok(Errors { l2: s(0), curl: s(1), h_norm: s(2), j_norm: s(3), p: s(4) })
}

/// Outcome of one solve on one mesh.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub mesh: String,
    pub h: f64,
    pub n_cells: usize,
    pub dofs_total: usize,
    pub dofs_skeleton: usize,
    pub errors: Errors,
    pub residual: f64,
    pub seconds: f64,
}

/// Full pipeline: spaces, assembly, solve, errors. Also returns the global
/// DOF vectors `(H_h, p_h)`.
pub fn run(mesh: &Mesh, name: &str, opts: Options, problem: &Problem) -> Result<(SolveReport, Discretization, DVector<f64>, DVector<f64>)> {
    let t0 = Instant::now();
    let disc = Discretization::new(mesh, opts)?;
    let sys = disc.assemble(mesh, problem)?;
    let (u, residual) = solve(&sys)?;
    let (h, p) = sys.expand(&u);
    let errors = compute_errors(&disc, mesh, problem, &h, &p)?;
    let report = SolveReport {
        mesh: name.to_string(),
        h: mesh.mesh_size,
        n_cells: mesh.num_cells(),
        dofs_total: disc.edge.n + disc.nodal.n,
        dofs_skeleton: disc.edge.n_skeleton() + disc.nodal.n_skeleton(),
        errors,
        residual,
        seconds: t0.elapsed().as_secs_f64(),
    };
    Ok((report, disc, h, p))
}

/// Least-squares slope of `log e` against `log h`.
pub fn slope(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let (x, y): (Vec<f64>, Vec<f64>) = h.iter().zip(e).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub rows: Vec<SolveReport>,
    pub rate_l2: f64,
    pub rate_curl: f64,
}

/// Solves on a sequence of meshes with decreasing size and fits the rates.
pub fn convergence_study(meshes: &[(String, Mesh)], opts: Options, problem: &Problem) -> Result<ConvergenceTable> {
    if meshes.len() < 3 {
        return Err(VemError::InvalidArgument("a convergence study needs at least 3 meshes".into()));
    }
    if meshes.windows(2).any(|w| w[1].1.mesh_size >= w[0].1.mesh_size) {
        return Err(VemError::InvalidArgument("mesh sizes must strictly decrease".into()));
    }
    let mut rows = Vec::new();
    for (name, m) in meshes {
        rows.push(run(m, name, opts, problem)?.0);
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.errors.l2_rel()).collect();
    let c: Vec<f64> = rows.iter().map(|r| r.errors.curl_rel()).collect();
    Ok(ConvergenceTable { rate_l2: slope(&h, &e), rate_curl: slope(&h, &c), rows })
}

/// Formats a float with 12 significant digits.
pub fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mesh,h,N_P,dofs_total,dofs_skeleton,error_L2,error_curl,p_norm,seconds\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{:.3}",
                r.mesh,
                fmt12(r.h),
                r.n_cells,
                r.dofs_total,
                r.dofs_skeleton,
                fmt12(r.errors.l2_rel()),
                fmt12(r.errors.curl_rel()),
                fmt12(r.errors.p_rel()),
                r.seconds
            );
        }
        s
    }
}

/// Skeleton DOF counts of the nodal and edge spaces, standard vs. reduced.
#[derive(Clone, Debug)]
pub struct GainReport {
    pub mesh: String,
    pub k: usize,
    pub n_cells: usize,
    pub dof_f: usize,
    pub dof_f_s: usize,
}

impl GainReport {
    pub fn gain_pct(&self) -> f64 {
        100.0 * (self.dof_f - self.dof_f_s) as f64 / self.dof_f as f64
    }

    pub fn csv_header() -> &'static str {
        "mesh,k,N_P,dof_f,dof_f_S,gain_pct\n"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}\n", self.mesh, self.k, self.n_cells, self.dof_f, self.dof_f_s, fmt12(self.gain_pct()))
    }
}

/// Vertex, edge and face DOFs of the nodal plus edge spaces.
pub fn skeleton_dofs(mesh: &Mesh, k: usize, mode: Mode) -> Result<usize> {
    let faces = build_face_data(mesh, k, mode, FaceProduct::default())?;
    let (nv, ne) = (mesh.num_vertices(), mesh.num_edges());
    let nodal = nv + k * ne + faces.iter().map(|f| f.nodal.nx).sum::<usize>();
    let edge = (k + 1) * ne + faces.iter().map(|f| f.edge.ndofs - f.edge.x_offset()).sum::<usize>();
    Ok(nodal + edge)
}

pub fn gain_study(mesh: &Mesh, name: &str, k: usize) -> Result<GainReport> {
    Ok(GainReport {
        mesh: name.to_string(),
        k,
        n_cells: mesh.num_cells(),
        dof_f: skeleton_dofs(mesh, k, Mode::Standard)?,
        dof_f_s: skeleton_dofs(mesh, k, Mode::Serendipity)?,
    })
}
