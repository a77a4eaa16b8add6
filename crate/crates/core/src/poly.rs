//! Scaled monomial algebra on edges, faces and cells.
//!
//! Every polynomial is stored as coefficients over the monomials
//! `((x - center) / scale)^alpha`, ordered by total degree and then by
//! decreasing leading exponent. Differentiation, multiplication by the local
//! coordinate and the classical vector decompositions are all exact
//! coefficient-space operations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VemError};
use crate::linalg;

/// Number of monomials of total degree exactly `s` in `dim` variables.
pub fn homogeneous_dim(dim: usize, s: i32) -> usize {
    if s < 0 {
        return 0;
    }
    let s = s as usize;
    match dim {
        1 => 1,
        2 => s + 1,
        3 => (s + 1) * (s + 2) / 2,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Number of monomials of total degree at most `s` in `dim` variables.
pub fn full_dim(dim: usize, s: i32) -> usize {
    if s < 0 {
        return 0;
    }
    let s = s as usize;
    match dim {
        1 => s + 1,
        2 => (s + 1) * (s + 2) / 2,
        3 => (s + 1) * (s + 2) * (s + 3) / 6,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Which subspace of `P_s` a [`PolyBasis`] spans.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BasisKind {
    /// All of `P_s`.
    Full,
    /// Homogeneous polynomials of degree exactly `s`.
    Homogeneous,
    /// Members of `P_s` with zero mean over the entity.
    ZeroMean,
    /// Span of homogeneous polynomials of degree `t` with `beta < t <= s`.
    BetaWindow { beta: i32 },
}

pub fn poly_dim(dim: usize, degree: i32, kind: BasisKind) -> usize {
    match kind {
        BasisKind::Full => full_dim(dim, degree),
        BasisKind::Homogeneous => homogeneous_dim(dim, degree),
        BasisKind::ZeroMean => full_dim(dim, degree).saturating_sub(1),
        BasisKind::BetaWindow { beta } => {
            ((beta + 1).max(0)..=degree).map(|t| homogeneous_dim(dim, t)).sum()
        }
    }
}

/// Exponent table of the monomials of degree at most `degree`.
#[derive(Clone, Debug)]
pub struct Monomials {
    dim: usize,
    degree: i32,
    exps: Vec<[u8; 3]>,
}

impl Monomials {
    pub fn new(dim: usize, degree: i32) -> Self {
        assert!((1..=3).contains(&dim));
        let mut exps = Vec::with_capacity(full_dim(dim, degree));
        for s in 0..=degree.max(-1) {
            let s = s as u8;
            match dim {
                1 => exps.push([s, 0, 0]),
                2 => {
                    for b in 0..=s {
                        exps.push([s - b, b, 0]);
                    }
                }
                _ => {
                    for r in 0..=s {
                        let a = s - r;
                        for c in 0..=r {
                            exps.push([a, r - c, c]);
                        }
                    }
                }
            }
        }
        Monomials { dim, degree, exps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[[u8; 3]] {
        &self.exps
    }

    /// Position of an exponent tuple in the ordering used by [`Monomials::new`].
    pub fn index_of(dim: usize, e: [u8; 3]) -> usize {
        let s = (e[0] + e[1] + e[2]) as i32;
        let off = full_dim(dim, s - 1);
        match dim {
            1 => off,
            2 => off + e[1] as usize,
            _ => {
                let r = (e[1] + e[2]) as usize;
                off + r * (r + 1) / 2 + e[2] as usize
            }
        }
    }

    /// Index range of the monomials of exact degree `s`.
    pub fn degree_range(&self, s: i32) -> std::ops::Range<usize> {
        full_dim(self.dim, s - 1)..full_dim(self.dim, s)
    }

    pub fn total_degree(&self, i: usize) -> i32 {
        let e = self.exps[i];
        (e[0] + e[1] + e[2]) as i32
    }

    /// Values of all monomials at the scaled point `xi`.
    pub fn eval_into(&self, xi: &[f64], out: &mut [f64]) {
        let d = self.degree.max(0) as usize;
        let mut pw = [[1.0f64; 16]; 3];
        for k in 0..self.dim {
            for j in 1..=d {
                pw[k][j] = pw[k][j - 1] * xi[k];
            }
        }
        for (o, e) in out.iter_mut().zip(&self.exps) {
            *o = pw[0][e[0] as usize] * pw[1][e[1] as usize] * pw[2][e[2] as usize];
        }
    }

    pub fn eval(&self, xi: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        self.eval_into(xi, &mut v);
        v
    }

    /// Values and derivatives (with respect to the scaled variables) of all monomials.
    pub fn eval_grad(&self, xi: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let d = self.degree.max(0) as usize;
        let mut pw = [[1.0f64; 17]; 3];
        for k in 0..self.dim {
            for j in 1..=d {
                pw[k][j] = pw[k][j - 1] * xi[k];
            }
        }
        let mut v = Vec::with_capacity(self.len());
        let mut g = Vec::with_capacity(self.len());
        for e in &self.exps {
            let (a, b, c) = (e[0] as usize, e[1] as usize, e[2] as usize);
            v.push(pw[0][a] * pw[1][b] * pw[2][c]);
            let da = if a > 0 { a as f64 * pw[0][a - 1] * pw[1][b] * pw[2][c] } else { 0.0 };
            let db = if b > 0 { b as f64 * pw[0][a] * pw[1][b - 1] * pw[2][c] } else { 0.0 };
            let dc = if c > 0 { c as f64 * pw[0][a] * pw[1][b] * pw[2][c - 1] } else { 0.0 };
            g.push([da, db, dc]);
        }
        (v, g)
    }

    /// Matrix of d/dxi_k (scaled variable) from `P_degree` to `P_{degree-1}`.
    pub fn derivative_matrix(&self, k: usize) -> DMatrix<f64> {
        let lower = Monomials::new(self.dim, self.degree - 1);
        let mut d = DMatrix::zeros(lower.len(), self.len());
        for (j, e) in self.exps.iter().enumerate() {
            if e[k] > 0 {
                let mut f = *e;
                f[k] -= 1;
                d[(Monomials::index_of(self.dim, f), j)] = e[k] as f64;
            }
        }
        d
    }

    /// Matrix of multiplication by xi_k from `P_degree` to `P_{degree+1}`.
    pub fn times_matrix(&self, k: usize) -> DMatrix<f64> {
        let upper = Monomials::new(self.dim, self.degree + 1);
        let mut m = DMatrix::zeros(upper.len(), self.len());
        for (j, e) in self.exps.iter().enumerate() {
            let mut f = *e;
            f[k] += 1;
            m[(Monomials::index_of(self.dim, f), j)] = 1.0;
        }
        m
    }

    /// Embedding of `P_degree` coefficients into `P_target` (target >= degree).
    pub fn embed_matrix(&self, target: i32) -> DMatrix<f64> {
        let n = full_dim(self.dim, target);
        let mut m = DMatrix::zeros(n, self.len());
        for j in 0..self.len() {
            m[(j, j)] = 1.0;
        }
        m
    }
}

/// A basis of a polynomial (sub)space on an entity, in scaled monomials.
#[derive(Clone, Debug)]
pub struct PolyBasis {
    pub dim: usize,
    pub degree: i32,
    pub center: [f64; 3],
    pub scale: f64,
    pub kind: BasisKind,
    mono: Monomials,
    /// Entity means of each monomial; required by [`BasisKind::ZeroMean`].
    means: Option<Vec<f64>>,
}

impl PolyBasis {
    pub fn new(dim: usize, degree: i32, center: [f64; 3], scale: f64, kind: BasisKind) -> Self {
        PolyBasis { dim, degree, center, scale, kind, mono: Monomials::new(dim, degree), means: None }
    }

    pub fn full(dim: usize, degree: i32, center: [f64; 3], scale: f64) -> Self {
        Self::new(dim, degree, center, scale, BasisKind::Full)
    }

    /// Zero-mean basis: `m_alpha - mean(m_alpha)` for every non-constant monomial.
    pub fn zero_mean(dim: usize, degree: i32, center: [f64; 3], scale: f64, means: Vec<f64>) -> Self {
        let mut b = Self::new(dim, degree, center, scale, BasisKind::ZeroMean);
        assert_eq!(means.len(), b.mono.len());
        b.means = Some(means);
        b
    }

    pub fn monomials(&self) -> &Monomials {
        &self.mono
    }

    pub fn len(&self) -> usize {
        poly_dim(self.dim, self.degree, self.kind)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Indices (into the full monomial table) of the members of this basis.
    pub fn member_indices(&self) -> Vec<usize> {
        let all = 0..self.mono.len();
        match self.kind {
            BasisKind::Full => all.collect(),
            BasisKind::Homogeneous => self.mono.degree_range(self.degree).collect(),
            BasisKind::ZeroMean => all.skip(1).collect(),
            BasisKind::BetaWindow { beta } => all
                .filter(|&i| {
                    let t = self.mono.total_degree(i);
                    t > beta && t <= self.degree
                })
                .collect(),
        }
    }

    pub fn local(&self, x: &[f64]) -> [f64; 3] {
        let mut xi = [0.0; 3];
        for k in 0..self.dim {
            xi[k] = (x[k] - self.center[k]) / self.scale;
        }
        xi
    }

    /// Values of the basis functions at the physical point `x`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let xi = self.local(x);
        let all = self.mono.eval(&xi[..self.dim]);
        let idx = self.member_indices();
        match (&self.kind, &self.means) {
            (BasisKind::ZeroMean, Some(m)) => idx.iter().map(|&i| all[i] - m[i]).collect(),
            _ => idx.iter().map(|&i| all[i]).collect(),
        }
    }

    /// Coefficient matrix of the basis members in the full monomial basis.
    pub fn as_full_coefficients(&self) -> DMatrix<f64> {
        let idx = self.member_indices();
        let mut c = DMatrix::zeros(self.mono.len(), idx.len());
        for (j, &i) in idx.iter().enumerate() {
            c[(i, j)] = 1.0;
            if let (BasisKind::ZeroMean, Some(m)) = (&self.kind, &self.means) {
                c[(0, j)] -= m[i];
            }
        }
        c
    }
}

/// Coefficients of a (possibly vector-valued) polynomial in a full scaled basis.
#[derive(Clone, Debug)]
pub struct PolyCoeffs {
    pub basis: PolyBasis,
    pub ncomp: usize,
    /// Component-major: `coeffs[c * n + i]` multiplies monomial `i` of component `c`.
    pub coeffs: Vec<f64>,
}

impl PolyCoeffs {
    pub fn zeros(basis: PolyBasis, ncomp: usize) -> Self {
        let n = basis.monomials().len();
        PolyCoeffs { basis, ncomp, coeffs: vec![0.0; n * ncomp] }
    }

    pub fn from_vec(basis: PolyBasis, ncomp: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), basis.monomials().len() * ncomp, "coefficient length");
        PolyCoeffs { basis, ncomp, coeffs }
    }

    pub fn nmono(&self) -> usize {
        self.basis.monomials().len()
    }

    pub fn degree(&self) -> i32 {
        self.basis.degree
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.nmono();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let xi = self.basis.local(x);
        let m = self.basis.monomials().eval(&xi[..self.basis.dim]);
        (0..self.ncomp)
            .map(|c| self.component(c).iter().zip(&m).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn with_degree(&self, degree: i32, ncomp: usize) -> PolyCoeffs {
        let b = PolyBasis::full(self.basis.dim, degree, self.basis.center, self.basis.scale);
        PolyCoeffs::zeros(b, ncomp)
    }

    /// Re-expresses the polynomial in a basis of higher degree.
    pub fn raised(&self, degree: i32) -> PolyCoeffs {
        assert!(degree >= self.degree());
        let mut out = self.with_degree(degree, self.ncomp);
        let (n, m) = (self.nmono(), out.nmono());
        for c in 0..self.ncomp {
            out.coeffs[c * m..c * m + n].copy_from_slice(self.component(c));
        }
        out
    }

    pub fn add(&self, other: &PolyCoeffs) -> PolyCoeffs {
        let d = self.degree().max(other.degree());
        let (a, b) = (self.raised(d), other.raised(d));
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect();
        PolyCoeffs { coeffs, ..a }
    }

    pub fn scaled(&self, s: f64) -> PolyCoeffs {
        PolyCoeffs { coeffs: self.coeffs.iter().map(|c| c * s).collect(), ..self.clone() }
    }

    /// Physical partial derivative of component `c` along axis `k`.
    fn partial(&self, c: usize, k: usize) -> Vec<f64> {
        let d = self.basis.monomials().derivative_matrix(k);
        let v = DVector::from_column_slice(self.component(c));
        (d * v / self.basis.scale).iter().cloned().collect()
    }
}

/// Differential operators acting on [`PolyCoeffs`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiffOp {
    Grad,
    Rot2d,
    Brot2d,
    Curl3d,
    Div,
}

pub fn apply_diff(op: DiffOp, p: &PolyCoeffs) -> Result<PolyCoeffs> {
    let dim = p.basis.dim;
    let (expect, out_comp) = match op {
        DiffOp::Grad => (1, dim),
        DiffOp::Rot2d => (2, 1),
        DiffOp::Brot2d => (1, 2),
        DiffOp::Curl3d => (3, 3),
        DiffOp::Div => (dim, 1),
    };
    let dim_ok = match op {
        DiffOp::Rot2d | DiffOp::Brot2d => dim == 2,
        DiffOp::Curl3d => dim == 3,
        _ => true,
    };
    if p.ncomp != expect || !dim_ok {
        return Err(VemError::Arity { expected: expect, got: p.ncomp });
    }
    let mut out = p.with_degree(p.degree() - 1, out_comp);
    let n = out.nmono();
    if n == 0 {
        return Ok(out);
    }
    let mut put = |c: usize, sign: f64, v: Vec<f64>| {
        for (o, x) in out.coeffs[c * n..(c + 1) * n].iter_mut().zip(v) {
            *o += sign * x;
        }
    };
    match op {
        DiffOp::Grad => {
            for k in 0..dim {
                put(k, 1.0, p.partial(0, k));
            }
        }
        DiffOp::Rot2d => {
            put(0, 1.0, p.partial(1, 0));
            put(0, -1.0, p.partial(0, 1));
        }
        DiffOp::Brot2d => {
            put(0, 1.0, p.partial(0, 1));
            put(1, -1.0, p.partial(0, 0));
        }
        DiffOp::Curl3d => {
            put(0, 1.0, p.partial(2, 1));
            put(0, -1.0, p.partial(1, 2));
            put(1, 1.0, p.partial(0, 2));
            put(1, -1.0, p.partial(2, 0));
            put(2, 1.0, p.partial(1, 0));
            put(2, -1.0, p.partial(0, 1));
        }
        DiffOp::Div => {
            for k in 0..dim {
                put(0, 1.0, p.partial(k, k));
            }
        }
    }
    Ok(out)
}

/// `x ∧ q` in scaled coordinates (`x` replaced by `xi = (x - center)/scale`).
pub fn cross_xi(q: &PolyCoeffs) -> PolyCoeffs {
    assert_eq!(q.ncomp, 3);
    let mono = q.basis.monomials();
    let mut out = q.with_degree(q.degree() + 1, 3);
    let n = out.nmono();
    let t: Vec<DMatrix<f64>> = (0..3).map(|k| mono.times_matrix(k)).collect();
    let comp = |c: usize| DVector::from_column_slice(q.component(c));
    // (xi ∧ q)_i = xi_j q_k - xi_k q_j for (i, j, k) cyclic
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let v = &t[j] * comp(k) - &t[k] * comp(j);
        out.coeffs[i * n..(i + 1) * n].copy_from_slice(v.as_slice());
    }
    out
}

/// `xi * r` for scalar `r`, as a `dim`-vector polynomial.
pub fn times_xi(r: &PolyCoeffs) -> PolyCoeffs {
    assert_eq!(r.ncomp, 1);
    let dim = r.basis.dim;
    let mono = r.basis.monomials();
    let mut out = r.with_degree(r.degree() + 1, dim);
    let n = out.nmono();
    let v = DVector::from_column_slice(r.component(0));
    for k in 0..dim {
        let w = mono.times_matrix(k) * &v;
        out.coeffs[k * n..(k + 1) * n].copy_from_slice(w.as_slice());
    }
    out
}

/// `xi^perp * r = (-xi_2, xi_1) r` for a 2D scalar `r`.
pub fn times_xi_perp(r: &PolyCoeffs) -> PolyCoeffs {
    let x = times_xi(r);
    let n = x.nmono();
    let mut coeffs = vec![0.0; 2 * n];
    for i in 0..n {
        coeffs[i] = -x.coeffs[n + i];
        coeffs[n + i] = x.coeffs[i];
    }
    PolyCoeffs { coeffs, ..x }
}

fn unit_poly(dim: usize, degree: i32, center: [f64; 3], scale: f64, ncomp: usize, comp: usize, mono: usize) -> PolyCoeffs {
    let mut p = PolyCoeffs::zeros(PolyBasis::full(dim, degree, center, scale), ncomp);
    let n = p.nmono();
    p.coeffs[comp * n + mono] = 1.0;
    p
}

/// A maximal independent generating set of `{xi ∧ p : p ∈ (P_s)^3}`.
#[derive(Clone, Debug)]
pub struct CrossFamily {
    pub degree: i32,
    /// `(monomial index, component)` of each retained generator `xi ∧ (m e_c)`.
    pub generators: Vec<(usize, usize)>,
    /// The retained generators as `(P_{s+1})^3` polynomials.
    pub polys: Vec<PolyCoeffs>,
}

impl CrossFamily {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }
}

/// Greedy selection of independent generators `xi ∧ (m_alpha e_c)`, `|alpha| <= s`.
pub fn cross_family_basis(s: i32, center: [f64; 3], scale: f64) -> CrossFamily {
    let mono = Monomials::new(3, s);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut generators = Vec::new();
    let mut polys = Vec::new();
    for i in 0..mono.len() {
        for c in 0..3 {
            let g = cross_xi(&unit_poly(3, s, center, scale, 3, c, i));
            let v = DVector::from_column_slice(&g.coeffs);
            let mut r = v.clone();
            for _ in 0..2 {
                for q in &basis {
                    let a = q.dot(&r);
                    r -= q * a;
                }
            }
            let nr = r.norm();
            if nr > linalg::RANK_TOL * v.norm() {
                basis.push(r / nr);
                generators.push((i, c));
                polys.push(g);
            }
        }
    }
    CrossFamily { degree: s, generators, polys }
}

/// Which decomposition to apply in [`decompose_vec`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decomp {
    /// `(P_s)^2 = brot(P_{s+1}) ⊕ x P_{s-1}`
    Rot2d,
    /// `(P_s)^2 = grad(P_{s+1}) ⊕ x^perp P_{s-1}`
    Grad2d,
    /// `(P_s)^3 = curl(x ∧ (P_s)^3) ⊕ x P_{s-1}`
    Curl3d,
    /// `(P_s)^3 = grad(P_{s+1}) ⊕ x ∧ (P_{s-1})^3`
    Grad3d,
}

/// Generators of both summands for a decomposition of `(P_s)^d`.
///
/// Returns `(first, second, npot)` where `first[j]` / `second[j]` are the images
/// of the potential / multiplier generators; the columns of
/// [`decomposition_matrix`] follow the same order.
fn decomposition_generators(which: Decomp, s: i32, center: [f64; 3], scale: f64) -> (Vec<PolyCoeffs>, Vec<PolyCoeffs>) {
    let mut first = Vec::new();
    let mut second = Vec::new();
    match which {
        Decomp::Rot2d | Decomp::Grad2d => {
            let n1 = full_dim(2, s + 1);
            for i in 1..n1 {
                let q = unit_poly(2, s + 1, center, scale, 1, 0, i);
                let op = if which == Decomp::Rot2d { DiffOp::Brot2d } else { DiffOp::Grad };
                first.push(apply_diff(op, &q).unwrap());
            }
            for i in 0..full_dim(2, s - 1) {
                let r = unit_poly(2, s - 1, center, scale, 1, 0, i);
                let v = if which == Decomp::Rot2d { times_xi(&r) } else { times_xi_perp(&r) };
                second.push(v);
            }
        }
        Decomp::Curl3d => {
            let fam = cross_family_basis(s, center, scale);
            for g in &fam.polys {
                first.push(apply_diff(DiffOp::Curl3d, g).unwrap());
            }
            for i in 0..full_dim(3, s - 1) {
                second.push(times_xi(&unit_poly(3, s - 1, center, scale, 1, 0, i)));
            }
        }
        Decomp::Grad3d => {
            for i in 1..full_dim(3, s + 1) {
                first.push(apply_diff(DiffOp::Grad, &unit_poly(3, s + 1, center, scale, 1, 0, i)).unwrap());
            }
            let fam = cross_family_basis(s - 1, center, scale);
            second.extend(fam.polys.iter().cloned());
        }
    }
    (first, second)
}

/// Square matrix whose columns are the generator images (in `(P_s)^d`
/// coefficients); its inverse maps a vector polynomial to generator weights.
pub fn decomposition_matrix(which: Decomp, s: i32, center: [f64; 3], scale: f64) -> (DMatrix<f64>, usize) {
    let (first, second) = decomposition_generators(which, s, center, scale);
    let dim = if matches!(which, Decomp::Rot2d | Decomp::Grad2d) { 2 } else { 3 };
    let n = full_dim(dim, s);
    let cols: Vec<DVector<f64>> = first
        .iter()
        .chain(second.iter())
        .map(|p| {
            let p = if p.degree() < s { p.raised(s) } else { p.clone() };
            let mut v = DVector::zeros(dim * n);
            for c in 0..dim {
                v.rows_mut(c * n, n).copy_from(&DVector::from_column_slice(&p.component(c)[..n]));
            }
            v
        })
        .collect();
    let m = if cols.is_empty() { DMatrix::zeros(dim * n, 0) } else { DMatrix::from_columns(&cols) };
    (m, first.len())
}

/// Splits a vector polynomial into the two summands of the chosen decomposition.
pub fn decompose_vec(p: &PolyCoeffs, which: Decomp) -> Result<(PolyCoeffs, PolyCoeffs)> {
    let dim = if matches!(which, Decomp::Rot2d | Decomp::Grad2d) { 2 } else { 3 };
    if p.ncomp != dim || p.basis.dim != dim {
        return Err(VemError::Arity { expected: dim, got: p.ncomp });
    }
    let s = p.degree();
    let (m, npot) = decomposition_matrix(which, s, p.basis.center, p.basis.scale);
    let rhs = DMatrix::from_column_slice(p.coeffs.len(), 1, &p.coeffs);
    let w = linalg::solve_square(&m, &rhs, "polynomial decomposition")?;
    let first_part = m.columns(0, npot) * w.rows(0, npot);
    let second_part = m.columns(npot, m.ncols() - npot) * w.rows(npot, m.ncols() - npot);
    let mk = |v: DMatrix<f64>| PolyCoeffs::from_vec(p.basis.clone(), dim, v.iter().cloned().collect());
    Ok((mk(first_part), mk(second_part)))
}
