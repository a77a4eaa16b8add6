//! Manufactured magnetostatic problems on the unit cube.
//!
//! Each case provides the exact field `H`, its curl `j`, and the permeability
//! `μ` with `div(μH) = 0`, so the exact multiplier is `p = 0`.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::cell_vem::Vec3;
use crate::error::VemError;
use crate::mesh::geom::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    /// `μ = 1`, `H = (sin πy − sin πz, sin πz − sin πx, sin πx − sin πy)/π`.
    Uniform,
    /// `μ = 1 + x + y + z`, `μH = (sin πy, sin πz, sin πx)`.
    Variable,
    /// `μ = 1`, `H = curl A` with a pseudo-random `A ∈ (P_{k+1})³`.
    Patch { degree: usize, seed: u64 },
}

impl FromStr for Case {
    type Err = VemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" | "uniform" => Ok(Case::Uniform),
            "2" | "variable" => Ok(Case::Variable),
            _ => {
                let rest = s.strip_prefix("patch").ok_or_else(|| VemError::InvalidArgument(format!("unknown case '{s}'")))?;
                let degree = rest.trim_start_matches([':', '-']).parse().unwrap_or(1);
                Ok(Case::Patch { degree, seed: 7 })
            }
        }
    }
}

/// Sparse polynomial in `x, y, z`.
#[derive(Clone, Debug, Default)]
struct Poly3 {
    terms: Vec<(f64, [i32; 3])>,
}

impl Poly3 {
    fn eval(&self, x: &Point) -> f64 {
        self.terms.iter().map(|(c, e)| c * x[0].powi(e[0]) * x[1].powi(e[1]) * x[2].powi(e[2])).sum()
    }

    fn diff(&self, i: usize) -> Poly3 {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[i] > 0)
            .map(|&(c, mut e)| {
                let p = e[i];
                e[i] -= 1;
                (c * p as f64, e)
            })
            .collect();
        Poly3 { terms }
    }

    fn add(mut self, other: Poly3, s: f64) -> Poly3 {
        self.terms.extend(other.terms.into_iter().map(|(c, e)| (s * c, e)));
        self
    }
}

fn curl(a: &[Poly3; 3]) -> [Poly3; 3] {
    [
        a[2].diff(1).add(a[1].diff(2), -1.0),
        a[0].diff(2).add(a[2].diff(0), -1.0),
        a[1].diff(0).add(a[0].diff(1), -1.0),
    ]
}

/// Deterministic coefficients in `[-1, 1)` (splitmix64).
fn coefficients(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            2.0 * (z >> 11) as f64 / (1u64 << 53) as f64 - 1.0
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub case: Case,
    h: [Poly3; 3],
    j: [Poly3; 3],
}

impl Problem {
    pub fn new(case: Case) -> Problem {
        let (mut h, mut j): ([Poly3; 3], [Poly3; 3]) = Default::default();
        if let Case::Patch { degree, seed } = case {
            let d = degree as i32 + 1;
            let exps: Vec<[i32; 3]> = (0..=d)
                .flat_map(|a| (0..=d - a).flat_map(move |b| (0..=d - a - b).map(move |c| [a, b, c])))
                .collect();
            let c = coefficients(seed, 3 * exps.len());
            let a: [Poly3; 3] = std::array::from_fn(|comp| Poly3 {
                terms: exps.iter().enumerate().map(|(i, e)| (c[comp * exps.len() + i], *e)).collect(),
            });
            h = curl(&a);
            j = curl(&h);
        }
        Problem { case, h, j }
    }

    pub fn mu(&self, x: &Point) -> f64 {
        match self.case {
            Case::Variable => 1.0 + x[0] + x[1] + x[2],
            _ => 1.0,
        }
    }

    /// Exact field and its curl.
    pub fn field(&self, x: &Point) -> (Vec3, Vec3) {
        let [sx, sy, sz] = x.map(|t| (PI * t).sin());
        let [cx, cy, cz] = x.map(|t| (PI * t).cos());
        match self.case {
            Case::Uniform => ([(sy - sz) / PI, (sz - sx) / PI, (sx - sy) / PI], [-(cy + cz), -(cz + cx), -(cx + cy)]),
            Case::Variable => {
                let m = self.mu(x);
                let s = [sy, sz, sx];
                let cs = [-PI * cz, -PI * cx, -PI * cy];
                // curl(s/μ) = ∇(1/μ) × s + curl(s)/μ with ∇(1/μ) = -(1,1,1)/μ²
                let g = -1.0 / (m * m);
                let gx = [g * (s[2] - s[1]), g * (s[0] - s[2]), g * (s[1] - s[0])];
                (s.map(|v| v / m), std::array::from_fn(|i| gx[i] + cs[i] / m))
            }
            Case::Patch { .. } => (
                std::array::from_fn(|i| self.h[i].eval(x)),
                std::array::from_fn(|i| self.j[i].eval(x)),
            ),
        }
    }

    pub fn h(&self, x: &Point) -> Vec3 {
        self.field(x).0
    }

    /// Current density `j = curl H`.
    pub fn j(&self, x: &Point) -> Vec3 {
        self.field(x).1
    }

    /// Whether the exact `H` lies in `(P_k)³`.
    pub fn is_polynomial_of_degree(&self, k: usize) -> bool {
        matches!(self.case, Case::Patch { degree, .. } if degree <= k)
    }
}
