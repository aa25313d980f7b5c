//! Two-particle S-matrices on `C^d ⊗ C^d` and their axioms.
//!
//! Index convention: the basis vector `e_a ⊗ e_b` has index `a * d + b`.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{c, cis, kron, max_abs, CMat, C64};
use crate::scatfunc::{Domain, ScatteringFunction};

type Evaluator = Arc<dyn Fn(f64) -> Result<CMat> + Send + Sync>;

#[derive(Clone)]
pub struct TwoParticleSMatrix {
    dim: usize,
    labels: Vec<String>,
    /// Image of each one-particle label under charge conjugation.
    conjugation: Vec<usize>,
    evaluator: Evaluator,
}

impl std::fmt::Debug for TwoParticleSMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TwoParticleSMatrix")
            .field("dim", &self.dim)
            .field("labels", &self.labels)
            .finish()
    }
}

impl TwoParticleSMatrix {
    pub fn new(
        dim: usize,
        labels: Vec<String>,
        conjugation: Vec<usize>,
        evaluator: impl Fn(f64) -> Result<CMat> + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(labels.len(), dim);
        assert_eq!(conjugation.len(), dim);
        Self {
            dim,
            labels,
            conjugation,
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let labels = (1..=dim).map(|i| format!("e{i}")).collect();
        Self::new(dim, labels, (0..dim).collect(), move |_| {
            Ok(CMat::identity(dim * dim, dim * dim))
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn eval(&self, theta: f64) -> Result<CMat> {
        (self.evaluator)(theta)
    }

    /// Label of the two-particle basis vector with the given index.
    pub fn pair_label(&self, index: usize) -> String {
        format!("{}⊗{}", self.labels[index / self.dim], self.labels[index % self.dim])
    }
}

/// The 16 × 16 matrix on `{e_{1,+}, e_{1,−}, e_{2,+}, e_{2,−}}^{⊗2}`: the entry mapping
/// `e_b ⊗ e_a` to `e_a ⊗ e_b` is `1` within a component, `e^{i2πκst}` for `a = (1,s)`,
/// `b = (2,t)` and `e^{−i2πκst}` for `a = (2,s)`, `b = (1,t)`.
pub fn federbush_smatrix(kappa: f64) -> TwoParticleSMatrix {
    let labels = ["e1+", "e1-", "e2+", "e2-"].iter().map(|s| s.to_string()).collect();
    let m = federbush_matrix(kappa);
    TwoParticleSMatrix::new(4, labels, vec![1, 0, 3, 2], move |_| Ok(m.clone()))
}

fn federbush_matrix(kappa: f64) -> CMat {
    let comp = |i: usize| i / 2;
    let sign = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let mut m = CMat::zeros(16, 16);
    for a in 0..4 {
        for b in 0..4 {
            let st = sign(a) * sign(b);
            let v = match (comp(a), comp(b)) {
                (0, 1) => cis(2.0 * std::f64::consts::PI * kappa * st),
                (1, 0) => cis(-2.0 * std::f64::consts::PI * kappa * st),
                _ => c(1.0, 0.0),
            };
            m[(a * 4 + b, b * 4 + a)] = v;
        }
    }
    m
}

/// The 4 × 4 matrix with entries `1, φ(e^θ), φ(−e^{−θ}), 1` on `{e₁⊗e₁, e₁⊗e₂, e₂⊗e₁, e₂⊗e₂}`.
pub fn longo_witten_smatrix(phi: &ScatteringFunction) -> Result<TwoParticleSMatrix> {
    let phi = match phi.domain() {
        Domain::HalfPlane => phi.clone(),
        Domain::Rapidity => match phi {
            ScatteringFunction::RapidityForm { inner } => inner.as_ref().clone(),
            ScatteringFunction::Constant { value, .. } => ScatteringFunction::Constant {
                value: *value,
                domain: Domain::HalfPlane,
            },
            _ => {
                return Err(crate::error::LabError::InvalidParameter(
                    "Longo-Witten S-matrix needs a half-plane function".into(),
                ))
            }
        },
    };
    phi.validate_parameters()?;
    let labels = vec!["e1".to_string(), "e2".to_string()];
    Ok(TwoParticleSMatrix::new(2, labels, vec![0, 1], move |theta| {
        let mut m = CMat::zeros(4, 4);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 2)] = phi.eval_real(theta.exp())?;
        m[(2, 1)] = phi.eval_real(-(-theta).exp())?;
        m[(3, 3)] = c(1.0, 0.0);
        Ok(m)
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub unitarity: f64,
    pub yang_baxter: f64,
    pub hermitian_analyticity: f64,
    /// Whether the sparsity pattern is invariant under charge conjugation on both slots.
    pub crossing_pattern: bool,
    /// Whether every basis pair is mapped to a multiple of the flipped pair.
    pub flip_diagonal: bool,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Unitarity and hermitian analyticity at each sample, Yang-Baxter at each pair of samples
/// taken as `(θ₁, θ₂)`: `(S(θ₁)⊗1)(1⊗S(θ₁+θ₂))(S(θ₂)⊗1) = (1⊗S(θ₂))(S(θ₁+θ₂)⊗1)(1⊗S(θ₁))`.
pub fn check_axioms(s: &TwoParticleSMatrix, thetas: &[f64], tol: f64) -> Result<AxiomReport> {
    let d = s.dim;
    let dd = d * d;
    let id = CMat::identity(d, d);
    let id2 = CMat::identity(dd, dd);
    let mut unitarity = 0.0_f64;
    let mut herm = 0.0_f64;
    let mut pattern_ok = true;
    let mut flip_ok = true;
    for &t in thetas {
        let m = s.eval(t)?;
        unitarity = unitarity.max(max_abs(&(m.adjoint() * &m - &id2)));
        herm = herm.max(max_abs(&(m.adjoint() - s.eval(-t)?)));
        pattern_ok &= crossing_pattern(s, &m);
        flip_ok &= flip_diagonal(d, &m);
    }
    let mut ybe = 0.0_f64;
    for (i, &t1) in thetas.iter().enumerate() {
        let t2 = thetas[(i + 1) % thetas.len()];
        let (s1, s2, s12) = (s.eval(t1)?, s.eval(t2)?, s.eval(t1 + t2)?);
        let lhs = kron(&s1, &id) * kron(&id, &s12) * kron(&s2, &id);
        let rhs = kron(&id, &s2) * kron(&s12, &id) * kron(&id, &s1);
        ybe = ybe.max(max_abs(&(lhs - rhs)));
    }
    let max_deviation = unitarity.max(herm).max(ybe);
    Ok(AxiomReport {
        unitarity,
        yang_baxter: ybe,
        hermitian_analyticity: herm,
        crossing_pattern: pattern_ok,
        flip_diagonal: flip_ok,
        max_deviation,
        pass: max_deviation <= tol && pattern_ok && flip_ok,
    })
}

fn crossing_pattern(s: &TwoParticleSMatrix, m: &CMat) -> bool {
    let d = s.dim;
    let conj = |k: usize| s.conjugation[k / d] * d + s.conjugation[k % d];
    (0..d * d).all(|r| (0..d * d).all(|col| (m[(r, col)] != c(0.0, 0.0)) == (m[(conj(r), conj(col))] != c(0.0, 0.0))))
}

fn flip_diagonal(d: usize, m: &CMat) -> bool {
    (0..d * d).all(|r| {
        (0..d * d).all(|col| {
            let flipped = (r % d) * d + r / d;
            col == flipped || m[(r, col)] == c(0.0, 0.0)
        })
    })
}

/// Matrix entries as CSV with complex numbers written `a+bi`.
pub fn to_csv(m: &CMat) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|col| format_complex(m[(r, col)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}i", z.re, sign, z.im.abs())
}
