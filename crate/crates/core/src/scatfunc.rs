//! Two-particle scattering functions `S₂(θ)` and inner functions `φ(z)` of the upper half-plane.
//!
//! A [`ScatteringFunction`] is evaluated either at a rapidity (`Domain::Rapidity`, the
//! strip `0 ≤ Im θ ≤ π`) or at a point of the closed upper half-plane (`Domain::HalfPlane`).

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{c, C64, I};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Rapidity,
    HalfPlane,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ScatteringFunction {
    /// Unimodular constant, usable in either domain.
    Constant {
        value: [f64; 2],
        #[serde(default = "rapidity")]
        domain: Domain,
    },
    /// `Π_k (sinh θ − i sin b_k)/(sinh θ + i sin b_k)`.
    StripBlaschke { b: Vec<f64> },
    /// `Π_k (z − i a_k)/(z + i conj(a_k))` with `Re a_k > 0`.
    HalfPlaneBlaschke { a: Vec<[f64; 2]> },
    /// `z ↦ conj(φ(1/conj z))`.
    ConjugateReciprocal { inner: Box<ScatteringFunction> },
    /// `θ ↦ φ(e^θ)`.
    RapidityForm { inner: Box<ScatteringFunction> },
}

fn rapidity() -> Domain {
    Domain::Rapidity
}

impl ScatteringFunction {
    pub fn one() -> Self {
        Self::constant(c(1.0, 0.0), Domain::Rapidity)
    }

    pub fn minus_one() -> Self {
        Self::constant(c(-1.0, 0.0), Domain::Rapidity)
    }

    pub fn constant(value: C64, domain: Domain) -> Self {
        ScatteringFunction::Constant {
            value: [value.re, value.im],
            domain,
        }
    }

    pub fn strip_blaschke(b: Vec<f64>) -> Result<Self> {
        let s = ScatteringFunction::StripBlaschke { b };
        s.validate_parameters()?;
        Ok(s)
    }

    pub fn half_plane_blaschke(a: Vec<C64>) -> Result<Self> {
        let s = ScatteringFunction::HalfPlaneBlaschke {
            a: a.iter().map(|z| [z.re, z.im]).collect(),
        };
        s.validate_parameters()?;
        Ok(s)
    }

    pub fn domain(&self) -> Domain {
        match self {
            ScatteringFunction::Constant { domain, .. } => *domain,
            ScatteringFunction::StripBlaschke { .. } | ScatteringFunction::RapidityForm { .. } => {
                Domain::Rapidity
            }
            ScatteringFunction::HalfPlaneBlaschke { .. }
            | ScatteringFunction::ConjugateReciprocal { .. } => Domain::HalfPlane,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ScatteringFunction::Constant { .. } => "constant",
            ScatteringFunction::StripBlaschke { .. } => "strip-blaschke",
            ScatteringFunction::HalfPlaneBlaschke { .. } => "half-plane-blaschke",
            ScatteringFunction::ConjugateReciprocal { .. } => "conjugate-reciprocal",
            ScatteringFunction::RapidityForm { .. } => "rapidity-form",
        }
    }

    pub fn validate_parameters(&self) -> Result<()> {
        match self {
            ScatteringFunction::Constant { value, .. } => {
                let m = c(value[0], value[1]).norm();
                if (m - 1.0).abs() > 1e-12 {
                    return Err(LabError::InvalidParameter(format!(
                        "constant scattering function must be unimodular, |c| = {m}"
                    )));
                }
            }
            ScatteringFunction::StripBlaschke { b } => {
                if let Some(x) = b.iter().find(|x| !(**x > 0.0 && **x < std::f64::consts::PI)) {
                    return Err(LabError::InvalidParameter(format!(
                        "strip Blaschke parameter {x} outside (0, π)"
                    )));
                }
            }
            ScatteringFunction::HalfPlaneBlaschke { a } => {
                if let Some(x) = a.iter().find(|x| !(x[0] > 0.0) || !x[1].is_finite()) {
                    return Err(LabError::InvalidParameter(format!(
                        "half-plane Blaschke zero parameter {x:?} needs Re a > 0"
                    )));
                }
            }
            ScatteringFunction::ConjugateReciprocal { inner } => {
                inner.validate_parameters()?;
                if inner.domain() != Domain::HalfPlane {
                    return Err(LabError::InvalidParameter(
                        "conjugate reciprocal needs a half-plane function".into(),
                    ));
                }
            }
            ScatteringFunction::RapidityForm { inner } => {
                inner.validate_parameters()?;
                if inner.domain() != Domain::HalfPlane {
                    return Err(LabError::InvalidParameter(
                        "rapidity form needs a half-plane function".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Evaluates at `z`; non-finite results are reported as singular.
    pub fn eval(&self, z: C64) -> Result<C64> {
        let v = self.eval_raw(z)?;
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(LabError::Singular(format!("{} at {z}", self.family())))
        }
    }

    pub fn eval_real(&self, x: f64) -> Result<C64> {
        self.eval(c(x, 0.0))
    }

    fn eval_raw(&self, z: C64) -> Result<C64> {
        Ok(match self {
            ScatteringFunction::Constant { value, .. } => c(value[0], value[1]),
            ScatteringFunction::StripBlaschke { b } => {
                let s = z.sinh();
                b.iter()
                    .map(|&bk| {
                        let sb = bk.sin();
                        (s - I * sb) / (s + I * sb)
                    })
                    .product()
            }
            ScatteringFunction::HalfPlaneBlaschke { a } => a
                .iter()
                .map(|ak| {
                    let ak = c(ak[0], ak[1]);
                    (z - I * ak) / (z + I * ak.conj())
                })
                .product(),
            ScatteringFunction::ConjugateReciprocal { inner } => {
                if z.norm() < 1e-300 {
                    return Err(LabError::Singular("conjugate reciprocal at z = 0".into()));
                }
                inner.eval(c(1.0, 0.0) / z.conj())?.conj()
            }
            ScatteringFunction::RapidityForm { inner } => inner.eval(z.exp())?,
        })
    }

    /// Supremum estimate over the closed domain.
    pub fn bound(&self) -> f64 {
        match self {
            ScatteringFunction::ConjugateReciprocal { inner }
            | ScatteringFunction::RapidityForm { inner } => inner.bound(),
            _ => 1.0,
        }
    }

    /// Crossing partner `φ(−e^{−θ})` of the rapidity form (only for half-plane functions).
    pub fn crossing_partner(&self, theta: f64) -> Result<C64> {
        let phi = match self {
            ScatteringFunction::RapidityForm { inner } => inner.as_ref(),
            f @ ScatteringFunction::Constant { .. } => f,
            f if f.domain() == Domain::HalfPlane => f,
            _ => {
                return Err(LabError::InvalidParameter(
                    "crossing partner needs a half-plane function".into(),
                ))
            }
        };
        phi.eval_real(-(-theta).exp())
    }

    /// Maximum of `|φ(−x) − conj φ(x)|` over the given real points.
    pub fn symmetry_deviation(&self, xs: &[f64]) -> Result<f64> {
        let mut dev = 0.0_f64;
        for &x in xs {
            dev = dev.max((self.eval_real(-x)? - self.eval_real(x)?.conj()).norm());
        }
        Ok(dev)
    }
}

/// `z ↦ conj(φ(1/conj z))`.
pub fn conjugate_reciprocal(phi: &ScatteringFunction) -> Result<ScatteringFunction> {
    let out = match phi {
        ScatteringFunction::Constant {
            value,
            domain: Domain::HalfPlane,
        } => ScatteringFunction::Constant {
            value: [value[0], -value[1]],
            domain: Domain::HalfPlane,
        },
        _ => ScatteringFunction::ConjugateReciprocal {
            inner: Box::new(phi.clone()),
        },
    };
    out.validate_parameters()?;
    let report = validate_inner(&out, &default_real_samples(), &default_strip_samples(), 1e-10)?;
    if !report.pass {
        return Err(LabError::Representation(format!(
            "conjugate reciprocal is not inner: {report:?}"
        )));
    }
    Ok(out)
}

/// `θ ↦ φ(e^θ)`, checked to be unimodular on real rapidities.
pub fn rapidity_form(phi: &ScatteringFunction, tol: f64) -> Result<ScatteringFunction> {
    let out = match phi {
        ScatteringFunction::Constant { value, .. } => ScatteringFunction::Constant {
            value: *value,
            domain: Domain::Rapidity,
        },
        _ => ScatteringFunction::RapidityForm {
            inner: Box::new(phi.clone()),
        },
    };
    out.validate_parameters()?;
    for theta in default_real_samples() {
        let m = out.eval_real(theta)?.norm();
        if (m - 1.0).abs() > tol {
            return Err(LabError::Representation(format!(
                "|φ(e^θ)| = {m} at θ = {theta}"
            )));
        }
    }
    Ok(out)
}

/// Max deviation per identity of `S(θ)^{-1} = conj S(θ) = S(−θ) = S(θ+iπ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct S2Report {
    pub unitarity: f64,
    pub hermitian_analyticity: f64,
    pub inverse_reflection: f64,
    pub crossing: f64,
    pub max_deviation: f64,
    pub samples: usize,
    pub pass: bool,
}

pub fn validate_s2(s: &ScatteringFunction, samples: &[f64], tol: f64) -> Result<S2Report> {
    if s.domain() != Domain::Rapidity {
        return Err(LabError::InvalidParameter(
            "S₂ validation needs a rapidity-domain function".into(),
        ));
    }
    let (mut u, mut h, mut r, mut x) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for &t in samples {
        let st = s.eval_real(t)?;
        let sm = s.eval_real(-t)?;
        let sc = s.eval(c(t, std::f64::consts::PI))?;
        u = u.max((st * st.conj() - 1.0).norm());
        h = h.max((st.conj() - sm).norm());
        r = r.max((st.inv() - sm).norm());
        x = x.max((sc - sm).norm());
    }
    let max_deviation = u.max(h).max(r).max(x);
    Ok(S2Report {
        unitarity: u,
        hermitian_analyticity: h,
        inverse_reflection: r,
        crossing: x,
        max_deviation,
        samples: samples.len(),
        pass: max_deviation <= tol,
    })
}

/// Boundedness on interior samples and unimodularity on the real boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerReport {
    pub boundary_modulus: f64,
    pub interior_excess: f64,
    pub pass: bool,
}

/// `real` are boundary points; `interior` are points of the open domain.
pub fn validate_inner(
    phi: &ScatteringFunction,
    real: &[f64],
    interior: &[C64],
    tol: f64,
) -> Result<InnerReport> {
    let mut boundary = 0.0_f64;
    for &x in real {
        if phi.domain() == Domain::HalfPlane && x == 0.0 {
            continue;
        }
        boundary = boundary.max((phi.eval_real(x)?.norm() - 1.0).abs());
    }
    let bound = phi.bound();
    let mut excess = 0.0_f64;
    for &z in interior {
        let z = match phi.domain() {
            Domain::Rapidity => z,
            Domain::HalfPlane => z.exp(),
        };
        excess = excess.max(phi.eval(z)?.norm() - bound);
    }
    Ok(InnerReport {
        boundary_modulus: boundary,
        interior_excess: excess,
        pass: boundary <= tol && excess <= tol,
    })
}

fn default_real_samples() -> Vec<f64> {
    (0..=100).map(|k| -10.0 + 0.2 * k as f64).collect()
}

/// Strip points `θ + iy`, `0 < y < π`, used for half-plane functions through `e^θ`.
fn default_strip_samples() -> Vec<C64> {
    let mut out = Vec::new();
    for i in 0..21 {
        for j in 1..10 {
            out.push(c(-5.0 + 0.5 * i as f64, std::f64::consts::PI * j as f64 / 10.0));
        }
    }
    out
}
