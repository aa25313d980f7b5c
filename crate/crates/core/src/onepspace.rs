//! One-particle space on a rapidity grid: the mass shell, smeared test functions,
//! the Poincaré action and the lightlike translation generators.
//!
//! Vectors are stored as point values `psi(theta_i)`. Operators act on the
//! orthonormal coefficients `sqrt(w_i) * psi(theta_i)`, so that adjoints are
//! conjugate transposes.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{c, cis, CMat, CVec, C64};
use crate::quadrature::composite_gauss_legendre;

/// Uniform rapidity grid with trapezoidal weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RapidityGrid {
    theta: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
    spacing: f64,
}

impl RapidityGrid {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// On-shell momentum `(m cosh θ, m sinh θ)` at grid point `i`.
    pub fn momentum(&self, i: usize) -> (f64, f64) {
        let t = self.theta[i];
        (self.mass * t.cosh(), self.mass * t.sinh())
    }

    /// Lightlike momentum `p_+ = p_0 + p_1 = m e^θ`.
    pub fn lightray_momentum(&self, i: usize) -> f64 {
        self.mass * self.theta[i].exp()
    }

    /// Quadrature inner product, antilinear in the first argument.
    pub fn inner(&self, a: &OneParticleVector, b: &OneParticleVector) -> C64 {
        a.values
            .iter()
            .zip(&b.values)
            .zip(&self.weights)
            .map(|((x, y), w)| x.conj() * y * *w)
            .sum()
    }

    pub fn norm(&self, a: &OneParticleVector) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }
}

/// Builds the uniform grid on `[-half_width, half_width]`.
pub fn make_grid(half_width: f64, n_points: usize, mass: f64) -> Result<RapidityGrid> {
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "rapidity half width must be positive, got {half_width}"
        )));
    }
    if n_points < 2 {
        return Err(LabError::InvalidParameter(format!(
            "grid needs at least two points, got {n_points}"
        )));
    }
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(LabError::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    let h = 2.0 * half_width / (n_points - 1) as f64;
    let theta: Vec<f64> = (0..n_points).map(|i| -half_width + i as f64 * h).collect();
    let mut weights = vec![h; n_points];
    weights[0] *= 0.5;
    weights[n_points - 1] *= 0.5;
    Ok(RapidityGrid {
        theta,
        weights,
        mass,
        spacing: h,
    })
}

/// A one-particle wave function sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OneParticleVector {
    pub values: Vec<C64>,
}

impl OneParticleVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![c(0.0, 0.0); n],
        }
    }

    pub fn from_fn(grid: &RapidityGrid, f: impl Fn(f64) -> C64) -> Self {
        Self {
            values: grid.theta().iter().map(|&t| f(t)).collect(),
        }
    }

    /// The vector whose orthonormal coefficient is 1 at grid point `i`.
    pub fn localized(grid: &RapidityGrid, i: usize) -> Self {
        let mut v = Self::zeros(grid.len());
        v.values[i] = c(1.0 / grid.weights()[i].sqrt(), 0.0);
        v
    }

    pub fn from_coefficients(grid: &RapidityGrid, coef: &CVec) -> Self {
        Self {
            values: coef
                .iter()
                .zip(grid.weights())
                .map(|(z, w)| z / w.sqrt())
                .collect(),
        }
    }

    pub fn coefficients(&self, grid: &RapidityGrid) -> CVec {
        CVec::from_iterator(
            self.values.len(),
            self.values.iter().zip(grid.weights()).map(|(z, w)| z * w.sqrt()),
        )
    }

    /// Pointwise complex conjugation (the one-particle conjugation `J_1`).
    pub fn conj(&self) -> Self {
        Self {
            values: self.values.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Axis-aligned box `[t_min, t_max] x [x_min, x_max]` in Minkowski coordinates `(a_0, a_1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub t_min: f64,
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl SupportBox {
    pub fn contains(&self, a0: f64, a1: f64) -> bool {
        a0 >= self.t_min && a0 <= self.t_max && a1 >= self.x_min && a1 <= self.x_max
    }

    fn max_abs_t(&self) -> f64 {
        self.t_min.abs().max(self.t_max.abs())
    }

    /// Every point satisfies `a_1 - |a_0| > margin`.
    pub fn in_right_wedge(&self, margin: f64) -> bool {
        self.x_min - self.max_abs_t() > margin
    }

    /// Every point satisfies `-a_1 - |a_0| > margin`.
    pub fn in_left_wedge(&self, margin: f64) -> bool {
        -self.x_max - self.max_abs_t() > margin
    }

    /// Every difference vector between the two boxes is spacelike with the given margin.
    pub fn spacelike_to(&self, other: &SupportBox, margin: f64) -> bool {
        let diff = SupportBox {
            t_min: self.t_min - other.t_max,
            t_max: self.t_max - other.t_min,
            x_min: self.x_min - other.x_max,
            x_max: self.x_max - other.x_min,
        };
        diff.in_right_wedge(margin) || diff.in_left_wedge(margin)
    }
}

/// Test-function families that can be named from a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TestFunction {
    Zero,
    /// `amp * exp(-|a - center|^2 / (2 sigma^2))`, cut to zero outside `center ± cutoff * sigma`.
    Gaussian {
        center: [f64; 2],
        sigma: f64,
        #[serde(default = "default_amplitude")]
        amplitude: [f64; 2],
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    /// Smooth compactly supported bump `amp * exp(-1 / (1 - r^2 / R^2))`, Euclidean `r`.
    Bump {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "default_amplitude")]
        amplitude: [f64; 2],
    },
}

fn default_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

fn default_cutoff() -> f64 {
    8.0
}

impl TestFunction {
    pub fn gaussian(center: [f64; 2], sigma: f64) -> Self {
        TestFunction::Gaussian {
            center,
            sigma,
            amplitude: default_amplitude(),
            cutoff: default_cutoff(),
        }
    }

    pub fn bump(center: [f64; 2], radius: f64) -> Self {
        TestFunction::Bump {
            center,
            radius,
            amplitude: default_amplitude(),
        }
    }

    pub fn eval(&self, a0: f64, a1: f64) -> C64 {
        match *self {
            TestFunction::Zero => c(0.0, 0.0),
            TestFunction::Gaussian {
                center,
                sigma,
                amplitude,
                ..
            } => {
                if !self.support().contains(a0, a1) {
                    return c(0.0, 0.0);
                }
                let r2 = (a0 - center[0]).powi(2) + (a1 - center[1]).powi(2);
                c(amplitude[0], amplitude[1]) * (-r2 / (2.0 * sigma * sigma)).exp()
            }
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => {
                let r2 = ((a0 - center[0]).powi(2) + (a1 - center[1]).powi(2)) / (radius * radius);
                if r2 >= 1.0 {
                    c(0.0, 0.0)
                } else {
                    c(amplitude[0], amplitude[1]) * (-1.0 / (1.0 - r2)).exp()
                }
            }
        }
    }

    pub fn support(&self) -> SupportBox {
        let (center, half) = match *self {
            TestFunction::Zero => ([0.0, 0.0], 0.0),
            TestFunction::Gaussian {
                center,
                sigma,
                cutoff,
                ..
            } => (center, cutoff * sigma),
            TestFunction::Bump { center, radius, .. } => (center, radius),
        };
        SupportBox {
            t_min: center[0] - half,
            t_max: center[0] + half,
            x_min: center[1] - half,
            x_max: center[1] + half,
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            TestFunction::Zero => true,
            TestFunction::Gaussian { amplitude, .. } | TestFunction::Bump { amplitude, .. } => {
                amplitude[1] == 0.0
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TestFunction::Zero => Ok(()),
            TestFunction::Gaussian { sigma, cutoff, .. } if sigma > 0.0 && cutoff > 0.0 => Ok(()),
            TestFunction::Bump { radius, .. } if radius > 0.0 => Ok(()),
            _ => Err(LabError::InvalidParameter(format!(
                "test function parameters must be positive: {self:?}"
            ))),
        }
    }
}

/// Options for the two-dimensional quadrature behind [`pm_transform`].
#[derive(Clone, Copy, Debug)]
pub struct TransformOptions {
    pub order: usize,
    pub tolerance: f64,
    /// Quadrature panels per unit length per unit momentum, before doubling for the error estimate.
    pub panels_per_wavelength: f64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            order: 10,
            tolerance: 1e-10,
            panels_per_wavelength: 1.0,
        }
    }
}

/// `f^±(θ) = (1/2π) ∫ d²a f(a) e^{± i p(θ)·a}` with `p·a = p_0 a_0 - p_1 a_1`.
pub fn pm_transform(
    f: &TestFunction,
    grid: &RapidityGrid,
) -> Result<(OneParticleVector, OneParticleVector)> {
    pm_transform_with(f, grid, TransformOptions::default())
}

pub fn pm_transform_with(
    f: &TestFunction,
    grid: &RapidityGrid,
    opts: TransformOptions,
) -> Result<(OneParticleVector, OneParticleVector)> {
    f.validate()?;
    let n = grid.len();
    if matches!(f, TestFunction::Zero) {
        return Ok((OneParticleVector::zeros(n), OneParticleVector::zeros(n)));
    }
    let bx = f.support();
    let width = (bx.t_max - bx.t_min).max(bx.x_max - bx.x_min);
    let kmax = grid
        .theta()
        .iter()
        .map(|t| grid.mass() * t.abs().exp())
        .fold(0.0, f64::max);
    // Panels resolving roughly one oscillation each, and at least enough for the envelope.
    let base = ((width * kmax * opts.panels_per_wavelength) / (2.0 * std::f64::consts::PI))
        .ceil()
        .max(8.0) as usize;
    let coarse = transform_on_panels(f, grid, &bx, base, opts.order);
    let fine = transform_on_panels(f, grid, &bx, 2 * base, opts.order);
    let scale = fine
        .0
        .iter()
        .chain(fine.1.iter())
        .fold(0.0_f64, |a, z| a.max(z.norm()))
        .max(1e-300);
    let estimate = coarse
        .0
        .iter()
        .zip(&fine.0)
        .chain(coarse.1.iter().zip(&fine.1))
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if estimate > opts.tolerance * scale.max(1.0) {
        return Err(LabError::QuadratureFailure {
            estimate,
            tolerance: opts.tolerance,
        });
    }
    Ok((
        OneParticleVector { values: fine.0 },
        OneParticleVector { values: fine.1 },
    ))
}

fn transform_on_panels(
    f: &TestFunction,
    grid: &RapidityGrid,
    bx: &SupportBox,
    panels: usize,
    order: usize,
) -> (Vec<C64>, Vec<C64>) {
    let (t_nodes, t_w) = composite_gauss_legendre(bx.t_min, bx.t_max, panels, order);
    let (x_nodes, x_w) = composite_gauss_legendre(bx.x_min, bx.x_max, panels, order);
    // Weighted samples G_ij = w_i w_j f(t_i, x_j); the phase factorizes over the two axes.
    let g = CMat::from_fn(t_nodes.len(), x_nodes.len(), |i, j| {
        f.eval(t_nodes[i], x_nodes[j]) * (t_w[i] * x_w[j])
    });
    let norm = 1.0 / (2.0 * std::f64::consts::PI);
    let mut plus = Vec::with_capacity(grid.len());
    let mut minus = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (p0, p1) = grid.momentum(k);
        let u = CVec::from_iterator(t_nodes.len(), t_nodes.iter().map(|&t| cis(p0 * t)));
        let v = CVec::from_iterator(x_nodes.len(), x_nodes.iter().map(|&x| cis(-p1 * x)));
        let gv = &g * &v;
        let gvc = &g * v.map(|z| z.conj());
        plus.push(u.dot(&gv) * norm);
        minus.push(u.dotc(&gvc) * norm);
    }
    (plus, minus)
}

/// Operator on the one-particle space, in the orthonormal coefficient basis.
#[derive(Clone, Debug, PartialEq)]
pub struct OneParticleOperator {
    pub matrix: CMat,
}

impl OneParticleOperator {
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: CMat::identity(n, n),
        }
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        Self {
            matrix: crate::linalg::diag(entries),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Diagonal entries if the operator is diagonal to machine precision.
    pub fn as_diagonal(&self) -> Option<Vec<C64>> {
        let n = self.dim();
        for j in 0..n {
            for i in 0..n {
                if i != j && self.matrix[(i, j)] != c(0.0, 0.0) {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.matrix[(i, i)]).collect())
    }

    pub fn apply(&self, grid: &RapidityGrid, psi: &OneParticleVector) -> OneParticleVector {
        OneParticleVector::from_coefficients(grid, &(&self.matrix * psi.coefficients(grid)))
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// Functional calculus of a diagonal operator with positive spectrum.
    pub fn map_diagonal(&self, f: impl Fn(f64) -> C64) -> Option<Self> {
        let d = self.as_diagonal()?;
        Some(Self::diagonal(&d.iter().map(|z| f(z.re)).collect::<Vec<_>>()))
    }
}

/// `U_1(a, λ) ψ(θ) = e^{i p(θ)·a} ψ(θ - λ)` restricted to the grid.
#[derive(Clone, Debug)]
pub struct PoincareAction {
    pub operator: OneParticleOperator,
    pub shift: isize,
}

impl PoincareAction {
    /// Applies the action and reports whether nonzero components were pushed off the grid.
    pub fn apply_flagged(
        &self,
        grid: &RapidityGrid,
        psi: &OneParticleVector,
    ) -> (OneParticleVector, bool) {
        let n = grid.len() as isize;
        let lost = psi.values.iter().enumerate().any(|(i, z)| {
            let j = i as isize + self.shift;
            *z != c(0.0, 0.0) && (j < 0 || j >= n)
        });
        (self.operator.apply(grid, psi), lost)
    }
}

pub fn poincare_u1(a: [f64; 2], lambda: f64, grid: &RapidityGrid) -> Result<PoincareAction> {
    let h = grid.spacing();
    let steps = lambda / h;
    let shift = steps.round();
    if (steps - shift).abs() > 1e-9 {
        return Err(LabError::NonGridBoost { lambda, spacing: h });
    }
    let shift = shift as isize;
    let n = grid.len();
    let w = grid.weights();
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        let src = i as isize - shift;
        if src < 0 || src >= n as isize {
            continue;
        }
        let src = src as usize;
        let (p0, p1) = grid.momentum(i);
        let phase = cis(p0 * a[0] - p1 * a[1]);
        m[(i, src)] = phase * (w[i] / w[src]).sqrt();
    }
    Ok(PoincareAction {
        operator: OneParticleOperator { matrix: m },
        shift,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LightraySign {
    Plus,
    Minus,
}

/// Diagonal generator with entries `m e^{θ}` (plus) or `m e^{-θ}` (minus).
pub fn lightray_generator(grid: &RapidityGrid, sign: LightraySign) -> OneParticleOperator {
    let s = match sign {
        LightraySign::Plus => 1.0,
        LightraySign::Minus => -1.0,
    };
    let entries: Vec<C64> = grid
        .theta()
        .iter()
        .map(|t| c(grid.mass() * (s * t).exp(), 0.0))
        .collect();
    OneParticleOperator::diagonal(&entries)
}
