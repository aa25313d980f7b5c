//! End-to-end checks: ZF exchange relations, wedge commutativity, spectrum condition and
//! cyclicity at truncation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fock::{create, field_from_transforms, FockOperator, FockSpace};
use crate::linalg::{c, cis, max_abs, max_abs_diff, random_matrix, vectorize, CMat, CVec, OrthoBasis, C64};
use crate::onepspace::{make_grid, pm_transform, OneParticleVector, TestFunction};
use crate::scatfunc::{conjugate_reciprocal, Domain, ScatteringFunction};
use crate::smatrix::federbush_smatrix;
use crate::sparse::CsrMatrix;
use crate::twist::{build_r_tilde, fock_grading, tensor, twist_unitary, ChargeGrading, Group, TensorDiagonal};

const TAU: f64 = std::f64::consts::TAU;

/// `(ρ, residual)` with `ρ = ⟨b, a⟩ / ⟨b, b⟩` and residual `max |a − ρ b|`; `ρ` is `None` when
/// `b` vanishes.
fn relative_phase(a: &CMat, b: &CMat) -> (Option<C64>, f64) {
    let bb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    if bb == 0.0 {
        return (None, max_abs(a));
    }
    let ba: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let rho = ba / bb;
    (Some(rho), max_abs_diff(a, b, rho))
}

/// Random state with support in the leading `rows × cols` block of a `dim_a × dim_b` array.
fn random_state<R: Rng>(dim_a: usize, dim_b: usize, rows: usize, cols: usize, rng: &mut R) -> CMat {
    let mut x = CMat::zeros(dim_a, dim_b);
    x.view_mut((0, 0), (rows, cols)).copy_from(&random_matrix(rows, cols, rng));
    let n = x.norm();
    x / c(n, 0.0)
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZfEntry {
    pub relation: String,
    pub expected: [f64; 2],
    /// Absent when both sides vanish on the test state.
    pub extracted: Option<[f64; 2]>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZfReport {
    pub entries: Vec<ZfEntry>,
    /// Largest `|ρ(a,b) − S[(b,a),(a,b)]|` over the 16 creator pairs.
    pub smatrix_deviation: f64,
    /// Spread of the mixed creator phases over grid-localized wave functions.
    pub theta_spread: f64,
    pub max_residual: f64,
    pub max_phase_deviation: f64,
    pub pass: bool,
}

/// Operators of one factor: `(label, grade, operator)`.
type Graded = (String, i64, FockOperator);

/// Federbush ZF algebra on `H ⊗ H` for a two-species factor (species 0 has charge +1, species 1
/// charge −1), twisted by `Ṽ_κ = e^{i2πκ Q⊗Q}`.
///
/// For `x` of grade `l` in the first factor and `y` of grade `m` in the second,
/// `(x ⊗ 1) AdṼ(1 ⊗ y) = e^{−i2πκ l m} AdṼ(1 ⊗ y) (x ⊗ 1)`. Relations are tested on random
/// states in sectors `≤ n_max − 2`.
pub fn zf_relations_federbush<R: Rng>(
    space: &FockSpace,
    kappa: f64,
    psi1: &OneParticleVector,
    psi2: &OneParticleVector,
    tol: f64,
    rng: &mut R,
) -> Result<ZfReport> {
    if space.n_species() != 2 {
        return Err(LabError::InvalidParameter("the Federbush factor needs two species".into()));
    }
    if space.n_max() < 2 {
        return Err(LabError::InvalidParameter("n_max must be at least 2".into()));
    }
    let charges = [1_i64, -1];
    let grading = fock_grading(space, &charges)?;
    // Twist blocks are built from leading label ranges only; the full array is never needed.
    let block = |ra: usize, rb: usize| -> Result<TensorDiagonal> {
        let part = |k: usize| ChargeGrading::new(grading.labels[..k].to_vec(), grading.group);
        Ok(twist_unitary(&part(ra)?, &part(rb)?, kappa))
    };
    let n_max = space.n_max();
    let d_low = space.dim_up_to(n_max - 2);
    let d_mid = space.dim_up_to(n_max - 1);
    let mut entries = Vec::new();

    let ops = |psi: &OneParticleVector| -> Result<Vec<Graded>> {
        let mut v = Vec::new();
        for (s, &q) in charges.iter().enumerate() {
            let sign = if q > 0 { "+" } else { "-" };
            let cr = create(space, psi, s)?;
            v.push((format!("a†{sign}"), q, cr.clone()));
            v.push((format!("a{sign}"), -q, cr.adjoint()));
        }
        Ok(v)
    };
    let first = ops(psi1)?;
    let second = ops(psi2)?;

    // Mixed relations: one operator in each factor.
    // The state lives in sectors ≤ n_max − 2 of both factors, so one step up or down only needs
    // the rectangular blocks from those sectors into sectors ≤ n_max − 1.
    let t_mid = block(d_mid, d_mid)?;
    let x0 = random_state(d_low, d_low, d_low, d_low, rng);
    let rect = |m: &CsrMatrix| m.truncate(d_mid, d_low);
    let mixed = |x: &CsrMatrix, y: &CsrMatrix| -> (CMat, CMat) {
        let (xr, yr) = (rect(x), rect(y));
        (
            tensor::left(&xr, &tensor::twisted_right(&t_mid, &yr, &x0)),
            tensor::twisted_right(&t_mid, &yr, &tensor::left(&xr, &x0)),
        )
    };
    for (lx, gx, x) in &first {
        for (ly, gy, y) in &second {
            let (a, b) = mixed(&x.matrix, &y.matrix);
            let expected = cis(-TAU * kappa * (gx * gy) as f64);
            let (rho, _) = relative_phase(&a, &b);
            entries.push(ZfEntry {
                relation: format!("{lx}⊗1 · AdṼ(1⊗{ly})"),
                expected: pair(expected),
                extracted: rho.map(pair),
                residual: max_abs_diff(&a, &b, expected),
            });
        }
    }

    // Canonical commutation relations inside one factor.
    let full = space.dim();
    let d1 = space.dim_up_to(1);
    let xf = random_state(full, d1, d_low, d1, rng);
    for s in 0..2 {
        for t in 0..2 {
            let a = &first[2 * s + 1].2.matrix;
            let ad = &second[2 * t].2.matrix;
            let comm = tensor::left(a, &tensor::left(ad, &xf)) - tensor::left(ad, &tensor::left(a, &xf));
            let expected = if s == t {
                space.grid().inner(psi1, psi2)
            } else {
                c(0.0, 0.0)
            };
            let (rho, _) = relative_phase(&comm, &xf);
            entries.push(ZfEntry {
                relation: format!("[{}, {}]", first[2 * s + 1].0, second[2 * t].0),
                expected: pair(expected),
                extracted: rho.map(pair),
                residual: max_abs_diff(&comm, &xf, expected),
            });
        }
    }

    // Creator exchange phases for all pairs of (factor, species), against the S-matrix.
    let creators = |psi: &OneParticleVector| -> Result<Vec<CsrMatrix>> {
        (0..2).map(|s| Ok(create(space, psi, s)?.matrix)).collect()
    };
    let c1 = creators(psi1)?;
    let c2 = creators(psi2)?;
    let s_mat = federbush_smatrix(kappa).eval(0.0)?;
    let mut smatrix_deviation = 0.0_f64;
    let t_row = block(d1, full)?;
    let x_left = xf.clone();
    let x_right = random_state(d1, full, d1, d_low, rng);
    for a in 0..4 {
        for b in 0..4 {
            let (fa, sa) = (a / 2, a % 2);
            let (fb, sb) = (b / 2, b % 2);
            let (lhs, rhs) = match (fa, fb) {
                (0, 0) => (
                    tensor::left(&c1[sa], &tensor::left(&c2[sb], &x_left)),
                    tensor::left(&c2[sb], &tensor::left(&c1[sa], &x_left)),
                ),
                (1, 1) => (
                    tensor::twisted_right(&t_row, &c1[sa], &tensor::twisted_right(&t_row, &c2[sb], &x_right)),
                    tensor::twisted_right(&t_row, &c2[sb], &tensor::twisted_right(&t_row, &c1[sa], &x_right)),
                ),
                _ => {
                    let (p, q, first_left) = if fa == 0 { (sa, sb, true) } else { (sb, sa, false) };
                    let (xy, yx) = mixed(&c1[p], &c2[q]);
                    if first_left {
                        (xy, yx)
                    } else {
                        (yx, xy)
                    }
                }
            };
            let (rho, res) = relative_phase(&lhs, &rhs);
            let expected = s_mat[(b * 4 + a, a * 4 + b)];
            smatrix_deviation = smatrix_deviation.max(rho.map_or(f64::INFINITY, |r| (r - expected).norm()));
            entries.push(ZfEntry {
                relation: format!("Z{a} Z{b} = ρ Z{b} Z{a}"),
                expected: pair(expected),
                extracted: rho.map(pair),
                residual: res,
            });
        }
    }

    // θ-independence: mixed creator phases for grid-localized wave functions.
    let grid = space.grid();
    let n = grid.len();
    let picks = [(0, n - 1), (n / 2, n / 3), (n - 1, 0)];
    let mut theta_spread = 0.0_f64;
    for s in 0..2 {
        for t in 0..2 {
            let mut phases = Vec::new();
            for &(i, j) in &picks {
                let xm = create(space, &OneParticleVector::localized(grid, i), s)?.matrix;
                let ym = create(space, &OneParticleVector::localized(grid, j), t)?.matrix;
                let (xy, yx) = mixed(&xm, &ym);
                phases.push(relative_phase(&xy, &yx).0.unwrap_or(c(f64::INFINITY, 0.0)));
            }
            for p in &phases {
                theta_spread = theta_spread.max((p - phases[0]).norm());
            }
        }
    }

    let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    let max_phase_deviation = entries
        .iter()
        .filter_map(|e| e.extracted.map(|x| (c(x[0], x[1]) - c(e.expected[0], e.expected[1])).norm()))
        .fold(0.0, f64::max);
    Ok(ZfReport {
        entries,
        smatrix_deviation,
        theta_spread,
        max_residual,
        max_phase_deviation,
        pass: max_residual <= tol && max_phase_deviation <= tol && smatrix_deviation <= tol && theta_spread <= tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LwZfReport {
    pub pairs: usize,
    /// Largest `|ρ(θ, θ') − φ(e^{θ−θ'})|`.
    pub pointwise_deviation: f64,
    /// Largest `|Z₁Z₂X − φ(e^{θ−θ'}) Z₂Z₁X|`.
    pub pointwise_residual: f64,
    /// Smeared relation against its quadrature sum, relative to the smeared product.
    pub smeared_deviation: f64,
    pub pass: bool,
}

/// `a†(θ) ⊗ 1 · AdR̃(1 ⊗ a†(θ')) = φ(e^{θ−θ'}) AdR̃(1 ⊗ a†(θ')) · a†(θ) ⊗ 1` per grid pair.
///
/// With the R̃ diagonal `Π φ(p'_k/p_j)` the exchange factor comes out as `conj φ(e^{θ'−θ})`,
/// so R̃ is built from `z ↦ conj φ(1/conj z)`.
pub fn zf_relation_longo_witten<R: Rng>(
    space: &FockSpace,
    phi: &ScatteringFunction,
    smear: Option<(&OneParticleVector, &OneParticleVector)>,
    tol: f64,
    rng: &mut R,
) -> Result<LwZfReport> {
    if space.n_species() != 1 {
        return Err(LabError::InvalidParameter("the Longo-Witten check uses one species".into()));
    }
    let half_plane = match phi {
        ScatteringFunction::RapidityForm { inner } => inner.as_ref().clone(),
        ScatteringFunction::Constant { value, .. } => ScatteringFunction::Constant {
            value: *value,
            domain: Domain::HalfPlane,
        },
        f if f.domain() == Domain::HalfPlane => f.clone(),
        _ => {
            return Err(LabError::InvalidParameter(
                "φ must be a function of the upper half-plane".into(),
            ))
        }
    };
    let r = build_r_tilde(&conjugate_reciprocal(&half_plane)?, space, space)?;
    let grid = space.grid();
    let d = space.dim();
    let low = space.dim_up_to(space.n_max() - 1);
    let x = random_state(d, d, low, low, rng);
    let creators: Vec<CsrMatrix> = (0..grid.len())
        .map(|i| Ok(create(space, &OneParticleVector::localized(grid, i), 0)?.matrix))
        .collect::<Result<_>>()?;
    let theta = grid.theta();
    let mut dev = 0.0_f64;
    let mut res = 0.0_f64;
    let mut swapped = Vec::with_capacity(grid.len() * grid.len());
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let a = tensor::left(&creators[i], &tensor::twisted_right(&r, &creators[j], &x));
            let b = tensor::twisted_right(&r, &creators[j], &tensor::left(&creators[i], &x));
            let expected = half_plane.eval_real((theta[i] - theta[j]).exp())?;
            let (rho, _) = relative_phase(&a, &b);
            dev = dev.max(rho.map_or(f64::INFINITY, |r| (r - expected).norm()));
            res = res.max(max_abs_diff(&a, &b, expected));
            swapped.push((i, j, b, expected));
        }
    }
    let mut smeared_deviation = 0.0;
    if let Some((f, g)) = smear {
        let fc = f.coefficients(grid);
        let gc = g.coefficients(grid);
        let xf = create(space, f, 0)?.matrix;
        let yg = create(space, g, 0)?.matrix;
        let lhs = tensor::left(&xf, &tensor::twisted_right(&r, &yg, &x));
        let mut rhs = CMat::zeros(d, d);
        for (i, j, b, e) in &swapped {
            rhs += b * (fc[*i] * gc[*j] * e);
        }
        smeared_deviation = max_abs(&(&lhs - rhs)) / max_abs(&lhs).max(1e-300);
    }
    Ok(LwZfReport {
        pairs: swapped.len(),
        pointwise_deviation: dev,
        pointwise_residual: res,
        smeared_deviation,
        pass: dev <= tol && res <= tol && smeared_deviation <= tol,
    })
}

/// Twist placed between the two tensor factors in the locality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Twist {
    Identity,
    /// `e^{iπ N⊗N}` for the `ℤ₂` grading by particle-number parity.
    Parity,
    /// The Longo-Witten operator built from a function of the upper half-plane.
    RTilde { phi: ScatteringFunction },
}

impl Twist {
    pub fn name(&self) -> &'static str {
        match self {
            Twist::Identity => "identity",
            Twist::Parity => "parity",
            Twist::RTilde { .. } => "r-tilde",
        }
    }

    fn operator(&self, a: &FockSpace, b: &FockSpace) -> Result<TensorDiagonal> {
        match self {
            Twist::Identity => Ok(TensorDiagonal {
                values: CMat::from_element(a.dim(), b.dim(), c(1.0, 0.0)),
            }),
            Twist::Parity => {
                let parity = |s: &FockSpace| -> Result<ChargeGrading> {
                    let n = fock_grading(s, &[1])?;
                    ChargeGrading::new(n.labels.iter().map(|l| l.rem_euclid(2)).collect(), Group::Cyclic(2))
                };
                Ok(twist_unitary(&parity(a)?, &parity(b)?, 0.5))
            }
            Twist::RTilde { phi } => build_r_tilde(phi, a, b),
        }
    }

    /// One-particle multiplier `V_i` seen by the first factor for a given second-factor
    /// configuration of grid points.
    fn multiplier(&self, grid: &crate::onepspace::RapidityGrid, config: &[usize]) -> Result<Vec<C64>> {
        let n = grid.len();
        match self {
            Twist::Identity => Ok(vec![c(1.0, 0.0); n]),
            Twist::Parity => Ok(vec![c(if config.len() % 2 == 0 { 1.0 } else { -1.0 }, 0.0); n]),
            Twist::RTilde { phi } => (0..n)
                .map(|i| {
                    config.iter().try_fold(c(1.0, 0.0), |acc, &k| {
                        Ok(acc * phi.eval_real(grid.lightray_momentum(k) / grid.lightray_momentum(i))?)
                    })
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalityConfig {
    pub f: TestFunction,
    pub g: TestFunction,
    pub twist: Twist,
    pub grids: Vec<usize>,
    pub half_width: f64,
    pub mass: f64,
    pub n_max: usize,
    pub margin: f64,
    pub tol: f64,
    #[serde(default = "yes")]
    pub require_spacelike: bool,
    /// Grid whose relative norm is compared with `tol`; the finest grid when absent.
    #[serde(default)]
    pub threshold_grid: Option<usize>,
    /// Required factor between consecutive relative norms; 1 asks for a strict decrease.
    #[serde(default = "one")]
    pub min_ratio: f64,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementPoint {
    pub grid: usize,
    pub spacing: f64,
    /// `max_b |s_b|` from operator arithmetic, `s_b` the scalar on second-factor basis state `b`.
    pub commutator_norm: f64,
    /// `commutator_norm / (‖f‖ ‖g‖)` with `‖f‖² = ‖f⁺‖² + ‖f⁻‖²`.
    pub relative_norm: f64,
    /// Same quantity from the contraction formula `Σ w (f⁻ V g⁺ − conj(V) g⁻ f⁺)`.
    pub formula_norm: f64,
    /// Largest `|s_b − formula_b|`.
    pub oracle_deviation: f64,
    /// Largest relative non-scalar part of the commutator on the tested states.
    pub scalar_residual: f64,
    /// Vacuum scalar `⟨J f⁻, g⁺⟩ − ⟨J g⁻, f⁺⟩` as `[re, im]`.
    pub vacuum_scalar: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalityReport {
    pub twist: String,
    pub tol: f64,
    pub spacelike: bool,
    pub threshold_grid: usize,
    pub threshold_norm: f64,
    pub min_ratio: f64,
    /// In increasing grid order.
    pub series: Vec<RefinementPoint>,
    pub monotone: bool,
    pub max_oracle_deviation: f64,
    pub pass: bool,
}

impl LocalityReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "grid,spacing,commutator_norm,relative_norm,formula_norm,oracle_deviation,scalar_residual,vacuum_re,vacuum_im\n",
        );
        for p in &self.series {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                p.grid,
                p.spacing,
                p.commutator_norm,
                p.relative_norm,
                p.formula_norm,
                p.oracle_deviation,
                p.scalar_residual,
                p.vacuum_scalar[0],
                p.vacuum_scalar[1]
            ));
        }
        s
    }
}

/// `[φ(f) ⊗ 1, Ad T (φ(g) ⊗ 1)]` on `H ⊗ H` over a series of grids.
///
/// On first-factor sectors `≤ n_max − 1` the commutator is a scalar `s_b` on each second-factor
/// basis state `b`; it is measured by operator arithmetic and compared with the contraction
/// formula for the one-particle multiplier that `T` induces.
pub fn wedge_commutativity<R: Rng>(cfg: &LocalityConfig, rng: &mut R) -> Result<LocalityReport> {
    let (fs, gs) = (cfg.f.support(), cfg.g.support());
    let spacelike = fs.in_right_wedge(cfg.margin) && gs.in_left_wedge(cfg.margin) && fs.spacelike_to(&gs, cfg.margin);
    if cfg.require_spacelike && !spacelike {
        return Err(LabError::NotSpacelike(format!(
            "supports {fs:?} and {gs:?} are not in opposite wedges with margin {}",
            cfg.margin
        )));
    }
    if cfg.n_max < 1 {
        return Err(LabError::InvalidParameter("n_max must be at least 1".into()));
    }
    let mut grids = cfg.grids.clone();
    grids.sort_unstable();
    grids.dedup();
    let threshold_grid = match cfg.threshold_grid {
        Some(n) if grids.contains(&n) => n,
        Some(n) => return Err(LabError::InvalidParameter(format!("threshold grid {n} is not in the series"))),
        None => *grids.last().ok_or_else(|| LabError::InvalidParameter("empty grid series".into()))?,
    };
    let mut series = Vec::new();
    for &n in &grids {
        series.push(refinement_point(cfg, n, rng)?);
    }
    let monotone = series.windows(2).all(|w| {
        w[1].relative_norm < w[0].relative_norm && w[0].relative_norm >= cfg.min_ratio * w[1].relative_norm
    });
    let max_oracle_deviation = series.iter().map(|p| p.oracle_deviation).fold(0.0, f64::max);
    let max_scalar = series.iter().map(|p| p.scalar_residual).fold(0.0, f64::max);
    let threshold_norm = series
        .iter()
        .find(|p| p.grid == threshold_grid)
        .map_or(f64::INFINITY, |p| p.relative_norm);
    Ok(LocalityReport {
        twist: cfg.twist.name().into(),
        tol: cfg.tol,
        spacelike,
        threshold_grid,
        threshold_norm,
        min_ratio: cfg.min_ratio,
        monotone,
        max_oracle_deviation,
        pass: monotone && threshold_norm <= cfg.tol && max_oracle_deviation <= 1e-10 && max_scalar <= 1e-10,
        series,
    })
}

fn refinement_point<R: Rng>(cfg: &LocalityConfig, n: usize, rng: &mut R) -> Result<RefinementPoint> {
    let grid = make_grid(cfg.half_width, n, cfg.mass)?;
    let (fp, fm) = pm_transform(&cfg.f, &grid)?;
    let (gp, gm) = pm_transform(&cfg.g, &grid)?;
    let space = FockSpace::bosonic(grid.clone(), 1, cfg.n_max)?;
    let x = field_from_transforms(&space, &fp, &fm, 0)?.matrix;
    let xp = field_from_transforms(&space, &gp, &gm, 0)?.matrix;
    let t = cfg.twist.operator(&space, &space)?;
    let d = space.dim();
    let low = space.dim_up_to(cfg.n_max - 1);
    let state = random_state(d, d, low, d, rng);
    let tx = |s: &CMat| tensor::twisted_left(&t, &xp, s);
    let comm = tensor::left(&x, &tx(&state)) - tx(&tensor::left(&x, &state));

    let norm = |p: &OneParticleVector, m: &OneParticleVector| (grid.norm(p).powi(2) + grid.norm(m).powi(2)).sqrt();
    let scale = norm(&fp, &fm) * norm(&gp, &gm);
    let w = grid.weights();
    let contraction = |v: &[C64]| -> C64 {
        (0..grid.len())
            .map(|i| w[i] * (fm.values[i] * v[i] * gp.values[i] - v[i].conj() * gm.values[i] * fp.values[i]))
            .sum()
    };

    let mut commutator_norm = 0.0_f64;
    let mut formula_norm = 0.0_f64;
    let mut oracle_deviation = 0.0_f64;
    let mut scalar_residual = 0.0_f64;
    for b in 0..d {
        let col = state.column(b);
        let cc = comm.column(b);
        let nn = col.norm_squared();
        let s = col.dotc(&cc) / nn;
        scalar_residual = scalar_residual.max((cc - col * s).norm() / nn.sqrt() / scale.max(1e-300));
        let config: Vec<usize> = space.basis_label(b).1.iter().map(|&m| space.mode_point(m)).collect();
        let formula = contraction(&cfg.twist.multiplier(&grid, &config)?);
        commutator_norm = commutator_norm.max(s.norm());
        formula_norm = formula_norm.max(formula.norm());
        oracle_deviation = oracle_deviation.max((s - formula).norm());
    }
    let vacuum = contraction(&vec![c(1.0, 0.0); grid.len()]);
    Ok(RefinementPoint {
        grid: n,
        spacing: grid.spacing(),
        commutator_norm,
        relative_norm: commutator_norm / scale,
        formula_norm: formula_norm / scale,
        oracle_deviation,
        scalar_residual,
        vacuum_scalar: pair(vacuum),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub configurations: usize,
    /// `min (p₀ − |p₁|)` over all joint eigenvalues.
    pub min_margin: f64,
    /// Smallest margin among states with at least one particle.
    pub min_particle_margin: f64,
    pub violations: Vec<usize>,
    pub pass: bool,
}

/// Joint translation eigenvalues of the product basis of `H_A ⊗ H_B` lie in the closed forward
/// light cone; violations carry the product index `a * dim_B + b`.
pub fn spectrum_condition(a: &FockSpace, b: &FockSpace) -> SpectrumReport {
    let pa: Vec<(f64, f64)> = (0..a.dim()).map(|i| a.momentum(i)).collect();
    let pb: Vec<(f64, f64)> = (0..b.dim()).map(|i| b.momentum(i)).collect();
    let mut min_margin = f64::INFINITY;
    let mut min_particle_margin = f64::INFINITY;
    let mut violations = Vec::new();
    for (i, &(a0, a1)) in pa.iter().enumerate() {
        for (j, &(b0, b1)) in pb.iter().enumerate() {
            let (p0, p1) = (a0 + b0, a1 + b1);
            let margin = p0 - p1.abs();
            min_margin = min_margin.min(margin);
            if i + j > 0 {
                min_particle_margin = min_particle_margin.min(margin);
            }
            if margin < 0.0 {
                violations.push(i * pb.len() + j);
            }
        }
    }
    SpectrumReport {
        configurations: pa.len() * pb.len(),
        min_margin,
        min_particle_margin,
        pass: violations.is_empty(),
        violations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicityReport {
    pub rank: usize,
    pub target_dim: usize,
    pub deficiency: usize,
    pub words: usize,
    /// Whether `x ↦ xΩ` is injective on the span of the generated words.
    pub separating_on_words: bool,
    pub pass: bool,
}

/// Rank of `{w Ω : w a word of length ≤ degree}` against the truncated space dimension.
pub fn cyclicity_rank(generators: &[CMat], omega: &CVec, degree: usize, target_dim: usize) -> Result<CyclicityReport> {
    let d = omega.len();
    if generators.iter().any(|g| g.nrows() != d || g.ncols() != d) {
        return Err(LabError::DimensionMismatch("generators do not act on the vector's space".into()));
    }
    let mut vectors = OrthoBasis::new(d, 1e-10);
    let mut operators = OrthoBasis::new(d * d, 1e-10);
    vectors.try_add(omega);
    operators.try_add(&vectorize(&CMat::identity(d, d)));
    let mut frontier = vec![CMat::identity(d, d)];
    let mut words = 1;
    for _ in 0..degree {
        let mut next = Vec::new();
        for w in &frontier {
            for g in generators {
                let p = g * w;
                words += 1;
                if operators.try_add(&vectorize(&p)) {
                    vectors.try_add(&(&p * omega));
                    next.push(p);
                }
            }
        }
        frontier = next;
    }
    let rank = vectors.len();
    Ok(CyclicityReport {
        rank,
        target_dim,
        deficiency: target_dim.saturating_sub(rank),
        words,
        separating_on_words: rank == operators.len(),
        pass: rank == target_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use crate::onepspace::make_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_psi<R: Rng>(grid: &crate::onepspace::RapidityGrid, rng: &mut R) -> OneParticleVector {
        let v = crate::linalg::random_unit_vector(grid.len(), rng);
        OneParticleVector::from_coefficients(grid, &v)
    }

    #[test]
    fn federbush_relations_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let grid = make_grid(2.0, 3, 1.0).unwrap();
        let space = FockSpace::bosonic(grid.clone(), 2, 3).unwrap();
        let (p1, p2) = (random_psi(&grid, &mut rng), random_psi(&grid, &mut rng));
        let r = zf_relations_federbush(&space, 0.3, &p1, &p2, 1e-10, &mut rng).unwrap();
        assert!(r.pass, "{r:#?}");
        // Creators of charge + in both factors pick up e^{−i2πκ}.
        let e = r.entries.iter().find(|e| e.relation == "a†+⊗1 · AdṼ(1⊗a†+)").unwrap();
        let x = e.extracted.unwrap();
        assert!((c(x[0], x[1]) - cis(-TAU * 0.3)).norm() < 1e-10);
        let r0 = zf_relations_federbush(&space, 0.0, &p1, &p2, 1e-10, &mut rng).unwrap();
        assert!(r0.entries.iter().filter(|e| e.relation.contains("AdṼ")).all(|e| e.expected == [1.0, 0.0]));
        assert!(r0.pass);
    }

    #[test]
    fn longo_witten_relation_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid = make_grid(2.0, 5, 1.0).unwrap();
        let space = FockSpace::bosonic(grid.clone(), 1, 2).unwrap();
        let phi = ScatteringFunction::half_plane_blaschke(vec![c(1.0, 0.0), c(0.5, 0.8)]).unwrap();
        let (f, g) = (random_psi(&grid, &mut rng), random_psi(&grid, &mut rng));
        let r = zf_relation_longo_witten(&space, &phi, Some((&f, &g)), 1e-12, &mut rng).unwrap();
        assert!(r.pass, "{r:?}");
        let one = ScatteringFunction::constant(c(1.0, 0.0), Domain::HalfPlane);
        let r1 = zf_relation_longo_witten(&space, &one, None, 1e-12, &mut rng).unwrap();
        assert!(r1.pass && r1.pointwise_deviation < 1e-14);
    }

    fn free_config(twist: Twist, grids: Vec<usize>) -> LocalityConfig {
        LocalityConfig {
            f: TestFunction::gaussian([1.0, 9.2], 0.5),
            g: TestFunction::gaussian([0.0, -8.2], 0.4),
            twist,
            grids,
            half_width: 3.0,
            mass: 1.0,
            n_max: 2,
            margin: 0.1,
            tol: 1e-2,
            require_spacelike: true,
            threshold_grid: None,
            min_ratio: 1.0,
        }
    }

    #[test]
    fn free_commutator_matches_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = wedge_commutativity(&free_config(Twist::Identity, vec![12, 8]), &mut rng).unwrap();
        assert_eq!(r.series.iter().map(|p| p.grid).collect::<Vec<_>>(), vec![8, 12]);
        for p in &r.series {
            assert!(p.oracle_deviation < 1e-12 && p.scalar_residual < 1e-12, "{p:?}");
        }
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn r_tilde_commutator_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = ScatteringFunction::half_plane_blaschke(vec![c(1.0, 0.0)]).unwrap();
        let r = wedge_commutativity(&free_config(Twist::RTilde { phi }, vec![10]), &mut rng).unwrap();
        assert!(r.max_oracle_deviation < 1e-12, "{r:?}");
        let p = wedge_commutativity(&free_config(Twist::Parity, vec![10]), &mut rng).unwrap();
        assert!(p.max_oracle_deviation < 1e-12, "{p:?}");
    }

    #[test]
    fn overlapping_supports_rejected_or_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cfg = free_config(Twist::Identity, vec![8]);
        cfg.g = TestFunction::gaussian([2.0, 9.2], 0.5);
        assert!(matches!(wedge_commutativity(&cfg, &mut rng), Err(LabError::NotSpacelike(_))));
        cfg.require_spacelike = false;
        let r = wedge_commutativity(&cfg, &mut rng).unwrap();
        assert!(!r.spacelike && !r.pass);
        assert!(r.series[0].relative_norm > 1e-2);
    }

    #[test]
    fn spectrum_in_forward_cone() {
        let grid = make_grid(3.0, 6, 1.0).unwrap();
        let a = FockSpace::bosonic(grid.clone(), 1, 2).unwrap();
        let r = spectrum_condition(&a, &a);
        assert!(r.pass && r.min_margin == 0.0 && r.min_particle_margin > 0.0);
        assert_eq!(a.momentum(0), (0.0, 0.0));
    }

    #[test]
    fn cyclicity_of_free_field_generators() {
        let grid = make_grid(1.5, 4, 1.0).unwrap();
        let space = FockSpace::bosonic(grid.clone(), 1, 2).unwrap();
        let gens: Vec<CMat> = [[0.0, 3.0], [0.5, 4.0], [-0.5, 3.5], [0.2, 5.0]]
            .iter()
            .map(|&ctr| crate::fock::field(&space, &TestFunction::gaussian(ctr, 0.6)).unwrap().to_dense())
            .collect();
        let r = cyclicity_rank(&gens, &space.vacuum(), 2, space.dim()).unwrap();
        assert!(r.pass, "{r:?}");
        let single = cyclicity_rank(&gens[..1], &space.vacuum(), 2, space.dim()).unwrap();
        assert!(!single.pass && single.deficiency == 12, "{single:?}");
        // Twisted generators over H ⊗ H reach the same rank as the untwisted ones.
        let d = space.dim();
        let id = CMat::identity(d, d);
        let parity = Twist::Parity.operator(&space, &space).unwrap().to_dense();
        let omega = kron_vec(&space.vacuum(), &space.vacuum());
        let plain: Vec<CMat> = gens[..2].iter().flat_map(|g| [kron(g, &id), kron(&id, g)]).collect();
        let twisted: Vec<CMat> = gens[..2]
            .iter()
            .flat_map(|g| [kron(g, &id), &parity * kron(&id, g) * parity.adjoint()])
            .collect();
        let a = cyclicity_rank(&plain, &omega, 4, d * d).unwrap();
        let b = cyclicity_rank(&twisted, &omega, 4, d * d).unwrap();
        assert_eq!(a.rank, b.rank);
    }

    fn kron_vec(a: &CVec, b: &CVec) -> CVec {
        crate::modular::kron_vec(a, b)
    }
}
