//! Experiment configs, the named-check registry and report assembly used by the CLI.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{LabError, Result};
use crate::fock::{create, field, sector_projection, FockSpace};
use crate::linalg::{c, random_unit_vector, CMat};
use crate::modular::{
    factor_and_minimal_projection, irreducible_toy, kron_vec, random_weights, toy_model, verify_commutant_twisted,
    verify_modular_twisted, verify_tau_bound,
};
use crate::onepspace::{make_grid, OneParticleVector, RapidityGrid, TestFunction};
use crate::scatfunc::{validate_s2, Domain, ScatteringFunction};
use crate::smatrix::{check_axioms, federbush_smatrix, longo_witten_smatrix};
use crate::verify::{
    cyclicity_rank, spectrum_condition, wedge_commutativity, zf_relation_longo_witten, zf_relations_federbush,
    LocalityConfig, LocalityReport, Twist,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Model {
    Free,
    Lechner {
        s2: ScatteringFunction,
    },
    Federbush {
        kappa: f64,
    },
    LongoWitten {
        phi: ScatteringFunction,
    },
    /// `M_n ⊗ 1` on `Cⁿ ⊗ Cⁿ` graded by `Z_order`, twisted with `κ = k / order`.
    ModularToy {
        n: usize,
        order: u32,
        k: i64,
        #[serde(default)]
        lambda: Option<Vec<f64>>,
        #[serde(default)]
        charges: Option<Vec<i64>>,
    },
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Free => "free",
            Model::Lechner { .. } => "lechner",
            Model::Federbush { .. } => "federbush",
            Model::LongoWitten { .. } => "longo-witten",
            Model::ModularToy { .. } => "modular-toy",
        }
    }

    fn species(&self) -> usize {
        match self {
            Model::Federbush { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub n_points: usize,
    pub mass: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: 3.0,
            n_points: 8,
            mass: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalitySettings {
    pub f: TestFunction,
    pub g: TestFunction,
    pub grids: Vec<usize>,
    pub margin: f64,
    /// Defaults: the finest grid for the free field, 32 for the R̃ twist.
    #[serde(default)]
    pub threshold_grid: Option<usize>,
    /// Defaults: 1 (strict decrease) for the free field, 4 for the R̃ twist.
    #[serde(default)]
    pub min_ratio: Option<f64>,
}

impl Default for LocalitySettings {
    fn default() -> Self {
        Self {
            f: TestFunction::gaussian([1.0, 9.2], 0.5),
            g: TestFunction::gaussian([0.0, -8.2], 0.4),
            grids: vec![16, 32, 64],
            margin: 0.1,
            threshold_grid: None,
            min_ratio: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    #[serde(default)]
    pub grid: GridConfig,
    /// Particle-number cutoff; defaults per check when absent.
    #[serde(default)]
    pub n_max: Option<usize>,
    /// Check names; empty selects every check registered for the model.
    #[serde(default)]
    pub checks: Vec<String>,
    /// Per-check tolerance overrides.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub locality: LocalitySettings,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        let g = &self.grid;
        if !(g.half_width > 0.0 && g.half_width <= 20.0) {
            return bad(format!("grid.half_width {} outside (0, 20]", g.half_width));
        }
        if !(1..=128).contains(&g.n_points) {
            return bad(format!("grid.n_points {} outside 1..=128", g.n_points));
        }
        if !(g.mass > 0.0 && g.mass.is_finite()) {
            return bad(format!("grid.mass {} must be positive", g.mass));
        }
        if let Some(n) = self.n_max {
            if !(1..=6).contains(&n) {
                return bad(format!("n_max {n} outside 1..=6"));
            }
        }
        match &self.model {
            Model::Federbush { kappa } if !kappa.is_finite() => return bad("kappa must be finite".into()),
            Model::Lechner { s2 } => {
                if s2.domain() != Domain::Rapidity {
                    return bad("lechner.s2 must be a rapidity-domain function".into());
                }
                s2.validate_parameters()?;
            }
            Model::LongoWitten { phi } => {
                if phi.domain() != Domain::HalfPlane {
                    return bad("longo-witten.phi must be a half-plane function".into());
                }
                phi.validate_parameters()?;
            }
            Model::ModularToy {
                n,
                order,
                lambda,
                charges,
                ..
            } => {
                if !(1..=3).contains(n) {
                    return bad(format!("modular-toy n = {n} outside 1..=3"));
                }
                if !(2..=6).contains(order) {
                    return bad(format!("modular-toy order {order} outside 2..=6"));
                }
                if let Some(l) = lambda {
                    if l.len() != *n || l.iter().any(|x| !(*x > 0.0)) {
                        return bad("modular-toy lambda needs n positive weights".into());
                    }
                }
                if let Some(q) = charges {
                    if q.len() != *n {
                        return bad("modular-toy charges needs n entries".into());
                    }
                }
            }
            _ => {}
        }
        for name in self.checks.iter().chain(self.tolerances.keys()) {
            let Some(spec) = find_check(name) else {
                return bad(format!("unknown check `{name}`"));
            };
            if !spec.models.contains(&self.model.kind()) {
                return bad(format!("check `{name}` does not apply to model {}", self.model.kind()));
            }
        }
        if self.locality.grids.is_empty() || self.locality.grids.iter().any(|&n| !(2..=128).contains(&n)) {
            return bad("locality.grids must hold sizes in 2..=128".into());
        }
        self.locality.f.validate()?;
        self.locality.g.validate()?;
        Ok(())
    }

    /// Requested checks, or every check for the model, in name order.
    pub fn selected(&self) -> Vec<&'static CheckSpec> {
        let mut out: Vec<&CheckSpec> = if self.checks.is_empty() {
            CHECKS.iter().filter(|s| s.models.contains(&self.model.kind())).collect()
        } else {
            self.checks.iter().filter_map(|n| find_check(n)).collect()
        };
        out.sort_by_key(|s| s.name);
        out.dedup_by_key(|s| s.name);
        out
    }

    fn grid(&self) -> Result<RapidityGrid> {
        make_grid(self.grid.half_width, self.grid.n_points, self.grid.mass)
    }

    fn tol(&self, spec: &CheckSpec) -> f64 {
        self.tolerances.get(spec.name).copied().unwrap_or(spec.tol)
    }
}

/// Outcome of one check before report assembly.
pub struct Outcome {
    pub max_deviation: f64,
    pub pass: bool,
    pub dims: Vec<usize>,
    pub detail: Value,
    pub csv: String,
}

type Runner = fn(&ExperimentConfig, f64, &mut ChaCha8Rng) -> Result<Outcome>;

pub struct CheckSpec {
    pub name: &'static str,
    pub anchor: &'static str,
    pub models: &'static [&'static str],
    /// Negative controls are required to fail.
    pub negative: bool,
    pub tol: f64,
    run: Runner,
}

const FOCK_MODELS: &[&str] = &["free", "lechner", "federbush", "longo-witten"];

pub static CHECKS: &[CheckSpec] = &[
    CheckSpec {
        name: "commutant-twisted",
        anchor: "commutant of the twisted algebra is generated by AdṼ(x'⊗1) and 1⊗y'",
        models: &["modular-toy"],
        negative: false,
        tol: 1e-10,
        run: run_commutant,
    },
    CheckSpec {
        name: "control-overlap",
        anchor: "fields with overlapping supports do not commute",
        models: &["free"],
        negative: true,
        tol: 1e-2,
        run: run_control_overlap,
    },
    CheckSpec {
        name: "control-single-generator",
        anchor: "one smeared field is not cyclic for the vacuum",
        models: &["free"],
        negative: true,
        tol: 0.0,
        run: run_control_single,
    },
    CheckSpec {
        name: "cyclicity",
        anchor: "Reeh-Schlieder totality of field polynomials on the vacuum",
        models: &["free"],
        negative: false,
        tol: 0.0,
        run: run_cyclicity,
    },
    CheckSpec {
        name: "locality",
        anchor: "commutativity lemma for x⊗1 and the twisted AdR̃(x'⊗1)",
        models: &["free", "longo-witten"],
        negative: false,
        tol: 1e-6,
        run: run_locality,
    },
    CheckSpec {
        name: "modular-twisted",
        anchor: "modular operator of the twisted algebra is Δ⊗Δ with J̃ = Ṽ(J⊗J)",
        models: &["modular-toy"],
        negative: false,
        tol: 1e-10,
        run: run_modular,
    },
    CheckSpec {
        name: "s2-axioms",
        anchor: "S₂(θ)⁻¹ = conj S₂(θ) = S₂(−θ) = S₂(θ+iπ)",
        models: &["free", "lechner"],
        negative: false,
        tol: 1e-10,
        run: run_s2_axioms,
    },
    CheckSpec {
        name: "s2-exchange",
        anchor: "S₂-symmetrized Fock space: projection and z†z† exchange",
        models: &["free", "lechner"],
        negative: false,
        tol: 1e-12,
        run: run_s2_exchange,
    },
    CheckSpec {
        name: "smatrix-federbush",
        anchor: "16×16 Federbush two-particle S-matrix: unitarity and Yang-Baxter",
        models: &["federbush"],
        negative: false,
        tol: 1e-12,
        run: run_smatrix_federbush,
    },
    CheckSpec {
        name: "smatrix-longo-witten",
        anchor: "4×4 diagonal S-matrix from φ: unitarity and Yang-Baxter",
        models: &["longo-witten"],
        negative: false,
        tol: 1e-12,
        run: run_smatrix_lw,
    },
    CheckSpec {
        name: "spectrum",
        anchor: "joint spectrum of the translations lies in the forward light cone",
        models: FOCK_MODELS,
        negative: false,
        tol: 0.0,
        run: run_spectrum,
    },
    CheckSpec {
        name: "tau-bound",
        anchor: "τ_k is bounded by N² and leaves the action on Ω̃ unchanged",
        models: &["modular-toy"],
        negative: false,
        tol: 1e-12,
        run: run_tau,
    },
    CheckSpec {
        name: "type-i-factor",
        anchor: "twisted algebra is a type I factor with minimal projection p⊗p",
        models: &["modular-toy"],
        negative: false,
        tol: 1e-10,
        run: run_factor,
    },
    CheckSpec {
        name: "zf-federbush",
        anchor: "twisted ZF relations of the complex free field with e^{±(∓i2πκ)}",
        models: &["federbush"],
        negative: false,
        tol: 1e-10,
        run: run_zf_federbush,
    },
    CheckSpec {
        name: "zf-longo-witten",
        anchor: "a†(θ)⊗1 · AdR̃(1⊗a†(θ')) = φ(e^{θ−θ'}) AdR̃(1⊗a†(θ')) · a†(θ)⊗1",
        models: &["longo-witten"],
        negative: false,
        tol: 1e-12,
        run: run_zf_lw,
    },
];

pub fn find_check(name: &str) -> Option<&'static CheckSpec> {
    CHECKS.iter().find(|s| s.name == name)
}

/// One line per registered check: name, applicable models and anchor.
pub fn catalog() -> Vec<String> {
    CHECKS
        .iter()
        .map(|s| {
            let neg = if s.negative { " (negative control)" } else { "" };
            format!("{:<26}{:<40}{}{neg}", s.name, s.models.join(","), s.anchor)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub max_deviation: f64,
    pub pass: bool,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub negative_control: bool,
    /// `pass` for ordinary checks, `!pass` for negative controls.
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub detail: Value,
    #[serde(skip)]
    pub csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub seed: u64,
    pub checks: Vec<CheckReport>,
    pub ok: bool,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are plain data") + "\n"
    }

    pub fn exit_code(&self) -> i32 {
        if self.ok {
            0
        } else {
            1
        }
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        for c in &self.checks {
            std::fs::write(dir.join(format!("{}.csv", c.check)), &c.csv)?;
        }
        Ok(())
    }
}

/// Each check draws from its own ChaCha stream, keyed by its registry position, so results do
/// not depend on scheduling.
fn check_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = CHECKS.iter().position(|s| s.name == name).unwrap_or(CHECKS.len()) as u64;
    rng.set_stream(stream);
    rng
}

pub fn run_one(cfg: &ExperimentConfig, spec: &CheckSpec, seed: u64) -> CheckReport {
    let mut rng = check_rng(seed, spec.name);
    let outcome = (spec.run)(cfg, cfg.tol(spec), &mut rng);
    let (max_deviation, pass, dims, detail, csv, error) = match outcome {
        Ok(o) => (o.max_deviation, o.pass, o.dims, o.detail, o.csv, None),
        Err(e) => (f64::NAN, false, Vec::new(), Value::Null, String::new(), Some(e.to_string())),
    };
    // An erroring negative control has not demonstrated the failure it is meant to show.
    let ok = if spec.negative { error.is_none() && !pass } else { pass };
    CheckReport {
        check: spec.name.into(),
        max_deviation,
        pass,
        dims,
        seed,
        negative_control: spec.negative,
        ok,
        error,
        detail,
        csv,
    }
}

/// Runs the selected checks on `jobs` threads (0 uses the rayon default).
pub fn run(cfg: &ExperimentConfig, seed: u64, jobs: usize) -> Result<RunReport> {
    let specs = cfg.selected();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| LabError::Config(e.to_string()))?;
    let mut checks: Vec<CheckReport> = pool.install(|| specs.par_iter().map(|s| run_one(cfg, s, seed)).collect());
    checks.sort_by(|a, b| a.check.cmp(&b.check));
    Ok(RunReport {
        model: cfg.model.kind().into(),
        seed,
        ok: checks.iter().all(|c| c.ok),
        checks,
    })
}

fn metrics_csv(rows: &[(&str, f64)]) -> String {
    let mut s = String::from("quantity,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{v:e}\n"));
    }
    s
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).unwrap_or(Value::Null)
}

fn model_s2(cfg: &ExperimentConfig) -> ScatteringFunction {
    match &cfg.model {
        Model::Lechner { s2 } => s2.clone(),
        _ => ScatteringFunction::one(),
    }
}

fn model_phi(cfg: &ExperimentConfig) -> Result<&ScatteringFunction> {
    match &cfg.model {
        Model::LongoWitten { phi } => Ok(phi),
        _ => Err(LabError::Config("check needs a longo-witten model".into())),
    }
}

fn run_s2_axioms(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let thetas: Vec<f64> = (0..1000).map(|_| rng.random_range(-10.0..10.0)).collect();
    let r = validate_s2(&model_s2(cfg), &thetas, tol)?;
    Ok(Outcome {
        max_deviation: r.max_deviation,
        pass: r.pass,
        dims: vec![r.samples],
        csv: metrics_csv(&[
            ("unitarity", r.unitarity),
            ("hermitian_analyticity", r.hermitian_analyticity),
            ("inverse_reflection", r.inverse_reflection),
            ("crossing", r.crossing),
        ]),
        detail: to_value(&r),
    })
}

/// `Q_{S₂,2}` is a Hermitian idempotent and `z†(θ_i)z†(θ_j)Ω = S₂(θ_i − θ_j) z†(θ_j)z†(θ_i)Ω`.
pub fn s2_exchange(grid: &RapidityGrid, s2: &ScatteringFunction) -> Result<(f64, f64)> {
    let space = FockSpace::s2_twisted(grid.clone(), 1, 2, s2.clone())?;
    let q = sector_projection(&space, 2)?;
    let projection = q
        .add(&q.adjoint().scale(c(-1.0, 0.0)))
        .max_abs()
        .max(q.matmul(&q).axpy(c(-1.0, 0.0), &q).max_abs());
    let om = space.vacuum();
    let z: Vec<_> = (0..grid.len())
        .map(|i| create(&space, &OneParticleVector::localized(grid, i), 0))
        .collect::<Result<_>>()?;
    let mut exchange = 0.0_f64;
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let ij = z[i].apply(&z[j].apply(&om));
            let ji = z[j].apply(&z[i].apply(&om));
            let s = s2.eval_real(grid.theta()[i] - grid.theta()[j])?;
            exchange = exchange.max(crate::linalg::max_abs_vec(&(ij - ji * s)));
        }
    }
    Ok((projection, exchange))
}

fn run_s2_exchange(cfg: &ExperimentConfig, tol: f64, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let (p, e) = s2_exchange(&grid, &model_s2(cfg))?;
    Ok(Outcome {
        max_deviation: p.max(e),
        pass: p <= tol && e <= tol,
        dims: vec![grid.len()],
        detail: json!({"projection_deviation": p, "exchange_deviation": e}),
        csv: metrics_csv(&[("projection_deviation", p), ("exchange_deviation", e)]),
    })
}

fn random_psi<R: Rng>(grid: &RapidityGrid, rng: &mut R) -> OneParticleVector {
    OneParticleVector::from_coefficients(grid, &random_unit_vector(grid.len(), rng))
}

fn run_zf_federbush(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let Model::Federbush { kappa } = cfg.model else {
        return Err(LabError::Config("zf-federbush needs a federbush model".into()));
    };
    let grid = cfg.grid()?;
    let space = FockSpace::bosonic(grid.clone(), 2, cfg.n_max.unwrap_or(4))?;
    let (p1, p2) = (random_psi(&grid, rng), random_psi(&grid, rng));
    let r = zf_relations_federbush(&space, kappa, &p1, &p2, tol, rng)?;
    let mut csv = String::from("relation,expected_re,expected_im,extracted_re,extracted_im,residual\n");
    for e in &r.entries {
        csv.push_str(&format!(
            "\"{}\",{:e},{:e},{:e},{:e},{:e}\n",
            e.relation,
            e.expected[0],
            e.expected[1],
            e.extracted.map_or(f64::NAN, |x| x[0]),
            e.extracted.map_or(f64::NAN, |x| x[1]),
            e.residual
        ));
    }
    Ok(Outcome {
        max_deviation: r.max_residual.max(r.max_phase_deviation).max(r.theta_spread),
        pass: r.pass,
        dims: vec![space.dim()],
        detail: to_value(&r),
        csv,
    })
}

fn axioms_outcome(r: crate::smatrix::AxiomReport, dim: usize) -> Outcome {
    Outcome {
        max_deviation: r.max_deviation,
        pass: r.pass,
        dims: vec![dim * dim],
        csv: metrics_csv(&[
            ("unitarity", r.unitarity),
            ("yang_baxter", r.yang_baxter),
            ("hermitian_analyticity", r.hermitian_analyticity),
        ]),
        detail: to_value(&r),
    }
}

fn thetas<R: Rng>(rng: &mut R) -> Vec<f64> {
    (0..20).map(|_| rng.random_range(-4.0..4.0)).collect()
}

fn run_smatrix_federbush(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let Model::Federbush { kappa } = cfg.model else {
        return Err(LabError::Config("smatrix-federbush needs a federbush model".into()));
    };
    let s = federbush_smatrix(kappa);
    Ok(axioms_outcome(check_axioms(&s, &thetas(rng), tol)?, s.dim()))
}

fn run_smatrix_lw(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let s = longo_witten_smatrix(model_phi(cfg)?)?;
    let r = check_axioms(&s, &thetas(rng), tol)?;
    // Hermitian analyticity needs φ(x) = conj φ(−x) on the real line, a symmetry φ is not
    // required to have here; it is reported but does not decide the check.
    let dev = r.unitarity.max(r.yang_baxter);
    Ok(Outcome {
        max_deviation: dev,
        pass: dev <= tol,
        ..axioms_outcome(r, s.dim())
    })
}

fn run_zf_lw(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let space = FockSpace::bosonic(grid.clone(), 1, cfg.n_max.unwrap_or(2))?;
    let (f, g) = (random_psi(&grid, rng), random_psi(&grid, rng));
    let r = zf_relation_longo_witten(&space, model_phi(cfg)?, Some((&f, &g)), tol, rng)?;
    Ok(Outcome {
        max_deviation: r.pointwise_deviation.max(r.pointwise_residual).max(r.smeared_deviation),
        pass: r.pass,
        dims: vec![space.dim(), r.pairs],
        csv: metrics_csv(&[
            ("pointwise_deviation", r.pointwise_deviation),
            ("pointwise_residual", r.pointwise_residual),
            ("smeared_deviation", r.smeared_deviation),
        ]),
        detail: to_value(&r),
    })
}

fn locality_outcome(r: LocalityReport) -> Outcome {
    let last = r.series.last().map(|p| p.relative_norm).unwrap_or(f64::NAN);
    Outcome {
        max_deviation: last.max(r.max_oracle_deviation),
        pass: r.pass,
        dims: r.series.iter().map(|p| p.grid).collect(),
        csv: r.to_csv(),
        detail: to_value(&r),
    }
}

fn locality_config(cfg: &ExperimentConfig, twist: Twist, tol: f64) -> LocalityConfig {
    let r_tilde = matches!(twist, Twist::RTilde { .. });
    let default_grid = (r_tilde && cfg.locality.grids.contains(&32)).then_some(32);
    LocalityConfig {
        threshold_grid: cfg.locality.threshold_grid.or(default_grid),
        min_ratio: cfg.locality.min_ratio.unwrap_or(if r_tilde { 4.0 } else { 1.0 }),
        f: cfg.locality.f.clone(),
        g: cfg.locality.g.clone(),
        twist,
        grids: cfg.locality.grids.clone(),
        half_width: cfg.grid.half_width,
        mass: cfg.grid.mass,
        n_max: cfg.n_max.unwrap_or(2),
        margin: cfg.locality.margin,
        tol,
        require_spacelike: true,
    }
}

/// Without an explicit override the free field is held to `1e-3` at the finest grid and the R̃
/// twist to the registry tolerance at grid 32.
fn run_locality(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let (twist, tol) = match &cfg.model {
        Model::LongoWitten { phi } => (Twist::RTilde { phi: phi.clone() }, tol),
        _ => (Twist::Identity, cfg.tolerances.get("locality").copied().unwrap_or(1e-3)),
    };
    Ok(locality_outcome(wedge_commutativity(&locality_config(cfg, twist, tol), rng)?))
}

/// `g` replaced by `f` moved forward in time by one unit: the supports overlap in a timelike way.
pub fn overlap_control_config(cfg: &LocalityConfig) -> LocalityConfig {
    let g = match &cfg.f {
        TestFunction::Gaussian {
            center,
            sigma,
            amplitude,
            cutoff,
        } => TestFunction::Gaussian {
            center: [center[0] + 1.0, center[1]],
            sigma: *sigma,
            amplitude: *amplitude,
            cutoff: *cutoff,
        },
        TestFunction::Bump {
            center,
            radius,
            amplitude,
        } => TestFunction::Bump {
            center: [center[0] + 1.0, center[1]],
            radius: *radius,
            amplitude: *amplitude,
        },
        TestFunction::Zero => TestFunction::Zero,
    };
    LocalityConfig {
        g,
        require_spacelike: false,
        ..cfg.clone()
    }
}

fn run_control_overlap(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut lc = overlap_control_config(&locality_config(cfg, Twist::Identity, tol));
    lc.grids.truncate(2);
    Ok(locality_outcome(wedge_commutativity(&lc, rng)?))
}

/// Four smeared fields with narrow Gaussians, so that every grid mode carries weight well above
/// the rank tolerance for rapidities up to about ±4.
pub fn free_field_generators(grid: &RapidityGrid, n_max: usize) -> Result<(FockSpace, Vec<CMat>)> {
    let space = FockSpace::bosonic(grid.clone(), 1, n_max)?;
    let gens = [[0.0, 3.0], [0.5, 4.0], [-0.5, 3.5], [0.2, 5.0]]
        .iter()
        .map(|&ctr| Ok(field(&space, &TestFunction::gaussian(ctr, 0.25))?.to_dense()))
        .collect::<Result<_>>()?;
    Ok((space, gens))
}

fn cyclicity_grid(cfg: &ExperimentConfig) -> Result<RapidityGrid> {
    make_grid(cfg.grid.half_width, cfg.grid.n_points.min(4), cfg.grid.mass)
}

fn run_cyclicity(cfg: &ExperimentConfig, _: f64, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let (space, gens) = free_field_generators(&cyclicity_grid(cfg)?, cfg.n_max.unwrap_or(2).min(2))?;
    let r = cyclicity_rank(&gens, &space.vacuum(), 2 * space.n_max(), space.dim())?;
    // Twisted and untwisted two-field generators on H ⊗ H reach the same rank.
    let d = space.dim();
    let id = CMat::identity(d, d);
    let parity = crate::twist::fock_grading(&space, &[1])?;
    let t = crate::twist::twist_unitary(&parity, &parity, 0.5).to_dense();
    let omega = kron_vec(&space.vacuum(), &space.vacuum());
    let plain: Vec<CMat> = gens[..2]
        .iter()
        .flat_map(|g| [crate::linalg::kron(g, &id), crate::linalg::kron(&id, g)])
        .collect();
    let twisted: Vec<CMat> = gens[..2]
        .iter()
        .flat_map(|g| [crate::linalg::kron(g, &id), &t * crate::linalg::kron(&id, g) * t.adjoint()])
        .collect();
    let a = cyclicity_rank(&plain, &omega, 4, d * d)?;
    let b = cyclicity_rank(&twisted, &omega, 4, d * d)?;
    let pass = r.pass && a.rank == b.rank;
    Ok(Outcome {
        max_deviation: r.deficiency as f64 + a.rank.abs_diff(b.rank) as f64,
        pass,
        dims: vec![r.rank, r.target_dim, a.rank, b.rank],
        csv: metrics_csv(&[
            ("rank", r.rank as f64),
            ("target", r.target_dim as f64),
            ("untwisted_tensor_rank", a.rank as f64),
            ("twisted_tensor_rank", b.rank as f64),
        ]),
        detail: json!({"single_factor": to_value(&r), "untwisted": to_value(&a), "twisted": to_value(&b)}),
    })
}

fn run_control_single(cfg: &ExperimentConfig, _: f64, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let (space, gens) = free_field_generators(&cyclicity_grid(cfg)?, cfg.n_max.unwrap_or(2).min(2))?;
    let r = cyclicity_rank(&gens[..1], &space.vacuum(), 2 * space.n_max(), space.dim())?;
    Ok(Outcome {
        max_deviation: r.deficiency as f64,
        pass: r.pass,
        dims: vec![r.rank, r.target_dim],
        csv: metrics_csv(&[("rank", r.rank as f64), ("deficiency", r.deficiency as f64)]),
        detail: to_value(&r),
    })
}

fn run_spectrum(cfg: &ExperimentConfig, _: f64, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let n_max = cfg.n_max.unwrap_or(2);
    let space = match &cfg.model {
        Model::Lechner { s2 } => FockSpace::s2_twisted(grid, 1, n_max, s2.clone())?,
        m => FockSpace::bosonic(grid, m.species(), n_max)?,
    };
    let r = spectrum_condition(&space, &space);
    Ok(Outcome {
        max_deviation: (-r.min_margin).max(0.0),
        pass: r.pass,
        dims: vec![space.dim(), r.configurations],
        csv: metrics_csv(&[
            ("configurations", r.configurations as f64),
            ("min_margin", r.min_margin),
            ("min_particle_margin", r.min_particle_margin),
        ]),
        detail: to_value(&r),
    })
}

struct Toy {
    n: usize,
    order: u32,
    k: i64,
    lambda: Option<Vec<f64>>,
    charges: Vec<i64>,
}

fn toy(cfg: &ExperimentConfig) -> Result<Toy> {
    match &cfg.model {
        Model::ModularToy {
            n,
            order,
            k,
            lambda,
            charges,
        } => Ok(Toy {
            n: *n,
            order: *order,
            k: *k,
            lambda: lambda.clone(),
            charges: charges.clone().unwrap_or_else(|| (0..*n as i64).collect()),
        }),
        _ => Err(LabError::Config("check needs a modular-toy model".into())),
    }
}

impl Toy {
    fn kappa(&self) -> f64 {
        self.k.rem_euclid(self.order as i64) as f64 / self.order as f64
    }

    fn build<R: Rng>(&self, rng: &mut R) -> Result<crate::modular::ToyModel> {
        let lambda = self.lambda.clone().unwrap_or_else(|| random_weights(self.n, rng));
        toy_model(&self.charges, self.order, &lambda)
    }
}

fn run_modular(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let t = toy(cfg)?;
    let m = t.build(rng)?;
    let r = verify_modular_twisted(&m.algebra, &m.grading, t.kappa(), &m.omega, tol, rng)?;
    Ok(Outcome {
        max_deviation: r.max_deviation,
        pass: r.pass,
        dims: r.dims.clone(),
        csv: metrics_csv(&[
            ("delta_deviation", r.delta_deviation),
            ("j_deviation", r.j_deviation),
            ("kms_deviation", r.kms_deviation),
            ("invariant_deviation", r.invariant_deviation),
        ]),
        detail: json!({"lambda": m.lambda, "report": to_value(&r)}),
    })
}

fn run_commutant(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let t = toy(cfg)?;
    let m = t.build(rng)?;
    let r = verify_commutant_twisted(&m.algebra, &m.grading, t.kappa(), &m.omega, tol)?;
    Ok(Outcome {
        max_deviation: r.max_deviation,
        pass: r.pass,
        dims: vec![r.commutant_dim, r.formula_dim],
        csv: metrics_csv(&[
            ("span_distance", r.span_distance),
            ("commutation_residual", r.commutation_residual),
            ("brute_force_distance", r.brute_force_distance.unwrap_or(f64::NAN)),
        ]),
        detail: json!({"lambda": m.lambda, "report": to_value(&r)}),
    })
}

fn run_tau(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let t = toy(cfg)?;
    let m = t.build(rng)?;
    let r = verify_tau_bound(&m.algebra, &m.grading, t.k, &m.omega, 100, tol, rng)?;
    Ok(Outcome {
        max_deviation: r.vector_deviation.max(r.reconstruction_deviation).max(r.image_residual),
        pass: r.pass,
        dims: vec![m.n * m.n, r.samples],
        csv: metrics_csv(&[
            ("max_ratio", r.max_ratio),
            ("bound", r.bound),
            ("vector_deviation", r.vector_deviation),
            ("reconstruction_deviation", r.reconstruction_deviation),
            ("image_residual", r.image_residual),
        ]),
        detail: to_value(&r),
    })
}

fn run_factor(cfg: &ExperimentConfig, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let t = toy(cfg)?;
    let (r_alg, grading) = irreducible_toy(&t.charges, t.order)?;
    let r = factor_and_minimal_projection(&r_alg, &grading, t.kappa(), rng)?;
    let dev = r.membership_residual.max(r.fixed_point_invariance);
    Ok(Outcome {
        max_deviation: dev,
        pass: r.pass && dev <= tol,
        dims: vec![r.twisted_dim, r.center_dim, r.fixed_point_dim, r.projection_rank],
        csv: metrics_csv(&[
            ("center_dim", r.center_dim as f64),
            ("corner_dim_fixed", r.corner_dim_fixed as f64),
            ("corner_dim_twisted", r.corner_dim_twisted as f64),
            ("membership_residual", r.membership_residual),
            ("fixed_point_invariance", r.fixed_point_invariance),
        ]),
        detail: to_value(&r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_sorted_and_unique() {
        let names: Vec<&str> = CHECKS.iter().map(|s| s.name).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(names, sorted);
        assert_eq!(catalog().len(), CHECKS.len());
        assert!(catalog().iter().any(|l| l.starts_with("zf-federbush")));
    }

    #[test]
    fn config_errors() {
        assert!(ExperimentConfig::from_toml("model = 3").is_err());
        assert!(ExperimentConfig::from_toml("checks = [\"nope\"]\n[model]\nkind = \"free\"").is_err());
        let e = ExperimentConfig::from_toml("checks = [\"zf-federbush\"]\n[model]\nkind = \"free\"").unwrap_err();
        assert!(e.to_string().contains("does not apply"));
        let e = ExperimentConfig::from_toml("[model]\nkind = \"modular-toy\"\nn = 9\norder = 2\nk = 1").unwrap_err();
        assert!(matches!(e, LabError::Config(_)));
        let ok = ExperimentConfig::from_toml("[model]\nkind = \"federbush\"\nkappa = 0.25").unwrap();
        let names: Vec<&str> = ok.selected().iter().map(|s| s.name).collect();
        assert_eq!(names, ["smatrix-federbush", "spectrum", "zf-federbush"]);
    }

    #[test]
    fn small_runs_are_deterministic() {
        let text = "seed = 3\nn_max = 3\nchecks = [\"zf-federbush\", \"spectrum\"]\n[grid]\nhalf_width = 2.0\nn_points = 3\nmass = 1.0\n[model]\nkind = \"federbush\"\nkappa = 0.25\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let a = run(&cfg, 3, 2).unwrap();
        let b = run(&cfg, 3, 1).unwrap();
        assert!(a.ok, "{}", a.to_json());
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.checks[0].check, "spectrum");
    }
}
