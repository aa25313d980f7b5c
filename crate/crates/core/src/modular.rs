//! Finite-dimensional Tomita-Takesaki theory for twisted tensor products of toy algebras.
//!
//! Antilinear maps are stored as matrices `A` acting by `v ↦ A · conj(v)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{
    adjoint_mul, c, hermitian_eig, matmul, hermitian_fn, identity, intersection_dim, kron, max_abs, max_abs_vec, op_norm,
    random_complex, rank, subspace_distance, unvectorize, vectorize, CMat, CVec, C64,
};
use crate::twist::{double_fourier_component, fourier_component, tau_k, twist_unitary, ChargeGrading, Group};

/// Linear span of words in a generator list, closed under adjoints, with a Hilbert-Schmidt
/// orthonormal basis.
#[derive(Clone, Debug)]
pub struct FiniteAlgebra {
    dim: usize,
    generators: Vec<CMat>,
    basis: Vec<CMat>,
}

impl FiniteAlgebra {
    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    pub fn generators(&self) -> &[CMat] {
        &self.generators
    }

    /// Basis elements as vectorized columns.
    pub fn basis_matrix(&self) -> CMat {
        let cols: Vec<CVec> = self.basis.iter().map(vectorize).collect();
        CMat::from_columns(&cols)
    }

    /// Relative distance of `x` from the span.
    pub fn residual(&self, x: &CMat) -> f64 {
        let v = vectorize(x);
        let n = v.norm();
        if n == 0.0 {
            return 0.0;
        }
        let mut r = v;
        let rs = r.as_mut_slice();
        for b in &self.basis {
            let bs = b.as_slice();
            let coef: C64 = bs.iter().zip(rs.iter()).map(|(p, q)| p.conj() * q).sum();
            rs.iter_mut().zip(bs).for_each(|(q, p)| *q -= p * coef);
        }
        r.norm() / n
    }

    pub fn random_element<R: Rng>(&self, rng: &mut R) -> CMat {
        let mut x = CMat::zeros(self.dim, self.dim);
        for b in &self.basis {
            let z = random_complex(rng);
            x.iter_mut().zip(b.iter()).for_each(|(p, q)| *p += q * z);
        }
        x
    }

    pub fn random_hermitian<R: Rng>(&self, rng: &mut R) -> CMat {
        let x = self.random_element(rng);
        (&x + x.adjoint()) * c(0.5, 0.0)
    }
}

/// Closure of the generators (and their adjoints) under products, grown by left multiplication
/// one degree at a time. Fails if degree `degree_bound + 1` still adds new elements.
pub fn algebra_closure(generators: &[CMat], degree_bound: usize) -> Result<FiniteAlgebra> {
    let dim = generators.first().map(|g| g.nrows()).unwrap_or(0);
    if dim == 0 {
        return Err(LabError::InvalidParameter("no generators".into()));
    }
    if generators.iter().any(|g| g.nrows() != dim || g.ncols() != dim) {
        return Err(LabError::DimensionMismatch("generators of different shapes".into()));
    }
    let mut gens: Vec<CMat> = generators.to_vec();
    for g in generators {
        if max_abs(&(g - g.adjoint())) > 0.0 {
            gens.push(g.adjoint());
        }
    }
    let mut span = BatchSpan::new(dim * dim);
    let mut frontier = span.extend(&[vectorize(&identity(dim))]);
    let mut basis: Vec<CMat> = frontier.iter().map(|v| unvectorize(v, dim, dim)).collect();
    for degree in 1..=degree_bound + 1 {
        let mut cands = Vec::with_capacity(frontier.len() * gens.len());
        for v in &frontier {
            let b = unvectorize(v, dim, dim);
            for g in &gens {
                // Products of nilpotent pieces vanish up to rounding; those must not enter.
                let p = matmul(g, &b);
                let n = p.norm();
                if n > 1e-10 * g.norm() {
                    cands.push(vectorize(&p) / c(n, 0.0));
                }
            }
        }
        let next = span.extend(&cands);
        if next.is_empty() {
            return Ok(FiniteAlgebra {
                dim,
                generators: generators.to_vec(),
                basis,
            });
        }
        if degree > degree_bound {
            return Err(LabError::ClosureNotStable(degree_bound));
        }
        basis.extend(next.iter().map(|v| unvectorize(v, dim, dim)));
        frontier = next;
    }
    unreachable!("loop returns on the last degree")
}

/// Orthonormal basis grown in batches of unit candidates. Projections run on split real and
/// imaginary parts so that they use real matrix products.
struct BatchSpan {
    len: usize,
    q: CMat,
    qr: RMat,
    qi: RMat,
    qr_t: RMat,
    qi_t: RMat,
}

type RMat = nalgebra::DMatrix<f64>;

impl BatchSpan {
    fn new(len: usize) -> Self {
        Self {
            len,
            q: CMat::zeros(len, 0),
            qr: RMat::zeros(len, 0),
            qi: RMat::zeros(len, 0),
            qr_t: RMat::zeros(0, len),
            qi_t: RMat::zeros(0, len),
        }
    }

    fn project_out(&self, re: &mut RMat, im: &mut RMat) {
        if self.q.ncols() == 0 {
            return;
        }
        let cr = &self.qr_t * &*re + &self.qi_t * &*im;
        let ci = &self.qr_t * &*im - &self.qi_t * &*re;
        *re -= &self.qr * &cr - &self.qi * &ci;
        *im -= &self.qr * &ci + &self.qi * &cr;
    }

    fn split(cols: &[CVec], len: usize) -> (RMat, RMat) {
        let re = RMat::from_fn(len, cols.len(), |i, j| cols[j][i].re);
        let im = RMat::from_fn(len, cols.len(), |i, j| cols[j][i].im);
        (re, im)
    }

    /// Adds the part of the candidates outside the span; returns the new orthonormal vectors.
    fn extend(&mut self, cands: &[CVec]) -> Vec<CVec> {
        if cands.is_empty() || self.q.ncols() == self.len {
            return Vec::new();
        }
        let (mut re, mut im) = Self::split(cands, self.len);
        self.project_out(&mut re, &mut im);
        let alive: Vec<usize> = (0..cands.len())
            .filter(|&j| (re.column(j).norm_squared() + im.column(j).norm_squared()).sqrt() > 1e-7)
            .collect();
        if alive.is_empty() {
            return Vec::new();
        }
        let mut re = re.select_columns(&alive);
        let mut im = im.select_columns(&alive);
        self.project_out(&mut re, &mut im);
        let r = CMat::from_fn(self.len, alive.len(), |i, j| c(re[(i, j)], im[(i, j)]));
        let (vals, vecs) = hermitian_eig(&adjoint_mul(&r, &r));
        let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 1e-14).collect();
        if keep.is_empty() {
            return Vec::new();
        }
        let scaled: Vec<CVec> = keep
            .iter()
            .map(|&k| vecs.column(k) / c(vals[k].sqrt(), 0.0))
            .collect();
        let fresh = matmul(&r, &CMat::from_columns(&scaled));
        let (mut fr, mut fi) = (fresh.map(|z| z.re), fresh.map(|z| z.im));
        self.project_out(&mut fr, &mut fi);
        let fresh = CMat::from_fn(self.len, keep.len(), |i, j| c(fr[(i, j)], fi[(i, j)]))
            .qr()
            .q();
        let old = self.q.ncols();
        let mut q = CMat::zeros(self.len, old + fresh.ncols());
        q.columns_mut(0, old).copy_from(&self.q);
        q.columns_mut(old, fresh.ncols()).copy_from(&fresh);
        self.qr = q.map(|z| z.re);
        self.qi = q.map(|z| z.im);
        self.qr_t = self.qr.transpose();
        self.qi_t = self.qi.transpose();
        self.q = q;
        fresh.column_iter().map(|v| v.into_owned()).collect()
    }
}

/// Brute-force commutant `{z : [z, g] = 0}` from the kernel of `Σ_g L_g* L_g`,
/// `L_g = gᵀ ⊗ 1 − 1 ⊗ g` on column-major vectorizations.
pub fn commutant_brute_force(generators: &[CMat], tol: f64) -> Result<Vec<CMat>> {
    let dim = generators.first().map(|g| g.nrows()).unwrap_or(0);
    if dim * dim > 400 {
        return Err(LabError::InvalidParameter(format!(
            "brute-force commutant limited to dimension 20, got {dim}"
        )));
    }
    let id = identity(dim);
    let mut gram = CMat::zeros(dim * dim, dim * dim);
    let mut scale = 0.0_f64;
    for g in generators {
        let l = kron(&g.transpose(), &id) - kron(&id, g);
        scale = scale.max(max_abs(&l));
        gram += l.adjoint() * &l;
    }
    let threshold = (tol * scale.max(1.0)).powi(2);
    let (vals, vecs) = hermitian_eig(&gram);
    Ok(vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= threshold)
        .map(|(i, _)| unvectorize(&vecs.column(i).into_owned(), dim, dim))
        .collect())
}

/// Orthonormal span of a list of operators, as an algebra record without closure.
fn span_of(dim: usize, ops: &[CMat], generators: Vec<CMat>) -> FiniteAlgebra {
    let floor = 1e-12 * ops.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let cands: Vec<CVec> = ops
        .iter()
        .filter(|x| x.norm() > floor)
        .map(|x| vectorize(x) / c(x.norm(), 0.0))
        .collect();
    let basis = BatchSpan::new(dim * dim)
        .extend(&cands)
        .iter()
        .map(|v| unvectorize(v, dim, dim))
        .collect();
    FiniteAlgebra {
        dim,
        generators,
        basis,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicSeparating {
    pub cyclic_rank: usize,
    pub hilbert_dim: usize,
    pub algebra_dim: usize,
    pub cyclic: bool,
    pub separating: bool,
}

pub fn cyclic_separating(a: &FiniteAlgebra, omega: &CVec) -> CyclicSeparating {
    let v = orbit_matrix(a, omega);
    let r = rank(&v, 1e-10);
    CyclicSeparating {
        cyclic_rank: r,
        hilbert_dim: a.dim,
        algebra_dim: a.len(),
        cyclic: r == a.dim,
        separating: r == a.len(),
    }
}

fn orbit_matrix(a: &FiniteAlgebra, omega: &CVec) -> CMat {
    let cols: Vec<CVec> = a.basis.iter().map(|x| x * omega).collect();
    CMat::from_columns(&cols)
}

/// `(Δ, J, S)` for an algebra and a cyclic separating vector.
#[derive(Clone, Debug)]
pub struct ModularData {
    pub delta: CMat,
    /// `J v = j · conj(v)`.
    pub j: CMat,
    /// `S v = s · conj(v)`.
    pub s: CMat,
    pub omega: CVec,
}

impl ModularData {
    pub fn apply_j(&self, v: &CVec) -> CVec {
        &self.j * v.map(|z| z.conj())
    }

    pub fn apply_s(&self, v: &CVec) -> CVec {
        &self.s * v.map(|z| z.conj())
    }

    /// Largest deviation among `Δ > 0`, `JΔJ = Δ⁻¹`, `J² = 1`, `ΔΩ = Ω`, `JΩ = Ω`.
    pub fn invariant_deviation(&self) -> f64 {
        let n = self.delta.nrows();
        let (vals, _) = hermitian_eig(&self.delta);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let positivity = if min > 0.0 { 0.0 } else { -min + 1.0 };
        let hermiticity = max_abs(&(&self.delta - self.delta.adjoint()));
        let inv = hermitian_fn(&self.delta, |x| 1.0 / x);
        let jdj = &self.j * self.delta.map(|z| z.conj()) * self.j.map(|z| z.conj());
        let jj = &self.j * self.j.map(|z| z.conj());
        [
            positivity,
            hermiticity,
            max_abs(&(jdj - inv)),
            max_abs(&(jj - identity(n))),
            max_abs_vec(&(&self.delta * &self.omega - &self.omega)),
            max_abs_vec(&(self.apply_j(&self.omega) - &self.omega)),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// `max |⟨Ω, (Δ⁻¹xΔ) y Ω⟩ − ⟨Ω, y x Ω⟩|` over basis pairs.
    pub fn kms_deviation(&self, a: &FiniteAlgebra) -> f64 {
        let inv = hermitian_fn(&self.delta, |x| 1.0 / x);
        kms_with(&self.delta, &inv, &self.omega, a.basis(), a.basis())
    }
}

/// KMS deviation for explicit element lists, `σ_{i}(x) = Δ⁻¹xΔ` paired against `y`.
fn kms_with(delta: &CMat, delta_inv: &CMat, omega: &CVec, xs: &[CMat], ys: &[CMat]) -> f64 {
    // ⟨Ω, Δ⁻¹xΔyΩ⟩ = ⟨Δ⁻¹Ω, x ΔyΩ⟩ and ⟨Ω, y x Ω⟩ = ⟨y* Ω, x Ω⟩.
    let d_omega = delta_inv * omega;
    let mut dev = 0.0_f64;
    for y in ys {
        let dy = delta * (y * omega);
        let ystar = y.adjoint() * omega;
        for x in xs {
            let lhs = d_omega.dotc(&(x * &dy));
            let rhs = ystar.dotc(&(x * omega));
            dev = dev.max((lhs - rhs).norm());
        }
    }
    dev
}

/// Polar decomposition of the closure of `xΩ ↦ x*Ω`.
pub fn modular_from_vector(a: &FiniteAlgebra, omega: &CVec) -> Result<ModularData> {
    if omega.len() != a.dim {
        return Err(LabError::DimensionMismatch("vector and algebra dimensions differ".into()));
    }
    let cs = cyclic_separating(a, omega);
    if !cs.cyclic || !cs.separating {
        return Err(LabError::NotCyclicSeparating(format!(
            "rank {} for space {} and algebra {}",
            cs.cyclic_rank, cs.hilbert_dim, cs.algebra_dim
        )));
    }
    let v = orbit_matrix(a, omega);
    let w = CMat::from_columns(&a.basis.iter().map(|x| x.adjoint() * omega).collect::<Vec<_>>());
    let v_inv = v
        .try_inverse()
        .ok_or_else(|| LabError::NotCyclicSeparating("orbit matrix is singular".into()))?;
    let s = w * v_inv.map(|z| z.conj());
    let delta = (s.adjoint() * &s).map(|z| z.conj());
    let delta = (&delta + delta.adjoint()) * c(0.5, 0.0);
    let inv_sqrt = hermitian_fn(&delta, |x| 1.0 / x.sqrt());
    let j = &s * inv_sqrt.map(|z| z.conj());
    Ok(ModularData {
        delta,
        j,
        s,
        omega: omega.clone(),
    })
}

/// Commutant through the vector: each `ξ` determines `z ∈ A'` with `zΩ = ξ` by
/// `z x_a Ω = x_a ξ`.
pub fn commutant_via_vector(a: &FiniteAlgebra, omega: &CVec) -> Result<FiniteAlgebra> {
    let cs = cyclic_separating(a, omega);
    if !cs.cyclic || !cs.separating {
        return Err(LabError::NotCyclicSeparating("commutant needs a cyclic separating vector".into()));
    }
    let v_inv = orbit_matrix(a, omega)
        .try_inverse()
        .ok_or_else(|| LabError::Singular("orbit matrix".into()))?;
    let mut ops = Vec::with_capacity(a.dim);
    for i in 0..a.dim {
        let cols: Vec<CVec> = a.basis.iter().map(|x| x.column(i).into_owned()).collect();
        ops.push(CMat::from_columns(&cols) * &v_inv);
    }
    Ok(span_of(a.dim, &ops, Vec::new()))
}

/// Checks `AdV(κ)(M) = M` on the generators for a handful of group elements.
fn check_stable(m: &FiniteAlgebra, grading: &ChargeGrading, tol: f64) -> Result<()> {
    let kappas: Vec<f64> = match grading.group {
        Group::Cyclic(n) => (1..n).map(|k| k as f64 / n as f64).collect(),
        Group::Circle => vec![0.1, 0.37, 0.5],
    };
    for kappa in kappas {
        let u = grading.unitary(kappa);
        for b in &m.basis {
            let r = m.residual(&(&u * b * u.adjoint()));
            if r > tol {
                return Err(LabError::Grading(format!(
                    "AdV({kappa}) leaves the algebra (residual {r:.2e})"
                )));
            }
        }
    }
    Ok(())
}

/// `{x ⊗ 1, AdṼ(1 ⊗ y)}` closed, with `Ṽ = e^{i2πκ Q⊗Q}`.
pub fn twisted_wedge_algebra(m: &FiniteAlgebra, grading: &ChargeGrading, kappa: f64) -> Result<FiniteAlgebra> {
    if grading.dim() != m.dim {
        return Err(LabError::DimensionMismatch("grading and algebra dimensions differ".into()));
    }
    check_stable(m, grading, 1e-9)?;
    let t = twist_unitary(grading, grading, kappa).to_dense();
    let id = identity(m.dim);
    let gens = twisted_generators(&m.generators, &m.generators, &t, &id);
    algebra_closure(&gens, 4 * m.dim * m.dim)
}

fn twisted_generators(left: &[CMat], right: &[CMat], t: &CMat, id: &CMat) -> Vec<CMat> {
    let mut gens: Vec<CMat> = left.iter().map(|x| kron(x, id)).collect();
    gens.extend(right.iter().map(|y| t * kron(id, y) * t.adjoint()));
    gens
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModularReport {
    pub delta_deviation: f64,
    pub j_deviation: f64,
    pub kms_deviation: f64,
    pub invariant_deviation: f64,
    pub max_deviation: f64,
    pub dims: Vec<usize>,
    pub pass: bool,
}

/// Compares the modular data of the twisted algebra with `Δ⊗Δ` and `Ṽ(J⊗J)`.
pub fn verify_modular_twisted<R: Rng>(
    m: &FiniteAlgebra,
    grading: &ChargeGrading,
    kappa: f64,
    omega: &CVec,
    tol: f64,
    rng: &mut R,
) -> Result<ModularReport> {
    let mt = twisted_wedge_algebra(m, grading, kappa)?;
    verify_modular_twisted_with(m, &mt, grading, kappa, omega, tol, rng)
}

/// As [`verify_modular_twisted`] with the twisted algebra already built.
pub fn verify_modular_twisted_with<R: Rng>(
    m: &FiniteAlgebra,
    mt: &FiniteAlgebra,
    grading: &ChargeGrading,
    kappa: f64,
    omega: &CVec,
    tol: f64,
    rng: &mut R,
) -> Result<ModularReport> {
    let md = modular_from_vector(m, omega)?;
    let omega_t = kron_vec(omega, omega);
    let mdt = modular_from_vector(mt, &omega_t)?;
    let delta_tensor = kron(&md.delta, &md.delta);
    let twist = twist_unitary(grading, grading, kappa).to_dense();
    let j_candidate = &twist * kron(&md.j, &md.j);
    let delta_inv = hermitian_fn(&delta_tensor, |x| 1.0 / x);
    let xs: Vec<CMat> = (0..20).map(|_| mt.random_element(rng)).collect();
    let ys: Vec<CMat> = (0..20).map(|_| mt.random_element(rng)).collect();
    let norm = xs.iter().chain(&ys).map(max_abs).fold(1.0, f64::max);
    let kms = kms_with(&delta_tensor, &delta_inv, &omega_t, &xs, &ys) / (norm * norm);
    let delta_deviation = max_abs(&(&mdt.delta - &delta_tensor));
    let j_deviation = max_abs(&(&mdt.j - &j_candidate));
    let invariant_deviation = md.invariant_deviation().max(mdt.invariant_deviation());
    let max_deviation = delta_deviation.max(j_deviation).max(kms).max(invariant_deviation);
    Ok(ModularReport {
        delta_deviation,
        j_deviation,
        kms_deviation: kms,
        invariant_deviation,
        max_deviation,
        dims: vec![m.dim, m.len(), mt.dim, mt.len()],
        pass: max_deviation <= tol,
    })
}

/// Two fixed generic combinations of the basis. A generic pair generates any finite-dimensional
/// *-algebra; the coefficients come from a fixed seed so results stay reproducible.
fn generic_generators(a: &FiniteAlgebra) -> Vec<CMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6765_6e65_7269_63);
    (0..2).map(|_| a.random_element(&mut rng)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutantReport {
    pub commutant_dim: usize,
    pub formula_dim: usize,
    pub span_distance: f64,
    pub commutation_residual: f64,
    /// Distance between vector-based and brute-force commutants, when the latter is affordable.
    pub brute_force_distance: Option<f64>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Commutant of the twisted algebra against the closure of `{AdṼ(x' ⊗ 1), 1 ⊗ y'}`.
pub fn verify_commutant_twisted(
    m: &FiniteAlgebra,
    grading: &ChargeGrading,
    kappa: f64,
    omega: &CVec,
    tol: f64,
) -> Result<CommutantReport> {
    let mt = twisted_wedge_algebra(m, grading, kappa)?;
    verify_commutant_twisted_with(m, &mt, grading, kappa, omega, tol)
}

/// As [`verify_commutant_twisted`] with the twisted algebra already built.
pub fn verify_commutant_twisted_with(
    m: &FiniteAlgebra,
    mt: &FiniteAlgebra,
    grading: &ChargeGrading,
    kappa: f64,
    omega: &CVec,
    tol: f64,
) -> Result<CommutantReport> {
    let omega_t = kron_vec(omega, omega);
    let cs = cyclic_separating(mt, &omega_t);
    let brute_ok = mt.dim <= 20;
    let (computed, brute_force_distance) = if cs.cyclic && cs.separating {
        let via = commutant_via_vector(mt, &omega_t)?;
        let bf = if brute_ok {
            let b = span_of(mt.dim, &commutant_brute_force(mt.basis(), 1e-6)?, Vec::new());
            Some(subspace_distance(&via.basis_matrix(), &b.basis_matrix()))
        } else {
            None
        };
        (via, bf)
    } else if brute_ok {
        (span_of(mt.dim, &commutant_brute_force(mt.basis(), 1e-6)?, Vec::new()), None)
    } else {
        return Err(LabError::NotCyclicSeparating(
            "vector is not cyclic and separating and the space is too large for brute force".into(),
        ));
    };
    let m_prime = if m.dim <= 20 {
        span_of(m.dim, &commutant_brute_force(m.basis(), 1e-6)?, Vec::new())
    } else {
        commutant_via_vector(m, omega)?
    };
    let t = twist_unitary(grading, grading, kappa).to_dense();
    let id = identity(m.dim);
    // AdṼ(· ⊗ 1) is a homomorphism, so generators of M' suffice on both sides.
    let prime_gens = generic_generators(&m_prime);
    let mut formula_gens: Vec<CMat> = prime_gens.iter().map(|x| &t * kron(x, &id) * t.adjoint()).collect();
    formula_gens.extend(prime_gens.iter().map(|y| kron(&id, y)));
    let formula = algebra_closure(&formula_gens, 4 * mt.dim * mt.dim)?;
    let span_distance = subspace_distance(&computed.basis_matrix(), &formula.basis_matrix());
    let mut residual = 0.0_f64;
    for z in formula.basis() {
        for x in mt.generators() {
            residual = residual.max(max_abs(&(z * x - x * z)));
        }
    }
    let max_deviation = span_distance
        .max(residual)
        .max(brute_force_distance.unwrap_or(0.0));
    Ok(CommutantReport {
        commutant_dim: computed.len(),
        formula_dim: formula.len(),
        span_distance,
        commutation_residual: residual,
        brute_force_distance,
        max_deviation,
        pass: computed.len() == formula.len() && max_deviation <= tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub twisted_dim: usize,
    pub center_dim: usize,
    pub fixed_point_dim: usize,
    pub projection_rank: usize,
    /// `dim span{p b p : b ∈ R^α}`; 1 for a minimal projection.
    pub corner_dim_fixed: usize,
    /// `dim span{p̃ b p̃ : b ∈ R̃}` for `p̃ = p ⊗ p`.
    pub corner_dim_twisted: usize,
    pub membership_residual: f64,
    pub fixed_point_invariance: f64,
    pub pass: bool,
}

/// Trivial center of `R̃` and a minimal projection `p ⊗ p` with `p` minimal in `R^α`.
pub fn factor_and_minimal_projection<R: Rng>(
    r: &FiniteAlgebra,
    grading: &ChargeGrading,
    kappa: f64,
    rng: &mut R,
) -> Result<FactorReport> {
    let rt = twisted_wedge_algebra(r, grading, kappa)?;
    let prime = span_of(rt.dim, &commutant_brute_force(rt.basis(), 1e-6)?, Vec::new());
    let center_dim = intersection_dim(&rt.basis_matrix(), &prime.basis_matrix(), 1e-8);
    let fixed_ops: Vec<CMat> = r.basis().iter().map(|b| fourier_component(b, grading, 0)).collect();
    let fixed = span_of(r.dim, &fixed_ops, Vec::new());
    let p = minimal_spectral_projection(&fixed, rng)?;
    let corner_dim_fixed = corner_dim(&p, fixed.basis());
    let pt = kron(&p, &p);
    let corner_dim_twisted = corner_dim(&pt, rt.basis());
    let membership = fixed.residual(&p).max(rt.residual(&pt));
    let t = twist_unitary(grading, grading, kappa).to_dense();
    let id = identity(r.dim);
    let mut invariance = 0.0_f64;
    for y in fixed.basis() {
        let y1 = kron(&id, y);
        invariance = invariance.max(max_abs(&(&t * &y1 * t.adjoint() - &y1)));
    }
    let projection_rank = rank(&p, 1e-8);
    Ok(FactorReport {
        twisted_dim: rt.len(),
        center_dim,
        fixed_point_dim: fixed.len(),
        projection_rank,
        corner_dim_fixed,
        corner_dim_twisted,
        membership_residual: membership,
        fixed_point_invariance: invariance,
        pass: center_dim == 1
            && corner_dim_fixed == 1
            && corner_dim_twisted == 1
            && membership < 1e-9
            && invariance < 1e-12,
    })
}

/// Spectral projection of a random Hermitian element for its lowest eigenvalue.
fn minimal_spectral_projection<R: Rng>(a: &FiniteAlgebra, rng: &mut R) -> Result<CMat> {
    let h = a.random_hermitian(rng);
    let (vals, vecs) = hermitian_eig(&h);
    let (imin, &vmin) = vals
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
        .ok_or_else(|| LabError::Singular("empty algebra".into()))?;
    let mut p = CMat::zeros(a.dim, a.dim);
    for (k, &v) in vals.iter().enumerate() {
        if (v - vmin).abs() < 1e-8 || k == imin {
            let col = vecs.column(k);
            p += &col * col.adjoint();
        }
    }
    Ok(p)
}

/// Rank of `{p b p}` relative to the largest singular value; the products are not normalized
/// one by one, since a tiny `p b p` would otherwise promote rounding noise to a direction.
fn corner_dim(p: &CMat, basis: &[CMat]) -> usize {
    let cols: Vec<CVec> = basis.iter().map(|b| vectorize(&(p * b * p))).collect();
    rank(&CMat::from_columns(&cols), 1e-8)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub order: u32,
    pub k: i64,
    pub samples: usize,
    /// Largest `‖x̃‖ / ‖τ_k(x̃)‖`; the bound asks for at most `N²`.
    pub max_ratio: f64,
    pub bound: f64,
    /// Largest `‖τ_k(x̃)Ω̃ − x̃Ω̃‖ / ‖x̃‖`.
    pub vector_deviation: f64,
    /// Largest `‖x̃ − Σ x̃_{l,m}‖ / ‖x̃‖`.
    pub reconstruction_deviation: f64,
    /// Largest relative distance of `τ_{−k}(x̃)` from `M ⊗ M` and of `τ_k(x ⊗ y)` from the
    /// twisted algebra.
    pub image_residual: f64,
    pub pass: bool,
}

/// `τ_k` on random elements of the twisted algebra with `κ = k/N`: norm bound and unchanged action
/// on `Ω̃`. With `Ṽ = e^{i2πκ Q⊗Q}`, `τ_k` carries `M ⊗ M` onto the twisted algebra and `τ_{−k}`
/// carries it back; both directions are checked.
pub fn verify_tau_bound<R: Rng>(
    m: &FiniteAlgebra,
    grading: &ChargeGrading,
    k: i64,
    omega: &CVec,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> Result<TauReport> {
    let n = match grading.group {
        Group::Cyclic(n) => n,
        Group::Circle => return Err(LabError::Grading("τ_k needs a cyclic grading".into())),
    };
    let kappa = k.rem_euclid(n as i64) as f64 / n as f64;
    let twisted = twisted_wedge_algebra(m, grading, kappa)?;
    let plain = twisted_wedge_algebra(m, grading, 0.0)?;
    let omega_t = kron_vec(omega, omega);
    let mut report = TauReport {
        order: n,
        k,
        samples,
        max_ratio: 0.0,
        bound: (n * n) as f64,
        vector_deviation: 0.0,
        reconstruction_deviation: 0.0,
        image_residual: 0.0,
        pass: false,
    };
    for _ in 0..samples {
        let x = twisted.random_element(rng);
        let nx = op_norm(&x);
        let t = tau_k(&x, grading, k)?;
        let mut sum = CMat::zeros(x.nrows(), x.ncols());
        for l in 0..n as i64 {
            for mm in 0..n as i64 {
                sum += double_fourier_component(&x, grading, l, mm)?;
            }
        }
        report.max_ratio = report.max_ratio.max(nx / op_norm(&t));
        report.vector_deviation = report.vector_deviation.max((&t * &omega_t - &x * &omega_t).norm() / nx);
        report.reconstruction_deviation = report.reconstruction_deviation.max(op_norm(&(sum - &x)) / nx);
        let back = tau_k(&x, grading, -k)?;
        let forward = tau_k(&plain.random_element(rng), grading, k)?;
        report.image_residual = report
            .image_residual
            .max(plain.residual(&back))
            .max(twisted.residual(&forward));
    }
    report.pass = report.max_ratio <= report.bound
        && report.vector_deviation <= tol
        && report.reconstruction_deviation <= tol
        && report.image_residual <= tol;
    Ok(report)
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    CVec::from_iterator(a.len() * b.len(), a.iter().flat_map(|x| b.iter().map(move |y| x * y)))
}

/// The toy `M_n ⊗ 1` on `C^n ⊗ C^n` with `Ω = Σ √λ_i e_i ⊗ e_i` and the grading of
/// `u ⊗ ū`, `u = diag(e^{i2πq_i/N})`.
#[derive(Clone, Debug)]
pub struct ToyModel {
    pub n: usize,
    pub order: u32,
    pub charges: Vec<i64>,
    pub lambda: Vec<f64>,
    pub algebra: FiniteAlgebra,
    pub grading: ChargeGrading,
    pub omega: CVec,
}

/// Generators `E_{11}` and the cyclic shift of `M_n`.
pub fn matrix_algebra_generators(n: usize) -> Vec<CMat> {
    let mut e11 = CMat::zeros(n, n);
    e11[(0, 0)] = c(1.0, 0.0);
    let shift = CMat::from_fn(n, n, |i, j| if i == (j + 1) % n { c(1.0, 0.0) } else { c(0.0, 0.0) });
    if n == 1 {
        vec![e11]
    } else {
        vec![e11, shift]
    }
}

pub fn toy_model(charges: &[i64], order: u32, lambda: &[f64]) -> Result<ToyModel> {
    let n = charges.len();
    if n == 0 || lambda.len() != n {
        return Err(LabError::InvalidParameter("charges and weights must have the same positive length".into()));
    }
    if order == 0 {
        return Err(LabError::InvalidParameter("group order must be positive".into()));
    }
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(LabError::InvalidParameter("weights must be positive".into()));
    }
    let total: f64 = lambda.iter().sum();
    let lambda: Vec<f64> = lambda.iter().map(|l| l / total).collect();
    let id = identity(n);
    let gens: Vec<CMat> = matrix_algebra_generators(n).iter().map(|g| kron(g, &id)).collect();
    let algebra = algebra_closure(&gens, 2 * n * n)?;
    let nn = order as i64;
    let labels = (0..n * n)
        .map(|k| (charges[k / n] - charges[k % n]).rem_euclid(nn))
        .collect();
    let grading = ChargeGrading::new(labels, Group::Cyclic(order))?;
    let mut omega = CVec::zeros(n * n);
    for i in 0..n {
        omega[i * n + i] = c(lambda[i].sqrt(), 0.0);
    }
    Ok(ToyModel {
        n,
        order,
        charges: charges.to_vec(),
        lambda,
        algebra,
        grading,
        omega,
    })
}

/// `M_n` acting irreducibly on `C^n`, graded by `diag(e^{i2πq_i/N})`.
pub fn irreducible_toy(charges: &[i64], order: u32) -> Result<(FiniteAlgebra, ChargeGrading)> {
    let n = charges.len();
    let algebra = algebra_closure(&matrix_algebra_generators(n), 2 * n * n)?;
    let labels = charges.iter().map(|q| q.rem_euclid(order as i64)).collect();
    Ok((algebra, ChargeGrading::new(labels, Group::Cyclic(order))?))
}

/// Toy weights drawn from `[0.1, 1)`, before normalization.
pub fn random_weights<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.1..1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closure_of_identity_and_matrix_units() {
        let a = algebra_closure(&[identity(3)], 3).unwrap();
        assert_eq!(a.len(), 1);
        let b = algebra_closure(&matrix_algebra_generators(2), 4).unwrap();
        assert_eq!(b.len(), 4);
    }

    #[test]
    fn closure_reports_instability() {
        // The shift generates all of M_4 only at degree 3 and beyond.
        let shift = CMat::from_fn(4, 4, |i, j| if i == (j + 1) % 4 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let e11 = diag(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(algebra_closure(&[shift.clone(), e11.clone()], 1), Err(LabError::ClosureNotStable(1))));
        assert_eq!(algebra_closure(&[shift, e11], 16).unwrap().len(), 16);
    }

    #[test]
    fn tracial_vector_has_trivial_modular_operator() {
        let toy = toy_model(&[0, 1, 2], 3, &[1.0, 1.0, 1.0]).unwrap();
        let md = modular_from_vector(&toy.algebra, &toy.omega).unwrap();
        assert!(max_abs(&(&md.delta - identity(9))) < 1e-12);
        assert!(md.invariant_deviation() < 1e-12);
    }

    #[test]
    fn standard_form_modular_operator() {
        let toy = toy_model(&[0, 1], 2, &[0.8, 0.2]).unwrap();
        let md = modular_from_vector(&toy.algebra, &toy.omega).unwrap();
        let rho = diag(&[c(0.8, 0.0), c(0.2, 0.0)]);
        let rho_inv = diag(&[c(1.25, 0.0), c(5.0, 0.0)]);
        assert!(max_abs(&(&md.delta - kron(&rho, &rho_inv))) < 1e-12);
        assert!(md.invariant_deviation() < 1e-12);
        assert!(md.kms_deviation(&toy.algebra) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let half = hermitian_fn(&md.delta, f64::sqrt);
        for _ in 0..50 {
            let x = toy.algebra.random_element(&mut rng);
            let lhs = &md.j * (&half * (&x * &toy.omega)).map(|z| z.conj());
            let rhs = x.adjoint() * &toy.omega;
            assert!(max_abs_vec(&(lhs - rhs)) < 1e-12);
        }
    }

    #[test]
    fn non_cyclic_vector_rejected() {
        let toy = toy_model(&[0, 1], 2, &[0.5, 0.5]).unwrap();
        let mut bad = CVec::zeros(4);
        bad[0] = c(1.0, 0.0);
        assert!(matches!(
            modular_from_vector(&toy.algebra, &bad),
            Err(LabError::NotCyclicSeparating(_))
        ));
    }

    #[test]
    fn zero_twist_gives_tensor_product() {
        let toy = toy_model(&[0, 1], 2, &[0.7, 0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = verify_modular_twisted(&toy.algebra, &toy.grading, 0.0, &toy.omega, 1e-10, &mut rng).unwrap();
        assert!(r.pass, "{r:?}");
        let mt = twisted_wedge_algebra(&toy.algebra, &toy.grading, 0.0).unwrap();
        let product = algebra_closure(
            &toy.algebra
                .generators()
                .iter()
                .flat_map(|g| [kron(g, &identity(4)), kron(&identity(4), g)])
                .collect::<Vec<_>>(),
            64,
        )
        .unwrap();
        assert!(subspace_distance(&mt.basis_matrix(), &product.basis_matrix()) < 1e-10);
    }

    #[test]
    fn twisted_modular_data_for_two_level_toy() {
        let toy = toy_model(&[0, 1], 2, &[0.8, 0.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = verify_modular_twisted(&toy.algebra, &toy.grading, 0.5, &toy.omega, 1e-10, &mut rng).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn twisted_algebra_is_its_double_commutant() {
        let toy = toy_model(&[0, 1], 2, &[0.8, 0.2]).unwrap();
        let mt = twisted_wedge_algebra(&toy.algebra, &toy.grading, 0.5).unwrap();
        let prime = commutant_brute_force(mt.generators(), 1e-6).unwrap();
        let double = span_of(16, &commutant_brute_force(&prime, 1e-6).unwrap(), Vec::new());
        assert_eq!(double.len(), mt.len());
        assert!(subspace_distance(&mt.basis_matrix(), &double.basis_matrix()) < 1e-9);
        let cs = cyclic_separating(&mt, &kron_vec(&toy.omega, &toy.omega));
        assert!(cs.cyclic && cs.separating);
    }

    #[test]
    fn commutant_formula_for_two_level_toy() {
        let toy = toy_model(&[0, 1], 2, &[0.8, 0.2]).unwrap();
        let r = verify_commutant_twisted(&toy.algebra, &toy.grading, 0.5, &toy.omega, 1e-10).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.brute_force_distance.unwrap() < 1e-10);
        let r0 = verify_commutant_twisted(&toy.algebra, &toy.grading, 0.0, &toy.omega, 1e-10).unwrap();
        assert!(r0.pass, "{r0:?}");
    }

    #[test]
    fn full_matrix_algebra_has_scalar_commutant() {
        let (a, g) = irreducible_toy(&[0, 1], 2).unwrap();
        let omega = CVec::from_column_slice(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let r = verify_commutant_twisted(&a, &g, 0.5, &omega, 1e-10).unwrap();
        assert_eq!(r.commutant_dim, 1);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn factor_with_minimal_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, g) = irreducible_toy(&[0, 1], 2).unwrap();
        let r = factor_and_minimal_projection(&a, &g, 0.5, &mut rng).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.fixed_point_dim, 2);
        assert_eq!(r.projection_rank, 1);
        let (a0, g0) = irreducible_toy(&[0, 0], 2).unwrap();
        let r0 = factor_and_minimal_projection(&a0, &g0, 0.5, &mut rng).unwrap();
        assert!(r0.pass && r0.fixed_point_dim == 4, "{r0:?}");
    }

    #[test]
    fn grading_must_preserve_algebra() {
        let toy = toy_model(&[0, 1], 2, &[0.8, 0.2]).unwrap();
        // Labels that are not of the form q_i − q_j do not normalize M_2 ⊗ 1.
        let bad = ChargeGrading::new(vec![0, 1, 1, 1], Group::Cyclic(2)).unwrap();
        assert!(matches!(
            twisted_wedge_algebra(&toy.algebra, &bad, 0.5),
            Err(LabError::Grading(_))
        ));
    }

    #[test]
    fn three_level_toy_with_cyclic_twist() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_weights(3, &mut rng);
        let toy = toy_model(&[0, 1, 2], 3, &w).unwrap();
        let r = verify_modular_twisted(&toy.algebra, &toy.grading, 1.0 / 3.0, &toy.omega, 1e-10, &mut rng).unwrap();
        assert!(r.pass, "{r:?}");
        let c = verify_commutant_twisted(&toy.algebra, &toy.grading, 2.0 / 3.0, &toy.omega, 1e-10).unwrap();
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn tau_bound_on_toys() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (charges, order) in [(vec![0, 1], 2_u32), (vec![0, 1, 2], 3)] {
            let w = random_weights(charges.len(), &mut rng);
            let toy = toy_model(&charges, order, &w).unwrap();
            for k in 1..order as i64 {
                let r = verify_tau_bound(&toy.algebra, &toy.grading, k, &toy.omega, 10, 1e-10, &mut rng).unwrap();
                assert!(r.pass, "{r:?}");
                assert!(r.max_ratio >= 1.0 - 1e-12);
            }
        }
    }
}
