//! Charge gradings, twist unitaries `e^{i2πκ Q⊗Q}`, Fourier components of the adjoint
//! action, the `τ_k` map and the Longo-Witten operator `R̃`.
//!
//! Operators diagonal on a tensor product `H_A ⊗ H_B` are stored as `dim_A × dim_B` arrays of
//! entries ([`TensorDiagonal`]); the Kronecker index is `a * dim_B + b`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fock::FockSpace;
use crate::linalg::{c, cis, max_abs, CMat, CVec, C64};
use crate::scatfunc::{Domain, ScatteringFunction};
use crate::sparse::CsrMatrix;

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    Circle,
    Cyclic(u32),
}

/// Integer charge per basis vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeGrading {
    pub labels: Vec<i64>,
    pub group: Group,
}

impl ChargeGrading {
    pub fn new(labels: Vec<i64>, group: Group) -> Result<Self> {
        if let Group::Cyclic(n) = group {
            if n == 0 {
                return Err(LabError::Grading("cyclic group of order 0".into()));
            }
            if let Some(l) = labels.iter().find(|&&l| l < 0 || l >= n as i64) {
                return Err(LabError::Grading(format!("label {l} outside 0..{n}")));
            }
        }
        Ok(Self { labels, group })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// `V(κ) = e^{i2πκQ}` as a diagonal of phases.
    pub fn phases(&self, kappa: f64) -> Vec<C64> {
        self.labels.iter().map(|&l| cis(TAU * kappa * l as f64)).collect()
    }

    pub fn unitary(&self, kappa: f64) -> CMat {
        crate::linalg::diag(&self.phases(kappa))
    }

    /// The generator `V = V(1/N)` of a cyclic grading.
    pub fn generator(&self) -> Result<CMat> {
        match self.group {
            Group::Cyclic(n) => Ok(self.unitary(1.0 / n as f64)),
            Group::Circle => Err(LabError::Grading("circle gradings have no generator".into())),
        }
    }

    fn max_label_spread(&self) -> i64 {
        let lo = self.labels.iter().cloned().min().unwrap_or(0);
        let hi = self.labels.iter().cloned().max().unwrap_or(0);
        hi - lo
    }
}

/// Grading of a Fock space from per-species charges: a basis vector carries the sum of the
/// charges of its particles.
pub fn fock_grading(space: &FockSpace, species_charge: &[i64]) -> Result<ChargeGrading> {
    if species_charge.len() != space.n_species() {
        return Err(LabError::DimensionMismatch(format!(
            "{} charges for {} species",
            species_charge.len(),
            space.n_species()
        )));
    }
    let labels = (0..space.dim())
        .map(|i| {
            space
                .basis_label(i)
                .1
                .iter()
                .map(|&m| species_charge[space.mode_species(m)])
                .sum()
        })
        .collect();
    ChargeGrading::new(labels, Group::Circle)
}

/// Reads off the grading of a unitary `V` with `V^N = 1` and `VΩ = Ω`, through the spectral
/// projections `V̂(j) = (1/N) Σ_k e^{−i2πjk/N} V^k`.
pub fn grading_from_unitary(v: &CMat, n: u32, omega: &CVec, tol: f64) -> Result<ChargeGrading> {
    let dim = v.nrows();
    if v.ncols() != dim || omega.len() != dim {
        return Err(LabError::DimensionMismatch("grading unitary shape".into()));
    }
    if n == 0 {
        return Err(LabError::Grading("order must be positive".into()));
    }
    let id = CMat::identity(dim, dim);
    let mut powers = vec![id.clone()];
    for k in 1..=n as usize {
        powers.push(&powers[k - 1] * v);
    }
    if max_abs(&(&powers[n as usize] - &id)) > tol {
        return Err(LabError::Grading(format!("V^{n} differs from the identity")));
    }
    if crate::linalg::max_abs_vec(&(v * omega - omega)) > tol {
        return Err(LabError::Grading("V does not fix the vacuum".into()));
    }
    let mut projectors = Vec::with_capacity(n as usize);
    for j in 0..n as usize {
        let mut p = CMat::zeros(dim, dim);
        for (k, vk) in powers.iter().take(n as usize).enumerate() {
            p += vk * cis(-TAU * (j * k) as f64 / n as f64);
        }
        projectors.push(p / c(n as f64, 0.0));
    }
    let mut total = CMat::zeros(dim, dim);
    for (j, p) in projectors.iter().enumerate() {
        if max_abs(&(p - p.adjoint())) > tol || max_abs(&(p * p - p)) > tol {
            return Err(LabError::Grading(format!("V̂({j}) is not an orthogonal projection")));
        }
        for q in projectors.iter().skip(j + 1) {
            if max_abs(&(p * q)) > tol {
                return Err(LabError::Grading("spectral projections overlap".into()));
            }
        }
        total += p;
    }
    if max_abs(&(total - &id)) > tol {
        return Err(LabError::Grading("spectral projections do not sum to 1".into()));
    }
    let mut q = CMat::zeros(dim, dim);
    for (j, p) in projectors.iter().enumerate() {
        q += p * c(j as f64, 0.0);
    }
    let mut labels = Vec::with_capacity(dim);
    for i in 0..dim {
        for r in 0..dim {
            if r != i && q[(r, i)].norm() > tol {
                return Err(LabError::Grading("V is not diagonal in the given basis".into()));
            }
        }
        let l = q[(i, i)].re;
        if (l - l.round()).abs() > tol {
            return Err(LabError::Grading(format!("non-integer label {l}")));
        }
        labels.push(l.round() as i64);
    }
    ChargeGrading::new(labels, Group::Cyclic(n))
}

/// Operator diagonal on `H_A ⊗ H_B`, stored as the `dim_A × dim_B` array of its entries.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorDiagonal {
    pub values: CMat,
}

impl TensorDiagonal {
    pub fn dims(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn to_dense(&self) -> CMat {
        let (da, db) = self.dims();
        let d = CVec::from_iterator(da * db, (0..da * db).map(|k| self.values[(k / db, k % db)]));
        CMat::from_diagonal(&d)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            values: self.values.map(|z| z.conj()),
        }
    }

    /// Action on a state stored as a `dim_A × dim_B` coefficient array.
    pub fn apply(&self, x: &CMat) -> CMat {
        self.values.component_mul(x)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.values.iter().all(|z| (z.norm() - 1.0).abs() <= tol)
    }
}

/// `e^{i2πκ Q_A⊗Q_B}`.
pub fn twist_unitary(ga: &ChargeGrading, gb: &ChargeGrading, kappa: f64) -> TensorDiagonal {
    TensorDiagonal {
        values: CMat::from_fn(ga.dim(), gb.dim(), |a, b| {
            cis(TAU * kappa * (ga.labels[a] * gb.labels[b]) as f64)
        }),
    }
}

/// `e^{i(2πk/N) Q⊗Q}` for a cyclic grading.
pub fn twist_unitary_cyclic(ga: &ChargeGrading, gb: &ChargeGrading, k: i64) -> Result<TensorDiagonal> {
    match (ga.group, gb.group) {
        (Group::Cyclic(n), Group::Cyclic(m)) if n == m => Ok(twist_unitary(ga, gb, k as f64 / n as f64)),
        _ => Err(LabError::Grading("cyclic twist needs two gradings of the same order".into())),
    }
}

/// Samples of the circle that make the Fourier sum exact for the grading's label spread.
fn circle_samples(grading: &ChargeGrading) -> usize {
    (2 * grading.max_label_spread() + 1) as usize
}

/// `x_l`: the part of `x` transforming as `AdV(κ)(x_l) = e^{i2πlκ} x_l`.
///
/// Computed from the defining average of `AdV(κ)(x) e^{−i2πlκ}` over `κ ∈ {j/K}`, with `K = N`
/// for cyclic gradings and `K` larger than every label difference for circle gradings.
pub fn fourier_component(x: &CMat, grading: &ChargeGrading, l: i64) -> CMat {
    let k = match grading.group {
        Group::Cyclic(n) => n as usize,
        Group::Circle => circle_samples(grading),
    };
    let mut out = CMat::zeros(x.nrows(), x.ncols());
    for j in 0..k {
        let kappa = j as f64 / k as f64;
        let v = grading.phases(kappa);
        let ad = CMat::from_fn(x.nrows(), x.ncols(), |a, b| v[a] * x[(a, b)] * v[b].conj());
        out += ad * cis(-TAU * l as f64 * kappa);
    }
    out / c(k as f64, 0.0)
}

/// Range of `l` carrying nonzero components.
pub fn fourier_labels(grading: &ChargeGrading) -> Vec<i64> {
    match grading.group {
        Group::Cyclic(n) => (0..n as i64).collect(),
        Group::Circle => {
            let s = grading.max_label_spread();
            (-s..=s).collect()
        }
    }
}

/// Bi-graded component `x̃_{l,m}` of an operator on `H ⊗ H` under `Ad(V^{j₁} ⊗ V^{j₂})`.
pub fn double_fourier_component(xt: &CMat, grading: &ChargeGrading, l: i64, m: i64) -> Result<CMat> {
    let n = match grading.group {
        Group::Cyclic(n) => n as usize,
        Group::Circle => return Err(LabError::Grading("double Fourier needs a cyclic grading".into())),
    };
    let d = grading.dim();
    if xt.nrows() != d * d || xt.ncols() != d * d {
        return Err(LabError::DimensionMismatch("operator is not on H ⊗ H".into()));
    }
    let mut out = CMat::zeros(d * d, d * d);
    for j1 in 0..n {
        for j2 in 0..n {
            let v1 = grading.phases(j1 as f64 / n as f64);
            let v2 = grading.phases(j2 as f64 / n as f64);
            let ph = |k: usize| v1[k / d] * v2[k % d];
            let ad = CMat::from_fn(d * d, d * d, |a, b| ph(a) * xt[(a, b)] * ph(b).conj());
            out += ad * cis(-TAU * (j1 as i64 * l + j2 as i64 * m) as f64 / n as f64);
        }
    }
    Ok(out / c((n * n) as f64, 0.0))
}

/// `τ_k(x̃) = Σ_{l,m} x̃_{l,m} (V^{km} ⊗ 1)`. Entry `(a, b)` of `x̃` lies in the component with
/// `m = q₂(a) − q₂(b)`, and `V^{km} ⊗ 1` is diagonal, so the sum is an entrywise phase.
pub fn tau_k(xt: &CMat, grading: &ChargeGrading, k: i64) -> Result<CMat> {
    let n = match grading.group {
        Group::Cyclic(n) => n as i64,
        Group::Circle => return Err(LabError::Grading("τ_k needs a cyclic grading".into())),
    };
    let d = grading.dim();
    if xt.nrows() != d * d || xt.ncols() != d * d {
        return Err(LabError::DimensionMismatch("operator is not on H ⊗ H".into()));
    }
    let q = &grading.labels;
    let roots: Vec<C64> = (0..n).map(|j| cis(TAU * j as f64 / n as f64)).collect();
    Ok(CMat::from_fn(d * d, d * d, |a, b| {
        let m = q[a % d] - q[b % d];
        xt[(a, b)] * roots[(k * m * q[b / d]).rem_euclid(n) as usize]
    }))
}

/// `R̃ = ⊕ R_φ^{m,n}`: diagonal on `space_a ⊗ space_b` with entry `Π_{j,k} φ(p'_k / p_j)`, where
/// `p_j` are the lightlike momenta `m e^θ` of the first factor and `p'_k` those of the second.
pub fn build_r_tilde(phi: &ScatteringFunction, space_a: &FockSpace, space_b: &FockSpace) -> Result<TensorDiagonal> {
    if phi.domain() != Domain::HalfPlane {
        return Err(LabError::InvalidParameter(
            "R̃ needs a function of the upper half-plane".into(),
        ));
    }
    let pa = particle_points(space_a);
    let pb = particle_points(space_b);
    let mut ratio_cache = std::collections::HashMap::new();
    let mut eval = |i: usize, j: usize| -> Result<C64> {
        if let Some(&v) = ratio_cache.get(&(i, j)) {
            return Ok(v);
        }
        let v = phi.eval_real(space_b.grid().lightray_momentum(j) / space_a.grid().lightray_momentum(i))?;
        ratio_cache.insert((i, j), v);
        Ok(v)
    };
    let mut values = CMat::from_element(space_a.dim(), space_b.dim(), c(1.0, 0.0));
    for a in 0..space_a.dim() {
        for b in 0..space_b.dim() {
            let mut z = c(1.0, 0.0);
            for &i in &pa[a] {
                for &j in &pb[b] {
                    z *= eval(i, j)?;
                }
            }
            values[(a, b)] = z;
        }
    }
    Ok(TensorDiagonal { values })
}

/// Grid points of the particles of every basis vector.
fn particle_points(space: &FockSpace) -> Vec<Vec<usize>> {
    (0..space.dim())
        .map(|i| space.basis_label(i).1.iter().map(|&m| space.mode_point(m)).collect())
        .collect()
}

/// Linear maps on states `X` of `H_A ⊗ H_B` stored as `dim_A × dim_B` arrays.
pub mod tensor {
    use super::*;

    /// `(A ⊗ 1) X = A X`.
    pub fn left(a: &CsrMatrix, x: &CMat) -> CMat {
        a.mul_dense(x)
    }

    /// `(1 ⊗ B) X = X Bᵀ`, accumulated column by column.
    pub fn right(b: &CsrMatrix, x: &CMat) -> CMat {
        assert_eq!(x.ncols(), b.ncols(), "state and operator dimensions differ");
        let mut out = CMat::zeros(x.nrows(), b.nrows());
        for (r, k, v) in b.iter() {
            out.column_mut(r).axpy(v, &x.column(k), c(1.0, 0.0));
        }
        out
    }

    /// Multiplies `x` entrywise by the leading block of `t`, or of its conjugate.
    fn hadamard(t: &TensorDiagonal, mut x: CMat, conj: bool) -> CMat {
        let (r, k) = x.shape();
        assert!(r <= t.values.nrows() && k <= t.values.ncols(), "state larger than the twist");
        for j in 0..k {
            let tc = t.values.column(j);
            for (z, w) in x.column_mut(j).iter_mut().zip(tc.iter()) {
                *z *= if conj { w.conj() } else { *w };
            }
        }
        x
    }

    /// `Ad T (1 ⊗ B) X = T (1 ⊗ B) T* X`. `B` may be rectangular and `t` larger than the state;
    /// its leading blocks are used.
    pub fn twisted_right(t: &TensorDiagonal, b: &CsrMatrix, x: &CMat) -> CMat {
        hadamard(t, right(b, &hadamard(t, x.clone(), true)), false)
    }

    /// `Ad T (A ⊗ 1) X`, with the same conventions as [`twisted_right`].
    pub fn twisted_left(t: &TensorDiagonal, a: &CsrMatrix, x: &CMat) -> CMat {
        hadamard(t, left(a, &hadamard(t, x.clone(), true)), false)
    }

    /// Restricts `t` to leading blocks of the two factors.
    pub fn truncate(t: &TensorDiagonal, da: usize, db: usize) -> TensorDiagonal {
        TensorDiagonal {
            values: t.values.view((0, 0), (da, db)).into_owned(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{create, FockSpace};
    use crate::linalg::{commutator, kron, op_norm, random_matrix};
    use crate::onepspace::{make_grid, poincare_u1, OneParticleVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z2(labels: Vec<i64>) -> ChargeGrading {
        ChargeGrading::new(labels, Group::Cyclic(2)).unwrap()
    }

    fn e0(n: usize) -> CVec {
        let mut v = CVec::zeros(n);
        v[0] = c(1.0, 0.0);
        v
    }

    #[test]
    fn grading_of_identity_and_sign() {
        let g = grading_from_unitary(&CMat::identity(2, 2), 2, &e0(2), 1e-12).unwrap();
        assert_eq!(g.labels, vec![0, 0]);
        let v = crate::linalg::diag(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let g = grading_from_unitary(&v, 2, &e0(2), 1e-12).unwrap();
        // Direct eigen-decomposition: eigenvalue e^{i2πl/N} with l = 0, 1.
        assert_eq!(g.labels, vec![0, 1]);
        assert!(max_abs(&(g.generator().unwrap() - v)) < 1e-12);
    }

    #[test]
    fn grading_reconstructs_order_three_unitary() {
        let w = cis(TAU / 3.0);
        let v = crate::linalg::diag(&[c(1.0, 0.0), w, w * w, w]);
        let g = grading_from_unitary(&v, 3, &e0(4), 1e-12).unwrap();
        assert_eq!(g.labels, vec![0, 1, 2, 1]);
        assert!(max_abs(&(g.generator().unwrap() - v)) < 1e-12);
    }

    #[test]
    fn grading_errors() {
        let v = crate::linalg::diag(&[c(1.0, 0.0), c(0.0, 1.0)]);
        assert!(grading_from_unitary(&v, 2, &e0(2), 1e-12).is_err());
        let v = crate::linalg::diag(&[c(-1.0, 0.0), c(1.0, 0.0)]);
        assert!(grading_from_unitary(&v, 2, &e0(2), 1e-12).is_err());
    }

    #[test]
    fn twist_identities() {
        let ga = ChargeGrading::new(vec![0, 1, -1, 2], Group::Circle).unwrap();
        let gb = ChargeGrading::new(vec![0, -2, 1], Group::Circle).unwrap();
        for kappa in [0.0, 1.0] {
            let t = twist_unitary(&ga, &gb, kappa);
            assert!(t.values.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-12));
        }
        let t = twist_unitary(&ga, &gb, 0.37);
        assert!(t.is_unitary(1e-14));
        assert_eq!(t.to_dense().nrows(), 12);
    }

    #[test]
    fn adjoint_twist_of_graded_operator() {
        // y_m of grade m on the second factor: Ad Ṽ(1 ⊗ y_m) = V(mκ) ⊗ y_m.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ga = ChargeGrading::new(vec![0, 1, 2], Group::Circle).unwrap();
        let gb = ChargeGrading::new(vec![0, 1, 1, 2], Group::Circle).unwrap();
        let kappa = 0.23;
        let y = fourier_component(&random_matrix(4, 4, &mut rng), &gb, 1);
        let t = twist_unitary(&ga, &gb, kappa).to_dense();
        let lhs = &t * kron(&CMat::identity(3, 3), &y) * t.adjoint();
        let rhs = kron(&ga.unitary(kappa), &y);
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn fourier_components_of_sign_grading() {
        let x = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0), c(5.0, 1.0)]);
        let g = z2(vec![0, 1]);
        let x0 = fourier_component(&x, &g, 0);
        let x1 = fourier_component(&x, &g, 1);
        let diag = CMat::from_row_slice(2, 2, &[x[(0, 0)], c(0.0, 0.0), c(0.0, 0.0), x[(1, 1)]]);
        assert!(max_abs(&(&x0 - &diag)) < 1e-15);
        assert!(max_abs(&(&x1 - (&x - &diag))) < 1e-15);
        let trivial = z2(vec![0, 0]);
        assert!(max_abs(&(fourier_component(&x, &trivial, 0) - &x)) < 1e-15);
        assert!(max_abs(&fourier_component(&x, &trivial, 1)) < 1e-15);
    }

    #[test]
    fn fourier_components_reconstruct_and_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = ChargeGrading::new(vec![0, 2, -1, 1, 0], Group::Circle).unwrap();
        let x = random_matrix(5, 5, &mut rng);
        let y = random_matrix(5, 5, &mut rng);
        let mut sum = CMat::zeros(5, 5);
        for l in fourier_labels(&g) {
            let xl = fourier_component(&x, &g, l);
            let kappa = 0.31;
            let v = g.unitary(kappa);
            assert!(max_abs(&(&v * &xl * v.adjoint() - &xl * cis(TAU * l as f64 * kappa))) < 1e-12);
            sum += xl;
        }
        assert!(max_abs(&(sum - &x)) < 1e-12);
        let prod = fourier_component(&x, &g, 1) * fourier_component(&y, &g, 2);
        assert!(max_abs(&(fourier_component(&prod, &g, 3) - &prod)) < 1e-12);
    }

    #[test]
    fn tau_identity_for_k_zero_and_product_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = ChargeGrading::new(vec![0, 1, 2], Group::Cyclic(3)).unwrap();
        let xt = random_matrix(9, 9, &mut rng);
        assert!(max_abs(&(tau_k(&xt, &g, 0).unwrap() - &xt)) < 1e-12);
        let xl = fourier_component(&random_matrix(3, 3, &mut rng), &g, 1);
        let ym = fourier_component(&random_matrix(3, 3, &mut rng), &g, 2);
        let out = tau_k(&kron(&xl, &ym), &g, 1).unwrap();
        let expected = kron(&(&xl * g.unitary(2.0 / 3.0)), &ym);
        assert!(max_abs(&(out - expected)) < 1e-12);
    }

    #[test]
    fn tau_matches_component_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = ChargeGrading::new(vec![0, 2, 1, 1], Group::Cyclic(3)).unwrap();
        let xt = random_matrix(16, 16, &mut rng);
        let id = CMat::identity(4, 4);
        for k in [-1_i64, 1, 2] {
            let mut sum = CMat::zeros(16, 16);
            for l in 0..3 {
                for m in 0..3 {
                    let vkm = g.unitary((k * m).rem_euclid(3) as f64 / 3.0);
                    sum += double_fourier_component(&xt, &g, l, m).unwrap() * kron(&vkm, &id);
                }
            }
            assert!(max_abs(&(tau_k(&xt, &g, k).unwrap() - sum)) < 1e-12);
        }
    }

    #[test]
    fn tau_preserves_vacuum_action_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2u32, 3] {
            let labels: Vec<i64> = (0..3).map(|i| i % n as i64).collect();
            let g = ChargeGrading::new(labels, Group::Cyclic(n)).unwrap();
            let omega = e0(9);
            for _ in 0..10 {
                let xt = random_matrix(9, 9, &mut rng);
                let tx = tau_k(&xt, &g, 1).unwrap();
                assert!(crate::linalg::max_abs_vec(&(&tx * &omega - &xt * &omega)) < 1e-12);
                assert!(op_norm(&xt) <= (n * n) as f64 * op_norm(&tx) + 1e-12);
            }
        }
    }

    #[test]
    fn commutativity_lemma_for_stable_toy_algebra() {
        // M = block-diagonal matrices for V = diag(1, 1, −1); M' = its commutant.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = z2(vec![0, 0, 1]);
        let mut x = random_matrix(3, 3, &mut rng);
        x[(0, 2)] = c(0.0, 0.0);
        x[(1, 2)] = c(0.0, 0.0);
        x[(2, 0)] = c(0.0, 0.0);
        x[(2, 1)] = c(0.0, 0.0);
        // M' = {diag(α, α, β)}.
        let xp = crate::linalg::diag(&[c(0.4, 0.1), c(0.4, 0.1), c(-2.0, 1.0)]);
        assert!(max_abs(&commutator(&x, &xp)) < 1e-14);
        let t = twist_unitary_cyclic(&g, &g, 1).unwrap().to_dense();
        let id = CMat::identity(3, 3);
        let lhs = kron(&x, &id);
        let rhs = &t * kron(&xp, &id) * t.adjoint();
        assert!(max_abs(&commutator(&lhs, &rhs)) < 1e-12);
    }

    #[test]
    fn twist_commutes_with_translations() {
        let grid = make_grid(2.0, 3, 1.0).unwrap();
        let space = FockSpace::bosonic(grid.clone(), 2, 2).unwrap();
        let q = fock_grading(&space, &[1, -1]).unwrap();
        let t = twist_unitary(&q, &q, 0.3).to_dense();
        let u = crate::fock::second_quantize(&poincare_u1([0.5, 0.2], 0.0, &grid).unwrap().operator, &space)
            .unwrap()
            .to_dense();
        let uu = kron(&u, &u);
        assert!(max_abs(&(&t * &uu - &uu * &t)) < 1e-12);
    }

    #[test]
    fn r_tilde_entries() {
        let grid = make_grid(1.5, 4, 1.0).unwrap();
        let space = FockSpace::bosonic(grid.clone(), 1, 2).unwrap();
        let one = ScatteringFunction::constant(c(1.0, 0.0), Domain::HalfPlane);
        let r = build_r_tilde(&one, &space, &space).unwrap();
        assert!(r.values.iter().all(|z| *z == c(1.0, 0.0)));
        let phi = ScatteringFunction::half_plane_blaschke(vec![c(0.9, 0.0)]).unwrap();
        let r = build_r_tilde(&phi, &space, &space).unwrap();
        let p = |i: usize| grid.mass() * grid.theta()[i].exp();
        let eval = |z: f64| {
            let z = c(z, 0.0);
            (z - c(0.0, 0.9)) / (z + c(0.0, 0.9))
        };
        for a in 0..space.dim() {
            for b in 0..space.dim() {
                let (na, la) = space.basis_label(a);
                let (nb, lb) = space.basis_label(b);
                let mut expected = c(1.0, 0.0);
                for &i in la {
                    for &j in lb {
                        expected *= eval(p(j) / p(i));
                    }
                }
                assert!((r.values[(a, b)] - expected).norm() < 1e-14, "{na} {nb}");
            }
        }
        // Sector (1,1): φ(e^{θ'−θ}).
        let a = space.offsets()[1] + 1;
        let b = space.offsets()[1] + 3;
        let expected = eval((grid.theta()[3] - grid.theta()[1]).exp());
        assert!((r.values[(a, b)] - expected).norm() < 1e-14);
    }

    #[test]
    fn r_tilde_on_unsymmetrized_products_restricts() {
        // Both displayed decompositions: R̃ acting on a†(ψ₁)a†(ψ₂)Ω ⊗ a†(χ)Ω equals the
        // product of single-pair factors, since every entry is permutation invariant.
        let grid = make_grid(1.5, 3, 1.0).unwrap();
        let space = FockSpace::bosonic(grid.clone(), 1, 2).unwrap();
        let phi = ScatteringFunction::half_plane_blaschke(vec![c(1.3, 0.0)]).unwrap();
        let r = build_r_tilde(&phi, &space, &space).unwrap();
        let loc = |i| OneParticleVector::localized(&grid, i);
        let om = space.vacuum();
        let v1 = create(&space, &loc(0), 0).unwrap().apply(&create(&space, &loc(2), 0).unwrap().apply(&om));
        let v2 = create(&space, &loc(1), 0).unwrap().apply(&om);
        let x = &v1 * v2.transpose();
        let rx = r.apply(&x);
        let f = |i: usize, j: usize| {
            phi.eval_real((grid.theta()[j] - grid.theta()[i]).exp()).unwrap()
        };
        assert!(max_abs(&(rx - x * (f(0, 1) * f(2, 1)))) < 1e-14);
    }

    #[test]
    fn tensor_helpers_match_kronecker_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_matrix(3, 3, &mut rng);
        let b = random_matrix(4, 4, &mut rng);
        let x = random_matrix(3, 4, &mut rng);
        let vecx = CVec::from_iterator(12, (0..12).map(|k| x[(k / 4, k % 4)]));
        let unvec = |v: CVec| CMat::from_fn(3, 4, |i, j| v[i * 4 + j]);
        let sa = CsrMatrix::from_dense(&a, 0.0);
        let sb = CsrMatrix::from_dense(&b, 0.0);
        let id3 = CMat::identity(3, 3);
        let id4 = CMat::identity(4, 4);
        assert!(max_abs(&(tensor::left(&sa, &x) - unvec(kron(&a, &id4) * &vecx))) < 1e-12);
        assert!(max_abs(&(tensor::right(&sb, &x) - unvec(kron(&id3, &b) * &vecx))) < 1e-12);
        let t = TensorDiagonal {
            values: CMat::from_fn(3, 4, |i, j| cis(0.3 * i as f64 + 1.1 * j as f64 * i as f64)),
        };
        let td = t.to_dense();
        let expected = &td * kron(&id3, &b) * td.adjoint() * &vecx;
        assert!(max_abs(&(tensor::twisted_right(&t, &sb, &x) - unvec(expected))) < 1e-12);
    }
}
