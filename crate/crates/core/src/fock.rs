//! Truncated Fock spaces over a rapidity grid.
//!
//! A single-particle mode is a pair (species, grid point), numbered `species * d + i`.
//! The n-particle sector is the range of the group-averaged projection `Q_{S₂,n}` on the
//! unsymmetrized space `(C^M)^{⊗n}`; bosonic spaces use `S₂ ≡ 1`. Because every
//! `D_{S₂,n}(σ)` maps basis words to multiples of basis words, `Q_{S₂,n}` is block diagonal
//! over multisets of modes and each block has rank at most one. Sector basis vectors are
//! therefore labelled by sorted mode multisets, in lexicographic order.
//!
//! Creation operators carry the usual `√n` normalization, so that
//! `[a(ψ₂), a†(ψ₁)] = ⟨ψ₂, ψ₁⟩` below the cutoff.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{c, CMat, CVec, C64};
use crate::onepspace::{pm_transform, OneParticleOperator, OneParticleVector, RapidityGrid, TestFunction};
use crate::scatfunc::{Domain, ScatteringFunction};
use crate::sparse::CsrMatrix;

const REPRESENTATION_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Symmetrization {
    Bosonic,
    S2Twisted { s2: ScatteringFunction },
}

impl Symmetrization {
    fn exchange(&self) -> ScatteringFunction {
        match self {
            Symmetrization::Bosonic => ScatteringFunction::one(),
            Symmetrization::S2Twisted { s2 } => s2.clone(),
        }
    }
}

/// One particle-number sector.
#[derive(Clone, Debug)]
pub struct Sector {
    pub n: usize,
    /// Sorted mode multisets labelling the basis vectors.
    pub labels: Vec<Vec<usize>>,
    /// Orthonormal columns spanning the sector inside `(C^M)^{⊗n}`.
    pub embedding: CsrMatrix,
    /// Word index -> (column, embedding entry).
    word_column: HashMap<usize, (usize, C64)>,
    columns: Vec<Vec<(usize, C64)>>,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Nonzero (word, value) entries of basis column `j`.
    pub fn column(&self, j: usize) -> &[(usize, C64)] {
        &self.columns[j]
    }
}

#[derive(Clone, Debug)]
pub struct FockSpace {
    grid: RapidityGrid,
    n_species: usize,
    n_max: usize,
    symmetrization: Symmetrization,
    sectors: Vec<Sector>,
    offsets: Vec<usize>,
}

impl FockSpace {
    pub fn bosonic(grid: RapidityGrid, n_species: usize, n_max: usize) -> Result<Self> {
        Self::new(grid, n_species, n_max, Symmetrization::Bosonic)
    }

    pub fn s2_twisted(
        grid: RapidityGrid,
        n_species: usize,
        n_max: usize,
        s2: ScatteringFunction,
    ) -> Result<Self> {
        Self::new(grid, n_species, n_max, Symmetrization::S2Twisted { s2 })
    }

    pub fn new(
        grid: RapidityGrid,
        n_species: usize,
        n_max: usize,
        symmetrization: Symmetrization,
    ) -> Result<Self> {
        if n_species == 0 {
            return Err(LabError::InvalidParameter("need at least one species".into()));
        }
        let s2 = symmetrization.exchange();
        if s2.domain() != Domain::Rapidity {
            return Err(LabError::InvalidParameter(
                "exchange function must be given in rapidity form".into(),
            ));
        }
        let modes = n_species * grid.len();
        let words = (modes as f64).powi(n_max as i32);
        if words > 1e8 {
            return Err(LabError::InvalidParameter(format!(
                "{modes} modes with cutoff {n_max} is too large"
            )));
        }
        let exchange = ExchangeTable::new(&grid, n_species, &s2)?;
        let mut sectors = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            sectors.push(build_sector(&exchange, n)?);
        }
        let mut offsets = vec![0];
        for s in &sectors {
            offsets.push(offsets.last().unwrap() + s.dim());
        }
        Ok(Self {
            grid,
            n_species,
            n_max,
            symmetrization,
            sectors,
            offsets,
        })
    }

    pub fn grid(&self) -> &RapidityGrid {
        &self.grid
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn n_modes(&self) -> usize {
        self.n_species * self.grid.len()
    }

    pub fn symmetrization(&self) -> &Symmetrization {
        &self.symmetrization
    }

    pub fn sector(&self, n: usize) -> &Sector {
        &self.sectors[n]
    }

    pub fn sector_dims(&self) -> Vec<usize> {
        self.sectors.iter().map(Sector::dim).collect()
    }

    /// Start of each sector in the global index, plus the total dimension at the end.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Dimension of the sectors `0..=n`.
    pub fn dim_up_to(&self, n: usize) -> usize {
        self.offsets[n.min(self.n_max) + 1]
    }

    pub fn mode(&self, species: usize, point: usize) -> usize {
        species * self.grid.len() + point
    }

    pub fn mode_species(&self, mode: usize) -> usize {
        mode / self.grid.len()
    }

    pub fn mode_point(&self, mode: usize) -> usize {
        mode % self.grid.len()
    }

    /// Sector and mode multiset of a global basis index.
    pub fn basis_label(&self, index: usize) -> (usize, &[usize]) {
        let n = self.offsets.partition_point(|&o| o <= index) - 1;
        (n, &self.sectors[n].labels[index - self.offsets[n]])
    }

    pub fn vacuum(&self) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[0] = c(1.0, 0.0);
        v
    }

    /// Embeds a one-particle vector of the given species into sector 1.
    pub fn one_particle_state(&self, psi: &OneParticleVector, species: usize) -> Result<CVec> {
        let coef = self.species_coefficients(psi, species)?;
        let mut v = CVec::zeros(self.dim());
        let s1 = &self.sectors[1];
        for (m, z) in coef.iter().enumerate() {
            if let Some(&(col, e)) = s1.word_column.get(&m) {
                v[self.offsets[1] + col] += e.conj() * z;
            }
        }
        Ok(v)
    }

    fn species_coefficients(&self, psi: &OneParticleVector, species: usize) -> Result<CVec> {
        if species >= self.n_species {
            return Err(LabError::InvalidParameter(format!(
                "species {species} out of range 0..{}",
                self.n_species
            )));
        }
        if psi.len() != self.grid.len() {
            return Err(LabError::DimensionMismatch(format!(
                "vector of length {} on grid of size {}",
                psi.len(),
                self.grid.len()
            )));
        }
        let mut v = CVec::zeros(self.n_modes());
        let coef = psi.coefficients(&self.grid);
        for i in 0..self.grid.len() {
            v[self.mode(species, i)] = coef[i];
        }
        Ok(v)
    }

    /// Total momentum `(p₀, p₁)` of a global basis vector.
    pub fn momentum(&self, index: usize) -> (f64, f64) {
        let (_, label) = self.basis_label(index);
        label.iter().fold((0.0, 0.0), |(a, b), &m| {
            let (p0, p1) = self.grid.momentum(self.mode_point(m));
            (a + p0, b + p1)
        })
    }
}

/// Values of the exchange function on all mode pairs.
struct ExchangeTable {
    modes: usize,
    points: usize,
    /// `s2[i * d + j] = S₂(θ_i − θ_j)`.
    s2: Vec<C64>,
}

impl ExchangeTable {
    fn new(grid: &RapidityGrid, n_species: usize, s2: &ScatteringFunction) -> Result<Self> {
        let d = grid.len();
        let mut table = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                table.push(s2.eval_real(grid.theta()[i] - grid.theta()[j])?);
            }
        }
        Ok(Self {
            modes: n_species * d,
            points: d,
            s2: table,
        })
    }

    /// `D(τ_j) e_w = S₂(θ(w_j) − θ(w_{j+1})) e_{swap_j w}`.
    fn phase(&self, left: usize, right: usize) -> C64 {
        self.s2[(left % self.points) * self.points + right % self.points]
    }
}

fn word_index(word: &[usize], modes: usize) -> usize {
    word.iter().fold(0, |acc, &m| acc * modes + m)
}

fn index_word(mut idx: usize, n: usize, modes: usize) -> Vec<usize> {
    let mut w = vec![0; n];
    for k in (0..n).rev() {
        w[k] = idx % modes;
        idx /= modes;
    }
    w
}

/// `Q_{S₂,n} e_w` as a sparse vector, from the average over all `D(σ)`.
///
/// Group elements are reached by breadth-first search over adjacent transpositions; when an
/// element is reached twice the two phases must agree, which is the representation check.
fn averaged_image(table: &ExchangeTable, word: &[usize]) -> Result<BTreeMap<usize, C64>> {
    let n = word.len();
    let mut seen: HashMap<Vec<usize>, C64> = HashMap::new();
    let start: Vec<usize> = (0..n).collect();
    seen.insert(start.clone(), c(1.0, 0.0));
    let mut queue = VecDeque::from([start]);
    while let Some(perm) = queue.pop_front() {
        let phase = seen[&perm];
        for j in 0..n.saturating_sub(1) {
            let left = word[perm[j]];
            let right = word[perm[j + 1]];
            let next_phase = phase * table.phase(left, right);
            let mut next = perm.clone();
            next.swap(j, j + 1);
            match seen.get(&next) {
                Some(&existing) => {
                    // Repeated modes make distinct position permutations land on the same
                    // word; only identical position permutations are compared here.
                    if (existing - next_phase).norm() > REPRESENTATION_TOL {
                        return Err(LabError::Representation(format!(
                            "D(σ) depends on the word for σ = {next:?}: {existing} vs {next_phase}"
                        )));
                    }
                }
                None => {
                    seen.insert(next.clone(), next_phase);
                    queue.push_back(next);
                }
            }
        }
    }
    let order = seen.len() as f64;
    let mut out = BTreeMap::new();
    for (perm, phase) in seen {
        let w: Vec<usize> = perm.iter().map(|&p| word[p]).collect();
        *out.entry(word_index(&w, table.modes)).or_insert(c(0.0, 0.0)) += phase / order;
    }
    Ok(out)
}

fn sorted_multisets(modes: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, modes: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for m in start..modes {
            cur.push(m);
            rec(m, modes, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, modes, n, &mut Vec::new(), &mut out);
    out
}

fn build_sector(table: &ExchangeTable, n: usize) -> Result<Sector> {
    let modes = table.modes;
    let rows = modes.pow(n as u32);
    let mut labels = Vec::new();
    let mut triplets = Vec::new();
    let mut word_column = HashMap::new();
    let mut columns = Vec::new();
    for t in sorted_multisets(modes, n) {
        let image = averaged_image(table, &t)?;
        let w0 = word_index(&t, modes);
        let norm2 = image.get(&w0).map(|z| z.re).unwrap_or(0.0);
        if norm2 <= RANK_TOL {
            continue;
        }
        let scale = 1.0 / norm2.sqrt();
        let col = labels.len();
        let mut entries = Vec::new();
        for (&w, &z) in &image {
            let e = z * scale;
            if e.norm() > 1e-15 {
                triplets.push((w, col, e));
                word_column.insert(w, (col, e));
                entries.push((w, e));
            }
        }
        columns.push(entries);
        labels.push(t);
    }
    let embedding = CsrMatrix::from_triplets(rows, labels.len(), triplets);
    Ok(Sector {
        n,
        labels,
        embedding,
        word_column,
        columns,
    })
}

/// `D_{S₂,n}(τ_j)` on the unsymmetrized n-particle space, `1 ≤ j ≤ n−1`.
pub fn s2_permutation(
    s2: &ScatteringFunction,
    n: usize,
    j: usize,
    grid: &RapidityGrid,
    n_species: usize,
) -> Result<CsrMatrix> {
    if j == 0 || j >= n {
        return Err(LabError::InvalidParameter(format!(
            "transposition index {j} outside 1..{}",
            n.saturating_sub(1)
        )));
    }
    let table = ExchangeTable::new(grid, n_species, s2)?;
    let modes = table.modes;
    let rows = modes.pow(n as u32);
    let mut t = Vec::with_capacity(rows);
    for idx in 0..rows {
        let mut w = index_word(idx, n, modes);
        let phase = table.phase(w[j - 1], w[j]);
        w.swap(j - 1, j);
        t.push((word_index(&w, modes), idx, phase));
    }
    Ok(CsrMatrix::from_triplets(rows, rows, t))
}

/// `Q_n` or `Q_{S₂,n}` on the unsymmetrized n-particle space, by group averaging.
pub fn sector_projection(space: &FockSpace, n: usize) -> Result<CsrMatrix> {
    if n > space.n_max {
        return Err(LabError::InvalidParameter(format!(
            "sector {n} above cutoff {}",
            space.n_max
        )));
    }
    let table = ExchangeTable::new(&space.grid, space.n_species, &space.symmetrization.exchange())?;
    let modes = table.modes;
    let rows = modes.pow(n as u32);
    let mut t = Vec::new();
    for idx in 0..rows {
        let w = index_word(idx, n, modes);
        for (r, z) in averaged_image(&table, &w)? {
            t.push((r, idx, z));
        }
    }
    Ok(CsrMatrix::from_triplets(rows, rows, t))
}

/// Complex linear operator on a [`FockSpace`], stored as one global sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    pub matrix: CsrMatrix,
    offsets: Vec<usize>,
}

impl FockOperator {
    pub fn zeros(space: &FockSpace) -> Self {
        Self {
            matrix: CsrMatrix::zeros(space.dim(), space.dim()),
            offsets: space.offsets.clone(),
        }
    }

    pub fn identity(space: &FockSpace) -> Self {
        Self {
            matrix: CsrMatrix::identity(space.dim()),
            offsets: space.offsets.clone(),
        }
    }

    pub fn from_matrix(space: &FockSpace, matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(LabError::DimensionMismatch(format!(
                "{}x{} operator on a space of dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            )));
        }
        Ok(Self {
            matrix,
            offsets: space.offsets.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    fn same_layout(&self, other: &Self) {
        assert_eq!(self.offsets, other.offsets, "operators on different Fock spaces");
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            offsets: self.offsets.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.same_layout(other);
        Self {
            matrix: self.matrix.add(&other.matrix),
            offsets: self.offsets.clone(),
        }
    }

    pub fn axpy(&self, a: C64, other: &Self) -> Self {
        self.same_layout(other);
        Self {
            matrix: self.matrix.axpy(a, &other.matrix),
            offsets: self.offsets.clone(),
        }
    }

    pub fn scale(&self, a: C64) -> Self {
        Self {
            matrix: self.matrix.scale(a),
            offsets: self.offsets.clone(),
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        self.same_layout(other);
        Self {
            matrix: self.matrix.matmul(&other.matrix),
            offsets: self.offsets.clone(),
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.compose(other).axpy(c(-1.0, 0.0), &other.compose(self))
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        self.matrix.mul_vec(v)
    }

    pub fn to_dense(&self) -> CMat {
        self.matrix.to_dense()
    }

    /// Block mapping sector `src` into sector `tgt`.
    pub fn block(&self, src: usize, tgt: usize) -> CMat {
        let (r0, r1) = (self.offsets[tgt], self.offsets[tgt + 1]);
        let (c0, c1) = (self.offsets[src], self.offsets[src + 1]);
        let mut m = CMat::zeros(r1 - r0, c1 - c0);
        for (r, col, v) in self.matrix.iter() {
            if r >= r0 && r < r1 && col >= c0 && col < c1 {
                m[(r - r0, col - c0)] = v;
            }
        }
        m
    }

    /// Restriction to the sectors `0..=n` (a leading principal block).
    pub fn truncated(&self, n: usize) -> CsrMatrix {
        let k = self.offsets[(n + 1).min(self.offsets.len() - 1)];
        self.matrix.truncate(k, k)
    }
}

/// Creation operator for an arbitrary mode-space vector (length `species * d`, orthonormal
/// coefficients). The top sector is mapped to zero.
pub fn create_modes(space: &FockSpace, v: &CVec) -> Result<FockOperator> {
    let modes = space.n_modes();
    if v.len() != modes {
        return Err(LabError::DimensionMismatch(format!(
            "mode vector of length {} for {modes} modes",
            v.len()
        )));
    }
    let mut t = Vec::new();
    for n in 1..=space.n_max {
        let lower = &space.sectors[n - 1];
        let upper = &space.sectors[n];
        let sqrt_n = (n as f64).sqrt();
        let stride = modes.pow((n - 1) as u32);
        for (j, entries) in lower.columns.iter().enumerate() {
          for &(u, beta) in entries {
            for (m, &z) in v.iter().enumerate() {
                if z == c(0.0, 0.0) {
                    continue;
                }
                if let Some(&(col, gamma)) = upper.word_column.get(&(m * stride + u)) {
                    t.push((
                        space.offsets[n] + col,
                        space.offsets[n - 1] + j,
                        gamma.conj() * z * beta * sqrt_n,
                    ));
                }
            }
          }
        }
    }
    FockOperator::from_matrix(space, CsrMatrix::from_triplets(space.dim(), space.dim(), t))
}

/// `a†(ψ)` (or `z†_{S₂}(ψ)`) for one species.
pub fn create(space: &FockSpace, psi: &OneParticleVector, species: usize) -> Result<FockOperator> {
    create_modes(space, &space.species_coefficients(psi, species)?)
}

/// `a(ψ) = a†(ψ)*`, antilinear in `ψ`.
pub fn annihilate(space: &FockSpace, psi: &OneParticleVector, species: usize) -> Result<FockOperator> {
    Ok(create(space, psi, species)?.adjoint())
}

/// `φ(f) = a†(f⁺) + a(J₁ f⁻)` for species 0.
pub fn field(space: &FockSpace, f: &TestFunction) -> Result<FockOperator> {
    field_species(space, f, 0)
}

pub fn field_species(space: &FockSpace, f: &TestFunction, species: usize) -> Result<FockOperator> {
    let (plus, minus) = pm_transform(f, &space.grid)?;
    field_from_transforms(space, &plus, &minus, species)
}

/// Field operator from precomputed `f±`.
pub fn field_from_transforms(
    space: &FockSpace,
    plus: &OneParticleVector,
    minus: &OneParticleVector,
    species: usize,
) -> Result<FockOperator> {
    Ok(create(space, plus, species)?.add(&annihilate(space, &minus.conj(), species)?))
}

/// `Γ(V₁)`: `V₁^{⊗n}` on each sector. `V₁` acts on one species (`d × d`, applied to each
/// species) or on all modes (`M × M`).
pub fn second_quantize(v1: &OneParticleOperator, space: &FockSpace) -> Result<FockOperator> {
    let d = space.grid.len();
    let modes = space.n_modes();
    let full = if v1.dim() == modes {
        v1.matrix.clone()
    } else if v1.dim() == d {
        crate::linalg::kron(&CMat::identity(space.n_species, space.n_species), &v1.matrix)
    } else {
        return Err(LabError::DimensionMismatch(format!(
            "one-particle operator of dimension {} for {d} points and {modes} modes",
            v1.dim()
        )));
    };
    let diagonal = (0..modes).all(|j| (0..modes).all(|i| i == j || full[(i, j)] == c(0.0, 0.0)));
    let mut t = Vec::new();
    for (n, sector) in space.sectors.iter().enumerate() {
        let off = space.offsets[n];
        for j in 0..sector.dim() {
            let image: Vec<(usize, C64)> = if diagonal {
                sector.columns[j]
                    .iter()
                    .map(|&(w, z)| {
                        let word = index_word(w, n, modes);
                        (w, word.iter().fold(z, |acc, &m| acc * full[(m, m)]))
                    })
                    .collect()
            } else {
                let mut dense = vec![c(0.0, 0.0); modes.pow(n as u32)];
                for &(w, z) in &sector.columns[j] {
                    dense[w] = z;
                }
                for slot in 0..n {
                    dense = apply_on_slot(&full, &dense, n, slot, modes);
                }
                dense
                    .into_iter()
                    .enumerate()
                    .filter(|(_, z)| *z != c(0.0, 0.0))
                    .collect()
            };
            let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
            for (w, z) in image {
                if let Some(&(col, gamma)) = sector.word_column.get(&w) {
                    *acc.entry(col).or_insert(c(0.0, 0.0)) += gamma.conj() * z;
                }
            }
            for (col, z) in acc {
                t.push((off + col, off + j, z));
            }
        }
    }
    FockOperator::from_matrix(space, CsrMatrix::from_triplets(space.dim(), space.dim(), t))
}

fn apply_on_slot(v: &CMat, x: &[C64], n: usize, slot: usize, modes: usize) -> Vec<C64> {
    let inner = modes.pow((n - slot - 1) as u32);
    let outer = modes.pow(slot as u32);
    let mut out = vec![c(0.0, 0.0); x.len()];
    for o in 0..outer {
        for m in 0..modes {
            for i in 0..inner {
                let z = x[(o * modes + m) * inner + i];
                if z == c(0.0, 0.0) {
                    continue;
                }
                for r in 0..modes {
                    let a = v[(r, m)];
                    if a != c(0.0, 0.0) {
                        out[(o * modes + r) * inner + i] += a * z;
                    }
                }
            }
        }
    }
    out
}
