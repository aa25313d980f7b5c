//! Dense complex linear algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// `a * b` through four real products, which take the blocked real GEMM path.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    if a.nrows() * a.ncols() * b.ncols() < 32 * 32 * 32 {
        return a * b;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMat::from_fn(re.nrows(), re.ncols(), |i, j| c(re[(i, j)], im[(i, j)]))
}

/// `a* b` without forming the adjoint explicitly in complex arithmetic.
pub fn adjoint_mul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows(), "adjoint_mul: row counts differ");
    if a.ncols() * a.nrows() * b.ncols() < 32 * 32 * 32 {
        return a.adjoint() * b;
    }
    let (ar, ai) = (a.map(|z| z.re).transpose(), a.map(|z| z.im).transpose());
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br + &ai * &bi;
    let im = &ar * &bi - &ai * &br;
    CMat::from_fn(re.nrows(), re.ncols(), |i, j| c(re[(i, j)], im[(i, j)]))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm_sqr())).sqrt()
}

pub fn max_abs_vec(v: &CVec) -> f64 {
    v.iter().fold(0.0_f64, |acc, z| acc.max(z.norm_sqr())).sqrt()
}

/// `max |a − ρ b|` without allocating.
pub fn max_abs_diff(a: &CMat, b: &CMat, rho: C64) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0_f64, |acc, (x, y)| acc.max((x - y * rho).norm_sqr())).sqrt()
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    // The Gram matrix of the smaller side is cheaper and has the same top eigenvalue.
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let (vals, _) = hermitian_eig(&gram);
    vals.iter().cloned().fold(0.0_f64, f64::max).max(0.0).sqrt()
}

/// Eigen-decomposition of a Hermitian matrix: real eigenvalues and unitary eigenvectors (columns).
pub fn hermitian_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let sym = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eig(m);
    let d = CMat::from_diagonal(&CVec::from_iterator(
        vals.len(),
        vals.iter().map(|&x| c(f(x), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    max_abs(&(m - m.adjoint())) <= tol
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn diag(entries: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(entries))
}

/// Numerical rank with singular values measured relative to the largest one.
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0_f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&v| v > top * rel_tol).count()
}

/// Orthonormal basis of the kernel of `m`, computed from the Gram matrix spectrum.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let gram = m.adjoint() * m;
    let (vals, vecs) = hermitian_eig(&gram);
    let cols: Vec<CVec> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() <= tol * tol)
        .map(|(i, _)| vecs.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        CMat::zeros(m.ncols(), 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// Flattens a matrix into a vector (column-major), identifying `M_n` with `C^{n^2}`.
pub fn vectorize(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v.as_slice())
}

/// Incrementally grown orthonormal basis (modified Gram-Schmidt with one reorthogonalization pass).
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    dim: usize,
    vectors: Vec<CVec>,
    tol: f64,
}

impl OrthoBasis {
    pub fn new(dim: usize, tol: f64) -> Self {
        Self {
            dim,
            vectors: Vec::new(),
            tol,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[CVec] {
        &self.vectors
    }

    fn reduce(&self, v: &CVec) -> CVec {
        let mut r = v.clone();
        for _ in 0..2 {
            for b in &self.vectors {
                let coef = b.dotc(&r);
                r.axpy(-coef, b, C64::new(1.0, 0.0));
            }
        }
        r
    }

    /// Norm of the component of `v` orthogonal to the current span.
    pub fn residual(&self, v: &CVec) -> f64 {
        self.reduce(v).norm()
    }

    /// Adds `v` if its orthogonal residual exceeds `tol * |v|`; returns whether it was added.
    pub fn try_add(&mut self, v: &CVec) -> bool {
        if self.vectors.len() >= self.dim {
            return false;
        }
        let scale = v.norm();
        if scale == 0.0 {
            return false;
        }
        let r = self.reduce(v);
        let rn = r.norm();
        if rn > self.tol * scale {
            self.vectors.push(r / c(rn, 0.0));
            true
        } else {
            false
        }
    }

    pub fn to_matrix(&self) -> CMat {
        if self.vectors.is_empty() {
            CMat::zeros(self.dim, 0)
        } else {
            CMat::from_columns(&self.vectors)
        }
    }

    /// Largest relative residual of the vectors of `other` against this span.
    pub fn max_relative_residual(&self, others: &[CVec]) -> f64 {
        others
            .iter()
            .filter(|v| v.norm() > 0.0)
            .map(|v| self.residual(v) / v.norm())
            .fold(0.0, f64::max)
    }
}

/// Symmetric distance between two subspaces given by orthonormal column bases:
/// the largest residual of either basis projected onto the other.
pub fn subspace_distance(a: &CMat, b: &CMat) -> f64 {
    if a.ncols() != b.ncols() {
        return f64::INFINITY;
    }
    let worst = |x: &CMat, q: &CMat| {
        let r = x - matmul(q, &adjoint_mul(q, x));
        r.column_iter().map(|col| col.norm()).fold(0.0, f64::max)
    };
    worst(b, a).max(worst(a, b))
}

/// Dimension of the intersection of two subspaces with orthonormal bases.
pub fn intersection_dim(a: &CMat, b: &CMat, tol: f64) -> usize {
    if a.ncols() == 0 || b.ncols() == 0 {
        return 0;
    }
    let overlap = a.adjoint() * b;
    let gram = &overlap * overlap.adjoint();
    let (vals, _) = hermitian_eig(&gram);
    vals.iter().filter(|&&s| s >= 1.0 - tol).count()
}

pub fn random_complex<R: Rng>(rng: &mut R) -> C64 {
    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| random_complex(rng))
}

pub fn random_vector<R: Rng>(len: usize, rng: &mut R) -> CVec {
    CVec::from_fn(len, |_, _| random_complex(rng))
}

pub fn random_unit_vector<R: Rng>(len: usize, rng: &mut R) -> CVec {
    let v = random_vector(len, rng);
    let n = v.norm();
    v / c(n, 0.0)
}

pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let m = random_matrix(n, n, rng);
    (&m + m.adjoint()) * c(0.5, 0.0)
}

pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let m = random_matrix(n, n, rng);
    let qr = m.qr();
    qr.q()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn op_norm_of_diagonal_is_max_modulus() {
        let m = diag(&[c(1.0, 0.0), c(0.0, -3.0), c(2.0, 0.0)]);
        assert!((op_norm(&m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn null_space_of_projector() {
        let p = diag(&[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let k = null_space(&p, 1e-10);
        assert_eq!(k.ncols(), 1);
        assert!((k[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ortho_basis_rejects_dependent_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_vector(5, &mut rng);
        let b = random_vector(5, &mut rng);
        let mut basis = OrthoBasis::new(5, 1e-10);
        assert!(basis.try_add(&a));
        assert!(basis.try_add(&b));
        let comb = &a * c(2.0, 1.0) - &b * c(0.0, 3.0);
        assert!(!basis.try_add(&comb));
        assert_eq!(basis.len(), 2);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(6, &mut rng);
        assert!(max_abs(&(u.adjoint() * &u - identity(6))) < 1e-12);
    }

    #[test]
    fn intersection_of_coordinate_planes() {
        let a = CMat::from_columns(&[
            CVec::from_column_slice(&[c(1., 0.), c(0., 0.), c(0., 0.)]),
            CVec::from_column_slice(&[c(0., 0.), c(1., 0.), c(0., 0.)]),
        ]);
        let b = CMat::from_columns(&[
            CVec::from_column_slice(&[c(0., 0.), c(1., 0.), c(0., 0.)]),
            CVec::from_column_slice(&[c(0., 0.), c(0., 0.), c(1., 0.)]),
        ]);
        assert_eq!(intersection_dim(&a, &b, 1e-9), 1);
    }
}
