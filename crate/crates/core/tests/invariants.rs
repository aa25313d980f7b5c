use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wedgelab::dump::{operator_from_csv, operator_to_csv};
use wedgelab::fock::{create, sector_projection, FockSpace};
use wedgelab::linalg::{c, kron, max_abs, random_matrix, random_unit_vector, CMat, CVec};
use wedgelab::modular::{kron_vec, modular_from_vector, toy_model};
use wedgelab::onepspace::{make_grid, OneParticleVector};
use wedgelab::scatfunc::ScatteringFunction;
use wedgelab::smatrix::{check_axioms, federbush_smatrix};
use wedgelab::twist::{fourier_component, tau_k, twist_unitary, ChargeGrading, Group};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn ccr_holds_below_the_cutoff(seed in 0u64..1000, n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = make_grid(2.0, n, 1.0).unwrap();
        let space = FockSpace::bosonic(grid.clone(), 1, 3).unwrap();
        let f = OneParticleVector::from_coefficients(&grid, &random_unit_vector(n, &mut rng));
        let g = OneParticleVector::from_coefficients(&grid, &random_unit_vector(n, &mut rng));
        let af = create(&space, &f, 0).unwrap().adjoint();
        let ag = create(&space, &g, 0).unwrap();
        let comm = af.commutator(&ag).to_dense();
        let low = space.dim_up_to(2);
        let block = comm.view((0, 0), (low, low)).into_owned();
        let expected = CMat::identity(low, low) * grid.inner(&f, &g);
        prop_assert!(max_abs(&(block - expected)) < 1e-12);
    }

    #[test]
    fn s2_sector_projections_are_orthogonal(b in 0.1f64..3.0, n in 2usize..4) {
        let grid = make_grid(2.0, 3, 1.0).unwrap();
        let s2 = ScatteringFunction::strip_blaschke(vec![b]).unwrap();
        let space = FockSpace::s2_twisted(grid, 1, 3, s2).unwrap();
        let q = sector_projection(&space, n).unwrap().to_dense();
        prop_assert!(max_abs(&(&q * &q - &q)) < 1e-12);
        prop_assert!(max_abs(&(q.adjoint() - &q)) < 1e-12);
    }

    #[test]
    fn federbush_smatrix_satisfies_axioms(kappa in -2.0f64..2.0) {
        let r = check_axioms(&federbush_smatrix(kappa), &[-1.3, 0.0, 0.4, 2.2], 1e-12).unwrap();
        prop_assert!(r.pass, "{r:?}");
    }

    #[test]
    fn twist_unitaries_compose(labels in prop::collection::vec(-3i64..4, 1..5), k1 in -1.0f64..1.0, k2 in -1.0f64..1.0) {
        let g = ChargeGrading::new(labels, Group::Circle).unwrap();
        let a = twist_unitary(&g, &g, k1).to_dense();
        let b = twist_unitary(&g, &g, k2).to_dense();
        let ab = twist_unitary(&g, &g, k1 + k2).to_dense();
        prop_assert!(max_abs(&(&a * &b - ab)) < 1e-12);
        let n = a.nrows();
        prop_assert!(max_abs(&(a.adjoint() * &a - CMat::identity(n, n))) < 1e-12);
    }

    #[test]
    fn fourier_components_sum_back(seed in 0u64..1000, labels in prop::collection::vec(0i64..5, 2..6), order in 2u32..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = labels.iter().map(|l| l.rem_euclid(order as i64)).collect();
        let g = ChargeGrading::new(labels, Group::Cyclic(order)).unwrap();
        let x = random_matrix(g.dim(), g.dim(), &mut rng);
        let mut sum = CMat::zeros(g.dim(), g.dim());
        for l in 0..order as i64 {
            sum += fourier_component(&x, &g, l);
        }
        prop_assert!(max_abs(&(sum - x)) < 1e-12);
    }

    #[test]
    fn tau_fixes_invariant_product_vectors(seed in 0u64..1000, order in 2u32..4, k in -3i64..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ChargeGrading::new(vec![0, 1, 0, order as i64 - 1], Group::Cyclic(order)).unwrap();
        let d = g.dim();
        // Ω supported on charge-zero labels is invariant under the grading.
        let mut omega = CVec::zeros(d);
        omega[0] = c(0.6, 0.0);
        omega[2] = c(0.0, 0.8);
        let oo = kron_vec(&omega, &omega);
        let x = random_matrix(d * d, d * d, &mut rng);
        let t = tau_k(&x, &g, k).unwrap();
        prop_assert!((&t * &oo - &x * &oo).norm() < 1e-12);
        let back = tau_k(&t, &g, -k).unwrap();
        prop_assert!(max_abs(&(back - &x)) < 1e-12);
    }

    #[test]
    fn toy_modular_data_is_consistent(w in prop::collection::vec(0.05f64..1.0, 2..4), order in 2u32..4) {
        let charges: Vec<i64> = (0..w.len() as i64).collect();
        let toy = toy_model(&charges, order, &w).unwrap();
        let md = modular_from_vector(&toy.algebra, &toy.omega).unwrap();
        prop_assert!(md.invariant_deviation() < 1e-10);
        prop_assert!(md.kms_deviation(&toy.algebra) < 1e-10);
    }

    #[test]
    fn operator_dumps_round_trip(seed in 0u64..1000, species in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = make_grid(2.0, 3, 1.0).unwrap();
        let space = FockSpace::bosonic(grid.clone(), species, 2).unwrap();
        let psi = OneParticleVector::from_coefficients(&grid, &random_unit_vector(3, &mut rng));
        let op = create(&space, &psi, species - 1).unwrap();
        let op = op.add(&op.adjoint().scale(c(0.0, 0.5)));
        let back = operator_from_csv(&space, &operator_to_csv(&op)).unwrap();
        prop_assert_eq!(back.to_dense(), op.to_dense());
    }

    #[test]
    fn grid_momenta_are_forward(half_width in 0.5f64..6.0, n in 2usize..40, mass in 0.1f64..5.0) {
        let grid = make_grid(half_width, n, mass).unwrap();
        let total: f64 = grid.weights().iter().sum();
        prop_assert!((total - 2.0 * half_width).abs() < 1e-12 * half_width.max(1.0));
        for i in 0..n {
            let (p0, p1) = grid.momentum(i);
            prop_assert!(p0 >= p1.abs() && (p0 * p0 - p1 * p1 - mass * mass).abs() < 1e-9 * p0 * p0);
        }
    }
}

#[test]
fn kron_matches_index_layout() {
    let a = CMat::from_fn(2, 2, |i, j| c((2 * i + j) as f64, 0.0));
    let b = CMat::identity(3, 3);
    let k = kron(&a, &b);
    assert_eq!(k[(3, 3)], a[(1, 1)]);
    assert_eq!(k[(3, 4)], c(0.0, 0.0));
    assert_eq!(k[(0, 3)], a[(0, 1)]);
}
