use std::sync::Arc;

use faer::{Col, Mat, Side};
use nonlocal_h::block_schur::{block_inverse, lu_factorization_residual, random_coercive, random_split, BlockOperator};
use nonlocal_h::coeff::{
    admissibility_check, convolution_coefficient, dense_coefficient, multiplication_coefficient, ConvolutionKernel,
    TensorField, DEFAULT_COND_CAP,
};
use nonlocal_h::derham::{GridComplex, HarmonicKind, VoxelDomain};
use nonlocal_h::electro::{project_harmonic, solve_electrostatics};
use nonlocal_h::lab::config::{DataKind, Seeds};
use nonlocal_h::lab::scenarios::scenario_data;
use nonlocal_h::lab::{run_homogenisation, ScenarioConfig};
use nonlocal_h::linalg;
use nonlocal_h::operator::HilbertSpace;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn solid(n: usize) -> Arc<GridComplex> {
    GridComplex::build(VoxelDomain::solid_cube(n).unwrap()).unwrap()
}

fn unit(v: Col<f64>) -> Col<f64> {
    let n = v.norm_l2();
    v / n
}

fn sym_min(m: &Mat<f64>) -> f64 {
    let s = Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    s.self_adjoint_eigenvalues(Side::Lower).unwrap()[0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn curl_of_gradient_vanishes_on_random_masks(
        s in prop::array::uniform3(3usize..6),
        bits in prop::collection::vec(prop::bool::weighted(0.85), 125),
    ) {
        let d = VoxelDomain::from_fn(s, 0.2, |i, j, k| bits[(k * 5 + j) * 5 + i]);
        prop_assume!(d.is_ok());
        if let Ok(c) = GridComplex::build(d.unwrap()) {
            let p = linalg::matmul(c.ccirc_csc(), c.g_csc());
            prop_assert!(linalg::triplets(&p).iter().all(|t| t.val == 0.0));
        }
    }

    #[test]
    fn young_bound_holds(sigma in 0.8f64..2.5, l1 in 0.05f64..0.95, n in 1usize..4) {
        let c = solid(6);
        let k = ConvolutionKernel::gaussian_with_l1(c.h(), sigma, l1);
        let eps = convolution_coefficient(&c, &k, n).unwrap();
        let kd = eps.to_dense() - Mat::<f64>::identity(c.n1(), c.n1());
        prop_assert!(linalg::spectral_norm(&kd) <= k.l1_norm(c.h(), n) + 1e-10);
        prop_assert!(sym_min(&eps.to_dense()) >= 1.0 - k.l1_norm(c.h(), n) - 1e-10);
    }

    #[test]
    fn coercivity_transfers_to_the_edge_operator(
        alpha in 0.2f64..2.0,
        seed in any::<u64>(),
    ) {
        let c = solid(4);
        let rng = std::cell::RefCell::new(ChaCha8Rng::seed_from_u64(seed));
        use rand::Rng;
        let field = TensorField::from_fn([4; 3], |_, _, _| {
            let mut rng = rng.borrow_mut();
            let b = Mat::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let skew = Mat::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let t = b.transpose() * &b + Mat::<f64>::identity(3, 3) * alpha + (&skew - skew.transpose());
            [[t[(0, 0)], t[(0, 1)], t[(0, 2)]], [t[(1, 0)], t[(1, 1)], t[(1, 2)]], [t[(2, 0)], t[(2, 1)], t[(2, 2)]]]
        });
        let eps = multiplication_coefficient(&c, &field, alpha).unwrap();
        prop_assert!(sym_min(&eps.to_dense()) >= alpha - 1e-10);
    }

    #[test]
    fn schur_factorization_on_random_operators(seed in any::<u64>(), n in 4usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = HilbertSpace::uniform(n, 0.5);
        let a = random_coercive(&space, 0.5, &mut rng);
        let b = BlockOperator::new(&a, random_split(&space, n / 2, &mut rng).unwrap()).unwrap();
        prop_assert!(lu_factorization_residual(&b).unwrap() <= 1e-10);
        let prod = block_inverse(&b).unwrap().to_dense() * a.to_dense() - Mat::<f64>::identity(n, n);
        prop_assert!(linalg::spectral_norm(&prod) <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    /// Without harmonic fields, the gradient compression of an invertible coefficient is
    /// invertible exactly when the curl compression of its inverse is. The coefficient acts as
    /// `[[s, a], [a, 1]]` on span{u, w} (u a gradient, w a curl) and as the identity elsewhere.
    #[test]
    fn gradient_and_curl_conditions_agree_without_harmonic_fields(
        a in 0.3f64..1.0,
        s in prop_oneof![Just(0.0), 0.2f64..1.5],
        seed in any::<u64>(),
    ) {
        prop_assume!((s - a * a).abs() >= 0.05);
        let c = solid(4);
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = Col::from_fn(c.n0(), |_| rng.random_range(-1.0..1.0));
        let psi = Col::from_fn(c.n2(), |_| rng.random_range(-1.0..1.0));
        let u = unit(linalg::spmv(c.g_csc(), &phi));
        let w = unit(linalg::spmv_t(c.ccirc_csc(), &psi));
        let n = c.n1();
        let m = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id + (s - 1.0) * u[i] * u[j] + a * (u[i] * w[j] + w[i] * u[j])
        });
        let eps = dense_coefficient(&c, m, "surgery").unwrap();
        let r = admissibility_check(&eps, DEFAULT_COND_CAP);
        prop_assert!(r.a1_ok);
        prop_assert_eq!(r.a2_ok, r.a3_ok);
        prop_assert_eq!(r.a2_ok, s != 0.0);
    }
}

#[test]
fn projections_are_idempotent() {
    let c = GridComplex::build(VoxelDomain::cavity_cube(9, 3).unwrap()).unwrap();
    let eps = nonlocal_h::coeff::random_coercive(&c, 0.5, 5).unwrap();
    let e = Col::from_fn(c.n1(), |i| ((i * 7919) % 113) as f64 / 113.0 - 0.5);
    for kind in [HarmonicKind::Dirichlet, HarmonicKind::Eps, HarmonicKind::EpsDual] {
        let p = project_harmonic(&e, &eps, kind).unwrap();
        let pp = project_harmonic(&p, &eps, kind).unwrap();
        assert!((pp - &p).norm_l2() <= 1e-10 * e.norm_l2(), "{kind:?}");
    }
}

#[test]
fn solves_are_deterministic() {
    let c = GridComplex::build(VoxelDomain::cavity_cube(9, 3).unwrap()).unwrap();
    let eps = nonlocal_h::coeff::layered_coefficient(&c, 1.0, 4.0, 3).unwrap();
    let data = scenario_data(&c, Seeds::default(), DataKind::Full).unwrap();
    let a = solve_electrostatics(&eps, &data).unwrap().field;
    let b = solve_electrostatics(&eps, &data).unwrap().field;
    assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn identical_configs_give_identical_csv() {
    let text = "domain = \"cavity-cube 9 3\"\nfamily = \"layered\"\nindices = [1, 2, 3]\ntest_fourier = 4\ntest_random = 2";
    let cfg = ScenarioConfig::from_toml(text).unwrap();
    let a = run_homogenisation(&cfg).unwrap().to_csv();
    let b = run_homogenisation(&ScenarioConfig::from_toml(text).unwrap()).unwrap().to_csv();
    assert_eq!(a, b);
}
