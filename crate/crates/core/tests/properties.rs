//! Randomized properties over potentials and frictions at small cutoffs.

use approx::assert_relative_eq;
use proptest::prelude::*;

use hypoco_core::basis::{BasisSet, BasisSpec, Potential};
use hypoco_core::models::{alpha_t, norm_x_squared, norm_x_squared_sparse};
use hypoco_core::operators::{verify_structural_assumptions, ModelOperators, ModelSpec};
use hypoco_core::random::Rng;
use hypoco_core::schur::{block_resolvent, build_decomposition, DenseGenerator, DEFAULT_RANK_TOL};
use hypoco_core::study::evaluate;

fn potential() -> impl Strategy<Value = Potential> {
    (-1.0..1.0f64, -1.0..1.0f64, -0.5..0.5f64, -0.5..0.5f64).prop_map(|(a, b, c, e)| {
        Potential::from_modes(1, [(vec![1], a, b), (vec![2], c, e)]).unwrap()
    })
}

fn model() -> impl Strategy<Value = ModelSpec> {
    (0.05..20.0f64, any::<bool>()).prop_map(|(g, rhmc)| {
        if rhmc {
            ModelSpec::rhmc(g)
        } else {
            ModelSpec::langevin(g)
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn identities_hold_for_any_band_limited_potential(v in potential(), m in model()) {
        let basis = BasisSet::build(&BasisSpec::new(1, 5, 6), &v).unwrap();
        let ops = ModelOperators::assemble(&basis, &m).unwrap();
        let report = verify_structural_assumptions(&ops, 1.0, 1e-10).unwrap();
        prop_assert!(report.s_numeric > 0.0);
    }

    // Every hypothesis of the abstract bound holds exactly for the Galerkin
    // matrices, so the bound must dominate at any cutoff.
    #[test]
    fn abstract_bound_dominates_the_discrete_resolvent(v in potential(), m in model()) {
        let e = evaluate(&BasisSpec::new(1, 4, 6), &v, &m, DEFAULT_RANK_TOL).unwrap();
        prop_assert!(e.bound >= e.exact, "bound {} < exact {}", e.bound, e.exact);
        if let Some(b) = e.model_bound {
            prop_assert!(b >= e.exact, "model bound {} < exact {}", b, e.exact);
        }
    }

    #[test]
    fn block_solve_agrees_with_lu(v in potential(), m in model(), seed in any::<u64>()) {
        let basis = BasisSet::build(&BasisSpec::new(1, 4, 5), &v).unwrap();
        let ops = ModelOperators::assemble(&basis, &m).unwrap();
        let gen = DenseGenerator::from_operators(&ops);
        let dec = build_decomposition(&gen, DEFAULT_RANK_TOL).unwrap();
        let phi = Rng::seed(seed).uniform_vector(ops.dimension());
        let reference = gen.generator().lu().solve(&phi).unwrap();
        let u = block_resolvent(&dec, &phi).unwrap();
        prop_assert!((&u - &reference).norm() <= 1e-9 * reference.norm());
    }

    #[test]
    fn dense_and_sparse_x_agree(v in potential()) {
        let basis = BasisSet::build(&BasisSpec::new(1, 4, 4), &v).unwrap();
        let ops = ModelOperators::assemble(&basis, &ModelSpec::langevin(1.0)).unwrap();
        let dec = build_decomposition(&DenseGenerator::from_operators(&ops), DEFAULT_RANK_TOL).unwrap();
        let dense = norm_x_squared(&dec).unwrap();
        let sparse = norm_x_squared_sparse(&ops.hamiltonian, &ops.zero_mask()).unwrap();
        assert_relative_eq!(dense, sparse, max_relative = 1e-9);
    }
}

proptest! {
    #[test]
    fn alpha_t_is_a_contraction_decreasing_in_t(
        g in 1e-3..1e3f64,
        s in 0.1..10.0f64,
        t in 0.01..10.0f64,
        c1 in 1.0..10.0f64,
        c2 in 0.1..10.0f64,
    ) {
        let a = alpha_t(g, s, t, c1, c2).unwrap();
        prop_assert!(a > 0.0 && a < 1.0);
        prop_assert!(alpha_t(g, s, 2.0 * t, c1, c2).unwrap() < a);
    }
}
