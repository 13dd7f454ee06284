mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use windfarm::wake::FreeStreamConditions;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dynamic_settles_on_static_solution(
        m in 2usize..=7,
        layout_seed in any::<u64>(),
        u in 6.0f64..12.0,
        phi in 0.0f64..360.0,
        yaws in prop::collection::vec(-20.0f64..20.0, 7),
    ) {
        let layout = common::random_layout(m, &mut ChaCha8Rng::seed_from_u64(layout_seed));
        let cond = FreeStreamConditions::new(u, phi);
        let gap = common::steady_gap(&layout, &yaws[..m], &cond, layout_seed);
        prop_assert!(gap < 0.02, "gap {gap}");
    }

    #[test]
    fn wakes_respect_advection_delay(
        m in 2usize..=5,
        layout_seed in any::<u64>(),
        u in 6.0f64..12.0,
        phi in 0.0f64..360.0,
    ) {
        let layout = common::random_layout(m, &mut ChaCha8Rng::seed_from_u64(layout_seed));
        let cond = FreeStreamConditions::new(u, phi);
        prop_assert_eq!(common::causality_violations(&layout, &cond, layout_seed), 0);
    }
}
