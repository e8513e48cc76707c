//! Property tests pinning the exact solver to an independent oracle and to
//! the metric laws any W_p must satisfy.

use proptest::prelude::*;
use wflat_core::measure::DiscreteMeasure;
use wflat_core::transport::{brute_force_wasserstein, wasserstein};

/// Up to four planar atoms with weights in [0.1, 1], normalized to unit mass
/// so any two draws are transport-compatible.
fn small_measure() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(
        ((-1.0f64..1.0), (-1.0f64..1.0), (0.1f64..1.0)),
        1..=4,
    )
    .prop_map(|atoms| {
        let pts: Vec<Vec<f64>> = atoms.iter().map(|&(x, y, _)| vec![x, y]).collect();
        let ws: Vec<f64> = atoms.iter().map(|&(_, _, w)| w).collect();
        DiscreteMeasure::new(2, &pts, &ws).unwrap().normalized()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn simplex_matches_the_exhaustive_oracle(
        a in small_measure(),
        b in small_measure(),
        p in prop::sample::select(vec![1.0f64, 2.0]),
    ) {
        let fast = wasserstein(p, &a, &b).unwrap().cost;
        let slow = brute_force_wasserstein(p, &a, &b).unwrap();
        let scale = fast.abs().max(slow.abs()).max(1e-12);
        prop_assert!((fast - slow).abs() <= 1e-9 * scale, "fast {fast} vs oracle {slow}");
    }

    #[test]
    fn cost_is_symmetric(a in small_measure(), b in small_measure()) {
        for p in [1.0, 2.0] {
            let ab = wasserstein(p, &a, &b).unwrap().cost;
            let ba = wasserstein(p, &b, &a).unwrap().cost;
            let scale = ab.max(ba).max(1e-12);
            prop_assert!((ab - ba).abs() <= 1e-9 * scale, "ab {ab} vs ba {ba}");
        }
    }

    #[test]
    fn triangle_inequality_holds(
        a in small_measure(),
        b in small_measure(),
        c in small_measure(),
    ) {
        for p in [1.0, 2.0] {
            let ac = wasserstein(p, &a, &c).unwrap().cost;
            let ab = wasserstein(p, &a, &b).unwrap().cost;
            let bc = wasserstein(p, &b, &c).unwrap().cost;
            prop_assert!(ac <= ab + bc + 1e-9, "ac {ac} > ab {ab} + bc {bc}");
        }
    }

    #[test]
    fn w1_never_exceeds_w2_on_unit_mass(a in small_measure(), b in small_measure()) {
        let w1 = wasserstein(1.0, &a, &b).unwrap().cost;
        let w2 = wasserstein(2.0, &a, &b).unwrap().cost;
        prop_assert!(w1 <= w2 + 1e-12, "w1 {w1} > w2 {w2}");
    }

    #[test]
    fn self_distance_is_exactly_zero(a in small_measure()) {
        for p in [1.0, 2.0] {
            let plan = wasserstein(p, &a, &a).unwrap();
            prop_assert_eq!(plan.cost, 0.0);
        }
    }

    #[test]
    fn plan_marginals_recover_the_inputs(a in small_measure(), b in small_measure()) {
        let plan = wasserstein(2.0, &a, &b).unwrap();
        let mut out = vec![0.0; a.len()];
        let mut into = vec![0.0; b.len()];
        for &(i, j, m) in &plan.pairs {
            out[i] += m;
            into[j] += m;
        }
        for i in 0..a.len() {
            prop_assert!((out[i] - a.weight(i)).abs() <= 1e-9, "row {i}");
        }
        for j in 0..b.len() {
            prop_assert!((into[j] - b.weight(j)).abs() <= 1e-9, "col {j}");
        }
    }
}
