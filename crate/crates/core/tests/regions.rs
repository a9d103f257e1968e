use approx::assert_abs_diff_eq;
use infoembed::probability::binary_entropy;
use infoembed::problems::{probing_example, zs_example};
use infoembed::regions::{
    binary_example_rate, probing_sum_rate, probing_sum_rate_convexified, reevaluate, solve_ordered, BinaryMode, Budgets,
};
use infoembed::solvers::SolverConfig;

fn small() -> SolverConfig {
    SolverConfig::quick().with_card("U", 2).with_card("V", 2)
}

#[test]
fn ordered_points_revalidate() {
    let p = zs_example(0.3).unwrap();
    let o = solve_ordered(&p, 0.1, 0.25, 0.8, &small()).unwrap();
    assert!(o.nc.rate <= o.causal.rate + 1e-9);
    assert!(o.causal.rate <= o.sc.rate + 1e-9);
    for point in [&o.nc, &o.causal, &o.sc] {
        let e = reevaluate(&p, point, Budgets::new(0.1, 0.25, 0.8)).unwrap();
        assert_abs_diff_eq!(e.rate, point.rate, epsilon = 1e-9);
        assert!(e.embed_slack >= -1e-9);
    }
}

#[test]
fn binary_example_limits() {
    let cfg = SolverConfig::default();
    // delta = 0: Decoder 1 sees X whatever the action, so only Decoder 2 costs rate
    for d2 in [0.1, 0.25] {
        let r = binary_example_rate(0.0, d2, BinaryMode::NonCausal, &cfg).unwrap();
        assert_abs_diff_eq!(r, 1.0 - binary_entropy(d2), epsilon = 1e-6);
    }
    // delta = 1: Y reveals the action only, so the full bit is needed
    let r = binary_example_rate(1.0, 0.3, BinaryMode::StrictlyCausal, &cfg).unwrap();
    assert_abs_diff_eq!(r, 1.0, epsilon = 1e-6);
}

#[test]
fn convexified_probing_dominates() {
    let cfg = SolverConfig::default();
    for gx in [0.05, 0.1, 0.2] {
        let p = probing_example(0.5, 1.0, gx).unwrap();
        for r1 in [0.0, 0.5, 0.9] {
            let plain = probing_sum_rate(&p, r1, &cfg).unwrap();
            let conv = probing_sum_rate_convexified(&p, r1).unwrap();
            assert!(conv >= plain - 1e-6, "Gamma_X = {gx}, R1 = {r1}: {conv} < {plain}");
        }
    }
}
