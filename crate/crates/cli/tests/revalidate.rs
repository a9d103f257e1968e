//! Rates in the figure tables are reproduced by re-evaluating their
//! witnesses.

use infoembed::problems::probing_example;
use infoembed::regions::{binary_example_point, probing_point, BinaryExample, BinaryMode, ProbingObjective};
use infoembed::solvers::SolverConfig;
use infoembed_cli::curves;

#[test]
fn binary_witnesses_revalidate() {
    let cfg = SolverConfig::quick();
    let mut warm = Vec::new();
    for d2 in curves::fig7_d2_grid().into_iter().step_by(4) {
        let p = binary_example_point(0.5, d2, BinaryMode::NonCausal, &cfg, &warm).unwrap();
        let (rate, slack) = BinaryExample::new(0.5, d2, BinaryMode::NonCausal)
            .unwrap()
            .rate_and_slack(&p.witness.params);
        assert!((rate - p.rate).abs() <= 1e-9);
        assert!(slack >= -1e-9);
        warm = vec![p.witness];
    }
}

#[test]
fn probing_witnesses_revalidate() {
    let cfg = SolverConfig::quick();
    for gx in [0.0, 0.1, 0.3] {
        let problem = probing_example(0.5, 1.0, gx).unwrap();
        for r1 in curves::FIG11_R1 {
            let p = probing_point(&problem, r1, &cfg, &[]).unwrap();
            let v = &p.witness.params;
            let (rate, ex, ea) = ProbingObjective::new(&problem, r1).unwrap().terms(v[1], v[3], v[5]);
            assert!((rate - p.rate).abs() <= 1e-9);
            assert!(ex <= gx + 1e-9 && ea <= 1.0 + 1e-9);
        }
    }
}
