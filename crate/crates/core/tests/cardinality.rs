//! The causal rate for growing `|V|`, each solve warm-started from the
//! previous witness padded with unused symbols.

use infoembed::problems::{zs_example, Witness};
use infoembed::regions::{solve_causal, solve_causal_from};
use infoembed::solvers::SolverConfig;

/// Pads a causal witness laid out as `[x][v][a][u]` from `nv` to `nv + 1`
/// values of `V`.
fn pad_v(w: &Witness, nx: usize, nv: usize, na: usize, nu: usize) -> Witness {
    let mut params = vec![0.0; nx * (nv + 1) * na * nu];
    for x in 0..nx {
        for v in 0..nv {
            for k in 0..na * nu {
                params[(x * (nv + 1) + v) * na * nu + k] = w.params[(x * nv + v) * na * nu + k];
            }
        }
    }
    let mut cardinalities = w.cardinalities.clone();
    cardinalities.insert("V".into(), nv + 1);
    Witness {
        blocks: vec![(nv + 1) * na * nu; nx],
        params,
        maps: Vec::new(),
        cardinalities,
    }
}

#[test]
fn causal_rate_does_not_grow_with_v() {
    let p = zs_example(0.5).unwrap();
    let (d1, d2, gamma) = (0.2, 0.3, 0.6);
    let base = SolverConfig::quick().with_card("U", 2);
    let mut prev = solve_causal(&p, d1, d2, gamma, &base.clone().with_card("V", 2)).unwrap();
    assert!(prev.feasible);
    let mut rates = vec![prev.rate];
    for nv in 3..=5 {
        let warm = pad_v(&prev.witness, 2, nv - 1, 2, 2);
        let cfg = base.clone().with_card("V", nv);
        let next = solve_causal_from(&p, d1, d2, gamma, &cfg, &[warm]).unwrap();
        assert!(next.feasible);
        assert!(
            next.rate <= prev.rate + 1e-9,
            "|V| = {nv}: {} > {}",
            next.rate,
            prev.rate
        );
        rates.push(next.rate);
        prev = next;
    }
    // |V| = 2 is already within the solver tolerance of |V| = |X| + 3 here
    assert!(rates[0] - rates[3] < 1e-3, "{rates:?}");
}
