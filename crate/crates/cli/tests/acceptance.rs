//! Acceptance criteria 1-9, one pass/fail line each.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use infoembed::oracle::{catalog, cross_check, exhaustive_optimum, quantization_bound, DEFAULT_CAP};
use infoembed::probability::{binary_entropy, Alphabet, ConditionalPmf, DeterministicMap, FinitePmf};
use infoembed::problems::{probing_example, zs_example, ChannelActionProblem, Matrix, SourceActionProblem, SourceMode};
use infoembed::regions::{
    channel_terms, decoder2_threshold, probing_sum_rate, region_corners, region_corners_split, region_transfer_closure,
    solve_nc, solve_ordered,
};
use infoembed::solvers::{minimize_constrained, SolverConfig};
use infoembed_cli::curves::{self, CurveTable};
use infoembed_cli::selftest::kernel_identities;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if took > limit {
        o.pass = false;
        o.detail = format!("{}; took {took:.1?}, limit {limit:?}", o.detail);
    } else {
        o.detail = format!("{} ({took:.1?})", o.detail);
    }
    o
}

fn rows_where<'a>(t: &'a CurveTable, col: &str, v: f64) -> impl Iterator<Item = &'a Vec<f64>> + 'a {
    let c = t.column(col).unwrap();
    t.rows.iter().filter(move |r| (r[c] - v).abs() < 1e-12)
}

fn criterion1() -> Outcome {
    let c = kernel_identities(1000, 7);
    outcome(c.pass, c.detail)
}

fn criterion2() -> Outcome {
    let p = zs_example(0.0).unwrap();
    let cfg = SolverConfig {
        grid_resolution: 100,
        ..SolverConfig::default()
    }
    .with_card("U", 2);
    let mut worst: f64 = 0.0;
    for d2 in [0.05, 0.11, 0.2, 0.3] {
        let r = solve_nc(&p, 0.0, d2, 1.0, &cfg).unwrap();
        if !r.feasible {
            return outcome(false, format!("infeasible at D2 = {d2}"));
        }
        worst = worst.max((r.rate - (1.0 - binary_entropy(d2))).abs());
    }
    outcome(worst <= 2e-3, format!("max |rate - (1 - H2(D2))| = {worst:.3e}"))
}

fn criterion3() -> Outcome {
    let cfg = SolverConfig::default();
    let t = curves::fig7(&cfg).unwrap();
    let rate = t.column("rate_nc").unwrap();
    let d2c = t.column("d2").unwrap();
    let rows: Vec<&Vec<f64>> = rows_where(&t, "delta", 0.5).collect();
    let monotone = rows.windows(2).all(|w| w[1][rate] <= w[0][rate] + 1e-9);
    let tail: Vec<f64> = rows.iter().filter(|r| r[d2c] >= 0.4 - 1e-12).map(|r| r[rate]).collect();
    let spread =
        tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = decoder2_threshold(0.5, &cfg).unwrap();
    outcome(
        monotone && spread <= 1e-3 && (threshold - 0.4).abs() <= 0.05,
        format!("non-increasing: {monotone}, spread for D2 >= 0.4: {spread:.3e}, threshold {threshold:.4}"),
    )
}

fn criterion4() -> Outcome {
    let t = curves::fig8(&SolverConfig::default()).unwrap();
    let (dc, d2c, diff) = (
        t.column("delta").unwrap(),
        t.column("d2").unwrap(),
        t.column("diff").unwrap(),
    );
    let min_diff = t.rows.iter().map(|r| r[diff]).fold(f64::INFINITY, f64::min);
    let ends = t
        .rows
        .iter()
        .filter(|r| r[dc] == 0.0 || r[dc] == 1.0)
        .map(|r| r[diff].abs())
        .fold(0.0, f64::max);
    let mid: Vec<(f64, f64)> = rows_where(&t, "delta", 0.5).map(|r| (r[d2c], r[diff])).collect();
    let shrinking = mid.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-6);
    outcome(
        min_diff >= -1e-6 && ends <= 1e-6 && shrinking,
        format!("min diff {min_diff:.3e}, |diff| at delta in {{0, 1}} <= {ends:.3e}, diff at delta = 0.5 {mid:?}"),
    )
}

fn criterion5() -> Outcome {
    let cfg = SolverConfig::default();
    let t = curves::fig11(&cfg).unwrap();
    let (gc, rc, sc) = (
        t.column("gamma_x").unwrap(),
        t.column("r1").unwrap(),
        t.column("sum_rate").unwrap(),
    );
    let at = |g: f64, r1: f64| {
        t.rows
            .iter()
            .find(|r| (r[gc] - g).abs() < 1e-12 && (r[rc] - r1).abs() < 1e-12)
            .map(|r| r[sc])
            .unwrap()
    };
    let mut ordered = true;
    let mut saturated = true;
    for g in curves::fig11_gamma_grid() {
        let (a, b, c) = (at(g, 0.0), at(g, 0.5), at(g, 0.9));
        if g <= 0.2 + 1e-12 && !(a >= b - 1e-6 && b >= c - 1e-6) {
            ordered = false;
        }
        if g >= 0.35 && [a, b, c].iter().any(|v| (v - 0.5).abs() > 1e-6) {
            saturated = false;
        }
    }
    let v = probing_sum_rate(&probing_example(0.5, 1.0, 0.25).unwrap(), 0.0, &cfg).unwrap();
    outcome(
        ordered && saturated && (v - 0.5).abs() <= 1e-4,
        format!(
            "ordered for Gamma_X <= 0.2: {ordered}, saturated for Gamma_X >= 0.35: {saturated}, value at 0.25: {v:.9}"
        ),
    )
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, n: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

fn random_source(rng: &mut ChaCha8Rng) -> SourceActionProblem {
    let mut p = zs_example(0.5).unwrap();
    let x = p.x().clone();
    let a = p.a().clone();
    p.source = FinitePmf::new(x.clone(), random_rows(rng, 1, 2).remove(0)).unwrap();
    p.side_channel = ConditionalPmf::from_rows(Alphabet::binary("Y"), vec![x, a], &random_rows(rng, 4, 2)).unwrap();
    p.action_cost = vec![0.0, rng.gen_range(0.5..1.5)];
    p.mode = SourceMode::NonCausal;
    p
}

/// Rate with infeasible points read as `+inf`.
fn extended(p: &infoembed::problems::RegionPoint) -> f64 {
    if p.feasible {
        p.rate
    } else {
        f64::INFINITY
    }
}

fn criterion6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = SolverConfig::quick().with_card("U", 2).with_card("V", 2);
    let mut worst = f64::NEG_INFINITY;
    let mut all_feasible = 0;
    for i in 0..20 {
        let p = random_source(&mut rng);
        let (d1, d2, gamma) = (
            rng.gen_range(0.1..0.5),
            rng.gen_range(0.1..0.5),
            rng.gen_range(0.3..1.5),
        );
        let o = solve_ordered(&p, d1, d2, gamma, &cfg).unwrap();
        let (nc, c, sc) = (extended(&o.nc), extended(&o.causal), extended(&o.sc));
        if nc > c + 1e-6 || c > sc + 1e-6 {
            return outcome(false, format!("problem {i}: nc {nc}, causal {c}, sc {sc}"));
        }
        if sc.is_finite() {
            all_feasible += 1;
            worst = worst.max(nc - c).max(c - sc);
        }
    }
    outcome(
        all_feasible > 0,
        format!("20 problems ({all_feasible} feasible in all three models), worst ordering gap {worst:.3e}"),
    )
}

fn random_channel(rng: &mut ChaCha8Rng) -> ChannelActionProblem {
    let na = rng.gen_range(2..=3);
    let a = Alphabet::indexed("A", na);
    let s = Alphabet::binary("S");
    let x = Alphabet::binary("X");
    let f: Vec<usize> = (0..na).map(|_| rng.gen_range(0..2)).collect();
    ChannelActionProblem {
        state_channel: ConditionalPmf::from_rows(s.clone(), vec![a.clone()], &random_rows(rng, na, 2)).unwrap(),
        transmission_channel: ConditionalPmf::from_rows(
            Alphabet::binary("Y"),
            vec![x, s, a.clone()],
            &random_rows(rng, 4 * na, 2),
        )
        .unwrap(),
        action_map: DeterministicMap::new(vec![a], Alphabet::binary("B"), f).unwrap(),
        cost: Matrix::constant(na, 2, 0.0),
    }
}

fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut accepted = 0;
    let mut drawn = 0;
    while accepted < 100 {
        drawn += 1;
        let p = random_channel(&mut rng);
        let (a, s) = (p.a().clone(), p.s().clone());
        let u = Alphabet::binary("U");
        let pa = FinitePmf::new(a.clone(), random_rows(&mut rng, 1, a.len()).remove(0)).unwrap();
        let pu = ConditionalPmf::from_rows(
            u.clone(),
            vec![a.clone(), s.clone()],
            &random_rows(&mut rng, a.len() * 2, 2),
        )
        .unwrap();
        let g =
            DeterministicMap::new(vec![u, s], p.x().clone(), (0..4).map(|_| rng.gen_range(0..2)).collect()).unwrap();
        let t = channel_terms(&p, &pa, &pu, &g).unwrap();
        if t.sum < 0.0 || t.r2_bound < 0.0 {
            continue;
        }
        accepted += 1;
        let lhs = region_transfer_closure(&region_corners_split(&t));
        let rhs = region_transfer_closure(&region_corners(&t));
        let same = lhs.len() == rhs.len()
            && lhs
                .iter()
                .zip(&rhs)
                .all(|(l, r)| (l.0 - r.0).abs() <= 1e-12 && (l.1 - r.1).abs() <= 1e-12);
        if !same {
            return outcome(false, format!("instance {accepted}: {lhs:?} vs {rhs:?}"));
        }
    }
    outcome(true, format!("100 instances ({drawn} drawn)"))
}

fn criterion8() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for inst in catalog().unwrap() {
        let cfg = SolverConfig {
            grid_resolution: inst.resolution,
            max_grid_points: u64::MAX,
            ..SolverConfig::default()
        };
        let out = minimize_constrained(inst.objective.as_ref(), &inst.shape, &cfg, inst.sense);
        let oracle = exhaustive_optimum(
            inst.objective.as_ref(),
            &inst.shape,
            inst.resolution,
            inst.sense,
            DEFAULT_CAP,
        );
        match oracle {
            Ok(o) => {
                let bound = quantization_bound(inst.lipschitz, inst.shape.dim(), inst.resolution);
                let v = cross_check(&out, &o, bound, 1e-9, inst.sense);
                if !v.pass {
                    pass = false;
                    details.push(format!("{}: {}", inst.name, v.detail));
                }
            }
            Err(e) => {
                pass = false;
                details.push(format!("{}: {e}", inst.name));
            }
        }
    }
    let detail = if pass {
        "every catalog instance agrees".to_string()
    } else {
        details.join("; ")
    };
    outcome(pass, detail)
}

fn curve_bytes(threads: Option<&str>, env_threads: Option<&str>) -> Vec<u8> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_infoembed"));
    cmd.args(["curve", "fig11", "--seed", "3"]);
    if let Some(t) = threads {
        cmd.args(["--threads", t]);
    }
    match env_threads {
        Some(t) => cmd.env(infoembed_cli::THREADS_ENV, t),
        None => cmd.env_remove(infoembed_cli::THREADS_ENV),
    };
    let out = cmd.output().expect("run infoembed");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn criterion9() -> Outcome {
    let base = curve_bytes(Some("1"), None);
    let runs = [
        curve_bytes(Some("1"), None),
        curve_bytes(Some("4"), None),
        curve_bytes(None, Some("3")),
    ];
    let same = runs.iter().all(|r| *r == base);
    outcome(
        same && !base.is_empty(),
        format!("{} bytes, 4 runs with 1, 1, 4 and 3 threads", base.len()),
    )
}

fn main() -> ExitCode {
    let min = |m: u64| Duration::from_secs(60 * m);
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("kernel identities", Duration::from_secs(10), criterion1),
        ("binary rate-distortion agreement", min(2), criterion2),
        ("Decoder 2 threshold curve", min(15), criterion3),
        ("non-causal versus strictly causal gap", min(30), criterion4),
        ("probing sum rate", min(5), criterion5),
        ("ordering of observation models", min(30), criterion6),
        ("rate-transfer corner equivalence", Duration::from_secs(1), criterion7),
        ("oracle cross-check", min(10), criterion8),
        ("determinism", min(10), criterion9),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let o = timed(*limit, f);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {tag} {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
