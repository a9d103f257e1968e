//! Self-test: kernel identities, oracle cross-checks, ordering and
//! endpoint properties.

use std::fmt;

use anyhow::Result;
use infoembed::oracle::{catalog, cross_check, exhaustive_optimum, quantization_bound, DEFAULT_CAP};
use infoembed::probability::{chain_compose, Alphabet, ConditionalPmf, Factor, JointDistribution};
use infoembed::problems::{probing_example, zs_example};
use infoembed::regions::{binary_example_point, probing_point, solve_nc, solve_ordered, BinaryExample, BinaryMode};
use infoembed::solvers::{minimize_constrained, simplex_grid_len, Evaluation, Objective, Sense, Shape, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;
const QUICK_LATTICE: u128 = 20_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Options {
    pub full: bool,
    /// Flips the sign of the embedding constraint in the witness check, so
    /// that the check must fail.
    pub inject_sign_error: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn random_pmf(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            // occasional exact zeros exercise the 0 log 0 convention
            if rng.gen_bool(0.1) {
                0.0
            } else {
                -rng.gen::<f64>().max(1e-300).ln()
            }
        })
        .collect();
    if v.iter().all(|&p| p == 0.0) {
        v[0] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= s);
    v
}

fn random_joint(rng: &mut impl Rng) -> JointDistribution {
    let axes: Vec<Alphabet> = ["X", "Y", "Z"]
        .iter()
        .map(|n| Alphabet::indexed(*n, rng.gen_range(2..=4)))
        .collect();
    let size = axes.iter().map(Alphabet::len).product();
    JointDistribution::new(axes, random_pmf(rng, size)).expect("random joint is normalized")
}

/// Worst violation of the identities on one joint; also checks the
/// data-processing inequality on the chain `X - Y - Z'` with a fresh `Z'`.
fn identity_error(j: &JointDistribution, rng: &mut impl Rng) -> infoembed::Result<f64> {
    let mut worst: f64 = 0.0;
    let h_xyz = j.entropy(&["X", "Y", "Z"])?;
    let chain =
        j.entropy(&["X"])? + j.conditional_entropy(&["Y"], &["X"])? + j.conditional_entropy(&["Z"], &["X", "Y"])?;
    worst = worst.max((h_xyz - chain).abs());
    for (l, r, g) in [
        (&["X"][..], &["Y"][..], &[][..]),
        (&["X"], &["Z"], &["Y"]),
        (&["Y"], &["Z"], &["X"]),
        (&["X", "Y"], &["Z"], &[]),
    ] {
        worst = worst.max(-j.mutual_information(l, r, g)?);
    }
    worst = worst.max(-j.conditional_entropy(&["X"], &["Y", "Z"])?);

    let xy = j.marginalize(&["X", "Y"])?;
    let ny = j.axes()[j.axis("Y")?].len();
    let zc = Alphabet::indexed("W", rng.gen_range(2..=4));
    let rows: Vec<Vec<f64>> = (0..ny).map(|_| random_pmf(rng, zc.len())).collect();
    let channel = ConditionalPmf::from_rows(zc, vec![j.axes()[j.axis("Y")?].clone()], &rows)?;
    let m = xy.extend(&Factor::Conditional(channel))?;
    worst = worst.max(m.mutual_information(&["X"], &["W"], &[])? - m.mutual_information(&["X"], &["Y"], &[])?);

    let px = j.marginalize(&["X"])?;
    let rebuilt = chain_compose(&[
        Factor::Pmf(infoembed::probability::FinitePmf::new(
            px.axes()[0].clone(),
            px.tensor().to_vec(),
        )?),
        Factor::Conditional(j.condition(&["Y", "Z"], &["X"])?),
    ])?;
    for (a, b) in rebuilt.tensor().iter().zip(j.tensor()) {
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

/// Chain rule, non-negativity, data processing and factorization
/// round-trip on `count` random joints.
pub fn kernel_identities(count: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let j = random_joint(&mut rng);
        match identity_error(&j, &mut rng) {
            Ok(e) => worst = worst.max(e),
            Err(e) => return Check::new("kernel identities", false, format!("joint {i}: {e}")),
        }
    }
    Check::new(
        "kernel identities",
        worst <= TOL,
        format!("{count} joints, worst violation {worst:.3e}"),
    )
}

fn lattice_points(shape: &Shape, resolution: usize) -> u128 {
    shape.blocks.iter().fold(shape.map_combinations(), |acc, &b| {
        acc.saturating_mul(simplex_grid_len(b, resolution))
    })
}

/// Solver against exhaustive enumeration on each catalog instance, at the
/// instance resolution. With `max_points` set, the resolution is lowered
/// until the lattice has at most that many points.
pub fn oracle_cross_checks(max_points: Option<u128>) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for inst in catalog()? {
        let mut res = inst.resolution;
        if let Some(cap) = max_points {
            while res > 1 && lattice_points(&inst.shape, res) > cap {
                res -= 1;
            }
        }
        let config = SolverConfig {
            grid_resolution: res,
            max_grid_points: u64::MAX,
            ..SolverConfig::default()
        };
        let outcome = minimize_constrained(inst.objective.as_ref(), &inst.shape, &config, inst.sense);
        let name = format!("oracle: {}", inst.name);
        let check = match exhaustive_optimum(inst.objective.as_ref(), &inst.shape, res, inst.sense, DEFAULT_CAP) {
            Ok(oracle) => {
                let bound = quantization_bound(inst.lipschitz, inst.shape.dim(), res);
                let v = cross_check(&outcome, &oracle, bound, TOL, inst.sense);
                Check::new(name, v.pass, format!("resolution {res}, {}", v.detail))
            }
            Err(e) => Check::new(name, false, e.to_string()),
        };
        out.push(check);
    }
    Ok(out)
}

struct Flipped<'a>(&'a BinaryExample);

impl Objective for Flipped<'_> {
    fn evaluate(&self, params: &[f64], maps: &[Vec<usize>]) -> Evaluation {
        let mut e = self.0.evaluate(params, maps);
        e.constraints[1] = -e.constraints[1];
        e
    }
}

/// Solves the strictly causal binary example at `delta = 0.5`, `D2 = 0.2` and recomputes the
/// embedding slack from the returned witness.
pub fn witness_embedding(config: &SolverConfig, inject_sign_error: bool) -> Result<Check> {
    let obj = BinaryExample::new(0.5, 0.2, BinaryMode::StrictlyCausal)?;
    let alpha = if inject_sign_error {
        minimize_constrained(&Flipped(&obj), &BinaryExample::shape(), config, Sense::Minimize)
            .witness
            .params
    } else {
        binary_example_point(0.5, 0.2, BinaryMode::StrictlyCausal, config, &[])?
            .witness
            .params
    };
    let (rate, slack) = obj.rate_and_slack(&alpha);
    Ok(Check::new(
        "witness embedding constraint",
        slack >= -TOL,
        format!("rate {rate:.9}, recomputed embedding slack {slack:.3e}"),
    ))
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Check {
    Check::new(
        name,
        (got - want).abs() <= tol,
        format!("got {got:.9}, expected {want} within {tol:e}"),
    )
}

/// Ordering of the three observation models and the closed-form endpoints.
pub fn properties(config: &SolverConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let small = config.clone().with_card("U", 2).with_card("V", 2);
    let o = solve_ordered(&zs_example(0.5)?, 0.2, 0.3, 0.6, &small)?;
    let ok = o.nc.feasible && o.causal.feasible && o.sc.feasible;
    out.push(Check::new(
        "ordering nc <= causal <= sc",
        ok && o.nc.rate <= o.causal.rate + 1e-6 && o.causal.rate <= o.sc.rate + 1e-6,
        format!("nc {:.9}, causal {:.9}, sc {:.9}", o.nc.rate, o.causal.rate, o.sc.rate),
    ));

    let p = solve_nc(&zs_example(1.0)?, 0.0, 0.5, 1.0, &small)?;
    out.push(close("non-causal Z/S endpoint at delta = 1", p.rate, 1.0, 1e-6));

    for delta in [0.0, 1.0] {
        let nc = binary_example_point(delta, 0.2, BinaryMode::NonCausal, config, &[])?;
        let sc = binary_example_point(
            delta,
            0.2,
            BinaryMode::StrictlyCausal,
            config,
            std::slice::from_ref(&nc.witness),
        )?;
        let nc = binary_example_point(
            delta,
            0.2,
            BinaryMode::NonCausal,
            config,
            &[sc.witness.clone(), nc.witness],
        )?;
        out.push(close(
            &format!("binary example sc - nc at delta = {delta}"),
            sc.rate - nc.rate,
            0.0,
            1e-6,
        ));
    }

    let p = probing_point(&probing_example(0.5, 1.0, 0.0)?, 0.0, config, &[])?;
    out.push(close("probing at Gamma_X = 0", p.rate, 0.0, 1e-9));
    for r1 in [0.0, 0.5, 0.9] {
        let p = probing_point(&probing_example(0.5, 1.0, 0.6)?, r1, config, &[])?;
        out.push(close(&format!("probing saturation at R1 = {r1}"), p.rate, 0.5, 1e-6));
    }
    Ok(out)
}

/// Runs the whole suite.
pub fn run(opts: Options) -> Result<Report> {
    let (config, joints, max_points) = if opts.full {
        (SolverConfig::default(), 1000, None)
    } else {
        (SolverConfig::quick(), 200, Some(QUICK_LATTICE))
    };
    let mut checks = vec![kernel_identities(joints, 0)];
    checks.extend(oracle_cross_checks(max_points)?);
    checks.extend(properties(&config)?);
    checks.push(witness_embedding(&config, opts.inject_sign_error)?);
    Ok(Report { checks })
}
