//! Library side of the `infoembed` command: problem files, point solves,
//! curve tables and the self-test.

pub mod curves;
pub mod problem_file;
pub mod selftest;

use anyhow::{anyhow, bail, Result};
use infoembed::problems::{ProbingProblem, RegionPoint, SourceMode, Witness};
use infoembed::regions::{
    channel_max_sum_rate, probing_point, solve_causal_from, solve_encoder_side, solve_encoder_side_dual, solve_nc_from,
    solve_sc_from,
};
use infoembed::solvers::SolverConfig;

pub use problem_file::{Problem, ProblemFile};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "INFOEMBED_THREADS";

/// Operating-point parameters. Unset budgets are unconstrained, except the
/// distortions of source problems, which are required.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointArgs {
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub gamma: Option<f64>,
    pub r1: Option<f64>,
    pub gamma_x: Option<f64>,
    pub gamma_a: Option<f64>,
}

impl PointArgs {
    /// Sets the named parameter, as used by sweeps.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "d1" => &mut self.d1,
            "d2" => &mut self.d2,
            "gamma" => &mut self.gamma,
            "r1" => &mut self.r1,
            "gamma_x" => &mut self.gamma_x,
            "gamma_a" => &mut self.gamma_a,
            other => bail!("unknown sweep parameter `{other}` (expected d1, d2, gamma, r1, gamma_x or gamma_a)"),
        };
        *slot = Some(value);
        Ok(())
    }
}

fn probing_at(p: &ProbingProblem, args: &PointArgs) -> ProbingProblem {
    ProbingProblem {
        epsilon: p.epsilon,
        gamma_a: args.gamma_a.unwrap_or(p.gamma_a),
        gamma_x: args.gamma_x.unwrap_or(p.gamma_x),
    }
}

/// Solves `problem` at one operating point.
pub fn solve_problem(
    problem: &Problem,
    args: &PointArgs,
    config: &SolverConfig,
    warm: &[Witness],
) -> Result<RegionPoint> {
    let gamma = args.gamma.unwrap_or(f64::INFINITY);
    let point = match problem {
        Problem::Source(p) => {
            let d1 = args.d1.ok_or_else(|| anyhow!("source problems need --d1"))?;
            let d2 = args.d2.ok_or_else(|| anyhow!("source problems need --d2"))?;
            match p.mode {
                SourceMode::NonCausal => solve_nc_from(p, d1, d2, gamma, config, warm)?,
                SourceMode::StrictlyCausal => solve_sc_from(p, d1, d2, gamma, config, warm)?,
                SourceMode::Causal => solve_causal_from(p, d1, d2, gamma, config, warm)?,
                SourceMode::EncoderSide => solve_encoder_side(p, d1, d2, gamma, config)?,
                SourceMode::EncoderSideDual => solve_encoder_side_dual(p, d1, d2, gamma, config)?,
            }
        }
        Problem::Channel(p) => channel_max_sum_rate(p, args.r1.unwrap_or(0.0), gamma, config)?,
        Problem::Probing(p) => {
            let q = probing_at(p, args);
            if let Some(v) = q.validate().first() {
                bail!("{v}");
            }
            probing_point(&q, args.r1.unwrap_or(0.0), config, warm)?
        }
    };
    Ok(point)
}

/// Runs `f` on a pool of `threads` workers, or on the global pool when
/// `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?;
            Ok(pool.install(f))
        }
    }
}

/// `--threads` if given, otherwise the environment default.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| anyhow!("{THREADS_ENV} must be a positive integer, found `{v}`")),
        _ => Ok(None),
    }
}
