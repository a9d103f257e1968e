use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use infoembed::probability::{Alphabet, ConditionalPmf, DeterministicMap};
use infoembed::problems::Matrix;
use infoembed::problems::{probing_example, zs_example, ChannelActionProblem, SourceMode};
use infoembed::solvers::SolverConfig;
use infoembed_cli::curves::{self, CurveTable, Sweep};
use infoembed_cli::selftest;
use infoembed_cli::{resolve_threads, solve_problem, with_threads, PointArgs, ProblemFile};

const EXIT_INPUT: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_SELFTEST: u8 = 3;

#[derive(Parser)]
#[command(
    name = "infoembed",
    version,
    about = "Rate-distortion-cost and capacity-cost regions with action embedding"
)]
struct Cli {
    /// Worker threads (default: $INFOEMBED_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one operating point of a problem file and print it as JSON.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        point: PointFlags,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Write a curve table as CSV.
    Curve {
        #[arg(value_enum)]
        which: CurveKind,
        /// Problem file for `custom`.
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Sweep for `custom`: `name=start:stop:step` or `name=v1,v2,...`.
        #[arg(long)]
        sweep: Option<Sweep>,
        #[command(flatten)]
        point: PointFlags,
        #[command(flatten)]
        solver: SolverFlags,
        /// Output path (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-test suite.
    Selftest {
        #[arg(long, conflicts_with = "full")]
        quick: bool,
        #[arg(long)]
        full: bool,
        #[arg(long, hide = true)]
        inject_sign_error: bool,
    },
    /// Print an example problem file.
    Example {
        #[arg(value_enum)]
        kind: ExampleKind,
        /// `delta` of the Z/S source example.
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveKind {
    Fig7,
    Fig8,
    Fig11,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleKind {
    Source,
    Channel,
    Probing,
}

#[derive(Args, Clone, Default)]
struct PointFlags {
    #[arg(long)]
    d1: Option<f64>,
    #[arg(long)]
    d2: Option<f64>,
    /// Cost budget (Gamma).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    r1: Option<f64>,
    #[arg(long)]
    gamma_x: Option<f64>,
    #[arg(long)]
    gamma_a: Option<f64>,
    /// Overrides the `mode` of a source problem file.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SourceMode>,
}

impl PointFlags {
    fn args(&self) -> PointArgs {
        PointArgs {
            d1: self.d1,
            d2: self.d2,
            gamma: self.gamma,
            r1: self.r1,
            gamma_x: self.gamma_x,
            gamma_a: self.gamma_a,
        }
    }
}

#[derive(Args, Clone, Default)]
struct SolverFlags {
    /// Use the quick solver settings as the base.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    refine_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Auxiliary alphabet cap, e.g. `U=4`; repeatable.
    #[arg(long = "card", value_parser = parse_card)]
    cards: Vec<(String, usize)>,
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        let mut c = if self.quick {
            SolverConfig::quick()
        } else {
            SolverConfig::default()
        };
        if let Some(g) = self.grid {
            c.grid_resolution = g;
        }
        if let Some(r) = self.restarts {
            c.restarts = r;
        }
        if let Some(i) = self.refine_iters {
            c.refine_iters = i;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        for (name, n) in &self.cards {
            c.aux_cardinalities.insert(name.clone(), *n);
        }
        c
    }
}

fn parse_mode(s: &str) -> Result<SourceMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| "expected non_causal, strictly_causal, causal, encoder_side or encoder_side_dual".to_string())
}

fn parse_card(s: &str) -> Result<(String, usize), String> {
    let (name, n) = s.split_once('=').ok_or("expected NAME=N")?;
    let n: usize = n.parse().map_err(|_| format!("`{n}` is not a positive integer"))?;
    Ok((name.trim().to_string(), n))
}

fn load(path: &PathBuf, mode: Option<SourceMode>) -> Result<infoembed_cli::Problem> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut file = ProblemFile::parse(&text)?;
    if mode.is_some() {
        file.mode = mode;
    }
    file.to_problem()
}

fn example_channel() -> Result<ChannelActionProblem> {
    let a = Alphabet::binary("A");
    let s = Alphabet::binary("S");
    let x = Alphabet::binary("X");
    let y = Alphabet::binary("Y");
    let state = ConditionalPmf::from_rows(s.clone(), vec![a.clone()], &[vec![0.9, 0.1], vec![0.2, 0.8]])?;
    let trans = ConditionalPmf::from_fn(vec![y], vec![x, s, a.clone()], |i, o| {
        let flip = if i[1] == 1 { 0.25 } else { 0.05 };
        if o[0] == i[0] {
            1.0 - flip
        } else {
            flip
        }
    })?;
    Ok(ChannelActionProblem {
        state_channel: state,
        transmission_channel: trans,
        action_map: DeterministicMap::identity(&a, "B"),
        cost: Matrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 1.5]])?,
    })
}

fn write_table(t: &CurveTable, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let f = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
            t.write_csv(std::io::BufWriter::new(f))
        }
        None => t.write_csv(std::io::stdout().lock()),
    }
}

fn run(cli: Cli) -> Result<u8> {
    let threads = resolve_threads(cli.threads)?;
    match cli.command {
        Command::Solve { problem, point, solver } => {
            let p = load(&problem, point.mode)?;
            let config = solver.config();
            let rp = with_threads(threads, || solve_problem(&p, &point.args(), &config, &[]))??;
            println!("{}", serde_json::to_string_pretty(&rp)?);
            Ok(if rp.feasible { 0 } else { EXIT_INFEASIBLE })
        }
        Command::Curve {
            which,
            problem,
            sweep,
            point,
            solver,
            out,
        } => {
            let config = solver.config();
            let table = match which {
                CurveKind::Fig7 => with_threads(threads, || curves::fig7(&config))??,
                CurveKind::Fig8 => with_threads(threads, || curves::fig8(&config))??,
                CurveKind::Fig11 => with_threads(threads, || curves::fig11(&config))??,
                CurveKind::Custom => {
                    let path = problem.ok_or_else(|| anyhow!("`curve custom` needs --problem"))?;
                    let sweep = sweep.ok_or_else(|| anyhow!("`curve custom` needs --sweep"))?;
                    let p = load(&path, point.mode)?;
                    let args = point.args();
                    with_threads(threads, || curves::custom(&p, &args, &sweep, &config))??
                }
            };
            write_table(&table, out.as_ref())?;
            Ok(0)
        }
        Command::Selftest {
            quick: _,
            full,
            inject_sign_error,
        } => {
            let opts = selftest::Options {
                full,
                inject_sign_error,
            };
            let report = with_threads(threads, || selftest::run(opts))??;
            println!("{report}");
            Ok(if report.passed() { 0 } else { EXIT_SELFTEST })
        }
        Command::Example { kind, delta } => {
            let file = match kind {
                ExampleKind::Source => ProblemFile::from_source(&zs_example(delta)?),
                ExampleKind::Channel => ProblemFile::from_channel(&example_channel()?),
                ExampleKind::Probing => ProblemFile::from_probing(&probing_example(0.5, 1.0, 0.25)?),
            };
            println!("{}", file.to_json());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
