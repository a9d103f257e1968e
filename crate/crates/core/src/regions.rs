//! Evaluators for the single-letter rate expressions and the solvers and
//! sweeps built on them.
//!
//! Every `solve_*` function searches over the free conditional pmfs with
//! [`minimize_constrained`](crate::solvers::minimize_constrained) and returns
//! a [`RegionPoint`]. Source problems are minimizations, so the reported rate
//! is an upper bound on the true function; channel and probing problems are
//! maximizations and report lower bounds. The `*_from` variants take witnesses
//! of earlier solves as warm starts.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::probability::{
    binary_entropy, chain_compose, entropy, Alphabet, ConditionalPmf, Factor, FinitePmf, JointDistribution,
};
use crate::problems::{
    zs_example, ChannelActionProblem, Evaluator, ProbingProblem, RegionPoint, Slack, SourceActionProblem, SourceMode,
    Witness,
};
use crate::solvers::{
    bayes_decision, minimize_constrained_from, Evaluation, MapSpace, Objective, Point, SearchOutcome, Sense, Shape,
    SolverConfig,
};

/// Quantities evaluated at one choice of the free distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveEval {
    pub rate: f64,
    pub d1: f64,
    pub d2: f64,
    pub cost: f64,
    /// Right side minus left side of the embedding constraint.
    pub embed_slack: f64,
    pub extras: Vec<Slack>,
}

impl ObjectiveEval {
    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|s| s.name == name).map(|s| s.value)
    }
}

/// Distortion and cost budgets of a source problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budgets {
    pub d1: f64,
    pub d2: f64,
    pub gamma: f64,
}

impl Budgets {
    pub fn new(d1: f64, d2: f64, gamma: f64) -> Self {
        Self { d1, d2, gamma }
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [("D1", self.d1), ("D2", self.d2), ("Gamma", self.gamma)] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::OutOfRange {
                    name: name.into(),
                    value: v,
                    range: "[0, inf)".into(),
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Source problems

// Axis masks of the auxiliary joint laid out as [X, W, A, U, Y, B], where W
// is Xhat2 (non-causal, strictly causal) or V (causal).
const MX: u64 = 1;
const MW: u64 = 2;
const MA: u64 = 4;
const MU: u64 = 8;
const MY: u64 = 16;
const MB: u64 = 32;

fn aux_joint(p: &SourceActionProblem, params: &[f64], w: &Alphabet, u: &Alphabet) -> JointDistribution {
    let (nx, nw, na, nu, ny, nb) = (p.x().len(), w.len(), p.a().len(), u.len(), p.y().len(), p.b().len());
    let px = p.source.probs();
    let py = p.side_channel.table();
    let f = p.action_map.table();
    let block = nw * na * nu;
    let mut t = vec![0.0; nx * block * ny * nb];
    for x in 0..nx {
        for k in 0..block {
            let q = px[x] * params[x * block + k];
            if q == 0.0 {
                continue;
            }
            let a = (k / nu) % na;
            let b = f[a];
            for y in 0..ny {
                t[((x * block + k) * ny + y) * nb + b] = q * py[(x * na + a) * ny + y];
            }
        }
    }
    JointDistribution::from_raw(
        vec![
            p.x().clone(),
            w.clone(),
            p.a().clone(),
            u.clone(),
            p.y().clone(),
            p.b().clone(),
        ],
        t,
    )
}

fn eval_aux(p: &SourceActionProblem, j: &JointDistribution, mode: SourceMode) -> ObjectiveEval {
    let rate = j.mutual_information_mask(MX, MW | MA, 0) + j.mutual_information_mask(MX, MU, MW | MA | MY);
    let (_, d1) = bayes_decision(j, 0, &[3, 4], &p.d1);
    let d2 = if mode == SourceMode::Causal {
        bayes_decision(j, 0, &[1, 5], &p.d2).1
    } else {
        let m = j.marginal_ordered(&[0, 1]);
        let nw = j.shape()[1];
        m.iter()
            .enumerate()
            .map(|(i, &q)| if q > 0.0 { q * p.d2.get(i / nw, i % nw) } else { 0.0 })
            .sum()
    };
    let pa = j.marginal_ordered(&[2]);
    let cost = pa.iter().zip(&p.action_cost).map(|(q, c)| q * c).sum();
    let info = j.mutual_information_mask(MX, MW | MB, 0);
    let room = match mode {
        SourceMode::NonCausal => j.entropy_mask(MB),
        _ => j.conditional_entropy_mask(MB, MW),
    };
    ObjectiveEval {
        rate,
        d1,
        d2,
        cost,
        embed_slack: room - info,
        extras: Vec::new(),
    }
}

// Encoder-side joint laid out as [X, U, Xhat1, Xhat2]; A is independent.
fn encoder_joint(p: &SourceActionProblem, params: &[f64], u: &Alphabet) -> JointDistribution {
    let (nx, nu, n1, n2) = (p.x().len(), u.len(), p.xhat1.len(), p.xhat2.len());
    let px = p.source.probs();
    let (pu, rest) = params.split_at(nx * nu);
    let (p1, rest) = rest.split_at(nx * nu * n1);
    let p2 = &rest[..nx * nu * n2];
    let mut t = vec![0.0; nx * nu * n1 * n2];
    for x in 0..nx {
        for k in 0..nu {
            let q = px[x] * pu[x * nu + k];
            if q == 0.0 {
                continue;
            }
            let r = x * nu + k;
            for a in 0..n1 {
                for b in 0..n2 {
                    t[((r * n1) + a) * n2 + b] = q * p1[r * n1 + a] * p2[r * n2 + b];
                }
            }
        }
    }
    JointDistribution::from_raw(vec![p.x().clone(), u.clone(), p.xhat1.clone(), p.xhat2.clone()], t)
}

// Dual joint laid out as [X, Xhat1, Xhat2].
fn dual_joint(p: &SourceActionProblem, params: &[f64]) -> JointDistribution {
    let (nx, n1, n2) = (p.x().len(), p.xhat1.len(), p.xhat2.len());
    let px = p.source.probs();
    let block = n1 * n2;
    let t = (0..nx * block).map(|i| px[i / block] * params[i]).collect();
    JointDistribution::from_raw(vec![p.x().clone(), p.xhat1.clone(), p.xhat2.clone()], t)
}

/// `(H(f_Y(A)), H(f(A) | f_Y(A)), H(f(A)))` for an action pmf.
fn action_entropies(p: &SourceActionProblem, pa: &[f64]) -> (f64, f64, f64) {
    let f = p.action_map.table();
    let fy = p
        .side_map
        .as_ref()
        .map(|m| m.table().to_vec())
        .unwrap_or_else(|| vec![0; pa.len()]);
    let nb = p.b().len();
    let ny = fy.iter().max().map_or(1, |m| m + 1);
    let mut both = vec![0.0; nb * ny];
    let mut side = vec![0.0; ny];
    let mut own = vec![0.0; nb];
    for (a, &q) in pa.iter().enumerate() {
        both[f[a] * ny + fy[a]] += q;
        side[fy[a]] += q;
        own[f[a]] += q;
    }
    let h_side = entropy(&side);
    (h_side, entropy(&both) - h_side, entropy(&own))
}

fn expected(m: &[f64], cols: usize, d: &crate::problems::Matrix) -> f64 {
    m.iter()
        .enumerate()
        .map(|(i, &q)| if q > 0.0 { q * d.get(i / cols, i % cols) } else { 0.0 })
        .sum()
}

/// The search problem behind one source-coding solve: free distributions
/// laid out as simplex blocks, plus the budgets they must meet.
#[derive(Clone, Debug)]
pub struct SourceObjective {
    problem: SourceActionProblem,
    mode: SourceMode,
    budgets: Budgets,
    w: Alphabet,
    u: Alphabet,
    cardinalities: BTreeMap<String, usize>,
}

impl SourceObjective {
    /// Sets up the search for `mode`, taking auxiliary alphabet sizes from
    /// `config` (capped by the cardinality bounds).
    pub fn new(
        problem: &SourceActionProblem,
        mode: SourceMode,
        budgets: Budgets,
        config: &SolverConfig,
    ) -> Result<Self> {
        let problem = problem.clone().with_mode(mode);
        problem.ensure_valid()?;
        budgets.check()?;
        let (nx, na, n1, n2) = (
            problem.x().len(),
            problem.a().len(),
            problem.xhat1.len(),
            problem.xhat2.len(),
        );
        let mut cardinalities = BTreeMap::new();
        let (w, nu) = match mode {
            SourceMode::NonCausal | SourceMode::StrictlyCausal => {
                (problem.xhat2.clone(), config.cardinality("U", nx * n2 * na + 1)?)
            }
            SourceMode::Causal => {
                let nv = config.cardinality("V", nx + 3)?;
                cardinalities.insert("V".to_string(), nv);
                (Alphabet::indexed("V", nv), config.cardinality("U", nx * nv * na + 1)?)
            }
            SourceMode::EncoderSide => (problem.xhat2.clone(), config.cardinality("U", nx * n1 * n2 + 3)?),
            SourceMode::EncoderSideDual => (problem.xhat2.clone(), 1),
        };
        if mode != SourceMode::EncoderSideDual {
            cardinalities.insert("U".to_string(), nu);
        }
        Ok(Self {
            problem,
            mode,
            budgets,
            w,
            u: Alphabet::indexed("U", nu),
            cardinalities,
        })
    }

    pub fn mode(&self) -> SourceMode {
        self.mode
    }

    pub fn cardinalities(&self) -> &BTreeMap<String, usize> {
        &self.cardinalities
    }

    pub fn shape(&self) -> Shape {
        let p = &self.problem;
        let (nx, na, nu) = (p.x().len(), p.a().len(), self.u.len());
        let blocks = match self.mode {
            SourceMode::NonCausal | SourceMode::StrictlyCausal | SourceMode::Causal => {
                vec![self.w.len() * na * nu; nx]
            }
            SourceMode::EncoderSide => {
                let mut b = vec![nu; nx];
                b.extend(std::iter::repeat_n(p.xhat1.len(), nx * nu));
                b.extend(std::iter::repeat_n(p.xhat2.len(), nx * nu));
                b.push(na);
                b
            }
            SourceMode::EncoderSideDual => {
                let mut b = vec![p.xhat1.len() * p.xhat2.len(); nx];
                b.push(na);
                b
            }
        };
        Shape::new(blocks)
    }

    /// All quantities at `params`. For the encoder-side modes `rate` is the
    /// unclamped difference; the clamp is applied when reporting.
    pub fn details(&self, params: &[f64]) -> ObjectiveEval {
        let p = &self.problem;
        match self.mode {
            SourceMode::NonCausal | SourceMode::StrictlyCausal | SourceMode::Causal => {
                eval_aux(p, &aux_joint(p, params, &self.w, &self.u), self.mode)
            }
            SourceMode::EncoderSide => {
                let j = encoder_joint(p, params, &self.u);
                let pa = &params[params.len() - p.a().len()..];
                let (h_side, h_rest, _) = action_entropies(p, pa);
                let rate = j.mutual_information_mask(1, 2 | 4, 0) - h_side;
                let coarse = j.mutual_information_mask(1, 2, 0);
                let fine = j.mutual_information_mask(1, 8, 2);
                ObjectiveEval {
                    rate,
                    d1: expected(&j.marginal_ordered(&[0, 2]), p.xhat1.len(), &p.d1),
                    d2: expected(&j.marginal_ordered(&[0, 3]), p.xhat2.len(), &p.d2),
                    cost: pa.iter().zip(&p.action_cost).map(|(q, c)| q * c).sum(),
                    embed_slack: h_side - coarse,
                    extras: vec![Slack::new("refinement", h_rest - fine)],
                }
            }
            SourceMode::EncoderSideDual => {
                let j = dual_joint(p, params);
                let pa = &params[params.len() - p.a().len()..];
                let (h_side, _, h_own) = action_entropies(p, pa);
                ObjectiveEval {
                    rate: j.mutual_information_mask(1, 2 | 4, 0) - h_side,
                    d1: expected(&j.marginal_ordered(&[0, 1]), p.xhat1.len(), &p.d1),
                    d2: expected(&j.marginal_ordered(&[0, 2]), p.xhat2.len(), &p.d2),
                    cost: pa.iter().zip(&p.action_cost).map(|(q, c)| q * c).sum(),
                    embed_slack: h_own - j.mutual_information_mask(1, 4, 0),
                    extras: Vec::new(),
                }
            }
        }
    }

    fn constraints(&self, e: &ObjectiveEval) -> Vec<f64> {
        let b = &self.budgets;
        let mut c = vec![e.d1 - b.d1, e.d2 - b.d2, e.cost - b.gamma, -e.embed_slack];
        c.extend(e.extras.iter().map(|s| -s.value));
        c
    }

    fn point(&self, out: &SearchOutcome, shape: &Shape) -> RegionPoint {
        let evaluator = match self.mode {
            SourceMode::NonCausal => Evaluator::NonCausal,
            SourceMode::StrictlyCausal => Evaluator::StrictlyCausal,
            SourceMode::Causal => Evaluator::Causal,
            SourceMode::EncoderSide => Evaluator::EncoderSide,
            SourceMode::EncoderSideDual => Evaluator::EncoderSideDual,
        };
        let witness = Witness {
            blocks: shape.blocks.clone(),
            params: out.witness.params.clone(),
            maps: out.witness.maps.clone(),
            cardinalities: self.cardinalities.clone(),
        };
        if !out.feasible {
            return infeasible_point(evaluator, witness, out.evaluations);
        }
        let e = self.details(&out.witness.params);
        let b = &self.budgets;
        let mut slacks = vec![
            Slack::new("d1", b.d1 - e.d1),
            Slack::new("d2", b.d2 - e.d2),
            Slack::new("cost", b.gamma - e.cost),
            Slack::new("embedding", e.embed_slack),
        ];
        slacks.extend(e.extras.iter().cloned());
        let rate = match self.mode {
            SourceMode::EncoderSide | SourceMode::EncoderSideDual => e.rate.max(0.0),
            _ => e.rate,
        };
        RegionPoint {
            evaluator,
            feasible: true,
            rate,
            r1: None,
            d1: Some(e.d1),
            d2: Some(e.d2),
            cost: vec![e.cost],
            slacks,
            witness,
            evaluations: out.evaluations,
        }
    }

    /// Runs the search, refining also from any compatible `warm` witnesses.
    pub fn solve(&self, config: &SolverConfig, warm: &[Witness]) -> RegionPoint {
        let shape = self.shape();
        let starts = warm_points(warm, &shape, &self.cardinalities);
        let out = minimize_constrained_from(self, &shape, config, Sense::Minimize, &starts);
        self.point(&out, &shape)
    }
}

impl Objective for SourceObjective {
    fn evaluate(&self, params: &[f64], _maps: &[Vec<usize>]) -> Evaluation {
        let e = self.details(params);
        Evaluation {
            value: e.rate,
            constraints: self.constraints(&e),
        }
    }
}

fn infeasible_point(evaluator: Evaluator, witness: Witness, evaluations: u64) -> RegionPoint {
    RegionPoint {
        evaluator,
        feasible: false,
        rate: f64::NAN,
        r1: None,
        d1: None,
        d2: None,
        cost: Vec::new(),
        slacks: Vec::new(),
        witness,
        evaluations,
    }
}

fn warm_points(warm: &[Witness], shape: &Shape, cards: &BTreeMap<String, usize>) -> Vec<Point> {
    warm.iter()
        .filter(|w| w.blocks == shape.blocks && &w.cardinalities == cards && w.maps.len() == shape.maps.len())
        .map(|w| Point {
            params: w.params.clone(),
            maps: w.maps.clone(),
        })
        .collect()
}

fn check_aux_pmf(p: &SourceActionProblem, q: &ConditionalPmf, w_len: Option<usize>) -> Result<()> {
    let bad = |msg: &str| Err(Error::InvalidProblem(msg.to_string()));
    if q.inputs().len() != 1 || q.inputs()[0].name() != p.x().name() || q.inputs()[0].len() != p.x().len() {
        return bad("auxiliary pmf must be conditioned on the source variable alone");
    }
    let outs = q.outputs();
    if outs.len() != 3 {
        return bad("auxiliary pmf must have three outputs");
    }
    if outs[1].name() != p.a().name() || outs[1].len() != p.a().len() {
        return bad("second output of the auxiliary pmf must be the action variable");
    }
    match w_len {
        Some(n) if outs[0].len() != n || outs[0].name() != p.xhat2.name() => {
            bad("first output of the auxiliary pmf must be the Decoder 2 reconstruction")
        }
        _ => Ok(()),
    }
}

fn compose_aux(p: &SourceActionProblem, q: &ConditionalPmf) -> Result<JointDistribution> {
    chain_compose(&[
        Factor::Pmf(p.source.clone()),
        Factor::Conditional(q.clone()),
        Factor::Conditional(p.side_channel.clone()),
        Factor::Map(p.action_map.clone()),
    ])
}

/// Non-causal evaluation at `q = p(xhat2, a, u | x)`.
pub fn eval_nc(problem: &SourceActionProblem, q: &ConditionalPmf) -> Result<ObjectiveEval> {
    problem.ensure_valid()?;
    check_aux_pmf(problem, q, Some(problem.xhat2.len()))?;
    Ok(eval_aux(problem, &compose_aux(problem, q)?, SourceMode::NonCausal))
}

/// Strictly causal evaluation at `q = p(xhat2, a, u | x)`.
pub fn eval_sc(problem: &SourceActionProblem, q: &ConditionalPmf) -> Result<ObjectiveEval> {
    problem.ensure_valid()?;
    check_aux_pmf(problem, q, Some(problem.xhat2.len()))?;
    Ok(eval_aux(problem, &compose_aux(problem, q)?, SourceMode::StrictlyCausal))
}

/// Causal evaluation at `q = p(v, a, u | x)`; Decoder 2 estimates from
/// `(V, f(A))`.
pub fn eval_causal(problem: &SourceActionProblem, q: &ConditionalPmf) -> Result<ObjectiveEval> {
    problem.ensure_valid()?;
    check_aux_pmf(problem, q, None)?;
    Ok(eval_aux(problem, &compose_aux(problem, q)?, SourceMode::Causal))
}

fn solve_source(
    problem: &SourceActionProblem,
    mode: SourceMode,
    budgets: Budgets,
    config: &SolverConfig,
    warm: &[Witness],
) -> Result<RegionPoint> {
    Ok(SourceObjective::new(problem, mode, budgets, config)?.solve(config, warm))
}

pub fn solve_nc(
    problem: &SourceActionProblem,
    d1: f64,
    d2: f64,
    gamma: f64,
    config: &SolverConfig,
) -> Result<RegionPoint> {
    solve_nc_from(problem, d1, d2, gamma, config, &[])
}

pub fn solve_nc_from(
    problem: &SourceActionProblem,
    d1: f64,
    d2: f64,
    gamma: f64,
    config: &SolverConfig,
    warm: &[Witness],
) -> Result<RegionPoint> {
    solve_source(
        problem,
        SourceMode::NonCausal,
        Budgets::new(d1, d2, gamma),
        config,
        warm,
    )
}

pub fn solve_sc(
    problem: &SourceActionProblem,
    d1: f64,
    d2: f64,
    gamma: f64,
    config: &SolverConfig,
) -> Result<RegionPoint> {
    solve_sc_from(problem, d1, d2, gamma, config, &[])
}

pub fn solve_sc_from(
    problem: &SourceActionProblem,
    d1: f64,
    d2: f64,
    gamma: f64,
    config: &SolverConfig,
    warm: &[Witness],
) -> Result<RegionPoint> {
    solve_source(
        problem,
        SourceMode::StrictlyCausal,
        Budgets::new(d1, d2, gamma),
        config,
        warm,
    )
}

pub fn solve_causal(
    problem: &SourceActionProblem,
    d1: f64,
    d2: f64,
    gamma: f64,
    config: &SolverConfig,
) -> Result<RegionPoint> {
    solve_causal_from(problem, d1, d2, gamma, config, &[])
}

pub fn solve_causal_from(
    problem: &SourceActionProblem,
    d1: f64,
    d2: f64,
    gamma: f64,
    config: &SolverConfig,
    warm: &[Witness],
) -> Result<RegionPoint> {
    solve_source(problem, SourceMode::Causal, Budgets::new(d1, d2, gamma), config, warm)
}

pub fn solve_encoder_side(
    problem: &SourceActionProblem,
    d1: f64,
    d2: f64,
    gamma: f64,
    config: &SolverConfig,
) -> Result<RegionPoint> {
    solve_source(
        problem,
        SourceMode::EncoderSide,
        Budgets::new(d1, d2, gamma),
        config,
        &[],
    )
}

pub fn solve_encoder_side_dual(
    problem: &SourceActionProblem,
    d1: f64,
    d2: f64,
    gamma: f64,
    config: &SolverConfig,
) -> Result<RegionPoint> {
    solve_source(
        problem,
        SourceMode::EncoderSideDual,
        Budgets::new(d1, d2, gamma),
        config,
        &[],
    )
}

/// Recomputes the reported quantities of a source-problem point from its
/// witness.
pub fn reevaluate(problem: &SourceActionProblem, point: &RegionPoint, budgets: Budgets) -> Result<ObjectiveEval> {
    let mode = match point.evaluator {
        Evaluator::NonCausal => SourceMode::NonCausal,
        Evaluator::StrictlyCausal => SourceMode::StrictlyCausal,
        Evaluator::Causal => SourceMode::Causal,
        Evaluator::EncoderSide => SourceMode::EncoderSide,
        Evaluator::EncoderSideDual => SourceMode::EncoderSideDual,
        other => {
            return Err(Error::InvalidProblem(format!(
                "{other:?} points are not source-problem points"
            )));
        }
    };
    let mut config = SolverConfig::default();
    config.aux_cardinalities = point.witness.cardinalities.clone();
    let obj = SourceObjective::new(problem, mode, budgets, &config)?;
    if obj.shape().blocks != point.witness.blocks {
        return Err(Error::ShapeMismatch {
            context: "witness".into(),
            expected: obj.shape().dim(),
            got: point.witness.params.len(),
        });
    }
    let mut e = obj.details(&point.witness.params);
    if matches!(mode, SourceMode::EncoderSide | SourceMode::EncoderSideDual) {
        e.rate = e.rate.max(0.0);
    }
    Ok(e)
}

/// Non-causal, causal and strictly causal solutions of one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedPoints {
    pub nc: RegionPoint,
    pub causal: RegionPoint,
    pub sc: RegionPoint,
}

/// Solves the three observation models with nested warm starts so that the
/// reported rates satisfy `nc <= causal <= sc`.
///
/// The strictly causal witness is embedded into the causal search with
/// `V = Xhat2`, and the causal witness into the non-causal search with
/// `Xhat2 = g2(V, f(A))` and `U' = (U, V)`. This needs `|V| >= |Xhat2|` and
/// a non-causal `|U|` of `|U| * |V|`, which is used in place of the
/// configured cap when it fits under the cardinality bound.
pub fn solve_ordered(
    problem: &SourceActionProblem,
    d1: f64,
    d2: f64,
    gamma: f64,
    config: &SolverConfig,
) -> Result<OrderedPoints> {
    let budgets = Budgets::new(d1, d2, gamma);
    let (nx, na, n2) = (problem.x().len(), problem.a().len(), problem.xhat2.len());
    let sc_obj = SourceObjective::new(problem, SourceMode::StrictlyCausal, budgets, config)?;
    let sc = sc_obj.solve(config, &[]);

    let c_obj = SourceObjective::new(problem, SourceMode::Causal, budgets, config)?;
    let (nv, nu_c) = (c_obj.w.len(), c_obj.u.len());
    let mut warm = Vec::new();
    if sc.feasible && nv >= n2 && nu_c >= sc_obj.u.len() {
        warm.push(lift_to_causal(&sc.witness.params, n2, na, sc_obj.u.len(), &c_obj));
    }
    let causal = c_obj.solve(config, &warm);

    let nc_bound = nx * n2 * na + 1;
    let nu_nc = if nu_c * nv <= nc_bound {
        nu_c * nv
    } else {
        config.cardinality("U", nc_bound)?
    };
    let nc_cfg = config.clone().with_card("U", nu_nc);
    let nc_obj = SourceObjective::new(problem, SourceMode::NonCausal, budgets, &nc_cfg)?;
    let mut warm = Vec::new();
    if causal.feasible && nu_c * nv <= nu_nc {
        warm.push(fold_causal(problem, &causal.witness.params, &c_obj, &nc_obj));
    }
    if sc.feasible && nu_nc >= sc_obj.u.len() {
        warm.push(pad_u(&sc.witness.params, nx, n2 * na, sc_obj.u.len(), &nc_obj));
    }
    let nc = nc_obj.solve(&nc_cfg, &warm);
    Ok(OrderedPoints { nc, causal, sc })
}

fn as_witness(obj: &SourceObjective, params: Vec<f64>) -> Witness {
    Witness {
        blocks: obj.shape().blocks,
        params,
        maps: Vec::new(),
        cardinalities: obj.cardinalities.clone(),
    }
}

fn lift_to_causal(params: &[f64], n2: usize, na: usize, nu: usize, target: &SourceObjective) -> Witness {
    let (nv, nu_c) = (target.w.len(), target.u.len());
    let nx = params.len() / (n2 * na * nu);
    let mut out = vec![0.0; nx * nv * na * nu_c];
    for x in 0..nx {
        for w in 0..n2 {
            for a in 0..na {
                for u in 0..nu {
                    out[((x * nv + w) * na + a) * nu_c + u] = params[((x * n2 + w) * na + a) * nu + u];
                }
            }
        }
    }
    as_witness(target, out)
}

fn pad_u(params: &[f64], nx: usize, outer: usize, nu: usize, target: &SourceObjective) -> Witness {
    let nu_t = target.u.len();
    let mut out = vec![0.0; nx * outer * nu_t];
    for r in 0..nx * outer {
        out[r * nu_t..r * nu_t + nu].copy_from_slice(&params[r * nu..(r + 1) * nu]);
    }
    as_witness(target, out)
}

fn fold_causal(p: &SourceActionProblem, params: &[f64], src: &SourceObjective, target: &SourceObjective) -> Witness {
    let (nx, na, n2) = (p.x().len(), p.a().len(), p.xhat2.len());
    let (nv, nu) = (src.w.len(), src.u.len());
    let nu_t = target.u.len();
    let j = aux_joint(p, params, &src.w, &src.u);
    let (g2, _) = bayes_decision(&j, 0, &[1, 5], &p.d2);
    let nb = p.b().len();
    let f = p.action_map.table();
    let mut out = vec![0.0; nx * n2 * na * nu_t];
    for x in 0..nx {
        for v in 0..nv {
            for a in 0..na {
                let xh = g2[v * nb + f[a]];
                for u in 0..nu {
                    out[((x * n2 + xh) * na + a) * nu_t + u * nv + v] += params[((x * nv + v) * na + a) * nu + u];
                }
            }
        }
    }
    as_witness(target, out)
}

// ---------------------------------------------------------------------------
// The binary Z/S example

/// Which embedding constraint the binary example uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryMode {
    NonCausal,
    StrictlyCausal,
}

/// The binary example reduced to three parameters `(alpha1, alpha2, alpha3)`
/// with `D1 = 0`, `U = X` and the symmetric completion for `x = 1`.
/// Parameters form one simplex block `[alpha1, alpha2, alpha3, alpha0]`.
#[derive(Clone, Debug)]
pub struct BinaryExample {
    side: Vec<f64>,
    d2: f64,
    mode: BinaryMode,
}

impl BinaryExample {
    pub fn new(delta: f64, d2: f64, mode: BinaryMode) -> Result<Self> {
        if !(0.0..=0.5).contains(&d2) {
            return Err(Error::OutOfRange {
                name: "D2".into(),
                value: d2,
                range: "[0, 0.5]".into(),
            });
        }
        let p = zs_example(delta)?;
        Ok(Self {
            side: p.side_channel.table().to_vec(),
            d2,
            mode,
        })
    }

    pub fn shape() -> Shape {
        Shape::new(vec![4])
    }

    /// Joint over `(X, Xhat2, A, Y)`.
    pub fn joint(&self, alpha: &[f64]) -> JointDistribution {
        let [a1, a2, a3, a0] = [alpha[0], alpha[1], alpha[2], alpha[3]];
        // p(xhat2, a | x) as [xhat2][a]
        let rows = [[a0, a1, a3, a2], [a2, a3, a1, a0]];
        let mut t = vec![0.0; 16];
        for x in 0..2 {
            for k in 0..4 {
                let a = k % 2;
                for y in 0..2 {
                    t[(x * 4 + k) * 2 + y] = 0.5 * rows[x][k] * self.side[(x * 2 + a) * 2 + y];
                }
            }
        }
        let b = Alphabet::binary;
        JointDistribution::from_raw(vec![b("X"), b("Xhat2"), b("A"), b("Y")], t)
    }

    /// `(rate, embedding slack)` at `alpha`.
    pub fn rate_and_slack(&self, alpha: &[f64]) -> (f64, f64) {
        let j = self.joint(alpha);
        let info = j.mutual_information_mask(1, 2 | 4, 0);
        let rate = info + j.conditional_entropy_mask(1, 2 | 4 | 8);
        let room = match self.mode {
            BinaryMode::NonCausal => j.entropy_mask(4),
            BinaryMode::StrictlyCausal => j.conditional_entropy_mask(4, 2),
        };
        (rate, room - info)
    }
}

impl Objective for BinaryExample {
    fn evaluate(&self, alpha: &[f64], _maps: &[Vec<usize>]) -> Evaluation {
        let (rate, slack) = self.rate_and_slack(alpha);
        Evaluation {
            value: rate,
            constraints: vec![alpha[1] + alpha[2] - self.d2, -slack],
        }
    }
}

pub fn binary_example_point(
    delta: f64,
    d2: f64,
    mode: BinaryMode,
    config: &SolverConfig,
    warm: &[Witness],
) -> Result<RegionPoint> {
    let obj = BinaryExample::new(delta, d2, mode)?;
    let shape = BinaryExample::shape();
    let out = minimize_constrained_from(
        &obj,
        &shape,
        config,
        Sense::Minimize,
        &warm_points(warm, &shape, &BTreeMap::new()),
    );
    let evaluator = match mode {
        BinaryMode::NonCausal => Evaluator::BinaryNonCausal,
        BinaryMode::StrictlyCausal => Evaluator::BinaryStrictlyCausal,
    };
    let witness = Witness {
        blocks: shape.blocks.clone(),
        params: out.witness.params.clone(),
        maps: Vec::new(),
        cardinalities: BTreeMap::new(),
    };
    if !out.feasible {
        return Ok(infeasible_point(evaluator, witness, out.evaluations));
    }
    let (rate, slack) = obj.rate_and_slack(&out.witness.params);
    let dist = out.witness.params[1] + out.witness.params[2];
    Ok(RegionPoint {
        evaluator,
        feasible: true,
        rate,
        r1: None,
        d1: Some(0.0),
        d2: Some(dist),
        cost: Vec::new(),
        slacks: vec![Slack::new("d2", d2 - dist), Slack::new("embedding", slack)],
        witness,
        evaluations: out.evaluations,
    })
}

/// Minimum rate of the binary example at `(delta, D2)`.
pub fn binary_example_rate(delta: f64, d2: f64, mode: BinaryMode, config: &SolverConfig) -> Result<f64> {
    let p = binary_example_point(delta, d2, mode, config, &[])?;
    if p.feasible {
        Ok(p.rate)
    } else {
        Err(Error::Infeasible(format!(
            "binary example at delta = {delta}, D2 = {d2}"
        )))
    }
}

/// Smallest `D2` at which the non-causal binary example already attains its
/// `D2 = 0.5` rate: the minimum of `alpha2 + alpha3` over parameters whose
/// rate is within `value_tol` of that optimum.
pub fn decoder2_threshold(delta: f64, config: &SolverConfig) -> Result<f64> {
    let top = binary_example_point(delta, 0.5, BinaryMode::NonCausal, config, &[])?;
    if !top.feasible {
        return Err(Error::Infeasible(format!("binary example at delta = {delta}")));
    }
    let obj = BinaryExample::new(delta, 0.5, BinaryMode::NonCausal)?;
    let target = top.rate + config.value_tol;
    let f = |alpha: &[f64], _: &[Vec<usize>]| {
        let (rate, slack) = obj.rate_and_slack(alpha);
        Evaluation {
            value: alpha[1] + alpha[2],
            constraints: vec![rate - target, -slack],
        }
    };
    let warm = [Point {
        params: top.witness.params.clone(),
        maps: Vec::new(),
    }];
    let out = minimize_constrained_from(&f, &BinaryExample::shape(), config, Sense::Minimize, &warm);
    Ok(out.value)
}

// ---------------------------------------------------------------------------
// Channel problems

// Axis masks of the channel joint laid out as [A, S, U, X, Y, B].
const CA: u64 = 1;
const CS: u64 = 2;
const CU: u64 = 4;
const CY: u64 = 16;
const CB: u64 = 32;

/// The rate terms of the channel region at one distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelTerms {
    /// `H(f(A))`
    pub h: f64,
    /// `I(A, U; Y) - I(U; S | A)`
    pub sum: f64,
    /// `I(A; Y | f(A)) + I(U; Y | A) - I(U; S | A)`
    pub r2_bound: f64,
    /// `E[gamma(A, X)]`
    pub cost: f64,
}

/// The search behind [`channel_max_sum_rate`]. Parameters are `p(a)`
/// followed by one block `p(u | s, a)` per `(a, s)`; the single enumerated
/// map is `g(u, s)`, indexed `u * |S| + s`.
#[derive(Clone, Debug)]
pub struct ChannelObjective {
    problem: ChannelActionProblem,
    r1: f64,
    gamma: f64,
    u: Alphabet,
}

impl ChannelObjective {
    pub fn new(problem: &ChannelActionProblem, r1: f64, gamma: f64, config: &SolverConfig) -> Result<Self> {
        problem.ensure_valid()?;
        if r1.is_nan() || r1 < 0.0 {
            return Err(Error::OutOfRange {
                name: "R1".into(),
                value: r1,
                range: "[0, inf)".into(),
            });
        }
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::OutOfRange {
                name: "Gamma".into(),
                value: gamma,
                range: "[0, inf]".into(),
            });
        }
        let p = problem;
        let nu = config.cardinality("U", p.x().len() * p.s().len() * p.a().len() + 1)?;
        Ok(Self {
            problem: problem.clone(),
            r1,
            gamma,
            u: Alphabet::indexed("U", nu),
        })
    }

    pub fn shape(&self) -> Shape {
        let p = &self.problem;
        let (na, ns, nu) = (p.a().len(), p.s().len(), self.u.len());
        let mut blocks = vec![na];
        blocks.extend(std::iter::repeat_n(nu, na * ns));
        Shape::new(blocks).with_maps(vec![MapSpace {
            domain: nu * ns,
            codomain: p.x().len(),
        }])
    }

    pub fn joint(&self, params: &[f64], g: &[usize]) -> JointDistribution {
        channel_joint(&self.problem, &self.u, params, g)
    }

    pub fn terms(&self, params: &[f64], g: &[usize]) -> ChannelTerms {
        channel_terms_of(&self.problem, &self.joint(params, g))
    }
}

fn channel_joint(p: &ChannelActionProblem, u: &Alphabet, params: &[f64], g: &[usize]) -> JointDistribution {
    let (na, ns, nu, nx, ny, nb) = (p.a().len(), p.s().len(), u.len(), p.x().len(), p.y().len(), p.b().len());
    let ps = p.state_channel.table();
    let py = p.transmission_channel.table();
    let f = p.action_map.table();
    let (pa, pu) = params.split_at(na);
    let mut t = vec![0.0; na * ns * nu * nx * ny * nb];
    for a in 0..na {
        for s in 0..ns {
            let q = pa[a] * ps[a * ns + s];
            if q == 0.0 {
                continue;
            }
            for k in 0..nu {
                let r = q * pu[(a * ns + s) * nu + k];
                if r == 0.0 {
                    continue;
                }
                let x = g[k * ns + s];
                for y in 0..ny {
                    let idx = ((((a * ns + s) * nu + k) * nx + x) * ny + y) * nb + f[a];
                    t[idx] = r * py[((x * ns + s) * na + a) * ny + y];
                }
            }
        }
    }
    JointDistribution::from_raw(
        vec![
            p.a().clone(),
            p.s().clone(),
            u.clone(),
            p.x().clone(),
            p.y().clone(),
            p.b().clone(),
        ],
        t,
    )
}

fn channel_terms_of(p: &ChannelActionProblem, j: &JointDistribution) -> ChannelTerms {
    let leak = j.mutual_information_mask(CU, CS, CA);
    let nx = p.x().len();
    let m = j.marginal_ordered(&[0, 3]);
    ChannelTerms {
        h: j.entropy_mask(CB),
        sum: j.mutual_information_mask(CA | CU, CY, 0) - leak,
        r2_bound: j.mutual_information_mask(CA, CY, CB) + j.mutual_information_mask(CU, CY, CA) - leak,
        cost: expected(&m, nx, &p.cost),
    }
}

/// Rate terms of a channel problem at explicit `p(a)`, `p(u | s, a)` (one row
/// per `(a, s)`) and `g(u, s)`, via the factor chain.
pub fn channel_terms(
    problem: &ChannelActionProblem,
    pa: &FinitePmf,
    pu: &ConditionalPmf,
    g: &crate::probability::DeterministicMap,
) -> Result<ChannelTerms> {
    problem.ensure_valid()?;
    let mut t = pu.inputs().iter().map(|a| a.name().to_string());
    let names_ok = pu.outputs().len() == 1
        && pu.inputs().len() == 2
        && t.next().as_deref() == Some(problem.a().name())
        && t.next().as_deref() == Some(problem.s().name());
    if !names_ok {
        return Err(Error::InvalidProblem(
            "p(u | a, s) must be conditioned on (A, S)".into(),
        ));
    }
    let j = chain_compose(&[
        Factor::Pmf(pa.clone()),
        Factor::Conditional(problem.state_channel.clone()),
        Factor::Conditional(pu.clone()),
        Factor::Map(g.clone()),
        Factor::Conditional(problem.transmission_channel.clone()),
        Factor::Map(problem.action_map.clone()),
    ])?;
    let names: Vec<&str> = j.names();
    let expected_order = [
        problem.a().name(),
        problem.s().name(),
        pu.outputs()[0].name(),
        problem.x().name(),
        problem.y().name(),
        problem.b().name(),
    ];
    if names != expected_order {
        return Err(Error::InvalidProblem(format!("unexpected variable order {names:?}")));
    }
    Ok(channel_terms_of(problem, &j))
}

impl Objective for ChannelObjective {
    fn evaluate(&self, params: &[f64], maps: &[Vec<usize>]) -> Evaluation {
        let t = self.terms(params, &maps[0]);
        Evaluation {
            value: t.sum,
            constraints: vec![self.r1 - t.h, t.cost - self.gamma],
        }
    }
}

/// Largest `R1 + R2` at the given `R1` and cost budget (`gamma` may be
/// infinite).
pub fn channel_max_sum_rate(
    problem: &ChannelActionProblem,
    r1: f64,
    gamma: f64,
    config: &SolverConfig,
) -> Result<RegionPoint> {
    let obj = ChannelObjective::new(problem, r1, gamma, config)?;
    let shape = obj.shape();
    let mut cards = BTreeMap::new();
    cards.insert("U".to_string(), obj.u.len());
    let witness_of = |out: &SearchOutcome| Witness {
        blocks: shape.blocks.clone(),
        params: out.witness.params.clone(),
        maps: out.witness.maps.clone(),
        cardinalities: cards.clone(),
    };
    if r1 > (problem.b().len() as f64).log2() + config.feas_tol {
        return Ok(infeasible_point(Evaluator::Channel, Witness::default(), 0));
    }
    let out = minimize_constrained_from(&obj, &shape, config, Sense::Maximize, &[]);
    if !out.feasible {
        return Ok(infeasible_point(Evaluator::Channel, witness_of(&out), out.evaluations));
    }
    let t = obj.terms(&out.witness.params, &out.witness.maps[0]);
    Ok(RegionPoint {
        evaluator: Evaluator::Channel,
        feasible: true,
        rate: t.sum,
        r1: Some(r1),
        d1: None,
        d2: None,
        cost: vec![t.cost],
        slacks: vec![Slack::new("r1", t.h - r1), Slack::new("cost", gamma - t.cost)],
        witness: witness_of(&out),
        evaluations: out.evaluations,
    })
}

// ---------------------------------------------------------------------------
// Probing

/// Probing objective over three binary blocks `[1 - p1, p1]`, `[1 - p2, p2]`,
/// `[1 - gamma, gamma]`.
#[derive(Clone, Debug)]
pub struct ProbingObjective {
    problem: ProbingProblem,
    r1: f64,
}

impl ProbingObjective {
    pub fn new(problem: &ProbingProblem, r1: f64) -> Result<Self> {
        let v = problem.validate();
        if let Some(first) = v.first() {
            return Err(Error::InvalidProblem(first.to_string()));
        }
        if !(0.0..=1.0).contains(&r1) {
            return Err(Error::OutOfRange {
                name: "R1".into(),
                value: r1,
                range: "[0, 1]".into(),
            });
        }
        Ok(Self { problem: *problem, r1 })
    }

    pub fn shape() -> Shape {
        Shape::new(vec![2, 2, 2])
    }

    /// `(sum rate, E[X], E[A])` at `(p1, p2, gamma)`.
    pub fn terms(&self, p1: f64, p2: f64, gamma: f64) -> (f64, f64, f64) {
        let keep = 1.0 - self.problem.epsilon;
        let rate = gamma * keep * binary_entropy(p1) + (1.0 - gamma) * keep * binary_entropy(p2);
        (rate, p1 * gamma * keep + p2 * (1.0 - gamma), gamma)
    }
}

impl Objective for ProbingObjective {
    fn evaluate(&self, v: &[f64], _maps: &[Vec<usize>]) -> Evaluation {
        let (rate, ex, ea) = self.terms(v[1], v[3], v[5]);
        Evaluation {
            value: rate,
            constraints: vec![
                ex - self.problem.gamma_x,
                ea - self.problem.gamma_a,
                self.r1 - binary_entropy(v[5]),
            ],
        }
    }
}

pub fn probing_point(
    problem: &ProbingProblem,
    r1: f64,
    config: &SolverConfig,
    warm: &[Witness],
) -> Result<RegionPoint> {
    let obj = ProbingObjective::new(problem, r1)?;
    let shape = ProbingObjective::shape();
    let out = minimize_constrained_from(
        &obj,
        &shape,
        config,
        Sense::Maximize,
        &warm_points(warm, &shape, &BTreeMap::new()),
    );
    let witness = Witness {
        blocks: shape.blocks.clone(),
        params: out.witness.params.clone(),
        maps: Vec::new(),
        cardinalities: BTreeMap::new(),
    };
    if !out.feasible {
        return Ok(infeasible_point(Evaluator::Probing, witness, out.evaluations));
    }
    let v = &out.witness.params;
    let (rate, ex, ea) = obj.terms(v[1], v[3], v[5]);
    Ok(RegionPoint {
        evaluator: Evaluator::Probing,
        feasible: true,
        rate,
        r1: Some(r1),
        d1: None,
        d2: None,
        cost: vec![ea, ex],
        slacks: vec![
            Slack::new("gamma_x", problem.gamma_x - ex),
            Slack::new("gamma_a", problem.gamma_a - ea),
            Slack::new("r1", binary_entropy(v[5]) - r1),
        ],
        witness,
        evaluations: out.evaluations,
    })
}

/// Largest probing sum rate at `R1` with the time-sharing variable held
/// constant.
pub fn probing_sum_rate(problem: &ProbingProblem, r1: f64, config: &SolverConfig) -> Result<f64> {
    let p = probing_point(problem, r1, config, &[])?;
    if p.feasible {
        Ok(p.rate)
    } else {
        Err(Error::Infeasible(format!("probing at R1 = {r1}")))
    }
}

fn golden_min(lo: f64, hi: f64, iters: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd).min(f(lo))
}

/// Maximizer of `w * H(p) - m * p` over `p` in `[0, 1]` for `w >= 0`, `m >= 0`.
fn entropy_tilt(w: f64, m: f64) -> f64 {
    if w > 0.0 {
        1.0 / (1.0 + (m / w).exp2())
    } else if m > 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Probing sum rate when a time-sharing variable is allowed, computed as the
/// Lagrange dual of the single-letter problem. For fixed multipliers the
/// inner maximum has a closed form, and time sharing makes the dual tight, so
/// this is the convexified value up to the accuracy of the multiplier search.
/// It is never below [`probing_sum_rate`].
pub fn probing_sum_rate_convexified(problem: &ProbingProblem, r1: f64) -> Result<f64> {
    let obj = ProbingObjective::new(problem, r1)?;
    let keep = 1.0 - problem.epsilon;
    let dual = |mu: f64, nu: f64, la: f64| {
        let p1 = entropy_tilt(keep, mu * keep);
        let p2 = entropy_tilt(keep, mu);
        // the bracket is linear in gamma apart from la * H(gamma)
        let at = |g: f64| {
            let (rate, ex, ea) = obj.terms(p1, p2, g);
            rate - mu * (ex - problem.gamma_x) - nu * (ea - problem.gamma_a) + la * (binary_entropy(g) - r1)
        };
        let slope = at(1.0) - at(0.0) - la * (binary_entropy(1.0) - binary_entropy(0.0));
        let g = if la > 0.0 {
            1.0 / (1.0 + (-slope / la).exp2())
        } else if slope > 0.0 {
            1.0
        } else {
            0.0
        };
        at(g).max(at(0.0)).max(at(1.0))
    };
    const LIMIT: f64 = 60.0;
    const ITERS: usize = 60;
    let value = golden_min(0.0, LIMIT, ITERS, |mu| {
        golden_min(0.0, LIMIT, ITERS, |nu| {
            golden_min(0.0, LIMIT, ITERS, |la| dual(mu, nu, la))
        })
    });
    if value > keep + 1e-6 {
        return Err(Error::Infeasible(format!("convexified probing at R1 = {r1}")));
    }
    Ok(value)
}

// ---------------------------------------------------------------------------
// Rate transfer and region corners

const TRANSFER_TOL: f64 = 1e-12;

/// Corner points of the region obtained from `points` by allowing any
/// `(r1 - t, r2 + t)`, `0 <= t <= r1`. A pair survives unless another pair
/// has at least its `R1` and at least its `R1 + R2`; `(0, max sum)` is always
/// a corner. Sorted by `R1`.
pub fn region_transfer_closure(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<(f64, f64)> = points.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0).then((b.0 + b.1).total_cmp(&(a.0 + a.1))));
    let mut kept: Vec<(f64, f64)> = Vec::new();
    let mut best_sum = f64::NEG_INFINITY;
    for p in sorted {
        let s = p.0 + p.1;
        if s > best_sum + TRANSFER_TOL {
            kept.push(p);
            best_sum = s;
        }
    }
    let last = *kept.last().unwrap();
    if last.0 > TRANSFER_TOL {
        kept.push((0.0, best_sum));
    }
    kept.reverse();
    kept
}

/// Corners of `{R1 <= h, R1 + R2 <= sum}`.
pub fn region_corners(t: &ChannelTerms) -> Vec<(f64, f64)> {
    let h = t.h.min(t.sum);
    if h <= TRANSFER_TOL {
        vec![(0.0, t.sum)]
    } else {
        vec![(0.0, t.sum), (h, t.sum - h)]
    }
}

/// Vertices of `{R1 <= h, R1 + R2 <= sum, R2 <= r2_bound}` on the outer
/// boundary, for `0 <= r2_bound <= sum`.
pub fn region_corners_split(t: &ChannelTerms) -> Vec<(f64, f64)> {
    let h = t.h.min(t.sum);
    vec![(0.0, t.r2_bound), (t.sum - t.r2_bound, t.r2_bound), (h, t.sum - h)]
}

// ---------------------------------------------------------------------------
// Sweeps

/// Expected direction of the rate along a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    NonIncreasing,
    NonDecreasing,
    Unspecified,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffCurve {
    pub sweep_var: String,
    pub values: Vec<f64>,
    pub points: Vec<RegionPoint>,
    pub trend: Trend,
    /// Indices `i` where `points[i]` breaks the trend against the previous
    /// feasible point by more than the tolerance.
    pub violations: Vec<usize>,
}

/// Runs `solve` over a sorted grid, passing the witness of the latest
/// feasible point as a warm start.
pub fn trace_curve<F>(sweep_var: &str, values: &[f64], trend: Trend, tol: f64, mut solve: F) -> Result<TradeoffCurve>
where
    F: FnMut(f64, &[Witness]) -> Result<RegionPoint>,
{
    if values.is_empty() || values.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidProblem(format!(
            "sweep grid for `{sweep_var}` must be non-empty and sorted"
        )));
    }
    let mut points: Vec<RegionPoint> = Vec::with_capacity(values.len());
    let mut violations = Vec::new();
    let mut last: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        let warm: Vec<Witness> = last.map(|k| vec![points[k].witness.clone()]).unwrap_or_default();
        let p = solve(v, &warm)?;
        if p.feasible {
            if let Some(k) = last {
                let prev = points[k].rate;
                let broken = match trend {
                    Trend::NonIncreasing => p.rate > prev + tol,
                    Trend::NonDecreasing => p.rate < prev - tol,
                    Trend::Unspecified => false,
                };
                if broken {
                    violations.push(i);
                }
            }
            last = Some(i);
        }
        points.push(p);
    }
    Ok(TradeoffCurve {
        sweep_var: sweep_var.to_string(),
        values: values.to_vec(),
        points,
        trend,
        violations,
    })
}
