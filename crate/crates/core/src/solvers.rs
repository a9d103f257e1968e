//! Search over products of probability simplices and enumerated
//! deterministic maps.
//!
//! [`minimize_constrained`] evaluates a quantized grid over every simplex
//! block (crossed with every enumerated map), keeps the best feasible points,
//! and then polishes them with projected-gradient refinement from several
//! starts. Constraints are handled by rejection: a candidate is only ever
//! accepted if every constraint value is `<= feas_tol`. Gradients are
//! forward differences on the raw coordinates, so objectives are evaluated
//! up to `1e-6` off the simplex and should extend smoothly there. The objectives in
//! this crate are not convex, so a minimum is an upper bound on the true
//! optimum and a maximum is a lower bound.
//!
//! Results are deterministic for a fixed [`SolverConfig`]: grid and restart
//! evaluations run on the rayon pool, and every reduction is a minimum under a
//! total order (value, then the parameter vector lexicographically).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::{Alphabet, DeterministicMap, JointDistribution};
use crate::problems::Matrix;

/// Finite-difference step on the unnormalized parameters.
const FD_STEP: f64 = 1e-6;
const REFINE_TOL: f64 = 1e-12;
const INITIAL_STEP: f64 = 0.05;
const MIN_STEP: f64 = 1e-10;
const MAX_STEP: f64 = 0.5;
/// Grid candidates ranked per start, before spreading.
const DIVERSITY_POOL: usize = 8;
const RESTORE_STEPS: usize = 3;
const RESTORE_MARGIN: f64 = 1e-11;
const FACE_TOL: f64 = 1e-15;
const BISECTIONS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Quantization steps per simplex block (upper limit; lowered when the
    /// grid would exceed `max_grid_points`).
    pub grid_resolution: usize,
    pub restarts: usize,
    pub refine_iters: usize,
    pub step_shrink: f64,
    pub feas_tol: f64,
    pub value_tol: f64,
    pub seed: u64,
    /// Caps on auxiliary alphabet sizes (`"U"`, `"V"`), never above the
    /// cardinality bound of the region being evaluated.
    pub aux_cardinalities: BTreeMap<String, usize>,
    pub max_grid_points: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_resolution: 60,
            restarts: 8,
            refine_iters: 400,
            step_shrink: 0.5,
            feas_tol: 1e-9,
            value_tol: 1e-7,
            seed: 0,
            aux_cardinalities: BTreeMap::new(),
            max_grid_points: 500_000,
        }
    }
}

impl SolverConfig {
    /// Cheap settings for smoke tests and `selftest --quick`.
    pub fn quick() -> Self {
        Self {
            grid_resolution: 20,
            restarts: 4,
            refine_iters: 150,
            max_grid_points: 50_000,
            ..Self::default()
        }
    }

    pub fn with_card(mut self, name: &str, cap: usize) -> Self {
        self.aux_cardinalities.insert(name.to_string(), cap);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The alphabet size to use for auxiliary variable `name`: the configured
    /// cap, or `bound` when none is set.
    pub fn cardinality(&self, name: &str, bound: usize) -> Result<usize> {
        match self.aux_cardinalities.get(name) {
            None => Ok(bound),
            Some(&0) => Err(Error::OutOfRange {
                name: format!("|{name}|"),
                value: 0.0,
                range: "[1, bound]".into(),
            }),
            Some(&c) if c > bound => Err(Error::CardinalityCap {
                name: name.to_string(),
                requested: c,
                bound,
            }),
            Some(&c) => Ok(c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

/// The space of all maps from a `domain`-element set into a
/// `codomain`-element set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapSpace {
    pub domain: usize,
    pub codomain: usize,
}

impl MapSpace {
    pub fn count(&self) -> u128 {
        (self.codomain as u128).saturating_pow(self.domain as u32)
    }

    /// The `index`-th map in mixed-radix order (first domain element most
    /// significant).
    pub fn decode(&self, mut index: u128) -> Vec<usize> {
        let mut table = vec![0; self.domain];
        for slot in table.iter_mut().rev() {
            *slot = (index % self.codomain as u128) as usize;
            index /= self.codomain as u128;
        }
        table
    }
}

/// Parameter layout: consecutive simplex blocks plus enumerated maps.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Shape {
    pub blocks: Vec<usize>,
    pub maps: Vec<MapSpace>,
}

impl Shape {
    pub fn new(blocks: Vec<usize>) -> Self {
        Self {
            blocks,
            maps: Vec::new(),
        }
    }

    pub fn with_maps(mut self, maps: Vec<MapSpace>) -> Self {
        self.maps = maps;
        self
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|&n| {
                let r = start..start + n;
                start += n;
                r
            })
            .collect()
    }

    pub fn map_combinations(&self) -> u128 {
        self.maps.iter().fold(1u128, |acc, m| acc.saturating_mul(m.count()))
    }
}

/// A candidate: simplex parameters plus one table per enumerated map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Point {
    pub params: Vec<f64>,
    pub maps: Vec<Vec<usize>>,
}

/// Objective value and constraint values; constraint `c` is satisfied when
/// `c <= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub constraints: Vec<f64>,
}

/// A functional to optimize. Implemented for closures.
pub trait Objective: Sync {
    fn evaluate(&self, params: &[f64], maps: &[Vec<usize>]) -> Evaluation;
}

impl<F> Objective for F
where
    F: Fn(&[f64], &[Vec<usize>]) -> Evaluation + Sync,
{
    fn evaluate(&self, params: &[f64], maps: &[Vec<usize>]) -> Evaluation {
        self(params, maps)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    /// Objective value at the witness; NaN when nothing feasible was found.
    pub value: f64,
    pub witness: Point,
    pub constraints: Vec<f64>,
    pub feasible: bool,
    pub evaluations: u64,
    /// Grid resolution actually used after applying `max_grid_points`.
    pub resolution: usize,
}

// ---------------------------------------------------------------------------
// Simplex helpers

/// Iterator over all points of the simplex grid with the given resolution:
/// compositions of `resolution` into `dim` parts, divided by `resolution`.
/// Produces `C(resolution + dim - 1, dim - 1)` points in lexicographic order.
pub fn simplex_grid(dim: usize, resolution: usize) -> SimplexGrid {
    assert!(
        dim >= 1 && resolution >= 1,
        "simplex_grid needs dim >= 1 and resolution >= 1"
    );
    let mut counts = vec![0; dim];
    counts[dim - 1] = resolution;
    SimplexGrid {
        counts,
        resolution,
        done: false,
    }
}

pub struct SimplexGrid {
    counts: Vec<usize>,
    resolution: usize,
    done: bool,
}

impl Iterator for SimplexGrid {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let r = self.resolution as f64;
        let out = self.counts.iter().map(|&c| c as f64 / r).collect();
        let d = self.counts.len();
        let mut tail = self.counts[d - 1];
        let mut advanced = false;
        for i in (0..d - 1).rev() {
            if tail > 0 {
                self.counts[i] += 1;
                for c in &mut self.counts[i + 1..] {
                    *c = 0;
                }
                self.counts[d - 1] = tail - 1;
                advanced = true;
                break;
            }
            tail += self.counts[i];
        }
        if !advanced {
            self.done = true;
        }
        Some(out)
    }
}

/// `C(resolution + dim - 1, dim - 1)`, saturating.
pub fn simplex_grid_len(dim: usize, resolution: usize) -> u128 {
    let k = (dim - 1) as u128;
    let n = (resolution + dim - 1) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_in_place(&mut out);
    out
}

fn project_in_place(v: &mut [f64]) {
    let n = v.len();
    if n == 1 {
        v[0] = 1.0;
        return;
    }
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= 1e-15 {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // absorb rounding so the block sums to one
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

// ---------------------------------------------------------------------------
// Bayes elimination

/// Per-observation expected-distortion minimizer and its expected distortion.
///
/// `obs_axes` index into `joint`; the returned table is row-major over them.
/// Zero-mass observations map to symbol 0; ties go to the lowest index.
pub fn bayes_decision(
    joint: &JointDistribution,
    source_axis: usize,
    obs_axes: &[usize],
    distortion: &Matrix,
) -> (Vec<usize>, f64) {
    let mut order = obs_axes.to_vec();
    order.push(source_axis);
    let m = joint.marginal_ordered(&order);
    let nx = joint.shape()[source_axis];
    let mut table = Vec::with_capacity(m.len() / nx);
    let mut total = 0.0;
    for row in m.chunks(nx) {
        let mut best = 0;
        let mut best_cost = f64::INFINITY;
        for xh in 0..distortion.cols() {
            let cost: f64 = row
                .iter()
                .enumerate()
                .map(|(x, &p)| if p > 0.0 { p * distortion.get(x, xh) } else { 0.0 })
                .sum();
            if cost < best_cost {
                best_cost = cost;
                best = xh;
            }
        }
        if row.iter().all(|&p| p <= 0.0) {
            best = 0;
            best_cost = 0.0;
        }
        table.push(best);
        total += best_cost;
    }
    (table, total)
}

/// The estimator of `source` from the `observed` variables that minimizes
/// expected distortion, as a deterministic map into `target`.
pub fn bayes_estimator(
    joint: &JointDistribution,
    source: &str,
    observed: &[&str],
    target: &Alphabet,
    distortion: &Matrix,
) -> Result<DeterministicMap> {
    let sx = joint.axis(source)?;
    let obs: Vec<usize> = observed.iter().map(|n| joint.axis(n)).collect::<Result<_>>()?;
    if obs.contains(&sx) {
        return Err(Error::OverlappingSets(source.to_string()));
    }
    if distortion.rows() != joint.shape()[sx] || distortion.cols() != target.len() {
        return Err(Error::ShapeMismatch {
            context: "distortion matrix".into(),
            expected: joint.shape()[sx] * target.len(),
            got: distortion.rows() * distortion.cols(),
        });
    }
    let (table, _) = bayes_decision(joint, sx, &obs, distortion);
    let domain = obs.iter().map(|&a| joint.axes()[a].clone()).collect();
    DeterministicMap::new(domain, target.clone(), table)
}

// ---------------------------------------------------------------------------
// Constrained search

#[derive(Clone, Debug)]
struct Scored {
    key: f64,
    point: Point,
    eval: Evaluation,
}

fn cmp_points(a: &Point, b: &Point) -> Ordering {
    for (x, y) in a.params.iter().zip(&b.params) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.maps.cmp(&b.maps)
}

fn cmp_scored(a: &Scored, b: &Scored) -> Ordering {
    a.key.total_cmp(&b.key).then_with(|| cmp_points(&a.point, &b.point))
}

fn better(a: Option<Scored>, b: Option<Scored>) -> Option<Scored> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if cmp_scored(&b, &a) == Ordering::Less { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Keeps the `k` smallest candidates under the total order.
#[derive(Clone, Debug, Default)]
struct TopK {
    k: usize,
    items: Vec<Scored>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self { k, items: Vec::new() }
    }

    fn push(&mut self, s: Scored) {
        if self.items.len() == self.k {
            match self.items.last() {
                Some(worst) if cmp_scored(&s, worst) != Ordering::Less => return,
                _ => {}
            }
        }
        let pos = self
            .items
            .binary_search_by(|probe| cmp_scored(probe, &s))
            .unwrap_or_else(|e| e);
        self.items.insert(pos, s);
        self.items.truncate(self.k);
    }

    fn merge(mut self, other: TopK) -> TopK {
        for s in other.items {
            self.push(s);
        }
        self
    }
}

struct Searcher<'a, O: Objective + ?Sized> {
    objective: &'a O,
    ranges: Vec<std::ops::Range<usize>>,
    sign: f64,
    config: &'a SolverConfig,
}

impl<O: Objective + ?Sized> Searcher<'_, O> {
    fn score(&self, point: Point) -> (Option<Scored>, Evaluation) {
        let eval = self.objective.evaluate(&point.params, &point.maps);
        let ok = eval.value.is_finite()
            && eval
                .constraints
                .iter()
                .all(|c| !c.is_nan() && *c <= self.config.feas_tol);
        let scored = ok.then(|| Scored {
            key: self.sign * eval.value,
            point,
            eval: eval.clone(),
        });
        (scored, eval)
    }

    /// Refinement holds moves to a tighter tolerance than `feas_tol`, so it
    /// cannot buy value by drifting into the tolerance band.
    fn refine_feasible(&self, eval: &Evaluation) -> bool {
        let tol = self.config.feas_tol.min(REFINE_TOL);
        eval.value.is_finite() && eval.constraints.iter().all(|c| !c.is_nan() && *c <= tol)
    }

    fn eval_params(&self, params: &[f64], maps: &[Vec<usize>]) -> Evaluation {
        self.objective.evaluate(params, maps)
    }

    fn project(&self, params: &mut [f64]) {
        for r in &self.ranges {
            project_in_place(&mut params[r.clone()]);
        }
    }

    /// Forward-difference gradient of the objective (sign-adjusted) and of
    /// the requested constraints.
    fn gradients(&self, x: &[f64], maps: &[Vec<usize>], fx: &Evaluation, cons: &[usize]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = x.len();
        let mut g = vec![0.0; n];
        let mut gc = vec![vec![0.0; n]; cons.len()];
        let mut y = x.to_vec();
        for r in &self.ranges {
            for i in r.clone() {
                y[r.clone()].copy_from_slice(&x[r.clone()]);
                y[i] += FD_STEP;
                let e = self.eval_params(&y, maps);
                g[i] = self.sign * (e.value - fx.value) / FD_STEP;
                for (k, &c) in cons.iter().enumerate() {
                    gc[k][i] = (e.constraints[c] - fx.constraints[c]) / FD_STEP;
                }
            }
            y[r.clone()].copy_from_slice(&x[r.clone()]);
        }
        (g, gc)
    }

    /// Projects `d` onto the tangent space of the block simplices at `x`,
    /// freezing coordinates that sit on a face and would leave it.
    fn tangent(&self, x: &[f64], d: &mut [f64]) {
        for r in &self.ranges {
            let block = r.clone();
            let mut free: Vec<bool> = vec![true; block.len()];
            for _ in 0..block.len() {
                let n_free = free.iter().filter(|f| **f).count();
                if n_free == 0 {
                    break;
                }
                let mean: f64 = block
                    .clone()
                    .zip(&free)
                    .filter(|(_, f)| **f)
                    .map(|(i, _)| d[i])
                    .sum::<f64>()
                    / n_free as f64;
                let mut changed = false;
                for (k, i) in block.clone().enumerate() {
                    if free[k] {
                        d[i] -= mean;
                        if x[i] <= 0.0 && d[i] < 0.0 {
                            free[k] = false;
                            changed = true;
                        }
                    }
                }
                for (k, i) in block.clone().enumerate() {
                    if !free[k] {
                        d[i] = 0.0;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
    }

    fn step(&self, x: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + t * b).collect();
        self.project(&mut y);
        y
    }

    /// Line search along `dir` from `cur`. An infeasible trial is bisected
    /// toward `cur`; a direction with no feasible room is abandoned.
    fn line_search(&self, cur: &Scored, dir: &[f64], t0: f64, evals: &mut u64) -> Option<(Scored, f64)> {
        let x = &cur.point.params;
        let maps = &cur.point.maps;
        let accept = |y: Vec<f64>, e: Evaluation| Scored {
            key: self.sign * e.value,
            point: Point {
                params: y,
                maps: maps.clone(),
            },
            eval: e,
        };
        let mut t = t0;
        while t >= MIN_STEP {
            let y = self.step(x, dir, t);
            let e = self.eval_params(&y, maps);
            *evals += 1;
            if self.refine_feasible(&e) {
                if self.sign * e.value < cur.key {
                    return Some((accept(y, e), t));
                }
                t *= self.config.step_shrink;
                continue;
            }
            if let Some((y, e)) = self.restore(y, e, maps, evals) {
                if self.sign * e.value < cur.key {
                    return Some((accept(y, e), t));
                }
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut best: Option<(Vec<f64>, Evaluation)> = None;
            for _ in 0..BISECTIONS {
                let mid = 0.5 * (lo + hi);
                let y = self.step(x, dir, t * mid);
                let e = self.eval_params(&y, maps);
                *evals += 1;
                if self.refine_feasible(&e) {
                    lo = mid;
                    best = Some((y, e));
                } else {
                    hi = mid;
                }
            }
            match best {
                Some((y, e)) if self.sign * e.value < cur.key => return Some((accept(y, e), t * lo)),
                Some(_) => t *= lo * self.config.step_shrink,
                None => return None,
            }
        }
        None
    }

    /// Newton corrections pulling an infeasible trial back onto its violated
    /// constraints along their tangent-projected gradients.
    fn restore(
        &self,
        mut y: Vec<f64>,
        mut e: Evaluation,
        maps: &[Vec<usize>],
        evals: &mut u64,
    ) -> Option<(Vec<f64>, Evaluation)> {
        let tol = self.config.feas_tol.min(REFINE_TOL);
        for _ in 0..RESTORE_STEPS {
            if e.constraints.iter().any(|c| c.is_nan()) || !e.value.is_finite() {
                return None;
            }
            let worst = e
                .constraints
                .iter()
                .enumerate()
                .filter(|(_, c)| **c > tol)
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)?;
            let (_, gc) = self.gradients(&y, maps, &e, &[worst]);
            *evals += y.len() as u64;
            let mut g = gc.into_iter().next()?;
            self.tangent(&y, &mut g);
            let norm2: f64 = g.iter().map(|v| v * v).sum();
            if norm2 < 1e-20 {
                return None;
            }
            let scale = (e.constraints[worst] + RESTORE_MARGIN) / norm2;
            y.iter_mut().zip(&g).for_each(|(p, q)| *p -= scale * q);
            self.project(&mut y);
            e = self.eval_params(&y, maps);
            *evals += 1;
            if self.refine_feasible(&e) {
                return Some((y, e));
            }
        }
        None
    }

    /// Zeroes the `frozen` coordinates of `v` and centers the rest of each
    /// block, projecting onto the tangent space of that face.
    fn face_project(&self, v: &mut [f64], frozen: &[bool]) {
        for r in &self.ranges {
            let free = r.clone().filter(|&i| !frozen[i]).count();
            let mean = if free == 0 {
                0.0
            } else {
                r.clone().filter(|&i| !frozen[i]).map(|i| v[i]).sum::<f64>() / free as f64
            };
            for i in r.clone() {
                v[i] = if frozen[i] { 0.0 } else { v[i] - mean };
            }
        }
    }

    /// `descent` projected onto the face of the simplices it does not leave
    /// and made orthogonal to the constraint gradients on that face, so that
    /// linear constraints stay unchanged along it.
    fn slide(&self, x: &[f64], descent: &[f64], gc: &[Vec<f64>]) -> Option<Vec<f64>> {
        let n = x.len();
        let mut frozen = vec![false; n];
        for _ in 0..=n {
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for c in gc {
                let mut c = c.clone();
                self.face_project(&mut c, &frozen);
                for b in &basis {
                    let dot: f64 = c.iter().zip(b).map(|(p, q)| p * q).sum();
                    c.iter_mut().zip(b).for_each(|(p, q)| *p -= dot * q);
                }
                basis.extend(self.unit(c));
            }
            let mut v = descent.to_vec();
            self.face_project(&mut v, &frozen);
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(p, q)| p * q).sum();
                v.iter_mut().zip(b).for_each(|(p, q)| *p -= dot * q);
            }
            let mut changed = false;
            for i in 0..n {
                if !frozen[i] && x[i] <= FACE_TOL && v[i] < 0.0 {
                    frozen[i] = true;
                    changed = true;
                }
            }
            if !changed {
                return Some(v);
            }
        }
        None
    }

    /// Descent directions in the Fisher metric of each block: `-x_i (g_i -
    /// sum_j x_j g_j)`, which shrinks toward zero near faces, and the same
    /// direction corrected to leave the given constraints unchanged to first
    /// order.
    fn natural_directions(&self, x: &[f64], g: &[f64], gc: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let lift = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; v.len()];
            for r in &self.ranges {
                let mean: f64 = r.clone().map(|i| x[i] * v[i]).sum();
                for i in r.clone() {
                    out[i] = x[i] * (v[i] - mean);
                }
            }
            out
        };
        let mut m: Vec<f64> = lift(g).into_iter().map(|v| -v).collect();
        let mut out = vec![m.clone()];
        if gc.is_empty() {
            return out;
        }
        let n: Vec<Vec<f64>> = gc.iter().map(|c| lift(c)).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let k = gc.len();
        // solve (gc_i . n_j) beta = gc_i . m by Gaussian elimination
        let mut a: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let mut row: Vec<f64> = (0..k).map(|j| dot(&gc[i], &n[j])).collect();
                row.push(dot(&gc[i], &m));
                row
            })
            .collect();
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .unwrap_or(col);
            if a[piv][col].abs() < 1e-14 {
                return out;
            }
            a.swap(col, piv);
            for r in 0..k {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..=k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        for j in 0..k {
            let beta = a[j][k] / a[j][j];
            m.iter_mut().zip(&n[j]).for_each(|(p, q)| *p -= beta * q);
        }
        out.push(m);
        out
    }

    fn unit(&self, mut d: Vec<f64>) -> Option<Vec<f64>> {
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-14 {
            d.iter_mut().for_each(|v| *v /= norm);
            Some(d)
        } else {
            None
        }
    }

    /// Projected-gradient polish from a feasible start. Only feasible,
    /// strictly improving moves are accepted. Each iteration line-searches
    /// the full descent direction, that direction slid along the nearly
    /// active constraints, and the descent direction restricted to single
    /// blocks, and keeps the best result.
    fn refine(&self, start: Scored) -> (Scored, u64) {
        let mut cur = start;
        let mut evals = 0u64;
        let n = cur.point.params.len();
        if n == 0 {
            return (cur, evals);
        }
        let mut t = INITIAL_STEP;
        for _ in 0..self.config.refine_iters {
            let x = cur.point.params.clone();
            let near: Vec<usize> = cur
                .eval
                .constraints
                .iter()
                .enumerate()
                .filter(|(_, c)| **c > -1e-4)
                .map(|(i, _)| i)
                .collect();
            let (g, gc) = self.gradients(&x, &cur.point.maps, &cur.eval, &near);
            evals += n as u64;
            let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
            self.tangent(&x, &mut d);
            let Some(d) = self.unit(d) else {
                break;
            };

            let natural = self.natural_directions(&x, &g, &gc);
            let mut directions = vec![d.clone()];
            if !gc.is_empty() {
                let descent: Vec<f64> = g.iter().map(|v| -v).collect();
                directions.extend(self.slide(&x, &descent, &gc).and_then(|v| self.unit(v)));
            }
            directions.extend(natural.into_iter().filter_map(|v| self.unit(v)));
            if self.ranges.len() > 1 {
                for r in &self.ranges {
                    let mut db = vec![0.0; n];
                    db[r.clone()].copy_from_slice(&d[r.clone()]);
                    directions.extend(self.unit(db));
                }
            }

            let mut moved: Option<(Scored, f64)> = None;
            for dir in &directions {
                if let Some(found) = self.line_search(&cur, dir, t.max(INITIAL_STEP), &mut evals) {
                    if moved
                        .as_ref()
                        .is_none_or(|m| cmp_scored(&found.0, &m.0) == Ordering::Less)
                    {
                        moved = Some(found);
                    }
                }
            }
            match moved {
                Some((next, used)) => {
                    let gain = cur.key - next.key;
                    cur = next;
                    t = (used * 1.5).clamp(MIN_STEP, MAX_STEP);
                    if gain < 1e-15 {
                        break;
                    }
                }
                None => break,
            }
        }
        (cur, evals)
    }
}

/// Greedily picks up to `k` of the ranked candidates, skipping any within L1
/// distance `min_dist` of one already picked (same maps).
fn spread_out(ranked: Vec<Scored>, k: usize, min_dist: f64) -> Vec<Scored> {
    let mut picked: Vec<Scored> = Vec::with_capacity(k);
    for s in ranked {
        if picked.len() == k {
            break;
        }
        let close = picked.iter().any(|p| {
            p.point.maps == s.point.maps
                && p.point
                    .params
                    .iter()
                    .zip(&s.point.params)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    <= min_dist + 1e-12
        });
        if !close {
            picked.push(s);
        }
    }
    picked
}

fn effective_resolution(shape: &Shape, config: &SolverConfig) -> (usize, u128) {
    let maps = shape.map_combinations();
    let total = |r: usize| {
        shape
            .blocks
            .iter()
            .fold(maps, |acc, &d| acc.saturating_mul(simplex_grid_len(d, r)))
    };
    let mut r = config.grid_resolution.max(1);
    while r > 1 && total(r) > config.max_grid_points as u128 {
        r -= 1;
    }
    (r, total(r))
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // exponential spacings give a uniform point on the simplex
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Constrained optimization over `shape`; see the module documentation.
pub fn minimize_constrained<O: Objective + ?Sized>(
    objective: &O,
    shape: &Shape,
    config: &SolverConfig,
    sense: Sense,
) -> SearchOutcome {
    minimize_constrained_from(objective, shape, config, sense, &[])
}

/// As [`minimize_constrained`], additionally refining from the supplied warm
/// starts (ignored unless feasible and correctly shaped).
pub fn minimize_constrained_from<O: Objective + ?Sized>(
    objective: &O,
    shape: &Shape,
    config: &SolverConfig,
    sense: Sense,
    warm: &[Point],
) -> SearchOutcome {
    let searcher = Searcher {
        objective,
        ranges: shape.block_ranges(),
        sign: sense.sign(),
        config,
    };
    let (resolution, total) = effective_resolution(shape, config);
    let block_points: Vec<Vec<Vec<f64>>> = shape
        .blocks
        .iter()
        .map(|&d| simplex_grid(d, resolution).collect())
        .collect();
    let map_counts: Vec<u128> = shape.maps.iter().map(MapSpace::count).collect();
    let radices: Vec<u128> = block_points
        .iter()
        .map(|b| b.len() as u128)
        .chain(map_counts.iter().copied())
        .collect();

    let decode = |mut flat: u128| -> Point {
        let mut digits = vec![0u128; radices.len()];
        for (slot, &r) in digits.iter_mut().zip(&radices).rev() {
            *slot = flat % r;
            flat /= r;
        }
        let nb = block_points.len();
        let mut params = Vec::with_capacity(shape.dim());
        for (b, &dgt) in block_points.iter().zip(&digits[..nb]) {
            params.extend_from_slice(&b[dgt as usize]);
        }
        let maps = shape
            .maps
            .iter()
            .zip(&digits[nb..])
            .map(|(m, &dgt)| m.decode(dgt))
            .collect();
        Point { params, maps }
    };

    let keep = config.restarts + 1;
    let pool = keep * DIVERSITY_POOL;
    let cap = config.max_grid_points as u128;
    let (grid_evals, top) = if total <= cap {
        let top = (0..total as u64)
            .into_par_iter()
            .fold(
                || TopK::new(pool),
                |mut acc, i| {
                    if let (Some(s), _) = searcher.score(decode(i as u128)) {
                        acc.push(s);
                    }
                    acc
                },
            )
            .reduce(|| TopK::new(pool), TopK::merge);
        (total as u64, top)
    } else {
        // Even the coarsest grid is too large: evaluate a seeded sample of it.
        let top = (0..config.max_grid_points)
            .into_par_iter()
            .fold(
                || TopK::new(pool),
                |mut acc, i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(i.wrapping_add(1 << 40));
                    let flat = rng.gen::<u128>() % total;
                    if let (Some(s), _) = searcher.score(decode(flat)) {
                        acc.push(s);
                    }
                    acc
                },
            )
            .reduce(|| TopK::new(pool), TopK::merge);
        (config.max_grid_points, top)
    };

    let mut starts: Vec<Scored> = Vec::new();
    let mut extra_evals = 0u64;
    for w in warm {
        if w.params.len() != shape.dim() || w.maps.len() != shape.maps.len() {
            continue;
        }
        extra_evals += 1;
        if let (Some(s), _) = searcher.score(w.clone()) {
            starts.push(s);
        }
    }
    let top = spread_out(top.items, keep, 2.0 / resolution as f64);
    starts.extend(top.iter().cloned());

    // Randomized starts: jitter around the best grid points.
    let jittered: Vec<(Option<Scored>, u64)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let base = if top.is_empty() {
                starts.get(r % starts.len().max(1)).map(|s| s.point.clone())
            } else {
                Some(top[r % top.len()].point.clone())
            };
            let Some(base) = base else {
                return (None, 0);
            };
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(r as u64 + 1);
            let mut evals = 0;
            let mut w = 0.5 * rng.gen::<f64>();
            let noise: Vec<Vec<f64>> = shape.blocks.iter().map(|&n| random_simplex(&mut rng, n)).collect();
            for _ in 0..6 {
                let mut params = base.params.clone();
                for (range, nz) in searcher.ranges.iter().zip(&noise) {
                    for (p, z) in params[range.clone()].iter_mut().zip(nz) {
                        *p = (1.0 - w) * *p + w * z;
                    }
                }
                evals += 1;
                if let (Some(s), _) = searcher.score(Point {
                    params,
                    maps: base.maps.clone(),
                }) {
                    return (Some(s), evals);
                }
                w *= 0.5;
            }
            (None, evals)
        })
        .collect();
    for (s, e) in jittered {
        extra_evals += e;
        starts.extend(s);
    }

    let (best, refine_evals) = starts
        .into_par_iter()
        .map(|s| {
            let (r, e) = searcher.refine(s);
            (Some(r), e)
        })
        .reduce(|| (None, 0), |a, b| (better(a.0, b.0), a.1 + b.1));

    let evaluations = grid_evals + extra_evals + refine_evals;
    match best {
        Some(s) => SearchOutcome {
            value: s.eval.value,
            constraints: s.eval.constraints,
            witness: s.point,
            feasible: true,
            evaluations,
            resolution,
        },
        None => SearchOutcome {
            value: f64::NAN,
            witness: Point::default(),
            constraints: Vec::new(),
            feasible: false,
            evaluations,
            resolution,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{binary_entropy, entropy, FinitePmf};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_examples() {
        let pts: Vec<_> = simplex_grid(2, 2).collect();
        assert_eq!(pts, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(simplex_grid(1, 7).collect::<Vec<_>>(), vec![vec![1.0]]);
        assert_eq!(simplex_grid(3, 4).count(), 15);
        assert_eq!(simplex_grid_len(3, 4), 15);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.6, 0.6]);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-15);
        let v = [0.2, 0.3, 0.5];
        assert_eq!(project_to_simplex(&v), v.to_vec());
    }

    fn posterior_joint(p0: f64) -> JointDistribution {
        // single observation symbol; P(X = 0) = p0
        JointDistribution::new(
            vec![Alphabet::binary("O"), Alphabet::binary("X")],
            vec![p0, 1.0 - p0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn bayes_examples() {
        let hat = Alphabet::binary("Xhat");
        let h = Matrix::hamming(2);
        let m = bayes_estimator(&posterior_joint(0.7), "X", &["O"], &hat, &h).unwrap();
        assert_eq!(m.table()[0], 0);
        // zero-mass observation maps to symbol 0
        assert_eq!(m.table()[1], 0);
        let m = bayes_estimator(&posterior_joint(0.5), "X", &["O"], &hat, &h).unwrap();
        assert_eq!(m.table()[0], 0);
        // d(0,1) = 3, d(1,0) = 1: cost of 0 is 0.7, cost of 1 is 0.9
        let asym = Matrix::from_rows(&[vec![0.0, 3.0], vec![1.0, 0.0]]).unwrap();
        let m = bayes_estimator(&posterior_joint(0.3), "X", &["O"], &hat, &asym).unwrap();
        assert_eq!(m.table()[0], 0);
        assert!(matches!(
            bayes_estimator(&posterior_joint(0.3), "Z", &["O"], &hat, &asym),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn toy_entropy_optimizations() {
        let h = |p: &[f64], _: &[Vec<usize>]| Evaluation {
            value: entropy(p),
            constraints: vec![],
        };
        let shape = Shape::new(vec![2]);
        let cfg = SolverConfig::quick();
        let lo = minimize_constrained(&h, &shape, &cfg, Sense::Minimize);
        assert!(lo.feasible);
        assert_eq!(lo.value, 0.0);
        let hi = minimize_constrained(&h, &shape, &cfg, Sense::Maximize);
        assert_abs_diff_eq!(hi.value, 1.0, epsilon = 1e-12);
    }

    /// min I(X; Xhat) with X ~ Bern(1/2), Hamming E[d] <= 0.11.
    pub(crate) fn binary_rd(d: f64) -> impl Fn(&[f64], &[Vec<usize>]) -> Evaluation {
        move |p: &[f64], _: &[Vec<usize>]| {
            let joint = [0.5 * p[0], 0.5 * p[1], 0.5 * p[2], 0.5 * p[3]];
            let py = [joint[0] + joint[2], joint[1] + joint[3]];
            let mi = 1.0 + entropy(&py) - entropy(&joint);
            Evaluation {
                value: mi,
                constraints: vec![joint[1] + joint[2] - d],
            }
        }
    }

    #[test]
    fn binary_rate_distortion_is_reached() {
        let cfg = SolverConfig {
            grid_resolution: 100,
            ..SolverConfig::default()
        };
        let out = minimize_constrained(&binary_rd(0.11), &Shape::new(vec![2, 2]), &cfg, Sense::Minimize);
        // 1 - H2(0.11) = 0.500084041835472 (mpmath)
        assert!(out.feasible);
        assert!((out.value - 0.500_084_041_835_472).abs() < 1e-7, "{}", out.value);
        assert!(out.constraints[0] <= cfg.feas_tol);
        assert_abs_diff_eq!(1.0 - binary_entropy(0.11), 0.500_084_041_835_472, epsilon = 1e-14);
    }

    #[test]
    fn infeasible_is_flagged() {
        let out = minimize_constrained(
            &binary_rd(-0.1),
            &Shape::new(vec![2, 2]),
            &SolverConfig::quick(),
            Sense::Minimize,
        );
        assert!(!out.feasible);
        assert!(out.value.is_nan());
    }

    #[test]
    fn enumerated_maps_are_searched() {
        // pick the map g: {0,1} -> {0,1,2} maximizing sum of images
        let f = |_: &[f64], m: &[Vec<usize>]| Evaluation {
            value: (m[0][0] + m[0][1]) as f64,
            constraints: vec![],
        };
        let shape = Shape::new(vec![1]).with_maps(vec![MapSpace { domain: 2, codomain: 3 }]);
        let out = minimize_constrained(&f, &shape, &SolverConfig::quick(), Sense::Maximize);
        assert_eq!(out.value, 4.0);
        assert_eq!(out.witness.maps, vec![vec![2, 2]]);
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let shape = Shape::new(vec![2, 2]);
        let cfg = SolverConfig::quick().with_seed(7);
        let a = minimize_constrained(&binary_rd(0.2), &shape, &cfg, Sense::Minimize);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| minimize_constrained(&binary_rd(0.2), &shape, &cfg, Sense::Minimize));
        assert_eq!(a, b);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn cardinality_caps() {
        let cfg = SolverConfig::default().with_card("U", 3);
        assert_eq!(cfg.cardinality("U", 9).unwrap(), 3);
        assert_eq!(cfg.cardinality("V", 5).unwrap(), 5);
        assert!(matches!(cfg.cardinality("U", 2), Err(Error::CardinalityCap { .. })));
    }

    proptest! {
        #[test]
        fn grid_points_are_pmfs(dim in 1usize..5, res in 1usize..9) {
            let mut n = 0u128;
            for p in simplex_grid(dim, res) {
                prop_assert!(p.iter().all(|v| *v >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                n += 1;
            }
            prop_assert_eq!(n, simplex_grid_len(dim, res));
        }

        #[test]
        fn projection_lands_on_simplex(v in prop::collection::vec(-3.0f64..3.0, 1..7)) {
            let p = project_to_simplex(&v);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // projecting again is the identity
            let q = project_to_simplex(&p);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn bayes_beats_every_map(
            w in prop::collection::vec(0.0f64..1.0, 12),
            d in prop::collection::vec(0.0f64..2.0, 6),
        ) {
            // joint over (O in 4 symbols, X in 3 symbols); targets in 2 symbols
            let s: f64 = w.iter().sum::<f64>() + 1e-9;
            let t: Vec<f64> = w.iter().map(|v| (v + 1e-9 / 12.0) / s).collect();
            let j = JointDistribution::new(vec![Alphabet::indexed("O", 4), Alphabet::indexed("X", 3)], t).unwrap();
            let dm = Matrix::new(3, 2, d).unwrap();
            let (table, best) = bayes_decision(&j, 1, &[0], &dm);
            let cost = |tab: &[usize]| j.expectation(|i| dm.get(i[1], tab[i[0]]));
            prop_assert!((cost(&table) - best).abs() < 1e-12);
            let space = MapSpace { domain: 4, codomain: 2 };
            for k in 0..space.count() {
                prop_assert!(best <= cost(&space.decode(k)) + 1e-12);
            }
        }
    }

    #[test]
    fn uniform_pmf_helper() {
        let u = FinitePmf::uniform(Alphabet::indexed("X", 4));
        assert_eq!(u.probs(), &[0.25; 4]);
    }
}
