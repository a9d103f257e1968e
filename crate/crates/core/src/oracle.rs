//! Brute-force reference optima.
//!
//! [`exhaustive_optimum`] visits every point of a quantized simplex grid (and
//! every enumerated map) exactly once, with no randomness and no refinement.
//! The grid enumeration here is written separately from the one in
//! [`solvers`](crate::solvers) so the two can check each other.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::probability::{Alphabet, ConditionalPmf, DeterministicMap};
use crate::problems::{probing_example, zs_example, ChannelActionProblem, Matrix, SourceMode};
use crate::regions::{BinaryExample, BinaryMode, Budgets, ChannelObjective, ProbingObjective, SourceObjective};
use crate::solvers::{Evaluation, Objective, Point, SearchOutcome, Sense, Shape, SolverConfig};

/// Default limit on grid points times enumerated maps.
pub const DEFAULT_CAP: u128 = 100_000_000;
/// Constraint tolerance used to decide feasibility of a grid point.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub value: f64,
    pub witness: Point,
    pub resolution: usize,
    pub points_evaluated: u64,
    /// Number of free simplex coordinates (sum of block sizes).
    pub dim: usize,
}

// Lattice points of {k in N^dim : sum k = total}, by recursion on the first
// coordinate.
fn compositions(dim: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if dim == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(dim - 1, total - first, prefix, out);
        prefix.pop();
    }
}

fn lattice(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    let mut raw = Vec::new();
    compositions(dim, resolution, &mut Vec::with_capacity(dim), &mut raw);
    raw.into_iter()
        .map(|k| k.into_iter().map(|c| c as f64 / resolution as f64).collect())
        .collect()
}

fn lattice_len(dim: usize, resolution: usize) -> u128 {
    // C(resolution + dim - 1, dim - 1) by Pascal's rule, saturating
    let mut row = vec![1u128; resolution + 1];
    for _ in 1..dim {
        for i in 1..=resolution {
            row[i] = row[i].saturating_add(row[i - 1]);
        }
    }
    row[resolution]
}

fn better(a: &(f64, Point), b: &(f64, Point)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => {
            let by_params =
                a.1.params
                    .iter()
                    .zip(&b.1.params)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal);
            by_params.then_with(|| a.1.maps.cmp(&b.1.maps)) == Ordering::Less
        }
    }
}

/// Exact optimum over the grid of the given resolution.
pub fn exhaustive_optimum<O: Objective + ?Sized>(
    objective: &O,
    shape: &Shape,
    resolution: usize,
    sense: Sense,
    cap: u128,
) -> Result<OracleReport> {
    if resolution == 0 {
        return Err(Error::OutOfRange {
            name: "resolution".into(),
            value: 0.0,
            range: "[1, inf)".into(),
        });
    }
    let maps_total = shape.maps.iter().fold(1u128, |acc, m| acc.saturating_mul(m.count()));
    let total = shape
        .blocks
        .iter()
        .fold(maps_total, |acc, &d| acc.saturating_mul(lattice_len(d, resolution)));
    if total > cap {
        return Err(Error::GridTooLarge { points: total, cap });
    }
    let blocks: Vec<Vec<Vec<f64>>> = shape.blocks.iter().map(|&d| lattice(d, resolution)).collect();
    let radices: Vec<u128> = blocks
        .iter()
        .map(|b| b.len() as u128)
        .chain(shape.maps.iter().map(|m| m.count()))
        .collect();
    let sign = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let point_at = |mut flat: u128| {
        let mut digits = vec![0u128; radices.len()];
        for (d, &r) in digits.iter_mut().zip(&radices).rev() {
            *d = flat % r;
            flat /= r;
        }
        let params = blocks
            .iter()
            .zip(&digits)
            .flat_map(|(b, &i)| b[i as usize].iter().copied())
            .collect();
        let maps = shape
            .maps
            .iter()
            .zip(&digits[blocks.len()..])
            .map(|(m, &i)| m.decode(i))
            .collect();
        Point { params, maps }
    };
    let best = (0..total as u64)
        .into_par_iter()
        .filter_map(|i| {
            let p = point_at(i as u128);
            let Evaluation { value, constraints } = objective.evaluate(&p.params, &p.maps);
            let ok = value.is_finite() && constraints.iter().all(|c| *c <= FEAS_TOL);
            ok.then_some((sign * value, p))
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a });
    match best {
        Some((key, witness)) => Ok(OracleReport {
            value: sign * key,
            witness,
            resolution,
            points_evaluated: total as u64,
            dim: shape.blocks.iter().sum(),
        }),
        None => Err(Error::EmptyFeasibleSet {
            evaluated: total as u64,
        }),
    }
}

/// Heuristic bound on how far the grid optimum can sit from the true
/// optimum: `lipschitz * dim / resolution`.
pub fn quantization_bound(lipschitz: f64, dim: usize, resolution: usize) -> f64 {
    lipschitz * dim as f64 / resolution as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

/// Checks a solver value against the oracle. For minimization the solver
/// must be no worse than the oracle (`<= oracle + tol`) and not implausibly
/// better (`>= oracle - bound - tol`); maximization mirrors this.
pub fn cross_check(outcome: &SearchOutcome, oracle: &OracleReport, bound: f64, tol: f64, sense: Sense) -> Verdict {
    if !outcome.feasible {
        return Verdict {
            pass: false,
            detail: "solver found no feasible point but the oracle did".into(),
        };
    }
    let (s, o) = (outcome.value, oracle.value);
    let (worse, too_good) = match sense {
        Sense::Minimize => (s > o + tol, s < o - bound - tol),
        Sense::Maximize => (s < o - tol, s > o + bound + tol),
    };
    let detail = if worse {
        format!("solver {s} is worse than the oracle {o} beyond {tol}")
    } else if too_good {
        format!("solver {s} beats the oracle {o} by more than the bound {bound}")
    } else {
        format!("solver {s}, oracle {o}, bound {bound}")
    };
    Verdict {
        pass: !(worse || too_good),
        detail,
    }
}

/// A named optimization problem with a grid resolution small enough for
/// exhaustive enumeration.
pub struct CatalogInstance {
    pub name: String,
    pub objective: Box<dyn Objective + Send>,
    pub shape: Shape,
    pub sense: Sense,
    pub resolution: usize,
    /// Lipschitz surrogate for [`quantization_bound`].
    pub lipschitz: f64,
}

/// `min I(X; Xhat)` for `X ~ Bern(1/2)` under Hamming distortion `<= d`.
pub fn binary_rate_distortion(d: f64) -> impl Fn(&[f64], &[Vec<usize>]) -> Evaluation + Send + Sync {
    move |p: &[f64], _: &[Vec<usize>]| {
        let joint = [0.5 * p[0], 0.5 * p[1], 0.5 * p[2], 0.5 * p[3]];
        let out = [joint[0] + joint[2], joint[1] + joint[3]];
        let mi = 1.0 + crate::probability::entropy(&out) - crate::probability::entropy(&joint);
        Evaluation {
            value: mi,
            constraints: vec![joint[1] + joint[2] - d],
        }
    }
}

fn small_channel() -> ChannelActionProblem {
    let a = Alphabet::binary("A");
    let s = Alphabet::binary("S");
    let x = Alphabet::binary("X");
    ChannelActionProblem {
        state_channel: ConditionalPmf::from_rows(s.clone(), vec![a.clone()], &[vec![0.8, 0.2], vec![0.3, 0.7]])
            .expect("valid rows"),
        transmission_channel: ConditionalPmf::from_fn(vec![Alphabet::binary("Y")], vec![x, s, a.clone()], |i, o| {
            // BSC whose crossover depends on the state
            let flip = if i[1] == 0 { 0.05 } else { 0.3 };
            if (i[0] == o[0]) ^ (i[2] == 1 && i[1] == 1) {
                1.0 - flip
            } else {
                flip
            }
        })
        .expect("valid channel"),
        action_map: DeterministicMap::identity(&a, "B"),
        cost: Matrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 1.5]]).expect("valid matrix"),
    }
}

/// The instances used for oracle cross-checks.
pub fn catalog() -> Result<Vec<CatalogInstance>> {
    let small = SolverConfig::default().with_card("U", 2).with_card("V", 2);
    let mut out: Vec<CatalogInstance> = Vec::new();
    out.push(CatalogInstance {
        name: "binary rate-distortion, D = 0.11".into(),
        objective: Box::new(binary_rate_distortion(0.11)),
        shape: Shape::new(vec![2, 2]),
        sense: Sense::Minimize,
        resolution: 200,
        lipschitz: 2.0,
    });
    let sources = [
        (
            "non-causal Z/S, delta = 1",
            1.0,
            SourceMode::NonCausal,
            Budgets::new(0.0, 0.5, 1.0),
        ),
        (
            "non-causal Z/S, delta = 0.5",
            0.5,
            SourceMode::NonCausal,
            Budgets::new(0.2, 0.3, 1.0),
        ),
        (
            "strictly causal Z/S, delta = 0.5",
            0.5,
            SourceMode::StrictlyCausal,
            Budgets::new(0.2, 0.3, 1.0),
        ),
        (
            "causal Z/S, delta = 0.5",
            0.5,
            SourceMode::Causal,
            Budgets::new(0.2, 0.3, 0.6),
        ),
    ];
    for (name, delta, mode, budgets) in sources {
        let obj = SourceObjective::new(&zs_example(delta)?, mode, budgets, &small)?;
        out.push(CatalogInstance {
            name: name.into(),
            shape: obj.shape(),
            objective: Box::new(obj),
            sense: Sense::Minimize,
            resolution: 6,
            lipschitz: 4.0,
        });
    }
    for (name, mode) in [
        ("binary example, non-causal", BinaryMode::NonCausal),
        ("binary example, strictly causal", BinaryMode::StrictlyCausal),
    ] {
        out.push(CatalogInstance {
            name: format!("{name}, delta = 0.5, D2 = 0.2"),
            objective: Box::new(BinaryExample::new(0.5, 0.2, mode)?),
            shape: BinaryExample::shape(),
            sense: Sense::Minimize,
            resolution: 60,
            lipschitz: 4.0,
        });
    }
    out.push(CatalogInstance {
        name: "probing, Gamma_X = 0.2, R1 = 0.5".into(),
        objective: Box::new(ProbingObjective::new(&probing_example(0.5, 1.0, 0.2)?, 0.5)?),
        shape: ProbingObjective::shape(),
        sense: Sense::Maximize,
        resolution: 60,
        lipschitz: 2.0,
    });
    let ch = ChannelObjective::new(&small_channel(), 0.5, 1.0, &small)?;
    out.push(CatalogInstance {
        name: "action-dependent state channel, R1 = 0.5".into(),
        shape: ch.shape(),
        objective: Box::new(ch),
        sense: Sense::Maximize,
        resolution: 10,
        lipschitz: 4.0,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::binary_entropy;
    use crate::solvers::minimize_constrained;

    #[test]
    fn lattice_matches_closed_form() {
        for dim in 1..5 {
            for res in 1..7 {
                assert_eq!(lattice(dim, res).len() as u128, lattice_len(dim, res));
            }
        }
    }

    #[test]
    fn binary_rate_distortion_oracle() {
        let r = exhaustive_optimum(
            &binary_rate_distortion(0.11),
            &Shape::new(vec![2, 2]),
            200,
            Sense::Minimize,
            DEFAULT_CAP,
        )
        .unwrap();
        // 1 - H2(0.11) = 0.500084041835472 (mpmath)
        assert!((r.value - 0.500_084_041_835_472).abs() < 2e-3);
        assert!(r.value >= 1.0 - binary_entropy(0.11) - 1e-12);
        assert_eq!(r.points_evaluated, 201 * 201);
    }

    #[test]
    fn constant_objective_and_empty_set() {
        let obj = SourceObjective::new(
            &zs_example(1.0).unwrap(),
            SourceMode::NonCausal,
            Budgets::new(0.0, 0.5, 1.0),
            &SolverConfig::default().with_card("U", 2),
        )
        .unwrap();
        for res in [1, 2, 3] {
            let r = exhaustive_optimum(&obj, &obj.shape(), res, Sense::Minimize, DEFAULT_CAP).unwrap();
            assert!((r.value - 1.0).abs() < 1e-12);
        }
        let e = exhaustive_optimum(
            &binary_rate_distortion(-0.1),
            &Shape::new(vec![2, 2]),
            10,
            Sense::Minimize,
            DEFAULT_CAP,
        );
        assert!(matches!(e, Err(Error::EmptyFeasibleSet { .. })));
        let e = exhaustive_optimum(
            &binary_rate_distortion(0.1),
            &Shape::new(vec![2, 2]),
            10,
            Sense::Minimize,
            10,
        );
        assert!(matches!(e, Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn finer_nested_grids_never_hurt() {
        let f = binary_rate_distortion(0.2);
        let shape = Shape::new(vec![2, 2]);
        for r in [5, 10, 20] {
            let coarse = exhaustive_optimum(&f, &shape, r, Sense::Minimize, DEFAULT_CAP).unwrap();
            let fine = exhaustive_optimum(&f, &shape, 2 * r, Sense::Minimize, DEFAULT_CAP).unwrap();
            assert!(fine.value <= coarse.value + 1e-12);
        }
    }

    #[test]
    fn oracle_is_thread_invariant() {
        let f = binary_rate_distortion(0.2);
        let shape = Shape::new(vec![2, 2]);
        let a = exhaustive_optimum(&f, &shape, 40, Sense::Minimize, DEFAULT_CAP).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| exhaustive_optimum(&f, &shape, 40, Sense::Minimize, DEFAULT_CAP).unwrap());
        assert_eq!(a, b);
    }

    fn outcome(value: f64) -> SearchOutcome {
        SearchOutcome {
            value,
            witness: Point::default(),
            constraints: vec![],
            feasible: true,
            evaluations: 0,
            resolution: 200,
        }
    }

    fn report(value: f64) -> OracleReport {
        OracleReport {
            value,
            witness: Point::default(),
            resolution: 200,
            points_evaluated: 0,
            dim: 4,
        }
    }

    #[test]
    fn cross_check_examples() {
        let bound = quantization_bound(0.05, 4, 200);
        assert!(cross_check(&outcome(0.50008), &report(0.5010), bound, 1e-3, Sense::Minimize).pass);
        let v = cross_check(
            &outcome(0.5010 - bound - 2e-3),
            &report(0.5010),
            bound,
            1e-3,
            Sense::Minimize,
        );
        assert!(!v.pass);
        assert!(cross_check(&outcome(0.3), &report(0.3), 0.0, 0.0, Sense::Maximize).pass);
        assert!(!cross_check(&outcome(0.2), &report(0.3), 0.0, 1e-9, Sense::Maximize).pass);
    }

    #[test]
    fn solver_matches_oracle_on_rate_distortion() {
        let f = binary_rate_distortion(0.11);
        let shape = Shape::new(vec![2, 2]);
        let cfg = SolverConfig {
            grid_resolution: 50,
            ..SolverConfig::default()
        };
        let s = minimize_constrained(&f, &shape, &cfg, Sense::Minimize);
        let o = exhaustive_optimum(&f, &shape, s.resolution, Sense::Minimize, DEFAULT_CAP).unwrap();
        let v = cross_check(
            &s,
            &o,
            quantization_bound(2.0, o.dim, o.resolution),
            1e-9,
            Sense::Minimize,
        );
        assert!(v.pass, "{}", v.detail);
    }
}
