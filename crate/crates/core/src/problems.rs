//! Problem instances: source coding with decoder- or encoder-side actions,
//! channel coding with action-dependent states, and the probing channel.
//! Also holds the catalog of the two worked examples and the
//! [`RegionPoint`] type every evaluator returns.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::{Alphabet, ConditionalPmf, DeterministicMap, FinitePmf};

/// Dense row-major matrix of non-negative reals (distortions, costs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "matrix".into(),
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch {
                context: "matrix row".into(),
                expected: cols,
                got: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Hamming distortion on an `n`-symbol alphabet.
    pub fn hamming(n: usize) -> Self {
        let data = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { 1.0 }).collect();
        Self { rows: n, cols: n, data }
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    fn first_bad_entry(&self) -> Option<f64> {
        self.data.iter().copied().find(|v| !v.is_finite() || *v < 0.0)
    }
}

/// How Decoder 2 observes the actions, or which encoder-side special case
/// applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    NonCausal,
    StrictlyCausal,
    Causal,
    EncoderSide,
    EncoderSideDual,
}

impl fmt::Display for SourceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SourceMode::NonCausal => "non_causal",
            SourceMode::StrictlyCausal => "strictly_causal",
            SourceMode::Causal => "causal",
            SourceMode::EncoderSide => "encoder_side",
            SourceMode::EncoderSideDual => "encoder_side_dual",
        };
        f.write_str(s)
    }
}

/// A failed invariant, naming the offending field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Source coding with actions that control the side information of
/// Decoder 1, while Decoder 2 reconstructs from `f(A)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceActionProblem {
    /// `p(x)`.
    pub source: FinitePmf,
    /// `p(y | x, a)`, inputs ordered `(X, A)`.
    pub side_channel: ConditionalPmf,
    /// `f: A -> B`, observed by Decoder 2.
    pub action_map: DeterministicMap,
    /// `f_Y: A -> Y`; required by the encoder-side modes, where the side
    /// information is a deterministic function of the action.
    pub side_map: Option<DeterministicMap>,
    pub xhat1: Alphabet,
    pub xhat2: Alphabet,
    /// `d1: X x Xhat1`.
    pub d1: Matrix,
    /// `d2: X x Xhat2`.
    pub d2: Matrix,
    /// `Lambda(a)`.
    pub action_cost: Vec<f64>,
    pub mode: SourceMode,
}

impl SourceActionProblem {
    pub fn x(&self) -> &Alphabet {
        self.source.alphabet()
    }

    pub fn a(&self) -> &Alphabet {
        &self.action_map.domain()[0]
    }

    pub fn b(&self) -> &Alphabet {
        self.action_map.codomain()
    }

    pub fn y(&self) -> &Alphabet {
        &self.side_channel.outputs()[0]
    }

    pub fn with_mode(mut self, mode: SourceMode) -> Self {
        self.mode = mode;
        self
    }

    /// Every violated invariant; empty iff the problem is well formed for its
    /// mode.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let x = self.x();
        if self.action_map.domain().len() != 1 {
            out.push(Violation::new(
                "action_map",
                "domain must be the single action alphabet A",
            ));
            return out;
        }
        let a = self.a();
        if self.side_channel.outputs().len() != 1 {
            out.push(Violation::new("side_channel", "must have exactly one output Y"));
        }
        let inputs = self.side_channel.inputs();
        let inputs_ok = inputs.len() == 2
            && inputs[0].name() == x.name()
            && inputs[0].len() == x.len()
            && inputs[1].name() == a.name()
            && inputs[1].len() == a.len();
        if !inputs_ok {
            out.push(Violation::new(
                "side_channel",
                format!("inputs must be exactly ({}, {})", x.name(), a.name()),
            ));
        }
        for (field, m, hat) in [("d1", &self.d1, &self.xhat1), ("d2", &self.d2, &self.xhat2)] {
            if m.rows() != x.len() || m.cols() != hat.len() {
                out.push(Violation::new(
                    field,
                    format!("shape must be {}x{}, got {}x{}", x.len(), hat.len(), m.rows(), m.cols()),
                ));
            }
            if let Some(v) = m.first_bad_entry() {
                out.push(Violation::new(
                    field,
                    format!("entries must be finite and >= 0, found {v}"),
                ));
            }
        }
        if self.action_cost.len() != a.len() {
            out.push(Violation::new(
                "action_cost",
                format!("needs {} entries, got {}", a.len(), self.action_cost.len()),
            ));
        }
        if let Some(v) = self.action_cost.iter().find(|v| !v.is_finite() || **v < 0.0) {
            out.push(Violation::new(
                "action_cost",
                format!("entries must be finite and >= 0, found {v}"),
            ));
        }
        if matches!(self.mode, SourceMode::EncoderSide | SourceMode::EncoderSideDual) {
            self.validate_side_map(&mut out);
        }
        out
    }

    fn validate_side_map(&self, out: &mut Vec<Violation>) {
        let Some(fy) = &self.side_map else {
            out.push(Violation::new(
                "side_map",
                format!("mode {} requires f_Y: A -> Y", self.mode),
            ));
            return;
        };
        let a = self.a();
        if fy.domain().len() != 1 || fy.domain()[0].len() != a.len() || fy.codomain().len() != self.y().len() {
            out.push(Violation::new(
                "side_map",
                "must map A into the side-information alphabet Y",
            ));
            return;
        }
        // Y must be exactly f_Y(A), whatever X is.
        let consistent = (0..self.x().len()).all(|xi| {
            (0..a.len()).all(|ai| {
                let row = self.side_channel.row(&[xi, ai]);
                row.iter()
                    .enumerate()
                    .all(|(y, &p)| (p - f64::from(u8::from(y == fy.table()[ai]))).abs() <= 1e-12)
            })
        });
        if !consistent {
            out.push(Violation::new("side_channel", "must equal the indicator of y = f_Y(a)"));
        }
        match self.mode {
            SourceMode::EncoderSide if !fy.factors_through(&self.action_map) => out.push(Violation::new(
                "side_map",
                "requires H(f_Y(A)|f(A)) = 0: f_Y must be a function of f(A)",
            )),
            SourceMode::EncoderSideDual if !self.action_map.factors_through(fy) => out.push(Violation::new(
                "action_map",
                "requires H(f(A)|f_Y(A)) = 0: f must be a function of f_Y(A)",
            )),
            _ => {}
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        match self.validate().first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidProblem(v.to_string())),
        }
    }
}

/// Channel coding where the encoder's actions drive the state channel and a
/// separate decoder reads `f(A)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelActionProblem {
    /// `p(s | a)`.
    pub state_channel: ConditionalPmf,
    /// `p(y | x, s, a)`, inputs ordered `(X, S, A)`.
    pub transmission_channel: ConditionalPmf,
    /// `f: A -> B`.
    pub action_map: DeterministicMap,
    /// `gamma: A x X`.
    pub cost: Matrix,
}

impl ChannelActionProblem {
    pub fn a(&self) -> &Alphabet {
        &self.action_map.domain()[0]
    }

    pub fn b(&self) -> &Alphabet {
        self.action_map.codomain()
    }

    pub fn s(&self) -> &Alphabet {
        &self.state_channel.outputs()[0]
    }

    pub fn x(&self) -> &Alphabet {
        &self.transmission_channel.inputs()[0]
    }

    pub fn y(&self) -> &Alphabet {
        &self.transmission_channel.outputs()[0]
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.action_map.domain().len() != 1 {
            out.push(Violation::new(
                "action_map",
                "domain must be the single action alphabet A",
            ));
            return out;
        }
        let a = self.a();
        let sc = &self.state_channel;
        if sc.outputs().len() != 1 || sc.inputs().len() != 1 || sc.inputs()[0].name() != a.name() {
            out.push(Violation::new("state_channel", format!("must be p(S|{})", a.name())));
            return out;
        }
        let tc = &self.transmission_channel;
        let ins = tc.inputs();
        let ok = tc.outputs().len() == 1
            && ins.len() == 3
            && ins[1].name() == self.s().name()
            && ins[1].len() == self.s().len()
            && ins[2].name() == a.name()
            && ins[2].len() == a.len();
        if !ok {
            out.push(Violation::new(
                "transmission_channel",
                format!("inputs must be exactly (X, {}, {})", self.s().name(), a.name()),
            ));
            return out;
        }
        if self.cost.rows() != a.len() || self.cost.cols() != self.x().len() {
            out.push(Violation::new(
                "cost",
                format!("shape must be {}x{}", a.len(), self.x().len()),
            ));
        }
        if let Some(v) = self.cost.first_bad_entry() {
            out.push(Violation::new(
                "cost",
                format!("entries must be finite and >= 0, found {v}"),
            ));
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        match self.validate().first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidProblem(v.to_string())),
        }
    }
}

/// The binary probing channel: `S ~ Bern(1 - epsilon)`, the channel is a BSC
/// with crossover 1/2 in state 0 and noiseless in state 1, and the encoder
/// sees `S` only when `A = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbingProblem {
    pub epsilon: f64,
    pub gamma_a: f64,
    pub gamma_x: f64,
}

impl ProbingProblem {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.epsilon) {
            out.push(Violation::new("epsilon", format!("{} is outside [0, 1]", self.epsilon)));
        }
        for (field, v) in [("gamma_a", self.gamma_a), ("gamma_x", self.gamma_x)] {
            if v.is_nan() || v < 0.0 {
                out.push(Violation::new(field, format!("{v} must be >= 0")));
            }
        }
        out
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: name.into(),
            value: v,
            range: "[0, 1]".into(),
        })
    }
}

/// The binary Z/S-channel example: `X ~ Bern(1/2)`, Hamming distortions,
/// `Lambda(a) = a`, `f(A) = A`. Under `A = 0` the side channel is a Z-channel
/// (`0 -> 0` surely, `1 -> 0` with probability `delta`); under `A = 1` it is
/// the mirrored S-channel.
pub fn zs_example(delta: f64) -> Result<SourceActionProblem> {
    check_unit("delta", delta)?;
    let x = Alphabet::binary("X");
    let a = Alphabet::binary("A");
    let side_channel = ConditionalPmf::from_fn(vec![Alphabet::binary("Y")], vec![x.clone(), a.clone()], |i, o| {
        let p_y1 = match (i[0], i[1]) {
            (0, 0) => 0.0,
            (1, 0) => 1.0 - delta,
            (0, _) => delta,
            _ => 1.0,
        };
        if o[0] == 1 {
            p_y1
        } else {
            1.0 - p_y1
        }
    })?;
    Ok(SourceActionProblem {
        source: FinitePmf::uniform(x),
        side_channel,
        action_map: DeterministicMap::identity(&a, "B"),
        side_map: None,
        xhat1: Alphabet::binary("Xhat1"),
        xhat2: Alphabet::binary("Xhat2"),
        d1: Matrix::hamming(2),
        d2: Matrix::hamming(2),
        action_cost: vec![0.0, 1.0],
        mode: SourceMode::NonCausal,
    })
}

pub fn probing_example(epsilon: f64, gamma_a: f64, gamma_x: f64) -> Result<ProbingProblem> {
    check_unit("epsilon", epsilon)?;
    for (name, v) in [("gamma_a", gamma_a), ("gamma_x", gamma_x)] {
        if v.is_nan() || v < 0.0 {
            return Err(Error::OutOfRange {
                name: name.into(),
                value: v,
                range: "[0, inf)".into(),
            });
        }
    }
    Ok(ProbingProblem {
        epsilon,
        gamma_a,
        gamma_x,
    })
}

/// The optimizing parameters behind a reported value: the flattened simplex
/// blocks, any enumerated deterministic maps, and the auxiliary cardinalities
/// the parameters were laid out for.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub blocks: Vec<usize>,
    pub params: Vec<f64>,
    pub maps: Vec<Vec<usize>>,
    pub cardinalities: BTreeMap<String, usize>,
}

impl Witness {
    pub fn block(&self, i: usize) -> &[f64] {
        let start: usize = self.blocks[..i].iter().sum();
        &self.params[start..start + self.blocks[i]]
    }
}

/// Which evaluator produced a [`RegionPoint`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    NonCausal,
    StrictlyCausal,
    Causal,
    EncoderSide,
    EncoderSideDual,
    Channel,
    Probing,
    BinaryNonCausal,
    BinaryStrictlyCausal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub name: String,
    pub value: f64,
}

impl Slack {
    pub fn new(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
        }
    }
}

/// One evaluated operating point. For source problems `rate` is `R`; for
/// channel problems it is the sum rate `R1 + R2` and `r1` is set.
///
/// Slacks are reported as `right side - left side` of each constraint, so a
/// feasible witness has every slack `>= -feas_tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub evaluator: Evaluator,
    pub feasible: bool,
    pub rate: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d2: Option<f64>,
    pub cost: Vec<f64>,
    pub slacks: Vec<Slack>,
    pub witness: Witness,
    pub evaluations: u64,
}

impl RegionPoint {
    pub fn slack(&self, name: &str) -> Option<f64> {
        self.slacks.iter().find(|s| s.name == name).map(|s| s.value)
    }

    pub fn min_slack(&self) -> f64 {
        self.slacks.iter().map(|s| s.value).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{chain_compose, Factor};
    use approx::assert_abs_diff_eq;

    fn info_given_action(delta: f64, action: usize) -> f64 {
        let p = zs_example(delta).unwrap();
        let x: Factor = p.source.clone().into();
        let a: Factor = FinitePmf::point_mass(p.a().clone(), action).unwrap().into();
        let j = chain_compose(&[x, a, p.side_channel.clone().into()]).unwrap();
        j.mutual_information(&["X"], &["Y"], &["A"]).unwrap()
    }

    #[test]
    fn zs_example_is_valid_and_has_stated_limits() {
        assert!(zs_example(0.3).unwrap().validate().is_empty());
        let p = zs_example(0.0).unwrap();
        for xi in 0..2 {
            for ai in 0..2 {
                assert_eq!(p.side_channel.prob(&[xi, ai], &[xi]), 1.0);
            }
        }
        let p = zs_example(1.0).unwrap();
        for xi in 0..2 {
            assert_eq!(p.side_channel.prob(&[xi, 0], &[0]), 1.0);
            assert_eq!(p.side_channel.prob(&[xi, 1], &[1]), 1.0);
        }
        let p = zs_example(0.5).unwrap();
        assert_eq!(p.side_channel.prob(&[1, 0], &[1]), 0.5);
        for a in 0..2 {
            assert_abs_diff_eq!(info_given_action(0.0, a), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(info_given_action(1.0, a), 0.0, epsilon = 1e-12);
        }
        assert!(matches!(zs_example(1.2), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn validate_names_offending_field() {
        let mut p = zs_example(0.5).unwrap();
        p.d2 = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let v = p.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "d2");
        // idempotent and side-effect free
        assert_eq!(p.validate(), v);
    }

    #[test]
    fn encoder_side_requires_side_map_factoring_through_f() {
        let a = Alphabet::indexed("A", 4);
        let y = Alphabet::binary("Y");
        let x = Alphabet::binary("X");
        let fy = DeterministicMap::from_fn(vec![a.clone()], y.clone(), |i| i[0] % 2).unwrap();
        let f = DeterministicMap::from_fn(vec![a.clone()], Alphabet::binary("B"), |i| i[0] / 2).unwrap();
        let side = ConditionalPmf::from_fn(vec![y], vec![x.clone(), a], |i, o| {
            f64::from(u8::from(o[0] == i[1] % 2))
        })
        .unwrap();
        let p = SourceActionProblem {
            source: FinitePmf::uniform(x),
            side_channel: side,
            action_map: f,
            side_map: Some(fy),
            xhat1: Alphabet::binary("Xhat1"),
            xhat2: Alphabet::binary("Xhat2"),
            d1: Matrix::hamming(2),
            d2: Matrix::hamming(2),
            action_cost: vec![0.0; 4],
            mode: SourceMode::EncoderSide,
        };
        let v = p.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("H(f_Y(A)|f(A)) = 0"), "{}", v[0]);

        let mut missing = p.clone();
        missing.side_map = None;
        assert_eq!(missing.validate()[0].field, "side_map");
    }

    #[test]
    fn probing_examples() {
        let p = probing_example(0.5, 1.0, 0.25).unwrap();
        assert!(p.validate().is_empty());
        assert_eq!(p.epsilon, 0.5);
        assert!(probing_example(0.0, 1.0, 1.0).unwrap().validate().is_empty());
        assert!(probing_example(1.5, 1.0, 1.0).is_err());
        assert!(probing_example(0.5, -1.0, 1.0).is_err());
    }
}
