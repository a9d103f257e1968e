//! Finite-alphabet probability tensors and the information measures built on
//! them.
//!
//! Everything here works in bits and uses the convention `0 log 0 = 0`.
//! Tensors are dense and row-major: the last axis varies fastest.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Construction-time tolerance on total probability mass.
pub const MASS_TOL: f64 = 1e-9;

/// Shannon entropy in bits of a (possibly unnormalized) probability vector.
/// Zero entries contribute nothing.
pub fn entropy(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h
}

/// Binary entropy function `H(p) = -p log p - (1-p) log (1-p)`.
pub fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

/// A named, ordered set of symbols. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    name: Arc<str>,
    symbols: Arc<[String]>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(name: impl Into<String>, symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let name: String = name.into();
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::EmptyAlphabet(name));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::DuplicateSymbol {
                    alphabet: name,
                    symbol: s.clone(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            symbols: symbols.into(),
        })
    }

    /// Alphabet with symbols `"0"`, `"1"`, ..., `"n-1"`.
    ///
    /// # Panics
    ///
    /// Panics if `n == 0`.
    pub fn indexed(name: impl Into<String>, n: usize) -> Self {
        assert!(n > 0, "alphabet needs at least one symbol");
        Self::new(name, (0..n).map(|i| i.to_string())).expect("indexed symbols are unique")
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::indexed(name, 2)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Same symbols under a different variable name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        let name: String = name.into();
        Self {
            name: name.into(),
            symbols: Arc::clone(&self.symbols),
        }
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.name, &*self.symbols)
    }
}

fn check_row(context: &str, row: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !p.is_finite() {
            return Err(Error::NonFinite(context.to_string()));
        }
        if p < 0.0 {
            return Err(Error::NegativeProbability {
                context: context.to_string(),
                value: p,
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > MASS_TOL {
        return Err(Error::NotNormalized {
            context: context.to_string(),
            sum,
        });
    }
    Ok(())
}

fn renormalize(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|p| *p /= sum);
    }
}

fn product_len(alphabets: &[Alphabet]) -> usize {
    alphabets.iter().map(Alphabet::len).product()
}

/// Decodes a row-major flat index into per-axis indices.
pub(crate) fn unflatten(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for (slot, &n) in out.iter_mut().zip(shape).rev() {
        *slot = flat % n;
        flat /= n;
    }
}

pub(crate) fn flatten(index: &[usize], shape: &[usize]) -> usize {
    index.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// A probability mass function over one alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct FinitePmf {
    alphabet: Alphabet,
    probs: Vec<f64>,
}

impl FinitePmf {
    pub fn new(alphabet: Alphabet, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() != alphabet.len() {
            return Err(Error::ShapeMismatch {
                context: alphabet.name().to_string(),
                expected: alphabet.len(),
                got: probs.len(),
            });
        }
        check_row(alphabet.name(), &probs)?;
        renormalize(&mut probs);
        Ok(Self { alphabet, probs })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.len();
        Self {
            alphabet,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(alphabet: Alphabet, index: usize) -> Result<Self> {
        let mut probs = vec![0.0; alphabet.len()];
        *probs.get_mut(index).ok_or_else(|| Error::OutOfRange {
            name: alphabet.name().to_string(),
            value: index as f64,
            range: format!("[0, {})", alphabet.len()),
        })? = 1.0;
        Ok(Self { alphabet, probs })
    }

    /// `Bern(p)` on the binary alphabet `{0, 1}`, with `P(1) = p`.
    pub fn bernoulli(name: impl Into<String>, p: f64) -> Result<Self> {
        Self::new(Alphabet::binary(name), vec![1.0 - p, p])
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }
}

/// A conditional pmf `p(outputs | inputs)`, stored as one row per input
/// combination. The table is row-major over `[inputs.., outputs..]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalPmf {
    outputs: Vec<Alphabet>,
    inputs: Vec<Alphabet>,
    table: Vec<f64>,
}

impl ConditionalPmf {
    pub fn new(outputs: Vec<Alphabet>, inputs: Vec<Alphabet>, mut table: Vec<f64>) -> Result<Self> {
        if outputs.is_empty() {
            return Err(Error::EmptyFactor);
        }
        let row = product_len(&outputs);
        let rows = product_len(&inputs);
        let context = Self::describe(&outputs, &inputs);
        if table.len() != row * rows {
            return Err(Error::ShapeMismatch {
                context,
                expected: row * rows,
                got: table.len(),
            });
        }
        for chunk in table.chunks_mut(row) {
            check_row(&context, chunk)?;
            renormalize(chunk);
        }
        Ok(Self { outputs, inputs, table })
    }

    /// Builds the table by calling `prob(inputs, outputs)` for every index pair.
    pub fn from_fn(
        outputs: Vec<Alphabet>,
        inputs: Vec<Alphabet>,
        mut prob: impl FnMut(&[usize], &[usize]) -> f64,
    ) -> Result<Self> {
        let in_shape: Vec<usize> = inputs.iter().map(Alphabet::len).collect();
        let out_shape: Vec<usize> = outputs.iter().map(Alphabet::len).collect();
        let rows: usize = in_shape.iter().product();
        let row: usize = out_shape.iter().product();
        let mut in_idx = vec![0; in_shape.len()];
        let mut out_idx = vec![0; out_shape.len()];
        let mut table = Vec::with_capacity(rows * row);
        for r in 0..rows {
            unflatten(r, &in_shape, &mut in_idx);
            for c in 0..row {
                unflatten(c, &out_shape, &mut out_idx);
                table.push(prob(&in_idx, &out_idx));
            }
        }
        Self::new(outputs, inputs, table)
    }

    /// Single-output convenience constructor; `rows[i]` is the pmf for input
    /// combination `i` in row-major order.
    pub fn from_rows(output: Alphabet, inputs: Vec<Alphabet>, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(vec![output], inputs, rows.concat())
    }

    fn describe(outputs: &[Alphabet], inputs: &[Alphabet]) -> String {
        let names = |a: &[Alphabet]| a.iter().map(|x| x.name().to_string()).collect::<Vec<_>>().join(",");
        format!("p({}|{})", names(outputs), names(inputs))
    }

    pub fn outputs(&self) -> &[Alphabet] {
        &self.outputs
    }

    pub fn inputs(&self) -> &[Alphabet] {
        &self.inputs
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row_len(&self) -> usize {
        product_len(&self.outputs)
    }

    pub fn row_count(&self) -> usize {
        product_len(&self.inputs)
    }

    /// The output pmf for the given input symbol indices.
    pub fn row(&self, inputs: &[usize]) -> &[f64] {
        let shape: Vec<usize> = self.inputs.iter().map(Alphabet::len).collect();
        self.row_at(flatten(inputs, &shape))
    }

    pub fn row_at(&self, flat: usize) -> &[f64] {
        let n = self.row_len();
        &self.table[flat * n..(flat + 1) * n]
    }

    pub fn prob(&self, inputs: &[usize], outputs: &[usize]) -> f64 {
        let shape: Vec<usize> = self.outputs.iter().map(Alphabet::len).collect();
        self.row(inputs)[flatten(outputs, &shape)]
    }
}

/// A total function from a product of alphabets into a codomain alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeterministicMap {
    domain: Vec<Alphabet>,
    codomain: Alphabet,
    table: Vec<usize>,
}

impl DeterministicMap {
    pub fn new(domain: Vec<Alphabet>, codomain: Alphabet, table: Vec<usize>) -> Result<Self> {
        let expected = product_len(&domain);
        if table.len() != expected {
            return Err(Error::ShapeMismatch {
                context: format!("map into {}", codomain.name()),
                expected,
                got: table.len(),
            });
        }
        if let Some(&bad) = table.iter().find(|&&b| b >= codomain.len()) {
            return Err(Error::OutOfRange {
                name: codomain.name().to_string(),
                value: bad as f64,
                range: format!("[0, {})", codomain.len()),
            });
        }
        Ok(Self {
            domain,
            codomain,
            table,
        })
    }

    pub fn from_fn(domain: Vec<Alphabet>, codomain: Alphabet, mut f: impl FnMut(&[usize]) -> usize) -> Result<Self> {
        let shape: Vec<usize> = domain.iter().map(Alphabet::len).collect();
        let mut idx = vec![0; shape.len()];
        let table = (0..product_len(&domain))
            .map(|flat| {
                unflatten(flat, &shape, &mut idx);
                f(&idx)
            })
            .collect();
        Self::new(domain, codomain, table)
    }

    /// Identity on `domain`, landing in a copy of its alphabet named `codomain`.
    pub fn identity(domain: &Alphabet, codomain: impl Into<String>) -> Self {
        Self {
            domain: vec![domain.clone()],
            codomain: domain.renamed(codomain),
            table: (0..domain.len()).collect(),
        }
    }

    pub fn constant(domain: Vec<Alphabet>, codomain: Alphabet, value: usize) -> Result<Self> {
        let n = product_len(&domain);
        Self::new(domain, codomain, vec![value; n])
    }

    pub fn domain(&self) -> &[Alphabet] {
        &self.domain
    }

    pub fn codomain(&self) -> &Alphabet {
        &self.codomain
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn apply(&self, args: &[usize]) -> usize {
        let shape: Vec<usize> = self.domain.iter().map(Alphabet::len).collect();
        self.table[flatten(args, &shape)]
    }

    /// True when `self` is a function of `other`: equal images under `other`
    /// imply equal images under `self`. Both maps must share one domain.
    /// Equivalent to `H(self(A) | other(A)) = 0` for a full-support `A`.
    pub fn factors_through(&self, other: &DeterministicMap) -> bool {
        if self.table.len() != other.table.len() {
            return false;
        }
        let mut image = vec![None; other.codomain.len()];
        for (&mine, &theirs) in self.table.iter().zip(&other.table) {
            match image[theirs] {
                None => image[theirs] = Some(mine),
                Some(prev) if prev != mine => return false,
                Some(_) => {}
            }
        }
        true
    }
}

/// One link of a chain-rule factorization.
#[derive(Clone, Debug)]
pub enum Factor {
    Pmf(FinitePmf),
    Conditional(ConditionalPmf),
    Map(DeterministicMap),
}

impl From<FinitePmf> for Factor {
    fn from(p: FinitePmf) -> Self {
        Factor::Pmf(p)
    }
}

impl From<ConditionalPmf> for Factor {
    fn from(p: ConditionalPmf) -> Self {
        Factor::Conditional(p)
    }
}

impl From<DeterministicMap> for Factor {
    fn from(m: DeterministicMap) -> Self {
        Factor::Map(m)
    }
}

/// A joint pmf over named axes.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    axes: Vec<Alphabet>,
    shape: Vec<usize>,
    tensor: Vec<f64>,
}

impl JointDistribution {
    pub fn new(axes: Vec<Alphabet>, mut tensor: Vec<f64>) -> Result<Self> {
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.name() == a.name()) {
                return Err(Error::DuplicateVariable(a.name().to_string()));
            }
        }
        let expected = product_len(&axes);
        if tensor.len() != expected {
            return Err(Error::ShapeMismatch {
                context: "joint tensor".into(),
                expected,
                got: tensor.len(),
            });
        }
        check_row("joint tensor", &tensor)?;
        renormalize(&mut tensor);
        Ok(Self::from_raw(axes, tensor))
    }

    /// Trusted constructor for tensors assembled from already-valid factors.
    pub(crate) fn from_raw(axes: Vec<Alphabet>, tensor: Vec<f64>) -> Self {
        let shape = axes.iter().map(Alphabet::len).collect();
        Self { axes, shape, tensor }
    }

    pub fn from_pmf(pmf: &FinitePmf) -> Self {
        Self::from_raw(vec![pmf.alphabet.clone()], pmf.probs.clone())
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn tensor(&self) -> &[f64] {
        &self.tensor
    }

    pub fn names(&self) -> Vec<&str> {
        self.axes.iter().map(Alphabet::name).collect()
    }

    pub fn axis(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name() == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    fn axes_of(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.axis(n)).collect()
    }

    fn mask_of(&self, names: &[&str]) -> Result<u64> {
        Ok(self.axes_of(names)?.into_iter().fold(0, |m, a| m | (1 << a)))
    }

    pub fn prob(&self, index: &[usize]) -> f64 {
        self.tensor[flatten(index, &self.shape)]
    }

    /// Calls `f(index, p)` for every cell.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], f64)) {
        let mut idx = vec![0; self.shape.len()];
        for &p in &self.tensor {
            f(&idx, p);
            for ax in (0..idx.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < self.shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
    }

    /// `E[f(index)]` under this distribution.
    pub fn expectation(&self, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each(|idx, p| {
            if p > 0.0 {
                acc += p * f(idx);
            }
        });
        acc
    }

    /// Marginal over `axes`, laid out row-major in the order given.
    pub fn marginal_ordered(&self, axes: &[usize]) -> Vec<f64> {
        let n = self.shape.len();
        let mut sub_stride = vec![0usize; n];
        let mut size = 1;
        for &ax in axes.iter().rev() {
            sub_stride[ax] = size;
            size *= self.shape[ax];
        }
        let mut out = vec![0.0; size];
        let mut idx = vec![0usize; n];
        let mut sub = 0usize;
        for &p in &self.tensor {
            out[sub] += p;
            for ax in (0..n).rev() {
                idx[ax] += 1;
                sub += sub_stride[ax];
                if idx[ax] < self.shape[ax] {
                    break;
                }
                sub -= sub_stride[ax] * self.shape[ax];
                idx[ax] = 0;
            }
        }
        out
    }

    fn marginal_mask(&self, mask: u64) -> Vec<f64> {
        let axes: Vec<usize> = (0..self.shape.len()).filter(|a| mask >> a & 1 == 1).collect();
        self.marginal_ordered(&axes)
    }

    /// Entropy of the marginal on the axes selected by `mask` (bit `i` selects
    /// axis `i`). The empty mask has entropy 0.
    pub fn entropy_mask(&self, mask: u64) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        entropy(&self.marginal_mask(mask))
    }

    /// `I(left; right | given)` on axis masks.
    pub fn mutual_information_mask(&self, left: u64, right: u64, given: u64) -> f64 {
        self.entropy_mask(left | given) + self.entropy_mask(right | given)
            - self.entropy_mask(left | right | given)
            - self.entropy_mask(given)
    }

    /// `H(target | given)` on axis masks.
    pub fn conditional_entropy_mask(&self, target: u64, given: u64) -> f64 {
        self.entropy_mask(target | given) - self.entropy_mask(given)
    }

    pub fn marginalize(&self, keep: &[&str]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyVariableSet);
        }
        let mask = self.mask_of(keep)?;
        let axes: Vec<usize> = (0..self.axes.len()).filter(|a| mask >> a & 1 == 1).collect();
        let tensor = self.marginal_ordered(&axes);
        Ok(Self::from_raw(
            axes.iter().map(|&a| self.axes[a].clone()).collect(),
            tensor,
        ))
    }

    /// Joint entropy of the named variables.
    pub fn entropy(&self, vars: &[&str]) -> Result<f64> {
        Ok(self.entropy_mask(self.mask_of(vars)?))
    }

    pub fn conditional_entropy(&self, target: &[&str], given: &[&str]) -> Result<f64> {
        let t = self.mask_of(target)?;
        let g = self.mask_of(given)?;
        disjoint(self, t, g)?;
        Ok(self.conditional_entropy_mask(t, g))
    }

    /// `I(left; right | given)` in bits.
    pub fn mutual_information(&self, left: &[&str], right: &[&str], given: &[&str]) -> Result<f64> {
        if left.is_empty() || right.is_empty() {
            return Err(Error::EmptyVariableSet);
        }
        let l = self.mask_of(left)?;
        let r = self.mask_of(right)?;
        let g = self.mask_of(given)?;
        disjoint(self, l, r)?;
        disjoint(self, l, g)?;
        disjoint(self, r, g)?;
        Ok(self.mutual_information_mask(l, r, g))
    }

    /// Adjoins `new_var = map(domain vars)` as a new last axis.
    pub fn pushforward(&self, map: &DeterministicMap, new_var: &str) -> Result<Self> {
        let renamed = DeterministicMap {
            domain: map.domain.clone(),
            codomain: map.codomain.renamed(new_var),
            table: map.table.clone(),
        };
        self.extend(&Factor::Map(renamed))
    }

    /// Multiplies in one more chain-rule factor, appending its outputs as new
    /// trailing axes.
    pub fn extend(&self, factor: &Factor) -> Result<Self> {
        let (inputs, outputs): (&[Alphabet], Vec<Alphabet>) = match factor {
            Factor::Pmf(p) => (&[], vec![p.alphabet.clone()]),
            Factor::Conditional(c) => (&c.inputs, c.outputs.clone()),
            Factor::Map(m) => (&m.domain, vec![m.codomain.clone()]),
        };
        if outputs.is_empty() {
            return Err(Error::EmptyFactor);
        }
        for (i, out) in outputs.iter().enumerate() {
            if self.axis(out.name()).is_ok() || outputs[..i].iter().any(|o| o.name() == out.name()) {
                return Err(Error::DuplicateVariable(out.name().to_string()));
            }
        }
        let mut input_axes = Vec::with_capacity(inputs.len());
        for input in inputs {
            let ax = self
                .axis(input.name())
                .map_err(|_| Error::DanglingCondition(input.name().to_string()))?;
            if self.shape[ax] != input.len() {
                return Err(Error::ShapeMismatch {
                    context: format!("conditioning variable {}", input.name()),
                    expected: self.shape[ax],
                    got: input.len(),
                });
            }
            input_axes.push(ax);
        }
        let row_len = product_len(&outputs);
        let n = self.shape.len();
        let mut in_stride = vec![0usize; n];
        let mut s = 1;
        for &ax in input_axes.iter().rev() {
            in_stride[ax] += s;
            s *= self.shape[ax];
        }
        let mut tensor = vec![0.0; self.tensor.len() * row_len];
        let mut idx = vec![0usize; n];
        let mut row = 0usize;
        for (i, &p) in self.tensor.iter().enumerate() {
            if p != 0.0 {
                let dst = &mut tensor[i * row_len..(i + 1) * row_len];
                match factor {
                    Factor::Pmf(q) => dst.iter_mut().zip(&q.probs).for_each(|(d, &q)| *d = p * q),
                    Factor::Conditional(c) => dst.iter_mut().zip(c.row_at(row)).for_each(|(d, &q)| *d = p * q),
                    Factor::Map(m) => dst[m.table[row]] = p,
                }
            }
            for ax in (0..n).rev() {
                idx[ax] += 1;
                row += in_stride[ax];
                if idx[ax] < self.shape[ax] {
                    break;
                }
                row -= in_stride[ax] * self.shape[ax];
                idx[ax] = 0;
            }
        }
        let mut axes = self.axes.clone();
        axes.extend(outputs);
        Ok(Self::from_raw(axes, tensor))
    }

    /// `p(outputs | inputs)` read off the joint. Rows whose conditioning event
    /// has zero mass are filled with the uniform pmf.
    pub fn condition(&self, outputs: &[&str], inputs: &[&str]) -> Result<ConditionalPmf> {
        if outputs.is_empty() {
            return Err(Error::EmptyVariableSet);
        }
        let out_axes = self.axes_of(outputs)?;
        let in_axes = self.axes_of(inputs)?;
        let om: u64 = out_axes.iter().fold(0, |m, a| m | 1 << a);
        let im: u64 = in_axes.iter().fold(0, |m, a| m | 1 << a);
        disjoint(self, om, im)?;
        let order: Vec<usize> = in_axes.iter().chain(&out_axes).copied().collect();
        let mut table = self.marginal_ordered(&order);
        let row_len: usize = out_axes.iter().map(|&a| self.shape[a]).product();
        for row in table.chunks_mut(row_len) {
            let mass: f64 = row.iter().sum();
            if mass > 0.0 {
                row.iter_mut().for_each(|p| *p /= mass);
            } else {
                row.iter_mut().for_each(|p| *p = 1.0 / row_len as f64);
            }
        }
        Ok(ConditionalPmf {
            outputs: out_axes.iter().map(|&a| self.axes[a].clone()).collect(),
            inputs: in_axes.iter().map(|&a| self.axes[a].clone()).collect(),
            table,
        })
    }
}

fn disjoint(j: &JointDistribution, a: u64, b: u64) -> Result<()> {
    let both = a & b;
    if both != 0 {
        let ax = both.trailing_zeros() as usize;
        return Err(Error::OverlappingSets(j.axes[ax].name().to_string()));
    }
    Ok(())
}

/// Multiplies out a chain-rule factorization into one joint distribution.
///
/// Each factor may only condition on variables introduced by earlier factors
/// and must introduce at least one new variable.
pub fn chain_compose(factors: &[Factor]) -> Result<JointDistribution> {
    let mut joint = JointDistribution::from_raw(Vec::new(), vec![1.0]);
    for factor in factors {
        joint = joint.extend(factor)?;
    }
    if joint.axes.is_empty() {
        return Err(Error::EmptyVariableSet);
    }
    renormalize(&mut joint.tensor);
    Ok(joint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bsc(crossover: f64) -> JointDistribution {
        let x = FinitePmf::uniform(Alphabet::binary("X"));
        let ch = ConditionalPmf::from_rows(
            Alphabet::binary("Y"),
            vec![Alphabet::binary("X")],
            &[vec![1.0 - crossover, crossover], vec![crossover, 1.0 - crossover]],
        )
        .unwrap();
        chain_compose(&[x.into(), ch.into()]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let four = FinitePmf::uniform(Alphabet::indexed("X", 4));
        assert_abs_diff_eq!(four.entropy(), 2.0, epsilon = 1e-15);
        let point = FinitePmf::point_mass(Alphabet::indexed("X", 3), 1).unwrap();
        assert_eq!(point.entropy(), 0.0);
        // mpmath, 30 digits: 0.811278124459132863909695792039
        let b = FinitePmf::bernoulli("X", 0.25).unwrap();
        assert_abs_diff_eq!(b.entropy(), 0.811_278_124_459_132_9, epsilon = 1e-15);
    }

    #[test]
    fn pmf_validation() {
        let a = Alphabet::binary("X");
        assert!(matches!(
            FinitePmf::new(a.clone(), vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            FinitePmf::new(a.clone(), vec![1.5, -0.5]),
            Err(Error::NegativeProbability { .. })
        ));
        assert!(matches!(FinitePmf::new(a, vec![1.0]), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(
            Alphabet::new("X", ["a", "a"]),
            Err(Error::DuplicateSymbol { .. })
        ));
        assert!(matches!(
            Alphabet::new("X", Vec::<String>::new()),
            Err(Error::EmptyAlphabet(_))
        ));
    }

    #[test]
    fn marginalize_examples() {
        let x = FinitePmf::new(Alphabet::binary("X"), vec![0.3, 0.7]).unwrap();
        let y = FinitePmf::new(Alphabet::indexed("Y", 3), vec![0.2, 0.3, 0.5]).unwrap();
        let ch = ConditionalPmf::from_fn(vec![y.alphabet().clone()], vec![x.alphabet().clone()], |_, o| {
            y.probs()[o[0]]
        })
        .unwrap();
        let j = chain_compose(&[x.clone().into(), ch.into()]).unwrap();
        let mx = j.marginalize(&["X"]).unwrap();
        for (a, b) in mx.tensor().iter().zip(x.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        assert_eq!(j.marginalize(&["X", "Y"]).unwrap(), j);
        assert_eq!(j.marginalize(&["Z"]), Err(Error::UnknownVariable("Z".into())));

        let uniform =
            JointDistribution::new(vec![Alphabet::binary("X"), Alphabet::binary("Y")], vec![0.25; 4]).unwrap();
        assert_eq!(uniform.marginalize(&["Y"]).unwrap().tensor(), &[0.5, 0.5]);
    }

    #[test]
    fn mutual_information_examples() {
        let indep = JointDistribution::new(
            vec![Alphabet::binary("X"), Alphabet::binary("Y")],
            vec![0.12, 0.28, 0.18, 0.42],
        )
        .unwrap();
        assert_abs_diff_eq!(
            indep.mutual_information(&["X"], &["Y"], &[]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            bsc(0.0).mutual_information(&["X"], &["Y"], &[]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // 1 - H2(0.11), mpmath: 0.500084041835472004
        assert_abs_diff_eq!(
            bsc(0.11).mutual_information(&["X"], &["Y"], &[]).unwrap(),
            0.500_084_041_835_472,
            epsilon = 1e-12
        );
        assert_eq!(
            bsc(0.1).mutual_information(&["X"], &["X", "Y"], &[]),
            Err(Error::OverlappingSets("X".into()))
        );
        assert_abs_diff_eq!(
            bsc(0.11).conditional_entropy(&["Y"], &["X"]).unwrap(),
            binary_entropy(0.11),
            epsilon = 1e-12
        );
    }

    #[test]
    fn pushforward_examples() {
        let a = Alphabet::indexed("A", 3);
        let j = JointDistribution::from_pmf(&FinitePmf::uniform(a.clone()));

        let constant = DeterministicMap::constant(vec![a.clone()], Alphabet::binary("B"), 1).unwrap();
        let jb = j.pushforward(&constant, "B").unwrap();
        assert_eq!(jb.entropy(&["B"]).unwrap(), 0.0);

        let ident = DeterministicMap::identity(&a, "B");
        let jb = j.pushforward(&ident, "B").unwrap();
        assert_abs_diff_eq!(
            jb.mutual_information(&["A"], &["B"], &[]).unwrap(),
            jb.entropy(&["A"]).unwrap(),
            epsilon = 1e-12
        );

        let parity = DeterministicMap::from_fn(vec![a.clone()], Alphabet::binary("B"), |i| i[0] % 2).unwrap();
        let jb = j.pushforward(&parity, "B").unwrap();
        assert_abs_diff_eq!(jb.marginalize(&["B"]).unwrap().tensor()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(jb.marginalize(&["A"]).unwrap(), j);

        assert_eq!(jb.pushforward(&parity, "B"), Err(Error::DuplicateVariable("B".into())));
    }

    #[test]
    fn chain_compose_examples() {
        let j = bsc(0.0);
        assert_eq!(j.tensor(), &[0.5, 0.0, 0.0, 0.5]);

        let x = FinitePmf::new(Alphabet::indexed("X", 3), vec![0.2, 0.3, 0.5]).unwrap();
        let j = chain_compose(&[x.clone().into()]).unwrap();
        assert_eq!(j.tensor(), x.probs());
        assert_eq!(j.names(), vec!["X"]);

        let dangling = ConditionalPmf::from_rows(
            Alphabet::binary("Y"),
            vec![Alphabet::binary("Z")],
            &[vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        assert_eq!(
            chain_compose(&[x.clone().into(), dangling.into()]),
            Err(Error::DanglingCondition("Z".into()))
        );
        assert_eq!(
            chain_compose(&[x.clone().into(), x.into()]),
            Err(Error::DuplicateVariable("X".into()))
        );
    }

    #[test]
    fn five_axis_factorization_recovers_its_factors() {
        let x = FinitePmf::new(Alphabet::binary("X"), vec![0.4, 0.6]).unwrap();
        let mut raw = Vec::new();
        for xi in 0..2 {
            let row: Vec<f64> = (0..12).map(|c| 1.0 + ((xi * 7 + c * 3) % 5) as f64).collect();
            let s: f64 = row.iter().sum();
            raw.extend(row.into_iter().map(|v| v / s));
        }
        let q = ConditionalPmf::new(
            vec![
                Alphabet::binary("Xhat2"),
                Alphabet::binary("A"),
                Alphabet::indexed("U", 3),
            ],
            vec![Alphabet::binary("X")],
            raw,
        )
        .unwrap();
        let side = ConditionalPmf::from_fn(
            vec![Alphabet::binary("Y")],
            vec![Alphabet::binary("X"), Alphabet::binary("A")],
            |i, o| if o[0] == (i[0] ^ i[1]) { 0.8 } else { 0.2 },
        )
        .unwrap();
        let j = chain_compose(&[x.into(), q.clone().into(), side.into()]).unwrap();
        assert_eq!(j.names(), vec!["X", "Xhat2", "A", "U", "Y"]);
        let back = j.condition(&["Xhat2", "A", "U"], &["X"]).unwrap();
        for (a, b) in back.table().iter().zip(q.table()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn factors_through_matches_conditional_entropy() {
        let a = Alphabet::indexed("A", 4);
        let f = DeterministicMap::from_fn(vec![a.clone()], Alphabet::binary("B"), |i| i[0] / 2).unwrap();
        let coarse = DeterministicMap::from_fn(vec![a.clone()], Alphabet::binary("Y"), |i| (i[0] / 2) ^ 1).unwrap();
        let fine = DeterministicMap::from_fn(vec![a.clone()], Alphabet::binary("Y"), |i| i[0] % 2).unwrap();
        let j = JointDistribution::from_pmf(&FinitePmf::uniform(a));
        for (y, expect) in [(&coarse, true), (&fine, false)] {
            let jy = j.pushforward(&f, "B").unwrap().pushforward(y, "Y").unwrap();
            let h = jy.conditional_entropy(&["Y"], &["B"]).unwrap();
            assert_eq!(y.factors_through(&f), expect);
            assert_eq!(h.abs() < 1e-12, expect);
        }
    }
}
