//! JSON problem files.
//!
//! ```json
//! {
//!   "kind": "source",
//!   "mode": "non_causal",
//!   "alphabets": { "X": ["0", "1"], "A": ["0", "1"], "B": ["0", "1"], "Y": ["0", "1"],
//!                  "Xhat1": ["0", "1"], "Xhat2": ["0", "1"] },
//!   "pmfs": { "X": [0.5, 0.5] },
//!   "channels": { "Y": { "given": ["X", "A"], "table": [[[1, 0], [0.5, 0.5]], [[0.5, 0.5], [0, 1]]] } },
//!   "maps": { "f": { "domain": ["A"], "codomain": "B", "table": { "0": "0", "1": "1" } } },
//!   "distortions": { "d1": [[0, 1], [1, 0]], "d2": [[0, 1], [1, 0]] },
//!   "costs": { "action": [0, 1] }
//! }
//! ```
//!
//! Tables are nested arrays in row-major order over the conditioning
//! variables followed by the output. Map tables are keyed by the domain
//! symbols joined with commas.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use infoembed::probability::{Alphabet, ConditionalPmf, DeterministicMap, FinitePmf};
use infoembed::problems::{ChannelActionProblem, Matrix, ProbingProblem, SourceActionProblem, SourceMode};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Source,
    Channel,
    Probing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub given: Vec<String>,
    pub table: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub domain: Vec<String>,
    pub codomain: String,
    pub table: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<SourceMode>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub alphabets: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pmfs: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub channels: BTreeMap<String, ChannelSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub maps: BTreeMap<String, MapSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub distortions: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub costs: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probing: Option<ProbingProblem>,
}

/// A parsed and validated problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Source(SourceActionProblem),
    Channel(ChannelActionProblem),
    Probing(ProbingProblem),
}

fn flatten_into(v: &Value, shape: &[usize], ctx: &str, out: &mut Vec<f64>) -> Result<()> {
    match shape.split_first() {
        None => {
            let x = v
                .as_f64()
                .ok_or_else(|| anyhow!("`{ctx}`: expected a number, found {v}"))?;
            out.push(x);
        }
        Some((&n, rest)) => {
            let arr = v
                .as_array()
                .ok_or_else(|| anyhow!("`{ctx}`: expected an array of length {n}"))?;
            if arr.len() != n {
                bail!("`{ctx}`: expected an array of length {n}, found length {}", arr.len());
            }
            for item in arr {
                flatten_into(item, rest, ctx, out)?;
            }
        }
    }
    Ok(())
}

fn flatten(v: &Value, shape: &[usize], ctx: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    flatten_into(v, shape, ctx, &mut out)?;
    Ok(out)
}

fn nest(data: &[f64], shape: &[usize]) -> Value {
    match shape.split_first() {
        None => Value::from(data[0]),
        Some((&n, rest)) => {
            let step = data.len() / n.max(1);
            Value::Array((0..n).map(|i| nest(&data[i * step..(i + 1) * step], rest)).collect())
        }
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("problem file is not valid JSON for the schema")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    fn alphabet(&self, name: &str) -> Result<Alphabet> {
        let symbols = self
            .alphabets
            .get(name)
            .ok_or_else(|| anyhow!("alphabet `{name}` is not defined"))?;
        Ok(Alphabet::new(name, symbols.iter().cloned())?)
    }

    fn channel(&self, output: &str, given: &[&str]) -> Result<ConditionalPmf> {
        let spec = self
            .channels
            .get(output)
            .ok_or_else(|| anyhow!("channel for `{output}` is not defined"))?;
        if spec.given != given {
            bail!("channel for `{output}` must be given {given:?}, found {:?}", spec.given);
        }
        let inputs: Vec<Alphabet> = given.iter().map(|n| self.alphabet(n)).collect::<Result<_>>()?;
        let out = self.alphabet(output)?;
        let mut shape: Vec<usize> = inputs.iter().map(Alphabet::len).collect();
        shape.push(out.len());
        let table = flatten(&spec.table, &shape, &format!("channels.{output}.table"))?;
        ConditionalPmf::new(vec![out], inputs, table).with_context(|| format!("channel for `{output}`"))
    }

    fn map(&self, name: &str, domain: &[&str]) -> Result<Option<DeterministicMap>> {
        let Some(spec) = self.maps.get(name) else {
            return Ok(None);
        };
        if spec.domain != domain {
            bail!("map `{name}` must have domain {domain:?}, found {:?}", spec.domain);
        }
        let dom: Vec<Alphabet> = domain.iter().map(|n| self.alphabet(n)).collect::<Result<_>>()?;
        let cod = self.alphabet(&spec.codomain)?;
        let shape: Vec<usize> = dom.iter().map(Alphabet::len).collect();
        let size: usize = shape.iter().product();
        let mut table = vec![usize::MAX; size];
        for (key, image) in &spec.table {
            let parts: Vec<&str> = key.split(',').collect();
            if parts.len() != dom.len() {
                bail!("map `{name}`: key `{key}` must name {} symbols", dom.len());
            }
            let mut flat = 0;
            for (part, alph) in parts.iter().zip(&dom) {
                let i = alph
                    .index_of(part)
                    .ok_or_else(|| anyhow!("map `{name}`: `{part}` is not a symbol of `{}`", alph.name()))?;
                flat = flat * alph.len() + i;
            }
            table[flat] = cod
                .index_of(image)
                .ok_or_else(|| anyhow!("map `{name}`: `{image}` is not a symbol of `{}`", cod.name()))?;
        }
        if table.contains(&usize::MAX) {
            bail!("map `{name}` does not cover every domain combination");
        }
        Ok(Some(DeterministicMap::new(dom, cod, table)?))
    }

    fn matrix(&self, group: &BTreeMap<String, Value>, key: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let v = group.get(key).ok_or_else(|| anyhow!("`{key}` is not defined"))?;
        Ok(Matrix::new(rows, cols, flatten(v, &[rows, cols], key)?)?)
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let problem = match self.kind {
            Kind::Source => Problem::Source(self.to_source()?),
            Kind::Channel => Problem::Channel(self.to_channel()?),
            Kind::Probing => {
                let p = self
                    .probing
                    .ok_or_else(|| anyhow!("`probing` parameters are not defined"))?;
                if let Some(v) = p.validate().first() {
                    bail!("{v}");
                }
                Problem::Probing(p)
            }
        };
        Ok(problem)
    }

    fn to_source(&self) -> Result<SourceActionProblem> {
        let x = self.alphabet("X")?;
        let a = self.alphabet("A")?;
        let xhat1 = self.alphabet("Xhat1")?;
        let xhat2 = self.alphabet("Xhat2")?;
        let px = self
            .pmfs
            .get("X")
            .ok_or_else(|| anyhow!("pmf for `X` is not defined"))?;
        let source = FinitePmf::new(x.clone(), flatten(px, &[x.len()], "pmfs.X")?).context("pmf for `X`")?;
        let side_channel = self.channel("Y", &["X", "A"])?;
        let action_map = self
            .map("f", &["A"])?
            .ok_or_else(|| anyhow!("map `f` is not defined"))?;
        let side_map = self.map("f_Y", &["A"])?;
        let action = self
            .costs
            .get("action")
            .ok_or_else(|| anyhow!("`action` cost is not defined"))?;
        let p = SourceActionProblem {
            source,
            side_channel,
            action_map,
            side_map,
            d1: self.matrix(&self.distortions, "d1", x.len(), xhat1.len())?,
            d2: self.matrix(&self.distortions, "d2", x.len(), xhat2.len())?,
            xhat1,
            xhat2,
            action_cost: flatten(action, &[a.len()], "costs.action")?,
            mode: self.mode.unwrap_or(SourceMode::NonCausal),
        };
        if let Some(v) = p.validate().first() {
            bail!("{v}");
        }
        Ok(p)
    }

    fn to_channel(&self) -> Result<ChannelActionProblem> {
        let a = self.alphabet("A")?;
        let x = self.alphabet("X")?;
        let cost = if self.costs.contains_key("gamma") {
            self.matrix(&self.costs, "gamma", a.len(), x.len())?
        } else {
            Matrix::constant(a.len(), x.len(), 0.0)
        };
        let p = ChannelActionProblem {
            state_channel: self.channel("S", &["A"])?,
            transmission_channel: self.channel("Y", &["X", "S", "A"])?,
            action_map: self
                .map("f", &["A"])?
                .ok_or_else(|| anyhow!("map `f` is not defined"))?,
            cost,
        };
        if let Some(v) = p.validate().first() {
            bail!("{v}");
        }
        Ok(p)
    }

    fn put_alphabet(&mut self, a: &Alphabet) {
        self.alphabets.insert(a.name().to_string(), a.symbols().to_vec());
    }

    fn put_channel(&mut self, c: &ConditionalPmf) {
        let mut shape: Vec<usize> = c.inputs().iter().map(Alphabet::len).collect();
        shape.push(c.outputs()[0].len());
        for a in c.inputs().iter().chain(c.outputs()) {
            self.put_alphabet(a);
        }
        self.channels.insert(
            c.outputs()[0].name().to_string(),
            ChannelSpec {
                given: c.inputs().iter().map(|a| a.name().to_string()).collect(),
                table: nest(c.table(), &shape),
            },
        );
    }

    fn put_map(&mut self, name: &str, m: &DeterministicMap) {
        let dom = m.domain();
        let shape: Vec<usize> = dom.iter().map(Alphabet::len).collect();
        let mut table = BTreeMap::new();
        for (flat, &image) in m.table().iter().enumerate() {
            let mut rest = flat;
            let mut parts = vec![String::new(); dom.len()];
            for (slot, (alph, &n)) in parts.iter_mut().zip(dom.iter().zip(&shape)).rev() {
                *slot = alph.symbols()[rest % n].clone();
                rest /= n;
            }
            table.insert(parts.join(","), m.codomain().symbols()[image].clone());
        }
        for a in dom.iter().chain(std::iter::once(m.codomain())) {
            self.put_alphabet(a);
        }
        self.maps.insert(
            name.to_string(),
            MapSpec {
                domain: dom.iter().map(|a| a.name().to_string()).collect(),
                codomain: m.codomain().name().to_string(),
                table,
            },
        );
    }

    fn empty(kind: Kind) -> Self {
        Self {
            kind,
            mode: None,
            alphabets: BTreeMap::new(),
            pmfs: BTreeMap::new(),
            channels: BTreeMap::new(),
            maps: BTreeMap::new(),
            distortions: BTreeMap::new(),
            costs: BTreeMap::new(),
            probing: None,
        }
    }

    pub fn from_source(p: &SourceActionProblem) -> Self {
        let mut f = Self::empty(Kind::Source);
        f.mode = Some(p.mode);
        f.put_alphabet(p.x());
        f.put_alphabet(&p.xhat1);
        f.put_alphabet(&p.xhat2);
        f.pmfs
            .insert(p.x().name().to_string(), nest(p.source.probs(), &[p.x().len()]));
        f.put_channel(&p.side_channel);
        f.put_map("f", &p.action_map);
        if let Some(m) = &p.side_map {
            f.put_map("f_Y", m);
        }
        f.distortions
            .insert("d1".into(), nest(p.d1.data(), &[p.d1.rows(), p.d1.cols()]));
        f.distortions
            .insert("d2".into(), nest(p.d2.data(), &[p.d2.rows(), p.d2.cols()]));
        f.costs
            .insert("action".into(), nest(&p.action_cost, &[p.action_cost.len()]));
        f
    }

    pub fn from_channel(p: &ChannelActionProblem) -> Self {
        let mut f = Self::empty(Kind::Channel);
        f.put_channel(&p.state_channel);
        f.put_channel(&p.transmission_channel);
        f.put_map("f", &p.action_map);
        f.costs
            .insert("gamma".into(), nest(p.cost.data(), &[p.cost.rows(), p.cost.cols()]));
        f
    }

    pub fn from_probing(p: &ProbingProblem) -> Self {
        let mut f = Self::empty(Kind::Probing);
        f.probing = Some(*p);
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use infoembed::problems::{probing_example, zs_example};

    #[test]
    fn zs_round_trip() {
        let p = zs_example(0.3).unwrap();
        let file = ProblemFile::from_source(&p);
        let text = file.to_json();
        let back = ProblemFile::parse(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.to_problem().unwrap(), Problem::Source(p));
    }

    #[test]
    fn probing_round_trip() {
        let p = probing_example(0.5, 1.0, 0.25).unwrap();
        let file = ProblemFile::from_probing(&p);
        assert_eq!(
            ProblemFile::parse(&file.to_json()).unwrap().to_problem().unwrap(),
            Problem::Probing(p)
        );
    }

    #[test]
    fn missing_alphabet_is_named() {
        let mut file = ProblemFile::from_source(&zs_example(0.3).unwrap());
        file.alphabets.remove("Y");
        let err = file.to_problem().unwrap_err().to_string();
        assert!(err.contains("alphabet `Y`"), "{err}");
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let mut file = ProblemFile::from_source(&zs_example(0.3).unwrap());
        file.distortions.insert("d1".into(), serde_json::json!([[0, 1]]));
        let err = file.to_problem().unwrap_err().to_string();
        assert!(err.contains("d1"), "{err}");
        assert!(ProblemFile::parse(r#"{"kind": "source", "extra": 1}"#).is_err());
    }
}
