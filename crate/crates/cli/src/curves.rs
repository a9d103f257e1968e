//! Curve tables for the worked examples and for custom sweeps.

use std::io::Write;

use anyhow::{bail, Context, Result};
use infoembed::problems::{probing_example, RegionPoint, Witness};
use infoembed::regions::{binary_example_point, probing_point, BinaryMode};
use infoembed::solvers::SolverConfig;

use crate::{solve_problem, PointArgs, Problem};

/// A CSV table with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Renders `v` with 9 significant digits.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

impl CurveTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| format_sig(v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(
                rec.iter()
                    .map(|c| c.parse::<f64>().with_context(|| format!("cell `{c}`")))
                    .collect::<Result<_>>()?,
            );
        }
        Ok(Self { header, rows })
    }
}

pub const FIG7_DELTAS: [f64; 3] = [0.2, 0.5, 0.8];
pub const FIG8_D2: [f64; 3] = [0.1, 0.2, 0.3];
pub const FIG11_R1: [f64; 3] = [0.0, 0.5, 0.9];

/// `D2 = 0.05, 0.075, ..., 0.5`.
pub fn fig7_d2_grid() -> Vec<f64> {
    (0..19).map(|k| (50 + 25 * k) as f64 / 1000.0).collect()
}

/// `delta = 0, 0.1, ..., 1`.
pub fn fig8_delta_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// `Gamma_X = 0, 0.02, ..., 0.6`.
pub fn fig11_gamma_grid() -> Vec<f64> {
    (0..=30).map(|k| (2 * k) as f64 / 100.0).collect()
}

fn rate_of(p: &RegionPoint, what: &str) -> Result<f64> {
    if p.feasible {
        Ok(p.rate)
    } else {
        bail!("{what} is infeasible")
    }
}

/// Non-causal rate of the binary example against `D2`.
pub fn fig7(config: &SolverConfig) -> Result<CurveTable> {
    let mut t = CurveTable::new(&["delta", "d2", "rate_nc"]);
    for delta in FIG7_DELTAS {
        let mut warm: Vec<Witness> = Vec::new();
        for d2 in fig7_d2_grid() {
            let p = binary_example_point(delta, d2, BinaryMode::NonCausal, config, &warm)?;
            t.rows.push(vec![delta, d2, rate_of(&p, "binary example")?]);
            warm = vec![p.witness];
        }
    }
    Ok(t)
}

/// Non-causal and strictly causal rates of the binary example against
/// `delta`, with `diff = rate_sc - rate_nc`.
pub fn fig8(config: &SolverConfig) -> Result<CurveTable> {
    let mut t = CurveTable::new(&["delta", "d2", "rate_nc", "rate_sc", "diff"]);
    for d2 in FIG8_D2 {
        for delta in fig8_delta_grid() {
            let nc = binary_example_point(delta, d2, BinaryMode::NonCausal, config, &[])?;
            let sc = binary_example_point(
                delta,
                d2,
                BinaryMode::StrictlyCausal,
                config,
                std::slice::from_ref(&nc.witness),
            )?;
            let nc = binary_example_point(
                delta,
                d2,
                BinaryMode::NonCausal,
                config,
                &[sc.witness.clone(), nc.witness],
            )?;
            let (rn, rs) = (rate_of(&nc, "binary example")?, rate_of(&sc, "binary example")?);
            t.rows.push(vec![delta, d2, rn, rs, rs - rn]);
        }
    }
    Ok(t)
}

/// Probing sum rate against `Gamma_X` at `epsilon = 0.5`, `Gamma_A = 1`.
pub fn fig11(config: &SolverConfig) -> Result<CurveTable> {
    let mut t = CurveTable::new(&["gamma_x", "r1", "sum_rate"]);
    for gx in fig11_gamma_grid() {
        let problem = probing_example(0.5, 1.0, gx)?;
        let mut rates = [0.0; 3];
        let mut warm: Vec<Witness> = Vec::new();
        for (k, &r1) in FIG11_R1.iter().enumerate().rev() {
            let p = probing_point(&problem, r1, config, &warm)?;
            rates[k] = rate_of(&p, "probing")?;
            warm = vec![p.witness];
        }
        for (k, &r1) in FIG11_R1.iter().enumerate() {
            t.rows.push(vec![gx, r1, rates[k]]);
        }
    }
    Ok(t)
}

/// A sweep specification: `name=start:stop:step` or `name=v1,v2,...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub var: String,
    pub values: Vec<f64>,
}

impl std::str::FromStr for Sweep {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (var, spec) = s
            .split_once('=')
            .context("sweep must look like `name=start:stop:step` or `name=v1,v2`")?;
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("`{t}` is not a number"))
        };
        let values = if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                bail!("range must be `start:stop:step`");
            }
            let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(h > 0.0) || !(b >= a) {
                bail!("range needs step > 0 and stop >= start");
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            (0..=n).map(|k| a + k as f64 * h).collect()
        } else {
            spec.split(',').map(num).collect::<Result<Vec<_>>>()?
        };
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            bail!("sweep values must be finite");
        }
        Ok(Self {
            var: var.trim().to_string(),
            values,
        })
    }
}

/// Solves `problem` at each sweep value in order, warm-starting from the
/// last feasible witness. Infeasible values are reported on standard error
/// and left out of the table.
pub fn custom(problem: &Problem, base: &PointArgs, sweep: &Sweep, config: &SolverConfig) -> Result<CurveTable> {
    let mut t = CurveTable::new(&["param", "value"]);
    let mut warm: Vec<Witness> = Vec::new();
    for &v in &sweep.values {
        let mut args = *base;
        args.set(&sweep.var, v)?;
        let p = solve_problem(problem, &args, config, &warm)?;
        if p.feasible {
            t.rows.push(vec![v, p.rate]);
            warm = vec![p.witness];
        } else {
            eprintln!("warning: {} = {} is infeasible; row skipped", sweep.var, format_sig(v));
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig(0.5), "0.5");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig(123.456789012), "123.456789");
        assert_eq!(format_sig(-0.0), "0");
        assert_eq!(format_sig(-1e-12), "-1.00000000e-12");
        assert_eq!(format_sig(0.05), "0.05");
    }

    #[test]
    fn grids() {
        let g = fig7_d2_grid();
        assert_eq!(g.len(), 19);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[18], 0.5);
        assert_eq!(fig11_gamma_grid()[30], 0.6);
    }

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "d2=0.1:0.3:0.1".parse().unwrap();
        assert_eq!(s.var, "d2");
        assert_eq!(s.values.len(), 3);
        let s: Sweep = "r1=0,0.5".parse().unwrap();
        assert_eq!(s.values, vec![0.0, 0.5]);
        assert!("d2".parse::<Sweep>().is_err());
        assert!("d2=1:0:0.1".parse::<Sweep>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut t = CurveTable::new(&["a", "b"]);
        t.rows.push(vec![0.25, 1.0 / 3.0]);
        let back = CurveTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.header, t.header);
        assert!((back.rows[0][1] - 1.0 / 3.0).abs() < 1e-9);
    }
}
