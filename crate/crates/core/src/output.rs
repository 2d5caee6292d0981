//! CSV tables, JSON sidecars and the comparison report.
//!
//! Floats are written in Rust's shortest round-trip form, so the same values
//! always give the same bytes and a table read back compares exactly.

use crate::sampler::{DensityEstimate, OverlapSample};
use crate::{Error, Result};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// `start:stop:step`, inclusive of `stop` when it lies on the grid.
/// Points are rounded to the decimals used in the specification so that
/// `0.1 * 3` prints as `0.3`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let bad = || Error::Config(format!("grid '{s}' is not start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(Error::Config(format!("grid '{s}' has more than a million points")));
    }
    let decimals = parts.iter().map(|p| decimals(p)).max().unwrap_or(0).min(15);
    let scale = 10f64.powi(decimals as i32);
    Ok((0..count).map(|k| ((start + k as f64 * step) * scale).round() / scale).collect())
}

fn decimals(p: &str) -> usize {
    if p.contains(['e', 'E']) {
        return 15;
    }
    p.split_once('.').map_or(0, |(_, frac)| frac.len())
}

/// `re,im` or a bare real number.
pub fn parse_complex(s: &str) -> Result<C> {
    let bad = || Error::Config(format!("'{s}' is not a complex number re,im"));
    let mut it = s.split(',').map(str::trim);
    let re = it.next().ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?;
    let im = match it.next() {
        Some(v) => v.parse::<f64>().map_err(|_| bad())?,
        None => 0.0,
    };
    if it.next().is_some() || !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(C::new(re, im))
}

/// `out.csv -> out.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn writer(out: Box<dyn Write>) -> csv::Writer<Box<dyn Write>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn f(x: f64) -> String {
    format!("{x}")
}

pub fn write_estimates(path: Option<&Path>, est: &[DensityEstimate]) -> Result<()> {
    let mut w = writer(open(path)?);
    w.write_record(["re_zhat", "im_zhat", "value", "stderr", "count"])?;
    for e in est {
        w.write_record([f(e.zhat.re), f(e.zhat.im), f(e.value), f(e.stderr), e.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of an exact-density table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactRow {
    pub zhat: C,
    pub value: f64,
    pub nodes: usize,
    pub delta: Option<f64>,
}

pub fn write_exact(path: Option<&Path>, rows: &[ExactRow]) -> Result<()> {
    let mut w = writer(open(path)?);
    w.write_record(["re_zhat", "im_zhat", "value", "stderr", "count", "method", "delta"])?;
    for r in rows {
        let delta = r.delta.map(f).unwrap_or_default();
        w.write_record([f(r.zhat.re), f(r.zhat.im), f(r.value), "0".into(), r.nodes.to_string(), "exact".into(), delta])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve(path: Option<&Path>, points: &[(C, f64)]) -> Result<()> {
    let mut w = writer(open(path)?);
    w.write_record(["re_zhat", "im_zhat", "value"])?;
    for (z, v) in points {
        w.write_record([f(z.re), f(z.im), f(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dump(path: &Path, samples: &[OverlapSample]) -> Result<()> {
    let mut w = writer(open(Some(path))?);
    w.write_record(["trial", "re_z", "im_z", "overlap"])?;
    for s in samples {
        w.write_record([s.trial.to_string(), f(s.z.re), f(s.z.im), f(s.o)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sidecar(csv: &Path, meta: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    std::fs::write(sidecar_path(csv), text)?;
    Ok(())
}

/// A row read back from any of the tables above.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableRow {
    pub zhat: C,
    pub value: f64,
    pub stderr: Option<f64>,
}

pub fn read_table(path: &Path) -> Result<Vec<TableRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| Error::Config(format!("{}: no '{name}' column", path.display()));
    let re = col("re_zhat").ok_or_else(|| missing("re_zhat"))?;
    let im = col("im_zhat").ok_or_else(|| missing("im_zhat"))?;
    let val = col("value").ok_or_else(|| missing("value"))?;
    let se = col("stderr");
    let num = |rec: &csv::StringRecord, i: usize| -> Result<f64> {
        rec.get(i)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("{}: bad number in row {:?}", path.display(), rec)))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(TableRow {
            zhat: C::new(num(&rec, re)?, num(&rec, im)?),
            value: num(&rec, val)?,
            stderr: se.map(|i| num(&rec, i)).transpose()?,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub re_zhat: f64,
    pub im_zhat: f64,
    pub mc_value: f64,
    pub mc_stderr: f64,
    pub theory_value: f64,
    pub exact_value: Option<f64>,
    /// `(mc - theory) / stderr`, absent when the stderr is zero.
    pub z_score: Option<f64>,
    /// `|mc - theory| / |theory|`.
    pub rel_dev: f64,
    pub mc_vs_exact_z: Option<f64>,
    pub exact_vs_theory_rel: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub points: usize,
    pub max_abs_z_score: Option<f64>,
    pub mean_rel_dev: f64,
    pub max_abs_mc_vs_exact_z: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub resampled_degenerate: Option<u64>,
    pub resampled_ill_conditioned: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub summary: ComparisonSummary,
}

fn same_grid(a: &[TableRow], b: &[TableRow], what: &str) -> Result<()> {
    let only_a: Vec<C> = a.iter().map(|r| r.zhat).filter(|z| !b.iter().any(|s| s.zhat == *z)).collect();
    let only_b: Vec<C> = b.iter().map(|r| r.zhat).filter(|z| !a.iter().any(|s| s.zhat == *z)).collect();
    if a.is_empty() || b.is_empty() || !only_a.is_empty() || !only_b.is_empty() {
        let list = |v: &[C]| v.iter().map(|z| format!("({},{})", z.re, z.im)).collect::<Vec<_>>().join(" ");
        return Err(Error::Config(format!(
            "{what} grids differ: only in first [{}], only in second [{}]",
            list(&only_a),
            list(&only_b)
        )));
    }
    Ok(())
}

/// Joins the tables point by point. The verdict passes when every available
/// `|z_score|` (MC against theory, and MC against exact) is within `threshold`.
pub fn compare(
    mc: &[TableRow],
    theory: &[TableRow],
    exact: Option<&[TableRow]>,
    threshold: f64,
    resamples: Option<(u64, u64)>,
) -> Result<ComparisonReport> {
    same_grid(mc, theory, "mc/theory")?;
    if let Some(ex) = exact {
        same_grid(mc, ex, "mc/exact")?;
    }
    let mut rows = Vec::with_capacity(mc.len());
    for m in mc {
        let th = theory.iter().find(|r| r.zhat == m.zhat).expect("grids checked").value;
        let se = m.stderr.unwrap_or(0.0);
        let ex = exact.map(|e| e.iter().find(|r| r.zhat == m.zhat).expect("grids checked").value);
        let z = |other: f64| if se > 0.0 { Some((m.value - other) / se) } else { None };
        rows.push(ComparisonRow {
            re_zhat: m.zhat.re,
            im_zhat: m.zhat.im,
            mc_value: m.value,
            mc_stderr: se,
            theory_value: th,
            exact_value: ex,
            z_score: z(th),
            rel_dev: (m.value - th).abs() / th.abs(),
            mc_vs_exact_z: ex.and_then(z),
            exact_vs_theory_rel: ex.map(|e| (e - th).abs() / th.abs()),
        });
    }
    let max_abs = |it: &mut dyn Iterator<Item = Option<f64>>| it.flatten().map(f64::abs).reduce(f64::max);
    let max_z = max_abs(&mut rows.iter().map(|r| r.z_score));
    let max_ez = max_abs(&mut rows.iter().map(|r| r.mc_vs_exact_z));
    let pass = max_z.is_none_or(|z| z <= threshold) && max_ez.is_none_or(|z| z <= threshold);
    let summary = ComparisonSummary {
        points: rows.len(),
        max_abs_z_score: max_z,
        mean_rel_dev: rows.iter().map(|r| r.rel_dev).sum::<f64>() / rows.len() as f64,
        max_abs_mc_vs_exact_z: max_ez,
        threshold,
        pass,
        resampled_degenerate: resamples.map(|r| r.0),
        resampled_ill_conditioned: resamples.map(|r| r.1),
    };
    Ok(ComparisonReport { rows, summary })
}
