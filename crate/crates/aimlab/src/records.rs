//! Line-delimited and single-record output files.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use aimlab_core::{EpochMetrics, OracleReport, TransitionRecord};
use anyhow::Context;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A float that survives JSON: finite values are numbers, the rest are the
/// strings `"inf"`, `"-inf"`, and `"nan"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            x if x.is_finite() => s.serialize_f64(x),
            x if x.is_nan() => s.serialize_str("nan"),
            x if x > 0.0 => s.serialize_str("inf"),
            _ => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                match v {
                    "inf" => Ok(Num(f64::INFINITY)),
                    "-inf" => Ok(Num(f64::NEG_INFINITY)),
                    "nan" => Ok(Num(f64::NAN)),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

fn nums(xs: &[f64]) -> Vec<Num> {
    xs.iter().copied().map(Num).collect()
}

/// One line of `metrics.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub epoch: usize,
    pub iterations: usize,
    pub env_steps: usize,
    pub success_rate: f64,
    pub mean_episode_length: f64,
    pub dual_w1: Option<Num>,
    pub oracle_w1: Option<Num>,
    pub lipschitz_max: Option<Num>,
    pub lipschitz_fraction: Option<Num>,
}

impl MetricsRecord {
    pub fn new(seed: u64, m: &EpochMetrics) -> Self {
        MetricsRecord {
            seed,
            epoch: m.epoch,
            iterations: m.iterations,
            env_steps: m.env_steps,
            success_rate: m.success_rate,
            mean_episode_length: m.mean_episode_length,
            dual_w1: m.dual_w1.map(Num),
            oracle_w1: m.oracle_w1.map(Num),
            lipschitz_max: m.lipschitz_max.map(Num),
            lipschitz_fraction: m.lipschitz_fraction.map(Num),
        }
    }
}

/// One line of `aggregate.jsonl`: the seeds' evaluations after one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub epoch: usize,
    pub iterations: usize,
    pub median_success: f64,
    /// In the order of `seeds`.
    pub success: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// `summary.json`, written once per run command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub env: String,
    pub baseline: String,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub iterations: usize,
    pub final_median_success: f64,
    pub final_success: Vec<f64>,
}

/// `oracle_report.json`. State vectors are indexed like the model, with the
/// absorbing state last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub env: String,
    /// `"optimal"` or the policy file that was read.
    pub policy: String,
    pub goal: usize,
    pub goal_cell: (usize, usize),
    pub start: usize,
    pub start_distance: Num,
    pub w1_primal: Num,
    pub w1_analytic: Num,
    pub d_t: Vec<Num>,
    pub optimal_distance: Vec<Num>,
    pub value: Vec<Num>,
    pub occupancy: Vec<Num>,
    pub jensen_gap: Vec<Num>,
}

impl OracleRecord {
    pub fn new(
        env: String,
        policy: String,
        goal_cell: (usize, usize),
        start: usize,
        report: &OracleReport,
        optimal_distance: &[f64],
    ) -> Self {
        OracleRecord {
            env,
            policy,
            goal: report.goal,
            goal_cell,
            start,
            start_distance: Num(report.d_t[start]),
            w1_primal: Num(report.w1_primal),
            w1_analytic: Num(report.w1_analytic),
            d_t: nums(&report.d_t),
            optimal_distance: nums(optimal_distance),
            value: nums(&report.value),
            occupancy: nums(&report.occupancy),
            jensen_gap: nums(&report.jensen_gap),
        }
    }
}

/// Write `records` one JSON object per line.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    records: impl IntoIterator<Item = T>,
) -> anyhow::Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, &r)?;
        out.push(b'\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let file = fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{} line {}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, record: &T) -> anyhow::Result<()> {
    let mut out = serde_json::to_vec_pretty(record)?;
    out.push(b'\n');
    let mut f =
        fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    f.write_all(&out)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("in {}", path.display()))
}

/// Buffer dump: one transition per line.
pub fn write_buffer_dump<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a TransitionRecord>,
) -> anyhow::Result<()> {
    write_jsonl(path, records)
}

pub fn read_buffer_dump(path: &Path) -> anyhow::Result<Vec<TransitionRecord>> {
    read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_numbers_round_trip() {
        let xs = vec![
            Num(1.5),
            Num(f64::INFINITY),
            Num(f64::NEG_INFINITY),
            Num(3.0),
        ];
        let text = serde_json::to_string(&xs).unwrap();
        assert_eq!(text, r#"[1.5,"inf","-inf",3.0]"#);
        let back: Vec<Num> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, xs);
        let nan: Num = serde_json::from_str(r#""nan""#).unwrap();
        assert!(nan.0.is_nan());
        assert!(serde_json::from_str::<Num>(r#""lots""#).is_err());
    }
}
