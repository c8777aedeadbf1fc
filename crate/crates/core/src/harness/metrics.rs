use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamVector;

/// Column order of the per-seed metrics CSV.
pub const METRICS_COLUMNS: [&str; 12] = [
    "seed",
    "epoch",
    "agent",
    "task",
    "algorithm",
    "role",
    "topology",
    "drop_probability",
    "mean_return",
    "disagreement",
    "episodes",
    "steps",
];

/// One evaluation of one agent at the end of an epoch. `episodes` and
/// `steps` are the run's cumulative training consumption across all agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub epoch: usize,
    pub agent: usize,
    pub task: usize,
    pub algorithm: String,
    pub role: String,
    pub topology: String,
    pub drop_probability: f64,
    pub mean_return: f64,
    pub disagreement: f64,
    pub episodes: u64,
    pub steps: u64,
}

/// Wall-clock per epoch, kept apart from the deterministic metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub seed: u64,
    pub epoch: usize,
    pub wall_clock_s: f64,
}

pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl CsvSink<File> {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self::from_writer(File::create(path)?))
    }
}

impl<W: Write> CsvSink<W> {
    pub fn from_writer(w: W) -> Self {
        Self {
            writer: csv::WriterBuilder::new().has_headers(false).from_writer(w),
        }
    }

    /// Writes the header row even before the first record.
    pub fn write_header(&mut self, columns: &[&str]) -> Result<()> {
        self.writer.write_record(columns)?;
        Ok(())
    }

    pub fn append<R: Serialize>(&mut self, rec: &R) -> Result<()> {
        self.writer.serialize(rec)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Median and quartiles across seeds at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub epoch: usize,
    pub n_seeds: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Per epoch, averages each seed's agents and summarises across seeds.
pub fn aggregate(records: &[MetricsRecord]) -> Vec<AggregateRecord> {
    use std::collections::BTreeMap;
    let mut per: BTreeMap<usize, BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for r in records {
        let e = per
            .entry(r.epoch)
            .or_default()
            .entry(r.seed)
            .or_insert((0.0, 0));
        e.0 += r.mean_return;
        e.1 += 1;
    }
    per.into_iter()
        .map(|(epoch, seeds)| {
            let mut v: Vec<f64> = seeds.values().map(|(s, n)| s / *n as f64).collect();
            v.sort_by(f64::total_cmp);
            AggregateRecord {
                epoch,
                n_seeds: v.len(),
                median: quantile(&v, 0.5),
                q1: quantile(&v, 0.25),
                q3: quantile(&v, 0.75),
                mean: v.iter().sum::<f64>() / v.len() as f64,
                min: v[0],
                max: v[v.len() - 1],
            }
        })
        .collect()
}

pub fn write_jsonl<R: Serialize>(path: &Path, records: &[R]) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Relative parameter spread across agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    /// Mean over included coordinates of population std / |mean|, in percent.
    pub percent: f64,
    pub included: usize,
    /// Coordinates with `|mean| < threshold`.
    pub excluded: usize,
}

pub const DEVIATION_THRESHOLD: f64 = 1e-8;

pub fn parameter_deviation(params: &[ParamVector<f64>]) -> Result<Deviation> {
    if params.len() < 2 {
        return Err(Error::InvalidArgument(
            "parameter deviation needs at least two agents".into(),
        ));
    }
    for p in params {
        params[0].check_layout(p)?;
    }
    let n = params.len() as f64;
    let (mut sum, mut included, mut excluded) = (0.0, 0, 0);
    for i in 0..params[0].len() {
        let mean = params.iter().map(|p| p.values()[i]).sum::<f64>() / n;
        if mean.abs() < DEVIATION_THRESHOLD {
            excluded += 1;
            continue;
        }
        let var = params
            .iter()
            .map(|p| (p.values()[i] - mean).powi(2))
            .sum::<f64>()
            / n;
        sum += var.sqrt() / mean.abs();
        included += 1;
    }
    let percent = if included == 0 {
        0.0
    } else {
        100.0 * sum / included as f64
    };
    Ok(Deviation {
        percent,
        included,
        excluded,
    })
}

/// Mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
    pub n: usize,
}

pub fn confidence_interval(samples: &[f64]) -> Interval {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let half = if n > 1 {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        1.96 * (var / n as f64).sqrt()
    } else {
        0.0
    };
    Interval {
        mean,
        low: mean - half,
        high: mean + half,
        n,
    }
}
