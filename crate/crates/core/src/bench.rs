//! Batch evaluation: synthetic sweeps, decision-rate curves and external
//! benchmark directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::{verdict, Analysis, CausalVerdict, Direction, Indicator, InferenceOptions};
use crate::data::{dataset_from_table, Dataset, Delimiter, LoadOptions, RawTable};
use crate::error::{CrackError, Result};
use crate::synth::{generate_pair, SyntheticSpec, TypeMode};

/// Default confidence above which a verdict counts as a reported decision.
pub const REPORTING_THRESHOLD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub id: String,
    pub truth: Direction,
    pub verdict: CausalVerdict,
    pub weight: f64,
    pub runtime_ms: f64,
}

impl PairResult {
    pub fn decided(&self) -> bool {
        self.verdict.direction.is_decided()
    }

    pub fn correct(&self) -> bool {
        self.verdict.direction == self.truth
    }
}

/// How undecided verdicts enter a decision-rate curve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UndecidedPolicy {
    /// Score as half correct at their rank.
    #[default]
    Half,
    Exclude,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Cumulative weight share of the pairs ranked so far.
    pub rate: f64,
    pub accuracy: f64,
}

/// Weighted accuracy over the most confident verdicts as the share of
/// considered pairs grows. Ties in confidence keep the input order.
pub fn decision_rate(results: &[PairResult], policy: UndecidedPolicy) -> Result<Vec<CurvePoint>> {
    let mut ranked: Vec<&PairResult> = results
        .iter()
        .filter(|r| policy == UndecidedPolicy::Half || r.decided())
        .collect();
    if ranked.is_empty() {
        return Err(CrackError::Config(
            "decision rate needs at least one result".into(),
        ));
    }
    if let Some(bad) = ranked
        .iter()
        .find(|r| !(r.weight > 0.0 && r.weight.is_finite()))
    {
        return Err(CrackError::Config(format!(
            "pair {} has non-positive weight {}",
            bad.id, bad.weight
        )));
    }
    ranked.sort_by(|a, b| b.verdict.confidence.total_cmp(&a.verdict.confidence));
    let total: f64 = ranked.iter().map(|r| r.weight).sum();
    let mut weight = 0.0;
    let mut score = 0.0;
    Ok(ranked
        .iter()
        .map(|r| {
            weight += r.weight;
            score += r.weight
                * if !r.decided() {
                    0.5
                } else if r.correct() {
                    1.0
                } else {
                    0.0
                };
            CurvePoint {
                rate: weight / total,
                accuracy: score / weight,
            }
        })
        .collect())
}

/// Accuracy of the most confident prefix covering at least `share` of the
/// total weight.
pub fn accuracy_at(curve: &[CurvePoint], share: f64) -> Option<f64> {
    curve
        .iter()
        .find(|p| p.rate >= share - 1e-12)
        .map(|p| p.accuracy)
}

/// Two-sided 95% band of a fair coin's accuracy over `decided` trials.
pub fn coin_band(decided: usize) -> (f64, f64) {
    if decided == 0 {
        return (0.0, 1.0);
    }
    let half = 1.959964 * (0.25 / decided as f64).sqrt();
    ((0.5 - half).max(0.0), (0.5 + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Phi(Vec<f64>),
    /// Number of Y attributes.
    L(Vec<usize>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Phi(_) => "phi",
            SweepAxis::L(_) => "l",
        }
    }

    fn specs(&self, base: &SyntheticSpec) -> Vec<(f64, SyntheticSpec)> {
        match self {
            SweepAxis::Phi(values) => values
                .iter()
                .map(|&phi| {
                    (
                        phi,
                        SyntheticSpec {
                            phi,
                            ..base.clone()
                        },
                    )
                })
                .collect(),
            SweepAxis::L(values) => values
                .iter()
                .map(|&l| (l as f64, SyntheticSpec { l, ..base.clone() }))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub base: SyntheticSpec,
    pub axis: SweepAxis,
    pub pairs: usize,
    pub indicators: Vec<Indicator>,
    pub inference: InferenceOptions,
    pub reporting_threshold: f64,
}

impl SweepGrid {
    /// Desk-scale grid: 50 pairs per cell of 1000 rows.
    pub fn desk(type_mode: TypeMode, axis: SweepAxis, seed: u64) -> Self {
        SweepGrid {
            base: SyntheticSpec {
                n: 1000,
                type_mode,
                seed,
                ..SyntheticSpec::default()
            },
            axis,
            pairs: 50,
            indicators: vec![Indicator::Delta, Indicator::Nci],
            inference: InferenceOptions::default(),
            reporting_threshold: REPORTING_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = match &self.axis {
            SweepAxis::Phi(v) => v.is_empty(),
            SweepAxis::L(v) => v.is_empty(),
        };
        if empty || self.pairs == 0 || self.indicators.is_empty() {
            return Err(CrackError::Config("sweep grid is empty".into()));
        }
        for (_, spec) in self.axis.specs(&self.base) {
            spec.validate()?;
        }
        self.inference.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub axis: String,
    pub value: f64,
    pub type_mode: TypeMode,
    pub indicator: Indicator,
    pub pairs: usize,
    pub decided: usize,
    pub correct: usize,
    /// `None` when nothing was decided.
    pub accuracy: Option<f64>,
    pub decided_fraction: f64,
    /// Share of all pairs decided with confidence above the reporting
    /// threshold.
    pub confident_fraction: f64,
    pub coin_low: f64,
    pub coin_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub results: Vec<(usize, PairResult)>,
}

/// One verdict per requested indicator for a single dataset.
pub fn evaluate(
    data: &Dataset,
    opts: &InferenceOptions,
    indicators: &[Indicator],
) -> Result<(Vec<CausalVerdict>, f64)> {
    let start = Instant::now();
    let analysis = Analysis::run(data, opts)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let verdicts = indicators
        .iter()
        .map(|&indicator| {
            let o = InferenceOptions {
                indicator,
                ..opts.clone()
            };
            verdict(&analysis, data, &o, ms)
        })
        .collect();
    Ok((verdicts, ms))
}

fn summarize(
    axis: &str,
    value: f64,
    type_mode: TypeMode,
    indicator: Indicator,
    results: &[&PairResult],
    threshold: f64,
) -> SweepCell {
    let pairs = results.len();
    let decided = results.iter().filter(|r| r.decided()).count();
    let correct = results.iter().filter(|r| r.correct()).count();
    let confident = results
        .iter()
        .filter(|r| r.decided() && r.verdict.confidence > threshold)
        .count();
    let (coin_low, coin_high) = coin_band(decided);
    SweepCell {
        axis: axis.to_string(),
        value,
        type_mode,
        indicator,
        pairs,
        decided,
        correct,
        accuracy: (decided > 0).then(|| correct as f64 / decided as f64),
        decided_fraction: decided as f64 / pairs as f64,
        confident_fraction: confident as f64 / pairs as f64,
        coin_low,
        coin_high,
    }
}

/// Runs every cell of the grid. Pairs are evaluated in parallel; the report
/// is ordered by cell, indicator and pair index.
pub fn run_sweep(grid: &SweepGrid) -> Result<SweepReport> {
    grid.validate()?;
    let mut opts = grid.inference.clone();
    opts.search.threads = Some(1);
    let mut cells = Vec::new();
    let mut all = Vec::new();
    for (cell, (value, spec)) in grid.axis.specs(&grid.base).into_iter().enumerate() {
        let evaluated: Vec<Vec<PairResult>> = (0..grid.pairs)
            .into_par_iter()
            .map(|index| {
                let pair = generate_pair(&spec, index)?;
                let (verdicts, ms) = evaluate(&pair.dataset, &opts, &grid.indicators)?;
                Ok(verdicts
                    .into_iter()
                    .map(|v| PairResult {
                        id: format!("{}={}#{}", grid.axis.name(), value, index),
                        truth: pair.truth.direction,
                        verdict: v,
                        weight: 1.0,
                        runtime_ms: ms,
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (k, &indicator) in grid.indicators.iter().enumerate() {
            let column: Vec<&PairResult> = evaluated.iter().map(|v| &v[k]).collect();
            cells.push(summarize(
                grid.axis.name(),
                value,
                spec.type_mode,
                indicator,
                &column,
                grid.reporting_threshold,
            ));
            all.extend(column.into_iter().map(|r| (cell, r.clone())));
        }
        log::info!("sweep cell {}={} done", grid.axis.name(), value);
    }
    Ok(SweepReport {
        cells,
        results: all,
    })
}

/// Parses `start:stop:step` (inclusive) or a comma separated list.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || CrackError::Config(format!("invalid range `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let start: f64 = start.trim().parse().map_err(|_| bad())?;
            let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
            let step: f64 = step.trim().parse().map_err(|_| bad())?;
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(bad());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        [list] => list
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect(),
        _ => Err(bad()),
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkPair {
    pub id: String,
    pub dataset: Dataset,
    pub truth: Direction,
    pub weight: f64,
}

#[derive(Clone, Debug, Default)]
pub struct BenchmarkLoad {
    pub pairs: Vec<BenchmarkPair>,
    /// Pair id and reason for every metadata row that could not be used.
    pub skipped: Vec<(String, String)>,
}

/// Metadata file names tried in order.
pub const METADATA_FILES: [&str; 2] = ["pairmeta.txt", "meta.txt"];

/// Loads a cause-effect benchmark directory.
///
/// The metadata file holds one whitespace separated row per pair:
/// `id cause_first cause_last effect_first effect_last [weight]`, with
/// 1-based inclusive column ranges. Further columns are ignored and the
/// weight defaults to 1. Pair `id` is read from `pair{id:04}.txt`, a
/// whitespace separated table without header. X holds the cause columns.
pub fn load_benchmark_pairs(dir: &Path) -> Result<BenchmarkLoad> {
    let meta_path = METADATA_FILES
        .iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
        .ok_or_else(|| {
            CrackError::Config(format!("no metadata file found in {}", dir.display()))
        })?;
    let text = fs::read_to_string(&meta_path).map_err(|e| CrackError::io(&meta_path, e))?;
    let mut load = BenchmarkLoad::default();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let id = fields[0].to_string();
        match load_one(dir, &fields) {
            Ok(pair) => load.pairs.push(pair),
            Err(reason) => {
                log::warn!(
                    "skipping pair {id} (metadata line {}): {reason}",
                    line_no + 1
                );
                load.skipped.push((id, reason));
            }
        }
    }
    Ok(load)
}

fn load_one(dir: &Path, fields: &[&str]) -> std::result::Result<BenchmarkPair, String> {
    if fields.len() < 5 {
        return Err(format!(
            "expected at least 5 fields, found {}",
            fields.len()
        ));
    }
    let number: u32 = fields[0]
        .parse()
        .map_err(|_| format!("pair id `{}` is not a number", fields[0]))?;
    let col = |i: usize| -> std::result::Result<usize, String> {
        match fields[i].parse::<f64>() {
            Ok(v) if v >= 1.0 && v.fract() == 0.0 => Ok(v as usize - 1),
            _ => Err(format!("invalid column `{}`", fields[i])),
        }
    };
    let (c0, c1, e0, e1) = (col(1)?, col(2)?, col(3)?, col(4)?);
    if c1 < c0 || e1 < e0 {
        return Err("empty column range".into());
    }
    let weight = match fields.get(5) {
        Some(w) => w
            .parse::<f64>()
            .map_err(|_| format!("invalid weight `{w}`"))?,
        None => 1.0,
    };
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(format!("weight must be positive, got {weight}"));
    }
    let path = dir.join(format!("pair{number:04}.txt"));
    if !path.is_file() {
        return Err(format!("missing file {}", path.display()));
    }
    let table =
        RawTable::from_path(&path, Delimiter::Whitespace, false).map_err(|e| e.to_string())?;
    let opts = LoadOptions {
        delimiter: Delimiter::Whitespace,
        has_header: false,
        ..LoadOptions::new((c0..=c1).collect(), (e0..=e1).collect())
    };
    let dataset = dataset_from_table(&table, &opts).map_err(|e| e.to_string())?;
    Ok(BenchmarkPair {
        id: fields[0].to_string(),
        dataset,
        truth: Direction::XtoY,
        weight,
    })
}

/// Runs inference on every benchmark pair, in parallel, keeping input order.
pub fn run_benchmark(pairs: &[BenchmarkPair], opts: &InferenceOptions) -> Result<Vec<PairResult>> {
    let mut opts = opts.clone();
    opts.search.threads = Some(1);
    pairs
        .par_iter()
        .map(|p| {
            let (mut verdicts, ms) = evaluate(&p.dataset, &opts, &[opts.indicator])?;
            Ok(PairResult {
                id: p.id.clone(),
                truth: p.truth,
                verdict: verdicts.remove(0),
                weight: p.weight,
                runtime_ms: ms,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub pairs: usize,
    pub skipped: Vec<(String, String)>,
    pub indicator: Indicator,
    pub weighted_accuracy: f64,
    pub decided_fraction: f64,
    pub undecided_policy: UndecidedPolicy,
    pub curve_path: PathBuf,
}

/// Weighted accuracy over all pairs under `policy`.
pub fn weighted_accuracy(results: &[PairResult], policy: UndecidedPolicy) -> Result<f64> {
    Ok(decision_rate(results, policy)?
        .last()
        .map(|p| p.accuracy)
        .unwrap_or(0.0))
}

pub fn write_results_csv(path: &Path, results: &[PairResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "id",
        "truth",
        "indicator",
        "direction",
        "correct",
        "score_xy",
        "score_yx",
        "confidence",
        "weight",
        "runtime_ms",
    ])?;
    for r in results {
        w.write_record([
            r.id.clone(),
            r.truth.to_string(),
            r.verdict.indicator.to_string(),
            r.verdict.direction.to_string(),
            r.correct().to_string(),
            r.verdict.score_xy.to_string(),
            r.verdict.score_yx.to_string(),
            r.verdict.confidence.to_string(),
            r.weight.to_string(),
            format!("{:.3}", r.runtime_ms),
        ])?;
    }
    w.flush().map_err(|e| CrackError::io(path, e))
}

pub fn write_sweep_csv(path: &Path, cells: &[SweepCell]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "axis",
        "value",
        "type",
        "indicator",
        "pairs",
        "decided",
        "correct",
        "accuracy",
        "decided_fraction",
        "confident_fraction",
        "coin_low",
        "coin_high",
    ])?;
    for c in cells {
        w.write_record([
            c.axis.clone(),
            c.value.to_string(),
            c.type_mode.to_string(),
            c.indicator.to_string(),
            c.pairs.to_string(),
            c.decided.to_string(),
            c.correct.to_string(),
            c.accuracy
                .map_or_else(|| "n/a".to_string(), |a| a.to_string()),
            c.decided_fraction.to_string(),
            c.confident_fraction.to_string(),
            c.coin_low.to_string(),
            c.coin_high.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CrackError::io(path, e))
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rate", "accuracy"])?;
    for p in curve {
        w.write_record([p.rate.to_string(), p.accuracy.to_string()])?;
    }
    w.flush().map_err(|e| CrackError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| CrackError::io(path, e))
}
