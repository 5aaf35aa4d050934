//! Experiment orchestration: repeated trials over a shared instance, per-trial
//! efficiency ratios, confidence intervals, the taxi replay and result files.
//!
//! Every trial draws from its own [`RngStream`] derived from the experiment
//! seed, so results do not depend on how trials are scheduled across threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{NaiveDateTime, TimeDelta};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{theorem_bound, BoundInputs};
use crate::error::{Error, Result};
use crate::generators::{build_nyc_instance, Family, TripData};
use crate::instance::{realize, RngStream, StochasticInstance};
use crate::strategies::{run_strategy, Strategy, StrategyConfig, WeightSource};
use crate::weights::{heavy_light, monte_carlo_weights, solve_expected_lp, FractionalSolution};

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_MC: usize = 100;
pub const NYC_STEP_MINUTES: i64 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceSource {
    Family { family: Family, n: usize },
    File(PathBuf),
}

impl InstanceSource {
    pub fn load(&self) -> Result<StochasticInstance> {
        match self {
            InstanceSource::Family { family, n } => family.generate(*n),
            InstanceSource::File(path) => StochasticInstance::load(path),
        }
    }

    pub fn label(&self) -> String {
        match self {
            InstanceSource::Family { family, n } => format!("{family}-{n}"),
            InstanceSource::File(path) => path.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub source: InstanceSource,
    pub strategies: Vec<StrategyConfig>,
    pub trials: usize,
    pub mc: usize,
    pub seed: u64,
    pub weights: WeightSource,
}

impl ExperimentConfig {
    pub fn new(source: InstanceSource, strategies: Vec<StrategyConfig>) -> Self {
        Self {
            source,
            strategies,
            trials: DEFAULT_TRIALS,
            mc: DEFAULT_MC,
            seed: 0,
            weights: WeightSource::MonteCarlo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.mc == 0 {
            return Err(Error::Config("mc must be >= 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies requested".into()));
        }
        Ok(())
    }
}

/// Learns the fractional solution shared by all trials of an experiment.
pub fn learn_weights(
    instance: &StochasticInstance,
    source: &WeightSource,
    mc: usize,
    seed: u64,
) -> Result<FractionalSolution> {
    let x = match source {
        WeightSource::Lp => solve_expected_lp(instance)?,
        WeightSource::MonteCarlo => monte_carlo_weights(
            instance,
            mc,
            &RngStream::new(seed, 0).derive_label("weights"),
        )?,
        WeightSource::File(path) => FractionalSolution::load(instance, path)?,
    };
    x.check_feasible(instance)?;
    Ok(x)
}

/// Matched counts of one trial: the offline optimum and each strategy in
/// configuration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub arrivals: usize,
    pub offline: usize,
    pub matched: Vec<usize>,
}

fn trial_stream(seed: u64, trial: usize) -> RngStream {
    RngStream::new(seed, 0)
        .derive_label("trial")
        .derive(trial as u64)
}

/// Runs `trials` independent realizations; every strategy sees the same
/// realization within a trial.
pub fn simulate(
    instance: &StochasticInstance,
    strategies: &[StrategyConfig],
    x: Option<&FractionalSolution>,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialOutcome>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let stream = trial_stream(seed, t);
            let graph = realize(instance, &stream.derive_label("realize"));
            let offline = run_strategy(&graph, &StrategyConfig::offline(), None, &stream)?.matched;
            let matched = strategies
                .iter()
                .map(|c| Ok(run_strategy(&graph, c, x, &stream.derive_label(&c.label()))?.matched))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrialOutcome {
                arrivals: graph.len(),
                offline,
                matched,
            })
        })
        .collect()
}

/// Sample mean and the 95% half-width `1.96·s/√T` (0 for a single sample).
pub fn ci95(samples: &[f64]) -> (f64, f64) {
    let (mean, sd) = mean_sd(samples);
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    (mean, 1.96 * sd / (samples.len() as f64).sqrt())
}

/// Mean and standard error of the mean.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let (mean, sd) = mean_sd(samples);
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    (mean, sd / (samples.len() as f64).sqrt())
}

fn mean_sd(samples: &[f64]) -> (f64, f64) {
    assert!(!samples.is_empty(), "at least one sample");
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySummary {
    pub strategy: Strategy,
    pub k: Option<usize>,
    pub mean: f64,
    pub ci95: f64,
    pub trials: usize,
}

impl EfficiencySummary {
    pub fn label(&self) -> String {
        match self.k {
            Some(k) => format!("{}:{k}", self.strategy),
            None => self.strategy.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub instance: String,
    pub summaries: Vec<EfficiencySummary>,
    /// Trials excluded because the offline matching was empty.
    pub skipped_trials: usize,
    pub weights: Option<FractionalSolution>,
}

/// Per-trial ratio `strategy / offline`, averaged over trials.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let instance = config.source.load()?;
    let x = if config.strategies.iter().any(|c| c.strategy.needs_weights()) {
        Some(learn_weights(
            &instance,
            &config.weights,
            config.mc,
            config.seed,
        )?)
    } else {
        None
    };
    let outcomes = simulate(
        &instance,
        &config.strategies,
        x.as_ref(),
        config.trials,
        config.seed,
    )?;
    let kept: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.offline > 0).collect();
    let skipped_trials = outcomes.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::Config(
            "every trial had an empty offline matching".into(),
        ));
    }

    let mut summaries: Vec<EfficiencySummary> = config
        .strategies
        .iter()
        .enumerate()
        .map(|(s, c)| {
            let ratios: Vec<f64> = kept
                .iter()
                .map(|o| o.matched[s] as f64 / o.offline as f64)
                .collect();
            let (mean, half) = ci95(&ratios);
            EfficiencySummary {
                strategy: c.strategy,
                k: c.k,
                mean,
                ci95: half,
                trials: ratios.len(),
            }
        })
        .collect();
    sort_summaries(&mut summaries);
    Ok(ExperimentReport {
        instance: config.source.label(),
        summaries,
        skipped_trials,
        weights: x,
    })
}

fn sort_summaries(summaries: &mut [EfficiencySummary]) {
    summaries.sort_by(|a, b| a.strategy.name().cmp(b.strategy.name()).then(a.k.cmp(&b.k)));
}

/// One row of the guarantee table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub instance: String,
    pub k: usize,
    pub z: f64,
    pub heavy_fraction: f64,
    pub theorem_bound: f64,
    pub empirical_mean: f64,
    pub stderr: f64,
    pub vacuous: bool,
    pub pass: bool,
}

/// Compares the sparsifier guarantee with the simulated `E|M(G_S)|` for each
/// budget, using weights learned from `weights`.
pub fn bound_table(
    source: &InstanceSource,
    budgets: &[usize],
    weights: &WeightSource,
    trials: usize,
    mc: usize,
    seed: u64,
) -> Result<Vec<BoundRow>> {
    if trials == 0 || mc == 0 {
        return Err(Error::Config("trials and mc must be >= 1".into()));
    }
    let instance = source.load()?;
    let x = learn_weights(&instance, weights, mc, seed)?;
    let configs = budgets
        .iter()
        .map(|&k| StrategyConfig::new(Strategy::VarOpt, Some(k)))
        .collect::<Result<Vec<_>>>()?;
    let outcomes = simulate(&instance, &configs, Some(&x), trials, seed)?;
    budgets
        .iter()
        .enumerate()
        .map(|(s, &k)| {
            let split = heavy_light(&instance, &x, k)?;
            let inputs = BoundInputs::new(split.z_heavy, split.z_light, k)?;
            let bound = theorem_bound(&inputs);
            let sizes: Vec<f64> = outcomes.iter().map(|o| o.matched[s] as f64).collect();
            let (mean, stderr) = mean_stderr(&sizes);
            Ok(BoundRow {
                instance: source.label(),
                k,
                z: inputs.z,
                heavy_fraction: inputs.heavy_fraction(),
                theorem_bound: bound,
                empirical_mean: mean,
                stderr,
                vacuous: bound <= 0.0,
                pass: bound <= mean + 4.0 * stderr,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct NycConfig {
    pub start: NaiveDateTime,
    pub intervals: usize,
    pub strategies: Vec<StrategyConfig>,
    pub trials: usize,
    pub mc: usize,
    pub seed: u64,
    pub weights: WeightSource,
}

/// Cumulative mean unmet demand per strategy at each interval.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnmetDemandSeries {
    pub timestamps: Vec<NaiveDateTime>,
    /// Keyed by strategy label; always contains `offline`.
    pub cumulative: BTreeMap<String, Vec<f64>>,
}

impl UnmetDemandSeries {
    pub fn last(&self, label: &str) -> Option<f64> {
        self.cumulative.get(label).and_then(|v| v.last().copied())
    }
}

/// Earliest interval start for a trip set: the first 10-minute mark at or
/// after the earliest recorded timestamp.
pub fn default_nyc_window(data: &TripData) -> Option<(NaiveDateTime, usize)> {
    let times = data
        .trips
        .iter()
        .flat_map(|t| [t.pickup_time, t.dropoff_time]);
    let first = times.clone().min()?;
    let last = times.max()?;
    let step = NYC_STEP_MINUTES * 60;
    let secs = first.and_utc().timestamp();
    let start_secs =
        secs.div_euclid(step) * step + if secs.rem_euclid(step) == 0 { 0 } else { step };
    let start = chrono::DateTime::from_timestamp(start_secs, 0)?.naive_utc();
    let mut count = 0;
    while start + TimeDelta::minutes(NYC_STEP_MINUTES * count as i64) < last {
        count += 1;
    }
    Some((start, count))
}

/// Replays consecutive 10-minute intervals. Each interval builds a fresh
/// market, learns weights for it if needed, and averages unmatched riders
/// over the trials. Empty windows contribute zero.
pub fn run_nyc_day(data: &TripData, config: &NycConfig) -> Result<UnmetDemandSeries> {
    if config.trials == 0 || config.mc == 0 {
        return Err(Error::Config("trials and mc must be >= 1".into()));
    }
    let mut labels = vec![StrategyConfig::offline()];
    labels.extend(
        config
            .strategies
            .iter()
            .copied()
            .filter(|c| c.strategy != Strategy::Offline),
    );

    let mut series = UnmetDemandSeries::default();
    let mut running = vec![0.0; labels.len()];
    for step in 0..config.intervals {
        let t = config.start + TimeDelta::minutes(NYC_STEP_MINUTES * step as i64);
        let stream = RngStream::new(config.seed, 0)
            .derive_label("interval")
            .derive(step as u64);
        match build_nyc_instance(&data.trips, &data.zones, t, &stream.derive_label("cars")) {
            Ok(interval) => {
                let instance = &interval.instance;
                let x = if labels.iter().any(|c| c.strategy.needs_weights()) {
                    let weights = match &config.weights {
                        WeightSource::Lp => WeightSource::Lp,
                        _ => WeightSource::MonteCarlo,
                    };
                    Some(learn_weights(
                        instance,
                        &weights,
                        config.mc,
                        stream.stream_id,
                    )?)
                } else {
                    None
                };
                let outcomes = simulate(
                    instance,
                    &labels[1..],
                    x.as_ref(),
                    config.trials,
                    stream.stream_id,
                )?;
                let trials = outcomes.len() as f64;
                for (s, total) in running.iter_mut().enumerate() {
                    let unmet: usize = outcomes
                        .iter()
                        .map(|o| o.arrivals - if s == 0 { o.offline } else { o.matched[s - 1] })
                        .sum();
                    *total += unmet as f64 / trials;
                }
            }
            Err(Error::EmptyWindow(why)) => log::info!("empty window: {why}"),
            Err(e) => return Err(e),
        }
        series.timestamps.push(t);
        for (c, &total) in labels.iter().zip(&running) {
            series.cumulative.entry(c.label()).or_default().push(total);
        }
    }
    Ok(series)
}

/// Parses flat `key = value` lines. Blank lines and `#` comments are
/// skipped; keys are lowercased and `_` is read as `-`.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`",
                lineno + 1
            )));
        };
        let key = key.trim().to_ascii_lowercase().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

pub fn render_summaries(summaries: &[EfficiencySummary], format: OutputFormat) -> String {
    let mut sorted = summaries.to_vec();
    sort_summaries(&mut sorted);
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("strategy,k,mean,ci95,trials\n");
            for s in &sorted {
                let k = s.k.map(|k| k.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{k},{:.6},{:.6},{}",
                    s.strategy, s.mean, s.ci95, s.trials
                )
                .unwrap();
            }
            out
        }
        OutputFormat::Json => {
            serde_json::to_string_pretty(&sorted).expect("summaries serialize") + "\n"
        }
    }
}

pub fn parse_summaries_json(text: &str) -> Result<Vec<EfficiencySummary>> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("bad summaries JSON: {e}")))
}

pub fn render_series(series: &UnmetDemandSeries, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("timestamp,strategy,cumulative_unmet\n");
            for (i, t) in series.timestamps.iter().enumerate() {
                for (label, values) in &series.cumulative {
                    writeln!(
                        out,
                        "{},{label},{:.6}",
                        t.format("%Y-%m-%dT%H:%M:%S"),
                        values[i]
                    )
                    .unwrap();
                }
            }
            out
        }
        OutputFormat::Json => {
            serde_json::to_string_pretty(series).expect("series serializes") + "\n"
        }
    }
}

pub fn render_bound_rows(rows: &[BoundRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from(
                "instance,k,z,heavy_fraction,theorem_bound,empirical_mean,stderr,verdict\n",
            );
            for r in rows {
                let verdict = match (r.pass, r.vacuous) {
                    (true, true) => "vacuous",
                    (true, false) => "pass",
                    (false, _) => "fail",
                };
                writeln!(
                    out,
                    "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{verdict}",
                    r.instance,
                    r.k,
                    r.z,
                    r.heavy_fraction,
                    r.theorem_bound,
                    r.empirical_mean,
                    r.stderr
                )
                .unwrap();
            }
            out
        }
        OutputFormat::Json => serde_json::to_string_pretty(rows).expect("rows serialize") + "\n",
    }
}

/// Writes rendered output to `path`, or stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn emit_results(
    summaries: &[EfficiencySummary],
    path: &Path,
    format: OutputFormat,
) -> Result<()> {
    emit(&render_summaries(summaries, format), Some(path))
}

pub fn emit_series(series: &UnmetDemandSeries, path: &Path, format: OutputFormat) -> Result<()> {
    emit(&render_series(series, format), Some(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci95_examples() {
        assert_eq!(ci95(&[1.0, 1.0, 1.0]), (1.0, 0.0));
        let (m, h) = ci95(&[0.0, 1.0]);
        assert_eq!(m, 0.5);
        assert!((h - 1.96 * 0.5f64.sqrt() / 2.0f64.sqrt()).abs() < 1e-12);
        assert!((h - 0.98).abs() < 1e-12);
        assert_eq!(ci95(&[0.7]), (0.7, 0.0));
    }

    fn summary(strategy: Strategy, k: Option<usize>) -> EfficiencySummary {
        EfficiencySummary {
            strategy,
            k,
            mean: 0.9,
            ci95: 0.01,
            trials: 10,
        }
    }

    #[test]
    fn csv_layout_and_order() {
        let csv = render_summaries(
            &[
                summary(Strategy::VarOpt, Some(5)),
                summary(Strategy::Kvv, None),
            ],
            OutputFormat::Csv,
        );
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "strategy,k,mean,ci95,trials");
        assert_eq!(lines[1], "kvv,,0.900000,0.010000,10");
        assert_eq!(lines[2], "varopt,5,0.900000,0.010000,10");
    }

    #[test]
    fn json_round_trip() {
        let xs = vec![
            summary(Strategy::Mgs, None),
            summary(Strategy::Random, Some(3)),
        ];
        let back = parse_summaries_json(&render_summaries(&xs, OutputFormat::Json)).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("# run\nseed = 7\n\nweights_in = w.json # cached\n").unwrap();
        assert_eq!(kv.len(), 2);
        assert_eq!(kv["seed"], "7");
        assert_eq!(kv["weights-in"], "w.json");
        assert!(parse_key_values("seed 7").is_err());
        assert!(parse_key_values("a = 1\na = 2").is_err());
    }

    #[test]
    fn empty_series_is_header_only() {
        let csv = render_series(&UnmetDemandSeries::default(), OutputFormat::Csv);
        assert_eq!(csv, "timestamp,strategy,cumulative_unmet\n");
    }

    #[test]
    fn offline_is_perfectly_efficient() {
        let mut cfg = ExperimentConfig::new(
            InstanceSource::Family {
                family: Family::Triangular,
                n: 20,
            },
            vec![StrategyConfig::offline()],
        );
        cfg.trials = 30;
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.summaries[0].mean, 1.0);
        assert_eq!(rep.summaries[0].ci95, 0.0);
        assert_eq!(rep.skipped_trials, 0);
    }

    #[test]
    fn experiments_are_deterministic() {
        let mut cfg = ExperimentConfig::new(
            InstanceSource::Family {
                family: Family::Block,
                n: 20,
            },
            ["kvv", "mgs", "random:3", "varopt:3"]
                .iter()
                .map(|s| s.parse().unwrap())
                .collect(),
        );
        cfg.trials = 25;
        cfg.mc = 20;
        cfg.seed = 9;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        for s in &a.summaries {
            assert!(s.mean <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new(
            InstanceSource::Family {
                family: Family::Block,
                n: 20,
            },
            vec![StrategyConfig::offline()],
        );
        cfg.trials = 0;
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }
}
