use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use locsparse::bounds::corollary_budget;
use locsparse::generators::{ingest_trips, parse_timestamp, Family};
use locsparse::harness::{
    bound_table, default_nyc_window, emit, learn_weights, parse_key_values, render_bound_rows,
    render_series, render_summaries, run_experiment, run_nyc_day, ExperimentConfig, InstanceSource,
    NycConfig, OutputFormat, DEFAULT_MC, DEFAULT_TRIALS, NYC_STEP_MINUTES,
};
use locsparse::{Error, Result, StrategyConfig, WeightSource};

const SYNTH_STRATEGIES: &str = "kvv,mgs,random:3,random:5,random:10,varopt:3,varopt:5,varopt:10";
const NYC_STRATEGIES: &str = "kvv,random:5,varopt:5,varopt:10";
const BOUND_BUDGETS: &str = "3,5,10";
const BOUND_TRIALS: usize = 200;

#[derive(Parser)]
#[command(
    name = "locsparse",
    version,
    about = "Local sparsification experiments for stochastic bipartite matching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Efficiency table on a synthetic family or an instance file.
    Synth(SynthArgs),
    /// Cumulative unmet demand over a taxi trip replay.
    Nyc(NycArgs),
    /// Guarantee versus simulated sparsified matching size.
    Bounds(BoundsArgs),
    /// Learn a fractional solution and cache it as JSON.
    Weights(WeightsArgs),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Monte Carlo simulations used to learn weights.
    #[arg(long)]
    mc: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct InstanceArgs {
    /// block, triangular, bahmani, tsm, complete or exclusive.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Instance JSON, used instead of --family.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: InstanceArgs,
    /// Comma-separated `name[:k]` list.
    #[arg(long)]
    strategies: Option<String>,
    /// lp or montecarlo.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    weights_in: Option<PathBuf>,
    #[arg(long)]
    weights_out: Option<PathBuf>,
}

#[derive(Args)]
struct NycArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trips: Option<PathBuf>,
    #[arg(long)]
    zones: Option<PathBuf>,
    /// First interval start; defaults to the first 10-minute mark in the data.
    #[arg(long)]
    interval: Option<String>,
    /// Number of 10-minute intervals to replay.
    #[arg(long)]
    intervals: Option<usize>,
    #[arg(long)]
    strategies: Option<String>,
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: InstanceArgs,
    /// Comma-separated sparsifier budgets.
    #[arg(long)]
    k: Option<String>,
    /// Adds the budget that targets a `1 - epsilon` preservation ratio.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    weights_in: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: InstanceArgs,
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    weights_out: Option<PathBuf>,
}

/// Command-line values layered over an optional config file.
struct Settings {
    file: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                parse_key_values(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Self { file })
    }

    fn pick<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>> {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad value `{raw}` for `{key}`"))),
            None => Ok(None),
        }
    }

    fn pick_parsed<T>(&self, cli: Option<String>, key: &str) -> Result<Option<T>>
    where
        T: FromStr<Err = Error>,
    {
        self.pick::<String>(cli, key)?
            .map(|s| s.parse())
            .transpose()
    }
}

struct Shared {
    seed: u64,
    trials: usize,
    mc: usize,
    out: Option<PathBuf>,
    format: OutputFormat,
}

fn shared(common: &Common, settings: &Settings, default_trials: usize) -> Result<Shared> {
    Ok(Shared {
        seed: settings.pick(common.seed, "seed")?.unwrap_or(0),
        trials: settings
            .pick(common.trials, "trials")?
            .unwrap_or(default_trials),
        mc: settings.pick(common.mc, "mc")?.unwrap_or(DEFAULT_MC),
        out: settings.pick(common.out.clone(), "out")?,
        format: settings
            .pick_parsed(common.format.clone(), "format")?
            .unwrap_or(OutputFormat::Csv),
    })
}

fn instance_source(args: &InstanceArgs, settings: &Settings) -> Result<InstanceSource> {
    if let Some(path) = settings.pick(args.instance.clone(), "instance")? {
        return Ok(InstanceSource::File(path));
    }
    let family: Family = settings
        .pick_parsed(args.family.clone(), "family")?
        .ok_or_else(|| Error::Config("either --family or --instance is required".into()))?;
    let n = settings.pick(args.n, "n")?.unwrap_or(100);
    Ok(InstanceSource::Family { family, n })
}

fn strategies(
    cli: Option<String>,
    settings: &Settings,
    default: &str,
) -> Result<Vec<StrategyConfig>> {
    let list = settings
        .pick::<String>(cli, "strategies")?
        .unwrap_or_else(|| default.into());
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn weight_source(
    kind: Option<String>,
    file: Option<PathBuf>,
    settings: &Settings,
) -> Result<WeightSource> {
    if let Some(path) = settings.pick(file, "weights-in")? {
        return Ok(WeightSource::File(path));
    }
    Ok(settings
        .pick_parsed(kind, "weights")?
        .unwrap_or(WeightSource::MonteCarlo))
}

fn synth(args: SynthArgs) -> Result<()> {
    let settings = Settings::load(args.common.config.as_deref())?;
    let shared = shared(&args.common, &settings, DEFAULT_TRIALS)?;
    let mut config = ExperimentConfig::new(
        instance_source(&args.source, &settings)?,
        strategies(args.strategies, &settings, SYNTH_STRATEGIES)?,
    );
    config.trials = shared.trials;
    config.mc = shared.mc;
    config.seed = shared.seed;
    config.weights = weight_source(args.weights, args.weights_in, &settings)?;
    let weights_out = settings.pick(args.weights_out, "weights-out")?;

    let report = run_experiment(&config)?;
    if report.skipped_trials > 0 {
        log::warn!(
            "{} trials skipped: empty offline matching",
            report.skipped_trials
        );
    }
    if let Some(path) = weights_out {
        match &report.weights {
            Some(x) => x.save(&config.source.load()?, &path)?,
            None => log::warn!(
                "no strategy needed weights; nothing written to {}",
                path.display()
            ),
        }
    }
    emit(
        &render_summaries(&report.summaries, shared.format),
        shared.out.as_deref(),
    )
}

fn nyc(args: NycArgs) -> Result<()> {
    let settings = Settings::load(args.common.config.as_deref())?;
    let shared = shared(&args.common, &settings, DEFAULT_TRIALS)?;
    let trips = settings
        .pick(args.trips, "trips")?
        .ok_or_else(|| Error::Config("--trips is required".into()))?;
    let zones = settings
        .pick(args.zones, "zones")?
        .ok_or_else(|| Error::Config("--zones is required".into()))?;
    let data = ingest_trips(&trips, &zones)?;
    if data.dropped > 0 {
        log::warn!("dropped {} trip rows", data.dropped);
    }
    let (first, span) = default_nyc_window(&data)
        .ok_or_else(|| Error::Config(format!("no usable trips in {}", trips.display())))?;
    let start = match settings.pick::<String>(args.interval, "interval")? {
        Some(raw) => {
            parse_timestamp(&raw).ok_or_else(|| Error::Config(format!("bad --interval `{raw}`")))?
        }
        None => first,
    };
    let intervals = match settings.pick(args.intervals, "intervals")? {
        Some(count) => count,
        None => {
            let skipped = (start - first).num_minutes().div_euclid(NYC_STEP_MINUTES);
            (span as i64 - skipped).max(1) as usize
        }
    };
    let weights = match settings.pick_parsed::<WeightSource>(args.weights, "weights")? {
        Some(WeightSource::Lp) => WeightSource::Lp,
        _ => WeightSource::MonteCarlo,
    };
    let config = NycConfig {
        start,
        intervals,
        strategies: strategies(args.strategies, &settings, NYC_STRATEGIES)?,
        trials: shared.trials,
        mc: shared.mc,
        seed: shared.seed,
        weights,
    };
    let series = run_nyc_day(&data, &config)?;
    emit(
        &render_series(&series, shared.format),
        shared.out.as_deref(),
    )
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let settings = Settings::load(args.common.config.as_deref())?;
    let shared = shared(&args.common, &settings, BOUND_TRIALS)?;
    let sources = match (
        &args.source.family,
        &args.source.instance,
        settings.file.get("family"),
    ) {
        (None, None, None) if !settings.file.contains_key("instance") => {
            let n = settings.pick(args.source.n, "n")?.unwrap_or(100);
            Family::BENCHMARKS
                .iter()
                .map(|&family| InstanceSource::Family { family, n })
                .collect()
        }
        _ => vec![instance_source(&args.source, &settings)?],
    };
    let mut budgets: Vec<usize> = settings
        .pick::<String>(args.k, "k")?
        .unwrap_or_else(|| BOUND_BUDGETS.into())
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad budget `{s}`")))
        })
        .collect::<Result<_>>()?;
    if let Some(eps) = settings.pick(args.epsilon, "epsilon")? {
        budgets.push(corollary_budget(eps)?);
    }
    budgets.sort_unstable();
    budgets.dedup();
    if budgets.contains(&0) {
        return Err(Error::Config("budgets must be >= 1".into()));
    }
    let weights = weight_source(args.weights, args.weights_in, &settings)?;

    let mut rows = Vec::new();
    for source in &sources {
        rows.extend(bound_table(
            source,
            &budgets,
            &weights,
            shared.trials,
            shared.mc,
            shared.seed,
        )?);
    }
    emit(
        &render_bound_rows(&rows, shared.format),
        shared.out.as_deref(),
    )
}

fn weights(args: WeightsArgs) -> Result<()> {
    let settings = Settings::load(args.common.config.as_deref())?;
    let shared = shared(&args.common, &settings, DEFAULT_TRIALS)?;
    let source = instance_source(&args.source, &settings)?;
    let kind = weight_source(args.weights, None, &settings)?;
    let instance = source.load()?;
    let x = learn_weights(&instance, &kind, shared.mc, shared.seed)?;
    log::info!("objective {:.6} on {}", x.objective(), source.label());
    let out = match settings.pick(args.weights_out, "weights-out")? {
        Some(p) => Some(p),
        None => shared.out,
    };
    emit(&(x.to_json_string(&instance) + "\n"), out.as_deref())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_io() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Nyc(a) => nyc(a),
        Command::Bounds(a) => bounds(a),
        Command::Weights(a) => weights(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
