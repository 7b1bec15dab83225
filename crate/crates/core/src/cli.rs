//! Command-line front end.
//!
//! Every subcommand writes its primary output to `--out` when given and to
//! standard output otherwise. Human-readable summaries go to standard output
//! when `--out` is set, and to standard error when standard output carries
//! the data.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context};
use clap::{Args, Parser, Subcommand};

use crate::arts::{ModelInputs, SearchRange, QBER_SECURITY_LIMIT};
use crate::channel::ChannelSpec;
use crate::fading::LognormalFade;
use crate::strategies::{compare_strategies, ComparisonConfig, StrategyKind};
use crate::trace_io::{
    read_trace_path, write_results, write_trace, EmpiricalSweep, ResultsBody, ResultsDocument,
    TraceFile,
};

#[derive(Debug, Parser)]
#[command(name = "arts", version, about = "Probe-threshold post-selection for free-space QKD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trace over a log-normal fading channel.
    Simulate(SimulateArgs),
    /// Apply probe thresholds to a recorded trace.
    Select(SelectArgs),
    /// Evaluate the analytic model on a threshold grid.
    Predict(PredictArgs),
    /// Find the threshold that maximizes the predicted key rate.
    Optimize(OptimizeArgs),
    /// Compare ARTS, count-threshold and no selection over a (mu, SNR) grid.
    Compare(CompareArgs),
    /// Maximum-likelihood log-normal fit of probe amplitudes.
    Fit(FitArgs),
}

/// Threshold grid `start:stop:count`, linear unless `--log` is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(format!("expected start:stop:count, got `{s}`"));
        };
        let start: f64 = start.parse().map_err(|_| format!("bad grid start `{start}`"))?;
        let stop: f64 = stop.parse().map_err(|_| format!("bad grid stop `{stop}`"))?;
        let count: usize = count.parse().map_err(|_| format!("bad grid count `{count}`"))?;
        if count == 0 {
            return Err("grid count must be at least 1".into());
        }
        if !(start >= 0.0) || !stop.is_finite() || (count > 1 && !(stop > start)) {
            return Err(format!("grid needs 0 <= start < stop, got {start}:{stop}"));
        }
        Ok(Self { start, stop, count })
    }
}

impl GridSpec {
    pub fn values(&self, log: bool) -> anyhow::Result<Vec<f64>> {
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        let n = (self.count - 1) as f64;
        if log {
            ensure!(self.start > 0.0, "a log grid needs a positive start");
            let (a, b) = (self.start.ln(), self.stop.ln());
            Ok((0..self.count)
                .map(|k| (a + (b - a) * k as f64 / n).exp())
                .collect())
        } else {
            Ok((0..self.count)
                .map(|k| self.start + (self.stop - self.start) * k as f64 / n)
                .collect())
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    /// Single threshold, in probe units (volts or normalized intensity).
    #[arg(long, conflicts_with = "grid")]
    pub threshold: Option<f64>,
    /// Threshold grid start:stop:count, in probe units.
    #[arg(long)]
    pub grid: Option<GridSpec>,
    /// Space the grid logarithmically.
    #[arg(long, requires = "grid")]
    pub log: bool,
}

impl ThresholdArgs {
    fn values(&self) -> anyhow::Result<Vec<f64>> {
        match (self.threshold, &self.grid) {
            (Some(t), None) => Ok(vec![t]),
            (None, Some(g)) => g.values(self.log),
            _ => bail!("give exactly one of --threshold or --grid"),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Mean signal sifted counts per packet at unit transmissivity.
    #[arg(long)]
    pub mu: f64,
    /// Signal-to-noise ratio (signal + background) / background; must exceed 1.
    #[arg(long, conflicts_with = "n_b", required_unless_present = "n_b")]
    pub snr: Option<f64>,
    /// Background counts per packet.
    #[arg(long = "n-b")]
    pub n_b: Option<f64>,
    /// Intrinsic QBER of signal detections, in [0, 0.5].
    #[arg(long)]
    pub qber: f64,
    /// Log-variance of the fade (dimensionless).
    #[arg(long = "sigma-sq")]
    pub sigma_sq: f64,
    /// Number of packets.
    #[arg(long)]
    pub packets: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output trace CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    /// Trace CSV file.
    #[arg(long)]
    pub trace: PathBuf,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Output results JSON (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Mean probe amplitude <V>, in probe units.
    #[arg(long = "mean-v")]
    pub mean_v: Option<f64>,
    /// Log-variance of the probe fade (dimensionless).
    #[arg(long = "sigma-sq")]
    pub sigma_sq: Option<f64>,
    /// Background counts per packet.
    #[arg(long = "n-b")]
    pub n_b: Option<f64>,
    /// Intrinsic QBER of signal detections, in [0, 0.5].
    #[arg(long)]
    pub qber: Option<f64>,
    /// Sifted bits without selection, N_S(0).
    #[arg(long = "n-s0", conflicts_with = "q0")]
    pub n_s0: Option<f64>,
    /// QBER without selection; calibrates N_S(0) instead of --n-s0.
    #[arg(long)]
    pub q0: Option<f64>,
    /// Packets without selection, N_P(0).
    #[arg(long = "n-p0")]
    pub n_p0: Option<f64>,
}

impl ModelArgs {
    fn inputs(&self) -> anyhow::Result<ModelInputs> {
        let need = |v: Option<f64>, flag: &str| v.with_context(|| format!("missing --{flag}"));
        let fade = LognormalFade::new(need(self.mean_v, "mean-v")?, need(self.sigma_sq, "sigma-sq")?)?;
        let nb = need(self.n_b, "n-b")?;
        let q = need(self.qber, "qber")?;
        let np0 = need(self.n_p0, "n-p0")?;
        let inputs = match (self.n_s0, self.q0) {
            (Some(ns0), None) => ModelInputs::new(fade, nb, q, ns0, np0)?,
            (None, Some(q0)) => ModelInputs::from_initial_qber(fade, nb, q, q0, np0)?,
            _ => bail!("give exactly one of --n-s0 or --q0"),
        };
        Ok(inputs)
    }
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Output results JSON (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Calibrate the model from a trace: MLE fade of the probes and measured
    /// totals. N_b and QBER come from the flags, or from a simulated trace's header.
    #[arg(long = "from-trace", conflicts_with_all = ["mean_v", "sigma_sq", "n_s0", "q0", "n_p0"])]
    pub from_trace: Option<PathBuf>,
    /// Upper end of the threshold search, in probe units (default: 99.99th percentile).
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    /// Grid points of the coarse scan (at least 1000).
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Intrinsic QBER of signal detections.
    #[arg(long, default_value_t = 0.03)]
    pub qber: f64,
    /// Log-variance of the fade.
    #[arg(long = "sigma-sq", default_value_t = 1.0)]
    pub sigma_sq: f64,
    /// Mean signal counts per packet, comma separated.
    #[arg(long = "mu-grid", value_delimiter = ',', default_value = "1,2,5,10,20,50,100")]
    pub mu_grid: Vec<f64>,
    /// SNR values (each > 1), comma separated.
    #[arg(long = "snr-grid", value_delimiter = ',', default_value = "2,5,10,20,50")]
    pub snr_grid: Vec<f64>,
    /// Packets simulated per grid point (at least 10000).
    #[arg(long, default_value_t = 100_000)]
    pub packets: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output results JSON (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Fit the probe column of a trace CSV.
    #[arg(long, conflicts_with = "samples", required_unless_present = "samples")]
    pub trace: Option<PathBuf>,
    /// Fit a plain file with one positive value per line.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

/// Destination for a command's primary output plus the stream for its summary.
struct Sink {
    data: Box<dyn Write>,
    summary: Box<dyn Write>,
}

impl Sink {
    fn open(out: &Option<PathBuf>) -> anyhow::Result<Self> {
        Ok(match out {
            Some(path) => Sink {
                data: Box::new(BufWriter::new(
                    File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
                )),
                summary: Box::new(io::stdout()),
            },
            None => Sink {
                data: Box::new(BufWriter::new(io::stdout())),
                summary: Box::new(io::stderr()),
            },
        })
    }

    fn finish(mut self) -> anyhow::Result<()> {
        self.data.flush()?;
        self.summary.flush()?;
        Ok(())
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Select(args) => select(&args),
        Command::Predict(args) => predict(&args),
        Command::Optimize(args) => optimize(&args),
        Command::Compare(args) => compare(&args),
        Command::Fit(args) => fit(&args),
    }
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let spec = match (args.snr, args.n_b) {
        (Some(snr), None) => ChannelSpec::from_snr(args.mu, snr, args.qber, args.sigma_sq)?,
        (None, Some(nb)) => ChannelSpec::new(args.mu, nb, args.qber, args.sigma_sq)?,
        _ => bail!("give exactly one of --snr or --n-b"),
    };
    ensure!(args.packets >= 1, "--packets must be at least 1");
    let trace = spec.generate(args.packets, args.seed)?;
    let mut sink = Sink::open(&args.out)?;
    write_trace(&mut sink.data, &TraceFile::simulated(trace.clone(), spec, args.seed))?;
    let n = trace.len() as f64;
    let qber = trace.total_errors() as f64 / trace.total_sifted().max(1) as f64;
    writeln!(
        sink.summary,
        "packets={} mean_counts={:.6} background_per_packet={:.6} qber={:.6} seed={}",
        trace.len(),
        trace.total_sifted() as f64 / n,
        spec.background_per_packet,
        qber,
        args.seed
    )?;
    sink.finish()
}

fn select(args: &SelectArgs) -> anyhow::Result<()> {
    let file = read_trace_path(&args.trace)?;
    let thresholds = args.thresholds.values()?;
    let outcomes = file.trace.empirical_curve(&thresholds)?;
    let mut sink = Sink::open(&args.out)?;
    writeln!(sink.summary, "{:>14} {:>10} {:>12} {:>10} {:>10}", "threshold", "N_P", "N_S", "Q", "R")?;
    for o in &outcomes {
        let q = o.qber.map_or("-".to_string(), |q| format!("{q:.6}"));
        writeln!(
            sink.summary,
            "{:>14.6e} {:>10} {:>12} {:>10} {:>10.6}",
            o.threshold, o.selected_packets, o.sifted_total, q, o.rate
        )?;
    }
    let doc = ResultsDocument::new(ResultsBody::Selection(EmpiricalSweep {
        trace: args.trace.display().to_string(),
        header: file.header,
        thresholds,
        outcomes,
    }));
    write_results(&mut sink.data, &doc)?;
    sink.finish()
}

fn predict(args: &PredictArgs) -> anyhow::Result<()> {
    let inputs = args.model.inputs()?;
    let thresholds = args.thresholds.values()?;
    let curve = inputs.curve(&thresholds)?;
    let mut sink = Sink::open(&args.out)?;
    writeln!(sink.summary, "{:>14} {:>12} {:>14} {:>10} {:>10}", "threshold", "N_P", "N_S", "Q_th", "R_th")?;
    for i in 0..curve.len() {
        writeln!(
            sink.summary,
            "{:>14.6e} {:>12.3} {:>14.3} {:>10.6} {:>10.6}",
            curve.thresholds[i], curve.packets[i], curve.sifted[i], curve.qber[i], curve.rate[i]
        )?;
    }
    write_results(&mut sink.data, &ResultsDocument::new(ResultsBody::Prediction(curve)))?;
    sink.finish()
}

fn optimize(args: &OptimizeArgs) -> anyhow::Result<()> {
    let range = SearchRange {
        t_max: args.t_max,
        points: args.points,
    };
    let mut out = io::stdout().lock();
    let inputs = match &args.from_trace {
        None => args.model.inputs()?,
        Some(path) => {
            let file = read_trace_path(path)?;
            let channel = file.header.channel;
            let nb = args
                .model
                .n_b
                .or(channel.map(|c| c.background_per_packet))
                .context("missing --n-b (not recorded in the trace header)")?;
            let q = args
                .model
                .qber
                .or(channel.map(|c| c.intrinsic_qber))
                .context("missing --qber (not recorded in the trace header)")?;
            let probes: Vec<f64> = file.trace.probe_voltages().filter(|v| *v > 0.0).collect();
            let fade = LognormalFade::fit_mle(&probes)?;
            let all = file.trace.select(0.0);
            let empirical = file.trace.best_probe_threshold();
            writeln!(
                out,
                "empirical: T*={} R={} Q={}",
                empirical.threshold,
                empirical.rate,
                empirical.qber.map_or("-".to_string(), |q| q.to_string())
            )?;
            ModelInputs::new(fade, nb, q, all.sifted_total as f64, all.selected_packets as f64)?
        }
    };
    let best = inputs.optimize_threshold(&range)?;
    if best.has_key {
        writeln!(out, "model: T*={} R={} Q={}", best.threshold, best.rate, best.qber)?;
    } else {
        writeln!(
            out,
            "model: no key at any threshold (Q(0)={} >= {QBER_SECURITY_LIMIT:.6} everywhere) T*=0 R=0",
            best.qber
        )?;
    }
    Ok(())
}

fn compare(args: &CompareArgs) -> anyhow::Result<()> {
    ensure!(
        args.snr_grid.iter().all(|s| s.is_finite() && *s > 1.0),
        "every SNR must be finite and exceed 1"
    );
    let config = ComparisonConfig {
        intrinsic_qber: args.qber,
        sigma_sq: args.sigma_sq,
        mu_grid: args.mu_grid.clone(),
        snr_grid: args.snr_grid.clone(),
        packets_per_point: args.packets,
        seed: args.seed,
    };
    let cmp = compare_strategies(&config)?;
    let mut sink = Sink::open(&args.out)?;
    writeln!(sink.summary, "{:>8} {:>8} {:>10} {:>10} {:>10}", "mu", "snr", "arts", "counts", "none")?;
    let rates = |k: StrategyKind| cmp.strategy(k).expect("all strategies evaluated");
    let (a, c, n) = (rates(StrategyKind::Arts), rates(StrategyKind::CountThreshold), rates(StrategyKind::None));
    for i in 0..a.points.len() {
        writeln!(
            sink.summary,
            "{:>8} {:>8} {:>10.6} {:>10.6} {:>10.6}",
            a.points[i].mu, a.points[i].snr, a.points[i].rate, c.points[i].rate, n.points[i].rate
        )?;
    }
    write_results(&mut sink.data, &ResultsDocument::new(ResultsBody::Comparison(cmp)))?;
    sink.finish()
}

fn read_samples(path: &Path) -> anyhow::Result<Vec<f64>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .with_context(|| format!("{}:{}: cannot parse `{line}`", path.display(), i + 1))?;
        values.push(v);
    }
    Ok(values)
}

fn fit(args: &FitArgs) -> anyhow::Result<()> {
    let (samples, skipped) = match (&args.trace, &args.samples) {
        (Some(path), None) => {
            let file = read_trace_path(path)?;
            let all: Vec<f64> = file.trace.probe_voltages().collect();
            let positive: Vec<f64> = all.iter().copied().filter(|v| *v > 0.0).collect();
            let skipped = all.len() - positive.len();
            (positive, skipped)
        }
        (None, Some(path)) => (read_samples(path)?, 0),
        _ => bail!("give exactly one of --trace or --samples"),
    };
    let fade = LognormalFade::fit_mle(&samples)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "mean_intensity={} sigma_sq={} n={} skipped_non_positive={}",
        fade.mean_intensity(),
        fade.sigma_sq(),
        samples.len(),
        skipped
    )?;
    Ok(())
}
