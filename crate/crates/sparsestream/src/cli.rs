//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sparsestream_core::eval::{inject_noise, min_max_normalize, outlier_experiment};
use sparsestream_core::synth::{gen_shift_event, gen_subspace_stream, StreamParams, OUTLIER_LABEL};
use sparsestream_core::{run_stream, DataWindow, NoiseNorm, SolverConfig, StreamConfig};

use crate::clock::WallClock;
use crate::csv_io::{load_csv, read_table, write_table, CsvOptions, LabelColumn, Table};
use crate::error::{Error, Result};
use crate::report::{emit_reports, EmitOptions, ReportFormat};

#[derive(Debug, Parser)]
#[command(name = "sparsestream", version, about = "Sparse self-expressive clustering of high-dimensional streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a stream window by window and write one report per window.
    Run(RunArgs),
    /// Min-max normalize a stream file and corrupt a fraction of its cells.
    Noise(NoiseArgs),
    /// Write a synthetic union-of-subspaces stream as CSV.
    Synth(SynthArgs),
    /// Compare SRV outlier flags with a tuned 1-NN baseline.
    OutlierExp(OutlierArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    L21,
    L1,
    Fro,
}

impl From<NormArg> for NoiseNorm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L21 => NoiseNorm::L21,
            NormArg::L1 => NoiseNorm::L1,
            NormArg::Fro => NoiseNorm::Fro,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Stream file, one object per row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// The first row is a header.
    #[arg(long)]
    pub has_header: bool,
    #[arg(long, value_enum, default_value_t = LabelColumn::Last)]
    pub label: LabelColumn,
}

impl InputArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions { has_header: self.has_header, label: self.label }
    }
}

#[derive(Debug, Args)]
pub struct GeneratorArgs {
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, default_value_t = 2)]
    pub subspace_dim: usize,
    #[arg(long, default_value_t = 10)]
    pub windows: usize,
    /// Rotation of every basis per window, in degrees.
    #[arg(long, default_value_t = 0.0)]
    pub drift_deg: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub synth_seed: u64,
}

impl GeneratorArgs {
    fn params(&self, per_window: usize) -> StreamParams {
        StreamParams {
            dim: self.dim,
            clusters: self.clusters,
            subspace_dim: self.subspace_dim,
            per_window,
            windows: self.windows,
            drift_deg: self.drift_deg,
            noise_sigma: self.noise_sigma,
            outlier_fraction: self.outlier_fraction,
            seed: self.synth_seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    #[arg(long, default_value_t = 200)]
    pub window_size: usize,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = NormArg::L21)]
    pub noise_norm: NormArg,
    #[arg(long, default_value_t = 1.0)]
    pub m_prime: f64,
    #[arg(long, default_value_t = 2)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    /// Run one reassignment pass after merging.
    #[arg(long)]
    pub fine_tune: bool,
    #[arg(long, default_value_t = 0.1)]
    pub rep_fraction: f64,
    #[arg(long, default_value_t = 0.02)]
    pub merge_margin: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1.1)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl EngineArgs {
    pub fn config(&self) -> Result<StreamConfig> {
        let solver = SolverConfig {
            lambda: self.lambda,
            noise_norm: self.noise_norm.into(),
            max_iters: self.max_iters,
            rho: self.rho,
            ..SolverConfig::default()
        };
        let cfg = StreamConfig {
            window_size: self.window_size,
            m_prime: self.m_prime,
            k_max: self.k_max,
            sigma: self.sigma,
            fine_tune: self.fine_tune,
            rep_fraction: self.rep_fraction,
            merge_margin: self.merge_margin,
            seed: self.seed,
            solver,
            ..StreamConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Generate the stream instead of reading a file; windows hold
    /// --window-size objects.
    #[arg(long, conflicts_with = "input")]
    pub synth: bool,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Shuffle input rows with --seed before cutting windows.
    #[arg(long)]
    pub shuffle: bool,
    /// Report destination; `-` is stdout.
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Jsonl)]
    pub format: ReportFormat,
    /// Include wall-clock runtimes (makes output run-dependent).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub output: PathBuf,
    /// Fraction of cells replaced by Uniform[0, 1) draws.
    #[arg(long)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip min-max normalization; values must already lie in [0, 1].
    #[arg(long)]
    pub assume_normalized: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long, default_value_t = 150)]
    pub per_window: usize,
    /// Redraw this cluster's basis at --shift-window.
    #[arg(long, requires = "shift_window")]
    pub shift_cluster: Option<usize>,
    #[arg(long, requires = "shift_cluster")]
    pub shift_window: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
    /// Write a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct OutlierArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, conflicts_with = "input")]
    pub synth: bool,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Label that marks planted outliers in the input.
    #[arg(long, default_value = OUTLIER_LABEL)]
    pub outlier_label: String,
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
}

fn source_windows(input: &InputArgs, synth: bool, generator: &GeneratorArgs, window_size: usize, shuffle: Option<u64>) -> Result<Vec<DataWindow>> {
    if synth {
        return Ok(gen_subspace_stream(generator.params(window_size))?.collect());
    }
    let path = input
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("either --input or --synth is required".into()))?;
    load_csv(path, input.options(), window_size, shuffle)
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.engine.config()?;
    let shuffle = args.shuffle.then_some(cfg.seed);
    let windows = source_windows(&args.input, args.synth, &args.generator, cfg.window_size, shuffle)?;
    let clock = WallClock::new();
    let summary = run_stream(windows, &cfg, &clock)?;
    emit_reports(&summary.reports, &args.output, EmitOptions { format: args.format, timings: args.timings })
}

fn noise(args: &NoiseArgs) -> Result<()> {
    let path = args.input.input.as_deref().ok_or_else(|| Error::Config("--input is required".into()))?;
    if !(args.ratio > 0.0 && args.ratio < 1.0) {
        return Err(Error::Config(format!("--ratio must lie in (0, 1), got {}", args.ratio)));
    }
    let table = read_table(path, args.input.options())?;
    if table.is_empty() {
        return Err(Error::Data(format!("{} has no rows", path.display())));
    }
    let x = table.matrix();
    let x = if args.assume_normalized { x } else { min_max_normalize(&x) };
    let (noisy, _) = inject_noise(&x, args.ratio, args.seed)?;
    write_table(&args.output, &table.with_matrix(&noisy), args.input.has_header)
}

fn synth(args: &SynthArgs) -> Result<()> {
    let params = args.generator.params(args.per_window);
    let windows: Vec<DataWindow> = match (args.shift_cluster, args.shift_window) {
        (Some(c), Some(w)) => gen_shift_event(params, c, w)?.collect(),
        _ => gen_subspace_stream(params)?.collect(),
    };
    write_table(&args.output, &Table::from_windows(&windows), args.header)
}

#[derive(Serialize)]
struct OutlierRecord {
    trials: usize,
    srv_error: f64,
    one_nn_error: f64,
    per_trial: Vec<(f64, f64)>,
}

fn outlier_exp(args: &OutlierArgs) -> Result<()> {
    let cfg = args.engine.config()?;
    let windows = source_windows(&args.input, args.synth, &args.generator, cfg.window_size, None)?;
    let result = outlier_experiment(&windows, args.trials, &cfg, &args.outlier_label)?;
    let record = OutlierRecord {
        trials: args.trials,
        srv_error: result.srv_error,
        one_nn_error: result.one_nn_error,
        per_trial: result.trials,
    };
    let mut line = serde_json::to_string(&record)?;
    line.push('\n');
    write_output(&args.output, line.as_bytes())
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.as_os_str() == "-" {
        let mut out = std::io::stdout().lock();
        return out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| Error::io("<stdout>", e));
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => run(a),
        Command::Noise(a) => noise(a),
        Command::Synth(a) => synth(a),
        Command::OutlierExp(a) => outlier_exp(a),
    }
}

/// Parses arguments, runs the command and maps failures to exit codes:
/// 2 for usage or configuration errors, 3 for data errors.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
