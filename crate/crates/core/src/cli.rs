//! The `spsoft` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 data-consistency error,
//! 4 runtime or numerical failure. Standard output carries short
//! human-readable summaries only; data goes to the declared output paths.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{apply_config, parse_config, set_field};
use crate::error::Error;
use crate::grid::{one_hot_encode, Grid, LabelMap};
use crate::metrics::{evaluate_labels, ClassMetrics};
use crate::pgm::Pgm;
use crate::slic::{slic_segment, SlicParams, SuperpixelMap};
use crate::soften::{gaussian_soften, soften};
use crate::toylab::{self, ExperimentConfig, RunResult, DEFAULT_BETAS, DEFAULT_TOY_COUNTS};
use crate::voxfile::VoxFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "spsoft",
    version,
    about = "Superpixel-guided soft labels, metrics and toy experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Over-segment an image (PGM or SVXB) into superpixels.
    Slic(SlicArgs),
    /// Turn a hard label map into soft label planes.
    Soften(SoftenArgs),
    /// Compare a predicted label map with the ground truth.
    Metrics(MetricsArgs),
    /// Run the synthetic experiment and its sweeps.
    Toy(ToyArgs),
}

#[derive(Debug, Args)]
struct SlicArgs {
    #[arg(long)]
    input: PathBuf,
    /// Target number of superpixels.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, default_value_t = 0.1)]
    compactness: f64,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Sp,
    Gaussian,
}

#[derive(Debug, Args)]
struct SoftenArgs {
    #[arg(long)]
    gt: PathBuf,
    /// Superpixel map; required for `--method sp`.
    #[arg(long)]
    superpixels: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    classes: u64,
    /// Rescale the planes to sum to one at every pixel.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    normalize: bool,
    #[arg(long, value_enum, default_value_t = Method::Sp)]
    method: Method,
    /// Gaussian width in pixels, for `--method gaussian`.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    classes: u64,
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ToyAction {
    /// Hard, Gaussian-soft and superpixel-soft arms.
    Run,
    SweepBeta,
    SweepSuperpixels,
}

#[derive(Debug, Args)]
struct ToyArgs {
    #[arg(value_enum)]
    action: ToyAction,
    /// `key = value` file applied on top of the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of seeds, 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    /// Output directory for raw.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Exit code for a library error.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Io(_) | Error::Format(_) | Error::Config { .. } | Error::InvalidParameter { .. } => EXIT_USAGE,
        Error::InvalidShape(_)
        | Error::ShapeMismatch { .. }
        | Error::LabelOutOfRange { .. }
        | Error::NoBoundary
        | Error::EmptyMask => EXIT_DATA,
        Error::Divergence { .. } | Error::RunFailed { .. } => EXIT_RUNTIME,
    }
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        Self::new(exit_code(&error), error.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Slic(a) => cmd_slic(&a),
        Command::Soften(a) => cmd_soften(&a),
        Command::Metrics(a) => cmd_metrics(&a),
        Command::Toy(a) => cmd_toy(&a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::new(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))
}

fn input_error(path: &Path, error: Error) -> CliError {
    CliError::new(exit_code(&error), format!("{}: {error}", path.display()))
}

/// Reads a PGM or SVXB file as a scalar grid.
fn read_grid(path: &Path) -> CliResult<Grid> {
    let bytes = read_bytes(path)?;
    let parsed = if bytes.starts_with(b"P5") {
        Pgm::from_bytes(&bytes).and_then(|p| p.to_grid())
    } else {
        VoxFile::from_bytes(&bytes).and_then(|v| v.to_grid())
    };
    parsed.map_err(|e| input_error(path, e))
}

fn integer_ids(path: &Path, grid: &Grid) -> CliResult<Vec<u32>> {
    grid.values()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(CliError::new(
                    EXIT_DATA,
                    format!("{}: value {v} is not a non-negative integer", path.display()),
                ))
            }
        })
        .collect()
}

fn read_labels(path: &Path, num_classes: u64) -> CliResult<LabelMap> {
    let grid = read_grid(path)?;
    let labels = integer_ids(path, &grid)?;
    LabelMap::new(grid.shape().clone(), labels, num_classes as usize).map_err(|e| input_error(path, e))
}

fn read_superpixels(path: &Path) -> CliResult<SuperpixelMap> {
    let grid = read_grid(path)?;
    let ids = integer_ids(path, &grid)?;
    SuperpixelMap::new(grid.shape().clone(), ids).map_err(|e| input_error(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::new(EXIT_USAGE, format!("cannot write {}: {e}", path.display())))
}

fn cmd_slic(args: &SlicArgs) -> CliResult<()> {
    let image = read_grid(&args.input)?;
    let params = SlicParams {
        target_count: args.count as usize,
        compactness: args.compactness,
        max_iters: args.iters,
        ..SlicParams::default()
    };
    if let Err(e) = params.validate() {
        return Err(CliError::new(EXIT_USAGE, flag_message(&e)));
    }
    let sp = slic_segment(&image, &params)?;
    write_file(&args.output, &VoxFile::from_superpixels(&sp).to_bytes())?;
    println!("{}", sp.num_blocks());
    Ok(())
}

/// Rewrites a parameter error in terms of the command-line flag.
fn flag_message(error: &Error) -> String {
    match error {
        Error::InvalidParameter { name, reason } => {
            let flag = match *name {
                "target_count" => "--count",
                "max_iters" => "--iters",
                "compactness" => "--compactness",
                "sigma" => "--sigma",
                other => other,
            };
            format!("invalid value for {flag}: {reason}")
        }
        other => other.to_string(),
    }
}

fn cmd_soften(args: &SoftenArgs) -> CliResult<()> {
    let labels = read_labels(&args.gt, args.classes)?;
    let hard = one_hot_encode(&labels)?;
    let soft = match args.method {
        Method::Sp => {
            let Some(path) = &args.superpixels else {
                return Err(CliError::new(EXIT_USAGE, "--method sp requires --superpixels"));
            };
            let sp = read_superpixels(path)?;
            labels.shape().ensure_same_dims(sp.shape())?;
            soften(&hard, &sp, args.normalize)?
        }
        // blurred one-hot planes already sum to one, so `--normalize` is moot
        Method::Gaussian => {
            gaussian_soften(&hard, args.sigma).map_err(|e| CliError::new(EXIT_USAGE, flag_message(&e)))?
        }
    };
    write_file(&args.output, &VoxFile::from_stack(soft.stack()).to_bytes())?;
    let dims: Vec<String> = labels.shape().dims().iter().map(|d| d.to_string()).collect();
    println!(
        "wrote {} soft planes of {} to {}",
        soft.num_classes(),
        dims.join("x"),
        args.output.display()
    );
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

pub const METRICS_HEADER: &str = "class,dice,vs,hd95,asd,assd";

fn metrics_row(name: &str, m: &ClassMetrics) -> String {
    let cells: Vec<String> = m.values().iter().map(|&v| cell(v)).collect();
    format!("{name},{}\n", cells.join(","))
}

fn cmd_metrics(args: &MetricsArgs) -> CliResult<()> {
    let pred = read_labels(&args.pred, args.classes)?;
    let gt = read_labels(&args.gt, args.classes)?;
    let report = evaluate_labels(&pred, &gt)?;
    if let Some(path) = &args.csv_out {
        let mut csv = format!("{METRICS_HEADER}\n");
        for (c, row) in report.per_class.iter().enumerate() {
            csv.push_str(&metrics_row(&c.to_string(), row));
        }
        csv.push_str(&metrics_row("mean", &report.mean));
        write_file(path, csv.as_bytes())?;
    }
    let show = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
    let m = &report.mean;
    println!(
        "mean over classes: dice {} vs {} hd95 {} asd {} assd {}",
        show(m.dice),
        show(m.vs),
        show(m.hd95),
        show(m.asd),
        show(m.assd)
    );
    Ok(())
}

fn toy_config(args: &ToyArgs) -> CliResult<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    if let Some(path) = &args.config {
        let text = String::from_utf8(read_bytes(path)?)
            .map_err(|_| CliError::new(EXIT_USAGE, format!("{}: not UTF-8 text", path.display())))?;
        let entries = parse_config(&text).map_err(|e| input_error(path, e))?;
        apply_config(&mut config, &entries).map_err(|e| input_error(path, e))?;
    }
    for item in &args.overrides {
        let Some((key, value)) = item.split_once('=') else {
            return Err(CliError::new(
                EXIT_USAGE,
                format!("--set expects KEY=VALUE, got `{item}`"),
            ));
        };
        set_field(&mut config, key.trim(), value.trim())
            .map_err(|m| CliError::new(EXIT_USAGE, format!("--set: {m}")))?;
    }
    if let Some(n) = args.seeds {
        config.seeds = (0..n).collect();
    }
    if let Some(beta) = args.beta {
        config.beta = beta;
    }
    config
        .validate()
        .map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
    Ok(config)
}

fn cmd_toy(args: &ToyArgs) -> CliResult<()> {
    let config = toy_config(args)?;
    let mut header = String::new();
    let rows: Vec<RunResult> = match args.action {
        ToyAction::Run => toylab::run_experiment(&config)?,
        ToyAction::SweepBeta => {
            let betas = args.betas.clone().unwrap_or_else(|| DEFAULT_BETAS.to_vec());
            toylab::sweep_beta(&config, &betas)?
        }
        ToyAction::SweepSuperpixels => {
            let counts = args.counts.clone().unwrap_or_else(|| DEFAULT_TOY_COUNTS.to_vec());
            for &count in &counts {
                header.push_str(&format!(
                    "# count {count}: expected block side {:.3} px on {}x{}\n",
                    toylab::block_side(config.size, count),
                    config.size,
                    config.size
                ));
            }
            toylab::sweep_superpixels(&config, &counts)?
        }
    };
    let summary = toylab::summarize(&rows);
    let summary_text = header + &toylab::summary_csv(&summary);
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::new(EXIT_USAGE, format!("cannot create {}: {e}", args.out.display())))?;
    write_file(&args.out.join("raw.csv"), toylab::raw_csv(&rows).as_bytes())?;
    write_file(&args.out.join("summary.csv"), summary_text.as_bytes())?;

    println!(
        "{:<12} {:>4} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "value", "runs", "dice", "vs", "hd95", "asd", "assd"
    );
    for s in &summary {
        let means: Vec<String> = s.stats.iter().map(|(m, _)| format!("{m:8.4}")).collect();
        println!("{:<12} {:>4} {}", s.sweep_value, s.runs, means.join(" "));
    }
    Ok(())
}
