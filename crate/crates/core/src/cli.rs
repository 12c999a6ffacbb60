//! Command-line front end.
//!
//! Settings resolve as command-line flag, then `--config` TOML file, then
//! the built-in defaults. All randomness derives from `--seed`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::erp::{extract_viewport, load_erp, ErpImage};
use crate::error::Error;
use crate::io::{read_scanpaths, read_sequences, write_json, write_sequences_csv, SequenceFile};
use crate::metrics::{evaluate, DEFAULT_REC_THRESHOLD};
use crate::report::{
    accumulate_density, aggregate_quality, render_heatmap, score_sequences, DensityGrid,
    EntropyScorer, QualityReport, Scorer,
};
use crate::rps::{Generator, RpsConfig, ViewportSequence};
use crate::sphere::{FieldOfView, SphereCoord, TransitionStep};

pub const THREADS_ENV: &str = "PANOVIEW_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "panoview",
    version,
    about = "Viewport-sequence sampling and scanpath evaluation for 360-degree panoramas"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample viewport sequences over one or more panoramas.
    Generate(GenerateArgs),
    /// Render a single viewport.
    Extract(ExtractArgs),
    /// Compare sequences against reference scanpaths.
    Evaluate(EvaluateArgs),
    /// Density heatmap of sequence centers.
    Heatmap(HeatmapArgs),
    /// Sample sequences, score each and average the scores.
    Score(ScoreArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplingArgs {
    /// TOML file with default settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of sequences.
    #[arg(long)]
    pub n: Option<usize>,
    /// Viewports per sequence.
    #[arg(long)]
    pub m: Option<usize>,
    /// Field of view in degrees, square.
    #[arg(long)]
    pub fov: Option<f64>,
    /// Viewport side in pixels, divisible by 4.
    #[arg(long)]
    pub size: Option<u32>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Transition step in degrees: `D` or `DLAT,DLON`.
    #[arg(long, value_parser = parse_pair)]
    pub step: Option<(f64, f64)>,
    /// Starting point `LAT,LON` shared by every sequence.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub start: Option<(f64, f64)>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Also write every viewport as PNG.
    #[arg(long)]
    pub viewport_pngs: bool,
    /// Also write the sequences as CSV.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output PNG path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub lat: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub lon: f64,
    #[arg(long, default_value_t = 110.0)]
    pub fov: f64,
    #[arg(long, default_value_t = 224)]
    pub size: u32,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Generated sequences (or any scanpath file).
    #[arg(long)]
    pub input: PathBuf,
    /// Reference scanpaths, JSON or CSV.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub rec_threshold: Option<f64>,
    /// Reduce every reference path to this many equally spaced points.
    #[arg(long)]
    pub subsample: Option<usize>,
    /// Seed of the random baseline.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Row label of the evaluated method.
    #[arg(long, default_value = "RPS")]
    pub method: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Sequence JSON.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Side of one grid cell in pixels.
    #[arg(long, default_value_t = 20)]
    pub cell_px: u32,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    pub scorer: Option<String>,
    /// Also write the density heatmap.
    #[arg(long)]
    pub heatmap: bool,
    /// Also write the sampled sequences.
    #[arg(long)]
    pub sequences_json: bool,
    #[arg(long)]
    pub viewport_pngs: bool,
    #[arg(long, default_value_t = 20)]
    pub cell_px: u32,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match parts.as_slice() {
        [a] => {
            let v = num(a)?;
            Ok((v, v))
        }
        [a, b] => Ok((num(a)?, num(b)?)),
        _ => Err(format!(
            "expected one or two comma-separated numbers, got {s:?}"
        )),
    }
}

/// Settings accepted in a `--config` TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub fov: Option<f64>,
    pub size: Option<u32>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub step: Option<[f64; 2]>,
    pub start: Option<[f64; 2]>,
    pub rec_threshold: Option<f64>,
    pub scorer: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::from(Error::io(path, e)))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}

/// Sampling settings after merging flags, file and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub rps: RpsConfig,
    pub start: SphereCoord,
    pub file: FileConfig,
}

impl SamplingArgs {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let file = FileConfig::load(self.config.as_deref())?;
        let d = RpsConfig::default();
        let fov = self.fov.or(file.fov);
        let step = self.step.or(file.step.map(|[a, b]| (a, b)));
        let rps = RpsConfig {
            n: self.n.or(file.n).unwrap_or(d.n),
            m: self.m.or(file.m).unwrap_or(d.m),
            step: match step {
                Some((a, b)) => TransitionStep::new(a, b)?,
                None => d.step,
            },
            fov: match fov {
                Some(f) => FieldOfView::square(f)?,
                None => d.fov,
            },
            size: self.size.or(file.size).unwrap_or(d.size),
            gamma: self.gamma.or(file.gamma).unwrap_or(d.gamma),
            beta: self.beta.or(file.beta).unwrap_or(d.beta),
            sigma: self.sigma.or(file.sigma).unwrap_or(d.sigma),
            seed: self.seed.or(file.seed).unwrap_or(d.seed),
        };
        rps.validate()?;
        let (lat, lon) = self
            .start
            .or(file.start.map(|[a, b]| (a, b)))
            .unwrap_or((0.0, 0.0));
        Ok(Resolved {
            rps,
            start: SphereCoord::new(lat, lon)?,
            file,
        })
    }
}

/// A failed command with its process exit code.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub const INPUT: i32 = 2;
    pub const IO: i32 = 3;

    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: Self::INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_io() { Self::IO } else { Self::INPUT },
            message: e.to_string(),
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn make_scorer(name: Option<&str>, cfg: &RpsConfig) -> Result<Box<dyn Scorer>, CliError> {
    match name.unwrap_or("entropy") {
        "entropy" => Ok(Box::new(EntropyScorer::new(cfg.clone()))),
        other => Err(CliError::input(format!(
            "unknown scorer {other:?}, available: entropy"
        ))),
    }
}

fn sample(img: &ErpImage, resolved: &Resolved) -> Result<Vec<ViewportSequence>, CliError> {
    let generator = Generator::new(img, resolved.rps.clone())?;
    Ok(generator.all(&vec![resolved.start; resolved.rps.n])?)
}

fn write_viewports(
    img: &ErpImage,
    cfg: &RpsConfig,
    sequences: &[ViewportSequence],
    dir: &Path,
    name: &str,
) -> Result<(), CliError> {
    let generator = Generator::new(img, cfg.clone())?;
    for (i, s) in sequences.iter().enumerate() {
        for (t, c) in s.centers.iter().enumerate() {
            generator
                .viewport(*c)?
                .save_png(dir.join(format!("{name}_vp{i}_{t}.png")))?;
        }
    }
    Ok(())
}

/// Runs `f` over every input on the worker pool and reports the first
/// failure in input order.
fn for_each_input<F>(inputs: &[PathBuf], f: F) -> Result<(), CliError>
where
    F: Fn(&Path) -> Result<(), CliError> + Sync,
{
    let results: Vec<Result<(), CliError>> = inputs.par_iter().map(|p| f(p)).collect();
    results.into_iter().collect()
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let resolved = args.sampling.resolve()?;
    ensure_dir(&args.out)?;
    for_each_input(&args.input, |input| {
        let img = load_erp(input)?;
        let sequences = sample(&img, &resolved)?;
        let name = stem(input);
        write_json(
            args.out.join(format!("{name}_sequences.json")),
            &SequenceFile::new(&resolved.rps, sequences.clone()),
        )?;
        if args.csv {
            write_sequences_csv(args.out.join(format!("{name}_sequences.csv")), &sequences)?;
        }
        if args.viewport_pngs {
            write_viewports(&img, &resolved.rps, &sequences, &args.out, &name)?;
        }
        Ok(())
    })
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<(), CliError> {
    let img = load_erp(&args.input)?;
    let fov = FieldOfView::square(args.fov)?;
    let center = SphereCoord::new(args.lat, args.lon)?;
    let vp = extract_viewport(&img, center, fov, (args.size, args.size))?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    vp.save_png(&args.out)?;
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let rec_threshold = args
        .rec_threshold
        .or(file.rec_threshold)
        .unwrap_or(DEFAULT_REC_THRESHOLD);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let (_, pseudo) = read_scanpaths(&args.input, None)?;
    let (image, gt) = read_scanpaths(&args.gt, args.subsample)?;
    let table = evaluate(&args.method, &pseudo, &gt, rec_threshold, seed)?;
    ensure_dir(&args.out)?;
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct EvaluationOut<'a> {
        image: &'a str,
        #[serde(flatten)]
        table: &'a crate::metrics::EvaluationTable,
    }
    write_json(
        args.out
            .join(format!("{}_evaluation.json", stem(&args.input))),
        &EvaluationOut {
            image: &image,
            table: &table,
        },
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DensityOut<'a> {
    image: &'a str,
    total: u64,
    counts: &'a [u64],
}

fn write_density(dir: &Path, name: &str, grid: &DensityGrid, cell_px: u32) -> Result<(), CliError> {
    render_heatmap(grid, dir.join(format!("{name}_heatmap.png")), cell_px)?;
    write_json(
        dir.join(format!("{name}_density.json")),
        &DensityOut {
            image: name,
            total: grid.total,
            counts: &grid.counts,
        },
    )?;
    Ok(())
}

pub fn cmd_heatmap(args: &HeatmapArgs) -> Result<(), CliError> {
    let file = read_sequences(&args.input)?;
    let grid = accumulate_density(&file.sequences);
    if grid.total == 0 {
        log::warn!(
            "{}: no viewport centers, heatmap is black",
            args.input.display()
        );
    }
    ensure_dir(&args.out)?;
    write_density(&args.out, &stem(&args.input), &grid, args.cell_px)
}

pub fn cmd_score(args: &ScoreArgs) -> Result<(), CliError> {
    let resolved = args.sampling.resolve()?;
    let scorer_name = args.scorer.clone().or(resolved.file.scorer.clone());
    let scorer = make_scorer(scorer_name.as_deref(), &resolved.rps)?;
    ensure_dir(&args.out)?;
    for_each_input(&args.input, |input| {
        let img = load_erp(input)?;
        let sequences = sample(&img, &resolved)?;
        let scores = score_sequences(scorer.as_ref(), &img, &sequences)?;
        let grid = accumulate_density(&sequences);
        let name = stem(input);
        let report = QualityReport {
            image: name.clone(),
            scorer: scorer.name().to_string(),
            final_score: aggregate_quality(&scores)?,
            per_sequence: scores,
            density: grid.counts.clone(),
        };
        write_json(args.out.join(format!("{name}_report.json")), &report)?;
        if args.heatmap {
            write_density(&args.out, &name, &grid, args.cell_px)?;
        }
        if args.sequences_json {
            write_json(
                args.out.join(format!("{name}_sequences.json")),
                &SequenceFile::new(&resolved.rps, sequences.clone()),
            )?;
        }
        if args.viewport_pngs {
            write_viewports(&img, &resolved.rps, &sequences, &args.out, &name)?;
        }
        Ok(())
    })
}

/// Sizes the global worker pool from `PANOVIEW_THREADS` when set.
pub fn init_thread_pool() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Heatmap(a) => cmd_heatmap(a),
        Command::Score(a) => cmd_score(a),
    }
}
