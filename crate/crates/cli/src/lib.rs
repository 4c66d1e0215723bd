//! Command-line front end: `compute`, `features`, `synth` and `bench`.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 computation error.

pub mod bench;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use texture_forge_core::{
    compute_glcm_chunked, compute_glcm_privatized, compute_glcm_serial, compute_glcm_shared,
    detect_workers, extract_features, load_pgm, normalize, plan, quantize, symmetrize, synth_noise,
    synth_smooth, valid_pair_count, write_glcm_csv, write_normalized_csv, write_pgm, Angle,
    ContentionStats, Glcm, GlcmParams, GrayImage, ImageError, PgmFileSource, PipelineError,
    QuantizedImage, DEFAULT_SCRATCH_BUDGET,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Compute(_) => 3,
        }
    }

    fn input(context: impl fmt::Display, err: impl fmt::Display) -> Self {
        CliError::Input(format!("{context}: {err}"))
    }
}

impl From<texture_forge_core::GlcmError> for CliError {
    fn from(e: texture_forge_core::GlcmError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Compute(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "texture-forge",
    version,
    about = "Gray-level co-occurrence matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a GLCM from a PGM image and write it as CSV.
    Compute(ComputeArgs),
    /// Print energy, contrast, homogeneity, entropy and correlation as JSON.
    Features(GlcmArgs),
    /// Write a synthetic test image as PGM.
    Synth(SynthArgs),
    /// Time every scheme over synthetic images and write a CSV report.
    Bench(bench::BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Serial,
    Shared,
    Privatized,
    Pipelined,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Serial => "serial",
            Scheme::Shared => "shared",
            Scheme::Privatized => "privatized",
            Scheme::Pipelined => "pipelined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextureKind {
    Smooth,
    Noise,
}

impl TextureKind {
    pub fn label(self) -> &'static str {
        match self {
            TextureKind::Smooth => "smooth",
            TextureKind::Noise => "noise",
        }
    }

    pub fn generate(self, width: usize, height: usize, seed: u64) -> Result<GrayImage, ImageError> {
        match self {
            TextureKind::Smooth => synth_smooth(width, height, seed),
            TextureKind::Noise => synth_noise(width, height, seed),
        }
    }
}

fn parse_angle(s: &str) -> Result<Angle, String> {
    s.parse::<Angle>().map_err(|e| e.to_string())
}

fn parse_levels(s: &str) -> Result<usize, String> {
    let l: usize = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if (2..=256).contains(&l) {
        Ok(l)
    } else {
        Err(format!("gray levels must be in 2..=256, got {l}"))
    }
}

/// Flags shared by `compute` and `features`.
#[derive(Debug, Clone, Args)]
pub struct GlcmArgs {
    /// Binary PGM (P5, maxval 255).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_levels)]
    pub levels: usize,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub distance: u32,
    /// One of 0, 45, 90, 135.
    #[arg(long, value_parser = parse_angle)]
    pub angle: Angle,
    #[arg(long, value_enum, default_value_t = Scheme::Serial)]
    pub scheme: Scheme,
    /// Sub-GLCM copies per worker group (privatized and pipelined).
    #[arg(long)]
    pub copies: Option<usize>,
    /// Row blocks for the pipelined scheme.
    #[arg(long, default_value_t = 4)]
    pub chunks: usize,
    /// Count each pair in both orders (M + Mᵀ).
    #[arg(long)]
    pub symmetric: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub glcm: GlcmArgs,
    /// Write probabilities instead of counts.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub output: PathBuf,
}

/// `WxH`, e.g. `640x480`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size {
    pub width: usize,
    pub height: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad size {s:?}"))
        };
        Ok(Size {
            width: parse(w)?,
            height: parse(h)?,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: TextureKind,
    #[arg(long)]
    pub size: Size,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses `args` (including the program name) and runs the command; returns
/// the process exit code. Errors are reported on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command, writing its report to `out`.
pub fn execute<W: Write>(command: Command, out: &mut W) -> Result<(), CliError> {
    match command {
        Command::Compute(args) => cmd_compute(&args, out),
        Command::Features(args) => cmd_features(&args, out),
        Command::Synth(args) => cmd_synth(&args, out),
        Command::Bench(args) => bench::cmd_bench(&args, out),
    }
}

fn read_image(path: &Path) -> Result<GrayImage, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(path.display(), e))?;
    load_pgm(&bytes).map_err(|e| CliError::input(path.display(), e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(path.display(), e))
}

fn write_json<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, value)
        .map_err(io::Error::from)
        .and_then(|()| writeln!(out))
        .map_err(|e| CliError::input("stdout", e))
}

/// GLCM plus whatever contention statistics the scheme produced.
pub struct Computed {
    pub glcm: Glcm,
    pub stats: Option<ContentionStats>,
    pub valid_pairs: u64,
}

/// Runs the chosen scheme on the PGM at `args.input`.
pub fn compute_from_args(args: &GlcmArgs) -> Result<Computed, CliError> {
    let params = GlcmParams::new(args.distance as usize, args.angle, args.levels)?;
    let mut plan = plan(args.levels, DEFAULT_SCRATCH_BUDGET, detect_workers());
    if let Some(r) = args.copies {
        if r == 0 {
            return Err(CliError::Usage("--copies must be at least 1".into()));
        }
        plan = plan.with_copies(r);
    }

    let (glcm, stats, (w, h)) = if args.scheme == Scheme::Pipelined {
        let source = PgmFileSource::open(&args.input, args.levels)
            .map_err(|e| CliError::input(args.input.display(), e))?;
        let dims = (
            texture_forge_core::ChunkSource::width(&source),
            texture_forge_core::ChunkSource::height(&source),
        );
        let glcm = compute_glcm_chunked(source, &params, &plan, args.chunks)?;
        let stats = ContentionStats::from_glcm(&glcm);
        (glcm, Some(stats), dims)
    } else {
        let img: QuantizedImage = quantize(&read_image(&args.input)?, args.levels)
            .map_err(|e| CliError::input(args.input.display(), e))?;
        let dims = (img.width(), img.height());
        let (glcm, stats) = match args.scheme {
            Scheme::Serial => (compute_glcm_serial(&img, &params)?, None),
            Scheme::Shared => {
                let (g, s) = compute_glcm_shared(&img, &params, &plan)?;
                (g, Some(s))
            }
            _ => {
                let (g, s) = compute_glcm_privatized(&img, &params, &plan)?;
                (g, Some(s))
            }
        };
        (glcm, stats, dims)
    };
    let valid_pairs = valid_pair_count(w, h, &params)?;
    let glcm = if args.symmetric {
        symmetrize(&glcm)
    } else {
        glcm
    };
    Ok(Computed {
        glcm,
        stats,
        valid_pairs,
    })
}

#[derive(Serialize)]
struct ComputeSummary<'a> {
    scheme: Scheme,
    levels: usize,
    distance: u32,
    angle: Angle,
    symmetric: bool,
    total_votes: u64,
    valid_pair_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    contention: Option<&'a ContentionStats>,
}

pub fn cmd_compute<W: Write>(args: &ComputeArgs, out: &mut W) -> Result<(), CliError> {
    let computed = compute_from_args(&args.glcm)?;
    let mut sink = create(&args.output)?;
    let written = if args.normalize {
        write_normalized_csv(&normalize(&computed.glcm)?, &mut sink)
    } else {
        write_glcm_csv(&computed.glcm, &mut sink)
    };
    written.map_err(|e| CliError::input(args.output.display(), e))?;

    let g = &args.glcm;
    write_json(
        out,
        &ComputeSummary {
            scheme: g.scheme,
            levels: g.levels,
            distance: g.distance,
            angle: g.angle,
            symmetric: g.symmetric,
            total_votes: computed.glcm.total(),
            valid_pair_count: computed.valid_pairs,
            contention: computed.stats.as_ref(),
        },
    )
}

pub fn cmd_features<W: Write>(args: &GlcmArgs, out: &mut W) -> Result<(), CliError> {
    let computed = compute_from_args(args)?;
    let p = normalize(&computed.glcm)?;
    let features = extract_features(&p).map_err(|e| CliError::Compute(e.to_string()))?;
    write_json(out, &features)
}

pub fn cmd_synth<W: Write>(args: &SynthArgs, out: &mut W) -> Result<(), CliError> {
    let img = args
        .kind
        .generate(args.size.width, args.size.height, args.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut sink = create(&args.output)?;
    write_pgm(&img, &mut sink).map_err(|e| CliError::input(args.output.display(), e))?;
    writeln!(
        out,
        "wrote {} {}x{} seed {} to {}",
        args.kind.label(),
        img.width(),
        img.height(),
        args.seed,
        args.output.display()
    )
    .map_err(|e| CliError::input("stdout", e))
}
