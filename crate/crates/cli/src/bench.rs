//! Benchmark harness: times each scheme on synthetic images and reports
//! mean, spread and speed-up over the serial oracle.
//!
//! Only the compute phase is timed. Image synthesis, quantization and report
//! writing happen outside the timed region.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use texture_forge_core::pipeline::partition;
use texture_forge_core::{
    compute_glcm_chunked, compute_glcm_chunked_sequential, compute_glcm_privatized,
    compute_glcm_serial, compute_glcm_shared, contention_profile, detect_workers, plan, quantize,
    Angle, ExecutionPlan, Glcm, GlcmParams, InMemorySource, LatencySource, QuantizedImage,
    DEFAULT_SCRATCH_BUDGET,
};

use crate::{parse_angle, CliError, Scheme, TextureKind};

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Square image edge lengths.
    #[arg(long, value_delimiter = ',', default_value = "1024,4096")]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "8,32")]
    pub levels: Vec<usize>,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "smooth,noise"
    )]
    pub images: Vec<TextureKind>,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "serial,shared,privatized,pipelined"
    )]
    pub schemes: Vec<Scheme>,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub distance: usize,
    #[arg(long, value_parser = parse_angle, default_value = "0")]
    pub angle: Angle,
    #[arg(long)]
    pub copies: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub chunks: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Injected ingestion time as a multiple of compute time for the
    /// pipelined scheme; 0 disables injection.
    #[arg(long, default_value_t = 0.0)]
    pub ingest_ratio: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub scheme: Scheme,
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub d: usize,
    pub theta: u32,
    #[serde(rename = "R")]
    pub copies: Option<usize>,
    #[serde(rename = "K")]
    pub chunks: Option<usize>,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub median_ms: f64,
    pub speedup_vs_serial: f64,
}

/// Pipelined versus ingest-then-compute on the same latency-injected source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapRow {
    pub image: String,
    pub size: usize,
    pub levels: usize,
    pub chunks: usize,
    pub ingest_ratio: f64,
    pub sequential_ms: f64,
    pub pipelined_ms: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub overlaps: Vec<OverlapRow>,
    /// `(image label, size, levels, concentration)` per configuration.
    pub concentrations: Vec<(String, usize, usize, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct Timing {
    mean: f64,
    std: f64,
    median: f64,
}

fn summarize(mut samples: Vec<f64>) -> Timing {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() > 1 {
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    let median = if samples.len().is_multiple_of(2) {
        (samples[mid - 1] + samples[mid]) / 2.0
    } else {
        samples[mid]
    };
    // a sub-nanosecond mean only happens on a broken clock; keep ratios finite
    Timing {
        mean: mean.max(1e-6),
        std,
        median,
    }
}

fn time<F: FnMut() -> Result<Glcm, CliError>>(
    repeats: usize,
    expected: &Glcm,
    mut run: F,
) -> Result<Timing, CliError> {
    // warm-up: page in buffers and spawn-path code before timing
    run()?;
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let glcm = run()?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
        if &glcm != expected {
            return Err(CliError::Compute(
                "scheme disagreed with the serial oracle".into(),
            ));
        }
    }
    Ok(summarize(samples))
}

fn latency_for(
    img: &QuantizedImage,
    params: &GlcmParams,
    plan: &ExecutionPlan,
    k: usize,
    ratio: f64,
) -> Result<f64, CliError> {
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let start = Instant::now();
        compute_glcm_chunked_sequential(InMemorySource::new(img), params, plan, k)?;
        best = best.min(start.elapsed().as_secs_f64());
    }
    let bytes: usize = partition(img.width(), img.height(), params, k)?
        .iter()
        .map(|s| s.buffer_rows() * img.width())
        .sum();
    Ok(ratio * best * 1e9 / bytes as f64)
}

/// Runs every configuration and returns the report without writing it.
pub fn run_bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    if args.copies == Some(0) {
        return Err(CliError::Usage("--copies must be at least 1".into()));
    }
    if args.ingest_ratio < 0.0 || !args.ingest_ratio.is_finite() {
        return Err(CliError::Usage(
            "--ingest-ratio must be non-negative".into(),
        ));
    }
    if let Some(l) = args.levels.iter().find(|l| !(2..=256).contains(*l)) {
        return Err(CliError::Usage(format!(
            "gray levels must be in 2..=256, got {l}"
        )));
    }
    let workers = detect_workers();
    let mut report = BenchReport::default();

    for &size in &args.sizes {
        for &kind in &args.images {
            let raw = kind
                .generate(size, size, args.seed)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            for &levels in &args.levels {
                let img = quantize(&raw, levels).map_err(|e| CliError::Usage(e.to_string()))?;
                let params = GlcmParams::new(args.distance, args.angle, levels)?;
                let mut plan = plan(levels, DEFAULT_SCRATCH_BUDGET, workers);
                if let Some(r) = args.copies {
                    plan = plan.with_copies(r);
                }
                let expected = compute_glcm_serial(&img, &params)?;
                let concentration = contention_profile(&img, &params)?.concentration;
                report
                    .concentrations
                    .push((kind.label().to_string(), size, levels, concentration));

                let serial = time(args.repeats, &expected, || {
                    Ok(compute_glcm_serial(&img, &params)?)
                })?;
                for &scheme in &args.schemes {
                    let (timing, copies, chunks) = match scheme {
                        Scheme::Serial => (serial, None, None),
                        Scheme::Shared => (
                            time(args.repeats, &expected, || {
                                Ok(compute_glcm_shared(&img, &params, &plan)?.0)
                            })?,
                            None,
                            None,
                        ),
                        Scheme::Privatized => (
                            time(args.repeats, &expected, || {
                                Ok(compute_glcm_privatized(&img, &params, &plan)?.0)
                            })?,
                            Some(plan.copies),
                            None,
                        ),
                        Scheme::Pipelined => {
                            let k = args.chunks;
                            let latency = if args.ingest_ratio > 0.0 {
                                latency_for(&img, &params, &plan, k, args.ingest_ratio)?
                            } else {
                                0.0
                            };
                            let pipelined = time(args.repeats, &expected, || {
                                let src = LatencySource::new(InMemorySource::new(&img), latency);
                                Ok(compute_glcm_chunked(src, &params, &plan, k)?)
                            })?;
                            if args.ingest_ratio > 0.0 {
                                let sequential = time(args.repeats, &expected, || {
                                    let src =
                                        LatencySource::new(InMemorySource::new(&img), latency);
                                    Ok(compute_glcm_chunked_sequential(src, &params, &plan, k)?)
                                })?;
                                report.overlaps.push(OverlapRow {
                                    image: kind.label().to_string(),
                                    size,
                                    levels,
                                    chunks: k,
                                    ingest_ratio: args.ingest_ratio,
                                    sequential_ms: sequential.mean,
                                    pipelined_ms: pipelined.mean,
                                    speedup: sequential.mean / pipelined.mean,
                                });
                            }
                            (pipelined, Some(plan.copies), Some(k))
                        }
                    };
                    report.rows.push(BenchRow {
                        scheme,
                        image: kind.label().to_string(),
                        width: size,
                        height: size,
                        levels,
                        d: args.distance,
                        theta: args.angle.degrees(),
                        copies,
                        chunks,
                        mean_ms: timing.mean,
                        std_ms: timing.std,
                        median_ms: timing.median,
                        speedup_vs_serial: if scheme == Scheme::Serial {
                            1.0
                        } else {
                            serial.mean / timing.mean
                        },
                    });
                }
            }
        }
    }
    Ok(report)
}

pub fn write_report_csv<W: Write>(report: &BenchReport, sink: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(report: &BenchReport, out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<10} {:<7} {:>6} {:>4} {:>10} {:>9} {:>9}",
        "scheme", "image", "size", "L", "mean ms", "std ms", "speedup"
    )?;
    for r in &report.rows {
        writeln!(
            out,
            "{:<10} {:<7} {:>6} {:>4} {:>10.3} {:>9.3} {:>8.2}x",
            r.scheme.to_string(),
            r.image,
            r.width,
            r.levels,
            r.mean_ms,
            r.std_ms,
            r.speedup_vs_serial
        )?;
    }
    for (image, size, levels, c) in &report.concentrations {
        writeln!(
            out,
            "concentration {image} {size}x{size} L={levels}: {c:.4}"
        )?;
    }
    for o in &report.overlaps {
        writeln!(
            out,
            "overlap {} {}x{} L={} K={} ingest={}x compute: sequential {:.2} ms, pipelined {:.2} ms, {:.2}x",
            o.image, o.size, o.size, o.levels, o.chunks, o.ingest_ratio, o.sequential_ms, o.pipelined_ms, o.speedup
        )?;
    }
    Ok(())
}

pub fn cmd_bench<W: Write>(args: &BenchArgs, out: &mut W) -> Result<(), CliError> {
    let report = run_bench(args)?;
    let file = std::fs::File::create(&args.output)
        .map_err(|e| CliError::input(args.output.display(), e))?;
    write_report_csv(&report, std::io::BufWriter::new(file))
        .map_err(|e| CliError::input(args.output.display(), e))?;
    write_summary(&report, out).map_err(|e| CliError::input("stdout", e))
}
