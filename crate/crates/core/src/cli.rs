//! Command-line surface: `acer <phantom|denoise|metrics|scores|ttest|profile>`.
//!
//! Exit status is 0 on success, 1 for usage errors (bad flags, bad config,
//! missing paths) and 2 for data errors (unreadable or inconsistent inputs).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Rect, RunConfig};
use crate::erc_profile::{distance_map, fit_scale_map, snr_gain, ScaleMap};
use crate::error::Error;
use crate::image::Image;
use crate::io::{parse_csv, read_image, read_mask, write_image, write_mask};
use crate::metrics::{
    cnr_db, edge_preservation, f_pseudosigma, median, paired_t_test, rank_sum, snr_db, RegionMask,
    ScoreMatrix,
};
use crate::phantom::{apply_nonstationary_rician, generate_phantom, gland_mask, preset_regions};
use crate::report::Report;
use crate::sampler::reconstruct;

#[derive(Debug, Parser)]
#[command(name = "acer", version, about = "Rician Monte Carlo denoising for coil-corrected prostate MRI")]
struct Cli {
    /// key=value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Random seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for reconstruction
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output file (or directory for `phantom`)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit ground truth, noisy image, scale map and region masks
    Phantom,
    /// Reconstruct an image, fitting the scale map unless one is supplied
    Denoise(DenoiseArgs),
    /// SNR/CNR/edge-preservation report for an image
    Metrics(MetricsArgs),
    /// Rank sums, medians and F-pseudosigmas of subjective scores
    Scores(TableArgs),
    /// Paired t-test p-value between two CSV columns
    Ttest(TtestArgs),
    /// Tabulate the coil SNR gain versus distance as CSV
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    /// Input image (.pgm or raw float); defaults to io.input
    input: Option<PathBuf>,
    /// Precomputed per-pixel scale map
    #[arg(long, value_name = "PATH")]
    scale_map: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Image to evaluate
    image: PathBuf,
    /// Image before reconstruction, for edge preservation
    #[arg(long, value_name = "PATH")]
    reference: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    background_mask: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    prostate_mask: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    edge_mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TableArgs {
    /// CSV with header `method,evaluator,slice,score`
    csv: PathBuf,
}

#[derive(Debug, Args)]
struct TtestArgs {
    /// CSV with one column per method
    csv: PathBuf,
    /// Method column (default: first)
    #[arg(long)]
    a: Option<String>,
    /// Reference column (default: second)
    #[arg(long)]
    b: Option<String>,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[arg(long, default_value_t = 80.0)]
    max_mm: f64,
    #[arg(long, default_value_t = 1.0)]
    step_mm: f64,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            RunConfig::parse(&text).map_err(|e| usage(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn existing(path: &Path) -> CliResult<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(usage(format!("no such file: {}", path.display())))
    }
}

fn thread_pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| usage(format!("cannot start thread pool: {e}")))
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Data(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli)?;
    let pool = thread_pool(cli.threads)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Phantom => pool.install(|| phantom(&cfg, out)),
        Command::Denoise(args) => pool.install(|| denoise(&cfg, args, out)),
        Command::Metrics(args) => metrics(&cfg, args, out),
        Command::Scores(args) => scores(&cfg, args, out),
        Command::Ttest(args) => ttest(&cfg, args, out),
        Command::Profile(args) => profile(&cfg, args, out),
    }
}

fn rect_mask(image: &Image, rect: Rect) -> CliResult<RegionMask> {
    let (r0, c0, r1, c1) = rect;
    Ok(RegionMask::rect(image.rows(), image.cols(), r0, c0, r1, c1)?)
}

fn phantom(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| usage("phantom needs --out <dir>"))?;
    fs::create_dir_all(&dir).map_err(|e| Failure::Data(e.into()))?;
    let start = Instant::now();
    let spec = cfg.phantom_spec();
    let profile = cfg.profile()?;
    let truth = generate_phantom(&spec)?;
    let dmap = distance_map(&spec.coil, spec.rows, spec.cols)?;
    let scale = ScaleMap::from_profile(&dmap, &profile, cfg.sigma0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noisy = apply_nonstationary_rician(&truth, &scale, &mut rng)?;

    let (mut background, mut prostate) = preset_regions(&spec)?;
    if let Some(rect) = cfg.background_region {
        background = rect_mask(&truth, rect)?;
    }
    if let Some(rect) = cfg.prostate_region {
        prostate = rect_mask(&truth, rect)?;
    }
    let gland = gland_mask(&spec)?;

    let ext = cfg.format.extension();
    let files = [
        (format!("truth.{ext}"), &truth),
        (format!("noisy.{ext}"), &noisy),
        (format!("scale_map.{ext}"), scale.values()),
    ];
    let mut report = Report::new();
    for (name, image) in files {
        let path = dir.join(&name);
        write_image(&path, image)?;
        report.input(name.split('.').next().unwrap_or(&name), path.display().to_string());
    }
    for (name, mask) in [
        ("background_mask.pgm", &background),
        ("prostate_mask.pgm", &prostate),
        ("gland_mask.pgm", &gland),
    ] {
        let path = dir.join(name);
        write_mask(&path, mask)?;
        report.input(name.trim_end_matches(".pgm"), path.display().to_string());
    }
    report
        .echo(&cfg.entries())
        .metric("sigma0", cfg.sigma0)
        .metric("noisy_snr_db_background", snr_db(&noisy, &background)?)
        .metric("noisy_cnr_db", cnr_db(&noisy, &background, &prostate)?)
        .timing("total", ms(start));
    fs::write(dir.join("phantom.json"), report.to_json()).map_err(|e| Failure::Data(e.into()))?;
    eprintln!("wrote phantom to {}", dir.display());
    Ok(())
}

fn denoise(cfg: &RunConfig, args: &DenoiseArgs, out: Option<&Path>) -> CliResult<()> {
    let input = args
        .input
        .clone()
        .or_else(|| cfg.input.clone())
        .ok_or_else(|| usage("denoise needs an input image"))?;
    let output = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| usage("denoise needs --out <path>"))?;
    let scale_path = args.scale_map.clone().or_else(|| cfg.scale_map.clone());
    existing(&input)?;
    if let Some(p) = &scale_path {
        existing(p)?;
    }

    let image = read_image(&input)?;
    let start = Instant::now();
    let scale = match &scale_path {
        Some(path) => {
            let values = read_image(path)?;
            values.ensure_same_dims(image.rows(), image.cols(), "scale map")?;
            let (_, max) = values.min_max();
            ScaleMap::from_image(values, max)?
        }
        None => {
            let coil = cfg.coil(image.spacing_mm());
            let dmap = distance_map(&coil, image.rows(), image.cols())?;
            fit_scale_map(&image, &dmap, &cfg.profile()?, cfg.fit_window_radius)?
        }
    };
    let fit_ms = ms(start);
    let start = Instant::now();
    let result = reconstruct(&image, &scale, &cfg.sampler_config(), None)?;
    write_image(&output, &result)?;
    eprintln!(
        "sigma0={:.6} fit={fit_ms:.0}ms reconstruct={:.0}ms -> {}",
        scale.sigma0(),
        ms(start),
        output.display()
    );
    Ok(())
}

fn mask_or(
    explicit: &Option<PathBuf>,
    configured: &Option<PathBuf>,
    rect: Option<Rect>,
    image: &Image,
    fallback: impl FnOnce() -> Option<RegionMask>,
) -> CliResult<Option<RegionMask>> {
    if let Some(path) = explicit.as_ref().or(configured.as_ref()) {
        let mask = read_mask(existing(path)?)?;
        image.ensure_same_dims(mask.rows(), mask.cols(), "mask")?;
        return Ok(Some(mask));
    }
    if let Some(rect) = rect {
        return Ok(Some(rect_mask(image, rect)?));
    }
    Ok(fallback())
}

fn metrics(cfg: &RunConfig, args: &MetricsArgs, out: Option<&Path>) -> CliResult<()> {
    let start = Instant::now();
    let image = read_image(existing(&args.image)?)?;
    let reference = match &args.reference {
        Some(path) => Some(read_image(existing(path)?)?),
        None => None,
    };
    // images shaped like the configured phantom fall back to its regions
    let spec = cfg.phantom_spec();
    let phantom_shaped = image.dims() == (spec.rows, spec.cols);
    let presets = || phantom_shaped.then(|| preset_regions(&spec).ok()).flatten();
    let background = mask_or(&args.background_mask, &cfg.background_mask, cfg.background_region, &image, || {
        presets().map(|(b, _)| b)
    })?
    .ok_or_else(|| usage("metrics needs --background-mask"))?;
    let prostate = mask_or(&args.prostate_mask, &cfg.prostate_mask, cfg.prostate_region, &image, || {
        presets().map(|(_, p)| p)
    })?
    .ok_or_else(|| usage("metrics needs --prostate-mask"))?;

    let mut report = Report::new();
    report.input("image", args.image.display().to_string());
    if let Some(path) = &args.reference {
        report.input("reference", path.display().to_string());
    }
    report
        .echo(&cfg.entries())
        .metric("snr_db_background", snr_db(&image, &background)?)
        .metric("snr_db_prostate", snr_db(&image, &prostate)?)
        .metric("cnr_db", cnr_db(&image, &background, &prostate)?);
    if let Some(reference) = &reference {
        let edge = mask_or(&args.edge_mask, &cfg.edge_mask, None, &image, || {
            phantom_shaped.then(|| gland_mask(&spec).ok()).flatten()
        })?
        .ok_or_else(|| usage("edge preservation needs --edge-mask"))?;
        report.metric("edge_preservation", edge_preservation(reference, &image, &edge)?);
    }
    report.timing("total", ms(start));
    write_output(out, &report.to_json())
}

fn read_table(path: &Path) -> CliResult<crate::io::CsvTable> {
    let text = fs::read_to_string(existing(path)?).map_err(|e| Failure::Data(e.into()))?;
    Ok(parse_csv(&text)?)
}

fn scores(cfg: &RunConfig, args: &TableArgs, out: Option<&Path>) -> CliResult<()> {
    let start = Instant::now();
    let table = read_table(&args.csv)?;
    let col = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| Failure::Data(Error::invalid(format!("score table has no '{name}' column"))))
    };
    let (method_col, eval_col, slice_col, score_col) = (col("method")?, col("evaluator")?, col("slice")?, col("score")?);

    let mut methods: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, usize, usize, u8)> = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let bad = |what: &str| Failure::Data(Error::Config {
            line: i + 2,
            message: format!("invalid {what} '{}'", row.join(",")),
        });
        let method = &row[method_col];
        let m = match methods.iter().position(|x| x == method) {
            Some(m) => m,
            None => {
                methods.push(method.clone());
                methods.len() - 1
            }
        };
        let e: usize = row[eval_col].parse().map_err(|_| bad("evaluator"))?;
        let s: usize = row[slice_col].parse().map_err(|_| bad("slice"))?;
        let score: u8 = row[score_col].parse().map_err(|_| bad("score"))?;
        if e == 0 || s == 0 {
            return Err(bad("index (1-based)"));
        }
        cells.push((m, e - 1, s - 1, score));
    }
    if methods.is_empty() {
        return Err(Failure::Data(Error::InsufficientData("score table has no rows".into())));
    }

    let mut report = Report::new();
    report.input("csv", args.csv.display().to_string()).echo(&cfg.entries());
    for (m, name) in methods.iter().enumerate() {
        let mine: Vec<_> = cells.iter().filter(|c| c.0 == m).collect();
        let evaluators = mine.iter().map(|c| c.1).max().unwrap_or(0) + 1;
        let slices = mine.iter().map(|c| c.2).max().unwrap_or(0) + 1;
        let mut grid = vec![None; evaluators * slices];
        for c in &mine {
            grid[c.1 * slices + c.2] = Some(c.3);
        }
        if grid.iter().any(Option::is_none) {
            return Err(Failure::Data(Error::InsufficientData(format!(
                "method '{name}' is missing scores in its {evaluators}x{slices} grid"
            ))));
        }
        let matrix = ScoreMatrix::new(evaluators, slices, grid.into_iter().flatten().collect())?;
        let values: Vec<f64> = matrix.as_slice().iter().map(|&v| f64::from(v)).collect();
        report.metric_group(
            name,
            &[
                ("rank_sum", rank_sum(&matrix) as f64),
                ("median", median(&values)?),
                ("f_pseudosigma", f_pseudosigma(&values)?),
            ],
        );
    }
    report.timing("total", ms(start));
    write_output(out, &report.to_json())
}

fn ttest(cfg: &RunConfig, args: &TtestArgs, out: Option<&Path>) -> CliResult<()> {
    let start = Instant::now();
    let table = read_table(&args.csv)?;
    let pick = |name: &Option<String>, default: usize| -> CliResult<usize> {
        match name {
            Some(n) => table
                .column(n)
                .ok_or_else(|| usage(format!("no column named '{n}'"))),
            None if default < table.header.len() => Ok(default),
            None => Err(Failure::Data(Error::InsufficientData("ttest needs two columns".into()))),
        }
    };
    let (a, b) = (pick(&args.a, 0)?, pick(&args.b, 1)?);
    let test = paired_t_test(&table.numeric_column(a)?, &table.numeric_column(b)?)?;
    let mut report = Report::new();
    report
        .input("csv", args.csv.display().to_string())
        .input("method", table.header[a].clone())
        .input("reference", table.header[b].clone())
        .echo(&cfg.entries())
        .metric("t", test.t)
        .metric("dof", test.dof as f64)
        .metric("p_value", test.p_value)
        .timing("total", ms(start));
    write_output(out, &report.to_json())
}

fn profile(cfg: &RunConfig, args: &ProfileArgs, out: Option<&Path>) -> CliResult<()> {
    if !(args.step_mm > 0.0 && args.max_mm >= 0.0 && args.max_mm.is_finite()) {
        return Err(usage("--step-mm must be positive and --max-mm non-negative"));
    }
    let profile = cfg.profile()?;
    let mut csv = String::from("distance_mm,gain\n");
    let steps = (args.max_mm / args.step_mm + 1e-9).floor() as usize;
    for i in 0..=steps {
        let d = i as f64 * args.step_mm;
        let _ = writeln!(csv, "{d},{}", snr_gain(&profile, d)?);
    }
    write_output(out, &csv)
}
