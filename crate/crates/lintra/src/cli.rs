//! Subcommands of the `lintra` binary.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lintra_core::metrics::{distance_scatter, evaluate, pearson};
use lintra_core::pca::{fit_pca, spectrum_report};
use lintra_core::synth::PowerLawGenerator;
use lintra_core::tasks::{make_domain_pair, MaskRect, TaskParams};
use lintra_core::{
    Correspondence, FitConfig, ImageSet, ImageShape, MapMode, Pairing, Protocol, TaskName, TaskSpec,
};

use crate::error::{Error, Result};
use crate::sidecar::Sidecar;
use crate::{io as img_io, model_store, report};

#[derive(Debug, Parser)]
#[command(
    name = "lintra",
    version,
    about = "Linear unsupervised image-to-image translation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic image corpus from a power-law linear generator.
    Synth(SynthArgs),
    /// Build domain directories A and B from a source directory.
    MakeTask(MakeTaskArgs),
    /// Fit both PCA bases and the latent map, and save the model.
    Fit(FitArgs),
    /// Translate a directory of domain-A images.
    Translate(TranslateArgs),
    /// Per-image MSE and SSIM of predictions against targets.
    Eval(EvalArgs),
    /// PCA eigenvalue spectrum of a directory.
    Spectrum(SpectrumArgs),
    /// Cross-domain pairwise distance comparison.
    Distcheck(DistcheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProtocolArg {
    PairedShuffled,
    Nonmatching,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::PairedShuffled => Protocol::PairedShuffled,
            ProtocolArg::Nonmatching => Protocol::Nonmatching,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairingArg {
    Unsupervised,
    Supervised,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Orthogonal,
    UnrestrictedLinear,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    /// Number of basis images; defaults to min(256, d).
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub exponent: f64,
    #[arg(long, default_value_t = 0.08)]
    pub pixel_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MakeTaskArgs {
    #[arg(long, value_parser = parse_task)]
    pub task: TaskName,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_a: PathBuf,
    #[arg(long)]
    pub out_b: PathBuf,
    #[arg(long, value_enum, default_value = "paired-shuffled")]
    pub protocol: ProtocolArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Inpaint rectangle as `top,left,height,width`.
    #[arg(long, value_parser = parse_mask)]
    pub mask: Option<MaskRect>,
    /// Super-res downsampling factor.
    #[arg(long)]
    pub factor: Option<usize>,
    /// Defaults to `task.json` next to the A directory.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// JSON fit configuration; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_skew_align: bool,
    #[arg(long, value_enum)]
    pub pairing: Option<PairingArg>,
    /// Sidecar with the ground-truth pairs, needed for supervised fits.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub min_buddies: Option<usize>,
    #[arg(long)]
    pub whiten: bool,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub ridge: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Map prediction ids (domain A names) to target ids through the recorded pairs.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// CSV output path; standard output when omitted.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to min(n - 1, d).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistcheckArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Pairs from a task sidecar; without one, rows with equal ids are paired.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_task(s: &str) -> std::result::Result<TaskName, String> {
    s.parse::<TaskName>().map_err(|e| e.to_string())
}

fn parse_mask(s: &str) -> std::result::Result<MaskRect, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [top, left, height, width] => Ok(MaskRect {
            top,
            left,
            height,
            width,
        }),
        _ => Err("expected top,left,height,width".into()),
    }
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let result = configure_threads().and_then(|()| dispatch(cli.command));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("LINTRA_THREADS") else {
        return Ok(());
    };
    let n: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Usage(format!(
            "LINTRA_THREADS must be a positive integer, got `{value}`"
        ))
    })?;
    if rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .is_err()
    {
        log::debug!("thread pool already initialised");
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::MakeTask(a) => cmd_make_task(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Translate(a) => cmd_translate(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Distcheck(a) => cmd_distcheck(a),
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "{} is not a directory",
            path.display()
        )))
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Usage(format!("{} does not exist", path.display())))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Runs `f` on the file at `path`, or on standard output.
fn with_output<F>(path: Option<&Path>, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let (res, name) = match path {
        Some(p) => {
            let mut w = create(p)?;
            (f(&mut w).and_then(|()| w.flush()), p.to_path_buf())
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            (
                f(&mut w).and_then(|()| w.flush()),
                PathBuf::from("<stdout>"),
            )
        }
    };
    res.map_err(|e| Error::io(name, e))
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let shape = ImageShape::new(args.height, args.width, args.channels)?;
    if args.n == 0 {
        return Err(Error::Usage("--n must be positive".into()));
    }
    if args.pixel_std <= 0.0 || !args.pixel_std.is_finite() || !args.exponent.is_finite() {
        return Err(Error::Usage(
            "--pixel-std must be positive and --exponent finite".into(),
        ));
    }
    let components = args.components.unwrap_or(shape.dim().min(256));
    let generator =
        PowerLawGenerator::new(shape, components, args.exponent, args.pixel_std, args.seed)?;
    let set = generator.sample(args.n, args.seed.wrapping_add(1), "img")?;
    img_io::write_directory(&set, &args.out)?;
    log::info!(
        "wrote {} images of shape {shape} to {}",
        set.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_make_task(args: MakeTaskArgs) -> Result<()> {
    require_dir(&args.input)?;
    let spec = TaskSpec {
        name: args.task,
        params: TaskParams {
            mask: args.mask,
            factor: args.factor,
        },
        protocol: args.protocol.into(),
        seed: args.seed,
    };
    let source = img_io::load_directory(&args.input, None)?;
    spec.validate(source.shape())?;
    let pair = make_domain_pair(&spec, &source)?;
    img_io::write_directory(&pair.a, &args.out_a)?;
    img_io::write_directory(&pair.b, &args.out_b)?;
    let sidecar_path = args.sidecar.unwrap_or_else(|| {
        args.out_a
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .join("task.json")
    });
    Sidecar::new(&spec, &pair).write(&sidecar_path)?;
    log::info!(
        "{}: A {} images ({}), B {} images ({}), sidecar {}",
        spec.name,
        pair.a.len(),
        pair.a.shape(),
        pair.b.len(),
        pair.b.shape(),
        sidecar_path.display()
    );
    Ok(())
}

fn fit_config(args: &FitArgs) -> Result<FitConfig> {
    let mut config = match &args.config {
        Some(path) => {
            require_file(path)?;
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<FitConfig>(&text)
                .map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?
        }
        None => FitConfig::default(),
    };
    if let Some(r) = args.rank {
        config.rank = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.no_skew_align {
        config.skew_align = false;
    }
    if let Some(p) = args.pairing {
        config.pairing = match p {
            PairingArg::Unsupervised => Pairing::Unsupervised,
            PairingArg::Supervised => Pairing::Supervised,
        };
    }
    if let Some(m) = args.max_iters {
        config.icp.max_iters = m;
    }
    if let Some(t) = args.tol {
        config.icp.tol = t;
    }
    if args.min_buddies.is_some() {
        config.icp.min_buddies = args.min_buddies;
    }
    if args.whiten {
        config.icp.whiten = true;
    }
    if let Some(m) = args.mode {
        config.icp.mode = match m {
            ModeArg::Orthogonal => MapMode::Orthogonal,
            ModeArg::UnrestrictedLinear => MapMode::UnrestrictedLinear,
        };
    }
    if let Some(r) = args.ridge {
        config.icp.ridge = r;
    }

    if config.rank == 0 {
        return Err(Error::Usage("rank must be at least 1".into()));
    }
    if config.icp.max_iters == 0 {
        return Err(Error::Usage("max-iters must be at least 1".into()));
    }
    if config.icp.tol <= 0.0 || !config.icp.tol.is_finite() {
        return Err(Error::Usage("tol must be positive".into()));
    }
    if config.icp.ridge < 0.0 || !config.icp.ridge.is_finite() {
        return Err(Error::Usage("ridge must be non-negative".into()));
    }
    if config.icp.min_buddies == Some(0) {
        return Err(Error::Usage("min-buddies must be at least 1".into()));
    }
    if config.pairing == Pairing::Supervised && args.sidecar.is_none() {
        return Err(Error::Usage("supervised pairing needs --sidecar".into()));
    }
    Ok(config)
}

fn check_rank(set: &ImageSet, rank: usize, which: &str) -> Result<()> {
    let max = (set.len() - 1).min(set.dim());
    if rank > max {
        return Err(Error::Usage(format!(
            "rank {rank} exceeds min(n - 1, d) = {max} for domain {which} ({} images of {})",
            set.len(),
            set.shape()
        )));
    }
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let config = fit_config(&args)?;
    require_dir(&args.a)?;
    require_dir(&args.b)?;
    if let Some(s) = &args.sidecar {
        require_file(s)?;
    }
    let a = img_io::load_directory(&args.a, None)?;
    let b = img_io::load_directory(&args.b, None)?;
    check_rank(&a, config.rank, "A")?;
    check_rank(&b, config.rank, "B")?;
    let pairing = match (config.pairing, &args.sidecar) {
        (Pairing::Supervised, Some(path)) => Some(Sidecar::read(path)?.correspondence(&a, &b)?),
        _ => None,
    };
    log::info!(
        "fitting rank {} on A {} x {} and B {} x {} ({:?})",
        config.rank,
        a.len(),
        a.shape(),
        b.len(),
        b.shape(),
        config.pairing
    );
    let translator = lintra_core::fit(&a, &b, &config, pairing.as_ref())?.with_created(timestamp());
    let map = translator.map();
    match map.deltas.last() {
        Some(d) => log::info!(
            "fit done: {} iterations, final |dQ| = {d:.3e}, converged = {}",
            map.iterations_run,
            map.converged
        ),
        None => log::info!("fit done: single solve on {} pairs", map.buddy_counts[0]),
    }
    model_store::save(&translator, &args.out)?;
    log::info!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_translate(args: TranslateArgs) -> Result<()> {
    require_file(&args.model)?;
    require_dir(&args.input)?;
    let translator = model_store::load(&args.model)?;
    let input = img_io::load_directory(&args.input, None)?;
    let out = translator.translate(&input)?;
    img_io::write_directory(&out, &args.out)?;
    log::info!(
        "translated {} images into {}",
        out.len(),
        args.out.display()
    );
    Ok(())
}

/// Targets reordered to follow `pred` and renamed to its ids, via the recorded pairs.
fn paired_targets(pred: &ImageSet, target: &ImageSet, sidecar: &Sidecar) -> Result<ImageSet> {
    let by_a: HashMap<&str, &str> = sidecar
        .pairs
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    let rows: HashMap<&str, usize> = target
        .ids()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut idx = Vec::with_capacity(pred.len());
    for id in pred.ids() {
        let b = by_a
            .get(id.as_str())
            .ok_or_else(|| Error::DataMismatch(format!("`{id}` has no recorded pair")))?;
        let row = rows.get(b).ok_or_else(|| {
            Error::DataMismatch(format!("target `{b}` (paired with `{id}`) not found"))
        })?;
        idx.push(*row);
    }
    Ok(target.select(&idx)?.with_ids(pred.ids().to_vec())?)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    require_dir(&args.pred)?;
    require_dir(&args.target)?;
    let sidecar = args.sidecar.as_deref().map(Sidecar::read).transpose()?;
    let pred = img_io::load_directory(&args.pred, None)?;
    let mut target = img_io::load_directory(&args.target, None)?;
    if let Some(s) = &sidecar {
        target = paired_targets(&pred, &target, s)?;
    }
    let report = evaluate(&pred, &target)?;
    with_output(args.csv.as_deref(), |w| report::eval_csv(&report, w))?;
    if let Some(path) = &args.json {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &report).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        writeln!(w)
            .and_then(|()| w.flush())
            .map_err(|e| Error::io(path, e))?;
    }
    log::info!(
        "{} images: mean mse {:.6e}, mean ssim {:.6}",
        report.per_image.len(),
        report.mean_mse,
        report.mean_ssim
    );
    Ok(())
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<()> {
    require_dir(&args.input)?;
    let set = img_io::load_directory(&args.input, None)?;
    let max = (set.len() - 1).min(set.dim());
    let rank = args.rank.unwrap_or(max);
    if rank == 0 || rank > max {
        return Err(Error::Usage(format!("rank must be in 1..={max}")));
    }
    let basis = fit_pca(&set, rank, args.seed)?;
    let rows = spectrum_report(&basis);
    with_output(args.csv.as_deref(), |w| report::spectrum_csv(&rows, w))?;
    let eig: Vec<f64> = rows.iter().map(|r| r.eigenvalue).collect();
    if let Some(slope) = lintra_core::pca::power_law_slope(&eig) {
        log::info!("log-log spectrum slope {slope:.3}");
    }
    Ok(())
}

fn pair_by_id(a: &ImageSet, b: &ImageSet) -> Result<Correspondence> {
    let rows: HashMap<&str, usize> = b
        .ids()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let pairs: Vec<(usize, usize)> = a
        .ids()
        .iter()
        .enumerate()
        .filter_map(|(i, id)| rows.get(id.as_str()).map(|&j| (i, j)))
        .collect();
    Ok(Correspondence::new(pairs, a.len(), b.len())?)
}

fn cmd_distcheck(args: DistcheckArgs) -> Result<()> {
    require_dir(&args.a)?;
    require_dir(&args.b)?;
    let sidecar = args.sidecar.as_deref().map(Sidecar::read).transpose()?;
    let a = img_io::load_directory(&args.a, None)?;
    let b = img_io::load_directory(&args.b, None)?;
    let pairing = match &sidecar {
        Some(s) => s.correspondence(&a, &b)?,
        None => pair_by_id(&a, &b)?,
    };
    let rows = distance_scatter(&a, &b, &pairing, args.pairs, args.seed)?;
    with_output(args.csv.as_deref(), |w| report::scatter_csv(&rows, w))?;
    let max_dev = rows.iter().map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    log::info!(
        "{} pairs: max |d_a - d_b| = {max_dev:.3e}, pearson r = {:.4}",
        rows.len(),
        pearson(&rows)
    );
    Ok(())
}
