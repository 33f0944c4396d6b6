//! `levelcurve` command-line front end.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 on file-system errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};

use levelcurve::harness::experiment::threads_from_env;
use levelcurve::harness::{
    apply_noise, build_model, gen_synthetic, parse_config, preset, prf, run_batch, som_model, to_csv, train_maps,
    ModelKind, ModelParams, NoiseSpec, SomMaps, SynthSpec, PRESETS,
};
use levelcurve::models::{diagnostic_field, to_display};
use levelcurve::netpbm::{read_image, read_mask, write_image, write_mask, write_pgm};
use levelcurve::som::maps_from_text;
use levelcurve::evolve::evolve_with;
use levelcurve::{init_levelset_rect, EvolveParams, Rect, TimeStep, VectorImage};

#[derive(Parser)]
#[command(name = "levelcurve", version, about = "Level-set active contour segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic preset and its ground truth.
    Gen(GenArgs),
    /// Train SOM prototypes and write them as text.
    TrainSom(TrainArgs),
    /// Evolve a contour from a rectangle and write the final mask.
    Segment(Box<SegmentArgs>),
    /// Run every experiment of a config file and write a CSV report.
    Bench(BenchArgs),
    /// Print precision, recall and F-measure of a mask.
    Score(ScoreArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Preset name, or a file describing the layout.
    source: String,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(short, long)]
    truth: PathBuf,
    /// Gaussian noise standard deviation.
    #[arg(long, conflicts_with = "salt_pepper")]
    sd: Option<f64>,
    /// Salt-and-pepper density in [0, 1].
    #[arg(long)]
    salt_pepper: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(short, long)]
    image: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Foreground training mask (nonzero pixels are samples).
    #[arg(long, requires = "bg", conflicts_with = "unsup")]
    fg: Option<PathBuf>,
    /// Background training mask.
    #[arg(long, requires = "fg")]
    bg: Option<PathBuf>,
    /// Train one map on every pixel instead of one map per class.
    #[arg(long, required_unless_present = "fg")]
    unsup: bool,
    /// Model whose default topology and schedule to use.
    #[arg(long)]
    model: Option<ModelKind>,
    #[command(flatten)]
    som: SomArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SomArgs {
    #[arg(long)]
    som_rows: Option<usize>,
    #[arg(long)]
    som_cols: Option<usize>,
    /// Training steps.
    #[arg(long)]
    som_iterations: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    eta0: Option<f64>,
    /// Initial neighborhood radius.
    #[arg(long)]
    r0: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    lambda_plus: Option<f64>,
    #[arg(long)]
    lambda_minus: Option<f64>,
    /// SBGFRLS force scale.
    #[arg(long)]
    alpha: Option<f64>,
    /// Width of the local Gaussian window.
    #[arg(long)]
    sigma: Option<f64>,
    /// Width of the SOM-RAC pre-smoothing window.
    #[arg(long)]
    sigma_star: Option<f64>,
    /// Log-likelihood weight.
    #[arg(long)]
    beta: Option<f64>,
    /// Mixture components per class.
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    som: SomArgs,
}

impl ModelArgs {
    fn params(&self) -> ModelParams {
        ModelParams {
            mu: self.mu,
            nu: self.nu,
            lambda_plus: self.lambda_plus,
            lambda_minus: self.lambda_minus,
            alpha: self.alpha,
            sigma: self.sigma,
            sigma_star: self.sigma_star,
            beta: self.beta,
            k: self.k,
            som_rows: self.som.som_rows,
            som_cols: self.som.som_cols,
            som_iterations: self.som.som_iterations,
            eta0: self.som.eta0,
            r0: self.som.r0,
        }
    }
}

#[derive(Args)]
struct EvolveArgs {
    /// Fixed time step.
    #[arg(long, conflicts_with = "cfl")]
    dt: Option<f64>,
    /// Normalized step: largest per-pixel update.
    #[arg(long)]
    cfl: Option<f64>,
    /// Dirac width.
    #[arg(long)]
    eps: Option<f64>,
    /// Binarization amplitude.
    #[arg(long)]
    rho: Option<f64>,
    /// Width of the Gaussian regularizing phi.
    #[arg(long)]
    sigma_prime: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Unchanged masks needed to stop.
    #[arg(long)]
    stable_window: Option<usize>,
    /// Binarize phi without smoothing it.
    #[arg(long)]
    no_smoothing: bool,
}

impl EvolveArgs {
    fn params(&self, model: ModelKind) -> EvolveParams {
        let d = EvolveParams::default();
        EvolveParams {
            time_step: match (self.dt, self.cfl) {
                (Some(dt), _) => TimeStep::Fixed(dt),
                (None, Some(cfl)) => TimeStep::Normalized { cfl },
                (None, None) => model.default_time_step(),
            },
            eps: self.eps.unwrap_or(d.eps),
            rho: self.rho.unwrap_or(d.rho),
            sigma_prime: self.sigma_prime.unwrap_or(d.sigma_prime),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            stable_window: self.stable_window.unwrap_or(d.stable_window),
            smoothing: !self.no_smoothing,
            ..d
        }
    }
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    model: ModelKind,
    /// Initial rectangle `x,y,w,h`.
    #[arg(long)]
    init: Rect,
    #[arg(short, long)]
    image: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Pre-trained maps from `train-som`.
    #[arg(long, conflicts_with_all = ["fg", "bg"])]
    map: Option<PathBuf>,
    /// Foreground training mask.
    #[arg(long, requires = "bg")]
    fg: Option<PathBuf>,
    /// Background training mask.
    #[arg(long, requires = "fg")]
    bg: Option<PathBuf>,
    /// Ground truth; when given, the scores are printed.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    model_args: ModelArgs,
    #[command(flatten)]
    evolve_args: EvolveArgs,
    /// Write the model's data term on the final contour, scaled to 0..255.
    #[arg(long)]
    diagnostic: Option<PathBuf>,
    /// Write the energy after every iteration, one value per line.
    #[arg(long)]
    energy: Option<PathBuf>,
    /// Existing directory that receives one mask per iteration.
    #[arg(long)]
    dump_masks: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(short, long)]
    config: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Worker threads; defaults to LEVELCURVE_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).map_err(|source| levelcurve::Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    Ok(fs::read_to_string(path).map_err(|source| levelcurve::Error::Io {
        path: path.display().to_string(),
        source,
    })?)
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    let spec: SynthSpec = if PRESETS.contains(&a.source.as_str()) {
        preset(&a.source)?
    } else if Path::new(&a.source).is_file() {
        read_text(Path::new(&a.source))?.parse()?
    } else {
        bail!("`{}` is neither a preset ({}) nor a file", a.source, PRESETS.join(", "));
    };
    let noise = match (a.sd, a.salt_pepper) {
        (Some(sd), _) => NoiseSpec::Gaussian { sd },
        (None, Some(density)) => NoiseSpec::SaltPepper { density },
        (None, None) => NoiseSpec::None,
    };
    let (clean, truth) = gen_synthetic(&spec)?;
    let image = apply_noise(&VectorImage::from(clean), noise, a.seed)?;
    write_image(&a.output, &image)?;
    write_mask(&a.truth, &truth)?;
    Ok(())
}

fn train_som(a: TrainArgs) -> anyhow::Result<()> {
    let kind = match (a.model, a.unsup) {
        (Some(k), true) if !k.unsupervised_som() => bail!("model `{}` is not trained without labels", k.name()),
        (Some(k), false) if !k.supervised() || matches!(k, ModelKind::Kde | ModelKind::Gmm) => {
            bail!("model `{}` does not use class maps", k.name())
        }
        (Some(k), _) => k,
        (None, true) => ModelKind::Somcv,
        (None, false) => ModelKind::Csomcv,
    };
    let image = read_image(&a.image)?.into_vector();
    let training = match (&a.fg, &a.bg) {
        (Some(fg), Some(bg)) => Some((read_mask(fg)?, read_mask(bg)?)),
        _ => None,
    };
    let params = ModelParams {
        som_rows: a.som.som_rows,
        som_cols: a.som.som_cols,
        som_iterations: a.som.som_iterations,
        eta0: a.som.eta0,
        r0: a.som.r0,
        ..ModelParams::default()
    };
    let maps = train_maps(kind, &params, &image, training.as_ref(), a.seed)?;
    write_text(&a.output, &maps.to_text())
}

fn segment(a: SegmentArgs) -> anyhow::Result<()> {
    let image = read_image(&a.image)?.into_vector();
    let (w, h) = image.dims();
    a.init.check_inside(w, h)?;
    let truth = a.truth.as_deref().map(read_mask).transpose()?;
    if let Some(t) = &truth {
        if t.dims() != (w, h) {
            bail!("truth is {}x{}, image is {w}x{h}", t.width(), t.height());
        }
    }
    let mut evolve_params = a.evolve_args.params(a.model);
    evolve_params.record_energy = a.energy.is_some();
    evolve_params.validate()?;
    let params = a.model_args.params();
    let mut model = match &a.map {
        Some(path) => {
            let text = read_text(path)?;
            let maps = SomMaps::from_labelled(a.model, maps_from_text(&text)?)?;
            som_model(a.model, &params, maps)?
        }
        None => {
            let training = match (&a.fg, &a.bg) {
                (Some(fg), Some(bg)) => Some((read_mask(fg)?, read_mask(bg)?)),
                _ => None,
            };
            build_model(a.model, &params, &image, training.as_ref(), a.seed)?
        }
    };
    if let Some(dir) = &a.dump_masks {
        if !dir.is_dir() {
            bail!("--dump-masks: `{}` is not a directory", dir.display());
        }
    }
    let phi0 = init_levelset_rect(w, h, a.init, evolve_params.rho)?;
    let mut history = Vec::new();
    let result = evolve_with(&image, &phi0, model.as_mut(), &evolve_params, |_, mask| {
        if a.dump_masks.is_some() {
            history.push(mask.clone());
        }
        Ok(())
    })?;
    let diagnostic = match &a.diagnostic {
        Some(_) => Some(to_display(&diagnostic_field(&image, &result.phi.phi, model.as_mut())?)),
        None => None,
    };
    let energy = match (&a.energy, &result.energy_trace) {
        (Some(_), None) => bail!("model `{}` has no energy", a.model.name()),
        (_, trace) => trace.as_ref().map(|t| t.iter().map(|e| format!("{e:?}\n")).collect::<String>()),
    };
    let scores = truth.as_ref().map(|t| prf(&result.mask, t)).transpose()?;

    write_mask(&a.output, &result.mask)?;
    if let (Some(path), Some(field)) = (&a.diagnostic, &diagnostic) {
        write_pgm(path, field)?;
    }
    if let (Some(path), Some(text)) = (&a.energy, &energy) {
        write_text(path, text)?;
    }
    if let Some(dir) = &a.dump_masks {
        for (i, mask) in history.iter().enumerate() {
            write_mask(dir.join(format!("iter_{:04}.pgm", i + 1)), mask)?;
        }
    }
    eprintln!(
        "{} iterations{}",
        result.iterations,
        if result.converged { "" } else { " (not converged)" }
    );
    if let Some(s) = scores {
        println!("{:.6} {:.6} {:.6}", s.precision, s.recall, s.f_measure);
    }
    Ok(())
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let text = read_text(&a.config)?;
    let configs = parse_config(&text)?;
    let threads = match a.threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => Some(n),
        None => threads_from_env()?,
    };
    let records = run_batch(&configs, threads)?;
    write_text(&a.output, &to_csv(&records))
}

fn score(a: ScoreArgs) -> anyhow::Result<()> {
    let mask = read_mask(&a.mask)?;
    let truth = read_mask(&a.truth)?;
    let s = prf(&mask, &truth)?;
    println!("{:.6} {:.6} {:.6}", s.precision, s.recall, s.f_measure);
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let io = e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some()
            || c.downcast_ref::<levelcurve::Error>().is_some_and(levelcurve::Error::is_io)
    });
    if io {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::TrainSom(a) => train_som(a),
        Command::Segment(a) => segment(*a),
        Command::Bench(a) => bench(a),
        Command::Score(a) => score(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
