//! End-to-end runs: generate or load, add noise, train, evolve, score.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::{evolve, EvolveParams, Multiplier, SegmentationResult, SpeedModel, TimeStep};
use crate::field::{Mask, Rect, ScalarField, VectorImage};
use crate::grid::init_levelset_rect;
use crate::harness::metrics::{prf, Prf};
use crate::harness::synth::{gen_synthetic, preset, NoiseSpec, SynthSpec};
use crate::models::global::{ChanVese, CvParams, Gsrpf, Sbgfrls};
use crate::models::local::{gmm_fit, kde_fit, Densities, LogLikelihood, Lrcv, LrcvParams};
use crate::models::som::{CsomCv, MapPair, Soac, SomCv, SomRac};
use crate::models::Lambdas;
use crate::netpbm::{read_image, read_mask};
use crate::som::{csom_train, maps_to_text, som_fit, Origin, SomMap, SomTopology, TrainingSchedule, TrainingSet};

/// Every speed model the harness can build, plus a zero-force stub.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Cv,
    Sbgfrls,
    Gsrpf,
    Lrcv,
    Kde,
    Gmm,
    Csomcv,
    Soac,
    Somcv,
    Somcvs,
    Somrac,
    /// `S = 0` everywhere.
    Null,
}

impl ModelKind {
    pub const ALL: [ModelKind; 12] = [
        ModelKind::Cv,
        ModelKind::Sbgfrls,
        ModelKind::Gsrpf,
        ModelKind::Lrcv,
        ModelKind::Kde,
        ModelKind::Gmm,
        ModelKind::Csomcv,
        ModelKind::Soac,
        ModelKind::Somcv,
        ModelKind::Somcvs,
        ModelKind::Somrac,
        ModelKind::Null,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cv => "cv",
            ModelKind::Sbgfrls => "sbgfrls",
            ModelKind::Gsrpf => "gsrpf",
            ModelKind::Lrcv => "lrcv",
            ModelKind::Kde => "kde",
            ModelKind::Gmm => "gmm",
            ModelKind::Csomcv => "csomcv",
            ModelKind::Soac => "soac",
            ModelKind::Somcv => "somcv",
            ModelKind::Somcvs => "somcvs",
            ModelKind::Somrac => "somrac",
            ModelKind::Null => "null",
        }
    }

    /// Models that need labelled foreground and background samples.
    pub fn supervised(self) -> bool {
        matches!(self, ModelKind::Kde | ModelKind::Gmm | ModelKind::Csomcv | ModelKind::Soac)
    }

    /// Models trained on every pixel of the image.
    pub fn unsupervised_som(self) -> bool {
        matches!(self, ModelKind::Somcv | ModelKind::Somcvs | ModelKind::Somrac)
    }

    /// Step rule when none is configured. Chan-Vese and LRCV move every
    /// pixel each step, so they take normalized front-like steps.
    pub fn default_time_step(self) -> TimeStep {
        match self {
            ModelKind::Cv | ModelKind::Lrcv => TimeStep::Normalized { cfl: DEFAULT_CFL },
            _ => TimeStep::Fixed(1.0),
        }
    }
}

/// Largest per-pixel update of the normalized baselines.
pub const DEFAULT_CFL: f64 = 0.5;

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param("model", format!("unknown model `{s}`")))
    }
}

/// Model parameters; `None` takes the model's default.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelParams {
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub lambda_plus: Option<f64>,
    pub lambda_minus: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub sigma_star: Option<f64>,
    pub beta: Option<f64>,
    pub k: Option<usize>,
    pub som_rows: Option<usize>,
    pub som_cols: Option<usize>,
    pub som_iterations: Option<usize>,
    pub eta0: Option<f64>,
    pub r0: Option<f64>,
}

impl ModelParams {
    pub fn lambdas(&self) -> Lambdas {
        Lambdas {
            plus: self.lambda_plus.unwrap_or(1.0),
            minus: self.lambda_minus.unwrap_or(1.0),
        }
    }

    pub fn sigma_for(&self, kind: ModelKind) -> f64 {
        self.sigma.unwrap_or(match kind {
            ModelKind::Soac => 0.1,
            _ => 30.0,
        })
    }

    pub fn topology_for(&self, kind: ModelKind, dim: usize) -> Result<SomTopology> {
        let (r, c) = match kind {
            ModelKind::Somrac => (4, 4),
            ModelKind::Somcv | ModelKind::Somcvs if dim > 1 => (3, 3),
            ModelKind::Somcv | ModelKind::Somcvs => (1, 5),
            _ => (1, 3),
        };
        SomTopology::new(self.som_rows.unwrap_or(r), self.som_cols.unwrap_or(c))
    }

    pub fn schedule_for(&self, kind: ModelKind, topology: SomTopology, seed: u64) -> TrainingSchedule {
        let base = if kind == ModelKind::Soac {
            TrainingSchedule::soac(seed)
        } else {
            TrainingSchedule::standard(topology, seed)
        };
        TrainingSchedule::with(
            self.eta0.unwrap_or(base.eta0),
            self.r0.unwrap_or(base.r0),
            self.som_iterations.unwrap_or(base.t_max),
            seed,
        )
    }
}

/// Labelled pixels for the supervised models.
#[derive(Debug, Clone, PartialEq)]
pub enum Training {
    None,
    /// This many pixels drawn at random from each side of the truth mask.
    Sample { per_region: usize },
    Masks { fg: Mask, bg: Mask },
    MaskFiles { fg: PathBuf, bg: PathBuf },
}

/// Where the image comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    Preset(String),
    Spec(SynthSpec),
    Files { image: PathBuf, truth: PathBuf },
}

/// One fully specified run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Label in the report; defaults to the preset or file name.
    pub name: Option<String>,
    pub source: ImageSource,
    pub noise: NoiseSpec,
    /// Seeds the noise, the training-pixel draw and SOM training.
    pub seed: u64,
    pub model: ModelKind,
    pub params: ModelParams,
    /// `None` in `time_step` position means the model's default.
    pub evolve: EvolveParams,
    pub time_step: Option<TimeStep>,
    pub init: Rect,
    pub training: Training,
    /// When false, `wall_ms` is reported as 0 so reports are reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(source: ImageSource, model: ModelKind, init: Rect) -> Self {
        ExperimentConfig {
            name: None,
            source,
            noise: NoiseSpec::None,
            seed: 0,
            model,
            params: ModelParams::default(),
            evolve: EvolveParams::default(),
            time_step: None,
            init,
            training: Training::None,
            timing: true,
        }
    }

    pub fn image_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match &self.source {
            ImageSource::Preset(p) => p.clone(),
            ImageSource::Spec(s) => format!("synthetic{}x{}", s.width, s.height),
            ImageSource::Files { image, .. } => image
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| image.display().to_string()),
        }
    }

    /// Evolution parameters with the model's default step filled in.
    pub fn evolve_params(&self) -> EvolveParams {
        EvolveParams {
            time_step: self.time_step.unwrap_or_else(|| self.model.default_time_step()),
            ..self.evolve.clone()
        }
    }

    /// Checks that need no image data.
    pub fn validate(&self) -> Result<()> {
        self.evolve_params().validate()?;
        if self.model.supervised() && self.training == Training::None {
            return Err(Error::param(
                "training",
                format!("model `{}` needs training pixels", self.model.name()),
            ));
        }
        if let Training::Sample { per_region: 0 } = self.training {
            return Err(Error::EmptyTrainingSet);
        }
        Ok(())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub model: String,
    pub image: String,
    pub seed: u64,
    pub prf: Prf,
    pub iterations: usize,
    pub wall_ms: f64,
}

pub const CSV_HEADER: &str = "model,image,seed,precision,recall,fmeasure,iterations,wall_ms";

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{},{:.3}",
            self.model,
            self.image,
            self.seed,
            self.prf.precision,
            self.prf.recall,
            self.prf.f_measure,
            self.iterations,
            self.wall_ms
        )
    }
}

pub fn to_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub result: SegmentationResult,
    pub image: VectorImage,
    pub truth: Mask,
}

/// Image and truth before noise.
pub fn load_source(source: &ImageSource) -> Result<(VectorImage, Mask)> {
    match source {
        ImageSource::Preset(name) => {
            let (img, truth) = gen_synthetic(&preset(name)?)?;
            Ok((VectorImage::from(img), truth))
        }
        ImageSource::Spec(spec) => {
            let (img, truth) = gen_synthetic(spec)?;
            Ok((VectorImage::from(img), truth))
        }
        ImageSource::Files { image, truth } => {
            let img = read_image(image)?.into_vector();
            let truth = read_mask(truth)?;
            if truth.dims() != img.dims() {
                return Err(Error::dims(
                    format!("{}x{} truth", img.width(), img.height()),
                    format!("{}x{}", truth.width(), truth.height()),
                ));
            }
            Ok((img, truth))
        }
    }
}

/// Noise applied channel by channel with per-channel seeds.
pub fn apply_noise(image: &VectorImage, noise: NoiseSpec, seed: u64) -> Result<VectorImage> {
    if noise == NoiseSpec::None {
        return Ok(image.clone());
    }
    let channels = (0..image.channels())
        .map(|c| noise.apply(&image.channel(c), seed.wrapping_add(c as u64)))
        .collect::<Result<Vec<ScalarField>>>()?;
    VectorImage::from_channels(&channels)
}

/// `n` pixels of `region` drawn without replacement.
pub fn sample_mask(region: &Mask, n: usize, seed: u64) -> Result<Mask> {
    let idx: Vec<usize> = region.data().iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    if idx.is_empty() || n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let n = n.min(idx.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Mask::new(region.width(), region.height(), false);
    for k in sample(&mut rng, idx.len(), n) {
        let i = idx[k];
        out.set(i % region.width(), i / region.width(), true);
    }
    Ok(out)
}

const SAMPLE_SALT: u64 = 0x5eed_5a3b;

/// Foreground and background training masks, if the run has any.
pub fn training_masks(training: &Training, truth: &Mask, seed: u64) -> Result<Option<(Mask, Mask)>> {
    let masks = match training {
        Training::None => return Ok(None),
        Training::Sample { per_region } => (
            sample_mask(truth, *per_region, seed ^ SAMPLE_SALT)?,
            sample_mask(&truth.complement(), *per_region, seed ^ SAMPLE_SALT ^ 1)?,
        ),
        Training::Masks { fg, bg } => (fg.clone(), bg.clone()),
        Training::MaskFiles { fg, bg } => (read_mask(fg)?, read_mask(bg)?),
    };
    for m in [&masks.0, &masks.1] {
        if m.dims() != truth.dims() {
            return Err(Error::dims(
                format!("{}x{} training mask", truth.width(), truth.height()),
                format!("{}x{}", m.width(), m.height()),
            ));
        }
    }
    Ok(Some(masks))
}

struct NullModel;

impl SpeedModel for NullModel {
    fn name(&self) -> &'static str {
        "null"
    }

    fn multiplier(&self) -> Multiplier {
        Multiplier::Dirac
    }

    fn speed(&mut self, image: &VectorImage, _phi: &ScalarField) -> Result<ScalarField> {
        Ok(ScalarField::zeros(image.width(), image.height()))
    }
}

/// Build a model, training maps or densities as needed. `training` holds
/// the foreground and background masks for supervised models.
pub fn build_model(
    kind: ModelKind,
    params: &ModelParams,
    image: &VectorImage,
    training: Option<&(Mask, Mask)>,
    seed: u64,
) -> Result<Box<dyn SpeedModel>> {
    let lambdas = params.lambdas();
    let labelled = || -> Result<(TrainingSet, TrainingSet)> {
        let (fg, bg) = training.ok_or_else(|| {
            Error::param("training", format!("model `{}` needs training pixels", kind.name()))
        })?;
        Ok((
            TrainingSet::from_mask(image, fg, Origin::Foreground)?,
            TrainingSet::from_mask(image, bg, Origin::Background)?,
        ))
    };
    let model: Box<dyn SpeedModel> = match kind {
        ModelKind::Null => Box::new(NullModel),
        ModelKind::Cv => Box::new(ChanVese::new(CvParams {
            lambda_plus: lambdas.plus,
            lambda_minus: lambdas.minus,
            mu: params.mu.unwrap_or(0.0),
            nu: params.nu.unwrap_or(0.0),
        })?),
        ModelKind::Sbgfrls => {
            image.as_scalar("sbgfrls")?;
            Box::new(Sbgfrls::new(params.alpha.unwrap_or(20.0))?)
        }
        ModelKind::Gsrpf => {
            image.as_scalar("gsrpf")?;
            Box::new(Gsrpf::new())
        }
        ModelKind::Lrcv => Box::new(Lrcv::new(LrcvParams {
            sigma: params.sigma_for(kind),
            lambda_plus: lambdas.plus,
            lambda_minus: lambdas.minus,
        })?),
        ModelKind::Kde => {
            let (fg, bg) = labelled()?;
            Box::new(LogLikelihood::new(Densities::Kde(kde_fit(&fg, &bg)?), params.beta.unwrap_or(1.0))?)
        }
        ModelKind::Gmm => {
            let (fg, bg) = labelled()?;
            let k = params.k.unwrap_or(3);
            let densities = Densities::Gmm {
                fg: gmm_fit(&fg, k, seed)?.model,
                bg: gmm_fit(&bg, k, seed ^ 1)?.model,
            };
            Box::new(LogLikelihood::new(densities, params.beta.unwrap_or(1.0))?)
        }
        ModelKind::Csomcv | ModelKind::Soac | ModelKind::Somcv | ModelKind::Somcvs | ModelKind::Somrac => {
            som_model(kind, params, train_maps(kind, params, image, training, seed)?)?
        }
    };
    Ok(model)
}

/// Trained maps for a SOM-driven model.
#[derive(Debug, Clone, PartialEq)]
pub enum SomMaps {
    /// One map per class, for `csomcv` and `soac`.
    Pair(MapPair),
    /// One map of the whole image, for `somcv`, `somcvs` and `somrac`.
    Single(SomMap),
}

impl SomMaps {
    /// Text form readable by [`crate::som::maps_from_text`].
    pub fn to_text(&self) -> String {
        match self {
            SomMaps::Pair(p) => maps_to_text(&[("fg", &p.fg), ("bg", &p.bg)]),
            SomMaps::Single(m) => m.to_text("map"),
        }
    }
}

impl SomMaps {
    /// Pick the maps a model needs from a parsed map file: labels `fg` and
    /// `bg` for class maps, otherwise the only map in the file.
    pub fn from_labelled(kind: ModelKind, maps: Vec<(String, SomMap)>) -> Result<Self> {
        let bad = |reason: String| Error::param("map", reason);
        if matches!(kind, ModelKind::Csomcv | ModelKind::Soac) {
            let take = |label: &str| {
                maps.iter()
                    .find(|(l, _)| l == label)
                    .map(|(_, m)| m.clone())
                    .ok_or_else(|| bad(format!("model `{}` needs a map labelled `{label}`", kind.name())))
            };
            let fg = take("fg")?;
            let bg = take("bg")?;
            Ok(SomMaps::Pair(MapPair { fg, bg }))
        } else if kind.unsupervised_som() {
            match <[_; 1]>::try_from(maps) {
                Ok([(_, m)]) => Ok(SomMaps::Single(m)),
                Err(v) => Err(bad(format!("model `{}` needs exactly one map, file has {}", kind.name(), v.len()))),
            }
        } else {
            Err(bad(format!("model `{}` does not use a SOM", kind.name())))
        }
    }
}

/// Train the maps a SOM-driven model needs: one per class from the
/// labelled pixels, or one over every pixel of the image.
pub fn train_maps(
    kind: ModelKind,
    params: &ModelParams,
    image: &VectorImage,
    training: Option<&(Mask, Mask)>,
    seed: u64,
) -> Result<SomMaps> {
    let topology = params.topology_for(kind, image.channels())?;
    let schedule = params.schedule_for(kind, topology, seed);
    match kind {
        ModelKind::Csomcv | ModelKind::Soac => {
            let (fg, bg) = training.ok_or_else(|| {
                Error::param("training", format!("model `{}` needs training pixels", kind.name()))
            })?;
            let fg = TrainingSet::from_mask(image, fg, Origin::Foreground)?;
            let bg = TrainingSet::from_mask(image, bg, Origin::Background)?;
            let (fg_map, bg_map) = csom_train(&fg, &bg, topology, &schedule)?;
            Ok(SomMaps::Pair(MapPair { fg: fg_map, bg: bg_map }))
        }
        _ if kind.unsupervised_som() => Ok(SomMaps::Single(som_fit(
            topology,
            &TrainingSet::from_image(image),
            &schedule,
        )?)),
        _ => Err(Error::param("model", format!("model `{}` does not use a SOM", kind.name()))),
    }
}

/// Build a SOM-driven model from already trained maps.
pub fn som_model(kind: ModelKind, params: &ModelParams, maps: SomMaps) -> Result<Box<dyn SpeedModel>> {
    let lambdas = params.lambdas();
    let model: Box<dyn SpeedModel> = match (kind, maps) {
        (ModelKind::Csomcv, SomMaps::Pair(maps)) => Box::new(CsomCv::new(maps, lambdas)?),
        (ModelKind::Soac, SomMaps::Pair(maps)) => Box::new(Soac::new(maps, params.sigma_for(kind), lambdas)?),
        (ModelKind::Somrac, SomMaps::Single(map)) => Box::new(SomRac::new(
            map,
            params.sigma_star.unwrap_or(0.1),
            params.sigma_for(kind),
            lambdas,
        )?),
        (ModelKind::Somcv | ModelKind::Somcvs, SomMaps::Single(map)) => {
            Box::new(SomCv::new(map, lambdas, kind == ModelKind::Somcvs)?)
        }
        (kind, _) => {
            return Err(Error::param(
                "map",
                format!("wrong kind of map for model `{}`", kind.name()),
            ))
        }
    };
    Ok(model)
}

/// Generate, add noise, train, evolve from the rectangle and score.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let (clean, truth) = load_source(&config.source)?;
    config.init.check_inside(clean.width(), clean.height())?;
    let image = apply_noise(&clean, config.noise, config.seed)?;
    let training = training_masks(&config.training, &truth, config.seed)?;
    let start = Instant::now();
    let mut model = build_model(config.model, &config.params, &image, training.as_ref(), config.seed)?;
    let params = config.evolve_params();
    let phi0 = init_levelset_rect(image.width(), image.height(), config.init, params.rho)?;
    let result = evolve(&image, &phi0, model.as_mut(), &params)?;
    let wall_ms = if config.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let record = RunRecord {
        model: config.model.name().to_string(),
        image: config.image_name(),
        seed: config.seed,
        prf: prf(&result.mask, &truth)?,
        iterations: result.iterations,
        wall_ms,
    };
    Ok(RunOutcome {
        record,
        result,
        image,
        truth,
    })
}

/// Worker count from `LEVELCURVE_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("LEVELCURVE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("LEVELCURVE_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}

/// Run every configuration, at most `threads` at a time, and return the
/// records in configuration order.
pub fn run_batch(configs: &[ExperimentConfig], threads: Option<usize>) -> Result<Vec<RunRecord>> {
    for c in configs {
        c.validate()?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        configs
            .par_iter()
            .map(|c| run_experiment(c).map(|o| o.record))
            .collect()
    })
}

/// Keys accepted in configuration files.
pub const CONFIG_KEYS: &[&str] = &[
    "name",
    "image",
    "image_file",
    "truth_file",
    "sd",
    "salt_pepper",
    "seed",
    "model",
    "init",
    "training_pixels",
    "fg_mask",
    "bg_mask",
    "timing",
    "dt",
    "cfl",
    "eps",
    "rho",
    "sigma_prime",
    "max_iterations",
    "stable_window",
    "smoothing",
    "mu",
    "nu",
    "lambda_plus",
    "lambda_minus",
    "alpha",
    "sigma",
    "sigma_star",
    "beta",
    "k",
    "som_rows",
    "som_cols",
    "som_iterations",
    "eta0",
    "r0",
];

/// Parse a configuration file into the runs it describes.
///
/// Each non-blank line is `key = value`; `#` starts a comment. A value of
/// the form `a | b | c` is a sweep, and the runs are the cartesian product
/// of all sweeps, with earlier keys varying slowest.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>> {
    let mut entries: Vec<(usize, String, Vec<String>)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(bad(format!("unknown key `{key}`")));
        }
        if entries.iter().any(|(_, k, _)| k == key) {
            return Err(bad(format!("duplicate key `{key}`")));
        }
        let values: Vec<String> = value.split('|').map(|v| v.trim().to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(bad(format!("empty value for `{key}`")));
        }
        entries.push((line_no, key.to_string(), values));
    }
    for required in ["model", "init"] {
        if !entries.iter().any(|(_, k, _)| k == required) {
            return Err(Error::Config(format!("missing required key `{required}`")));
        }
    }
    let has = |k: &str| entries.iter().any(|(_, key, _)| key == k);
    if has("image") == has("image_file") {
        return Err(Error::Config("exactly one of `image` and `image_file` must be set".into()));
    }
    if has("image_file") != has("truth_file") {
        return Err(Error::Config("`image_file` needs `truth_file`".into()));
    }
    if has("sd") && has("salt_pepper") {
        return Err(Error::Config("`sd` and `salt_pepper` are exclusive".into()));
    }
    if has("fg_mask") != has("bg_mask") {
        return Err(Error::Config("`fg_mask` and `bg_mask` go together".into()));
    }

    let total: usize = entries.iter().map(|(_, _, v)| v.len()).product();
    let mut runs = Vec::with_capacity(total);
    for mut index in 0..total {
        // Last key varies fastest.
        let mut chosen = vec![""; entries.len()];
        for (slot, (_, _, values)) in chosen.iter_mut().zip(&entries).rev() {
            *slot = &values[index % values.len()];
            index /= values.len();
        }
        let pairs: Vec<(usize, &str, &str)> = entries
            .iter()
            .zip(&chosen)
            .map(|((line, key, _), v)| (*line, key.as_str(), *v))
            .collect();
        runs.push(build_config(&pairs)?);
    }
    Ok(runs)
}

fn build_config(pairs: &[(usize, &str, &str)]) -> Result<ExperimentConfig> {
    let get = |k: &str| pairs.iter().find(|(_, key, _)| *key == k).map(|(l, _, v)| (*l, *v));
    let (line, model) = get("model").expect("checked");
    let model = ModelKind::from_str(model).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    let (line, init) = get("init").expect("checked");
    let init = Rect::from_str(init).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    let source = match (get("image"), get("image_file"), get("truth_file")) {
        (Some((_, p)), _, _) => ImageSource::Preset(p.to_string()),
        (None, Some((_, i)), Some((_, t))) => ImageSource::Files {
            image: i.into(),
            truth: t.into(),
        },
        _ => unreachable!("checked"),
    };
    let mut c = ExperimentConfig::new(source, model, init);
    for &(line, key, value) in pairs {
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("`{key}` expects {what}, got `{value}`"),
        };
        let float = || value.parse::<f64>().map_err(|_| bad("a number"));
        let int = || value.parse::<usize>().map_err(|_| bad("a non-negative integer"));
        let flag = || match value {
            "on" | "true" | "yes" => Ok(true),
            "off" | "false" | "no" => Ok(false),
            _ => Err(bad("on or off")),
        };
        match key {
            "model" | "init" | "image" | "image_file" | "truth_file" => {}
            "name" => c.name = Some(value.to_string()),
            "sd" => c.noise = NoiseSpec::Gaussian { sd: float()? },
            "salt_pepper" => c.noise = NoiseSpec::SaltPepper { density: float()? },
            "seed" => c.seed = value.parse().map_err(|_| bad("a non-negative integer"))?,
            "training_pixels" => c.training = Training::Sample { per_region: int()? },
            "fg_mask" => {
                let (_, bg) = get("bg_mask").expect("checked");
                c.training = Training::MaskFiles {
                    fg: value.into(),
                    bg: bg.into(),
                }
            }
            "bg_mask" => {}
            "timing" => c.timing = flag()?,
            "dt" => c.time_step = Some(TimeStep::Fixed(float()?)),
            "cfl" => c.time_step = Some(TimeStep::Normalized { cfl: float()? }),
            "eps" => c.evolve.eps = float()?,
            "rho" => c.evolve.rho = float()?,
            "sigma_prime" => c.evolve.sigma_prime = float()?,
            "max_iterations" => c.evolve.max_iterations = int()?,
            "stable_window" => c.evolve.stable_window = int()?,
            "smoothing" => c.evolve.smoothing = flag()?,
            "mu" => c.params.mu = Some(float()?),
            "nu" => c.params.nu = Some(float()?),
            "lambda_plus" => c.params.lambda_plus = Some(float()?),
            "lambda_minus" => c.params.lambda_minus = Some(float()?),
            "alpha" => c.params.alpha = Some(float()?),
            "sigma" => c.params.sigma = Some(float()?),
            "sigma_star" => c.params.sigma_star = Some(float()?),
            "beta" => c.params.beta = Some(float()?),
            "k" => c.params.k = Some(int()?),
            "som_rows" => c.params.som_rows = Some(int()?),
            "som_cols" => c.params.som_cols = Some(int()?),
            "som_iterations" => c.params.som_iterations = Some(int()?),
            "eta0" => c.params.eta0 = Some(float()?),
            "r0" => c.params.r0 = Some(float()?),
            _ => unreachable!("keys are checked against CONFIG_KEYS"),
        }
    }
    if get("dt").is_some() && get("cfl").is_some() {
        return Err(Error::Config("`dt` and `cfl` are exclusive".into()));
    }
    c.validate().map_err(|e| match e {
        Error::Parse { .. } => e,
        other => Error::Config(other.to_string()),
    })?;
    Ok(c)
}
