//! Kohonen self-organizing maps.
//!
//! Maps are trained on-line: at each step one sample is drawn at random, its
//! best-matching unit (BMU) is found and every prototype is pulled toward the
//! sample with a strength that decays with grid distance from the BMU and
//! with time. Concurrent per-class maps (CSOM) classify an input by the map
//! holding the closest prototype.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{Mask, VectorImage};

/// Shape of the neuron grid. One-dimensional maps have `cols == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SomTopology {
    pub rows: usize,
    pub cols: usize,
}

impl SomTopology {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("topology", format!("{rows}x{cols} has no neurons")));
        }
        Ok(SomTopology { rows, cols })
    }

    /// A 1-D chain of `n` neurons.
    pub fn line(n: usize) -> Result<Self> {
        Self::new(n, 1)
    }

    pub fn neurons(&self) -> usize {
        self.rows * self.cols
    }

    /// Grid coordinates `(row, col)` of neuron `n` (row-major numbering).
    pub fn coords(&self, n: usize) -> (usize, usize) {
        (n / self.cols, n % self.cols)
    }

    /// Squared Euclidean grid distance between two neurons.
    pub fn grid_dist2(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        dr * dr + dc * dc
    }
}

/// A trained or freshly initialized map.
#[derive(Debug, Clone, PartialEq)]
pub struct SomMap {
    topology: SomTopology,
    dim: usize,
    prototypes: Vec<f64>,
}

impl SomMap {
    /// Build a map from explicit prototypes, `topology.neurons() * dim` values.
    pub fn from_prototypes(topology: SomTopology, dim: usize, prototypes: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if prototypes.len() != topology.neurons() * dim {
            return Err(Error::dims(
                format!("{} prototype values", topology.neurons() * dim),
                format!("{}", prototypes.len()),
            ));
        }
        if prototypes.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("prototypes", "must be finite"));
        }
        Ok(SomMap {
            topology,
            dim,
            prototypes,
        })
    }

    pub fn topology(&self) -> SomTopology {
        self.topology
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.topology.neurons()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn prototype(&self, n: usize) -> &[f64] {
        &self.prototypes[n * self.dim..(n + 1) * self.dim]
    }

    pub fn prototypes(&self) -> impl Iterator<Item = &[f64]> {
        self.prototypes.chunks_exact(self.dim)
    }

    fn check_dim(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.dim {
            return Err(Error::dims(format!("{}-vector", self.dim), format!("{}-vector", input.len())));
        }
        Ok(())
    }

    /// Index of the prototype nearest to `input`; ties go to the lowest index.
    pub fn bmu(&self, input: &[f64]) -> Result<usize> {
        self.check_dim(input)?;
        Ok(self.bmu_unchecked(input).0)
    }

    /// BMU index and squared distance, without the dimension check.
    pub(crate) fn bmu_unchecked(&self, input: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (n, w) in self.prototypes().enumerate() {
            let d2 = dist2(w, input);
            if d2 < best.1 {
                best = (n, d2);
            }
        }
        best
    }

    /// Prototype of the BMU for `input`.
    pub fn bmu_prototype(&self, input: &[f64]) -> Result<&[f64]> {
        Ok(self.prototype(self.bmu(input)?))
    }

    /// Euclidean distance from `input` to its BMU prototype.
    pub fn quantization_error(&self, input: &[f64]) -> Result<f64> {
        self.check_dim(input)?;
        Ok(self.bmu_unchecked(input).1.sqrt())
    }

    /// Plain-text form: a header line `som <rows> <cols> <dim> <label>`
    /// followed by one prototype per line, row-major.
    pub fn to_text(&self, label: &str) -> String {
        let mut out = format!(
            "som {} {} {} {}\n",
            self.topology.rows, self.topology.cols, self.dim, label
        );
        for w in self.prototypes() {
            let line: Vec<String> = w.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Render several labelled maps into one text document.
pub fn maps_to_text(maps: &[(&str, &SomMap)]) -> String {
    maps.iter().map(|(label, m)| m.to_text(label)).collect()
}

/// Parse every map in a document produced by [`maps_to_text`].
/// Blank lines and lines starting with `#` are ignored.
pub fn maps_from_text(text: &str) -> Result<Vec<(String, SomMap)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut maps = Vec::new();
    while let Some((line, header)) = lines.next() {
        let bad = |message: String| Error::Parse { line, message };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "som" {
            return Err(bad(format!("expected `som <rows> <cols> <dim> <label>`, got `{header}`")));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("`{s}` is not a count")));
        let topology = SomTopology::new(num(fields[1])?, num(fields[2])?).map_err(|e| bad(e.to_string()))?;
        let dim = num(fields[3])?;
        let mut protos = Vec::with_capacity(topology.neurons() * dim);
        for _ in 0..topology.neurons() {
            let (pline, text) = lines.next().ok_or_else(|| bad("missing prototype lines".into()))?;
            let values: Vec<&str> = text.split_whitespace().collect();
            if values.len() != dim {
                return Err(Error::Parse {
                    line: pline,
                    message: format!("expected {dim} values, got {}", values.len()),
                });
            }
            for v in values {
                protos.push(v.parse::<f64>().map_err(|_| Error::Parse {
                    line: pline,
                    message: format!("`{v}` is not a number"),
                })?);
            }
        }
        let map = SomMap::from_prototypes(topology, dim, protos).map_err(|e| bad(e.to_string()))?;
        maps.push((fields[4].to_string(), map));
    }
    Ok(maps)
}

/// Learning-rate and neighborhood decay for one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSchedule {
    pub eta0: f64,
    pub r0: f64,
    pub tau_eta: f64,
    pub tau_r: f64,
    pub t_max: usize,
    pub seed: u64,
}

impl TrainingSchedule {
    /// Defaults used by CSOM-CV, SOMCV and SOM-RAC: `eta0 = 0.9`,
    /// `r0 = max(M, N) / 2`, 10000 steps, `tau_eta = t_max`,
    /// `tau_r = t_max / ln(r0)`.
    pub fn standard(topology: SomTopology, seed: u64) -> Self {
        let r0 = topology.rows.max(topology.cols) as f64 / 2.0;
        Self::with(0.9, r0, 10_000, seed)
    }

    /// Defaults used by SOAC: `eta0 = 0.1`, `r0 = 0.5`.
    pub fn soac(seed: u64) -> Self {
        Self::with(0.1, 0.5, 10_000, seed)
    }

    /// Time constants derived from `t_max` and `r0`. When `r0 <= 1` the
    /// logarithm is not positive and `tau_r` falls back to `t_max`.
    pub fn with(eta0: f64, r0: f64, t_max: usize, seed: u64) -> Self {
        let t = t_max as f64;
        let tau_r = if r0 > 1.0 { t / r0.ln() } else { t };
        TrainingSchedule {
            eta0,
            r0,
            tau_eta: t,
            tau_r,
            t_max,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return Err(Error::param("eta0", format!("must lie in (0, 1], got {}", self.eta0)));
        }
        if !(self.r0 > 0.0) {
            return Err(Error::param("r0", format!("must be positive, got {}", self.r0)));
        }
        if !(self.tau_eta > 0.0) || !(self.tau_r > 0.0) {
            return Err(Error::param("tau", "time constants must be positive"));
        }
        if self.t_max == 0 {
            return Err(Error::param("t_max", "must be at least 1"));
        }
        Ok(())
    }

    /// `eta0 exp(-t / tau_eta)`.
    pub fn eta(&self, t: usize) -> f64 {
        self.eta0 * (-(t as f64) / self.tau_eta).exp()
    }

    /// `r0 exp(-t / tau_r)`.
    pub fn radius(&self, t: usize) -> f64 {
        self.r0 * (-(t as f64) / self.tau_r).exp()
    }

    /// Gaussian neighborhood weight for squared grid distance `d2` at step `t`.
    pub fn neighborhood(&self, d2: f64, t: usize) -> f64 {
        let r = self.radius(t);
        (-d2 / (2.0 * r * r)).exp()
    }
}

/// Where a training set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Foreground,
    Background,
    Unlabeled,
}

/// Flattened `dim`-vectors used to train a map.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    dim: usize,
    samples: Vec<f64>,
    pub origin: Origin,
}

impl TrainingSet {
    pub fn new(dim: usize, samples: Vec<f64>, origin: Origin) -> Result<Self> {
        if dim == 0 || !samples.len().is_multiple_of(dim) {
            return Err(Error::dims(format!("multiple of {dim} values"), format!("{}", samples.len())));
        }
        Ok(TrainingSet { dim, samples, origin })
    }

    /// Scalar samples.
    pub fn scalars(samples: Vec<f64>, origin: Origin) -> Self {
        TrainingSet {
            dim: 1,
            samples,
            origin,
        }
    }

    /// Pixels of `image` selected by `mask`.
    pub fn from_mask(image: &VectorImage, mask: &Mask, origin: Origin) -> Result<Self> {
        if mask.dims() != image.dims() {
            return Err(Error::dims(
                format!("{}x{} mask", image.width(), image.height()),
                format!("{}x{}", mask.width(), mask.height()),
            ));
        }
        let mut samples = Vec::new();
        for (i, &m) in mask.data().iter().enumerate() {
            if m {
                samples.extend_from_slice(image.pixel(i));
            }
        }
        Self::new(image.channels(), samples, origin)
    }

    /// Every pixel of `image`.
    pub fn from_image(image: &VectorImage) -> Self {
        TrainingSet {
            dim: image.channels(),
            samples: image.data().to_vec(),
            origin: Origin::Unlabeled,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    /// Smallest and largest component value.
    pub fn range(&self) -> Option<(f64, f64)> {
        if self.samples.is_empty() {
            return None;
        }
        let lo = self.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }
}

/// Prototypes drawn i.i.d. uniform over `range`, reproducible from `seed`.
pub fn som_init(topology: SomTopology, dim: usize, range: (f64, f64), seed: u64) -> SomMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_with(topology, dim, range, &mut rng)
}

fn init_with(topology: SomTopology, dim: usize, (lo, hi): (f64, f64), rng: &mut ChaCha8Rng) -> SomMap {
    let prototypes = (0..topology.neurons() * dim)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect();
    SomMap {
        topology,
        dim,
        prototypes,
    }
}

/// Train `map` on `data` for `schedule.t_max` steps.
pub fn som_train(map: &SomMap, data: &TrainingSet, schedule: &TrainingSchedule) -> Result<SomMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    train_with(map.clone(), data, schedule, &mut rng)
}

fn train_with(
    mut map: SomMap,
    data: &TrainingSet,
    schedule: &TrainingSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<SomMap> {
    schedule.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if data.dim() != map.dim {
        return Err(Error::dims(format!("{}-vector samples", map.dim), format!("{}-vector", data.dim())));
    }
    let n = map.len();
    let dim = map.dim;
    let dist: Vec<f64> = (0..n * n)
        .map(|i| map.topology.grid_dist2(i / n, i % n))
        .collect();
    for t in 0..schedule.t_max {
        let x = data.sample(rng.random_range(0..data.len()));
        let (b, _) = map.bmu_unchecked(x);
        let eta = schedule.eta(t);
        let r = schedule.radius(t);
        let inv = 1.0 / (2.0 * r * r);
        for j in 0..n {
            let h = (-dist[b * n + j] * inv).exp();
            let step = eta * h;
            let w = &mut map.prototypes[j * dim..(j + 1) * dim];
            for (wk, xk) in w.iter_mut().zip(x) {
                *wk += step * (xk - *wk);
            }
        }
    }
    Ok(map)
}

/// Initialize over the data range and train, all from `schedule.seed`.
pub fn som_fit(topology: SomTopology, data: &TrainingSet, schedule: &TrainingSchedule) -> Result<SomMap> {
    let range = data.range().ok_or(Error::EmptyTrainingSet)?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let map = init_with(topology, data.dim(), range, &mut rng);
    train_with(map, data, schedule, &mut rng)
}

/// Train one map per class on independent random streams derived from
/// `schedule.seed`. Returns `(foreground map, background map)`.
pub fn csom_train(
    fg: &TrainingSet,
    bg: &TrainingSet,
    topology: SomTopology,
    schedule: &TrainingSchedule,
) -> Result<(SomMap, SomMap)> {
    if fg.is_empty() || bg.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let fit = |data: &TrainingSet, stream: u64| -> Result<SomMap> {
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
        rng.set_stream(stream);
        let range = data.range().ok_or(Error::EmptyTrainingSet)?;
        let map = init_with(topology, data.dim(), range, &mut rng);
        train_with(map, data, schedule, &mut rng)
    };
    let (a, b) = rayon::join(|| fit(fg, 1), || fit(bg, 2));
    Ok((a?, b?))
}

/// Class label produced by CSOM classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Foreground,
    Background,
}

/// Label of the map whose BMU is closest to `input`; ties go to foreground.
pub fn csom_classify(maps: (&SomMap, &SomMap), input: &[f64]) -> Result<Label> {
    let qf = maps.0.quantization_error(input)?;
    let qb = maps.1.quantization_error(input)?;
    Ok(if qf <= qb { Label::Foreground } else { Label::Background })
}
