//! Local and supervised statistical models: LRCV with Gaussian-weighted
//! region means, and the log-likelihood contour driven by KDE or GMM
//! densities learned from labelled samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolve::{Multiplier, SpeedModel};
use crate::field::{Mask, ScalarField, VectorImage};
use crate::grid::curvature;
use crate::models::{two_phase_speed, Fallback, Lambdas};
use crate::regional::{local_region_means, LocalMeanField, Side};
use crate::som::{dist2, TrainingSet};

/// LRCV locality and weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrcvParams {
    pub sigma: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

impl Default for LrcvParams {
    fn default() -> Self {
        LrcvParams {
            sigma: 30.0,
            lambda_plus: 1.0,
            lambda_minus: 1.0,
        }
    }
}

impl LrcvParams {
    fn lambdas(&self) -> Lambdas {
        Lambdas {
            plus: self.lambda_plus,
            minus: self.lambda_minus,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::NonPositiveSigma(self.sigma));
        }
        self.lambdas().validate()
    }
}

/// Local means inside and outside, with the empty-region fallback.
#[derive(Debug, Clone, Default)]
pub(crate) struct LocalPair {
    inside: Fallback<LocalMeanField>,
    outside: Fallback<LocalMeanField>,
}

impl LocalPair {
    pub(crate) fn resolve(
        &mut self,
        image: &VectorImage,
        mask: &Mask,
        sigma: f64,
    ) -> Result<(LocalMeanField, LocalMeanField)> {
        let (fresh_in, fresh_out) = local_region_means(image, mask, sigma);
        let global = |side| {
            let mean = image.mean();
            let d = mean.len();
            let data = (0..image.pixel_count()).flat_map(|_| mean.iter().copied()).collect();
            LocalMeanField {
                values: VectorImage::from_vec(image.width(), image.height(), d, data).expect("dimensions preserved"),
                sigma,
                side,
            }
        };
        let c_in = self.inside.resolve(fresh_in, || global(Side::Inside))?;
        let c_out = self.outside.resolve(fresh_out, || global(Side::Outside))?;
        Ok((c_in, c_out))
    }
}

fn lrcv_from_means(image: &VectorImage, params: &LrcvParams, c_in: &LocalMeanField, c_out: &LocalMeanField) -> ScalarField {
    two_phase_speed(image, params.lambdas(), |i| c_in.values.pixel(i), |i| c_out.values.pixel(i))
}

/// `-l+ |I - c+(x)|^2 + l- |I - c-(x)|^2` with Gaussian-weighted local means.
pub fn lrcv_speed(image: &VectorImage, phi: &ScalarField, params: &LrcvParams) -> Result<ScalarField> {
    params.validate()?;
    let (c_in, c_out) = LocalPair::default().resolve(image, &phi.nonnegative(), params.sigma)?;
    Ok(lrcv_from_means(image, params, &c_in, &c_out))
}

/// `l+ sum_in |I - c+(x)|^2 + l- sum_out |I - c-(x)|^2`.
pub fn lrcv_energy(image: &VectorImage, mask: &Mask, params: &LrcvParams) -> Result<f64> {
    params.validate()?;
    let (c_in, c_out) = local_region_means(image, mask, params.sigma);
    let (c_in, c_out) = (c_in?, c_out?);
    Ok(mask
        .data()
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let px = image.pixel(i);
            if m {
                params.lambda_plus * dist2(px, c_in.values.pixel(i))
            } else {
                params.lambda_minus * dist2(px, c_out.values.pixel(i))
            }
        })
        .sum())
}

/// LRCV as a [`SpeedModel`].
#[derive(Debug, Clone)]
pub struct Lrcv {
    pub params: LrcvParams,
    means: LocalPair,
}

impl Lrcv {
    pub fn new(params: LrcvParams) -> Result<Self> {
        params.validate()?;
        Ok(Lrcv {
            params,
            means: LocalPair::default(),
        })
    }
}

impl SpeedModel for Lrcv {
    fn name(&self) -> &'static str {
        "lrcv"
    }

    fn multiplier(&self) -> Multiplier {
        Multiplier::Dirac
    }

    fn speed(&mut self, image: &VectorImage, phi: &ScalarField) -> Result<ScalarField> {
        let (c_in, c_out) = self.means.resolve(image, &phi.nonnegative(), self.params.sigma)?;
        Ok(lrcv_from_means(image, &self.params, &c_in, &c_out))
    }

    fn energy(&self, image: &VectorImage, mask: &Mask) -> Option<Result<f64>> {
        Some(lrcv_energy(image, mask, &self.params))
    }
}

/// Smallest KDE bandwidth, in intensity units.
pub const KDE_MIN_BANDWIDTH: f64 = 0.5;

/// Which class a density describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Inside,
    Outside,
}

/// Kernel density estimate of each class from its training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    pub fg: TrainingSet,
    pub bg: TrainingSet,
    pub sigma_fg: f64,
    pub sigma_bg: f64,
}

/// Mean distance from each sample to its nearest other sample, floored.
pub fn mean_nn_distance(samples: &TrainingSet) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let total: f64 = if samples.dim() == 1 {
        let mut v: Vec<f64> = (0..n).map(|i| samples.sample(i)[0]).collect();
        v.sort_by(f64::total_cmp);
        (0..n)
            .map(|i| {
                let left = if i > 0 { v[i] - v[i - 1] } else { f64::INFINITY };
                let right = if i + 1 < n { v[i + 1] - v[i] } else { f64::INFINITY };
                left.min(right)
            })
            .sum()
    } else {
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dist2(samples.sample(i), samples.sample(j)))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .sum()
    };
    Ok((total / n as f64).max(KDE_MIN_BANDWIDTH))
}

/// One bandwidth per class from its mean nearest-neighbor distance.
pub fn kde_fit(fg: &TrainingSet, bg: &TrainingSet) -> Result<KdeModel> {
    if fg.dim() != bg.dim() {
        return Err(Error::dims(format!("{}-vector samples", fg.dim()), format!("{}-vector", bg.dim())));
    }
    Ok(KdeModel {
        sigma_fg: mean_nn_distance(fg)?,
        sigma_bg: mean_nn_distance(bg)?,
        fg: fg.clone(),
        bg: bg.clone(),
    })
}

/// `(1/|L|) sum_i K(|I - I_i| / sigma)` with the unit Gaussian `K`. The
/// kernel is not divided by `sigma`; only density ratios are used.
pub fn kde_density(model: &KdeModel, region: Region, intensity: &[f64]) -> f64 {
    let (set, sigma) = match region {
        Region::Inside => (&model.fg, model.sigma_fg),
        Region::Outside => (&model.bg, model.sigma_bg),
    };
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let inv = 1.0 / (2.0 * sigma * sigma);
    let sum: f64 = (0..set.len())
        .map(|i| (-dist2(intensity, set.sample(i)) * inv).exp())
        .sum();
    norm * sum / set.len() as f64
}

/// Smallest variance a GMM component may take.
pub const GMM_VARIANCE_FLOOR: f64 = 1e-2;
const EM_RESTARTS: u64 = 5;
const EM_MAX_ITER: usize = 500;
const EM_TOL: f64 = 1e-8;

/// Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl Gmm {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    fn log_component(&self, k: usize, x: &[f64]) -> f64 {
        let mut lp = self.weights[k].ln();
        for ((xi, m), v) in x.iter().zip(&self.means[k]).zip(&self.variances[k]) {
            lp += -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (xi - m).powi(2) / v);
        }
        lp
    }

    /// Log density at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let lps: Vec<f64> = (0..self.components()).map(|k| self.log_component(k, x)).collect();
        log_sum_exp(&lps)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// A fitted mixture and the log-likelihood after every EM iteration of the
/// winning restart.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub model: Gmm,
    pub log_likelihood: Vec<f64>,
}

/// Fit a `k`-component mixture by EM, keeping the best of five seeded
/// restarts. Panics if a log-likelihood sequence ever decreases.
pub fn gmm_fit(samples: &TrainingSet, k: usize, seed: u64) -> Result<GmmFit> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if samples.len() < k {
        return Err(Error::TooFewSamples {
            needed: k,
            got: samples.len(),
        });
    }
    let mut best: Option<GmmFit> = None;
    for restart in 0..EM_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart);
        let fit = em_run(samples, k, &mut rng);
        let better = match &best {
            None => true,
            Some(b) => fit.log_likelihood.last() > b.log_likelihood.last(),
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn em_run(samples: &TrainingSet, k: usize, rng: &mut ChaCha8Rng) -> GmmFit {
    let n = samples.len();
    let d = samples.dim();
    let mut global_mean = vec![0.0; d];
    for i in 0..n {
        for (g, x) in global_mean.iter_mut().zip(samples.sample(i)) {
            *g += x / n as f64;
        }
    }
    let mut global_var = vec![0.0; d];
    for i in 0..n {
        for ((g, x), m) in global_var.iter_mut().zip(samples.sample(i)).zip(&global_mean) {
            *g += (x - m).powi(2) / n as f64;
        }
    }
    global_var.iter_mut().for_each(|v| *v = v.max(GMM_VARIANCE_FLOOR));

    // Initial means: k distinct sample indices.
    let mut picks: Vec<usize> = Vec::with_capacity(k);
    while picks.len() < k {
        let j = rng.random_range(0..n);
        if !picks.contains(&j) {
            picks.push(j);
        }
    }
    let mut model = Gmm {
        weights: vec![1.0 / k as f64; k],
        means: picks.iter().map(|&j| samples.sample(j).to_vec()).collect(),
        variances: vec![global_var.clone(); k],
    };

    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut lps = vec![0.0; k];
    for iter in 0..EM_MAX_ITER {
        // E step, with the log-likelihood of the current parameters.
        let mut ll = 0.0;
        for i in 0..n {
            let x = samples.sample(i);
            for (c, lp) in lps.iter_mut().enumerate() {
                *lp = model.log_component(c, x);
            }
            let lse = log_sum_exp(&lps);
            ll += lse;
            for c in 0..k {
                resp[i * k + c] = (lps[c] - lse).exp();
            }
        }
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            assert!(
                ll >= prev - 1e-9 * prev.abs().max(1.0),
                "EM log-likelihood decreased from {prev} to {ll}"
            );
            trace.push(ll);
            if ((ll - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < EM_TOL {
                break;
            }
        } else {
            trace.push(ll);
        }
        if iter + 1 == EM_MAX_ITER {
            break;
        }
        // M step.
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            if nk <= 0.0 {
                continue;
            }
            model.weights[c] = nk / n as f64;
            let mut mean = vec![0.0; d];
            for i in 0..n {
                for (m, x) in mean.iter_mut().zip(samples.sample(i)) {
                    *m += resp[i * k + c] * x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut var = vec![0.0; d];
            for i in 0..n {
                for ((v, x), m) in var.iter_mut().zip(samples.sample(i)).zip(&mean) {
                    *v += resp[i * k + c] * (x - m).powi(2);
                }
            }
            var.iter_mut().for_each(|v| *v = (*v / nk).max(GMM_VARIANCE_FLOOR));
            model.means[c] = mean;
            model.variances[c] = var;
        }
        let total: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= total);
    }
    GmmFit {
        model,
        log_likelihood: trace,
    }
}

/// Smallest density admitted before taking a logarithm.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Class-conditional densities used by the log-likelihood contour.
#[derive(Debug, Clone, PartialEq)]
pub enum Densities {
    Kde(KdeModel),
    Gmm { fg: Gmm, bg: Gmm },
}

impl Densities {
    pub fn density(&self, region: Region, x: &[f64]) -> f64 {
        match (self, region) {
            (Densities::Kde(m), r) => kde_density(m, r, x),
            (Densities::Gmm { fg, .. }, Region::Inside) => fg.density(x),
            (Densities::Gmm { bg, .. }, Region::Outside) => bg.density(x),
        }
    }

    /// `log max(p_in, floor) - log max(p_out, floor)` per pixel.
    pub fn log_ratio(&self, image: &VectorImage) -> ScalarField {
        let data = (0..image.pixel_count())
            .map(|i| {
                let x = image.pixel(i);
                let p_in = self.density(Region::Inside, x).max(DENSITY_FLOOR);
                let p_out = self.density(Region::Outside, x).max(DENSITY_FLOOR);
                p_in.ln() - p_out.ln()
            })
            .collect();
        ScalarField::from_vec(image.width(), image.height(), data).expect("dimensions preserved")
    }
}

/// `beta kappa + log max(p_in, floor) - log max(p_out, floor)`.
pub fn loglik_speed<P, Q>(image: &VectorImage, phi: &ScalarField, p_in: P, p_out: Q, beta: f64) -> ScalarField
where
    P: Fn(&[f64]) -> f64,
    Q: Fn(&[f64]) -> f64,
{
    let kappa = (beta != 0.0).then(|| curvature(phi));
    let data = (0..image.pixel_count())
        .map(|i| {
            let x = image.pixel(i);
            let mut s = p_in(x).max(DENSITY_FLOOR).ln() - p_out(x).max(DENSITY_FLOOR).ln();
            if let Some(k) = &kappa {
                s += beta * k.data()[i];
            }
            s
        })
        .collect();
    ScalarField::from_vec(image.width(), image.height(), data).expect("dimensions preserved")
}

/// The log-likelihood contour as a [`SpeedModel`]. The log-ratio does not
/// depend on the contour and is computed once per image.
#[derive(Debug, Clone)]
pub struct LogLikelihood {
    pub densities: Densities,
    pub beta: f64,
    ratio: Option<ScalarField>,
}

impl LogLikelihood {
    pub fn new(densities: Densities, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::param("beta", "must be finite"));
        }
        Ok(LogLikelihood {
            densities,
            beta,
            ratio: None,
        })
    }

    fn ratio(&mut self, image: &VectorImage) -> &ScalarField {
        let stale = match &self.ratio {
            Some(r) => r.dims() != image.dims(),
            None => true,
        };
        if stale {
            self.ratio = Some(self.densities.log_ratio(image));
        }
        self.ratio.as_ref().expect("just computed")
    }
}

impl SpeedModel for LogLikelihood {
    fn name(&self) -> &'static str {
        match self.densities {
            Densities::Kde(_) => "kde",
            Densities::Gmm { .. } => "gmm",
        }
    }

    fn multiplier(&self) -> Multiplier {
        Multiplier::Dirac
    }

    fn speed(&mut self, image: &VectorImage, phi: &ScalarField) -> Result<ScalarField> {
        let beta = self.beta;
        let mut s = self.ratio(image).clone();
        if beta != 0.0 {
            let k = curvature(phi);
            for (v, kv) in s.data_mut().iter_mut().zip(k.data()) {
                *v += beta * kv;
            }
        }
        Ok(s)
    }

    fn diagnostic(&mut self, image: &VectorImage, _phi: &ScalarField) -> Option<Result<ScalarField>> {
        Some(Ok(self.ratio(image).clone()))
    }
}
