//! The contour evolution engine shared by every model.
//!
//! Each iteration computes the model's speed field `S`, takes one explicit
//! step `phi += dt * m * S` (with `m` the regularized Dirac of `phi` or
//! `|grad phi|`), resets `phi` to `+-rho`, and smooths it with a Gaussian.
//! The run stops once the foreground mask has stopped changing.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::field::{Mask, ScalarField, VectorImage};
use crate::grid::{
    binarize_levelset, convolve, dirac_unchecked, gaussian_kernel, gradient_magnitude, LevelSetField,
};

/// How the speed field is turned into a per-pixel update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplier {
    /// `dirac_eps(phi)`: every pixel moves, most strongly near the contour.
    Dirac,
    /// `|grad phi|`: only pixels on the smoothed front move.
    GradMag,
}

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    /// Constant `dt`.
    Fixed(f64),
    /// `dt = cfl / max |m S|`, so the largest update has magnitude `cfl`.
    Normalized { cfl: f64 },
}

/// Parameters of one evolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveParams {
    pub time_step: TimeStep,
    /// Width of the regularized Dirac.
    pub eps: f64,
    /// Binarization amplitude.
    pub rho: f64,
    /// Width of the Gaussian applied to `phi` after each step.
    pub sigma_prime: f64,
    pub max_iterations: usize,
    /// Number of consecutive unchanged masks that ends the run.
    pub stable_window: usize,
    /// When false `phi` is only binarized, never smoothed.
    pub smoothing: bool,
    pub record_energy: bool,
    /// Keep the last speed field in the result.
    pub keep_speed: bool,
}

impl Default for EvolveParams {
    fn default() -> Self {
        EvolveParams {
            time_step: TimeStep::Fixed(1.0),
            eps: 1.0,
            rho: 1.0,
            sigma_prime: 1.5,
            max_iterations: 1000,
            stable_window: 2,
            smoothing: true,
            record_energy: false,
            keep_speed: false,
        }
    }
}

impl EvolveParams {
    /// Smoothing off and energy recorded.
    pub fn diagnostic() -> Self {
        EvolveParams {
            smoothing: false,
            record_energy: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.time_step {
            TimeStep::Fixed(dt) if !(dt > 0.0) => {
                return Err(Error::param("dt", format!("must be positive, got {dt}")))
            }
            TimeStep::Normalized { cfl } if !(cfl > 0.0) => {
                return Err(Error::param("cfl", format!("must be positive, got {cfl}")))
            }
            _ => {}
        }
        if !(self.eps > 0.0) {
            return Err(Error::NonPositiveEps(self.eps));
        }
        if !(self.rho > 0.0) {
            return Err(Error::param("rho", format!("must be positive, got {}", self.rho)));
        }
        if !(self.sigma_prime > 0.0) {
            return Err(Error::NonPositiveSigma(self.sigma_prime));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        if self.stable_window == 0 {
            return Err(Error::param("stable_window", "must be at least 1"));
        }
        Ok(())
    }
}

/// A model's per-iteration force.
pub trait SpeedModel: Send {
    fn name(&self) -> &'static str;

    fn multiplier(&self) -> Multiplier;

    /// Speed field for the current `phi`. Models keep the descriptors of the
    /// previous call so that a region that empties out can reuse them.
    fn speed(&mut self, image: &VectorImage, phi: &ScalarField) -> Result<ScalarField>;

    /// The model's energy for a segmentation, when it has one.
    fn energy(&self, _image: &VectorImage, _mask: &Mask) -> Option<Result<f64>> {
        None
    }

    /// The raw per-pixel data term, for models that expose one.
    fn diagnostic(&mut self, _image: &VectorImage, _phi: &ScalarField) -> Option<Result<ScalarField>> {
        None
    }
}

/// Outcome of an evolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub mask: Mask,
    pub iterations: usize,
    pub converged: bool,
    /// Energy of the initial mask followed by one value per iteration.
    pub energy_trace: Option<Vec<f64>>,
    pub speed_field_snapshot: Option<ScalarField>,
    pub phi: LevelSetField,
}

/// True iff the last `stable_window + 1` masks are identical.
pub fn converged<'a, I>(history: I, stable_window: usize) -> bool
where
    I: IntoIterator<Item = &'a Mask>,
    I::IntoIter: DoubleEndedIterator,
{
    let mut recent = history.into_iter().rev().take(stable_window + 1);
    let Some(last) = recent.next() else {
        return false;
    };
    let mut seen = 1;
    for m in recent {
        if m != last {
            return false;
        }
        seen += 1;
    }
    seen == stable_window + 1
}

/// Run the model from `phi0` until the mask is stable or the iteration cap.
pub fn evolve(
    image: &VectorImage,
    phi0: &LevelSetField,
    model: &mut dyn SpeedModel,
    params: &EvolveParams,
) -> Result<SegmentationResult> {
    evolve_with(image, phi0, model, params, |_, _| Ok(()))
}

/// [`evolve`] calling `observer(iteration, mask)` after every iteration.
pub fn evolve_with<F>(
    image: &VectorImage,
    phi0: &LevelSetField,
    model: &mut dyn SpeedModel,
    params: &EvolveParams,
    mut observer: F,
) -> Result<SegmentationResult>
where
    F: FnMut(usize, &Mask) -> Result<()>,
{
    params.validate()?;
    let (w, h) = image.dims();
    phi0.phi.same_dims(w, h)?;
    let kernel = gaussian_kernel(params.sigma_prime, None)?;
    let rho = params.rho;

    let mut level = LevelSetField {
        phi: phi0.phi.clone(),
        rho,
    };
    let mut history: VecDeque<Mask> = VecDeque::with_capacity(params.stable_window + 2);
    history.push_back(level.mask());
    let mut trace = if params.record_energy {
        Some(vec![energy_of(&*model, image, &history[0])?])
    } else {
        None
    };
    let mut snapshot = None;
    let mut iterations = 0;
    let mut done = false;

    while iterations < params.max_iterations {
        iterations += 1;
        let s = model.speed(image, &level.phi)?;
        s.same_dims(w, h)?;
        let m = match model.multiplier() {
            Multiplier::Dirac => level.phi.map(|v| dirac_unchecked(v, params.eps)),
            Multiplier::GradMag => gradient_magnitude(&level.phi),
        };
        let dt = match params.time_step {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Normalized { cfl } => {
                let peak = m
                    .data()
                    .iter()
                    .zip(s.data())
                    .map(|(a, b)| (a * b).abs())
                    .fold(0.0, f64::max);
                if peak > 0.0 {
                    cfl / peak
                } else {
                    0.0
                }
            }
        };
        for ((p, a), b) in level.phi.data_mut().iter_mut().zip(m.data()).zip(s.data()) {
            *p += dt * a * b;
        }
        level = binarize_levelset(&level);
        if params.smoothing {
            level.phi = convolve(&level.phi, &kernel);
        }
        let mask = level.mask();
        observer(iterations, &mask)?;
        if let Some(t) = trace.as_mut() {
            t.push(energy_of(&*model, image, &mask)?);
        }
        if params.keep_speed {
            snapshot = Some(s);
        }
        history.push_back(mask);
        if history.len() > params.stable_window + 1 {
            history.pop_front();
        }
        if converged(&history, params.stable_window) {
            done = true;
            break;
        }
    }

    Ok(SegmentationResult {
        mask: history.back().cloned().expect("history is never empty"),
        iterations,
        converged: done,
        energy_trace: trace,
        speed_field_snapshot: snapshot,
        phi: level,
    })
}

fn energy_of(model: &dyn SpeedModel, image: &VectorImage, mask: &Mask) -> Result<f64> {
    match model.energy(image, mask) {
        Some(e) => e,
        None => Err(Error::param("record_energy", format!("model `{}` has no energy", model.name()))),
    }
}
