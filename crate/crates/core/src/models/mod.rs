//! Speed models. Every model implements [`SpeedModel`](crate::evolve::SpeedModel)
//! and keeps the region descriptors of its previous call, which it reuses
//! when a region empties out (the global image mean stands in on the first
//! call).

pub mod global;
pub mod local;
pub mod som;

use crate::error::{Error, Result};
use crate::evolve::SpeedModel;
use crate::field::{Mask, ScalarField, VectorImage};
use crate::regional::region_mean;

/// Weights of the inside and outside fitting terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambdas {
    pub plus: f64,
    pub minus: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Lambdas {
            plus: 1.0,
            minus: 1.0,
        }
    }
}

impl Lambdas {
    pub fn validate(&self) -> Result<()> {
        if !(self.plus >= 0.0) || !(self.minus >= 0.0) {
            return Err(Error::param("lambda", "weights must be non-negative"));
        }
        Ok(())
    }
}

/// Last successfully computed descriptor for one region.
#[derive(Debug, Clone)]
pub(crate) struct Fallback<T> {
    prev: Option<T>,
}

impl<T> Default for Fallback<T> {
    fn default() -> Self {
        Fallback { prev: None }
    }
}

impl<T: Clone> Fallback<T> {
    /// Pass through a fresh value, or substitute the previous one (else
    /// `first`) when the region is empty. Other errors propagate.
    pub(crate) fn resolve(&mut self, fresh: Result<T>, first: impl FnOnce() -> T) -> Result<T> {
        match fresh {
            Ok(v) => {
                self.prev = Some(v.clone());
                Ok(v)
            }
            Err(Error::EmptyRegion) => Ok(self.prev.clone().unwrap_or_else(first)),
            Err(e) => Err(e),
        }
    }
}

/// Per-channel region means with the empty-region fallback applied.
#[derive(Debug, Clone, Default)]
pub(crate) struct MeanPair {
    inside: Fallback<Vec<f64>>,
    outside: Fallback<Vec<f64>>,
}

impl MeanPair {
    pub(crate) fn resolve(&mut self, image: &VectorImage, mask: &Mask) -> Result<(Vec<f64>, Vec<f64>)> {
        let c_in = self.inside.resolve(region_mean(image, mask), || image.mean())?;
        let c_out = self
            .outside
            .resolve(region_mean(image, &mask.complement()), || image.mean())?;
        Ok((c_in, c_out))
    }
}

/// `-l+ |I - a|^2 + l- |I - b|^2` per pixel, with per-pixel `a` and `b`
/// supplied by closures returning D-vectors.
pub(crate) fn two_phase_speed<'a, A, B>(image: &VectorImage, lambdas: Lambdas, inside: A, outside: B) -> ScalarField
where
    A: Fn(usize) -> &'a [f64],
    B: Fn(usize) -> &'a [f64],
{
    let (w, h) = image.dims();
    let data = (0..w * h)
        .map(|i| {
            let px = image.pixel(i);
            -lambdas.plus * crate::som::dist2(px, inside(i)) + lambdas.minus * crate::som::dist2(px, outside(i))
        })
        .collect();
    ScalarField::from_vec(w, h, data).expect("dimensions preserved")
}

/// The raw per-pixel data term of a model that exposes one.
pub fn diagnostic_field(image: &VectorImage, phi: &ScalarField, model: &mut dyn SpeedModel) -> Result<ScalarField> {
    let name = model.name();
    model.diagnostic(image, phi).unwrap_or_else(|| {
        Err(Error::param(
            "model",
            format!("`{name}` has no per-pixel diagnostic field"),
        ))
    })
}

/// Min-max scale a field to 0..255 for display.
pub fn to_display(field: &ScalarField) -> ScalarField {
    let (lo, hi) = (field.min(), field.max());
    if hi > lo {
        field.map(|v| 255.0 * (v - lo) / (hi - lo))
    } else {
        field.map(|_| 0.0)
    }
}
