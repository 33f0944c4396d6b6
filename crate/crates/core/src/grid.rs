//! Raster field arithmetic: Gaussian kernels and convolution, regularized
//! Heaviside and Dirac functions, finite-difference gradients and curvature,
//! and the binary level-set representation used by every model.

use crate::error::{Error, Result};
use crate::field::{Mask, Rect, ScalarField};

/// Guard added to the gradient norm before normalizing it.
pub const GRAD_FLOOR: f64 = 1e-8;

/// A separable, truncated, renormalized Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// The 1-D taps, indexed `0..=2*radius` with the center at `radius`.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// The 2-D kernel as a row-major `(2r+1) x (2r+1)` field.
    pub fn taps_2d(&self) -> ScalarField {
        let n = self.taps.len();
        ScalarField::from_fn(n, n, |x, y| self.taps[x] * self.taps[y])
    }
}

/// Build a Gaussian of width `sigma`, truncated at `radius` (default
/// `ceil(4 sigma)`) and rescaled so its taps sum to one.
pub fn gaussian_kernel(sigma: f64, radius: Option<usize>) -> Result<GaussianKernel> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let radius = radius.unwrap_or_else(|| (4.0 * sigma).ceil() as usize);
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let k = i as f64 - radius as f64;
            (-k * k / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(GaussianKernel {
        sigma,
        radius,
        taps,
    })
}

#[derive(Clone, Copy)]
enum Padding {
    Replicate,
    Zero,
}

fn convolve_1d(src: &[f64], dst: &mut [f64], stride: usize, len: usize, taps: &[f64], pad: Padding) {
    let r = (taps.len() / 2) as isize;
    let n = len as isize;
    for i in 0..n {
        let mut acc = 0.0;
        match pad {
            Padding::Replicate => {
                for (t, &w) in taps.iter().enumerate() {
                    let j = (i + t as isize - r).clamp(0, n - 1);
                    acc += w * src[j as usize * stride];
                }
            }
            Padding::Zero => {
                let lo = (r - i).max(0);
                let hi = (n - 1 - i + r).min(2 * r);
                for t in lo..=hi {
                    let j = i + t - r;
                    acc += taps[t as usize] * src[j as usize * stride];
                }
            }
        }
        dst[i as usize * stride] = acc;
    }
}

fn separable(field: &ScalarField, kernel: &GaussianKernel, pad: Padding) -> ScalarField {
    let (w, h) = field.dims();
    let mut tmp = vec![0.0; w * h];
    let src = field.data();
    for y in 0..h {
        convolve_1d(&src[y * w..], &mut tmp[y * w..], 1, w, &kernel.taps, pad);
    }
    let mut out = vec![0.0; w * h];
    for x in 0..w {
        convolve_1d(&tmp[x..], &mut out[x..], w, h, &kernel.taps, pad);
    }
    ScalarField::from_vec(w, h, out).expect("dimensions preserved")
}

/// Convolve with replicate (Neumann) padding; constants are fixed points.
pub fn convolve(field: &ScalarField, kernel: &GaussianKernel) -> ScalarField {
    separable(field, kernel, Padding::Replicate)
}

/// Convolve summing only over pixels inside the domain. Used for the ratio
/// form of weighted means, where the padding must not add weight to pixels
/// near the border.
pub fn convolve_in_domain(field: &ScalarField, kernel: &GaussianKernel) -> ScalarField {
    separable(field, kernel, Padding::Zero)
}

/// `1` if `z >= 0`, else `0`.
#[inline]
pub fn heaviside(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Regularized Dirac `(1/pi) eps / (eps^2 + z^2)`.
pub fn dirac_eps(z: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::NonPositiveEps(eps));
    }
    Ok(dirac_unchecked(z, eps))
}

#[inline]
pub(crate) fn dirac_unchecked(z: f64, eps: f64) -> f64 {
    eps / (std::f64::consts::PI * (eps * eps + z * z))
}

/// Partial derivatives: central differences inside, one-sided at the border.
pub fn gradient(field: &ScalarField) -> (ScalarField, ScalarField) {
    let (w, h) = field.dims();
    let d = |a: f64, b: f64, span: f64| (a - b) / span;
    let gx = ScalarField::from_fn(w, h, |x, y| {
        if w == 1 {
            0.0
        } else if x == 0 {
            d(field.get(1, y), field.get(0, y), 1.0)
        } else if x == w - 1 {
            d(field.get(x, y), field.get(x - 1, y), 1.0)
        } else {
            d(field.get(x + 1, y), field.get(x - 1, y), 2.0)
        }
    });
    let gy = ScalarField::from_fn(w, h, |x, y| {
        if h == 1 {
            0.0
        } else if y == 0 {
            d(field.get(x, 1), field.get(x, 0), 1.0)
        } else if y == h - 1 {
            d(field.get(x, y), field.get(x, y - 1), 1.0)
        } else {
            d(field.get(x, y + 1), field.get(x, y - 1), 2.0)
        }
    });
    (gx, gy)
}

/// `sqrt(phi_x^2 + phi_y^2)` per pixel.
pub fn gradient_magnitude(field: &ScalarField) -> ScalarField {
    let (gx, gy) = gradient(field);
    let data = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(a, b)| a.hypot(*b))
        .collect();
    ScalarField::from_vec(field.width(), field.height(), data).expect("dimensions preserved")
}

/// Mean curvature `div(grad phi / |grad phi|)`.
pub fn curvature(phi: &ScalarField) -> ScalarField {
    let (w, h) = phi.dims();
    let (gx, gy) = gradient(phi);
    let mut nx = ScalarField::zeros(w, h);
    let mut ny = ScalarField::zeros(w, h);
    for i in 0..w * h {
        let a = gx.data()[i];
        let b = gy.data()[i];
        let norm = a.hypot(b) + GRAD_FLOOR;
        nx.data_mut()[i] = a / norm;
        ny.data_mut()[i] = b / norm;
    }
    let (nxx, _) = gradient(&nx);
    let (_, nyy) = gradient(&ny);
    let data = nxx.data().iter().zip(nyy.data()).map(|(a, b)| a + b).collect();
    ScalarField::from_vec(w, h, data).expect("dimensions preserved")
}

/// A level-set function together with its binarization amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    pub phi: ScalarField,
    pub rho: f64,
}

impl LevelSetField {
    /// Foreground `{phi >= 0}`.
    pub fn mask(&self) -> Mask {
        self.phi.nonnegative()
    }

    /// `+rho` on the mask, `-rho` elsewhere.
    pub fn from_mask(mask: &Mask, rho: f64) -> Self {
        let phi = ScalarField::from_vec(
            mask.width(),
            mask.height(),
            mask.data().iter().map(|&b| if b { rho } else { -rho }).collect(),
        )
        .expect("dimensions preserved");
        LevelSetField { phi, rho }
    }
}

/// `+rho` strictly inside `rect`, `0` on its outer pixel ring, `-rho` outside.
pub fn init_levelset_rect(width: usize, height: usize, rect: Rect, rho: f64) -> Result<LevelSetField> {
    if !(rho > 0.0) {
        return Err(Error::param("rho", format!("must be positive, got {rho}")));
    }
    rect.check_inside(width, height)?;
    let phi = ScalarField::from_fn(width, height, |x, y| {
        if rect.on_boundary(x, y) {
            0.0
        } else if rect.contains(x, y) {
            rho
        } else {
            -rho
        }
    });
    Ok(LevelSetField { phi, rho })
}

/// `phi <- rho (H(phi) - H(-phi))`: `+rho`, `-rho`, or `0` where `phi` is 0.
pub fn binarize_levelset(level: &LevelSetField) -> LevelSetField {
    let rho = level.rho;
    LevelSetField {
        phi: level.phi.map(|v| rho * (heaviside(v) - heaviside(-v))),
        rho,
    }
}
