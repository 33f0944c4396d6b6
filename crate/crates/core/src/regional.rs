//! Regional intensity descriptors: means and medians over masks, and
//! Gaussian-weighted local means around every pixel.

use crate::error::{Error, Result};
use crate::field::{Mask, ScalarField, VectorImage};
use crate::grid::{convolve_in_domain, gaussian_kernel};

/// Below this the weighted-mean denominator is treated as zero.
pub const DENOM_FLOOR: f64 = 1e-12;

/// Mean, median and size of a masked scalar region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionDescriptor {
    pub mean: f64,
    pub median: f64,
    pub pixel_count: usize,
}

fn check_mask(width: usize, height: usize, mask: &Mask) -> Result<()> {
    if mask.dims() != (width, height) {
        return Err(Error::dims(
            format!("{width}x{height} mask"),
            format!("{}x{}", mask.width(), mask.height()),
        ));
    }
    Ok(())
}

/// Per-channel mean of the pixels selected by `mask`.
pub fn region_mean(image: &VectorImage, mask: &Mask) -> Result<Vec<f64>> {
    check_mask(image.width(), image.height(), mask)?;
    let d = image.channels();
    let mut acc = vec![0.0; d];
    let mut n = 0usize;
    for (i, &m) in mask.data().iter().enumerate() {
        if m {
            n += 1;
            for (a, v) in acc.iter_mut().zip(image.pixel(i)) {
                *a += v;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Ok(acc)
}

/// Mean of a scalar region.
pub fn region_mean_scalar(image: &ScalarField, mask: &Mask) -> Result<f64> {
    check_mask(image.width(), image.height(), mask)?;
    let (sum, n) = image
        .data()
        .iter()
        .zip(mask.data())
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(sum / n as f64)
}

/// Median of a scalar region; an even count averages the two middle values.
pub fn region_median(image: &ScalarField, mask: &Mask) -> Result<f64> {
    check_mask(image.width(), image.height(), mask)?;
    let mut vals: Vec<f64> = image
        .data()
        .iter()
        .zip(mask.data())
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    if vals.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n = vals.len();
    let mid = n / 2;
    let (_, &mut upper, _) = vals.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        return Ok(upper);
    }
    let lower = vals[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(0.5 * (lower + upper))
}

/// Mean, median and pixel count in one pass over the region.
pub fn describe_region(image: &ScalarField, mask: &Mask) -> Result<RegionDescriptor> {
    Ok(RegionDescriptor {
        mean: region_mean_scalar(image, mask)?,
        median: region_median(image, mask)?,
        pixel_count: mask.count(),
    })
}

/// Which part of the domain a local mean was taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Inside,
    Outside,
    Whole,
}

/// One weighted mean per pixel (per channel for vector images).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMeanField {
    pub values: VectorImage,
    pub sigma: f64,
    pub side: Side,
}

/// `sum_{y in mask} g(x-y) I(y) / sum_{y in mask} g(x-y)` for every pixel `x`.
///
/// Sums run over the domain only. Pixels whose neighborhood misses the mask
/// (denominator below [`DENOM_FLOOR`]) get the plain region mean.
pub fn local_weighted_mean(image: &VectorImage, mask: &Mask, sigma: f64) -> Result<LocalMeanField> {
    weighted_mean(image, mask, sigma, Side::Inside)
}

/// [`local_weighted_mean`] with the mask covering the whole domain.
pub fn local_full_mean(image: &VectorImage, sigma_star: f64) -> Result<LocalMeanField> {
    let mask = Mask::new(image.width(), image.height(), true);
    weighted_mean(image, &mask, sigma_star, Side::Whole)
}

pub(crate) fn weighted_mean(
    image: &VectorImage,
    mask: &Mask,
    sigma: f64,
    side: Side,
) -> Result<LocalMeanField> {
    let (w, h) = image.dims();
    check_mask(w, h, mask)?;
    // Taps beyond the raster extent never touch a pixel, and the ratio is
    // invariant to kernel scale, so the kernel can be cut at the extent.
    let full = (4.0 * sigma).ceil();
    let extent = w.max(h) as f64;
    let kernel = gaussian_kernel(sigma, Some(full.min(extent) as usize))?;
    let global = region_mean(image, mask)?;
    let indicator = mask.to_indicator();
    let den = convolve_in_domain(&indicator, &kernel);
    let d = image.channels();
    let mut out = vec![0.0; w * h * d];
    for c in 0..d {
        let masked = ScalarField::from_vec(
            w,
            h,
            image
                .channel(c)
                .data()
                .iter()
                .zip(indicator.data())
                .map(|(v, m)| v * m)
                .collect(),
        )?;
        let num = convolve_in_domain(&masked, &kernel);
        for i in 0..w * h {
            let q = den.data()[i];
            out[i * d + c] = if q > DENOM_FLOOR {
                num.data()[i] / q
            } else {
                global[c]
            };
        }
    }
    Ok(LocalMeanField {
        values: VectorImage::from_vec(w, h, d, out)?,
        sigma,
        side,
    })
}

/// Local means inside and outside the mask. A side whose region is empty is
/// reported as `Err(EmptyRegion)` without affecting the other.
pub fn local_region_means(
    image: &VectorImage,
    inside: &Mask,
    sigma: f64,
) -> (Result<LocalMeanField>, Result<LocalMeanField>) {
    (
        weighted_mean(image, inside, sigma, Side::Inside),
        weighted_mean(image, &inside.complement(), sigma, Side::Outside),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::convolve;

    fn scalar(w: usize, h: usize, v: &[f64]) -> ScalarField {
        ScalarField::from_vec(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn mean_examples() {
        let img = scalar(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let m = Mask::from_vec(4, 1, vec![true, true, false, false]).unwrap();
        assert_eq!(region_mean_scalar(&img, &m).unwrap(), 1.5);
        assert_eq!(region_mean(&VectorImage::from(&img), &m).unwrap(), vec![1.5]);
        let c = ScalarField::filled(3, 3, 7.0);
        let any = Mask::from_fn(3, 3, |x, y| x == y);
        assert_eq!(region_mean_scalar(&c, &any).unwrap(), 7.0);
        let empty = Mask::new(4, 1, false);
        assert!(matches!(region_mean_scalar(&img, &empty), Err(Error::EmptyRegion)));
        assert!(matches!(region_median(&img, &empty), Err(Error::EmptyRegion)));
    }

    #[test]
    fn median_examples() {
        let all3 = Mask::new(3, 1, true);
        assert_eq!(region_median(&scalar(3, 1, &[200.0, 100.0, 150.0]), &all3).unwrap(), 150.0);
        let all2 = Mask::new(2, 1, true);
        assert_eq!(region_median(&scalar(2, 1, &[200.0, 100.0]), &all2).unwrap(), 150.0);
        let all5 = Mask::new(5, 1, true);
        let bin = scalar(5, 1, &[255.0, 0.0, 255.0, 0.0, 255.0]);
        assert_eq!(region_median(&bin, &all5).unwrap(), 255.0);
    }

    #[test]
    fn local_mean_of_constant_and_large_sigma() {
        let c = VectorImage::from(ScalarField::filled(7, 5, 42.0));
        let m = Mask::from_fn(7, 5, |x, _| x < 3);
        let f = local_weighted_mean(&c, &m, 1.3).unwrap();
        assert!(f.values.data().iter().all(|v| (v - 42.0).abs() < 1e-12));

        let img = VectorImage::from(ScalarField::from_fn(9, 8, |x, y| ((x * 31 + y * 17) % 23) as f64));
        let mask = Mask::from_fn(9, 8, |x, y| (x + y) % 3 == 0);
        let global = region_mean(&img, &mask).unwrap()[0];
        let f = local_weighted_mean(&img, &mask, 1.0e4).unwrap();
        assert!(f.values.data().iter().all(|v| (v - global).abs() < 1e-6));
    }

    #[test]
    fn local_mean_matches_brute_force() {
        let vals: Vec<f64> = (0..25).map(|i| if (i % 5) < 2 { 40.0 } else { 180.0 + i as f64 }).collect();
        let img = scalar(5, 5, &vals);
        let mask = Mask::from_fn(5, 5, |x, y| x + y < 5);
        let sigma: f64 = 1.0;
        let r = (4.0 * sigma).ceil() as isize;
        let f = local_weighted_mean(&VectorImage::from(&img), &mask, sigma).unwrap();
        for y in 0..5isize {
            for x in 0..5isize {
                let (mut num, mut den) = (0.0, 0.0);
                for sy in 0..5isize {
                    for sx in 0..5isize {
                        let (dx, dy) = (sx - x, sy - y);
                        if dx.abs() > r || dy.abs() > r || !mask.get(sx as usize, sy as usize) {
                            continue;
                        }
                        let g = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
                        num += g * img.get(sx as usize, sy as usize);
                        den += g;
                    }
                }
                let got = f.values.pixel((y * 5 + x) as usize)[0];
                assert!((got - num / den).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn full_mean_tiny_sigma_is_identity() {
        let img = ScalarField::from_fn(6, 6, |x, y| ((x * 53 + y * 11) % 256) as f64);
        let f = local_full_mean(&VectorImage::from(&img), 0.1).unwrap();
        for (a, b) in f.values.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn full_mean_step_edge_matches_ratio_oracle() {
        let img = ScalarField::from_fn(40, 4, |x, _| if x < 20 { 10.0 } else { 200.0 });
        let sigma = 1.7;
        let f = local_full_mean(&VectorImage::from(&img), sigma).unwrap();
        let k = gaussian_kernel(sigma, None).unwrap();
        let num = convolve_in_domain(&img, &k);
        let den = convolve_in_domain(&ScalarField::filled(40, 4, 1.0), &k);
        for i in 0..160 {
            assert!((f.values.data()[i] - num.data()[i] / den.data()[i]).abs() < 1e-9);
        }
        // Away from the border the ratio is the plain replicate-padded blur.
        let blur = convolve(&img, &k);
        assert!((f.values.pixel(19 + 40)[0] - blur.get(19, 1)).abs() < 1e-9);
    }

    #[test]
    fn region_sides_report_empty_independently() {
        let img = VectorImage::from(ScalarField::filled(3, 3, 1.0));
        let all = Mask::new(3, 3, true);
        let (inside, outside) = local_region_means(&img, &all, 1.0);
        assert!(inside.is_ok());
        assert!(matches!(outside, Err(Error::EmptyRegion)));
    }
}
