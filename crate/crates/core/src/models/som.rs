//! SOM-driven models. Trained prototypes stand in for the region means of
//! Chan-Vese: CSOM-CV and SOAC query two supervised maps, SOMCV and SOMCV_s
//! split a single unsupervised map between the two regions, and SOM-RAC
//! quantizes a locally smoothed image and compares it with local region
//! means.

use crate::error::{Error, Result};
use crate::evolve::{Multiplier, SpeedModel};
use crate::field::{ScalarField, VectorImage};
use crate::models::local::LocalPair;
use crate::models::{two_phase_speed, Lambdas, MeanPair};
use crate::regional::{local_full_mean, LocalMeanField};
use crate::som::{dist2, SomMap};

fn check_map(map: &SomMap, image: &VectorImage) -> Result<()> {
    if map.dim() != image.channels() {
        return Err(Error::dims(
            format!("{}-channel prototypes", image.channels()),
            format!("{}-channel", map.dim()),
        ));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    Ok(())
}

/// Foreground and background maps trained on labelled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPair {
    pub fg: SomMap,
    pub bg: SomMap,
}

impl MapPair {
    fn check(&self, image: &VectorImage) -> Result<()> {
        check_map(&self.fg, image)?;
        check_map(&self.bg, image)
    }
}

fn csomcv_from_means(image: &VectorImage, maps: &MapPair, lambdas: Lambdas, c_in: &[f64], c_out: &[f64]) -> ScalarField {
    let w_in = maps.fg.prototype(maps.fg.bmu_unchecked(c_in).0);
    let w_out = maps.bg.prototype(maps.bg.bmu_unchecked(c_out).0);
    two_phase_speed(image, lambdas, |_| w_in, |_| w_out)
}

/// `-l+ |I - w+|^2 + l- |I - w-|^2` where `w+` (`w-`) is the foreground
/// (background) map's BMU prototype for the inside (outside) mean.
pub fn csomcv_speed(image: &VectorImage, phi: &ScalarField, maps: &MapPair) -> Result<ScalarField> {
    maps.check(image)?;
    let (c_in, c_out) = MeanPair::default().resolve(image, &phi.nonnegative())?;
    Ok(csomcv_from_means(image, maps, Lambdas::default(), &c_in, &c_out))
}

/// CSOM-CV as a [`SpeedModel`].
#[derive(Debug, Clone)]
pub struct CsomCv {
    pub maps: MapPair,
    pub lambdas: Lambdas,
    means: MeanPair,
}

impl CsomCv {
    pub fn new(maps: MapPair, lambdas: Lambdas) -> Result<Self> {
        lambdas.validate()?;
        if maps.fg.dim() != maps.bg.dim() {
            return Err(Error::dims(format!("{}-dim maps", maps.fg.dim()), format!("{}-dim", maps.bg.dim())));
        }
        Ok(CsomCv {
            maps,
            lambdas,
            means: MeanPair::default(),
        })
    }
}

impl SpeedModel for CsomCv {
    fn name(&self) -> &'static str {
        "csomcv"
    }

    fn multiplier(&self) -> Multiplier {
        Multiplier::Dirac
    }

    fn speed(&mut self, image: &VectorImage, phi: &ScalarField) -> Result<ScalarField> {
        self.maps.check(image)?;
        let (c_in, c_out) = self.means.resolve(image, &phi.nonnegative())?;
        Ok(csomcv_from_means(image, &self.maps, self.lambdas, &c_in, &c_out))
    }
}

fn bmu_field(map: &SomMap, inputs: &VectorImage) -> VectorImage {
    let d = map.dim();
    let mut out = Vec::with_capacity(inputs.pixel_count() * d);
    for i in 0..inputs.pixel_count() {
        out.extend_from_slice(map.prototype(map.bmu_unchecked(inputs.pixel(i)).0));
    }
    VectorImage::from_vec(inputs.width(), inputs.height(), d, out).expect("dimensions preserved")
}

fn soac_from_means(maps: &MapPair, c_in: &LocalMeanField, c_out: &LocalMeanField) -> (VectorImage, VectorImage) {
    (bmu_field(&maps.fg, &c_in.values), bmu_field(&maps.bg, &c_out.values))
}

/// Per-pixel BMU prototypes of the foreground (background) map for the
/// local inside (outside) mean of width `sigma`.
pub fn soac_descriptors(
    image: &VectorImage,
    phi: &ScalarField,
    maps: &MapPair,
    sigma: f64,
) -> Result<(VectorImage, VectorImage)> {
    maps.check(image)?;
    check_sigma(sigma)?;
    let (c_in, c_out) = LocalPair::default().resolve(image, &phi.nonnegative(), sigma)?;
    Ok(soac_from_means(maps, &c_in, &c_out))
}

/// `-l+ |I - w+(x)|^2 + l- |I - w-(x)|^2` with the SOAC descriptors.
pub fn soac_speed(image: &VectorImage, phi: &ScalarField, maps: &MapPair, sigma: f64) -> Result<ScalarField> {
    let (w_in, w_out) = soac_descriptors(image, phi, maps, sigma)?;
    Ok(two_phase_speed(image, Lambdas::default(), |i| w_in.pixel(i), |i| w_out.pixel(i)))
}

/// SOAC as a [`SpeedModel`].
#[derive(Debug, Clone)]
pub struct Soac {
    pub maps: MapPair,
    pub sigma: f64,
    pub lambdas: Lambdas,
    means: LocalPair,
}

impl Soac {
    pub fn new(maps: MapPair, sigma: f64, lambdas: Lambdas) -> Result<Self> {
        check_sigma(sigma)?;
        lambdas.validate()?;
        Ok(Soac {
            maps,
            sigma,
            lambdas,
            means: LocalPair::default(),
        })
    }
}

impl SpeedModel for Soac {
    fn name(&self) -> &'static str {
        "soac"
    }

    fn multiplier(&self) -> Multiplier {
        Multiplier::Dirac
    }

    fn speed(&mut self, image: &VectorImage, phi: &ScalarField) -> Result<ScalarField> {
        self.maps.check(image)?;
        let (c_in, c_out) = self.means.resolve(image, &phi.nonnegative(), self.sigma)?;
        let (w_in, w_out) = soac_from_means(&self.maps, &c_in, &c_out);
        Ok(two_phase_speed(image, self.lambdas, |i| w_in.pixel(i), |i| w_out.pixel(i)))
    }

    fn diagnostic(&mut self, image: &VectorImage, phi: &ScalarField) -> Option<Result<ScalarField>> {
        Some(self.speed(image, phi))
    }
}

/// Split of a map's neurons between the two regions.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypePartition {
    pub fg: Vec<usize>,
    pub bg: Vec<usize>,
}

impl PrototypePartition {
    pub fn counts(&self) -> (usize, usize) {
        (self.fg.len(), self.bg.len())
    }
}

/// Assign neuron `n` to the foreground iff its prototype is at least as
/// close to the inside mean as to the outside mean.
pub fn partition_by_means(map: &SomMap, c_in: &[f64], c_out: &[f64]) -> PrototypePartition {
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for (n, w) in map.prototypes().enumerate() {
        if dist2(w, c_in) <= dist2(w, c_out) {
            fg.push(n);
        } else {
            bg.push(n);
        }
    }
    PrototypePartition { fg, bg }
}

/// [`partition_by_means`] with the current region means.
pub fn somcv_partition(map: &SomMap, image: &VectorImage, phi: &ScalarField) -> Result<PrototypePartition> {
    check_map(map, image)?;
    let inside = phi.nonnegative();
    let c_in = crate::regional::region_mean(image, &inside)?;
    let c_out = crate::regional::region_mean(image, &inside.complement())?;
    Ok(partition_by_means(map, &c_in, &c_out))
}

fn somcv_from_means(image: &VectorImage, map: &SomMap, lambdas: Lambdas, c_in: &[f64], c_out: &[f64]) -> ScalarField {
    let part = partition_by_means(map, c_in, c_out);
    // An empty side falls back to the single BMU of that side's mean.
    let side = |set: &[usize], mean: &[f64]| -> Vec<usize> {
        if set.is_empty() {
            vec![map.bmu_unchecked(mean).0]
        } else {
            set.to_vec()
        }
    };
    let fg = side(&part.fg, c_in);
    let bg = side(&part.bg, c_out);
    let (w, h) = image.dims();
    let data = (0..w * h)
        .map(|i| {
            let px = image.pixel(i);
            let e_in: f64 = fg.iter().map(|&n| dist2(px, map.prototype(n))).sum();
            let e_out: f64 = bg.iter().map(|&n| dist2(px, map.prototype(n))).sum();
            -lambdas.plus * e_in + lambdas.minus * e_out
        })
        .collect();
    ScalarField::from_vec(w, h, data).expect("dimensions preserved")
}

fn somcvs_from_means(image: &VectorImage, map: &SomMap, lambdas: Lambdas, c_in: &[f64], c_out: &[f64]) -> ScalarField {
    let w_in = map.prototype(map.bmu_unchecked(c_in).0);
    let w_out = map.prototype(map.bmu_unchecked(c_out).0);
    two_phase_speed(image, lambdas, |_| w_in, |_| w_out)
}

/// `-l+ sum_j |I - w_j+|^2 + l- sum_j |I - w_j-|^2` over the partition.
pub fn somcv_speed(image: &VectorImage, phi: &ScalarField, map: &SomMap) -> Result<ScalarField> {
    check_map(map, image)?;
    let (c_in, c_out) = MeanPair::default().resolve(image, &phi.nonnegative())?;
    Ok(somcv_from_means(image, map, Lambdas::default(), &c_in, &c_out))
}

/// `-l+ |I - w+|^2 + l- |I - w-|^2` with the single BMU of each region mean.
pub fn somcvs_speed(image: &VectorImage, phi: &ScalarField, map: &SomMap) -> Result<ScalarField> {
    check_map(map, image)?;
    let (c_in, c_out) = MeanPair::default().resolve(image, &phi.nonnegative())?;
    Ok(somcvs_from_means(image, map, Lambdas::default(), &c_in, &c_out))
}

/// SOMCV (`single = false`) or SOMCV_s (`single = true`) as a [`SpeedModel`].
#[derive(Debug, Clone)]
pub struct SomCv {
    pub map: SomMap,
    pub lambdas: Lambdas,
    pub single: bool,
    means: MeanPair,
}

impl SomCv {
    pub fn new(map: SomMap, lambdas: Lambdas, single: bool) -> Result<Self> {
        lambdas.validate()?;
        Ok(SomCv {
            map,
            lambdas,
            single,
            means: MeanPair::default(),
        })
    }
}

impl SpeedModel for SomCv {
    fn name(&self) -> &'static str {
        if self.single {
            "somcvs"
        } else {
            "somcv"
        }
    }

    fn multiplier(&self) -> Multiplier {
        Multiplier::Dirac
    }

    fn speed(&mut self, image: &VectorImage, phi: &ScalarField) -> Result<ScalarField> {
        check_map(&self.map, image)?;
        let (c_in, c_out) = self.means.resolve(image, &phi.nonnegative())?;
        Ok(if self.single {
            somcvs_from_means(image, &self.map, self.lambdas, &c_in, &c_out)
        } else {
            somcv_from_means(image, &self.map, self.lambdas, &c_in, &c_out)
        })
    }
}

/// Squared-distance differences below `SOMRAC_TIE * (1 + max)` count as
/// ties, so that local means equal up to rounding compare equal.
pub const SOMRAC_TIE: f64 = 1e-9;

/// Per-pixel SOM-RAC descriptors. `wb_plus` and `wb_minus` hold `wb` where
/// it is strictly closer to the inside (outside) local mean, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SomRacDescriptors {
    pub wb: VectorImage,
    pub wb_plus: VectorImage,
    pub wb_minus: VectorImage,
}

fn check_order(sigma_star: f64, sigma: f64) -> Result<()> {
    check_sigma(sigma_star)?;
    check_sigma(sigma)?;
    if sigma_star >= sigma {
        return Err(Error::ParamOrder { sigma_star, sigma });
    }
    Ok(())
}

fn somrac_split(wb: &VectorImage, c_in: &LocalMeanField, c_out: &LocalMeanField) -> SomRacDescriptors {
    let d = wb.channels();
    let n = wb.pixel_count();
    let mut plus = vec![0.0; n * d];
    let mut minus = vec![0.0; n * d];
    for i in 0..n {
        let w = wb.pixel(i);
        let a_in = dist2(w, c_in.values.pixel(i));
        let a_out = dist2(w, c_out.values.pixel(i));
        let tie = SOMRAC_TIE * (1.0 + a_in.max(a_out));
        if a_in + tie < a_out {
            plus[i * d..(i + 1) * d].copy_from_slice(w);
        } else if a_in > a_out + tie {
            minus[i * d..(i + 1) * d].copy_from_slice(w);
        }
    }
    let (width, height) = wb.dims();
    SomRacDescriptors {
        wb: wb.clone(),
        wb_plus: VectorImage::from_vec(width, height, d, plus).expect("dimensions preserved"),
        wb_minus: VectorImage::from_vec(width, height, d, minus).expect("dimensions preserved"),
    }
}

/// BMU prototype of the `sigma_star` local mean at every pixel.
pub fn somrac_bmu_field(image: &VectorImage, map: &SomMap, sigma_star: f64) -> Result<VectorImage> {
    check_map(map, image)?;
    let c = local_full_mean(image, sigma_star)?;
    Ok(bmu_field(map, &c.values))
}

/// SOM-RAC descriptors for the current contour.
pub fn somrac_descriptors(
    image: &VectorImage,
    phi: &ScalarField,
    map: &SomMap,
    sigma_star: f64,
    sigma: f64,
) -> Result<SomRacDescriptors> {
    check_order(sigma_star, sigma)?;
    let wb = somrac_bmu_field(image, map, sigma_star)?;
    let (c_in, c_out) = LocalPair::default().resolve(image, &phi.nonnegative(), sigma)?;
    Ok(somrac_split(&wb, &c_in, &c_out))
}

fn somrac_from(image: &VectorImage, lambdas: Lambdas, d: &SomRacDescriptors) -> ScalarField {
    two_phase_speed(image, lambdas, |i| d.wb_plus.pixel(i), |i| d.wb_minus.pixel(i))
}

/// `-l+ |I - wb+(x)|^2 + l- |I - wb-(x)|^2`.
pub fn somrac_speed(
    image: &VectorImage,
    phi: &ScalarField,
    map: &SomMap,
    sigma_star: f64,
    sigma: f64,
) -> Result<ScalarField> {
    let d = somrac_descriptors(image, phi, map, sigma_star, sigma)?;
    Ok(somrac_from(image, Lambdas::default(), &d))
}

/// SOM-RAC as a [`SpeedModel`]. The quantized image does not depend on the
/// contour and is computed once.
#[derive(Debug, Clone)]
pub struct SomRac {
    pub map: SomMap,
    pub sigma_star: f64,
    pub sigma: f64,
    pub lambdas: Lambdas,
    wb: Option<VectorImage>,
    means: LocalPair,
}

impl SomRac {
    pub fn new(map: SomMap, sigma_star: f64, sigma: f64, lambdas: Lambdas) -> Result<Self> {
        check_order(sigma_star, sigma)?;
        lambdas.validate()?;
        Ok(SomRac {
            map,
            sigma_star,
            sigma,
            lambdas,
            wb: None,
            means: LocalPair::default(),
        })
    }
}

impl SpeedModel for SomRac {
    fn name(&self) -> &'static str {
        "somrac"
    }

    fn multiplier(&self) -> Multiplier {
        Multiplier::Dirac
    }

    fn speed(&mut self, image: &VectorImage, phi: &ScalarField) -> Result<ScalarField> {
        let stale = match &self.wb {
            Some(wb) => wb.dims() != image.dims(),
            None => true,
        };
        if stale {
            self.wb = Some(somrac_bmu_field(image, &self.map, self.sigma_star)?);
        }
        let wb = self.wb.as_ref().expect("just computed");
        let (c_in, c_out) = self.means.resolve(image, &phi.nonnegative(), self.sigma)?;
        let d = somrac_split(wb, &c_in, &c_out);
        Ok(somrac_from(image, self.lambdas, &d))
    }
}
