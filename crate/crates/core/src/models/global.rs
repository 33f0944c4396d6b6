//! Models driven by global region statistics: Chan-Vese, SBGFRLS and GSRPF.

use crate::error::{Error, Result};
use crate::evolve::{Multiplier, SpeedModel};
use crate::field::{Mask, ScalarField, VectorImage};
use crate::grid::curvature;
use crate::models::{two_phase_speed, Fallback, Lambdas, MeanPair};
use crate::regional::{region_mean, region_mean_scalar, region_median};

/// Chan-Vese weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvParams {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Curvature (length) weight.
    pub mu: f64,
    /// Area weight.
    pub nu: f64,
}

impl Default for CvParams {
    fn default() -> Self {
        CvParams {
            lambda_plus: 1.0,
            lambda_minus: 1.0,
            mu: 0.0,
            nu: 0.0,
        }
    }
}

impl CvParams {
    fn lambdas(&self) -> Lambdas {
        Lambdas {
            plus: self.lambda_plus,
            minus: self.lambda_minus,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lambdas().validate()?;
        if !self.mu.is_finite() || !self.nu.is_finite() {
            return Err(Error::param("mu/nu", "must be finite"));
        }
        Ok(())
    }
}

/// Number of 4-neighbor pixel pairs that straddle the contour.
pub fn contour_length(mask: &Mask) -> usize {
    let (w, h) = mask.dims();
    let mut n = 0;
    for y in 0..h {
        for x in 0..w {
            let v = mask.get(x, y);
            if x + 1 < w && mask.get(x + 1, y) != v {
                n += 1;
            }
            if y + 1 < h && mask.get(x, y + 1) != v {
                n += 1;
            }
        }
    }
    n
}

/// `l+ sum_in |I - c+|^2 + l- sum_out |I - c-|^2 + mu Length + nu Area`.
pub fn cv_energy(image: &VectorImage, mask: &Mask, params: &CvParams) -> Result<f64> {
    let outside = mask.complement();
    let c_in = region_mean(image, mask)?;
    let c_out = region_mean(image, &outside)?;
    let mut e = 0.0;
    for (i, &m) in mask.data().iter().enumerate() {
        let px = image.pixel(i);
        e += if m {
            params.lambda_plus * crate::som::dist2(px, &c_in)
        } else {
            params.lambda_minus * crate::som::dist2(px, &c_out)
        };
    }
    if params.mu != 0.0 {
        e += params.mu * contour_length(mask) as f64;
    }
    if params.nu != 0.0 {
        e += params.nu * mask.count() as f64;
    }
    Ok(e)
}

fn cv_speed_with(image: &VectorImage, phi: &ScalarField, params: &CvParams, c_in: &[f64], c_out: &[f64]) -> ScalarField {
    let mut s = two_phase_speed(image, params.lambdas(), |_| c_in, |_| c_out);
    let kappa = (params.mu != 0.0).then(|| curvature(phi));
    for (i, v) in s.data_mut().iter_mut().enumerate() {
        if let Some(k) = &kappa {
            *v += params.mu * k.data()[i];
        }
        *v -= params.nu;
    }
    s
}

/// `mu kappa - nu - l+ |I - c+|^2 + l- |I - c-|^2`. An empty region uses
/// the global image mean.
pub fn cv_speed(image: &VectorImage, phi: &ScalarField, params: &CvParams) -> Result<ScalarField> {
    let (c_in, c_out) = MeanPair::default().resolve(image, &phi.nonnegative())?;
    Ok(cv_speed_with(image, phi, params, &c_in, &c_out))
}

/// Chan-Vese as a [`SpeedModel`].
#[derive(Debug, Clone, Default)]
pub struct ChanVese {
    pub params: CvParams,
    means: MeanPair,
}

impl ChanVese {
    pub fn new(params: CvParams) -> Result<Self> {
        params.validate()?;
        Ok(ChanVese {
            params,
            means: MeanPair::default(),
        })
    }
}

impl SpeedModel for ChanVese {
    fn name(&self) -> &'static str {
        "cv"
    }

    fn multiplier(&self) -> Multiplier {
        Multiplier::Dirac
    }

    fn speed(&mut self, image: &VectorImage, phi: &ScalarField) -> Result<ScalarField> {
        let (c_in, c_out) = self.means.resolve(image, &phi.nonnegative())?;
        Ok(cv_speed_with(image, phi, &self.params, &c_in, &c_out))
    }

    fn energy(&self, image: &VectorImage, mask: &Mask) -> Option<Result<f64>> {
        Some(cv_energy(image, mask, &self.params))
    }
}

/// `(I - mid) / max |I - mid|` with `mid = (c+ + c-) / 2`; zero when the
/// image equals `mid` everywhere.
pub fn sbgfrls_spf(image: &ScalarField, c_plus: f64, c_minus: f64) -> ScalarField {
    let mid = 0.5 * (c_plus + c_minus);
    let peak = image.data().iter().map(|v| (v - mid).abs()).fold(0.0, f64::max);
    if peak > 0.0 {
        image.map(|v| (v - mid) / peak)
    } else {
        image.map(|_| 0.0)
    }
}

/// `alpha * spf`. An empty region uses the global image mean.
pub fn sbgfrls_speed(image: &ScalarField, phi: &ScalarField, alpha: f64) -> Result<ScalarField> {
    let (c_in, c_out) = MeanPair::default().resolve(&VectorImage::from(image), &phi.nonnegative())?;
    Ok(sbgfrls_spf(image, c_in[0], c_out[0]).map(|v| alpha * v))
}

/// SBGFRLS as a [`SpeedModel`].
#[derive(Debug, Clone)]
pub struct Sbgfrls {
    pub alpha: f64,
    means: MeanPair,
}

impl Sbgfrls {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
        }
        Ok(Sbgfrls {
            alpha,
            means: MeanPair::default(),
        })
    }
}

impl SpeedModel for Sbgfrls {
    fn name(&self) -> &'static str {
        "sbgfrls"
    }

    fn multiplier(&self) -> Multiplier {
        Multiplier::GradMag
    }

    fn speed(&mut self, image: &VectorImage, phi: &ScalarField) -> Result<ScalarField> {
        let gray = image.as_scalar("sbgfrls")?;
        let (c_in, c_out) = self.means.resolve(image, &phi.nonnegative())?;
        Ok(sbgfrls_spf(&gray, c_in[0], c_out[0]).map(|v| self.alpha * v))
    }
}

/// Below `GSRPF_FLOOR` the GSRPF threshold is undefined and the force is zero.
pub const GSRPF_FLOOR: f64 = 1e-9 * 255.0;

/// Inside mean, inside median and outside mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsrpfState {
    pub c_plus: f64,
    pub m_plus: f64,
    pub c_minus: f64,
}

impl GsrpfState {
    /// `2c+ + 2m+ - 4c-`.
    pub fn denominator(&self) -> f64 {
        2.0 * self.c_plus + 2.0 * self.m_plus - 4.0 * self.c_minus
    }

    /// `(c+^2 + m+^2 - 2c-^2) / (2c+ + 2m+ - 4c-)`, or `None` when the
    /// denominator is below [`GSRPF_FLOOR`].
    pub fn threshold(&self) -> Option<f64> {
        let d = self.denominator();
        if d.abs() < GSRPF_FLOOR {
            return None;
        }
        Some((self.c_plus.powi(2) + self.m_plus.powi(2) - 2.0 * self.c_minus.powi(2)) / d)
    }
}

/// `sign(z)` with `sign(0) = +1`.
#[inline]
fn sign(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Inside mean and median and outside mean of the current segmentation.
pub fn gsrpf_descriptors(image: &ScalarField, phi: &ScalarField) -> Result<GsrpfState> {
    let inside = phi.nonnegative();
    Ok(GsrpfState {
        c_plus: region_mean_scalar(image, &inside)?,
        m_plus: region_median(image, &inside)?,
        c_minus: region_mean_scalar(image, &inside.complement())?,
    })
}

/// Per-pixel sign of the pressure force, in `{-1, 0, +1}`.
pub fn gsrpf_spf(image: &ScalarField, state: &GsrpfState) -> ScalarField {
    match state.threshold() {
        None => image.map(|_| 0.0),
        Some(t) => {
            let s = sign(state.denominator());
            image.map(|v| s * sign(v - t))
        }
    }
}

/// `(I - threshold)^2`, or zero when the threshold is undefined.
pub fn gsrpf_alpha(image: &ScalarField, state: &GsrpfState) -> ScalarField {
    match state.threshold() {
        None => image.map(|_| 0.0),
        Some(t) => image.map(|v| (v - t).powi(2)),
    }
}

fn gsrpf_speed_with(image: &ScalarField, state: &GsrpfState) -> ScalarField {
    let spf = gsrpf_spf(image, state);
    let alpha = gsrpf_alpha(image, state);
    let data = spf.data().iter().zip(alpha.data()).map(|(s, a)| s * a).collect();
    ScalarField::from_vec(image.width(), image.height(), data).expect("dimensions preserved")
}

/// `alpha(I) * spf(I)`. An empty region uses global statistics.
pub fn gsrpf_speed(image: &ScalarField, phi: &ScalarField) -> Result<ScalarField> {
    let state = Gsrpf::default().resolve(image, phi)?;
    Ok(gsrpf_speed_with(image, &state))
}

/// `sum_in l+ (|I-c+|^2 + |I-m+|^2) + sum_out 2 l- |I-c-|^2`.
pub fn gsrpf_energy(image: &ScalarField, mask: &Mask, lambda_plus: f64, lambda_minus: f64) -> Result<f64> {
    let c_plus = region_mean_scalar(image, mask)?;
    let m_plus = region_median(image, mask)?;
    let c_minus = region_mean_scalar(image, &mask.complement())?;
    Ok(image
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&v, &m)| {
            if m {
                lambda_plus * ((v - c_plus).powi(2) + (v - m_plus).powi(2))
            } else {
                2.0 * lambda_minus * (v - c_minus).powi(2)
            }
        })
        .sum())
}

/// GSRPF as a [`SpeedModel`]. Records the descriptors used at every call.
#[derive(Debug, Clone, Default)]
pub struct Gsrpf {
    inside: Fallback<(f64, f64)>,
    outside: Fallback<f64>,
    trace: Vec<GsrpfState>,
}

impl Gsrpf {
    pub fn new() -> Self {
        Self::default()
    }

    /// Descriptors of every iteration so far.
    pub fn trace(&self) -> &[GsrpfState] {
        &self.trace
    }

    fn resolve(&mut self, image: &ScalarField, phi: &ScalarField) -> Result<GsrpfState> {
        let inside = phi.nonnegative();
        let all = Mask::new(image.width(), image.height(), true);
        let fresh_in = region_mean_scalar(image, &inside).and_then(|c| Ok((c, region_median(image, &inside)?)));
        let (c_plus, m_plus) = self.inside.resolve(fresh_in, || {
            (image.mean(), region_median(image, &all).expect("domain is nonempty"))
        })?;
        let c_minus = self
            .outside
            .resolve(region_mean_scalar(image, &inside.complement()), || image.mean())?;
        Ok(GsrpfState {
            c_plus,
            m_plus,
            c_minus,
        })
    }
}

impl SpeedModel for Gsrpf {
    fn name(&self) -> &'static str {
        "gsrpf"
    }

    fn multiplier(&self) -> Multiplier {
        Multiplier::GradMag
    }

    fn speed(&mut self, image: &VectorImage, phi: &ScalarField) -> Result<ScalarField> {
        let gray = image.as_scalar("gsrpf")?;
        let state = self.resolve(&gray, phi)?;
        self.trace.push(state);
        Ok(gsrpf_speed_with(&gray, &state))
    }

    fn energy(&self, image: &VectorImage, mask: &Mask) -> Option<Result<f64>> {
        Some(image.as_scalar("gsrpf").and_then(|g| gsrpf_energy(&g, mask, 1.0, 1.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> ScalarField {
        ScalarField::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    fn phi_from(mask: &[bool]) -> ScalarField {
        row(&mask.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect::<Vec<_>>())
    }

    #[test]
    fn cv_energy_examples() {
        let p = CvParams::default();
        let c = VectorImage::from(ScalarField::filled(4, 4, 9.0));
        let m = Mask::from_fn(4, 4, |x, _| x < 2);
        assert_eq!(cv_energy(&c, &m, &p).unwrap(), 0.0);

        let two = VectorImage::from(ScalarField::from_fn(4, 4, |x, _| if x < 2 { 0.0 } else { 255.0 }));
        assert_eq!(cv_energy(&two, &m, &p).unwrap(), 0.0);

        let img = VectorImage::from(row(&[0.0, 0.0, 255.0, 255.0]));
        let split = Mask::from_vec(4, 1, vec![true, true, true, false]).unwrap();
        let expected = 2.0 * 85.0f64.powi(2) + 170.0f64.powi(2);
        assert!((cv_energy(&img, &split, &p).unwrap() - expected).abs() < 1e-9);

        let with_terms = CvParams { mu: 2.0, nu: 0.5, ..p };
        assert!((cv_energy(&img, &split, &with_terms).unwrap() - (expected + 2.0 + 1.5)).abs() < 1e-9);
        assert!(matches!(cv_energy(&img, &Mask::new(4, 1, true), &p), Err(Error::EmptyRegion)));
    }

    #[test]
    fn cv_speed_matches_term_oracle() {
        let vals = [10.0, 200.0, 30.0, 180.0, 90.0, 250.0, 0.0, 120.0, 60.0];
        let img = ScalarField::from_vec(3, 3, vals.to_vec()).unwrap();
        let inside = [false, true, false, true, true, true, false, true, false];
        let phi = ScalarField::from_vec(3, 3, inside.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect()).unwrap();
        let p = CvParams {
            lambda_plus: 1.5,
            lambda_minus: 0.5,
            mu: 0.7,
            nu: 0.2,
        };
        let s = cv_speed(&VectorImage::from(&img), &phi, &p).unwrap();
        let c_in: f64 = vals.iter().zip(inside).filter(|(_, b)| *b).map(|(v, _)| v).sum::<f64>() / 5.0;
        let c_out: f64 = vals.iter().zip(inside).filter(|(_, b)| !*b).map(|(v, _)| v).sum::<f64>() / 4.0;
        let k = curvature(&phi);
        for (i, &v) in vals.iter().enumerate() {
            let want = 0.7 * k.data()[i] - 0.2 - 1.5 * (v - c_in).powi(2) + 0.5 * (v - c_out).powi(2);
            assert!((s.data()[i] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn cv_speed_special_pixels() {
        // Inside {75, 125} has mean 100 and outside {75, 25} has mean 50.
        let img = row(&[75.0, 125.0, 75.0, 25.0]);
        let phi = phi_from(&[true, true, false, false]);
        let s = cv_speed(&VectorImage::from(&img), &phi, &CvParams::default()).unwrap();
        assert_eq!(s.data()[0], 0.0);
        assert_eq!(s.data()[2], 0.0);
        // A pixel equal to c+ feels only the outside term.
        let img = row(&[100.0, 100.0, 0.0, 30.0]);
        let s = cv_speed(&VectorImage::from(&img), &phi, &CvParams::default()).unwrap();
        assert_eq!(s.data()[0], (100.0f64 - 15.0).powi(2));
    }

    #[test]
    fn sbgfrls_examples() {
        let img = ScalarField::from_fn(6, 6, |x, _| if x < 3 { 255.0 } else { 0.0 });
        let spf = sbgfrls_spf(&img, 255.0, 0.0);
        for y in 0..6 {
            for x in 0..6 {
                assert_eq!(spf.get(x, y), if x < 3 { 1.0 } else { -1.0 });
            }
        }
        let mid = sbgfrls_spf(&row(&[10.0, 20.0, 15.0]), 20.0, 10.0);
        assert_eq!(mid.data()[2], 0.0);
        assert!(mid.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        let flat = sbgfrls_spf(&row(&[15.0, 15.0]), 20.0, 10.0);
        assert!(flat.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gsrpf_threshold_example() {
        let st = GsrpfState {
            c_plus: 200.0,
            m_plus: 200.0,
            c_minus: 100.0,
        };
        assert_eq!(st.threshold(), Some(150.0));
        let img = row(&[200.0, 100.0, 150.0]);
        assert_eq!(gsrpf_spf(&img, &st).data(), &[1.0, -1.0, 1.0]);
        assert_eq!(gsrpf_alpha(&img, &st).data()[0], 2500.0);
        let s = gsrpf_speed_with(&row(&[160.0, 170.0, 190.0]), &st);
        assert_eq!(s.data(), &[100.0, 400.0, 1600.0]);

        let flat = GsrpfState {
            c_plus: 120.0,
            m_plus: 120.0,
            c_minus: 120.0,
        };
        assert_eq!(flat.threshold(), None);
        assert!(gsrpf_spf(&img, &flat).data().iter().all(|&v| v == 0.0));
        assert!(gsrpf_alpha(&img, &flat).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gsrpf_binary_threshold_is_midpoint() {
        for (a, b) in [(255.0, 0.0), (30.0, 200.0), (100.0, 101.0)] {
            let st = GsrpfState {
                c_plus: a,
                m_plus: a,
                c_minus: b,
            };
            assert!((st.threshold().unwrap() - 0.5 * (a + b)).abs() < 1e-9);
        }
    }

    #[test]
    fn gsrpf_descriptors_examples() {
        let img = row(&[100.0, 150.0, 200.0, 10.0]);
        let st = gsrpf_descriptors(&img, &phi_from(&[true, true, true, false])).unwrap();
        assert_eq!((st.c_plus, st.m_plus, st.c_minus), (150.0, 150.0, 10.0));
        let bin = row(&[0.0, 255.0, 255.0, 0.0, 7.0]);
        let st = gsrpf_descriptors(&bin, &phi_from(&[true, true, true, false, false])).unwrap();
        assert_eq!(st.m_plus, 255.0);
    }

    #[test]
    fn gsrpf_energy_hand_sum() {
        let img = row(&[0.0, 10.0, 40.0, 100.0]);
        let m = Mask::from_vec(4, 1, vec![true, true, true, false]).unwrap();
        // c+ = 50/3, m+ = 10, c- = 100.
        let c: f64 = 50.0 / 3.0;
        let want = 0.5 * ((0.0 - c).powi(2) + 100.0 + (10.0 - c).powi(2) + 0.0 + (40.0 - c).powi(2) + 900.0);
        assert!((gsrpf_energy(&img, &m, 0.5, 3.0).unwrap() - want).abs() < 1e-9);
        assert_eq!(gsrpf_energy(&ScalarField::filled(4, 1, 3.0), &m, 1.0, 1.0).unwrap(), 0.0);
        let two = row(&[255.0, 255.0, 0.0, 0.0]);
        let split = Mask::from_vec(4, 1, vec![true, true, false, false]).unwrap();
        assert_eq!(gsrpf_energy(&two, &split, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn gsrpf_sign_pattern_matches_sbgfrls_on_binary() {
        let img = ScalarField::from_fn(10, 8, |x, y| if (2..7).contains(&x) && (1..6).contains(&y) { 220.0 } else { 40.0 });
        let phi = ScalarField::from_fn(10, 8, |x, y| if (3..6).contains(&x) && (2..5).contains(&y) { 1.0 } else { -1.0 });
        let g = gsrpf_speed(&img, &phi).unwrap();
        let s = sbgfrls_speed(&img, &phi, 1.0).unwrap();
        for (a, b) in g.data().iter().zip(s.data()) {
            assert_eq!(sign(*a), sign(*b));
        }
    }
}
