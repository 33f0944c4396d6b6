//! Independent oracles shared by the property and acceptance tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use levelcurve::grid::{binarize_levelset, gaussian_kernel};
use levelcurve::harness::metrics::{histogram, multi_otsu, otsu, otsu_objective, ConfusionCounts};
use levelcurve::models::global::{cv_energy, cv_speed, ChanVese, CvParams};
use levelcurve::models::local::{gmm_fit, lrcv_speed, LrcvParams};
use levelcurve::models::som::{csomcv_speed, soac_speed, MapPair};
use levelcurve::som::{som_fit, Origin, SomMap, SomTopology, TrainingSchedule, TrainingSet};
use levelcurve::{evolve, EvolveParams, LevelSetField, Mask, ScalarField, VectorImage};

/// Exhaustive single-threshold Otsu: the first `t` with the largest
/// between-class criterion, computed from raw pixel sums.
pub fn brute_otsu(image: &ScalarField) -> u8 {
    let px: Vec<f64> = image.data().iter().map(|v| v.round().clamp(0.0, 255.0)).collect();
    let mut best = (f64::NEG_INFINITY, 0u8);
    for t in 0..255u32 {
        let mut score = 0.0;
        for below in [true, false] {
            let class: Vec<f64> = px.iter().copied().filter(|&v| (v <= t as f64) == below).collect();
            if !class.is_empty() {
                let s: f64 = class.iter().sum();
                score += s * s / class.len() as f64;
            }
        }
        if score > best.0 + 1e-9 * score.abs().max(1.0) {
            best = (score, t as u8);
        }
    }
    best.1
}

/// Best multi-class criterion over every ordered tuple of `n` thresholds
/// drawn from the occupied levels. Splitting a class never lowers the
/// criterion, so tuples with empty classes cannot do better.
pub fn brute_multi_otsu_score(image: &ScalarField, n: usize) -> f64 {
    let h = histogram(image);
    let levels: Vec<u8> = (0..=255u8).filter(|&l| h[l as usize] > 0).collect();
    let cuts = &levels[..levels.len() - 1];
    let mut best = f64::NEG_INFINITY;
    let mut chosen = Vec::with_capacity(n);
    enumerate(&h, cuts, 0, n, &mut chosen, &mut best);
    best
}

fn enumerate(h: &[u64; 256], cuts: &[u8], from: usize, n: usize, chosen: &mut Vec<u8>, best: &mut f64) {
    if chosen.len() == n {
        *best = best.max(otsu_objective(h, chosen));
        return;
    }
    for i in from..cuts.len() {
        chosen.push(cuts[i]);
        enumerate(h, cuts, i + 1, n, chosen, best);
        chosen.pop();
    }
}

/// Random image whose pixels take one of `levels` random intensities.
pub fn random_levels_image(seed: u64, levels: usize) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.random_range(4..24);
    let h = rng.random_range(4..24);
    let tones: Vec<f64> = (0..levels).map(|_| rng.random_range(0..=255u32) as f64).collect();
    ScalarField::from_fn(w, h, |_, _| tones[rng.random_range(0..levels)])
}

/// Compare `otsu` and `multi_otsu` with up to `max_n` thresholds against
/// the brute-force oracles. `Err` describes the first mismatch.
pub fn check_otsu(image: &ScalarField, max_n: usize) -> Result<(), String> {
    let distinct = histogram(image).iter().filter(|&&c| c > 0).count();
    if distinct < 2 {
        return Ok(());
    }
    let t = otsu(image).map_err(|e| e.to_string())?;
    if t != brute_otsu(image) {
        return Err(format!("otsu {t} vs oracle {}", brute_otsu(image)));
    }
    let h = histogram(image);
    for n in 1..=max_n.min(distinct - 1) {
        let mo = multi_otsu(image, n).map_err(|e| e.to_string())?;
        let got = otsu_objective(&h, &mo.thresholds);
        let want = brute_multi_otsu_score(image, n);
        if (got - want).abs() > 1e-9 * want.abs().max(1.0) {
            return Err(format!("multi_otsu n={n}: {got} vs oracle {want}"));
        }
        if !mo.thresholds.windows(2).all(|p| p[0] < p[1]) {
            return Err(format!("thresholds not increasing: {:?}", mo.thresholds));
        }
    }
    Ok(())
}

/// Largest |sum of taps - 1| over a range of widths, in 1-D and 2-D.
pub fn kernel_normalization_error(sigma: f64) -> f64 {
    let k = gaussian_kernel(sigma, None).unwrap();
    let one_d: f64 = k.taps().iter().sum();
    let two_d: f64 = k.taps_2d().data().iter().sum();
    (one_d - 1.0).abs().max((two_d - 1.0).abs())
}

/// Binarizing keeps `{phi >= 0}` and maps each value to `rho * sign`, with
/// zeros staying zero.
pub fn binarize_preserves_mask(phi: ScalarField, rho: f64) -> bool {
    let level = LevelSetField { phi, rho };
    let b = binarize_levelset(&level);
    let values = level.phi.data().iter().zip(b.phi.data()).all(|(&v, &out)| {
        let want = if v > 0.0 {
            rho
        } else if v < 0.0 {
            -rho
        } else {
            0.0
        };
        out == want
    });
    b.mask() == level.mask() && values
}

/// Largest |LRCV - C-V| speed difference for a very wide window, in units
/// of the squared intensity range.
pub fn lrcv_cv_limit_gap(image: &VectorImage, phi: &ScalarField) -> f64 {
    let wide = LrcvParams {
        sigma: 1e5,
        lambda_plus: 1.0,
        lambda_minus: 1.0,
    };
    let local = lrcv_speed(image, phi, &wide).unwrap();
    let global = cv_speed(image, phi, &CvParams::default()).unwrap();
    relative_gap(&local, &global, image)
}

/// Same comparison for SOAC against CSOM-CV.
pub fn soac_csomcv_limit_gap(image: &VectorImage, phi: &ScalarField, maps: &MapPair) -> f64 {
    let local = soac_speed(image, phi, maps, 1e5).unwrap();
    let global = csomcv_speed(image, phi, maps).unwrap();
    relative_gap(&local, &global, image)
}

fn relative_gap(a: &ScalarField, b: &ScalarField, image: &VectorImage) -> f64 {
    let (lo, hi) = image.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let scale = ((hi - lo) * (hi - lo)).max(1.0);
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Sorted prototypes of a 1x2 map trained on two constant clusters. The
/// radius starts at half a grid step so the neighbor coupling dies out;
/// with `r0 = 1` the two prototypes stay a few units apart from the data.
pub fn two_cluster_prototypes(seed: u64) -> Vec<f64> {
    let samples: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 50.0 } else { 200.0 }).collect();
    let topology = SomTopology::line(2).unwrap();
    let data = TrainingSet::scalars(samples, Origin::Unlabeled);
    let map = som_fit(topology, &data, &TrainingSchedule::with(0.9, 0.5, 10_000, seed)).unwrap();
    let mut p: Vec<f64> = map.prototypes().map(|w| w[0]).collect();
    p.sort_by(f64::total_cmp);
    p
}

pub fn train_line(samples: &[f64], n: usize, seed: u64) -> SomMap {
    let topology = SomTopology::line(n).unwrap();
    let data = TrainingSet::scalars(samples.to_vec(), Origin::Unlabeled);
    som_fit(topology, &data, &TrainingSchedule::standard(topology, seed)).unwrap()
}

/// EM log-likelihood trace of a fit on a bimodal sample.
pub fn em_trace(seed: u64, k: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..300)
        .map(|i| if i % 3 == 0 { 60.0 } else { 170.0 } + rng.random_range(-15.0..15.0))
        .collect();
    gmm_fit(&TrainingSet::scalars(samples, Origin::Unlabeled), k, seed).unwrap().log_likelihood
}

pub fn non_decreasing(trace: &[f64], tol: f64) -> bool {
    trace.windows(2).all(|p| p[1] >= p[0] - tol * p[0].abs().max(1.0))
}

/// C-V energy after every iteration with smoothing off. The energy is
/// recomputed here from the recorded masks rather than read from the trace.
pub fn cv_energy_trace(image: &VectorImage, init: &Mask) -> Vec<f64> {
    let params = CvParams::default();
    let mut model = ChanVese::new(params).unwrap();
    let evolve_params = EvolveParams::diagnostic();
    let phi0 = LevelSetField::from_mask(init, evolve_params.rho);
    let mut masks = vec![init.clone()];
    levelcurve::evolve::evolve_with(image, &phi0, &mut model, &evolve_params, |_, m| {
        masks.push(m.clone());
        Ok(())
    })
    .unwrap();
    masks.iter().map(|m| cv_energy(image, m, &params).unwrap()).collect()
}

pub fn non_increasing(trace: &[f64], tol: f64) -> bool {
    let e0 = trace[0].abs().max(1.0);
    trace.windows(2).all(|p| p[1] <= p[0] + tol * e0)
}

/// The worked confusion-count cases, checked exactly.
pub fn prf_cases_hold() -> bool {
    let c = |tp, fp, fn_, tn| ConfusionCounts { tp, fp, fn_, tn }.prf();
    let a = c(9, 1, 1, 5);
    let b = c(0, 0, 4, 4);
    let d = c(3, 0, 0, 7);
    let e = c(1, 3, 0, 0);
    a.precision == 0.9
        && a.recall == 0.9
        && (a.f_measure - 0.9).abs() < 1e-15
        && b.precision == 0.0
        && b.precision_undefined
        && b.recall == 0.0
        && !b.recall_undefined
        && b.f_undefined
        && (d.precision, d.recall, d.f_measure) == (1.0, 1.0, 1.0)
        && e.precision == 0.25
        && e.recall == 1.0
        && e.f_measure == 0.4
}

/// Run an evolution and return the mask; handy for equality checks.
pub fn evolve_mask(image: &VectorImage, init: &Mask, model: &mut dyn levelcurve::SpeedModel, params: &EvolveParams) -> Mask {
    let phi0 = LevelSetField::from_mask(init, params.rho);
    evolve(image, &phi0, model, params).unwrap().mask
}
