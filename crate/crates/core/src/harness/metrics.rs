//! Scoring against ground truth and Otsu thresholding baselines.

use crate::error::{Error, Result};
use crate::field::{Mask, ScalarField};

/// Pixel counts with foreground as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn of(mask: &Mask, truth: &Mask) -> Result<Self> {
        if mask.dims() != truth.dims() {
            return Err(Error::dims(
                format!("{}x{}", truth.width(), truth.height()),
                format!("{}x{}", mask.width(), mask.height()),
            ));
        }
        let mut c = ConfusionCounts::default();
        for (&m, &t) in mask.data().iter().zip(truth.data()) {
            match (m, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn prf(&self) -> Prf {
        let ratio = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
        let p = ratio(self.tp, self.tp + self.fp);
        let r = ratio(self.tp, self.tp + self.fn_);
        let (precision, recall) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
        let f = if precision + recall > 0.0 {
            Some(2.0 * precision * recall / (precision + recall))
        } else {
            None
        };
        Prf {
            precision,
            recall,
            f_measure: f.unwrap_or(0.0),
            precision_undefined: p.is_none(),
            recall_undefined: r.is_none(),
            f_undefined: f.is_none(),
        }
    }
}

/// Precision, recall and F1. A zero denominator yields 0 with its flag set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f_undefined: bool,
}

pub fn prf(mask: &Mask, truth: &Mask) -> Result<Prf> {
    Ok(ConfusionCounts::of(mask, truth)?.prf())
}

/// 256-bin histogram of intensities rounded and clamped to 0..=255.
pub fn histogram(image: &ScalarField) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &v in image.data() {
        h[bin(v)] += 1;
    }
    h
}

#[inline]
fn bin(v: f64) -> usize {
    v.round().clamp(0.0, 255.0) as usize
}

/// Prefix sums of counts and first moments.
struct Moments {
    n: [f64; 257],
    s: [f64; 257],
}

impl Moments {
    fn new(h: &[u64; 256]) -> Self {
        let mut n = [0.0; 257];
        let mut s = [0.0; 257];
        for i in 0..256 {
            n[i + 1] = n[i] + h[i] as f64;
            s[i + 1] = s[i] + (i as f64) * h[i] as f64;
        }
        Moments { n, s }
    }

    /// `S^2 / N` of bins `lo..=hi`; zero for an empty class.
    fn term(&self, lo: usize, hi: usize) -> f64 {
        let n = self.n[hi + 1] - self.n[lo];
        if n == 0.0 {
            return 0.0;
        }
        let s = self.s[hi + 1] - self.s[lo];
        s * s / n
    }
}

fn distinct_levels(h: &[u64; 256]) -> usize {
    h.iter().filter(|&&c| c > 0).count()
}

/// Between-class variance criterion of a threshold tuple: `sum_k S_k^2 / N_k`
/// over the classes `..=t1`, `t1+1..=t2`, ..., `tn+1..=255`. Larger is better.
pub fn otsu_objective(h: &[u64; 256], thresholds: &[u8]) -> f64 {
    let m = Moments::new(h);
    let mut lo = 0;
    let mut total = 0.0;
    for &t in thresholds {
        total += m.term(lo, t as usize);
        lo = t as usize + 1;
    }
    total + if lo <= 255 { m.term(lo, 255) } else { 0.0 }
}

/// Threshold `t` maximizing the inter-class variance of `{<= t}` vs `{> t}`.
/// Ties go to the lowest threshold.
pub fn otsu(image: &ScalarField) -> Result<u8> {
    let h = histogram(image);
    if distinct_levels(&h) < 2 {
        return Err(Error::ConstantImage);
    }
    let m = Moments::new(&h);
    let mut best = (f64::NEG_INFINITY, 0u8);
    for t in 0..255 {
        let v = m.term(0, t) + m.term(t + 1, 255);
        if v > best.0 {
            best = (v, t as u8);
        }
    }
    Ok(best.1)
}

/// Thresholds and per-pixel class labels `0..=t_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiOtsu {
    pub thresholds: Vec<u8>,
    pub labels: Vec<u8>,
    pub width: usize,
    pub height: usize,
}

impl MultiOtsu {
    /// Foreground = union of the listed classes.
    pub fn merge(&self, classes: &[u8]) -> Mask {
        let data = self.labels.iter().map(|l| classes.contains(l)).collect();
        Mask::from_vec(self.width, self.height, data).expect("dimensions preserved")
    }
}

/// Optimal `t_count` thresholds (1..=5) under the multi-class Otsu criterion.
///
/// The criterion is a sum of per-class terms, so the maximum over all
/// ordered tuples is found exactly by dynamic programming over the
/// cumulative-moment tables. Among equal scores the smaller split point wins.
pub fn multi_otsu(image: &ScalarField, t_count: usize) -> Result<MultiOtsu> {
    if !(1..=5).contains(&t_count) {
        return Err(Error::param("t_count", format!("must lie in 1..=5, got {t_count}")));
    }
    let h = histogram(image);
    let levels = distinct_levels(&h);
    if levels < 2 {
        return Err(Error::ConstantImage);
    }
    if levels <= t_count {
        return Err(Error::param(
            "t_count",
            format!("needs more than {t_count} distinct intensities, image has {levels}"),
        ));
    }
    let m = Moments::new(&h);
    // best[k][j]: classes 0..=k cover bins 0..=j with class k ending at j.
    let mut best = vec![[f64::NEG_INFINITY; 256]; t_count + 1];
    let mut from = vec![[0usize; 256]; t_count + 1];
    for (j, b) in best[0].iter_mut().enumerate() {
        *b = m.term(0, j);
    }
    for k in 1..=t_count {
        for j in k..256 {
            for i in (k - 1)..j {
                let v = best[k - 1][i] + m.term(i + 1, j);
                if v > best[k][j] {
                    best[k][j] = v;
                    from[k][j] = i;
                }
            }
        }
    }
    let mut thresholds = vec![0u8; t_count];
    let mut j = 255;
    for k in (1..=t_count).rev() {
        j = from[k][j];
        thresholds[k - 1] = j as u8;
    }
    let labels = image
        .data()
        .iter()
        .map(|&v| thresholds.iter().filter(|&&t| bin(v) > t as usize).count() as u8)
        .collect();
    Ok(MultiOtsu {
        thresholds,
        labels,
        width: image.width(),
        height: image.height(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prf_examples() {
        let truth = Mask::from_fn(4, 5, |x, y| x + y < 4);
        assert_eq!(prf(&truth, &truth).unwrap().f_measure, 1.0);

        let c = ConfusionCounts {
            tp: 9,
            fp: 1,
            fn_: 1,
            tn: 5,
        };
        let p = c.prf();
        assert_eq!((p.precision, p.recall), (0.9, 0.9));
        assert!((p.f_measure - 0.9).abs() < 1e-15);

        let empty = prf(&Mask::new(4, 5, false), &truth).unwrap();
        assert!(empty.precision_undefined && !empty.recall_undefined && empty.f_undefined);
        assert_eq!((empty.precision, empty.recall, empty.f_measure), (0.0, 0.0, 0.0));
        assert!(prf(&Mask::new(3, 5, false), &truth).is_err());
    }

    #[test]
    fn otsu_two_peaks() {
        let img = ScalarField::from_fn(10, 10, |x, _| if x < 5 { 50.0 } else { 200.0 });
        let t = otsu(&img).unwrap();
        assert_eq!(t, 50);
        assert!(matches!(otsu(&ScalarField::filled(3, 3, 7.0)), Err(Error::ConstantImage)));
    }

    #[test]
    fn multi_otsu_three_peaks_and_merge() {
        let img = ScalarField::from_fn(9, 4, |x, _| [50.0, 120.0, 220.0][x / 3]);
        let mo = multi_otsu(&img, 2).unwrap();
        assert!(mo.thresholds[0] >= 50 && mo.thresholds[0] < 120);
        assert!(mo.thresholds[1] >= 120 && mo.thresholds[1] < 220);
        assert_eq!(&mo.labels[..9], &[0, 0, 0, 1, 1, 1, 2, 2, 2]);
        assert_eq!(mo.merge(&[0, 1, 2]).count(), 36);
        assert_eq!(mo.merge(&[2]).count(), 12);
        assert_eq!(multi_otsu(&img, 1).unwrap().thresholds, vec![otsu(&img).unwrap()]);
        assert!(multi_otsu(&img, 3).is_err());
        assert!(multi_otsu(&img, 0).is_err());
    }
}
