//! Synthetic test images, named presets and seeded noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::field::{Mask, Rect, ScalarField};

/// Geometry of one painted shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    Rect(Rect),
    /// Centre and radius in pixels; a pixel is inside iff its centre is
    /// within `r` of `(cx, cy)`.
    Disc { cx: f64, cy: f64, r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    pub intensity: f64,
}

impl Shape {
    pub fn rect(x: usize, y: usize, w: usize, h: usize, intensity: f64) -> Self {
        Shape {
            kind: ShapeKind::Rect(Rect::new(x, y, w, h)),
            intensity,
        }
    }

    pub fn disc(cx: f64, cy: f64, r: f64, intensity: f64) -> Self {
        Shape {
            kind: ShapeKind::Disc { cx, cy, r },
            intensity,
        }
    }

    fn contains(&self, x: usize, y: usize) -> bool {
        match self.kind {
            ShapeKind::Rect(r) => r.contains(x, y),
            ShapeKind::Disc { cx, cy, r } => {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                dx * dx + dy * dy <= r * r
            }
        }
    }

    fn inside(&self, width: usize, height: usize) -> bool {
        match self.kind {
            ShapeKind::Rect(r) => r.w > 0 && r.h > 0 && r.check_inside(width, height).is_ok(),
            ShapeKind::Disc { cx, cy, r } => {
                r > 0.0 && cx - r >= 0.0 && cy - r >= 0.0 && cx + r <= (width - 1) as f64 && cy + r <= (height - 1) as f64
            }
        }
    }
}

/// Additive illumination `offset + gx * x + gy * y`, applied to every pixel
/// after painting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ramp {
    pub offset: f64,
    pub gx: f64,
    pub gy: f64,
}

/// A background with shapes painted over it in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub background: f64,
    pub shapes: Vec<Shape>,
    pub ramp: Option<Ramp>,
}

impl std::str::FromStr for SynthSpec {
    type Err = Error;

    /// Parses `key = value` lines with `#` comments:
    ///
    /// ```text
    /// width = 64
    /// height = 48
    /// background = 20
    /// rect = 10, 10, 20, 15, 200   # x, y, w, h, tone
    /// disc = 40, 30, 8, 120        # cx, cy, r, tone
    /// ramp = 0, 0.5, 0             # offset, gx, gy
    /// ```
    ///
    /// `rect` and `disc` may repeat and are painted in file order.
    fn from_str(text: &str) -> Result<Self> {
        let (mut width, mut height, mut background) = (None, None, None);
        let mut shapes = Vec::new();
        let mut ramp = None;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line, message };
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `key = value`, got `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let nums = |count: usize| -> Result<Vec<f64>> {
                let v: Vec<f64> = value
                    .split(',')
                    .map(|p| p.trim().parse::<f64>().map_err(|_| bad(format!("`{}` is not a number", p.trim()))))
                    .collect::<Result<_>>()?;
                if v.len() != count {
                    return Err(bad(format!("`{key}` takes {count} values, got {}", v.len())));
                }
                Ok(v)
            };
            let count = |v: f64| -> Result<usize> {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(bad(format!("`{key}` needs non-negative integers, got {v}")))
                }
            };
            let once = |slot: bool| if slot { Err(bad(format!("duplicate key `{key}`"))) } else { Ok(()) };
            match key {
                "width" => {
                    once(width.is_some())?;
                    width = Some(count(nums(1)?[0])?);
                }
                "height" => {
                    once(height.is_some())?;
                    height = Some(count(nums(1)?[0])?);
                }
                "background" => {
                    once(background.is_some())?;
                    background = Some(nums(1)?[0]);
                }
                "rect" => {
                    let v = nums(5)?;
                    shapes.push(Shape::rect(count(v[0])?, count(v[1])?, count(v[2])?, count(v[3])?, v[4]));
                }
                "disc" => {
                    let v = nums(4)?;
                    shapes.push(Shape::disc(v[0], v[1], v[2], v[3]));
                }
                "ramp" => {
                    once(ramp.is_some())?;
                    let v = nums(3)?;
                    ramp = Some(Ramp {
                        offset: v[0],
                        gx: v[1],
                        gy: v[2],
                    });
                }
                _ => return Err(bad(format!("unknown key `{key}`"))),
            }
        }
        let need = |v: Option<usize>, k: &str| v.ok_or_else(|| Error::Config(format!("missing required key `{k}`")));
        let spec = SynthSpec {
            width: need(width, "width")?,
            height: need(height, "height")?,
            background: background.ok_or_else(|| Error::Config("missing required key `background`".into()))?,
            shapes,
            ramp,
        };
        if spec.width == 0 || spec.height == 0 {
            return Err(Error::Config("width and height must be positive".into()));
        }
        Ok(spec)
    }
}

fn in_range(v: f64) -> bool {
    (0.0..=255.0).contains(&v)
}

/// Paint the shapes. The truth mask is the union of the shapes.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<(ScalarField, Mask)> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(Error::param("size", "width and height must be positive"));
    }
    if !in_range(spec.background) {
        return Err(Error::param("background", "must lie in [0, 255]"));
    }
    for (index, s) in spec.shapes.iter().enumerate() {
        if !s.inside(w, h) {
            return Err(Error::ShapeOutOfBounds {
                index,
                width: w,
                height: h,
            });
        }
        if !in_range(s.intensity) {
            return Err(Error::param("intensity", format!("shape {index} must lie in [0, 255]")));
        }
    }
    let mut image = ScalarField::filled(w, h, spec.background);
    let mut truth = Mask::new(w, h, false);
    for s in &spec.shapes {
        for y in 0..h {
            for x in 0..w {
                if s.contains(x, y) {
                    image.set(x, y, s.intensity);
                    truth.set(x, y, true);
                }
            }
        }
    }
    if let Some(r) = spec.ramp {
        for y in 0..h {
            for x in 0..w {
                let v = image.get(x, y) + r.offset + r.gx * x as f64 + r.gy * y as f64;
                image.set(x, y, v.clamp(0.0, 255.0));
            }
        }
    }
    Ok((image, truth))
}

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &["fig4_1", "fig6_1", "fig7_3a", "fig7_3b", "binary64", "fig8_2", "fig8_6"];

/// Built-in layouts.
///
/// * `fig4_1`: 123x80, three equal vertical bands 100/150/200 on 0.
/// * `fig6_1`: 90x122, discs 100/150/200 on 120.
/// * `fig7_3a`: 140x100, six bands 80..230 on 30.
/// * `fig7_3b`: the `fig6_1` discs on 20.
/// * `binary64`: 64x61, one 255 rectangle on 0.
/// * `fig8_2`: 127x96, 130 rectangle on 60 under a horizontal ramp.
/// * `fig8_6`: 100x100, two objects on a ramped background.
pub fn preset(name: &str) -> Result<SynthSpec> {
    let spec = match name {
        "fig4_1" => SynthSpec {
            width: 123,
            height: 80,
            background: 0.0,
            shapes: vec![
                Shape::rect(15, 15, 31, 50, 100.0),
                Shape::rect(46, 15, 31, 50, 150.0),
                Shape::rect(77, 15, 31, 50, 200.0),
            ],
            ramp: None,
        },
        "fig6_1" => SynthSpec {
            width: 90,
            height: 122,
            background: 120.0,
            shapes: vec![
                Shape::disc(30.0, 32.0, 18.0, 100.0),
                Shape::disc(60.0, 62.0, 18.0, 150.0),
                Shape::disc(30.0, 92.0, 18.0, 200.0),
            ],
            ramp: None,
        },
        "fig7_3a" => SynthSpec {
            width: 140,
            height: 100,
            background: 30.0,
            shapes: [80.0, 100.0, 140.0, 170.0, 200.0, 230.0]
                .iter()
                .enumerate()
                .map(|(i, &v)| Shape::rect(10 + 20 * i, 15, 20, 70, v))
                .collect(),
            ramp: None,
        },
        "fig7_3b" => SynthSpec {
            background: 20.0,
            ..preset("fig6_1")?
        },
        "binary64" => SynthSpec {
            width: 64,
            height: 61,
            background: 0.0,
            shapes: vec![Shape::rect(18, 16, 28, 29, 255.0)],
            ramp: None,
        },
        "fig8_2" => SynthSpec {
            width: 127,
            height: 96,
            background: 60.0,
            shapes: vec![Shape::rect(40, 28, 48, 40, 130.0)],
            ramp: Some(Ramp {
                offset: 0.0,
                gx: 0.6,
                gy: 0.0,
            }),
        },
        "fig8_6" => SynthSpec {
            width: 100,
            height: 100,
            background: 50.0,
            shapes: vec![Shape::rect(15, 20, 25, 60, 120.0), Shape::disc(70.0, 50.0, 18.0, 120.0)],
            ramp: Some(Ramp {
                offset: 0.0,
                gx: 0.5,
                gy: 0.0,
            }),
        },
        _ => return Err(Error::param("preset", format!("unknown preset `{name}`"))),
    };
    Ok(spec)
}

/// Gaussian noise of standard deviation `sd`, clamped to [0, 255].
pub fn add_gaussian_noise(image: &ScalarField, sd: f64, seed: u64) -> Result<ScalarField> {
    if !(sd >= 0.0) || !sd.is_finite() {
        return Err(Error::param("sd", format!("must be non-negative, got {sd}")));
    }
    if sd == 0.0 {
        return Ok(image.clone());
    }
    let normal = Normal::new(0.0, sd).expect("sd is positive and finite");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = image
        .data()
        .iter()
        .map(|&v| (v + normal.sample(&mut rng)).clamp(0.0, 255.0))
        .collect();
    ScalarField::from_vec(image.width(), image.height(), data)
}

/// Each pixel becomes 0 or 255 (even odds) with probability `density`.
pub fn add_salt_pepper(image: &ScalarField, density: f64, seed: u64) -> Result<ScalarField> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::param("density", format!("must lie in [0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = image
        .data()
        .iter()
        .map(|&v| {
            if rng.random::<f64>() < density {
                if rng.random::<bool>() {
                    255.0
                } else {
                    0.0
                }
            } else {
                v
            }
        })
        .collect();
    ScalarField::from_vec(image.width(), image.height(), data)
}

/// Noise applied by the harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    Gaussian { sd: f64 },
    SaltPepper { density: f64 },
}

impl NoiseSpec {
    pub fn apply(&self, image: &ScalarField, seed: u64) -> Result<ScalarField> {
        match *self {
            NoiseSpec::None => Ok(image.clone()),
            NoiseSpec::Gaussian { sd } => add_gaussian_noise(image, sd, seed),
            NoiseSpec::SaltPepper { density } => add_salt_pepper(image, density, seed),
        }
    }
}
