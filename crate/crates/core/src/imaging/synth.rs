//! Procedural stand-in for a photo enhancement dataset.
//!
//! Base "low-quality" images are muted mixtures of a linear gradient, a few
//! rectangles and smooth value noise. High-quality counterparts scale the
//! three parameters up by multipliers drawn from the enhance ranges;
//! poor-quality ones are pushed to the extremes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_adjustment, AdjustmentMultipliers, DegradeRanges};
use crate::error::{Error, Result};
use crate::features::{hsv_to_rgb_pixel, measure_params, RasterImage, MIN_SIDE};
use crate::pipeline::{DatasetManifest, ImageRecord, ManifestEntry};

/// Closed interval of multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierRange {
    pub min: f64,
    pub max: f64,
}

impl MultiplierRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.max > self.min {
            rng.gen_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    /// Distance between the interval and 1.
    fn gap_from_identity(&self) -> f64 {
        if self.max < 1.0 {
            1.0 - self.max
        } else if self.min > 1.0 {
            self.min - 1.0
        } else {
            0.0
        }
    }
}

/// Smallest allowed distance between a multiplier interval and 1.
const MIN_SEPARATION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatasetConfig {
    pub n_images: usize,
    /// Side length of the square images.
    pub image_size: usize,
    /// Counterparts per class.
    pub p: usize,
    /// Saturation, brightness and contrast multipliers of the high-quality renders.
    pub enhance: [MultiplierRange; 3],
    pub degrade: DegradeRanges,
    pub seed: u64,
}

impl Default for SyntheticDatasetConfig {
    fn default() -> Self {
        Self {
            n_images: 60,
            image_size: 48,
            p: 2,
            enhance: [
                MultiplierRange::new(1.15, 1.35),
                MultiplierRange::new(1.10, 1.30),
                MultiplierRange::new(1.08, 1.18),
            ],
            degrade: DegradeRanges::default(),
            seed: 0,
        }
    }
}

impl SyntheticDatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidConfig("p must be at least 1".into()));
        }
        if self.n_images == 0 {
            return Err(Error::InvalidConfig("n_images must be at least 1".into()));
        }
        if self.image_size < MIN_SIDE {
            return Err(Error::InvalidConfig(format!("image_size must be at least {MIN_SIDE}")));
        }
        let ranges = self
            .enhance
            .iter()
            .chain([&self.degrade.low, &self.degrade.high]);
        for r in ranges {
            if !(r.min > 0.0 && r.min <= r.max) {
                return Err(Error::InvalidConfig(format!("bad multiplier range {r:?}")));
            }
            if r.gap_from_identity() < MIN_SEPARATION {
                return Err(Error::InvalidConfig(format!(
                    "multiplier range {r:?} is within {MIN_SEPARATION} of 1"
                )));
            }
        }
        Ok(())
    }
}

/// One base image with its rendered counterparts.
#[derive(Clone, Debug)]
pub struct SyntheticSample {
    pub low: RasterImage,
    pub high: Vec<RasterImage>,
    pub poor: Vec<RasterImage>,
    pub high_multipliers: Vec<AdjustmentMultipliers>,
    pub poor_multipliers: Vec<AdjustmentMultipliers>,
}

/// Bilinearly interpolated lattice noise in `[-1, 1]`.
struct ValueNoise {
    cells: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(cells: usize, rng: &mut impl Rng) -> Self {
        let lattice = (0..(cells + 1) * (cells + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self { cells, lattice }
    }

    fn at(&self, u: f64, v: f64) -> f64 {
        let n = self.cells;
        let (fx, fy) = (u * n as f64, v * n as f64);
        let (x0, y0) = ((fx as usize).min(n - 1), (fy as usize).min(n - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (sx, sy) = (smooth(tx), smooth(ty));
        let l = |x: usize, y: usize| self.lattice[y * (n + 1) + x];
        let top = l(x0, y0) * (1.0 - sx) + l(x0 + 1, y0) * sx;
        let bottom = l(x0, y0 + 1) * (1.0 - sx) + l(x0 + 1, y0 + 1) * sx;
        top * (1.0 - sy) + bottom * sy
    }
}

struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    dv: f64,
    dh: f64,
}

/// Muted base image: varied overall brightness and hue, low saturation and
/// contrast.
fn base_image(size: usize, rng: &mut ChaCha8Rng) -> Result<RasterImage> {
    let hue = rng.gen_range(0.0..1.0);
    let sat = rng.gen_range(0.12..0.45);
    let val = rng.gen_range(0.22..0.55);
    let amp = rng.gen_range(0.04..0.12);
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (gx, gy) = (angle.cos(), angle.sin());
    let noise = ValueNoise::new(rng.gen_range(3..6), rng);
    let rects: Vec<Rect> = (0..rng.gen_range(1..4))
        .map(|_| {
            let (x0, y0) = (rng.gen_range(0.0..0.7), rng.gen_range(0.0..0.7));
            Rect {
                x0,
                y0,
                x1: x0 + rng.gen_range(0.15..0.3),
                y1: y0 + rng.gen_range(0.15..0.3),
                dv: rng.gen_range(-1.0..1.0),
                dh: rng.gen_range(-0.08..0.08),
            }
        })
        .collect();
    let weights = [rng.gen_range(0.3..1.0), rng.gen_range(0.3..1.0), rng.gen_range(0.2..0.8)];

    RasterImage::from_fn(size, size, |x, y| {
        let u = (x as f64 + 0.5) / size as f64;
        let v = (y as f64 + 0.5) / size as f64;
        let gradient = (u - 0.5) * gx + (v - 0.5) * gy;
        let mut h = hue;
        let mut block = 0.0;
        for r in &rects {
            if (r.x0..r.x1).contains(&u) && (r.y0..r.y1).contains(&v) {
                block += r.dv;
                h += r.dh;
            }
        }
        let n = noise.at(u, v);
        let z = weights[0] * gradient * 2.0 + weights[1] * block * 0.8 + weights[2] * n;
        let value = (val + amp * z).clamp(0.02, 0.98);
        let s = (sat * (1.0 + 0.3 * n)).clamp(0.0, 1.0);
        hsv_to_rgb_pixel([h.rem_euclid(1.0), s, value])
    })
}

fn sample_multipliers(ranges: &[MultiplierRange; 3], rng: &mut impl Rng) -> AdjustmentMultipliers {
    AdjustmentMultipliers::from_array([0, 1, 2].map(|j| ranges[j].sample(rng)))
}

fn render_one(cfg: &SyntheticDatasetConfig, index: usize) -> Result<SyntheticSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let low = base_image(cfg.image_size, &mut rng)?.quantized();
    let mut sample = SyntheticSample {
        high: Vec::with_capacity(cfg.p),
        poor: Vec::with_capacity(cfg.p),
        high_multipliers: Vec::with_capacity(cfg.p),
        poor_multipliers: Vec::with_capacity(cfg.p),
        low,
    };
    for _ in 0..cfg.p {
        let m = sample_multipliers(&cfg.enhance, &mut rng);
        sample.high.push(apply_adjustment(&sample.low, m)?.quantized());
        sample.high_multipliers.push(m);
    }
    for _ in 0..cfg.p {
        let m = cfg.degrade.sample(&mut rng);
        sample.poor.push(apply_adjustment(&sample.low, m)?.quantized());
        sample.poor_multipliers.push(m);
    }
    Ok(sample)
}

/// Renders the dataset in memory. Images are already quantized to 8 bits,
/// so they equal what a PNG round trip returns. Image `i` draws from stream
/// `i` of the master seed, so the output does not depend on thread count.
pub fn render_synthetic(cfg: &SyntheticDatasetConfig) -> Result<Vec<SyntheticSample>> {
    cfg.validate()?;
    (0..cfg.n_images).into_par_iter().map(|i| render_one(cfg, i)).collect()
}

/// Renders the dataset and writes PNGs plus `manifest.json` into `out_dir`.
pub fn gen_synthetic_dataset(cfg: &SyntheticDatasetConfig, out_dir: &Path) -> Result<DatasetManifest> {
    let samples = render_synthetic(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let record = |img: &RasterImage, name: String| -> Result<ImageRecord> {
        img.save_png(&out_dir.join(&name))?;
        Ok(ImageRecord {
            path: name.into(),
            params: measure_params(img),
        })
    };
    let entries = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(ManifestEntry {
                low: record(&s.low, format!("low_{i:04}.png"))?,
                high: s
                    .high
                    .iter()
                    .enumerate()
                    .map(|(j, img)| record(img, format!("high_{i:04}_{j}.png")))
                    .collect::<Result<_>>()?,
                poor: s
                    .poor
                    .iter()
                    .enumerate()
                    .map(|(k, img)| record(img, format!("poor_{i:04}_{k}.png")))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest::new(entries);
    manifest.save(&out_dir.join(DatasetManifest::DEFAULT_NAME))?;
    Ok(manifest)
}
