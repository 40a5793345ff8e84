//! Global saturation / brightness / contrast edits.

mod synth;

pub use synth::{
    gen_synthetic_dataset, render_synthetic, MultiplierRange, SyntheticDatasetConfig, SyntheticSample,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{measure_params, ParamVector, RasterImage};

/// Multipliers applied to saturation, brightness and contrast.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentMultipliers {
    pub saturation: f64,
    pub brightness: f64,
    pub contrast: f64,
}

impl AdjustmentMultipliers {
    pub const IDENTITY: Self = Self::new(1.0, 1.0, 1.0);

    pub const fn new(saturation: f64, brightness: f64, contrast: f64) -> Self {
        Self {
            saturation,
            brightness,
            contrast,
        }
    }

    pub fn from_array([s, b, c]: [f64; 3]) -> Self {
        Self::new(s, b, c)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.saturation, self.brightness, self.contrast]
    }

    fn validate(&self) -> Result<()> {
        if self.to_array().iter().all(|m| m.is_finite() && *m > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("multipliers must be positive, got {self:?}")))
        }
    }
}

fn clip01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// In HSV: scale S, then scale V, then stretch V about its mean. Each step
/// clips to `[0, 1]`.
pub fn apply_adjustment(image: &RasterImage, m: AdjustmentMultipliers) -> Result<RasterImage> {
    m.validate()?;
    let mut hsv = image.to_hsv();
    for p in &mut hsv.pixels {
        p[1] = clip01(p[1] * m.saturation);
        p[2] = clip01(p[2] * m.brightness);
    }
    if m.contrast != 1.0 {
        let mean_v = hsv.value_channel().sum::<f64>() / hsv.pixels.len() as f64;
        for p in &mut hsv.pixels {
            p[2] = clip01(mean_v + (p[2] - mean_v) * m.contrast);
        }
    }
    Ok(hsv.to_rgb())
}

/// Result of [`retarget`].
#[derive(Clone, Debug, PartialEq)]
pub struct Retargeted {
    pub image: RasterImage,
    /// Some coordinate ended further than [`RETARGET_TOL`] from its target.
    pub clipped: bool,
}

pub const RETARGET_TOL: f64 = 0.02;
const REFINEMENTS: usize = 3;
const CONVERGED: f64 = 1e-6;

/// Renders `image` so that its measured parameters approach `target`.
///
/// Starts from the componentwise ratio `target / current` and refines the
/// multipliers by the remaining ratio up to three times.
pub fn retarget(image: &RasterImage, target: &ParamVector) -> Result<Retargeted> {
    if !target.is_physical() {
        return Err(Error::InvalidConfig(format!("target {target:?} outside physical ranges")));
    }
    let current = measure_params(image).to_array();
    let goal = target.to_array();
    for j in 0..3 {
        if current[j] == 0.0 && goal[j] != 0.0 {
            return Err(Error::UnreachableTarget(ParamVector::NAMES[j]));
        }
    }
    // A zero coordinate with a zero goal stays at zero under any multiplier.
    let ratio = |num: f64, den: f64| if den == 0.0 { 1.0 } else { num / den };
    let mut mult = [0, 1, 2].map(|j| ratio(goal[j], current[j]));
    let mut out = image.clone();
    let mut measured = current;
    for step in 0..=REFINEMENTS {
        if step > 0 {
            let err = (0..3).map(|j| (measured[j] - goal[j]).abs()).fold(0.0, f64::max);
            if err < CONVERGED {
                break;
            }
            for j in 0..3 {
                // A coordinate driven to zero by clipping cannot be refined.
                if measured[j] > 0.0 {
                    mult[j] *= goal[j] / measured[j];
                }
            }
        }
        let safe = mult.map(|v| if v > 0.0 && v.is_finite() { v } else { f64::MIN_POSITIVE });
        out = apply_adjustment(image, AdjustmentMultipliers::from_array(safe))?;
        measured = measure_params(&out).to_array();
    }
    let clipped = (0..3).any(|j| (measured[j] - goal[j]).abs() > RETARGET_TOL);
    Ok(Retargeted { image: out, clipped })
}

/// Intervals of the degradation multipliers, one low and one high per side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradeRanges {
    pub low: MultiplierRange,
    pub high: MultiplierRange,
}

impl Default for DegradeRanges {
    fn default() -> Self {
        Self {
            low: MultiplierRange::new(0.3, 0.6),
            high: MultiplierRange::new(1.7, 2.2),
        }
    }
}

impl DegradeRanges {
    /// Picks, independently per parameter, a side by coin flip and a
    /// multiplier uniformly within that side's interval.
    pub fn sample(&self, rng: &mut impl Rng) -> AdjustmentMultipliers {
        AdjustmentMultipliers::from_array([0, 1, 2].map(|_| {
            if rng.gen_bool(0.5) {
                self.low.sample(rng)
            } else {
                self.high.sample(rng)
            }
        }))
    }
}

/// Deterministic poor-quality rendering of `image` pushed towards the
/// extremes with the default ranges.
pub fn degrade(image: &RasterImage, seed: u64) -> Result<RasterImage> {
    degrade_with(image, seed, &DegradeRanges::default())
}

pub fn degrade_with(image: &RasterImage, seed: u64, ranges: &DegradeRanges) -> Result<RasterImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    apply_adjustment(image, ranges.sample(&mut rng))
}
