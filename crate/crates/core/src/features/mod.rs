//! Global image parameters and the fixed-layout 867-dimensional descriptor.
//!
//! Layout of a [`FeatureVector`]:
//!
//! | range        | content                                               |
//! |--------------|-------------------------------------------------------|
//! | `[0, 432)`   | joint HSV histogram, bin `h*36 + s*6 + v`, L1-normalized |
//! | `[432, 576)` | mean saturation of each cell of a 12x12 grid          |
//! | `[576, 720)` | mean value of each cell                               |
//! | `[720, 864)` | RMS contrast (population std of V) of each cell       |
//! | `[864, 867)` | saturation, brightness, contrast of the whole image   |

mod raster;

pub use raster::{hsv_to_rgb_pixel, rgb_to_hsv, rgb_to_hsv_pixel, HsvImage, RasterImage, MIN_SIDE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub const HUE_BINS: usize = 12;
pub const SAT_BINS: usize = 6;
pub const VAL_BINS: usize = 6;
pub const HIST_LEN: usize = HUE_BINS * SAT_BINS * VAL_BINS;
pub const GRID: usize = 12;
pub const CELLS: usize = GRID * GRID;

pub const SAT_GRID_OFFSET: usize = HIST_LEN;
pub const VAL_GRID_OFFSET: usize = SAT_GRID_OFFSET + CELLS;
pub const CONTRAST_GRID_OFFSET: usize = VAL_GRID_OFFSET + CELLS;
pub const PARAMS_OFFSET: usize = CONTRAST_GRID_OFFSET + CELLS;
pub const FEATURE_DIM: usize = PARAMS_OFFSET + 3;

/// Upper bound of RMS contrast for values confined to `[0, 1]`.
pub const MAX_CONTRAST: f64 = 0.5;

/// Average saturation, average value (brightness) and RMS contrast.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamVector {
    pub saturation: f64,
    pub brightness: f64,
    pub contrast: f64,
}

impl ParamVector {
    pub const NAMES: [&'static str; 3] = ["saturation", "brightness", "contrast"];

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

    pub fn get(&self, index: usize) -> f64 {
        self.to_array()[index]
    }

    /// Physical ceilings of the three coordinates.
    pub fn ceilings() -> [f64; 3] {
        [1.0, 1.0, MAX_CONTRAST]
    }

    /// True when every coordinate lies within its physical range.
    pub fn is_physical(&self) -> bool {
        self.to_array()
            .iter()
            .zip(Self::ceilings())
            .all(|(&v, hi)| v.is_finite() && (0.0..=hi).contains(&v))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Fixed-layout descriptor of length [`FEATURE_DIM`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn histogram(&self) -> &[f64] {
        &self.0[..HIST_LEN]
    }

    pub fn params(&self) -> ParamVector {
        ParamVector::new(
            self.0[PARAMS_OFFSET],
            self.0[PARAMS_OFFSET + 1],
            self.0[PARAMS_OFFSET + 2],
        )
    }
}

/// Mean and population standard deviation in two passes over `values`.
/// Constant input gives exactly that constant and zero, free of rounding.
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum, lo, hi) = values.clone().fold(
        (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY),
        |(n, s, lo, hi), v| (n + 1, s + v, lo.min(v), hi.max(v)),
    );
    if n == 0 {
        return (0.0, 0.0);
    }
    if lo == hi {
        return (lo, 0.0);
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

fn params_of_hsv(hsv: &HsvImage) -> ParamVector {
    let n = hsv.pixels.len() as f64;
    let saturation = hsv.pixels.iter().map(|p| p[1]).sum::<f64>() / n;
    let (brightness, contrast) = mean_std(hsv.value_channel());
    ParamVector::new(saturation, brightness, contrast)
}

pub fn measure_params(image: &RasterImage) -> ParamVector {
    params_of_hsv(&image.to_hsv())
}

fn bin(value: f64, bins: usize) -> usize {
    ((value * bins as f64) as usize).min(bins - 1)
}

/// Half-open row (or column) span of grid cell `k` along an axis of `len`.
fn cell_span(k: usize, len: usize) -> std::ops::Range<usize> {
    (k * len / GRID)..((k + 1) * len / GRID)
}

pub fn extract_features(image: &RasterImage) -> FeatureVector {
    let hsv = image.to_hsv();
    let mut out = vec![0.0; FEATURE_DIM];

    for p in &hsv.pixels {
        let idx = bin(p[0], HUE_BINS) * SAT_BINS * VAL_BINS
            + bin(p[1], SAT_BINS) * VAL_BINS
            + bin(p[2], VAL_BINS);
        out[idx] += 1.0;
    }
    let total = hsv.pixels.len() as f64;
    out[..HIST_LEN].iter_mut().for_each(|h| *h /= total);

    let (w, h) = (hsv.width, hsv.height);
    for r in 0..GRID {
        for c in 0..GRID {
            let rows = cell_span(r, h);
            let cols = cell_span(c, w);
            let cell = rows.flat_map(|y| cols.clone().map(move |x| y * w + x));
            let n = cell.clone().count() as f64;
            let sat = cell.clone().map(|i| hsv.pixels[i][1]).sum::<f64>() / n;
            let (val, con) = mean_std(cell.map(|i| hsv.pixels[i][2]));
            let k = r * GRID + c;
            out[SAT_GRID_OFFSET + k] = sat;
            out[VAL_GRID_OFFSET + k] = val;
            out[CONTRAST_GRID_OFFSET + k] = con;
        }
    }

    let params = params_of_hsv(&hsv);
    out[PARAMS_OFFSET..].copy_from_slice(&params.to_array());
    FeatureVector(out)
}

/// Per-dimension affine standardization fitted on a training collection.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Dimensions whose training std falls below this are left unscaled.
const MIN_SCALE: f64 = 1e-12;

impl StandardizationStats {
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = features.into_iter().collect();
        let first = rows.first().ok_or(Error::EmptyFeatureSet)?;
        let dim = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > MIN_SCALE {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: f.len(),
            });
        }
        Ok(f.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn apply_all(&self, rows: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut data = Vec::with_capacity(rows.rows() * rows.cols());
        for r in rows.iter_rows() {
            data.extend(self.apply(r)?);
        }
        Ok(FeatureMatrix::from_vec(rows.rows(), self.dim(), data))
    }
}

pub fn fit_standardization(features: &[FeatureVector]) -> Result<StandardizationStats> {
    StandardizationStats::fit(features.iter().map(FeatureVector::as_slice))
}

pub fn apply_standardization(stats: &StandardizationStats, f: &FeatureVector) -> Result<Vec<f64>> {
    stats.apply(f.as_slice())
}
