//! RGB rasters, hexcone HSV conversion and the PNG codec.

use std::path::Path;

use crate::error::{Error, Result};

/// Smallest side length accepted; the grid features need a 12x12 partition.
pub const MIN_SIDE: usize = 12;

/// Row-major RGB image with every channel in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} is smaller than {MIN_SIDE}x{MIN_SIDE}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels, found {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(i) = pixels
            .iter()
            .position(|p| p.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(Error::InvalidImage(format!(
                "pixel {i} has a channel outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image where every pixel has the same colour.
    pub fn uniform(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn to_hsv(&self) -> HsvImage {
        rgb_to_hsv(self)
    }

    /// Rounds every channel to the nearest 8-bit level, exactly as a PNG
    /// round trip would.
    pub fn quantized(&self) -> Self {
        let pixels = self
            .pixels
            .iter()
            .map(|p| p.map(|c| f64::from(to_u8(c)) / 255.0))
            .collect();
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let decoded = image::open(path).map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let rgb = decoded.to_rgb8();
        let (w, h) = rgb.dimensions();
        let pixels = rgb
            .pixels()
            .map(|p| p.0.map(|c| f64::from(c) / 255.0))
            .collect();
        Self::new(w as usize, h as usize, pixels)
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let mut buf = Vec::with_capacity(self.pixels.len() * 3);
        for p in &self.pixels {
            buf.extend(p.iter().map(|&c| to_u8(c)));
        }
        image::RgbImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer length matches dimensions")
    }

    /// Encodes as an 8-bit RGB PNG.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_rgb8()
            .write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        crate::pipeline::write_atomic(path, &self.encode_png()?)
    }
}

fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// HSV raster: hue stored as angle/360, all channels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HsvImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl HsvImage {
    /// Converts back to RGB. Channels are clamped into `[0, 1]`.
    pub fn to_rgb(&self) -> RasterImage {
        let pixels = self.pixels.iter().map(|&p| hsv_to_rgb_pixel(p)).collect();
        RasterImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub fn value_channel(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.pixels.iter().map(|p| p[2])
    }
}

pub fn rgb_to_hsv(image: &RasterImage) -> HsvImage {
    HsvImage {
        width: image.width,
        height: image.height,
        pixels: image.pixels.iter().map(|&p| rgb_to_hsv_pixel(p)).collect(),
    }
}

pub fn rgb_to_hsv_pixel([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else {
        let sector = if max == r {
            ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            (b - r) / delta + 2.0
        } else {
            (r - g) / delta + 4.0
        };
        // rem_euclid can round up to exactly 6.0 for tiny negative inputs
        (sector / 6.0).min(1.0)
    };
    [h, s, max]
}

pub fn hsv_to_rgb_pixel([h, s, v]: [f64; 3]) -> [f64; 3] {
    let c = v * s;
    let sector = (h * 6.0).rem_euclid(6.0);
    let x = c * (1.0 - (sector % 2.0 - 1.0).abs());
    let (r, g, b) = match sector as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m].map(|ch| ch.clamp(0.0, 1.0))
}
