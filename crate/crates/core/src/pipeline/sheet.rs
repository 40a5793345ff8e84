//! Static contact sheet: ranked candidates tiled row-major into one image.

use image::{imageops, RgbImage};

use crate::features::RasterImage;

/// Pixel layout of a sheet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SheetLayout {
    pub columns: usize,
    /// Side of the square each thumbnail is fitted into.
    pub tile: u32,
    pub gap: u32,
}

impl Default for SheetLayout {
    fn default() -> Self {
        Self {
            columns: 8,
            tile: 96,
            gap: 4,
        }
    }
}

impl SheetLayout {
    /// Top-left pixel of tile `i`.
    pub fn origin(&self, i: usize) -> (u32, u32) {
        let step = self.tile + self.gap;
        let (r, c) = (i / self.columns, i % self.columns);
        (self.gap + c as u32 * step, self.gap + r as u32 * step)
    }
}

/// Tiles `images` in order on a white background. Each thumbnail keeps its
/// aspect ratio. Returns `None` for an empty input.
pub fn contact_sheet(images: &[&RasterImage], layout: SheetLayout) -> Option<RasterImage> {
    if images.is_empty() || layout.columns == 0 || layout.tile == 0 {
        return None;
    }
    let cols = layout.columns.min(images.len());
    let rows = images.len().div_ceil(layout.columns);
    let step = layout.tile + layout.gap;
    let mut sheet = RgbImage::from_pixel(
        layout.gap + cols as u32 * step,
        layout.gap + rows as u32 * step,
        image::Rgb([255, 255, 255]),
    );
    for (i, img) in images.iter().enumerate() {
        let (w, h) = (img.width() as f64, img.height() as f64);
        let scale = f64::from(layout.tile) / w.max(h);
        let fit = |v: f64| ((v * scale).round() as u32).clamp(1, layout.tile);
        let thumb = imageops::thumbnail(&img.to_rgb8(), fit(w), fit(h));
        let (x, y) = layout.origin(i);
        imageops::replace(&mut sheet, &thumb, i64::from(x), i64::from(y));
    }
    let (w, h) = sheet.dimensions();
    let pixels = sheet.pixels().map(|p| p.0.map(|c| f64::from(c) / 255.0)).collect();
    RasterImage::new(w as usize, h as usize, pixels).ok()
}
