use std::path::Path;

use image::DynamicImage;

use super::ImageRecord;
use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width * height != pixels.len() {
            return Err(Error::Validation(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::Validation(format!("pixel intensity {v} outside [0, 1]")));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> GrayImage {
        let mut pixels = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            pixels.extend_from_slice(&self.pixels[y * self.width + x0..y * self.width + x0 + w]);
        }
        GrayImage {
            width: w,
            height: h,
            pixels,
        }
    }
}

/// Luminance conversion. Sources whose channels are already equal pass through unchanged.
pub fn to_grayscale(img: &DynamicImage) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb8(b) => b
            .pixels()
            .map(|p| luminance(p.0.map(|c| c as f64 / 255.0)))
            .collect(),
        DynamicImage::ImageRgba8(b) => b
            .pixels()
            .map(|p| luminance([p.0[0], p.0[1], p.0[2]].map(|c| c as f64 / 255.0)))
            .collect(),
        DynamicImage::ImageRgb16(b) => b
            .pixels()
            .map(|p| luminance(p.0.map(|c| c as f64 / 65535.0)))
            .collect(),
        DynamicImage::ImageRgba16(b) => b
            .pixels()
            .map(|p| luminance([p.0[0], p.0[1], p.0[2]].map(|c| c as f64 / 65535.0)))
            .collect(),
        other => other
            .to_rgb32f()
            .pixels()
            .map(|p| luminance(p.0.map(|c| (c as f64).clamp(0.0, 1.0))))
            .collect(),
    };
    GrayImage {
        width: w,
        height: h,
        pixels,
    }
}

#[inline]
fn luminance([r, g, b]: [f64; 3]) -> f64 {
    if r == g && g == b {
        r
    } else {
        (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0)
    }
}

/// Bilinear resampling with corner alignment: output corners sample input corners exactly.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> GrayImage {
    if img.width == out_w && img.height == out_h {
        return img.clone();
    }
    let scale = |n_in: usize, n_out: usize| {
        if n_out > 1 {
            (n_in as f64 - 1.0) / (n_out as f64 - 1.0)
        } else {
            0.0
        }
    };
    let sx = scale(img.width, out_w);
    let sy = scale(img.height, out_h);
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let fy = oy as f64 * sy;
        let y0 = (fy.floor() as usize).min(img.height - 1);
        let y1 = (y0 + 1).min(img.height - 1);
        let ty = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ox as f64 * sx;
            let x0 = (fx.floor() as usize).min(img.width - 1);
            let x1 = (x0 + 1).min(img.width - 1);
            let tx = fx - x0 as f64;
            let top = img.get(x0, y0) * (1.0 - tx) + img.get(x1, y0) * tx;
            let bottom = img.get(x0, y1) * (1.0 - tx) + img.get(x1, y1) * tx;
            pixels.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    GrayImage {
        width: out_w,
        height: out_h,
        pixels,
    }
}

/// Decodes, crops to the record's bbox, converts to luminance and resizes to `side`×`side`.
pub fn load_image(record: &ImageRecord, side: usize) -> Result<GrayImage> {
    let fail = |message: String| Error::Image {
        id: record.id.clone(),
        message,
    };
    if side < 16 {
        return Err(Error::Validation(format!("image side {side} is below 16")));
    }
    let decoded = image::ImageReader::open(&record.path)
        .map_err(|e| fail(format!("{}: {e}", record.path.display())))?
        .with_guessed_format()
        .map_err(|e| fail(format!("{}: {e}", record.path.display())))?
        .decode()
        .map_err(|e| fail(format!("{}: {e}", record.path.display())))?;
    let mut gray = to_grayscale(&decoded);
    if let Some(b) = record.bbox {
        let (x, y, w, h) = (b.x as usize, b.y as usize, b.w as usize, b.h as usize);
        if w == 0 || h == 0 || x + w > gray.width || y + h > gray.height {
            return Err(fail(format!(
                "bbox ({x}, {y}, {w}, {h}) outside {}x{} image",
                gray.width, gray.height
            )));
        }
        if !(x == 0 && y == 0 && w == gray.width && h == gray.height) {
            gray = gray.crop(x, y, w, h);
        }
    }
    Ok(resize_bilinear(&gray, side, side))
}

/// Writes an 8-bit grayscale PNG.
pub fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img
        .pixels
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(img.width as u32, img.height as u32, bytes)
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            id: path.display().to_string(),
            message: e.to_string(),
        })
}
