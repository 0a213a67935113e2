//! Raster decoding and the fixed preprocessing applied before the network:
//! RGB, values scaled to `[0, 1]`, bilinear resize to 64x64.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const IMAGE_SIZE: usize = 64;
pub const CHANNELS: usize = 3;

fn image_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Image { path: path.to_path_buf(), reason: reason.into() }
}

/// Decodes a PNG/JPEG file into an `[h, w, 3]` tensor with values in
/// `[0, 1]`. Grayscale and alpha inputs are converted to plain RGB.
pub fn decode(path: &Path) -> Result<Tensor<f32>> {
    let img = image::open(path).map_err(|e| image_err(path, e.to_string()))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(image_err(path, "zero-sized image"));
    }
    from_rgb8(rgb.as_raw(), h as usize, w as usize)
}

pub fn from_rgb8(bytes: &[u8], height: usize, width: usize) -> Result<Tensor<f32>> {
    let data = bytes.iter().map(|&b| f32::from(b) / 255.0).collect();
    Tensor::new(&[height, width, CHANNELS], data)
}

/// Decode, convert and resize to `size x size`.
pub fn preprocess_file(path: &Path, size: usize) -> Result<Tensor<f32>> {
    let img = decode(path)?;
    Ok(resize_bilinear(&img, size, size))
}

/// [`preprocess_file`] at the network's 64x64 input size.
pub fn decode_and_preprocess(path: &Path) -> Result<Tensor<f32>> {
    preprocess_file(path, IMAGE_SIZE)
}

/// Bilinear resampling of an `[h, w, c]` image with half-pixel centres
/// (source coordinate `(dst + 0.5) * scale - 0.5`, clamped to the edge).
/// Resizing to the same size is the identity.
pub fn resize_bilinear(img: &Tensor<f32>, out_h: usize, out_w: usize) -> Tensor<f32> {
    let &[h, w, c] = img.shape() else {
        panic!("resize_bilinear expects [h, w, c], got {:?}", img.shape());
    };
    if h == out_h && w == out_w {
        return img.clone();
    }
    let src = img.data();
    let axis = |dst: usize, in_len: usize, out_len: usize| {
        let scale = in_len as f64 / out_len as f64;
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(in_len - 1);
        (lo, hi, (pos - lo as f64) as f32)
    };
    let cols: Vec<_> = (0..out_w).map(|x| axis(x, w, out_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for y in 0..out_h {
        let (y0, y1, fy) = axis(y, h, out_h);
        for &(x0, x1, fx) in &cols {
            for ch in 0..c {
                let at = |yy: usize, xx: usize| src[(yy * w + xx) * c + ch];
                let top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * fx;
                let bottom = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * fx;
                out.push(top + (bottom - top) * fy);
            }
        }
    }
    Tensor::new(&[out_h, out_w, c], out).expect("resize output shape")
}

/// Quantises a `[0, 1]` image to 8 bits and writes a PNG.
pub fn save_png(img: &Tensor<f32>, path: &Path) -> Result<()> {
    let &[h, w, c] = img.shape() else {
        return Err(Error::dim(format!("save_png expects [h, w, 3], got {:?}", img.shape())));
    };
    if c != CHANNELS {
        return Err(Error::dim(format!("save_png expects 3 channels, got {c}")));
    }
    let bytes: Vec<u8> = img.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let buf = image::RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| image_err(path, e.to_string()))
}
