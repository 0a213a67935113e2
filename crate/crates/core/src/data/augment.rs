use crate::data::image::resize_bilinear;
use crate::data::manifest::Augmentation;
use crate::nn::Tensor;

/// Fraction of the width kept by the left/right crops.
pub const CROP_FRACTION: f64 = 0.85;

pub fn flip_horizontal(img: &Tensor<f32>) -> Tensor<f32> {
    let &[h, w, c] = img.shape() else {
        panic!("flip expects [h, w, c], got {:?}", img.shape());
    };
    let src = img.data();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in (0..w).rev() {
            out.extend_from_slice(&src[(y * w + x) * c..(y * w + x + 1) * c]);
        }
    }
    Tensor::new(img.shape(), out).expect("same shape")
}

/// Columns kept by a crop: `floor(0.85 * w)`, at least one.
pub fn crop_width(w: usize) -> usize {
    ((w as f64 * CROP_FRACTION).floor() as usize).max(1)
}

fn crop_columns(img: &Tensor<f32>, from_left: bool) -> Tensor<f32> {
    let &[h, w, c] = img.shape() else {
        panic!("crop expects [h, w, c], got {:?}", img.shape());
    };
    let keep = crop_width(w);
    let start = if from_left { 0 } else { w - keep };
    let src = img.data();
    let mut out = Vec::with_capacity(h * keep * c);
    for y in 0..h {
        out.extend_from_slice(&src[(y * w + start) * c..(y * w + start + keep) * c]);
    }
    let cropped = Tensor::new(&[h, keep, c], out).expect("crop shape");
    resize_bilinear(&cropped, h, w)
}

/// Leftmost 85% of the columns, full height, resized back.
pub fn crop_left(img: &Tensor<f32>) -> Tensor<f32> {
    crop_columns(img, true)
}

/// Rightmost 85% of the columns, full height, resized back.
pub fn crop_right(img: &Tensor<f32>) -> Tensor<f32> {
    crop_columns(img, false)
}

pub fn apply(aug: Augmentation, img: &Tensor<f32>) -> Tensor<f32> {
    match aug {
        Augmentation::Flip => flip_horizontal(img),
        Augmentation::CropLeft => crop_left(img),
        Augmentation::CropRight => crop_right(img),
    }
}

/// The three augmented versions of one image, in [`Augmentation::ALL`] order.
pub fn augment_sample(img: &Tensor<f32>) -> [Tensor<f32>; 3] {
    Augmentation::ALL.map(|a| apply(a, img))
}
