//! Convolution geometry and the im2col/col2im lowering used by the
//! convolution and transposed-convolution ops.
//!
//! Layouts are channel-last throughout: activations are NHWC and kernels
//! are HWIO (`[kh, kw, cin, cout]`), so a kernel viewed as a row-major
//! `[kh*kw*cin, cout]` matrix multiplies an im2col matrix directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding so that the output has `ceil(in / stride)` rows/cols.
    /// When the total padding is odd the extra row/col goes bottom/right.
    Same,
    /// No padding.
    Valid,
}

/// Resolved geometry of a strided 2-D convolution over an NHWC batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub out_c: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

fn same_padding(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    (out, total / 2)
}

impl ConvGeom {
    pub fn new(
        input_shape: &[usize],
        kernel_shape: &[usize],
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        let [batch, in_h, in_w, in_c] = *input_shape else {
            return Err(Error::dim(format!("conv input must be NHWC, got {input_shape:?}")));
        };
        let [k_h, k_w, k_in, out_c] = *kernel_shape else {
            return Err(Error::dim(format!("conv kernel must be HWIO, got {kernel_shape:?}")));
        };
        if stride == 0 {
            return Err(Error::config("stride must be positive"));
        }
        if k_in != in_c {
            return Err(Error::dim(format!(
                "kernel expects {k_in} input channels, input has {in_c}"
            )));
        }
        let (out_h, pad_top, out_w, pad_left) = match padding {
            Padding::Same => {
                let (oh, pt) = same_padding(in_h, k_h, stride);
                let (ow, pl) = same_padding(in_w, k_w, stride);
                (oh, pt, ow, pl)
            }
            Padding::Valid => {
                if k_h > in_h || k_w > in_w {
                    return Err(Error::dim(format!(
                        "kernel {k_h}x{k_w} larger than input {in_h}x{in_w}"
                    )));
                }
                ((in_h - k_h) / stride + 1, 0, (in_w - k_w) / stride + 1, 0)
            }
        };
        Ok(Self { batch, in_h, in_w, in_c, k_h, k_w, out_c, stride, pad_top, pad_left, out_h, out_w })
    }

    /// Columns of the im2col matrix, `kh*kw*cin`.
    pub fn patch_len(&self) -> usize {
        self.k_h * self.k_w * self.in_c
    }

    /// Rows of the im2col matrix, `n*oh*ow`.
    pub fn rows(&self) -> usize {
        self.batch * self.out_h * self.out_w
    }

    pub fn input_shape(&self) -> [usize; 4] {
        [self.batch, self.in_h, self.in_w, self.in_c]
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.out_h, self.out_w, self.out_c]
    }

    /// Input row/col touched by output position `o` and kernel tap `k`, if
    /// it falls inside the (unpadded) input.
    #[inline]
    fn source(o: usize, k: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        let pos = (o * stride + k) as isize - pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

pub fn im2col<S: Scalar>(input: &[S], g: &ConvGeom) -> Vec<S> {
    let patch = g.patch_len();
    let mut cols = vec![S::zero(); g.rows() * patch];
    let c = g.in_c;
    for n in 0..g.batch {
        let img = &input[n * g.in_h * g.in_w * c..(n + 1) * g.in_h * g.in_w * c];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let row = ((n * g.out_h + oy) * g.out_w + ox) * patch;
                for ky in 0..g.k_h {
                    let Some(iy) = ConvGeom::source(oy, ky, g.stride, g.pad_top, g.in_h) else {
                        continue;
                    };
                    for kx in 0..g.k_w {
                        let Some(ix) = ConvGeom::source(ox, kx, g.stride, g.pad_left, g.in_w)
                        else {
                            continue;
                        };
                        let dst = row + (ky * g.k_w + kx) * c;
                        let src = (iy * g.in_w + ix) * c;
                        cols[dst..dst + c].copy_from_slice(&img[src..src + c]);
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add an im2col-shaped matrix back onto an NHWC buffer.
pub fn col2im<S: Scalar>(cols: &[S], g: &ConvGeom, out: &mut [S]) {
    let patch = g.patch_len();
    let c = g.in_c;
    for n in 0..g.batch {
        let img = &mut out[n * g.in_h * g.in_w * c..(n + 1) * g.in_h * g.in_w * c];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let row = ((n * g.out_h + oy) * g.out_w + ox) * patch;
                for ky in 0..g.k_h {
                    let Some(iy) = ConvGeom::source(oy, ky, g.stride, g.pad_top, g.in_h) else {
                        continue;
                    };
                    for kx in 0..g.k_w {
                        let Some(ix) = ConvGeom::source(ox, kx, g.stride, g.pad_left, g.in_w)
                        else {
                            continue;
                        };
                        let src = row + (ky * g.k_w + kx) * c;
                        let dst = (iy * g.in_w + ix) * c;
                        for (d, &s) in img[dst..dst + c].iter_mut().zip(&cols[src..src + c]) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }
}
