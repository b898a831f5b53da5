//! Dense channel-major feature maps and the handful of kernels the U-Net
//! needs. Matrix products go through `matrixmultiply`.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::raster::{LayoutImage, WorldTransform};

/// Floating-point element type of the engine (`f32` for training, `f64`
/// for gradient checks).
pub trait Scalar:
    Copy
    + Debug
    + Default
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn is_finite(self) -> bool;

    /// `c = alpha * a * b + beta * c` with explicit row/column strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: isize, cs: isize) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows as isize - 1) * rs + (cols as isize - 1) * cs;
    assert!(rs >= 0 && cs >= 0 && (last as usize) < len, "gemm operand out of bounds");
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                check_extent(a.len(), m, k, rsa, csa);
                check_extent(b.len(), k, n, rsb, csb);
                check_extent(c.len(), m, n, rsc, csc);
                // SAFETY: every operand's extent was bounds-checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// `channels × height × width` feature map stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape((usize, usize, usize), (usize, usize, usize)),
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![T::ZERO; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), channels * height * width, "tensor data length");
        Tensor {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, o: &Tensor<T>) -> Result<(), TensorError> {
        if self.shape() == o.shape() {
            Ok(())
        } else {
            Err(TensorError::Shape(self.shape(), o.shape()))
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    /// Stack channels of `self` followed by those of `o`.
    pub fn concat_channels(&self, o: &Tensor<T>) -> Tensor<T> {
        assert_eq!((self.height, self.width), (o.height, o.width));
        let mut data = Vec::with_capacity(self.len() + o.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&o.data);
        Tensor::from_vec(self.channels + o.channels, self.height, self.width, data)
    }

    /// Inverse of `concat_channels`.
    pub fn split_channels(&self, first: usize) -> (Tensor<T>, Tensor<T>) {
        let cut = first * self.plane();
        (
            Tensor::from_vec(first, self.height, self.width, self.data[..cut].to_vec()),
            Tensor::from_vec(self.channels - first, self.height, self.width, self.data[cut..].to_vec()),
        )
    }

    pub fn mse(&self, o: &Tensor<T>) -> f64 {
        let s: f64 = self
            .data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| {
                let d = a.to_f64() - b.to_f64();
                d * d
            })
            .sum();
        s / self.len().max(1) as f64
    }
}

/// Layout image → 3-channel tensor with values mapped from `[0, 1]` to `[-1, 1]`.
pub fn image_to_tensor(img: &LayoutImage) -> Tensor<f32> {
    let plane = img.width * img.height;
    let mut data = vec![0.0f32; 3 * plane];
    for i in 0..plane {
        for c in 0..3 {
            data[c * plane + i] = img.pixels[i * 3 + c] * 2.0 - 1.0;
        }
    }
    Tensor::from_vec(3, img.height, img.width, data)
}

/// Inverse of `image_to_tensor`, clamped to `[0, 1]`.
pub fn tensor_to_image(t: &Tensor<f32>, transform: WorldTransform) -> LayoutImage {
    assert_eq!(t.channels, 3);
    let plane = t.plane();
    let mut pixels = vec![0.0f32; 3 * plane];
    for i in 0..plane {
        for c in 0..3 {
            pixels[i * 3 + c] = ((t.data[c * plane + i] + 1.0) * 0.5).clamp(0.0, 1.0);
        }
    }
    LayoutImage {
        width: t.width,
        height: t.height,
        pixels,
        transform,
    }
}

/// 3×3, pad 1 patches: rows `cin * 9`, columns `h * w`.
pub(crate) fn im2col3<T: Scalar>(x: &Tensor<T>) -> Vec<T> {
    let (c, h, w) = x.shape();
    let hw = h * w;
    let mut col = vec![T::ZERO; c * 9 * hw];
    for ci in 0..c {
        let src = &x.data[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (ci * 9 + ky * 3 + kx) * hw;
                let dst = &mut col[row..row + hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let srow = &src[sy as usize * w..(sy as usize + 1) * w];
                    let drow = &mut dst[y * w..(y + 1) * w];
                    let (x0, x1) = match kx {
                        0 => (1, w),
                        1 => (0, w),
                        _ => (0, w.saturating_sub(1)),
                    };
                    for xx in x0..x1 {
                        drow[xx] = srow[xx + kx - 1];
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of `im2col3`.
pub(crate) fn col2im3<T: Scalar>(col: &[T], c: usize, h: usize, w: usize) -> Tensor<T> {
    let hw = h * w;
    let mut x = Tensor::zeros(c, h, w);
    for ci in 0..c {
        let dst = &mut x.data[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (ci * 9 + ky * 3 + kx) * hw;
                let src = &col[row..row + hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let drow = &mut dst[sy as usize * w..(sy as usize + 1) * w];
                    let srow = &src[y * w..(y + 1) * w];
                    let (x0, x1) = match kx {
                        0 => (1, w),
                        1 => (0, w),
                        _ => (0, w.saturating_sub(1)),
                    };
                    for xx in x0..x1 {
                        drow[xx + kx - 1] += srow[xx];
                    }
                }
            }
        }
    }
    x
}

/// Non-overlapping 2×2 patches: rows `c * 4`, columns `(h/2) * (w/2)`.
pub(crate) fn patchify2<T: Scalar>(x: &Tensor<T>) -> Vec<T> {
    let (c, h, w) = x.shape();
    let (ho, wo) = (h / 2, w / 2);
    let n = ho * wo;
    let mut col = vec![T::ZERO; c * 4 * n];
    for ci in 0..c {
        for dy in 0..2 {
            for dx in 0..2 {
                let row = (ci * 4 + dy * 2 + dx) * n;
                for y in 0..ho {
                    for xx in 0..wo {
                        col[row + y * wo + xx] = x.data[ci * h * w + (2 * y + dy) * w + 2 * xx + dx];
                    }
                }
            }
        }
    }
    col
}

/// Inverse (and adjoint) of `patchify2`.
pub(crate) fn unpatchify2<T: Scalar>(col: &[T], c: usize, h: usize, w: usize) -> Tensor<T> {
    let (ho, wo) = (h / 2, w / 2);
    let n = ho * wo;
    let mut x = Tensor::zeros(c, h, w);
    for ci in 0..c {
        for dy in 0..2 {
            for dx in 0..2 {
                let row = (ci * 4 + dy * 2 + dx) * n;
                for y in 0..ho {
                    for xx in 0..wo {
                        x.data[ci * h * w + (2 * y + dy) * w + 2 * xx + dx] = col[row + y * wo + xx];
                    }
                }
            }
        }
    }
    x
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    T::ONE / (T::ONE + (-x).exp())
}

pub(crate) fn silu<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v * sigmoid(v)).collect()
}

/// Gradient through SiLU given its pre-activation input.
pub(crate) fn silu_backward<T: Scalar>(pre: &[T], grad: &[T]) -> Vec<T> {
    pre.iter()
        .zip(grad)
        .map(|(&x, &g)| {
            let s = sigmoid(x);
            g * s * (T::ONE + x * (T::ONE - s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(c: usize, h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_vec(c, h, w, (0..c * h * w).map(|i| (i as f64 * 0.37).sin()).collect())
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn im2col_adjoint_identity() {
        // <im2col(x), y> == <x, col2im(y)>
        let x = ramp(2, 5, 4);
        let col = im2col3(&x);
        let y: Vec<f64> = (0..col.len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let back = col2im3(&y, 2, 5, 4);
        assert!((dot(&col, &y) - dot(&x.data, &back.data)).abs() < 1e-10);
    }

    #[test]
    fn im2col_centre_tap_is_identity() {
        let x = ramp(1, 3, 3);
        let col = im2col3(&x);
        assert_eq!(&col[4 * 9..5 * 9], &x.data[..]);
    }

    #[test]
    fn patchify_round_trip() {
        let x = ramp(3, 4, 6);
        assert_eq!(unpatchify2(&patchify2(&x), 3, 4, 6), x);
    }

    #[test]
    fn gemm_matches_naive() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]; // 3x2
        let mut c = [0.0f64; 4];
        f64::gemm(2, 3, 2, 1.0, &a, 3, 1, &b, 2, 1, 0.0, &mut c, 2, 1);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
    }

    #[test]
    fn image_tensor_round_trip() {
        let mut img = LayoutImage::filled(3, 2, [1.0, 0.7, 0.0], WorldTransform::identity());
        img.set(1, 1, [0.25, 0.5, 0.75]);
        let t = image_to_tensor(&img);
        assert_eq!(t.shape(), (3, 2, 3));
        assert_eq!(tensor_to_image(&t, img.transform), img);
    }
}
