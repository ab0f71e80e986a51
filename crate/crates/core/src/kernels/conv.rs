//! Direct 2-D convolution lowered to GEMM through an im2col buffer.
//!
//! Weights are stored `(kh, kw, cin, cout)` row-major, so one im2col row
//! (a receptive field in `(ky, kx, c)` order) multiplies the weight
//! matrix directly and the product comes out in H×W×C layout.

use super::gemm::{gemm, Layout};
use super::tensor::Tensor;
use crate::degrade::reflect_index;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Zero,
    Reflect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: usize,
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    pub pad: usize,
    pub padding: Padding,
}

impl ConvSpec {
    /// Same-size (for stride 1) odd-kernel convolution with zero padding.
    pub fn same(kernel: usize, cin: usize, cout: usize) -> Self {
        Self {
            kernel,
            cin,
            cout,
            stride: 1,
            pad: kernel / 2,
            padding: Padding::Zero,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn weight_len(&self) -> usize {
        self.kernel * self.kernel * self.cin * self.cout
    }

    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.cin
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        let o = |n: usize| (n + 2 * self.pad - self.kernel) / self.stride + 1;
        (o(h), o(w))
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.pad == 0
    }

    fn check(&self, x: &Tensor, w: &[f64], b: Option<&[f64]>) -> Result<()> {
        if x.c() != self.cin {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {}",
                self.cin,
                x.c()
            )));
        }
        if w.len() != self.weight_len() {
            return Err(Error::shape(format!(
                "conv expects {} weights, got {}",
                self.weight_len(),
                w.len()
            )));
        }
        if let Some(b) = b {
            if b.len() != self.cout {
                return Err(Error::shape(format!("conv expects {} biases, got {}", self.cout, b.len())));
            }
        }
        if self.stride == 0 {
            return Err(Error::shape("conv stride must be >= 1"));
        }
        if x.h() + 2 * self.pad < self.kernel || x.w() + 2 * self.pad < self.kernel {
            return Err(Error::shape(format!(
                "input {}x{} too small for a {}x{} kernel",
                x.h(),
                x.w(),
                self.kernel,
                self.kernel
            )));
        }
        if self.padding == Padding::Reflect && (self.pad >= x.h().max(2) || self.pad >= x.w().max(2)) {
            return Err(Error::shape("reflect padding must be smaller than the input"));
        }
        Ok(())
    }

    /// Source coordinate of an input tap, `None` for a zero-padded tap.
    #[inline]
    fn source(&self, o: usize, k: usize, n: usize) -> Option<usize> {
        let i = (o * self.stride + k) as isize - self.pad as isize;
        if i >= 0 && (i as usize) < n {
            Some(i as usize)
        } else {
            match self.padding {
                Padding::Zero => None,
                Padding::Reflect => Some(reflect_index(i, n)),
            }
        }
    }
}

fn im2col(x: &Tensor, spec: &ConvSpec) -> Vec<f64> {
    let (oh, ow) = spec.out_size(x.h(), x.w());
    let (k, c) = (spec.kernel, spec.cin);
    let plen = spec.patch_len();
    let mut cols = vec![0.0; oh * ow * plen];
    let src = x.data();
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &mut cols[(oy * ow + ox) * plen..(oy * ow + ox + 1) * plen];
            for ky in 0..k {
                let Some(iy) = spec.source(oy, ky, x.h()) else { continue };
                for kx in 0..k {
                    let Some(ix) = spec.source(ox, kx, x.w()) else { continue };
                    let s = (iy * x.w() + ix) * c;
                    let d = (ky * k + kx) * c;
                    row[d..d + c].copy_from_slice(&src[s..s + c]);
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], spec: &ConvSpec, h: usize, w: usize) -> Tensor {
    let (oh, ow) = spec.out_size(h, w);
    let (k, c) = (spec.kernel, spec.cin);
    let plen = spec.patch_len();
    let mut dx = Tensor::zeros(h, w, c);
    let dst = dx.data_mut();
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &cols[(oy * ow + ox) * plen..(oy * ow + ox + 1) * plen];
            for ky in 0..k {
                let Some(iy) = spec.source(oy, ky, h) else { continue };
                for kx in 0..k {
                    let Some(ix) = spec.source(ox, kx, w) else { continue };
                    let s = (iy * w + ix) * c;
                    let d = (ky * k + kx) * c;
                    for ch in 0..c {
                        dst[s + ch] += row[d + ch];
                    }
                }
            }
        }
    }
    dx
}

pub fn conv2d_fwd(x: &Tensor, w: &[f64], b: Option<&[f64]>, spec: &ConvSpec) -> Result<Tensor> {
    spec.check(x, w, b)?;
    let (oh, ow) = spec.out_size(x.h(), x.w());
    let p = oh * ow;
    let mut out = vec![0.0; p * spec.cout];
    if let Some(b) = b {
        for row in out.chunks_exact_mut(spec.cout) {
            row.copy_from_slice(b);
        }
    }
    let beta = if b.is_some() { 1.0 } else { 0.0 };
    let owned;
    let cols: &[f64] = if spec.is_pointwise() {
        x.data()
    } else {
        owned = im2col(x, spec);
        &owned
    };
    gemm(
        p,
        spec.patch_len(),
        spec.cout,
        cols,
        Layout::row_major(spec.patch_len()),
        w,
        Layout::row_major(spec.cout),
        beta,
        &mut out,
    );
    Tensor::new(oh, ow, spec.cout, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub dx: Tensor,
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
}

pub fn conv2d_bwd(x: &Tensor, w: &[f64], spec: &ConvSpec, dy: &Tensor) -> Result<ConvGrads> {
    spec.check(x, w, None)?;
    let (oh, ow) = spec.out_size(x.h(), x.w());
    if dy.shape() != (oh, ow, spec.cout) {
        return Err(Error::shape(format!(
            "conv upstream gradient is {:?}, expected {:?}",
            dy.shape(),
            (oh, ow, spec.cout)
        )));
    }
    let p = oh * ow;
    let plen = spec.patch_len();
    let owned;
    let cols: &[f64] = if spec.is_pointwise() {
        x.data()
    } else {
        owned = im2col(x, spec);
        &owned
    };

    let mut dw = vec![0.0; spec.weight_len()];
    gemm(
        plen,
        p,
        spec.cout,
        cols,
        Layout::transposed(plen),
        dy.data(),
        Layout::row_major(spec.cout),
        0.0,
        &mut dw,
    );

    let mut db = vec![0.0; spec.cout];
    for row in dy.data().chunks_exact(spec.cout) {
        db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }

    let mut dcols = vec![0.0; p * plen];
    gemm(
        p,
        spec.cout,
        plen,
        dy.data(),
        Layout::row_major(spec.cout),
        w,
        Layout::transposed(spec.cout),
        0.0,
        &mut dcols,
    );
    let dx = if spec.is_pointwise() {
        Tensor::new(x.h(), x.w(), x.c(), dcols)?
    } else {
        col2im(&dcols, spec, x.h(), x.w())
    };
    Ok(ConvGrads { dx, dw, db })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Nested-loop reference, independent of im2col and GEMM.
    fn brute_conv(x: &Tensor, w: &[f64], b: &[f64], spec: &ConvSpec) -> Tensor {
        let (oh, ow) = spec.out_size(x.h(), x.w());
        let k = spec.kernel as isize;
        Tensor::from_fn(oh, ow, spec.cout, |oy, ox, co| {
            let mut acc = b[co];
            for ky in 0..k {
                for kx in 0..k {
                    let iy = (oy * spec.stride) as isize + ky - spec.pad as isize;
                    let ix = (ox * spec.stride) as isize + kx - spec.pad as isize;
                    let (iy, ix) = match spec.padding {
                        Padding::Zero => {
                            if iy < 0 || ix < 0 || iy >= x.h() as isize || ix >= x.w() as isize {
                                continue;
                            }
                            (iy as usize, ix as usize)
                        }
                        Padding::Reflect => (reflect_index(iy, x.h()), reflect_index(ix, x.w())),
                    };
                    for ci in 0..spec.cin {
                        let wi = ((ky as usize * spec.kernel + kx as usize) * spec.cin + ci) * spec.cout + co;
                        acc += w[wi] * x.get(iy, ix, ci);
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn pointwise_identity() {
        let x = Tensor::from_fn(4, 5, 3, |y, xx, c| (y * 15 + xx * 3 + c) as f64 * 0.1);
        let mut w = vec![0.0; 9];
        for c in 0..3 {
            w[c * 3 + c] = 1.0;
        }
        let spec = ConvSpec::same(1, 3, 3);
        assert_eq!(conv2d_fwd(&x, &w, None, &spec).unwrap(), x);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let specs = [
            ConvSpec::same(3, 3, 4),
            ConvSpec::same(3, 2, 5).with_stride(2),
            ConvSpec::same(5, 2, 3).with_padding(Padding::Reflect),
            ConvSpec::same(1, 4, 2).with_stride(2),
            ConvSpec::same(3, 3, 2).with_stride(2).with_padding(Padding::Reflect),
        ];
        for spec in specs {
            let x = Tensor::new(7, 6, spec.cin, random(&mut rng, 7 * 6 * spec.cin)).unwrap();
            let w = random(&mut rng, spec.weight_len());
            let b = random(&mut rng, spec.cout);
            let fast = conv2d_fwd(&x, &w, Some(&b), &spec).unwrap();
            let slow = brute_conv(&x, &w, &b, &spec);
            assert_eq!(fast.shape(), slow.shape());
            for (a, e) in fast.data().iter().zip(slow.data()) {
                assert!((a - e).abs() <= 1e-6, "{spec:?}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::zeros(4, 4, 2);
        let spec = ConvSpec::same(3, 3, 1);
        assert!(conv2d_fwd(&x, &vec![0.0; spec.weight_len()], None, &spec).is_err());
        let spec = ConvSpec::same(3, 2, 1);
        assert!(conv2d_fwd(&x, &[0.0; 3], None, &spec).is_err());
    }
}
