//! Filter-adaptive convolution: every pixel and channel is filtered with
//! its own d×d kernel taken from a predicted filter bank. Borders are
//! zero padded.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// H×W×(C·d²) per-pixel kernels; channel `c` owns taps `c·d² .. (c+1)·d²`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    taps: Tensor,
    d: usize,
}

impl FilterBank {
    pub fn new(taps: Tensor, d: usize) -> Result<Self> {
        if d == 0 || d.is_multiple_of(2) {
            return Err(Error::shape(format!("filter size must be odd, got {d}")));
        }
        if !taps.c().is_multiple_of(d * d) {
            return Err(Error::shape(format!(
                "filter bank has {} channels, not a multiple of {}",
                taps.c(),
                d * d
            )));
        }
        Ok(Self { taps, d })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tensor(&self) -> &Tensor {
        &self.taps
    }

    pub fn into_tensor(self) -> Tensor {
        self.taps
    }

    /// Feature channels this bank filters.
    pub fn channels(&self) -> usize {
        self.taps.c() / (self.d * self.d)
    }
}

fn check(x: &Tensor, k: &FilterBank) -> Result<()> {
    if k.taps.h() != x.h() || k.taps.w() != x.w() || k.channels() != x.c() {
        return Err(Error::shape(format!(
            "filter bank {:?} (d={}) does not match features {:?}",
            k.taps.shape(),
            k.d,
            x.shape()
        )));
    }
    Ok(())
}

pub fn fac_fwd(x: &Tensor, k: &FilterBank) -> Result<Tensor> {
    check(x, k)?;
    let (h, w, c) = x.shape();
    let d = k.d;
    let r = (d / 2) as isize;
    let dd = d * d;
    let mut out = Tensor::zeros(h, w, c);
    let kt = k.taps.data();
    let xs = x.data();
    for y in 0..h {
        for xx in 0..w {
            let kbase = (y * w + xx) * c * dd;
            let obase = (y * w + xx) * c;
            for u in 0..d {
                let sy = y as isize + u as isize - r;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for v in 0..d {
                    let sx = xx as isize + v as isize - r;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let sbase = (sy as usize * w + sx as usize) * c;
                    let t = u * d + v;
                    for ch in 0..c {
                        out.data_mut()[obase + ch] += kt[kbase + ch * dd + t] * xs[sbase + ch];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Returns `(dX, dK)`.
pub fn fac_bwd(x: &Tensor, k: &FilterBank, dy: &Tensor) -> Result<(Tensor, Tensor)> {
    check(x, k)?;
    x.expect_shape(dy, "FAC upstream gradient")?;
    let (h, w, c) = x.shape();
    let d = k.d;
    let r = (d / 2) as isize;
    let dd = d * d;
    let mut dx = Tensor::zeros(h, w, c);
    let mut dk = Tensor::zeros(h, w, c * dd);
    let kt = k.taps.data();
    let xs = x.data();
    for y in 0..h {
        for xx in 0..w {
            let kbase = (y * w + xx) * c * dd;
            let obase = (y * w + xx) * c;
            for u in 0..d {
                let sy = y as isize + u as isize - r;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for v in 0..d {
                    let sx = xx as isize + v as isize - r;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let sbase = (sy as usize * w + sx as usize) * c;
                    let t = u * d + v;
                    for ch in 0..c {
                        let g = dy.data()[obase + ch];
                        dk.data_mut()[kbase + ch * dd + t] = g * xs[sbase + ch];
                        dx.data_mut()[sbase + ch] += g * kt[kbase + ch * dd + t];
                    }
                }
            }
        }
    }
    Ok((dx, dk))
}
