//! Bilinear resizing and adaptive average pooling with their adjoints.

use super::tensor::Tensor;
use crate::colorcore::bilinear_coord;
use crate::error::{Error, Result};

/// Align-corners bilinear resize.
pub fn bilinear_fwd(x: &Tensor, oh: usize, ow: usize) -> Tensor {
    let c = x.c();
    let mut out = Tensor::zeros(oh, ow, c);
    for y in 0..oh {
        let (y0, y1, fy) = bilinear_coord(y, oh, x.h());
        for xx in 0..ow {
            let (x0, x1, fx) = bilinear_coord(xx, ow, x.w());
            let weights = [
                (y0, x0, (1.0 - fy) * (1.0 - fx)),
                (y0, x1, (1.0 - fy) * fx),
                (y1, x0, fy * (1.0 - fx)),
                (y1, x1, fy * fx),
            ];
            let o = out.idx(y, xx, 0);
            for (sy, sx, wgt) in weights {
                let s = x.idx(sy, sx, 0);
                for ch in 0..c {
                    let v = x.data()[s + ch];
                    out.data_mut()[o + ch] += wgt * v;
                }
            }
        }
    }
    out
}

/// Adjoint of [`bilinear_fwd`]: scatters `dy` back onto an `h×w` grid.
pub fn bilinear_bwd(dy: &Tensor, h: usize, w: usize) -> Tensor {
    let (oh, ow, c) = dy.shape();
    let mut dx = Tensor::zeros(h, w, c);
    for y in 0..oh {
        let (y0, y1, fy) = bilinear_coord(y, oh, h);
        for xx in 0..ow {
            let (x0, x1, fx) = bilinear_coord(xx, ow, w);
            let weights = [
                (y0, x0, (1.0 - fy) * (1.0 - fx)),
                (y0, x1, (1.0 - fy) * fx),
                (y1, x0, fy * (1.0 - fx)),
                (y1, x1, fy * fx),
            ];
            let o = dy.idx(y, xx, 0);
            for (sy, sx, wgt) in weights {
                let s = dx.idx(sy, sx, 0);
                for ch in 0..c {
                    let g = dy.data()[o + ch];
                    dx.data_mut()[s + ch] += wgt * g;
                }
            }
        }
    }
    dx
}

/// Bin `[start, end)` of adaptive pooling; bins overlap when `bins > n`.
#[inline]
fn bin_range(i: usize, bins: usize, n: usize) -> (usize, usize) {
    let start = (i * n) / bins;
    let end = ((i + 1) * n).div_ceil(bins);
    (start, end.max(start + 1))
}

pub fn adaptive_avg_pool_fwd(x: &Tensor, bins: usize) -> Result<Tensor> {
    if bins == 0 || x.h() == 0 || x.w() == 0 {
        return Err(Error::shape("adaptive pooling needs non-empty input and bins"));
    }
    let c = x.c();
    let mut out = Tensor::zeros(bins, bins, c);
    for by in 0..bins {
        let (y0, y1) = bin_range(by, bins, x.h());
        for bx in 0..bins {
            let (x0, x1) = bin_range(bx, bins, x.w());
            let inv = 1.0 / ((y1 - y0) * (x1 - x0)) as f64;
            let o = out.idx(by, bx, 0);
            for y in y0..y1 {
                for xx in x0..x1 {
                    let s = x.idx(y, xx, 0);
                    for ch in 0..c {
                        let v = x.data()[s + ch];
                        out.data_mut()[o + ch] += v * inv;
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn adaptive_avg_pool_bwd(dy: &Tensor, h: usize, w: usize) -> Tensor {
    let bins = dy.h();
    let c = dy.c();
    let mut dx = Tensor::zeros(h, w, c);
    for by in 0..bins {
        let (y0, y1) = bin_range(by, bins, h);
        for bx in 0..bins {
            let (x0, x1) = bin_range(bx, bins, w);
            let inv = 1.0 / ((y1 - y0) * (x1 - x0)) as f64;
            let o = dy.idx(by, bx, 0);
            for y in y0..y1 {
                for xx in x0..x1 {
                    let s = dx.idx(y, xx, 0);
                    for ch in 0..c {
                        let g = dy.data()[o + ch];
                        dx.data_mut()[s + ch] += g * inv;
                    }
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling_bins_cover_input() {
        let x = Tensor::from_fn(6, 6, 1, |y, x, _| (y * 6 + x) as f64);
        let p = adaptive_avg_pool_fwd(&x, 1).unwrap();
        assert!((p.get(0, 0, 0) - 17.5).abs() < 1e-12);
        let p = adaptive_avg_pool_fwd(&x, 6).unwrap();
        assert_eq!(p, x);
        // fewer pixels than bins still gives one pixel per bin
        let small = Tensor::from_fn(2, 2, 1, |y, x, _| (y * 2 + x) as f64);
        let p = adaptive_avg_pool_fwd(&small, 3).unwrap();
        assert_eq!(p.shape(), (3, 3, 1));
        assert_eq!(p.get(0, 0, 0), 0.0);
        assert_eq!(p.get(2, 2, 0), 3.0);
    }

    #[test]
    fn adjoint_identities() {
        // <A x, y> = <x, A^T y>
        let x = Tensor::from_fn(5, 7, 2, |y, x, c| ((y * 13 + x * 7 + c * 3) % 11) as f64 - 5.0);
        let up = Tensor::from_fn(9, 4, 2, |y, x, c| ((y * 5 + x * 3 + c) % 7) as f64 - 3.0);
        let lhs: f64 = bilinear_fwd(&x, 9, 4).data().iter().zip(up.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(bilinear_bwd(&up, 5, 7).data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);

        let pooled_up = Tensor::from_fn(3, 3, 2, |y, x, c| (y + 2 * x + c) as f64);
        let lhs: f64 = adaptive_avg_pool_fwd(&x, 3).unwrap().data().iter().zip(pooled_up.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(adaptive_avg_pool_bwd(&pooled_up, 5, 7).data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
