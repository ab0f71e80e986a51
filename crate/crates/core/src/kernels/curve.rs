//! Curve non-linear unit: an iterated quadratic curve
//! `C <- A_i * C * (1 - C) + C` applied to the clipped input, with one
//! parameter map per iteration shared across channels.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Per-pixel curve parameters, H×W×n, all in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CurveParams(Tensor);

impl CurveParams {
    pub fn new(t: Tensor) -> Result<Self> {
        if let Some(v) = t.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("curve parameter {v} outside [0, 1]")));
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.c()
    }
}

fn check(f: &Tensor, a: &CurveParams, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::validation("curve order must be >= 1"));
    }
    let a = a.tensor();
    if a.h() != f.h() || a.w() != f.w() || a.c() != n {
        return Err(Error::shape(format!(
            "curve params {:?} do not match features {:?} with order {n}",
            a.shape(),
            f.shape()
        )));
    }
    Ok(())
}

#[inline]
fn curve_scalar(f: f64, a: &[f64]) -> f64 {
    a.iter().fold(f.clamp(0.0, 1.0), |c, &ai| ai * c * (1.0 - c) + c)
}

pub fn curve_nlu_fwd(f: &Tensor, a: &CurveParams, n: usize) -> Result<Tensor> {
    check(f, a, n)?;
    let c = f.c();
    let at = a.tensor();
    let mut out = Tensor::zeros(f.h(), f.w(), c);
    for (px, (src, dst)) in f.data().chunks_exact(c).zip(out.data_mut().chunks_exact_mut(c)).enumerate() {
        let ap = &at.data()[px * n..(px + 1) * n];
        for (o, &v) in dst.iter_mut().zip(src) {
            *o = curve_scalar(v, ap);
        }
    }
    Ok(out)
}

/// Returns `(dF, dA)`. `dF` is zero where the input was clipped; `dA`
/// sums the contributions of all channels sharing a parameter.
pub fn curve_nlu_bwd(f: &Tensor, a: &CurveParams, n: usize, dy: &Tensor) -> Result<(Tensor, Tensor)> {
    check(f, a, n)?;
    f.expect_shape(dy, "curve upstream gradient")?;
    let c = f.c();
    let at = a.tensor();
    let mut df = Tensor::zeros(f.h(), f.w(), c);
    let mut da = Tensor::zeros(f.h(), f.w(), n);
    let mut states = vec![0.0; n];
    for px in 0..f.h() * f.w() {
        let ap = &at.data()[px * n..(px + 1) * n];
        for ch in 0..c {
            let i = px * c + ch;
            let x = f.data()[i];
            let mut cur = x.clamp(0.0, 1.0);
            for (s, &ai) in states.iter_mut().zip(ap) {
                *s = cur;
                cur = ai * cur * (1.0 - cur) + cur;
            }
            let mut g = dy.data()[i];
            for k in (0..n).rev() {
                let s = states[k];
                da.data_mut()[px * n + k] += g * s * (1.0 - s);
                g *= 1.0 + ap[k] * (1.0 - 2.0 * s);
            }
            df.data_mut()[i] = if (0.0..=1.0).contains(&x) { g } else { 0.0 };
        }
    }
    Ok((df, da))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(h: usize, w: usize, vals: &[f64]) -> CurveParams {
        let n = vals.len();
        CurveParams::new(Tensor::from_fn(h, w, n, |_, _, k| vals[k])).unwrap()
    }

    #[test]
    fn zero_params_clip_only() {
        let f = Tensor::new(1, 4, 1, vec![-0.5, 0.25, 0.75, 1.5]).unwrap();
        let out = curve_nlu_fwd(&f, &params(1, 4, &[0.0, 0.0]), 2).unwrap();
        assert_eq!(out.data(), &[0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn hand_evaluated_orders() {
        let f = Tensor::filled(1, 1, 1, 0.5);
        let one = curve_nlu_fwd(&f, &params(1, 1, &[1.0]), 1).unwrap();
        assert!((one.data()[0] - 0.75).abs() < 1e-15);
        let two = curve_nlu_fwd(&f, &params(1, 1, &[0.5, 0.5]), 2).unwrap();
        assert!((two.data()[0] - 0.742_187_5).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_params_rejected() {
        assert!(CurveParams::new(Tensor::filled(1, 1, 1, 1.2)).is_err());
        assert!(CurveParams::new(Tensor::filled(1, 1, 1, -0.1)).is_err());
    }

    #[test]
    fn identity_curve_passes_gradient_and_clip_blocks_it() {
        let f = Tensor::new(1, 3, 1, vec![0.3, -0.2, 1.4]).unwrap();
        let dy = Tensor::new(1, 3, 1, vec![0.7, 0.9, -1.1]).unwrap();
        let (df, _) = curve_nlu_bwd(&f, &params(1, 3, &[0.0, 0.0, 0.0]), 3, &dy).unwrap();
        assert_eq!(df.data(), &[0.7, 0.0, 0.0]);
    }

    #[test]
    fn order_mismatch_is_shape_error() {
        let f = Tensor::filled(2, 2, 3, 0.5);
        assert!(matches!(curve_nlu_fwd(&f, &params(2, 2, &[0.1, 0.2]), 3), Err(Error::Shape(_))));
    }
}
