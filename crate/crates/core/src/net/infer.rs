//! Whole-image inference with reflect padding to a multiple of 8.

use super::model::LedNet;
use crate::colorcore::{Domain, ImageF};
use crate::degrade::reflect_index;
use crate::error::{Error, Result};
use crate::kernels::{ParamStore, Tensor};

/// sRGB image to tensor; grayscale is replicated to three channels.
pub fn image_to_tensor(img: &ImageF) -> Result<Tensor> {
    let (h, w) = (img.height(), img.width());
    match img.channels() {
        3 => Tensor::new(h, w, 3, img.data().iter().map(|&v| v as f64).collect()),
        1 => Ok(Tensor::from_fn(h, w, 3, |y, x, _| img.get(y, x, 0) as f64)),
        c => Err(Error::shape(format!("unsupported channel count {c}"))),
    }
}

/// Tensor to an sRGB image, clamped to [0, 1].
pub fn tensor_to_image(t: &Tensor) -> Result<ImageF> {
    ImageF::new(
        t.h(),
        t.w(),
        t.c(),
        Domain::Srgb,
        t.data().iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect(),
    )
}

fn pad_reflect(t: &Tensor, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(h, w, t.c(), |y, x, c| {
        t.get(reflect_index(y as isize, t.h()), reflect_index(x as isize, t.w()), c)
    })
}

#[derive(Debug, Clone)]
pub struct InferenceOutput {
    pub image: ImageF,
    /// Per scale (finest first), the curve parameter maps as grayscale
    /// images; empty when CurveNLU is disabled.
    pub curve_maps: Vec<Vec<ImageF>>,
}

pub fn infer(net: &LedNet, store: &ParamStore, img: &ImageF) -> Result<InferenceOutput> {
    let x = image_to_tensor(img)?;
    let (h, w) = (x.h(), x.w());
    let ph = h.div_ceil(8) * 8;
    let pw = w.div_ceil(8) * 8;
    if (ph > h && h < 2) || (pw > w && w < 2) || ph - h >= h.max(2) || pw - w >= w.max(2) {
        return Err(Error::shape(format!("image {h}x{w} is too small to pad to a multiple of 8")));
    }
    let padded = if (ph, pw) == (h, w) { x } else { pad_reflect(&x, ph, pw) };
    let trace = net.forward(store, &padded)?;
    let out = Tensor::from_fn(h, w, 3, |y, xx, c| trace.output.get(y, xx, c));
    let mut curve_maps = Vec::new();
    for (k, a) in trace.curve_maps.iter().enumerate() {
        let Some(a) = a else { continue };
        let s = 1 << (k + 1);
        let (sh, sw) = (h.div_ceil(s), w.div_ceil(s));
        let maps = (0..a.c())
            .map(|i| tensor_to_image(&Tensor::from_fn(sh, sw, 1, |y, x, _| a.get(y, x, i))))
            .collect::<Result<Vec<_>>>()?;
        curve_maps.push(maps);
    }
    Ok(InferenceOutput {
        image: tensor_to_image(&out)?,
        curve_maps,
    })
}
