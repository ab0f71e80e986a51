//! Browser bindings for three pieces of the synthesis pipeline: the
//! spatially varying darkening curve, the generalized Gaussian defocus
//! kernel, and moving-dot blur with and without clipping reverse.
//!
//! Images cross the boundary as RGBA bytes, row-major.

use wasm_bindgen::prelude::*;

use lednet_core::blursynth::{synth_blur_with_r, BlurConfig};
use lednet_core::colorcore::{mean_luminance, to_u8, ImageF};
use lednet_core::darkener::{apply_darkening_curve, generate_alpha_map};
use lednet_core::degrade::generalized_gaussian_kernel;
use lednet_core::scenes::{moving_shapes, DotScene};

fn js_err(e: lednet_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

pub fn rgba(img: &ImageF) -> Vec<u8> {
    let bytes = to_u8(img);
    let c = img.channels();
    bytes
        .chunks_exact(c)
        .flat_map(|px| match c {
            1 => [px[0], px[0], px[0], 255],
            _ => [px[0], px[1], px[2], 255],
        })
        .collect()
}

/// Sharp scene plus its darkened version, stacked vertically.
#[wasm_bindgen]
pub struct DarkenPreview {
    size: usize,
    pixels: Vec<u8>,
    source_mean: f64,
    dark_mean: f64,
    alpha_mean: f32,
}

#[wasm_bindgen]
impl DarkenPreview {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }

    pub fn source_mean(&self) -> f64 {
        self.source_mean
    }

    pub fn dark_mean(&self) -> f64 {
        self.dark_mean
    }

    pub fn alpha_mean(&self) -> f32 {
        self.alpha_mean
    }
}

pub fn darken_preview_impl(
    seed: u64,
    size: usize,
    base_level: f32,
    amplitude: f32,
    smoothness: f32,
    iterations: usize,
) -> lednet_core::Result<DarkenPreview> {
    let seq = moving_shapes(seed, size, size, 1)?;
    let sharp = &seq.frames()[0];
    let alpha = generate_alpha_map(seed ^ 0x5eed, size, size, smoothness, base_level, amplitude)?;
    let dark = apply_darkening_curve(sharp, &alpha, iterations)?;
    let mut pixels = rgba(sharp);
    pixels.extend(rgba(&dark));
    Ok(DarkenPreview {
        size,
        pixels,
        source_mean: mean_luminance(sharp),
        dark_mean: mean_luminance(&dark),
        alpha_mean: alpha.stats().1,
    })
}

#[wasm_bindgen]
pub fn darken_preview(
    seed: u32,
    size: usize,
    base_level: f32,
    amplitude: f32,
    smoothness: f32,
    iterations: usize,
) -> Result<DarkenPreview, JsValue> {
    darken_preview_impl(seed as u64, size, base_level, amplitude, smoothness, iterations).map_err(js_err)
}

/// Normalized kernel taps, row-major `size * size`.
#[wasm_bindgen]
pub fn gg_kernel(sigma: f64, beta: f64, size: usize) -> Result<Vec<f64>, JsValue> {
    generalized_gaussian_kernel(sigma, beta, size)
        .map(|k| k.taps().to_vec())
        .map_err(js_err)
}

/// A white dot moving across a dark background, blurred twice: with
/// clipping reverse (top half of the output) and without (bottom half).
#[wasm_bindgen]
pub struct DotBlur {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    saturated_cr: usize,
    saturated_plain: usize,
}

#[wasm_bindgen]
impl DotBlur {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }

    /// Output pixels at full white with clipping reverse on.
    pub fn saturated_cr(&self) -> usize {
        self.saturated_cr
    }

    pub fn saturated_plain(&self) -> usize {
        self.saturated_plain
    }
}

fn white_pixels(img: &ImageF) -> usize {
    to_u8(img)
        .chunks_exact(img.channels())
        .filter(|px| px.iter().all(|&v| v == 255))
        .count()
}

pub fn dot_blur_impl(r: f32, speed: f64, radius: f64, delta: f32) -> lednet_core::Result<DotBlur> {
    let (height, width) = (32, 96);
    let scene = DotScene {
        height,
        width,
        frames: 7,
        radius,
        cy: height as f64 / 2.0,
        cx: width as f64 / 2.0,
        speed,
        background: 0.05,
    };
    let seq = scene.sequence()?;
    let mut cfg = BlurConfig {
        r_range: (r, r),
        delta,
        ..BlurConfig::default()
    };
    let cr = synth_blur_with_r(&seq, &cfg, r)?.image;
    cfg.clipping_reverse = false;
    let plain = synth_blur_with_r(&seq, &cfg, r)?.image;
    let mut pixels = rgba(&cr);
    pixels.extend(rgba(&plain));
    Ok(DotBlur {
        width,
        height: 2 * height,
        pixels,
        saturated_cr: white_pixels(&cr),
        saturated_plain: white_pixels(&plain),
    })
}

#[wasm_bindgen]
pub fn dot_blur(r: f32, speed: f64, radius: f64, delta: f32) -> Result<DotBlur, JsValue> {
    dot_blur_impl(r, speed, radius, delta).map_err(js_err)
}
