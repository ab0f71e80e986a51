//! Procedural low-light simulation with reversed quadratic curves.
//!
//! One curve iteration maps `x -> x + a * x * (1 - x)` with a per-pixel
//! `a` in [-1, 0], shared by all channels of that pixel. Exposure is
//! conditioned numerically: a global offset on the alpha map is bisected
//! until the output hits the requested mean luminance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorcore::{mean_luminance, Domain, ImageF};
use crate::error::{Error, Result};

pub const DEFAULT_CURVE_ITERATIONS: usize = 3;

/// Tolerance on achieved mean luminance.
pub const EXPOSURE_TOLERANCE: f64 = 1e-3;

/// Per-pixel curve parameters in [-1, 0].
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMap {
    height: usize,
    width: usize,
    smoothness: f32,
    data: Vec<f32>,
}

impl AlphaMap {
    pub fn new(height: usize, width: usize, smoothness: f32, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "alpha map buffer holds {} values, expected {}",
                data.len(),
                height * width
            )));
        }
        let map = Self {
            height,
            width,
            smoothness,
            data,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, height.max(width) as f32, vec![value; height * width])
    }

    pub fn validate(&self) -> Result<()> {
        match self.data.iter().find(|v| !(-1.0..=0.0).contains(*v)) {
            Some(v) => Err(Error::validation(format!("alpha {v} outside [-1, 0]"))),
            None => Ok(()),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn smoothness(&self) -> f32 {
        self.smoothness
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Largest absolute difference between 4-neighbors.
    pub fn max_neighbor_step(&self) -> f32 {
        let mut worst = 0f32;
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.get(y, x);
                if x + 1 < self.width {
                    worst = worst.max((v - self.get(y, x + 1)).abs());
                }
                if y + 1 < self.height {
                    worst = worst.max((v - self.get(y + 1, x)).abs());
                }
            }
        }
        worst
    }

    /// (min, mean, max)
    pub fn stats(&self) -> (f32, f32, f32) {
        let min = self.data.iter().copied().fold(f32::INFINITY, f32::min);
        let max = self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mean = (self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64) as f32;
        (min, mean, max)
    }

    fn shifted(&self, offset: f32) -> AlphaMap {
        AlphaMap {
            height: self.height,
            width: self.width,
            smoothness: self.smoothness,
            data: self.data.iter().map(|&a| (a + offset).clamp(-1.0, 0.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureSpec {
    pub target_mean_luminance: f64,
    pub iterations: usize,
}

/// Smooth seeded field: a coarse uniform-noise grid with one node every
/// `smoothness` pixels, bilinearly upsampled. Values are
/// `base_level + amplitude * u`, `u` in [-1, 1], clamped to [-1, 0].
pub fn generate_alpha_map(
    seed: u64,
    height: usize,
    width: usize,
    smoothness: f32,
    base_level: f32,
    amplitude: f32,
) -> Result<AlphaMap> {
    if !(smoothness >= 1.0) {
        return Err(Error::config(format!("smoothness must be >= 1, got {smoothness}")));
    }
    if height == 0 || width == 0 {
        return Err(Error::shape("alpha map must be non-empty"));
    }
    if !(0.0..=1.0).contains(&amplitude) {
        return Err(Error::config(format!("amplitude must be in [0, 1], got {amplitude}")));
    }
    let s = smoothness as f64;
    let gh = ((height - 1) as f64 / s).ceil() as usize + 2;
    let gw = ((width - 1) as f64 / s).ceil() as usize + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid: Vec<f32> = (0..gh * gw)
        .map(|_| (base_level + amplitude * rng.random_range(-1.0f32..=1.0)).clamp(-1.0, 0.0))
        .collect();

    let mut data = Vec::with_capacity(height * width);
    for y in 0..height {
        let gy = y as f64 / s;
        let y0 = gy.floor() as usize;
        let fy = (gy - y0 as f64) as f32;
        for x in 0..width {
            let gx = x as f64 / s;
            let x0 = gx.floor() as usize;
            let fx = (gx - x0 as f64) as f32;
            let g = |yy: usize, xx: usize| grid[yy * gw + xx];
            let top = g(y0, x0) + (g(y0, x0 + 1) - g(y0, x0)) * fx;
            let bot = g(y0 + 1, x0) + (g(y0 + 1, x0 + 1) - g(y0 + 1, x0)) * fx;
            data.push((top + (bot - top) * fy).clamp(-1.0, 0.0));
        }
    }
    AlphaMap::new(height, width, smoothness, data)
}

#[inline]
pub fn darken_value(mut x: f32, alpha: f32, iterations: usize) -> f32 {
    for _ in 0..iterations {
        x += alpha * x * (1.0 - x);
    }
    x.clamp(0.0, 1.0)
}

pub fn apply_darkening_curve(img: &ImageF, alpha: &AlphaMap, iterations: usize) -> Result<ImageF> {
    img.expect_domain(Domain::Srgb)?;
    if alpha.height != img.height() || alpha.width != img.width() {
        return Err(Error::shape(format!(
            "alpha map {}x{} does not match image {}x{}",
            alpha.height,
            alpha.width,
            img.height(),
            img.width()
        )));
    }
    alpha.validate()?;
    let c = img.channels();
    let data = img
        .data()
        .chunks_exact(c)
        .zip(&alpha.data)
        .flat_map(|(px, &a)| px.iter().map(move |&v| darken_value(v.clamp(0.0, 1.0), a, iterations)))
        .collect();
    Ok(img.with_data(Domain::Srgb, data))
}

/// Darkens `img` so its mean luminance equals the target, keeping the
/// spatial shape of `alpha_shape` up to a global clamped offset.
pub fn condition_on_exposure(
    img: &ImageF,
    spec: &ExposureSpec,
    alpha_shape: &AlphaMap,
) -> Result<(ImageF, AlphaMap)> {
    if spec.iterations == 0 {
        return Err(Error::config("curve iterations must be >= 1"));
    }
    let target = spec.target_mean_luminance;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::config(format!("target mean luminance {target} outside (0, 1)")));
    }
    let current = mean_luminance(img);
    if target > current + EXPOSURE_TOLERANCE {
        return Err(Error::validation(format!(
            "target {target:.4} is brighter than the source mean {current:.4}"
        )));
    }

    let eval = |offset: f32| -> Result<(ImageF, AlphaMap, f64)> {
        let alpha = alpha_shape.shifted(offset);
        let out = apply_darkening_curve(img, &alpha, spec.iterations)?;
        let mean = mean_luminance(&out);
        Ok((out, alpha, mean))
    };

    let (dark, dark_alpha, minimum) = eval(-1.0)?;
    if target < minimum - EXPOSURE_TOLERANCE {
        return Err(Error::UnreachableExposure { target, minimum });
    }
    if (minimum - target).abs() <= EXPOSURE_TOLERANCE {
        return Ok((dark, dark_alpha));
    }

    // mean luminance is non-decreasing in the offset; offset 1 is the identity
    let (mut lo, mut hi) = (-1.0f32, 1.0f32);
    let mut best = eval(hi)?;
    for _ in 0..64 {
        if (best.2 - target).abs() <= EXPOSURE_TOLERANCE * 0.1 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let trial = eval(mid)?;
        if trial.2 > target {
            hi = mid;
        } else {
            lo = mid;
        }
        if (trial.2 - target).abs() < (best.2 - target).abs() {
            best = trial;
        }
        if hi - lo <= f32::EPSILON {
            break;
        }
    }
    if (best.2 - target).abs() > EXPOSURE_TOLERANCE {
        return Err(Error::validation(format!(
            "exposure bisection stalled at mean {:.5} for target {target:.5}",
            best.2
        )));
    }
    Ok((best.0, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gray(v: f32) -> ImageF {
        ImageF::filled(8, 8, 3, Domain::Srgb, v).unwrap()
    }

    #[test]
    fn zero_alpha_is_identity() {
        let img = ImageF::from_fn(4, 4, 3, Domain::Srgb, |y, x, c| ((y * 4 + x) * 3 + c) as f32 / 48.0).unwrap();
        let out = apply_darkening_curve(&img, &AlphaMap::constant(4, 4, 0.0).unwrap(), 3).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn hand_evaluated_curve() {
        // 0.8 - 0.5*0.8*0.2 = 0.72; 0.72 - 0.5*0.72*0.28 = 0.6192
        assert_abs_diff_eq!(darken_value(0.8, -0.5, 1), 0.72, epsilon = 1e-6);
        assert_abs_diff_eq!(darken_value(0.8, -0.5, 2), 0.6192, epsilon = 1e-6);
    }

    #[test]
    fn alpha_out_of_range_is_rejected() {
        assert!(AlphaMap::new(1, 2, 1.0, vec![-0.5, 0.1]).is_err());
        assert!(AlphaMap::new(1, 2, 1.0, vec![-1.5, 0.0]).is_err());
    }

    #[test]
    fn flat_map_with_zero_amplitude() {
        let m = generate_alpha_map(7, 16, 12, 16.0, -0.4, 0.0).unwrap();
        assert!(m.data().iter().all(|&v| v == -0.4));
    }

    #[test]
    fn alpha_map_is_deterministic() {
        let a = generate_alpha_map(99, 20, 30, 4.0, -0.5, 0.4).unwrap();
        let b = generate_alpha_map(99, 20, 30, 4.0, -0.5, 0.4).unwrap();
        assert_eq!(a, b);
        let c = generate_alpha_map(100, 20, 30, 4.0, -0.5, 0.4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn alpha_map_smoothness_bound() {
        let m = generate_alpha_map(3, 256, 256, 32.0, -0.5, 1.0).unwrap();
        assert!(m.max_neighbor_step() <= 2.0 / 32.0 + 1e-6, "{}", m.max_neighbor_step());
        assert!(m.data().iter().all(|v| (-1.0..=0.0).contains(v)));
    }

    #[test]
    fn exposure_at_current_mean_is_identity() {
        let img = gray(0.6);
        let shape = generate_alpha_map(1, 8, 8, 4.0, -0.5, 0.3).unwrap();
        let spec = ExposureSpec {
            target_mean_luminance: mean_luminance(&img),
            iterations: 3,
        };
        let (out, _) = condition_on_exposure(&img, &spec, &shape).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 1e-3);
        }
    }

    #[test]
    fn exposure_hits_target_on_gray() {
        let spec = ExposureSpec {
            target_mean_luminance: 0.4,
            iterations: 3,
        };
        let (out, alpha) = condition_on_exposure(&gray(0.8), &spec, &AlphaMap::constant(8, 8, 0.0).unwrap()).unwrap();
        assert!((mean_luminance(&out) - 0.4).abs() <= 1e-3);
        // scalar oracle: bisection on a in [-1,0] of the 3-step curve at 0.8
        let (mut lo, mut hi) = (-1.0f64, 0.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let mut x = 0.8f64;
            for _ in 0..3 {
                x += mid * x * (1.0 - x);
            }
            if x > 0.4 {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert!((alpha.get(0, 0) as f64 - lo).abs() < 5e-3, "{} vs {lo}", alpha.get(0, 0));
    }

    #[test]
    fn unreachable_exposure_names_minimum() {
        let spec = ExposureSpec {
            target_mean_luminance: 0.001,
            iterations: 1,
        };
        match condition_on_exposure(&gray(0.9), &spec, &AlphaMap::constant(8, 8, 0.0).unwrap()) {
            Err(Error::UnreachableExposure { minimum, .. }) => assert_abs_diff_eq!(minimum, 0.81, epsilon = 1e-5),
            other => panic!("expected unreachable exposure, got {other:?}"),
        }
    }
}
