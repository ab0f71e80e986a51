//! Defocus blur with generalized Gaussian kernels and heteroscedastic
//! shot/read noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::colorcore::{Domain, ImageF};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Normalized, radially symmetric d×d point-spread function.
#[derive(Debug, Clone, PartialEq)]
pub struct DefocusKernel {
    size: usize,
    sigma: f64,
    beta: f64,
    taps: Vec<f64>,
}

impl DefocusKernel {
    /// Wraps arbitrary taps; they are not renormalized.
    pub fn from_taps(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size.is_multiple_of(2) || taps.len() != size * size {
            return Err(Error::config(format!(
                "kernel needs an odd size and size² taps (size {size}, {} taps)",
                taps.len()
            )));
        }
        Ok(Self {
            size,
            sigma: f64::NAN,
            beta: f64::NAN,
            taps,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn tap(&self, y: usize, x: usize) -> f64 {
        self.taps[y * self.size + x]
    }
}

/// Profile `exp(-0.5 * ((x² + y²) / sigma²)^beta)`, normalized to unit sum.
pub fn generalized_gaussian_kernel(sigma: f64, beta: f64, size: usize) -> Result<DefocusKernel> {
    if size.is_multiple_of(2) {
        return Err(Error::config(format!("kernel size must be odd, got {size}")));
    }
    if !(sigma > 0.0) || !(beta > 0.0) {
        return Err(Error::config(format!(
            "sigma and beta must be positive (sigma {sigma}, beta {beta})"
        )));
    }
    let half = (size / 2) as f64;
    let mut taps = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (dy, dx) = (y as f64 - half, x as f64 - half);
            let r2 = (dx * dx + dy * dy) / (sigma * sigma);
            taps.push((-0.5 * r2.powf(beta)).exp());
        }
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(DefocusKernel {
        size,
        sigma,
        beta,
        taps,
    })
}

/// Mirror index without repeating the edge sample (`-1 -> 1`).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Same-size 2-D convolution with reflect padding, per channel.
pub fn convolve2d_reflect(img: &ImageF, kernel: &DefocusKernel) -> ImageF {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let k = kernel.size;
    let half = (k / 2) as isize;
    let src = img.data();
    let mut out = vec![0f32; src.len()];
    let mut acc = vec![0f64; c];
    for y in 0..h {
        for x in 0..w {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for ky in 0..k {
                let sy = reflect_index(y as isize + ky as isize - half, h);
                for kx in 0..k {
                    let sx = reflect_index(x as isize + kx as isize - half, w);
                    let t = kernel.taps[ky * k + kx];
                    let base = (sy * w + sx) * c;
                    for (ch, a) in acc.iter_mut().enumerate() {
                        *a += t * src[base + ch] as f64;
                    }
                }
            }
            let base = (y * w + x) * c;
            for (ch, a) in acc.iter().enumerate() {
                out[base + ch] = *a as f32;
            }
        }
    }
    img.with_data(img.domain(), out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Variance contributed per unit of signal.
    pub shot_gain: f64,
    /// Standard deviation of the signal-independent component.
    pub read_sigma: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if self.shot_gain < 0.0 || self.read_sigma < 0.0 {
            return Err(Error::config("noise parameters must be non-negative"));
        }
        Ok(())
    }

    pub fn std_at(&self, x: f64) -> f64 {
        (self.shot_gain * x.max(0.0) + self.read_sigma * self.read_sigma).sqrt()
    }
}

/// `out = clamp(x + n)`, `n ~ N(0, shot_gain * x + read_sigma²)` per value.
pub fn add_noise(img: &ImageF, p: NoiseParams, seed: u64) -> Result<ImageF> {
    img.expect_domain(Domain::Srgb)?;
    p.validate()?;
    if p.shot_gain == 0.0 && p.read_sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            (v as f64 + z * p.std_at(v as f64)).clamp(0.0, 1.0) as f32
        })
        .collect();
    Ok(img.with_data(Domain::Srgb, data))
}

/// Randomized defocus and noise settings; each stage fires with its own
/// probability and draws parameters uniformly from the ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradeConfig {
    pub defocus_prob: f64,
    pub sigma_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub kernel_size: usize,
    pub noise_prob: f64,
    pub read_sigma_range: (f64, f64),
    pub shot_gain_range: (f64, f64),
}

impl Default for DegradeConfig {
    fn default() -> Self {
        Self {
            defocus_prob: 0.5,
            sigma_range: (0.5, 2.0),
            beta_range: (0.5, 2.0),
            kernel_size: 11,
            noise_prob: 0.5,
            read_sigma_range: (0.002, 0.02),
            shot_gain_range: (0.0, 0.01),
        }
    }
}

impl DegradeConfig {
    /// No defocus, no noise.
    pub fn disabled() -> Self {
        Self {
            defocus_prob: 0.0,
            noise_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("defocus_prob", self.defocus_prob), ("noise_prob", self.noise_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        for (name, (lo, hi)) in [
            ("sigma_range", self.sigma_range),
            ("beta_range", self.beta_range),
        ] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::config(format!("{name} must satisfy 0 < lo <= hi")));
            }
        }
        for (name, (lo, hi)) in [
            ("read_sigma_range", self.read_sigma_range),
            ("shot_gain_range", self.shot_gain_range),
        ] {
            if !(lo >= 0.0 && lo <= hi) {
                return Err(Error::config(format!("{name} must satisfy 0 <= lo <= hi")));
            }
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::config("kernel_size must be odd"));
        }
        Ok(())
    }
}

/// What [`apply_random_degradation`] actually did.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DegradeRecord {
    /// (sigma, beta) when defocus fired.
    pub defocus: Option<(f64, f64)>,
    pub noise: Option<NoiseParams>,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

pub fn apply_random_degradation(img: &ImageF, cfg: &DegradeConfig, seed: u64) -> Result<(ImageF, DegradeRecord)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut record = DegradeRecord::default();
    let mut out = img.clone();

    let do_defocus = rng.random_bool(cfg.defocus_prob);
    let sigma = uniform(&mut rng, cfg.sigma_range);
    let beta = uniform(&mut rng, cfg.beta_range);
    if do_defocus {
        let kernel = generalized_gaussian_kernel(sigma, beta, cfg.kernel_size)?;
        out = convolve2d_reflect(&out, &kernel);
        record.defocus = Some((sigma, beta));
    }

    let do_noise = rng.random_bool(cfg.noise_prob);
    let params = NoiseParams {
        shot_gain: uniform(&mut rng, cfg.shot_gain_range),
        read_sigma: uniform(&mut rng, cfg.read_sigma_range),
    };
    if do_noise {
        out = add_noise(&out, params, derive_seed(seed, &[0x6e6f6973]))?;
        record.noise = Some(params);
    }
    Ok((out, record))
}
