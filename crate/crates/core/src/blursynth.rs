//! Low-light blur synthesis by frame averaging in linear light.
//!
//! A window of sharp sRGB frames is up-sampled in time, each frame is
//! linearized with the gamma camera response, saturated pixels (L* above
//! the threshold) get a supplementary value `r / 255` added back, and the
//! average over the open-shutter part of the window is re-encoded:
//!
//! `B = g( mean_i Clip⁻¹( g⁻¹(S_i) ) )`

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorcore::{linear_to_srgb, saturation_mask, srgb_to_linear, Domain, ImageF, SaturationMask};
use crate::darkener::{
    apply_darkening_curve, condition_on_exposure, generate_alpha_map, AlphaMap, ExposureSpec,
};
use crate::colorcore::mean_luminance;
use crate::degrade::{apply_random_degradation, DegradeConfig, DegradeRecord};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<ImageF>,
    fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<ImageF>, fps: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or(Error::InsufficientFrames { needed: 1, got: 0 })?;
        for (i, f) in frames.iter().enumerate().skip(1) {
            if !f.same_shape(first) || f.domain() != first.domain() {
                return Err(Error::shape(format!(
                    "frame {i} is {}x{}x{} ({:?}), frame 0 is {}x{}x{} ({:?})",
                    f.height(),
                    f.width(),
                    f.channels(),
                    f.domain(),
                    first.height(),
                    first.width(),
                    first.channels(),
                    first.domain()
                )));
            }
        }
        if !(fps > 0.0) {
            return Err(Error::config(format!("fps must be positive, got {fps}")));
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[ImageF] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn mid_frame(&self) -> &ImageF {
        &self.frames[self.frames.len() / 2]
    }

    pub fn map_frames(&self, f: impl FnMut(&ImageF) -> Result<ImageF>) -> Result<Self> {
        let frames = self.frames.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(frames, self.fps)
    }
}

/// Temporal up-sampler used ahead of averaging.
pub trait FrameInterpolator {
    /// Returns `(n - 1) * k + 1` frames at `k` times the input rate.
    fn interpolate(&self, seq: &FrameSequence, k: usize) -> Result<FrameSequence>;
}

/// Cross-fade `F_i + (j / k) (F_{i+1} - F_i)` between consecutive frames.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearCrossFade;

impl FrameInterpolator for LinearCrossFade {
    fn interpolate(&self, seq: &FrameSequence, k: usize) -> Result<FrameSequence> {
        if k == 0 {
            return Err(Error::config("interpolation factor must be >= 1"));
        }
        if k == 1 {
            return Ok(seq.clone());
        }
        if seq.len() < 2 {
            return Err(Error::InsufficientFrames {
                needed: 2,
                got: seq.len(),
            });
        }
        let mut out = Vec::with_capacity((seq.len() - 1) * k + 1);
        for pair in seq.frames.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            out.push(a.clone());
            for j in 1..k {
                let t = j as f32 / k as f32;
                let data = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(&x, &y)| x + t * (y - x))
                    .collect();
                out.push(a.with_data(a.domain(), data));
            }
        }
        out.push(seq.frames[seq.len() - 1].clone());
        FrameSequence::new(out, seq.fps * k as f64)
    }
}

pub fn interpolate_frames(seq: &FrameSequence, k: usize) -> Result<FrameSequence> {
    seq.frames[0].expect_domain(Domain::Srgb)?;
    LinearCrossFade.interpolate(seq, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlurConfig {
    /// Source frames per blurred image.
    pub window: usize,
    pub interp_factor: usize,
    /// Supplementary value range in 8-bit units.
    pub r_range: (f32, f32),
    /// L* saturation threshold.
    pub delta: f32,
    /// Open-shutter fraction of the exposure window.
    pub duty_cycle: f32,
    pub clipping_reverse: bool,
}

impl Default for BlurConfig {
    fn default() -> Self {
        Self {
            window: 7,
            interp_factor: 8,
            r_range: (20.0, 100.0),
            delta: 98.0,
            duty_cycle: 0.8,
            clipping_reverse: true,
        }
    }
}

impl BlurConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::config(format!("window must be odd, got {}", self.window)));
        }
        if self.interp_factor == 0 {
            return Err(Error::config("interp_factor must be >= 1"));
        }
        let (lo, hi) = self.r_range;
        if !(0.0..=255.0).contains(&lo) || !(0.0..=255.0).contains(&hi) || lo > hi {
            return Err(Error::config(format!("r_range [{lo}, {hi}] must lie within [0, 255]")));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(Error::config(format!(
                "duty_cycle must be in (0, 1], got {}",
                self.duty_cycle
            )));
        }
        Ok(())
    }

    /// Number of frames after temporal up-sampling.
    pub fn interpolated_count(&self) -> usize {
        (self.window - 1) * self.interp_factor + 1
    }

    /// Centered range of the `ceil(duty_cycle * n)` frames that are averaged.
    pub fn exposure_range(&self, n: usize) -> std::ops::Range<usize> {
        let open = ((self.duty_cycle as f64 * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
        let start = (n - open) / 2;
        start..start + open
    }

    pub fn sample_r(&self, seed: u64) -> f32 {
        let (lo, hi) = self.r_range;
        if hi > lo {
            ChaCha8Rng::seed_from_u64(seed).random_range(lo..hi)
        } else {
            lo
        }
    }
}

/// Adds `r / 255` to every channel of masked pixels.
pub fn clipping_reverse(frame: &ImageF, mask: &SaturationMask, r: f32) -> Result<ImageF> {
    frame.expect_domain(Domain::Linear)?;
    if mask.height() != frame.height() || mask.width() != frame.width() {
        return Err(Error::shape(format!(
            "mask {}x{} does not match frame {}x{}",
            mask.height(),
            mask.width(),
            frame.height(),
            frame.width()
        )));
    }
    if !(0.0..=255.0).contains(&r) {
        return Err(Error::validation(format!("supplementary value {r} outside [0, 255]")));
    }
    let boost = r / 255.0;
    let c = frame.channels();
    let mut out = frame.clone();
    for (px, &m) in out.data_mut().chunks_exact_mut(c).zip(mask.data()) {
        if m {
            px.iter_mut().for_each(|v| *v += boost);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlurOutput {
    pub image: ImageF,
    pub r: f32,
    pub interpolated_frames: usize,
    pub averaged_frames: usize,
    /// Saturated pixels summed over the averaged frames.
    pub saturated_pixels: usize,
}

/// Blur with an explicit supplementary value.
pub fn synth_blur_with_r(seq: &FrameSequence, cfg: &BlurConfig, r: f32) -> Result<BlurOutput> {
    cfg.validate()?;
    if seq.len() != cfg.window {
        return Err(Error::config(format!(
            "sequence has {} frames, window is {}",
            seq.len(),
            cfg.window
        )));
    }
    let dense = interpolate_frames(seq, cfg.interp_factor)?;
    let range = cfg.exposure_range(dense.len());
    let first = &dense.frames[0];
    let mut acc = vec![0f64; first.data().len()];
    let mut saturated = 0;
    for frame in &dense.frames[range.clone()] {
        let mut lin = srgb_to_linear(frame)?;
        if cfg.clipping_reverse {
            let mask = saturation_mask(frame, cfg.delta)?;
            saturated += mask.count();
            lin = clipping_reverse(&lin, &mask, r)?;
        }
        acc.iter_mut().zip(lin.data()).for_each(|(a, &v)| *a += v as f64);
    }
    let n = range.len() as f64;
    let mean = acc.into_iter().map(|v| (v / n) as f32).collect();
    let image = linear_to_srgb(&first.with_data(Domain::Linear, mean))?;
    Ok(BlurOutput {
        image,
        r,
        interpolated_frames: dense.len(),
        averaged_frames: range.len(),
        saturated_pixels: saturated,
    })
}

/// Blur with `r` drawn uniformly from `cfg.r_range` (one value per sequence).
pub fn synth_blur(seq: &FrameSequence, cfg: &BlurConfig, seed: u64) -> Result<ImageF> {
    Ok(synth_blur_with_r(seq, cfg, cfg.sample_r(seed))?.image)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarkenConfig {
    pub enabled: bool,
    pub target_range: (f64, f64),
    pub iterations: usize,
    pub smoothness: f32,
    pub base_level: f32,
    pub amplitude: f32,
}

impl Default for DarkenConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            target_range: (0.05, 0.3),
            iterations: crate::darkener::DEFAULT_CURVE_ITERATIONS,
            smoothness: 32.0,
            base_level: -0.5,
            amplitude: 0.3,
        }
    }
}

impl DarkenConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.target_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::config(format!("target_range [{lo}, {hi}] must lie in (0, 1)")));
        }
        if self.iterations == 0 {
            return Err(Error::config("darken iterations must be >= 1"));
        }
        if !(self.smoothness >= 1.0) {
            return Err(Error::config("darken smoothness must be >= 1"));
        }
        if !(-1.0..=0.0).contains(&self.base_level) || !(0.0..=1.0).contains(&self.amplitude) {
            return Err(Error::config("darken base_level must be in [-1,0] and amplitude in [0,1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairConfig {
    pub blur: BlurConfig,
    pub darken: DarkenConfig,
    pub degrade: DegradeConfig,
}

impl PairConfig {
    pub fn validate(&self) -> Result<()> {
        self.blur.validate()?;
        self.darken.validate()?;
        self.degrade.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairMetadata {
    pub seed: u64,
    pub r: f32,
    pub target_luminance: Option<f64>,
    /// (min, mean, max) of the conditioned alpha map.
    pub alpha_stats: (f32, f32, f32),
    pub window: usize,
    pub interp_factor: usize,
    pub interpolated_frames: usize,
    pub averaged_frames: usize,
    pub degradation: DegradeRecord,
}

impl PairMetadata {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "r = {:.6}", self.r);
        match self.target_luminance {
            Some(t) => {
                let _ = writeln!(s, "target_luminance = {t:.6}");
            }
            None => {
                let _ = writeln!(s, "target_luminance = none");
            }
        }
        let (lo, mean, hi) = self.alpha_stats;
        let _ = writeln!(s, "alpha_min = {lo:.6}");
        let _ = writeln!(s, "alpha_mean = {mean:.6}");
        let _ = writeln!(s, "alpha_max = {hi:.6}");
        let _ = writeln!(s, "window = {}", self.window);
        let _ = writeln!(s, "interp_factor = {}", self.interp_factor);
        let _ = writeln!(s, "interpolated_frames = {}", self.interpolated_frames);
        let _ = writeln!(s, "averaged_frames = {}", self.averaged_frames);
        match self.degradation.defocus {
            Some((sigma, beta)) => {
                let _ = writeln!(s, "defocus_sigma = {sigma:.6}");
                let _ = writeln!(s, "defocus_beta = {beta:.6}");
            }
            None => {
                let _ = writeln!(s, "defocus = none");
            }
        }
        match self.degradation.noise {
            Some(p) => {
                let _ = writeln!(s, "noise_shot_gain = {:.6}", p.shot_gain);
                let _ = writeln!(s, "noise_read_sigma = {:.6}", p.read_sigma);
            }
            None => {
                let _ = writeln!(s, "noise = none");
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub low_blur: ImageF,
    pub gt: ImageF,
    pub meta: PairMetadata,
}

// stage ids for seed derivation
const STAGE_ALPHA: u64 = 1;
const STAGE_TARGET: u64 = 2;
const STAGE_R: u64 = 3;
const STAGE_DEGRADE: u64 = 4;

/// Full pipeline: darken -> interpolate -> clipping reverse + average ->
/// defocus -> noise. The ground truth is the untouched middle frame.
pub fn make_pair(sharp: &FrameSequence, cfg: &PairConfig, seed: u64) -> Result<Pair> {
    cfg.validate()?;
    if sharp.len() != cfg.blur.window {
        return Err(Error::config(format!(
            "sequence has {} frames, window is {}",
            sharp.len(),
            cfg.blur.window
        )));
    }
    let gt = sharp.mid_frame().clone();
    let (h, w) = (gt.height(), gt.width());

    let (dark_seq, alpha, target) = if cfg.darken.enabled {
        let d = &cfg.darken;
        let shape = generate_alpha_map(
            derive_seed(seed, &[STAGE_ALPHA]),
            h,
            w,
            d.smoothness,
            d.base_level,
            d.amplitude,
        )?;
        let (lo, hi) = d.target_range;
        let drawn = if hi > lo {
            ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STAGE_TARGET])).random_range(lo..hi)
        } else {
            lo
        };
        // already darker than the draw: keep the source exposure
        let target = drawn.min(mean_luminance(&gt));
        let spec = ExposureSpec {
            target_mean_luminance: target,
            iterations: d.iterations,
        };
        let (_, alpha) = condition_on_exposure(&gt, &spec, &shape)?;
        let seq = sharp.map_frames(|f| apply_darkening_curve(f, &alpha, d.iterations))?;
        (seq, alpha, Some(target))
    } else {
        (sharp.clone(), AlphaMap::constant(h, w, 0.0)?, None)
    };

    let r = cfg.blur.sample_r(derive_seed(seed, &[STAGE_R]));
    let blurred = synth_blur_with_r(&dark_seq, &cfg.blur, r)?;
    let (low_blur, degradation) =
        apply_random_degradation(&blurred.image, &cfg.degrade, derive_seed(seed, &[STAGE_DEGRADE]))?;

    Ok(Pair {
        low_blur,
        gt,
        meta: PairMetadata {
            seed,
            r,
            target_luminance: target,
            alpha_stats: alpha.stats(),
            window: cfg.blur.window,
            interp_factor: cfg.blur.interp_factor,
            interpolated_frames: blurred.interpolated_frames,
            averaged_frames: blurred.averaged_frames,
            degradation,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn seq_of(values: &[f32], channels: usize) -> FrameSequence {
        let frames = values
            .iter()
            .map(|&v| ImageF::filled(3, 3, channels, Domain::Srgb, v).unwrap())
            .collect();
        FrameSequence::new(frames, 24.0).unwrap()
    }

    #[test]
    fn interpolation_identity_and_values() {
        let s = seq_of(&[0.0, 0.8], 1);
        assert_eq!(interpolate_frames(&s, 1).unwrap(), s);
        let d = interpolate_frames(&s, 4).unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(d.fps(), 96.0);
        for (f, want) in d.frames().iter().zip([0.0, 0.2, 0.4, 0.6, 0.8]) {
            assert_abs_diff_eq!(f.data()[0], want, epsilon = 1e-6);
        }
        let same = interpolate_frames(&seq_of(&[0.3, 0.3], 1), 5).unwrap();
        assert!(same.frames().iter().all(|f| f.data().iter().all(|&v| v == 0.3)));
    }

    #[test]
    fn single_frame_cannot_be_interpolated() {
        let s = seq_of(&[0.5], 1);
        assert!(matches!(interpolate_frames(&s, 2), Err(Error::InsufficientFrames { .. })));
    }

    #[test]
    fn clipping_reverse_cases() {
        let lin = ImageF::new(1, 2, 3, Domain::Linear, vec![1.0, 1.0, 1.0, 0.3, 0.3, 0.3]).unwrap();
        let none = SaturationMask::empty(1, 2);
        assert_eq!(clipping_reverse(&lin, &none, 50.0).unwrap(), lin);
        let mask = SaturationMask::new(1, 2, vec![true, false]).unwrap();
        let out = clipping_reverse(&lin, &mask, 50.0).unwrap();
        assert_abs_diff_eq!(out.data()[0], 1.196_078_4, epsilon = 1e-6);
        assert_eq!(out.data()[3], 0.3);
        let bad = SaturationMask::empty(2, 2);
        assert!(matches!(clipping_reverse(&lin, &bad, 50.0), Err(Error::Shape(_))));
    }

    #[test]
    fn two_frame_blur_matches_hand_value() {
        // odd window of three; a 0.6 duty cycle opens the shutter on the
        // first two frames only
        let cfg = BlurConfig {
            window: 3,
            interp_factor: 1,
            duty_cycle: 0.6,
            clipping_reverse: false,
            ..BlurConfig::default()
        };
        let s = seq_of(&[0.2, 0.6, 0.95], 3);
        let out = synth_blur_with_r(&s, &cfg, 0.0).unwrap();
        assert_eq!(out.averaged_frames, 2);
        let want = ((0.2f64.powf(2.2) + 0.6f64.powf(2.2)) / 2.0).powf(1.0 / 2.2);
        assert_abs_diff_eq!(want, 0.4552, epsilon = 1e-4);
        assert_abs_diff_eq!(out.image.data()[0] as f64, want, epsilon = 1e-5);
    }

    #[test]
    fn clipping_reverse_brightens_a_moving_dot() {
        // 3-px dot; CR only matters where the streak covers a pixel for
        // part of the exposure, which at this size needs a slow dot
        let seq = crate::scenes::DotScene {
            height: 16,
            width: 32,
            frames: 7,
            radius: 1.5,
            cy: 8.0,
            cx: 16.0,
            speed: 0.5,
            background: 0.0,
        }
        .sequence()
        .unwrap();
        let on = BlurConfig::default();
        let off = BlurConfig { clipping_reverse: false, ..on.clone() };
        let count = |cfg: &BlurConfig| {
            let img = synth_blur_with_r(&seq, cfg, 100.0).unwrap().image;
            crate::colorcore::lab_lightness(&img).unwrap().iter().filter(|&&l| l > 98.0).count()
        };
        assert!(count(&on) > count(&off));
    }

    #[test]
    fn window_length_is_checked() {
        let s = seq_of(&[0.2, 0.6, 0.4], 3);
        assert!(matches!(synth_blur(&s, &BlurConfig::default(), 0), Err(Error::Config(_))));
    }

    #[test]
    fn exposure_range_is_centered() {
        let cfg = BlurConfig::default();
        assert_eq!(cfg.interpolated_count(), 49);
        let r = cfg.exposure_range(49);
        assert_eq!(r.len(), 40);
        assert_eq!(r, 4..44);
        let full = BlurConfig {
            duty_cycle: 1.0,
            ..cfg
        };
        assert_eq!(full.exposure_range(49), 0..49);
    }

    #[test]
    fn config_validation() {
        let bad = [
            BlurConfig { window: 4, ..BlurConfig::default() },
            BlurConfig { interp_factor: 0, ..BlurConfig::default() },
            BlurConfig { r_range: (20.0, 300.0), ..BlurConfig::default() },
            BlurConfig { duty_cycle: 0.0, ..BlurConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
