//! The three-scale enhancement encoder / deblurring decoder, its losses,
//! optimizer, checkpoints and the toy training loop.

pub mod checkpoint;
pub mod gradcheck;
pub mod infer;
pub mod loss;
pub mod model;
pub mod optim;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointInfo};
pub use infer::{infer, InferenceOutput};
pub use loss::{compute_loss, LossEval, LossParts, NoPerceptual, PerceptualHook};
pub use model::{ForwardTrace, LedNet};
pub use optim::{adam_step, cosine_lr, AdamConfig};
pub use train::{load_pair_dir, loss_csv, train_toy, LossRecord, TrainConfig, Trainer};

use crate::error::{Error, Result};

pub const SCALES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkipMode {
    Fasc,
    Concat,
}

impl SkipMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipMode::Fasc => "fasc",
            SkipMode::Concat => "concat",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fasc" => Ok(SkipMode::Fasc),
            "concat" => Ok(SkipMode::Concat),
            other => Err(Error::config(format!("unknown skip mode {other:?} (fasc or concat)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedNetConfig {
    /// Channels at the first scale; doubled at each following scale.
    pub base_channels: usize,
    pub scales: usize,
    pub curve_n: usize,
    pub fac_d: usize,
    pub use_ppm: bool,
    pub use_curve_nlu: bool,
    pub skip_mode: SkipMode,
    pub use_enh_loss: bool,
    pub lambda_per: f64,
    pub lambda_en: f64,
    pub lambda_deb: f64,
}

impl Default for LedNetConfig {
    fn default() -> Self {
        Self {
            base_channels: 16,
            scales: SCALES,
            curve_n: 3,
            fac_d: 5,
            use_ppm: true,
            use_curve_nlu: true,
            skip_mode: SkipMode::Fasc,
            use_enh_loss: true,
            lambda_per: 0.01,
            lambda_en: 0.8,
            lambda_deb: 1.0,
        }
    }
}

impl LedNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales != SCALES {
            return Err(Error::config(format!("scales must be {SCALES}, got {}", self.scales)));
        }
        if self.base_channels == 0 {
            return Err(Error::config("base_channels must be >= 1"));
        }
        if self.curve_n == 0 {
            return Err(Error::config("curve_n must be >= 1"));
        }
        if self.fac_d.is_multiple_of(2) {
            return Err(Error::config(format!("fac_d must be odd, got {}", self.fac_d)));
        }
        for (name, v) in [
            ("lambda_per", self.lambda_per),
            ("lambda_en", self.lambda_en),
            ("lambda_deb", self.lambda_deb),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Channel width at scale `k` (1-based); scale 0 is the stem.
    pub fn channels(&self, k: usize) -> usize {
        self.base_channels << k.saturating_sub(1)
    }

    /// Fingerprint of the fields that determine the parameter layout.
    pub fn arch_hash(&self) -> u64 {
        crate::seed::hash_str(&format!(
            "base={};scales={};n={};d={};ppm={};curve={};skip={}",
            self.base_channels,
            self.scales,
            self.curve_n,
            self.fac_d,
            self.use_ppm,
            self.use_curve_nlu,
            self.skip_mode.as_str()
        ))
    }
}
