//! Pipeline configuration in a flat `key = value` text format. Sections
//! are dotted prefixes (`blur.window = 7`), ranges are written `lo, hi`,
//! `#` starts a comment. Unknown and repeated keys are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lednet_core::blursynth::{BlurConfig, DarkenConfig, PairConfig};
use lednet_core::degrade::DegradeConfig;
use lednet_core::net::{LedNetConfig, SkipMode, TrainConfig};
use lednet_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub pair: PairConfig,
    pub net: LedNetConfig,
    pub train: TrainConfig,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_range<T: FromStr>(key: &str, v: &str) -> Result<(T, T)> {
    let (a, b) = v
        .split_once(',')
        .ok_or_else(|| Error::config(format!("{key}: expected `lo, hi`, got {v:?}")))?;
    Ok((parse(key, a.trim())?, parse(key, b.trim())?))
}

fn range<T: std::fmt::Display>((a, b): (T, T)) -> String {
    format!("{a}, {b}")
}

fn path(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl PipelineConfig {
    pub fn load(file: impl AsRef<Path>) -> Result<Self> {
        let file = file.as_ref();
        let text = fs::read_to_string(file)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", file.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", no + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::config(format!("line {}: duplicate key {key}", no + 1)));
            }
            cfg.set(key, value.trim())
                .map_err(|e| Error::config(format!("line {}: {e}", no + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.pair.validate()?;
        self.net.validate()?;
        self.train.validate()
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let b = &mut self.pair.blur;
        let d = &mut self.pair.darken;
        let g = &mut self.pair.degrade;
        let n = &mut self.net;
        let t = &mut self.train;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "paths.input" => self.paths.input = Some(v.into()),
            "paths.output" => self.paths.output = Some(v.into()),
            "paths.checkpoint" => self.paths.checkpoint = Some(v.into()),
            "blur.window" => b.window = parse(key, v)?,
            "blur.interp_factor" => b.interp_factor = parse(key, v)?,
            "blur.r_range" => b.r_range = parse_range(key, v)?,
            "blur.delta" => b.delta = parse(key, v)?,
            "blur.duty_cycle" => b.duty_cycle = parse(key, v)?,
            "blur.clipping_reverse" => b.clipping_reverse = parse_bool(key, v)?,
            "darken.enabled" => d.enabled = parse_bool(key, v)?,
            "darken.target_range" => d.target_range = parse_range(key, v)?,
            "darken.iterations" => d.iterations = parse(key, v)?,
            "darken.smoothness" => d.smoothness = parse(key, v)?,
            "darken.base_level" => d.base_level = parse(key, v)?,
            "darken.amplitude" => d.amplitude = parse(key, v)?,
            "degrade.defocus_prob" => g.defocus_prob = parse(key, v)?,
            "degrade.sigma_range" => g.sigma_range = parse_range(key, v)?,
            "degrade.beta_range" => g.beta_range = parse_range(key, v)?,
            "degrade.kernel_size" => g.kernel_size = parse(key, v)?,
            "degrade.noise_prob" => g.noise_prob = parse(key, v)?,
            "degrade.read_sigma_range" => g.read_sigma_range = parse_range(key, v)?,
            "degrade.shot_gain_range" => g.shot_gain_range = parse_range(key, v)?,
            "net.base_channels" => n.base_channels = parse(key, v)?,
            "net.scales" => n.scales = parse(key, v)?,
            "net.curve_n" => n.curve_n = parse(key, v)?,
            "net.fac_d" => n.fac_d = parse(key, v)?,
            "net.use_ppm" => n.use_ppm = parse_bool(key, v)?,
            "net.use_curve_nlu" => n.use_curve_nlu = parse_bool(key, v)?,
            "net.skip_mode" => n.skip_mode = SkipMode::parse(v)?,
            "net.use_enh_loss" => n.use_enh_loss = parse_bool(key, v)?,
            "net.lambda_per" => n.lambda_per = parse(key, v)?,
            "net.lambda_en" => n.lambda_en = parse(key, v)?,
            "net.lambda_deb" => n.lambda_deb = parse(key, v)?,
            "train.steps" => t.steps = parse(key, v)?,
            "train.lr" => t.lr = parse(key, v)?,
            "train.batch_size" => t.batch_size = parse(key, v)?,
            "train.patch_size" => t.patch_size = parse(key, v)?,
            "train.augment" => t.augment = parse_bool(key, v)?,
            "train.adam_beta1" => t.adam.beta1 = parse(key, v)?,
            "train.adam_beta2" => t.adam.beta2 = parse(key, v)?,
            "train.adam_eps" => t.adam.eps = parse(key, v)?,
            _ => return Err(Error::config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every effective setting as `(key, value)`, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let BlurConfig {
            window,
            interp_factor,
            r_range,
            delta,
            duty_cycle,
            clipping_reverse,
        } = &self.pair.blur;
        let DarkenConfig {
            enabled,
            target_range,
            iterations,
            smoothness,
            base_level,
            amplitude,
        } = &self.pair.darken;
        let DegradeConfig {
            defocus_prob,
            sigma_range,
            beta_range,
            kernel_size,
            noise_prob,
            read_sigma_range,
            shot_gain_range,
        } = &self.pair.degrade;
        let n = &self.net;
        let t = &self.train;
        let mut out = vec![("seed", self.seed.to_string())];
        for (k, p) in [
            ("paths.input", path(&self.paths.input)),
            ("paths.output", path(&self.paths.output)),
            ("paths.checkpoint", path(&self.paths.checkpoint)),
        ] {
            if let Some(p) = p {
                out.push((k, p));
            }
        }
        out.extend([
            ("blur.window", window.to_string()),
            ("blur.interp_factor", interp_factor.to_string()),
            ("blur.r_range", range(*r_range)),
            ("blur.delta", delta.to_string()),
            ("blur.duty_cycle", duty_cycle.to_string()),
            ("blur.clipping_reverse", clipping_reverse.to_string()),
            ("darken.enabled", enabled.to_string()),
            ("darken.target_range", range(*target_range)),
            ("darken.iterations", iterations.to_string()),
            ("darken.smoothness", smoothness.to_string()),
            ("darken.base_level", base_level.to_string()),
            ("darken.amplitude", amplitude.to_string()),
            ("degrade.defocus_prob", defocus_prob.to_string()),
            ("degrade.sigma_range", range(*sigma_range)),
            ("degrade.beta_range", range(*beta_range)),
            ("degrade.kernel_size", kernel_size.to_string()),
            ("degrade.noise_prob", noise_prob.to_string()),
            ("degrade.read_sigma_range", range(*read_sigma_range)),
            ("degrade.shot_gain_range", range(*shot_gain_range)),
            ("net.base_channels", n.base_channels.to_string()),
            ("net.scales", n.scales.to_string()),
            ("net.curve_n", n.curve_n.to_string()),
            ("net.fac_d", n.fac_d.to_string()),
            ("net.use_ppm", n.use_ppm.to_string()),
            ("net.use_curve_nlu", n.use_curve_nlu.to_string()),
            ("net.skip_mode", n.skip_mode.as_str().to_string()),
            ("net.use_enh_loss", n.use_enh_loss.to_string()),
            ("net.lambda_per", n.lambda_per.to_string()),
            ("net.lambda_en", n.lambda_en.to_string()),
            ("net.lambda_deb", n.lambda_deb.to_string()),
            ("train.steps", t.steps.to_string()),
            ("train.lr", t.lr.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.patch_size", t.patch_size.to_string()),
            ("train.augment", t.augment.to_string()),
            ("train.adam_beta1", t.adam.beta1.to_string()),
            ("train.adam_beta2", t.adam.beta2.to_string()),
            ("train.adam_eps", t.adam.eps.to_string()),
        ]);
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut section = "";
        for (k, v) in self.entries() {
            let sec = k.split_once('.').map_or("", |(s, _)| s);
            if sec != section {
                s.push('\n');
                section = sec;
            }
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn edited_values_round_trip() {
        let text = "\
seed = 42
paths.input = data/seqs   # trailing comment
blur.r_range = 30, 60.5
blur.duty_cycle = 0.7
darken.enabled = false
degrade.noise_prob = 0.25
net.skip_mode = concat
net.lambda_en = 0.3
train.lr = 0.00123
";
        let cfg = PipelineConfig::parse(text).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.paths.input.as_deref(), Some(Path::new("data/seqs")));
        assert_eq!(cfg.pair.blur.r_range, (30.0, 60.5));
        assert!(!cfg.pair.darken.enabled);
        assert_eq!(cfg.net.skip_mode, SkipMode::Concat);
        assert_eq!(cfg.train.lr, 0.00123);
        let again = PipelineConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_text(), cfg.to_text());
    }

    #[test]
    fn entries_cover_every_settable_key() {
        let cfg = PipelineConfig {
            paths: Paths {
                input: Some("i".into()),
                output: Some("o".into()),
                checkpoint: Some("c".into()),
            },
            ..PipelineConfig::default()
        };
        for (k, v) in cfg.entries() {
            let mut other = PipelineConfig::default();
            other.set(k, &v).unwrap();
        }
        assert_eq!(cfg.entries().len(), 42);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "blur.windw = 7",
            "seed = 1\nseed = 2",
            "blur.window",
            "blur.window = 6",
            "blur.r_range = 30",
            "net.use_ppm = maybe",
            "net.fac_d = 4",
            "train.patch_size = 20",
        ] {
            assert!(PipelineConfig::parse(text).is_err(), "{text}");
        }
    }
}
