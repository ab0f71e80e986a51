//! Deterministic toy-scale training: random crops with dihedral
//! augmentation, per-sample gradients averaged over a batch, Adam with a
//! cosine schedule, loss CSV and checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{load_checkpoint, save_checkpoint};
use super::infer::image_to_tensor;
use super::loss::{compute_loss, NoPerceptual, PerceptualHook};
use super::model::LedNet;
use super::optim::{adam_step, cosine_lr, AdamConfig};
use super::LedNetConfig;
use crate::colorcore::load_image;
use crate::error::{Error, Result};
use crate::kernels::{Grads, ParamStore, Tensor};
use crate::seed::derive_seed;

const STAGE_INIT: u64 = 0x696e_6974;
const STAGE_SAMPLE: u64 = 0x7361_6d70;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: u64,
    pub lr: f64,
    pub batch_size: usize,
    pub patch_size: usize,
    /// Random crops, flips and 90° rotations; when off, pairs are cycled
    /// in order with a centered crop.
    pub augment: bool,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 2e-3,
            batch_size: 4,
            patch_size: 32,
            augment: true,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.patch_size == 0 || !self.patch_size.is_multiple_of(8) {
            return Err(Error::config(format!(
                "patch_size must be a positive multiple of 8, got {}",
                self.patch_size
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    pub lr: f64,
    pub l_en: f64,
    pub l_deb: f64,
    pub total: f64,
}

impl LossRecord {
    pub const CSV_HEADER: &'static str = "step,lr,L_en,L_deb,total";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e}",
            self.step, self.lr, self.l_en, self.l_deb, self.total
        )
    }
}

pub fn loss_csv(records: &[LossRecord]) -> String {
    let mut s = String::from(LossRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// Applies one of the eight flips/rotations of the square; bit 0 flips
/// horizontally, bits 1..2 count quarter turns.
pub fn dihedral(t: &Tensor, code: u8) -> Tensor {
    let mut cur = if code & 1 == 1 {
        Tensor::from_fn(t.h(), t.w(), t.c(), |y, x, c| t.get(y, t.w() - 1 - x, c))
    } else {
        t.clone()
    };
    for _ in 0..(code >> 1) & 3 {
        let src = cur;
        cur = Tensor::from_fn(src.w(), src.h(), src.c(), |y, x, c| src.get(x, src.w() - 1 - y, c));
    }
    cur
}

pub fn crop(t: &Tensor, y0: usize, x0: usize, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(h, w, t.c(), |y, x, c| t.get(y0 + y, x0 + x, c))
}

/// Reads `low_blur/*.png` and the same-named `gt/*.png` under `dir`.
pub fn load_pair_dir(dir: impl AsRef<Path>) -> Result<Vec<(Tensor, Tensor)>> {
    let dir = dir.as_ref();
    let low_dir = dir.join("low_blur");
    let mut names: Vec<_> = fs::read_dir(&low_dir)
        .map_err(|e| Error::validation(format!("cannot list {}: {e}", low_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .filter(|n| Path::new(n).extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::validation(format!("no PNG pairs under {}", low_dir.display())));
    }
    names
        .iter()
        .map(|n| {
            let x = image_to_tensor(&load_image(low_dir.join(n))?)?;
            let y = image_to_tensor(&load_image(dir.join("gt").join(n))?)?;
            y.expect_shape(&x, "ground truth")?;
            Ok((x, y))
        })
        .collect()
}

pub struct Trainer {
    net: LedNet,
    store: ParamStore,
    net_cfg: LedNetConfig,
    cfg: TrainConfig,
    pairs: Vec<(Tensor, Tensor)>,
    hook: Box<dyn PerceptualHook>,
}

impl Trainer {
    pub fn new(net_cfg: &LedNetConfig, cfg: &TrainConfig, pairs: Vec<(Tensor, Tensor)>) -> Result<Self> {
        cfg.validate()?;
        if pairs.is_empty() {
            return Err(Error::validation("training needs at least one pair"));
        }
        for (x, y) in &pairs {
            y.expect_shape(x, "ground truth")?;
            if x.c() != 3 || x.h() < cfg.patch_size || x.w() < cfg.patch_size {
                return Err(Error::validation(format!(
                    "pair {:?} cannot supply {}x{} RGB patches",
                    x.shape(),
                    cfg.patch_size,
                    cfg.patch_size
                )));
            }
        }
        let mut store = ParamStore::new();
        let net = LedNet::new(net_cfg, &mut store, derive_seed(cfg.seed, &[STAGE_INIT]))?;
        Ok(Self {
            net,
            store,
            net_cfg: net_cfg.clone(),
            cfg: cfg.clone(),
            pairs,
            hook: Box::new(NoPerceptual),
        })
    }

    pub fn with_perceptual(mut self, hook: Box<dyn PerceptualHook>) -> Self {
        self.hook = hook;
        self
    }

    pub fn net(&self) -> &LedNet {
        &self.net
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn step_count(&self) -> u64 {
        self.store.step()
    }

    pub fn is_done(&self) -> bool {
        self.store.step() >= self.cfg.steps
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        save_checkpoint(dir, &self.store, &self.net_cfg).map(|_| ())
    }

    pub fn resume(&mut self, dir: impl AsRef<Path>) -> Result<()> {
        load_checkpoint(dir, &mut self.store, &self.net_cfg).map(|_| ())
    }

    fn sample(&self, step: u64, b: usize) -> (Tensor, Tensor) {
        let p = self.cfg.patch_size;
        if !self.cfg.augment {
            let (x, y) = &self.pairs[(step as usize * self.cfg.batch_size + b) % self.pairs.len()];
            let (y0, x0) = ((x.h() - p) / 2, (x.w() - p) / 2);
            return (crop(x, y0, x0, p, p), crop(y, y0, x0, p, p));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, &[STAGE_SAMPLE, step, b as u64]));
        let (x, y) = &self.pairs[rng.random_range(0..self.pairs.len())];
        let y0 = rng.random_range(0..=x.h() - p);
        let x0 = rng.random_range(0..=x.w() - p);
        let code: u8 = rng.random_range(0..8);
        (
            dihedral(&crop(x, y0, x0, p, p), code),
            dihedral(&crop(y, y0, x0, p, p), code),
        )
    }

    /// Runs one optimizer step and returns its batch-averaged losses.
    pub fn step(&mut self) -> Result<LossRecord> {
        let t = self.store.step();
        let lr = cosine_lr(self.cfg.lr, t, self.cfg.steps);
        let mut grads = Grads::zeros_like(&self.store);
        let (mut l_en, mut l_deb, mut total) = (0.0, 0.0, 0.0);
        for b in 0..self.cfg.batch_size {
            let (x, y) = self.sample(t, b);
            let trace = self.net.forward(&self.store, &x)?;
            let eval = compute_loss(&trace, &y, &self.net_cfg, self.hook.as_ref())?;
            if !eval.parts.total.is_finite() {
                return Err(Error::Diverged { step: t, op: "loss".into() });
            }
            self.net
                .backward(&self.store, &trace, &eval.d_output, &eval.d_enhanced, &mut grads)?;
            l_en += eval.parts.l_en;
            l_deb += eval.parts.l_deb;
            total += eval.parts.total;
        }
        let inv = 1.0 / self.cfg.batch_size as f64;
        grads.scale(inv);
        adam_step(&mut self.store, &grads, lr, &self.cfg.adam)?;
        Ok(LossRecord {
            step: t,
            lr,
            l_en: l_en * inv,
            l_deb: l_deb * inv,
            total: total * inv,
        })
    }

    /// Steps until `cfg.steps` is reached.
    pub fn run(&mut self) -> Result<Vec<LossRecord>> {
        let mut out = Vec::with_capacity(self.cfg.steps.saturating_sub(self.store.step()) as usize);
        while !self.is_done() {
            out.push(self.step()?);
        }
        Ok(out)
    }
}

/// Trains on a pair directory and writes `loss.csv` and `checkpoint/`
/// under `out_dir`. With `resume`, continues from the checkpoint there
/// and appends to the CSV.
pub fn train_toy(
    data_dir: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    net_cfg: &LedNetConfig,
    cfg: &TrainConfig,
    resume: bool,
) -> Result<Vec<LossRecord>> {
    let out_dir = out_dir.as_ref();
    let pairs = load_pair_dir(data_dir)?;
    let mut trainer = Trainer::new(net_cfg, cfg, pairs)?;
    let ckpt = out_dir.join("checkpoint");
    let csv = out_dir.join("loss.csv");
    let mut text = String::new();
    if resume {
        trainer.resume(&ckpt)?;
        text = fs::read_to_string(&csv).unwrap_or_default();
        let keep = trainer.step_count();
        text = text
            .lines()
            .filter(|l| {
                l.split(',')
                    .next()
                    .and_then(|s| s.parse::<u64>().ok())
                    .is_none_or(|s| s < keep)
            })
            .fold(String::new(), |acc, l| acc + l + "\n");
    }
    let records = trainer.run()?;
    fs::create_dir_all(out_dir)?;
    if text.is_empty() {
        text = loss_csv(&records);
    } else {
        for r in &records {
            text.push_str(&r.csv_line());
            text.push('\n');
        }
    }
    fs::write(&csv, text)?;
    trainer.save(&ckpt)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_pairs(n: usize) -> Vec<(Tensor, Tensor)> {
        (0..n)
            .map(|i| {
                let y = Tensor::from_fn(16, 16, 3, |r, c, ch| {
                    0.3 + 0.4 * (((r + i) / 4 + c / 4 + ch) % 2) as f64
                });
                (y.map(|v| v * 0.3), y)
            })
            .collect()
    }

    fn small_cfg() -> (LedNetConfig, TrainConfig) {
        (
            LedNetConfig { base_channels: 4, fac_d: 3, ..Default::default() },
            TrainConfig { steps: 4, batch_size: 2, patch_size: 8, ..Default::default() },
        )
    }

    #[test]
    fn dihedral_group() {
        let t = Tensor::from_fn(3, 3, 1, |y, x, _| (y * 3 + x) as f64);
        let r1 = dihedral(&t, 2);
        assert_eq!(r1.get(0, 0, 0), 2.0);
        assert_eq!(dihedral(&dihedral(&r1, 2), 4), t);
        let f = dihedral(&t, 1);
        assert_eq!(f.get(0, 0, 0), 2.0);
        assert_eq!(dihedral(&f, 1), t);
        let all: std::collections::HashSet<Vec<u64>> = (0..8)
            .map(|c| dihedral(&t, c).data().iter().map(|v| v.to_bits()).collect())
            .collect();
        assert_eq!(all.len(), 8);
    }

    #[test]
    fn repeatable_loss_curve() {
        let (n, t) = small_cfg();
        let a = Trainer::new(&n, &t, toy_pairs(3)).unwrap().run().unwrap();
        let b = Trainer::new(&n, &t, toy_pairs(3)).unwrap().run().unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a, b);
        assert_eq!(a[0].lr, t.lr);
    }

    #[test]
    fn enh_loss_off_runs() {
        let (mut n, t) = small_cfg();
        n.use_enh_loss = false;
        let r = Trainer::new(&n, &t, toy_pairs(2)).unwrap().run().unwrap();
        assert!(r.iter().all(|r| r.l_en == 0.0 && r.total.is_finite()));
    }

    #[test]
    fn rejects_small_images() {
        let (n, mut t) = small_cfg();
        t.patch_size = 24;
        assert!(Trainer::new(&n, &t, toy_pairs(1)).is_err());
        t.patch_size = 12;
        assert!(Trainer::new(&n, &t, toy_pairs(1)).is_err());
    }

    #[test]
    fn csv_format() {
        let r = LossRecord { step: 3, lr: 1e-3, l_en: 0.5, l_deb: 0.25, total: 0.65 };
        let csv = loss_csv(&[r]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("step,lr,L_en,L_deb,total"));
        let fields: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields, vec![3.0, 1e-3, 0.5, 0.25, 0.65]);
    }
}
