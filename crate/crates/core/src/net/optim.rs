//! Adam with bias correction and a cosine-annealed learning rate.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernels::params::{Grads, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
        }
    }
}

/// `lr0 · (1 + cos(π t / T)) / 2`
pub fn cosine_lr(lr0: f64, t: u64, total: u64) -> f64 {
    if total == 0 {
        return lr0;
    }
    let frac = (t.min(total) as f64) / total as f64;
    lr0 * 0.5 * (1.0 + (PI * frac).cos())
}

/// One Adam update; increments the store's step counter. Refuses to
/// touch parameters when any gradient is non-finite.
pub fn adam_step(store: &mut ParamStore, grads: &Grads, lr: f64, cfg: &AdamConfig) -> Result<()> {
    if let Some(id) = grads.first_non_finite() {
        return Err(Error::Diverged {
            step: store.step(),
            op: store.param(id).name.clone(),
        });
    }
    let t = store.step() + 1;
    let bc1 = 1.0 - cfg.beta1.powf(t as f64);
    let bc2 = 1.0 - cfg.beta2.powf(t as f64);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let g = grads.get(id);
        let p = &mut store.params_mut()[id.index()];
        for (((w, m), v), &gi) in p.value.iter_mut().zip(&mut p.m).zip(&mut p.v).zip(g) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
            *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
        }
    }
    store.set_step(t);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_schedule_points() {
        assert_eq!(cosine_lr(2e-3, 0, 100), 2e-3);
        assert!((cosine_lr(2e-3, 50, 100) - 1e-3).abs() < 1e-15);
        assert!(cosine_lr(2e-3, 100, 100).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut ps = ParamStore::new();
        ps.add("w", vec![3], vec![0.5, -1.0, 2.0]);
        let before = ps.params()[0].value.clone();
        let g = Grads::zeros_like(&ps);
        for _ in 0..5 {
            adam_step(&mut ps, &g, 1e-2, &AdamConfig::default()).unwrap();
        }
        for (a, b) in ps.params()[0].value.iter().zip(&before) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(ps.step(), 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first update is lr · sign(g).
        let mut ps = ParamStore::new();
        let id = ps.add("w", vec![2], vec![1.0, 1.0]);
        let mut g = Grads::zeros_like(&ps);
        g.accumulate(id, &[3.0, -0.25]);
        adam_step(&mut ps, &g, 0.1, &AdamConfig::default()).unwrap();
        let v = ps.get(id);
        assert!((v[0] - 0.9).abs() < 1e-6);
        assert!((v[1] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn nan_gradient_names_the_parameter() {
        let mut ps = ParamStore::new();
        ps.add("a", vec![1], vec![0.0]);
        let id = ps.add("enc2.ppm.fuse.weight", vec![1], vec![0.0]);
        let mut g = Grads::zeros_like(&ps);
        g.accumulate(id, &[f64::NAN]);
        match adam_step(&mut ps, &g, 0.1, &AdamConfig::default()) {
            Err(Error::Diverged { step: 0, op }) => assert_eq!(op, "enc2.ppm.fuse.weight"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(ps.get(id), &[0.0]);
    }
}
