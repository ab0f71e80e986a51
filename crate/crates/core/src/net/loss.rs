//! Training objective: L1 on the 1/8-scale enhanced output against a
//! bilinearly downsampled target, L1 on the restored output, and an
//! optional perceptual term supplied through [`PerceptualHook`].

use super::model::ForwardTrace;
use super::LedNetConfig;
use crate::error::Result;
use crate::kernels::resample::bilinear_fwd;
use crate::kernels::Tensor;

/// A perceptual distance and its gradient with respect to `pred`.
pub trait PerceptualHook {
    fn loss(&self, pred: &Tensor, target: &Tensor) -> f64;
    fn grad(&self, pred: &Tensor, target: &Tensor) -> Tensor;
}

/// The default hook: contributes nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoPerceptual;

impl PerceptualHook for NoPerceptual {
    fn loss(&self, _pred: &Tensor, _target: &Tensor) -> f64 {
        0.0
    }

    fn grad(&self, pred: &Tensor, _target: &Tensor) -> Tensor {
        Tensor::zeros(pred.h(), pred.w(), pred.c())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    /// L1 between the enhanced output and the downsampled target.
    pub l_en: f64,
    /// L1 between the restored output and the target.
    pub l_deb: f64,
    /// Unweighted perceptual distance summed over both scales.
    pub l_per: f64,
    pub total: f64,
}

/// Loss value plus upstream gradients for [`super::LedNet::backward`].
#[derive(Debug, Clone)]
pub struct LossEval {
    pub parts: LossParts,
    pub d_output: Tensor,
    pub d_enhanced: Tensor,
}

fn l1(pred: &Tensor, target: &Tensor) -> (f64, Tensor) {
    let n = pred.len() as f64;
    let loss = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| {
            let d = a - b;
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    let grad = Tensor::new(pred.h(), pred.w(), pred.c(), grad).expect("same length as pred");
    (loss, grad)
}

pub fn downsample_target(y: &Tensor) -> Tensor {
    bilinear_fwd(y, y.h() / 8, y.w() / 8)
}

pub fn compute_loss(trace: &ForwardTrace, y: &Tensor, cfg: &LedNetConfig, hook: &dyn PerceptualHook) -> Result<LossEval> {
    y.expect_shape(&trace.output, "target")?;
    let y8 = downsample_target(y);
    let (l_deb, mut d_output) = l1(&trace.output, y);
    let (l_en, mut d_enhanced) = l1(&trace.enhanced, &y8);
    let en_w = if cfg.use_enh_loss { cfg.lambda_en } else { 0.0 };

    let mut l_per = hook.loss(&trace.output, y);
    let per_out = hook.grad(&trace.output, y);
    if cfg.use_enh_loss {
        l_per += hook.loss(&trace.enhanced, &y8);
    }

    d_output = d_output.map(|v| v * cfg.lambda_deb);
    d_output.add_assign(&per_out.map(|v| v * cfg.lambda_per));
    d_enhanced = d_enhanced.map(|v| v * en_w);
    if cfg.use_enh_loss {
        d_enhanced.add_assign(&hook.grad(&trace.enhanced, &y8).map(|v| v * cfg.lambda_per));
    }
    let total = en_w * l_en + cfg.lambda_deb * l_deb + cfg.lambda_per * l_per;
    Ok(LossEval {
        parts: LossParts {
            l_en: if cfg.use_enh_loss { l_en } else { 0.0 },
            l_deb,
            l_per,
            total,
        },
        d_output,
        d_enhanced,
    })
}
