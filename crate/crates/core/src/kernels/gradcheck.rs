//! Central-difference gradient checking against the analytic backward
//! passes, plus the registry of seeded fixtures for every kernel.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::{conv2d_bwd, conv2d_fwd, ConvSpec, Padding};
use super::curve::{curve_nlu_bwd, curve_nlu_fwd, CurveParams};
use super::fac::{fac_bwd, fac_fwd, FilterBank};
use super::layers::{CurveEstimator, FascHead, Ppm, ResidualBlock, ResidualDownsample, ResidualUpsample};
use super::params::{Grads, Initializer, ParamStore};
use super::tensor::Tensor;
use crate::error::Result;

pub const DEFAULT_EPS: f64 = 1e-6;
pub const KERNEL_TOLERANCE: f64 = 1e-4;
pub const NETWORK_TOLERANCE: f64 = 1e-3;
pub const FIXTURES_PER_OP: u64 = 3;

type LossFn = Box<dyn Fn(&[Vec<f64>]) -> Result<f64> + Send + Sync>;
type GradFn = Box<dyn Fn(&[Vec<f64>]) -> Result<Vec<Vec<f64>>> + Send + Sync>;

/// A scalar function of named inputs together with its claimed gradient.
pub struct GradFixture {
    pub op: String,
    pub seed: u64,
    pub inputs: Vec<(String, Vec<f64>)>,
    pub tolerance: f64,
    /// Entries checked per input; larger inputs are subsampled.
    pub max_entries: usize,
    loss: LossFn,
    grad: GradFn,
}

impl GradFixture {
    pub fn new(
        op: impl Into<String>,
        seed: u64,
        inputs: Vec<(String, Vec<f64>)>,
        loss: impl Fn(&[Vec<f64>]) -> Result<f64> + Send + Sync + 'static,
        grad: impl Fn(&[Vec<f64>]) -> Result<Vec<Vec<f64>>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            op: op.into(),
            seed,
            inputs,
            tolerance: KERNEL_TOLERANCE,
            max_entries: 40,
            loss: Box::new(loss),
            grad: Box::new(grad),
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_max_entries(mut self, n: usize) -> Self {
        self.max_entries = n;
        self
    }

    pub fn values(&self) -> Vec<Vec<f64>> {
        self.inputs.iter().map(|(_, v)| v.clone()).collect()
    }

    pub fn loss(&self, values: &[Vec<f64>]) -> Result<f64> {
        (self.loss)(values)
    }

    pub fn analytic(&self, values: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        (self.grad)(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub op: String,
    pub seed: u64,
    pub max_rel_error: f64,
    /// Worst relative error per named input.
    pub per_input: Vec<(String, f64)>,
    pub checked: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<22} seed {:<3} max rel err {:>10.3e} (tol {:.0e}, {} entries) {}",
            self.op,
            self.seed,
            self.max_rel_error,
            self.tolerance,
            self.checked,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn sample_indices(len: usize, max: usize, seed: u64) -> Vec<usize> {
    if len <= max {
        return (0..len).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, len, max).into_vec();
    picked.sort_unstable();
    picked
}

/// Compares the analytic gradient with central differences.
pub fn finite_diff_check(fixture: &GradFixture, eps: f64, tol: f64) -> Result<GradReport> {
    let base = fixture.values();
    let analytic = fixture.analytic(&base)?;
    let mut per_input = Vec::with_capacity(base.len());
    let mut worst = 0f64;
    let mut checked = 0;
    let mut work = base.clone();
    for (i, (name, values)) in fixture.inputs.iter().enumerate() {
        let mut input_worst = 0f64;
        for j in sample_indices(values.len(), fixture.max_entries, fixture.seed ^ i as u64) {
            let orig = work[i][j];
            work[i][j] = orig + eps;
            let plus = fixture.loss(&work)?;
            work[i][j] = orig - eps;
            let minus = fixture.loss(&work)?;
            work[i][j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(analytic[i][j], numeric);
            input_worst = input_worst.max(if err.is_nan() { f64::INFINITY } else { err });
            checked += 1;
        }
        worst = worst.max(input_worst);
        per_input.push((name.clone(), input_worst));
    }
    Ok(GradReport {
        op: fixture.op.clone(),
        seed: fixture.seed,
        max_rel_error: worst,
        per_input,
        checked,
        tolerance: tol,
        pass: worst < tol,
    })
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tensor_like(shape: (usize, usize, usize), data: &[f64]) -> Result<Tensor> {
    Tensor::new(shape.0, shape.1, shape.2, data.to_vec())
}

type LayerFwd<L, C> = fn(&L, &ParamStore, &Tensor) -> Result<(Tensor, C)>;
type LayerBwd<L, C> = fn(&L, &ParamStore, &C, &Tensor, &mut Grads) -> Result<Tensor>;

/// Fixture over a layer's input and all of its parameters, with loss
/// `<layer(x), upstream>` for a fixed random upstream.
pub fn layer_fixture<L, C>(
    op: &str,
    seed: u64,
    x: Tensor,
    store: ParamStore,
    layer: L,
    fwd: LayerFwd<L, C>,
    bwd: LayerBwd<L, C>,
) -> Result<GradFixture>
where
    L: Send + Sync + 'static,
    C: 'static,
{
    let (out, _) = fwd(&layer, &store, &x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let upstream = Tensor::new(out.h(), out.w(), out.c(), uniform(&mut rng, out.len(), -1.0, 1.0))?;
    let xshape = x.shape();

    let mut inputs = vec![("x".to_string(), x.into_data())];
    inputs.extend(store.params().iter().map(|p| (p.name.clone(), p.value.clone())));

    let rebuild = {
        let store = store.clone();
        move |values: &[Vec<f64>]| -> Result<(Tensor, ParamStore)> {
            let mut ps = store.clone();
            for (p, v) in ps.params_mut().iter_mut().zip(&values[1..]) {
                p.value.clone_from(v);
            }
            Ok((tensor_like(xshape, &values[0])?, ps))
        }
    };
    let layer = std::sync::Arc::new(layer);
    let upstream = std::sync::Arc::new(upstream);

    let loss = {
        let (layer, upstream, rebuild) = (layer.clone(), upstream.clone(), rebuild.clone());
        move |values: &[Vec<f64>]| -> Result<f64> {
            let (x, ps) = rebuild(values)?;
            let (out, _) = fwd(&layer, &ps, &x)?;
            Ok(dot(out.data(), upstream.data()))
        }
    };
    let grad = move |values: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let (x, ps) = rebuild(values)?;
        let (_, cache) = fwd(&layer, &ps, &x)?;
        let mut grads = Grads::zeros_like(&ps);
        let dx = bwd(&layer, &ps, &cache, &upstream, &mut grads)?;
        let mut out = vec![dx.into_data()];
        out.extend(ps.ids().map(|id| grads.get(id).to_vec()));
        Ok(out)
    };
    Ok(GradFixture::new(op, seed, inputs, loss, grad))
}

fn conv_fixture(op: &str, seed: u64, spec: ConvSpec, h: usize, w: usize, corrupt: f64) -> Result<GradFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform(&mut rng, h * w * spec.cin, -1.0, 1.0);
    let wts = uniform(&mut rng, spec.weight_len(), -0.5, 0.5);
    let b = uniform(&mut rng, spec.cout, -0.5, 0.5);
    let (oh, ow) = spec.out_size(h, w);
    let up = uniform(&mut rng, oh * ow * spec.cout, -1.0, 1.0);
    let up2 = up.clone();
    let loss = move |v: &[Vec<f64>]| -> Result<f64> {
        let out = conv2d_fwd(&Tensor::new(h, w, spec.cin, v[0].clone())?, &v[1], Some(&v[2]), &spec)?;
        Ok(dot(out.data(), &up))
    };
    let grad = move |v: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let x = Tensor::new(h, w, spec.cin, v[0].clone())?;
        let dy = Tensor::new(oh, ow, spec.cout, up2.clone())?;
        let g = conv2d_bwd(&x, &v[1], &spec, &dy)?;
        let dw = g.dw.iter().map(|v| v * corrupt).collect();
        Ok(vec![g.dx.into_data(), dw, g.db])
    };
    Ok(GradFixture::new(
        op,
        seed,
        vec![("x".into(), x), ("weight".into(), wts), ("bias".into(), b)],
        loss,
        grad,
    ))
}

/// Keeps values at least `margin` away from the clip points 0 and 1.
fn away_from_clip(v: f64, margin: f64) -> f64 {
    let mut v = v;
    for edge in [0.0, 1.0] {
        if (v - edge).abs() < margin {
            v = edge + margin.copysign(v - edge + 1e-300);
        }
    }
    v
}

fn curve_fixture(seed: u64) -> Result<GradFixture> {
    let (h, w, c, n) = (6, 6, 3, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f: Vec<f64> = uniform(&mut rng, h * w * c, -0.3, 1.3)
        .into_iter()
        .map(|v| away_from_clip(v, 1e-3))
        .collect();
    let a = uniform(&mut rng, h * w * n, 0.02, 0.98);
    let up = uniform(&mut rng, h * w * c, -1.0, 1.0);
    let up2 = up.clone();
    let loss = move |v: &[Vec<f64>]| -> Result<f64> {
        let a = CurveParams::new(Tensor::new(h, w, n, v[1].clone())?)?;
        let out = curve_nlu_fwd(&Tensor::new(h, w, c, v[0].clone())?, &a, n)?;
        Ok(dot(out.data(), &up))
    };
    let grad = move |v: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let a = CurveParams::new(Tensor::new(h, w, n, v[1].clone())?)?;
        let f = Tensor::new(h, w, c, v[0].clone())?;
        let (df, da) = curve_nlu_bwd(&f, &a, n, &Tensor::new(h, w, c, up2.clone())?)?;
        Ok(vec![df.into_data(), da.into_data()])
    };
    Ok(GradFixture::new(
        "curve_nlu",
        seed,
        vec![("F".into(), f), ("A".into(), a)],
        loss,
        grad,
    )
    .with_max_entries(120))
}

fn fac_fixture(seed: u64) -> Result<GradFixture> {
    let (h, w, c, d) = (6, 6, 2, 3);
    let kc = c * d * d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform(&mut rng, h * w * c, -1.0, 1.0);
    let k = uniform(&mut rng, h * w * kc, -1.0, 1.0);
    let up = uniform(&mut rng, h * w * c, -1.0, 1.0);
    let up2 = up.clone();
    let loss = move |v: &[Vec<f64>]| -> Result<f64> {
        let bank = FilterBank::new(Tensor::new(h, w, kc, v[1].clone())?, d)?;
        let out = fac_fwd(&Tensor::new(h, w, c, v[0].clone())?, &bank)?;
        Ok(dot(out.data(), &up))
    };
    let grad = move |v: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let bank = FilterBank::new(Tensor::new(h, w, kc, v[1].clone())?, d)?;
        let x = Tensor::new(h, w, c, v[0].clone())?;
        let (dx, dk) = fac_bwd(&x, &bank, &Tensor::new(h, w, c, up2.clone())?)?;
        Ok(vec![dx.into_data(), dk.into_data()])
    };
    Ok(GradFixture::new("fac", seed, vec![("D".into(), x), ("K".into(), k)], loss, grad).with_max_entries(80))
}

fn random_tensor(seed: u64, h: usize, w: usize, c: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(h, w, c, uniform(&mut rng, h * w * c, -1.0, 1.0)).expect("sized buffer")
}

/// Fixture for one registered op name.
pub fn kernel_fixture(op: &str, seed: u64) -> Result<Option<GradFixture>> {
    let mut store = ParamStore::new();
    let mut init = Initializer::new(seed.wrapping_mul(7919).wrapping_add(13));
    let xs = seed.wrapping_add(1000);
    let fixture = match op {
        "conv2d" => conv_fixture(op, seed, ConvSpec::same(3, 3, 4), 7, 6, 1.0)?,
        "conv2d_stride2_reflect" => conv_fixture(
            op,
            seed,
            ConvSpec::same(3, 2, 3).with_stride(2).with_padding(Padding::Reflect),
            8,
            7,
            1.0,
        )?,
        "curve_nlu" => curve_fixture(seed)?,
        "curve_estimator" => {
            let layer = CurveEstimator::new(&mut store, &mut init, "est", 4, 3);
            layer_fixture(
                op,
                seed,
                random_tensor(xs, 6, 6, 4),
                store,
                layer,
                |l, ps, x| l.forward(ps, x).map(|(a, c)| (a.tensor().clone(), c)),
                |l, ps, c, dy, g| l.backward(ps, c, dy, g),
            )?
        }
        "ppm" => {
            let layer = Ppm::new(&mut store, &mut init, "ppm", 8);
            layer_fixture(
                op,
                seed,
                random_tensor(xs, 12, 12, 8),
                store,
                layer,
                |l, ps, x| l.forward(ps, x),
                |l, ps, c, dy, g| l.backward(ps, c, dy, g),
            )?
        }
        "fac" => fac_fixture(seed)?,
        "fasc_head" => {
            let layer = FascHead::new(&mut store, &mut init, "fasc", 3, 2, 5);
            layer_fixture(
                op,
                seed,
                random_tensor(xs, 6, 6, 3),
                store,
                layer,
                |l, ps, x| l.forward(ps, x).map(|(k, c)| (k.into_tensor(), c)),
                |l, ps, c, dy, g| l.backward(ps, c, dy, g),
            )?
        }
        "residual_block" => {
            let layer = ResidualBlock::new(&mut store, &mut init, "res", 3);
            layer_fixture(
                op,
                seed,
                random_tensor(xs, 6, 6, 3),
                store,
                layer,
                |l, ps, x| l.forward(ps, x),
                |l, ps, c, dy, g| l.backward(ps, c, dy, g),
            )?
        }
        "residual_downsample" => {
            let layer = ResidualDownsample::new(&mut store, &mut init, "down", 3, 4);
            layer_fixture(
                op,
                seed,
                random_tensor(xs, 8, 6, 3),
                store,
                layer,
                |l, ps, x| l.forward(ps, x),
                |l, ps, c, dy, g| l.backward(ps, c, dy, g),
            )?
        }
        "residual_upsample" => {
            let layer = ResidualUpsample::new(&mut store, &mut init, "up", 4, 3);
            layer_fixture(
                op,
                seed,
                random_tensor(xs, 4, 3, 4),
                store,
                layer,
                |l, ps, x| l.forward(ps, x),
                |l, ps, c, dy, g| l.backward(ps, c, dy, g),
            )?
        }
        "lednet_slice" => crate::net::gradcheck::network_slice_fixture(seed)?,
        _ => return Ok(None),
    };
    Ok(Some(fixture))
}

/// Every op with a registered gradient fixture, in suite order.
pub const REGISTERED_OPS: &[&str] = &[
    "conv2d",
    "conv2d_stride2_reflect",
    "curve_nlu",
    "curve_estimator",
    "ppm",
    "fac",
    "fasc_head",
    "residual_block",
    "residual_downsample",
    "residual_upsample",
    "lednet_slice",
];

/// Conv fixture whose weight gradient is deliberately scaled by 1.05.
pub fn corrupted_conv_fixture(seed: u64) -> Result<GradFixture> {
    conv_fixture("conv2d_corrupted", seed, ConvSpec::same(3, 3, 4), 7, 6, 1.05)
}

/// Shell-style glob with `*` and `?`.
pub fn glob_match(pattern: &str, name: &str) -> bool {
    fn rec(p: &[u8], n: &[u8]) -> bool {
        match (p.first(), n.first()) {
            (None, None) => true,
            (Some(b'*'), _) => rec(&p[1..], n) || (!n.is_empty() && rec(p, &n[1..])),
            (Some(b'?'), Some(_)) => rec(&p[1..], &n[1..]),
            (Some(a), Some(b)) if a == b => rec(&p[1..], &n[1..]),
            _ => false,
        }
    }
    rec(pattern.as_bytes(), name.as_bytes())
}

/// Runs `FIXTURES_PER_OP` seeded fixtures for every op matching `filter`.
pub fn run_suite(filter: &str) -> Result<Vec<GradReport>> {
    let mut reports = Vec::new();
    for op in REGISTERED_OPS.iter().filter(|op| glob_match(filter, op)) {
        for seed in 0..FIXTURES_PER_OP {
            let fixture = kernel_fixture(op, seed)?.expect("registered op has a fixture");
            reports.push(finite_diff_check(&fixture, DEFAULT_EPS, fixture.tolerance)?);
        }
    }
    Ok(reports)
}
