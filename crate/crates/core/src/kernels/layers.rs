//! Parameterized building blocks. Each block's `forward` returns its
//! output and a cache; `backward` consumes the cache, accumulates
//! parameter gradients into [`Grads`], and returns the input gradient.

use super::activation::{relu_bwd, relu_fwd, sigmoid_bwd, sigmoid_fwd};
use super::conv::{conv2d_bwd, conv2d_fwd, ConvSpec, Padding};
use super::curve::CurveParams;
use super::fac::FilterBank;
use super::params::{Grads, Initializer, ParamId, ParamStore};
use super::resample::{adaptive_avg_pool_bwd, adaptive_avg_pool_fwd, bilinear_bwd, bilinear_fwd};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub spec: ConvSpec,
}

impl Conv2d {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, spec: ConvSpec) -> Self {
        Self::with_gain(store, init, name, spec, 1.0)
    }

    pub fn with_gain(store: &mut ParamStore, init: &mut Initializer, name: &str, spec: ConvSpec, gain: f64) -> Self {
        let w = init.he_normal(spec.weight_len(), spec.patch_len(), gain);
        let weight = store.add(
            format!("{name}.weight"),
            vec![spec.kernel, spec.kernel, spec.cin, spec.cout],
            w,
        );
        let bias = store.add(format!("{name}.bias"), vec![spec.cout], vec![0.0; spec.cout]);
        Self { weight, bias, spec }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor) -> Result<Tensor> {
        conv2d_fwd(x, ps.get(self.weight), Some(ps.get(self.bias)), &self.spec)
    }

    pub fn backward(&self, ps: &ParamStore, x: &Tensor, dy: &Tensor, grads: &mut Grads) -> Result<Tensor> {
        let g = conv2d_bwd(x, ps.get(self.weight), &self.spec, dy)?;
        grads.accumulate(self.weight, &g.dw);
        grads.accumulate(self.bias, &g.db);
        Ok(g.dx)
    }
}

/// `y = x + conv2(relu(conv1(x)))`
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

#[derive(Debug, Clone)]
pub struct ResidualCache {
    x: Tensor,
    h1: Tensor,
    a1: Tensor,
}

impl ResidualBlock {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, c: usize) -> Self {
        Self {
            conv1: Conv2d::new(store, init, &format!("{name}.conv1"), ConvSpec::same(3, c, c)),
            conv2: Conv2d::with_gain(store, init, &format!("{name}.conv2"), ConvSpec::same(3, c, c), 0.5),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor) -> Result<(Tensor, ResidualCache)> {
        let h1 = self.conv1.forward(ps, x)?;
        let a1 = relu_fwd(&h1);
        let mut y = self.conv2.forward(ps, &a1)?;
        y.add_assign(x);
        Ok((
            y,
            ResidualCache {
                x: x.clone(),
                h1,
                a1,
            },
        ))
    }

    pub fn backward(&self, ps: &ParamStore, cache: &ResidualCache, dy: &Tensor, grads: &mut Grads) -> Result<Tensor> {
        let da1 = self.conv2.backward(ps, &cache.a1, dy, grads)?;
        let dh1 = relu_bwd(&cache.h1, &da1);
        let mut dx = self.conv1.backward(ps, &cache.x, &dh1, grads)?;
        dx.add_assign(dy);
        Ok(dx)
    }
}

/// Halves the resolution: `conv_s2(relu(conv(x))) + conv1x1_s2(x)`.
#[derive(Debug, Clone)]
pub struct ResidualDownsample {
    pub conv_a: Conv2d,
    pub conv_b: Conv2d,
    pub skip: Conv2d,
}

#[derive(Debug, Clone)]
pub struct DownCache {
    x: Tensor,
    h: Tensor,
    a: Tensor,
}

impl ResidualDownsample {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, cin: usize, cout: usize) -> Self {
        Self {
            conv_a: Conv2d::new(store, init, &format!("{name}.conv_a"), ConvSpec::same(3, cin, cin)),
            conv_b: Conv2d::with_gain(
                store,
                init,
                &format!("{name}.conv_b"),
                ConvSpec::same(3, cin, cout).with_stride(2),
                0.5,
            ),
            skip: Conv2d::new(store, init, &format!("{name}.skip"), ConvSpec::same(1, cin, cout).with_stride(2)),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor) -> Result<(Tensor, DownCache)> {
        let h = self.conv_a.forward(ps, x)?;
        let a = relu_fwd(&h);
        let mut y = self.conv_b.forward(ps, &a)?;
        y.add_assign(&self.skip.forward(ps, x)?);
        Ok((y, DownCache { x: x.clone(), h, a }))
    }

    pub fn backward(&self, ps: &ParamStore, cache: &DownCache, dy: &Tensor, grads: &mut Grads) -> Result<Tensor> {
        let da = self.conv_b.backward(ps, &cache.a, dy, grads)?;
        let dh = relu_bwd(&cache.h, &da);
        let mut dx = self.conv_a.backward(ps, &cache.x, &dh, grads)?;
        dx.add_assign(&self.skip.backward(ps, &cache.x, dy, grads)?);
        Ok(dx)
    }
}

/// Doubles the resolution: `conv(up(relu(conv(x)))) + conv1x1(up(x))`.
#[derive(Debug, Clone)]
pub struct ResidualUpsample {
    pub conv_a: Conv2d,
    pub conv_b: Conv2d,
    pub skip: Conv2d,
}

#[derive(Debug, Clone)]
pub struct UpCache {
    x: Tensor,
    h: Tensor,
    up_a: Tensor,
    up_x: Tensor,
}

impl ResidualUpsample {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, cin: usize, cout: usize) -> Self {
        Self {
            conv_a: Conv2d::new(store, init, &format!("{name}.conv_a"), ConvSpec::same(3, cin, cin)),
            conv_b: Conv2d::with_gain(store, init, &format!("{name}.conv_b"), ConvSpec::same(3, cin, cout), 0.5),
            skip: Conv2d::new(store, init, &format!("{name}.skip"), ConvSpec::same(1, cin, cout)),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor) -> Result<(Tensor, UpCache)> {
        let (oh, ow) = (x.h() * 2, x.w() * 2);
        let h = self.conv_a.forward(ps, x)?;
        let up_a = bilinear_fwd(&relu_fwd(&h), oh, ow);
        let up_x = bilinear_fwd(x, oh, ow);
        let mut y = self.conv_b.forward(ps, &up_a)?;
        y.add_assign(&self.skip.forward(ps, &up_x)?);
        Ok((
            y,
            UpCache {
                x: x.clone(),
                h,
                up_a,
                up_x,
            },
        ))
    }

    pub fn backward(&self, ps: &ParamStore, cache: &UpCache, dy: &Tensor, grads: &mut Grads) -> Result<Tensor> {
        let (h, w) = (cache.x.h(), cache.x.w());
        let dup_a = self.conv_b.backward(ps, &cache.up_a, dy, grads)?;
        let dh = relu_bwd(&cache.h, &bilinear_bwd(&dup_a, h, w));
        let mut dx = self.conv_a.backward(ps, &cache.x, &dh, grads)?;
        let dup_x = self.skip.backward(ps, &cache.up_x, dy, grads)?;
        dx.add_assign(&bilinear_bwd(&dup_x, h, w));
        Ok(dx)
    }
}

/// Three 3×3 convolutions (ReLU between) and a sigmoid: n curve maps in (0, 1).
#[derive(Debug, Clone)]
pub struct CurveEstimator {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub conv3: Conv2d,
}

#[derive(Debug, Clone)]
pub struct EstimatorCache {
    x: Tensor,
    h1: Tensor,
    a1: Tensor,
    h2: Tensor,
    a2: Tensor,
    out: Tensor,
}

impl CurveEstimator {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, c: usize, n: usize) -> Self {
        Self {
            conv1: Conv2d::new(store, init, &format!("{name}.conv1"), ConvSpec::same(3, c, c)),
            conv2: Conv2d::new(store, init, &format!("{name}.conv2"), ConvSpec::same(3, c, c)),
            conv3: Conv2d::with_gain(store, init, &format!("{name}.conv3"), ConvSpec::same(3, c, n), 0.5),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor) -> Result<(CurveParams, EstimatorCache)> {
        let h1 = self.conv1.forward(ps, x)?;
        let a1 = relu_fwd(&h1);
        let h2 = self.conv2.forward(ps, &a1)?;
        let a2 = relu_fwd(&h2);
        let out = sigmoid_fwd(&self.conv3.forward(ps, &a2)?);
        Ok((
            CurveParams::new(out.clone())?,
            EstimatorCache {
                x: x.clone(),
                h1,
                a1,
                h2,
                a2,
                out,
            },
        ))
    }

    pub fn backward(&self, ps: &ParamStore, cache: &EstimatorCache, da: &Tensor, grads: &mut Grads) -> Result<Tensor> {
        let dz = sigmoid_bwd(&cache.out, da);
        let da2 = self.conv3.backward(ps, &cache.a2, &dz, grads)?;
        let da1 = self.conv2.backward(ps, &cache.a1, &relu_bwd(&cache.h2, &da2), grads)?;
        self.conv1.backward(ps, &cache.x, &relu_bwd(&cache.h1, &da1), grads)
    }
}

pub const PPM_BINS: [usize; 4] = [1, 2, 3, 6];

/// Pyramid pooling: mean-pool to b×b for each bin size, 1×1 conv to C/4
/// with ReLU, upsample back, concatenate with the input and fuse with a
/// reflect-padded 3×3 conv to C channels.
#[derive(Debug, Clone)]
pub struct Ppm {
    pub branches: Vec<(usize, Conv2d)>,
    pub fuse: Conv2d,
    branch_c: usize,
}

#[derive(Debug, Clone)]
struct BranchCache {
    pooled: Tensor,
    z: Tensor,
}

#[derive(Debug, Clone)]
pub struct PpmCache {
    h: usize,
    w: usize,
    branches: Vec<BranchCache>,
    cat: Tensor,
}

impl Ppm {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, c: usize) -> Self {
        let branch_c = (c / 4).max(1);
        let branches = PPM_BINS
            .iter()
            .map(|&b| {
                (
                    b,
                    Conv2d::new(store, init, &format!("{name}.branch{b}"), ConvSpec::same(1, c, branch_c)),
                )
            })
            .collect();
        let fuse = Conv2d::new(
            store,
            init,
            &format!("{name}.fuse"),
            ConvSpec::same(3, c + PPM_BINS.len() * branch_c, c).with_padding(Padding::Reflect),
        );
        Self {
            branches,
            fuse,
            branch_c,
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor) -> Result<(Tensor, PpmCache)> {
        let (h, w) = (x.h(), x.w());
        let mut caches = Vec::with_capacity(self.branches.len());
        let mut ups = Vec::with_capacity(self.branches.len());
        for (bins, conv) in &self.branches {
            let pooled = adaptive_avg_pool_fwd(x, *bins)?;
            let z = conv.forward(ps, &pooled)?;
            ups.push(bilinear_fwd(&relu_fwd(&z), h, w));
            caches.push(BranchCache { pooled, z });
        }
        let mut parts = vec![x];
        parts.extend(ups.iter());
        let cat = Tensor::concat_channels(&parts)?;
        let y = self.fuse.forward(ps, &cat)?;
        Ok((
            y,
            PpmCache {
                h,
                w,
                branches: caches,
                cat,
            },
        ))
    }

    pub fn backward(&self, ps: &ParamStore, cache: &PpmCache, dy: &Tensor, grads: &mut Grads) -> Result<Tensor> {
        let dcat = self.fuse.backward(ps, &cache.cat, dy, grads)?;
        let c = dcat.c() - self.branches.len() * self.branch_c;
        let mut sizes = vec![c];
        sizes.extend(std::iter::repeat_n(self.branch_c, self.branches.len()));
        let mut parts = dcat.split_channels(&sizes).into_iter();
        let mut dx = parts.next().expect("input slice");
        for (((bins, conv), bc), dup) in self.branches.iter().zip(&cache.branches).zip(parts) {
            let dr = bilinear_bwd(&dup, *bins, *bins);
            let dz = relu_bwd(&bc.z, &dr);
            let dpooled = conv.backward(ps, &bc.pooled, &dz, grads)?;
            dx.add_assign(&adaptive_avg_pool_bwd(&dpooled, cache.h, cache.w));
        }
        Ok(dx)
    }
}

/// Predicts per-pixel d×d filters for every channel of the decoder
/// features from encoder features: three 3×3 convs with ReLU, then a
/// 1×1 expansion to C·d² channels.
#[derive(Debug, Clone)]
pub struct FascHead {
    pub convs: [Conv2d; 3],
    pub expand: Conv2d,
    pub d: usize,
}

#[derive(Debug, Clone)]
pub struct FascCache {
    inputs: [Tensor; 4],
    pre: [Tensor; 3],
}

impl FascHead {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, c_in: usize, c_out: usize, d: usize) -> Self {
        let convs = [0, 1, 2].map(|i| Conv2d::new(store, init, &format!("{name}.conv{}", i + 1), ConvSpec::same(3, c_in, c_in)));
        let expand = Conv2d::with_gain(
            store,
            init,
            &format!("{name}.expand"),
            ConvSpec::same(1, c_in, c_out * d * d),
            0.1,
        );
        Self { convs, expand, d }
    }

    pub fn forward(&self, ps: &ParamStore, e: &Tensor) -> Result<(FilterBank, FascCache)> {
        let mut cur = e.clone();
        let mut inputs = Vec::with_capacity(4);
        let mut pre = Vec::with_capacity(3);
        for conv in &self.convs {
            let h = conv.forward(ps, &cur)?;
            inputs.push(cur);
            cur = relu_fwd(&h);
            pre.push(h);
        }
        let k = self.expand.forward(ps, &cur)?;
        inputs.push(cur);
        let bank = FilterBank::new(k, self.d)?;
        Ok((
            bank,
            FascCache {
                inputs: inputs.try_into().expect("four cached inputs"),
                pre: pre.try_into().expect("three cached activations"),
            },
        ))
    }

    pub fn backward(&self, ps: &ParamStore, cache: &FascCache, dk: &Tensor, grads: &mut Grads) -> Result<Tensor> {
        let mut g = self.expand.backward(ps, &cache.inputs[3], dk, grads)?;
        for i in (0..3).rev() {
            let dh = relu_bwd(&cache.pre[i], &g);
            g = self.convs[i].backward(ps, &cache.inputs[i], &dh, grads)?;
        }
        Ok(g)
    }
}
