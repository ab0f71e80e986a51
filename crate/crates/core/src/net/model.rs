//! Network assembly. Encoder scale `k` runs a residual block, a residual
//! downsample, PPM and CurveNLU; the decoder walks back up, merging the
//! encoder feature of each scale through FASC/FAC (or concatenation),
//! then two residual blocks and a residual upsample.

use super::{LedNetConfig, SkipMode, SCALES};
use crate::error::{Error, Result};
use crate::kernels::conv::ConvSpec;
use crate::kernels::curve::{curve_nlu_bwd, curve_nlu_fwd, CurveParams};
use crate::kernels::fac::{fac_bwd, fac_fwd, FilterBank};
use crate::kernels::layers::{
    Conv2d, CurveEstimator, DownCache, EstimatorCache, FascCache, FascHead, Ppm, PpmCache, ResidualBlock,
    ResidualCache, ResidualDownsample, ResidualUpsample, UpCache,
};
use crate::kernels::params::{Grads, Initializer, ParamStore};
use crate::kernels::Tensor;

#[derive(Debug, Clone)]
struct EncoderBlock {
    res: ResidualBlock,
    down: ResidualDownsample,
    ppm: Option<Ppm>,
    curve: Option<CurveEstimator>,
}

#[derive(Debug, Clone)]
struct EncoderCache {
    res: ResidualCache,
    down: DownCache,
    ppm: Option<PpmCache>,
    curve: Option<CurveCache>,
}

#[derive(Debug, Clone)]
struct CurveCache {
    f: Tensor,
    a: CurveParams,
    est: EstimatorCache,
}

#[derive(Debug, Clone)]
enum Skip {
    Fasc(FascHead),
    Concat(Conv2d),
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
enum SkipCache {
    Fasc { d: Tensor, bank: FilterBank, head: FascCache },
    Concat { cat: Tensor, dc: usize },
}

#[derive(Debug, Clone)]
struct DecoderBlock {
    skip: Skip,
    res1: ResidualBlock,
    res2: ResidualBlock,
    up: ResidualUpsample,
}

#[derive(Debug, Clone)]
struct DecoderCache {
    skip: SkipCache,
    res1: ResidualCache,
    res2: ResidualCache,
    up: UpCache,
}

#[derive(Debug, Clone)]
pub struct LedNet {
    cfg: LedNetConfig,
    stem: Conv2d,
    encoders: Vec<EncoderBlock>,
    enh_head: Conv2d,
    /// Ordered from the coarsest scale to the finest.
    decoders: Vec<DecoderBlock>,
    out: Conv2d,
}

#[derive(Debug, Clone)]
struct NetCache {
    x: Tensor,
    encoders: Vec<EncoderCache>,
    decoders: Vec<DecoderCache>,
    dec_out: Tensor,
}

/// Everything a forward pass produces; the private cache feeds `backward`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Restored image, same shape as the input.
    pub output: Tensor,
    /// Intermediate enhanced image at 1/8 resolution.
    pub enhanced: Tensor,
    /// Encoder output per scale, finest first.
    pub features: Vec<Tensor>,
    /// Curve parameter maps per scale, `None` when CurveNLU is off.
    pub curve_maps: Vec<Option<Tensor>>,
    cache: NetCache,
}

impl LedNet {
    /// Registers all parameters in `store` with seeded He initialization.
    pub fn new(cfg: &LedNetConfig, store: &mut ParamStore, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init = Initializer::new(seed);
        let c0 = cfg.channels(1);
        let stem = Conv2d::new(store, &mut init, "stem", ConvSpec::same(3, 3, c0));
        let mut encoders = Vec::with_capacity(SCALES);
        for k in 1..=SCALES {
            let (cin, c) = (cfg.channels(k - 1).max(c0), cfg.channels(k));
            let name = format!("enc{k}");
            encoders.push(EncoderBlock {
                res: ResidualBlock::new(store, &mut init, &format!("{name}.res"), cin),
                down: ResidualDownsample::new(store, &mut init, &format!("{name}.down"), cin, c),
                ppm: cfg.use_ppm.then(|| Ppm::new(store, &mut init, &format!("{name}.ppm"), c)),
                curve: cfg
                    .use_curve_nlu
                    .then(|| CurveEstimator::new(store, &mut init, &format!("{name}.curve"), c, cfg.curve_n)),
            });
        }
        let enh_head = Conv2d::new(store, &mut init, "enh_head", ConvSpec::same(3, cfg.channels(SCALES), 3));
        let mut decoders = Vec::with_capacity(SCALES);
        for k in (1..=SCALES).rev() {
            let c = cfg.channels(k);
            let name = format!("dec{k}");
            let skip = match cfg.skip_mode {
                SkipMode::Fasc => {
                    let head = FascHead::new(store, &mut init, &format!("{name}.fasc"), c, c, cfg.fac_d);
                    // Start every predicted filter near the identity.
                    let d2 = cfg.fac_d * cfg.fac_d;
                    let bias = store.get_mut(head.expand.bias);
                    for ch in 0..c {
                        bias[ch * d2 + d2 / 2] = 1.0;
                    }
                    Skip::Fasc(head)
                }
                SkipMode::Concat => Skip::Concat(Conv2d::new(
                    store,
                    &mut init,
                    &format!("{name}.concat"),
                    ConvSpec::same(1, 2 * c, c),
                )),
            };
            decoders.push(DecoderBlock {
                skip,
                res1: ResidualBlock::new(store, &mut init, &format!("{name}.res1"), c),
                res2: ResidualBlock::new(store, &mut init, &format!("{name}.res2"), c),
                up: ResidualUpsample::new(store, &mut init, &format!("{name}.up"), c, cfg.channels(k - 1).max(c0)),
            });
        }
        // zero output conv: the untrained net returns its input
        let out = Conv2d::with_gain(store, &mut init, "out", ConvSpec::same(3, c0, 3), 0.0);
        Ok(Self {
            cfg: cfg.clone(),
            stem,
            encoders,
            enh_head,
            decoders,
            out,
        })
    }

    pub fn config(&self) -> &LedNetConfig {
        &self.cfg
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor) -> Result<ForwardTrace> {
        if !x.h().is_multiple_of(8) || !x.w().is_multiple_of(8) || x.h() == 0 || x.w() == 0 {
            return Err(Error::shape(format!(
                "input {}x{} must have sides divisible by 8",
                x.h(),
                x.w()
            )));
        }
        if x.c() != 3 {
            return Err(Error::shape(format!("input must have 3 channels, got {}", x.c())));
        }
        let n = self.cfg.curve_n;
        let mut cur = self.stem.forward(ps, x)?;
        let mut enc_caches = Vec::with_capacity(SCALES);
        let mut features = Vec::with_capacity(SCALES);
        let mut curve_maps = Vec::with_capacity(SCALES);
        for enc in &self.encoders {
            let (r, res) = enc.res.forward(ps, &cur)?;
            let (mut f, down) = enc.down.forward(ps, &r)?;
            let ppm = match &enc.ppm {
                Some(p) => {
                    let (y, c) = p.forward(ps, &f)?;
                    f = y;
                    Some(c)
                }
                None => None,
            };
            let curve = match &enc.curve {
                Some(est_layer) => {
                    let (a, est) = est_layer.forward(ps, &f)?;
                    let e = curve_nlu_fwd(&f, &a, n)?;
                    curve_maps.push(Some(a.tensor().clone()));
                    Some(CurveCache {
                        f: std::mem::replace(&mut f, e),
                        a,
                        est,
                    })
                }
                None => {
                    curve_maps.push(None);
                    None
                }
            };
            features.push(f.clone());
            enc_caches.push(EncoderCache { res, down, ppm, curve });
            cur = f;
        }
        let enhanced = self.enh_head.forward(ps, &cur)?;

        let mut dec_caches = Vec::with_capacity(SCALES);
        for (i, dec) in self.decoders.iter().enumerate() {
            let e = &features[SCALES - 1 - i];
            let (merged, skip) = match &dec.skip {
                Skip::Fasc(head) => {
                    let (bank, hc) = head.forward(ps, e)?;
                    let y = fac_fwd(&cur, &bank)?;
                    (
                        y,
                        SkipCache::Fasc {
                            d: std::mem::replace(&mut cur, Tensor::zeros(0, 0, 0)),
                            bank,
                            head: hc,
                        },
                    )
                }
                Skip::Concat(conv) => {
                    let cat = Tensor::concat_channels(&[&cur, e])?;
                    let y = conv.forward(ps, &cat)?;
                    (y, SkipCache::Concat { cat, dc: cur.c() })
                }
            };
            let (r1, res1) = dec.res1.forward(ps, &merged)?;
            let (r2, res2) = dec.res2.forward(ps, &r1)?;
            let (u, up) = dec.up.forward(ps, &r2)?;
            dec_caches.push(DecoderCache { skip, res1, res2, up });
            cur = u;
        }
        let output = self.out.forward(ps, &cur)?.add(x);
        Ok(ForwardTrace {
            output,
            enhanced,
            features,
            curve_maps,
            cache: NetCache {
                x: x.clone(),
                encoders: enc_caches,
                decoders: dec_caches,
                dec_out: cur,
            },
        })
    }

    /// Accumulates parameter gradients for upstream gradients on the
    /// restored output and on the 1/8-scale enhanced output.
    pub fn backward(
        &self,
        ps: &ParamStore,
        trace: &ForwardTrace,
        d_output: &Tensor,
        d_enhanced: &Tensor,
        grads: &mut Grads,
    ) -> Result<()> {
        d_output.expect_shape(&trace.output, "output gradient")?;
        d_enhanced.expect_shape(&trace.enhanced, "enhanced gradient")?;
        let cache = &trace.cache;
        let n = self.cfg.curve_n;
        let mut g = self.out.backward(ps, &cache.dec_out, d_output, grads)?;

        let mut d_feat: Vec<Tensor> = trace
            .features
            .iter()
            .map(|f| Tensor::zeros(f.h(), f.w(), f.c()))
            .collect();
        for (i, (dec, dc)) in self.decoders.iter().zip(&cache.decoders).enumerate().rev() {
            g = dec.up.backward(ps, &dc.up, &g, grads)?;
            g = dec.res2.backward(ps, &dc.res2, &g, grads)?;
            g = dec.res1.backward(ps, &dc.res1, &g, grads)?;
            let k = SCALES - 1 - i;
            g = match (&dec.skip, &dc.skip) {
                (Skip::Fasc(head), SkipCache::Fasc { d, bank, head: hc }) => {
                    let (dd, dk) = fac_bwd(d, bank, &g)?;
                    d_feat[k].add_assign(&head.backward(ps, hc, &dk, grads)?);
                    dd
                }
                (Skip::Concat(conv), SkipCache::Concat { cat, dc }) => {
                    let dcat = conv.backward(ps, cat, &g, grads)?;
                    let mut parts = dcat.split_channels(&[*dc, dcat.c() - dc]).into_iter();
                    let dd = parts.next().expect("decoder slice");
                    d_feat[k].add_assign(&parts.next().expect("encoder slice"));
                    dd
                }
                _ => unreachable!("skip cache matches its block"),
            };
        }
        let last = SCALES - 1;
        d_feat[last].add_assign(&g);
        d_feat[last].add_assign(&self.enh_head.backward(ps, &trace.features[last], d_enhanced, grads)?);

        let mut carry: Option<Tensor> = None;
        for (k, (enc, ec)) in self.encoders.iter().zip(&cache.encoders).enumerate().rev() {
            let mut g = std::mem::replace(&mut d_feat[k], Tensor::zeros(0, 0, 0));
            if let Some(c) = carry.take() {
                g.add_assign(&c);
            }
            if let (Some(est), Some(cc)) = (&enc.curve, &ec.curve) {
                let (mut df, da) = curve_nlu_bwd(&cc.f, &cc.a, n, &g)?;
                df.add_assign(&est.backward(ps, &cc.est, &da, grads)?);
                g = df;
            }
            if let (Some(ppm), Some(pc)) = (&enc.ppm, &ec.ppm) {
                g = ppm.backward(ps, pc, &g, grads)?;
            }
            g = enc.down.backward(ps, &ec.down, &g, grads)?;
            g = enc.res.backward(ps, &ec.res, &g, grads)?;
            carry = Some(g);
        }
        self.stem
            .backward(ps, &cache.x, &carry.expect("at least one encoder"), grads)?;
        Ok(())
    }
}
