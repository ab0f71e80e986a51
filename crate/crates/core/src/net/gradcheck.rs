//! End-to-end gradient fixture: total loss against a 32-entry slice of
//! parameters drawn across the whole network, on a 16×16 input.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{compute_loss, NoPerceptual};
use super::model::LedNet;
use super::LedNetConfig;
use crate::error::Result;
use crate::kernels::gradcheck::{GradFixture, NETWORK_TOLERANCE};
use crate::kernels::{Grads, ParamId, ParamStore, Tensor};

pub const SLICE_LEN: usize = 32;
pub const SLICE_SIDE: usize = 16;

fn write_slice(store: &mut ParamStore, slice: &[(ParamId, usize)], values: &[f64]) {
    for (&(id, i), &v) in slice.iter().zip(values) {
        store.get_mut(id)[i] = v;
    }
}

pub fn network_slice_fixture(seed: u64) -> Result<GradFixture> {
    let cfg = LedNetConfig::default();
    let mut store = ParamStore::new();
    let net = LedNet::new(&cfg, &mut store, seed.wrapping_add(77))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51ce);
    // the output conv starts at zero, which would hide every inner gradient
    let out_w = store.id_of("out.weight").expect("output conv");
    for v in store.get_mut(out_w) {
        *v = rng.random_range(-0.2..0.2);
    }
    let n = SLICE_SIDE;
    let x = Tensor::from_fn(n, n, 3, |_, _, _| rng.random_range(0.0..0.5));
    let y = Tensor::from_fn(n, n, 3, |_, _, _| rng.random_range(0.2..1.0));

    let ids: Vec<ParamId> = store.ids().collect();
    let mut slice = Vec::with_capacity(SLICE_LEN);
    while slice.len() < SLICE_LEN {
        let id = ids[rng.random_range(0..ids.len())];
        let entry = (id, rng.random_range(0..store.get(id).len()));
        if !slice.contains(&entry) {
            slice.push(entry);
        }
    }
    let values: Vec<f64> = slice.iter().map(|&(id, i)| store.get(id)[i]).collect();

    let shared = Arc::new((net, store, x, y, slice, cfg));
    let loss = {
        let s = shared.clone();
        move |v: &[Vec<f64>]| -> Result<f64> {
            let (net, store, x, y, slice, cfg) = &*s;
            let mut ps = store.clone();
            write_slice(&mut ps, slice, &v[0]);
            let trace = net.forward(&ps, x)?;
            Ok(compute_loss(&trace, y, cfg, &NoPerceptual)?.parts.total)
        }
    };
    let grad = move |v: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let (net, store, x, y, slice, cfg) = &*shared;
        let mut ps = store.clone();
        write_slice(&mut ps, slice, &v[0]);
        let trace = net.forward(&ps, x)?;
        let eval = compute_loss(&trace, y, cfg, &NoPerceptual)?;
        let mut grads = Grads::zeros_like(&ps);
        net.backward(&ps, &trace, &eval.d_output, &eval.d_enhanced, &mut grads)?;
        Ok(vec![slice.iter().map(|&(id, i)| grads.get(id)[i]).collect()])
    };
    Ok(
        GradFixture::new("lednet_slice", seed, vec![("params".into(), values)], loss, grad)
            .with_tolerance(NETWORK_TOLERANCE),
    )
}
