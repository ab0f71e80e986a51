//! Checkpoint directory: one `TNSR` file per parameter and per Adam
//! moment, plus `manifest.txt` holding the architecture hash and step.

use std::fs;
use std::path::Path;

use super::LedNetConfig;
use crate::error::{Error, Result};
use crate::kernels::ParamStore;
use crate::tensorio::{read_tensor, write_tensor};

pub const MANIFEST: &str = "manifest.txt";
const FORMAT: &str = "lednet-checkpoint-1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointInfo {
    pub step: u64,
    pub arch_hash: u64,
    pub params: Vec<String>,
}

impl CheckpointInfo {
    fn to_text(&self) -> String {
        let mut s = format!(
            "format = {FORMAT}\narch_hash = {:016x}\nstep = {}\n",
            self.arch_hash, self.step
        );
        for p in &self.params {
            s.push_str(&format!("param = {p}\n"));
        }
        s
    }

    fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let (mut format, mut hash, mut step) = (None, None, None);
        let mut params = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed manifest line {line:?}")))?;
            let v = v.trim();
            match k.trim() {
                "format" => format = Some(v.to_string()),
                "arch_hash" => {
                    hash = Some(u64::from_str_radix(v, 16).map_err(|_| bad(format!("bad arch_hash {v:?}")))?)
                }
                "step" => step = Some(v.parse().map_err(|_| bad(format!("bad step {v:?}")))?),
                "param" => params.push(v.to_string()),
                other => return Err(bad(format!("unknown manifest key {other:?}"))),
            }
        }
        if format.as_deref() != Some(FORMAT) {
            return Err(bad(format!("not a {FORMAT} manifest")));
        }
        Ok(Self {
            step: step.ok_or_else(|| bad("manifest lacks step".into()))?,
            arch_hash: hash.ok_or_else(|| bad("manifest lacks arch_hash".into()))?,
            params,
        })
    }
}

pub fn save_checkpoint(dir: impl AsRef<Path>, store: &ParamStore, cfg: &LedNetConfig) -> Result<CheckpointInfo> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for p in store.params() {
        write_tensor(dir.join(format!("{}.tnsr", p.name)), &p.shape, &p.value)?;
        write_tensor(dir.join(format!("{}.adam_m.tnsr", p.name)), &p.shape, &p.m)?;
        write_tensor(dir.join(format!("{}.adam_v.tnsr", p.name)), &p.shape, &p.v)?;
    }
    let info = CheckpointInfo {
        step: store.step(),
        arch_hash: cfg.arch_hash(),
        params: store.params().iter().map(|p| p.name.clone()).collect(),
    };
    fs::write(dir.join(MANIFEST), info.to_text())?;
    Ok(info)
}

/// Loads values, moments and the step counter into a store built for `cfg`.
pub fn load_checkpoint(dir: impl AsRef<Path>, store: &mut ParamStore, cfg: &LedNetConfig) -> Result<CheckpointInfo> {
    let dir = dir.as_ref();
    let manifest = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", manifest.display())))?;
    let info = CheckpointInfo::parse(&text)?;
    if info.arch_hash != cfg.arch_hash() {
        return Err(Error::Checkpoint(format!(
            "checkpoint architecture {:016x} does not match config {:016x}",
            info.arch_hash,
            cfg.arch_hash()
        )));
    }
    if info.params.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} parameters, model has {}",
            info.params.len(),
            store.len()
        )));
    }
    for name in &info.params {
        let read = |suffix: &str| -> Result<Vec<f64>> {
            let (_, data) = read_tensor(dir.join(format!("{name}{suffix}.tnsr")))
                .map_err(|e| Error::Checkpoint(format!("parameter {name}: {e}")))?;
            Ok(data)
        };
        store.load(name, read("")?, Some((read(".adam_m")?, read(".adam_v")?)))?;
    }
    store.set_step(info.step);
    Ok(info)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{LedNet, SkipMode};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = LedNetConfig { base_channels: 4, ..Default::default() };
        let mut a = ParamStore::new();
        LedNet::new(&cfg, &mut a, 1).unwrap();
        a.set_step(17);
        save_checkpoint(dir.path(), &a, &cfg).unwrap();

        let mut b = ParamStore::new();
        LedNet::new(&cfg, &mut b, 2).unwrap();
        let info = load_checkpoint(dir.path(), &mut b, &cfg).unwrap();
        assert_eq!(info.step, 17);
        assert_eq!(b.step(), 17);
        for (pa, pb) in a.params().iter().zip(b.params()) {
            for (x, y) in pa.value.iter().zip(&pb.value) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }

    #[test]
    fn mismatched_architecture_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = LedNetConfig { base_channels: 4, ..Default::default() };
        let mut a = ParamStore::new();
        LedNet::new(&cfg, &mut a, 1).unwrap();
        save_checkpoint(dir.path(), &a, &cfg).unwrap();
        let other = LedNetConfig { skip_mode: SkipMode::Concat, ..cfg };
        let mut b = ParamStore::new();
        LedNet::new(&other, &mut b, 1).unwrap();
        assert!(matches!(load_checkpoint(dir.path(), &mut b, &other), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn missing_or_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = LedNetConfig { base_channels: 4, ..Default::default() };
        let mut a = ParamStore::new();
        LedNet::new(&cfg, &mut a, 1).unwrap();
        assert!(matches!(load_checkpoint(dir.path(), &mut a, &cfg), Err(Error::Checkpoint(_))));
        save_checkpoint(dir.path(), &a, &cfg).unwrap();
        fs::write(dir.path().join("stem.weight.tnsr"), b"garbage").unwrap();
        assert!(matches!(load_checkpoint(dir.path(), &mut a, &cfg), Err(Error::Checkpoint(_))));
    }
}
