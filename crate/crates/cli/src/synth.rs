//! Dataset synthesis over a tree of sequence directories. Each sequence
//! is cut into non-overlapping windows of `blur.window` frames and every
//! window becomes one pair, seeded by (master seed, sequence id, window).

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use lednet_core::blursynth::{make_pair, FrameSequence, PairConfig};
use lednet_core::colorcore::{load_image, save_image};
use lednet_core::seed::{derive_seed, hash_str};
use lednet_core::{Error, Result};

use crate::stats::png_files;

/// Nominal rate of on-disk frame sequences.
pub const SOURCE_FPS: f64 = 240.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceReport {
    pub name: String,
    pub pairs: usize,
    /// Why the sequence produced nothing, if it failed.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SynthSummary {
    pub sequences: Vec<SequenceReport>,
}

impl SynthSummary {
    pub fn pairs(&self) -> usize {
        self.sequences.iter().map(|s| s.pairs).sum()
    }

    pub fn failed(&self) -> usize {
        self.sequences.iter().filter(|s| s.skipped.is_some()).count()
    }
}

/// Sequence directories under `input`, or `input` itself when it holds
/// the frames directly.
pub fn find_sequences(input: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(input)
        .map_err(|e| Error::validation(format!("cannot list {}: {e}", input.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut seqs: Vec<(String, PathBuf)> = dirs
        .into_iter()
        .map(|d| (d.file_name().expect("listed entry").to_string_lossy().into_owned(), d))
        .collect();
    if seqs.is_empty() && !png_files(input)?.is_empty() {
        let name = input
            .file_name()
            .map_or("sequence".into(), |n| n.to_string_lossy().into_owned());
        seqs.push((name, input.to_path_buf()));
    }
    if seqs.is_empty() {
        return Err(Error::validation(format!("no sequences found in {}", input.display())));
    }
    Ok(seqs)
}

pub fn pair_seed(master: u64, sequence: &str, window: usize) -> u64 {
    derive_seed(master, &[hash_str(sequence), window as u64])
}

fn synth_sequence(name: &str, dir: &Path, out: &Path, cfg: &PairConfig, seed: u64) -> Result<usize> {
    let files = png_files(dir)?;
    let window = cfg.blur.window;
    if files.len() < window {
        return Err(Error::InsufficientFrames {
            needed: window,
            got: files.len(),
        });
    }
    let mut written = 0;
    for (idx, chunk) in files.chunks_exact(window).enumerate() {
        let frames = chunk.iter().map(load_image).collect::<Result<Vec<_>>>()?;
        let seq = FrameSequence::new(frames, SOURCE_FPS)?;
        let pair_seed = pair_seed(seed, name, idx);
        let pair = make_pair(&seq, cfg, pair_seed)?;
        let stem = format!("{name}_{idx:04}");
        save_image(out.join("low_blur").join(format!("{stem}.png")), &pair.low_blur)?;
        save_image(out.join("gt").join(format!("{stem}.png")), &pair.gt)?;
        let mut meta = format!("sequence = {name}\nwindow_index = {idx}\n");
        meta.push_str(&pair.meta.to_text());
        fs::write(out.join("meta").join(format!("{stem}.txt")), meta)?;
        written += 1;
    }
    Ok(written)
}

/// Synthesizes every sequence in parallel; per-sequence failures are
/// reported, not propagated.
pub fn synth_dataset(input: &Path, out: &Path, cfg: &PairConfig, seed: u64) -> Result<SynthSummary> {
    cfg.validate()?;
    let seqs = find_sequences(input)?;
    for sub in ["low_blur", "gt", "meta"] {
        fs::create_dir_all(out.join(sub))?;
    }
    let sequences = seqs
        .par_iter()
        .map(|(name, dir)| {
            let result = synth_sequence(name, dir, out, cfg, seed);
            match result {
                Ok(pairs) => {
                    eprintln!("synth: {name}: {pairs} pair(s)");
                    SequenceReport {
                        name: name.clone(),
                        pairs,
                        skipped: None,
                    }
                }
                Err(e) => {
                    eprintln!("synth: {name}: skipped ({e})");
                    SequenceReport {
                        name: name.clone(),
                        pairs: 0,
                        skipped: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    Ok(SynthSummary { sequences })
}
