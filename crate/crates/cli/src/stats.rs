//! Histogram of per-image mean luminance over a directory of PNGs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lednet_core::colorcore::{load_image, mean_luminance};
use lednet_core::{Error, Result};

pub const BINS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub counts: [usize; BINS],
}

impl Histogram {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut counts = [0; BINS];
        for v in values {
            counts[bin_of(v)] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Lowest bin holding the maximum count.
    pub fn modal_bin(&self) -> Option<usize> {
        let max = *self.counts.iter().max()?;
        (max > 0).then(|| self.counts.iter().position(|&c| c == max).expect("max exists"))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,lo,hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let (lo, hi) = bin_edges(i);
            let _ = writeln!(s, "{i},{lo:.5},{hi:.5},{c}");
        }
        s
    }

    /// One row per bin, bars scaled to `width` characters.
    pub fn to_ascii(&self, width: usize) -> String {
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1);
        let mut s = String::new();
        for (i, &c) in self.counts.iter().enumerate() {
            let (lo, hi) = bin_edges(i);
            let bar = (c * width).div_ceil(max);
            let _ = writeln!(s, "[{lo:.3}, {hi:.3}) {:<width$} {c}", "#".repeat(bar));
        }
        s
    }
}

pub fn bin_of(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * BINS as f64) as usize).min(BINS - 1)
}

fn bin_edges(i: usize) -> (f64, f64) {
    (i as f64 / BINS as f64, (i + 1) as f64 / BINS as f64)
}

/// PNG files directly inside `dir`, sorted by name.
pub fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::validation(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

pub fn histogram_of_dir(dir: &Path) -> Result<Histogram> {
    let files = png_files(dir)?;
    if files.is_empty() {
        return Err(Error::validation(format!("no PNG images in {}", dir.display())));
    }
    let values = files
        .iter()
        .map(|f| load_image(f).map(|img| mean_luminance(&img)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Histogram::from_values(values))
}

/// Histograms for `dir`, or for its `low_blur` and `gt` subdirectories
/// when it is a synthesized pair tree.
pub fn dataset_histograms(dir: &Path) -> Result<Vec<(String, Histogram)>> {
    let pair_dirs = ["low_blur", "gt"].map(|s| dir.join(s));
    if pair_dirs.iter().all(|d| d.is_dir()) {
        return ["low_blur", "gt"]
            .iter()
            .zip(&pair_dirs)
            .map(|(name, d)| Ok((name.to_string(), histogram_of_dir(d)?)))
            .collect();
    }
    Ok(vec![(
        dir.file_name().map_or("images".into(), |n| n.to_string_lossy().into_owned()),
        histogram_of_dir(dir)?,
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_edges_and_extremes() {
        assert_eq!(bin_of(0.0), 0);
        assert_eq!(bin_of(1.0), 31);
        assert_eq!(bin_of(0.5), 16);
        assert_eq!(bin_of(0.5 - 1e-9), 15);
        assert_eq!(bin_of(-3.0), 0);
    }

    #[test]
    fn modal_and_formats() {
        let h = Histogram::from_values([0.01, 0.02, 0.9]);
        assert_eq!(h.total(), 3);
        assert_eq!(h.modal_bin(), Some(0));
        let csv = h.to_csv();
        assert_eq!(csv.lines().count(), BINS + 1);
        assert!(csv.lines().nth(1).unwrap().ends_with(",2"));
        let chart = h.to_ascii(10);
        assert!(chart.lines().next().unwrap().contains("##########"));
        assert_eq!(Histogram::from_values([]).modal_bin(), None);
    }
}
