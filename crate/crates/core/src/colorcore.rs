//! Color-space and camera-response math shared by the synthesis stages.
//!
//! The camera response is the pure power law `x^2.2`, not the piecewise
//! sRGB transfer curve. CIE L* uses the same linearization, the sRGB
//! primaries and a D65 white point.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};

/// Exponent of the gamma camera response.
pub const CRF_GAMMA: f32 = 2.2;

/// Default L* threshold above which a pixel counts as saturated.
pub const DEFAULT_SATURATION_DELTA: f32 = 98.0;

// Y row of the linear sRGB -> XYZ (D65) matrix.
const LUMA_R: f64 = 0.212_672_9;
const LUMA_G: f64 = 0.715_152_2;
const LUMA_B: f64 = 0.072_175_0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Srgb,
    Linear,
}

impl Domain {
    fn name(self) -> &'static str {
        match self {
            Domain::Srgb => "sRGB",
            Domain::Linear => "linear",
        }
    }
}

/// Interleaved float raster, row-major with channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageF {
    height: usize,
    width: usize,
    channels: usize,
    domain: Domain,
    data: Vec<f32>,
}

impl ImageF {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        domain: Domain,
        data: Vec<f32>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "image must be non-empty, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::shape(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "buffer holds {} values, {height}x{width}x{channels} needs {}",
                data.len(),
                height * width * channels
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            domain,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, domain: Domain, value: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            domain,
            vec![value; height * width * channels],
        )
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        domain: Domain,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, domain, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn same_shape(&self, other: &ImageF) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub(crate) fn with_data(&self, domain: Domain, data: Vec<f32>) -> ImageF {
        debug_assert_eq!(data.len(), self.data.len());
        ImageF {
            height: self.height,
            width: self.width,
            channels: self.channels,
            domain,
            data,
        }
    }

    pub(crate) fn expect_domain(&self, domain: Domain) -> Result<()> {
        if self.domain != domain {
            return Err(Error::Domain {
                expected: domain.name(),
                actual: self.domain.name(),
            });
        }
        Ok(())
    }

    /// Checks the sRGB range contract.
    pub fn check_srgb_range(&self) -> Result<()> {
        self.expect_domain(Domain::Srgb)?;
        if let Some(v) = self.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("sRGB value {v} outside [0,1]")));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

/// Per-pixel flag for L* above the saturation threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaturationMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl SaturationMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "mask buffer holds {} values, expected {}",
                data.len(),
                height * width
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Inverse camera response `x^2.2`.
pub fn srgb_to_linear(img: &ImageF) -> Result<ImageF> {
    img.expect_domain(Domain::Srgb)?;
    let data = img.data.iter().map(|&v| v.max(0.0).powf(CRF_GAMMA)).collect();
    Ok(img.with_data(Domain::Linear, data))
}

/// Camera response: clamp to [0,1], then `x^(1/2.2)`.
pub fn linear_to_srgb(img: &ImageF) -> Result<ImageF> {
    img.expect_domain(Domain::Linear)?;
    let inv = 1.0 / CRF_GAMMA;
    let data = img
        .data
        .iter()
        .map(|&v| v.clamp(0.0, 1.0).powf(inv))
        .collect();
    Ok(img.with_data(Domain::Srgb, data))
}

#[inline]
fn lightness_from_y(y: f64) -> f64 {
    const EPS: f64 = 216.0 / 24389.0;
    const KAPPA: f64 = 24389.0 / 27.0;
    if y > EPS {
        116.0 * y.cbrt() - 16.0
    } else {
        KAPPA * y
    }
}

/// CIE L* of a single sRGB pixel.
#[inline]
pub fn pixel_lightness(r: f32, g: f32, b: f32) -> f64 {
    let lin = |v: f32| (v.clamp(0.0, 1.0) as f64).powf(CRF_GAMMA as f64);
    let y = LUMA_R * lin(r) + LUMA_G * lin(g) + LUMA_B * lin(b);
    lightness_from_y(y).clamp(0.0, 100.0)
}

/// CIE L* channel (0..=100) of a 3-channel sRGB image, row-major.
pub fn lab_lightness(img: &ImageF) -> Result<Vec<f32>> {
    img.expect_domain(Domain::Srgb)?;
    if img.channels != 3 {
        return Err(Error::shape(format!(
            "lightness needs 3 channels, got {}",
            img.channels
        )));
    }
    Ok(img
        .data
        .chunks_exact(3)
        .map(|p| pixel_lightness(p[0], p[1], p[2]) as f32)
        .collect())
}

pub fn saturation_mask(img: &ImageF, delta: f32) -> Result<SaturationMask> {
    let l = lab_lightness(img)?;
    let data = l.into_iter().map(|v| v > delta).collect();
    SaturationMask::new(img.height, img.width, data)
}

/// Mean Rec.709 luma of the stored (gamma-encoded) values.
pub fn mean_luminance(img: &ImageF) -> f64 {
    if img.channels == 1 {
        return img.mean();
    }
    let sum: f64 = img
        .data
        .chunks_exact(3)
        .map(|p| LUMA_R * p[0] as f64 + LUMA_G * p[1] as f64 + LUMA_B * p[2] as f64)
        .sum();
    sum / (img.height * img.width) as f64
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageF> {
    let path = path.as_ref();
    let dynimg = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (channels, raw) = match dynimg {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        other => (3, other.to_rgb8().into_raw()),
    };
    let (w, h) = image::image_dimensions(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let data = raw.into_iter().map(|b| b as f32 / 255.0).collect();
    ImageF::new(h as usize, w as usize, channels, Domain::Srgb, data)
}

pub fn to_u8(img: &ImageF) -> Vec<u8> {
    img.data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

pub fn save_image(path: impl AsRef<Path>, img: &ImageF) -> Result<()> {
    let path = path.as_ref();
    img.check_srgb_range()?;
    let (w, h) = (img.width as u32, img.height as u32);
    let bytes = to_u8(img);
    let res = if img.channels == 3 {
        ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes)
            .expect("buffer length checked by ImageF")
            .save_with_format(path, image::ImageFormat::Png)
    } else {
        ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes)
            .expect("buffer length checked by ImageF")
            .save_with_format(path, image::ImageFormat::Png)
    };
    res.map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Source coordinate and blend weight for align-corners bilinear sampling.
#[inline]
pub(crate) fn bilinear_coord(i: usize, out_len: usize, in_len: usize) -> (usize, usize, f64) {
    if out_len <= 1 || in_len <= 1 {
        return (0, 0, 0.0);
    }
    let src = i as f64 * (in_len - 1) as f64 / (out_len - 1) as f64;
    let i0 = (src.floor() as usize).min(in_len - 1);
    let i1 = (i0 + 1).min(in_len - 1);
    (i0, i1, src - i0 as f64)
}

/// Bilinear resampling with corner pixel centers aligned.
pub fn resize_bilinear(img: &ImageF, new_h: usize, new_w: usize) -> Result<ImageF> {
    if new_h == 0 || new_w == 0 {
        return Err(Error::shape("resize target must be non-empty"));
    }
    if new_h == img.height && new_w == img.width {
        return Ok(img.clone());
    }
    let c = img.channels;
    let mut data = Vec::with_capacity(new_h * new_w * c);
    for y in 0..new_h {
        let (y0, y1, fy) = bilinear_coord(y, new_h, img.height);
        for x in 0..new_w {
            let (x0, x1, fx) = bilinear_coord(x, new_w, img.width);
            for ch in 0..c {
                let a = img.get(y0, x0, ch) as f64;
                let b = img.get(y0, x1, ch) as f64;
                let cc = img.get(y1, x0, ch) as f64;
                let d = img.get(y1, x1, ch) as f64;
                let top = a + (b - a) * fx;
                let bot = cc + (d - cc) * fx;
                data.push((top + (bot - top) * fy) as f32);
            }
        }
    }
    ImageF::new(new_h, new_w, c, img.domain, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn srgb(h: usize, w: usize, v: f32) -> ImageF {
        ImageF::filled(h, w, 3, Domain::Srgb, v).unwrap()
    }

    #[test]
    fn gamma_fixed_points_and_half() {
        let img = ImageF::new(1, 3, 1, Domain::Srgb, vec![0.0, 1.0, 0.5]).unwrap();
        let lin = srgb_to_linear(&img).unwrap();
        assert_eq!(lin.data()[0], 0.0);
        assert_eq!(lin.data()[1], 1.0);
        // 0.5^2.2 = 0.217637640824031 (high-precision reference)
        assert_abs_diff_eq!(lin.data()[2], 0.217_637_64, epsilon = 1e-6);
    }

    #[test]
    fn gamma_round_trip() {
        let vals: Vec<f32> = (1..10).map(|i| i as f32 / 10.0).collect();
        let img = ImageF::new(1, 9, 1, Domain::Srgb, vals.clone()).unwrap();
        let back = linear_to_srgb(&srgb_to_linear(&img).unwrap()).unwrap();
        for (a, b) in vals.iter().zip(back.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn linear_to_srgb_inverse_and_clamp() {
        let img = ImageF::new(1, 3, 1, Domain::Linear, vec![1.0, 0.217_637_64, 1.196]).unwrap();
        let out = linear_to_srgb(&img).unwrap();
        assert_eq!(out.data()[0], 1.0);
        assert_abs_diff_eq!(out.data()[1], 0.5, epsilon = 1e-6);
        assert_eq!(out.data()[2], 1.0);
    }

    #[test]
    fn wrong_domain_is_rejected() {
        let img = srgb(2, 2, 0.5);
        assert!(matches!(linear_to_srgb(&img), Err(Error::Domain { .. })));
        let lin = srgb_to_linear(&img).unwrap();
        assert!(matches!(srgb_to_linear(&lin), Err(Error::Domain { .. })));
        assert!(lab_lightness(&lin).is_err());
    }

    #[test]
    fn lightness_white_black_gray() {
        let l = lab_lightness(&srgb(1, 1, 1.0)).unwrap();
        assert_abs_diff_eq!(l[0], 100.0, epsilon = 1e-3);
        assert_eq!(lab_lightness(&srgb(1, 1, 0.0)).unwrap()[0], 0.0);
        // independent evaluation: Y = 0.5^2.2, L* = 116 Y^(1/3) - 16
        let y: f64 = 0.5f64.powf(2.2);
        let expected = 116.0 * y.powf(1.0 / 3.0) - 16.0;
        let got = lab_lightness(&srgb(1, 1, 0.5)).unwrap()[0] as f64;
        assert!((got - expected).abs() < 1e-3, "{got} vs {expected}");
    }

    #[test]
    fn lightness_needs_three_channels() {
        let img = ImageF::filled(2, 2, 1, Domain::Srgb, 0.5).unwrap();
        assert!(matches!(lab_lightness(&img), Err(Error::Shape(_))));
    }

    #[test]
    fn saturation_mask_extremes_and_dot() {
        assert_eq!(saturation_mask(&srgb(4, 4, 1.0), 98.0).unwrap().count(), 16);
        assert_eq!(saturation_mask(&srgb(4, 4, 0.0), 98.0).unwrap().count(), 0);

        let mut img = srgb(5, 5, 0.5);
        for c in 0..3 {
            img.set(2, 3, c, 1.0);
        }
        let mask = saturation_mask(&img, 98.0).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(mask.get(y, x), (y, x) == (2, 3));
            }
        }
    }

    #[test]
    fn resize_identity_constant_and_midpoint() {
        let img = ImageF::from_fn(3, 4, 3, Domain::Srgb, |y, x, c| (y * 12 + x * 3 + c) as f32 / 40.0).unwrap();
        assert_eq!(resize_bilinear(&img, 3, 4).unwrap(), img);

        let flat = srgb(2, 2, 0.3);
        let big = resize_bilinear(&flat, 7, 5).unwrap();
        assert!(big.data().iter().all(|&v| (v - 0.3).abs() < 1e-7));

        let grad = ImageF::new(1, 2, 1, Domain::Srgb, vec![0.2, 0.8]).unwrap();
        let mid = resize_bilinear(&grad, 1, 3).unwrap();
        assert_abs_diff_eq!(mid.data()[1], 0.5, epsilon = 1e-7);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = ImageF::from_fn(4, 5, 3, Domain::Srgb, |y, x, c| ((y + x + c) % 4) as f32 / 3.0).unwrap();
        save_image(&path, &img).unwrap();
        let back = load_image(&path).unwrap();
        assert!(back.same_shape(&img));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }
}
