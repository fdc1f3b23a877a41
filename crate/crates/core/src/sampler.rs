//! Spatially-adaptive importance-weighted Monte Carlo estimation of the
//! posterior `p(G(s) | V(s))` and its Bayesian least-squares reconstruction.
//!
//! For each pixel of interest `s0`, candidates `s_k` are drawn uniformly from a
//! square search window. A candidate joins the sample set when a fresh uniform
//! variate falls below its acceptance probability, the Rician likelihood of its
//! neighbourhood given the neighbourhood of `s0`, normalized so that an exact
//! duplicate scores 1. The reconstruction is the mean of the resulting
//! acceptance-weighted histogram.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rayon::prelude::*;

use crate::erc_profile::ScaleMap;
use crate::error::{Error, Result};
use crate::image::{mirror_index, Image};
use crate::rician::log_pdf;
use crate::rng::pixel_rng;

/// Intensity floor substituted for non-positive pixels inside the likelihood.
pub const INTENSITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    /// Half-width of the candidate search window.
    pub search_radius: usize,
    /// Half-width of the compared neighbourhoods.
    pub patch_radius: usize,
    /// Accepted candidates to collect before stopping.
    pub target_accepted: usize,
    /// Candidate draw budget per pixel.
    pub max_draws: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            search_radius: 7,
            patch_radius: 2,
            target_accepted: 32,
            max_draws: 256,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_radius < 1 {
            return Err(Error::invalid("patch_radius must be >= 1"));
        }
        if self.search_radius < self.patch_radius {
            return Err(Error::invalid(format!(
                "search_radius ({}) must be >= patch_radius ({})",
                self.search_radius, self.patch_radius
            )));
        }
        if self.target_accepted < 1 {
            return Err(Error::invalid("target_accepted must be >= 1"));
        }
        if self.max_draws < self.target_accepted {
            return Err(Error::invalid(format!(
                "max_draws ({}) must be >= target_accepted ({})",
                self.max_draws, self.target_accepted
            )));
        }
        Ok(())
    }

    pub fn patch_len(&self) -> usize {
        let side = 2 * self.patch_radius + 1;
        side * side
    }
}

/// Accepted intensities with their acceptance weights. The pixel of interest
/// is always the first entry, with weight 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSampleSet {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Accepted candidates, not counting the pixel of interest.
    pub accepted_count: usize,
    /// Candidates drawn.
    pub draws: usize,
}

/// Row-major `(2r+1)^2` neighbourhood of `s`, mirrored at the image border.
pub fn extract_patch(image: &Image, s: (usize, usize), patch_radius: usize) -> Result<Vec<f64>> {
    if !image.contains(s.0, s.1) {
        return Err(Error::invalid(format!(
            "pixel ({}, {}) is outside the {}x{} image",
            s.0,
            s.1,
            image.rows(),
            image.cols()
        )));
    }
    let r = patch_radius as isize;
    let (row, col) = (s.0 as isize, s.1 as isize);
    let mut out = Vec::with_capacity((2 * patch_radius + 1).pow(2));
    for dr in -r..=r {
        for dc in -r..=r {
            out.push(image.get_mirrored(row + dr, col + dc));
        }
    }
    Ok(out)
}

/// `ln alpha(s_k | s0)`: the patch log-likelihood of `patch_k` under Rician
/// laws centred on `patch_0` with common scale `phi0`, minus its value for an
/// exact duplicate, clamped to `<= 0`.
pub fn log_acceptance(patch_k: &[f64], patch_0: &[f64], phi0: f64) -> Result<f64> {
    if patch_k.len() != patch_0.len() {
        return Err(Error::invalid(format!(
            "patch lengths differ: {} vs {}",
            patch_k.len(),
            patch_0.len()
        )));
    }
    if !(phi0 > 0.0 && phi0.is_finite()) {
        return Err(Error::invalid(format!("phi0 must be positive, got {phi0}")));
    }
    let reference = Reference::new(patch_0, phi0);
    Ok(reference.log_acceptance(patch_k.iter().copied()))
}

/// Floored centre patch with its duplicate-normalizing log-densities.
struct Reference {
    nu: Vec<f64>,
    lambda: Vec<f64>,
    /// `slack[j]` bounds the total contribution of pixels `j..` from above.
    slack: Vec<f64>,
    phi: f64,
}

/// Absorbs rounding in the per-pixel bounds so early rejection stays exact.
const BOUND_MARGIN: f64 = 1e-9;

impl Reference {
    fn new(patch_0: &[f64], phi: f64) -> Self {
        let nu: Vec<f64> = patch_0.iter().map(|&v| v.max(INTENSITY_FLOOR)).collect();
        let lambda = nu.iter().map(|&v| log_pdf(v, v, phi)).collect();
        let mut slack = vec![0.0; nu.len() + 1];
        for (j, &v) in nu.iter().enumerate().rev() {
            slack[j] = slack[j + 1] + term_bound(v, phi);
        }
        Self {
            nu,
            lambda,
            slack,
            phi,
        }
    }

    #[inline]
    fn term(&self, j: usize, x: f64) -> f64 {
        log_pdf(x.max(INTENSITY_FLOOR), self.nu[j], self.phi) - self.lambda[j]
    }

    #[inline]
    fn log_acceptance(&self, patch_k: impl Iterator<Item = f64>) -> f64 {
        let mut sum = 0.0;
        for (j, x) in patch_k.enumerate() {
            sum += self.term(j, x);
        }
        sum.min(0.0)
    }

    /// `ln alpha` when `u <= alpha`, otherwise `None`. Stops summing as soon
    /// as the remaining pixels cannot lift the total back above `ln u`.
    #[inline]
    fn accept(&self, patch_k: impl Iterator<Item = f64>, u: f64) -> Option<f64> {
        let threshold = u.ln() - BOUND_MARGIN;
        let mut sum = 0.0;
        for (j, x) in patch_k.enumerate() {
            sum += self.term(j, x);
            if sum + self.slack[j + 1] < threshold {
                return None;
            }
        }
        let log_alpha = sum.min(0.0);
        let alpha = log_alpha.exp();
        (alpha > 0.0 && u <= alpha).then_some(log_alpha)
    }
}

/// Upper bound on `ln f(x; nu, phi) - ln f(nu; nu, phi)` over all `x`. The
/// Rician density is unimodal with its mode above `nu`, so only `x >= nu`
/// can contribute positively; there the Bessel factor `e^{-z} I0(z)` is
/// decreasing, leaving `ln(x/nu) - (x-nu)^2 / (2 phi^2)`, maximized in
/// closed form.
fn term_bound(nu: f64, phi: f64) -> f64 {
    let x = 0.5 * (nu + (nu * nu + 4.0 * phi * phi).sqrt());
    let gap = x - nu;
    ((x / nu).ln() - gap * gap / (2.0 * phi * phi)).max(0.0) + BOUND_MARGIN
}

/// Image padded by mirror reflection so every patch is a plain slice lookup.
struct Padded {
    data: Vec<f64>,
    stride: usize,
    pad: usize,
}

impl Padded {
    fn new(image: &Image, pad: usize) -> Self {
        let (rows, cols) = image.dims();
        let stride = cols + 2 * pad;
        let mut data = Vec::with_capacity((rows + 2 * pad) * stride);
        for r in 0..rows + 2 * pad {
            let rr = mirror_index(r as isize - pad as isize, rows);
            for c in 0..stride {
                let cc = mirror_index(c as isize - pad as isize, cols);
                data.push(image.get(rr, cc));
            }
        }
        Self { data, stride, pad }
    }

    /// Patch of half-width `r <= pad` centred on in-image pixel `(row, col)`.
    #[inline]
    fn patch(&self, row: usize, col: usize, r: usize) -> impl Iterator<Item = f64> + '_ {
        let top = row + self.pad - r;
        let left = col + self.pad - r;
        let side = 2 * r + 1;
        (0..side).flat_map(move |i| {
            let start = (top + i) * self.stride + left;
            self.data[start..start + side].iter().copied()
        })
    }
}

/// Draws the weighted sample set for pixel `s0` from `rng`.
pub fn draw_samples<R: Rng + ?Sized>(
    image: &Image,
    s0: (usize, usize),
    scale_map: &ScaleMap,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<WeightedSampleSet> {
    cfg.validate()?;
    let (rows, cols) = image.dims();
    let (srows, scols) = scale_map.dims();
    image.ensure_same_dims(srows, scols, "scale map")?;
    if !image.contains(s0.0, s0.1) {
        return Err(Error::invalid(format!(
            "pixel ({}, {}) is outside the {rows}x{cols} image",
            s0.0, s0.1
        )));
    }
    let padded = Padded::new(image, cfg.patch_radius);
    Ok(draw_with(&padded, image, s0, scale_map, cfg, rng))
}

fn draw_with<R: Rng + ?Sized>(
    padded: &Padded,
    image: &Image,
    s0: (usize, usize),
    scale_map: &ScaleMap,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> WeightedSampleSet {
    let (rows, cols) = image.dims();
    let (row0, col0) = s0;
    let centre: Vec<f64> = padded.patch(row0, col0, cfg.patch_radius).collect();
    let reference = Reference::new(&centre, scale_map.get(row0, col0));

    let r_lo = row0.saturating_sub(cfg.search_radius);
    let r_hi = (row0 + cfg.search_radius).min(rows - 1);
    let c_lo = col0.saturating_sub(cfg.search_radius);
    let c_hi = (col0 + cfg.search_radius).min(cols - 1);

    let mut values = Vec::with_capacity(cfg.target_accepted + 1);
    let mut weights = Vec::with_capacity(cfg.target_accepted + 1);
    values.push(image.get(row0, col0));
    weights.push(1.0);

    let mut accepted = 0;
    let mut draws = 0;
    while accepted < cfg.target_accepted && draws < cfg.max_draws {
        draws += 1;
        let rk = rng.random_range(r_lo..=r_hi);
        let ck = rng.random_range(c_lo..=c_hi);
        let u: f64 = rng.random();
        if let Some(log_alpha) = reference.accept(padded.patch(rk, ck, cfg.patch_radius), u) {
            values.push(image.get(rk, ck));
            weights.push(log_alpha.exp());
            accepted += 1;
        }
    }
    WeightedSampleSet {
        values,
        weights,
        accepted_count: accepted,
        draws,
    }
}

/// Mean of the acceptance-weighted histogram, `sum a_j v_j / sum a_j`.
pub fn posterior_mean(samples: &WeightedSampleSet) -> Result<f64> {
    if samples.values.is_empty() || samples.values.len() != samples.weights.len() {
        return Err(Error::invalid(format!(
            "sample set needs matching non-empty value/weight lists, got {} and {}",
            samples.values.len(),
            samples.weights.len()
        )));
    }
    let (num, den) = samples
        .values
        .iter()
        .zip(&samples.weights)
        .fold((0.0, 0.0), |(num, den), (&v, &w)| (num + w * v, den + w));
    if den.is_nan() || den <= 0.0 {
        return Err(Error::invalid("sample weights sum to zero"));
    }
    Ok(num / den)
}

/// Progress callback: `(rows_done, rows_total)`.
pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

/// Noise-compensated reconstruction of `image`. Rows are processed in
/// parallel on the current rayon pool; every pixel uses its own stream
/// derived from `(cfg.seed, row, col)`, so the result does not depend on the
/// pool size.
pub fn reconstruct(
    image: &Image,
    scale_map: &ScaleMap,
    cfg: &SamplerConfig,
    progress: Option<Progress<'_>>,
) -> Result<Image> {
    cfg.validate()?;
    let (srows, scols) = scale_map.dims();
    image.ensure_same_dims(srows, scols, "scale map")?;
    let (rows, cols) = image.dims();
    let padded = Padded::new(image, cfg.patch_radius);
    let mut out = Image::zeros(rows, cols, image.spacing_mm())?;
    let done = AtomicUsize::new(0);

    out.as_mut_slice()
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(row, line)| {
            for (col, cell) in line.iter_mut().enumerate() {
                let mut rng = pixel_rng(cfg.seed, row, col);
                let set = draw_with(&padded, image, (row, col), scale_map, cfg, &mut rng);
                *cell = weighted_mean(&set);
            }
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(report) = progress {
                report(n, rows);
            }
        });
    Ok(out)
}

#[inline]
fn weighted_mean(set: &WeightedSampleSet) -> f64 {
    let (num, den) = set
        .values
        .iter()
        .zip(&set.weights)
        .fold((0.0, 0.0), |(num, den), (&v, &w)| (num + w * v, den + w));
    num / den
}
