//! Image-quality and reader-study statistics: SNR, CNR, edge preservation,
//! rank sums, F-pseudosigma and the paired significance test.

use crate::error::{Error, Result};
use crate::image::Image;

/// Boolean pixel region on an image grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl RegionMask {
    pub fn new(rows: usize, cols: usize, data: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::invalid(format!(
                "mask buffer of {} cells does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn empty(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![false; rows.saturating_mul(cols)])
    }

    /// Half-open rectangle `[r0, r1) x [c0, c1)`.
    pub fn rect(rows: usize, cols: usize, r0: usize, c0: usize, r1: usize, c1: usize) -> Result<Self> {
        if r0 >= r1 || c0 >= c1 || r1 > rows || c1 > cols {
            return Err(Error::invalid(format!(
                "rectangle [{r0},{r1})x[{c0},{c1}) does not fit a {rows}x{cols} grid"
            )));
        }
        let mut mask = Self::empty(rows, cols)?;
        for r in r0..r1 {
            for c in c0..c1 {
                mask.set(r, c, true);
            }
        }
        Ok(mask)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.saturating_mul(cols));
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.cols + col] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn is_disjoint(&self, other: &RegionMask) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !(a && b))
    }

    fn check_against(&self, image: &Image, what: &str) -> Result<()> {
        if self.dims() != image.dims() {
            return Err(Error::DimensionMismatch {
                what: what.to_string(),
                rows: image.rows(),
                cols: image.cols(),
                got_rows: self.rows,
                got_cols: self.cols,
            });
        }
        if self.count() == 0 {
            return Err(Error::invalid(format!("{what} is empty")));
        }
        Ok(())
    }

    fn values<'a>(&'a self, values: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        values
            .iter()
            .zip(&self.data)
            .filter_map(|(&v, &m)| m.then_some(v))
    }
}

/// Mean and sample standard deviation (n - 1) over the masked pixels, two-pass.
pub fn region_stats(image: &Image, mask: &RegionMask) -> Result<(f64, f64)> {
    mask.check_against(image, "mask")?;
    let n = mask.count();
    if n < 2 {
        return Err(Error::DegenerateRegion(format!(
            "standard deviation needs at least 2 pixels, mask has {n}"
        )));
    }
    let mean = mask.values(image.as_slice()).sum::<f64>() / n as f64;
    let ss: f64 = mask.values(image.as_slice()).map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n - 1) as f64).sqrt()))
}

/// `20 log10(mean / std)` over the region.
pub fn snr_db(image: &Image, mask: &RegionMask) -> Result<f64> {
    let (mean, sd) = region_stats(image, mask)?;
    if sd == 0.0 {
        return Err(Error::DegenerateRegion("region has zero standard deviation".into()));
    }
    Ok(20.0 * (mean / sd).log10())
}

/// `20 log10(|mean_A - mean_B| / std_A)`; region A is the background.
pub fn cnr_db(image: &Image, mask_a: &RegionMask, mask_b: &RegionMask) -> Result<f64> {
    let (mean_a, sd_a) = region_stats(image, mask_a)?;
    let (mean_b, _) = region_stats(image, mask_b)?;
    if sd_a == 0.0 {
        return Err(Error::DegenerateRegion(
            "background region has zero standard deviation".into(),
        ));
    }
    let contrast = (mean_a - mean_b).abs();
    if contrast == 0.0 {
        return Err(Error::DegenerateContrast);
    }
    Ok(20.0 * (contrast / sd_a).log10())
}

/// 4-neighbour Laplacian with mirrored borders.
pub fn laplacian(image: &Image) -> Image {
    let (rows, cols) = image.dims();
    let mut out = image.clone();
    for r in 0..rows {
        for c in 0..cols {
            let (ri, ci) = (r as isize, c as isize);
            let v = image.get_mirrored(ri - 1, ci)
                + image.get_mirrored(ri + 1, ci)
                + image.get_mirrored(ri, ci - 1)
                + image.get_mirrored(ri, ci + 1)
                - 4.0 * image.get(r, c);
            out.set(r, c, v);
        }
    }
    out
}

/// Minimum mask size for [`edge_preservation`].
pub const MIN_EDGE_PIXELS: usize = 9;

/// Normalized correlation of the Laplacians of `v` and `g_hat` over the mask,
/// each centred on its mask-region mean. 1 means perfect edge retention.
pub fn edge_preservation(v: &Image, g_hat: &Image, mask: &RegionMask) -> Result<f64> {
    v.ensure_same_dims(g_hat.rows(), g_hat.cols(), "reconstruction")?;
    mask.check_against(v, "edge mask")?;
    if mask.count() < MIN_EDGE_PIXELS {
        return Err(Error::invalid(format!(
            "edge mask needs at least {MIN_EDGE_PIXELS} pixels, has {}",
            mask.count()
        )));
    }
    let lv = laplacian(v);
    let lg = laplacian(g_hat);
    let n = mask.count() as f64;
    let mean_v = mask.values(lv.as_slice()).sum::<f64>() / n;
    let mean_g = mask.values(lg.as_slice()).sum::<f64>() / n;
    let (mut cross, mut ss_v, mut ss_g) = (0.0, 0.0, 0.0);
    for (a, b) in mask.values(lv.as_slice()).zip(mask.values(lg.as_slice())) {
        let (da, db) = (a - mean_v, b - mean_g);
        cross += da * db;
        ss_v += da * da;
        ss_g += db * db;
    }
    if ss_v == 0.0 || ss_g == 0.0 {
        return Err(Error::DegenerateRegion(
            "Laplacian has zero variance over the edge mask".into(),
        ));
    }
    Ok((cross / (ss_v * ss_g).sqrt()).clamp(-1.0, 1.0))
}

/// Reader-study scores on the 1..=5 scale; rows are evaluators, columns slices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreMatrix {
    evaluators: usize,
    slices: usize,
    scores: Vec<u8>,
}

impl ScoreMatrix {
    pub fn new(evaluators: usize, slices: usize, scores: Vec<u8>) -> Result<Self> {
        if evaluators == 0 || slices == 0 || evaluators.checked_mul(slices) != Some(scores.len()) {
            return Err(Error::invalid(format!(
                "{} scores do not form a {evaluators}x{slices} matrix",
                scores.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !(1..=5).contains(*s)) {
            return Err(Error::invalid(format!("score {bad} is outside 1..=5")));
        }
        Ok(Self {
            evaluators,
            slices,
            scores,
        })
    }

    pub fn evaluators(&self) -> usize {
        self.evaluators
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn get(&self, evaluator: usize, slice: usize) -> u8 {
        self.scores[evaluator * self.slices + slice]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.scores
    }
}

pub fn rank_sum(scores: &ScoreMatrix) -> u64 {
    scores.scores.iter().map(|&s| u64::from(s)).sum()
}

/// Linearly interpolated quantile of sorted data at 1-indexed position
/// `p (n - 1) + 1`.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_finite(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("values must be finite"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("median of an empty list".into()));
    }
    Ok(quantile_sorted(&sorted_finite(values)?, 0.5))
}

/// Normal-consistent robust spread `IQR / 1.349`.
pub fn f_pseudosigma(values: &[f64]) -> Result<f64> {
    if values.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "F-pseudosigma needs at least 4 values, got {}",
            values.len()
        )));
    }
    let sorted = sorted_finite(values)?;
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    Ok(iqr / 1.349)
}

/// Outcome of a paired Student t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub t: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-tailed paired t-test of `mean(method - reference) = 0`.
pub fn paired_t_test(method: &[f64], reference: &[f64]) -> Result<PairedTest> {
    if method.len() != reference.len() {
        return Err(Error::invalid(format!(
            "paired lists differ in length: {} vs {}",
            method.len(),
            reference.len()
        )));
    }
    let n = method.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "paired test needs at least 2 pairs, got {n}"
        )));
    }
    let diffs: Vec<f64> = method.iter().zip(reference).map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("paired values must be finite"));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::Degenerate(
            "paired differences have zero variance".into(),
        ));
    }
    let t = mean / (var / n as f64).sqrt();
    let dof = n - 1;
    Ok(PairedTest {
        t,
        dof,
        p_value: student_t_two_tailed(t, dof as f64),
    })
}

pub fn paired_p_value(method: &[f64], reference: &[f64]) -> Result<f64> {
    paired_t_test(method, reference).map(|r| r.p_value)
}

/// `P(|T| >= |t|)` for Student's t with `dof` degrees of freedom,
/// `I_{dof/(dof+t^2)}(dof/2, 1/2)`.
pub fn student_t_two_tailed(t: f64, dof: f64) -> f64 {
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(x, 0.5 * dof, 0.5).clamp(0.0, 1.0)
}

/// `I_x(a, b)` via the Lentz continued fraction, using the symmetry
/// `I_x(a, b) = 1 - I_{1-x}(b, a)` where the fraction converges slowly.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_fraction(1.0 - x, b, a) / b
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let odd = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + odd * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}
