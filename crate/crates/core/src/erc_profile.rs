//! Endorectal-coil SNR profile, coil distance maps and the non-stationary scale map.
//!
//! Coil intensity correction flattens the bias but leaves the noise scale
//! inversely proportional to the coil's SNR gain, `phi(s) = sigma0 / gain(d(s))`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rician::{fit_rician_ml, MIN_FIT_SAMPLES};

/// Parametric SNR gain versus distance from the coil surface: an exponential
/// decay from `surface_gain` toward 1, followed by an abrupt drop to
/// `post_cutoff_gain` beyond `cutoff_mm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErcSnrProfile {
    surface_gain: f64,
    decay_length_mm: f64,
    cutoff_mm: f64,
    post_cutoff_gain: f64,
}

impl ErcSnrProfile {
    pub fn new(
        surface_gain: f64,
        decay_length_mm: f64,
        cutoff_mm: f64,
        post_cutoff_gain: f64,
    ) -> Result<Self> {
        if !(surface_gain >= 1.0 && surface_gain.is_finite()) {
            return Err(Error::invalid(format!(
                "surface gain must be >= 1, got {surface_gain}"
            )));
        }
        if !(decay_length_mm > 0.0 && decay_length_mm.is_finite()) {
            return Err(Error::invalid(format!(
                "decay length must be positive, got {decay_length_mm}"
            )));
        }
        if !(cutoff_mm > 0.0 && cutoff_mm.is_finite()) {
            return Err(Error::invalid(format!("cutoff must be positive, got {cutoff_mm}")));
        }
        if !(post_cutoff_gain > 0.0 && post_cutoff_gain <= 1.0) {
            return Err(Error::invalid(format!(
                "post-cutoff gain must lie in (0, 1], got {post_cutoff_gain}"
            )));
        }
        Ok(Self {
            surface_gain,
            decay_length_mm,
            cutoff_mm,
            post_cutoff_gain,
        })
    }

    /// Rigid coil: five-fold gain at the surface.
    pub fn rigid() -> Self {
        Self {
            surface_gain: 5.0,
            decay_length_mm: 20.0,
            cutoff_mm: 60.0,
            post_cutoff_gain: 0.5,
        }
    }

    /// Inflatable coil: weaker surface gain.
    pub fn inflatable() -> Self {
        Self {
            surface_gain: 2.0,
            decay_length_mm: 25.0,
            cutoff_mm: 60.0,
            post_cutoff_gain: 0.5,
        }
    }

    /// Flat profile (`gain == 1` everywhere), i.e. stationary noise.
    pub fn flat() -> Self {
        Self {
            surface_gain: 1.0,
            decay_length_mm: 1.0,
            cutoff_mm: f64::MAX,
            post_cutoff_gain: 1.0,
        }
    }

    pub fn surface_gain(&self) -> f64 {
        self.surface_gain
    }

    pub fn decay_length_mm(&self) -> f64 {
        self.decay_length_mm
    }

    pub fn cutoff_mm(&self) -> f64 {
        self.cutoff_mm
    }

    pub fn post_cutoff_gain(&self) -> f64 {
        self.post_cutoff_gain
    }

    #[inline]
    pub(crate) fn gain_unchecked(&self, d: f64) -> f64 {
        if d > self.cutoff_mm {
            self.post_cutoff_gain
        } else {
            1.0 + (self.surface_gain - 1.0) * (-d / self.decay_length_mm).exp()
        }
    }
}

/// SNR gain at distance `d` (mm) from the coil surface.
pub fn snr_gain(profile: &ErcSnrProfile, d: f64) -> Result<f64> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::invalid(format!("distance must be >= 0, got {d}")));
    }
    Ok(profile.gain_unchecked(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoilKind {
    Point,
    Segment,
}

/// Coil position in pixel coordinates `(row, col)`; `p1` is used for segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilGeometry {
    pub kind: CoilKind,
    pub p0: (f64, f64),
    pub p1: (f64, f64),
    pub spacing_mm: f64,
}

impl CoilGeometry {
    pub fn point(at: (f64, f64), spacing_mm: f64) -> Self {
        Self {
            kind: CoilKind::Point,
            p0: at,
            p1: at,
            spacing_mm,
        }
    }

    pub fn segment(p0: (f64, f64), p1: (f64, f64), spacing_mm: f64) -> Self {
        Self {
            kind: CoilKind::Segment,
            p0,
            p1,
            spacing_mm,
        }
    }

    /// Same geometry with rows and columns swapped.
    pub fn transposed(&self) -> Self {
        Self {
            p0: (self.p0.1, self.p0.0),
            p1: (self.p1.1, self.p1.0),
            ..*self
        }
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if !(self.spacing_mm > 0.0 && self.spacing_mm.is_finite()) {
            return Err(Error::invalid(format!(
                "coil spacing must be positive, got {}",
                self.spacing_mm
            )));
        }
        let inside = |(r, c): (f64, f64)| {
            r >= 0.0 && c >= 0.0 && r <= (rows as f64 - 1.0) && c <= (cols as f64 - 1.0)
        };
        let mut points = vec![self.p0];
        if self.kind == CoilKind::Segment {
            points.push(self.p1);
        }
        for p in points {
            if !inside(p) {
                return Err(Error::invalid(format!(
                    "coil point ({}, {}) lies outside the {rows}x{cols} grid",
                    p.0, p.1
                )));
            }
        }
        Ok(())
    }

    /// Distance in pixels from `(row, col)` to the coil.
    #[inline]
    pub(crate) fn pixel_distance(&self, row: f64, col: f64) -> f64 {
        let (r0, c0) = self.p0;
        match self.kind {
            CoilKind::Point => (row - r0).hypot(col - c0),
            CoilKind::Segment => {
                let (dr, dc) = (self.p1.0 - r0, self.p1.1 - c0);
                let len2 = dr * dr + dc * dc;
                let t = if len2 > 0.0 {
                    (((row - r0) * dr + (col - c0) * dc) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (row - (r0 + t * dr)).hypot(col - (c0 + t * dc))
            }
        }
    }
}

/// Euclidean distance (mm) from every pixel centre to the coil.
pub fn distance_map(geom: &CoilGeometry, rows: usize, cols: usize) -> Result<Image> {
    geom.validate(rows, cols)?;
    Image::from_fn(rows, cols, geom.spacing_mm, |r, c| {
        geom.pixel_distance(r as f64, c as f64) * geom.spacing_mm
    })
}

/// Per-pixel Rician scale together with the base scale it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleMap {
    values: Image,
    sigma0: f64,
}

impl ScaleMap {
    /// `phi(s) = sigma0 / gain(d(s))`.
    pub fn from_profile(dmap: &Image, profile: &ErcSnrProfile, sigma0: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::invalid(format!("sigma0 must be positive, got {sigma0}")));
        }
        Ok(Self {
            values: dmap.map(|d| sigma0 / profile.gain_unchecked(d.max(0.0))),
            sigma0,
        })
    }

    pub fn constant(rows: usize, cols: usize, spacing_mm: f64, phi: f64) -> Result<Self> {
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {phi}")));
        }
        Ok(Self {
            values: Image::filled(rows, cols, spacing_mm, phi)?,
            sigma0: phi,
        })
    }

    /// Wraps explicit per-pixel scales (e.g. loaded from disk).
    pub fn from_image(values: Image, sigma0: f64) -> Result<Self> {
        if let Some(bad) = values.as_slice().iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!(
                "scale map values must be positive, found {bad}"
            )));
        }
        Ok(Self { values, sigma0 })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values.get(row, col)
    }

    pub fn values(&self) -> &Image {
        &self.values
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }
}

/// Subsample stride between window centres in [`fit_scale_map`].
pub const WINDOW_STRIDE: usize = 4;
/// Default half-width of the local fitting windows (9x9).
pub const DEFAULT_WINDOW_RADIUS: usize = 4;
const MIN_WINDOWS: usize = 10;
/// Windows with `nu > NOISE_SNR_LIMIT * phi` are signal-dominated.
const NOISE_SNR_LIMIT: f64 = 2.0;
/// Relative distance from the median `phi * gain` beyond which a window is
/// treated as an edge outlier in the fallback regression.
const OUTLIER_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy)]
struct WindowFit {
    phi: f64,
    nu: f64,
    gain: f64,
}

/// Fits the base scale `sigma0` of `phi(s) = sigma0 / gain(d(s))` to local
/// maximum-likelihood Rician fits over sliding windows.
///
/// Windows whose `phi * gain` lies more than 50% from the median are dropped
/// as edge outliers. Of the rest, noise-dominated windows (`nu <= 2 phi`)
/// drive a least-squares fit of `sigma0`; when fewer than ten exist (images
/// without an air background) all remaining windows are used.
pub fn fit_scale_map(
    image: &Image,
    dmap: &Image,
    profile: &ErcSnrProfile,
    window_radius: usize,
) -> Result<ScaleMap> {
    image.ensure_same_dims(dmap.rows(), dmap.cols(), "distance map")?;
    if window_radius < 2 {
        return Err(Error::invalid(format!(
            "window radius must be >= 2, got {window_radius}"
        )));
    }
    let (rows, cols) = image.dims();
    let side = 2 * window_radius + 1;
    if rows < side || cols < side {
        return Err(Error::InsufficientData(format!(
            "{rows}x{cols} image is smaller than one {side}x{side} window"
        )));
    }

    let centres: Vec<(usize, usize)> = (window_radius..rows - window_radius)
        .step_by(WINDOW_STRIDE)
        .flat_map(|r| {
            (window_radius..cols - window_radius)
                .step_by(WINDOW_STRIDE)
                .map(move |c| (r, c))
        })
        .collect();

    let fits: Vec<Option<WindowFit>> = centres
        .par_iter()
        .map(|&(r, c)| {
            let mut samples = Vec::with_capacity(side * side);
            for rr in r - window_radius..=r + window_radius {
                for cc in c - window_radius..=c + window_radius {
                    let v = image.get(rr, cc);
                    if v > 0.0 && v.is_finite() {
                        samples.push(v);
                    }
                }
            }
            if samples.len() < MIN_FIT_SAMPLES {
                return None;
            }
            let fit = fit_rician_ml(&samples).ok()?;
            Some(WindowFit {
                phi: fit.phi(),
                nu: fit.nu(),
                gain: profile.gain_unchecked(dmap.get(r, c).max(0.0)),
            })
        })
        .collect();
    let fitted: Vec<WindowFit> = fits.into_iter().flatten().collect();
    if fitted.len() < MIN_WINDOWS {
        return Err(Error::InsufficientData(format!(
            "only {} usable fitting windows, need {MIN_WINDOWS}",
            fitted.len()
        )));
    }

    // windows straddling edges fit as wide bimodal mixtures with an inflated
    // phi; anchor on the median estimate and drop them before classifying
    let mut ratios: Vec<f64> = fitted.iter().map(|w| w.phi * w.gain).collect();
    ratios.sort_by(f64::total_cmp);
    let anchor = ratios[ratios.len() / 2];
    let kept: Vec<WindowFit> = fitted
        .iter()
        .copied()
        .filter(|w| (w.phi * w.gain - anchor).abs() <= OUTLIER_TOLERANCE * anchor)
        .collect();
    let noise: Vec<WindowFit> = kept
        .iter()
        .copied()
        .filter(|w| w.nu <= NOISE_SNR_LIMIT * w.phi)
        .collect();
    let sigma0 = if noise.len() >= MIN_WINDOWS {
        least_squares_sigma0(&noise)
    } else if kept.len() >= MIN_WINDOWS {
        least_squares_sigma0(&kept)
    } else {
        anchor
    };
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::InsufficientData(format!(
            "scale fit produced a non-positive base scale {sigma0}"
        )));
    }
    ScaleMap::from_profile(dmap, profile, sigma0)
}

/// Minimizer of `sum_i (phi_i - sigma0 / gain_i)^2`, summed in window order.
fn least_squares_sigma0(windows: &[WindowFit]) -> f64 {
    let (num, den) = windows.iter().fold((0.0, 0.0), |(num, den), w| {
        let inv = 1.0 / w.gain;
        (num + w.phi * inv, den + inv * inv)
    });
    num / den
}
