//! Synthetic prostate phantom with non-stationary Rician corruption.

use rand::Rng;

use crate::erc_profile::{CoilGeometry, ScaleMap};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::RegionMask;
use crate::rician::{sample_rician, RicianParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lesion {
    /// Pixel coordinates `(row, col)`.
    pub center: (f64, f64),
    pub radius_mm: f64,
}

/// Geometry and intensity levels of the piecewise-constant phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing_mm: f64,
    pub background_level: f64,
    pub prostate_level: f64,
    pub lesion_level: f64,
    pub urethra_level: f64,
    pub wall_level: f64,
    /// Prostate ellipse centre in pixels and semi-axes `(row, col)` in mm.
    pub prostate_center: (f64, f64),
    pub prostate_semi_axes_mm: (f64, f64),
    pub lesions: Vec<Lesion>,
    /// Urethra disk centre in pixels; a zero radius disables it.
    pub urethra_center: (f64, f64),
    pub urethra_radius_mm: f64,
    /// Rectal-wall band between these distances (mm) from the coil; an outer
    /// distance of zero disables it.
    pub wall_inner_mm: f64,
    pub wall_outer_mm: f64,
    pub coil: CoilGeometry,
}

impl Default for PhantomSpec {
    /// 256x256 slice at 0.6 mm with three lesions of 5-10 mm diameter and a
    /// rigid coil posterior to the gland.
    fn default() -> Self {
        let spacing_mm = 0.6;
        Self {
            rows: 256,
            cols: 256,
            spacing_mm,
            background_level: 100.0,
            prostate_level: 400.0,
            lesion_level: 250.0,
            urethra_level: 150.0,
            wall_level: 200.0,
            prostate_center: (150.0, 128.0),
            prostate_semi_axes_mm: (22.0, 30.0),
            lesions: vec![
                Lesion {
                    center: (140.0, 100.0),
                    radius_mm: 4.0,
                },
                Lesion {
                    center: (165.0, 150.0),
                    radius_mm: 3.0,
                },
                Lesion {
                    center: (125.0, 140.0),
                    radius_mm: 2.5,
                },
            ],
            urethra_center: (145.0, 128.0),
            urethra_radius_mm: 2.5,
            wall_inner_mm: 2.0,
            wall_outer_mm: 6.0,
            coil: CoilGeometry::segment((210.0, 108.0), (210.0, 148.0), spacing_mm),
        }
    }
}

impl PhantomSpec {
    fn in_prostate(&self, r: f64, c: f64) -> bool {
        let (cr, cc) = self.prostate_center;
        let (ar, ac) = self.prostate_semi_axes_mm;
        let dr = (r - cr) * self.spacing_mm / ar;
        let dc = (c - cc) * self.spacing_mm / ac;
        dr * dr + dc * dc <= 1.0
    }

    fn in_disk(&self, center: (f64, f64), radius_mm: f64, r: f64, c: f64) -> bool {
        (r - center.0).hypot(c - center.1) * self.spacing_mm <= radius_mm
    }

    /// Whether a disk lies inside the prostate, checked on its rim.
    fn disk_inside_prostate(&self, center: (f64, f64), radius_mm: f64) -> bool {
        let rpx = radius_mm / self.spacing_mm;
        (0..128).all(|k| {
            let t = k as f64 * std::f64::consts::TAU / 128.0;
            self.in_prostate(center.0 + rpx * t.sin(), center.1 + rpx * t.cos())
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.rows < 16 || self.cols < 16 {
            return bad(format!("grid {}x{} is smaller than 16x16", self.rows, self.cols));
        }
        if !(self.spacing_mm > 0.0 && self.spacing_mm.is_finite()) {
            return bad(format!("spacing must be positive, got {}", self.spacing_mm));
        }
        for (name, v) in [
            ("background", self.background_level),
            ("prostate", self.prostate_level),
            ("lesion", self.lesion_level),
            ("urethra", self.urethra_level),
            ("wall", self.wall_level),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} level must be finite and >= 0, got {v}"));
            }
        }
        if !self.lesions.is_empty() && self.lesion_level >= self.prostate_level {
            return bad(format!(
                "lesion level {} must be below prostate level {}",
                self.lesion_level, self.prostate_level
            ));
        }
        self.coil
            .validate(self.rows, self.cols)
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;

        let (ar, ac) = self.prostate_semi_axes_mm;
        if !(ar > 0.0 && ac > 0.0) {
            return bad("prostate semi-axes must be positive".into());
        }
        let (cr, cc) = self.prostate_center;
        let (hr, hc) = (ar / self.spacing_mm, ac / self.spacing_mm);
        if cr - hr < 0.0 || cc - hc < 0.0 || cr + hr > (self.rows - 1) as f64 || cc + hc > (self.cols - 1) as f64 {
            return bad("prostate ellipse extends outside the grid".into());
        }
        for (i, lesion) in self.lesions.iter().enumerate() {
            if lesion.radius_mm.is_nan() || lesion.radius_mm <= 0.0 {
                return bad(format!("lesion {i} radius must be positive"));
            }
            if !self.disk_inside_prostate(lesion.center, lesion.radius_mm) {
                return bad(format!("lesion {i} extends outside the prostate"));
            }
        }
        if self.urethra_radius_mm > 0.0
            && !self.disk_inside_prostate(self.urethra_center, self.urethra_radius_mm)
        {
            return bad("urethra extends outside the prostate".into());
        }
        if self.wall_outer_mm > 0.0 && !(self.wall_inner_mm >= 0.0 && self.wall_inner_mm < self.wall_outer_mm) {
            return bad("rectal wall needs 0 <= inner < outer".into());
        }
        Ok(())
    }

    fn level_at(&self, r: usize, c: usize) -> f64 {
        let (rf, cf) = (r as f64, c as f64);
        if self.urethra_radius_mm > 0.0 && self.in_disk(self.urethra_center, self.urethra_radius_mm, rf, cf) {
            return self.urethra_level;
        }
        if self
            .lesions
            .iter()
            .any(|l| self.in_disk(l.center, l.radius_mm, rf, cf))
        {
            return self.lesion_level;
        }
        if self.in_prostate(rf, cf) {
            return self.prostate_level;
        }
        if self.wall_outer_mm > 0.0 {
            let d = self.coil.pixel_distance(rf, cf) * self.spacing_mm;
            if d >= self.wall_inner_mm && d <= self.wall_outer_mm {
                return self.wall_level;
            }
        }
        self.background_level
    }
}

/// Ground-truth image `G`.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Image> {
    spec.validate()?;
    Image::from_fn(spec.rows, spec.cols, spec.spacing_mm, |r, c| spec.level_at(r, c))
}

/// Observed image `V`: every pixel drawn from `Rician(G(s), phi(s))` in
/// row-major order from `rng`.
pub fn apply_nonstationary_rician<R: Rng + ?Sized>(
    g: &Image,
    scale_map: &ScaleMap,
    rng: &mut R,
) -> Result<Image> {
    let (rows, cols) = scale_map.dims();
    g.ensure_same_dims(rows, cols, "scale map")?;
    let mut out = g.clone();
    for r in 0..rows {
        for c in 0..cols {
            let params = RicianParams::new(g.get(r, c).max(0.0), scale_map.get(r, c))?;
            out.set(r, c, sample_rician(params, rng));
        }
    }
    Ok(out)
}

const BACKGROUND_RECT: (usize, usize) = (16, 32);
const PROSTATE_RECT: (usize, usize) = (10, 10);
const BACKGROUND_MARGIN: usize = 4;
const PROSTATE_MARGIN: usize = 2;

/// Summed-area table of "pixel differs from `level`" for O(1) rectangle checks.
struct Mismatch {
    cols: usize,
    table: Vec<u32>,
}

impl Mismatch {
    fn new(g: &Image, level: f64) -> Self {
        let (rows, cols) = g.dims();
        let w = cols + 1;
        let mut table = vec![0u32; (rows + 1) * w];
        for r in 0..rows {
            for c in 0..cols {
                let hit = u32::from(g.get(r, c) != level);
                table[(r + 1) * w + c + 1] = hit + table[r * w + c + 1] + table[(r + 1) * w + c] - table[r * w + c];
            }
        }
        Self { cols, table }
    }

    /// Mismatches in `[r0, r1) x [c0, c1)`.
    fn count(&self, r0: usize, c0: usize, r1: usize, c1: usize) -> u32 {
        let w = self.cols + 1;
        self.table[r1 * w + c1] + self.table[r0 * w + c0] - self.table[r0 * w + c1] - self.table[r1 * w + c0]
    }
}

fn clean_rects(
    g: &Image,
    level: f64,
    size: (usize, usize),
    margin: usize,
) -> impl Iterator<Item = (usize, usize)> + '_ {
    let (rows, cols) = g.dims();
    let mismatch = Mismatch::new(g, level);
    let (h, w) = size;
    let r_end = rows.saturating_sub(h) + 1;
    let c_end = cols.saturating_sub(w) + 1;
    (0..r_end)
        .flat_map(move |r| (0..c_end).map(move |c| (r, c)))
        .filter(move |&(r, c)| {
            h <= rows
                && w <= cols
                && mismatch.count(
                    r.saturating_sub(margin),
                    c.saturating_sub(margin),
                    (r + h + margin).min(rows),
                    (c + w + margin).min(cols),
                ) == 0
        })
}

/// Background region farthest from the coil and prostate region nearest the
/// gland centre, both structure-free in the ground truth.
pub fn preset_regions(spec: &PhantomSpec) -> Result<(RegionMask, RegionMask)> {
    let g = generate_phantom(spec)?;
    let (rows, cols) = g.dims();

    let (bh, bw) = BACKGROUND_RECT;
    let nearest_coil = |r: usize, c: usize| {
        let corners = [(r, c), (r + bh - 1, c), (r, c + bw - 1), (r + bh - 1, c + bw - 1)];
        let mut best = f64::INFINITY;
        // the rectangle point nearest to a convex coil lies on its boundary
        for i in 0..bh {
            best = best
                .min(spec.coil.pixel_distance((r + i) as f64, c as f64))
                .min(spec.coil.pixel_distance((r + i) as f64, (c + bw - 1) as f64));
        }
        for j in 0..bw {
            best = best
                .min(spec.coil.pixel_distance(r as f64, (c + j) as f64))
                .min(spec.coil.pixel_distance((r + bh - 1) as f64, (c + j) as f64));
        }
        corners.iter().fold(best, |b, &(rr, cc)| b.min(spec.coil.pixel_distance(rr as f64, cc as f64)))
    };
    let mut background: Option<((usize, usize), f64)> = None;
    for (r, c) in clean_rects(&g, spec.background_level, BACKGROUND_RECT, BACKGROUND_MARGIN) {
        let d = nearest_coil(r, c);
        if background.is_none_or(|(_, best)| d > best) {
            background = Some(((r, c), d));
        }
    }
    let ((br, bc), _) = background
        .ok_or_else(|| Error::InvalidSpec("no structure-free background region fits the grid".into()))?;

    let (ph, pw) = PROSTATE_RECT;
    let (pr0, pc0) = spec.prostate_center;
    let mut prostate: Option<((usize, usize), f64)> = None;
    for (r, c) in clean_rects(&g, spec.prostate_level, PROSTATE_RECT, PROSTATE_MARGIN) {
        let centre = (r as f64 + (ph as f64 - 1.0) / 2.0, c as f64 + (pw as f64 - 1.0) / 2.0);
        let d = (centre.0 - pr0).hypot(centre.1 - pc0);
        if prostate.is_none_or(|(_, best)| d < best) {
            prostate = Some(((r, c), d));
        }
    }
    let ((pr, pc), _) = prostate
        .ok_or_else(|| Error::InvalidSpec("no lesion-free prostate region fits the gland".into()))?;

    Ok((
        RegionMask::rect(rows, cols, br, bc, br + bh, bc + bw)?,
        RegionMask::rect(rows, cols, pr, pc, pr + ph, pc + pw)?,
    ))
}

/// Whole prostate gland (lesions and urethra included), for edge preservation.
pub fn gland_mask(spec: &PhantomSpec) -> Result<RegionMask> {
    spec.validate()?;
    RegionMask::from_fn(spec.rows, spec.cols, |r, c| spec.in_prostate(r as f64, c as f64))
}
