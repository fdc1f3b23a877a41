//! `key=value` run configuration with `#` comments and dotted section keys.
//!
//! ```text
//! seed = 7
//! profile.preset = rigid        # rigid | inflatable | flat
//! sampler.patch_radius = 2
//! phantom.lesions = 140,100,4; 165,150,3
//! ```

use std::path::PathBuf;

use crate::erc_profile::{CoilGeometry, CoilKind, ErcSnrProfile, DEFAULT_WINDOW_RADIUS};
use crate::error::{Error, Result};
use crate::io::ImageFormat;
use crate::phantom::{Lesion, PhantomSpec};
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfilePreset {
    Rigid,
    Inflatable,
    Flat,
}

impl ProfilePreset {
    fn name(self) -> &'static str {
        match self {
            ProfilePreset::Rigid => "rigid",
            ProfilePreset::Inflatable => "inflatable",
            ProfilePreset::Flat => "flat",
        }
    }

    fn profile(self) -> ErcSnrProfile {
        match self {
            ProfilePreset::Rigid => ErcSnrProfile::rigid(),
            ProfilePreset::Inflatable => ErcSnrProfile::inflatable(),
            ProfilePreset::Flat => ErcSnrProfile::flat(),
        }
    }
}

/// Half-open pixel rectangle `[r0, r1) x [c0, c1)`.
pub type Rect = (usize, usize, usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub profile_preset: ProfilePreset,
    pub surface_gain: Option<f64>,
    pub decay_length_mm: Option<f64>,
    pub cutoff_mm: Option<f64>,
    pub post_cutoff_gain: Option<f64>,
    pub sampler: SamplerConfig,
    pub fit_window_radius: usize,
    /// Includes the coil geometry shared by `phantom` and `denoise`.
    pub phantom: PhantomSpec,
    pub sigma0: f64,
    pub background_region: Option<Rect>,
    pub prostate_region: Option<Rect>,
    pub input: Option<PathBuf>,
    pub scale_map: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub background_mask: Option<PathBuf>,
    pub prostate_mask: Option<PathBuf>,
    pub edge_mask: Option<PathBuf>,
    pub format: ImageFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            profile_preset: ProfilePreset::Rigid,
            surface_gain: None,
            decay_length_mm: None,
            cutoff_mm: None,
            post_cutoff_gain: None,
            sampler: SamplerConfig::default(),
            fit_window_radius: DEFAULT_WINDOW_RADIUS,
            phantom: PhantomSpec::default(),
            sigma0: 9.0,
            background_region: None,
            prostate_region: None,
            input: None,
            scale_map: None,
            output: None,
            background_mask: None,
            prostate_mask: None,
            edge_mask: None,
            format: ImageFormat::Pgm,
        }
    }
}

fn num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("'{value}' is not a valid number"))
}

fn pair(value: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((num(a)?, num(b)?)),
        _ => Err(format!("expected 'row,col', found '{value}'")),
    }
}

fn rect(value: &str) -> std::result::Result<Rect, String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [r0, c0, r1, c1] => Ok((num(r0)?, num(c0)?, num(r1)?, num(c1)?)),
        _ => Err(format!("expected 'r0,c0,r1,c1', found '{value}'")),
    }
}

fn opt_rect(value: &str) -> std::result::Result<Option<Rect>, String> {
    if value.is_empty() {
        Ok(None)
    } else {
        rect(value).map(Some)
    }
}

fn lesions(value: &str) -> std::result::Result<Vec<Lesion>, String> {
    if value.is_empty() || value == "none" {
        return Ok(Vec::new());
    }
    value
        .split(';')
        .map(|item| {
            let parts: Vec<&str> = item.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [r, c, radius] => Ok(Lesion {
                    center: (num(r)?, num(c)?),
                    radius_mm: num(radius)?,
                }),
                _ => Err(format!("expected 'row,col,radius_mm', found '{}'", item.trim())),
            }
        })
        .collect()
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("expected key=value, found '{line}'"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|message| Error::Config {
                line: i + 1,
                message,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one setting; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let p = &mut self.phantom;
        match key {
            "seed" => self.seed = num(value)?,
            "profile.preset" => {
                self.profile_preset = match value {
                    "rigid" => ProfilePreset::Rigid,
                    "inflatable" => ProfilePreset::Inflatable,
                    "flat" => ProfilePreset::Flat,
                    _ => return Err(format!("unknown profile preset '{value}'")),
                }
            }
            "profile.surface_gain" => self.surface_gain = Some(num(value)?),
            "profile.decay_length_mm" => self.decay_length_mm = Some(num(value)?),
            "profile.cutoff_mm" => self.cutoff_mm = Some(num(value)?),
            "profile.post_cutoff_gain" => self.post_cutoff_gain = Some(num(value)?),
            "coil.kind" => {
                p.coil.kind = match value {
                    "point" => CoilKind::Point,
                    "segment" => CoilKind::Segment,
                    _ => return Err(format!("unknown coil kind '{value}'")),
                }
            }
            "coil.p0" => p.coil.p0 = pair(value)?,
            "coil.p1" => p.coil.p1 = pair(value)?,
            "sampler.search_radius" => self.sampler.search_radius = num(value)?,
            "sampler.patch_radius" => self.sampler.patch_radius = num(value)?,
            "sampler.target_accepted" => self.sampler.target_accepted = num(value)?,
            "sampler.max_draws" => self.sampler.max_draws = num(value)?,
            "fit.window_radius" => self.fit_window_radius = num(value)?,
            "phantom.rows" => p.rows = num(value)?,
            "phantom.cols" => p.cols = num(value)?,
            "phantom.spacing_mm" => p.spacing_mm = num(value)?,
            "phantom.sigma0" => self.sigma0 = num(value)?,
            "phantom.background_level" => p.background_level = num(value)?,
            "phantom.prostate_level" => p.prostate_level = num(value)?,
            "phantom.lesion_level" => p.lesion_level = num(value)?,
            "phantom.urethra_level" => p.urethra_level = num(value)?,
            "phantom.wall_level" => p.wall_level = num(value)?,
            "phantom.prostate_center" => p.prostate_center = pair(value)?,
            "phantom.prostate_semi_axes_mm" => p.prostate_semi_axes_mm = pair(value)?,
            "phantom.lesions" => p.lesions = lesions(value)?,
            "phantom.urethra_center" => p.urethra_center = pair(value)?,
            "phantom.urethra_radius_mm" => p.urethra_radius_mm = num(value)?,
            "phantom.wall_inner_mm" => p.wall_inner_mm = num(value)?,
            "phantom.wall_outer_mm" => p.wall_outer_mm = num(value)?,
            "regions.background" => self.background_region = opt_rect(value)?,
            "regions.prostate" => self.prostate_region = opt_rect(value)?,
            "io.input" => self.input = path(value),
            "io.scale_map" => self.scale_map = path(value),
            "io.output" => self.output = path(value),
            "io.background_mask" => self.background_mask = path(value),
            "io.prostate_mask" => self.prostate_mask = path(value),
            "io.edge_mask" => self.edge_mask = path(value),
            "io.format" => {
                self.format = match value {
                    "pgm" => ImageFormat::Pgm,
                    "raw" => ImageFormat::Raw,
                    _ => return Err(format!("unknown image format '{value}'")),
                }
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.profile()?;
        self.sampler_config().validate()?;
        if self.fit_window_radius < 2 {
            return Err(Error::invalid("fit.window_radius must be >= 2"));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::invalid(format!("phantom.sigma0 must be positive, got {}", self.sigma0)));
        }
        let mut spec = self.phantom.clone();
        spec.coil.spacing_mm = spec.spacing_mm;
        spec.validate()
    }

    /// Preset with any explicit overrides applied.
    pub fn profile(&self) -> Result<ErcSnrProfile> {
        let base = self.profile_preset.profile();
        ErcSnrProfile::new(
            self.surface_gain.unwrap_or(base.surface_gain()),
            self.decay_length_mm.unwrap_or(base.decay_length_mm()),
            self.cutoff_mm.unwrap_or(base.cutoff_mm()),
            self.post_cutoff_gain.unwrap_or(base.post_cutoff_gain()),
        )
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            seed: self.seed,
            ..self.sampler
        }
    }

    /// Phantom spec with the coil expressed at the phantom's pixel spacing.
    pub fn phantom_spec(&self) -> PhantomSpec {
        let mut spec = self.phantom.clone();
        spec.coil.spacing_mm = spec.spacing_mm;
        spec
    }

    /// Coil geometry for an image with the given pixel spacing.
    pub fn coil(&self, spacing_mm: f64) -> CoilGeometry {
        CoilGeometry {
            spacing_mm,
            ..self.phantom.coil
        }
    }

    /// Every effective setting as `(key, value)` in a fixed order; the
    /// output parses back to an equal configuration.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.phantom;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let pair = |(a, b): (f64, f64)| format!("{a},{b}");
        let rect = |r: Option<Rect>| r.map_or(String::new(), |(a, b, c, d)| format!("{a},{b},{c},{d}"));
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        let lesions = if p.lesions.is_empty() {
            "none".to_string()
        } else {
            p.lesions
                .iter()
                .map(|l| format!("{},{},{}", l.center.0, l.center.1, l.radius_mm))
                .collect::<Vec<_>>()
                .join(";")
        };
        let mut out = vec![
            ("seed", self.seed.to_string()),
            ("profile.preset", self.profile_preset.name().to_string()),
        ];
        for (key, value) in [
            ("profile.surface_gain", self.surface_gain),
            ("profile.decay_length_mm", self.decay_length_mm),
            ("profile.cutoff_mm", self.cutoff_mm),
            ("profile.post_cutoff_gain", self.post_cutoff_gain),
        ] {
            if value.is_some() {
                out.push((key, opt(value)));
            }
        }
        out.extend([
            (
                "coil.kind",
                match p.coil.kind {
                    CoilKind::Point => "point",
                    CoilKind::Segment => "segment",
                }
                .to_string(),
            ),
            ("coil.p0", pair(p.coil.p0)),
            ("coil.p1", pair(p.coil.p1)),
            ("sampler.search_radius", self.sampler.search_radius.to_string()),
            ("sampler.patch_radius", self.sampler.patch_radius.to_string()),
            ("sampler.target_accepted", self.sampler.target_accepted.to_string()),
            ("sampler.max_draws", self.sampler.max_draws.to_string()),
            ("fit.window_radius", self.fit_window_radius.to_string()),
            ("phantom.rows", p.rows.to_string()),
            ("phantom.cols", p.cols.to_string()),
            ("phantom.spacing_mm", p.spacing_mm.to_string()),
            ("phantom.sigma0", self.sigma0.to_string()),
            ("phantom.background_level", p.background_level.to_string()),
            ("phantom.prostate_level", p.prostate_level.to_string()),
            ("phantom.lesion_level", p.lesion_level.to_string()),
            ("phantom.urethra_level", p.urethra_level.to_string()),
            ("phantom.wall_level", p.wall_level.to_string()),
            ("phantom.prostate_center", pair(p.prostate_center)),
            ("phantom.prostate_semi_axes_mm", pair(p.prostate_semi_axes_mm)),
            ("phantom.lesions", lesions),
            ("phantom.urethra_center", pair(p.urethra_center)),
            ("phantom.urethra_radius_mm", p.urethra_radius_mm.to_string()),
            ("phantom.wall_inner_mm", p.wall_inner_mm.to_string()),
            ("phantom.wall_outer_mm", p.wall_outer_mm.to_string()),
            ("regions.background", rect(self.background_region)),
            ("regions.prostate", rect(self.prostate_region)),
            ("io.input", path(&self.input)),
            ("io.scale_map", path(&self.scale_map)),
            ("io.output", path(&self.output)),
            ("io.background_mask", path(&self.background_mask)),
            ("io.prostate_mask", path(&self.prostate_mask)),
            ("io.edge_mask", path(&self.edge_mask)),
            ("io.format", self.format.extension().to_string()),
        ]);
        out
    }
}
