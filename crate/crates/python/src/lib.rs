//! Python bindings for the reconstruction pipeline.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use acer_core::erc_profile as erc;
use acer_core::{io, metrics, phantom, rician, sampler};

create_exception!(acer, AcerError, PyValueError);

fn err(e: acer_core::Error) -> PyErr {
    match e {
        acer_core::Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => AcerError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for acer_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

/// Row-major float image with isotropic pixel spacing (mm).
#[pyclass(name = "Image", module = "acer", from_py_object)]
#[derive(Clone)]
struct PyImage(acer_core::Image);

#[pymethods]
impl PyImage {
    #[new]
    #[pyo3(signature = (rows, spacing_mm = 1.0))]
    fn new(rows: Vec<Vec<f64>>, spacing_mm: f64) -> PyResult<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(AcerError::new_err("rows have unequal lengths"));
        }
        let data = rows.into_iter().flatten().collect();
        Ok(Self(acer_core::Image::from_vec(n, m, spacing_mm, data).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (rows, cols, value = 0.0, spacing_mm = 1.0))]
    fn filled(rows: usize, cols: usize, value: f64, spacing_mm: f64) -> PyResult<Self> {
        Ok(Self(acer_core::Image::filled(rows, cols, spacing_mm, value).py()?))
    }

    #[getter]
    fn rows(&self) -> usize {
        self.0.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.0.cols()
    }

    #[getter]
    fn spacing_mm(&self) -> f64 {
        self.0.spacing_mm()
    }

    fn get(&self, row: usize, col: usize) -> PyResult<f64> {
        if !self.0.contains(row, col) {
            return Err(AcerError::new_err(format!("({row}, {col}) is outside the image")));
        }
        Ok(self.0.get(row, col))
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.0.as_slice().chunks(self.0.cols()).map(<[f64]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{}, spacing_mm={})", self.0.rows(), self.0.cols(), self.0.spacing_mm())
    }
}

/// Boolean pixel region.
#[pyclass(name = "RegionMask", module = "acer", from_py_object)]
#[derive(Clone)]
struct PyRegionMask(metrics::RegionMask);

#[pymethods]
impl PyRegionMask {
    #[new]
    fn new(rows: Vec<Vec<bool>>) -> PyResult<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(AcerError::new_err("rows have unequal lengths"));
        }
        Ok(Self(metrics::RegionMask::new(n, m, rows.into_iter().flatten().collect()).py()?))
    }

    /// Half-open rectangle `[r0, r1) x [c0, c1)`.
    #[staticmethod]
    fn rect(rows: usize, cols: usize, r0: usize, c0: usize, r1: usize, c1: usize) -> PyResult<Self> {
        Ok(Self(metrics::RegionMask::rect(rows, cols, r0, c0, r1, c1).py()?))
    }

    #[getter]
    fn count(&self) -> usize {
        self.0.count()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.0.dims()
    }
}

#[pyclass(name = "ErcSnrProfile", module = "acer", from_py_object)]
#[derive(Clone)]
struct PyProfile(erc::ErcSnrProfile);

#[pymethods]
impl PyProfile {
    #[new]
    fn new(surface_gain: f64, decay_length_mm: f64, cutoff_mm: f64, post_cutoff_gain: f64) -> PyResult<Self> {
        Ok(Self(erc::ErcSnrProfile::new(surface_gain, decay_length_mm, cutoff_mm, post_cutoff_gain).py()?))
    }

    #[staticmethod]
    fn rigid() -> Self {
        Self(erc::ErcSnrProfile::rigid())
    }

    #[staticmethod]
    fn inflatable() -> Self {
        Self(erc::ErcSnrProfile::inflatable())
    }

    #[staticmethod]
    fn flat() -> Self {
        Self(erc::ErcSnrProfile::flat())
    }

    /// SNR gain at `d` mm from the coil.
    fn gain(&self, d: f64) -> PyResult<f64> {
        erc::snr_gain(&self.0, d).py()
    }
}

#[pyclass(name = "CoilGeometry", module = "acer", from_py_object)]
#[derive(Clone)]
struct PyCoil(erc::CoilGeometry);

#[pymethods]
impl PyCoil {
    #[staticmethod]
    fn point(row: f64, col: f64, spacing_mm: f64) -> Self {
        Self(erc::CoilGeometry::point((row, col), spacing_mm))
    }

    #[staticmethod]
    fn segment(p0: (f64, f64), p1: (f64, f64), spacing_mm: f64) -> Self {
        Self(erc::CoilGeometry::segment(p0, p1, spacing_mm))
    }
}

#[pyclass(name = "ScaleMap", module = "acer", from_py_object)]
#[derive(Clone)]
struct PyScaleMap(erc::ScaleMap);

#[pymethods]
impl PyScaleMap {
    #[staticmethod]
    fn from_profile(dmap: &PyImage, profile: &PyProfile, sigma0: f64) -> PyResult<Self> {
        Ok(Self(erc::ScaleMap::from_profile(&dmap.0, &profile.0, sigma0).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (rows, cols, phi, spacing_mm = 1.0))]
    fn constant(rows: usize, cols: usize, phi: f64, spacing_mm: f64) -> PyResult<Self> {
        Ok(Self(erc::ScaleMap::constant(rows, cols, spacing_mm, phi).py()?))
    }

    #[getter]
    fn sigma0(&self) -> f64 {
        self.0.sigma0()
    }

    #[getter]
    fn values(&self) -> PyImage {
        PyImage(self.0.values().clone())
    }
}

#[pyclass(name = "SamplerConfig", module = "acer", from_py_object)]
#[derive(Clone)]
struct PySamplerConfig(sampler::SamplerConfig);

#[pymethods]
impl PySamplerConfig {
    #[new]
    #[pyo3(signature = (search_radius = 7, patch_radius = 2, target_accepted = 32, max_draws = 256, seed = 0))]
    fn new(
        search_radius: usize,
        patch_radius: usize,
        target_accepted: usize,
        max_draws: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = sampler::SamplerConfig {
            search_radius,
            patch_radius,
            target_accepted,
            max_draws,
            seed,
        };
        cfg.validate().py()?;
        Ok(Self(cfg))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Default synthetic prostate phantom description.
#[pyclass(name = "PhantomSpec", module = "acer", from_py_object)]
#[derive(Clone)]
struct PyPhantomSpec(phantom::PhantomSpec);

#[pymethods]
impl PyPhantomSpec {
    #[new]
    fn new() -> Self {
        Self(phantom::PhantomSpec::default())
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.rows, self.0.cols)
    }

    #[getter]
    fn spacing_mm(&self) -> f64 {
        self.0.spacing_mm
    }

    #[getter]
    fn coil(&self) -> PyCoil {
        PyCoil(self.0.coil)
    }
}

#[pyfunction]
fn rician_log_pdf(x: f64, nu: f64, phi: f64) -> PyResult<f64> {
    rician::rician_log_pdf(x, rician::RicianParams::new(nu, phi).py()?).py()
}

#[pyfunction]
fn sample_rician(nu: f64, phi: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let params = rician::RicianParams::new(nu, phi).py()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| rician::sample_rician(params, &mut rng)).collect())
}

/// Maximum-likelihood `(nu, phi)`.
#[pyfunction]
fn fit_rician_ml(samples: Vec<f64>) -> PyResult<(f64, f64)> {
    let fit = rician::fit_rician_ml(&samples).py()?;
    Ok((fit.nu(), fit.phi()))
}

#[pyfunction]
fn distance_map(coil: &PyCoil, rows: usize, cols: usize) -> PyResult<PyImage> {
    Ok(PyImage(erc::distance_map(&coil.0, rows, cols).py()?))
}

#[pyfunction]
#[pyo3(signature = (image, dmap, profile, window_radius = erc::DEFAULT_WINDOW_RADIUS))]
fn fit_scale_map(
    py: Python<'_>,
    image: &PyImage,
    dmap: &PyImage,
    profile: &PyProfile,
    window_radius: usize,
) -> PyResult<PyScaleMap> {
    let (image, dmap, profile) = (&image.0, &dmap.0, &profile.0);
    let map = py.detach(|| erc::fit_scale_map(image, dmap, profile, window_radius));
    Ok(PyScaleMap(map.py()?))
}

#[pyfunction]
fn log_acceptance(patch_k: Vec<f64>, patch_0: Vec<f64>, phi0: f64) -> PyResult<f64> {
    sampler::log_acceptance(&patch_k, &patch_0, phi0).py()
}

#[pyfunction]
#[pyo3(signature = (image, scale_map, config = None))]
fn reconstruct(
    py: Python<'_>,
    image: &PyImage,
    scale_map: &PyScaleMap,
    config: Option<&PySamplerConfig>,
) -> PyResult<PyImage> {
    let cfg = config.map(|c| c.0).unwrap_or_default();
    let (image, map) = (&image.0, &scale_map.0);
    let out = py.detach(|| sampler::reconstruct(image, map, &cfg, None));
    Ok(PyImage(out.py()?))
}

#[pyfunction]
#[pyo3(signature = (spec = None))]
fn generate_phantom(spec: Option<&PyPhantomSpec>) -> PyResult<PyImage> {
    let spec = spec.map(|s| s.0.clone()).unwrap_or_default();
    Ok(PyImage(phantom::generate_phantom(&spec).py()?))
}

#[pyfunction]
fn apply_nonstationary_rician(g: &PyImage, scale_map: &PyScaleMap, seed: u64) -> PyResult<PyImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(PyImage(phantom::apply_nonstationary_rician(&g.0, &scale_map.0, &mut rng).py()?))
}

/// `(background, prostate)` evaluation regions of a phantom.
#[pyfunction]
#[pyo3(signature = (spec = None))]
fn preset_regions(spec: Option<&PyPhantomSpec>) -> PyResult<(PyRegionMask, PyRegionMask)> {
    let spec = spec.map(|s| s.0.clone()).unwrap_or_default();
    let (bg, pr) = phantom::preset_regions(&spec).py()?;
    Ok((PyRegionMask(bg), PyRegionMask(pr)))
}

#[pyfunction]
#[pyo3(signature = (spec = None))]
fn gland_mask(spec: Option<&PyPhantomSpec>) -> PyResult<PyRegionMask> {
    let spec = spec.map(|s| s.0.clone()).unwrap_or_default();
    Ok(PyRegionMask(phantom::gland_mask(&spec).py()?))
}

#[pyfunction]
fn snr_db(image: &PyImage, mask: &PyRegionMask) -> PyResult<f64> {
    metrics::snr_db(&image.0, &mask.0).py()
}

/// CNR in dB; `background` supplies the noise standard deviation.
#[pyfunction]
fn cnr_db(image: &PyImage, background: &PyRegionMask, other: &PyRegionMask) -> PyResult<f64> {
    metrics::cnr_db(&image.0, &background.0, &other.0).py()
}

#[pyfunction]
fn edge_preservation(v: &PyImage, g_hat: &PyImage, mask: &PyRegionMask) -> PyResult<f64> {
    metrics::edge_preservation(&v.0, &g_hat.0, &mask.0).py()
}

/// Rank sum of an evaluator x slice score matrix (scores 1-5).
#[pyfunction]
fn rank_sum(scores: Vec<Vec<u8>>) -> PyResult<u64> {
    let evaluators = scores.len();
    let slices = scores.first().map_or(0, Vec::len);
    if scores.iter().any(|r| r.len() != slices) {
        return Err(AcerError::new_err("score rows have unequal lengths"));
    }
    let matrix = metrics::ScoreMatrix::new(evaluators, slices, scores.concat()).py()?;
    Ok(metrics::rank_sum(&matrix))
}

#[pyfunction]
fn f_pseudosigma(values: Vec<f64>) -> PyResult<f64> {
    metrics::f_pseudosigma(&values).py()
}

/// Paired t-test: `(t, dof, two-tailed p)`.
#[pyfunction]
fn paired_t_test(method: Vec<f64>, reference: Vec<f64>) -> PyResult<(f64, usize, f64)> {
    let t = metrics::paired_t_test(&method, &reference).py()?;
    Ok((t.t, t.dof, t.p_value))
}

#[pyfunction]
fn paired_p_value(method: Vec<f64>, reference: Vec<f64>) -> PyResult<f64> {
    metrics::paired_p_value(&method, &reference).py()
}

#[pyfunction]
fn read_image(path: PathBuf) -> PyResult<PyImage> {
    Ok(PyImage(io::read_image(&path).py()?))
}

#[pyfunction]
fn write_image(path: PathBuf, image: &PyImage) -> PyResult<()> {
    io::write_image(&path, &image.0).py()
}

#[pyfunction]
fn read_mask(path: PathBuf) -> PyResult<PyRegionMask> {
    Ok(PyRegionMask(io::read_mask(&path).py()?))
}

#[pyfunction]
fn write_mask(path: PathBuf, mask: &PyRegionMask) -> PyResult<()> {
    io::write_mask(&path, &mask.0).py()
}

#[pymodule]
fn acer(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AcerError", m.py().get_type::<AcerError>())?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyRegionMask>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyCoil>()?;
    m.add_class::<PyScaleMap>()?;
    m.add_class::<PySamplerConfig>()?;
    m.add_class::<PyPhantomSpec>()?;
    m.add_function(wrap_pyfunction!(rician_log_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(sample_rician, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rician_ml, m)?)?;
    m.add_function(wrap_pyfunction!(distance_map, m)?)?;
    m.add_function(wrap_pyfunction!(fit_scale_map, m)?)?;
    m.add_function(wrap_pyfunction!(log_acceptance, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(generate_phantom, m)?)?;
    m.add_function(wrap_pyfunction!(apply_nonstationary_rician, m)?)?;
    m.add_function(wrap_pyfunction!(preset_regions, m)?)?;
    m.add_function(wrap_pyfunction!(gland_mask, m)?)?;
    m.add_function(wrap_pyfunction!(snr_db, m)?)?;
    m.add_function(wrap_pyfunction!(cnr_db, m)?)?;
    m.add_function(wrap_pyfunction!(edge_preservation, m)?)?;
    m.add_function(wrap_pyfunction!(rank_sum, m)?)?;
    m.add_function(wrap_pyfunction!(f_pseudosigma, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(paired_p_value, m)?)?;
    m.add_function(wrap_pyfunction!(read_image, m)?)?;
    m.add_function(wrap_pyfunction!(write_image, m)?)?;
    m.add_function(wrap_pyfunction!(read_mask, m)?)?;
    m.add_function(wrap_pyfunction!(write_mask, m)?)?;
    Ok(())
}
