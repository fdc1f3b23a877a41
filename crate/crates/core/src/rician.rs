//! Rician distribution kernels: log-density, sampling and maximum-likelihood fitting.
//!
//! Everything is evaluated in the log domain. Products of many densities (patch
//! likelihoods) and large `x * nu / phi^2` arguments never leave f64 range.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bessel::{ln_i0_scaled, ln_i1_scaled};
use crate::error::{Error, Result};

pub use crate::bessel::{log_bessel_i0, log_bessel_i0_scaled};

/// Signal amplitude `nu >= 0` and noise scale `phi > 0` of a Rician law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianParams {
    nu: f64,
    phi: f64,
}

impl RicianParams {
    pub fn new(nu: f64, phi: f64) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::invalid(format!("nu must be finite and >= 0, got {nu}")));
        }
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::invalid(format!("phi must be finite and > 0, got {phi}")));
        }
        Ok(Self { nu, phi })
    }

    #[inline]
    pub fn nu(&self) -> f64 {
        self.nu
    }

    #[inline]
    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// `ln f(x | nu, phi)` for `x > 0`.
pub fn rician_log_pdf(x: f64, params: RicianParams) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!(
            "Rician density is defined for finite x > 0, got {x}"
        )));
    }
    Ok(log_pdf(x, params.nu, params.phi))
}

/// Unchecked log-density. The exponent is folded as `-(x - nu)^2 / (2 phi^2)`
/// plus the exponentially scaled Bessel term, so no intermediate overflows or
/// cancels catastrophically when `x * nu / phi^2` is large.
#[inline]
pub(crate) fn log_pdf(x: f64, nu: f64, phi: f64) -> f64 {
    let phi2 = phi * phi;
    let diff = x - nu;
    (x / phi2).ln() - diff * diff / (2.0 * phi2) + ln_i0_scaled(x * nu / phi2)
}

/// Draws `|nu + a + i b|` with `a, b ~ N(0, phi^2)`.
pub fn sample_rician<R: Rng + ?Sized>(params: RicianParams, rng: &mut R) -> f64 {
    let a: f64 = rng.sample::<f64, _>(StandardNormal) * params.phi;
    let b: f64 = rng.sample::<f64, _>(StandardNormal) * params.phi;
    (params.nu + a).hypot(b)
}

/// Fewest samples accepted by [`fit_rician_ml`].
pub const MIN_FIT_SAMPLES: usize = 8;

/// Parameter tolerance of the golden-section refinement (relative to the data scale).
const PARAM_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 200;

/// Likelihood-ratio threshold for keeping `nu > 0`: the BIC penalty `ln n` of
/// one extra parameter.
fn lr_critical(n: usize) -> f64 {
    (n as f64).ln()
}

/// Maximum-likelihood `(nu, phi)` for a sample of positive magnitudes.
///
/// Starts from the method-of-moments solution (mean and second moment) and
/// refines it by alternating golden-section searches over the SNR `nu / phi`
/// and the log second moment `ln(nu^2 + 2 phi^2)`. The Rayleigh model
/// (`nu = 0`, `phi^2 = sum x^2 / 2n`) is reported instead whenever the extra
/// amplitude parameter does not pay for itself under the Bayesian information
/// criterion (twice the log-likelihood gain must exceed `ln n`).
/// The same test snaps the moment initializer, so the returned fit is never
/// less likely than its starting point.
pub fn fit_rician_ml(samples: &[f64]) -> Result<RicianParams> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "Rician fit needs at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!(
            "Rician fit needs finite positive samples, found {bad}"
        )));
    }
    Ok(fit_unchecked(samples))
}

pub(crate) fn log_likelihood(samples: &[f64], nu: f64, phi: f64) -> f64 {
    samples.iter().map(|&x| log_pdf(x, nu, phi)).sum()
}

fn fit_unchecked(samples: &[f64]) -> RicianParams {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| x * x).sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;

    let rayleigh_phi = (0.5 * m2).sqrt();
    let ll_rayleigh = log_likelihood(samples, 0.0, rayleigh_phi);

    if var <= 0.0 {
        // All samples identical: the likelihood is unbounded as phi -> 0.
        return RicianParams {
            nu: mean,
            phi: mean * f64::EPSILON,
        };
    }

    let start = initial_point(samples, m2, var, ll_rayleigh);
    let ll_start = log_likelihood(samples, start.nu, start.phi);

    let best = refine(samples, start, ll_start);
    let ll_best = log_likelihood(samples, best.nu, best.phi);

    if 2.0 * (ll_best - ll_rayleigh) <= lr_critical(samples.len()) {
        RicianParams {
            nu: 0.0,
            phi: rayleigh_phi,
        }
    } else {
        RicianParams {
            nu: best.nu,
            phi: best.phi,
        }
    }
}

/// Method-of-moments start, snapped to the Rayleigh solution when the moment
/// estimate itself does not beat it under the same criterion.
fn initial_point(samples: &[f64], m2: f64, var: f64, ll_rayleigh: f64) -> Point {
    let moments = Point::new(moment_snr(var / m2), m2.ln());
    let ll_moments = log_likelihood(samples, moments.nu, moments.phi);
    if 2.0 * (ll_moments - ll_rayleigh) <= lr_critical(samples.len()) {
        Point::new(0.0, m2.ln())
    } else {
        moments
    }
}

/// A candidate in the search coordinates (SNR, log second moment).
#[derive(Debug, Clone, Copy)]
struct Point {
    snr: f64,
    log_m2: f64,
    nu: f64,
    phi: f64,
}

impl Point {
    fn new(snr: f64, log_m2: f64) -> Self {
        let phi = (log_m2.exp() / (snr * snr + 2.0)).sqrt();
        Self {
            snr,
            log_m2,
            nu: snr * phi,
            phi,
        }
    }
}

fn refine(samples: &[f64], start: Point, ll_start: f64) -> Point {
    let mut cur = start;
    let mut ll = ll_start;
    let mut snr_width = (0.5 * cur.snr).max(0.5);
    let mut m2_width = 0.5;

    for _ in 0..MAX_SWEEPS {
        let prev = cur;

        let log_m2 = cur.log_m2;
        let (snr, snr_ll) = bracketed_max(
            |s| {
                let p = Point::new(s, log_m2);
                log_likelihood(samples, p.nu, p.phi)
            },
            cur.snr,
            &mut snr_width,
            0.0,
            PARAM_TOL * cur.snr.max(1.0),
        );
        if snr_ll > ll {
            cur = Point::new(snr, log_m2);
            ll = snr_ll;
        }

        let snr = cur.snr;
        let (log_m2, m2_ll) = bracketed_max(
            |t| {
                let p = Point::new(snr, t);
                log_likelihood(samples, p.nu, p.phi)
            },
            cur.log_m2,
            &mut m2_width,
            f64::NEG_INFINITY,
            PARAM_TOL,
        );
        if m2_ll > ll {
            cur = Point::new(snr, log_m2);
            ll = m2_ll;
        }

        let scale = cur.nu.max(cur.phi);
        if (cur.nu - prev.nu).abs() <= PARAM_TOL * scale
            && (cur.phi - prev.phi).abs() <= PARAM_TOL * scale
        {
            break;
        }
        snr_width = (4.0 * (cur.snr - prev.snr).abs()).max(PARAM_TOL * cur.snr.max(1.0) * 16.0);
        m2_width = (4.0 * (cur.log_m2 - prev.log_m2).abs()).max(PARAM_TOL * 16.0);
    }
    cur
}

/// Golden-section maximum of `f` on `[center - width, center + width]`
/// (clipped below at `floor`). The window grows while the optimum sits on an
/// open edge of it.
fn bracketed_max(
    f: impl Fn(f64) -> f64,
    center: f64,
    width: &mut f64,
    floor: f64,
    tol: f64,
) -> (f64, f64) {
    loop {
        let lo = (center - *width).max(floor);
        let hi = center + *width;
        let (x, fx) = golden_max(&f, lo, hi, tol);
        let edge = 4.0 * tol;
        let at_low = x - lo <= edge && lo > floor;
        let at_high = hi - x <= edge;
        if (at_low || at_high) && *width < 1e6 * center.abs().max(1.0) {
            *width *= 4.0;
            continue;
        }
        return (x, fx);
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Population variance over second moment, `var / E[x^2]`, of a Rician law
/// with SNR `theta = nu / phi`.
fn variance_ratio(theta: f64) -> f64 {
    let t = 0.5 * theta * theta;
    if theta > 40.0 {
        // high-SNR expansion of the mean avoids cancellation in 1 - mean^2/m2
        return (1.0 - 1.0 / (2.0 * theta * theta)) / (theta * theta + 2.0);
    }
    // E[x] / phi = sqrt(pi/2) * L_{1/2}(-t), with the Laguerre function written
    // through exponentially scaled Bessel functions of argument t/2.
    let half = 0.5 * t;
    let i0 = ln_i0_scaled(half).exp();
    let i1 = if half > 0.0 { ln_i1_scaled(half).exp() } else { 0.0 };
    let laguerre = (1.0 + t) * i0 + t * i1;
    let mean_sq = std::f64::consts::FRAC_PI_2 * laguerre * laguerre;
    1.0 - mean_sq / (theta * theta + 2.0)
}

/// Inverts [`variance_ratio`] by bisection on `ln theta`.
fn moment_snr(ratio: f64) -> f64 {
    let rayleigh = variance_ratio(0.0);
    if ratio >= rayleigh {
        return 0.0;
    }
    let (mut lo, mut hi) = (-12.0_f64, 25.0_f64);
    if variance_ratio(hi.exp()) > ratio {
        return hi.exp();
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if variance_ratio(mid.exp()) > ratio {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn series_i0(z: f64) -> f64 {
        let q = 0.25 * z * z;
        let (mut term, mut sum) = (1.0_f64, 1.0_f64);
        for k in 1..60 {
            term *= q / ((k * k) as f64);
            sum += term;
        }
        sum
    }

    fn direct_pdf(x: f64, nu: f64, phi: f64) -> f64 {
        x / (phi * phi) * (-(x * x + nu * nu) / (2.0 * phi * phi)).exp() * series_i0(x * nu / (phi * phi))
    }

    fn params(nu: f64, phi: f64) -> RicianParams {
        RicianParams::new(nu, phi).unwrap()
    }

    /// Composite Simpson over (0, upper] with `n` panels.
    fn simpson(f: impl Fn(f64) -> f64, upper: f64, n: usize) -> f64 {
        let h = upper / n as f64;
        let mut acc = f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn rayleigh_point_value() {
        assert_eq!(rician_log_pdf(1.0, params(0.0, 1.0)).unwrap(), -0.5);
    }

    #[test]
    fn matches_direct_evaluation() {
        let got = rician_log_pdf(2.0, params(2.0, 1.0)).unwrap();
        let want = 2.0_f64.ln() - 4.0 + series_i0(4.0).ln();
        assert!((got - want).abs() < 1e-13);
        assert!((got - (-0.881_880_023_924_595)).abs() < 1e-12);
        for &(x, nu, phi) in &[(0.3, 1.0, 0.7), (5.0, 4.0, 2.0), (12.0, 10.0, 3.0)] {
            let got = rician_log_pdf(x, params(nu, phi)).unwrap();
            assert!((got - direct_pdf(x, nu, phi).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let p = params(3.0, 1.0);
        let total = simpson(|x| rician_log_pdf(x, p).unwrap().exp(), 3.0 + 12.0, 20_000);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn rayleigh_reduction() {
        for &(x, phi) in &[(0.1, 1.0), (2.5, 0.3), (40.0, 17.0)] {
            let got = rician_log_pdf(x, params(0.0, phi)).unwrap();
            let want = (x / (phi * phi)).ln() - x * x / (2.0 * phi * phi);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn no_overflow_for_large_arguments() {
        // x * nu / phi^2 = 1e8 and far beyond
        let v = rician_log_pdf(1e4, params(1e4, 1.0)).unwrap();
        assert!(v.is_finite());
        let v = rician_log_pdf(50.0, params(50.0, 1e-7)).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(rician_log_pdf(0.0, params(1.0, 1.0)), Err(Error::Domain(_))));
        assert!(matches!(rician_log_pdf(-1.0, params(1.0, 1.0)), Err(Error::Domain(_))));
        assert!(RicianParams::new(-1.0, 1.0).is_err());
        assert!(RicianParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn noiseless_limit_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = sample_rician(params(5.0, 1e-12), &mut rng);
            assert!((x - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rayleigh_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = params(0.0, 2.0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_rician(p, &mut rng)).sum::<f64>() / n as f64;
        let want = 2.0 * (std::f64::consts::PI / 2.0).sqrt();
        assert!((mean - want).abs() < 0.01, "{mean} vs {want}");
    }

    #[test]
    fn empirical_cdf_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = params(4.0, 1.0);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_rician(p, &mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        // CDF table by cumulative Simpson on a fine grid
        let upper = 4.0 + 12.0;
        let steps = 32_000;
        let h = upper / steps as f64;
        let pdf = |x: f64| if x > 0.0 { rician_log_pdf(x, p).unwrap().exp() } else { 0.0 };
        let mut cdf = vec![0.0; steps + 1];
        for i in 0..steps {
            let a = i as f64 * h;
            cdf[i + 1] = cdf[i] + h / 6.0 * (pdf(a) + 4.0 * pdf(a + 0.5 * h) + pdf(a + h));
        }
        let mut ks: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let pos = (x / h).min(steps as f64 - 1.0);
            let k = pos.floor() as usize;
            let frac = pos - k as f64;
            let model = cdf[k] + frac * (cdf[k + 1] - cdf[k]);
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            ks = ks.max((model - lo).abs()).max((model - hi).abs());
        }
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(fit_rician_ml(&[1.0; 7]), Err(Error::InsufficientData(_))));
        let mut xs = vec![1.0; 10];
        xs[3] = 0.0;
        assert!(matches!(fit_rician_ml(&xs), Err(Error::Domain(_))));
    }

    #[test]
    fn fit_rayleigh_closed_form() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..10_000).map(|_| sample_rician(params(0.0, 3.0), &mut rng)).collect();
            let fit = fit_rician_ml(&xs).unwrap();
            let closed = xs.iter().map(|x| x * x).sum::<f64>() / (2.0 * xs.len() as f64);
            assert!((fit.phi() * fit.phi() - closed).abs() < 1e-6, "seed {seed}: {fit:?} vs {}", closed.sqrt());
            assert!(fit.nu() < 0.05 * fit.phi(), "seed {seed}: nu {}", fit.nu());
        }
    }

    #[test]
    fn fit_recovers_high_snr_parameters() {
        let mut pass = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let xs: Vec<f64> = (0..10_000).map(|_| sample_rician(params(100.0, 10.0), &mut rng)).collect();
            let fit = fit_rician_ml(&xs).unwrap();
            if (95.0..=105.0).contains(&fit.nu()) && (9.5..=10.5).contains(&fit.phi()) {
                pass += 1;
            }
        }
        assert!(pass >= 19, "{pass}/20");
    }

    #[test]
    fn fit_degenerate_concentration() {
        let xs: Vec<f64> = (0..50).map(|i| 50.0 + if i % 2 == 0 { 1e-6 } else { -1e-6 }).collect();
        let fit = fit_rician_ml(&xs).unwrap();
        assert!((fit.nu() - 50.0).abs() < 1e-4, "{fit:?}");
        assert!(fit.phi() <= 1e-3);
    }

    #[test]
    fn fit_improves_on_moment_start() {
        for (seed, &(nu, phi)) in [(0.5, 1.0), (1.5, 1.0), (3.0, 2.0), (20.0, 1.0)].iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let xs: Vec<f64> = (0..200).map(|_| sample_rician(params(nu, phi), &mut rng)).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let ll_r = log_likelihood(&xs, 0.0, (0.5 * m2).sqrt());
            let start = initial_point(&xs, m2, var, ll_r);
            let fit = fit_rician_ml(&xs).unwrap();
            assert!(log_likelihood(&xs, fit.nu(), fit.phi()) >= log_likelihood(&xs, start.nu, start.phi));
        }
    }

    #[test]
    fn moment_inversion_round_trips() {
        for &theta in &[0.3, 1.0, 2.5, 8.0, 39.0, 41.0, 1e3] {
            let back = moment_snr(variance_ratio(theta));
            assert!((back - theta).abs() / theta < 1e-6, "{theta} -> {back}");
        }
    }

    #[test]
    fn fit_is_consistent() {
        // median absolute error of nu over seeds shrinks as n grows
        let median_err = |n: usize| {
            let mut errs: Vec<f64> = (0..9)
                .map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(77 + seed);
                    let xs: Vec<f64> = (0..n).map(|_| sample_rician(params(6.0, 2.0), &mut rng)).collect();
                    let fit = fit_rician_ml(&xs).unwrap();
                    (fit.nu() - 6.0).abs() + (fit.phi() - 2.0).abs()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            errs[errs.len() / 2]
        };
        let e3 = median_err(1_000);
        let e4 = median_err(10_000);
        let e5 = median_err(100_000);
        assert!(e3 > e4 && e4 > e5, "{e3} {e4} {e5}");
    }
}
