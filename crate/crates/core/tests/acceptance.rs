//! End-to-end acceptance checks, one line per criterion.

use std::process::{Command, ExitCode};
use std::time::Instant;

use acer_core::erc_profile::{distance_map, fit_scale_map, CoilGeometry, ErcSnrProfile, ScaleMap, DEFAULT_WINDOW_RADIUS};
use acer_core::metrics::{cnr_db, edge_preservation, f_pseudosigma, paired_p_value, rank_sum, snr_db, RegionMask, ScoreMatrix};
use acer_core::phantom::{apply_nonstationary_rician, generate_phantom, gland_mask, preset_regions, PhantomSpec};
use acer_core::rician::{fit_rician_ml, rician_log_pdf, sample_rician, RicianParams};
use acer_core::sampler::{log_acceptance, reconstruct, SamplerConfig};
use acer_core::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// Phantom SNR/CNR values per case (DWI b=0, DWI b=1000, T2).
const BG_ACER: [f64; 3] = [33.2, 27.5, 29.2];
const BG_ROVST: [f64; 3] = [32.0, 27.6, 27.0];
const BG_LMMSE: [f64; 3] = [31.6, 26.4, 27.6];
const BG_UC: [f64; 3] = [30.6, 25.9, 26.9];
const PR_ACER: [f64; 3] = [27.0, 27.3, 27.2];
const PR_ROVST: [f64; 3] = [26.8, 27.5, 26.7];
const PR_LMMSE: [f64; 3] = [26.7, 26.9, 26.9];
const PR_UC: [f64; 3] = [26.1, 25.7, 26.7];
const CNR_ACER: [f64; 3] = [27.1, 20.9, 19.7];
const CNR_ROVST: [f64; 3] = [25.9, 21.0, 17.6];
const CNR_UC: [f64; 3] = [24.5, 19.4, 17.5];

fn table_p_values() -> Outcome {
    let start = Instant::now();
    let cells: [(&str, &[f64; 3], &[f64; 3], f64); 8] = [
        ("bg ACER", &BG_ACER, &BG_UC, 0.02),
        ("bg ROVST", &BG_ROVST, &BG_UC, 0.16),
        ("bg LMMSE", &BG_LMMSE, &BG_UC, 0.04),
        ("pr ACER", &PR_ACER, &PR_UC, 0.10),
        ("pr ROVST", &PR_ROVST, &PR_UC, 0.25),
        ("pr LMMSE", &PR_LMMSE, &PR_UC, 0.14),
        ("cnr ACER", &CNR_ACER, &CNR_UC, 0.02),
        ("cnr ROVST", &CNR_ROVST, &CNR_UC, 0.16),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, method, reference, want) in cells {
        let p = paired_p_value(method, reference).expect("non-degenerate pairs");
        pass &= (p - want).abs() <= 0.03;
        parts.push(format!("{name} {p:.3}/{want}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass &= elapsed < 1.0;
    outcome(pass, format!("{} in {elapsed:.3}s", parts.join(", ")))
}

struct PhantomRun {
    snr_gain: f64,
    cnr_gain: f64,
    noisy_snr: f64,
    ep: f64,
}

fn phantom_runs() -> (Vec<PhantomRun>, f64) {
    let start = Instant::now();
    let spec = PhantomSpec::default();
    let profile = ErcSnrProfile::rigid();
    let truth = generate_phantom(&spec).unwrap();
    let dmap = distance_map(&spec.coil, spec.rows, spec.cols).unwrap();
    let scale = ScaleMap::from_profile(&dmap, &profile, 9.0).unwrap();
    let (background, prostate) = preset_regions(&spec).unwrap();
    let gland = gland_mask(&spec).unwrap();
    let runs = (0..5)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy = apply_nonstationary_rician(&truth, &scale, &mut rng).unwrap();
            let fitted = fit_scale_map(&noisy, &dmap, &profile, DEFAULT_WINDOW_RADIUS).unwrap();
            let cfg = SamplerConfig {
                seed,
                ..Default::default()
            };
            let out = reconstruct(&noisy, &fitted, &cfg, None).unwrap();
            let noisy_snr = snr_db(&noisy, &background).unwrap();
            PhantomRun {
                snr_gain: snr_db(&out, &background).unwrap() - noisy_snr,
                cnr_gain: cnr_db(&out, &background, &prostate).unwrap()
                    - cnr_db(&noisy, &background, &prostate).unwrap(),
                noisy_snr,
                ep: edge_preservation(&noisy, &out, &gland).unwrap(),
            }
        })
        .collect();
    (runs, start.elapsed().as_secs_f64())
}

fn denoising_gain(runs: &[PhantomRun], seconds: f64) -> Outcome {
    let in_band = runs.iter().all(|r| (13.0..=17.0).contains(&r.noisy_snr));
    let all = runs.iter().all(|r| r.snr_gain >= 6.0 && r.cnr_gain >= 3.0);
    let detail = runs
        .iter()
        .map(|r| format!("V {:.1} dB: +{:.2}/+{:.2}", r.noisy_snr, r.snr_gain, r.cnr_gain))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(
        in_band && all && seconds < 120.0,
        format!("SNR/CNR gains (need +6/+3) {detail}; {seconds:.1}s"),
    )
}

fn acceptance_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut identity = true;
    for _ in 0..100 {
        let n = rng.random_range(1..50);
        let patch: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..500.0)).collect();
        let phi = rng.random_range(0.1..50.0);
        identity &= log_acceptance(&patch, &patch, phi).unwrap() == 0.0;
    }
    let mut bounded = true;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..10_000 {
        let n = rng.random_range(1..26);
        let p0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..300.0)).collect();
        let pk: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..300.0)).collect();
        let phi = rng.random_range(0.5..100.0);
        // alpha itself underflows f64 for dissimilar patches; alpha in (0, 1]
        // is exactly ln alpha finite and <= 0
        let log_alpha = log_acceptance(&pk, &p0, phi).unwrap();
        lo = lo.min(log_alpha);
        hi = hi.max(log_alpha);
        bounded &= log_alpha.is_finite() && log_alpha <= 0.0;
    }
    outcome(
        identity && bounded,
        format!("ln a(p,p)=0 on 100 patches: {identity}; ln alpha over 10^4 pairs in [{lo:.3e}, {hi}]"),
    )
}

fn density_normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let snr = 50.0 * i as f64 / 19.0;
        let phi = 0.5 + i as f64 * 0.7;
        let params = RicianParams::new(snr * phi, phi).unwrap();
        let upper = snr * phi + 15.0 * phi;
        let lower = (snr * phi - 15.0 * phi).max(0.0);
        let n = 200_000;
        let h = (upper - lower) / n as f64;
        let f = |x: f64| if x > 0.0 { rician_log_pdf(x, params).unwrap().exp() } else { 0.0 };
        let mut acc = f(lower) + f(upper);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(lower + k as f64 * h);
        }
        worst = worst.max((acc * h / 3.0 - 1.0).abs());
    }
    outcome(worst <= 1e-6, format!("max |integral - 1| = {worst:.2e} over 20 (nu/phi, phi) pairs"))
}

fn ml_recovery() -> Outcome {
    let params = RicianParams::new(100.0, 10.0).unwrap();
    let mut good = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..10_000).map(|_| sample_rician(params, &mut rng)).collect();
        let fit = fit_rician_ml(&samples).unwrap();
        if (fit.nu() / 100.0 - 1.0).abs() <= 0.05 && (fit.phi() / 10.0 - 1.0).abs() <= 0.05 {
            good += 1;
        }
    }
    let rayleigh = RicianParams::new(0.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let samples: Vec<f64> = (0..10_000).map(|_| sample_rician(rayleigh, &mut rng)).collect();
    let closed = (samples.iter().map(|x| x * x).sum::<f64>() / (2.0 * samples.len() as f64)).sqrt();
    let fit = fit_rician_ml(&samples).unwrap();
    let gap = (fit.phi() - closed).abs();
    outcome(
        good >= 19 && gap <= 1e-6,
        format!("(100,10) within 5% on {good}/20 seeds; Rayleigh |phi - closed form| = {gap:.1e}"),
    )
}

fn scale_map_fit() -> Outcome {
    let (rows, cols, spacing) = (128, 128, 0.6);
    let coil = CoilGeometry::segment((126.0, 44.0), (126.0, 84.0), spacing);
    let dmap = distance_map(&coil, rows, cols).unwrap();
    let zeros = Image::zeros(rows, cols, spacing).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, profile) in [("rigid", ErcSnrProfile::rigid()), ("inflatable", ErcSnrProfile::inflatable())] {
        let truth = ScaleMap::from_profile(&dmap, &profile, 4.0).unwrap();
        let mut good = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let noise = apply_nonstationary_rician(&zeros, &truth, &mut rng).unwrap();
            let fit = fit_scale_map(&noise, &dmap, &profile, DEFAULT_WINDOW_RADIUS).unwrap();
            if (fit.sigma0() / 4.0 - 1.0).abs() <= 0.10 {
                good += 1;
            }
        }
        pass &= good >= 18;
        parts.push(format!("{name} {good}/20"));
    }
    outcome(pass, format!("sigma0 within 10%: {}", parts.join(", ")))
}

fn edge_preservation_check(runs: &[PhantomRun]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v = Image::from_fn(64, 64, 1.0, |_, _| rng.random_range(0.0..100.0)).unwrap();
    let mask = RegionMask::rect(64, 64, 8, 8, 56, 56).unwrap();
    let self_ep = edge_preservation(&v, &v, &mask).unwrap();
    let min_ep = runs.iter().map(|r| r.ep).fold(f64::INFINITY, f64::min);
    outcome(
        (self_ep - 1.0).abs() <= 1e-12 && min_ep >= 0.85,
        format!("EP(v,v) - 1 = {:.1e}; phantom gland EP min {min_ep:.4} (need >= 0.85)", self_ep - 1.0),
    )
}

fn metric_goldens() -> Outcome {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    // mean 10, sample sd 1
    let img = Image::from_vec(1, 2, 1.0, vec![10.0 - a, 10.0 + a]).unwrap();
    let all = RegionMask::new(1, 2, vec![true, true]).unwrap();
    let snr = snr_db(&img, &all).unwrap();
    // background mean 10, sd 0.5; other region mean 5
    let h = 0.5 * a;
    let img = Image::from_vec(1, 4, 1.0, vec![10.0 - h, 10.0 + h, 5.0, 5.0]).unwrap();
    let bg = RegionMask::new(1, 4, vec![true, true, false, false]).unwrap();
    let other = RegionMask::new(1, 4, vec![false, false, true, true]).unwrap();
    let cnr = cnr_db(&img, &bg, &other).unwrap();
    let rs = rank_sum(&ScoreMatrix::new(7, 3, vec![3; 21]).unwrap());
    let fps = f_pseudosigma(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let fps0 = f_pseudosigma(&[4.0; 6]).unwrap();
    let pass = (snr - 20.0).abs() < 1e-9
        && (cnr - 20.0).abs() < 1e-9
        && rs == 63
        && (fps - 1.4826).abs() <= 1e-4
        && fps0 == 0.0;
    outcome(pass, format!("snr {snr:.6}, cnr {cnr:.6}, rank sum {rs}, F-pseudosigma {fps:.5} / {fps0}"))
}

const SMALL: &str = "\
phantom.rows = 64
phantom.cols = 64
phantom.prostate_center = 44,32
phantom.prostate_semi_axes_mm = 8,10
phantom.lesions = 44,24,1.5
phantom.urethra_center = 40,36
phantom.urethra_radius_mm = 1
phantom.wall_inner_mm = 1
phantom.wall_outer_mm = 3
coil.p0 = 62,26
coil.p1 = 62,38
";

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_acer");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap();
    let ph = dir.path().join("ph");
    let ok = Command::new(bin)
        .args(["--config", cfg, "--seed", "11", "phantom", "--out", ph.to_str().unwrap()])
        .stderr(std::process::Stdio::null())
        .status()
        .unwrap()
        .success();
    if !ok {
        return outcome(false, "phantom command failed".into());
    }
    let noisy = ph.join("noisy.pgm");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "8", "1", "8"].iter().enumerate() {
        let out = dir.path().join(format!("den{i}.pgm"));
        let ok = Command::new(bin)
            .args(["--config", cfg, "--seed", "42", "--threads", threads, "denoise"])
            .arg(&noisy)
            .arg("--out")
            .arg(&out)
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap()
            .success();
        if !ok {
            return outcome(false, format!("denoise --threads {threads} failed"));
        }
        outputs.push(std::fs::read(out).unwrap());
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(same, format!("4 runs (--threads 1/8/1/8) byte-identical: {same}"))
}

fn generative_moment() -> Outcome {
    let g = Image::filled(1000, 1000, 1.0, 50.0).unwrap();
    let scale = ScaleMap::constant(1000, 1000, 1.0, 5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let v = apply_nonstationary_rician(&g, &scale, &mut rng).unwrap();
    let m2 = v.as_slice().iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let rel = m2 / 2550.0 - 1.0;
    outcome(rel.abs() <= 0.01, format!("E[V^2] = {m2:.3} vs 2550 (rel {rel:+.2e}) on 10^6 draws"))
}

fn main() -> ExitCode {
    let (runs, seconds) = phantom_runs();
    let results = [
        table_p_values(),
        denoising_gain(&runs, seconds),
        acceptance_identity(),
        density_normalization(),
        ml_recovery(),
        scale_map_fit(),
        edge_preservation_check(&runs),
        metric_goldens(),
        cli_determinism(),
        generative_moment(),
    ];
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        println!("criterion {:>2}: {} — {}", i + 1, if r.pass { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
