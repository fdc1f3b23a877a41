"""Smoke test for the acer extension module."""

import math
import tempfile
from pathlib import Path

import acer


def main():
    lp = acer.rician_log_pdf(5.0, 4.0, 1.0)
    assert math.isfinite(lp) and lp < 0.0

    xs = acer.sample_rician(40.0, 5.0, 4000, seed=1)
    nu, phi = acer.fit_rician_ml(xs)
    assert abs(nu - 40.0) < 1.0 and abs(phi - 5.0) < 0.5, (nu, phi)

    profile = acer.ErcSnrProfile.rigid()
    assert profile.gain(0.0) > profile.gain(60.0)

    spec = acer.PhantomSpec()
    rows, cols = spec.shape
    truth = acer.generate_phantom(spec)
    dmap = acer.distance_map(spec.coil, rows, cols)
    smap = acer.ScaleMap.from_profile(dmap, profile, 9.0)
    noisy = acer.apply_nonstationary_rician(truth, smap, seed=7)
    bg, pr = acer.preset_regions(spec)
    snr = acer.snr_db(noisy, bg)
    cnr = acer.cnr_db(noisy, bg, pr)
    assert math.isfinite(snr) and math.isfinite(cnr)

    fitted = acer.fit_scale_map(noisy, dmap, profile)
    assert 5.0 < fitted.sigma0 < 15.0, fitted.sigma0

    small = acer.Image([[100.0 + (r * c) % 7 for c in range(24)] for r in range(24)])
    cfg = acer.SamplerConfig(search_radius=3, patch_radius=1, target_accepted=4, max_draws=32, seed=2)
    out = acer.reconstruct(small, acer.ScaleMap.constant(24, 24, 5.0), cfg)
    assert (out.rows, out.cols) == (24, 24)

    t, dof, p = acer.paired_t_test([33.2, 27.5, 29.2], [30.6, 25.9, 26.9])
    assert dof == 2 and abs(p - 0.02) < 0.005, p
    assert acer.rank_sum([[3, 3, 3]] * 7) == 63

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "img.raw"
        acer.write_image(path, small)
        back = acer.read_image(path)
        assert abs(back.get(3, 4) - small.get(3, 4)) < 1e-3

    try:
        acer.rician_log_pdf(1.0, 1.0, -1.0)
    except acer.AcerError:
        pass
    else:
        raise AssertionError("negative phi accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
