use acer_core::metrics::{self, RegionMask};
use acer_core::rician::{rician_log_pdf, RicianParams};
use acer_core::Image;
use proptest::prelude::*;

fn image(values: &[f64]) -> Image {
    Image::from_vec(8, 8, 1.0, values.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn snr_and_cnr_are_scale_invariant(values in prop::collection::vec(1.0f64..500.0, 64), k in 0.1f64..50.0) {
        let bg = RegionMask::rect(8, 8, 0, 0, 4, 8).unwrap();
        let pr = RegionMask::rect(8, 8, 4, 0, 8, 8).unwrap();
        let a = image(&values);
        let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
        let b = image(&scaled);
        let (s0, s1) = (metrics::snr_db(&a, &bg).unwrap(), metrics::snr_db(&b, &bg).unwrap());
        prop_assert!((s0 - s1).abs() < 1e-9);
        let (c0, c1) = (metrics::cnr_db(&a, &bg, &pr).unwrap(), metrics::cnr_db(&b, &bg, &pr).unwrap());
        prop_assert!((c0 - c1).abs() < 1e-9 || (c0.is_infinite() && c1.is_infinite()));
    }

    #[test]
    fn paired_p_value_is_symmetric(pairs in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 3..20)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let (Ok(p), Ok(q)) = (metrics::paired_p_value(&a, &b), metrics::paired_p_value(&b, &a)) {
            prop_assert!((p - q).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn rician_log_pdf_is_finite_and_bounded(x in 0.0f64..1e4, nu in 0.0f64..1e4, phi in 0.1f64..1e3) {
        let lp = rician_log_pdf(x, RicianParams::new(nu, phi).unwrap()).unwrap();
        prop_assert!(!lp.is_nan());
        prop_assert!(lp < 0.5 - phi.ln() + 1.0);
    }
}
