use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;

use weakval::grid::l2_distance;
use weakval::protocol::ProtocolParams;
use weakval::{
    build_rho_alpha, evolve_joint, evolve_sequential, final_amplitudes, moments, pointer_std,
    postselect_probability, second_moment, wv_single, wv_single_trace, wv_sum, DoubleDouble,
    GridSpec, Params, ParamsDD,
};

fn dd(x: f64) -> DoubleDouble {
    DoubleDouble::from_f64(x)
}

fn angle() -> impl Strategy<Value = f64> {
    -3.2f64..3.2
}

fn width() -> impl Strategy<Value = f64> {
    (-1.5f64..2.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pre_and_post_selection_are_interchangeable(n in 1u32..=12, a in angle(), b in angle(), d in width()) {
        let p = Params::new(n, a, b, d).unwrap();
        let q = Params::new(n, b, a, d).unwrap();
        prop_assert_eq!(wv_sum(&p), wv_sum(&q));
        prop_assert_eq!(pointer_std(&p), pointer_std(&q));
        prop_assert_eq!(postselect_probability(&p), postselect_probability(&q));
    }

    #[test]
    fn complementary_angles_flip_the_sign(n in 1u32..=12, a in angle(), b in angle(), d in width()) {
        let half_pi = dd(FRAC_PI_2) + dd(6.123233995736766e-17);
        let p = ParamsDD::new(n, dd(a), dd(b), dd(d)).unwrap();
        let q = ParamsDD::new(n, half_pi - dd(a), half_pi - dd(b), dd(d)).unwrap();
        let prob = postselect_probability(&p).unwrap().hi();
        prop_assume!(prob > 1e-8);
        let (wp, wq) = (wv_sum(&p).unwrap().hi(), wv_sum(&q).unwrap().hi());
        prop_assert!((wp + wq).abs() <= 1e-12 * (1.0 + wp.abs()), "{} {}", wp, wq);
        let (sp, sq) = (pointer_std(&p).unwrap().hi(), pointer_std(&q).unwrap().hi());
        prop_assert!((sp - sq).abs() <= 1e-12 * (1.0 + sp));
        let prob_q = postselect_probability(&q).unwrap().hi();
        prop_assert!((prob - prob_q).abs() <= 1e-12 * prob);
    }

    #[test]
    fn probability_is_a_probability(n in 1u32..=30, a in angle(), b in angle(), d in width()) {
        let p = Params::new(n, a, b, d).unwrap();
        if let Ok(prob) = postselect_probability(&p) {
            prop_assert!(prob > 0.0 && prob <= 1.0);
        }
    }

    #[test]
    fn variance_is_nonnegative(n in 1u32..=30, a in angle(), b in angle(), d in width()) {
        let p = Params::new(n, a, b, d).unwrap();
        if let (Ok(std), Ok(m2)) = (pointer_std(&p), second_moment(&p)) {
            prop_assert!(std >= 0.0 && std.is_finite());
            prop_assert!(m2 >= std * std * (1.0 - 1e-9));
        }
    }

    #[test]
    fn overlap_moments_agree_with_binomial_sums(n in 1u32..=12, a in angle(), b in angle(), d in width()) {
        let p = ParamsDD::new(n, dd(a), dd(b), dd(d)).unwrap();
        let (Ok(wv), Ok(m2)) = (wv_sum(&p), second_moment(&p)) else { return Ok(()) };
        let (mean, second) = final_amplitudes(&p).moments().unwrap();
        let (wv, m2, mean, second) = (wv.hi(), m2.hi(), mean.hi(), second.hi());
        prop_assert!((mean - wv).abs() <= 1e-10 * (1.0 + wv.abs()), "{} {}", mean, wv);
        prop_assert!((second - m2).abs() <= 1e-10 * (1.0 + m2.abs()), "{} {}", second, m2);
    }

    #[test]
    fn one_block_reduces_to_single_weak_value(a in angle(), b in angle(), d in width()) {
        let p = Params::new(1, a, b, d).unwrap();
        if let Ok(single) = wv_single(a, b, d) {
            prop_assert!((wv_sum(&p).unwrap() - single).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_form_matches_closed_form(a in angle(), b in angle(), d in width()) {
        let (Ok(closed), Ok(traced)) = (
            wv_single(dd(a), dd(b), dd(d)),
            wv_single_trace(dd(a), dd(b), dd(d)),
        ) else { return Ok(()) };
        let (closed, traced) = (closed.hi(), traced.hi());
        prop_assert!((closed - traced).abs() <= 1e-12 * (1.0 + closed.abs()));
    }

    #[test]
    fn reduced_state_is_a_density_matrix(a in angle(), d in width()) {
        let rho = build_rho_alpha(a, d).unwrap();
        prop_assert!(rho.is_hermitian(1e-14));
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-14);
        let [lo, hi] = rho.eigenvalues();
        prop_assert!(lo >= -1e-14 && hi <= 1.0 + 1e-14);
    }

    #[test]
    fn strong_coupling_stays_in_the_spectrum(n in 1u32..=30, a in angle(), b in angle()) {
        let p = Params::new(n, a, b, 1e-3).unwrap();
        if let Ok(wv) = wv_sum(&p) {
            prop_assert!(wv.abs() <= f64::from(n) + 1e-6);
        }
    }

    #[test]
    fn single_precision_tracks_double(a in -1.5f32..1.5, b in -1.5f32..1.5, d in 0.5f32..20.0) {
        let p = ProtocolParams::<f32>::new(3, a, b, d).unwrap();
        let q = Params::new(3, f64::from(a), f64::from(b), f64::from(d)).unwrap();
        let prob = postselect_probability(&q).unwrap();
        prop_assume!(prob > 1e-2);
        let (w32, w64) = (wv_sum(&p).unwrap(), wv_sum(&q).unwrap());
        prop_assert!((f64::from(w32) - w64).abs() <= 1e-3 * (1.0 + w64.abs()), "{} {}", w32, w64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sequential_and_joint_grids_agree(n in 1u32..=4, a in angle(), b in angle(), d in 0.5f64..4.0) {
        let p = Params::new(n, a, b, d).unwrap();
        prop_assume!(postselect_probability(&p).map(|x| x > 1e-10).unwrap_or(false));
        let spec = GridSpec::for_params(&p, 0.05).unwrap();
        let seq = evolve_sequential(&p, spec).unwrap();
        let joint = evolve_joint(&p, spec).unwrap();
        prop_assert!(l2_distance(&seq.wavefunction, &joint.wavefunction).unwrap() < 1e-9);
        prop_assert!((seq.probability - joint.probability).abs() <= 1e-12 * seq.probability.max(1e-300) + 1e-15);
    }

    #[test]
    fn grid_moments_match_closed_forms(n in 1u32..=7, a in angle(), b in angle(), d in 0.5f64..6.0) {
        let p = Params::new(n, a, b, d).unwrap();
        let q = ParamsDD::new(n, dd(a), dd(b), dd(d)).unwrap();
        prop_assume!(postselect_probability(&q).map(|x| x.hi() > 1e-8).unwrap_or(false));
        let e = evolve_sequential(&p, GridSpec::for_params(&p, 0.05).unwrap()).unwrap();
        let (mean, std) = moments(&e.wavefunction);
        let (wv, sd) = (wv_sum(&q).unwrap().hi(), pointer_std(&q).unwrap().hi());
        prop_assert!((mean - wv).abs() < 1e-8 * (1.0 + wv.abs()), "{} {}", mean, wv);
        prop_assert!((std - sd).abs() < 1e-8 * (1.0 + sd), "{} {}", std, sd);
        let prob = postselect_probability(&q).unwrap().hi();
        prop_assert!((e.probability - prob).abs() <= 1e-9 * prob);
    }
}

#[test]
fn under_resolved_pointer_converges_faster_than_second_order() {
    let p = Params::new(1, 0.3, 2.0, 0.08).unwrap();
    let q = ParamsDD::new(1, dd(0.3), dd(2.0), dd(0.08)).unwrap();
    let exact = pointer_std(&q).unwrap().hi();
    let err = |dx: f64| {
        let e = evolve_sequential(&p, GridSpec::for_params(&p, dx).unwrap()).unwrap();
        (moments(&e.wavefunction).1 - exact).abs()
    };
    let (coarse, fine) = (err(0.1), err(0.05));
    assert!(coarse > 1e-8, "{coarse}");
    assert!(fine <= coarse / 4.0, "{coarse} -> {fine}");
    assert!((coarse / fine.max(1e-300)).log2() >= 2.0);
}
