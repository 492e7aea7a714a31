use std::f64::consts::FRAC_PI_2;

use weakval::experiment::{analytic_row, trials_for_clicks, PRESETS};
use weakval::sim::{AnomalyReport, ClickSampler, RunSummary};
use weakval::{calibrate, cdf, evolve_sequential, Calibration, DetectorModel, GridSpec, Params};

// oracle: P(|x| > 7) for row (d)
const ROW_D_OUTSIDE_SPECTRUM: f64 = 0.067_313_563_639_778_32;
// oracle: P(|x − ⟨x⟩| > 4σ) for row (a)
const ROW_A_OUTSIDE_FOUR_WIDTHS: f64 = 0.0019126115576231329;

fn preset(i: usize) -> Params {
    let (_, a, b, d) = PRESETS[i];
    Params::new(7, a, b, d).unwrap()
}

fn sampler(p: &Params, pitch: f64) -> ClickSampler {
    let spec = GridSpec::for_params(p, 0.01).unwrap();
    ClickSampler::new(p, spec, DetectorModel::new(pitch, 0.0).unwrap()).unwrap()
}

/// Standard error of the sample standard deviation, from the histogram's
/// fourth central moment.
fn std_stderr(run: &RunSummary) -> f64 {
    let s = run.statistics.unwrap();
    let n = run.accepted as f64;
    let m4 = run
        .histogram
        .iter()
        .map(|&(x, c)| c as f64 * (x - s.mean).powi(4))
        .sum::<f64>()
        / n;
    let var = s.std * s.std;
    ((m4 - var * var) / (4.0 * var * n)).sqrt()
}

#[test]
fn ensemble_statistics_converge_for_every_row() {
    for i in 0..4 {
        let p = preset(i);
        let (wv, std, prob) = analytic_row(&p).unwrap();
        let run = sampler(&p, 0.1)
            .run(100 + i as u64, trials_for_clicks(100_000, prob))
            .unwrap();
        assert!(run.accepted >= 95_000);
        let s = run.statistics.unwrap();
        assert!(
            (s.mean - wv).abs() < 3.0 * s.stderr,
            "row {i}: {} vs {wv}",
            s.mean
        );
        assert!(
            (s.std - std).abs() < 3.0 * std_stderr(&run),
            "row {i}: {} vs {std}",
            s.std
        );
        assert_eq!(run.histogram.iter().map(|h| h.1).sum::<u64>(), run.accepted);
    }
}

#[test]
fn acceptance_rate_is_binomial() {
    for i in [2, 3] {
        let p = preset(i);
        let (_, _, prob) = analytic_row(&p).unwrap();
        let trials = 1_000_000u64;
        let run = sampler(&p, 0.1).run(9, trials).unwrap();
        let tol = 3.0 * (prob * (1.0 - prob) / trials as f64).sqrt();
        assert!((run.acceptance_rate() - prob).abs() < tol, "row {i}");
    }
}

#[test]
fn pixelation_bias_is_below_half_a_pixel() {
    let p = preset(0);
    let (_, _, prob) = analytic_row(&p).unwrap();
    for pitch in [0.1, 0.05, 0.01] {
        let run = sampler(&p, pitch)
            .run(21, trials_for_clicks(100_000, prob))
            .unwrap();
        let s = run.statistics.unwrap();
        assert!((s.mean - s.raw_mean).abs() < pitch / 2.0, "pitch {pitch}");
    }
}

#[test]
fn seeded_runs_repeat_exactly() {
    let p = preset(1);
    let s = sampler(&p, 0.1);
    let a = s.run(42, 30_000_000).unwrap();
    let b = s.run(42, 30_000_000).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, s.run(43, 30_000_000).unwrap());
    assert_eq!(s.first_click(42, 30_000_000).map(|c| c.1), a.first_click);
}

#[test]
fn row_a_mass_beyond_four_widths_matches_click_frequency() {
    // the conditional density is skewed: its left tail holds most of this
    let p = preset(0);
    let (wv, std, _) = analytic_row(&p).unwrap();
    let e = evolve_sequential(&p, GridSpec::for_params(&p, 0.01).unwrap()).unwrap();
    let c = cdf(&e.wavefunction);
    let outside = c.at(wv - 4.0 * std) + c.tail_above(wv + 4.0 * std);
    assert!(
        (outside - ROW_A_OUTSIDE_FOUR_WIDTHS).abs() < 1e-6,
        "{outside}"
    );
    let s = sampler(&p, 0.1);
    let seeds = 20_000u64;
    let far = (0..seeds)
        .filter(|&seed| {
            let (_, click) = s.first_click(seed, 1 << 40).unwrap();
            (click.raw_position - wv).abs() > 4.0 * std
        })
        .count() as f64;
    let tol = 3.0 * (outside * (1.0 - outside) / seeds as f64).sqrt();
    assert!((far / seeds as f64 - outside).abs() < tol, "{far}");
}

#[test]
fn row_d_clicks_are_rarely_anomalous() {
    let p = preset(3);
    let (_, std, _) = analytic_row(&p).unwrap();
    let e = evolve_sequential(&p, GridSpec::for_params(&p, 0.01).unwrap()).unwrap();
    let c = cdf(&e.wavefunction);
    let outside = c.at(-7.0) + c.tail_above(7.0);
    assert!((outside - ROW_D_OUTSIDE_SPECTRUM).abs() < 1e-6, "{outside}");
    let s = sampler(&p, 0.1);
    let seeds = 400;
    let anomalous = (0..seeds)
        .filter(|&seed| {
            let (_, click) = s.first_click(seed, 1_000).unwrap();
            AnomalyReport::for_position(click.position, 7, std).is_anomalous()
        })
        .count();
    assert!((anomalous as f64) < 0.1 * seeds as f64, "{anomalous}");
}

#[test]
fn calibration_from_simulated_eigenstates_recovers_the_weak_value() {
    // raw detector units: an arbitrary affine image of the calibrated axis
    let raw = Calibration::new(412.5, 37.25).unwrap();
    let det = DetectorModel::default();
    let anchor_mean = |alpha: f64| {
        let p = Params::new(7, alpha, alpha, 5.84).unwrap();
        let s = ClickSampler::new(&p, GridSpec::for_params(&p, 0.01).unwrap(), det).unwrap();
        raw.to_raw(s.run(5, 200_000).unwrap().statistics.unwrap().raw_mean)
    };
    let (raw_h, raw_v) = (anchor_mean(0.0), anchor_mean(FRAC_PI_2));
    let cal = calibrate(raw_v, raw_h, 7).unwrap();
    assert!((cal.scale() / raw.scale() - 1.0).abs() < 1e-3);

    let p = preset(0);
    let (wv, _, prob) = analytic_row(&p).unwrap();
    let run = sampler(&p, 0.1)
        .run(6, trials_for_clicks(100_000, prob))
        .unwrap();
    let s = run.statistics.unwrap();
    let recovered = cal.to_calibrated(raw.to_raw(s.raw_mean));
    // anchor noise enters through the offset and the scale
    let anchor_err = 5.84 / 200_000f64.sqrt() * (1.0 + wv / 7.0);
    assert!(
        (recovered - wv).abs() < 3.0 * (s.stderr + anchor_err),
        "{recovered} vs {wv}"
    );
    assert!((recovered - 18.7).abs() < 0.1);
}
