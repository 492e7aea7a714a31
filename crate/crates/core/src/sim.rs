//! Monte Carlo emulation of single photons through the protocol.
//!
//! A trial is one photon: it is absorbed by some post-selection with
//! probability `1 − p`, or it reaches the detector and clicks at a position
//! drawn from the conditional pointer density. Positions are drawn by
//! inverting the grid CDF of `|ψ|²`, so interference between the shifted
//! pointer components is reproduced exactly; the final density is not a
//! mixture of Gaussians.
//!
//! Runs are split into fixed blocks of [`TRIALS_PER_STREAM`] trials, each
//! with its own ChaCha stream derived from the master seed and the block
//! index. Within a block the accepted trials are located by geometric gaps
//! between successes, which is the same Bernoulli process as testing every
//! trial but costs one draw per accepted photon. This makes runs of 10¹¹
//! photons at `p ≈ 4·10⁻⁷` practical.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};
use crate::format::num;
use crate::grid::{cdf, evolve_sequential, Cdf, GridSpec};
use crate::protocol::{pointer_std, ProtocolParams};

pub const DEFAULT_PIXEL_PITCH: f64 = 0.1;

/// Trials sharing one random stream.
pub const TRIALS_PER_STREAM: u64 = 1 << 20;

/// Pixelated position-resolving detector in calibrated units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pixel_pitch: f64,
    origin: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            pixel_pitch: DEFAULT_PIXEL_PITCH,
            origin: 0.0,
        }
    }
}

impl DetectorModel {
    /// `origin` is the centre of pixel 0.
    pub fn new(pixel_pitch: f64, origin: f64) -> Result<Self> {
        if !(pixel_pitch > 0.0) || !pixel_pitch.is_finite() || !origin.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pixel pitch must be positive and finite, got {pixel_pitch}"
            )));
        }
        Ok(Self {
            pixel_pitch,
            origin,
        })
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn pixel_index(&self, x: f64) -> i64 {
        ((x - self.origin) / self.pixel_pitch).round() as i64
    }

    pub fn pixel_center(&self, index: i64) -> f64 {
        self.origin + index as f64 * self.pixel_pitch
    }

    /// Centre of the pixel containing `x`.
    pub fn pixelate(&self, x: f64) -> f64 {
        self.pixel_center(self.pixel_index(x))
    }
}

/// A detected photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Click {
    /// Pixel centre.
    pub position: f64,
    /// Continuous sample before pixelation.
    pub raw_position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClickOutcome {
    Absorbed,
    Click(Click),
}

impl ClickOutcome {
    pub fn click(&self) -> Option<&Click> {
        match self {
            ClickOutcome::Click(c) => Some(c),
            ClickOutcome::Absorbed => None,
        }
    }
}

/// Conditional pointer distribution prepared once for many trials.
#[derive(Debug, Clone)]
pub struct ClickSampler {
    probability: f64,
    cdf: Cdf<f64>,
    detector: DetectorModel,
}

impl ClickSampler {
    pub fn new(
        params: &ProtocolParams<f64>,
        spec: GridSpec,
        detector: DetectorModel,
    ) -> Result<Self> {
        let evolution = evolve_sequential(params, spec)?;
        Ok(Self {
            probability: evolution.probability.clamp(0.0, 1.0),
            cdf: cdf(&evolution.wavefunction),
            detector,
        })
    }

    /// Probability that a photon survives every post-selection.
    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn cdf(&self) -> &Cdf<f64> {
        &self.cdf
    }

    pub fn detector(&self) -> &DetectorModel {
        &self.detector
    }

    /// Position of a photon known to have survived.
    pub fn draw_click<R: Rng + ?Sized>(&self, rng: &mut R) -> Click {
        let raw_position = self.cdf.quantile(rng.random::<f64>());
        Click {
            position: self.detector.pixelate(raw_position),
            raw_position,
        }
    }

    /// One photon.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ClickOutcome {
        if rng.random::<f64>() < self.probability {
            ClickOutcome::Click(self.draw_click(rng))
        } else {
            ClickOutcome::Absorbed
        }
    }

    fn gaps(&self) -> Option<Geometric> {
        if self.probability > 0.0 {
            Geometric::new(self.probability).ok()
        } else {
            None
        }
    }

    /// Walks the accepted trials of stream `index`, calling `visit` with the
    /// global trial number. Stops early when `visit` returns false.
    fn walk_stream<F>(&self, seed: u64, index: u64, count: u64, mut visit: F)
    where
        F: FnMut(u64, Click) -> bool,
    {
        let Some(gaps) = self.gaps() else { return };
        let start = index * TRIALS_PER_STREAM;
        let len = TRIALS_PER_STREAM.min(count - start);
        let mut rng = stream_rng(seed, index);
        let mut pos = 0u64;
        loop {
            pos = pos.saturating_add(gaps.sample(&mut rng));
            if pos >= len {
                break;
            }
            let click = self.draw_click(&mut rng);
            if !visit(start + pos, click) {
                break;
            }
            pos += 1;
        }
    }

    fn stream_count(count: u64) -> u64 {
        count.div_ceil(TRIALS_PER_STREAM)
    }

    /// `count` photons from a seeded run.
    pub fn run(&self, seed: u64, count: u64) -> Result<RunSummary> {
        if count == 0 {
            return Err(Error::InvalidParameter(
                "trial count must be at least 1".into(),
            ));
        }
        let mut total = Accumulator::default();
        for index in 0..Self::stream_count(count) {
            let mut block = Accumulator::default();
            self.walk_stream(seed, index, count, |trial, click| {
                block.push(trial, click, &self.detector);
                true
            });
            total.merge(block);
        }
        Ok(total.finish(count, &self.detector))
    }

    /// First accepted photon of the same run [`ClickSampler::run`] would
    /// produce, without simulating the rest.
    pub fn first_click(&self, seed: u64, count: u64) -> Option<(u64, Click)> {
        for index in 0..Self::stream_count(count) {
            let mut found = None;
            self.walk_stream(seed, index, count, |trial, click| {
                found = Some((trial, click));
                false
            });
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One photon through the protocol. Builds the conditional distribution on
/// every call; use [`ClickSampler`] for repeated draws.
pub fn sample_click<R: Rng + ?Sized>(
    rng: &mut R,
    params: &ProtocolParams<f64>,
    spec: GridSpec,
    detector: DetectorModel,
) -> Result<ClickOutcome> {
    Ok(ClickSampler::new(params, spec, detector)?.sample(rng))
}

/// Seeded run of `count` photons.
pub fn run_trials(
    seed: u64,
    count: u64,
    params: &ProtocolParams<f64>,
    spec: GridSpec,
    detector: DetectorModel,
) -> Result<RunSummary> {
    ClickSampler::new(params, spec, detector)?.run(seed, count)
}

/// Order-independent streaming statistics over accepted clicks.
#[derive(Debug, Default)]
struct Accumulator {
    accepted: u64,
    first: Option<(u64, Click)>,
    mean: f64,
    m2: f64,
    raw_mean: f64,
    histogram: BTreeMap<i64, u64>,
}

impl Accumulator {
    fn push(&mut self, trial: u64, click: Click, detector: &DetectorModel) {
        if self.first.is_none() {
            self.first = Some((trial, click));
        }
        self.accepted += 1;
        let n = self.accepted as f64;
        let d = click.position - self.mean;
        self.mean += d / n;
        self.m2 += d * (click.position - self.mean);
        self.raw_mean += (click.raw_position - self.raw_mean) / n;
        *self
            .histogram
            .entry(detector.pixel_index(click.raw_position))
            .or_insert(0) += 1;
    }

    // Chan et al. pairwise update; `other` covers later trials.
    fn merge(&mut self, other: Accumulator) {
        if other.accepted == 0 {
            return;
        }
        if self.accepted == 0 {
            *self = other;
            return;
        }
        let na = self.accepted as f64;
        let nb = other.accepted as f64;
        let n = na + nb;
        let d = other.mean - self.mean;
        self.mean += d * nb / n;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.raw_mean += (other.raw_mean - self.raw_mean) * nb / n;
        self.accepted += other.accepted;
        for (k, v) in other.histogram {
            *self.histogram.entry(k).or_insert(0) += v;
        }
    }

    fn finish(self, trials: u64, detector: &DetectorModel) -> RunSummary {
        let statistics = (self.accepted > 0).then(|| {
            let std = if self.accepted > 1 {
                (self.m2 / (self.accepted - 1) as f64).sqrt()
            } else {
                0.0
            };
            ClickStatistics {
                mean: self.mean,
                std,
                stderr: std / (self.accepted as f64).sqrt(),
                raw_mean: self.raw_mean,
            }
        });
        RunSummary {
            trials,
            accepted: self.accepted,
            first_click: self.first.map(|f| f.1),
            first_click_trial: self.first.map(|f| f.0),
            statistics,
            histogram: self
                .histogram
                .into_iter()
                .map(|(k, v)| (detector.pixel_center(k), v))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickStatistics {
    /// Mean pixelated position.
    pub mean: f64,
    /// Sample standard deviation of pixelated positions.
    pub std: f64,
    /// `std / √accepted`.
    pub stderr: f64,
    /// Mean of the continuous positions.
    pub raw_mean: f64,
}

/// Outcome of a seeded run. An empty run has no first click and no
/// statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub trials: u64,
    pub accepted: u64,
    pub first_click: Option<Click>,
    pub first_click_trial: Option<u64>,
    pub statistics: Option<ClickStatistics>,
    /// `(pixel_center, count)` in increasing position.
    pub histogram: Vec<(f64, u64)>,
}

pub const SUMMARY_CSV_HEADER: &str = "trials,accepted,first_click_x,mean,std,stderr";

impl RunSummary {
    pub fn is_empty(&self) -> bool {
        self.accepted == 0
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.trials as f64
    }

    /// One row in [`SUMMARY_CSV_HEADER`] order; absent values are empty.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.trials,
            self.accepted,
            opt(self.first_click.map(|c| c.position)),
            opt(self.statistics.map(|s| s.mean)),
            opt(self.statistics.map(|s| s.std)),
            opt(self.statistics.map(|s| s.stderr)),
        )
    }

    pub fn write_histogram<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# pixel_center count")?;
        for (center, count) in &self.histogram {
            writeln!(out, "{}\t{}", num(*center), count)?;
        }
        Ok(())
    }
}

/// How far a single reading sits outside the eigenvalue spectrum `[−n, n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyReport {
    pub position: f64,
    /// Spectrum end nearest to the reading, `±n`.
    pub nearest_bound: f64,
    /// Distance beyond that end; negative inside the spectrum.
    pub gap: f64,
    /// Single-shot uncertainty: the predicted final pointer width.
    pub uncertainty: f64,
    pub outside_spectrum: bool,
    pub exceeds_uncertainty: bool,
}

impl AnomalyReport {
    pub fn for_position(position: f64, n: u32, uncertainty: f64) -> Self {
        let edge = f64::from(n);
        let nearest_bound = if position >= 0.0 { edge } else { -edge };
        let gap = position.abs() - edge;
        Self {
            position,
            nearest_bound,
            gap,
            uncertainty,
            outside_spectrum: gap > 0.0,
            exceeds_uncertainty: gap > uncertainty,
        }
    }

    /// Outside the spectrum by more than the single-shot uncertainty.
    pub fn is_anomalous(&self) -> bool {
        self.outside_spectrum && self.exceeds_uncertainty
    }
}

pub fn anomaly_report(summary: &RunSummary, params: &ProtocolParams<f64>) -> Result<AnomalyReport> {
    let click = summary
        .first_click
        .ok_or_else(|| Error::InvalidParameter("run has no accepted click".into()))?;
    Ok(AnomalyReport::for_position(
        click.position,
        params.n(),
        pointer_std(params)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::postselect_probability;

    fn params(n: u32, a: f64, b: f64, d: f64) -> ProtocolParams<f64> {
        ProtocolParams::new(n, a, b, d).unwrap()
    }

    #[test]
    fn detector_pixelation() {
        let d = DetectorModel::default();
        assert_eq!(d.pixel_index(0.04), 0);
        assert_eq!(d.pixel_index(0.06), 1);
        assert!((d.pixelate(21.43) - 21.4).abs() < 1e-12);
        assert!(DetectorModel::new(0.0, 0.0).is_err());
        let shifted = DetectorModel::new(0.5, 0.25).unwrap();
        assert_eq!(shifted.pixelate(0.3), 0.25);
    }

    #[test]
    fn unshifted_gaussian_always_clicks() {
        let q = params(1, 0.0, 0.0, 2.0);
        let spec = GridSpec::for_params(&q, 0.01).unwrap();
        let s = run_trials(7, 100_000, &q, spec, DetectorModel::default()).unwrap();
        assert_eq!(s.accepted, 100_000);
        let stats = s.statistics.unwrap();
        assert!((stats.mean - 1.0).abs() < 3.0 * 2.0 / (1e5f64).sqrt());
        assert_eq!(s.histogram.iter().map(|h| h.1).sum::<u64>(), s.accepted);
    }

    #[test]
    fn single_sample_respects_probability() {
        let q = params(7, 0.52, 0.88, 3.09);
        let spec = GridSpec::for_params(&q, 0.05).unwrap();
        let sampler = ClickSampler::new(&q, spec, DetectorModel::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let hits = (0..n)
            .filter(|_| sampler.sample(&mut rng).click().is_some())
            .count() as f64;
        let p = postselect_probability(&q).unwrap();
        assert!((hits / n as f64 - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-3);

        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        let x = sample_click(&mut a, &q, spec, DetectorModel::default()).unwrap();
        let y = sample_click(&mut b, &q, spec, DetectorModel::default()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn runs_are_deterministic_and_first_click_matches() {
        let q = params(7, 0.52, 2.62, 2.96);
        let spec = GridSpec::for_params(&q, 0.05).unwrap();
        let sampler = ClickSampler::new(&q, spec, DetectorModel::default()).unwrap();
        let a = sampler.run(99, 3 * TRIALS_PER_STREAM + 17).unwrap();
        let b = sampler.run(99, 3 * TRIALS_PER_STREAM + 17).unwrap();
        assert_eq!(a, b);
        let first = sampler.first_click(99, 3 * TRIALS_PER_STREAM + 17).unwrap();
        assert_eq!(Some(first.0), a.first_click_trial);
        assert_eq!(Some(first.1), a.first_click);
        assert_ne!(
            sampler.run(100, 1_000_000).unwrap(),
            sampler.run(99, 1_000_000).unwrap()
        );
    }

    #[test]
    fn empty_run_is_reported_not_fatal() {
        let q = params(7, 0.62, 2.53, 5.84);
        let spec = GridSpec::for_params(&q, 0.05).unwrap();
        let s = run_trials(1, 10, &q, spec, DetectorModel::default()).unwrap();
        assert!(s.is_empty());
        assert!(s.statistics.is_none());
        assert_eq!(s.csv_row(), "10,0,,,,");
        assert!(anomaly_report(&s, &q).is_err());
        assert!(run_trials(1, 0, &q, spec, DetectorModel::default()).is_err());
    }

    #[test]
    fn anomaly_examples() {
        let r = AnomalyReport::for_position(21.4, 7, 4.5);
        assert!((r.gap - 14.4).abs() < 1e-12);
        assert!(r.outside_spectrum && r.exceeds_uncertainty && r.is_anomalous());
        let r = AnomalyReport::for_position(1.0, 7, 4.5);
        assert!(!r.outside_spectrum && !r.is_anomalous());
        let r = AnomalyReport::for_position(-13.0, 7, 4.5);
        assert_eq!(r.nearest_bound, -7.0);
        assert!(r.is_anomalous());
    }

    #[test]
    fn summary_exports() {
        let q = params(1, 0.0, 0.0, 2.0);
        let spec = GridSpec::for_params(&q, 0.1).unwrap();
        let s = run_trials(5, 50, &q, spec, DetectorModel::default()).unwrap();
        let row = s.csv_row();
        assert_eq!(
            row.split(',').count(),
            SUMMARY_CSV_HEADER.split(',').count()
        );
        let mut buf = Vec::new();
        s.write_histogram(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# pixel_center count\n"));
        let total: u64 = text
            .lines()
            .skip(1)
            .map(|l| l.split('\t').nth(1).unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, 50);
    }
}
