//! Configuration and command implementations for the `weakval` binary.
//!
//! A run is configured from up to three layers, later layers overriding
//! earlier ones: a preset row, a `key = value` file and command-line flags.
//! Recognized keys are `n`, `alpha`, `beta`, `delta`, `grid_dx`,
//! `grid_half_span`, `pixel_pitch`, `trials`, `seed` and `out`. Angles are in
//! radians unless the layer was parsed with degrees enabled.
//!
//! Every command returns its whole output as text. The text opens with `#`
//! comment lines recording the command, the resolved configuration and the
//! seed, and contains no timestamps, so equal inputs give equal bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::double_double::DoubleDouble;
use crate::error::{Error, Result};
use crate::format::num;
use crate::grid::{
    evolve_joint, evolve_sequential, evolve_sequential_with, l2_distance, moments, GridSpec,
    DEFAULT_DX,
};
use crate::protocol::{
    coupling_weights, expectation_sigma_sum, pointer_std, postselect_probability, sweep_beta,
    wv_sum, ProtocolParams,
};
use crate::sim::{
    AnomalyReport, ClickSampler, DetectorModel, DEFAULT_PIXEL_PITCH, SUMMARY_CSV_HEADER,
};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_160_512;

/// Photons simulated per run when `trials` is not given.
pub const DEFAULT_TRIALS: u64 = 100_000_000;

/// Accepted clicks aimed for per row by [`cmd_table1`] by default.
pub const DEFAULT_TABLE1_CLICKS: u64 = 100_000;

pub const ORACLE_L2_TOLERANCE: f64 = 1e-9;
pub const ORACLE_MOMENT_TOLERANCE: f64 = 1e-6;
pub const ORACLE_PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Preparation settings of the four reference rows: `(label, α, β, Δ)`, all
/// with seven blocks.
pub const PRESETS: [(&str, f64, f64, f64); 4] = [
    ("a", 0.62, 2.53, 5.84),
    ("b", 0.62, 2.53, 3.18),
    ("c", 0.52, 2.62, 2.96),
    ("d", 0.52, 0.88, 3.09),
];

pub const PRESET_BLOCKS: u32 = 7;

pub const WV_CSV_HEADER: &str =
    "alpha,beta,delta,n,wv,pointer_std,postselect_probability,expectation_sigma_sum";
pub const TABLE1_CSV_HEADER: &str = "row,alpha,beta,delta,n,wv,pointer_std,postselect_probability,\
expectation_sigma_sum,first_click_x,trials,accepted,sim_mean,sim_std,sim_stderr";
pub const CLICK_CSV_HEADER: &str =
    "trial,position,raw_position,uncertainty,nearest_bound,gap,outside_spectrum,exceeds_uncertainty,anomalous";
pub const SWEEP_CSV_HEADER: &str = "beta,wv,std,probability,delta";

/// Closed-form `(wv, pointer_std, probability)` evaluated in double-double
/// precision, so that every printed digit is significant even where the
/// binomial sums cancel.
pub fn analytic_row(p: &ProtocolParams<f64>) -> Result<(f64, f64, f64)> {
    let dd = DoubleDouble::from_f64;
    let q = ProtocolParams::new(p.n(), dd(p.alpha()), dd(p.beta()), dd(p.delta()))?;
    Ok((
        wv_sum(&q)?.hi(),
        pointer_std(&q)?.hi(),
        postselect_probability(&q)?.hi(),
    ))
}

/// Partially specified configuration; `None` means "not set in this layer".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigLayer {
    pub n: Option<u32>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub grid_dx: Option<f64>,
    pub grid_half_span: Option<f64>,
    pub pixel_pitch: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn parse_value<V: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: cannot parse {key} = {value:?}")))
}

impl ConfigLayer {
    /// Reference row `a`..`d`.
    pub fn preset(name: &str) -> Result<Self> {
        let (_, alpha, beta, delta) =
            PRESETS.iter().find(|row| row.0 == name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset {name:?}, expected one of a, b, c, d"
                ))
            })?;
        Ok(Self {
            n: Some(PRESET_BLOCKS),
            alpha: Some(*alpha),
            beta: Some(*beta),
            delta: Some(*delta),
            ..Self::default()
        })
    }

    /// Parses `key = value` lines. `#` starts a comment; blank lines are
    /// ignored; a key may appear once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut layer = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!(
                    "line {line_no}: duplicate key {key}"
                )));
            }
            seen.push(key.to_string());
            match key {
                "n" => layer.n = Some(parse_value(key, value, line_no)?),
                "alpha" => layer.alpha = Some(parse_value(key, value, line_no)?),
                "beta" => layer.beta = Some(parse_value(key, value, line_no)?),
                "delta" => layer.delta = Some(parse_value(key, value, line_no)?),
                "grid_dx" => layer.grid_dx = Some(parse_value(key, value, line_no)?),
                "grid_half_span" => layer.grid_half_span = Some(parse_value(key, value, line_no)?),
                "pixel_pitch" => layer.pixel_pitch = Some(parse_value(key, value, line_no)?),
                "trials" => layer.trials = Some(parse_value(key, value, line_no)?),
                "seed" => layer.seed = Some(parse_value(key, value, line_no)?),
                "out" => layer.out = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::Config(format!(
                        "line {line_no}: unknown key {other}"
                    )))
                }
            }
        }
        Ok(layer)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Reads the angles of this layer as degrees.
    pub fn degrees_to_radians(mut self) -> Self {
        self.alpha = self.alpha.map(f64::to_radians);
        self.beta = self.beta.map(f64::to_radians);
        self
    }

    /// `self` with every value set in `over` replaced.
    pub fn overlay(self, over: Self) -> Self {
        Self {
            n: over.n.or(self.n),
            alpha: over.alpha.or(self.alpha),
            beta: over.beta.or(self.beta),
            delta: over.delta.or(self.delta),
            grid_dx: over.grid_dx.or(self.grid_dx),
            grid_half_span: over.grid_half_span.or(self.grid_half_span),
            pixel_pitch: over.pixel_pitch.or(self.pixel_pitch),
            trials: over.trials.or(self.trials),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
        }
    }

    /// Fills defaults and validates.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let missing = |key: &str| {
            Error::Config(format!(
                "{key} is not set; pass --{key}, a config file or --preset"
            ))
        };
        let n = self.n.ok_or_else(|| missing("n"))?;
        let alpha = self.alpha.ok_or_else(|| missing("alpha"))?;
        let beta = self.beta.ok_or_else(|| missing("beta"))?;
        let delta = self.delta.ok_or_else(|| missing("delta"))?;
        let params = ProtocolParams::new(n, alpha, beta, delta)?;
        let dx = self.grid_dx.unwrap_or(DEFAULT_DX);
        let grid = match self.grid_half_span {
            Some(span) => GridSpec::new(dx, span)?,
            None => GridSpec::for_params(&params, dx)?,
        };
        let detector = DetectorModel::new(self.pixel_pitch.unwrap_or(DEFAULT_PIXEL_PITCH), 0.0)?;
        let trials = self.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        Ok(ExperimentConfig {
            params,
            grid,
            detector,
            trials,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            output: self.out.clone(),
        })
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ProtocolParams<f64>,
    pub grid: GridSpec,
    pub detector: DetectorModel,
    pub trials: u64,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// `#` comment block naming the command and every setting that
    /// determines the output.
    pub fn header(&self, command: &str, extra: &[(&str, String)]) -> String {
        let p = &self.params;
        let mut h = String::new();
        let _ = writeln!(h, "# weakval {command}");
        let _ = writeln!(h, "# n = {}", p.n());
        let _ = writeln!(h, "# alpha = {}", num(p.alpha()));
        let _ = writeln!(h, "# beta = {}", num(p.beta()));
        let _ = writeln!(h, "# delta = {}", num(p.delta()));
        let _ = writeln!(h, "# grid_dx = {}", num(self.grid.dx()));
        let _ = writeln!(h, "# grid_half_span = {}", num(self.grid.half_span()));
        let _ = writeln!(h, "# pixel_pitch = {}", num(self.detector.pixel_pitch()));
        let _ = writeln!(h, "# trials = {}", self.trials);
        let _ = writeln!(h, "# seed = {}", self.seed);
        if let Some(out) = &self.output {
            let _ = writeln!(h, "# out = {}", out.display());
        }
        for (k, v) in extra {
            let _ = writeln!(h, "# {k} = {v}");
        }
        h
    }
}

/// Text produced by a command and whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub text: String,
    pub passed: bool,
}

impl CommandOutput {
    fn ok(text: String) -> Self {
        Self { text, passed: true }
    }

    /// 0 on success, 3 when a verification check failed.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            3
        }
    }
}

/// Writes `text` to `path`, or to standard output when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(Error::from),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Analytic row for one parameter set.
pub fn cmd_wv(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let p = &cfg.params;
    let (wv, std, prob) = analytic_row(p)?;
    let row = format!(
        "{},{},{},{},{},{},{},{}",
        num(p.alpha()),
        num(p.beta()),
        num(p.delta()),
        p.n(),
        num(wv),
        num(std),
        num(prob),
        num(expectation_sigma_sum(p.n(), p.alpha())),
    );
    Ok(CommandOutput::ok(format!(
        "{}{WV_CSV_HEADER}\n{row}\n",
        cfg.header("wv", &[])
    )))
}

/// Trials needed to expect `clicks` accepted photons at acceptance `p`.
pub fn trials_for_clicks(clicks: u64, p: f64) -> u64 {
    ((clicks as f64 / p).ceil() as u64).max(1)
}

/// The four reference rows: analytic columns, the first click of a seeded
/// run and the ensemble statistics of that run. Row `i` (from 0) uses seed
/// `seed + i` and enough trials to expect `clicks` accepted photons.
pub fn cmd_table1(seed: u64, clicks: u64, grid_dx: f64, pixel_pitch: f64) -> Result<CommandOutput> {
    if clicks == 0 {
        return Err(Error::InvalidParameter("clicks must be at least 1".into()));
    }
    let detector = DetectorModel::new(pixel_pitch, 0.0)?;
    let mut text = String::new();
    let _ = writeln!(text, "# weakval table1");
    let _ = writeln!(text, "# n = {PRESET_BLOCKS}");
    let _ = writeln!(text, "# grid_dx = {}", num(grid_dx));
    let _ = writeln!(text, "# pixel_pitch = {}", num(pixel_pitch));
    let _ = writeln!(text, "# seed = {seed}");
    let _ = writeln!(text, "# clicks = {clicks}");
    let _ = writeln!(text, "{TABLE1_CSV_HEADER}");
    for (i, (label, alpha, beta, delta)) in PRESETS.iter().enumerate() {
        let p = ProtocolParams::new(PRESET_BLOCKS, *alpha, *beta, *delta)?;
        let (wv, std, prob) = analytic_row(&p)?;
        let trials = trials_for_clicks(clicks, prob);
        let sampler = ClickSampler::new(&p, GridSpec::for_params(&p, grid_dx)?, detector)?;
        let run = sampler.run(seed.wrapping_add(i as u64), trials)?;
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        let _ = writeln!(
            text,
            "{label},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            num(*alpha),
            num(*beta),
            num(*delta),
            PRESET_BLOCKS,
            num(wv),
            num(std),
            num(prob),
            num(expectation_sigma_sum(PRESET_BLOCKS, *alpha)),
            opt(run.first_click.map(|c| c.position)),
            run.trials,
            run.accepted,
            opt(run.statistics.map(|s| s.mean)),
            opt(run.statistics.map(|s| s.std)),
            opt(run.statistics.map(|s| s.stderr)),
        );
    }
    Ok(CommandOutput::ok(text))
}

/// First accepted click of a seeded run and how anomalous it is.
pub fn cmd_click(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let sampler = ClickSampler::new(&cfg.params, cfg.grid, cfg.detector)?;
    let (trial, click) = sampler
        .first_click(cfg.seed, cfg.trials)
        .ok_or(Error::NoClick { trials: cfg.trials })?;
    let (_, std, _) = analytic_row(&cfg.params)?;
    let r = AnomalyReport::for_position(click.position, cfg.params.n(), std);
    let row = format!(
        "{trial},{},{},{},{},{},{},{},{}",
        num(click.position),
        num(click.raw_position),
        num(r.uncertainty),
        num(r.nearest_bound),
        num(r.gap),
        r.outside_spectrum,
        r.exceeds_uncertainty,
        r.is_anomalous(),
    );
    Ok(CommandOutput::ok(format!(
        "{}{CLICK_CSV_HEADER}\n{row}\n",
        cfg.header("click", &[])
    )))
}

/// Analytic values over `steps` evenly spaced post-selection angles. The
/// configured `beta` is ignored. Points that fail leave their value fields
/// empty.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    beta_min: f64,
    beta_max: f64,
    steps: usize,
) -> Result<CommandOutput> {
    if steps < 2 {
        return Err(Error::InvalidParameter(
            "a sweep needs at least 2 steps".into(),
        ));
    }
    if !beta_min.is_finite() || !beta_max.is_finite() {
        return Err(Error::InvalidParameter(
            "sweep bounds must be finite".into(),
        ));
    }
    let last = (steps - 1) as f64;
    let betas: Vec<f64> = (0..steps)
        .map(|i| beta_min + (beta_max - beta_min) * (i as f64 / last))
        .collect();
    let p = &cfg.params;
    let extra = [
        ("beta_min", num(beta_min)),
        ("beta_max", num(beta_max)),
        ("steps", steps.to_string()),
    ];
    let mut text = cfg.header("sweep", &extra);
    let _ = writeln!(text, "{SWEEP_CSV_HEADER}");
    let dd = DoubleDouble::from_f64;
    let grid: Vec<DoubleDouble> = betas.iter().map(|&b| dd(b)).collect();
    for (beta, point) in betas
        .iter()
        .zip(sweep_beta(p.n(), dd(p.alpha()), dd(p.delta()), &grid))
    {
        let values = match point.outcome {
            Ok(v) => format!(
                "{},{},{}",
                num(v.wv.hi()),
                num(v.std.hi()),
                num(v.probability.hi())
            ),
            Err(_) => ",,".to_string(),
        };
        let _ = writeln!(text, "{},{values},{}", num(*beta), num(p.delta()));
    }
    Ok(CommandOutput::ok(text))
}

/// Sequential against joint evolution, both against the closed forms.
///
/// `corrupt_mu` scales the μ weight used by the sequential evolution; any
/// value other than 1 should make the check fail.
pub fn cmd_oracle(cfg: &ExperimentConfig, corrupt_mu: Option<f64>) -> Result<CommandOutput> {
    let p = &cfg.params;
    let mut weights = coupling_weights(p);
    if let Some(factor) = corrupt_mu {
        weights.mu *= factor;
    }
    let seq = evolve_sequential_with(p, cfg.grid, weights)?;
    let joint = evolve_joint(p, cfg.grid)?;
    let (seq_mean, seq_std) = moments(&seq.wavefunction);
    let (joint_mean, joint_std) = moments(&joint.wavefunction);
    let (wv, std, prob) = analytic_row(p)?;

    let l2 = l2_distance(&seq.wavefunction, &joint.wavefunction)?;
    let mean_delta = (seq_mean - wv).abs().max((joint_mean - wv).abs());
    let std_delta = (seq_std - std).abs().max((joint_std - std).abs());
    let prob_joint = (seq.probability - joint.probability).abs();
    let prob_analytic = (seq.probability - prob)
        .abs()
        .max((joint.probability - prob).abs());

    let checks = [
        ("l2_distance", l2, ORACLE_L2_TOLERANCE),
        ("mean_delta", mean_delta, ORACLE_MOMENT_TOLERANCE),
        ("std_delta", std_delta, ORACLE_MOMENT_TOLERANCE),
        (
            "probability_delta_joint",
            prob_joint,
            ORACLE_PROBABILITY_TOLERANCE,
        ),
        (
            "probability_delta_analytic",
            prob_analytic,
            ORACLE_PROBABILITY_TOLERANCE,
        ),
    ];
    let passed = checks.iter().all(|(_, v, tol)| v.is_finite() && v < tol);

    let extra: Vec<(&str, String)> = corrupt_mu
        .map(|f| ("corrupt_mu", num(f)))
        .into_iter()
        .collect();
    let mut text = cfg.header("oracle", &extra);
    let _ = writeln!(text, "quantity,value,tolerance,pass");
    for (name, value, tol) in &checks {
        let _ = writeln!(text, "{name},{},{},{}", num(*value), num(*tol), value < tol);
    }
    let _ = writeln!(text, "sequential_mean,{},,", num(seq_mean));
    let _ = writeln!(text, "joint_mean,{},,", num(joint_mean));
    let _ = writeln!(text, "analytic_mean,{},,", num(wv));
    let _ = writeln!(text, "sequential_std,{},,", num(seq_std));
    let _ = writeln!(text, "analytic_std,{},,", num(std));
    let _ = writeln!(text, "sequential_probability,{},,", num(seq.probability));
    let _ = writeln!(text, "joint_probability,{},,", num(joint.probability));
    let _ = writeln!(text, "analytic_probability,{},,", num(prob));
    let _ = writeln!(text, "# {}", if passed { "PASS" } else { "FAIL" });
    Ok(CommandOutput { text, passed })
}

/// Output of [`cmd_run`]: the summary CSV and the histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: String,
    pub histogram: String,
}

/// Full seeded run: one summary row and a click histogram.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let sampler = ClickSampler::new(&cfg.params, cfg.grid, cfg.detector)?;
    let run = sampler.run(cfg.seed, cfg.trials)?;
    let header = cfg.header("run", &[]);
    let summary = format!("{header}{SUMMARY_CSV_HEADER}\n{}\n", run.csv_row());
    let mut hist = Vec::new();
    run.write_histogram(&mut hist)?;
    let histogram = format!("{header}{}", String::from_utf8_lossy(&hist));
    Ok(RunOutput { summary, histogram })
}

/// Final conditional pointer density on the grid.
pub fn cmd_density(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let evolution = evolve_sequential(&cfg.params, cfg.grid)?;
    let mut body = Vec::new();
    evolution.wavefunction.write_density(&mut body)?;
    let extra = [("postselect_probability", num(evolution.probability))];
    Ok(CommandOutput::ok(format!(
        "{}{}",
        cfg.header("density", &extra),
        String::from_utf8_lossy(&body)
    )))
}
