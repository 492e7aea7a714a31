use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weakval::experiment::{
    cmd_click, cmd_density, cmd_oracle, cmd_run, cmd_sweep, cmd_table1, cmd_wv, emit,
    CommandOutput, ConfigLayer, ExperimentConfig, DEFAULT_SEED, DEFAULT_TABLE1_CLICKS,
};
use weakval::grid::DEFAULT_DX;
use weakval::sim::DEFAULT_PIXEL_PITCH;
use weakval::Result;

/// Sequential weak measurement of a summed polarization observable.
///
/// Exit status: 0 success, 1 invalid input, 2 numerical failure,
/// 3 verification failure.
#[derive(Parser)]
#[command(name = "weakval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic weak value, pointer width and post-selection probability.
    Wv(ConfigArgs),
    /// The four reference rows with simulated clicks.
    Table1 {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Accepted clicks aimed for per row.
        #[arg(long, default_value_t = DEFAULT_TABLE1_CLICKS)]
        clicks: u64,
        #[arg(long = "grid_dx", alias = "grid-dx", default_value_t = DEFAULT_DX)]
        grid_dx: f64,
        #[arg(long = "pixel_pitch", alias = "pixel-pitch", default_value_t = DEFAULT_PIXEL_PITCH)]
        pixel_pitch: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First accepted click of a seeded run, with its anomaly report.
    Click(ConfigArgs),
    /// Analytic values over a range of post-selection angles.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long = "beta_min", alias = "beta-min", allow_negative_numbers = true)]
        beta_min: f64,
        #[arg(long = "beta_max", alias = "beta-max", allow_negative_numbers = true)]
        beta_max: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Cross-check sequential and joint grid evolution against the closed forms.
    Oracle {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long = "corrupt-mu", hide = true)]
        corrupt_mu: Option<f64>,
    },
    /// Seeded run: summary CSV and click histogram.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Histogram destination; defaults to `<out>.hist` or standard output.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Final pointer density on the grid.
    Density(ConfigArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reference row a, b, c or d.
    #[arg(long)]
    preset: Option<String>,
    /// Read angles from the file and flags in degrees.
    #[arg(long)]
    degrees: bool,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long = "grid_dx", alias = "grid-dx")]
    grid_dx: Option<f64>,
    #[arg(long = "grid_half_span", alias = "grid-half-span")]
    grid_half_span: Option<f64>,
    #[arg(long = "pixel_pitch", alias = "pixel-pitch")]
    pixel_pitch: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn layer(&self) -> Result<ConfigLayer> {
        let mut layer = match &self.preset {
            Some(name) => ConfigLayer::preset(name)?,
            None => ConfigLayer::default(),
        };
        if let Some(path) = &self.config {
            let file = ConfigLayer::from_file(path)?;
            layer = layer.overlay(if self.degrees {
                file.degrees_to_radians()
            } else {
                file
            });
        }
        let flags = ConfigLayer {
            n: self.n,
            alpha: self.alpha,
            beta: self.beta,
            delta: self.delta,
            grid_dx: self.grid_dx,
            grid_half_span: self.grid_half_span,
            pixel_pitch: self.pixel_pitch,
            trials: self.trials,
            seed: self.seed,
            out: self.out.clone(),
        };
        Ok(layer.overlay(if self.degrees {
            flags.degrees_to_radians()
        } else {
            flags
        }))
    }

    fn resolve(&self) -> Result<ExperimentConfig> {
        self.layer()?.resolve()
    }

    fn angle(&self, value: f64) -> f64 {
        if self.degrees {
            value.to_radians()
        } else {
            value
        }
    }
}

fn finish(out: CommandOutput, cfg: &ExperimentConfig) -> Result<i32> {
    emit(cfg.output.as_deref(), &out.text)?;
    Ok(out.exit_code())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Wv(args) => {
            let cfg = args.resolve()?;
            finish(cmd_wv(&cfg)?, &cfg)
        }
        Command::Table1 {
            seed,
            clicks,
            grid_dx,
            pixel_pitch,
            out,
        } => {
            let result = cmd_table1(seed, clicks, grid_dx, pixel_pitch)?;
            emit(out.as_deref(), &result.text)?;
            Ok(result.exit_code())
        }
        Command::Click(args) => {
            let cfg = args.resolve()?;
            finish(cmd_click(&cfg)?, &cfg)
        }
        Command::Sweep {
            config,
            beta_min,
            beta_max,
            steps,
        } => {
            let (lo, hi) = (config.angle(beta_min), config.angle(beta_max));
            let mut layer = config.layer()?;
            // the configured beta is unused by a sweep
            layer.beta = layer.beta.or(Some(lo));
            let cfg = layer.resolve()?;
            finish(cmd_sweep(&cfg, lo, hi, steps)?, &cfg)
        }
        Command::Oracle { config, corrupt_mu } => {
            let cfg = config.resolve()?;
            finish(cmd_oracle(&cfg, corrupt_mu)?, &cfg)
        }
        Command::Run { config, histogram } => {
            let cfg = config.resolve()?;
            let result = cmd_run(&cfg)?;
            emit(cfg.output.as_deref(), &result.summary)?;
            let hist_path = histogram.or_else(|| {
                cfg.output.as_ref().map(|p| {
                    let mut s = p.clone().into_os_string();
                    s.push(".hist");
                    PathBuf::from(s)
                })
            });
            emit(hist_path.as_deref(), &result.histogram)?;
            Ok(0)
        }
        Command::Density(args) => {
            let cfg = args.resolve()?;
            finish(cmd_density(&cfg)?, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("weakval: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
