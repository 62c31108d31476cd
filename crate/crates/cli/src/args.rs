//! Command-line arguments and how they resolve to a configuration.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use wavebound::exact::ModeSpec;

use crate::config::{ExperimentConfig, InitialCondition};

#[derive(Debug, Parser)]
#[command(version, about = "Fit boundary stencils of a staggered wave solver to exact solutions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the classical scheme and record its error
    Forward(ConfigArgs),
    /// Identify boundary coefficients over one window
    Assimilate(ConfigArgs),
    /// Identify boundary coefficients over a range of windows
    Sweep(ConfigArgs),
    /// Verify the adjoint gradient
    Gradcheck {
        #[command(flatten)]
        config: ConfigArgs,
        /// Use observations produced by the model itself
        #[arg(long)]
        twin: bool,
    },
    /// Tabulate wave-speed errors
    Dispersion(ConfigArgs),
    /// Print the resolved configuration as JSON
    ShowConfig(ConfigArgs),
}

/// Base configuration plus per-field overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON configuration file
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration (default: single-mode-second)
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub n_cells: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub n_steps: Option<usize>,
    /// Interior stencil order (2 or 4)
    #[arg(long)]
    pub order: Option<u32>,
    /// Boundary stencil width minus one
    #[arg(long)]
    pub j: Option<usize>,
    /// Weight of the zero-sum penalty
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub window_steps: Option<usize>,
    /// Unit modes as a comma list, e.g. `2,5`
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<u32>>,
    #[arg(long)]
    pub sweep_min: Option<usize>,
    #[arg(long)]
    pub sweep_max: Option<usize>,
    #[arg(long)]
    pub sweep_count: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub xt_stride: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub dispersion_k: Option<Vec<u32>>,
    #[arg(long)]
    pub ratio_samples: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => ExperimentConfig::load(path)?,
            (None, p) => ExperimentConfig::preset(p.as_deref().unwrap_or("single-mode-second"))?,
            (Some(_), Some(_)) => bail!("--config and --preset are exclusive"),
        };
        macro_rules! set {
            ($($field:ident => $($target:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$field { cfg.$($target).+ = v.clone(); })*
            };
        }
        set!(
            out => out,
            name => name,
            n_cells => n_cells,
            tau => tau,
            n_steps => n_steps,
            order => order,
            j => j,
            eta => eta,
            window_steps => window_steps,
            sweep_min => sweep.min_steps,
            sweep_max => sweep.max_steps,
            sweep_count => sweep.count,
            max_iters => minimizer.max_iters,
            grad_tol => minimizer.grad_tol,
            xt_stride => xt_stride,
            dispersion_k => dispersion_k,
            ratio_samples => ratio_samples,
        );
        if let Some(ks) = &self.modes {
            cfg.initial = InitialCondition::Modes {
                modes: ks.iter().map(|&k| ModeSpec::unit(k)).collect(),
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
