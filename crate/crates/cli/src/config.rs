//! Experiment configuration and the built-in presets.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use wavebound::exact::{project_initial, validate_modes, ModeSpec};
use wavebound::minimize::MinimizeConfig;
use wavebound::{GridSpec, InteriorStencil};

/// Names accepted by `--preset`.
pub const PRESETS: [&str; 4] = [
    "single-mode-second",
    "single-mode-fourth",
    "two-modes",
    "poly-exp",
];

/// Initial data of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    /// A sum of exact trigonometric modes.
    Modes { modes: Vec<ModeSpec> },
    /// `u0 = 20 x^2 (1 - x) exp(-5x)`, `p0 = (x - 1/2) exp(2x)`, projected on
    /// modes `0..=k_max`.
    PolyExp { k_max: u32, panels: usize },
}

impl InitialCondition {
    pub fn modes(&self) -> Vec<ModeSpec> {
        match self {
            InitialCondition::Modes { modes } => modes.clone(),
            InitialCondition::PolyExp { k_max, panels } => project_initial(
                |x| 20.0 * x * x * (1.0 - x) * (-5.0 * x).exp(),
                |x| (x - 0.5) * (2.0 * x).exp(),
                *k_max,
                *panels,
            ),
        }
    }
}

/// Assimilation windows visited by `sweep`, in time steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub min_steps: usize,
    pub max_steps: usize,
    pub count: usize,
}

impl SweepRange {
    /// `count` evenly spaced windows, rounded to whole steps.
    pub fn windows(&self) -> Vec<usize> {
        if self.count <= 1 {
            return vec![self.min_steps];
        }
        let span = (self.max_steps - self.min_steps) as f64;
        (0..self.count)
            .map(|i| self.min_steps + (span * i as f64 / (self.count - 1) as f64).round() as usize)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub n_cells: usize,
    pub tau: f64,
    /// Length of the forward runs, in steps.
    pub n_steps: usize,
    /// Interior stencil order, 2 or 4.
    pub order: u32,
    pub initial: InitialCondition,
    /// Boundary stencil width minus one.
    pub j: usize,
    pub eta: f64,
    /// Assimilation window, in steps.
    pub window_steps: usize,
    pub sweep: SweepRange,
    #[serde(default)]
    pub minimizer: MinimizeConfig,
    /// Every how many steps a row of `error_xt.csv` is written.
    #[serde(default = "default_stride")]
    pub xt_stride: usize,
    /// Mode numbers tabulated by `dispersion`.
    #[serde(default = "default_dispersion_k")]
    pub dispersion_k: Vec<u32>,
    /// Number of `tau/h` samples in `(0, 1]` for `dispersion`.
    #[serde(default = "default_ratio_samples")]
    pub ratio_samples: usize,
    pub out: PathBuf,
}

fn default_stride() -> usize {
    12
}

fn default_dispersion_k() -> Vec<u32> {
    vec![2, 3, 5]
}

fn default_ratio_samples() -> usize {
    200
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let single = |order: u32, name: &str| ExperimentConfig {
            name: name.to_string(),
            n_cells: 30,
            tau: 1.0 / 120.0,
            n_steps: 36_000,
            order,
            initial: InitialCondition::Modes {
                modes: vec![ModeSpec::unit(3)],
            },
            j: 1,
            eta: 0.0,
            window_steps: 720,
            sweep: SweepRange {
                min_steps: 600,
                max_steps: 2400,
                count: 10,
            },
            minimizer: MinimizeConfig::default(),
            xt_stride: default_stride(),
            dispersion_k: default_dispersion_k(),
            ratio_samples: default_ratio_samples(),
            out: PathBuf::from("out").join(name),
        };
        Ok(match name {
            "single-mode-second" => single(2, name),
            "single-mode-fourth" => single(4, name),
            "two-modes" => ExperimentConfig {
                initial: InitialCondition::Modes {
                    modes: vec![ModeSpec::unit(2), ModeSpec::unit(5)],
                },
                ..single(2, name)
            },
            "poly-exp" => ExperimentConfig {
                initial: InitialCondition::PolyExp {
                    k_max: 29,
                    panels: 400,
                },
                j: 4,
                window_steps: 1200,
                sweep: SweepRange {
                    min_steps: 800,
                    max_steps: 5000,
                    count: 10,
                },
                ..single(2, name)
            },
            other => bail!(
                "unknown preset {other:?}; available: {}",
                PRESETS.join(", ")
            ),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.n_cells, self.tau, self.n_steps)?)
    }

    pub fn stencil(&self) -> Result<InteriorStencil> {
        Ok(InteriorStencil::of_order(self.order)?)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.stencil()?;
        self.minimizer.validate()?;
        if self.j + 1 > self.n_cells - 1 {
            bail!("J = {} needs more than {} cells", self.j, self.n_cells);
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            bail!("eta must be finite and non-negative, got {}", self.eta);
        }
        if self.window_steps == 0 || self.window_steps > self.n_steps {
            bail!(
                "window of {} steps must lie in 1..={}",
                self.window_steps,
                self.n_steps
            );
        }
        let s = self.sweep;
        if s.count == 0 || s.min_steps == 0 || s.min_steps > s.max_steps || s.max_steps > self.n_steps {
            bail!(
                "sweep {}..{} x{} does not fit in 1..={}",
                s.min_steps,
                s.max_steps,
                s.count,
                self.n_steps
            );
        }
        if self.xt_stride == 0 {
            bail!("xt_stride must be positive");
        }
        if self.ratio_samples == 0 {
            bail!("ratio_samples must be positive");
        }
        if let InitialCondition::PolyExp { panels, .. } = self.initial {
            if panels == 0 {
                bail!("projection needs at least one panel");
            }
        }
        validate_modes(&self.initial.modes(), &grid)?;
        Ok(())
    }
}
