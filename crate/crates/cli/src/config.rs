//! Experiment configuration, loadable from TOML and overridable by flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use lwave::scheme::UpdateMode;
use lwave::FilterBand;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    #[default]
    Shock,
    Harmonic,
    Noise,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    #[default]
    Sync,
    Sweep,
}

impl From<ModeArg> for UpdateMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sync => UpdateMode::Synchronous,
            ModeArg::Sweep => UpdateMode::SweepInPlace,
        }
    }
}

/// Arithmetic used by `simulate`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// Wide fixed point when the run's growth would swamp `f64`, else `f64`.
    #[default]
    Auto,
    F64,
    Wide,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub dim: usize,
    pub band: FilterBand,
    pub order: usize,
    pub mode: ModeArg,
    /// Lattice extent N; defaults by dimension.
    pub grid: Option<usize>,
    /// Recorded frames K; defaults to N.
    pub steps: Option<usize>,
    pub precision: Precision,
    /// Memory cap in MiB.
    pub budget_mib: u64,
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection {
            dim: 1,
            band: FilterBand::ZeroMax,
            order: 1,
            mode: ModeArg::Sync,
            grid: None,
            steps: None,
            precision: Precision::Auto,
            budget_mib: lwave::scheme::DEFAULT_MEMORY_BUDGET >> 20,
        }
    }
}

impl SchemeSection {
    pub fn grid(&self) -> usize {
        self.grid.unwrap_or(match self.dim {
            1 => 512,
            2 => 64,
            3 => 32,
            _ => 16,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or_else(|| self.grid())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub kind: InitKind,
    /// Harmonic frequency per axis; defaults to N/16 on the first axis.
    pub freq: Option<Vec<i64>>,
    pub phase: f64,
    /// Gaussian envelope width in sites for harmonics.
    pub width: Option<f64>,
    /// Noise band half-width; defaults to N/32 (at least 1).
    pub delta: Option<usize>,
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection {
            kind: InitKind::Shock,
            freq: None,
            phase: 0.0,
            width: None,
            delta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Peak threshold as a fraction of each column's maximum.
    pub threshold: f64,
    /// Cone radius around each apex; defaults to N/16.
    pub radius: Option<f64>,
    pub velocity_tolerance: f64,
    pub cone_tolerance: f64,
    /// When set, the virtual-system residual must stay below it.
    pub pde_tolerance: Option<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            threshold: 0.3,
            radius: None,
            velocity_tolerance: 0.02,
            cone_tolerance: 0.05,
            pde_tolerance: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub scheme: SchemeSection,
    pub init: InitSection,
    pub analysis: AnalysisSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    /// Copy with every defaulted size filled in, as written next to outputs.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        let n = c.scheme.grid();
        c.scheme.grid = Some(n);
        c.scheme.steps = Some(c.scheme.steps());
        match c.init.kind {
            InitKind::Harmonic if c.init.freq.is_none() => {
                let mut f = vec![0; c.scheme.dim];
                if let Some(first) = f.first_mut() {
                    *first = (n / 16) as i64;
                }
                c.init.freq = Some(f);
            }
            InitKind::Noise if c.init.delta.is_none() => c.init.delta = Some((n / 32).max(1)),
            _ => {}
        }
        if c.analysis.radius.is_none() {
            c.analysis.radius = Some((n / 16) as f64);
        }
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
