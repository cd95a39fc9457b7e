//! Versioned JSON experiment specification.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use aggmia_core::classifiers::ClassifierKind;
use aggmia_core::data::{NamedWindow, UserId, UserPanel};
use aggmia_core::dp::MechanismKind;
use aggmia_core::game::AdversaryMode;
use aggmia_core::metrics::GammaScope;
use aggmia_core::synthgen::{GeneratorConfig, PanelKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEC_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub panels: Vec<PanelSpec>,
    pub targets: TargetSpec,
    pub group_sizes: Vec<usize>,
    pub priors: Vec<PriorSpec>,
    /// Inference-window names: `week`, `day(<weekday>)`, `8h(<weekday>)`.
    #[serde(default = "default_windows")]
    pub windows: Vec<String>,
    /// Week holding the inference window; defaults to the last whole week.
    #[serde(default)]
    pub inference_week: Option<usize>,
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default)]
    pub mechanisms: Option<MechanismSweep>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub gamma_scope: GammaScope,
    #[serde(default)]
    pub clamp_nonneg: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_windows() -> Vec<String> {
    vec!["week".into()]
}

fn one() -> usize {
    1
}

/// A panel is either synthesized or read from a panel file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSpec {
    pub name: String,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

/// Generator settings; the seed is derived from the root seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: PanelKind,
    pub users: usize,
    /// Number of ROIs including the null ROI.
    pub rois: usize,
    pub slots: usize,
    #[serde(default)]
    pub regularity: Option<f64>,
    #[serde(default)]
    pub active_slot_fraction: Option<f64>,
    #[serde(default)]
    pub popularity_exponent: Option<f64>,
}

impl GeneratorSpec {
    pub fn config(&self, seed: u64) -> GeneratorConfig {
        let mut cfg = GeneratorConfig::new(self.kind, self.users, self.rois, self.slots, seed);
        cfg.regularity = self.regularity;
        cfg.active_slot_fraction = self.active_slot_fraction;
        if let Some(p) = self.popularity_exponent {
            cfg.popularity_exponent = p;
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    /// Targets drawn uniformly from each of the three mobility tiers.
    PerTier(usize),
    Ids(Vec<UserId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    SubsetLocations { alpha: f64, train: usize, test: usize },
    SameGroups { beta: usize },
    DifferentGroups { beta: usize, test: usize },
    /// The released groups' raw aggregates are known.
    Perfect { groups: usize },
}

impl PriorSpec {
    pub fn label(&self) -> &'static str {
        match self {
            PriorSpec::SubsetLocations { .. } => "subset_locations",
            PriorSpec::SameGroups { .. } => "same_groups",
            PriorSpec::DifferentGroups { .. } => "different_groups",
            PriorSpec::Perfect { .. } => "perfect",
        }
    }

    /// Whether training uses weeks before the inference week.
    pub fn uses_past_weeks(&self) -> bool {
        matches!(self, PriorSpec::SameGroups { .. } | PriorSpec::DifferentGroups { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSweep {
    pub kinds: Vec<MechanismKind>,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<AdversaryMode>,
}

fn default_delta() -> f64 {
    0.1
}

fn default_kappa() -> usize {
    20
}

fn default_modes() -> Vec<AdversaryMode> {
    vec![AdversaryMode::Passive, AdversaryMode::Strategic]
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn parsed_windows(&self) -> Result<Vec<NamedWindow>> {
        self.windows
            .iter()
            .map(|w| NamedWindow::parse(w).ok_or_else(|| Error::Spec(format!("unknown window '{w}'"))))
            .collect()
    }

    /// Checks everything that does not depend on panel contents.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if self.version != SPEC_VERSION {
            return bad(format!("unsupported spec version {} (expected {SPEC_VERSION})", self.version));
        }
        if self.panels.is_empty() {
            return bad("no panels".into());
        }
        for p in &self.panels {
            if p.generator.is_some() == p.file.is_some() {
                return bad(format!("panel '{}' needs exactly one of generator or file", p.name));
            }
        }
        if self.group_sizes.is_empty() {
            return bad("group_sizes is empty".into());
        }
        if self.priors.is_empty() {
            return bad("no priors".into());
        }
        if self.classifiers.is_empty() {
            return bad("no classifiers".into());
        }
        if self.windows.is_empty() {
            return bad("no windows".into());
        }
        self.parsed_windows()?;
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        match &self.targets {
            TargetSpec::PerTier(0) => return bad("per_tier must be positive".into()),
            TargetSpec::Ids(ids) if ids.is_empty() => return bad("no target ids".into()),
            _ => {}
        }
        if let Some(ms) = &self.mechanisms {
            if ms.kinds.is_empty() || ms.epsilons.is_empty() || ms.modes.is_empty() {
                return bad("mechanism sweep needs kinds, epsilons and modes".into());
            }
            if ms.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return bad("epsilons must be positive".into());
            }
        }
        Ok(())
    }

    /// Checks that every window fits `panel`.
    pub fn validate_against(&self, panel_name: &str, panel: &UserPanel) -> Result<()> {
        let grid = panel.grid();
        let weeks = grid.week_count();
        if weeks == 0 {
            return Err(Error::Spec(format!("panel '{panel_name}' is shorter than one week")));
        }
        let week = self.inference_week_for(panel);
        if week >= weeks {
            return Err(Error::Spec(format!("panel '{panel_name}' has no week {week}")));
        }
        if self.priors.iter().any(PriorSpec::uses_past_weeks) && week == 0 {
            return Err(Error::Spec(format!(
                "panel '{panel_name}': past-group priors need observation weeks before the inference week"
            )));
        }
        for w in self.parsed_windows()? {
            grid.resolve(w, week)?;
        }
        Ok(())
    }

    pub fn inference_week_for(&self, panel: &UserPanel) -> usize {
        self.inference_week.unwrap_or(panel.grid().week_count().saturating_sub(1))
    }
}
