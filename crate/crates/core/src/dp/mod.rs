//! Differentially private release of aggregate series.
//!
//! Mechanisms perturb each ROI row independently with row-indexed sub-seeds,
//! while the sensitivity is a single value for the whole matrix.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{AggregateSeries, Sensitivity};
use crate::seed;
use crate::{Error, Result};

mod fourier;
mod noise;
pub mod transform;

pub use fourier::{
    efpag_noise_std, efpag_scores, exponential_probabilities, exponential_select, fpa_kept, truncate_dct,
    truncate_dft,
};
pub use noise::{gaussian_sample, gaussian_sigma, laplace_from_uniform, laplace_sample, Polar};

/// Below this scale a mechanism adds no noise at all.
const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MechanismKind {
    #[serde(rename = "LPA_user")]
    LpaUser,
    #[serde(rename = "LPA_event")]
    LpaEvent,
    #[serde(rename = "GSM")]
    Gsm,
    #[serde(rename = "FPA")]
    Fpa,
    #[serde(rename = "EFPAG")]
    Efpag,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 5] = [
        MechanismKind::LpaUser,
        MechanismKind::LpaEvent,
        MechanismKind::Gsm,
        MechanismKind::Fpa,
        MechanismKind::Efpag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::LpaUser => "LPA_user",
            MechanismKind::LpaEvent => "LPA_event",
            MechanismKind::Gsm => "GSM",
            MechanismKind::Fpa => "FPA",
            MechanismKind::Efpag => "EFPAG",
        }
    }

    pub fn needs_delta(self) -> bool {
        matches!(self, MechanismKind::Gsm | MechanismKind::Efpag)
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidMechanism(alloc::format!("unknown mechanism '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    pub epsilon: f64,
    /// Used by GSM and EFPAG only.
    pub delta: f64,
    pub sensitivity: Sensitivity,
    /// Kept coefficients for FPA; upper bound on the candidates for EFPAG.
    pub kappa: Option<usize>,
    pub seed: u64,
    /// Share of ε spent by EFPAG on choosing κ.
    pub selection_share: f64,
    /// Replace negative outputs by zero.
    pub clamp_nonneg: bool,
}

impl MechanismConfig {
    pub fn new(kind: MechanismKind, epsilon: f64, sensitivity: Sensitivity) -> Self {
        Self {
            kind,
            epsilon,
            delta: 0.1,
            sensitivity,
            kappa: None,
            seed: 0,
            selection_share: 0.1,
            clamp_nonneg: false,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_kappa(mut self, kappa: usize) -> Self {
        self.kappa = Some(kappa);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Checks the configuration against a window of `len` slots.
    pub fn validate(&self, len: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMechanism(msg));
        if !(self.epsilon > 0.0) {
            return bad(alloc::format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.sensitivity.l1 >= 0.0 && self.sensitivity.l2 >= 0.0) {
            return bad("sensitivity must be non-negative".into());
        }
        if self.kind.needs_delta() && !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(alloc::format!("{} needs delta in (0, 1), got {}", self.kind, self.delta));
        }
        match (self.kind, self.kappa) {
            (MechanismKind::Fpa, None) => return bad("FPA needs kappa".into()),
            (MechanismKind::Fpa | MechanismKind::Efpag, Some(k)) if k == 0 || k > len => {
                return bad(alloc::format!("kappa {k} outside 1..={len}"));
            }
            _ => {}
        }
        if self.kind == MechanismKind::Efpag
            && !(self.selection_share > 0.0 && self.selection_share < 1.0)
        {
            return bad("selection share must lie in (0, 1)".into());
        }
        Ok(())
    }
}

/// A perturbed aggregate together with the configuration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisySeries {
    pub series: AggregateSeries,
    pub provenance: MechanismConfig,
}

impl NoisySeries {
    pub fn values(&self) -> &[f64] {
        self.series.values()
    }
}

/// Perturbs `series` with the mechanism in `cfg`, seeded by `cfg.seed`.
pub fn perturb(series: &AggregateSeries, cfg: &MechanismConfig) -> Result<NoisySeries> {
    let n = series.len();
    cfg.validate(n)?;
    let eps = cfg.epsilon;
    let sens = cfg.sensitivity;
    let mut values = Vec::with_capacity(series.values().len());
    match cfg.kind {
        MechanismKind::LpaUser | MechanismKind::LpaEvent => {
            let scale = if cfg.kind == MechanismKind::LpaUser { sens.l1 / eps } else { 1.0 / eps };
            for (r, row) in series.rows().enumerate() {
                let mut rng = row_rng(cfg, r);
                values.extend(row.iter().map(|&v| {
                    if scale < NOISE_FLOOR {
                        v
                    } else {
                        v + noise::laplace(scale, &mut rng)
                    }
                }));
            }
        }
        MechanismKind::Gsm => {
            let sigma = gaussian_sigma(eps, cfg.delta, sens.l2)?;
            for (r, row) in series.rows().enumerate() {
                let mut rng = row_rng(cfg, r);
                let mut polar = Polar::new();
                values.extend(row.iter().map(|&v| {
                    if sigma < NOISE_FLOOR {
                        v
                    } else {
                        v + polar.sample(sigma, &mut rng)
                    }
                }));
            }
        }
        MechanismKind::Fpa => {
            let kappa = cfg.kappa.unwrap_or(n);
            let plan = transform::FftPlan::new(n);
            let scale = crate::math::sqrt(kappa as f64) * sens.l2 / eps;
            for (r, row) in series.rows().enumerate() {
                let mut rng = row_rng(cfg, r);
                values.extend(fourier::fpa_row(row, &plan, kappa, scale, &mut rng));
            }
        }
        MechanismKind::Efpag => {
            let cap = cfg.kappa.unwrap_or(n);
            let eps_select = cfg.selection_share * eps;
            let sigma = gaussian_sigma((1.0 - cfg.selection_share) * eps, cfg.delta, sens.l2)?;
            let plan = transform::DctPlan::new(n);
            for (r, row) in series.rows().enumerate() {
                let mut rng = row_rng(cfg, r);
                values.extend(fourier::efpag_row(
                    row, &plan, cap, eps_select, sens.l2, sigma, &mut rng,
                )?);
            }
        }
    }
    if cfg.clamp_nonneg {
        for v in &mut values {
            *v = v.max(0.0);
        }
    }
    Ok(NoisySeries { series: series.with_noisy_values(values)?, provenance: *cfg })
}

fn row_rng(cfg: &MechanismConfig, row: usize) -> seed::Rng {
    seed::rng_for(cfg.seed, "dp-row", row as u64)
}

/// Stateful front end that gives every call a fresh seed derived from a
/// root seed and a call counter.
#[derive(Clone, Debug)]
pub struct Perturber {
    root: u64,
    calls: u64,
}

impl Perturber {
    pub fn new(root: u64) -> Self {
        Self { root, calls: 0 }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// Seed the next call will use.
    pub fn next_seed(&mut self) -> u64 {
        let s = seed::derive(self.root, "dp-call", self.calls);
        self.calls += 1;
        s
    }

    /// Perturbs with `cfg`, overriding its seed by the next auto-seed.
    pub fn perturb(&mut self, series: &AggregateSeries, cfg: &MechanismConfig) -> Result<NoisySeries> {
        let cfg = cfg.with_seed(self.next_seed());
        perturb(series, &cfg)
    }
}
