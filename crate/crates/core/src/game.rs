//! The membership distinguishability game: the challenger, the dataset
//! builders for each adversarial prior, and the scoring round.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{aggregate, AggregateSeries, SlotRange, UserId, UserPanel};
use crate::dp::{self, MechanismConfig};
use crate::math;
use crate::metrics::GameReport;
use crate::seed;
use crate::{Error, Result};

/// Redraws allowed per group before giving up on uniqueness.
pub const MAX_REDRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub m: usize,
    pub inference_window: SlotRange,
    pub observation_window: SlotRange,
    pub seed: u64,
}

impl GameConfig {
    /// Configuration whose observation and inference windows coincide.
    pub fn coinciding(m: usize, window: SlotRange, seed: u64) -> Self {
        Self { m, inference_window: window, observation_window: window, seed }
    }

    pub fn validate(&self, panel: &UserPanel) -> Result<()> {
        if self.m < 2 || self.m + 1 > panel.len() {
            return Err(Error::GroupSizeOutOfRange { m: self.m, users: panel.len() });
        }
        panel.grid().check(self.inference_window)?;
        panel.grid().check(self.observation_window)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    /// The adversary knows the locations of a fraction `alpha` of all users.
    SubsetLocations { alpha: f64 },
    /// The adversary saw past aggregates of the very groups released later.
    SameGroups { beta: usize },
    /// The adversary saw past aggregates of `beta` other groups.
    DifferentGroups { beta: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    In,
    Out,
}

impl Label {
    pub fn is_in(self) -> bool {
        self == Label::In
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub aggregate: AggregateSeries,
    pub label: Label,
    /// Sorted member ids.
    pub group: Vec<UserId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentDataset {
    pub target: UserId,
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

impl ExperimentDataset {
    pub fn train_labels(&self) -> Vec<bool> {
        self.train.iter().map(|s| s.label.is_in()).collect()
    }

    pub fn test_labels(&self) -> Vec<bool> {
        self.test.iter().map(|s| s.label.is_in()).collect()
    }

    /// Distinct groups in the training and in the test split.
    pub fn group_sets(&self) -> (BTreeSet<Vec<UserId>>, BTreeSet<Vec<UserId>>) {
        let collect = |v: &[LabeledSample]| v.iter().map(|s| s.group.clone()).collect();
        (collect(&self.train), collect(&self.test))
    }
}

/// Challenge aggregate produced by one round. The hidden bit stays with the
/// challenger until [`Challenge::reveal`] is called.
#[derive(Clone, Debug, PartialEq)]
pub struct Challenge {
    pub aggregate: AggregateSeries,
    pub upsilon: Vec<UserId>,
    hidden_bit: u8,
    replacement: Option<UserId>,
}

impl Challenge {
    /// The bit `b` (0 = target included) and, for `b = 1`, the user that
    /// took the target's place.
    pub fn reveal(&self) -> (u8, Option<UserId>) {
        (self.hidden_bit, self.replacement)
    }
}

/// Plays the challenger once with a uniformly drawn bit.
pub fn challenger_round(panel: &UserPanel, target: UserId, cfg: &GameConfig) -> Result<Challenge> {
    challenger_round_with_bit(panel, target, cfg, None)
}

/// Plays the challenger once; `force` fixes the bit instead of drawing it.
pub fn challenger_round_with_bit(
    panel: &UserPanel,
    target: UserId,
    cfg: &GameConfig,
    force: Option<u8>,
) -> Result<Challenge> {
    cfg.validate(panel)?;
    if !panel.contains(target) {
        return Err(Error::UnknownUser(target));
    }
    let mut rng = seed::rng_for(cfg.seed, "challenger", u64::from(target));
    let mut others: Vec<UserId> = panel.users().iter().copied().filter(|&u| u != target).collect();
    partial_shuffle(&mut others, cfg.m - 1, &mut rng);
    let upsilon: Vec<UserId> = others[..cfg.m - 1].to_vec();
    let bit = match force {
        Some(b) => b.min(1),
        None => u8::from(rng.gen::<bool>()),
    };
    let (extra, replacement) = if bit == 0 {
        (target, None)
    } else {
        let u = others[rng.gen_range(cfg.m - 1..others.len())];
        (u, Some(u))
    };
    let mut group = upsilon.clone();
    group.push(extra);
    Ok(Challenge {
        aggregate: aggregate(panel, &group, cfg.inference_window)?,
        upsilon,
        hidden_bit: bit,
        replacement,
    })
}

/// Moves a uniform random `k`-subset of `pool` to its front.
fn partial_shuffle<R: Rng + ?Sized>(pool: &mut [UserId], k: usize, rng: &mut R) {
    for i in 0..k {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
}

/// Draws unique groups of a fixed size around one target.
struct GroupSampler {
    target: UserId,
    m: usize,
    seen: BTreeSet<Vec<UserId>>,
    rng: seed::Rng,
}

impl GroupSampler {
    fn new(target: UserId, m: usize, seed: u64) -> Self {
        Self { target, m, seen: BTreeSet::new(), rng: seed::rng(seed) }
    }

    /// Draws a group from `pool` (which must not contain the target),
    /// adding the target when `label` is in.
    fn draw(&mut self, pool: &mut [UserId], label: Label) -> Result<Vec<UserId>> {
        let k = if label.is_in() { self.m - 1 } else { self.m };
        if pool.len() < k {
            return Err(Error::InfeasiblePrior(alloc::format!(
                "pool of {} users cannot form groups of {}",
                pool.len(),
                self.m
            )));
        }
        for _ in 0..MAX_REDRAWS {
            partial_shuffle(pool, k, &mut self.rng);
            let mut g: Vec<UserId> = pool[..k].to_vec();
            if label.is_in() {
                g.push(self.target);
            }
            g.sort_unstable();
            if self.seen.insert(g.clone()) {
                return Ok(g);
            }
        }
        Err(Error::GroupCollision(MAX_REDRAWS))
    }

    /// `n / 2` in-groups followed by `n / 2` out-groups.
    fn draw_balanced(&mut self, pool: &mut [UserId], n: usize) -> Result<Vec<(Vec<UserId>, Label)>> {
        let mut out = Vec::with_capacity(n);
        for label in [Label::In, Label::Out] {
            for _ in 0..n / 2 {
                out.push((self.draw(pool, label)?, label));
            }
        }
        Ok(out)
    }
}

fn check_even(n: usize) -> Result<()> {
    if n % 2 == 0 {
        Ok(())
    } else {
        Err(Error::OddCount(n))
    }
}

fn samples(
    panel: &UserPanel,
    groups: &[(Vec<UserId>, Label)],
    window: SlotRange,
) -> Result<Vec<LabeledSample>> {
    groups
        .iter()
        .map(|(g, label)| {
            Ok(LabeledSample { aggregate: aggregate(panel, g, window)?, label: *label, group: g.clone() })
        })
        .collect()
}

fn require_target(panel: &UserPanel, target: UserId) -> Result<()> {
    if panel.contains(target) {
        Ok(())
    } else {
        Err(Error::UnknownUser(target))
    }
}

/// Known-user set `Y` of the subset prior: the target plus
/// `ceil(alpha |U|) - 1` other users.
pub fn known_users(panel: &UserPanel, target: UserId, alpha: f64, seed: u64) -> Result<Vec<UserId>> {
    require_target(panel, target)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InfeasiblePrior(alloc::format!("alpha {alpha} outside (0, 1]")));
    }
    let size = (math::ceil(alpha * panel.len() as f64) as usize).clamp(1, panel.len());
    let mut others: Vec<UserId> = panel.users().iter().copied().filter(|&u| u != target).collect();
    let mut rng = seed::rng_for(seed, "known-users", u64::from(target));
    partial_shuffle(&mut others, size - 1, &mut rng);
    let mut y: Vec<UserId> = others[..size - 1].to_vec();
    y.push(target);
    y.sort_unstable();
    Ok(y)
}

/// Dataset for the subset-of-locations prior. Training groups come from the
/// known users `Y`, test groups from the unknown users plus the target.
/// With `alpha = 1` nobody is unknown and test groups are drawn from all
/// users, kept distinct from the training groups.
pub fn build_subset_prior(
    panel: &UserPanel,
    target: UserId,
    cfg: &GameConfig,
    prior: Prior,
    n_train: usize,
    n_test: usize,
) -> Result<ExperimentDataset> {
    let Prior::SubsetLocations { alpha } = prior else {
        return Err(Error::InfeasiblePrior("expected the subset-of-locations prior".into()));
    };
    cfg.validate(panel)?;
    require_target(panel, target)?;
    if cfg.observation_window != cfg.inference_window {
        return Err(Error::WindowsMustCoincide);
    }
    check_even(n_train)?;
    check_even(n_test)?;
    let y = known_users(panel, target, alpha, cfg.seed)?;
    if y.len() <= cfg.m {
        return Err(Error::InfeasiblePrior(alloc::format!(
            "ceil(alpha |U|) = {} must exceed m = {}",
            y.len(),
            cfg.m
        )));
    }
    let mut train_pool: Vec<UserId> = y.iter().copied().filter(|&u| u != target).collect();
    let mut test_pool: Vec<UserId> = if alpha >= 1.0 {
        train_pool.clone()
    } else {
        panel.users().iter().copied().filter(|u| y.binary_search(u).is_err()).collect()
    };
    if test_pool.len() < cfg.m {
        return Err(Error::InfeasiblePrior(alloc::format!(
            "only {} users outside the prior for groups of {}",
            test_pool.len(),
            cfg.m
        )));
    }
    let mut sampler = GroupSampler::new(target, cfg.m, seed::derive(cfg.seed, "groups", u64::from(target)));
    let train_groups = sampler.draw_balanced(&mut train_pool, n_train)?;
    let test_groups = sampler.draw_balanced(&mut test_pool, n_test)?;
    Ok(ExperimentDataset {
        target,
        train: samples(panel, &train_groups, cfg.inference_window)?,
        test: samples(panel, &test_groups, cfg.inference_window)?,
    })
}

fn check_slices(panel: &UserPanel, cfg: &GameConfig, slices: &[SlotRange]) -> Result<()> {
    cfg.validate(panel)?;
    if cfg.observation_window.overlaps(&cfg.inference_window) {
        return Err(Error::WindowsOverlap);
    }
    if slices.is_empty() {
        return Err(Error::InfeasiblePrior("no observation slices".into()));
    }
    for s in slices {
        panel.grid().check(*s)?;
        if s.overlaps(&cfg.inference_window) {
            return Err(Error::WindowsOverlap);
        }
        if !cfg.observation_window.contains(s) {
            return Err(Error::InfeasiblePrior(alloc::format!(
                "slice {s} lies outside the observation window {}",
                cfg.observation_window
            )));
        }
        if s.len() != cfg.inference_window.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "slice {s} and inference window {} differ in length",
                cfg.inference_window
            )));
        }
    }
    Ok(())
}

fn pool_without(panel: &UserPanel, target: UserId) -> Vec<UserId> {
    panel.users().iter().copied().filter(|&u| u != target).collect()
}

/// One training sample per group per slice.
fn sliced_samples(
    panel: &UserPanel,
    groups: &[(Vec<UserId>, Label)],
    slices: &[SlotRange],
) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::with_capacity(groups.len() * slices.len());
    for s in slices {
        out.extend(samples(panel, groups, *s)?);
    }
    Ok(out)
}

/// Dataset for the same-groups prior: `beta` groups observed on every
/// slice of the observation window and tested on the inference window.
pub fn build_same_groups_prior(
    panel: &UserPanel,
    target: UserId,
    cfg: &GameConfig,
    prior: Prior,
    slices: &[SlotRange],
) -> Result<ExperimentDataset> {
    let Prior::SameGroups { beta } = prior else {
        return Err(Error::InfeasiblePrior("expected the same-groups prior".into()));
    };
    require_target(panel, target)?;
    check_even(beta)?;
    check_slices(panel, cfg, slices)?;
    let mut pool = pool_without(panel, target);
    let mut sampler = GroupSampler::new(target, cfg.m, seed::derive(cfg.seed, "groups", u64::from(target)));
    let groups = sampler.draw_balanced(&mut pool, beta)?;
    Ok(ExperimentDataset {
        target,
        train: sliced_samples(panel, &groups, slices)?,
        test: samples(panel, &groups, cfg.inference_window)?,
    })
}

/// Dataset for the different-groups prior: `beta + n_test` unique groups,
/// split by label so that `beta` train on the observation slices and
/// `n_test` test on the inference window.
pub fn build_diff_groups_prior(
    panel: &UserPanel,
    target: UserId,
    cfg: &GameConfig,
    prior: Prior,
    slices: &[SlotRange],
    n_test: usize,
) -> Result<ExperimentDataset> {
    let Prior::DifferentGroups { beta } = prior else {
        return Err(Error::InfeasiblePrior("expected the different-groups prior".into()));
    };
    require_target(panel, target)?;
    check_even(beta)?;
    check_even(n_test)?;
    check_slices(panel, cfg, slices)?;
    let mut pool = pool_without(panel, target);
    let mut sampler = GroupSampler::new(target, cfg.m, seed::derive(cfg.seed, "groups", u64::from(target)));
    let all = sampler.draw_balanced(&mut pool, beta + n_test)?;
    let half = (beta + n_test) / 2;
    let (ins, outs) = all.split_at(half);
    // Groups were drawn independently, so taking a prefix of each label is
    // a uniformly random stratified split.
    let mut train = Vec::with_capacity(beta);
    train.extend_from_slice(&ins[..beta / 2]);
    train.extend_from_slice(&outs[..beta / 2]);
    let mut test = Vec::with_capacity(n_test);
    test.extend_from_slice(&ins[beta / 2..]);
    test.extend_from_slice(&outs[beta / 2..]);
    Ok(ExperimentDataset {
        target,
        train: sliced_samples(panel, &train, slices)?,
        test: samples(panel, &test, cfg.inference_window)?,
    })
}

/// Dataset for an adversary that already knows the raw aggregates of the
/// released groups: `n_groups` groups over the inference window form both
/// the training and the test split.
pub fn build_perfect_prior(
    panel: &UserPanel,
    target: UserId,
    cfg: &GameConfig,
    n_groups: usize,
) -> Result<ExperimentDataset> {
    cfg.validate(panel)?;
    require_target(panel, target)?;
    check_even(n_groups)?;
    let mut pool = pool_without(panel, target);
    let mut sampler = GroupSampler::new(target, cfg.m, seed::derive(cfg.seed, "groups", u64::from(target)));
    let groups = sampler.draw_balanced(&mut pool, n_groups)?;
    let released = samples(panel, &groups, cfg.inference_window)?;
    Ok(ExperimentDataset { target, train: released.clone(), test: released })
}

/// Which splits receive noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryMode {
    /// Trains on raw aggregates, tests on released ones.
    Passive,
    /// Adds its own noise to the training aggregates as well.
    Strategic,
}

impl AdversaryMode {
    pub fn name(self) -> &'static str {
        match self {
            AdversaryMode::Passive => "passive",
            AdversaryMode::Strategic => "strategic",
        }
    }
}

/// Perturbs every test sample (and, for a strategic adversary, every
/// training sample) with independent noise.
pub fn perturb_dataset(
    dataset: &ExperimentDataset,
    mechanism: &MechanismConfig,
    mode: AdversaryMode,
    seed: u64,
) -> Result<ExperimentDataset> {
    let noisy = |split: u64, samples: &[LabeledSample]| -> Result<Vec<LabeledSample>> {
        samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let cfg = mechanism.with_seed(seed::derive_path(seed, "perturb", &[split, i as u64]));
                Ok(LabeledSample {
                    aggregate: dp::perturb(&s.aggregate, &cfg)?.series,
                    label: s.label,
                    group: s.group.clone(),
                })
            })
            .collect()
    };
    let train = match mode {
        AdversaryMode::Passive => dataset.train.clone(),
        AdversaryMode::Strategic => noisy(0, &dataset.train)?,
    };
    Ok(ExperimentDataset { target: dataset.target, train, test: noisy(1, &dataset.test)? })
}

/// Anything that assigns each test sample a score, higher meaning more
/// likely to contain the target.
pub trait Distinguisher {
    fn score(&self, samples: &[LabeledSample]) -> Result<Vec<f64>>;
}

/// Scores the test split and tallies the outcome.
pub fn play_game<D: Distinguisher + ?Sized>(dataset: &ExperimentDataset, model: &D) -> Result<GameReport> {
    let scores = model.score(&dataset.test)?;
    if scores.len() != dataset.test.len() {
        return Err(Error::ShapeMismatch("one score per test sample expected".into()));
    }
    GameReport::from_scores(dataset.target, &scores, &dataset.test_labels())
}
