//! Synthetic mobility panels.
//!
//! Two population models are provided. Commuters follow a fixed weekday
//! itinerary between a home and a work ROI with occasional extra trips and
//! sparse weekends. Cabs take a lazy random walk over a square ROI grid,
//! reporting most hours. ROI popularity is Zipf-like, so popular places are
//! shared by many users.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{LocationMatrix, RoiSet, TimeGrid, UserId, UserPanel};
use crate::math;
use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PanelKind {
    Commuter,
    Cab,
}

impl PanelKind {
    pub fn default_regularity(self) -> f64 {
        match self {
            PanelKind::Commuter => 0.9,
            PanelKind::Cab => 0.2,
        }
    }

    pub fn default_active_fraction(self) -> f64 {
        match self {
            PanelKind::Commuter => 0.17,
            PanelKind::Cab => 0.67,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub user_count: usize,
    /// Number of ROIs including the null ROI.
    pub roi_count: usize,
    pub slot_count: usize,
    pub kind: PanelKind,
    pub seed: u64,
    #[serde(default)]
    pub regularity: Option<f64>,
    #[serde(default)]
    pub active_slot_fraction: Option<f64>,
    /// Zipf exponent of ROI popularity.
    #[serde(default = "default_popularity")]
    pub popularity_exponent: f64,
}

fn default_popularity() -> f64 {
    1.5
}

impl GeneratorConfig {
    pub fn new(kind: PanelKind, user_count: usize, roi_count: usize, slot_count: usize, seed: u64) -> Self {
        Self {
            user_count,
            roi_count,
            slot_count,
            kind,
            seed,
            regularity: None,
            active_slot_fraction: None,
            popularity_exponent: default_popularity(),
        }
    }

    pub fn regularity(&self) -> f64 {
        self.regularity.unwrap_or(self.kind.default_regularity())
    }

    pub fn active_slot_fraction(&self) -> f64 {
        self.active_slot_fraction.unwrap_or(self.kind.default_active_fraction())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidGenerator(m.into()));
        if self.user_count == 0 {
            return bad("user_count must be positive");
        }
        if self.roi_count < 2 {
            return bad("roi_count must include at least one real ROI and the null ROI");
        }
        if self.slot_count == 0 {
            return bad("slot_count must be positive");
        }
        if self.kind == PanelKind::Commuter && self.roi_count < 4 {
            return bad("commuters need at least three real ROIs");
        }
        if !(0.0..=1.0).contains(&self.regularity()) {
            return bad("regularity must lie in [0, 1]");
        }
        let f = self.active_slot_fraction();
        if !(f > 0.0 && f <= 1.0) {
            return bad("active_slot_fraction must lie in (0, 1]");
        }
        if !(self.popularity_exponent >= 0.0) {
            return bad("popularity_exponent must be non-negative");
        }
        Ok(())
    }
}

/// Per-user behaviour drawn by the generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityProfile {
    pub kind: PanelKind,
    /// Commuters: home station. Cabs: the stand the walk resets to.
    pub home_rois: Vec<u32>,
    pub work_rois: Vec<u32>,
    pub leisure_rois: Vec<u32>,
    pub morning_hour: usize,
    pub evening_hour: usize,
    /// Mean number of real-ROI reports per day implied by the other fields.
    pub reports_per_day: f64,
    pub regularity: f64,
    pub active_slot_fraction: f64,
}

impl MobilityProfile {
    pub fn validate(&self, rois: &RoiSet) -> Result<()> {
        let real = rois.real_count() as u32;
        let bad = |m: &str| Err(Error::InvalidGenerator(m.into()));
        if self.home_rois.is_empty() || (self.kind == PanelKind::Commuter && self.work_rois.is_empty()) {
            return bad("profile ROI sets must be non-empty");
        }
        let all = self.home_rois.iter().chain(&self.work_rois).chain(&self.leisure_rois);
        if all.clone().any(|&r| r >= real) {
            return bad("profile ROIs must be real ROIs");
        }
        if !(0.0..=1.0).contains(&self.regularity) {
            return bad("regularity must lie in [0, 1]");
        }
        if !(self.reports_per_day >= 0.0) {
            return bad("reports_per_day must be non-negative");
        }
        if !(self.active_slot_fraction > 0.0 && self.active_slot_fraction <= 1.0) {
            return bad("active_slot_fraction must lie in (0, 1]");
        }
        Ok(())
    }

    /// Expected extra trips on a weekday and on a weekend day for a
    /// commuter, chosen so the active-slot fraction meets its target.
    /// Weekends run at half the weekday rate.
    pub fn extra_trip_rates(&self, slots_per_day: usize) -> (f64, f64) {
        let per_week = self.active_slot_fraction * 7.0 * slots_per_day as f64;
        let weekday = ((per_week - 10.0) / 6.0).max(0.0);
        (weekday, weekday / 2.0)
    }
}

/// Cumulative Zipf weights over `n` items.
#[derive(Clone, Debug)]
struct Popularity {
    cumulative: Vec<f64>,
}

impl Popularity {
    fn new(n: usize, exponent: f64) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..n)
            .map(|i| {
                acc += 1.0 / math::powf(i as f64 + 1.0, exponent);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let u = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1) as u32
    }

    fn draw_excluding<R: Rng + ?Sized>(&self, rng: &mut R, taken: &[u32]) -> u32 {
        loop {
            let r = self.draw(rng);
            if !taken.contains(&r) {
                return r;
            }
        }
    }
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = math::exp(-lambda);
    let mut k = 0;
    let mut p = rng.gen::<f64>();
    while p > limit {
        k += 1;
        p *= rng.gen::<f64>();
    }
    k
}

fn jitter<R: Rng + ?Sized>(rng: &mut R, value: f64, spread: f64) -> f64 {
    (value * (1.0 + spread * (2.0 * rng.gen::<f64>() - 1.0))).clamp(1e-3, 0.98)
}

/// Distinct leisure destinations per commuter.
pub const LEISURE_POOL: usize = 8;

/// Draws the profile of one commuter.
fn commuter_profile<R: Rng + ?Sized>(cfg: &GeneratorConfig, pop: &Popularity, rng: &mut R) -> MobilityProfile {
    let real = cfg.roi_count - 1;
    let home = pop.draw(rng);
    let work = pop.draw_excluding(rng, &[home]);
    let mut leisure: Vec<u32> = Vec::new();
    let wanted = LEISURE_POOL.min(real.saturating_sub(2));
    while leisure.len() < wanted {
        let taken: Vec<u32> = leisure.iter().copied().chain([home, work]).collect();
        leisure.push(pop.draw_excluding(rng, &taken));
    }
    let active = jitter(rng, cfg.active_slot_fraction(), 0.3).max(10.0 / 168.0);
    let mut p = MobilityProfile {
        kind: PanelKind::Commuter,
        home_rois: vec![home],
        work_rois: vec![work],
        leisure_rois: leisure,
        morning_hour: rng.gen_range(6..10),
        evening_hour: rng.gen_range(16..20),
        reports_per_day: 0.0,
        regularity: cfg.regularity(),
        active_slot_fraction: active,
    };
    let (wd, we) = p.extra_trip_rates(24);
    p.reports_per_day = 2.0 * (5.0 * (2.0 + wd) + 2.0 * we) / 7.0;
    p
}

fn cab_profile<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> MobilityProfile {
    let real = cfg.roi_count - 1;
    let stand = rng.gen_range(0..real as u32);
    let active = jitter(rng, cfg.active_slot_fraction(), 0.28);
    MobilityProfile {
        kind: PanelKind::Cab,
        home_rois: vec![stand],
        work_rois: Vec::new(),
        leisure_rois: Vec::new(),
        morning_hour: 0,
        evening_hour: 0,
        reports_per_day: active * 24.0 * CAB_STEPS_PER_ACTIVE_SLOT,
        regularity: cfg.regularity(),
        active_slot_fraction: active,
    }
}

/// Mean cells reported in an active cab hour.
const CAB_STEPS_PER_ACTIVE_SLOT: f64 = 1.75;

/// First slot of `hour` on the day starting at `day_start`.
fn slot_at(grid: &TimeGrid, day_start: usize, hour: usize) -> Option<usize> {
    let s = day_start + hour * grid.slots_per_hour().max(1);
    (s < grid.slot_count() && hour < 24).then_some(s)
}

/// Generates the cells of one user following `profile`.
pub fn generate_user<R: Rng + ?Sized>(
    user: UserId,
    profile: &MobilityProfile,
    grid: &TimeGrid,
    rois: &RoiSet,
    rng: &mut R,
) -> Result<LocationMatrix> {
    profile.validate(rois)?;
    let cells = match profile.kind {
        PanelKind::Commuter => commuter_cells(profile, grid, rois, rng),
        PanelKind::Cab => cab_cells(profile, grid, rois, rng),
    };
    LocationMatrix::new(user, cells, grid, rois)
}

fn commuter_cells<R: Rng + ?Sized>(
    p: &MobilityProfile,
    grid: &TimeGrid,
    rois: &RoiSet,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let real = rois.real_count() as u32;
    let per_day = grid.slots_per_day();
    let (wd_rate, we_rate) = p.extra_trip_rates(per_day);
    let mut out = Vec::new();
    let templated = |rng: &mut R, roi: u32| {
        if rng.gen::<f64>() < p.regularity {
            roi
        } else {
            rng.gen_range(0..real)
        }
    };
    let days = grid.slot_count().div_ceil(per_day);
    for day in 0..days {
        let start = day * per_day;
        let weekend = grid.is_weekend(start);
        let home = p.home_rois[rng.gen_range(0..p.home_rois.len())];
        let work = p.work_rois[rng.gen_range(0..p.work_rois.len())];
        if !weekend {
            if let Some(s) = slot_at(grid, start, p.morning_hour) {
                out.push((templated(rng, home) as usize, s));
                out.push((templated(rng, work) as usize, s));
            }
            if let Some(s) = slot_at(grid, start, p.evening_hour) {
                out.push((templated(rng, work) as usize, s));
                out.push((templated(rng, home) as usize, s));
            }
        }
        let trips = poisson(rng, if weekend { we_rate } else { wd_rate });
        for _ in 0..trips {
            let hour = rng.gen_range(7..23);
            let Some(s) = slot_at(grid, start, hour) else { continue };
            let pick = |rng: &mut R| -> u32 {
                let u = rng.gen::<f64>();
                if u < 0.35 || p.leisure_rois.is_empty() {
                    home
                } else if u < 0.45 && !weekend {
                    work
                } else {
                    p.leisure_rois[rng.gen_range(0..p.leisure_rois.len())]
                }
            };
            let a = pick(rng);
            let b = pick(rng);
            out.push((a as usize, s));
            out.push((b as usize, s));
        }
    }
    out
}

fn cab_cells<R: Rng + ?Sized>(
    p: &MobilityProfile,
    grid: &TimeGrid,
    rois: &RoiSet,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let real = rois.real_count();
    let side = math::ceil(math::sqrt(real as f64)) as usize;
    let stand = p.home_rois[0] as usize;
    let mut pos = stand;
    let step = |rng: &mut R, pos: usize| -> usize {
        let (r, c) = (pos / side, pos % side);
        let (nr, nc) = match rng.gen_range(0..5) {
            0 if r > 0 => (r - 1, c),
            1 if r + 1 < side => (r + 1, c),
            2 if c > 0 => (r, c - 1),
            3 if c + 1 < side => (r, c + 1),
            _ => (r, c),
        };
        let next = nr * side + nc;
        if next < real {
            next
        } else {
            pos
        }
    };
    let mut out = Vec::new();
    for slot in 0..grid.slot_count() {
        if rng.gen::<f64>() < p.regularity * 0.1 {
            pos = stand;
        }
        if rng.gen::<f64>() >= p.active_slot_fraction {
            pos = step(rng, pos);
            continue;
        }
        let steps = 1 + usize::from(rng.gen::<f64>() < 0.5) + usize::from(rng.gen::<f64>() < 0.25);
        for _ in 0..steps {
            out.push((pos, slot));
            pos = step(rng, pos);
        }
    }
    out
}

/// Draws the profile of user `user` under `cfg`.
pub fn draw_profile(cfg: &GeneratorConfig, user: UserId) -> Result<MobilityProfile> {
    cfg.validate()?;
    let mut rng = seed::rng_for(cfg.seed, "profile", u64::from(user));
    Ok(match cfg.kind {
        PanelKind::Commuter => {
            let pop = Popularity::new(cfg.roi_count - 1, cfg.popularity_exponent);
            commuter_profile(cfg, &pop, &mut rng)
        }
        PanelKind::Cab => cab_profile(cfg, &mut rng),
    })
}

/// Generates a panel of users `0..user_count` on an hourly grid starting on
/// a Monday.
pub fn generate_panel(cfg: &GeneratorConfig) -> Result<UserPanel> {
    cfg.validate()?;
    let grid = TimeGrid::hourly(cfg.slot_count)?;
    let rois = RoiSet::new(cfg.roi_count)?;
    let pop = Popularity::new(cfg.roi_count - 1, cfg.popularity_exponent);
    let mut matrices = Vec::with_capacity(cfg.user_count);
    for u in 0..cfg.user_count as UserId {
        let mut prng = seed::rng_for(cfg.seed, "profile", u64::from(u));
        let profile = match cfg.kind {
            PanelKind::Commuter => commuter_profile(cfg, &pop, &mut prng),
            PanelKind::Cab => cab_profile(cfg, &mut prng),
        };
        let mut rng = seed::rng_for(cfg.seed, "cells", u64::from(u));
        matrices.push(generate_user(u, &profile, &grid, &rois, &mut rng)?);
    }
    UserPanel::new(grid, rois, matrices)
}

/// Splits users into three mobility tiers by number of real-ROI reports,
/// most mobile first. Ties keep user-id order; the last tier takes the
/// remainder.
pub fn tier_users(panel: &UserPanel) -> Result<[Vec<UserId>; 3]> {
    let counts: Vec<(UserId, usize)> = panel
        .matrices()
        .iter()
        .map(|m| (m.user(), m.reported_count(panel.rois())))
        .collect();
    tier_by_counts(&counts)
}

/// Tiering on precomputed `(user, count)` pairs.
pub fn tier_by_counts(counts: &[(UserId, usize)]) -> Result<[Vec<UserId>; 3]> {
    if counts.len() < 3 {
        return Err(Error::TooFewUsersForTiers(counts.len()));
    }
    let mut sorted = counts.to_vec();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let size = sorted.len() / 3;
    let ids: Vec<UserId> = sorted.into_iter().map(|(u, _)| u).collect();
    Ok([ids[..size].to_vec(), ids[size..2 * size].to_vec(), ids[2 * size..].to_vec()])
}

/// Samples `per_tier` users uniformly without replacement from each tier.
pub fn sample_targets(tiers: &[Vec<UserId>], per_tier: usize, seed: u64) -> Result<Vec<UserId>> {
    let mut out = Vec::with_capacity(per_tier * tiers.len());
    for (i, tier) in tiers.iter().enumerate() {
        if per_tier > tier.len() {
            return Err(Error::TierTooSmall { requested: per_tier, available: tier.len() });
        }
        let mut pool = tier.clone();
        let mut rng = seed::rng_for(seed, "tier", i as u64);
        for k in 0..per_tier {
            let j = rng.gen_range(k..pool.len());
            pool.swap(k, j);
        }
        out.extend_from_slice(&pool[..per_tier]);
    }
    Ok(out)
}
