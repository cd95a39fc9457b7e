//! Sweep orchestration: panels, job planning, a worker pool and result
//! persistence.
//!
//! Every job is one (panel, prior, window, m, repetition, target) cell. Jobs
//! carry their own seed derived from the root seed and the cell's
//! coordinates, so results do not depend on which worker ran them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use aggmia_core::classifiers::{ClassifierKind, ClassifierParams};
use aggmia_core::data::{sensitivity, NamedWindow, SlotRange, UserId, UserPanel};
use aggmia_core::dp::{MechanismConfig, MechanismKind};
use aggmia_core::experiment::{self, Pipeline};
use aggmia_core::game::{self, AdversaryMode, ExperimentDataset, GameConfig, Prior};
use aggmia_core::metrics::{self, GameReport};
use aggmia_core::seed;
use aggmia_core::synthgen;

use crate::error::{Error, Result};
use crate::io;
use crate::results::{self, ResultRow, BEST, NONE};
use crate::spec::{ExperimentSpec, PanelSpec, PriorSpec, TargetSpec};

pub const TIER_NAMES: [&str; 3] = ["high", "mid", "low"];

/// A panel ready for experiments, with its targets.
#[derive(Clone, Debug)]
pub struct LoadedPanel {
    pub name: String,
    pub panel: UserPanel,
    pub targets: Vec<(UserId, &'static str)>,
}

/// Generates or reads every panel of `spec` and picks its targets.
pub fn load_panels(spec: &ExperimentSpec, root: u64, base_dir: &Path) -> Result<Vec<LoadedPanel>> {
    spec.panels.iter().enumerate().map(|(i, p)| load_panel(spec, p, i, root, base_dir)).collect()
}

fn load_panel(spec: &ExperimentSpec, p: &PanelSpec, index: usize, root: u64, base_dir: &Path) -> Result<LoadedPanel> {
    let panel = match (&p.generator, &p.file) {
        (Some(g), None) => synthgen::generate_panel(&g.config(seed::derive(root, "panel", index as u64)))?,
        (None, Some(f)) => io::read_panel(&base_dir.join(f))?,
        _ => return Err(Error::Spec(format!("panel '{}' needs exactly one of generator or file", p.name))),
    };
    spec.validate_against(&p.name, &panel)?;
    let tiers = synthgen::tier_users(&panel)?;
    let tier_of = |u: UserId| {
        tiers.iter().position(|t| t.contains(&u)).map_or("none", |i| TIER_NAMES[i])
    };
    let ids = match &spec.targets {
        TargetSpec::PerTier(k) => synthgen::sample_targets(&tiers, *k, seed::derive(root, "targets", index as u64))?,
        TargetSpec::Ids(ids) => {
            if let Some(u) = ids.iter().find(|u| !panel.contains(**u)) {
                return Err(aggmia_core::Error::UnknownUser(*u).into());
            }
            ids.clone()
        }
    };
    let targets = ids.into_iter().map(|u| (u, tier_of(u))).collect();
    Ok(LoadedPanel { name: p.name.clone(), panel, targets })
}

/// Coordinates of one unit of work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Job {
    pub panel: usize,
    pub prior: usize,
    pub window: usize,
    pub m: usize,
    pub repetition: usize,
    pub target: UserId,
    pub tier: &'static str,
}

impl Job {
    fn seed(&self, root: u64) -> u64 {
        seed::derive_path(
            root,
            "job",
            &[
                self.panel as u64,
                self.prior as u64,
                self.window as u64,
                self.m as u64,
                self.repetition as u64,
                u64::from(self.target),
            ],
        )
    }
}

/// All jobs in canonical order.
pub fn plan(spec: &ExperimentSpec, panels: &[LoadedPanel]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for (pi, p) in panels.iter().enumerate() {
        for prior in 0..spec.priors.len() {
            for window in 0..spec.windows.len() {
                for &m in &spec.group_sizes {
                    for repetition in 0..spec.repetitions {
                        for &(target, tier) in &p.targets {
                            jobs.push(Job { panel: pi, prior, window, m, repetition, target, tier });
                        }
                    }
                }
            }
        }
    }
    jobs
}

/// Number of result rows a successful job emits.
pub fn rows_per_job(spec: &ExperimentSpec) -> usize {
    let variants = 1 + spec
        .mechanisms
        .as_ref()
        .map_or(0, |ms| ms.kinds.len() * ms.epsilons.len() * ms.modes.len());
    variants * (spec.classifiers.len() + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobError {
    pub job: usize,
    pub description: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timing {
    pub job: usize,
    pub description: String,
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub errors: Vec<JobError>,
    pub timings: Vec<Timing>,
}

/// Run-time overrides of the spec.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: usize,
    pub clamp_nonneg: bool,
}

/// Runs `spec`. Panel files are resolved relative to `base_dir`.
pub fn run(spec: &ExperimentSpec, opts: &RunOptions, base_dir: &Path) -> Result<RunOutput> {
    spec.validate()?;
    let root = opts.seed.unwrap_or(spec.seed);
    let panels = load_panels(spec, root, base_dir)?;
    let jobs = plan(spec, &panels);
    let ctx = Context { spec, panels: &panels, windows: spec.parsed_windows()?, root, clamp: spec.clamp_nonneg || opts.clamp_nonneg };
    Ok(run_jobs(&ctx, &jobs, opts.workers.max(1)))
}

struct Context<'a> {
    spec: &'a ExperimentSpec,
    panels: &'a [LoadedPanel],
    windows: Vec<NamedWindow>,
    root: u64,
    clamp: bool,
}

impl Context<'_> {
    fn describe(&self, job: &Job) -> String {
        format!(
            "panel={} prior={} window={} m={} rep={} target={}",
            self.panels[job.panel].name,
            self.spec.priors[job.prior].label(),
            self.windows[job.window].label(),
            job.m,
            job.repetition,
            job.target
        )
    }
}

fn run_jobs(ctx: &Context<'_>, jobs: &[Job], workers: usize) -> RunOutput {
    let next = AtomicUsize::new(0);
    let mut done: Vec<(usize, Result<Vec<ResultRow>>, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers.min(jobs.len()).max(1))
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(job) = jobs.get(i) else { break };
                        let start = Instant::now();
                        let res = execute(ctx, job);
                        out.push((i, res, start.elapsed().as_secs_f64()));
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    done.sort_by_key(|d| d.0);

    let mut out = RunOutput::default();
    for (i, res, secs) in done {
        let description = ctx.describe(&jobs[i]);
        out.timings.push(Timing { job: i, description: description.clone(), wall_time: secs });
        match res {
            Ok(rows) => out.rows.extend(rows),
            Err(e) => out.errors.push(JobError { job: i, description, message: e.to_string() }),
        }
    }
    out
}

fn build_dataset(ctx: &Context<'_>, job: &Job, job_seed: u64) -> Result<(ExperimentDataset, SlotRange)> {
    let panel = &ctx.panels[job.panel].panel;
    let grid = panel.grid();
    let week = ctx.spec.inference_week_for(panel);
    let window = ctx.windows[job.window];
    let ti = grid.resolve(window, week)?;
    let coinciding = GameConfig::coinciding(job.m, ti, job_seed);
    let past = || -> Result<(GameConfig, Vec<SlotRange>)> {
        let cfg = GameConfig {
            m: job.m,
            inference_window: ti,
            observation_window: SlotRange::new(0, week * grid.slots_per_week()),
            seed: job_seed,
        };
        Ok((cfg, grid.weekly_slices(window, 0..week)?))
    };
    let t = job.target;
    let ds = match ctx.spec.priors[job.prior] {
        PriorSpec::SubsetLocations { alpha, train, test } => {
            game::build_subset_prior(panel, t, &coinciding, Prior::SubsetLocations { alpha }, train, test)?
        }
        PriorSpec::SameGroups { beta } => {
            let (cfg, slices) = past()?;
            game::build_same_groups_prior(panel, t, &cfg, Prior::SameGroups { beta }, &slices)?
        }
        PriorSpec::DifferentGroups { beta, test } => {
            let (cfg, slices) = past()?;
            game::build_diff_groups_prior(panel, t, &cfg, Prior::DifferentGroups { beta }, &slices, test)?
        }
        PriorSpec::Perfect { groups } => game::build_perfect_prior(panel, t, &coinciding, groups)?,
    };
    Ok((ds, ti))
}

struct Variant<'a> {
    mechanism: &'a str,
    epsilon: Option<f64>,
    mode: &'a str,
    mre: Option<f64>,
}

fn emit(
    ctx: &Context<'_>,
    job: &Job,
    ti: SlotRange,
    v: &Variant<'_>,
    reports: &[(ClassifierKind, GameReport)],
    raw: Option<&[f64]>,
) -> Result<Vec<ResultRow>> {
    let row = |classifier: &str, auc: f64, raw_auc: Option<f64>| -> Result<ResultRow> {
        Ok(ResultRow {
            experiment: ctx.spec.name.clone(),
            panel: ctx.panels[job.panel].name.clone(),
            repetition: job.repetition,
            target: job.target,
            tier: job.tier.to_string(),
            classifier: classifier.to_string(),
            m: job.m,
            ti_len: ti.len(),
            window: ctx.windows[job.window].label(),
            prior: ctx.spec.priors[job.prior].label().to_string(),
            mechanism: v.mechanism.to_string(),
            epsilon: v.epsilon,
            mode: v.mode.to_string(),
            auc,
            pl: metrics::privacy_loss(auc)?,
            pg: raw_auc.map(|r| metrics::privacy_gain(r, auc)).transpose()?,
            mre: v.mre,
        })
    };
    let mut rows = Vec::with_capacity(reports.len() + 1);
    let mut best: Option<(usize, f64)> = None;
    for (i, (kind, rep)) in reports.iter().enumerate() {
        rows.push(row(kind.name(), rep.auc, raw.map(|r| r[i]))?);
        if best.map_or(true, |(_, a)| rep.auc > a) {
            best = Some((i, rep.auc));
        }
    }
    if let Some((_, auc)) = best {
        let raw_best = raw.map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        rows.push(row(BEST, auc, raw_best)?);
    }
    Ok(rows)
}

fn execute(ctx: &Context<'_>, job: &Job) -> Result<Vec<ResultRow>> {
    let job_seed = job.seed(ctx.root);
    let (ds, ti) = build_dataset(ctx, job, job_seed)?;
    let params = ClassifierParams::default().with_seed(seed::derive(job_seed, "classifier", 0));
    let kinds = &ctx.spec.classifiers;

    let prepared = experiment::prepare(&ds.train)?;
    let pipelines: Vec<Pipeline> =
        kinds.iter().map(|&k| experiment::fit(&prepared, k, &params)).collect::<aggmia_core::Result<_>>()?;
    let raw: Vec<(ClassifierKind, GameReport)> = kinds
        .iter()
        .zip(&pipelines)
        .map(|(&k, p)| Ok((k, game::play_game(&ds, p)?)))
        .collect::<aggmia_core::Result<_>>()?;
    let raw_aucs: Vec<f64> = raw.iter().map(|r| r.1.auc).collect();
    let mut rows = emit(ctx, job, ti, &Variant { mechanism: NONE, epsilon: None, mode: NONE, mre: None }, &raw, None)?;

    let Some(ms) = &ctx.spec.mechanisms else { return Ok(rows) };
    let sens = sensitivity(&ctx.panels[job.panel].panel, ti)?;
    for &kind in &ms.kinds {
        let kind_index = MechanismKind::ALL.iter().position(|k| *k == kind).unwrap_or(0) as u64;
        for (ei, &eps) in ms.epsilons.iter().enumerate() {
            let mut cfg = MechanismConfig::new(kind, eps, sens).with_delta(ms.delta).with_kappa(ms.kappa.min(ti.len()));
            cfg.clamp_nonneg = ctx.clamp;
            // Both adversaries face the same released noise.
            let noise_seed = seed::derive_path(job_seed, "mechanism", &[kind_index, ei as u64]);
            let mut mre = None;
            for &mode in &ms.modes {
                let noisy = game::perturb_dataset(&ds, &cfg, mode, noise_seed)?;
                if mre.is_none() {
                    mre = Some(mean_mre(&ds, &noisy, ctx.spec.gamma_scope)?);
                }
                let reports = match mode {
                    AdversaryMode::Passive => kinds
                        .iter()
                        .zip(&pipelines)
                        .map(|(&k, p)| Ok((k, game::play_game(&noisy, p)?)))
                        .collect::<aggmia_core::Result<Vec<_>>>()?,
                    AdversaryMode::Strategic => experiment::evaluate(&noisy, kinds, &params)?,
                };
                let v = Variant { mechanism: kind.name(), epsilon: Some(eps), mode: mode.name(), mre };
                rows.extend(emit(ctx, job, ti, &v, &reports, Some(&raw_aucs))?);
            }
        }
    }
    Ok(rows)
}

/// Mean over released test aggregates of their MRE against the raw ones.
fn mean_mre(raw: &ExperimentDataset, noisy: &ExperimentDataset, scope: metrics::GammaScope) -> Result<f64> {
    let total = raw
        .test
        .iter()
        .zip(&noisy.test)
        .map(|(r, n)| metrics::mre(&r.aggregate, &n.aggregate, scope))
        .sum::<aggmia_core::Result<f64>>()?;
    Ok(total / raw.test.len() as f64)
}

/// Writes `results.csv`, `results.json`, `errors.log` and `timings.csv`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    results::write_csv(&out.rows, &dir.join("results.csv"))?;
    results::write_json(&out.rows, &dir.join("results.json"))?;

    let mut log = String::new();
    for e in &out.errors {
        let _ = writeln!(log, "job {} [{}]: {}", e.job, e.description, e.message);
    }
    let path = dir.join("errors.log");
    fs::write(&path, log).map_err(|e| Error::io(&path, e))?;

    let path = dir.join("timings.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    w.write_record(["job", "description", "wall_time"]).map_err(|e| Error::csv(&path, e))?;
    for t in &out.timings {
        w.serialize((t.job, &t.description, t.wall_time)).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Worker count from the flag, then `AGGMIA_WORKERS`, then the number of
/// available cores.
pub fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("AGGMIA_WORKERS").ok().and_then(|v| v.parse().ok()))
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}
