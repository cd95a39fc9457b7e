//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.
//!
//! Positional arguments filter criteria by id prefix, e.g.
//! `cargo test --test acceptance -- C1 C4`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use aggmia::results::{self, ResultRow, BEST};
use aggmia::runner::{self, RunOptions};
use aggmia::spec::ExperimentSpec;
use aggmia_core::classifiers::{knn, lr, mlp, rf};
use aggmia_core::data::{aggregate, sensitivity, AggregateSeries, LocationMatrix, RoiSet, SlotRange, TimeGrid, UserPanel};
use aggmia_core::dp as noise;
use aggmia_core::dp::transform::{dct, dft, idct, idft, Complex};
use aggmia_core::game::{challenger_round, challenger_round_with_bit, GameConfig};
use aggmia_core::linalg::Matrix;
use aggmia_core::metrics::{self, GammaScope};
use aggmia_core::seed;
use aggmia_core::synthgen::{self, GeneratorConfig, PanelKind};
use rand::Rng;

type Outcome = Result<String, String>;

struct Suite {
    filters: Vec<String>,
    failed: usize,
    ran: usize,
}

impl Suite {
    fn wants(&self, id: &str) -> bool {
        self.filters.is_empty() || self.filters.iter().any(|f| id.starts_with(f.as_str()))
    }

    fn check(&mut self, id: &str, what: &str, f: impl FnOnce() -> Outcome) {
        if !self.wants(id) {
            return;
        }
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        self.ran += 1;
        match outcome {
            Ok(detail) => println!("PASS {id} {what}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL {id} {what}: {detail} [{secs:.1}s]");
            }
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut s = Suite { filters, failed: 0, ran: 0 };
    let start = Instant::now();

    s.check("C1.1", "aggregation and sensitivity vs dense sums", oracle_aggregation);
    s.check("C1.2", "AUC vs pairwise comparison", oracle_auc);
    s.check("C1.3", "MRE vs scalar loop", oracle_mre);
    s.check("C1.4", "Gini vs 1 - sum p^2", oracle_gini);
    s.check("C1.5", "k-NN vs full sort", oracle_knn);
    s.check("C1.6", "tree splits vs exhaustive search", oracle_tree);
    s.check("C2.1", "PL and PG on a 10x10 AUC grid", metric_grid);
    s.check("C2.2", "MRE two-cell hand example", mre_hand_example);
    s.check("C3.1", "LR gradient vs central differences", lr_gradient);
    s.check("C3.2", "MLP gradient vs central differences", mlp_gradient);
    s.check("C3.3", "DFT and DCT round trips", transform_round_trips);
    s.check("C3.4", "Parseval identities", parseval);
    s.check("C4.1", "challenge bit is unbiased", bit_unbiased);
    s.check("C4.2", "b=0 reconstruction identity", reconstruction);
    s.check("C6.1", "Laplace variance", laplace_variance);
    s.check("C6.2", "Gaussian variance", gaussian_variance);
    s.check("C6.3", "Gaussian sigma plug-in", gsm_sigma);

    let desk = if s.wants("C5") || s.wants("C8") { Some(DeskRuns::new()) } else { None };
    if let Some(d) = &desk {
        s.check("C8", "workers 1 vs 8 byte-identical CSV", || d.determinism());
    }
    if s.wants("C5") {
        let d = desk.as_ref().unwrap();
        match attack_runs(d) {
            Ok(runs) => {
                s.check("C5a", "subset prior AUC >= 0.9 at m=5, decreasing in m", || trend_subset(&runs));
                s.check("C5b", "same-groups AUC >= different-groups AUC", || trend_priors(&runs));
                s.check("C5c", "commuter AUC >= cab AUC", || trend_panels(&runs));
                s.check("C5d", "AUC non-increasing as T_I shrinks", || trend_windows(&runs));
            }
            Err(e) => s.check("C5", "attack runs", || Err(e)),
        }
    }
    if s.wants("C7") {
        match dp_runs() {
            Ok(runs) => {
                s.check("C7a", "PG and MRE non-increasing in epsilon", || dp_monotone(&runs));
                s.check("C7b", "strategic PG <= passive PG at epsilon 10", || dp_strategic(&runs));
                s.check("C7c", "MRE mechanism ordering at epsilon 1", || dp_ordering(&runs));
            }
            Err(e) => s.check("C7", "dp runs", || Err(e)),
        }
    }

    println!(
        "{} of {} criteria passed in {:.0}s",
        s.ran - s.failed,
        s.ran,
        start.elapsed().as_secs_f64()
    );
    if s.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

const INSTANCES: u64 = 60;

fn rng(label: &str, i: u64) -> seed::Rng {
    seed::rng_for(0xACCE_97, label, i)
}

// ---------------------------------------------------------------- C1

struct Instance {
    panel: UserPanel,
    /// `dense[u][roi][slot]` after null filling.
    dense: Vec<Vec<Vec<bool>>>,
}

fn random_instance(r: &mut seed::Rng) -> Instance {
    let users = r.gen_range(1..=10usize);
    let rois = r.gen_range(2..=5usize);
    let slots = r.gen_range(1..=10usize);
    let grid = TimeGrid::hourly(slots).unwrap();
    let roi_set = RoiSet::new(rois).unwrap();
    let null = rois - 1;
    let mut dense = Vec::new();
    let mut matrices = Vec::new();
    for u in 0..users {
        let n = r.gen_range(0..=rois * slots);
        let pairs: Vec<(usize, usize)> = (0..n).map(|_| (r.gen_range(0..rois), r.gen_range(0..slots))).collect();
        let mut d = vec![vec![false; slots]; rois];
        for &(roi, slot) in &pairs {
            if roi != null {
                d[roi][slot] = true;
            }
        }
        for slot in 0..slots {
            if (0..null).all(|roi| !d[roi][slot]) {
                d[null][slot] = true;
            }
        }
        dense.push(d);
        matrices.push(LocationMatrix::new(u as u32, pairs, &grid, &roi_set).unwrap());
    }
    Instance { panel: UserPanel::new(grid, roi_set, matrices).unwrap(), dense }
}

fn oracle_aggregation() -> Outcome {
    for i in 0..INSTANCES {
        let mut r = rng("aggregation", i);
        let inst = random_instance(&mut r);
        let (users, rois, slots) = (inst.dense.len(), inst.dense[0].len(), inst.dense[0][0].len());
        let a = r.gen_range(0..slots);
        let b = r.gen_range(a + 1..=slots);
        let window = SlotRange::new(a, b);
        let mut group: Vec<u32> = (0..users as u32).filter(|_| r.gen_bool(0.6)).collect();
        if group.is_empty() {
            group.push(0);
        }
        let agg = aggregate(&inst.panel, &group, window).map_err(|e| e.to_string())?;
        for roi in 0..rois {
            for t in a..b {
                let want = group.iter().filter(|&&u| inst.dense[u as usize][roi][t]).count() as f64;
                let got = agg.get(roi, t - a);
                ensure(got == want, || format!("instance {i}: cell ({roi},{t}) {got} != {want}"))?;
            }
        }
        let s = sensitivity(&inst.panel, window).map_err(|e| e.to_string())?;
        let l1 = inst
            .dense
            .iter()
            .map(|d| d.iter().map(|row| row[a..b].iter().filter(|&&x| x).count()).sum::<usize>())
            .max()
            .unwrap() as f64;
        ensure(s.l1 == l1, || format!("instance {i}: l1 {} != {l1}", s.l1))?;
        ensure((s.l2 - l1.sqrt()).abs() <= 1e-9, || format!("instance {i}: l2 {} != {}", s.l2, l1.sqrt()))?;
    }
    Ok(format!("{INSTANCES} instances exact"))
}

fn oracle_auc() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..INSTANCES {
        let mut r = rng("auc", i);
        let n = r.gen_range(2..=200usize);
        let tied = r.gen_bool(0.5);
        let mut labels: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> =
            (0..n).map(|_| if tied { r.gen_range(0..5) as f64 } else { r.gen::<f64>() }).collect();
        let (mut wins, mut pairs) = (0.0, 0.0);
        for p in (0..n).filter(|&k| labels[k]) {
            for q in (0..n).filter(|&k| !labels[k]) {
                pairs += 1.0;
                if scores[p] > scores[q] {
                    wins += 1.0;
                } else if scores[p] == scores[q] {
                    wins += 0.5;
                }
            }
        }
        let want = wins / pairs;
        let roc = metrics::roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((roc.auc - want).abs()).max((roc.trapezoid_area() - want).abs());
    }
    ensure(worst <= 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("{INSTANCES} instances, max error {worst:.1e}"))
}

fn oracle_mre() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..INSTANCES {
        let mut r = rng("mre", i);
        let rois = r.gen_range(1..=5usize);
        let slots = r.gen_range(1..=10usize);
        let m = r.gen_range(1..=10usize);
        let raw: Vec<f64> = (0..rois)
            .flat_map(|roi| {
                let zero_row = roi > 0 && r.gen_bool(0.2);
                (0..slots).map(|_| if zero_row { 0.0 } else { r.gen_range(0..=m) as f64 }).collect::<Vec<_>>()
            })
            .collect();
        let noisy: Vec<f64> = raw.iter().map(|v| v + r.gen_range(-3.0..3.0)).collect();
        let window = SlotRange::new(0, slots);
        let a = AggregateSeries::from_values(raw.clone(), rois, window, m, false).unwrap();
        let b = a.with_noisy_values(noisy.clone()).unwrap();
        for scope in [GammaScope::PerRoi, GammaScope::Global] {
            let gamma = |s: f64| if s == 0.0 { 0.001 } else { 0.001 * s };
            let global = gamma(raw.iter().sum());
            let mut total = 0.0;
            for roi in 0..rois {
                let row = &raw[roi * slots..(roi + 1) * slots];
                let g = match scope {
                    GammaScope::PerRoi => gamma(row.iter().sum()),
                    GammaScope::Global => global,
                };
                let mut acc = 0.0;
                for t in 0..slots {
                    let y = raw[roi * slots + t];
                    acc += (noisy[roi * slots + t] - y).abs() / g.max(y);
                }
                total += acc / slots as f64;
            }
            let want = total / rois as f64;
            let got = metrics::mre(&a, &b, scope).map_err(|e| e.to_string())?;
            worst = worst.max((got - want).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("{INSTANCES} instances x 2 scopes, max error {worst:.1e}"))
}

fn oracle_gini() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..INSTANCES {
        let mut r = rng("gini", i);
        let n = r.gen_range(1..=200usize);
        let labels: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        let mut counts = [0usize; 2];
        for &l in &labels {
            counts[usize::from(l)] += 1;
        }
        let want = 1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>();
        worst = worst.max((rf::gini(&labels) - want).abs());
    }
    ensure(worst <= 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("{INSTANCES} instances, max error {worst:.1e}"))
}

fn random_matrix(r: &mut seed::Rng, n: usize, d: usize, levels: Option<i32>) -> Matrix {
    let data = (0..n * d)
        .map(|_| match levels {
            Some(l) => r.gen_range(0..l) as f64,
            None => r.gen_range(-2.0..2.0),
        })
        .collect();
    Matrix::from_vec(data, n, d).unwrap()
}

fn oracle_knn() -> Outcome {
    for i in 0..INSTANCES {
        let mut r = rng("knn", i);
        let n = r.gen_range(2..=100usize);
        let d = r.gen_range(1..=5usize);
        let x = random_matrix(&mut r, n, d, (i % 2 == 0).then_some(3));
        let mut y: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        y[0] = true;
        y[1] = false;
        let k = r.gen_range(1..=n);
        let model = knn::train(&x, &y, k).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let q: Vec<f64> = (0..d).map(|_| r.gen_range(0..3) as f64).collect();
            let mut all: Vec<(f64, usize)> = (0..n)
                .map(|j| (x.row(j).iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j))
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let want: Vec<usize> = all[..k].iter().map(|p| p.1).collect();
            let got = model.neighbours(&q);
            ensure(got == want, || format!("instance {i}: neighbours {got:?} != {want:?}"))?;
            let frac = want.iter().filter(|&&j| y[j]).count() as f64 / k as f64;
            ensure((model.score_row(&q) - frac).abs() <= 1e-9, || format!("instance {i}: score"))?;
        }
    }
    Ok(format!("{INSTANCES} instances x 5 queries exact"))
}

/// `n_l gini_l + n_r gini_r` of a split.
fn weighted_impurity(y: &[bool], left: &[usize], right: &[usize]) -> f64 {
    let part = |rows: &[usize]| {
        let labels: Vec<bool> = rows.iter().map(|&i| y[i]).collect();
        rows.len() as f64 * (1.0 - {
            let p = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;
            p * p + (1.0 - p) * (1.0 - p)
        })
    };
    part(left) + part(right)
}

fn check_node(tree: &rf::Tree, at: usize, x: &Matrix, y: &[bool], rows: &[usize]) -> Result<(), String> {
    let pos = rows.iter().filter(|&&i| y[i]).count();
    match tree.nodes[at] {
        rf::Node::Leaf { value } => {
            ensure(value == pos as f64 / rows.len() as f64, || format!("leaf {at}: value {value}"))?;
            let pure = pos == 0 || pos == rows.len();
            let identical = rows.iter().all(|&i| x.row(i) == x.row(rows[0]));
            ensure(pure || identical, || format!("leaf {at} is impure but splittable"))
        }
        rf::Node::Split { feature, threshold, left, right } => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, feature) <= threshold);
            ensure(!l.is_empty() && !r.is_empty(), || format!("node {at}: empty child"))?;
            let lmax = l.iter().map(|&i| x.get(i, feature)).fold(f64::MIN, f64::max);
            let rmin = r.iter().map(|&i| x.get(i, feature)).fold(f64::MAX, f64::min);
            ensure(lmax <= threshold && threshold < rmin, || format!("node {at}: threshold {threshold}"))?;
            let chosen = weighted_impurity(y, &l, &r);
            let mut best = f64::INFINITY;
            for j in 0..x.cols() {
                let mut values: Vec<f64> = rows.iter().map(|&i| x.get(i, j)).collect();
                values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                values.dedup();
                for &v in &values[..values.len() - 1] {
                    let (a, b): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, j) <= v);
                    best = best.min(weighted_impurity(y, &a, &b));
                }
            }
            ensure(chosen <= best + 1e-9, || format!("node {at}: impurity {chosen} > minimum {best}"))?;
            check_node(tree, left, x, y, &l)?;
            check_node(tree, right, x, y, &r)
        }
    }
}

fn oracle_tree() -> Outcome {
    let mut nodes = 0;
    for i in 0..INSTANCES {
        let mut r = rng("tree", i);
        let n = r.gen_range(2..=60usize);
        let d = r.gen_range(1..=4usize);
        let x = random_matrix(&mut r, n, d, Some(4));
        let y: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        let rows: Vec<usize> = if i % 2 == 0 { (0..n).collect() } else { (0..n).map(|_| r.gen_range(0..n)).collect() };
        let tree = rf::Tree::fit(&x, &y, &rows);
        nodes += tree.nodes.len();
        check_node(&tree, 0, &x, &y, &rows).map_err(|e| format!("instance {i}: {e}"))?;
    }
    Ok(format!("{INSTANCES} trees, {nodes} nodes checked"))
}

// ---------------------------------------------------------------- C2

fn metric_grid() -> Outcome {
    let mut worst: f64 = 0.0;
    let grid: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64).collect();
    for &raw in &grid {
        let pl_want = if raw > 0.5 { (raw - 0.5) / 0.5 } else { 0.0 };
        worst = worst.max((metrics::privacy_loss(raw).unwrap() - pl_want).abs());
        for &noisy in &grid {
            let pg_want = if raw > noisy && noisy >= 0.5 { (raw - noisy) / (raw - 0.5) } else { 0.0 };
            worst = worst.max((metrics::privacy_gain(raw, noisy).unwrap() - pg_want).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max error {worst:e}"))?;
    Ok(format!("100 pairs, max error {worst:.1e}"))
}

fn mre_hand_example() -> Outcome {
    let w = SlotRange::new(0, 2);
    let raw = AggregateSeries::from_values(vec![10.0, 20.0], 1, w, 30, false).unwrap();
    let noisy = raw.with_noisy_values(vec![12.0, 18.0]).unwrap();
    let got = metrics::mre(&raw, &noisy, GammaScope::PerRoi).map_err(|e| e.to_string())?;
    ensure(got == 0.15, || format!("got {got:?}"))?;
    Ok("exactly 0.15".into())
}

// ---------------------------------------------------------------- C3

fn rel_error(got: &[f64], want: &[f64]) -> f64 {
    let diff: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}

fn central_differences(theta: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|j| {
            t[j] = theta[j] + h;
            let up = f(&t);
            t[j] = theta[j] - h;
            let down = f(&t);
            t[j] = theta[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn lr_gradient() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let mut r = rng("lr-grad", i);
        let (n, d) = (r.gen_range(5..=40usize), r.gen_range(1..=8usize));
        let x = random_matrix(&mut r, n, d, None);
        let y: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        let theta: Vec<f64> = (0..=d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mut grad = vec![0.0; d + 1];
        lr::objective(&theta, &x, &y, 1.0, &mut grad);
        let fd = central_differences(&theta, 1e-6, |t| lr::objective(t, &x, &y, 1.0, &mut vec![0.0; d + 1]));
        worst = worst.max(rel_error(&grad, &fd));
    }
    ensure(worst <= 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("20 instances, max relative error {worst:.1e}"))
}

fn mlp_gradient() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let mut r = rng("mlp-grad", i);
        let (n, d, h) = (r.gen_range(5..=30usize), r.gen_range(1..=6usize), r.gen_range(1..=8usize));
        let x = random_matrix(&mut r, n, d, None);
        let y: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        let rows: Vec<usize> = (0..n).collect();
        let theta = mlp::init(d, h, i);
        let p = mlp::param_count(d, h);
        let mut grad = vec![0.0; p];
        mlp::loss_and_grad(&theta, d, h, &x, &y, &rows, 1e-2, &mut grad);
        let fd = central_differences(&theta, 1e-6, |t| {
            mlp::loss_and_grad(t, d, h, &x, &y, &rows, 1e-2, &mut vec![0.0; p])
        });
        worst = worst.max(rel_error(&grad, &fd));
    }
    ensure(worst <= 1e-5, || format!("max relative error {worst:e}"))?;
    Ok(format!("20 instances, max relative error {worst:.1e}"))
}

fn random_signal(r: &mut seed::Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-50.0..50.0)).collect()
}

fn transform_round_trips() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=64usize {
        let mut r = rng("round-trip", n as u64);
        let x = random_signal(&mut r, n);
        let z: Vec<Complex> = x.iter().zip(random_signal(&mut r, n)).map(|(&a, b)| Complex::new(a, b)).collect();
        let back = idft(&dft(&z));
        for (a, b) in back.iter().zip(&z) {
            worst = worst.max((a.re - b.re).abs()).max((a.im - b.im).abs());
        }
        // Direct O(n^2) sum as a reference for the fast transform.
        let spec = dft(&z);
        for (k, s) in spec.iter().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in z.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (j * k % n) as f64 / n as f64;
                re += v.re * ang.cos() - v.im * ang.sin();
                im += v.re * ang.sin() + v.im * ang.cos();
            }
            worst = worst.max(((s.re - re).abs() + (s.im - im).abs()) / n as f64);
        }
        for (a, b) in idct(&dct(&x)).iter().zip(&x) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("lengths 1..=64, max error {worst:.1e}"))
}

fn parseval() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=64usize {
        let mut r = rng("parseval", n as u64);
        let x = random_signal(&mut r, n);
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let spectral: f64 = dft(&x.iter().map(|&v| Complex::new(v, 0.0)).collect::<Vec<_>>())
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            / n as f64;
        let cosine: f64 = dct(&x).iter().map(|v| v * v).sum();
        worst = worst.max((spectral - energy).abs() / energy).max((cosine - energy).abs() / energy);
    }
    ensure(worst <= 1e-6, || format!("max relative error {worst:e}"))?;
    Ok(format!("lengths 1..=64, max relative error {worst:.1e}"))
}

// ---------------------------------------------------------------- C4

fn small_panel() -> UserPanel {
    synthgen::generate_panel(&GeneratorConfig::new(PanelKind::Commuter, 50, 21, 168, 4)).unwrap()
}

fn bit_unbiased() -> Outcome {
    let panel = small_panel();
    let window = panel.grid().full();
    let rounds = 10_000u64;
    let mut ones = 0u64;
    for i in 0..rounds {
        let target = panel.users()[(i % 50) as usize];
        let cfg = GameConfig::coinciding(10, window, seed::derive(0xACCE_97, "round", i));
        let c = challenger_round(&panel, target, &cfg).map_err(|e| e.to_string())?;
        let (b, replacement) = c.reveal();
        if b == 1 {
            ones += 1;
            let u = replacement.ok_or("b=1 without a replacement")?;
            ensure(u != target && !c.upsilon.contains(&u), || format!("round {i}: bad replacement {u}"))?;
        }
    }
    let mean = ones as f64 / rounds as f64;
    ensure((mean - 0.5).abs() <= 0.02, || format!("mean b = {mean}"))?;
    Ok(format!("mean b = {mean:.4} over {rounds} rounds"))
}

fn reconstruction() -> Outcome {
    let panel = small_panel();
    let window = panel.grid().full();
    for i in 0..100u64 {
        let target = panel.users()[(i % 50) as usize];
        let cfg = GameConfig::coinciding(2 + (i as usize % 40), window, seed::derive(0xACCE_97, "forced", i));
        let c = challenger_round_with_bit(&panel, target, &cfg, Some(0)).map_err(|e| e.to_string())?;
        ensure(c.reveal() == (0, None), || format!("round {i}: forced bit ignored"))?;
        ensure(!c.upsilon.contains(&target), || format!("round {i}: target in upsilon"))?;
        let rest = aggregate(&panel, &c.upsilon, window).map_err(|e| e.to_string())?;
        let own = panel.matrix(target).map_err(|e| e.to_string())?.densify(panel.rois(), window);
        let diff: Vec<f64> = c.aggregate.values().iter().zip(rest.values()).map(|(a, b)| a - b).collect();
        ensure(diff == own.values(), || format!("round {i}: challenge minus upsilon differs from target"))?;
    }
    Ok("100 rounds exact".into())
}

// ---------------------------------------------------------------- C6

fn variance(samples: &[f64]) -> f64 {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (samples.len() - 1) as f64
}

fn laplace_variance() -> Outcome {
    let mut r = rng("laplace", 0);
    let b = 2.0;
    let xs: Vec<f64> = (0..1_000_000).map(|_| noise::laplace_sample(b, &mut r).unwrap()).collect();
    let v = variance(&xs);
    let rel = (v / (2.0 * b * b) - 1.0).abs();
    ensure(rel <= 0.02, || format!("variance {v}, relative error {rel}"))?;
    Ok(format!("variance {v:.4} vs {}, relative error {rel:.4}", 2.0 * b * b))
}

fn gaussian_variance() -> Outcome {
    let mut r = rng("gaussian", 0);
    let sigma = 3.0;
    let xs: Vec<f64> = (0..1_000_000).map(|_| noise::gaussian_sample(sigma, &mut r).unwrap()).collect();
    let v = variance(&xs);
    let rel = (v / (sigma * sigma) - 1.0).abs();
    ensure(rel <= 0.02, || format!("variance {v}, relative error {rel}"))?;
    Ok(format!("variance {v:.4} vs {}, relative error {rel:.4}", sigma * sigma))
}

fn gsm_sigma() -> Outcome {
    let got = noise::gaussian_sigma(1.0, 0.1, 1.0).map_err(|e| e.to_string())?;
    let want = (2.0 * 20f64.ln()).sqrt();
    ensure((got - want).abs() <= 1e-9, || format!("{got} vs {want}"))?;
    Ok(format!("{got:.12}"))
}

// ---------------------------------------------------------------- C5, C8

fn specs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

struct DeskRuns {
    dir: tempfile::TempDir,
    spec: PathBuf,
}

impl DeskRuns {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap(), spec: specs_dir().join("desk.json") }
    }

    /// Runs the shipped desk spec through the CLI and returns its CSV path.
    fn run_cli(&self, seed: Option<u64>, workers: usize) -> Result<PathBuf, String> {
        let out = self.dir.path().join(format!("s{}-w{workers}", seed.map_or("default".into(), |s| s.to_string())));
        if out.join("results.csv").exists() {
            return Ok(out.join("results.csv"));
        }
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_aggmia"));
        cmd.arg("run").arg("--spec").arg(&self.spec).arg("--out").arg(&out);
        cmd.arg("--workers").arg(workers.to_string());
        if let Some(s) = seed {
            cmd.arg("--seed").arg(s.to_string());
        }
        let status = cmd.output().map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("aggmia run failed: {}", String::from_utf8_lossy(&status.stderr))
        })?;
        Ok(out.join("results.csv"))
    }

    fn determinism(&self) -> Outcome {
        let a = std::fs::read(self.run_cli(None, 1)?).map_err(|e| e.to_string())?;
        let b = std::fs::read(self.run_cli(None, 8)?).map_err(|e| e.to_string())?;
        ensure(a == b, || "result CSVs differ".into())?;
        let lines = a.iter().filter(|&&c| c == b'\n').count();
        Ok(format!("{} bytes, {lines} lines identical", a.len()))
    }
}

/// Seeds of the attack trend runs; the first is the desk spec's own.
const ATTACK_SEEDS: [Option<u64>; 5] = [None, Some(1), Some(2), Some(3), Some(4)];

fn past_priors_spec(name: &str, priors: &str, windows: &str) -> ExperimentSpec {
    let text = format!(
        r#"{{ "version": 1, "name": "{name}", "seed": 20190224,
  "panels": [ {{ "name": "commuter", "generator": {{ "kind": "commuter", "users": 1000, "rois": 201, "slots": 504 }} }} ],
  "targets": {{ "per_tier": 5 }}, "group_sizes": [5, 10, 50, 100],
  "priors": [ {priors} ], "windows": [{windows}], "classifiers": ["LR", "KNN", "RF", "MLP"] }}"#
    );
    let spec = ExperimentSpec::from_json(&text).unwrap();
    spec.validate().unwrap();
    spec
}

struct AttackRuns {
    /// Per seed: the desk rows followed by the past-prior rows.
    seeds: Vec<Vec<ResultRow>>,
}

fn attack_runs(desk: &DeskRuns) -> Result<AttackRuns, String> {
    let groups = past_priors_spec(
        "groups",
        r#"{ "kind": "same_groups", "beta": 40 }, { "kind": "different_groups", "beta": 100, "test": 40 }"#,
        r#""week""#,
    );
    let windows = past_priors_spec("windows", r#"{ "kind": "same_groups", "beta": 40 }"#, r#""day(0)", "8h(0)""#);
    let workers = runner::resolve_workers(None);
    let mut seeds = Vec::new();
    for seed in ATTACK_SEEDS {
        let mut rows = results::read_csv(&desk.run_cli(seed, 1)?).map_err(|e| e.to_string())?;
        for spec in [&groups, &windows] {
            let opts = RunOptions { seed, workers, clamp_nonneg: false };
            let out = runner::run(spec, &opts, Path::new(".")).map_err(|e| e.to_string())?;
            ensure(out.errors.is_empty(), || format!("{} failed cells", out.errors.len()))?;
            rows.extend(out.rows);
        }
        seeds.push(rows);
    }
    Ok(AttackRuns { seeds })
}

const MS: [usize; 4] = [5, 10, 50, 100];

/// Mean raw BEST AUC over targets for one selection.
fn best_auc(rows: &[ResultRow], panel: &str, prior: &str, window: &str, m: usize) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.is_raw() && r.classifier == BEST)
        .filter(|r| r.panel == panel && r.prior == prior && r.window == window && r.m == m)
        .map(|r| r.auc)
        .collect();
    assert!(!v.is_empty(), "no rows for {panel}/{prior}/{window}/m={m}");
    v.iter().sum::<f64>() / v.len() as f64
}

/// Passes when `holds` is true on at least 4 of the 5 seeds.
fn majority_of_seeds(runs: &AttackRuns, holds: impl Fn(&[ResultRow]) -> (bool, String)) -> Outcome {
    let mut good = 0;
    let mut notes = Vec::new();
    for (i, rows) in runs.seeds.iter().enumerate() {
        let (ok, note) = holds(rows);
        good += usize::from(ok);
        notes.push(format!("s{i}{} {note}", if ok { "" } else { "!" }));
    }
    let detail = format!("{good}/5 seeds; {}", notes.join("; "));
    ensure(good >= 4, || detail.clone())?;
    Ok(detail)
}

fn fmt_aucs(v: &[f64]) -> String {
    v.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join("/")
}

fn trend_subset(runs: &AttackRuns) -> Outcome {
    majority_of_seeds(runs, |rows| {
        let a: Vec<f64> = MS.iter().map(|&m| best_auc(rows, "commuter", "subset_locations", "week", m)).collect();
        (a[0] >= 0.9 && a.windows(2).all(|w| w[1] < w[0]), fmt_aucs(&a))
    })
}

fn trend_priors(runs: &AttackRuns) -> Outcome {
    majority_of_seeds(runs, |rows| {
        let same: Vec<f64> = MS.iter().map(|&m| best_auc(rows, "commuter", "same_groups", "week", m)).collect();
        let diff: Vec<f64> = MS.iter().map(|&m| best_auc(rows, "commuter", "different_groups", "week", m)).collect();
        (same.iter().zip(&diff).all(|(s, d)| s >= d), format!("{} vs {}", fmt_aucs(&same), fmt_aucs(&diff)))
    })
}

fn trend_panels(runs: &AttackRuns) -> Outcome {
    majority_of_seeds(runs, |rows| {
        let com: Vec<f64> = MS.iter().map(|&m| best_auc(rows, "commuter", "subset_locations", "week", m)).collect();
        let cab: Vec<f64> = MS.iter().map(|&m| best_auc(rows, "cab", "subset_locations", "week", m)).collect();
        (com.iter().zip(&cab).all(|(a, b)| a >= b), format!("{} vs {}", fmt_aucs(&com), fmt_aucs(&cab)))
    })
}

fn trend_windows(runs: &AttackRuns) -> Outcome {
    majority_of_seeds(runs, |rows| {
        let mut ok = true;
        let mut notes = Vec::new();
        for m in MS {
            let a: Vec<f64> =
                ["week", "day(0)", "8h(0)"].iter().map(|w| best_auc(rows, "commuter", "same_groups", w, m)).collect();
            ok &= a.windows(2).all(|w| w[1] <= w[0]);
            notes.push(fmt_aucs(&a));
        }
        (ok, notes.join(" "))
    })
}

// ---------------------------------------------------------------- C7

const DP_SEEDS: u64 = 20;
const EPSILONS: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
const MECHANISMS: [&str; 5] = ["LPA_user", "GSM", "FPA", "EFPAG", "LPA_event"];

struct DpRuns {
    /// Per seed: (mechanism, mode, epsilon index) -> (mean PG, mean MRE).
    seeds: Vec<BTreeMap<(String, String, usize), (f64, f64)>>,
    /// Pooled PG over all seeds and targets at each key.
    pooled_pg: BTreeMap<(String, String, usize), (f64, usize)>,
}

fn dp_runs() -> Result<DpRuns, String> {
    let spec = ExperimentSpec::load(&specs_dir().join("dp-desk.json")).map_err(|e| e.to_string())?;
    let workers = runner::resolve_workers(None);
    let mut seeds = Vec::new();
    let mut pooled_pg: BTreeMap<_, (f64, usize)> = BTreeMap::new();
    for s in 1..=DP_SEEDS {
        let opts = RunOptions { seed: Some(s), workers, clamp_nonneg: false };
        let out = runner::run(&spec, &opts, Path::new(".")).map_err(|e| e.to_string())?;
        ensure(out.errors.is_empty(), || format!("seed {s}: {} failed cells", out.errors.len()))?;
        let mut acc: BTreeMap<(String, String, usize), (f64, f64, usize)> = BTreeMap::new();
        for r in out.rows.iter().filter(|r| !r.is_raw() && r.classifier == BEST) {
            let e = EPSILONS.iter().position(|&e| Some(e) == r.epsilon).ok_or("unexpected epsilon")?;
            let key = (r.mechanism.clone(), r.mode.clone(), e);
            let (pg, mre) = (r.pg.ok_or("missing PG")?, r.mre.ok_or("missing MRE")?);
            let a = acc.entry(key.clone()).or_default();
            a.0 += pg;
            a.1 += mre;
            a.2 += 1;
            let p = pooled_pg.entry(key).or_default();
            p.0 += pg;
            p.1 += 1;
        }
        seeds.push(acc.into_iter().map(|(k, (pg, mre, n))| (k, (pg / n as f64, mre / n as f64))).collect());
    }
    Ok(DpRuns { seeds, pooled_pg })
}

/// One-sided sign-test p-value of `k` or more successes in `n` fair trials.
fn sign_test(k: usize, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut c = 1.0f64;
    let mut tail = 0.0;
    for i in 0..=n {
        if i >= k {
            tail += c;
        }
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    tail / 2f64.powi(n as i32)
}

fn dp_monotone(runs: &DpRuns) -> Outcome {
    let mut failures = Vec::new();
    let mut min_p: f64 = 1.0;
    for mech in MECHANISMS {
        for (metric, mode) in [("PG", "passive"), ("PG", "strategic"), ("MRE", "passive")] {
            for e in 0..EPSILONS.len() - 1 {
                let (mut up, mut down) = (0, 0);
                for s in &runs.seeds {
                    let get = |e| {
                        let v = s[&(mech.to_string(), mode.to_string(), e)];
                        if metric == "PG" { v.0 } else { v.1 }
                    };
                    let (lo, hi) = (get(e), get(e + 1));
                    if hi > lo {
                        up += 1;
                    } else if hi < lo {
                        down += 1;
                    }
                }
                let p = sign_test(up, up + down);
                min_p = min_p.min(p);
                if p < 0.01 {
                    failures.push(format!("{mech} {mode} {metric} rises {}->{} on {up}/{} seeds (p={p:.4})",
                        EPSILONS[e], EPSILONS[e + 1], up + down));
                }
            }
        }
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("no significant increase over {} seeds, smallest p = {min_p:.3}", runs.seeds.len()))
}

fn dp_strategic(runs: &DpRuns) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for mech in ["FPA", "EFPAG"] {
        let mean = |mode: &str| {
            let (sum, n) = runs.pooled_pg[&(mech.to_string(), mode.to_string(), 3)];
            sum / n as f64
        };
        let (passive, strategic) = (mean("passive"), mean("strategic"));
        ok &= strategic <= passive;
        notes.push(format!("{mech} strategic {strategic:.3} vs passive {passive:.3}"));
    }
    let detail = notes.join("; ");
    ensure(ok, || detail.clone())?;
    Ok(detail)
}

fn dp_ordering(runs: &DpRuns) -> Outcome {
    let mut good = 0;
    let mut means = [0.0; MECHANISMS.len()];
    for s in &runs.seeds {
        let mre: Vec<f64> = MECHANISMS.iter().map(|m| s[&(m.to_string(), "passive".to_string(), 2)].1).collect();
        for (acc, v) in means.iter_mut().zip(&mre) {
            *acc += v / runs.seeds.len() as f64;
        }
        good += usize::from(mre.windows(2).all(|w| w[0] >= w[1]));
    }
    let detail = format!(
        "ordering holds on {good}/{} seeds; mean MRE {}",
        runs.seeds.len(),
        MECHANISMS.iter().zip(&means).map(|(m, v)| format!("{m} {v:.3}")).collect::<Vec<_>>().join(" > ")
    );
    ensure(2 * good > runs.seeds.len(), || detail.clone())?;
    Ok(detail)
}
