//! Plain-text summary tables of a result table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::results::ResultRow;

#[derive(Default)]
struct Acc {
    sum: f64,
    n: usize,
}

impl Acc {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }
}

/// Mean AUC and PL on raw aggregates, then mean PG and MRE per mechanism.
pub fn summarize(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    let mut attack: BTreeMap<(&str, &str, &str, &str, usize), (Acc, Acc)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_raw()) {
        let e = attack
            .entry((r.panel.as_str(), r.prior.as_str(), r.window.as_str(), r.classifier.as_str(), r.m))
            .or_default();
        e.0.add(r.auc);
        e.1.add(r.pl);
    }
    if !attack.is_empty() {
        out.push_str("| panel | prior | window | classifier | m | targets | mean AUC | mean PL |\n");
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for ((panel, prior, window, clf, m), (auc, pl)) in &attack {
            let _ = writeln!(
                out,
                "| {panel} | {prior} | {window} | {clf} | {m} | {} | {:.3} | {:.3} |",
                auc.n,
                auc.mean(),
                pl.mean()
            );
        }
    }

    let mut dp: BTreeMap<(&str, &str, &str, u64), (f64, Acc, Acc)> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.is_raw()) {
        let (Some(eps), Some(pg)) = (r.epsilon, r.pg) else { continue };
        // Integer key so that ε sorts numerically.
        let key = (r.mechanism.as_str(), r.mode.as_str(), r.classifier.as_str(), (eps * 1e6).round() as u64);
        let e = dp.entry(key).or_insert((eps, Acc::default(), Acc::default()));
        e.1.add(pg);
        if let Some(m) = r.mre {
            e.2.add(m);
        }
    }
    if !dp.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str("| mechanism | mode | classifier | epsilon | mean PG | mean MRE |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        for ((mech, mode, clf, _), (eps, pg, mre)) in &dp {
            let mre = if mre.n > 0 { format!("{:.4}", mre.mean()) } else { "-".into() };
            let _ = writeln!(out, "| {mech} | {mode} | {clf} | {eps} | {:.3} | {mre} |", pg.mean());
        }
    }
    if out.is_empty() {
        out.push_str("(no rows)\n");
    }
    out
}
