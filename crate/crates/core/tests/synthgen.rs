use std::collections::BTreeSet;

use aggmia_core::data::UserPanel;
use aggmia_core::synthgen::{self, GeneratorConfig, PanelKind};

fn generate(kind: PanelKind, seed: u64) -> UserPanel {
    synthgen::generate_panel(&GeneratorConfig::new(kind, 120, 41, 336, seed)).unwrap()
}

/// Mean Jaccard overlap of the ROI sets of consecutive days, over users.
fn day_to_day_overlap(panel: &UserPanel) -> f64 {
    let spd = panel.grid().slots_per_day();
    let days = panel.grid().slot_count() / spd;
    let null = panel.rois().null_roi() as u32;
    let mut total = 0.0;
    let mut n = 0;
    for m in panel.matrices() {
        let sets: Vec<BTreeSet<u32>> = (0..days)
            .map(|d| {
                m.cells()
                    .iter()
                    .filter(|c| c.roi != null && (c.slot as usize) / spd == d)
                    .map(|c| c.roi)
                    .collect()
            })
            .collect();
        for w in sets.windows(2) {
            let union = w[0].union(&w[1]).count();
            if union > 0 {
                total += w[0].intersection(&w[1]).count() as f64 / union as f64;
                n += 1;
            }
        }
    }
    total / n as f64
}

#[test]
fn panels_tiers_and_targets_are_deterministic() {
    for kind in [PanelKind::Commuter, PanelKind::Cab] {
        let a = generate(kind, 9);
        let b = generate(kind, 9);
        assert_eq!(a, b);
        assert_ne!(a, generate(kind, 10));
        let tiers = synthgen::tier_users(&a).unwrap();
        assert_eq!(tiers, synthgen::tier_users(&b).unwrap());
        assert_eq!(
            synthgen::sample_targets(&tiers, 5, 3).unwrap(),
            synthgen::sample_targets(&tiers, 5, 3).unwrap()
        );
    }
}

#[test]
fn commuters_repeat_their_days_more_than_cabs() {
    for seed in 0..3 {
        let commuter = day_to_day_overlap(&generate(PanelKind::Commuter, seed));
        let cab = day_to_day_overlap(&generate(PanelKind::Cab, seed));
        assert!(commuter > cab, "seed {seed}: commuter {commuter} <= cab {cab}");
    }
}

#[test]
fn null_roi_only_fills_empty_slots() {
    for kind in [PanelKind::Commuter, PanelKind::Cab] {
        let panel = generate(kind, 1);
        let null = panel.rois().null_roi() as u32;
        for m in panel.matrices() {
            for slot in 0..panel.grid().slot_count() as u32 {
                let in_slot: Vec<_> = m.cells().iter().filter(|c| c.slot == slot).collect();
                let has_null = in_slot.iter().any(|c| c.roi == null);
                assert!(!in_slot.is_empty());
                assert_eq!(has_null, in_slot.len() == 1 && in_slot[0].roi == null);
            }
        }
    }
}

#[test]
fn tiers_are_ordered_by_reports() {
    let panel = generate(PanelKind::Commuter, 2);
    let tiers = synthgen::tier_users(&panel).unwrap();
    let count = |u| panel.matrix(u).unwrap().reported_count(panel.rois());
    let min_high = tiers[0].iter().map(|&u| count(u)).min().unwrap();
    let max_mid = tiers[1].iter().map(|&u| count(u)).max().unwrap();
    let min_mid = tiers[1].iter().map(|&u| count(u)).min().unwrap();
    let max_low = tiers[2].iter().map(|&u| count(u)).max().unwrap();
    assert!(min_high >= max_mid && min_mid >= max_low);
    assert_eq!(tiers.iter().map(Vec::len).sum::<usize>(), panel.len());
}
