mod common;

use std::collections::BTreeSet;

use aggmia_core::data::{aggregate, SlotRange, UserId, UserPanel};
use aggmia_core::dp::{MechanismConfig, MechanismKind};
use aggmia_core::game::{self, AdversaryMode, ExperimentDataset, GameConfig, Prior};

fn panel() -> UserPanel {
    common::commuters(60, 11, 504, 5)
}

fn check_common(panel: &UserPanel, ds: &ExperimentDataset, m: usize) {
    for split in [&ds.train, &ds.test] {
        let ins = split.iter().filter(|s| s.label.is_in()).count();
        assert_eq!(2 * ins, split.len(), "unbalanced split");
        for s in split.iter() {
            assert_eq!(s.label.is_in(), s.group.contains(&ds.target));
            assert_eq!(s.group.len(), m);
            assert!(s.group.windows(2).all(|w| w[0] < w[1]));
            let again = aggregate(panel, &s.group, s.aggregate.window()).unwrap();
            assert_eq!(again, s.aggregate);
        }
    }
}

#[test]
fn subset_prior_trains_inside_known_users() {
    let panel = panel();
    let w = panel.grid().week(2).unwrap();
    for (target, seed) in [(0u32, 1u64), (17, 2), (42, 3)] {
        let cfg = GameConfig::coinciding(5, w, seed);
        let alpha = 0.5;
        let ds = game::build_subset_prior(&panel, target, &cfg, Prior::SubsetLocations { alpha }, 40, 20).unwrap();
        check_common(&panel, &ds, 5);
        let known: BTreeSet<UserId> = game::known_users(&panel, target, alpha, seed).unwrap().into_iter().collect();
        assert_eq!(known.len(), 30);
        for s in &ds.train {
            assert!(s.group.iter().all(|u| known.contains(u)));
            assert_eq!(s.aggregate.window(), w);
        }
        for s in &ds.test {
            assert!(s.group.iter().all(|u| *u == target || !known.contains(u)));
            assert_eq!(s.aggregate.window(), w);
        }
        let (train, test) = ds.group_sets();
        assert_eq!(train.len(), 40);
        assert_eq!(test.len(), 20);
    }
}

#[test]
fn subset_prior_needs_coinciding_windows() {
    let panel = panel();
    let cfg = GameConfig {
        m: 5,
        inference_window: panel.grid().week(2).unwrap(),
        observation_window: panel.grid().week(1).unwrap(),
        seed: 0,
    };
    assert!(game::build_subset_prior(&panel, 0, &cfg, Prior::SubsetLocations { alpha: 0.5 }, 10, 10).is_err());
}

fn past_config(panel: &UserPanel, m: usize) -> (GameConfig, Vec<SlotRange>) {
    let g = panel.grid();
    let cfg = GameConfig {
        m,
        inference_window: g.week(2).unwrap(),
        observation_window: SlotRange::new(0, 2 * g.slots_per_week()),
        seed: 11,
    };
    (cfg, vec![g.week(0).unwrap(), g.week(1).unwrap()])
}

#[test]
fn same_groups_share_train_and_test_groups() {
    let panel = panel();
    let (cfg, slices) = past_config(&panel, 6);
    let ds = game::build_same_groups_prior(&panel, 3, &cfg, Prior::SameGroups { beta: 20 }, &slices).unwrap();
    check_common(&panel, &ds, 6);
    assert_eq!(ds.train.len(), 40);
    let (train, test) = ds.group_sets();
    assert_eq!(train, test);
    for s in &ds.train {
        assert!(!s.aggregate.window().overlaps(&cfg.inference_window));
    }
}

#[test]
fn different_groups_are_disjoint() {
    let panel = panel();
    let (cfg, slices) = past_config(&panel, 6);
    let ds =
        game::build_diff_groups_prior(&panel, 3, &cfg, Prior::DifferentGroups { beta: 30 }, &slices, 10).unwrap();
    check_common(&panel, &ds, 6);
    let (train, test) = ds.group_sets();
    assert_eq!((train.len(), test.len()), (30, 10));
    assert!(train.is_disjoint(&test));
    for s in &ds.train {
        assert!(!s.aggregate.window().overlaps(&cfg.inference_window));
    }
}

#[test]
fn perfect_prior_tests_on_its_training_groups() {
    let panel = panel();
    let cfg = GameConfig::coinciding(20, panel.grid().week(2).unwrap(), 4);
    let ds = game::build_perfect_prior(&panel, 9, &cfg, 30).unwrap();
    check_common(&panel, &ds, 20);
    assert_eq!(ds.train, ds.test);
}

#[test]
fn challenger_expectations_match_membership() {
    let panel = common::commuters(12, 6, 48, 8);
    let window = panel.grid().full();
    let target = 4;
    let m = 4;
    let len = panel.rois().roi_count() * window.len();
    let own = panel.matrix(target).unwrap().densify(panel.rois(), window);
    let mut mean_out = vec![0.0; len];
    let (mut diff_in, mut diff_out) = (vec![0.0; len], vec![0.0; len]);
    let (mut n_in, mut n_out) = (0.0, 0.0);
    for i in 0..20_000 {
        let cfg = GameConfig::coinciding(m, window, i);
        let c = game::challenger_round(&panel, target, &cfg).unwrap();
        let rest = aggregate(&panel, &c.upsilon, window).unwrap();
        let (acc, n) = if c.reveal().0 == 0 { (&mut diff_in, &mut n_in) } else { (&mut diff_out, &mut n_out) };
        *n += 1.0;
        for (a, (x, y)) in acc.iter_mut().zip(c.aggregate.values().iter().zip(rest.values())) {
            *a += x - y;
        }
        if c.reveal().0 == 1 {
            // Population mean of U \ {u*} \ Υ for this round.
            let excluded: BTreeSet<UserId> = c.upsilon.iter().copied().chain([target]).collect();
            let others: Vec<UserId> = panel.users().iter().copied().filter(|u| !excluded.contains(u)).collect();
            let k = others.len() as f64;
            for &u in &others {
                let d = panel.matrix(u).unwrap().densify(panel.rois(), window);
                for (a, v) in mean_out.iter_mut().zip(d.values()) {
                    *a += v / k;
                }
            }
        }
    }
    for (a, v) in diff_in.iter().zip(own.values()) {
        assert_eq!(a / n_in, *v);
    }
    let worst = diff_out
        .iter()
        .zip(&mean_out)
        .map(|(a, b)| (a / n_out - b / n_out).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.03, "max deviation {worst}");
}

#[test]
fn perturbation_modes() {
    let panel = panel();
    let w = panel.grid().week(2).unwrap();
    let cfg = GameConfig::coinciding(10, w, 4);
    let ds = game::build_perfect_prior(&panel, 9, &cfg, 10).unwrap();
    let sens = aggmia_core::data::sensitivity(&panel, w).unwrap();
    let mech = MechanismConfig::new(MechanismKind::LpaUser, 1.0, sens);
    let passive = game::perturb_dataset(&ds, &mech, AdversaryMode::Passive, 1).unwrap();
    let strategic = game::perturb_dataset(&ds, &mech, AdversaryMode::Strategic, 1).unwrap();
    assert_eq!(passive.train, ds.train);
    assert_ne!(strategic.train, ds.train);
    assert_eq!(passive.test, strategic.test);
    assert!(passive.test.iter().all(|s| s.aggregate.is_perturbed()));
    assert_eq!(passive.test_labels(), ds.test_labels());
}

#[test]
fn infeasible_requests_fail() {
    let panel = panel();
    let w = panel.grid().week(2).unwrap();
    assert!(GameConfig::coinciding(60, w, 0).validate(&panel).is_err());
    assert!(GameConfig::coinciding(1, w, 0).validate(&panel).is_err());
    let cfg = GameConfig::coinciding(5, w, 0);
    assert!(game::build_perfect_prior(&panel, 9, &cfg, 7).is_err());
    assert!(game::build_perfect_prior(&panel, 999, &cfg, 8).is_err());
    assert!(game::build_subset_prior(&panel, 0, &cfg, Prior::SubsetLocations { alpha: 0.05 }, 10, 10).is_err());
}
