#![allow(dead_code)]

use aggmia_core::data::{LocationMatrix, RoiSet, TimeGrid, UserPanel};
use aggmia_core::synthgen::{self, GeneratorConfig, PanelKind};
use proptest::prelude::*;

/// Cells of one user as `(roi, slot)` pairs.
pub type RawCells = Vec<(usize, usize)>;

pub fn build_panel(rois: usize, slots: usize, users: &[RawCells]) -> UserPanel {
    let grid = TimeGrid::hourly(slots).unwrap();
    let roi_set = RoiSet::new(rois).unwrap();
    let matrices = users
        .iter()
        .enumerate()
        .map(|(u, cells)| LocationMatrix::new(u as u32, cells.iter().copied(), &grid, &roi_set).unwrap())
        .collect();
    UserPanel::new(grid, roi_set, matrices).unwrap()
}

/// Small random panels: up to 10 users, 5 ROIs and 10 slots.
pub fn small_panel() -> impl Strategy<Value = UserPanel> {
    (2usize..=5, 1usize..=10, 1usize..=10).prop_flat_map(|(rois, slots, users)| {
        let user = prop::collection::vec((0..rois, 0..slots), 0..=rois * slots);
        prop::collection::vec(user, users).prop_map(move |u| build_panel(rois, slots, &u))
    })
}

pub fn commuters(users: usize, rois: usize, slots: usize, seed: u64) -> UserPanel {
    synthgen::generate_panel(&GeneratorConfig::new(PanelKind::Commuter, users, rois, slots, seed)).unwrap()
}
