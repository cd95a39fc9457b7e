//! Location data model: time grid, ROI set, per-user presence matrices,
//! aggregation over groups, windowing and sensitivity.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

pub type UserId = u32;

/// A contiguous half-open range of time slots `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotRange {
    pub start: usize,
    pub end: usize,
}

impl SlotRange {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub const fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub const fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub const fn contains_slot(&self, slot: usize) -> bool {
        slot >= self.start && slot < self.end
    }

    pub const fn contains(&self, other: &SlotRange) -> bool {
        other.start >= self.start && other.end <= self.end
    }

    pub const fn overlaps(&self, other: &SlotRange) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn as_range(&self) -> Range<usize> {
        self.start..self.end
    }
}

impl core::fmt::Display for SlotRange {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// The set of time slots `T` on which presence is recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    slot_count: usize,
    slot_minutes: u32,
    /// Weekday of slot 0, Monday = 0.
    epoch_weekday: u8,
}

impl TimeGrid {
    /// Hourly grid whose slot 0 falls on a Monday.
    pub fn hourly(slot_count: usize) -> Result<Self> {
        Self::new(slot_count, 60, 0)
    }

    pub fn new(slot_count: usize, slot_minutes: u32, epoch_weekday: u8) -> Result<Self> {
        if slot_count == 0 {
            return Err(Error::InvalidGrid("slot_count must be at least 1".into()));
        }
        if slot_minutes == 0 || 1440 % slot_minutes != 0 {
            return Err(Error::InvalidGrid(format!(
                "slot duration of {slot_minutes} minutes does not divide a day"
            )));
        }
        if epoch_weekday > 6 {
            return Err(Error::InvalidGrid(format!("weekday {epoch_weekday} is not in 0..=6")));
        }
        Ok(Self { slot_count, slot_minutes, epoch_weekday })
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn slot_minutes(&self) -> u32 {
        self.slot_minutes
    }

    pub fn epoch_weekday(&self) -> u8 {
        self.epoch_weekday
    }

    pub fn slots_per_day(&self) -> usize {
        (1440 / self.slot_minutes) as usize
    }

    pub fn slots_per_hour(&self) -> usize {
        (60 / self.slot_minutes).max(1) as usize
    }

    pub fn slots_per_week(&self) -> usize {
        7 * self.slots_per_day()
    }

    pub fn full(&self) -> SlotRange {
        SlotRange::new(0, self.slot_count)
    }

    /// Weekday (Monday = 0) of the given slot.
    pub fn weekday_of(&self, slot: usize) -> u8 {
        ((slot / self.slots_per_day() + self.epoch_weekday as usize) % 7) as u8
    }

    /// Hour of day of the given slot.
    pub fn hour_of(&self, slot: usize) -> usize {
        (slot % self.slots_per_day()) * self.slot_minutes as usize / 60
    }

    pub fn is_weekend(&self, slot: usize) -> bool {
        self.weekday_of(slot) >= 5
    }

    /// Number of whole weeks in the grid.
    pub fn week_count(&self) -> usize {
        self.slot_count / self.slots_per_week()
    }

    /// Validates `range` against the grid.
    pub fn check(&self, range: SlotRange) -> Result<SlotRange> {
        if range.start < range.end && range.end <= self.slot_count {
            Ok(range)
        } else {
            Err(Error::InvalidWindow { start: range.start, end: range.end, slots: self.slot_count })
        }
    }

    pub fn week(&self, index: usize) -> Result<SlotRange> {
        let w = self.slots_per_week();
        self.check(SlotRange::new(index * w, (index + 1) * w))
    }

    /// Resolves a named window inside week `week_index`.
    pub fn resolve(&self, window: NamedWindow, week_index: usize) -> Result<SlotRange> {
        let week = self.week(week_index)?;
        let spd = self.slots_per_day();
        let day_offset = |weekday: u8| -> Result<usize> {
            if weekday > 6 {
                return Err(Error::InvalidGrid(format!("weekday {weekday} is not in 0..=6")));
            }
            Ok(((weekday as usize + 7 - self.epoch_weekday as usize) % 7) * spd)
        };
        let range = match window {
            NamedWindow::Week => week,
            NamedWindow::Day { weekday } => {
                let start = week.start + day_offset(weekday)?;
                SlotRange::new(start, start + spd)
            }
            NamedWindow::Hours { weekday, start_hour, hours } => {
                if start_hour as usize + hours as usize > 24 || hours == 0 {
                    return Err(Error::InvalidGrid(format!(
                        "{hours} hours from {start_hour}:00 do not fit in one day"
                    )));
                }
                let start = week.start + day_offset(weekday)? + start_hour as usize * self.slots_per_hour();
                SlotRange::new(start, start + hours as usize * self.slots_per_hour())
            }
        };
        self.check(range)
    }

    /// The same named window in each of the given weeks.
    pub fn weekly_slices(&self, window: NamedWindow, weeks: Range<usize>) -> Result<Vec<SlotRange>> {
        weeks.map(|w| self.resolve(window, w)).collect()
    }
}

/// Calendar-relative windows used by the inference-period sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NamedWindow {
    Week,
    Day { weekday: u8 },
    Hours { weekday: u8, start_hour: u8, hours: u8 },
}

impl NamedWindow {
    /// The 8-hour window starting at 08:00.
    pub const fn eight_hours(weekday: u8) -> Self {
        NamedWindow::Hours { weekday, start_hour: 8, hours: 8 }
    }

    pub fn label(&self) -> alloc::string::String {
        match self {
            NamedWindow::Week => "week".into(),
            NamedWindow::Day { weekday } => format!("day({weekday})"),
            NamedWindow::Hours { weekday, start_hour, hours } => {
                if *start_hour == 8 && *hours == 8 {
                    format!("8h({weekday})")
                } else {
                    format!("{hours}h({weekday},{start_hour})")
                }
            }
        }
    }

    /// Parses `week`, `day(<weekday>)`, `8h(<weekday>)` or
    /// `<n>h(<weekday>,<start_hour>)`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s == "week" {
            return Some(NamedWindow::Week);
        }
        let open = s.find('(')?;
        let inner = s.get(open + 1..s.len().checked_sub(1)?)?;
        if !s.ends_with(')') {
            return None;
        }
        let head = &s[..open];
        let mut args = inner.split(',').map(|a| a.trim().parse::<u8>());
        let weekday = args.next()?.ok()?;
        if weekday > 6 {
            return None;
        }
        if head == "day" {
            return args.next().is_none().then_some(NamedWindow::Day { weekday });
        }
        let hours: u8 = head.strip_suffix('h')?.parse().ok()?;
        let start_hour = match args.next() {
            Some(h) => h.ok()?,
            None => 8,
        };
        if args.next().is_some() || hours == 0 || start_hour as usize + hours as usize > 24 {
            return None;
        }
        Some(NamedWindow::Hours { weekday, start_hour, hours })
    }
}

/// The set of regions of interest. The last index is the reserved null ROI
/// that records absence from every real ROI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiSet {
    roi_count: usize,
}

impl RoiSet {
    /// `roi_count` includes the null ROI.
    pub fn new(roi_count: usize) -> Result<Self> {
        if roi_count < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least one real ROI plus the null ROI, got roi_count={roi_count}"
            )));
        }
        Ok(Self { roi_count })
    }

    pub fn roi_count(&self) -> usize {
        self.roi_count
    }

    pub fn null_roi(&self) -> usize {
        self.roi_count - 1
    }

    pub fn real_count(&self) -> usize {
        self.roi_count - 1
    }

    pub fn is_null(&self, roi: usize) -> bool {
        roi == self.null_roi()
    }
}

/// One `(slot, roi)` presence entry. Orders by slot first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub slot: u32,
    pub roi: u32,
}

/// A user's binary `|S| x |T|` presence matrix, stored as a sorted set of
/// cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocationMatrix {
    user: UserId,
    cells: Vec<Cell>,
}

impl LocationMatrix {
    /// Builds a matrix from `(roi, slot)` pairs. Duplicates collapse, slots
    /// with no real ROI get the null ROI, and explicit null cells in slots
    /// that also report a real ROI are dropped.
    pub fn new<I>(user: UserId, cells: I, grid: &TimeGrid, rois: &RoiSet) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let null = rois.null_roi();
        let mut real = Vec::new();
        for (roi, slot) in cells {
            if roi >= rois.roi_count() || slot >= grid.slot_count() {
                return Err(Error::CellOutOfRange {
                    roi,
                    slot,
                    rois: rois.roi_count(),
                    slots: grid.slot_count(),
                });
            }
            if roi != null {
                real.push(Cell { slot: slot as u32, roi: roi as u32 });
            }
        }
        real.sort_unstable();
        real.dedup();

        let mut cells = Vec::with_capacity(real.len() + grid.slot_count());
        let mut next = real.iter().peekable();
        for slot in 0..grid.slot_count() as u32 {
            let mut any = false;
            while let Some(c) = next.next_if(|c| c.slot == slot) {
                cells.push(*c);
                any = true;
            }
            if !any {
                cells.push(Cell { slot, roi: null as u32 });
            }
        }
        Ok(Self { user, cells })
    }

    pub fn user(&self) -> UserId {
        self.user
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Cells whose slot lies in `window`.
    pub fn cells_in(&self, window: SlotRange) -> &[Cell] {
        let lo = self.cells.partition_point(|c| (c.slot as usize) < window.start);
        let hi = self.cells.partition_point(|c| (c.slot as usize) < window.end);
        &self.cells[lo..hi]
    }

    /// Number of cells (including null cells) inside `window`.
    pub fn count_in(&self, window: SlotRange) -> usize {
        self.cells_in(window).len()
    }

    /// Number of non-null cells over the whole grid.
    pub fn reported_count(&self, rois: &RoiSet) -> usize {
        let null = rois.null_roi() as u32;
        self.cells.iter().filter(|c| c.roi != null).count()
    }

    /// Dense copy of this matrix restricted to `window`.
    pub fn densify(&self, rois: &RoiSet, window: SlotRange) -> AggregateSeries {
        let mut out = AggregateSeries::zeros(rois.roi_count(), window, 1);
        out.add_matrix(self);
        out
    }
}

/// All users' matrices over a shared grid and ROI set.
#[derive(Clone, Debug, PartialEq)]
pub struct UserPanel {
    grid: TimeGrid,
    rois: RoiSet,
    users: Vec<UserId>,
    matrices: Vec<LocationMatrix>,
    index: BTreeMap<UserId, usize>,
}

impl UserPanel {
    pub fn new(grid: TimeGrid, rois: RoiSet, matrices: Vec<LocationMatrix>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, m) in matrices.iter().enumerate() {
            if index.insert(m.user, i).is_some() {
                return Err(Error::DuplicateUser(m.user));
            }
            if let Some(c) = m.cells.iter().find(|c| {
                c.slot as usize >= grid.slot_count() || c.roi as usize >= rois.roi_count()
            }) {
                return Err(Error::CellOutOfRange {
                    roi: c.roi as usize,
                    slot: c.slot as usize,
                    rois: rois.roi_count(),
                    slots: grid.slot_count(),
                });
            }
        }
        let users = matrices.iter().map(|m| m.user).collect();
        Ok(Self { grid, rois, users, matrices, index })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn rois(&self) -> &RoiSet {
        &self.rois
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn matrices(&self) -> &[LocationMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, user: UserId) -> Result<&LocationMatrix> {
        self.index
            .get(&user)
            .map(|&i| &self.matrices[i])
            .ok_or(Error::UnknownUser(user))
    }

    pub fn contains(&self, user: UserId) -> bool {
        self.index.contains_key(&user)
    }
}

/// Dense `|S| x |T_w|` counts over a window, row-major by ROI.
///
/// Unperturbed series hold non-negative integers no larger than
/// `group_size`; perturbed ones hold arbitrary finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateSeries {
    values: Vec<f64>,
    roi_count: usize,
    window: SlotRange,
    group_size: usize,
    perturbed: bool,
}

impl AggregateSeries {
    pub fn zeros(roi_count: usize, window: SlotRange, group_size: usize) -> Self {
        Self {
            values: vec![0.0; roi_count * window.len()],
            roi_count,
            window,
            group_size,
            perturbed: false,
        }
    }

    /// Wraps precomputed values. `values.len()` must equal
    /// `roi_count * window.len()`.
    pub fn from_values(
        values: Vec<f64>,
        roi_count: usize,
        window: SlotRange,
        group_size: usize,
        perturbed: bool,
    ) -> Result<Self> {
        if values.len() != roi_count * window.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} ROIs x {} slots",
                values.len(),
                roi_count,
                window.len()
            )));
        }
        Ok(Self { values, roi_count, window, group_size, perturbed })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn roi_count(&self) -> usize {
        self.roi_count
    }

    pub fn window(&self) -> SlotRange {
        self.window
    }

    /// Number of slots covered.
    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn is_perturbed(&self) -> bool {
        self.perturbed
    }

    /// Value at ROI `roi` and window-relative column `t`.
    pub fn get(&self, roi: usize, t: usize) -> f64 {
        self.values[roi * self.window.len() + t]
    }

    pub fn row(&self, roi: usize) -> &[f64] {
        let n = self.window.len();
        &self.values[roi * n..(roi + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.window.len().max(1))
    }

    /// Returns a copy carrying replaced values, marked perturbed.
    pub fn with_noisy_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_values(values, self.roi_count, self.window, self.group_size, true)
    }

    fn add_matrix(&mut self, matrix: &LocationMatrix) {
        let n = self.window.len();
        let start = self.window.start;
        for c in matrix.cells_in(self.window) {
            self.values[c.roi as usize * n + (c.slot as usize - start)] += 1.0;
        }
    }

    /// Element-wise difference `self - other`; shapes must match.
    pub fn difference(&self, other: &AggregateSeries) -> Result<Vec<f64>> {
        if self.roi_count != other.roi_count || self.window.len() != other.window.len() {
            return Err(Error::ShapeMismatch("aggregate shapes differ".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }
}

/// Sensitivity of the aggregation function over a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub l1: f64,
    pub l2: f64,
    pub window: SlotRange,
}

impl Sensitivity {
    /// Sensitivity of binary-matrix aggregation with `l1` maximum cells.
    pub fn binary(l1: f64, window: SlotRange) -> Self {
        Self { l1, l2: math::sqrt(l1), window }
    }
}

/// Sums the matrices of `group` over `window`.
pub fn aggregate(panel: &UserPanel, group: &[UserId], window: SlotRange) -> Result<AggregateSeries> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let window = panel.grid.check(window)?;
    let mut out = AggregateSeries::zeros(panel.rois.roi_count(), window, group.len());
    let mut seen = alloc::collections::BTreeSet::new();
    for &u in group {
        if !seen.insert(u) {
            return Err(Error::DuplicateUser(u));
        }
        out.add_matrix(panel.matrix(u)?);
    }
    Ok(out)
}

/// Maximum per-user contribution to any aggregate over `window`.
///
/// Removing one user changes an aggregate by exactly that user's cell count
/// in ℓ1 norm, and by its square root in ℓ2 norm since every entry is 0/1.
pub fn sensitivity(panel: &UserPanel, window: SlotRange) -> Result<Sensitivity> {
    if panel.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let window = panel.grid.check(window)?;
    let max = panel.matrices.iter().map(|m| m.count_in(window)).max().unwrap_or(0);
    Ok(Sensitivity::binary(max as f64, window))
}

/// Restricts a series to the sub-range `sub` (absolute slot indices).
pub fn slice_window(series: &AggregateSeries, sub: SlotRange) -> Result<AggregateSeries> {
    if sub.is_empty() || !series.window.contains(&sub) {
        return Err(Error::InvalidWindow {
            start: sub.start,
            end: sub.end,
            slots: series.window.end,
        });
    }
    let offset = sub.start - series.window.start;
    let n = series.window.len();
    let mut values = Vec::with_capacity(series.roi_count * sub.len());
    for r in 0..series.roi_count {
        values.extend_from_slice(&series.values[r * n + offset..r * n + offset + sub.len()]);
    }
    Ok(AggregateSeries {
        values,
        roi_count: series.roi_count,
        window: sub,
        group_size: series.group_size,
        perturbed: series.perturbed,
    })
}
