use alloc::string::String;

use crate::data::UserId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong inside the core.
///
/// Variants are grouped by the module that raises them; each precondition
/// named by an operation maps to exactly one variant so callers can tell the
/// failures apart.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    // data model
    #[error("invalid slot range [{start}, {end}) for a grid of {slots} slots")]
    InvalidWindow { start: usize, end: usize, slots: usize },
    #[error("unknown user id {0}")]
    UnknownUser(UserId),
    #[error("user id {0} appears more than once")]
    DuplicateUser(UserId),
    #[error("group is empty")]
    EmptyGroup,
    #[error("panel contains no users")]
    EmptyPanel,
    #[error("cell (roi {roi}, slot {slot}) is outside the {rois}x{slots} grid")]
    CellOutOfRange { roi: usize, slot: usize, rois: usize, slots: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    // synthetic generator and target sampling
    #[error("invalid generator configuration: {0}")]
    InvalidGenerator(String),
    #[error("need at least 3 users to form mobility tiers, got {0}")]
    TooFewUsersForTiers(usize),
    #[error("requested {requested} targets per tier but a tier only has {available}")]
    TierTooSmall { requested: usize, available: usize },

    // game
    #[error("group size m={m} is out of range for {users} users (need 2 <= m <= users - 1)")]
    GroupSizeOutOfRange { m: usize, users: usize },
    #[error("infeasible prior: {0}")]
    InfeasiblePrior(String),
    #[error("observation and inference windows overlap")]
    WindowsOverlap,
    #[error("observation window must equal the inference window for this prior")]
    WindowsMustCoincide,
    #[error("count {0} must be even to form balanced halves")]
    OddCount(usize),
    #[error("could not draw a unique group after {0} attempts")]
    GroupCollision(usize),

    // features
    #[error("samples are ragged: {0}")]
    RaggedSamples(String),
    #[error("requested {requested} features but only {available} columns exist")]
    TooManyFeatures { requested: usize, available: usize },
    #[error("feature selection must be fit on training rows only")]
    TestRowsInFit,
    #[error("invalid feature count {0}")]
    InvalidFeatureCount(usize),

    // classifiers
    #[error("labels contain a single class")]
    SingleClass,
    #[error("feature matrix contains a non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("need at least {needed} training rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("input columns do not match the columns the model was trained on")]
    ColumnMismatch,
    #[error("input is not standardized: column {col} has mean {mean}")]
    NotStandardized { col: usize, mean: f64 },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    // dp
    #[error("invalid mechanism parameters: {0}")]
    InvalidMechanism(String),
    #[error("noise scale must be positive, got {0}")]
    NonPositiveScale(f64),

    // metrics
    #[error("AUC value {0} is outside [0, 1]")]
    AucOutOfRange(f64),
    #[error("empty input: {0}")]
    EmptyInput(String),
}
