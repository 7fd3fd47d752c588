use thiserror::Error;

/// Errors reported by the numerical routines.
///
/// Configuration problems (bad grids, unmet preconditions) and numerical
/// policy violations (stability bounds, regularization windows) are kept
/// distinct so the CLI can map them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("momentum grid does not cover the packet support: needs [{needed_min}, {needed_max}], grid spans [{grid_min}, {grid_max}]")]
    GridCoverage {
        needed_min: f64,
        needed_max: f64,
        grid_min: f64,
        grid_max: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("index out of grid: {0}")]
    IndexOutOfGrid(String),

    #[error("time {t} outside the distribution window [{t_min}, {t_max}]")]
    TimeOutOfRange { t: f64, t_min: f64, t_max: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue} below tolerance {tolerance}")]
    NotPositiveSemidefinite { eigenvalue: f64, tolerance: f64 },

    #[error("kernel regularization: |1 + T \u{b1} R| = {value} below {floor} at k = {k}")]
    NearSingularKernel { k: f64, value: f64, floor: f64 },

    #[error("channel factor undefined: |1 + e^(2i delta)| = {value} below {floor} at delta = {delta}")]
    ChannelFactorSingular { delta: f64, value: f64, floor: f64 },

    #[error("stability bound violated: {0}")]
    Stability(String),

    #[error("absorber overlaps the initial state: overlap fraction {overlap:.3e} exceeds {limit:.1e}")]
    AbsorberOverlap { overlap: f64, limit: f64 },

    #[error("total arrival probability {n:.3e} at or below floor {floor:.1e}; conditional distribution undefined")]
    NoArrival { n: f64, floor: f64 },

    #[error("{0}")]
    Precondition(String),
}
