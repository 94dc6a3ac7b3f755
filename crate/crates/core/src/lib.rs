//! Moving-window estimation of Student's t parameters for nonstationary
//! series, using exponential moving averages of absolute central moments.
//!
//! The main entry point is [`AdaptiveEstimator`]; [`evaluation`] scores it
//! against static and GARCH(1,1) baselines.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod baselines;
pub mod data;
pub mod distribution;
pub mod error;
pub mod evaluation;
pub mod moments;
pub mod optimize;
pub mod special;

pub use adaptive::{
    AdaptiveConfig, AdaptiveEstimator, EmaState, Init, ParamTrajectory, TrajectoryRecord,
};
pub use baselines::{GarchFit, GarchParams, SigmaFit};
pub use data::{ColumnRef, ColumnSpec, PriceSeries, ReturnSeries, Scenario, Segment};
pub use distribution::{StudentTParams, GAUSSIAN_NU};
pub use error::{Error, Result};
pub use evaluation::{SweepReport, SweepRow, TailTable};
pub use moments::{MomentSummary, MuPolicy, NuInversionTable};
