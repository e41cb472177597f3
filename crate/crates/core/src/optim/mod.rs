//! Parameter-update rules and the camelback benchmark.
//!
//! Every stepper is a pure function of its state, the current parameters and
//! a gradient; state advances by exactly one step per call.

mod bench;
mod natural;
mod schedule;
mod stepper;

pub use bench::{camelback, figure_methods, run_benchmark, Benchmark, BenchmarkRun, TrajectoryRow, CAMELBACK_START};
pub use natural::{natural_gradient_step, Damping};
pub use schedule::{PlateauHalving, StepSchedule};
pub use stepper::{OptimizerConfig, OptimizerState};
