//! Dense numerics shared by every other module.

mod diff;
mod linalg;
mod rng;
mod simplex;
pub(crate) mod tensor;
pub mod vecops;

pub use diff::{finite_diff_grad, finite_diff_jacobian};
pub use linalg::{inverse, logabsdet_lu, power_iteration, solve_spd, spectral_norm, PowerEstimate};
pub use rng::Rng;
pub use simplex::project_simplex;
pub use tensor::Tensor;
