//! Invertible layers and normalising flows.
//!
//! Every layer maps `ℝᴹ → ℝᴹ`, has an inverse and a log-determinant, and
//! exposes a vector–Jacobian product of `⟨dy, y⟩ + c·log|det ∂y/∂x|` so that
//! flow likelihoods can be trained through the same adjoint machinery as
//! plain networks.

mod coupling;
mod flow;
mod iresnet;
mod linear;
mod shuffle;

pub use coupling::{CouplingLaw, CouplingLayer, SCALE_CLAMP};
pub use flow::{FlowLayer, FlowModel, LOG_2PI};
pub use iresnet::{IResBlock, LogdetConfig};
pub use linear::{InvLinear, DIAG_FLOOR};
pub use shuffle::{pixel_shuffle, pixel_unshuffle, PixelShuffle};
