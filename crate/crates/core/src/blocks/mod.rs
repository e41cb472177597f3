//! Parametric network blocks with exact hand-derived adjoints.
//!
//! Every block implements a forward map and a vector–Jacobian product for
//! both its input and its parameters. Chaining the input VJPs backward
//! through a [`ForwardTrace`] is the discrete adjoint recursion
//! `pᵏ = pᵏ⁺¹ + (∂_z fᵏ)ᵀ pᵏ⁺¹·h`, and the parameter VJPs give
//! `∂_{θᵏ} = h (∂_θ fᵏ)ᵀ pᵏ⁺¹`.

mod activation;
mod block;
pub(crate) mod network;
mod witness;

pub use activation::Activation;
pub use block::{Block, BlockKind, WeightSlot};
pub use network::{ForwardTrace, Gradients, Network, ParamVector};
pub use witness::one_sided_lipschitz_witness;
