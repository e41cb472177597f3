//! Structure-preserving building blocks for deep learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`numcore`]: dense tensors, seeded random streams, small linear algebra
//!   kernels and the finite-difference / projection routines used as oracles.
//! - [`blocks`]: ODE-inspired network blocks (forward Euler residual,
//!   gradient flow, symplectic Hamiltonian) with hand-derived adjoints.
//! - [`invertible`]: coupling layers, LU-parametrised linear maps, pixel
//!   shuffle, invertible residual blocks and normalising flows.
//! - [`equivariant`]: p4 group convolutions and the rotation-equivariant
//!   denoising model.
//! - [`optim`]: SGD, Adam, conformal momentum, relativistic and natural
//!   gradient steppers plus the camelback benchmark.
//! - [`control`]: losses, regularisers, training loops, successive
//!   approximation and the deep-limit experiment.
//!
//! All reals are `f64`.

pub mod blocks;
pub mod codec;
pub mod control;
pub mod equivariant;
mod error;
pub mod invertible;
pub mod numcore;
pub mod optim;

pub use error::{Error, Result};
pub use numcore::{Rng, Tensor};
