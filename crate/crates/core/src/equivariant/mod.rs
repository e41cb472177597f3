//! p4 group convolutions (90° rotations and translations of a periodic grid)
//! and the rotation-equivariant denoiser.
//!
//! Feature maps on the group carry a rotation axis of length 4. The group
//! element `r` acts on a [`P4Feature`] by rotating every spatial plane by
//! `r·90°` counterclockwise and cyclically shifting the rotation axis by `r`.

mod conv;
mod data;
mod grid;
mod model;
mod objective;

pub use conv::{gconv, group_project, lift_conv, P4Kernel};
pub use data::{images_from_container, images_to_container, rectangles_dataset};
pub use grid::{rot90_image, rot90_p4, GridImage, P4Feature};
pub use model::{ConvDenoiser, DenoiserGroup};
pub use objective::{denoise_objective, denoise_objective_grad};
