//! Null distributions of the heights of local maxima.

pub mod hermite;
pub mod isotropic;
pub mod normal;
pub mod overshoot;
mod quadrature;

pub use hermite::hermite;
pub use isotropic::{density_g, IsotropicHeightLaw, TabulatedTail};
pub use overshoot::{beta_factor, overshoot_k, OvershootLaw};
