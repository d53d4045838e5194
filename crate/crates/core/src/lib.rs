//! Finite-difference micromagnetics of thin-film skyrmion racetracks.
//!
//! The crate models a perpendicular ferromagnetic strip on a heavy-metal
//! underlayer: exchange, interfacial DMI and effective anisotropy define the
//! energy, and spin-Hall torques from an in-plane charge current drive
//! skyrmions and domain-wall pairs toward a rectangular pinning notch.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod io;
pub mod model;
pub mod textures;
pub mod thiele;
pub mod vec3;

pub use error::{Error, Result};
pub use vec3::Vec3;
