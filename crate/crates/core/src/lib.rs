//! Numerics for planar triple-junction solutions of the vector Allen-Cahn
//! equation: heteroclinic connections, disk solves with three-phase boundary
//! data, explicit competitors, and blow-down diagnostics.

pub mod connection;
pub mod error;
pub mod par;
pub mod potential;
pub mod vec2;

pub use error::{Error, Result};
pub use vec2::Vec2;
pub mod geometry;
pub mod construct;
pub mod field;
pub mod solve;
pub mod diagnose;
