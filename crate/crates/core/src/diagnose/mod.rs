//! Diagnostics on solved fields: phase arcs on circles, the diffuse
//! interface, horizontal slices and the blowdown ladder.

pub mod blowdown;
pub mod interface;
pub mod phases;
pub mod slices;

pub use blowdown::{angle_gap, blowdown, cauchy_report, junction_angles, power_fit, BlowdownRecord, BlowdownTrace, CauchyReport, PowerFit};
pub use interface::{diffuse_interface, junction_center, sector_region, InterfaceReport};
pub use phases::{phase_decomposition, phase_decomposition_fn, PhaseDecomposition};
pub use slices::{frame_rotation, lower_bound_for, lower_bound_value, primed_anchors, slice_profile, SliceProfile, SliceThresholds};
