//! Extrinsic calibration of multi-camera rigs that mix frame-based and
//! event-based sensors, using a wand of three blinking spherical markers.
//!
//! The pipeline mirrors the stages of a wand calibration session:
//!
//! 1. [`frame_detect`] / [`event_detect`] extract marker centers from images
//!    and event streams; [`wand`] orders them by the distance ratio.
//! 2. [`init_extrinsics`] chains pairwise epipolar geometry (7-point RANSAC,
//!    essential decomposition, golden-section metric scale) into an initial
//!    pose per camera.
//! 3. [`bundle_adjustment`] jointly refines poses and 3D marker positions
//!    under the wand linearity and spacing constraints.
//! 4. [`evaluation`] reports reprojection and 3D positional errors against a
//!    reference trajectory.
//!
//! [`simulator`] synthesizes rigs, wand sweeps, frames and event streams with
//! exact ground truth, and is what the test suites calibrate against.

pub mod bundle_adjustment;
pub mod evaluation;
pub mod event_detect;
pub mod frame_detect;
pub mod geometry;
pub mod init_extrinsics;
pub mod io;
pub mod observations;
pub mod rng;
pub mod optim;
pub mod simulator;
pub mod wand;

pub use geometry::{CameraIntrinsics, CameraPose, Pixel, Point3, ProjectionMatrix};
pub use observations::{ObservationSet, WandObservation};
pub use wand::{LabeledTriple, WandSpec};
