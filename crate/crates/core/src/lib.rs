//! Simulation library for an aerial manipulator (multirotor + 2-DOF arm)
//! pulling a plug out of a socket.
//!
//! The mission is modeled as a hybrid automaton with three operative modes:
//! wire-pulling (`WP`, end-effector pinned to the socket), stabilizing (`ST`,
//! brief attitude recovery right after separation) and free-flight (`FF`,
//! return to the start pose). Each mode has its own Euler-Lagrange flow map,
//! reference trajectory and disturbance-observer (DOB) based controller.
//!
//! Modules:
//!
//! - [`spatial`]: rotations, skew operator, Euler-rate kinematics
//! - [`params`]: physical and nominal plant parameters
//! - [`kinematics`]: arm geometry and per-body kinematics in both charts
//! - [`dynamics`]: mass/Coriolis/gravity assembly, flow maps, end-effector force
//! - [`trajectory`]: per-mode reference generation
//! - [`dob`]: saturation function, DOB filter bank, nominal attitude control
//! - [`controller`]: mode controllers (WP attitude DOB, ST/FF cascade)
//! - [`hybrid`]: guards, resets and the event-detecting simulation loop
//! - [`trace`]: trace records and CSV persistence
//! - [`config`]: scenario configuration, validation, env overrides
//! - [`scenario`]: run/sweep/Monte-Carlo/compare pipelines
//! - [`analysis`]: fast-variable, sector and robust-maneuver checks

pub mod analysis;
pub mod config;
pub mod controller;
pub mod dob;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod hybrid;
pub mod kinematics;
pub mod params;
pub mod scenario;
pub mod spatial;
pub mod trace;
pub mod trajectory;

pub use error::Error;

use nalgebra::{Matrix3, Vector3};

/// 3-vector of `f64`.
pub type Vec3 = Vector3<f64>;
/// 3x3 matrix of `f64`.
pub type Mat3 = Matrix3<f64>;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
