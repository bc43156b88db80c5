//! Physical parameters of the multirotor + 2-DOF arm.

use crate::{Mat3, Vec3};
use serde::{Deserialize, Serialize};

/// Plant parameters. Inertias are diagonal and stored as their diagonals.
///
/// The arm is a two-link planar chain: servo 1 sits at `p_b1` in the body
/// frame and pitches link 1 (length `l_1`) about the body y axis; servo 2
/// sits at the end of link 1 and pitches link 2 (length `l_2`) about the
/// same axis; the end-effector is rigidly attached to the tip of link 2.
/// With `gamma = 0` the arm points straight down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmParams {
    /// Multirotor mass (kg).
    pub m_b: f64,
    /// Servo-1 mass (kg).
    pub m_1: f64,
    /// Servo-2 mass (kg).
    pub m_2: f64,
    /// Multirotor inertia diagonal (kg m^2).
    pub j_b: [f64; 3],
    /// Servo-1 inertia diagonal (kg m^2).
    pub j_1: [f64; 3],
    /// Servo-2 inertia diagonal (kg m^2).
    pub j_2: [f64; 3],
    /// End-effector inertia diagonal (kg m^2); the end-effector is massless.
    pub j_e: [f64; 3],
    /// Servo-1 mount offset in the body frame (m).
    pub p_b1: [f64; 3],
    /// Link lengths (m).
    pub l_1: f64,
    pub l_2: f64,
    /// Gravitational acceleration (m/s^2).
    pub g: f64,
    /// Nominal body inertia diagonal used by the DOB design (kg m^2).
    /// Must be strictly below `j_b` on every axis.
    pub j_bar_b: [f64; 3],
    /// Maximum total thrust (N).
    pub t_max: f64,
}

impl Default for ArmParams {
    fn default() -> Self {
        let j_b = [0.021, 0.022, 0.033];
        Self {
            m_b: 2.4,
            m_1: 0.12,
            m_2: 0.12,
            j_b,
            j_1: [2e-5, 2e-5, 2e-5],
            j_2: [2e-5, 2e-5, 2e-5],
            j_e: [1e-5, 1e-5, 1e-5],
            p_b1: [0.0, 0.0, -0.05],
            l_1: 0.12,
            l_2: 0.12,
            g: 9.81,
            j_bar_b: [0.8 * j_b[0], 0.8 * j_b[1], 0.8 * j_b[2]],
            t_max: 40.0,
        }
    }
}

impl ArmParams {
    pub fn total_mass(&self) -> f64 {
        self.m_b + self.m_1 + self.m_2
    }

    pub fn p_b1_vec(&self) -> Vec3 {
        Vec3::from_column_slice(&self.p_b1)
    }

    pub fn j_b_mat(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::from_column_slice(&self.j_b))
    }

    pub fn j_bar_b_mat(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::from_column_slice(&self.j_bar_b))
    }

    /// Elementwise square root of the diagonal nominal inertia.
    pub fn j_bar_b_sqrt(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(
            self.j_bar_b[0].sqrt(),
            self.j_bar_b[1].sqrt(),
            self.j_bar_b[2].sqrt(),
        ))
    }

    pub fn inertia_mats(&self) -> [Mat3; 4] {
        [
            Mat3::from_diagonal(&Vec3::from_column_slice(&self.j_b)),
            Mat3::from_diagonal(&Vec3::from_column_slice(&self.j_1)),
            Mat3::from_diagonal(&Vec3::from_column_slice(&self.j_2)),
            Mat3::from_diagonal(&Vec3::from_column_slice(&self.j_e)),
        ]
    }

    pub fn masses(&self) -> [f64; 4] {
        [self.m_b, self.m_1, self.m_2, 0.0]
    }

    /// Checks positivity and the nominal-inertia ordering.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.m_b > 0.0 && self.m_1 > 0.0 && self.m_2 > 0.0) {
            return Err("masses must be positive".into());
        }
        if !(self.l_1 > 0.0 && self.l_2 > 0.0) {
            return Err("link lengths must be positive".into());
        }
        if !(self.g > 0.0) {
            return Err("gravity must be positive".into());
        }
        if !(self.t_max > 0.0) {
            return Err("t_max must be positive".into());
        }
        for j in [&self.j_b, &self.j_1, &self.j_2, &self.j_e, &self.j_bar_b] {
            if j.iter().any(|&x| x <= 0.0) {
                return Err("inertia diagonals must be positive".into());
            }
        }
        for i in 0..3 {
            if self.j_bar_b[i] >= self.j_b[i] {
                return Err(format!(
                    "j_bar_b[{i}] = {} must be strictly below j_b[{i}] = {}",
                    self.j_bar_b[i], self.j_b[i]
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ArmParams::default().validate().unwrap();
    }

    #[test]
    fn nominal_inertia_ordering_enforced() {
        let mut p = ArmParams::default();
        p.j_bar_b = [1.5 * p.j_b[0], 1.5 * p.j_b[1], 1.5 * p.j_b[2]];
        assert!(p.validate().is_err());
    }
}
