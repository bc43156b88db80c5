//! Rotation, skew and Euler-rate kinematics shared by all dynamics code.
//!
//! Convention: Z-Y-X intrinsic Euler angles (yaw-pitch-roll), inertial frame
//! z-up, body frame z along the thrust axis. `R = Rz(psi) * Ry(theta) * Rx(phi)`
//! maps body coordinates to inertial coordinates.

use crate::{Error, Mat3, Result, Vec3};

/// Pitch magnitude beyond which the Euler-rate matrix is treated as singular.
pub const GIMBAL_MARGIN: f64 = 1e-3;

/// Roll, pitch, yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn to_vec(self) -> Vec3 {
        Vec3::new(self.roll, self.pitch, self.yaw)
    }

    /// True when the pitch is clear of the Euler-rate singularity.
    pub fn clear_of_gimbal_lock(&self) -> bool {
        self.pitch.abs() < std::f64::consts::FRAC_PI_2 - GIMBAL_MARGIN
    }

    fn gimbal_check(&self) -> Result<()> {
        if self.clear_of_gimbal_lock() {
            Ok(())
        } else {
            Err(Error::GimbalLock {
                theta: self.pitch,
                margin: GIMBAL_MARGIN,
            })
        }
    }
}

impl From<Vec3> for EulerAngles {
    fn from(v: Vec3) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// so(3) operator: `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation about the x axis.
pub fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation about the y axis.
pub fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation about the z axis.
pub fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Body-to-inertial rotation for Z-Y-X intrinsic Euler angles.
pub fn euler_to_rotation(e: EulerAngles) -> Mat3 {
    rot_z(e.yaw) * rot_y(e.pitch) * rot_x(e.roll)
}

/// Euler-rate matrix `Q` with `omega_body = Q * eta_dot`.
pub fn euler_rate_matrix(e: EulerAngles) -> Result<Mat3> {
    e.gimbal_check()?;
    let (sp, cp) = e.roll.sin_cos();
    let (st, ct) = e.pitch.sin_cos();
    Ok(Mat3::new(
        1.0,
        0.0,
        -st,
        0.0,
        cp,
        sp * ct,
        0.0,
        -sp,
        cp * ct,
    ))
}

/// Time derivative of the Euler-rate matrix along `eta_dot`.
pub fn euler_rate_matrix_dot(e: EulerAngles, eta_dot: &Vec3) -> Result<Mat3> {
    e.gimbal_check()?;
    let (sp, cp) = e.roll.sin_cos();
    let (st, ct) = e.pitch.sin_cos();
    let (dphi, dtheta) = (eta_dot.x, eta_dot.y);
    // dQ/dphi * phidot + dQ/dtheta * thetadot; Q has no psi dependence.
    let d_phi = Mat3::new(
        0.0,
        0.0,
        0.0,
        0.0,
        -sp,
        cp * ct,
        0.0,
        -cp,
        -sp * ct,
    );
    let d_theta = Mat3::new(
        0.0,
        0.0,
        -ct,
        0.0,
        0.0,
        -sp * st,
        0.0,
        0.0,
        -cp * st,
    );
    Ok(d_phi * dphi + d_theta * dtheta)
}

/// `Q` and its inverse in one call.
pub fn euler_rate_matrix_inv(e: EulerAngles) -> Result<Mat3> {
    let q = euler_rate_matrix(e)?;
    q.try_inverse().ok_or(Error::GimbalLock {
        theta: e.pitch,
        margin: GIMBAL_MARGIN,
    })
}

/// Spectral norm (largest singular value) of a 3x3 matrix.
pub fn spectral_norm(m: &Mat3) -> f64 {
    (m.transpose() * m)
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l.max(0.0)))
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn skew_zero_is_zero_matrix() {
        assert_eq!(skew(&Vec3::zeros()), Mat3::zeros());
    }

    #[test]
    fn skew_basis_cross_product() {
        let v = skew(&Vec3::new(1.0, 0.0, 0.0)) * Vec3::new(0.0, 1.0, 0.0);
        assert_relative_eq!(v, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn identity_rotation_at_zero_angles() {
        assert_relative_eq!(euler_to_rotation(EulerAngles::zero()), Mat3::identity());
    }

    #[test]
    fn ninety_degree_pitch_maps_x_to_minus_z() {
        let r = euler_to_rotation(EulerAngles::new(0.0, std::f64::consts::FRAC_PI_2, 0.0));
        let v = r * Vec3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(v, Vec3::new(0.0, 0.0, -1.0), epsilon = 1e-15);
    }

    #[test]
    fn euler_rate_matrix_is_identity_at_hover() {
        assert_relative_eq!(
            euler_rate_matrix(EulerAngles::zero()).unwrap(),
            Mat3::identity()
        );
    }

    #[test]
    fn gimbal_lock_raised_at_threshold() {
        let e = EulerAngles::new(0.0, std::f64::consts::FRAC_PI_2 - 1e-4, 0.0);
        assert!(matches!(
            euler_rate_matrix(e),
            Err(Error::GimbalLock { .. })
        ));
    }

    #[test]
    fn finite_difference_kinematics_consistency() {
        // skew(Q * eta_dot) must match R^T * Rdot from a finite difference.
        let cases = [
            (EulerAngles::new(0.3, -0.4, 1.1), Vec3::new(0.7, -0.2, 0.5)),
            (EulerAngles::new(-0.9, 0.8, -2.0), Vec3::new(-0.3, 1.2, 0.1)),
            (EulerAngles::new(0.05, 0.0, 0.0), Vec3::new(0.0, 2.0, -1.0)),
        ];
        let h = 1e-7;
        for (e, ed) in cases {
            let q = euler_rate_matrix(e).unwrap();
            let r = euler_to_rotation(e);
            let ep = EulerAngles::from(e.to_vec() + ed * h);
            let em = EulerAngles::from(e.to_vec() - ed * h);
            let r_dot = (euler_to_rotation(ep) - euler_to_rotation(em)) / (2.0 * h);
            let lhs = skew(&(q * ed));
            let rhs = r.transpose() * r_dot;
            assert!((lhs - rhs).norm() < 1e-6, "mismatch {}", (lhs - rhs).norm());
        }
    }

    #[test]
    fn euler_rate_matrix_dot_matches_finite_difference() {
        let e = EulerAngles::new(0.2, -0.5, 0.9);
        let ed = Vec3::new(0.4, 0.3, -0.8);
        let h = 1e-7;
        let qd = euler_rate_matrix_dot(e, &ed).unwrap();
        let qp = euler_rate_matrix(EulerAngles::from(e.to_vec() + ed * h)).unwrap();
        let qm = euler_rate_matrix(EulerAngles::from(e.to_vec() - ed * h)).unwrap();
        assert!((qd - (qp - qm) / (2.0 * h)).norm() < 1e-6);
    }

    #[test]
    fn rate_matrix_inverse_bounded_inside_envelope() {
        // |Q^-1|_2 = 1/sqrt(1 - |sin theta|) stays under 1/cos(theta) + 2
        // on the flight envelope (the bound fails within ~0.22 rad of the
        // singularity, which the envelope excludes).
        for i in 0..50 {
            let theta = -1.25 + 2.5 * (i as f64) / 49.0;
            let e = EulerAngles::new(0.9, theta, -2.0);
            let qi = euler_rate_matrix_inv(e).unwrap();
            assert!(spectral_norm(&qi) <= 1.0 / theta.cos() + 2.0);
        }
    }

    proptest! {
        #[test]
        fn skew_matches_componentwise_cross(
            vx in -10.0..10.0, vy in -10.0..10.0, vz in -10.0..10.0,
            wx in -10.0..10.0, wy in -10.0..10.0, wz in -10.0..10.0,
        ) {
            let v = Vec3::new(vx, vy, vz);
            let w = Vec3::new(wx, wy, wz);
            let diff = skew(&v) * w - v.cross(&w);
            prop_assert!(diff.amax() < 1e-12);
        }

        #[test]
        fn skew_is_linear_and_antisymmetric(
            ax in -5.0..5.0, ay in -5.0..5.0, az in -5.0..5.0,
            bx in -5.0..5.0, by in -5.0..5.0, bz in -5.0..5.0,
        ) {
            let a = Vec3::new(ax, ay, az);
            let b = Vec3::new(bx, by, bz);
            prop_assert_eq!(skew(&(a + b)), skew(&a) + skew(&b));
            prop_assert_eq!(skew(&a).transpose(), -skew(&a));
        }

        #[test]
        fn rotation_is_orthonormal(
            phi in -3.0..3.0, theta in -1.5..1.5, psi in -3.0..3.0,
        ) {
            let r = euler_to_rotation(EulerAngles::new(phi, theta, psi));
            let err = (r.transpose() * r - Mat3::identity()).norm();
            prop_assert!(err < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rotation_factors_through_yaw(
            phi in -1.2..1.2, theta in -1.2..1.2, psi in -3.0..3.0,
        ) {
            // Rz(psi)^T R == Ry(theta) Rx(phi)
            let r = euler_to_rotation(EulerAngles::new(phi, theta, psi));
            let err = (rot_z(psi).transpose() * r - rot_y(theta) * rot_x(phi)).norm();
            prop_assert!(err < 1e-12);
        }
    }
}
