//! Per-body kinematics of the multirotor + 2-DOF arm in the free-flight
//! chart (8 generalized coordinates `q = [p; eta; gamma]`) and the
//! wire-constrained chart (5 generalized coordinates `r = [eta; gamma]`
//! with the end-effector pinned at a fixed anchor point).
//!
//! Everything downstream (mass matrices, Coriolis/gravity vectors, input
//! Jacobians, constraint reactions) is assembled from the `BodyKin` records
//! produced here, so the formulas in this module are the single source of
//! truth for the plant geometry.

use crate::params::ArmParams;
use crate::spatial::{
    euler_rate_matrix, euler_rate_matrix_dot, euler_to_rotation, rot_y, skew, EulerAngles,
};
use crate::{Mat3, Result, Vec3};
use nalgebra::{SMatrix, SVector};

/// Generalized coordinates of the free-flight chart.
pub type QVec = SVector<f64, 8>;
/// Generalized coordinates of the constrained chart.
pub type RVec = SVector<f64, 5>;
/// Two servo angles.
pub type Gamma = SVector<f64, 2>;

/// Arm joint axis in every local frame (body pitch axis).
fn joint_axis() -> Vec3 {
    Vec3::new(0.0, 1.0, 0.0)
}

/// State in the free-flight chart: `q = [p_ib; eta; gamma]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeState {
    pub q: QVec,
    pub qdot: QVec,
}

impl FreeState {
    pub fn new(q: QVec, qdot: QVec) -> Self {
        Self { q, qdot }
    }

    pub fn position(&self) -> Vec3 {
        self.q.fixed_rows::<3>(0).into()
    }

    pub fn eta(&self) -> Vec3 {
        self.q.fixed_rows::<3>(3).into()
    }

    pub fn gamma(&self) -> Gamma {
        self.q.fixed_rows::<2>(6).into()
    }

    pub fn velocity(&self) -> Vec3 {
        self.qdot.fixed_rows::<3>(0).into()
    }

    pub fn eta_dot(&self) -> Vec3 {
        self.qdot.fixed_rows::<3>(3).into()
    }

    pub fn gamma_dot(&self) -> Gamma {
        self.qdot.fixed_rows::<2>(6).into()
    }

    pub fn euler(&self) -> EulerAngles {
        EulerAngles::from(self.eta())
    }
}

/// State in the wire-constrained chart: `r = [eta; gamma]` with the
/// end-effector pinned at `anchor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedState {
    pub r: RVec,
    pub rdot: RVec,
    /// Inertial position of the pinned end-effector.
    pub anchor: Vec3,
}

impl ConstrainedState {
    pub fn new(r: RVec, rdot: RVec, anchor: Vec3) -> Self {
        Self { r, rdot, anchor }
    }

    pub fn from_parts(eta: Vec3, gamma: Gamma, eta_dot: Vec3, gamma_dot: Gamma, anchor: Vec3) -> Self {
        let mut r = RVec::zeros();
        r.fixed_rows_mut::<3>(0).copy_from(&eta);
        r.fixed_rows_mut::<2>(3).copy_from(&gamma);
        let mut rdot = RVec::zeros();
        rdot.fixed_rows_mut::<3>(0).copy_from(&eta_dot);
        rdot.fixed_rows_mut::<2>(3).copy_from(&gamma_dot);
        Self { r, rdot, anchor }
    }

    pub fn eta(&self) -> Vec3 {
        self.r.fixed_rows::<3>(0).into()
    }

    pub fn gamma(&self) -> Gamma {
        self.r.fixed_rows::<2>(3).into()
    }

    pub fn eta_dot(&self) -> Vec3 {
        self.rdot.fixed_rows::<3>(0).into()
    }

    pub fn gamma_dot(&self) -> Gamma {
        self.rdot.fixed_rows::<2>(3).into()
    }

    pub fn euler(&self) -> EulerAngles {
        EulerAngles::from(self.eta())
    }
}

/// Geometry of the four bodies (multirotor, servo 1, servo 2, end-effector)
/// expressed in the body frame for a given arm configuration.
#[derive(Debug, Clone)]
pub struct ArmGeometry {
    /// Body-frame offsets `c_i(gamma)` of each body origin.
    pub offsets: [Vec3; 4],
    /// `A_i = d c_i / d gamma` (3x2).
    pub offset_jac: [SMatrix<f64, 3, 2>; 4],
    /// Local orientation `S_i(gamma)` of each body relative to the base.
    pub local_rot: [Mat3; 4],
    /// Angular-velocity maps `K_i` with `omega_i = S_i^T omega_b + K_i gamma_dot`.
    pub omega_jac: [SMatrix<f64, 3, 2>; 4],
    /// Local spin-rate weights: `sdot_i = w_i . gamma_dot`.
    pub spin_weights: [Gamma; 4],
}

impl ArmGeometry {
    pub fn new(params: &ArmParams, gamma: &Gamma) -> Self {
        let j = joint_axis();
        let g1 = gamma[0];
        let g12 = gamma[0] + gamma[1];
        let d1 = Vec3::new(0.0, 0.0, -params.l_1);
        let d2 = Vec3::new(0.0, 0.0, -params.l_2);
        let u1 = rot_y(g1) * d1;
        let u2 = rot_y(g12) * d2;
        let p_b1 = params.p_b1_vec();

        let c_b = Vec3::zeros();
        let c_1 = p_b1;
        let c_2 = p_b1 + u1;
        let c_e = c_2 + u2;

        let mut a_2 = SMatrix::<f64, 3, 2>::zeros();
        a_2.set_column(0, &j.cross(&u1));
        let mut a_e = SMatrix::<f64, 3, 2>::zeros();
        a_e.set_column(0, &(j.cross(&u1) + j.cross(&u2)));
        a_e.set_column(1, &j.cross(&u2));

        let mut k_1 = SMatrix::<f64, 3, 2>::zeros();
        k_1.set_column(0, &j);
        let mut k_2 = SMatrix::<f64, 3, 2>::zeros();
        k_2.set_column(0, &j);
        k_2.set_column(1, &j);

        Self {
            offsets: [c_b, c_1, c_2, c_e],
            offset_jac: [SMatrix::zeros(), SMatrix::zeros(), a_2, a_e],
            local_rot: [Mat3::identity(), rot_y(g1), rot_y(g12), rot_y(g12)],
            omega_jac: [SMatrix::zeros(), k_1, k_2, k_2],
            spin_weights: [
                Gamma::zeros(),
                Gamma::new(1.0, 0.0),
                Gamma::new(1.0, 1.0),
                Gamma::new(1.0, 1.0),
            ],
        }
    }

    /// Time derivatives `Adot_i` of the offset Jacobians for a given `gamma_dot`.
    pub fn offset_jac_dot(&self, params: &ArmParams, gamma: &Gamma, gamma_dot: &Gamma) -> [SMatrix<f64, 3, 2>; 4] {
        let j = joint_axis();
        let g1 = gamma[0];
        let g12 = gamma[0] + gamma[1];
        let d1 = Vec3::new(0.0, 0.0, -params.l_1);
        let d2 = Vec3::new(0.0, 0.0, -params.l_2);
        let u1 = rot_y(g1) * d1;
        let u2 = rot_y(g12) * d2;
        let w1 = j.cross(&j.cross(&u1)) * gamma_dot[0];
        let w2 = j.cross(&j.cross(&u2)) * (gamma_dot[0] + gamma_dot[1]);
        let mut ad_2 = SMatrix::<f64, 3, 2>::zeros();
        ad_2.set_column(0, &w1);
        let mut ad_e = SMatrix::<f64, 3, 2>::zeros();
        ad_e.set_column(0, &(w1 + w2));
        ad_e.set_column(1, &w2);
        [SMatrix::zeros(), SMatrix::zeros(), ad_2, ad_e]
    }

    /// Body-frame end-effector offset `p_be(gamma)`.
    pub fn ee_offset(&self) -> Vec3 {
        self.offsets[3]
    }

    /// `A_E = d p_be / d gamma`.
    pub fn ee_offset_jac(&self) -> SMatrix<f64, 3, 2> {
        self.offset_jac[3]
    }
}

/// Kinematic record of one rigid body, sufficient for Lagrangian assembly.
///
/// Accelerations are affine in the generalized acceleration:
/// `a_i = jv * accel + acc_bias`, `omega_dot_i = jw * accel + omega_dot_bias`.
#[derive(Debug, Clone)]
pub struct BodyKin<const N: usize> {
    pub mass: f64,
    pub inertia: Mat3,
    pub pos: Vec3,
    pub rot: Mat3,
    pub jv: SMatrix<f64, 3, N>,
    pub jw: SMatrix<f64, 3, N>,
    pub vel: Vec3,
    pub omega: Vec3,
    pub acc_bias: Vec3,
    pub omega_dot_bias: Vec3,
}

/// Shared attitude context: rotation, Euler-rate matrix and its derivative.
pub struct AttitudeKin {
    pub rot: Mat3,
    pub q_mat: Mat3,
    pub q_dot: Mat3,
    pub omega: Vec3,
    /// `omega_dot` at zero `eta_ddot`, i.e. `Qdot * eta_dot`.
    pub omega_dot_bias: Vec3,
}

pub fn attitude_kin(eta: &Vec3, eta_dot: &Vec3) -> Result<AttitudeKin> {
    let e = EulerAngles::from(*eta);
    let rot = euler_to_rotation(e);
    let q_mat = euler_rate_matrix(e)?;
    let q_dot = euler_rate_matrix_dot(e, eta_dot)?;
    let omega = q_mat * eta_dot;
    Ok(AttitudeKin {
        rot,
        q_mat,
        q_dot,
        omega,
        omega_dot_bias: q_dot * eta_dot,
    })
}

/// Per-body kinematics in the free-flight chart.
pub fn free_bodies(params: &ArmParams, state: &FreeState) -> Result<[BodyKin<8>; 4]> {
    let eta = state.eta();
    let eta_dot = state.eta_dot();
    let gamma = state.gamma();
    let gamma_dot = state.gamma_dot();
    let att = attitude_kin(&eta, &eta_dot)?;
    let geo = ArmGeometry::new(params, &gamma);
    let adot = geo.offset_jac_dot(params, &gamma, &gamma_dot);
    let masses = params.masses();
    let inertias = params.inertia_mats();
    let p = state.position();
    let v = state.velocity();
    let r = att.rot;
    let omega = att.omega;

    let mut out: Vec<BodyKin<8>> = Vec::with_capacity(4);
    for i in 0..4 {
        let c = geo.offsets[i];
        let a = geo.offset_jac[i];
        let s = geo.local_rot[i];
        let k = geo.omega_jac[i];
        let sdot = geo.spin_weights[i].dot(&gamma_dot);

        let mut jv = SMatrix::<f64, 3, 8>::zeros();
        jv.fixed_view_mut::<3, 3>(0, 0).copy_from(&Mat3::identity());
        jv.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(-r * skew(&c) * att.q_mat));
        jv.fixed_view_mut::<3, 2>(0, 6).copy_from(&(r * a));

        let mut jw = SMatrix::<f64, 3, 8>::zeros();
        jw.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(s.transpose() * att.q_mat));
        jw.fixed_view_mut::<3, 2>(0, 6).copy_from(&k);

        let a_gd: Vec3 = a * gamma_dot;
        let vel = v + r * (omega.cross(&c) + a_gd);
        let om_i = s.transpose() * omega + k * gamma_dot;
        let acc_bias = r
            * (omega.cross(&(omega.cross(&c) + 2.0 * a_gd))
                + att.omega_dot_bias.cross(&c)
                + adot[i] * gamma_dot);
        let omega_dot_bias =
            s.transpose() * att.omega_dot_bias - joint_axis().cross(&(s.transpose() * omega)) * sdot;

        out.push(BodyKin {
            mass: masses[i],
            inertia: inertias[i],
            pos: p + r * c,
            rot: r * s,
            jv,
            jw,
            vel,
            omega: om_i,
            acc_bias,
            omega_dot_bias,
        });
    }
    Ok(out.try_into().map_err(|_| ()).expect("four bodies"))
}

/// Per-body kinematics in the wire-constrained chart.
pub fn constrained_bodies(params: &ArmParams, state: &ConstrainedState) -> Result<[BodyKin<5>; 4]> {
    let eta = state.eta();
    let eta_dot = state.eta_dot();
    let gamma = state.gamma();
    let gamma_dot = state.gamma_dot();
    let att = attitude_kin(&eta, &eta_dot)?;
    let geo = ArmGeometry::new(params, &gamma);
    let adot = geo.offset_jac_dot(params, &gamma, &gamma_dot);
    let masses = params.masses();
    let inertias = params.inertia_mats();
    let r = att.rot;
    let omega = att.omega;
    let c_e = geo.ee_offset();
    let a_e = geo.ee_offset_jac();

    let mut out: Vec<BodyKin<5>> = Vec::with_capacity(4);
    for i in 0..4 {
        let rho = c_e - geo.offsets[i];
        let b = a_e - geo.offset_jac[i];
        let bdot = adot[3] - adot[i];
        let s = geo.local_rot[i];
        let k = geo.omega_jac[i];
        let sdot = geo.spin_weights[i].dot(&gamma_dot);

        let mut jv = SMatrix::<f64, 3, 5>::zeros();
        jv.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(r * skew(&rho) * att.q_mat));
        jv.fixed_view_mut::<3, 2>(0, 3).copy_from(&(-r * b));

        let mut jw = SMatrix::<f64, 3, 5>::zeros();
        jw.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(s.transpose() * att.q_mat));
        jw.fixed_view_mut::<3, 2>(0, 3).copy_from(&k);

        let b_gd: Vec3 = b * gamma_dot;
        let vel = r * (rho.cross(&omega) - b_gd);
        let om_i = s.transpose() * omega + k * gamma_dot;
        let acc_bias = r
            * (omega.cross(&(rho.cross(&omega) - b_gd))
                + b_gd.cross(&omega)
                + rho.cross(&att.omega_dot_bias)
                - bdot * gamma_dot);
        let omega_dot_bias =
            s.transpose() * att.omega_dot_bias - joint_axis().cross(&(s.transpose() * omega)) * sdot;

        out.push(BodyKin {
            mass: masses[i],
            inertia: inertias[i],
            pos: state.anchor - r * rho,
            rot: r * s,
            jv,
            jw,
            vel,
            omega: om_i,
            acc_bias,
            omega_dot_bias,
        });
    }
    Ok(out.try_into().map_err(|_| ()).expect("four bodies"))
}

/// Embeds a constrained state into the free chart with `pdot_ie = 0`.
pub fn embed(params: &ArmParams, state: &ConstrainedState) -> Result<FreeState> {
    let bodies = constrained_bodies(params, state)?;
    let mut q = QVec::zeros();
    q.fixed_rows_mut::<3>(0).copy_from(&bodies[0].pos);
    q.fixed_rows_mut::<3>(3).copy_from(&state.eta());
    q.fixed_rows_mut::<2>(6).copy_from(&state.gamma());
    let mut qdot = QVec::zeros();
    qdot.fixed_rows_mut::<3>(0).copy_from(&bodies[0].vel);
    qdot.fixed_rows_mut::<3>(3).copy_from(&state.eta_dot());
    qdot.fixed_rows_mut::<2>(6).copy_from(&state.gamma_dot());
    Ok(FreeState::new(q, qdot))
}

/// Embedding Jacobian `E(r)` with `qdot = E * rdot` on the constraint manifold.
pub fn embedding_jacobian(params: &ArmParams, state: &ConstrainedState) -> Result<SMatrix<f64, 8, 5>> {
    let att = attitude_kin(&state.eta(), &state.eta_dot())?;
    let geo = ArmGeometry::new(params, &state.gamma());
    let mut e = SMatrix::<f64, 8, 5>::zeros();
    e.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(att.rot * skew(&geo.ee_offset()) * att.q_mat));
    e.fixed_view_mut::<3, 2>(0, 3)
        .copy_from(&(-att.rot * geo.ee_offset_jac()));
    e.fixed_view_mut::<3, 3>(3, 0).copy_from(&Mat3::identity());
    e.fixed_view_mut::<2, 2>(6, 3)
        .copy_from(&SMatrix::<f64, 2, 2>::identity());
    Ok(e)
}

/// Frame poses and velocities of the multirotor, both servos and the
/// end-effector.
#[derive(Debug, Clone)]
pub struct LinkKinematics {
    pub p_ib: Vec3,
    pub p_i1: Vec3,
    pub p_i2: Vec3,
    pub p_ie: Vec3,
    pub v_ib: Vec3,
    pub v_ie: Vec3,
    /// Body-frame angular velocity of the multirotor, `Q * eta_dot`.
    pub omega_b: Vec3,
    pub omega_1: Vec3,
    pub omega_2: Vec3,
    pub omega_e: Vec3,
}

fn link_kinematics_from<const N: usize>(bodies: &[BodyKin<N>; 4]) -> LinkKinematics {
    LinkKinematics {
        p_ib: bodies[0].pos,
        p_i1: bodies[1].pos,
        p_i2: bodies[2].pos,
        p_ie: bodies[3].pos,
        v_ib: bodies[0].vel,
        v_ie: bodies[3].vel,
        omega_b: bodies[0].omega,
        omega_1: bodies[1].omega,
        omega_2: bodies[2].omega,
        omega_e: bodies[3].omega,
    }
}

/// Frame poses/velocities in the free chart.
pub fn link_kinematics_free(params: &ArmParams, state: &FreeState) -> Result<LinkKinematics> {
    Ok(link_kinematics_from(&free_bodies(params, state)?))
}

/// Frame poses/velocities in the constrained chart; `v_ie` is identically zero.
pub fn link_kinematics_constrained(
    params: &ArmParams,
    state: &ConstrainedState,
) -> Result<LinkKinematics> {
    Ok(link_kinematics_from(&constrained_bodies(params, state)?))
}

/// Kinetic energy from body kinematics (used by test oracles as a route
/// independent of the mass-matrix assembly).
pub fn kinetic_energy<const N: usize>(bodies: &[BodyKin<N>; 4]) -> f64 {
    bodies
        .iter()
        .map(|b| 0.5 * b.mass * b.vel.norm_squared() + 0.5 * b.omega.dot(&(b.inertia * b.omega)))
        .sum()
}

/// Potential energy from body positions.
pub fn potential_energy<const N: usize>(bodies: &[BodyKin<N>; 4], g: f64) -> f64 {
    bodies.iter().map(|b| b.mass * g * b.pos.z).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> ArmParams {
        ArmParams::default()
    }

    #[test]
    fn straight_down_arm_identity_rotation() {
        // eta = 0, gamma = 0: p_i1 = p_ie + p_b1 - p_be.
        let p = params();
        let st = ConstrainedState::from_parts(
            Vec3::zeros(),
            Gamma::zeros(),
            Vec3::zeros(),
            Gamma::zeros(),
            Vec3::new(0.4, -0.2, 0.8),
        );
        let lk = link_kinematics_constrained(&p, &st).unwrap();
        let geo = ArmGeometry::new(&p, &Gamma::zeros());
        let expected = st.anchor + p.p_b1_vec() - geo.ee_offset();
        assert_relative_eq!(lk.p_i1, expected, epsilon = 1e-14);
        assert_relative_eq!(lk.p_ie, st.anchor, epsilon = 1e-14);
    }

    #[test]
    fn constrained_ee_velocity_is_zero() {
        let p = params();
        let st = ConstrainedState::from_parts(
            Vec3::new(0.2, -0.3, 0.5),
            Gamma::new(0.4, -0.7),
            Vec3::new(0.5, 0.8, -0.4),
            Gamma::new(-1.0, 0.6),
            Vec3::new(1.0, 2.0, 1.5),
        );
        let lk = link_kinematics_constrained(&p, &st).unwrap();
        assert!(lk.v_ie.norm() < 1e-14);

        // Finite-difference check of the pinned point through the embedding.
        let free = embed(&p, &st).unwrap();
        let dt = 1e-6;
        let q2 = free.q + free.qdot * dt;
        let st2 = FreeState::new(q2, free.qdot);
        let lk1 = link_kinematics_free(&p, &free).unwrap();
        let lk2 = link_kinematics_free(&p, &st2).unwrap();
        let v_fd = (lk2.p_ie - lk1.p_ie) / dt;
        assert!(v_fd.norm() < 1e-5, "fd ee velocity {}", v_fd.norm());
    }

    #[test]
    fn frozen_arm_ee_angular_velocity() {
        // With gamma_dot = 0: omega_e = R_be^T Q eta_dot.
        let p = params();
        let st = ConstrainedState::from_parts(
            Vec3::new(0.1, -0.2, 0.9),
            Gamma::new(0.3, 0.5),
            Vec3::new(0.4, -0.6, 0.2),
            Gamma::zeros(),
            Vec3::zeros(),
        );
        let lk = link_kinematics_constrained(&p, &st).unwrap();
        let geo = ArmGeometry::new(&p, &st.gamma());
        let expected = geo.local_rot[3].transpose() * lk.omega_b;
        assert_relative_eq!(lk.omega_e, expected, epsilon = 1e-13);
    }

    #[test]
    fn embedding_jacobian_matches_embedded_velocity() {
        let p = params();
        let st = ConstrainedState::from_parts(
            Vec3::new(-0.2, 0.35, 0.1),
            Gamma::new(0.5, -0.3),
            Vec3::new(0.8, -0.1, 0.3),
            Gamma::new(0.2, 0.9),
            Vec3::new(0.0, 0.0, 1.0),
        );
        let free = embed(&p, &st).unwrap();
        let e = embedding_jacobian(&p, &st).unwrap();
        let qdot: QVec = e * st.rdot;
        assert_relative_eq!(qdot, free.qdot, epsilon = 1e-13);
    }

    #[test]
    fn free_body_velocities_match_finite_differences() {
        let p = params();
        let q = QVec::from_column_slice(&[0.3, -0.5, 1.2, 0.2, -0.4, 0.7, 0.3, -0.6]);
        let qdot = QVec::from_column_slice(&[0.5, 0.1, -0.8, 0.9, 0.4, -0.2, 1.1, -0.7]);
        let st = FreeState::new(q, qdot);
        let bodies = free_bodies(&p, &st).unwrap();
        let h = 1e-7;
        let st2 = FreeState::new(q + qdot * h, qdot);
        let bodies2 = free_bodies(&p, &st2).unwrap();
        for (b1, b2) in bodies.iter().zip(bodies2.iter()) {
            let v_fd = (b2.pos - b1.pos) / h;
            assert!((v_fd - b1.vel).norm() < 1e-5);
            // Jacobian columns: dv/dqdot must reproduce vel.
            let v_from_jac: Vec3 = b1.jv * qdot;
            assert_relative_eq!(v_from_jac, b1.vel, epsilon = 1e-12);
            let w_from_jac: Vec3 = b1.jw * qdot;
            assert_relative_eq!(w_from_jac, b1.omega, epsilon = 1e-12);
        }
    }

    #[test]
    fn acceleration_bias_matches_finite_differences() {
        // a_i at zero generalized acceleration == d(vel)/dt along constant qdot.
        let p = params();
        let q = QVec::from_column_slice(&[0.0, 0.2, 1.0, -0.3, 0.5, -0.1, 0.8, 0.4]);
        let qdot = QVec::from_column_slice(&[0.4, -0.2, 0.3, 0.6, -0.5, 0.9, -0.3, 1.2]);
        let h = 1e-6;
        let st_m = FreeState::new(q - qdot * h, qdot);
        let st_0 = FreeState::new(q, qdot);
        let st_p = FreeState::new(q + qdot * h, qdot);
        let bm = free_bodies(&p, &st_m).unwrap();
        let b0 = free_bodies(&p, &st_0).unwrap();
        let bp = free_bodies(&p, &st_p).unwrap();
        for i in 0..4 {
            let a_fd = (bp[i].vel - bm[i].vel) / (2.0 * h);
            assert!(
                (a_fd - b0[i].acc_bias).norm() < 1e-5,
                "body {i}: {}",
                (a_fd - b0[i].acc_bias).norm()
            );
            let wd_fd = (bp[i].omega - bm[i].omega) / (2.0 * h);
            assert!((wd_fd - b0[i].omega_dot_bias).norm() < 1e-5);
        }
    }

    #[test]
    fn constrained_acceleration_bias_matches_finite_differences() {
        let p = params();
        let r = RVec::from_column_slice(&[0.25, -0.4, 0.6, 0.5, -0.8]);
        let rdot = RVec::from_column_slice(&[0.7, 0.3, -0.5, 1.0, 0.4]);
        let anchor = Vec3::new(0.1, 0.2, 1.4);
        let h = 1e-6;
        let mk = |r: RVec| ConstrainedState::new(r, rdot, anchor);
        let bm = constrained_bodies(&p, &mk(r - rdot * h)).unwrap();
        let b0 = constrained_bodies(&p, &mk(r)).unwrap();
        let bp = constrained_bodies(&p, &mk(r + rdot * h)).unwrap();
        for i in 0..4 {
            let a_fd = (bp[i].vel - bm[i].vel) / (2.0 * h);
            assert!(
                (a_fd - b0[i].acc_bias).norm() < 1e-5,
                "body {i}: {}",
                (a_fd - b0[i].acc_bias).norm()
            );
        }
    }
}
