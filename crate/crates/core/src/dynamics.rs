//! Euler-Lagrange dynamics in the free-flight chart (8 DOF) and the
//! wire-constrained chart (5 DOF), the attitude submodel and its nominal
//! counterpart, and the end-effector constraint reaction.
//!
//! Terms are assembled from body Jacobians (mass matrix) and projected
//! Newton-Euler inertial forces (Coriolis/gravity vectors), which is exact
//! for this tree-structured system; no finite differencing is involved.

use crate::kinematics::{
    attitude_kin, constrained_bodies, embed, embedding_jacobian, free_bodies, ArmGeometry,
    BodyKin, ConstrainedState, FreeState, Gamma, QVec, RVec,
};
use crate::params::ArmParams;
use crate::spatial::skew;
use crate::{Error, Mat3, Result, Vec3};
use nalgebra::{SMatrix, SVector};

/// Wrench-level control input `u_f = [T; tau_b; tau_gamma]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    /// Total thrust along the body z axis (N).
    pub thrust: f64,
    /// Body moments (N m).
    pub tau_b: Vec3,
    /// Servo torques (N m).
    pub tau_gamma: Gamma,
}

impl ControlInput {
    pub fn new(thrust: f64, tau_b: Vec3, tau_gamma: Gamma) -> Self {
        Self {
            thrust,
            tau_b,
            tau_gamma,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, Vec3::zeros(), Gamma::zeros())
    }

    pub fn to_vec6(&self) -> SVector<f64, 6> {
        SVector::<f64, 6>::from_column_slice(&[
            self.thrust,
            self.tau_b.x,
            self.tau_b.y,
            self.tau_b.z,
            self.tau_gamma.x,
            self.tau_gamma.y,
        ])
    }
}

/// Assembled Euler-Lagrange terms for one chart.
#[derive(Debug, Clone)]
pub struct ElTerms<const N: usize> {
    /// Mass matrix.
    pub m: SMatrix<f64, N, N>,
    /// Coriolis/centrifugal vector.
    pub c: SVector<f64, N>,
    /// Gravity vector.
    pub k: SVector<f64, N>,
    /// Input Jacobian mapping generalized velocity to the collocated
    /// velocities `[e3 . pdot_b^B; omega_b^B; gamma_dot]`; the generalized
    /// force is `j_u^T * u_f`.
    pub j_u: SMatrix<f64, 6, N>,
}

macro_rules! impl_el_terms {
    ($n:literal) => {
        impl ElTerms<$n> {
            /// Forward dynamics: accel = M^-1 (-C - K + J_u^T u_f + tau_e).
            pub fn accel(
                &self,
                u: &ControlInput,
                tau_e: &SVector<f64, $n>,
            ) -> Result<SVector<f64, $n>> {
                let rhs = -self.c - self.k + self.j_u.transpose() * u.to_vec6() + tau_e;
                self.solve(&rhs)
            }

            pub fn solve(&self, rhs: &SVector<f64, $n>) -> Result<SVector<f64, $n>> {
                let chol = self.m.cholesky().ok_or_else(|| Error::SingularMass {
                    min_eig: self.min_eig(),
                })?;
                // Guard against a technically-PD but numerically collapsed matrix.
                let lmin = (0..$n).fold(f64::INFINITY, |a: f64, i| a.min(chol.l_dirty()[(i, i)]));
                if lmin * lmin < 1e-12 && self.min_eig() < 1e-9 {
                    return Err(Error::SingularMass {
                        min_eig: self.min_eig(),
                    });
                }
                Ok(chol.solve(rhs))
            }

            pub fn min_eig(&self) -> f64 {
                min_symmetric_eig(&self.m)
            }
        }
    };
}

impl_el_terms!(5);
impl_el_terms!(8);

/// Smallest eigenvalue of a symmetric matrix via cyclic Jacobi sweeps.
pub fn min_symmetric_eig<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    let mut a = *m;
    for _ in 0..60 {
        let mut off = 0.0;
        for i in 0..N {
            for j in (i + 1)..N {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..N).fold(f64::INFINITY, |acc, i| acc.min(a[(i, i)]))
}

fn assemble<const N: usize>(bodies: &[BodyKin<N>; 4], g: f64) -> (SMatrix<f64, N, N>, SVector<f64, N>, SVector<f64, N>) {
    let mut m = SMatrix::<f64, N, N>::zeros();
    let mut c = SVector::<f64, N>::zeros();
    let mut k = SVector::<f64, N>::zeros();
    let e3 = Vec3::new(0.0, 0.0, 1.0);
    for b in bodies {
        m += b.jv.transpose() * b.jv * b.mass + b.jw.transpose() * b.inertia * b.jw;
        let inertial_torque = b.inertia * b.omega_dot_bias + b.omega.cross(&(b.inertia * b.omega));
        c += b.jv.transpose() * (b.acc_bias * b.mass) + b.jw.transpose() * inertial_torque;
        k += b.jv.transpose() * (e3 * (b.mass * g));
    }
    // Symmetrize away rounding asymmetry from the products.
    m = (m + m.transpose()) * 0.5;
    (m, c, k)
}

/// Euler-Lagrange terms of the free-flight chart.
pub fn free_flight_terms(params: &ArmParams, state: &FreeState) -> Result<ElTerms<8>> {
    let bodies = free_bodies(params, state)?;
    let (m, c, k) = assemble(&bodies, params.g);
    let att = attitude_kin(&state.eta(), &state.eta_dot())?;
    let mut j_u = SMatrix::<f64, 6, 8>::zeros();
    let thrust_row = att.rot.transpose().row(2).transpose();
    j_u.fixed_view_mut::<1, 3>(0, 0)
        .copy_from(&thrust_row.transpose());
    j_u.fixed_view_mut::<3, 3>(1, 3).copy_from(&att.q_mat);
    j_u.fixed_view_mut::<2, 2>(4, 6)
        .copy_from(&SMatrix::<f64, 2, 2>::identity());
    Ok(ElTerms { m, c, k, j_u })
}

/// Flow map of the free-flight chart: `qddot`.
pub fn free_flight_flow(
    params: &ArmParams,
    state: &FreeState,
    u: &ControlInput,
    tau_e: &QVec,
) -> Result<QVec> {
    free_flight_terms(params, state)?.accel(u, tau_e)
}

/// Euler-Lagrange terms of the wire-constrained chart.
pub fn wire_pulling_terms(params: &ArmParams, state: &ConstrainedState) -> Result<ElTerms<5>> {
    let bodies = constrained_bodies(params, state)?;
    let (m, c, k) = assemble(&bodies, params.g);
    let att = attitude_kin(&state.eta(), &state.eta_dot())?;
    let geo = ArmGeometry::new(params, &state.gamma());
    let mut j_u = SMatrix::<f64, 6, 5>::zeros();
    // Thrust row: e3 . pdot_b^B with pdot_b^B = [c_e] Q etadot - A_e gammadot.
    let j_t_eta = (skew(&geo.ee_offset()) * att.q_mat).row(2).clone_owned();
    let j_t_gamma = -geo.ee_offset_jac().row(2).clone_owned();
    j_u.fixed_view_mut::<1, 3>(0, 0).copy_from(&j_t_eta);
    j_u.fixed_view_mut::<1, 2>(0, 3).copy_from(&j_t_gamma);
    j_u.fixed_view_mut::<3, 3>(1, 0).copy_from(&att.q_mat);
    j_u.fixed_view_mut::<2, 2>(4, 3)
        .copy_from(&SMatrix::<f64, 2, 2>::identity());
    Ok(ElTerms { m, c, k, j_u })
}

/// Flow map of the wire-constrained chart: `rddot`.
pub fn wire_pulling_flow(
    params: &ArmParams,
    state: &ConstrainedState,
    u: &ControlInput,
    tau_e: &RVec,
) -> Result<RVec> {
    wire_pulling_terms(params, state)?.accel(u, tau_e)
}

/// Attitude submodel of the constrained chart: `etaddot = f_eta + g_eta * tau_b`
/// for a supplied (measured or exact) `gamma_ddot`.
///
/// `tau_e` is the 5-dimensional constrained-chart disturbance; only its
/// attitude rows enter.
pub fn attitude_submodel(
    params: &ArmParams,
    state: &ConstrainedState,
    thrust: f64,
    gamma_ddot: &Gamma,
    tau_e: &RVec,
) -> Result<(Vec3, Mat3)> {
    let terms = wire_pulling_terms(params, state)?;
    submodel_from_terms(&terms, state, thrust, gamma_ddot, &tau_e.fixed_rows::<3>(0).into())
}

fn submodel_from_terms(
    terms: &ElTerms<5>,
    state: &ConstrainedState,
    thrust: f64,
    gamma_ddot: &Gamma,
    tau_e_eta: &Vec3,
) -> Result<(Vec3, Mat3)> {
    let att = attitude_kin(&state.eta(), &state.eta_dot())?;
    let m_eta: Mat3 = terms.m.fixed_view::<3, 3>(0, 0).into();
    let m_eta_gamma: SMatrix<f64, 3, 2> = terms.m.fixed_view::<3, 2>(0, 3).into();
    let c_eta: Vec3 = terms.c.fixed_rows::<3>(0).into();
    let k_eta: Vec3 = terms.k.fixed_rows::<3>(0).into();
    let j_t_eta: Vec3 = terms.j_u.fixed_view::<1, 3>(0, 0).transpose();
    let m_inv = m_eta.try_inverse().ok_or(Error::SingularMass {
        min_eig: m_eta.symmetric_eigenvalues().min(),
    })?;
    let f_eta = m_inv * (-c_eta - k_eta - m_eta_gamma * gamma_ddot + j_t_eta * thrust + tau_e_eta);
    let g_eta = m_inv * att.q_mat.transpose();
    Ok((f_eta, g_eta))
}

/// Choice of nominal input matrix for the attitude DOB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NominalInputModel {
    /// `gbar_eta = j_bar_b^-1 Q^T`: the lightweight design model.
    BodyInertia,
    /// `gbar_eta = mbar_eta^-1 Q^T`: full nominal structure; with nominal
    /// parameters equal to the true ones this reproduces the plant exactly.
    FullModel,
}

/// Nominal attitude model `(fbar_eta, gbar_eta)` assembled from nominal
/// parameters with the disturbance omitted and `gamma_ddot` replaced by an
/// estimate.
pub fn nominal_attitude_model(
    nominal: &ArmParams,
    j_bar_b: &Mat3,
    state_estimate: &ConstrainedState,
    thrust: f64,
    gamma_ddot_est: &Gamma,
    input_model: NominalInputModel,
) -> Result<(Vec3, Mat3)> {
    let terms = wire_pulling_terms(nominal, state_estimate)?;
    let (f_bar, g_full) =
        submodel_from_terms(&terms, state_estimate, thrust, gamma_ddot_est, &Vec3::zeros())?;
    let g_bar = match input_model {
        NominalInputModel::FullModel => g_full,
        NominalInputModel::BodyInertia => {
            let att = attitude_kin(&state_estimate.eta(), &state_estimate.eta_dot())?;
            let j_inv = j_bar_b.try_inverse().ok_or_else(|| Error::NonInvertible {
                context: "nominal body inertia".into(),
            })?;
            j_inv * att.q_mat.transpose()
        }
    };
    Ok((f_bar, g_bar))
}

/// Attitude block of the constrained mass matrix in angular-velocity
/// coordinates: `m_star = Q^-T M_eta Q^-1`.
pub fn m_star_eta(params: &ArmParams, state: &ConstrainedState) -> Result<Mat3> {
    let terms = wire_pulling_terms(params, state)?;
    let att = attitude_kin(&state.eta(), &state.eta_dot())?;
    let q_inv = att.q_mat.try_inverse().ok_or(Error::GimbalLock {
        theta: state.eta().y,
        margin: crate::spatial::GIMBAL_MARGIN,
    })?;
    let m_eta: Mat3 = terms.m.fixed_view::<3, 3>(0, 0).into();
    Ok(q_inv.transpose() * m_eta * q_inv)
}

/// End-effector interaction force.
#[derive(Debug, Clone, Copy)]
pub struct EndEffectorForce {
    /// Exact constraint reaction at the pin, in the inertial frame (N).
    pub exact: Vec3,
    /// Quasi-static approximation of the pulling component: `-T sin(theta)`.
    pub quasi_static_x: f64,
}

/// Constraint reaction at the pinned end-effector, computed from the
/// Lagrange-multiplier formulation of the pin constraint on the free-flight
/// model, plus the quasi-static approximation.
///
/// `tau_e_q` is the free-chart generalized disturbance (its attitude/servo
/// rows correspond to the constrained-chart disturbance).
pub fn end_effector_force(
    params: &ArmParams,
    state: &ConstrainedState,
    u: &ControlInput,
    tau_e_q: &QVec,
) -> Result<EndEffectorForce> {
    let free = embed(params, state)?;
    let terms = free_flight_terms(params, &free)?;
    let bodies = free_bodies(params, &free)?;
    let j_c = bodies[3].jv;
    let bias = bodies[3].acc_bias;
    let rhs = -terms.c - terms.k + terms.j_u.transpose() * u.to_vec6() + tau_e_q;
    let m_inv_rhs = terms.solve(&rhs)?;
    let mut jmj = Mat3::zeros();
    for col in 0..3 {
        let jcol: QVec = j_c.row(col).transpose();
        let sol = terms.solve(&jcol)?;
        let prod: Vec3 = j_c * sol;
        jmj.set_column(col, &prod);
    }
    let jmj = (jmj + jmj.transpose()) * 0.5;
    let lambda = -jmj
        .cholesky()
        .ok_or(Error::SingularMass {
            min_eig: jmj.symmetric_eigenvalues().min(),
        })?
        .solve(&(j_c * m_inv_rhs + bias));
    let theta = state.eta().y;
    Ok(EndEffectorForce {
        exact: lambda,
        quasi_static_x: -u.thrust * theta.sin(),
    })
}

/// Constrained-chart disturbance corresponding to a free-chart generalized
/// disturbance: `tau_e_r = E^T tau_e_q`.
pub fn project_disturbance(
    params: &ArmParams,
    state: &ConstrainedState,
    tau_e_q: &QVec,
) -> Result<RVec> {
    Ok(embedding_jacobian(params, state)?.transpose() * tau_e_q)
}

/// Input that holds a constrained state at rest (`rddot = 0`) for a given
/// thrust, solving the gravity balance for `tau_b` and `tau_gamma`.
pub fn perch_equilibrium_input(
    params: &ArmParams,
    state: &ConstrainedState,
    thrust: f64,
) -> Result<ControlInput> {
    let at_rest = ConstrainedState::new(state.r, RVec::zeros(), state.anchor);
    let terms = wire_pulling_terms(params, &at_rest)?;
    let att = attitude_kin(&at_rest.eta(), &at_rest.eta_dot())?;
    let j_t_eta: Vec3 = terms.j_u.fixed_view::<1, 3>(0, 0).transpose();
    let j_t_gamma: Gamma = terms.j_u.fixed_view::<1, 2>(0, 3).transpose();
    let k_eta: Vec3 = terms.k.fixed_rows::<3>(0).into();
    let k_gamma: Gamma = terms.k.fixed_rows::<2>(3).into();
    let q_inv_t = att
        .q_mat
        .transpose()
        .try_inverse()
        .ok_or(Error::GimbalLock {
            theta: at_rest.eta().y,
            margin: crate::spatial::GIMBAL_MARGIN,
        })?;
    let tau_b = q_inv_t * (k_eta - j_t_eta * thrust);
    let tau_gamma = k_gamma - j_t_gamma * thrust;
    Ok(ControlInput::new(thrust, tau_b, tau_gamma))
}

/// Input that holds a level free-flight state (eta = 0, at rest) in hover.
pub fn hover_equilibrium_input(params: &ArmParams, state: &FreeState) -> Result<ControlInput> {
    let at_rest = FreeState::new(state.q, QVec::zeros());
    let terms = free_flight_terms(params, &at_rest)?;
    let k_eta: Vec3 = terms.k.fixed_rows::<3>(3).into();
    let k_gamma: Gamma = terms.k.fixed_rows::<2>(6).into();
    let att = attitude_kin(&at_rest.eta(), &Vec3::zeros())?;
    let q_inv_t = att
        .q_mat
        .transpose()
        .try_inverse()
        .ok_or(Error::GimbalLock {
            theta: at_rest.eta().y,
            margin: crate::spatial::GIMBAL_MARGIN,
        })?;
    Ok(ControlInput::new(
        params.total_mass() * params.g,
        q_inv_t * k_eta,
        k_gamma,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> ArmParams {
        ArmParams::default()
    }

    fn random_constrained(seed: u64) -> ConstrainedState {
        // Small deterministic pseudo-random state inside the envelope.
        let f = |k: u64| {
            let x = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(k.wrapping_mul(1442695040888963407)) as f64
                / u64::MAX as f64;
            2.0 * x - 1.0
        };
        ConstrainedState::from_parts(
            Vec3::new(0.5 * f(1), 0.5 * f(2), 0.8 * f(3)),
            Gamma::new(0.8 * f(4), 0.8 * f(5)),
            Vec3::new(f(6), f(7), f(8)),
            Gamma::new(f(9), f(10)),
            Vec3::new(f(11), f(12), 1.0 + 0.2 * f(13)),
        )
    }

    #[test]
    fn mass_matrices_symmetric_positive_definite() {
        let p = params();
        for seed in 0..20 {
            let st = random_constrained(seed);
            let terms = wire_pulling_terms(&p, &st).unwrap();
            assert!((terms.m - terms.m.transpose()).norm() < 1e-12);
            assert!(terms.min_eig() > 1e-6, "min eig {}", terms.min_eig());

            let free = embed(&p, &st).unwrap();
            let ft = free_flight_terms(&p, &free).unwrap();
            assert!((ft.m - ft.m.transpose()).norm() < 1e-12);
            assert!(ft.min_eig() > 1e-6);
        }
    }

    #[test]
    fn free_body_at_rest_zero_gravity_stays_at_rest() {
        let mut p = params();
        p.g = 0.0;
        let st = FreeState::new(
            QVec::from_column_slice(&[0.1, 0.2, 1.0, 0.3, -0.2, 0.5, 0.4, -0.6]),
            QVec::zeros(),
        );
        let acc = free_flight_flow(&p, &st, &ControlInput::zero(), &QVec::zeros()).unwrap();
        assert!(acc.amax() < 1e-12);
    }

    #[test]
    fn hover_equilibrium_gives_zero_acceleration() {
        let p = params();
        let mut q = QVec::zeros();
        q[2] = 1.0;
        let st = FreeState::new(q, QVec::zeros());
        let u = hover_equilibrium_input(&p, &st).unwrap();
        assert_relative_eq!(u.thrust, p.total_mass() * p.g, epsilon = 1e-12);
        let acc = free_flight_flow(&p, &st, &u, &QVec::zeros()).unwrap();
        assert!(acc.amax() < 1e-10, "acc {}", acc.amax());
    }

    #[test]
    fn hover_equilibrium_with_bent_arm() {
        let p = params();
        let mut q = QVec::zeros();
        q[2] = 1.0;
        q[6] = 0.7;
        q[7] = -0.4;
        let st = FreeState::new(q, QVec::zeros());
        let u = hover_equilibrium_input(&p, &st).unwrap();
        let acc = free_flight_flow(&p, &st, &u, &QVec::zeros()).unwrap();
        assert!(acc.amax() < 1e-10, "acc {}", acc.amax());
    }

    #[test]
    fn perch_equilibrium_gives_zero_acceleration() {
        let p = params();
        for (theta, g1) in [(0.0, 0.0), (-0.25, 0.3), (0.2, -0.5)] {
            let st = ConstrainedState::from_parts(
                Vec3::new(0.0, theta, 0.0),
                Gamma::new(g1, 0.1),
                Vec3::zeros(),
                Gamma::zeros(),
                Vec3::new(0.0, 0.0, 1.0),
            );
            let u = perch_equilibrium_input(&p, &st, 20.0).unwrap();
            let acc = wire_pulling_flow(&p, &st, &u, &RVec::zeros()).unwrap();
            assert!(acc.amax() < 1e-9, "acc {}", acc.amax());
        }
    }

    #[test]
    fn flow_is_affine_in_input() {
        let p = params();
        let st = random_constrained(7);
        let u0 = ControlInput::new(12.0, Vec3::new(0.3, -0.2, 0.1), Gamma::new(0.05, -0.02));
        let terms = wire_pulling_terms(&p, &st).unwrap();
        let a0 = terms.accel(&u0, &RVec::zeros()).unwrap();
        let mut u1 = u0;
        u1.tau_b.y += 0.5;
        let a1 = terms.accel(&u1, &RVec::zeros()).unwrap();
        // Difference must equal M^-1 J_u^T delta exactly.
        let du = u1.to_vec6() - u0.to_vec6();
        let expected = terms.solve(&(terms.j_u.transpose() * du)).unwrap();
        assert_relative_eq!(a1 - a0, expected, epsilon = 1e-12);
    }

    #[test]
    fn disturbance_enters_affinely() {
        let p = params();
        let st = random_constrained(3);
        let u = ControlInput::new(15.0, Vec3::zeros(), Gamma::zeros());
        let a0 = wire_pulling_flow(&p, &st, &u, &RVec::zeros()).unwrap();
        let mut tau = RVec::zeros();
        tau[0] = 0.25;
        let a1 = wire_pulling_flow(&p, &st, &u, &tau).unwrap();
        let terms = wire_pulling_terms(&p, &st).unwrap();
        let expected = terms.solve(&tau).unwrap();
        assert_relative_eq!(a1 - a0, expected, epsilon = 1e-12);
    }

    #[test]
    fn attitude_submodel_consistent_with_full_flow() {
        let p = params();
        for seed in 0..10 {
            let st = random_constrained(seed);
            let u = ControlInput::new(
                18.0,
                Vec3::new(0.4, -0.3, 0.2),
                Gamma::new(0.1, -0.05),
            );
            let mut tau_e = RVec::zeros();
            tau_e[1] = 0.2;
            tau_e[3] = -0.1;
            let full = wire_pulling_flow(&p, &st, &u, &tau_e).unwrap();
            let gamma_ddot: Gamma = full.fixed_rows::<2>(3).into();
            let (f_eta, g_eta) = attitude_submodel(&p, &st, u.thrust, &gamma_ddot, &tau_e).unwrap();
            let eta_ddot = f_eta + g_eta * u.tau_b;
            let full_eta: Vec3 = full.fixed_rows::<3>(0).into();
            assert!(
                (eta_ddot - full_eta).norm() < 1e-9,
                "submodel mismatch {}",
                (eta_ddot - full_eta).norm()
            );
        }
    }

    #[test]
    fn attitude_submodel_zero_input_is_f_eta() {
        let p = params();
        let st = random_constrained(5);
        let (f_eta, _) = attitude_submodel(&p, &st, 10.0, &Gamma::zeros(), &RVec::zeros()).unwrap();
        let (f_eta2, g_eta) =
            attitude_submodel(&p, &st, 10.0, &Gamma::zeros(), &RVec::zeros()).unwrap();
        let eta_ddot = f_eta2 + g_eta * Vec3::zeros();
        assert_relative_eq!(eta_ddot, f_eta, epsilon = 0.0);
    }

    #[test]
    fn nominal_model_matches_actual_when_parameters_match() {
        let p = params();
        for seed in 0..10 {
            let st = random_constrained(seed + 100);
            let gdd = Gamma::new(0.3, -0.2);
            let (f, _) = attitude_submodel(&p, &st, 16.0, &gdd, &RVec::zeros()).unwrap();
            let (f_bar, _) = nominal_attitude_model(
                &p,
                &p.j_bar_b_mat(),
                &st,
                16.0,
                &gdd,
                NominalInputModel::BodyInertia,
            )
            .unwrap();
            assert!((f - f_bar).norm() < 1e-9);
        }
    }

    #[test]
    fn nominal_input_matrix_at_level_attitude() {
        let p = params();
        let st = ConstrainedState::from_parts(
            Vec3::zeros(),
            Gamma::new(0.2, 0.1),
            Vec3::zeros(),
            Gamma::zeros(),
            Vec3::zeros(),
        );
        let (_, g_bar) = nominal_attitude_model(
            &p,
            &p.j_bar_b_mat(),
            &st,
            10.0,
            &Gamma::zeros(),
            NominalInputModel::BodyInertia,
        )
        .unwrap();
        let expected = p.j_bar_b_mat().try_inverse().unwrap();
        assert_relative_eq!(g_bar, expected, epsilon = 1e-14);
    }

    #[test]
    fn quasi_static_force_at_level_attitude_is_zero() {
        let p = params();
        let st = ConstrainedState::from_parts(
            Vec3::zeros(),
            Gamma::zeros(),
            Vec3::zeros(),
            Gamma::zeros(),
            Vec3::new(0.0, 0.0, 1.0),
        );
        let u = perch_equilibrium_input(&p, &st, 20.0).unwrap();
        let fe = end_effector_force(&p, &st, &u, &QVec::zeros()).unwrap();
        assert_eq!(fe.quasi_static_x, 0.0);
        // At theta = 0 the exact pulling component vanishes too.
        assert!(fe.exact.x.abs() < 1e-9);
    }

    #[test]
    fn pulling_force_example_value() {
        // T = 20 N at theta = -14.4 deg: quasi-static force 4.973 N.
        let theta = -14.4_f64.to_radians();
        let p = params();
        let st = ConstrainedState::from_parts(
            Vec3::new(0.0, theta, 0.0),
            Gamma::zeros(),
            Vec3::zeros(),
            Gamma::zeros(),
            Vec3::new(0.0, 0.0, 1.0),
        );
        let u = perch_equilibrium_input(&p, &st, 20.0).unwrap();
        let fe = end_effector_force(&p, &st, &u, &QVec::zeros()).unwrap();
        assert_relative_eq!(fe.quasi_static_x, 4.973, epsilon = 1e-3);
    }

    #[test]
    fn exact_force_close_to_quasi_static_at_equilibrium() {
        let p = params();
        for theta_deg in [-5.0, -10.0, -14.4, -20.0] {
            let theta = (theta_deg as f64).to_radians();
            let st = ConstrainedState::from_parts(
                Vec3::new(0.0, theta, 0.0),
                Gamma::zeros(),
                Vec3::zeros(),
                Gamma::zeros(),
                Vec3::new(0.0, 0.0, 1.0),
            );
            let thrust = 26.0;
            let u = perch_equilibrium_input(&p, &st, thrust).unwrap();
            let fe = end_effector_force(&p, &st, &u, &QVec::zeros()).unwrap();
            assert!(
                (fe.exact.x - fe.quasi_static_x).abs() < 0.05 * thrust,
                "theta {theta_deg}: exact {} vs quasi {}",
                fe.exact.x,
                fe.quasi_static_x
            );
        }
    }
}
