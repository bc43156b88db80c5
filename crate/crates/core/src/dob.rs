//! Disturbance-observer attitude control: the saturation function, the
//! per-axis second-order filter bank, and the computed-torque nominal law
//! the observer wraps.
//!
//! Per axis `i` the filters are
//!
//! ```text
//! qdot_i = A_i q_i + B_i eta_i        A_i = [0, 1; -a0/eps^2, -a1/eps]
//! pdot_i = A_i p_i + B_i tau_b2_i     B_i = [0; a0/eps^2]
//! ```
//!
//! with `u_i = p_{i,1} - sum_j Lambda_{ij} (qdot_{j,2} - fbar_j)`,
//! `tau_b2 = Lambda Gbar tau_b0 + Pi(u)` and
//! `tau_b = tau_b0 + (Lambda Gbar)^-1 Pi(u)`.

use crate::spatial::euler_rate_matrix;
use crate::{Error, Mat3, Result, Vec3};
use nalgebra::SVector;
use serde::{Deserialize, Serialize};

/// Filter coefficients and the saturation design bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DobParams {
    /// Per-axis `a_{i,0}` (must be positive).
    pub a0: [f64; 3],
    /// Per-axis `a_{i,1}` (must be positive).
    pub a1: [f64; 3],
    /// Observer time-scale; smaller is faster.
    pub eps: f64,
    /// Componentwise saturation bound of `Pi`.
    pub s_max: [f64; 3],
}

impl Default for DobParams {
    fn default() -> Self {
        Self {
            a0: [4.0; 3],
            a1: [4.0; 3],
            eps: 0.02,
            s_max: [50.0; 3],
        }
    }
}

impl DobParams {
    pub fn validate(&self) -> Result<()> {
        if self.a0.iter().chain(self.a1.iter()).any(|&a| a <= 0.0) {
            return Err(Error::InvalidConfig(
                "DOB filter coefficients must be positive".into(),
            ));
        }
        if self.eps <= 0.0 {
            return Err(Error::InvalidConfig("eps must be positive".into()));
        }
        if self.s_max.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidConfig("s_max must be positive".into()));
        }
        Ok(())
    }
}

/// Smooth componentwise saturation: identity on `|u| <= 0.9 s`, then a C1
/// tanh blend toward the asymptote `s`. The derivative never exceeds one.
pub fn saturation_pi(u: &Vec3, s_max: &[f64; 3]) -> Vec3 {
    let mut out = Vec3::zeros();
    for i in 0..3 {
        let s = s_max[i];
        let knee = 0.9 * s;
        let x = u[i];
        out[i] = if x.abs() <= knee {
            x
        } else {
            let span = s - knee;
            x.signum() * (knee + span * ((x.abs() - knee) / span).tanh())
        };
    }
    out
}

/// State-dependent observer gain `Lambda = j_bar^(1/2) Q`.
pub fn lambda_eta(j_bar_sqrt: &Mat3, eta: &Vec3) -> Result<Mat3> {
    let q = euler_rate_matrix(crate::spatial::EulerAngles::from(*eta))?;
    Ok(j_bar_sqrt * q)
}

/// Attitude PD gains of the computed-torque law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttitudeGains {
    pub kp: [f64; 3],
    pub kd: [f64; 3],
}

impl Default for AttitudeGains {
    fn default() -> Self {
        Self {
            kp: [144.0; 3],
            kd: [24.0; 3],
        }
    }
}

/// Computed torque on the nominal model:
/// `tau_b0 = gbar^-1 (eta_d_ddot - Kd (eta_dot - eta_d_dot) - Kp (eta - eta_d) - fbar)`.
#[allow(clippy::too_many_arguments)]
pub fn nominal_attitude_control(
    eta: &Vec3,
    eta_dot: &Vec3,
    eta_d: &Vec3,
    eta_d_dot: &Vec3,
    eta_d_ddot: &Vec3,
    f_bar: &Vec3,
    g_bar: &Mat3,
    gains: &AttitudeGains,
) -> Result<Vec3> {
    let g_inv = g_bar.try_inverse().ok_or_else(|| Error::NonInvertible {
        context: "nominal input matrix".into(),
    })?;
    let kp = Mat3::from_diagonal(&Vec3::from_column_slice(&gains.kp));
    let kd = Mat3::from_diagonal(&Vec3::from_column_slice(&gains.kd));
    let v = eta_d_ddot - kd * (eta_dot - eta_d_dot) - kp * (eta - eta_d) - f_bar;
    Ok(g_inv * v)
}

/// Filter bank state: per-axis pairs packed as `[x_{1,1}, x_{1,2}, ...]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DobState {
    pub q: SVector<f64, 6>,
    pub p: SVector<f64, 6>,
}

/// Instantaneous controller outputs derived from the filter state.
#[derive(Debug, Clone, Copy)]
pub struct DobOutput {
    pub u: Vec3,
    pub pi_u: Vec3,
    pub tau_b1: Vec3,
    pub tau_b2: Vec3,
    pub tau_b: Vec3,
}

impl DobOutput {
    pub fn zero() -> Self {
        Self {
            u: Vec3::zeros(),
            pi_u: Vec3::zeros(),
            tau_b1: Vec3::zeros(),
            tau_b2: Vec3::zeros(),
            tau_b: Vec3::zeros(),
        }
    }
}

impl DobState {
    pub fn zero() -> Self {
        Self {
            q: SVector::zeros(),
            p: SVector::zeros(),
        }
    }

    /// Bumpless initialization: the measurement filter starts matched to
    /// `(eta, eta_dot)` so its output derivative vanishes, and the input
    /// filter starts so that `u = 0`.
    pub fn bumpless(
        params: &DobParams,
        eta: &Vec3,
        eta_dot: &Vec3,
        f_bar: &Vec3,
        lambda: &Mat3,
    ) -> Self {
        let mut q = SVector::<f64, 6>::zeros();
        for i in 0..3 {
            q[2 * i] = eta[i] - params.eps * (params.a1[i] / params.a0[i]) * eta_dot[i];
            q[2 * i + 1] = eta_dot[i];
        }
        let mut state = Self {
            q,
            p: SVector::zeros(),
        };
        let qd2 = state.q_dot_2(params, eta);
        let p1 = lambda * (qd2 - f_bar);
        for i in 0..3 {
            state.p[2 * i] = p1[i];
        }
        state
    }

    /// Algebraic `qdot_{i,2}` for the current state and measurement.
    pub fn q_dot_2(&self, params: &DobParams, eta: &Vec3) -> Vec3 {
        let mut out = Vec3::zeros();
        let e2 = params.eps * params.eps;
        for i in 0..3 {
            out[i] = -(params.a0[i] / e2) * self.q[2 * i]
                - (params.a1[i] / params.eps) * self.q[2 * i + 1]
                + (params.a0[i] / e2) * eta[i];
        }
        out
    }

    /// Algebraic `qddot_{i,2}` given the measurement rate.
    pub fn q_ddot_2(&self, params: &DobParams, eta: &Vec3, eta_dot: &Vec3) -> Vec3 {
        let qd2 = self.q_dot_2(params, eta);
        let mut out = Vec3::zeros();
        let e2 = params.eps * params.eps;
        for i in 0..3 {
            let qd1 = self.q[2 * i + 1];
            out[i] = -(params.a0[i] / e2) * qd1 - (params.a1[i] / params.eps) * qd2[i]
                + (params.a0[i] / e2) * eta_dot[i];
        }
        out
    }

    /// First components `p_{i,1}` of the input filter.
    pub fn p_1(&self) -> Vec3 {
        Vec3::new(self.p[0], self.p[2], self.p[4])
    }

    /// Derivatives `pdot_{i,1} = p_{i,2}`.
    pub fn p_dot_1(&self) -> Vec3 {
        Vec3::new(self.p[1], self.p[3], self.p[5])
    }

    /// Controller outputs for the current filter state.
    pub fn output(
        &self,
        params: &DobParams,
        eta: &Vec3,
        f_bar: &Vec3,
        g_bar: &Mat3,
        lambda: &Mat3,
        tau_b0: &Vec3,
    ) -> Result<DobOutput> {
        let qd2 = self.q_dot_2(params, eta);
        let u = self.p_1() - lambda * (qd2 - f_bar);
        let pi_u = saturation_pi(&u, &params.s_max);
        let lg = lambda * g_bar;
        let lg_inv = lg.try_inverse().ok_or_else(|| Error::NonInvertible {
            context: "lambda * gbar".into(),
        })?;
        let tau_b1 = lg * tau_b0;
        Ok(DobOutput {
            u,
            pi_u,
            tau_b1,
            tau_b2: tau_b1 + pi_u,
            tau_b: tau_b0 + lg_inv * pi_u,
        })
    }

    fn derivative(
        &self,
        params: &DobParams,
        eta: &Vec3,
        tau_b2: &Vec3,
    ) -> (SVector<f64, 6>, SVector<f64, 6>) {
        let e2 = params.eps * params.eps;
        let mut dq = SVector::<f64, 6>::zeros();
        let mut dp = SVector::<f64, 6>::zeros();
        for i in 0..3 {
            let (a0, a1) = (params.a0[i], params.a1[i]);
            dq[2 * i] = self.q[2 * i + 1];
            dq[2 * i + 1] = -(a0 / e2) * self.q[2 * i] - (a1 / params.eps) * self.q[2 * i + 1]
                + (a0 / e2) * eta[i];
            dp[2 * i] = self.p[2 * i + 1];
            dp[2 * i + 1] = -(a0 / e2) * self.p[2 * i] - (a1 / params.eps) * self.p[2 * i + 1]
                + (a0 / e2) * tau_b2[i];
        }
        (dq, dp)
    }

    /// Advances the filters over `dt` with held inputs (RK4).
    pub fn advance(&mut self, params: &DobParams, dt: f64, eta: &Vec3, tau_b2: &Vec3) {
        let step = |s: &DobState| s.derivative(params, eta, tau_b2);
        let (k1q, k1p) = step(self);
        let s2 = DobState {
            q: self.q + k1q * (dt / 2.0),
            p: self.p + k1p * (dt / 2.0),
        };
        let (k2q, k2p) = step(&s2);
        let s3 = DobState {
            q: self.q + k2q * (dt / 2.0),
            p: self.p + k2p * (dt / 2.0),
        };
        let (k3q, k3p) = step(&s3);
        let s4 = DobState {
            q: self.q + k3q * dt,
            p: self.p + k3p * dt,
        };
        let (k4q, k4p) = step(&s4);
        self.q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0);
        self.p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
    }
}

/// One discrete controller step: outputs from the current filter state, then
/// the filters advance with the measurement and `tau_b2` held over `dt`.
#[allow(clippy::too_many_arguments)]
pub fn dob_step(
    state: &mut DobState,
    params: &DobParams,
    dt: f64,
    eta: &Vec3,
    f_bar: &Vec3,
    g_bar: &Mat3,
    lambda: &Mat3,
    tau_b0: &Vec3,
) -> Result<DobOutput> {
    let out = state.output(params, eta, f_bar, g_bar, lambda, tau_b0)?;
    state.advance(params, dt, eta, &out.tau_b2);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn saturation_identity_region() {
        let s = [2.0, 3.0, 1.0];
        let u = Vec3::new(1.5, -2.6, 0.89);
        assert_eq!(saturation_pi(&u, &s), u);
        assert_eq!(saturation_pi(&Vec3::zeros(), &s), Vec3::zeros());
    }

    #[test]
    fn saturation_globally_bounded() {
        // mathematically |pi| < s; in floats tanh rounds to 1, so allow equality
        let s = [2.0, 3.0, 1.0];
        for mag in [1.0, 5.0, 50.0, 1e6] {
            let v = saturation_pi(&Vec3::new(mag, -mag, mag), &s);
            assert!(v.x <= s[0] && v.y >= -s[1] && v.z <= s[2]);
        }
    }

    #[test]
    fn saturation_jacobian_norm_at_most_one() {
        let s = [2.0, 3.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for _ in 0..1000 {
            let u = Vec3::new(
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
            );
            for i in 0..3 {
                let mut up = u;
                let mut um = u;
                up[i] += h;
                um[i] -= h;
                let d = (saturation_pi(&up, &s) - saturation_pi(&um, &s)) / (2.0 * h);
                // diagonal map: each partial is the only nonzero entry
                assert!(d[i].abs() <= 1.0 + 1e-6, "slope {}", d[i]);
            }
        }
    }

    #[test]
    fn lambda_at_level_attitude_is_inertia_sqrt() {
        let j = Mat3::from_diagonal(&Vec3::new(0.13, 0.15, 0.16));
        let l = lambda_eta(&j, &Vec3::zeros()).unwrap();
        assert_relative_eq!(l, j, epsilon = 1e-15);
    }

    #[test]
    fn bumpless_start_has_zero_u() {
        let params = DobParams::default();
        let eta = Vec3::new(0.1, -0.2, 0.3);
        let eta_dot = Vec3::new(0.5, 0.2, -0.4);
        let f_bar = Vec3::new(1.0, -2.0, 0.5);
        let lambda = Mat3::from_diagonal(&Vec3::new(0.1, 0.2, 0.15));
        let st = DobState::bumpless(&params, &eta, &eta_dot, &f_bar, &lambda);
        assert!(st.q_dot_2(&params, &eta).amax() < 1e-12);
        let g_bar = Mat3::identity();
        let out = st
            .output(&params, &eta, &f_bar, &g_bar, &lambda, &Vec3::zeros())
            .unwrap();
        assert!(out.u.amax() < 1e-12);
    }

    #[test]
    fn internal_consistency_tau_b2_minus_tau_b1() {
        let params = DobParams::default();
        let mut st = DobState::zero();
        st.q[0] = 0.01;
        st.p[2] = -0.4;
        let eta = Vec3::new(0.05, 0.02, -0.07);
        let f_bar = Vec3::new(0.3, -0.1, 0.2);
        let g_bar = Mat3::from_diagonal(&Vec3::new(50.0, 45.0, 30.0));
        let lambda = Mat3::from_diagonal(&Vec3::new(0.13, 0.13, 0.16));
        let out = st
            .output(
                &params,
                &eta,
                &f_bar,
                &g_bar,
                &lambda,
                &Vec3::new(0.2, -0.3, 0.1),
            )
            .unwrap();
        assert_relative_eq!(out.tau_b2 - out.tau_b1, out.pi_u, epsilon = 1e-14);
    }

    /// The plant equals the nominal model: the saturated compensation decays
    /// and `tau_b` converges to `tau_b0`.
    #[test]
    fn matched_plant_compensation_decays() {
        let params = DobParams {
            eps: 0.01,
            ..DobParams::default()
        };
        let j_bar = Vec3::new(0.0168, 0.0176, 0.0264);
        let g_bar = Mat3::from_diagonal(&Vec3::new(1.0 / j_bar.x, 1.0 / j_bar.y, 1.0 / j_bar.z));
        let lambda =
            Mat3::from_diagonal(&Vec3::new(j_bar.x.sqrt(), j_bar.y.sqrt(), j_bar.z.sqrt()));
        let gains = AttitudeGains::default();
        let f_of = |eta: &Vec3, _eta_dot: &Vec3| Vec3::new(-2.0 * eta.x, 1.5 * eta.y, 0.3);
        // Plant starts at rest on the reference; the filters start from zero
        // (a deliberate perturbation) and must settle on their own.
        let mut eta = Vec3::zeros();
        let mut eta_dot = Vec3::zeros();
        let mut dob = DobState::zero();
        let dt = params.eps / 50.0;
        let mut last = DobOutput::zero();
        let mut last_tau_b0 = Vec3::zeros();
        let steps = (2.0 / dt) as usize;
        for _ in 0..steps {
            let f_bar = f_of(&eta, &eta_dot);
            let tau_b0 = nominal_attitude_control(
                &eta,
                &eta_dot,
                &Vec3::zeros(),
                &Vec3::zeros(),
                &Vec3::zeros(),
                &f_bar,
                &g_bar,
                &gains,
            )
            .unwrap();
            last = dob_step(
                &mut dob, &params, dt, &eta, &f_bar, &g_bar, &lambda, &tau_b0,
            )
            .unwrap();
            last_tau_b0 = tau_b0;
            // plant IS the nominal model
            let acc = f_bar + g_bar * last.tau_b;
            eta += eta_dot * dt + acc * (0.5 * dt * dt);
            eta_dot += acc * dt;
        }
        assert!(last.pi_u.amax() < 1e-6, "pi_u {}", last.pi_u.amax());
        assert!(
            (last.tau_b - last_tau_b0).amax() < 1e-6,
            "tau_b gap {}",
            (last.tau_b - last_tau_b0).amax()
        );
    }

    /// Constant input disturbance: after settling the compensation cancels
    /// it through the nominal input matrix within 2 percent.
    #[test]
    fn constant_disturbance_rejected() {
        let params = DobParams {
            eps: 0.01,
            s_max: [100.0; 3],
            ..DobParams::default()
        };
        let j_bar = Vec3::new(0.0168, 0.0176, 0.0264);
        let g_bar = Mat3::from_diagonal(&Vec3::new(1.0 / j_bar.x, 1.0 / j_bar.y, 1.0 / j_bar.z));
        let lambda =
            Mat3::from_diagonal(&Vec3::new(j_bar.x.sqrt(), j_bar.y.sqrt(), j_bar.z.sqrt()));
        let gains = AttitudeGains::default();
        let d = Vec3::new(4.0, -6.0, 2.5); // rad/s^2 equivalent disturbance
        let mut eta = Vec3::zeros();
        let mut eta_dot = Vec3::zeros();
        let mut dob = DobState::bumpless(&params, &eta, &eta_dot, &Vec3::zeros(), &lambda);
        let dt = params.eps / 20.0;
        let mut comp = Vec3::zeros();
        for _ in 0..((2.0 / dt) as usize) {
            let f_bar = Vec3::zeros();
            let tau_b0 = nominal_attitude_control(
                &eta,
                &eta_dot,
                &Vec3::zeros(),
                &Vec3::zeros(),
                &Vec3::zeros(),
                &f_bar,
                &g_bar,
                &gains,
            )
            .unwrap();
            let out = dob_step(
                &mut dob, &params, dt, &eta, &f_bar, &g_bar, &lambda, &tau_b0,
            )
            .unwrap();
            comp = g_bar * (out.tau_b - tau_b0);
            let acc = f_bar + g_bar * out.tau_b + d;
            eta += eta_dot * dt + acc * (0.5 * dt * dt);
            eta_dot += acc * dt;
        }
        // steady compensation approximately -d
        let err = (comp + d).norm() / d.norm();
        assert!(err < 0.02, "rejection error {err}");
    }
}
