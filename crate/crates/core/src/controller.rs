//! Mode controllers.
//!
//! Wire-pulling: computed torque on the nominal constrained attitude model,
//! wrapped by the attitude DOB; thrust from an altitude PD with gravity
//! feedforward projected through the tilt.
//!
//! Stabilizing / free-flight: cascaded control. The outer position loop
//! produces an acceleration command (wrapped by a per-axis DOB of the same
//! filter structure), the thrust and tilt commands are extracted from it,
//! and the inner attitude loop is a computed torque on the free-flight
//! nominal attitude model wrapped by the attitude DOB. In the stabilizing
//! mode the tilt commands come from the recovery reference instead and only
//! the altitude channel of the position loop is used.

use crate::dob::{
    lambda_eta, nominal_attitude_control, AttitudeGains, DobOutput, DobParams, DobState,
};
use crate::dynamics::{nominal_attitude_model, NominalInputModel};
use crate::kinematics::{ConstrainedState, FreeState, Gamma};
use crate::params::ArmParams;
use crate::spatial::{euler_rate_matrix, euler_rate_matrix_dot, EulerAngles};
use crate::trajectory::Reference;
use crate::{Error, Mat3, Result, Vec3};
use serde::{Deserialize, Serialize};

/// Outer-loop position gains (per-axis diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionGains {
    pub kp: [f64; 3],
    pub kd: [f64; 3],
    pub ki: [f64; 3],
}

impl Default for PositionGains {
    fn default() -> Self {
        Self {
            kp: [4.0; 3],
            kd: [4.0; 3],
            ki: [0.0; 3],
        }
    }
}

/// Actuation limits and command clamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLimits {
    /// Componentwise body-moment limit (N m).
    pub moment_max: f64,
    /// Tilt-command clamp for the position loop (rad).
    pub attitude_cmd_max: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        Self {
            moment_max: 4.0,
            attitude_cmd_max: 25.0_f64.to_radians(),
        }
    }
}

/// Everything the controllers need to know; plant truth stays outside.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub attitude_gains: AttitudeGains,
    pub position_gains: PositionGains,
    pub limits: ControlLimits,
    pub dob: DobParams,
    /// Position-channel DOB time scale (filters share `dob.a0/a1`).
    pub pos_dob_eps: f64,
    pub pos_dob_s_max: [f64; 3],
    pub nominal_input: NominalInputModel,
    /// When false the saturation output is forced to zero everywhere
    /// (nominal-only baseline).
    pub dob_enabled: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            attitude_gains: AttitudeGains::default(),
            position_gains: PositionGains::default(),
            limits: ControlLimits::default(),
            dob: DobParams::default(),
            pos_dob_eps: 0.25,
            pos_dob_s_max: [20.0; 3],
            nominal_input: NominalInputModel::BodyInertia,
            dob_enabled: true,
        }
    }
}

/// One controller evaluation: the wrench to apply plus diagnostics, and the
/// held filter inputs consumed by the advance phase.
#[derive(Debug, Clone)]
pub struct ControlDecision {
    pub thrust: f64,
    pub tau_b: Vec3,
    pub tau_b0: Vec3,
    pub dob: DobOutput,
    pub f_bar: Vec3,
    pub g_bar: Mat3,
    pub lambda: Mat3,
    pub thrust_saturated: bool,
    pub moment_saturated: bool,
    eta_held: Vec3,
    tau_b2_held: Vec3,
    pos_held: Option<(Vec3, Vec3)>,
}

/// Controller with its observer state; one instance per simulation run.
#[derive(Debug, Clone)]
pub struct Controller {
    pub cfg: ControllerConfig,
    pub nominal: ArmParams,
    pub j_bar: Mat3,
    pub j_bar_sqrt: Mat3,
    att_dob: DobState,
    pos_dob: DobState,
    pos_dob_params: DobParams,
    pos_integral: Vec3,
}

impl Controller {
    pub fn new(cfg: ControllerConfig, nominal: ArmParams, j_bar_diag: [f64; 3]) -> Self {
        let j_bar = Mat3::from_diagonal(&Vec3::from_column_slice(&j_bar_diag));
        let j_bar_sqrt = Mat3::from_diagonal(&Vec3::new(
            j_bar_diag[0].sqrt(),
            j_bar_diag[1].sqrt(),
            j_bar_diag[2].sqrt(),
        ));
        let pos_dob_params = DobParams {
            a0: cfg.dob.a0,
            a1: cfg.dob.a1,
            eps: cfg.pos_dob_eps,
            s_max: cfg.pos_dob_s_max,
        };
        Self {
            cfg,
            nominal,
            j_bar,
            j_bar_sqrt,
            att_dob: DobState::zero(),
            pos_dob: DobState::zero(),
            pos_dob_params,
            pos_integral: Vec3::zeros(),
        }
    }

    pub fn att_dob_state(&self) -> &DobState {
        &self.att_dob
    }

    pub fn att_dob_state_mut(&mut self) -> &mut DobState {
        &mut self.att_dob
    }

    pub fn dob_params(&self) -> &DobParams {
        &self.cfg.dob
    }

    /// Observer gain at the current attitude.
    pub fn lambda(&self, eta: &Vec3) -> Result<Mat3> {
        lambda_eta(&self.j_bar_sqrt, eta)
    }

    /// Bumpless observer start on the wire-pulling nominal model.
    pub fn enter_wp(
        &mut self,
        state: &ConstrainedState,
        thrust: f64,
        gamma_ddot_est: &Gamma,
    ) -> Result<()> {
        let (f_bar, _) = nominal_attitude_model(
            &self.nominal,
            &self.j_bar,
            state,
            thrust,
            gamma_ddot_est,
            self.cfg.nominal_input,
        )?;
        let lambda = self.lambda(&state.eta())?;
        self.att_dob =
            DobState::bumpless(&self.cfg.dob, &state.eta(), &state.eta_dot(), &f_bar, &lambda);
        self.pos_integral = Vec3::zeros();
        Ok(())
    }

    /// Observer re-initialization at the jump into the stabilizing mode:
    /// the plant model changed, so the filters restart bumplessly on the
    /// free-flight nominal model.
    pub fn enter_st(&mut self, state: &FreeState) -> Result<()> {
        let eta = state.eta();
        let eta_dot = state.eta_dot();
        let (f_bar, _) = self.free_nominal_attitude(&eta, &eta_dot)?;
        let lambda = self.lambda(&eta)?;
        self.att_dob = DobState::bumpless(&self.cfg.dob, &eta, &eta_dot, &f_bar, &lambda);
        let p = state.position();
        let v = state.velocity();
        self.pos_dob = DobState::bumpless(
            &self.pos_dob_params,
            &p,
            &v,
            &Vec3::zeros(),
            &Mat3::identity(),
        );
        self.pos_integral = Vec3::zeros();
        Ok(())
    }

    /// Free-flight nominal attitude model from the rigid-body inertia:
    /// `etaddot = fbar + gbar tau_b` with `gbar = Q^-1 j_bar^-1`.
    pub fn free_nominal_attitude(&self, eta: &Vec3, eta_dot: &Vec3) -> Result<(Vec3, Mat3)> {
        let e = EulerAngles::from(*eta);
        let q = euler_rate_matrix(e)?;
        let q_dot = euler_rate_matrix_dot(e, eta_dot)?;
        let q_inv = q.try_inverse().ok_or(Error::GimbalLock {
            theta: eta.y,
            margin: crate::spatial::GIMBAL_MARGIN,
        })?;
        let j_inv = self.j_bar.try_inverse().unwrap();
        let omega = q * eta_dot;
        let f_bar = -q_inv * (j_inv * omega.cross(&(self.j_bar * omega)) + q_dot * eta_dot);
        let g_bar = q_inv * j_inv;
        Ok((f_bar, g_bar))
    }

    fn thrust_law(
        &self,
        pos_z: f64,
        vel_z: f64,
        pos_z_d: f64,
        az_extra: f64,
        eta: &Vec3,
        t_max: f64,
    ) -> (f64, bool) {
        let g = self.nominal.g;
        let kp = self.cfg.position_gains.kp[2];
        let kd = self.cfg.position_gains.kd[2];
        let az = kp * (pos_z_d - pos_z) - kd * vel_z + az_extra;
        let tilt = (eta.x.cos() * eta.y.cos()).max(0.3);
        let t = self.nominal.total_mass() * (g + az) / tilt;
        let clamped = t.clamp(0.0, t_max);
        (clamped, clamped != t)
    }

    fn wrap_attitude_dob(
        &mut self,
        eta: &Vec3,
        f_bar: &Vec3,
        g_bar: &Mat3,
        lambda: &Mat3,
        tau_b0: &Vec3,
    ) -> Result<(Vec3, DobOutput, Vec3)> {
        let mut out = self
            .att_dob
            .output(&self.cfg.dob, eta, f_bar, g_bar, lambda, tau_b0)?;
        if !self.cfg.dob_enabled {
            out.pi_u = Vec3::zeros();
            out.tau_b2 = out.tau_b1;
            out.tau_b = *tau_b0;
        }
        Ok((out.tau_b, out, out.tau_b2))
    }

    fn clamp_moment(&self, tau: Vec3) -> (Vec3, bool) {
        let m = self.cfg.limits.moment_max;
        let clamped = tau.map(|x| x.clamp(-m, m));
        (clamped, clamped != tau)
    }

    /// Wire-pulling control: `(T, tau_b)` for the constrained plant.
    /// `body_pos`/`body_vel` are the reconstructed multirotor position and
    /// velocity used by the altitude channel.
    pub fn wp_control(
        &mut self,
        state: &ConstrainedState,
        reference: &Reference,
        gamma_ddot_est: &Gamma,
        body_pos: &Vec3,
        body_vel: &Vec3,
        t_max: f64,
    ) -> Result<ControlDecision> {
        let eta = state.eta();
        let eta_dot = state.eta_dot();
        let (thrust, thrust_saturated) =
            self.thrust_law(body_pos.z, body_vel.z, reference.pos_d.z, 0.0, &eta, t_max);
        let (f_bar, g_bar) = nominal_attitude_model(
            &self.nominal,
            &self.j_bar,
            state,
            thrust,
            gamma_ddot_est,
            self.cfg.nominal_input,
        )?;
        let lambda = self.lambda(&eta)?;
        let tau_b0 = nominal_attitude_control(
            &eta,
            &eta_dot,
            &reference.eta_d,
            &reference.eta_d_dot,
            &reference.eta_d_ddot,
            &f_bar,
            &g_bar,
            &self.cfg.attitude_gains,
        )?;
        let (tau_b, dob, tau_b2) = self.wrap_attitude_dob(&eta, &f_bar, &g_bar, &lambda, &tau_b0)?;
        let (tau_b, moment_saturated) = self.clamp_moment(tau_b);
        Ok(ControlDecision {
            thrust,
            tau_b,
            tau_b0,
            dob,
            f_bar,
            g_bar,
            lambda,
            thrust_saturated,
            moment_saturated,
            eta_held: eta,
            tau_b2_held: tau_b2,
            pos_held: None,
        })
    }

    /// Stabilizing / free-flight control for the free-chart plant.
    /// With `st_tilt_from_reference` the tilt references come straight from
    /// `reference` (stabilizing mode); otherwise they are extracted from the
    /// position loop (free flight).
    pub fn st_ff_control(
        &mut self,
        state: &FreeState,
        reference: &Reference,
        st_tilt_from_reference: bool,
        dt: f64,
        t_max: f64,
    ) -> Result<ControlDecision> {
        let eta = state.eta();
        let eta_dot = state.eta_dot();
        let p = state.position();
        let v = state.velocity();
        let gains = self.cfg.position_gains.clone();

        // Outer loop acceleration command.
        let err = p - reference.pos_d;
        self.pos_integral += err * dt;
        let mut a_cmd = Vec3::zeros();
        for i in 0..3 {
            a_cmd[i] = -gains.kp[i] * err[i]
                - gains.kd[i] * (v[i] - reference.vel_d[i])
                - gains.ki[i] * self.pos_integral[i];
        }

        // Position-channel DOB: same filter structure with identity maps.
        let mut a_total = a_cmd;
        if self.cfg.dob_enabled {
            let pos_out = self.pos_dob.output(
                &self.pos_dob_params,
                &p,
                &Vec3::zeros(),
                &Mat3::identity(),
                &Mat3::identity(),
                &a_cmd,
            )?;
            a_total = a_cmd + pos_out.pi_u;
        }
        let pos_held = Some((p, a_total));

        let (thrust, thrust_saturated) =
            self.thrust_law(p.z, v.z, reference.pos_d.z, a_total.z, &eta, t_max);

        // Tilt extraction (or the recovery reference in the stabilizing mode).
        let (eta_d, eta_d_dot, eta_d_ddot) = if st_tilt_from_reference {
            (reference.eta_d, reference.eta_d_dot, reference.eta_d_ddot)
        } else {
            let g = self.nominal.g;
            let (s_psi, c_psi) = eta.z.sin_cos();
            let lim = self.cfg.limits.attitude_cmd_max;
            let theta_d = ((a_total.x * c_psi + a_total.y * s_psi) / g).clamp(-lim, lim);
            let phi_d = ((a_total.x * s_psi - a_total.y * c_psi) / g).clamp(-lim, lim);
            (
                Vec3::new(phi_d, theta_d, reference.yaw_d),
                Vec3::zeros(),
                Vec3::zeros(),
            )
        };

        let (f_bar, g_bar) = self.free_nominal_attitude(&eta, &eta_dot)?;
        let lambda = self.lambda(&eta)?;
        let tau_b0 = nominal_attitude_control(
            &eta,
            &eta_dot,
            &eta_d,
            &eta_d_dot,
            &eta_d_ddot,
            &f_bar,
            &g_bar,
            &self.cfg.attitude_gains,
        )?;
        let (tau_b, dob, tau_b2) = self.wrap_attitude_dob(&eta, &f_bar, &g_bar, &lambda, &tau_b0)?;
        let (tau_b, moment_saturated) = self.clamp_moment(tau_b);
        Ok(ControlDecision {
            thrust,
            tau_b,
            tau_b0,
            dob,
            f_bar,
            g_bar,
            lambda,
            thrust_saturated,
            moment_saturated,
            eta_held: eta,
            tau_b2_held: tau_b2,
            pos_held,
        })
    }

    /// Advances the observer filters over the realized step length.
    pub fn advance(&mut self, dt: f64, decision: &ControlDecision) {
        self.att_dob
            .advance(&self.cfg.dob, dt, &decision.eta_held, &decision.tau_b2_held);
        if let Some((p, a2)) = decision.pos_held {
            self.pos_dob.advance(&self.pos_dob_params, dt, &p, &a2);
        }
    }
}
