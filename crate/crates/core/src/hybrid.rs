//! The three-mode hybrid automaton and its event-detecting simulation loop.
//!
//! Modes: `WP` (wire-pulling, constrained chart), `ST` (stabilizing) and
//! `FF` (free-flight), with the edge set `{(WP,ST), (ST,FF)}`. The plant
//! integrates with fixed-step RK4; guard crossings are located by bisection
//! to 1e-6 s; the `WP -> ST` reset embeds the constrained state into the
//! free chart and injects a bounded random end-effector velocity jump, and
//! `ST -> FF` is the identity.

use crate::controller::{ControlDecision, Controller, ControllerConfig};
use crate::dynamics::{
    end_effector_force, free_flight_flow, free_flight_terms, project_disturbance,
    wire_pulling_flow, wire_pulling_terms, ControlInput,
};
use crate::kinematics::{
    constrained_bodies, embed, ConstrainedState, FreeState, Gamma, QVec, RVec,
};
use crate::params::ArmParams;
use crate::trace::TraceRecord;
use crate::trajectory::{
    ff_reference, solve_st_coefficients, st_reference, wp_reference, Reference, StCoefficients,
    TrajConfig,
};
use crate::{Error, Result, Vec3};
use nalgebra::SVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::trace::ModeTag as Mode;

/// Guard thresholds of the two edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardConfig {
    /// Plug-release force threshold (N).
    pub f_th: f64,
    /// Attitude-norm threshold of the `ST -> FF` edge (rad).
    pub delta_eta: f64,
}

/// `WP -> ST` fires when the pulling component of the end-effector force
/// reaches the release threshold.
pub fn guard_wp_st(f_e_x: f64, cfg: &GuardConfig) -> bool {
    f_e_x >= cfg.f_th
}

/// `ST -> FF` fires once the attitude norm is small and the stabilizing
/// window has elapsed.
pub fn guard_st_ff(eta: &Vec3, t: f64, t_d_st: f64, cfg: &GuardConfig) -> bool {
    eta.norm() < cfg.delta_eta && t >= t_d_st
}

/// Bounded random end-effector velocity jump applied at plug separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetJumpModel {
    /// Jump magnitude bound (m/s).
    pub bound: f64,
}

impl ResetJumpModel {
    /// Uniform sample from the closed ball of radius `bound`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        if self.bound <= 0.0 {
            return Vec3::zeros();
        }
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm_squared() <= 1.0 {
                return v * self.bound;
            }
        }
    }
}

/// `WP -> ST` reset: exact position embedding; the sampled jump enters the
/// multirotor velocity rows so the end-effector velocity becomes the jump
/// while the attitude and servo coordinates and rates stay continuous.
pub fn reset_wp_st(
    params: &ArmParams,
    state: &ConstrainedState,
    jump: &Vec3,
) -> Result<FreeState> {
    let mut free = embed(params, state)?;
    free.qdot[0] += jump.x;
    free.qdot[1] += jump.y;
    free.qdot[2] += jump.z;
    Ok(free)
}

/// `ST -> FF` reset: identity.
pub fn reset_st_ff(state: &FreeState) -> FreeState {
    *state
}

/// Admissible box of states for the flight experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Roll/pitch magnitude limit (rad).
    pub attitude_max: f64,
    /// Angular-rate magnitude limit (rad/s).
    pub rate_max: f64,
    pub pos_min: [f64; 3],
    pub pos_max: [f64; 3],
    /// Linear-speed limit (m/s).
    pub vel_max: f64,
}

impl Default for Envelope {
    fn default() -> Self {
        Self {
            attitude_max: 60.0_f64.to_radians(),
            rate_max: 20.0,
            pos_min: [-5.0, -5.0, -2.0],
            pos_max: [5.0, 5.0, 5.0],
            vel_max: 10.0,
        }
    }
}

impl Envelope {
    /// Returns a violation description, if any.
    pub fn check(&self, pos: &Vec3, vel: &Vec3, eta: &Vec3, eta_dot: &Vec3) -> Option<String> {
        if eta.x.abs() > self.attitude_max || eta.y.abs() > self.attitude_max {
            return Some(format!(
                "attitude ({:.3}, {:.3}) rad beyond {:.3}",
                eta.x, eta.y, self.attitude_max
            ));
        }
        if eta_dot.amax() > self.rate_max {
            return Some(format!("rate {:.3} rad/s beyond {:.3}", eta_dot.amax(), self.rate_max));
        }
        for i in 0..3 {
            if pos[i] < self.pos_min[i] || pos[i] > self.pos_max[i] {
                return Some(format!("position axis {i} = {:.3} m outside box", pos[i]));
            }
        }
        if vel.norm() > self.vel_max {
            return Some(format!("speed {:.3} m/s beyond {:.3}", vel.norm(), self.vel_max));
        }
        None
    }
}

/// Time profile of one generalized-force disturbance channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbanceKind {
    Constant,
    Step { t_on: f64 },
    Sinusoid { freq_hz: f64, phase: f64 },
}

/// One disturbance channel on a free-chart generalized coordinate
/// (0-2 force on the position, 3-5 attitude torque, 6-7 servo torque).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceChannel {
    pub coord: usize,
    pub magnitude: f64,
    #[serde(flatten)]
    pub kind: DisturbanceKind,
}

/// Generalized disturbance evaluated per time; projected onto the
/// constrained chart through the embedding while wire-pulling.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceConfig {
    #[serde(default)]
    pub channels: Vec<DisturbanceChannel>,
}

impl DisturbanceConfig {
    pub fn eval(&self, t: f64) -> QVec {
        let mut tau = QVec::zeros();
        for ch in &self.channels {
            let v = match &ch.kind {
                DisturbanceKind::Constant => ch.magnitude,
                DisturbanceKind::Step { t_on } => {
                    if t >= *t_on {
                        ch.magnitude
                    } else {
                        0.0
                    }
                }
                DisturbanceKind::Sinusoid { freq_hz, phase } => {
                    ch.magnitude * (2.0 * std::f64::consts::PI * freq_hz * t + phase).sin()
                }
            };
            if ch.coord < 8 {
                tau[ch.coord] += v;
            }
        }
        tau
    }

    pub fn validate(&self) -> Result<()> {
        for ch in &self.channels {
            if ch.coord >= 8 {
                return Err(Error::InvalidConfig(format!(
                    "disturbance coordinate {} out of range",
                    ch.coord
                )));
            }
        }
        Ok(())
    }
}

/// Servo positioning model; the trajectory of `gamma` is prescribed and the
/// exact lock torque enforcing it is computed plant-side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ServoModel {
    Exact,
    FirstOrderLag { tau: f64 },
}

/// Prescribed `(gamma, gamma_dot, gamma_ddot)` at a given time.
#[derive(Debug, Clone, Copy)]
pub struct ServoProfile {
    pub gamma_d: Gamma,
    pub gamma0: Gamma,
    pub model: ServoModel,
}

impl ServoProfile {
    pub fn at(&self, t: f64) -> (Gamma, Gamma, Gamma) {
        match self.model {
            ServoModel::Exact => (self.gamma_d, Gamma::zeros(), Gamma::zeros()),
            ServoModel::FirstOrderLag { tau } => {
                let d = self.gamma0 - self.gamma_d;
                let e = (-t / tau).exp();
                (
                    self.gamma_d + d * e,
                    -d * (e / tau),
                    d * (e / (tau * tau)),
                )
            }
        }
    }
}

/// One mode transition with the states on both sides of the reset.
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub t: f64,
    pub from: Mode,
    pub to: Mode,
    pub pre_q: QVec,
    pub pre_qd: QVec,
    pub post_q: QVec,
    pub post_qd: QVec,
    pub jump: Vec3,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    /// The release guard never fired.
    NoSeparation,
    /// The state left the flight envelope (crash verdict).
    EnvelopeExit { t: f64, what: String },
}

/// Aggregate numbers reported after a run.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub separation_time: Option<f64>,
    pub ff_entry_time: Option<f64>,
    pub peak_wp_pitch_error: f64,
    pub peak_post_separation_attitude: f64,
    pub final_position_error: Option<f64>,
    pub thrust_saturated_steps: usize,
    pub moment_saturated_steps: usize,
}

/// Time-stamped record of a whole run.
#[derive(Debug, Clone)]
pub struct HybridTrace {
    pub records: Vec<TraceRecord>,
    pub events: Vec<EventRecord>,
    pub outcome: Outcome,
    pub summary: RunSummary,
}

impl HybridTrace {
    pub fn mode_sequence(&self) -> Vec<Mode> {
        let mut seq = Vec::new();
        for r in &self.records {
            if seq.last() != Some(&r.mode) {
                seq.push(r.mode);
            }
        }
        seq
    }
}

/// Fully assembled runtime scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: ArmParams,
    pub nominal: ArmParams,
    pub j_bar: [f64; 3],
    pub controller: ControllerConfig,
    pub guards: GuardConfig,
    pub traj: TrajConfig,
    pub envelope: Envelope,
    pub disturbance: DisturbanceConfig,
    pub jump: ResetJumpModel,
    pub servo: ServoModel,
    pub gamma_d: Gamma,
    pub gamma_ddot_noise_std: f64,
    pub dt: f64,
    pub t_end: f64,
    pub decimation: usize,
    pub seed: u64,
    pub force_separation_at: Option<f64>,
    /// Multirotor start position (the mission home); the socket anchor is
    /// derived from it through the level-attitude arm geometry.
    pub home_position: [f64; 3],
    pub home_yaw: f64,
    /// Deliberate observer-state offset applied at the wire-pulling start
    /// (first six entries perturb the measurement filter, the rest the
    /// input filter); used by the fast-transient studies.
    pub dob_perturbation: [f64; 12],
}

impl Scenario {
    pub fn home_reference(&self) -> Reference {
        Reference::hold(
            Vec3::from_column_slice(&self.home_position),
            self.home_yaw,
            self.gamma_d,
        )
    }

    /// Socket anchor: the end-effector position of the level perch pose.
    pub fn anchor(&self) -> Vec3 {
        let geo = crate::kinematics::ArmGeometry::new(&self.plant, &self.gamma_d);
        let rot = crate::spatial::euler_to_rotation(crate::spatial::EulerAngles::new(
            0.0,
            0.0,
            self.home_yaw,
        ));
        Vec3::from_column_slice(&self.home_position) + rot * geo.ee_offset()
    }

    pub fn initial_state(&self) -> ConstrainedState {
        ConstrainedState::from_parts(
            Vec3::new(0.0, 0.0, self.home_yaw),
            self.gamma_d,
            Vec3::zeros(),
            Gamma::zeros(),
            self.anchor(),
        )
    }
}

/// Servo lock torque for the constrained chart: the exact `tau_gamma` that
/// realizes the prescribed `gamma_ddot` under the given thrust and moments.
pub fn wp_lock_torque(
    params: &ArmParams,
    state: &ConstrainedState,
    thrust: f64,
    tau_b: &Vec3,
    tau_e_r: &RVec,
    gamma_ddot: &Gamma,
) -> Result<(Gamma, Vec3)> {
    let terms = wire_pulling_terms(params, state)?;
    let m_eta: crate::Mat3 = terms.m.fixed_view::<3, 3>(0, 0).into();
    let m_eta_gamma: nalgebra::SMatrix<f64, 3, 2> = terms.m.fixed_view::<3, 2>(0, 3).into();
    let m_gamma: nalgebra::SMatrix<f64, 2, 2> = terms.m.fixed_view::<2, 2>(3, 3).into();
    let c_eta: Vec3 = terms.c.fixed_rows::<3>(0).into();
    let k_eta: Vec3 = terms.k.fixed_rows::<3>(0).into();
    let c_gamma: Gamma = terms.c.fixed_rows::<2>(3).into();
    let k_gamma: Gamma = terms.k.fixed_rows::<2>(3).into();
    let j_t_eta: Vec3 = terms.j_u.fixed_view::<1, 3>(0, 0).transpose();
    let j_t_gamma: Gamma = terms.j_u.fixed_view::<1, 2>(0, 3).transpose();
    let att = crate::kinematics::attitude_kin(&state.eta(), &state.eta_dot())?;
    let tau_e_eta: Vec3 = tau_e_r.fixed_rows::<3>(0).into();
    let tau_e_gamma: Gamma = tau_e_r.fixed_rows::<2>(3).into();

    let rhs_eta = -c_eta - k_eta - m_eta_gamma * gamma_ddot
        + j_t_eta * thrust
        + att.q_mat.transpose() * tau_b
        + tau_e_eta;
    let eta_ddot = m_eta
        .cholesky()
        .ok_or(Error::SingularMass {
            min_eig: crate::dynamics::min_symmetric_eig(&nalgebra::SMatrix::<f64, 3, 3>::from(
                m_eta,
            )),
        })?
        .solve(&rhs_eta);
    let tau_gamma = m_eta_gamma.transpose() * eta_ddot + m_gamma * gamma_ddot + c_gamma + k_gamma
        - j_t_gamma * thrust
        - tau_e_gamma;
    Ok((tau_gamma, eta_ddot))
}

/// Servo lock torque for the free chart.
pub fn free_lock_torque(
    params: &ArmParams,
    state: &FreeState,
    thrust: f64,
    tau_b: &Vec3,
    tau_e_q: &QVec,
    gamma_ddot: &Gamma,
) -> Result<Gamma> {
    let terms = free_flight_terms(params, state)?;
    let m_cc: nalgebra::SMatrix<f64, 6, 6> = terms.m.fixed_view::<6, 6>(0, 0).into();
    let m_cg: nalgebra::SMatrix<f64, 6, 2> = terms.m.fixed_view::<6, 2>(0, 6).into();
    let m_gg: nalgebra::SMatrix<f64, 2, 2> = terms.m.fixed_view::<2, 2>(6, 6).into();
    let u_partial = ControlInput::new(thrust, *tau_b, Gamma::zeros());
    let gen_force = terms.j_u.transpose() * u_partial.to_vec6() + tau_e_q;
    let rhs_c: SVector<f64, 6> =
        (-terms.c - terms.k + gen_force).fixed_rows::<6>(0).into();
    let rhs_c = rhs_c - m_cg * gamma_ddot;
    let chi_ddot = m_cc
        .cholesky()
        .ok_or(Error::SingularMass {
            min_eig: crate::dynamics::min_symmetric_eig(&m_cc),
        })?
        .solve(&rhs_c);
    let c_g: Gamma = terms.c.fixed_rows::<2>(6).into();
    let k_g: Gamma = terms.k.fixed_rows::<2>(6).into();
    let f_g: Gamma = gen_force.fixed_rows::<2>(6).into();
    let f_g_no_servo = f_g; // tau_gamma excluded from u_partial above
    let tau_gamma =
        m_cg.transpose() * chi_ddot + m_gg * gamma_ddot + c_g + k_g - f_g_no_servo;
    Ok(tau_gamma)
}

fn rk4_constrained<F>(state: &ConstrainedState, t: f64, h: f64, f: &F) -> Result<ConstrainedState>
where
    F: Fn(&ConstrainedState, f64) -> Result<RVec>,
{
    let k1 = f(state, t)?;
    let s2 = ConstrainedState::new(
        state.r + state.rdot * (h / 2.0),
        state.rdot + k1 * (h / 2.0),
        state.anchor,
    );
    let k2 = f(&s2, t + h / 2.0)?;
    let s3 = ConstrainedState::new(
        state.r + s2.rdot * (h / 2.0),
        state.rdot + k2 * (h / 2.0),
        state.anchor,
    );
    let k3 = f(&s3, t + h / 2.0)?;
    let s4 = ConstrainedState::new(state.r + s3.rdot * h, state.rdot + k3 * h, state.anchor);
    let k4 = f(&s4, t + h)?;
    let rdot_avg = (state.rdot + s2.rdot * 2.0 + s3.rdot * 2.0 + s4.rdot) / 6.0;
    let acc_avg = (k1 + k2 * 2.0 + k3 * 2.0 + k4) / 6.0;
    Ok(ConstrainedState::new(
        state.r + rdot_avg * h,
        state.rdot + acc_avg * h,
        state.anchor,
    ))
}

fn rk4_free<F>(state: &FreeState, t: f64, h: f64, f: &F) -> Result<FreeState>
where
    F: Fn(&FreeState, f64) -> Result<QVec>,
{
    let k1 = f(state, t)?;
    let s2 = FreeState::new(state.q + state.qdot * (h / 2.0), state.qdot + k1 * (h / 2.0));
    let k2 = f(&s2, t + h / 2.0)?;
    let s3 = FreeState::new(state.q + s2.qdot * (h / 2.0), state.qdot + k2 * (h / 2.0));
    let k3 = f(&s3, t + h / 2.0)?;
    let s4 = FreeState::new(state.q + s3.qdot * h, state.qdot + k3 * h);
    let k4 = f(&s4, t + h)?;
    let qdot_avg = (state.qdot + s2.qdot * 2.0 + s3.qdot * 2.0 + s4.qdot) / 6.0;
    let acc_avg = (k1 + k2 * 2.0 + k3 * 2.0 + k4) / 6.0;
    Ok(FreeState::new(
        state.q + qdot_avg * h,
        state.qdot + acc_avg * h,
    ))
}

enum PlantState {
    Wp(ConstrainedState),
    Free(FreeState),
}

/// Guard-crossing bisection over a step: `advance(h)` reproduces the state
/// at `t + h`; `fired(state, t)` is false at `h = 0` and true at `h = span`.
fn bisect_crossing<S>(
    span: f64,
    advance: impl Fn(f64) -> Result<S>,
    fired: impl Fn(&S, f64) -> Result<bool>,
    t0: f64,
) -> Result<f64> {
    let mut lo = 0.0_f64;
    let mut hi = span;
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        let s = advance(mid)?;
        if fired(&s, t0 + mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Runs the hybrid automaton from the perched start until `t_end`, a crash,
/// or a missing separation.
pub fn simulate(scenario: &Scenario) -> Result<HybridTrace> {
    run_sim(scenario, None)
}

/// Runs the automaton starting already in the stabilizing mode from a
/// post-reset state at time `t0` (used for coverage-center post-traces).
pub fn simulate_from_st(scenario: &Scenario, start: FreeState, t0: f64) -> Result<HybridTrace> {
    run_sim(scenario, Some((start, t0)))
}

fn run_sim(scenario: &Scenario, st_start: Option<(FreeState, f64)>) -> Result<HybridTrace> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let plant = &scenario.plant;
    let mut controller = Controller::new(
        scenario.controller.clone(),
        scenario.nominal.clone(),
        scenario.j_bar,
    );
    let home = scenario.home_reference();
    let servo = ServoProfile {
        gamma_d: scenario.gamma_d,
        gamma0: scenario.gamma_d,
        model: scenario.servo,
    };

    let mut state = PlantState::Wp(scenario.initial_state());
    let mut mode = Mode::Wp;
    let mut t = 0.0_f64;
    let mut step: u64 = 0;
    let mut records = Vec::new();
    let mut events = Vec::new();
    let mut summary = RunSummary::default();
    let mut st_coeffs: Option<StCoefficients> = None;
    let mut st_hold = home;
    let mut t_d_st = f64::INFINITY;
    let mut outcome = None;

    match st_start {
        None => {
            if let PlantState::Wp(cs) = &state {
                controller.enter_wp(cs, plant.total_mass() * plant.g, &Gamma::zeros())?;
                let d = &scenario.dob_perturbation;
                if d.iter().any(|&x| x != 0.0) {
                    let dob = controller.att_dob_state_mut();
                    for i in 0..6 {
                        dob.q[i] += d[i];
                        dob.p[i] += d[6 + i];
                    }
                }
            }
        }
        Some((fs, t0)) => {
            t = t0;
            st_coeffs = Some(solve_st_coefficients(
                &fs.eta(),
                &fs.eta_dot(),
                t0,
                t0 + scenario.traj.st_window,
            )?);
            t_d_st = t0 + scenario.traj.st_window;
            st_hold = Reference::hold(fs.position(), fs.eta().z, scenario.gamma_d);
            controller.enter_st(&fs)?;
            summary.separation_time = Some(t0);
            state = PlantState::Free(fs);
            mode = Mode::St;
        }
    }

    let dt = scenario.dt;
    while t < scenario.t_end - 1e-12 {
        let h = dt.min(scenario.t_end - t);
        let (gamma, gamma_dot, gamma_ddot_d) = servo.at(t);
        let tau_e_q_now = scenario.disturbance.eval(t);
        let gamma_ddot_est = if scenario.gamma_ddot_noise_std > 0.0 {
            let n = scenario.gamma_ddot_noise_std;
            gamma_ddot_d
                + Gamma::new(
                    n * (rng.random::<f64>() * 2.0 - 1.0),
                    n * (rng.random::<f64>() * 2.0 - 1.0),
                )
        } else {
            gamma_ddot_d
        };

        match &mut state {
            PlantState::Wp(cs) => {
                // kinematic servo enforcement
                cs.r[3] = gamma[0];
                cs.r[4] = gamma[1];
                cs.rdot[3] = gamma_dot[0];
                cs.rdot[4] = gamma_dot[1];
                let cs_now = *cs;
                let reference = wp_reference(t, &scenario.traj, &home);
                let bodies = constrained_bodies(plant, &cs_now)?;
                let body_pos = bodies[0].pos;
                let body_vel = bodies[0].vel;

                if let Some(what) =
                    scenario
                        .envelope
                        .check(&body_pos, &body_vel, &cs_now.eta(), &cs_now.eta_dot())
                {
                    outcome = Some(Outcome::EnvelopeExit { t, what });
                    break;
                }

                let decision = controller.wp_control(
                    &cs_now,
                    &reference,
                    &gamma_ddot_est,
                    &body_pos,
                    &body_vel,
                    plant.t_max,
                )?;
                let tau_e_r_now = project_disturbance(plant, &cs_now, &tau_e_q_now)?;
                let (tau_gamma, _) = wp_lock_torque(
                    plant,
                    &cs_now,
                    decision.thrust,
                    &decision.tau_b,
                    &tau_e_r_now,
                    &gamma_ddot_d,
                )?;
                let u = ControlInput::new(decision.thrust, decision.tau_b, tau_gamma);
                let f_e = end_effector_force(plant, &cs_now, &u, &tau_e_q_now)?;

                summary.peak_wp_pitch_error = summary
                    .peak_wp_pitch_error
                    .max((cs_now.eta().y - reference.eta_d.y).abs());
                if decision.thrust_saturated {
                    summary.thrust_saturated_steps += 1;
                }
                if decision.moment_saturated {
                    summary.moment_saturated_steps += 1;
                }
                if step % scenario.decimation as u64 == 0 {
                    records.push(make_record(
                        t,
                        mode,
                        &embed(plant, &cs_now)?,
                        &u,
                        &f_e.exact,
                        &reference,
                        &decision,
                        &controller,
                        &cs_now.eta(),
                        &cs_now.eta_dot(),
                    ));
                }

                let flow = |s: &ConstrainedState, tt: f64| -> Result<RVec> {
                    let tau_e = project_disturbance(plant, s, &scenario.disturbance.eval(tt))?;
                    wire_pulling_flow(plant, s, &u, &tau_e)
                };
                let next = rk4_constrained(&cs_now, t, h, &flow)?;

                let fired_at = |s: &ConstrainedState, tt: f64| -> Result<bool> {
                    if let Some(t_force) = scenario.force_separation_at {
                        return Ok(tt >= t_force);
                    }
                    let fe = end_effector_force(plant, s, &u, &scenario.disturbance.eval(tt))?;
                    Ok(guard_wp_st(fe.exact.x, &scenario.guards))
                };

                if fired_at(&next, t + h)? && !fired_at(&cs_now, t)? {
                    let h_star = bisect_crossing(
                        h,
                        |hh| rk4_constrained(&cs_now, t, hh.max(1e-12), &flow),
                        |s, tt| fired_at(s, tt),
                        t,
                    )?;
                    let cs_star = rk4_constrained(&cs_now, t, h_star.max(1e-12), &flow)?;
                    let t_star = t + h_star;
                    controller.advance(h_star, &decision);

                    // final pre-event sample
                    let fe_star = end_effector_force(
                        plant,
                        &cs_star,
                        &u,
                        &scenario.disturbance.eval(t_star),
                    )?;
                    records.push(make_record(
                        t_star,
                        Mode::Wp,
                        &embed(plant, &cs_star)?,
                        &u,
                        &fe_star.exact,
                        &reference,
                        &decision,
                        &controller,
                        &cs_star.eta(),
                        &cs_star.eta_dot(),
                    ));

                    let jump = scenario.jump.sample(&mut rng);
                    let pre = embed(plant, &cs_star)?;
                    let post = reset_wp_st(plant, &cs_star, &jump)?;
                    events.push(EventRecord {
                        t: t_star,
                        from: Mode::Wp,
                        to: Mode::St,
                        pre_q: pre.q,
                        pre_qd: pre.qdot,
                        post_q: post.q,
                        post_qd: post.qdot,
                        jump,
                    });
                    summary.separation_time = Some(t_star);
                    st_coeffs = Some(solve_st_coefficients(
                        &post.eta(),
                        &post.eta_dot(),
                        t_star,
                        t_star + scenario.traj.st_window,
                    )?);
                    t_d_st = t_star + scenario.traj.st_window;
                    st_hold = Reference::hold(post.position(), post.eta().z, scenario.gamma_d);
                    controller.enter_st(&post)?;
                    state = PlantState::Free(post);
                    mode = Mode::St;
                    t = t_star;
                } else {
                    controller.advance(h, &decision);
                    *cs = next;
                    t += h;
                }
            }
            PlantState::Free(fs) => {
                fs.q[6] = gamma[0];
                fs.q[7] = gamma[1];
                fs.qdot[6] = gamma_dot[0];
                fs.qdot[7] = gamma_dot[1];
                let fs_now = *fs;
                let reference = match mode {
                    Mode::St => st_reference(t, st_coeffs.as_ref().unwrap(), &st_hold),
                    _ => ff_reference(t, &home),
                };

                if let Some(what) = scenario.envelope.check(
                    &fs_now.position(),
                    &fs_now.velocity(),
                    &fs_now.eta(),
                    &fs_now.eta_dot(),
                ) {
                    outcome = Some(Outcome::EnvelopeExit { t, what });
                    break;
                }

                let decision = controller.st_ff_control(
                    &fs_now,
                    &reference,
                    mode == Mode::St,
                    h,
                    plant.t_max,
                )?;
                let tau_gamma = free_lock_torque(
                    plant,
                    &fs_now,
                    decision.thrust,
                    &decision.tau_b,
                    &tau_e_q_now,
                    &gamma_ddot_d,
                )?;
                let u = ControlInput::new(decision.thrust, decision.tau_b, tau_gamma);

                summary.peak_post_separation_attitude = summary
                    .peak_post_separation_attitude
                    .max(fs_now.eta().norm());
                if decision.thrust_saturated {
                    summary.thrust_saturated_steps += 1;
                }
                if decision.moment_saturated {
                    summary.moment_saturated_steps += 1;
                }
                if step % scenario.decimation as u64 == 0 {
                    records.push(make_record(
                        t,
                        mode,
                        &fs_now,
                        &u,
                        &Vec3::zeros(),
                        &reference,
                        &decision,
                        &controller,
                        &fs_now.eta(),
                        &fs_now.eta_dot(),
                    ));
                }

                let flow = |s: &FreeState, tt: f64| -> Result<QVec> {
                    free_flight_flow(plant, s, &u, &scenario.disturbance.eval(tt))
                };
                let next = rk4_free(&fs_now, t, h, &flow)?;

                if mode == Mode::St {
                    let fired = |s: &FreeState, tt: f64| -> Result<bool> {
                        Ok(guard_st_ff(&s.eta(), tt, t_d_st, &scenario.guards))
                    };
                    if fired(&next, t + h)? && !fired(&fs_now, t)? {
                        let h_star = bisect_crossing(
                            h,
                            |hh| rk4_free(&fs_now, t, hh.max(1e-12), &flow),
                            |s, tt| fired(s, tt),
                            t,
                        )?;
                        let fs_star = rk4_free(&fs_now, t, h_star.max(1e-12), &flow)?;
                        let t_star = t + h_star;
                        controller.advance(h_star, &decision);
                        records.push(make_record(
                            t_star,
                            Mode::St,
                            &fs_star,
                            &u,
                            &Vec3::zeros(),
                            &reference,
                            &decision,
                            &controller,
                            &fs_star.eta(),
                            &fs_star.eta_dot(),
                        ));
                        let post = reset_st_ff(&fs_star);
                        events.push(EventRecord {
                            t: t_star,
                            from: Mode::St,
                            to: Mode::Ff,
                            pre_q: fs_star.q,
                            pre_qd: fs_star.qdot,
                            post_q: post.q,
                            post_qd: post.qdot,
                            jump: Vec3::zeros(),
                        });
                        summary.ff_entry_time = Some(t_star);
                        state = PlantState::Free(post);
                        mode = Mode::Ff;
                        t = t_star;
                        step += 1;
                        continue;
                    }
                }
                controller.advance(h, &decision);
                *fs = next;
                t += h;
            }
        }
        step += 1;
    }

    let outcome = outcome.unwrap_or(match mode {
        Mode::Wp => Outcome::NoSeparation,
        _ => Outcome::Completed,
    });
    if let (PlantState::Free(fs), Outcome::Completed) = (&state, &outcome) {
        summary.final_position_error =
            Some((fs.position() - Vec3::from_column_slice(&scenario.home_position)).norm());
    }
    Ok(HybridTrace {
        records,
        events,
        outcome,
        summary,
    })
}

#[allow(clippy::too_many_arguments)]
fn make_record(
    t: f64,
    mode: Mode,
    free: &FreeState,
    u: &ControlInput,
    f_e: &Vec3,
    reference: &Reference,
    decision: &ControlDecision,
    controller: &Controller,
    eta: &Vec3,
    eta_dot: &Vec3,
) -> TraceRecord {
    let (xi, zeta) = if mode == Mode::Wp {
        let fv = crate::analysis::fast::fast_variables(
            controller.att_dob_state(),
            controller.dob_params(),
            eta,
            eta_dot,
            &decision.lambda,
        );
        (
            [fv.xi[0], fv.xi[1], fv.xi[2], fv.xi[3], fv.xi[4], fv.xi[5]],
            [
                fv.zeta[0], fv.zeta[1], fv.zeta[2], fv.zeta[3], fv.zeta[4], fv.zeta[5],
            ],
        )
    } else {
        ([0.0; 6], [0.0; 6])
    };
    TraceRecord {
        t,
        mode,
        q: free.q.as_slice().try_into().unwrap(),
        qd: free.qdot.as_slice().try_into().unwrap(),
        thrust: u.thrust,
        tau_b: [u.tau_b.x, u.tau_b.y, u.tau_b.z],
        tau_gamma: [u.tau_gamma.x, u.tau_gamma.y],
        f_e: [f_e.x, f_e.y, f_e.z],
        eta_d: [reference.eta_d.x, reference.eta_d.y, reference.eta_d.z],
        u_eta: [decision.dob.u.x, decision.dob.u.y, decision.dob.u.z],
        pi_u: [decision.dob.pi_u.x, decision.dob.pi_u.y, decision.dob.pi_u.z],
        xi,
        zeta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn guard_wp_st_threshold() {
        let cfg = GuardConfig {
            f_th: 4.9,
            delta_eta: 0.0873,
        };
        assert!(guard_wp_st(4.973, &cfg));
        assert!(!guard_wp_st(0.0, &cfg));
    }

    #[test]
    fn guard_st_ff_needs_both_conditions() {
        let cfg = GuardConfig {
            f_th: 4.9,
            delta_eta: 5.0_f64.to_radians(),
        };
        let small = Vec3::new(0.0, 4.0_f64.to_radians(), 0.0);
        let large = Vec3::new(0.0, 6.0_f64.to_radians(), 0.0);
        // boundary: both satisfied
        assert!(guard_st_ff(&Vec3::zeros(), 3.0, 3.0, &cfg));
        // time blocks
        assert!(!guard_st_ff(&small, 2.9, 3.0, &cfg));
        // attitude blocks
        assert!(!guard_st_ff(&large, 3.1, 3.0, &cfg));
    }

    #[test]
    fn reset_preserves_attitude_and_servo_coordinates() {
        let p = ArmParams::default();
        let st = ConstrainedState::from_parts(
            Vec3::new(0.05, -0.25, 0.02),
            Gamma::new(0.1, -0.2),
            Vec3::new(0.2, -0.5, 0.1),
            Gamma::new(0.05, 0.02),
            Vec3::new(0.0, 0.0, 1.0),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = ResetJumpModel { bound: 0.3 };
        for _ in 0..1000 {
            let jump = model.sample(&mut rng);
            assert!(jump.norm() <= 0.3 + 1e-12);
            let free = reset_wp_st(&p, &st, &jump).unwrap();
            assert_eq!(free.eta(), st.eta());
            assert_eq!(free.gamma(), st.gamma());
            assert_eq!(free.eta_dot(), st.eta_dot());
            assert_eq!(free.gamma_dot(), st.gamma_dot());
        }
    }

    #[test]
    fn zero_jump_reset_is_continuous_embedding() {
        let p = ArmParams::default();
        let st = ConstrainedState::from_parts(
            Vec3::new(0.0, -0.2, 0.0),
            Gamma::zeros(),
            Vec3::new(0.1, -0.3, 0.0),
            Gamma::zeros(),
            Vec3::new(0.0, 0.0, 1.0),
        );
        let free = reset_wp_st(&p, &st, &Vec3::zeros()).unwrap();
        let lk = crate::kinematics::link_kinematics_free(&p, &free).unwrap();
        // finite-difference gives pdot_ie = 0 for the zero-jump embedding
        assert!(lk.v_ie.norm() < 1e-12 || {
            let h = 1e-7;
            let fs2 = FreeState::new(free.q + free.qdot * h, free.qdot);
            let lk2 = crate::kinematics::link_kinematics_free(&p, &fs2).unwrap();
            ((lk2.p_ie - lk.p_ie) / h).norm() < 1e-5
        });
    }

    #[test]
    fn jump_appears_in_ee_velocity() {
        let p = ArmParams::default();
        let st = ConstrainedState::from_parts(
            Vec3::new(0.0, -0.2, 0.0),
            Gamma::zeros(),
            Vec3::new(0.1, -0.3, 0.0),
            Gamma::zeros(),
            Vec3::new(0.0, 0.0, 1.0),
        );
        let jump = Vec3::new(-0.3, 0.0, 0.0);
        let base = reset_wp_st(&p, &st, &Vec3::zeros()).unwrap();
        let kicked = reset_wp_st(&p, &st, &jump).unwrap();
        let dv = kicked.qdot - base.qdot;
        assert_eq!(Vec3::new(dv[0], dv[1], dv[2]), jump);
        for i in 3..8 {
            assert_eq!(dv[i], 0.0);
        }
    }

    #[test]
    fn servo_lag_profile_relaxes_to_target() {
        let profile = ServoProfile {
            gamma_d: Gamma::new(0.2, -0.1),
            gamma0: Gamma::new(0.0, 0.0),
            model: ServoModel::FirstOrderLag { tau: 0.03 },
        };
        let (g0, _, _) = profile.at(0.0);
        assert!((g0 - profile.gamma0).norm() < 1e-12);
        let (g_inf, gd_inf, _) = profile.at(1.0);
        assert!((g_inf - profile.gamma_d).norm() < 1e-10);
        assert!(gd_inf.norm() < 1e-9);
    }

    #[test]
    fn envelope_flags_attitude_exit() {
        let env = Envelope::default();
        assert!(env
            .check(
                &Vec3::new(0.0, 0.0, 1.0),
                &Vec3::zeros(),
                &Vec3::new(0.0, 1.2, 0.0),
                &Vec3::zeros()
            )
            .is_some());
        assert!(env
            .check(
                &Vec3::new(0.0, 0.0, 1.0),
                &Vec3::zeros(),
                &Vec3::new(0.0, 0.3, 0.0),
                &Vec3::zeros()
            )
            .is_none());
    }
}
