//! Operational pipelines: single runs with artifact output, observer
//! time-scale sweeps, the Monte-Carlo transition-robustness check, the
//! DOB-versus-baseline comparison, and plot extraction.

use crate::analysis::fast::{fast_decay_fit, DecayFit};
use crate::analysis::maneuver::{
    build_coverage_set, check_approach_maneuver, nominal_actual_deviation, verify_coverage,
    ManeuverMetric, ManeuverReport, ManeuverVerdict,
};
use crate::config::ScenarioConfig;
use crate::dob::nominal_attitude_control;
use crate::dynamics::nominal_attitude_model;
use crate::exec::{map_indexed, ExecMode};
use crate::hybrid::{
    simulate, simulate_from_st, reset_wp_st, HybridTrace, Outcome, Scenario,
};
use crate::kinematics::{ArmGeometry, ConstrainedState, FreeState, Gamma, QVec};
use crate::trace::{ModeTag, TraceRecord};
use crate::{Error, Result, Vec3};
use nalgebra::SVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// A finished run with everything needed to persist it.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub trace: HybridTrace,
    pub config_hash: String,
    pub seed: u64,
    pub s_max: [f64; 3],
}

impl RunArtifacts {
    pub fn metadata(&self) -> String {
        format!(
            "config_sha256={} seed={} rng=chacha8 s_max=[{},{},{}]",
            self.config_hash, self.seed, self.s_max[0], self.s_max[1], self.s_max[2]
        )
    }
}

/// Resolves the saturation bound: explicit values, or a calibration pre-run
/// with the saturation effectively disabled whose recorded compensation
/// signal envelope (times 1.5, floored) becomes the bound.
pub fn resolve_s_max(config: &ScenarioConfig) -> Result<[f64; 3]> {
    if let Some(v) = config.explicit_s_max() {
        return Ok(v);
    }
    let pre = config.build_with_s_max([1e9; 3]);
    let trace = simulate(&pre)?;
    let mut sup = [0.0_f64; 3];
    for r in &trace.records {
        for i in 0..3 {
            sup[i] = sup[i].max(r.u_eta[i].abs());
        }
    }
    Ok([
        (1.5 * sup[0]).max(0.5),
        (1.5 * sup[1]).max(0.5),
        (1.5 * sup[2]).max(0.5),
    ])
}

/// Runs the mission described by the config (auto-calibrating the
/// saturation bound when requested).
pub fn run(config: &ScenarioConfig) -> Result<RunArtifacts> {
    let s_max = resolve_s_max(config)?;
    let scenario = config.build_with_s_max(s_max);
    let trace = simulate(&scenario)?;
    Ok(RunArtifacts {
        trace,
        config_hash: config.content_hash(),
        seed: config.seed,
        s_max,
    })
}

/// Writes `trace.csv`, `events.csv` and `summary.txt` into `dir`.
pub fn write_outputs(dir: &Path, artifacts: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    crate::trace::write_csv(
        &dir.join("trace.csv"),
        &artifacts.trace.records,
        &artifacts.metadata(),
    )?;

    let mut events = String::from("t,from,to,jump_x,jump_y,jump_z\n");
    for e in &artifacts.trace.events {
        events.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.t,
            e.from.as_str(),
            e.to.as_str(),
            e.jump.x,
            e.jump.y,
            e.jump.z
        ));
    }
    let events_path = dir.join("events.csv");
    std::fs::write(&events_path, events).map_err(|e| Error::io(&events_path, e))?;

    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, summary_text(artifacts)).map_err(|e| Error::io(&summary_path, e))?;
    Ok(())
}

pub fn summary_text(artifacts: &RunArtifacts) -> String {
    let s = &artifacts.trace.summary;
    let mut out = String::new();
    out.push_str(&format!("outcome = {:?}\n", artifacts.trace.outcome));
    out.push_str(&format!(
        "mode_sequence = {}\n",
        artifacts
            .trace
            .mode_sequence()
            .iter()
            .map(|m| m.as_str())
            .collect::<Vec<_>>()
            .join(",")
    ));
    out.push_str(&format!("separation_time_s = {:?}\n", s.separation_time));
    out.push_str(&format!("ff_entry_time_s = {:?}\n", s.ff_entry_time));
    out.push_str(&format!(
        "peak_wp_pitch_error_rad = {:.6}\n",
        s.peak_wp_pitch_error
    ));
    out.push_str(&format!(
        "peak_post_separation_attitude_rad = {:.6}\n",
        s.peak_post_separation_attitude
    ));
    out.push_str(&format!(
        "recovery_time_s = {:?}\n",
        match (s.separation_time, s.ff_entry_time) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        }
    ));
    out.push_str(&format!(
        "final_position_error_m = {:?}\n",
        s.final_position_error
    ));
    out.push_str(&format!(
        "thrust_saturated_steps = {}\nmoment_saturated_steps = {}\n",
        s.thrust_saturated_steps, s.moment_saturated_steps
    ));
    out.push_str(&format!("config_sha256 = {}\n", artifacts.config_hash));
    out.push_str(&format!("seed = {}\n", artifacts.seed));
    out
}

/// Rebuilds the constrained state of a wire-pulling trace record.
fn record_to_constrained(r: &TraceRecord, anchor: Vec3) -> ConstrainedState {
    ConstrainedState::from_parts(
        Vec3::new(r.q[3], r.q[4], r.q[5]),
        Gamma::new(r.q[6], r.q[7]),
        Vec3::new(r.qd[3], r.qd[4], r.qd[5]),
        Gamma::new(r.qd[6], r.qd[7]),
        anchor,
    )
}

/// Recomputes the nominal control `tau_b0` along a recorded wire-pulling
/// trajectory (the trace stores the applied `tau_b`, not the nominal law).
fn wp_tau_b0_of_record(scenario: &Scenario, r: &TraceRecord) -> Result<Vec3> {
    let cs = record_to_constrained(r, scenario.anchor());
    let j_bar = crate::Mat3::from_diagonal(&Vec3::from_column_slice(&scenario.j_bar));
    let (f_bar, g_bar) = nominal_attitude_model(
        &scenario.nominal,
        &j_bar,
        &cs,
        r.thrust,
        &Gamma::zeros(),
        scenario.controller.nominal_input,
    )?;
    let reference = crate::trajectory::wp_reference(r.t, &scenario.traj, &scenario.home_reference());
    nominal_attitude_control(
        &cs.eta(),
        &cs.eta_dot(),
        &reference.eta_d,
        &reference.eta_d_dot,
        &reference.eta_d_ddot,
        &f_bar,
        &g_bar,
        &scenario.controller.attitude_gains,
    )
}

/// One row of the observer time-scale sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    /// Sup deviation between the actual closed loop and the nominal closed
    /// loop over `[eta, eta_dot, tau_b0]`.
    pub deviation: f64,
    pub decay: Option<DecayFit>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Physical decay-rate ratios between consecutive epsilon values.
    pub rate_ratios: Vec<f64>,
    pub deviation_nonincreasing: bool,
    pub deviation_at_smallest: f64,
    pub theorem_sigma: f64,
}

impl SweepReport {
    pub fn pass(&self, ratio_lo: f64, ratio_hi: f64) -> bool {
        self.rate_ratios
            .iter()
            .all(|&r| r >= ratio_lo && r <= ratio_hi)
            && self.deviation_nonincreasing
            && self.deviation_at_smallest <= self.theorem_sigma
    }

    pub fn text(&self) -> String {
        let mut out = String::from("eps,deviation,decay_rate_physical,lambda2,fit_floor\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.6e},{},{},{}\n",
                row.eps,
                row.deviation,
                row.decay.map(|d| format!("{:.4}", d.rate_physical)).unwrap_or_default(),
                row.decay.map(|d| format!("{:.4}", d.lambda2)).unwrap_or_default(),
                row.decay.map(|d| format!("{:.3e}", d.floor)).unwrap_or_default(),
            ));
        }
        out.push_str(&format!(
            "# rate_ratios = {:?}\n# deviation_nonincreasing = {}\n# deviation_at_smallest = {:.6e} (sigma {})\n",
            self.rate_ratios, self.deviation_nonincreasing, self.deviation_at_smallest, self.theorem_sigma
        ));
        out
    }
}

/// Wire-pulling-only scenario used by the sweep: the release guard is moved
/// out of reach so the run stays in the first mode for the whole window.
fn wp_only_scenario(config: &ScenarioConfig, eps: f64, s_max: [f64; 3], t_span: f64) -> Scenario {
    let mut sc = config.build_with_s_max(s_max);
    sc.controller.dob.eps = eps;
    sc.guards.f_th = f64::MAX;
    sc.force_separation_at = None;
    sc.t_end = t_span;
    sc.decimation = 1;
    sc.jump.bound = 0.0;
    sc
}

/// Simulates the nominal closed loop (the plant replaced by the nominal
/// attitude model) over the wire-pulling window and returns the series
/// `[eta, eta_dot, tau_b0]`.
fn nominal_wp_series(
    scenario: &Scenario,
    t_span: f64,
) -> Result<Vec<(f64, SVector<f64, 9>)>> {
    let nominal = &scenario.nominal;
    let geo_anchor = {
        let geo = ArmGeometry::new(nominal, &scenario.gamma_d);
        let rot = crate::spatial::euler_to_rotation(crate::spatial::EulerAngles::new(
            0.0,
            0.0,
            scenario.home_yaw,
        ));
        Vec3::from_column_slice(&scenario.home_position) + rot * geo.ee_offset()
    };
    let j_bar = crate::Mat3::from_diagonal(&Vec3::from_column_slice(&scenario.j_bar));
    let home = scenario.home_reference();
    let controller_cfg = &scenario.controller;
    let gains = &controller_cfg.attitude_gains;
    let kp_z = controller_cfg.position_gains.kp[2];
    let kd_z = controller_cfg.position_gains.kd[2];

    let mut eta = Vec3::new(0.0, 0.0, scenario.home_yaw);
    let mut eta_dot = Vec3::zeros();
    let dt = scenario.dt;
    let steps = (t_span / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);

    let eval = |eta: &Vec3, eta_dot: &Vec3, t: f64| -> Result<(Vec3, Vec3)> {
        let cs = ConstrainedState::from_parts(
            *eta,
            scenario.gamma_d,
            *eta_dot,
            Gamma::zeros(),
            geo_anchor,
        );
        let bodies = crate::kinematics::constrained_bodies(nominal, &cs)?;
        let p_b = bodies[0].pos;
        let v_b = bodies[0].vel;
        let az = kp_z * (home.pos_d.z - p_b.z) - kd_z * v_b.z;
        let tilt = (eta.x.cos() * eta.y.cos()).max(0.3);
        let thrust = (nominal.total_mass() * (nominal.g + az) / tilt).clamp(0.0, nominal.t_max);
        let (f_bar, g_bar) = nominal_attitude_model(
            nominal,
            &j_bar,
            &cs,
            thrust,
            &Gamma::zeros(),
            controller_cfg.nominal_input,
        )?;
        let reference = crate::trajectory::wp_reference(t, &scenario.traj, &home);
        let tau_b0 = nominal_attitude_control(
            eta,
            eta_dot,
            &reference.eta_d,
            &reference.eta_d_dot,
            &reference.eta_d_ddot,
            &f_bar,
            &g_bar,
            gains,
        )?;
        let acc = f_bar + g_bar * tau_b0;
        Ok((acc, tau_b0))
    };

    let mut t = 0.0;
    for _ in 0..=steps {
        let (_, tau_b0) = eval(&eta, &eta_dot, t)?;
        let mut v = SVector::<f64, 9>::zeros();
        for i in 0..3 {
            v[i] = eta[i];
            v[3 + i] = eta_dot[i];
            v[6 + i] = tau_b0[i];
        }
        out.push((t, v));
        // RK4 on the nominal closed loop
        let f = |e: &Vec3, ed: &Vec3, tt: f64| -> Result<Vec3> { Ok(eval(e, ed, tt)?.0) };
        let k1 = f(&eta, &eta_dot, t)?;
        let e2 = eta + eta_dot * (dt / 2.0);
        let d2 = eta_dot + k1 * (dt / 2.0);
        let k2 = f(&e2, &d2, t + dt / 2.0)?;
        let e3 = eta + d2 * (dt / 2.0);
        let d3 = eta_dot + k2 * (dt / 2.0);
        let k3 = f(&e3, &d3, t + dt / 2.0)?;
        let e4 = eta + d3 * dt;
        let d4 = eta_dot + k3 * dt;
        let k4 = f(&e4, &d4, t + dt)?;
        let ed_avg = (eta_dot + d2 * 2.0 + d3 * 2.0 + d4) / 6.0;
        let acc_avg = (k1 + k2 * 2.0 + k3 * 2.0 + k4) / 6.0;
        eta += ed_avg * dt;
        eta_dot += acc_avg * dt;
        t += dt;
    }
    Ok(out)
}

fn actual_wp_series(scenario: &Scenario, trace: &HybridTrace) -> Result<Vec<(f64, SVector<f64, 9>)>> {
    let mut out = Vec::with_capacity(trace.records.len());
    for r in trace.records.iter().filter(|r| r.mode == ModeTag::Wp) {
        let tau_b0 = wp_tau_b0_of_record(scenario, r)?;
        let mut v = SVector::<f64, 9>::zeros();
        for i in 0..3 {
            v[i] = r.q[3 + i];
            v[3 + i] = r.qd[3 + i];
            v[6 + i] = tau_b0[i];
        }
        out.push((r.t, v));
    }
    Ok(out)
}

fn theorem_weights(metric: &ManeuverMetric) -> SVector<f64, 9> {
    let mut w = SVector::<f64, 9>::zeros();
    for i in 0..3 {
        w[i] = metric.w_ang;
        w[3 + i] = metric.w_angvel;
        w[6 + i] = metric.w_moment;
    }
    w
}

/// Observer time-scale sweep: matched nominal/actual deviation plus the
/// fast-transient decay fit per epsilon.
pub fn sweep_epsilon(
    config: &ScenarioConfig,
    epsilons: &[f64],
    mode: ExecMode,
) -> Result<SweepReport> {
    if epsilons.is_empty() {
        return Err(Error::InvalidConfig("empty epsilon list".into()));
    }
    let s_max = resolve_s_max(config)?;
    let t_span = (config.trajectory.td_wp - config.trajectory.t0_wp).min(2.5);
    let metric = config.analysis.metric.clone();
    let weights = theorem_weights(&metric);

    let results: Vec<Result<SweepRow>> = map_indexed(mode, epsilons.len(), |i| {
        let eps = epsilons[i];
        let scenario = wp_only_scenario(config, eps, s_max, t_span);
        let trace = simulate(&scenario)?;
        let actual = actual_wp_series(&scenario, &trace)?;
        let nominal = nominal_wp_series(&scenario, t_span)?;
        let deviation = nominal_actual_deviation(&actual, &nominal, &weights)?;

        // decay study: perturbed minus unperturbed observer transient
        let mut perturbed = scenario.clone();
        perturbed.dob_perturbation = [
            0.02, 0.0, -0.015, 0.0, 0.01, 0.0, 0.05, 0.0, -0.04, 0.0, 0.03, 0.0,
        ];
        perturbed.t_end = (40.0 * eps).min(t_span);
        let mut unperturbed = scenario.clone();
        unperturbed.t_end = perturbed.t_end;
        let tr_p = simulate(&perturbed)?;
        let tr_u = simulate(&unperturbed)?;
        let n = tr_p.records.len().min(tr_u.records.len());
        let series: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let a = &tr_p.records[k];
                let b = &tr_u.records[k];
                let mut s = 0.0;
                for j in 0..6 {
                    s += (a.xi[j] - b.xi[j]).powi(2) + (a.zeta[j] - b.zeta[j]).powi(2);
                }
                (a.t, s.sqrt())
            })
            .collect();
        let decay = fast_decay_fit(&series, eps).ok();
        Ok(SweepRow {
            eps,
            deviation,
            decay,
        })
    });
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }

    let mut rate_ratios = Vec::new();
    for w in rows.windows(2) {
        if let (Some(a), Some(b)) = (w[0].decay, w[1].decay) {
            rate_ratios.push(b.rate_physical / a.rate_physical);
        }
    }
    let deviation_nonincreasing = rows
        .windows(2)
        .all(|w| w[1].deviation <= w[0].deviation * (1.0 + 1e-9) + 1e-12);
    let deviation_at_smallest = rows.last().map(|r| r.deviation).unwrap_or(f64::NAN);
    Ok(SweepReport {
        rows,
        rate_ratios,
        deviation_nonincreasing,
        deviation_at_smallest,
        theorem_sigma: config.analysis.theorem_sigma,
    })
}

/// Full Monte-Carlo transition-robustness check for the release edge.
pub fn montecarlo_transition(
    config: &ScenarioConfig,
    n_samples: usize,
    sigma: f64,
    delta_sigma: f64,
    mode: ExecMode,
) -> Result<ManeuverReport> {
    if n_samples < 100 {
        return Err(Error::SamplingBudgetExceeded(format!(
            "need at least 100 samples, got {n_samples}"
        )));
    }
    let s_max = resolve_s_max(config)?;
    let metric = config.analysis.metric.clone();

    // Nominal extended wire-pulling trace: guard disabled, run to the ramp
    // end so the trace drives sigma-deep into the firing region.
    let mut extended = config.build_with_s_max(s_max);
    extended.guards.f_th = f64::MAX;
    extended.force_separation_at = None;
    extended.t_end = config.trajectory.td_wp;
    extended.jump.bound = 0.0;
    let ext_trace = simulate(&extended)?;
    let guards = config.build_with_s_max(s_max).guards;

    let approach = check_approach_maneuver(&ext_trace.records, &guards, &metric, sigma);
    // The release edge is the only one leaving the first mode, so the
    // pre-switch clearance from unintended guards is unconditional.
    let single_wp = ManeuverVerdict {
        pass: true,
        margin: f64::INFINITY,
        detail: "no unintended outgoing edges".into(),
    };

    // Crossing index: first extended-trace sample inside the firing region.
    let crossing = ext_trace
        .records
        .iter()
        .position(|r| r.f_e[0] >= guards.f_th)
        .ok_or_else(|| {
            Error::SamplingBudgetExceeded("nominal trace never reaches the guard".into())
        })?;
    // Candidate guard-region segment: from the crossing until the terminal
    // sample (all inside the firing region along the ramp).
    let segment: Vec<&TraceRecord> = ext_trace.records[crossing..]
        .iter()
        .filter(|r| r.f_e[0] >= guards.f_th)
        .collect();
    if segment.is_empty() {
        return Err(Error::SamplingBudgetExceeded(
            "empty guard-region segment".into(),
        ));
    }

    let scenario = config.build_with_s_max(s_max);
    let anchor = scenario.anchor();
    let plant = scenario.plant.clone();

    // Sample reset images from the sigma-tube around the segment.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut samples: Vec<SVector<f64, 16>> = Vec::with_capacity(n_samples);
    let mut sample_states: Vec<(FreeState, f64)> = Vec::with_capacity(n_samples);
    let mut attempts = 0usize;
    while samples.len() < n_samples {
        attempts += 1;
        if attempts > 50 * n_samples {
            return Err(Error::SamplingBudgetExceeded(format!(
                "{} of {} reset samples after {} attempts",
                samples.len(),
                n_samples,
                attempts
            )));
        }
        let rec = segment[rng.random_range(0..segment.len())];
        let mut cs = record_to_constrained(rec, anchor);
        // state perturbation within the sigma-tube (attitude and rates)
        for i in 0..3 {
            cs.r[i] += rng.random_range(-0.5..0.5) * sigma * 0.5 / metric.w_ang.max(1e-9);
            cs.rdot[i] += rng.random_range(-0.5..0.5) * sigma * 0.5 / metric.w_angvel.max(1e-9);
        }
        let u = crate::dynamics::ControlInput::new(
            rec.thrust,
            Vec3::from_column_slice(&rec.tau_b),
            Gamma::new(rec.tau_gamma[0], rec.tau_gamma[1]),
        );
        let Ok(fe) = crate::dynamics::end_effector_force(&plant, &cs, &u, &QVec::zeros()) else {
            continue;
        };
        if fe.exact.x < guards.f_th {
            continue;
        }
        let jump = scenario.jump.sample(&mut rng);
        let Ok(post) = reset_wp_st(&plant, &cs, &jump) else {
            continue;
        };
        let mut v = SVector::<f64, 16>::zeros();
        for i in 0..8 {
            v[i] = post.q[i];
            v[8 + i] = post.qdot[i];
        }
        samples.push(v);
        sample_states.push((post, rec.t));
    }

    let centers = build_coverage_set(&samples, delta_sigma, &metric);
    let coverage_verified = verify_coverage(&samples, &centers, delta_sigma, &metric);

    // Post-traces from every coverage center: must reach free flight inside
    // the envelope without approaching the exit guard early.
    let post_results: Vec<(usize, Option<String>)> =
        map_indexed(mode, centers.len(), |ci| {
            let idx = centers[ci];
            let (start, t0) = sample_states[idx];
            let mut sc = scenario.clone();
            sc.t_end = t0 + sc.traj.st_window + 3.0;
            sc.seed = scenario.seed.wrapping_add(idx as u64);
            match simulate_from_st(&sc, start, t0) {
                Err(e) => (idx, Some(format!("simulation error: {e}"))),
                Ok(tr) => {
                    let fail = match &tr.outcome {
                        Outcome::EnvelopeExit { t, what } => {
                            Some(format!("envelope exit at t={t:.3}: {what}"))
                        }
                        _ if tr.summary.ff_entry_time.is_none() => {
                            Some("never reached free flight".into())
                        }
                        _ => {
                            let t_d_st = t0 + sc.traj.st_window;
                            let v = crate::analysis::maneuver::check_single_maneuver(
                                &tr.records
                                    .iter()
                                    .filter(|r| r.mode == ModeTag::St && r.t < t_d_st)
                                    .cloned()
                                    .collect::<Vec<_>>(),
                                ModeTag::St,
                                t_d_st,
                                &guards,
                                &metric,
                                sigma,
                            );
                            if v.pass {
                                None
                            } else {
                                Some(format!("stabilizing window grazes exit guard: {}", v.detail))
                            }
                        }
                    };
                    (idx, fail)
                }
            }
        });
    let post_trace_failures: Vec<(usize, String)> = post_results
        .into_iter()
        .filter_map(|(i, f)| f.map(|m| (i, m)))
        .collect();

    Ok(crate::analysis::maneuver::check_transition_maneuver(
        single_wp,
        approach,
        centers.len(),
        coverage_verified,
        post_trace_failures,
        sigma,
        delta_sigma,
        samples.len(),
    ))
}

pub fn maneuver_report_text(r: &ManeuverReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("transition_verdict = {}\n", if r.pass { "PASS" } else { "FAIL" }));
    out.push_str(&format!("sigma = {}\ndelta_sigma = {}\n", r.sigma, r.delta_sigma));
    out.push_str(&format!(
        "approach = {} (margin {:.4}; {})\n",
        if r.approach.pass { "pass" } else { "fail" },
        r.approach.margin,
        r.approach.detail
    ));
    out.push_str(&format!(
        "pre_switch_clearance = {} (margin {})\n",
        if r.single_wp.pass { "pass" } else { "fail" },
        r.single_wp.margin
    ));
    out.push_str(&format!(
        "reset_samples = {}\ncoverage_centers = {}\ncoverage_verified = {}\n",
        r.samples, r.coverage_centers, r.coverage_verified
    ));
    if r.post_trace_failures.is_empty() {
        out.push_str("post_traces = all pass\n");
    } else {
        for (i, msg) in &r.post_trace_failures {
            out.push_str(&format!("post_trace_failure center={i}: {msg}\n"));
        }
    }
    out
}

/// Side-by-side DOB versus nominal-only comparison under the configured
/// mismatch and disturbance. The baseline is forced to separate at the same
/// instant the DOB run did, mirroring a manually triggered switch.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub dob: RunArtifacts,
    pub baseline: RunArtifacts,
    pub dob_completed: bool,
    pub baseline_crashed: bool,
    /// Sup deviation between the two runs over the maneuver metric.
    pub sup_deviation: f64,
}

pub fn compare_baseline(config: &ScenarioConfig) -> Result<ComparisonReport> {
    let dob = run(config)?;
    let mut base_cfg = config.clone();
    base_cfg.dob.enabled = false;
    if base_cfg.force_separation_at.is_none() {
        base_cfg.force_separation_at = dob.trace.summary.separation_time;
    }
    let baseline = run(&base_cfg)?;

    let metric = config.analysis.metric.clone();
    let to_series = |tr: &HybridTrace| -> Vec<(f64, SVector<f64, 22>)> {
        tr.records
            .iter()
            .map(|r| (r.t, metric.maneuver_point(r)))
            .collect()
    };
    let wa = metric.maneuver_weights();
    let a = to_series(&dob.trace);
    let b = to_series(&baseline.trace);
    let n = a.len().min(b.len());
    let sup_deviation = nominal_actual_deviation(&a[..n], &b[..n], &wa).unwrap_or(f64::NAN);

    Ok(ComparisonReport {
        dob_completed: matches!(dob.trace.outcome, Outcome::Completed),
        baseline_crashed: matches!(baseline.trace.outcome, Outcome::EnvelopeExit { .. }),
        sup_deviation,
        dob,
        baseline,
    })
}

pub fn comparison_text(r: &ComparisonReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "dob_outcome = {:?}\nbaseline_outcome = {:?}\n",
        r.dob.trace.outcome, r.baseline.trace.outcome
    ));
    out.push_str(&format!(
        "dob_peak_wp_pitch_error_rad = {:.6}\nbaseline_peak_wp_pitch_error_rad = {:.6}\n",
        r.dob.trace.summary.peak_wp_pitch_error, r.baseline.trace.summary.peak_wp_pitch_error
    ));
    out.push_str(&format!(
        "dob_post_separation_attitude_rad = {:.6}\nbaseline_post_separation_attitude_rad = {:.6}\n",
        r.dob.trace.summary.peak_post_separation_attitude,
        r.baseline.trace.summary.peak_post_separation_attitude
    ));
    out.push_str(&format!("sup_deviation = {:.6e}\n", r.sup_deviation));
    out
}

/// Per-panel CSV extracts plus a plain-text plotting script for a trace.
pub fn emit_plots(trace_path: &Path, out_dir: &Path) -> Result<Vec<String>> {
    let (_, records) = crate::trace::read_csv(trace_path)?;
    if records.is_empty() {
        return Err(Error::BadTrace("empty trace".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let panels: [(&str, usize, Option<usize>); 6] = [
        ("p_x", 0, None),
        ("p_y", 1, None),
        ("p_z", 2, None),
        ("phi", 3, Some(0)),
        ("theta", 4, Some(1)),
        ("psi", 5, Some(2)),
    ];
    let home = records[0].q;
    let mut written = Vec::new();
    for (name, qi, eta_i) in panels {
        let mut text = String::from("t,value,desired,mode\n");
        for r in &records {
            let desired = match eta_i {
                Some(k) => r.eta_d[k],
                None => home[qi],
            };
            text.push_str(&format!(
                "{},{},{},{}\n",
                r.t,
                r.q[qi],
                desired,
                r.mode.as_str()
            ));
        }
        let path = out_dir.join(format!("panel_{name}.csv"));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(format!("panel_{name}.csv"));
    }

    // mode boundaries from the trace itself
    let mut boundaries = Vec::new();
    for w in records.windows(2) {
        if w[0].mode != w[1].mode {
            boundaries.push((w[1].t, w[0].mode.as_str(), w[1].mode.as_str()));
        }
    }
    let mut script = String::from(
        "# Plot script: six panels of the mission history.\n\
         # Each panel_<name>.csv has columns t,value,desired,mode.\n\
         set datafile separator ','\n",
    );
    for (t, from, to) in &boundaries {
        script.push_str(&format!("# mode change {from} -> {to} at t = {t}\n"));
        script.push_str(&format!(
            "set arrow from {t}, graph 0 to {t}, graph 1 nohead dashtype 2\n"
        ));
    }
    script.push_str(
        "set key autotitle columnhead\n\
         do for [name in \"p_x p_y p_z phi theta psi\"] {\n\
           set output 'panel_'.name.'.png'\n\
           set terminal pngcairo size 800,400\n\
           plot 'panel_'.name.'.csv' using 1:2 with lines title name, \\\n\
                '' using 1:3 with lines dashtype 2 title 'desired'\n\
         }\n",
    );
    let script_path = out_dir.join("plot.gp");
    std::fs::write(&script_path, script).map_err(|e| Error::io(&script_path, e))?;
    written.push("plot.gp".into());
    Ok(written)
}

/// Sup deviation between two runs of the same scenario (used by the
/// determinism and matched-baseline checks).
pub fn trace_sup_deviation(a: &HybridTrace, b: &HybridTrace, metric: &ManeuverMetric) -> f64 {
    let wa = metric.maneuver_weights();
    let sa: Vec<(f64, SVector<f64, 22>)> = a
        .records
        .iter()
        .map(|r| (r.t, metric.maneuver_point(r)))
        .collect();
    let sb: Vec<(f64, SVector<f64, 22>)> = b
        .records
        .iter()
        .map(|r| (r.t, metric.maneuver_point(r)))
        .collect();
    let n = sa.len().min(sb.len());
    nominal_actual_deviation(&sa[..n], &sb[..n], &wa).unwrap_or(f64::NAN)
}
