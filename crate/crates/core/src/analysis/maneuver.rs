//! Robust-maneuver checks over completed traces: clearance of nominal
//! maneuvers from guard sets, terminal containment of the approach
//! maneuver, greedy coverage of sampled reset outcomes, and the composed
//! transition verdict.
//!
//! Maneuvers live in the product of state and input; distances use a
//! weighted Euclidean metric with per-unit weights. Guard sets are realized
//! as sub-level sets of margin functions; distance to a guard is the margin
//! scaled by a gradient estimate of the margin function in metric
//! coordinates. The time condition of the `ST -> FF` guard is handled by
//! slices: at times where it fails the guard slice is empty and the
//! distance is infinite.

use crate::hybrid::GuardConfig;
use crate::trace::{ModeTag, TraceRecord};
use crate::{Error, Result};
use nalgebra::SVector;
use serde::{Deserialize, Serialize};

/// Diagonal weights of the maneuver metric, by unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeuverMetric {
    /// rad
    pub w_ang: f64,
    /// rad/s
    pub w_angvel: f64,
    /// m
    pub w_pos: f64,
    /// m/s
    pub w_vel: f64,
    /// N
    pub w_force: f64,
    /// N m
    pub w_moment: f64,
}

impl Default for ManeuverMetric {
    fn default() -> Self {
        Self {
            w_ang: 1.0,
            w_angvel: 0.3,
            w_pos: 1.0,
            w_vel: 0.3,
            w_force: 0.1,
            w_moment: 1.0,
        }
    }
}

impl ManeuverMetric {
    /// Weights of the 22-dimensional maneuver vector
    /// `[p(3); eta(3); gamma(2); pdot(3); etadot(3); gammadot(2); T; tau_b(3); tau_g(2)]`.
    pub fn maneuver_weights(&self) -> SVector<f64, 22> {
        let mut w = SVector::<f64, 22>::zeros();
        for i in 0..3 {
            w[i] = self.w_pos;
            w[3 + i] = self.w_ang;
            w[8 + i] = self.w_vel;
            w[11 + i] = self.w_angvel;
            w[17 + i] = self.w_moment;
        }
        w[6] = self.w_ang;
        w[7] = self.w_ang;
        w[14] = self.w_angvel;
        w[15] = self.w_angvel;
        w[16] = self.w_force;
        w[20] = self.w_moment;
        w[21] = self.w_moment;
        w
    }

    /// Weights of the 16-dimensional state part only.
    pub fn state_weights(&self) -> SVector<f64, 16> {
        let full = self.maneuver_weights();
        let mut w = SVector::<f64, 16>::zeros();
        for i in 0..8 {
            w[i] = full[i];
            w[8 + i] = full[8 + i];
        }
        w
    }

    pub fn maneuver_point(&self, r: &TraceRecord) -> SVector<f64, 22> {
        let mut v = SVector::<f64, 22>::zeros();
        for i in 0..8 {
            v[i] = r.q[i];
            v[8 + i] = r.qd[i];
        }
        v[16] = r.thrust;
        for i in 0..3 {
            v[17 + i] = r.tau_b[i];
        }
        v[20] = r.tau_gamma[0];
        v[21] = r.tau_gamma[1];
        v
    }

    pub fn state_point(r: &TraceRecord) -> SVector<f64, 16> {
        let mut v = SVector::<f64, 16>::zeros();
        for i in 0..8 {
            v[i] = r.q[i];
            v[8 + i] = r.qd[i];
        }
        v
    }

    pub fn state_distance(&self, a: &SVector<f64, 16>, b: &SVector<f64, 16>) -> f64 {
        let w = self.state_weights();
        let mut s = 0.0;
        for i in 0..16 {
            let d = (a[i] - b[i]) * w[i];
            s += d * d;
        }
        s.sqrt()
    }
}

/// Metric distance from a wire-pulling sample to the release guard
/// `{f_e_x >= f_th}`. The margin uses the exact logged reaction; the
/// gradient scale comes from the quasi-static force relation.
pub fn distance_to_wp_st_guard(
    r: &TraceRecord,
    guards: &GuardConfig,
    metric: &ManeuverMetric,
) -> f64 {
    let margin = guards.f_th - r.f_e[0];
    if margin <= 0.0 {
        return 0.0;
    }
    let theta = r.q[4];
    // d f / d theta = -T cos(theta), d f / d T = -sin(theta); metric scaling
    // divides each partial by its coordinate weight.
    let g_theta = (r.thrust * theta.cos()) / metric.w_ang;
    let g_thrust = theta.sin() / metric.w_force;
    let grad = (g_theta * g_theta + g_thrust * g_thrust).sqrt().max(1e-9);
    margin / grad
}

/// Metric distance from a sample to the `ST -> FF` guard slice at its time.
/// Before `t_d_st` the slice is empty and the distance is infinite.
pub fn distance_to_st_ff_guard(
    r: &TraceRecord,
    t_d_st: f64,
    guards: &GuardConfig,
    metric: &ManeuverMetric,
) -> f64 {
    if r.t < t_d_st {
        return f64::INFINITY;
    }
    let eta_norm = (r.q[3] * r.q[3] + r.q[4] * r.q[4] + r.q[5] * r.q[5]).sqrt();
    ((eta_norm - guards.delta_eta) * metric.w_ang).max(0.0)
}

/// Verdict of one maneuver check with its margin.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverVerdict {
    pub pass: bool,
    /// Smallest observed distance to a forbidden guard (infinite when no
    /// outgoing guard can fire in the window).
    pub margin: f64,
    pub detail: String,
}

/// A maneuver is sigma-robustly single when its trace keeps more than
/// `sigma` distance from every outgoing guard over the window.
pub fn check_single_maneuver(
    records: &[TraceRecord],
    mode: ModeTag,
    t_d_st: f64,
    guards: &GuardConfig,
    metric: &ManeuverMetric,
    sigma: f64,
) -> ManeuverVerdict {
    let mut min_dist = f64::INFINITY;
    for r in records.iter().filter(|r| r.mode == mode) {
        let d = match mode {
            ModeTag::Wp => distance_to_wp_st_guard(r, guards, metric),
            ModeTag::St => distance_to_st_ff_guard(r, t_d_st, guards, metric),
            // no outgoing edges from free flight
            ModeTag::Ff => f64::INFINITY,
        };
        min_dist = min_dist.min(d);
    }
    ManeuverVerdict {
        pass: min_dist > sigma,
        margin: min_dist,
        detail: format!("min guard distance {min_dist:.4} vs sigma {sigma:.4}"),
    }
}

/// Approach-maneuver conditions for `WP -> ST` on a trace extended past the
/// guard surface:
/// (a) clearance from other outgoing guards (vacuous: the release edge is
///     the only one),
/// (b) the terminal sample sits at least `sigma` inside the firing region.
pub fn check_approach_maneuver(
    extended_wp: &[TraceRecord],
    guards: &GuardConfig,
    metric: &ManeuverMetric,
    sigma: f64,
) -> ManeuverVerdict {
    let Some(last) = extended_wp.iter().rev().find(|r| r.mode == ModeTag::Wp) else {
        return ManeuverVerdict {
            pass: false,
            margin: 0.0,
            detail: "no wire-pulling samples".into(),
        };
    };
    let inside = last.f_e[0] - guards.f_th;
    if inside < 0.0 {
        return ManeuverVerdict {
            pass: false,
            margin: 0.0,
            detail: format!(
                "terminal sample not in firing region (margin {inside:.4} N)"
            ),
        };
    }
    // Depth inside the firing region, in metric units.
    let theta = last.q[4];
    let g_theta = (last.thrust * theta.cos()) / metric.w_ang;
    let g_thrust = theta.sin() / metric.w_force;
    let grad = (g_theta * g_theta + g_thrust * g_thrust).sqrt().max(1e-9);
    let depth = inside / grad;
    ManeuverVerdict {
        pass: depth >= sigma,
        margin: depth,
        detail: format!("terminal firing depth {depth:.4} vs sigma {sigma:.4}"),
    }
}

/// Greedy maximum-coverage covering of reset-image samples by
/// `delta_sigma`-balls centered on samples: each round picks, among the
/// samples that cover the first still-uncovered one, the center covering
/// the most uncovered samples.
pub fn build_coverage_set(
    samples: &[SVector<f64, 16>],
    delta_sigma: f64,
    metric: &ManeuverMetric,
) -> Vec<usize> {
    let mut centers: Vec<usize> = Vec::new();
    let mut covered = vec![false; samples.len()];
    loop {
        let Some(first) = covered.iter().position(|&c| !c) else {
            break;
        };
        let mut best = first;
        let mut best_count = 0usize;
        for (cand, s) in samples.iter().enumerate() {
            if metric.state_distance(s, &samples[first]) > delta_sigma {
                continue;
            }
            let count = samples
                .iter()
                .zip(covered.iter())
                .filter(|(x, &cov)| !cov && metric.state_distance(s, x) <= delta_sigma)
                .count();
            if count > best_count {
                best = cand;
                best_count = count;
            }
        }
        centers.push(best);
        for (j, s) in samples.iter().enumerate() {
            if !covered[j] && metric.state_distance(&samples[best], s) <= delta_sigma {
                covered[j] = true;
            }
        }
    }
    centers
}

/// Verifies the coverage property literally: every sample within
/// `delta_sigma` of some center.
pub fn verify_coverage(
    samples: &[SVector<f64, 16>],
    centers: &[usize],
    delta_sigma: f64,
    metric: &ManeuverMetric,
) -> bool {
    samples.iter().all(|s| {
        centers
            .iter()
            .any(|&c| metric.state_distance(s, &samples[c]) <= delta_sigma + 1e-12)
    })
}

/// Composed transition verdict: the approach must pass and every
/// center-initiated post-trace must be a sigma-robust single maneuver over
/// the stabilizing window and reach free flight without leaving the
/// envelope.
#[derive(Debug, Clone)]
pub struct ManeuverReport {
    pub approach: ManeuverVerdict,
    pub single_wp: ManeuverVerdict,
    pub coverage_centers: usize,
    pub coverage_verified: bool,
    pub post_trace_failures: Vec<(usize, String)>,
    pub sigma: f64,
    pub delta_sigma: f64,
    pub samples: usize,
    pub pass: bool,
}

pub fn check_transition_maneuver(
    single_wp: ManeuverVerdict,
    approach: ManeuverVerdict,
    coverage_centers: usize,
    coverage_verified: bool,
    post_trace_failures: Vec<(usize, String)>,
    sigma: f64,
    delta_sigma: f64,
    samples: usize,
) -> ManeuverReport {
    let pass = single_wp.pass
        && approach.pass
        && coverage_verified
        && post_trace_failures.is_empty();
    ManeuverReport {
        approach,
        single_wp,
        coverage_centers,
        coverage_verified,
        post_trace_failures,
        sigma,
        delta_sigma,
        samples,
        pass,
    }
}

/// Sup over time of the weighted deviation between two sampled signal
/// series; the second series is linearly interpolated onto the first one's
/// times. Both series must share their initial sample time.
pub fn nominal_actual_deviation<const N: usize>(
    actual: &[(f64, SVector<f64, N>)],
    nominal: &[(f64, SVector<f64, N>)],
    weights: &SVector<f64, N>,
) -> Result<f64> {
    if actual.len() < 2 || nominal.len() < 2 {
        return Err(Error::TraceMisaligned("series too short".into()));
    }
    if (actual[0].0 - nominal[0].0).abs() > 1e-9 {
        return Err(Error::TraceMisaligned(format!(
            "start times differ: {} vs {}",
            actual[0].0, nominal[0].0
        )));
    }
    let t_end = nominal.last().unwrap().0;
    let mut sup = 0.0_f64;
    let mut j = 0usize;
    for &(t, va) in actual {
        if t > t_end + 1e-9 {
            break;
        }
        while j + 1 < nominal.len() && nominal[j + 1].0 < t {
            j += 1;
        }
        let (t0, v0) = nominal[j];
        let (t1, v1) = nominal[(j + 1).min(nominal.len() - 1)];
        let vb = if t1 > t0 {
            let a = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            // exact endpoints avoid interpolation rounding on shared grids
            if a == 0.0 {
                v0
            } else if a == 1.0 {
                v1
            } else {
                v0 + (v1 - v0) * a
            }
        } else {
            v0
        };
        let mut s = 0.0;
        for i in 0..N {
            let d = (va[i] - vb[i]) * weights[i];
            s += d * d;
        }
        sup = sup.max(s.sqrt());
    }
    Ok(sup)
}
