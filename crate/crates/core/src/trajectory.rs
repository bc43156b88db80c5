//! Per-mode reference generation: wire-pulling pitch ramp, stabilizing
//! quadratic attitude recovery, free-flight return to the start pose.

use crate::kinematics::Gamma;
use crate::{Error, Result, Vec3};
use serde::{Deserialize, Serialize};

/// Timing and shape of the mission references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajConfig {
    /// Maximum pitch magnitude of the wire-pulling ramp (rad).
    pub theta_m: f64,
    /// Wire-pulling window start (s).
    pub t0_wp: f64,
    /// Wire-pulling window end (s); the ramp reaches `-theta_m` here.
    pub td_wp: f64,
    /// Stabilizing window length (s).
    pub st_window: f64,
}

impl TrajConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_m > 0.0 && self.theta_m < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidConfig(format!(
                "theta_m = {} must be in (0, pi/2)",
                self.theta_m
            )));
        }
        if self.td_wp <= self.t0_wp {
            return Err(Error::InvalidConfig("td_wp must exceed t0_wp".into()));
        }
        if self.st_window <= 1e-4 {
            return Err(Error::InvalidConfig("st_window too short".into()));
        }
        Ok(())
    }
}

/// Reference signals consumed by the controllers. Fields not defined by the
/// active mode hold the values latched at mode entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub eta_d: Vec3,
    pub eta_d_dot: Vec3,
    pub eta_d_ddot: Vec3,
    pub pos_d: Vec3,
    pub vel_d: Vec3,
    pub yaw_d: f64,
    pub gamma_d: Gamma,
    pub gamma_d_dot: Gamma,
}

impl Reference {
    pub fn hold(pos: Vec3, yaw: f64, gamma: Gamma) -> Self {
        Self {
            eta_d: Vec3::zeros(),
            eta_d_dot: Vec3::zeros(),
            eta_d_ddot: Vec3::zeros(),
            pos_d: pos,
            vel_d: Vec3::zeros(),
            yaw_d: yaw,
            gamma_d: gamma,
            gamma_d_dot: Gamma::zeros(),
        }
    }
}

/// Wire-pulling reference: pitch ramps linearly from 0 to `-theta_m` over
/// the window, roll and yaw stay zero; after the window the reference
/// returns to level.
pub fn wp_reference(t: f64, cfg: &TrajConfig, home: &Reference) -> Reference {
    let mut r = *home;
    if t >= cfg.t0_wp && t < cfg.td_wp {
        let slope = -cfg.theta_m / (cfg.td_wp - cfg.t0_wp);
        r.eta_d = Vec3::new(0.0, slope * (t - cfg.t0_wp), 0.0);
        r.eta_d_dot = Vec3::new(0.0, slope, 0.0);
    } else {
        r.eta_d = Vec3::zeros();
        r.eta_d_dot = Vec3::zeros();
    }
    r.eta_d_ddot = Vec3::zeros();
    r
}

/// Per-axis quadratic coefficients of the stabilizing reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StCoefficients {
    /// `[c0, c1, c2]` per axis; the polynomial is evaluated in absolute time.
    pub c: [Vec3; 3],
    pub t0: f64,
    pub td: f64,
}

/// Solves the three boundary conditions
/// `eta_d(t0) = eta0`, `eta_d_dot(t0) = eta0_dot`, `eta_d(td) = 0`
/// for the quadratic `c2 t^2 + c1 t + c0` on each axis.
pub fn solve_st_coefficients(
    eta0: &Vec3,
    eta0_dot: &Vec3,
    t0: f64,
    td: f64,
) -> Result<StCoefficients> {
    let w = td - t0;
    if w < 1e-4 {
        return Err(Error::DegenerateWindow { width: w });
    }
    let mut c0 = Vec3::zeros();
    let mut c1 = Vec3::zeros();
    let mut c2 = Vec3::zeros();
    for i in 0..3 {
        let a2 = -(eta0[i] + eta0_dot[i] * w) / (w * w);
        let a1 = eta0_dot[i] - 2.0 * a2 * t0;
        let a0 = eta0[i] - a1 * t0 - a2 * t0 * t0;
        c0[i] = a0;
        c1[i] = a1;
        c2[i] = a2;
    }
    Ok(StCoefficients {
        c: [c0, c1, c2],
        t0,
        td,
    })
}

/// Stabilizing reference: the solved quadratic on `[t0, td)`, level after;
/// position fields (altitude hold) are carried in `hold`.
pub fn st_reference(t: f64, coeffs: &StCoefficients, hold: &Reference) -> Reference {
    let mut r = *hold;
    if t < coeffs.td {
        let [c0, c1, c2] = coeffs.c;
        r.eta_d = c2 * (t * t) + c1 * t + c0;
        r.eta_d_dot = c2 * (2.0 * t) + c1;
        r.eta_d_ddot = c2 * 2.0;
    } else {
        r.eta_d = Vec3::zeros();
        r.eta_d_dot = Vec3::zeros();
        r.eta_d_ddot = Vec3::zeros();
    }
    r
}

/// Free-flight reference: constant return to the pose latched at the start
/// of the wire-pulling phase.
pub fn ff_reference(_t: f64, home: &Reference) -> Reference {
    let mut r = *home;
    r.eta_d = Vec3::new(0.0, 0.0, home.yaw_d);
    r.eta_d_dot = Vec3::zeros();
    r.eta_d_ddot = Vec3::zeros();
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> TrajConfig {
        TrajConfig {
            theta_m: 20.0_f64.to_radians(),
            t0_wp: 0.0,
            td_wp: 4.0,
            st_window: 0.08,
        }
    }

    fn home() -> Reference {
        Reference::hold(Vec3::new(1.0, 0.5, 1.2), 0.3, Gamma::zeros())
    }

    #[test]
    fn ramp_starts_level() {
        let r = wp_reference(0.0, &cfg(), &home());
        assert_eq!(r.eta_d, Vec3::zeros());
    }

    #[test]
    fn ramp_midpoint_is_half_theta_m() {
        let r = wp_reference(2.0, &cfg(), &home());
        assert_relative_eq!(r.eta_d.y, -10.0_f64.to_radians(), epsilon = 1e-12);
        assert_eq!(r.eta_d.x, 0.0);
        assert_eq!(r.eta_d.z, 0.0);
    }

    #[test]
    fn ramp_returns_level_after_window() {
        let r = wp_reference(4.0, &cfg(), &home());
        assert_eq!(r.eta_d, Vec3::zeros());
        let r = wp_reference(7.5, &cfg(), &home());
        assert_eq!(r.eta_d, Vec3::zeros());
    }

    #[test]
    fn ramp_is_monotone_nonincreasing() {
        let c = cfg();
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let t = c.t0_wp + (c.td_wp - c.t0_wp) * (i as f64) / 100.0;
            let r = wp_reference(t, &c, &home());
            assert!(r.eta_d.y <= prev);
            prev = r.eta_d.y;
        }
    }

    #[test]
    fn st_coefficients_zero_state_are_zero() {
        let c = solve_st_coefficients(&Vec3::zeros(), &Vec3::zeros(), 0.0, 0.08).unwrap();
        for v in c.c {
            assert_eq!(v, Vec3::zeros());
        }
    }

    #[test]
    fn st_coefficients_example_values() {
        // eta(0) = 0.1 rad, rest, window 0.08 s: c = (0.1, 0, -15.625).
        let c = solve_st_coefficients(&Vec3::new(0.0, 0.1, 0.0), &Vec3::zeros(), 0.0, 0.08)
            .unwrap();
        assert_relative_eq!(c.c[0].y, 0.1, epsilon = 1e-12);
        assert_relative_eq!(c.c[1].y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(c.c[2].y, -15.625, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_window_rejected() {
        assert!(matches!(
            solve_st_coefficients(&Vec3::zeros(), &Vec3::zeros(), 1.0, 1.0 + 1e-5),
            Err(Error::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn st_reference_terminal_value_is_zero() {
        let c = solve_st_coefficients(
            &Vec3::new(0.05, -0.2, 0.01),
            &Vec3::new(0.3, 1.0, 0.0),
            2.8,
            2.88,
        )
        .unwrap();
        let r = st_reference(2.88 - 1e-12, &c, &home());
        assert!(r.eta_d.amax() < 1e-9);
    }

    #[test]
    fn ff_reference_is_constant_latch() {
        let h = home();
        for t in [0.0, 3.0, 100.0] {
            let r = ff_reference(t, &h);
            assert_eq!(r.pos_d, h.pos_d);
            assert_eq!(r.yaw_d, h.yaw_d);
        }
    }

    proptest! {
        #[test]
        fn st_boundary_conditions_hold(
            e0 in -0.5..0.5f64, e1 in -0.5..0.5f64, e2 in -0.5..0.5f64,
            d0 in -3.0..3.0f64, d1 in -3.0..3.0f64, d2 in -3.0..3.0f64,
            t0 in 0.0..10.0f64,
        ) {
            let td = t0 + 0.08;
            let eta0 = Vec3::new(e0, e1, e2);
            let eta0_dot = Vec3::new(d0, d1, d2);
            let c = solve_st_coefficients(&eta0, &eta0_dot, t0, td).unwrap();
            let h = home();
            let r0 = st_reference(t0, &c, &h);
            prop_assert!((r0.eta_d - eta0).amax() < 1e-10);
            prop_assert!((r0.eta_d_dot - eta0_dot).amax() < 1e-10);
            let rt = st_reference(td - 1e-13, &c, &h);
            prop_assert!(rt.eta_d.amax() < 1e-9);
        }
    }
}
