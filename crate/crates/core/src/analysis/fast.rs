//! Fast-variable coordinates of the observer loop, the quasi-steady
//! compensation, the sector condition that makes it unique, and the
//! exponential-decay fit of the fast transient.

use crate::dob::{saturation_pi, DobParams, DobState};
use crate::spatial::spectral_norm;
use crate::{Error, Mat3, Result, Vec3};
use nalgebra::SVector;

/// Fast coordinates of the two filter banks, packed per axis.
#[derive(Debug, Clone, Copy)]
pub struct FastVars {
    pub xi: SVector<f64, 6>,
    pub zeta: SVector<f64, 6>,
}

impl FastVars {
    pub fn norm(&self) -> f64 {
        (self.xi.norm_squared() + self.zeta.norm_squared()).sqrt()
    }
}

/// Change of variables isolating the observer's fast transient:
///
/// ```text
/// xi_{i,1}   = q_{i,1}/eps + (a1/a0) q_{i,2} - eta_i/eps
/// xi_{i,2}   = q_{i,2} - etadot_i
/// zeta_[1]   = p_[1] - Lambda qdot_[2]
/// zeta_{i,2} = eps (pdot_{i,1} - qddot_{i,2})
/// ```
pub fn fast_variables(
    dob: &DobState,
    params: &DobParams,
    eta: &Vec3,
    eta_dot: &Vec3,
    lambda: &Mat3,
) -> FastVars {
    let mut xi = SVector::<f64, 6>::zeros();
    for i in 0..3 {
        xi[2 * i] = dob.q[2 * i] / params.eps + (params.a1[i] / params.a0[i]) * dob.q[2 * i + 1]
            - eta[i] / params.eps;
        xi[2 * i + 1] = dob.q[2 * i + 1] - eta_dot[i];
    }
    let zeta1 = dob.p_1() - lambda * dob.q_dot_2(params, eta);
    let zeta2 = (dob.p_dot_1() - dob.q_ddot_2(params, eta, eta_dot)) * params.eps;
    let mut zeta = SVector::<f64, 6>::zeros();
    for i in 0..3 {
        zeta[2 * i] = zeta1[i];
        zeta[2 * i + 1] = zeta2[i];
    }
    FastVars { xi, zeta }
}

/// Inverts the `xi` block back to the measurement-filter states.
pub fn invert_fast_xi(
    xi: &SVector<f64, 6>,
    params: &DobParams,
    eta: &Vec3,
    eta_dot: &Vec3,
) -> SVector<f64, 6> {
    let mut q = SVector::<f64, 6>::zeros();
    for i in 0..3 {
        let q2 = xi[2 * i + 1] + eta_dot[i];
        let q1 = params.eps * (xi[2 * i] - (params.a1[i] / params.a0[i]) * q2) + eta[i];
        q[2 * i] = q1;
        q[2 * i + 1] = q2;
    }
    q
}

/// Actual and nominal attitude models at one state, with the observer gain
/// and the nominal input that together define the mismatch compensation.
#[derive(Debug, Clone)]
pub struct WpMismatchContext {
    pub f_eta: Vec3,
    pub g_eta: Mat3,
    pub f_bar: Vec3,
    pub g_bar: Mat3,
    pub lambda: Mat3,
    pub tau_b0: Vec3,
}

impl WpMismatchContext {
    /// `Lambda G Gbar^-1 Lambda^-1`, the loop matrix of the sector bound.
    pub fn loop_matrix(&self) -> Result<Mat3> {
        let gbar_inv = self.g_bar.try_inverse().ok_or_else(|| Error::NonInvertible {
            context: "gbar".into(),
        })?;
        let lambda_inv = self.lambda.try_inverse().ok_or_else(|| Error::NonInvertible {
            context: "lambda".into(),
        })?;
        Ok(self.lambda * self.g_eta * gbar_inv * lambda_inv)
    }
}

/// Quasi-steady compensation and whether it stays inside the identity
/// region of the saturation.
#[derive(Debug, Clone, Copy)]
pub struct UstarReport {
    pub u_star: Vec3,
    /// False when `u_star` leaves the identity region of `Pi`, which
    /// invalidates the closed-form expression.
    pub in_identity_region: bool,
}

/// Closed-form quasi-steady value of the saturated signal:
/// `u* = Lambda Gbar G^-1 ((Fbar - F) + (Gbar - G) tau_b0)`.
pub fn quasi_steady_ustar(ctx: &WpMismatchContext, s_max: &[f64; 3]) -> Result<UstarReport> {
    let g_inv = ctx.g_eta.try_inverse().ok_or_else(|| Error::NonInvertible {
        context: "g_eta".into(),
    })?;
    let v = (ctx.f_bar - ctx.f_eta) + (ctx.g_bar - ctx.g_eta) * ctx.tau_b0;
    let u_star = ctx.lambda * ctx.g_bar * g_inv * v;
    let in_identity_region = (0..3).all(|i| u_star[i].abs() <= 0.9 * s_max[i]);
    Ok(UstarReport {
        u_star,
        in_identity_region,
    })
}

/// Residual of the fixed-point equation the quasi-steady value satisfies:
/// `u* - Lambda w - (I - Lambda G Gbar^-1 Lambda^-1) Pi(u*)`, where `w`
/// carries the mismatch including the compensated input. Zero (to rounding)
/// whenever `u*` is inside the identity region.
pub fn ustar_equation_residual(
    ctx: &WpMismatchContext,
    u_star: &Vec3,
    s_max: &[f64; 3],
) -> Result<Vec3> {
    let pi_u = saturation_pi(u_star, s_max);
    let lg = ctx.lambda * ctx.g_bar;
    let lg_inv = lg.try_inverse().ok_or_else(|| Error::NonInvertible {
        context: "lambda*gbar".into(),
    })?;
    let tau_b = ctx.tau_b0 + lg_inv * pi_u;
    let delta = (ctx.f_eta - ctx.f_bar) + (ctx.g_eta * tau_b - ctx.g_bar * ctx.tau_b0);
    let w = (ctx.f_bar - ctx.f_eta) + (ctx.g_bar - ctx.g_eta) * ctx.tau_b0 - delta;
    let loop_m = ctx.loop_matrix()?;
    Ok(u_star - ctx.lambda * w - (Mat3::identity() - loop_m) * pi_u)
}

/// Residual of the reduced-model identity: the compensated actual model
/// minus the nominal model,
/// `(F + G tau_b0 + G (Lambda Gbar)^-1 u* + Delta) - (Fbar + Gbar tau_b0)`.
pub fn reduced_model_residual(
    ctx: &WpMismatchContext,
    u_star: &Vec3,
    s_max: &[f64; 3],
) -> Result<(Vec3, bool)> {
    let pi_u = saturation_pi(u_star, s_max);
    let in_region = (pi_u - u_star).amax() < 1e-12;
    let lg = ctx.lambda * ctx.g_bar;
    let lg_inv = lg.try_inverse().ok_or_else(|| Error::NonInvertible {
        context: "lambda*gbar".into(),
    })?;
    let comp = ctx.g_eta * lg_inv * pi_u;
    let tau_b = ctx.tau_b0 + lg_inv * pi_u;
    let delta = (ctx.f_eta - ctx.f_bar) + (ctx.g_eta * tau_b - ctx.g_bar * ctx.tau_b0);
    let reduced = ctx.f_eta + ctx.g_eta * ctx.tau_b0 + comp + delta;
    let nominal = ctx.f_bar + ctx.g_bar * ctx.tau_b0;
    Ok((reduced - nominal, in_region))
}

/// Verdict of the sector check at one state.
#[derive(Debug, Clone)]
pub struct SectorReport {
    /// Spectral norm `|I - Lambda G Gbar^-1 Lambda^-1|`.
    pub kappa: f64,
    /// Whether the nominal inertia sits strictly below the true one.
    pub hypothesis_ok: bool,
    /// `|Gamma(delta) - delta| <= kappa |delta|` at every sampled delta.
    pub sector_ok: bool,
    /// No sampled nonzero delta maps to zero.
    pub zero_unique_ok: bool,
    pub pass: bool,
}

/// Evaluates the sector function
/// `Gamma(delta) = delta + (Lambda G Gbar^-1 Lambda^-1 - I)(Pi(u*+delta) - Pi(u*))`
/// on the sampled deltas and checks the sector bound with the spectral-norm
/// estimate `kappa`. A violated nominal-inertia hypothesis is reported as a
/// failed check (it signals a misconfigured observer).
pub fn gamma_sector_check(
    ctx: &WpMismatchContext,
    j_bar_diag: &[f64; 3],
    j_b_diag: &[f64; 3],
    s_max: &[f64; 3],
    deltas: &[Vec3],
) -> Result<SectorReport> {
    let loop_m = ctx.loop_matrix()?;
    let kappa = spectral_norm(&(Mat3::identity() - loop_m));
    let hypothesis_ok = (0..3).all(|i| j_bar_diag[i] < j_b_diag[i]);
    let u_star = quasi_steady_ustar(ctx, s_max)?.u_star;
    let pi_star = saturation_pi(&u_star, s_max);
    let gamma = |delta: &Vec3| -> Vec3 {
        delta + (loop_m - Mat3::identity()) * (saturation_pi(&(u_star + delta), s_max) - pi_star)
    };
    // Gamma(0) = 0 by construction; scan sampled nonzero deltas.
    let mut sector_ok = true;
    let mut zero_unique_ok = gamma(&Vec3::zeros()).norm() < 1e-15;
    for d in deltas {
        if d.norm() < 1e-12 {
            continue;
        }
        let g = gamma(d);
        if (g - d).norm() > kappa * d.norm() + 1e-10 {
            sector_ok = false;
        }
        if g.norm() < 1e-12 {
            zero_unique_ok = false;
        }
    }
    let pass = hypothesis_ok && kappa < 1.0 && sector_ok && zero_unique_ok;
    Ok(SectorReport {
        kappa,
        hypothesis_ok,
        sector_ok,
        zero_unique_ok,
        pass,
    })
}

/// Result of fitting `|.| ~ lambda1 exp(-lambda2 t/eps)` to a fast-variable
/// transient.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// Decay rate in the stretched time `t/eps`.
    pub lambda2: f64,
    /// Decay rate in physical time (`lambda2 / eps`).
    pub rate_physical: f64,
    /// Intercept magnitude of the fit.
    pub lambda1: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    /// Long-run floor of the transient norm.
    pub floor: f64,
    /// Samples used in the fit window.
    pub samples: usize,
    pub eps: f64,
}

/// Fits an exponential to the transient of `series = [(t, norm)]`.
///
/// The fit window runs from the first sample until the norm first drops
/// below five times its long-run floor (mean of the last fifth of the
/// series).
pub fn fast_decay_fit(series: &[(f64, f64)], eps: f64) -> Result<DecayFit> {
    if series.len() < 10 {
        return Err(Error::FitDegenerate {
            samples: series.len(),
            min: 10,
        });
    }
    let tail_start = series.len() - series.len() / 5;
    let floor = series[tail_start..].iter().map(|&(_, n)| n).sum::<f64>()
        / (series.len() - tail_start) as f64;
    let threshold = (5.0 * floor).max(1e-300);
    let mut window: Vec<(f64, f64)> = Vec::new();
    for &(t, n) in series {
        if n < threshold {
            break;
        }
        window.push((t, n));
    }
    if window.len() < 5 {
        return Err(Error::FitDegenerate {
            samples: window.len(),
            min: 5,
        });
    }
    // least squares on ln(norm) = a - r t
    let n = window.len() as f64;
    let t0 = window[0].0;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, v) in &window {
        let x = t - t0;
        let y = v.ln();
        st += x;
        sy += y;
        stt += x * x;
        sty += x * y;
    }
    let denom = n * stt - st * st;
    if denom.abs() < 1e-30 {
        return Err(Error::FitDegenerate {
            samples: window.len(),
            min: 5,
        });
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    let mut ss = 0.0;
    for &(t, v) in &window {
        let pred = intercept + slope * (t - t0);
        ss += (v.ln() - pred).powi(2);
    }
    let rate_physical = -slope;
    Ok(DecayFit {
        lambda2: rate_physical * eps,
        rate_physical,
        lambda1: intercept.exp(),
        residual: (ss / n).sqrt(),
        floor,
        samples: window.len(),
        eps,
    })
}
