//! Scenario configuration: TOML (de)serialization, validation, environment
//! overrides and a canonical content hash.
//!
//! Angles are given in degrees in the file and converted to radians when
//! the runtime scenario is built.

use crate::controller::{ControlLimits, ControllerConfig, PositionGains};
use crate::dob::{AttitudeGains, DobParams};
use crate::dynamics::NominalInputModel;
use crate::hybrid::{
    DisturbanceConfig, Envelope, GuardConfig, ResetJumpModel, Scenario, ServoModel,
};
use crate::kinematics::Gamma;
use crate::params::ArmParams;
use crate::analysis::ManeuverMetric;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Saturation bound: explicit values or calibrated from a preliminary run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SMaxSpec {
    Auto(String),
    Values([f64; 3]),
}

impl Default for SMaxSpec {
    fn default() -> Self {
        SMaxSpec::Auto("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuardSection {
    pub f_th: f64,
    pub delta_eta_deg: f64,
}

impl Default for GuardSection {
    fn default() -> Self {
        Self {
            f_th: 6.6,
            delta_eta_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySection {
    pub theta_m_deg: f64,
    pub t0_wp: f64,
    pub td_wp: f64,
    pub st_window: f64,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            theta_m_deg: 20.0,
            t0_wp: 0.0,
            td_wp: 4.0,
            st_window: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DobSection {
    pub a0: [f64; 3],
    pub a1: [f64; 3],
    pub eps: f64,
    pub s_max: SMaxSpec,
    pub pos_eps: f64,
    pub pos_s_max: [f64; 3],
    pub nominal_input: NominalInputModel,
    pub enabled: bool,
}

impl Default for DobSection {
    fn default() -> Self {
        Self {
            a0: [4.0; 3],
            a1: [4.0; 3],
            eps: 0.02,
            s_max: SMaxSpec::default(),
            pos_eps: 0.25,
            pos_s_max: [20.0; 3],
            nominal_input: NominalInputModel::BodyInertia,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitsSection {
    pub moment_max: f64,
    pub attitude_cmd_max_deg: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self {
            moment_max: 4.0,
            attitude_cmd_max_deg: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t_end: f64,
    pub decimation: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            dt: 2e-4,
            t_end: 10.0,
            decimation: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvelopeSection {
    pub attitude_max_deg: f64,
    pub rate_max: f64,
    pub pos_min: [f64; 3],
    pub pos_max: [f64; 3],
    pub vel_max: f64,
}

impl Default for EnvelopeSection {
    fn default() -> Self {
        Self {
            attitude_max_deg: 60.0,
            rate_max: 20.0,
            pos_min: [-5.0, -5.0, -2.0],
            pos_max: [5.0, 5.0, 5.0],
            vel_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServoSection {
    pub gamma_d_deg: [f64; 2],
    pub gamma_ddot_noise_std: f64,
    #[serde(flatten)]
    pub model: ServoModel,
}

impl Default for ServoSection {
    fn default() -> Self {
        Self {
            gamma_d_deg: [0.0, 0.0],
            gamma_ddot_noise_std: 0.0,
            model: ServoModel::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialSection {
    pub home_position: [f64; 3],
    pub home_yaw_deg: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            home_position: [0.0, 0.0, 1.0],
            home_yaw_deg: 0.0,
        }
    }
}

/// Settings of the verification pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSection {
    /// Robustness radius of the maneuver checks (metric units).
    pub sigma: f64,
    /// Coverage radius of the reset-image covering (metric units).
    pub delta_sigma: f64,
    /// Deviation bound the smallest-epsilon pair must satisfy.
    pub theorem_sigma: f64,
    /// Observer time-scale sweep.
    pub epsilons: Vec<f64>,
    /// Reset-image samples of the transition check.
    pub mc_samples: usize,
    pub metric: ManeuverMetric,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            delta_sigma: 0.05,
            theorem_sigma: 0.05,
            epsilons: vec![0.04, 0.02, 0.01],
            mc_samples: 500,
            metric: ManeuverMetric::default(),
        }
    }
}

/// Complete scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub force_separation_at: Option<f64>,
    pub plant: ArmParams,
    /// Nominal parameters used by the controller; defaults to the plant.
    pub nominal: Option<ArmParams>,
    pub guards: GuardSection,
    pub trajectory: TrajectorySection,
    pub attitude_gains: AttitudeGains,
    pub position_gains: PositionGains,
    pub limits: LimitsSection,
    pub dob: DobSection,
    pub disturbance: DisturbanceConfig,
    pub jump: ResetJumpModel,
    pub servo: ServoSection,
    pub integrator: IntegratorSection,
    pub envelope: EnvelopeSection,
    pub initial: InitialSection,
    pub analysis: AnalysisSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            force_separation_at: None,
            plant: ArmParams::default(),
            nominal: None,
            guards: GuardSection::default(),
            trajectory: TrajectorySection::default(),
            attitude_gains: AttitudeGains::default(),
            position_gains: PositionGains::default(),
            limits: LimitsSection::default(),
            dob: DobSection::default(),
            disturbance: DisturbanceConfig::default(),
            jump: ResetJumpModel { bound: 0.3 },
            servo: ServoSection::default(),
            integrator: IntegratorSection::default(),
            envelope: EnvelopeSection::default(),
            initial: InitialSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads with `PLUGPULL_`-prefixed environment overrides applied before
    /// deserialization (`PLUGPULL_GUARDS__F_TH=5.0` sets `guards.f_th`).
    pub fn load_with_env(path: &Path, env: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: toml::Table =
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        apply_env_overrides(&mut table, env)?;
        let cfg: ScenarioConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the canonical serialization.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn nominal_params(&self) -> ArmParams {
        self.nominal.clone().unwrap_or_else(|| self.plant.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.plant
            .validate()
            .map_err(Error::InvalidConfig)?;
        let theta_m = self.trajectory.theta_m_deg.to_radians();
        if !(self.guards.f_th > 0.0) {
            return Err(Error::InvalidConfig("f_th must be positive".into()));
        }
        if self.guards.f_th >= self.plant.t_max * theta_m.sin() {
            return Err(Error::InvalidConfig(format!(
                "f_th = {} violates the release condition f_th < t_max sin(theta_m) = {}",
                self.guards.f_th,
                self.plant.t_max * theta_m.sin()
            )));
        }
        if self.guards.delta_eta_deg <= 0.0 {
            return Err(Error::InvalidConfig("delta_eta must be positive".into()));
        }
        self.traj_config().validate()?;
        self.dob_params([1.0; 3]).validate()?;
        if self.dob.pos_eps <= 0.0 {
            return Err(Error::InvalidConfig("pos_eps must be positive".into()));
        }
        let dt = self.integrator.dt;
        if dt <= 0.0 || dt > 1e-3 {
            return Err(Error::InvalidConfig(format!(
                "dt = {dt} must lie in (0, 1e-3]"
            )));
        }
        if dt > self.dob.eps / 10.0 {
            return Err(Error::InvalidConfig(format!(
                "dt = {dt} exceeds eps/10 = {}",
                self.dob.eps / 10.0
            )));
        }
        if self.integrator.t_end <= 0.0 {
            return Err(Error::InvalidConfig("t_end must be positive".into()));
        }
        if self.integrator.decimation == 0 {
            return Err(Error::InvalidConfig("decimation must be >= 1".into()));
        }
        if self.envelope.attitude_max_deg <= 0.0 || self.envelope.attitude_max_deg >= 89.0 {
            return Err(Error::InvalidConfig(
                "envelope attitude limit must lie in (0, 89) deg".into(),
            ));
        }
        self.disturbance.validate()?;
        if self.jump.bound < 0.0 {
            return Err(Error::InvalidConfig("jump bound must be >= 0".into()));
        }
        if self.analysis.epsilons.is_empty() {
            return Err(Error::InvalidConfig("epsilon sweep must be nonempty".into()));
        }
        Ok(())
    }

    fn traj_config(&self) -> crate::trajectory::TrajConfig {
        crate::trajectory::TrajConfig {
            theta_m: self.trajectory.theta_m_deg.to_radians(),
            t0_wp: self.trajectory.t0_wp,
            td_wp: self.trajectory.td_wp,
            st_window: self.trajectory.st_window,
        }
    }

    fn dob_params(&self, s_max: [f64; 3]) -> DobParams {
        DobParams {
            a0: self.dob.a0,
            a1: self.dob.a1,
            eps: self.dob.eps,
            s_max,
        }
    }

    /// Builds the runtime scenario with an explicit saturation bound
    /// (either from the file or from the auto-calibration pre-run).
    pub fn build_with_s_max(&self, s_max: [f64; 3]) -> Scenario {
        let controller = ControllerConfig {
            attitude_gains: self.attitude_gains.clone(),
            position_gains: self.position_gains.clone(),
            limits: ControlLimits {
                moment_max: self.limits.moment_max,
                attitude_cmd_max: self.limits.attitude_cmd_max_deg.to_radians(),
            },
            dob: self.dob_params(s_max),
            pos_dob_eps: self.dob.pos_eps,
            pos_dob_s_max: self.dob.pos_s_max,
            nominal_input: self.dob.nominal_input,
            dob_enabled: self.dob.enabled,
        };
        Scenario {
            plant: self.plant.clone(),
            nominal: self.nominal_params(),
            j_bar: self.plant.j_bar_b,
            controller,
            guards: GuardConfig {
                f_th: self.guards.f_th,
                delta_eta: self.guards.delta_eta_deg.to_radians(),
            },
            traj: self.traj_config(),
            envelope: Envelope {
                attitude_max: self.envelope.attitude_max_deg.to_radians(),
                rate_max: self.envelope.rate_max,
                pos_min: self.envelope.pos_min,
                pos_max: self.envelope.pos_max,
                vel_max: self.envelope.vel_max,
            },
            disturbance: self.disturbance.clone(),
            jump: self.jump.clone(),
            servo: self.servo.model,
            gamma_d: Gamma::new(
                self.servo.gamma_d_deg[0].to_radians(),
                self.servo.gamma_d_deg[1].to_radians(),
            ),
            gamma_ddot_noise_std: self.servo.gamma_ddot_noise_std,
            dt: self.integrator.dt,
            t_end: self.integrator.t_end,
            decimation: self.integrator.decimation,
            seed: self.seed,
            force_separation_at: self.force_separation_at,
            home_position: self.initial.home_position,
            home_yaw: self.initial.home_yaw_deg.to_radians(),
            dob_perturbation: [0.0; 12],
        }
    }

    /// Explicit saturation bound, when configured.
    pub fn explicit_s_max(&self) -> Option<[f64; 3]> {
        match &self.dob.s_max {
            SMaxSpec::Values(v) => Some(*v),
            SMaxSpec::Auto(_) => None,
        }
    }
}

/// Applies `PLUGPULL_SECTION__KEY=value` overrides onto a parsed TOML tree.
/// Values parse as TOML literals and fall back to strings.
pub fn apply_env_overrides(table: &mut toml::Table, env: &[(String, String)]) -> Result<()> {
    for (key, value) in env {
        let Some(path) = key.strip_prefix("PLUGPULL_") else {
            continue;
        };
        let parts: Vec<String> = path
            .split("__")
            .map(|p| p.to_ascii_lowercase())
            .collect();
        if parts.is_empty() {
            continue;
        }
        let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
            Ok(t) => t["v"].clone(),
            Err(_) => toml::Value::String(value.clone()),
        };
        let mut cursor = &mut *table;
        for part in &parts[..parts.len() - 1] {
            cursor = cursor
                .entry(part.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("override path {key} crosses a non-table"))
                })?;
        }
        cursor.insert(parts.last().unwrap().clone(), parsed);
    }
    Ok(())
}
