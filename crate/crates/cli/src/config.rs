//! Scenario configuration: TOML with the unit in every key name, converted
//! to SI once at load time.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vessel_dmc::analytic::{CgfSeries, CylinderEnvironment, Truncation, DEFAULT_TAIL_TOLERANCE};
use vessel_dmc::channel::{
    Channel, Field, FreeSpace, ObservationMode, ReceiverModel, DEFAULT_MEMORY_CAP,
    DEFAULT_MEMORY_CUTOFF,
};
use vessel_dmc::eigenmodes::Wall;
use vessel_dmc::ook::Detector;
use vessel_dmc::pbs::FlowField;
use vessel_dmc::CylPoint;

use crate::CliError;

const UM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub environment: EnvironmentConfig,
    pub transmitter: TransmitterConfig,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub pbs: PbsSection,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<TimesConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub rho_c_um: f64,
    #[serde(default = "default_diffusion")]
    pub diffusion_m2_per_s: f64,
    #[serde(default)]
    pub k_d_per_s: f64,
    /// Binding rate in µm/s, or `"absorbing"`, or `"none"` for free space.
    #[serde(default = "default_wall")]
    pub k_f_um_per_s: WallSetting,
    #[serde(default)]
    pub flow: FlowKind,
    /// Uniform velocity, or v_eff for Poiseuille flow.
    #[serde(default)]
    pub velocity_um_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WallSetting {
    Rate(f64),
    Named(WallName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallName {
    Absorbing,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    #[default]
    Uniform,
    Poiseuille,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterConfig {
    pub rho_um: f64,
    #[serde(default)]
    pub z_um: f64,
    #[serde(default)]
    pub phi_rad: f64,
    #[serde(default = "default_molecules")]
    pub molecules: f64,
    #[serde(default)]
    pub release_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    pub rho_um: f64,
    pub z_um: f64,
    pub phi_rad: f64,
    pub radius_um: f64,
    pub mode: ReceiverMode,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            rho_um: 2.0,
            z_um: 5.0,
            phi_rad: FRAC_PI_2,
            radius_um: 0.5,
            mode: ReceiverMode::Point,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverMode {
    Point,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub n_max: usize,
    pub m_max: usize,
    /// Allowed series tail, relative to 1/(pi rho_c^2).
    pub tail_tolerance: f64,
    /// When set, (n_max, m_max) are chosen so the tail bound holds for all
    /// elapsed times above this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive_tau_min_s: Option<f64>,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        let t = Truncation::default();
        Self {
            n_max: t.n_max,
            m_max: t.m_max,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            adaptive_tau_min_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PbsSection {
    pub time_step_s: f64,
    pub particles: u64,
    pub seed: u64,
    pub horizon_s: f64,
    /// Radius of the spherical probe placed at every requested point.
    pub probe_radius_um: f64,
}

impl Default for PbsSection {
    fn default() -> Self {
        Self {
            time_step_s: 1e-5,
            particles: 200_000,
            seed: 1,
            horizon_s: 0.3,
            probe_radius_um: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub slots_s: Vec<f64>,
    pub memory_cutoff: f64,
    pub memory_cap: usize,
    pub detector: DetectorKind,
    /// Monte Carlo bits per slot duration; 0 skips the simulation.
    pub bits: u64,
    pub seed: u64,
    /// Grid used to locate the sampling time.
    pub grid_step_s: f64,
    pub search_horizon_s: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            slots_s: vec![0.02, 0.05, 0.1, 0.2],
            memory_cutoff: DEFAULT_MEMORY_CUTOFF,
            memory_cap: DEFAULT_MEMORY_CAP,
            detector: DetectorKind::Genie,
            bits: 1_000_000,
            seed: 1,
            grid_step_s: 1e-4,
            search_horizon_s: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Genie,
    DecisionFeedback,
}

impl From<DetectorKind> for Detector {
    fn from(d: DetectorKind) -> Self {
        match d {
            DetectorKind::Genie => Detector::Genie,
            DetectorKind::DecisionFeedback => Detector::DecisionFeedback,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Relative tolerance at the curve peak.
    pub peak_tolerance: f64,
    /// Pointwise tolerance in standard errors.
    pub sigma: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            peak_tolerance: 0.1,
            sigma: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    pub t_s: Vec<f64>,
}

fn default_diffusion() -> f64 {
    1e-9
}

fn default_wall() -> WallSetting {
    WallSetting::Rate(0.0)
}

fn default_molecules() -> f64 {
    5e4
}

/// Model objects resolved from a config, all SI.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// `None` for free space.
    pub environment: Option<CylinderEnvironment>,
    pub diffusion: f64,
    pub degradation: f64,
    pub flow: FlowField,
    pub source: CylPoint,
    pub release_time: f64,
    pub molecules: f64,
    pub receiver: ReceiverModel,
    pub truncation: Truncation,
    pub tail_tolerance: f64,
    pub adaptive_tau_min: Option<f64>,
}

impl Resolved {
    /// Uniform velocity seen by the analytic model; Poiseuille flow maps to
    /// its line average 4/3 v_eff.
    pub fn analytic_velocity(&self) -> f64 {
        match self.flow {
            FlowField::Uniform(v) => v,
            FlowField::Poiseuille(v_eff) => 4.0 / 3.0 * v_eff,
        }
    }

    pub fn analytic_environment(&self) -> Option<CylinderEnvironment> {
        self.environment.map(|e| e.with_velocity(self.analytic_velocity()))
    }

    pub fn series(&self) -> Result<Option<CgfSeries>, CliError> {
        let Some(env) = self.analytic_environment() else {
            return Ok(None);
        };
        let series = match self.adaptive_tau_min {
            Some(tau_min) => {
                CgfSeries::adaptive(env, self.source, self.release_time, tau_min, self.tail_tolerance)?
            }
            None => CgfSeries::new(env, self.source, self.release_time, self.truncation)?
                .with_tail_tolerance(self.tail_tolerance),
        };
        Ok(Some(series))
    }

    pub fn free_space(&self) -> FreeSpace {
        FreeSpace {
            source: self.source,
            diffusion: self.diffusion,
            degradation: self.degradation,
            velocity: self.analytic_velocity(),
        }
    }

    /// Concentration of the analytic model at `p`, absolute time `t`.
    pub fn concentration(&self, series: Option<&CgfSeries>, p: &CylPoint, t: f64) -> f64 {
        match series {
            Some(s) => s.cgf(p, t),
            None => Field::Unbounded(self.free_space()).concentration(p, t - self.release_time),
        }
    }

    pub fn channel(&self) -> Result<Channel, CliError> {
        let field = match self.series()? {
            Some(s) => Field::Bounded(s),
            None => Field::Unbounded(self.free_space()),
        };
        Ok(Channel::new(field, self.receiver)?)
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types always serialise")
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let e = &self.environment;
        let wall = match e.k_f_um_per_s {
            WallSetting::Rate(kf) => Some(Wall::Partial(kf * UM)),
            WallSetting::Named(WallName::Absorbing) => Some(Wall::Absorbing),
            WallSetting::Named(WallName::None) => None,
        };
        let velocity = e.velocity_um_per_s * UM;
        let flow = match e.flow {
            FlowKind::Uniform => FlowField::Uniform(velocity),
            FlowKind::Poiseuille => FlowField::Poiseuille(velocity),
        };
        let environment = match wall {
            Some(w) => Some(CylinderEnvironment::new(e.rho_c_um * UM, e.diffusion_m2_per_s, e.k_d_per_s, 0.0, w)?),
            None => {
                if !(e.diffusion_m2_per_s > 0.0) || !(e.k_d_per_s >= 0.0) {
                    return Err(CliError::Validation(
                        "diffusion must be > 0 and k_d >= 0".into(),
                    ));
                }
                None
            }
        };
        let tx = &self.transmitter;
        let source = CylPoint::new(tx.rho_um * UM, tx.z_um * UM, tx.phi_rad);
        if let Some(env) = &environment {
            if !env.contains(&source) {
                return Err(CliError::Validation(format!(
                    "transmitter radius {} um lies outside the cylinder",
                    tx.rho_um
                )));
            }
        }
        if !(tx.molecules > 0.0) {
            return Err(CliError::Validation("transmitter.molecules must be > 0".into()));
        }
        let rx = &self.receiver;
        let receiver = ReceiverModel::new(
            CylPoint::new(rx.rho_um * UM, rx.z_um * UM, rx.phi_rad),
            rx.radius_um * UM,
            match rx.mode {
                ReceiverMode::Point => ObservationMode::PointApproximation,
                ReceiverMode::Exact => ObservationMode::Exact,
            },
        );
        let resolved = Resolved {
            environment,
            diffusion: e.diffusion_m2_per_s,
            degradation: e.k_d_per_s,
            flow,
            source,
            release_time: tx.release_time_s,
            molecules: tx.molecules,
            receiver,
            truncation: Truncation {
                n_max: self.series.n_max,
                m_max: self.series.m_max,
            },
            tail_tolerance: self.series.tail_tolerance,
            adaptive_tau_min: self.series.adaptive_tau_min_s,
        };
        log::info!("resolved SI parameters: {resolved:?}");
        Ok(resolved)
    }
}
