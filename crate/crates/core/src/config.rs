//! Simulation configuration: every tunable in one table, loadable from
//! TOML, validated before a run is allowed to start.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{AttackValues, ContextThresholds, EngineParams, TimingWindows};
use crate::control::{AccConfig, AlcConfig, SafetyLimits};
use crate::driver::DriverParams;
use crate::hazard::HazardThresholds;
use crate::sim::LaneGeometry;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Body length, bumper to bumper (m).
    pub length: f64,
    pub width: f64,
    pub wheelbase: f64,
}

/// Lateral controller gains; the wheelbase joins them at build time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AlcGains {
    pub offset_gain: f64,
    pub rate_gain: f64,
    pub feedforward_gain: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Step length (s).
    pub dt: f64,
    /// Run horizon in steps.
    pub steps: u64,
    /// Cruise set-speed (m/s).
    pub v_cruise: f64,
    pub master_seed: u64,
    /// Repetitions per campaign cell.
    pub reps: u32,
    pub vehicle: VehicleParams,
    pub lane: LaneGeometry,
    /// Ego lateral offset at t = 0 (m, positive toward the right line).
    pub ego_start_offset: f64,
    /// Radar tracking range (m).
    pub radar_range: f64,
    pub limits: SafetyLimits,
    /// Consecutive saturated steps before the steer warning fires.
    pub saturation_window: u32,
    pub acc: AccConfig,
    pub alc: AlcGains,
    pub fixed_values: AttackValues,
    pub strategic_values: AttackValues,
    pub context: ContextThresholds,
    pub timing: TimingWindows,
    /// Blend gain of the attacker's speed estimator.
    pub estimator_gain: f64,
    pub driver: DriverParams,
    pub hazard: HazardThresholds,
    /// Initial bumper gaps the campaign sweeps over (m).
    pub gaps: Vec<f64>,
    /// Slow lead speed (m/s).
    pub lead_slow: f64,
    /// Fast lead speed (m/s).
    pub lead_fast: f64,
    /// Lead speed ramp window for the transition profiles (s).
    pub ramp_start: f64,
    pub ramp_end: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            steps: 5000,
            v_cruise: 26.8224,
            master_seed: 0x5EED_AD45,
            reps: 5,
            vehicle: VehicleParams { length: 4.7, width: 1.9, wheelbase: 2.7 },
            lane: LaneGeometry {
                lane_width: 3.7,
                num_lanes: 2,
                centerline_curvature: -1.0 / 500.0,
                guardrail_offset: 2.0,
            },
            ego_start_offset: 0.85,
            radar_range: 200.0,
            limits: SafetyLimits {
                limit_accel: 2.0,
                limit_brake: -3.5,
                limit_steer: 1.0,
                overspeed_factor: 1.1,
                fcw_brake: -4.0,
            },
            saturation_window: 50,
            acc: AccConfig { speed_gain: 0.4, gap_gain: 0.1, closing_gain: 0.15, follow_gap: 2.5 },
            alc: AlcGains { offset_gain: 0.10, rate_gain: 0.117, feedforward_gain: 1.0 },
            fixed_values: AttackValues { accel: 2.4, brake: -4.0, steer: 0.5 },
            strategic_values: AttackValues { accel: 2.0, brake: -3.5, steer: 0.25 },
            context: ContextThresholds {
                t_safe: 2.0,
                beta1: 11.176,
                beta2: 11.176,
                edge_margin: 0.1,
            },
            timing: TimingWindows {
                start_min: 5.0,
                start_max: 40.0,
                duration_min: 0.5,
                duration_max: 2.5,
            },
            estimator_gain: 0.5,
            driver: DriverParams::default(),
            hazard: HazardThresholds::default(),
            gaps: vec![50.0, 70.0, 100.0],
            lead_slow: 15.6464,
            lead_fast: 22.352,
            ramp_start: 5.0,
            ramp_end: 15.0,
        }
    }
}

const ALLOWED_GAPS: [f64; 3] = [50.0, 70.0, 100.0];
/// Speed-threshold bounds for the context rules (m/s; 20 and 35 mph).
const BETA_MIN: f64 = 8.9408;
const BETA_MAX: f64 = 15.6464;

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn alc_config(&self) -> AlcConfig {
        AlcConfig {
            offset_gain: self.alc.offset_gain,
            rate_gain: self.alc.rate_gain,
            feedforward_gain: self.alc.feedforward_gain,
            wheelbase: self.vehicle.wheelbase,
        }
    }

    pub fn engine_params(&self) -> EngineParams {
        EngineParams {
            thresholds: self.context,
            fixed: self.fixed_values,
            strategic: self.strategic_values,
            estimator_gain: self.estimator_gain,
            speed_ceiling: self.limits.overspeed_factor * self.v_cruise,
            dt: self.dt,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut faults: Vec<String> = Vec::new();
        let mut fault = |cond: bool, msg: &str| {
            if cond {
                faults.push(msg.to_string());
            }
        };

        fault(!(self.dt > 0.0 && self.dt.is_finite()), "dt must be positive");
        fault(self.steps == 0, "steps must be positive");
        fault(!(self.v_cruise > 0.0), "v_cruise must be positive");
        fault(self.reps == 0, "reps must be positive");
        fault(!(self.vehicle.length > 0.0), "vehicle length must be positive");
        fault(!(self.vehicle.width > 0.0), "vehicle width must be positive");
        fault(!(self.vehicle.wheelbase > 0.0), "wheelbase must be positive");
        fault(!(self.lane.lane_width > 0.0), "lane width must be positive");
        fault(self.lane.num_lanes == 0, "at least one lane is required");
        fault(!(self.lane.guardrail_offset >= 0.0), "guardrail offset must not be negative");
        fault(!(self.radar_range > 0.0), "radar range must be positive");

        let lane_half = self.lane.lane_width / 2.0;
        fault(
            self.ego_start_offset.abs() + self.vehicle.width / 2.0 > lane_half + 0.5,
            "ego start offset places the body far outside the lane",
        );

        fault(!(self.limits.limit_accel > 0.0), "acceleration limit must be positive");
        fault(!(self.limits.limit_brake < 0.0), "brake limit must be negative");
        fault(!(self.limits.limit_steer > 0.0), "steer limit must be positive");
        fault(!(self.limits.overspeed_factor > 1.0), "overspeed factor must exceed 1");
        fault(
            !(self.limits.fcw_brake <= self.limits.limit_brake),
            "collision-warning brake threshold must be at or below the brake limit",
        );
        fault(self.saturation_window == 0, "saturation window must be positive");

        fault(!(self.acc.follow_gap > 0.0), "follow gap must be positive");
        fault(!(self.acc.speed_gain > 0.0), "speed gain must be positive");
        fault(!(self.acc.gap_gain > 0.0), "gap gain must be positive");
        fault(self.acc.closing_gain < 0.0, "closing gain must not be negative");
        fault(!(self.alc.offset_gain > 0.0), "lateral offset gain must be positive");
        fault(self.alc.rate_gain < 0.0, "lateral rate gain must not be negative");

        fault(
            !(2.0..=3.0).contains(&self.context.t_safe),
            "safe-headway threshold must lie between 2 and 3 seconds",
        );
        for (name, beta) in [("beta1", self.context.beta1), ("beta2", self.context.beta2)] {
            fault(
                !(BETA_MIN..=BETA_MAX).contains(&beta),
                &format!("{name} must lie between {BETA_MIN} and {BETA_MAX} m/s, got {beta}"),
            );
        }
        fault(!(self.context.edge_margin > 0.0), "edge margin must be positive");

        fault(self.gaps.is_empty(), "at least one initial gap is required");
        for gap in &self.gaps {
            fault(
                !ALLOWED_GAPS.iter().any(|a| (a - gap).abs() < 1e-9),
                &format!("initial gap {gap} is not one of {ALLOWED_GAPS:?}"),
            );
        }

        fault(!(self.lead_slow > 0.0), "slow lead speed must be positive");
        fault(!(self.lead_fast > self.lead_slow), "fast lead speed must exceed the slow one");
        fault(
            !(self.lead_fast < self.v_cruise),
            "lead speeds must stay below the cruise speed",
        );
        fault(
            !(self.ramp_start >= 0.0 && self.ramp_end > self.ramp_start),
            "ramp window must be ordered",
        );
        fault(self.ramp_end > self.horizon(), "ramp window must end within the run");

        fault(
            !(self.timing.start_min >= 0.0 && self.timing.start_max > self.timing.start_min),
            "attack start window must be ordered",
        );
        fault(
            !(self.timing.duration_min > 0.0
                && self.timing.duration_max > self.timing.duration_min),
            "attack duration window must be ordered",
        );
        fault(
            self.timing.start_max + self.timing.duration_max > self.horizon(),
            "attack window must fit inside the run",
        );

        fault(
            !(self.estimator_gain > 0.0 && self.estimator_gain <= 1.0),
            "estimator gain must lie in (0, 1]",
        );
        fault(!(self.driver.reaction_delay > 0.0), "driver reaction delay must be positive");
        fault(!(self.driver.panic_brake < 0.0), "driver emergency brake must be negative");
        fault(!(self.hazard.headway_floor > 0.0), "headway floor must be positive");
        fault(!(self.hazard.stop_dwell > 0.0), "stop dwell must be positive");

        if faults.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(faults.join("; ")))
        }
    }
}
