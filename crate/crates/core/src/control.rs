//! Longitudinal and lateral planners plus the safety layer that clips their
//! output and raises alerts.

use serde::{Deserialize, Serialize};

use crate::sim::{LaneGeometry, VehicleState};

/// Actuator command for one step. `accel` is never negative, `brake` never
/// positive, and `steer_delta` is the front-wheel deflection held for the
/// step, in degrees with left negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub accel: f64,
    pub brake: f64,
    pub steer_delta: f64,
}

impl ControlCommand {
    pub const NEUTRAL: ControlCommand = ControlCommand { accel: 0.0, brake: 0.0, steer_delta: 0.0 };
}

/// Actuation bounds a command is held to, plus the alert thresholds tied to
/// them. Separate instances describe the vehicle's own enforcement layer and
/// the value sets an attacker steers toward.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SafetyLimits {
    /// Maximum commanded acceleration (m/s^2).
    pub limit_accel: f64,
    /// Strongest commanded brake (m/s^2, negative).
    pub limit_brake: f64,
    /// Maximum per-step wheel deflection (degrees).
    pub limit_steer: f64,
    /// Speed ceiling as a multiple of the cruise set-point.
    pub overspeed_factor: f64,
    /// Brake magnitude at which the forward-collision warning fires (m/s^2,
    /// negative).
    pub fcw_brake: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlertKind {
    /// Lateral request exceeded the actuation limit for a sustained window.
    SteerSaturated,
    /// Forward-collision warning from a maximal brake command.
    ForwardCollision,
}

impl AlertKind {
    pub fn label(self) -> &'static str {
        match self {
            AlertKind::SteerSaturated => "steer_saturated",
            AlertKind::ForwardCollision => "fcw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub kind: AlertKind,
    pub step: u64,
}

/// Cruise/follow planner gains.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AccConfig {
    /// Speed-tracking gain toward the cruise set-point (1/s).
    pub speed_gain: f64,
    /// Gap-error gain of the follow law (1/s^2).
    pub gap_gain: f64,
    /// Closing-speed damping of the follow law (1/s).
    pub closing_gain: f64,
    /// Desired time gap behind the lead (s).
    pub follow_gap: f64,
}

/// Lane-centering planner gains.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AlcConfig {
    /// Wheel degrees per meter of lateral offset.
    pub offset_gain: f64,
    /// Wheel degrees per m/s of lateral rate.
    pub rate_gain: f64,
    /// Fraction of the curvature-tracking wheel angle applied as feed-forward.
    pub feedforward_gain: f64,
    /// Wheelbase used for the curvature feed-forward (m).
    pub wheelbase: f64,
}

/// Plans the longitudinal channel: proportional speed tracking toward the
/// cruise set-point, blended with a constant-time-gap follow law whenever a
/// lead is tracked inside the follow gap. The more conservative of the two
/// requests wins. Output is split into gas and brake, clipped to `limits`.
pub fn acc_plan(
    ego: &VehicleState,
    lead_track: Option<(f64, f64)>,
    v_cruise: f64,
    cfg: &AccConfig,
    limits: &SafetyLimits,
) -> (f64, f64) {
    let a_speed = cfg.speed_gain * (v_cruise - ego.speed);
    let mut a = a_speed;
    if let Some((rel_dist, rel_speed)) = lead_track {
        let hwt = if ego.speed > 0.0 { rel_dist / ego.speed } else { f64::INFINITY };
        if hwt < cfg.follow_gap {
            let a_follow =
                cfg.gap_gain * (rel_dist - cfg.follow_gap * ego.speed) - cfg.closing_gain * rel_speed;
            a = a_speed.min(a_follow);
        }
    }
    let a = a.clamp(limits.limit_brake, limits.limit_accel);
    if a >= 0.0 {
        (a, 0.0)
    } else {
        (0.0, a)
    }
}

/// Plans the lateral channel: proportional-derivative centering on lateral
/// offset and lateral rate, plus curvature feed-forward. The raw request is
/// returned unclipped; the safety layer owns the clip and watches for
/// saturation.
pub fn alc_plan(ego: &VehicleState, lane: &LaneGeometry, cfg: &AlcConfig) -> f64 {
    let lateral_rate = ego.speed * ego.heading.sin();
    let feedback = -(cfg.offset_gain * ego.y + cfg.rate_gain * lateral_rate);
    let track = (cfg.wheelbase * lane.centerline_curvature).atan().to_degrees();
    feedback + cfg.feedforward_gain * track
}

/// Sliding window that turns sustained lateral saturation into an alert.
#[derive(Debug, Clone, Default)]
pub struct SaturationMonitor {
    consecutive: u32,
    fired_this_episode: bool,
}

impl SaturationMonitor {
    /// Feeds one pre-clip steer magnitude; returns true on the step the
    /// saturation window first fills. Re-arming requires the request to drop
    /// back inside the limit.
    pub fn observe(&mut self, saturated: bool, window: u32) -> bool {
        if saturated {
            self.consecutive = self.consecutive.saturating_add(1);
            if self.consecutive >= window && !self.fired_this_episode {
                self.fired_this_episode = true;
                return true;
            }
        } else {
            self.consecutive = 0;
            self.fired_this_episode = false;
        }
        false
    }
}

/// Clips a planned command to the vehicle's actuation limits, cuts gas above
/// the overspeed ceiling, and reports sustained lateral saturation.
pub fn enforce_safety_limits(
    cmd: &ControlCommand,
    limits: &SafetyLimits,
    ego: &VehicleState,
    v_cruise: f64,
    saturation: &mut SaturationMonitor,
    saturation_window: u32,
    step: u64,
) -> (ControlCommand, Option<AlertEvent>) {
    let mut accel = cmd.accel.clamp(0.0, limits.limit_accel);
    if ego.speed >= limits.overspeed_factor * v_cruise {
        accel = 0.0;
    }
    let brake = cmd.brake.clamp(limits.limit_brake, 0.0);
    let steer = cmd.steer_delta.clamp(-limits.limit_steer, limits.limit_steer);

    let saturated = cmd.steer_delta.abs() > limits.limit_steer;
    let alert = saturation
        .observe(saturated, saturation_window)
        .then_some(AlertEvent { kind: AlertKind::SteerSaturated, step });

    (ControlCommand { accel, brake, steer_delta: steer }, alert)
}

/// Forward-collision warning on the command actually reaching the actuators:
/// fires when the brake magnitude is at or past the warning threshold.
pub fn fcw_check(cmd: &ControlCommand, limits: &SafetyLimits, step: u64) -> Option<AlertEvent> {
    (cmd.brake <= limits.fcw_brake)
        .then_some(AlertEvent { kind: AlertKind::ForwardCollision, step })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vehicle_limits() -> SafetyLimits {
        SafetyLimits {
            limit_accel: 2.0,
            limit_brake: -3.5,
            limit_steer: 1.0,
            overspeed_factor: 1.1,
            fcw_brake: -4.0,
        }
    }

    fn acc_cfg() -> AccConfig {
        AccConfig { speed_gain: 0.4, gap_gain: 0.1, closing_gain: 0.1, follow_gap: 2.5 }
    }

    fn alc_cfg() -> AlcConfig {
        AlcConfig { offset_gain: 0.10, rate_gain: 0.117, feedforward_gain: 1.0, wheelbase: 2.7 }
    }

    fn ego(speed: f64) -> VehicleState {
        VehicleState::new(0.0, 0.0, 0.0, speed)
    }

    #[test]
    fn acc_holds_cruise_with_no_lead() {
        let (accel, brake) = acc_plan(&ego(26.8224), None, 26.8224, &acc_cfg(), &vehicle_limits());
        assert_eq!(accel, 0.0);
        assert_eq!(brake, 0.0);
    }

    #[test]
    fn acc_accelerates_below_cruise() {
        let (accel, brake) = acc_plan(&ego(20.0), None, 26.8224, &acc_cfg(), &vehicle_limits());
        assert!(accel > 0.0 && accel <= 2.0);
        assert_eq!(brake, 0.0);
    }

    #[test]
    fn acc_brakes_behind_close_lead() {
        // 20 m gap at speed puts headway well inside the follow gap.
        let (accel, brake) =
            acc_plan(&ego(26.8224), Some((20.0, 5.0)), 26.8224, &acc_cfg(), &vehicle_limits());
        assert_eq!(accel, 0.0);
        assert!(brake < 0.0);
        assert!(brake >= -3.5);
    }

    #[test]
    fn alc_steers_left_from_right_offset() {
        let lane = LaneGeometry {
            lane_width: 3.7,
            num_lanes: 2,
            centerline_curvature: 0.0,
            guardrail_offset: 2.0,
        };
        let mut s = ego(26.8224);
        s.y = 0.4;
        assert!(alc_plan(&s, &lane, &alc_cfg()) < 0.0);
    }

    #[test]
    fn alc_feedforward_matches_curvature_on_centerline() {
        let lane = LaneGeometry {
            lane_width: 3.7,
            num_lanes: 2,
            centerline_curvature: -1.0 / 500.0,
            guardrail_offset: 2.0,
        };
        let steer = alc_plan(&ego(26.8224), &lane, &alc_cfg());
        let track = (2.7 * -0.002f64).atan().to_degrees();
        assert!((steer - track).abs() < 1e-12);
        assert!(steer < 0.0);
    }

    #[test]
    fn enforce_clips_and_is_idempotent() {
        let limits = vehicle_limits();
        let mut sat = SaturationMonitor::default();
        let raw = ControlCommand { accel: 5.0, brake: -9.0, steer_delta: -2.4 };
        let (once, _) = enforce_safety_limits(&raw, &limits, &ego(20.0), 26.8224, &mut sat, 50, 0);
        assert_eq!(once, ControlCommand { accel: 2.0, brake: -3.5, steer_delta: -1.0 });
        let (twice, _) = enforce_safety_limits(&once, &limits, &ego(20.0), 26.8224, &mut sat, 50, 1);
        assert_eq!(twice, once);
    }

    #[test]
    fn enforce_cuts_gas_above_overspeed_ceiling() {
        let limits = vehicle_limits();
        let mut sat = SaturationMonitor::default();
        let raw = ControlCommand { accel: 1.5, brake: 0.0, steer_delta: 0.0 };
        let fast = ego(26.8224 * 1.1 + 0.1);
        let (out, _) = enforce_safety_limits(&raw, &limits, &fast, 26.8224, &mut sat, 50, 0);
        assert_eq!(out.accel, 0.0);
    }

    #[test]
    fn steer_saturation_needs_full_window() {
        let limits = SafetyLimits { limit_steer: 0.25, ..vehicle_limits() };
        let mut sat = SaturationMonitor::default();
        let raw = ControlCommand { accel: 0.0, brake: 0.0, steer_delta: 0.5 };
        let mut fired = None;
        for step in 0..50u64 {
            let (_, alert) =
                enforce_safety_limits(&raw, &limits, &ego(20.0), 26.8224, &mut sat, 50, step);
            if let Some(a) = alert {
                fired = Some((a, step));
            }
        }
        let (alert, at) = fired.expect("window of 50 saturated steps fires");
        assert_eq!(alert.kind, AlertKind::SteerSaturated);
        assert_eq!(at, 49);

        // A fresh episode below the limit resets the window.
        let mut sat = SaturationMonitor::default();
        for step in 0..49u64 {
            let (_, alert) =
                enforce_safety_limits(&raw, &limits, &ego(20.0), 26.8224, &mut sat, 50, step);
            assert!(alert.is_none());
        }
        let calm = ControlCommand { accel: 0.0, brake: 0.0, steer_delta: 0.1 };
        enforce_safety_limits(&calm, &limits, &ego(20.0), 26.8224, &mut sat, 50, 49);
        let (_, alert) = enforce_safety_limits(&raw, &limits, &ego(20.0), 26.8224, &mut sat, 50, 50);
        assert!(alert.is_none());
    }

    #[test]
    fn fcw_fires_only_at_threshold_brake() {
        let limits = vehicle_limits();
        let hard = ControlCommand { accel: 0.0, brake: -4.0, steer_delta: 0.0 };
        assert_eq!(fcw_check(&hard, &limits, 3).unwrap().kind, AlertKind::ForwardCollision);
        let strategic = ControlCommand { accel: 0.0, brake: -3.5, steer_delta: 0.0 };
        assert!(fcw_check(&strategic, &limits, 3).is_none());
    }
}
