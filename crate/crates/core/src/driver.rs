//! Distracted-driver reaction model.
//!
//! The driver rides along without touching the controls until something
//! crosses a perception threshold: a warning from the stack itself, or an
//! actuation that no sane controller would request. From the moment of
//! alert, intervention strength follows a sigmoid ramp, and the takeover
//! latches as a full engagement after a fixed perception-reaction delay.
//! What the intervention does depends on what was noticed: runaway throttle
//! or a collision warning gets hard braking, phantom braking gets a pedal
//! release, a steering fault gets counter-steering toward the lane center.
//! Once the situation is stable the driver keeps driving manually for the
//! rest of the run and never hands control back.

use serde::{Deserialize, Serialize};

use crate::control::{AlertEvent, AlertKind, ControlCommand, SafetyLimits};
use crate::sim::{LaneGeometry, VehicleState};

/// What the driver noticed first. Fixed at the moment of alert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TakeoverCause {
    RunawayThrottle,
    PhantomBraking,
    SteeringFault,
    Overspeed,
    CollisionWarning,
    SteerWarning,
}

impl TakeoverCause {
    pub fn label(self) -> &'static str {
        match self {
            TakeoverCause::RunawayThrottle => "runaway-throttle",
            TakeoverCause::PhantomBraking => "phantom-braking",
            TakeoverCause::SteeringFault => "steering-fault",
            TakeoverCause::Overspeed => "overspeed",
            TakeoverCause::CollisionWarning => "collision-warning",
            TakeoverCause::SteerWarning => "steer-warning",
        }
    }

    /// Longitudinal causes release once the gap is safe; lateral causes
    /// release once the car is back near the center and settled.
    fn is_lateral(self) -> bool {
        matches!(self, TakeoverCause::SteeringFault | TakeoverCause::SteerWarning)
    }

    fn releases_pedals(self) -> bool {
        matches!(self, TakeoverCause::PhantomBraking)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverMode {
    /// Hands off, eyes elsewhere.
    Distracted,
    /// Alerted; intervention ramping in, takeover latching after the delay.
    Reacting,
    /// Driving manually for the rest of the run.
    Manual,
}

/// Perception thresholds and actuation constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriverParams {
    /// Delay from alert to latched takeover (s).
    pub reaction_delay: f64,
    pub sigmoid_slope: f64,
    pub sigmoid_bias: f64,
    /// Emergency pedal authority (m/s^2), stronger than the stack's.
    pub panic_brake: f64,
    /// Ordinary accelerator authority once driving manually (m/s^2).
    pub manual_accel: f64,
    /// Speed excess over the tolerated ceiling that feels wrong (m/s).
    pub overspeed_margin: f64,
    /// Steer clamp when the driver holds the wheel (deg per step).
    pub manual_steer_limit: f64,
    pub lane_gain: f64,
    pub lane_rate_gain: f64,
    /// Gap the driver keeps when following, as a time headway (s).
    pub follow_gap: f64,
    pub gap_gain: f64,
    pub closing_gain: f64,
    pub speed_gain: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        DriverParams {
            reaction_delay: 2.5,
            sigmoid_slope: 10.0,
            sigmoid_bias: 12.0,
            panic_brake: -6.0,
            manual_accel: 1.5,
            overspeed_margin: 0.05,
            manual_steer_limit: 1.5,
            lane_gain: 0.2,
            lane_rate_gain: 0.15,
            follow_gap: 2.5,
            gap_gain: 0.1,
            closing_gain: 0.1,
            speed_gain: 0.4,
        }
    }
}

/// Intervention strength at `t` seconds after the alert, on a logistic
/// ramp: 0.5 at bias/slope seconds, saturating toward 1 beyond it.
pub fn reaction_ramp(t: f64, slope: f64, bias: f64) -> f64 {
    let e = (slope * t - bias).exp();
    e / (1.0 + e)
}

pub struct DriverModel {
    params: DriverParams,
    limits: SafetyLimits,
    wheelbase: f64,
    dt: f64,
    mode: DriverMode,
    alert_step: Option<u64>,
    cause: Option<TakeoverCause>,
    engaged_step: Option<u64>,
}

impl DriverModel {
    pub fn new(params: DriverParams, limits: SafetyLimits, wheelbase: f64, dt: f64) -> Self {
        DriverModel {
            params,
            limits,
            wheelbase,
            dt,
            mode: DriverMode::Distracted,
            alert_step: None,
            cause: None,
            engaged_step: None,
        }
    }

    pub fn mode(&self) -> DriverMode {
        self.mode
    }

    pub fn cause(&self) -> Option<TakeoverCause> {
        self.cause
    }

    pub fn alert_step(&self) -> Option<u64> {
        self.alert_step
    }

    pub fn engaged_step(&self) -> Option<u64> {
        self.engaged_step
    }

    /// True from the latched takeover onward.
    pub fn engaged(&self) -> bool {
        self.engaged_step.is_some()
    }

    fn sigma(&self, step: u64) -> f64 {
        match self.alert_step {
            Some(alert) => {
                let t = (step - alert) as f64 * self.dt;
                reaction_ramp(t, self.params.sigmoid_slope, self.params.sigmoid_bias)
            }
            None => 0.0,
        }
    }

    /// Command-level perception: actuation beyond what the stack is allowed
    /// to request, or speed past the tolerated ceiling. Comparisons are
    /// strict so commands sitting exactly on a limit pass unnoticed.
    fn perceive_anomaly(
        &self,
        cmd: &ControlCommand,
        ego: &VehicleState,
        v_cruise: f64,
    ) -> Option<TakeoverCause> {
        if cmd.brake < self.limits.limit_brake {
            Some(TakeoverCause::PhantomBraking)
        } else if cmd.accel > self.limits.limit_accel {
            Some(TakeoverCause::RunawayThrottle)
        } else if cmd.steer_delta.abs() > self.limits.limit_steer {
            Some(TakeoverCause::SteeringFault)
        } else if ego.speed > self.limits.overspeed_factor * v_cruise + self.params.overspeed_margin
        {
            Some(TakeoverCause::Overspeed)
        } else {
            None
        }
    }

    /// Advances the driver state machine one step. `final_cmd` is the
    /// command as it arrived at the actuators, warnings included.
    pub fn observe(
        &mut self,
        step: u64,
        final_cmd: &ControlCommand,
        ego: &VehicleState,
        lead_track: Option<(f64, f64)>,
        alerts: &[AlertEvent],
        v_cruise: f64,
    ) {
        if self.mode == DriverMode::Distracted {
            let cause = self.perceive_anomaly(final_cmd, ego, v_cruise).or_else(|| {
                alerts.iter().next().map(|a| match a.kind {
                    AlertKind::ForwardCollision => TakeoverCause::CollisionWarning,
                    AlertKind::SteerSaturated => TakeoverCause::SteerWarning,
                })
            });
            if let Some(cause) = cause {
                self.mode = DriverMode::Reacting;
                self.alert_step = Some(step);
                self.cause = Some(cause);
            }
        }

        if self.mode == DriverMode::Reacting {
            let alert = self.alert_step.expect("reacting implies an alert");
            let delay_steps = (self.params.reaction_delay / self.dt).round() as u64;
            if self.engaged_step.is_none() && step >= alert + delay_steps {
                self.engaged_step = Some(step);
            }
            if self.engaged() && self.situation_stable(ego, lead_track) {
                self.mode = DriverMode::Manual;
            }
        }
    }

    fn situation_stable(&self, ego: &VehicleState, lead_track: Option<(f64, f64)>) -> bool {
        let cause = self.cause.expect("stability is only checked after an alert");
        if cause.is_lateral() {
            let lateral_rate = ego.speed * ego.heading.sin();
            ego.y.abs() <= 0.3 && lateral_rate.abs() <= 0.15
        } else if cause.releases_pedals() {
            match lead_track {
                Some((rel_dist, _)) => {
                    ego.speed <= 0.0 || rel_dist / ego.speed >= self.params.follow_gap
                }
                None => true,
            }
        } else {
            match lead_track {
                Some((rel_dist, rel_speed)) => {
                    rel_speed <= 0.0
                        && (ego.speed <= 0.0 || rel_dist / ego.speed >= self.params.follow_gap)
                }
                None => true,
            }
        }
    }

    fn lane_keep(&self, ego: &VehicleState, lane: &LaneGeometry) -> f64 {
        let lateral_rate = ego.speed * ego.heading.sin();
        let feedback = -(self.params.lane_gain * ego.y + self.params.lane_rate_gain * lateral_rate);
        let track = (self.wheelbase * lane.centerline_curvature).atan().to_degrees();
        (feedback + track).clamp(-self.params.manual_steer_limit, self.params.manual_steer_limit)
    }

    /// Longitudinal target while driving manually: hold the cruise speed,
    /// yield to the gap law behind a lead, never exceed pedal authority.
    fn manual_longitudinal(
        &self,
        ego: &VehicleState,
        lead_track: Option<(f64, f64)>,
        v_cruise: f64,
    ) -> f64 {
        let mut a = self.params.speed_gain * (v_cruise - ego.speed);
        if let Some((rel_dist, rel_speed)) = lead_track {
            if ego.speed > 0.0 && rel_dist / ego.speed < self.params.follow_gap {
                let follow = self.params.gap_gain
                    * (rel_dist - self.params.follow_gap * ego.speed)
                    - self.params.closing_gain * rel_speed;
                a = a.min(follow);
            }
        }
        a.clamp(self.params.panic_brake, self.params.manual_accel)
    }

    /// The command the vehicle actually executes this step. Pass-through
    /// while distracted; a sigmoid blend from the incoming command toward
    /// the cause-specific response while reacting; fully manual afterwards.
    pub fn actuate(
        &self,
        step: u64,
        final_cmd: &ControlCommand,
        ego: &VehicleState,
        lane: &LaneGeometry,
        lead_track: Option<(f64, f64)>,
        v_cruise: f64,
    ) -> ControlCommand {
        match self.mode {
            DriverMode::Distracted => *final_cmd,
            DriverMode::Reacting => {
                let sigma = self.sigma(step);
                let cause = self.cause.expect("reacting implies a cause");
                let target = if cause.releases_pedals() {
                    ControlCommand {
                        accel: 0.0,
                        brake: 0.0,
                        steer_delta: self.lane_keep(ego, lane),
                    }
                } else {
                    ControlCommand {
                        accel: 0.0,
                        brake: self.params.panic_brake,
                        steer_delta: self.lane_keep(ego, lane),
                    }
                };
                ControlCommand {
                    accel: (1.0 - sigma) * final_cmd.accel + sigma * target.accel,
                    brake: (1.0 - sigma) * final_cmd.brake + sigma * target.brake,
                    steer_delta: (1.0 - sigma) * final_cmd.steer_delta
                        + sigma * target.steer_delta,
                }
            }
            DriverMode::Manual => {
                let a = self.manual_longitudinal(ego, lead_track, v_cruise);
                ControlCommand {
                    accel: a.max(0.0),
                    brake: a.min(0.0),
                    steer_delta: self.lane_keep(ego, lane),
                }
            }
        }
    }
}
