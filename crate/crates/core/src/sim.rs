//! Vehicle kinematics, lane geometry, and the attacker-side speed estimator.
//!
//! Coordinates follow the road frame: `x` is arc position along the lane
//! centerline, `y` is lateral offset from the home-lane centerline with left
//! negative, and `heading` is measured against the local road tangent with
//! the same left-negative sign. Curvature is signed the same way, so a
//! left-hand curve has negative curvature.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControlCommand;

/// Turn rates below this are integrated as straight-line motion.
const STRAIGHT_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("non-finite {0} input to step_vehicle")]
    NonFiniteInput(&'static str),
}

/// Kinematic state of one vehicle in the road frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Arc position along the lane centerline (m).
    pub x: f64,
    /// Lateral offset from the home-lane centerline (m, left negative).
    pub y: f64,
    /// Heading relative to the road tangent (rad, left negative).
    pub heading: f64,
    /// Forward speed (m/s, never negative).
    pub speed: f64,
    /// Longitudinal acceleration applied on the last step (m/s^2).
    pub accel: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        VehicleState { x, y, heading, speed, accel: 0.0 }
    }
}

/// Cross-section and curvature of the road the scenario runs on.
///
/// The ego vehicle's home lane is centered on `y = 0`. Additional lanes sit to
/// the left (negative `y`), reflecting a rightmost-lane start, and guardrails
/// run `guardrail_offset` outside the outermost lane edges.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LaneGeometry {
    /// Width of each lane (m).
    pub lane_width: f64,
    /// Number of lanes; lane 0 is the home lane, the rest extend leftward.
    pub num_lanes: u32,
    /// Signed centerline curvature (1/m, negative = left curve).
    pub centerline_curvature: f64,
    /// Distance from the outermost lane edges to the guardrails (m).
    pub guardrail_offset: f64,
}

impl LaneGeometry {
    /// Lateral position of the right guardrail face.
    pub fn right_guardrail(&self) -> f64 {
        self.lane_width / 2.0 + self.guardrail_offset
    }

    /// Lateral position of the left guardrail face.
    pub fn left_guardrail(&self) -> f64 {
        -(self.lane_width / 2.0 + (self.num_lanes.saturating_sub(1)) as f64 * self.lane_width)
            - self.guardrail_offset
    }
}

/// Advances one vehicle by one fixed step under a control command.
///
/// Braking wins over gas when both channels are nonzero. Within the step the
/// command is constant, so heading and lateral position integrate along an
/// exact circular arc at the midpoint speed; straight-line motion is the
/// small-turn-rate limit of the same expression. Speed clamps at zero rather
/// than reversing.
pub fn step_vehicle(
    state: &VehicleState,
    cmd: &ControlCommand,
    dt: f64,
    lane: &LaneGeometry,
    wheelbase: f64,
) -> Result<VehicleState, SimError> {
    for (v, name) in [
        (state.x, "state.x"),
        (state.y, "state.y"),
        (state.heading, "state.heading"),
        (state.speed, "state.speed"),
        (cmd.accel, "cmd.accel"),
        (cmd.brake, "cmd.brake"),
        (cmd.steer_delta, "cmd.steer_delta"),
        (dt, "dt"),
    ] {
        if !v.is_finite() {
            return Err(SimError::NonFiniteInput(name));
        }
    }

    let a_eff = if cmd.brake < 0.0 { cmd.brake } else { cmd.accel };
    let v1 = (state.speed + a_eff * dt).max(0.0);
    let v_avg = 0.5 * (state.speed + v1);

    let wheel = cmd.steer_delta.to_radians();
    let kappa = lane.centerline_curvature;
    // Arc progress rate, evaluated at the step start; the lane-offset
    // correction only matters on curved roads.
    let s_rate0 = v_avg * state.heading.cos() / (1.0 - kappa * state.y);
    let turn_rate = (v_avg / wheelbase) * wheel.tan() - kappa * s_rate0;

    let heading1 = state.heading + turn_rate * dt;
    let (y1, arc) = if turn_rate.abs() > STRAIGHT_EPS {
        let y1 = state.y + (v_avg / turn_rate) * (state.heading.cos() - heading1.cos());
        let arc = (v_avg / turn_rate) * (heading1.sin() - state.heading.sin());
        (y1, arc)
    } else {
        let y1 = state.y + v_avg * state.heading.sin() * dt;
        let arc = v_avg * state.heading.cos() * dt;
        (y1, arc)
    };
    let y_mid = 0.5 * (state.y + y1);
    let x1 = state.x + arc / (1.0 - kappa * y_mid);

    Ok(VehicleState { x: x1, y: y1, heading: heading1, speed: v1, accel: a_eff })
}

/// Distances from the vehicle's left and right edges to its home-lane lines.
///
/// Both clamp at zero once an edge is on or past its line.
pub fn lane_offsets(state: &VehicleState, lane: &LaneGeometry, vehicle_width: f64) -> (f64, f64) {
    let half_lane = lane.lane_width / 2.0;
    let half_width = vehicle_width / 2.0;
    let d_left = (state.y - half_width + half_lane).max(0.0);
    let d_right = (half_lane - state.y - half_width).max(0.0);
    (d_left, d_right)
}

/// Bumper-to-bumper range, headway time, and closing speed to the lead.
///
/// `rel_speed` is ego minus lead, so positive means closing. Headway time is
/// infinite for a stopped ego; a negative range means the gap is already gone
/// and is returned as-is for the accident monitor to classify.
pub fn headway(
    ego: &VehicleState,
    lead: &VehicleState,
    vehicle_length: f64,
) -> (f64, f64, f64) {
    let rel_dist = lead.x - ego.x - vehicle_length;
    let hwt = if ego.speed > 0.0 { rel_dist / ego.speed } else { f64::INFINITY };
    let rel_speed = ego.speed - lead.speed;
    (rel_dist, hwt, rel_speed)
}

/// One-dimensional speed tracker with a fixed blend gain.
///
/// `predict` projects the estimate forward under a commanded acceleration;
/// `update` folds in a measurement and becomes the new estimate. With gain 0
/// measurements are ignored, with gain 1 they are adopted outright.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpeedEstimator {
    pub estimate: f64,
    pub predicted: Option<f64>,
    pub gain: f64,
}

impl SpeedEstimator {
    pub fn new(initial: f64, gain: f64) -> Self {
        SpeedEstimator { estimate: initial, predicted: None, gain }
    }

    /// Projects the current estimate one step ahead under `accel`.
    pub fn predict(&mut self, accel: f64, dt: f64) -> f64 {
        let p = self.estimate + accel * dt;
        self.predicted = Some(p);
        p
    }

    /// Blends a measurement into the prediction (falling back to the current
    /// estimate when no prediction is pending) and returns the new estimate.
    pub fn update(&mut self, measured: f64) -> f64 {
        let prior = self.predicted.take().unwrap_or(self.estimate);
        self.estimate = prior + self.gain * (measured - prior);
        self.estimate
    }
}
