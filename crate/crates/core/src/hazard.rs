//! Run outcome monitoring: hazardous states, accidents, lane invasions.
//!
//! Hazards are states a safe controller must not reach; each kind is
//! recorded once per run at its first occurrence. Accidents are terminal:
//! the run ends at the step one is detected. Lane invasions are counted as
//! episodes, rising edge only, so a single sustained excursion counts once.

use serde::{Deserialize, Serialize};

use crate::attack::StopCause;
use crate::control::AlertEvent;
use crate::driver::TakeoverCause;
use crate::sim::{LaneGeometry, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hazard {
    /// Headway time collapsed below the safe floor behind a tracked lead.
    UnsafeHeadway,
    /// Stopped on an open road with cruise engaged and no traffic reason.
    OpenRoadStop,
    /// Fully outside the travel lane.
    LaneDeparture,
}

impl Hazard {
    pub fn label(self) -> &'static str {
        match self {
            Hazard::UnsafeHeadway => "unsafe-headway",
            Hazard::OpenRoadStop => "open-road-stop",
            Hazard::LaneDeparture => "lane-departure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Accident {
    /// Bumper-to-bumper distance reached zero.
    Collision,
    /// Remained stopped on the open road past the dwell limit.
    ProlongedStop,
    /// Body touched a guardrail face.
    GuardrailContact,
}

impl Accident {
    pub fn label(self) -> &'static str {
        match self {
            Accident::Collision => "collision",
            Accident::ProlongedStop => "prolonged-stop",
            Accident::GuardrailContact => "guardrail-contact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardEvent {
    pub kind: Hazard,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccidentEvent {
    pub kind: Accident,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HazardThresholds {
    /// Headway time below which following is hazardous (s).
    pub headway_floor: f64,
    /// Speed under which the vehicle counts as stopped (m/s).
    pub stop_speed: f64,
    /// Gap beyond which a lead no longer explains a stop (m).
    pub open_road_range: f64,
    /// Lateral offset at which the body is fully outside the lane (m).
    pub departure_offset: f64,
    /// Time stopped on open road before it becomes an accident (s).
    pub stop_dwell: f64,
}

impl Default for HazardThresholds {
    fn default() -> Self {
        HazardThresholds {
            headway_floor: 1.0,
            stop_speed: 0.1,
            open_road_range: 100.0,
            departure_offset: 2.8,
            stop_dwell: 5.0,
        }
    }
}

/// New findings for one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub new_hazards: Vec<HazardEvent>,
    pub accident: Option<AccidentEvent>,
}

pub struct HazardMonitor {
    thresholds: HazardThresholds,
    vehicle_half_width: f64,
    dt: f64,
    hazards: Vec<HazardEvent>,
    accident: Option<AccidentEvent>,
    stop_since: Option<u64>,
    invading: bool,
    invasion_episodes: u32,
}

impl HazardMonitor {
    pub fn new(thresholds: HazardThresholds, vehicle_width: f64, dt: f64) -> Self {
        HazardMonitor {
            thresholds,
            vehicle_half_width: vehicle_width / 2.0,
            dt,
            hazards: Vec::new(),
            accident: None,
            stop_since: None,
            invading: false,
            invasion_episodes: 0,
        }
    }

    pub fn hazards(&self) -> &[HazardEvent] {
        &self.hazards
    }

    pub fn accident(&self) -> Option<AccidentEvent> {
        self.accident
    }

    pub fn invasion_episodes(&self) -> u32 {
        self.invasion_episodes
    }

    pub fn first_hazard_step(&self) -> Option<u64> {
        self.hazards.iter().map(|h| h.step).min()
    }

    fn record(&mut self, out: &mut StepOutcome, kind: Hazard, step: u64) {
        if !self.hazards.iter().any(|h| h.kind == kind) {
            let event = HazardEvent { kind, step };
            self.hazards.push(event);
            out.new_hazards.push(event);
        }
    }

    /// Evaluates every monitor against the post-step state. `rel_dist` is
    /// the bumper gap to the tracked lead, if one is within sensor range.
    pub fn check(
        &mut self,
        step: u64,
        ego: &VehicleState,
        rel_dist: Option<f64>,
        lane: &LaneGeometry,
        cruise_set: bool,
    ) -> StepOutcome {
        let mut out = StepOutcome::default();
        if self.accident.is_some() {
            return out;
        }
        let th = self.thresholds;

        if let Some(rel) = rel_dist {
            if ego.speed > 0.0 && rel / ego.speed < th.headway_floor {
                self.record(&mut out, Hazard::UnsafeHeadway, step);
            }
        }

        let open_road = match rel_dist {
            None => true,
            Some(rel) => rel > th.open_road_range,
        };
        if cruise_set && ego.speed < th.stop_speed && open_road {
            self.record(&mut out, Hazard::OpenRoadStop, step);
            let since = *self.stop_since.get_or_insert(step);
            if (step - since) as f64 * self.dt >= th.stop_dwell {
                self.accident = Some(AccidentEvent { kind: Accident::ProlongedStop, step });
            }
        } else {
            self.stop_since = None;
        }

        if ego.y.abs() >= th.departure_offset {
            self.record(&mut out, Hazard::LaneDeparture, step);
        }

        let lane_half = lane.lane_width / 2.0;
        let outside = ego.y.abs() + self.vehicle_half_width > lane_half;
        if outside && !self.invading {
            self.invasion_episodes += 1;
        }
        self.invading = outside;

        if let Some(rel) = rel_dist {
            if rel <= 0.0 {
                self.accident = Some(AccidentEvent { kind: Accident::Collision, step });
            }
        }
        if self.accident.is_none() {
            let right_contact = ego.y + self.vehicle_half_width >= lane.right_guardrail();
            let left_contact = ego.y - self.vehicle_half_width <= lane.left_guardrail();
            if right_contact || left_contact {
                self.accident = Some(AccidentEvent { kind: Accident::GuardrailContact, step });
            }
        }

        out.accident = self.accident;
        out
    }
}

/// Full record of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub steps_run: u64,
    pub dt: f64,
    pub hazards: Vec<HazardEvent>,
    pub accident: Option<AccidentEvent>,
    pub alerts: Vec<AlertEvent>,
    pub lane_invasions: u32,
    /// First corrupted step and, for context-gated starts, the rule that
    /// armed it.
    pub attack_activation: Option<(u64, Option<u8>)>,
    pub attack_stop: Option<(u64, StopCause)>,
    pub driver_engaged_step: Option<u64>,
    pub driver_cause: Option<TakeoverCause>,
    pub final_speed: f64,
    pub final_offset: f64,
    /// Seconds from attack activation to the first hazard.
    pub time_to_hazard: Option<f64>,
    /// A hazard predating the attack activation; indicates a broken
    /// controller, not a successful attack.
    pub spontaneous_hazard: bool,
}

impl RunResult {
    pub fn hazard_kinds(&self) -> Vec<Hazard> {
        let mut kinds: Vec<Hazard> = self.hazards.iter().map(|h| h.kind).collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    pub fn has_hazard(&self) -> bool {
        !self.hazards.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 0.01;

    fn lane() -> LaneGeometry {
        LaneGeometry {
            lane_width: 3.7,
            num_lanes: 2,
            centerline_curvature: 0.0,
            guardrail_offset: 2.0,
        }
    }

    fn monitor() -> HazardMonitor {
        HazardMonitor::new(HazardThresholds::default(), 1.9, DT)
    }

    fn ego(speed: f64, y: f64) -> VehicleState {
        let mut s = VehicleState::new(0.0, y, 0.0, speed);
        s.accel = 0.0;
        s
    }

    #[test]
    fn headway_floor_is_strict() {
        let mut m = monitor();
        // Exactly 1.0 s of headway is not yet hazardous.
        let out = m.check(0, &ego(20.0, 0.0), Some(20.0), &lane(), true);
        assert!(out.new_hazards.is_empty());
        let out = m.check(1, &ego(20.0, 0.0), Some(19.8), &lane(), true);
        assert_eq!(out.new_hazards[0].kind, Hazard::UnsafeHeadway);
    }

    #[test]
    fn headway_needs_a_tracked_lead() {
        let mut m = monitor();
        let out = m.check(0, &ego(20.0, 0.0), None, &lane(), true);
        assert!(out.new_hazards.is_empty());
    }

    #[test]
    fn each_hazard_kind_recorded_once_at_first_step() {
        let mut m = monitor();
        m.check(5, &ego(20.0, 0.0), Some(10.0), &lane(), true);
        let out = m.check(6, &ego(20.0, 0.0), Some(9.0), &lane(), true);
        assert!(out.new_hazards.is_empty());
        assert_eq!(m.hazards(), &[HazardEvent { kind: Hazard::UnsafeHeadway, step: 5 }]);
        assert_eq!(m.first_hazard_step(), Some(5));
    }

    #[test]
    fn open_road_stop_requires_cruise_and_open_road() {
        let mut m = monitor();
        // Stopped close behind a lead: explained, no hazard.
        let out = m.check(0, &ego(0.05, 0.0), Some(50.0), &lane(), true);
        assert!(out.new_hazards.is_empty());
        // Lead far ahead: counts as open road.
        let out = m.check(1, &ego(0.05, 0.0), Some(120.0), &lane(), true);
        assert_eq!(out.new_hazards[0].kind, Hazard::OpenRoadStop);

        let mut m = monitor();
        // Cruise not engaged: an intended stop.
        let out = m.check(0, &ego(0.05, 0.0), None, &lane(), false);
        assert!(out.new_hazards.is_empty());
    }

    #[test]
    fn prolonged_stop_needs_dwell_and_dwell_resets() {
        let mut m = monitor();
        for step in 0..499 {
            let out = m.check(step, &ego(0.0, 0.0), None, &lane(), true);
            assert!(out.accident.is_none(), "accident early at step {step}");
        }
        let out = m.check(499, &ego(0.0, 0.0), None, &lane(), true);
        assert!(out.accident.is_none());
        let out = m.check(500, &ego(0.0, 0.0), None, &lane(), true);
        assert_eq!(out.accident.unwrap().kind, Accident::ProlongedStop);

        let mut m = monitor();
        for step in 0..400 {
            m.check(step, &ego(0.0, 0.0), None, &lane(), true);
        }
        // Crawl resets the dwell clock.
        m.check(400, &ego(0.5, 0.0), None, &lane(), true);
        for step in 401..800 {
            let out = m.check(step, &ego(0.0, 0.0), None, &lane(), true);
            assert!(out.accident.is_none(), "dwell should have reset, step {step}");
        }
    }

    #[test]
    fn lane_departure_at_full_body_exit() {
        let mut m = monitor();
        let out = m.check(0, &ego(25.0, 2.79), None, &lane(), true);
        assert!(out.new_hazards.is_empty());
        let out = m.check(1, &ego(25.0, 2.8), None, &lane(), true);
        assert_eq!(out.new_hazards[0].kind, Hazard::LaneDeparture);

        let mut m = monitor();
        let out = m.check(0, &ego(25.0, -2.8), None, &lane(), true);
        assert_eq!(out.new_hazards[0].kind, Hazard::LaneDeparture);
    }

    #[test]
    fn collision_when_gap_closes() {
        let mut m = monitor();
        let out = m.check(10, &ego(30.0, 0.0), Some(0.0), &lane(), true);
        assert_eq!(out.accident.unwrap(), AccidentEvent { kind: Accident::Collision, step: 10 });
        // Monitor is inert after a terminal event.
        let out = m.check(11, &ego(30.0, 0.0), Some(-1.0), &lane(), true);
        assert_eq!(out, StepOutcome::default());
    }

    #[test]
    fn guardrail_contact_uses_body_edges() {
        // Right rail face at 3.85: contact once y + 0.95 reaches it.
        let mut m = monitor();
        let out = m.check(0, &ego(25.0, 2.89), None, &lane(), true);
        assert!(out.accident.is_none());
        let out = m.check(1, &ego(25.0, 2.91), None, &lane(), true);
        assert_eq!(out.accident.unwrap().kind, Accident::GuardrailContact);

        // Left rail sits past the adjacent lane at -7.55.
        let mut m = monitor();
        let out = m.check(0, &ego(25.0, -6.59), None, &lane(), true);
        assert!(out.accident.is_none());
        let out = m.check(1, &ego(25.0, -6.61), None, &lane(), true);
        assert_eq!(out.accident.unwrap().kind, Accident::GuardrailContact);
    }

    #[test]
    fn invasion_episodes_count_rising_edges() {
        let mut m = monitor();
        // Lane line at 1.85, half width 0.95: outside above 0.90.
        for y in [0.0, 0.5, 1.0, 1.2, 0.95, 0.5, 1.1, 1.3, 0.0] {
            m.check(0, &ego(25.0, y), None, &lane(), true);
        }
        assert_eq!(m.invasion_episodes(), 2);
    }
}
