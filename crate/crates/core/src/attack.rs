//! Attack engine: eavesdrops the sensor bus, infers the driving context,
//! decides when to strike, and rewrites actuator frames in flight.
//!
//! Four scheduling strategies are supported. The random baselines draw start
//! time and/or duration from seeded uniform windows and write fixed
//! worst-case values. The context-aware strategy arms on a rule table over
//! the inferred context (headway, closing speed, lane-edge distances), fires
//! once at the first compatible match, sustains until a hazard materializes
//! or the driver takes over, and shapes values to sit exactly on the safety
//! limits the stack enforces, so nothing it writes is distinguishable from
//! an aggressive but legal command.

use serde::{Deserialize, Serialize};

use crate::bus::{BusMessage, Payload};
use crate::can::{corrupt_frame, CanFrame, Channel, SignalLayout};
use crate::rng::RunRng;
use crate::sim::SpeedEstimator;

/// Immediate goal a context rule drives toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackAction {
    Accelerate,
    Decelerate,
    SteerLeft,
    SteerRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackType {
    Acceleration,
    Deceleration,
    SteeringLeft,
    SteeringRight,
    AccelerationSteering,
    DecelerationSteering,
}

impl AttackType {
    pub const ALL: [AttackType; 6] = [
        AttackType::Acceleration,
        AttackType::Deceleration,
        AttackType::SteeringLeft,
        AttackType::SteeringRight,
        AttackType::AccelerationSteering,
        AttackType::DecelerationSteering,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AttackType::Acceleration => "acceleration",
            AttackType::Deceleration => "deceleration",
            AttackType::SteeringLeft => "steering-left",
            AttackType::SteeringRight => "steering-right",
            AttackType::AccelerationSteering => "acceleration-steering",
            AttackType::DecelerationSteering => "deceleration-steering",
        }
    }

    /// Stable code used in seed derivation.
    pub fn code(self) -> u64 {
        match self {
            AttackType::Acceleration => 1,
            AttackType::Deceleration => 2,
            AttackType::SteeringLeft => 3,
            AttackType::SteeringRight => 4,
            AttackType::AccelerationSteering => 5,
            AttackType::DecelerationSteering => 6,
        }
    }

    /// Rule action that arms this attack type under context scheduling.
    pub fn compatible_action(self) -> AttackAction {
        match self {
            AttackType::Acceleration | AttackType::AccelerationSteering => AttackAction::Accelerate,
            AttackType::Deceleration | AttackType::DecelerationSteering => AttackAction::Decelerate,
            AttackType::SteeringLeft => AttackAction::SteerLeft,
            AttackType::SteeringRight => AttackAction::SteerRight,
        }
    }

    pub fn steers(self) -> bool {
        !matches!(self, AttackType::Acceleration | AttackType::Deceleration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Uniform start time and uniform duration.
    RandomStartDuration,
    /// Uniform start time, maximal fixed duration.
    RandomStart,
    /// Context-gated start, uniform duration.
    RandomDuration,
    /// Context-gated start, sustained until hazard or driver takeover,
    /// strategic values.
    ContextAware,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::RandomStartDuration,
        Strategy::RandomStart,
        Strategy::RandomDuration,
        Strategy::ContextAware,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::RandomStartDuration => "random-st-dur",
            Strategy::RandomStart => "random-st",
            Strategy::RandomDuration => "random-dur",
            Strategy::ContextAware => "context-aware",
        }
    }

    /// Stable code used in seed derivation.
    pub fn code(self) -> u64 {
        match self {
            Strategy::RandomStartDuration => 1,
            Strategy::RandomStart => 2,
            Strategy::RandomDuration => 3,
            Strategy::ContextAware => 4,
        }
    }

    /// Value policy bound to the strategy by default: baselines write fixed
    /// worst-case values, the context-aware strategy writes strategic ones.
    pub fn default_policy(self) -> ValuePolicy {
        match self {
            Strategy::ContextAware => ValuePolicy::Strategic,
            _ => ValuePolicy::Fixed,
        }
    }

    fn context_started(self) -> bool {
        matches!(self, Strategy::RandomDuration | Strategy::ContextAware)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValuePolicy {
    /// Raw actuation maxima; effective but visibly out of bounds.
    Fixed,
    /// Values held exactly at the enforced limits; never anomalous.
    Strategic,
}

impl ValuePolicy {
    pub fn label(self) -> &'static str {
        match self {
            ValuePolicy::Fixed => "fixed",
            ValuePolicy::Strategic => "strategic",
        }
    }
}

/// Corruption targets for one value policy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttackValues {
    pub accel: f64,
    pub brake: f64,
    pub steer: f64,
}

/// Thresholds of the context rule table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContextThresholds {
    /// Headway time below which following is considered unsafe (s).
    pub t_safe: f64,
    /// Minimum speed for the open-road deceleration rule (m/s).
    pub beta1: f64,
    /// Minimum speed for the lane-edge steering rules (m/s).
    pub beta2: f64,
    /// Lane-line distance at or under which an edge rule arms (m).
    pub edge_margin: f64,
}

/// Driving context assembled from eavesdropped sensor messages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextState {
    pub speed: f64,
    pub lead_present: bool,
    pub rel_dist: f64,
    /// Ego speed minus lead speed; zero when no lead is tracked.
    pub rel_speed: f64,
    /// Headway time; infinite with no tracked lead or at standstill.
    pub hwt: f64,
    pub d_left: f64,
    pub d_right: f64,
}

/// Evaluates the rule table. Returns every matching `(rule id, action)`;
/// simultaneous matches all fire.
pub fn match_context(ctx: &ContextState, th: &ContextThresholds) -> Vec<(u8, AttackAction)> {
    let mut hits = Vec::new();
    if ctx.lead_present && ctx.hwt <= th.t_safe && ctx.rel_speed > 0.0 {
        hits.push((1, AttackAction::Accelerate));
    }
    if ctx.hwt > th.t_safe && ctx.rel_speed <= 0.0 && ctx.speed > th.beta1 {
        hits.push((2, AttackAction::Decelerate));
    }
    if ctx.d_left <= th.edge_margin && ctx.speed > th.beta2 {
        hits.push((3, AttackAction::SteerLeft));
    }
    if ctx.d_right <= th.edge_margin && ctx.speed > th.beta2 {
        hits.push((4, AttackAction::SteerRight));
    }
    hits
}

/// What one attack run will do, independent of any engine state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttackSpec {
    pub attack_type: AttackType,
    pub strategy: Strategy,
    pub value_policy: ValuePolicy,
}

impl AttackSpec {
    /// Spec with the strategy's default value policy.
    pub fn new(attack_type: AttackType, strategy: Strategy) -> Self {
        AttackSpec { attack_type, strategy, value_policy: strategy.default_policy() }
    }
}

/// Timing windows the random baselines draw from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimingWindows {
    pub start_min: f64,
    pub start_max: f64,
    pub duration_min: f64,
    pub duration_max: f64,
}

/// Presampled activation plan. `start` is None for context-gated strategies,
/// `duration` is None when the attack sustains until hazard or takeover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub start: Option<f64>,
    pub duration: Option<f64>,
}

/// Draws the activation plan for a strategy. Draw order is fixed (start
/// before duration) so a seed fully determines the schedule.
pub fn schedule_baseline(strategy: Strategy, windows: &TimingWindows, rng: &mut RunRng) -> Schedule {
    match strategy {
        Strategy::RandomStartDuration => Schedule {
            start: Some(rng.uniform(windows.start_min, windows.start_max)),
            duration: Some(rng.uniform(windows.duration_min, windows.duration_max)),
        },
        Strategy::RandomStart => Schedule {
            start: Some(rng.uniform(windows.start_min, windows.start_max)),
            duration: Some(windows.duration_max),
        },
        Strategy::RandomDuration => Schedule {
            start: None,
            duration: Some(rng.uniform(windows.duration_min, windows.duration_max)),
        },
        Strategy::ContextAware => Schedule { start: None, duration: None },
    }
}

/// Why an attack stopped corrupting frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopCause {
    DurationExpired,
    DriverEngaged,
    HazardReached,
    RunEnded,
    NeverActivated,
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Armed,
    Active { steer_sign: f64 },
    Done,
}

/// Per-run attack state machine.
pub struct AttackEngine {
    spec: AttackSpec,
    schedule: Schedule,
    thresholds: ContextThresholds,
    fixed: AttackValues,
    strategic: AttackValues,
    estimator: Option<SpeedEstimator>,
    estimator_gain: f64,
    speed_ceiling: f64,
    dt: f64,
    phase: Phase,
    ctx: Option<ContextState>,
    activation: Option<(u64, Option<u8>)>,
    stop: Option<(u64, StopCause)>,
}

/// Everything the engine needs besides the drawn schedule.
pub struct EngineParams {
    pub thresholds: ContextThresholds,
    pub fixed: AttackValues,
    pub strategic: AttackValues,
    pub estimator_gain: f64,
    /// Absolute speed the strategic acceleration cap respects (m/s).
    pub speed_ceiling: f64,
    pub dt: f64,
}

impl AttackEngine {
    pub fn new(spec: AttackSpec, schedule: Schedule, params: EngineParams) -> Self {
        AttackEngine {
            spec,
            schedule,
            thresholds: params.thresholds,
            fixed: params.fixed,
            strategic: params.strategic,
            estimator: None,
            estimator_gain: params.estimator_gain,
            speed_ceiling: params.speed_ceiling,
            dt: params.dt,
            phase: Phase::Armed,
            ctx: None,
            activation: None,
            stop: None,
        }
    }

    pub fn spec(&self) -> &AttackSpec {
        &self.spec
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// First corrupted step, if the attack ever fired, with the rule that
    /// armed it for context-gated strategies.
    pub fn activation(&self) -> Option<(u64, Option<u8>)> {
        self.activation
    }

    pub fn stop(&self) -> Option<(u64, StopCause)> {
        self.stop
    }

    /// Folds freshly eavesdropped messages into the cached context and feeds
    /// speed measurements to the estimator while an attack is active.
    pub fn observe(&mut self, messages: &[BusMessage]) {
        for msg in messages {
            match msg.payload {
                Payload::Gps { speed } => {
                    let ctx = self.ctx.get_or_insert(ContextState {
                        speed,
                        lead_present: false,
                        rel_dist: f64::INFINITY,
                        rel_speed: 0.0,
                        hwt: f64::INFINITY,
                        d_left: f64::INFINITY,
                        d_right: f64::INFINITY,
                    });
                    ctx.speed = speed;
                    if matches!(self.phase, Phase::Active { .. }) {
                        match &mut self.estimator {
                            Some(est) => {
                                est.update(speed);
                            }
                            None => {
                                self.estimator =
                                    Some(SpeedEstimator::new(speed, self.estimator_gain));
                            }
                        }
                    }
                }
                Payload::LaneLines { d_left, d_right } => {
                    if let Some(ctx) = &mut self.ctx {
                        ctx.d_left = d_left;
                        ctx.d_right = d_right;
                    }
                }
                Payload::Radar { lead_present, rel_dist, rel_speed } => {
                    if let Some(ctx) = &mut self.ctx {
                        ctx.lead_present = lead_present;
                        ctx.rel_dist = if lead_present { rel_dist } else { f64::INFINITY };
                        ctx.rel_speed = if lead_present { rel_speed } else { 0.0 };
                    }
                }
                Payload::Control(_) => {}
            }
        }
        if let Some(ctx) = &mut self.ctx {
            ctx.hwt = if ctx.lead_present && ctx.speed > 0.0 {
                ctx.rel_dist / ctx.speed
            } else {
                f64::INFINITY
            };
        }
    }

    /// Current inferred context; absent until a speed message has been seen.
    pub fn infer_context(&self) -> Option<&ContextState> {
        self.ctx.as_ref()
    }

    /// One-shot activation check for the current step.
    fn select_attack(&mut self, step: u64) -> Option<Option<u8>> {
        let now = step as f64 * self.dt;
        if self.spec.strategy.context_started() {
            let ctx = self.ctx.as_ref()?;
            let wanted = self.spec.attack_type.compatible_action();
            match_context(ctx, &self.thresholds)
                .into_iter()
                .find(|(_, action)| *action == wanted)
                .map(|(rule, _)| Some(rule))
        } else {
            let start = self.schedule.start.expect("timed strategies carry a start");
            (now >= start).then_some(None)
        }
    }

    /// Value corruption for the active attack, per channel. Strategic
    /// acceleration is capped so one prediction step never crosses the speed
    /// ceiling; everything else sits on the policy's limits.
    fn strategic_value(&mut self) -> AttackValues {
        let base = match self.spec.value_policy {
            ValuePolicy::Fixed => self.fixed,
            ValuePolicy::Strategic => self.strategic,
        };
        let mut values = base;
        if self.spec.value_policy == ValuePolicy::Strategic {
            if let Some(est) = &mut self.estimator {
                let mut a = base.accel;
                if est.estimate + a * self.dt > self.speed_ceiling {
                    a = ((self.speed_ceiling - est.estimate) / self.dt).max(0.0);
                }
                est.predict(a, self.dt);
                values.accel = a;
            }
        }
        values
    }

    /// Nearer lane edge decides the steering direction of combined attacks;
    /// pure steering types carry their direction in the type.
    fn steer_sign(&self) -> f64 {
        match self.spec.attack_type {
            AttackType::SteeringLeft => -1.0,
            AttackType::SteeringRight => 1.0,
            _ => match &self.ctx {
                Some(ctx) if ctx.d_left < ctx.d_right => -1.0,
                _ => 1.0,
            },
        }
    }

    fn deactivate(&mut self, step: u64, cause: StopCause) {
        if self.stop.is_none() {
            self.stop = Some((step, cause));
        }
        self.phase = Phase::Done;
    }

    /// A hazard ends a context-aware attack; its work is done.
    pub fn notify_hazard(&mut self, step: u64) {
        if self.spec.strategy == Strategy::ContextAware
            && matches!(self.phase, Phase::Active { .. })
        {
            self.deactivate(step, StopCause::HazardReached);
        }
    }

    pub fn finish(&mut self, step: u64) {
        match self.phase {
            Phase::Active { .. } => self.deactivate(step, StopCause::RunEnded),
            Phase::Armed => {
                self.stop = Some((step, StopCause::NeverActivated));
                self.phase = Phase::Done;
            }
            Phase::Done => {}
        }
    }

    /// Passes the step's frames through, corrupting the attacked channels
    /// while active. Inactive steps return the frames byte-identical.
    pub fn attack_step(
        &mut self,
        step: u64,
        frames: Vec<CanFrame>,
        driver_engaged: bool,
        layout: &SignalLayout,
    ) -> Vec<CanFrame> {
        if driver_engaged && !matches!(self.phase, Phase::Done) {
            self.deactivate(step, StopCause::DriverEngaged);
        }

        if matches!(self.phase, Phase::Armed) {
            if let Some(rule) = self.select_attack(step) {
                self.activation = Some((step, rule));
                self.phase = Phase::Active { steer_sign: self.steer_sign() };
                if self.estimator.is_none() {
                    if let Some(ctx) = &self.ctx {
                        self.estimator = Some(SpeedEstimator::new(ctx.speed, self.estimator_gain));
                    }
                }
            }
        }

        if let Phase::Active { steer_sign } = self.phase {
            if let (Some(duration), Some((start_step, _))) = (self.schedule.duration, self.activation)
            {
                let start = match self.schedule.start {
                    Some(s) => s,
                    None => start_step as f64 * self.dt,
                };
                if step as f64 * self.dt >= start + duration {
                    self.deactivate(step, StopCause::DurationExpired);
                    return frames;
                }
            }

            let values = self.strategic_value();
            let (accel, brake, steer) = match self.spec.attack_type {
                AttackType::Acceleration => (Some(values.accel), Some(0.0), None),
                AttackType::Deceleration => (Some(0.0), Some(values.brake), None),
                AttackType::SteeringLeft | AttackType::SteeringRight => {
                    (None, None, Some(steer_sign * values.steer))
                }
                AttackType::AccelerationSteering => {
                    (Some(values.accel), Some(0.0), Some(steer_sign * values.steer))
                }
                AttackType::DecelerationSteering => {
                    (Some(0.0), Some(values.brake), Some(steer_sign * values.steer))
                }
            };

            return frames
                .into_iter()
                .map(|frame| {
                    let channel = layout
                        .messages
                        .iter()
                        .find(|m| m.id == frame.id)
                        .map(|m| m.signal.channel);
                    let target = match channel {
                        Some(Channel::Accel) => accel,
                        Some(Channel::Brake) => brake,
                        Some(Channel::Steer) => steer,
                        None => None,
                    };
                    match (channel, target) {
                        (Some(ch), Some(value)) => corrupt_frame(&frame, ch, value, layout)
                            .expect("attack values fit layout ranges"),
                        _ => frame,
                    }
                })
                .collect();
        }

        frames
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::can::{decode_frame, encode_command};
    use crate::control::ControlCommand;

    fn thresholds() -> ContextThresholds {
        ContextThresholds { t_safe: 2.0, beta1: 11.176, beta2: 11.176, edge_margin: 0.1 }
    }

    fn windows() -> TimingWindows {
        TimingWindows { start_min: 5.0, start_max: 40.0, duration_min: 0.5, duration_max: 2.5 }
    }

    fn params() -> EngineParams {
        EngineParams {
            thresholds: thresholds(),
            fixed: AttackValues { accel: 2.4, brake: -4.0, steer: 0.5 },
            strategic: AttackValues { accel: 2.0, brake: -3.5, steer: 0.25 },
            estimator_gain: 0.5,
            speed_ceiling: 1.1 * 26.8224,
            dt: 0.01,
        }
    }

    fn ctx(speed: f64, hwt: f64, rel_speed: f64, d_left: f64, d_right: f64) -> ContextState {
        ContextState {
            speed,
            lead_present: hwt.is_finite(),
            rel_dist: if hwt.is_finite() { hwt * speed } else { f64::INFINITY },
            rel_speed,
            hwt,
            d_left,
            d_right,
        }
    }

    fn messages(speed: f64, rel_dist: f64, d_left: f64, d_right: f64) -> Vec<BusMessage> {
        use crate::bus::Topic;
        vec![
            BusMessage { topic: Topic::GpsLocationExternal, step: 0, payload: Payload::Gps { speed } },
            BusMessage {
                topic: Topic::ModelV2,
                step: 0,
                payload: Payload::LaneLines { d_left, d_right },
            },
            BusMessage {
                topic: Topic::RadarState,
                step: 0,
                payload: Payload::Radar { lead_present: true, rel_dist, rel_speed: 5.0 },
            },
        ]
    }

    #[test]
    fn rule_one_fires_on_close_and_closing() {
        let hits = match_context(&ctx(26.8224, 1.8641, 11.176, 1.0, 1.0), &thresholds());
        assert_eq!(hits, vec![(1, AttackAction::Accelerate)]);
    }

    #[test]
    fn rule_two_fires_on_open_road_cruise() {
        let hits = match_context(&ctx(15.0, 4.0, -2.0, 1.0, 1.0), &thresholds());
        assert_eq!(hits, vec![(2, AttackAction::Decelerate)]);
    }

    #[test]
    fn rule_two_fires_with_no_lead_at_all() {
        let mut c = ctx(15.0, f64::INFINITY, 0.0, 1.0, 1.0);
        c.lead_present = false;
        let hits = match_context(&c, &thresholds());
        assert_eq!(hits, vec![(2, AttackAction::Decelerate)]);
    }

    #[test]
    fn edge_rules_need_speed_over_beta2() {
        let hits = match_context(&ctx(26.8, 4.0, 5.0, 0.05, 1.8), &thresholds());
        assert!(hits.contains(&(3, AttackAction::SteerLeft)));
        let slow = match_context(&ctx(8.0, 4.0, 5.0, 0.05, 1.8), &thresholds());
        assert!(!slow.iter().any(|(id, _)| *id == 3));
    }

    #[test]
    fn simultaneous_rules_all_returned() {
        // Close behind a slower lead while hugging the left line.
        let hits = match_context(&ctx(26.8, 1.5, 5.0, 0.05, 1.8), &thresholds());
        assert_eq!(hits.len(), 2);
        assert!(hits.contains(&(1, AttackAction::Accelerate)));
        assert!(hits.contains(&(3, AttackAction::SteerLeft)));
    }

    #[test]
    fn schedules_respect_strategy_windows() {
        let w = windows();
        for seed in 0..200 {
            let mut rng = RunRng::new(seed);
            let s = schedule_baseline(Strategy::RandomStartDuration, &w, &mut rng);
            let start = s.start.unwrap();
            let dur = s.duration.unwrap();
            assert!((5.0..40.0).contains(&start));
            assert!((0.5..2.5).contains(&dur));

            let mut rng = RunRng::new(seed);
            let s = schedule_baseline(Strategy::RandomStart, &w, &mut rng);
            assert!((5.0..40.0).contains(&s.start.unwrap()));
            assert_eq!(s.duration, Some(2.5));

            let mut rng = RunRng::new(seed);
            let s = schedule_baseline(Strategy::RandomDuration, &w, &mut rng);
            assert_eq!(s.start, None);
            assert!((0.5..2.5).contains(&s.duration.unwrap()));

            let mut rng = RunRng::new(seed);
            let s = schedule_baseline(Strategy::ContextAware, &w, &mut rng);
            assert_eq!(s, Schedule { start: None, duration: None });
        }
    }

    fn frames() -> (Vec<CanFrame>, SignalLayout) {
        let layout = SignalLayout::standard();
        let cmd = ControlCommand { accel: 0.4, brake: 0.0, steer_delta: -0.1 };
        (encode_command(&cmd, &layout).unwrap(), layout)
    }

    #[test]
    fn inactive_engine_passes_frames_byte_identical() {
        let (frames_in, layout) = frames();
        let mut engine = AttackEngine::new(
            AttackSpec::new(AttackType::Acceleration, Strategy::RandomStart),
            Schedule { start: Some(30.0), duration: Some(2.5) },
            params(),
        );
        let out = engine.attack_step(0, frames_in.clone(), false, &layout);
        assert_eq!(out, frames_in);
    }

    #[test]
    fn timed_attack_activates_corrupts_and_expires_once() {
        let (frames_in, layout) = frames();
        let mut engine = AttackEngine::new(
            AttackSpec::new(AttackType::SteeringRight, Strategy::RandomStart),
            Schedule { start: Some(0.5), duration: Some(1.0) },
            params(),
        );
        // Before start: untouched.
        let out = engine.attack_step(10, frames_in.clone(), false, &layout);
        assert_eq!(out, frames_in);
        // Active: steering frame carries the fixed limit.
        let out = engine.attack_step(50, frames_in.clone(), false, &layout);
        let (_, steer) = decode_frame(&out[0], &layout).unwrap();
        assert!((steer - 0.5).abs() < 1e-9);
        // Longitudinal frames untouched by a pure steering attack.
        assert_eq!(out[1], frames_in[1]);
        assert_eq!(out[2], frames_in[2]);
        assert_eq!(engine.activation(), Some((50, None)));
        // Past start + duration: expired, one-shot.
        let out = engine.attack_step(151, frames_in.clone(), false, &layout);
        assert_eq!(out, frames_in);
        assert_eq!(engine.stop(), Some((151, StopCause::DurationExpired)));
        let out = engine.attack_step(2000, frames_in.clone(), false, &layout);
        assert_eq!(out, frames_in);
    }

    #[test]
    fn context_attack_waits_for_compatible_rule() {
        let (frames_in, layout) = frames();
        let mut engine = AttackEngine::new(
            AttackSpec::new(AttackType::Acceleration, Strategy::ContextAware),
            Schedule { start: None, duration: None },
            params(),
        );
        // Far lead: rule 1 not armed, even though rule 4 would match.
        engine.observe(&messages(26.8224, 120.0, 1.8, 0.05));
        let out = engine.attack_step(0, frames_in.clone(), false, &layout);
        assert_eq!(out, frames_in);
        assert!(engine.activation().is_none());
        // Lead closes inside t_safe: rule 1 arms the acceleration attack.
        engine.observe(&messages(26.8224, 50.0, 1.8, 0.05));
        let out = engine.attack_step(100, frames_in.clone(), false, &layout);
        let (_, accel) = decode_frame(&out[1], &layout).unwrap();
        let (_, brake) = decode_frame(&out[2], &layout).unwrap();
        assert!((accel - 2.0).abs() < 1e-9);
        assert_eq!(brake, 0.0);
        assert_eq!(engine.activation(), Some((100, Some(1))));
    }

    #[test]
    fn strategic_accel_caps_at_speed_ceiling() {
        let (frames_in, layout) = frames();
        let mut engine = AttackEngine::new(
            AttackSpec::new(AttackType::Acceleration, Strategy::ContextAware),
            Schedule { start: None, duration: None },
            params(),
        );
        let ceiling = 1.1 * 26.8224;
        // Arm and activate at the ceiling: no headroom, zero acceleration.
        engine.observe(&messages(ceiling, 40.0, 1.8, 1.8));
        let out = engine.attack_step(0, frames_in.clone(), false, &layout);
        let (_, accel) = decode_frame(&out[1], &layout).unwrap();
        assert_eq!(accel, 0.0);

        // Worst case one step under the ceiling: the prediction step must not
        // cross it.
        let mut engine = AttackEngine::new(
            AttackSpec::new(AttackType::Acceleration, Strategy::ContextAware),
            Schedule { start: None, duration: None },
            params(),
        );
        engine.observe(&messages(ceiling - 0.005, 40.0, 1.8, 1.8));
        let out = engine.attack_step(0, frames_in.clone(), false, &layout);
        let (_, accel) = decode_frame(&out[1], &layout).unwrap();
        assert!(accel >= 0.0);
        assert!((ceiling - 0.005) + accel * 0.01 <= ceiling + 1e-9);
    }

    #[test]
    fn driver_engagement_kills_attack_permanently() {
        let (frames_in, layout) = frames();
        let mut engine = AttackEngine::new(
            AttackSpec::new(AttackType::Deceleration, Strategy::RandomStart),
            Schedule { start: Some(0.0), duration: Some(2.5) },
            params(),
        );
        let out = engine.attack_step(10, frames_in.clone(), false, &layout);
        let (_, brake) = decode_frame(&out[2], &layout).unwrap();
        assert!((brake + 4.0).abs() < 1e-9);

        let out = engine.attack_step(11, frames_in.clone(), true, &layout);
        assert_eq!(out, frames_in);
        assert_eq!(engine.stop(), Some((11, StopCause::DriverEngaged)));
        let out = engine.attack_step(12, frames_in.clone(), false, &layout);
        assert_eq!(out, frames_in);
    }

    #[test]
    fn hazard_ends_context_aware_attack() {
        let (frames_in, layout) = frames();
        let mut engine = AttackEngine::new(
            AttackSpec::new(AttackType::SteeringRight, Strategy::ContextAware),
            Schedule { start: None, duration: None },
            params(),
        );
        engine.observe(&messages(26.8224, 120.0, 1.8, 0.05));
        let out = engine.attack_step(5, frames_in.clone(), false, &layout);
        let (_, steer) = decode_frame(&out[0], &layout).unwrap();
        assert!((steer - 0.25).abs() < 1e-9);

        engine.notify_hazard(130);
        let out = engine.attack_step(131, frames_in.clone(), false, &layout);
        assert_eq!(out, frames_in);
        assert_eq!(engine.stop(), Some((130, StopCause::HazardReached)));
    }

    #[test]
    fn combined_attack_steers_toward_nearer_edge() {
        let (frames_in, layout) = frames();
        let mut engine = AttackEngine::new(
            AttackSpec::new(AttackType::DecelerationSteering, Strategy::ContextAware),
            Schedule { start: None, duration: None },
            params(),
        );
        // Cruising context (rule 2) while nearer the left line.
        let mut msgs = messages(15.0, 200.0, 0.3, 1.5);
        msgs[2] = BusMessage {
            topic: crate::bus::Topic::RadarState,
            step: 0,
            payload: Payload::Radar { lead_present: true, rel_dist: 200.0, rel_speed: -1.0 },
        };
        engine.observe(&msgs);
        let out = engine.attack_step(0, frames_in, false, &layout);
        let (_, steer) = decode_frame(&out[0], &layout).unwrap();
        assert!((steer + 0.25).abs() < 1e-9, "expected left steer, got {steer}");
        let (_, accel) = decode_frame(&out[1], &layout).unwrap();
        let (_, brake) = decode_frame(&out[2], &layout).unwrap();
        assert_eq!(accel, 0.0);
        assert!((brake + 3.5).abs() < 1e-9);
    }

    #[test]
    fn context_cache_tracks_headway_exactly() {
        let mut engine = AttackEngine::new(
            AttackSpec::new(AttackType::Acceleration, Strategy::ContextAware),
            Schedule { start: None, duration: None },
            params(),
        );
        engine.observe(&messages(26.8224, 50.0, 0.9, 0.9));
        let ctx = engine.infer_context().unwrap();
        assert_eq!(ctx.hwt, 50.0 / 26.8224);
        assert!((ctx.hwt - 1.8641).abs() < 1e-4);
        assert_eq!(ctx.d_left, 0.9);
        assert_eq!(ctx.d_right, 0.9);
    }
}
