//! Closed-loop execution of one scenario run.
//!
//! Per step: sensors publish onto the bus, the attacker eavesdrops, the
//! stack plans and the safety layer clips, the command goes out as frames,
//! the attacker may rewrite them, the decoded result is checked for a
//! collision warning, the driver model reacts to what actually arrived, and
//! the vehicles advance. Monitors classify the post-step state; an accident
//! terminates the run. The driver's takeover becomes visible to the
//! attacker one step later, matching the lag of a real intrusion detector.

use thiserror::Error;

use crate::attack::{schedule_baseline, AttackEngine, AttackSpec, Schedule};
use crate::bus::{BusError, MessageBus, Payload, Topic};
use crate::can::{decode_frame, encode_command, CanError, Channel, SignalLayout};
use crate::config::SimConfig;
use crate::control::{
    acc_plan, alc_plan, enforce_safety_limits, fcw_check, AlertEvent, ControlCommand,
    SaturationMonitor,
};
use crate::driver::DriverModel;
use crate::hazard::{HazardMonitor, RunResult};
use crate::rng::RunRng;
use crate::scenario::Scenario;
use crate::sim::{headway, lane_offsets, step_vehicle, SimError, VehicleState};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Can(#[from] CanError),
    #[error(transparent)]
    Bus(#[from] BusError),
}

/// Everything that distinguishes one run from another.
#[derive(Debug, Clone, Copy)]
pub struct RunSpec {
    pub scenario: Scenario,
    pub attack: Option<AttackSpec>,
    /// Fixed activation plan; bypasses the strategy's own draw.
    pub schedule_override: Option<Schedule>,
    pub driver_on: bool,
    pub seed: u64,
}

impl RunSpec {
    pub fn attack_free(scenario: Scenario, driver_on: bool, seed: u64) -> Self {
        RunSpec { scenario, attack: None, schedule_override: None, driver_on, seed }
    }

    pub fn attacked(scenario: Scenario, attack: AttackSpec, driver_on: bool, seed: u64) -> Self {
        RunSpec { scenario, attack: Some(attack), schedule_override: None, driver_on, seed }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TraceConfig {
    pub bus: bool,
    pub frames: bool,
    pub states: bool,
}

#[derive(Debug, Default)]
pub struct RunTrace {
    pub bus_lines: Vec<String>,
    pub frame_lines: Vec<String>,
    pub state_lines: Vec<String>,
}

pub fn run_scenario(cfg: &SimConfig, spec: &RunSpec) -> Result<RunResult, RunError> {
    let layout = SignalLayout::standard();
    run_scenario_traced(cfg, spec, &layout, &TraceConfig::default()).map(|(result, _)| result)
}

pub fn run_scenario_traced(
    cfg: &SimConfig,
    spec: &RunSpec,
    layout: &SignalLayout,
    trace_cfg: &TraceConfig,
) -> Result<(RunResult, RunTrace), RunError> {
    let dt = cfg.dt;
    let lane = cfg.lane;
    let limits = cfg.limits;
    let acc_cfg = cfg.acc;
    let alc_cfg = cfg.alc_config();

    let mut rng = RunRng::new(spec.seed);
    let mut engine = spec.attack.map(|attack| {
        let schedule = spec
            .schedule_override
            .unwrap_or_else(|| schedule_baseline(attack.strategy, &cfg.timing, &mut rng));
        AttackEngine::new(attack, schedule, cfg.engine_params())
    });

    let mut bus = MessageBus::new();
    if trace_cfg.bus {
        bus.enable_trace();
    }
    let sensor_topics = [Topic::GpsLocationExternal, Topic::ModelV2, Topic::RadarState];
    let adas_sub = bus.subscribe(&sensor_topics);
    let attacker_sub = bus.subscribe(&sensor_topics);

    let mut ego = VehicleState::new(0.0, cfg.ego_start_offset, 0.0, cfg.v_cruise);
    let mut lead = VehicleState::new(
        spec.scenario.initial_gap + cfg.vehicle.length,
        0.0,
        0.0,
        spec.scenario.lead_speed(0.0),
    );

    let mut saturation = SaturationMonitor::default();
    let mut monitor = HazardMonitor::new(cfg.hazard, cfg.vehicle.width, dt);
    let mut driver = spec
        .driver_on
        .then(|| DriverModel::new(cfg.driver, limits, cfg.vehicle.wheelbase, dt));

    let mut trace = RunTrace::default();
    if trace_cfg.states {
        trace
            .state_lines
            .push("step,t,x,y,heading,speed,accel,brake,steer,lead_x,lead_speed".into());
    }

    let mut alerts: Vec<AlertEvent> = Vec::new();
    let mut driver_engaged_prev = false;
    let mut steps_run = 0u64;
    let mut last_step = 0u64;

    for step in 0..cfg.steps {
        let t = step as f64 * dt;
        lead.speed = spec.scenario.lead_speed(t);

        let (rel_dist, _, rel_speed) = headway(&ego, &lead, cfg.vehicle.length);
        let (d_left, d_right) = lane_offsets(&ego, &lane, cfg.vehicle.width);
        let tracked = rel_dist <= cfg.radar_range;

        bus.publish(Topic::GpsLocationExternal, step, Payload::Gps { speed: ego.speed })?;
        bus.publish(Topic::ModelV2, step, Payload::LaneLines { d_left, d_right })?;
        bus.publish(
            Topic::RadarState,
            step,
            Payload::Radar {
                lead_present: tracked,
                rel_dist: if tracked { rel_dist } else { 0.0 },
                rel_speed: if tracked { rel_speed } else { 0.0 },
            },
        )?;

        let eavesdropped = bus.drain(attacker_sub);
        let sensed = bus.drain(adas_sub);

        let mut lead_track: Option<(f64, f64)> = None;
        for msg in &sensed {
            if let Payload::Radar { lead_present: true, rel_dist, rel_speed } = msg.payload {
                lead_track = Some((rel_dist, rel_speed));
            }
        }

        let (accel, brake) = acc_plan(&ego, lead_track, cfg.v_cruise, &acc_cfg, &limits);
        let steer = alc_plan(&ego, &lane, &alc_cfg);
        let planned = ControlCommand { accel, brake, steer_delta: steer };
        let (clipped, sat_alert) = enforce_safety_limits(
            &planned,
            &limits,
            &ego,
            cfg.v_cruise,
            &mut saturation,
            cfg.saturation_window,
            step,
        );
        bus.publish(Topic::CarControl, step, Payload::Control(clipped))?;

        let tx_frames = encode_command(&clipped, layout)?;
        if trace_cfg.frames {
            for frame in &tx_frames {
                trace.frame_lines.push(format!("{step:05} tx {}", frame.trace_line()));
            }
        }

        let delivered = match engine.as_mut() {
            Some(engine) => {
                engine.observe(&eavesdropped);
                engine.attack_step(step, tx_frames, driver_engaged_prev, layout)
            }
            None => tx_frames,
        };
        if trace_cfg.frames {
            for frame in &delivered {
                trace.frame_lines.push(format!("{step:05} rx {}", frame.trace_line()));
            }
        }

        let mut final_cmd = ControlCommand::NEUTRAL;
        for frame in &delivered {
            let (channel, value) = decode_frame(frame, layout)?;
            match channel {
                Channel::Accel => final_cmd.accel = value,
                Channel::Brake => final_cmd.brake = value,
                Channel::Steer => final_cmd.steer_delta = value,
            }
        }

        let step_alerts: Vec<AlertEvent> =
            sat_alert.into_iter().chain(fcw_check(&final_cmd, &limits, step)).collect();
        alerts.extend(step_alerts.iter().copied());

        let actuated = match driver.as_mut() {
            Some(driver) => {
                driver.observe(step, &final_cmd, &ego, lead_track, &step_alerts, cfg.v_cruise);
                driver.actuate(step, &final_cmd, &ego, &lane, lead_track, cfg.v_cruise)
            }
            None => final_cmd,
        };

        ego = step_vehicle(&ego, &actuated, dt, &lane, cfg.vehicle.wheelbase)?;
        lead.x += lead.speed * dt;

        if trace_cfg.states {
            trace.state_lines.push(format!(
                "{},{:.2},{:.4},{:.4},{:.6},{:.4},{:.3},{:.3},{:.4},{:.4},{:.4}",
                step,
                t,
                ego.x,
                ego.y,
                ego.heading,
                ego.speed,
                actuated.accel,
                actuated.brake,
                actuated.steer_delta,
                lead.x,
                lead.speed
            ));
        }

        let (rel_after, _, _) = headway(&ego, &lead, cfg.vehicle.length);
        let outcome = monitor.check(step, &ego, Some(rel_after), &lane, true);
        if !outcome.new_hazards.is_empty() {
            if let Some(engine) = engine.as_mut() {
                engine.notify_hazard(step);
            }
        }

        driver_engaged_prev = driver.as_ref().is_some_and(|d| d.engaged());
        steps_run = step + 1;
        last_step = step;
        if outcome.accident.is_some() {
            break;
        }
    }

    if let Some(engine) = engine.as_mut() {
        engine.finish(last_step);
    }

    if trace_cfg.bus {
        trace.bus_lines = bus
            .take_trace()
            .into_iter()
            .map(|m| format!("{:05} {} {:?}", m.step, m.topic.label(), m.payload))
            .collect();
    }

    let activation = engine.as_ref().and_then(|e| e.activation());
    let first_hazard = monitor.first_hazard_step();
    let spontaneous = match (first_hazard, activation) {
        (Some(h), Some((a, _))) => h < a,
        (Some(_), None) => true,
        (None, _) => false,
    };
    let time_to_hazard = match (first_hazard, activation) {
        (Some(h), Some((a, _))) if h >= a => Some((h - a) as f64 * dt),
        _ => None,
    };

    let result = RunResult {
        seed: spec.seed,
        steps_run,
        dt,
        hazards: monitor.hazards().to_vec(),
        accident: monitor.accident(),
        alerts,
        lane_invasions: monitor.invasion_episodes(),
        attack_activation: activation,
        attack_stop: engine.as_ref().and_then(|e| e.stop()),
        driver_engaged_step: driver.as_ref().and_then(|d| d.engaged_step()),
        driver_cause: driver.as_ref().and_then(|d| d.cause()),
        final_speed: ego.speed,
        final_offset: ego.y,
        time_to_hazard,
        spontaneous_hazard: spontaneous,
    };
    Ok((result, trace))
}
