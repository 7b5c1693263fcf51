//! Deterministic closed-loop simulator for a Level-2 driver-assistance stack
//! (adaptive cruise + automated lane centering) under actuator-command
//! attacks injected on the control bus.
//!
//! The crate is organized around a fixed-step scenario loop: sensor topics are
//! published on a process-local message bus, the control stack plans
//! longitudinal and lateral commands, commands are encoded into CAN-style
//! frames, an attack engine may rewrite frames in flight, a driver-reaction
//! model may override the decoded result, and monitors classify hazards and
//! accidents. The campaign layer sweeps attack strategies over scenario
//! matrices and emits aggregate reports.

pub mod attack;
pub mod bus;
pub mod campaign;
pub mod can;
pub mod config;
pub mod control;
pub mod driver;
pub mod hazard;
pub mod rng;
pub mod runner;
pub mod scenario;
pub mod sim;

pub use attack::{AttackAction, AttackEngine, AttackSpec, AttackType, Strategy, ValuePolicy};
pub use can::{CanFrame, SignalLayout};
pub use config::SimConfig;
pub use control::{AlertEvent, AlertKind, ControlCommand, SafetyLimits};
pub use driver::{reaction_ramp, DriverMode, DriverModel};
pub use hazard::{Accident, Hazard, RunResult};
pub use scenario::{Scenario, ScenarioId};
pub use sim::{LaneGeometry, SpeedEstimator, VehicleState};
