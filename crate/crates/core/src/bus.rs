//! Process-local publish/subscribe bus carrying the sensor and control
//! topics of one run. Delivery is synchronous and per-subscriber FIFO;
//! subscribers registered earlier receive each message first, and nothing is
//! replayed to late subscribers.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControlCommand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topic {
    GpsLocationExternal,
    ModelV2,
    RadarState,
    CarControl,
}

impl Topic {
    pub fn label(self) -> &'static str {
        match self {
            Topic::GpsLocationExternal => "gpsLocationExternal",
            Topic::ModelV2 => "modelV2",
            Topic::RadarState => "radarState",
            Topic::CarControl => "carControl",
        }
    }
}

/// Topic payloads. Each topic accepts exactly one variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    /// Measured forward speed (m/s).
    Gps { speed: f64 },
    /// Perceived distances from the vehicle edges to the lane lines (m,
    /// clamped at zero when an edge is on or past a line).
    LaneLines { d_left: f64, d_right: f64 },
    /// Radar track of the lead vehicle, if one is in range.
    Radar { lead_present: bool, rel_dist: f64, rel_speed: f64 },
    /// Planned actuator command as published by the control stack.
    Control(ControlCommand),
}

impl Payload {
    fn topic(&self) -> Topic {
        match self {
            Payload::Gps { .. } => Topic::GpsLocationExternal,
            Payload::LaneLines { .. } => Topic::ModelV2,
            Payload::Radar { .. } => Topic::RadarState,
            Payload::Control(_) => Topic::CarControl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusMessage {
    pub topic: Topic,
    pub step: u64,
    pub payload: Payload,
}

#[derive(Debug, Error, PartialEq)]
pub enum BusError {
    #[error("payload schema does not match topic {0:?}")]
    SchemaMismatch(Topic),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubscriberId(usize);

struct Subscriber {
    topics: Vec<Topic>,
    queue: VecDeque<BusMessage>,
}

/// One run's bus. Owns a queue per subscriber; publishing fans out into every
/// matching queue in registration order.
#[derive(Default)]
pub struct MessageBus {
    subscribers: Vec<Subscriber>,
    trace: Option<Vec<BusMessage>>,
}

impl MessageBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps a copy of every published message for post-run dumps.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn subscribe(&mut self, topics: &[Topic]) -> SubscriberId {
        self.subscribers.push(Subscriber { topics: topics.to_vec(), queue: VecDeque::new() });
        SubscriberId(self.subscribers.len() - 1)
    }

    /// Publishes one message; the payload must match the topic schema.
    pub fn publish(&mut self, topic: Topic, step: u64, payload: Payload) -> Result<(), BusError> {
        if payload.topic() != topic {
            return Err(BusError::SchemaMismatch(topic));
        }
        let msg = BusMessage { topic, step, payload };
        for sub in &mut self.subscribers {
            if sub.topics.contains(&topic) {
                sub.queue.push_back(msg);
            }
        }
        if let Some(trace) = &mut self.trace {
            trace.push(msg);
        }
        Ok(())
    }

    /// Removes and returns everything queued for one subscriber, oldest first.
    pub fn drain(&mut self, id: SubscriberId) -> Vec<BusMessage> {
        self.subscribers[id.0].queue.drain(..).collect()
    }

    pub fn take_trace(&mut self) -> Vec<BusMessage> {
        self.trace.take().unwrap_or_default()
    }
}
