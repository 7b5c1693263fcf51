//! Highway following scenarios: one lead vehicle ahead of the ego on a
//! straight two-lane road, distinguished by the lead's speed profile.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    /// Lead holds the slow speed for the whole run.
    SlowLead,
    /// Lead holds the fast speed for the whole run.
    FastLead,
    /// Lead starts fast and ramps down to slow across the ramp window.
    SlowingLead,
    /// Lead starts slow and ramps up to fast across the ramp window.
    QuickeningLead,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId::SlowLead,
        ScenarioId::FastLead,
        ScenarioId::SlowingLead,
        ScenarioId::QuickeningLead,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioId::SlowLead => "slow-lead",
            ScenarioId::FastLead => "fast-lead",
            ScenarioId::SlowingLead => "slowing-lead",
            ScenarioId::QuickeningLead => "quickening-lead",
        }
    }

    /// Stable code used in seed derivation.
    pub fn code(self) -> u64 {
        match self {
            ScenarioId::SlowLead => 1,
            ScenarioId::FastLead => 2,
            ScenarioId::SlowingLead => 3,
            ScenarioId::QuickeningLead => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum LeadProfile {
    Constant(f64),
    Ramp { from: f64, to: f64, t_start: f64, t_end: f64 },
}

/// One concrete run setup: scenario kind plus the initial bumper gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: ScenarioId,
    /// Initial bumper-to-bumper gap to the lead (m).
    pub initial_gap: f64,
    profile: LeadProfile,
}

impl Scenario {
    pub fn new(id: ScenarioId, initial_gap: f64, cfg: &SimConfig) -> Self {
        let profile = match id {
            ScenarioId::SlowLead => LeadProfile::Constant(cfg.lead_slow),
            ScenarioId::FastLead => LeadProfile::Constant(cfg.lead_fast),
            ScenarioId::SlowingLead => LeadProfile::Ramp {
                from: cfg.lead_fast,
                to: cfg.lead_slow,
                t_start: cfg.ramp_start,
                t_end: cfg.ramp_end,
            },
            ScenarioId::QuickeningLead => LeadProfile::Ramp {
                from: cfg.lead_slow,
                to: cfg.lead_fast,
                t_start: cfg.ramp_start,
                t_end: cfg.ramp_end,
            },
        };
        Scenario { id, initial_gap, profile }
    }

    /// Lead speed at elapsed time `t`, linear inside the ramp window.
    pub fn lead_speed(&self, t: f64) -> f64 {
        match self.profile {
            LeadProfile::Constant(v) => v,
            LeadProfile::Ramp { from, to, t_start, t_end } => {
                if t <= t_start {
                    from
                } else if t >= t_end {
                    to
                } else {
                    from + (to - from) * (t - t_start) / (t_end - t_start)
                }
            }
        }
    }
}
