//! Frame codec for the actuator command bus.
//!
//! Commands ride in classic 8-byte frames with 11-bit identifiers. Signals
//! are packed little-endian starting at a given bit, scaled and offset to
//! integers, and every frame carries a one-byte additive checksum in the
//! final payload byte. The layout is data-driven: a small text format (one
//! signal per line) maps message ids to command channels, so alternative
//! layouts can be loaded without recompiling.
//!
//! Checksum rule: the sum of both identifier bytes and payload bytes 0..=6,
//! modulo 256, stored in payload byte 7.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControlCommand;

/// Highest bit a signal may occupy; byte 7 is reserved for the checksum.
const SIGNAL_BIT_CEILING: u32 = 56;

#[derive(Debug, Error, PartialEq)]
pub enum CanError {
    #[error("message id {0:#05x} not present in layout")]
    UnknownMessageId(u16),
    #[error("checksum mismatch on frame {id:#05x}")]
    ChecksumMismatch { id: u16 },
    #[error("value {value} out of range for signal {name}")]
    SignalOutOfRange { name: &'static str, value: f64 },
    #[error("layout line {line}: {reason}")]
    LayoutParse { line: usize, reason: String },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
}

/// Command channel a signal feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Accel,
    Brake,
    Steer,
}

impl Channel {
    pub fn signal_name(self) -> &'static str {
        match self {
            Channel::Accel => "accel",
            Channel::Brake => "brake",
            Channel::Steer => "steer_delta",
        }
    }

    fn from_signal_name(name: &str) -> Option<Self> {
        match name {
            "accel" => Some(Channel::Accel),
            "brake" => Some(Channel::Brake),
            "steer_delta" => Some(Channel::Steer),
            _ => None,
        }
    }
}

/// Placement and scaling of one signal within its frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SignalSpec {
    pub channel: Channel,
    pub start_bit: u32,
    pub bit_len: u32,
    pub scale: f64,
    pub offset: f64,
    pub signed: bool,
}

/// One frame definition: an identifier and the signal it carries.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MessageSpec {
    pub id: u16,
    pub signal: SignalSpec,
}

/// Complete command layout. Frames encode in declaration order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalLayout {
    pub messages: Vec<MessageSpec>,
}

/// An 8-byte frame with an 11-bit identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanFrame {
    pub id: u16,
    pub payload: [u8; 8],
}

impl CanFrame {
    /// Additive checksum over both id bytes and payload bytes 0..=6.
    pub fn checksum(id: u16, payload: &[u8; 8]) -> u8 {
        let mut sum = (id & 0xFF) as u32 + (id >> 8) as u32;
        for &b in &payload[..7] {
            sum += b as u32;
        }
        (sum & 0xFF) as u8
    }

    pub fn checksum_valid(&self) -> bool {
        Self::checksum(self.id, &self.payload) == self.payload[7]
    }

    /// Trace form `ID#PAYLOAD`, e.g. `0E4#190000000000002A`.
    pub fn trace_line(&self) -> String {
        let mut s = format!("{:03X}#", self.id);
        for b in self.payload {
            s.push_str(&format!("{:02X}", b));
        }
        s
    }
}

impl fmt::Display for CanFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.trace_line())
    }
}

fn write_bits(payload: &mut [u8; 8], start: u32, len: u32, raw: u64) {
    for i in 0..len {
        let bit = start + i;
        let mask = 1u8 << (bit % 8);
        let byte = &mut payload[(bit / 8) as usize];
        if (raw >> i) & 1 == 1 {
            *byte |= mask;
        } else {
            *byte &= !mask;
        }
    }
}

fn read_bits(payload: &[u8; 8], start: u32, len: u32) -> u64 {
    let mut raw = 0u64;
    for i in 0..len {
        let bit = start + i;
        if payload[(bit / 8) as usize] >> (bit % 8) & 1 == 1 {
            raw |= 1 << i;
        }
    }
    raw
}

fn to_raw(spec: &SignalSpec, value: f64) -> Result<u64, CanError> {
    let scaled = ((value - spec.offset) / spec.scale).round();
    let (lo, hi) = if spec.signed {
        (-(1i64 << (spec.bit_len - 1)) as f64, ((1i64 << (spec.bit_len - 1)) - 1) as f64)
    } else {
        (0.0, ((1u64 << spec.bit_len) - 1) as f64)
    };
    if !(lo..=hi).contains(&scaled) || !scaled.is_finite() {
        return Err(CanError::SignalOutOfRange { name: spec.channel.signal_name(), value });
    }
    let raw = scaled as i64;
    Ok((raw as u64) & (u64::MAX >> (64 - spec.bit_len)))
}

fn from_raw(spec: &SignalSpec, raw: u64) -> f64 {
    let value = if spec.signed {
        let shift = 64 - spec.bit_len;
        (((raw << shift) as i64) >> shift) as f64
    } else {
        raw as f64
    };
    value * spec.scale + spec.offset
}

impl SignalLayout {
    /// Default three-frame layout: steering on 0x0E4, gas on 0x200, brake on
    /// 0x201, all 16-bit signed at 0.01 physical units per bit.
    pub fn standard() -> Self {
        let signal = |channel| SignalSpec {
            channel,
            start_bit: 0,
            bit_len: 16,
            scale: 0.01,
            offset: 0.0,
            signed: true,
        };
        SignalLayout {
            messages: vec![
                MessageSpec { id: 0x0E4, signal: signal(Channel::Steer) },
                MessageSpec { id: 0x200, signal: signal(Channel::Accel) },
                MessageSpec { id: 0x201, signal: signal(Channel::Brake) },
            ],
        }
    }

    /// Parses the layout text format: one signal per non-comment line,
    /// `<id> <signal> <start_bit> <length> <scale> <offset> [signed|unsigned]`.
    pub fn parse(text: &str) -> Result<Self, CanError> {
        let mut messages = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| CanError::LayoutParse { line: line_no, reason };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !(6..=7).contains(&tokens.len()) {
                return Err(err(format!("expected 6 or 7 fields, found {}", tokens.len())));
            }
            let id = parse_id(tokens[0])
                .ok_or_else(|| err(format!("bad message id {:?}", tokens[0])))?;
            let channel = Channel::from_signal_name(tokens[1])
                .ok_or_else(|| err(format!("unknown signal name {:?}", tokens[1])))?;
            let start_bit: u32 =
                tokens[2].parse().map_err(|_| err(format!("bad start bit {:?}", tokens[2])))?;
            let bit_len: u32 =
                tokens[3].parse().map_err(|_| err(format!("bad length {:?}", tokens[3])))?;
            let scale: f64 =
                tokens[4].parse().map_err(|_| err(format!("bad scale {:?}", tokens[4])))?;
            let offset: f64 =
                tokens[5].parse().map_err(|_| err(format!("bad offset {:?}", tokens[5])))?;
            let signed = match tokens.get(6).copied() {
                None | Some("signed") => true,
                Some("unsigned") => false,
                Some(other) => return Err(err(format!("bad signedness {:?}", other))),
            };
            messages.push(MessageSpec {
                id,
                signal: SignalSpec { channel, start_bit, bit_len, scale, offset, signed },
            });
        }
        let layout = SignalLayout { messages };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), CanError> {
        let invalid = |msg: String| CanError::InvalidLayout(msg);
        for channel in [Channel::Accel, Channel::Brake, Channel::Steer] {
            let count = self.messages.iter().filter(|m| m.signal.channel == channel).count();
            if count != 1 {
                return Err(invalid(format!(
                    "channel {} must appear exactly once, found {count}",
                    channel.signal_name()
                )));
            }
        }
        for m in &self.messages {
            if m.id > 0x7FF {
                return Err(invalid(format!("id {:#x} exceeds 11 bits", m.id)));
            }
            let s = &m.signal;
            if s.bit_len == 0 || s.start_bit + s.bit_len > SIGNAL_BIT_CEILING {
                return Err(invalid(format!(
                    "signal {} spans bits {}..{} outside 0..{SIGNAL_BIT_CEILING}",
                    s.channel.signal_name(),
                    s.start_bit,
                    s.start_bit + s.bit_len
                )));
            }
            if !(s.scale.is_finite() && s.scale > 0.0) || !s.offset.is_finite() {
                return Err(invalid(format!("bad scaling on {}", s.channel.signal_name())));
            }
        }
        let mut ids: Vec<u16> = self.messages.iter().map(|m| m.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.messages.len() {
            return Err(invalid("duplicate message ids".into()));
        }
        Ok(())
    }

    fn message(&self, id: u16) -> Result<&MessageSpec, CanError> {
        self.messages.iter().find(|m| m.id == id).ok_or(CanError::UnknownMessageId(id))
    }

    fn channel_value(&self, cmd: &ControlCommand, channel: Channel) -> f64 {
        match channel {
            Channel::Accel => cmd.accel,
            Channel::Brake => cmd.brake,
            Channel::Steer => cmd.steer_delta,
        }
    }
}

/// Encodes a command into one frame per layout message, in declaration order.
pub fn encode_command(cmd: &ControlCommand, layout: &SignalLayout) -> Result<Vec<CanFrame>, CanError> {
    layout
        .messages
        .iter()
        .map(|m| {
            let mut payload = [0u8; 8];
            let raw = to_raw(&m.signal, layout.channel_value(cmd, m.signal.channel))?;
            write_bits(&mut payload, m.signal.start_bit, m.signal.bit_len, raw);
            payload[7] = CanFrame::checksum(m.id, &payload);
            Ok(CanFrame { id: m.id, payload })
        })
        .collect()
}

/// Decodes one frame to its channel and physical value. The checksum is
/// verified before any bits are read.
pub fn decode_frame(frame: &CanFrame, layout: &SignalLayout) -> Result<(Channel, f64), CanError> {
    let m = layout.message(frame.id)?;
    if !frame.checksum_valid() {
        return Err(CanError::ChecksumMismatch { id: frame.id });
    }
    let raw = read_bits(&frame.payload, m.signal.start_bit, m.signal.bit_len);
    Ok((m.signal.channel, from_raw(&m.signal, raw)))
}

/// Rewrites one channel's signal inside a frame and repairs the checksum.
/// Bytes not covering the signal or the checksum are left untouched.
pub fn corrupt_frame(
    frame: &CanFrame,
    channel: Channel,
    value: f64,
    layout: &SignalLayout,
) -> Result<CanFrame, CanError> {
    let m = layout.message(frame.id)?;
    if m.signal.channel != channel {
        return Err(CanError::UnknownMessageId(frame.id));
    }
    let mut payload = frame.payload;
    let raw = to_raw(&m.signal, value)?;
    write_bits(&mut payload, m.signal.start_bit, m.signal.bit_len, raw);
    payload[7] = CanFrame::checksum(frame.id, &payload);
    Ok(CanFrame { id: frame.id, payload })
}


fn parse_id(token: &str) -> Option<u16> {
    if let Some(hex) = token.strip_prefix("0x").or_else(|| token.strip_prefix("0X")) {
        u16::from_str_radix(hex, 16).ok()
    } else {
        token.parse().ok()
    }
}
