//! Scenario scripts: one timed input per line.
//!
//! ```text
//! # comment
//! 0 temp 25.0
//! 5000 door open
//! 0..60000 ramp temp 20→50
//! 12000 button set
//! 30000 power off
//! ```

use std::fmt;

use thiserror::Error;

use crate::firmware::Button;
use crate::sensors::{check_obscuration, check_temperature};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {reason}")]
pub struct ScenarioError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Temp,
    Smoke,
    Door,
    Water,
    Button,
    Power,
}

impl Channel {
    fn parse(word: &str) -> Option<Self> {
        Some(match word {
            "temp" => Channel::Temp,
            "smoke" => Channel::Smoke,
            "door" => Channel::Door,
            "water" => Channel::Water,
            "button" => Channel::Button,
            "power" => Channel::Power,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Temp => "temp",
            Channel::Smoke => "smoke",
            Channel::Door => "door",
            Channel::Water => "water",
            Channel::Button => "button",
            Channel::Power => "power",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelValue {
    Temp(f64),
    Smoke(f64),
    /// `true` = open.
    Door(bool),
    /// `true` = wet.
    Water(bool),
    Button(Button),
    /// `true` = on.
    Power(bool),
}

impl ChannelValue {
    pub fn channel(&self) -> Channel {
        match self {
            ChannelValue::Temp(_) => Channel::Temp,
            ChannelValue::Smoke(_) => Channel::Smoke,
            ChannelValue::Door(_) => Channel::Door,
            ChannelValue::Water(_) => Channel::Water,
            ChannelValue::Button(_) => Channel::Button,
            ChannelValue::Power(_) => Channel::Power,
        }
    }
}

impl fmt::Display for ChannelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ChannelValue::Temp(v) => write!(f, "temp {v}"),
            ChannelValue::Smoke(v) => write!(f, "smoke {v}"),
            ChannelValue::Door(open) => write!(f, "door {}", if open { "open" } else { "closed" }),
            ChannelValue::Water(wet) => write!(f, "water {}", if wet { "wet" } else { "dry" }),
            ChannelValue::Button(b) => write!(f, "button {}", button_name(b)),
            ChannelValue::Power(on) => write!(f, "power {}", if on { "on" } else { "off" }),
        }
    }
}

pub fn button_name(b: Button) -> &'static str {
    match b {
        Button::Set => "set",
        Button::Up => "up",
        Button::Down => "down",
    }
}

/// Channels that can be interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RampChannel {
    Temp,
    Smoke,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Set(ChannelValue),
    /// Linear interpolation from the event time to `end_ms`.
    Ramp { channel: RampChannel, end_ms: u64, from: f64, to: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioEvent {
    pub at_ms: u64,
    pub action: Action,
}

impl ScenarioEvent {
    pub fn set(at_ms: u64, value: ChannelValue) -> Self {
        Self { at_ms, action: Action::Set(value) }
    }
}

impl fmt::Display for ScenarioEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.action {
            Action::Set(v) => write!(f, "{} {v}", self.at_ms),
            Action::Ramp { channel, end_ms, from, to } => {
                let ch = match channel {
                    RampChannel::Temp => "temp",
                    RampChannel::Smoke => "smoke",
                };
                write!(f, "{}..{end_ms} ramp {ch} {from}→{to}", self.at_ms)
            }
        }
    }
}

fn parse_time(word: &str) -> Result<u64, String> {
    word.parse::<u64>().map_err(|_| format!("malformed time {word:?}"))
}

fn parse_real(word: &str, channel: Channel) -> Result<f64, String> {
    let v: f64 = word.parse().map_err(|_| format!("malformed {} value {word:?}", channel.name()))?;
    if !v.is_finite() {
        return Err(format!("malformed {} value {word:?}", channel.name()));
    }
    match channel {
        Channel::Temp => check_temperature(v).map_err(|e| e.to_string())?,
        Channel::Smoke => check_obscuration(v).map_err(|e| e.to_string())?,
        _ => {}
    }
    Ok(v)
}

fn parse_value(channel: Channel, word: &str) -> Result<ChannelValue, String> {
    let bad = || format!("invalid {} value {word:?}", channel.name());
    Ok(match channel {
        Channel::Temp => ChannelValue::Temp(parse_real(word, channel)?),
        Channel::Smoke => ChannelValue::Smoke(parse_real(word, channel)?),
        Channel::Door => match word {
            "open" => ChannelValue::Door(true),
            "closed" | "close" => ChannelValue::Door(false),
            _ => return Err(bad()),
        },
        Channel::Water => match word {
            "wet" => ChannelValue::Water(true),
            "dry" => ChannelValue::Water(false),
            _ => return Err(bad()),
        },
        Channel::Button => match word {
            "set" => ChannelValue::Button(Button::Set),
            "up" => ChannelValue::Button(Button::Up),
            "down" => ChannelValue::Button(Button::Down),
            _ => return Err(bad()),
        },
        Channel::Power => match word {
            "on" => ChannelValue::Power(true),
            "off" => ChannelValue::Power(false),
            _ => return Err(bad()),
        },
    })
}

fn parse_ramp(span: &str, words: &[&str]) -> Result<ScenarioEvent, String> {
    let (start, end) = span.split_once("..").ok_or_else(|| format!("malformed ramp span {span:?}"))?;
    let (start, end) = (parse_time(start)?, parse_time(end)?);
    if end < start {
        return Err(format!("ramp ends before it starts ({start}..{end})"));
    }
    let [ch, range] = words else {
        return Err("expected `<start>..<end> ramp <channel> <from>→<to>`".into());
    };
    let channel = Channel::parse(ch).ok_or_else(|| format!("unknown channel {ch:?}"))?;
    let ramp_channel = match channel {
        Channel::Temp => RampChannel::Temp,
        Channel::Smoke => RampChannel::Smoke,
        _ => return Err(format!("channel {ch} cannot be ramped")),
    };
    let (from, to) = range
        .split_once('→')
        .or_else(|| range.split_once("->"))
        .ok_or_else(|| format!("malformed ramp range {range:?}"))?;
    let from = parse_real(from, channel)?;
    let to = parse_real(to, channel)?;
    Ok(ScenarioEvent {
        at_ms: start,
        action: Action::Ramp { channel: ramp_channel, end_ms: end, from, to },
    })
}

fn parse_line(line: &str) -> Result<Option<ScenarioEvent>, String> {
    let body = line.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let words: Vec<&str> = body.split_whitespace().collect();
    if words.len() >= 2 && words[1] == "ramp" {
        return parse_ramp(words[0], &words[2..]).map(Some);
    }
    let [time, channel, value] = words[..] else {
        return Err("expected `<at_ms> <channel> <value>`".into());
    };
    let at_ms = parse_time(time)?;
    let channel = Channel::parse(channel).ok_or_else(|| format!("unknown channel {channel:?}"))?;
    Ok(Some(ScenarioEvent::set(at_ms, parse_value(channel, value)?)))
}

/// Parses a scenario script. Events come back stably sorted by time.
pub fn parse_scenario(text: &str) -> Result<Vec<ScenarioEvent>, ScenarioError> {
    let mut events = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        match parse_line(line) {
            Ok(Some(ev)) => events.push(ev),
            Ok(None) => {}
            Err(reason) => return Err(ScenarioError { line: idx + 1, reason }),
        }
    }
    events.sort_by_key(|e| e.at_ms);
    Ok(events)
}
