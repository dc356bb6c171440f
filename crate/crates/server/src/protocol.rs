//! Wire messages. Every message is a JSON object with a `type` field.

use amoeba_core::engine::{Command, Param, StepStats};
use amoeba_core::lattice::{Budget, Cell, Rect, StimulusSet};
use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Parameters a client may change with `SetParam`.
pub const SETTABLE_PARAMS: [Param; 6] = [
    Param::Pid,
    Param::SensorAngle,
    Param::RotationAngle,
    Param::SensorOffset,
    Param::Damping,
    Param::Oscillatory,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl From<WireRect> for Rect {
    fn from(r: WireRect) -> Self {
        Rect::new(r.x0, r.y0, r.x1, r.y1)
    }
}

impl From<Rect> for WireRect {
    fn from(r: Rect) -> Self {
        WireRect {
            x0: r.x0,
            y0: r.y0,
            x1: r.x1,
            y1: r.y1,
        }
    }
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum SessionCommand {
    Pause,
    Resume,
    /// Runs `n` more steps, then stays paused.
    StepN {
        n: u64,
    },
    /// Rebuilds the world from a preset (or the session's scenario) and seed.
    Reset {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        scenario_name: Option<String>,
    },
    PlaceAttractant {
        x: i32,
        y: i32,
        magnitude: f64,
        /// Omitted or null for an unlimited source.
        #[serde(default)]
        budget: Option<f64>,
        /// Budget lost per step while covered; defaults to `magnitude`.
        #[serde(default)]
        consumption_rate: Option<f64>,
    },
    RemoveAttractant {
        id: u32,
    },
    SetIrradiation {
        rect: WireRect,
        weight: f64,
    },
    ClearIrradiation {
        id: u32,
    },
    SetParam {
        name: String,
        value: f64,
    },
    SetFrameCadence {
        n: u64,
    },
    /// Requests the session transcript as scenario text.
    Export,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown parameter {0:?}; expected one of pID, SA, RA, SO, damping, oscillatory")]
    UnknownParam(String),
    #[error("frame cadence must be at least 1")]
    Cadence,
}

pub fn parse_command(text: &str) -> Result<SessionCommand, ProtocolError> {
    serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

impl SessionCommand {
    /// The simulation command this message schedules, if any.
    pub fn to_engine(&self) -> Result<Option<Command>, ProtocolError> {
        Ok(Some(match self {
            SessionCommand::PlaceAttractant {
                x,
                y,
                magnitude,
                budget,
                consumption_rate,
            } => Command::AddAttractant {
                position: Cell::new(*x, *y),
                magnitude: *magnitude,
                budget: budget.map_or(Budget::Unlimited, Budget::Finite),
                consumption_rate: consumption_rate.unwrap_or(*magnitude),
            },
            SessionCommand::RemoveAttractant { id } => Command::RemoveAttractant(*id),
            SessionCommand::SetIrradiation { rect, weight } => Command::AddIrradiation {
                rect: (*rect).into(),
                weight: *weight,
            },
            SessionCommand::ClearIrradiation { id } => Command::RemoveIrradiation(*id),
            SessionCommand::SetParam { name, value } => {
                let param = SETTABLE_PARAMS
                    .into_iter()
                    .find(|p| p.name() == name)
                    .ok_or_else(|| ProtocolError::UnknownParam(name.clone()))?;
                Command::SetParam(param, *value)
            }
            _ => return Ok(None),
        }))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SessionCommand::Pause => "Pause",
            SessionCommand::Resume => "Resume",
            SessionCommand::StepN { .. } => "StepN",
            SessionCommand::Reset { .. } => "Reset",
            SessionCommand::PlaceAttractant { .. } => "PlaceAttractant",
            SessionCommand::RemoveAttractant { .. } => "RemoveAttractant",
            SessionCommand::SetIrradiation { .. } => "SetIrradiation",
            SessionCommand::ClearIrradiation { .. } => "ClearIrradiation",
            SessionCommand::SetParam { .. } => "SetParam",
            SessionCommand::SetFrameCadence { .. } => "SetFrameCadence",
            SessionCommand::Export => "Export",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// One byte per cell, row-major.
    Raw,
    /// `(count, value)` byte pairs with `1 <= count <= 255`.
    Rle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsSummary {
    pub moved: usize,
    pub blocked: usize,
    pub moved_fraction: f64,
    pub trail_mass: f64,
    pub centroid_x: Option<f64>,
    pub centroid_y: Option<f64>,
}

impl From<&StepStats> for StatsSummary {
    fn from(s: &StepStats) -> Self {
        StatsSummary {
            moved: s.moved,
            blocked: s.blocked,
            moved_fraction: s.moved_fraction(),
            trail_mass: s.total_trail_mass,
            centroid_x: s.centroid.map(|c| c[0]),
            centroid_y: s.centroid.map(|c| c[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttractantInfo {
    pub id: u32,
    pub x: i32,
    pub y: i32,
    pub magnitude: f64,
    /// None for unlimited.
    pub budget: Option<f64>,
    pub consumption_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrradiationInfo {
    pub id: u32,
    pub rect: WireRect,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StimuliInfo {
    pub attractants: Vec<AttractantInfo>,
    pub irradiation: Vec<IrradiationInfo>,
}

impl From<&StimulusSet> for StimuliInfo {
    fn from(s: &StimulusSet) -> Self {
        StimuliInfo {
            attractants: s
                .attractants()
                .iter()
                .map(|a| AttractantInfo {
                    id: a.id,
                    x: a.position.x,
                    y: a.position.y,
                    magnitude: a.magnitude,
                    budget: match a.budget {
                        Budget::Unlimited => None,
                        Budget::Finite(b) => Some(b),
                    },
                    consumption_rate: a.consumption_rate,
                })
                .collect(),
            irradiation: s
                .irradiation()
                .iter()
                .map(|r| IrradiationInfo {
                    id: r.id,
                    rect: r.rect.into(),
                    weight: r.weight,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FrameMessage {
    /// Completed steps when the frame was taken.
    pub step_index: u64,
    pub width: usize,
    pub height: usize,
    pub encoding: Encoding,
    /// Base64 of the (possibly run-length coded) greyscale bytes.
    pub payload: String,
    /// Last step's statistics, absent before the first step.
    pub stats: Option<StatsSummary>,
    pub stimuli: StimuliInfo,
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all_fields = "camelCase")]
pub enum ServerMessage {
    Hello {
        session_id: String,
        scenario: String,
        width: usize,
        height: usize,
        population: usize,
    },
    Frame(FrameMessage),
    Ack {
        command: String,
        /// Step at whose start the command takes effect.
        apply_step: u64,
        /// Identifier the new stimulus will receive.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        stimulus_id: Option<u32>,
    },
    Exported {
        step_index: u64,
        scenario: String,
        digest: String,
    },
    Error {
        message: String,
    },
}

impl ServerMessage {
    pub fn error(message: impl ToString) -> Self {
        ServerMessage::Error {
            message: message.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

pub fn rle_encode(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut iter = bytes.iter().copied().peekable();
    while let Some(v) = iter.next() {
        let mut n = 1u8;
        while n < u8::MAX && iter.peek() == Some(&v) {
            iter.next();
            n += 1;
        }
        out.extend([n, v]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameDecodeError {
    #[error("payload is not base64: {0}")]
    Base64(String),
    #[error("run-length data has odd length or a zero count")]
    Rle,
    #[error("payload decodes to {got} bytes, expected {expected}")]
    Size { got: usize, expected: usize },
}

impl FrameMessage {
    /// Picks whichever encoding is smaller.
    pub fn new(
        step_index: u64,
        width: usize,
        height: usize,
        pixels: &[u8],
        stats: Option<StatsSummary>,
        stimuli: StimuliInfo,
    ) -> Self {
        let rle = rle_encode(pixels);
        let (encoding, bytes) = if rle.len() < pixels.len() {
            (Encoding::Rle, rle)
        } else {
            (Encoding::Raw, pixels.to_vec())
        };
        FrameMessage {
            step_index,
            width,
            height,
            encoding,
            payload: STANDARD.encode(bytes),
            stats,
            stimuli,
        }
    }

    /// The greyscale bytes, exactly `width * height` of them.
    pub fn pixels(&self) -> Result<Vec<u8>, FrameDecodeError> {
        let bytes = STANDARD
            .decode(&self.payload)
            .map_err(|e| FrameDecodeError::Base64(e.to_string()))?;
        let pixels = match self.encoding {
            Encoding::Raw => bytes,
            Encoding::Rle => {
                if bytes.len() % 2 != 0 {
                    return Err(FrameDecodeError::Rle);
                }
                let mut out = Vec::new();
                for pair in bytes.chunks_exact(2) {
                    if pair[0] == 0 {
                        return Err(FrameDecodeError::Rle);
                    }
                    out.extend(std::iter::repeat_n(pair[1], pair[0] as usize));
                }
                out
            }
        };
        let expected = self.width * self.height;
        if pixels.len() != expected {
            return Err(FrameDecodeError::Size {
                got: pixels.len(),
                expected,
            });
        }
        Ok(pixels)
    }
}
