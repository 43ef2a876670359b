//! JSON text frames exchanged with audience clients. Every message is an
//! object with a `type` field; unknown fields are ignored.

use serde::{Deserialize, Serialize};

use crate::runtime::{GroupView, MatrixSnapshot, RejectReason};
use crate::score::{GroupKind, Score};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum ServerMessage {
    #[serde(rename_all = "camelCase")]
    Hello { participant_id: String },
    Matrix {
        revision: u64,
        groups: Vec<GroupView>,
    },
    #[serde(rename_all = "camelCase")]
    Ack {
        pattern_id: String,
        delay_seconds: f64,
        position: usize,
        pending: u32,
    },
    #[serde(rename_all = "camelCase")]
    Reject {
        pattern_id: String,
        reason: RejectReason,
        pending: u32,
    },
    #[serde(rename_all = "camelCase")]
    Played {
        pattern_id: String,
        participant_id: String,
    },
    Feed { text: String },
    Pong {},
    Error { message: String },
}

impl ServerMessage {
    pub fn matrix(s: MatrixSnapshot) -> Self {
        ServerMessage::Matrix {
            revision: s.revision,
            groups: s.groups,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum ClientMessage {
    #[serde(rename_all = "camelCase")]
    Select { pattern_id: String },
    Ping {},
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Lobby,
    Running,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaGroup {
    pub name: String,
    pub kind: GroupKind,
    pub instrument: String,
    pub patterns: Vec<String>,
}

/// Body of `GET /meta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Meta {
    pub title: String,
    pub tempo_bpm: f64,
    pub instruments: Vec<String>,
    pub groups: Vec<MetaGroup>,
    pub phase: Phase,
}

impl Meta {
    pub fn new(score: &Score, phase: Phase) -> Self {
        Meta {
            title: score.title().to_owned(),
            tempo_bpm: score.doc.tempo_bpm,
            instruments: score.instruments().to_vec(),
            groups: score
                .groups()
                .iter()
                .map(|g| MetaGroup {
                    name: g.name.clone(),
                    kind: g.kind,
                    instrument: g
                        .patterns
                        .first()
                        .and_then(|p| score.pattern(p))
                        .map(|p| p.instrument.clone())
                        .unwrap_or_default(),
                    patterns: g.patterns.clone(),
                })
                .collect(),
            phase,
        }
    }
}
