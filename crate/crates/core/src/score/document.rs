use serde::{Deserialize, Serialize};

/// A score as stored on disk: metadata, patterns, groups and the
/// orchestration source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreDocument {
    pub title: String,
    pub tempo_bpm: f64,
    #[serde(default)]
    pub quantize: Quantize,
    #[serde(default = "default_beats_per_measure")]
    pub beats_per_measure: u32,
    pub instruments: Vec<String>,
    pub patterns: Vec<PatternDef>,
    pub groups: Vec<GroupDef>,
    pub orchestration: String,
    pub entry_module: String,
}

fn default_beats_per_measure() -> u32 {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantize {
    #[default]
    Beat,
    Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PatternDef {
    pub id: String,
    pub instrument: String,
    pub duration_beats: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<NoteEvent>,
    /// External audio reference, carried opaquely.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NoteEvent {
    pub pitch: u8,
    pub onset_beats: f64,
    pub length_beats: f64,
    pub velocity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Repeat,
    Tank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDef {
    pub name: String,
    pub kind: GroupKind,
    pub patterns: Vec<String>,
}

impl ScoreDocument {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("score documents always serialize")
    }
}
