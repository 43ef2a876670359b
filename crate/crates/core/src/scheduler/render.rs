use std::cmp::Ordering;

use midly::num::{u15, u24, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};
use thiserror::Error;

use super::{EventKind, PlaybackEvent};
use crate::score::Score;

pub const CSV_HEADER: &str = "time_seconds,instrument,pattern_id,kind,participant";
pub const TICKS_PER_BEAT: u16 = 480;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("events are not in timeline order")]
    UnsortedEvents,
    #[error("event log line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("event refers to unknown pattern `{0}`")]
    UnknownPattern(String),
    #[error("event refers to unknown instrument `{0}`")]
    UnknownInstrument(String),
}

fn check_sorted(events: &[PlaybackEvent]) -> Result<(), RenderError> {
    if events.windows(2).any(|w| w[0].order(&w[1]) == Ordering::Greater) {
        return Err(RenderError::UnsortedEvents);
    }
    Ok(())
}

/// Event log with millisecond times, one event per line.
pub fn render_csv(events: &[PlaybackEvent]) -> Result<String, RenderError> {
    check_sorted(events)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(Vec::new());
    let io = |e: csv::Error| RenderError::Csv {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    for e in events {
        w.write_record([
            format!("{:.3}", e.time).as_str(),
            &e.instrument,
            &e.pattern_id,
            e.kind.as_str(),
            &e.participant,
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| RenderError::Csv {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Reads an event log written by [`render_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<PlaybackEvent>, RenderError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 1;
        let bad = |message: String| RenderError::Csv { line, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if i == 0 {
            if rec.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
                return Err(bad(format!("expected header `{CSV_HEADER}`")));
            }
            continue;
        }
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", rec.len())));
        }
        let time: f64 = rec[0]
            .parse()
            .map_err(|_| bad(format!("bad time `{}`", &rec[0])))?;
        let kind = match &rec[3] {
            "start" => EventKind::Start,
            "end" => EventKind::End,
            other => return Err(bad(format!("bad kind `{other}`"))),
        };
        out.push(PlaybackEvent {
            time,
            instant_hint: None,
            instrument: rec[1].to_owned(),
            pattern_id: rec[2].to_owned(),
            kind,
            participant: rec[4].to_owned(),
        });
    }
    check_sorted(&out)?;
    Ok(out)
}

/// Standard MIDI File, format 1: one track per instrument in declaration
/// order, the first one carrying the tempo. Each started pattern's notes
/// are placed relative to its start time.
///
/// Start times are taken at millisecond precision, the precision of the
/// event log, so rendering from a log and from live events agree.
pub fn render_smf(events: &[PlaybackEvent], score: &Score) -> Result<Vec<u8>, RenderError> {
    check_sorted(events)?;
    let beat = score.beat_seconds();
    let ticks = |beats: f64| (beats * TICKS_PER_BEAT as f64).round() as u64;

    // (tick, note-off first, key, channel, velocity)
    let mut notes: Vec<Vec<(u64, bool, u8, u8)>> = vec![Vec::new(); score.instruments().len()];
    for e in events.iter().filter(|e| e.kind == EventKind::Start) {
        let track = score
            .instrument_position(&e.instrument)
            .ok_or_else(|| RenderError::UnknownInstrument(e.instrument.clone()))?;
        let p = score
            .pattern(&e.pattern_id)
            .ok_or_else(|| RenderError::UnknownPattern(e.pattern_id.clone()))?;
        let start_beats = (e.time * 1000.0).round() / 1000.0 / beat;
        for n in &p.notes {
            let on = ticks(start_beats + n.onset_beats);
            let off = ticks(start_beats + n.onset_beats + n.length_beats).max(on + 1);
            notes[track].push((on, true, n.pitch, n.velocity));
            notes[track].push((off, false, n.pitch, 0));
        }
    }

    let mut smf = Smf::new(Header::new(
        Format::Parallel,
        Timing::Metrical(u15::new(TICKS_PER_BEAT)),
    ));
    let tempo = (60_000_000.0 / score.doc.tempo_bpm).round() as u32;
    for (i, name) in score.instruments().iter().enumerate() {
        let channel = u4::new((i % 16) as u8);
        let mut track = vec![TrackEvent {
            delta: u28::new(0),
            kind: TrackEventKind::Meta(MetaMessage::TrackName(name.as_bytes())),
        }];
        if i == 0 {
            track.push(TrackEvent {
                delta: u28::new(0),
                kind: TrackEventKind::Meta(MetaMessage::Tempo(u24::new(tempo))),
            });
        }
        let list = &mut notes[i];
        list.sort_by_key(|&(t, on, key, _)| (t, on, key));
        let mut last = 0;
        for &(t, on, key, vel) in list.iter() {
            let message = if on {
                MidiMessage::NoteOn {
                    key: u7::new(key),
                    vel: u7::new(vel),
                }
            } else {
                MidiMessage::NoteOff {
                    key: u7::new(key),
                    vel: u7::new(0),
                }
            };
            track.push(TrackEvent {
                delta: u28::new((t - last) as u32),
                kind: TrackEventKind::Midi { channel, message },
            });
            last = t;
        }
        track.push(TrackEvent {
            delta: u28::new(0),
            kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
        });
        smf.tracks.push(track);
    }
    let mut out = Vec::new();
    smf.write_std(&mut out).expect("writing to memory cannot fail");
    Ok(out)
}
