//! Per-instrument pattern queues on a quantized clock.
//!
//! Each instrument plays one pattern at a time, in admission order. A
//! pattern starts at the first grid boundary at or after both the end of
//! the previous pattern on its instrument and its own admission.

mod render;

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use render::{parse_csv, render_csv, render_smf, RenderError, CSV_HEADER, TICKS_PER_BEAT};

/// Tolerance, in grid cells, when deciding whether a time is on the grid.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    // Declared first so that ends sort before starts at equal times.
    End,
    Start,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::End => "end",
            EventKind::Start => "start",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybackEvent {
    pub time: f64,
    pub instant_hint: Option<u64>,
    pub instrument: String,
    pub pattern_id: String,
    pub kind: EventKind,
    pub participant: String,
}

impl PlaybackEvent {
    /// Total order of rendered timelines: time, instrument, ends first.
    pub fn order(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.instrument.cmp(&other.instrument))
            .then_with(|| self.kind.cmp(&other.kind))
    }
}

/// An admitted selection waiting for its instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub pattern_id: String,
    pub participant_id: String,
    pub admitted_at: f64,
    /// Seconds.
    pub duration: f64,
    pub instant: Option<u64>,
}

impl Entry {
    pub fn new(
        pattern_id: impl Into<String>,
        participant_id: impl Into<String>,
        admitted_at: f64,
        duration: f64,
    ) -> Self {
        Entry {
            pattern_id: pattern_id.into(),
            participant_id: participant_id.into(),
            admitted_at,
            duration,
            instant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Playing {
    pub entry: Entry,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentQueue {
    pub instrument: String,
    pub entries: VecDeque<Entry>,
    pub playing: Option<Playing>,
    /// End of the last pattern played on this instrument.
    pub free_at: f64,
}

impl InstrumentQueue {
    fn busy_until(&self) -> f64 {
        self.playing.as_ref().map_or(self.free_at, |p| p.end)
    }

    fn next_event(&self, grid: f64) -> Option<(f64, EventKind)> {
        match (&self.playing, self.entries.front()) {
            (Some(p), _) => Some((p.end, EventKind::End)),
            (None, Some(e)) => Some((
                next_boundary(self.free_at.max(e.admitted_at), grid),
                EventKind::Start,
            )),
            (None, None) => None,
        }
    }
}

/// Result of queueing a selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enqueued {
    /// Entries ahead, counting the one playing.
    pub position: usize,
    /// Seconds from admission to the projected start.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchedulerError {
    #[error("no instrument `{0}`")]
    UnknownInstrument(String),
}

/// First grid boundary at or after `t`.
pub fn next_boundary(t: f64, grid: f64) -> f64 {
    let k = (t / grid - GRID_EPS).ceil().max(0.0);
    k * grid
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    grid: f64,
    now: f64,
    queues: Vec<InstrumentQueue>,
    events: Vec<PlaybackEvent>,
}

impl Scheduler {
    pub fn new(instruments: Vec<String>, grid: f64) -> Self {
        assert!(grid > 0.0, "grid must be positive");
        Scheduler {
            grid,
            now: 0.0,
            queues: instruments
                .into_iter()
                .map(|instrument| InstrumentQueue {
                    instrument,
                    entries: VecDeque::new(),
                    playing: None,
                    free_at: 0.0,
                })
                .collect(),
            events: Vec::new(),
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn grid(&self) -> f64 {
        self.grid
    }

    pub fn queues(&self) -> &[InstrumentQueue] {
        &self.queues
    }

    pub fn queue(&self, instrument: &str) -> Option<&InstrumentQueue> {
        self.queues.iter().find(|q| q.instrument == instrument)
    }

    /// Every event produced so far, in timeline order.
    pub fn events(&self) -> &[PlaybackEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<PlaybackEvent> {
        self.events
    }

    fn index(&self, instrument: &str) -> Result<usize, SchedulerError> {
        self.queues
            .iter()
            .position(|q| q.instrument == instrument)
            .ok_or_else(|| SchedulerError::UnknownInstrument(instrument.to_owned()))
    }

    /// Delay a selection admitted at `at` would wait on `instrument` given
    /// everything already queued there.
    pub fn estimate_delay(&self, instrument: &str, at: f64) -> Result<f64, SchedulerError> {
        let q = &self.queues[self.index(instrument)?];
        Ok(self.projected_start(q, at) - at)
    }

    fn projected_start(&self, q: &InstrumentQueue, at: f64) -> f64 {
        let mut free = q.busy_until();
        for e in &q.entries {
            free = next_boundary(free.max(e.admitted_at), self.grid) + e.duration;
        }
        next_boundary(free.max(at), self.grid)
    }

    pub fn enqueue(&mut self, instrument: &str, entry: Entry) -> Result<Enqueued, SchedulerError> {
        let i = self.index(instrument)?;
        let q = &self.queues[i];
        let at = entry.admitted_at;
        let out = Enqueued {
            position: q.entries.len() + usize::from(q.playing.is_some()),
            delay: self.projected_start(q, at) - at,
        };
        self.queues[i].entries.push_back(entry);
        Ok(out)
    }

    /// Time of the next start or end, if anything is queued or playing.
    pub fn next_event_time(&self) -> Option<f64> {
        self.queues
            .iter()
            .filter_map(|q| q.next_event(self.grid))
            .map(|(t, _)| t)
            .min_by(f64::total_cmp)
    }

    /// Plays everything due up to and including `to`. Returns the new
    /// events in timeline order.
    pub fn advance(&mut self, to: f64) -> Vec<PlaybackEvent> {
        let mut batch = Vec::new();
        loop {
            let next = self
                .queues
                .iter()
                .enumerate()
                .filter_map(|(i, q)| q.next_event(self.grid).map(|(t, k)| (t, k, i)))
                .min_by(|a, b| {
                    a.0.total_cmp(&b.0)
                        .then(a.1.cmp(&b.1))
                        .then_with(|| self.queues[a.2].instrument.cmp(&self.queues[b.2].instrument))
                });
            let Some((t, kind, i)) = next else { break };
            if t > to + GRID_EPS * self.grid {
                break;
            }
            let q = &mut self.queues[i];
            match kind {
                EventKind::End => {
                    let p = q.playing.take().expect("end without a playing pattern");
                    q.free_at = p.end;
                    batch.push(event(&q.instrument, &p.entry, p.end, EventKind::End));
                }
                EventKind::Start => {
                    let e = q.entries.pop_front().expect("start without an entry");
                    batch.push(event(&q.instrument, &e, t, EventKind::Start));
                    q.playing = Some(Playing {
                        start: t,
                        end: t + e.duration,
                        entry: e,
                    });
                }
            }
        }
        if to.is_finite() {
            self.now = self.now.max(to);
        } else if let Some(last) = batch.last() {
            self.now = self.now.max(last.time);
        }
        batch.sort_by(PlaybackEvent::order);
        for e in &batch {
            let at = self.events.partition_point(|x| x.order(e) != Ordering::Greater);
            self.events.insert(at, e.clone());
        }
        batch
    }

    /// Plays every queued pattern to its end.
    pub fn drain(&mut self) -> Vec<PlaybackEvent> {
        self.advance(f64::INFINITY)
    }
}

fn event(instrument: &str, e: &Entry, time: f64, kind: EventKind) -> PlaybackEvent {
    PlaybackEvent {
        time,
        instant_hint: e.instant,
        instrument: instrument.to_owned(),
        pattern_id: e.pattern_id.clone(),
        kind,
        participant: e.participant_id.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_tolerates_rounding() {
        assert_eq!(next_boundary(1.5000000000001, 0.5), 1.5);
        assert_eq!(next_boundary(1.49, 0.5), 1.5);
        assert_eq!(next_boundary(0.0, 0.5), 0.0);
        assert_eq!(next_boundary(0.9, 0.3), 3.0 * 0.3);
    }
}
