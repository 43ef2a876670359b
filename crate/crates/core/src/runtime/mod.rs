//! The live performance: the score's machine, the availability matrix it
//! drives, and the instrument queues fed by audience selections.
//!
//! Admitted selections reach the machine one per instant, in admission
//! order, so `await count` sees every one of them.

mod matrix;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{Inputs, Machine, MachineStatus, ReactError, Value};
use crate::scheduler::{Entry, EventKind, PlaybackEvent, Scheduler};
use crate::score::{in_signal, GroupKind, Score};

pub use matrix::{AvailabilityMatrix, GroupView, MatrixDelta, MatrixSnapshot};

/// Selections a participant may have waiting before they start playing.
pub const PENDING_CAP: u32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("no pattern `{0}` in the score")]
    UnknownPattern(String),
    #[error("the score emitted `{0}`, which matches no group")]
    UnknownOutputSignal(String),
    #[error("group output `{0}` must carry a boolean")]
    BadOutputValue(String),
    #[error("at {time:.3} s: {error}")]
    Reaction {
        instant: u64,
        time: f64,
        error: ReactError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectReason {
    GroupInactive,
    TankExhausted,
    PendingCapReached,
}

impl RejectReason {
    pub const ALL: [RejectReason; 3] = [
        RejectReason::GroupInactive,
        RejectReason::TankExhausted,
        RejectReason::PendingCapReached,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::GroupInactive => "GroupInactive",
            RejectReason::TankExhausted => "TankExhausted",
            RejectReason::PendingCapReached => "PendingCapReached",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Admission {
    pub pattern_id: String,
    pub group: String,
    /// The group input the selection will be delivered on.
    pub input_signal: String,
    /// Entries ahead on the instrument, the playing one included.
    pub position: usize,
    /// Seconds until the pattern starts.
    pub delay: f64,
    /// The participant's pending count including this selection.
    pub pending: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Admitted(Admission),
    Rejected {
        pattern_id: String,
        reason: RejectReason,
        pending: u32,
    },
}

/// An admitted request, as recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionEvent {
    pub participant_id: String,
    pub pattern_id: String,
    pub group: String,
    pub submitted_at: f64,
}

/// A pattern started playing on behalf of a participant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Played {
    pub pattern_id: String,
    pub participant_id: String,
    pub time: f64,
}

/// One instant of the score.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionRecord {
    pub instant: u64,
    pub time: f64,
    /// Input signals and their pattern-id values.
    pub inputs: BTreeMap<String, Option<String>>,
    pub outputs: BTreeMap<String, Option<Value>>,
    pub delta: MatrixDelta,
    pub revision: u64,
    pub terminated: bool,
}

#[derive(Debug, Clone)]
struct Queued {
    pattern_id: String,
    group: String,
    tank: bool,
}

#[derive(Debug, Clone)]
pub struct Performance {
    score: Arc<Score>,
    machine: Machine,
    matrix: AvailabilityMatrix,
    scheduler: Scheduler,
    pending: BTreeMap<String, u32>,
    inbox: VecDeque<Queued>,
    trace: Vec<ReactionRecord>,
    selections: Vec<SelectionEvent>,
    played: Vec<Played>,
    now: f64,
    dropped: usize,
}

impl Performance {
    /// Starts the performance at time 0 with the score's first reaction.
    pub fn new(score: Arc<Score>) -> Result<Self, RuntimeError> {
        let machine = score.machine();
        Self::with_machine(score, machine)
    }

    /// As [`Performance::new`] with a prepared machine, for instance one
    /// with a shuffled schedule.
    pub fn with_machine(score: Arc<Score>, machine: Machine) -> Result<Self, RuntimeError> {
        let scheduler = Scheduler::new(score.instruments().to_vec(), score.grid_seconds());
        let mut p = Performance {
            matrix: AvailabilityMatrix::new(&score),
            score,
            machine,
            scheduler,
            pending: BTreeMap::new(),
            inbox: VecDeque::new(),
            trace: Vec::new(),
            selections: Vec::new(),
            played: Vec::new(),
            now: 0.0,
            dropped: 0,
        };
        p.react(BTreeMap::new())?;
        Ok(p)
    }

    pub fn score(&self) -> &Arc<Score> {
        &self.score
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn matrix(&self) -> &AvailabilityMatrix {
        &self.matrix
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn snapshot(&self) -> MatrixSnapshot {
        self.matrix.snapshot()
    }

    pub fn is_terminated(&self) -> bool {
        self.machine.status() == MachineStatus::Terminated
    }

    pub fn trace(&self) -> &[ReactionRecord] {
        &self.trace
    }

    pub fn selections(&self) -> &[SelectionEvent] {
        &self.selections
    }

    /// Playback events so far, in timeline order.
    pub fn events(&self) -> &[PlaybackEvent] {
        self.scheduler.events()
    }

    /// Admissions that arrived after the score terminated; they play but
    /// no longer reach the machine.
    pub fn dropped_inputs(&self) -> usize {
        self.dropped
    }

    /// Admissions not yet delivered to the machine.
    pub fn queued_inputs(&self) -> usize {
        self.inbox.len()
    }

    pub fn pending(&self, participant: &str) -> u32 {
        self.pending.get(participant).copied().unwrap_or(0)
    }

    /// Delay a selection of `pattern_id` would wait right now.
    pub fn estimate_delay(&self, pattern_id: &str) -> Result<f64, RuntimeError> {
        let p = self
            .score
            .pattern(pattern_id)
            .ok_or_else(|| RuntimeError::UnknownPattern(pattern_id.to_owned()))?;
        Ok(self
            .scheduler
            .estimate_delay(&p.instrument, self.now)
            .expect("validated instrument"))
    }

    /// Checks a request against the matrix and the cap and queues it on
    /// success. Its group input reaches the machine on the next
    /// [`Performance::pump`].
    pub fn select(
        &mut self,
        participant: &str,
        pattern_id: &str,
        now: f64,
    ) -> Result<Selection, RuntimeError> {
        self.advance(now);
        let now = self.now;
        let score = Arc::clone(&self.score);
        let p = score
            .pattern(pattern_id)
            .ok_or_else(|| RuntimeError::UnknownPattern(pattern_id.to_owned()))?;
        let pending = self.pending(participant);
        let reject = |reason| {
            Ok(Selection::Rejected {
                pattern_id: pattern_id.to_owned(),
                reason,
                pending,
            })
        };
        let Some(g) = score.group_of(pattern_id) else {
            return reject(RejectReason::GroupInactive);
        };
        if !self.matrix.is_active(&g.name) {
            return reject(RejectReason::GroupInactive);
        }
        let tank = g.kind == GroupKind::Tank;
        if tank && self.matrix.is_consumed(&g.name, pattern_id) {
            return reject(RejectReason::TankExhausted);
        }
        if pending >= PENDING_CAP {
            return reject(RejectReason::PendingCapReached);
        }

        let entry = Entry::new(pattern_id, participant, now, score.pattern_seconds(p));
        let queued = self
            .scheduler
            .enqueue(&p.instrument, entry)
            .expect("validated instrument");
        if tank {
            self.matrix.claim(&g.name, pattern_id);
        }
        self.pending.insert(participant.to_owned(), pending + 1);
        self.inbox.push_back(Queued {
            pattern_id: pattern_id.to_owned(),
            group: g.name.clone(),
            tank,
        });
        self.selections.push(SelectionEvent {
            participant_id: participant.to_owned(),
            pattern_id: pattern_id.to_owned(),
            group: g.name.clone(),
            submitted_at: now,
        });
        Ok(Selection::Admitted(Admission {
            pattern_id: pattern_id.to_owned(),
            group: g.name.clone(),
            input_signal: in_signal(&g.name),
            position: queued.position,
            delay: queued.delay,
            pending: pending + 1,
        }))
    }

    /// Delivers every waiting admission, one reaction each.
    pub fn pump(&mut self) -> Result<Vec<ReactionRecord>, RuntimeError> {
        let mut out = Vec::new();
        while let Some(q) = self.inbox.pop_front() {
            if self.is_terminated() {
                self.dropped += 1;
                continue;
            }
            let value = Some(q.pattern_id.clone());
            let mut inputs = BTreeMap::from([(in_signal(&q.group), value.clone())]);
            if q.tank {
                inputs.insert(in_signal(&q.pattern_id), value);
            }
            out.push(self.react(inputs)?);
        }
        Ok(out)
    }

    fn react(
        &mut self,
        inputs: BTreeMap<String, Option<String>>,
    ) -> Result<ReactionRecord, RuntimeError> {
        let kernel_inputs: Inputs = inputs
            .iter()
            .map(|(k, v)| (k.clone(), v.clone().map(Value::Str)))
            .collect();
        let instant = self.machine.instant();
        let result = self
            .machine
            .react(&kernel_inputs)
            .map_err(|error| RuntimeError::Reaction {
                instant,
                time: self.now,
                error,
            })?;
        let delta = self.matrix.apply_outputs(&result.emitted_outputs)?;
        let record = ReactionRecord {
            instant: result.instant,
            time: self.now,
            inputs,
            outputs: result.emitted_outputs,
            delta,
            revision: self.matrix.revision(),
            terminated: result.terminated,
        };
        self.trace.push(record.clone());
        Ok(record)
    }

    /// Releases one pending slot of the participant.
    pub fn on_pattern_started(&mut self, pattern_id: &str, participant_id: &str) -> Played {
        if let Some(n) = self.pending.get_mut(participant_id) {
            *n = n.saturating_sub(1);
        }
        Played {
            pattern_id: pattern_id.to_owned(),
            participant_id: participant_id.to_owned(),
            time: self.now,
        }
    }

    /// Moves the clock to `to`, playing whatever is due. Started patterns
    /// produce notifications collected by [`Performance::take_played`].
    pub fn advance(&mut self, to: f64) -> Vec<PlaybackEvent> {
        if to < self.now {
            return Vec::new();
        }
        let events = self.scheduler.advance(to);
        for e in events.iter().filter(|e| e.kind == EventKind::Start) {
            let mut n = self.on_pattern_started(&e.pattern_id, &e.participant);
            n.time = e.time;
            self.played.push(n);
        }
        self.now = if to.is_finite() {
            to
        } else {
            self.scheduler.now().max(self.now)
        };
        events
    }

    /// Plays everything queued to its end.
    pub fn drain(&mut self) -> Vec<PlaybackEvent> {
        self.advance(f64::INFINITY)
    }

    pub fn take_played(&mut self) -> Vec<Played> {
        std::mem::take(&mut self.played)
    }

    /// Time of the next scheduled start or end.
    pub fn next_event_time(&self) -> Option<f64> {
        self.scheduler.next_event_time()
    }
}
