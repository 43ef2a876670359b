//! A seeded audience that clicks at random.
//!
//! Each participant waits a response time drawn uniformly from
//! `[min_response_s, max_response_s]`, then picks one selectable pattern
//! uniformly from the current snapshot. It declines when its cap is
//! reached, when nothing is selectable, or when the pattern would wait
//! longer than `max_wait_s`.
//!
//! One ChaCha8 generator is seeded from the root seed and participant `i`
//! draws from stream `i`, so growing the audience leaves the existing
//! participants' draws unchanged.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runtime::{Performance, ReactionRecord, RejectReason, RuntimeError, Selection, PENDING_CAP};
use crate::scheduler::{render_csv, PlaybackEvent};
use crate::score::Score;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulatorConfig {
    pub audience_size: u32,
    pub min_response_s: f64,
    pub max_response_s: f64,
    pub max_wait_s: f64,
    pub seed: u64,
    pub run_length_s: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            audience_size: 30,
            min_response_s: 2.0,
            max_response_s: 10.0,
            max_wait_s: 30.0,
            seed: 0,
            run_length_s: 300.0,
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_owned()));
        let finite = [
            self.min_response_s,
            self.max_response_s,
            self.max_wait_s,
            self.run_length_s,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("times must be finite numbers");
        }
        if !(0.0 <= self.min_response_s && self.min_response_s <= self.max_response_s) {
            return bad("need 0 <= min response <= max response");
        }
        if self.max_response_s <= 0.0 && self.audience_size > 0 {
            return bad("max response must be positive");
        }
        if self.max_wait_s <= 0.0 {
            return bad("max wait must be positive");
        }
        if self.run_length_s < 0.0 {
            return bad("run length must not be negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("bad simulator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SkipReason {
    PendingCap,
    EmptySnapshot,
    MaxWait,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::PendingCap => "pendingCap",
            SkipReason::EmptySnapshot => "emptySnapshot",
            SkipReason::MaxWait => "maxWait",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Admitted { position: usize, delay: f64 },
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Attempted { pattern_id: String, outcome: Outcome },
    Skipped(SkipReason),
}

/// What one participant did at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub time: f64,
    pub participant: usize,
    pub action: Action,
}

#[derive(Debug, Clone)]
struct SimParticipant {
    id: String,
    next_action_at: f64,
    rng: ChaCha8Rng,
}

/// The simulated participants, independent of any clock.
#[derive(Debug, Clone)]
pub struct SimAudience {
    config: SimulatorConfig,
    participants: Vec<SimParticipant>,
}

pub fn participant_id(index: usize) -> String {
    format!("sim{index:03}")
}

impl SimAudience {
    pub fn new(config: &SimulatorConfig) -> Result<Self, SimError> {
        config.validate()?;
        let participants = (0..config.audience_size as usize)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(i as u64);
                let mut p = SimParticipant {
                    id: participant_id(i),
                    next_action_at: 0.0,
                    rng,
                };
                p.next_action_at = response(&mut p.rng, config);
                p
            })
            .collect();
        Ok(SimAudience {
            config: *config,
            participants,
        })
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn participant_id(&self, index: usize) -> &str {
        &self.participants[index].id
    }

    pub fn next_action_at(&self, index: usize) -> f64 {
        self.participants[index].next_action_at
    }

    /// The participant due first, lowest index on ties.
    pub fn next_due(&self) -> Option<(f64, usize)> {
        self.participants
            .iter()
            .enumerate()
            .map(|(i, p)| (p.next_action_at, i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
    }

    /// Lets participant `index` act on `perf` at `now`, then schedules its
    /// next action. Admissions are queued on `perf`; pumping them into the
    /// machine is left to the caller.
    pub fn act(
        &mut self,
        index: usize,
        perf: &mut Performance,
        now: f64,
    ) -> Result<ActionRecord, RuntimeError> {
        perf.advance(now);
        let config = self.config;
        let p = &mut self.participants[index];
        let action = if perf.pending(&p.id) >= PENDING_CAP {
            Action::Skipped(SkipReason::PendingCap)
        } else {
            let snapshot = perf.snapshot();
            let choices: Vec<&String> = snapshot.groups.iter().flat_map(|g| &g.patterns).collect();
            if choices.is_empty() {
                Action::Skipped(SkipReason::EmptySnapshot)
            } else {
                let pick = choices[p.rng.random_range(0..choices.len())].clone();
                if perf.estimate_delay(&pick)? > config.max_wait_s {
                    Action::Skipped(SkipReason::MaxWait)
                } else {
                    let outcome = match perf.select(&p.id, &pick, now)? {
                        Selection::Admitted(a) => Outcome::Admitted {
                            position: a.position,
                            delay: a.delay,
                        },
                        Selection::Rejected { reason, .. } => Outcome::Rejected(reason),
                    };
                    Action::Attempted {
                        pattern_id: pick,
                        outcome,
                    }
                }
            }
        };
        p.next_action_at = now + response(&mut p.rng, &config);
        Ok(ActionRecord {
            time: now,
            participant: index,
            action,
        })
    }
}

fn response(rng: &mut ChaCha8Rng, c: &SimulatorConfig) -> f64 {
    if c.max_response_s > c.min_response_s {
        rng.random_range(c.min_response_s..=c.max_response_s)
    } else {
        c.min_response_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Stats {
    pub attempts: u64,
    pub admissions: u64,
    pub rejections: BTreeMap<String, u64>,
    pub skips: BTreeMap<String, u64>,
    /// Admissions per group.
    pub per_group: BTreeMap<String, u64>,
    /// Mean seconds from admission to start.
    pub mean_delay_s: f64,
    pub reactions: u64,
    pub end_time_s: f64,
    /// Whether the score ran to completion.
    pub terminated: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: SimulatorConfig,
    pub events: Vec<PlaybackEvent>,
    pub stats: Stats,
    pub actions: Vec<ActionRecord>,
    pub trace: Vec<ReactionRecord>,
}

impl RunResult {
    pub fn csv(&self) -> String {
        render_csv(&self.events).expect("scheduler output is sorted")
    }

    pub fn stats_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.stats).expect("stats serialize");
        s.push('\n');
        s
    }
}

/// Plays the score against a simulated audience from time 0 until
/// `run_length_s` or the end of the score, then lets the queues drain.
pub fn run(score: Arc<Score>, config: &SimulatorConfig) -> Result<RunResult, SimError> {
    let mut audience = SimAudience::new(config)?;
    let mut perf = Performance::new(score)?;
    let mut actions = Vec::new();
    let mut end = config.run_length_s;

    while !perf.is_terminated() {
        let Some((t, i)) = audience.next_due() else {
            break;
        };
        if t > config.run_length_s {
            break;
        }
        actions.push(audience.act(i, &mut perf, t)?);
        perf.pump()?;
        if perf.is_terminated() {
            end = t;
        }
    }
    if perf.is_terminated() && actions.is_empty() {
        end = 0.0;
    }
    perf.advance(end);
    perf.drain();

    let mut stats = Stats {
        attempts: 0,
        admissions: 0,
        rejections: RejectReason::ALL
            .iter()
            .map(|r| (r.as_str().to_owned(), 0))
            .collect(),
        skips: [SkipReason::PendingCap, SkipReason::EmptySnapshot, SkipReason::MaxWait]
            .iter()
            .map(|r| (r.as_str().to_owned(), 0))
            .collect(),
        per_group: BTreeMap::new(),
        mean_delay_s: 0.0,
        reactions: perf.trace().len() as u64,
        end_time_s: end,
        terminated: perf.is_terminated(),
    };
    let mut delay_sum = 0.0;
    for a in &actions {
        match &a.action {
            Action::Skipped(r) => *stats.skips.get_mut(r.as_str()).unwrap() += 1,
            Action::Attempted { outcome, .. } => {
                stats.attempts += 1;
                match outcome {
                    Outcome::Admitted { delay, .. } => {
                        stats.admissions += 1;
                        delay_sum += delay;
                    }
                    Outcome::Rejected(r) => *stats.rejections.get_mut(r.as_str()).unwrap() += 1,
                }
            }
        }
    }
    for s in perf.selections() {
        *stats.per_group.entry(s.group.clone()).or_default() += 1;
    }
    if stats.admissions > 0 {
        // Millisecond precision keeps the stats file stable.
        stats.mean_delay_s = (delay_sum / stats.admissions as f64 * 1000.0).round() / 1000.0;
    }

    Ok(RunResult {
        config: *config,
        events: perf.events().to_vec(),
        stats,
        actions,
        trace: perf.trace().to_vec(),
    })
}
