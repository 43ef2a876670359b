//! The reactive machine: executes an elaborated program one instant at a time.
//!
//! An instant is computed by constructive fixpoint iteration. Every
//! iteration re-executes the program from the control state reached at the
//! end of the previous instant, against a signal environment whose knowledge
//! only grows: a signal is `Present` as soon as anything emits it, and it
//! becomes `Absent` once no blocked thread can still emit it. A thread that
//! tests an unsettled signal stops for the iteration and reports what it
//! could still emit. The instant is committed when an iteration runs to
//! completion; if an iteration neither learns anything nor can rule any
//! signal out, the instant has no consistent schedule.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{Direction, Span};
use super::expr::{eval_sig_expr, Eval, EvalError, SignalEnv, Status};
use super::ir::{Expr, Node, NodeKind, Program, SigId};
use super::value::Value;

/// Input map keyed by boundary signal name. `None` means present without a value.
pub type Inputs = BTreeMap<String, Option<Value>>;

/// Identity of one spawned async task: the async statement and the instant
/// it was started in. Stable under any micro-schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskHandle {
    pub node: u32,
    pub instant: u64,
}

impl fmt::Display for TaskHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task#{}@{}", self.node, self.instant)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpawnedTask {
    pub handle: TaskHandle,
    pub task: String,
    /// Signals the task may inject, in declaration order.
    pub signals: Vec<SigId>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReactionResult {
    pub instant: u64,
    pub emitted_outputs: BTreeMap<String, Option<Value>>,
    pub terminated: bool,
    pub spawned_tasks: Vec<SpawnedTask>,
    pub killed_tasks: Vec<TaskHandle>,
    /// Tasks whose completion signal ended their async statement.
    pub completed_tasks: Vec<TaskHandle>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReactError {
    #[error("causality error in instant {instant}: no consistent status for {} ({span})", signals.join(", "))]
    Causality {
        instant: u64,
        signals: Vec<String>,
        span: Span,
    },
    #[error("the machine has terminated")]
    MachineTerminated,
    #[error("signal `{signal}` emitted twice with different values in instant {instant} ({span})")]
    DoubleEmission {
        signal: String,
        instant: u64,
        span: Span,
    },
    #[error("value of `{signal}` read before any emission or initialization ({span})")]
    UninitializedValueRead { signal: String, span: Span },
    #[error("{message} ({span})")]
    Type { message: String, span: Span },
    #[error("loop body terminated in the instant it started ({span})")]
    InstantaneousLoop { span: Span },
    #[error("`{0}` is not an input signal of the machine")]
    UnknownInput(String),
    #[error("{0} is not a live task of this machine")]
    DeadTask(TaskHandle),
    #[error("signal #{} does not belong to {task}", signal.0)]
    NotTaskSignal { task: TaskHandle, signal: SigId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MachineStatus {
    Running,
    Terminated,
}

/// Control state of a paused statement, mirroring the program tree.
#[derive(Debug, Clone, PartialEq)]
enum Ctl {
    Await { remaining: u32 },
    Seq { index: usize, child: Box<Ctl> },
    /// `None` marks a branch that already terminated.
    Fork { branches: Vec<Option<Ctl>> },
    /// `None` while waiting for the condition with no live body.
    Every { body: Option<Box<Ctl>> },
    If { then_branch: bool, child: Box<Ctl> },
    Loop { child: Box<Ctl> },
    Abort { child: Box<Ctl> },
    Suspend { child: Box<Ctl> },
    Local { child: Box<Ctl> },
    Async { handle: TaskHandle },
}

impl Ctl {
    fn collect_tasks(&self, out: &mut Vec<TaskHandle>) {
        match self {
            Ctl::Await { .. } => {}
            Ctl::Async { handle } => out.push(*handle),
            Ctl::Fork { branches } => branches.iter().flatten().for_each(|c| c.collect_tasks(out)),
            Ctl::Every { body } => {
                if let Some(c) = body {
                    c.collect_tasks(out)
                }
            }
            Ctl::Seq { child, .. }
            | Ctl::If { child, .. }
            | Ctl::Loop { child }
            | Ctl::Abort { child }
            | Ctl::Suspend { child }
            | Ctl::Local { child } => child.collect_tasks(out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    Fresh,
    Paused(Ctl),
    Terminated,
}

/// Per-node facts used to bound what blocked code may still do.
#[derive(Debug, Clone, Default)]
struct StaticInfo {
    emits: BTreeSet<SigId>,
    /// Can the statement terminate in the instant it starts?
    may_term: bool,
}

fn static_info(node: &Node, table: &mut Vec<StaticInfo>) {
    for c in node.children() {
        static_info(c, table);
    }
    let info_of = |n: &Node, t: &Vec<StaticInfo>| t[n.id.0 as usize].clone();
    let mut info = StaticInfo::default();
    match &node.kind {
        NodeKind::Nothing => info.may_term = true,
        NodeKind::Emit { signal, .. } => {
            info.emits.insert(*signal);
            info.may_term = true;
        }
        NodeKind::Await {
            count, immediate, ..
        } => info.may_term = *immediate && *count == 1,
        NodeKind::Seq(items) | NodeKind::Fork(items) => {
            info.may_term = true;
            for c in items {
                let ci = info_of(c, table);
                info.emits.extend(ci.emits);
                info.may_term &= ci.may_term;
            }
        }
        NodeKind::If {
            then, otherwise, ..
        } => {
            let t = info_of(then, table);
            info.emits = t.emits;
            info.may_term = t.may_term;
            match otherwise {
                Some(o) => {
                    let o = info_of(o, table);
                    info.emits.extend(o.emits);
                    info.may_term |= o.may_term;
                }
                None => info.may_term = true,
            }
        }
        NodeKind::Every { body, .. } | NodeKind::Loop(body) => {
            info.emits = info_of(body, table).emits;
            info.may_term = false;
        }
        NodeKind::Abort { body, .. }
        | NodeKind::Suspend { body, .. }
        | NodeKind::Local { body, .. } => info = info_of(body, table),
        NodeKind::Async { .. } => info.may_term = false,
    }
    table[node.id.0 as usize] = info;
}

/// Deterministic synchronous reactive machine.
#[derive(Debug, Clone)]
pub struct Machine {
    program: Program,
    info: Vec<StaticInfo>,
    /// Signals no statement ever emits: settled from the inputs alone.
    never_emitted: Vec<bool>,
    state: State,
    values: Vec<Option<Value>>,
    instant: u64,
    live_tasks: BTreeMap<TaskHandle, SpawnedTask>,
    shuffle: Option<ChaCha8Rng>,
}

impl Machine {
    pub fn new(program: Program) -> Self {
        let mut info = vec![StaticInfo::default(); program.node_count as usize];
        static_info(&program.body, &mut info);
        let emitted = program.emitted_signals();
        let never_emitted = (0..program.signals.len())
            .map(|i| !emitted.contains(&SigId(i as u32)))
            .collect();
        let values = program.signals.iter().map(|s| s.init.clone()).collect();
        Machine {
            program,
            info,
            never_emitted,
            state: State::Fresh,
            values,
            instant: 0,
            live_tasks: BTreeMap::new(),
            shuffle: None,
        }
    }

    /// Executes fork branches in a pseudo-random order drawn from `seed`.
    /// Results never depend on that order; this exists to check it.
    pub fn with_shuffled_schedule(mut self, seed: u64) -> Self {
        self.shuffle = Some(ChaCha8Rng::seed_from_u64(seed));
        self
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn status(&self) -> MachineStatus {
        match self.state {
            State::Terminated => MachineStatus::Terminated,
            _ => MachineStatus::Running,
        }
    }

    /// Number of the next instant to execute.
    pub fn instant(&self) -> u64 {
        self.instant
    }

    /// Persistent value of a signal (the last emitted or initial value).
    pub fn value(&self, sig: SigId) -> Option<&Value> {
        self.values[sig.index()].as_ref()
    }

    pub fn live_tasks(&self) -> impl Iterator<Item = &SpawnedTask> {
        self.live_tasks.values()
    }

    /// Runs one instant with the given boundary inputs.
    pub fn react(&mut self, inputs: &Inputs) -> Result<ReactionResult, ReactError> {
        let mut by_id = BTreeMap::new();
        for (name, value) in inputs {
            let id = self
                .program
                .lookup(name, Direction::Input)
                .ok_or_else(|| ReactError::UnknownInput(name.clone()))?;
            by_id.insert(id, value.clone());
        }
        self.react_ids(by_id)
    }

    /// Runs one instant carrying values injected by a live task. The task
    /// may only set the signals it was handed at spawn time.
    pub fn inject(
        &mut self,
        task: TaskHandle,
        inputs: &[(SigId, Option<Value>)],
    ) -> Result<ReactionResult, ReactError> {
        let live = self
            .live_tasks
            .get(&task)
            .ok_or(ReactError::DeadTask(task))?;
        for (sig, _) in inputs {
            if !live.signals.contains(sig) {
                return Err(ReactError::NotTaskSignal { task, signal: *sig });
            }
        }
        self.react_ids(inputs.iter().cloned().collect())
    }

    /// Tears the machine down, returning the tasks that must be killed.
    pub fn dispose(&mut self) -> Vec<TaskHandle> {
        self.state = State::Terminated;
        std::mem::take(&mut self.live_tasks).into_keys().collect()
    }

    fn react_ids(
        &mut self,
        inputs: BTreeMap<SigId, Option<Value>>,
    ) -> Result<ReactionResult, ReactError> {
        let resume = match &self.state {
            State::Terminated => return Err(ReactError::MachineTerminated),
            State::Fresh => None,
            State::Paused(c) => Some(c.clone()),
        };
        let n = self.program.signals.len();
        let mut status: Vec<Status> = self
            .never_emitted
            .iter()
            .map(|&never| if never { Status::Absent } else { Status::Unknown })
            .collect();
        let mut current = vec![None; n];
        for (sig, value) in inputs {
            status[sig.index()] = Status::Present;
            current[sig.index()] = value;
        }
        let mut rx = Reaction {
            program: &self.program,
            info: &self.info,
            instant: self.instant,
            status,
            current,
            values: self.values.clone(),
            spawned: Vec::new(),
            killed: Vec::new(),
            completed: Vec::new(),
            shuffle: self.shuffle.as_mut(),
        };
        let flow = loop {
            rx.values.clone_from(&self.values);
            rx.spawned.clear();
            rx.killed.clear();
            rx.completed.clear();
            let known_before = rx.known();
            match rx.exec(&self.program.body, resume.as_ref())? {
                Flow::Block(blocked) => {
                    let mut progress = rx.known() != known_before;
                    for (i, st) in rx.status.iter_mut().enumerate() {
                        if *st == Status::Unknown && !blocked.can.contains(&SigId(i as u32)) {
                            *st = Status::Absent;
                            progress = true;
                        }
                    }
                    if !progress {
                        return Err(ReactError::Causality {
                            instant: self.instant,
                            signals: blocked
                                .waiting
                                .iter()
                                .map(|s| self.program.name(*s).to_owned())
                                .collect(),
                            span: blocked.span,
                        });
                    }
                }
                done => break done,
            }
        };

        let Reaction {
            status,
            current,
            mut values,
            mut spawned,
            mut killed,
            mut completed,
            ..
        } = rx;
        for (i, st) in status.iter().enumerate() {
            if *st == Status::Present {
                if let Some(v) = &current[i] {
                    values[i] = Some(v.clone());
                }
            }
        }
        let emitted_outputs = self
            .program
            .outputs()
            .filter(|(id, _)| status[id.index()] == Status::Present)
            .map(|(id, s)| (s.name.clone(), current[id.index()].clone()))
            .collect();

        spawned.sort_by_key(|s| s.handle);
        killed.sort();
        completed.sort();
        for h in killed.iter().chain(&completed) {
            self.live_tasks.remove(h);
        }
        for s in &spawned {
            self.live_tasks.insert(s.handle, s.clone());
        }
        self.values = values;
        let instant = self.instant;
        self.instant += 1;
        let terminated = matches!(flow, Flow::Term);
        self.state = match flow {
            Flow::Term => State::Terminated,
            Flow::Pause(c) => State::Paused(c),
            Flow::Block(_) => unreachable!(),
        };
        Ok(ReactionResult {
            instant,
            emitted_outputs,
            terminated,
            spawned_tasks: spawned,
            killed_tasks: killed,
            completed_tasks: completed,
        })
    }
}

#[derive(Debug)]
struct Blocked {
    /// Signals the blocked remainder might still emit this instant.
    can: BTreeSet<SigId>,
    may_term: bool,
    /// Signals the blocked tests are waiting on.
    waiting: BTreeSet<SigId>,
    span: Span,
}

impl Blocked {
    fn merge(&mut self, other: Blocked) {
        self.can.extend(other.can);
        self.waiting.extend(other.waiting);
        self.may_term &= other.may_term;
        // Report the earliest source position whatever the branch order.
        if (other.span.line, other.span.col) < (self.span.line, self.span.col) {
            self.span = other.span;
        }
    }
}

#[derive(Debug)]
enum Flow {
    Term,
    Pause(Ctl),
    Block(Blocked),
}

impl Flow {
    fn map_pause(self, f: impl FnOnce(Ctl) -> Ctl) -> Flow {
        match self {
            Flow::Pause(c) => Flow::Pause(f(c)),
            other => other,
        }
    }
}

struct Reaction<'m> {
    program: &'m Program,
    info: &'m [StaticInfo],
    instant: u64,
    status: Vec<Status>,
    /// Value carried by this instant's emission or input, if any.
    current: Vec<Option<Value>>,
    /// Persistent values, reset at each iteration.
    values: Vec<Option<Value>>,
    spawned: Vec<SpawnedTask>,
    killed: Vec<TaskHandle>,
    completed: Vec<TaskHandle>,
    shuffle: Option<&'m mut ChaCha8Rng>,
}

impl SignalEnv for Reaction<'_> {
    fn status(&self, sig: SigId) -> Status {
        self.status[sig.index()]
    }

    fn value(&self, sig: SigId) -> Option<&Value> {
        let i = sig.index();
        match self.status[i] {
            Status::Present => self.current[i].as_ref().or(self.values[i].as_ref()),
            _ => self.values[i].as_ref(),
        }
    }
}

impl Reaction<'_> {
    fn known(&self) -> usize {
        self.status.iter().filter(|s| **s != Status::Unknown).count()
    }

    fn info(&self, node: &Node) -> &StaticInfo {
        &self.info[node.id.0 as usize]
    }

    fn eval(&self, expr: &Expr, span: Span) -> Result<Eval, ReactError> {
        eval_sig_expr(self, expr).map_err(|e| match e {
            EvalError::UninitializedValueRead(s) => ReactError::UninitializedValueRead {
                signal: self.program.name(s).to_owned(),
                span,
            },
            other => ReactError::Type {
                message: other.to_string(),
                span,
            },
        })
    }

    /// `Ok(None)` when the test cannot be decided yet; the waiting signal is
    /// returned through `waiting`.
    fn test(&self, expr: &Expr, span: Span) -> Result<Result<bool, SigId>, ReactError> {
        Ok(match self.eval(expr, span)? {
            Eval::Ready(v) => Ok(v.truthy()),
            Eval::NotReady(s) => Err(s),
        })
    }

    fn blocked(&self, on: SigId, can: BTreeSet<SigId>, may_term: bool, span: Span) -> Flow {
        Flow::Block(Blocked {
            can,
            may_term,
            waiting: BTreeSet::from([on]),
            span,
        })
    }

    fn emit(&mut self, sig: SigId, value: Option<Value>, span: Span) -> Result<(), ReactError> {
        let i = sig.index();
        if self.status[i] == Status::Present {
            if self.current[i] != value {
                return Err(ReactError::DoubleEmission {
                    signal: self.program.name(sig).to_owned(),
                    instant: self.instant,
                    span,
                });
            }
        } else {
            debug_assert_ne!(self.status[i], Status::Absent, "emitting a signal ruled absent");
            self.status[i] = Status::Present;
            self.current[i] = value;
        }
        Ok(())
    }

    fn kill(&mut self, ctl: &Ctl) {
        ctl.collect_tasks(&mut self.killed);
    }

    fn await_step(&self, node: &Node, remaining: u32, expr: &Expr) -> Result<Flow, ReactError> {
        Ok(match self.test(expr, node.span)? {
            Err(on) => self.blocked(on, BTreeSet::new(), remaining == 1, node.span),
            Ok(true) if remaining == 1 => Flow::Term,
            Ok(true) => Flow::Pause(Ctl::Await {
                remaining: remaining - 1,
            }),
            Ok(false) => Flow::Pause(Ctl::Await { remaining }),
        })
    }

    /// Runs a fresh or resumed `every` body and wraps the outcome.
    fn every_body(&mut self, body: &Node, resume: Option<&Ctl>) -> Result<Flow, ReactError> {
        Ok(match self.exec(body, resume)? {
            Flow::Term => Flow::Pause(Ctl::Every { body: None }),
            Flow::Pause(c) => Flow::Pause(Ctl::Every {
                body: Some(Box::new(c)),
            }),
            Flow::Block(mut b) => {
                b.may_term = false;
                Flow::Block(b)
            }
        })
    }

    fn exec(&mut self, node: &Node, resume: Option<&Ctl>) -> Result<Flow, ReactError> {
        let span = node.span;
        match (&node.kind, resume) {
            (NodeKind::Nothing, _) => Ok(Flow::Term),

            (NodeKind::Emit { signal, value }, _) => {
                let value = match value {
                    None => None,
                    Some(e) => match self.eval(e, span)? {
                        Eval::Ready(v) => Some(v),
                        Eval::NotReady(on) => {
                            return Ok(self.blocked(on, BTreeSet::from([*signal]), true, span))
                        }
                    },
                };
                self.emit(*signal, value, span)?;
                Ok(Flow::Term)
            }

            (
                NodeKind::Await {
                    count,
                    expr,
                    immediate,
                },
                None,
            ) => {
                if *immediate {
                    self.await_step(node, *count, expr)
                } else {
                    Ok(Flow::Pause(Ctl::Await { remaining: *count }))
                }
            }
            (NodeKind::Await { expr, .. }, Some(Ctl::Await { remaining })) => {
                self.await_step(node, *remaining, expr)
            }

            (NodeKind::Seq(items), resume) => {
                let (mut index, mut child) = match resume {
                    None => (0, None),
                    Some(Ctl::Seq { index, child }) => (*index, Some(child.as_ref())),
                    Some(other) => unreachable!("seq resumed with {other:?}"),
                };
                while index < items.len() {
                    match self.exec(&items[index], child.take())? {
                        Flow::Term => index += 1,
                        Flow::Pause(c) => {
                            return Ok(Flow::Pause(Ctl::Seq {
                                index,
                                child: Box::new(c),
                            }))
                        }
                        Flow::Block(mut b) => {
                            for rest in &items[index + 1..] {
                                if !b.may_term {
                                    break;
                                }
                                let ri = self.info(rest);
                                b.can.extend(ri.emits.iter().copied());
                                b.may_term = ri.may_term;
                            }
                            return Ok(Flow::Block(b));
                        }
                    }
                }
                Ok(Flow::Term)
            }

            (NodeKind::Fork(branches), resume) => {
                let prev = match resume {
                    None => None,
                    Some(Ctl::Fork { branches }) => Some(branches),
                    Some(other) => unreachable!("fork resumed with {other:?}"),
                };
                let mut order: Vec<usize> = (0..branches.len()).collect();
                if let Some(rng) = self.shuffle.as_deref_mut() {
                    order.shuffle(rng);
                }
                let mut next: Vec<Option<Ctl>> = vec![None; branches.len()];
                let mut blocked: Option<Blocked> = None;
                let mut paused = false;
                for i in order {
                    let start = match prev {
                        None => None,
                        Some(p) => match &p[i] {
                            None => continue,
                            Some(c) => Some(c),
                        },
                    };
                    match self.exec(&branches[i], start)? {
                        Flow::Term => {}
                        Flow::Pause(c) => {
                            paused = true;
                            next[i] = Some(c);
                        }
                        Flow::Block(b) => match &mut blocked {
                            Some(acc) => acc.merge(b),
                            None => blocked = Some(b),
                        },
                    }
                }
                Ok(match blocked {
                    Some(mut b) => {
                        b.may_term &= !paused;
                        Flow::Block(b)
                    }
                    None if paused => Flow::Pause(Ctl::Fork { branches: next }),
                    None => Flow::Term,
                })
            }

            (
                NodeKind::Every {
                    expr,
                    immediate,
                    body,
                },
                resume,
            ) => {
                let live = match resume {
                    None if !*immediate => return Ok(Flow::Pause(Ctl::Every { body: None })),
                    None => None,
                    Some(Ctl::Every { body }) => body.as_deref(),
                    Some(other) => unreachable!("every resumed with {other:?}"),
                };
                match self.test(expr, span)? {
                    Err(on) => {
                        let can = self.info(body).emits.clone();
                        Ok(self.blocked(on, can, false, span))
                    }
                    Ok(true) => {
                        if let Some(old) = live {
                            self.kill(old);
                        }
                        self.every_body(body, None)
                    }
                    Ok(false) => match live {
                        Some(c) => self.every_body(body, Some(c)),
                        None => Ok(Flow::Pause(Ctl::Every { body: None })),
                    },
                }
            }

            (
                NodeKind::If {
                    expr,
                    then,
                    otherwise,
                },
                None,
            ) => match self.test(expr, span)? {
                Err(on) => {
                    let mut can = self.info(then).emits.clone();
                    let mut may_term = self.info(then).may_term;
                    match otherwise {
                        Some(o) => {
                            can.extend(self.info(o).emits.iter().copied());
                            may_term |= self.info(o).may_term;
                        }
                        None => may_term = true,
                    }
                    Ok(self.blocked(on, can, may_term, span))
                }
                Ok(cond) => {
                    let branch = if cond { Some(then) } else { otherwise.as_ref() };
                    match branch {
                        None => Ok(Flow::Term),
                        Some(b) => Ok(self.exec(b, None)?.map_pause(|c| Ctl::If {
                            then_branch: cond,
                            child: Box::new(c),
                        })),
                    }
                }
            },
            (
                NodeKind::If {
                    then, otherwise, ..
                },
                Some(Ctl::If { then_branch, child }),
            ) => {
                let branch = if *then_branch {
                    then
                } else {
                    otherwise.as_ref().expect("paused in a missing else branch")
                };
                let then_branch = *then_branch;
                Ok(self.exec(branch, Some(child))?.map_pause(|c| Ctl::If {
                    then_branch,
                    child: Box::new(c),
                }))
            }

            (NodeKind::Loop(body), resume) => {
                let child = match resume {
                    None => None,
                    Some(Ctl::Loop { child }) => Some(child.as_ref()),
                    Some(other) => unreachable!("loop resumed with {other:?}"),
                };
                let fresh = child.is_none();
                let mut flow = self.exec(body, child)?;
                if let Flow::Term = flow {
                    if fresh {
                        return Err(ReactError::InstantaneousLoop { span });
                    }
                    flow = self.exec(body, None)?;
                    if let Flow::Term = flow {
                        return Err(ReactError::InstantaneousLoop { span });
                    }
                }
                Ok(match flow {
                    Flow::Pause(c) => Flow::Pause(Ctl::Loop { child: Box::new(c) }),
                    Flow::Block(mut b) => {
                        // Only a body that may still finish now could restart.
                        if b.may_term {
                            b.can.extend(self.info(body).emits.iter().copied());
                        }
                        b.may_term = false;
                        Flow::Block(b)
                    }
                    Flow::Term => unreachable!(),
                })
            }

            (NodeKind::Abort { body, .. }, None) => Ok(self
                .exec(body, None)?
                .map_pause(|c| Ctl::Abort { child: Box::new(c) })),
            (NodeKind::Abort { expr, body }, Some(Ctl::Abort { child })) => {
                match self.test(expr, span)? {
                    Err(on) => {
                        let can = self.info(body).emits.clone();
                        Ok(self.blocked(on, can, true, span))
                    }
                    Ok(true) => {
                        self.kill(child);
                        Ok(Flow::Term)
                    }
                    Ok(false) => Ok(self
                        .exec(body, Some(child))?
                        .map_pause(|c| Ctl::Abort { child: Box::new(c) })),
                }
            }

            (NodeKind::Suspend { body, .. }, None) => Ok(self
                .exec(body, None)?
                .map_pause(|c| Ctl::Suspend { child: Box::new(c) })),
            (NodeKind::Suspend { expr, body }, Some(Ctl::Suspend { child })) => {
                match self.test(expr, span)? {
                    Err(on) => {
                        let can = self.info(body).emits.clone();
                        Ok(self.blocked(on, can, true, span))
                    }
                    Ok(true) => Ok(Flow::Pause(Ctl::Suspend {
                        child: child.clone(),
                    })),
                    Ok(false) => Ok(self
                        .exec(body, Some(child))?
                        .map_pause(|c| Ctl::Suspend { child: Box::new(c) })),
                }
            }

            (NodeKind::Local { signal, body }, resume) => {
                let child = match resume {
                    None => {
                        if let Some(init) = &self.program.signal(*signal).init {
                            self.values[signal.index()] = Some(init.clone());
                        }
                        None
                    }
                    Some(Ctl::Local { child }) => Some(child.as_ref()),
                    Some(other) => unreachable!("local resumed with {other:?}"),
                };
                Ok(self
                    .exec(body, child)?
                    .map_pause(|c| Ctl::Local { child: Box::new(c) }))
            }

            (NodeKind::Async { task, signals, .. }, None) => {
                let handle = TaskHandle {
                    node: node.id.0,
                    instant: self.instant,
                };
                self.spawned.push(SpawnedTask {
                    handle,
                    task: task.clone(),
                    signals: signals.clone(),
                });
                Ok(Flow::Pause(Ctl::Async { handle }))
            }
            (NodeKind::Async { done, .. }, Some(Ctl::Async { handle })) => {
                let Some(done) = done else {
                    return Ok(Flow::Pause(Ctl::Async { handle: *handle }));
                };
                Ok(match self.status[done.index()] {
                    Status::Unknown => self.blocked(*done, BTreeSet::new(), true, span),
                    Status::Present => {
                        self.completed.push(*handle);
                        Flow::Term
                    }
                    Status::Absent => Flow::Pause(Ctl::Async { handle: *handle }),
                })
            }

            (kind, Some(ctl)) => unreachable!("{kind:?} resumed with {ctl:?}"),
        }
    }
}
