//! Host side of `async` statements: task lifecycles and the serialized
//! reaction queue that tasks feed.

use std::collections::BTreeMap;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::ir::SigId;
use super::machine::{Inputs, Machine, ReactError, ReactionResult, TaskHandle};
use super::value::Value;

/// A task started by an `async` statement. It runs outside instants and may
/// only talk to the machine through its [`TaskContext`].
pub trait AsyncTask: Send {
    fn start(&mut self, ctx: TaskContext);
    /// Called at most once, when the enclosing statement is preempted or the
    /// machine is disposed while the task is still live.
    fn kill(&mut self);
}

pub type TaskFactory = Box<dyn Fn() -> Box<dyn AsyncTask> + Send>;

#[derive(Debug, Clone)]
pub struct Injection {
    pub from: TaskHandle,
    pub inputs: Vec<(SigId, Option<Value>)>,
}

/// What a running task gets: its handle, its signals, and a way to request
/// reactions.
#[derive(Debug, Clone)]
pub struct TaskContext {
    pub handle: TaskHandle,
    pub signals: Vec<SigId>,
    tx: Sender<Injection>,
}

impl TaskContext {
    /// Queues a reaction that sets the task's `index`-th signal present.
    pub fn react(&self, index: usize, value: Option<Value>) {
        self.react_many(vec![(index, value)]);
    }

    pub fn react_many(&self, values: Vec<(usize, Option<Value>)>) {
        let inputs = values
            .into_iter()
            .map(|(i, v)| (self.signals[i], v))
            .collect();
        // A closed queue means the host is gone; nothing left to notify.
        let _ = self.tx.send(Injection {
            from: self.handle,
            inputs,
        });
    }
}

/// Owns a machine, the live task objects, and the reaction queue. All
/// reactions, whether requested by the embedding program or by tasks, go
/// through `&mut self` and are therefore serialized.
pub struct ReactiveHost {
    machine: Machine,
    factories: BTreeMap<String, TaskFactory>,
    live: BTreeMap<TaskHandle, Box<dyn AsyncTask>>,
    tx: Sender<Injection>,
    rx: Receiver<Injection>,
}

impl ReactiveHost {
    pub fn new(machine: Machine) -> Self {
        let (tx, rx) = mpsc::channel();
        ReactiveHost {
            machine,
            factories: BTreeMap::new(),
            live: BTreeMap::new(),
            tx,
            rx,
        }
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn() -> Box<dyn AsyncTask> + Send + 'static,
    ) {
        self.factories.insert(name.into(), Box::new(factory));
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn react(&mut self, inputs: &Inputs) -> Result<ReactionResult, ReactError> {
        let result = self.machine.react(inputs)?;
        self.apply(&result);
        Ok(result)
    }

    /// Runs one reaction per queued injection from live tasks. Injections
    /// from tasks killed in the meantime are dropped.
    pub fn pump(&mut self) -> Result<Vec<ReactionResult>, ReactError> {
        let mut out = Vec::new();
        while let Ok(inj) = self.rx.try_recv() {
            if let Some(r) = self.deliver(inj)? {
                out.push(r);
            }
        }
        Ok(out)
    }

    /// Waits up to `timeout` for the next injection and reacts to it.
    pub fn pump_one(&mut self, timeout: Duration) -> Result<Option<ReactionResult>, ReactError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.rx.recv_timeout(left) {
                Ok(inj) => {
                    if let Some(r) = self.deliver(inj)? {
                        return Ok(Some(r));
                    }
                }
                Err(_) => return Ok(None),
            }
        }
    }

    /// Disposes of the machine, killing every live task.
    pub fn dispose(&mut self) -> Vec<TaskHandle> {
        let handles = self.machine.dispose();
        for h in &handles {
            if let Some(mut t) = self.live.remove(h) {
                t.kill();
            }
        }
        // Tasks whose statement never reached a factory have nothing to kill.
        for (_, mut t) in std::mem::take(&mut self.live) {
            t.kill();
        }
        handles
    }

    fn deliver(&mut self, inj: Injection) -> Result<Option<ReactionResult>, ReactError> {
        if !self.live.contains_key(&inj.from) {
            return Ok(None);
        }
        let result = self.machine.inject(inj.from, &inj.inputs)?;
        self.apply(&result);
        Ok(Some(result))
    }

    fn apply(&mut self, result: &ReactionResult) {
        for h in &result.killed_tasks {
            if let Some(mut t) = self.live.remove(h) {
                t.kill();
            }
        }
        for h in &result.completed_tasks {
            self.live.remove(h);
        }
        for spawned in &result.spawned_tasks {
            let Some(factory) = self.factories.get(&spawned.task) else {
                tracing::warn!(task = %spawned.task, "no factory registered; async stays pending");
                continue;
            };
            let mut task = factory();
            task.start(TaskContext {
                handle: spawned.handle,
                signals: spawned.signals.clone(),
                tx: self.tx.clone(),
            });
            self.live.insert(spawned.handle, task);
        }
    }
}

impl Drop for ReactiveHost {
    fn drop(&mut self) {
        self.dispose();
    }
}

/// Wall-clock pulse generator: sets its first signal to `0` when started,
/// then to `1, 2, ...` once per period until killed.
pub struct Metronome {
    period: Duration,
    worker: Option<(Sender<()>, JoinHandle<()>)>,
}

impl Metronome {
    pub fn new(period: Duration) -> Self {
        Metronome {
            period,
            worker: None,
        }
    }
}

impl AsyncTask for Metronome {
    fn start(&mut self, ctx: TaskContext) {
        ctx.react(0, Some(Value::Num(0.0)));
        let (stop_tx, stop_rx) = mpsc::channel::<()>();
        let period = self.period;
        let handle = std::thread::spawn(move || {
            let mut sec = 0u64;
            while let Err(RecvTimeoutError::Timeout) = stop_rx.recv_timeout(period) {
                sec += 1;
                ctx.react(0, Some(Value::Num(sec as f64)));
            }
        });
        self.worker = Some((stop_tx, handle));
    }

    fn kill(&mut self) {
        if let Some((stop, handle)) = self.worker.take() {
            drop(stop);
            let _ = handle.join();
        }
    }
}

impl Drop for Metronome {
    fn drop(&mut self) {
        self.kill();
    }
}
