//! Conditions and the three action execution models.
//!
//! * [`SyncAction`] — the action body is split into small steps executed on
//!   the traversal itself, up to a per-tick step budget.
//! * [`AsyncAction`] — the work starts on a background thread at the first
//!   tick; later ticks read a synchronized status cell and return
//!   immediately, so the tick latency is bounded no matter how long the
//!   work takes. Halting fires a one-shot signal, runs the abort routine,
//!   and blocks until the worker stops (or the halt timeout expires).
//! * [`CoYieldAction`] — a cooperatively yielding body that suspends at
//!   author-chosen checkpoints and resumes on the next tick, all on the
//!   traversal thread.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicU8, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Duration;

use crate::blackboard::{BbValue, PortMap, Scope};
use crate::clock::Clock;
use crate::error::EngineError;
use crate::node::TickContext;
use crate::status::NodeStatus;
use crate::trace::{TraceEvent, TraceKind, TraceSink};

/// Everything a leaf body may touch during a tick or halt: its ports, the
/// enclosing blackboard scope, the clock, and the trace.
pub struct LeafCtx<'a> {
    path: &'a Arc<str>,
    scope: &'a Arc<Scope>,
    ports: &'a PortMap,
    ctx: &'a mut TickContext,
}

impl<'a> LeafCtx<'a> {
    pub(crate) fn new(
        path: &'a Arc<str>,
        scope: &'a Arc<Scope>,
        ports: &'a PortMap,
        ctx: &'a mut TickContext,
    ) -> LeafCtx<'a> {
        LeafCtx {
            path,
            scope,
            ports,
            ctx,
        }
    }

    pub fn path(&self) -> &str {
        self.path
    }

    pub fn tick_no(&self) -> u64 {
        self.ctx.tick_no()
    }

    pub fn clock(&self) -> &Clock {
        &self.ctx.clock
    }

    pub fn halt_timeout(&self) -> Duration {
        self.ctx.halt_timeout
    }

    pub fn seed(&self) -> u64 {
        self.ctx.seed
    }

    pub fn scope(&self) -> &Arc<Scope> {
        self.scope
    }

    pub fn ports(&self) -> &PortMap {
        self.ports
    }

    /// Resolves an in-port: literals parse, keys read the scope. A miss on
    /// an unbound port or an absent key is an engine error, not a Failure.
    pub fn in_value(&self, port: &str) -> Result<BbValue, EngineError> {
        self.ports.read_in(port, self.scope)
    }

    /// Reads a blackboard key directly (value copied).
    pub fn bb_get(&self, key: &str) -> Result<BbValue, EngineError> {
        self.scope.get(key)
    }

    /// Writes a blackboard key; exactly one BB_WRITE record per write.
    pub fn bb_set(&mut self, key: &str, value: BbValue) {
        let rendered = format!("{key}={}", value.to_wire());
        if let Some(old) = self.scope.set(key, value) {
            log::warn!(
                "{}: blackboard key {key:?} changed type from {old}",
                self.path
            );
        }
        self.ctx.push(TraceKind::BbWrite, self.path, rendered);
    }

    /// Writes through an out-port to its bound key.
    pub fn write_out(&mut self, port: &str, value: BbValue) -> Result<(), EngineError> {
        let key = self.ports.out_key(port)?.to_string();
        self.bb_set(&key, value);
        Ok(())
    }

    /// Records `direction:op:detail` for a skill protocol exchange.
    pub fn trace_skill(&mut self, payload: String) {
        self.ctx.push(TraceKind::SkillMsg, self.path, payload);
    }

    /// Annotates the trace when a leaf maps an execution error to Failure.
    pub fn trace_annotation(&mut self, payload: String) {
        self.ctx.push(TraceKind::StatusChange, self.path, payload);
    }

    /// Marks the run unhealthy (shows up in the run report).
    pub fn flag_unhealthy(&mut self) {
        let path = self.path.to_string();
        self.ctx.unhealthy.push(path);
    }

    /// Builds the handle a background worker keeps for the episode.
    pub fn worker_handle(&self, halt_flag: Arc<AtomicBool>) -> WorkerHandle {
        let (sink, tick_cell, clock) = self.ctx.worker_parts();
        WorkerHandle {
            halt: halt_flag,
            clock,
            scope: Arc::clone(self.scope),
            sink,
            tick_cell,
            path: Arc::clone(self.path),
        }
    }
}

/// The leaf contract.
///
/// `tick` returns Success, Failure, or Running. A leaf must reset its own
/// episode state when it returns a terminal status, so the next tick starts
/// a fresh episode. `halt` aborts a running episode (running the abort
/// routine at most once) and resets state; when nothing is running it is a
/// no-op.
pub trait Leaf {
    fn tick(&mut self, ctx: &mut LeafCtx) -> Result<NodeStatus, EngineError>;

    fn halt(&mut self, ctx: &mut LeafCtx) -> Result<(), EngineError> {
        let _ = ctx;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Conditions
// ---------------------------------------------------------------------------

/// Condition from a predicate. Never returns Running; evaluation must not
/// write the blackboard.
pub struct FnCondition<F>
where
    F: FnMut(&LeafCtx) -> Result<bool, EngineError>,
{
    predicate: F,
}

impl<F> FnCondition<F>
where
    F: FnMut(&LeafCtx) -> Result<bool, EngineError>,
{
    pub fn new(predicate: F) -> FnCondition<F> {
        FnCondition { predicate }
    }
}

impl<F> Leaf for FnCondition<F>
where
    F: FnMut(&LeafCtx) -> Result<bool, EngineError>,
{
    fn tick(&mut self, ctx: &mut LeafCtx) -> Result<NodeStatus, EngineError> {
        Ok(if (self.predicate)(ctx)? {
            NodeStatus::Success
        } else {
            NodeStatus::Failure
        })
    }
}

// ---------------------------------------------------------------------------
// Synchronous stepped actions
// ---------------------------------------------------------------------------

/// What one synchronous step reports back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Done(NodeStatus),
}

/// Runs up to `budget` steps of the body per tick, entirely on the
/// traversal. The step index restarts at zero each episode.
pub struct SyncAction<F>
where
    F: FnMut(&mut LeafCtx, u64) -> Result<StepOutcome, EngineError>,
{
    budget: u32,
    next_step: u64,
    step: F,
}

impl<F> SyncAction<F>
where
    F: FnMut(&mut LeafCtx, u64) -> Result<StepOutcome, EngineError>,
{
    /// `budget` is the number of steps executed per tick, at least 1.
    pub fn new(budget: u32, step: F) -> SyncAction<F> {
        assert!(budget >= 1, "step budget must be at least 1");
        SyncAction {
            budget,
            next_step: 0,
            step,
        }
    }
}

impl<F> Leaf for SyncAction<F>
where
    F: FnMut(&mut LeafCtx, u64) -> Result<StepOutcome, EngineError>,
{
    fn tick(&mut self, ctx: &mut LeafCtx) -> Result<NodeStatus, EngineError> {
        for _ in 0..self.budget {
            match (self.step)(ctx, self.next_step) {
                Ok(StepOutcome::Continue) => self.next_step += 1,
                Ok(StepOutcome::Done(status)) => {
                    self.next_step = 0;
                    return Ok(status);
                }
                Err(err) => {
                    // execution errors inside a step degrade to Failure
                    self.next_step = 0;
                    ctx.trace_annotation(format!("Failure:{err}"));
                    return Ok(NodeStatus::Failure);
                }
            }
        }
        Ok(NodeStatus::Running)
    }

    fn halt(&mut self, _ctx: &mut LeafCtx) -> Result<(), EngineError> {
        self.next_step = 0;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Asynchronous worker actions
// ---------------------------------------------------------------------------

/// Result of an asynchronous work body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkOutcome {
    Success,
    Failure,
}

/// What the background body holds for the duration of one episode: the halt
/// signal to poll, the clock, the blackboard scope, and the trace sink.
pub struct WorkerHandle {
    halt: Arc<AtomicBool>,
    pub clock: Clock,
    scope: Arc<Scope>,
    sink: Arc<dyn TraceSink>,
    tick_cell: Arc<AtomicU64>,
    path: Arc<str>,
}

impl WorkerHandle {
    /// True once the traversal fired the halt signal; poll this between
    /// slices of work and return promptly when set.
    pub fn halted(&self) -> bool {
        self.halt.load(Ordering::Acquire)
    }

    /// Cooperative wait until the given point on the run's clock, sliced so
    /// the halt signal is observed quickly. Returns false if halted.
    pub fn wait_until(&self, deadline: Duration) -> bool {
        while self.clock.now() < deadline {
            if self.halted() {
                return false;
            }
            thread::sleep(Duration::from_micros(200));
        }
        !self.halted()
    }

    /// Blackboard write from the worker; emits the BB_WRITE record directly
    /// to the sink, tagged with the current root tick.
    pub fn bb_set(&self, key: &str, value: BbValue) {
        let rendered = format!("{key}={}", value.to_wire());
        if let Some(old) = self.scope.set(key, value) {
            log::warn!("{}: blackboard key {key:?} changed type from {old}", self.path);
        }
        if self.sink.enabled() {
            let _ = self.sink.emit(&TraceEvent {
                tick: self.tick_cell.load(Ordering::Acquire),
                path: Arc::clone(&self.path),
                kind: TraceKind::BbWrite,
                payload: rendered,
            });
        }
    }
}

const CELL_RUNNING: u8 = 1;
const CELL_SUCCESS: u8 = 2;
const CELL_FAILURE: u8 = 3;

struct AsyncEpisode {
    cell: Arc<AtomicU8>,
    halt: Arc<AtomicBool>,
    done_rx: mpsc::Receiver<()>,
    join: Option<thread::JoinHandle<()>>,
    panicked: Arc<AtomicBool>,
}

/// Action whose body runs on a background thread.
pub struct AsyncAction {
    work: Arc<dyn Fn(&WorkerHandle) -> WorkOutcome + Send + Sync>,
    abort: Option<Arc<dyn Fn() + Send + Sync>>,
    episode: Option<AsyncEpisode>,
}

impl AsyncAction {
    pub fn new(work: impl Fn(&WorkerHandle) -> WorkOutcome + Send + Sync + 'static) -> AsyncAction {
        AsyncAction {
            work: Arc::new(work),
            abort: None,
            episode: None,
        }
    }

    /// Registers the safe abort routine; it runs at most once per episode,
    /// on the traversal, right after the halt signal fires.
    pub fn with_abort(mut self, abort: impl Fn() + Send + Sync + 'static) -> AsyncAction {
        self.abort = Some(Arc::new(abort));
        self
    }
}

impl Leaf for AsyncAction {
    fn tick(&mut self, ctx: &mut LeafCtx) -> Result<NodeStatus, EngineError> {
        match &self.episode {
            None => {
                let cell = Arc::new(AtomicU8::new(CELL_RUNNING));
                let halt = Arc::new(AtomicBool::new(false));
                let panicked = Arc::new(AtomicBool::new(false));
                let (done_tx, done_rx) = mpsc::channel();
                let handle = ctx.worker_handle(Arc::clone(&halt));
                let work = Arc::clone(&self.work);
                let worker_cell = Arc::clone(&cell);
                let worker_panicked = Arc::clone(&panicked);
                let join = thread::spawn(move || {
                    let outcome = catch_unwind(AssertUnwindSafe(|| work(&handle)));
                    let value = match outcome {
                        Ok(WorkOutcome::Success) => CELL_SUCCESS,
                        Ok(WorkOutcome::Failure) => CELL_FAILURE,
                        Err(_) => {
                            worker_panicked.store(true, Ordering::Release);
                            CELL_FAILURE
                        }
                    };
                    worker_cell.store(value, Ordering::Release);
                    let _ = done_tx.send(());
                });
                self.episode = Some(AsyncEpisode {
                    cell,
                    halt,
                    done_rx,
                    join: Some(join),
                    panicked,
                });
                Ok(NodeStatus::Running)
            }
            Some(ep) => match ep.cell.load(Ordering::Acquire) {
                CELL_RUNNING => Ok(NodeStatus::Running),
                value => {
                    // the work finished; deliver the terminal status exactly
                    // once and make the next tick a fresh episode
                    let mut ep = self.episode.take().expect("episode present");
                    if let Some(join) = ep.join.take() {
                        let _ = join.join();
                    }
                    if ep.panicked.load(Ordering::Acquire) {
                        ctx.trace_annotation("Failure:worker panicked".to_string());
                    }
                    Ok(if value == CELL_SUCCESS {
                        NodeStatus::Success
                    } else {
                        NodeStatus::Failure
                    })
                }
            },
        }
    }

    fn halt(&mut self, ctx: &mut LeafCtx) -> Result<(), EngineError> {
        let Some(mut ep) = self.episode.take() else {
            return Ok(());
        };
        if ep.cell.load(Ordering::Acquire) == CELL_RUNNING {
            ep.halt.store(true, Ordering::Release);
            if let Some(abort) = &self.abort {
                abort();
            }
            match ep.done_rx.recv_timeout(ctx.halt_timeout()) {
                Ok(()) => {
                    if let Some(join) = ep.join.take() {
                        let _ = join.join();
                    }
                }
                Err(_) => {
                    // abandon the worker token; the run is flagged unhealthy
                    return Err(EngineError::HaltTimeout {
                        path: ctx.path().to_string(),
                        timeout_ms: ctx.halt_timeout().as_millis() as u64,
                    });
                }
            }
        } else if let Some(join) = ep.join.take() {
            // finished naturally: nothing to abort
            let _ = join.join();
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Cooperative-yield actions
// ---------------------------------------------------------------------------

/// What a resumable body reports at each resumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoStep {
    /// Suspend here; status Running; resume after this checkpoint next tick.
    Yield,
    Done(NodeStatus),
}

/// Why the body is being resumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoMode {
    /// Ordinary tick: continue from the last checkpoint.
    Run,
    /// The node was halted while suspended: run cleanup and return Done.
    Halt,
}

/// A resumable action body. The engine guarantees strict alternation with
/// the traversal: no body code ever runs concurrently with it.
pub trait CoBody {
    fn resume(&mut self, mode: CoMode, ctx: &mut LeafCtx) -> Result<CoStep, EngineError>;
}

impl<F> CoBody for F
where
    F: FnMut(CoMode, &mut LeafCtx) -> Result<CoStep, EngineError>,
{
    fn resume(&mut self, mode: CoMode, ctx: &mut LeafCtx) -> Result<CoStep, EngineError> {
        self(mode, ctx)
    }
}

/// Coroutine-style action: suspends at checkpoints, no background thread.
pub struct CoYieldAction {
    body: Box<dyn CoBody>,
    suspended: bool,
    in_body: bool,
}

impl CoYieldAction {
    pub fn new(body: impl CoBody + 'static) -> CoYieldAction {
        CoYieldAction {
            body: Box::new(body),
            suspended: false,
            in_body: false,
        }
    }
}

impl Leaf for CoYieldAction {
    fn tick(&mut self, ctx: &mut LeafCtx) -> Result<NodeStatus, EngineError> {
        assert!(!self.in_body, "coroutine body re-entered");
        self.in_body = true;
        let step = self.body.resume(CoMode::Run, ctx);
        self.in_body = false;
        match step? {
            CoStep::Yield => {
                self.suspended = true;
                Ok(NodeStatus::Running)
            }
            CoStep::Done(status) => {
                self.suspended = false;
                Ok(status)
            }
        }
    }

    fn halt(&mut self, ctx: &mut LeafCtx) -> Result<(), EngineError> {
        if self.suspended {
            assert!(!self.in_body, "coroutine body re-entered");
            self.in_body = true;
            let step = self.body.resume(CoMode::Halt, ctx);
            self.in_body = false;
            self.suspended = false;
            step?;
        }
        Ok(())
    }
}
