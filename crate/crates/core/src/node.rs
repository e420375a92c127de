//! Tree structure and the tick / halt / status contract.
//!
//! Traversal is single-threaded: exactly one tick or halt walk is in flight
//! at a time. Leaves that run work in the background publish their progress
//! through a synchronized status cell they own (see [`crate::leaf`]); the
//! traversal only ever reads it.
//!
//! Status lifecycle per node: `Idle` before the first tick; whatever the
//! node returned after a tick; back to `Idle` when the node is halted or
//! when its parent consumes a terminal result (returns a terminal status of
//! its own). Node-local state (memory indices, retry counters, timeout
//! anchors) resets when the node returns a terminal status and on halt.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crate::blackboard::{PortMap, Scope};
use crate::clock::Clock;
use crate::compositions;
use crate::error::EngineError;
use crate::leaf::{Leaf, LeafCtx};
use crate::status::NodeStatus;
use crate::trace::{TraceEvent, TraceKind, TraceSink};

/// Dense per-tree node identifier, assigned depth-first at instantiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

/// Node variant plus its per-episode state.
pub enum NodeKind {
    Sequence,
    Fallback,
    Parallel {
        required: usize,
    },
    SequenceMemory {
        current: usize,
    },
    FallbackMemory {
        current: usize,
    },
    ParallelMemory {
        required: usize,
        done: Vec<bool>,
        statuses: Vec<NodeStatus>,
    },
    Inverter,
    Retry {
        max_attempts: u32,
        attempts: u32,
    },
    Timeout {
        duration: Duration,
        started: Option<Duration>,
    },
    /// Scope boundary; the single child is the inlined subtree root.
    SubTree,
    Action(Box<dyn Leaf>),
    Condition(Box<dyn Leaf>),
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Sequence => "Sequence",
            NodeKind::Fallback => "Fallback",
            NodeKind::Parallel { .. } => "Parallel",
            NodeKind::SequenceMemory { .. } => "SequenceMemory",
            NodeKind::FallbackMemory { .. } => "FallbackMemory",
            NodeKind::ParallelMemory { .. } => "ParallelMemory",
            NodeKind::Inverter => "Inverter",
            NodeKind::Retry { .. } => "Retry",
            NodeKind::Timeout { .. } => "Timeout",
            NodeKind::SubTree => "SubTree",
            NodeKind::Action(_) => "Action",
            NodeKind::Condition(_) => "Condition",
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, NodeKind::Action(_) | NodeKind::Condition(_))
    }
}

/// Shared state for one run: tick counter, clock, trace buffer.
///
/// Trace records produced during a root tick are buffered and flushed at the
/// end of the tick; a node's TICK record is inserted at the position where
/// its dispatch began, so the flushed order is pre-order even though the
/// returned status is only known after the children ran.
pub struct TickContext {
    tick_no: u64,
    tick_cell: Arc<AtomicU64>,
    pub clock: Clock,
    pub halt_timeout: Duration,
    pub seed: u64,
    sink: Arc<dyn TraceSink>,
    tracing: bool,
    buf: Vec<TraceEvent>,
    /// Paths of leaves whose abort routine missed the halt deadline.
    pub unhealthy: Vec<String>,
}

impl TickContext {
    pub fn new(clock: Clock, sink: Arc<dyn TraceSink>) -> TickContext {
        let tracing = sink.enabled();
        TickContext {
            tick_no: 0,
            tick_cell: Arc::new(AtomicU64::new(0)),
            clock,
            halt_timeout: Duration::from_millis(1000),
            seed: 0,
            sink,
            tracing,
            buf: Vec::new(),
            unhealthy: Vec::new(),
        }
    }

    pub fn tick_no(&self) -> u64 {
        self.tick_no
    }

    /// Increments the root tick counter; call exactly once per root tick.
    pub fn begin_root_tick(&mut self) {
        self.tick_no += 1;
        self.tick_cell.store(self.tick_no, Ordering::Release);
    }

    /// Resets the counter for a fresh run over the same tree.
    pub fn reset_ticks(&mut self) {
        self.tick_no = 0;
        self.tick_cell.store(0, Ordering::Release);
    }

    pub fn flush(&mut self) -> Result<(), EngineError> {
        for ev in self.buf.drain(..) {
            self.sink.emit(&ev)?;
        }
        Ok(())
    }

    pub(crate) fn mark(&self) -> usize {
        self.buf.len()
    }

    pub(crate) fn insert_tick(&mut self, at: usize, path: &Arc<str>, status: NodeStatus) {
        if !self.tracing {
            return;
        }
        self.buf.insert(
            at,
            TraceEvent {
                tick: self.tick_no,
                path: Arc::clone(path),
                kind: TraceKind::Tick,
                payload: status.name().to_string(),
            },
        );
    }

    pub(crate) fn push(&mut self, kind: TraceKind, path: &Arc<str>, payload: String) {
        if !self.tracing {
            return;
        }
        self.buf.push(TraceEvent {
            tick: self.tick_no,
            path: Arc::clone(path),
            kind,
            payload,
        });
    }

    /// Pieces a background worker needs to observe the run and emit records.
    pub(crate) fn worker_parts(&self) -> (Arc<dyn TraceSink>, Arc<AtomicU64>, Clock) {
        (
            Arc::clone(&self.sink),
            Arc::clone(&self.tick_cell),
            self.clock.clone(),
        )
    }
}

/// One node of an instantiated tree.
pub struct TreeNode {
    id: NodeId,
    path: Arc<str>,
    pub(crate) kind: NodeKind,
    pub(crate) children: Vec<TreeNode>,
    status: NodeStatus,
    scope: Arc<Scope>,
    ports: PortMap,
    ticks: u64,
}

impl TreeNode {
    pub(crate) fn new(
        id: NodeId,
        path: impl Into<Arc<str>>,
        kind: NodeKind,
        children: Vec<TreeNode>,
        scope: Arc<Scope>,
        ports: PortMap,
    ) -> TreeNode {
        TreeNode {
            id,
            path: path.into(),
            kind,
            children,
            status: NodeStatus::Idle,
            scope,
            ports,
            ticks: 0,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn path(&self) -> &Arc<str> {
        &self.path
    }

    pub fn kind_name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn children(&self) -> &[TreeNode] {
        &self.children
    }

    /// Pure read of the stored status; no tick is emitted, no side effects.
    pub fn status(&self) -> NodeStatus {
        self.status
    }

    pub fn tick_count(&self) -> u64 {
        self.ticks
    }

    /// Dispatches one tick. Returns Success, Failure, or Running — never
    /// Idle. A terminal return consumes the direct children's terminal
    /// statuses (they go back to Idle).
    pub fn tick(&mut self, ctx: &mut TickContext) -> Result<NodeStatus, EngineError> {
        let mark = ctx.mark();
        self.ticks += 1;
        let status = match &mut self.kind {
            NodeKind::Sequence => compositions::tick_sequence(&mut self.children, ctx)?,
            NodeKind::Fallback => compositions::tick_fallback(&mut self.children, ctx)?,
            NodeKind::Parallel { required } => {
                compositions::tick_parallel(&mut self.children, *required, ctx)?
            }
            NodeKind::SequenceMemory { current } => {
                compositions::tick_sequence_memory(&mut self.children, current, ctx)?
            }
            NodeKind::FallbackMemory { current } => {
                compositions::tick_fallback_memory(&mut self.children, current, ctx)?
            }
            NodeKind::ParallelMemory {
                required,
                done,
                statuses,
            } => compositions::tick_parallel_memory(
                &mut self.children,
                *required,
                done,
                statuses,
                ctx,
            )?,
            NodeKind::Inverter => self.children[0].tick(ctx)?.inverted(),
            NodeKind::Retry {
                max_attempts,
                attempts,
            } => compositions::tick_retry(&mut self.children[0], *max_attempts, attempts, ctx)?,
            NodeKind::Timeout { duration, started } => {
                compositions::tick_timeout(&mut self.children[0], *duration, started, ctx)?
            }
            NodeKind::SubTree => self.children[0].tick(ctx)?,
            NodeKind::Action(leaf) => {
                let mut lc = LeafCtx::new(&self.path, &self.scope, &self.ports, ctx);
                leaf.tick(&mut lc)?
            }
            NodeKind::Condition(leaf) => {
                let mut lc = LeafCtx::new(&self.path, &self.scope, &self.ports, ctx);
                let s = leaf.tick(&mut lc)?;
                if s == NodeStatus::Running {
                    return Err(EngineError::Predicate {
                        path: self.path.to_string(),
                        message: "condition returned Running".to_string(),
                    });
                }
                s
            }
        };
        debug_assert!(status != NodeStatus::Idle, "tick must not return Idle");
        self.status = status;
        ctx.insert_tick(mark, &self.path, status);
        if status.is_terminal() {
            self.consume_children(ctx);
        }
        Ok(status)
    }

    /// Safe abort: halts Running descendants deepest-first and right-to-left,
    /// resets all node-local state, and leaves every node in the subtree
    /// Idle. Blocks until leaf abort routines complete; a leaf that misses
    /// the halt deadline is abandoned and recorded in `ctx.unhealthy`.
    ///
    /// Halting an Idle subtree is a no-op and emits no trace records.
    pub fn halt(&mut self, ctx: &mut TickContext) {
        for child in self.children.iter_mut().rev() {
            child.halt(ctx);
        }
        let was = self.status;
        match &mut self.kind {
            NodeKind::SequenceMemory { current } | NodeKind::FallbackMemory { current } => {
                *current = 0;
            }
            NodeKind::ParallelMemory { done, statuses, .. } => {
                done.fill(false);
                statuses.fill(NodeStatus::Idle);
            }
            NodeKind::Retry { attempts, .. } => *attempts = 0,
            NodeKind::Timeout { started, .. } => *started = None,
            NodeKind::Action(leaf) | NodeKind::Condition(leaf) => {
                if was != NodeStatus::Idle {
                    let mut lc = LeafCtx::new(&self.path, &self.scope, &self.ports, ctx);
                    if let Err(err) = leaf.halt(&mut lc) {
                        log::warn!("halt of {} failed: {err}", self.path);
                        ctx.unhealthy.push(self.path.to_string());
                    }
                }
            }
            _ => {}
        }
        if was != NodeStatus::Idle {
            self.status = NodeStatus::Idle;
            ctx.push(TraceKind::Halt, &self.path, NodeStatus::Idle.name().to_string());
        }
    }

    /// Flips direct children holding a delivered terminal status back to
    /// Idle. Their own subtrees were consumed when they returned, and
    /// Running children are handled by halt, so one level is enough.
    fn consume_children(&mut self, ctx: &mut TickContext) {
        for child in &mut self.children {
            if child.status.is_terminal() {
                child.status = NodeStatus::Idle;
                ctx.push(
                    TraceKind::StatusChange,
                    &child.path,
                    NodeStatus::Idle.name().to_string(),
                );
            }
        }
    }

    /// Consumes this node's own delivered terminal status (used by the
    /// runtime on the root between episodes).
    pub(crate) fn consume_terminal(&mut self, ctx: &mut TickContext) {
        if self.status.is_terminal() {
            self.status = NodeStatus::Idle;
            ctx.push(
                TraceKind::StatusChange,
                &self.path,
                NodeStatus::Idle.name().to_string(),
            );
        }
    }

    pub fn walk(&self, f: &mut impl FnMut(&TreeNode)) {
        f(self);
        for child in &self.children {
            child.walk(f);
        }
    }
}

impl std::fmt::Debug for TreeNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TreeNode")
            .field("path", &self.path)
            .field("kind", &self.kind.name())
            .field("status", &self.status)
            .field("children", &self.children.len())
            .finish()
    }
}

impl std::fmt::Debug for Tree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tree")
            .field("nodes", &self.node_count())
            .field("status", &self.status())
            .finish()
    }
}

/// An instantiated, executable tree: the root node plus the scopes created
/// at subtree boundaries (root scope first).
pub struct Tree {
    pub(crate) root: TreeNode,
    scopes: Vec<Arc<Scope>>,
}

impl Tree {
    pub(crate) fn new(root: TreeNode, scopes: Vec<Arc<Scope>>) -> Tree {
        Tree { root, scopes }
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn status(&self) -> NodeStatus {
        self.root.status()
    }

    pub fn tick(&mut self, ctx: &mut TickContext) -> Result<NodeStatus, EngineError> {
        self.root.tick(ctx)
    }

    pub fn halt(&mut self, ctx: &mut TickContext) {
        self.root.halt(ctx);
    }

    pub fn walk(&self, mut f: impl FnMut(&TreeNode)) {
        self.root.walk(&mut f);
    }

    /// True if any node in the tree currently reads Running.
    pub fn any_running(&self) -> bool {
        let mut found = false;
        self.walk(|n| found |= n.status() == NodeStatus::Running);
        found
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(|_| n += 1);
        n
    }

    /// Per-node tick counts, sorted by path.
    pub fn tick_counts(&self) -> Vec<(String, u64)> {
        let mut counts = Vec::new();
        self.walk(|n| counts.push((n.path().to_string(), n.tick_count())));
        counts.sort();
        counts
    }

    pub fn root_scope(&self) -> &Arc<Scope> {
        &self.scopes[0]
    }

    pub fn scopes(&self) -> &[Arc<Scope>] {
        &self.scopes
    }

    /// Sorted `scope_path key type value` lines over every scope.
    pub fn dump_blackboard(&self) -> String {
        let mut lines: Vec<String> = self
            .scopes
            .iter()
            .flat_map(|s| s.dump_lines())
            .collect();
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }
}
