//! Test support: scripted leaves, direct tree builders, and trace checks.
//!
//! A scripted leaf returns a fixed status per root tick (the last entry
//! repeats once the script is exhausted) and records ticks and aborts, so
//! harnesses can compare engine behavior against a script table and verify
//! the preemption contract from the outside.

use std::cell::{Cell, RefCell};
use std::rc::Rc;
use std::sync::Arc;
use std::time::Duration;

use crate::blackboard::{PortMap, Scope};
use crate::error::EngineError;
use crate::leaf::{Leaf, LeafCtx};
use crate::node::{NodeId, NodeKind, Tree, TreeNode};
use crate::status::NodeStatus;
use crate::trace::{TraceEvent, TraceKind};

/// Shared view of one scripted leaf: its script cell and counters.
#[derive(Clone)]
pub struct ScriptHandle {
    script: Rc<RefCell<Vec<NodeStatus>>>,
    ticks: Rc<Cell<u64>>,
    aborts: Rc<Cell<u64>>,
}

impl ScriptHandle {
    /// Replaces the script in place (no reallocation when capacity holds).
    pub fn set_script(&self, statuses: &[NodeStatus]) {
        let mut script = self.script.borrow_mut();
        script.clear();
        script.extend_from_slice(statuses);
    }

    pub fn ticks(&self) -> u64 {
        self.ticks.get()
    }

    /// How many times the abort routine ran (halt while Running).
    pub fn aborts(&self) -> u64 {
        self.aborts.get()
    }

    pub fn reset_counters(&self) {
        self.ticks.set(0);
        self.aborts.set(0);
    }
}

/// Leaf that replays a per-tick status script.
pub struct ScriptedLeaf {
    script: Rc<RefCell<Vec<NodeStatus>>>,
    ticks: Rc<Cell<u64>>,
    aborts: Rc<Cell<u64>>,
    running: bool,
}

impl ScriptedLeaf {
    pub fn new(statuses: &[NodeStatus]) -> (ScriptedLeaf, ScriptHandle) {
        assert!(!statuses.is_empty(), "script must not be empty");
        let script = Rc::new(RefCell::new(statuses.to_vec()));
        let ticks = Rc::new(Cell::new(0));
        let aborts = Rc::new(Cell::new(0));
        let handle = ScriptHandle {
            script: Rc::clone(&script),
            ticks: Rc::clone(&ticks),
            aborts: Rc::clone(&aborts),
        };
        (
            ScriptedLeaf {
                script,
                ticks,
                aborts,
                running: false,
            },
            handle,
        )
    }
}

impl Leaf for ScriptedLeaf {
    fn tick(&mut self, ctx: &mut LeafCtx) -> Result<NodeStatus, EngineError> {
        let script = self.script.borrow();
        let index = (ctx.tick_no().max(1) - 1).min(script.len() as u64 - 1) as usize;
        let status = script[index];
        self.ticks.set(self.ticks.get() + 1);
        self.running = status == NodeStatus::Running;
        Ok(status)
    }

    fn halt(&mut self, _ctx: &mut LeafCtx) -> Result<(), EngineError> {
        if self.running {
            self.aborts.set(self.aborts.get() + 1);
            self.running = false;
        }
        Ok(())
    }
}

/// Declarative shape for building trees directly, bypassing the file format.
pub enum TestNode {
    Sequence(Vec<TestNode>),
    Fallback(Vec<TestNode>),
    Parallel(usize, Vec<TestNode>),
    SequenceMemory(Vec<TestNode>),
    FallbackMemory(Vec<TestNode>),
    ParallelMemory(usize, Vec<TestNode>),
    Inverter(Box<TestNode>),
    Retry(u32, Box<TestNode>),
    Timeout(u64, Box<TestNode>),
    Scripted(Vec<NodeStatus>),
    Leaf(Box<dyn Leaf>),
    Condition(Box<dyn Leaf>),
}

impl TestNode {
    pub fn scripted(statuses: &[NodeStatus]) -> TestNode {
        TestNode::Scripted(statuses.to_vec())
    }
}

/// Builds an executable tree from a [`TestNode`] spec. Returns the handles
/// of all scripted leaves in pre-order.
pub fn build(spec: TestNode) -> (Tree, Vec<ScriptHandle>) {
    let scope = Scope::root();
    let mut handles = Vec::new();
    let mut next_id = 0u32;
    let root = build_node(spec, "root".to_string(), &scope, &mut next_id, &mut handles);
    (Tree::new(root, vec![scope]), handles)
}

fn build_node(
    spec: TestNode,
    path: String,
    scope: &Arc<Scope>,
    next_id: &mut u32,
    handles: &mut Vec<ScriptHandle>,
) -> TreeNode {
    let id = NodeId(*next_id);
    *next_id += 1;
    let (kind, child_specs): (NodeKind, Vec<TestNode>) = match spec {
        TestNode::Sequence(c) => (NodeKind::Sequence, c),
        TestNode::Fallback(c) => (NodeKind::Fallback, c),
        TestNode::Parallel(required, c) => (NodeKind::Parallel { required }, c),
        TestNode::SequenceMemory(c) => (NodeKind::SequenceMemory { current: 0 }, c),
        TestNode::FallbackMemory(c) => (NodeKind::FallbackMemory { current: 0 }, c),
        TestNode::ParallelMemory(required, c) => (
            NodeKind::ParallelMemory {
                required,
                done: vec![false; c.len()],
                statuses: vec![NodeStatus::Idle; c.len()],
            },
            c,
        ),
        TestNode::Inverter(c) => (NodeKind::Inverter, vec![*c]),
        TestNode::Retry(max_attempts, c) => (
            NodeKind::Retry {
                max_attempts,
                attempts: 0,
            },
            vec![*c],
        ),
        TestNode::Timeout(ms, c) => (
            NodeKind::Timeout {
                duration: Duration::from_millis(ms),
                started: None,
            },
            vec![*c],
        ),
        TestNode::Scripted(statuses) => {
            let (leaf, handle) = ScriptedLeaf::new(&statuses);
            handles.push(handle);
            (NodeKind::Action(Box::new(leaf)), vec![])
        }
        TestNode::Leaf(leaf) => (NodeKind::Action(leaf), vec![]),
        TestNode::Condition(leaf) => (NodeKind::Condition(leaf), vec![]),
    };
    let children = child_specs
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let child_path = format!("{path}/{i}");
            build_node(c, child_path, scope, next_id, handles)
        })
        .collect();
    TreeNode::new(id, path, kind, children, Arc::clone(scope), PortMap::default())
}

// ---------------------------------------------------------------------------
// Trace checks
// ---------------------------------------------------------------------------

/// Verifies the preemption contract over a recorded trace: within every root
/// tick, each node that entered the tick Running either gets ticked or
/// receives exactly one HALT record, and nothing is left Running at the end.
///
/// Returns a description of the first violation, if any.
pub fn check_preemption(events: &[TraceEvent]) -> Result<(), String> {
    use std::collections::HashMap;

    let mut status: HashMap<&str, NodeStatus> = HashMap::new();
    let mut groups: Vec<&[TraceEvent]> = Vec::new();
    let mut start = 0;
    for i in 1..=events.len() {
        if i == events.len() || events[i].tick != events[start].tick {
            groups.push(&events[start..i]);
            start = i;
        }
    }
    for group in groups {
        let entered_running: Vec<&str> = status
            .iter()
            .filter(|(_, s)| **s == NodeStatus::Running)
            .map(|(p, _)| *p)
            .collect();
        let mut touched: HashMap<&str, (bool, u64)> = HashMap::new(); // (ticked, halts)
        for ev in group {
            let entry = touched.entry(&*ev.path).or_insert((false, 0));
            match ev.kind {
                TraceKind::Tick => {
                    entry.0 = true;
                    let s = parse_status(&ev.payload)
                        .ok_or_else(|| format!("bad TICK payload {:?}", ev.payload))?;
                    set_status(&mut status, ev, s);
                }
                TraceKind::Halt => {
                    entry.1 += 1;
                    set_status(&mut status, ev, NodeStatus::Idle);
                }
                TraceKind::StatusChange => {
                    if let Some(s) = parse_status(&ev.payload) {
                        set_status(&mut status, ev, s);
                    }
                }
                _ => {}
            }
        }
        for path in entered_running {
            let (ticked, halts) = touched.get(path).copied().unwrap_or((false, 0));
            if !ticked && halts == 0 {
                return Err(format!(
                    "node {path} was Running entering tick {} but was neither ticked nor halted",
                    group[0].tick
                ));
            }
            if !ticked && halts > 1 {
                return Err(format!(
                    "node {path} received {halts} HALT records in tick {}",
                    group[0].tick
                ));
            }
        }
    }
    if let Some((path, _)) = status.iter().find(|(_, s)| **s == NodeStatus::Running) {
        return Err(format!("node {path} still Running after the last record"));
    }
    Ok(())
}

fn parse_status(payload: &str) -> Option<NodeStatus> {
    match payload.split(':').next()? {
        "Success" => Some(NodeStatus::Success),
        "Failure" => Some(NodeStatus::Failure),
        "Running" => Some(NodeStatus::Running),
        "Idle" => Some(NodeStatus::Idle),
        _ => None,
    }
}

fn set_status<'e>(
    map: &mut std::collections::HashMap<&'e str, NodeStatus>,
    ev: &'e TraceEvent,
    s: NodeStatus,
) {
    map.insert(&*ev.path, s);
}
