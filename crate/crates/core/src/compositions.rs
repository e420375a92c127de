//! Tick logic for Sequence, Fallback, Parallel, their memory variants, and
//! the decorator set.
//!
//! The memoryless compositions re-tick every child up to the one that
//! returns Running or a short-circuiting terminal status, which is what
//! makes the tree reactive. Whenever a composition returns without ticking a
//! child that was left Running by a previous tick, that child is halted
//! before the composition returns (right-to-left).
//!
//! Memory variants keep an index (or a per-child done set) so finished
//! children are not re-evaluated; the memory resets exactly when the node
//! returns Success or Failure, or when it is halted. After a child succeeds,
//! Sequence/Fallback with memory continue to the next child within the same
//! tick call.

use std::time::Duration;

use crate::error::EngineError;
use crate::node::{TickContext, TreeNode};
use crate::status::NodeStatus;

/// Halts, right-to-left, every child at `from..` still Running from an
/// earlier tick.
fn preempt_from(
    children: &mut [TreeNode],
    from: usize,
    ctx: &mut TickContext,
) {
    for child in children[from..].iter_mut().rev() {
        if child.status() == NodeStatus::Running {
            child.halt(ctx);
        }
    }
}

pub fn tick_sequence(
    children: &mut [TreeNode],
    ctx: &mut TickContext,
) -> Result<NodeStatus, EngineError> {
    for i in 0..children.len() {
        let status = children[i].tick(ctx)?;
        if status != NodeStatus::Success {
            preempt_from(children, i + 1, ctx);
            return Ok(status);
        }
    }
    Ok(NodeStatus::Success)
}

pub fn tick_fallback(
    children: &mut [TreeNode],
    ctx: &mut TickContext,
) -> Result<NodeStatus, EngineError> {
    for i in 0..children.len() {
        let status = children[i].tick(ctx)?;
        if status != NodeStatus::Failure {
            preempt_from(children, i + 1, ctx);
            return Ok(status);
        }
    }
    Ok(NodeStatus::Failure)
}

/// Ticks all children, then applies the two threshold tests in order:
/// Success when exactly `required` children report Success, Failure when
/// more than `N - required` report Failure, Running otherwise. Still-Running
/// children are halted on a terminal return.
pub fn tick_parallel(
    children: &mut [TreeNode],
    required: usize,
    ctx: &mut TickContext,
) -> Result<NodeStatus, EngineError> {
    let mut successes = 0usize;
    let mut failures = 0usize;
    for child in children.iter_mut() {
        match child.tick(ctx)? {
            NodeStatus::Success => successes += 1,
            NodeStatus::Failure => failures += 1,
            _ => {}
        }
    }
    let status = parallel_verdict(children.len(), required, successes, failures);
    if status.is_terminal() {
        preempt_from(children, 0, ctx);
    }
    Ok(status)
}

/// The Parallel threshold tests, shared by both variants.
pub fn parallel_verdict(
    child_count: usize,
    required: usize,
    successes: usize,
    failures: usize,
) -> NodeStatus {
    if successes == required {
        NodeStatus::Success
    } else if failures > child_count - required {
        NodeStatus::Failure
    } else {
        NodeStatus::Running
    }
}

pub fn tick_sequence_memory(
    children: &mut [TreeNode],
    current: &mut usize,
    ctx: &mut TickContext,
) -> Result<NodeStatus, EngineError> {
    loop {
        let status = children[*current].tick(ctx)?;
        match status {
            NodeStatus::Running => return Ok(NodeStatus::Running),
            NodeStatus::Failure => {
                *current = 0;
                return Ok(NodeStatus::Failure);
            }
            _ => {
                if *current + 1 < children.len() {
                    *current += 1;
                } else {
                    *current = 0;
                    return Ok(NodeStatus::Success);
                }
            }
        }
    }
}

pub fn tick_fallback_memory(
    children: &mut [TreeNode],
    current: &mut usize,
    ctx: &mut TickContext,
) -> Result<NodeStatus, EngineError> {
    loop {
        let status = children[*current].tick(ctx)?;
        match status {
            NodeStatus::Running => return Ok(NodeStatus::Running),
            NodeStatus::Success => {
                *current = 0;
                return Ok(NodeStatus::Success);
            }
            _ => {
                if *current + 1 < children.len() {
                    *current += 1;
                } else {
                    *current = 0;
                    return Ok(NodeStatus::Failure);
                }
            }
        }
    }
}

/// Ticks only children not yet done; recorded terminal statuses keep
/// counting toward the thresholds on later ticks.
pub fn tick_parallel_memory(
    children: &mut [TreeNode],
    required: usize,
    done: &mut [bool],
    statuses: &mut [NodeStatus],
    ctx: &mut TickContext,
) -> Result<NodeStatus, EngineError> {
    for (i, child) in children.iter_mut().enumerate() {
        if !done[i] {
            let s = child.tick(ctx)?;
            statuses[i] = s;
            if s != NodeStatus::Running {
                done[i] = true;
            }
        }
    }
    let successes = statuses.iter().filter(|s| **s == NodeStatus::Success).count();
    let failures = statuses.iter().filter(|s| **s == NodeStatus::Failure).count();
    let status = parallel_verdict(children.len(), required, successes, failures);
    if status.is_terminal() {
        preempt_from(children, 0, ctx);
        done.fill(false);
        statuses.fill(NodeStatus::Idle);
    }
    Ok(status)
}

/// Re-ticks a failed child on subsequent ticks, returning Running to the
/// parent between attempts; exhaustion returns Failure. The attempt counter
/// is per episode.
pub fn tick_retry(
    child: &mut TreeNode,
    max_attempts: u32,
    attempts: &mut u32,
    ctx: &mut TickContext,
) -> Result<NodeStatus, EngineError> {
    match child.tick(ctx)? {
        NodeStatus::Running => Ok(NodeStatus::Running),
        NodeStatus::Failure => {
            *attempts += 1;
            if *attempts >= max_attempts {
                *attempts = 0;
                Ok(NodeStatus::Failure)
            } else {
                Ok(NodeStatus::Running)
            }
        }
        _ => {
            *attempts = 0;
            Ok(NodeStatus::Success)
        }
    }
}

/// Passes the child status through until the elapsed time since the
/// episode's first tick exceeds the duration; then the child is halted and
/// the decorator fails.
pub fn tick_timeout(
    child: &mut TreeNode,
    duration: Duration,
    started: &mut Option<Duration>,
    ctx: &mut TickContext,
) -> Result<NodeStatus, EngineError> {
    let now = ctx.clock.now();
    let start = *started.get_or_insert(now);
    if now.saturating_sub(start) > duration {
        child.halt(ctx);
        *started = None;
        return Ok(NodeStatus::Failure);
    }
    let status = child.tick(ctx)?;
    if status.is_terminal() {
        *started = None;
    }
    Ok(status)
}
