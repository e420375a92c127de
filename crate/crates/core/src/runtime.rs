//! The root tick loop.
//!
//! `run` steps the tree at the configured rate until the root returns a
//! terminal status (or the tick cap is reached), halts whatever is still
//! running on early termination, and produces a report. Under the simulated
//! clock, rate control advances time without consuming any wall time, so
//! timing-sensitive runs are fast and deterministic.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::clock::Clock;
use crate::error::EngineError;
use crate::node::{TickContext, Tree};
use crate::status::NodeStatus;
use crate::trace::{NullSink, TraceSink};

#[derive(Clone)]
pub struct RunConfig {
    /// Root tick frequency; must be positive.
    pub tick_hz: f64,
    /// Deadline for a leaf's abort routine during halt.
    pub halt_timeout: Duration,
    /// Stop after this many root ticks even if the root is still Running.
    pub max_ticks: Option<u64>,
    /// Keep re-ticking after a terminal root status instead of stopping.
    pub loop_forever: bool,
    pub clock: Clock,
    pub sink: Arc<dyn TraceSink>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            tick_hz: 10.0,
            halt_timeout: Duration::from_millis(1000),
            max_ticks: None,
            loop_forever: false,
            clock: Clock::simulated(),
            sink: Arc::new(NullSink),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.tick_hz > 0.0 && self.tick_hz.is_finite()) {
            return Err(EngineError::Config(format!(
                "tick rate must be positive, got {}",
                self.tick_hz
            )));
        }
        if self.halt_timeout.is_zero() {
            return Err(EngineError::Config("halt timeout must be positive".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> Duration {
        Duration::from_secs_f64(1.0 / self.tick_hz)
    }

    /// Context pre-configured from this run config.
    pub fn context(&self) -> TickContext {
        let mut ctx = TickContext::new(self.clock.clone(), Arc::clone(&self.sink));
        ctx.halt_timeout = self.halt_timeout;
        ctx.seed = self.seed;
        ctx
    }
}

/// Outcome of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub final_status: NodeStatus,
    pub ticks: u64,
    pub wall: Duration,
    /// Steps that took longer than the tick period (recorded, never
    /// compensated by concurrent ticking).
    pub deadline_misses: u64,
    /// Paths of leaves whose abort routine missed the halt deadline.
    pub unhealthy: Vec<String>,
    /// Per-node tick counts, sorted by path.
    pub node_ticks: Vec<(String, u64)>,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "final_status: {}", self.final_status)?;
        writeln!(f, "ticks: {}", self.ticks)?;
        writeln!(f, "wall_ms: {}", self.wall.as_millis())?;
        writeln!(f, "deadline_misses: {}", self.deadline_misses)?;
        writeln!(
            f,
            "unhealthy: {}",
            if self.unhealthy.is_empty() {
                "-".to_string()
            } else {
                self.unhealthy.join(",")
            }
        )?;
        writeln!(f, "node_ticks:")?;
        for (path, n) in &self.node_ticks {
            writeln!(f, "  {path}: {n}")?;
        }
        Ok(())
    }
}

/// One full root tick. A terminal status left over from the previous step is
/// consumed first, so the new tick starts a fresh episode. All trace records
/// for the tick are flushed before returning.
pub fn step(tree: &mut Tree, ctx: &mut TickContext) -> Result<NodeStatus, EngineError> {
    tree.root.consume_terminal(ctx);
    ctx.begin_root_tick();
    let status = tree.tick(ctx);
    ctx.flush()?;
    status
}

/// Runs the tick loop per `cfg`. On the tick cap (or a `loop_forever` run
/// ending some other way) the whole tree is halted before returning, so no
/// node is left Running.
pub fn run(tree: &mut Tree, cfg: &RunConfig) -> Result<RunReport, EngineError> {
    run_with(tree, cfg, |_| {})
}

/// `run` with a scenario hook invoked before every step with the upcoming
/// tick number (starting at 1).
pub fn run_with(
    tree: &mut Tree,
    cfg: &RunConfig,
    mut before_step: impl FnMut(u64),
) -> Result<RunReport, EngineError> {
    cfg.validate()?;
    let mut ctx = cfg.context();
    let period = cfg.period();
    let started = Instant::now();
    let mut deadline_misses = 0u64;
    let status = loop {
        if let Some(cap) = cfg.max_ticks {
            if ctx.tick_no() >= cap {
                break tree.status();
            }
        }
        before_step(ctx.tick_no() + 1);
        let step_started = cfg.clock.now();
        let status = step(tree, &mut ctx)?;
        if status.is_terminal() && !cfg.loop_forever {
            break status;
        }
        let elapsed = cfg.clock.now().saturating_sub(step_started);
        if elapsed > period {
            deadline_misses += 1;
        }
        cfg.clock.pace(period, elapsed);
    };
    if tree.any_running() {
        tree.halt(&mut ctx);
        ctx.flush()?;
    }
    debug_assert!(!tree.any_running());
    Ok(RunReport {
        final_status: status,
        ticks: ctx.tick_no(),
        wall: started.elapsed(),
        deadline_misses,
        unhealthy: std::mem::take(&mut ctx.unhealthy),
        node_ticks: tree.tick_counts(),
    })
}
