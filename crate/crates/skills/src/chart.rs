//! Skills as small state charts over the simulated world.
//!
//! A chart has named states, each with an effect executed once per step, and
//! event-triggered transitions: `step-complete`, `failure`, and `stop`. Two
//! designated terminal states represent succeeded and failed executions; a
//! third stable outcome, `stopped`, is where preempted charts come to rest.
//! Every non-terminal state must reach a stable state through its stop
//! transition — that is what makes a skill preemptable.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::world::SimWorld;

pub type Args = BTreeMap<String, String>;

/// What one step of a state's effect reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepResult {
    /// More work in this state.
    Again,
    /// Fire the step-complete transition.
    Complete,
    /// Fire the failure transition.
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Success,
    Failure,
    Stopped,
}

type Effect = Arc<dyn Fn(&mut SimWorld, &Args, u32, &mut Args) -> StepResult + Send + Sync>;

/// One chart state: an effect plus outgoing transitions. Terminal states
/// have no effect and no transitions.
#[derive(Clone)]
pub struct StateDef {
    pub effect: Option<Effect>,
    pub on_complete: Option<String>,
    pub on_failure: Option<String>,
    pub on_stop: Option<String>,
    pub terminal: Option<Terminal>,
}

impl StateDef {
    pub fn terminal(kind: Terminal) -> StateDef {
        StateDef {
            effect: None,
            on_complete: None,
            on_failure: None,
            on_stop: None,
            terminal: Some(kind),
        }
    }

    pub fn active(
        effect: impl Fn(&mut SimWorld, &Args, u32, &mut Args) -> StepResult + Send + Sync + 'static,
    ) -> StateDef {
        StateDef {
            effect: Some(Arc::new(effect)),
            on_complete: None,
            on_failure: None,
            on_stop: None,
            terminal: None,
        }
    }

    pub fn complete_to(mut self, state: &str) -> StateDef {
        self.on_complete = Some(state.to_string());
        self
    }

    pub fn fail_to(mut self, state: &str) -> StateDef {
        self.on_failure = Some(state.to_string());
        self
    }

    pub fn stop_to(mut self, state: &str) -> StateDef {
        self.on_stop = Some(state.to_string());
        self
    }
}

/// A named skill chart.
#[derive(Clone)]
pub struct SkillStateChart {
    pub name: String,
    pub initial: String,
    pub states: BTreeMap<String, StateDef>,
}

impl SkillStateChart {
    pub fn new(name: &str, initial: &str) -> SkillStateChart {
        SkillStateChart {
            name: name.to_string(),
            initial: initial.to_string(),
            states: BTreeMap::new(),
        }
    }

    pub fn state(mut self, name: &str, def: StateDef) -> SkillStateChart {
        self.states.insert(name.to_string(), def);
        self
    }

    /// Static preemptability check: from every non-terminal state, the stop
    /// transition exists and leads to a stable (terminal) state within a
    /// bounded number of step-complete/failure hops.
    pub fn check_preemptable(&self) -> Result<(), String> {
        for (name, def) in &self.states {
            if def.terminal.is_some() {
                continue;
            }
            let target = def
                .on_stop
                .as_ref()
                .ok_or_else(|| format!("{}: state {name:?} has no stop transition", self.name))?;
            let mut current = target.clone();
            for _ in 0..self.states.len() + 1 {
                let state = self.states.get(&current).ok_or_else(|| {
                    format!("{}: transition to unknown state {current:?}", self.name)
                })?;
                if state.terminal.is_some() {
                    current.clear();
                    break;
                }
                // follow the forward path the engine would step through
                current = state
                    .on_complete
                    .clone()
                    .or_else(|| state.on_failure.clone())
                    .ok_or_else(|| {
                        format!("{}: stop path stalls in state {current:?}", self.name)
                    })?;
            }
            if !current.is_empty() {
                return Err(format!(
                    "{}: stop path from {name:?} does not stabilize",
                    self.name
                ));
            }
        }
        Ok(())
    }
}
