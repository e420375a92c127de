//! Skill execution engine: chart episodes against one guarded world.
//!
//! The engine is transport-agnostic. The socket server steps active
//! episodes from its own stepper thread; the in-process harness steps an
//! episode once per `status` request, which keeps desk-scale runs
//! deterministic. Either way, chart stepping for one episode is serialized
//! and the world is only ever touched while the engine lock is held.

use std::collections::{BTreeMap, HashMap};

use crate::chart::{Args, SkillStateChart, StepResult, Terminal};
use crate::wire::{Op, SkillMessage};
use crate::world::SimWorld;

/// Identifies one client connection; episode keys are (client, skill).
pub type ClientId = u64;

struct Episode {
    state: String,
    steps_in_state: u32,
    args: Args,
    outputs: Args,
    outcome: Option<Terminal>,
}

pub struct SkillEngine {
    world: SimWorld,
    charts: BTreeMap<String, SkillStateChart>,
    episodes: HashMap<(ClientId, String), Episode>,
    /// World-consistency violations observed after chart steps; stays zero.
    pub violations: u64,
}

impl SkillEngine {
    pub fn new(world: SimWorld, charts: Vec<SkillStateChart>) -> SkillEngine {
        SkillEngine {
            world,
            charts: charts.into_iter().map(|c| (c.name.clone(), c)).collect(),
            episodes: HashMap::new(),
            violations: 0,
        }
    }

    pub fn world(&self) -> &SimWorld {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut SimWorld {
        &mut self.world
    }

    pub fn charts(&self) -> impl Iterator<Item = &SkillStateChart> {
        self.charts.values()
    }

    /// Handles one decoded request and produces the correlated response.
    /// `step_on_status` makes a `status` request advance the chart one step
    /// first (the deterministic in-process mode).
    pub fn handle(
        &mut self,
        client: ClientId,
        msg: &SkillMessage,
        step_on_status: bool,
    ) -> SkillMessage {
        match msg.op {
            Op::Start => self.handle_start(client, msg),
            Op::Status => {
                if step_on_status {
                    self.step_episode(client, &msg.skill);
                }
                self.handle_status(client, msg)
            }
            Op::Stop => self.handle_stop(client, msg),
            _ => msg.response(Op::Error, format!("unexpected request op {}", msg.op)),
        }
    }

    fn handle_start(&mut self, client: ClientId, msg: &SkillMessage) -> SkillMessage {
        if !self.charts.contains_key(&msg.skill) {
            return msg.response(Op::Error, format!("unknown skill {:?}", msg.skill));
        }
        let chart = &self.charts[&msg.skill];
        let episode = Episode {
            state: chart.initial.clone(),
            steps_in_state: 0,
            args: msg.args.clone(),
            outputs: BTreeMap::new(),
            outcome: None,
        };
        let key = (client, msg.skill.clone());
        self.episodes.insert(key.clone(), episode);
        // drive instant skills to completion within the start exchange
        self.step_episode(client, &msg.skill);
        let episode = &self.episodes[&key];
        if let Some(outcome) = episode.outcome {
            let mut response = msg.response(Op::Result, terminal_payload(outcome));
            response.args = episode.outputs.clone();
            self.episodes.remove(&key);
            response
        } else {
            msg.response(Op::Ack, "running")
        }
    }

    fn handle_status(&mut self, client: ClientId, msg: &SkillMessage) -> SkillMessage {
        let key = (client, msg.skill.clone());
        match self.episodes.get(&key) {
            None => msg.response(Op::Status, "idle"),
            Some(episode) => match episode.outcome {
                // a delivered terminal ends the episode server-side too
                Some(outcome) => {
                    let mut response = msg.response(Op::Result, terminal_payload(outcome));
                    response.args = episode.outputs.clone();
                    self.episodes.remove(&key);
                    response
                }
                None => msg.response(Op::Status, "running"),
            },
        }
    }

    fn handle_stop(&mut self, client: ClientId, msg: &SkillMessage) -> SkillMessage {
        let key = (client, msg.skill.clone());
        if let Some(episode) = self.episodes.get(&key) {
            if episode.outcome.is_none() {
                let stop_target = self.charts[&msg.skill]
                    .states
                    .get(&episode.state)
                    .and_then(|s| s.on_stop.clone());
                if let Some(target) = stop_target {
                    let episode = self.episodes.get_mut(&key).unwrap();
                    episode.state = target;
                    episode.steps_in_state = 0;
                    // block until the stop path reaches a stable state
                    for _ in 0..64 {
                        if self.episodes[&key].outcome.is_some() {
                            break;
                        }
                        self.step_episode(client, &msg.skill);
                    }
                }
            }
            self.episodes.remove(&key);
        }
        msg.response(Op::Ack, "stopped")
    }

    /// Advances one episode by a single chart step (no-op for finished or
    /// unknown episodes).
    pub fn step_episode(&mut self, client: ClientId, skill: &str) {
        let key = (client, skill.to_string());
        let Some(episode) = self.episodes.get_mut(&key) else {
            return;
        };
        if episode.outcome.is_some() {
            return;
        }
        let chart = &self.charts[skill];
        let Some(state) = chart.states.get(&episode.state) else {
            episode.outcome = Some(Terminal::Failure);
            return;
        };
        if let Some(terminal) = state.terminal {
            episode.outcome = Some(terminal);
            return;
        }
        let result = match &state.effect {
            Some(effect) => effect(
                &mut self.world,
                &episode.args,
                episode.steps_in_state,
                &mut episode.outputs,
            ),
            None => StepResult::Complete,
        };
        if !self.world.consistent() {
            self.violations += 1;
            debug_assert!(false, "world inconsistent after step of {skill}");
        }
        episode.steps_in_state += 1;
        let next = match result {
            StepResult::Again => None,
            StepResult::Complete => state.on_complete.clone(),
            StepResult::Failed => state.on_failure.clone(),
        };
        if let Some(next_state) = next {
            episode.state = next_state.clone();
            episode.steps_in_state = 0;
            // cascade instantly through terminal entry
            if let Some(def) = chart.states.get(&next_state) {
                if let Some(terminal) = def.terminal {
                    episode.outcome = Some(terminal);
                }
            } else {
                episode.outcome = Some(Terminal::Failure);
            }
        } else if result != StepResult::Again {
            // transition event with no edge defined: treat as failed skill
            episode.outcome = Some(Terminal::Failure);
        }
    }

    /// Steps every active episode once (socket-server cadence).
    pub fn step_all(&mut self) {
        let keys: Vec<(ClientId, String)> = self.episodes.keys().cloned().collect();
        for (client, skill) in keys {
            self.step_episode(client, &skill);
        }
    }

    pub fn active_episodes(&self) -> usize {
        self.episodes.len()
    }
}

fn terminal_payload(outcome: Terminal) -> &'static str {
    match outcome {
        Terminal::Success => "success",
        Terminal::Failure => "failure",
        // a stopped chart has no result; report failure if anyone asks
        Terminal::Stopped => "failure",
    }
}
