//! BT-side remote skill leaves.
//!
//! A remote action forwards the tick/halt contract over the wire: the first
//! tick of an episode sends `start` and returns Running, later ticks poll
//! with `status`, and halt sends `stop` and blocks until the ack. A remote
//! condition resolves within its tick (conditions never return Running), so
//! it sends `start` and waits for the immediate result.

use std::collections::BTreeMap;
use std::time::Duration;

use ticktree::{BbValue, EngineError, Leaf, LeafCtx, NodeStatus, PortDirection};

use crate::transport::SkillTransport;
use crate::wire::{Op, SkillMessage, WireError};

const RESPONSE_TIMEOUT: Duration = Duration::from_millis(1000);

enum Phase {
    Idle,
    Started,
}

pub struct RemoteAction {
    skill: String,
    transport: Box<dyn SkillTransport>,
    next_id: u64,
    phase: Phase,
}

impl RemoteAction {
    pub fn new(skill: &str, transport: Box<dyn SkillTransport>) -> RemoteAction {
        RemoteAction {
            skill: skill.to_string(),
            transport,
            next_id: 1,
            phase: Phase::Idle,
        }
    }
}

fn gather_args(ctx: &LeafCtx) -> Result<BTreeMap<String, String>, EngineError> {
    let mut args = BTreeMap::new();
    for binding in ctx.ports().iter() {
        if binding.direction == PortDirection::In {
            let value = ctx.in_value(&binding.name)?;
            args.insert(binding.name.clone(), value.to_wire());
        }
    }
    Ok(args)
}

fn write_outputs(ctx: &mut LeafCtx, outputs: &BTreeMap<String, String>) -> Result<(), EngineError> {
    let out_ports: Vec<String> = ctx
        .ports()
        .iter()
        .filter(|b| b.direction == PortDirection::Out)
        .map(|b| b.name.clone())
        .collect();
    for port in out_ports {
        if let Some(raw) = outputs.get(&port) {
            ctx.write_out(&port, BbValue::parse(raw))?;
        }
    }
    Ok(())
}

fn map_payload(payload: &str) -> NodeStatus {
    match payload {
        "success" => NodeStatus::Success,
        "failure" => NodeStatus::Failure,
        // idle and running both mean "still pending" to the tree
        _ => NodeStatus::Running,
    }
}

impl RemoteAction {
    fn exchange(
        &mut self,
        ctx: &mut LeafCtx,
        op: Op,
        args: BTreeMap<String, String>,
        timeout: Duration,
    ) -> Result<SkillMessage, WireError> {
        let msg = SkillMessage::request(self.next_id, op, &self.skill, args);
        self.next_id += 1;
        ctx.trace_skill(format!("send:{}:{}", msg.op, msg.skill));
        let response = self.transport.request(&msg, timeout)?;
        ctx.trace_skill(format!("recv:{}:{}", response.op, response.payload));
        Ok(response)
    }

    /// Connection trouble degrades to Failure and resets the episode; the
    /// trace carries the reason and the run is flagged unhealthy.
    fn connection_lost(&mut self, ctx: &mut LeafCtx, err: WireError) -> NodeStatus {
        ctx.trace_skill(format!("recv:error:{err}"));
        ctx.trace_annotation(format!("Failure:skill connection: {err}"));
        ctx.flag_unhealthy();
        self.phase = Phase::Idle;
        NodeStatus::Failure
    }
}

impl Leaf for RemoteAction {
    fn tick(&mut self, ctx: &mut LeafCtx) -> Result<NodeStatus, EngineError> {
        match std::mem::replace(&mut self.phase, Phase::Idle) {
            Phase::Idle => {
                let args = gather_args(ctx)?;
                match self.exchange(ctx, Op::Start, args, RESPONSE_TIMEOUT) {
                    Ok(response) => match response.op {
                        // a skill that completed within the start exchange
                        // delivers its result on this very tick; stalling it
                        // to the next tick would make instant skills flap
                        // Running/Success under a reactive parent
                        Op::Result => {
                            write_outputs(ctx, &response.args)?;
                            Ok(map_payload(&response.payload))
                        }
                        Op::Error => Err(EngineError::SkillConnection {
                            path: ctx.path().to_string(),
                            message: response.payload,
                        }),
                        _ => {
                            self.phase = Phase::Started;
                            Ok(NodeStatus::Running)
                        }
                    },
                    Err(err) => Ok(self.connection_lost(ctx, err)),
                }
            }
            Phase::Started => {
                match self.exchange(ctx, Op::Status, BTreeMap::new(), RESPONSE_TIMEOUT) {
                    Ok(response) => {
                        let status = map_payload(&response.payload);
                        if status == NodeStatus::Running {
                            self.phase = Phase::Started;
                        } else {
                            write_outputs(ctx, &response.args)?;
                        }
                        Ok(status)
                    }
                    Err(err) => Ok(self.connection_lost(ctx, err)),
                }
            }
        }
    }

    fn halt(&mut self, ctx: &mut LeafCtx) -> Result<(), EngineError> {
        let phase = std::mem::replace(&mut self.phase, Phase::Idle);
        if let Phase::Started = phase {
            let timeout = ctx.halt_timeout();
            match self.exchange(ctx, Op::Stop, BTreeMap::new(), timeout) {
                Ok(response) if response.op == Op::Ack => Ok(()),
                Ok(response) => Err(EngineError::SkillConnection {
                    path: ctx.path().to_string(),
                    message: format!("stop answered with {}", response.op),
                }),
                Err(WireError::Timeout(_)) | Err(WireError::Io(_)) => {
                    Err(EngineError::HaltTimeout {
                        path: ctx.path().to_string(),
                        timeout_ms: timeout.as_millis() as u64,
                    })
                }
                Err(err) => Err(EngineError::SkillConnection {
                    path: ctx.path().to_string(),
                    message: err.to_string(),
                }),
            }
        } else {
            Ok(())
        }
    }
}

/// Condition backed by a skill; the start exchange must resolve to a result
/// within the tick.
pub struct RemoteCondition {
    skill: String,
    transport: Box<dyn SkillTransport>,
    next_id: u64,
}

impl RemoteCondition {
    pub fn new(skill: &str, transport: Box<dyn SkillTransport>) -> RemoteCondition {
        RemoteCondition {
            skill: skill.to_string(),
            transport,
            next_id: 1,
        }
    }
}

impl Leaf for RemoteCondition {
    fn tick(&mut self, ctx: &mut LeafCtx) -> Result<NodeStatus, EngineError> {
        let args = gather_args(ctx)?;
        let msg = SkillMessage::request(self.next_id, Op::Start, &self.skill, args);
        self.next_id += 1;
        ctx.trace_skill(format!("send:start:{}", self.skill));
        let response = self
            .transport
            .request(&msg, RESPONSE_TIMEOUT)
            .map_err(|err| EngineError::Predicate {
                path: ctx.path().to_string(),
                message: format!("skill {}: {err}", self.skill),
            })?;
        ctx.trace_skill(format!("recv:{}:{}", response.op, response.payload));
        match (response.op, response.payload.as_str()) {
            (Op::Result, "success") => Ok(NodeStatus::Success),
            (Op::Result, "failure") => Ok(NodeStatus::Failure),
            (op, payload) => Err(EngineError::Predicate {
                path: ctx.path().to_string(),
                message: format!(
                    "condition skill {} did not resolve: {op} {payload:?}",
                    self.skill
                ),
            }),
        }
    }
}
