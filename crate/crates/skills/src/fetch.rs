//! The fetch use case: skill charts, scenario wiring, and the goal check.
//!
//! Skills shipped with the simulated server:
//!
//! * `GotoPose` — drives the base toward `target`; fails when the
//!   navigation server cannot find a path; stopping aborts the motion.
//! * `ObjectGrasped` — instant check whether the robot holds an object
//!   (argument `hand`).
//! * `CloseToPose` — instant check that the robot is within `threshold` of
//!   `position`.
//! * `DetectObject` — instant perception: reports the object pose in the
//!   result args (`pose`).
//! * `Fetch` — grasp chart: arm to pre-grasp, then close the hand; stopping
//!   sends the arm home if nothing is grasped.
//! * `PlaceObject` — releases a held object where the robot stands.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use ticktree::{EngineError, LeafRole, NodeRegistry, Pose};

use crate::chart::{Args, SkillStateChart, StateDef, StepResult, Terminal};
use crate::client::{RemoteAction, RemoteCondition};
use crate::engine::SkillEngine;
use crate::transport::{InProcTransport, SkillTransport, TcpTransport};
use crate::wire::{Op, SkillMessage};
use crate::world::{ArmState, SimWorld};

/// The Fig.-style fetch tree (find, approach, grasp, deliver).
pub const FETCH_XML: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../trees/fetch.xml"));

/// Fetch tree extended with the place step that empties the hand at the
/// counter; `simulate-fetch` runs this one.
pub const MISSION_XML: &str = include_str!(concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../trees/fetch_mission.xml"
));

const BASE_STEP: f64 = 0.25;
const ARRIVE_EPS: f64 = 0.05;
const GRASP_RANGE: f64 = 0.5;

fn parse_pose(args: &Args, key: &str) -> Option<Pose> {
    let raw = args.get(key)?;
    match ticktree::BbValue::parse(raw) {
        ticktree::BbValue::Pose(p) => Some(p),
        _ => None,
    }
}

fn goto_pose_chart() -> SkillStateChart {
    SkillStateChart::new("GotoPose", "navigate")
        .state(
            "navigate",
            StateDef::active(|world: &mut SimWorld, args, _step, _out| {
                if !world.nav_ok {
                    return StepResult::Failed;
                }
                let Some(target) = parse_pose(args, "target") else {
                    return StepResult::Failed;
                };
                if world.robot.distance_to(&target) <= ARRIVE_EPS {
                    world.robot = Pose::new(world.robot.x, world.robot.y, target.theta).unwrap();
                    return StepResult::Complete;
                }
                world.step_toward(target, BASE_STEP);
                StepResult::Again
            })
            .complete_to("succeeded")
            .fail_to("failed")
            .stop_to("halted"),
        )
        .state("succeeded", StateDef::terminal(Terminal::Success))
        .state("failed", StateDef::terminal(Terminal::Failure))
        .state("halted", StateDef::terminal(Terminal::Stopped))
}

fn object_grasped_chart() -> SkillStateChart {
    SkillStateChart::new("ObjectGrasped", "check")
        .state(
            "check",
            StateDef::active(|world: &mut SimWorld, _args, _step, _out| {
                if world.holding {
                    StepResult::Complete
                } else {
                    StepResult::Failed
                }
            })
            .complete_to("succeeded")
            .fail_to("failed")
            .stop_to("halted"),
        )
        .state("succeeded", StateDef::terminal(Terminal::Success))
        .state("failed", StateDef::terminal(Terminal::Failure))
        .state("halted", StateDef::terminal(Terminal::Stopped))
}

fn close_to_pose_chart() -> SkillStateChart {
    SkillStateChart::new("CloseToPose", "check")
        .state(
            "check",
            StateDef::active(|world: &mut SimWorld, args, _step, _out| {
                let Some(position) = parse_pose(args, "position") else {
                    return StepResult::Failed;
                };
                let threshold: f64 = args
                    .get("threshold")
                    .and_then(|t| t.parse().ok())
                    .unwrap_or(0.1);
                if world.robot.distance_to(&position) < threshold {
                    StepResult::Complete
                } else {
                    StepResult::Failed
                }
            })
            .complete_to("succeeded")
            .fail_to("failed")
            .stop_to("halted"),
        )
        .state("succeeded", StateDef::terminal(Terminal::Success))
        .state("failed", StateDef::terminal(Terminal::Failure))
        .state("halted", StateDef::terminal(Terminal::Stopped))
}

fn detect_object_chart() -> SkillStateChart {
    SkillStateChart::new("DetectObject", "sense")
        .state(
            "sense",
            StateDef::active(|world: &mut SimWorld, _args, _step, out: &mut Args| {
                out.insert("pose".to_string(), world.object.to_string());
                StepResult::Complete
            })
            .complete_to("succeeded")
            .fail_to("failed")
            .stop_to("halted"),
        )
        .state("succeeded", StateDef::terminal(Terminal::Success))
        .state("failed", StateDef::terminal(Terminal::Failure))
        .state("halted", StateDef::terminal(Terminal::Stopped))
}

fn fetch_chart() -> SkillStateChart {
    SkillStateChart::new("Fetch", "pregrasp")
        .state(
            "pregrasp",
            StateDef::active(|world: &mut SimWorld, _args, step, _out| {
                if step >= 1 {
                    world.arm = ArmState::Pregrasp;
                    StepResult::Complete
                } else {
                    StepResult::Again
                }
            })
            .complete_to("close_hand")
            .fail_to("failed")
            .stop_to("home"),
        )
        .state(
            "close_hand",
            StateDef::active(|world: &mut SimWorld, _args, _step, _out| {
                if world.robot.distance_to(&world.object) <= GRASP_RANGE && !world.holding {
                    world.hand_open = false;
                    world.holding = true;
                    world.object = world.robot;
                    StepResult::Complete
                } else {
                    // nothing in reach: reopen and give up
                    world.hand_open = true;
                    world.arm = ArmState::Home;
                    StepResult::Failed
                }
            })
            .complete_to("succeeded")
            .fail_to("failed")
            .stop_to("home"),
        )
        .state(
            "home",
            // the stop path: arm to home if nothing was grasped
            StateDef::active(|world: &mut SimWorld, _args, _step, _out| {
                if !world.holding {
                    world.arm = ArmState::Home;
                }
                StepResult::Complete
            })
            .complete_to("halted")
            .stop_to("halted"),
        )
        .state("succeeded", StateDef::terminal(Terminal::Success))
        .state("failed", StateDef::terminal(Terminal::Failure))
        .state("halted", StateDef::terminal(Terminal::Stopped))
}

fn place_object_chart() -> SkillStateChart {
    SkillStateChart::new("PlaceObject", "place")
        .state(
            "place",
            StateDef::active(|world: &mut SimWorld, _args, _step, _out| {
                if world.holding {
                    world.holding = false;
                    world.hand_open = true;
                    world.object = world.robot;
                    world.arm = ArmState::Home;
                    StepResult::Complete
                } else {
                    StepResult::Failed
                }
            })
            .complete_to("succeeded")
            .fail_to("failed")
            .stop_to("halted"),
        )
        .state("succeeded", StateDef::terminal(Terminal::Success))
        .state("failed", StateDef::terminal(Terminal::Failure))
        .state("halted", StateDef::terminal(Terminal::Stopped))
}

/// Every chart the simulated server ships.
pub fn standard_charts() -> Vec<SkillStateChart> {
    vec![
        goto_pose_chart(),
        object_grasped_chart(),
        close_to_pose_chart(),
        detect_object_chart(),
        fetch_chart(),
        place_object_chart(),
    ]
}

/// Engine over the default fetch world with the standard charts.
pub fn fetch_engine() -> SkillEngine {
    SkillEngine::new(SimWorld::fetch_default(), standard_charts())
}

/// How remote leaves reach the skill server.
#[derive(Clone)]
pub enum SkillEndpoint {
    /// Shared in-process engine (deterministic; the default).
    InProc(Arc<Mutex<SkillEngine>>),
    /// External socket server.
    Tcp(String),
}

impl SkillEndpoint {
    fn transport(&self, client: u64) -> Box<dyn SkillTransport> {
        match self {
            SkillEndpoint::InProc(engine) => {
                Box::new(InProcTransport::new(Arc::clone(engine), client))
            }
            SkillEndpoint::Tcp(addr) => Box::new(TcpTransport::new(addr.clone())),
        }
    }
}

/// Registry with the builtins plus a remote factory that wires any
/// `skill="..."` leaf to the endpoint. Each leaf gets its own client id
/// (its own connection in TCP mode).
pub fn skill_registry(endpoint: SkillEndpoint) -> NodeRegistry {
    let mut registry = NodeRegistry::with_builtins();
    let next_client = AtomicU64::new(1);
    registry.set_remote_factory(move |spec| {
        let skill = spec.skill.ok_or_else(|| {
            EngineError::UnregisteredLeaf(spec.name.to_string())
        })?;
        let client = next_client.fetch_add(1, Ordering::Relaxed);
        let transport = endpoint.transport(client);
        Ok(match spec.role {
            LeafRole::Action => Box::new(RemoteAction::new(skill, transport)),
            LeafRole::Condition => Box::new(RemoteCondition::new(skill, transport)),
        })
    });
    registry
}

/// Checks the mission goal through the protocol only: the robot is near the
/// counter and holds nothing. The BT side never reads the world directly.
pub fn goal_reached(endpoint: &SkillEndpoint, counter: Pose) -> Result<bool, EngineError> {
    let mut transport = endpoint.transport(u64::MAX); // scenario probe client
    let mut ask = |id: u64, skill: &str, args: BTreeMap<String, String>| {
        let msg = SkillMessage::request(id, Op::Start, skill, args);
        transport
            .request(&msg, Duration::from_millis(1000))
            .map_err(|e| EngineError::SkillConnection {
                path: "goal-check".to_string(),
                message: e.to_string(),
            })
    };
    let mut args = BTreeMap::new();
    args.insert("position".to_string(), counter.to_string());
    args.insert("threshold".to_string(), "0.3".to_string());
    let near = ask(1, "CloseToPose", args)?;
    let mut hand = BTreeMap::new();
    hand.insert("hand".to_string(), "left".to_string());
    let grasped = ask(2, "ObjectGrasped", hand)?;
    Ok(near.payload == "success" && grasped.payload == "failure")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_shipped_charts_are_preemptable() {
        for chart in standard_charts() {
            chart.check_preemptable().unwrap();
        }
    }

    #[test]
    fn fetch_chart_grasps_within_range() {
        let mut engine = fetch_engine();
        engine.world_mut().robot = Pose::new(1.9, 0.0, 0.0).unwrap();
        let msg = SkillMessage::request(
            1,
            Op::Start,
            "Fetch",
            BTreeMap::from([("hand".to_string(), "left".to_string())]),
        );
        let response = engine.handle(7, &msg, false);
        assert_eq!(response.op, Op::Ack, "pregrasp takes more than one step");
        // step until the chart reaches a terminal state
        for _ in 0..8 {
            engine.step_all();
        }
        let status = SkillMessage::request(2, Op::Status, "Fetch", BTreeMap::new());
        let response = engine.handle(7, &status, false);
        assert_eq!(response.op, Op::Result);
        assert_eq!(response.payload, "success");
        assert!(engine.world().holding);
        assert!(!engine.world().hand_open);
    }

    #[test]
    fn goto_pose_fails_without_navigation() {
        let mut engine = fetch_engine();
        engine.world_mut().nav_ok = false;
        let mut args = BTreeMap::new();
        args.insert("target".to_string(), "2 0 0".to_string());
        let msg = SkillMessage::request(1, Op::Start, "GotoPose", args);
        let response = engine.handle(1, &msg, false);
        assert_eq!(response.op, Op::Result);
        assert_eq!(response.payload, "failure");
    }

    #[test]
    fn object_grasped_reports_world_state() {
        let mut engine = fetch_engine();
        let args = BTreeMap::from([("hand".to_string(), "left".to_string())]);
        let msg = SkillMessage::request(1, Op::Start, "ObjectGrasped", args.clone());
        assert_eq!(engine.handle(1, &msg, false).payload, "failure");
        engine.world_mut().hand_open = false;
        engine.world_mut().holding = true;
        let msg = SkillMessage::request(2, Op::Start, "ObjectGrasped", args);
        assert_eq!(engine.handle(1, &msg, false).payload, "success");
    }

    #[test]
    fn close_to_pose_threshold_is_strict() {
        let mut engine = fetch_engine();
        engine.world_mut().robot = Pose::new(0.0, 1.95, 0.0).unwrap();
        let counter = engine.world().counter;
        let mut args = BTreeMap::new();
        args.insert("position".to_string(), counter.to_string());
        args.insert("threshold".to_string(), "0.1".to_string());
        let msg = SkillMessage::request(1, Op::Start, "CloseToPose", args.clone());
        assert_eq!(engine.handle(1, &msg, false).payload, "success");
        engine.world_mut().robot = Pose::new(0.0, 1.85, 0.0).unwrap();
        let msg = SkillMessage::request(2, Op::Start, "CloseToPose", args);
        assert_eq!(engine.handle(1, &msg, false).payload, "failure");
    }

    #[test]
    fn stop_during_pregrasp_sends_arm_home() {
        let mut engine = fetch_engine();
        // too far to grasp, but stop during pregrasp before that matters
        let msg = SkillMessage::request(
            1,
            Op::Start,
            "Fetch",
            BTreeMap::from([("hand".to_string(), "left".to_string())]),
        );
        let response = engine.handle(3, &msg, false);
        assert_eq!(response.op, Op::Ack);
        let stop = SkillMessage::request(2, Op::Stop, "Fetch", BTreeMap::new());
        let response = engine.handle(3, &stop, false);
        assert_eq!(response.op, Op::Ack);
        assert_eq!(engine.world().arm, ArmState::Home);
        assert_eq!(engine.active_episodes(), 0);
        assert_eq!(engine.violations, 0);
    }
}
