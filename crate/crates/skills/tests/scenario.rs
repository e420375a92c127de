//! The fetch scenario end-to-end against the in-process engine.

use std::sync::{Arc, Mutex};

use ticktree::trace::TraceKind;
use ticktree::{runtime, treefile, NodeStatus, RunConfig, Scope, VecSink};
use ticktree_skills::fetch::{self, fetch_engine, skill_registry, SkillEndpoint};
use ticktree_skills::goal_reached;

fn mission_setup() -> (
    Arc<Mutex<ticktree_skills::SkillEngine>>,
    SkillEndpoint,
    ticktree::Tree,
) {
    let engine = Arc::new(Mutex::new(fetch_engine()));
    let endpoint = SkillEndpoint::InProc(Arc::clone(&engine));
    let registry = skill_registry(endpoint.clone());
    let model = treefile::parse(fetch::MISSION_XML).unwrap();
    let tree = treefile::instantiate(&model, &registry, Scope::root()).unwrap();
    (engine, endpoint, tree)
}

#[test]
fn first_tick_of_the_mission_is_running() {
    let (_engine, _endpoint, mut tree) = mission_setup();
    let cfg = RunConfig::default();
    let mut ctx = cfg.context();
    assert_eq!(
        runtime::step(&mut tree, &mut ctx).unwrap(),
        NodeStatus::Running,
        "robot starts away from the object"
    );
}

#[test]
fn mission_completes_and_reaches_the_goal_state() {
    let (engine, endpoint, mut tree) = mission_setup();
    let sink = VecSink::new();
    let cfg = RunConfig {
        max_ticks: Some(200),
        sink: sink.clone(),
        ..RunConfig::default()
    };
    let report = runtime::run(&mut tree, &cfg).unwrap();
    assert_eq!(report.final_status, NodeStatus::Success);
    assert!(report.ticks < 60, "desk scale: took {} ticks", report.ticks);
    assert!(report.unhealthy.is_empty());
    let counter = engine.lock().unwrap().world().counter;
    assert!(goal_reached(&endpoint, counter).unwrap());
    assert_eq!(engine.lock().unwrap().violations, 0);
    // happy path: no preemption anywhere
    assert!(sink.events().iter().all(|e| e.kind != TraceKind::Halt));
    ticktree::testkit::check_preemption(&sink.events()).unwrap();
}

#[test]
fn navigation_failure_propagates_to_root() {
    let (engine, _endpoint, mut tree) = mission_setup();
    engine.lock().unwrap().world_mut().nav_ok = false;
    let report = runtime::run(
        &mut tree,
        &RunConfig {
            max_ticks: Some(50),
            ..RunConfig::default()
        },
    )
    .unwrap();
    assert_eq!(report.final_status, NodeStatus::Failure);
}

#[test]
fn dropping_the_object_reenters_the_grasp_branch() {
    let (engine, endpoint, mut tree) = mission_setup();
    let sink = VecSink::new();
    let cfg = RunConfig {
        max_ticks: Some(200),
        sink: sink.clone(),
        ..RunConfig::default()
    };
    let drop_at = 16u64;
    let hook_engine = Arc::clone(&engine);
    let report = runtime::run_with(&mut tree, &cfg, move |tick| {
        if tick == drop_at {
            hook_engine.lock().unwrap().world_mut().drop_object();
        }
    })
    .unwrap();
    assert_eq!(report.final_status, NodeStatus::Success);
    let events = sink.events();
    // the grasp branch went quiet, then came back after the drop
    let detect_ticks: Vec<u64> = events
        .iter()
        .filter(|e| e.kind == TraceKind::Tick && e.path.ends_with("/DetectObject"))
        .map(|e| e.tick)
        .collect();
    assert!(
        detect_ticks.iter().any(|t| *t > drop_at),
        "no re-entry into the grasp branch after tick {drop_at}: {detect_ticks:?}"
    );
    // the preempted delivery leg received a halt
    assert!(
        events
            .iter()
            .any(|e| e.kind == TraceKind::Halt && e.path.ends_with("/GotoDestination")),
        "GotoDestination was Running and must be halted on re-entry"
    );
    ticktree::testkit::check_preemption(&events).unwrap();
    let counter = engine.lock().unwrap().world().counter;
    assert!(goal_reached(&endpoint, counter).unwrap());
}

#[test]
fn scenario_trace_is_deterministic() {
    let run_once = || {
        let (_engine, _endpoint, mut tree) = mission_setup();
        let sink = VecSink::new();
        let cfg = RunConfig {
            max_ticks: Some(200),
            sink: sink.clone(),
            ..RunConfig::default()
        };
        runtime::run(&mut tree, &cfg).unwrap();
        sink.render()
    };
    let a = run_once();
    let b = run_once();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn eight_element_fetch_tree_also_instantiates_and_runs() {
    let engine = Arc::new(Mutex::new(fetch_engine()));
    let endpoint = SkillEndpoint::InProc(Arc::clone(&engine));
    let registry = skill_registry(endpoint);
    let model = treefile::parse(fetch::FETCH_XML).unwrap();
    let mut tree = treefile::instantiate(&model, &registry, Scope::root()).unwrap();
    let report = runtime::run(
        &mut tree,
        &RunConfig {
            max_ticks: Some(200),
            ..RunConfig::default()
        },
    )
    .unwrap();
    // without the place step the robot ends at the counter still holding
    assert_eq!(report.final_status, NodeStatus::Success);
    assert!(engine.lock().unwrap().world().holding);
}
