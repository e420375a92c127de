//! Tick loop, reports, golden traces, and determinism.

use std::sync::Arc;

use ticktree::testkit::{build, TestNode};
use ticktree::NodeStatus::{Failure, Running, Success};
use ticktree::{runtime, Clock, EngineError, FnCondition, NodeStatus, RunConfig, VecSink};

fn scripted_run(
    spec: impl Fn() -> TestNode,
    cfg: RunConfig,
) -> (runtime::RunReport, Arc<VecSink>) {
    let sink = VecSink::new();
    let cfg = RunConfig {
        sink: sink.clone() as Arc<dyn ticktree::TraceSink>,
        ..cfg
    };
    let (mut tree, _) = build(spec());
    let report = runtime::run(&mut tree, &cfg).unwrap();
    (report, sink)
}

#[test]
fn single_true_condition_succeeds_in_one_tick() {
    let (mut tree, _) = build(TestNode::Condition(Box::new(FnCondition::new(|_| Ok(true)))));
    let report = runtime::run(&mut tree, &RunConfig::default()).unwrap();
    assert_eq!(report.final_status, Success);
    assert_eq!(report.ticks, 1);
}

#[test]
fn run_stops_at_first_terminal_status() {
    // Running for 5 ticks, then Success: 6 ticks total at 10 Hz simulated
    let (report, _) = scripted_run(
        || TestNode::scripted(&[Running, Running, Running, Running, Running, Success]),
        RunConfig::default(),
    );
    assert_eq!(report.final_status, Success);
    assert_eq!(report.ticks, 6);
}

#[test]
fn max_ticks_caps_the_run_and_halts_the_tree() {
    let sink = VecSink::new();
    let cfg = RunConfig {
        max_ticks: Some(3),
        sink: sink.clone(),
        ..RunConfig::default()
    };
    let (mut tree, handles) = build(TestNode::Sequence(vec![TestNode::scripted(&[Running])]));
    let report = runtime::run(&mut tree, &cfg).unwrap();
    assert_eq!(report.ticks, 3);
    assert_eq!(report.final_status, Running);
    assert!(!tree.any_running(), "tree halted after the cap");
    assert_eq!(handles[0].aborts(), 1);
}

#[test]
fn zero_tick_rate_rejected() {
    let cfg = RunConfig {
        tick_hz: 0.0,
        ..RunConfig::default()
    };
    let (mut tree, _) = build(TestNode::scripted(&[Success]));
    assert!(matches!(
        runtime::run(&mut tree, &cfg),
        Err(EngineError::Config(_))
    ));
}

#[test]
fn report_counts_node_ticks() {
    let (report, _) = scripted_run(
        || {
            TestNode::Sequence(vec![
                TestNode::scripted(&[Success, Success]),
                TestNode::scripted(&[Running, Success]),
            ])
        },
        RunConfig::default(),
    );
    assert_eq!(
        report.node_ticks,
        vec![
            ("root".to_string(), 2),
            ("root/0".to_string(), 2),
            ("root/1".to_string(), 2),
        ]
    );
}

#[test]
fn golden_trace_single_tick_preorder() {
    let (_, sink) = scripted_run(
        || {
            TestNode::Sequence(vec![
                TestNode::Condition(Box::new(FnCondition::new(|_| Ok(true)))),
                TestNode::Condition(Box::new(FnCondition::new(|_| Ok(true)))),
            ])
        },
        RunConfig::default(),
    );
    assert_eq!(
        sink.render(),
        "1,root,TICK,Success\n\
         1,root/0,TICK,Success\n\
         1,root/1,TICK,Success\n\
         1,root/0,STATUS_CHANGE,Idle\n\
         1,root/1,STATUS_CHANGE,Idle\n"
    );
}

#[test]
fn golden_trace_halt_propagation() {
    // cap at 1 tick so the run halts a Running parallel; halts are
    // deepest-first, right-to-left
    let (_, sink) = scripted_run(
        || {
            TestNode::Parallel(
                2,
                vec![
                    TestNode::scripted(&[Running]),
                    TestNode::scripted(&[Running]),
                ],
            )
        },
        RunConfig {
            max_ticks: Some(1),
            ..RunConfig::default()
        },
    );
    assert_eq!(
        sink.render(),
        "1,root,TICK,Running\n\
         1,root/0,TICK,Running\n\
         1,root/1,TICK,Running\n\
         1,root/1,HALT,Idle\n\
         1,root/0,HALT,Idle\n\
         1,root,HALT,Idle\n"
    );
}

#[test]
fn identical_runs_produce_identical_traces() {
    let spec = || {
        TestNode::Fallback(vec![
            TestNode::scripted(&[Failure, Failure, Success]),
            TestNode::scripted(&[Running, Running, Running]),
        ])
    };
    let (_, sink_a) = scripted_run(spec, RunConfig::default());
    let (_, sink_b) = scripted_run(spec, RunConfig::default());
    assert_eq!(sink_a.render(), sink_b.render());
    assert!(!sink_a.render().is_empty());
}

#[test]
fn root_status_sequence_is_rate_independent_for_scripted_leaves() {
    let script = [Running, Running, Failure, Running, Success];
    let collect = |hz: f64| -> Vec<NodeStatus> {
        let (mut tree, _) = build(TestNode::scripted(&script));
        let cfg = RunConfig {
            tick_hz: hz,
            max_ticks: Some(5),
            loop_forever: true,
            ..RunConfig::default()
        };
        let mut out = Vec::new();
        let mut ctx = cfg.context();
        for _ in 0..5 {
            out.push(runtime::step(&mut tree, &mut ctx).unwrap());
            cfg.clock.pace(cfg.period(), std::time::Duration::ZERO);
        }
        out
    };
    assert_eq!(collect(10.0), collect(100.0));
}

#[test]
fn loop_mode_keeps_ticking_after_terminal() {
    let (report, _) = scripted_run(
        || TestNode::scripted(&[Success]),
        RunConfig {
            loop_forever: true,
            max_ticks: Some(4),
            ..RunConfig::default()
        },
    );
    assert_eq!(report.ticks, 4);
}

#[test]
fn report_renders_as_stable_key_value_block() {
    let (report, _) = scripted_run(|| TestNode::scripted(&[Success]), RunConfig::default());
    let rendered = report.to_string();
    assert!(rendered.starts_with("final_status: Success\nticks: 1\n"));
    assert!(rendered.contains("deadline_misses: 0\n"));
    assert!(rendered.contains("unhealthy: -\n"));
    assert!(rendered.contains("node_ticks:\n  root: 1\n"));
}
