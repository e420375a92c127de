//! Composition and decorator semantics over scripted children.

use std::sync::Arc;
use std::time::Duration;

use ticktree::testkit::{build, check_preemption, TestNode};
use ticktree::trace::TraceKind;
use ticktree::NodeStatus::{Failure, Running, Success};
use ticktree::{runtime, Clock, NodeStatus, TickContext, Tree, VecSink};

fn ctx_with_sink() -> (TickContext, Arc<VecSink>) {
    let sink = VecSink::new();
    (
        TickContext::new(Clock::simulated(), sink.clone()),
        sink,
    )
}

fn tick_n(tree: &mut Tree, ctx: &mut TickContext, n: usize) -> Vec<NodeStatus> {
    (0..n)
        .map(|_| runtime::step(tree, ctx).expect("step"))
        .collect()
}

// --- Sequence -------------------------------------------------------------

#[test]
fn sequence_all_success() {
    let (mut tree, handles) = build(TestNode::Sequence(vec![
        TestNode::scripted(&[Success]),
        TestNode::scripted(&[Success]),
        TestNode::scripted(&[Success]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Success]);
    assert!(handles.iter().all(|h| h.ticks() == 1), "all three ticked");
}

#[test]
fn sequence_stops_at_running_child() {
    let (mut tree, handles) = build(TestNode::Sequence(vec![
        TestNode::scripted(&[Success]),
        TestNode::scripted(&[Running]),
        TestNode::scripted(&[Success]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Running]);
    assert_eq!(handles[2].ticks(), 0, "child 3 not ticked");
}

#[test]
fn sequence_preempts_running_child_on_earlier_failure() {
    // tick 1: [Success, Running] -> Running
    // tick 2: child 1 flips to Failure -> Failure, child 2 halted
    let (mut tree, handles) = build(TestNode::Sequence(vec![
        TestNode::scripted(&[Success, Failure]),
        TestNode::scripted(&[Running, Running]),
    ]));
    let (mut ctx, sink) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 2), vec![Running, Failure]);
    assert_eq!(handles[1].ticks(), 1, "child 2 not re-ticked at tick 2");
    assert_eq!(handles[1].aborts(), 1, "child 2 aborted exactly once");
    let events = sink.events();
    let halt = events
        .iter()
        .find(|e| e.kind == TraceKind::Halt)
        .expect("halt record");
    assert_eq!(&*halt.path, "root/1");
    assert_eq!(halt.tick, 2);
    check_preemption(&events).unwrap();
}

// --- Fallback ---------------------------------------------------------------

#[test]
fn fallback_all_failure() {
    let (mut tree, _) = build(TestNode::Fallback(vec![
        TestNode::scripted(&[Failure]),
        TestNode::scripted(&[Failure]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Failure]);
}

#[test]
fn fallback_first_success_wins() {
    let (mut tree, _) = build(TestNode::Fallback(vec![
        TestNode::scripted(&[Failure]),
        TestNode::scripted(&[Success]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Success]);
}

#[test]
fn fallback_preempts_running_child_on_earlier_success() {
    let (mut tree, handles) = build(TestNode::Fallback(vec![
        TestNode::scripted(&[Failure, Success]),
        TestNode::scripted(&[Running, Running]),
    ]));
    let (mut ctx, sink) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 2), vec![Running, Success]);
    assert_eq!(handles[1].aborts(), 1);
    check_preemption(&sink.events()).unwrap();
}

// --- Parallel ----------------------------------------------------------------

#[test]
fn parallel_success_at_exact_threshold() {
    // N=3, M=2: [Success, Success, Running] -> Success, child 3 halted
    let (mut tree, handles) = build(TestNode::Parallel(
        2,
        vec![
            TestNode::scripted(&[Success]),
            TestNode::scripted(&[Success]),
            TestNode::scripted(&[Running]),
        ],
    ));
    let (mut ctx, sink) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Success]);
    assert_eq!(handles[2].aborts(), 1, "running child halted");
    check_preemption(&sink.events()).unwrap();
}

#[test]
fn parallel_failure_when_too_many_fail() {
    // N=3, M=2: failures 2 > N - M = 1
    let (mut tree, _) = build(TestNode::Parallel(
        2,
        vec![
            TestNode::scripted(&[Failure]),
            TestNode::scripted(&[Failure]),
            TestNode::scripted(&[Running]),
        ],
    ));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Failure]);
}

#[test]
fn parallel_running_when_neither_threshold_met() {
    let (mut tree, _) = build(TestNode::Parallel(
        2,
        vec![
            TestNode::scripted(&[Success]),
            TestNode::scripted(&[Failure]),
            TestNode::scripted(&[Running]),
        ],
    ));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Running]);
}

#[test]
fn parallel_ticks_every_child_every_tick() {
    let (mut tree, handles) = build(TestNode::Parallel(
        3,
        vec![
            TestNode::scripted(&[Running, Running]),
            TestNode::scripted(&[Running, Running]),
            TestNode::scripted(&[Running, Running]),
        ],
    ));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 2), vec![Running, Running]);
    assert!(handles.iter().all(|h| h.ticks() == 2));
}

// --- Sequence with memory ---------------------------------------------------

#[test]
fn sequence_memory_waits_on_running_child() {
    let (mut tree, handles) = build(TestNode::SequenceMemory(vec![
        TestNode::scripted(&[Running]),
        TestNode::scripted(&[Success]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Running]);
    assert_eq!(handles[1].ticks(), 0, "index stays at child 1");
}

#[test]
fn sequence_memory_continues_within_one_tick() {
    // both children succeed in the same tick call; index resets
    let (mut tree, handles) = build(TestNode::SequenceMemory(vec![
        TestNode::scripted(&[Success, Success]),
        TestNode::scripted(&[Success, Success]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Success]);
    assert_eq!(handles[0].ticks(), 1);
    assert_eq!(handles[1].ticks(), 1);
    // index was reset: the next episode starts at child 1 again
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Success]);
    assert_eq!(handles[0].ticks(), 2);
}

#[test]
fn sequence_memory_failure_resets_index() {
    // child 1 succeeds (index -> 2); later child 2 fails -> Failure, reset;
    // the next tick starts at child 1 again
    let (mut tree, handles) = build(TestNode::SequenceMemory(vec![
        TestNode::scripted(&[Success, Success, Running]),
        TestNode::scripted(&[Running, Failure, Running]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(
        tick_n(&mut tree, &mut ctx, 3),
        vec![Running, Failure, Running]
    );
    // tick 1: child1 then child2; tick 2: child2 only; tick 3: child1 only
    assert_eq!(handles[0].ticks(), 2);
    assert_eq!(handles[1].ticks(), 2);
}

#[test]
fn sequence_memory_never_reticks_done_children() {
    let (mut tree, handles) = build(TestNode::SequenceMemory(vec![
        TestNode::scripted(&[Success, Success, Success]),
        TestNode::scripted(&[Running, Running, Success]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(
        tick_n(&mut tree, &mut ctx, 3),
        vec![Running, Running, Success]
    );
    assert_eq!(handles[0].ticks(), 1, "done child never re-ticked");
}

// --- Fallback with memory -----------------------------------------------------

#[test]
fn fallback_memory_advances_past_failure_same_tick() {
    let (mut tree, _) = build(TestNode::FallbackMemory(vec![
        TestNode::scripted(&[Failure]),
        TestNode::scripted(&[Success]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Success]);
}

#[test]
fn fallback_memory_running_keeps_index() {
    let (mut tree, handles) = build(TestNode::FallbackMemory(vec![
        TestNode::scripted(&[Running]),
        TestNode::scripted(&[Success]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Running]);
    assert_eq!(handles[1].ticks(), 0);
}

#[test]
fn fallback_memory_all_failures() {
    let (mut tree, handles) = build(TestNode::FallbackMemory(vec![
        TestNode::scripted(&[Failure]),
        TestNode::scripted(&[Failure]),
        TestNode::scripted(&[Failure]),
    ]));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Failure]);
    assert!(handles.iter().all(|h| h.ticks() == 1));
}

// --- Parallel with memory ------------------------------------------------------

#[test]
fn parallel_memory_skips_done_children() {
    // N=2, M=2: tick 1 [Success, Running] -> Running, child 1 marked done;
    // tick 2 only child 2 ticked; its Success completes the node
    let (mut tree, handles) = build(TestNode::ParallelMemory(
        2,
        vec![
            TestNode::scripted(&[Success, Success]),
            TestNode::scripted(&[Running, Success]),
        ],
    ));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 2), vec![Running, Success]);
    assert_eq!(handles[0].ticks(), 1, "done child skipped on tick 2");
    assert_eq!(handles[1].ticks(), 2);
    // memory was reset on the terminal return: the next episode re-ticks
    // child 1 (scripts repeat their last entry, so both succeed at once)
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Success]);
    assert_eq!(handles[0].ticks(), 2);
}

#[test]
fn parallel_memory_failure_threshold() {
    // N=3, M=1: three failures > N - M = 2
    let (mut tree, _) = build(TestNode::ParallelMemory(
        1,
        vec![
            TestNode::scripted(&[Failure]),
            TestNode::scripted(&[Failure]),
            TestNode::scripted(&[Failure]),
        ],
    ));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 1), vec![Failure]);
}

// --- Decorators ---------------------------------------------------------------

#[test]
fn inverter_swaps_terminal_statuses() {
    let (mut tree, _) = build(TestNode::Inverter(Box::new(TestNode::scripted(&[
        Success, Failure, Running,
    ]))));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(
        tick_n(&mut tree, &mut ctx, 3),
        vec![Failure, Success, Running]
    );
}

#[test]
fn retry_reticks_failed_child() {
    // Retry(max 2): child Failure on attempt 1 -> Running;
    // child Success on attempt 2 -> Success
    let (mut tree, _) = build(TestNode::Retry(
        2,
        Box::new(TestNode::scripted(&[Failure, Success])),
    ));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 2), vec![Running, Success]);
}

#[test]
fn retry_exhaustion_fails() {
    let (mut tree, _) = build(TestNode::Retry(
        2,
        Box::new(TestNode::scripted(&[Failure, Failure])),
    ));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(tick_n(&mut tree, &mut ctx, 2), vec![Running, Failure]);
}

#[test]
fn retry_attempt_counter_is_per_episode() {
    // first episode exhausts at tick 2; second episode gets a fresh budget
    let (mut tree, _) = build(TestNode::Retry(
        2,
        Box::new(TestNode::scripted(&[Failure, Failure, Failure, Success])),
    ));
    let (mut ctx, _) = ctx_with_sink();
    assert_eq!(
        tick_n(&mut tree, &mut ctx, 4),
        vec![Running, Failure, Running, Success]
    );
}

#[test]
fn timeout_halts_overrunning_child() {
    // 100 ms budget over a child that stays Running; simulated clock
    let (mut tree, handles) = build(TestNode::Timeout(
        100,
        Box::new(TestNode::scripted(&[Running])),
    ));
    let sink = VecSink::new();
    let mut ctx = TickContext::new(Clock::simulated(), sink.clone());
    let mut statuses = Vec::new();
    for _ in 0..4 {
        statuses.push(runtime::step(&mut tree, &mut ctx).unwrap());
        ctx.clock.advance(Duration::from_millis(50));
    }
    // elapsed first exceeds 100 ms at the tick where 150 ms have passed
    assert_eq!(statuses, vec![Running, Running, Running, Failure]);
    assert_eq!(handles[0].aborts(), 1, "child halted when the budget ran out");
    assert!(sink
        .events()
        .iter()
        .any(|e| e.kind == TraceKind::Halt && &*e.path == "root/0"));
}

#[test]
fn timeout_passes_through_fast_child() {
    let (mut tree, _) = build(TestNode::Timeout(
        100,
        Box::new(TestNode::scripted(&[Running, Success])),
    ));
    let sink = VecSink::new();
    let mut ctx = TickContext::new(Clock::simulated(), sink);
    let mut statuses = Vec::new();
    for _ in 0..2 {
        statuses.push(runtime::step(&mut tree, &mut ctx).unwrap());
        ctx.clock.advance(Duration::from_millis(30));
    }
    assert_eq!(statuses, vec![Running, Success]);
}

// --- Duality (compact; the full sweep lives in the acceptance suite) -----------

#[test]
fn fallback_is_status_swapped_sequence() {
    let all = [Success, Failure, Running];
    // N = 2 children, scripts of length 2: enumerate every combination
    for a1 in all {
        for a2 in all {
            for b1 in all {
                for b2 in all {
                    let (mut seq, _) = build(TestNode::Sequence(vec![
                        TestNode::scripted(&[a1, a2]),
                        TestNode::scripted(&[b1, b2]),
                    ]));
                    let (mut fb, _) = build(TestNode::Fallback(vec![
                        TestNode::scripted(&[a1.inverted(), a2.inverted()]),
                        TestNode::scripted(&[b1.inverted(), b2.inverted()]),
                    ]));
                    let (mut ctx_a, _) = ctx_with_sink();
                    let (mut ctx_b, _) = ctx_with_sink();
                    let seq_out = tick_n(&mut seq, &mut ctx_a, 2);
                    let fb_out = tick_n(&mut fb, &mut ctx_b, 2);
                    let swapped: Vec<NodeStatus> =
                        fb_out.iter().map(|s| s.inverted()).collect();
                    assert_eq!(seq_out, swapped, "duality broke for {a1:?}{a2:?}/{b1:?}{b2:?}");
                }
            }
        }
    }
}
