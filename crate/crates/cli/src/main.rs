//! ticktree command line: validate, run, and expand tree files, serve the
//! simulated skills, and replay the fetch scenario.
//!
//! Exit codes: 0 when the mission succeeds, 1 when it fails (or is still
//! Running at a tick cap), 2 on engine errors (bad files, wiring bugs,
//! unreachable servers).

use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use ticktree::{
    expand, runtime, treefile, Clock, NodeRegistry, NodeStatus, RunConfig, Scope, TraceSink,
    Tree, WriterSink,
};
use ticktree_skills::fetch::{self, fetch_engine, skill_registry, SkillEndpoint};
use ticktree_skills::{goal_reached, SimWorld, SkillServer};

#[derive(Parser)]
#[command(name = "ticktree", version, about = "Reactive behavior-tree engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClockMode {
    Real,
    Sim,
}

#[derive(Subcommand)]
enum Command {
    /// Check a tree file and print diagnostics.
    Validate {
        /// Tree description file.
        tree: PathBuf,
    },
    /// Run a tree file to completion.
    Run {
        tree: PathBuf,
        /// Root tick frequency in Hz.
        #[arg(long, default_value_t = 10.0)]
        tick_hz: f64,
        /// Stop after this many root ticks.
        #[arg(long)]
        max_ticks: Option<u64>,
        /// Write the execution trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Skill server address (host:port) for skill-backed leaves.
        #[arg(long)]
        endpoint: Option<String>,
        /// Keep re-ticking after a terminal root status.
        #[arg(long = "loop")]
        loop_forever: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ClockMode::Real)]
        clock: ClockMode,
        /// Print the final blackboard contents.
        #[arg(long)]
        dump_blackboard: bool,
    },
    /// Print the memoryless expansion of a tree file.
    Expand { tree: PathBuf },
    /// Serve the simulated skills over TCP.
    ServeSkills {
        #[arg(long, default_value = "127.0.0.1:7878")]
        endpoint: String,
        /// Simulate a navigation server that cannot find paths.
        #[arg(long)]
        fail_nav: bool,
    },
    /// Run the fetch use case end to end (self-contained by default).
    SimulateFetch {
        #[arg(long, default_value_t = 10.0)]
        tick_hz: f64,
        #[arg(long, default_value_t = 400)]
        max_ticks: u64,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Use an external skill server instead of the embedded one.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ClockMode::Sim)]
        clock: ClockMode,
        /// Simulate a navigation server that cannot find paths.
        #[arg(long)]
        fail_nav: bool,
        /// Drop the held object right before this root tick.
        #[arg(long)]
        drop_object_at_tick: Option<u64>,
        #[arg(long)]
        dump_blackboard: bool,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Validate { tree } => cmd_validate(&tree),
        Command::Run {
            tree,
            tick_hz,
            max_ticks,
            trace,
            endpoint,
            loop_forever,
            seed,
            clock,
            dump_blackboard,
        } => cmd_run(
            &tree,
            tick_hz,
            max_ticks,
            trace,
            endpoint,
            loop_forever,
            seed,
            clock,
            dump_blackboard,
        ),
        Command::Expand { tree } => cmd_expand(&tree),
        Command::ServeSkills { endpoint, fail_nav } => cmd_serve(&endpoint, fail_nav),
        Command::SimulateFetch {
            tick_hz,
            max_ticks,
            trace,
            endpoint,
            seed,
            clock,
            fail_nav,
            drop_object_at_tick,
            dump_blackboard,
        } => cmd_simulate_fetch(
            tick_hz,
            max_ticks,
            trace,
            endpoint,
            seed,
            clock,
            fail_nav,
            drop_object_at_tick,
            dump_blackboard,
        ),
    }
}

fn load_model(path: &PathBuf) -> anyhow::Result<treefile::TreeModel> {
    let text = fs::read_to_string(path)?;
    Ok(treefile::parse(&text)?)
}

fn cmd_validate(path: &PathBuf) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(path)?;
    let model = match treefile::parse(&text) {
        Ok(model) => model,
        Err(err) => {
            println!("error: {err}");
            return Ok(ExitCode::from(1));
        }
    };
    let diags = treefile::validate(&model);
    for d in &diags {
        println!("{d}");
    }
    let has_errors = diags
        .iter()
        .any(|d| d.severity == treefile::Severity::Error);
    if has_errors {
        Ok(ExitCode::from(1))
    } else {
        println!("ok: {} tree(s), main {:?}", model.trees.len(), model.main);
        Ok(ExitCode::SUCCESS)
    }
}

fn make_sink(trace: Option<&PathBuf>) -> anyhow::Result<Arc<dyn TraceSink>> {
    Ok(match trace {
        Some(path) => {
            let file = fs::File::create(path)?;
            Arc::new(WriterSink::new(BufWriter::new(file)))
        }
        None => Arc::new(ticktree::NullSink),
    })
}

fn make_clock(mode: ClockMode) -> Clock {
    match mode {
        ClockMode::Real => Clock::real(),
        ClockMode::Sim => Clock::simulated(),
    }
}

fn exit_for(status: NodeStatus) -> ExitCode {
    if status == NodeStatus::Success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn finish_run(
    tree: &Tree,
    report: &runtime::RunReport,
    sink: &Arc<dyn TraceSink>,
    dump_blackboard: bool,
) -> anyhow::Result<()> {
    print!("{report}");
    if dump_blackboard {
        print!("{}", tree.dump_blackboard());
    }
    sink.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    path: &PathBuf,
    tick_hz: f64,
    max_ticks: Option<u64>,
    trace: Option<PathBuf>,
    endpoint: Option<String>,
    loop_forever: bool,
    seed: u64,
    clock: ClockMode,
    dump_blackboard: bool,
) -> anyhow::Result<ExitCode> {
    let model = load_model(path)?;
    let registry = match &endpoint {
        Some(addr) => {
            probe_endpoint(addr)?;
            skill_registry(SkillEndpoint::Tcp(addr.clone()))
        }
        None => NodeRegistry::with_builtins(),
    };
    let mut tree = treefile::instantiate(&model, &registry, Scope::root())?;
    let sink = make_sink(trace.as_ref())?;
    let cfg = RunConfig {
        tick_hz,
        max_ticks,
        loop_forever,
        seed,
        clock: make_clock(clock),
        sink: Arc::clone(&sink),
        ..RunConfig::default()
    };
    let report = runtime::run(&mut tree, &cfg)?;
    finish_run(&tree, &report, &sink, dump_blackboard)?;
    Ok(exit_for(report.final_status))
}

/// Fails fast (exit 2) when the skill server is unreachable.
fn probe_endpoint(addr: &str) -> anyhow::Result<()> {
    std::net::TcpStream::connect_timeout(
        &addr
            .parse()
            .map_err(|e| anyhow::anyhow!("bad endpoint {addr:?}: {e}"))?,
        Duration::from_millis(2000),
    )
    .map_err(|e| anyhow::anyhow!("cannot reach skill server at {addr}: {e}"))?;
    Ok(())
}

fn cmd_expand(path: &PathBuf) -> anyhow::Result<ExitCode> {
    let model = load_model(path)?;
    let expanded = expand::expand_memory_nodes(&model)?;
    print!("{}", treefile::serialize(&expanded));
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(endpoint: &str, fail_nav: bool) -> anyhow::Result<ExitCode> {
    let mut engine = fetch_engine();
    engine.world_mut().nav_ok = !fail_nav;
    let server = SkillServer::start(endpoint, engine)?;
    println!("serving skills on {}", server.addr());
    server.join();
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate_fetch(
    tick_hz: f64,
    max_ticks: u64,
    trace: Option<PathBuf>,
    endpoint: Option<String>,
    seed: u64,
    clock: ClockMode,
    fail_nav: bool,
    drop_object_at_tick: Option<u64>,
    dump_blackboard: bool,
) -> anyhow::Result<ExitCode> {
    let embedded = match &endpoint {
        None => Some(Arc::new(Mutex::new(fetch_engine()))),
        Some(addr) => {
            if fail_nav || drop_object_at_tick.is_some() {
                anyhow::bail!(
                    "fault flags need the embedded server; start the external \
                     one with `serve-skills --fail-nav` instead"
                );
            }
            probe_endpoint(addr)?;
            None
        }
    };
    if let (Some(engine), true) = (&embedded, fail_nav) {
        engine.lock().unwrap().world_mut().nav_ok = false;
    }
    let skill_endpoint = match (&embedded, &endpoint) {
        (Some(engine), _) => SkillEndpoint::InProc(Arc::clone(engine)),
        (None, Some(addr)) => SkillEndpoint::Tcp(addr.clone()),
        (None, None) => unreachable!(),
    };
    let registry = skill_registry(skill_endpoint.clone());
    let model = treefile::parse(fetch::MISSION_XML)?;
    let mut tree = treefile::instantiate(&model, &registry, Scope::root())?;
    let sink = make_sink(trace.as_ref())?;
    let cfg = RunConfig {
        tick_hz,
        max_ticks: Some(max_ticks),
        seed,
        clock: make_clock(clock),
        sink: Arc::clone(&sink),
        ..RunConfig::default()
    };
    let hook_engine = embedded.clone();
    let report = runtime::run_with(&mut tree, &cfg, move |tick| {
        if let (Some(engine), Some(at)) = (&hook_engine, drop_object_at_tick) {
            if tick == at {
                engine.lock().unwrap().world_mut().drop_object();
            }
        }
    })?;
    finish_run(&tree, &report, &sink, dump_blackboard)?;
    let goal = goal_reached(&skill_endpoint, SimWorld::fetch_default().counter)?;
    println!("goal_reached: {goal}");
    if report.final_status == NodeStatus::Success && goal {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
