//! ticktree — a reactive behavior-tree execution engine.
//!
//! The engine drives a tree of composition nodes (Sequence, Fallback,
//! Parallel, and their memory variants), decorators (Inverter, Retry,
//! Timeout), and leaves (conditions plus three action execution models) by
//! propagating ticks from the root at a configured rate. Running children
//! can be preempted safely: a node that stops receiving ticks gets halted,
//! blocking until its abort routine finishes.
//!
//! Leaves exchange data through a scoped blackboard with remapping at
//! subtree boundaries, trees are described in an XML file format
//! (`treefile`), and every run can emit a deterministic execution trace.
//!
//! ```
//! use ticktree::treefile;
//! use ticktree::{NodeRegistry, RunConfig, Scope};
//!
//! let model = treefile::parse(r#"
//!     <root main="Demo">
//!       <tree name="Demo">
//!         <Sequence>
//!           <Condition name="AlwaysSuccess"/>
//!           <Action name="SetInt" key="n" value="3"/>
//!         </Sequence>
//!       </tree>
//!     </root>"#).unwrap();
//! let registry = NodeRegistry::with_builtins();
//! let mut tree = treefile::instantiate(&model, &registry, Scope::root()).unwrap();
//! let report = ticktree::runtime::run(&mut tree, &RunConfig::default()).unwrap();
//! assert_eq!(report.final_status, ticktree::NodeStatus::Success);
//! ```

pub mod blackboard;
pub mod clock;
pub mod compositions;
pub mod error;
pub mod expand;
pub mod leaf;
pub mod node;
pub mod registry;
pub mod runtime;
pub mod status;
pub mod testkit;
pub mod trace;
pub mod treefile;

pub use blackboard::{BbValue, PortBinding, PortDirection, PortMap, PortSource, Pose, Scope};
pub use clock::Clock;
pub use error::EngineError;
pub use leaf::{
    AsyncAction, CoBody, CoMode, CoStep, CoYieldAction, FnCondition, Leaf, LeafCtx, StepOutcome,
    SyncAction, WorkOutcome, WorkerHandle,
};
pub use node::{NodeId, NodeKind, TickContext, Tree, TreeNode};
pub use registry::{LeafRole, LeafSpec, NodeRegistry, PortDecl};
pub use runtime::{RunConfig, RunReport};
pub use status::NodeStatus;
pub use trace::{NullSink, TraceEvent, TraceKind, TraceSink, VecSink, WriterSink};
pub use treefile::{Diagnostic, Element, ElementKind, ParseError, Severity, TreeModel};
