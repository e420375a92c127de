//! The four-valued node status.

use std::fmt;

/// Status reported by a node.
///
/// `tick` never returns [`NodeStatus::Idle`]; `Idle` is only observable
/// through `status()` before a node's first tick, after a halt, or after a
/// parent consumed a terminal result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    Success,
    Failure,
    Running,
    Idle,
}

impl NodeStatus {
    /// True for `Success` and `Failure`.
    pub fn is_terminal(self) -> bool {
        matches!(self, NodeStatus::Success | NodeStatus::Failure)
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeStatus::Success => "Success",
            NodeStatus::Failure => "Failure",
            NodeStatus::Running => "Running",
            NodeStatus::Idle => "Idle",
        }
    }

    /// Swaps `Success` and `Failure`, leaving `Running` and `Idle` fixed.
    ///
    /// This is the duality map between Sequence and Fallback semantics.
    pub fn inverted(self) -> NodeStatus {
        match self {
            NodeStatus::Success => NodeStatus::Failure,
            NodeStatus::Failure => NodeStatus::Success,
            other => other,
        }
    }
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
