//! Engine-level errors.
//!
//! Engine errors abort a run with diagnostics; they are deliberately distinct
//! from a node returning `Failure`, which is an ordinary runtime outcome.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    /// A required port binding could not be resolved. Wiring bugs surface as
    /// engine errors, never as node Failure.
    #[error("port resolution failed at {path}: {message}")]
    PortResolution { path: String, message: String },

    /// Blackboard lookup miss.
    #[error("blackboard key not found: {0}")]
    KeyNotFound(String),

    /// A literal port value or wire payload could not be parsed as the
    /// requested type.
    #[error("cannot parse {input:?} as {wanted}")]
    ParseValue { input: String, wanted: &'static str },

    /// Two remap entries share the same child-side key.
    #[error("duplicate remap key {0:?}")]
    DuplicateRemapKey(String),

    /// A leaf's abort routine did not complete within the halt timeout.
    #[error("halt timeout after {timeout_ms} ms at {path}")]
    HaltTimeout { path: String, timeout_ms: u64 },

    /// A condition predicate's inputs were unavailable.
    #[error("predicate error at {path}: {message}")]
    Predicate { path: String, message: String },

    /// A leaf kind used by the model is not in the registry.
    #[error("unregistered leaf {0:?}")]
    UnregisteredLeaf(String),

    /// A model port binding does not match the registered port list.
    #[error("port mismatch for leaf {leaf:?}: {message}")]
    PortMismatch { leaf: String, message: String },

    /// Memory-parallel nodes have no memoryless expansion.
    #[error("expansion unsupported for {0}")]
    ExpansionUnsupported(&'static str),

    /// Invalid run configuration.
    #[error("invalid run config: {0}")]
    Config(String),

    /// The model failed validation; diagnostics carried alongside.
    #[error("model validation failed: {0}")]
    Validation(String),

    /// Trace sink I/O failure aborts the run.
    #[error("trace sink error: {0}")]
    TraceIo(#[from] std::io::Error),

    /// Remote skill transport failure.
    #[error("skill connection at {path}: {message}")]
    SkillConnection { path: String, message: String },
}
