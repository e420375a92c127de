//! Leaf registry: maps leaf names used in tree files to constructors.
//!
//! A leaf element that carries a `skill` attribute is routed to the remote
//! factory instead (installed by the skill layer); everything else must be
//! registered by name here.

use std::collections::HashMap;

use crate::blackboard::{BbValue, PortDirection, PortMap};
use crate::error::EngineError;
use crate::leaf::{FnCondition, Leaf, StepOutcome, SyncAction};
use crate::status::NodeStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafRole {
    Action,
    Condition,
}

/// Declared port of a registered leaf.
#[derive(Debug, Clone)]
pub struct PortDecl {
    pub name: String,
    pub direction: PortDirection,
}

impl PortDecl {
    pub fn input(name: &str) -> PortDecl {
        PortDecl {
            name: name.to_string(),
            direction: PortDirection::In,
        }
    }

    pub fn output(name: &str) -> PortDecl {
        PortDecl {
            name: name.to_string(),
            direction: PortDirection::Out,
        }
    }
}

/// What a factory sees when a leaf is instantiated.
pub struct LeafSpec<'a> {
    pub name: &'a str,
    pub skill: Option<&'a str>,
    pub role: LeafRole,
    pub ports: &'a PortMap,
}

type Factory = Box<dyn Fn(&LeafSpec) -> Result<Box<dyn Leaf>, EngineError>>;
type RemoteFactory = Box<dyn Fn(&LeafSpec) -> Result<Box<dyn Leaf>, EngineError>>;

pub struct LeafEntry {
    pub role: LeafRole,
    pub ports: Vec<PortDecl>,
    factory: Factory,
}

/// Name → leaf constructor, with declared port lists.
pub struct NodeRegistry {
    entries: HashMap<String, LeafEntry>,
    remote: Option<RemoteFactory>,
}

impl NodeRegistry {
    pub fn empty() -> NodeRegistry {
        NodeRegistry {
            entries: HashMap::new(),
            remote: None,
        }
    }

    /// Registry with the built-in leaves used by tests and by the memory
    /// expansion: AlwaysSuccess, AlwaysFailure, IntAbove, SetInt, InitInt.
    pub fn with_builtins() -> NodeRegistry {
        let mut reg = NodeRegistry::empty();
        reg.register_condition("AlwaysSuccess", vec![], |_| {
            Ok(Box::new(FnCondition::new(|_ctx| Ok(true))))
        });
        reg.register_condition("AlwaysFailure", vec![], |_| {
            Ok(Box::new(FnCondition::new(|_ctx| Ok(false))))
        });
        // Success iff the int at the named key is greater than `than`.
        // The key name is passed as a literal; a missing entry is a
        // predicate error, so expansions seed it with InitInt first.
        reg.register_condition(
            "IntAbove",
            vec![PortDecl::input("key"), PortDecl::input("than")],
            |_| {
                Ok(Box::new(FnCondition::new(|ctx: &crate::leaf::LeafCtx| {
                    let key = ctx.in_value("key")?.to_wire();
                    let than = ctx.in_value("than")?.as_int()?;
                    let value = ctx.bb_get(&key).map_err(|_| EngineError::Predicate {
                        path: ctx.path().to_string(),
                        message: format!("key {key:?} unavailable"),
                    })?;
                    Ok(value.as_int()? > than)
                })))
            },
        );
        reg.register_action(
            "SetInt",
            vec![PortDecl::input("key"), PortDecl::input("value")],
            |_| {
                Ok(Box::new(SyncAction::new(1, |ctx: &mut crate::leaf::LeafCtx, _| {
                    let key = ctx.in_value("key")?.to_wire();
                    let value = ctx.in_value("value")?.as_int()?;
                    ctx.bb_set(&key, BbValue::Int(value));
                    Ok(StepOutcome::Done(NodeStatus::Success))
                })))
            },
        );
        // writes only when the key is absent; used to seed expansion indices
        reg.register_action(
            "InitInt",
            vec![PortDecl::input("key"), PortDecl::input("value")],
            |_| {
                Ok(Box::new(SyncAction::new(1, |ctx: &mut crate::leaf::LeafCtx, _| {
                    let key = ctx.in_value("key")?.to_wire();
                    if !ctx.scope().contains(&key) {
                        let value = ctx.in_value("value")?.as_int()?;
                        ctx.bb_set(&key, BbValue::Int(value));
                    }
                    Ok(StepOutcome::Done(NodeStatus::Success))
                })))
            },
        );
        reg
    }

    pub fn register(
        &mut self,
        name: &str,
        role: LeafRole,
        ports: Vec<PortDecl>,
        factory: impl Fn(&LeafSpec) -> Result<Box<dyn Leaf>, EngineError> + 'static,
    ) {
        self.entries.insert(
            name.to_string(),
            LeafEntry {
                role,
                ports,
                factory: Box::new(factory),
            },
        );
    }

    pub fn register_action(
        &mut self,
        name: &str,
        ports: Vec<PortDecl>,
        factory: impl Fn(&LeafSpec) -> Result<Box<dyn Leaf>, EngineError> + 'static,
    ) {
        self.register(name, LeafRole::Action, ports, factory);
    }

    pub fn register_condition(
        &mut self,
        name: &str,
        ports: Vec<PortDecl>,
        factory: impl Fn(&LeafSpec) -> Result<Box<dyn Leaf>, EngineError> + 'static,
    ) {
        self.register(name, LeafRole::Condition, ports, factory);
    }

    /// Installs the constructor used for leaves that name a remote skill.
    pub fn set_remote_factory(
        &mut self,
        factory: impl Fn(&LeafSpec) -> Result<Box<dyn Leaf>, EngineError> + 'static,
    ) {
        self.remote = Some(Box::new(factory));
    }

    pub fn entry(&self, name: &str) -> Option<&LeafEntry> {
        self.entries.get(name)
    }

    pub fn has_remote_factory(&self) -> bool {
        self.remote.is_some()
    }

    /// Builds the leaf for a spec: the remote factory when a skill is named,
    /// otherwise the registered entry (role-checked).
    pub fn build(&self, spec: &LeafSpec) -> Result<Box<dyn Leaf>, EngineError> {
        if spec.skill.is_some() {
            let remote = self.remote.as_ref().ok_or_else(|| {
                EngineError::UnregisteredLeaf(format!(
                    "{} (names a skill but no remote factory is configured)",
                    spec.name
                ))
            })?;
            return remote(spec);
        }
        let entry = self
            .entries
            .get(spec.name)
            .ok_or_else(|| EngineError::UnregisteredLeaf(spec.name.to_string()))?;
        if entry.role != spec.role {
            return Err(EngineError::PortMismatch {
                leaf: spec.name.to_string(),
                message: format!(
                    "registered as {:?} but used as {:?}",
                    entry.role, spec.role
                ),
            });
        }
        (entry.factory)(spec)
    }
}
