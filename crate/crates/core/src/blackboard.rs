//! Scoped blackboard: explicit node arguments and implicit message passing.
//!
//! Scopes are isolated by default. A key resolves locally unless it appears
//! in the scope's remap table, in which case it resolves in the parent under
//! the remapped name; unmapped keys never fall through. This is what makes
//! subtrees reusable: two sibling subtrees writing the same local key cannot
//! overwrite each other.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::error::EngineError;

/// Planar pose with theta normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Result<Pose, EngineError> {
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(EngineError::ParseValue {
                input: format!("{x} {y} {theta}"),
                wanted: "finite pose",
            });
        }
        Ok(Pose {
            x,
            y,
            theta: normalize_angle(theta),
        })
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Maps any finite angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let t = PI - (PI - theta).rem_euclid(2.0 * PI);
    // rem_euclid may yield -pi for inputs like -pi - 2k*pi due to rounding
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.x, self.y, self.theta)
    }
}

/// Tagged blackboard value. Values are copied on read; nodes never alias
/// each other's data.
#[derive(Debug, Clone, PartialEq)]
pub enum BbValue {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Pose(Pose),
}

impl BbValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            BbValue::Str(_) => "string",
            BbValue::Int(_) => "int",
            BbValue::Float(_) => "float",
            BbValue::Bool(_) => "bool",
            BbValue::Pose(_) => "pose",
        }
    }

    /// Canonical string form, used on the wire and in trace payloads.
    pub fn to_wire(&self) -> String {
        match self {
            BbValue::Str(s) => s.clone(),
            BbValue::Int(i) => i.to_string(),
            BbValue::Float(x) => x.to_string(),
            BbValue::Bool(b) => b.to_string(),
            BbValue::Pose(p) => p.to_string(),
        }
    }

    /// Best-effort typed parse: int, float, bool, pose (three floats), then
    /// string. Used for literals and for values coming back off the wire.
    pub fn parse(text: &str) -> BbValue {
        if let Ok(i) = text.parse::<i64>() {
            return BbValue::Int(i);
        }
        if let Ok(x) = text.parse::<f64>() {
            if x.is_finite() {
                return BbValue::Float(x);
            }
        }
        if let Ok(b) = text.parse::<bool>() {
            return BbValue::Bool(b);
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() == 3 {
            let nums: Vec<f64> = fields.iter().filter_map(|f| f.parse().ok()).collect();
            if nums.len() == 3 {
                if let Ok(p) = Pose::new(nums[0], nums[1], nums[2]) {
                    return BbValue::Pose(p);
                }
            }
        }
        BbValue::Str(text.to_string())
    }

    pub fn as_int(&self) -> Result<i64, EngineError> {
        match self {
            BbValue::Int(i) => Ok(*i),
            other => Err(EngineError::ParseValue {
                input: other.to_wire(),
                wanted: "int",
            }),
        }
    }

    pub fn as_float(&self) -> Result<f64, EngineError> {
        match self {
            BbValue::Float(x) => Ok(*x),
            BbValue::Int(i) => Ok(*i as f64),
            other => Err(EngineError::ParseValue {
                input: other.to_wire(),
                wanted: "float",
            }),
        }
    }

    pub fn as_bool(&self) -> Result<bool, EngineError> {
        match self {
            BbValue::Bool(b) => Ok(*b),
            other => Err(EngineError::ParseValue {
                input: other.to_wire(),
                wanted: "bool",
            }),
        }
    }

    pub fn as_pose(&self) -> Result<Pose, EngineError> {
        match self {
            BbValue::Pose(p) => Ok(*p),
            BbValue::Str(s) => match BbValue::parse(s) {
                BbValue::Pose(p) => Ok(p),
                _ => Err(EngineError::ParseValue {
                    input: s.clone(),
                    wanted: "pose",
                }),
            },
            other => Err(EngineError::ParseValue {
                input: other.to_wire(),
                wanted: "pose",
            }),
        }
    }
}

/// One level of the hierarchical store.
///
/// Entry access is atomic per get/set; there are no cross-operation
/// transactions. Background action workers may hold a clone of the `Arc`.
pub struct Scope {
    path: String,
    entries: Mutex<HashMap<String, BbValue>>,
    parent: Option<Arc<Scope>>,
    remaps: HashMap<String, String>,
}

impl Scope {
    /// Root scope with no parent and no remaps.
    pub fn root() -> Arc<Scope> {
        Arc::new(Scope {
            path: "/".to_string(),
            entries: Mutex::new(HashMap::new()),
            parent: None,
            remaps: HashMap::new(),
        })
    }

    /// Fresh child scope chained to `parent` through `remaps` only.
    pub fn child(
        parent: &Arc<Scope>,
        path: impl Into<String>,
        remaps: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Arc<Scope>, EngineError> {
        let mut map = HashMap::new();
        for (inner, outer) in remaps {
            if map.insert(inner.clone(), outer).is_some() {
                return Err(EngineError::DuplicateRemapKey(inner));
            }
        }
        Ok(Arc::new(Scope {
            path: path.into(),
            entries: Mutex::new(HashMap::new()),
            parent: Some(Arc::clone(parent)),
            remaps: map,
        }))
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    /// Reads a key. Remapped keys resolve in the parent; everything else is
    /// strictly local.
    pub fn get(&self, key: &str) -> Result<BbValue, EngineError> {
        if let Some(outer) = self.remaps.get(key) {
            let parent = self.parent.as_ref().expect("remap without parent");
            return parent.get(outer);
        }
        self.entries
            .lock()
            .unwrap()
            .get(key)
            .cloned()
            .ok_or_else(|| EngineError::KeyNotFound(key.to_string()))
    }

    pub fn contains(&self, key: &str) -> bool {
        if let Some(outer) = self.remaps.get(key) {
            let parent = self.parent.as_ref().expect("remap without parent");
            return parent.contains(outer);
        }
        self.entries.lock().unwrap().contains_key(key)
    }

    /// Writes a key, following the remap chain to the owning scope. Returns
    /// the previous type name when the tag changed, so callers can surface
    /// the drift warning.
    pub fn set(&self, key: &str, value: BbValue) -> Option<&'static str> {
        if let Some(outer) = self.remaps.get(key) {
            let parent = self.parent.as_ref().expect("remap without parent");
            return parent.set(outer, value);
        }
        let mut entries = self.entries.lock().unwrap();
        let previous = entries.insert(key.to_string(), value);
        match previous {
            Some(old) if old.type_name() != entries[key].type_name() => Some(old.type_name()),
            _ => None,
        }
    }

    /// Sorted `scope_path key type value` lines for this scope only.
    pub fn dump_lines(&self) -> Vec<String> {
        let entries = self.entries.lock().unwrap();
        let mut lines: Vec<String> = entries
            .iter()
            .map(|(k, v)| format!("{} {} {} {}", self.path, k, v.type_name(), v.to_wire()))
            .collect();
        lines.sort();
        lines
    }
}

/// Direction of a port on a leaf or subtree interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortDirection {
    In,
    Out,
}

/// Where a port binding gets its value: a design-time literal or a
/// blackboard key. Out ports must bind to keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PortSource {
    Literal(String),
    Key(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortBinding {
    pub name: String,
    pub direction: PortDirection,
    pub source: PortSource,
}

/// Resolved bindings of one node, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PortMap {
    bindings: Vec<PortBinding>,
}

impl PortMap {
    pub fn new(bindings: Vec<PortBinding>) -> Result<PortMap, EngineError> {
        for b in &bindings {
            if b.direction == PortDirection::Out {
                if let PortSource::Literal(lit) = &b.source {
                    return Err(EngineError::PortMismatch {
                        leaf: b.name.clone(),
                        message: format!("out port bound to literal {lit:?}"),
                    });
                }
            }
        }
        Ok(PortMap { bindings })
    }

    pub fn get(&self, name: &str) -> Option<&PortBinding> {
        self.bindings.iter().find(|b| b.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PortBinding> {
        self.bindings.iter()
    }

    /// Resolves an in-port to a value: literals parse, keys read the scope.
    pub fn read_in(&self, name: &str, scope: &Scope) -> Result<BbValue, EngineError> {
        let binding = self.get(name).ok_or_else(|| EngineError::KeyNotFound(format!(
            "port {name:?} is unbound"
        )))?;
        if binding.direction != PortDirection::In {
            return Err(EngineError::PortMismatch {
                leaf: name.to_string(),
                message: "read from out port".to_string(),
            });
        }
        match &binding.source {
            PortSource::Literal(text) => Ok(BbValue::parse(text)),
            PortSource::Key(key) => scope.get(key),
        }
    }

    /// Resolves an out-port to the blackboard key it writes.
    pub fn out_key(&self, name: &str) -> Result<&str, EngineError> {
        let binding = self.get(name).ok_or_else(|| EngineError::KeyNotFound(format!(
            "port {name:?} is unbound"
        )))?;
        match (&binding.direction, &binding.source) {
            (PortDirection::Out, PortSource::Key(key)) => Ok(key),
            _ => Err(EngineError::PortMismatch {
                leaf: name.to_string(),
                message: "not an out port bound to a key".to_string(),
            }),
        }
    }
}
