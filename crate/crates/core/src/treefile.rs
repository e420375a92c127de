//! The declarative tree description format.
//!
//! Trees are written in XML with a closed element vocabulary:
//!
//! ```xml
//! <root main="Fetch">
//!   <tree name="Fetch">
//!     <Sequence>
//!       <Fallback>
//!         <Condition name="ObjectGrasped" skill="ObjectGrasped" hand="left"/>
//!         <Sequence>
//!           <Action name="DetectObject" skill="DetectObject" out_pose="{object_pose}"/>
//!           <Action name="GotoObject" skill="GotoPose" target="{object_pose}"/>
//!           <Action name="GraspObject" skill="Fetch" hand="left"/>
//!         </Sequence>
//!       </Fallback>
//!       <Action name="GotoDestination" skill="GotoPose" target="0 2 0"/>
//!     </Sequence>
//!   </tree>
//! </root>
//! ```
//!
//! Port attributes follow one lexical rule: `key="{blackboard_key}"` binds
//! the port to a blackboard entry, a bare string is a design-time literal.
//! Out ports of skill-backed leaves are written with an `out_` prefix and
//! must bind to blackboard keys. `SubTree` elements open a fresh blackboard
//! scope; their attributes remap child keys onto parent keys (`{parent}`
//! form) or seed the child scope with literal arguments.
//!
//! See `docs/treefile.md` for the grammar.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::blackboard::{PortBinding, PortDirection, PortMap, PortSource, Scope};
use crate::error::EngineError;
use crate::node::{NodeId, NodeKind, Tree, TreeNode};
use crate::registry::{LeafRole, LeafSpec, NodeRegistry};

/// Parsed, declarative form of a tree file.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    /// Name of the tree execution starts from.
    pub main: String,
    /// All tree definitions, in file order.
    pub trees: Vec<TreeDef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeDef {
    pub name: String,
    pub root: Element,
}

/// One element of the description. Source position is kept for diagnostics
/// and ignored by structural equality.
#[derive(Debug, Clone)]
pub struct Element {
    pub kind: ElementKind,
    pub children: Vec<Element>,
    pub pos: Option<(u32, u32)>,
}

impl PartialEq for Element {
    fn eq(&self, other: &Element) -> bool {
        self.kind == other.kind && self.children == other.children
    }
}

impl Element {
    pub fn new(kind: ElementKind, children: Vec<Element>) -> Element {
        Element {
            kind,
            children,
            pos: None,
        }
    }

    pub fn count(&self) -> usize {
        1 + self.children.iter().map(Element::count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Sequence,
    Fallback,
    Parallel { required: usize },
    SequenceMemory,
    FallbackMemory,
    ParallelMemory { required: usize },
    Inverter,
    Retry { max_attempts: u32 },
    Timeout { ms: u64 },
    Action(LeafModel),
    Condition(LeafModel),
    SubTree { tree: String, binds: Vec<(String, String)> },
}

/// Leaf element: registry name (or skill reference) plus raw port bindings
/// in attribute order.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafModel {
    pub name: String,
    pub skill: Option<String>,
    pub ports: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at {row}:{col}: {message}")]
    Syntax { row: u32, col: u32, message: String },
    #[error("unknown element <{name}> at {row}:{col}")]
    UnknownElement { name: String, row: u32, col: u32 },
    #[error("missing attribute {attr:?} on <{element}> at {row}:{col}")]
    MissingAttribute {
        attr: &'static str,
        element: String,
        row: u32,
        col: u32,
    },
    #[error("unexpected attribute {attr:?} on <{element}> at {row}:{col}")]
    UnexpectedAttribute {
        attr: String,
        element: String,
        row: u32,
        col: u32,
    },
    #[error("invalid attribute {attr:?} on <{element}> at {row}:{col}: {message}")]
    InvalidAttribute {
        attr: &'static str,
        element: String,
        row: u32,
        col: u32,
        message: String,
    },
    #[error("document must have exactly one <root> element")]
    NotARoot,
    #[error("<tree> must contain exactly one element at {row}:{col}")]
    TreeArity { row: u32, col: u32 },
    #[error("no tree named {0:?} to start from")]
    NoMainTree(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Validation finding: severity, element path, message.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.severity, self.path, self.message)
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

fn pos_of(doc: &roxmltree::Document, node: roxmltree::Node) -> (u32, u32) {
    let p = doc.text_pos_at(node.range().start);
    (p.row, p.col)
}

/// Parses a tree description. Structural constraints (arity, thresholds)
/// are left to [`validate`]; this only rejects malformed markup, unknown
/// elements, and missing or unparsable attributes.
pub fn parse(text: &str) -> Result<TreeModel, ParseError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        ParseError::Syntax {
            row: pos.row,
            col: pos.col,
            message: e.to_string(),
        }
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "root" {
        return Err(ParseError::NotARoot);
    }
    let mut main = None;
    for attr in root.attributes() {
        match attr.name() {
            "main" => main = Some(attr.value().to_string()),
            other => {
                let (row, col) = pos_of(&doc, root);
                return Err(ParseError::UnexpectedAttribute {
                    attr: other.to_string(),
                    element: "root".to_string(),
                    row,
                    col,
                });
            }
        }
    }
    let mut trees = Vec::new();
    for child in root.children().filter(roxmltree::Node::is_element) {
        if child.tag_name().name() != "tree" {
            let (row, col) = pos_of(&doc, child);
            return Err(ParseError::UnknownElement {
                name: child.tag_name().name().to_string(),
                row,
                col,
            });
        }
        let mut name = None;
        for attr in child.attributes() {
            match attr.name() {
                "name" => name = Some(attr.value().to_string()),
                other => {
                    let (row, col) = pos_of(&doc, child);
                    return Err(ParseError::UnexpectedAttribute {
                        attr: other.to_string(),
                        element: "tree".to_string(),
                        row,
                        col,
                    });
                }
            }
        }
        let (row, col) = pos_of(&doc, child);
        let name = name.ok_or(ParseError::MissingAttribute {
            attr: "name",
            element: "tree".to_string(),
            row,
            col,
        })?;
        let mut elements = child.children().filter(roxmltree::Node::is_element);
        let first = elements.next().ok_or(ParseError::TreeArity { row, col })?;
        if elements.next().is_some() {
            return Err(ParseError::TreeArity { row, col });
        }
        trees.push(TreeDef {
            name,
            root: parse_element(&doc, first)?,
        });
    }
    if trees.is_empty() {
        return Err(ParseError::NotARoot);
    }
    let main = match main {
        Some(m) => m,
        None if trees.len() == 1 => trees[0].name.clone(),
        None => return Err(ParseError::NoMainTree("<main attribute missing>".to_string())),
    };
    if !trees.iter().any(|t| t.name == main) {
        return Err(ParseError::NoMainTree(main));
    }
    Ok(TreeModel { main, trees })
}

fn parse_element(
    doc: &roxmltree::Document,
    node: roxmltree::Node,
) -> Result<Element, ParseError> {
    let tag = node.tag_name().name().to_string();
    let (row, col) = pos_of(doc, node);
    let no_attrs = |node: roxmltree::Node| -> Result<(), ParseError> {
        if let Some(attr) = node.attributes().next() {
            Err(ParseError::UnexpectedAttribute {
                attr: attr.name().to_string(),
                element: tag.clone(),
                row,
                col,
            })
        } else {
            Ok(())
        }
    };
    let single_attr = |node: roxmltree::Node, wanted: &'static str| -> Result<String, ParseError> {
        let mut value = None;
        for attr in node.attributes() {
            if attr.name() == wanted {
                value = Some(attr.value().to_string());
            } else {
                return Err(ParseError::UnexpectedAttribute {
                    attr: attr.name().to_string(),
                    element: tag.clone(),
                    row,
                    col,
                });
            }
        }
        value.ok_or(ParseError::MissingAttribute {
            attr: wanted,
            element: tag.clone(),
            row,
            col,
        })
    };
    let kind = match tag.as_str() {
        "Sequence" => {
            no_attrs(node)?;
            ElementKind::Sequence
        }
        "Fallback" => {
            no_attrs(node)?;
            ElementKind::Fallback
        }
        "SequenceMemory" => {
            no_attrs(node)?;
            ElementKind::SequenceMemory
        }
        "FallbackMemory" => {
            no_attrs(node)?;
            ElementKind::FallbackMemory
        }
        "Inverter" => {
            no_attrs(node)?;
            ElementKind::Inverter
        }
        "Parallel" | "ParallelMemory" => {
            let raw = single_attr(node, "M")?;
            let required = raw.parse::<usize>().map_err(|e| ParseError::InvalidAttribute {
                attr: "M",
                element: tag.clone(),
                row,
                col,
                message: e.to_string(),
            })?;
            if tag == "Parallel" {
                ElementKind::Parallel { required }
            } else {
                ElementKind::ParallelMemory { required }
            }
        }
        "Retry" => {
            let raw = single_attr(node, "max_attempts")?;
            let max_attempts = raw.parse::<u32>().map_err(|e| ParseError::InvalidAttribute {
                attr: "max_attempts",
                element: tag.clone(),
                row,
                col,
                message: e.to_string(),
            })?;
            ElementKind::Retry { max_attempts }
        }
        "Timeout" => {
            let raw = single_attr(node, "ms")?;
            let ms = raw.parse::<u64>().map_err(|e| ParseError::InvalidAttribute {
                attr: "ms",
                element: tag.clone(),
                row,
                col,
                message: e.to_string(),
            })?;
            ElementKind::Timeout { ms }
        }
        "Action" | "Condition" => {
            let mut name = None;
            let mut skill = None;
            let mut ports = Vec::new();
            for attr in node.attributes() {
                match attr.name() {
                    "name" => name = Some(attr.value().to_string()),
                    "skill" => skill = Some(attr.value().to_string()),
                    other => ports.push((other.to_string(), attr.value().to_string())),
                }
            }
            let leaf = LeafModel {
                name: name.ok_or(ParseError::MissingAttribute {
                    attr: "name",
                    element: tag.clone(),
                    row,
                    col,
                })?,
                skill,
                ports,
            };
            if tag == "Action" {
                ElementKind::Action(leaf)
            } else {
                ElementKind::Condition(leaf)
            }
        }
        "SubTree" => {
            let mut tree_ref = None;
            let mut binds = Vec::new();
            for attr in node.attributes() {
                match attr.name() {
                    "tree" => tree_ref = Some(attr.value().to_string()),
                    other => binds.push((other.to_string(), attr.value().to_string())),
                }
            }
            ElementKind::SubTree {
                tree: tree_ref.ok_or(ParseError::MissingAttribute {
                    attr: "tree",
                    element: tag.clone(),
                    row,
                    col,
                })?,
                binds,
            }
        }
        _ => {
            return Err(ParseError::UnknownElement {
                name: tag,
                row,
                col,
            })
        }
    };
    let mut children = Vec::new();
    for child in node.children().filter(roxmltree::Node::is_element) {
        children.push(parse_element(doc, child)?);
    }
    Ok(Element {
        kind,
        children,
        pos: Some((row, col)),
    })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Renders a model back to the file format. Deterministic: the same model
/// always yields byte-identical text, and `parse(serialize(m)) == m`.
pub fn serialize(model: &TreeModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("<root main=\"{}\">\n", escape(&model.main)));
    for tree in &model.trees {
        out.push_str(&format!("  <tree name=\"{}\">\n", escape(&tree.name)));
        serialize_element(&tree.root, 2, &mut out);
        out.push_str("  </tree>\n");
    }
    out.push_str("</root>\n");
    out
}

fn serialize_element(element: &Element, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    let (tag, attrs) = element_tag_attrs(&element.kind);
    out.push_str(&indent);
    out.push('<');
    out.push_str(tag);
    for (k, v) in &attrs {
        out.push_str(&format!(" {}=\"{}\"", k, escape(v)));
    }
    if element.children.is_empty() {
        out.push_str("/>\n");
    } else {
        out.push_str(">\n");
        for child in &element.children {
            serialize_element(child, depth + 1, out);
        }
        out.push_str(&indent);
        out.push_str(&format!("</{tag}>\n"));
    }
}

fn element_tag_attrs(kind: &ElementKind) -> (&'static str, Vec<(String, String)>) {
    match kind {
        ElementKind::Sequence => ("Sequence", vec![]),
        ElementKind::Fallback => ("Fallback", vec![]),
        ElementKind::SequenceMemory => ("SequenceMemory", vec![]),
        ElementKind::FallbackMemory => ("FallbackMemory", vec![]),
        ElementKind::Inverter => ("Inverter", vec![]),
        ElementKind::Parallel { required } => {
            ("Parallel", vec![("M".to_string(), required.to_string())])
        }
        ElementKind::ParallelMemory { required } => (
            "ParallelMemory",
            vec![("M".to_string(), required.to_string())],
        ),
        ElementKind::Retry { max_attempts } => (
            "Retry",
            vec![("max_attempts".to_string(), max_attempts.to_string())],
        ),
        ElementKind::Timeout { ms } => ("Timeout", vec![("ms".to_string(), ms.to_string())]),
        ElementKind::Action(leaf) | ElementKind::Condition(leaf) => {
            let tag = if matches!(kind, ElementKind::Action(_)) {
                "Action"
            } else {
                "Condition"
            };
            let mut attrs = vec![("name".to_string(), leaf.name.clone())];
            if let Some(skill) = &leaf.skill {
                attrs.push(("skill".to_string(), skill.clone()));
            }
            attrs.extend(leaf.ports.iter().cloned());
            (tag, attrs)
        }
        ElementKind::SubTree { tree, binds } => {
            let mut attrs = vec![("tree".to_string(), tree.clone())];
            attrs.extend(binds.iter().cloned());
            ("SubTree", attrs)
        }
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

fn is_key_binding(value: &str) -> Option<&str> {
    value
        .strip_prefix('{')
        .and_then(|rest| rest.strip_suffix('}'))
}

/// Structural validation. An empty result means [`instantiate`] cannot fail
/// structurally (a covering registry is still required).
pub fn validate(model: &TreeModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut defs: HashMap<&str, &TreeDef> = HashMap::new();
    for tree in &model.trees {
        if defs.insert(tree.name.as_str(), tree).is_some() {
            diags.push(Diagnostic {
                severity: Severity::Error,
                path: tree.name.clone(),
                message: format!("duplicate subtree definition name {:?}", tree.name),
            });
        }
    }
    if !defs.contains_key(model.main.as_str()) {
        diags.push(Diagnostic {
            severity: Severity::Error,
            path: model.main.clone(),
            message: format!("main tree {:?} is not defined", model.main),
        });
    }
    // reference cycles through SubTree elements
    for tree in &model.trees {
        let mut stack: Vec<&str> = vec![tree.name.as_str()];
        check_cycles(&tree.root, &defs, &mut stack, &mut diags, &tree.name);
    }
    for tree in &model.trees {
        validate_element(&tree.root, &defs, &tree.name, &mut diags);
    }
    diags
}

fn check_cycles<'a>(
    element: &'a Element,
    defs: &HashMap<&str, &'a TreeDef>,
    stack: &mut Vec<&'a str>,
    diags: &mut Vec<Diagnostic>,
    path: &str,
) {
    if let ElementKind::SubTree { tree, .. } = &element.kind {
        if stack.iter().any(|name| name == tree) {
            diags.push(Diagnostic {
                severity: Severity::Error,
                path: path.to_string(),
                message: format!("recursive subtree cycle through {tree:?}"),
            });
            return;
        }
        if let Some(def) = defs.get(tree.as_str()) {
            stack.push(tree.as_str());
            check_cycles(&def.root, defs, stack, diags, path);
            stack.pop();
        }
    }
    for child in &element.children {
        check_cycles(child, defs, stack, diags, path);
    }
}

fn element_segment(element: &Element, index: usize) -> String {
    match &element.kind {
        ElementKind::Sequence => format!("seq.{index}"),
        ElementKind::Fallback => format!("fb.{index}"),
        ElementKind::Parallel { .. } => format!("par.{index}"),
        ElementKind::SequenceMemory => format!("seqm.{index}"),
        ElementKind::FallbackMemory => format!("fbm.{index}"),
        ElementKind::ParallelMemory { .. } => format!("parm.{index}"),
        ElementKind::Inverter => format!("inv.{index}"),
        ElementKind::Retry { .. } => format!("retry.{index}"),
        ElementKind::Timeout { .. } => format!("timeout.{index}"),
        ElementKind::Action(leaf) | ElementKind::Condition(leaf) => leaf.name.clone(),
        ElementKind::SubTree { tree, .. } => tree.clone(),
    }
}

fn validate_element(
    element: &Element,
    defs: &HashMap<&str, &TreeDef>,
    path: &str,
    diags: &mut Vec<Diagnostic>,
) {
    let error = |diags: &mut Vec<Diagnostic>, message: String| {
        diags.push(Diagnostic {
            severity: Severity::Error,
            path: path.to_string(),
            message,
        });
    };
    let n = element.children.len();
    match &element.kind {
        ElementKind::Sequence
        | ElementKind::Fallback
        | ElementKind::SequenceMemory
        | ElementKind::FallbackMemory => {
            if n == 0 {
                error(diags, "composition needs at least one child".to_string());
            }
        }
        ElementKind::Parallel { required } | ElementKind::ParallelMemory { required } => {
            if n == 0 {
                error(diags, "composition needs at least one child".to_string());
            }
            if *required < 1 {
                error(diags, "threshold M must be at least 1".to_string());
            } else if *required > n && n > 0 {
                error(
                    diags,
                    format!("threshold exceeds child count ({required} > {n})"),
                );
            }
        }
        ElementKind::Inverter | ElementKind::Retry { .. } | ElementKind::Timeout { .. } => {
            if n != 1 {
                error(diags, format!("decorator needs exactly one child, has {n}"));
            }
            if let ElementKind::Retry { max_attempts } = &element.kind {
                if *max_attempts < 1 {
                    error(diags, "max_attempts must be at least 1".to_string());
                }
            }
            if let ElementKind::Timeout { ms } = &element.kind {
                if *ms == 0 {
                    error(diags, "timeout duration must be positive".to_string());
                }
            }
        }
        ElementKind::Action(leaf) | ElementKind::Condition(leaf) => {
            if n != 0 {
                error(diags, format!("leaf must have no children, has {n}"));
            }
            if leaf.skill.is_some() {
                for (port, value) in &leaf.ports {
                    if port.starts_with("out_") && is_key_binding(value).is_none() {
                        error(
                            diags,
                            format!("out port {port:?} must bind to a blackboard key"),
                        );
                    }
                }
            }
        }
        ElementKind::SubTree { tree, binds } => {
            if n != 0 {
                error(diags, format!("SubTree must have no children, has {n}"));
            }
            if !defs.contains_key(tree.as_str()) {
                error(diags, format!("subtree reference {tree:?} does not resolve"));
            }
            let mut seen = HashSet::new();
            for (inner, _) in binds {
                if !seen.insert(inner.as_str()) {
                    error(diags, format!("duplicate remap key {inner:?}"));
                }
            }
        }
    }
    for (i, child) in element.children.iter().enumerate() {
        let child_path = format!("{path}/{}", element_segment(child, i));
        validate_element(child, defs, &child_path, diags);
    }
}

// ---------------------------------------------------------------------------
// Instantiation
// ---------------------------------------------------------------------------

struct Builder<'a> {
    next_id: u32,
    registry: &'a NodeRegistry,
    defs: HashMap<&'a str, &'a TreeDef>,
    scopes: Vec<Arc<Scope>>,
}

/// Builds an executable tree from a validated model. NodeIds are assigned
/// depth-first and depend only on the model structure; each `SubTree`
/// boundary opens a fresh scope chained through its remaps.
pub fn instantiate(
    model: &TreeModel,
    registry: &NodeRegistry,
    root_scope: Arc<Scope>,
) -> Result<Tree, EngineError> {
    let diags = validate(model);
    let errors: Vec<&Diagnostic> = diags
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        let rendered = errors
            .iter()
            .map(|d| format!("{}: {}", d.path, d.message))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(EngineError::Validation(rendered));
    }
    let defs: HashMap<&str, &TreeDef> = model
        .trees
        .iter()
        .map(|t| (t.name.as_str(), t))
        .collect();
    let main = defs[model.main.as_str()];
    let mut builder = Builder {
        next_id: 0,
        registry,
        defs,
        scopes: vec![Arc::clone(&root_scope)],
    };
    let root = builder.build(&main.root, "root".to_string(), &root_scope)?;
    Ok(Tree::new(root, builder.scopes))
}

impl<'a> Builder<'a> {
    fn take_id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    fn build(
        &mut self,
        element: &Element,
        path: String,
        scope: &Arc<Scope>,
    ) -> Result<TreeNode, EngineError> {
        let id = self.take_id();
        let n = element.children.len();
        let kind = match &element.kind {
            ElementKind::Sequence => NodeKind::Sequence,
            ElementKind::Fallback => NodeKind::Fallback,
            ElementKind::Parallel { required } => NodeKind::Parallel { required: *required },
            ElementKind::SequenceMemory => NodeKind::SequenceMemory { current: 0 },
            ElementKind::FallbackMemory => NodeKind::FallbackMemory { current: 0 },
            ElementKind::ParallelMemory { required } => NodeKind::ParallelMemory {
                required: *required,
                done: vec![false; n],
                statuses: vec![crate::status::NodeStatus::Idle; n],
            },
            ElementKind::Inverter => NodeKind::Inverter,
            ElementKind::Retry { max_attempts } => NodeKind::Retry {
                max_attempts: *max_attempts,
                attempts: 0,
            },
            ElementKind::Timeout { ms } => NodeKind::Timeout {
                duration: std::time::Duration::from_millis(*ms),
                started: None,
            },
            ElementKind::Action(leaf) => {
                let (ports, built) = self.build_leaf(leaf, LeafRole::Action)?;
                return Ok(TreeNode::new(
                    id,
                    path,
                    NodeKind::Action(built),
                    Vec::new(),
                    Arc::clone(scope),
                    ports,
                ));
            }
            ElementKind::Condition(leaf) => {
                let (ports, built) = self.build_leaf(leaf, LeafRole::Condition)?;
                return Ok(TreeNode::new(
                    id,
                    path,
                    NodeKind::Condition(built),
                    Vec::new(),
                    Arc::clone(scope),
                    ports,
                ));
            }
            ElementKind::SubTree { tree, binds } => {
                return self.build_subtree(id, tree, binds, path, scope);
            }
        };
        let segments = sibling_segments(&element.children);
        let mut children = Vec::with_capacity(n);
        for (child, segment) in element.children.iter().zip(segments) {
            let child_path = format!("{path}/{segment}");
            children.push(self.build(child, child_path, scope)?);
        }
        Ok(TreeNode::new(
            id,
            path,
            kind,
            children,
            Arc::clone(scope),
            PortMap::default(),
        ))
    }

    fn build_subtree(
        &mut self,
        id: NodeId,
        tree: &str,
        binds: &[(String, String)],
        path: String,
        scope: &Arc<Scope>,
    ) -> Result<TreeNode, EngineError> {
        let def = self.defs[tree];
        let mut remaps = Vec::new();
        let mut literals = Vec::new();
        for (inner, value) in binds {
            match is_key_binding(value) {
                Some(outer) => remaps.push((inner.clone(), outer.to_string())),
                None => literals.push((inner.clone(), value.clone())),
            }
        }
        let child_scope = Scope::child(scope, path.clone(), remaps)?;
        for (key, literal) in literals {
            // design-time subtree arguments seed the fresh scope
            child_scope.set(&key, crate::blackboard::BbValue::parse(&literal));
        }
        self.scopes.push(Arc::clone(&child_scope));
        let inner_segment = element_segment(&def.root, 0);
        let inner_path = format!("{path}/{inner_segment}");
        let inner_root = self.build(&def.root, inner_path, &child_scope)?;
        Ok(TreeNode::new(
            id,
            path,
            NodeKind::SubTree,
            vec![inner_root],
            Arc::clone(scope),
            PortMap::default(),
        ))
    }

    fn build_leaf(
        &mut self,
        leaf: &LeafModel,
        role: LeafRole,
    ) -> Result<(PortMap, Box<dyn crate::leaf::Leaf>), EngineError> {
        let mut bindings = Vec::new();
        if let Some(skill) = &leaf.skill {
            let _ = skill;
            // skill leaves: `out_` prefix marks out ports, the rest are in
            for (attr, value) in &leaf.ports {
                let (name, direction) = match attr.strip_prefix("out_") {
                    Some(stripped) => (stripped.to_string(), PortDirection::Out),
                    None => (attr.clone(), PortDirection::In),
                };
                let source = match is_key_binding(value) {
                    Some(key) => PortSource::Key(key.to_string()),
                    None => PortSource::Literal(value.clone()),
                };
                bindings.push(PortBinding {
                    name,
                    direction,
                    source,
                });
            }
        } else {
            let entry = self
                .registry
                .entry(&leaf.name)
                .ok_or_else(|| EngineError::UnregisteredLeaf(leaf.name.clone()))?;
            for (attr, value) in &leaf.ports {
                let decl = entry.ports.iter().find(|d| &d.name == attr).ok_or_else(|| {
                    EngineError::PortMismatch {
                        leaf: leaf.name.clone(),
                        message: format!("port {attr:?} is not declared"),
                    }
                })?;
                let source = match is_key_binding(value) {
                    Some(key) => PortSource::Key(key.to_string()),
                    None => PortSource::Literal(value.clone()),
                };
                bindings.push(PortBinding {
                    name: attr.clone(),
                    direction: decl.direction,
                    source,
                });
            }
        }
        let ports = PortMap::new(bindings)?;
        let spec = LeafSpec {
            name: &leaf.name,
            skill: leaf.skill.as_deref(),
            role,
            ports: &ports,
        };
        let built = self.registry.build(&spec)?;
        Ok((ports, built))
    }
}

/// Path segments for a sibling list; duplicate leaf or subtree labels get an
/// index suffix so node paths stay unique.
fn sibling_segments(children: &[Element]) -> Vec<String> {
    let mut segments: Vec<String> = children
        .iter()
        .enumerate()
        .map(|(i, c)| element_segment(c, i))
        .collect();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in &segments {
        *counts.entry(s.as_str()).or_default() += 1;
    }
    let dups: HashSet<String> = counts
        .iter()
        .filter(|(_, n)| **n > 1)
        .map(|(s, _)| s.to_string())
        .collect();
    for (i, s) in segments.iter_mut().enumerate() {
        if dups.contains(s.as_str()) {
            s.push('.');
            s.push_str(&i.to_string());
        }
    }
    segments
}
