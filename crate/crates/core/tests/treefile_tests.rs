//! Parsing, validation, instantiation, and serialization of tree files.

use ticktree::treefile::{self, ElementKind, ParseError, Severity};
use ticktree::{runtime, Clock, EngineError, NodeRegistry, NodeStatus, Scope, TickContext, VecSink};

const FETCH: &str = include_str!("../../../trees/fetch.xml");
const SUBTREE_DEMO: &str = include_str!("../../../trees/subtree_demo.xml");
const MEMORY_DEMO: &str = include_str!("../../../trees/memory_demo.xml");

#[test]
fn fetch_tree_parses_to_eight_elements() {
    let model = treefile::parse(FETCH).unwrap();
    assert_eq!(model.main, "Fetch");
    assert_eq!(model.trees.len(), 1);
    assert_eq!(model.trees[0].root.count(), 8);
}

#[test]
fn empty_document_is_a_syntax_error() {
    assert!(matches!(
        treefile::parse(""),
        Err(ParseError::Syntax { .. })
    ));
}

#[test]
fn unknown_element_reports_position() {
    let text = "<root main=\"T\">\n  <tree name=\"T\">\n    <Sequencer/>\n  </tree>\n</root>";
    match treefile::parse(text) {
        Err(ParseError::UnknownElement { name, row, .. }) => {
            assert_eq!(name, "Sequencer");
            assert_eq!(row, 3);
        }
        other => panic!("expected UnknownElement, got {other:?}"),
    }
}

#[test]
fn missing_attribute_detected() {
    let text = r#"<root><tree name="T"><Action skill="X"/></tree></root>"#;
    assert!(matches!(
        treefile::parse(text),
        Err(ParseError::MissingAttribute { attr: "name", .. })
    ));
}

#[test]
fn subtree_remaps_are_recorded() {
    let model = treefile::parse(SUBTREE_DEMO).unwrap();
    let main = &model.trees[0];
    let sub = &main.root.children[1];
    match &sub.kind {
        ElementKind::SubTree { tree, binds } => {
            assert_eq!(tree, "Check");
            assert_eq!(
                binds,
                &vec![
                    ("wanted".to_string(), "{detected}".to_string()),
                    ("floor".to_string(), "5".to_string()),
                ]
            );
        }
        other => panic!("expected SubTree, got {other:?}"),
    }
}

// --- validate -----------------------------------------------------------------

fn errors_of(text: &str) -> Vec<String> {
    let model = treefile::parse(text).unwrap();
    treefile::validate(&model)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.message)
        .collect()
}

#[test]
fn clean_models_validate_clean() {
    for text in [FETCH, SUBTREE_DEMO, MEMORY_DEMO] {
        let model = treefile::parse(text).unwrap();
        assert!(treefile::validate(&model).is_empty());
    }
}

#[test]
fn parallel_threshold_must_fit_child_count() {
    let errors = errors_of(
        r#"<root><tree name="T"><Parallel M="4">
            <Condition name="AlwaysSuccess"/>
            <Condition name="AlwaysSuccess"/>
            <Condition name="AlwaysSuccess"/>
        </Parallel></tree></root>"#,
    );
    assert!(errors.iter().any(|m| m.contains("threshold exceeds child count")));
}

#[test]
fn decorator_arity_enforced() {
    let errors = errors_of(
        r#"<root><tree name="T"><Inverter>
            <Condition name="AlwaysSuccess"/>
            <Condition name="AlwaysSuccess"/>
        </Inverter></tree></root>"#,
    );
    assert!(errors.iter().any(|m| m.contains("exactly one child")));
}

#[test]
fn duplicate_tree_names_rejected() {
    let errors = errors_of(
        r#"<root main="T">
            <tree name="T"><Condition name="AlwaysSuccess"/></tree>
            <tree name="T"><Condition name="AlwaysFailure"/></tree>
        </root>"#,
    );
    assert!(errors.iter().any(|m| m.contains("duplicate subtree definition")));
}

#[test]
fn recursive_subtrees_rejected() {
    let errors = errors_of(
        r#"<root main="A">
            <tree name="A"><SubTree tree="B"/></tree>
            <tree name="B"><SubTree tree="A"/></tree>
        </root>"#,
    );
    assert!(errors.iter().any(|m| m.contains("recursive subtree cycle")));
}

#[test]
fn empty_composition_rejected() {
    let errors = errors_of(r#"<root><tree name="T"><Sequence/></tree></root>"#);
    assert!(errors.iter().any(|m| m.contains("at least one child")));
}

// --- instantiate -----------------------------------------------------------------

#[test]
fn unregistered_leaf_refused() {
    let model = treefile::parse(
        r#"<root><tree name="T"><Action name="Fly"/></tree></root>"#,
    )
    .unwrap();
    let registry = NodeRegistry::empty();
    match treefile::instantiate(&model, &registry, Scope::root()) {
        Err(EngineError::UnregisteredLeaf(name)) => assert_eq!(name, "Fly"),
        other => panic!("expected UnregisteredLeaf, got {other:?}"),
    }
}

#[test]
fn undeclared_port_is_a_port_mismatch() {
    let model = treefile::parse(
        r#"<root><tree name="T"><Condition name="AlwaysSuccess" speed="3"/></tree></root>"#,
    )
    .unwrap();
    let registry = NodeRegistry::with_builtins();
    assert!(matches!(
        treefile::instantiate(&model, &registry, Scope::root()),
        Err(EngineError::PortMismatch { .. })
    ));
}

#[test]
fn instances_have_independent_state() {
    let model = treefile::parse(MEMORY_DEMO).unwrap();
    let registry = NodeRegistry::with_builtins();
    let mut a = treefile::instantiate(&model, &registry, Scope::root()).unwrap();
    let b = treefile::instantiate(&model, &registry, Scope::root()).unwrap();
    let mut ctx = TickContext::new(Clock::simulated(), VecSink::new());
    runtime::step(&mut a, &mut ctx).unwrap();
    assert_eq!(a.status(), NodeStatus::Success);
    assert_eq!(b.status(), NodeStatus::Idle, "sibling instance untouched");
    assert!(b.root_scope().get("stage").is_err());
}

#[test]
fn node_ids_depend_only_on_structure() {
    let model = treefile::parse(SUBTREE_DEMO).unwrap();
    let registry = NodeRegistry::with_builtins();
    let tree = treefile::instantiate(&model, &registry, Scope::root()).unwrap();
    let mut ids = Vec::new();
    tree.walk(|n| ids.push(n.id().0));
    assert_eq!(ids, (0..ids.len() as u32).collect::<Vec<_>>(), "depth-first dense ids");
}

#[test]
fn subtree_scope_remap_and_literal_args_work() {
    let model = treefile::parse(SUBTREE_DEMO).unwrap();
    let registry = NodeRegistry::with_builtins();
    let mut tree = treefile::instantiate(&model, &registry, Scope::root()).unwrap();
    let mut ctx = TickContext::new(Clock::simulated(), VecSink::new());
    let status = runtime::step(&mut tree, &mut ctx).unwrap();
    assert_eq!(status, NodeStatus::Success);
    // the subtree's local write stayed out of the root scope
    assert!(tree.root_scope().get("copy").is_err());
    assert!(tree.root_scope().get("detected").is_ok());
}

#[test]
fn sibling_leaves_with_same_name_get_distinct_paths() {
    let model = treefile::parse(MEMORY_DEMO).unwrap();
    let registry = NodeRegistry::with_builtins();
    let tree = treefile::instantiate(&model, &registry, Scope::root()).unwrap();
    let mut paths = Vec::new();
    tree.walk(|n| paths.push(n.path().to_string()));
    let unique: std::collections::HashSet<_> = paths.iter().collect();
    assert_eq!(unique.len(), paths.len(), "paths unique: {paths:?}");
}

// --- serialize ---------------------------------------------------------------------

#[test]
fn round_trip_preserves_structure() {
    for text in [FETCH, SUBTREE_DEMO, MEMORY_DEMO] {
        let model = treefile::parse(text).unwrap();
        let rendered = treefile::serialize(&model);
        let reparsed = treefile::parse(&rendered).unwrap();
        assert_eq!(model, reparsed);
    }
}

#[test]
fn serialization_is_deterministic() {
    let model = treefile::parse(FETCH).unwrap();
    assert_eq!(treefile::serialize(&model), treefile::serialize(&model));
}

#[test]
fn attribute_values_are_escaped() {
    let model = treefile::parse(
        r#"<root><tree name="T"><Action name="SetInt" key="a&amp;b" value="1"/></tree></root>"#,
    )
    .unwrap();
    let rendered = treefile::serialize(&model);
    assert!(rendered.contains("a&amp;b"));
    assert_eq!(treefile::parse(&rendered).unwrap(), model);
}
