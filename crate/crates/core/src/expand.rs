//! Rewrites memory compositions into memoryless ones.
//!
//! A Sequence or Fallback with memory is behaviorally equivalent to a
//! memoryless composition guarded by auxiliary conditions over a shared
//! index key, plus index-setting actions. The rewrite gives each memory node
//! a fresh blackboard key `_mem<n>` holding the 1-based index of its current
//! child.
//!
//! For `SequenceMemory [c_1 .. c_N]` with key `k`:
//!
//! ```text
//! Sequence(
//!   InitInt(k, 1),                      # seed the index once
//!   block_1, ..., block_N )
//! block_i = Fallback(
//!   IntAbove(k, i),                     # child already done: skip
//!   Sequence(c_i, SetInt(k, i+1)),      # run, then advance (1 when last)
//!   Sequence(SetInt(k, 1), AlwaysFailure) )   # failure resets the index
//! ```
//!
//! The Fallback-with-memory rewrite is the status-swapped dual. Equivalence
//! holds for any child status script as long as the children do not touch
//! the auxiliary keys. Parallel with memory has no such rewrite and is
//! rejected.

use crate::error::EngineError;
use crate::treefile::{Element, ElementKind, LeafModel, TreeModel};

/// Returns a new model in which every memory Sequence/Fallback is rewritten
/// into memoryless form. A model with no memory nodes comes back unchanged.
pub fn expand_memory_nodes(model: &TreeModel) -> Result<TreeModel, EngineError> {
    let mut counter = 0usize;
    let mut out = model.clone();
    for tree in &mut out.trees {
        tree.root = expand_element(&tree.root, &mut counter)?;
    }
    Ok(out)
}

fn expand_element(element: &Element, counter: &mut usize) -> Result<Element, EngineError> {
    let children: Vec<Element> = element
        .children
        .iter()
        .map(|c| expand_element(c, counter))
        .collect::<Result<_, _>>()?;
    match &element.kind {
        ElementKind::ParallelMemory { .. } => {
            Err(EngineError::ExpansionUnsupported("ParallelMemory"))
        }
        ElementKind::SequenceMemory => {
            let key = take_key(counter);
            let n = children.len();
            let mut blocks = vec![init_int(&key, 1)];
            for (i, child) in children.into_iter().enumerate() {
                let index = i + 1;
                let advance = if index == n { 1 } else { index + 1 };
                blocks.push(Element::new(
                    ElementKind::Fallback,
                    vec![
                        int_above(&key, index),
                        Element::new(
                            ElementKind::Sequence,
                            vec![child, set_int(&key, advance)],
                        ),
                        fail_with_index(&key, 1),
                    ],
                ));
            }
            Ok(Element::new(ElementKind::Sequence, blocks))
        }
        ElementKind::FallbackMemory => {
            let key = take_key(counter);
            let n = children.len();
            let mut blocks = Vec::with_capacity(n);
            for (i, child) in children.into_iter().enumerate() {
                let index = i + 1;
                let advance = if index == n { 1 } else { index + 1 };
                blocks.push(Element::new(
                    ElementKind::Sequence,
                    vec![
                        Element::new(ElementKind::Inverter, vec![int_above(&key, index)]),
                        Element::new(
                            ElementKind::Fallback,
                            vec![
                                Element::new(
                                    ElementKind::Sequence,
                                    vec![child, set_int(&key, 1)],
                                ),
                                fail_with_index(&key, advance),
                            ],
                        ),
                    ],
                ));
            }
            Ok(Element::new(
                ElementKind::Sequence,
                vec![
                    init_int(&key, 1),
                    Element::new(ElementKind::Fallback, blocks),
                ],
            ))
        }
        kind => Ok(Element {
            kind: kind.clone(),
            children,
            pos: None,
        }),
    }
}

fn take_key(counter: &mut usize) -> String {
    let key = format!("_mem{counter}");
    *counter += 1;
    key
}

fn leaf(name: &str, ports: Vec<(&str, String)>) -> LeafModel {
    LeafModel {
        name: name.to_string(),
        skill: None,
        ports: ports
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    }
}

fn init_int(key: &str, value: usize) -> Element {
    Element::new(
        ElementKind::Action(leaf(
            "InitInt",
            vec![("key", key.to_string()), ("value", value.to_string())],
        )),
        vec![],
    )
}

fn set_int(key: &str, value: usize) -> Element {
    Element::new(
        ElementKind::Action(leaf(
            "SetInt",
            vec![("key", key.to_string()), ("value", value.to_string())],
        )),
        vec![],
    )
}

fn int_above(key: &str, than: usize) -> Element {
    Element::new(
        ElementKind::Condition(leaf(
            "IntAbove",
            vec![("key", key.to_string()), ("than", than.to_string())],
        )),
        vec![],
    )
}

/// `Sequence(SetInt(key, value), AlwaysFailure)` — moves the index and
/// yields Failure so the enclosing composition propagates it.
fn fail_with_index(key: &str, value: usize) -> Element {
    Element::new(
        ElementKind::Sequence,
        vec![
            set_int(key, value),
            Element::new(
                ElementKind::Condition(leaf("AlwaysFailure", vec![])),
                vec![],
            ),
        ],
    )
}
