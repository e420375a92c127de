//! Wire format: golden byte fixtures and the round-trip property.

use std::collections::BTreeMap;

use proptest::prelude::*;
use ticktree_skills::{decode, encode, Op, SkillMessage};

fn msg(id: u64, op: Op, skill: &str, args: &[(&str, &str)], payload: &str) -> SkillMessage {
    SkillMessage {
        id,
        op,
        skill: skill.to_string(),
        args: args
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        payload: payload.to_string(),
    }
}

#[test]
fn golden_bytes_for_every_op() {
    let cases: Vec<(SkillMessage, &str)> = vec![
        (
            msg(1, Op::Start, "GotoPose", &[("x", "1.0"), ("y", "2.0")], ""),
            r#"{"id":1,"op":"start","skill":"GotoPose","args":{"x":"1.0","y":"2.0"},"payload":""}"#,
        ),
        (
            msg(2, Op::Stop, "GotoPose", &[], ""),
            r#"{"id":2,"op":"stop","skill":"GotoPose","args":{},"payload":""}"#,
        ),
        (
            msg(3, Op::Status, "Fetch", &[], ""),
            r#"{"id":3,"op":"status","skill":"Fetch","args":{},"payload":""}"#,
        ),
        (
            msg(3, Op::Result, "Fetch", &[], "success"),
            r#"{"id":3,"op":"result","skill":"Fetch","args":{},"payload":"success"}"#,
        ),
        (
            msg(1, Op::Ack, "GotoPose", &[], "running"),
            r#"{"id":1,"op":"ack","skill":"GotoPose","args":{},"payload":"running"}"#,
        ),
        (
            msg(4, Op::Error, "Fly", &[], "unknown skill \"Fly\""),
            r#"{"id":4,"op":"error","skill":"Fly","args":{},"payload":"unknown skill \"Fly\""}"#,
        ),
    ];
    for (message, golden) in cases {
        let line = encode(&message);
        assert_eq!(line, format!("{golden}\n"), "op {}", message.op);
        assert_eq!(decode(&line).unwrap(), message);
    }
}

fn arb_op() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Start),
        Just(Op::Stop),
        Just(Op::Status),
        Just(Op::Result),
        Just(Op::Ack),
        Just(Op::Error),
    ]
}

fn arb_message() -> impl Strategy<Value = SkillMessage> {
    (
        any::<u64>(),
        arb_op(),
        "[A-Za-z][A-Za-z0-9_]{0,12}",
        proptest::collection::btree_map("[a-z_]{1,8}", ".{0,16}", 0..4),
        ".{0,24}",
    )
        .prop_map(|(id, op, skill, args, payload)| SkillMessage {
            id,
            op,
            skill,
            args: args.into_iter().collect::<BTreeMap<_, _>>(),
            payload,
        })
}

proptest! {
    #[test]
    fn round_trip_identity(message in arb_message()) {
        let line = encode(&message);
        prop_assert!(line.ends_with('\n'));
        prop_assert!(!line[..line.len() - 1].contains('\n'));
        prop_assert_eq!(decode(&line).unwrap(), message);
    }
}
