//! Random `.hlsw` programs over a small variable set.

use proptest::prelude::*;

const VARS: [&str; 3] = ["a", "b", "c"];
const OPS: [&str; 10] = ["+", "-", "*", "&", "|", "^", "<<", ">>", "==", "<"];

pub fn expr(depth: u32) -> BoxedStrategy<String> {
    let leaf = prop_oneof![
        (0i64..16).prop_map(|v| v.to_string()),
        prop::sample::select(&VARS[..]).prop_map(str::to_string),
    ];
    leaf.prop_recursive(depth, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(&OPS[..]), inner.clone())
                .prop_map(|(a, op, b)| format!("({a} {op} {b})")),
            inner.clone().prop_map(|a| format!("(-{a})")),
            inner.prop_map(|a| format!("(!{a})")),
        ]
    })
    .boxed()
}

pub fn stmt(depth: u32) -> BoxedStrategy<String> {
    let assign =
        (prop::sample::select(&VARS[..]), expr(2)).prop_map(|(v, e)| format!("{v} = {e};"));
    if depth <= 1 {
        return assign.boxed();
    }
    let block = prop::collection::vec(stmt(depth - 1), 1..3).prop_map(|v| v.join(" "));
    prop_oneof![
        3 => assign,
        1 => (expr(1), block.clone()).prop_map(|(c, b)| format!("while ({c}) {{ {b} }}")),
        1 => (expr(1), block.clone()).prop_map(|(c, b)| format!("if ({c}) {{ {b} }}")),
        1 => (expr(1), block.clone(), block).prop_map(|(c, t, e)| format!("if ({c}) {{ {t} }} else {{ {e} }}")),
    ]
    .boxed()
}

/// A whole program with declarations and random initial values.
pub fn program() -> impl Strategy<Value = (String, [i64; 3])> {
    (
        prop::sample::select(&[4u32, 8, 16][..]),
        prop::collection::vec(stmt(3), 1..4),
        [-8i64..8, -8i64..8, -8i64..8],
    )
        .prop_map(|(w, body, init)| {
            let decls: String = VARS.iter().map(|v| format!("var {v}: i{w}; ")).collect();
            (format!("{decls}{}", body.join(" ")), init)
        })
}
