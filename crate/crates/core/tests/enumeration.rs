//! The rewrites enumerated for the reference snippet, location by location.

use std::collections::BTreeMap;
use std::time::Instant;

use buglab::lang::{node_at, NodeKind, SyntaxTree};
use buglab::pipeline::functions_from_source;
use buglab::rewrite::{Payload, PotentialRewrite, ToggleAction};

const SNIPPET: &str = "\
def foo(a, b, c=0):
  if a in b:
    c += bar(b, c)
  c_is_neg = c < 0
  if c_is_neg or a is int:
    return True, c
  return c > 1, c
";

/// Expected replacements per location, in source order.
const EXPECTED: [&[&str]; 22] = [
    &["b", "c"],
    &["not in"],
    &["a", "c"],
    &["a", "b"],
    &["=", "-=", "*=", "/=", "//=", "%="],
    &["bar(c, b)"],
    &["a", "c"],
    &["a", "b"],
    &["+=", "-=", "*=", "/=", "//=", "%="],
    &["a", "b"],
    &["<=", ">", ">=", "==", "!="],
    &["-2", "-1", "1", "2"],
    &["a", "b", "c", "not c_is_neg"],
    &["and"],
    &["b", "c", "c_is_neg"],
    &["is not"],
    &["False"],
    &["a", "b", "c_is_neg"],
    &["a", "b", "c_is_neg"],
    &[">=", "<", "<=", "==", "!="],
    &["-2", "-1", "0", "2"],
    &["a", "b", "c_is_neg"],
];

fn render(tree: &SyntaxTree, pr: &PotentialRewrite) -> String {
    let node = node_at(tree, &pr.location).unwrap();
    match &pr.rule.payload {
        Payload::Variable { to, .. } | Payload::Operator { to, .. } | Payload::Literal { to, .. } => to.clone(),
        Payload::Swap(i, j) => {
            assert_eq!(node.kind, NodeKind::Call);
            let mut args: Vec<&str> = node.children[1..].iter().map(|a| a.lexeme().unwrap()).collect();
            args.swap(*i, *j);
            format!("{}({})", node.children[0].lexeme().unwrap(), args.join(", "))
        }
        Payload::Toggle(ToggleAction::InsertNot) => format!("not {}", node.lexeme().unwrap()),
        other => panic!("unexpected payload {other:?}"),
    }
}

#[test]
fn reference_snippet_has_63_rewrites() {
    let start = Instant::now();
    let fs = functions_from_source("snippet.py", SNIPPET).unwrap();
    let f = &fs[0];
    let cands = f.candidates();
    assert_eq!(cands.len(), 63);

    let mut by_loc: BTreeMap<(usize, std::cmp::Reverse<usize>), Vec<String>> = BTreeMap::new();
    for pr in &cands {
        let n = node_at(f.tree(), &pr.location).unwrap();
        let key = (n.span.start, std::cmp::Reverse(n.span.end));
        by_loc.entry(key).or_default().push(render(f.tree(), pr));
    }
    let got: Vec<Vec<String>> = by_loc.into_values().collect();
    assert_eq!(got.len(), EXPECTED.len());
    for (i, (g, e)) in got.iter().zip(EXPECTED).enumerate() {
        let mut g = g.clone();
        let mut e: Vec<String> = e.iter().map(|s| s.to_string()).collect();
        g.sort();
        e.sort();
        assert_eq!(g, e, "location l{}", i + 1);
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}
