//! Built-in consistency checks: the reference snippet's rewrite table,
//! metric identities and a finite-difference gradient check.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eval::{Counts, Rates};
use crate::graph::CodeGraph;
use crate::lang::{node_at, SyntaxTree};
use crate::model::gradcheck::{gradient_check, LossKind};
use crate::model::{target_option, GraphTensors, Network, Vocab};
use crate::pipeline::functions_from_source;
use crate::rewrite::{Payload, PotentialRewrite, RuleKind, ToggleAction};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const REFERENCE_SNIPPET: &str = "\
def bar(x, y):
  return x - y

def foo(a, b, c=0):
  if a in b:
    c += bar(b, c)
  c_is_neg = c < 0
  if c_is_neg or a is int:
    return True, c
  return c > 1, c
";

/// Replacements at each rewrite location of `foo`, in source order.
pub const REFERENCE_TABLE: [&[&str]; 22] = [
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

fn describe(tree: &SyntaxTree, pr: &PotentialRewrite) -> String {
    let node = node_at(tree, &pr.location).ok();
    match &pr.rule.payload {
        Payload::Variable { to, .. } | Payload::Operator { to, .. } | Payload::Literal { to, .. } => to.clone(),
        Payload::Swap(i, j) => {
            let Some(call) = node else { return format!("swap {i},{j}") };
            let mut args: Vec<&str> = call.children[1..].iter().map(|a| a.lexeme().unwrap_or("?")).collect();
            if *j < args.len() {
                args.swap(*i, *j);
            }
            format!("{}({})", call.children[0].lexeme().unwrap_or("?"), args.join(", "))
        }
        Payload::Toggle(ToggleAction::InsertNot) => format!("not {}", node.and_then(|n| n.lexeme()).unwrap_or("?")),
        p => format!("{p:?}"),
    }
}

/// Rewrites of the reference snippet's `foo`, grouped per location in
/// source order.
pub fn reference_rewrites() -> Vec<Vec<String>> {
    let fs = functions_from_source("reference.py", REFERENCE_SNIPPET).expect("reference snippet parses");
    let f = &fs[1];
    let mut by_loc: BTreeMap<(usize, std::cmp::Reverse<usize>), Vec<String>> = BTreeMap::new();
    for pr in f.candidates() {
        let span = node_at(f.tree(), &pr.location).map(|n| n.span).unwrap_or_default();
        by_loc.entry((span.start, std::cmp::Reverse(span.end))).or_default().push(describe(f.tree(), &pr));
    }
    by_loc.into_values().collect()
}

pub fn reference_enumeration() -> Check {
    let got = reference_rewrites();
    let total: usize = got.iter().map(Vec::len).sum();
    let mut mismatches = Vec::new();
    for i in 0..got.len().max(REFERENCE_TABLE.len()) {
        let mut g = got.get(i).cloned().unwrap_or_default();
        let mut e: Vec<String> = REFERENCE_TABLE.get(i).map_or_else(Vec::new, |e| e.iter().map(|s| s.to_string()).collect());
        g.sort();
        e.sort();
        if g != e {
            mismatches.push(format!("l{}: got {g:?}, expected {e:?}", i + 1));
        }
    }
    Check {
        name: "reference enumeration",
        passed: total == 63 && mismatches.is_empty(),
        detail: if mismatches.is_empty() { format!("{total} rewrites over {} locations", got.len()) } else { mismatches.join("; ") },
    }
}

/// Rates recomputed from their defining formulas over random counts.
pub fn metric_identities(vectors: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut failures = 0;
    let mut first = String::new();
    for _ in 0..vectors {
        let buggy = rng.gen_range(0..50);
        let dtw = rng.gen_range(0..=buggy);
        let tw = rng.gen_range(0..=dtw);
        let dfw = rng.gen_range(0..50);
        let c = Counts {
            samples: buggy + rng.gen_range(0..50),
            buggy,
            dfw,
            dtw,
            tw,
            fw: dfw + rng.gen_range(0..=dtw - tw),
            correct_repairs: rng.gen_range(0..=buggy),
            joint_correct: 0,
            loc_correct: 0,
        };
        let r = Rates::from_counts(&c);
        let fdr = div(c.dfw, c.dfw + c.dtw);
        let ok = r.fdr == fdr
            && r.dpr == 1.0 - fdr
            && r.dre == div(c.dtw, c.buggy)
            && r.racc == div(c.correct_repairs, c.buggy)
            && r.pr == div(c.tw, c.tw + c.fw)
            && r.re == div(c.tw, c.buggy)
            && [r.fdr, r.dpr, r.dre, r.racc, r.pr, r.re].iter().all(|x| (0.0..=1.0).contains(x));
        if !ok {
            failures += 1;
            if first.is_empty() {
                first = format!("{c:?} gave {r:?}");
            }
        }
    }
    Check {
        name: "metric identities",
        passed: failures == 0,
        detail: if failures == 0 { format!("{vectors} count vectors") } else { format!("{failures} failures, first {first}") },
    }
}

/// Graphs of the reference snippet: the clean program and one bug of
/// each of several kinds.
pub fn reference_graphs() -> Vec<CodeGraph> {
    let fs = functions_from_source("reference.py", REFERENCE_SNIPPET).expect("reference snippet parses");
    let f = &fs[1];
    let cands = f.candidates();
    let mut out = vec![f.graph(None)];
    for kind in [RuleKind::VarMisuse, RuleKind::ArgSwap, RuleKind::WrongLiteral, RuleKind::WrongComparisonOp, RuleKind::UnaryNegToggle] {
        if let Some(pr) = cands.iter().find(|c| c.kind() == kind) {
            out.push(f.buggy_graph(pr).expect("reference rewrites apply"));
        }
    }
    out
}

/// Finite-difference check of both losses on `graphs` with small
/// networks; passes when every relative error is below `tolerance`.
pub fn gradient_suite(graphs: &[CodeGraph], d: usize, per_param: usize, tolerance: f64, seed: u64) -> Check {
    let vocab = Vocab::from_graphs(graphs, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for (i, g) in graphs.iter().enumerate() {
        let net = Network::new(vocab.len(), d, seed.wrapping_add(i as u64));
        let gt = match GraphTensors::new(g, &vocab) {
            Ok(gt) => gt,
            Err(e) => return Check { name: "gradient check", passed: false, detail: e.to_string() },
        };
        let n = gt.scorers.len();
        let mut observed: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
        observed.push(n);
        let chosen = observed[rng.gen_range(0..observed.len())];
        let target = match target_option(g) {
            Ok(t) => t,
            Err(e) => return Check { name: "gradient check", passed: false, detail: e.to_string() },
        };
        for (loss, label) in [(LossKind::Detector(target), "detector"), (LossKind::Selector { chosen }, "selector")] {
            match gradient_check(&net, &gt, loss, &observed, 1e-5, per_param, &mut rng) {
                Ok(r) => {
                    checked += r.params.iter().map(|p| p.checked).sum::<usize>();
                    if let Some(w) = r.worst() {
                        if w.rel_error >= worst.0 {
                            worst = (w.rel_error, format!("{label} graph {i} {}", w.name));
                        }
                    }
                }
                Err(e) => return Check { name: "gradient check", passed: false, detail: e.to_string() },
            }
        }
    }
    Check {
        name: "gradient check",
        passed: worst.0 < tolerance,
        detail: format!("{} graphs, {checked} coordinates, max relative error {:.2e} ({})", graphs.len(), worst.0, worst.1),
    }
}

/// The quick suite run by the `selftest` command.
pub fn run_all() -> Vec<Check> {
    let graphs = reference_graphs();
    vec![reference_enumeration(), metric_identities(1000, 0), gradient_suite(&graphs[1..2], 2, 2, 1e-4, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        for c in run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
