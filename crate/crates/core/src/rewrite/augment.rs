//! Semantics-preserving augmentation rewrites.
//!
//! Each enabled augmentation fires independently per function with its
//! probability. When it fires it is applied everywhere it can be in that
//! function (every comparison is mirrored, every if/else swapped).

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::printer::print_unit;
use crate::lang::symbols::{resolve_functions, SymbolKind};
use crate::lang::tree::{NodeKind, SyntaxTree};
use crate::lang::SourceUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Augmentation {
    VariableRenaming,
    CommentDeletion,
    ComparisonMirroring,
    IfElseBranchSwap,
}

impl Augmentation {
    pub const ALL: [Augmentation; 4] = [
        Augmentation::VariableRenaming,
        Augmentation::CommentDeletion,
        Augmentation::ComparisonMirroring,
        Augmentation::IfElseBranchSwap,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSetting {
    pub enabled: bool,
    pub probability: f64,
}

impl Default for AugmentationSetting {
    fn default() -> Self {
        AugmentationSetting { enabled: true, probability: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub variable_renaming: AugmentationSetting,
    pub comment_deletion: AugmentationSetting,
    pub comparison_mirroring: AugmentationSetting,
    pub if_else_branch_swap: AugmentationSetting,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            variable_renaming: AugmentationSetting::default(),
            comment_deletion: AugmentationSetting::default(),
            comparison_mirroring: AugmentationSetting::default(),
            if_else_branch_swap: AugmentationSetting::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("probability for {0:?} must lie in [0, 1], got {1}")]
    Probability(Augmentation, f64),
}

impl AugmentationConfig {
    /// Every augmentation enabled with the same probability.
    pub fn uniform(probability: f64, seed: u64) -> Self {
        let s = AugmentationSetting { enabled: true, probability };
        AugmentationConfig {
            variable_renaming: s,
            comment_deletion: s,
            comparison_mirroring: s,
            if_else_branch_swap: s,
            seed,
        }
    }

    pub fn setting(&self, a: Augmentation) -> AugmentationSetting {
        match a {
            Augmentation::VariableRenaming => self.variable_renaming,
            Augmentation::CommentDeletion => self.comment_deletion,
            Augmentation::ComparisonMirroring => self.comparison_mirroring,
            Augmentation::IfElseBranchSwap => self.if_else_branch_swap,
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        for a in Augmentation::ALL {
            let p = self.setting(a).probability;
            if !(0.0..=1.0).contains(&p) {
                return Err(AugmentError::Probability(a, p));
            }
        }
        Ok(())
    }
}

/// Augment every function of a unit; the text is re-printed.
pub fn augment(u: &SourceUnit, cfg: &AugmentationConfig) -> Result<SourceUnit, AugmentError> {
    cfg.validate()?;
    let functions: Vec<SyntaxTree> = u
        .functions
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            augment_function(f, cfg, &mut rng)
        })
        .collect();
    Ok(SourceUnit { text: print_unit(&functions), functions })
}

pub fn augment_function(f: &SyntaxTree, cfg: &AugmentationConfig, rng: &mut impl Rng) -> SyntaxTree {
    let mut out = f.clone();
    for a in Augmentation::ALL {
        let s = cfg.setting(a);
        // draw even when disabled so toggling one flag does not reshuffle the others
        let fire = rng.gen::<f64>() < s.probability;
        if !(s.enabled && fire) {
            continue;
        }
        out = match a {
            Augmentation::VariableRenaming => rename_variable(&out, rng),
            Augmentation::CommentDeletion => delete_comments(&out),
            Augmentation::ComparisonMirroring => mirror_comparisons(&out),
            Augmentation::IfElseBranchSwap => swap_branches(&out),
        };
    }
    out
}

const FRESH_STEMS: [&str; 12] =
    ["value", "item", "tmp", "result", "acc", "cur", "elem", "total", "var", "data", "node", "entry"];

/// Rename one uniformly chosen local variable to a name not used in the function.
pub fn rename_variable(f: &SyntaxTree, rng: &mut impl Rng) -> SyntaxTree {
    let tbl = resolve_functions(std::slice::from_ref(f));
    let scope = &tbl.functions[0];
    let vars: Vec<usize> = scope.locals().filter(|&id| tbl.symbol(id).kind == SymbolKind::Variable).collect();
    let Some(&target) = vars.choose(rng) else { return f.clone() };
    let mut used = BTreeSet::new();
    f.walk(&mut |_, n| {
        if n.kind == NodeKind::Name {
            used.insert(n.lexeme().unwrap_or_default().to_string());
        }
    });
    let fresh = loop {
        let stem = FRESH_STEMS.choose(rng).expect("non-empty");
        let candidate = format!("{stem}_{}", rng.gen_range(0..1000));
        if !used.contains(&candidate) {
            break candidate;
        }
    };
    let mut out = f.clone();
    for (loc, &id) in &scope.occurrences {
        if id == target {
            if let Ok(n) = node_at_mut(&mut out, &loc.0) {
                if n.kind == NodeKind::Name {
                    n.token = Some(fresh.clone());
                }
            }
        }
    }
    out
}

fn node_at_mut<'a>(s: &'a mut SyntaxTree, path: &[u32]) -> Result<&'a mut SyntaxTree, ()> {
    let mut cur = s;
    for &i in path {
        cur = cur.children.get_mut(i as usize - 1).ok_or(())?;
    }
    Ok(cur)
}

/// Drop every comment and docstring.
pub fn delete_comments(f: &SyntaxTree) -> SyntaxTree {
    let mut out = f.clone();
    fn go(t: &mut SyntaxTree) {
        if t.kind == NodeKind::Block {
            t.children.retain(|s| !matches!(s.kind, NodeKind::Comment | NodeKind::Docstring));
        }
        t.children.iter_mut().for_each(go);
    }
    go(&mut out);
    out
}

fn mirrored(op: &str) -> Option<&'static str> {
    Some(match op {
        "<" => ">",
        ">" => "<",
        "<=" => ">=",
        ">=" => "<=",
        "==" => "==",
        "!=" => "!=",
        _ => return None,
    })
}

/// `a < b` becomes `b > a` for every order or equality comparison.
pub fn mirror_comparisons(f: &SyntaxTree) -> SyntaxTree {
    let mut out = f.clone();
    fn go(t: &mut SyntaxTree) {
        t.children.iter_mut().for_each(go);
        if t.kind == NodeKind::Compare {
            if let Some(m) = t.operator_str().and_then(mirrored) {
                t.children[1].token = Some(m.to_string());
                t.children.swap(0, 2);
            }
        }
    }
    go(&mut out);
    out
}

/// Logical negation, pushed through `and`/`or` by De Morgan's laws.
pub fn negate(e: &SyntaxTree) -> SyntaxTree {
    match (e.kind, e.operator_str()) {
        (NodeKind::BoolOp, Some(op)) => {
            let flipped = if op == "and" { "or" } else { "and" };
            SyntaxTree::node(
                NodeKind::BoolOp,
                vec![negate(&e.children[0]), SyntaxTree::operator(flipped), negate(&e.children[2])],
            )
        }
        (NodeKind::UnaryOp, Some("not")) => e.children[1].clone(),
        _ => SyntaxTree::node(NodeKind::UnaryOp, vec![SyntaxTree::operator("not"), e.clone()]),
    }
}

/// `if t: A else: B` becomes `if not t: B else: A` for every if/else.
pub fn swap_branches(f: &SyntaxTree) -> SyntaxTree {
    let mut out = f.clone();
    fn go(t: &mut SyntaxTree) {
        t.children.iter_mut().for_each(go);
        if t.kind == NodeKind::If && t.children.len() == 3 {
            t.children[0] = negate(&t.children[0]);
            t.children.swap(1, 2);
        }
    }
    go(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_function;
    use crate::lang::printer::print_function;

    #[test]
    fn mirroring() {
        let f = parse_function("def f(a, b):\n  return a < b\n").unwrap();
        assert_eq!(print_function(&mirror_comparisons(&f)), "def f(a, b):\n  return b > a\n");
    }

    #[test]
    fn branch_swap_uses_de_morgan() {
        let f = parse_function("def f(x, y):\n  if x and y:\n    return 1\n  else:\n    return 2\n").unwrap();
        assert_eq!(
            print_function(&swap_branches(&f)),
            "def f(x, y):\n  if not x or not y:\n    return 2\n  else:\n    return 1\n"
        );
    }

    #[test]
    fn comment_deletion_drops_docstring() {
        let f = parse_function("def f(x):\n  \"\"\"doc\"\"\"\n  return x\n").unwrap();
        let g = parse_function("def f(x):\n  return x\n").unwrap();
        assert_eq!(delete_comments(&f), g);
    }

    #[test]
    fn renaming_picks_fresh_name() {
        let f = parse_function("def f(a):\n  x = a\n  x += 1\n  return x\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = rename_variable(&f, &mut rng);
        let printed = print_function(&g);
        assert!(!printed.contains(" x "), "{printed}");
        assert!(printed.contains("(a)"));
    }

    #[test]
    fn probability_zero_is_identity() {
        let f = parse_function("def f(a, b):\n  # c\n  if a < b:\n    return a\n  else:\n    return b\n").unwrap();
        let cfg = AugmentationConfig::uniform(0.0, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(augment_function(&f, &cfg, &mut rng), f);
        assert!(AugmentationConfig::uniform(1.5, 0).validate().is_err());
    }
}
