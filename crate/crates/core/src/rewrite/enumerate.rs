//! R_ρ(s): all bug-inducing rewrites of a function.

use crate::lang::symbols::{resolve_functions, FunctionScope, SymbolTable};
use crate::lang::tree::{NodeKind, SyntaxTree, TreeLocation};

use super::{literal_alternatives, OpClass, PotentialRewrite, RewriteRule, ToggleAction};

/// Candidates in canonical order. `s` is looked up in `tbl`; a function
/// missing from the table is resolved on its own.
pub fn enumerate_rewrites(s: &SyntaxTree, tbl: &SymbolTable) -> Vec<PotentialRewrite> {
    match tbl.scope_of(s) {
        Ok(scope) => enumerate_scope(scope, tbl),
        Err(_) => {
            let own = resolve_functions(std::slice::from_ref(s));
            enumerate_scope(&own.functions[0], &own)
        }
    }
}

/// Name leaves that may be replaced by another variable: loads of local
/// variables and parameters. Definitions (the function name, parameters and
/// plain assignment targets) are excluded.
pub fn var_misuse_locations(scope: &FunctionScope, tbl: &SymbolTable) -> Vec<TreeLocation> {
    let mut out = Vec::new();
    scope.root.walk(&mut |loc, n| {
        if n.kind == NodeKind::Name && is_var_misuse_location(scope, tbl, loc) {
            out.push(loc.clone());
        }
    });
    out
}

fn is_var_misuse_location(scope: &FunctionScope, tbl: &SymbolTable, loc: &TreeLocation) -> bool {
    let Some(id) = scope.symbol_at(loc) else { return false };
    if !tbl.is_variable_like(id) || loc.depth() < 2 {
        return false;
    }
    let parent = parent_kind(&scope.root, loc);
    !(parent == Some(NodeKind::Param) || (parent == Some(NodeKind::Assign) && loc.last_index() == Some(1)))
}

fn parent_kind(root: &SyntaxTree, loc: &TreeLocation) -> Option<NodeKind> {
    let p = loc.parent()?;
    crate::lang::tree::node_at(root, &p).ok().map(|n| n.kind)
}

/// Direct left/right operand of a boolean operator.
fn is_bool_operand(root: &SyntaxTree, loc: &TreeLocation) -> bool {
    parent_kind(root, loc) == Some(NodeKind::BoolOp) && matches!(loc.last_index(), Some(1) | Some(3))
}

pub fn enumerate_scope(scope: &FunctionScope, tbl: &SymbolTable) -> Vec<PotentialRewrite> {
    let root = &scope.root;
    let mut out = Vec::new();
    root.walk(&mut |loc, n| {
        let mut push = |rule: RewriteRule| out.push(PotentialRewrite::new(loc.clone(), rule));
        match n.kind {
            NodeKind::Name => {
                if is_var_misuse_location(scope, tbl, loc) {
                    let from = n.lexeme().unwrap_or_default();
                    for id in scope.in_scope_before(tbl, loc).unwrap_or_default() {
                        let to = &tbl.symbol(id).name;
                        if to != from {
                            push(RewriteRule::var_misuse(from, to));
                        }
                    }
                }
                if is_bool_operand(root, loc) {
                    push(RewriteRule::toggle(ToggleAction::InsertNot));
                }
            }
            NodeKind::Call => {
                let args = &n.children[1..];
                for i in 0..args.len() {
                    for j in i + 1..args.len() {
                        if args[i] != args[j] {
                            push(RewriteRule::arg_swap(i, j));
                        }
                    }
                }
                if is_bool_operand(root, loc) {
                    push(RewriteRule::toggle(ToggleAction::InsertNot));
                }
            }
            NodeKind::Operator => {
                let op = n.lexeme().unwrap_or_default();
                if let Some(class) = parent_kind(root, loc).and_then(|p| OpClass::of(p, op)) {
                    for &to in class.members() {
                        if to != op {
                            push(RewriteRule::operator(class, op, to));
                        }
                    }
                }
            }
            NodeKind::Literal => {
                if parent_kind(root, loc) != Some(NodeKind::Param) {
                    let from = n.lexeme().unwrap_or_default();
                    for to in literal_alternatives(from) {
                        push(RewriteRule::literal(from, to));
                    }
                }
            }
            NodeKind::UnaryOp => match n.operator_str() {
                Some("not")
                    if matches!(n.children[1].kind, NodeKind::Name | NodeKind::Call) && is_bool_operand(root, loc) =>
                {
                    push(RewriteRule::toggle(ToggleAction::RemoveNot));
                }
                Some("-") => push(RewriteRule::toggle(ToggleAction::RemoveNeg)),
                _ => {}
            },
            _ => {}
        }
    });
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse;
    use crate::lang::symbols::resolve_symbols;
    use crate::rewrite::RuleKind;

    fn rewrites(src: &str) -> Vec<PotentialRewrite> {
        let u = parse(src).unwrap();
        let tbl = resolve_symbols(&u);
        enumerate_rewrites(&u.functions[0], &tbl)
    }

    #[test]
    fn out_of_domain_literal_has_no_candidates() {
        assert!(rewrites("def f():\n  return 7\n").is_empty());
    }

    #[test]
    fn three_args_three_swaps() {
        let rs = rewrites("def f(x, y, z):\n  return g(x, y, z)\n");
        let swaps: Vec<String> =
            rs.iter().filter(|r| r.kind() == RuleKind::ArgSwap).map(|r| r.rule.payload_string()).collect();
        assert_eq!(swaps, ["0,1", "0,2", "1,2"]);
    }

    #[test]
    fn identical_arguments_are_not_swapped() {
        let rs = rewrites("def f(x):\n  return g(x, x)\n");
        assert!(rs.iter().all(|r| r.kind() != RuleKind::ArgSwap));
    }

    #[test]
    fn deterministic_and_sorted() {
        let src = "def f(a, b):\n  x = a + b\n  if x > 0 and a:\n    return -x\n  return b\n";
        let a = rewrites(src);
        let b = rewrites(src);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(a, sorted);
        assert!(a.iter().any(|r| r.rule.payload_string() == "remove:-"));
        assert!(a.iter().any(|r| r.rule.payload_string() == "insert:not"));
    }
}
