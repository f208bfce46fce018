//! Graph extraction for one function.
//!
//! Node ids are assigned in a fixed order: tokens in source order, then
//! interior syntax nodes in preorder, symbols, formal argument names and
//! finally documentation entities. Leaf syntax nodes are represented by
//! their token.

use std::collections::BTreeMap;

use crate::lang::printer::emit_tokens;
use crate::lang::symbols::{FunctionScope, SymbolId, SymbolTable};
use crate::lang::tree::{NodeKind, SyntaxTree, TreeLocation};
use crate::rewrite::{Payload, PotentialRewrite};

use super::flow::{build_cfg, dataflow, CfgTarget};
use super::{CodeGraph, Edge, Entity, EntityKind, GraphCandidate, Relation};

pub struct GraphInputs<'a> {
    pub scope: &'a FunctionScope,
    pub table: &'a SymbolTable,
    /// All functions of the unit, indexed like `table.function_symbols`.
    pub unit: &'a [SyntaxTree],
    pub candidates: &'a [PotentialRewrite],
    pub target: Option<&'a PotentialRewrite>,
}

/// Node id of every tree location (leaves map to their token).
pub fn location_node_ids(f: &SyntaxTree) -> BTreeMap<TreeLocation, usize> {
    let tokens = emit_tokens(f);
    let mut ids = BTreeMap::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.leaf {
            ids.insert(t.owner.clone(), i);
        }
    }
    let mut next = tokens.len();
    f.walk(&mut |loc, n| {
        if !n.is_leaf() {
            ids.insert(loc.clone(), next);
            next += 1;
        }
    });
    ids
}

fn strip_quotes(doc: &str) -> &str {
    let d = doc.trim();
    for q in ["\"\"\"", "'''", "\"", "'"] {
        if d.len() >= 2 * q.len() && d.starts_with(q) && d.ends_with(q) {
            return d[q.len()..d.len() - q.len()].trim();
        }
    }
    d
}

pub fn extract_graph(inp: &GraphInputs<'_>) -> CodeGraph {
    let f = &inp.scope.root;
    let tbl = inp.table;
    let tokens = emit_tokens(f);
    let node_of = location_node_ids(f);
    let mut nodes: Vec<Entity> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();

    for t in &tokens {
        nodes.push(Entity { id: nodes.len(), kind: EntityKind::Token, label: t.text.clone() });
    }
    let mut interior: Vec<(TreeLocation, &SyntaxTree)> = Vec::new();
    f.walk(&mut |loc, n| {
        if !n.is_leaf() {
            interior.push((loc.clone(), n));
        }
    });
    for (_, n) in &interior {
        nodes.push(Entity { id: nodes.len(), kind: EntityKind::SyntaxNode, label: n.kind.name().to_string() });
    }

    // symbols referenced in the function, plus replacement variables that no longer occur
    let mut symbol_node: BTreeMap<SymbolId, usize> = BTreeMap::new();
    let mut referenced: Vec<SymbolId> = inp.scope.occurrences.values().copied().collect();
    referenced.extend(inp.scope.locals());
    referenced.sort_unstable();
    referenced.dedup();
    for id in referenced {
        symbol_node.insert(id, nodes.len());
        nodes.push(Entity { id: nodes.len(), kind: EntityKind::Symbol, label: tbl.symbol(id).name.clone() });
    }
    let mut local_by_name: BTreeMap<String, usize> = BTreeMap::new();
    for id in inp.scope.locals() {
        local_by_name.insert(tbl.symbol(id).name.clone(), symbol_node[&id]);
    }
    let mut all_candidates: Vec<PotentialRewrite> = inp.candidates.to_vec();
    if let Some(t) = inp.target.filter(|t| !t.is_identity()) {
        if !all_candidates.contains(t) {
            // the repair is not an enumerable rewrite of the buggy code
            all_candidates.push(t.clone());
        }
    }
    for c in &all_candidates {
        if let Payload::Variable { to, .. } = &c.rule.payload {
            if !local_by_name.contains_key(to) {
                local_by_name.insert(to.clone(), nodes.len());
                nodes.push(Entity { id: nodes.len(), kind: EntityKind::Symbol, label: to.clone() });
            }
        }
    }

    // NextToken
    for i in 1..tokens.len() {
        edges.push((i - 1, Relation::NextToken, i));
    }
    // SyntaxChild and SyntaxNextSibling
    let mut owned: BTreeMap<&TreeLocation, Vec<usize>> = BTreeMap::new();
    for (i, t) in tokens.iter().enumerate() {
        if !t.leaf {
            owned.entry(&t.owner).or_default().push(i);
        }
    }
    for (loc, n) in &interior {
        let me = node_of[loc];
        let mut children: Vec<usize> = (0..n.children.len()).map(|i| node_of[&loc.child(i as u32 + 1)]).collect();
        for w in children.windows(2) {
            edges.push((w[0], Relation::SyntaxNextSibling, w[1]));
        }
        children.extend(owned.get(loc).into_iter().flatten().copied());
        children.sort_unstable();
        for c in children {
            edges.push((me, Relation::SyntaxChild, c));
        }
    }

    // calls to functions defined in the unit
    let mut formal_nodes: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut doc_nodes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut call_edges: Vec<Edge> = Vec::new();
    for (loc, n) in &interior {
        if n.kind != NodeKind::Call || n.children[0].kind != NodeKind::Name {
            continue;
        }
        let Some(sym) = inp.scope.symbol_at(&loc.child(1)) else { continue };
        let Some(fi) = tbl.function_symbols.iter().position(|&s| s == sym) else { continue };
        let Some(callee) = inp.unit.get(fi) else { continue };
        let params = callee.params();
        for (ai, _) in n.children[1..].iter().enumerate() {
            let Some(p) = params.get(ai) else { break };
            let key = (fi, ai);
            let fid = *formal_nodes.entry(key).or_insert_with(|| {
                nodes.push(Entity {
                    id: nodes.len(),
                    kind: EntityKind::FormalArgName,
                    label: p.children[0].lexeme().unwrap_or_default().to_string(),
                });
                nodes.len() - 1
            });
            call_edges.push((node_of[&loc.child(ai as u32 + 2)], Relation::FormalArg, fid));
        }
        if let Some(doc) = callee.docstring() {
            let did = *doc_nodes.entry(fi).or_insert_with(|| {
                nodes.push(Entity {
                    id: nodes.len(),
                    kind: EntityKind::Documentation,
                    label: strip_quotes(doc).to_string(),
                });
                nodes.len() - 1
            });
            call_edges.push((node_of[loc], Relation::CallDoc, did));
        }
    }
    call_edges.sort_by_key(|e| (e.1, e.0, e.2));
    edges.extend(call_edges);

    // control flow
    let cfg = build_cfg(inp.scope, tbl);
    for (i, succ) in cfg.succ.iter().enumerate() {
        for t in succ {
            if let CfgTarget::Stmt(j) = t {
                edges.push((node_of[&cfg.stmts[i]], Relation::ControlFlowNext, node_of[&cfg.stmts[*j]]));
            }
        }
    }
    // AssignedFrom and ReturnsFrom
    for (loc, n) in &interior {
        match n.kind {
            NodeKind::Assign | NodeKind::AugAssign => {
                edges.push((node_of[&loc.child(1)], Relation::AssignedFrom, node_of[&loc.child(3)]));
            }
            NodeKind::Return => edges.push((node_of[&TreeLocation::root()], Relation::ReturnsFrom, node_of[loc])),
            _ => {}
        }
    }
    // OccurrenceOf
    for (loc, &sym) in &inp.scope.occurrences {
        let node = crate::lang::tree::node_at(f, loc).expect("occurrence location");
        let attribute_root = node.kind == NodeKind::Name
            && loc.last_index() == Some(1)
            && loc.parent().is_some_and(|p| crate::lang::tree::node_at(f, &p).is_ok_and(|a| a.kind == NodeKind::Attribute));
        if attribute_root {
            continue;
        }
        edges.push((node_of[loc], Relation::OccurrenceOf, symbol_node[&sym]));
    }
    // dataflow
    let facts = dataflow(&cfg);
    for (a, b) in &facts.last_may_use {
        edges.push((node_of[a], Relation::LastMayUse, node_of[b]));
    }
    for (a, b) in &facts.last_may_write {
        edges.push((node_of[a], Relation::LastMayWrite, node_of[b]));
    }
    for (a, sym) in &facts.may_final_use {
        edges.push((node_of[a], Relation::MayFinalUseOf, symbol_node[sym]));
    }

    let candidates = all_candidates
        .into_iter()
        .map(|rw| {
            let node_id = node_of.get(&rw.location).copied().unwrap_or(node_of[&TreeLocation::root()]);
            let meta = match &rw.rule.payload {
                Payload::Variable { to, .. } => vec![local_by_name[to]],
                Payload::Swap(i, j) => vec![
                    node_of.get(&rw.location.child(*i as u32 + 2)).copied().unwrap_or(node_id),
                    node_of.get(&rw.location.child(*j as u32 + 2)).copied().unwrap_or(node_id),
                ],
                _ => Vec::new(),
            };
            GraphCandidate { rewrite: rw, node_id, meta }
        })
        .collect();

    let nobug_id = nodes.len();
    CodeGraph { nodes, edges, candidates, nobug_id, target: inp.target.cloned(), origin: None }
}
