//! P_tok: the projection of a code graph onto its token sequence.

use std::collections::BTreeSet;

use super::{CodeGraph, EntityKind, Relation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenProjection {
    pub token_sequence: Vec<usize>,
    pub projected_edges: Vec<(usize, Relation, usize)>,
    /// Token id for every entity id.
    pub projection_map: Vec<usize>,
}

/// Syntax nodes map to the first token below them, symbols to their first
/// occurrence, and argument names and documentation to the projection of
/// their first linked node. Self-loops and duplicate edges are dropped.
pub fn project_tokens(g: &CodeGraph) -> TokenProjection {
    let n = g.nodes.len();
    let token_sequence = g.token_ids();
    let mut map: Vec<Option<usize>> = g.nodes.iter().map(|e| (e.kind == EntityKind::Token).then_some(e.id)).collect();

    // children of syntax nodes always have larger ids for interior nodes, so
    // resolving in reverse id order sees every child first
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in g.edges_of(Relation::SyntaxChild) {
        children[a].push(b);
    }
    let syntax: Vec<usize> = g.nodes.iter().filter(|e| e.kind == EntityKind::SyntaxNode).map(|e| e.id).collect();
    for &s in syntax.iter().rev() {
        map[s] = children[s].iter().filter_map(|&c| map[c]).min();
    }
    // symbols: first occurrence
    for (occ, sym) in g.edges_of(Relation::OccurrenceOf) {
        if let Some(t) = map[occ] {
            map[sym] = Some(map[sym].map_or(t, |m: usize| m.min(t)));
        }
    }
    // formal argument names and documentation: first linked node
    for (src, dst) in g.edges_of(Relation::FormalArg).chain(g.edges_of(Relation::CallDoc)) {
        if let Some(t) = map[src] {
            map[dst] = Some(map[dst].map_or(t, |m: usize| m.min(t)));
        }
    }
    let first = token_sequence.first().copied().unwrap_or(0);
    let projection_map: Vec<usize> = map.into_iter().map(|m| m.unwrap_or(first)).collect();

    let mut seen = BTreeSet::new();
    let mut projected_edges = Vec::new();
    for &(a, r, b) in &g.edges {
        let (pa, pb) = (projection_map[a], projection_map[b]);
        if pa != pb && seen.insert((pa, r, pb)) {
            projected_edges.push((pa, r, pb));
        }
    }
    TokenProjection { token_sequence, projected_edges, projection_map }
}
