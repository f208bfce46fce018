//! Heterogeneous program graphs and their token projection.

mod extract;
pub mod flow;
mod io;
mod projection;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lang::tree::TreeLocation;
use crate::rewrite::{PotentialRewrite, RuleKind};

pub use extract::{extract_graph, location_node_ids, GraphInputs};
pub use io::{deserialize_graph, read_graphs, serialize_graph, write_graphs, GraphError};
pub use projection::{project_tokens, TokenProjection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Token,
    SyntaxNode,
    Symbol,
    Subtoken,
    FormalArgName,
    Documentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    NextToken,
    SyntaxChild,
    SyntaxNextSibling,
    CallDoc,
    FormalArg,
    ControlFlowNext,
    AssignedFrom,
    ReturnsFrom,
    OccurrenceOf,
    LastMayUse,
    LastMayWrite,
    MayFinalUseOf,
}

impl Relation {
    pub const ALL: [Relation; 12] = [
        Relation::NextToken,
        Relation::SyntaxChild,
        Relation::SyntaxNextSibling,
        Relation::CallDoc,
        Relation::FormalArg,
        Relation::ControlFlowNext,
        Relation::AssignedFrom,
        Relation::ReturnsFrom,
        Relation::OccurrenceOf,
        Relation::LastMayUse,
        Relation::LastMayWrite,
        Relation::MayFinalUseOf,
    ];

    pub fn index(self) -> usize {
        Relation::ALL.iter().position(|r| *r == self).expect("listed")
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: usize,
    pub kind: EntityKind,
    pub label: String,
}

pub type Edge = (usize, Relation, usize);

/// A rewrite the model may predict, anchored at a graph node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphCandidate {
    pub rewrite: PotentialRewrite,
    pub node_id: usize,
    /// Rule metadata: the replacement Symbol for `VarMisuse`, the two
    /// argument nodes for `ArgSwap`, empty otherwise.
    pub meta: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeGraph {
    pub nodes: Vec<Entity>,
    pub edges: Vec<Edge>,
    pub candidates: Vec<GraphCandidate>,
    /// Reserved id (one past the last node) standing for NoBug.
    pub nobug_id: usize,
    /// Repair target; `None` means the snippet is bug-free.
    pub target: Option<PotentialRewrite>,
    /// Free-form provenance of the sample, e.g. `file.py:function`.
    pub origin: Option<String>,
}

impl CodeGraph {
    /// Node id of each candidate location.
    pub fn candidate_index(&self) -> BTreeMap<TreeLocation, usize> {
        self.candidates.iter().map(|c| (c.rewrite.location.clone(), c.node_id)).collect()
    }

    /// Distinct candidate locations in canonical order with their node ids.
    pub fn locations(&self) -> Vec<(TreeLocation, usize)> {
        self.candidate_index().into_iter().collect()
    }

    pub fn candidates_at(&self, loc: &TreeLocation) -> Vec<usize> {
        (0..self.candidates.len()).filter(|&i| &self.candidates[i].rewrite.location == loc).collect()
    }

    /// Index of the target among the candidates; `None` for NoBug targets.
    pub fn target_index(&self) -> Option<usize> {
        let t = self.target.as_ref()?;
        self.candidates.iter().position(|c| &c.rewrite == t)
    }

    pub fn is_buggy(&self) -> bool {
        self.target.as_ref().is_some_and(|t| !t.is_identity())
    }

    pub fn bug_kind(&self) -> Option<RuleKind> {
        self.target.as_ref().filter(|t| !t.is_identity()).map(|t| t.kind())
    }

    pub fn token_ids(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.kind == EntityKind::Token).map(|n| n.id).collect()
    }

    pub fn edges_of(&self, rel: Relation) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().filter(move |e| e.1 == rel).map(|e| (e.0, e.2))
    }

    /// Node and edge counts per kind, for size telemetry.
    pub fn size_summary(&self) -> (usize, usize) {
        (self.nodes.len(), self.edges.len())
    }
}

/// Split an identifier-like label into lowercase subtokens: on
/// non-alphanumeric characters and on lower-to-upper case transitions
/// (`fooBar_baz` gives `foo`, `bar`, `baz`). Labels without any
/// alphanumeric character (operators, punctuation) are a single subtoken.
pub fn subtokens(label: &str) -> Vec<String> {
    if label.is_empty() {
        return Vec::new();
    }
    if !label.chars().any(char::is_alphanumeric) {
        return vec![label.to_string()];
    }
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = label.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let prev = if i > 0 { Some(chars[i - 1]) } else { None };
        let next = chars.get(i + 1).copied();
        let boundary = c.is_uppercase()
            && prev.is_some_and(|p| {
                p.is_lowercase() || p.is_ascii_digit() || (p.is_uppercase() && next.is_some_and(char::is_lowercase))
            });
        if boundary && !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtoken_splitting() {
        assert_eq!(subtokens("fooBar_baz"), ["foo", "bar", "baz"]);
        assert_eq!(subtokens("c_is_neg"), ["c", "is", "neg"]);
        assert_eq!(subtokens("HTTPServer"), ["http", "server"]);
        assert_eq!(subtokens("+="), ["+="]);
        assert_eq!(subtokens("not in"), ["not", "in"]);
        assert!(subtokens("").is_empty());
    }
}
