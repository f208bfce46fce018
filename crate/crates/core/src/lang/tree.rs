//! Syntax trees, tree locations and the grammar-position table.
//!
//! Child layout per node kind (1-based positions):
//!
//! | kind          | children                                            |
//! |---------------|-----------------------------------------------------|
//! | `FunctionDef` | `Name`, `Param`*, `Block`                           |
//! | `Param`       | `Name`, optional default `Literal`                  |
//! | `Block`       | statements (`Docstring`/`Comment` allowed anywhere) |
//! | `Assign`      | target (`Name`/`Attribute`), `Operator("=")`, expr  |
//! | `AugAssign`   | target, `Operator("+=" ...)`, expr                  |
//! | `If`          | test, then `Block`, optional else `Block`           |
//! | `While`       | test, `Block`                                       |
//! | `Return`      | expr+                                               |
//! | `ExprStmt`    | expr                                                |
//! | `Call`        | callee (`Name`/`Attribute`), args*                  |
//! | `Attribute`   | root `Name`, `Member`+                              |
//! | `BinaryOp`    | left, `Operator`, right                             |
//! | `BoolOp`      | left, `Operator`, right                             |
//! | `Compare`     | left, `Operator`, right                             |
//! | `UnaryOp`     | `Operator`, operand                                 |
//!
//! Leaves (`Name`, `Literal`, `Operator`, `Member`, `Docstring`, `Comment`)
//! carry their lexeme; interior nodes never do. Spans are source metadata
//! and are ignored by tree equality.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    FunctionDef,
    Param,
    Block,
    Assign,
    AugAssign,
    If,
    While,
    Return,
    ExprStmt,
    Call,
    Attribute,
    BinaryOp,
    BoolOp,
    Compare,
    UnaryOp,
    Name,
    Literal,
    Docstring,
    Comment,
    Operator,
    Member,
}

impl NodeKind {
    pub const ALL: [NodeKind; 21] = [
        NodeKind::FunctionDef,
        NodeKind::Param,
        NodeKind::Block,
        NodeKind::Assign,
        NodeKind::AugAssign,
        NodeKind::If,
        NodeKind::While,
        NodeKind::Return,
        NodeKind::ExprStmt,
        NodeKind::Call,
        NodeKind::Attribute,
        NodeKind::BinaryOp,
        NodeKind::BoolOp,
        NodeKind::Compare,
        NodeKind::UnaryOp,
        NodeKind::Name,
        NodeKind::Literal,
        NodeKind::Docstring,
        NodeKind::Comment,
        NodeKind::Operator,
        NodeKind::Member,
    ];

    pub fn is_leaf(self) -> bool {
        matches!(
            self,
            NodeKind::Name
                | NodeKind::Literal
                | NodeKind::Docstring
                | NodeKind::Comment
                | NodeKind::Operator
                | NodeKind::Member
        )
    }

    pub fn is_expression(self) -> bool {
        matches!(
            self,
            NodeKind::Call
                | NodeKind::Attribute
                | NodeKind::BinaryOp
                | NodeKind::BoolOp
                | NodeKind::Compare
                | NodeKind::UnaryOp
                | NodeKind::Name
                | NodeKind::Literal
        )
    }

    pub fn is_statement(self) -> bool {
        matches!(
            self,
            NodeKind::Assign
                | NodeKind::AugAssign
                | NodeKind::If
                | NodeKind::While
                | NodeKind::Return
                | NodeKind::ExprStmt
                | NodeKind::Docstring
                | NodeKind::Comment
        )
    }

    /// Statements that take part in control flow (trivia excluded).
    pub fn is_executable_statement(self) -> bool {
        self.is_statement() && !matches!(self, NodeKind::Docstring | NodeKind::Comment)
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::FunctionDef => "FunctionDef",
            NodeKind::Param => "Param",
            NodeKind::Block => "Block",
            NodeKind::Assign => "Assign",
            NodeKind::AugAssign => "AugAssign",
            NodeKind::If => "If",
            NodeKind::While => "While",
            NodeKind::Return => "Return",
            NodeKind::ExprStmt => "ExprStmt",
            NodeKind::Call => "Call",
            NodeKind::Attribute => "Attribute",
            NodeKind::BinaryOp => "BinaryOp",
            NodeKind::BoolOp => "BoolOp",
            NodeKind::Compare => "Compare",
            NodeKind::UnaryOp => "UnaryOp",
            NodeKind::Name => "Name",
            NodeKind::Literal => "Literal",
            NodeKind::Docstring => "Docstring",
            NodeKind::Comment => "Comment",
            NodeKind::Operator => "Operator",
            NodeKind::Member => "Member",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const ARITHMETIC_OPS: [&str; 6] = ["+", "-", "*", "/", "//", "%"];
pub const COMPARISON_OPS: [&str; 6] = ["<", "<=", ">", ">=", "==", "!="];
pub const MEMBERSHIP_OPS: [&str; 2] = ["in", "not in"];
pub const IDENTITY_OPS: [&str; 2] = ["is", "is not"];
pub const BOOLEAN_OPS: [&str; 2] = ["and", "or"];
pub const ASSIGN_OPS: [&str; 7] = ["=", "+=", "-=", "*=", "/=", "//=", "%="];
pub const UNARY_OPS: [&str; 2] = ["not", "-"];

pub fn is_compare_op(op: &str) -> bool {
    COMPARISON_OPS.contains(&op) || MEMBERSHIP_OPS.contains(&op) || IDENTITY_OPS.contains(&op)
}

/// Byte range in the source text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntaxTree {
    pub kind: NodeKind,
    pub children: Vec<SyntaxTree>,
    pub token: Option<String>,
    #[serde(default)]
    pub span: Span,
}

impl PartialEq for SyntaxTree {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.token == other.token && self.children == other.children
    }
}

impl Eq for SyntaxTree {}

impl SyntaxTree {
    pub fn leaf(kind: NodeKind, token: impl Into<String>) -> Self {
        debug_assert!(kind.is_leaf());
        SyntaxTree { kind, children: Vec::new(), token: Some(token.into()), span: Span::default() }
    }

    pub fn node(kind: NodeKind, children: Vec<SyntaxTree>) -> Self {
        debug_assert!(!kind.is_leaf());
        SyntaxTree { kind, children, token: None, span: Span::default() }
    }

    pub fn with_span(mut self, span: Span) -> Self {
        self.span = span;
        self
    }

    pub fn name(id: &str) -> Self {
        Self::leaf(NodeKind::Name, id)
    }

    pub fn literal(lexeme: &str) -> Self {
        Self::leaf(NodeKind::Literal, lexeme)
    }

    pub fn operator(op: &str) -> Self {
        Self::leaf(NodeKind::Operator, op)
    }

    pub fn lexeme(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn is_leaf(&self) -> bool {
        self.kind.is_leaf()
    }

    /// Number of nodes in the subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(SyntaxTree::size).sum::<usize>()
    }

    /// Lexeme of a `Name` leaf.
    pub fn name_str(&self) -> Option<&str> {
        (self.kind == NodeKind::Name).then(|| self.token.as_deref()).flatten()
    }

    /// Operator lexeme of a binary/boolean/compare/unary/assign node.
    pub fn operator_str(&self) -> Option<&str> {
        let idx = match self.kind {
            NodeKind::UnaryOp => 0,
            NodeKind::BinaryOp
            | NodeKind::BoolOp
            | NodeKind::Compare
            | NodeKind::Assign
            | NodeKind::AugAssign => 1,
            _ => return None,
        };
        self.children.get(idx).and_then(|c| c.token.as_deref())
    }

    /// Visit every node in preorder together with its location.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&TreeLocation, &'a SyntaxTree)) {
        let mut loc = TreeLocation::root();
        self.walk_inner(&mut loc, f);
    }

    fn walk_inner<'a>(
        &'a self,
        loc: &mut TreeLocation,
        f: &mut impl FnMut(&TreeLocation, &'a SyntaxTree),
    ) {
        f(loc, self);
        for (i, child) in self.children.iter().enumerate() {
            loc.0.push(i as u32 + 1);
            child.walk_inner(loc, f);
            loc.0.pop();
        }
    }

    /// All locations in preorder.
    pub fn locations(&self) -> Vec<TreeLocation> {
        let mut out = Vec::new();
        self.walk(&mut |loc, _| out.push(loc.clone()));
        out
    }

    /// Strip span metadata, e.g. before comparing serialized trees.
    pub fn without_spans(&self) -> SyntaxTree {
        SyntaxTree {
            kind: self.kind,
            children: self.children.iter().map(SyntaxTree::without_spans).collect(),
            token: self.token.clone(),
            span: Span::default(),
        }
    }

    /// Name of a `FunctionDef`.
    pub fn function_name(&self) -> Option<&str> {
        if self.kind != NodeKind::FunctionDef {
            return None;
        }
        self.children.first().and_then(SyntaxTree::name_str)
    }

    /// Parameters of a `FunctionDef`.
    pub fn params(&self) -> &[SyntaxTree] {
        if self.kind != NodeKind::FunctionDef || self.children.len() < 2 {
            return &[];
        }
        &self.children[1..self.children.len() - 1]
    }

    /// Body block of a `FunctionDef`.
    pub fn body(&self) -> Option<&SyntaxTree> {
        if self.kind != NodeKind::FunctionDef {
            return None;
        }
        self.children.last().filter(|c| c.kind == NodeKind::Block)
    }

    /// Docstring text of a `FunctionDef` whose body opens with one.
    pub fn docstring(&self) -> Option<&str> {
        self.body()?
            .children
            .first()
            .filter(|s| s.kind == NodeKind::Docstring)
            .and_then(|s| s.token.as_deref())
    }
}

/// A path of 1-based child indices; the empty path addresses the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreeLocation(pub Vec<u32>);

impl TreeLocation {
    pub fn root() -> Self {
        TreeLocation(Vec::new())
    }

    pub fn new(path: impl Into<Vec<u32>>) -> Self {
        TreeLocation(path.into())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, index: u32) -> Self {
        let mut p = self.0.clone();
        p.push(index);
        TreeLocation(p)
    }

    pub fn parent(&self) -> Option<TreeLocation> {
        if self.0.is_empty() {
            None
        } else {
            Some(TreeLocation(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn last_index(&self) -> Option<u32> {
        self.0.last().copied()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_prefix_of(&self, other: &TreeLocation) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }
}

impl fmt::Display for TreeLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        f.write_str("(")?;
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{idx}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocationError {
    /// `depth` is the 0-based position in the path of the offending index.
    #[error("invalid tree location: index {index} at depth {depth} is out of range (node has {available} children)")]
    InvalidPath { depth: usize, index: u32, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplaceError {
    #[error(transparent)]
    Location(#[from] LocationError),
    #[error("a {child} node is not allowed at child position {position} of a {parent} node")]
    GrammarPosition { parent: NodeKind, position: u32, child: NodeKind },
}

/// `s[ℓ]`.
pub fn node_at<'a>(s: &'a SyntaxTree, loc: &TreeLocation) -> Result<&'a SyntaxTree, LocationError> {
    let mut cur = s;
    for (depth, &idx) in loc.0.iter().enumerate() {
        if idx == 0 || idx as usize > cur.children.len() {
            return Err(LocationError::InvalidPath { depth, index: idx, available: cur.children.len() });
        }
        cur = &cur.children[idx as usize - 1];
    }
    Ok(cur)
}

/// Returns a copy of `s` with the subtree at `loc` replaced by `t`, after
/// checking that `t` may occupy that grammar position.
pub fn replace_at(s: &SyntaxTree, loc: &TreeLocation, t: SyntaxTree) -> Result<SyntaxTree, ReplaceError> {
    node_at(s, loc)?;
    if let Some(parent_loc) = loc.parent() {
        let parent = node_at(s, &parent_loc)?;
        let pos = loc.last_index().expect("non-root location");
        if !slot_accepts(parent, pos, &t) {
            return Err(ReplaceError::GrammarPosition { parent: parent.kind, position: pos, child: t.kind });
        }
    }
    Ok(replace_unchecked(s, loc, t))
}

/// Structural replacement without the grammar check. The location must be valid.
pub(crate) fn replace_unchecked(s: &SyntaxTree, loc: &TreeLocation, t: SyntaxTree) -> SyntaxTree {
    fn go(s: &SyntaxTree, path: &[u32], t: SyntaxTree) -> SyntaxTree {
        match path.split_first() {
            None => t,
            Some((&idx, rest)) => {
                let mut out = SyntaxTree {
                    kind: s.kind,
                    children: Vec::with_capacity(s.children.len()),
                    token: s.token.clone(),
                    span: s.span,
                };
                let mut t = Some(t);
                for (i, c) in s.children.iter().enumerate() {
                    if i + 1 == idx as usize {
                        out.children.push(go(c, rest, t.take().expect("single replacement")));
                    } else {
                        out.children.push(c.clone());
                    }
                }
                out
            }
        }
    }
    go(s, &loc.0, t)
}

/// Whether `t` is legal as child number `position` (1-based) of `parent`.
pub fn slot_accepts(parent: &SyntaxTree, position: u32, t: &SyntaxTree) -> bool {
    let n = parent.children.len() as u32;
    let k = t.kind;
    let op_in = |set: &[&str]| k == NodeKind::Operator && t.token.as_deref().is_some_and(|o| set.contains(&o));
    let target = matches!(k, NodeKind::Name | NodeKind::Attribute);
    match parent.kind {
        NodeKind::FunctionDef => {
            if position == 1 {
                k == NodeKind::Name
            } else if position == n {
                k == NodeKind::Block
            } else {
                k == NodeKind::Param
            }
        }
        NodeKind::Param => match position {
            1 => k == NodeKind::Name,
            _ => k == NodeKind::Literal,
        },
        NodeKind::Block => k.is_statement() && !is_bare_string_stmt(t),
        NodeKind::Assign => match position {
            1 => target,
            2 => op_in(&["="]),
            _ => k.is_expression(),
        },
        NodeKind::AugAssign => match position {
            1 => target,
            2 => op_in(&ASSIGN_OPS[1..]),
            _ => k.is_expression(),
        },
        NodeKind::If | NodeKind::While => match position {
            1 => k.is_expression(),
            _ => k == NodeKind::Block,
        },
        NodeKind::Return | NodeKind::ExprStmt => k.is_expression(),
        NodeKind::Call => match position {
            1 => target,
            _ => k.is_expression(),
        },
        NodeKind::Attribute => match position {
            1 => k == NodeKind::Name,
            _ => k == NodeKind::Member,
        },
        NodeKind::BinaryOp => match position {
            2 => op_in(&ARITHMETIC_OPS),
            _ => k.is_expression(),
        },
        NodeKind::BoolOp => match position {
            2 => op_in(&BOOLEAN_OPS),
            _ => k.is_expression(),
        },
        NodeKind::Compare => match position {
            2 => k == NodeKind::Operator && t.token.as_deref().is_some_and(is_compare_op),
            _ => k.is_expression(),
        },
        NodeKind::UnaryOp => match position {
            1 => op_in(&UNARY_OPS),
            _ => k.is_expression(),
        },
        // leaves have no child positions
        _ => false,
    }
}

/// A string-literal expression statement is always parsed as a `Docstring`,
/// so an `ExprStmt` wrapping one could never round-trip.
fn is_bare_string_stmt(t: &SyntaxTree) -> bool {
    t.kind == NodeKind::ExprStmt
        && t.children.first().is_some_and(|c| {
            c.kind == NodeKind::Literal && c.token.as_deref().is_some_and(is_string_lexeme)
        })
}

pub fn is_string_lexeme(lexeme: &str) -> bool {
    lexeme.starts_with('"') || lexeme.starts_with('\'')
}

/// Integer value of an int literal lexeme such as `-1` or `42`.
pub fn int_literal_value(lexeme: &str) -> Option<i64> {
    let digits = lexeme.strip_prefix('-').unwrap_or(lexeme);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    lexeme.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SyntaxTree {
        // f(a): return a + 1
        SyntaxTree::node(
            NodeKind::FunctionDef,
            vec![
                SyntaxTree::name("f"),
                SyntaxTree::node(NodeKind::Param, vec![SyntaxTree::name("a")]),
                SyntaxTree::node(
                    NodeKind::Block,
                    vec![SyntaxTree::node(
                        NodeKind::Return,
                        vec![SyntaxTree::node(
                            NodeKind::BinaryOp,
                            vec![SyntaxTree::name("a"), SyntaxTree::operator("+"), SyntaxTree::literal("1")],
                        )],
                    )],
                ),
            ],
        )
    }

    #[test]
    fn root_location_is_identity() {
        let s = sample();
        assert_eq!(node_at(&s, &TreeLocation::root()).unwrap(), &s);
    }

    #[test]
    fn nested_location() {
        let s = sample();
        let n = node_at(&s, &TreeLocation::new([3, 1, 1, 3])).unwrap();
        assert_eq!(n.lexeme(), Some("1"));
    }

    #[test]
    fn leaf_has_no_children() {
        let s = sample();
        let err = node_at(&s, &TreeLocation::new([1, 1])).unwrap_err();
        assert_eq!(err, LocationError::InvalidPath { depth: 1, index: 1, available: 0 });
        assert!(node_at(&s, &TreeLocation::new([0])).is_err());
        assert!(node_at(&s, &TreeLocation::new([4])).is_err());
    }

    #[test]
    fn replacement_preserves_input_and_siblings() {
        let s = sample();
        let loc = TreeLocation::new([3, 1, 1, 3]);
        let out = replace_at(&s, &loc, SyntaxTree::literal("2")).unwrap();
        assert_eq!(node_at(&s, &loc).unwrap().lexeme(), Some("1"));
        assert_eq!(node_at(&out, &loc).unwrap().lexeme(), Some("2"));
        assert_eq!(out.children[0], s.children[0]);
        assert_eq!(out.size(), s.size());
    }

    #[test]
    fn grammar_violation_is_rejected() {
        let s = sample();
        let err = replace_at(&s, &TreeLocation::new([3, 1, 1, 2]), SyntaxTree::operator("<")).unwrap_err();
        assert!(matches!(err, ReplaceError::GrammarPosition { parent: NodeKind::BinaryOp, .. }));
        let err = replace_at(&s, &TreeLocation::new([1]), SyntaxTree::literal("3")).unwrap_err();
        assert!(matches!(err, ReplaceError::GrammarPosition { parent: NodeKind::FunctionDef, .. }));
    }

    #[test]
    fn location_display() {
        assert_eq!(TreeLocation::root().to_string(), "ε");
        assert_eq!(TreeLocation::new([2, 3]).to_string(), "(2,3)");
    }

    #[test]
    fn int_literals() {
        assert_eq!(int_literal_value("-2"), Some(-2));
        assert_eq!(int_literal_value("7"), Some(7));
        assert_eq!(int_literal_value("True"), None);
        assert_eq!(int_literal_value("-"), None);
    }
}
