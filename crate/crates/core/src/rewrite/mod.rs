//! Bug-inducing rewrite rules and augmentation rewrites.
//!
//! A rule is a matcher/transform pair over a subtree. Rules are instantiated
//! at tree locations as [`PotentialRewrite`]s; every bug rule has an inverse
//! that, applied at the same location of the rewritten tree, restores the
//! original.

pub mod augment;
mod enumerate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::tree::{
    node_at, replace_at, NodeKind, ReplaceError, SyntaxTree, TreeLocation, ARITHMETIC_OPS, ASSIGN_OPS, BOOLEAN_OPS,
    COMPARISON_OPS, IDENTITY_OPS, MEMBERSHIP_OPS,
};

pub use augment::{augment, augment_function, Augmentation, AugmentationConfig, AugmentationSetting};
pub use enumerate::{enumerate_rewrites, enumerate_scope, var_misuse_locations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleKind {
    VarMisuse,
    ArgSwap,
    WrongBinaryOp,
    WrongBooleanOp,
    WrongComparisonOp,
    WrongAssignOp,
    UnaryNegToggle,
    WrongLiteral,
    Identity,
}

impl RuleKind {
    pub const ALL: [RuleKind; 9] = [
        RuleKind::VarMisuse,
        RuleKind::ArgSwap,
        RuleKind::WrongBinaryOp,
        RuleKind::WrongBooleanOp,
        RuleKind::WrongComparisonOp,
        RuleKind::WrongAssignOp,
        RuleKind::UnaryNegToggle,
        RuleKind::WrongLiteral,
        RuleKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::VarMisuse => "VarMisuse",
            RuleKind::ArgSwap => "ArgSwap",
            RuleKind::WrongBinaryOp => "WrongBinaryOp",
            RuleKind::WrongBooleanOp => "WrongBooleanOp",
            RuleKind::WrongComparisonOp => "WrongComparisonOp",
            RuleKind::WrongAssignOp => "WrongAssignOp",
            RuleKind::UnaryNegToggle => "UnaryNegToggle",
            RuleKind::WrongLiteral => "WrongLiteral",
            RuleKind::Identity => "Identity",
        }
    }

    pub fn is_operator_rule(self) -> bool {
        matches!(
            self,
            RuleKind::WrongBinaryOp | RuleKind::WrongBooleanOp | RuleKind::WrongComparisonOp | RuleKind::WrongAssignOp
        )
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = RewriteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| RewriteError::BadPayload(format!("unknown rule kind '{s}'")))
    }
}

/// Operator compatibility classes; rewrites never cross classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpClass {
    Arithmetic,
    Comparison,
    Membership,
    IdentityTest,
    Boolean,
    Assignment,
}

impl OpClass {
    pub fn members(self) -> &'static [&'static str] {
        match self {
            OpClass::Arithmetic => &ARITHMETIC_OPS,
            OpClass::Comparison => &COMPARISON_OPS,
            OpClass::Membership => &MEMBERSHIP_OPS,
            OpClass::IdentityTest => &IDENTITY_OPS,
            OpClass::Boolean => &BOOLEAN_OPS,
            OpClass::Assignment => &ASSIGN_OPS,
        }
    }

    pub fn rule_kind(self) -> RuleKind {
        match self {
            OpClass::Arithmetic => RuleKind::WrongBinaryOp,
            OpClass::Comparison | OpClass::Membership | OpClass::IdentityTest => RuleKind::WrongComparisonOp,
            OpClass::Boolean => RuleKind::WrongBooleanOp,
            OpClass::Assignment => RuleKind::WrongAssignOp,
        }
    }

    /// Class of an operator in the given syntactic role.
    pub fn of(parent: NodeKind, op: &str) -> Option<OpClass> {
        let class = match parent {
            NodeKind::BinaryOp => OpClass::Arithmetic,
            NodeKind::BoolOp => OpClass::Boolean,
            NodeKind::Assign | NodeKind::AugAssign => OpClass::Assignment,
            NodeKind::Compare => [OpClass::Comparison, OpClass::Membership, OpClass::IdentityTest]
                .into_iter()
                .find(|c| c.members().contains(&op))?,
            _ => return None,
        };
        class.members().contains(&op).then_some(class)
    }

    /// Class containing both operators, if any.
    pub fn shared(a: &str, b: &str) -> Option<OpClass> {
        [
            OpClass::Arithmetic,
            OpClass::Comparison,
            OpClass::Membership,
            OpClass::IdentityTest,
            OpClass::Boolean,
            OpClass::Assignment,
        ]
        .into_iter()
        .find(|c| c.members().contains(&a) && c.members().contains(&b))
    }
}

/// Literal values a literal rewrite may produce, in canonical order.
pub const INT_LITERAL_DOMAIN: [&str; 5] = ["-2", "-1", "0", "1", "2"];
pub const BOOL_LITERAL_DOMAIN: [&str; 2] = ["True", "False"];

pub fn literal_in_domain(lexeme: &str) -> bool {
    INT_LITERAL_DOMAIN.contains(&lexeme) || BOOL_LITERAL_DOMAIN.contains(&lexeme)
}

/// The replacement set for a literal lexeme (excluding itself).
pub fn literal_alternatives(lexeme: &str) -> Vec<&'static str> {
    let domain: &[&'static str] = if INT_LITERAL_DOMAIN.contains(&lexeme) {
        &INT_LITERAL_DOMAIN
    } else if BOOL_LITERAL_DOMAIN.contains(&lexeme) {
        &BOOL_LITERAL_DOMAIN
    } else {
        return Vec::new();
    };
    domain.iter().copied().filter(|v| *v != lexeme).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToggleAction {
    InsertNot,
    RemoveNot,
    InsertNeg,
    RemoveNeg,
}

impl ToggleAction {
    pub const ALL: [ToggleAction; 4] =
        [ToggleAction::InsertNot, ToggleAction::RemoveNot, ToggleAction::InsertNeg, ToggleAction::RemoveNeg];

    pub fn as_str(self) -> &'static str {
        match self {
            ToggleAction::InsertNot => "insert:not",
            ToggleAction::RemoveNot => "remove:not",
            ToggleAction::InsertNeg => "insert:-",
            ToggleAction::RemoveNeg => "remove:-",
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            ToggleAction::InsertNot => ToggleAction::RemoveNot,
            ToggleAction::RemoveNot => ToggleAction::InsertNot,
            ToggleAction::InsertNeg => ToggleAction::RemoveNeg,
            ToggleAction::RemoveNeg => ToggleAction::InsertNeg,
        }
    }

    fn operator(self) -> &'static str {
        match self {
            ToggleAction::InsertNot | ToggleAction::RemoveNot => "not",
            ToggleAction::InsertNeg | ToggleAction::RemoveNeg => "-",
        }
    }
}

/// Rule-specific data of a rewrite.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Payload {
    /// Replace variable `from` by `to`.
    Variable { from: String, to: String },
    /// Swap two positional arguments (0-based, `i < j`).
    Swap(usize, usize),
    Operator { from: String, to: String },
    Literal { from: String, to: String },
    Toggle(ToggleAction),
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RewriteRule {
    pub kind: RuleKind,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("stale rewrite: {kind} {payload:?} does not match the subtree at {location}")]
    Stale { location: TreeLocation, kind: RuleKind, payload: String },
    #[error(transparent)]
    Replace(#[from] ReplaceError),
    #[error("malformed rewrite: {0}")]
    BadPayload(String),
    #[error("augmentation rewrites have no inverse")]
    NonInvertible,
}

impl RewriteRule {
    pub fn identity() -> Self {
        RewriteRule { kind: RuleKind::Identity, payload: Payload::None }
    }

    pub fn var_misuse(from: &str, to: &str) -> Self {
        RewriteRule { kind: RuleKind::VarMisuse, payload: Payload::Variable { from: from.into(), to: to.into() } }
    }

    pub fn arg_swap(i: usize, j: usize) -> Self {
        RewriteRule { kind: RuleKind::ArgSwap, payload: Payload::Swap(i.min(j), i.max(j)) }
    }

    pub fn operator(class: OpClass, from: &str, to: &str) -> Self {
        RewriteRule { kind: class.rule_kind(), payload: Payload::Operator { from: from.into(), to: to.into() } }
    }

    pub fn literal(from: &str, to: &str) -> Self {
        RewriteRule { kind: RuleKind::WrongLiteral, payload: Payload::Literal { from: from.into(), to: to.into() } }
    }

    pub fn toggle(action: ToggleAction) -> Self {
        RewriteRule { kind: RuleKind::UnaryNegToggle, payload: Payload::Toggle(action) }
    }

    /// Serialized payload, e.g. `a->b`, `0,1`, `<-><=`, `insert:not`.
    pub fn payload_string(&self) -> String {
        match &self.payload {
            Payload::Variable { from, to } | Payload::Operator { from, to } | Payload::Literal { from, to } => {
                format!("{from}->{to}")
            }
            Payload::Swap(i, j) => format!("{i},{j}"),
            Payload::Toggle(a) => a.as_str().to_string(),
            Payload::None => String::new(),
        }
    }

    pub fn from_parts(kind: RuleKind, payload: &str) -> Result<Self, RewriteError> {
        let bad = || RewriteError::BadPayload(format!("{kind} payload '{payload}'"));
        let pair = || -> Result<(String, String), RewriteError> {
            let (a, b) = payload.split_once("->").ok_or_else(bad)?;
            if a.is_empty() || b.is_empty() {
                return Err(bad());
            }
            Ok((a.to_string(), b.to_string()))
        };
        Ok(match kind {
            RuleKind::VarMisuse => {
                let (from, to) = pair()?;
                RewriteRule::var_misuse(&from, &to)
            }
            RuleKind::ArgSwap => {
                let (i, j) = payload.split_once(',').ok_or_else(bad)?;
                let i: usize = i.parse().map_err(|_| bad())?;
                let j: usize = j.parse().map_err(|_| bad())?;
                if i == j {
                    return Err(bad());
                }
                RewriteRule::arg_swap(i, j)
            }
            RuleKind::WrongBinaryOp | RuleKind::WrongBooleanOp | RuleKind::WrongComparisonOp | RuleKind::WrongAssignOp => {
                let (from, to) = pair()?;
                let class = OpClass::shared(&from, &to).filter(|c| c.rule_kind() == kind).ok_or_else(bad)?;
                RewriteRule::operator(class, &from, &to)
            }
            RuleKind::WrongLiteral => {
                let (from, to) = pair()?;
                RewriteRule::literal(&from, &to)
            }
            RuleKind::UnaryNegToggle => {
                let action = ToggleAction::ALL.into_iter().find(|a| a.as_str() == payload).ok_or_else(bad)?;
                RewriteRule::toggle(action)
            }
            RuleKind::Identity => {
                if !payload.is_empty() {
                    return Err(bad());
                }
                RewriteRule::identity()
            }
        })
    }

    /// m_ρ: whether the rule applies to subtree `t`.
    pub fn matches(&self, t: &SyntaxTree) -> bool {
        match (&self.payload, self.kind) {
            (Payload::None, RuleKind::Identity) => true,
            (Payload::Variable { from, to }, RuleKind::VarMisuse) => {
                t.kind == NodeKind::Name && t.lexeme() == Some(from.as_str()) && from != to
            }
            (Payload::Swap(i, j), RuleKind::ArgSwap) => {
                t.kind == NodeKind::Call && i < j && t.children.len() > j + 1 && t.children[i + 1] != t.children[j + 1]
            }
            (Payload::Operator { from, to }, kind) if kind.is_operator_rule() => {
                t.kind == NodeKind::Operator
                    && t.lexeme() == Some(from.as_str())
                    && from != to
                    && OpClass::shared(from, to).is_some_and(|c| c.rule_kind() == kind)
            }
            (Payload::Literal { from, to }, RuleKind::WrongLiteral) => {
                t.kind == NodeKind::Literal && t.lexeme() == Some(from.as_str()) && from != to
            }
            (Payload::Toggle(action), RuleKind::UnaryNegToggle) => match action {
                ToggleAction::InsertNot => matches!(t.kind, NodeKind::Name | NodeKind::Call),
                ToggleAction::InsertNeg => t.kind.is_expression(),
                ToggleAction::RemoveNot | ToggleAction::RemoveNeg => {
                    t.kind == NodeKind::UnaryOp && t.operator_str() == Some(action.operator())
                }
            },
            _ => false,
        }
    }

    /// t_ρ: the rewritten subtree; the identity wherever the matcher fails.
    pub fn transform(&self, t: &SyntaxTree) -> SyntaxTree {
        if !self.matches(t) {
            return t.clone();
        }
        match &self.payload {
            Payload::None => t.clone(),
            Payload::Variable { to, .. } => SyntaxTree::name(to).with_span(t.span),
            Payload::Swap(i, j) => {
                let mut out = t.clone();
                out.children.swap(i + 1, j + 1);
                out
            }
            Payload::Operator { to, .. } => SyntaxTree::operator(to).with_span(t.span),
            Payload::Literal { to, .. } => SyntaxTree::literal(to).with_span(t.span),
            Payload::Toggle(action) => match action {
                ToggleAction::InsertNot | ToggleAction::InsertNeg => {
                    SyntaxTree::node(NodeKind::UnaryOp, vec![SyntaxTree::operator(action.operator()), t.clone()])
                        .with_span(t.span)
                }
                ToggleAction::RemoveNot | ToggleAction::RemoveNeg => t.children[1].clone(),
            },
        }
    }

    /// The rule undoing this one at the same location.
    pub fn inverse(&self) -> RewriteRule {
        let payload = match &self.payload {
            Payload::Variable { from, to } => Payload::Variable { from: to.clone(), to: from.clone() },
            Payload::Operator { from, to } => Payload::Operator { from: to.clone(), to: from.clone() },
            Payload::Literal { from, to } => Payload::Literal { from: to.clone(), to: from.clone() },
            Payload::Swap(i, j) => Payload::Swap(*i, *j),
            Payload::Toggle(a) => Payload::Toggle(a.inverse()),
            Payload::None => Payload::None,
        };
        RewriteRule { kind: self.kind, payload }
    }
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.payload_string())
    }
}

/// ⟨ℓ, ρ⟩.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PotentialRewrite {
    pub location: TreeLocation,
    pub rule: RewriteRule,
}

impl PotentialRewrite {
    pub fn new(location: TreeLocation, rule: RewriteRule) -> Self {
        PotentialRewrite { location, rule }
    }

    pub fn identity() -> Self {
        PotentialRewrite { location: TreeLocation::root(), rule: RewriteRule::identity() }
    }

    pub fn is_identity(&self) -> bool {
        self.rule.kind == RuleKind::Identity
    }

    pub fn kind(&self) -> RuleKind {
        self.rule.kind
    }

    /// Canonical sort key: location, then rule kind, then payload text.
    pub fn sort_key(&self) -> (TreeLocation, RuleKind, String) {
        (self.location.clone(), self.rule.kind, self.rule.payload_string())
    }

    pub fn to_record(&self) -> RewriteRecord {
        RewriteRecord {
            location: self.location.0.clone(),
            kind: self.rule.kind.name().to_string(),
            payload: self.rule.payload_string(),
        }
    }

    pub fn from_record(r: &RewriteRecord) -> Result<Self, RewriteError> {
        let kind: RuleKind = r.kind.parse()?;
        Ok(PotentialRewrite::new(TreeLocation(r.location.clone()), RewriteRule::from_parts(kind, &r.payload)?))
    }
}

impl PartialOrd for PotentialRewrite {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PotentialRewrite {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Display for PotentialRewrite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.location, self.rule)
    }
}

/// Serialized form `{location, kind, payload}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRecord {
    pub location: Vec<u32>,
    pub kind: String,
    pub payload: String,
}

/// s[ℓ ↦ ρ].
pub fn apply(s: &SyntaxTree, pr: &PotentialRewrite) -> Result<SyntaxTree, RewriteError> {
    let stale = || RewriteError::Stale {
        location: pr.location.clone(),
        kind: pr.rule.kind,
        payload: pr.rule.payload_string(),
    };
    let target = node_at(s, &pr.location).map_err(|_| stale())?;
    if !pr.rule.matches(target) {
        return Err(stale());
    }
    if pr.is_identity() {
        return Ok(s.clone());
    }
    let replacement = pr.rule.transform(target);
    if pr.rule.kind == RuleKind::WrongAssignOp {
        // `=` and `+=` live in differently labelled statements
        let parent_loc = pr.location.parent().ok_or_else(stale)?;
        let mut parent = node_at(s, &parent_loc).map_err(|_| stale())?.clone();
        if pr.location.last_index() != Some(2) || !matches!(parent.kind, NodeKind::Assign | NodeKind::AugAssign) {
            return Err(stale());
        }
        parent.kind = if replacement.lexeme() == Some("=") { NodeKind::Assign } else { NodeKind::AugAssign };
        parent.children[1] = replacement;
        return Ok(replace_at(s, &parent_loc, parent)?);
    }
    Ok(replace_at(s, &pr.location, replacement)?)
}

/// ρ⁻¹ at the same location, checked against the rewritten tree.
pub fn invert(pr: &PotentialRewrite, s_after: &SyntaxTree) -> Result<PotentialRewrite, RewriteError> {
    let inv = PotentialRewrite::new(pr.location.clone(), pr.rule.inverse());
    let target = node_at(s_after, &inv.location).map_err(|_| RewriteError::Stale {
        location: inv.location.clone(),
        kind: inv.rule.kind,
        payload: inv.rule.payload_string(),
    })?;
    if !inv.rule.matches(target) {
        return Err(RewriteError::Stale {
            location: inv.location.clone(),
            kind: inv.rule.kind,
            payload: inv.rule.payload_string(),
        });
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_function;
    use crate::lang::printer::print_function;

    #[test]
    fn payload_round_trip() {
        for (kind, payload) in [
            (RuleKind::VarMisuse, "a->b"),
            (RuleKind::ArgSwap, "0,2"),
            (RuleKind::WrongComparisonOp, ">->>="),
            (RuleKind::WrongComparisonOp, "is->is not"),
            (RuleKind::WrongAssignOp, "+=->="),
            (RuleKind::WrongLiteral, "-1->2"),
            (RuleKind::UnaryNegToggle, "remove:-"),
            (RuleKind::Identity, ""),
        ] {
            let r = RewriteRule::from_parts(kind, payload).unwrap();
            assert_eq!(r.payload_string(), payload);
            assert_eq!(r.kind, kind);
        }
        assert!(RewriteRule::from_parts(RuleKind::WrongBinaryOp, "+-><").is_err());
        assert!(RewriteRule::from_parts(RuleKind::ArgSwap, "1,1").is_err());
    }

    #[test]
    fn matcher_guards_transform() {
        let r = RewriteRule::operator(OpClass::Comparison, "<", ">");
        let other = SyntaxTree::operator("==");
        assert_eq!(r.transform(&other), other);
        assert_eq!(r.transform(&SyntaxTree::operator("<")).lexeme(), Some(">"));
    }

    #[test]
    fn comparison_flip() {
        let s = parse_function("def f(c):\n  return c < 0\n").unwrap();
        let pr = PotentialRewrite::new(TreeLocation::new([3, 1, 1, 2]), RewriteRule::operator(OpClass::Comparison, "<", ">"));
        let out = apply(&s, &pr).unwrap();
        assert_eq!(print_function(&out), "def f(c):\n  return c > 0\n");
        let inv = invert(&pr, &out).unwrap();
        assert_eq!(apply(&out, &inv).unwrap(), s);
    }

    #[test]
    fn assign_op_relabels_statement() {
        let s = parse_function("def f(c):\n  c += 1\n  return c\n").unwrap();
        let pr = PotentialRewrite::new(TreeLocation::new([3, 1, 2]), RewriteRule::operator(OpClass::Assignment, "+=", "="));
        let out = apply(&s, &pr).unwrap();
        assert_eq!(out.children[2].children[0].kind, NodeKind::Assign);
        let back = apply(&out, &invert(&pr, &out).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn stale_rewrite_is_rejected() {
        let s = parse_function("def f(c):\n  return c\n").unwrap();
        let pr = PotentialRewrite::new(TreeLocation::new([3, 1, 1]), RewriteRule::var_misuse("d", "c"));
        assert!(matches!(apply(&s, &pr), Err(RewriteError::Stale { .. })));
    }
}
