//! Canonical printer.
//!
//! Printing goes through a token emitter so the graph extractor sees exactly
//! the token sequence that the printed text lexes to. Each emitted token
//! records the tree node that owns it: leaves own their own lexeme, interior
//! nodes own keywords and punctuation (including parentheses they insert
//! around lower-precedence operands).

use super::parser::{PREC_ADD, PREC_AND, PREC_ATOM, PREC_CMP, PREC_MUL, PREC_NEG, PREC_NOT, PREC_OR};
use super::tree::{int_literal_value, NodeKind, SyntaxTree, TreeLocation};

const INDENT: &str = "  ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrintToken {
    pub text: String,
    pub owner: TreeLocation,
    /// The token is the lexeme of the leaf at `owner`.
    pub leaf: bool,
    /// Printed without a space before it.
    pub glued: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Emitted {
    Token(PrintToken),
    Newline,
    Indent,
    Dedent,
}

struct Emitter {
    out: Vec<Emitted>,
    glue_next: bool,
}

impl Emitter {
    fn tok(&mut self, text: &str, owner: &TreeLocation, leaf: bool, glued: bool) {
        let glued = glued || self.glue_next;
        self.glue_next = false;
        self.out.push(Emitted::Token(PrintToken { text: text.to_string(), owner: owner.clone(), leaf, glued }));
    }

    fn syn(&mut self, text: &str, owner: &TreeLocation) {
        self.tok(text, owner, false, false);
    }

    fn glued(&mut self, text: &str, owner: &TreeLocation) {
        self.tok(text, owner, false, true);
    }

    fn leaf(&mut self, t: &SyntaxTree, loc: &TreeLocation) {
        self.tok(t.lexeme().unwrap_or_default(), loc, true, false);
    }

    fn line_break(&mut self) {
        self.glue_next = false;
        self.out.push(Emitted::Newline);
    }

    fn function(&mut self, f: &SyntaxTree, loc: &TreeLocation) {
        self.syn("def", loc);
        let n = f.children.len();
        for (i, c) in f.children.iter().enumerate() {
            let cl = loc.child(i as u32 + 1);
            match c.kind {
                NodeKind::Name => {
                    self.leaf(c, &cl);
                    self.glued("(", loc);
                    self.glue_next = true;
                }
                NodeKind::Param => {
                    if i > 1 {
                        self.glued(",", loc);
                    }
                    self.param(c, &cl);
                }
                NodeKind::Block if i + 1 == n => {
                    self.glued(")", loc);
                    self.glued(":", loc);
                    self.block(c, &cl);
                }
                _ => self.stmt(c, &cl),
            }
        }
    }

    fn param(&mut self, p: &SyntaxTree, loc: &TreeLocation) {
        self.leaf(&p.children[0], &loc.child(1));
        if let Some(default) = p.children.get(1) {
            self.glued("=", loc);
            self.glue_next = true;
            self.leaf(default, &loc.child(2));
        }
    }

    fn block(&mut self, b: &SyntaxTree, loc: &TreeLocation) {
        self.line_break();
        self.out.push(Emitted::Indent);
        for (i, s) in b.children.iter().enumerate() {
            self.stmt(s, &loc.child(i as u32 + 1));
        }
        self.out.push(Emitted::Dedent);
    }

    fn stmt(&mut self, s: &SyntaxTree, loc: &TreeLocation) {
        match s.kind {
            NodeKind::Docstring | NodeKind::Comment => {
                self.leaf(s, loc);
                self.line_break();
            }
            NodeKind::Assign | NodeKind::AugAssign => {
                self.expr(&s.children[0], &loc.child(1), PREC_ATOM, loc);
                self.leaf(&s.children[1], &loc.child(2));
                self.expr(&s.children[2], &loc.child(3), PREC_OR, loc);
                self.line_break();
            }
            NodeKind::If => {
                self.syn("if", loc);
                self.expr(&s.children[0], &loc.child(1), PREC_OR, loc);
                self.glued(":", loc);
                self.block(&s.children[1], &loc.child(2));
                if let Some(else_block) = s.children.get(2) {
                    self.syn("else", loc);
                    self.glued(":", loc);
                    self.block(else_block, &loc.child(3));
                }
            }
            NodeKind::While => {
                self.syn("while", loc);
                self.expr(&s.children[0], &loc.child(1), PREC_OR, loc);
                self.glued(":", loc);
                self.block(&s.children[1], &loc.child(2));
            }
            NodeKind::Return => {
                self.syn("return", loc);
                for (i, e) in s.children.iter().enumerate() {
                    if i > 0 {
                        self.glued(",", loc);
                    }
                    self.expr(e, &loc.child(i as u32 + 1), PREC_OR, loc);
                }
                self.line_break();
            }
            NodeKind::ExprStmt => {
                self.expr(&s.children[0], &loc.child(1), PREC_OR, loc);
                self.line_break();
            }
            _ => {
                // expressions are never statements on their own
                self.expr(s, loc, PREC_OR, loc);
                self.line_break();
            }
        }
    }

    /// Print `e`, parenthesized when it binds looser than `min_prec`. The
    /// parentheses belong to `parent`.
    fn expr(&mut self, e: &SyntaxTree, loc: &TreeLocation, min_prec: u8, parent: &TreeLocation) {
        let wrap = precedence(e) < min_prec;
        if wrap {
            self.syn("(", parent);
            self.glue_next = true;
        }
        match e.kind {
            NodeKind::Name | NodeKind::Literal => self.leaf(e, loc),
            NodeKind::Attribute => {
                for (i, c) in e.children.iter().enumerate() {
                    if i > 0 {
                        self.glued(".", loc);
                        self.glue_next = true;
                    }
                    self.leaf(c, &loc.child(i as u32 + 1));
                }
            }
            NodeKind::Call => {
                self.expr(&e.children[0], &loc.child(1), PREC_ATOM, loc);
                self.glued("(", loc);
                self.glue_next = true;
                for (i, a) in e.children.iter().enumerate().skip(1) {
                    if i > 1 {
                        self.glued(",", loc);
                    }
                    self.expr(a, &loc.child(i as u32 + 1), PREC_OR, loc);
                }
                self.glued(")", loc);
            }
            NodeKind::BinaryOp | NodeKind::BoolOp | NodeKind::Compare => {
                let p = precedence(e);
                let (left_min, right_min) = if e.kind == NodeKind::Compare { (PREC_ADD, PREC_ADD) } else { (p, p + 1) };
                self.expr(&e.children[0], &loc.child(1), left_min, loc);
                self.leaf(&e.children[1], &loc.child(2));
                self.expr(&e.children[2], &loc.child(3), right_min, loc);
            }
            NodeKind::UnaryOp => {
                let op = &e.children[0];
                let operand = &e.children[1];
                self.leaf(op, &loc.child(1));
                if op.lexeme() == Some("-") {
                    self.glue_next = true;
                    // `-1` would read back as a single negative literal
                    let min = if is_unsigned_int(operand) { PREC_ATOM + 1 } else { PREC_NEG };
                    self.expr(operand, &loc.child(2), min, loc);
                } else {
                    self.expr(operand, &loc.child(2), PREC_NOT, loc);
                }
            }
            _ => self.leaf(e, loc),
        }
        if wrap {
            self.glued(")", parent);
        }
    }
}

fn is_unsigned_int(e: &SyntaxTree) -> bool {
    e.kind == NodeKind::Literal && e.lexeme().and_then(int_literal_value).is_some_and(|_| !e.lexeme().unwrap_or_default().starts_with('-'))
}

/// Binding strength of an expression node; atoms bind tightest.
pub(crate) fn precedence(e: &SyntaxTree) -> u8 {
    match e.kind {
        NodeKind::BoolOp => match e.operator_str() {
            Some("or") => PREC_OR,
            _ => PREC_AND,
        },
        NodeKind::Compare => PREC_CMP,
        NodeKind::BinaryOp => match e.operator_str() {
            Some("+") | Some("-") => PREC_ADD,
            _ => PREC_MUL,
        },
        NodeKind::UnaryOp => match e.operator_str() {
            Some("not") => PREC_NOT,
            _ => PREC_NEG,
        },
        NodeKind::Literal if e.lexeme().is_some_and(|l| l.starts_with('-')) => PREC_NEG,
        _ => PREC_ATOM,
    }
}

/// The token stream of a function, with layout markers.
pub fn emit(f: &SyntaxTree) -> Vec<Emitted> {
    let mut em = Emitter { out: Vec::new(), glue_next: false };
    let root = TreeLocation::root();
    if f.kind == NodeKind::FunctionDef {
        em.function(f, &root);
    } else {
        em.stmt(f, &root);
    }
    em.out
}

/// Only the tokens of [`emit`], in source order.
pub fn emit_tokens(f: &SyntaxTree) -> Vec<PrintToken> {
    emit(f)
        .into_iter()
        .filter_map(|e| match e {
            Emitted::Token(t) => Some(t),
            _ => None,
        })
        .collect()
}

pub fn render(stream: &[Emitted]) -> String {
    let mut out = String::new();
    let mut depth = 0usize;
    let mut line = String::new();
    for e in stream {
        match e {
            Emitted::Token(t) => {
                if line.is_empty() {
                    line.push_str(&INDENT.repeat(depth));
                } else if !t.glued {
                    line.push(' ');
                }
                line.push_str(&t.text);
            }
            Emitted::Newline => {
                out.push_str(&line);
                out.push('\n');
                line.clear();
            }
            Emitted::Indent => depth += 1,
            Emitted::Dedent => depth = depth.saturating_sub(1),
        }
    }
    if !line.is_empty() {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn print_function(f: &SyntaxTree) -> String {
    render(&emit(f))
}

/// Functions separated by a blank line.
pub fn print_unit(functions: &[SyntaxTree]) -> String {
    functions.iter().map(print_function).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::lexer::{tokenize, TokKind};
    use crate::lang::parser::parse_function;

    fn round_trip(src: &str) -> String {
        let t = parse_function(src).unwrap();
        let printed = print_function(&t);
        let again = parse_function(&printed).unwrap();
        assert_eq!(t, again, "printed:\n{printed}");
        printed
    }

    #[test]
    fn canonical_layout() {
        let out = round_trip("def f(a,b=1):\n    if a<b :\n        return g( a,b )\n    else:\n        a+=1\n    return a.x.y\n");
        assert_eq!(
            out,
            "def f(a, b=1):\n  if a < b:\n    return g(a, b)\n  else:\n    a += 1\n  return a.x.y\n"
        );
    }

    #[test]
    fn parentheses_follow_precedence() {
        let out = round_trip("def f(a, b):\n  return (a + b) * (a - (b - 1)), not (a or b), -(1), -(a + b), (not a) == b\n");
        assert_eq!(out, "def f(a, b):\n  return (a + b) * (a - (b - 1)), not (a or b), -(1), -(a + b), (not a) == b\n");
    }

    #[test]
    fn trivia_retained() {
        let out = round_trip("def f(a):\n  '''doc'''\n  # c\n  return a\n");
        assert!(out.contains("'''doc'''"));
        assert!(out.contains("# c"));
    }

    #[test]
    fn emitted_tokens_match_lexer() {
        let src = "def f(a, b=-1):\n  \"\"\"d\"\"\"\n  x = -a * (b + 2)\n  while x not in b:\n    x -= g(a.c, b)\n  return x is not None, -(2)\n";
        let t = parse_function(src).unwrap();
        let printed = print_function(&t);
        let lexed: Vec<String> = tokenize(&printed)
            .unwrap()
            .into_iter()
            .filter(|t| !matches!(t.kind, TokKind::Newline | TokKind::Indent | TokKind::Dedent | TokKind::Eof))
            .map(|t| t.text)
            .collect();
        // the lexer splits two-word operators and negative literals
        let emitted: Vec<String> = emit_tokens(&t)
            .into_iter()
            .flat_map(|t| {
                if t.text.starts_with('-') && t.text[1..].bytes().all(|b| b.is_ascii_digit()) && t.text.len() > 1 {
                    vec!["-".to_string(), t.text[1..].to_string()]
                } else if t.text.starts_with(['"', '\'', '#']) {
                    vec![t.text]
                } else {
                    t.text.split(' ').map(str::to_string).collect()
                }
            })
            .collect();
        assert_eq!(lexed, emitted);
    }
}
