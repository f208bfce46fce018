//! Recursive-descent parser producing `FunctionDef` trees.
//!
//! Expression precedence, loosest first: `or`, `and`, `not`, comparisons,
//! `+ -`, `* / // %`, unary `-`, atoms. Binary operators associate to the
//! left and comparisons do not chain.

use super::lexer::{tokenize, Tok, TokKind};
use super::tree::{is_compare_op, NodeKind, Span, SyntaxTree};
use super::{ParseError, SourceUnit};

pub(crate) const PREC_OR: u8 = 1;
pub(crate) const PREC_AND: u8 = 2;
pub(crate) const PREC_NOT: u8 = 3;
pub(crate) const PREC_CMP: u8 = 4;
pub(crate) const PREC_ADD: u8 = 5;
pub(crate) const PREC_MUL: u8 = 6;
pub(crate) const PREC_NEG: u8 = 7;
pub(crate) const PREC_ATOM: u8 = 8;

const UNSUPPORTED_KEYWORDS: [&str; 22] = [
    "for", "class", "import", "from", "try", "except", "finally", "with", "lambda", "pass", "break", "continue",
    "del", "global", "nonlocal", "assert", "raise", "yield", "async", "await", "elif", "as",
];
const KEYWORDS: [&str; 13] =
    ["def", "return", "if", "else", "while", "and", "or", "not", "in", "is", "True", "False", "None"];

/// Parse a source file.
pub fn parse(text: &str) -> Result<SourceUnit, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };
    let functions = p.program()?;
    Ok(SourceUnit { text: text.to_string(), functions })
}

/// Parse a source text that must contain exactly one function.
pub fn parse_function(text: &str) -> Result<SyntaxTree, ParseError> {
    let mut unit = parse(text)?;
    if unit.functions.len() != 1 {
        return Err(ParseError::syntax(1, 1, format!("expected one function, found {}", unit.functions.len())));
    }
    Ok(unit.functions.pop().expect("one function"))
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_op(&self, text: &str) -> bool {
        let t = self.peek();
        t.kind == TokKind::Op && t.text == text
    }

    fn is_kw(&self, text: &str) -> bool {
        let t = self.peek();
        t.kind == TokKind::Name && t.text == text
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = self.peek();
        let message = message.into();
        let found = match t.kind {
            TokKind::Newline => "end of line".to_string(),
            TokKind::Indent => "indent".to_string(),
            TokKind::Dedent => "dedent".to_string(),
            TokKind::Eof => "end of input".to_string(),
            _ => format!("'{}'", t.text),
        };
        ParseError::syntax(t.line, t.col, format!("{message}, found {found}"))
    }

    fn unsupported_here(&self, construct: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError::unsupported(t.line, t.col, construct)
    }

    fn expect_op(&mut self, text: &str) -> Result<Tok, ParseError> {
        if self.is_op(text) {
            Ok(self.bump())
        } else {
            Err(self.error_here(format!("expected '{text}'")))
        }
    }

    fn expect_kind(&mut self, kind: TokKind, what: &str) -> Result<Tok, ParseError> {
        if self.peek().kind == kind {
            Ok(self.bump())
        } else {
            Err(self.error_here(format!("expected {what}")))
        }
    }

    fn check_unsupported_keyword(&self) -> Result<(), ParseError> {
        let t = self.peek();
        if t.kind == TokKind::Name && UNSUPPORTED_KEYWORDS.contains(&t.text.as_str()) {
            return Err(self.unsupported_here(format!("'{}'", t.text)));
        }
        Ok(())
    }

    fn identifier(&mut self) -> Result<Tok, ParseError> {
        self.check_unsupported_keyword()?;
        let t = self.peek();
        if t.kind != TokKind::Name || KEYWORDS.contains(&t.text.as_str()) {
            return Err(self.error_here("expected an identifier"));
        }
        Ok(self.bump())
    }

    fn program(&mut self) -> Result<Vec<SyntaxTree>, ParseError> {
        let mut functions = Vec::new();
        loop {
            match self.peek().kind {
                TokKind::Eof => break,
                TokKind::Comment | TokKind::Newline => {
                    self.bump();
                }
                TokKind::Indent => return Err(self.error_here("unexpected indent")),
                _ if self.is_kw("def") => functions.push(self.funcdef()?),
                _ => {
                    self.check_unsupported_keyword()?;
                    return Err(self.unsupported_here("module-level statement"));
                }
            }
        }
        if functions.is_empty() {
            return Err(self.error_here("expected at least one function definition"));
        }
        Ok(functions)
    }

    fn funcdef(&mut self) -> Result<SyntaxTree, ParseError> {
        let def = self.bump();
        let name = self.identifier()?;
        let mut children = vec![leaf(NodeKind::Name, &name)];
        self.expect_op("(")?;
        if !self.is_op(")") {
            loop {
                children.push(self.param()?);
                if self.is_op(",") {
                    self.bump();
                    if self.is_op(")") {
                        break;
                    }
                } else {
                    break;
                }
            }
        }
        self.expect_op(")")?;
        self.expect_op(":")?;
        let body = self.block()?;
        children.push(body);
        Ok(node(NodeKind::FunctionDef, children, def.start))
    }

    fn param(&mut self) -> Result<SyntaxTree, ParseError> {
        if self.is_op("*") {
            return Err(self.unsupported_here("star parameters"));
        }
        let name = self.identifier()?;
        if self.is_op(":") {
            return Err(self.unsupported_here("type annotations"));
        }
        let mut children = vec![leaf(NodeKind::Name, &name)];
        if self.is_op("=") {
            self.bump();
            children.push(self.default_literal()?);
        }
        Ok(node(NodeKind::Param, children, name.start))
    }

    fn default_literal(&mut self) -> Result<SyntaxTree, ParseError> {
        if self.is_op("-") && self.peek_at(1).kind == TokKind::Int {
            let minus = self.bump();
            let int = self.bump();
            return Ok(SyntaxTree::literal(&format!("-{}", int.text)).with_span(Span::new(minus.start, int.end)));
        }
        let t = self.peek();
        let ok = matches!(t.kind, TokKind::Int | TokKind::Str)
            || (t.kind == TokKind::Name && matches!(t.text.as_str(), "True" | "False" | "None"));
        if !ok {
            if t.kind == TokKind::Name || t.kind == TokKind::Op && t.text == "(" {
                return Err(self.unsupported_here("non-literal parameter default"));
            }
            return Err(self.error_here("expected a literal default value"));
        }
        let t = self.bump();
        Ok(leaf(NodeKind::Literal, &t))
    }

    /// `NEWLINE INDENT stmt+ DEDENT`; comment lines directly after the header
    /// are part of the block.
    fn block(&mut self) -> Result<SyntaxTree, ParseError> {
        if self.peek().kind != TokKind::Newline {
            return Err(self.unsupported_here("statement on the same line as its block header"));
        }
        let start = self.peek().start;
        let mut stmts = Vec::new();
        while matches!(self.peek().kind, TokKind::Newline | TokKind::Comment) {
            let t = self.bump();
            if t.kind == TokKind::Comment {
                stmts.push(leaf(NodeKind::Comment, &t));
            }
        }
        self.expect_kind(TokKind::Indent, "an indented block")?;
        loop {
            match self.peek().kind {
                TokKind::Dedent => {
                    self.bump();
                    break;
                }
                TokKind::Eof => break,
                TokKind::Newline => {
                    self.bump();
                }
                TokKind::Comment => {
                    let t = self.bump();
                    stmts.push(leaf(NodeKind::Comment, &t));
                }
                _ => stmts.push(self.statement()?),
            }
        }
        if !stmts.iter().any(|s| s.kind.is_executable_statement()) {
            return Err(self.unsupported_here("block without executable statements"));
        }
        let end = stmts.last().map_or(start, |s| s.span.end);
        let first = stmts.first().map_or(start, |s| s.span.start);
        Ok(SyntaxTree::node(NodeKind::Block, stmts).with_span(Span::new(first, end)))
    }

    fn end_of_statement(&mut self) -> Result<(), ParseError> {
        match self.peek().kind {
            TokKind::Newline => {
                self.bump();
                Ok(())
            }
            TokKind::Eof | TokKind::Dedent => Ok(()),
            TokKind::Op if self.peek().text == "," => Err(self.unsupported_here("tuples")),
            TokKind::Op if self.peek().text == "=" => Err(self.unsupported_here("chained assignment")),
            _ => Err(self.error_here("expected end of statement")),
        }
    }

    fn statement(&mut self) -> Result<SyntaxTree, ParseError> {
        self.check_unsupported_keyword()?;
        let t = self.peek().clone();
        if t.kind == TokKind::Name {
            match t.text.as_str() {
                "def" => return Err(self.unsupported_here("nested function definitions")),
                "if" => return self.if_stmt(),
                "while" => return self.while_stmt(),
                "return" => return self.return_stmt(),
                "else" => return Err(self.error_here("'else' without a matching 'if'")),
                _ => {}
            }
        }
        if t.kind == TokKind::Indent {
            return Err(self.error_here("unexpected indent"));
        }
        if t.kind == TokKind::Str && self.peek_at(1).kind != TokKind::Str {
            let after = self.peek_at(1).kind;
            if matches!(after, TokKind::Newline | TokKind::Eof | TokKind::Dedent) {
                self.bump();
                self.end_of_statement()?;
                return Ok(leaf(NodeKind::Docstring, &t));
            }
        }
        let expr = self.expr(PREC_OR)?;
        let op = self.peek().clone();
        if op.kind == TokKind::Op && op.text == "=" {
            check_target(&expr, &op)?;
            self.bump();
            let value = self.expr(PREC_OR)?;
            let stmt = node(NodeKind::Assign, vec![expr, leaf(NodeKind::Operator, &op), value], t.start);
            self.end_of_statement()?;
            return Ok(stmt);
        }
        if op.kind == TokKind::Op && super::tree::ASSIGN_OPS[1..].contains(&op.text.as_str()) {
            check_target(&expr, &op)?;
            self.bump();
            let value = self.expr(PREC_OR)?;
            let stmt = node(NodeKind::AugAssign, vec![expr, leaf(NodeKind::Operator, &op), value], t.start);
            self.end_of_statement()?;
            return Ok(stmt);
        }
        if op.kind == TokKind::Op && op.text == ":" {
            return Err(self.unsupported_here("annotated assignment"));
        }
        let stmt = node(NodeKind::ExprStmt, vec![expr], t.start);
        self.end_of_statement()?;
        Ok(stmt)
    }

    fn if_stmt(&mut self) -> Result<SyntaxTree, ParseError> {
        let kw = self.bump();
        let test = self.expr(PREC_OR)?;
        self.expect_op(":")?;
        let then = self.block()?;
        let mut children = vec![test, then];
        if self.is_kw("elif") {
            return Err(self.unsupported_here("'elif'"));
        }
        if self.is_kw("else") {
            self.bump();
            self.expect_op(":")?;
            children.push(self.block()?);
        }
        Ok(node(NodeKind::If, children, kw.start))
    }

    fn while_stmt(&mut self) -> Result<SyntaxTree, ParseError> {
        let kw = self.bump();
        let test = self.expr(PREC_OR)?;
        self.expect_op(":")?;
        let body = self.block()?;
        if self.is_kw("else") {
            return Err(self.unsupported_here("'while ... else'"));
        }
        Ok(node(NodeKind::While, vec![test, body], kw.start))
    }

    fn return_stmt(&mut self) -> Result<SyntaxTree, ParseError> {
        let kw = self.bump();
        if matches!(self.peek().kind, TokKind::Newline | TokKind::Eof | TokKind::Dedent) {
            return Err(self.unsupported_here("return without a value"));
        }
        let mut values = vec![self.expr(PREC_OR)?];
        while self.is_op(",") {
            self.bump();
            values.push(self.expr(PREC_OR)?);
        }
        let stmt = node(NodeKind::Return, values, kw.start);
        self.end_of_statement()?;
        Ok(stmt)
    }

    fn expr(&mut self, min_prec: u8) -> Result<SyntaxTree, ParseError> {
        let mut left = self.unary(min_prec)?;
        loop {
            let Some((op, prec, len)) = self.binary_operator() else { break };
            if prec < min_prec {
                break;
            }
            let first = self.bump();
            if len == 2 {
                self.bump();
            }
            let op_leaf = SyntaxTree::operator(&op).with_span(Span::new(first.start, self.toks[self.pos - 1].end));
            let kind = match prec {
                PREC_OR | PREC_AND => NodeKind::BoolOp,
                PREC_CMP => NodeKind::Compare,
                _ => NodeKind::BinaryOp,
            };
            let operand_prec = if prec == PREC_CMP { PREC_ADD } else { prec + 1 };
            let right = self.expr(operand_prec)?;
            let start = left.span.start;
            left = node(kind, vec![left, op_leaf, right], start);
            if prec == PREC_CMP {
                if let Some((_, PREC_CMP, _)) = self.binary_operator() {
                    return Err(self.unsupported_here("chained comparison"));
                }
            }
        }
        Ok(left)
    }

    /// The binary operator at the cursor, with its precedence and token count.
    fn binary_operator(&self) -> Option<(String, u8, usize)> {
        let t = self.peek();
        match t.kind {
            TokKind::Name => match t.text.as_str() {
                "or" => Some(("or".into(), PREC_OR, 1)),
                "and" => Some(("and".into(), PREC_AND, 1)),
                "in" => Some(("in".into(), PREC_CMP, 1)),
                "not" if self.peek_at(1).kind == TokKind::Name && self.peek_at(1).text == "in" => {
                    Some(("not in".into(), PREC_CMP, 2))
                }
                "is" if self.peek_at(1).kind == TokKind::Name && self.peek_at(1).text == "not" => {
                    Some(("is not".into(), PREC_CMP, 2))
                }
                "is" => Some(("is".into(), PREC_CMP, 1)),
                _ => None,
            },
            TokKind::Op => match t.text.as_str() {
                op if is_compare_op(op) => Some((op.into(), PREC_CMP, 1)),
                "+" | "-" => Some((t.text.clone(), PREC_ADD, 1)),
                "*" | "/" | "//" | "%" => Some((t.text.clone(), PREC_MUL, 1)),
                _ => None,
            },
            _ => None,
        }
    }

    fn unary(&mut self, min_prec: u8) -> Result<SyntaxTree, ParseError> {
        if self.is_kw("not") {
            if min_prec > PREC_NOT {
                return Err(self.error_here("'not' cannot appear here without parentheses"));
            }
            let kw = self.bump();
            let operand = self.expr(PREC_NOT)?;
            let op = SyntaxTree::operator("not").with_span(Span::new(kw.start, kw.end));
            return Ok(node(NodeKind::UnaryOp, vec![op, operand], kw.start));
        }
        if self.is_op("-") {
            let minus = self.bump();
            let next = self.peek().clone();
            if next.kind == TokKind::Int && next.start == minus.end {
                self.bump();
                let lit = SyntaxTree::literal(&format!("-{}", next.text)).with_span(Span::new(minus.start, next.end));
                return Ok(lit);
            }
            let operand = self.expr(PREC_NEG)?;
            let op = SyntaxTree::operator("-").with_span(Span::new(minus.start, minus.end));
            return Ok(node(NodeKind::UnaryOp, vec![op, operand], minus.start));
        }
        if self.is_op("+") {
            return Err(self.unsupported_here("unary '+'"));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<SyntaxTree, ParseError> {
        self.check_unsupported_keyword()?;
        let t = self.peek().clone();
        match t.kind {
            TokKind::Int => {
                self.bump();
                Ok(leaf(NodeKind::Literal, &t))
            }
            TokKind::Str => {
                self.bump();
                if self.peek().kind == TokKind::Str {
                    return Err(self.unsupported_here("implicit string concatenation"));
                }
                Ok(leaf(NodeKind::Literal, &t))
            }
            TokKind::Name if matches!(t.text.as_str(), "True" | "False" | "None") => {
                self.bump();
                Ok(leaf(NodeKind::Literal, &t))
            }
            TokKind::Name if !KEYWORDS.contains(&t.text.as_str()) => self.name_atom(),
            TokKind::Op if t.text == "(" => {
                self.bump();
                if self.is_op(")") {
                    return Err(self.unsupported_here("tuples"));
                }
                let mut inner = self.expr(PREC_OR)?;
                if self.is_op(",") {
                    return Err(self.unsupported_here("tuples"));
                }
                let close = self.expect_op(")")?;
                inner.span = Span::new(t.start, close.end);
                if self.is_op("(") || self.is_op(".") {
                    return Err(self.unsupported_here("calls or attributes on parenthesized expressions"));
                }
                Ok(inner)
            }
            _ => Err(self.error_here("expected an expression")),
        }
    }

    fn name_atom(&mut self) -> Result<SyntaxTree, ParseError> {
        let first = self.bump();
        let mut target = leaf(NodeKind::Name, &first);
        if self.is_op(".") {
            let mut children = vec![target];
            while self.is_op(".") {
                self.bump();
                let member = self.identifier()?;
                children.push(leaf(NodeKind::Member, &member));
            }
            target = node(NodeKind::Attribute, children, first.start);
        }
        if self.is_op("(") {
            self.bump();
            let mut children = vec![target];
            if !self.is_op(")") {
                loop {
                    if self.is_op("*") {
                        return Err(self.unsupported_here("star arguments"));
                    }
                    if self.peek().kind == TokKind::Name && self.peek_at(1).kind == TokKind::Op && self.peek_at(1).text == "="
                    {
                        return Err(self.unsupported_here("keyword arguments"));
                    }
                    children.push(self.expr(PREC_OR)?);
                    if self.is_op(",") {
                        self.bump();
                        if self.is_op(")") {
                            break;
                        }
                    } else {
                        break;
                    }
                }
            }
            let close = self.expect_op(")")?;
            let mut call = node(NodeKind::Call, children, first.start);
            call.span.end = close.end;
            if self.is_op("(") || self.is_op(".") {
                return Err(self.unsupported_here("calls or attributes on call results"));
            }
            return Ok(call);
        }
        Ok(target)
    }
}

fn check_target(expr: &SyntaxTree, op: &Tok) -> Result<(), ParseError> {
    match expr.kind {
        NodeKind::Name | NodeKind::Attribute => Ok(()),
        _ => Err(ParseError::syntax(op.line, op.col, format!("cannot assign to {}", expr.kind))),
    }
}

fn leaf(kind: NodeKind, t: &Tok) -> SyntaxTree {
    SyntaxTree::leaf(kind, t.text.clone()).with_span(Span::new(t.start, t.end))
}

/// Interior node spanning from `start` to the end of its last child.
fn node(kind: NodeKind, children: Vec<SyntaxTree>, start: usize) -> SyntaxTree {
    let end = children.last().map_or(start, |c| c.span.end);
    SyntaxTree::node(kind, children).with_span(Span::new(start, end))
}
