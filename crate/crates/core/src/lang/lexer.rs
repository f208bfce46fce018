//! Indentation-aware tokenizer for the supported Python subset.

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Name,
    Int,
    Str,
    Op,
    Comment,
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tok {
    pub kind: TokKind,
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

const OPS3: [&str; 1] = ["//="];
const OPS2: [&str; 10] = ["//", "+=", "-=", "*=", "/=", "%=", "==", "!=", "<=", ">="];
const OPS1: &str = "+-*/%<>=(),:.";

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    line_start: usize,
    indents: Vec<usize>,
    paren_depth: usize,
    out: Vec<Tok>,
}

pub fn tokenize(src: &str) -> Result<Vec<Tok>, ParseError> {
    let mut lx = Lexer {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        line: 1,
        line_start: 0,
        indents: vec![0],
        paren_depth: 0,
        out: Vec::new(),
    };
    lx.run()?;
    Ok(lx.out)
}

impl<'a> Lexer<'a> {
    fn col(&self, pos: usize) -> usize {
        self.src[self.line_start..pos].chars().count() + 1
    }

    fn push(&mut self, kind: TokKind, start: usize, end: usize) {
        let col = self.col(start);
        self.out.push(Tok {
            kind,
            text: self.src[start..end].to_string(),
            start,
            end,
            line: self.line,
            col,
        });
    }

    fn syntax(&self, pos: usize, msg: impl Into<String>) -> ParseError {
        ParseError::syntax(self.line, self.col(pos), msg)
    }

    fn unsupported(&self, pos: usize, what: impl Into<String>) -> ParseError {
        ParseError::unsupported(self.line, self.col(pos), what)
    }

    fn run(&mut self) -> Result<(), ParseError> {
        let mut at_line_start = true;
        while self.pos < self.bytes.len() {
            if at_line_start && self.paren_depth == 0 {
                at_line_start = false;
                if self.handle_line_start()? {
                    at_line_start = true;
                    continue;
                }
            }
            let c = self.bytes[self.pos];
            match c {
                b' ' => self.pos += 1,
                b'\t' => return Err(self.unsupported(self.pos, "tab character")),
                b'\r' => self.pos += 1,
                b'\\' => return Err(self.unsupported(self.pos, "explicit line continuation")),
                b'\n' => {
                    if self.paren_depth == 0 {
                        self.push(TokKind::Newline, self.pos, self.pos + 1);
                    }
                    self.pos += 1;
                    self.line += 1;
                    self.line_start = self.pos;
                    at_line_start = true;
                }
                b'#' => {
                    let start = self.pos;
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                    let end = trim_end(self.src, start, self.pos);
                    // a trailing comment becomes its own statement line
                    if self.paren_depth == 0 && !self.last_is_newline() {
                        self.push(TokKind::Newline, start, start);
                    }
                    self.push(TokKind::Comment, start, end);
                }
                b'"' | b'\'' => self.string()?,
                b'0'..=b'9' => self.number()?,
                c if c == b'_' || c.is_ascii_alphabetic() => {
                    let start = self.pos;
                    while self.pos < self.bytes.len()
                        && (self.bytes[self.pos] == b'_' || self.bytes[self.pos].is_ascii_alphanumeric())
                    {
                        self.pos += 1;
                    }
                    if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'"' | b'\'') {
                        return Err(self.unsupported(start, "string prefix"));
                    }
                    self.push(TokKind::Name, start, self.pos);
                }
                _ if !c.is_ascii() => return Err(self.unsupported(self.pos, "non-ASCII source character")),
                _ => self.operator()?,
            }
        }
        if !self.last_is_newline() && !self.out.is_empty() {
            self.push(TokKind::Newline, self.pos, self.pos);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(TokKind::Dedent, self.pos, self.pos);
        }
        self.push(TokKind::Eof, self.pos, self.pos);
        Ok(())
    }

    fn last_is_newline(&self) -> bool {
        matches!(self.out.last().map(|t| t.kind), None | Some(TokKind::Newline))
    }

    /// Returns true when the whole line was consumed (blank or comment-only).
    fn handle_line_start(&mut self) -> Result<bool, ParseError> {
        let mut p = self.pos;
        while p < self.bytes.len() && self.bytes[p] == b' ' {
            p += 1;
        }
        if p < self.bytes.len() && self.bytes[p] == b'\t' {
            return Err(self.unsupported(p, "tab character"));
        }
        let width = p - self.pos;
        if p >= self.bytes.len() || matches!(self.bytes[p], b'\n' | b'\r') {
            // blank line
            self.pos = p;
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'\r' {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() {
                self.pos += 1;
                self.line += 1;
                self.line_start = self.pos;
            }
            return Ok(true);
        }
        if self.bytes[p] == b'#' {
            // comment-only lines do not affect indentation
            let start = p;
            while p < self.bytes.len() && self.bytes[p] != b'\n' {
                p += 1;
            }
            let end = trim_end(self.src, start, p);
            self.push(TokKind::Comment, start, end);
            self.push(TokKind::Newline, end, end);
            self.pos = p;
            if self.pos < self.bytes.len() {
                self.pos += 1;
                self.line += 1;
                self.line_start = self.pos;
            }
            return Ok(true);
        }
        let cur = *self.indents.last().expect("indent stack");
        if width > cur {
            self.indents.push(width);
            self.push(TokKind::Indent, p, p);
        } else if width < cur {
            while width < *self.indents.last().expect("indent stack") {
                self.indents.pop();
                self.push(TokKind::Dedent, p, p);
            }
            if width != *self.indents.last().expect("indent stack") {
                return Err(self.syntax(p, "unindent does not match any outer indentation level"));
            }
        }
        self.pos = p;
        Ok(false)
    }

    fn string(&mut self) -> Result<(), ParseError> {
        let start = self.pos;
        let q = self.bytes[self.pos];
        let triple = self.bytes[self.pos..].starts_with(&[q, q, q]);
        if triple {
            self.pos += 3;
            loop {
                if self.pos >= self.bytes.len() {
                    return Err(self.syntax(start, "unterminated triple-quoted string"));
                }
                if self.bytes[self.pos..].starts_with(&[q, q, q]) {
                    self.pos += 3;
                    break;
                }
                if self.bytes[self.pos] == b'\\' {
                    self.pos += 1;
                }
                self.pos += 1;
            }
            let col = self.col(start);
            let line = self.line;
            // account for embedded newlines
            let text = &self.src[start..self.pos];
            let newlines = text.matches('\n').count();
            if newlines > 0 {
                self.line += newlines;
                self.line_start = start + text.rfind('\n').expect("newline") + 1;
            }
            self.out.push(Tok { kind: TokKind::Str, text: text.to_string(), start, end: self.pos, line, col });
            return Ok(());
        }
        self.pos += 1;
        loop {
            if self.pos >= self.bytes.len() || self.bytes[self.pos] == b'\n' {
                return Err(self.syntax(start, "unterminated string literal"));
            }
            let c = self.bytes[self.pos];
            if c == b'\\' {
                self.pos += 2;
                continue;
            }
            self.pos += 1;
            if c == q {
                break;
            }
        }
        self.push(TokKind::Str, start, self.pos);
        Ok(())
    }

    fn number(&mut self) -> Result<(), ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'.' || c == b'e' || c == b'E' || c == b'j' || c == b'J' {
                return Err(self.unsupported(start, "non-integer numeric literal"));
            }
            if c == b'_' || c.is_ascii_alphabetic() {
                return Err(self.unsupported(start, "integer literal prefix or suffix"));
            }
        }
        let text = &self.src[start..self.pos];
        if text.len() > 1 && text.starts_with('0') {
            return Err(self.syntax(start, "leading zeros in integer literal"));
        }
        if text.parse::<i64>().is_err() {
            return Err(self.unsupported(start, "integer literal out of range"));
        }
        self.push(TokKind::Int, start, self.pos);
        Ok(())
    }

    fn operator(&mut self) -> Result<(), ParseError> {
        let start = self.pos;
        let rest = &self.src[start..];
        if rest.starts_with("**") || rest.starts_with("->") || rest.starts_with("<<") || rest.starts_with(">>") {
            return Err(self.unsupported(start, format!("operator '{}'", &rest[..2])));
        }
        let len = if OPS3.iter().any(|o| rest.starts_with(o)) {
            3
        } else if OPS2.iter().any(|o| rest.starts_with(o)) {
            2
        } else if OPS1.as_bytes().contains(&self.bytes[start]) {
            1
        } else {
            let c = rest.chars().next().expect("non-empty");
            return Err(match c {
                '[' | ']' => self.unsupported(start, "subscripts and list displays"),
                '{' | '}' => self.unsupported(start, "dict and set displays"),
                '@' => self.unsupported(start, "decorators and matrix multiplication"),
                ';' => self.unsupported(start, "multiple statements on one line"),
                '&' | '|' | '^' | '~' => self.unsupported(start, format!("bitwise operator '{c}'")),
                _ => self.syntax(start, format!("unexpected character '{c}'")),
            });
        };
        match &rest[..len] {
            "(" => self.paren_depth += 1,
            ")" => {
                if self.paren_depth == 0 {
                    return Err(self.syntax(start, "unmatched ')'"));
                }
                self.paren_depth -= 1;
            }
            _ => {}
        }
        self.pos += len;
        self.push(TokKind::Op, start, self.pos);
        Ok(())
    }
}

fn trim_end(src: &str, start: usize, end: usize) -> usize {
    start + src[start..end].trim_end().len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn indentation() {
        let toks = kinds("def f(a):\n  if a:\n    return a\n  return 0\n");
        let ks: Vec<TokKind> = toks.iter().map(|t| t.0).collect();
        assert_eq!(ks.iter().filter(|k| **k == TokKind::Indent).count(), 2);
        assert_eq!(ks.iter().filter(|k| **k == TokKind::Dedent).count(), 2);
        assert_eq!(*ks.last().unwrap(), TokKind::Eof);
    }

    #[test]
    fn multi_char_operators() {
        let toks = kinds("x //= a <= b != c\n");
        let ops: Vec<String> = toks.into_iter().filter(|t| t.0 == TokKind::Op).map(|t| t.1).collect();
        assert_eq!(ops, ["//=", "<=", "!="]);
    }

    #[test]
    fn trailing_comment_gets_own_line() {
        let toks = kinds("x = 1  # one\n");
        let ks: Vec<TokKind> = toks.iter().map(|t| t.0).collect();
        assert_eq!(
            ks,
            [
                TokKind::Name,
                TokKind::Op,
                TokKind::Int,
                TokKind::Newline,
                TokKind::Comment,
                TokKind::Newline,
                TokKind::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("def f(:\n").unwrap();
        let colon = toks.iter().find(|t| t.text == ":").unwrap();
        assert_eq!((colon.line, colon.col), (1, 7));
    }

    #[test]
    fn rejects_floats_and_tabs() {
        assert!(tokenize("x = 1.5\n").unwrap_err().is_unsupported());
        assert!(tokenize("def f():\n\treturn 1\n").unwrap_err().is_unsupported());
    }
}
