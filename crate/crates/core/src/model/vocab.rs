//! Subtoken vocabulary.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::graph::{subtokens, CodeGraph};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const DEFAULT_VOCAB_SIZE: usize = 15000;
/// Subtokens kept per label; the rest are dropped.
pub const MAX_SUBTOKENS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Most frequent subtokens first, ties broken lexicographically;
    /// `max_size` includes the two reserved rows.
    pub fn build<'a>(labels: impl IntoIterator<Item = &'a str>, max_size: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for l in labels {
            for s in subtokens(l).into_iter().take(MAX_SUBTOKENS) {
                *counts.entry(s).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> =
            counts.into_iter().filter(|(s, _)| s != PAD_TOKEN && s != UNK_TOKEN).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let keep = max_size.max(2) - 2;
        Self::from_tokens(
            [PAD_TOKEN.to_string(), UNK_TOKEN.to_string()].into_iter().chain(ranked.into_iter().take(keep).map(|p| p.0)),
        )
    }

    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a CodeGraph>, max_size: usize) -> Self {
        let labels: Vec<&str> =
            graphs.into_iter().flat_map(|g| g.nodes.iter().map(|n| n.label.as_str())).collect();
        Self::build(labels, max_size)
    }

    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let tokens: Vec<String> = tokens.into_iter().collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, subtoken: &str) -> usize {
        self.index.get(subtoken).copied().unwrap_or(UNK)
    }

    /// Ids of the first [`MAX_SUBTOKENS`] subtokens; `[UNK]` for labels
    /// without any.
    pub fn encode(&self, label: &str) -> Vec<usize> {
        let ids: Vec<usize> = subtokens(label).iter().take(MAX_SUBTOKENS).map(|s| self.id(s)).collect();
        if ids.is_empty() {
            vec![UNK]
        } else {
            ids
        }
    }

    /// One subtoken per line; the line number is the id.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> std::io::Result<Self> {
        let tokens = r.lines().collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_tokens(tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_rows_and_frequency_order() {
        let v = Vocab::build(["foo_bar", "foo", "baz"], 10);
        assert_eq!(&v.tokens()[..3], [PAD_TOKEN, UNK_TOKEN, "foo"]);
        assert_eq!(v.encode("fooBar"), vec![2, v.id("bar")]);
        assert_eq!(v.encode("zzz"), vec![UNK]);
        assert_eq!(v.encode(""), vec![UNK]);
    }

    #[test]
    fn size_cap_and_six_subtokens() {
        let v = Vocab::build(["a_b_c_d_e_f_g"], 4);
        assert_eq!(v.len(), 4);
        let full = Vocab::build(["a_b_c_d_e_f_g"], 100);
        assert_eq!(full.encode("a_b_c_d_e_f_g").len(), 6);
        assert_eq!(full.id("g"), UNK);
    }

    #[test]
    fn text_round_trip() {
        let v = Vocab::build(["alpha beta", "beta"], 100);
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        assert_eq!(Vocab::read(&buf[..]).unwrap(), v);
    }
}
