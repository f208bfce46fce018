//! From source text to training graphs: candidate enumeration, bug
//! injection by rewriting and re-parsing the text, and graph extraction.

use std::sync::Arc;

use thiserror::Error;

use crate::graph::{extract_graph, CodeGraph, GraphInputs};
use crate::lang::symbols::resolve_functions;
use crate::lang::{parse, print_unit, ParseError, SourceUnit, SyntaxTree};
use crate::rewrite::{apply, enumerate_scope, invert, PotentialRewrite, RewriteError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("rewritten code does not parse: {0}")]
    Reparse(#[from] ParseError),
    #[error("rewritten code has {found} functions, expected {expected}")]
    FunctionCount { expected: usize, found: usize },
}

/// One function together with the unit it was parsed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusFunction {
    pub origin: String,
    pub unit: Arc<Vec<SyntaxTree>>,
    pub index: usize,
}

impl CorpusFunction {
    pub fn tree(&self) -> &SyntaxTree {
        &self.unit[self.index]
    }

    pub fn name(&self) -> &str {
        self.tree().function_name().unwrap_or("?")
    }

    pub fn source(&self) -> String {
        crate::lang::print_function(self.tree())
    }

    /// R_ρ(s) in canonical order.
    pub fn candidates(&self) -> Vec<PotentialRewrite> {
        let tbl = resolve_functions(&self.unit);
        enumerate_scope(&tbl.functions[self.index], &tbl)
    }

    /// The graph of this function with its candidates; `target` is the
    /// repair the detector should predict.
    pub fn graph(&self, target: Option<&PotentialRewrite>) -> CodeGraph {
        let tbl = resolve_functions(&self.unit);
        let scope = &tbl.functions[self.index];
        let candidates = enumerate_scope(scope, &tbl);
        let mut g = extract_graph(&GraphInputs {
            scope,
            table: &tbl,
            unit: &self.unit,
            candidates: &candidates,
            target: target.filter(|t| !t.is_identity()),
        });
        g.origin = Some(format!("{}:{}", self.origin, self.name()));
        g
    }

    /// Applies `pr`, prints and re-parses the unit, and returns the
    /// rewritten function with the rewrite that undoes `pr` on it.
    pub fn inject(&self, pr: &PotentialRewrite) -> Result<(CorpusFunction, Option<PotentialRewrite>), PipelineError> {
        if pr.is_identity() {
            return Ok((self.clone(), None));
        }
        let rewritten = apply(self.tree(), pr)?;
        let mut functions = self.unit.as_ref().clone();
        functions[self.index] = rewritten;
        let text = print_unit(&functions);
        let reparsed = parse(&text)?;
        if reparsed.functions.len() != functions.len() {
            return Err(PipelineError::FunctionCount { expected: functions.len(), found: reparsed.functions.len() });
        }
        let buggy = CorpusFunction { origin: self.origin.clone(), unit: Arc::new(reparsed.functions), index: self.index };
        let repair = invert(pr, buggy.tree())?;
        Ok((buggy, Some(repair)))
    }

    /// The graph of the code after `pr`, labelled with its repair.
    pub fn buggy_graph(&self, pr: &PotentialRewrite) -> Result<CodeGraph, PipelineError> {
        let (buggy, repair) = self.inject(pr)?;
        Ok(buggy.graph(repair.as_ref()))
    }
}

/// Every function of a parsed unit.
pub fn corpus_functions(origin: &str, u: &SourceUnit) -> Vec<CorpusFunction> {
    let unit = Arc::new(u.functions.clone());
    (0..u.functions.len()).map(|index| CorpusFunction { origin: origin.to_string(), unit: unit.clone(), index }).collect()
}

/// Parses `text` and returns its functions.
pub fn functions_from_source(origin: &str, text: &str) -> Result<Vec<CorpusFunction>, ParseError> {
    Ok(corpus_functions(origin, &parse(text)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "def f(a, b):\n  if a < b:\n    return a\n  return b\n";

    #[test]
    fn injected_bug_is_repaired_by_target() {
        let f = &functions_from_source("t.py", SRC).unwrap()[0];
        let cands = f.candidates();
        for pr in &cands {
            let g = f.buggy_graph(pr).unwrap();
            let t = g.target.clone().unwrap();
            assert!(g.target_index().is_some(), "{pr} has an unlisted repair {t}");
            let (buggy, _) = f.inject(pr).unwrap();
            let fixed = apply(buggy.tree(), &t).unwrap();
            assert_eq!(fixed.without_spans(), f.tree().without_spans());
        }
    }

    #[test]
    fn identity_gives_clean_graph() {
        let f = &functions_from_source("t.py", SRC).unwrap()[0];
        let g = f.buggy_graph(&PotentialRewrite::identity()).unwrap();
        assert!(!g.is_buggy());
        assert_eq!(g.origin.as_deref(), Some("t.py:f"));
    }
}
