//! RandomBugs-style test corpora, detection/repair metrics, precision-recall
//! sweeps and source scanning.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::CodeGraph;
use crate::lang::{line_col, node_at, print_function, SourceUnit};
use crate::model::{target_option, GraphTensors, ModelError, Network, Prediction, Vocab};
use crate::pipeline::{corpus_functions, CorpusFunction, PipelineError};
use crate::rewrite::{apply, RuleKind};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sample {index}: {source}")]
    Model {
        index: usize,
        #[source]
        source: ModelError,
    },
    #[error("sample {index}: repair target is not among the graph's candidates")]
    CandidateMismatch { index: usize },
    #[error("model vocabulary has {model} rows but the vocabulary file has {vocab}")]
    VocabMismatch { model: usize, vocab: usize },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Per function: the original plus `variants` copies with one uniformly
/// drawn candidate rewrite applied each (drawn with replacement).
/// Functions without candidates contribute only the original.
pub fn generate_random_bugs(functions: &[CorpusFunction], variants: usize, seed: u64) -> Result<Vec<CodeGraph>, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(functions.len() * (variants + 1));
    for f in functions {
        out.push(f.graph(None));
        let cands = f.candidates();
        if cands.is_empty() {
            continue;
        }
        for _ in 0..variants {
            let pr = &cands[rng.gen_range(0..cands.len())];
            out.push(f.buggy_graph(pr)?);
        }
    }
    Ok(out)
}

/// One scored sample. Locations index the graph's distinct candidate
/// locations; `None` stands for NoBug.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub origin: Option<String>,
    pub truth_loc: Option<usize>,
    /// Candidate index of the true repair.
    pub truth_rewrite: Option<usize>,
    pub predicted_loc: Option<usize>,
    pub predicted_rewrite: Option<usize>,
    /// Most likely rewrite at the true location.
    pub rewrite_at_truth: Option<usize>,
    /// Most likely non-NoBug location and its rewrite, raised as a warning
    /// when `confidence` clears a threshold.
    pub warning: Option<(usize, usize)>,
    /// `1 − p_loc(NoBug)`.
    pub confidence: f64,
    pub bug_kind: Option<RuleKind>,
    pub n_locations: usize,
}

impl EvalRecord {
    pub fn is_buggy(&self) -> bool {
        self.truth_loc.is_some()
    }

    pub fn loc_correct(&self) -> bool {
        self.predicted_loc == self.truth_loc
    }

    pub fn repair_correct(&self) -> bool {
        self.truth_rewrite.is_some() && self.rewrite_at_truth == self.truth_rewrite
    }

    pub fn joint_correct(&self) -> bool {
        self.loc_correct() && (!self.is_buggy() || self.predicted_rewrite == self.truth_rewrite)
    }

    /// The prediction when warnings need confidence ≥ `threshold`.
    fn at_threshold(&self, threshold: f64) -> (Option<usize>, Option<usize>) {
        match self.warning {
            Some((l, r)) if self.confidence >= threshold => (Some(l), Some(r)),
            _ => (None, None),
        }
    }
}

/// Scores one graph. Graphs without candidates are predicted NoBug with
/// confidence 0.
pub fn score_graph(net: &Network, vocab: &Vocab, g: &CodeGraph) -> Result<EvalRecord, ModelError> {
    let truth_rewrite = target_option(g)?;
    let bug_kind = g.bug_kind();
    let origin = g.origin.clone();
    if g.candidates.is_empty() {
        return Ok(EvalRecord {
            origin,
            truth_loc: None,
            truth_rewrite,
            predicted_loc: None,
            predicted_rewrite: None,
            rewrite_at_truth: None,
            warning: None,
            confidence: 0.0,
            bug_kind,
            n_locations: 0,
        });
    }
    let gt = GraphTensors::new(g, vocab)?;
    let p = net.predict(&gt)?;
    Ok(record_from_prediction(&p, truth_rewrite, bug_kind, origin))
}

pub(crate) fn record_from_prediction(
    p: &Prediction,
    truth_rewrite: Option<usize>,
    bug_kind: Option<RuleKind>,
    origin: Option<String>,
) -> EvalRecord {
    let nb = p.nobug_index();
    let truth_loc = truth_rewrite.map(|c| p.cand_loc[c]);
    let best = p.best_location();
    let predicted_loc = (best != nb).then_some(best);
    let predicted_rewrite = predicted_loc.and_then(|l| p.best_rewrite_at(l));
    let bug_loc = crate::model::argmax(&p.p_loc[..nb]);
    let warning = p.best_rewrite_at(bug_loc).map(|r| (bug_loc, r));
    EvalRecord {
        origin,
        truth_loc,
        truth_rewrite,
        predicted_loc,
        predicted_rewrite,
        rewrite_at_truth: truth_loc.and_then(|l| p.best_rewrite_at(l)),
        warning,
        confidence: (1.0 - p.p_nobug()).clamp(0.0, 1.0),
        bug_kind,
        n_locations: nb,
    }
}

/// Raw counts behind the detection and repair rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub samples: usize,
    pub buggy: usize,
    pub dfw: usize,
    pub dtw: usize,
    pub tw: usize,
    pub fw: usize,
    /// Buggy samples whose most likely rewrite at the true location is right.
    pub correct_repairs: usize,
    pub joint_correct: usize,
    pub loc_correct: usize,
}

impl Counts {
    fn add(&mut self, pred_loc: Option<usize>, pred_rew: Option<usize>, r: &EvalRecord) {
        self.samples += 1;
        let buggy = r.is_buggy();
        self.buggy += buggy as usize;
        let loc_ok = pred_loc == r.truth_loc;
        let rew_ok = pred_rew == r.truth_rewrite;
        let dfw = !loc_ok && pred_loc.is_some();
        let dtw = loc_ok && buggy;
        self.dfw += dfw as usize;
        self.dtw += dtw as usize;
        self.tw += (dtw && rew_ok) as usize;
        self.fw += (dfw || (pred_loc.is_some() && !rew_ok)) as usize;
        self.correct_repairs += r.repair_correct() as usize;
        self.loc_correct += loc_ok as usize;
        self.joint_correct += (loc_ok && (!buggy || rew_ok)) as usize;
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> Counts {
        let mut c = Counts::default();
        for r in records {
            c.add(r.predicted_loc, r.predicted_rewrite, r);
        }
        c
    }
}

/// `a / b`, or 0 when `b` is 0.
fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub fdr: f64,
    pub dpr: f64,
    pub dre: f64,
    pub racc: f64,
    pub pr: f64,
    pub re: f64,
    pub joint: f64,
    pub loc: f64,
    pub repair: f64,
}

impl Rates {
    /// Empty denominators give 0.
    pub fn from_counts(c: &Counts) -> Rates {
        let fdr = ratio(c.dfw, c.dfw + c.dtw);
        let racc = ratio(c.correct_repairs, c.buggy);
        Rates {
            fdr,
            dpr: 1.0 - fdr,
            dre: ratio(c.dtw, c.buggy),
            racc,
            pr: ratio(c.tw, c.tw + c.fw),
            re: ratio(c.tw, c.buggy),
            joint: ratio(c.joint_correct, c.samples),
            loc: ratio(c.loc_correct, c.samples),
            repair: racc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindRow {
    pub kind: String,
    pub counts: Counts,
    pub rates: Rates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub counts: Counts,
    pub rates: Rates,
    pub per_kind: Vec<KindRow>,
    pub pr_curve: Vec<PrPoint>,
    pub pr_auc: f64,
    /// Expected location accuracy of a uniform guess over each sample's
    /// locations and NoBug.
    pub no_skill_loc: f64,
}

/// Precision and recall of detect-and-repair warnings for every distinct
/// confidence threshold, from the highest down.
pub fn pr_curve(records: &[EvalRecord]) -> Vec<PrPoint> {
    let mut thresholds: Vec<f64> = records.iter().map(|r| r.confidence).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    thresholds
        .into_iter()
        .map(|t| {
            let mut c = Counts::default();
            for r in records {
                let (l, w) = r.at_threshold(t);
                c.add(l, w, r);
            }
            PrPoint { threshold: t, precision: ratio(c.tw, c.tw + c.fw), recall: ratio(c.tw, c.buggy) }
        })
        .collect()
}

/// Trapezoid-rule area under precision over recall, starting from recall
/// 0 at the first point's precision.
pub fn pr_auc(curve: &[PrPoint]) -> f64 {
    let Some(first) = curve.first() else { return 0.0 };
    let (mut r0, mut p0) = (0.0, first.precision);
    let mut area = 0.0;
    for p in curve {
        area += (p.recall - r0) * (p.precision + p0) / 2.0;
        r0 = p.recall;
        p0 = p.precision;
    }
    area
}

pub fn no_skill_baseline(records: &[EvalRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| 1.0 / (r.n_locations + 1) as f64).sum::<f64>() / records.len() as f64
}

pub fn report(records: &[EvalRecord]) -> MetricReport {
    let counts = Counts::from_records(records);
    let mut by_kind: BTreeMap<RuleKind, Vec<&EvalRecord>> = BTreeMap::new();
    let mut clean = Vec::new();
    for r in records {
        match r.bug_kind {
            Some(k) if r.is_buggy() => by_kind.entry(k).or_default().push(r),
            _ => clean.push(r),
        }
    }
    let mut per_kind: Vec<KindRow> = by_kind
        .into_iter()
        .map(|(k, rs)| {
            let c = Counts::from_records(rs);
            KindRow { kind: k.name().to_string(), rates: Rates::from_counts(&c), counts: c }
        })
        .collect();
    if !clean.is_empty() {
        let c = Counts::from_records(clean);
        per_kind.push(KindRow { kind: "NoBug".into(), rates: Rates::from_counts(&c), counts: c });
    }
    let pr_curve = pr_curve(records);
    MetricReport {
        rates: Rates::from_counts(&counts),
        counts,
        per_kind,
        pr_auc: pr_auc(&pr_curve),
        pr_curve,
        no_skill_loc: no_skill_baseline(records),
    }
}

/// Scores every graph (in parallel on the current rayon pool) and reports.
pub fn evaluate(net: &Network, vocab: &Vocab, graphs: &[CodeGraph]) -> Result<(Vec<EvalRecord>, MetricReport), EvalError> {
    if net.vocab_size() != vocab.len() {
        return Err(EvalError::VocabMismatch { model: net.vocab_size(), vocab: vocab.len() });
    }
    let records = graphs
        .par_iter()
        .enumerate()
        .map(|(index, g)| {
            score_graph(net, vocab, g).map_err(|source| match source {
                ModelError::TargetNotInCandidates => EvalError::CandidateMismatch { index },
                source => EvalError::Model { index, source },
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let r = report(&records);
    Ok((records, r))
}

impl MetricReport {
    /// Plain-text summary table.
    pub fn render_table(&self) -> String {
        let r = &self.rates;
        let mut s = format!(
            "samples {}  buggy {}\njoint {:.4}  loc {:.4}  repair {:.4}  (no-skill loc {:.4})\n\
             DFW {}  DTW {}  FDR {:.4}  DPr {:.4}  DRe {:.4}  RAcc {:.4}\n\
             TW {}  FW {}  Pr {:.4}  Re {:.4}  PR-AUC {:.4}\n\n",
            self.counts.samples,
            self.counts.buggy,
            r.joint,
            r.loc,
            r.repair,
            self.no_skill_loc,
            self.counts.dfw,
            self.counts.dtw,
            r.fdr,
            r.dpr,
            r.dre,
            r.racc,
            self.counts.tw,
            self.counts.fw,
            r.pr,
            r.re,
            self.pr_auc,
        );
        s.push_str(&format!("{:<20} {:>7} {:>8} {:>8} {:>8}\n", "kind", "n", "joint", "loc", "repair"));
        for k in &self.per_kind {
            s.push_str(&format!(
                "{:<20} {:>7} {:>8.4} {:>8.4} {:>8.4}\n",
                k.kind, k.counts.samples, k.rates.joint, k.rates.loc, k.rates.repair
            ));
        }
        s
    }
}

/// A suspected bug in scanned source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub file: String,
    pub function: String,
    pub line: usize,
    pub col: usize,
    pub kind: String,
    pub repair_diff: String,
    /// Joint probability of this location and repair.
    pub confidence: f64,
}

/// Lines of `before` and `after` that differ, as `-`/`+` pairs.
fn line_diff(before: &str, after: &str) -> String {
    let (a, b): (Vec<&str>, Vec<&str>) = (before.lines().collect(), after.lines().collect());
    let mut out = Vec::new();
    for i in 0..a.len().max(b.len()) {
        let (x, y) = (a.get(i), b.get(i));
        if x != y {
            if let Some(x) = x {
                out.push(format!("-{}", x.trim()));
            }
            if let Some(y) = y {
                out.push(format!("+{}", y.trim()));
            }
        }
    }
    out.join("\n")
}

/// Warnings for every function of `unit` whose bug confidence reaches
/// `threshold`: its `top_n` most likely repairs.
pub fn scan_unit(
    net: &Network,
    vocab: &Vocab,
    file: &str,
    unit: &SourceUnit,
    top_n: usize,
    threshold: f64,
) -> Result<Vec<Warning>, ModelError> {
    let mut out = Vec::new();
    for f in corpus_functions(file, unit) {
        let g = f.graph(None);
        if g.candidates.is_empty() {
            continue;
        }
        let p = net.predict(&GraphTensors::new(&g, vocab)?)?;
        if 1.0 - p.p_nobug() < threshold {
            continue;
        }
        let joint = p.joint();
        let mut order: Vec<usize> = (0..g.candidates.len()).collect();
        order.sort_by(|&a, &b| joint[b].total_cmp(&joint[a]));
        let before = print_function(f.tree());
        for &c in order.iter().take(top_n) {
            let pr = &g.candidates[c].rewrite;
            let offset = node_at(f.tree(), &pr.location).map_or(f.tree().span.start, |n| n.span.start);
            let (line, col) = line_col(&unit.text, offset);
            let after = apply(f.tree(), pr).map(|t| print_function(&t)).unwrap_or_default();
            out.push(Warning {
                file: file.to_string(),
                function: f.name().to_string(),
                line,
                col,
                kind: pr.kind().name().to_string(),
                repair_diff: line_diff(&before, &after),
                confidence: joint[c],
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(truth: Option<(usize, usize)>, pred: Option<(usize, usize)>, at_truth: Option<usize>, conf: f64) -> EvalRecord {
        EvalRecord {
            origin: None,
            truth_loc: truth.map(|t| t.0),
            truth_rewrite: truth.map(|t| t.1),
            predicted_loc: pred.map(|p| p.0),
            predicted_rewrite: pred.map(|p| p.1),
            rewrite_at_truth: at_truth,
            warning: pred.or(Some((0, 0))),
            confidence: conf,
            bug_kind: truth.map(|_| RuleKind::VarMisuse),
            n_locations: 3,
        }
    }

    #[test]
    fn fdr_example() {
        let c = Counts { dtw: 8, dfw: 2, ..Counts::default() };
        let r = Rates::from_counts(&c);
        assert!((r.fdr - 0.2).abs() < 1e-12 && (r.dpr - 0.8).abs() < 1e-12);
    }

    #[test]
    fn repair_accuracy_example() {
        let rs: Vec<EvalRecord> =
            (0..10).map(|i| rec(Some((1, 2)), None, Some(if i < 5 { 2 } else { 3 }), 0.1)).collect();
        assert_eq!(report(&rs).rates.racc, 0.5);
    }

    #[test]
    fn perfect_predictor_has_unit_auc() {
        let mut rs = Vec::new();
        for i in 0..5 {
            rs.push(rec(Some((i % 3, i)), Some((i % 3, i)), Some(i), 0.9 + i as f64 * 0.01));
            rs.push(rec(None, None, None, 0.1 + i as f64 * 0.01));
        }
        let m = report(&rs);
        assert_eq!(m.pr_auc, 1.0);
        assert_eq!(m.rates.joint, 1.0);
    }

    #[test]
    fn recall_falls_as_threshold_rises() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rs: Vec<EvalRecord> = (0..200)
            .map(|_| {
                let truth = rng.gen_bool(0.6).then(|| (rng.gen_range(0..3), rng.gen_range(0..4)));
                let pred = (rng.gen_range(0..3), rng.gen_range(0..4));
                rec(truth, Some(pred), None, rng.gen())
            })
            .collect();
        let curve = pr_curve(&rs);
        for w in curve.windows(2) {
            assert!(w[0].threshold > w[1].threshold && w[0].recall <= w[1].recall);
        }
        for r in &rs {
            assert!(!r.joint_correct() || r.loc_correct());
        }
    }

    #[test]
    fn diff_of_one_token() {
        assert_eq!(line_diff("a\nb = c\n", "a\nb = d\n"), "-b = c\n+b = d");
    }
}
