//! Metric definitions recomputed from raw records.

use buglab::eval::{no_skill_baseline, pr_auc, pr_curve, report, EvalRecord};
use buglab::rewrite::RuleKind;
use proptest::prelude::*;

fn record() -> impl Strategy<Value = EvalRecord> {
    (1usize..6, any::<bool>(), 0usize..6, 0usize..6, 0usize..3, 0usize..3, 0usize..3, 0u32..=20).prop_map(
        |(n, buggy, tl, pl, tr, pr, rt, conf)| {
            let truth_loc = (buggy).then_some(tl % n);
            let predicted_loc = (pl < n).then_some(pl);
            let warn_loc = predicted_loc.unwrap_or(pl % n);
            EvalRecord {
                origin: None,
                truth_loc,
                truth_rewrite: truth_loc.map(|l| l * 3 + tr),
                predicted_loc,
                predicted_rewrite: predicted_loc.map(|l| l * 3 + pr),
                rewrite_at_truth: truth_loc.map(|l| l * 3 + rt),
                warning: Some((warn_loc, warn_loc * 3 + pr)),
                confidence: conf as f64 / 20.0,
                bug_kind: truth_loc.map(|_| RuleKind::VarMisuse),
                n_locations: n,
            }
        },
    )
}

fn frac(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn rates_follow_their_definitions(records in prop::collection::vec(record(), 0..40)) {
        let m = report(&records);
        let buggy: Vec<&EvalRecord> = records.iter().filter(|r| r.truth_loc.is_some()).collect();
        let warned: Vec<&EvalRecord> = records.iter().filter(|r| r.predicted_loc.is_some()).collect();
        let wrong_loc = warned.iter().filter(|r| r.predicted_loc != r.truth_loc).count();
        let right_loc = buggy.iter().filter(|r| r.predicted_loc == r.truth_loc).count();
        let true_warnings = warned
            .iter()
            .filter(|r| r.predicted_loc == r.truth_loc && r.predicted_rewrite == r.truth_rewrite)
            .count();
        let repaired = buggy.iter().filter(|r| r.rewrite_at_truth == r.truth_rewrite).count();

        let fdr = frac(wrong_loc, wrong_loc + right_loc);
        prop_assert_eq!(m.rates.fdr, fdr);
        prop_assert_eq!(m.rates.dpr, 1.0 - fdr);
        prop_assert_eq!(m.rates.dre, frac(right_loc, buggy.len()));
        prop_assert_eq!(m.rates.racc, frac(repaired, buggy.len()));
        prop_assert_eq!(m.rates.pr, frac(true_warnings, warned.len()));
        prop_assert_eq!(m.rates.re, frac(true_warnings, buggy.len()));
        for x in [m.rates.fdr, m.rates.dpr, m.rates.dre, m.rates.racc, m.rates.pr, m.rates.re, m.pr_auc] {
            prop_assert!((0.0..=1.0).contains(&x));
        }

        let clean_ok = records.iter().filter(|r| r.truth_loc.is_none() && r.predicted_loc.is_none()).count();
        prop_assert_eq!(m.rates.loc, frac(right_loc + clean_ok, records.len()));
        prop_assert_eq!(m.rates.joint, frac(true_warnings + clean_ok, records.len()));

        let per_kind: usize = m.per_kind.iter().map(|k| k.counts.samples).sum();
        prop_assert_eq!(per_kind, records.len());
        let baseline: f64 = records.iter().map(|r| 1.0 / (r.n_locations + 1) as f64).sum::<f64>();
        prop_assert!((no_skill_baseline(&records) - baseline / records.len().max(1) as f64).abs() < 1e-12);
    }

    #[test]
    fn pr_curve_trades_precision_for_recall(records in prop::collection::vec(record(), 1..40)) {
        let curve = pr_curve(&records);
        for w in curve.windows(2) {
            prop_assert!(w[0].threshold > w[1].threshold);
            prop_assert!(w[0].recall <= w[1].recall);
        }
        // at each threshold, recall counts the confident correct warnings
        for p in &curve {
            let buggy = records.iter().filter(|r| r.truth_loc.is_some()).count();
            let hits = records
                .iter()
                .filter(|r| r.confidence >= p.threshold)
                .filter(|r| r.warning.map(|(l, w)| (Some(l), Some(w))) == Some((r.truth_loc, r.truth_rewrite)))
                .count();
            prop_assert_eq!(p.recall, frac(hits, buggy));
        }
        prop_assert!((0.0..=1.0).contains(&pr_auc(&curve)));
    }
}
