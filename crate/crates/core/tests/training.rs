//! Data pool, dataset construction and co-training loop behaviour.

use std::collections::HashMap;

use buglab::model::{GraphTensors, Mode, Network};
use buglab::pipeline::{functions_from_source, CorpusFunction};
use buglab::synth::desk_corpus;
use buglab::train::{
    build_vocab, make_buggy_dataset, make_hard_dataset, prepare, write_telemetry, DataPool, MetaEpochConfig,
    RunManifest, Trainer,
};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus(n: usize, seed: u64) -> Vec<CorpusFunction> {
    desk_corpus(n, seed).iter().flat_map(|f| functions_from_source(&f.path, &f.text).unwrap()).collect()
}

fn tiny_config() -> MetaEpochConfig {
    MetaEpochConfig { meta_epochs: 2, k: 2, d: 4, batch_size: 4, lr: 1e-3, warmup: 5, vocab_size: 200, seed: 11, ..Default::default() }
}

proptest! {
    #[test]
    fn pool_draws_each_entry_at_most_nu_times(
        nu in 1usize..6,
        items in 1usize..30,
        draws in 0usize..200,
        seed in any::<u64>(),
    ) {
        let mut pool = DataPool::new(nu, seed);
        pool.extend(0..items);
        let mut count = vec![0usize; items];
        let mut evicted = vec![false; items];
        for _ in 0..draws {
            let before = pool.len();
            let Some(x) = pool.sample() else { break };
            prop_assert!(!evicted[x], "entry {} drawn after eviction", x);
            count[x] += 1;
            prop_assert!(count[x] <= nu);
            if pool.len() < before {
                prop_assert_eq!(count[x], nu);
                evicted[x] = true;
            }
        }
        prop_assert_eq!(pool.len(), evicted.iter().filter(|e| !**e).count());
    }
}

#[test]
fn buggy_dataset_has_k_plus_one_entries_per_function() {
    let mut fs = corpus(20, 1);
    fs.extend(functions_from_source("e.py", "def f():\n  return None\n").unwrap());
    let vocab = build_vocab(&fs, 500);
    let prepared = prepare(&fs, &vocab).unwrap();
    let selector = Network::new(vocab.len(), 4, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for k in [0, 1, 5] {
        let (entries, observed) = make_buggy_dataset(&prepared, &selector, &vocab, k, 0.02, &mut rng).unwrap();
        assert_eq!(entries.len(), (fs.len() - 1) * (k + 1) + 1);
        assert_eq!(observed.len(), fs.len() - 1);
        for o in &observed {
            let n = prepared[o.function].clean.graph.candidates.len();
            for (&opt, v) in o.options.iter().zip(&o.variants) {
                // the identity option is the unmodified program
                assert_eq!(v.target.is_none(), opt == n);
            }
        }
    }
}

#[test]
fn hard_dataset_picks_the_highest_detector_loss() {
    let fs = corpus(20, 2);
    let vocab = build_vocab(&fs, 500);
    let prepared = prepare(&fs, &vocab).unwrap();
    let selector = Network::new(vocab.len(), 4, 3);
    let detector = Network::new(vocab.len(), 4, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (_, observed) = make_buggy_dataset(&prepared, &selector, &vocab, 5, 0.5, &mut rng).unwrap();
    let hard = make_hard_dataset(&prepared, &detector, &observed).unwrap();
    assert_eq!(hard.len(), observed.len());
    for (h, o) in hard.iter().zip(&observed) {
        let f = &prepared[o.function];
        let cands = f.function.candidates();
        // recompute every option's loss from the source text
        let mut losses: HashMap<usize, f64> = HashMap::new();
        for &opt in &o.options {
            let g = match cands.get(opt) {
                Some(pr) => f.function.buggy_graph(pr).unwrap(),
                None => f.function.graph(None),
            };
            let target = buglab::model::target_option(&g).unwrap();
            let loss = detector.detector_loss(&GraphTensors::new(&g, &vocab).unwrap(), target, Mode::Eval).unwrap();
            losses.insert(opt, loss);
        }
        let mut distinct: Vec<usize> = losses.keys().copied().collect();
        distinct.sort();
        assert_eq!(h.observed, distinct);
        let max = losses.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let want = distinct.iter().copied().find(|o| (losses[o] - max).abs() < 1e-12).unwrap();
        assert_eq!(h.chosen, want);
    }
}

#[test]
fn zero_meta_epochs_leave_parameters_unchanged() {
    let fs = corpus(10, 3);
    let vocab = build_vocab(&fs, 500);
    let cfg = MetaEpochConfig { meta_epochs: 0, ..tiny_config() };
    let mut t = Trainer::new(cfg, vocab).unwrap();
    let (d0, s0) = (t.detector.params.clone(), t.selector.params.clone());
    let rows = t.run(&fs, &[], &mut |_, _| Ok(())).unwrap();
    assert!(rows.is_empty());
    assert_eq!(t.detector.params, d0);
    assert_eq!(t.selector.params, s0);
}

#[test]
fn tiny_runs_are_deterministic() {
    let fs = corpus(12, 4);
    let holdout: Vec<_> = fs[..3].iter().map(|f| f.graph(None)).collect();
    let run = || {
        let vocab = build_vocab(&fs, 500);
        let mut t = Trainer::new(tiny_config(), vocab).unwrap();
        let mut snaps = Vec::new();
        let rows = t.run(&fs, &holdout, &mut |m, _| {
            snaps.push(m);
            Ok(())
        });
        (rows.unwrap(), t.detector.params.clone(), t.selector.params.clone(), snaps)
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0.len(), 2);
    assert!(a.0.iter().all(|r| r.detector_loss.is_finite() && r.detector_loss > 0.0));
    assert_eq!(a, b);
}

#[test]
fn telemetry_and_manifest_are_written() {
    let fs = corpus(12, 5);
    let vocab = build_vocab(&fs, 500);
    let cfg = MetaEpochConfig { meta_epochs: 1, ..tiny_config() };
    let mut t = Trainer::new(cfg.clone(), vocab.clone()).unwrap();
    let rows = t.run(&fs, &[], &mut |_, _| Ok(())).unwrap();
    let dir = std::env::temp_dir().join(format!("buglab-train-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("telemetry.csv");
    write_telemetry(&csv, &rows).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "meta_epoch,detector_loss,selector_loss,holdout_joint,holdout_loc,holdout_repair");
    assert_eq!(lines.count(), 1);

    let path = dir.join("manifest.json");
    let m = RunManifest::new(&cfg, &fs, 0, &vocab);
    m.write(&path).unwrap();
    let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.corpus_sha256.len(), 64);
    std::fs::remove_dir_all(&dir).unwrap();
}
