//! Co-training of the bug detector and the bug selector.
//!
//! Each meta-epoch the selector proposes `k` rewrites per training function;
//! the detector trains on the resulting buggy programs (plus the unmodified
//! one), and the selector then trains to propose whichever of its `k`
//! proposals the updated detector found hardest. Training samples live in
//! two pools from which entries are evicted after `ν` draws.

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::{self, EvalError};
use crate::graph::CodeGraph;
use crate::model::{
    sample_option, target_option, AdamConfig, Adam, Gradients, GraphTensors, Mode, ModelError, Network, Vocab,
    DEFAULT_DROPOUT, DEFAULT_EPSILON, DEFAULT_HIDDEN,
};
use crate::pipeline::CorpusFunction;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("meta-epoch {meta_epoch}, {network} step {step}: {source}")]
    Step {
        meta_epoch: usize,
        network: &'static str,
        step: u64,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("telemetry: {0}")]
    Csv(#[from] csv::Error),
}

/// What [`SharedPool::sample`] does when no entry is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmptyMode {
    /// Return `None` immediately.
    ReturnEmpty,
    /// Wait until an entry is pushed or the pool is closed.
    Block,
}

/// A multiset of training samples; each entry is evicted once it has been
/// drawn `ν` times.
#[derive(Debug, Clone)]
pub struct DataPool<T> {
    entries: Vec<(T, usize)>,
    nu: usize,
    rng: ChaCha8Rng,
}

impl<T: Clone> DataPool<T> {
    pub fn new(nu: usize, seed: u64) -> Self {
        assert!(nu >= 1, "entries must be usable at least once");
        DataPool { entries: Vec::new(), nu, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, item: T) {
        self.entries.push((item, self.nu));
    }

    pub fn extend(&mut self, items: impl IntoIterator<Item = T>) {
        for i in items {
            self.push(i);
        }
    }

    /// A uniformly drawn entry, or `None` when the pool is empty.
    pub fn sample(&mut self) -> Option<T> {
        if self.entries.is_empty() {
            return None;
        }
        let i = self.rng.gen_range(0..self.entries.len());
        self.entries[i].1 -= 1;
        if self.entries[i].1 == 0 {
            Some(self.entries.swap_remove(i).0)
        } else {
            Some(self.entries[i].0.clone())
        }
    }
}

/// A pool shared between producers and one training consumer.
pub struct SharedPool<T> {
    state: Mutex<(DataPool<T>, bool)>,
    ready: Condvar,
    mode: EmptyMode,
}

impl<T: Clone> SharedPool<T> {
    pub fn new(pool: DataPool<T>, mode: EmptyMode) -> Self {
        SharedPool { state: Mutex::new((pool, false)), ready: Condvar::new(), mode }
    }

    pub fn push(&self, item: T) {
        self.state.lock().expect("pool lock").0.push(item);
        self.ready.notify_one();
    }

    /// Wakes blocked consumers; later samples of an empty pool return `None`.
    pub fn close(&self) {
        self.state.lock().expect("pool lock").1 = true;
        self.ready.notify_all();
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("pool lock").0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self) -> Option<T> {
        let mut st = self.state.lock().expect("pool lock");
        loop {
            if let Some(x) = st.0.sample() {
                return Some(x);
            }
            if self.mode == EmptyMode::ReturnEmpty || st.1 {
                return None;
            }
            st = self.ready.wait(st).expect("pool lock");
        }
    }
}

/// Settings of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaEpochConfig {
    /// Number of meta-epochs `I`.
    pub meta_epochs: usize,
    /// Rewrites proposed per function per meta-epoch.
    pub k: usize,
    /// Draws before a pool entry is evicted.
    pub nu: usize,
    pub epsilon: f64,
    pub detector_epochs: usize,
    pub selector_epochs: usize,
    /// Samples per inner epoch; 0 means the size of the freshly made dataset.
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    /// Node budget of one minibatch.
    pub max_batch_nodes: usize,
    /// Snapshot every this many meta-epochs; 0 disables snapshots.
    pub snapshot_every: usize,
    pub d: usize,
    pub dropout: f64,
    pub lr: f64,
    pub warmup: u64,
    pub clip: f64,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for MetaEpochConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        MetaEpochConfig {
            meta_epochs: 10,
            k: 5,
            nu: 4,
            epsilon: DEFAULT_EPSILON,
            detector_epochs: 1,
            selector_epochs: 1,
            samples_per_epoch: 0,
            batch_size: 16,
            max_batch_nodes: 10_000,
            snapshot_every: 0,
            d: DEFAULT_HIDDEN,
            dropout: DEFAULT_DROPOUT,
            lr: adam.lr,
            warmup: adam.warmup,
            clip: adam.clip,
            vocab_size: crate::model::vocab::DEFAULT_VOCAB_SIZE,
            seed: 0,
        }
    }
}

impl MetaEpochConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if self.nu < 1 {
            return bad("nu must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.d < 1 {
            return bad("d must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.lr > 0.0) || !(self.clip > 0.0) {
            return bad("lr and clip must be positive");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, warmup: self.warmup, clip: self.clip, ..AdamConfig::default() }
    }
}

/// A graph ready for the network, with its detector target.
#[derive(Debug, Clone)]
pub struct DetectorSample {
    pub graph: Arc<CodeGraph>,
    pub tensors: Arc<GraphTensors>,
    pub target: Option<usize>,
}

impl DetectorSample {
    pub fn new(graph: CodeGraph, vocab: &Vocab) -> Result<Self, ModelError> {
        let target = target_option(&graph)?;
        let tensors = Arc::new(GraphTensors::new(&graph, vocab)?);
        Ok(DetectorSample { graph: Arc::new(graph), tensors, target })
    }

    fn trainable(&self) -> bool {
        !self.tensors.locations.is_empty()
    }
}

/// An original program, the options the selector proposed for it and the
/// one the detector found hardest.
#[derive(Debug, Clone)]
pub struct SelectorSample {
    pub clean: DetectorSample,
    pub observed: Vec<usize>,
    pub chosen: usize,
}

/// A training function with its clean graph.
#[derive(Debug, Clone)]
pub struct PreparedFunction {
    pub function: CorpusFunction,
    pub clean: DetectorSample,
}

pub fn prepare(functions: &[CorpusFunction], vocab: &Vocab) -> Result<Vec<PreparedFunction>, ModelError> {
    functions
        .par_iter()
        .map(|f| Ok(PreparedFunction { function: f.clone(), clean: DetectorSample::new(f.graph(None), vocab)? }))
        .collect()
}

/// The selector's proposals for one function: option indices in draw
/// order (the candidate count stands for the identity) and the program
/// each produced.
#[derive(Debug, Clone)]
pub struct Observed {
    pub function: usize,
    pub options: Vec<usize>,
    pub variants: Vec<DetectorSample>,
}

/// Per function, `k` ε-greedy draws from the selector's joint distribution
/// (with replacement) applied to the source text, plus the unmodified
/// program. Functions without candidates give only the unmodified entry;
/// draws whose rewritten text fails to re-parse are dropped.
pub fn make_buggy_dataset(
    functions: &[PreparedFunction],
    selector: &Network,
    vocab: &Vocab,
    k: usize,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<DetectorSample>, Vec<Observed>), ModelError> {
    let preds = functions
        .par_iter()
        .map(|f| if f.clean.trainable() { selector.predict(&f.clean.tensors).map(Some) } else { Ok(None) })
        .collect::<Result<Vec<_>, _>>()?;
    let draws: Vec<Option<Vec<usize>>> = preds
        .iter()
        .map(|p| p.as_ref().map(|p| { let j = p.joint(); (0..k).map(|_| sample_option(&j, epsilon, rng)).collect() }))
        .collect();
    let built = functions
        .par_iter()
        .zip(&draws)
        .enumerate()
        .map(|(fi, (f, d))| -> Result<(Vec<DetectorSample>, Option<Observed>), ModelError> {
            let mut entries = Vec::new();
            let observed = match d {
                None => None,
                Some(opts) => {
                    let mut ob = Observed { function: fi, options: Vec::new(), variants: Vec::new() };
                    for &o in opts {
                        let sample = match f.clean.graph.candidates.get(o) {
                            None => f.clean.clone(),
                            Some(c) => match f.function.buggy_graph(&c.rewrite) {
                                Ok(g) => DetectorSample::new(g, vocab)?,
                                Err(_) => continue,
                            },
                        };
                        ob.options.push(o);
                        ob.variants.push(sample.clone());
                        entries.push(sample);
                    }
                    Some(ob)
                }
            };
            entries.push(f.clean.clone());
            Ok((entries, observed))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut entries = Vec::new();
    let mut observed = Vec::new();
    for (e, o) in built {
        entries.extend(e);
        observed.extend(o);
    }
    Ok((entries, observed))
}

/// Index into `options` of the largest loss; ties go to the smallest
/// option (canonical candidate order, identity last).
pub fn hardest(options: &[usize], losses: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..options.len() {
        if losses[i] > losses[best] || (losses[i] == losses[best] && options[i] < options[best]) {
            best = i;
        }
    }
    best
}

/// Per observed function: the clean program, its distinct observed options
/// and the option with the highest detector loss.
pub fn make_hard_dataset(
    functions: &[PreparedFunction],
    detector: &Network,
    observed: &[Observed],
) -> Result<Vec<SelectorSample>, ModelError> {
    observed
        .par_iter()
        .filter(|o| !o.options.is_empty())
        .map(|o| {
            let mut opts: Vec<(usize, &DetectorSample)> = o.options.iter().copied().zip(&o.variants).collect();
            opts.sort_by_key(|p| p.0);
            opts.dedup_by_key(|p| p.0);
            let losses = opts
                .iter()
                .map(|(_, s)| detector.detector_loss(&s.tensors, s.target, Mode::Eval))
                .collect::<Result<Vec<_>, _>>()?;
            let options: Vec<usize> = opts.iter().map(|p| p.0).collect();
            let chosen = options[hardest(&options, &losses)];
            Ok(SelectorSample { clean: functions[o.function].clean.clone(), observed: options, chosen })
        })
        .collect()
}

/// One row of per-meta-epoch telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub meta_epoch: usize,
    pub detector_loss: f64,
    pub selector_loss: f64,
    pub holdout_joint: f64,
    pub holdout_loc: f64,
    pub holdout_repair: f64,
}

pub fn write_telemetry(path: &Path, rows: &[TelemetryRow]) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Seeds, configuration and inputs of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config: MetaEpochConfig,
    pub corpus_sha256: String,
    pub training_functions: usize,
    pub holdout_samples: usize,
    pub vocab_size: usize,
}

impl RunManifest {
    pub fn new(cfg: &MetaEpochConfig, functions: &[CorpusFunction], holdout: usize, vocab: &Vocab) -> Self {
        RunManifest {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            corpus_sha256: corpus_hash(functions),
            training_functions: functions.len(),
            holdout_samples: holdout,
            vocab_size: vocab.len(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), TrainError> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self).map_err(std::io::Error::other)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// SHA-256 over origins and canonical source text, in corpus order.
pub fn corpus_hash(functions: &[CorpusFunction]) -> String {
    let mut h = Sha256::new();
    for f in functions {
        h.update(f.origin.as_bytes());
        h.update([0]);
        h.update(f.source().as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws up to `batch` trainable samples within the node budget.
fn draw_batch<T: Clone>(pool: &mut DataPool<T>, batch: usize, max_nodes: usize, nodes: impl Fn(&T) -> usize) -> Vec<T> {
    let mut out = Vec::new();
    let mut used = 0;
    while out.len() < batch {
        let Some(x) = pool.sample() else { break };
        let n = nodes(&x);
        if !out.is_empty() && used + n > max_nodes {
            break;
        }
        used += n;
        out.push(x);
    }
    out
}

/// Mean loss and gradient over a batch, summed in batch order.
fn batch_gradient<T: Sync>(
    net: &Network,
    batch: &[T],
    f: impl Fn(&Network, &T, usize) -> Result<(f64, Gradients), ModelError> + Sync,
) -> Result<(f64, Gradients), ModelError> {
    let parts = batch.par_iter().enumerate().map(|(i, x)| f(net, x, i)).collect::<Result<Vec<_>, _>>()?;
    let w = 1.0 / parts.len() as f64;
    let mut total = Gradients::zeros_like(&net.params.values);
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l * w;
        total.add_scaled(g, w);
    }
    Ok((loss, total))
}

/// The co-training state: both networks, their optimisers and pools.
pub struct Trainer {
    pub cfg: MetaEpochConfig,
    pub vocab: Vocab,
    pub detector: Network,
    pub selector: Network,
    detector_opt: Adam,
    selector_opt: Adam,
    detector_pool: DataPool<DetectorSample>,
    selector_pool: DataPool<SelectorSample>,
    rng: ChaCha8Rng,
    meta_epoch: usize,
}

impl Trainer {
    /// Fresh networks initialised from the configured seed.
    pub fn new(cfg: MetaEpochConfig, vocab: Vocab) -> Result<Self, TrainError> {
        let detector = Network::new(vocab.len(), cfg.d, mix(cfg.seed, 1));
        let selector = Network::new(vocab.len(), cfg.d, mix(cfg.seed, 2));
        Self::with_networks(cfg, vocab, detector, selector)
    }

    pub fn with_networks(cfg: MetaEpochConfig, vocab: Vocab, detector: Network, selector: Network) -> Result<Self, TrainError> {
        cfg.validate()?;
        for n in [&detector, &selector] {
            if n.vocab_size() != vocab.len() {
                return Err(ModelError::Shape(format!("network has {} vocabulary rows, vocabulary has {}", n.vocab_size(), vocab.len())).into());
            }
        }
        Ok(Trainer {
            detector_opt: Adam::new(cfg.adam(), &detector.params),
            selector_opt: Adam::new(cfg.adam(), &selector.params),
            detector_pool: DataPool::new(cfg.nu, mix(cfg.seed, 3)),
            selector_pool: DataPool::new(cfg.nu, mix(cfg.seed, 4)),
            rng: ChaCha8Rng::seed_from_u64(mix(cfg.seed, 5)),
            meta_epoch: 0,
            cfg,
            vocab,
            detector,
            selector,
        })
    }

    pub fn meta_epochs_done(&self) -> usize {
        self.meta_epoch
    }

    fn train_detector(&mut self, fresh: usize) -> Result<f64, TrainError> {
        let per_epoch = if self.cfg.samples_per_epoch == 0 { fresh } else { self.cfg.samples_per_epoch };
        let (mut seen, mut sum, mut n) = (0, 0.0, 0);
        let (seed, dropout, me) = (self.cfg.seed, self.cfg.dropout, self.meta_epoch);
        while seen < per_epoch * self.cfg.detector_epochs {
            let batch: Vec<DetectorSample> =
                draw_batch(&mut self.detector_pool, self.cfg.batch_size, self.cfg.max_batch_nodes, |s| s.graph.nodes.len())
                    .into_iter()
                    .filter(DetectorSample::trainable)
                    .collect();
            if batch.is_empty() {
                if self.detector_pool.is_empty() {
                    break;
                }
                continue;
            }
            seen += batch.len();
            let step = self.detector_opt.step + 1;
            let ctx = |source| TrainError::Step { meta_epoch: me, network: "detector", step, source };
            let (loss, g) = batch_gradient(&self.detector, &batch, |net, s, i| {
                let mode = Mode::Train { seed: mix(mix(seed, step), i as u64), dropout };
                net.detector_grad(&s.tensors, s.target, mode)
            })
            .map_err(ctx)?;
            self.detector_opt.step(&mut self.detector.params, &g).map_err(ctx)?;
            sum += loss;
            n += 1;
        }
        Ok(if n == 0 { 0.0 } else { sum / n as f64 })
    }

    fn train_selector(&mut self, fresh: usize) -> Result<f64, TrainError> {
        let per_epoch = if self.cfg.samples_per_epoch == 0 { fresh } else { self.cfg.samples_per_epoch };
        let (mut seen, mut sum, mut n) = (0, 0.0, 0);
        let (seed, dropout, me) = (self.cfg.seed, self.cfg.dropout, self.meta_epoch);
        while seen < per_epoch * self.cfg.selector_epochs {
            let batch =
                draw_batch(&mut self.selector_pool, self.cfg.batch_size, self.cfg.max_batch_nodes, |s| s.clean.graph.nodes.len());
            if batch.is_empty() {
                break;
            }
            seen += batch.len();
            let step = self.selector_opt.step + 1;
            let ctx = |source| TrainError::Step { meta_epoch: me, network: "selector", step, source };
            let (loss, g) = batch_gradient(&self.selector, &batch, |net, s, i| {
                let mode = Mode::Train { seed: mix(mix(!seed, step), i as u64), dropout };
                net.selector_grad(&s.clean.tensors, &s.observed, s.chosen, mode)
            })
            .map_err(ctx)?;
            self.selector_opt.step(&mut self.selector.params, &g).map_err(ctx)?;
            sum += loss;
            n += 1;
        }
        Ok(if n == 0 { 0.0 } else { sum / n as f64 })
    }

    /// One meta-epoch: make buggy data with the selector, train the
    /// detector, make hard data with the new detector, train the selector,
    /// then score the held-out graphs.
    pub fn meta_epoch(&mut self, functions: &[PreparedFunction], holdout: &[CodeGraph]) -> Result<TelemetryRow, TrainError> {
        let (buggy, observed) =
            make_buggy_dataset(functions, &self.selector, &self.vocab, self.cfg.k, self.cfg.epsilon, &mut self.rng)?;
        let fresh = buggy.len();
        self.detector_pool.extend(buggy);
        let detector_loss = self.train_detector(fresh)?;
        let hard = make_hard_dataset(functions, &self.detector, &observed)?;
        let fresh = hard.len();
        self.selector_pool.extend(hard);
        let selector_loss = self.train_selector(fresh)?;
        let (mut joint, mut loc, mut repair) = (0.0, 0.0, 0.0);
        if !holdout.is_empty() {
            let (_, m) = eval::evaluate(&self.detector, &self.vocab, holdout)?;
            (joint, loc, repair) = (m.rates.joint, m.rates.loc, m.rates.repair);
        }
        self.meta_epoch += 1;
        Ok(TelemetryRow {
            meta_epoch: self.meta_epoch,
            detector_loss,
            selector_loss,
            holdout_joint: joint,
            holdout_loc: loc,
            holdout_repair: repair,
        })
    }

    /// Runs the configured number of meta-epochs. `snapshot` is called
    /// after every `snapshot_every`-th meta-epoch with the meta-epoch count.
    pub fn run(
        &mut self,
        functions: &[CorpusFunction],
        holdout: &[CodeGraph],
        snapshot: &mut dyn FnMut(usize, &Trainer) -> Result<(), TrainError>,
    ) -> Result<Vec<TelemetryRow>, TrainError> {
        let mut rows = Vec::new();
        if self.cfg.meta_epochs == 0 {
            return Ok(rows);
        }
        let prepared = prepare(functions, &self.vocab)?;
        for _ in 0..self.cfg.meta_epochs {
            rows.push(self.meta_epoch(&prepared, holdout)?);
            let every = self.cfg.snapshot_every;
            if every > 0 && self.meta_epoch % every == 0 {
                snapshot(self.meta_epoch, self)?;
            }
        }
        Ok(rows)
    }
}

/// Builds the vocabulary from the clean training graphs.
pub fn build_vocab(functions: &[CorpusFunction], max_size: usize) -> Vocab {
    let graphs: Vec<CodeGraph> = functions.par_iter().map(|f| f.graph(None)).collect();
    Vocab::from_graphs(&graphs, max_size)
}

/// Mean detector loss on rewrites drawn from the selector versus rewrites
/// drawn uniformly, `draws` of each per function with candidates.
/// Selector draws are restricted to real rewrites (NoBug excluded).
pub fn hardness_probe(
    detector: &Network,
    selector: &Network,
    vocab: &Vocab,
    functions: &[CorpusFunction],
    draws: usize,
    seed: u64,
) -> Result<(f64, f64), ModelError> {
    let prepared = prepare(functions, vocab)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<(usize, usize, bool)> = Vec::new();
    for (i, f) in prepared.iter().enumerate() {
        let n = f.clean.graph.candidates.len();
        if n == 0 {
            continue;
        }
        let mut joint = selector.predict(&f.clean.tensors)?.joint();
        joint.pop();
        for _ in 0..draws {
            picks.push((i, sample_option(&joint, 0.0, &mut rng), true));
            picks.push((i, rng.gen_range(0..n), false));
        }
    }
    let losses = picks
        .par_iter()
        .filter_map(|&(i, c, sel)| {
            let f = &prepared[i];
            let g = f.function.buggy_graph(&f.clean.graph.candidates[c].rewrite).ok()?;
            Some(DetectorSample::new(g, vocab).and_then(|s| Ok((sel, detector.detector_loss(&s.tensors, s.target, Mode::Eval)?))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mean = |want: bool| {
        let v: Vec<f64> = losses.iter().filter(|l| l.0 == want).map(|l| l.1).collect();
        if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 }
    };
    Ok((mean(true), mean(false)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_evicts_after_nu_draws() {
        let mut p = DataPool::new(3, 1);
        p.extend(0..5usize);
        let mut counts = [0usize; 5];
        while let Some(x) = p.sample() {
            counts[x] += 1;
        }
        assert_eq!(counts, [3; 5]);
    }

    #[test]
    fn hardest_prefers_first_on_ties() {
        assert_eq!(hardest(&[0, 1, 2], &[0.1, 2.3, 0.4]), 1);
        assert_eq!(hardest(&[2, 5, 9], &[1.0, 1.0, 1.0]), 0);
    }

    #[test]
    fn blocking_pool_wakes_on_push() {
        let pool = Arc::new(SharedPool::new(DataPool::new(1, 0), EmptyMode::Block));
        let p2 = pool.clone();
        let h = std::thread::spawn(move || p2.sample());
        std::thread::sleep(std::time::Duration::from_millis(20));
        pool.push(7u32);
        assert_eq!(h.join().unwrap(), Some(7));
        pool.close();
        assert_eq!(pool.sample(), None);
        let q = SharedPool::<u32>::new(DataPool::new(1, 0), EmptyMode::ReturnEmpty);
        assert_eq!(q.sample(), None);
    }
}
