//! Detector and selector networks.
//!
//! Both roles share one architecture: subtoken embeddings max-pooled per
//! entity, eight residual message-passing layers, a pointer-style location
//! head with a NoBug option, and rule-specific rewrite scorers. Detector and
//! selector keep separate parameters.

mod checkpoint;
pub mod gradcheck;
pub mod network;
mod optim;
pub mod params;
pub mod tape;
pub mod vocab;

use rand::Rng;
use thiserror::Error;

use crate::graph::CodeGraph;
use crate::rewrite::PotentialRewrite;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use network::{GraphTensors, Mode};
pub use optim::{Adam, AdamConfig, StepReport};
pub use params::{init_params, ParamSet};
pub use tape::{Gradients, Tape};
pub use vocab::Vocab;

pub const DEFAULT_HIDDEN: usize = 256;
pub const DEFAULT_DROPOUT: f64 = 0.2;
pub const DEFAULT_EPSILON: f64 = 0.02;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no candidate locations")]
    EmptyCandidates,
    #[error("missing scoring metadata for {0}")]
    MissingMetadata(&'static str),
    #[error("ground truth is not among the candidates")]
    TargetNotInCandidates,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient in {param}")]
    NonFinite { param: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Output of the network in evaluation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Over candidate locations in canonical order, NoBug last.
    pub p_loc: Vec<f64>,
    /// Per candidate, its probability among the rewrites at its location.
    pub p_rew: Vec<f64>,
    /// Location index of each candidate.
    pub cand_loc: Vec<usize>,
}

impl Prediction {
    pub fn nobug_index(&self) -> usize {
        self.p_loc.len() - 1
    }

    pub fn p_nobug(&self) -> f64 {
        self.p_loc[self.nobug_index()]
    }

    /// Joint probability of every candidate, then NoBug.
    pub fn joint(&self) -> Vec<f64> {
        let mut j: Vec<f64> = self.p_rew.iter().zip(&self.cand_loc).map(|(r, &l)| r * self.p_loc[l]).collect();
        j.push(self.p_nobug());
        j
    }

    /// The most likely location (NoBug is `nobug_index()`); ties go to the
    /// earliest.
    pub fn best_location(&self) -> usize {
        argmax(&self.p_loc)
    }

    /// The most likely candidate at location `loc`.
    pub fn best_rewrite_at(&self, loc: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &l) in self.cand_loc.iter().enumerate() {
            if l == loc && best.map_or(true, |b| self.p_rew[i] > self.p_rew[b]) {
                best = Some(i);
            }
        }
        best
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// One parameterised network (a detector or a selector).
#[derive(Debug, Clone)]
pub struct Network {
    pub params: ParamSet,
    layout: params::Layout,
}

impl Network {
    pub fn new(vocab_size: usize, d: usize, seed: u64) -> Self {
        Self::from_params(init_params(vocab_size, d, seed)).expect("fresh parameters are well-formed")
    }

    /// Checks names and shapes against the architecture.
    pub fn from_params(params: ParamSet) -> Result<Self, ModelError> {
        let emb = params
            .index("embedding")
            .ok_or_else(|| ModelError::Shape("missing parameter embedding".into()))?;
        let (v, d) = params.values[emb].dim();
        for (name, shape) in params::parameter_shapes(v, d) {
            let i = params.index(&name).ok_or_else(|| ModelError::Shape(format!("missing parameter {name}")))?;
            if params.values[i].dim() != shape {
                return Err(ModelError::Shape(format!(
                    "{name} is {:?}, expected {shape:?} for d={d}",
                    params.values[i].dim()
                )));
            }
        }
        let layout = params.layout();
        Ok(Network { params, layout })
    }

    pub fn layout(&self) -> &params::Layout {
        &self.layout
    }

    pub fn d(&self) -> usize {
        self.params.values[self.layout.embedding].ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.params.values[self.layout.embedding].nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    pub fn predict(&self, gt: &GraphTensors) -> Result<Prediction, ModelError> {
        let mut t = Tape::new(&self.params.values);
        let f = network::forward(&mut t, &self.params, &self.layout, gt, Mode::Eval)?;
        let p_loc = t.value(f.loc_logp).iter().map(|x| x.exp()).collect();
        let p_rew = f.rew_logp.map_or_else(Vec::new, |r| t.value(r).iter().map(|x| x.exp()).collect());
        Ok(Prediction { p_loc, p_rew, cand_loc: gt.cand_loc.clone() })
    }

    /// Final entity states `H^(8)`, one row per node.
    pub fn states(&self, gt: &GraphTensors) -> Result<ndarray::Array2<f64>, ModelError> {
        let mut t = Tape::new(&self.params.values);
        let f = network::forward(&mut t, &self.params, &self.layout, gt, Mode::Eval)?;
        Ok(t.value(f.states).clone())
    }

    pub fn detector_loss(&self, gt: &GraphTensors, target: Option<usize>, mode: Mode) -> Result<f64, ModelError> {
        let mut t = Tape::new(&self.params.values);
        let f = network::forward(&mut t, &self.params, &self.layout, gt, mode)?;
        let l = network::detector_loss(&mut t, &f, gt, target)?;
        Ok(t.scalar(l))
    }

    pub fn detector_grad(
        &self,
        gt: &GraphTensors,
        target: Option<usize>,
        mode: Mode,
    ) -> Result<(f64, Gradients), ModelError> {
        let mut t = Tape::new(&self.params.values);
        let f = network::forward(&mut t, &self.params, &self.layout, gt, mode)?;
        let l = network::detector_loss(&mut t, &f, gt, target)?;
        Ok((t.scalar(l), t.backward(l)))
    }

    /// `observed` and `chosen` index candidates; `gt.scorers.len()` is NoBug.
    pub fn selector_loss(&self, gt: &GraphTensors, observed: &[usize], chosen: usize, mode: Mode) -> Result<f64, ModelError> {
        let mut t = Tape::new(&self.params.values);
        let f = network::forward(&mut t, &self.params, &self.layout, gt, mode)?;
        let l = network::selector_loss(&mut t, &f, gt, observed, chosen)?;
        Ok(t.scalar(l))
    }

    pub fn selector_grad(
        &self,
        gt: &GraphTensors,
        observed: &[usize],
        chosen: usize,
        mode: Mode,
    ) -> Result<(f64, Gradients), ModelError> {
        let mut t = Tape::new(&self.params.values);
        let f = network::forward(&mut t, &self.params, &self.layout, gt, mode)?;
        let l = network::selector_loss(&mut t, &f, gt, observed, chosen)?;
        Ok((t.scalar(l), t.backward(l)))
    }
}

/// Index of the graph's repair target among its candidates (`None` for
/// NoBug targets).
pub fn target_option(g: &CodeGraph) -> Result<Option<usize>, ModelError> {
    if !g.is_buggy() {
        return Ok(None);
    }
    g.target_index().map(Some).ok_or(ModelError::TargetNotInCandidates)
}

/// ε-greedy draw over the options of a joint distribution (candidates,
/// then NoBug): uniform with probability ε, otherwise by probability.
pub fn sample_option(joint: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
    assert!(!joint.is_empty(), "sampling from an empty distribution");
    if rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..joint.len());
    }
    let total: f64 = joint.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, p) in joint.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    // rounding left a sliver of mass at the end
    joint.iter().rposition(|p| *p > 0.0).unwrap_or(joint.len() - 1)
}

/// Draws a rewrite for a graph from the selector's prediction; the last
/// option is the identity rewrite.
pub fn sample_rewrite(g: &CodeGraph, pred: &Prediction, epsilon: f64, rng: &mut impl Rng) -> PotentialRewrite {
    let i = sample_option(&pred.joint(), epsilon, rng);
    g.candidates.get(i).map_or_else(PotentialRewrite::identity, |c| c.rewrite.clone())
}
