//! Forward computation: embedding, residual message passing, location and
//! rewrite heads, and the two training losses.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::CodeGraph;
use crate::rewrite::{Payload, RuleKind};

use super::params::{layer_input_width, literal_keys, operator_keys, Layout, ParamSet, EDGE_TYPES, GNN_LAYERS};
use super::tape::{Tape, Var};
use super::vocab::Vocab;
use super::ModelError;

/// How a candidate's rewrite score is computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scorer {
    /// `r_ℓ · r_σ` against the state of a node.
    Node(usize),
    /// `r_ℓ · r_op`.
    Operator(usize),
    /// `r_ℓ · r_lit`.
    Literal(usize),
    /// `MLP([r_call, r_arg1, r_arg2])`.
    Swap(usize, usize, usize),
}

/// A graph lowered to index arrays for the network.
#[derive(Debug, Clone)]
pub struct GraphTensors {
    pub n: usize,
    pub subtoken_ids: Vec<usize>,
    pub subtoken_owner: Vec<usize>,
    /// Per edge type: (receivers, senders).
    pub edges: Vec<(Vec<usize>, Vec<usize>)>,
    /// Node id of each distinct candidate location, in canonical order.
    pub locations: Vec<usize>,
    pub cand_loc: Vec<usize>,
    pub scorers: Vec<Scorer>,
}

impl GraphTensors {
    pub fn new(g: &CodeGraph, vocab: &Vocab) -> Result<Self, ModelError> {
        let n = g.nodes.len();
        let mut subtoken_ids = Vec::new();
        let mut subtoken_owner = Vec::new();
        for e in &g.nodes {
            for id in vocab.encode(&e.label) {
                subtoken_ids.push(id);
                subtoken_owner.push(e.id);
            }
        }
        let mut edges = vec![(Vec::new(), Vec::new()); EDGE_TYPES];
        for &(a, r, b) in &g.edges {
            let k = 2 * r.index();
            edges[k].0.push(b);
            edges[k].1.push(a);
            edges[k + 1].0.push(a);
            edges[k + 1].1.push(b);
        }
        let locs = g.locations();
        let locations: Vec<usize> = locs.iter().map(|l| l.1).collect();
        let ops = operator_keys();
        let lits = literal_keys();
        let mut cand_loc = Vec::with_capacity(g.candidates.len());
        let mut scorers = Vec::with_capacity(g.candidates.len());
        for c in &g.candidates {
            cand_loc.push(locs.iter().position(|l| l.0 == c.rewrite.location).expect("candidate location is listed"));
            let kind = c.rewrite.kind();
            let missing = || ModelError::MissingMetadata(kind.name());
            let s = match &c.rewrite.rule.payload {
                Payload::Variable { .. } => Scorer::Node(*c.meta.first().ok_or_else(missing)?),
                Payload::Swap(..) => match c.meta.as_slice() {
                    [a, b] => Scorer::Swap(c.node_id, *a, *b),
                    _ => return Err(missing()),
                },
                Payload::Operator { to, .. } => {
                    Scorer::Operator(ops.iter().position(|o| o == to).ok_or_else(missing)?)
                }
                Payload::Toggle(t) => Scorer::Operator(ops.iter().position(|o| *o == t.as_str()).ok_or_else(missing)?),
                Payload::Literal { to, .. } => Scorer::Literal(lits.iter().position(|o| o == to).ok_or_else(missing)?),
                Payload::None => return Err(ModelError::MissingMetadata(RuleKind::Identity.name())),
            };
            scorers.push(s);
        }
        Ok(GraphTensors { n, subtoken_ids, subtoken_owner, edges, locations, cand_loc, scorers })
    }

    /// Candidate indices grouped by location.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.locations.len()];
        for (i, &l) in self.cand_loc.iter().enumerate() {
            g[l].push(i);
        }
        g
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Mode {
    Eval,
    /// Training with dropout drawn from the given seed.
    Train { seed: u64, dropout: f64 },
}

/// Tape handles of one forward pass.
pub struct Forward {
    pub states: Var,
    /// Log-probabilities over locations, NoBug last.
    pub loc_logp: Var,
    /// Log-probabilities of each candidate within its location.
    pub rew_logp: Option<Var>,
}

fn dropout(t: &mut Tape<'_>, x: Var, rng: &mut Option<(ChaCha8Rng, f64)>) -> Var {
    match rng {
        Some((r, p)) if *p > 0.0 => {
            let keep = 1.0 - *p;
            let shape = t.value(x).raw_dim();
            let m = Array2::from_shape_simple_fn(shape, || if r.gen::<f64>() < keep { 1.0 / keep } else { 0.0 });
            t.mask(x, m)
        }
        _ => x,
    }
}

fn gnn_layer(t: &mut Tape<'_>, layout: &Layout, layer: usize, h: Var, gt: &GraphTensors) -> Var {
    let ids = &layout.layers[layer];
    let mut msgs = Vec::new();
    let mut targets = Vec::new();
    for (k, (recv, send)) in gt.edges.iter().enumerate() {
        if recv.is_empty() {
            continue;
        }
        let hi = t.gather(h, recv.clone());
        let hj = t.gather(h, send.clone());
        let cat = t.concat_cols(&[hi, hj]);
        let w = t.param(ids.messages[k]);
        msgs.push(t.matmul(cat, w));
        targets.extend_from_slice(recv);
    }
    let wf = t.param(ids.wf);
    let d = t.value(wf).ncols();
    let m = if msgs.is_empty() {
        t.constant(Array2::zeros((gt.n, d)))
    } else {
        let all = if msgs.len() == 1 { msgs[0] } else { t.concat_rows(&msgs) };
        t.scatter_max(all, &targets, gt.n)
    };
    let z = t.gelu(m);
    let z = t.layer_norm(z);
    let scale = t.param(ids.ln_scale);
    let z = t.mul_row(z, scale);
    let offset = t.param(ids.ln_offset);
    let z = t.add_row(z, offset);
    let z = t.matmul(z, wf);
    let bf = t.param(ids.bf);
    let z = t.add_row(z, bf);
    t.tanh(z)
}

/// Runs the whole network on one graph.
pub fn forward(t: &mut Tape<'_>, params: &ParamSet, layout: &Layout, gt: &GraphTensors, mode: Mode) -> Result<Forward, ModelError> {
    if gt.locations.is_empty() {
        return Err(ModelError::EmptyCandidates);
    }
    let d = params.values[layout.embedding].ncols();
    let vocab_rows = params.values[layout.embedding].nrows();
    if let Some(&bad) = gt.subtoken_ids.iter().find(|&&i| i >= vocab_rows) {
        return Err(ModelError::Shape(format!("subtoken id {bad} outside an embedding of {vocab_rows} rows")));
    }
    for (t_idx, ids) in layout.layers.iter().enumerate() {
        let w = layer_input_width(t_idx + 1, d);
        if params.values[ids.messages[0]].dim() != (2 * w, d) {
            return Err(ModelError::Shape(format!("layer {} message weights must be {}x{d}", t_idx + 1, 2 * w)));
        }
    }
    let mut rng = match mode {
        Mode::Eval => None,
        Mode::Train { seed, dropout } => Some((ChaCha8Rng::seed_from_u64(seed), dropout)),
    };

    // H^(0): max-pooled subtoken embeddings
    let emb = t.param(layout.embedding);
    let rows = t.gather(emb, gt.subtoken_ids.clone());
    let h0 = t.scatter_max(rows, &gt.subtoken_owner, gt.n);

    let mut block_in = h0;
    let mut h = h0;
    for layer in 0..GNN_LAYERS {
        let input = if (layer + 1) % 4 == 0 { t.concat_cols(&[block_in, h]) } else { h };
        let input = if layer > 0 { dropout(t, input, &mut rng) } else { input };
        h = gnn_layer(t, layout, layer, input, gt);
        if (layer + 1) % 4 == 0 {
            block_in = h;
        }
    }
    let states = h;

    // location head
    let l = gt.locations.len();
    let r = t.gather(states, gt.locations.clone());
    let nobug = t.param(layout.nobug);
    let r = t.concat_rows(&[r, nobug]);
    let wq = t.param(layout.wq);
    let proj = t.matmul(r, wq);
    let q = t.col_max(proj);
    let qs = t.gather(q, vec![0; l + 1]);
    let x = t.concat_cols(&[r, qs]);
    let w1 = t.param(layout.mlp1);
    let hid = t.matmul(x, w1);
    let hid = t.sigmoid(hid);
    let w2 = t.param(layout.mlp2);
    let scores = t.matmul(hid, w2);
    let loc_logp = t.log_softmax(scores, vec![(0..=l).collect()]);

    // rewrite heads
    let rew_logp = if gt.scorers.is_empty() {
        None
    } else {
        let mut dot_left = Vec::new();
        let mut dot_right = Vec::new();
        let mut dot_pos = Vec::new();
        let mut swaps = Vec::new();
        let mut swap_pos = Vec::new();
        let n = gt.n;
        let n_ops = params.values[layout.op].nrows();
        for (i, s) in gt.scorers.iter().enumerate() {
            let loc = gt.locations[gt.cand_loc[i]];
            match *s {
                Scorer::Node(v) => {
                    dot_left.push(loc);
                    dot_right.push(v);
                    dot_pos.push(i);
                }
                Scorer::Operator(o) => {
                    dot_left.push(loc);
                    dot_right.push(n + o);
                    dot_pos.push(i);
                }
                Scorer::Literal(o) => {
                    dot_left.push(loc);
                    dot_right.push(n + n_ops + o);
                    dot_pos.push(i);
                }
                Scorer::Swap(c, a, b) => {
                    swaps.push((c, a, b));
                    swap_pos.push(i);
                }
            }
        }
        let mut parts = Vec::new();
        if !dot_left.is_empty() {
            let left = t.gather(states, dot_left);
            let op = t.param(layout.op);
            let lit = t.param(layout.lit);
            let table = t.concat_rows(&[states, op, lit]);
            let right = t.gather(table, dot_right);
            parts.push(t.row_dot(left, right));
        }
        if !swaps.is_empty() {
            let c = t.gather(states, swaps.iter().map(|s| s.0).collect());
            let a = t.gather(states, swaps.iter().map(|s| s.1).collect());
            let b = t.gather(states, swaps.iter().map(|s| s.2).collect());
            let x = t.concat_cols(&[c, a, b]);
            let w1 = t.param(layout.swap1);
            let hid = t.matmul(x, w1);
            let hid = t.sigmoid(hid);
            let w2 = t.param(layout.swap2);
            parts.push(t.matmul(hid, w2));
        }
        let stacked = if parts.len() == 1 { parts[0] } else { t.concat_rows(&parts) };
        // back to candidate order
        let order: Vec<usize> = dot_pos.into_iter().chain(swap_pos).collect();
        let mut perm = vec![0; order.len()];
        for (row, &cand) in order.iter().enumerate() {
            perm[cand] = row;
        }
        let scores = t.gather(stacked, perm);
        Some(t.log_softmax(scores, gt.groups()))
    };
    Ok(Forward { states, loc_logp, rew_logp })
}

/// −log p_loc(ℓ) − log p_rew(ρ|ℓ) for the target candidate, or
/// −log p_loc(NoBug) when `target` is `None`.
pub fn detector_loss(t: &mut Tape<'_>, f: &Forward, gt: &GraphTensors, target: Option<usize>) -> Result<Var, ModelError> {
    match target {
        None => {
            let lp = t.gather(f.loc_logp, vec![gt.locations.len()]);
            Ok(t.scale(lp, -1.0))
        }
        Some(c) => {
            if c >= gt.cand_loc.len() {
                return Err(ModelError::TargetNotInCandidates);
            }
            let lp = t.gather(f.loc_logp, vec![gt.cand_loc[c]]);
            let rp = t.gather(f.rew_logp.expect("candidates exist"), vec![c]);
            let s = t.sum(&[lp, rp]);
            Ok(t.scale(s, -1.0))
        }
    }
}

/// Joint log-probabilities of every candidate followed by NoBug.
pub fn joint_logp(t: &mut Tape<'_>, f: &Forward, gt: &GraphTensors) -> Var {
    let nobug = t.gather(f.loc_logp, vec![gt.locations.len()]);
    match f.rew_logp {
        None => nobug,
        Some(rew) => {
            let loc = t.gather(f.loc_logp, gt.cand_loc.clone());
            let j = t.add(loc, rew);
            t.concat_rows(&[j, nobug])
        }
    }
}

/// Negative log-likelihood of `chosen` under the joint distribution
/// restricted to the observed options. Options index candidates, with
/// `gt.scorers.len()` standing for NoBug.
pub fn selector_loss(
    t: &mut Tape<'_>,
    f: &Forward,
    gt: &GraphTensors,
    observed: &[usize],
    chosen: usize,
) -> Result<Var, ModelError> {
    let set: BTreeSet<usize> = observed.iter().copied().collect();
    let options: Vec<usize> = set.into_iter().collect();
    if options.iter().any(|&o| o > gt.scorers.len()) {
        return Err(ModelError::TargetNotInCandidates);
    }
    let pos = options.iter().position(|&o| o == chosen).ok_or(ModelError::TargetNotInCandidates)?;
    let joint = joint_logp(t, f, gt);
    let sel = t.gather(joint, options.clone());
    let lp = t.log_softmax(sel, vec![(0..options.len()).collect()]);
    let pick = t.gather(lp, vec![pos]);
    Ok(t.scale(pick, -1.0))
}
