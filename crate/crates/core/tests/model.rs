//! Network invariants: normalisation, equivariance, hand-computed scores
//! and the selector's masked softmax.

use buglab::graph::{CodeGraph, Entity};
use buglab::model::network::Scorer;
use buglab::model::{target_option, GraphTensors, Mode, Network, Vocab};
use buglab::pipeline::functions_from_source;
use buglab::selftest::{reference_graphs, REFERENCE_SNIPPET};
use buglab::synth::{random_function, RandomProgramConfig};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn permuted(g: &CodeGraph, perm: &[usize]) -> CodeGraph {
    let mut nodes = vec![None; g.nodes.len()];
    for e in &g.nodes {
        nodes[perm[e.id]] = Some(Entity { id: perm[e.id], ..e.clone() });
    }
    let mut out = g.clone();
    out.nodes = nodes.into_iter().map(Option::unwrap).collect();
    out.edges = g.edges.iter().map(|&(a, r, b)| (perm[a], r, perm[b])).collect();
    for c in &mut out.candidates {
        c.node_id = perm[c.node_id];
        c.meta = c.meta.iter().map(|&m| perm[m]).collect();
    }
    out
}

#[test]
fn relabelling_nodes_permutes_states() {
    let graphs = reference_graphs();
    let vocab = Vocab::from_graphs(&graphs, 1000);
    let net = Network::new(vocab.len(), 6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in &graphs {
        let mut perm: Vec<usize> = (0..g.nodes.len()).collect();
        perm.shuffle(&mut rng);
        let h = net.states(&GraphTensors::new(g, &vocab).unwrap()).unwrap();
        let gp = permuted(g, &perm);
        let hp = net.states(&GraphTensors::new(&gp, &vocab).unwrap()).unwrap();
        for i in 0..g.nodes.len() {
            for k in 0..h.ncols() {
                assert!((h[[i, k]] - hp[[perm[i], k]]).abs() < 1e-12);
            }
        }
        let (p, pp) = (
            net.predict(&GraphTensors::new(g, &vocab).unwrap()).unwrap(),
            net.predict(&GraphTensors::new(&gp, &vocab).unwrap()).unwrap(),
        );
        for (a, b) in p.p_loc.iter().zip(&pp.p_loc) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn outputs_are_distributions_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut graphs = Vec::new();
    while graphs.len() < 30 {
        let src = random_function(&mut rng, RandomProgramConfig::default());
        let f = functions_from_source("r.py", &src).unwrap().remove(0);
        if !f.candidates().is_empty() {
            graphs.push(f.graph(None));
        }
    }
    let vocab = Vocab::from_graphs(&graphs, 500);
    let net = Network::new(vocab.len(), 8, 4);
    for g in &graphs {
        let gt = GraphTensors::new(g, &vocab).unwrap();
        let p = net.predict(&gt).unwrap();
        assert!((p.p_loc.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(p.p_loc.iter().chain(&p.p_rew).all(|x| *x >= 0.0));
        for grp in gt.groups() {
            assert!((grp.iter().map(|&i| p.p_rew[i]).sum::<f64>() - 1.0).abs() < 1e-6);
        }
        // evaluation mode is deterministic
        assert_eq!(net.predict(&gt).unwrap(), p);
    }
}

#[test]
fn rewrite_scores_are_inner_products() {
    let fs = functions_from_source("s.py", REFERENCE_SNIPPET).unwrap();
    let g = fs[1].graph(None);
    let vocab = Vocab::from_graphs([&g], 100);
    let net = Network::new(vocab.len(), 3, 9);
    let gt = GraphTensors::new(&g, &vocab).unwrap();
    let h = net.states(&gt).unwrap();
    let p = net.predict(&gt).unwrap();
    let op = &net.params.values[net.params.index("rew.op").unwrap()];
    let lit = &net.params.values[net.params.index("rew.lit").unwrap()];
    let dot = |a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>| (0..3).map(|k| a[k] * b[k]).sum::<f64>();
    let mut checked = 0;
    for grp in gt.groups() {
        let scores: Option<Vec<f64>> = grp
            .iter()
            .map(|&c| {
                let r = h.row(gt.locations[gt.cand_loc[c]]);
                match gt.scorers[c] {
                    Scorer::Node(s) => Some(dot(r, h.row(s))),
                    Scorer::Operator(o) => Some(dot(r, op.row(o))),
                    Scorer::Literal(l) => Some(dot(r, lit.row(l))),
                    Scorer::Swap(..) => None,
                }
            })
            .collect();
        let Some(scores) = scores else { continue };
        let z: f64 = scores.iter().map(|s| s.exp()).sum();
        for (&c, s) in grp.iter().zip(&scores) {
            assert!((p.p_rew[c] - s.exp() / z).abs() < 1e-12);
            checked += 1;
        }
    }
    assert!(checked > 40);
}

#[test]
fn selector_softmax_is_restricted_to_observed() {
    let graphs = reference_graphs();
    let vocab = Vocab::from_graphs(&graphs, 1000);
    let net = Network::new(vocab.len(), 5, 2);
    let g = &graphs[0];
    let gt = GraphTensors::new(g, &vocab).unwrap();
    let joint = net.predict(&gt).unwrap().joint();
    let observed = [1, 4, 9, gt.scorers.len()];
    for &chosen in &observed {
        let loss = net.selector_loss(&gt, &observed, chosen, Mode::Eval).unwrap();
        let mass: f64 = observed.iter().map(|&o| joint[o]).sum();
        assert!((loss + (joint[chosen] / mass).ln()).abs() < 1e-9);
    }
    // unobserved options get no gradient through the softmax
    let (_, a) = net.selector_grad(&gt, &[1, 4], 4, Mode::Eval).unwrap();
    let (_, b) = net.selector_grad(&gt, &[1, 4, 4], 4, Mode::Eval).unwrap();
    for i in 0..net.params.values.len() {
        assert_eq!(a.get(i).is_some(), b.get(i).is_some());
    }
}

#[test]
fn uniform_location_loss_is_log_count() {
    let graphs = reference_graphs();
    let vocab = Vocab::from_graphs(&graphs, 1000);
    let mut net = Network::new(vocab.len(), 4, 1);
    // zeroing the score MLP output makes every location score equal
    let i = net.params.index("loc.mlp2").unwrap();
    net.params.values[i].fill(0.0);
    let g = &graphs[0];
    let gt = GraphTensors::new(g, &vocab).unwrap();
    assert_eq!(target_option(g).unwrap(), None);
    let loss = net.detector_loss(&gt, None, Mode::Eval).unwrap();
    assert!((loss - ((gt.locations.len() + 1) as f64).ln()).abs() < 1e-12);
}
