//! Graph serialization round trips and the token projection.

use buglab::graph::{
    deserialize_graph, location_node_ids, project_tokens, read_graphs, serialize_graph, write_graphs, EntityKind,
    GraphError, Relation,
};
use buglab::lang::node_at;
use buglab::pipeline::functions_from_source;
use buglab::synth::{random_function, RandomProgramConfig};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_graphs(n: usize, seed: u64) -> Vec<buglab::graph::CodeGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let src = random_function(&mut rng, RandomProgramConfig::default());
            let f = functions_from_source("r.py", &src).unwrap().remove(0);
            let cands = f.candidates();
            if cands.is_empty() || rng.gen_bool(0.2) {
                f.graph(None)
            } else {
                f.buggy_graph(&cands[rng.gen_range(0..cands.len())]).unwrap()
            }
        })
        .collect()
}

#[test]
fn round_trip_random_graphs() {
    for g in random_graphs(100, 3) {
        let bytes = serialize_graph(&g);
        assert_eq!(deserialize_graph(&bytes).unwrap(), g);
    }
}

#[test]
fn graph_files_round_trip() {
    let gs = random_graphs(10, 4);
    let mut buf = Vec::new();
    write_graphs(&mut buf, gs.iter()).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 10);
    assert_eq!(read_graphs(&buf[..]).unwrap(), gs);
}

#[test]
fn trivial_function_round_trips() {
    let f = functions_from_source("e.py", "def f():\n  return None\n").unwrap().remove(0);
    let g = f.graph(None);
    assert!(g.candidates.is_empty());
    assert_eq!(deserialize_graph(&serialize_graph(&g)).unwrap(), g);
}

#[test]
fn truncated_input_is_malformed() {
    let g = &random_graphs(1, 5)[0];
    let bytes = serialize_graph(g);
    match deserialize_graph(&bytes[..bytes.len() / 2]) {
        Err(GraphError::Malformed { offset, .. }) => assert!(offset <= bytes.len() / 2),
        other => panic!("expected a malformed-input error, got {other:?}"),
    }
}

#[test]
fn projection_stays_within_spans() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let src = random_function(&mut rng, RandomProgramConfig::default());
        let f = functions_from_source("p.py", &src).unwrap().remove(0);
        let g = f.graph(None);
        let p = project_tokens(&g);
        let tokens = g.nodes.iter().filter(|e| e.kind == EntityKind::Token).count();
        assert_eq!(p.token_sequence.len(), tokens);

        let ids = location_node_ids(f.tree());
        let mut span_of = vec![None; g.nodes.len()];
        for (loc, id) in &ids {
            span_of[*id] = Some(node_at(f.tree(), loc).unwrap().span);
        }
        for (id, e) in g.nodes.iter().enumerate() {
            let t = p.projection_map[id];
            assert_eq!(g.nodes[t].kind, EntityKind::Token);
            if let (Some(outer), Some(inner)) = (span_of[id], span_of[t]) {
                assert!(outer.start <= inner.start && inner.end <= outer.end, "{} {:?} in\n{src}", e.label, e.kind);
            }
        }
        // a symbol projects onto one of its occurrences
        for (occ, sym) in g.edges_of(Relation::OccurrenceOf) {
            let occs: Vec<usize> = g
                .edges_of(Relation::OccurrenceOf)
                .filter(|&(_, s)| s == sym)
                .map(|(o, _)| p.projection_map[o])
                .collect();
            assert!(occs.contains(&p.projection_map[sym]), "symbol of {occ}");
        }
        for &(a, _, b) in &p.projected_edges {
            assert_ne!(a, b);
        }
    }
}
