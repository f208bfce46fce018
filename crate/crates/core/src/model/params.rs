//! Named model parameters.
//!
//! Weight matrices are stored input-major (`in × out`) so a layer is `X·W`.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::Relation;
use crate::rewrite::{OpClass, ToggleAction, BOOL_LITERAL_DOMAIN, INT_LITERAL_DOMAIN};

pub const GNN_LAYERS: usize = 8;
/// Every relation in both directions.
pub const EDGE_TYPES: usize = 2 * Relation::ALL.len();

/// Keys of the operator embedding table, in row order.
pub fn operator_keys() -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = Vec::new();
    for class in [
        OpClass::Arithmetic,
        OpClass::Comparison,
        OpClass::Membership,
        OpClass::IdentityTest,
        OpClass::Boolean,
        OpClass::Assignment,
    ] {
        for m in class.members() {
            if !keys.contains(m) {
                keys.push(m);
            }
        }
    }
    keys.extend(ToggleAction::ALL.iter().map(|t| t.as_str()));
    keys
}

pub fn literal_keys() -> Vec<&'static str> {
    INT_LITERAL_DOMAIN.iter().chain(BOOL_LITERAL_DOMAIN.iter()).copied().collect()
}

/// Input width of GNN layer `t` (1-based): the residual layers see the
/// concatenation of two states.
pub fn layer_input_width(t: usize, d: usize) -> usize {
    if t % 4 == 0 {
        2 * d
    } else {
        d
    }
}

#[derive(Debug, Clone)]
pub struct LayerIds {
    pub messages: Vec<usize>,
    pub ln_scale: usize,
    pub ln_offset: usize,
    pub wf: usize,
    pub bf: usize,
}

/// Parameter indices by role.
#[derive(Debug, Clone)]
pub struct Layout {
    pub embedding: usize,
    pub layers: Vec<LayerIds>,
    pub wq: usize,
    pub mlp1: usize,
    pub mlp2: usize,
    pub nobug: usize,
    pub op: usize,
    pub lit: usize,
    pub swap1: usize,
    pub swap2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub values: Vec<Array2<f64>>,
}

impl ParamSet {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    pub fn shapes(&self) -> Vec<(String, (usize, usize))> {
        self.names.iter().zip(&self.values).map(|(n, v)| (n.clone(), v.dim())).collect()
    }

    pub fn layout(&self) -> Layout {
        let id = |n: String| self.index(&n).unwrap_or_else(|| panic!("missing parameter {n}"));
        Layout {
            embedding: id("embedding".into()),
            layers: (1..=GNN_LAYERS)
                .map(|t| LayerIds {
                    messages: (0..EDGE_TYPES).map(|k| id(message_name(t, k))).collect(),
                    ln_scale: id(format!("gnn{t}.ln_scale")),
                    ln_offset: id(format!("gnn{t}.ln_offset")),
                    wf: id(format!("gnn{t}.wf")),
                    bf: id(format!("gnn{t}.bf")),
                })
                .collect(),
            wq: id("loc.wq".into()),
            mlp1: id("loc.mlp1".into()),
            mlp2: id("loc.mlp2".into()),
            nobug: id("loc.nobug".into()),
            op: id("rew.op".into()),
            lit: id("rew.lit".into()),
            swap1: id("rew.swap1".into()),
            swap2: id("rew.swap2".into()),
        }
    }
}

fn message_name(t: usize, k: usize) -> String {
    let rel = Relation::ALL[k / 2];
    let dir = if k % 2 == 0 { "fwd" } else { "bwd" };
    format!("gnn{t}.msg.{rel}.{dir}")
}

/// The expected shape of every parameter for hidden size `d`.
pub fn parameter_shapes(vocab_size: usize, d: usize) -> Vec<(String, (usize, usize))> {
    let mut out = vec![("embedding".to_string(), (vocab_size, d))];
    for t in 1..=GNN_LAYERS {
        let w = layer_input_width(t, d);
        for k in 0..EDGE_TYPES {
            out.push((message_name(t, k), (2 * w, d)));
        }
        out.push((format!("gnn{t}.ln_scale"), (1, d)));
        out.push((format!("gnn{t}.ln_offset"), (1, d)));
        out.push((format!("gnn{t}.wf"), (d, d)));
        out.push((format!("gnn{t}.bf"), (1, d)));
    }
    out.extend([
        ("loc.wq".to_string(), (d, d)),
        ("loc.mlp1".to_string(), (2 * d, d)),
        ("loc.mlp2".to_string(), (d, 1)),
        ("loc.nobug".to_string(), (1, d)),
        ("rew.op".to_string(), (operator_keys().len(), d)),
        ("rew.lit".to_string(), (literal_keys().len(), d)),
        ("rew.swap1".to_string(), (3 * d, d)),
        ("rew.swap2".to_string(), (d, 1)),
    ]);
    out
}

/// Glorot-uniform weights, unit normalisation scales, zero biases.
pub fn init_params(vocab_size: usize, d: usize, seed: u64) -> ParamSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = Vec::new();
    let mut values = Vec::new();
    for (name, (r, c)) in parameter_shapes(vocab_size, d) {
        let v = if name.ends_with("ln_scale") {
            Array2::ones((r, c))
        } else if name.ends_with("ln_offset") || name.ends_with(".bf") {
            Array2::zeros((r, c))
        } else {
            let a = if r == 1 || name == "embedding" || name.starts_with("rew.op") || name.starts_with("rew.lit") {
                (3.0 / c as f64).sqrt()
            } else {
                (6.0 / (r + c) as f64).sqrt()
            };
            Array2::from_shape_simple_fn((r, c), || rng.gen_range(-a..a))
        };
        names.push(name);
        values.push(v);
    }
    ParamSet { names, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_hidden_size() {
        let p = init_params(20, 4, 0);
        let l = p.layout();
        assert_eq!(p.values[l.embedding].dim(), (20, 4));
        assert_eq!(p.values[l.layers[0].messages[0]].dim(), (8, 4));
        assert_eq!(p.values[l.layers[3].messages[0]].dim(), (16, 4));
        assert_eq!(p.values[l.layers[7].messages[5]].dim(), (16, 4));
        assert_eq!(p.values[l.mlp1].dim(), (8, 4));
        assert_eq!(p.values[l.swap1].dim(), (12, 4));
        assert!(p.values.iter().all(|v| v.iter().all(|x| x.is_finite())));
        assert_eq!(l.layers[0].messages.len(), 24);
    }

    #[test]
    fn operator_keys_are_distinct() {
        let k = operator_keys();
        let mut s = k.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), k.len());
        assert!(k.contains(&"not in") && k.contains(&"//=") && k.contains(&"remove:-"));
    }
}
