//! Versioned JSON checkpoints: vocabulary plus named parameter arrays.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::vocab::Vocab;
use super::{ModelError, Network};

const FORMAT: &str = "buglab-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tensor {
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct File {
    format: String,
    version: u32,
    d: usize,
    vocab: Vec<String>,
    networks: BTreeMap<String, BTreeMap<String, Tensor>>,
}

/// A detector, an optional selector and their shared vocabulary.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub vocab: Vocab,
    pub detector: Network,
    pub selector: Option<Network>,
}

impl Checkpoint {
    pub fn d(&self) -> usize {
        self.detector.d()
    }
}

fn to_tensors(p: &ParamSet) -> BTreeMap<String, Tensor> {
    p.names
        .iter()
        .zip(&p.values)
        .map(|(n, v)| {
            let (r, c) = v.dim();
            (n.clone(), Tensor { shape: [r, c], values: v.iter().copied().collect() })
        })
        .collect()
}

fn from_tensors(mut ts: BTreeMap<String, Tensor>) -> Result<Network, ModelError> {
    let emb = ts.get("embedding").ok_or_else(|| ModelError::Shape("missing parameter embedding".into()))?;
    let (v, d) = (emb.shape[0], emb.shape[1]);
    let mut names = Vec::new();
    let mut values = Vec::new();
    // canonical order, so a loaded set equals the saved one
    for (n, _) in super::params::parameter_shapes(v, d) {
        let t = ts.remove(&n).ok_or_else(|| ModelError::Shape(format!("missing parameter {n}")))?;
        let a = Array2::from_shape_vec((t.shape[0], t.shape[1]), t.values)
            .map_err(|e| ModelError::Shape(format!("{n}: {e}")))?;
        names.push(n);
        values.push(a);
    }
    if let Some(extra) = ts.keys().next() {
        return Err(ModelError::Checkpoint(format!("unexpected parameter {extra}")));
    }
    Network::from_params(ParamSet { names, values })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), ModelError> {
    let mut networks = BTreeMap::new();
    networks.insert("detector".to_string(), to_tensors(&ck.detector.params));
    if let Some(s) = &ck.selector {
        networks.insert("selector".to_string(), to_tensors(&s.params));
    }
    let f = File { format: FORMAT.into(), version: VERSION, d: ck.d(), vocab: ck.vocab.tokens().to_vec(), networks };
    let w = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(w, &f).map_err(|e| ModelError::Checkpoint(e.to_string()))
}

/// Loads a checkpoint; with `expected_d`, a differing hidden size is a
/// shape error.
pub fn load_checkpoint(path: &Path, expected_d: Option<usize>) -> Result<Checkpoint, ModelError> {
    let r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut f: File = serde_json::from_reader(r).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    if f.format != FORMAT || f.version != VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported format {} v{}", f.format, f.version)));
    }
    if let Some(d) = expected_d.filter(|&d| d != f.d) {
        return Err(ModelError::Shape(format!("checkpoint has d={}, configuration expects d={d}", f.d)));
    }
    let vocab = Vocab::from_tokens(f.vocab);
    let detector = from_tensors(
        f.networks.remove("detector").ok_or_else(|| ModelError::Checkpoint("no detector parameters".into()))?,
    )?;
    let selector = f.networks.remove("selector").map(from_tensors).transpose()?;
    for n in std::iter::once(&detector).chain(selector.as_ref()) {
        if n.d() != f.d || n.vocab_size() != vocab.len() {
            return Err(ModelError::Shape(format!(
                "parameters are {}x{}, header says vocabulary {} and d={}",
                n.vocab_size(),
                n.d(),
                vocab.len(),
                f.d
            )));
        }
    }
    Ok(Checkpoint { vocab, detector, selector })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_dimension_check() {
        let vocab = Vocab::build(["a_b", "c"], 10);
        let ck = Checkpoint {
            detector: Network::new(vocab.len(), 3, 1),
            selector: Some(Network::new(vocab.len(), 3, 2)),
            vocab,
        };
        let dir = std::env::temp_dir().join(format!("buglab-ck-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("m.json");
        save_checkpoint(&p, &ck).unwrap();
        let back = load_checkpoint(&p, Some(3)).unwrap();
        assert!(back.detector.params == ck.detector.params);
        assert!(back.selector.unwrap().params == ck.selector.unwrap().params);
        assert!(matches!(load_checkpoint(&p, Some(4)), Err(ModelError::Shape(_))));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
