//! JSON-lines graph files, one graph per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rewrite::{PotentialRewrite, RewriteRecord};

use super::{CodeGraph, Entity, GraphCandidate, Relation};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed graph data at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct CandidateRecord {
    location: Vec<u32>,
    kind: String,
    payload: String,
    node_id: usize,
    #[serde(default)]
    meta: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TargetRecord {
    Rewrite(RewriteRecord),
    NoBug(String),
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    nodes: Vec<Entity>,
    edges: Vec<(usize, Relation, usize)>,
    candidates: Vec<CandidateRecord>,
    nobug_id: usize,
    target: TargetRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<String>,
}

/// One JSON object without a trailing newline.
pub fn serialize_graph(g: &CodeGraph) -> Vec<u8> {
    let rec = GraphRecord {
        nodes: g.nodes.clone(),
        edges: g.edges.clone(),
        candidates: g
            .candidates
            .iter()
            .map(|c| {
                let r = c.rewrite.to_record();
                CandidateRecord { location: r.location, kind: r.kind, payload: r.payload, node_id: c.node_id, meta: c.meta.clone() }
            })
            .collect(),
        nobug_id: g.nobug_id,
        target: match &g.target {
            Some(t) if !t.is_identity() => TargetRecord::Rewrite(t.to_record()),
            _ => TargetRecord::NoBug("NOBUG".to_string()),
        },
        origin: g.origin.clone(),
    };
    serde_json::to_vec(&rec).expect("graph records always serialize")
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

pub fn deserialize_graph(bytes: &[u8]) -> Result<CodeGraph, GraphError> {
    let rec: GraphRecord = serde_json::from_slice(bytes).map_err(|e| GraphError::Malformed {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let invalid = GraphError::Invalid;
    let n = rec.nodes.len();
    for (i, e) in rec.nodes.iter().enumerate() {
        if e.id != i {
            return Err(invalid(format!("node {i} has id {}", e.id)));
        }
    }
    if rec.nobug_id != n {
        return Err(invalid(format!("nobug_id {} must equal the node count {n}", rec.nobug_id)));
    }
    if let Some(e) = rec.edges.iter().find(|e| e.0 >= n || e.2 >= n) {
        return Err(invalid(format!("edge {e:?} references a missing node")));
    }
    let mut candidates = Vec::with_capacity(rec.candidates.len());
    for c in rec.candidates {
        let rewrite = PotentialRewrite::from_record(&RewriteRecord {
            location: c.location,
            kind: c.kind,
            payload: c.payload,
        })
        .map_err(|e| invalid(e.to_string()))?;
        if c.node_id >= n || c.meta.iter().any(|&m| m >= n) {
            return Err(invalid(format!("candidate {rewrite} references a missing node")));
        }
        candidates.push(GraphCandidate { rewrite, node_id: c.node_id, meta: c.meta });
    }
    let target = match rec.target {
        TargetRecord::NoBug(s) if s == "NOBUG" => None,
        TargetRecord::NoBug(s) => return Err(invalid(format!("unknown target '{s}'"))),
        TargetRecord::Rewrite(r) => Some(PotentialRewrite::from_record(&r).map_err(|e| invalid(e.to_string()))?),
    };
    Ok(CodeGraph { nodes: rec.nodes, edges: rec.edges, candidates, nobug_id: rec.nobug_id, target, origin: rec.origin })
}

pub fn write_graphs<'a>(mut w: impl Write, graphs: impl IntoIterator<Item = &'a CodeGraph>) -> std::io::Result<()> {
    for g in graphs {
        w.write_all(&serialize_graph(g))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Read a graph file; error offsets are relative to the start of the file.
pub fn read_graphs(r: impl BufRead) -> Result<Vec<CodeGraph>, GraphError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in r.split(b'\n') {
        let line = line?;
        if !line.iter().all(u8::is_ascii_whitespace) {
            let g = deserialize_graph(&line).map_err(|e| match e {
                GraphError::Malformed { offset: o, message } => GraphError::Malformed { offset: offset + o, message },
                other => other,
            })?;
            out.push(g);
        }
        offset += line.len() + 1;
    }
    Ok(out)
}
