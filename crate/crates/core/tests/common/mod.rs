//! Brute-force dataflow oracle shared by the integration tests.
//!
//! The oracle walks the syntax tree itself, forking at every `if` and
//! unrolling every `while` zero, one or two times per entry, and reads the
//! facts off each complete path. Two unrollings are needed so that facts
//! carried around a back edge into the next iteration are observed.

use std::collections::{BTreeMap, BTreeSet};

use buglab::graph::flow::{build_cfg, dataflow, Occurrence};
use buglab::lang::symbols::{resolve_symbols, SymbolId};
use buglab::lang::{parse, NodeKind, SyntaxTree, TreeLocation};

type Trace = (Vec<usize>, bool);

struct Oracle<'a> {
    index: BTreeMap<TreeLocation, usize>,
    _root: &'a SyntaxTree,
}

impl Oracle<'_> {
    fn block(&self, b: &SyntaxTree, loc: &TreeLocation, traces: Vec<Trace>) -> Vec<Trace> {
        let mut traces = traces;
        for (i, s) in b.children.iter().enumerate() {
            if !s.kind.is_executable_statement() {
                continue;
            }
            traces = self.stmt(s, &loc.child(i as u32 + 1), traces);
        }
        traces
    }

    fn stmt(&self, s: &SyntaxTree, loc: &TreeLocation, traces: Vec<Trace>) -> Vec<Trace> {
        let me = self.index[loc];
        let mut out = Vec::new();
        for (mut t, done) in traces {
            if done {
                out.push((t, true));
                continue;
            }
            t.push(me);
            match s.kind {
                NodeKind::Return => out.push((t, true)),
                NodeKind::If => {
                    out.extend(self.block(&s.children[1], &loc.child(2), vec![(t.clone(), false)]));
                    match s.children.get(2) {
                        Some(e) => out.extend(self.block(e, &loc.child(3), vec![(t, false)])),
                        None => out.push((t, false)),
                    }
                }
                NodeKind::While => {
                    // zero iterations
                    out.push((t.clone(), false));
                    let mut live = vec![(t, false)];
                    for _ in 0..2 {
                        let after = self.block(&s.children[1], &loc.child(2), live);
                        live = Vec::new();
                        for (mut t, done) in after {
                            if done {
                                out.push((t, true));
                            } else {
                                t.push(me);
                                out.push((t.clone(), false));
                                live.push((t, false));
                            }
                        }
                    }
                }
                _ => out.push((t, false)),
            }
        }
        out
    }
}

#[derive(Default, Debug, PartialEq)]
struct Facts {
    uses: BTreeSet<(TreeLocation, TreeLocation)>,
    writes: BTreeSet<(TreeLocation, TreeLocation)>,
    finals: BTreeSet<(TreeLocation, SymbolId)>,
}

fn observe(events: &[&Occurrence], f: &mut Facts) {
    let mut last_use: BTreeMap<SymbolId, &TreeLocation> = BTreeMap::new();
    let mut last_write: BTreeMap<SymbolId, &TreeLocation> = BTreeMap::new();
    for e in events {
        if let Some(u) = last_use.get(&e.symbol) {
            f.uses.insert((e.location.clone(), (*u).clone()));
        }
        if let Some(w) = last_write.get(&e.symbol) {
            f.writes.insert((e.location.clone(), (*w).clone()));
        }
        last_use.insert(e.symbol, &e.location);
        if e.write {
            last_write.insert(e.symbol, &e.location);
        }
    }
    for (sym, loc) in last_use {
        f.finals.insert((loc.clone(), sym));
    }
}

/// Describes the first disagreement between the solver and the path
/// oracle on the program's only function.
pub fn dataflow_mismatch(src: &str) -> Option<String> {
    let u = parse(src).unwrap();
    let tbl = resolve_symbols(&u);
    let scope = &tbl.functions[0];
    let cfg = build_cfg(scope, &tbl);
    let got = dataflow(&cfg);

    let root = &scope.root;
    let index = cfg.stmts.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
    let oracle = Oracle { index, _root: root };
    let body_loc = TreeLocation::new([root.children.len() as u32]);
    let traces = oracle.block(root.body().unwrap(), &body_loc, vec![(Vec::new(), false)]);
    let mut want = Facts::default();
    for (t, _) in &traces {
        let events: Vec<&Occurrence> =
            cfg.entry_events.iter().chain(t.iter().flat_map(|&i| cfg.events[i].iter())).collect();
        observe(&events, &mut want);
    }
    if got.last_may_use != want.uses {
        return Some(format!("LastMayUse: got {:?}, want {:?} on\n{src}", got.last_may_use, want.uses));
    }
    if got.last_may_write != want.writes {
        return Some(format!("LastMayWrite: got {:?}, want {:?} on\n{src}", got.last_may_write, want.writes));
    }
    if got.may_final_use != want.finals {
        return Some(format!("MayFinalUseOf: got {:?}, want {:?} on\n{src}", got.may_final_use, want.finals));
    }
    None
}
