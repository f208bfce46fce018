//! Statement-level control flow and may-dataflow over variable occurrences.
//!
//! An occurrence is a `Name` leaf of a local variable or parameter, or an
//! `Attribute` node standing for its root variable. Occurrences are ordered
//! by evaluation: an assignment evaluates its right-hand side before its
//! target, an augmented assignment target is read and then written, and
//! parameters are written on entry. Boolean short-circuiting is ignored.
//!
//! `LastMayUse`/`LastMayWrite` come from a forward may-analysis iterated to a
//! fixpoint, so loop back edges are included. `MayFinalUseOf` marks
//! occurrences from which the function exit is reachable without touching the
//! same variable again.

use std::collections::{BTreeMap, BTreeSet};

use crate::lang::symbols::{FunctionScope, SymbolId, SymbolTable};
use crate::lang::tree::{NodeKind, SyntaxTree, TreeLocation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub location: TreeLocation,
    pub symbol: SymbolId,
    pub read: bool,
    pub write: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CfgTarget {
    Stmt(usize),
    Exit,
}

/// Control flow between executable statements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    /// Statement locations in preorder.
    pub stmts: Vec<TreeLocation>,
    pub succ: Vec<Vec<CfgTarget>>,
    pub entry: CfgTarget,
    /// Occurrences evaluated by each statement, in order.
    pub events: Vec<Vec<Occurrence>>,
    /// Parameter writes at function entry.
    pub entry_events: Vec<Occurrence>,
}

/// Occurrences read while evaluating `e`, in evaluation order.
pub fn expression_occurrences(
    scope: &FunctionScope,
    tbl: &SymbolTable,
    e: &SyntaxTree,
    loc: &TreeLocation,
    out: &mut Vec<Occurrence>,
) {
    match e.kind {
        NodeKind::Name => {
            if let Some(sym) = scope.symbol_at(loc).filter(|&s| tbl.is_variable_like(s)) {
                out.push(Occurrence { location: loc.clone(), symbol: sym, read: true, write: false });
            }
        }
        NodeKind::Attribute => {
            if let Some(sym) = scope.symbol_at(loc).filter(|&s| tbl.is_variable_like(s)) {
                out.push(Occurrence { location: loc.clone(), symbol: sym, read: true, write: false });
            }
        }
        _ => {
            for (i, c) in e.children.iter().enumerate() {
                expression_occurrences(scope, tbl, c, &loc.child(i as u32 + 1), out);
            }
        }
    }
}

fn statement_events(scope: &FunctionScope, tbl: &SymbolTable, s: &SyntaxTree, loc: &TreeLocation) -> Vec<Occurrence> {
    let mut out = Vec::new();
    match s.kind {
        NodeKind::Assign | NodeKind::AugAssign => {
            expression_occurrences(scope, tbl, &s.children[2], &loc.child(3), &mut out);
            let target = &s.children[0];
            let tl = loc.child(1);
            if let Some(sym) = scope.symbol_at(&tl).filter(|&x| tbl.is_variable_like(x)) {
                let (read, write) = match (target.kind, s.kind) {
                    (NodeKind::Name, NodeKind::Assign) => (false, true),
                    (NodeKind::Name, _) => (true, true),
                    // storing into an attribute only reads the root variable
                    _ => (true, false),
                };
                out.push(Occurrence { location: tl, symbol: sym, read, write });
            }
        }
        NodeKind::If | NodeKind::While => expression_occurrences(scope, tbl, &s.children[0], &loc.child(1), &mut out),
        NodeKind::Return | NodeKind::ExprStmt => {
            for (i, c) in s.children.iter().enumerate() {
                expression_occurrences(scope, tbl, c, &loc.child(i as u32 + 1), &mut out);
            }
        }
        _ => {}
    }
    out
}

pub fn build_cfg(scope: &FunctionScope, tbl: &SymbolTable) -> Cfg {
    let root = &scope.root;
    let mut stmts = Vec::new();
    root.walk(&mut |loc, n| {
        if n.kind.is_executable_statement() {
            stmts.push(loc.clone());
        }
    });
    let index: BTreeMap<TreeLocation, usize> = stmts.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
    let mut succ = vec![Vec::new(); stmts.len()];
    let mut events = vec![Vec::new(); stmts.len()];

    struct Builder<'a> {
        index: &'a BTreeMap<TreeLocation, usize>,
        succ: &'a mut Vec<Vec<CfgTarget>>,
    }

    impl Builder<'_> {
        /// Wire a block whose fallthrough continues at `follow`; returns its entry.
        fn block(&mut self, b: &SyntaxTree, loc: &TreeLocation, follow: CfgTarget) -> CfgTarget {
            let mut next = follow;
            for (i, s) in b.children.iter().enumerate().rev() {
                if !s.kind.is_executable_statement() {
                    continue;
                }
                next = self.stmt(s, &loc.child(i as u32 + 1), next);
            }
            next
        }

        fn stmt(&mut self, s: &SyntaxTree, loc: &TreeLocation, next: CfgTarget) -> CfgTarget {
            let me = self.index[loc];
            let out = match s.kind {
                NodeKind::If => {
                    let then = self.block(&s.children[1], &loc.child(2), next);
                    let other = match s.children.get(2) {
                        Some(e) => self.block(e, &loc.child(3), next),
                        None => next,
                    };
                    vec![then, other]
                }
                NodeKind::While => {
                    let body = self.block(&s.children[1], &loc.child(2), CfgTarget::Stmt(me));
                    vec![body, next]
                }
                NodeKind::Return => vec![CfgTarget::Exit],
                _ => vec![next],
            };
            let mut dedup = Vec::new();
            for t in out {
                if !dedup.contains(&t) {
                    dedup.push(t);
                }
            }
            self.succ[me] = dedup;
            CfgTarget::Stmt(me)
        }
    }

    let body_loc = TreeLocation::new([root.children.len() as u32]);
    let entry = match root.body() {
        Some(body) => Builder { index: &index, succ: &mut succ }.block(body, &body_loc, CfgTarget::Exit),
        None => CfgTarget::Exit,
    };
    for (i, loc) in stmts.iter().enumerate() {
        let s = crate::lang::tree::node_at(root, loc).expect("statement location");
        events[i] = statement_events(scope, tbl, s, loc);
    }
    let mut entry_events = Vec::new();
    for i in 0..root.params().len() {
        let loc = TreeLocation::new([i as u32 + 2, 1]);
        if let Some(sym) = scope.symbol_at(&loc) {
            entry_events.push(Occurrence { location: loc, symbol: sym, read: false, write: true });
        }
    }
    Cfg { stmts, succ, entry, events, entry_events }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataflowFacts {
    /// (occurrence, potential immediately preceding occurrence)
    pub last_may_use: BTreeSet<(TreeLocation, TreeLocation)>,
    /// (occurrence, potential last write)
    pub last_may_write: BTreeSet<(TreeLocation, TreeLocation)>,
    /// Occurrences that may be the final one of their variable.
    pub may_final_use: BTreeSet<(TreeLocation, SymbolId)>,
}

type State = BTreeMap<SymbolId, (BTreeSet<TreeLocation>, BTreeSet<TreeLocation>)>;

fn transfer(state: &mut State, events: &[Occurrence], facts: Option<&mut DataflowFacts>) {
    let mut facts = facts;
    for e in events {
        let entry = state.entry(e.symbol).or_default();
        if let Some(f) = facts.as_deref_mut() {
            for u in &entry.0 {
                f.last_may_use.insert((e.location.clone(), u.clone()));
            }
            for w in &entry.1 {
                f.last_may_write.insert((e.location.clone(), w.clone()));
            }
        }
        entry.0 = BTreeSet::from([e.location.clone()]);
        if e.write {
            entry.1 = BTreeSet::from([e.location.clone()]);
        }
    }
}

fn join(into: &mut State, from: &State) -> bool {
    let mut changed = false;
    for (sym, (uses, writes)) in from {
        let e = into.entry(*sym).or_default();
        for u in uses {
            changed |= e.0.insert(u.clone());
        }
        for w in writes {
            changed |= e.1.insert(w.clone());
        }
    }
    changed
}

pub fn dataflow(cfg: &Cfg) -> DataflowFacts {
    let n = cfg.stmts.len();
    let mut facts = DataflowFacts::default();

    // forward: states at statement entry
    let mut entry_state = State::new();
    transfer(&mut entry_state, &cfg.entry_events, Some(&mut facts));
    let mut ins: Vec<State> = vec![State::new(); n];
    let mut reached = vec![false; n];
    let mut work: Vec<usize> = Vec::new();
    if let CfgTarget::Stmt(s) = cfg.entry {
        join(&mut ins[s], &entry_state);
        work.push(s);
    }
    while let Some(i) = work.pop() {
        reached[i] = true;
        let mut out = ins[i].clone();
        transfer(&mut out, &cfg.events[i], None);
        for t in &cfg.succ[i] {
            if let CfgTarget::Stmt(j) = *t {
                if join(&mut ins[j], &out) && !work.contains(&j) {
                    work.push(j);
                }
            }
        }
    }
    // unreachable statements carry no facts
    for i in (0..n).filter(|&i| reached[i]) {
        let mut st = ins[i].clone();
        transfer(&mut st, &cfg.events[i], Some(&mut facts));
    }

    // backward: variables that may reach the exit untouched from each statement's end
    let symbols: BTreeSet<SymbolId> = cfg
        .entry_events
        .iter()
        .chain(cfg.events.iter().flatten())
        .map(|e| e.symbol)
        .collect();
    let occurs = |events: &[Occurrence]| -> BTreeSet<SymbolId> { events.iter().map(|e| e.symbol).collect() };
    let mut reach_in: Vec<BTreeSet<SymbolId>> = vec![BTreeSet::new(); n];
    let reach_of = |t: &CfgTarget, reach_in: &Vec<BTreeSet<SymbolId>>| match t {
        CfgTarget::Exit => symbols.clone(),
        CfgTarget::Stmt(j) => reach_in[*j].clone(),
    };
    loop {
        let mut changed = false;
        for i in (0..n).rev() {
            let mut out = BTreeSet::new();
            for t in &cfg.succ[i] {
                out.extend(reach_of(t, &reach_in));
            }
            let here = occurs(&cfg.events[i]);
            let new_in: BTreeSet<SymbolId> = out.difference(&here).copied().collect();
            if new_in != reach_in[i] {
                reach_in[i] = new_in;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut mark_final = |events: &[Occurrence], reach_out: &BTreeSet<SymbolId>| {
        for (k, e) in events.iter().enumerate() {
            let later = events[k + 1..].iter().any(|o| o.symbol == e.symbol);
            if !later && reach_out.contains(&e.symbol) {
                facts.may_final_use.insert((e.location.clone(), e.symbol));
            }
        }
    };
    for i in (0..n).filter(|&i| reached[i]) {
        let mut out = BTreeSet::new();
        for t in &cfg.succ[i] {
            out.extend(reach_of(t, &reach_in));
        }
        mark_final(&cfg.events[i], &out);
    }
    let entry_out = reach_of(&cfg.entry, &reach_in);
    mark_final(&cfg.entry_events, &entry_out);
    facts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse;
    use crate::lang::symbols::resolve_symbols;

    fn facts(src: &str) -> (DataflowFacts, Cfg) {
        let u = parse(src).unwrap();
        let tbl = resolve_symbols(&u);
        let cfg = build_cfg(&tbl.functions[0], &tbl);
        (dataflow(&cfg), cfg)
    }

    fn loc(p: &[u32]) -> TreeLocation {
        TreeLocation::new(p.to_vec())
    }

    #[test]
    fn straight_line() {
        let (f, _) = facts("def f():\n  x = 1\n  return x\n");
        let target = loc(&[2, 1, 1]);
        let ret = loc(&[2, 2, 1]);
        assert!(f.last_may_use.contains(&(ret.clone(), target.clone())));
        assert!(f.last_may_write.contains(&(ret.clone(), target.clone())));
        assert!(f.may_final_use.iter().any(|(l, _)| *l == ret));
        assert!(!f.may_final_use.iter().any(|(l, _)| *l == target));
    }

    #[test]
    fn branches_join() {
        let (f, cfg) = facts("def f(c):\n  if c:\n    x = 1\n  else:\n    x = 2\n  return x\n");
        let ret = loc(&[3, 2, 1]);
        let writes: Vec<_> = f.last_may_write.iter().filter(|(a, _)| *a == ret).collect();
        assert_eq!(writes.len(), 2);
        assert_eq!(cfg.succ[0].len(), 2);
    }

    #[test]
    fn loop_back_edge() {
        let (f, cfg) = facts("def f(n):\n  i = 0\n  while i < n:\n    i += 1\n  return i\n");
        let test_i = loc(&[3, 2, 1, 1]);
        let body_i = loc(&[3, 2, 2, 1, 1]);
        assert!(f.last_may_use.contains(&(test_i.clone(), body_i.clone())));
        assert!(f.last_may_use.contains(&(body_i.clone(), test_i.clone())));
        assert!(f.last_may_write.contains(&(body_i.clone(), body_i.clone())));
        let while_idx = cfg.stmts.iter().position(|l| *l == loc(&[3, 2])).unwrap();
        assert_eq!(cfg.succ[while_idx].len(), 2);
    }
}
