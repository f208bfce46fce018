//! Function-local symbol resolution.
//!
//! A name is local to a function when it is a parameter or the plain `Name`
//! target of an assignment anywhere in the body. Everything else resolves to
//! a module-level symbol: functions defined in the same unit, or opaque
//! symbols created on first use (one per name, shared across functions).
//!
//! Definition points are preorder indices within the function tree. A
//! parameter is defined at its `Name`; an assignment defines its target at
//! the end of the whole statement, so the right-hand side of `x = f(x)`
//! does not yet see the new `x`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tree::{node_at, NodeKind, SyntaxTree, TreeLocation};
use super::SourceUnit;

pub type SymbolId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymbolKind {
    Variable,
    Function,
    Parameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    Module,
    /// Index of the defining function in the unit.
    Function(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symbol {
    pub id: SymbolId,
    pub name: String,
    pub kind: SymbolKind,
    pub scope: Scope,
    /// Parameter count for functions defined in the unit.
    pub arity: Option<usize>,
    /// Module symbol created for a name with no definition in the unit.
    pub unresolved: bool,
}

impl Symbol {
    pub fn is_local(&self) -> bool {
        matches!(self.scope, Scope::Function(_))
    }
}

/// Resolution results for one function; locations are relative to the
/// `FunctionDef` root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionScope {
    pub index: usize,
    pub root: SyntaxTree,
    pub occurrences: BTreeMap<TreeLocation, SymbolId>,
    /// Preorder index at which each local symbol is first defined.
    pub definitions: BTreeMap<SymbolId, usize>,
    pub preorder: BTreeMap<TreeLocation, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    pub symbols: Vec<Symbol>,
    pub functions: Vec<FunctionScope>,
    /// Module symbols of functions defined in the unit, by function index.
    pub function_symbols: Vec<SymbolId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolError {
    #[error("location {0} is not a Name occurrence")]
    NotAName(TreeLocation),
    #[error("function is not part of this symbol table")]
    UnknownFunction,
}

impl SymbolTable {
    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id]
    }

    /// The scope recorded for a function tree equal to `s`.
    pub fn scope_of(&self, s: &SyntaxTree) -> Result<&FunctionScope, SymbolError> {
        self.functions.iter().find(|f| &f.root == s).ok_or(SymbolError::UnknownFunction)
    }

    /// Module-level function symbol defined in the unit with the given name.
    pub fn defined_function(&self, name: &str) -> Option<usize> {
        self.function_symbols.iter().position(|&id| self.symbols[id].name == name)
    }

    pub fn is_variable_like(&self, id: SymbolId) -> bool {
        let s = &self.symbols[id];
        s.is_local() && matches!(s.kind, SymbolKind::Variable | SymbolKind::Parameter)
    }
}

impl FunctionScope {
    pub fn symbol_at(&self, loc: &TreeLocation) -> Option<SymbolId> {
        self.occurrences.get(loc).copied()
    }

    /// Local variables and parameters defined strictly before `loc`, minus
    /// the symbol occurring at `loc`, in ascending id order.
    pub fn in_scope_before(&self, tbl: &SymbolTable, loc: &TreeLocation) -> Result<Vec<SymbolId>, SymbolError> {
        let node = node_at(&self.root, loc).map_err(|_| SymbolError::NotAName(loc.clone()))?;
        if node.kind != NodeKind::Name {
            return Err(SymbolError::NotAName(loc.clone()));
        }
        let own = self.symbol_at(loc);
        let pos = self.preorder[loc];
        Ok(self
            .definitions
            .iter()
            .filter(|(&id, &def)| def < pos && Some(id) != own && tbl.is_variable_like(id))
            .map(|(&id, _)| id)
            .collect())
    }

    pub fn locals(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.definitions.keys().copied()
    }
}

/// `in_scope_before` on the scope recorded for `s`.
pub fn in_scope_before(s: &SyntaxTree, tbl: &SymbolTable, loc: &TreeLocation) -> Result<Vec<SymbolId>, SymbolError> {
    tbl.scope_of(s)?.in_scope_before(tbl, loc)
}

pub fn resolve_symbols(u: &SourceUnit) -> SymbolTable {
    resolve_functions(&u.functions)
}

pub fn resolve_functions(functions: &[SyntaxTree]) -> SymbolTable {
    let mut symbols = Vec::new();
    let mut module: HashMap<String, SymbolId> = HashMap::new();
    let mut function_symbols = Vec::new();
    for f in functions {
        let name = f.function_name().unwrap_or_default().to_string();
        let arity = f.params().len();
        // a later definition with the same name rebinds it, as at runtime
        let id = symbols.len();
        symbols.push(Symbol {
            id,
            name: name.clone(),
            kind: SymbolKind::Function,
            scope: Scope::Module,
            arity: Some(arity),
            unresolved: false,
        });
        module.insert(name, id);
        function_symbols.push(id);
    }
    let mut scopes = Vec::new();
    for (index, f) in functions.iter().enumerate() {
        scopes.push(resolve_function(index, f, &mut symbols, &mut module, function_symbols[index]));
    }
    SymbolTable { symbols, functions: scopes, function_symbols }
}

fn resolve_function(
    index: usize,
    f: &SyntaxTree,
    symbols: &mut Vec<Symbol>,
    module: &mut HashMap<String, SymbolId>,
    self_symbol: SymbolId,
) -> FunctionScope {
    let mut preorder = BTreeMap::new();
    let mut nodes: Vec<(TreeLocation, &SyntaxTree)> = Vec::new();
    f.walk(&mut |loc, n| {
        preorder.insert(loc.clone(), nodes.len());
        nodes.push((loc.clone(), n));
    });
    let subtree_end = |loc: &TreeLocation, n: &SyntaxTree| preorder[loc] + n.size() - 1;

    let mut locals: HashMap<String, SymbolId> = HashMap::new();
    let mut definitions = BTreeMap::new();
    let new_local = |name: &str, kind: SymbolKind, symbols: &mut Vec<Symbol>| {
        let id = symbols.len();
        symbols.push(Symbol {
            id,
            name: name.to_string(),
            kind,
            scope: Scope::Function(index),
            arity: None,
            unresolved: false,
        });
        id
    };

    for (i, p) in f.params().iter().enumerate() {
        let loc = TreeLocation::new([i as u32 + 2, 1]);
        let name = p.children[0].name_str().unwrap_or_default();
        if !locals.contains_key(name) {
            let id = new_local(name, SymbolKind::Parameter, symbols);
            locals.insert(name.to_string(), id);
            definitions.insert(id, preorder[&loc]);
        }
    }
    for (loc, n) in &nodes {
        if !matches!(n.kind, NodeKind::Assign | NodeKind::AugAssign) {
            continue;
        }
        let Some(name) = n.children[0].name_str() else { continue };
        let end = subtree_end(loc, n);
        let id = match locals.get(name) {
            Some(&id) => id,
            None => {
                let id = new_local(name, SymbolKind::Variable, symbols);
                locals.insert(name.to_string(), id);
                id
            }
        };
        let def = definitions.entry(id).or_insert(end);
        *def = (*def).min(end);
    }

    let mut occurrences = BTreeMap::new();
    for (loc, n) in &nodes {
        match n.kind {
            NodeKind::Name => {
                let name = n.name_str().unwrap_or_default();
                let id = if loc.0 == [1] {
                    self_symbol
                } else if let Some(&id) = locals.get(name) {
                    id
                } else {
                    let is_callee = loc.last_index() == Some(1)
                        && loc.parent().is_some_and(|p| node_at(f, &p).is_ok_and(|c| c.kind == NodeKind::Call));
                    *module.entry(name.to_string()).or_insert_with(|| {
                        let id = symbols.len();
                        symbols.push(Symbol {
                            id,
                            name: name.to_string(),
                            kind: if is_callee { SymbolKind::Function } else { SymbolKind::Variable },
                            scope: Scope::Module,
                            arity: None,
                            unresolved: true,
                        });
                        id
                    })
                };
                occurrences.insert(loc.clone(), id);
            }
            NodeKind::Attribute => {}
            _ => {}
        }
    }
    // attribute nodes stand for their root symbol
    for (loc, n) in &nodes {
        if n.kind == NodeKind::Attribute {
            if let Some(&id) = occurrences.get(&loc.child(1)) {
                occurrences.insert(loc.clone(), id);
            }
        }
    }

    FunctionScope { index, root: f.clone(), occurrences, definitions, preorder }
}

/// Names of all local symbols of a scope, for freshness checks.
pub fn local_names(tbl: &SymbolTable, scope: &FunctionScope) -> BTreeSet<String> {
    scope.locals().map(|id| tbl.symbol(id).name.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse;

    #[test]
    fn two_locals_two_symbols() {
        let u = parse("def f():\n  x = 1\n  y = 2\n  return x + y\n").unwrap();
        let tbl = resolve_symbols(&u);
        let scope = &tbl.functions[0];
        let locals: Vec<SymbolId> = scope.locals().collect();
        assert_eq!(locals.len(), 2);
        assert!(locals.iter().all(|&id| tbl.symbol(id).kind == SymbolKind::Variable));
    }

    #[test]
    fn parameter_shares_one_symbol() {
        let u = parse("def f(a):\n  if a:\n    return a\n  return g(a)\n").unwrap();
        let tbl = resolve_symbols(&u);
        let scope = &tbl.functions[0];
        let ids: BTreeSet<SymbolId> = scope
            .occurrences
            .iter()
            .filter(|(_, &id)| tbl.symbol(id).name == "a")
            .map(|(_, &id)| id)
            .collect();
        assert_eq!(ids.len(), 1);
        let g = scope.occurrences.values().find(|&&id| tbl.symbol(id).name == "g").unwrap();
        assert_eq!(tbl.symbol(*g).kind, SymbolKind::Function);
        assert!(tbl.symbol(*g).unresolved);
    }

    #[test]
    fn unit_functions_are_resolvable_callees() {
        let u = parse("def g(x, y):\n  return x\n\ndef f(a):\n  return g(a, a)\n").unwrap();
        let tbl = resolve_symbols(&u);
        let scope = &tbl.functions[1];
        let callee = scope.occurrences[&TreeLocation::new([3, 1, 1, 1])];
        assert_eq!(callee, tbl.function_symbols[0]);
        assert_eq!(tbl.symbol(callee).arity, Some(2));
    }

    #[test]
    fn empty_scope_at_first_statement() {
        let u = parse("def f():\n  x = y\n  return x\n").unwrap();
        let tbl = resolve_symbols(&u);
        let s = &u.functions[0];
        let got = in_scope_before(s, &tbl, &TreeLocation::new([2, 1, 3])).unwrap();
        assert!(got.is_empty());
        assert!(in_scope_before(s, &tbl, &TreeLocation::new([2, 1])).is_err());
    }
}
