//! Flow graphs of derivations and Bayesian network extraction.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factors::{Accounting, Factor, FactorError, FactorJson, Scalar, VarDomain};
use crate::semantics::{axiom_factor, cond_parents};
use crate::syntax::{Term, Var};
use crate::types::{Atom, Derivation, IType, Name, Observation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlowError {
    #[error("the positions named {0} do not form a single tree rooted at its axiom")]
    Split(Name),
    #[error("position {0} has more than one parent with the same name")]
    SharedParent(String),
    #[error("the flow graph has a cycle")]
    Cyclic,
}

/// Where in a judgment an atom occurrence lives.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Ground(Var),
    Multi(Var, usize),
    Subject,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Ground(x) => write!(f, "ground:{x}"),
            Slot::Multi(x, i) => write!(f, "multi:{x}#{i}"),
            Slot::Subject => f.write_str("subject"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Input,
    Output,
}

/// One atom occurrence of a derivation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Position {
    /// Preorder index of the derivation node.
    pub node: usize,
    pub slot: Slot,
    /// Path to the atom inside the slot's type.
    pub path: Vec<usize>,
    pub name: Name,
    pub polarity: Polarity,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}:{}", self.name, self.node, self.slot)?;
        for i in &self.path {
            write!(f, ".{i}")?;
        }
        Ok(())
    }
}

type Key = (usize, Slot, Vec<usize>);

#[derive(Clone, Debug, Default)]
pub struct FlowGraph {
    pub vertices: Vec<Position>,
    pub edges: Vec<(usize, usize)>,
    index: HashMap<Key, usize>,
    /// Vertex of the main atom of every probabilistic axiom.
    pub axiom_roots: BTreeMap<Name, usize>,
}

/// Atoms of `ty` with their paths and whether they occur positively.
fn atom_paths(ty: &IType) -> Vec<(Vec<usize>, &Atom, bool)> {
    fn go<'a>(ty: &'a IType, path: &mut Vec<usize>, positive: bool, out: &mut Vec<(Vec<usize>, &'a Atom, bool)>) {
        match ty {
            IType::Atom(a) => out.push((path.clone(), a, positive)),
            IType::Tensor(a, b) => {
                for (i, t) in [a, b].into_iter().enumerate() {
                    path.push(i);
                    go(t, path, positive, out);
                    path.pop();
                }
            }
            IType::Multiset(items) => {
                for (i, t) in items.iter().enumerate() {
                    path.push(i);
                    go(t, path, positive, out);
                    path.pop();
                }
            }
            IType::Arrow(p, a) => {
                path.push(0);
                go(p, path, !positive, out);
                path.pop();
                path.push(1);
                go(a, path, positive, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(ty, &mut Vec::new(), true, &mut out);
    out
}

fn subtype<'a>(ty: &'a IType, path: &[usize]) -> Option<&'a IType> {
    let Some((&i, rest)) = path.split_first() else {
        return Some(ty);
    };
    let next = match (ty, i) {
        (IType::Tensor(a, _), 0) | (IType::Arrow(a, _), 0) => &**a,
        (IType::Tensor(_, b), 1) | (IType::Arrow(_, b), 1) => &**b,
        (IType::Multiset(items), i) => items.get(i)?,
        _ => return None,
    };
    subtype(next, rest)
}

/// Pairs each item of `target` with an unused item of `source` of the same
/// type.
fn match_items(source: &[IType], target: &[IType]) -> Vec<(usize, usize)> {
    let mut used = vec![false; source.len()];
    let mut out = Vec::new();
    for (j, t) in target.iter().enumerate() {
        let hit = (0..source.len())
            .find(|&i| !used[i] && source[i] == *t)
            .or_else(|| (0..source.len()).find(|&i| !used[i] && source[i].same(t)));
        if let Some(i) = hit {
            used[i] = true;
            out.push((i, j));
        }
    }
    out
}

fn multiset_items(ty: &IType) -> &[IType] {
    match ty {
        IType::Multiset(items) => items,
        _ => &[],
    }
}

impl FlowGraph {
    pub fn vertex(&self, node: usize, slot: &Slot, path: &[usize]) -> Option<usize> {
        self.index.get(&(node, slot.clone(), path.to_vec())).copied()
    }

    fn add_slot(&mut self, node: usize, slot: Slot, ty: &IType) {
        for (path, atom, positive) in atom_paths(ty) {
            let polarity = match (&slot, positive) {
                (Slot::Subject, true) | (Slot::Ground(_) | Slot::Multi(..), false) => Polarity::Output,
                _ => Polarity::Input,
            };
            let id = self.vertices.len();
            self.index.insert((node, slot.clone(), path.clone()), id);
            self.vertices.push(Position { node, slot: slot.clone(), path, name: atom.name.clone(), polarity });
        }
    }

    fn edge(&mut self, a: usize, b: usize) {
        self.edges.push((a, b));
    }

    /// Links the occurrence `ty` at `from` to the same occurrence at `to`;
    /// positive atoms flow from `from`, negative ones back.
    fn link(&mut self, from: (usize, Slot, &[usize]), to: (usize, Slot, &[usize]), ty: &IType) {
        for (path, _, positive) in atom_paths(ty) {
            let p: Vec<usize> = from.2.iter().chain(&path).copied().collect();
            let q: Vec<usize> = to.2.iter().chain(&path).copied().collect();
            let (Some(a), Some(b)) = (self.vertex(from.0, &from.1, &p), self.vertex(to.0, &to.1, &q)) else {
                continue;
            };
            if self.vertices[a].name != self.vertices[b].name {
                continue;
            }
            if positive {
                self.edge(a, b);
            } else {
                self.edge(b, a);
            }
        }
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for &(a, b) in &self.edges {
            out[a].push(b);
        }
        out
    }

    /// Edges between positions of different names, collapsed to names.
    pub fn collapse(&self) -> BTreeSet<(Name, Name)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.vertices[a].name.clone(), self.vertices[b].name.clone()))
            .filter(|(a, b)| a != b)
            .collect()
    }

    pub fn to_dot(&self) -> String {
        if self.vertices.is_empty() {
            return "digraph{}".to_string();
        }
        let mut out = String::from("digraph flow {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let dir = match v.polarity {
                Polarity::Input => "in",
                Polarity::Output => "out",
            };
            let _ = writeln!(out, "  p{i} [label=\"{v} {dir}\"];");
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "  p{a} -> p{b};");
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "vertices": self.vertices.iter().enumerate().map(|(i, v)| serde_json::json!({
                "id": i,
                "node": v.node,
                "slot": v.slot.to_string(),
                "path": v.path,
                "name": v.name.to_string(),
                "polarity": v.polarity,
            })).collect::<Vec<_>>(),
            "edges": self.edges,
        })
    }
}

/// Flow graph of a derivation, with vertices numbered in node preorder.
pub fn build_flow(d: &Derivation) -> FlowGraph {
    let mut g = FlowGraph::default();
    let nodes = d.nodes();
    for (id, n) in nodes.iter().enumerate() {
        for (x, ty) in &n.judgment.ground {
            g.add_slot(id, Slot::Ground(x.clone()), ty);
        }
        for (x, items) in &n.judgment.multiset {
            for (i, ty) in items.iter().enumerate() {
                g.add_slot(id, Slot::Multi(x.clone(), i), ty);
            }
        }
        g.add_slot(id, Slot::Subject, n.ty());
        if n.rule.is_probabilistic() {
            if let (Some(a), Some(v)) = (n.ty().as_atom(), g.vertex(id, &Slot::Subject, &[])) {
                g.axiom_roots.insert(a.name.clone(), v);
            }
        }
    }
    let mut id = 0;
    connect(d, &mut id, &mut g);
    g
}

fn binders(d: &Derivation, premise: usize) -> Vec<&Var> {
    match (d.subject(), premise) {
        (Term::Let(x, ..), 1) | (Term::Lam(x, _), 0) => vec![x],
        (Term::LetPair(x, y, ..), 1) => vec![x, y],
        _ => vec![],
    }
}

/// Binds `x` in premise `c` to the occurrence at `from`.
fn cut(g: &mut FlowGraph, from: (usize, Slot, &[usize]), ty: &IType, c: usize, body: &Derivation, x: &Var) {
    if body.judgment.ground.contains_key(x) {
        g.link(from, (c, Slot::Ground(x.clone()), &[]), ty);
    } else if let Some(used) = body.judgment.multiset.get(x) {
        for (i, j) in match_items(multiset_items(ty), used) {
            let p: Vec<usize> = from.2.iter().copied().chain([i]).collect();
            g.link((from.0, from.1.clone(), &p), (c, Slot::Multi(x.clone(), j), &[]), &multiset_items(ty)[i]);
        }
    }
}

fn connect(d: &Derivation, next: &mut usize, g: &mut FlowGraph) {
    let n = *next;
    *next += 1;
    let mut kids = Vec::new();
    for p in &d.premises {
        kids.push(*next);
        connect(p, next, g);
    }
    let j = &d.judgment;
    for (k, (p, &c)) in d.premises.iter().zip(&kids).enumerate() {
        let bound = binders(d, k);
        for (x, ty) in &p.judgment.ground {
            if j.ground.contains_key(x) && !bound.contains(&x) {
                g.link((n, Slot::Ground(x.clone()), &[]), (c, Slot::Ground(x.clone()), &[]), ty);
            }
        }
    }
    for (x, items) in &j.multiset {
        let mut source: Vec<(usize, usize, IType)> = Vec::new();
        for (k, (p, &c)) in d.premises.iter().zip(&kids).enumerate() {
            if binders(d, k).contains(&x) {
                continue;
            }
            if let Some(ts) = p.judgment.multiset.get(x) {
                source.extend(ts.iter().enumerate().map(|(i, t)| (c, i, t.clone())));
            }
        }
        let types: Vec<IType> = source.iter().map(|s| s.2.clone()).collect();
        for (i, jx) in match_items(&types, items) {
            let (c, ci, ty) = &source[i];
            g.link((n, Slot::Multi(x.clone(), jx), &[]), (*c, Slot::Multi(x.clone(), *ci), &[]), ty);
        }
    }
    let sub = |c: usize| (c, Slot::Subject);
    match d.subject() {
        Term::Var(x) => {
            if let Some(ty) = j.ground.get(x) {
                g.link((n, Slot::Ground(x.clone()), &[]), (n, Slot::Subject, &[]), ty);
            } else if let Some(items) = j.multiset.get(x) {
                for (i, ty) in items.iter().enumerate() {
                    g.link((n, Slot::Multi(x.clone(), i), &[]), (n, Slot::Subject, &[i]), ty);
                }
            }
        }
        Term::Obs(v, _) => {
            if let Term::Var(x) = &**v {
                if let (Some(a), Some(b)) = (g.vertex(n, &Slot::Ground(x.clone()), &[]), g.vertex(n, &Slot::Subject, &[])) {
                    g.edge(a, b);
                }
            }
        }
        Term::Case(v, _) => {
            let target = g.vertex(n, &Slot::Subject, &[]);
            let leaves: BTreeSet<&Var> = v.tuple_vars().unwrap_or_default().into_iter().collect();
            for y in leaves {
                if let (Some(a), Some(b)) = (g.vertex(n, &Slot::Ground(y.clone()), &[]), target) {
                    g.edge(a, b);
                }
            }
        }
        Term::Pair(..) => {
            for (i, (p, &c)) in d.premises.iter().zip(&kids).enumerate() {
                let (s, slot) = sub(c);
                g.link((s, slot, &[]), (n, Slot::Subject, &[i]), p.ty());
            }
        }
        Term::Let(x, ..) if kids.len() == 2 => {
            cut(g, (kids[0], Slot::Subject, &[]), d.premises[0].ty(), kids[1], &d.premises[1], x);
            g.link((kids[1], Slot::Subject, &[]), (n, Slot::Subject, &[]), d.premises[1].ty());
        }
        Term::LetPair(x, y, ..) if kids.len() == 2 => {
            if let IType::Tensor(a, b) = d.premises[0].ty() {
                cut(g, (kids[0], Slot::Subject, &[0]), a, kids[1], &d.premises[1], x);
                cut(g, (kids[0], Slot::Subject, &[1]), b, kids[1], &d.premises[1], y);
            }
            g.link((kids[1], Slot::Subject, &[]), (n, Slot::Subject, &[]), d.premises[1].ty());
        }
        Term::Lam(x, _) if kids.len() == 1 => {
            if let IType::Arrow(param, result) = d.ty() {
                cut(g, (n, Slot::Subject, &[0]), param, kids[0], &d.premises[0], x);
                g.link((kids[0], Slot::Subject, &[]), (n, Slot::Subject, &[1]), result);
            }
        }
        Term::App(..) if kids.len() == 2 => {
            if let IType::Arrow(param, result) = d.premises[0].ty() {
                g.link((kids[1], Slot::Subject, &[]), (kids[0], Slot::Subject, &[0]), param);
                g.link((kids[0], Slot::Subject, &[1]), (n, Slot::Subject, &[]), result);
            }
        }
        Term::Bang(_) => {
            for (i, (p, &c)) in d.premises.iter().zip(&kids).enumerate() {
                g.link((c, Slot::Subject, &[]), (n, Slot::Subject, &[i]), p.ty());
            }
        }
        Term::Der(_) if kids.len() == 1 => {
            if let Some(inner) = subtype(d.premises[0].ty(), &[0]) {
                g.link((kids[0], Slot::Subject, &[0]), (n, Slot::Subject, &[]), inner);
            }
        }
        _ => {}
    }
}

pub fn is_acyclic(g: &FlowGraph) -> bool {
    let succ = g.successors();
    let mut indegree = vec![0usize; g.vertices.len()];
    for &(_, b) in &g.edges {
        indegree[b] += 1;
    }
    let mut queue: VecDeque<usize> = (0..indegree.len()).filter(|&v| indegree[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop_front() {
        seen += 1;
        for &w in &succ[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    seen == g.vertices.len()
}

/// Positions of one name, connected by same-name edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub root: usize,
    pub positions: Vec<usize>,
}

/// Groups positions by name and verifies that each main name flows from
/// its axiom along a single tree.
pub fn named_components(g: &FlowGraph) -> Result<BTreeMap<Name, Component>, FlowError> {
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); g.vertices.len()];
    for &(a, b) in &g.edges {
        if g.vertices[a].name == g.vertices[b].name {
            parents[b].push(a);
        }
    }
    if let Some(v) = parents.iter().position(|ps| ps.len() > 1) {
        return Err(FlowError::SharedParent(g.vertices[v].to_string()));
    }
    let mut by_name: BTreeMap<Name, Vec<usize>> = BTreeMap::new();
    for (i, v) in g.vertices.iter().enumerate() {
        by_name.entry(v.name.clone()).or_default().push(i);
    }
    let mut out = BTreeMap::new();
    for (name, positions) in by_name {
        let roots: Vec<usize> = positions.iter().copied().filter(|&v| parents[v].is_empty()).collect();
        let root = match g.axiom_roots.get(&name) {
            Some(&axiom) if roots == [axiom] => axiom,
            Some(_) => return Err(FlowError::Split(name)),
            None => roots[0],
        };
        out.insert(name, Component { root, positions });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnNode<S: Scalar = f64> {
    pub name: Name,
    pub obs: Observation,
    pub parents: Vec<Name>,
    pub cpt: Factor<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BayesianNetwork<S: Scalar = f64> {
    pub nodes: Vec<BnNode<S>>,
    /// Names of the conclusion's type, in order of occurrence.
    pub query: Vec<Name>,
    /// Names of free variables the network is conditioned on.
    pub inputs: Vec<Name>,
    pub warnings: Vec<String>,
}

impl<S: Scalar> BayesianNetwork<S> {
    pub fn edges(&self) -> BTreeSet<(Name, Name)> {
        self.nodes
            .iter()
            .flat_map(|n| n.parents.iter().map(move |p| (p.clone(), n.name.clone())))
            .collect()
    }

    pub fn names(&self) -> BTreeSet<Name> {
        self.nodes.iter().map(|n| n.name.clone()).collect()
    }

    pub fn is_acyclic(&self) -> bool {
        let mut placed: BTreeSet<Name> = self.inputs.iter().cloned().collect();
        let mut left: Vec<&BnNode<S>> = self.nodes.iter().collect();
        while !left.is_empty() {
            let before = left.len();
            left.retain(|n| {
                let ready = n.parents.iter().all(|p| placed.contains(p));
                if ready {
                    placed.insert(n.name.clone());
                }
                !ready
            });
            if left.len() == before {
                return false;
            }
        }
        true
    }

    pub fn to_dot(&self) -> String {
        if self.nodes.is_empty() {
            return "digraph{}".to_string();
        }
        let mut out = String::from("digraph bn {\n");
        for n in &self.nodes {
            let label = match n.obs {
                Observation::Free => n.name.to_string(),
                Observation::Seen(b) => format!("{}^{}", n.name, if b { "t" } else { "f" }),
            };
            let _ = writeln!(out, "  \"{}\" [label=\"{label}\"];", n.name);
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "  \"{a}\" -> \"{b}\";");
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> BnJson {
        BnJson {
            nodes: self
                .nodes
                .iter()
                .map(|n| BnNodeJson {
                    name: n.name.to_string(),
                    parents: n.parents.iter().map(Name::to_string).collect(),
                    cpt: n.cpt.to_json(),
                })
                .collect(),
            query: self.query.iter().map(Name::to_string).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnNodeJson {
    pub name: String,
    pub parents: Vec<String>,
    pub cpt: FactorJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnJson {
    pub nodes: Vec<BnNodeJson>,
    pub query: Vec<String>,
}

/// One node per probabilistic axiom, with an edge from every name a `case`
/// reads to the name it introduces.
pub fn extract_bn<S: Scalar>(d: &Derivation) -> Result<BayesianNetwork<S>, FactorError> {
    let mut nodes = Vec::new();
    for ax in d.axioms() {
        let Some(atom) = ax.ty().as_atom() else {
            continue;
        };
        let mut parents: Vec<Name> = Vec::new();
        for VarDomain { name, .. } in cond_parents(ax) {
            if name != atom.name && !parents.contains(&name) {
                parents.push(name);
            }
        }
        nodes.push(BnNode { name: atom.name.clone(), obs: atom.obs, parents, cpt: axiom_factor(ax)? });
    }
    let query = d.ty().atoms().into_iter().map(|a| a.name.clone()).collect();
    let j = &d.judgment;
    let inputs: Vec<Name> = j.ground.values().flat_map(IType::names).collect::<BTreeSet<_>>().into_iter().collect();
    let mut warnings = Vec::new();
    if !j.ground.is_empty() || !j.multiset.is_empty() {
        let vars: Vec<String> = j.ground.keys().chain(j.multiset.keys()).map(Var::to_string).collect();
        warnings.push(format!("open term (free: {}): the network is conditional on its inputs", vars.join(", ")));
    }
    if !d.ty().is_ground() {
        warnings.push(format!("conclusion type {} is not ground", d.ty()));
    }
    Ok(BayesianNetwork { nodes, query, inputs, warnings })
}

/// Product of all conditional probability tables.
pub fn bn_semantics<S: Scalar>(b: &BayesianNetwork<S>) -> Result<Factor<S>, FactorError> {
    let cpts: Vec<&Factor<S>> = b.nodes.iter().map(|n| &n.cpt).collect();
    Factor::product_all(&cpts, &mut Accounting::default())
}

/// Joint of the network summed down to `keep`.
pub fn bn_marginal<S: Scalar>(b: &BayesianNetwork<S>, keep: &BTreeSet<Name>) -> Result<Factor<S>, FactorError> {
    let joint = bn_semantics(b)?;
    let drop = joint.names().into_iter().filter(|n| !keep.contains(n)).collect();
    joint.sum_out(&drop, &mut Accounting::default())
}
