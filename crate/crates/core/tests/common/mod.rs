//! Reference implementations shared by the integration tests. None of this
//! goes through the engine's own unification or isomorphism code.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use ftg::chart::tokenize;
use ftg::hpsg::{check_totally_well_typed, enforce_posthoc};
use ftg::{Feature, Grammar, NodeRef, TermStore, TermTemplate};

/// Canonical text of the rooted graph under `root`: nodes numbered in
/// breadth-first order with features taken alphabetically. Two rooted
/// graphs are isomorphic iff their encodings are equal.
pub fn canon(store: &TermStore, root: NodeRef) -> String {
    let mut ids: HashMap<NodeRef, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let root = store.deref(root);
    ids.insert(root, 0);
    queue.push_back(root);
    let mut out = String::new();
    while let Some(n) = queue.pop_front() {
        let mut feats: Vec<(String, NodeRef)> = store
            .features(n)
            .into_iter()
            .map(|(f, v)| (f.as_str().to_string(), store.deref(v)))
            .collect();
        feats.sort();
        out.push_str(store.lattice().name(store.sort_of(n)));
        out.push('{');
        for (f, v) in feats {
            let next = ids.len();
            let id = *ids.entry(v).or_insert_with(|| {
                queue.push_back(v);
                next
            });
            out.push_str(&format!("{f}:{id},"));
        }
        out.push_str("};");
    }
    out
}

// ---------------------------------------------------------------- lattice

/// Subsort order given as explicit child/parent edges, closed by
/// brute force. Index 0 is `top`.
pub struct OrderOracle {
    pub names: Vec<String>,
    leq: Vec<Vec<bool>>,
}

#[derive(Debug, PartialEq, Eq)]
pub enum Meet {
    Sort(usize),
    Bottom,
    Ambiguous(Vec<usize>),
}

impl OrderOracle {
    /// `edges` are `(child, parent)` indices; index 0 is added as top.
    pub fn new(names: Vec<String>, edges: &[(usize, usize)]) -> Self {
        let n = names.len();
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
            row[0] = true;
        }
        for &(c, p) in edges {
            leq[c][p] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    for j in 0..n {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        OrderOracle { names, leq }
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    pub fn meet(&self, a: usize, b: usize) -> Meet {
        let n = self.names.len();
        let lower: Vec<usize> = (0..n).filter(|&c| self.leq[c][a] && self.leq[c][b]).collect();
        let maxima: Vec<usize> = lower
            .iter()
            .copied()
            .filter(|&c| !lower.iter().any(|&d| d != c && self.leq[c][d]))
            .collect();
        match maxima.len() {
            0 => Meet::Bottom,
            1 => Meet::Sort(maxima[0]),
            _ => Meet::Ambiguous(maxima),
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

// ------------------------------------------------------------ unification

/// A plain graph: node sorts by index into an [`OrderOracle`], edges by
/// feature name.
#[derive(Clone, Debug)]
pub struct PlainGraph {
    pub sorts: Vec<usize>,
    pub edges: Vec<BTreeMap<String, usize>>,
}

impl PlainGraph {
    /// Places both graphs side by side; the second one's nodes are shifted.
    pub fn disjoint_union(&self, other: &PlainGraph) -> (PlainGraph, usize) {
        let off = self.sorts.len();
        let mut g = self.clone();
        g.sorts.extend(&other.sorts);
        for e in &other.edges {
            g.edges.push(e.iter().map(|(f, &v)| (f.clone(), v + off)).collect());
        }
        (g, off)
    }

    pub fn build(&self, store: &mut TermStore, order: &OrderOracle) -> Vec<NodeRef> {
        let lattice = store.lattice().clone();
        let nodes: Vec<NodeRef> = self
            .sorts
            .iter()
            .map(|&s| store.new_node(lattice.lookup(&order.names[s]).unwrap()).unwrap())
            .collect();
        for (i, e) in self.edges.iter().enumerate() {
            for (f, &v) in e {
                store.put_feature(nodes[i], &Feature::new(f), nodes[v]).unwrap();
            }
        }
        nodes
    }

    /// Canonical text, same format as [`canon`].
    pub fn canon(&self, root: usize, order: &OrderOracle) -> String {
        let mut ids: HashMap<usize, usize> = HashMap::from([(root, 0)]);
        let mut queue = VecDeque::from([root]);
        let mut out = String::new();
        while let Some(n) = queue.pop_front() {
            out.push_str(&order.names[self.sorts[n]]);
            out.push('{');
            for (f, &v) in &self.edges[n] {
                let next = ids.len();
                let id = *ids.entry(v).or_insert_with(|| {
                    queue.push_back(v);
                    next
                });
                out.push_str(&format!("{f}:{id},"));
            }
            out.push_str("};");
        }
        out
    }
}

/// Unifies nodes `a` and `b` of `g` by congruence closure to a fixpoint.
/// Returns the quotient graph and the class of `a`, or `None` on a clash.
pub fn reference_unify(g: &PlainGraph, a: usize, b: usize, order: &OrderOracle) -> Option<(PlainGraph, usize)> {
    let n = g.sorts.len();
    let mut class: Vec<usize> = (0..n).collect();
    let merge = |class: &mut Vec<usize>, x: usize, y: usize| {
        let (cx, cy) = (class[x], class[y]);
        if cx != cy {
            for c in class.iter_mut() {
                if *c == cy {
                    *c = cx;
                }
            }
        }
    };
    merge(&mut class, a, b);
    loop {
        let mut changed = false;
        for u in 0..n {
            for v in 0..n {
                if u == v || class[u] != class[v] {
                    continue;
                }
                for (f, &fu) in &g.edges[u] {
                    if let Some(&fv) = g.edges[v].get(f) {
                        if class[fu] != class[fv] {
                            merge(&mut class, fu, fv);
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut reps: Vec<usize> = class.clone();
    reps.sort();
    reps.dedup();
    let idx: HashMap<usize, usize> = reps.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut sorts = vec![0usize; reps.len()];
    let mut edges = vec![BTreeMap::new(); reps.len()];
    for u in 0..n {
        let k = idx[&class[u]];
        sorts[k] = match order.meet(sorts[k], g.sorts[u]) {
            Meet::Sort(s) => s,
            Meet::Bottom => return None,
            Meet::Ambiguous(_) => panic!("oracle lattice must have unique meets"),
        };
        for (f, &v) in &g.edges[u] {
            edges[k].insert(f.clone(), idx[&class[v]]);
        }
    }
    Some((PlainGraph { sorts, edges }, idx[&class[a]]))
}

// ------------------------------------------------------------------ lists

/// Elements of an `elist`-terminated list, or `None` if the spine is open
/// or cyclic.
pub fn list_items(store: &mut TermStore, list: NodeRef) -> Option<Vec<NodeRef>> {
    let elist = store.lattice().lookup("elist")?;
    let (first, rest) = (Feature::new("first"), Feature::new("rest"));
    let mut out = Vec::new();
    let mut cur = store.deref(list);
    for _ in 0..1000 {
        if store.sort_of(cur) == elist {
            return Some(out);
        }
        out.push(store.deref(store.feature(cur, &first)?));
        cur = store.deref(store.feature(cur, &rest)?);
    }
    None
}

pub fn path(p: &str) -> Vec<Feature> {
    p.split('.').filter(|s| !s.is_empty()).map(Feature::new).collect()
}

pub fn at(store: &mut TermStore, n: NodeRef, p: &str) -> Option<NodeRef> {
    store.resolve_path(n, &path(p), false).unwrap().map(|m| store.deref(m))
}

// ---------------------------------------------------- tree enumeration

#[derive(Clone, Debug)]
pub enum Tree {
    Leaf { pos: usize, entry: usize },
    Node { schema: usize, kids: Vec<Tree> },
}

fn splits(start: usize, end: usize, k: usize) -> Vec<Vec<(usize, usize)>> {
    if k == 1 {
        return vec![vec![(start, end)]];
    }
    let mut out = Vec::new();
    for mid in start + 1..end {
        for mut rest in splits(mid, end, k - 1) {
            rest.insert(0, (start, mid));
            out.push(rest);
        }
    }
    out
}

/// Every tree over `tokens[start..end]` licensed by the schemata' arities,
/// ignoring all feature content.
pub fn all_trees(g: &Grammar, tokens: &[String], start: usize, end: usize) -> Vec<Tree> {
    assert!(g.schemata.iter().all(|s| s.arity() >= 2), "oracle does not enumerate unary chains");
    let mut out = Vec::new();
    if end == start + 1 {
        for entry in 0..g.entries(&tokens[start]).len() {
            out.push(Tree::Leaf { pos: start, entry });
        }
    }
    for (si, s) in g.schemata.iter().enumerate() {
        for tiling in splits(start, end, s.arity()) {
            let mut combos: Vec<Vec<Tree>> = vec![Vec::new()];
            for &(a, b) in &tiling {
                let subs = all_trees(g, tokens, a, b);
                let mut next = Vec::new();
                for c in &combos {
                    for t in &subs {
                        let mut c = c.clone();
                        c.push(t.clone());
                        next.push(c);
                    }
                }
                combos = next;
            }
            for kids in combos {
                out.push(Tree::Node { schema: si, kids });
            }
        }
    }
    out
}

fn build_tree(store: &mut TermStore, g: &Grammar, tokens: &[String], t: &Tree) -> Option<NodeRef> {
    match t {
        Tree::Leaf { pos, entry } => {
            let tmpl: &TermTemplate = &g.entries(&tokens[*pos])[*entry];
            store.instantiate(tmpl, &mut HashMap::new()).ok()
        }
        Tree::Node { schema, kids } => {
            let s = &g.schemata[*schema];
            let mother = store.instantiate(&s.mother, &mut HashMap::new()).ok()?;
            for (p, kid) in s.daughters.iter().zip(kids) {
                let k = build_tree(store, g, tokens, kid)?;
                let slot = store.resolve_path(mother, p, true).ok()??;
                store.unify(slot, k).ok()?;
            }
            Some(mother)
        }
    }
}

/// Canonical forms of every complete structure over the sentence that
/// passes the passive checks, each tree built in a fresh rule-free store.
pub fn oracle_parses(g: &Grammar, sentence: &str) -> Vec<String> {
    let tokens = tokenize(sentence);
    let mut out = Vec::new();
    for t in all_trees(g, &tokens, 0, tokens.len()) {
        let mut store = TermStore::new(g.lattice.clone());
        let Some(root) = build_tree(&mut store, g, &tokens, &t) else { continue };
        if let Some(start) = g.start {
            if !g.lattice.leq(store.sort_of(root), start) {
                continue;
            }
        }
        if enforce_posthoc(&mut store, root, &g.rules).is_err() {
            continue;
        }
        if store.pending_suspensions_under(root) != 0 || !check_totally_well_typed(&store, root).is_empty() {
            continue;
        }
        out.push(canon(&store, root));
    }
    out.sort();
    out
}

pub fn corpus() -> Vec<&'static str> {
    include_str!("../../../../grammars/corpus.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect()
}
