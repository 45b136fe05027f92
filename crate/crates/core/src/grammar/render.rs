//! Text and JSON views of a feature graph.
//!
//! Nodes reached more than once get a tag `#k`, numbered in depth-first
//! preorder with features visited alphabetically. The first occurrence is
//! written `#k:sort(...)`, later ones just `#k`. The output parses back with
//! [`parse_term`](super::parse_term).

use std::collections::HashMap;

use serde_json::{Map, Value};

use crate::store::{NodeRef, TermStore};

fn in_degrees(store: &TermStore, root: NodeRef) -> HashMap<NodeRef, usize> {
    let mut deg = HashMap::new();
    deg.insert(store.deref(root), 1);
    for n in store.reachable(root) {
        for (_, v) in store.features(n) {
            *deg.entry(store.deref(v)).or_insert(0) += 1;
        }
    }
    deg
}

struct Printer<'a> {
    store: &'a TermStore,
    deg: HashMap<NodeRef, usize>,
    tags: HashMap<NodeRef, usize>,
    next_tag: usize,
    pretty: bool,
    out: String,
}

impl Printer<'_> {
    fn node(&mut self, n: NodeRef, depth: usize) {
        let n = self.store.deref(n);
        if let Some(k) = self.tags.get(&n) {
            self.out.push_str(&format!("#{k}"));
            return;
        }
        if self.deg.get(&n).copied().unwrap_or(0) > 1 {
            self.next_tag += 1;
            let k = self.next_tag;
            self.tags.insert(n, k);
            self.out.push_str(&format!("#{k}:"));
        }
        let lattice = self.store.lattice();
        self.out.push_str(lattice.name(self.store.sort_of(n)));
        let feats = self.store.features(n);
        if feats.is_empty() {
            return;
        }
        self.out.push('(');
        for (i, (f, v)) in feats.iter().enumerate() {
            if self.pretty {
                self.out.push('\n');
                self.out.push_str(&"  ".repeat(depth + 1));
            } else if i > 0 {
                self.out.push(' ');
            }
            self.out.push_str(f.as_str());
            self.out.push_str(" => ");
            self.node(*v, depth + 1);
            if i + 1 < feats.len() {
                self.out.push(',');
            }
        }
        if self.pretty {
            self.out.push('\n');
            self.out.push_str(&"  ".repeat(depth));
        }
        self.out.push(')');
    }
}

fn render(store: &TermStore, root: NodeRef, pretty: bool) -> String {
    let mut p = Printer {
        store,
        deg: in_degrees(store, root),
        tags: HashMap::new(),
        next_tag: 0,
        pretty,
        out: String::new(),
    };
    p.node(root, 0);
    p.out
}

/// Single-line AVM, e.g. `phrase(head => #1:verb, dtr => sign(head => #1))`.
pub fn render_avm(store: &TermStore, root: NodeRef) -> String {
    render(store, root, false)
}

/// Indented AVM, one feature per line.
pub fn render_avm_pretty(store: &TermStore, root: NodeRef) -> String {
    render(store, root, true)
}

/// `{"root":"n0","nodes":{"n0":{"sort":..,"features":{f:"n1",..}},..}}`
/// with ids assigned in depth-first preorder.
pub fn export_json(store: &TermStore, root: NodeRef) -> Value {
    let mut ids: HashMap<NodeRef, usize> = HashMap::new();
    let mut order = Vec::new();
    let mut stack = vec![store.deref(root)];
    while let Some(n) = stack.pop() {
        if ids.contains_key(&n) {
            continue;
        }
        ids.insert(n, order.len());
        order.push(n);
        let feats = store.features(n);
        for (_, v) in feats.iter().rev() {
            let v = store.deref(*v);
            if !ids.contains_key(&v) {
                stack.push(v);
            }
        }
    }
    let lattice = store.lattice();
    let mut nodes = Map::new();
    for (i, &n) in order.iter().enumerate() {
        let mut feats = Map::new();
        for (f, v) in store.features(n) {
            feats.insert(f.as_str().to_string(), Value::String(format!("n{}", ids[&store.deref(v)])));
        }
        let mut obj = Map::new();
        obj.insert("sort".into(), Value::String(lattice.name(store.sort_of(n)).to_string()));
        obj.insert("features".into(), Value::Object(feats));
        nodes.insert(format!("n{i}"), Value::Object(obj));
    }
    let mut top = Map::new();
    top.insert("root".into(), Value::String("n0".into()));
    top.insert("nodes".into(), Value::Object(nodes));
    Value::Object(top)
}
