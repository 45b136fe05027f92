//! The term store: a graph of sorted feature nodes with union-find
//! coreference, order-sorted unification and trail-based checkpoints.
//!
//! Every mutation made while a checkpoint is open is recorded on a trail so
//! that [`TermStore::rollback`] can restore the exact earlier state. Failed
//! operations leave the store dirty; the only way back is a rollback.
//!
//! Graphs are rational: feature cycles are allowed and there is no occurs
//! check. All traversals keep visited sets.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{RuleId, RuleSet, SuspId, SuspStatus, Suspension, Task};
use crate::lattice::{Feature, SortId, SortLattice};
use crate::template::{ListSorts, Tag, TermTemplate};

/// Default limit on rule firings per top-level operation.
pub const DEFAULT_FIRING_BUDGET: usize = 10_000;

/// Handle to a node. Always dereference through the store before use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeRef(pub(crate) u32);

impl NodeRef {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Failure {
    #[error("sort clash: `{left}` and `{right}` have no common subsort")]
    SortClash { left: String, right: String },
    #[error("feature `{feature}` is not allowed on `{sort}`")]
    ClosedFeature { sort: String, feature: String },
    #[error("append argument of sort `{sort}` is not a list")]
    NotAList { sort: String },
    #[error("constraint firing budget of {0} exceeded")]
    BudgetExceeded(usize),
    #[error("cannot create a node of sort ⊥")]
    BottomSort,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CheckpointError {
    #[error("checkpoint is not the innermost open checkpoint")]
    NonLifo,
}

/// A closed-feature monitor attached to a node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Monitor {
    pub rule: Option<RuleId>,
    pub allowed: Arc<[Feature]>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Node {
    pub parent: Option<NodeRef>,
    pub sort: SortId,
    pub features: BTreeMap<Feature, NodeRef>,
    pub fired: Vec<RuleId>,
    pub suspensions: Vec<SuspId>,
    pub monitors: Vec<Monitor>,
}

impl Node {
    fn new(sort: SortId) -> Self {
        Node {
            parent: None,
            sort,
            features: BTreeMap::new(),
            fired: Vec::new(),
            suspensions: Vec::new(),
            monitors: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Undo {
    NewNode,
    Union(NodeRef),
    Sort(NodeRef, SortId),
    FeatureAdded(NodeRef, Feature),
    Fired(NodeRef, Vec<RuleId>),
    SuspsLen(NodeRef, usize),
    MonitorsLen(NodeRef, usize),
    NewSuspension,
    SuspStatus(SuspId, SuspStatus),
}

/// Token for an open checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    serial: u64,
}

/// Counters kept by the constraint engine. Not part of the rollback state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub rules_fired: u64,
    pub suspensions_created: u64,
    pub wakes: u64,
}

/// Observable store state, for exact rollback comparisons in tests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreSnapshot {
    nodes: Vec<Node>,
    suspensions: Vec<Suspension>,
}

pub struct TermStore {
    pub(crate) lattice: Arc<SortLattice>,
    pub(crate) rules: Arc<RuleSet>,
    pub(crate) lists: Option<ListSorts>,
    pub(crate) nodes: Vec<Node>,
    pub(crate) suspensions: Vec<Suspension>,
    trail: Vec<Undo>,
    marks: Vec<(u64, usize)>,
    next_serial: u64,
    pub(crate) queue: VecDeque<Task>,
    pub(crate) propagating: bool,
    pub(crate) deferred: u32,
    pub(crate) firings: usize,
    pub(crate) budget: usize,
    pub(crate) stats: EngineStats,
    pub(crate) trace: Option<Vec<String>>,
}

impl TermStore {
    /// A store without active rules.
    pub fn new(lattice: Arc<SortLattice>) -> Self {
        let rules = Arc::new(RuleSet::new(&lattice));
        Self::with_rules(lattice, rules)
    }

    pub fn with_rules(lattice: Arc<SortLattice>, rules: Arc<RuleSet>) -> Self {
        let lists = ListSorts::from_lattice(&lattice);
        TermStore {
            lattice,
            rules,
            lists,
            nodes: Vec::new(),
            suspensions: Vec::new(),
            trail: Vec::new(),
            marks: Vec::new(),
            next_serial: 0,
            queue: VecDeque::new(),
            propagating: false,
            deferred: 0,
            firings: 0,
            budget: DEFAULT_FIRING_BUDGET,
            stats: EngineStats::default(),
            trace: None,
        }
    }

    pub fn lattice(&self) -> &Arc<SortLattice> {
        &self.lattice
    }

    pub fn rules(&self) -> &Arc<RuleSet> {
        &self.rules
    }

    pub fn set_firing_budget(&mut self, budget: usize) {
        self.budget = budget;
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    /// Starts collecting trace lines.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    /// Returns and clears the collected trace lines.
    pub fn take_trace(&mut self) -> Vec<String> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub(crate) fn tracing(&self) -> bool {
        self.trace.is_some()
    }

    pub(crate) fn emit(&mut self, line: String) {
        if let Some(t) = self.trace.as_mut() {
            t.push(line);
        }
    }

    /// Total number of node cells, including merged ones.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn deref(&self, mut n: NodeRef) -> NodeRef {
        while let Some(p) = self.nodes[n.index()].parent {
            n = p;
        }
        n
    }

    pub fn sort_of(&self, n: NodeRef) -> SortId {
        self.nodes[self.deref(n).index()].sort
    }

    pub fn feature(&self, n: NodeRef, f: &Feature) -> Option<NodeRef> {
        self.nodes[self.deref(n).index()].features.get(f).map(|&v| self.deref(v))
    }

    /// Features of the canonical node, in name order, with dereferenced values.
    pub fn features(&self, n: NodeRef) -> Vec<(Feature, NodeRef)> {
        self.nodes[self.deref(n).index()]
            .features
            .iter()
            .map(|(f, &v)| (f.clone(), self.deref(v)))
            .collect()
    }

    pub fn fired_rules(&self, n: NodeRef) -> &[RuleId] {
        &self.nodes[self.deref(n).index()].fired
    }

    fn record(&mut self, u: Undo) {
        if !self.marks.is_empty() {
            self.trail.push(u);
        }
    }

    // ---- raw cell mutations (trailed, no events) ----

    pub(crate) fn push_node(&mut self, sort: SortId) -> NodeRef {
        let n = NodeRef(self.nodes.len() as u32);
        self.nodes.push(Node::new(sort));
        self.record(Undo::NewNode);
        n
    }

    pub(crate) fn set_sort(&mut self, n: NodeRef, sort: SortId) {
        let old = std::mem::replace(&mut self.nodes[n.index()].sort, sort);
        self.record(Undo::Sort(n, old));
    }

    pub(crate) fn add_feature_raw(&mut self, n: NodeRef, f: Feature, v: NodeRef) {
        self.nodes[n.index()].features.insert(f.clone(), v);
        self.record(Undo::FeatureAdded(n, f));
    }

    pub(crate) fn mark_fired(&mut self, n: NodeRef, rule: RuleId) {
        let fired = &mut self.nodes[n.index()].fired;
        if let Err(pos) = fired.binary_search(&rule) {
            let old = fired.clone();
            fired.insert(pos, rule);
            self.record(Undo::Fired(n, old));
        }
    }

    pub(crate) fn attach_suspension(&mut self, n: NodeRef, s: SuspId) {
        let len = self.nodes[n.index()].suspensions.len();
        if self.nodes[n.index()].suspensions.contains(&s) {
            return;
        }
        self.nodes[n.index()].suspensions.push(s);
        self.record(Undo::SuspsLen(n, len));
    }

    pub(crate) fn attach_monitor(&mut self, n: NodeRef, m: Monitor) {
        let len = self.nodes[n.index()].monitors.len();
        self.nodes[n.index()].monitors.push(m);
        self.record(Undo::MonitorsLen(n, len));
    }

    pub(crate) fn push_suspension(&mut self, s: Suspension) -> SuspId {
        let id = SuspId(self.suspensions.len() as u32);
        self.suspensions.push(s);
        self.record(Undo::NewSuspension);
        id
    }

    pub(crate) fn set_susp_status(&mut self, id: SuspId, status: SuspStatus) {
        let old = std::mem::replace(&mut self.suspensions[id.0 as usize].status, status);
        self.record(Undo::SuspStatus(id, old));
    }

    // ---- checkpoints ----

    pub fn checkpoint(&mut self) -> Checkpoint {
        let serial = self.next_serial;
        self.next_serial += 1;
        self.marks.push((serial, self.trail.len()));
        Checkpoint { serial }
    }

    /// Restores the state at `c` and closes it.
    pub fn rollback(&mut self, c: Checkpoint) -> Result<(), CheckpointError> {
        let &(serial, len) = self.marks.last().ok_or(CheckpointError::NonLifo)?;
        if serial != c.serial {
            return Err(CheckpointError::NonLifo);
        }
        while self.trail.len() > len {
            let u = self.trail.pop().unwrap();
            self.undo(u);
        }
        self.marks.pop();
        self.queue.clear();
        self.propagating = false;
        self.deferred = 0;
        Ok(())
    }

    /// Closes `c`, keeping its changes.
    pub fn commit(&mut self, c: Checkpoint) -> Result<(), CheckpointError> {
        let &(serial, _) = self.marks.last().ok_or(CheckpointError::NonLifo)?;
        if serial != c.serial {
            return Err(CheckpointError::NonLifo);
        }
        self.marks.pop();
        if self.marks.is_empty() {
            self.trail.clear();
        }
        Ok(())
    }

    pub fn open_checkpoints(&self) -> usize {
        self.marks.len()
    }

    fn undo(&mut self, u: Undo) {
        match u {
            Undo::NewNode => {
                self.nodes.pop();
            }
            Undo::Union(n) => self.nodes[n.index()].parent = None,
            Undo::Sort(n, s) => self.nodes[n.index()].sort = s,
            Undo::FeatureAdded(n, f) => {
                self.nodes[n.index()].features.remove(&f);
            }
            Undo::Fired(n, old) => self.nodes[n.index()].fired = old,
            Undo::SuspsLen(n, len) => self.nodes[n.index()].suspensions.truncate(len),
            Undo::MonitorsLen(n, len) => self.nodes[n.index()].monitors.truncate(len),
            Undo::NewSuspension => {
                self.suspensions.pop();
            }
            Undo::SuspStatus(id, s) => self.suspensions[id.0 as usize].status = s,
        }
    }

    #[doc(hidden)]
    pub fn snapshot(&self) -> StoreSnapshot {
        StoreSnapshot {
            nodes: self.nodes.clone(),
            suspensions: self.suspensions.clone(),
        }
    }

    // ---- operations ----

    /// Creates a node of sort `s`; rules guarding `s` fire before returning.
    pub fn new_node(&mut self, s: SortId) -> Result<NodeRef, Failure> {
        if s == SortId::BOTTOM {
            return Err(Failure::BottomSort);
        }
        let n = self.push_node(s);
        self.on_created(n);
        self.propagate()?;
        Ok(n)
    }

    /// Adds `f = v` to `n`, or unifies with the existing value of `f`.
    pub fn put_feature(&mut self, n: NodeRef, f: &Feature, v: NodeRef) -> Result<(), Failure> {
        let n = self.deref(n);
        match self.nodes[n.index()].features.get(f).copied() {
            Some(old) => self.unify(old, v),
            None => {
                self.add_feature_raw(n, f.clone(), v);
                self.on_feature_added(n);
                self.propagate()
            }
        }
    }

    /// Walks `path` from `n`. With `create`, missing edges get fresh nodes
    /// sorted by the appropriateness bound of the feature (or top).
    pub fn resolve_path(&mut self, n: NodeRef, path: &[Feature], create: bool) -> Result<Option<NodeRef>, Failure> {
        let mut cur = self.deref(n);
        for f in path {
            cur = match self.feature(cur, f) {
                Some(v) => v,
                None if create => {
                    let bound = self.lattice.approp_bound(self.sort_of(cur), f).unwrap_or(SortId::TOP);
                    let v = self.new_node(bound)?;
                    self.put_feature(cur, f, v)?;
                    // the put may have merged through a constraint
                    self.feature(cur, f).expect("feature just added")
                }
                None => return Ok(None),
            };
        }
        Ok(Some(self.deref(cur)))
    }

    /// Refines the sort of `n` to its meet with `s`.
    pub fn restrict_sort(&mut self, n: NodeRef, s: SortId) -> Result<(), Failure> {
        let n = self.deref(n);
        let old = self.nodes[n.index()].sort;
        let g = self.lattice.glb(old, s);
        if g == SortId::BOTTOM {
            return Err(self.clash(old, s));
        }
        if g != old {
            self.set_sort(n, g);
            self.on_refined(n);
        }
        self.propagate()
    }

    pub(crate) fn clash(&self, a: SortId, b: SortId) -> Failure {
        Failure::SortClash {
            left: self.lattice.name(a).to_string(),
            right: self.lattice.name(b).to_string(),
        }
    }

    /// Order-sorted unification followed by constraint propagation.
    pub fn unify(&mut self, a: NodeRef, b: NodeRef) -> Result<(), Failure> {
        self.unify_structural(a, b)?;
        self.propagate()
    }

    fn unify_structural(&mut self, a: NodeRef, b: NodeRef) -> Result<(), Failure> {
        let mut stack = vec![(a, b)];
        while let Some((x, y)) = stack.pop() {
            let x = self.deref(x);
            let y = self.deref(y);
            if x == y {
                continue;
            }
            let sx = self.nodes[x.index()].sort;
            let sy = self.nodes[y.index()].sort;
            let s = self.lattice.glb(sx, sy);
            if s == SortId::BOTTOM {
                return Err(self.clash(sx, sy));
            }
            self.nodes[y.index()].parent = Some(x);
            self.record(Undo::Union(y));
            if s != sx {
                self.set_sort(x, s);
            }
            let yfeats: Vec<(Feature, NodeRef)> = self.nodes[y.index()]
                .features
                .iter()
                .map(|(f, &v)| (f.clone(), v))
                .collect();
            let mut added = false;
            for (f, vy) in yfeats {
                match self.nodes[x.index()].features.get(&f).copied() {
                    Some(vx) => stack.push((vx, vy)),
                    None => {
                        self.add_feature_raw(x, f, vy);
                        added = true;
                    }
                }
            }
            let yfired = self.nodes[y.index()].fired.clone();
            for r in yfired {
                self.mark_fired(x, r);
            }
            let ysusps = self.nodes[y.index()].suspensions.clone();
            for s in ysusps {
                self.attach_suspension(x, s);
            }
            let ymons = self.nodes[y.index()].monitors.clone();
            for m in ymons {
                self.attach_monitor(x, m);
            }
            self.on_merged(x, added || s != sx);
        }
        Ok(())
    }

    /// Builds `t` in this store. Tags already in `env` are shared; new tags
    /// are bound in `env`.
    pub fn instantiate(&mut self, t: &TermTemplate, env: &mut HashMap<Tag, NodeRef>) -> Result<NodeRef, Failure> {
        self.deferred += 1;
        let r = self.instantiate_inner(t, env);
        self.deferred -= 1;
        let n = r?;
        self.propagate()?;
        Ok(self.deref(n))
    }

    fn instantiate_inner(&mut self, t: &TermTemplate, env: &mut HashMap<Tag, NodeRef>) -> Result<NodeRef, Failure> {
        let bound = t.tag.as_ref().and_then(|g| env.get(g).copied());
        let n = match bound {
            Some(n) => {
                if t.sort != SortId::TOP {
                    self.restrict_sort(n, t.sort)?;
                }
                n
            }
            None => {
                let n = self.new_node(t.sort)?;
                if let Some(g) = &t.tag {
                    env.insert(g.clone(), n);
                }
                n
            }
        };
        for (f, sub) in &t.features {
            let v = self.instantiate_inner(sub, env)?;
            self.put_feature(n, f, v)?;
        }
        Ok(n)
    }

    /// Nodes reachable from `root`, canonical, in breadth-first feature order.
    pub fn reachable(&self, root: NodeRef) -> Vec<NodeRef> {
        let root = self.deref(root);
        let mut seen = HashSet::from([root]);
        let mut order = vec![root];
        let mut i = 0;
        while i < order.len() {
            let n = order[i];
            i += 1;
            for &v in self.nodes[n.index()].features.values() {
                let v = self.deref(v);
                if seen.insert(v) {
                    order.push(v);
                }
            }
        }
        order
    }

    /// Structure-preserving copy of the graph under `n` into `target`.
    /// Fired sets start empty, so rules fire again on the copy.
    pub fn copy_into(&self, n: NodeRef, target: &mut TermStore) -> Result<NodeRef, Failure> {
        let shape = self.shape(n);
        target.build_shape(&shape)
    }

    /// Copy of `n` inside this store.
    pub fn copy_within(&mut self, n: NodeRef) -> Result<NodeRef, Failure> {
        let shape = self.shape(n);
        self.build_shape(&shape)
    }

    fn shape(&self, n: NodeRef) -> Vec<(SortId, Vec<(Feature, usize)>)> {
        let order = self.reachable(n);
        let pos: HashMap<NodeRef, usize> = order.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        order
            .iter()
            .map(|&m| {
                let node = &self.nodes[m.index()];
                let feats = node.features.iter().map(|(f, &v)| (f.clone(), pos[&self.deref(v)])).collect();
                (node.sort, feats)
            })
            .collect()
    }

    fn build_shape(&mut self, shape: &[(SortId, Vec<(Feature, usize)>)]) -> Result<NodeRef, Failure> {
        let base: Vec<NodeRef> = shape.iter().map(|(s, _)| self.push_node(*s)).collect();
        for (i, (_, feats)) in shape.iter().enumerate() {
            for (f, j) in feats {
                self.add_feature_raw(base[i], f.clone(), base[*j]);
            }
        }
        for &n in &base {
            self.on_created(n);
        }
        self.propagate()?;
        Ok(self.deref(base[0]))
    }

    /// Graph isomorphism of the structures under `a` and `b`, respecting
    /// sorts, feature names and reentrancy.
    pub fn isomorphic(&self, a: NodeRef, b: NodeRef) -> bool {
        self.isomorphic_to(a, self, b)
    }

    /// Like [`isomorphic`](Self::isomorphic), with `b` living in `other`.
    /// Both stores must share the same sort lattice.
    pub fn isomorphic_to(&self, a: NodeRef, other: &TermStore, b: NodeRef) -> bool {
        let mut fwd: HashMap<NodeRef, NodeRef> = HashMap::new();
        let mut bwd: HashMap<NodeRef, NodeRef> = HashMap::new();
        let mut stack = vec![(self.deref(a), other.deref(b))];
        while let Some((x, y)) = stack.pop() {
            match (fwd.get(&x), bwd.get(&y)) {
                (Some(&y2), Some(&x2)) if y2 == y && x2 == x => continue,
                (None, None) => {}
                _ => return false,
            }
            fwd.insert(x, y);
            bwd.insert(y, x);
            let nx = &self.nodes[x.index()];
            let ny = &other.nodes[y.index()];
            if self.lattice.name(nx.sort) != other.lattice.name(ny.sort) || nx.features.len() != ny.features.len() {
                return false;
            }
            for ((fx, &vx), (fy, &vy)) in nx.features.iter().zip(&ny.features) {
                if fx != fy {
                    return false;
                }
                stack.push((self.deref(vx), other.deref(vy)));
            }
        }
        true
    }
}
