//! The sort hierarchy: subsort declarations, greatest lower bounds and
//! feature appropriateness.
//!
//! Sorts are declared through a [`LatticeBuilder`] and frozen by
//! [`LatticeBuilder::finalize`], which computes the reflexive-transitive
//! closure, rejects cycles and hierarchies where some pair of sorts has more
//! than one maximal common lower bound, and resolves inherited
//! appropriateness. A finalized [`SortLattice`] is immutable.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use thiserror::Error;

/// Sorts up to this count get a dense precomputed GLB table.
const DENSE_GLB_LIMIT: usize = 512;

/// Dense index of a sort in its lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SortId(pub(crate) u32);

impl SortId {
    /// The most general sort; every sort is below it.
    pub const TOP: SortId = SortId(0);
    /// Failure. Never stored on a live node.
    pub const BOTTOM: SortId = SortId(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A feature (attribute) name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Feature(Arc<str>);

impl Feature {
    pub fn new(name: &str) -> Self {
        Feature(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Feature {
    fn from(s: &str) -> Self {
        Feature::new(s)
    }
}

impl fmt::Debug for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("subsort cycle: {}", path.join(" <| "))]
    Cycle { path: Vec<String> },
    #[error("sorts `{left}` and `{right}` have no unique greatest lower bound (candidates: {})", candidates.join(", "))]
    AmbiguousGlb {
        left: String,
        right: String,
        candidates: Vec<String>,
    },
    #[error("appropriateness of feature `{feature}` on sort `{sort}` conflicts with an inherited bound")]
    AppropriatenessConflict { sort: String, feature: String },
    #[error("partition of `{parent}` has no children")]
    EmptyPartition { parent: String },
    #[error("sort `{name}` is built in and cannot be declared below another sort")]
    ReservedSort { name: String },
}

#[derive(Clone, Debug, Default)]
struct BitSet(Vec<u64>);

impl BitSet {
    fn with_len(n: usize) -> Self {
        BitSet(vec![0; n.div_ceil(64)])
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= *b;
        }
    }

    fn intersection(&self, other: &BitSet) -> BitSet {
        BitSet(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn is_subset(&self, other: &BitSet) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits & (1 << b) != 0).map(move |b| w * 64 + b)
        })
    }
}

/// Mutable sort declarations, before closure.
#[derive(Clone, Debug)]
pub struct LatticeBuilder {
    names: Vec<String>,
    index: HashMap<String, SortId>,
    parents: Vec<BTreeSet<SortId>>,
    approp: Vec<BTreeMap<Feature, SortId>>,
    closed: Vec<bool>,
    partitions: Vec<(SortId, Vec<SortId>)>,
    reserved: Vec<String>,
}

impl Default for LatticeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl LatticeBuilder {
    pub fn new() -> Self {
        let mut b = LatticeBuilder {
            names: Vec::new(),
            index: HashMap::new(),
            parents: Vec::new(),
            approp: Vec::new(),
            closed: Vec::new(),
            partitions: Vec::new(),
            reserved: Vec::new(),
        };
        b.intern("top");
        b.intern("⊥");
        b
    }

    /// Returns the id for `name`, registering it on first mention.
    pub fn intern(&mut self, name: &str) -> SortId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = SortId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.parents.push(BTreeSet::new());
        self.approp.push(BTreeMap::new());
        self.closed.push(false);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<SortId> {
        self.index.get(name).copied()
    }

    pub fn declare_subsort(&mut self, child: &str, parent: &str) {
        let c = self.intern(child);
        let p = self.intern(parent);
        if c == SortId::TOP || c == SortId::BOTTOM || p == SortId::BOTTOM {
            self.reserved.push(if c == SortId::TOP || c == SortId::BOTTOM {
                child.to_string()
            } else {
                parent.to_string()
            });
            return;
        }
        if p != SortId::TOP {
            self.parents[c.index()].insert(p);
        }
    }

    pub fn declare_partition(&mut self, parent: &str, children: &[&str]) -> Result<(), LatticeError> {
        if children.is_empty() {
            return Err(LatticeError::EmptyPartition {
                parent: parent.to_string(),
            });
        }
        for c in children {
            self.declare_subsort(c, parent);
        }
        let p = self.intern(parent);
        let cs = children.iter().map(|c| self.intern(c)).collect();
        self.partitions.push((p, cs));
        Ok(())
    }

    /// Declares `feature` appropriate for `sort` with value bound `bound`.
    pub fn declare_approp(&mut self, sort: &str, feature: &str, bound: &str) {
        let s = self.intern(sort);
        let b = self.intern(bound);
        self.approp[s.index()].insert(Feature::new(feature), b);
    }

    pub fn declare_closed(&mut self, sort: &str) {
        let s = self.intern(sort);
        self.closed[s.index()] = true;
    }

    pub fn finalize(self) -> Result<SortLattice, Vec<LatticeError>> {
        let n = self.names.len();
        let mut diags: Vec<LatticeError> = self
            .reserved
            .iter()
            .map(|name| LatticeError::ReservedSort { name: name.clone() })
            .collect();

        let order = match self.topo_order() {
            Ok(order) => order,
            Err(cycles) => {
                diags.extend(cycles);
                return Err(diags);
            }
        };

        // upsets, parents before children
        let mut up = vec![BitSet::with_len(n); n];
        up[SortId::TOP.index()].insert(SortId::TOP.index());
        for &s in &order {
            let mut set = BitSet::with_len(n);
            set.insert(s.index());
            set.insert(SortId::TOP.index());
            for p in &self.parents[s.index()] {
                let pu = up[p.index()].clone();
                set.union_with(&pu);
            }
            up[s.index()] = set;
        }
        let mut bottom_up = BitSet::with_len(n);
        for i in 0..n {
            bottom_up.insert(i);
        }
        up[SortId::BOTTOM.index()] = bottom_up;

        let mut down = vec![BitSet::with_len(n); n];
        for (s, ups) in up.iter().enumerate() {
            for t in ups.iter() {
                down[t].insert(s);
            }
        }

        let mut lattice = SortLattice {
            names: self.names,
            index: self.index,
            parents: self.parents,
            up,
            down,
            glb_table: None,
            glb_memo: Mutex::new(HashMap::new()),
            approp: vec![BTreeMap::new(); n],
            declared_approp: self.approp,
            closed: vec![false; n],
            partitions: self.partitions,
        };

        // every pair must have a unique meet
        let mut table = if n <= DENSE_GLB_LIMIT {
            Some(vec![SortId::BOTTOM; n * n])
        } else {
            None
        };
        for a in 0..n {
            for b in a..n {
                match lattice.compute_glb(SortId(a as u32), SortId(b as u32)) {
                    Ok(g) => {
                        if let Some(t) = table.as_mut() {
                            t[a * n + b] = g;
                            t[b * n + a] = g;
                        }
                    }
                    Err(candidates) => diags.push(LatticeError::AmbiguousGlb {
                        left: lattice.names[a].clone(),
                        right: lattice.names[b].clone(),
                        candidates: candidates.iter().map(|c| lattice.names[c.index()].clone()).collect(),
                    }),
                }
            }
        }
        if !diags.is_empty() {
            return Err(diags);
        }
        lattice.glb_table = table;

        // inherited appropriateness, parents before children
        for &s in &order {
            let mut eff: BTreeMap<Feature, SortId> = BTreeMap::new();
            let mut conflict = BTreeSet::new();
            for p in &lattice.parents[s.index()] {
                for (f, &b) in &lattice.approp[p.index()] {
                    let merged = match eff.get(f) {
                        Some(&prev) => lattice.glb(prev, b),
                        None => b,
                    };
                    if merged == SortId::BOTTOM {
                        conflict.insert(f.clone());
                    }
                    eff.insert(f.clone(), merged);
                }
            }
            for (f, &b) in &lattice.declared_approp[s.index()] {
                if let Some(&inherited) = eff.get(f) {
                    if !lattice.leq(b, inherited) {
                        conflict.insert(f.clone());
                    }
                }
                eff.insert(f.clone(), b);
            }
            for f in conflict {
                diags.push(LatticeError::AppropriatenessConflict {
                    sort: lattice.names[s.index()].clone(),
                    feature: f.to_string(),
                });
            }
            lattice.approp[s.index()] = eff;
        }
        for s in 0..n {
            lattice.closed[s] = lattice.up[s].iter().any(|t| self.closed[t]) && s != SortId::BOTTOM.index();
        }
        if !diags.is_empty() {
            return Err(diags);
        }
        Ok(lattice)
    }

    /// Topological order of user sorts (parents first), or the cycles found.
    fn topo_order(&self) -> Result<Vec<SortId>, Vec<LatticeError>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let n = self.names.len();
        let mut mark = vec![Mark::New; n];
        let mut order = Vec::with_capacity(n);
        let mut cycles = Vec::new();
        for start in 2..n {
            if mark[start] != Mark::New {
                continue;
            }
            // iterative DFS over parent edges
            let mut stack: Vec<(usize, Vec<SortId>)> = vec![(start, self.parents[start].iter().copied().collect())];
            mark[start] = Mark::Active;
            while let Some((node, pending)) = stack.last_mut() {
                let node = *node;
                if let Some(p) = pending.pop() {
                    match mark[p.index()] {
                        Mark::New => {
                            mark[p.index()] = Mark::Active;
                            let ps = self.parents[p.index()].iter().copied().collect();
                            stack.push((p.index(), ps));
                        }
                        Mark::Active => {
                            let pos = stack.iter().position(|(s, _)| *s == p.index()).unwrap_or(0);
                            let mut path: Vec<String> =
                                stack[pos..].iter().map(|(s, _)| self.names[*s].clone()).collect();
                            path.push(self.names[p.index()].clone());
                            cycles.push(LatticeError::Cycle { path });
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[node] = Mark::Done;
                    order.push(SortId(node as u32));
                    stack.pop();
                }
            }
        }
        if cycles.is_empty() {
            Ok(order)
        } else {
            Err(cycles)
        }
    }
}

/// A finalized sort hierarchy. Immutable and shareable across threads.
#[derive(Debug)]
pub struct SortLattice {
    names: Vec<String>,
    index: HashMap<String, SortId>,
    parents: Vec<BTreeSet<SortId>>,
    up: Vec<BitSet>,
    down: Vec<BitSet>,
    glb_table: Option<Vec<SortId>>,
    glb_memo: Mutex<HashMap<(SortId, SortId), SortId>>,
    approp: Vec<BTreeMap<Feature, SortId>>,
    declared_approp: Vec<BTreeMap<Feature, SortId>>,
    closed: Vec<bool>,
    partitions: Vec<(SortId, Vec<SortId>)>,
}

impl SortLattice {
    /// Number of sorts, including the built-in top and bottom.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.len() <= 2
    }

    pub fn lookup(&self, name: &str) -> Option<SortId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, s: SortId) -> &str {
        &self.names[s.index()]
    }

    pub fn sorts(&self) -> impl Iterator<Item = SortId> {
        (0..self.names.len() as u32).map(SortId)
    }

    /// Immediately declared supersorts.
    pub fn parents(&self, s: SortId) -> impl Iterator<Item = SortId> + '_ {
        self.parents[s.index()].iter().copied()
    }

    pub fn partitions(&self) -> &[(SortId, Vec<SortId>)] {
        &self.partitions
    }

    pub fn leq(&self, s1: SortId, s2: SortId) -> bool {
        self.up[s1.index()].contains(s2.index())
    }

    pub fn glb(&self, s1: SortId, s2: SortId) -> SortId {
        if s1 == s2 {
            return s1;
        }
        if let Some(t) = &self.glb_table {
            return t[s1.index() * self.names.len() + s2.index()];
        }
        let key = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        if let Some(&g) = self.glb_memo.lock().unwrap().get(&key) {
            return g;
        }
        // finalize() already proved uniqueness
        let g = self.compute_glb(s1, s2).unwrap_or(SortId::BOTTOM);
        self.glb_memo.lock().unwrap().insert(key, g);
        g
    }

    /// The meet from the closure bitsets, or the competing maximal lower bounds.
    fn compute_glb(&self, a: SortId, b: SortId) -> Result<SortId, Vec<SortId>> {
        let mut common = self.down[a.index()].intersection(&self.down[b.index()]);
        common.0[0] &= !(1 << SortId::BOTTOM.index());
        let mut maxima = Vec::new();
        for c in common.iter() {
            // c is maximal iff nothing else in `common` lies above it
            let above = self.up[c].intersection(&common);
            if above.iter().all(|x| x == c) {
                maxima.push(SortId(c as u32));
            }
        }
        match maxima.len() {
            0 => Ok(SortId::BOTTOM),
            1 => {
                debug_assert!(common.is_subset(&self.down[maxima[0].index()]));
                Ok(maxima[0])
            }
            _ => Err(maxima),
        }
    }

    /// Inherited-and-overridden appropriateness for `s`.
    pub fn appropriate(&self, s: SortId) -> &BTreeMap<Feature, SortId> {
        &self.approp[s.index()]
    }

    pub fn approp_bound(&self, s: SortId, f: &Feature) -> Option<SortId> {
        self.approp[s.index()].get(f).copied()
    }

    /// True when `s` or one of its supersorts was declared closed.
    pub fn is_closed(&self, s: SortId) -> bool {
        self.closed[s.index()]
    }
}
