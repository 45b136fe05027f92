//! Sort-guarded active constraints.
//!
//! A [`SortRule`] applies to every node whose sort is at or below its guard.
//! Rules fire when a node is created at such a sort or refined down to it,
//! at most once per node (fired sets are unioned when nodes merge). The
//! propagation queue is FIFO and is drained to a fixpoint before the
//! operation that triggered it returns.
//!
//! `append` residuates: while its first argument's spine is not fully
//! known it sleeps on the known prefix and is re-examined whenever one of
//! the watched nodes changes.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::lattice::{Feature, SortId, SortLattice};
use crate::store::{Failure, Monitor, NodeRef, TermStore};
use crate::template::{Tag, TermTemplate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(pub(crate) u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SuspId(pub(crate) u32);

impl fmt::Display for SuspId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// A path rooted at the rule variable or a tag: `P.synsem.loc.cat.head`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathExpr {
    pub root: Tag,
    pub features: Vec<Feature>,
}

impl PathExpr {
    pub fn new(root: &str, features: &[&str]) -> Self {
        PathExpr {
            root: Arc::from(root),
            features: features.iter().map(|f| Feature::new(f)).collect(),
        }
    }

    pub fn is_bare(&self) -> bool {
        self.features.is_empty()
    }
}

impl fmt::Display for PathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.root)?;
        for feat in &self.features {
            write!(f, ".{feat}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EqRhs {
    Path(PathExpr),
    Term(TermTemplate),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Goal {
    /// `lhs = rhs`
    PathEq { lhs: PathExpr, rhs: EqRhs },
    /// `path :< sort`
    SortRestrict { path: PathExpr, sort: SortId },
    /// `result = append(left, right)`
    AppendCall {
        result: PathExpr,
        left: PathExpr,
        right: PathExpr,
    },
    /// At most the `allowed` features may appear on the node at `path`.
    ClosedFeatures { path: PathExpr, allowed: Vec<Feature> },
}

impl Goal {
    pub fn render(&self, lattice: &SortLattice) -> String {
        match self {
            Goal::PathEq { lhs, rhs: EqRhs::Path(p) } => format!("{lhs} = {p}"),
            Goal::PathEq { lhs, rhs: EqRhs::Term(t) } => format!("{lhs} = {}", t.render(lattice)),
            Goal::SortRestrict { path, sort } => format!("{path} :< {}", lattice.name(*sort)),
            Goal::AppendCall { result, left, right } => format!("{result} = append({left},{right})"),
            Goal::ClosedFeatures { path, allowed } => {
                let names: Vec<&str> = allowed.iter().map(Feature::as_str).collect();
                format!("lmember(features({path}), [{}])", names.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortRule {
    pub name: String,
    pub guard: SortId,
    pub var: Tag,
    pub body: Vec<Goal>,
}

impl SortRule {
    pub fn render(&self, lattice: &SortLattice) -> String {
        let goals: Vec<String> = self.body.iter().map(|g| g.render(lattice)).collect();
        format!(":: {}:{} | {}.", self.var, lattice.name(self.guard), goals.join(", "))
    }

    /// Checks that every tag is bound before it is read.
    pub fn validate(&self) -> Result<(), EngineError> {
        let mut bound: HashSet<Tag> = HashSet::from([self.var.clone()]);
        let unbound = |tag: &Tag| EngineError::UnboundTag {
            rule: self.name.clone(),
            tag: tag.to_string(),
        };
        let read = |p: &PathExpr, bound: &HashSet<Tag>| {
            if bound.contains(&p.root) {
                Ok(())
            } else {
                Err(unbound(&p.root))
            }
        };
        for goal in &self.body {
            match goal {
                Goal::PathEq { lhs, rhs } => {
                    if !lhs.is_bare() {
                        read(lhs, &bound)?;
                    }
                    match rhs {
                        EqRhs::Path(p) => {
                            if !p.is_bare() {
                                read(p, &bound)?;
                            }
                            bound.insert(p.root.clone());
                        }
                        EqRhs::Term(t) => {
                            let mut tags = Vec::new();
                            t.collect_tags(&mut tags);
                            bound.extend(tags);
                        }
                    }
                    bound.insert(lhs.root.clone());
                }
                Goal::SortRestrict { path, .. } | Goal::ClosedFeatures { path, .. } => read(path, &bound)?,
                Goal::AppendCall { result, left, right } => {
                    read(left, &bound)?;
                    read(right, &bound)?;
                    if !result.is_bare() {
                        read(result, &bound)?;
                    }
                    bound.insert(result.root.clone());
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("rule `{rule}` reads tag `{tag}` before binding it")]
    UnboundTag { rule: String, tag: String },
}

/// Installed rules, indexed by the sorts they apply to.
#[derive(Clone, Debug)]
pub struct RuleSet {
    lattice: Arc<SortLattice>,
    rules: Vec<SortRule>,
    applicable: Vec<Vec<RuleId>>,
}

impl RuleSet {
    pub fn new(lattice: &Arc<SortLattice>) -> Self {
        RuleSet {
            lattice: lattice.clone(),
            rules: Vec::new(),
            applicable: vec![Vec::new(); lattice.len()],
        }
    }

    pub fn install(&mut self, rule: SortRule) -> Result<RuleId, EngineError> {
        rule.validate()?;
        let id = RuleId(self.rules.len() as u32);
        for s in self.lattice.sorts() {
            if s != SortId::BOTTOM && self.lattice.leq(s, rule.guard) {
                self.applicable[s.index()].push(id);
            }
        }
        self.rules.push(rule);
        Ok(id)
    }

    pub fn get(&self, id: RuleId) -> &SortRule {
        &self.rules[id.0 as usize]
    }

    pub fn rules(&self) -> &[SortRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rules whose guard is at or above `s`, in install order.
    pub fn applicable(&self, s: SortId) -> &[RuleId] {
        &self.applicable[s.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuspStatus {
    Sleeping,
    Done,
    Dead,
}

/// A residuated `append(list, tail) = result`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Suspension {
    pub result: NodeRef,
    pub list: NodeRef,
    pub tail: NodeRef,
    pub status: SuspStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AppendOutcome {
    Done,
    Suspended(SuspId),
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Task {
    Fire(NodeRef, RuleId),
    Wake(SuspId),
    CheckClosed(NodeRef),
}

enum Spine {
    /// Every cell up to an elist is known.
    Ready(Vec<NodeRef>),
    /// Known cells, the last one being the undetermined frontier.
    Blocked(Vec<NodeRef>),
}

impl TermStore {
    /// Installs `rule` for nodes created from now on.
    pub fn install_rule(&mut self, rule: SortRule) -> Result<RuleId, EngineError> {
        Arc::make_mut(&mut self.rules).install(rule)
    }

    /// Number of sleeping suspensions in the store.
    pub fn pending_suspensions(&self) -> usize {
        self.suspensions.iter().filter(|s| s.status == SuspStatus::Sleeping).count()
    }

    /// Sleeping suspensions whose arguments or result are reachable from `root`.
    pub fn pending_suspensions_under(&self, root: NodeRef) -> usize {
        let reach: HashSet<NodeRef> = self.reachable(root).into_iter().collect();
        self.suspensions
            .iter()
            .filter(|s| s.status == SuspStatus::Sleeping)
            .filter(|s| [s.result, s.list, s.tail].iter().any(|&n| reach.contains(&self.deref(n))))
            .count()
    }

    // ---- events ----

    fn enqueue_rules(&mut self, n: NodeRef) {
        let node = &self.nodes[n.index()];
        for &r in self.rules.applicable(node.sort) {
            if node.fired.binary_search(&r).is_err() {
                self.queue.push_back(Task::Fire(n, r));
            }
        }
    }

    fn wake_all(&mut self, n: NodeRef) {
        for i in 0..self.nodes[n.index()].suspensions.len() {
            let s = self.nodes[n.index()].suspensions[i];
            if self.suspensions[s.0 as usize].status == SuspStatus::Sleeping {
                self.queue.push_back(Task::Wake(s));
            }
        }
    }

    pub(crate) fn on_created(&mut self, n: NodeRef) {
        self.enqueue_rules(n);
    }

    pub(crate) fn on_refined(&mut self, n: NodeRef) {
        self.enqueue_rules(n);
        self.wake_all(n);
    }

    pub(crate) fn on_feature_added(&mut self, n: NodeRef) {
        if !self.nodes[n.index()].monitors.is_empty() {
            self.queue.push_back(Task::CheckClosed(n));
        }
        self.wake_all(n);
    }

    pub(crate) fn on_merged(&mut self, n: NodeRef, changed: bool) {
        self.enqueue_rules(n);
        if changed && !self.nodes[n.index()].monitors.is_empty() {
            self.queue.push_back(Task::CheckClosed(n));
        }
        self.wake_all(n);
    }

    /// Drains the propagation queue unless a drain is already running
    /// further up the stack.
    pub(crate) fn propagate(&mut self) -> Result<(), Failure> {
        if self.propagating || self.deferred > 0 || self.queue.is_empty() {
            return Ok(());
        }
        self.propagating = true;
        self.firings = 0;
        let r = self.drain();
        self.propagating = false;
        if r.is_err() {
            self.queue.clear();
        }
        r
    }

    fn drain(&mut self) -> Result<(), Failure> {
        while let Some(task) = self.queue.pop_front() {
            match task {
                Task::Fire(n, r) => {
                    let n = self.deref(n);
                    if self.nodes[n.index()].fired.binary_search(&r).is_ok() {
                        continue;
                    }
                    self.firings += 1;
                    if self.firings > self.budget {
                        return Err(Failure::BudgetExceeded(self.budget));
                    }
                    self.fire_rule(n, r)?;
                }
                Task::Wake(s) => {
                    if self.suspensions[s.0 as usize].status == SuspStatus::Sleeping {
                        self.stats.wakes += 1;
                        if self.tracing() {
                            self.emit(format!("WAKE id={s}"));
                        }
                        self.resume_append(s)?;
                    }
                }
                Task::CheckClosed(n) => self.check_closed(n)?,
            }
        }
        Ok(())
    }

    /// Marks `r` fired on `n`, then runs its body.
    pub fn fire_rule(&mut self, n: NodeRef, r: RuleId) -> Result<(), Failure> {
        let n = self.deref(n);
        self.mark_fired(n, r);
        let rules = Arc::clone(&self.rules);
        self.run_body(n, rules.get(r), Some(r))?;
        self.propagate()
    }

    /// Runs `rule`'s body on `n` as a one-off check, whether or not the
    /// rule is installed. Does not touch fired sets.
    pub fn run_rule(&mut self, n: NodeRef, rule: &SortRule) -> Result<(), Failure> {
        let n = self.deref(n);
        self.run_body(n, rule, None)?;
        self.propagate()
    }

    fn run_body(&mut self, n: NodeRef, rule: &SortRule, id: Option<RuleId>) -> Result<(), Failure> {
        self.stats.rules_fired += 1;
        if self.tracing() {
            self.emit(format!("FIRE rule={} node=#{}", rule.name, n.index()));
        }
        let mut env: HashMap<Tag, NodeRef> = HashMap::from([(rule.var.clone(), n)]);
        for goal in &rule.body {
            if let Err(e) = self.exec_goal(goal, &mut env, id) {
                if self.tracing() {
                    let g = goal.render(&self.lattice);
                    self.emit(format!("FAIL goal={g}"));
                }
                return Err(e);
            }
        }
        Ok(())
    }

    fn eval_path(&mut self, p: &PathExpr, env: &HashMap<Tag, NodeRef>) -> Result<Option<NodeRef>, Failure> {
        match env.get(&p.root) {
            Some(&root) => self.resolve_path(root, &p.features, true),
            None => Ok(None),
        }
    }

    fn exec_goal(&mut self, goal: &Goal, env: &mut HashMap<Tag, NodeRef>, id: Option<RuleId>) -> Result<(), Failure> {
        match goal {
            Goal::PathEq { lhs, rhs } => {
                let left = self.eval_path(lhs, env)?;
                let right = match rhs {
                    EqRhs::Path(p) => self.eval_path(p, env)?,
                    EqRhs::Term(t) => Some(self.instantiate(t, env)?),
                };
                match (left, right) {
                    (Some(a), Some(b)) => self.unify(a, b)?,
                    (Some(a), None) => {
                        if let EqRhs::Path(p) = rhs {
                            env.insert(p.root.clone(), a);
                        }
                    }
                    (None, Some(b)) => {
                        env.insert(lhs.root.clone(), b);
                    }
                    (None, None) => {
                        let fresh = self.new_node(SortId::TOP)?;
                        env.insert(lhs.root.clone(), fresh);
                        if let EqRhs::Path(p) = rhs {
                            env.insert(p.root.clone(), fresh);
                        }
                    }
                }
            }
            Goal::SortRestrict { path, sort } => {
                let n = self.eval_path(path, env)?.expect("validated rule");
                self.restrict_sort(n, *sort)?;
            }
            Goal::AppendCall { result, left, right } => {
                let a = self.eval_path(left, env)?.expect("validated rule");
                let b = self.eval_path(right, env)?.expect("validated rule");
                let r = match self.eval_path(result, env)? {
                    Some(r) => r,
                    None => {
                        let fresh = self.new_node(SortId::TOP)?;
                        env.insert(result.root.clone(), fresh);
                        fresh
                    }
                };
                self.builtin_append(r, a, b)?;
            }
            Goal::ClosedFeatures { path, allowed } => {
                let n = self.eval_path(path, env)?.expect("validated rule");
                let n = self.deref(n);
                self.attach_monitor(
                    n,
                    Monitor {
                        rule: id,
                        allowed: allowed.clone().into(),
                    },
                );
                self.check_closed(n)?;
            }
        }
        Ok(())
    }

    fn check_closed(&mut self, n: NodeRef) -> Result<(), Failure> {
        let n = self.deref(n);
        let node = &self.nodes[n.index()];
        for m in &node.monitors {
            if let Some(f) = node.features.keys().find(|f| !m.allowed.contains(f)) {
                return Err(Failure::ClosedFeature {
                    sort: self.lattice.name(node.sort).to_string(),
                    feature: f.to_string(),
                });
            }
        }
        Ok(())
    }

    fn list_sort_check(&self, n: NodeRef) -> Result<(), Failure> {
        let s = self.sort_of(n);
        let ok = match self.lists {
            Some(l) => {
                self.lattice.glb(s, l.elist) != SortId::BOTTOM || self.lattice.glb(s, l.nelist) != SortId::BOTTOM
            }
            None => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Failure::NotAList {
                sort: self.lattice.name(s).to_string(),
            })
        }
    }

    fn spine(&self, list: NodeRef) -> Result<Spine, Failure> {
        let mut cells = Vec::new();
        let mut seen = HashSet::new();
        let mut cur = self.deref(list);
        let rest = Feature::new("rest");
        loop {
            self.list_sort_check(cur)?;
            let lists = self.lists.expect("checked above");
            let s = self.sort_of(cur);
            if !seen.insert(cur) {
                // cyclic spine never becomes determined
                return Ok(Spine::Blocked(cells));
            }
            if self.lattice.leq(s, lists.elist) {
                return Ok(Spine::Ready(cells));
            }
            cells.push(cur);
            if !self.lattice.leq(s, lists.nelist) {
                return Ok(Spine::Blocked(cells));
            }
            match self.feature(cur, &rest) {
                Some(next) => cur = next,
                None => return Ok(Spine::Blocked(cells)),
            }
        }
    }

    /// `result = append(list, tail)`, residuating while `list` is not a
    /// determined list.
    pub fn builtin_append(&mut self, result: NodeRef, list: NodeRef, tail: NodeRef) -> Result<AppendOutcome, Failure> {
        match self.spine(list)? {
            Spine::Ready(cells) => {
                self.concat(result, &cells, tail)?;
                Ok(AppendOutcome::Done)
            }
            Spine::Blocked(cells) => {
                let id = self.push_suspension(Suspension {
                    result,
                    list,
                    tail,
                    status: SuspStatus::Sleeping,
                });
                for c in cells {
                    self.attach_suspension(c, id);
                }
                self.stats.suspensions_created += 1;
                if self.tracing() {
                    self.emit(format!("SUSPEND append id={id}"));
                }
                Ok(AppendOutcome::Suspended(id))
            }
        }
    }

    fn resume_append(&mut self, id: SuspId) -> Result<(), Failure> {
        let s = self.suspensions[id.0 as usize].clone();
        let spine = match self.spine(s.list) {
            Ok(sp) => sp,
            Err(e) => {
                self.set_susp_status(id, SuspStatus::Dead);
                return Err(e);
            }
        };
        match spine {
            Spine::Ready(cells) => {
                self.set_susp_status(id, SuspStatus::Done);
                if let Err(e) = self.concat(s.result, &cells, s.tail) {
                    self.set_susp_status(id, SuspStatus::Dead);
                    if self.tracing() {
                        let line = format!(
                            "FAIL goal=append(#{},#{}) = #{}",
                            self.deref(s.list).index(),
                            self.deref(s.tail).index(),
                            self.deref(s.result).index()
                        );
                        self.emit(line);
                    }
                    return Err(e);
                }
            }
            Spine::Blocked(cells) => {
                for c in cells {
                    self.attach_suspension(c, id);
                }
            }
        }
        Ok(())
    }

    /// Unifies `result` with a fresh spine over `cells`' elements ending in `tail`.
    fn concat(&mut self, result: NodeRef, cells: &[NodeRef], tail: NodeRef) -> Result<(), Failure> {
        let lists = match self.lists {
            Some(l) => l,
            None => return self.unify(result, tail),
        };
        let first = Feature::new("first");
        let rest = Feature::new("rest");
        self.deferred += 1;
        let built = (|| {
            let mut acc = tail;
            for &c in cells.iter().rev() {
                let elem = self.resolve_path(c, std::slice::from_ref(&first), true)?.expect("created");
                let cell = self.new_node(lists.nelist)?;
                self.put_feature(cell, &first, elem)?;
                self.put_feature(cell, &rest, acc)?;
                acc = cell;
            }
            self.unify(result, acc)
        })();
        self.deferred -= 1;
        built?;
        self.propagate()
    }
}
