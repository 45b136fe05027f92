//! The shipped HPSG sample grammar and the passive checkers that the
//! generate-and-test parsing mode relies on.

use std::collections::HashSet;
use std::fmt;

use crate::engine::SortRule;
use crate::grammar::{load_grammar, Grammar};
use crate::lattice::{Feature, SortId};
use crate::store::{Failure, NodeRef, TermStore};

/// Source of the sample grammar, also shipped as `grammars/hpsg_paper.ftg`.
pub const SAMPLE_GRAMMAR_SRC: &str = include_str!("../../../grammars/hpsg_paper.ftg");

pub fn sample_grammar() -> Grammar {
    match load_grammar(SAMPLE_GRAMMAR_SRC) {
        Ok(g) => g,
        Err(errs) => {
            let shown: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
            panic!("embedded sample grammar is invalid:\n{}", shown.join("\n"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MissingFeature {
        node: NodeRef,
        sort: SortId,
        feature: Feature,
    },
    UnexpectedFeature {
        node: NodeRef,
        sort: SortId,
        feature: Feature,
    },
    SortBound {
        node: NodeRef,
        feature: Feature,
        found: SortId,
        bound: SortId,
    },
}

impl Violation {
    pub fn describe(&self, store: &TermStore) -> String {
        let l = store.lattice();
        match self {
            Violation::MissingFeature { node, sort, feature } => {
                format!("#{}: {} lacks appropriate feature {feature}", node.index(), l.name(*sort))
            }
            Violation::UnexpectedFeature { node, sort, feature } => {
                format!("#{}: closed sort {} carries {feature}", node.index(), l.name(*sort))
            }
            Violation::SortBound {
                node,
                feature,
                found,
                bound,
            } => format!(
                "#{}: value of {feature} is {}, not below {}",
                node.index(),
                l.name(*found),
                l.name(*bound)
            ),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingFeature { feature, .. } => write!(f, "missing feature {feature}"),
            Violation::UnexpectedFeature { feature, .. } => write!(f, "unexpected feature {feature}"),
            Violation::SortBound { feature, .. } => write!(f, "value of {feature} exceeds its bound"),
        }
    }
}

/// Every violation of total well-typedness in the graph under `n`.
pub fn check_totally_well_typed(store: &TermStore, n: NodeRef) -> Vec<Violation> {
    let lattice = store.lattice();
    let mut out = Vec::new();
    for m in store.reachable(n) {
        let sort = store.sort_of(m);
        let approp = lattice.appropriate(sort);
        for (f, &bound) in approp {
            match store.feature(m, f) {
                None => out.push(Violation::MissingFeature {
                    node: m,
                    sort,
                    feature: f.clone(),
                }),
                Some(v) => {
                    let found = store.sort_of(v);
                    if !lattice.leq(found, bound) {
                        out.push(Violation::SortBound {
                            node: m,
                            feature: f.clone(),
                            found,
                            bound,
                        });
                    }
                }
            }
        }
        if lattice.is_closed(sort) {
            for (f, _) in store.features(m) {
                if !approp.contains_key(&f) {
                    out.push(Violation::UnexpectedFeature { node: m, sort, feature: f });
                }
            }
        }
    }
    out
}

/// Runs every applicable rule body on every node under `root`, repeating
/// until no node has an unvisited applicable rule. Effects stay in the
/// store; the caller decides whether to keep them.
pub fn enforce_posthoc(store: &mut TermStore, root: NodeRef, rules: &[SortRule]) -> Result<(), Failure> {
    let mut done: HashSet<(NodeRef, usize)> = HashSet::new();
    loop {
        let mut progressed = false;
        for m in store.reachable(root) {
            for (i, rule) in rules.iter().enumerate() {
                let m = store.deref(m);
                if !store.lattice().leq(store.sort_of(m), rule.guard) || !done.insert((m, i)) {
                    continue;
                }
                store.run_rule(m, rule)?;
                progressed = true;
            }
        }
        if !progressed {
            return Ok(());
        }
    }
}

/// Whether the structure under `n` satisfies every rule when the rules are
/// evaluated after the fact. The store is left as it was.
pub fn check_principles_posthoc(store: &mut TermStore, n: NodeRef, rules: &[SortRule]) -> bool {
    let cp = store.checkpoint();
    let ok = enforce_posthoc(store, n, rules).is_ok() && store.pending_suspensions_under(n) == 0;
    store.rollback(cp).expect("checkpoint opened above");
    ok
}
