//! The `.ftg` grammar language.
//!
//! A grammar file is a sequence of statements, each ending in `.`:
//!
//! ```text
//! lex <| sign.                                  % subsort
//! substantive := {noun;verb;adj;prep;reltvzr}.  % partition
//! approp category (head => substantive).        % appropriateness
//! closed category [head, valence, marking].     % closed features
//! :: C:category | C.head :< substantive.        % active constraint
//! word "john" : lex(...).                       % lexical entry
//! schema head_subject : phrase(...) dtrs [dtrs.subj-dtr.first, dtrs.head-dtr].
//! start phrase.
//! ```
//!
//! Loading reports every error with its line and column rather than
//! stopping at the first one.

mod diag;
mod lexer;
mod parser;
pub mod render;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use unicode_normalization::UnicodeNormalization;

pub use diag::{Diagnostic, Severity, Span};
pub use render::{export_json, render_avm, render_avm_pretty};

use crate::engine::{EngineError, EqRhs, Goal, PathExpr, RuleSet, SortRule};
use crate::lattice::{Feature, LatticeBuilder, LatticeError, SortId, SortLattice};
use crate::template::{ListSorts, Tag, TermTemplate};
use parser::{Name, Parser, RawGoal, RawPath, RawRhs, RawTerm, Stmt};

/// An ID schema: a mother template and the paths of its daughters in
/// surface order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub name: String,
    pub mother: TermTemplate,
    pub daughters: Vec<Vec<Feature>>,
}

impl Schema {
    pub fn arity(&self) -> usize {
        self.daughters.len()
    }
}

#[derive(Clone, Debug)]
pub struct Grammar {
    pub lattice: Arc<SortLattice>,
    pub rules: Vec<SortRule>,
    /// Normalized surface form to its entries, in file order.
    pub lexicon: BTreeMap<String, Vec<TermTemplate>>,
    pub schemata: Vec<Schema>,
    pub start: Option<SortId>,
    pub warnings: Vec<Diagnostic>,
    rule_set: Arc<RuleSet>,
}

impl Grammar {
    /// All rules, installed, ready to share between stores.
    pub fn rule_set(&self) -> Arc<RuleSet> {
        self.rule_set.clone()
    }

    pub fn sort(&self, name: &str) -> Option<SortId> {
        self.lattice.lookup(name)
    }

    pub fn entries(&self, word: &str) -> &[TermTemplate] {
        self.lexicon.get(&normalize_word(word)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn lexeme_count(&self) -> usize {
        self.lexicon.values().map(Vec::len).sum()
    }
}

/// NFC-normalized, lowercased surface form.
pub fn normalize_word(w: &str) -> String {
    w.nfc().collect::<String>().to_lowercase().nfc().collect()
}

fn eof_span(src: &str) -> Span {
    let line = src.lines().count().max(1);
    let col = src.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    Span { line, col }
}

fn sorted(mut diags: Vec<Diagnostic>) -> Vec<Diagnostic> {
    diags.sort_by_key(|d| d.span);
    diags
}

/// Parses and checks a grammar. On failure, returns every error found.
pub fn load_grammar(src: &str) -> Result<Grammar, Vec<Diagnostic>> {
    let (toks, mut errs) = lexer::tokenize(src);
    let (stmts, parse_errs) = Parser::new(&toks, eof_span(src)).statements();
    errs.extend(parse_errs);

    let lattice = match build_lattice(&stmts, &mut errs) {
        Some(l) => Arc::new(l),
        None => return Err(sorted(errs)),
    };
    let mut cx = Resolver {
        lattice: &lattice,
        lists: ListSorts::from_lattice(&lattice),
        errs: Vec::new(),
        warnings: Vec::new(),
    };

    let mut rules = Vec::new();
    let mut rule_spans = Vec::new();
    let mut per_guard: HashMap<SortId, usize> = HashMap::new();
    let mut lexicon: BTreeMap<String, Vec<TermTemplate>> = BTreeMap::new();
    let mut schemata = Vec::new();
    let mut start = None;

    let mut name_rule = |guard: SortId, lattice: &SortLattice| {
        let k = per_guard.entry(guard).or_default();
        *k += 1;
        format!("{}_{}", lattice.name(guard), k)
    };

    for stmt in &stmts {
        match stmt {
            Stmt::Rule {
                span,
                var,
                guard,
                guard_features,
                body,
            } => {
                let Some(g) = cx.sort(guard) else { continue };
                let rule = cx.rule(var, g, guard_features, body, name_rule(g, &lattice));
                if let Some(r) = rule {
                    rules.push(r);
                    rule_spans.push(*span);
                }
            }
            Stmt::Closed { sort, features } => {
                let Some(g) = cx.sort(sort) else { continue };
                rules.push(SortRule {
                    name: name_rule(g, &lattice),
                    guard: g,
                    var: Arc::from("C"),
                    body: vec![Goal::ClosedFeatures {
                        path: PathExpr::new("C", &[]),
                        allowed: features.iter().map(|f| Feature::new(&f.text)).collect(),
                    }],
                });
                rule_spans.push(sort.span);
            }
            Stmt::Word { surface, term, .. } => {
                if let Some(t) = cx.template(term) {
                    cx.warn_single_tags(&t, term.span());
                    lexicon.entry(normalize_word(surface)).or_default().push(t);
                }
            }
            Stmt::Schema {
                name,
                mother,
                dtrs,
                dtrs_span,
            } => {
                let Some(t) = cx.template(mother) else { continue };
                cx.warn_single_tags(&t, mother.span());
                let daughters: Vec<Vec<Feature>> = dtrs
                    .iter()
                    .map(|p| p.iter().map(|f| Feature::new(&f.text)).collect())
                    .collect();
                let mut ok = true;
                for (path, raw) in daughters.iter().zip(dtrs) {
                    if t.resolve(path).is_none() {
                        let shown: Vec<&str> = path.iter().map(Feature::as_str).collect();
                        cx.errs.push(Diagnostic::error(
                            raw[0].span,
                            format!("daughter path `{}` does not resolve in the mother of `{}`", shown.join("."), name.text),
                        ));
                        ok = false;
                    }
                }
                if daughters.is_empty() {
                    cx.errs.push(Diagnostic::error(*dtrs_span, "a schema needs at least one daughter"));
                    ok = false;
                }
                if ok {
                    schemata.push(Schema {
                        name: name.text.clone(),
                        mother: t,
                        daughters,
                    });
                }
            }
            Stmt::Start { sort } => {
                if start.is_some() {
                    cx.errs.push(Diagnostic::error(sort.span, "start sort declared twice"));
                } else if let Some(s) = cx.sort(sort) {
                    start = Some(s);
                }
            }
            Stmt::Subsort { .. } | Stmt::Partition { .. } | Stmt::Approp { .. } => {}
        }
    }

    let mut rule_set = RuleSet::new(&lattice);
    for (r, span) in rules.iter().zip(&rule_spans) {
        if let Err(EngineError::UnboundTag { tag, .. }) = rule_set.install(r.clone()) {
            cx.errs.push(Diagnostic::error(*span, format!("tag `{tag}` is read before it is bound")));
        }
    }

    errs.append(&mut cx.errs);
    if !errs.is_empty() {
        return Err(sorted(errs));
    }
    Ok(Grammar {
        lattice: lattice.clone(),
        rules,
        lexicon,
        schemata,
        start,
        warnings: cx.warnings,
        rule_set: Arc::new(rule_set),
    })
}

/// Parses a single term against an existing lattice.
pub fn parse_term(src: &str, lattice: &SortLattice) -> Result<TermTemplate, Vec<Diagnostic>> {
    let (toks, mut errs) = lexer::tokenize(src);
    if !errs.is_empty() {
        return Err(errs);
    }
    let mut p = Parser::new(&toks, eof_span(src));
    let raw = p.term().map_err(|e| vec![e])?;
    p.eat_end();
    if !p.at_end() {
        return Err(vec![p.error_here("end of term")]);
    }
    let mut cx = Resolver {
        lattice,
        lists: ListSorts::from_lattice(lattice),
        errs: Vec::new(),
        warnings: Vec::new(),
    };
    match cx.template(&raw) {
        Some(t) if cx.errs.is_empty() => Ok(t),
        _ => {
            errs.append(&mut cx.errs);
            Err(errs)
        }
    }
}

fn build_lattice(stmts: &[Stmt], errs: &mut Vec<Diagnostic>) -> Option<SortLattice> {
    let mut declared: HashSet<&str> = HashSet::from(["top"]);
    let mut first_seen: HashMap<&str, Span> = HashMap::new();
    for stmt in stmts {
        let names: Vec<&Name> = match stmt {
            Stmt::Subsort { child, parent } => vec![child, parent],
            Stmt::Partition { parent, children } => std::iter::once(parent).chain(children).collect(),
            Stmt::Approp { sort, .. } => vec![sort],
            Stmt::Closed { sort, .. } => vec![sort],
            _ => vec![],
        };
        for n in names {
            declared.insert(&n.text);
            first_seen.entry(&n.text).or_insert(n.span);
        }
    }

    let mut b = LatticeBuilder::new();
    for stmt in stmts {
        match stmt {
            Stmt::Subsort { child, parent } => b.declare_subsort(&child.text, &parent.text),
            Stmt::Partition { parent, children } => {
                let cs: Vec<&str> = children.iter().map(|c| c.text.as_str()).collect();
                if let Err(e) = b.declare_partition(&parent.text, &cs) {
                    errs.push(Diagnostic::error(parent.span, e.to_string()));
                }
            }
            Stmt::Approp { sort, decls } => {
                for (f, bound) in decls {
                    if declared.contains(bound.text.as_str()) {
                        b.declare_approp(&sort.text, &f.text, &bound.text);
                    } else {
                        errs.push(Diagnostic::error(bound.span, format!("unknown sort `{}`", bound.text)));
                    }
                }
            }
            Stmt::Closed { sort, .. } => b.declare_closed(&sort.text),
            Stmt::Rule { guard, body, var, .. } => {
                let closes_guard = body
                    .iter()
                    .any(|g| matches!(g, RawGoal::Closed { path, .. } if path.features.is_empty() && path.root.text == var.text));
                if closes_guard && declared.contains(guard.text.as_str()) {
                    b.declare_closed(&guard.text);
                }
            }
            _ => {}
        }
    }
    match b.finalize() {
        Ok(l) => Some(l),
        Err(lattice_errs) => {
            let at = |name: &str| first_seen.get(name).copied().unwrap_or(Span { line: 1, col: 1 });
            for e in lattice_errs {
                let span = match &e {
                    LatticeError::Cycle { path } => at(&path[0]),
                    LatticeError::AmbiguousGlb { left, .. } => at(left),
                    LatticeError::AppropriatenessConflict { sort, .. } => at(sort),
                    LatticeError::EmptyPartition { parent } => at(parent),
                    LatticeError::ReservedSort { name } => at(name),
                };
                errs.push(Diagnostic::error(span, e.to_string()));
            }
            None
        }
    }
}

struct Resolver<'a> {
    lattice: &'a SortLattice,
    lists: Option<ListSorts>,
    errs: Vec<Diagnostic>,
    warnings: Vec<Diagnostic>,
}

impl Resolver<'_> {
    fn sort(&mut self, n: &Name) -> Option<SortId> {
        match self.lattice.lookup(&n.text) {
            Some(s) if s != SortId::BOTTOM => Some(s),
            _ => {
                self.errs.push(Diagnostic::error(n.span, format!("unknown sort `{}`", n.text)));
                None
            }
        }
    }

    fn template(&mut self, t: &RawTerm) -> Option<TermTemplate> {
        let before = self.errs.len();
        let out = self.convert(t);
        (self.errs.len() == before).then_some(out)
    }

    fn convert(&mut self, t: &RawTerm) -> TermTemplate {
        match t {
            RawTerm::Node {
                tag, sort, features, ..
            } => {
                let sort = match sort {
                    Some(n) => self.sort(n).unwrap_or(SortId::TOP),
                    None => SortId::TOP,
                };
                TermTemplate {
                    tag: tag.as_ref().map(|n| Tag::from(n.text.as_str())),
                    sort,
                    features: features
                        .iter()
                        .map(|(f, v)| (Feature::new(&f.text), self.convert(v)))
                        .collect(),
                }
            }
            RawTerm::List { span, tag, items, tail } => {
                let Some(lists) = self.lists else {
                    self.errs.push(Diagnostic::error(
                        *span,
                        "list syntax needs the sorts `elist` and `nelist`",
                    ));
                    return TermTemplate::sort(SortId::TOP);
                };
                let items = items.iter().map(|i| self.convert(i)).collect();
                let tail = tail.as_ref().map(|t| self.convert(t));
                let mut out = TermTemplate::list(items, tail, lists);
                if let Some(n) = tag {
                    out.tag = Some(Tag::from(n.text.as_str()));
                }
                out
            }
        }
    }

    fn warn_single_tags(&mut self, t: &TermTemplate, span: Span) {
        let mut once: Vec<Tag> = t
            .tag_counts()
            .into_iter()
            .filter(|(_, c)| *c == 1)
            .map(|(t, _)| t)
            .collect();
        once.sort();
        for tag in once {
            self.warnings
                .push(Diagnostic::warning(span, format!("tag `{tag}` is used only once")));
        }
    }

    fn path(&self, p: &RawPath) -> PathExpr {
        PathExpr {
            root: Tag::from(p.root.text.as_str()),
            features: p.features.iter().map(|f| Feature::new(&f.text)).collect(),
        }
    }

    fn rule(
        &mut self,
        var: &Name,
        guard: SortId,
        guard_features: &[(Name, RawTerm)],
        body: &[RawGoal],
        name: String,
    ) -> Option<SortRule> {
        let before = self.errs.len();
        let mut goals = Vec::new();
        for (f, t) in guard_features {
            goals.push(Goal::PathEq {
                lhs: PathExpr {
                    root: Tag::from(var.text.as_str()),
                    features: vec![Feature::new(&f.text)],
                },
                rhs: EqRhs::Term(self.convert(t)),
            });
        }
        for g in body {
            goals.push(match g {
                RawGoal::Eq { lhs, rhs } => match rhs {
                    RawRhs::Path(p) => Goal::PathEq {
                        lhs: self.path(lhs),
                        rhs: EqRhs::Path(self.path(p)),
                    },
                    RawRhs::Term(t) => Goal::PathEq {
                        lhs: self.path(lhs),
                        rhs: EqRhs::Term(self.convert(t)),
                    },
                    RawRhs::Append(a, b) => Goal::AppendCall {
                        result: self.path(lhs),
                        left: self.path(a),
                        right: self.path(b),
                    },
                },
                RawGoal::Restrict { path, sort } => Goal::SortRestrict {
                    path: self.path(path),
                    sort: self.sort(sort).unwrap_or(SortId::TOP),
                },
                RawGoal::Closed { path, features } => Goal::ClosedFeatures {
                    path: self.path(path),
                    allowed: features.iter().map(|f| Feature::new(&f.text)).collect(),
                },
            });
        }
        let rule = SortRule {
            name,
            guard,
            var: Tag::from(var.text.as_str()),
            body: goals,
        };
        let mut counts: HashMap<Tag, usize> = HashMap::new();
        fn bump(counts: &mut HashMap<Tag, usize>, p: &PathExpr) {
            *counts.entry(p.root.clone()).or_default() += 1;
        }
        for g in &rule.body {
            match g {
                Goal::PathEq { lhs, rhs } => {
                    bump(&mut counts, lhs);
                    match rhs {
                        EqRhs::Path(p) => bump(&mut counts, p),
                        EqRhs::Term(t) => t.count_tags(&mut counts),
                    }
                }
                Goal::SortRestrict { path, .. } | Goal::ClosedFeatures { path, .. } => bump(&mut counts, path),
                Goal::AppendCall { result, left, right } => {
                    bump(&mut counts, result);
                    bump(&mut counts, left);
                    bump(&mut counts, right);
                }
            }
        }
        let mut once: Vec<&Tag> = counts
            .iter()
            .filter(|(t, c)| **c == 1 && **t != rule.var)
            .map(|(t, _)| t)
            .collect();
        once.sort();
        for t in once {
            self.warnings
                .push(Diagnostic::warning(var.span, format!("tag `{t}` is used only once")));
        }
        (self.errs.len() == before).then_some(rule)
    }
}
