//! Bottom-up chart parsing over ID schemata.
//!
//! In [`Mode::Direct`] the grammar's `::` rules are installed in the store,
//! so every combination is checked against the principles as it is built.
//! In [`Mode::Gat`] the store has no rules; structures are built from the
//! schemata alone and complete candidates are filtered afterwards.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde_json::{json, Value};
use unicode_normalization::UnicodeNormalization;

use crate::engine::RuleSet;
use crate::grammar::{export_json, Grammar, Schema};
use crate::hpsg::{check_totally_well_typed, enforce_posthoc};
use crate::store::{Failure, NodeRef, TermStore};

/// Upper bound on edges per chart, a guard against runaway unary schemata.
pub const MAX_EDGES: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Direct,
    Gat,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Direct => "direct",
            Mode::Gat => "gat",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(Mode::Direct),
            "gat" => Ok(Mode::Gat),
            _ => Err(format!("unknown mode `{s}` (expected direct or gat)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseError {
    UnknownWord { token: String, position: usize },
    FiringBudgetExceeded(usize),
    EdgeLimit(usize),
    EmptyInput,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::UnknownWord { token, position } => {
                write!(f, "unknown word `{token}` at position {position}")
            }
            ParseError::FiringBudgetExceeded(n) => write!(f, "constraint firing budget of {n} exceeded"),
            ParseError::EdgeLimit(n) => write!(f, "chart exceeded {n} edges"),
            ParseError::EmptyInput => f.write_str("empty input"),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseMetrics {
    pub edges_created: usize,
    pub combinations_attempted: usize,
    pub unification_failures: usize,
    pub constraints_fired: usize,
    pub suspensions_created: usize,
    pub posthoc_rejections: usize,
}

impl ParseMetrics {
    pub fn to_json(&self) -> Value {
        json!({
            "edges_created": self.edges_created,
            "combinations_attempted": self.combinations_attempted,
            "unification_failures": self.unification_failures,
            "constraints_fired": self.constraints_fired,
            "suspensions_created": self.suspensions_created,
            "posthoc_rejections": self.posthoc_rejections,
        })
    }

    /// `(name, value)` pairs in a fixed order.
    pub fn fields(&self) -> [(&'static str, usize); 6] {
        [
            ("edges_created", self.edges_created),
            ("combinations_attempted", self.combinations_attempted),
            ("unification_failures", self.unification_failures),
            ("constraints_fired", self.constraints_fired),
            ("suspensions_created", self.suspensions_created),
            ("posthoc_rejections", self.posthoc_rejections),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    /// The `entry`-th lexicon entry for the token.
    Lexical { entry: usize },
    /// Index into the grammar's schemata.
    Schema(usize),
}

pub type EdgeId = usize;

#[derive(Clone, Debug)]
pub struct Edge {
    pub start: usize,
    pub end: usize,
    pub root: NodeRef,
    pub origin: Origin,
    pub daughters: Vec<EdgeId>,
}

#[derive(Clone, Debug)]
pub struct ParseOptions {
    pub mode: Mode,
    pub max_parses: usize,
    pub trace: bool,
    pub firing_budget: Option<usize>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            mode: Mode::Direct,
            max_parses: 16,
            trace: false,
            firing_budget: None,
        }
    }
}

pub struct ParseResult {
    pub mode: Mode,
    pub tokens: Vec<String>,
    /// Roots of the accepted parses, all living in `store`.
    pub parses: Vec<NodeRef>,
    pub metrics: ParseMetrics,
    pub edges: Vec<Edge>,
    pub store: TermStore,
    pub trace: Vec<String>,
}

impl ParseResult {
    /// `{"sentence", "mode", "parses": [graph...], "metrics"?}` with each
    /// parse in the [`export_json`] layout.
    pub fn to_json(&self, with_metrics: bool) -> Value {
        let mut obj = serde_json::Map::new();
        obj.insert("sentence".into(), Value::String(self.tokens.join(" ")));
        obj.insert("mode".into(), Value::String(self.mode.to_string()));
        obj.insert(
            "parses".into(),
            Value::Array(self.parses.iter().map(|&p| export_json(&self.store, p)).collect()),
        );
        if with_metrics {
            obj.insert("metrics".into(), self.metrics.to_json());
        }
        Value::Object(obj)
    }
}

impl fmt::Debug for ParseResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParseResult")
            .field("mode", &self.mode)
            .field("parses", &self.parses)
            .field("metrics", &self.metrics)
            .finish_non_exhaustive()
    }
}

/// NFC-normalizes, lowercases and splits on whitespace.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let norm: String = sentence.nfc().collect::<String>().to_lowercase().nfc().collect();
    norm.split_whitespace().map(str::to_string).collect()
}

/// A chart under construction. Edges share one store; each combination
/// runs inside its own checkpoint.
pub struct Chart<'g> {
    grammar: &'g Grammar,
    mode: Mode,
    pub store: TermStore,
    pub edges: Vec<Edge>,
    by_span: HashMap<(usize, usize), Vec<EdgeId>>,
    seen: HashMap<(usize, usize, usize, Vec<EdgeId>), EdgeId>,
    pub metrics: ParseMetrics,
}

impl<'g> Chart<'g> {
    pub fn new(grammar: &'g Grammar, mode: Mode) -> Self {
        let rules = match mode {
            Mode::Direct => grammar.rule_set(),
            Mode::Gat => Arc::new(RuleSet::new(&grammar.lattice)),
        };
        Chart {
            grammar,
            mode,
            store: TermStore::with_rules(grammar.lattice.clone(), rules),
            edges: Vec::new(),
            by_span: HashMap::new(),
            seen: HashMap::new(),
            metrics: ParseMetrics::default(),
        }
    }

    pub fn edges_at(&self, start: usize, end: usize) -> &[EdgeId] {
        self.by_span.get(&(start, end)).map(Vec::as_slice).unwrap_or(&[])
    }

    fn push_edge(&mut self, edge: Edge) -> Result<EdgeId, ParseError> {
        if self.edges.len() >= MAX_EDGES {
            return Err(ParseError::EdgeLimit(MAX_EDGES));
        }
        let id = self.edges.len();
        self.by_span.entry((edge.start, edge.end)).or_default().push(id);
        self.edges.push(edge);
        self.metrics.edges_created += 1;
        Ok(id)
    }

    /// Adds one edge per lexicon entry of `word` at `position`.
    pub fn add_word(&mut self, position: usize, word: &str) -> Result<Vec<EdgeId>, ParseError> {
        let entries = self.grammar.entries(word);
        if entries.is_empty() {
            return Err(ParseError::UnknownWord {
                token: word.to_string(),
                position,
            });
        }
        let mut out = Vec::new();
        for (k, t) in entries.iter().enumerate() {
            let cp = self.store.checkpoint();
            match self.store.instantiate(t, &mut HashMap::new()) {
                Ok(root) => {
                    self.store.commit(cp).expect("innermost checkpoint");
                    out.push(self.push_edge(Edge {
                        start: position,
                        end: position + 1,
                        root,
                        origin: Origin::Lexical { entry: k },
                        daughters: Vec::new(),
                    })?);
                }
                Err(e) => {
                    self.store.rollback(cp).expect("innermost checkpoint");
                    self.note_failure(e)?;
                }
            }
        }
        Ok(out)
    }

    fn note_failure(&mut self, e: Failure) -> Result<(), ParseError> {
        match e {
            Failure::BudgetExceeded(n) => Err(ParseError::FiringBudgetExceeded(n)),
            _ => {
                self.metrics.unification_failures += 1;
                Ok(())
            }
        }
    }

    fn build(&mut self, schema: &Schema, daughters: &[EdgeId]) -> Result<NodeRef, Failure> {
        let mother = self.store.instantiate(&schema.mother, &mut HashMap::new())?;
        for (path, &d) in schema.daughters.iter().zip(daughters) {
            let copy = self.store.copy_within(self.edges[d].root)?;
            let slot = self
                .store
                .resolve_path(mother, path, true)?
                .expect("daughter paths are created on demand");
            self.store.unify(slot, copy)?;
        }
        Ok(self.store.deref(mother))
    }

    /// Tries schema `schema` over `daughters`, which must be adjacent and in
    /// surface order. Returns the new (or previously built) edge, or `None`
    /// if unification or a constraint fails.
    pub fn combine(&mut self, schema: usize, daughters: &[EdgeId]) -> Result<Option<EdgeId>, ParseError> {
        let grammar = self.grammar;
        let sch = &grammar.schemata[schema];
        assert_eq!(sch.arity(), daughters.len(), "arity mismatch for schema {}", sch.name);
        for w in daughters.windows(2) {
            assert_eq!(self.edges[w[0]].end, self.edges[w[1]].start, "daughters must be adjacent");
        }
        let start = self.edges[daughters[0]].start;
        let end = self.edges[*daughters.last().unwrap()].end;
        let key = (start, end, schema, daughters.to_vec());
        if let Some(&id) = self.seen.get(&key) {
            return Ok(Some(id));
        }
        self.metrics.combinations_attempted += 1;
        let cp = self.store.checkpoint();
        match self.build(sch, daughters) {
            Ok(root) => {
                self.store.commit(cp).expect("innermost checkpoint");
                let id = self.push_edge(Edge {
                    start,
                    end,
                    root,
                    origin: Origin::Schema(schema),
                    daughters: daughters.to_vec(),
                })?;
                self.seen.insert(key, id);
                Ok(Some(id))
            }
            Err(e) => {
                self.store.rollback(cp).expect("innermost checkpoint");
                self.note_failure(e)?;
                Ok(None)
            }
        }
    }

    /// Every way to cut `[start, end)` into `k` nonempty adjacent spans.
    fn tilings(start: usize, end: usize, k: usize) -> Vec<Vec<(usize, usize)>> {
        if k == 1 {
            return vec![vec![(start, end)]];
        }
        let mut out = Vec::new();
        for mid in start + 1..end {
            if end - mid < k - 1 {
                break;
            }
            for mut rest in Self::tilings(mid, end, k - 1) {
                rest.insert(0, (start, mid));
                out.push(rest);
            }
        }
        out
    }

    fn product(lists: &[Vec<EdgeId>]) -> Vec<Vec<EdgeId>> {
        let mut out = vec![Vec::new()];
        for l in lists {
            let mut next = Vec::new();
            for prefix in &out {
                for &e in l {
                    let mut p = prefix.clone();
                    p.push(e);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }

    fn close_span(&mut self, start: usize, end: usize) -> Result<(), ParseError> {
        let grammar = self.grammar;
        for (si, schema) in grammar.schemata.iter().enumerate() {
            let k = schema.arity();
            if k < 2 || k > end - start {
                continue;
            }
            for tiling in Self::tilings(start, end, k) {
                let lists: Vec<Vec<EdgeId>> = tiling.iter().map(|&(a, b)| self.edges_at(a, b).to_vec()).collect();
                for dtrs in Self::product(&lists) {
                    self.combine(si, &dtrs)?;
                }
            }
        }
        let mut done = 0;
        while done < self.edges_at(start, end).len() {
            let e = self.edges_at(start, end)[done];
            done += 1;
            for (si, schema) in grammar.schemata.iter().enumerate() {
                if schema.arity() == 1 {
                    self.combine(si, &[e])?;
                }
            }
        }
        Ok(())
    }

    /// Fills the chart for `tokens` in order of increasing span width.
    pub fn fill(&mut self, tokens: &[String]) -> Result<(), ParseError> {
        let n = tokens.len();
        for (i, w) in tokens.iter().enumerate() {
            self.add_word(i, w)?;
        }
        for width in 1..=n {
            for start in 0..=n - width {
                self.close_span(start, start + width)?;
            }
        }
        Ok(())
    }

    /// Full-span edges that pass the final filter, in edge order. In GAT
    /// mode each candidate is copied and the rules are enforced on the copy;
    /// accepted copies stay in the store.
    pub fn collect(&mut self, n: usize, max_parses: usize) -> Result<Vec<NodeRef>, ParseError> {
        let lattice = self.grammar.lattice.clone();
        let mut out = Vec::new();
        for id in self.edges_at(0, n).to_vec() {
            let root = self.edges[id].root;
            if let Some(start) = self.grammar.start {
                if !lattice.leq(self.store.sort_of(root), start) {
                    continue;
                }
            }
            let accepted = match self.mode {
                Mode::Direct => {
                    let ok = self.store.pending_suspensions_under(root) == 0
                        && check_totally_well_typed(&self.store, root).is_empty();
                    ok.then_some(root)
                }
                Mode::Gat => {
                    let cp = self.store.checkpoint();
                    let checked = self
                        .store
                        .copy_within(root)
                        .and_then(|c| enforce_posthoc(&mut self.store, c, &self.grammar.rules).map(|_| c));
                    match checked {
                        Ok(c)
                            if self.store.pending_suspensions_under(c) == 0
                                && check_totally_well_typed(&self.store, c).is_empty() =>
                        {
                            self.store.commit(cp).expect("innermost checkpoint");
                            Some(self.store.deref(c))
                        }
                        Ok(_) => {
                            self.store.rollback(cp).expect("innermost checkpoint");
                            self.metrics.posthoc_rejections += 1;
                            None
                        }
                        Err(Failure::BudgetExceeded(b)) => {
                            self.store.rollback(cp).expect("innermost checkpoint");
                            return Err(ParseError::FiringBudgetExceeded(b));
                        }
                        Err(_) => {
                            self.store.rollback(cp).expect("innermost checkpoint");
                            self.metrics.posthoc_rejections += 1;
                            None
                        }
                    }
                }
            };
            if let Some(r) = accepted {
                if out.len() < max_parses {
                    out.push(r);
                }
            }
        }
        Ok(out)
    }

    fn finish_metrics(&mut self) {
        let stats = self.store.stats();
        self.metrics.constraints_fired = stats.rules_fired as usize;
        self.metrics.suspensions_created = stats.suspensions_created as usize;
    }
}

pub fn parse(tokens: &[String], g: &Grammar, mode: Mode, max_parses: usize) -> Result<ParseResult, ParseError> {
    parse_with(
        tokens,
        g,
        &ParseOptions {
            mode,
            max_parses,
            ..ParseOptions::default()
        },
    )
}

pub fn parse_with(tokens: &[String], g: &Grammar, opts: &ParseOptions) -> Result<ParseResult, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let mut chart = Chart::new(g, opts.mode);
    if let Some(b) = opts.firing_budget {
        chart.store.set_firing_budget(b);
    }
    if opts.trace {
        chart.store.enable_trace();
    }
    chart.fill(tokens)?;
    let parses = chart.collect(tokens.len(), opts.max_parses)?;
    chart.finish_metrics();
    let trace = chart.store.take_trace();
    Ok(ParseResult {
        mode: opts.mode,
        tokens: tokens.to_vec(),
        parses,
        metrics: chart.metrics,
        edges: chart.edges,
        store: chart.store,
        trace,
    })
}

pub struct Comparison {
    pub direct: ParseResult,
    pub gat: ParseResult,
    pub equal_parse_sets: bool,
}

/// Whether two parse lists match up one-to-one by isomorphism.
pub fn same_parse_sets(a: &ParseResult, b: &ParseResult) -> bool {
    if a.parses.len() != b.parses.len() {
        return false;
    }
    let mut used: HashSet<usize> = HashSet::new();
    a.parses.iter().all(|&x| {
        let hit = b
            .parses
            .iter()
            .enumerate()
            .find(|(j, &y)| !used.contains(j) && a.store.isomorphic_to(x, &b.store, y));
        match hit {
            Some((j, _)) => used.insert(j),
            None => false,
        }
    })
}

pub fn compare_modes(tokens: &[String], g: &Grammar, max_parses: usize) -> Result<Comparison, ParseError> {
    let direct = parse(tokens, g, Mode::Direct, max_parses)?;
    let gat = parse(tokens, g, Mode::Gat, max_parses)?;
    let equal_parse_sets = same_parse_sets(&direct, &gat);
    Ok(Comparison {
        direct,
        gat,
        equal_parse_sets,
    })
}
