//! Order-sorted typed feature structures with sort-guarded active
//! constraints, and a chart parser that runs HPSG-style grammars either with
//! the constraints active during construction or checked after the fact.

pub mod engine;
pub mod chart;
pub mod grammar;
pub mod hpsg;
pub mod lattice;
pub mod store;
pub mod template;

pub use grammar::{load_grammar, parse_term, Diagnostic, Grammar, Schema};
pub use chart::{compare_modes, parse, tokenize, Mode, ParseError, ParseMetrics, ParseResult};
pub use engine::{AppendOutcome, EngineError, EqRhs, Goal, PathExpr, RuleId, RuleSet, SortRule, SuspId};
pub use lattice::{Feature, LatticeBuilder, LatticeError, SortId, SortLattice};
pub use store::{Checkpoint, CheckpointError, EngineStats, Failure, NodeRef, TermStore};
pub use template::{ListSorts, Tag, TermTemplate};
