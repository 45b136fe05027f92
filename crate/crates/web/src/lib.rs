//! Browser bindings for the sample grammar. Every export takes strings and
//! returns a JSON string, so the page needs no generated TypeScript types
//! and the same functions can be exercised natively.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ftg::chart::{parse_with, tokenize, Mode, ParseOptions};
use ftg::grammar::{export_json, render_avm_pretty};
use ftg::hpsg::{sample_grammar, SAMPLE_GRAMMAR_SRC};
use ftg::{parse_term, Grammar, SortId, TermStore};

fn grammar() -> &'static Grammar {
    static G: OnceLock<Grammar> = OnceLock::new();
    G.get_or_init(sample_grammar)
}

fn diagnostics(errs: &[ftg::Diagnostic], src: &str, origin: &str) -> Value {
    json!({ "error": errs.iter().map(|e| e.render(src, origin)).collect::<String>() })
}

pub fn parse_json(sentence: &str, mode: &str, trace: bool) -> Value {
    let g = grammar();
    let mode: Mode = match mode.parse() {
        Ok(m) => m,
        Err(e) => return json!({ "error": e }),
    };
    let tokens = tokenize(sentence);
    if tokens.is_empty() {
        return json!({ "error": "empty sentence" });
    }
    let opts = ParseOptions {
        mode,
        trace,
        ..ParseOptions::default()
    };
    match parse_with(&tokens, g, &opts) {
        Ok(r) => json!({
            "sentence": tokens.join(" "),
            "mode": mode.to_string(),
            "parses": r.parses.iter().map(|&p| render_avm_pretty(&r.store, p)).collect::<Vec<_>>(),
            "metrics": r.metrics.to_json(),
            "trace": r.trace,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn glb_json(left: &str, right: &str) -> Value {
    let g = grammar();
    let mut ids = Vec::new();
    for name in [left.trim(), right.trim()] {
        match g.sort(name) {
            Some(s) => ids.push(s),
            None => return json!({ "error": format!("unknown sort `{name}`") }),
        }
    }
    let m = g.lattice.glb(ids[0], ids[1]);
    json!({ "glb": g.lattice.name(m), "bottom": m == SortId::BOTTOM })
}

pub fn unify_json(left: &str, right: &str) -> Value {
    let g = grammar();
    let mut terms = Vec::new();
    for (text, origin) in [(left, "<term 1>"), (right, "<term 2>")] {
        match parse_term(text, &g.lattice) {
            Ok(t) => terms.push(t),
            Err(errs) => return diagnostics(&errs, text, origin),
        }
    }
    let mut store = TermStore::with_rules(g.lattice.clone(), g.rule_set());
    let result = store.instantiate(&terms[0], &mut HashMap::new()).and_then(|a| {
        let b = store.instantiate(&terms[1], &mut HashMap::new())?;
        store.unify(a, b).map(|_| a)
    });
    match result {
        Ok(root) => json!({
            "avm": render_avm_pretty(&store, root),
            "graph": export_json(&store, root),
        }),
        Err(f) => json!({ "fail": f.to_string() }),
    }
}

#[wasm_bindgen]
pub fn parse_sentence(sentence: &str, mode: &str, trace: bool) -> String {
    parse_json(sentence, mode, trace).to_string()
}

#[wasm_bindgen]
pub fn glb(left: &str, right: &str) -> String {
    glb_json(left, right).to_string()
}

#[wasm_bindgen]
pub fn unify(left: &str, right: &str) -> String {
    unify_json(left, right).to_string()
}

#[wasm_bindgen]
pub fn grammar_source() -> String {
    SAMPLE_GRAMMAR_SRC.to_string()
}
