use std::collections::HashMap;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use ftg::chart::{compare_modes, parse_with, tokenize, Mode, ParseMetrics, ParseOptions, ParseResult};
use ftg::grammar::{export_json, render_avm, render_avm_pretty, Diagnostic, Severity};
use ftg::{load_grammar, parse_term, Grammar, SortId, TermStore};

const OK: u8 = 0;
const NO_RESULT: u8 = 1;
const INPUT_ERROR: u8 = 2;
const USAGE_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "ftg", version, about = "Typed feature structure grammars with active constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a grammar and report diagnostics and inventory counts.
    Check { grammar: PathBuf },
    /// Print the greatest lower bound of two sorts.
    Glb { grammar: PathBuf, left: String, right: String },
    /// Unify two terms written in the grammar's term syntax.
    Unify {
        grammar: PathBuf,
        left: String,
        right: String,
        #[arg(long)]
        json: bool,
        /// One feature per line.
        #[arg(long)]
        pretty: bool,
    },
    /// Parse a sentence, or every line of --file.
    Parse {
        grammar: PathBuf,
        sentence: Option<String>,
        #[arg(long, default_value = "direct", value_parser = parse_mode)]
        mode: Mode,
        /// Run both modes and compare metrics and parse sets.
        #[arg(long)]
        compare: bool,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        metrics: bool,
        #[arg(long)]
        trace: bool,
        #[arg(long, default_value_t = 16)]
        max_parses: usize,
        /// One sentence per line; sentences are parsed in parallel.
        #[arg(long, conflicts_with = "sentence")]
        file: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

struct Out {
    stdout: String,
    stderr: String,
    code: u8,
}

impl Out {
    fn new() -> Self {
        Out {
            stdout: String::new(),
            stderr: String::new(),
            code: OK,
        }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.stdout.push_str(s.as_ref());
        self.stdout.push('\n');
    }

    fn err(&mut self, s: impl AsRef<str>) {
        self.stderr.push_str(s.as_ref());
        if !s.as_ref().ends_with('\n') {
            self.stderr.push('\n');
        }
    }

    fn flush(self) -> ExitCode {
        print!("{}", self.stdout);
        eprint!("{}", self.stderr);
        ExitCode::from(self.code)
    }
}

fn color_enabled() -> bool {
    match std::env::var("FTG_COLOR").as_deref() {
        Ok("never") => false,
        Ok("always") => true,
        _ => std::io::stderr().is_terminal(),
    }
}

fn show_diag(d: &Diagnostic, src: &str, origin: &str) -> String {
    let text = d.render(src, origin);
    if !color_enabled() {
        return text;
    }
    let (label, code) = match d.severity {
        Severity::Error => ("error", "1;31"),
        Severity::Warning => ("warning", "1;33"),
    };
    text.replacen(label, &format!("\x1b[{code}m{label}\x1b[0m"), 1)
}

fn load(path: &Path, out: &mut Out) -> Option<Grammar> {
    let src = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            out.err(format!("error: cannot read {}: {e}", path.display()));
            out.code = INPUT_ERROR;
            return None;
        }
    };
    match load_grammar(&src) {
        Ok(g) => Some(g),
        Err(errs) => {
            for e in &errs {
                out.err(show_diag(e, &src, &path.display().to_string()));
            }
            out.err(format!("{} error(s) in {}", errs.len(), path.display()));
            out.code = INPUT_ERROR;
            None
        }
    }
}

fn cmd_check(path: &Path) -> Out {
    let mut out = Out::new();
    let Some(g) = load(path, &mut out) else { return out };
    let src = std::fs::read_to_string(path).unwrap_or_default();
    for w in &g.warnings {
        out.err(show_diag(w, &src, &path.display().to_string()));
    }
    // the two reserved sorts are not counted
    out.line(format!(
        "ok: {} sorts, {} rules, {} lexemes, {} schemata",
        g.lattice.len() - 2,
        g.rules.len(),
        g.lexeme_count(),
        g.schemata.len()
    ));
    out
}

fn sort_arg(g: &Grammar, name: &str, out: &mut Out) -> Option<SortId> {
    let s = g.sort(name);
    if s.is_none() {
        out.err(format!("error: unknown sort `{name}`"));
        out.code = INPUT_ERROR;
    }
    s
}

fn cmd_glb(path: &Path, left: &str, right: &str) -> Out {
    let mut out = Out::new();
    let Some(g) = load(path, &mut out) else { return out };
    let (Some(a), Some(b)) = (sort_arg(&g, left, &mut out), sort_arg(&g, right, &mut out)) else {
        return out;
    };
    let m = g.lattice.glb(a, b);
    out.line(g.lattice.name(m));
    if m == SortId::BOTTOM {
        out.code = NO_RESULT;
    }
    out
}

fn cmd_unify(path: &Path, left: &str, right: &str, as_json: bool, pretty: bool) -> Out {
    let mut out = Out::new();
    let Some(g) = load(path, &mut out) else { return out };
    let mut terms = Vec::new();
    for (text, origin) in [(left, "<term 1>"), (right, "<term 2>")] {
        match parse_term(text, &g.lattice) {
            Ok(t) => terms.push(t),
            Err(errs) => {
                for e in &errs {
                    out.err(show_diag(e, text, origin));
                }
                out.code = INPUT_ERROR;
            }
        }
    }
    if out.code != OK {
        return out;
    }
    let mut store = TermStore::with_rules(g.lattice.clone(), g.rule_set());
    let mut env = HashMap::new();
    let result = store
        .instantiate(&terms[0], &mut env)
        .and_then(|a| {
            let b = store.instantiate(&terms[1], &mut HashMap::new())?;
            store.unify(a, b).map(|_| a)
        });
    match result {
        Ok(root) => {
            if as_json {
                out.line(export_json(&store, root).to_string());
            } else if pretty {
                out.line(render_avm_pretty(&store, root));
            } else {
                out.line(render_avm(&store, root));
            }
        }
        Err(f) => {
            if as_json {
                out.line(json!({ "fail": f.to_string() }).to_string());
            } else {
                out.line("FAIL");
                out.err(format!("{f}"));
            }
            out.code = NO_RESULT;
        }
    }
    out
}

struct ParseFlags {
    mode: Mode,
    compare: bool,
    json: bool,
    metrics: bool,
    trace: bool,
    max_parses: usize,
}

fn metrics_line(m: &ParseMetrics) -> String {
    let parts: Vec<String> = m.fields().iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("metrics: {}", parts.join(" "))
}

fn emit_trace(r: &ParseResult, flags: &ParseFlags, out: &mut Out) {
    if !flags.trace {
        return;
    }
    for l in &r.trace {
        if flags.json {
            out.err(l);
        } else {
            out.line(l);
        }
    }
}

fn parse_one(g: &Grammar, sentence: &str, flags: &ParseFlags) -> Out {
    let mut out = Out::new();
    let tokens = tokenize(sentence);
    if tokens.is_empty() {
        out.err("error: empty sentence");
        out.code = INPUT_ERROR;
        return out;
    }
    let opts = |mode| ParseOptions {
        mode,
        max_parses: flags.max_parses,
        trace: flags.trace,
        firing_budget: None,
    };
    if flags.compare {
        let run = compare_modes(&tokens, g, flags.max_parses).and_then(|mut c| {
            if flags.trace {
                c.direct = parse_with(&tokens, g, &opts(Mode::Direct))?;
                c.gat = parse_with(&tokens, g, &opts(Mode::Gat))?;
            }
            Ok(c)
        });
        let c = match run {
            Ok(c) => c,
            Err(e) => {
                out.err(format!("error: {e}"));
                out.code = INPUT_ERROR;
                return out;
            }
        };
        emit_trace(&c.direct, flags, &mut out);
        emit_trace(&c.gat, flags, &mut out);
        if flags.json {
            out.line(
                json!({
                    "sentence": tokens.join(" "),
                    "direct": c.direct.to_json(true),
                    "gat": c.gat.to_json(true),
                    "equal_parse_sets": c.equal_parse_sets,
                })
                .to_string(),
            );
        } else {
            out.line(format!("# {}", tokens.join(" ")));
            out.line(format!("{:<24} {:>8} {:>8}", "metric", "direct", "gat"));
            for ((k, d), (_, gv)) in c.direct.metrics.fields().iter().zip(c.gat.metrics.fields()) {
                out.line(format!("{k:<24} {d:>8} {gv:>8}"));
            }
            out.line(format!("{:<24} {:>8} {:>8}", "parses", c.direct.parses.len(), c.gat.parses.len()));
            out.line(format!("parse sets equal: {}", c.equal_parse_sets));
        }
        if c.direct.parses.is_empty() {
            out.code = NO_RESULT;
        }
        return out;
    }

    let r = match parse_with(&tokens, g, &opts(flags.mode)) {
        Ok(r) => r,
        Err(e) => {
            out.err(format!("error: {e}"));
            out.code = INPUT_ERROR;
            return out;
        }
    };
    emit_trace(&r, flags, &mut out);
    if flags.json {
        out.line(r.to_json(flags.metrics).to_string());
    } else {
        out.line(format!("# {}  ({}, {} parse(s))", tokens.join(" "), r.mode, r.parses.len()));
        for &p in &r.parses {
            out.line(render_avm_pretty(&r.store, p));
        }
        if flags.metrics {
            out.line(metrics_line(&r.metrics));
        }
    }
    if r.parses.is_empty() {
        out.code = NO_RESULT;
    }
    out
}

fn cmd_parse(path: &Path, sentence: Option<String>, file: Option<PathBuf>, flags: ParseFlags) -> Out {
    let mut out = Out::new();
    let Some(g) = load(path, &mut out) else { return out };
    let sentences: Vec<String> = match (sentence, file) {
        (Some(s), None) => vec![s],
        (None, Some(f)) => match std::fs::read_to_string(&f) {
            Ok(text) => text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect(),
            Err(e) => {
                out.err(format!("error: cannot read {}: {e}", f.display()));
                out.code = INPUT_ERROR;
                return out;
            }
        },
        _ => {
            out.err("error: give either a sentence or --file");
            out.code = USAGE_ERROR;
            return out;
        }
    };
    let results: Vec<Out> = sentences.par_iter().map(|s| parse_one(&g, s, &flags)).collect();
    let mut worst_error = false;
    for r in results {
        out.stdout.push_str(&r.stdout);
        out.stderr.push_str(&r.stderr);
        match r.code {
            INPUT_ERROR => worst_error = true,
            NO_RESULT if out.code == OK => out.code = NO_RESULT,
            _ => {}
        }
    }
    if worst_error {
        out.code = INPUT_ERROR;
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_ERROR } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = match cli.command {
        Command::Check { grammar } => cmd_check(&grammar),
        Command::Glb { grammar, left, right } => cmd_glb(&grammar, &left, &right),
        Command::Unify {
            grammar,
            left,
            right,
            json,
            pretty,
        } => cmd_unify(&grammar, &left, &right, json, pretty),
        Command::Parse {
            grammar,
            sentence,
            mode,
            compare,
            json,
            metrics,
            trace,
            max_parses,
            file,
        } => cmd_parse(
            &grammar,
            sentence,
            file,
            ParseFlags {
                mode,
                compare,
                json,
                metrics,
                trace,
                max_parses,
            },
        ),
    };
    out.flush()
}
