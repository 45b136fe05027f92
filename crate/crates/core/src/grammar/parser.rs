//! Recursive-descent parser from tokens to statement syntax trees. Sort
//! names are kept as text here; they are resolved once the lattice exists.

use super::diag::{Diagnostic, Span};
use super::lexer::{Tok, Token};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Name {
    pub text: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawTerm {
    Node {
        span: Span,
        tag: Option<Name>,
        sort: Option<Name>,
        features: Vec<(Name, RawTerm)>,
    },
    List {
        span: Span,
        tag: Option<Name>,
        items: Vec<RawTerm>,
        tail: Option<Box<RawTerm>>,
    },
}

impl RawTerm {
    pub fn span(&self) -> Span {
        match self {
            RawTerm::Node { span, .. } | RawTerm::List { span, .. } => *span,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawPath {
    pub root: Name,
    pub features: Vec<Name>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawRhs {
    Path(RawPath),
    Term(RawTerm),
    Append(RawPath, RawPath),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawGoal {
    Eq { lhs: RawPath, rhs: RawRhs },
    Restrict { path: RawPath, sort: Name },
    Closed { path: RawPath, features: Vec<Name> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Subsort {
        child: Name,
        parent: Name,
    },
    Partition {
        parent: Name,
        children: Vec<Name>,
    },
    Approp {
        sort: Name,
        decls: Vec<(Name, Name)>,
    },
    Closed {
        sort: Name,
        features: Vec<Name>,
    },
    Rule {
        span: Span,
        var: Name,
        guard: Name,
        guard_features: Vec<(Name, RawTerm)>,
        body: Vec<RawGoal>,
    },
    Word {
        surface: String,
        span: Span,
        term: RawTerm,
    },
    Schema {
        name: Name,
        mother: RawTerm,
        dtrs: Vec<Vec<Name>>,
        dtrs_span: Span,
    },
    Start {
        sort: Name,
    },
}

type PResult<T> = Result<T, Diagnostic>;

pub struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    eof: Span,
}

impl<'a> Parser<'a> {
    pub fn new(toks: &'a [Token], eof: Span) -> Self {
        Parser { toks, pos: 0, eof }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        self.toks.get(self.pos).map(|t| t.span).unwrap_or(self.eof)
    }

    fn unexpected(&self, what: &str) -> Diagnostic {
        let found = match self.peek() {
            Some(t) => t.describe(),
            None => "end of input".into(),
        };
        Diagnostic::error(self.span(), format!("expected {what}, found {found}"))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> PResult<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Name> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let n = Name {
                    text: s.clone(),
                    span: self.span(),
                };
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn tag(&mut self, what: &str) -> PResult<Name> {
        match self.peek() {
            Some(Tok::Tag(s)) => {
                let n = Name {
                    text: s.clone(),
                    span: self.span(),
                };
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    /// Parses every statement, skipping to the next terminator after an error.
    pub fn statements(&mut self) -> (Vec<Stmt>, Vec<Diagnostic>) {
        let mut stmts = Vec::new();
        let mut errs = Vec::new();
        while self.peek().is_some() {
            match self.statement() {
                Ok(s) => stmts.push(s),
                Err(e) => {
                    errs.push(e);
                    while let Some(t) = self.peek() {
                        let end = *t == Tok::End;
                        self.pos += 1;
                        if end {
                            break;
                        }
                    }
                }
            }
        }
        (stmts, errs)
    }

    fn end(&mut self) -> PResult<()> {
        self.expect(&Tok::End, "`.` to end the statement")
    }

    fn statement(&mut self) -> PResult<Stmt> {
        match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Rule), _) => self.rule(),
            (Some(Tok::Ident(k)), Some(next)) => match (k.as_str(), next) {
                ("approp", Tok::Ident(_)) => self.approp(),
                ("closed", Tok::Ident(_)) => self.closed(),
                ("word", Tok::Str(_)) => self.word(),
                ("schema", Tok::Ident(_)) => self.schema(),
                ("start", Tok::Ident(_)) => {
                    self.pos += 1;
                    let sort = self.ident("start sort name")?;
                    self.end()?;
                    Ok(Stmt::Start { sort })
                }
                _ => self.sort_decl(),
            },
            _ => Err(self.unexpected("a statement")),
        }
    }

    fn sort_decl(&mut self) -> PResult<Stmt> {
        let first = self.ident("sort name")?;
        if self.eat(&Tok::SubsortOf) {
            let parent = self.ident("sort name after `<|`")?;
            self.end()?;
            return Ok(Stmt::Subsort { child: first, parent });
        }
        if self.eat(&Tok::Define) {
            self.expect(&Tok::LBrace, "`{` to open the partition")?;
            let mut children = Vec::new();
            if !self.eat(&Tok::RBrace) {
                loop {
                    children.push(self.ident("sort name in partition")?);
                    if self.eat(&Tok::RBrace) {
                        break;
                    }
                    self.expect(&Tok::Semi, "`;` or `}`")?;
                }
            }
            self.end()?;
            return Ok(Stmt::Partition { parent: first, children });
        }
        Err(self.unexpected("`<|` or `:=`"))
    }

    fn approp(&mut self) -> PResult<Stmt> {
        self.pos += 1;
        let sort = self.ident("sort name")?;
        self.expect(&Tok::LParen, "`(`")?;
        let mut decls = Vec::new();
        loop {
            let f = self.ident("feature name")?;
            self.expect(&Tok::Arrow, "`=>`")?;
            let b = self.ident("sort name")?;
            decls.push((f, b));
            if self.eat(&Tok::RParen) {
                break;
            }
            self.expect(&Tok::Comma, "`,` or `)`")?;
        }
        self.end()?;
        Ok(Stmt::Approp { sort, decls })
    }

    fn feature_list(&mut self) -> PResult<Vec<Name>> {
        self.expect(&Tok::LBrack, "`[`")?;
        let mut out = Vec::new();
        if self.eat(&Tok::RBrack) {
            return Ok(out);
        }
        loop {
            out.push(self.ident("feature name")?);
            if self.eat(&Tok::RBrack) {
                return Ok(out);
            }
            self.expect(&Tok::Comma, "`,` or `]`")?;
        }
    }

    fn closed(&mut self) -> PResult<Stmt> {
        self.pos += 1;
        let sort = self.ident("sort name")?;
        let features = self.feature_list()?;
        self.end()?;
        Ok(Stmt::Closed { sort, features })
    }

    fn word(&mut self) -> PResult<Stmt> {
        self.pos += 1;
        let span = self.span();
        let surface = match self.peek() {
            Some(Tok::Str(s)) => s.clone(),
            _ => return Err(self.unexpected("a quoted word")),
        };
        self.pos += 1;
        self.expect(&Tok::Colon, "`:`")?;
        let term = self.term()?;
        self.end()?;
        Ok(Stmt::Word { surface, span, term })
    }

    fn schema(&mut self) -> PResult<Stmt> {
        self.pos += 1;
        let name = self.ident("schema name")?;
        self.expect(&Tok::Colon, "`:`")?;
        let mother = self.term()?;
        let dtrs_span = self.span();
        match self.peek() {
            Some(Tok::Ident(k)) if k == "dtrs" => self.pos += 1,
            _ => return Err(self.unexpected("`dtrs`")),
        }
        self.expect(&Tok::LBrack, "`[`")?;
        let mut dtrs = Vec::new();
        loop {
            let mut path = vec![self.ident("daughter path")?];
            while self.eat(&Tok::Dot) {
                path.push(self.ident("feature name")?);
            }
            dtrs.push(path);
            if self.eat(&Tok::RBrack) {
                break;
            }
            self.expect(&Tok::Comma, "`,` or `]`")?;
        }
        self.end()?;
        Ok(Stmt::Schema {
            name,
            mother,
            dtrs,
            dtrs_span,
        })
    }

    fn rule(&mut self) -> PResult<Stmt> {
        let span = self.span();
        self.pos += 1;
        let var = self.tag("rule variable")?;
        self.expect(&Tok::Colon, "`:`")?;
        let guard = self.ident("guard sort")?;
        let guard_features = if self.peek() == Some(&Tok::LParen) {
            self.feature_block()?
        } else {
            Vec::new()
        };
        self.expect(&Tok::Bar, "`|`")?;
        let parenthesized = self.peek() == Some(&Tok::LParen) && matches!(self.peek_at(1), Some(Tok::Tag(_)));
        if parenthesized {
            self.pos += 1;
        }
        let mut body = vec![self.goal()?];
        while self.eat(&Tok::Comma) {
            body.push(self.goal()?);
        }
        if parenthesized {
            self.expect(&Tok::RParen, "`)` to close the rule body")?;
        }
        self.end()?;
        Ok(Stmt::Rule {
            span,
            var,
            guard,
            guard_features,
            body,
        })
    }

    fn path(&mut self) -> PResult<RawPath> {
        let root = self.tag("a path starting with a tag")?;
        let mut features = Vec::new();
        while self.eat(&Tok::Dot) {
            features.push(self.ident("feature name")?);
        }
        Ok(RawPath { root, features })
    }

    fn goal(&mut self) -> PResult<RawGoal> {
        if let Some(Tok::Ident(k)) = self.peek() {
            if k == "lmember" {
                self.pos += 1;
                self.expect(&Tok::LParen, "`(`")?;
                match self.peek() {
                    Some(Tok::Ident(f)) if f == "features" => self.pos += 1,
                    _ => return Err(self.unexpected("`features`")),
                }
                self.expect(&Tok::LParen, "`(`")?;
                let path = self.path()?;
                self.expect(&Tok::RParen, "`)`")?;
                self.expect(&Tok::Comma, "`,`")?;
                let features = self.feature_list()?;
                self.expect(&Tok::RParen, "`)`")?;
                return Ok(RawGoal::Closed { path, features });
            }
        }
        let lhs = self.path()?;
        if self.eat(&Tok::SortLeq) {
            let sort = self.ident("sort name after `:<`")?;
            return Ok(RawGoal::Restrict { path: lhs, sort });
        }
        self.expect(&Tok::Eq, "`=` or `:<`")?;
        let rhs = match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Ident(k)), Some(Tok::LParen)) if k == "append" => {
                self.pos += 2;
                let a = self.path()?;
                self.expect(&Tok::Comma, "`,`")?;
                let b = self.path()?;
                self.expect(&Tok::RParen, "`)`")?;
                RawRhs::Append(a, b)
            }
            (Some(Tok::Tag(_)), Some(Tok::Colon)) => RawRhs::Term(self.term()?),
            (Some(Tok::Tag(_)), _) => RawRhs::Path(self.path()?),
            _ => RawRhs::Term(self.term()?),
        };
        Ok(RawGoal::Eq { lhs, rhs })
    }

    fn feature_block(&mut self) -> PResult<Vec<(Name, RawTerm)>> {
        self.expect(&Tok::LParen, "`(`")?;
        let mut out = Vec::new();
        loop {
            let f = self.ident("feature name")?;
            self.expect(&Tok::Arrow, "`=>`")?;
            out.push((f, self.term()?));
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(&Tok::Comma, "`,` or `)`")?;
        }
    }

    pub fn term(&mut self) -> PResult<RawTerm> {
        let span = self.span();
        let mut tag = None;
        if let Some(Tok::Tag(_)) = self.peek() {
            let t = self.tag("tag")?;
            if !self.eat(&Tok::Colon) {
                return Ok(RawTerm::Node {
                    span,
                    tag: Some(t),
                    sort: None,
                    features: Vec::new(),
                });
            }
            tag = Some(t);
        }
        if self.eat(&Tok::LBrack) {
            let mut items = Vec::new();
            let mut tail = None;
            if !self.eat(&Tok::RBrack) {
                loop {
                    items.push(self.term()?);
                    if self.eat(&Tok::Bar) {
                        tail = Some(Box::new(self.term()?));
                        self.expect(&Tok::RBrack, "`]`")?;
                        break;
                    }
                    if self.eat(&Tok::RBrack) {
                        break;
                    }
                    self.expect(&Tok::Comma, "`,`, `|` or `]`")?;
                }
            }
            return Ok(RawTerm::List { span, tag, items, tail });
        }
        let sort = self.ident("a term")?;
        let features = if self.peek() == Some(&Tok::LParen) {
            self.feature_block()?
        } else {
            Vec::new()
        };
        Ok(RawTerm::Node {
            span,
            tag,
            sort: Some(sort),
            features,
        })
    }

    pub fn at_end(&self) -> bool {
        self.peek().is_none()
    }

    pub fn eat_end(&mut self) -> bool {
        self.eat(&Tok::End)
    }

    pub fn error_here(&self, what: &str) -> Diagnostic {
        self.unexpected(what)
    }
}
