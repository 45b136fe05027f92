use super::diag::{Diagnostic, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    /// Lowercase identifier: sort or feature name.
    Ident(String),
    /// Capitalized identifier or `#n`: coreference tag / rule variable.
    Tag(String),
    Str(String),
    SubsortOf, // <|
    Define,    // :=
    Rule,      // ::
    SortLeq,   // :<
    Colon,
    Bar,
    Arrow, // =>
    Eq,
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Comma,
    Semi,
    /// `.` directly followed by a feature name.
    Dot,
    /// Statement terminator.
    End,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Tag(s) => format!("`{s}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::SubsortOf => "`<|`".into(),
            Tok::Define => "`:=`".into(),
            Tok::Rule => "`::`".into(),
            Tok::SortLeq => "`:<`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Arrow => "`=>`".into(),
            Tok::Eq => "`=`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrack => "`[`".into(),
            Tok::RBrack => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Dot => "`.`".into(),
            Tok::End => "end of statement `.`".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

/// Splits `src` into tokens. Lexical errors are collected and the
/// offending character skipped.
pub fn tokenize(src: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut errs = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! bump {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            bump!(1);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                bump!(1);
            }
            continue;
        }
        let (tok, len) = match (c, next) {
            ('<', Some('|')) => (Tok::SubsortOf, 2),
            (':', Some('=')) => (Tok::Define, 2),
            (':', Some(':')) => (Tok::Rule, 2),
            (':', Some('<')) => (Tok::SortLeq, 2),
            ('=', Some('>')) => (Tok::Arrow, 2),
            (':', _) => (Tok::Colon, 1),
            ('|', _) => (Tok::Bar, 1),
            ('=', _) => (Tok::Eq, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('[', _) => (Tok::LBrack, 1),
            (']', _) => (Tok::RBrack, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            (',', _) => (Tok::Comma, 1),
            (';', _) => (Tok::Semi, 1),
            ('.', Some(n)) if n.is_lowercase() => (Tok::Dot, 1),
            ('.', _) => (Tok::End, 1),
            ('"', _) => {
                let mut s = String::new();
                let mut j = i + 1;
                let mut closed = false;
                while j < chars.len() {
                    match chars[j] {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' if j + 1 < chars.len() => {
                            s.push(chars[j + 1]);
                            j += 2;
                        }
                        '\n' => break,
                        ch => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                if !closed {
                    errs.push(Diagnostic::error(span, "unterminated string literal"));
                    bump!(j - i);
                    continue;
                }
                (Tok::Str(s), j + 1 - i)
            }
            ('#', Some(d)) if d.is_ascii_digit() => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                (Tok::Tag(chars[i..j].iter().collect()), j - i)
            }
            (c, _) if c.is_alphabetic() => {
                let mut j = i + 1;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                // a trailing hyphen is never part of a name
                while chars[j - 1] == '-' {
                    j -= 1;
                }
                let word: String = chars[i..j].iter().collect();
                if c.is_uppercase() {
                    (Tok::Tag(word), j - i)
                } else {
                    (Tok::Ident(word), j - i)
                }
            }
            (c, _) => {
                errs.push(Diagnostic::error(span, format!("unexpected character `{c}`")));
                bump!(1);
                continue;
            }
        };
        toks.push(Token { tok, span });
        bump!(len);
    }
    (toks, errs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        let (t, e) = tokenize(src);
        assert!(e.is_empty(), "{e:?}");
        t.into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn subsort_statement() {
        assert_eq!(
            kinds("lex <| sign. % comment\n"),
            vec![Tok::Ident("lex".into()), Tok::SubsortOf, Tok::Ident("sign".into()), Tok::End]
        );
    }

    #[test]
    fn paths_and_terminators() {
        assert_eq!(
            kinds("P.dtrs.head-dtr = X."),
            vec![
                Tok::Tag("P".into()),
                Tok::Dot,
                Tok::Ident("dtrs".into()),
                Tok::Dot,
                Tok::Ident("head-dtr".into()),
                Tok::Eq,
                Tok::Tag("X".into()),
                Tok::End,
            ]
        );
    }

    #[test]
    fn operators() {
        assert_eq!(
            kinds(":: C:category | C.head :< substantive"),
            vec![
                Tok::Rule,
                Tok::Tag("C".into()),
                Tok::Colon,
                Tok::Ident("category".into()),
                Tok::Bar,
                Tok::Tag("C".into()),
                Tok::Dot,
                Tok::Ident("head".into()),
                Tok::SortLeq,
                Tok::Ident("substantive".into()),
            ]
        );
        assert_eq!(kinds("#12"), vec![Tok::Tag("#12".into())]);
        assert_eq!(kinds("\"Zoë\""), vec![Tok::Str("Zoë".into())]);
    }

    #[test]
    fn spans_are_one_based() {
        let (t, _) = tokenize("a\n  <| b.");
        assert_eq!(t[1].span, Span { line: 2, col: 3 });
    }

    #[test]
    fn bad_characters_are_reported() {
        let (t, e) = tokenize("a $ b");
        assert_eq!(t.len(), 2);
        assert_eq!(e[0].span, Span { line: 1, col: 3 });
    }
}
