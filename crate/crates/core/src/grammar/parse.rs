use std::collections::BTreeSet;

use super::{Grammar, GrammarError, IdentClass, IdentKind, Rule, Symbol};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Directive(String),
    Colon,
    Bar,
    Semi,
    LParen,
    RParenStar,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { chars: src.char_indices().peekable(), line: 1, column: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> GrammarError {
        GrammarError::Syntax { line, column, message: message.into() }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, GrammarError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            let (line, column) = (self.line, self.column);
            match c {
                c if c.is_whitespace() => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                ':' => {
                    self.bump();
                    out.push((Tok::Colon, line, column));
                }
                '|' => {
                    self.bump();
                    out.push((Tok::Bar, line, column));
                }
                ';' => {
                    self.bump();
                    out.push((Tok::Semi, line, column));
                }
                '(' => {
                    self.bump();
                    out.push((Tok::LParen, line, column));
                }
                ')' => {
                    self.bump();
                    if self.peek() != Some('*') {
                        return Err(self.error(line, column, "expected `*` after `)`"));
                    }
                    self.bump();
                    out.push((Tok::RParenStar, line, column));
                }
                '"' => {
                    self.bump();
                    let mut text = String::new();
                    loop {
                        match self.bump() {
                            None | Some('\n') => return Err(self.error(line, column, "unterminated string")),
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some('"') => text.push('"'),
                                Some('\\') => text.push('\\'),
                                Some('n') => text.push('\n'),
                                Some('t') => text.push('\t'),
                                _ => return Err(self.error(line, column, "bad escape in string")),
                            },
                            Some(c) => text.push(c),
                        }
                    }
                    if text.is_empty() {
                        return Err(self.error(line, column, "empty terminal"));
                    }
                    out.push((Tok::Quoted(text), line, column));
                }
                '%' => {
                    self.bump();
                    let word = self.word();
                    if word.is_empty() {
                        return Err(self.error(line, column, "expected directive name after `%`"));
                    }
                    out.push((Tok::Directive(word), line, column));
                }
                c if c.is_ascii_alphanumeric() || c == '_' => {
                    let word = self.word();
                    out.push((Tok::Word(word), line, column));
                }
                other => return Err(self.error(line, column, format!("unexpected character `{other}`"))),
            }
        }
        Ok(out)
    }

    fn word(&mut self) -> String {
        let mut word = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                word.push(c);
                self.bump();
            } else {
                break;
            }
        }
        word
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.1, t.2)).unwrap_or(self.end)
    }

    fn error(&self, message: impl Into<String>) -> GrammarError {
        let (line, column) = self.here();
        GrammarError::Syntax { line, column, message: message.into() }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    /// Symbols up to (not including) `|`, `;` or `)*`.
    fn symbols(&mut self, classes: &BTreeSet<String>) -> Result<Vec<Symbol>, GrammarError> {
        let mut out = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Quoted(text)) => {
                    out.push(Symbol::Fixed(text.clone()));
                    self.pos += 1;
                }
                Some(Tok::Word(name)) => {
                    let name = name.clone();
                    // A word followed by `:` starts the next rule; the missing
                    // `;` is reported by the caller.
                    if matches!(self.toks.get(self.pos + 1), Some((Tok::Colon, _, _))) {
                        return Err(self.error(format!("expected `;` before rule `{name}`")));
                    }
                    let sym = if classes.contains(&name) {
                        Symbol::Ident(name)
                    } else if name.starts_with(|c: char| c.is_ascii_uppercase()) {
                        // Uppercase names are reserved for identifier classes;
                        // an undeclared one is caught during validation.
                        Symbol::Ident(name)
                    } else {
                        Symbol::NonTerminal(name)
                    };
                    out.push(sym);
                    self.pos += 1;
                }
                Some(Tok::LParen) => {
                    self.pos += 1;
                    let body = self.symbols(classes)?;
                    match self.next() {
                        Some(Tok::RParenStar) => out.push(Symbol::Repetition(body)),
                        _ => {
                            self.pos -= 1;
                            return Err(self.error("expected `)*` to close group"));
                        }
                    }
                }
                _ => return Ok(out),
            }
        }
    }
}

/// Parses a grammar file.
///
/// Directives: `%ident NAME [PREFIX]` declares a word-valued identifier
/// class (default prefix `a`); `%string NAME [PREFIX]` declares a quoted
/// string class (default prefix `s`); `%glue "t" ...` lists terminals that
/// attach to their neighbours without a space; `%start name` picks the
/// start rule (default: the first rule).
pub fn parse_grammar(source: &str) -> Result<Grammar, GrammarError> {
    let toks = Lexer::new(source).tokens()?;
    let end = source.lines().enumerate().last().map(|(i, l)| (i + 1, l.chars().count() + 1)).unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, end };

    let mut classes: Vec<IdentClass> = Vec::new();
    let mut class_names = BTreeSet::new();
    let mut glue = BTreeSet::new();
    let mut start: Option<String> = None;
    let mut rules = Vec::new();

    // Directives may appear anywhere at rule boundaries, but ident classes
    // must be known before rule bodies are classified, so gather them first.
    for (i, (tok, _, _)) in p.toks.iter().enumerate() {
        if let Tok::Directive(d) = tok {
            if d == "ident" || d == "string" {
                if let Some((Tok::Word(name), _, _)) = p.toks.get(i + 1) {
                    class_names.insert(name.clone());
                }
            }
        }
    }

    while let Some(tok) = p.next() {
        match tok {
            Tok::Directive(d) => match d.as_str() {
                "ident" | "string" => {
                    let name = match p.next() {
                        Some(Tok::Word(w)) => w,
                        _ => {
                            p.pos -= 1;
                            return Err(p.error(format!("expected class name after %{d}")));
                        }
                    };
                    let prefix = match p.peek() {
                        Some(Tok::Word(w)) if !matches!(p.toks.get(p.pos + 1), Some((Tok::Colon, _, _))) => {
                            let w = w.clone();
                            p.pos += 1;
                            Some(w)
                        }
                        _ => None,
                    };
                    let kind = if d == "ident" {
                        IdentKind::Word { prefix: prefix.unwrap_or_else(|| "a".into()) }
                    } else {
                        IdentKind::Quoted { prefix: prefix.unwrap_or_else(|| "s".into()) }
                    };
                    classes.push(IdentClass { name, kind });
                }
                "glue" => {
                    while let Some(Tok::Quoted(text)) = p.peek() {
                        glue.insert(text.clone());
                        p.pos += 1;
                    }
                }
                "start" => match p.next() {
                    Some(Tok::Word(w)) => start = Some(w),
                    _ => {
                        p.pos -= 1;
                        return Err(p.error("expected rule name after %start"));
                    }
                },
                other => {
                    p.pos -= 1;
                    return Err(p.error(format!("unknown directive %{other}")));
                }
            },
            Tok::Word(name) => {
                if p.next() != Some(Tok::Colon) {
                    p.pos -= 1;
                    return Err(p.error(format!("expected `:` after rule name `{name}`")));
                }
                let mut alternatives = Vec::new();
                loop {
                    let alt = p.symbols(&class_names)?;
                    if alt.is_empty() {
                        return Err(GrammarError::EmptyAlternative { rule: name });
                    }
                    alternatives.push(alt);
                    match p.next() {
                        Some(Tok::Bar) => continue,
                        Some(Tok::Semi) => break,
                        Some(Tok::RParenStar) => {
                            p.pos -= 1;
                            return Err(p.error("unbalanced `)*`"));
                        }
                        _ => {
                            p.pos = p.pos.saturating_sub(1);
                            return Err(p.error("expected `|` or `;`"));
                        }
                    }
                }
                rules.push(Rule { name, alternatives });
            }
            _ => {
                p.pos -= 1;
                return Err(p.error("expected a rule or a directive"));
            }
        }
    }

    let start = match start {
        Some(s) => s,
        None => match rules.first() {
            Some(r) => r.name.clone(),
            None => return Err(GrammarError::Syntax { line: 1, column: 1, message: "grammar has no rules".into() }),
        },
    };
    Grammar::new(start, rules, classes, glue)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_grammar() {
        let g = parse_grammar(r#"start : "pass" ;"#).unwrap();
        assert_eq!(g.rules().len(), 1);
        assert_eq!(g.rules()[0].alternatives, vec![vec![Symbol::Fixed("pass".into())]]);
        assert_eq!(g.start(), "start");
    }

    #[test]
    fn ident_declaration() {
        let g = parse_grammar("%ident ID\nstart : ID \"=\" ID ;").unwrap();
        let names: Vec<_> = g.ident_classes().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["ID"]);
        assert_eq!(
            g.rules()[0].alternatives[0],
            vec![Symbol::Ident("ID".into()), Symbol::Fixed("=".into()), Symbol::Ident("ID".into())]
        );
    }

    #[test]
    fn kleene_group() {
        let g = parse_grammar("start : ( stmt )* ;\nstmt : \"pass\" ;").unwrap();
        assert_eq!(g.rules()[0].alternatives, vec![vec![Symbol::Repetition(vec![Symbol::NonTerminal("stmt".into())])]]);
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_grammar("start : \"a\"\n  | ( \"b\" ;").unwrap_err();
        match err {
            GrammarError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 11)),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_grammar("start \"a\" ;").unwrap_err();
        assert!(matches!(err, GrammarError::Syntax { line: 1, column: 7, .. }), "{err:?}");
    }

    #[test]
    fn undefined_nonterminal() {
        let err = parse_grammar("start : foo ;").unwrap_err();
        assert_eq!(err, GrammarError::UndefinedNonTerminal { rule: "start".into(), name: "foo".into() });
    }

    #[test]
    fn undeclared_class() {
        let err = parse_grammar("start : ID ;").unwrap_err();
        assert_eq!(err, GrammarError::UndeclaredIdentClass { rule: "start".into(), name: "ID".into() });
    }

    #[test]
    fn empty_alternative() {
        let err = parse_grammar("start : \"a\" | ;").unwrap_err();
        assert_eq!(err, GrammarError::EmptyAlternative { rule: "start".into() });
        let err = parse_grammar("start : ( )* ;").unwrap_err();
        assert_eq!(err, GrammarError::EmptyRepetition { rule: "start".into() });
    }

    #[test]
    fn comments_and_directives() {
        let src = "# header\n%string STR q\n%glue \"(\" \")\"\n%start b\na : \"x\" ; # trailing\nb : a STR ;";
        let g = parse_grammar(src).unwrap();
        assert_eq!(g.start(), "b");
        assert_eq!(g.ident_classes()[0].kind, IdentKind::Quoted { prefix: "q".into() });
        assert!(g.is_glue("(") && g.is_glue(")") && !g.is_glue("x"));
    }

    #[test]
    fn escaped_quotes() {
        let g = parse_grammar(r#"start : "\"" "\\" ;"#).unwrap();
        assert_eq!(g.rules()[0].alternatives[0], vec![Symbol::Fixed("\"".into()), Symbol::Fixed("\\".into())]);
    }

    #[test]
    fn pretty_print_round_trip_bundled() {
        for src in [crate::grammars::MINILANG, crate::grammars::ARITH, crate::grammars::TOY] {
            let g = parse_grammar(src).unwrap();
            let again = parse_grammar(&g.to_string()).unwrap();
            assert_eq!(g, again);
        }
    }
}
