//! Context-free grammars in a small EBNF dialect.
//!
//! A grammar is a list of rules `name : alt | alt ;`. Symbols are quoted
//! fixed terminals, identifier-class terminals (declared with `%ident` or
//! `%string`), nonterminal references, and Kleene groups `( ... )*`.
//!
//! ```text
//! %ident ID
//! %glue "(" ")"
//! program : ( stmt )* ;
//! stmt    : "pass" | ID "=" ID | "print" "(" ID ")" ;
//! ```

mod parse;
mod tree;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

pub use parse::parse_grammar;
pub use tree::{DerivationTree, TreeSize};

/// One symbol on the right-hand side of a production.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Fixed(String),
    Ident(String),
    NonTerminal(String),
    Repetition(Vec<Symbol>),
}

impl Symbol {
    /// True when no nonterminal occurs in this symbol, looking inside
    /// repetition groups.
    pub fn is_terminal_only(&self) -> bool {
        match self {
            Symbol::Fixed(_) | Symbol::Ident(_) => true,
            Symbol::NonTerminal(_) => false,
            Symbol::Repetition(body) => body.iter().all(Symbol::is_terminal_only),
        }
    }

    fn visit_nonterminals<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Symbol::NonTerminal(name) => f(name),
            Symbol::Repetition(body) => body.iter().for_each(|s| s.visit_nonterminals(f)),
            Symbol::Fixed(_) | Symbol::Ident(_) => {}
        }
    }
}

pub type Alternative = Vec<Symbol>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub alternatives: Vec<Alternative>,
}

/// How values of an identifier class are spelled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdentKind {
    /// Bare words `<prefix>0`, `<prefix>1`, ...
    Word { prefix: String },
    /// Double-quoted string literals `"<prefix>0"`, ...
    Quoted { prefix: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentClass {
    pub name: String,
    pub kind: IdentKind,
}

impl IdentClass {
    /// The `index`-th element of this class's value pool.
    pub fn spell(&self, index: u32) -> String {
        match &self.kind {
            IdentKind::Word { prefix } => format!("{prefix}{index}"),
            IdentKind::Quoted { prefix } => format!("\"{prefix}{index}\""),
        }
    }

    /// Inverse of [`IdentClass::spell`].
    pub fn index_of(&self, text: &str) -> Option<u32> {
        let digits = match &self.kind {
            IdentKind::Word { prefix } => text.strip_prefix(prefix.as_str())?,
            IdentKind::Quoted { prefix } => text.strip_prefix('"')?.strip_suffix('"')?.strip_prefix(prefix.as_str())?,
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if digits.len() > 1 && digits.starts_with('0') {
            return None;
        }
        digits.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("start symbol `{0}` is not defined")]
    UndefinedStart(String),
    #[error("rule `{rule}` references undefined nonterminal `{name}`")]
    UndefinedNonTerminal { rule: String, name: String },
    #[error("rule `{rule}` uses undeclared identifier class `{name}`")]
    UndeclaredIdentClass { rule: String, name: String },
    #[error("rule `{rule}` has an empty alternative")]
    EmptyAlternative { rule: String },
    #[error("rule `{rule}` has an empty repetition group")]
    EmptyRepetition { rule: String },
    #[error("rule `{0}` is defined more than once")]
    DuplicateRule(String),
    #[error("identifier class `{0}` is declared more than once")]
    DuplicateIdentClass(String),
    #[error("nonterminal `{0}` cannot reach a terminal-only expansion")]
    NoTerminalFrontier(String),
}

/// A validated grammar.
///
/// Besides the rules themselves this caches, per nonterminal, which
/// alternatives are terminal-only and which contain a nonterminal.
#[derive(Debug, Clone)]
pub struct Grammar {
    start: String,
    rules: Vec<Rule>,
    index: HashMap<String, usize>,
    ident_classes: Vec<IdentClass>,
    glue: BTreeSet<String>,
    t_alts: Vec<Vec<usize>>,
    nt_alts: Vec<Vec<usize>>,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        self.start == other.start
            && self.rules == other.rules
            && self.ident_classes == other.ident_classes
            && self.glue == other.glue
    }
}

impl Eq for Grammar {}

impl Grammar {
    /// Builds and validates a grammar from its parts.
    pub fn new(
        start: impl Into<String>,
        rules: Vec<Rule>,
        ident_classes: Vec<IdentClass>,
        glue: BTreeSet<String>,
    ) -> Result<Self, GrammarError> {
        let start = start.into();
        let mut index = HashMap::with_capacity(rules.len());
        for (i, rule) in rules.iter().enumerate() {
            if index.insert(rule.name.clone(), i).is_some() {
                return Err(GrammarError::DuplicateRule(rule.name.clone()));
            }
        }
        let mut seen_classes = BTreeSet::new();
        for class in &ident_classes {
            if !seen_classes.insert(class.name.as_str()) {
                return Err(GrammarError::DuplicateIdentClass(class.name.clone()));
            }
        }
        if !index.contains_key(&start) {
            return Err(GrammarError::UndefinedStart(start));
        }
        for rule in &rules {
            if rule.alternatives.is_empty() {
                return Err(GrammarError::EmptyAlternative { rule: rule.name.clone() });
            }
            for alt in &rule.alternatives {
                if alt.is_empty() {
                    return Err(GrammarError::EmptyAlternative { rule: rule.name.clone() });
                }
                check_symbols(rule, alt, &index, &seen_classes)?;
            }
        }

        let mut t_alts = Vec::with_capacity(rules.len());
        let mut nt_alts = Vec::with_capacity(rules.len());
        for rule in &rules {
            let (t, nt): (Vec<usize>, Vec<usize>) =
                (0..rule.alternatives.len()).partition(|&i| rule.alternatives[i].iter().all(Symbol::is_terminal_only));
            t_alts.push(t);
            nt_alts.push(nt);
        }

        let grammar = Grammar { start, rules, index, ident_classes, glue, t_alts, nt_alts };
        grammar.check_termination()?;
        Ok(grammar)
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.index.get(name).map(|&i| &self.rules[i])
    }

    pub fn rule_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn rule_at(&self, index: usize) -> &Rule {
        &self.rules[index]
    }

    pub fn ident_classes(&self) -> &[IdentClass] {
        &self.ident_classes
    }

    pub fn ident_class(&self, name: &str) -> Option<&IdentClass> {
        self.ident_classes.iter().find(|c| c.name == name)
    }

    pub fn glue(&self) -> &BTreeSet<String> {
        &self.glue
    }

    pub fn is_glue(&self, text: &str) -> bool {
        self.glue.contains(text)
    }

    /// Indices of the terminal-only alternatives of rule `rule`.
    pub fn t_alt_indices(&self, rule: usize) -> &[usize] {
        &self.t_alts[rule]
    }

    /// Indices of the nonterminal-bearing alternatives of rule `rule`.
    pub fn nt_alt_indices(&self, rule: usize) -> &[usize] {
        &self.nt_alts[rule]
    }

    /// Alternatives of `nonterminal` whose symbols are all terminals.
    pub fn t_expansions(&self, nonterminal: &str) -> Option<Vec<&Alternative>> {
        let i = self.rule_index(nonterminal)?;
        Some(self.t_alts[i].iter().map(|&a| &self.rules[i].alternatives[a]).collect())
    }

    /// Alternatives of `nonterminal` containing at least one nonterminal.
    pub fn nt_expansions(&self, nonterminal: &str) -> Option<Vec<&Alternative>> {
        let i = self.rule_index(nonterminal)?;
        Some(self.nt_alts[i].iter().map(|&a| &self.rules[i].alternatives[a]).collect())
    }

    /// Every fixed terminal text in the grammar, in first-use order.
    pub fn fixed_terminals(&self) -> Vec<&str> {
        fn walk<'a>(sym: &'a Symbol, out: &mut Vec<&'a str>) {
            match sym {
                Symbol::Fixed(t) => {
                    if !out.contains(&t.as_str()) {
                        out.push(t);
                    }
                }
                Symbol::Repetition(body) => body.iter().for_each(|s| walk(s, out)),
                _ => {}
            }
        }
        let mut out = Vec::new();
        for rule in &self.rules {
            for alt in &rule.alternatives {
                alt.iter().for_each(|s| walk(s, &mut out));
            }
        }
        out
    }

    /// Joins leaf texts, separating neighbours by a single space unless
    /// either of them is a glue terminal.
    pub fn join_leaves<'a>(&self, leaves: impl IntoIterator<Item = &'a str>) -> String {
        let mut out = String::new();
        let mut prev: Option<&str> = None;
        for leaf in leaves {
            if let Some(p) = prev {
                if !self.is_glue(p) && !self.is_glue(leaf) {
                    out.push(' ');
                }
            }
            out.push_str(leaf);
            prev = Some(leaf);
        }
        out
    }

    /// Rejects grammars on which bounded sampling could fail to terminate.
    ///
    /// Two conditions: every nonterminal must derive some terminal string
    /// (classic productivity), and no cycle may consist solely of
    /// nonterminals without terminal-only alternatives, because the leaf
    /// probability never forces such a nonterminal to stop.
    fn check_termination(&self) -> Result<(), GrammarError> {
        let n = self.rules.len();
        let mut productive = vec![false; n];
        loop {
            let mut changed = false;
            for (i, rule) in self.rules.iter().enumerate() {
                if productive[i] {
                    continue;
                }
                let ok = rule.alternatives.iter().any(|alt| {
                    let mut all = true;
                    for sym in alt {
                        // Repetitions may be expanded zero times.
                        if let Symbol::NonTerminal(name) = sym {
                            all &= productive[self.index[name.as_str()]];
                        }
                    }
                    all
                });
                if ok {
                    productive[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if let Some(i) = productive.iter().position(|p| !p) {
            return Err(GrammarError::NoTerminalFrontier(self.rules[i].name.clone()));
        }

        // Cycle detection restricted to nonterminals lacking terminal-only
        // alternatives.
        let forced: Vec<bool> = (0..n).map(|i| self.t_alts[i].is_empty()).collect();
        let mut edges: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, rule) in self.rules.iter().enumerate() {
            if !forced[i] {
                continue;
            }
            for alt in &rule.alternatives {
                for sym in alt {
                    sym.visit_nonterminals(&mut |name| {
                        let j = self.index[name];
                        if forced[j] && !edges[i].contains(&j) {
                            edges[i].push(j);
                        }
                    });
                }
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; n];
        for root in 0..n {
            if state[root] != 0 || !forced[root] {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            state[root] = 1;
            while let Some((node, next)) = stack.pop() {
                if next < edges[node].len() {
                    stack.push((node, next + 1));
                    let succ = edges[node][next];
                    match state[succ] {
                        0 => {
                            state[succ] = 1;
                            stack.push((succ, 0));
                        }
                        1 => return Err(GrammarError::NoTerminalFrontier(self.rules[succ].name.clone())),
                        _ => {}
                    }
                } else {
                    state[node] = 2;
                }
            }
        }
        Ok(())
    }
}

fn check_symbols(
    rule: &Rule,
    symbols: &[Symbol],
    index: &HashMap<String, usize>,
    classes: &BTreeSet<&str>,
) -> Result<(), GrammarError> {
    for sym in symbols {
        match sym {
            Symbol::Fixed(_) => {}
            Symbol::Ident(name) => {
                if !classes.contains(name.as_str()) {
                    return Err(GrammarError::UndeclaredIdentClass { rule: rule.name.clone(), name: name.clone() });
                }
            }
            Symbol::NonTerminal(name) => {
                if !index.contains_key(name) {
                    return Err(GrammarError::UndefinedNonTerminal { rule: rule.name.clone(), name: name.clone() });
                }
            }
            Symbol::Repetition(body) => {
                if body.is_empty() {
                    return Err(GrammarError::EmptyRepetition { rule: rule.name.clone() });
                }
                check_symbols(rule, body, index, classes)?;
            }
        }
    }
    Ok(())
}

fn write_quoted(f: &mut fmt::Formatter<'_>, text: &str) -> fmt::Result {
    f.write_str("\"")?;
    for ch in text.chars() {
        match ch {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Fixed(text) => write_quoted(f, text),
            Symbol::Ident(name) | Symbol::NonTerminal(name) => f.write_str(name),
            Symbol::Repetition(body) => {
                f.write_str("(")?;
                for sym in body {
                    write!(f, " {sym}")?;
                }
                f.write_str(" )*")
            }
        }
    }
}

/// Pretty-prints in the same dialect accepted by [`parse_grammar`].
impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for class in &self.ident_classes {
            match &class.kind {
                IdentKind::Word { prefix } => writeln!(f, "%ident {} {}", class.name, prefix)?,
                IdentKind::Quoted { prefix } => writeln!(f, "%string {} {}", class.name, prefix)?,
            }
        }
        if !self.glue.is_empty() {
            f.write_str("%glue")?;
            for g in &self.glue {
                f.write_str(" ")?;
                write_quoted(f, g)?;
            }
            writeln!(f)?;
        }
        writeln!(f, "%start {}", self.start)?;
        for rule in &self.rules {
            write!(f, "{} :", rule.name)?;
            for (i, alt) in rule.alternatives.iter().enumerate() {
                if i > 0 {
                    write!(f, "\n    |")?;
                }
                for sym in alt {
                    write!(f, " {sym}")?;
                }
            }
            writeln!(f, " ;")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(src: &str) -> Grammar {
        parse_grammar(src).unwrap()
    }

    #[test]
    fn t_expansions_single_terminal_alt() {
        let g = g(r#"a : "x" | a "x" ;"#);
        assert_eq!(g.t_expansions("a").unwrap(), vec![&vec![Symbol::Fixed("x".into())]]);
        assert_eq!(
            g.nt_expansions("a").unwrap(),
            vec![&vec![Symbol::NonTerminal("a".into()), Symbol::Fixed("x".into())]]
        );
    }

    #[test]
    fn t_expansions_repetition_counts_by_body() {
        let g = g(r#"start : a ; a : ( "x" )* | a | "y" ;"#);
        let t = g.t_expansions("a").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0], &vec![Symbol::Repetition(vec![Symbol::Fixed("x".into())])]);
        let nt = g.nt_expansions("a").unwrap();
        assert_eq!(nt, vec![&vec![Symbol::NonTerminal("a".into())]]);
    }

    #[test]
    fn repetition_containing_nonterminal_is_nt_bearing() {
        let g = g(r#"start : ( ( b )* "z" )* | "q" ; b : "x" ;"#);
        let start = g.rule_index("start").unwrap();
        assert_eq!(g.nt_alt_indices(start), &[0]);
        assert_eq!(g.t_alt_indices(start), &[1]);
    }

    #[test]
    fn no_terminal_alternatives() {
        // `a` only recurses through `b`, which can stop.
        let g = g(r#"a : b "x" ; b : a | "y" ;"#);
        assert!(g.t_expansions("a").unwrap().is_empty());
        assert_eq!(g.nt_expansions("b").unwrap().len(), 1);
    }

    #[test]
    fn partition_is_exhaustive_and_disjoint() {
        let g = g(crate::grammars::MINILANG);
        for (i, rule) in g.rules().iter().enumerate() {
            let mut all: Vec<usize> = g.t_alt_indices(i).to_vec();
            all.extend_from_slice(g.nt_alt_indices(i));
            all.sort_unstable();
            assert_eq!(all, (0..rule.alternatives.len()).collect::<Vec<_>>(), "{}", rule.name);
        }
    }

    #[test]
    fn rejects_pure_nonterminal_cycle() {
        let err = parse_grammar(r#"a : b ; b : a "x" ;"#).unwrap_err();
        assert!(matches!(err, GrammarError::NoTerminalFrontier(_)), "{err}");
        let err = parse_grammar(r#"a : ( a )* ;"#).unwrap_err();
        assert!(matches!(err, GrammarError::NoTerminalFrontier(_)), "{err}");
    }

    #[test]
    fn rejects_unproductive() {
        let err = parse_grammar(r#"start : "x" a ; a : a "y" | b ; b : a ;"#).unwrap_err();
        assert!(matches!(err, GrammarError::NoTerminalFrontier(_)));
    }

    #[test]
    fn ident_pool_spelling_round_trips() {
        let word = IdentClass { name: "ID".into(), kind: IdentKind::Word { prefix: "a".into() } };
        let quoted = IdentClass { name: "STR".into(), kind: IdentKind::Quoted { prefix: "s".into() } };
        for i in [0, 1, 9, 10, 123] {
            assert_eq!(word.index_of(&word.spell(i)), Some(i));
            assert_eq!(quoted.index_of(&quoted.spell(i)), Some(i));
        }
        assert_eq!(word.spell(2), "a2");
        assert_eq!(quoted.spell(0), "\"s0\"");
        assert_eq!(word.index_of("b1"), None);
        assert_eq!(word.index_of("a"), None);
        assert_eq!(word.index_of("a01"), None);
    }

    #[test]
    fn join_respects_glue() {
        let g = g("%glue \"(\" \")\"\nstart : \"f\" \"(\" \"x\" \")\" \"y\" ;");
        assert_eq!(g.join_leaves(["f", "(", "x", ")", "y"]), "f(x)y");
        assert_eq!(g.join_leaves(["f", "x"]), "f x");
        assert_eq!(g.join_leaves(Vec::<&str>::new()), "");
    }
}
