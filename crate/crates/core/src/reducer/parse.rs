//! Parses input text back into a derivation tree of a grammar.
//!
//! Tokens are derived from the grammar: whitespace separates, `"..."`
//! forms one token when the grammar has a quoted identifier class, runs of
//! `[A-Za-z0-9_]` form words, and anything else is the longest matching
//! punctuation terminal. Parsing is memoized recursive descent that
//! explores every alternative and keeps the first tree found for each end
//! position.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use crate::grammar::{DerivationTree, Grammar, IdentKind, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("cannot tokenize input at byte {0}")]
    Token(usize),
    #[error("input does not derive from `{start}` (stuck near token {furthest})")]
    NoDerivation { start: String, furthest: usize },
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

pub fn tokenize(grammar: &Grammar, text: &str) -> Result<Vec<String>, ParseError> {
    let quoted = grammar.ident_classes().iter().any(|c| matches!(c.kind, IdentKind::Quoted { .. }));
    let mut punct: Vec<&str> = grammar.fixed_terminals().into_iter().filter(|t| !t.bytes().all(is_word_byte)).collect();
    punct.sort_by_key(|t| std::cmp::Reverse(t.len()));
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
        } else if quoted && b == b'"' {
            let end = text[i + 1..].find('"').ok_or(ParseError::Token(i))? + i + 2;
            out.push(text[i..end].to_owned());
            i = end;
        } else if is_word_byte(b) {
            let start = i;
            while i < bytes.len() && is_word_byte(bytes[i]) {
                i += 1;
            }
            out.push(text[start..i].to_owned());
        } else {
            let p = punct.iter().find(|p| text[i..].starts_with(**p)).ok_or(ParseError::Token(i))?;
            out.push((*p).to_owned());
            i += p.len();
        }
    }
    Ok(out)
}

type Parses = Rc<Vec<(usize, DerivationTree)>>;

struct TreeParser<'g> {
    grammar: &'g Grammar,
    tokens: Vec<String>,
    memo: HashMap<(usize, usize), Parses>,
    active: HashSet<(usize, usize)>,
    furthest: usize,
}

/// Keeps the first entry for each end position.
fn push_first<T>(out: &mut Vec<(usize, T)>, end: usize, value: T) {
    if !out.iter().any(|(e, _)| *e == end) {
        out.push((end, value));
    }
}

impl TreeParser<'_> {
    fn symbol(&mut self, sym: &Symbol, pos: usize) -> Parses {
        match sym {
            Symbol::Fixed(t) => {
                if self.tokens.get(pos) == Some(t) {
                    self.furthest = self.furthest.max(pos + 1);
                    Rc::new(vec![(pos + 1, DerivationTree::Fixed(t.clone()))])
                } else {
                    Rc::default()
                }
            }
            Symbol::Ident(class) => {
                let found = self.tokens.get(pos).and_then(|tok| {
                    let c = self.grammar.ident_class(class)?;
                    let index = c.index_of(tok)?;
                    Some(DerivationTree::Ident { class: class.clone(), index, text: tok.clone() })
                });
                match found {
                    Some(tree) => {
                        self.furthest = self.furthest.max(pos + 1);
                        Rc::new(vec![(pos + 1, tree)])
                    }
                    None => Rc::default(),
                }
            }
            Symbol::NonTerminal(name) => match self.grammar.rule_index(name) {
                Some(rule) => self.nonterminal(rule, pos),
                None => Rc::default(),
            },
            Symbol::Repetition(body) => {
                let mut done: Vec<(usize, Vec<Vec<DerivationTree>>)> = vec![(pos, Vec::new())];
                let mut frontier = 0;
                while frontier < done.len() {
                    let (start, items) = done[frontier].clone();
                    frontier += 1;
                    for (end, item) in self.sequence(body, start) {
                        if end > start {
                            let mut next = items.clone();
                            next.push(item);
                            push_first(&mut done, end, next);
                        }
                    }
                }
                Rc::new(done.into_iter().map(|(end, items)| (end, DerivationTree::Repetition { items })).collect())
            }
        }
    }

    fn sequence(&mut self, symbols: &[Symbol], pos: usize) -> Vec<(usize, Vec<DerivationTree>)> {
        let mut states: Vec<(usize, Vec<DerivationTree>)> = vec![(pos, Vec::new())];
        for sym in symbols {
            let mut next = Vec::new();
            for (at, children) in &states {
                for (end, tree) in self.symbol(sym, *at).iter() {
                    if next.iter().any(|(e, _)| e == end) {
                        continue;
                    }
                    let mut c = children.clone();
                    c.push(tree.clone());
                    next.push((*end, c));
                }
            }
            if next.is_empty() {
                return next;
            }
            states = next;
        }
        states
    }

    fn nonterminal(&mut self, rule: usize, pos: usize) -> Parses {
        if let Some(p) = self.memo.get(&(rule, pos)) {
            return p.clone();
        }
        // Left-recursive re-entry contributes nothing.
        if !self.active.insert((rule, pos)) {
            return Rc::default();
        }
        let grammar = self.grammar;
        let r = grammar.rule_at(rule);
        let mut out: Vec<(usize, DerivationTree)> = Vec::new();
        for (alt, symbols) in r.alternatives.iter().enumerate() {
            for (end, children) in self.sequence(symbols, pos) {
                push_first(&mut out, end, DerivationTree::NonTerminal { name: r.name.clone(), alt, children });
            }
        }
        self.active.remove(&(rule, pos));
        let out = Rc::new(out);
        self.memo.insert((rule, pos), out.clone());
        out
    }
}

/// Parses `text` as a complete derivation of the grammar's start symbol.
pub fn parse_input(grammar: &Grammar, text: &str) -> Result<DerivationTree, ParseError> {
    let tokens = tokenize(grammar, text)?;
    let len = tokens.len();
    let mut p = TreeParser { grammar, tokens, memo: HashMap::new(), active: HashSet::new(), furthest: 0 };
    let start = Symbol::NonTerminal(grammar.start().to_owned());
    let parses = p.symbol(&start, 0);
    parses
        .iter()
        .find(|(end, _)| *end == len)
        .map(|(_, t)| t.clone())
        .ok_or_else(|| ParseError::NoDerivation { start: grammar.start().to_owned(), furthest: p.furthest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::sampler::{prng, sample, ChoiceSource, SizeBounds};

    #[test]
    fn tokenizes_with_longest_punctuation() {
        let g = parse_grammar(crate::grammars::MINILANG).unwrap();
        let toks = tokenize(&g, "def a0(a1:int,)-> int { return (a1 // 1) } print(\"s0\")").unwrap();
        assert!(toks.contains(&"->".to_owned()));
        assert!(toks.contains(&"//".to_owned()));
        assert!(toks.contains(&"\"s0\"".to_owned()));
        assert!(tokenize(&g, "a0 @ 1").is_err());
    }

    #[test]
    fn sampled_inputs_parse_back_to_their_text() {
        for (src, bounds) in [
            (crate::grammars::MINILANG, (3, 3, 3)),
            (crate::grammars::ARITH, (3, 3, 3)),
            (crate::grammars::TOY, (1, 3, 1)),
        ] {
            let g = parse_grammar(src).unwrap();
            let b = SizeBounds::new(bounds.0, bounds.1, bounds.2).unwrap();
            let mut rng = prng(4);
            for _ in 0..300 {
                let s = sample(&g, b, &mut ChoiceSource::fresh(&mut rng)).unwrap();
                let tree = parse_input(&g, &s.text).unwrap_or_else(|e| panic!("{}: {e}", s.text));
                assert_eq!(tree.linearize(&g), s.text);
            }
        }
    }

    #[test]
    fn unambiguous_grammars_recover_the_sampled_tree() {
        let g = parse_grammar(crate::grammars::ARITH).unwrap();
        let mut rng = prng(6);
        for _ in 0..300 {
            let s = sample(&g, SizeBounds::new(2, 3, 3).unwrap(), &mut ChoiceSource::fresh(&mut rng)).unwrap();
            assert_eq!(parse_input(&g, &s.text).unwrap(), s.tree);
        }
    }

    #[test]
    fn rejects_non_derivations() {
        let g = parse_grammar(crate::grammars::ARITH).unwrap();
        assert!(matches!(parse_input(&g, "1 +"), Err(ParseError::NoDerivation { .. })));
        assert!(parse_input(&g, "( 1 + 2 )").is_ok());
    }

    #[test]
    fn left_recursion_terminates() {
        let g = parse_grammar("s : s \"x\" | \"x\" ;").unwrap();
        assert!(parse_input(&g, "x").is_ok());
    }
}
