//! Size-bounded grammar sampling with recorded decisions.
//!
//! [`bounded_sample`] expands a symbol under bounds `(m, n, d)`:
//! identifier terminals draw from a pool of `m` values, Kleene groups
//! repeat `0..=n` times, and a nonterminal that has both terminal-only and
//! nonterminal-bearing alternatives takes a terminal-only one with
//! probability `(c + 1) / (d + 1)`, where `c` counts its expansions on the
//! current root path including this one. At `c = d` that probability is 1,
//! so no path expands one nonterminal more than `d` times.
//!
//! Every decision is recorded as a [`Choice`]. Replaying the recorded
//! sequence reproduces the same tree; replaying it under other bounds, or
//! after point mutations, reduces out-of-range values modulo their new
//! range and continues with fresh randomness once the sequence runs out.

mod choice;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use choice::{Choice, ChoiceSequence, ChoiceSource};

use crate::grammar::{DerivationTree, Grammar, Symbol};

pub type Prng = rand_chacha::ChaCha8Rng;

pub fn prng(seed: u64) -> Prng {
    Prng::seed_from_u64(seed)
}

/// Nested nonterminal expansions allowed on one path before sampling is
/// declared stuck.
const MAX_NESTING: usize = 2048;

/// Upper bounds on idents, items and depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SizeBounds {
    pub m: u32,
    pub n: u32,
    pub d: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SampleError {
    #[error("size bounds must all be at least 1, got ({m},{n},{d})")]
    InvalidBounds { m: u32, n: u32, d: u32 },
    #[error("sampling got stuck expanding `{nonterminal}`")]
    Stuck { nonterminal: String },
    #[error("unknown nonterminal `{0}`")]
    UnknownNonTerminal(String),
    #[error("unknown identifier class `{0}`")]
    UnknownIdentClass(String),
}

impl SizeBounds {
    pub fn new(m: u32, n: u32, d: u32) -> Result<Self, SampleError> {
        if m == 0 || n == 0 || d == 0 {
            return Err(SampleError::InvalidBounds { m, n, d });
        }
        Ok(SizeBounds { m, n, d })
    }

    pub fn admits(&self, size: &crate::grammar::TreeSize) -> bool {
        size.fits(self.m, self.n, self.d)
    }
}

impl std::fmt::Display for SizeBounds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.m, self.n, self.d)
    }
}

impl std::str::FromStr for SizeBounds {
    type Err = String;

    /// Parses `m,n,d`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [m, n, d] = parts.as_slice() else {
            return Err(format!("expected m,n,d but got `{s}`"));
        };
        let num = |t: &str| t.parse::<u32>().map_err(|e| format!("bad bound `{t}`: {e}"));
        SizeBounds::new(num(m)?, num(n)?, num(d)?).map_err(|e| e.to_string())
    }
}

/// Probability of taking a terminal-only expansion after `c` expansions
/// under depth bound `d`.
pub fn leaf_probability(c: u32, d: u32) -> f64 {
    (f64::from(c) + 1.0) / (f64::from(d) + 1.0)
}

/// A sampled input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub text: String,
    pub tree: DerivationTree,
    pub choices: ChoiceSequence,
}

struct Sampler<'g, 's, 'r> {
    grammar: &'g Grammar,
    bounds: SizeBounds,
    source: &'s mut ChoiceSource<'r>,
    recorded: Vec<Choice>,
    counts: Vec<u32>,
    nesting: usize,
}

impl Sampler<'_, '_, '_> {
    fn symbol(&mut self, sym: &Symbol) -> Result<DerivationTree, SampleError> {
        match sym {
            Symbol::Fixed(text) => Ok(DerivationTree::Fixed(text.clone())),
            Symbol::Ident(class) => self.ident(class),
            Symbol::Repetition(body) => self.repetition(body),
            Symbol::NonTerminal(name) => self.nonterminal(name),
        }
    }

    fn ident(&mut self, class: &str) -> Result<DerivationTree, SampleError> {
        let ic = self.grammar.ident_class(class).ok_or_else(|| SampleError::UnknownIdentClass(class.to_owned()))?;
        let index = self.source.uniform(self.bounds.m);
        self.recorded.push(Choice::Ident { class: class.to_owned(), index });
        Ok(DerivationTree::Ident { class: class.to_owned(), index, text: ic.spell(index) })
    }

    fn repetition(&mut self, body: &[Symbol]) -> Result<DerivationTree, SampleError> {
        let count = self.source.uniform(self.bounds.n + 1);
        self.recorded.push(Choice::Rep(count));
        let mut items = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let item = body.iter().map(|s| self.symbol(s)).collect::<Result<Vec<_>, _>>()?;
            items.push(item);
        }
        Ok(DerivationTree::Repetition { items })
    }

    fn nonterminal(&mut self, name: &str) -> Result<DerivationTree, SampleError> {
        let rule = self.grammar.rule_index(name).ok_or_else(|| SampleError::UnknownNonTerminal(name.to_owned()))?;
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return Err(SampleError::Stuck { nonterminal: name.to_owned() });
        }
        self.counts[rule] += 1;
        let c = self.counts[rule];

        let t = self.grammar.t_alt_indices(rule);
        let nt = self.grammar.nt_alt_indices(rule);
        let leaf = if nt.is_empty() {
            true
        } else if t.is_empty() {
            false
        } else {
            let outcome = self.source.leaf_coin(c, self.bounds.d);
            self.recorded.push(Choice::Coin(outcome));
            outcome
        };
        let list = if leaf { t } else { nt };
        let index = self.source.uniform(list.len() as u32);
        self.recorded.push(Choice::Alt { nonterminal: name.to_owned(), index, leaf });
        let alt = list[index as usize];
        let symbols = &self.grammar.rule_at(rule).alternatives[alt];
        let children = symbols.iter().map(|s| self.symbol(s)).collect::<Result<Vec<_>, _>>();

        self.counts[rule] -= 1;
        self.nesting -= 1;
        Ok(DerivationTree::NonTerminal { name: name.to_owned(), alt, children: children? })
    }
}

/// Samples an expansion of `symbol` under `bounds`, drawing decisions from
/// `source`.
pub fn bounded_sample(
    grammar: &Grammar,
    symbol: &Symbol,
    bounds: SizeBounds,
    source: &mut ChoiceSource<'_>,
) -> Result<Sample, SampleError> {
    let mut sampler =
        Sampler { grammar, bounds, source, recorded: Vec::new(), counts: vec![0; grammar.rules().len()], nesting: 0 };
    let tree = sampler.symbol(symbol)?;
    let choices = ChoiceSequence(sampler.recorded);
    Ok(Sample { text: tree.linearize(grammar), tree, choices })
}

/// Samples a whole program from the start symbol.
pub fn sample(grammar: &Grammar, bounds: SizeBounds, source: &mut ChoiceSource<'_>) -> Result<Sample, SampleError> {
    let start = Symbol::NonTerminal(grammar.start().to_owned());
    bounded_sample(grammar, &start, bounds, source)
}

/// Replays `choices` under `bounds`; `rng` supplies decisions past the end
/// of the sequence.
pub fn replay(
    grammar: &Grammar,
    bounds: SizeBounds,
    choices: &ChoiceSequence,
    rng: &mut Prng,
) -> Result<Sample, SampleError> {
    let mut source = ChoiceSource::replay(choices, rng);
    sample(grammar, bounds, &mut source)
}

/// Concretizes a terminal symbol. Fixed terminals return their text;
/// identifier classes return a uniformly drawn pool element.
pub fn concretize_terminal(
    grammar: &Grammar,
    terminal: &Symbol,
    bounds: SizeBounds,
    source: &mut ChoiceSource<'_>,
) -> Result<String, SampleError> {
    match terminal {
        Symbol::Fixed(_) | Symbol::Ident(_) => {
            let s = bounded_sample(grammar, terminal, bounds, source)?;
            Ok(s.text)
        }
        Symbol::NonTerminal(name) => Err(SampleError::UnknownIdentClass(name.clone())),
        Symbol::Repetition(_) => Err(SampleError::UnknownIdentClass("( ... )*".into())),
    }
}

/// Draws a replacement for `choice` that is legal under `bounds`, different
/// from the current value whenever the range allows it.
pub fn fresh_choice(grammar: &Grammar, bounds: SizeBounds, choice: &Choice, rng: &mut Prng) -> Choice {
    use rand::Rng;
    let redraw = |rng: &mut Prng, current: u32, range: u32| -> u32 {
        if range <= 1 {
            return 0;
        }
        let v = rng.random_range(0..range - 1);
        let current = current % range;
        if v >= current {
            v + 1
        } else {
            v
        }
    };
    match choice {
        Choice::Alt { nonterminal, index, leaf } => {
            let range = grammar
                .rule_index(nonterminal)
                .map(|r| if *leaf { grammar.t_alt_indices(r).len() } else { grammar.nt_alt_indices(r).len() })
                .unwrap_or(1) as u32;
            Choice::Alt { nonterminal: nonterminal.clone(), index: redraw(rng, *index, range.max(1)), leaf: *leaf }
        }
        Choice::Rep(v) => Choice::Rep(redraw(rng, *v, bounds.n + 1)),
        Choice::Ident { class, index } => Choice::Ident { class: class.clone(), index: redraw(rng, *index, bounds.m) },
        Choice::Coin(b) => Choice::Coin(!b),
    }
}

/// The choice sequence that makes the sampler produce `tree`, or `None`
/// if `tree` is not a derivation under `grammar`.
pub fn choices_of(grammar: &Grammar, tree: &DerivationTree) -> Option<ChoiceSequence> {
    fn walk(g: &Grammar, tree: &DerivationTree, out: &mut Vec<Choice>) -> Option<()> {
        match tree {
            DerivationTree::Fixed(_) => {}
            DerivationTree::Ident { class, index, .. } => {
                out.push(Choice::Ident { class: class.clone(), index: *index })
            }
            DerivationTree::Repetition { items } => {
                out.push(Choice::Rep(u32::try_from(items.len()).ok()?));
                for child in items.iter().flatten() {
                    walk(g, child, out)?;
                }
            }
            DerivationTree::NonTerminal { name, alt, children } => {
                let rule = g.rule_index(name)?;
                let (t, nt) = (g.t_alt_indices(rule), g.nt_alt_indices(rule));
                let leaf = t.contains(alt);
                if !t.is_empty() && !nt.is_empty() {
                    out.push(Choice::Coin(leaf));
                }
                let list = if leaf { t } else { nt };
                let index = list.iter().position(|a| a == alt)?;
                out.push(Choice::Alt { nonterminal: name.clone(), index: index as u32, leaf });
                for child in children {
                    walk(g, child, out)?;
                }
            }
        }
        Some(())
    }
    let mut out = Vec::new();
    walk(grammar, tree, &mut out)?;
    Some(ChoiceSequence(out))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::grammar::parse_grammar;

    fn b(m: u32, n: u32, d: u32) -> SizeBounds {
        SizeBounds::new(m, n, d).unwrap()
    }

    #[test]
    fn leaf_probability_values() {
        assert_eq!(leaf_probability(0, 3), 0.25);
        assert_eq!(leaf_probability(3, 3), 1.0);
        assert_eq!(leaf_probability(1, 1), 1.0);
    }

    #[test]
    fn bounds_validation_and_parsing() {
        assert!(SizeBounds::new(0, 1, 1).is_err());
        assert_eq!("1, 2,3".parse::<SizeBounds>().unwrap(), b(1, 2, 3));
        assert!("1,2".parse::<SizeBounds>().is_err());
        assert!("1,0,2".parse::<SizeBounds>().is_err());
    }

    #[test]
    fn single_forced_pick() {
        let g = parse_grammar(r#"start : "pass" ;"#).unwrap();
        let mut rng = prng(1);
        let s = sample(&g, b(3, 3, 3), &mut ChoiceSource::fresh(&mut rng)).unwrap();
        assert_eq!(s.text, "pass");
        assert_eq!(s.choices.0, vec![Choice::Alt { nonterminal: "start".into(), index: 0, leaf: true }]);
    }

    #[test]
    fn single_ident_pool() {
        let g = parse_grammar("%ident ID\nstart : ID \"=\" ID ;").unwrap();
        let mut rng = prng(2);
        for _ in 0..200 {
            let s = sample(&g, b(1, 1, 1), &mut ChoiceSource::fresh(&mut rng)).unwrap();
            assert_eq!(s.text, "a0 = a0");
        }
    }

    #[test]
    fn ident_pool_is_uniform() {
        // chi-squared, 2 degrees of freedom, 0.999 quantile = 13.82
        let g = parse_grammar("%ident ID\nstart : ID ;").unwrap();
        let mut rng = prng(3);
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        let draws = 10_000;
        for _ in 0..draws {
            let text =
                concretize_terminal(&g, &Symbol::Ident("ID".into()), b(3, 1, 1), &mut ChoiceSource::fresh(&mut rng))
                    .unwrap();
            *counts.entry(text).or_default() += 1;
        }
        assert_eq!(counts.keys().collect::<Vec<_>>(), ["a0", "a1", "a2"]);
        let expected = f64::from(draws) / 3.0;
        let chi2: f64 = counts.values().map(|&o| (f64::from(o) - expected).powi(2) / expected).sum();
        assert!(chi2 < 13.82, "chi2 = {chi2}");
    }

    #[test]
    fn fixed_terminal_concretizes_to_itself() {
        let g = parse_grammar(r#"start : "+" ;"#).unwrap();
        let mut rng = prng(0);
        let t = concretize_terminal(&g, &Symbol::Fixed("+".into()), b(2, 2, 2), &mut ChoiceSource::fresh(&mut rng))
            .unwrap();
        assert_eq!(t, "+");
    }

    #[test]
    fn repetition_counts_are_uniform() {
        // chi-squared, 3 degrees of freedom, 0.999 quantile = 16.27
        let g = parse_grammar(crate::grammars::TOY).unwrap();
        let mut rng = prng(4);
        let mut counts = [0u32; 4];
        for _ in 0..10_000 {
            let s = sample(&g, b(1, 3, 1), &mut ChoiceSource::fresh(&mut rng)).unwrap();
            let Choice::Rep(k) = s.choices.0[1] else { panic!() };
            counts[k as usize] += 1;
            assert_eq!(s.tree.measure().items, k);
        }
        let chi2: f64 = counts.iter().map(|&o| (f64::from(o) - 2500.0).powi(2) / 2500.0).sum();
        assert!(chi2 < 16.27, "chi2 = {chi2} counts = {counts:?}");
    }

    #[test]
    fn replayed_rep_count() {
        let g = parse_grammar(crate::grammars::TOY).unwrap();
        let seq =
            ChoiceSequence(vec![Choice::Alt { nonterminal: "start".into(), index: 0, leaf: false }, Choice::Rep(2)]);
        let mut rng = prng(0);
        let s = replay(&g, b(1, 3, 1), &seq, &mut rng).unwrap();
        assert_eq!(s.text, "pass pass");
    }

    #[test]
    fn replay_reproduces_and_renormalizes() {
        let g = parse_grammar(crate::grammars::MINILANG).unwrap();
        let mut rng = prng(5);
        for _ in 0..300 {
            let s = sample(&g, b(3, 3, 3), &mut ChoiceSource::fresh(&mut rng)).unwrap();
            let mut other = prng(99);
            let again = replay(&g, b(3, 3, 3), &s.choices, &mut other).unwrap();
            assert_eq!(again, s);
            // Under smaller bounds the replay is still legal.
            let small = replay(&g, b(1, 1, 1), &s.choices, &mut other).unwrap();
            assert!(b(1, 1, 1).admits(&small.tree.measure()));
        }
    }

    #[test]
    fn recorded_values_are_in_range() {
        let g = parse_grammar(crate::grammars::MINILANG).unwrap();
        let mut rng = prng(6);
        let bounds = b(2, 3, 2);
        for _ in 0..300 {
            let s = sample(&g, bounds, &mut ChoiceSource::fresh(&mut rng)).unwrap();
            for c in s.choices.iter() {
                match c {
                    Choice::Rep(v) => assert!(*v <= bounds.n),
                    Choice::Ident { index, .. } => assert!(*index < bounds.m),
                    Choice::Alt { nonterminal, index, leaf } => {
                        let r = g.rule_index(nonterminal).unwrap();
                        let len = if *leaf { g.t_alt_indices(r).len() } else { g.nt_alt_indices(r).len() };
                        assert!((*index as usize) < len);
                    }
                    Choice::Coin(_) => {}
                }
            }
        }
    }

    #[test]
    fn choice_json_shape() {
        let seq = ChoiceSequence(vec![
            Choice::Coin(true),
            Choice::Alt { nonterminal: "stmt".into(), index: 2, leaf: false },
            Choice::Rep(3),
            Choice::Ident { class: "ID".into(), index: 1 },
        ]);
        let json = seq.to_json();
        assert_eq!(json, r#"[["coin",true],["alt","stmt",2,false],["rep",3],["ident","ID",1]]"#);
        assert_eq!(ChoiceSequence::from_json(&json).unwrap(), seq);
        assert!(ChoiceSequence::from_json(r#"[["rep"]]"#).is_err());
        assert!(ChoiceSequence::from_json(r#"[["nope",1]]"#).is_err());
    }

    #[test]
    fn fresh_choice_differs_when_possible() {
        let g = parse_grammar(crate::grammars::MINILANG).unwrap();
        let mut rng = prng(7);
        let bounds = b(3, 3, 3);
        for _ in 0..200 {
            let c = Choice::Rep(1);
            assert_ne!(fresh_choice(&g, bounds, &c, &mut rng), c);
            let c = Choice::Ident { class: "ID".into(), index: 2 };
            let Choice::Ident { index, .. } = fresh_choice(&g, bounds, &c, &mut rng) else { panic!() };
            assert!(index < 2);
        }
        let single = Choice::Ident { class: "ID".into(), index: 0 };
        assert_eq!(fresh_choice(&g, b(1, 1, 1), &single, &mut rng), single);
    }

    #[test]
    fn choices_are_recoverable_from_trees() {
        let g = parse_grammar(crate::grammars::MINILANG).unwrap();
        let mut rng = prng(12);
        for _ in 0..300 {
            let b = SizeBounds::new(3, 3, 3).unwrap();
            let s = sample(&g, b, &mut ChoiceSource::fresh(&mut rng)).unwrap();
            assert_eq!(choices_of(&g, &s.tree).as_ref(), Some(&s.choices));
        }
    }
}
