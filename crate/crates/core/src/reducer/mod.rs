//! Test-input reduction: delta debugging over characters and over the
//! repetitions and subtrees of a parsed derivation tree.

mod parse;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use parse::{parse_input, tokenize, ParseError};

use crate::fuzzer::{size_excluding_whitespace, Clause, Corpus, SavedInput};
use crate::grammar::{DerivationTree, Grammar, IdentKind, Symbol};
use crate::sampler::choices_of;
use crate::targets::{ExecutionFeedback, Target};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReduceError {
    #[error("predicate does not hold for the original input")]
    NotInteresting,
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Minimizes `items` under `test`, which must accept `items` itself.
/// The result is 1-minimal: dropping any single remaining element makes
/// `test` fail. The empty list is tried first.
pub fn ddmin<T: Clone>(items: &[T], mut test: impl FnMut(&[T]) -> bool) -> Vec<T> {
    let mut failed: HashSet<Vec<usize>> = HashSet::new();
    let mut eval = |idx: &[usize], test: &mut dyn FnMut(&[T]) -> bool| -> bool {
        if failed.contains(idx) {
            return false;
        }
        let candidate: Vec<T> = idx.iter().map(|&i| items[i].clone()).collect();
        let ok = test(&candidate);
        if !ok {
            failed.insert(idx.to_vec());
        }
        ok
    };
    if items.is_empty() || eval(&[], &mut test) {
        return Vec::new();
    }
    let mut cur: Vec<usize> = (0..items.len()).collect();
    let mut n = 2usize;
    while cur.len() >= 2 {
        let n_eff = n.min(cur.len());
        let chunks: Vec<Vec<usize>> =
            (0..n_eff).map(|i| cur[i * cur.len() / n_eff..(i + 1) * cur.len() / n_eff].to_vec()).collect();
        let mut next = None;
        for c in &chunks {
            if eval(c, &mut test) {
                next = Some((c.clone(), 2));
                break;
            }
        }
        if next.is_none() && n_eff > 2 {
            for i in 0..n_eff {
                let comp: Vec<usize> =
                    chunks.iter().enumerate().filter(|(j, _)| *j != i).flat_map(|(_, c)| c.iter().copied()).collect();
                if eval(&comp, &mut test) {
                    next = Some((comp, (n_eff - 1).max(2)));
                    break;
                }
            }
        }
        match next {
            Some((c, k)) => {
                cur = c;
                n = k;
            }
            None if n_eff >= cur.len() => break,
            None => n = (n_eff * 2).min(cur.len()),
        }
    }
    cur.into_iter().map(|i| items[i].clone()).collect()
}

/// Character-level ddmin. The result is a subsequence of `input`.
pub fn ddmin_text(input: &str, mut p: impl FnMut(&str) -> bool) -> Result<String, ReduceError> {
    if !p(input) {
        return Err(ReduceError::NotInteresting);
    }
    let chars: Vec<char> = input.chars().collect();
    let mut cache: HashMap<String, bool> = HashMap::new();
    let out = ddmin(&chars, |c| {
        let s: String = c.iter().collect();
        *cache.entry(s).or_insert_with_key(|s| p(s))
    });
    Ok(out.into_iter().collect())
}

/// The smallest derivation of each nonterminal, with identifiers at pool
/// index 0 and repetitions empty.
#[derive(Debug, Clone)]
pub struct MinimalExpansions {
    trees: Vec<DerivationTree>,
}

impl MinimalExpansions {
    pub fn new(grammar: &Grammar) -> Self {
        let rules = grammar.rules();
        let ident_len = |class: &str| {
            grammar.ident_class(class).map_or(1, |c| match &c.kind {
                IdentKind::Word { prefix } => prefix.len() + 1,
                IdentKind::Quoted { prefix } => prefix.len() + 3,
            })
        };
        // (size, height) per rule, improved to a fixpoint; the height keeps
        // the chosen alternatives acyclic.
        let mut best: Vec<Option<(usize, usize, usize)>> = vec![None; rules.len()];
        fn cost(
            grammar: &Grammar,
            syms: &[Symbol],
            best: &[Option<(usize, usize, usize)>],
            ident_len: &dyn Fn(&str) -> usize,
        ) -> Option<(usize, usize)> {
            let mut size = 0;
            let mut height = 0;
            for s in syms {
                match s {
                    Symbol::Fixed(t) => size += size_excluding_whitespace(t),
                    Symbol::Ident(c) => size += ident_len(c),
                    Symbol::Repetition(_) => {}
                    Symbol::NonTerminal(n) => {
                        let (s, h, _) = best[grammar.rule_index(n)?]?;
                        size += s;
                        height = height.max(h);
                    }
                }
            }
            Some((size, height + 1))
        }
        loop {
            let mut changed = false;
            for (r, rule) in rules.iter().enumerate() {
                for (a, alt) in rule.alternatives.iter().enumerate() {
                    if let Some((s, h)) = cost(grammar, alt, &best, &ident_len) {
                        if best[r].is_none_or(|(bs, bh, _)| (s, h) < (bs, bh)) {
                            best[r] = Some((s, h, a));
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        fn build(grammar: &Grammar, sym: &Symbol, best: &[Option<(usize, usize, usize)>]) -> DerivationTree {
            match sym {
                Symbol::Fixed(t) => DerivationTree::Fixed(t.clone()),
                Symbol::Ident(c) => DerivationTree::Ident {
                    class: c.clone(),
                    index: 0,
                    text: grammar.ident_class(c).map_or_else(String::new, |ic| ic.spell(0)),
                },
                Symbol::Repetition(_) => DerivationTree::Repetition { items: Vec::new() },
                Symbol::NonTerminal(n) => {
                    let r = grammar.rule_index(n).expect("validated grammar");
                    let (_, _, alt) = best[r].expect("productive grammar");
                    DerivationTree::NonTerminal {
                        name: n.clone(),
                        alt,
                        children: grammar.rule_at(r).alternatives[alt]
                            .iter()
                            .map(|s| build(grammar, s, best))
                            .collect(),
                    }
                }
            }
        }
        let trees = rules.iter().map(|r| build(grammar, &Symbol::NonTerminal(r.name.clone()), &best)).collect();
        MinimalExpansions { trees }
    }

    pub fn get(&self, grammar: &Grammar, nonterminal: &str) -> Option<&DerivationTree> {
        self.trees.get(grammar.rule_index(nonterminal)?)
    }
}

fn tree_size(tree: &DerivationTree) -> usize {
    tree.leaves().iter().map(|l| size_excluding_whitespace(l)).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassTrace {
    pub pass: usize,
    pub size_after: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierOutcome {
    pub text: String,
    pub tree: DerivationTree,
    pub evaluations: usize,
    pub passes: Vec<PassTrace>,
}

/// Grammar-aware reduction. Repeats until nothing changes: ddmin over the
/// items of each repetition, then replacement of each nonterminal subtree
/// by its minimal expansion. Every candidate is a derivation of `grammar`.
pub fn hier_reduce(
    input: &str,
    grammar: &Grammar,
    minimal: &MinimalExpansions,
    mut p: impl FnMut(&str) -> bool,
) -> Result<HierOutcome, ReduceError> {
    let mut tree = parse_input(grammar, input)?;
    let mut cache: HashMap<String, bool> = HashMap::new();
    let mut evaluations = 0;
    let mut check = |text: String| -> bool {
        *cache.entry(text).or_insert_with_key(|t| {
            evaluations += 1;
            p(t)
        })
    };
    if !check(input.to_owned()) {
        return Err(ReduceError::NotInteresting);
    }
    let mut text = tree.linearize(grammar);
    if !check(text.clone()) {
        // The canonical spacing changed the outcome; leave the input alone.
        return Ok(HierOutcome { text: input.to_owned(), tree, evaluations, passes: Vec::new() });
    }
    let mut passes = Vec::new();
    for pass in 1.. {
        let mut accepted = 0;
        let mut k = 0;
        let mut paths = tree.preorder_paths();
        while k < paths.len() {
            let path = &paths[k];
            let node = tree.at(path).expect("live path").clone();
            let replacement = match &node {
                DerivationTree::Repetition { items } if !items.is_empty() => {
                    let kept = ddmin(items, |cand| {
                        let mut t = tree.clone();
                        *t.at_mut(path).expect("live path") = DerivationTree::Repetition { items: cand.to_vec() };
                        check(t.linearize(grammar))
                    });
                    (kept.len() < items.len()).then_some(DerivationTree::Repetition { items: kept })
                }
                DerivationTree::NonTerminal { name, .. } => minimal.get(grammar, name).and_then(|m| {
                    if tree_size(m) >= tree_size(&node) || *m == node {
                        return None;
                    }
                    let mut t = tree.clone();
                    *t.at_mut(path).expect("live path") = m.clone();
                    check(t.linearize(grammar)).then(|| m.clone())
                }),
                _ => None,
            };
            if let Some(r) = replacement {
                *tree.at_mut(path).expect("live path") = r;
                accepted += 1;
                paths = tree.preorder_paths();
            }
            k += 1;
        }
        text = tree.linearize(grammar);
        passes.push(PassTrace { pass, size_after: size_excluding_whitespace(&text), accepted });
        if accepted == 0 {
            break;
        }
    }
    Ok(HierOutcome { text, tree, evaluations, passes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReduceMode {
    Char,
    Hier,
}

impl std::str::FromStr for ReduceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "char" => Ok(ReduceMode::Char),
            "hier" => Ok(ReduceMode::Hier),
            _ => Err(format!("reduction mode must be `char` or `hier`, got `{s}`")),
        }
    }
}

/// What a reduced candidate must preserve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// The branches that were new when the member was admitted, plus
    /// validity if it was admitted for being valid.
    #[default]
    Novel,
    /// The member's whole coverage, plus validity if it was admitted for
    /// being valid.
    Full,
}

/// Whether `fb` still earns `member` its place under `criterion`.
pub fn preserves(member: &SavedInput, fb: &ExecutionFeedback, criterion: Criterion) -> bool {
    let required = match criterion {
        Criterion::Novel => &member.novel,
        Criterion::Full => &member.feedback.coverage,
    };
    (member.clause == Clause::Any || fb.valid) && required.is_subset(&fb.coverage)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberReport {
    pub index: usize,
    pub original_size: usize,
    pub reduced_size: usize,
    pub evaluations: usize,
    pub passes: Vec<PassTrace>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub mode: ReduceMode,
    pub criterion: Criterion,
    pub original_size: usize,
    pub reduced_size: usize,
    pub evaluations: usize,
    pub members: Vec<MemberReport>,
}

/// Reduces every member independently; a member that fails to reduce is
/// kept as it was. Members keep their order and metadata, with feedback
/// recomputed for the reduced text.
pub fn reduce_corpus(
    corpus: &Corpus,
    target: &dyn Target,
    mode: ReduceMode,
    criterion: Criterion,
) -> (Corpus, ReductionReport) {
    let grammar = target.grammar();
    let minimal = MinimalExpansions::new(grammar);
    let results: Vec<(SavedInput, MemberReport)> = corpus
        .inputs()
        .par_iter()
        .enumerate()
        .map(|(index, member)| {
            let p = |cand: &str| preserves(member, &target.execute(cand), criterion);
            let outcome = match mode {
                ReduceMode::Char => {
                    let mut evaluations = 0;
                    ddmin_text(&member.text, |c| {
                        evaluations += 1;
                        p(c)
                    })
                    .map(|text| {
                        let size = size_excluding_whitespace(&text);
                        let passes =
                            vec![PassTrace { pass: 1, size_after: size, accepted: usize::from(text != member.text) }];
                        let tree = parse_input(grammar, &text).ok();
                        (text, tree, evaluations, passes)
                    })
                }
                ReduceMode::Hier => hier_reduce(&member.text, grammar, &minimal, p)
                    .map(|o| (o.text, Some(o.tree), o.evaluations, o.passes)),
            };
            let mut report = MemberReport {
                index,
                original_size: member.size,
                reduced_size: member.size,
                evaluations: 0,
                passes: Vec::new(),
                error: None,
            };
            match outcome {
                Ok((text, tree, evaluations, passes)) => {
                    let mut reduced = member.clone();
                    if text != member.text {
                        reduced.choices = tree.and_then(|t| choices_of(grammar, &t)).unwrap_or_default();
                        reduced.feedback = target.execute(&text);
                        reduced.size = size_excluding_whitespace(&text);
                        reduced.text = text;
                    }
                    report.reduced_size = reduced.size;
                    report.evaluations = evaluations;
                    report.passes = passes;
                    (reduced, report)
                }
                Err(e) => {
                    report.error = Some(e.to_string());
                    (member.clone(), report)
                }
            }
        })
        .collect();
    let (inputs, members): (Vec<SavedInput>, Vec<MemberReport>) = results.into_iter().unzip();
    let report = ReductionReport {
        mode,
        criterion,
        original_size: members.iter().map(|m| m.original_size).sum(),
        reduced_size: members.iter().map(|m| m.reduced_size).sum(),
        evaluations: members.iter().map(|m| m.evaluations).sum(),
        members,
    };
    let mut out = Corpus::from_inputs(inputs);
    out.executions = corpus.executions;
    out.failure = corpus.failure.clone();
    (out, report)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::fuzzer::{cbgf_run, random_seed, FuzzerConfig, ValidityMode};
    use crate::grammar::parse_grammar;
    use crate::sampler::SizeBounds;
    use crate::targets::MiniLang;

    fn contains_1_and_8(s: &str) -> bool {
        s.contains('1') && s.contains('8')
    }

    #[test]
    fn ddmin_fixture() {
        assert_eq!(ddmin_text("12345678", contains_1_and_8).unwrap(), "18");
    }

    #[test]
    fn ddmin_edge_cases() {
        assert_eq!(ddmin_text("abc", |s| !s.is_empty()).unwrap().chars().count(), 1);
        assert_eq!(ddmin_text("abc", |s| s == "abc").unwrap(), "abc");
        assert_eq!(ddmin_text("abc", |_| true).unwrap(), "");
        assert_eq!(ddmin_text("abc", |s| s.len() > 5), Err(ReduceError::NotInteresting));
    }

    fn is_subsequence(small: &str, big: &str) -> bool {
        let mut it = big.chars();
        small.chars().all(|c| it.any(|b| b == c))
    }

    proptest! {
        #[test]
        fn ddmin_is_one_minimal(input in "[a-e]{0,12}", needles in proptest::collection::vec("[a-e]{1,2}", 1..3)) {
            let p = |s: &str| needles.iter().all(|n| s.contains(n.as_str()));
            prop_assume!(p(&input));
            let out = ddmin_text(&input, p).unwrap();
            prop_assert!(p(&out));
            prop_assert!(is_subsequence(&out, &input));
            let chars: Vec<char> = out.chars().collect();
            for i in 0..chars.len() {
                let mut c = chars.clone();
                c.remove(i);
                let s: String = c.into_iter().collect();
                prop_assert!(!p(&s), "{out:?} minus {i} still passes");
            }
        }
    }

    #[test]
    fn minimal_expansions_of_minilang() {
        let g = parse_grammar(crate::grammars::MINILANG).unwrap();
        let m = MinimalExpansions::new(&g);
        let lin = |n: &str| m.get(&g, n).unwrap().linearize(&g);
        assert_eq!(lin("stmt"), "0");
        assert_eq!(lin("program"), "");
        assert_eq!(lin("expr"), "0");
        assert_eq!(lin("funcdef"), "def a0()-> a0 { }");
        assert_eq!(lin("type"), "a0");
    }

    #[test]
    fn hier_reduces_pass_pass() {
        let t = MiniLang::new();
        let g = t.grammar();
        let m = MinimalExpansions::new(g);
        let wanted = t.execute("pass").coverage;
        let p = |s: &str| {
            let fb = t.execute(s);
            fb.valid && wanted.is_subset(&fb.coverage)
        };
        let out = hier_reduce("pass pass", g, &m, p).unwrap();
        assert_eq!(out.text, "pass");
        // Brute force: no small program satisfying p is smaller.
        let mut rng = crate::sampler::prng(0);
        let best = (0..10_000)
            .filter_map(|_| {
                let b = SizeBounds::new(1, 2, 1).unwrap();
                let s = crate::sampler::sample(g, b, &mut crate::sampler::ChoiceSource::fresh(&mut rng)).unwrap();
                p(&s.text).then(|| size_excluding_whitespace(&s.text))
            })
            .min();
        assert_eq!(best, Some(4));
        let unchanged = hier_reduce("pass", g, &m, p).unwrap();
        assert_eq!(unchanged.text, "pass");
        assert_eq!(unchanged.passes.len(), 1);
    }

    #[test]
    fn hier_candidates_always_parse() {
        let t = MiniLang::new();
        let g = t.grammar().clone();
        let m = MinimalExpansions::new(&g);
        let cfg = FuzzerConfig::new(SizeBounds::new(3, 3, 3).unwrap(), ValidityMode::Unrestricted, 2000, 3);
        let seed = random_seed(&t, &g, &cfg, 3).unwrap();
        let corpus = cbgf_run(&t, &g, &cfg, &[seed]);
        for member in corpus.inputs().iter().take(20) {
            let out = hier_reduce(&member.text, &g, &m, |c| {
                assert!(parse_input(&g, c).is_ok(), "candidate does not parse: {c}");
                preserves(member, &t.execute(c), Criterion::Novel)
            })
            .unwrap();
            assert!(preserves(member, &t.execute(&out.text), Criterion::Novel));
            assert!(size_excluding_whitespace(&out.text) <= member.size);
        }
    }

    #[test]
    fn reduce_corpus_shrinks_and_is_deterministic() {
        let t = MiniLang::new();
        let g = t.grammar().clone();
        let cfg = FuzzerConfig::new(SizeBounds::new(3, 3, 3).unwrap(), ValidityMode::Unrestricted, 3000, 5);
        let seed = random_seed(&t, &g, &cfg, 5).unwrap();
        let corpus = cbgf_run(&t, &g, &cfg, &[seed]);
        let (hier, report) = reduce_corpus(&corpus, &t, ReduceMode::Hier, Criterion::Novel);
        assert!(report.reduced_size < report.original_size);
        assert_eq!(hier.len(), corpus.len());
        let (again, _) = reduce_corpus(&corpus, &t, ReduceMode::Hier, Criterion::Novel);
        assert_eq!(hier, again);
        for (r, o) in hier.inputs().iter().zip(corpus.inputs()) {
            assert!(preserves(o, &r.feedback, Criterion::Novel));
            if !r.choices.is_empty() {
                let replayed = crate::sampler::replay(
                    &g,
                    SizeBounds::new(9, 9, 9).unwrap(),
                    &r.choices,
                    &mut crate::sampler::prng(0),
                )
                .unwrap();
                assert_eq!(replayed.text, r.text);
            }
        }
        let (chars, creport) = reduce_corpus(&corpus.clone(), &t, ReduceMode::Char, Criterion::Novel);
        for (r, o) in chars.inputs().iter().zip(corpus.inputs()) {
            assert!(r.size <= o.size);
        }
        assert!(creport.members.iter().all(|m| m.reduced_size <= m.original_size));
    }

    #[test]
    fn minimal_corpus_is_unchanged() {
        let t = MiniLang::new();
        let g = t.grammar().clone();
        let cfg = FuzzerConfig::new(SizeBounds::new(1, 1, 1).unwrap(), ValidityMode::Restricted, 1, 1);
        let mut seed = random_seed(&t, &g, &cfg, 1).unwrap();
        seed.text = "pass".into();
        seed.feedback = t.execute("pass");
        seed.novel = seed.feedback.coverage.clone();
        seed.clause = Clause::Valid;
        seed.size = 4;
        let corpus = Corpus::from_inputs([seed]);
        let (out, report) = reduce_corpus(&corpus, &t, ReduceMode::Hier, Criterion::Novel);
        assert_eq!(out.inputs()[0].text, "pass");
        assert_eq!(report.original_size, report.reduced_size);
    }
}
