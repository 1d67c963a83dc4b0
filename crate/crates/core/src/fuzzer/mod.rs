//! Coverage-guided bounded grammar fuzzing.
//!
//! A run executes its seeds, then repeatedly takes corpus members in
//! order, mutates their choice sequences under the run's bounds and keeps
//! children whose feedback is interesting.

mod corpus;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use corpus::{Clause, Corpus, Provenance, SavedInput};

use crate::grammar::Grammar;
use crate::sampler::{self, prng, ChoiceSequence, ChoiceSource, Prng, Sample, SampleError, SizeBounds};
use crate::targets::{BranchSet, ExecutionFeedback, Target};

/// Mutation children per parent per cycle unless configured otherwise.
pub const DEFAULT_FANOUT: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValidityMode {
    /// Saves valid inputs only.
    #[serde(rename = "r")]
    Restricted,
    /// Also saves invalid inputs with new coverage.
    #[serde(rename = "u")]
    Unrestricted,
}

impl std::fmt::Display for ValidityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ValidityMode::Restricted => "r",
            ValidityMode::Unrestricted => "u",
        })
    }
}

impl std::str::FromStr for ValidityMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r" | "restricted" => Ok(ValidityMode::Restricted),
            "u" | "unrestricted" => Ok(ValidityMode::Unrestricted),
            _ => Err(format!("validity mode must be `r` or `u`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzerConfig {
    pub bounds: SizeBounds,
    pub mode: ValidityMode,
    /// Target executions allowed, seed executions included. Seeds are
    /// always executed, even past the budget.
    pub budget: u64,
    pub seed: u64,
    #[serde(default = "default_fanout")]
    pub fanout: u32,
    /// Stop after this many executions without an admission.
    #[serde(default)]
    pub stop_on_stagnation: Option<u64>,
}

fn default_fanout() -> u32 {
    DEFAULT_FANOUT
}

impl FuzzerConfig {
    pub fn new(bounds: SizeBounds, mode: ValidityMode, budget: u64, seed: u64) -> Self {
        FuzzerConfig { bounds, mode, budget, seed, fanout: DEFAULT_FANOUT, stop_on_stagnation: None }
    }

    pub fn provenance(&self) -> Provenance {
        Provenance { bounds: self.bounds, mode: self.mode }
    }
}

/// Characters not counted in input sizes.
pub fn is_size_whitespace(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\n' | '\r')
}

pub fn size_excluding_whitespace(text: &str) -> usize {
    text.chars().filter(|c| !is_size_whitespace(*c)).count()
}

/// The clause admitting `fb` into `corpus` and the branches it adds, or
/// `None` if it is not interesting. The valid clause is checked first.
pub fn admission(fb: &ExecutionFeedback, corpus: &Corpus, mode: ValidityMode) -> Option<(Clause, BranchSet)> {
    if fb.valid && !fb.coverage.is_subset(corpus.valid_coverage()) {
        return Some((Clause::Valid, fb.coverage.difference(corpus.valid_coverage())));
    }
    if mode == ValidityMode::Unrestricted && !fb.coverage.is_subset(corpus.coverage()) {
        return Some((Clause::Any, fb.coverage.difference(corpus.coverage())));
    }
    None
}

pub fn is_interesting(fb: &ExecutionFeedback, corpus: &Corpus, mode: ValidityMode) -> bool {
    admission(fb, corpus, mode).is_some()
}

/// Number of positions to mutate: geometric on `1..` with mean 2.
fn mutation_count(rng: &mut Prng, len: usize) -> usize {
    let mut k = 1;
    while k < len && rng.random_bool(0.5) {
        k += 1;
    }
    k.min(len)
}

/// Point-mutates `choices` at `k >= 1` distinct positions and replays the
/// result under `bounds`. An empty sequence yields a fresh sample.
pub fn mutate(
    choices: &ChoiceSequence,
    grammar: &Grammar,
    bounds: SizeBounds,
    rng: &mut Prng,
) -> Result<Sample, SampleError> {
    if choices.is_empty() {
        return sampler::sample(grammar, bounds, &mut ChoiceSource::fresh(rng));
    }
    let k = mutation_count(rng, choices.len());
    let mut mutated = choices.clone();
    for pos in rand::seq::index::sample(rng, choices.len(), k) {
        mutated.0[pos] = sampler::fresh_choice(grammar, bounds, &choices.0[pos], rng);
    }
    sampler::replay(grammar, bounds, &mutated, rng)
}

/// Runs one fuzzer. `seeds` are executed in order; members that are not
/// admitted still serve as mutation parents during the first cycle.
pub fn cbgf_run(target: &dyn Target, grammar: &Grammar, cfg: &FuzzerConfig, seeds: &[SavedInput]) -> Corpus {
    let mut rng = prng(cfg.seed);
    let mut corpus = Corpus::new();
    let provenance = cfg.provenance();
    let mut since_admission: u64 = 0;

    let consider = |corpus: &mut Corpus,
                    text: String,
                    choices: ChoiceSequence,
                    fb: ExecutionFeedback,
                    provenance: Provenance|
     -> bool {
        if corpus.contains_text(&text) {
            return false;
        }
        let Some((clause, novel)) = admission(&fb, corpus, cfg.mode) else {
            return false;
        };
        corpus.push(SavedInput::new(text, choices, fb, provenance, novel, clause))
    };

    for seed in seeds {
        let fb = target.execute(&seed.text);
        corpus.executions += 1;
        consider(&mut corpus, seed.text.clone(), seed.choices.clone(), fb, seed.provenance);
    }

    let mut cycle: Vec<ChoiceSequence> = seeds.iter().map(|s| s.choices.clone()).collect();
    let mut cursor = 0;
    while corpus.executions < cfg.budget {
        if cfg.stop_on_stagnation.is_some_and(|limit| since_admission >= limit) {
            break;
        }
        if cursor >= cycle.len() {
            cycle = corpus.inputs().iter().map(|s| s.choices.clone()).collect();
            cursor = 0;
        }
        let parent = cycle.get(cursor).cloned();
        cursor += 1;
        let children = if parent.is_some() { cfg.fanout.max(1) } else { 1 };
        for _ in 0..children {
            if corpus.executions >= cfg.budget {
                break;
            }
            let child = match &parent {
                Some(p) => mutate(p, grammar, cfg.bounds, &mut rng),
                None => sampler::sample(grammar, cfg.bounds, &mut ChoiceSource::fresh(&mut rng)),
            };
            let child = match child {
                Ok(c) => c,
                Err(e) => {
                    corpus.failure = Some(format!("sampler failed under {}: {e}", cfg.bounds));
                    return corpus;
                }
            };
            let fb = target.execute(&child.text);
            corpus.executions += 1;
            let choices = child.choices.clone();
            if consider(&mut corpus, child.text, child.choices, fb, provenance) {
                since_admission = 0;
                cycle.push(choices);
            } else {
                since_admission += 1;
            }
        }
    }
    corpus
}

/// One random input sampled at `cfg.bounds`, for bootstrapping a run
/// without seeds.
pub fn random_seed(
    target: &dyn Target,
    grammar: &Grammar,
    cfg: &FuzzerConfig,
    seed: u64,
) -> Result<SavedInput, SampleError> {
    let mut rng = prng(seed);
    let s = sampler::sample(grammar, cfg.bounds, &mut ChoiceSource::fresh(&mut rng))?;
    let fb = target.execute(&s.text);
    let novel = fb.coverage.clone();
    let clause = if fb.valid { Clause::Valid } else { Clause::Any };
    Ok(SavedInput::new(s.text, s.choices, fb, cfg.provenance(), novel, clause))
}
