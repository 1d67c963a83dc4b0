//! Instrumented test programs.
//!
//! A target maps input text to [`ExecutionFeedback`]: whether the input was
//! semantically valid and which branch points it exercised. Built-in
//! targets mark their branch arms with explicit `hit(id)` calls.

mod arith;
mod branch;
mod external;
pub mod minilang;

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use arith::Arith;
pub use branch::BranchSet;
pub use external::ExternalTarget;
pub use minilang::MiniLang;

use crate::grammar::{Grammar, GrammarError};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExecutionFeedback {
    pub valid: bool,
    pub coverage: BranchSet,
    #[serde(default)]
    pub note: String,
}

pub trait Target: Send + Sync {
    fn name(&self) -> &str;

    fn grammar(&self) -> &Grammar;

    fn execute(&self, input: &str) -> ExecutionFeedback;

    /// Branch identifiers lie in `0..total_branches()`.
    fn total_branches(&self) -> u32;

    /// The identifiers belonging to semantic analysis, for targets that
    /// distinguish it from lexing and parsing.
    fn semantic_branches(&self) -> Option<Range<u32>> {
        None
    }
}

/// Records hit branch points during one execution.
#[derive(Debug, Default)]
pub struct Cov {
    hits: BranchSet,
}

impl Cov {
    #[inline]
    pub fn hit(&mut self, id: u32) {
        self.hits.insert(id);
    }

    /// Records `yes` when `cond` holds and `no` otherwise; returns `cond`.
    #[inline]
    pub fn branch(&mut self, cond: bool, yes: u32, no: u32) -> bool {
        self.hit(if cond { yes } else { no });
        cond
    }

    pub fn finish(self, valid: bool, note: impl Into<String>) -> ExecutionFeedback {
        ExecutionFeedback { valid, coverage: self.hits, note: note.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TargetError {
    #[error("unknown target `{0}` (expected minilang, arith or ext:<command>)")]
    Unknown(String),
    #[error("external target needs a grammar")]
    MissingGrammar,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("external target: {0}")]
    Io(#[from] std::io::Error),
}

/// Resolves a target by name. `ext:<command>` starts an out-of-process
/// target speaking the line protocol of [`ExternalTarget`] and requires a
/// grammar.
pub fn resolve(name: &str, grammar: Option<Grammar>) -> Result<Arc<dyn Target>, TargetError> {
    match name {
        "minilang" => Ok(Arc::new(match grammar {
            Some(g) => MiniLang::with_grammar(g),
            None => MiniLang::new(),
        })),
        "arith" => Ok(Arc::new(match grammar {
            Some(g) => Arith::with_grammar(g),
            None => Arith::new(),
        })),
        other => match other.strip_prefix("ext:") {
            Some(cmd) => {
                let grammar = grammar.ok_or(TargetError::MissingGrammar)?;
                let argv: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
                Ok(Arc::new(ExternalTarget::new(argv, grammar, 1024)?))
            }
            None => Err(TargetError::Unknown(other.to_owned())),
        },
    }
}
