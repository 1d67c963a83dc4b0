//! A small statically typed language with classes, functions, lists and
//! block statements. An input is valid when it lexes, parses and
//! typechecks without errors.

mod check;
mod syntax;

use std::ops::Range;

use super::{Cov, ExecutionFeedback, Target};
use crate::grammar::{parse_grammar, Grammar};

pub struct MiniLang {
    grammar: Grammar,
}

impl MiniLang {
    pub fn new() -> Self {
        Self::with_grammar(parse_grammar(crate::grammars::MINILANG).expect("bundled grammar parses"))
    }

    pub fn with_grammar(grammar: Grammar) -> Self {
        MiniLang { grammar }
    }
}

impl Default for MiniLang {
    fn default() -> Self {
        Self::new()
    }
}

impl Target for MiniLang {
    fn name(&self) -> &str {
        "minilang"
    }

    fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    fn execute(&self, input: &str) -> ExecutionFeedback {
        let mut cov = Cov::default();
        let toks = match syntax::lex(input, &mut cov) {
            Ok(t) => t,
            Err(e) => return cov.finish(false, format!("lex error: {e}")),
        };
        let tops = match syntax::Parser::new(toks, &mut cov).program() {
            Ok(t) => t,
            Err(e) => return cov.finish(false, format!("parse error: {e}")),
        };
        let mut checker = check::Checker::new(&mut cov);
        checker.program(&tops);
        let errors = std::mem::take(&mut checker.errors);
        match errors.first() {
            None => cov.finish(true, ""),
            Some(first) => cov.finish(false, format!("type error: {first}")),
        }
    }

    fn total_branches(&self) -> u32 {
        check::TOTAL
    }

    fn semantic_branches(&self) -> Option<Range<u32>> {
        Some(check::FIRST..check::TOTAL)
    }
}
