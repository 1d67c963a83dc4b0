//! Integer arithmetic evaluator. Valid means the expression evaluates
//! without division by zero or overflow.

use super::{Cov, ExecutionFeedback, Target};
use crate::grammar::{parse_grammar, Grammar};

const TOTAL: u32 = 26;
/// Branches in this range belong to evaluation rather than lexing and
/// parsing.
const EVAL: std::ops::Range<u32> = 14..23;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(i64),
    Op(char),
    LParen,
    RParen,
}

fn lex(input: &str, cov: &mut Cov) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let mut chars = input.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            cov.hit(0);
            chars.next();
        } else if c.is_ascii_digit() {
            cov.hit(1);
            let mut v: i64 = 0;
            while let Some(&d) = chars.peek() {
                let Some(digit) = d.to_digit(10) else { break };
                v = match v.checked_mul(10).and_then(|v| v.checked_add(i64::from(digit))) {
                    Some(v) => v,
                    None => {
                        cov.hit(5);
                        return Err("integer literal too large".into());
                    }
                };
                chars.next();
            }
            out.push(Tok::Num(v));
        } else if "+-*/".contains(c) {
            cov.hit(2);
            out.push(Tok::Op(c));
            chars.next();
        } else if c == '(' || c == ')' {
            cov.hit(3);
            out.push(if c == '(' { Tok::LParen } else { Tok::RParen });
            chars.next();
        } else {
            cov.hit(4);
            return Err(format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

struct Eval<'c> {
    toks: Vec<Tok>,
    pos: usize,
    cov: &'c mut Cov,
}

impl Eval<'_> {
    fn peek(&self) -> Option<Tok> {
        self.toks.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<i64, String> {
        self.cov.hit(6);
        let mut acc = self.product()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek() {
            self.cov.hit(7);
            self.pos += 1;
            let rhs = self.product()?;
            acc = if op == '+' {
                self.cov.hit(16);
                acc.checked_add(rhs)
            } else {
                self.cov.hit(17);
                acc.checked_sub(rhs)
            }
            .ok_or_else(|| self.overflow())?;
        }
        self.cov.hit(8);
        Ok(acc)
    }

    fn product(&mut self) -> Result<i64, String> {
        let mut acc = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek() {
            self.cov.hit(9);
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if op == '*' {
                self.cov.hit(18);
                acc.checked_mul(rhs).ok_or_else(|| self.overflow())?
            } else if rhs == 0 {
                self.cov.hit(20);
                return Err("division by zero".into());
            } else {
                self.cov.hit(19);
                acc.checked_div(rhs).ok_or_else(|| self.overflow())?
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<i64, String> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.cov.hit(10);
                self.pos += 1;
                let v = self.unary()?;
                self.cov.hit(22);
                v.checked_neg().ok_or_else(|| self.overflow())
            }
            Some(Tok::Num(v)) => {
                self.cov.hit(11);
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::LParen) => {
                self.cov.hit(12);
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() == Some(Tok::RParen) {
                    self.cov.hit(23);
                    self.pos += 1;
                    Ok(v)
                } else {
                    self.cov.hit(13);
                    Err("expected `)`".into())
                }
            }
            _ => {
                self.cov.hit(24);
                Err("expected a term".into())
            }
        }
    }

    fn overflow(&mut self) -> String {
        self.cov.hit(21);
        "arithmetic overflow".into()
    }
}

pub struct Arith {
    grammar: Grammar,
}

impl Arith {
    pub fn new() -> Self {
        Self::with_grammar(parse_grammar(crate::grammars::ARITH).expect("bundled grammar parses"))
    }

    pub fn with_grammar(grammar: Grammar) -> Self {
        Arith { grammar }
    }
}

impl Default for Arith {
    fn default() -> Self {
        Self::new()
    }
}

impl Target for Arith {
    fn name(&self) -> &str {
        "arith"
    }

    fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    fn execute(&self, input: &str) -> ExecutionFeedback {
        let mut cov = Cov::default();
        let toks = match lex(input, &mut cov) {
            Ok(t) => t,
            Err(e) => return cov.finish(false, e),
        };
        let mut ev = Eval { toks, pos: 0, cov: &mut cov };
        let result = ev.sum().and_then(|v| {
            if ev.pos < ev.toks.len() {
                ev.cov.hit(25);
                Err("trailing input".into())
            } else {
                Ok(v)
            }
        });
        match result {
            Ok(v) => {
                cov.hit(if v == 0 { 15 } else { 14 });
                cov.finish(true, format!("= {v}"))
            }
            Err(e) => cov.finish(false, e),
        }
    }

    fn total_branches(&self) -> u32 {
        TOTAL
    }

    fn semantic_branches(&self) -> Option<std::ops::Range<u32>> {
        Some(EVAL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_sum_is_valid() {
        let fb = Arith::new().execute("1 + 2");
        assert!(fb.valid);
        assert_eq!(fb.note, "= 3");
    }

    #[test]
    fn division_by_zero_is_invalid() {
        let fb = Arith::new().execute("1 / 0");
        assert!(!fb.valid);
        assert!(fb.coverage.contains(20));
    }

    #[test]
    fn parenthesization_adds_coverage() {
        let t = Arith::new();
        let plain = t.execute("1").coverage;
        let paren = t.execute("(1 + 2) * 3").coverage;
        let extra = paren.difference(&plain);
        assert!(extra.contains(12), "{extra:?}");
        assert!(plain.is_subset(&paren));
    }

    #[test]
    fn precedence_and_unary() {
        let t = Arith::new();
        assert_eq!(t.execute("1 + 2 * 3").note, "= 7");
        assert_eq!(t.execute("- (1 - 3) / 2").note, "= 1");
        assert_eq!(t.execute("(1 + 2)* 3").note, "= 9");
    }

    #[test]
    fn malformed_inputs_are_feedback() {
        let t = Arith::new();
        for bad in ["", "(", "1 +", "1 2", "x", "99999999999999999999", ")"] {
            let fb = t.execute(bad);
            assert!(!fb.valid, "{bad}");
            assert!(fb.coverage.iter().all(|id| id < TOTAL));
        }
    }
}
