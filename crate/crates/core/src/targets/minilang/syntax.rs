//! MiniLang lexer and recursive-descent parser. Branch ids 0..70.

use crate::targets::Cov;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Kw(&'static str),
    Punct(&'static str),
}

const KEYWORDS: &[&str] = &[
    "def", "class", "if", "else", "while", "return", "pass", "print", "true", "false", "None", "not", "and", "or",
    "is", "int", "bool", "str",
];

const PUNCT2: &[&str] = &["->", "//", "==", "!=", "<=", ">="];
const PUNCT1: &[&str] = &["(", ")", "{", "}", "[", "]", ",", ":", ".", "=", "+", "-", "*", "%", "<", ">"];

pub(super) fn lex(input: &str, cov: &mut Cov) -> Result<Vec<Tok>, String> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            cov.hit(0);
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &input[start..i];
            match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => {
                    cov.hit(2);
                    out.push(Tok::Kw(k));
                }
                None => {
                    cov.hit(1);
                    out.push(Tok::Ident(word.to_owned()));
                }
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            match input[start..i].parse::<i64>() {
                Ok(v) if v <= i64::from(i32::MAX) => {
                    cov.hit(3);
                    out.push(Tok::Int(v));
                }
                _ => {
                    cov.hit(4);
                    return Err("integer literal out of range".into());
                }
            }
        } else if c == b'"' {
            let start = i + 1;
            i += 1;
            while i < bytes.len() && bytes[i] != b'"' && bytes[i] != b'\n' {
                i += 1;
            }
            if i >= bytes.len() || bytes[i] != b'"' {
                cov.hit(6);
                return Err("unterminated string literal".into());
            }
            cov.hit(5);
            out.push(Tok::Str(input[start..i].to_owned()));
            i += 1;
        } else if let Some(p) = PUNCT2.iter().find(|p| input[i..].starts_with(**p)) {
            cov.hit(7);
            out.push(Tok::Punct(p));
            i += 2;
        } else if let Some(p) = PUNCT1.iter().find(|p| input[i..].starts_with(**p)) {
            cov.hit(8);
            out.push(Tok::Punct(p));
            i += 1;
        } else {
            cov.hit(9);
            let ch = input[i..].chars().next().unwrap_or('?');
            return Err(format!("unexpected character `{ch}`"));
        }
    }
    cov.branch(out.is_empty(), 10, 11);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub(super) enum TypeExpr {
    Int,
    Bool,
    Str,
    Named(String),
    List(Box<TypeExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Expr {
    Var(String),
    Int(i64),
    Bool(bool),
    Str(String),
    None,
    Binary(&'static str, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Call(String, Vec<Expr>),
    Attr(String, String),
    Index(String, Box<Expr>),
    List(Vec<Expr>),
}

impl Expr {
    pub(super) fn is_literal(&self) -> bool {
        matches!(self, Expr::Int(_) | Expr::Bool(_) | Expr::Str(_) | Expr::None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct FuncDef {
    pub name: String,
    pub params: Vec<(String, TypeExpr)>,
    pub ret: TypeExpr,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct ClassDef {
    pub name: String,
    pub attrs: Vec<(String, TypeExpr, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Stmt {
    Pass,
    Decl(String, TypeExpr, Expr),
    Assign(String, Expr),
    AttrAssign(String, String, Expr),
    If(Expr, Vec<Stmt>, Option<Vec<Stmt>>),
    While(Expr, Vec<Stmt>),
    Return(Expr),
    Print(Expr),
    Expr(Expr),
    Func(FuncDef),
}

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Top {
    Stmt(Stmt),
    Func(FuncDef),
    Class(ClassDef),
}

pub(super) struct Parser<'c> {
    toks: Vec<Tok>,
    pos: usize,
    cov: &'c mut Cov,
}

type PResult<T> = Result<T, String>;

const BINOPS: &[&str] = &["+", "-", "*", "//", "%", "==", "!=", "<", "<=", ">", ">=", "and", "or", "is"];

impl<'c> Parser<'c> {
    pub(super) fn new(toks: Vec<Tok>, cov: &'c mut Cov) -> Self {
        Parser { toks, pos: 0, cov }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k)
    }

    fn is(&self, text: &str) -> bool {
        matches!(self.peek(), Some(Tok::Kw(k) | Tok::Punct(k)) if *k == text)
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.is(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> PResult<()> {
        if self.eat(text) {
            return Ok(());
        }
        Err(self.unexpected(&format!("`{text}`")))
    }

    fn unexpected(&mut self, wanted: &str) -> String {
        match self.peek().cloned() {
            Some(t) => {
                self.cov.hit(58);
                format!("expected {wanted}, found {t:?}")
            }
            None => {
                self.cov.hit(65);
                format!("expected {wanted}, found end of input")
            }
        }
    }

    fn ident(&mut self) -> PResult<String> {
        if let Some(Tok::Ident(name)) = self.peek() {
            let name = name.clone();
            self.pos += 1;
            return Ok(name);
        }
        Err(self.unexpected("an identifier"))
    }

    pub(super) fn program(mut self) -> PResult<Vec<Top>> {
        let mut tops = Vec::new();
        while self.peek().is_some() {
            self.cov.hit(20);
            tops.push(self.top()?);
        }
        Ok(tops)
    }

    fn top(&mut self) -> PResult<Top> {
        if self.is("class") {
            self.cov.hit(21);
            return self.classdef().map(Top::Class);
        }
        if self.is("def") {
            self.cov.hit(22);
            return self.funcdef().map(Top::Func);
        }
        self.cov.hit(23);
        self.stmt().map(Top::Stmt)
    }

    fn classdef(&mut self) -> PResult<ClassDef> {
        self.expect("class")?;
        let name = self.ident()?;
        self.expect("{")?;
        let mut attrs = Vec::new();
        while !self.is("}") {
            self.cov.hit(25);
            let attr = self.ident()?;
            self.expect(":")?;
            let ty = self.type_expr()?;
            self.expect("=")?;
            let value = self.expr()?;
            attrs.push((attr, ty, value));
        }
        self.cov.hit(24);
        self.expect("}")?;
        Ok(ClassDef { name, attrs })
    }

    fn funcdef(&mut self) -> PResult<FuncDef> {
        self.expect("def")?;
        let name = self.ident()?;
        self.expect("(")?;
        let mut params = Vec::new();
        while !self.is(")") {
            self.cov.hit(26);
            let p = self.ident()?;
            self.expect(":")?;
            let ty = self.type_expr()?;
            params.push((p, ty));
            if !self.eat(",") {
                self.cov.hit(27);
                break;
            }
        }
        self.expect(")")?;
        self.expect("->")?;
        let ret = self.type_expr()?;
        let body = self.block()?;
        Ok(FuncDef { name, params, ret, body })
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        if self.eat("int") {
            self.cov.hit(28);
            Ok(TypeExpr::Int)
        } else if self.eat("bool") {
            self.cov.hit(29);
            Ok(TypeExpr::Bool)
        } else if self.eat("str") {
            self.cov.hit(30);
            Ok(TypeExpr::Str)
        } else if let Some(Tok::Ident(_)) = self.peek() {
            self.cov.hit(31);
            Ok(TypeExpr::Named(self.ident()?))
        } else if self.eat("[") {
            self.cov.hit(32);
            let inner = self.type_expr()?;
            self.expect("]")?;
            Ok(TypeExpr::List(Box::new(inner)))
        } else {
            self.cov.hit(33);
            Err(self.unexpected("a type"))
        }
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        if !self.eat("{") {
            self.cov.hit(35);
            return Err(self.unexpected("`{`"));
        }
        self.cov.hit(34);
        let mut body = Vec::new();
        while !self.is("}") {
            if self.peek().is_none() {
                return Err(self.unexpected("`}`"));
            }
            body.push(self.stmt()?);
        }
        self.pos += 1;
        Ok(body)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.eat("pass") {
            self.cov.hit(36);
            return Ok(Stmt::Pass);
        }
        if self.eat("if") {
            self.cov.hit(37);
            let cond = self.expr()?;
            let then = self.block()?;
            let els = if self.eat("else") {
                self.cov.hit(59);
                Some(self.block()?)
            } else {
                self.cov.hit(60);
                None
            };
            return Ok(Stmt::If(cond, then, els));
        }
        if self.eat("while") {
            self.cov.hit(38);
            let cond = self.expr()?;
            let body = self.block()?;
            return Ok(Stmt::While(cond, body));
        }
        if self.eat("return") {
            self.cov.hit(39);
            return Ok(Stmt::Return(self.expr()?));
        }
        if self.eat("print") {
            self.cov.hit(40);
            self.expect("(")?;
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(Stmt::Print(e));
        }
        if self.is("def") {
            self.cov.hit(41);
            return self.funcdef().map(Stmt::Func);
        }
        if let Some(Tok::Ident(name)) = self.peek() {
            let name = name.clone();
            let next = self.peek_at(1);
            if matches!(next, Some(Tok::Punct(":"))) {
                self.cov.hit(42);
                self.pos += 2;
                let ty = self.type_expr()?;
                self.expect("=")?;
                let value = self.expr()?;
                return Ok(Stmt::Decl(name, ty, value));
            }
            if matches!(next, Some(Tok::Punct("="))) {
                self.cov.hit(43);
                self.pos += 2;
                return Ok(Stmt::Assign(name, self.expr()?));
            }
            if matches!(next, Some(Tok::Punct(".")))
                && matches!(self.peek_at(2), Some(Tok::Ident(_)))
                && matches!(self.peek_at(3), Some(Tok::Punct("=")))
            {
                self.cov.hit(44);
                let Some(Tok::Ident(attr)) = self.peek_at(2).cloned() else { unreachable!() };
                self.pos += 4;
                return Ok(Stmt::AttrAssign(name, attr, self.expr()?));
            }
        }
        self.cov.hit(45);
        Ok(Stmt::Expr(self.expr()?))
    }

    fn args(&mut self, close: &str) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        while !self.is(close) {
            args.push(self.expr()?);
            if self.eat(",") {
                self.cov.hit(63);
            } else {
                self.cov.hit(64);
                break;
            }
        }
        self.expect(close)?;
        Ok(args)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected("an expression"));
        };
        match tok {
            Tok::Ident(name) => {
                self.pos += 1;
                if self.eat("(") {
                    self.cov.hit(54);
                    Ok(Expr::Call(name, self.args(")")?))
                } else if self.eat(".") {
                    self.cov.hit(55);
                    Ok(Expr::Attr(name, self.ident()?))
                } else if self.eat("[") {
                    self.cov.hit(56);
                    let index = self.expr()?;
                    self.expect("]")?;
                    Ok(Expr::Index(name, Box::new(index)))
                } else {
                    self.cov.hit(46);
                    Ok(Expr::Var(name))
                }
            }
            Tok::Int(v) => {
                self.cov.hit(47);
                self.pos += 1;
                Ok(Expr::Int(v))
            }
            Tok::Str(s) => {
                self.cov.hit(50);
                self.pos += 1;
                Ok(Expr::Str(s))
            }
            Tok::Kw("true") | Tok::Kw("false") => {
                self.cov.hit(48);
                self.pos += 1;
                Ok(Expr::Bool(tok == Tok::Kw("true")))
            }
            Tok::Kw("None") => {
                self.cov.hit(49);
                self.pos += 1;
                Ok(Expr::None)
            }
            Tok::Kw("not") => {
                self.cov.hit(52);
                self.pos += 1;
                Ok(Expr::Not(Box::new(self.expr()?)))
            }
            Tok::Punct("-") => {
                self.cov.hit(53);
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.expr()?)))
            }
            Tok::Punct("[") => {
                self.cov.hit(57);
                self.pos += 1;
                Ok(Expr::List(self.args("]")?))
            }
            Tok::Punct("(") => {
                self.pos += 1;
                let lhs = self.expr()?;
                if self.eat(")") {
                    self.cov.hit(62);
                    return Ok(lhs);
                }
                let op = match self.peek() {
                    Some(Tok::Kw(k) | Tok::Punct(k)) if BINOPS.contains(k) => *k,
                    _ => return Err(self.unexpected("a binary operator")),
                };
                self.cov.hit(51);
                self.pos += 1;
                let rhs = self.expr()?;
                self.expect(")")?;
                self.cov.hit(61);
                Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}
