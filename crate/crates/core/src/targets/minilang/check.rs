//! MiniLang typechecker. Branch ids 70..TOTAL. Errors accumulate; an
//! erroneous expression gets type `Unknown`, which is compatible with
//! everything so one mistake does not cascade.

use std::collections::HashMap;

use super::syntax::{ClassDef, Expr, FuncDef, Stmt, Top, TypeExpr};
use crate::targets::Cov;

pub(super) const FIRST: u32 = 70;
pub(super) const TOTAL: u32 = 183;

#[derive(Debug, Clone, PartialEq)]
enum Ty {
    Int,
    Bool,
    Str,
    NoneT,
    Empty,
    List(Box<Ty>),
    Obj(String),
    Unknown,
}

#[derive(Debug, Clone)]
struct Sig {
    params: Vec<Ty>,
    ret: Ty,
}

#[derive(Debug, Clone)]
enum Binding {
    Var(Ty),
    Func(Sig),
    Class,
}

#[derive(Default)]
struct Scope {
    names: HashMap<String, Binding>,
    ret: Option<Ty>,
}

pub(super) struct Checker<'c> {
    cov: &'c mut Cov,
    scopes: Vec<Scope>,
    classes: HashMap<String, Vec<(String, Ty)>>,
    pub errors: Vec<String>,
}

impl<'c> Checker<'c> {
    pub(super) fn new(cov: &'c mut Cov) -> Self {
        Checker { cov, scopes: vec![Scope::default()], classes: HashMap::new(), errors: Vec::new() }
    }

    fn error(&mut self, id: u32, msg: String) {
        self.cov.hit(id);
        self.errors.push(msg);
    }

    pub(super) fn program(&mut self, tops: &[Top]) {
        for top in tops {
            match top {
                Top::Class(c) => self.class(c),
                Top::Func(f) => self.func(f),
                Top::Stmt(s) => self.stmt(s),
            }
        }
    }

    fn scope(&mut self) -> &mut Scope {
        self.scopes.last_mut().expect("global scope")
    }

    fn lookup(&self, name: &str) -> Option<(usize, &Binding)> {
        self.scopes.iter().enumerate().rev().find_map(|(i, s)| s.names.get(name).map(|b| (i, b)))
    }

    fn in_function(&self) -> bool {
        self.scopes.len() > 1
    }

    fn resolve(&mut self, te: &TypeExpr) -> Ty {
        match te {
            TypeExpr::Int => {
                self.cov.hit(70);
                Ty::Int
            }
            TypeExpr::Bool => {
                self.cov.hit(71);
                Ty::Bool
            }
            TypeExpr::Str => {
                self.cov.hit(72);
                Ty::Str
            }
            TypeExpr::Named(name) => {
                if self.classes.contains_key(name) {
                    self.cov.hit(73);
                    Ty::Obj(name.clone())
                } else {
                    self.error(74, format!("unknown type `{name}`"));
                    Ty::Unknown
                }
            }
            TypeExpr::List(inner) => {
                self.cov.hit(75);
                Ty::List(Box::new(self.resolve(inner)))
            }
        }
    }

    fn assignable(&mut self, from: &Ty, to: &Ty) -> bool {
        if *from == Ty::Unknown || *to == Ty::Unknown {
            self.cov.hit(76);
            true
        } else if from == to {
            self.cov.hit(77);
            true
        } else if *from == Ty::NoneT && matches!(to, Ty::Obj(_) | Ty::List(_)) {
            self.cov.hit(78);
            true
        } else if *from == Ty::Empty && matches!(to, Ty::List(_)) {
            self.cov.hit(79);
            true
        } else {
            self.cov.hit(80);
            false
        }
    }

    fn class(&mut self, c: &ClassDef) {
        if self.scope().names.contains_key(&c.name) {
            self.error(81, format!("duplicate definition of `{}`", c.name));
            return;
        }
        self.cov.hit(82);
        self.scope().names.insert(c.name.clone(), Binding::Class);
        self.classes.insert(c.name.clone(), Vec::new());
        self.cov.branch(c.attrs.is_empty(), 88, 87);
        let mut attrs: Vec<(String, Ty)> = Vec::new();
        for (name, te, value) in &c.attrs {
            let ty = self.resolve(te);
            if value.is_literal() {
                self.cov.hit(83);
            } else {
                self.error(84, format!("attribute `{name}` must be initialized with a literal"));
            }
            let vt = self.expr(value);
            if !self.assignable(&vt, &ty) {
                self.error(85, format!("attribute `{name}` initializer has the wrong type"));
            }
            if attrs.iter().any(|(n, _)| n == name) {
                self.error(86, format!("duplicate attribute `{name}`"));
            } else {
                attrs.push((name.clone(), ty));
            }
        }
        self.classes.insert(c.name.clone(), attrs);
    }

    fn func(&mut self, f: &FuncDef) {
        if self.in_function() {
            self.cov.hit(94);
        }
        let duplicate = self.scope().names.contains_key(&f.name);
        if duplicate {
            self.error(89, format!("duplicate definition of `{}`", f.name));
        } else {
            self.cov.hit(90);
        }
        let params: Vec<Ty> = f.params.iter().map(|(_, te)| self.resolve(te)).collect();
        let ret = self.resolve(&f.ret);
        if !duplicate {
            let sig = Sig { params: params.clone(), ret: ret.clone() };
            self.scope().names.insert(f.name.clone(), Binding::Func(sig));
        }
        self.scopes.push(Scope { names: HashMap::new(), ret: Some(ret) });
        if f.params.is_empty() {
            self.cov.hit(93);
        }
        for ((name, _), ty) in f.params.iter().zip(params) {
            if self.scope().names.contains_key(name) {
                self.error(91, format!("duplicate parameter `{name}`"));
            } else {
                self.cov.hit(92);
                self.scope().names.insert(name.clone(), Binding::Var(ty));
            }
        }
        for s in &f.body {
            self.stmt(s);
        }
        let returns = f.body.iter().any(|s| matches!(s, Stmt::Return(_)));
        self.cov.branch(returns, 95, 96);
        self.scopes.pop();
    }

    fn block(&mut self, body: &[Stmt]) {
        for s in body {
            self.stmt(s);
        }
    }

    fn condition(&mut self, cond: &Expr, ok: u32, bad: u32) {
        match self.expr(cond) {
            Ty::Bool => self.cov.hit(ok),
            Ty::Unknown => self.cov.hit(121),
            _ => self.error(bad, "condition must be bool".into()),
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Pass => self.cov.hit(97),
            Stmt::Decl(name, te, value) => {
                if value.is_literal() {
                    self.cov.hit(98);
                } else {
                    self.error(99, format!("`{name}` must be initialized with a literal"));
                }
                let ty = self.resolve(te);
                let vt = self.expr(value);
                if self.assignable(&vt, &ty) {
                    self.cov.hit(102);
                } else {
                    self.error(103, format!("initializer of `{name}` has the wrong type"));
                }
                if self.scope().names.contains_key(name) {
                    self.error(100, format!("duplicate declaration of `{name}`"));
                } else {
                    self.cov.hit(101);
                    self.scope().names.insert(name.clone(), Binding::Var(ty));
                }
                self.cov.branch(self.in_function(), 104, 105);
            }
            Stmt::Assign(name, value) => {
                let vt = self.expr(value);
                let depth = self.scopes.len() - 1;
                let target = match self.lookup(name) {
                    None => {
                        self.error(106, format!("assignment to undeclared `{name}`"));
                        return;
                    }
                    Some((i, Binding::Var(ty))) if i == depth => ty.clone(),
                    Some((_, Binding::Var(_))) => {
                        self.error(108, format!("cannot assign to non-local `{name}`"));
                        return;
                    }
                    Some(_) => {
                        self.error(109, format!("`{name}` is not a variable"));
                        return;
                    }
                };
                self.cov.hit(107);
                if self.assignable(&vt, &target) {
                    self.cov.hit(110);
                } else {
                    self.error(111, format!("assigning the wrong type to `{name}`"));
                }
            }
            Stmt::AttrAssign(obj, attr, value) => {
                let vt = self.expr(value);
                let Some(at) = self.attr_type(obj, attr, 112, 113, 114, 115, 116) else {
                    return;
                };
                if self.assignable(&vt, &at) {
                    self.cov.hit(117);
                } else {
                    self.error(118, format!("assigning the wrong type to `{obj}.{attr}`"));
                }
            }
            Stmt::If(cond, then, els) => {
                self.condition(cond, 119, 120);
                self.block(then);
                if let Some(els) = els {
                    self.cov.hit(122);
                    self.block(els);
                }
            }
            Stmt::While(cond, body) => {
                self.condition(cond, 123, 124);
                self.block(body);
            }
            Stmt::Return(e) => {
                let ty = self.expr(e);
                match self.scope().ret.clone() {
                    None => self.error(125, "return outside of a function".into()),
                    Some(ret) => {
                        if self.assignable(&ty, &ret) {
                            self.cov.hit(126);
                        } else {
                            self.error(127, "returned value has the wrong type".into());
                        }
                    }
                }
            }
            Stmt::Print(e) => match self.expr(e) {
                Ty::Int | Ty::Bool | Ty::Str | Ty::Unknown => self.cov.hit(128),
                _ => self.error(129, "can only print int, bool or str".into()),
            },
            Stmt::Expr(e) => {
                let call = matches!(e, Expr::Call(..));
                self.cov.branch(call, 131, 130);
                self.expr(e);
            }
            Stmt::Func(f) => self.func(f),
        }
    }

    /// Type of `obj.attr`, recording `obj_ok`, `undefined`, `not_obj`,
    /// `found` and `missing` arms.
    #[allow(clippy::too_many_arguments)]
    fn attr_type(
        &mut self,
        obj: &str,
        attr: &str,
        obj_ok: u32,
        undefined: u32,
        not_obj: u32,
        found: u32,
        missing: u32,
    ) -> Option<Ty> {
        let class = match self.lookup(obj) {
            Some((_, Binding::Var(Ty::Obj(c)))) => c.clone(),
            Some((_, Binding::Var(Ty::Unknown))) => return Some(Ty::Unknown),
            None => {
                self.error(undefined, format!("undefined name `{obj}`"));
                return None;
            }
            Some(_) => {
                self.error(not_obj, format!("`{obj}` is not an object"));
                return None;
            }
        };
        self.cov.hit(obj_ok);
        let ty =
            self.classes.get(&class).and_then(|attrs| attrs.iter().find(|(n, _)| n == attr).map(|(_, t)| t.clone()));
        match ty {
            Some(t) => {
                self.cov.hit(found);
                Some(t)
            }
            None => {
                self.error(missing, format!("`{class}` has no attribute `{attr}`"));
                None
            }
        }
    }

    fn expr(&mut self, e: &Expr) -> Ty {
        match e {
            Expr::Var(name) => match self.lookup(name) {
                Some((_, Binding::Var(ty))) => {
                    let ty = ty.clone();
                    self.cov.hit(132);
                    ty
                }
                Some((_, Binding::Func(_))) => {
                    self.error(133, format!("function `{name}` used as a value"));
                    Ty::Unknown
                }
                Some((_, Binding::Class)) => {
                    self.error(134, format!("class `{name}` used as a value"));
                    Ty::Unknown
                }
                None => {
                    self.error(135, format!("undefined name `{name}`"));
                    Ty::Unknown
                }
            },
            Expr::Int(_) => {
                self.cov.hit(136);
                Ty::Int
            }
            Expr::Bool(_) => {
                self.cov.hit(137);
                Ty::Bool
            }
            Expr::Str(_) => {
                self.cov.hit(138);
                Ty::Str
            }
            Expr::None => {
                self.cov.hit(139);
                Ty::NoneT
            }
            Expr::Binary(op, lhs, rhs) => {
                let l = self.expr(lhs);
                let r = self.expr(rhs);
                self.binary(op, l, r, rhs)
            }
            Expr::Not(inner) => match self.expr(inner) {
                Ty::Bool | Ty::Unknown => {
                    self.cov.hit(156);
                    Ty::Bool
                }
                _ => {
                    self.error(157, "`not` needs a bool".into());
                    Ty::Bool
                }
            },
            Expr::Neg(inner) => match self.expr(inner) {
                Ty::Int | Ty::Unknown => {
                    self.cov.hit(158);
                    Ty::Int
                }
                _ => {
                    self.error(159, "`-` needs an int".into());
                    Ty::Int
                }
            },
            Expr::Call(name, args) => self.call(name, args),
            Expr::Attr(obj, attr) => self.attr_type(obj, attr, 170, 135, 173, 171, 172).unwrap_or(Ty::Unknown),
            Expr::Index(base, index) => {
                let bt = self.expr(&Expr::Var(base.clone()));
                match self.expr(index) {
                    Ty::Int | Ty::Unknown => self.cov.hit(178),
                    _ => self.error(179, "index must be an int".into()),
                }
                match bt {
                    Ty::Str => {
                        self.cov.hit(174);
                        Ty::Str
                    }
                    Ty::List(t) => {
                        self.cov.hit(175);
                        *t
                    }
                    Ty::Unknown => Ty::Unknown,
                    Ty::Empty => {
                        self.error(176, "indexing an empty list".into());
                        Ty::Unknown
                    }
                    _ => {
                        self.error(177, format!("`{base}` cannot be indexed"));
                        Ty::Unknown
                    }
                }
            }
            Expr::List(elems) => {
                if elems.is_empty() {
                    self.cov.hit(180);
                    return Ty::Empty;
                }
                let tys: Vec<Ty> = elems.iter().map(|x| self.expr(x)).collect();
                let first = tys.iter().find(|t| **t != Ty::Unknown).cloned().unwrap_or(Ty::Unknown);
                if tys.iter().all(|t| *t == first || *t == Ty::Unknown) {
                    self.cov.hit(181);
                    Ty::List(Box::new(first))
                } else {
                    self.error(182, "list elements have different types".into());
                    Ty::Unknown
                }
            }
        }
    }

    fn binary(&mut self, op: &str, l: Ty, r: Ty, rhs: &Expr) -> Ty {
        if l == Ty::Unknown || r == Ty::Unknown {
            self.cov.hit(140);
            return Ty::Unknown;
        }
        match op {
            "+" => match (&l, &r) {
                (Ty::Int, Ty::Int) => {
                    self.cov.hit(141);
                    Ty::Int
                }
                (Ty::Str, Ty::Str) => {
                    self.cov.hit(142);
                    Ty::Str
                }
                (Ty::List(a), Ty::List(b)) if a == b => {
                    self.cov.hit(143);
                    l
                }
                _ => {
                    self.error(144, "operands of `+` do not match".into());
                    Ty::Unknown
                }
            },
            "-" | "*" | "//" | "%" => {
                if matches!(op, "//" | "%") && *rhs == Expr::Int(0) {
                    self.cov.hit(147);
                }
                if l == Ty::Int && r == Ty::Int {
                    self.cov.hit(145);
                } else {
                    self.error(146, format!("`{op}` needs int operands"));
                }
                Ty::Int
            }
            "==" | "!=" => {
                if l == r && matches!(l, Ty::Int | Ty::Bool | Ty::Str) {
                    self.cov.hit(148);
                } else {
                    self.error(149, format!("`{op}` needs operands of one primitive type"));
                }
                Ty::Bool
            }
            "<" | "<=" | ">" | ">=" => {
                if l == Ty::Int && r == Ty::Int {
                    self.cov.hit(150);
                } else {
                    self.error(151, format!("`{op}` needs int operands"));
                }
                Ty::Bool
            }
            "and" | "or" => {
                if l == Ty::Bool && r == Ty::Bool {
                    self.cov.hit(152);
                } else {
                    self.error(153, format!("`{op}` needs bool operands"));
                }
                Ty::Bool
            }
            _ => {
                let reference = |t: &Ty| matches!(t, Ty::Obj(_) | Ty::NoneT | Ty::List(_) | Ty::Empty);
                if reference(&l) && reference(&r) {
                    self.cov.hit(154);
                } else {
                    self.error(155, "`is` needs object operands".into());
                }
                Ty::Bool
            }
        }
    }

    fn call(&mut self, name: &str, args: &[Expr]) -> Ty {
        let arg_tys: Vec<Ty> = args.iter().map(|a| self.expr(a)).collect();
        if args.is_empty() {
            self.cov.hit(168);
        }
        match self.lookup(name).map(|(_, b)| b.clone()) {
            Some(Binding::Func(sig)) => {
                self.cov.hit(160);
                if sig.params.len() == arg_tys.len() {
                    self.cov.hit(164);
                } else {
                    self.error(165, format!("`{name}` takes {} arguments, {} given", sig.params.len(), arg_tys.len()));
                }
                for (a, p) in arg_tys.iter().zip(&sig.params) {
                    if self.assignable(a, p) {
                        self.cov.hit(166);
                    } else {
                        self.error(167, format!("argument to `{name}` has the wrong type"));
                    }
                }
                sig.ret
            }
            Some(Binding::Class) => {
                self.cov.hit(161);
                if !args.is_empty() {
                    self.error(169, format!("constructor of `{name}` takes no arguments"));
                }
                Ty::Obj(name.to_owned())
            }
            Some(Binding::Var(_)) => {
                self.error(162, format!("`{name}` is not callable"));
                Ty::Unknown
            }
            None => {
                self.error(163, format!("undefined function `{name}`"));
                Ty::Unknown
            }
        }
    }
}
