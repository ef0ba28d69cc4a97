use std::collections::BTreeSet;

use crate::gf::Guard;
use crate::symexpr::{Indeterminate, Rat, SymError, SymExpr};

/// Source position of a statement. Positions never take part in structural
/// equality of programs.
#[derive(Clone, Copy, Debug, Default)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Loc {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Loc {}

impl std::fmt::Display for Loc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Arithmetic over the rationals and named parameters. Used for probabilities,
/// distribution parameters and for the textual form of closed expressions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Coef {
    Num(Rat),
    Name(String),
    /// Second-order marker paired with a program variable, written `@x`.
    Meta(String),
    /// The violation marker, written `!`.
    Violation,
    Neg(Box<Coef>),
    Add(Box<Coef>, Box<Coef>),
    Sub(Box<Coef>, Box<Coef>),
    Mul(Box<Coef>, Box<Coef>),
    Div(Box<Coef>, Box<Coef>),
    Pow(Box<Coef>, i64),
    Exp(Box<Coef>),
}

impl Coef {
    pub fn num(n: i64, d: i64) -> Coef {
        Coef::Num(Rat::new(n.into(), d.into()))
    }

    /// Evaluates to a symbolic expression, mapping each bare name through `resolve`.
    pub fn to_symexpr(&self, resolve: &dyn Fn(&str) -> Indeterminate) -> Result<SymExpr, SymError> {
        Ok(match self {
            Coef::Num(r) => SymExpr::constant(r.clone()),
            Coef::Name(n) => SymExpr::var(&resolve(n)),
            Coef::Meta(n) => SymExpr::var(&Indeterminate::meta(n)),
            Coef::Violation => SymExpr::var(&Indeterminate::violation()),
            Coef::Neg(a) => a.to_symexpr(resolve)?.neg(),
            Coef::Add(a, b) => a.to_symexpr(resolve)?.add(&b.to_symexpr(resolve)?),
            Coef::Sub(a, b) => a.to_symexpr(resolve)?.sub(&b.to_symexpr(resolve)?),
            Coef::Mul(a, b) => a.to_symexpr(resolve)?.mul(&b.to_symexpr(resolve)?),
            Coef::Div(a, b) => a.to_symexpr(resolve)?.divide(&b.to_symexpr(resolve)?)?,
            Coef::Pow(a, n) => a.to_symexpr(resolve)?.pow(*n)?,
            Coef::Exp(a) => SymExpr::exp_of(&a.to_symexpr(resolve)?)?,
        })
    }

    /// Names appearing in the expression, in no particular order.
    pub fn names(&self, out: &mut BTreeSet<String>) {
        match self {
            Coef::Name(n) => {
                out.insert(n.clone());
            }
            Coef::Num(_) | Coef::Meta(_) | Coef::Violation => {}
            Coef::Neg(a) | Coef::Pow(a, _) | Coef::Exp(a) => a.names(out),
            Coef::Add(a, b) | Coef::Sub(a, b) | Coef::Mul(a, b) | Coef::Div(a, b) => {
                a.names(out);
                b.names(out);
            }
        }
    }

    pub fn substitute(&self, name: &str, by: &Coef) -> Coef {
        let s = |c: &Coef| Box::new(c.substitute(name, by));
        match self {
            Coef::Name(n) if n == name => by.clone(),
            Coef::Num(_) | Coef::Name(_) | Coef::Meta(_) | Coef::Violation => self.clone(),
            Coef::Neg(a) => Coef::Neg(s(a)),
            Coef::Pow(a, k) => Coef::Pow(s(a), *k),
            Coef::Exp(a) => Coef::Exp(s(a)),
            Coef::Add(a, b) => Coef::Add(s(a), s(b)),
            Coef::Sub(a, b) => Coef::Sub(s(a), s(b)),
            Coef::Mul(a, b) => Coef::Mul(s(a), s(b)),
            Coef::Div(a, b) => Coef::Div(s(a), s(b)),
        }
    }
}

/// Right-hand side of a deterministic assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArithExpr {
    Num(u64),
    Var(String),
    Add(Box<ArithExpr>, Box<ArithExpr>),
    Sub(Box<ArithExpr>, Box<ArithExpr>),
    Mul(Box<ArithExpr>, Box<ArithExpr>),
}

impl ArithExpr {
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            ArithExpr::Num(_) => {}
            ArithExpr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone())
                }
            }
            ArithExpr::Add(a, b) | ArithExpr::Sub(a, b) | ArithExpr::Mul(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    /// Natural-number evaluation with truncated subtraction.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> u64) -> u64 {
        match self {
            ArithExpr::Num(n) => *n,
            ArithExpr::Var(v) => lookup(v),
            ArithExpr::Add(a, b) => a.eval(lookup).saturating_add(b.eval(lookup)),
            ArithExpr::Sub(a, b) => a.eval(lookup).saturating_sub(b.eval(lookup)),
            ArithExpr::Mul(a, b) => a.eval(lookup).saturating_mul(b.eval(lookup)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DistKind {
    Bernoulli(Coef),
    /// Number of failures before the first success.
    Geometric(Coef),
    Poisson(Coef),
    /// Uniform over the inclusive integer range.
    Uniform(u64, u64),
    Binomial(u64, Coef),
    Dirac(u64),
}

/// A distribution literal, optionally shifted by a constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dist {
    pub kind: DistKind,
    pub offset: u64,
}

impl Dist {
    pub fn new(kind: DistKind) -> Self {
        Dist { kind, offset: 0 }
    }

    pub fn params(&self) -> Vec<&Coef> {
        match &self.kind {
            DistKind::Bernoulli(p) | DistKind::Geometric(p) | DistKind::Poisson(p) | DistKind::Binomial(_, p) => {
                vec![p]
            }
            DistKind::Uniform(..) | DistKind::Dirac(_) => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Coef> {
        match &mut self.kind {
            DistKind::Bernoulli(p) | DistKind::Geometric(p) | DistKind::Poisson(p) | DistKind::Binomial(_, p) => {
                vec![p]
            }
            DistKind::Uniform(..) | DistKind::Dirac(_) => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Skip,
    Assign {
        var: String,
        expr: ArithExpr,
    },
    Sample {
        var: String,
        dist: Dist,
    },
    /// `var += iid(dist, count)`: adds `count` independent samples.
    Iid {
        var: String,
        dist: Dist,
        count: String,
    },
    PChoice {
        left: Vec<Stmt>,
        prob: Coef,
        right: Vec<Stmt>,
    },
    If {
        guard: Guard,
        then: Vec<Stmt>,
        els: Vec<Stmt>,
    },
    While {
        guard: Guard,
        body: Vec<Stmt>,
    },
    Observe(Guard),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub loc: Loc,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { kind, loc: Loc::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramAst {
    /// Program variables in declaration order.
    pub vars: Vec<String>,
    pub body: Vec<Stmt>,
}

impl ProgramAst {
    pub fn new(body: Vec<Stmt>) -> Self {
        let mut p = ProgramAst { vars: Vec::new(), body };
        p.collect_vars();
        p
    }

    /// Adds every variable referenced by the body to `vars`, in order of first
    /// occurrence.
    pub fn collect_vars(&mut self) {
        let mut vars = std::mem::take(&mut self.vars);
        walk_vars(&self.body, &mut vars);
        self.vars = vars;
    }

    /// Names used as parameters (symbols in probabilities and distribution
    /// arguments that are not program variables).
    pub fn parameters(&self) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        visit(&self.body, &mut |s| match &s.kind {
            StmtKind::PChoice { prob, .. } => prob.names(&mut names),
            StmtKind::Sample { dist, .. } | StmtKind::Iid { dist, .. } => {
                for p in dist.params() {
                    p.names(&mut names);
                }
            }
            _ => {}
        });
        names
    }

    pub fn has_loops(&self) -> bool {
        let mut found = false;
        visit(&self.body, &mut |s| found |= matches!(s.kind, StmtKind::While { .. }));
        found
    }

    /// Replaces a parameter by an expression everywhere.
    pub fn substitute_param(&self, name: &str, by: &Coef) -> ProgramAst {
        let mut p = self.clone();
        visit_mut(&mut p.body, &mut |s| match &mut s.kind {
            StmtKind::PChoice { prob, .. } => *prob = prob.substitute(name, by),
            StmtKind::Sample { dist, .. } | StmtKind::Iid { dist, .. } => {
                for c in dist.params_mut() {
                    *c = c.substitute(name, by);
                }
            }
            _ => {}
        });
        p
    }
}

fn walk_vars(body: &[Stmt], vars: &mut Vec<String>) {
    let add = |v: &str, vars: &mut Vec<String>| {
        if !vars.iter().any(|w| w == v) {
            vars.push(v.to_string());
        }
    };
    for s in body {
        match &s.kind {
            StmtKind::Skip => {}
            StmtKind::Assign { var, expr } => {
                add(var, vars);
                let mut vs = Vec::new();
                expr.vars(&mut vs);
                for v in vs {
                    add(&v, vars);
                }
            }
            StmtKind::Sample { var, .. } => add(var, vars),
            StmtKind::Iid { var, count, .. } => {
                add(var, vars);
                add(count, vars);
            }
            StmtKind::PChoice { left, right, .. } => {
                walk_vars(left, vars);
                walk_vars(right, vars);
            }
            StmtKind::If { guard, then, els } => {
                for v in guard.vars() {
                    add(&v, vars);
                }
                walk_vars(then, vars);
                walk_vars(els, vars);
            }
            StmtKind::While { guard, body } => {
                for v in guard.vars() {
                    add(&v, vars);
                }
                walk_vars(body, vars);
            }
            StmtKind::Observe(g) => {
                for v in g.vars() {
                    add(&v, vars);
                }
            }
        }
    }
}

/// Pre-order traversal over statements, descending into nested blocks.
pub fn visit<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in body {
        f(s);
        match &s.kind {
            StmtKind::PChoice { left, right, .. } => {
                visit(left, f);
                visit(right, f);
            }
            StmtKind::If { then, els, .. } => {
                visit(then, f);
                visit(els, f);
            }
            StmtKind::While { body, .. } => visit(body, f),
            _ => {}
        }
    }
}

fn visit_mut(body: &mut [Stmt], f: &mut dyn FnMut(&mut Stmt)) {
    for s in body {
        f(s);
        match &mut s.kind {
            StmtKind::PChoice { left, right, .. } => {
                visit_mut(left, f);
                visit_mut(right, f);
            }
            StmtKind::If { then, els, .. } => {
                visit_mut(then, f);
                visit_mut(els, f);
            }
            StmtKind::While { body, .. } => visit_mut(body, f),
            _ => {}
        }
    }
}
