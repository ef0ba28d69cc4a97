use std::fmt::{self, Write};

use num_traits::Signed;

use super::ast::*;

fn coef_prec(c: &Coef) -> u8 {
    match c {
        Coef::Add(..) | Coef::Sub(..) => 0,
        Coef::Mul(..) | Coef::Div(..) => 1,
        Coef::Neg(_) => 2,
        Coef::Pow(..) => 3,
        Coef::Num(r) if r.is_negative() => 2,
        Coef::Num(r) if !r.is_integer() => 1,
        _ => 4,
    }
}

fn wrap(f: &mut fmt::Formatter<'_>, c: &Coef, min: u8) -> fmt::Result {
    if coef_prec(c) < min {
        write!(f, "({c})")
    } else {
        write!(f, "{c}")
    }
}

impl fmt::Display for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coef::Num(r) => write!(f, "{r}"),
            Coef::Name(n) => write!(f, "{n}"),
            Coef::Meta(n) => write!(f, "@{n}"),
            Coef::Violation => write!(f, "!"),
            Coef::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 3)
            }
            Coef::Add(a, b) => {
                wrap(f, a, 0)?;
                write!(f, " + ")?;
                wrap(f, b, 1)
            }
            Coef::Sub(a, b) => {
                wrap(f, a, 0)?;
                write!(f, " - ")?;
                wrap(f, b, 1)
            }
            Coef::Mul(a, b) => {
                wrap(f, a, 1)?;
                write!(f, "*")?;
                wrap(f, b, 2)
            }
            Coef::Div(a, b) => {
                wrap(f, a, 1)?;
                write!(f, "/")?;
                wrap(f, b, 3)
            }
            Coef::Pow(a, n) => {
                wrap(f, a, 4)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Coef::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

fn arith_prec(e: &ArithExpr) -> u8 {
    match e {
        ArithExpr::Add(..) | ArithExpr::Sub(..) => 0,
        ArithExpr::Mul(..) => 1,
        _ => 2,
    }
}

fn wrap_arith(f: &mut fmt::Formatter<'_>, e: &ArithExpr, min: u8) -> fmt::Result {
    if arith_prec(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for ArithExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArithExpr::Num(n) => write!(f, "{n}"),
            ArithExpr::Var(v) => write!(f, "{v}"),
            ArithExpr::Add(a, b) => {
                wrap_arith(f, a, 0)?;
                write!(f, " + ")?;
                wrap_arith(f, b, 1)
            }
            ArithExpr::Sub(a, b) => {
                wrap_arith(f, a, 0)?;
                write!(f, " - ")?;
                wrap_arith(f, b, 1)
            }
            ArithExpr::Mul(a, b) => {
                wrap_arith(f, a, 1)?;
                write!(f, "*")?;
                wrap_arith(f, b, 2)
            }
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DistKind::Bernoulli(p) => write!(f, "bernoulli({p})")?,
            DistKind::Geometric(p) => write!(f, "geometric({p})")?,
            DistKind::Poisson(l) => write!(f, "poisson({l})")?,
            DistKind::Uniform(a, b) => write!(f, "uniform({a}, {b})")?,
            DistKind::Binomial(n, p) => write!(f, "binomial({n}, {p})")?,
            DistKind::Dirac(n) => write!(f, "dirac({n})")?,
        }
        if self.offset > 0 {
            write!(f, " + {}", self.offset)?;
        }
        Ok(())
    }
}

fn write_block(out: &mut String, body: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for s in body {
        write_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Skip => out.push_str("skip;"),
        StmtKind::Assign { var, expr } => {
            let _ = write!(out, "{var} := {expr};");
        }
        StmtKind::Sample { var, dist } => {
            let _ = write!(out, "{var} := {dist};");
        }
        StmtKind::Iid { var, dist, count } => {
            let _ = write!(out, "{var} += iid({dist}, {count});");
        }
        StmtKind::PChoice { left, prob, right } => {
            write_block(out, left, depth);
            let _ = write!(out, " [{prob}] ");
            write_block(out, right, depth);
        }
        StmtKind::If { guard, then, els } => {
            let _ = write!(out, "if ({guard}) ");
            write_block(out, then, depth);
            if !els.is_empty() {
                out.push_str(" else ");
                write_block(out, els, depth);
            }
        }
        StmtKind::While { guard, body } => {
            let _ = write!(out, "while ({guard}) ");
            write_block(out, body, depth);
        }
        StmtKind::Observe(g) => {
            let _ = write!(out, "observe({g});");
        }
    }
    out.push('\n');
}

/// Renders a statement list at the given indentation depth.
pub fn render_stmts(body: &[Stmt], depth: usize) -> String {
    let mut out = String::new();
    for s in body {
        write_stmt(&mut out, s, depth);
    }
    out
}

impl fmt::Display for ProgramAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.vars {
            writeln!(f, "nat {v};")?;
        }
        write!(f, "{}", render_stmts(&self.body, 0))
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", render_stmts(std::slice::from_ref(self), 0).trim_end())
    }
}
