use super::ast::*;
use crate::gf::Guard;

/// Which supported fragments a program lies in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FragmentReport {
    pub loop_free: bool,
    /// Rectangular guards, closed-form assignments and rational distributions only.
    pub credip: bool,
    /// Constructs outside the closed-form fragment with a reason each.
    pub unsupported: Vec<(Loc, String)>,
}

pub fn validate(p: &ProgramAst) -> FragmentReport {
    let mut report = FragmentReport { loop_free: true, credip: true, unsupported: Vec::new() };
    visit(&p.body, &mut |s| check(s, &mut report));
    report.credip = report.unsupported.is_empty();
    report
}

fn check(s: &Stmt, r: &mut FragmentReport) {
    let mut flag = |why: String| r.unsupported.push((s.loc, why));
    match &s.kind {
        StmtKind::Assign { var, expr } => {
            if !closed_form_assignment(expr) {
                flag(format!("nonlinear assignment '{var} := {expr}'"));
            }
        }
        StmtKind::Sample { dist, .. } | StmtKind::Iid { dist, .. } => {
            if matches!(dist.kind, DistKind::Poisson(_)) {
                flag(format!("distribution '{dist}' has no rational generating function"));
            }
            if let StmtKind::Iid { var, count, .. } = &s.kind {
                if var == count {
                    flag(format!("'{var}' cannot count its own samples"));
                }
            }
        }
        StmtKind::If { guard, .. } | StmtKind::Observe(guard) => guard_check(guard, &mut flag),
        StmtKind::While { guard, .. } => {
            guard_check(guard, &mut flag);
            r.loop_free = false;
        }
        StmtKind::Skip | StmtKind::PChoice { .. } => {}
    }
}

fn guard_check(g: &Guard, flag: &mut dyn FnMut(String)) {
    if !g.is_rectangular() {
        flag(format!("non-rectangular guard '{g}'"));
    }
}

/// `x := n`, `x := x + n`, `x := x - n`, `x := y`, `x := y + n` and
/// `x := x + y` style updates: sums of distinct variables and one constant,
/// with an optional trailing constant subtraction.
fn closed_form_assignment(e: &ArithExpr) -> bool {
    let e = match e {
        ArithExpr::Sub(a, b) if matches!(**b, ArithExpr::Num(_)) => {
            if !matches!(**a, ArithExpr::Var(_)) {
                return false;
            }
            a.as_ref()
        }
        e => e,
    };
    let mut vars = Vec::new();
    let mut consts = 0;
    if !flatten_sum(e, &mut vars, &mut consts) {
        return false;
    }
    let mut seen = std::collections::BTreeSet::new();
    let distinct = vars.iter().all(|v| seen.insert(v.clone()));
    distinct && consts <= 1
}

fn flatten_sum(e: &ArithExpr, vars: &mut Vec<String>, consts: &mut usize) -> bool {
    match e {
        ArithExpr::Num(_) => {
            *consts += 1;
            true
        }
        ArithExpr::Var(v) => {
            vars.push(v.clone());
            true
        }
        ArithExpr::Add(a, b) => flatten_sum(a, vars, consts) && flatten_sum(b, vars, consts),
        _ => false,
    }
}
