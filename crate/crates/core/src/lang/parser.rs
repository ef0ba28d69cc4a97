use num_traits::{Signed, ToPrimitive};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::gf::{CmpOp, Guard};

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

const DIST_NAMES: &[&str] = &["bernoulli", "geometric", "poisson", "uniform", "binomial", "dirac"];

impl Parser {
    pub fn new(src: &str) -> PResult<Self> {
        Ok(Parser { toks: tokenize(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn loc(&self) -> Loc {
        let t = &self.toks[self.pos];
        Loc { line: t.line, col: t.col }
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        let found = match &t.tok {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Num(n) => format!("'{n}'"),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Eof => "end of input".to_string(),
        };
        Err(ParseError { line: t.line, col: t.col, message: format!("{}, found {found}", msg.into()) })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected '{s}'"))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn expect_nat(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Num(n) if n.is_integer() && !n.is_negative() => match n.to_integer().to_u64() {
                Some(v) => {
                    self.bump();
                    Ok(v)
                }
                None => self.err("natural number too large"),
            },
            _ => self.err("expected natural number"),
        }
    }

    pub fn at_end(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn expect_end(&self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            self.err("expected end of input")
        }
    }

    pub fn program(&mut self) -> PResult<ProgramAst> {
        let mut vars: Vec<String> = Vec::new();
        while self.is_kw("nat") {
            self.bump();
            loop {
                let v = self.expect_ident()?;
                if !vars.contains(&v) {
                    vars.push(v);
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(";")?;
        }
        let mut body = Vec::new();
        while !self.at_end() {
            if self.eat_sym(";") {
                continue;
            }
            body.push(self.stmt()?);
        }
        let mut p = ProgramAst { vars, body };
        p.collect_vars();
        Ok(p)
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if self.at_end() {
                return self.err("expected '}'");
            }
            if self.eat_sym(";") {
                continue;
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        let kind = self.stmt_kind()?;
        Ok(Stmt { kind, loc })
    }

    fn stmt_kind(&mut self) -> PResult<StmtKind> {
        if self.is_sym("{") {
            let left = self.block()?;
            if !self.eat_sym("[") {
                return self.err("expected '[' introducing a probabilistic choice");
            }
            let prob = self.coef()?;
            self.expect_sym("]")?;
            let right = self.block()?;
            return Ok(StmtKind::PChoice { left, prob, right });
        }
        let word = match self.peek().clone() {
            Tok::Ident(w) => w,
            _ => return self.err("expected statement"),
        };
        let is_assignment = matches!(self.peek_at(1), Tok::Sym(":=") | Tok::Sym("+=") | Tok::Sym("-="));
        if !is_assignment {
            match word.as_str() {
                "skip" => {
                    self.bump();
                    self.expect_sym(";")?;
                    return Ok(StmtKind::Skip);
                }
                "diverge" => {
                    self.bump();
                    self.expect_sym(";")?;
                    return Ok(StmtKind::While { guard: Guard::True, body: vec![Stmt::new(StmtKind::Skip)] });
                }
                "observe" => {
                    self.bump();
                    self.expect_sym("(")?;
                    let g = self.guard()?;
                    self.expect_sym(")")?;
                    self.expect_sym(";")?;
                    return Ok(StmtKind::Observe(g));
                }
                "if" => return self.if_stmt(),
                "while" => {
                    self.bump();
                    self.expect_sym("(")?;
                    let guard = self.guard()?;
                    self.expect_sym(")")?;
                    let body = self.block()?;
                    return Ok(StmtKind::While { guard, body });
                }
                _ => return self.err("expected statement"),
            }
        }
        let var = self.expect_ident()?;
        let op = self.bump();
        let kind = match op {
            Tok::Sym(":=") => {
                if self.at_dist() {
                    let dist = self.dist()?;
                    StmtKind::Sample { var, dist }
                } else {
                    let expr = self.arith()?;
                    StmtKind::Assign { var, expr }
                }
            }
            Tok::Sym("+=") => {
                if self.is_kw("iid") {
                    self.bump();
                    self.expect_sym("(")?;
                    let dist = self.dist()?;
                    self.expect_sym(",")?;
                    let count = self.expect_ident()?;
                    self.expect_sym(")")?;
                    StmtKind::Iid { var, dist, count }
                } else {
                    let rhs = self.arith()?;
                    let expr = ArithExpr::Add(Box::new(ArithExpr::Var(var.clone())), Box::new(rhs));
                    StmtKind::Assign { var, expr }
                }
            }
            _ => {
                let rhs = self.arith()?;
                let expr = ArithExpr::Sub(Box::new(ArithExpr::Var(var.clone())), Box::new(rhs));
                StmtKind::Assign { var, expr }
            }
        };
        self.expect_sym(";")?;
        Ok(kind)
    }

    fn if_stmt(&mut self) -> PResult<StmtKind> {
        self.bump();
        self.expect_sym("(")?;
        let guard = self.guard()?;
        self.expect_sym(")")?;
        let then = self.block()?;
        let els = if self.is_kw("else") {
            self.bump();
            if self.is_kw("if") {
                let loc = self.loc();
                let kind = self.if_stmt()?;
                vec![Stmt { kind, loc }]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(StmtKind::If { guard, then, els })
    }

    fn at_dist(&self) -> bool {
        matches!(self.peek(), Tok::Ident(w) if DIST_NAMES.contains(&w.as_str()))
            && matches!(self.peek_at(1), Tok::Sym("("))
    }

    pub fn dist(&mut self) -> PResult<Dist> {
        let name = self.expect_ident()?;
        self.expect_sym("(")?;
        let kind = match name.as_str() {
            "bernoulli" => DistKind::Bernoulli(self.coef()?),
            "geometric" => DistKind::Geometric(self.coef()?),
            "poisson" => DistKind::Poisson(self.coef()?),
            "uniform" => {
                let a = self.expect_nat()?;
                self.expect_sym(",")?;
                let b = self.expect_nat()?;
                if b < a {
                    return self.err("uniform range is empty");
                }
                DistKind::Uniform(a, b)
            }
            "binomial" => {
                let n = self.expect_nat()?;
                self.expect_sym(",")?;
                DistKind::Binomial(n, self.coef()?)
            }
            "dirac" => DistKind::Dirac(self.expect_nat()?),
            _ => return self.err("unknown distribution"),
        };
        self.expect_sym(")")?;
        let mut offset = 0;
        if self.is_sym("+") && matches!(self.peek_at(1), Tok::Num(_)) {
            self.bump();
            offset = self.expect_nat()?;
        }
        Ok(Dist { kind, offset })
    }

    fn arith(&mut self) -> PResult<ArithExpr> {
        let mut lhs = self.arith_term()?;
        loop {
            if self.eat_sym("+") {
                lhs = ArithExpr::Add(Box::new(lhs), Box::new(self.arith_term()?));
            } else if self.eat_sym("-") {
                lhs = ArithExpr::Sub(Box::new(lhs), Box::new(self.arith_term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn arith_term(&mut self) -> PResult<ArithExpr> {
        let mut lhs = self.arith_atom()?;
        while self.eat_sym("*") {
            lhs = ArithExpr::Mul(Box::new(lhs), Box::new(self.arith_atom()?));
        }
        Ok(lhs)
    }

    fn arith_atom(&mut self) -> PResult<ArithExpr> {
        match self.peek().clone() {
            Tok::Num(_) => Ok(ArithExpr::Num(self.expect_nat()?)),
            Tok::Ident(v) => {
                self.bump();
                Ok(ArithExpr::Var(v))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.arith()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => self.err("expected arithmetic expression"),
        }
    }

    pub fn coef(&mut self) -> PResult<Coef> {
        let mut lhs = self.coef_term()?;
        loop {
            if self.eat_sym("+") {
                lhs = Coef::Add(Box::new(lhs), Box::new(self.coef_term()?));
            } else if self.eat_sym("-") {
                lhs = Coef::Sub(Box::new(lhs), Box::new(self.coef_term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn coef_term(&mut self) -> PResult<Coef> {
        let mut lhs = self.coef_unary()?;
        loop {
            if self.eat_sym("*") {
                lhs = Coef::Mul(Box::new(lhs), Box::new(self.coef_unary()?));
            } else if self.eat_sym("/") {
                let rhs = self.coef_unary()?;
                lhs = match (lhs, rhs) {
                    (Coef::Num(a), Coef::Num(b)) if !num_traits::Zero::is_zero(&b) => Coef::Num(a / b),
                    (a, b) => Coef::Div(Box::new(a), Box::new(b)),
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn coef_unary(&mut self) -> PResult<Coef> {
        if self.eat_sym("-") {
            return Ok(Coef::Neg(Box::new(self.coef_unary()?)));
        }
        let base = self.coef_atom()?;
        if self.eat_sym("^") {
            let neg = self.eat_sym("-");
            let paren = self.eat_sym("(");
            let neg = if paren { self.eat_sym("-") || neg } else { neg };
            let n = self.expect_nat()? as i64;
            if paren {
                self.expect_sym(")")?;
            }
            return Ok(Coef::Pow(Box::new(base), if neg { -n } else { n }));
        }
        Ok(base)
    }

    fn coef_atom(&mut self) -> PResult<Coef> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Coef::Num(n))
            }
            Tok::Ident(w) if w == "exp" && matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.bump();
                self.bump();
                let e = self.coef()?;
                self.expect_sym(")")?;
                Ok(Coef::Exp(Box::new(e)))
            }
            Tok::Ident(w) => {
                self.bump();
                Ok(Coef::Name(w))
            }
            Tok::Sym("@") => {
                self.bump();
                Ok(Coef::Meta(self.expect_ident()?))
            }
            Tok::Sym("!") => {
                self.bump();
                Ok(Coef::Violation)
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.coef()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => self.err("expected expression"),
        }
    }

    pub fn guard(&mut self) -> PResult<Guard> {
        let mut lhs = self.guard_and()?;
        while self.eat_sym("||") {
            lhs = Guard::or(lhs, self.guard_and()?);
        }
        Ok(lhs)
    }

    fn guard_and(&mut self) -> PResult<Guard> {
        let mut lhs = self.guard_not()?;
        while self.eat_sym("&&") {
            lhs = Guard::and(lhs, self.guard_not()?);
        }
        Ok(lhs)
    }

    fn guard_not(&mut self) -> PResult<Guard> {
        if self.eat_sym("!") {
            return Ok(Guard::not(self.guard_not()?));
        }
        if self.eat_sym("(") {
            let g = self.guard()?;
            self.expect_sym(")")?;
            return Ok(g);
        }
        if self.is_kw("true") {
            self.bump();
            return Ok(Guard::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(Guard::False);
        }
        self.comparison()
    }

    fn cmp_op(&mut self) -> PResult<CmpOp> {
        let op = match self.peek() {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym("=") | Tok::Sym("==") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Sym(">") => CmpOp::Gt,
            _ => return self.err("expected comparison operator"),
        };
        self.bump();
        Ok(op)
    }

    fn operand(&mut self) -> PResult<Result<String, u64>> {
        match self.peek().clone() {
            Tok::Ident(v) => {
                self.bump();
                Ok(Ok(v))
            }
            Tok::Num(_) => Ok(Err(self.expect_nat()?)),
            _ => self.err("expected variable or natural number"),
        }
    }

    fn comparison(&mut self) -> PResult<Guard> {
        let lhs = self.operand()?;
        if let Ok(var) = &lhs {
            if self.eat_sym("%") {
                let modulus = self.expect_nat()?;
                if modulus < 2 {
                    return self.err("modulus must be at least 2");
                }
                let op = self.cmp_op()?;
                let residue = self.expect_nat()?;
                let g = Guard::Mod { var: var.clone(), modulus, residue };
                return match op {
                    CmpOp::Eq => Ok(g),
                    CmpOp::Ne => Ok(Guard::not(g)),
                    _ => self.err("only '=' and '!=' are allowed after a modulus"),
                };
            }
        }
        let op = self.cmp_op()?;
        let rhs = self.operand()?;
        Ok(match (lhs, rhs) {
            (Ok(var), Err(value)) => Guard::Cmp { var, op, value },
            (Err(value), Ok(var)) => Guard::Cmp { var, op: op.flip(), value },
            (Ok(lhs), Ok(rhs)) => Guard::CmpVar { lhs, op, rhs },
            (Err(a), Err(b)) => {
                if op.holds(a, b) {
                    Guard::True
                } else {
                    Guard::False
                }
            }
        })
    }
}
