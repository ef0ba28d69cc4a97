use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn holds(self, a: u64, b: u64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }

    /// The operator with its operands swapped (`a op b` iff `b op.flip() a`).
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            o => o,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Boolean condition over program variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Guard {
    True,
    False,
    /// `var op value`
    Cmp {
        var: String,
        op: CmpOp,
        value: u64,
    },
    /// `var % modulus = residue`
    Mod {
        var: String,
        modulus: u64,
        residue: u64,
    },
    /// `lhs op rhs` between two variables.
    CmpVar {
        lhs: String,
        op: CmpOp,
        rhs: String,
    },
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Not(Box<Guard>),
}

/// A program state: values of the program variables. Missing variables are 0.
pub type State = BTreeMap<String, u64>;

impl Guard {
    pub fn cmp(var: &str, op: CmpOp, value: u64) -> Guard {
        Guard::Cmp { var: var.to_string(), op, value }
    }

    pub fn and(a: Guard, b: Guard) -> Guard {
        Guard::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Guard, b: Guard) -> Guard {
        Guard::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Guard) -> Guard {
        Guard::Not(Box::new(a))
    }

    pub fn eval(&self, lookup: &dyn Fn(&str) -> u64) -> bool {
        match self {
            Guard::True => true,
            Guard::False => false,
            Guard::Cmp { var, op, value } => op.holds(lookup(var), *value),
            Guard::Mod { var, modulus, residue } => lookup(var) % modulus == *residue,
            Guard::CmpVar { lhs, op, rhs } => op.holds(lookup(lhs), lookup(rhs)),
            Guard::And(a, b) => a.eval(lookup) && b.eval(lookup),
            Guard::Or(a, b) => a.eval(lookup) || b.eval(lookup),
            Guard::Not(a) => !a.eval(lookup),
        }
    }

    pub fn eval_state(&self, s: &State) -> bool {
        self.eval(&|v| s.get(v).copied().unwrap_or(0))
    }

    /// Variables referenced, in order of first occurrence.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<String>) {
        let mut push = |v: &String| {
            if !out.contains(v) {
                out.push(v.clone());
            }
        };
        match self {
            Guard::True | Guard::False => {}
            Guard::Cmp { var, .. } | Guard::Mod { var, .. } => push(var),
            Guard::CmpVar { lhs, rhs, .. } => {
                push(lhs);
                push(rhs);
            }
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.collect(out);
                b.collect(out);
            }
            Guard::Not(a) => a.collect(out),
        }
    }

    /// Rectangular guards only compare variables with constants.
    pub fn is_rectangular(&self) -> bool {
        match self {
            Guard::True | Guard::False | Guard::Cmp { .. } => true,
            Guard::Mod { modulus, .. } => *modulus == 2,
            Guard::CmpVar { .. } => false,
            Guard::And(a, b) | Guard::Or(a, b) => a.is_rectangular() && b.is_rectangular(),
            Guard::Not(a) => a.is_rectangular(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Guard::Or(..) => 0,
            Guard::And(..) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, g: &Guard, min: u8| -> fmt::Result {
            if g.precedence() < min {
                write!(f, "({g})")
            } else {
                write!(f, "{g}")
            }
        };
        match self {
            Guard::True => write!(f, "true"),
            Guard::False => write!(f, "false"),
            Guard::Cmp { var, op, value } => write!(f, "{var} {} {value}", op.symbol()),
            Guard::Mod { var, modulus, residue } => write!(f, "{var} % {modulus} = {residue}"),
            Guard::CmpVar { lhs, op, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            Guard::And(a, b) => {
                child(f, a, 1)?;
                write!(f, " && ")?;
                child(f, b, 2)
            }
            Guard::Or(a, b) => {
                child(f, a, 0)?;
                write!(f, " || ")?;
                child(f, b, 1)
            }
            Guard::Not(a) => {
                write!(f, "!")?;
                child(f, a, 3)
            }
        }
    }
}
