use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

/// The role an indeterminate plays inside a generating function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    /// Marks the value of a program variable.
    Program,
    /// Second-order marker paired with a program variable.
    Meta,
    /// Carries the probability of an observation violation.
    Violation,
    /// A symbolic constant such as an unknown probability.
    Parameter,
}

/// A named formal variable. Ordering is by kind, then by name.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Indeterminate {
    kind: Kind,
    name: Arc<str>,
}

impl Indeterminate {
    pub fn new(kind: Kind, name: &str) -> Self {
        Indeterminate { kind, name: Arc::from(name) }
    }

    pub fn program(name: &str) -> Self {
        Self::new(Kind::Program, name)
    }

    pub fn meta(name: &str) -> Self {
        Self::new(Kind::Meta, name)
    }

    pub fn param(name: &str) -> Self {
        Self::new(Kind::Parameter, name)
    }

    /// The single violation marker, rendered as `!`.
    pub fn violation() -> Self {
        Self::new(Kind::Violation, "!")
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Series indeterminates are the ones an expression is a power series in;
    /// parameters behave like coefficients.
    pub fn is_series(&self) -> bool {
        self.kind != Kind::Parameter
    }
}

impl PartialOrd for Indeterminate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Indeterminate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.kind.cmp(&other.kind).then_with(|| self.name.cmp(&other.name))
    }
}

impl fmt::Display for Indeterminate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Kind::Meta => write!(f, "@{}", self.name),
            _ => write!(f, "{}", self.name),
        }
    }
}

impl fmt::Debug for Indeterminate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
