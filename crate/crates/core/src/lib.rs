//! Exact inference for discrete probabilistic programs through generating
//! functions.

pub mod equiv;
pub mod gf;
pub mod lang;
pub mod oracle;
pub mod query;
pub mod semantics;
pub mod symexpr;
pub mod synth;
