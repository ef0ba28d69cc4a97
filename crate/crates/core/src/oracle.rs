//! Monte Carlo reference interpreter.
//!
//! Programs are run forward with explicit random choices. Runs that violate an
//! observation are rejected; the accepted runs estimate the conditioned
//! distribution, which is then compared state by state against an exact result.

use std::collections::{BTreeMap, HashMap};

use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde_json::json;

use crate::gf::{self, CmpOp, EFps, Guard, State};
use crate::lang::{ArithExpr, Dist, DistKind, ProgramAst, Stmt, StmtKind};
use crate::semantics::coef_expr;
use crate::symexpr::{rat_to_f64, Rat};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Two-sided 99.9% normal quantile.
pub const Z999: f64 = 3.290_526_731_491_926;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub samples: u64,
    pub max_steps: u64,
    pub seed: u64,
    /// Number of independent random streams. Results depend on this number but
    /// not on the number of threads.
    pub streams: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { samples: 1_000_000, max_steps: 100_000, seed: 0x5eed, streams: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RunOutcome {
    Terminated(State),
    Violated,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("{loc}: probability '{what}' is not a rational constant")]
    NotConstant { loc: crate::lang::Loc, what: String },
    #[error("{loc}: probability {value} is outside [0, 1]")]
    OutOfRange { loc: crate::lang::Loc, value: Rat },
    #[error("every run violated an observation; the conditioned distribution is undefined")]
    DegenerateConditioning,
    #[error("no run terminated within the step limit")]
    NoTermination,
    #[error("sample count must be positive")]
    NoSamples,
}

// ---------------------------------------------------------------------------
// compilation to index-based form

#[derive(Clone, Debug)]
enum CExpr {
    Num(u64),
    Var(usize),
    Add(Box<CExpr>, Box<CExpr>),
    Sub(Box<CExpr>, Box<CExpr>),
    Mul(Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    fn eval(&self, s: &[u64]) -> u64 {
        match self {
            CExpr::Num(n) => *n,
            CExpr::Var(i) => s[*i],
            CExpr::Add(a, b) => a.eval(s).saturating_add(b.eval(s)),
            CExpr::Sub(a, b) => a.eval(s).saturating_sub(b.eval(s)),
            CExpr::Mul(a, b) => a.eval(s).saturating_mul(b.eval(s)),
        }
    }
}

#[derive(Clone, Debug)]
enum CGuard {
    Const(bool),
    Cmp(usize, CmpOp, u64),
    Mod(usize, u64, u64),
    CmpVar(usize, CmpOp, usize),
    And(Box<CGuard>, Box<CGuard>),
    Or(Box<CGuard>, Box<CGuard>),
    Not(Box<CGuard>),
}

impl CGuard {
    fn eval(&self, s: &[u64]) -> bool {
        match self {
            CGuard::Const(b) => *b,
            CGuard::Cmp(i, op, v) => op.holds(s[*i], *v),
            CGuard::Mod(i, m, r) => s[*i] % m == *r,
            CGuard::CmpVar(i, op, j) => op.holds(s[*i], s[*j]),
            CGuard::And(a, b) => a.eval(s) && b.eval(s),
            CGuard::Or(a, b) => a.eval(s) || b.eval(s),
            CGuard::Not(a) => !a.eval(s),
        }
    }
}

/// Exact probability `num / den`, or a float when the denominator is huge.
#[derive(Clone, Debug)]
enum Prob {
    Exact(u64, u64),
    Float(f64),
}

impl Prob {
    fn new(r: &Rat) -> Prob {
        match (r.numer().to_u64(), r.denom().to_u64()) {
            (Some(n), Some(d)) => Prob::Exact(n, d),
            _ => Prob::Float(rat_to_f64(r)),
        }
    }

    fn flip<R: Rng>(&self, rng: &mut R) -> bool {
        match self {
            Prob::Exact(n, d) => rng.gen_range(0..*d) < *n,
            Prob::Float(p) => rng.gen::<f64>() < *p,
        }
    }
}

#[derive(Clone, Debug)]
enum CDist {
    Bernoulli(Prob),
    Geometric(Prob),
    Poisson(Poisson<f64>),
    Uniform(u64, u64),
    Binomial(u64, Prob),
    Dirac(u64),
}

#[derive(Clone, Debug)]
struct CSample {
    dist: CDist,
    offset: u64,
}

impl CSample {
    fn draw<R: Rng>(&self, rng: &mut R) -> u64 {
        let base = match &self.dist {
            CDist::Bernoulli(p) => p.flip(rng) as u64,
            CDist::Geometric(p) => {
                let mut failures = 0u64;
                while !p.flip(rng) {
                    failures += 1;
                }
                failures
            }
            CDist::Poisson(d) => d.sample(rng) as u64,
            CDist::Uniform(a, b) => rng.gen_range(*a..=*b),
            CDist::Binomial(n, p) => (0..*n).filter(|_| p.flip(rng)).count() as u64,
            CDist::Dirac(n) => *n,
        };
        base + self.offset
    }

    fn is_random(&self) -> bool {
        !matches!(self.dist, CDist::Dirac(_))
    }
}

#[derive(Clone, Debug)]
enum CStmt {
    Skip,
    Assign(usize, CExpr),
    Sample(usize, CSample),
    Iid(usize, CSample, usize),
    Choice(Vec<CStmt>, Prob, Vec<CStmt>),
    If(CGuard, Vec<CStmt>, Vec<CStmt>),
    While(CGuard, Vec<CStmt>),
    Observe(CGuard),
}

/// A program compiled for repeated execution.
#[derive(Clone, Debug)]
pub struct Compiled {
    vars: Vec<String>,
    body: Vec<CStmt>,
}

struct Compiler {
    vars: Vec<String>,
}

impl Compiler {
    fn var(&mut self, name: &str) -> usize {
        match self.vars.iter().position(|v| v == name) {
            Some(i) => i,
            None => {
                self.vars.push(name.to_string());
                self.vars.len() - 1
            }
        }
    }

    fn expr(&mut self, e: &ArithExpr) -> CExpr {
        match e {
            ArithExpr::Num(n) => CExpr::Num(*n),
            ArithExpr::Var(v) => CExpr::Var(self.var(v)),
            ArithExpr::Add(a, b) => CExpr::Add(Box::new(self.expr(a)), Box::new(self.expr(b))),
            ArithExpr::Sub(a, b) => CExpr::Sub(Box::new(self.expr(a)), Box::new(self.expr(b))),
            ArithExpr::Mul(a, b) => CExpr::Mul(Box::new(self.expr(a)), Box::new(self.expr(b))),
        }
    }

    fn guard(&mut self, g: &Guard) -> CGuard {
        match g {
            Guard::True => CGuard::Const(true),
            Guard::False => CGuard::Const(false),
            Guard::Cmp { var, op, value } => CGuard::Cmp(self.var(var), *op, *value),
            Guard::Mod { var, modulus, residue } => CGuard::Mod(self.var(var), *modulus, *residue),
            Guard::CmpVar { lhs, op, rhs } => CGuard::CmpVar(self.var(lhs), *op, self.var(rhs)),
            Guard::And(a, b) => CGuard::And(Box::new(self.guard(a)), Box::new(self.guard(b))),
            Guard::Or(a, b) => CGuard::Or(Box::new(self.guard(a)), Box::new(self.guard(b))),
            Guard::Not(a) => CGuard::Not(Box::new(self.guard(a))),
        }
    }

    fn prob(&mut self, c: &crate::lang::Coef, loc: crate::lang::Loc) -> Result<Rat, OracleError> {
        let v = coef_expr(c)
            .ok()
            .and_then(|e| e.constant_value())
            .ok_or_else(|| OracleError::NotConstant { loc, what: c.to_string() })?;
        Ok(v)
    }

    fn unit_prob(&mut self, c: &crate::lang::Coef, loc: crate::lang::Loc) -> Result<Prob, OracleError> {
        let v = self.prob(c, loc)?;
        if v < Rat::zero() || v > Rat::from_integer(1.into()) {
            return Err(OracleError::OutOfRange { loc, value: v });
        }
        Ok(Prob::new(&v))
    }

    fn sample(&mut self, d: &Dist, loc: crate::lang::Loc) -> Result<CSample, OracleError> {
        let dist = match &d.kind {
            DistKind::Bernoulli(p) => CDist::Bernoulli(self.unit_prob(p, loc)?),
            DistKind::Geometric(p) => {
                let p = self.unit_prob(p, loc)?;
                if matches!(p, Prob::Exact(0, _)) {
                    return Err(OracleError::OutOfRange { loc, value: Rat::zero() });
                }
                CDist::Geometric(p)
            }
            DistKind::Poisson(l) => {
                let l = self.prob(l, loc)?;
                if l <= Rat::zero() {
                    return Err(OracleError::OutOfRange { loc, value: l });
                }
                CDist::Poisson(Poisson::new(rat_to_f64(&l)).expect("positive rate"))
            }
            DistKind::Uniform(a, b) => CDist::Uniform(*a, *b),
            DistKind::Binomial(n, p) => CDist::Binomial(*n, self.unit_prob(p, loc)?),
            DistKind::Dirac(n) => CDist::Dirac(*n),
        };
        Ok(CSample { dist, offset: d.offset })
    }

    fn block(&mut self, body: &[Stmt]) -> Result<Vec<CStmt>, OracleError> {
        body.iter().map(|s| self.stmt(s)).collect()
    }

    fn stmt(&mut self, s: &Stmt) -> Result<CStmt, OracleError> {
        Ok(match &s.kind {
            StmtKind::Skip => CStmt::Skip,
            StmtKind::Assign { var, expr } => {
                let e = self.expr(expr);
                CStmt::Assign(self.var(var), e)
            }
            StmtKind::Sample { var, dist } => {
                let d = self.sample(dist, s.loc)?;
                CStmt::Sample(self.var(var), d)
            }
            StmtKind::Iid { var, dist, count } => {
                let d = self.sample(dist, s.loc)?;
                CStmt::Iid(self.var(var), d, self.var(count))
            }
            StmtKind::PChoice { left, prob, right } => {
                let p = self.unit_prob(prob, s.loc)?;
                CStmt::Choice(self.block(left)?, p, self.block(right)?)
            }
            StmtKind::If { guard, then, els } => {
                let g = self.guard(guard);
                CStmt::If(g, self.block(then)?, self.block(els)?)
            }
            StmtKind::While { guard, body } => {
                let g = self.guard(guard);
                CStmt::While(g, self.block(body)?)
            }
            StmtKind::Observe(g) => CStmt::Observe(self.guard(g)),
        })
    }
}

impl Compiled {
    /// Compiles a parameter-free program. Variables of `s0` that the program
    /// does not mention are carried along unchanged.
    pub fn new(p: &ProgramAst) -> Result<Compiled, OracleError> {
        let mut c = Compiler { vars: p.vars.clone() };
        let body = c.block(&p.body)?;
        Ok(Compiled { vars: c.vars, body })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    fn initial(&self, s0: &State) -> (Vec<String>, Vec<u64>) {
        let mut vars = self.vars.clone();
        for k in s0.keys() {
            if !vars.contains(k) {
                vars.push(k.clone());
            }
        }
        let vals = vars.iter().map(|v| s0.get(v).copied().unwrap_or(0)).collect();
        (vars, vals)
    }
}

enum Flow {
    Normal,
    Violated,
    Timeout,
}

struct Machine<'r, R: Rng> {
    rng: &'r mut R,
    steps: u64,
    max_steps: u64,
    draws: u64,
}

impl<R: Rng> Machine<'_, R> {
    fn tick(&mut self) -> bool {
        self.steps += 1;
        self.steps > self.max_steps
    }

    fn block(&mut self, body: &[CStmt], s: &mut Vec<u64>) -> Flow {
        for st in body {
            match self.stmt(st, s) {
                Flow::Normal => {}
                other => return other,
            }
        }
        Flow::Normal
    }

    fn stmt(&mut self, st: &CStmt, s: &mut Vec<u64>) -> Flow {
        if self.tick() {
            return Flow::Timeout;
        }
        match st {
            CStmt::Skip => Flow::Normal,
            CStmt::Assign(i, e) => {
                s[*i] = e.eval(s);
                Flow::Normal
            }
            CStmt::Sample(i, d) => {
                self.draws += d.is_random() as u64;
                s[*i] = d.draw(self.rng);
                Flow::Normal
            }
            CStmt::Iid(i, d, c) => {
                let mut total = s[*i];
                for _ in 0..s[*c] {
                    self.draws += d.is_random() as u64;
                    total = total.saturating_add(d.draw(self.rng));
                }
                s[*i] = total;
                Flow::Normal
            }
            CStmt::Choice(l, p, r) => {
                self.draws += 1;
                if p.flip(self.rng) {
                    self.block(l, s)
                } else {
                    self.block(r, s)
                }
            }
            CStmt::If(g, t, e) => {
                if g.eval(s) {
                    self.block(t, s)
                } else {
                    self.block(e, s)
                }
            }
            CStmt::While(g, body) => {
                while g.eval(s) {
                    let before = s.clone();
                    let draws = self.draws;
                    match self.block(body, s) {
                        Flow::Normal => {}
                        other => return other,
                    }
                    // A deterministic iteration that changes nothing repeats forever.
                    if self.draws == draws && *s == before {
                        return Flow::Timeout;
                    }
                    if self.tick() {
                        return Flow::Timeout;
                    }
                }
                Flow::Normal
            }
            CStmt::Observe(g) => {
                if g.eval(s) {
                    Flow::Normal
                } else {
                    Flow::Violated
                }
            }
        }
    }
}

fn run_once<R: Rng>(c: &Compiled, init: &[u64], max_steps: u64, rng: &mut R) -> (Flow, Vec<u64>) {
    let mut s = init.to_vec();
    let mut m = Machine { rng, steps: 0, max_steps, draws: 0 };
    let f = m.block(&c.body, &mut s);
    (f, s)
}

/// Executes one run of `p` from `s0`.
pub fn sample_run<R: Rng>(p: &ProgramAst, s0: &State, max_steps: u64, rng: &mut R) -> Result<RunOutcome, OracleError> {
    let c = Compiled::new(p)?;
    let (vars, init) = c.initial(s0);
    let (f, s) = run_once(&c, &init, max_steps, rng);
    Ok(match f {
        Flow::Normal => RunOutcome::Terminated(vars.into_iter().zip(s).collect()),
        Flow::Violated => RunOutcome::Violated,
        Flow::Timeout => RunOutcome::Timeout,
    })
}

/// Aggregated outcome counts of many runs.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Empirical {
    pub vars: Vec<String>,
    pub counts: BTreeMap<Vec<u64>, u64>,
    pub samples: u64,
    pub terminated: u64,
    pub violated: u64,
    pub timeouts: u64,
}

impl Empirical {
    fn merge(&mut self, other: StreamCounts) {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        self.samples += other.samples;
        self.terminated += other.terminated;
        self.violated += other.violated;
        self.timeouts += other.timeouts;
    }

    /// Runs not rejected by an observation. Timeouts are included: they stand
    /// for non-terminating runs, which keep their mass after conditioning.
    pub fn accepted(&self) -> u64 {
        self.terminated + self.timeouts
    }

    pub fn violation_rate(&self) -> f64 {
        self.violated as f64 / self.samples as f64
    }

    pub fn timeout_rate(&self) -> f64 {
        self.timeouts as f64 / self.samples as f64
    }

    fn key(&self, s: &State) -> Vec<u64> {
        self.vars.iter().map(|v| s.get(v).copied().unwrap_or(0)).collect()
    }

    pub fn state_of(&self, key: &[u64]) -> State {
        self.vars.iter().cloned().zip(key.iter().copied()).collect()
    }

    pub fn count(&self, s: &State) -> u64 {
        self.counts.get(&self.key(s)).copied().unwrap_or(0)
    }

    /// Estimated conditioned probability of a final state.
    pub fn frequency(&self, s: &State) -> f64 {
        self.count(s) as f64 / self.accepted() as f64
    }

    /// Wilson score interval for the conditioned probability of `s`.
    pub fn interval(&self, s: &State, z: f64) -> (f64, f64) {
        wilson(self.count(s), self.accepted(), z)
    }

    /// States ordered by decreasing count, ties by state.
    pub fn top(&self, k: usize) -> Vec<State> {
        let mut all: Vec<(&Vec<u64>, &u64)> = self.counts.iter().collect();
        all.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        all.into_iter().take(k).map(|(key, _)| self.state_of(key)).collect()
    }
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (all, none) = (k == n, k == 0);
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // The interval always contains the observed frequency; pin the closed
    // endpoints so rounding cannot exclude 0 or 1.
    let lo = if none { 0.0 } else { (center - half).max(0.0) };
    let hi = if all { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Default)]
struct StreamCounts {
    counts: HashMap<Vec<u64>, u64>,
    samples: u64,
    terminated: u64,
    violated: u64,
    timeouts: u64,
}

fn run_stream(c: &Compiled, init: &[u64], cfg: &RunConfig, stream: u32, n: u64) -> StreamCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream as u64);
    let mut out = StreamCounts { samples: n, ..Default::default() };
    for _ in 0..n {
        let (f, s) = run_once(c, init, cfg.max_steps, &mut rng);
        match f {
            Flow::Normal => {
                out.terminated += 1;
                *out.counts.entry(s).or_insert(0) += 1;
            }
            Flow::Violated => out.violated += 1,
            Flow::Timeout => out.timeouts += 1,
        }
    }
    out
}

fn stream_sizes(cfg: &RunConfig) -> Vec<(u32, u64)> {
    let k = cfg.streams.max(1) as u64;
    (0..k).map(|i| (i as u32, cfg.samples / k + u64::from(i < cfg.samples % k))).collect()
}

/// How to distribute streams over threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, and runs
    /// sequentially otherwise.
    Parallel,
}

/// Runs all streams and aggregates the counts. The result depends only on the
/// program, the start state and `cfg`.
pub fn simulate(p: &ProgramAst, s0: &State, cfg: &RunConfig, exec: Exec) -> Result<Empirical, OracleError> {
    if cfg.samples == 0 {
        return Err(OracleError::NoSamples);
    }
    let c = Compiled::new(p)?;
    let (vars, init) = c.initial(s0);
    let sizes = stream_sizes(cfg);
    let parts: Vec<StreamCounts> = match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            sizes.par_iter().map(|&(i, n)| run_stream(&c, &init, cfg, i, n)).collect()
        }
        _ => sizes.iter().map(|&(i, n)| run_stream(&c, &init, cfg, i, n)).collect(),
    };
    let mut emp = Empirical { vars, ..Default::default() };
    for part in parts {
        emp.merge(part);
    }
    Ok(emp)
}

/// Samples `p` from `s0` and checks that the conditioned estimate is defined.
pub fn estimate_posterior(p: &ProgramAst, s0: &State, cfg: &RunConfig) -> Result<Empirical, OracleError> {
    let emp = simulate(p, s0, cfg, Exec::Parallel)?;
    if emp.accepted() == 0 {
        return Err(if emp.violated > 0 { OracleError::DegenerateConditioning } else { OracleError::NoTermination });
    }
    if emp.terminated == 0 {
        return Err(OracleError::NoTermination);
    }
    Ok(emp)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateCheck {
    pub state: State,
    pub exact: f64,
    pub empirical: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub states: Vec<StateCheck>,
    pub max_abs_dev: f64,
    pub pass: bool,
}

impl CompareReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "pass": self.pass,
            "max_abs_dev": self.max_abs_dev,
            "states": self.states.iter().map(|c| json!({
                "state": c.state,
                "exact": c.exact,
                "empirical": c.empirical,
                "ci_low": c.ci_low,
                "ci_high": c.ci_high,
                "z": c.z,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Checks each of the `top_k` most frequent sampled states: the exact
/// conditioned probability must lie in the 99.9% Wilson interval.
pub fn compare(exact: &EFps, emp: &Empirical, top_k: usize) -> Result<CompareReport, crate::symexpr::SymError> {
    let n = emp.accepted() as f64;
    let mut states = Vec::new();
    let mut pass = true;
    let mut max_abs_dev = 0f64;
    for s in emp.top(top_k) {
        let e = gf::coefficient_of(&exact.dist, &s)?.to_f64().unwrap_or(f64::NAN);
        let f = emp.frequency(&s);
        let (lo, hi) = emp.interval(&s, Z999);
        let sd = (e * (1.0 - e) / n).sqrt();
        let z = if sd > 0.0 { (f - e) / sd } else { 0.0 };
        pass &= e >= lo && e <= hi;
        max_abs_dev = max_abs_dev.max((e - f).abs());
        states.push(StateCheck { state: s, exact: e, empirical: f, ci_low: lo, ci_high: hi, z });
    }
    Ok(CompareReport { states, max_abs_dev, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn cfg(samples: u64) -> RunConfig {
        RunConfig { samples, max_steps: 10_000, seed: 7, streams: 8 }
    }

    #[test]
    fn basic_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s0: State = [("x".to_string(), 4)].into();
        assert_eq!(
            sample_run(&parse_program("skip;").unwrap(), &s0, 100, &mut rng).unwrap(),
            RunOutcome::Terminated(s0.clone())
        );
        assert_eq!(
            sample_run(&parse_program("observe(false);").unwrap(), &s0, 100, &mut rng).unwrap(),
            RunOutcome::Violated
        );
        assert_eq!(
            sample_run(&parse_program("while (true) { skip; }").unwrap(), &s0, 100, &mut rng).unwrap(),
            RunOutcome::Timeout
        );
        let counter = parse_program("while (true) { x := x + 1; }").unwrap();
        assert_eq!(sample_run(&counter, &s0, 100, &mut rng).unwrap(), RunOutcome::Timeout);
    }

    #[test]
    fn degenerate_conditioning() {
        let p = parse_program("x := 1; observe(false);").unwrap();
        assert_eq!(estimate_posterior(&p, &State::new(), &cfg(100)), Err(OracleError::DegenerateConditioning));
    }

    #[test]
    fn determinism_across_exec_modes() {
        let p = parse_program("x := geometric(1/3); {y := 1;} [1/4] {y := uniform(0, 3);}").unwrap();
        let a = simulate(&p, &State::new(), &cfg(20_000), Exec::Sequential).unwrap();
        let b = simulate(&p, &State::new(), &cfg(20_000), Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn odd_geometric_matches_exact() {
        let p = parse_program("h := 1; while (h = 1) { {t := t + 1;} [1/2] {h := 0;} } observe(t % 2 = 1);").unwrap();
        let emp = estimate_posterior(&p, &State::new(), &cfg(200_000)).unwrap();
        let exact = EFps::parse("3*t/(4 - t^2)", &["t", "h"]).unwrap();
        let rep = compare(&exact, &emp, 10).unwrap();
        assert!(rep.pass, "{rep:?}");
        let s: State = [("t".to_string(), 1), ("h".to_string(), 0)].into();
        let (lo, hi) = emp.interval(&s, Z95);
        assert!(lo < 0.75 && 0.75 < hi);
        let wrong = EFps::parse("(3*t/(4 - t^2) - t/20)", &["t", "h"]).unwrap();
        assert!(!compare(&wrong, &emp, 10).unwrap().pass);
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let (lo, hi) = wilson(30, 100, Z95);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3);
    }
}
