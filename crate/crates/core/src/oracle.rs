//! Exact enumeration of the switching process in rational arithmetic.
//!
//! Everything here is computed from rational inputs without touching the
//! floating-point model, so it can serve as ground truth for the engine and
//! the simulator. Histories are merged on `(perceived, λ)`: two histories
//! with the same perception and the same exact Bayes factor have identical
//! futures. Histories that reach an absorbing alternative stop branching.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::model::{InformationStructure, Scenario};
use crate::switching::{Comparison, Perceived};

pub type Rational = BigRational;

/// Default cap on the number of distinct nodes alive at one depth.
pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `n/d` as an exact rational. Panics if `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"3/7"`, `"0.3"`, `"-1"`, `"1e-3"` or `"1.5/2"` exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let bad = || Error::InvalidRational(text.to_string());
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_decimal(n.trim()).ok_or_else(bad)?;
        let d = parse_decimal(d.trim()).ok_or_else(bad)?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(n / d);
    }
    parse_decimal(t).ok_or_else(bad)
}

fn parse_decimal(t: &str) -> Option<Rational> {
    let (t, exponent) = match t.split_once(['e', 'E']) {
        Some((mantissa, exp)) => (mantissa, exp.parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (negative, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let numerator: BigInt = digits.parse().ok()?;
    let denominator = num_traits::pow(BigInt::from(10), frac.len());
    let mut value = Rational::new(numerator, denominator);
    let power = Rational::from_integer(num_traits::pow(BigInt::from(10), exponent.unsigned_abs() as usize));
    if exponent >= 0 {
        value *= power;
    } else {
        value /= power;
    }
    Some(if negative { -value } else { value })
}

/// Rounds half away from zero to `places` decimals and prints every digit.
pub fn to_decimal_string(value: &Rational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = value.abs() * Rational::from_integer(scale.clone());
    let rounded = (scaled + ratio(1, 2)).floor().to_integer();
    let whole = &rounded / &scale;
    let frac = &rounded % &scale;
    let sign = if value.is_negative() && !rounded.is_zero() {
        "-"
    } else {
        ""
    };
    if places == 0 {
        format!("{sign}{whole}")
    } else {
        format!("{sign}{whole}.{frac:0>places$}")
    }
}

/// Nearest `f64`; only for reporting and float cross-checks.
pub fn to_f64(value: &Rational) -> f64 {
    // numerator and denominator may overflow f64 separately, so go through
    // a decimal string with enough digits for a correctly rounded parse
    to_decimal_string(value, 40).parse().unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------------
// Exact scenario and structure
// ---------------------------------------------------------------------------

/// Exact mirror of [`Scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct RationalScenario {
    states: Vec<String>,
    actions: Vec<String>,
    /// Prior probability of the first state.
    prior: Rational,
    receiver_utility: Vec<Vec<Rational>>,
    sender_utility: Vec<Vec<Rational>>,
}

impl RationalScenario {
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        prior: Rational,
        receiver_utility: Vec<Vec<Rational>>,
        sender_utility: Vec<Vec<Rational>>,
    ) -> Result<Self> {
        if states.len() != 2 {
            return Err(Error::InvalidScenario(format!(
                "expected 2 states, got {}",
                states.len()
            )));
        }
        if actions.len() < 2 {
            return Err(Error::InvalidScenario("at least two actions are required".into()));
        }
        if prior <= Rational::zero() || prior >= Rational::one() {
            return Err(Error::InvalidScenario(format!(
                "prior must lie strictly inside (0, 1), got {prior}"
            )));
        }
        for (name, table) in [("receiver", &receiver_utility), ("sender", &sender_utility)] {
            if table.len() != 2 || table.iter().any(|row| row.len() != actions.len()) {
                return Err(Error::InvalidScenario(format!(
                    "{name} utility must be a 2 x {} table",
                    actions.len()
                )));
            }
        }
        let scenario = RationalScenario {
            states,
            actions,
            prior,
            receiver_utility,
            sender_utility,
        };
        if !(0..scenario.actions.len()).any(|a| scenario.is_revealing(a)) {
            return Err(Error::InvalidScenario("at least one action must be revealing".into()));
        }
        Ok(scenario)
    }

    /// Builds a scenario from literal strings such as `"3/7"`.
    pub fn from_literals(
        states: &[&str],
        actions: &[&str],
        prior: &str,
        receiver_utility: &[&[&str]],
        sender_utility: &[&[&str]],
    ) -> Result<Self> {
        let table = |t: &[&[&str]]| -> Result<Vec<Vec<Rational>>> {
            t.iter()
                .map(|row| row.iter().map(|c| parse_rational(c)).collect())
                .collect()
        };
        RationalScenario::new(
            states.iter().map(|s| s.to_string()).collect(),
            actions.iter().map(|s| s.to_string()).collect(),
            parse_rational(prior)?,
            table(receiver_utility)?,
            table(sender_utility)?,
        )
    }

    pub fn seller_buyer() -> Self {
        RationalScenario::from_literals(
            &["H", "L"],
            &["B", "NB"],
            "3/10",
            &[&["1", "0"], &["-1", "0"]],
            &[&["1", "0"], &["1", "0"]],
        )
        .expect("preset is valid")
    }

    pub fn speed_limit() -> Self {
        RationalScenario::from_literals(
            &["E", "NE"],
            &["S", "NS"],
            "3/10",
            &[&["-1", "0"], &["1", "0"]],
            &[&["0", "1"], &["0", "1"]],
        )
        .expect("preset is valid")
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn prior(&self) -> &Rational {
        &self.prior
    }

    /// Prior probability of `state`.
    pub fn prior_of(&self, state: usize) -> Rational {
        if state == 0 {
            self.prior.clone()
        } else {
            Rational::one() - &self.prior
        }
    }

    pub fn receiver_utility(&self, state: usize, action: usize) -> &Rational {
        &self.receiver_utility[state][action]
    }

    pub fn sender_utility(&self, state: usize, action: usize) -> &Rational {
        &self.sender_utility[state][action]
    }

    pub fn is_revealing(&self, action: usize) -> bool {
        self.receiver_utility[0][action] != self.receiver_utility[1][action]
    }

    fn expected(table: &[Vec<Rational>], belief: &Rational, action: usize) -> Rational {
        belief * &table[0][action] + (Rational::one() - belief) * &table[1][action]
    }

    /// Receiver's best response at `belief` (probability of the first state).
    /// Exact ties go to the Sender's preferred action, then declaration order.
    pub fn optimal_action(&self, belief: &Rational) -> usize {
        let mut best = 0;
        let mut best_u = Self::expected(&self.receiver_utility, belief, 0);
        let mut best_v = Self::expected(&self.sender_utility, belief, 0);
        for a in 1..self.actions.len() {
            let u = Self::expected(&self.receiver_utility, belief, a);
            let v = Self::expected(&self.sender_utility, belief, a);
            if u > best_u || (u == best_u && v > best_v) {
                best = a;
                best_u = u;
                best_v = v;
            }
        }
        best
    }

    pub fn indirect_sender_value(&self, belief: &Rational) -> Rational {
        Self::expected(&self.sender_utility, belief, self.optimal_action(belief))
    }

    /// Nearest floating-point scenario.
    pub fn to_float(&self) -> Result<Scenario> {
        let table = |t: &[Vec<Rational>]| t.iter().map(|row| row.iter().map(to_f64).collect()).collect();
        Scenario::new(
            self.states.clone(),
            self.actions.clone(),
            to_f64(&self.prior),
            table(&self.receiver_utility),
            table(&self.sender_utility),
        )
    }
}

/// Exact mirror of [`InformationStructure`].
#[derive(Debug, Clone, PartialEq)]
pub struct RationalStructure {
    signals: Vec<String>,
    rows: Vec<Vec<Rational>>,
}

impl RationalStructure {
    /// Validates exact row sums and drops signals that no state sends.
    pub fn new(signals: Vec<String>, rows: Vec<Vec<Rational>>) -> Result<Self> {
        if rows.len() != 2 {
            return Err(Error::InvalidStructure(format!("expected 2 rows, got {}", rows.len())));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != signals.len() {
                return Err(Error::InvalidStructure(format!(
                    "row {i} has {} entries for {} signals",
                    row.len(),
                    signals.len()
                )));
            }
            if row.iter().any(|p| p.is_negative()) {
                return Err(Error::InvalidStructure(format!("row {i} has a negative entry")));
            }
            let sum: Rational = row.iter().sum();
            if !sum.is_one() {
                return Err(Error::InvalidStructure(format!("row {i} sums to {sum}, not 1")));
            }
        }
        for (i, s) in signals.iter().enumerate() {
            if signals[..i].contains(s) {
                return Err(Error::InvalidStructure(format!("duplicate signal `{s}`")));
            }
        }
        let keep: Vec<usize> = (0..signals.len())
            .filter(|&j| rows.iter().any(|r| !r[j].is_zero()))
            .collect();
        Ok(RationalStructure {
            signals: keep.iter().map(|&j| signals[j].clone()).collect(),
            rows: rows
                .iter()
                .map(|r| keep.iter().map(|&j| r[j].clone()).collect())
                .collect(),
        })
    }

    pub fn from_literals(signals: &[&str], rows: &[&[&str]]) -> Result<Self> {
        RationalStructure::new(
            signals.iter().map(|s| s.to_string()).collect(),
            rows.iter()
                .map(|row| row.iter().map(|c| parse_rational(c)).collect())
                .collect::<Result<_>>()?,
        )
    }

    pub fn signals(&self) -> &[String] {
        &self.signals
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn num_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn likelihood(&self, state: usize, signal: usize) -> &Rational {
        &self.rows[state][signal]
    }

    /// Probability of `signal` under the prior.
    pub fn marginal(&self, scenario: &RationalScenario, signal: usize) -> Rational {
        (0..2).map(|w| scenario.prior_of(w) * &self.rows[w][signal]).sum()
    }

    /// Probability of the first state after `signal`.
    pub fn posterior(&self, scenario: &RationalScenario, signal: usize) -> Result<Rational> {
        let m = self.marginal(scenario, signal);
        if m.is_zero() {
            return Err(Error::UnreachableSignal(self.signals[signal].clone()));
        }
        Ok(scenario.prior_of(0) * &self.rows[0][signal] / m)
    }

    /// Every row replaced by the prior-weighted signal marginal.
    pub fn alternative(&self, scenario: &RationalScenario) -> RationalStructure {
        let marginals: Vec<Rational> = (0..self.num_signals()).map(|s| self.marginal(scenario, s)).collect();
        RationalStructure {
            signals: self.signals.clone(),
            rows: vec![marginals.clone(), marginals],
        }
    }

    /// Nearest floating-point structure.
    pub fn to_float(&self) -> Result<InformationStructure> {
        InformationStructure::new(
            self.signals.clone(),
            self.rows.iter().map(|r| r.iter().map(to_f64).collect()).collect(),
        )
    }
}

impl fmt::Display for RationalStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| format!("[{}]", r.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")))
            .collect();
        write!(f, "[{}]", rows.join(", "))
    }
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// What the Receiver sees at the end of a period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactObservation {
    /// The action was revealing, so the state is learned alongside the signal.
    Revealed { signal: usize, state: usize },
    /// Only the signal is seen.
    Pooled { signal: usize },
}

/// `l(o | structure)`: the probability of seeing `observation` if signals
/// come from `structure`. Cells may be zero.
pub fn observation_likelihood(
    scenario: &RationalScenario,
    structure: &RationalStructure,
    observation: ExactObservation,
) -> Rational {
    match observation {
        ExactObservation::Revealed { signal, state } => scenario.prior_of(state) * structure.likelihood(state, signal),
        ExactObservation::Pooled { signal } => structure.marginal(scenario, signal),
    }
}

/// The observation generated by `(state, signal)` when the Receiver holds
/// `perceived_structure`.
pub fn observe(
    scenario: &RationalScenario,
    perceived_structure: &RationalStructure,
    state: usize,
    signal: usize,
) -> Result<ExactObservation> {
    let action = scenario.optimal_action(&perceived_structure.posterior(scenario, signal)?);
    Ok(if scenario.is_revealing(action) {
        ExactObservation::Revealed { signal, state }
    } else {
        ExactObservation::Pooled { signal }
    })
}

/// `Σ_o Pr(o|P) · l(o|P̂)/l(o|P)` for a Receiver holding the announced structure.
pub fn one_step_lambda_expectation(scenario: &RationalScenario, announced: &RationalStructure) -> Result<Rational> {
    let alt = announced.alternative(scenario);
    let mut total = Rational::zero();
    for s in 0..announced.num_signals() {
        let action = scenario.optimal_action(&announced.posterior(scenario, s)?);
        if scenario.is_revealing(action) {
            for w in 0..2 {
                let p = observation_likelihood(scenario, announced, ExactObservation::Revealed { signal: s, state: w });
                if !p.is_zero() {
                    let q = observation_likelihood(scenario, &alt, ExactObservation::Revealed { signal: s, state: w });
                    total += q;
                }
            }
        } else {
            total += announced.marginal(scenario, s);
        }
    }
    Ok(total)
}

/// `Σ_{ω,s} μ₀(ω) truth(s|ω) v(ω, a*(μ_s under perceived))`.
pub fn period_expected_utility(
    scenario: &RationalScenario,
    perceived: &RationalStructure,
    truth: &RationalStructure,
) -> Result<Rational> {
    if perceived.signals() != truth.signals() {
        return Err(Error::SignalMismatch);
    }
    let mut total = Rational::zero();
    for s in 0..truth.num_signals() {
        let action = scenario.optimal_action(&perceived.posterior(scenario, s)?);
        for w in 0..2 {
            total += scenario.prior_of(w) * truth.likelihood(w, s) * scenario.sender_utility(w, action);
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Exact candidate structures
// ---------------------------------------------------------------------------

/// The Receiver's exact indifference belief, if it lies strictly inside (0, 1).
pub fn receiver_threshold(scenario: &RationalScenario) -> Result<Option<Rational>> {
    if scenario.actions().len() != 2 {
        return Err(Error::NotBinary(format!("{} actions", scenario.actions().len())));
    }
    let d1 = scenario.receiver_utility(0, 0) - scenario.receiver_utility(0, 1);
    let d2 = scenario.receiver_utility(1, 0) - scenario.receiver_utility(1, 1);
    let slope = &d1 - &d2;
    if slope.is_zero() {
        return Ok(None);
    }
    let mu = -d2 / slope;
    Ok((mu > Rational::zero() && mu < Rational::one()).then_some(mu))
}

pub fn full_disclosure() -> RationalStructure {
    RationalStructure::new(
        vec!["s1".into(), "s2".into()],
        vec![vec![int(1), int(0)], vec![int(0), int(1)]],
    )
    .expect("identity rows are stochastic")
}

pub fn no_disclosure() -> RationalStructure {
    RationalStructure::new(vec!["s0".into()], vec![vec![int(1)], vec![int(1)]]).expect("unit rows are stochastic")
}

/// Exact one-shot optimum with the same candidate order as the float solver:
/// no disclosure, then the split through the indifference belief, then full
/// disclosure, each replacing the incumbent only on strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactBp {
    pub structure: RationalStructure,
    pub value: Rational,
    /// Probability that the mixing state sends the pooled signal (split only).
    pub x: Option<Rational>,
    /// Marginal probability of the pooled signal (split only).
    pub e: Option<Rational>,
    pub pooled_state: Option<usize>,
}

pub fn bp_optimal(scenario: &RationalScenario) -> Result<ExactBp> {
    let mu0 = scenario.prior().clone();
    let one = Rational::one();
    let threshold = receiver_threshold(scenario)?;
    let v = |mu: &Rational| scenario.indirect_sender_value(mu);

    let mut best = v(&mu0);
    let mut choice = 0;
    if let Some(mu_star) = threshold.as_ref().filter(|m| **m != mu0) {
        let split = if *mu_star > mu0 {
            let w = &mu0 / mu_star;
            &w * v(mu_star) + (&one - &w) * v(&Rational::zero())
        } else {
            let w = (&one - &mu0) / (&one - mu_star);
            &w * v(mu_star) + (&one - &w) * v(&one)
        };
        if split > best {
            best = split;
            choice = 1;
        }
    }
    if &mu0 * v(&one) + (&one - &mu0) * v(&Rational::zero()) > best {
        choice = 2;
    }

    let (structure, x, e, pooled_state) = match (choice, threshold) {
        (1, Some(mu_star)) if mu_star > mu0 => {
            let x = &mu0 * (&one - &mu_star) / ((&one - &mu0) * &mu_star);
            let rows = vec![vec![one.clone(), Rational::zero()], vec![x.clone(), &one - &x]];
            let e = &mu0 + (&one - &mu0) * &x;
            (split(rows)?, Some(x), Some(e), Some(0))
        }
        (1, Some(mu_star)) => {
            let x = (&one - &mu0) * &mu_star / (&mu0 * (&one - &mu_star));
            let rows = vec![vec![x.clone(), &one - &x], vec![one.clone(), Rational::zero()]];
            let e = &mu0 * &x + (&one - &mu0);
            (split(rows)?, Some(x), Some(e), Some(1))
        }
        (2, _) => (full_disclosure(), None, None, None),
        _ => (no_disclosure(), None, None, None),
    };
    Ok(ExactBp {
        value: period_expected_utility(scenario, &structure, &structure)?,
        structure,
        x,
        e,
        pooled_state,
    })
}

fn split(rows: Vec<Vec<Rational>>) -> Result<RationalStructure> {
    RationalStructure::new(vec!["s1".into(), "s2".into()], rows)
}

/// Exact member of the interpolation between the BP split (`ε = 0`) and full
/// disclosure (`ε = 1`), with signals `(s0, s1, s2)`.
pub fn epsilon_structure(scenario: &RationalScenario, epsilon: &Rational) -> Result<RationalStructure> {
    if epsilon.is_negative() || *epsilon > Rational::one() {
        return Err(Error::EpsilonOutOfRange(to_f64(epsilon)));
    }
    let bp = bp_optimal(scenario)?;
    let (Some(x), Some(f)) = (bp.x, bp.pooled_state) else {
        return Err(Error::ShapeMismatch(
            "BP-optimal structure is not a two-signal split".into(),
        ));
    };
    let one = Rational::one();
    let mut rows = vec![Vec::new(), Vec::new()];
    rows[f] = vec![epsilon.clone(), &one - epsilon, Rational::zero()];
    rows[1 - f] = vec![Rational::zero(), &x * (&one - epsilon), (&one - &x) + &x * epsilon];
    RationalStructure::new(vec!["s0".into(), "s1".into(), "s2".into()], rows)
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

/// A merged class of histories at the end of period `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeNode {
    pub depth: usize,
    pub probability: Rational,
    /// Exact Bayes factor, alternative over announced.
    pub lambda: Rational,
    pub perceived: Perceived,
    pub absorbed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerateOptions {
    pub comparison: Comparison,
    pub budget: usize,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions {
            comparison: Comparison::Strict,
            budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Exact adoption probabilities and expected Sender utilities for `t = 1..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactCurve {
    pub adoption: Vec<Rational>,
    pub sender_utility: Vec<Rational>,
    /// Distinct nodes alive after each period, absorbed ones included.
    pub node_counts: Vec<usize>,
    /// Nodes after the last period.
    pub frontier: Vec<OutcomeNode>,
}

impl ExactCurve {
    /// `Σ_{t ≤ T} δ^{t−1} E[v_t]`.
    pub fn discounted_utility(&self, delta: &Rational) -> Rational {
        let mut discount = Rational::one();
        let mut total = Rational::zero();
        for v in &self.sender_utility {
            total += &discount * v;
            discount *= delta;
        }
        total
    }
}

/// Per-perception transition table: `(λ multiplier, probability)` pairs with
/// equal multipliers merged, plus the expected Sender utility.
struct Transitions {
    moves: Vec<(Rational, Rational)>,
    expected_utility: Rational,
}

fn transitions(
    scenario: &RationalScenario,
    announced: &RationalStructure,
    alt: &RationalStructure,
    perceived: &RationalStructure,
) -> Result<Transitions> {
    let mut moves: BTreeMap<Rational, Rational> = BTreeMap::new();
    let mut expected_utility = Rational::zero();
    for s in 0..announced.num_signals() {
        let action = scenario.optimal_action(&perceived.posterior(scenario, s)?);
        for w in 0..2 {
            let p = scenario.prior_of(w) * announced.likelihood(w, s);
            if p.is_zero() {
                continue;
            }
            expected_utility += &p * scenario.sender_utility(w, action);
            let multiplier = if scenario.is_revealing(action) {
                observation_likelihood(scenario, alt, ExactObservation::Revealed { signal: s, state: w }) / &p
            } else {
                Rational::one()
            };
            *moves.entry(multiplier).or_insert_with(Rational::zero) += p;
        }
    }
    Ok(Transitions {
        moves: moves.into_iter().collect(),
        expected_utility,
    })
}

fn next_perception(
    current: Perceived,
    lambda: &[i32],
    basis: &LambdaBasis,
    alpha: &Rational,
    ln_alpha: f64,
    comparison: Comparison,
) -> Perceived {
    // `sign` orients the test: +1 for λ against α, -1 for 1/λ against α
    let exceeds = |sign: f64| {
        let gap = sign * basis.ln(lambda) - ln_alpha;
        if gap.abs() > EXACT_FALLBACK_GAP {
            return gap > 0.0;
        }
        let value = basis.value(lambda);
        let x = if sign > 0.0 { value } else { value.recip() };
        match comparison {
            Comparison::Strict => x > *alpha,
            Comparison::Weak => x >= *alpha,
        }
    };
    match current {
        Perceived::Announced if exceeds(1.0) => Perceived::Alternative,
        Perceived::Alternative if exceeds(-1.0) => Perceived::Announced,
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Bayes-factor keys
// ---------------------------------------------------------------------------

/// Pairwise-coprime integers such that every λ multiplier is a product of
/// integer powers of them. Exponent vectors over this basis are unique, so
/// they identify λ exactly without normalising big rationals.
struct LambdaBasis {
    bases: Vec<BigInt>,
    logs: Vec<f64>,
}

impl LambdaBasis {
    fn new(multipliers: &[&Rational]) -> Self {
        let mut bases: Vec<BigInt> = Vec::new();
        let mut pending: Vec<BigInt> = multipliers
            .iter()
            .flat_map(|m| [m.numer().clone(), m.denom().clone()])
            .filter(|n| *n > BigInt::one())
            .collect();
        // factor refinement: split any two values that share a factor
        while let Some(mut n) = pending.pop() {
            let mut i = 0;
            while i < bases.len() && n > BigInt::one() {
                let g = n.gcd(&bases[i]);
                if g.is_one() {
                    i += 1;
                    continue;
                }
                let b = bases.swap_remove(i);
                for part in [&b / &g, g.clone()] {
                    if part > BigInt::one() {
                        pending.push(part);
                    }
                }
                n /= &g;
                pending.push(n.clone());
                n = BigInt::one();
            }
            if n > BigInt::one() && !bases.contains(&n) {
                bases.push(n);
            }
        }
        bases.sort();
        let logs = bases.iter().map(ln_big).collect();
        LambdaBasis { bases, logs }
    }

    fn exponents_of(&self, n: &BigInt) -> Vec<i32> {
        let mut rest = n.clone();
        let exps = self
            .bases
            .iter()
            .map(|b| {
                let mut e = 0;
                while (&rest % b).is_zero() {
                    rest /= b;
                    e += 1;
                }
                e
            })
            .collect();
        debug_assert!(rest.is_one());
        exps
    }

    fn exponents(&self, m: &Rational) -> Vec<i32> {
        let up = self.exponents_of(m.numer());
        let down = self.exponents_of(m.denom());
        up.iter().zip(&down).map(|(a, b)| a - b).collect()
    }

    fn ln(&self, exps: &[i32]) -> f64 {
        exps.iter().zip(&self.logs).map(|(&e, l)| e as f64 * l).sum()
    }

    fn value(&self, exps: &[i32]) -> Rational {
        let mut numer = BigInt::one();
        let mut denom = BigInt::one();
        for (&e, b) in exps.iter().zip(&self.bases) {
            let p = num_traits::pow(b.clone(), e.unsigned_abs() as usize);
            if e >= 0 {
                numer *= p;
            } else {
                denom *= p;
            }
        }
        Rational::new(numer, denom)
    }
}

fn ln_big(n: &BigInt) -> f64 {
    let shift = n.bits().saturating_sub(60);
    let top: BigInt = n >> shift;
    to_f64(&Rational::from_integer(top)).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Log-space gap below which the threshold test falls back to exact arithmetic.
const EXACT_FALLBACK_GAP: f64 = 1e-9;

/// Exact adoption curve with default options.
pub fn enumerate(
    scenario: &RationalScenario,
    announced: &RationalStructure,
    alpha: &Rational,
    horizon: usize,
) -> Result<ExactCurve> {
    enumerate_with(scenario, announced, alpha, horizon, &EnumerateOptions::default())
}

/// Exact adoption curve.
///
/// Node masses after period `t` are kept as integer numerators over `D^t`,
/// where `D` is the common denominator of the one-period outcome
/// probabilities, so the inner loop needs no rational normalisation.
pub fn enumerate_with(
    scenario: &RationalScenario,
    announced: &RationalStructure,
    alpha: &Rational,
    horizon: usize,
    options: &EnumerateOptions,
) -> Result<ExactCurve> {
    if *alpha <= Rational::one() {
        return Err(Error::InvalidAlpha(alpha.to_string()));
    }
    let alt = announced.alternative(scenario);
    let table = [
        transitions(scenario, announced, &alt, announced)?,
        transitions(scenario, announced, &alt, &alt)?,
    ];
    let default_action = scenario.optimal_action(scenario.prior());
    let alternative_absorbs = !scenario.is_revealing(default_action);

    let denominator = table
        .iter()
        .flat_map(|tr| tr.moves.iter().map(|(_, p)| p.denom().clone()))
        .fold(BigInt::one(), |acc, d| acc.lcm(&d));
    let basis = LambdaBasis::new(
        &table
            .iter()
            .flat_map(|tr| tr.moves.iter().map(|(m, _)| m))
            .collect::<Vec<_>>(),
    );
    let weights: Vec<Vec<(Vec<i32>, BigInt)>> = table
        .iter()
        .map(|tr| {
            tr.moves
                .iter()
                .map(|(m, p)| {
                    (
                        basis.exponents(m),
                        (p * Rational::from_integer(denominator.clone())).to_integer(),
                    )
                })
                .collect()
        })
        .collect();
    let ln_alpha = to_f64(alpha).ln();

    let mut live: HashMap<(Perceived, Vec<i32>), BigInt> = HashMap::new();
    live.insert((Perceived::Announced, vec![0; basis.bases.len()]), BigInt::one());
    let mut absorbed: HashMap<Vec<i32>, Rational> = HashMap::new();
    let mut absorbed_numer = BigInt::zero();
    // D^(t-1): denominator of masses at the start of period t
    let mut scale = BigInt::one();

    let mut curve = ExactCurve {
        adoption: Vec::with_capacity(horizon),
        sender_utility: Vec::with_capacity(horizon),
        node_counts: Vec::with_capacity(horizon),
        frontier: Vec::new(),
    };

    for t in 1..=horizon {
        let mut mass_by_perception = [BigInt::zero(), BigInt::zero()];
        let mut next: HashMap<(Perceived, Vec<i32>), BigInt> = HashMap::with_capacity(live.len() * 2);
        let mut newly_absorbed = BigInt::zero();
        for ((current, lambda), mass) in live {
            let perceived = next_perception(current, &lambda, &basis, alpha, ln_alpha, options.comparison);
            let slot = match perceived {
                Perceived::Announced => 0,
                Perceived::Alternative => 1,
            };
            mass_by_perception[slot] += &mass;
            if perceived == Perceived::Alternative && alternative_absorbs {
                newly_absorbed += &mass;
                let p = Rational::new(mass, scale.clone());
                *absorbed.entry(lambda).or_insert_with(Rational::zero) += p;
                continue;
            }
            for (step, w) in &weights[slot] {
                let key = (perceived, lambda.iter().zip(step).map(|(a, b)| a + b).collect());
                *next.entry(key).or_insert_with(BigInt::zero) += &mass * w;
            }
        }
        live = next;

        let period_scale = Rational::from_integer(scale.clone());
        let [announced_mass, alternative_mass] = mass_by_perception;
        curve
            .adoption
            .push(Rational::from_integer(announced_mass.clone()) / &period_scale);
        curve.sender_utility.push(
            (Rational::from_integer(announced_mass) * &table[0].expected_utility
                + Rational::from_integer(alternative_mass + &absorbed_numer) * &table[1].expected_utility)
                / &period_scale,
        );

        absorbed_numer = (absorbed_numer + newly_absorbed) * &denominator;
        scale *= &denominator;
        let count = live.len() + absorbed.len();
        if count > options.budget {
            return Err(Error::BudgetExceeded {
                budget: options.budget,
                period: t,
            });
        }
        let total: BigInt = live.values().sum::<BigInt>() + &absorbed_numer;
        assert!(total == scale, "probability mass not conserved at period {t}");
        curve.node_counts.push(count);
    }

    let scale = Rational::from_integer(scale);
    let mut frontier: Vec<OutcomeNode> = live
        .into_iter()
        .map(|((perceived, lambda), mass)| OutcomeNode {
            depth: horizon,
            probability: Rational::from_integer(mass) / &scale,
            lambda: basis.value(&lambda),
            perceived,
            absorbed: false,
        })
        .chain(absorbed.into_iter().map(|(lambda, probability)| OutcomeNode {
            depth: horizon,
            probability,
            lambda: basis.value(&lambda),
            perceived: Perceived::Alternative,
            absorbed: true,
        }))
        .collect();
    frontier.sort_by(|a, b| (a.absorbed, a.perceived, &a.lambda).cmp(&(b.absorbed, b.perceived, &b.lambda)));
    curve.frontier = frontier;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn parses_literals_exactly() {
        assert_eq!(r("3/7"), ratio(3, 7));
        assert_eq!(r("0.3"), ratio(3, 10));
        assert_eq!(r("-1"), int(-1));
        assert_eq!(r(" 1.5/2 "), ratio(3, 4));
        assert_eq!(r(".25"), ratio(1, 4));
        assert_eq!(r("1e-3"), ratio(1, 1000));
        assert_eq!(r("2.5E2"), int(250));
        for bad in ["", "1/0", "abc", "1..2", "1/", "--1", "0x10"] {
            assert!(matches!(parse_rational(bad), Err(Error::InvalidRational(_))), "{bad}");
        }
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(to_decimal_string(&ratio(7, 10), 12), "0.700000000000");
        assert_eq!(to_decimal_string(&ratio(1, 3), 4), "0.3333");
        assert_eq!(to_decimal_string(&ratio(2, 3), 4), "0.6667");
        assert_eq!(to_decimal_string(&ratio(-1, 8), 2), "-0.13");
        assert_eq!(to_decimal_string(&ratio(-1, 1000), 2), "0.00");
        assert_eq!(to_decimal_string(&int(3), 0), "3");
        assert_eq!(to_f64(&ratio(3, 7)), 3.0 / 7.0);
    }

    #[test]
    fn exact_seller_buyer_optimum() {
        let sb = RationalScenario::seller_buyer();
        let bp = bp_optimal(&sb).unwrap();
        assert_eq!(
            bp.structure.rows(),
            &[vec![int(1), int(0)], vec![ratio(3, 7), ratio(4, 7)]]
        );
        assert_eq!(bp.value, ratio(3, 5));
        assert_eq!(bp.x, Some(ratio(3, 7)));
        assert_eq!(bp.e, Some(ratio(3, 5)));
        assert_eq!(receiver_threshold(&sb).unwrap(), Some(ratio(1, 2)));
    }

    #[test]
    fn speed_limit_optimum_is_worth_six_tenths() {
        let sl = RationalScenario::speed_limit();
        let bp = bp_optimal(&sl).unwrap();
        assert_eq!(
            bp.structure.rows(),
            &[vec![int(1), int(0)], vec![ratio(3, 7), ratio(4, 7)]]
        );
        assert_eq!(bp.value, ratio(3, 5));
    }

    #[test]
    fn seller_buyer_likelihood_table() {
        let sb = RationalScenario::seller_buyer();
        let p = bp_optimal(&sb).unwrap().structure;
        let alt = p.alternative(&sb);
        let (h, l) = (0, 1);
        let cells = [
            (ExactObservation::Revealed { signal: h, state: 0 }, "0.3", "0.18"),
            (ExactObservation::Revealed { signal: h, state: 1 }, "0.3", "0.42"),
            (ExactObservation::Pooled { signal: l }, "0.4", "0.4"),
        ];
        for (o, under_p, under_alt) in cells {
            assert_eq!(observation_likelihood(&sb, &p, o), r(under_p));
            assert_eq!(observation_likelihood(&sb, &alt, o), r(under_alt));
        }
        assert_eq!(
            observe(&sb, &p, 1, h).unwrap(),
            ExactObservation::Revealed { signal: h, state: 1 }
        );
        assert_eq!(observe(&sb, &p, 1, l).unwrap(), ExactObservation::Pooled { signal: l });
    }

    #[test]
    fn seller_buyer_lambda_is_a_martingale() {
        let sb = RationalScenario::seller_buyer();
        let p = bp_optimal(&sb).unwrap().structure;
        assert!(one_step_lambda_expectation(&sb, &p).unwrap().is_one());
    }

    #[test]
    fn adoption_at_second_period() {
        let sb = RationalScenario::seller_buyer();
        let p = bp_optimal(&sb).unwrap().structure;
        let curve = enumerate(&sb, &p, &r("139/100"), 2).unwrap();
        assert_eq!(curve.adoption, vec![int(1), ratio(7, 10)]);
        assert_eq!(curve.sender_utility[0], ratio(3, 5));
        assert_eq!(curve.sender_utility[1], ratio(7, 10) * ratio(3, 5));
    }

    #[test]
    fn curve_is_nonincreasing_when_absorbing() {
        let sb = RationalScenario::seller_buyer();
        let p = bp_optimal(&sb).unwrap().structure;
        let curve = enumerate(&sb, &p, &r("1.39"), 40).unwrap();
        assert!(curve.adoption.windows(2).all(|w| w[1] <= w[0]));
        let total: Rational = curve.frontier.iter().map(|n| n.probability.clone()).sum();
        assert!(total.is_one());
        // with an absorbing alternative every live node still holds the announced structure
        assert!(curve
            .frontier
            .iter()
            .all(|n| n.absorbed || n.perceived == Perceived::Announced));
        assert!(curve.frontier.iter().any(|n| n.absorbed));
    }

    #[test]
    fn strict_and_weak_differ_on_the_boundary() {
        let sb = RationalScenario::seller_buyer();
        let p = bp_optimal(&sb).unwrap().structure;
        let strict = enumerate(&sb, &p, &r("7/5"), 3).unwrap();
        let weak = enumerate_with(
            &sb,
            &p,
            &r("7/5"),
            3,
            &EnumerateOptions {
                comparison: Comparison::Weak,
                ..EnumerateOptions::default()
            },
        )
        .unwrap();
        assert_eq!(strict.adoption[1], int(1));
        assert_eq!(weak.adoption[1], ratio(7, 10));
    }

    #[test]
    fn extremes_persist() {
        let sb = RationalScenario::seller_buyer();
        for p in [full_disclosure(), no_disclosure()] {
            let curve = enumerate(&sb, &p, &r("1.01"), 12).unwrap();
            assert!(curve.adoption.iter().all(|l| l.is_one()));
        }
    }

    #[test]
    fn budget_is_enforced() {
        let sb = RationalScenario::seller_buyer();
        let p = bp_optimal(&sb).unwrap().structure;
        let opts = EnumerateOptions {
            budget: 3,
            ..EnumerateOptions::default()
        };
        assert!(matches!(
            enumerate_with(&sb, &p, &r("3"), 10, &opts),
            Err(Error::BudgetExceeded { budget: 3, .. })
        ));
        assert!(matches!(enumerate(&sb, &p, &int(1), 3), Err(Error::InvalidAlpha(_))));
    }

    #[test]
    fn epsilon_family_table() {
        let sb = RationalScenario::seller_buyer();
        let eps = ratio(1, 4);
        let p = epsilon_structure(&sb, &eps).unwrap();
        let alt = p.alternative(&sb);
        let (hh, h, l) = (0, 1, 2);
        let one = Rational::one();
        let cells = [
            (
                ExactObservation::Revealed { signal: hh, state: 0 },
                ratio(3, 10) * &eps,
                ratio(9, 100) * &eps,
            ),
            (
                ExactObservation::Revealed { signal: hh, state: 1 },
                int(0),
                ratio(21, 100) * &eps,
            ),
            (
                ExactObservation::Revealed { signal: h, state: 0 },
                ratio(3, 10) * (&one - &eps),
                ratio(18, 100) * (&one - &eps),
            ),
            (
                ExactObservation::Revealed { signal: h, state: 1 },
                ratio(3, 10) * (&one - &eps),
                ratio(42, 100) * (&one - &eps),
            ),
            (
                ExactObservation::Pooled { signal: l },
                ratio(4, 10) + ratio(3, 10) * &eps,
                ratio(4, 10) + ratio(3, 10) * &eps,
            ),
        ];
        for (o, under_p, under_alt) in cells {
            assert_eq!(observation_likelihood(&sb, &p, o), under_p);
            assert_eq!(observation_likelihood(&sb, &alt, o), under_alt);
        }
        assert!(epsilon_structure(&sb, &ratio(3, 2)).is_err());
        assert_eq!(
            epsilon_structure(&sb, &int(0)).unwrap().rows(),
            bp_optimal(&sb).unwrap().structure.rows()
        );
    }

    #[test]
    fn lambda_basis_is_coprime_and_exact() {
        let ms = [ratio(4, 3), int(6), ratio(9, 10), ratio(3, 5), ratio(7, 5)];
        let basis = LambdaBasis::new(&ms.iter().collect::<Vec<_>>());
        for (i, a) in basis.bases.iter().enumerate() {
            for b in &basis.bases[i + 1..] {
                assert!(a.gcd(b).is_one(), "{a} and {b} share a factor");
            }
        }
        let mut lambda = vec![0; basis.bases.len()];
        let mut exact = Rational::one();
        for m in ms.iter().chain(ms.iter().rev()).chain([&ms[1], &ms[3]]) {
            for (e, d) in lambda.iter_mut().zip(basis.exponents(m)) {
                *e += d;
            }
            exact *= m;
            assert_eq!(basis.value(&lambda), exact);
            assert!((basis.ln(&lambda) - to_f64(&exact).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn float_round_trip() {
        let sb = RationalScenario::seller_buyer();
        assert_eq!(sb.to_float().unwrap(), Scenario::seller_buyer());
        let p = bp_optimal(&sb).unwrap().structure.to_float().unwrap();
        assert_eq!(p.rows()[1][0], 3.0 / 7.0);
    }
}
