//! Scenario primitives: beliefs, information structures, the uninformative
//! alternative, Bayesian posteriors and the Receiver's optimal action.
//!
//! The state space is binary. A [`Belief`] is the probability of the first
//! state. Utility tables are indexed `[state][action]`, and an
//! [`InformationStructure`] stores one row of signal likelihoods per state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for Receiver and Sender indifference between actions.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Tolerance on row sums of an information structure.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Belief
// ---------------------------------------------------------------------------

/// Probability assigned to the first state.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Belief(f64);

impl Belief {
    /// Builds a belief, clamping into `[0, 1]`.
    pub fn new(p: f64) -> Self {
        Belief(p.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Probability of state `index` (0 or 1).
    pub fn of_state(self, index: usize) -> f64 {
        if index == 0 {
            self.0
        } else {
            1.0 - self.0
        }
    }

    /// Prior-weighted mix `μ·q1 + (1−μ)·q2`. Equal inputs come back unchanged
    /// so that identical rows yield bit-identical marginals.
    pub fn mix(self, q1: f64, q2: f64) -> f64 {
        if q1 == q2 {
            q1
        } else {
            self.0 * q1 + (1.0 - self.0) * q2
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// A binary-state persuasion environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    states: Vec<String>,
    actions: Vec<String>,
    prior: Belief,
    receiver_utility: Vec<Vec<f64>>,
    sender_utility: Vec<Vec<f64>>,
}

impl Scenario {
    /// Validates and builds a scenario.
    ///
    /// `prior` is the probability of `states[0]`; the utility tables are
    /// row-major with one row per state and one column per action.
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        prior: f64,
        receiver_utility: Vec<Vec<f64>>,
        sender_utility: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if states.len() != 2 {
            return Err(Error::InvalidScenario(format!(
                "exactly two states are supported, got {}",
                states.len()
            )));
        }
        if actions.len() < 2 {
            return Err(Error::InvalidScenario("at least two actions are required".into()));
        }
        check_unique(&states, "state")?;
        check_unique(&actions, "action")?;
        if !(prior > 0.0 && prior < 1.0) {
            return Err(Error::InvalidScenario(format!(
                "prior must lie strictly inside (0, 1), got {prior}"
            )));
        }
        for (name, table) in [
            ("receiver_utility", &receiver_utility),
            ("sender_utility", &sender_utility),
        ] {
            if table.len() != states.len() || table.iter().any(|row| row.len() != actions.len()) {
                return Err(Error::InvalidScenario(format!(
                    "{name} must be a {}x{} table",
                    states.len(),
                    actions.len()
                )));
            }
            if table.iter().flatten().any(|u| !u.is_finite()) {
                return Err(Error::InvalidScenario(format!("{name} has non-finite entries")));
            }
        }
        let scenario = Scenario {
            states,
            actions,
            prior: Belief(prior),
            receiver_utility,
            sender_utility,
        };
        if !(0..scenario.actions.len()).any(|a| scenario.is_revealing(a)) {
            return Err(Error::InvalidScenario("at least one action must be revealing".into()));
        }
        Ok(scenario)
    }

    /// The seller-buyer environment: states (H, L), actions (B, NB), prior 0.3.
    pub fn seller_buyer() -> Self {
        Scenario::new(
            labels(&["H", "L"]),
            labels(&["B", "NB"]),
            0.3,
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        )
        .expect("preset is valid")
    }

    /// The speed-limit enforcement environment: states (E, NE), actions (S, NS), prior 0.3.
    pub fn speed_limit() -> Self {
        Scenario::new(
            labels(&["E", "NE"]),
            labels(&["S", "NS"]),
            0.3,
            vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        )
        .expect("preset is valid")
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn prior(&self) -> Belief {
        self.prior
    }

    pub fn receiver_utility(&self, state: usize, action: usize) -> f64 {
        self.receiver_utility[state][action]
    }

    pub fn sender_utility(&self, state: usize, action: usize) -> f64 {
        self.sender_utility[state][action]
    }

    pub fn receiver_table(&self) -> &[Vec<f64>] {
        &self.receiver_utility
    }

    pub fn sender_table(&self) -> &[Vec<f64>] {
        &self.sender_utility
    }

    pub fn is_binary(&self) -> bool {
        self.actions.len() == 2
    }

    pub fn action_index(&self, label: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| Error::UnknownAction(label.to_string()))
    }

    pub fn state_index(&self, label: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown state `{label}`")))
    }

    /// An action is revealing when its Receiver payoff differs across states.
    pub fn is_revealing(&self, action: usize) -> bool {
        (self.receiver_utility[0][action] - self.receiver_utility[1][action]).abs() > TIE_TOLERANCE
    }

    /// Label-based form of [`Scenario::is_revealing`].
    pub fn is_revealing_label(&self, action: &str) -> Result<bool> {
        Ok(self.is_revealing(self.action_index(action)?))
    }

    pub fn expected_receiver_utility(&self, belief: Belief, action: usize) -> f64 {
        belief.value() * self.receiver_utility[0][action] + (1.0 - belief.value()) * self.receiver_utility[1][action]
    }

    pub fn expected_sender_utility(&self, belief: Belief, action: usize) -> f64 {
        belief.value() * self.sender_utility[0][action] + (1.0 - belief.value()) * self.sender_utility[1][action]
    }

    /// The Receiver's best response at `belief`.
    ///
    /// Ties within [`TIE_TOLERANCE`] go to the action with the higher Sender
    /// expected utility at the same belief, then to declaration order.
    pub fn optimal_action(&self, belief: Belief) -> usize {
        let mut best = 0;
        let mut best_u = self.expected_receiver_utility(belief, 0);
        let mut best_v = self.expected_sender_utility(belief, 0);
        for a in 1..self.actions.len() {
            let u = self.expected_receiver_utility(belief, a);
            let v = self.expected_sender_utility(belief, a);
            if u > best_u + TIE_TOLERANCE || ((u - best_u).abs() <= TIE_TOLERANCE && v > best_v + TIE_TOLERANCE) {
                best = a;
                best_u = u;
                best_v = v;
            }
        }
        best
    }

    /// Sender's expected utility when both players hold `belief` and the
    /// Receiver best-responds to it.
    pub fn indirect_sender_value(&self, belief: Belief) -> f64 {
        self.expected_sender_utility(belief, self.optimal_action(belief))
    }

    /// Realized period utilities for `(state, action)`.
    pub fn outcome(&self, state: usize, action: usize) -> UtilityOutcome {
        UtilityOutcome {
            action,
            state,
            receiver_utility: self.receiver_utility[state][action],
            sender_utility: self.sender_utility[state][action],
        }
    }

    pub(crate) fn max_abs_sender_utility(&self) -> f64 {
        self.sender_utility
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn check_unique(labels: &[String], kind: &str) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::InvalidScenario(format!("duplicate {kind} label `{l}`")));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// UtilityOutcome
// ---------------------------------------------------------------------------

/// Period utilities realized by one action in one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityOutcome {
    pub action: usize,
    pub state: usize,
    pub receiver_utility: f64,
    pub sender_utility: f64,
}

// ---------------------------------------------------------------------------
// InformationStructure
// ---------------------------------------------------------------------------

/// A signal-likelihood matrix with one row per state.
///
/// Signals that no state ever sends are dropped at construction, so every
/// remaining signal has positive marginal under any interior prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationStructure {
    signals: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl InformationStructure {
    pub fn new(signals: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidStructure("no rows".into()));
        }
        if signals.is_empty() {
            return Err(Error::InvalidStructure("no signals".into()));
        }
        if let Some(dup) = signals.iter().enumerate().find(|(i, l)| signals[..*i].contains(l)) {
            return Err(Error::InvalidStructure(format!("duplicate signal label `{}`", dup.1)));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != signals.len() {
                return Err(Error::InvalidStructure(format!(
                    "row {i} has {} entries for {} signals",
                    row.len(),
                    signals.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidStructure(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidStructure(format!("row {i} sums to {sum}, not 1")));
            }
        }
        let keep: Vec<usize> = (0..signals.len())
            .filter(|&s| rows.iter().any(|row| row[s] > 0.0))
            .collect();
        let signals = keep.iter().map(|&s| signals[s].clone()).collect();
        let rows = rows.iter().map(|row| keep.iter().map(|&s| row[s]).collect()).collect();
        Ok(InformationStructure { signals, rows })
    }

    /// Same matrix under new signal labels.
    pub fn relabeled(&self, signals: Vec<String>) -> Result<Self> {
        if signals.len() != self.signals.len() {
            return Err(Error::InvalidStructure(format!(
                "expected {} signal labels, got {}",
                self.signals.len(),
                signals.len()
            )));
        }
        InformationStructure::new(signals, self.rows.clone())
    }

    pub fn signals(&self) -> &[String] {
        &self.signals
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn num_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn likelihood(&self, state: usize, signal: usize) -> f64 {
        self.rows[state][signal]
    }

    pub fn signal_index(&self, label: &str) -> Result<usize> {
        self.signals
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::UnknownSignal(label.to_string()))
    }

    /// Marginal probability of `signal` under `belief`.
    pub fn marginal(&self, belief: Belief, signal: usize) -> f64 {
        belief.mix(self.rows[0][signal], self.rows[1][signal])
    }

    /// Every signal reveals the state with certainty.
    pub fn is_full_disclosure(&self) -> bool {
        (0..self.signals.len()).all(|s| self.rows.iter().filter(|row| row[s] > 0.0).count() == 1)
    }

    /// All rows coincide, so no signal moves the belief.
    pub fn is_no_disclosure(&self) -> bool {
        self.rows.iter().all(|row| {
            row.iter()
                .zip(&self.rows[0])
                .all(|(a, b)| (a - b).abs() <= ROW_SUM_TOLERANCE)
        })
    }

    /// Entry-wise comparison within `tol`, requiring the same signal count.
    pub fn approx_eq(&self, other: &InformationStructure, tol: f64) -> bool {
        self.signals.len() == other.signals.len()
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .flatten()
                .zip(other.rows.iter().flatten())
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    fn check_rows(&self, scenario: &Scenario) -> Result<()> {
        if self.rows.len() != scenario.states().len() {
            return Err(Error::InvalidStructure(format!(
                "{} rows for {} states",
                self.rows.len(),
                scenario.states().len()
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// The uninformative alternative to `announced`: every row equals the
/// prior-weighted signal marginal of `announced`.
pub fn alternative_structure(announced: &InformationStructure, scenario: &Scenario) -> Result<InformationStructure> {
    announced.check_rows(scenario)?;
    let prior = scenario.prior();
    let marginal: Vec<f64> = (0..announced.num_signals())
        .map(|s| announced.marginal(prior, s))
        .collect();
    Ok(InformationStructure {
        signals: announced.signals.clone(),
        rows: vec![marginal; announced.rows.len()],
    })
}

/// Bayes-rule posterior on the first state after `signal` is observed under `structure`.
pub fn posterior(prior: Belief, structure: &InformationStructure, signal: usize) -> Result<Belief> {
    if signal >= structure.num_signals() {
        return Err(Error::UnknownSignal(format!("#{signal}")));
    }
    let q1 = structure.likelihood(0, signal);
    let q2 = structure.likelihood(1, signal);
    if q1 == q2 {
        return if q1 > 0.0 {
            Ok(prior)
        } else {
            Err(Error::UnreachableSignal(structure.signals[signal].clone()))
        };
    }
    let num = prior.value() * q1;
    let den = num + (1.0 - prior.value()) * q2;
    if den <= 0.0 {
        return Err(Error::UnreachableSignal(structure.signals[signal].clone()));
    }
    Ok(Belief::new(num / den))
}

/// Sender's period expected utility when the Receiver updates with
/// `perceived` while signals are actually generated by `truth`.
pub fn period_expected_utility(
    scenario: &Scenario,
    perceived: &InformationStructure,
    truth: &InformationStructure,
) -> Result<f64> {
    perceived.check_rows(scenario)?;
    truth.check_rows(scenario)?;
    if perceived.signals != truth.signals {
        return Err(Error::SignalMismatch);
    }
    let prior = scenario.prior();
    let mut total = 0.0;
    for s in 0..truth.num_signals() {
        let action = scenario.optimal_action(posterior(prior, perceived, s)?);
        for state in 0..2 {
            total += prior.of_state(state) * truth.likelihood(state, s) * scenario.sender_utility(state, action);
        }
    }
    Ok(total)
}

/// Distribution over posteriors induced by `structure` at the scenario prior.
/// Signals with the same posterior (within [`TIE_TOLERANCE`]) are pooled.
pub fn posterior_distribution(scenario: &Scenario, structure: &InformationStructure) -> Result<Vec<(Belief, f64)>> {
    structure.check_rows(scenario)?;
    let prior = scenario.prior();
    let mut support: Vec<(Belief, f64)> = Vec::new();
    for s in 0..structure.num_signals() {
        let mu = posterior(prior, structure, s)?;
        let mass = structure.marginal(prior, s);
        match support
            .iter_mut()
            .find(|(b, _)| (b.value() - mu.value()).abs() <= TIE_TOLERANCE)
        {
            Some(entry) => entry.1 += mass,
            None => support.push((mu, mass)),
        }
    }
    support.sort_by(|a, b| a.0.value().total_cmp(&b.0.value()));
    Ok(support)
}

/// `Σ π(μ)·v̂(μ)` over the posterior distribution of `structure`.
pub fn value_from_posteriors(scenario: &Scenario, structure: &InformationStructure) -> Result<f64> {
    Ok(posterior_distribution(scenario, structure)?
        .into_iter()
        .map(|(mu, w)| w * scenario.indirect_sender_value(mu))
        .sum())
}
