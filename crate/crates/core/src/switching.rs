//! Observation likelihoods, the cumulative Bayes factor and the threshold
//! switching rule.
//!
//! The Bayes factor is always oriented alternative-over-announced and is
//! tracked in log space. A Receiver holding the announced structure moves to
//! the alternative when `λ > α`; a Receiver holding the alternative moves back
//! when `1/λ > α`. The check runs at the start of a period, on the history
//! through the previous period, before the new signal arrives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{alternative_structure, posterior, InformationStructure, Scenario, UtilityOutcome};

/// Absolute slack on log-space threshold comparisons.
pub const THRESHOLD_SLACK: f64 = 1e-12;

/// Which structure the current Receiver uses to update beliefs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Perceived {
    Announced,
    Alternative,
}

impl Perceived {
    fn index(self) -> usize {
        match self {
            Perceived::Announced => 0,
            Perceived::Alternative => 1,
        }
    }
}

/// Strict (`λ > α`) or weak (`λ ≥ α`) threshold comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Comparison {
    #[default]
    Strict,
    Weak,
}

// ---------------------------------------------------------------------------
// SwitchRule
// ---------------------------------------------------------------------------

/// Threshold `α > 1` together with the comparison mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchRule {
    alpha: f64,
    log_alpha: f64,
    comparison: Comparison,
}

impl SwitchRule {
    pub fn new(alpha: f64, comparison: Comparison) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 1.0 {
            return Err(Error::InvalidAlpha(alpha.to_string()));
        }
        Ok(SwitchRule {
            alpha,
            log_alpha: alpha.ln(),
            comparison,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn comparison(&self) -> Comparison {
        self.comparison
    }

    fn exceeds(&self, log_ratio: f64) -> bool {
        match self.comparison {
            Comparison::Strict => log_ratio > self.log_alpha + THRESHOLD_SLACK,
            Comparison::Weak => log_ratio >= self.log_alpha - THRESHOLD_SLACK,
        }
    }

    /// Perception after the start-of-period check given the cumulative `log λ`.
    pub fn next_perception(&self, current: Perceived, log_lambda: f64) -> Perceived {
        match current {
            Perceived::Announced if self.exceeds(log_lambda) => Perceived::Alternative,
            Perceived::Alternative if self.exceeds(-log_lambda) => Perceived::Announced,
            other => other,
        }
    }
}

// ---------------------------------------------------------------------------
// SwitchState
// ---------------------------------------------------------------------------

/// Switching state carried between periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchState {
    pub perceived: Perceived,
    /// `ln λ(h_t)`, alternative over announced. `-∞` locks onto the announced structure.
    pub log_lambda: f64,
    pub switches: u32,
    /// No future observation can move `log_lambda` or the perception.
    pub absorbed: bool,
}

impl Default for SwitchState {
    fn default() -> Self {
        SwitchState {
            perceived: Perceived::Announced,
            log_lambda: 0.0,
            switches: 0,
            absorbed: false,
        }
    }
}

impl SwitchState {
    pub fn bayes_factor(&self) -> f64 {
        bayes_factor(self)
    }
}

/// `λ(h_t) = exp(log λ)`, independent of the current perception.
pub fn bayes_factor(state: &SwitchState) -> f64 {
    state.log_lambda.exp()
}

// ---------------------------------------------------------------------------
// Observations and likelihoods
// ---------------------------------------------------------------------------

/// What a Receiver sees at the end of a period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub signal: usize,
    pub action: usize,
    /// Present exactly when `action` is revealing.
    pub revealed_state: Option<usize>,
    pub receiver_utility: f64,
}

impl Observation {
    pub fn new(scenario: &Scenario, signal: usize, action: usize, realized_state: usize) -> Self {
        Observation {
            signal,
            action,
            revealed_state: scenario.is_revealing(action).then_some(realized_state),
            receiver_utility: scenario.receiver_utility(realized_state, action),
        }
    }
}

/// Likelihood of one observation under `structure`: `μ₀(ω)·q(ω, s)` when the
/// state was revealed, otherwise the signal marginal.
pub fn observation_likelihood(obs: &Observation, structure: &InformationStructure, scenario: &Scenario) -> Result<f64> {
    if obs.signal >= structure.num_signals() {
        return Err(Error::UnknownSignal(format!("#{}", obs.signal)));
    }
    let prior = scenario.prior();
    Ok(match obs.revealed_state {
        Some(state) => prior.of_state(state) * structure.likelihood(state, obs.signal),
        None => structure.marginal(prior, obs.signal),
    })
}

/// `ln l(h|Q)`: sum of per-observation log-likelihoods; `-∞` if any factor is zero.
pub fn history_log_likelihood(
    trace: &HistoryTrace,
    structure: &InformationStructure,
    scenario: &Scenario,
) -> Result<f64> {
    trace.records.iter().try_fold(0.0, |acc, r| {
        Ok(acc + observation_likelihood(&r.observation(), structure, scenario)?.ln())
    })
}

// ---------------------------------------------------------------------------
// HistoryTrace
// ---------------------------------------------------------------------------

/// One simulated period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub period: usize,
    /// Perception used to act this period (after the start-of-period check).
    pub perceived: Perceived,
    pub signal: usize,
    pub action: usize,
    pub state: usize,
    pub revealed: bool,
    pub sender_utility: f64,
    pub receiver_utility: f64,
    /// `ln λ` after this period's observation.
    pub log_lambda: f64,
}

impl TraceRecord {
    pub fn observation(&self) -> Observation {
        Observation {
            signal: self.signal,
            action: self.action,
            revealed_state: self.revealed.then_some(self.state),
            receiver_utility: self.receiver_utility,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryTrace {
    pub records: Vec<TraceRecord>,
}

impl HistoryTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn switch_count(&self) -> usize {
        self.records
            .windows(2)
            .filter(|w| w[0].perceived != w[1].perceived)
            .count()
            + self
                .records
                .first()
                .map_or(0, |r| usize::from(r.perceived != Perceived::Announced))
    }
}

// ---------------------------------------------------------------------------
// SwitchingEngine
// ---------------------------------------------------------------------------

/// Result of one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: SwitchState,
    pub outcome: UtilityOutcome,
    pub observation: Observation,
}

/// Precomputed actions and log-likelihood ratios for one announced structure.
#[derive(Debug, Clone)]
pub struct SwitchingEngine {
    scenario: Scenario,
    announced: InformationStructure,
    alternative: InformationStructure,
    rule: SwitchRule,
    /// `[perceived][signal]`
    actions: [Vec<usize>; 2],
    revealing: Vec<bool>,
    /// `[signal][state]`: `ln l((s, ω)|P̂) − ln l((s, ω)|P)`
    log_ratio: Vec<[f64; 2]>,
    default_action: usize,
}

impl SwitchingEngine {
    pub fn new(scenario: &Scenario, announced: &InformationStructure, rule: SwitchRule) -> Result<Self> {
        let alternative = alternative_structure(announced, scenario)?;
        let prior = scenario.prior();
        let mut actions = [Vec::new(), Vec::new()];
        for (slot, structure) in actions.iter_mut().zip([announced, &alternative]) {
            *slot = (0..structure.num_signals())
                .map(|s| posterior(prior, structure, s).map(|mu| scenario.optimal_action(mu)))
                .collect::<Result<_>>()?;
        }
        let revealing = (0..scenario.actions().len())
            .map(|a| scenario.is_revealing(a))
            .collect();
        let mut log_ratio = Vec::with_capacity(announced.num_signals());
        for s in 0..announced.num_signals() {
            let mut row = [0.0; 2];
            for (state, slot) in row.iter_mut().enumerate() {
                let obs = Observation {
                    signal: s,
                    action: 0,
                    revealed_state: Some(state),
                    receiver_utility: 0.0,
                };
                let under_alt = observation_likelihood(&obs, &alternative, scenario)?;
                let under_announced = observation_likelihood(&obs, announced, scenario)?;
                *slot = under_alt.ln() - under_announced.ln();
            }
            log_ratio.push(row);
        }
        Ok(SwitchingEngine {
            default_action: scenario.optimal_action(prior),
            scenario: scenario.clone(),
            announced: announced.clone(),
            alternative,
            rule,
            actions,
            revealing,
            log_ratio,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn announced(&self) -> &InformationStructure {
        &self.announced
    }

    pub fn alternative(&self) -> &InformationStructure {
        &self.alternative
    }

    pub fn rule(&self) -> &SwitchRule {
        &self.rule
    }

    /// Action taken after `signal` by a Receiver holding `perceived`.
    pub fn action(&self, perceived: Perceived, signal: usize) -> usize {
        self.actions[perceived.index()][signal]
    }

    /// `a*(μ₀)`, the action taken under the alternative for every signal.
    pub fn default_action(&self) -> usize {
        self.default_action
    }

    /// Whether a Receiver on the alternative can never learn anything again.
    pub fn alternative_absorbs(&self) -> bool {
        !self.revealing[self.default_action]
    }

    /// Advances one period given the realized state and the signal drawn from
    /// the announced structure.
    pub fn step(&self, state: &SwitchState, realized_state: usize, signal: usize) -> Result<Step> {
        if signal >= self.announced.num_signals() {
            return Err(Error::UnknownSignal(format!("#{signal}")));
        }
        if realized_state >= 2 {
            return Err(Error::InvalidScenario(format!("unknown state #{realized_state}")));
        }
        if self.announced.likelihood(realized_state, signal) <= 0.0 {
            return Err(Error::SignalNotInSupport {
                signal: self.announced.signals()[signal].clone(),
                state: self.scenario.states()[realized_state].clone(),
            });
        }
        Ok(self.step_unchecked(state, realized_state, signal))
    }

    #[inline]
    pub(crate) fn step_unchecked(&self, state: &SwitchState, realized_state: usize, signal: usize) -> Step {
        if state.absorbed {
            let action = self.default_action;
            return Step {
                state: *state,
                outcome: self.scenario.outcome(realized_state, action),
                observation: Observation::new(&self.scenario, signal, action, realized_state),
            };
        }
        let perceived = self.rule.next_perception(state.perceived, state.log_lambda);
        let action = self.actions[perceived.index()][signal];
        let log_lambda = if self.revealing[action] {
            state.log_lambda + self.log_ratio[signal][realized_state]
        } else {
            state.log_lambda
        };
        let next = SwitchState {
            perceived,
            log_lambda,
            switches: state.switches + u32::from(perceived != state.perceived),
            absorbed: perceived == Perceived::Alternative && !self.revealing[self.default_action],
        };
        Step {
            state: next,
            outcome: self.scenario.outcome(realized_state, action),
            observation: Observation {
                signal,
                action,
                revealed_state: self.revealing[action].then_some(realized_state),
                receiver_utility: self.scenario.receiver_utility(realized_state, action),
            },
        }
    }

    /// Runs a sequence of `(state, signal)` draws from the fresh state.
    pub fn run<I>(&self, draws: I) -> Result<HistoryTrace>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut state = SwitchState::default();
        let mut records = Vec::new();
        for (i, (realized, signal)) in draws.into_iter().enumerate() {
            let step = self.step(&state, realized, signal)?;
            records.push(record(i + 1, &step));
            state = step.state;
        }
        Ok(HistoryTrace { records })
    }
}

pub(crate) fn record(period: usize, step: &Step) -> TraceRecord {
    TraceRecord {
        period,
        perceived: step.state.perceived,
        signal: step.observation.signal,
        action: step.outcome.action,
        state: step.outcome.state,
        revealed: step.observation.revealed_state.is_some(),
        sender_utility: step.outcome.sender_utility,
        receiver_utility: step.outcome.receiver_utility,
        log_lambda: step.state.log_lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: usize = 0;
    const L: usize = 1;
    const SIG_H: usize = 0;
    const SIG_L: usize = 1;

    fn seller_buyer_engine(alpha: f64) -> SwitchingEngine {
        let sb = Scenario::seller_buyer();
        let p = InformationStructure::new(
            vec!["h".into(), "l".into()],
            vec![vec![1.0, 0.0], vec![3.0 / 7.0, 4.0 / 7.0]],
        )
        .unwrap();
        SwitchingEngine::new(&sb, &p, SwitchRule::new(alpha, Comparison::Strict).unwrap()).unwrap()
    }

    #[test]
    fn alpha_must_exceed_one() {
        assert!(matches!(
            SwitchRule::new(1.0, Comparison::Strict),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(SwitchRule::new(0.5, Comparison::Weak).is_err());
        assert!(SwitchRule::new(f64::NAN, Comparison::Weak).is_err());
        assert!(SwitchRule::new(1.0001, Comparison::Strict).is_ok());
    }

    #[test]
    fn table4_likelihoods() {
        let engine = seller_buyer_engine(1.39);
        let sb = engine.scenario();
        let b = sb.action_index("B").unwrap();
        let nb = sb.action_index("NB").unwrap();
        let cases = [
            (Observation::new(sb, SIG_H, b, H), 0.3, 0.18),
            (Observation::new(sb, SIG_H, b, L), 0.3, 0.42),
            (Observation::new(sb, SIG_L, nb, L), 0.4, 0.4),
        ];
        for (obs, p, alt) in cases {
            let lp = observation_likelihood(&obs, engine.announced(), sb).unwrap();
            let la = observation_likelihood(&obs, engine.alternative(), sb).unwrap();
            assert!((lp - p).abs() < 1e-12, "{obs:?}: {lp}");
            assert!((la - alt).abs() < 1e-12, "{obs:?}: {la}");
        }
    }

    #[test]
    fn single_high_low_outcome_switches_next_period() {
        let engine = seller_buyer_engine(1.39);
        let s1 = engine.step(&SwitchState::default(), L, SIG_H).unwrap();
        assert!((s1.state.log_lambda - 1.4_f64.ln()).abs() < 1e-12);
        assert!((s1.state.bayes_factor() - 1.4).abs() < 1e-12);
        assert_eq!(s1.state.perceived, Perceived::Announced);
        let s2 = engine.step(&s1.state, H, SIG_H).unwrap();
        assert_eq!(s2.state.perceived, Perceived::Alternative);
        assert_eq!(engine.scenario().actions()[s2.outcome.action], "NB");
        assert!(s2.state.absorbed);
        assert_eq!(s2.state.log_lambda, s1.state.log_lambda);
        assert_eq!(s2.state.switches, 1);
    }

    #[test]
    fn high_high_outcome_lowers_factor() {
        let engine = seller_buyer_engine(1.39);
        let s = engine.step(&SwitchState::default(), H, SIG_H).unwrap();
        assert!((s.state.bayes_factor() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn non_revealing_step_is_bit_identical() {
        let engine = seller_buyer_engine(1.39);
        let start = SwitchState {
            log_lambda: 0.123456789,
            ..SwitchState::default()
        };
        let s = engine.step(&start, L, SIG_L).unwrap();
        assert_eq!(s.state.log_lambda.to_bits(), start.log_lambda.to_bits());
        assert_eq!(s.observation.revealed_state, None);
    }

    #[test]
    fn weak_mode_switches_on_equality() {
        let sb = Scenario::seller_buyer();
        let p = InformationStructure::new(
            vec!["h".into(), "l".into()],
            vec![vec![1.0, 0.0], vec![3.0 / 7.0, 4.0 / 7.0]],
        )
        .unwrap();
        for (mode, expected) in [
            (Comparison::Strict, Perceived::Announced),
            (Comparison::Weak, Perceived::Alternative),
        ] {
            let engine = SwitchingEngine::new(&sb, &p, SwitchRule::new(1.4, mode).unwrap()).unwrap();
            let s1 = engine.step(&SwitchState::default(), L, SIG_H).unwrap();
            let s2 = engine.step(&s1.state, H, SIG_H).unwrap();
            assert_eq!(s2.state.perceived, expected, "{mode:?}");
        }
    }

    #[test]
    fn switch_back_uses_reciprocal() {
        let rule = SwitchRule::new(2.0, Comparison::Strict).unwrap();
        let ln2 = 2.0_f64.ln();
        assert_eq!(
            rule.next_perception(Perceived::Alternative, -ln2 - 0.01),
            Perceived::Announced
        );
        assert_eq!(
            rule.next_perception(Perceived::Alternative, -ln2 + 0.01),
            Perceived::Alternative
        );
        assert_eq!(
            rule.next_perception(Perceived::Alternative, 5.0),
            Perceived::Alternative
        );
        assert_eq!(rule.next_perception(Perceived::Announced, -5.0), Perceived::Announced);
        assert_eq!(
            rule.next_perception(Perceived::Alternative, f64::NEG_INFINITY),
            Perceived::Announced
        );
    }

    #[test]
    fn step_rejects_unsupported_signal() {
        let engine = seller_buyer_engine(1.39);
        let err = engine.step(&SwitchState::default(), H, SIG_L).unwrap_err();
        assert!(matches!(err, Error::SignalNotInSupport { .. }));
        assert!(engine.step(&SwitchState::default(), H, 7).is_err());
    }

    #[test]
    fn history_log_likelihood_matches_hand_product() {
        let engine = seller_buyer_engine(100.0);
        let trace = engine.run([(H, SIG_H), (L, SIG_H), (L, SIG_L)]).unwrap();
        let ll = history_log_likelihood(&trace, engine.announced(), engine.scenario()).unwrap();
        assert!((ll - (0.3_f64 * 0.3 * 0.4).ln()).abs() < 1e-12);
        let empty = HistoryTrace::default();
        assert_eq!(
            history_log_likelihood(&empty, engine.announced(), engine.scenario()).unwrap(),
            0.0
        );
        let last = trace.records.last().unwrap().log_lambda;
        let alt = history_log_likelihood(&trace, engine.alternative(), engine.scenario()).unwrap();
        assert!((alt - ll - last).abs() < 1e-12);
    }

    #[test]
    fn speed_limit_factor_never_exceeds_one() {
        let sl = Scenario::speed_limit();
        let p = InformationStructure::new(
            vec!["s".into(), "ns".into()],
            vec![vec![1.0, 0.0], vec![3.0 / 7.0, 4.0 / 7.0]],
        )
        .unwrap();
        let engine = SwitchingEngine::new(&sl, &p, SwitchRule::new(1.01, Comparison::Weak).unwrap()).unwrap();
        let mut state = SwitchState::default();
        // every feasible (state, signal) pair, cycled
        let feasible = [(0, 0), (1, 0), (1, 1)];
        for i in 0..300 {
            let (w, s) = feasible[(i * 7 + i / 3) % 3];
            state = engine.step(&state, w, s).unwrap().state;
            assert!(state.log_lambda <= 0.0);
            assert_eq!(state.perceived, Perceived::Announced);
        }
    }
}
