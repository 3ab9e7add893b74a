//! Candidate information structures and analytic persistence verdicts.
//!
//! For a binary scenario the Sender's indirect value `v̂` is piecewise linear
//! with a single break at the Receiver's indifference belief `μ*`, so the
//! concave closure at the prior is attained by a split of the prior onto
//! two points of `{0, μ*, 1}` (or by not splitting at all).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    period_expected_utility, posterior_distribution, Belief, InformationStructure, Scenario, TIE_TOLERANCE,
};
use crate::switching::SwitchRule;

/// Entry-wise tolerance when recognising a structure as the BP-optimal one.
pub const STRUCTURE_MATCH_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Receiver threshold
// ---------------------------------------------------------------------------

/// The Receiver's indifference belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub belief: Belief,
    /// No interior crossing: one action is optimal at every belief.
    pub degenerate: bool,
}

/// Belief at which the two actions give the Receiver equal expected utility.
pub fn receiver_threshold(scenario: &Scenario) -> Result<Threshold> {
    require_binary(scenario)?;
    // gain of the first action over the second, in each state
    let d1 = scenario.receiver_utility(0, 0) - scenario.receiver_utility(0, 1);
    let d2 = scenario.receiver_utility(1, 0) - scenario.receiver_utility(1, 1);
    let slope = d1 - d2;
    if slope.abs() <= TIE_TOLERANCE {
        return Ok(Threshold {
            belief: Belief::new(0.0),
            degenerate: true,
        });
    }
    let mu = -d2 / slope;
    Ok(Threshold {
        belief: Belief::new(mu),
        degenerate: !(0.0..=1.0).contains(&mu) || mu <= TIE_TOLERANCE || mu >= 1.0 - TIE_TOLERANCE,
    })
}

// ---------------------------------------------------------------------------
// BP-optimal structure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BpKind {
    NoDisclosure,
    /// Two signals: one pooled signal landing on `μ*`, one revealing the other state.
    Split,
    FullDisclosure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BPSolution {
    pub kind: BpKind,
    pub structure: InformationStructure,
    /// `V(μ₀|S, P)`.
    pub value: f64,
    pub posterior_support: Vec<(Belief, f64)>,
    pub threshold_mu_star: Belief,
    pub degenerate_threshold: bool,
    /// Probability that the mixing state sends the pooled signal (split only).
    pub x: Option<f64>,
    /// Marginal probability of the pooled signal (split only).
    pub e: Option<f64>,
    /// State that always sends the pooled signal (split only).
    pub pooled_state: Option<usize>,
}

/// One-shot Bayesian-persuasion optimum by concavification.
pub fn bp_optimal(scenario: &Scenario) -> Result<BPSolution> {
    let threshold = receiver_threshold(scenario)?;
    let mu0 = scenario.prior().value();
    let mu_star = threshold.belief.value();
    let v = |mu: f64| scenario.indirect_sender_value(Belief::new(mu));

    let mut kind = BpKind::NoDisclosure;
    let mut best = v(mu0);
    if !threshold.degenerate && (mu_star - mu0).abs() > TIE_TOLERANCE {
        let split = if mu_star > mu0 {
            let w = mu0 / mu_star;
            w * v(mu_star) + (1.0 - w) * v(0.0)
        } else {
            let w = (1.0 - mu0) / (1.0 - mu_star);
            w * v(mu_star) + (1.0 - w) * v(1.0)
        };
        if split > best + TIE_TOLERANCE {
            kind = BpKind::Split;
            best = split;
        }
    }
    if mu0 * v(1.0) + (1.0 - mu0) * v(0.0) > best + TIE_TOLERANCE {
        kind = BpKind::FullDisclosure;
    }

    let (structure, x, e, pooled_state) = match kind {
        BpKind::NoDisclosure => (no_disclosure(scenario), None, None, None),
        BpKind::FullDisclosure => (full_disclosure(scenario), None, None, None),
        BpKind::Split if mu_star > mu0 => {
            let x = mu0 * (1.0 - mu_star) / ((1.0 - mu0) * mu_star);
            let rows = vec![vec![1.0, 0.0], vec![x, 1.0 - x]];
            (split_structure(rows)?, Some(x), Some(mu0 + (1.0 - mu0) * x), Some(0))
        }
        BpKind::Split => {
            let x = (1.0 - mu0) * mu_star / (mu0 * (1.0 - mu_star));
            let rows = vec![vec![x, 1.0 - x], vec![1.0, 0.0]];
            (split_structure(rows)?, Some(x), Some(mu0 * x + (1.0 - mu0)), Some(1))
        }
    };
    Ok(BPSolution {
        kind,
        value: period_expected_utility(scenario, &structure, &structure)?,
        posterior_support: posterior_distribution(scenario, &structure)?,
        structure,
        threshold_mu_star: threshold.belief,
        degenerate_threshold: threshold.degenerate,
        x,
        e,
        pooled_state,
    })
}

fn split_structure(rows: Vec<Vec<f64>>) -> Result<InformationStructure> {
    InformationStructure::new(vec!["s1".into(), "s2".into()], rows)
}

/// One signal per state: `[[1, 0], [0, 1]]`.
pub fn full_disclosure(_scenario: &Scenario) -> InformationStructure {
    InformationStructure::new(vec!["s1".into(), "s2".into()], vec![vec![1.0, 0.0], vec![0.0, 1.0]])
        .expect("identity rows are stochastic")
}

/// A single uninformative signal.
pub fn no_disclosure(_scenario: &Scenario) -> InformationStructure {
    InformationStructure::new(vec!["s0".into()], vec![vec![1.0], vec![1.0]]).expect("unit rows are stochastic")
}

// ---------------------------------------------------------------------------
// Revealing-preferred shape and the ε family
// ---------------------------------------------------------------------------

/// Actions of a scenario where the Sender's favourite action is the only
/// revealing one and the Receiver takes the other one at the prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealingPreferred {
    pub revealing: usize,
    pub non_revealing: usize,
}

/// Checks that exactly one action is revealing, that the Receiver takes the
/// non-revealing one at the prior, and that the Sender's utility from the
/// revealing action is state-independent and strictly above both payoffs
/// of the other.
pub fn revealing_preferred_shape(scenario: &Scenario) -> Result<RevealingPreferred> {
    require_binary(scenario)?;
    let (revealing, non_revealing) = match (scenario.is_revealing(0), scenario.is_revealing(1)) {
        (true, false) => (0, 1),
        (false, true) => (1, 0),
        _ => return Err(Error::ShapeMismatch("exactly one action must be revealing".into())),
    };
    if scenario.optimal_action(scenario.prior()) != non_revealing {
        return Err(Error::ShapeMismatch(
            "the Receiver must take the non-revealing action at the prior".into(),
        ));
    }
    let v1 = scenario.sender_utility(0, revealing);
    if (v1 - scenario.sender_utility(1, revealing)).abs() > TIE_TOLERANCE {
        return Err(Error::ShapeMismatch(
            "Sender utility of the revealing action must not depend on the state".into(),
        ));
    }
    if (0..2).any(|w| scenario.sender_utility(w, non_revealing) >= v1) {
        return Err(Error::ShapeMismatch(
            "the Sender must strictly prefer the revealing action in every state".into(),
        ));
    }
    Ok(RevealingPreferred {
        revealing,
        non_revealing,
    })
}

/// Three-signal interpolation between the BP-optimal split (`ε = 0`) and
/// full disclosure (`ε = 1`).
///
/// With `f` the pooled state and `o` the mixing state, signals are
/// `(s0, s1, s2)`: `s0` reveals `f`, `s1` is the pooled signal and `s2`
/// reveals `o`. Rows are `f: [ε, 1−ε, 0]` and `o: [0, x(1−ε), (1−x)+xε]`.
pub fn epsilon_structure(scenario: &Scenario, epsilon: f64) -> Result<InformationStructure> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    revealing_preferred_shape(scenario)?;
    let bp = bp_optimal(scenario)?;
    let (Some(x), Some(f)) = (bp.x, bp.pooled_state) else {
        return Err(Error::ShapeMismatch(
            "BP-optimal structure is not a two-signal split".into(),
        ));
    };
    let mut rows = vec![Vec::new(), Vec::new()];
    rows[f] = vec![epsilon, 1.0 - epsilon, 0.0];
    rows[1 - f] = vec![0.0, x * (1.0 - epsilon), (1.0 - x) + x * epsilon];
    InformationStructure::new(vec!["s0".into(), "s1".into(), "s2".into()], rows)
}

// ---------------------------------------------------------------------------
// Persistence verdicts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Persistence {
    Persists,
    EventuallyPersists,
    SwitchRisk,
}

/// The result that justifies a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictReason {
    /// Full or no disclosure never lets the Bayes factor exceed one.
    ExtremeStructure,
    /// The Sender's strictly dominant action is non-revealing and the
    /// structure is BP-optimal.
    NonRevealingPreferred,
    /// Every action is revealing; the Bayes factor is a nonnegative supermartingale.
    AllRevealing,
    /// Revealing-preferred shape under the BP-optimal split.
    RevealingPreferred,
    /// None of the above conditions applies.
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistenceVerdict {
    pub classification: Persistence,
    pub reason: VerdictReason,
    /// `e/x`, the Bayes factor after a single pooled-signal observation in the mixing state.
    pub alpha_hat: Option<f64>,
    /// `μ₀(f)/e`, the limiting adoption bound that holds for `α < α̂`.
    pub adoption_bound: Option<f64>,
    pub alpha_below_threshold: Option<bool>,
}

impl PersistenceVerdict {
    fn plain(classification: Persistence, reason: VerdictReason) -> Self {
        PersistenceVerdict {
            classification,
            reason,
            alpha_hat: None,
            adoption_bound: None,
            alpha_below_threshold: None,
        }
    }
}

pub fn classify_persistence(
    scenario: &Scenario,
    structure: &InformationStructure,
    alpha: f64,
) -> Result<PersistenceVerdict> {
    require_binary(scenario)?;
    SwitchRule::new(alpha, Default::default())?;
    if structure.rows().len() != 2 {
        return Err(Error::InvalidStructure("expected one row per state".into()));
    }
    if structure.is_full_disclosure() || structure.is_no_disclosure() {
        return Ok(PersistenceVerdict::plain(
            Persistence::Persists,
            VerdictReason::ExtremeStructure,
        ));
    }
    let bp = bp_optimal(scenario)?;
    let is_bp = structure.approx_eq(&bp.structure, STRUCTURE_MATCH_TOLERANCE);

    let dominant_non_revealing = (0..2).any(|a| {
        !scenario.is_revealing(a)
            && (0..2).all(|w| {
                (0..2)
                    .filter(|&b| b != a)
                    .all(|b| scenario.sender_utility(w, a) > scenario.sender_utility(w, b))
            })
    });
    if dominant_non_revealing && is_bp {
        return Ok(PersistenceVerdict::plain(
            Persistence::Persists,
            VerdictReason::NonRevealingPreferred,
        ));
    }
    if (0..2).all(|a| scenario.is_revealing(a)) {
        return Ok(PersistenceVerdict::plain(
            Persistence::EventuallyPersists,
            VerdictReason::AllRevealing,
        ));
    }
    if is_bp && revealing_preferred_shape(scenario).is_ok() {
        if let (Some(x), Some(e), Some(f)) = (bp.x, bp.e, bp.pooled_state) {
            let alpha_hat = e / x;
            return Ok(PersistenceVerdict {
                classification: Persistence::SwitchRisk,
                reason: VerdictReason::RevealingPreferred,
                alpha_hat: Some(alpha_hat),
                adoption_bound: Some(scenario.prior().of_state(f) / e),
                alpha_below_threshold: Some(alpha < alpha_hat),
            });
        }
    }
    Ok(PersistenceVerdict::plain(
        Persistence::SwitchRisk,
        VerdictReason::Unclassified,
    ))
}

fn require_binary(scenario: &Scenario) -> Result<()> {
    if scenario.is_binary() {
        Ok(())
    } else {
        Err(Error::NotBinary(format!("{} actions", scenario.actions().len())))
    }
}
