//! Monte Carlo estimation of adoption curves and discounted Sender utility.
//!
//! Each replication owns a ChaCha8 stream seeded from `(seed, index)` through
//! a 64-bit avalanche mix. Replications are grouped into fixed-size blocks
//! that are reduced in index order, so results do not depend on the number
//! of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{alternative_structure, period_expected_utility, InformationStructure, Scenario};
use crate::solver::epsilon_structure;
use crate::switching::{record, Comparison, HistoryTrace, Perceived, SwitchRule, SwitchState, SwitchingEngine};

/// Replications per reduction block.
const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub alpha: f64,
    pub delta: f64,
    pub horizon: usize,
    pub replications: usize,
    pub seed: u64,
    pub comparison: Comparison,
    /// Truncation bounds at or below this are reported as negligible.
    pub tail_tolerance: f64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            alpha: 1.39,
            delta: 0.9,
            horizon: 200,
            replications: 100_000,
            seed: 0,
            comparison: Comparison::Strict,
            tail_tolerance: 1e-6,
            workers: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<SwitchRule> {
        let rule = SwitchRule::new(self.alpha, self.comparison)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(rule)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Self {
        let n_f = n as f64;
        let mean = sum / n_f;
        let stderr = if n > 1 {
            let var = ((sum_sq - n_f * mean * mean) / (n_f - 1.0)).max(0.0);
            (var / n_f).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr }
    }

    fn proportion(hits: u64, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Estimate {
            mean: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }
}

/// Per-period probability that the Receiver holds the announced structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionCurve {
    pub estimates: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub replications: usize,
}

impl AdoptionCurve {
    pub fn terminal(&self) -> Estimate {
        Estimate {
            mean: *self.estimates.last().expect("horizon >= 1"),
            stderr: *self.stderrs.last().expect("horizon >= 1"),
        }
    }
}

/// Everything one batch of replications measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub config: SimConfig,
    pub adoption: AdoptionCurve,
    /// Pathwise mean of `v_t` per period.
    pub period_sender_utility: Vec<Estimate>,
    /// Mean of `Σ δ^{t−1} v_t` over replications.
    pub pathwise_lifetime: Estimate,
    /// Mean of `Σ δ^{t−1} 1{announced at t}` over replications.
    pub discounted_adoption: Estimate,
    /// `V(μ₀|P)`.
    pub announced_value: f64,
    /// `V(μ₀|P̂)` with signals still drawn from `P`.
    pub alternative_value: f64,
    /// Largest absolute Sender payoff, used for the truncation bound.
    pub max_abs_sender: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeUtility {
    /// `Σ δ^{t−1} [l̂_t V(μ₀|P) + (1−l̂_t) V(μ₀|P̂)]`.
    pub plug_in: Estimate,
    /// Mean of `Σ δ^{t−1} v_t`.
    pub pathwise: Estimate,
    /// `δ^T · max|v| / (1−δ)`.
    pub truncation_bound: f64,
    pub within_tail_tolerance: bool,
}

impl SimulationSummary {
    pub fn lifetime_utility(&self) -> LifetimeUtility {
        let gap = self.announced_value - self.alternative_value;
        let mut discount = 1.0;
        let mut plug_in = 0.0;
        for l in &self.adoption.estimates {
            plug_in += discount * (l * self.announced_value + (1.0 - l) * self.alternative_value);
            discount *= self.config.delta;
        }
        let truncation_bound = truncation_bound(self.config.delta, self.config.horizon, self.max_abs_sender);
        LifetimeUtility {
            plug_in: Estimate {
                mean: plug_in,
                stderr: gap.abs() * self.discounted_adoption.stderr,
            },
            pathwise: self.pathwise_lifetime,
            truncation_bound,
            within_tail_tolerance: truncation_bound <= self.config.tail_tolerance,
        }
    }

    /// Expected Sender utility at period `t` (1-based) given the estimated adoption.
    pub fn plug_in_period_utility(&self, t: usize) -> Estimate {
        let l = self.adoption.estimates[t - 1];
        Estimate {
            mean: l * self.announced_value + (1.0 - l) * self.alternative_value,
            stderr: (self.announced_value - self.alternative_value).abs() * self.adoption.stderrs[t - 1],
        }
    }
}

pub fn truncation_bound(delta: f64, horizon: usize, max_abs_utility: f64) -> f64 {
    delta.powi(horizon.min(i32::MAX as usize) as i32) * max_abs_utility / (1.0 - delta)
}

/// Stream seed for replication `index`.
pub fn replication_seed(base: u64, index: u64) -> u64 {
    mix64(base ^ mix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Joint `(state, signal)` sampler: one uniform draw per period.
#[derive(Debug, Clone)]
struct OutcomeSampler {
    cumulative: Vec<f64>,
    outcomes: Vec<(usize, usize)>,
}

impl OutcomeSampler {
    fn new(scenario: &Scenario, structure: &InformationStructure) -> Self {
        let prior = scenario.prior();
        let mut cumulative = Vec::new();
        let mut outcomes = Vec::new();
        let mut acc = 0.0;
        for state in 0..2 {
            for s in 0..structure.num_signals() {
                let p = prior.of_state(state) * structure.likelihood(state, s);
                if p > 0.0 {
                    acc += p;
                    cumulative.push(acc);
                    outcomes.push((state, s));
                }
            }
        }
        OutcomeSampler { cumulative, outcomes }
    }

    #[inline]
    fn draw<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        let u: f64 = rng.random();
        let last = self.outcomes.len() - 1;
        let i = self.cumulative[..last].iter().position(|&c| u < c).unwrap_or(last);
        self.outcomes[i]
    }
}

struct Simulator {
    engine: SwitchingEngine,
    sampler: OutcomeSampler,
    config: SimConfig,
    /// Sender utility of `a*(μ₀)` when it does not depend on the state.
    absorbed_utility: Option<f64>,
}

impl Simulator {
    fn new(scenario: &Scenario, structure: &InformationStructure, config: &SimConfig) -> Result<Self> {
        let rule = config.validate()?;
        let engine = SwitchingEngine::new(scenario, structure, rule)?;
        let a0 = engine.default_action();
        let (v1, v2) = (scenario.sender_utility(0, a0), scenario.sender_utility(1, a0));
        Ok(Simulator {
            sampler: OutcomeSampler::new(scenario, structure),
            absorbed_utility: (v1 == v2).then_some(v1),
            engine,
            config: *config,
        })
    }

    fn rng(&self, index: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(replication_seed(self.config.seed, index as u64))
    }

    fn trace(&self, index: usize) -> HistoryTrace {
        let mut rng = self.rng(index);
        let mut state = SwitchState::default();
        let mut records = Vec::with_capacity(self.config.horizon);
        for t in 1..=self.config.horizon {
            let (w, s) = self.sampler.draw(&mut rng);
            let step = self.engine.step_unchecked(&state, w, s);
            records.push(record(t, &step));
            state = step.state;
        }
        HistoryTrace { records }
    }

    fn run_block(&self, block: usize) -> BlockSums {
        let horizon = self.config.horizon;
        let mut sums = BlockSums::new(horizon);
        let start = block * BLOCK;
        let end = (start + BLOCK).min(self.config.replications);
        for index in start..end {
            let mut rng = self.rng(index);
            let mut state = SwitchState::default();
            let mut discount = 1.0;
            let mut lifetime = 0.0;
            let mut adopted = 0.0;
            for t in 0..horizon {
                let v = match self.absorbed_utility {
                    Some(v) if state.absorbed => v,
                    _ => {
                        let (w, s) = self.sampler.draw(&mut rng);
                        let step = self.engine.step_unchecked(&state, w, s);
                        state = step.state;
                        if state.perceived == Perceived::Announced {
                            sums.adopted[t] += 1;
                            adopted += discount;
                        }
                        step.outcome.sender_utility
                    }
                };
                sums.v_sum[t] += v;
                sums.v_sq[t] += v * v;
                lifetime += discount * v;
                discount *= self.config.delta;
            }
            sums.lifetime += lifetime;
            sums.lifetime_sq += lifetime * lifetime;
            sums.adopted_disc += adopted;
            sums.adopted_disc_sq += adopted * adopted;
        }
        sums
    }

    fn summarize(&self) -> Result<SimulationSummary> {
        let n = self.config.replications;
        let blocks = n.div_ceil(BLOCK);
        let per_block: Vec<BlockSums> = match self.config.workers {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?
                .install(|| (0..blocks).into_par_iter().map(|b| self.run_block(b)).collect()),
            None => (0..blocks).into_par_iter().map(|b| self.run_block(b)).collect(),
        };
        let mut total = BlockSums::new(self.config.horizon);
        for b in &per_block {
            total.absorb(b);
        }
        let scenario = self.engine.scenario();
        let announced = self.engine.announced();
        let adoption: Vec<Estimate> = total.adopted.iter().map(|&k| Estimate::proportion(k, n)).collect();
        Ok(SimulationSummary {
            config: self.config,
            adoption: AdoptionCurve {
                estimates: adoption.iter().map(|e| e.mean).collect(),
                stderrs: adoption.iter().map(|e| e.stderr).collect(),
                replications: n,
            },
            period_sender_utility: total
                .v_sum
                .iter()
                .zip(&total.v_sq)
                .map(|(&s, &sq)| Estimate::from_sums(s, sq, n))
                .collect(),
            pathwise_lifetime: Estimate::from_sums(total.lifetime, total.lifetime_sq, n),
            discounted_adoption: Estimate::from_sums(total.adopted_disc, total.adopted_disc_sq, n),
            announced_value: period_expected_utility(scenario, announced, announced)?,
            alternative_value: period_expected_utility(scenario, self.engine.alternative(), announced)?,
            max_abs_sender: scenario.max_abs_sender_utility(),
        })
    }
}

#[derive(Debug, Clone)]
struct BlockSums {
    adopted: Vec<u64>,
    v_sum: Vec<f64>,
    v_sq: Vec<f64>,
    lifetime: f64,
    lifetime_sq: f64,
    adopted_disc: f64,
    adopted_disc_sq: f64,
}

impl BlockSums {
    fn new(horizon: usize) -> Self {
        BlockSums {
            adopted: vec![0; horizon],
            v_sum: vec![0.0; horizon],
            v_sq: vec![0.0; horizon],
            lifetime: 0.0,
            lifetime_sq: 0.0,
            adopted_disc: 0.0,
            adopted_disc_sq: 0.0,
        }
    }

    fn absorb(&mut self, other: &BlockSums) {
        for (a, b) in self.adopted.iter_mut().zip(&other.adopted) {
            *a += b;
        }
        for (a, b) in self.v_sum.iter_mut().zip(&other.v_sum) {
            *a += b;
        }
        for (a, b) in self.v_sq.iter_mut().zip(&other.v_sq) {
            *a += b;
        }
        self.lifetime += other.lifetime;
        self.lifetime_sq += other.lifetime_sq;
        self.adopted_disc += other.adopted_disc;
        self.adopted_disc_sq += other.adopted_disc_sq;
    }
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

/// One replication's full history; deterministic in `(config.seed, index)`.
pub fn simulate_replication(
    scenario: &Scenario,
    structure: &InformationStructure,
    config: &SimConfig,
    index: usize,
) -> Result<HistoryTrace> {
    Ok(Simulator::new(scenario, structure, config)?.trace(index))
}

/// Runs all replications and reduces them.
pub fn simulate(
    scenario: &Scenario,
    structure: &InformationStructure,
    config: &SimConfig,
) -> Result<SimulationSummary> {
    Simulator::new(scenario, structure, config)?.summarize()
}

pub fn adoption_curve(
    scenario: &Scenario,
    structure: &InformationStructure,
    config: &SimConfig,
) -> Result<AdoptionCurve> {
    Ok(simulate(scenario, structure, config)?.adoption)
}

pub fn lifetime_utility(
    scenario: &Scenario,
    structure: &InformationStructure,
    config: &SimConfig,
) -> Result<LifetimeUtility> {
    Ok(simulate(scenario, structure, config)?.lifetime_utility())
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    Alpha,
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub terminal_adoption: Estimate,
    /// Expected Sender utility at the horizon given the estimated adoption.
    pub period_sender_utility: Estimate,
    /// Pathwise mean of the Sender's utility at the horizon.
    pub pathwise_period_utility: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

fn sweep_point(value: f64, summary: &SimulationSummary) -> SweepPoint {
    let t = summary.config.horizon;
    SweepPoint {
        value,
        terminal_adoption: summary.adoption.terminal(),
        period_sender_utility: summary.plug_in_period_utility(t),
        pathwise_period_utility: summary.period_sender_utility[t - 1],
    }
}

fn sorted_grid(values: &[f64]) -> Vec<f64> {
    let mut grid = values.to_vec();
    grid.sort_by(f64::total_cmp);
    grid
}

/// Terminal adoption per threshold, every point on the same seeds.
pub fn sweep_alpha(
    scenario: &Scenario,
    structure: &InformationStructure,
    alphas: &[f64],
    config: &SimConfig,
) -> Result<SweepResult> {
    let grid = sorted_grid(alphas);
    for &a in &grid {
        SwitchRule::new(a, config.comparison)?;
    }
    let points = grid
        .iter()
        .map(|&a| simulate(scenario, structure, &config.with_alpha(a)).map(|s| sweep_point(a, &s)))
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        parameter: SweepParameter::Alpha,
        points,
    })
}

/// Simulates the ε-interpolated family at `config.alpha`.
pub fn sweep_epsilon(scenario: &Scenario, epsilons: &[f64], config: &SimConfig) -> Result<SweepResult> {
    let grid = sorted_grid(epsilons);
    let structures = grid
        .iter()
        .map(|&e| epsilon_structure(scenario, e))
        .collect::<Result<Vec<_>>>()?;
    let points = grid
        .iter()
        .zip(&structures)
        .map(|(&e, p)| simulate(scenario, p, config).map(|s| sweep_point(e, &s)))
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        parameter: SweepParameter::Epsilon,
        points,
    })
}

/// `V(μ₀|P)` and `V(μ₀|P̂)` for a structure, without simulation.
pub fn period_values(scenario: &Scenario, structure: &InformationStructure) -> Result<(f64, f64)> {
    let alt = alternative_structure(structure, scenario)?;
    Ok((
        period_expected_utility(scenario, structure, structure)?,
        period_expected_utility(scenario, &alt, structure)?,
    ))
}
