//! Generators and helpers shared by the integration tests.
#![allow(dead_code)]

use persuasion_core::oracle::{ratio, Rational, RationalScenario, RationalStructure};
use persuasion_core::{InformationStructure, Scenario};
use proptest::prelude::*;

pub fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Binary scenarios with small integer payoffs and a prior on a coarse grid.
pub fn binary_scenario() -> impl Strategy<Value = Scenario> {
    (
        1u32..20,
        proptest::collection::vec(-3i32..=3, 4),
        proptest::collection::vec(-3i32..=3, 4),
    )
        .prop_filter_map("needs a revealing action", |(k, u, v)| {
            let table = |t: &[i32]| vec![vec![t[0] as f64, t[1] as f64], vec![t[2] as f64, t[3] as f64]];
            Scenario::new(
                labels(&["w1", "w2"]),
                labels(&["a1", "a2"]),
                k as f64 / 20.0,
                table(&u),
                table(&v),
            )
            .ok()
        })
}

/// Row-stochastic matrices with 1 to 4 signals.
pub fn structure() -> impl Strategy<Value = InformationStructure> {
    (1usize..=4)
        .prop_flat_map(|k| proptest::collection::vec(proptest::collection::vec(0u32..5, k), 2))
        .prop_filter_map("rows need positive mass", |rows| {
            if rows.iter().any(|r| r.iter().all(|&x| x == 0)) {
                return None;
            }
            let k = rows[0].len();
            let signals = (0..k).map(|i| format!("s{i}")).collect();
            let rows = rows
                .iter()
                .map(|r| {
                    let total: u32 = r.iter().sum();
                    r.iter().map(|&x| x as f64 / total as f64).collect()
                })
                .collect();
            InformationStructure::new(signals, rows).ok()
        })
}

/// Samples `(state, signal)` from the joint law of prior and structure.
pub fn draw(scenario: &Scenario, structure: &InformationStructure, u: f64) -> (usize, usize) {
    let mut acc = 0.0;
    let mut last = (0, 0);
    for state in 0..2 {
        for s in 0..structure.num_signals() {
            let p = scenario.prior().of_state(state) * structure.likelihood(state, s);
            if p > 0.0 {
                acc += p;
                last = (state, s);
                if u < acc {
                    return last;
                }
            }
        }
    }
    last
}

/// Rational scenario where both actions are revealing.
pub fn all_revealing_scenario() -> impl Strategy<Value = RationalScenario> {
    (1i64..10, proptest::collection::vec(-4i64..=4, 8)).prop_filter_map("both actions revealing", |(k, t)| {
        let q = |i: usize| Rational::from_integer(t[i].into());
        RationalScenario::new(
            labels(&["w1", "w2"]),
            labels(&["a1", "a2"]),
            ratio(k, 10),
            vec![vec![q(0), q(1)], vec![q(2), q(3)]],
            vec![vec![q(4), q(5)], vec![q(6), q(7)]],
        )
        .ok()
        .filter(|s| s.is_revealing(0) && s.is_revealing(1))
    })
}

/// Rational structure with strictly positive entries and 2 or 3 signals.
pub fn positive_rational_structure() -> impl Strategy<Value = RationalStructure> {
    (2usize..=3)
        .prop_flat_map(|k| proptest::collection::vec(proptest::collection::vec(1i64..9, k), 2))
        .prop_map(|rows| rational_rows(&rows))
}

pub fn rational_rows(rows: &[Vec<i64>]) -> RationalStructure {
    let k = rows[0].len();
    let rows = rows
        .iter()
        .map(|r| {
            let total: i64 = r.iter().sum();
            r.iter().map(|&x| ratio(x, total)).collect()
        })
        .collect();
    RationalStructure::new((0..k).map(|i| format!("s{i}")).collect(), rows).unwrap()
}
