//! Shared test oracles: exact path-probability computations over a
//! ground-truth chain, independent of the sampling and estimation code they
//! check.
//!
//! Each integration-test binary compiles its own copy, so not every helper
//! is used by every binary; index-style DP loops mirror the recurrences.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

use cascade_core::cascade::ComponentId;
use cascade_core::chain::GroundTruthChain;

/// Exact distribution of the ending generation under the sampler's
/// truncation rule: a cascade still alive at generation `max_generations-1`
/// ends there. Returned vector has length `max_generations`;
/// entry g is P(ending generation = g).
pub fn exact_ending_distribution(chain: &GroundTruthChain, max_generations: usize) -> Vec<f64> {
    let n = chain.state_count();
    let mut alive = chain.initial().to_vec();
    let mut ends = vec![0.0; max_generations];
    for g in 0..max_generations {
        if g == max_generations - 1 {
            ends[g] += alive.iter().sum::<f64>();
            break;
        }
        let mut next = vec![0.0; n];
        for (s, &mass) in alive.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            ends[g] += mass * chain.stop()[s];
            let carried = mass * (1.0 - chain.stop()[s]);
            if carried == 0.0 {
                continue;
            }
            for (t, &p) in chain.transitions()[s].iter().enumerate() {
                next[t] += carried * p;
            }
        }
        alive = next;
    }
    ends
}

/// Exact probability of a large cascade, P(ending generation > threshold).
/// Truncation cannot change this as long as the truncation point stays
/// above the threshold.
pub fn exact_large_probability(chain: &GroundTruthChain, threshold: usize) -> f64 {
    let ends = exact_ending_distribution(chain, threshold + 2);
    1.0 - ends[..=threshold].iter().sum::<f64>()
}

/// Exact probability that a cascade visits any of the `targets` states and
/// ends beyond `threshold`, under the sampler's truncation rule.
pub fn exact_large_probability_via(
    chain: &GroundTruthChain,
    targets: &[BTreeSet<ComponentId>],
    threshold: usize,
    max_generations: usize,
) -> f64 {
    let n = chain.state_count();
    let flagged: Vec<bool> = chain.states().iter().map(|s| targets.contains(s)).collect();
    // alive[flag][state]
    let mut alive = vec![vec![0.0; n], vec![0.0; n]];
    for (s, &p) in chain.initial().iter().enumerate() {
        alive[usize::from(flagged[s])][s] += p;
    }
    let mut large_via = 0.0;
    for g in 0..max_generations {
        if g == max_generations - 1 {
            if g > threshold {
                large_via += alive[1].iter().sum::<f64>();
            }
            break;
        }
        let mut next = vec![vec![0.0; n], vec![0.0; n]];
        for flag in 0..2 {
            for (s, &mass) in alive[flag].iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                if flag == 1 && g > threshold {
                    large_via += mass * chain.stop()[s];
                }
                let carried = mass * (1.0 - chain.stop()[s]);
                if carried == 0.0 {
                    continue;
                }
                for (t, &p) in chain.transitions()[s].iter().enumerate() {
                    let new_flag = flag | usize::from(flagged[t]);
                    next[new_flag][t] += carried * p;
                }
            }
        }
        alive = next;
    }
    large_via
}

/// Three-sigma binomial half-width for an empirical frequency.
pub fn three_sigma(p: f64, samples: usize) -> f64 {
    3.0 * (p.max(1e-12) * (1.0 - p).max(1e-12) / samples as f64).sqrt() + 1e-9
}

/// A six-state chain with intermediate stop probabilities and a cycle; used
/// for sampler-vs-oracle statistical checks.
pub fn six_state_chain() -> GroundTruthChain {
    let states = (1..=6u32)
        .map(|l| [ComponentId(l)].into_iter().collect())
        .collect();
    let initial = vec![0.6, 0.4, 0.0, 0.0, 0.0, 0.0];
    let stop = vec![0.2, 0.3, 0.25, 0.25, 1.0, 0.4];
    let transitions = vec![
        vec![0.0, 0.5, 0.5, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.6, 0.4, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.7, 0.3, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.5],
        vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        vec![0.3, 0.0, 0.0, 0.0, 0.7, 0.0],
    ];
    GroundTruthChain::new(states, initial, stop, transitions).unwrap()
}

/// A ten-state chain with stop probabilities in {0, 1}: eight live states
/// feeding two absorbing ones. Every live state is visited heavily, making
/// it the estimation-recovery oracle.
pub fn ten_state_chain() -> GroundTruthChain {
    let states = (1..=10u32)
        .map(|l| [ComponentId(l)].into_iter().collect())
        .collect();
    let initial = vec![0.125; 8]
        .into_iter()
        .chain([0.0, 0.0])
        .collect::<Vec<_>>();
    let mut stop = vec![0.0; 8];
    stop.extend([1.0, 1.0]);
    let mut transitions = vec![vec![0.0; 10]; 10];
    for i in 0..8 {
        transitions[i][(i + 1) % 8] = 0.30;
        transitions[i][(i + 2) % 8] += 0.25;
        transitions[i][(i + 7) % 8] += 0.15;
        transitions[i][8] = 0.15;
        transitions[i][9] = 0.15;
    }
    transitions[8][8] = 1.0;
    transitions[9][9] = 1.0;
    GroundTruthChain::new(states, initial, stop, transitions).unwrap()
}
