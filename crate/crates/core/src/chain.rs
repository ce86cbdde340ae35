//! Ground-truth Markov sampler: the estimation oracle.
//!
//! A chain draws an initial failure state, then repeatedly either stops
//! (per-state stop probability) or moves to a successor drawn from that
//! state's continuation distribution. Sampling it yields cascade datasets
//! whose estimated interaction graph must converge to the chain's own
//! conditional transition matrix, which is what makes the chain a usable
//! stand-in for a physical cascade simulator.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{Cascade, CascadeDataset, ComponentId};
use crate::error::{Error, Result};
use crate::graph::StochasticMatrix;
use crate::seed::cascade_rng;

pub const DEFAULT_MAX_GENERATIONS: usize = 50;

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Generative Markov model over failure states with per-state stop
/// probabilities and continuation distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthChain {
    states: Vec<BTreeSet<ComponentId>>,
    initial: Vec<f64>,
    stop: Vec<f64>,
    /// transitions[i][j] = P(next = state j | current = state i, continue).
    transitions: Vec<Vec<f64>>,
}

impl GroundTruthChain {
    pub fn new(
        states: Vec<BTreeSet<ComponentId>>,
        initial: Vec<f64>,
        stop: Vec<f64>,
        transitions: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidInput {
                what: "chain",
                message: "no states".into(),
            });
        }
        if initial.len() != n || stop.len() != n || transitions.len() != n {
            return Err(Error::InvalidInput {
                what: "chain",
                message: "initial, stop and transitions must match the state count".into(),
            });
        }
        let mut seen = BTreeSet::new();
        for (i, state) in states.iter().enumerate() {
            if state.is_empty() {
                return Err(Error::InvalidInput {
                    what: "chain",
                    message: format!("state {i} is empty"),
                });
            }
            if !seen.insert(state.clone()) {
                return Err(Error::InvalidInput {
                    what: "chain",
                    message: format!("state {i} duplicates an earlier state"),
                });
            }
        }
        let initial_sum: f64 = initial.iter().sum();
        if initial.iter().any(|&p| p < 0.0)
            || (initial_sum - 1.0).abs() > NORMALIZATION_TOLERANCE
        {
            return Err(Error::NotNormalized {
                context: "initial distribution".into(),
                sum: initial_sum,
            });
        }
        for (i, &q) in stop.iter().enumerate() {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidInput {
                    what: "chain",
                    message: format!("stop probability of state {i} is {q}"),
                });
            }
        }
        for (i, row) in transitions.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput {
                    what: "chain",
                    message: format!("transition row {i} has length {}", row.len()),
                });
            }
            if stop[i] < 1.0 {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| p < 0.0)
                    || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE
                {
                    return Err(Error::NotNormalized {
                        context: format!("continuation distribution of state {i}"),
                        sum,
                    });
                }
            }
        }
        Ok(Self {
            states,
            initial,
            stop,
            transitions,
        })
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[BTreeSet<ComponentId>] {
        &self.states
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn stop(&self) -> &[f64] {
        &self.stop
    }

    pub fn transitions(&self) -> &[Vec<f64>] {
        &self.transitions
    }

    pub fn state_index(&self, state: &BTreeSet<ComponentId>) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    /// All component ids appearing in any state.
    pub fn component_universe(&self) -> BTreeSet<ComponentId> {
        self.states.iter().flatten().copied().collect()
    }
}

fn draw_categorical<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Samples `m` cascades. Each cascade uses its own stream derived from
/// (seed, cascade_id), so the result is byte-identical no matter how the
/// work is split across threads.
pub fn sample_cascades(
    chain: &GroundTruthChain,
    m: u64,
    seed: u64,
    max_generations: usize,
) -> Result<CascadeDataset> {
    if m == 0 {
        return Err(Error::InvalidInput {
            what: "sample size",
            message: "M must be at least 1".into(),
        });
    }
    if max_generations < 2 {
        return Err(Error::InvalidInput {
            what: "max_generations",
            message: "must be at least 2".into(),
        });
    }
    let cascades: Vec<Cascade> = (0..m)
        .into_par_iter()
        .map(|id| {
            let mut rng = cascade_rng(seed, id);
            let mut current = draw_categorical(&mut rng, &chain.initial);
            let mut generations = vec![chain.states[current].clone()];
            while generations.len() < max_generations {
                let u: f64 = rng.random();
                if u < chain.stop[current] {
                    break;
                }
                current = draw_categorical(&mut rng, &chain.transitions[current]);
                generations.push(chain.states[current].clone());
            }
            Cascade::new(id, generations).expect("chain states are non-empty")
        })
        .collect();
    CascadeDataset::new(cascades)
}

/// The left-stochastic matrix the estimator converges to: column i is the
/// continuation distribution of state i, or the unit vector e_i when state
/// i always stops (the self-loop given to absorbing states).
pub fn conditional_transition_matrix(chain: &GroundTruthChain) -> StochasticMatrix {
    let n = chain.state_count();
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        if chain.stop[i] < 1.0 {
            for j in 0..n {
                m[(j, i)] = chain.transitions[i][j];
            }
        } else {
            m[(i, i)] = 1.0;
        }
    }
    StochasticMatrix::new(m).expect("columns normalized by construction")
}

fn reduce_into(
    chain: &GroundTruthChain,
    affected_sources: impl Fn(usize) -> bool,
    targeted_state: impl Fn(usize) -> bool,
    rho: f64,
) -> Result<GroundTruthChain> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput {
            what: "rho",
            message: format!("{rho} outside [0, 1]"),
        });
    }
    let mut out = chain.clone();
    for i in 0..chain.state_count() {
        if chain.stop[i] >= 1.0 || !affected_sources(i) {
            continue;
        }
        let targeted_mass: f64 = chain.transitions[i]
            .iter()
            .enumerate()
            .filter(|&(j, _)| targeted_state(j))
            .map(|(_, &p)| p)
            .sum();
        if targeted_mass == 0.0 {
            continue;
        }
        let removed = rho * targeted_mass;
        let denominator = 1.0 - removed;
        // Transition mass removed from the targeted states ends the cascade
        // instead.
        out.stop[i] = chain.stop[i] + (1.0 - chain.stop[i]) * removed;
        if denominator <= f64::EPSILON {
            out.stop[i] = 1.0;
            continue;
        }
        for (j, p) in out.transitions[i].iter_mut().enumerate() {
            if targeted_state(j) {
                *p *= 1.0 - rho;
            }
            *p /= denominator;
        }
    }
    Ok(out)
}

/// Scales every continuation probability into a state containing any
/// targeted component by (1 - rho); the removed mass becomes stop
/// probability of the source state. The synthetic analog of upgrading the
/// targeted lines.
pub fn apply_chain_mitigation(
    chain: &GroundTruthChain,
    targeted: &BTreeSet<ComponentId>,
    rho: f64,
) -> Result<GroundTruthChain> {
    let hit: Vec<bool> = chain
        .states
        .iter()
        .map(|s| s.iter().any(|c| targeted.contains(c)))
        .collect();
    reduce_into(chain, |_| true, |j| hit[j], rho)
}

/// Scales continuation probabilities from outside `subgraph_states` into it
/// by (1 - rho), routing the removed mass to termination. The chain-world
/// form of nearly decomposing a critical subgraph from the rest.
pub fn apply_chain_decoupling(
    chain: &GroundTruthChain,
    subgraph_states: &[BTreeSet<ComponentId>],
    rho: f64,
) -> Result<GroundTruthChain> {
    let inside: Vec<bool> = chain
        .states
        .iter()
        .map(|s| subgraph_states.contains(s))
        .collect();
    reduce_into(chain, |i| !inside[i], |j| inside[j], rho)
}

/// Sets the stop probability of every matched state to one: reaching it
/// ends the cascade. The chain-world form of turning states absorbing.
pub fn apply_chain_absorption(
    chain: &GroundTruthChain,
    states: &[BTreeSet<ComponentId>],
) -> GroundTruthChain {
    let mut out = chain.clone();
    for (i, state) in chain.states.iter().enumerate() {
        if states.contains(state) {
            out.stop[i] = 1.0;
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct ChainRecord {
    states: Vec<Vec<u32>>,
    initial: Vec<f64>,
    stop: Vec<f64>,
    transitions: Vec<Vec<f64>>,
}

/// Writes the chain spec file: a single JSON record with `states`,
/// `initial`, `stop` and `transitions` (row-major).
pub fn write_chain<W: Write>(chain: &GroundTruthChain, writer: &mut W) -> Result<()> {
    let record = ChainRecord {
        states: chain
            .states
            .iter()
            .map(|s| s.iter().map(|c| c.0).collect())
            .collect(),
        initial: chain.initial.clone(),
        stop: chain.stop.clone(),
        transitions: chain.transitions.clone(),
    };
    serde_json::to_writer(&mut *writer, &record)?;
    writeln!(writer)?;
    Ok(())
}

/// Reads a chain spec file written by [`write_chain`].
pub fn read_chain<R: BufRead>(reader: R) -> Result<GroundTruthChain> {
    let record: ChainRecord = serde_json::from_reader(reader)?;
    GroundTruthChain::new(
        record
            .states
            .iter()
            .map(|ids| ids.iter().copied().map(ComponentId).collect())
            .collect(),
        record.initial,
        record.stop,
        record.transitions,
    )
}

/// The standard 30-state corridor benchmark chain.
///
/// Layout: a feeder into a ten-state corridor with forward/backward
/// coupling strong enough to give the spectrum its largest positive
/// eigenvalue; a three-state ring with leakage producing the dominant
/// conjugate pair; and six two-generation decoy branches that end in wide
/// multi-line failure states, padding the component universe so that
/// untargeted mitigation is diluted.
pub fn corridor_chain() -> GroundTruthChain {
    const N: usize = 30;
    // Indices.
    const F: usize = 0; // feeder into the corridor, line 17
    const B: usize = 1; // side branch re-entering the corridor, line 19
    const C1: usize = 2; // corridor states C1..C10 at 2..=11, lines 1..=10
    const X: usize = 12; // corridor ending state, lines 11 and 12
    const G: usize = 13; // feeder into the ring, line 18
    const R1: usize = 14; // ring states R1..R3 at 14..=16, lines 13..=15
    const RX: usize = 17; // ring exit state, line 16
    const D1: usize = 18; // decoy starts D1..D6 at 18..=23, lines 20..=25
    const E1: usize = 24; // decoy enders E1..E6 at 24..=29, 8 lines each

    let mut states: Vec<BTreeSet<ComponentId>> = vec![BTreeSet::new(); N];
    states[F] = [17].map(ComponentId).into();
    states[B] = [19].map(ComponentId).into();
    for k in 0..10 {
        states[C1 + k] = [k as u32 + 1].map(ComponentId).into();
    }
    states[X] = [11, 12].map(ComponentId).into();
    states[G] = [18].map(ComponentId).into();
    for k in 0..3 {
        states[R1 + k] = [k as u32 + 13].map(ComponentId).into();
    }
    states[RX] = [16].map(ComponentId).into();
    for k in 0..6 {
        states[D1 + k] = [k as u32 + 20].map(ComponentId).into();
    }
    for k in 0..6u32 {
        states[E1 + k as usize] = (30 + 8 * k..30 + 8 * (k + 1)).map(ComponentId).collect();
    }

    let mut initial = vec![0.0; N];
    initial[F] = 0.20;
    initial[G] = 0.15;
    initial[C1] = 0.05;
    for k in 0..6 {
        initial[D1 + k] = 0.10;
    }

    let mut stop = vec![0.0; N];
    stop[F] = 0.05;
    stop[B] = 0.05;
    for k in 0..10 {
        stop[C1 + k] = 0.12;
    }
    stop[X] = 1.0;
    stop[G] = 0.05;
    for k in 0..3 {
        stop[R1 + k] = 0.10;
    }
    stop[RX] = 1.0;
    for k in 0..6 {
        stop[D1 + k] = 0.25;
    }
    for k in 0..6 {
        stop[E1 + k] = 1.0;
    }

    let mut transitions = vec![vec![0.0; N]; N];
    transitions[F][C1] = 0.85;
    transitions[F][B] = 0.15;
    transitions[B][C1 + 2] = 1.0;
    transitions[C1][C1 + 1] = 0.58;
    transitions[C1][X] = 0.42;
    for k in 1..9 {
        transitions[C1 + k][C1 + k + 1] = 0.50;
        transitions[C1 + k][C1 + k - 1] = 0.42;
        transitions[C1 + k][X] = 0.08;
    }
    transitions[C1 + 9][C1 + 8] = 0.42;
    transitions[C1 + 9][X] = 0.58;
    transitions[G][R1] = 0.92;
    transitions[G][RX] = 0.08;
    for k in 0..3 {
        transitions[R1 + k][R1 + (k + 1) % 3] = 0.78;
        transitions[R1 + k][RX] = 0.22;
    }
    for k in 0..6 {
        transitions[D1 + k][E1 + k] = 1.0;
    }
    // Absorbing rows are never drawn from; keep them valid self-loops.
    for i in [X, RX, E1, E1 + 1, E1 + 2, E1 + 3, E1 + 4, E1 + 5] {
        transitions[i][i] = 1.0;
    }

    GroundTruthChain::new(states, initial, stop, transitions)
        .expect("corridor chain constants are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::test_support::gen;
    use crate::cascade::{ending_metrics, filter_multi_generation};
    use crate::graph::build_state_graph;

    fn singleton_states(lines: &[u32]) -> Vec<BTreeSet<ComponentId>> {
        lines.iter().map(|&l| gen(&[l])).collect()
    }

    fn two_state_chain() -> GroundTruthChain {
        GroundTruthChain::new(
            singleton_states(&[1, 2]),
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn always_stop_chain_yields_single_generation_cascades() {
        let chain = GroundTruthChain::new(
            singleton_states(&[5]),
            vec![1.0],
            vec![1.0],
            vec![vec![1.0]],
        )
        .unwrap();
        let ds = sample_cascades(&chain, 50, 3, 10).unwrap();
        for cascade in ds.cascades() {
            assert_eq!(cascade.generations(), &[gen(&[5])]);
        }
    }

    #[test]
    fn deterministic_two_state_chain() {
        let ds = sample_cascades(&two_state_chain(), 40, 11, 10).unwrap();
        for cascade in ds.cascades() {
            assert_eq!(cascade.generations(), &[gen(&[1]), gen(&[2])]);
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let chain = corridor_chain();
        let a = sample_cascades(&chain, 500, 9, DEFAULT_MAX_GENERATIONS).unwrap();
        let b = sample_cascades(&chain, 500, 9, DEFAULT_MAX_GENERATIONS).unwrap();
        assert_eq!(a, b);
        let c = sample_cascades(&chain, 500, 10, DEFAULT_MAX_GENERATIONS).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn prefix_property_of_streams() {
        let chain = corridor_chain();
        let big = sample_cascades(&chain, 300, 21, DEFAULT_MAX_GENERATIONS).unwrap();
        let small = sample_cascades(&chain, 120, 21, DEFAULT_MAX_GENERATIONS).unwrap();
        assert_eq!(big.prefix(120), small);
    }

    #[test]
    fn truncation_caps_generation_count() {
        // Never stops; two states swapping forever.
        let chain = GroundTruthChain::new(
            singleton_states(&[1, 2]),
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let ds = sample_cascades(&chain, 5, 1, 7).unwrap();
        for cascade in ds.cascades() {
            assert_eq!(cascade.generations().len(), 7);
        }
    }

    #[test]
    fn rejects_zero_sample_size() {
        assert!(sample_cascades(&two_state_chain(), 0, 1, 10).is_err());
        assert!(sample_cascades(&two_state_chain(), 1, 1, 1).is_err());
    }

    #[test]
    fn validation_rejects_bad_distributions() {
        let err = GroundTruthChain::new(
            singleton_states(&[1, 2]),
            vec![0.7, 0.7],
            vec![0.0, 1.0],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotNormalized { .. }));

        let err = GroundTruthChain::new(
            singleton_states(&[1, 2]),
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![vec![0.3, 0.3], vec![0.0, 1.0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotNormalized { .. }));

        // Row of an always-stopping state is not constrained.
        GroundTruthChain::new(
            singleton_states(&[1, 2]),
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
        )
        .unwrap();
    }

    #[test]
    fn conditional_matrix_of_all_stop_chain_is_identity() {
        let chain = GroundTruthChain::new(
            singleton_states(&[1, 2, 3]),
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]],
        )
        .unwrap();
        let w = conditional_transition_matrix(&chain);
        assert_eq!(w.as_matrix(), &nalgebra::DMatrix::identity(3, 3));
    }

    #[test]
    fn conditional_matrix_two_state() {
        let w = conditional_transition_matrix(&two_state_chain());
        let m = w.as_matrix();
        assert_eq!(m[(1, 0)], 1.0);
        assert_eq!(m[(1, 1)], 1.0);
        assert_eq!(m[(0, 0)], 0.0);
        assert_eq!(m[(0, 1)], 0.0);
    }

    #[test]
    fn mitigation_identity_at_rho_zero() {
        let chain = corridor_chain();
        let targeted: BTreeSet<ComponentId> = [1, 2, 3].map(ComponentId).into();
        assert_eq!(apply_chain_mitigation(&chain, &targeted, 0.0).unwrap(), chain);
    }

    #[test]
    fn mitigation_moves_mass_to_stop() {
        // a -> b always; target b's line with rho 1: a must always stop.
        let chain = two_state_chain();
        let targeted: BTreeSet<ComponentId> = [2].map(ComponentId).into();
        let cut = apply_chain_mitigation(&chain, &targeted, 1.0).unwrap();
        assert_eq!(cut.stop()[0], 1.0);

        // rho = 0.4 splits the mass accordingly.
        let partial = apply_chain_mitigation(&chain, &targeted, 0.4).unwrap();
        assert!((partial.stop()[0] - 0.4).abs() <= 1e-15);
        assert!((partial.transitions()[0][1] - 1.0).abs() <= 1e-15);
        let w = conditional_transition_matrix(&partial);
        assert!(StochasticMatrix::new(w.as_matrix().clone()).is_ok());
    }

    #[test]
    fn decoupling_only_touches_outside_sources() {
        let chain = corridor_chain();
        let ring: Vec<BTreeSet<ComponentId>> =
            vec![gen(&[13]), gen(&[14]), gen(&[15])];
        let cut = apply_chain_decoupling(&chain, &ring, 1.0).unwrap();
        let g = chain.state_index(&gen(&[18])).unwrap();
        let r1 = chain.state_index(&gen(&[13])).unwrap();
        let r2 = chain.state_index(&gen(&[14])).unwrap();
        // The feeder now stops instead of entering the ring.
        assert_eq!(cut.transitions()[g][r1], 0.0);
        assert!((cut.stop()[g] - (0.05 + 0.95 * 0.92)).abs() <= 1e-12);
        // Ring-internal transitions are untouched.
        assert_eq!(cut.transitions()[r1][r2], chain.transitions()[r1][r2]);
    }

    #[test]
    fn absorption_sets_stop_to_one() {
        let chain = corridor_chain();
        let cut = apply_chain_absorption(&chain, &[gen(&[1])]);
        let c1 = chain.state_index(&gen(&[1])).unwrap();
        assert_eq!(cut.stop()[c1], 1.0);
        assert_eq!(cut.transitions()[c1], chain.transitions()[c1]);
    }

    #[test]
    fn chain_file_round_trip() {
        let chain = corridor_chain();
        let mut buf = Vec::new();
        write_chain(&chain, &mut buf).unwrap();
        let back = read_chain(buf.as_slice()).unwrap();
        assert_eq!(back, chain);
    }

    #[test]
    fn corridor_sample_reaches_large_generations() {
        let chain = corridor_chain();
        let ds = sample_cascades(&chain, 4000, 5, DEFAULT_MAX_GENERATIONS).unwrap();
        let metrics = ending_metrics(&ds, 3).unwrap();
        assert!(
            metrics.large_cascade_probability > 0.02,
            "corridor fixture must produce large cascades, got {}",
            metrics.large_cascade_probability
        );
        let filtered = filter_multi_generation(&ds);
        let graph = build_state_graph(&filtered).unwrap();
        assert_eq!(graph.vertex_count(), 30, "all states should be visited");
    }
}
