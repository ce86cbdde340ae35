//! Statistical checks of the samplers against exact chain probabilities.

mod common;

use std::collections::BTreeMap;

use cascade_core::cascade::{ending_metrics, filter_multi_generation, ComponentId};
use cascade_core::chain::{
    apply_chain_mitigation, conditional_transition_matrix, corridor_chain, sample_cascades,
    DEFAULT_MAX_GENERATIONS,
};
use cascade_core::graph::build_state_graph;

use common::{
    exact_ending_distribution, exact_large_probability, six_state_chain, ten_state_chain,
    three_sigma,
};

#[test]
fn consecutive_pair_frequencies_match_the_chain() {
    let chain = six_state_chain();
    let ds = sample_cascades(&chain, 30_000, 17, DEFAULT_MAX_GENERATIONS).unwrap();

    // Count observed consecutive state pairs.
    let mut pair_counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut source_counts: BTreeMap<usize, u64> = BTreeMap::new();
    for cascade in ds.cascades() {
        for pair in cascade.generations().windows(2) {
            let i = chain.state_index(&pair[0]).unwrap();
            let j = chain.state_index(&pair[1]).unwrap();
            *pair_counts.entry((i, j)).or_insert(0) += 1;
            *source_counts.entry(i).or_insert(0) += 1;
        }
    }

    for (&i, &n_i) in &source_counts {
        if n_i < 200 {
            continue;
        }
        for j in 0..chain.state_count() {
            let expected = chain.transitions()[i][j];
            let observed =
                pair_counts.get(&(i, j)).copied().unwrap_or(0) as f64 / n_i as f64;
            assert!(
                (observed - expected).abs() <= three_sigma(expected, n_i as usize),
                "pair ({i} -> {j}): observed {observed}, expected {expected}, n = {n_i}"
            );
        }
    }
}

#[test]
fn estimated_graph_recovers_conditional_matrix() {
    let chain = ten_state_chain();
    let ds = sample_cascades(&chain, 40_000, 23, DEFAULT_MAX_GENERATIONS).unwrap();
    let filtered = filter_multi_generation(&ds);
    let graph = build_state_graph(&filtered).unwrap();
    assert_eq!(graph.vertex_count(), chain.state_count());

    let oracle = conditional_transition_matrix(&chain);
    let mut worst = 0.0f64;
    for i in 0..chain.state_count() {
        let vi = graph.vertex_of(&chain.states()[i]).unwrap();
        for j in 0..chain.state_count() {
            let vj = graph.vertex_of(&chain.states()[j]).unwrap();
            let estimated = graph.weight(vi, vj);
            let exact = oracle.as_matrix()[(j, i)];
            worst = worst.max((estimated - exact).abs());
        }
    }
    assert!(worst <= 0.03, "max-entry estimation error {worst}");
}

#[test]
fn estimation_is_conditional_on_continuation() {
    // One live state with stop probability 0.5 that always moves to the
    // absorbing state when it continues: the estimated weight must be the
    // conditional 1.0, not the unconditional 0.5.
    let chain = cascade_core::chain::GroundTruthChain::new(
        vec![
            [ComponentId(1)].into_iter().collect(),
            [ComponentId(2)].into_iter().collect(),
        ],
        vec![1.0, 0.0],
        vec![0.5, 1.0],
        vec![vec![0.0, 1.0], vec![0.0, 1.0]],
    )
    .unwrap();
    let ds = sample_cascades(&chain, 4_000, 3, 10).unwrap();
    let filtered = filter_multi_generation(&ds);
    let graph = build_state_graph(&filtered).unwrap();
    let v1 = graph.vertex_of(&chain.states()[0]).unwrap();
    let v2 = graph.vertex_of(&chain.states()[1]).unwrap();
    assert_eq!(graph.weight(v1, v2), 1.0);
}

#[test]
fn sampled_ending_distribution_matches_exact_enumeration() {
    let chain = six_state_chain();
    let m = 50_000usize;
    let ds = sample_cascades(&chain, m as u64, 29, 10).unwrap();
    let metrics = ending_metrics(&ds, 3).unwrap();
    let exact = exact_ending_distribution(&chain, 10);
    for (g, &p_exact) in exact.iter().enumerate() {
        let p_sampled = metrics.distribution.get(&g).copied().unwrap_or(0.0);
        assert!(
            (p_sampled - p_exact).abs() <= three_sigma(p_exact, m),
            "generation {g}: sampled {p_sampled}, exact {p_exact}"
        );
    }
    let exact_large: f64 = 1.0 - exact[..=3].iter().sum::<f64>();
    assert!(
        (metrics.large_cascade_probability - exact_large).abs()
            <= three_sigma(exact_large, m)
    );
}

#[test]
fn twenty_line_grid_simulation_is_reproducible_and_cascades() {
    // A ladder of twenty moderately loaded lines.
    let spec: Vec<(f64, f64)> = (0..20)
        .map(|i| if i % 3 == 0 { (0.95, 1.0) } else { (0.6, 1.0) })
        .collect();
    let grid = cascade_core::grid::path_grid(&spec, 0.9).unwrap();
    let a = cascade_core::grid::simulate_grid_cascades(&grid, 10_000, 12, 0.02).unwrap();
    let b = cascade_core::grid::simulate_grid_cascades(&grid, 10_000, 12, 0.02).unwrap();
    assert_eq!(a, b);
    let multi = a
        .cascades()
        .iter()
        .filter(|c| c.generations().len() > 1)
        .count();
    assert!(multi > 0, "expected multi-generation cascades");
    let filtered = filter_multi_generation(&a);
    assert_eq!(filtered.len(), multi);
    build_state_graph(&filtered).unwrap();
}

#[test]
fn chain_mitigation_lowers_exact_and_sampled_large_probability() {
    let chain = corridor_chain();
    let corridor_lines: std::collections::BTreeSet<ComponentId> =
        (1..=10).map(ComponentId).collect();
    let mitigated = apply_chain_mitigation(&chain, &corridor_lines, 0.2).unwrap();

    let base_exact = exact_large_probability(&chain, 3);
    let mit_exact = exact_large_probability(&mitigated, 3);
    assert!(
        mit_exact < base_exact,
        "exact large probability must drop: {base_exact} -> {mit_exact}"
    );

    let m = 50_000usize;
    let ds = sample_cascades(&mitigated, m as u64, 31, DEFAULT_MAX_GENERATIONS).unwrap();
    let sampled = ending_metrics(&ds, 3).unwrap().large_cascade_probability;
    assert!(
        (sampled - mit_exact).abs() <= three_sigma(mit_exact, m),
        "sampled {sampled} vs exact {mit_exact}"
    );
}
