//! Mitigation planning and evaluation.
//!
//! Plans select physical lines to harden. The selection comes from the
//! spectrum (top entries of the largest positive transient mode, or the
//! subgraph of the dominant complex pair), from failure frequency, or from
//! a seeded uniform draw as the control arm. Applying a plan happens in the
//! generative world (chain edits or grid capacity upgrades); evaluation
//! compares ending-generation distributions and the probability of large
//! cascades between the baseline and regenerated datasets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{ending_metrics, CascadeDataset, ComponentId, DatasetStats, EndingMetrics};
use crate::error::{Error, Result};
use crate::graph::InteractionGraph;
use crate::seed::{cascade_rng, child_seed};
use crate::spectral::{participation, Mode, SpectralAnalysis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Eigen,
    MostFrequent,
    Decouple,
    Absorb,
}

impl StrategyKind {
    pub fn label(&self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Eigen => "eigen",
            StrategyKind::MostFrequent => "most_frequent",
            StrategyKind::Decouple => "decouple",
            StrategyKind::Absorb => "absorb",
        }
    }
}

/// How many eigenvector entries to take: a fixed count or every entry at or
/// above a modulus threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    TopCount(usize),
    Threshold(f64),
}

/// A concrete mitigation plan: which states were selected and which
/// physical lines that works out to (S' = number of targeted lines).
#[derive(Debug, Clone, PartialEq)]
pub struct MitigationPlan {
    pub strategy: StrategyKind,
    /// Requested top-entry count, when selection was by count.
    pub s: Option<usize>,
    /// Modulus threshold, when selection was by threshold.
    pub threshold: Option<f64>,
    /// Selected vertices of the interaction graph (empty for Random/MF).
    pub targeted_states: BTreeSet<usize>,
    pub targeted_lines: BTreeSet<ComponentId>,
    pub seed: Option<u64>,
    pub rho: Option<f64>,
    pub factor: Option<f64>,
}

impl MitigationPlan {
    /// S': number of distinct physical lines the plan touches.
    pub fn s_prime(&self) -> usize {
        self.targeted_lines.len()
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_factor(mut self, factor: f64) -> Self {
        self.factor = Some(factor);
        self
    }
}

/// Chain-world reduction factor corresponding to a 20% capacity upgrade.
pub const DEFAULT_CHAIN_RHO: f64 = 0.2;
/// Grid-world capacity upgrade factor.
pub const DEFAULT_GRID_FACTOR: f64 = 1.2;

/// Applies a plan in the chain world. Line-targeted strategies scale
/// transitions into states containing targeted lines; Decouple cuts the
/// inbound links of its targeted states; Absorb pins their stop
/// probability at one. `graph` maps the plan's vertex ids back to failure
/// sets.
pub fn apply_plan_to_chain(
    plan: &MitigationPlan,
    graph: &InteractionGraph,
    chain: &crate::chain::GroundTruthChain,
) -> Result<crate::chain::GroundTruthChain> {
    let targeted_sets = || -> Vec<BTreeSet<ComponentId>> {
        plan.targeted_states
            .iter()
            .map(|&v| graph.state(v).clone())
            .collect()
    };
    match plan.strategy {
        StrategyKind::Random | StrategyKind::Eigen | StrategyKind::MostFrequent => {
            crate::chain::apply_chain_mitigation(
                chain,
                &plan.targeted_lines,
                plan.rho.unwrap_or(DEFAULT_CHAIN_RHO),
            )
        }
        StrategyKind::Decouple => crate::chain::apply_chain_decoupling(
            chain,
            &targeted_sets(),
            plan.rho.unwrap_or(1.0),
        ),
        StrategyKind::Absorb => Ok(crate::chain::apply_chain_absorption(
            chain,
            &targeted_sets(),
        )),
    }
}

/// Applies a plan in the grid world: upgrades targeted line capacities.
pub fn apply_plan_to_grid(
    plan: &MitigationPlan,
    grid: &crate::grid::ThresholdGrid,
) -> Result<crate::grid::ThresholdGrid> {
    crate::grid::upgrade_capacities(
        grid,
        &plan.targeted_lines,
        plan.factor.unwrap_or(DEFAULT_GRID_FACTOR),
    )
}

/// The `s` vertices with largest eigenvector modulus, ties by ascending
/// vertex id. Requests beyond the dimension are truncated.
pub fn select_top_states(mode: &Mode, s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..mode.vector.len()).collect();
    order.sort_by(|&a, &b| {
        mode.vector[b]
            .norm()
            .total_cmp(&mode.vector[a].norm())
            .then(a.cmp(&b))
    });
    order.truncate(s);
    order
}

/// All vertices whose eigenvector modulus reaches `threshold`, largest
/// first.
pub fn select_states_above(mode: &Mode, threshold: f64) -> Vec<usize> {
    let mut selected: Vec<usize> = (0..mode.vector.len())
        .filter(|&i| mode.vector[i].norm() >= threshold)
        .collect();
    selected.sort_by(|&a, &b| {
        mode.vector[b]
            .norm()
            .total_cmp(&mode.vector[a].norm())
            .then(a.cmp(&b))
    });
    selected
}

/// Union of the component sets of the given states; its cardinality is S'.
pub fn lines_of_states(
    graph: &InteractionGraph,
    states: impl IntoIterator<Item = usize>,
) -> BTreeSet<ComponentId> {
    graph.lines_of(states)
}

/// Inbound coupling of a subgraph: per member vertex, the summed weight of
/// edges entering it from outside the subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct InboundWeight {
    pub per_vertex: BTreeMap<usize, f64>,
    pub total: f64,
}

impl InboundWeight {
    /// Fraction of the subgraph's total inbound weight entering at `vertex`.
    pub fn share(&self, vertex: usize) -> f64 {
        if self.total == 0.0 {
            0.0
        } else {
            self.per_vertex.get(&vertex).copied().unwrap_or(0.0) / self.total
        }
    }

    /// Member with the largest inbound weight, ties by ascending id.
    pub fn max_vertex(&self) -> Option<usize> {
        self.per_vertex
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&v, _)| v)
    }
}

/// S_w of each subgraph member: weights flowing in from outside.
pub fn inbound_weight_sum(
    graph: &InteractionGraph,
    subgraph: &BTreeSet<usize>,
) -> Result<InboundWeight> {
    if subgraph.is_empty() {
        return Err(Error::InvalidInput {
            what: "subgraph",
            message: "empty vertex set".into(),
        });
    }
    let mut per_vertex: BTreeMap<usize, f64> =
        subgraph.iter().map(|&v| (v, 0.0)).collect();
    for (i, j, e) in graph.edges() {
        if !subgraph.contains(&i) && subgraph.contains(&j) {
            *per_vertex.get_mut(&j).expect("member") += e.weight;
        }
    }
    let total = per_vertex.values().sum();
    Ok(InboundWeight { per_vertex, total })
}

/// What the Decouple strategy aims at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoupleTarget {
    /// Every vertex participating in the top complex mode.
    Subgraph,
    /// Only the member with the largest S_w.
    MaxInboundVertex,
}

/// Inputs for building a plan; each strategy needs different ones.
pub enum StrategyRequest<'a> {
    Random {
        count: usize,
        seed: u64,
        universe: &'a BTreeSet<ComponentId>,
    },
    Eigen {
        selection: Selection,
        analysis: &'a SpectralAnalysis,
        graph: &'a InteractionGraph,
    },
    MostFrequent {
        count: usize,
        stats: &'a DatasetStats,
    },
    Decouple {
        rho: f64,
        epsilon: f64,
        target: DecoupleTarget,
        analysis: &'a SpectralAnalysis,
        graph: &'a InteractionGraph,
    },
    Absorb {
        count: usize,
        graph: &'a InteractionGraph,
    },
}

/// Builds a mitigation plan. Selections are deterministic: ties everywhere
/// break by ascending id, and the Random arm derives its draw from the
/// given seed.
pub fn plan_strategy(request: StrategyRequest<'_>) -> Result<MitigationPlan> {
    match request {
        StrategyRequest::Random {
            count,
            seed,
            universe,
        } => {
            let mut pool: Vec<ComponentId> = universe.iter().copied().collect();
            let mut rng = cascade_rng(child_seed(seed, "plan-random"), 0);
            let take = count.min(pool.len());
            // Partial Fisher-Yates.
            for i in 0..take {
                let j = i + rng.random_range(0..pool.len() - i);
                pool.swap(i, j);
            }
            Ok(MitigationPlan {
                strategy: StrategyKind::Random,
                s: Some(count),
                threshold: None,
                targeted_states: BTreeSet::new(),
                targeted_lines: pool.into_iter().take(take).collect(),
                seed: Some(seed),
                rho: None,
                factor: None,
            })
        }
        StrategyRequest::Eigen {
            selection,
            analysis,
            graph,
        } => {
            let mode = analysis
                .top_transient_positive()
                .ok_or(Error::NoTransientPositiveMode)?;
            let (states, s, threshold) = match selection {
                Selection::TopCount(s) => (select_top_states(mode, s), Some(s), None),
                Selection::Threshold(t) => (select_states_above(mode, t), None, Some(t)),
            };
            let targeted_states: BTreeSet<usize> = states.into_iter().collect();
            let targeted_lines = lines_of_states(graph, targeted_states.iter().copied());
            Ok(MitigationPlan {
                strategy: StrategyKind::Eigen,
                s,
                threshold,
                targeted_states,
                targeted_lines,
                seed: None,
                rho: None,
                factor: None,
            })
        }
        StrategyRequest::MostFrequent { count, stats } => {
            let mut lines: Vec<(ComponentId, u64)> = stats
                .component_failure_frequency
                .iter()
                .map(|(&c, &n)| (c, n))
                .collect();
            lines.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            Ok(MitigationPlan {
                strategy: StrategyKind::MostFrequent,
                s: Some(count),
                threshold: None,
                targeted_states: BTreeSet::new(),
                targeted_lines: lines.into_iter().take(count).map(|(c, _)| c).collect(),
                seed: None,
                rho: None,
                factor: None,
            })
        }
        StrategyRequest::Decouple {
            rho,
            epsilon,
            target,
            analysis,
            graph,
        } => {
            let mode = analysis
                .transient_complex_representatives()
                .into_iter()
                .next()
                .ok_or(Error::NoTransientComplexMode)?;
            let members: BTreeSet<usize> = participation(mode, epsilon)?
                .into_iter()
                .map(|p| p.vertex)
                .collect();
            if members.is_empty() {
                return Err(Error::InvalidInput {
                    what: "decouple plan",
                    message: format!("no vertex participates at epsilon {epsilon}"),
                });
            }
            let targeted_states: BTreeSet<usize> = match target {
                DecoupleTarget::Subgraph => members,
                DecoupleTarget::MaxInboundVertex => {
                    let inbound = inbound_weight_sum(graph, &members)?;
                    [inbound.max_vertex().expect("non-empty subgraph")].into()
                }
            };
            let targeted_lines = lines_of_states(graph, targeted_states.iter().copied());
            Ok(MitigationPlan {
                strategy: StrategyKind::Decouple,
                s: None,
                threshold: Some(epsilon),
                targeted_states,
                targeted_lines,
                seed: None,
                rho: Some(rho),
                factor: None,
            })
        }
        StrategyRequest::Absorb { count, graph } => {
            // Transient states with the largest self-loop weight are the
            // cheapest to convert into absorbing states.
            let mut candidates: Vec<(usize, f64)> = (0..graph.vertex_count())
                .filter(|&v| !graph.is_absorbing(v))
                .map(|v| (v, graph.weight(v, v)))
                .collect();
            candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let targeted_states: BTreeSet<usize> =
                candidates.into_iter().take(count).map(|(v, _)| v).collect();
            let targeted_lines = lines_of_states(graph, targeted_states.iter().copied());
            Ok(MitigationPlan {
                strategy: StrategyKind::Absorb,
                s: Some(count),
                threshold: None,
                targeted_states,
                targeted_lines,
                seed: None,
                rho: None,
                factor: None,
            })
        }
    }
}

/// Side-by-side ending-generation metrics with the relative reduction in
/// large-cascade probability (possibly negative).
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub baseline: EndingMetrics,
    pub mitigated: EndingMetrics,
    /// 1 - mitigated/baseline, as a percentage; zero when both are zero.
    pub reduction_pct: f64,
}

fn relative_reduction_pct(baseline: f64, mitigated: f64) -> f64 {
    if baseline == 0.0 && mitigated == 0.0 {
        0.0
    } else {
        (1.0 - mitigated / baseline) * 100.0
    }
}

/// Compares two datasets' ending-generation behavior.
pub fn evaluate(
    baseline: &CascadeDataset,
    mitigated: &CascadeDataset,
    large_threshold: usize,
) -> Result<EvaluationReport> {
    let baseline = ending_metrics(baseline, large_threshold)?;
    let mitigated = ending_metrics(mitigated, large_threshold)?;
    let reduction_pct = relative_reduction_pct(
        baseline.large_cascade_probability,
        mitigated.large_cascade_probability,
    );
    Ok(EvaluationReport {
        baseline,
        mitigated,
        reduction_pct,
    })
}

/// Probability that a cascade both visits one of the given failure states
/// and ends beyond `large_threshold`; the metric for subgraph-targeted
/// mitigation.
pub fn large_cascade_probability_via(
    dataset: &CascadeDataset,
    states: &[BTreeSet<ComponentId>],
    large_threshold: usize,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = dataset
        .cascades()
        .iter()
        .filter(|c| {
            c.ending_generation() > large_threshold
                && c.generations().iter().any(|g| states.contains(g))
        })
        .count();
    Ok(hits as f64 / dataset.len() as f64)
}

fn mean_ending_generation(metrics: &EndingMetrics) -> f64 {
    metrics
        .distribution
        .iter()
        .map(|(&g, &p)| g as f64 * p)
        .sum()
}

/// Writes `metric,baseline,mitigated,reduction_pct` rows.
pub fn write_evaluation_csv<W: Write>(
    report: &EvaluationReport,
    writer: &mut W,
) -> Result<()> {
    writeln!(writer, "metric,baseline,mitigated,reduction_pct")?;
    writeln!(
        writer,
        "large_cascade_probability,{},{},{}",
        report.baseline.large_cascade_probability,
        report.mitigated.large_cascade_probability,
        report.reduction_pct
    )?;
    let base_mean = mean_ending_generation(&report.baseline);
    let mit_mean = mean_ending_generation(&report.mitigated);
    writeln!(
        writer,
        "mean_ending_generation,{},{},{}",
        base_mean,
        mit_mean,
        relative_reduction_pct(base_mean, mit_mean)
    )?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PlanRecord {
    strategy: StrategyKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    threshold: Option<f64>,
    s_prime: usize,
    /// 1-based vertex ids, matching serialized graph reports.
    targeted_states: Vec<usize>,
    targeted_lines: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    factor: Option<f64>,
}

/// Writes the plan file: one JSON record, line ids ascending.
pub fn write_plan<W: Write>(plan: &MitigationPlan, writer: &mut W) -> Result<()> {
    let record = PlanRecord {
        strategy: plan.strategy,
        s: plan.s,
        threshold: plan.threshold,
        s_prime: plan.s_prime(),
        targeted_states: plan.targeted_states.iter().map(|v| v + 1).collect(),
        targeted_lines: plan.targeted_lines.iter().map(|c| c.0).collect(),
        seed: plan.seed,
        rho: plan.rho,
        factor: plan.factor,
    };
    serde_json::to_writer(&mut *writer, &record)?;
    writeln!(writer)?;
    Ok(())
}

/// Reads a plan file written by [`write_plan`].
pub fn read_plan<R: BufRead>(reader: R) -> Result<MitigationPlan> {
    let record: PlanRecord = serde_json::from_reader(reader)?;
    let targeted_states: BTreeSet<usize> = record
        .targeted_states
        .iter()
        .map(|&v| {
            if v == 0 {
                Err(Error::UnknownVertex(0))
            } else {
                Ok(v - 1)
            }
        })
        .collect::<Result<_>>()?;
    Ok(MitigationPlan {
        strategy: record.strategy,
        s: record.s,
        threshold: record.threshold,
        targeted_states,
        targeted_lines: record.targeted_lines.into_iter().map(ComponentId).collect(),
        seed: record.seed,
        rho: record.rho,
        factor: record.factor,
    })
}
