//! State-based stochastic interaction graph.
//!
//! Each vertex is the entire set of components failed in one generation;
//! identical generations across cascades map to one vertex. A directed edge
//! i -> j carries the empirical conditional probability that state j fails
//! immediately after state i, estimated as n_ji / sum_j n_ji over all
//! consecutive generation pairs in the dataset. A vertex with zero observed
//! successors is absorbing and gets a self-loop of weight one so that every
//! column of the interaction matrix sums to one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::cascade::{CascadeDataset, ComponentId, Generation};
use crate::error::{Error, Result};

/// A state of failure propagation: the canonical set of components failed
/// in one generation.
pub type State = Generation;

/// Weighted directed edge with its empirical transition count. Synthetic
/// absorbing self-loops carry `count == 0`; every other edge was observed
/// at least once. Graph edits (`absorb_state`, `decouple_subgraph`) change
/// weights only; counts always reflect the construction data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeData {
    pub count: u64,
    pub weight: f64,
}

/// Directed interaction graph over failure-propagation states.
///
/// Vertex indices are 0-based in this API and follow first-appearance order
/// over the dataset (cascade order, then generation order). Serialized
/// reports print ids 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    vertices: Vec<State>,
    index: HashMap<State, usize>,
    /// (source, sink) -> edge, keyed for deterministic iteration.
    edges: BTreeMap<(usize, usize), EdgeData>,
    /// Total observed successor count per source vertex.
    out_counts: Vec<u64>,
    absorbing: BTreeSet<usize>,
}

impl InteractionGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[State] {
        &self.vertices
    }

    pub fn state(&self, vertex: usize) -> &State {
        &self.vertices[vertex]
    }

    /// Looks up the vertex for a failure set, if the dataset contained it.
    pub fn vertex_of(&self, state: &State) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &EdgeData)> {
        self.edges.iter().map(|(&(i, j), e)| (i, j, e))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn self_loop_count(&self) -> usize {
        self.edges.keys().filter(|(i, j)| i == j).count()
    }

    /// Weight of edge source -> sink, zero when absent.
    pub fn weight(&self, source: usize, sink: usize) -> f64 {
        self.edges
            .get(&(source, sink))
            .map_or(0.0, |e| e.weight)
    }

    pub fn edge(&self, source: usize, sink: usize) -> Option<&EdgeData> {
        self.edges.get(&(source, sink))
    }

    pub fn absorbing(&self) -> &BTreeSet<usize> {
        &self.absorbing
    }

    pub fn is_absorbing(&self, vertex: usize) -> bool {
        self.absorbing.contains(&vertex)
    }

    /// Observed successor count of a source vertex (zero for absorbing).
    pub fn out_count(&self, vertex: usize) -> u64 {
        self.out_counts[vertex]
    }

    /// Out-edges of `source` as (sink, edge) pairs in ascending sink order.
    pub fn out_edges(&self, source: usize) -> impl Iterator<Item = (usize, &EdgeData)> {
        self.edges
            .range((source, 0)..=(source, usize::MAX))
            .map(|(&(_, j), e)| (j, e))
    }

    /// Union of the component sets of the given vertices.
    pub fn lines_of(&self, vertices: impl IntoIterator<Item = usize>) -> BTreeSet<ComponentId> {
        vertices
            .into_iter()
            .flat_map(|v| self.vertices[v].iter().copied())
            .collect()
    }

    fn check_column_sums(&self, tolerance: f64) -> Result<()> {
        let mut sums = vec![0.0f64; self.vertex_count()];
        for (&(i, _), e) in &self.edges {
            sums[i] += e.weight;
        }
        for (i, sum) in sums.into_iter().enumerate() {
            if (sum - 1.0).abs() > tolerance {
                return Err(Error::ColumnSum { column: i, sum });
            }
        }
        Ok(())
    }
}

/// Builds the state graph from a dataset.
///
/// The dataset is expected to be pre-filtered to cascades with at least two
/// generations; single-generation cascades would contribute vertices with
/// no observed successors.
pub fn build_state_graph(dataset: &CascadeDataset) -> Result<InteractionGraph> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut vertices: Vec<State> = Vec::new();
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();

    for cascade in dataset.cascades() {
        let mut previous: Option<usize> = None;
        for generation in cascade.generations() {
            let vertex = match index.get(generation) {
                Some(&v) => v,
                None => {
                    let v = vertices.len();
                    vertices.push(generation.clone());
                    index.insert(generation.clone(), v);
                    v
                }
            };
            if let Some(source) = previous {
                *counts.entry((source, vertex)).or_insert(0) += 1;
            }
            previous = Some(vertex);
        }
    }

    let mut out_counts = vec![0u64; vertices.len()];
    for (&(i, _), &n) in &counts {
        out_counts[i] += n;
    }

    let mut edges = BTreeMap::new();
    let mut absorbing = BTreeSet::new();
    for ((i, j), n) in counts {
        edges.insert(
            (i, j),
            EdgeData {
                count: n,
                weight: n as f64 / out_counts[i] as f64,
            },
        );
    }
    for (v, &total) in out_counts.iter().enumerate() {
        if total == 0 {
            absorbing.insert(v);
            edges.insert((v, v), EdgeData { count: 0, weight: 1.0 });
        }
    }

    Ok(InteractionGraph {
        vertices,
        index,
        edges,
        out_counts,
        absorbing,
    })
}

/// Dense left-stochastic interaction matrix: entry (j, i) is the weight of
/// edge i -> j, so each column sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    matrix: DMatrix<f64>,
}

impl StochasticMatrix {
    /// Wraps a dense matrix, verifying non-negativity and column sums.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        assert_eq!(matrix.nrows(), matrix.ncols(), "matrix must be square");
        for i in 0..matrix.ncols() {
            let mut sum = 0.0;
            for j in 0..matrix.nrows() {
                let w = matrix[(j, i)];
                if w < 0.0 {
                    return Err(Error::InvalidInput {
                        what: "stochastic matrix",
                        message: format!("negative entry at ({j}, {i})"),
                    });
                }
                sum += w;
            }
            if (sum - 1.0).abs() > COLUMN_SUM_TOLERANCE {
                return Err(Error::ColumnSum { column: i, sum });
            }
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Writes the matrix as CSV: first line the dimension N, then N
    /// row-major lines.
    pub fn write_csv<W: Write>(&self, writer: &mut W) -> Result<()> {
        writeln!(writer, "{}", self.dim())?;
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{:.16e}", self.matrix[(i, j)]))
                .collect();
            writeln!(writer, "{}", row.join(","))?;
        }
        Ok(())
    }
}

const COLUMN_SUM_TOLERANCE: f64 = 1e-9;

/// Assembles the left-stochastic matrix of a graph, verifying column sums.
pub fn stochastic_matrix(graph: &InteractionGraph) -> Result<StochasticMatrix> {
    graph.check_column_sums(COLUMN_SUM_TOLERANCE)?;
    let n = graph.vertex_count();
    let mut matrix = DMatrix::zeros(n, n);
    for (i, j, e) in graph.edges() {
        matrix[(j, i)] = e.weight;
    }
    Ok(StochasticMatrix { matrix })
}

/// Component-based baseline graph: vertices are individual components and
/// an edge i -> j counts how often j appears in the generation immediately
/// after one containing i, divided by i's total failure count. Columns are
/// not stochastic; the graph exists for comparison against the state-based
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentGraph {
    /// (source component, sink component) -> (pair count, weight).
    edges: BTreeMap<(ComponentId, ComponentId), (u64, f64)>,
    failure_counts: BTreeMap<ComponentId, u64>,
}

impl ComponentGraph {
    pub fn weight(&self, source: ComponentId, sink: ComponentId) -> f64 {
        self.edges.get(&(source, sink)).map_or(0.0, |&(_, w)| w)
    }

    /// Exact rational form of an edge weight: (pair count, source failure
    /// count), when the edge exists.
    pub fn rational_weight(&self, source: ComponentId, sink: ComponentId) -> Option<(u64, u64)> {
        self.edges
            .get(&(source, sink))
            .map(|&(n, _)| (n, self.failure_counts[&source]))
    }

    pub fn edges(
        &self,
    ) -> impl Iterator<Item = (ComponentId, ComponentId, u64, f64)> + '_ {
        self.edges.iter().map(|(&(i, j), &(n, w))| (i, j, n, w))
    }

    pub fn failure_count(&self, component: ComponentId) -> u64 {
        self.failure_counts.get(&component).copied().unwrap_or(0)
    }
}

/// Builds the component-based baseline graph.
pub fn build_component_graph(dataset: &CascadeDataset) -> Result<ComponentGraph> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut pair_counts: BTreeMap<(ComponentId, ComponentId), u64> = BTreeMap::new();
    let mut failure_counts: BTreeMap<ComponentId, u64> = BTreeMap::new();
    for cascade in dataset.cascades() {
        for generation in cascade.generations() {
            for &c in generation {
                *failure_counts.entry(c).or_insert(0) += 1;
            }
        }
        for pair in cascade.generations().windows(2) {
            for &source in &pair[0] {
                for &sink in &pair[1] {
                    *pair_counts.entry((source, sink)).or_insert(0) += 1;
                }
            }
        }
    }
    let edges = pair_counts
        .into_iter()
        .map(|((i, j), n)| ((i, j), (n, n as f64 / failure_counts[&i] as f64)))
        .collect();
    Ok(ComponentGraph {
        edges,
        failure_counts,
    })
}

/// Returns a graph in which `vertex` has been turned absorbing: its column
/// becomes the unit vector (self-loop of weight one), all other columns are
/// untouched.
pub fn absorb_state(graph: &InteractionGraph, vertex: usize) -> Result<InteractionGraph> {
    if vertex >= graph.vertex_count() {
        return Err(Error::UnknownVertex(vertex));
    }
    let mut out = graph.clone();
    out.edges.retain(|&(i, _), _| i != vertex);
    out.edges.insert(
        (vertex, vertex),
        EdgeData {
            count: 0,
            weight: 1.0,
        },
    );
    out.absorbing.insert(vertex);
    Ok(out)
}

/// Scales every edge from outside `subgraph` into it by (1 - rho) and
/// renormalizes each affected source column proportionally over its
/// remaining nonzero entries, so columns stay stochastic. A source whose
/// entire mass flowed into the subgraph becomes absorbing at rho = 1.
pub fn decouple_subgraph(
    graph: &InteractionGraph,
    subgraph: &BTreeSet<usize>,
    rho: f64,
) -> Result<InteractionGraph> {
    if subgraph.is_empty() {
        return Err(Error::InvalidInput {
            what: "subgraph",
            message: "empty vertex set".into(),
        });
    }
    if let Some(&v) = subgraph.iter().find(|&&v| v >= graph.vertex_count()) {
        return Err(Error::UnknownVertex(v));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput {
            what: "rho",
            message: format!("{rho} outside [0, 1]"),
        });
    }
    let mut out = graph.clone();
    for source in 0..graph.vertex_count() {
        if subgraph.contains(&source) {
            continue;
        }
        let inbound: f64 = graph
            .out_edges(source)
            .filter(|(sink, _)| subgraph.contains(sink))
            .map(|(_, e)| e.weight)
            .sum();
        if inbound == 0.0 {
            continue;
        }
        let denominator = 1.0 - rho * inbound;
        if denominator <= f64::EPSILON {
            // All mass flowed into the subgraph and rho = 1.
            out.edges.retain(|&(i, _), _| i != source);
            out.edges.insert(
                (source, source),
                EdgeData {
                    count: 0,
                    weight: 1.0,
                },
            );
            out.absorbing.insert(source);
            continue;
        }
        let sinks: Vec<usize> = graph.out_edges(source).map(|(j, _)| j).collect();
        for sink in sinks {
            let entry = out.edges.get_mut(&(source, sink)).expect("edge exists");
            if subgraph.contains(&sink) {
                entry.weight *= 1.0 - rho;
            }
            entry.weight /= denominator;
            if entry.weight == 0.0 {
                out.edges.remove(&(source, sink));
            }
        }
    }
    out.check_column_sums(1e-12)?;
    Ok(out)
}

/// Writes the graph file: a single JSON record with `vertices` (component
/// id lists in vertex order), `edges` (src/dst 1-based, count, weight with
/// 17 significant digits) and `absorbing` (1-based ids).
pub fn write_graph<W: Write>(graph: &InteractionGraph, writer: &mut W) -> Result<()> {
    let mut out = String::from("{\"vertices\":[");
    for (i, state) in graph.vertices.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let ids: Vec<String> = state.iter().map(|c| c.0.to_string()).collect();
        out.push_str(&format!("[{}]", ids.join(",")));
    }
    out.push_str("],\"edges\":[");
    for (k, (i, j, e)) in graph.edges().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&format!(
            "{{\"src\":{},\"dst\":{},\"count\":{},\"weight\":{:.16e}}}",
            i + 1,
            j + 1,
            e.count,
            e.weight
        ));
    }
    out.push_str("],\"absorbing\":[");
    for (k, v) in graph.absorbing.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&(v + 1).to_string());
    }
    out.push_str("]}");
    writeln!(writer, "{out}")?;
    Ok(())
}

#[derive(serde::Deserialize)]
struct GraphRecord {
    vertices: Vec<Vec<u32>>,
    edges: Vec<EdgeRecord>,
    absorbing: Vec<usize>,
}

#[derive(serde::Deserialize)]
struct EdgeRecord {
    src: usize,
    dst: usize,
    count: u64,
    weight: f64,
}

/// Reads a graph file written by [`write_graph`].
pub fn read_graph<R: BufRead>(reader: R) -> Result<InteractionGraph> {
    let record: GraphRecord = serde_json::from_reader(reader)?;
    let vertices: Vec<State> = record
        .vertices
        .iter()
        .map(|ids| ids.iter().copied().map(ComponentId).collect())
        .collect();
    let index = vertices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let mut edges = BTreeMap::new();
    let mut out_counts = vec![0u64; vertices.len()];
    for e in record.edges {
        if e.src == 0 || e.src > vertices.len() || e.dst == 0 || e.dst > vertices.len() {
            return Err(Error::UnknownVertex(e.src.max(e.dst)));
        }
        edges.insert(
            (e.src - 1, e.dst - 1),
            EdgeData {
                count: e.count,
                weight: e.weight,
            },
        );
        out_counts[e.src - 1] += e.count;
    }
    let absorbing = record
        .absorbing
        .into_iter()
        .map(|v| {
            if v == 0 || v > vertices.len() {
                Err(Error::UnknownVertex(v))
            } else {
                Ok(v - 1)
            }
        })
        .collect::<Result<BTreeSet<usize>>>()?;
    let graph = InteractionGraph {
        vertices,
        index,
        edges,
        out_counts,
        absorbing,
    };
    graph.check_column_sums(COLUMN_SUM_TOLERANCE)?;
    Ok(graph)
}
