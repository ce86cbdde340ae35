//! Eigen-analysis of the stochastic interaction matrix.
//!
//! Modes (eigenvalue/eigenvector pairs) fall into three families by
//! eigenvalue modulus: persistent modes sit at one (absorbing states,
//! probability never decays), trivial modes at zero (propagation dies after
//! a single generation), transient modes strictly between (probability
//! decays geometrically). Transient modes subdivide by eigenvalue angle:
//! positive real, negative real (a 2-cycle of states whose order varies
//! across the dataset), and conjugate complex pairs whose angle measures
//! how many generations a propagation pattern takes to return to its
//! original phasing. Anything with modulus near one that is not pinned to
//! an absorbing state is surfaced as a boundary mode rather than an error:
//! finite, no-recovery cascade data should not produce such modes, but
//! small or dirty datasets can.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::cascade::{filter_multi_generation, CascadeDataset};
use crate::error::{Error, Result};
use crate::evd::{eigendecompose, normalize_mode, null_space_basis, EigenPair};
use crate::graph::{build_state_graph, stochastic_matrix, InteractionGraph, StochasticMatrix};

pub use crate::evd::RESIDUAL_BOUND;

/// Classification tolerances: an eigenvalue within `unity` of 1 belongs to
/// the unity class, within `zero` of 0 to the zero class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub unity: f64,
    pub zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unity: 1e-8,
            zero: 1e-8,
        }
    }
}

/// Default participation threshold for "highly participating" vertices.
pub const DEFAULT_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModeKind {
    /// (1, e_k) at absorbing vertex k.
    Persistent { vertex: usize },
    /// Null-space direction: contribution vanishes after one generation.
    Trivial,
    TransientPositive,
    TransientNegative,
    /// One member of a conjugate pair; `partner` indexes the other mode and
    /// the representative carries the angle in (0, pi).
    TransientComplex { partner: usize, representative: bool },
    /// Modulus near one without an absorbing vertex backing it.
    Boundary,
}

impl ModeKind {
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            ModeKind::TransientPositive
                | ModeKind::TransientNegative
                | ModeKind::TransientComplex { .. }
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModeKind::Persistent { .. } => "persistent",
            ModeKind::Trivial => "trivial",
            ModeKind::TransientPositive => "transient_positive",
            ModeKind::TransientNegative => "transient_negative",
            ModeKind::TransientComplex { .. } => "transient_complex",
            ModeKind::Boundary => "boundary",
        }
    }
}

/// A failure-propagation mode: eigenvalue plus canonically normalized
/// eigenvector (infinity norm one, largest entry rotated to +1).
#[derive(Debug, Clone)]
pub struct Mode {
    pub eigenvalue: Complex64,
    pub vector: DVector<Complex64>,
    pub kind: ModeKind,
}

impl Mode {
    pub fn modulus(&self) -> f64 {
        self.eigenvalue.norm()
    }

    pub fn angle(&self) -> f64 {
        self.eigenvalue.arg()
    }
}

/// Eigenvalue class tallies; the four classes partition the spectrum, so
/// they always sum to the matrix dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub unity: usize,
    /// Algebraic multiplicity of the zero eigenvalue.
    pub zero: usize,
    pub transient: usize,
    pub boundary: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModeCounts {
    pub persistent: usize,
    pub trivial: usize,
    pub transient_positive: usize,
    pub transient_negative: usize,
    pub transient_complex: usize,
    pub boundary: usize,
}

impl ModeCounts {
    pub fn transient(&self) -> usize {
        self.transient_positive + self.transient_negative + self.transient_complex
    }
}

/// Result of classifying the spectrum of an interaction matrix.
#[derive(Debug, Clone)]
pub struct SpectralAnalysis {
    pub modes: Vec<Mode>,
    /// Full spectrum sorted by descending modulus, ties by descending angle.
    pub eigenvalues: Vec<Complex64>,
    pub class_counts: ClassCounts,
    pub mode_counts: ModeCounts,
    pub tolerances: Tolerances,
    /// True when the assembled mode basis reconstructs the matrix.
    pub diagonalizable: bool,
    pub reconstruction_residual: Option<f64>,
    basis: Option<DMatrix<Complex64>>,
    pub warnings: Vec<String>,
}

impl SpectralAnalysis {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn modes_of_kind<'a>(
        &'a self,
        predicate: impl Fn(&ModeKind) -> bool + 'a,
    ) -> impl Iterator<Item = (usize, &'a Mode)> {
        self.modes
            .iter()
            .enumerate()
            .filter(move |(_, m)| predicate(&m.kind))
    }

    /// Transient mode with the largest positive real eigenvalue.
    pub fn top_transient_positive(&self) -> Option<&Mode> {
        self.modes
            .iter()
            .filter(|m| m.kind == ModeKind::TransientPositive)
            .max_by(|a, b| a.eigenvalue.re.total_cmp(&b.eigenvalue.re))
    }

    /// Transient mode with the most negative eigenvalue (largest modulus).
    pub fn top_transient_negative(&self) -> Option<&Mode> {
        self.modes
            .iter()
            .filter(|m| m.kind == ModeKind::TransientNegative)
            .min_by(|a, b| a.eigenvalue.re.total_cmp(&b.eigenvalue.re))
    }

    /// Representatives of conjugate pairs, descending modulus.
    pub fn transient_complex_representatives(&self) -> Vec<&Mode> {
        let mut reps: Vec<&Mode> = self
            .modes
            .iter()
            .filter(|m| {
                matches!(
                    m.kind,
                    ModeKind::TransientComplex {
                        representative: true,
                        ..
                    }
                )
            })
            .collect();
        reps.sort_by(|a, b| b.modulus().total_cmp(&a.modulus()));
        reps
    }

    pub fn basis(&self) -> Option<&DMatrix<Complex64>> {
        self.basis.as_ref()
    }
}

fn column_is_unit(w: &DMatrix<f64>, k: usize) -> bool {
    for j in 0..w.nrows() {
        let expected = if j == k { 1.0 } else { 0.0 };
        if w[(j, k)] != expected {
            return false;
        }
    }
    true
}

/// Classifies the full spectrum of `w` against the graph it was built from.
///
/// Persistent modes are constructed directly as (1, e_k) for each absorbing
/// vertex k and verified exactly. Trivial modes come from a rank-revealing
/// null-space basis rather than from the (possibly defective) zero block of
/// the numeric solve. Transient modes take their eigenpairs from the solver.
pub fn classify_modes(
    w: &StochasticMatrix,
    graph: &InteractionGraph,
    tolerances: Tolerances,
) -> Result<SpectralAnalysis> {
    if w.dim() != graph.vertex_count() {
        return Err(Error::InvalidInput {
            what: "spectral analysis",
            message: format!(
                "matrix dimension {} does not match vertex count {}",
                w.dim(),
                graph.vertex_count()
            ),
        });
    }
    let n = w.dim();
    let matrix = w.as_matrix();
    let mut warnings = Vec::new();

    let spectrum = eigendecompose(w)?;
    let eigenvalues: Vec<Complex64> = spectrum.eigenvalues().collect();

    // Partition eigenvalues into the four classes.
    let mut class_counts = ClassCounts {
        unity: 0,
        zero: 0,
        transient: 0,
        boundary: 0,
    };
    let mut unity_pairs: Vec<&EigenPair> = Vec::new();
    let mut boundary_pairs: Vec<&EigenPair> = Vec::new();
    let mut transient_pairs: Vec<&EigenPair> = Vec::new();
    for pair in &spectrum.pairs {
        let modulus = pair.value.norm();
        if (pair.value - Complex64::new(1.0, 0.0)).norm() <= tolerances.unity {
            class_counts.unity += 1;
            unity_pairs.push(pair);
        } else if modulus <= tolerances.zero {
            class_counts.zero += 1;
        } else if modulus >= 1.0 - tolerances.unity {
            class_counts.boundary += 1;
            boundary_pairs.push(pair);
        } else {
            class_counts.transient += 1;
            transient_pairs.push(pair);
        }
    }

    let mut modes: Vec<Mode> = Vec::with_capacity(n);

    // Persistent modes: exactly one per absorbing vertex, verified in exact
    // arithmetic (the column is e_k by construction).
    for &k in graph.absorbing() {
        if !column_is_unit(matrix, k) {
            return Err(Error::InvalidInput {
                what: "spectral analysis",
                message: format!("column {k} of an absorbing vertex is not a unit vector"),
            });
        }
        let mut v = DVector::from_element(n, Complex64::new(0.0, 0.0));
        v[k] = Complex64::new(1.0, 0.0);
        modes.push(Mode {
            eigenvalue: Complex64::new(1.0, 0.0),
            vector: v,
            kind: ModeKind::Persistent { vertex: k },
        });
    }
    let absorbing_count = graph.absorbing().len();
    if class_counts.unity < absorbing_count {
        warnings.push(format!(
            "spectrum shows {} unity eigenvalues for {} absorbing vertices",
            class_counts.unity, absorbing_count
        ));
    }

    // Unity eigenvalues beyond the absorbing count have no absorbing vertex
    // to back them: surface them as boundary modes.
    let mut boundary_sources: Vec<&EigenPair> = Vec::new();
    if class_counts.unity > absorbing_count {
        let extra = class_counts.unity - absorbing_count;
        warnings.push(format!(
            "{extra} unity eigenvalue(s) without an absorbing vertex; a closed \
             recurrent class violates the finite-cascade assumption"
        ));
        boundary_sources.extend(unity_pairs.iter().rev().take(extra).copied());
    }
    boundary_sources.extend(boundary_pairs.iter().copied());
    for pair in boundary_sources {
        warnings.push(format!(
            "boundary mode at lambda = {:.6}{:+.6}i (modulus {:.6})",
            pair.value.re,
            pair.value.im,
            pair.value.norm()
        ));
        match &pair.vector {
            Some(v) => modes.push(Mode {
                eigenvalue: pair.value,
                vector: v.clone(),
                kind: ModeKind::Boundary,
            }),
            None => warnings.push(format!(
                "no eigenvector available for boundary eigenvalue {:.6}{:+.6}i",
                pair.value.re, pair.value.im
            )),
        }
    }

    // Transient modes from the numeric eigenpairs, conjugates adjacent with
    // the representative (positive angle) first.
    let mut pending_partner: Option<usize> = None;
    for pair in transient_pairs {
        let Some(vector) = pair.vector.clone() else {
            warnings.push(format!(
                "no eigenvector available for transient eigenvalue {:.6}{:+.6}i",
                pair.value.re, pair.value.im
            ));
            pending_partner = None;
            continue;
        };
        let kind = if pair.value.im == 0.0 {
            if pair.value.re > 0.0 {
                ModeKind::TransientPositive
            } else {
                ModeKind::TransientNegative
            }
        } else {
            ModeKind::TransientComplex {
                partner: usize::MAX,
                representative: pair.value.im > 0.0,
            }
        };
        let index = modes.len();
        modes.push(Mode {
            eigenvalue: pair.value,
            vector,
            kind,
        });
        if matches!(modes[index].kind, ModeKind::TransientComplex { .. }) {
            match pending_partner.take() {
                Some(prev) => {
                    let paired = (modes[prev].eigenvalue - modes[index].eigenvalue.conj())
                        .norm()
                        <= 1e-12;
                    if paired {
                        link_partners(&mut modes, prev, index);
                    } else {
                        pending_partner = Some(index);
                    }
                }
                None => pending_partner = Some(index),
            }
        } else {
            pending_partner = None;
        }
    }
    if let Some(unpaired) = pending_partner {
        warnings.push(format!(
            "complex eigenvalue {:.6}{:+.6}i has no conjugate partner mode",
            modes[unpaired].eigenvalue.re, modes[unpaired].eigenvalue.im
        ));
    }

    // Trivial modes: orthonormal null-space directions, canonicalized.
    for direction in null_space_basis(matrix, tolerances.zero) {
        let complex = DVector::from_fn(n, |i, _| Complex64::new(direction[i], 0.0));
        let vector = normalize_mode(&complex)?;
        let annihilation = (matrix * DVector::from_fn(n, |i, _| vector[i].re)).amax();
        if annihilation > RESIDUAL_BOUND {
            warnings.push(format!(
                "null-space direction rejected: |Wv| = {annihilation:e}"
            ));
            continue;
        }
        modes.push(Mode {
            eigenvalue: Complex64::new(0.0, 0.0),
            vector,
            kind: ModeKind::Trivial,
        });
    }

    let mut mode_counts = ModeCounts::default();
    for mode in &modes {
        match mode.kind {
            ModeKind::Persistent { .. } => mode_counts.persistent += 1,
            ModeKind::Trivial => mode_counts.trivial += 1,
            ModeKind::TransientPositive => mode_counts.transient_positive += 1,
            ModeKind::TransientNegative => mode_counts.transient_negative += 1,
            ModeKind::TransientComplex { .. } => mode_counts.transient_complex += 1,
            ModeKind::Boundary => mode_counts.boundary += 1,
        }
    }

    // Diagonalizability: the mode vectors must form a basis that
    // reconstructs the matrix.
    let mut diagonalizable = false;
    let mut reconstruction_residual = None;
    let mut basis = None;
    if modes.len() == n {
        let v = DMatrix::from_fn(n, n, |i, j| modes[j].vector[i]);
        if let Some(v_inv) = v.clone().lu().try_inverse() {
            let mut reconstructed = v.clone();
            for j in 0..n {
                let lambda = modes[j].eigenvalue;
                for i in 0..n {
                    reconstructed[(i, j)] *= lambda;
                }
            }
            let reconstructed = reconstructed * v_inv;
            let mut residual = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let diff = reconstructed[(i, j)] - Complex64::new(matrix[(i, j)], 0.0);
                    residual = residual.max(diff.norm());
                }
            }
            reconstruction_residual = Some(residual);
            if residual <= RESIDUAL_BOUND {
                diagonalizable = true;
                basis = Some(v);
            }
        }
    }

    Ok(SpectralAnalysis {
        modes,
        eigenvalues,
        class_counts,
        mode_counts,
        tolerances,
        diagonalizable,
        reconstruction_residual,
        basis,
        warnings,
    })
}

fn link_partners(modes: &mut [Mode], a: usize, b: usize) {
    if let ModeKind::TransientComplex { partner, .. } = &mut modes[a].kind {
        *partner = b;
    }
    if let ModeKind::TransientComplex { partner, .. } = &mut modes[b].kind {
        *partner = a;
    }
}

/// Failure-probability distribution over vertices at one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    values: DVector<f64>,
    pub generation: usize,
}

impl ProbabilityVector {
    pub fn new(values: DVector<f64>, generation: usize) -> Result<Self> {
        if values.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidInput {
                what: "probability vector",
                message: "negative entry".into(),
            });
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized {
                context: "probability vector".into(),
                sum,
            });
        }
        Ok(Self { values, generation })
    }

    /// Unit mass on one vertex.
    pub fn unit(dim: usize, vertex: usize, generation: usize) -> Self {
        let mut values = DVector::zeros(dim);
        values[vertex] = 1.0;
        Self { values, generation }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }
}

/// Exact repeated matrix-vector product p -> W^K p.
///
/// The product is written out explicitly so that propagation from a unit
/// vector at an absorbing vertex reproduces that unit vector in exact
/// arithmetic: every term is either multiplied by 0.0 or by 1.0.
pub fn propagate(w: &StochasticMatrix, p0: &ProbabilityVector, k: usize) -> ProbabilityVector {
    let n = w.dim();
    assert_eq!(p0.values.len(), n, "dimension mismatch");
    let m = w.as_matrix();
    let mut current = p0.values.clone();
    for _ in 0..k {
        let mut next = DVector::zeros(n);
        for j in 0..n {
            let pj = current[j];
            if pj == 0.0 {
                continue;
            }
            for i in 0..n {
                next[i] += m[(i, j)] * pj;
            }
        }
        current = next;
    }
    ProbabilityVector {
        values: current,
        generation: p0.generation + k,
    }
}

/// Coordinates of `p0` in the eigenbasis: solves V c = p0.
pub fn modal_coordinates(
    analysis: &SpectralAnalysis,
    p0: &ProbabilityVector,
) -> Result<DVector<Complex64>> {
    if !analysis.diagonalizable {
        return Err(Error::ModalExpansionUnavailable);
    }
    let v = analysis.basis.as_ref().ok_or(Error::ModalExpansionUnavailable)?;
    let rhs = DVector::from_fn(v.nrows(), |i, _| Complex64::new(p0.values()[i], 0.0));
    let c = v
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::ModalExpansionUnavailable)?;
    let residual = (v * &c - &rhs)
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    if residual > 1e-9 {
        return Err(Error::ModalExpansionUnavailable);
    }
    Ok(c)
}

/// Joint influence of a conjugate mode pair at generation `k`:
/// entrywise 2 |c| |lambda|^K |v_n| cos(K angle(lambda) + angle(v_n) + angle(c)).
///
/// `mode` must be the pair representative (angle strictly inside (0, pi));
/// the conjugate's contribution is folded in analytically, which is why the
/// result is real.
pub fn pair_influence(mode: &Mode, coordinate: Complex64, k: usize) -> Result<Vec<f64>> {
    if mode.eigenvalue.im <= 0.0 {
        return Err(Error::NotConjugatePair {
            re: mode.eigenvalue.re,
            im: mode.eigenvalue.im,
        });
    }
    let modulus = mode.eigenvalue.norm();
    let angle = mode.eigenvalue.arg();
    let c_norm = coordinate.norm();
    let c_angle = coordinate.arg();
    let decay = modulus.powi(k as i32);
    Ok(mode
        .vector
        .iter()
        .map(|v| {
            let theta = k as f64 * angle + v.arg() + c_angle;
            2.0 * c_norm * decay * v.norm() * theta.cos()
        })
        .collect())
}

/// One participating vertex: modulus and angle of its eigenvector entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Participation {
    pub vertex: usize,
    pub modulus: f64,
    pub angle: f64,
}

/// Vertices with |v_j| >= epsilon, sorted by descending modulus, ties by
/// ascending vertex id.
pub fn participation(mode: &Mode, epsilon: f64) -> Result<Vec<Participation>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidInput {
            what: "epsilon",
            message: format!("{epsilon} outside (0, 1]"),
        });
    }
    let mut entries: Vec<Participation> = mode
        .vector
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() >= epsilon)
        .map(|(vertex, v)| Participation {
            vertex,
            modulus: v.norm(),
            angle: v.arg(),
        })
        .collect();
    entries.sort_by(|a, b| {
        b.modulus
            .total_cmp(&a.modulus)
            .then(a.vertex.cmp(&b.vertex))
    });
    Ok(entries)
}

/// Default modulus below which a vertex counts as rapidly decaying in a
/// transient mode, applied to the normalized eigenvector.
pub const DEFAULT_DECAY_THRESHOLD: f64 = 1e-12;

/// Splits vertices into rapidly decaying (eigenvector modulus below the
/// absolute threshold: the mode holds no probability there, so failures
/// passing through them die out quickly) and slowly decaying (the rest).
pub fn decay_partition(mode: &Mode, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    let mut rapid = Vec::new();
    let mut slow = Vec::new();
    for (vertex, entry) in mode.vector.iter().enumerate() {
        if entry.norm() < threshold {
            rapid.push(vertex);
        } else {
            slow.push(vertex);
        }
    }
    (rapid, slow)
}

/// Induced subgraph of a transient mode's participating vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSubgraph {
    pub vertices: Vec<usize>,
    /// (source, sink, weight) over participating vertices only.
    pub edges: Vec<(usize, usize, f64)>,
    /// round(2 pi / angle) for complex modes, 2 for negative modes, absent
    /// for positive modes.
    pub estimated_cycle_length: Option<u32>,
}

pub fn mode_subgraph(
    graph: &InteractionGraph,
    mode: &Mode,
    epsilon: f64,
) -> Result<ModeSubgraph> {
    if !mode.kind.is_transient() {
        return Err(Error::InvalidInput {
            what: "mode subgraph",
            message: format!("{} mode is not transient", mode.kind.label()),
        });
    }
    let members = participation(mode, epsilon)?;
    let vertices: Vec<usize> = members.iter().map(|p| p.vertex).collect();
    let vertex_set: BTreeSet<usize> = vertices.iter().copied().collect();
    let edges = graph
        .edges()
        .filter(|(i, j, _)| vertex_set.contains(i) && vertex_set.contains(j))
        .map(|(i, j, e)| (i, j, e.weight))
        .collect();
    let estimated_cycle_length = match mode.kind {
        ModeKind::TransientNegative => Some(2),
        ModeKind::TransientComplex { .. } => {
            let angle = mode.eigenvalue.arg().abs();
            Some((2.0 * std::f64::consts::PI / angle).round() as u32)
        }
        _ => None,
    };
    Ok(ModeSubgraph {
        vertices,
        edges,
        estimated_cycle_length,
    })
}

/// Top transient eigenvalues of one dataset in a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    /// Cascade count of the input dataset (before filtering).
    pub size: usize,
    pub top_positive: Option<Complex64>,
    pub top_negative: Option<Complex64>,
    /// Representatives of the largest conjugate pairs, descending modulus.
    pub top_complex: Vec<Complex64>,
}

/// Builds the graph of each dataset (filtered to multi-generation cascades)
/// and reports its top transient eigenvalues: largest positive, most
/// negative, and the `complex_pairs` largest conjugate-pair representatives.
pub fn convergence_study(
    datasets: &[CascadeDataset],
    complex_pairs: usize,
    tolerances: Tolerances,
) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::with_capacity(datasets.len());
    for dataset in datasets {
        let size = dataset.len();
        let filtered = filter_multi_generation(dataset);
        if filtered.is_empty() {
            rows.push(ConvergenceRow {
                size,
                top_positive: None,
                top_negative: None,
                top_complex: Vec::new(),
            });
            continue;
        }
        let graph = build_state_graph(&filtered)?;
        let w = stochastic_matrix(&graph)?;
        let analysis = classify_modes(&w, &graph, tolerances)?;
        rows.push(ConvergenceRow {
            size,
            top_positive: analysis.top_transient_positive().map(|m| m.eigenvalue),
            top_negative: analysis.top_transient_negative().map(|m| m.eigenvalue),
            top_complex: analysis
                .transient_complex_representatives()
                .into_iter()
                .take(complex_pairs)
                .map(|m| m.eigenvalue)
                .collect(),
        });
    }
    Ok(rows)
}

/// Writes convergence rows as `size,kind,re,im,modulus,angle_deg`, one row
/// per reported eigenvalue.
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], writer: &mut W) -> Result<()> {
    writeln!(writer, "size,kind,re,im,modulus,angle_deg")?;
    let mut emit = |size: usize, kind: String, value: Complex64| -> Result<()> {
        writeln!(
            writer,
            "{size},{kind},{},{},{},{}",
            value.re,
            value.im,
            value.norm(),
            value.arg().to_degrees()
        )?;
        Ok(())
    };
    for row in rows {
        if let Some(l) = row.top_positive {
            emit(row.size, "top_positive".into(), l)?;
        }
        if let Some(l) = row.top_negative {
            emit(row.size, "top_negative".into(), l)?;
        }
        for (i, &l) in row.top_complex.iter().enumerate() {
            emit(row.size, format!("complex_pair_{}", i + 1), l)?;
        }
    }
    Ok(())
}

/// Writes the modes report CSV. `epsilon` selects the vertices listed in
/// `top_vertices` (1-based ids, `id:modulus:angle_deg`).
pub fn write_modes_csv<W: Write>(
    analysis: &SpectralAnalysis,
    epsilon: f64,
    writer: &mut W,
) -> Result<()> {
    writeln!(
        writer,
        "mode_index,kind,re_lambda,im_lambda,modulus,angle_deg,top_vertices"
    )?;
    for (index, mode) in analysis.modes.iter().enumerate() {
        let top = participation(mode, epsilon)?
            .iter()
            .map(|p| {
                format!(
                    "{}:{}:{}",
                    p.vertex + 1,
                    p.modulus,
                    p.angle.to_degrees()
                )
            })
            .collect::<Vec<_>>()
            .join(";");
        writeln!(
            writer,
            "{index},{},{},{},{},{},{top}",
            mode.kind.label(),
            mode.eigenvalue.re,
            mode.eigenvalue.im,
            mode.modulus(),
            mode.angle().to_degrees()
        )?;
    }
    Ok(())
}

/// Writes the full eigenvector dump: one (re, im) column pair per mode,
/// one row per vertex, column order matching the modes report.
pub fn write_eigenvectors_csv<W: Write>(
    analysis: &SpectralAnalysis,
    writer: &mut W,
) -> Result<()> {
    let header: Vec<String> = (0..analysis.modes.len())
        .flat_map(|i| [format!("mode_{i}_re"), format!("mode_{i}_im")])
        .collect();
    writeln!(writer, "{}", header.join(","))?;
    let n = analysis.modes.first().map_or(0, |m| m.vector.len());
    for row in 0..n {
        let cells: Vec<String> = analysis
            .modes
            .iter()
            .flat_map(|m| [m.vector[row].re.to_string(), m.vector[row].im.to_string()])
            .collect();
        writeln!(writer, "{}", cells.join(","))?;
    }
    Ok(())
}
