//! Cascade datasets organized in generations.
//!
//! A cascade is an ordered sequence of failure generations; generation 0
//! holds the initial failures. Identical failure sets across cascades are
//! later merged into one state by the interaction graph, so generations are
//! kept as canonical sorted sets here.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a physical component (e.g. a transmission line).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ComponentId(pub u32);

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One generation: the set of components that failed concurrently.
pub type Generation = BTreeSet<ComponentId>;

/// An ordered sequence of non-empty failure generations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cascade {
    pub id: u64,
    generations: Vec<Generation>,
}

impl Cascade {
    /// Builds a cascade, rejecting empty generations (an empty generation
    /// terminates a cascade and is never stored).
    pub fn new(id: u64, generations: Vec<Generation>) -> Result<Self> {
        if generations.is_empty() {
            return Err(Error::InvalidInput {
                what: "cascade",
                message: format!("cascade {id} has no generations"),
            });
        }
        if let Some(g) = generations.iter().position(BTreeSet::is_empty) {
            return Err(Error::InvalidInput {
                what: "cascade",
                message: format!("cascade {id}: generation {g} is empty"),
            });
        }
        Ok(Self { id, generations })
    }

    pub fn generations(&self) -> &[Generation] {
        &self.generations
    }

    /// Index of the last non-empty generation (0-based).
    pub fn ending_generation(&self) -> usize {
        self.generations.len() - 1
    }

    /// Component ids that appear in more than one generation of this
    /// cascade, i.e. violations of the no-recovery assumption.
    pub fn repeated_components(&self) -> Vec<ComponentId> {
        let mut seen: BTreeSet<ComponentId> = BTreeSet::new();
        let mut repeats = BTreeSet::new();
        for generation in &self.generations {
            for &c in generation {
                if !seen.insert(c) {
                    repeats.insert(c);
                }
            }
        }
        repeats.into_iter().collect()
    }
}

/// An ordered collection of cascades plus the set of all component ids
/// appearing anywhere in it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CascadeDataset {
    cascades: Vec<Cascade>,
    component_universe: BTreeSet<ComponentId>,
}

impl CascadeDataset {
    /// Builds a dataset, rejecting duplicate cascade ids.
    pub fn new(cascades: Vec<Cascade>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for cascade in &cascades {
            if !ids.insert(cascade.id) {
                return Err(Error::InvalidInput {
                    what: "dataset",
                    message: format!("repeated cascade_id {}", cascade.id),
                });
            }
        }
        let component_universe = cascades
            .iter()
            .flat_map(|c| c.generations.iter())
            .flatten()
            .copied()
            .collect();
        Ok(Self {
            cascades,
            component_universe,
        })
    }

    pub fn cascades(&self) -> &[Cascade] {
        &self.cascades
    }

    pub fn component_universe(&self) -> &BTreeSet<ComponentId> {
        &self.component_universe
    }

    pub fn len(&self) -> usize {
        self.cascades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cascades.is_empty()
    }

    /// Cascades from the first `n` sampled/stored entries, as its own dataset.
    pub fn prefix(&self, n: usize) -> Self {
        let cascades: Vec<Cascade> = self.cascades.iter().take(n).cloned().collect();
        Self::new(cascades).expect("prefix of a valid dataset is valid")
    }
}

/// Warning emitted while ingesting a cascade file; the offending cascade is
/// kept (real utility data may violate the no-recovery assumption).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub cascade_id: u64,
    pub component: ComponentId,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}: cascade {}: component {} appears in more than one generation",
            self.line, self.cascade_id, self.component
        )
    }
}

/// Result of parsing a cascade file.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub dataset: CascadeDataset,
    pub warnings: Vec<ParseWarning>,
}

/// Optional sidecar dictionary mapping string component labels to ids.
pub type LabelMap = BTreeMap<String, u32>;

/// Reads a label dictionary file: a single JSON object `{"label": id, ...}`.
pub fn read_label_map<R: BufRead>(reader: R) -> Result<LabelMap> {
    Ok(serde_json::from_reader(reader)?)
}

#[derive(Deserialize)]
struct CascadeRecord {
    cascade_id: u64,
    generations: Vec<Vec<ComponentEntry>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ComponentEntry {
    Id(u32),
    Label(String),
}

/// Parses line-delimited cascade records:
/// `{"cascade_id": <int>, "generations": [[<int>,...],...]}`.
///
/// Duplicate ids within one generation are deduplicated. A component
/// repeated across generations of one cascade yields a warning but the
/// cascade is kept. String component labels are resolved through `labels`
/// and rejected when no dictionary is supplied.
pub fn parse_cascades<R: BufRead>(reader: R, labels: Option<&LabelMap>) -> Result<Parsed> {
    let mut cascades = Vec::new();
    let mut warnings = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CascadeRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        if !seen_ids.insert(record.cascade_id) {
            return Err(Error::Validation {
                line: line_no,
                message: format!("repeated cascade_id {}", record.cascade_id),
            });
        }
        if record.generations.is_empty() {
            return Err(Error::Validation {
                line: line_no,
                message: format!("cascade {} has no generations", record.cascade_id),
            });
        }
        let mut generations = Vec::with_capacity(record.generations.len());
        for (g, entries) in record.generations.iter().enumerate() {
            if entries.is_empty() {
                return Err(Error::Validation {
                    line: line_no,
                    message: format!(
                        "cascade {}: generation {g} is empty",
                        record.cascade_id
                    ),
                });
            }
            let mut generation = Generation::new();
            for entry in entries {
                let id = match entry {
                    ComponentEntry::Id(id) => *id,
                    ComponentEntry::Label(label) => match labels {
                        Some(map) => *map.get(label).ok_or_else(|| Error::Validation {
                            line: line_no,
                            message: format!("unknown component label {label:?}"),
                        })?,
                        None => {
                            return Err(Error::Validation {
                                line: line_no,
                                message: format!(
                                    "string label {label:?} but no dictionary supplied"
                                ),
                            })
                        }
                    },
                };
                generation.insert(ComponentId(id));
            }
            generations.push(generation);
        }
        let cascade = Cascade::new(record.cascade_id, generations)?;
        for component in cascade.repeated_components() {
            warnings.push(ParseWarning {
                line: line_no,
                cascade_id: cascade.id,
                component,
            });
        }
        cascades.push(cascade);
    }
    Ok(Parsed {
        dataset: CascadeDataset::new(cascades)?,
        warnings,
    })
}

/// Writes the dataset in the line-delimited record format, one cascade per
/// line, component ids ascending within each generation.
pub fn write_cascades<W: Write>(dataset: &CascadeDataset, writer: &mut W) -> Result<()> {
    for cascade in dataset.cascades() {
        let generations: Vec<Vec<u32>> = cascade
            .generations()
            .iter()
            .map(|g| g.iter().map(|c| c.0).collect())
            .collect();
        let record = serde_json::json!({
            "cascade_id": cascade.id,
            "generations": generations,
        });
        writeln!(writer, "{record}")?;
    }
    Ok(())
}

/// Keeps exactly the cascades with at least two generations, preserving
/// order. Cascades stopped at generation 0 carry no interaction information.
pub fn filter_multi_generation(dataset: &CascadeDataset) -> CascadeDataset {
    let cascades: Vec<Cascade> = dataset
        .cascades()
        .iter()
        .filter(|c| c.generations().len() >= 2)
        .cloned()
        .collect();
    CascadeDataset::new(cascades).expect("filtering preserves validity")
}

/// Descriptive statistics over a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetStats {
    /// Number of cascades M.
    pub cascade_count: usize,
    /// Ending-generation index -> number of cascades ending there.
    pub ending_generation_histogram: BTreeMap<usize, u64>,
    /// Component id -> number of (cascade, generation) pairs containing it.
    pub component_failure_frequency: BTreeMap<ComponentId, u64>,
}

pub fn dataset_stats(dataset: &CascadeDataset) -> DatasetStats {
    let mut histogram = BTreeMap::new();
    let mut frequency = BTreeMap::new();
    for cascade in dataset.cascades() {
        *histogram.entry(cascade.ending_generation()).or_insert(0) += 1;
        for generation in cascade.generations() {
            for &component in generation {
                *frequency.entry(component).or_insert(0) += 1;
            }
        }
    }
    DatasetStats {
        cascade_count: dataset.len(),
        ending_generation_histogram: histogram,
        component_failure_frequency: frequency,
    }
}

/// Ending-generation distribution and the probability of a large cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct EndingMetrics {
    /// Ending-generation index -> fraction of cascades ending there.
    pub distribution: BTreeMap<usize, f64>,
    /// P(ending generation > large_threshold).
    pub large_cascade_probability: f64,
    pub large_threshold: usize,
}

/// Distribution of the ending generation and P(ending > `large_threshold`).
/// The default threshold of 3 makes "large" mean propagation beyond
/// generation 3.
pub fn ending_metrics(dataset: &CascadeDataset, large_threshold: usize) -> Result<EndingMetrics> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = dataset.len() as f64;
    let stats = dataset_stats(dataset);
    let mut distribution = BTreeMap::new();
    let mut large = 0u64;
    for (&g, &count) in &stats.ending_generation_histogram {
        distribution.insert(g, count as f64 / m);
        if g > large_threshold {
            large += count;
        }
    }
    Ok(EndingMetrics {
        distribution,
        large_cascade_probability: large as f64 / m,
        large_threshold,
    })
}

pub const DEFAULT_LARGE_THRESHOLD: usize = 3;

/// Writes `ending_generation,count,probability` rows, ascending generation.
pub fn write_ending_csv<W: Write>(
    stats: &DatasetStats,
    writer: &mut W,
) -> Result<()> {
    writeln!(writer, "ending_generation,count,probability")?;
    let m = stats.cascade_count as f64;
    for (&g, &count) in &stats.ending_generation_histogram {
        writeln!(writer, "{g},{count},{}", count as f64 / m)?;
    }
    Ok(())
}

/// Writes `component_id,failure_count` rows, ascending component id.
pub fn write_frequency_csv<W: Write>(stats: &DatasetStats, writer: &mut W) -> Result<()> {
    writeln!(writer, "component_id,failure_count")?;
    for (&component, &count) in &stats.component_failure_frequency {
        writeln!(writer, "{component},{count}")?;
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Parsed> {
        parse_cascades(text.as_bytes(), None)
    }

    #[test]
    fn parses_single_record() {
        let parsed = parse(r#"{"cascade_id":0,"generations":[[3],[4],[2,3]]}"#).unwrap();
        let ds = parsed.dataset;
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.cascades()[0].generations().len(), 3);
        assert_eq!(ds.component_universe(), &gen(&[2, 3, 4]));
    }

    #[test]
    fn empty_input_yields_empty_dataset() {
        let parsed = parse("").unwrap();
        assert!(parsed.dataset.is_empty());
        assert!(parsed.dataset.component_universe().is_empty());
    }

    #[test]
    fn rejects_empty_generation() {
        let err = parse(r#"{"cascade_id":0,"generations":[[1],[]]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation { line: 1, .. }), "{err}");
    }

    #[test]
    fn rejects_empty_generation_list() {
        let err = parse(r#"{"cascade_id":0,"generations":[]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation { line: 1, .. }));
    }

    #[test]
    fn rejects_repeated_cascade_id() {
        let text = "{\"cascade_id\":7,\"generations\":[[1]]}\n{\"cascade_id\":7,\"generations\":[[2]]}";
        let err = parse(text).unwrap_err();
        assert!(matches!(err, Error::Validation { line: 2, .. }));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"cascade_id\":0,\"generations\":[[1]]}\nnot json";
        let err = parse(text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn duplicate_ids_within_generation_dedup() {
        let parsed = parse(r#"{"cascade_id":0,"generations":[[5,5,5]]}"#).unwrap();
        assert_eq!(parsed.dataset.cascades()[0].generations()[0], gen(&[5]));
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn repeated_component_across_generations_warns_but_keeps() {
        let parsed = parse(r#"{"cascade_id":0,"generations":[[3],[4],[2,3]]}"#).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].component, ComponentId(3));
        assert_eq!(parsed.dataset.len(), 1);
    }

    #[test]
    fn string_labels_resolve_through_dictionary() {
        let mut labels = LabelMap::new();
        labels.insert("line-a".into(), 10);
        let parsed = parse_cascades(
            r#"{"cascade_id":0,"generations":[["line-a",11]]}"#.as_bytes(),
            Some(&labels),
        )
        .unwrap();
        assert_eq!(parsed.dataset.cascades()[0].generations()[0], gen(&[10, 11]));

        let err = parse(r#"{"cascade_id":0,"generations":[["line-a"]]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn filter_keeps_multi_generation_cascades_in_order() {
        let ds = three_line_dataset();
        assert_eq!(filter_multi_generation(&ds).len(), 4);

        let mixed = CascadeDataset::new(vec![
            cascade(0, &[&[1]]),
            cascade(1, &[&[1], &[2]]),
            cascade(2, &[&[1], &[2], &[3]]),
        ])
        .unwrap();
        let filtered = filter_multi_generation(&mixed);
        assert_eq!(
            filtered.cascades().iter().map(|c| c.id).collect::<Vec<_>>(),
            vec![1, 2]
        );

        let single = CascadeDataset::new(vec![cascade(0, &[&[1]])]).unwrap();
        assert!(filter_multi_generation(&single).is_empty());
    }

    #[test]
    fn stats_match_hand_counts() {
        let stats = dataset_stats(&three_line_dataset());
        assert_eq!(stats.cascade_count, 4);
        assert_eq!(stats.component_failure_frequency[&ComponentId(1)], 3);
        assert_eq!(stats.component_failure_frequency[&ComponentId(2)], 4);
        assert_eq!(stats.component_failure_frequency[&ComponentId(3)], 3);
        assert_eq!(stats.ending_generation_histogram[&2], 1);
        assert_eq!(stats.ending_generation_histogram[&1], 3);
    }

    #[test]
    fn stats_on_empty_dataset() {
        let stats = dataset_stats(&CascadeDataset::default());
        assert_eq!(stats.cascade_count, 0);
        assert!(stats.ending_generation_histogram.is_empty());
        assert!(stats.component_failure_frequency.is_empty());
    }

    #[test]
    fn ending_metrics_hand_counts() {
        let metrics = ending_metrics(&three_line_dataset(), DEFAULT_LARGE_THRESHOLD).unwrap();
        assert_eq!(metrics.distribution[&1], 0.75);
        assert_eq!(metrics.distribution[&2], 0.25);
        assert_eq!(metrics.large_cascade_probability, 0.0);
    }

    #[test]
    fn ending_metrics_all_end_at_one() {
        let ds = CascadeDataset::new(vec![
            cascade(0, &[&[1], &[2]]),
            cascade(1, &[&[3], &[4]]),
        ])
        .unwrap();
        let metrics = ending_metrics(&ds, DEFAULT_LARGE_THRESHOLD).unwrap();
        assert_eq!(metrics.distribution[&1], 1.0);
        assert_eq!(metrics.large_cascade_probability, 0.0);
    }

    #[test]
    fn ending_metrics_empty_errors() {
        assert!(matches!(
            ending_metrics(&CascadeDataset::default(), 3),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn csv_reports() {
        let stats = dataset_stats(&three_line_dataset());
        let mut out = Vec::new();
        write_ending_csv(&stats, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "ending_generation,count,probability\n1,3,0.75\n2,1,0.25\n"
        );
        let mut out = Vec::new();
        write_frequency_csv(&stats, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "component_id,failure_count\n1,3\n2,4\n3,3\n");
    }

    fn arbitrary_dataset() -> impl Strategy<Value = CascadeDataset> {
        let generation = proptest::collection::btree_set((0u32..40).prop_map(ComponentId), 1..5);
        let cascade_gens = proptest::collection::vec(generation, 1..6);
        proptest::collection::vec(cascade_gens, 0..12).prop_map(|all| {
            let cascades = all
                .into_iter()
                .enumerate()
                .map(|(i, gens)| Cascade::new(i as u64, gens).unwrap())
                .collect();
            CascadeDataset::new(cascades).unwrap()
        })
    }

    proptest! {
        #[test]
        fn emit_parse_round_trip(ds in arbitrary_dataset()) {
            let mut buf = Vec::new();
            write_cascades(&ds, &mut buf).unwrap();
            let parsed = parse_cascades(buf.as_slice(), None).unwrap();
            prop_assert_eq!(parsed.dataset, ds);
        }

        #[test]
        fn filter_is_idempotent(ds in arbitrary_dataset()) {
            let once = filter_multi_generation(&ds);
            let twice = filter_multi_generation(&once);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn stats_are_consistent(ds in arbitrary_dataset()) {
            let stats = dataset_stats(&ds);
            let total: u64 = stats.ending_generation_histogram.values().sum();
            prop_assert_eq!(total, ds.len() as u64);
            let freq_total: u64 = stats.component_failure_frequency.values().sum();
            let memberships: u64 = ds
                .cascades()
                .iter()
                .flat_map(|c| c.generations())
                .map(|g| g.len() as u64)
                .sum();
            prop_assert_eq!(freq_total, memberships);
        }

        #[test]
        fn distribution_normalized(ds in arbitrary_dataset()) {
            prop_assume!(!ds.is_empty());
            let metrics = ending_metrics(&ds, 3).unwrap();
            let sum: f64 = metrics.distribution.values().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }
}
