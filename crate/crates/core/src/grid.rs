//! Toy load-redistribution grid.
//!
//! A deliberately simple stand-in for a physical cascade simulator: lines
//! carry per-unit load against a capacity, a failed line's load is split
//! equally among its surviving neighbors scaled by alpha, and any line
//! pushed over capacity joins the next failure generation. Good enough to
//! make "upgrade these capacities by 20%" physically meaningful; not a
//! power-flow model.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{Cascade, CascadeDataset, ComponentId, Generation};
use crate::error::{Error, Result};
use crate::seed::cascade_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GridLine {
    pub load: f64,
    pub capacity: f64,
    pub neighbors: BTreeSet<ComponentId>,
}

/// Lines with loads, capacities and a symmetric adjacency, plus the
/// redistribution fraction alpha in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    lines: BTreeMap<ComponentId, GridLine>,
    alpha: f64,
}

impl ThresholdGrid {
    pub fn new(lines: BTreeMap<ComponentId, GridLine>, alpha: f64) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::InvalidInput {
                what: "grid",
                message: "no lines".into(),
            });
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidInput {
                what: "grid",
                message: format!("alpha {alpha} outside (0, 1]"),
            });
        }
        for (&id, line) in &lines {
            if line.load < 0.0 || line.capacity <= 0.0 {
                return Err(Error::InvalidInput {
                    what: "grid",
                    message: format!("line {id}: load {} capacity {}", line.load, line.capacity),
                });
            }
            if line.load > line.capacity {
                return Err(Error::InvalidInput {
                    what: "grid",
                    message: format!("line {id} starts overloaded"),
                });
            }
            if line.neighbors.contains(&id) {
                return Err(Error::InvalidInput {
                    what: "grid",
                    message: format!("line {id} is adjacent to itself"),
                });
            }
            for n in &line.neighbors {
                let back = lines.get(n).ok_or(Error::UnknownLine(n.0))?;
                if !back.neighbors.contains(&id) {
                    return Err(Error::InvalidInput {
                        what: "grid",
                        message: format!("adjacency not symmetric between {id} and {n}"),
                    });
                }
            }
        }
        Ok(Self { lines, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn line_ids(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.lines.keys().copied()
    }

    pub fn line(&self, id: ComponentId) -> Option<&GridLine> {
        self.lines.get(&id)
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }
}

/// Returns the grid with `factor`-scaled capacities on the listed lines.
pub fn upgrade_capacities(
    grid: &ThresholdGrid,
    lines: &BTreeSet<ComponentId>,
    factor: f64,
) -> Result<ThresholdGrid> {
    if factor <= 0.0 {
        return Err(Error::InvalidInput {
            what: "upgrade factor",
            message: format!("{factor} must be positive"),
        });
    }
    let mut out = grid.clone();
    for id in lines {
        let line = out.lines.get_mut(id).ok_or(Error::UnknownLine(id.0))?;
        line.capacity *= factor;
    }
    Ok(out)
}

/// Runs one cascade: fail `initial`, redistribute, collect generations
/// until no new overloads. `loads` carries the jittered per-line loads.
fn run_cascade(
    grid: &ThresholdGrid,
    mut loads: BTreeMap<ComponentId, f64>,
    initial: ComponentId,
) -> Vec<Generation> {
    let mut failed: BTreeSet<ComponentId> = BTreeSet::new();
    let mut generations: Vec<Generation> = Vec::new();
    let mut current: Generation = [initial].into();
    while !current.is_empty() {
        failed.extend(current.iter().copied());
        // Each failed line sheds its current load equally onto surviving
        // neighbors; load with no surviving neighbor is dropped.
        for &line in &current {
            let shed = loads[&line];
            let survivors: Vec<ComponentId> = grid.lines[&line]
                .neighbors
                .iter()
                .copied()
                .filter(|n| !failed.contains(n))
                .collect();
            if survivors.is_empty() {
                continue;
            }
            let share = grid.alpha * shed / survivors.len() as f64;
            for n in survivors {
                *loads.get_mut(&n).expect("neighbor exists") += share;
            }
        }
        generations.push(current.clone());
        current = grid
            .lines
            .iter()
            .filter(|(id, line)| !failed.contains(id) && loads[*id] > line.capacity)
            .map(|(&id, _)| id)
            .collect();
    }
    generations
}

/// Simulates `m` cascades: jitter loads, trip one uniformly random line,
/// run the overload relaxation. Deterministic per (grid, seed, M).
pub fn simulate_grid_cascades(
    grid: &ThresholdGrid,
    m: u64,
    seed: u64,
    load_jitter: f64,
) -> Result<CascadeDataset> {
    if m == 0 {
        return Err(Error::InvalidInput {
            what: "sample size",
            message: "M must be at least 1".into(),
        });
    }
    if load_jitter < 0.0 {
        return Err(Error::InvalidInput {
            what: "load_jitter",
            message: "must be non-negative".into(),
        });
    }
    let ids: Vec<ComponentId> = grid.line_ids().collect();
    let cascades: Vec<Cascade> = (0..m)
        .into_par_iter()
        .map(|id| {
            let mut rng = cascade_rng(seed, id);
            let mut loads = BTreeMap::new();
            for (&line, data) in &grid.lines {
                let factor = if load_jitter > 0.0 {
                    // Box-Muller; multiplicative factor clamped at zero.
                    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                    let u2: f64 = rng.random();
                    let z = (-2.0 * u1.ln()).sqrt()
                        * (2.0 * std::f64::consts::PI * u2).cos();
                    (1.0 + load_jitter * z).max(0.0)
                } else {
                    1.0
                };
                loads.insert(line, data.load * factor);
            }
            let initial = ids[rng.random_range(0..ids.len())];
            let generations = run_cascade(grid, loads, initial);
            Cascade::new(id, generations).expect("generations non-empty")
        })
        .collect();
    CascadeDataset::new(cascades)
}

#[derive(Serialize, Deserialize)]
struct GridLineRecord {
    line_id: u32,
    load: f64,
    capacity: f64,
    neighbors: Vec<u32>,
}

/// Writes the grid spec file: one record per line with
/// `line_id, load, capacity, neighbors`.
pub fn write_grid<W: Write>(grid: &ThresholdGrid, writer: &mut W) -> Result<()> {
    for (&id, line) in &grid.lines {
        let record = GridLineRecord {
            line_id: id.0,
            load: line.load,
            capacity: line.capacity,
            neighbors: line.neighbors.iter().map(|c| c.0).collect(),
        };
        serde_json::to_writer(&mut *writer, &record)?;
        writeln!(writer)?;
    }
    Ok(())
}

/// Reads a grid spec file; `alpha` comes from the caller since it is a
/// simulation parameter rather than per-line data.
pub fn read_grid<R: BufRead>(reader: R, alpha: f64) -> Result<ThresholdGrid> {
    let mut lines = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GridLineRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        lines.insert(
            ComponentId(record.line_id),
            GridLine {
                load: record.load,
                capacity: record.capacity,
                neighbors: record.neighbors.into_iter().map(ComponentId).collect(),
            },
        );
    }
    ThresholdGrid::new(lines, alpha)
}

/// A path of `n` lines, each adjacent to its neighbors, with the given
/// per-line loads and capacities.
pub fn path_grid(loads_and_capacities: &[(f64, f64)], alpha: f64) -> Result<ThresholdGrid> {
    let n = loads_and_capacities.len();
    let mut lines = BTreeMap::new();
    for (i, &(load, capacity)) in loads_and_capacities.iter().enumerate() {
        let id = i as u32 + 1;
        let mut neighbors = BTreeSet::new();
        if i > 0 {
            neighbors.insert(ComponentId(id - 1));
        }
        if i + 1 < n {
            neighbors.insert(ComponentId(id + 1));
        }
        lines.insert(
            ComponentId(id),
            GridLine {
                load,
                capacity,
                neighbors,
            },
        );
    }
    ThresholdGrid::new(lines, alpha)
}
