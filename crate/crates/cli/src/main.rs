//! Command-line pipeline: simulate cascade datasets from synthetic
//! generators, build and eigen-analyze the stochastic interaction graph,
//! design mitigation plans, re-simulate and evaluate them.
//!
//! Exit codes: 0 success, 2 usage or I/O problems, 3 empty data after
//! filtering, 4 unmet strategy preconditions.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cascade_core::cascade::{
    dataset_stats, filter_multi_generation, parse_cascades, read_label_map,
    write_cascades, write_ending_csv, write_frequency_csv, CascadeDataset,
};
use cascade_core::chain::{read_chain, sample_cascades, GroundTruthChain};
use cascade_core::error::Error;
use cascade_core::graph::{build_state_graph, stochastic_matrix, write_graph, InteractionGraph};
use cascade_core::grid::{read_grid, simulate_grid_cascades, ThresholdGrid};
use cascade_core::mitigation::{
    apply_plan_to_chain, apply_plan_to_grid, evaluate, plan_strategy, write_evaluation_csv,
    write_plan, DecoupleTarget, Selection, StrategyRequest,
};
use cascade_core::seed::child_seed;
use cascade_core::spectral::{
    classify_modes, convergence_study, write_convergence_csv, write_eigenvectors_csv,
    write_modes_csv, SpectralAnalysis, Tolerances,
};

#[derive(Parser)]
#[command(name = "cascade", version, about = "Stochastic interaction-graph analysis of cascading failures")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed for sampling and plan randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Directory for report files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Tolerance around |lambda| = 1 for the unity class.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_unity: f64,

    /// Tolerance around |lambda| = 0 for the zero class / null space.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_zero: f64,

    /// Participation threshold on eigenvector entry moduli.
    #[arg(long, global = true, default_value_t = 0.5)]
    epsilon: f64,
}

#[derive(Args)]
struct GeneratorInput {
    /// Ground-truth chain spec file.
    #[arg(long, value_name = "FILE", conflicts_with = "grid")]
    chain: Option<PathBuf>,

    /// Threshold-grid spec file.
    #[arg(long, value_name = "FILE")]
    grid: Option<PathBuf>,

    /// Redistribution fraction for the grid world.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    /// Relative stddev of the multiplicative load jitter (grid world).
    #[arg(long, default_value_t = 0.0)]
    load_jitter: f64,

    /// Generation cap per cascade (chain world).
    #[arg(long, default_value_t = cascade_core::chain::DEFAULT_MAX_GENERATIONS)]
    max_generations: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a cascade dataset from a generator spec.
    Simulate {
        #[command(flatten)]
        input: GeneratorInput,

        /// Number of cascades.
        #[arg(long = "M", value_parser = clap::value_parser!(u64).range(1..))]
        m: u64,

        /// Output cascade file (JSONL).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Build the interaction graph and classify its modes.
    Analyze {
        /// Cascade file (JSONL).
        #[arg(long, value_name = "FILE")]
        cascades: PathBuf,

        /// Optional label dictionary for string component ids.
        #[arg(long, value_name = "FILE")]
        labels: Option<PathBuf>,
    },
    /// Plan a mitigation, re-simulate and evaluate it.
    Mitigate {
        /// Baseline cascade file the plan is derived from.
        #[arg(long, value_name = "FILE")]
        cascades: PathBuf,

        #[command(flatten)]
        input: GeneratorInput,

        #[arg(long, value_enum)]
        strategy: StrategyArg,

        /// Top-entry count (states for eigen/absorb, lines for random/mf).
        #[arg(long = "S")]
        s: Option<usize>,

        /// Modulus threshold instead of a count (eigen only).
        #[arg(long, conflicts_with = "s")]
        threshold: Option<f64>,

        /// Transition-probability reduction factor in the chain world.
        #[arg(long)]
        rho: Option<f64>,

        /// Capacity upgrade factor in the grid world.
        #[arg(long)]
        factor: Option<f64>,

        /// Decouple the whole subgraph or only its max-S_w vertex.
        #[arg(long, value_enum, default_value_t = DecoupleTargetArg::Subgraph)]
        decouple_target: DecoupleTargetArg,

        /// Cascades to re-simulate (default: baseline size).
        #[arg(long = "M", value_parser = clap::value_parser!(u64).range(1..))]
        m: Option<u64>,

        /// Ending generation above which a cascade counts as large.
        #[arg(long, default_value_t = cascade_core::cascade::DEFAULT_LARGE_THRESHOLD)]
        large_threshold: usize,
    },
    /// Top transient eigenvalues across dataset sizes.
    Convergence {
        #[command(flatten)]
        input: GeneratorInput,

        /// Comma-separated dataset sizes, e.g. 1000,10000,100000.
        #[arg(long, value_name = "LIST", default_value = "")]
        sizes: String,

        /// Conjugate pairs to report per size.
        #[arg(long, default_value_t = 2)]
        complex_pairs: usize,

        /// Output CSV path.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Compare two cascade datasets.
    Evaluate {
        #[arg(long, value_name = "FILE")]
        baseline: PathBuf,

        #[arg(long, value_name = "FILE")]
        mitigated: PathBuf,

        #[arg(long, default_value_t = cascade_core::cascade::DEFAULT_LARGE_THRESHOLD)]
        large_threshold: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Random,
    Eigen,
    Mf,
    Decouple,
    Absorb,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecoupleTargetArg {
    Subgraph,
    MaxInbound,
}

enum CliError {
    Usage(String),
    EmptyData(String),
    Precondition(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::EmptyData(_) => 3,
            CliError::Precondition(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::EmptyData(m) | CliError::Precondition(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::EmptyDataset => CliError::EmptyData("empty dataset".into()),
            Error::NoTransientPositiveMode | Error::NoTransientComplexMode => {
                CliError::Precondition(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

enum Generator {
    Chain(GroundTruthChain),
    Grid(ThresholdGrid),
}

impl GeneratorInput {
    fn load(&self) -> CliResult<Generator> {
        match (&self.chain, &self.grid) {
            (Some(path), None) => Ok(Generator::Chain(read_chain(open(path)?)?)),
            (None, Some(path)) => Ok(Generator::Grid(read_grid(open(path)?, self.alpha)?)),
            _ => Err(CliError::Usage(
                "exactly one of --chain or --grid is required".into(),
            )),
        }
    }

    fn sample(&self, generator: &Generator, m: u64, seed: u64) -> CliResult<CascadeDataset> {
        Ok(match generator {
            Generator::Chain(chain) => sample_cascades(chain, m, seed, self.max_generations)?,
            Generator::Grid(grid) => simulate_grid_cascades(grid, m, seed, self.load_jitter)?,
        })
    }
}

fn load_cascades(path: &Path, labels: Option<&Path>) -> CliResult<CascadeDataset> {
    let label_map = match labels {
        Some(p) => Some(read_label_map(open(p)?)?),
        None => None,
    };
    let parsed = parse_cascades(open(path)?, label_map.as_ref())?;
    let total = parsed.warnings.len();
    for warning in parsed.warnings.iter().take(20) {
        eprintln!("warning: {warning}");
    }
    if total > 20 {
        eprintln!("warning: {} more component-repeat warnings", total - 20);
    }
    Ok(parsed.dataset)
}

fn analyze_dataset(
    dataset: &CascadeDataset,
    tolerances: Tolerances,
) -> CliResult<(InteractionGraph, cascade_core::StochasticMatrix, SpectralAnalysis)> {
    let filtered = filter_multi_generation(dataset);
    if filtered.is_empty() {
        return Err(CliError::EmptyData(
            "no cascades with at least two generations".into(),
        ));
    }
    let graph = build_state_graph(&filtered)?;
    let w = stochastic_matrix(&graph)?;
    let analysis = classify_modes(&w, &graph, tolerances)?;
    for warning in &analysis.warnings {
        eprintln!("warning: {warning}");
    }
    Ok((graph, w, analysis))
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.tol_unity <= 0.0 || cli.tol_zero <= 0.0 {
        return Err(CliError::Usage("tolerances must be positive".into()));
    }
    if !(cli.epsilon > 0.0 && cli.epsilon <= 1.0) {
        return Err(CliError::Usage("epsilon must lie in (0, 1]".into()));
    }
    let tolerances = Tolerances {
        unity: cli.tol_unity,
        zero: cli.tol_zero,
    };

    match cli.command {
        Command::Simulate { input, m, out } => {
            let generator = input.load()?;
            let dataset = input.sample(&generator, m, cli.seed)?;
            let mut writer = BufWriter::new(File::create(&out)?);
            write_cascades(&dataset, &mut writer)?;
            writer.flush()?;
            let mean: f64 = dataset
                .cascades()
                .iter()
                .map(|c| c.generations().len() as f64)
                .sum::<f64>()
                / dataset.len() as f64;
            println!("M={} mean_generations={mean}", dataset.len());
        }
        Command::Analyze { cascades, labels } => {
            let dataset = load_cascades(&cascades, labels.as_deref())?;
            let (graph, w, analysis) = analyze_dataset(&dataset, tolerances)?;
            let filtered = filter_multi_generation(&dataset);
            let stats = dataset_stats(&filtered);

            write_graph(&graph, &mut create(&cli.out_dir, "graph.json")?)?;
            w.write_csv(&mut create(&cli.out_dir, "matrix.csv")?)?;
            write_modes_csv(&analysis, cli.epsilon, &mut create(&cli.out_dir, "modes.csv")?)?;
            write_eigenvectors_csv(&analysis, &mut create(&cli.out_dir, "eigenvectors.csv")?)?;
            write_ending_csv(&stats, &mut create(&cli.out_dir, "ending.csv")?)?;
            write_frequency_csv(&stats, &mut create(&cli.out_dir, "frequency.csv")?)?;

            println!(
                "N={} E={} selfloops={} persistent={} trivial={} transient={} boundary={}",
                graph.vertex_count(),
                graph.edge_count(),
                graph.self_loop_count(),
                analysis.class_counts.unity,
                analysis.class_counts.zero,
                analysis.class_counts.transient,
                analysis.class_counts.boundary,
            );
        }
        Command::Mitigate {
            cascades,
            input,
            strategy,
            s,
            threshold,
            rho,
            factor,
            decouple_target,
            m,
            large_threshold,
        } => {
            let baseline = load_cascades(&cascades, None)?;
            let generator = input.load()?;
            let (graph, _, analysis) = analyze_dataset(&baseline, tolerances)?;
            let filtered = filter_multi_generation(&baseline);
            let stats = dataset_stats(&filtered);

            let request = match strategy {
                StrategyArg::Random => StrategyRequest::Random {
                    count: s.ok_or_else(|| {
                        CliError::Usage("--strategy random requires --S".into())
                    })?,
                    seed: cli.seed,
                    universe: filtered.component_universe(),
                },
                StrategyArg::Eigen => StrategyRequest::Eigen {
                    selection: match (s, threshold) {
                        (Some(s), None) => {
                            if s > graph.vertex_count() {
                                eprintln!(
                                    "warning: --S {s} exceeds the {} vertices; truncating",
                                    graph.vertex_count()
                                );
                            }
                            Selection::TopCount(s)
                        }
                        (None, Some(t)) => Selection::Threshold(t),
                        _ => {
                            return Err(CliError::Usage(
                                "--strategy eigen requires --S or --threshold".into(),
                            ))
                        }
                    },
                    analysis: &analysis,
                    graph: &graph,
                },
                StrategyArg::Mf => StrategyRequest::MostFrequent {
                    count: s.ok_or_else(|| {
                        CliError::Usage("--strategy mf requires --S".into())
                    })?,
                    stats: &stats,
                },
                StrategyArg::Decouple => StrategyRequest::Decouple {
                    rho: rho.unwrap_or(1.0),
                    epsilon: cli.epsilon,
                    target: match decouple_target {
                        DecoupleTargetArg::Subgraph => DecoupleTarget::Subgraph,
                        DecoupleTargetArg::MaxInbound => DecoupleTarget::MaxInboundVertex,
                    },
                    analysis: &analysis,
                    graph: &graph,
                },
                StrategyArg::Absorb => StrategyRequest::Absorb {
                    count: s.ok_or_else(|| {
                        CliError::Usage("--strategy absorb requires --S".into())
                    })?,
                    graph: &graph,
                },
            };
            let mut plan = plan_strategy(request)?;
            if let Some(rho) = rho {
                plan = plan.with_rho(rho);
            }
            if let Some(factor) = factor {
                plan = plan.with_factor(factor);
            }
            write_plan(&plan, &mut create(&cli.out_dir, "plan.json")?)?;

            let m = m.unwrap_or(baseline.len() as u64);
            let rerun_seed = child_seed(cli.seed, "mitigated");
            let mitigated_ds = match &generator {
                Generator::Chain(chain) => {
                    let mitigated_chain = apply_plan_to_chain(&plan, &graph, chain)?;
                    sample_cascades(&mitigated_chain, m, rerun_seed, input.max_generations)?
                }
                Generator::Grid(grid) => {
                    let upgraded = apply_plan_to_grid(&plan, grid)?;
                    simulate_grid_cascades(&upgraded, m, rerun_seed, input.load_jitter)?
                }
            };
            let mut writer = create(&cli.out_dir, "mitigated.jsonl")?;
            write_cascades(&mitigated_ds, &mut writer)?;
            writer.flush()?;

            let report = evaluate(&baseline, &mitigated_ds, large_threshold)?;
            write_evaluation_csv(&report, &mut create(&cli.out_dir, "evaluation.csv")?)?;
            write_ending_csv(
                &dataset_stats(&baseline),
                &mut create(&cli.out_dir, "ending_baseline.csv")?,
            )?;
            write_ending_csv(
                &dataset_stats(&mitigated_ds),
                &mut create(&cli.out_dir, "ending_mitigated.csv")?,
            )?;

            println!(
                "strategy={} S={} S_prime={} baseline_large={} mitigated_large={} reduction_pct={}",
                plan.strategy.label(),
                plan.s.map_or("-".into(), |v| v.to_string()),
                plan.s_prime(),
                report.baseline.large_cascade_probability,
                report.mitigated.large_cascade_probability,
                report.reduction_pct,
            );
        }
        Command::Convergence {
            input,
            sizes,
            complex_pairs,
            out,
        } => {
            let sizes: Vec<u64> = sizes
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|e| CliError::Usage(format!("bad size {s:?}: {e}")))
                })
                .collect::<CliResult<_>>()?;
            let generator = input.load()?;
            let datasets: Vec<CascadeDataset> = match sizes.iter().max() {
                Some(&max_size) => {
                    // One sample, shared prefixes: stream derivation makes
                    // the first n cascades of any run identical.
                    let full = input.sample(&generator, max_size, cli.seed)?;
                    sizes.iter().map(|&n| full.prefix(n as usize)).collect()
                }
                None => Vec::new(),
            };
            let rows = convergence_study(&datasets, complex_pairs, tolerances)?;
            let mut writer = BufWriter::new(File::create(&out)?);
            write_convergence_csv(&rows, &mut writer)?;
            writer.flush()?;
            println!("sizes={}", rows.len());
        }
        Command::Evaluate {
            baseline,
            mitigated,
            large_threshold,
        } => {
            let baseline_ds = load_cascades(&baseline, None)?;
            let mitigated_ds = load_cascades(&mitigated, None)?;
            if baseline_ds.is_empty() || mitigated_ds.is_empty() {
                return Err(CliError::EmptyData("empty dataset".into()));
            }
            let report = evaluate(&baseline_ds, &mitigated_ds, large_threshold)?;
            write_evaluation_csv(&report, &mut create(&cli.out_dir, "evaluation.csv")?)?;
            write_ending_csv(
                &dataset_stats(&baseline_ds),
                &mut create(&cli.out_dir, "ending_baseline.csv")?,
            )?;
            write_ending_csv(
                &dataset_stats(&mitigated_ds),
                &mut create(&cli.out_dir, "ending_mitigated.csv")?,
            )?;
            println!(
                "baseline_large={} mitigated_large={} reduction_pct={}",
                report.baseline.large_cascade_probability,
                report.mitigated.large_cascade_probability,
                report.reduction_pct,
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
