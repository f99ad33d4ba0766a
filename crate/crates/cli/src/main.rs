//! `spinflip` — experiment harness for the simulator and learners.
//!
//! Exit codes: 0 success, 1 evaluation/check failures, 2 configuration error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use spinflip_core::dynamics::{simulate, InitialState, Kernel, SimConfig};
use spinflip_core::model::{random_model, IsingModel};
use spinflip_core::params::{learn_parameters, ParamConfig};
use spinflip_core::structure::{learn_structure, CycleWindowConfig, StructureConfig};

use spinflip_cli::config::{self, ExperimentConfig};
use spinflip_cli::pipeline;

#[derive(Parser)]
#[command(name = "spinflip", version, about = "Ising trace simulation and learning harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random model and write it as JSON.
    Generate(GenerateArgs),
    /// Simulate a flip trace from a model file.
    Simulate(SimulateArgs),
    /// Recover the dependency graph from a trace.
    LearnStructure(LearnStructureArgs),
    /// Recover couplings and fields from a trace and a known graph.
    LearnParams(LearnParamsArgs),
    /// Run the exact-oracle suite against a small model.
    OracleCheck(OracleCheckArgs),
    /// Calibrate tau_bulk/tau_match from pilot simulations.
    Calibrate(CalibrateArgs),
    /// Score learned structure/parameters against a ground-truth model.
    Evaluate(EvaluateArgs),
    /// Full per-seed pipeline: generate, simulate, learn, evaluate.
    Run(RunArgs),
}

#[derive(Args)]
struct KernelArgs {
    /// glauber | metropolis
    #[arg(long, default_value = "glauber")]
    kernel: String,
    #[arg(long)]
    r_plus: Option<f64>,
    #[arg(long)]
    r_minus: Option<f64>,
}

impl KernelArgs {
    fn to_kernel(&self) -> Result<Kernel> {
        let kernel = match self.kernel.as_str() {
            "glauber" => Kernel::Glauber,
            "metropolis" => Kernel::Metropolis {
                r_plus: self.r_plus.unwrap_or(1.0),
                r_minus: self.r_minus.unwrap_or(1.0),
            },
            other => bail!("unknown kernel {other:?}"),
        };
        kernel.validate()?;
        Ok(kernel)
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// path | grid | matching | bounded-degree | bounded-degree-plus-matching
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long)]
    n_dense: Option<usize>,
    #[arg(long)]
    matching_pairs: Option<usize>,
    /// Fixed coupling value (sign included), or use --coupling-min/--coupling-max.
    #[arg(long)]
    coupling: Option<f64>,
    #[arg(long)]
    coupling_min: Option<f64>,
    #[arg(long)]
    coupling_max: Option<f64>,
    /// positive | negative | random
    #[arg(long)]
    sign: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    field_mag: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    kernel: KernelArgs,
    /// all-plus | seeded-uniform
    #[arg(long, default_value = "all-plus")]
    initial: String,
    /// Trace file; `.bin`/`.flt` extensions select the binary format.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnStructureArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 2.0)]
    spacing: f64,
    #[arg(long)]
    tau_bulk: f64,
    #[arg(long)]
    tau_match: f64,
    #[arg(long)]
    t_bulk: f64,
    /// Defaults to --t-bulk.
    #[arg(long)]
    t_match: Option<f64>,
    /// Run the matching phase on the same window as the bulk phase.
    #[arg(long)]
    reuse_trace: bool,
    #[arg(long, default_value_t = 0.01)]
    min_occupancy: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnParamsArgs {
    #[arg(long)]
    trace: PathBuf,
    /// JSON graph {"n": ..., "edges": [[i,j],...]}; learn-structure output works.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    eps_rate: f64,
    #[arg(long, default_value_t = 2.0)]
    spacing: f64,
    #[arg(long)]
    t_param: f64,
    #[arg(long, default_value_t = 200)]
    min_samples: u64,
    /// Use only the single best-occupied subcube per directed pair.
    #[arg(long)]
    no_pool: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[arg(long)]
    model: PathBuf,
    /// Restrict to one kernel; default checks Glauber and an asymmetric
    /// Metropolis (r+ = 0.7, r- = 1.0).
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    r_plus: Option<f64>,
    #[arg(long)]
    r_minus: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ground-truth model JSON.
    #[arg(long)]
    truth: PathBuf,
    /// Learned graph JSON (learn-structure output).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Learned parameters JSON (learn-params output).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Seed-parallel worker count; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides output_dir from the config / $SPINFLIP_OUT_DIR.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated seed list overriding the config.
    #[arg(long)]
    seeds: Option<String>,
    /// Overrides the simulation horizon.
    #[arg(long)]
    horizon: Option<f64>,
}

fn write_json(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<IsingModel> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading model {}", path.display()))?;
    Ok(IsingModel::from_json(&text)?)
}

fn cmd_generate(args: &GenerateArgs) -> Result<u8> {
    let section = config::ModelSection {
        file: None,
        family: Some(args.family.clone()),
        n: args.n,
        rows: args.rows,
        cols: args.cols,
        d: args.d,
        edges: args.edges,
        n_dense: args.n_dense,
        matching_pairs: args.matching_pairs,
        coupling: args.coupling,
        coupling_min: args.coupling_min,
        coupling_max: args.coupling_max,
        sign: args.sign.clone(),
        field_mag: args.field_mag,
    };
    let model = random_model(&section.generator_spec()?, args.seed)?;
    let text = model.to_json();
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8> {
    let model = load_model(&args.model)?;
    let initial = match args.initial.as_str() {
        "all-plus" => InitialState::AllPlus,
        "seeded-uniform" => InitialState::SeededUniform,
        other => bail!("unknown initial state {other:?}"),
    };
    let trace = simulate(
        &model,
        &args.kernel.to_kernel()?,
        &SimConfig {
            horizon: args.horizon,
            seed: args.seed,
            initial,
        },
    )?;
    pipeline::save_trace(&trace, &args.out)?;
    eprintln!(
        "wrote {} flips over horizon {} to {}",
        trace.events().len(),
        trace.horizon(),
        args.out.display()
    );
    Ok(0)
}

fn cmd_learn_structure(args: &LearnStructureArgs) -> Result<u8> {
    let trace = pipeline::load_trace(&args.trace)?;
    let cfg = StructureConfig {
        cycle: CycleWindowConfig {
            eps: args.eps,
            spacing: args.spacing,
        },
        tau_bulk: args.tau_bulk,
        tau_match: args.tau_match,
        t_bulk: args.t_bulk,
        t_match: args.t_match.unwrap_or(args.t_bulk),
        reuse_trace: args.reuse_trace,
        min_occupancy: args.min_occupancy,
    };
    let result = learn_structure(&trace, &cfg)?;
    write_json(&args.out, &pipeline::structure_json(&result))?;
    Ok(0)
}

fn cmd_learn_params(args: &LearnParamsArgs) -> Result<u8> {
    let trace = pipeline::load_trace(&args.trace)?;
    let graph = pipeline::load_graph(&args.graph)?;
    if graph.n() != trace.n() {
        bail!("graph has {} sites but trace has {}", graph.n(), trace.n());
    }
    let cfg = ParamConfig {
        eps_rate: args.eps_rate,
        spacing: args.spacing,
        t_param: args.t_param,
        min_samples: args.min_samples,
        pool_subcubes: !args.no_pool,
    };
    let learned = learn_parameters(&trace, &graph, &cfg)?;
    write_json(&args.out, &pipeline::params_json(trace.n(), &learned))?;
    Ok(0)
}

fn cmd_oracle_check(args: &OracleCheckArgs) -> Result<u8> {
    let model = load_model(&args.model)?;
    let kernels = match &args.kernel {
        Some(kind) => vec![KernelArgs {
            kernel: kind.clone(),
            r_plus: args.r_plus,
            r_minus: args.r_minus,
        }
        .to_kernel()?],
        None => vec![
            Kernel::Glauber,
            Kernel::Metropolis {
                r_plus: 0.7,
                r_minus: 1.0,
            },
        ],
    };
    let outcome = pipeline::oracle_check(&model, &kernels)?;
    write_json(&args.out, &outcome.report)?;
    Ok(if outcome.pass { 0 } else { 1 })
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<u8> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let outcome = pipeline::calibrate(&cfg, &base)?;
    write_json(&args.out, &outcome.report)?;
    Ok(if outcome.thresholds.is_some() { 0 } else { 1 })
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<u8> {
    let truth = load_model(&args.truth)?;
    let truth_graph = truth.dependency_graph();
    let mut report = json!({"n": truth.n()});

    if let Some(path) = &args.graph {
        let learned = pipeline::load_graph(path)?;
        if learned.n() != truth.n() {
            bail!("graph has {} sites but truth has {}", learned.n(), truth.n());
        }
        let m = pipeline::edge_metrics(&truth_graph, &learned);
        report["structure"] = json!({
            "precision": m.precision,
            "recall": m.recall,
            "exact_recovery": m.exact_recovery,
        });
    }

    if let Some(path) = &args.params {
        // learn-params output follows the model schema, so the model loader
        // doubles as the round-trip evaluation loader
        let learned = load_model(path)?;
        if learned.n() != truth.n() {
            bail!("params file has {} sites but truth has {}", learned.n(), truth.n());
        }
        let couplings: BTreeMap<(usize, usize), f64> = learned
            .couplings()
            .map(|(i, j, v)| ((i, j), v))
            .collect();
        report["parameters"] = json!({
            "coupling_max_err": pipeline::coupling_max_error(&truth, &couplings),
            "field_max_err": pipeline::field_max_error(&truth, learned.fields()),
        });
    }

    write_json(&args.out, &report)?;
    Ok(0)
}

fn cmd_run(args: &RunArgs) -> Result<u8> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds
            .split(',')
            .map(|s| s.trim().parse::<u64>().context("parsing --seeds"))
            .collect::<Result<_>>()?;
        if cfg.seeds.is_empty() {
            bail!("--seeds list is empty");
        }
    }
    if let Some(horizon) = args.horizon {
        cfg.sim.horizon = horizon;
    }
    let out_dir = args.out_dir.clone().unwrap_or_else(|| cfg.output_dir());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let run = || pipeline::run_experiment(&cfg, &out_dir);
    let output = match args.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building worker pool")?
            .install(run),
        None => run(),
    }?;

    let failed = output.results.iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "{} seeds, {} failed; report at {}",
        output.results.len(),
        failed,
        out_dir.join("report.json").display()
    );
    Ok(if failed == 0 { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Generate(args) => cmd_generate(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::LearnStructure(args) => cmd_learn_structure(args),
        Cmd::LearnParams(args) => cmd_learn_params(args),
        Cmd::OracleCheck(args) => cmd_oracle_check(args),
        Cmd::Calibrate(args) => cmd_calibrate(args),
        Cmd::Evaluate(args) => cmd_evaluate(args),
        Cmd::Run(args) => cmd_run(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
