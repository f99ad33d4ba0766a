//! The experiment pipeline behind `run`, `evaluate`, `calibrate`, and
//! `oracle-check`, plus the JSON/CSV report plumbing shared by the
//! subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use spinflip_core::dynamics::{flip_probability, kernel_profile, Kernel};
use spinflip_core::model::{dense_edges, Graph, IsingModel};
use spinflip_core::oracle::{
    check_detailed_balance, exact_kernel, pair_marginal, z_star_numeric, MAX_BALANCE_N,
};
use spinflip_core::params::{coupling_ratio, learn_parameters, LearnedParameters};
use spinflip_core::spins::SpinConfig;
use spinflip_core::structure::{
    find_bulk_edges, find_matching, learn_structure, CycleWindowConfig, StructureConfig,
    StructureResult,
};
use spinflip_core::trace::FlipTrace;

use crate::config::{ExperimentConfig, ModelSource};

// ---------------------------------------------------------------------------
// Graph / trace / learner-output files

/// Learned-graph JSON: {"n": ..., "edges": [[i,j],...]}. Extra keys (the
/// diagnostics emitted by learn-structure) are ignored on load, so the
/// structure output feeds straight back into learn-params and evaluate.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading graph {}", path.display()))?;
    let gf: GraphFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Graph::from_edges(gf.n, gf.edges)?)
}

/// Trace format by extension: `.bin`/`.flt` binary, anything else JSONL.
pub fn is_binary_trace(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("bin") | Some("flt")
    )
}

pub fn load_trace(path: &Path) -> Result<FlipTrace> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("reading trace {}", path.display()))?;
    let trace = if is_binary_trace(path) {
        FlipTrace::read_binary(std::io::BufReader::new(file))?
    } else {
        FlipTrace::read_jsonl(std::io::BufReader::new(file))?
    };
    Ok(trace)
}

pub fn save_trace(trace: &FlipTrace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("writing trace {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    if is_binary_trace(path) {
        trace.write_binary(&mut w)?;
    } else {
        trace.write_jsonl(&mut w)?;
    }
    Ok(())
}

pub fn structure_json(result: &StructureResult) -> serde_json::Value {
    let acc = &result.bulk.accumulator;
    let n = result.graph.n();
    let mut pair_means = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && acc.sum(i, j) != 0 {
                pair_means.push(json!({
                    "i": i, "j": j,
                    "mean": acc.mean(i, j),
                    "std_error": acc.std_error(i, j),
                }));
            }
        }
    }
    let conditionals: Vec<_> = result
        .matching
        .diagnostics
        .iter()
        .map(|c| json!({"i": c.i, "j": c.j, "diff_ij": c.diff_ij, "diff_ji": c.diff_ji}))
        .collect();
    json!({
        "n": n,
        "edges": result.graph.edges().collect::<Vec<_>>(),
        "indeterminate": result.matching.indeterminate,
        "diagnostics": {
            "windows": acc.windows,
            "bulk_edges": result.bulk.graph.edges().collect::<Vec<_>>(),
            "matching_edges": result.matching.edges,
            "nonzero_pair_means": pair_means,
            "conditionals": conditionals,
        },
    })
}

/// Learned-parameter JSON in the model-file schema (n/couplings/fields) plus
/// a `report` key, so the output round-trips through `IsingModel::from_json`.
pub fn params_json(n: usize, learned: &LearnedParameters) -> serde_json::Value {
    let couplings: Vec<_> = learned
        .couplings
        .iter()
        .map(|(&(i, j), &v)| json!([i, j, v]))
        .collect();
    let edges: Vec<_> = learned
        .report
        .edges
        .iter()
        .map(|e| {
            json!({
                "i": e.i, "j": e.j,
                "estimate_ij": e.estimate_ij,
                "estimate_ji": e.estimate_ji,
                "disagreement": e.disagreement,
            })
        })
        .collect();
    json!({
        "n": n,
        "couplings": couplings,
        "fields": learned.fields,
        "report": {"edges": edges, "failures": learned.report.failures},
    })
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub precision: f64,
    pub recall: f64,
    pub exact_recovery: bool,
}

pub fn edge_metrics(truth: &Graph, learned: &Graph) -> EdgeMetrics {
    let truth_edges: BTreeSet<(usize, usize)> = truth.edges().collect();
    let learned_edges: BTreeSet<(usize, usize)> = learned.edges().collect();
    let hits = truth_edges.intersection(&learned_edges).count() as f64;
    let precision = if learned_edges.is_empty() {
        1.0
    } else {
        hits / learned_edges.len() as f64
    };
    let recall = if truth_edges.is_empty() {
        1.0
    } else {
        hits / truth_edges.len() as f64
    };
    EdgeMetrics {
        precision,
        recall,
        exact_recovery: truth_edges == learned_edges,
    }
}

/// Max |A_hat - A| over the union of true and estimated edges (a missing
/// estimate counts as 0, a spurious estimate is an error of its own size).
pub fn coupling_max_error(
    truth: &IsingModel,
    estimated: &BTreeMap<(usize, usize), f64>,
) -> f64 {
    let mut keys: BTreeSet<(usize, usize)> =
        truth.couplings().map(|(i, j, _)| (i, j)).collect();
    keys.extend(estimated.keys().copied());
    keys.iter()
        .map(|&(i, j)| {
            let a = truth.coupling(i, j);
            let a_hat = estimated.get(&(i, j)).copied().unwrap_or(0.0);
            (a_hat - a).abs()
        })
        .fold(0.0, f64::max)
}

pub fn field_max_error(truth: &IsingModel, estimated: &[f64]) -> f64 {
    truth
        .fields()
        .iter()
        .zip(estimated)
        .map(|(h, h_hat)| (h_hat - h).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Per-seed pipeline and the aggregate report

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub error: Option<String>,
    pub flips: Option<u64>,
    pub edge_precision: Option<f64>,
    pub edge_recall: Option<f64>,
    pub exact_recovery: Option<bool>,
    pub coupling_max_err: Option<f64>,
    pub field_max_err: Option<f64>,
}

impl SeedResult {
    fn failed(seed: u64, err: &anyhow::Error) -> Self {
        SeedResult {
            seed,
            error: Some(format!("{err:#}")),
            flips: None,
            edge_precision: None,
            edge_recall: None,
            exact_recovery: None,
            coupling_max_err: None,
            field_max_err: None,
        }
    }
}

/// Wall times are reported separately from the results so that the results
/// block is a pure function of (config, seeds).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedTiming {
    pub seed: u64,
    pub simulate_s: f64,
    pub structure_s: f64,
    pub params_s: f64,
}

pub struct RunOutput {
    pub results: Vec<SeedResult>,
}

fn run_seed(
    cfg: &ExperimentConfig,
    source: &ModelSource,
    seed: u64,
) -> Result<(SeedResult, SeedTiming, String)> {
    let mut log = String::new();
    let model = source.model_for(seed)?;
    let truth = model.dependency_graph();
    log.push_str(&format!(
        "seed {seed}: model n={} edges={}\n",
        model.n(),
        truth.edge_count()
    ));

    let t0 = Instant::now();
    let trace = spinflip_core::dynamics::simulate(&model, &cfg.kernel, &cfg.sim_config(seed))?;
    let simulate_s = t0.elapsed().as_secs_f64();
    log.push_str(&format!(
        "simulated horizon {} -> {} flips in {simulate_s:.2}s\n",
        trace.horizon(),
        trace.events().len()
    ));

    let mut result = SeedResult {
        seed,
        error: None,
        flips: Some(trace.events().len() as u64),
        edge_precision: None,
        edge_recall: None,
        exact_recovery: None,
        coupling_max_err: None,
        field_max_err: None,
    };

    let t1 = Instant::now();
    let mut learned_graph: Option<Graph> = None;
    if let Some(section) = &cfg.structure {
        let structure = learn_structure(&trace, &section.to_core()?)?;
        let metrics = edge_metrics(&truth, &structure.graph);
        log.push_str(&format!(
            "structure: {} edges, precision {:.3} recall {:.3}\n",
            structure.graph.edge_count(),
            metrics.precision,
            metrics.recall
        ));
        result.edge_precision = Some(metrics.precision);
        result.edge_recall = Some(metrics.recall);
        result.exact_recovery = Some(metrics.exact_recovery);
        learned_graph = Some(structure.graph);
    }
    let structure_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    if let Some(section) = &cfg.params {
        let graph = if section.use_true_graph {
            truth.clone()
        } else {
            learned_graph.unwrap_or_else(|| truth.clone())
        };
        let learned = learn_parameters(&trace, &graph, &section.to_core()?)?;
        result.coupling_max_err = Some(coupling_max_error(&model, &learned.couplings));
        result.field_max_err = Some(field_max_error(&model, &learned.fields));
        log.push_str(&format!(
            "params: max coupling err {:.4}, max field err {:.4}, {} failures\n",
            result.coupling_max_err.unwrap(),
            result.field_max_err.unwrap(),
            learned.report.failures.len()
        ));
        for f in &learned.report.failures {
            log.push_str(&format!("  param failure: {f}\n"));
        }
    }
    let params_s = t2.elapsed().as_secs_f64();

    Ok((
        result,
        SeedTiming {
            seed,
            simulate_s,
            structure_s,
            params_s,
        },
        log,
    ))
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs the configured pipeline for every seed (seed-parallel), writes
/// report.json, report.csv, and per-seed logs under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    let base = out_dir.to_path_buf();
    std::fs::create_dir_all(base.join("logs"))?;
    let source = cfg.model.resolve(out_dir)?;

    let outcomes: Vec<(SeedResult, Option<SeedTiming>, String)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| match run_seed(cfg, &source, seed) {
            Ok((r, t, log)) => (r, Some(t), log),
            Err(e) => (SeedResult::failed(seed, &e), None, format!("seed {seed}: {e:#}\n")),
        })
        .collect();

    let mut results = Vec::new();
    let mut timings = Vec::new();
    for (result, timing, log) in outcomes {
        std::fs::write(base.join(format!("logs/seed-{}.log", result.seed)), log)?;
        if let Some(t) = timing {
            timings.push(t);
        }
        results.push(result);
    }

    let aggregate = json!({
        "seeds_total": results.len(),
        "seeds_failed": results.iter().filter(|r| r.error.is_some()).count(),
        "mean_precision": mean_of(results.iter().filter_map(|r| r.edge_precision)),
        "mean_recall": mean_of(results.iter().filter_map(|r| r.edge_recall)),
        "exact_recovery_fraction": mean_of(
            results.iter().filter_map(|r| r.exact_recovery.map(|b| f64::from(b as u8)))
        ),
        "mean_coupling_max_err": mean_of(results.iter().filter_map(|r| r.coupling_max_err)),
        "mean_field_max_err": mean_of(results.iter().filter_map(|r| r.field_max_err)),
    });
    let report = json!({
        "seeds": cfg.seeds,
        "results": results,
        "aggregate": aggregate,
        "timing": timings,
    });

    std::fs::write(
        base.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    std::fs::write(base.join("report.csv"), results_csv(&results))?;
    Ok(RunOutput { results })
}

/// Plot-data CSV derived from the JSON results (JSON stays authoritative).
pub fn results_csv(results: &[SeedResult]) -> String {
    let mut out = String::from(
        "seed,edge_precision,edge_recall,exact_recovery,coupling_max_err,field_max_err,flips,error\n",
    );
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.seed,
            fmt(r.edge_precision),
            fmt(r.edge_recall),
            r.exact_recovery.map(|b| b.to_string()).unwrap_or_default(),
            fmt(r.coupling_max_err),
            fmt(r.field_max_err),
            r.flips.map(|f| f.to_string()).unwrap_or_default(),
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    out
}

/// Loader used by tests and external tooling: the CSV round-trips back into
/// the same per-seed results the JSON carries.
pub fn parse_results_csv(text: &str) -> Result<Vec<SeedResult>> {
    let mut lines = text.lines();
    let header = lines.next().context("empty CSV")?;
    if !header.starts_with("seed,") {
        bail!("unexpected CSV header {header:?}");
    }
    let mut out = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.splitn(8, ',').collect();
        if cols.len() != 8 {
            bail!("bad CSV row {line:?}");
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            Ok(if s.is_empty() { None } else { Some(s.parse()?) })
        };
        out.push(SeedResult {
            seed: cols[0].parse()?,
            edge_precision: opt(cols[1])?,
            edge_recall: opt(cols[2])?,
            exact_recovery: if cols[3].is_empty() {
                None
            } else {
                Some(cols[3].parse()?)
            },
            coupling_max_err: opt(cols[4])?,
            field_max_err: opt(cols[5])?,
            flips: if cols[6].is_empty() {
                None
            } else {
                Some(cols[6].parse()?)
            },
            error: (!cols[7].is_empty()).then(|| cols[7].to_string()),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Threshold calibration

struct PooledStat {
    count: f64,
    sum: f64,
    sq_sum: f64,
}

impl PooledStat {
    fn new() -> Self {
        PooledStat {
            count: 0.0,
            sum: 0.0,
            sq_sum: 0.0,
        }
    }

    fn add(&mut self, value: f64, weight: f64) {
        self.count += weight;
        self.sum += value * weight;
        self.sq_sum += value * value * weight;
    }

    fn mean(&self) -> f64 {
        self.sum / self.count
    }

    fn std_error(&self) -> f64 {
        let m = self.mean();
        let var = (self.sq_sum / self.count - m * m).max(0.0);
        (var / self.count).sqrt()
    }

    fn summary(&self) -> serde_json::Value {
        json!({"observations": self.count, "mean": self.mean(), "std_error": self.std_error()})
    }
}

pub struct CalibrationOutcome {
    pub report: serde_json::Value,
    /// None when separation was insufficient (no thresholds emitted).
    pub thresholds: Option<(f64, f64)>,
}

/// Pilot-run threshold calibration: tau is the log-scale midpoint between the
/// signal-class mean and the null mean + 3 standard errors. When the null
/// upper bound is nonpositive it is clamped to signal/1000 (the rule needs a
/// positive lower anchor; anything below one resolvable count is noise).
fn log_midpoint(signal: f64, null_upper: f64) -> Option<f64> {
    if !(signal > 0.0) || signal <= null_upper {
        return None;
    }
    let lower = if null_upper > 0.0 {
        null_upper
    } else {
        signal * 1e-3
    };
    Some((0.5 * (signal.ln() + lower.ln())).exp())
}

pub fn calibrate(cfg: &ExperimentConfig, base: &Path) -> Result<CalibrationOutcome> {
    let Some(section) = &cfg.calibration else {
        bail!("config has no [calibration] section");
    };
    if section.seeds.is_empty() {
        bail!("calibration seed list is empty");
    }
    let structure = cfg
        .structure
        .as_ref()
        .context("calibration needs a [structure] section for eps/spacing")?;
    let source = cfg.model.resolve(base)?;

    // Thresholds are what we're solving for; the scan only needs the window
    // geometry, so placeholders are fine here.
    let scan_cfg = StructureConfig {
        cycle: CycleWindowConfig {
            eps: structure.eps,
            spacing: structure.spacing,
        },
        tau_bulk: 1.0,
        tau_match: 1.0,
        t_bulk: section.horizon,
        t_match: section.horizon,
        reuse_trace: true,
        min_occupancy: structure.min_occupancy,
    };
    scan_cfg.validate()?;

    let mut dense_stat = PooledStat::new();
    let mut null_bulk_stat = PooledStat::new();
    let mut matched_stat = PooledStat::new();
    let mut null_match_stat = PooledStat::new();
    let mut have_dense_pairs = false;
    let mut have_matched_pairs = false;

    type SeedScan = (Vec<(f64, f64, bool)>, Vec<(f64, bool)>, bool, bool);
    let scans: Vec<SeedScan> = section
        .seeds
        .par_iter()
        .map(|&seed| -> Result<SeedScan> {
            let model = source.model_for(seed)?;
            let truth = model.dependency_graph();
            let partition = dense_edges(&truth);
            let trace = spinflip_core::dynamics::simulate(
                &model,
                &cfg.kernel,
                &spinflip_core::dynamics::SimConfig {
                    horizon: section.horizon,
                    seed,
                    initial: cfg.sim.initial.clone(),
                },
            )?;

            // Bulk scan: per ordered pair, (sum Z, sum Z^2, is_dense); the
            // window count rides along once per pair.
            let bulk = find_bulk_edges(&trace, &scan_cfg)?;
            let acc = &bulk.accumulator;
            let windows = acc.windows as f64;
            let mut bulk_obs = Vec::new();
            let mut saw_dense = false;
            for i in 0..model.n() {
                for j in 0..model.n() {
                    if i == j {
                        continue;
                    }
                    let (a, b) = (i.min(j), i.max(j));
                    let class = if partition.dense.contains(&(a, b)) {
                        saw_dense = true;
                        Some(true)
                    } else if !truth.has_edge(i, j) {
                        Some(false)
                    } else {
                        None // matching edges are out of scope for tau_bulk
                    };
                    if let Some(is_dense) = class {
                        bulk_obs.push((
                            acc.sum(i, j) as f64 / windows.max(1.0),
                            acc.sq_sum(i, j) as f64 / windows.max(1.0),
                            is_dense,
                        ));
                    }
                }
            }

            // Matching scan over vertices outside dense components.
            let dense_vertices: BTreeSet<usize> = partition
                .dense
                .iter()
                .flat_map(|&(i, j)| [i, j])
                .collect();
            let candidates: BTreeSet<usize> = (0..model.n())
                .filter(|v| !dense_vertices.contains(v))
                .collect();
            let matching = find_matching(&trace, &candidates, &scan_cfg)?;
            let mut match_obs = Vec::new();
            let mut saw_matched = false;
            for c in &matching.diagnostics {
                let is_matched = partition.isolated_matching.contains(&(c.i, c.j));
                if is_matched {
                    saw_matched = true;
                } else if truth.has_edge(c.i, c.j) {
                    continue;
                }
                for d in [c.diff_ij, c.diff_ji].into_iter().flatten() {
                    match_obs.push((d, is_matched));
                }
            }
            Ok((bulk_obs, match_obs, saw_dense, saw_matched))
        })
        .collect::<Result<_>>()?;

    // Window counts are identical across pairs within a seed, so per-window
    // pooling weights each pair observation by 1 (means already per-window).
    for (bulk_obs, match_obs, saw_dense, saw_matched) in scans {
        have_dense_pairs |= saw_dense;
        have_matched_pairs |= saw_matched;
        for (mean, sq_mean, is_dense) in bulk_obs {
            let stat = if is_dense {
                &mut dense_stat
            } else {
                &mut null_bulk_stat
            };
            // fold the per-window second moment into the pooled one
            stat.count += 1.0;
            stat.sum += mean;
            stat.sq_sum += sq_mean;
        }
        for (diff, is_matched) in match_obs {
            if is_matched {
                matched_stat.add(diff, 1.0);
            } else {
                null_match_stat.add(diff, 1.0);
            }
        }
    }

    if !have_dense_pairs {
        bail!("pilot models contain no dense edges; calibration needs both classes");
    }
    if null_bulk_stat.count == 0.0 {
        bail!("pilot models contain no non-adjacent pairs; calibration needs both classes");
    }

    let dense_mean = dense_stat.mean();
    let null_bulk_upper = null_bulk_stat.mean() + 3.0 * null_bulk_stat.std_error();
    let tau_bulk = log_midpoint(dense_mean, null_bulk_upper);

    let (tau_match, matched_summary, null_match_upper) = if have_matched_pairs
        && null_match_stat.count > 0.0
    {
        let upper = null_match_stat.mean() + 3.0 * null_match_stat.std_error();
        (
            log_midpoint(matched_stat.mean(), upper),
            Some(matched_stat.summary()),
            Some(upper),
        )
    } else {
        (None, None, None)
    };

    let mut failures = Vec::new();
    if tau_bulk.is_none() {
        failures.push(format!(
            "dense-edge mean {dense_mean:.3e} does not exceed null mean + 3 SE = {null_bulk_upper:.3e}; \
             no tau_bulk separates the classes at this horizon"
        ));
    }
    let need_match = have_matched_pairs;
    if need_match && tau_match.is_none() {
        failures.push(
            "matched-pair conditional differences do not exceed the null + 3 SE".to_string(),
        );
    }

    let success = failures.is_empty();
    let report = json!({
        "tau_bulk": if success { tau_bulk } else { None },
        "tau_match": if success { tau_match } else { None },
        "failure": if success { None } else { Some(failures.join("; ")) },
        "distributions": {
            "dense": dense_stat.summary(),
            "null_bulk": null_bulk_stat.summary(),
            "null_bulk_upper": null_bulk_upper,
            "matched": matched_summary,
            "null_match": (null_match_stat.count > 0.0).then(|| null_match_stat.summary()),
            "null_match_upper": null_match_upper,
        },
        "pilot": {"horizon": cfg.calibration.as_ref().unwrap().horizon, "seeds": section.seeds},
    });
    let thresholds = if success {
        // tau_match defaults to tau_bulk's scale only when no matching class
        // exists; callers without matchings never consult it.
        Some((tau_bulk.unwrap(), tau_match.unwrap_or(f64::INFINITY)))
    } else {
        None
    };
    Ok(CalibrationOutcome { report, thresholds })
}

// ---------------------------------------------------------------------------
// Oracle check

pub struct OracleCheckOutcome {
    pub report: serde_json::Value,
    pub pass: bool,
}

fn push_check(
    checks: &mut Vec<serde_json::Value>,
    name: &str,
    kernel: &Kernel,
    max_error: f64,
    tolerance: f64,
) -> bool {
    let pass = max_error <= tolerance;
    checks.push(json!({
        "name": name,
        "kernel": kernel,
        "max_error": max_error,
        "tolerance": tolerance,
        "pass": pass,
    }));
    pass
}

/// Runs the full oracle suite on one model for each requested kernel.
pub fn oracle_check(model: &IsingModel, kernels: &[Kernel]) -> Result<OracleCheckOutcome> {
    if model.n() > MAX_BALANCE_N {
        bail!(
            "oracle check needs n <= {MAX_BALANCE_N} (enumerates all {} configurations)",
            1u64 << model.n().min(63)
        );
    }
    let bounds = model.measured_bounds();
    let mut checks = Vec::new();
    let mut pass = true;

    for kernel in kernels {
        kernel.validate()?;
        pass &= push_check(
            &mut checks,
            "detailed_balance",
            kernel,
            check_detailed_balance(model, kernel)?,
            1e-12,
        );

        let mut max_kernel_err = 0.0f64;
        for idx in 0..1usize << model.n() {
            let config = SpinConfig::from_index(model.n(), idx);
            for i in 0..model.n() {
                let exact = exact_kernel(model, kernel, &config, i)?;
                let local = flip_probability(model, kernel, &config, i)?;
                max_kernel_err = max_kernel_err.max((exact - local).abs());
            }
        }
        pass &= push_check(&mut checks, "kernel_equivalence", kernel, max_kernel_err, 1e-12);

        if model.n() >= 2 {
            let marginal = pair_marginal(model, 0, 1)?;
            let err = (marginal.iter().sum::<f64>() - 1.0).abs();
            pass &= push_check(&mut checks, "pair_marginal_normalized", kernel, err, 1e-12);
        }

        let profile = kernel_profile(kernel, &bounds);
        let mut max_z_err = 0.0f64;
        for alpha in [0.2, 0.5, 1.0, 2.0] {
            let numeric = z_star_numeric(&profile, alpha)?;
            max_z_err = max_z_err.max((numeric - profile.z_star(alpha)).abs());
        }
        pass &= push_check(&mut checks, "z_star_closed_form", kernel, max_z_err, 1e-10);

        let mut max_coupling_err = 0.0f64;
        for (i, j, a_ij) in model.couplings() {
            let mut rates = [[0.0f64; 2]; 2];
            for (bi, x_i) in [-1i8, 1].iter().enumerate() {
                for (bj, x_j) in [-1i8, 1].iter().enumerate() {
                    let mut config = SpinConfig::all_plus(model.n());
                    config.set(i, *x_i);
                    config.set(j, *x_j);
                    rates[bi][bj] = exact_kernel(model, kernel, &config, i)?;
                }
            }
            let a_hat =
                coupling_ratio(|x_i, x_j| rates[(x_i > 0) as usize][(x_j > 0) as usize]);
            max_coupling_err = max_coupling_err.max((a_hat - a_ij).abs());
        }
        pass &= push_check(
            &mut checks,
            "coupling_identity_exact_rates",
            kernel,
            max_coupling_err,
            1e-12,
        );
    }

    let report = json!({
        "n": model.n(),
        "bounds": {"d": bounds.d, "lambda": bounds.lambda, "alpha": bounds.alpha},
        "checks": checks,
        "pass": pass,
    });
    Ok(OracleCheckOutcome { report, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn edge_metrics_cases() {
        let truth = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let exact = edge_metrics(&truth, &truth.clone());
        assert_eq!(exact.precision, 1.0);
        assert_eq!(exact.recall, 1.0);
        assert!(exact.exact_recovery);

        let partial = Graph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        let m = edge_metrics(&truth, &partial);
        assert_abs_diff_eq!(m.precision, 0.5);
        assert_abs_diff_eq!(m.recall, 0.5);
        assert!(!m.exact_recovery);

        // empty-vs-empty is exact by convention
        let none = Graph::empty(4);
        let m = edge_metrics(&none, &Graph::empty(4));
        assert_eq!((m.precision, m.recall, m.exact_recovery), (1.0, 1.0, true));
    }

    #[test]
    fn coupling_error_covers_spurious_and_missing() {
        let truth = IsingModel::new(3, vec![(0, 1, 0.4)], vec![0.0; 3]).unwrap();
        let mut est = BTreeMap::new();
        est.insert((1, 2), 0.1); // spurious
        assert_abs_diff_eq!(coupling_max_error(&truth, &est), 0.4); // missing (0,1)
        est.insert((0, 1), 0.35);
        assert_abs_diff_eq!(coupling_max_error(&truth, &est), 0.1);
    }

    #[test]
    fn csv_round_trips() {
        let results = vec![
            SeedResult {
                seed: 7,
                error: None,
                flips: Some(1234),
                edge_precision: Some(1.0),
                edge_recall: Some(0.5),
                exact_recovery: Some(false),
                coupling_max_err: Some(0.03125),
                field_max_err: None,
            },
            SeedResult::failed(8, &anyhow::anyhow!("boom, with a comma")),
        ];
        let text = results_csv(&results);
        let parsed = parse_results_csv(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].seed, 7);
        assert_eq!(parsed[0].coupling_max_err, Some(0.03125));
        assert_eq!(parsed[0].field_max_err, None);
        assert_eq!(parsed[1].error.as_deref(), Some("boom; with a comma"));
    }

    #[test]
    fn log_midpoint_rule() {
        // strictly between the two anchors, in log scale
        let tau = log_midpoint(1e-4, 1e-8).unwrap();
        assert_abs_diff_eq!(tau, 1e-6, epsilon = 1e-18);
        // no separation -> no threshold
        assert!(log_midpoint(1e-8, 1e-4).is_none());
        assert!(log_midpoint(0.0, 0.0).is_none());
        // nonpositive null bound clamps to signal/1000
        let tau = log_midpoint(8e-3, -1.0).unwrap();
        assert!(tau > 0.0 && tau < 8e-3);
    }

    #[test]
    fn oracle_check_passes_on_small_model() {
        let model = IsingModel::new(
            3,
            vec![(0, 1, 0.5), (1, 2, -0.3)],
            vec![0.1, 0.0, -0.2],
        )
        .unwrap();
        let kernels = [
            Kernel::Glauber,
            Kernel::Metropolis {
                r_plus: 0.7,
                r_minus: 1.0,
            },
        ];
        let outcome = oracle_check(&model, &kernels).unwrap();
        assert!(outcome.pass, "{}", outcome.report);
        // 5 checks per kernel
        assert_eq!(outcome.report["checks"].as_array().unwrap().len(), 10);
    }
}
