//! Structure learning from flip-only traces.
//!
//! Phase one scans degree-8 cycle statistics Z over spaced windows to find
//! dense edges; phase two recovers the residual isolated matching from
//! occupation-time conditionals over the leftover vertices.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Graph;
use crate::trace::FlipTrace;

/// The three degree-8 flip patterns entering Z, as label sequences over the
/// ordered pair (first site, second site), with their coefficients:
/// Z = 1{iijjiijj} - 2 * 1{iijjjiij} + 1{jiijjiij}.
const PATTERNS: [([u8; 8], i64); 3] = [
    ([0, 0, 1, 1, 0, 0, 1, 1], 1),
    ([0, 0, 1, 1, 1, 0, 0, 1], -2),
    ([1, 0, 0, 1, 1, 0, 0, 1], 1),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleWindowConfig {
    /// Sub-interval length; a window spans 8*eps.
    pub eps: f64,
    /// Time between window starts (windows begin at spacing * l, l >= 1).
    pub spacing: f64,
}

impl CycleWindowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.spacing >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "window spacing must be >= 1, got {}",
                self.spacing
            )));
        }
        if !(8.0 * self.eps < self.spacing && 8.0 * self.eps < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 8*eps < min(spacing, 1); eps = {}, spacing = {}",
                self.eps, self.spacing
            )));
        }
        Ok(())
    }
}

/// Default eps = min(0.05, 0.5/d), honoring eps << 1/d.
pub fn default_eps(d: usize) -> f64 {
    (0.5 / d.max(1) as f64).min(0.05)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureConfig {
    pub cycle: CycleWindowConfig,
    /// Acceptance threshold on the per-pair mean of Z (calibrated; the
    /// worst-case closed-form thresholds carry unusable constants).
    pub tau_bulk: f64,
    /// Threshold on the occupation-time conditional difference.
    pub tau_match: f64,
    pub t_bulk: f64,
    pub t_match: f64,
    /// Run the matching phase on [0, t_match] of the same trace instead of
    /// the tail beyond t_bulk.
    pub reuse_trace: bool,
    /// Occupancy-fraction floor below which a conditional is indeterminate.
    pub min_occupancy: f64,
}

impl StructureConfig {
    pub fn validate(&self) -> Result<()> {
        self.cycle.validate()?;
        if !(self.tau_bulk > 0.0 && self.tau_match > 0.0) {
            return Err(Error::InvalidConfig("thresholds must be positive".into()));
        }
        if !(self.t_bulk > 0.0 && self.t_match > 0.0) {
            return Err(Error::InvalidConfig("phase horizons must be positive".into()));
        }
        if !(self.min_occupancy >= 0.0) {
            return Err(Error::InvalidConfig("min_occupancy must be nonnegative".into()));
        }
        Ok(())
    }

    fn match_window(&self, trace: &FlipTrace) -> Result<(f64, f64)> {
        let start = if self.reuse_trace { 0.0 } else { self.t_bulk };
        let end = start + self.t_match;
        if end > trace.horizon() {
            return Err(Error::HorizonTooShort {
                needed: end,
                horizon: trace.horizon(),
            });
        }
        Ok((start, end))
    }
}

fn parse_pattern(pattern: &str) -> Result<[u8; 8]> {
    let bytes = pattern.as_bytes();
    if bytes.len() != 8 {
        return Err(Error::InvalidConfig(format!(
            "pattern must have length 8, got {:?}",
            pattern
        )));
    }
    let mut out = [0u8; 8];
    for (k, &b) in bytes.iter().enumerate() {
        out[k] = match b {
            b'i' => 0,
            b'j' => 1,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "pattern may contain only 'i'/'j', got {:?}",
                    pattern
                )))
            }
        };
    }
    Ok(out)
}

/// 1 iff in each sub-interval (t + (k-1) eps, t + k eps] the site named by
/// pattern_k flips exactly once and the other site not at all. Consults only
/// flips of i and j.
pub fn flip_sequence_indicator(
    trace: &FlipTrace,
    i: usize,
    j: usize,
    t: f64,
    eps: f64,
    pattern: &str,
) -> Result<u8> {
    if i == j {
        return Err(Error::InvalidConfig("pair sites must differ".into()));
    }
    let labels = parse_pattern(pattern)?;
    if t + 8.0 * eps > trace.horizon() {
        return Err(Error::HorizonTooShort {
            needed: t + 8.0 * eps,
            horizon: trace.horizon(),
        });
    }
    for (k, &label) in labels.iter().enumerate() {
        let a = t + k as f64 * eps;
        let b = a + eps;
        let (flipper, other) = if label == 0 { (i, j) } else { (j, i) };
        if trace.flip_count(flipper, a, b)? != 1 || trace.flip_count(other, a, b)? != 0 {
            return Ok(0);
        }
    }
    Ok(1)
}

/// Z for the ordered pair (i,j) at window start t; in {-2, 0, 1} (the three
/// patterns are mutually exclusive).
pub fn cycle_statistic(trace: &FlipTrace, i: usize, j: usize, t: f64, eps: f64) -> Result<i64> {
    let mut z = 0i64;
    for (labels, coeff) in PATTERNS {
        let pattern: String = labels.iter().map(|&l| if l == 0 { 'i' } else { 'j' }).collect();
        z += coeff * i64::from(flip_sequence_indicator(trace, i, j, t, eps, &pattern)?);
    }
    Ok(z)
}

/// Per-ordered-pair running sums of Z over the window grid.
#[derive(Clone, Debug)]
pub struct CycleAccumulator {
    n: usize,
    /// Shared window count (identical for every pair).
    pub windows: u64,
    /// Row-major ordered-pair (i*n + j) sums of Z and Z^2.
    sums: Vec<i64>,
    sq_sums: Vec<i64>,
}

impl CycleAccumulator {
    fn new(n: usize, windows: u64) -> Self {
        CycleAccumulator {
            n,
            windows,
            sums: vec![0; n * n],
            sq_sums: vec![0; n * n],
        }
    }

    pub fn sum(&self, i: usize, j: usize) -> i64 {
        self.sums[i * self.n + j]
    }

    /// Sum of Z^2 over windows, for pooling variances across pairs or runs.
    pub fn sq_sum(&self, i: usize, j: usize) -> i64 {
        self.sq_sums[i * self.n + j]
    }

    pub fn mean(&self, i: usize, j: usize) -> f64 {
        self.sum(i, j) as f64 / self.windows as f64
    }

    /// Standard error of the per-window mean.
    pub fn std_error(&self, i: usize, j: usize) -> f64 {
        let m = self.windows as f64;
        let mean = self.mean(i, j);
        let var = (self.sq_sums[i * self.n + j] as f64 / m - mean * mean).max(0.0);
        (var / m).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct BulkResult {
    pub graph: Graph,
    pub accumulator: CycleAccumulator,
}

/// Per-site events bucketed into windows: (window index, position of the
/// first event in the site's sorted list, number of events in the window).
fn bucket_site_events(
    times: &[f64],
    cfg: &CycleWindowConfig,
    windows: u64,
) -> Vec<(u64, u32, u32)> {
    let mut out: Vec<(u64, u32, u32)> = Vec::new();
    let width = 8.0 * cfg.eps;
    for (pos, &t) in times.iter().enumerate() {
        let l = (t / cfg.spacing).floor() as u64;
        if l < 1 || l > windows {
            continue;
        }
        let start = l as f64 * cfg.spacing;
        // half-open (start, start + 8 eps]
        if !(t > start && t <= start + width) {
            continue;
        }
        match out.last_mut() {
            Some(entry) if entry.0 == l => entry.2 += 1,
            _ => out.push((l, pos as u32, 1)),
        }
    }
    out
}

/// Alg.-1-style dense-edge detection: average Z over windows for every
/// ordered pair, accept if the mean reaches tau_bulk, then symmetrize by
/// accepting {i,j} when either direction accepts.
///
/// The scan is near-linear in the number of flips: a window can contribute
/// only when both sites flip exactly 4 times inside it, so candidate windows
/// come from intersecting per-site window buckets.
pub fn find_bulk_edges(trace: &FlipTrace, cfg: &StructureConfig) -> Result<BulkResult> {
    cfg.validate()?;
    if cfg.t_bulk > trace.horizon() {
        return Err(Error::HorizonTooShort {
            needed: cfg.t_bulk,
            horizon: trace.horizon(),
        });
    }
    let windows = ((cfg.t_bulk - 8.0 * cfg.cycle.eps) / cfg.cycle.spacing).floor() as u64;
    if windows < 1 {
        return Err(Error::HorizonTooShort {
            needed: cfg.cycle.spacing + 8.0 * cfg.cycle.eps,
            horizon: cfg.t_bulk,
        });
    }
    let n = trace.n();
    let buckets: Vec<Vec<(u64, u32, u32)>> = (0..n)
        .map(|s| bucket_site_events(trace.site_events(s), &cfg.cycle, windows))
        .collect();

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    // (i, j, z_ij, z_ji) contributions per unordered pair
    let contributions: Vec<(usize, usize, Vec<(i64, i64)>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut zs = Vec::new();
            let (bi, bj) = (&buckets[i], &buckets[j]);
            let (mut ki, mut kj) = (0usize, 0usize);
            while ki < bi.len() && kj < bj.len() {
                let (li, pi, ci) = bi[ki];
                let (lj, pj, cj) = bj[kj];
                if li < lj {
                    ki += 1;
                } else if lj < li {
                    kj += 1;
                } else {
                    if ci == 4 && cj == 4 {
                        let start = li as f64 * cfg.cycle.spacing;
                        if let Some(labels) = window_labels(
                            &trace.site_events(i)[pi as usize..pi as usize + 4],
                            &trace.site_events(j)[pj as usize..pj as usize + 4],
                            start,
                            cfg.cycle.eps,
                        ) {
                            let mut z_ij = 0i64;
                            let mut z_ji = 0i64;
                            for (pat, coeff) in PATTERNS {
                                if labels == pat {
                                    z_ij += coeff;
                                }
                                let swapped: [u8; 8] = pat.map(|l| 1 - l);
                                if labels == swapped {
                                    z_ji += coeff;
                                }
                            }
                            if z_ij != 0 || z_ji != 0 {
                                zs.push((z_ij, z_ji));
                            }
                        }
                    }
                    ki += 1;
                    kj += 1;
                }
            }
            (i, j, zs)
        })
        .collect();

    let mut acc = CycleAccumulator::new(n, windows);
    for (i, j, zs) in contributions {
        for (z_ij, z_ji) in zs {
            acc.sums[i * n + j] += z_ij;
            acc.sq_sums[i * n + j] += z_ij * z_ij;
            acc.sums[j * n + i] += z_ji;
            acc.sq_sums[j * n + i] += z_ji * z_ji;
        }
    }

    let mut graph = Graph::empty(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && acc.mean(i, j) >= cfg.tau_bulk {
                graph.add_edge(i, j)?;
            }
        }
    }
    Ok(BulkResult {
        graph,
        accumulator: acc,
    })
}

/// Label sequence of a candidate window holding exactly 4 flips of each site:
/// Some(labels) if every sub-interval (start + k eps, start + (k+1) eps]
/// contains exactly one of the 8 flips, with label 0 for the first site.
fn window_labels(times_i: &[f64], times_j: &[f64], start: f64, eps: f64) -> Option<[u8; 8]> {
    debug_assert_eq!(times_i.len(), 4);
    debug_assert_eq!(times_j.len(), 4);
    let mut labels = [0u8; 8];
    let (mut ki, mut kj) = (0usize, 0usize);
    for (k, label) in labels.iter_mut().enumerate() {
        let a = start + k as f64 * eps;
        let b = a + eps;
        let in_window = |t: f64| t > a && t <= b;
        let next_i = times_i.get(ki).copied();
        let next_j = times_j.get(kj).copied();
        match (next_i.filter(|&t| in_window(t)), next_j.filter(|&t| in_window(t))) {
            (Some(_), None) => {
                *label = 0;
                ki += 1;
            }
            (None, Some(_)) => {
                *label = 1;
                kj += 1;
            }
            // zero or two flips in this sub-interval
            _ => return None,
        }
    }
    // all 8 flips must have been consumed one per sub-interval
    (ki == 4 && kj == 4).then_some(labels)
}

#[derive(Clone, Debug)]
pub struct PairConditionals {
    pub i: usize,
    pub j: usize,
    /// |P(X_i=+ | X_j=+) - P(X_i=+ | X_j=-)|; None when a denominator is
    /// below the occupancy floor.
    pub diff_ij: Option<f64>,
    /// Same with roles of i and j swapped.
    pub diff_ji: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MatchingResult {
    pub edges: BTreeSet<(usize, usize)>,
    /// Pairs where no direction was decidable and none accepted.
    pub indeterminate: Vec<(usize, usize)>,
    pub diagnostics: Vec<PairConditionals>,
}

/// Alg.-2-style matching recovery over the isolated vertices: accept a pair
/// when the occupation-time conditional difference reaches tau_match in
/// either direction. Near-zero denominators make a direction indeterminate
/// rather than silently voting no.
pub fn find_matching(
    trace: &FlipTrace,
    isolated: &BTreeSet<usize>,
    cfg: &StructureConfig,
) -> Result<MatchingResult> {
    cfg.validate()?;
    let (start, end) = cfg.match_window(trace)?;
    let sites: Vec<usize> = isolated.iter().copied().collect();
    let mut result = MatchingResult {
        edges: BTreeSet::new(),
        indeterminate: Vec::new(),
        diagnostics: Vec::new(),
    };
    let stats: Vec<PairConditionals> = sites
        .par_iter()
        .enumerate()
        .flat_map_iter(|(a, &i)| {
            let sites = &sites;
            sites[a + 1..].iter().map(move |&j| {
                let p = trace
                    .occupation_time_window(i, j, start, end)
                    .expect("window validated above");
                let cond = |num: f64, den: f64| {
                    (den >= cfg.min_occupancy).then(|| num / den)
                };
                let diff_ij = match (cond(p[0], p[0] + p[2]), cond(p[1], p[1] + p[3])) {
                    (Some(x), Some(y)) => Some((x - y).abs()),
                    _ => None,
                };
                let diff_ji = match (cond(p[0], p[0] + p[1]), cond(p[2], p[2] + p[3])) {
                    (Some(x), Some(y)) => Some((x - y).abs()),
                    _ => None,
                };
                PairConditionals { i, j, diff_ij, diff_ji }
            })
        })
        .collect();
    for s in stats {
        let accept = [s.diff_ij, s.diff_ji]
            .iter()
            .flatten()
            .any(|&d| d >= cfg.tau_match);
        if accept {
            result.edges.insert((s.i, s.j));
        } else if s.diff_ij.is_none() || s.diff_ji.is_none() {
            result.indeterminate.push((s.i, s.j));
        }
        result.diagnostics.push(s);
    }
    Ok(result)
}

#[derive(Clone, Debug)]
pub struct StructureResult {
    pub graph: Graph,
    pub bulk: BulkResult,
    pub matching: MatchingResult,
}

/// Full pipeline: dense edges from cycle statistics, then matching recovery
/// over the vertices the first phase left isolated.
pub fn learn_structure(trace: &FlipTrace, cfg: &StructureConfig) -> Result<StructureResult> {
    let bulk = find_bulk_edges(trace, cfg)?;
    let isolated: BTreeSet<usize> = (0..trace.n())
        .filter(|&v| bulk.graph.degree(v) == 0)
        .collect();
    let matching = find_matching(trace, &isolated, cfg)?;
    let mut graph = bulk.graph.clone();
    for &(i, j) in &matching.edges {
        graph.add_edge(i, j)?;
    }
    Ok(StructureResult {
        graph,
        bulk,
        matching,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spins::SpinConfig;
    use crate::trace::FlipEvent;

    fn trace_of(n: usize, horizon: f64, events: &[(f64, u32)]) -> FlipTrace {
        FlipTrace::new(
            n,
            horizon,
            SpinConfig::all_plus(n),
            events
                .iter()
                .map(|&(time, site)| FlipEvent { time, site })
                .collect(),
        )
        .unwrap()
    }

    /// Events realizing a pattern for pair (0,1) in the window starting at t.
    fn pattern_events(t: f64, eps: f64, labels: [u8; 8]) -> Vec<(f64, u32)> {
        labels
            .iter()
            .enumerate()
            .map(|(k, &l)| (t + (k as f64 + 0.5) * eps, u32::from(l)))
            .collect()
    }

    #[test]
    fn indicator_positive_and_negative_cases() {
        let eps = 0.1;
        let t = 2.0;
        let tr = trace_of(3, 10.0, &pattern_events(t, eps, [0, 0, 1, 1, 0, 0, 1, 1]));
        assert_eq!(flip_sequence_indicator(&tr, 0, 1, t, eps, "iijjiijj").unwrap(), 1);
        assert_eq!(flip_sequence_indicator(&tr, 0, 1, t, eps, "jiijjiij").unwrap(), 0);

        // a third site's flip inside the window changes nothing
        let mut ev = pattern_events(t, eps, [0, 0, 1, 1, 0, 0, 1, 1]);
        ev.push((t + 0.55 * eps, 2));
        ev.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tr2 = trace_of(3, 10.0, &ev);
        assert_eq!(flip_sequence_indicator(&tr2, 0, 1, t, eps, "iijjiijj").unwrap(), 1);
    }

    #[test]
    fn cycle_statistic_values() {
        let eps = 0.1;
        let t = 2.0;
        for (labels, expected) in [
            ([0, 0, 1, 1, 0, 0, 1, 1], 1i64),
            ([0, 0, 1, 1, 1, 0, 0, 1], -2),
            ([1, 0, 0, 1, 1, 0, 0, 1], 1),
        ] {
            let tr = trace_of(2, 10.0, &pattern_events(t, eps, labels));
            assert_eq!(cycle_statistic(&tr, 0, 1, t, eps).unwrap(), expected);
        }
        let quiet = trace_of(2, 10.0, &[]);
        assert_eq!(cycle_statistic(&quiet, 0, 1, 2.0, eps).unwrap(), 0);
    }

    #[test]
    fn scan_matches_naive_window_loop() {
        // a trace with several planted windows, some valid, some spoiled
        let eps = 0.1;
        let mut events = Vec::new();
        events.extend(pattern_events(2.0, eps, [0, 0, 1, 1, 0, 0, 1, 1]));
        events.extend(pattern_events(4.0, eps, [0, 0, 1, 1, 1, 0, 0, 1]));
        // matches iijjiijj from the swapped (1,0) viewpoint
        events.extend(pattern_events(6.0, eps, [1, 1, 0, 0, 1, 1, 0, 0]));
        // spoiled: double flip in one sub-interval
        events.extend(pattern_events(8.0, eps, [0, 0, 1, 1, 0, 0, 1, 1]));
        events.push((8.0 + 0.52 * eps, 1));
        // outside any window
        events.push((3.1, 0));
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tr = trace_of(2, 25.0, &events);
        let cfg = StructureConfig {
            cycle: CycleWindowConfig { eps, spacing: 2.0 },
            tau_bulk: 1e9, // acceptance not under test here
            tau_match: 0.2,
            t_bulk: 25.0,
            t_match: 25.0,
            reuse_trace: true,
            min_occupancy: 0.0,
        };
        let bulk = find_bulk_edges(&tr, &cfg).unwrap();
        let windows = bulk.accumulator.windows;
        let mut naive_ij = 0i64;
        let mut naive_ji = 0i64;
        for l in 1..=windows {
            let t = l as f64 * 2.0;
            naive_ij += cycle_statistic(&tr, 0, 1, t, eps).unwrap();
            naive_ji += cycle_statistic(&tr, 1, 0, t, eps).unwrap();
        }
        assert_eq!(naive_ij, 1 - 2); // +1 at t=2, -2 at t=4
        assert_eq!(naive_ji, 1); // +1 at t=6 in the swapped direction
        assert_eq!(bulk.accumulator.sum(0, 1), naive_ij);
        assert_eq!(bulk.accumulator.sum(1, 0), naive_ji);
    }

    #[test]
    fn accumulator_windows_count() {
        let tr = trace_of(2, 100.0, &[]);
        let cfg = StructureConfig {
            cycle: CycleWindowConfig {
                eps: 0.05,
                spacing: 2.0,
            },
            tau_bulk: 0.1,
            tau_match: 0.2,
            t_bulk: 100.0,
            t_match: 100.0,
            reuse_trace: true,
            min_occupancy: 0.0,
        };
        let bulk = find_bulk_edges(&tr, &cfg).unwrap();
        assert_eq!(
            bulk.accumulator.windows,
            ((100.0 - 0.4) / 2.0) as u64
        );
        assert_eq!(bulk.graph.edge_count(), 0);
    }

    #[test]
    fn matching_accepts_correlated_pair_only() {
        use crate::dynamics::{simulate, InitialState, Kernel, SimConfig};
        use crate::model::IsingModel;
        // planted matching {0,1}, plus free site 2
        let m = IsingModel::new(3, [(0, 1, 0.5)], vec![0.0; 3]).unwrap();
        let tr = simulate(
            &m,
            &Kernel::Glauber,
            &SimConfig {
                horizon: 5000.0,
                seed: 5,
                initial: InitialState::AllPlus,
            },
        )
        .unwrap();
        let cfg = StructureConfig {
            cycle: CycleWindowConfig {
                eps: 0.05,
                spacing: 2.0,
            },
            tau_bulk: 0.1,
            tau_match: 0.25,
            t_bulk: 100.0,
            t_match: 5000.0,
            reuse_trace: true,
            min_occupancy: 0.01,
        };
        let isolated = BTreeSet::from([0, 1, 2]);
        let res = find_matching(&tr, &isolated, &cfg).unwrap();
        assert_eq!(res.edges, BTreeSet::from([(0, 1)]));
        assert!(res.indeterminate.is_empty());
    }
}
