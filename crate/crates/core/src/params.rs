//! Parameter learning given the dependency graph: occupancy/flip counting at
//! spaced sample times, rate estimation, reversibility-ratio coupling
//! recovery, and external-field recovery.
//!
//! The engine is the detailed-balance identity: the ratio of i's flip rates
//! at configurations differing only in x_i equals the stationary ratio
//! exp(2 sum_k A_ik x_k + 2 h_i), for any reversible kernel. Differencing
//! that log-ratio across x_j isolates 4 A_ij.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Graph;
use crate::trace::FlipTrace;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamConfig {
    /// Window length for "exactly one flip" rate estimation.
    pub eps_rate: f64,
    /// Sample times are spacing * l.
    pub spacing: f64,
    pub t_param: f64,
    /// Per-configuration occupancy floor standing in for the theoretical
    /// sample-count bound, whose constants are not usable directly.
    pub min_samples: u64,
    /// Average coupling estimates over all qualifying subcubes (weighted by
    /// flip support) instead of only the single best one.
    pub pool_subcubes: bool,
}

impl ParamConfig {
    pub fn new(t_param: f64, d: usize) -> Self {
        ParamConfig {
            eps_rate: (0.5 / d.max(1) as f64).min(0.05),
            spacing: 2.0,
            t_param,
            min_samples: 200,
            pool_subcubes: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_rate > 0.0 && self.eps_rate < self.spacing) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < eps_rate < spacing; eps_rate = {}, spacing = {}",
                self.eps_rate, self.spacing
            )));
        }
        if self.min_samples < 1 {
            return Err(Error::InvalidConfig("min_samples must be >= 1".into()));
        }
        if !(self.t_param > 0.0) {
            return Err(Error::InvalidConfig("t_param must be positive".into()));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> u64 {
        ((self.t_param - self.eps_rate) / self.spacing).floor() as u64
    }
}

const DENSE_CAP: usize = 20;
const MAX_MEMBERS: usize = 63;

enum CountMap {
    Dense(Vec<(u64, u64)>),
    Sparse(HashMap<u64, (u64, u64)>),
}

impl CountMap {
    fn new(k: usize) -> Self {
        if k <= DENSE_CAP {
            CountMap::Dense(vec![(0, 0); 1 << k])
        } else {
            CountMap::Sparse(HashMap::new())
        }
    }

    #[inline]
    fn bump(&mut self, key: u64, flip: bool) {
        let entry = match self {
            CountMap::Dense(v) => &mut v[key as usize],
            CountMap::Sparse(m) => m.entry(key).or_insert((0, 0)),
        };
        entry.0 += 1;
        entry.1 += u64::from(flip);
    }

    fn get(&self, key: u64) -> (u64, u64) {
        match self {
            CountMap::Dense(v) => v.get(key as usize).copied().unwrap_or((0, 0)),
            CountMap::Sparse(m) => m.get(&key).copied().unwrap_or((0, 0)),
        }
    }
}

/// Per-site occupancy and single-flip counts keyed by the local configuration
/// over S_i = {i} ∪ N(i). Keys are packed bits in ascending member order
/// (bit b set = member b has spin +1).
pub struct NeighborhoodCounts {
    site: usize,
    members: Vec<usize>,
    site_bit: usize,
    storage: CountMap,
    samples: u64,
}

impl NeighborhoodCounts {
    pub fn site(&self) -> usize {
        self.site
    }

    /// Sorted S_i including the site itself.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        let site = self.site;
        self.members.iter().copied().filter(move |&m| m != site)
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// (N_z, N_{z,i}) for a packed local configuration.
    pub fn counts(&self, key: u64) -> (u64, u64) {
        self.storage.get(key)
    }

    fn bit_of(&self, site: usize) -> Option<usize> {
        self.members.binary_search(&site).ok()
    }
}

/// Count occupancies and exactly-one-flip events at sample times
/// t_l = spacing * l, l = 1 .. floor((t_param - eps_rate)/spacing).
pub fn collect_counts(
    trace: &FlipTrace,
    i: usize,
    neighbors: &[usize],
    cfg: &ParamConfig,
) -> Result<NeighborhoodCounts> {
    cfg.validate()?;
    if cfg.t_param > trace.horizon() {
        return Err(Error::HorizonTooShort {
            needed: cfg.t_param,
            horizon: trace.horizon(),
        });
    }
    if i >= trace.n() {
        return Err(Error::IndexOutOfRange {
            index: i,
            n: trace.n(),
        });
    }
    let mut members: Vec<usize> = neighbors.iter().copied().chain([i]).collect();
    members.sort_unstable();
    members.dedup();
    for &m in &members {
        if m >= trace.n() {
            return Err(Error::IndexOutOfRange {
                index: m,
                n: trace.n(),
            });
        }
    }
    if members.len() > MAX_MEMBERS {
        return Err(Error::InvalidConfig(format!(
            "neighborhood of site {i} has {} members; packed keys support {MAX_MEMBERS}",
            members.len()
        )));
    }
    let site_bit = members.binary_search(&i).expect("site is a member");
    let mut counts = NeighborhoodCounts {
        site: i,
        members,
        site_bit,
        storage: CountMap::new(0),
        samples: 0,
    };
    counts.storage = CountMap::new(counts.members.len());
    let samples = cfg.sample_count();
    if samples < 1 {
        return Err(Error::HorizonTooShort {
            needed: cfg.spacing + cfg.eps_rate,
            horizon: cfg.t_param,
        });
    }
    for l in 1..=samples {
        let t = cfg.spacing * l as f64;
        let mut key = 0u64;
        for (b, &m) in counts.members.iter().enumerate() {
            if trace.spin_at_unchecked(m, t) > 0 {
                key |= 1 << b;
            }
        }
        let flip = trace.flip_count(i, t, t + cfg.eps_rate)? == 1;
        counts.storage.bump(key, flip);
    }
    counts.samples = samples;
    Ok(counts)
}

/// p_hat = N_{z,i} / (eps * N_z), a (1 +- delta)-multiplicative estimate of
/// P_i(z, z^flip) for large N_z and small eps.
pub fn rate_estimate(counts: &NeighborhoodCounts, key: u64, eps_rate: f64) -> Result<f64> {
    let (n_z, n_flip) = counts.counts(key);
    if n_z == 0 {
        return Err(Error::NoOccupancy {
            site: counts.site,
            key,
        });
    }
    Ok(n_flip as f64 / (eps_rate * n_z as f64))
}

/// A subcube: assignment y to S_i \ {i,j}, identified by packed bits in
/// ascending member order (skipping i and j).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Subcube {
    pub y_bits: u64,
    /// min over the four (x_i, x_j) completions of N_z.
    pub min_occupancy: u64,
}

fn complete_key(counts: &NeighborhoodCounts, j_bit: usize, y_bits: u64, x_i: i8, x_j: i8) -> u64 {
    let mut key = 0u64;
    let mut y_pos = 0;
    for b in 0..counts.members.len() {
        let bit = if b == counts.site_bit {
            x_i > 0
        } else if b == j_bit {
            x_j > 0
        } else {
            let v = y_bits >> y_pos & 1 == 1;
            y_pos += 1;
            v
        };
        if bit {
            key |= 1 << b;
        }
    }
    key
}

/// The y maximizing the minimum occupancy over the four (x_i, x_j)
/// completions; ties broken by smallest packed-bits value.
pub fn select_subcube(
    counts: &NeighborhoodCounts,
    j: usize,
    min_samples: u64,
) -> Result<Subcube> {
    let j_bit = counts.bit_of(j).ok_or(Error::InvalidConfig(format!(
        "site {j} is not a neighbor of {}",
        counts.site
    )))?;
    let free_bits = counts.members.len() - 2;
    let mut best: Option<Subcube> = None;
    for y_bits in 0..1u64 << free_bits {
        let min_occ = SIGN_PAIRS
            .iter()
            .map(|&(x_i, x_j)| counts.counts(complete_key(counts, j_bit, y_bits, x_i, x_j)).0)
            .min()
            .unwrap();
        if best.map_or(true, |b| min_occ > b.min_occupancy) {
            best = Some(Subcube {
                y_bits,
                min_occupancy: min_occ,
            });
        }
    }
    let best = best.expect("at least the empty subcube exists");
    if best.min_occupancy < min_samples {
        return Err(Error::NoSubcube {
            i: counts.site,
            j,
            min_samples,
            best: best.min_occupancy,
        });
    }
    Ok(best)
}

const SIGN_PAIRS: [(i8, i8); 4] = [(-1, -1), (-1, 1), (1, -1), (1, 1)];

/// The coupling estimator applied to four flip rates p(x_i, x_j) of site i
/// on a subcube: (1/4) ln[ (p(-,+)/p(+,+)) / (p(-,-)/p(+,-)) ]. By
/// reversibility each inner ratio equals exp(2(c + A_ij x_j)) with c
/// independent of x_j, so the expression is exactly A_ij when fed exact
/// rates — for either kernel.
pub fn coupling_ratio(p: impl Fn(i8, i8) -> f64) -> f64 {
    let num = p(-1, 1) / p(1, 1);
    let den = p(-1, -1) / p(1, -1);
    0.25 * (num / den).ln()
}

/// A_ij estimate from one subcube via [`coupling_ratio`] on empirical rates.
fn coupling_from_subcube(
    counts: &NeighborhoodCounts,
    j: usize,
    j_bit: usize,
    y_bits: u64,
    cfg: &ParamConfig,
) -> Result<f64> {
    let rate = |x_i: i8, x_j: i8| -> Result<f64> {
        let p = rate_estimate(counts, complete_key(counts, j_bit, y_bits, x_i, x_j), cfg.eps_rate)?;
        if p == 0.0 {
            return Err(Error::ZeroRate { i: counts.site, j });
        }
        Ok(p)
    };
    let mut p = [[0.0f64; 2]; 2];
    for (a, &x_i) in [-1i8, 1].iter().enumerate() {
        for (b, &x_j) in [-1i8, 1].iter().enumerate() {
            p[a][b] = rate(x_i, x_j)?;
        }
    }
    Ok(coupling_ratio(|x_i, x_j| {
        p[(x_i > 0) as usize][(x_j > 0) as usize]
    }))
}

/// Coupling estimate via the single best subcube.
pub fn estimate_coupling(
    counts: &NeighborhoodCounts,
    i: usize,
    j: usize,
    cfg: &ParamConfig,
) -> Result<f64> {
    if i != counts.site {
        return Err(Error::InvalidConfig(format!(
            "counts are for site {}, not {i}",
            counts.site
        )));
    }
    let subcube = select_subcube(counts, j, cfg.min_samples)?;
    let j_bit = counts.bit_of(j).expect("checked by select_subcube");
    coupling_from_subcube(counts, j, j_bit, subcube.y_bits, cfg)
}

/// One directed coupling estimate with its statistical support (sum over the
/// subcubes used of their minimum single-flip counts).
#[derive(Clone, Copy, Debug)]
struct DirEstimate {
    value: f64,
    flip_support: u64,
}

fn estimate_coupling_directed(
    counts: &NeighborhoodCounts,
    j: usize,
    cfg: &ParamConfig,
) -> Result<DirEstimate> {
    let j_bit = counts.bit_of(j).ok_or(Error::InvalidConfig(format!(
        "site {j} is not a neighbor of {}",
        counts.site
    )))?;
    if !cfg.pool_subcubes {
        let subcube = select_subcube(counts, j, cfg.min_samples)?;
        let value = coupling_from_subcube(counts, j, j_bit, subcube.y_bits, cfg)?;
        let support = SIGN_PAIRS
            .iter()
            .map(|&(x_i, x_j)| counts.counts(complete_key(counts, j_bit, subcube.y_bits, x_i, x_j)).1)
            .min()
            .unwrap();
        return Ok(DirEstimate {
            value,
            flip_support: support,
        });
    }
    let free_bits = counts.members.len() - 2;
    let mut weighted = 0.0f64;
    let mut weight = 0u64;
    let mut best_occ = 0u64;
    for y_bits in 0..1u64 << free_bits {
        let cells: Vec<(u64, u64)> = SIGN_PAIRS
            .iter()
            .map(|&(x_i, x_j)| counts.counts(complete_key(counts, j_bit, y_bits, x_i, x_j)))
            .collect();
        let min_occ = cells.iter().map(|c| c.0).min().unwrap();
        best_occ = best_occ.max(min_occ);
        let min_flips = cells.iter().map(|c| c.1).min().unwrap();
        if min_occ < cfg.min_samples || min_flips == 0 {
            continue;
        }
        let est = coupling_from_subcube(counts, j, j_bit, y_bits, cfg)?;
        weighted += min_flips as f64 * est;
        weight += min_flips;
    }
    if weight == 0 {
        return Err(Error::NoSubcube {
            i: counts.site,
            j,
            min_samples: cfg.min_samples,
            best: best_occ,
        });
    }
    Ok(DirEstimate {
        value: weighted / weight as f64,
        flip_support: weight,
    })
}

/// Field recovery: for each neighbor assignment w sampled adequately in both
/// orientations of i, candidate
/// h_i(w) = (1/2) ln(p(w, x_i=-1)/p(w, x_i=+1)) - sum_k A_ik w_k;
/// returns the occupancy-weighted average of candidates per site.
pub fn estimate_fields(
    counts_list: &[NeighborhoodCounts],
    couplings: &BTreeMap<(usize, usize), f64>,
    cfg: &ParamConfig,
) -> Vec<Result<f64>> {
    counts_list
        .iter()
        .map(|counts| estimate_field(counts, couplings, cfg))
        .collect()
}

fn estimate_field(
    counts: &NeighborhoodCounts,
    couplings: &BTreeMap<(usize, usize), f64>,
    cfg: &ParamConfig,
) -> Result<f64> {
    let i = counts.site;
    let k = counts.members.len();
    let mut weighted = 0.0f64;
    let mut weight = 0u64;
    for w_bits in 0..1u64 << (k - 1) {
        // scatter w into a full key with x_i = -1 / +1
        let mut key_minus = 0u64;
        let mut w_pos = 0;
        for b in 0..k {
            if b == counts.site_bit {
                continue;
            }
            if w_bits >> w_pos & 1 == 1 {
                key_minus |= 1 << b;
            }
            w_pos += 1;
        }
        let key_plus = key_minus | 1 << counts.site_bit;
        let (n_minus, f_minus) = counts.counts(key_minus);
        let (n_plus, f_plus) = counts.counts(key_plus);
        if n_minus < cfg.min_samples || n_plus < cfg.min_samples || f_minus == 0 || f_plus == 0 {
            continue;
        }
        let p_minus = f_minus as f64 / (cfg.eps_rate * n_minus as f64);
        let p_plus = f_plus as f64 / (cfg.eps_rate * n_plus as f64);
        let mut cand = 0.5 * (p_minus / p_plus).ln();
        let mut w_pos = 0;
        for (b, &m) in counts.members.iter().enumerate() {
            if b == counts.site_bit {
                continue;
            }
            let spin = if w_bits >> w_pos & 1 == 1 { 1.0 } else { -1.0 };
            w_pos += 1;
            let a = couplings
                .get(&(i.min(m), i.max(m)))
                .copied()
                .unwrap_or(0.0);
            cand -= a * spin;
        }
        let w = n_minus + n_plus;
        weighted += w as f64 * cand;
        weight += w;
    }
    if weight == 0 {
        return Err(Error::NoFieldCandidate { site: i });
    }
    Ok(weighted / weight as f64)
}

#[derive(Clone, Debug)]
pub struct EdgeReport {
    pub i: usize,
    pub j: usize,
    pub estimate_ij: Option<f64>,
    pub estimate_ji: Option<f64>,
    /// Directions differ by more than twice the combined standard-error
    /// surrogate 0.5/sqrt(flip support).
    pub disagreement: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ParamReport {
    pub edges: Vec<EdgeReport>,
    /// Human-readable notes for edges/sites whose estimation failed.
    pub failures: Vec<String>,
}

#[derive(Debug)]
pub struct LearnedParameters {
    pub couplings: BTreeMap<(usize, usize), f64>,
    pub fields: Vec<f64>,
    pub report: ParamReport,
}

/// Full parameter pipeline over a known dependency graph: collect counts per
/// site, estimate each coupling from both directions (averaged), then recover
/// fields. Failures land in the report instead of aborting the batch.
pub fn learn_parameters(
    trace: &FlipTrace,
    graph: &Graph,
    cfg: &ParamConfig,
) -> Result<LearnedParameters> {
    cfg.validate()?;
    let neighbor_sets = graph.neighbor_sets();
    let counts: Vec<NeighborhoodCounts> = (0..trace.n())
        .into_par_iter()
        .map(|i| collect_counts(trace, i, &neighbor_sets[i], cfg))
        .collect::<Result<_>>()?;
    let mut report = ParamReport::default();
    let mut couplings = BTreeMap::new();
    for (i, j) in graph.edges() {
        let est_ij = estimate_coupling_directed(&counts[i], j, cfg);
        let est_ji = estimate_coupling_directed(&counts[j], i, cfg);
        let mut entry = EdgeReport {
            i,
            j,
            estimate_ij: est_ij.as_ref().ok().map(|e| e.value),
            estimate_ji: est_ji.as_ref().ok().map(|e| e.value),
            disagreement: false,
        };
        match (&est_ij, &est_ji) {
            (Ok(a), Ok(b)) => {
                let se = |e: &DirEstimate| 0.5 / (e.flip_support.max(1) as f64).sqrt();
                let tol = 2.0 * (se(a).powi(2) + se(b).powi(2)).sqrt();
                entry.disagreement = (a.value - b.value).abs() > tol;
                couplings.insert((i, j), 0.5 * (a.value + b.value));
            }
            (Ok(a), Err(e)) => {
                report.failures.push(format!("edge ({i},{j}) direction j->i: {e}"));
                couplings.insert((i, j), a.value);
            }
            (Err(e), Ok(b)) => {
                report.failures.push(format!("edge ({i},{j}) direction i->j: {e}"));
                couplings.insert((i, j), b.value);
            }
            (Err(e1), Err(e2)) => {
                report
                    .failures
                    .push(format!("edge ({i},{j}) unestimable: {e1}; {e2}"));
            }
        }
        report.edges.push(entry);
    }
    let mut fields = vec![0.0f64; trace.n()];
    for (i, res) in estimate_fields(&counts, &couplings, cfg).into_iter().enumerate() {
        match res {
            Ok(h) => fields[i] = h,
            Err(e) => report.failures.push(format!("field {i}: {e}")),
        }
    }
    Ok(LearnedParameters {
        couplings,
        fields,
        report,
    })
}
