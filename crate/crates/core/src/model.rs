//! Ising models pi(x) ∝ exp(x'Ax/2 + h'x), their dependency graphs,
//! non-degeneracy bounds, dense-edge structure, and seeded random generators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spins::SpinConfig;

/// Sparse symmetric couplings plus external fields. Couplings are stored once
/// per unordered pair keyed (min,max); exact zeros are rejected at
/// construction, so the stored support *is* the dependency graph.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    n: usize,
    couplings: BTreeMap<(usize, usize), f64>,
    fields: Vec<f64>,
    adjacency: Vec<Vec<(u32, f64)>>,
}

impl IsingModel {
    pub fn new(
        n: usize,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
        fields: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("n must be positive".into()));
        }
        if fields.len() != n {
            return Err(Error::InvalidModel(format!(
                "field vector has length {}, expected {n}",
                fields.len()
            )));
        }
        let mut map = BTreeMap::new();
        for (i, j, a) in couplings {
            if i >= n || j >= n {
                return Err(Error::InvalidModel(format!(
                    "coupling ({i},{j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidModel(format!("self-coupling at site {i}")));
            }
            if a == 0.0 {
                return Err(Error::InvalidModel(format!(
                    "exact-zero coupling at ({i},{j}); omit the entry instead"
                )));
            }
            if !a.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "non-finite coupling at ({i},{j})"
                )));
            }
            let key = (i.min(j), i.max(j));
            if let Some(prev) = map.insert(key, a) {
                if prev != a {
                    return Err(Error::InvalidModel(format!(
                        "conflicting values for coupling {key:?}: {prev} vs {a}"
                    )));
                }
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (&(i, j), &a) in &map {
            adjacency[i].push((j as u32, a));
            adjacency[j].push((i as u32, a));
        }
        Ok(IsingModel {
            n,
            couplings: map,
            fields,
            adjacency,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self::new(n, [], vec![0.0; n]).expect("zero model is always valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.couplings.iter().map(|(&(i, j), &a)| (i, j, a))
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> f64 {
        self.fields[i]
    }

    /// Neighbors of `i` with their couplings, in ascending site order.
    pub fn neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.adjacency[i]
    }

    /// S = sum_{k != i} A_ik x_k + h_i, summing only over stored neighbors.
    pub fn local_field(&self, config: &SpinConfig, i: usize) -> Result<f64> {
        if i >= self.n || config.n() != self.n {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: self.n,
            });
        }
        let mut s = self.fields[i];
        for &(k, a) in &self.adjacency[i] {
            s += a * f64::from(config.spin(k as usize));
        }
        Ok(s)
    }

    /// Same as [`local_field`](Self::local_field) over an i8 slice (hot path).
    #[inline]
    pub fn local_field_spins(&self, spins: &[i8], i: usize) -> f64 {
        let mut s = self.fields[i];
        for &(k, a) in &self.adjacency[i] {
            s += a * f64::from(spins[k as usize]);
        }
        s
    }

    pub fn dependency_graph(&self) -> Graph {
        let mut g = Graph::empty(self.n);
        for (&(i, j), _) in &self.couplings {
            g.add_edge(i, j).expect("stored couplings are valid edges");
        }
        g
    }

    /// Tight (d, lambda, alpha) for this model. `alpha` is +inf on edge-free
    /// models so that `validate_bounds(m, measured_bounds(m))` is always empty.
    pub fn measured_bounds(&self) -> ModelBounds {
        let d = (0..self.n)
            .map(|i| self.adjacency[i].len())
            .max()
            .unwrap_or(0);
        let lambda = (0..self.n)
            .map(|i| {
                self.adjacency[i]
                    .iter()
                    .map(|&(_, a)| a.abs())
                    .sum::<f64>()
                    + self.fields[i].abs()
            })
            .fold(0.0, f64::max);
        let alpha = self
            .couplings
            .values()
            .map(|a| a.abs())
            .fold(f64::INFINITY, f64::min);
        ModelBounds { d, lambda, alpha }
    }
}

/// Assumption-style non-degeneracy bounds: max degree d, width lambda
/// (max_i sum_k |A_ik| + |h_i|), and minimum nonzero coupling magnitude alpha.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBounds {
    pub d: usize,
    pub lambda: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundViolation {
    Degree { site: usize, degree: usize },
    Width { site: usize, width: f64 },
    CouplingMagnitude { i: usize, j: usize, value: f64 },
}

impl fmt::Display for BoundViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundViolation::Degree { site, degree } => {
                write!(f, "site {site} has degree {degree} above the bound")
            }
            BoundViolation::Width { site, width } => {
                write!(f, "site {site} has width {width} above the bound")
            }
            BoundViolation::CouplingMagnitude { i, j, value } => {
                write!(f, "coupling ({i},{j}) = {value} below the alpha floor")
            }
        }
    }
}

/// Empty iff the model satisfies all three bound conditions; violations are
/// data, not errors.
pub fn validate_bounds(model: &IsingModel, bounds: &ModelBounds) -> Vec<BoundViolation> {
    let mut out = Vec::new();
    for i in 0..model.n() {
        let degree = model.neighbors(i).len();
        if degree > bounds.d {
            out.push(BoundViolation::Degree { site: i, degree });
        }
        let width = model
            .neighbors(i)
            .iter()
            .map(|&(_, a)| a.abs())
            .sum::<f64>()
            + model.field(i).abs();
        if width > bounds.lambda {
            out.push(BoundViolation::Width { site: i, width });
        }
    }
    for (i, j, a) in model.couplings() {
        if a.abs() < bounds.alpha {
            out.push(BoundViolation::CouplingMagnitude { i, j, value: a });
        }
    }
    out
}

/// Simple undirected graph on 0..n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Graph::empty(n);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                n: self.n,
            });
        }
        if i == j {
            return Err(Error::InvalidModel(format!("self-loop at {i}")));
        }
        self.edges.insert((i.min(j), i.max(j)));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == i || b == i)
            .count()
    }

    pub fn neighbor_sets(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            out[i].push(j);
            out[j].push(i);
        }
        out
    }
}

/// Partition of a graph into dense edges (components of average degree > 1),
/// the residual isolated matching, and degree-0 vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensePartition {
    pub dense: BTreeSet<(usize, usize)>,
    pub isolated_matching: BTreeSet<(usize, usize)>,
    pub isolated_vertices: BTreeSet<usize>,
}

pub fn dense_edges(g: &Graph) -> DensePartition {
    // union-find over sites
    let mut parent: Vec<usize> = (0..g.n()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, j) in g.edges() {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
        }
    }
    let mut comp_vertices: BTreeMap<usize, usize> = BTreeMap::new();
    let mut comp_edges: BTreeMap<usize, usize> = BTreeMap::new();
    for v in 0..g.n() {
        let r = find(&mut parent, v);
        *comp_vertices.entry(r).or_insert(0) += 1;
    }
    for (i, j) in g.edges() {
        let r = find(&mut parent, i);
        debug_assert_eq!(r, find(&mut parent, j));
        *comp_edges.entry(r).or_insert(0) += 1;
    }
    let mut out = DensePartition {
        dense: BTreeSet::new(),
        isolated_matching: BTreeSet::new(),
        isolated_vertices: BTreeSet::new(),
    };
    for (i, j) in g.edges() {
        let r = find(&mut parent, i);
        // average degree 2E/V > 1  <=>  2E > V
        if 2 * comp_edges[&r] > comp_vertices[&r] {
            out.dense.insert((i, j));
        } else {
            out.isolated_matching.insert((i, j));
        }
    }
    let degrees = {
        let mut deg = vec![0usize; g.n()];
        for (i, j) in g.edges() {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    };
    for (v, &d) in degrees.iter().enumerate() {
        if d == 0 {
            out.isolated_vertices.insert(v);
        }
    }
    out
}

/// How coupling values are drawn: magnitude uniform in [min_mag, max_mag]
/// (a point mass when equal), sign per scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingScheme {
    pub min_mag: f64,
    pub max_mag: f64,
    pub sign: SignScheme,
}

impl CouplingScheme {
    pub fn fixed(value: f64) -> Self {
        CouplingScheme {
            min_mag: value.abs(),
            max_mag: value.abs(),
            sign: if value < 0.0 {
                SignScheme::Negative
            } else {
                SignScheme::Positive
            },
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        let mag = if self.max_mag > self.min_mag {
            rng.gen_range(self.min_mag..=self.max_mag)
        } else {
            self.min_mag
        };
        match self.sign {
            SignScheme::Positive => mag,
            SignScheme::Negative => -mag,
            SignScheme::Random => {
                if rng.gen::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignScheme {
    Positive,
    Negative,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Chain 0-1-...-(n-1).
    Path { n: usize },
    /// rows x cols grid, sites in row-major order.
    Grid { rows: usize, cols: usize },
    /// Perfect matching {0,1},{2,3},...; n must be even.
    Matching { n: usize },
    /// `edges` edges rejection-sampled uniformly subject to max degree `d`.
    BoundedDegree { n: usize, d: usize, edges: usize },
    /// Bounded-degree block on sites 0..n_dense plus a planted isolated
    /// matching on the remaining 2*matching_pairs sites.
    BoundedDegreePlusMatching {
        n_dense: usize,
        d: usize,
        edges: usize,
        matching_pairs: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub coupling: CouplingScheme,
    /// Fields drawn uniformly from [-field_mag, field_mag]; 0 means all-zero.
    pub field_mag: f64,
}

/// Deterministic in (spec, seed).
pub fn random_model(spec: &GeneratorSpec, seed: u64) -> Result<IsingModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, edges) = generate_edges(&spec.family, &mut rng)?;
    let couplings: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .map(|(i, j)| (i, j, spec.coupling.draw(&mut rng)))
        .collect();
    let fields: Vec<f64> = (0..n)
        .map(|_| {
            if spec.field_mag > 0.0 {
                rng.gen_range(-spec.field_mag..=spec.field_mag)
            } else {
                0.0
            }
        })
        .collect();
    IsingModel::new(n, couplings, fields)
}

fn generate_edges(family: &Family, rng: &mut impl Rng) -> Result<(usize, Vec<(usize, usize)>)> {
    match *family {
        Family::Path { n } => {
            if n < 2 {
                return Err(Error::Generator("path needs n >= 2".into()));
            }
            Ok((n, (0..n - 1).map(|i| (i, i + 1)).collect()))
        }
        Family::Grid { rows, cols } => {
            if rows == 0 || cols == 0 {
                return Err(Error::Generator("grid needs positive dimensions".into()));
            }
            let at = |r: usize, c: usize| r * cols + c;
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols {
                        edges.push((at(r, c), at(r, c + 1)));
                    }
                    if r + 1 < rows {
                        edges.push((at(r, c), at(r + 1, c)));
                    }
                }
            }
            Ok((rows * cols, edges))
        }
        Family::Matching { n } => {
            if n == 0 || n % 2 != 0 {
                return Err(Error::Generator("matching needs positive even n".into()));
            }
            Ok((n, (0..n / 2).map(|k| (2 * k, 2 * k + 1)).collect()))
        }
        Family::BoundedDegree { n, d, edges } => {
            let e = sample_bounded_degree(n, d, edges, 0, rng)?;
            Ok((n, e))
        }
        Family::BoundedDegreePlusMatching {
            n_dense,
            d,
            edges,
            matching_pairs,
        } => {
            let n = n_dense + 2 * matching_pairs;
            let mut e = sample_bounded_degree(n_dense, d, edges, 0, rng)?;
            for k in 0..matching_pairs {
                e.push((n_dense + 2 * k, n_dense + 2 * k + 1));
            }
            Ok((n, e))
        }
    }
}

fn sample_bounded_degree(
    n: usize,
    d: usize,
    target: usize,
    offset: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>> {
    if n < 2 && target > 0 {
        return Err(Error::Generator("need n >= 2 to place edges".into()));
    }
    if target > n * d / 2 {
        return Err(Error::Generator(format!(
            "cannot fit {target} edges with n = {n}, d = {d}"
        )));
    }
    let mut degrees = vec![0usize; n];
    let mut chosen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let max_tries = 200 * target.max(1);
    let mut tries = 0;
    while chosen.len() < target {
        tries += 1;
        if tries > max_tries {
            return Err(Error::Generator(format!(
                "rejection sampling exhausted after {max_tries} tries \
                 ({} of {target} edges placed)",
                chosen.len()
            )));
        }
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let key = (i.min(j), i.max(j));
        if chosen.contains(&key) || degrees[i] >= d || degrees[j] >= d {
            continue;
        }
        degrees[i] += 1;
        degrees[j] += 1;
        chosen.insert(key);
    }
    Ok(chosen
        .into_iter()
        .map(|(i, j)| (i + offset, j + offset))
        .collect())
}

// --- model file format -----------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    couplings: Vec<(usize, usize, f64)>,
    fields: Vec<f64>,
}

impl IsingModel {
    /// JSON {n, couplings: [[i,j,value]...], fields: [...]}, couplings listed
    /// once with i < j. serde_json emits shortest round-trip decimals, so
    /// values survive bit-exactly.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile {
            n: self.n,
            couplings: self.couplings().collect(),
            fields: self.fields.clone(),
        })
        .expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        for &(i, j, _) in &file.couplings {
            if i >= j {
                return Err(Error::Parse {
                    at: format!("coupling ({i},{j})"),
                    msg: "couplings must be listed once with i < j".into(),
                });
            }
        }
        Self::new(file.n, file.couplings, file.fields)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dependency_graph_from_support() {
        let m = IsingModel::new(3, [(0, 1, 0.5)], vec![0.0; 3]).unwrap();
        let g = m.dependency_graph();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);

        assert_eq!(IsingModel::zero(4).dependency_graph().edge_count(), 0);

        let path = IsingModel::new(3, [(0, 1, 0.4), (1, 2, 0.4)], vec![0.0; 3]).unwrap();
        assert_eq!(
            path.dependency_graph().edges().collect::<Vec<_>>(),
            vec![(0, 1), (1, 2)]
        );
    }

    #[test]
    fn dependency_graph_ignores_sign() {
        let a = IsingModel::new(3, [(0, 1, 0.4), (1, 2, 0.4)], vec![0.0; 3]).unwrap();
        let b = IsingModel::new(3, [(0, 1, -0.4), (1, 2, 0.4)], vec![0.0; 3]).unwrap();
        assert_eq!(a.dependency_graph(), b.dependency_graph());
    }

    #[test]
    fn rejects_zero_and_self_couplings() {
        assert!(IsingModel::new(2, [(0, 1, 0.0)], vec![0.0; 2]).is_err());
        assert!(IsingModel::new(2, [(1, 1, 0.3)], vec![0.0; 2]).is_err());
        assert!(IsingModel::new(2, [(0, 2, 0.3)], vec![0.0; 2]).is_err());
    }

    #[test]
    fn validate_bounds_cases() {
        let m = IsingModel::new(2, [(0, 1, 0.5)], vec![0.0; 2]).unwrap();
        let ok = ModelBounds {
            d: 1,
            lambda: 0.5,
            alpha: 0.4,
        };
        assert!(validate_bounds(&m, &ok).is_empty());

        let tight_alpha = ModelBounds { alpha: 0.6, ..ok };
        let v = validate_bounds(&m, &tight_alpha);
        assert_eq!(
            v,
            vec![BoundViolation::CouplingMagnitude {
                i: 0,
                j: 1,
                value: 0.5
            }]
        );

        // star with center degree 4
        let star = IsingModel::new(
            5,
            [(0, 1, 0.3), (0, 2, 0.3), (0, 3, 0.3), (0, 4, 0.3)],
            vec![0.0; 5],
        )
        .unwrap();
        let dv = validate_bounds(
            &star,
            &ModelBounds {
                d: 3,
                lambda: 2.0,
                alpha: 0.1,
            },
        );
        assert_eq!(dv, vec![BoundViolation::Degree { site: 0, degree: 4 }]);
    }

    #[test]
    fn measured_bounds_are_tight() {
        let m = IsingModel::new(3, [(0, 1, 0.4), (1, 2, -0.6)], vec![0.1, -0.2, 0.0]).unwrap();
        let b = m.measured_bounds();
        assert_eq!(b.d, 2);
        assert!((b.lambda - 1.2).abs() < 1e-15);
        assert!((b.alpha - 0.4).abs() < 1e-15);
        assert!(validate_bounds(&m, &b).is_empty());
    }

    #[test]
    fn dense_partition_cases() {
        // triangle: all dense
        let tri = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let p = dense_edges(&tri);
        assert_eq!(p.dense.len(), 3);
        assert!(p.isolated_matching.is_empty());

        // single edge: average degree exactly 1, not dense
        let e = Graph::from_edges(2, [(0, 1)]).unwrap();
        let p = dense_edges(&e);
        assert!(p.dense.is_empty());
        assert_eq!(p.isolated_matching.len(), 1);

        // path 0-1-2: average degree 4/3 > 1
        let path = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(dense_edges(&path).dense.len(), 2);

        // mixed: triangle + separate edge + lone vertex
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4)]).unwrap();
        let p = dense_edges(&g);
        assert_eq!(p.dense.len(), 3);
        assert_eq!(p.isolated_matching, BTreeSet::from([(3, 4)]));
        assert_eq!(p.isolated_vertices, BTreeSet::from([5]));
    }

    #[test]
    fn generator_families() {
        let path = random_model(
            &GeneratorSpec {
                family: Family::Path { n: 4 },
                coupling: CouplingScheme::fixed(0.4),
                field_mag: 0.0,
            },
            7,
        )
        .unwrap();
        assert_eq!(
            path.couplings().collect::<Vec<_>>(),
            vec![(0, 1, 0.4), (1, 2, 0.4), (2, 3, 0.4)]
        );

        let matching = random_model(
            &GeneratorSpec {
                family: Family::Matching { n: 4 },
                coupling: CouplingScheme::fixed(0.5),
                field_mag: 0.0,
            },
            0,
        )
        .unwrap();
        assert_eq!(
            matching.couplings().collect::<Vec<_>>(),
            vec![(0, 1, 0.5), (2, 3, 0.5)]
        );
    }

    #[test]
    fn generator_is_deterministic_and_respects_bounds() {
        let spec = GeneratorSpec {
            family: Family::BoundedDegree {
                n: 20,
                d: 3,
                edges: 18,
            },
            coupling: CouplingScheme {
                min_mag: 0.4,
                max_mag: 0.4,
                sign: SignScheme::Random,
            },
            field_mag: 0.1,
        };
        let a = random_model(&spec, 42).unwrap();
        let b = random_model(&spec, 42).unwrap();
        assert_eq!(a, b);
        let bounds = a.measured_bounds();
        assert!(bounds.d <= 3);
        assert_eq!(a.dependency_graph().edge_count(), 18);
    }

    #[test]
    fn infeasible_generator_fails() {
        let spec = GeneratorSpec {
            family: Family::BoundedDegree {
                n: 4,
                d: 1,
                edges: 3,
            },
            coupling: CouplingScheme::fixed(0.4),
            field_mag: 0.0,
        };
        assert!(random_model(&spec, 0).is_err());
    }

    #[test]
    fn model_json_round_trip_bit_exact() {
        let m = IsingModel::new(
            3,
            [(0, 1, 0.1 + 0.2), (1, 2, -1.0 / 3.0)],
            vec![0.1, f64::MIN_POSITIVE, -2.5e-17],
        )
        .unwrap();
        let back = IsingModel::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
    }
}
