//! Seeded instance families: random k-regular and complete Ising models,
//! MaxCut, Sherrington–Kirkpatrick and NAE-3SAT encodings.
//!
//! Weights are drawn in the Hamiltonian convention (one `Ĵ` per edge) and
//! stored halved, so `E(s) = Σ_edges Ĵ·s_i·s_j + Σ_i h_i·s_i`.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IsingModel;

const SIMPLE_PAIRING_ATTEMPTS: usize = 100;

/// Zero-mean weight distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    /// `U(-half_width, half_width)`.
    Uniform { half_width: f64 },
    /// `N(0, variance)`.
    Gaussian { variance: f64 },
    /// `±level` with equal probability.
    Binary { level: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            Distribution::Uniform { half_width } => ("half_width", half_width),
            Distribution::Gaussian { variance } => ("variance", variance),
            Distribution::Binary { level } => ("level", level),
        };
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("distribution {name} must be positive, got {v}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Uniform { half_width } => rng.random_range(-half_width..half_width),
            Distribution::Gaussian { variance } => {
                Normal::new(0.0, variance.sqrt()).expect("validated variance").sample(rng)
            }
            Distribution::Binary { level } => {
                if rng.random::<bool>() {
                    level
                } else {
                    -level
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        0.0
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Uniform { half_width } => half_width * half_width / 3.0,
            Distribution::Gaussian { variance } => variance,
            Distribution::Binary { level } => level * level,
        }
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Edges of a uniformly paired simple k-regular graph on `d` vertices.
///
/// Stubs are paired at random; a pairing with loops or repeated edges is
/// redrawn up to a fixed number of times, after which the last pairing is
/// repaired by random double-edge swaps. Graphs denser than half-complete
/// are drawn as the complement of a sparse one, where swaps rarely stall.
pub fn k_regular_edges<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    if k >= d {
        return Err(Error::InvalidSpec(format!("degree {k} must be below d = {d}")));
    }
    if d * k % 2 == 1 {
        return Err(Error::InvalidSpec(format!("d·k = {} must be even", d * k)));
    }
    if 2 * k > d - 1 {
        let missing: std::collections::HashSet<(usize, usize)> =
            k_regular_edges(d, d - 1 - k, rng)?.into_iter().collect();
        return Ok((0..d)
            .flat_map(|a| (a + 1..d).map(move |b| (a, b)))
            .filter(|e| !missing.contains(e))
            .collect());
    }
    let mut stubs: Vec<usize> = (0..d).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for _ in 0..SIMPLE_PAIRING_ATTEMPTS {
        stubs.shuffle(rng);
        edges = stubs.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        if is_simple(&edges) {
            return Ok(finish_edges(edges));
        }
    }
    repair_pairing(&mut edges, rng)?;
    Ok(finish_edges(edges))
}

fn is_simple(edges: &[(usize, usize)]) -> bool {
    let mut seen = std::collections::HashSet::with_capacity(edges.len());
    edges.iter().all(|&(a, b)| a != b && seen.insert(edge_key(a, b)))
}

fn finish_edges(mut edges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    for e in edges.iter_mut() {
        *e = edge_key(e.0, e.1);
    }
    edges.sort_unstable();
    edges
}

fn repair_pairing<R: Rng + ?Sized>(edges: &mut [(usize, usize)], rng: &mut R) -> Result<()> {
    let m = edges.len();
    let mut count: HashMap<(usize, usize), usize> = HashMap::with_capacity(m);
    for &(a, b) in edges.iter() {
        *count.entry(edge_key(a, b)).or_default() += 1;
    }
    let is_bad = |e: (usize, usize), count: &HashMap<(usize, usize), usize>| {
        e.0 == e.1 || count[&edge_key(e.0, e.1)] > 1
    };
    let budget = 1000 * m.max(10);
    for _ in 0..budget {
        let Some(bad) = (0..m).find(|&i| is_bad(edges[i], &count)) else {
            return Ok(());
        };
        let other = rng.random_range(0..m);
        if other == bad {
            continue;
        }
        let (a, b) = edges[bad];
        let (c, e) = if rng.random::<bool>() { edges[other] } else { (edges[other].1, edges[other].0) };
        if a == c || b == e {
            continue;
        }
        let (n1, n2) = (edge_key(a, c), edge_key(b, e));
        if n1 == n2 || count.get(&n1).copied().unwrap_or(0) > 0 || count.get(&n2).copied().unwrap_or(0) > 0 {
            continue;
        }
        for old in [edge_key(a, b), edge_key(edges[other].0, edges[other].1)] {
            let slot = count.get_mut(&old).expect("edge is counted");
            *slot -= 1;
            if *slot == 0 {
                count.remove(&old);
            }
        }
        *count.entry(n1).or_default() += 1;
        *count.entry(n2).or_default() += 1;
        edges[bad] = (a, c);
        edges[other] = (b, e);
    }
    if (0..m).any(|i| is_bad(edges[i], &count)) {
        Err(Error::Generation("edge-swap repair did not reach a simple graph".into()))
    } else {
        Ok(())
    }
}

fn weighted_model<R: Rng + ?Sized>(
    d: usize,
    edges: &[(usize, usize)],
    j_dist: &Distribution,
    h_dist: Option<&Distribution>,
    rng: &mut R,
) -> Result<IsingModel> {
    let couplings: Vec<(usize, usize, f64)> =
        edges.iter().map(|&(a, b)| (a, b, j_dist.sample(rng))).collect();
    let fields = match h_dist {
        Some(h) => (0..d).map(|_| h.sample(rng)).collect(),
        None => vec![0.0; d],
    };
    IsingModel::from_hamiltonian(d, couplings, fields)
}

/// Random k-regular Ising model with `Ĵ ~ j_dist` on every edge and `h ~ h_dist`.
pub fn random_k_regular(
    d: usize,
    k: usize,
    j_dist: &Distribution,
    h_dist: &Distribution,
    seed: u64,
) -> Result<IsingModel> {
    j_dist.validate()?;
    h_dist.validate()?;
    let mut rng = rng_for(seed);
    let edges = k_regular_edges(d, k, &mut rng)?;
    weighted_model(d, &edges, j_dist, Some(h_dist), &mut rng)
}

fn complete_edges(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
}

/// Fully connected model with `Ĵ ~ j_dist` and `h ~ h_dist`.
pub fn complete_random(d: usize, j_dist: &Distribution, h_dist: &Distribution, seed: u64) -> Result<IsingModel> {
    if d < 2 {
        return Err(Error::InvalidSpec(format!("complete graph needs d ≥ 2, got {d}")));
    }
    j_dist.validate()?;
    h_dist.validate()?;
    let mut rng = rng_for(seed);
    weighted_model(d, &complete_edges(d), j_dist, Some(h_dist), &mut rng)
}

/// Fully connected model with one scale `α ~ U(0, max_scale)` drawn per
/// instance and then `Ĵ, h ~ N(0, α²)`.
pub fn complete_random_scale_gaussian(d: usize, max_scale: f64, seed: u64) -> Result<IsingModel> {
    if d < 2 {
        return Err(Error::InvalidSpec(format!("complete graph needs d ≥ 2, got {d}")));
    }
    if !(max_scale.is_finite() && max_scale > 0.0) {
        return Err(Error::InvalidSpec(format!("scale bound must be positive, got {max_scale}")));
    }
    let mut rng = rng_for(seed);
    // α = 0 has probability zero but would make the distribution degenerate.
    let alpha = loop {
        let a = rng.random_range(0.0..max_scale);
        if a > 0.0 {
            break a;
        }
    };
    let dist = Distribution::Gaussian { variance: alpha * alpha };
    weighted_model(d, &complete_edges(d), &dist, Some(&dist), &mut rng)
}

/// MaxCut on a random k-regular graph: `Ĵ = 1` on each edge, `h = 0`.
pub fn maxcut_regular(d: usize, k: usize, seed: u64) -> Result<IsingModel> {
    let mut rng = rng_for(seed);
    let edges = k_regular_edges(d, k, &mut rng)?;
    IsingModel::from_hamiltonian(d, edges.into_iter().map(|(a, b)| (a, b, 1.0)), vec![0.0; d])
}

/// MaxCut on an Erdős–Rényi graph with edge probability `density`.
pub fn maxcut_dense(d: usize, density: f64, seed: u64) -> Result<IsingModel> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidSpec(format!("density must lie in (0, 1], got {density}")));
    }
    let mut rng = rng_for(seed);
    let edges: Vec<(usize, usize, f64)> = complete_edges(d)
        .into_iter()
        .filter(|_| rng.random::<f64>() < density)
        .map(|(a, b)| (a, b, 1.0))
        .collect();
    IsingModel::from_hamiltonian(d, edges, vec![0.0; d])
}

/// Sherrington–Kirkpatrick spin glass: `Ĵ = ±1` on every pair, `h = 0`.
pub fn sk_ising(d: usize, seed: u64) -> Result<IsingModel> {
    if d < 2 {
        return Err(Error::InvalidSpec(format!("SK model needs d ≥ 2, got {d}")));
    }
    let mut rng = rng_for(seed);
    let dist = Distribution::Binary { level: 1.0 };
    weighted_model(d, &complete_edges(d), &dist, None, &mut rng)
}

/// Fully connected `Ĵ ∈ {0, 1}` couplings, `h = 0`; zero pairs are not stored.
pub fn sk_qubo(d: usize, seed: u64) -> Result<IsingModel> {
    if d < 2 {
        return Err(Error::InvalidSpec(format!("SK model needs d ≥ 2, got {d}")));
    }
    let mut rng = rng_for(seed);
    let couplings: Vec<(usize, usize, f64)> = complete_edges(d)
        .into_iter()
        .map(|(a, b)| (a, b, if rng.random::<bool>() { 1.0 } else { 0.0 }))
        .collect();
    IsingModel::from_hamiltonian(d, couplings, vec![0.0; d])
}

/// A clause over three distinct variables with literal polarities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NaeClause {
    pub vars: [usize; 3],
    pub signs: [i8; 3],
}

impl NaeClause {
    /// Not-all-equal satisfied by the spin assignment `s`.
    pub fn satisfied(&self, s: &[i8]) -> bool {
        let lits: Vec<i8> = (0..3).map(|k| self.signs[k] * s[self.vars[k]]).collect();
        !(lits[0] == lits[1] && lits[1] == lits[2])
    }
}

pub fn random_nae_clauses<R: Rng + ?Sized>(n_vars: usize, clause_ratio: f64, rng: &mut R) -> Result<Vec<NaeClause>> {
    if n_vars < 3 {
        return Err(Error::InvalidSpec(format!("NAE-3SAT needs at least 3 variables, got {n_vars}")));
    }
    if !(clause_ratio.is_finite() && clause_ratio > 0.0) {
        return Err(Error::InvalidSpec(format!("clause ratio must be positive, got {clause_ratio}")));
    }
    let m = (clause_ratio * n_vars as f64).round() as usize;
    let vars: Vec<usize> = (0..n_vars).collect();
    Ok((0..m)
        .map(|_| {
            let picked: Vec<usize> = vars.choose_multiple(rng, 3).copied().collect();
            let signs = [0; 3].map(|_: i8| if rng.random::<bool>() { 1 } else { -1 });
            NaeClause { vars: [picked[0], picked[1], picked[2]], signs }
        })
        .collect())
}

/// Ising encoding of a clause list: every literal pair of every clause adds
/// `sign_a·sign_b` to `Ĵ`, so a clause contributes `+3` when its literals
/// are all equal and `−1` otherwise.
pub fn nae_model(n_vars: usize, clauses: &[NaeClause]) -> Result<IsingModel> {
    let mut couplings = Vec::with_capacity(3 * clauses.len());
    for c in clauses {
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let w = f64::from(c.signs[a] * c.signs[b]);
            couplings.push((c.vars[a], c.vars[b], 0.5 * w));
        }
    }
    IsingModel::accumulate(n_vars, couplings, vec![0.0; n_vars])
}

/// Random NAE-3SAT instance with `round(clause_ratio·n_vars)` clauses.
pub fn nae3sat(n_vars: usize, clause_ratio: f64, seed: u64) -> Result<IsingModel> {
    let mut rng = rng_for(seed);
    let clauses = random_nae_clauses(n_vars, clause_ratio, &mut rng)?;
    nae_model(n_vars, &clauses)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    KRegular,
    Complete,
    /// Complete graph with a per-instance Gaussian scale.
    CompleteScaled,
    #[serde(rename = "maxcut-3")]
    MaxCut3,
    #[serde(rename = "maxcut-d")]
    MaxCutD,
    SkIsing,
    SkQubo,
    #[serde(rename = "nae-3sat")]
    Nae3Sat,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::KRegular,
        Family::Complete,
        Family::CompleteScaled,
        Family::MaxCut3,
        Family::MaxCutD,
        Family::SkIsing,
        Family::SkQubo,
        Family::Nae3Sat,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::KRegular => "k-regular",
            Family::Complete => "complete",
            Family::CompleteScaled => "complete-scaled",
            Family::MaxCut3 => "maxcut-3",
            Family::MaxCutD => "maxcut-d",
            Family::SkIsing => "sk-ising",
            Family::SkQubo => "sk-qubo",
            Family::Nae3Sat => "nae-3sat",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        let alias = match norm.as_str() {
            "maxcut3" | "max-cut-3" => "maxcut-3",
            "maxcutd" | "max-cut-d" => "maxcut-d",
            "nae3sat" | "nae-3-sat" => "nae-3sat",
            other => other,
        };
        Family::ALL
            .into_iter()
            .find(|f| f.name() == alias)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown family `{s}`")))
    }
}

/// A reproducible description of one generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub family: Family,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clause_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Distribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Distribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(family: Family, d: usize, seed: u64) -> Self {
        Self {
            family,
            d,
            k: None,
            density: None,
            clause_ratio: None,
            couplings: None,
            fields: None,
            scale: None,
            seed,
        }
    }

    /// `k`-regular model with `Ĵ ~ j`, `h ~ h`.
    pub fn k_regular(d: usize, k: usize, j: Distribution, h: Distribution, seed: u64) -> Self {
        Self { k: Some(k), couplings: Some(j), fields: Some(h), ..Self::new(Family::KRegular, d, seed) }
    }

    pub fn generate(&self) -> Result<IsingModel> {
        let d = self.d;
        let seed = self.seed;
        let need_dist = |v: Option<Distribution>, what: &str| {
            v.ok_or_else(|| Error::InvalidSpec(format!("{} requires a {what} distribution", self.family.name())))
        };
        match self.family {
            Family::KRegular => {
                let k = self.k.ok_or_else(|| Error::InvalidSpec("k-regular requires k".into()))?;
                random_k_regular(d, k, &need_dist(self.couplings, "coupling")?, &need_dist(self.fields, "field")?, seed)
            }
            Family::Complete => {
                complete_random(d, &need_dist(self.couplings, "coupling")?, &need_dist(self.fields, "field")?, seed)
            }
            Family::CompleteScaled => complete_random_scale_gaussian(d, self.scale.unwrap_or(1000.0), seed),
            Family::MaxCut3 => maxcut_regular(d, self.k.unwrap_or(3), seed),
            Family::MaxCutD => maxcut_dense(d, self.density.unwrap_or(0.5), seed),
            Family::SkIsing => sk_ising(d, seed),
            Family::SkQubo => sk_qubo(d, seed),
            Family::Nae3Sat => nae3sat(d, self.clause_ratio.unwrap_or(2.11), seed),
        }
    }
}

/// The three zero-mean ensembles of equal variance used for 6-regular benchmarks:
/// `Ĵ` with variance 1/3 and `h` with variance 12.
pub mod table1 {
    use super::Distribution;

    pub const D: usize = 1000;
    pub const K: usize = 6;

    #[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
    #[serde(rename_all = "lowercase")]
    pub enum Ensemble {
        Uniform,
        Gaussian,
        Binary,
    }

    impl Ensemble {
        pub const ALL: [Ensemble; 3] = [Ensemble::Uniform, Ensemble::Gaussian, Ensemble::Binary];

        pub fn name(&self) -> &'static str {
            match self {
                Ensemble::Uniform => "uniform",
                Ensemble::Gaussian => "gaussian",
                Ensemble::Binary => "binary",
            }
        }

        /// `(coupling, field)` distributions.
        pub fn distributions(&self) -> (Distribution, Distribution) {
            match self {
                Ensemble::Uniform => (
                    Distribution::Uniform { half_width: 1.0 },
                    Distribution::Uniform { half_width: 6.0 },
                ),
                Ensemble::Gaussian => (
                    Distribution::Gaussian { variance: 1.0 / 3.0 },
                    Distribution::Gaussian { variance: 12.0 },
                ),
                Ensemble::Binary => (
                    Distribution::Binary { level: 1.0 / 3f64.sqrt() },
                    Distribution::Binary { level: 2.0 * 3f64.sqrt() },
                ),
            }
        }
    }
}

/// Named instance ensembles for benchmarking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// 6-regular graph with one of the equal-variance weight ensembles.
    Table1(table1::Ensemble),
    /// Complete graphs, alternating `U(−1000, 1000)` weights with the
    /// per-instance Gaussian scale family.
    Table2,
    /// One of the fixed benchmark families.
    Typical(Family),
}

impl Preset {
    pub fn name(&self) -> String {
        match self {
            Preset::Table1(e) => format!("table1-{}", e.name()),
            Preset::Table2 => "table2".to_string(),
            Preset::Typical(f) => f.name().to_string(),
        }
    }

    pub fn default_d(&self) -> usize {
        match self {
            Preset::Table1(_) | Preset::Table2 => table1::D,
            Preset::Typical(_) => 200,
        }
    }

    /// Spec of the `index`-th instance; `seed` is that instance's own seed.
    pub fn instance(&self, index: usize, d: usize, seed: u64) -> Result<InstanceSpec> {
        Ok(match *self {
            Preset::Table1(e) => {
                let (j, h) = e.distributions();
                InstanceSpec::k_regular(d, table1::K, j, h, seed)
            }
            Preset::Table2 if index % 2 == 0 => {
                let u = Distribution::Uniform { half_width: 1000.0 };
                InstanceSpec { couplings: Some(u), fields: Some(u), ..InstanceSpec::new(Family::Complete, d, seed) }
            }
            Preset::Table2 => InstanceSpec { scale: Some(1000.0), ..InstanceSpec::new(Family::CompleteScaled, d, seed) },
            Preset::Typical(Family::KRegular) | Preset::Typical(Family::Complete) | Preset::Typical(Family::CompleteScaled) => {
                return Err(Error::InvalidSpec(format!("{} needs explicit parameters; use a table preset", self.name())));
            }
            Preset::Typical(f) => InstanceSpec::new(f, d, seed),
        })
    }

    /// Per-instance seeds derived from one master seed.
    pub fn instance_seeds(seed: u64, count: usize) -> Vec<u64> {
        let mut rng = rng_for(seed);
        (0..count).map(|_| rng.random()).collect()
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase();
        if let Some(rest) = norm.strip_prefix("table1-") {
            return table1::Ensemble::ALL
                .into_iter()
                .find(|e| e.name() == rest)
                .map(Preset::Table1)
                .ok_or_else(|| Error::InvalidSpec(format!("unknown preset `{s}`")));
        }
        if norm == "table2" {
            return Ok(Preset::Table2);
        }
        let family = norm.strip_prefix("table3-").unwrap_or(&norm);
        family.parse().map(Preset::Typical).map_err(|_| Error::InvalidSpec(format!("unknown preset `{s}`")))
    }
}
