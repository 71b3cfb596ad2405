//! Scalar Ising model: `E(s) = sᵀJs + hᵀs + offset` over `s ∈ {-1,+1}^d`.
//!
//! `J` is symmetric with a zero diagonal and is stored once per unordered
//! pair as an upper-triangular coupling list. Hamiltonian-convention weights
//! (`Ĵ`, one term per unordered pair) relate to the stored ones by `J = Ĵ/2`.

use std::collections::BTreeMap;
use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Spin = i8;

/// One stored entry of the symmetric coupling matrix, `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Row-compressed view of both triangles of `J`.
#[derive(Clone, Debug, Default)]
struct Adjacency {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Adjacency {
    fn build(d: usize, couplings: &[Coupling]) -> Self {
        let mut degree = vec![0usize; d];
        for c in couplings {
            degree[c.i] += 1;
            degree[c.j] += 1;
        }
        let mut row_ptr = Vec::with_capacity(d + 1);
        row_ptr.push(0);
        for deg in &degree {
            row_ptr.push(row_ptr.last().unwrap() + deg);
        }
        let nnz = row_ptr[d];
        let mut cols = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        let mut cursor = row_ptr[..d].to_vec();
        // Couplings are sorted by (i, j), so every row ends up column-sorted.
        for c in couplings {
            cols[cursor[c.i]] = c.j;
            vals[cursor[c.i]] = c.weight;
            cursor[c.i] += 1;
        }
        for c in couplings {
            cols[cursor[c.j]] = c.i;
            vals[cursor[c.j]] = c.weight;
            cursor[c.j] += 1;
        }
        for row in 0..d {
            let (lo, hi) = (row_ptr[row], row_ptr[row + 1]);
            let mut pairs: Vec<(usize, f64)> =
                cols[lo..hi].iter().copied().zip(vals[lo..hi].iter().copied()).collect();
            pairs.sort_by_key(|p| p.0);
            for (k, (c, v)) in pairs.into_iter().enumerate() {
                cols[lo + k] = c;
                vals[lo + k] = v;
            }
        }
        Self { row_ptr, cols, vals }
    }
}

/// An Ising problem instance in the scalar (symmetric `J`) convention.
#[derive(Clone, Debug)]
pub struct IsingModel {
    d: usize,
    couplings: Vec<Coupling>,
    fields: Vec<f64>,
    offset: f64,
    adjacency: Adjacency,
}

impl PartialEq for IsingModel {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.couplings == other.couplings
            && self.fields == other.fields
            && self.offset == other.offset
    }
}

impl IsingModel {
    /// Builds a model from scalar-convention couplings, rejecting repeated pairs.
    ///
    /// Pairs may be given in either orientation; they are stored with `i < j`.
    /// Couplings whose weight is exactly zero are dropped.
    pub fn new<I>(d: usize, couplings: I, fields: Vec<f64>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        Self::build(d, couplings, fields, true)
    }

    /// Like [`IsingModel::new`] but sums the weights of repeated pairs.
    pub fn accumulate<I>(d: usize, couplings: I, fields: Vec<f64>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        Self::build(d, couplings, fields, false)
    }

    /// Builds a model from Hamiltonian-convention weights `Ĵ`, storing `Ĵ/2`.
    pub fn from_hamiltonian<I>(d: usize, couplings: I, fields: Vec<f64>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        Self::new(d, couplings.into_iter().map(|(i, j, w)| (i, j, 0.5 * w)), fields)
    }

    fn build<I>(d: usize, couplings: I, fields: Vec<f64>, strict: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if fields.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: fields.len() });
        }
        if let Some(pos) = fields.iter().position(|h| !h.is_finite()) {
            return Err(Error::InvalidModel(format!("field {pos} is not finite")));
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, w) in couplings {
            if a >= d || b >= d {
                return Err(Error::InvalidModel(format!(
                    "coupling ({a}, {b}) out of range for d = {d}"
                )));
            }
            if a == b {
                return Err(Error::InvalidModel(format!("self-coupling on spin {a}")));
            }
            if !w.is_finite() {
                return Err(Error::InvalidModel(format!("coupling ({a}, {b}) is not finite")));
            }
            let key = (a.min(b), a.max(b));
            match merged.get_mut(&key) {
                Some(_) if strict => {
                    return Err(Error::InvalidModel(format!(
                        "duplicate coupling ({}, {})",
                        key.0, key.1
                    )));
                }
                Some(existing) => *existing += w,
                None => {
                    merged.insert(key, w);
                }
            }
        }
        let couplings: Vec<Coupling> = merged
            .into_iter()
            .filter(|&(_, w)| w != 0.0)
            .map(|((i, j), weight)| Coupling { i, j, weight })
            .collect();
        let adjacency = Adjacency::build(d, &couplings);
        Ok(Self { d, couplings, fields, offset: 0.0, adjacency })
    }

    /// Returns the same model with its constant energy offset replaced.
    pub fn with_offset(mut self, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::InvalidModel("offset is not finite".into()));
        }
        self.offset = offset;
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Number of stored (upper-triangular) couplings.
    pub fn num_couplings(&self) -> usize {
        self.couplings.len()
    }

    /// Neighbors of spin `i` with their coupling weights, in ascending index order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let a = &self.adjacency;
        let (lo, hi) = (a.row_ptr[i], a.row_ptr[i + 1]);
        a.cols[lo..hi].iter().copied().zip(a.vals[lo..hi].iter().copied())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency.row_ptr[i + 1] - self.adjacency.row_ptr[i]
    }

    /// `Σ_j |J_ij|`.
    pub fn row_abs_sum(&self, i: usize) -> f64 {
        self.neighbors(i).map(|(_, w)| w.abs()).sum()
    }

    /// Maximum absolute row sum of `J` (zero when there are no couplings).
    pub fn max_row_abs_sum(&self) -> f64 {
        (0..self.d).map(|i| self.row_abs_sum(i)).fold(0.0, f64::max)
    }

    /// Frobenius norm of the symmetric `J`, both triangles counted.
    pub fn frobenius_norm(&self) -> f64 {
        (2.0 * self.couplings.iter().map(|c| c.weight * c.weight).sum::<f64>()).sqrt()
    }

    /// `‖h‖₁`.
    pub fn field_l1(&self) -> f64 {
        self.fields.iter().map(|h| h.abs()).sum()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.d {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.d, got: len })
        }
    }

    /// `E(s) = offset + Σ_{i<j} 2·J_ij·s_i·s_j + Σ_i h_i·s_i`.
    pub fn energy(&self, s: &SpinConfig) -> Result<f64> {
        self.check_len(s.len())?;
        Ok(self.energy_of(s))
    }

    pub(crate) fn energy_of(&self, s: &[Spin]) -> f64 {
        let pair: f64 = self
            .couplings
            .iter()
            .map(|c| 2.0 * c.weight * f64::from(s[c.i] * s[c.j]))
            .sum();
        let field: f64 = self.fields.iter().zip(s).map(|(h, &si)| h * f64::from(si)).sum();
        self.offset + pair + field
    }

    /// `Σ_j J_ij s_j`.
    pub fn local_field(&self, i: usize, s: &[Spin]) -> f64 {
        self.neighbors(i).map(|(j, w)| w * f64::from(s[j])).sum()
    }

    /// Energy change `E(X_F s) − E(s)` of flipping every spin in `flips`.
    ///
    /// Uses `−4 Σ_{i∈F} s_i (Js)_i − 2 Σ_{i∈F} h_i s_i`, which double-counts
    /// couplings with both ends in `F`; those pairs keep their product and
    /// are restored by `+8 Σ_{i<j∈F} J_ij s_i s_j`.
    pub fn flip_delta(&self, s: &SpinConfig, flips: &FlipSet) -> Result<f64> {
        self.check_len(s.len())?;
        flips.check_dim(self.d)?;
        let mut in_set = vec![false; self.d];
        for &i in flips.iter() {
            in_set[i] = true;
        }
        let mut delta = 0.0;
        for &i in flips.iter() {
            let si = f64::from(s[i]);
            let mut lf = 0.0;
            let mut inside = 0.0;
            for (j, w) in self.neighbors(i) {
                let term = w * f64::from(s[j]);
                lf += term;
                if in_set[j] && j > i {
                    inside += term;
                }
            }
            delta += -4.0 * si * lf - 2.0 * self.fields[i] * si + 8.0 * si * inside;
        }
        Ok(delta)
    }

    /// Energy change of flipping the single spin `i`.
    pub fn single_flip_delta(&self, i: usize, s: &[Spin]) -> f64 {
        let si = f64::from(s[i]);
        -4.0 * si * self.local_field(i, s) - 2.0 * self.fields[i] * si
    }

    /// `J·x` using both triangles of the stored couplings.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let mut out = vec![0.0; self.d];
        self.matvec_into(x, &mut out);
        Ok(out)
    }

    /// `out ← J·x`; lengths must equal `d`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.d);
        assert_eq!(out.len(), self.d);
        let a = &self.adjacency;
        for (row, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (a.row_ptr[row], a.row_ptr[row + 1]);
            *o = a.cols[lo..hi].iter().zip(&a.vals[lo..hi]).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// Dense row-major copy of `J` (both triangles). Intended for small models and tests.
    pub fn dense_couplings(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.d]; self.d];
        for c in &self.couplings {
            m[c.i][c.j] = c.weight;
            m[c.j][c.i] = c.weight;
        }
        m
    }
}

/// A point of `{-1, +1}^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Spin>", into = "Vec<Spin>")]
pub struct SpinConfig(Vec<Spin>);

impl SpinConfig {
    pub fn new(spins: Vec<Spin>) -> Result<Self> {
        if let Some(pos) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpins(format!(
                "entry {pos} is {}, expected -1 or +1",
                spins[pos]
            )));
        }
        Ok(Self(spins))
    }

    pub fn all_up(d: usize) -> Self {
        Self(vec![1; d])
    }

    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self((0..d).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
    }

    /// `+1` where `x ≥ 0`, `-1` otherwise.
    pub fn from_signs(x: &[f64]) -> Self {
        Self(x.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect())
    }

    pub(crate) fn from_vec_unchecked(spins: Vec<Spin>) -> Self {
        debug_assert!(spins.iter().all(|&s| s == 1 || s == -1));
        Self(spins)
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    /// Negates exactly the entries in `flips`.
    pub fn apply_flips(&self, flips: &FlipSet) -> Result<Self> {
        flips.check_dim(self.len())?;
        let mut out = self.clone();
        for &i in flips.iter() {
            out.flip(i);
        }
        Ok(out)
    }

    pub fn into_vec(self) -> Vec<Spin> {
        self.0
    }
}

impl Deref for SpinConfig {
    type Target = [Spin];

    fn deref(&self) -> &[Spin] {
        &self.0
    }
}

impl TryFrom<Vec<Spin>> for SpinConfig {
    type Error = Error;

    fn try_from(v: Vec<Spin>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpinConfig> for Vec<Spin> {
    fn from(s: SpinConfig) -> Self {
        s.0
    }
}

/// A set of distinct spin indices to flip together.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlipSet(Vec<usize>);

impl FlipSet {
    /// Validates the indices against `d`; rejects duplicates.
    pub fn new(indices: impl IntoIterator<Item = usize>, d: usize) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Contract(format!("duplicate flip index {}", w[0])));
        }
        if let Some(&bad) = v.iter().find(|&&i| i >= d) {
            return Err(Error::Contract(format!("flip index {bad} out of range for d = {d}")));
        }
        Ok(Self(v))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max >= d => {
                Err(Error::Contract(format!("flip index {max} out of range for d = {d}")))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spins(v: &[i8]) -> SpinConfig {
        SpinConfig::new(v.to_vec()).unwrap()
    }

    fn dense_energy(model: &IsingModel, s: &[Spin]) -> f64 {
        let j = model.dense_couplings();
        let mut e = 0.0;
        for a in 0..model.d() {
            for b in 0..model.d() {
                e += f64::from(s[a]) * j[a][b] * f64::from(s[b]);
            }
            e += model.fields()[a] * f64::from(s[a]);
        }
        e + model.offset()
    }

    fn random_model(rng: &mut ChaCha8Rng, d: usize, density: f64) -> IsingModel {
        let mut c = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                if rng.random::<f64>() < density {
                    c.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let h = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        IsingModel::new(d, c, h).unwrap()
    }

    #[test]
    fn energy_single_coupling() {
        let m = IsingModel::new(2, [(0, 1, 0.5)], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.energy(&spins(&[1, -1])).unwrap(), -1.0);
    }

    #[test]
    fn energy_fields_only() {
        let m = IsingModel::new(3, [], vec![1.0, -2.0, 3.0]).unwrap();
        assert_eq!(m.energy(&spins(&[-1, 1, -1])).unwrap(), -6.0);
    }

    #[test]
    fn energy_matches_dense_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_model(&mut rng, 4, 0.8);
        for bits in 0..16u32 {
            let s: Vec<i8> = (0..4).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).collect();
            let e = m.energy(&spins(&s)).unwrap();
            assert!((e - dense_energy(&m, &s)).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_rejects_wrong_length() {
        let m = IsingModel::new(3, [], vec![0.0; 3]).unwrap();
        assert!(matches!(
            m.energy(&spins(&[1, 1])),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn flip_delta_examples() {
        let m = IsingModel::new(2, [(0, 1, 0.5)], vec![0.0, 0.0]).unwrap();
        let s = spins(&[1, 1]);
        assert_eq!(m.flip_delta(&s, &FlipSet::empty()).unwrap(), 0.0);
        assert_eq!(m.flip_delta(&s, &FlipSet::new([0], 2).unwrap()).unwrap(), -2.0);
    }

    #[test]
    fn flip_delta_matches_recompute_d10() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = random_model(&mut rng, 10, 0.7);
        let s = SpinConfig::random(10, &mut rng);
        let f = FlipSet::new([1, 4, 7], 10).unwrap();
        let direct = m.energy(&s.apply_flips(&f).unwrap()).unwrap() - m.energy(&s).unwrap();
        assert!((m.flip_delta(&s, &f).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn literal_formula_needs_inner_pair_correction() {
        // Both flipped spins coupled: the uncorrected sum is off by 8·J·s0·s1.
        let m = IsingModel::new(2, [(0, 1, 0.5)], vec![0.0, 0.0]).unwrap();
        let s = spins(&[1, 1]);
        let f = FlipSet::new([0, 1], 2).unwrap();
        let literal: f64 = f
            .iter()
            .map(|&i| -4.0 * f64::from(s[i]) * m.local_field(i, &s))
            .sum();
        assert_eq!(literal, -4.0);
        assert_eq!(m.flip_delta(&s, &f).unwrap(), 0.0);
    }

    #[test]
    fn apply_flips_examples() {
        let s = spins(&[1, -1]);
        assert_eq!(s.apply_flips(&FlipSet::new([1], 2).unwrap()).unwrap(), spins(&[1, 1]));
        let s = spins(&[1, 1, 1]);
        let f = FlipSet::new([0, 2], 3).unwrap();
        let once = s.apply_flips(&f).unwrap();
        assert_eq!(once, spins(&[-1, 1, -1]));
        assert_eq!(once.apply_flips(&f).unwrap(), s);
    }

    #[test]
    fn flip_set_validation() {
        assert!(FlipSet::new([0, 0], 3).is_err());
        assert!(FlipSet::new([3], 3).is_err());
        let s = spins(&[1, 1]);
        assert!(s.apply_flips(&FlipSet::new([2], 3).unwrap()).is_err());
    }

    #[test]
    fn matvec_examples() {
        let m = IsingModel::new(2, [(0, 1, 0.5)], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.matvec(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        let empty = IsingModel::new(3, [], vec![0.0; 3]).unwrap();
        assert_eq!(empty.matvec(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 3]);
        assert!(m.matvec(&[1.0]).is_err());
    }

    #[test]
    fn construction_rules() {
        assert!(IsingModel::new(2, [(0, 1, 1.0), (1, 0, 1.0)], vec![0.0; 2]).is_err());
        let summed = IsingModel::accumulate(2, [(0, 1, 1.0), (1, 0, 0.5)], vec![0.0; 2]).unwrap();
        assert_eq!(summed.couplings(), &[Coupling { i: 0, j: 1, weight: 1.5 }]);
        let cancelled = IsingModel::accumulate(2, [(0, 1, 1.0), (0, 1, -1.0)], vec![0.0; 2]).unwrap();
        assert_eq!(cancelled.num_couplings(), 0);
        assert!(IsingModel::new(2, [(1, 1, 1.0)], vec![0.0; 2]).is_err());
        assert!(IsingModel::new(2, [(0, 2, 1.0)], vec![0.0; 2]).is_err());
        assert!(IsingModel::new(2, [(0, 1, f64::NAN)], vec![0.0; 2]).is_err());
        assert!(IsingModel::new(2, [], vec![0.0]).is_err());
        let ham = IsingModel::from_hamiltonian(3, [(2, 0, 1.0), (0, 1, -3.0)], vec![0.0; 3]).unwrap();
        assert_eq!(
            ham.couplings(),
            &[Coupling { i: 0, j: 1, weight: -1.5 }, Coupling { i: 0, j: 2, weight: 0.5 }]
        );
        assert_eq!(ham.offset(), 0.0);
    }

    #[test]
    fn spin_config_rejects_non_spins() {
        assert!(SpinConfig::new(vec![1, 0]).is_err());
        assert!(serde_json::from_str::<SpinConfig>("[1,2]").is_err());
    }

    #[test]
    fn zero_field_energy_is_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = random_model(&mut rng, 12, 0.5);
        m = IsingModel::new(12, m.couplings().iter().map(|c| (c.i, c.j, c.weight)), vec![0.0; 12])
            .unwrap();
        for _ in 0..20 {
            let s = SpinConfig::random(12, &mut rng);
            let neg = SpinConfig::new(s.iter().map(|x| -x).collect()).unwrap();
            assert_eq!(m.energy(&s).unwrap(), m.energy(&neg).unwrap());
        }
    }

    #[test]
    fn flip_delta_equivalence_1000_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        for _ in 0..1000 {
            let d = rng.random_range(1..=50);
            let density = rng.random_range(0.05..1.0);
            let m = random_model(&mut rng, d, density);
            let s = SpinConfig::random(d, &mut rng);
            let f = FlipSet::new((0..d).filter(|_| rng.random::<f64>() < 0.3), d).unwrap();
            let direct = m.energy(&s.apply_flips(&f).unwrap()).unwrap() - m.energy(&s).unwrap();
            let delta = m.flip_delta(&s, &f).unwrap();
            let scale = direct.abs().max(1.0);
            assert!((delta - direct).abs() <= 1e-9 * scale, "{delta} vs {direct}");
        }
    }

    proptest! {
        #[test]
        fn matvec_matches_dense(seed in any::<u64>(), d in 1usize..=100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(&mut rng, d, 0.1);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let dense = m.dense_couplings();
            let got = m.matvec(&x).unwrap();
            for r in 0..d {
                let want: f64 = dense[r].iter().zip(&x).map(|(a, b)| a * b).sum();
                prop_assert!((got[r] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }
}
