//! Reference solvers: exhaustive search for small problems, single-flip
//! steepest descent, and Metropolis simulated annealing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IsingModel, Spin, SpinConfig};

/// Largest model accepted by [`brute_force`].
pub const BRUTE_FORCE_MAX_D: usize = 24;

const RESYNC_INTERVAL: u64 = 1 << 12;

fn local_fields(model: &IsingModel, s: &[Spin]) -> Vec<f64> {
    (0..model.d()).map(|i| model.local_field(i, s)).collect()
}

#[inline]
fn flip_cost(lf: f64, h: f64, s: Spin) -> f64 {
    let s = f64::from(s);
    -4.0 * s * lf - 2.0 * h * s
}

/// Flips spin `i` and updates the neighbours' local fields.
fn flip_in_place(model: &IsingModel, s: &mut [Spin], lf: &mut [f64], i: usize) {
    s[i] = -s[i];
    let step = 2.0 * f64::from(s[i]);
    for (j, w) in model.neighbors(i) {
        lf[j] += step * w;
    }
}

/// Exact minimum by Gray-code enumeration (one spin flip per candidate).
///
/// Ties are resolved toward the lexicographically smallest configuration
/// with `-1 < +1`. Energies that agree to within `1e-9` relative count as
/// ties, which absorbs rounding in the incremental updates.
pub fn brute_force(model: &IsingModel) -> Result<(SpinConfig, f64)> {
    let d = model.d();
    if d > BRUTE_FORCE_MAX_D {
        return Err(Error::TooLarge { d, limit: BRUTE_FORCE_MAX_D });
    }
    let h = model.fields();
    let mut s: Vec<Spin> = vec![-1; d];
    let mut lf = local_fields(model, &s);
    let mut energy = model.energy_of(&s);
    // Bit d-1-i set ⇔ spin i is +1, so integer order is lexicographic order.
    let key_bit = |i: usize| 1u32 << (d - 1 - i);
    let mut key = 0u32;
    let mut best = (energy, key);
    for step in 1u64..(1u64 << d) {
        let i = step.trailing_zeros() as usize;
        energy += flip_cost(lf[i], h[i], s[i]);
        flip_in_place(model, &mut s, &mut lf, i);
        key ^= key_bit(i);
        if step % RESYNC_INTERVAL == 0 {
            lf = local_fields(model, &s);
            energy = model.energy_of(&s);
        }
        let tol = 1e-9 * best.0.abs().max(1.0);
        if energy < best.0 - tol || (energy <= best.0 + tol && key < best.1) {
            best = (energy, key);
        }
    }
    let spins: Vec<Spin> =
        (0..d).map(|i| if best.1 & key_bit(i) != 0 { 1 } else { -1 }).collect();
    let config = SpinConfig::from_vec_unchecked(spins);
    let e = model.energy_of(&config);
    Ok((config, e))
}

/// Greedy single-flip descent: repeatedly flips the spin with the most
/// negative energy change (lowest index on ties) until none is negative.
pub fn steepest_descent(model: &IsingModel, s0: &SpinConfig) -> Result<SpinConfig> {
    Ok(steepest_descent_counted(model, s0)?.0)
}

/// [`steepest_descent`] that also reports how many flips it made.
pub fn steepest_descent_counted(model: &IsingModel, s0: &SpinConfig) -> Result<(SpinConfig, usize)> {
    let d = model.d();
    if s0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: s0.len() });
    }
    let h = model.fields();
    let mut s: Vec<Spin> = s0.to_vec();
    let mut lf = local_fields(model, &s);
    let mut delta: Vec<f64> = (0..d).map(|i| flip_cost(lf[i], h[i], s[i])).collect();
    let scale = 1.0 + model.max_row_abs_sum() + h.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let threshold = -1e-12 * scale;
    let mut flips = 0;
    loop {
        let mut best = (threshold, usize::MAX);
        for (i, &dl) in delta.iter().enumerate() {
            if dl < best.0 {
                best = (dl, i);
            }
        }
        let i = best.1;
        if i == usize::MAX {
            break;
        }
        flip_in_place(model, &mut s, &mut lf, i);
        delta[i] = -delta[i];
        for (j, _) in model.neighbors(i) {
            delta[j] = flip_cost(lf[j], h[j], s[j]);
        }
        flips += 1;
    }
    Ok((SpinConfig::from_vec_unchecked(s), flips))
}

/// Steepest descent from a uniformly random start drawn from `seed`.
pub fn steepest_descent_seeded(model: &IsingModel, seed: u64) -> Result<SpinConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    steepest_descent(model, &SpinConfig::random(model.d(), &mut rng))
}

/// Temperature schedule for [`simulated_annealing`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub t_start: f64,
    pub t_end: f64,
    pub sweeps: usize,
    /// Proposals per sweep. `None` visits every spin once, in index order;
    /// `Some(n)` makes `n` proposals at uniformly random spins.
    pub moves_per_sweep: Option<usize>,
}

impl AnnealSchedule {
    pub const DEFAULT_SWEEPS: usize = 5;

    /// `t_start = max_i Σ_j |J_ij| + max_i |h_i|`, `t_end = 1e-3·t_start`.
    pub fn for_model(model: &IsingModel, sweeps: usize) -> Self {
        let hmax = model.fields().iter().fold(0.0f64, |a, h| a.max(h.abs()));
        let t_start = (model.max_row_abs_sum() + hmax).max(f64::MIN_POSITIVE);
        Self { t_start, t_end: 1e-3 * t_start, sweeps, moves_per_sweep: None }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_start.is_finite()
            && self.t_end.is_finite()
            && self.t_end > 0.0
            && self.t_start >= self.t_end;
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "temperatures must be positive and non-increasing, got {} → {}",
                self.t_start, self.t_end
            )))
        }
    }

    /// Temperature of sweep `k`, geometrically interpolated.
    pub fn temperature(&self, k: usize) -> f64 {
        if self.sweeps <= 1 {
            return self.t_start;
        }
        let frac = k as f64 / (self.sweeps - 1) as f64;
        self.t_start * (self.t_end / self.t_start).powf(frac)
    }
}

/// Metropolis annealing from a random start drawn from `seed`.
pub fn simulated_annealing(model: &IsingModel, schedule: &AnnealSchedule, seed: u64) -> Result<SpinConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s0 = SpinConfig::random(model.d(), &mut rng);
    anneal_from(model, &s0, schedule, &mut rng)
}

/// Metropolis annealing from `s0`; returns the lowest-energy configuration visited.
pub fn simulated_annealing_from(
    model: &IsingModel,
    s0: &SpinConfig,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<SpinConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    anneal_from(model, s0, schedule, &mut rng)
}

fn anneal_from<R: Rng>(model: &IsingModel, s0: &SpinConfig, schedule: &AnnealSchedule, rng: &mut R) -> Result<SpinConfig> {
    schedule.validate()?;
    let d = model.d();
    if s0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: s0.len() });
    }
    if d == 0 {
        return Ok(s0.clone());
    }
    let h = model.fields();
    let mut s: Vec<Spin> = s0.to_vec();
    let mut lf = local_fields(model, &s);
    let mut energy = model.energy_of(&s);
    let mut best_energy = energy;
    let mut best = s.clone();
    let propose = |i: usize, t: f64, s: &mut Vec<Spin>, lf: &mut Vec<f64>, energy: &mut f64, rng: &mut R| {
        let delta = flip_cost(lf[i], h[i], s[i]);
        if delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp() {
            flip_in_place(model, s, lf, i);
            *energy += delta;
        }
    };
    for k in 0..schedule.sweeps {
        let t = schedule.temperature(k);
        match schedule.moves_per_sweep {
            None => {
                for i in 0..d {
                    propose(i, t, &mut s, &mut lf, &mut energy, rng);
                    if energy < best_energy {
                        best_energy = energy;
                        best.copy_from_slice(&s);
                    }
                }
            }
            Some(n) => {
                for _ in 0..n {
                    let i = rng.random_range(0..d);
                    propose(i, t, &mut s, &mut lf, &mut energy, rng);
                    if energy < best_energy {
                        best_energy = energy;
                        best.copy_from_slice(&s);
                    }
                }
            }
        }
    }
    Ok(SpinConfig::from_vec_unchecked(best))
}
