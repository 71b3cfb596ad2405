//! Relaxed domain search.
//!
//! Each sign pattern of `s` indexes one feasible domain of an L1
//! maximisation equivalent to the Ising problem. The pattern is relaxed to
//! `s̃ = sgn(sin θ)` with continuous angles `θ`, and
//!
//! ```text
//! L(θ) = Σ_j sin(θ_j) · ((J − μI)·s̃ + h)_j
//! ```
//!
//! is minimised with Adam, holding `s̃` fixed inside each step. At vertex
//! angles (`θ_j = ±π/2`) the loss equals `E(s̃) − μ·d` without the model
//! offset. The final angles are turned back into spins by [`extract`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::steepest_descent;
use crate::error::{Error, Result};
use crate::model::{IsingModel, Spin, SpinConfig};

/// Guard for the convergence ratio's denominator.
pub const CONVERGENCE_DENOMINATOR_FLOOR: f64 = 1e-12;

/// How the penalty weight `μ` is chosen for a model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Penalty {
    /// `μ` as given.
    Fixed(f64),
    /// [`auto_mu`]: just above the largest absolute row sum of `J`.
    Dominant,
    /// `factor ×` the root-mean-square row norm of `J` (see [`scaled_mu`]).
    RowNorm(f64),
}

impl Penalty {
    pub fn resolve(&self, model: &IsingModel) -> f64 {
        match *self {
            Penalty::Fixed(mu) => mu,
            Penalty::Dominant => auto_mu(model),
            Penalty::RowNorm(factor) => scaled_mu(model, factor),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub penalty: Penalty,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub convergence_ratio: f64,
    pub convergence_window: usize,
    pub max_iterations: usize,
    pub restarts: usize,
    /// Finish every restart with single-flip steepest descent.
    pub polish: bool,
    pub seed: u64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            penalty: Penalty::RowNorm(DEFAULT_ROW_NORM_FACTOR),
            learning_rate: 6.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            convergence_ratio: 0.005,
            convergence_window: 5,
            max_iterations: 1000,
            restarts: 5,
            polish: true,
            seed: 0,
        }
    }
}

/// Default multiplier for [`Penalty::RowNorm`].
pub const DEFAULT_ROW_NORM_FACTOR: f64 = 0.01;

impl DomainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Contract(format!("{name} must be positive, got {v}")))
            }
        };
        match self.penalty {
            Penalty::Fixed(mu) => positive("mu", mu)?,
            Penalty::RowNorm(f) => positive("row-norm factor", f)?,
            Penalty::Dominant => {}
        }
        positive("learning_rate", self.learning_rate)?;
        positive("eps", self.eps)?;
        positive("convergence_ratio", self.convergence_ratio)?;
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Contract(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if self.convergence_window < 2 {
            return Err(Error::Contract("convergence_window must be at least 2".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Contract("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Optimizer state of one restart.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainState {
    pub theta: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub loss_history: Vec<f64>,
    pub iteration: usize,
}

impl DomainState {
    pub fn new(theta: Vec<f64>) -> Self {
        let d = theta.len();
        Self { theta, m: vec![0.0; d], v: vec![0.0; d], loss_history: Vec::new(), iteration: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainResult {
    pub best_s: SpinConfig,
    pub best_energy: f64,
    pub best_restart: usize,
    pub mu: f64,
    pub iterations_per_restart: Vec<usize>,
    pub converged_flags: Vec<bool>,
    /// Energy each restart ended with, in restart order.
    pub restart_energies: Vec<f64>,
}

impl DomainResult {
    pub fn total_iterations(&self) -> usize {
        self.iterations_per_restart.iter().sum()
    }
}

/// `1.001 · max_i Σ_j |J_ij|`, or `1` for a model without couplings.
///
/// With this weight the diagonal of `J − μI` dominates every row.
pub fn auto_mu(model: &IsingModel) -> f64 {
    if model.num_couplings() == 0 {
        return 1.0;
    }
    1.001 * model.max_row_abs_sum()
}

/// `factor · sqrt(mean_i Σ_j J_ij²)`, the typical size of a local field
/// `(Js)_i` under a random `s`; `1` for a model without couplings.
pub fn scaled_mu(model: &IsingModel, factor: f64) -> f64 {
    if model.num_couplings() == 0 || model.d() == 0 {
        return 1.0;
    }
    let f = model.frobenius_norm();
    factor * (f * f / model.d() as f64).sqrt()
}

/// Domain indicator `s̃_j = sgn(sin θ_j)`, ties at `sin θ_j = 0` to `+1`.
pub fn tilde_s(theta: &[f64]) -> SpinConfig {
    SpinConfig::from_vec_unchecked(theta.iter().map(|t| if t.sin() >= 0.0 { 1 } else { -1 }).collect())
}

fn check_len(model: &IsingModel, len: usize) -> Result<()> {
    if len == model.d() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: model.d(), got: len })
    }
}

/// Reusable buffers for loss/gradient evaluation.
struct Workspace {
    spins: Vec<f64>,
    js: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self { spins: vec![0.0; d], js: vec![0.0; d] }
    }

    /// Fills `g = (J − μI)·s̃ + h` into `js` and returns `Σ sin(θ)·g`;
    /// writes `cos(θ)·g` into `grad` when given.
    fn evaluate(&mut self, model: &IsingModel, mu: f64, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        for (s, t) in self.spins.iter_mut().zip(theta) {
            *s = if t.sin() >= 0.0 { 1.0 } else { -1.0 };
        }
        model.matvec_into(&self.spins, &mut self.js);
        let h = model.fields();
        for ((g, s), hj) in self.js.iter_mut().zip(&self.spins).zip(h) {
            *g += hj - mu * s;
        }
        let loss = theta.iter().zip(&self.js).map(|(t, g)| t.sin() * g).sum();
        if let Some(grad) = grad {
            for ((out, t), g) in grad.iter_mut().zip(theta).zip(&self.js) {
                *out = t.cos() * g;
            }
        }
        loss
    }
}

/// `L(θ) = Σ_j sin(θ_j)·g_j` with `g = J·s̃ − μ·s̃ + h`.
pub fn loss(model: &IsingModel, mu: f64, theta: &[f64]) -> Result<f64> {
    check_len(model, theta.len())?;
    Ok(Workspace::new(model.d()).evaluate(model, mu, theta, None))
}

/// `∂L/∂θ_j = cos(θ_j)·g_j`, treating `s̃` as constant.
pub fn gradient(model: &IsingModel, mu: f64, theta: &[f64]) -> Result<Vec<f64>> {
    check_len(model, theta.len())?;
    let mut grad = vec![0.0; model.d()];
    Workspace::new(model.d()).evaluate(model, mu, theta, Some(&mut grad));
    Ok(grad)
}

/// One bias-corrected Adam update of `state.theta` against `grad`.
pub fn adam_step(state: &mut DomainState, grad: &[f64], config: &DomainConfig) {
    assert_eq!(grad.len(), state.theta.len(), "gradient length must match θ");
    state.iteration += 1;
    let t = state.iteration as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for (((theta, m), v), &g) in state.theta.iter_mut().zip(&mut state.m).zip(&mut state.v).zip(grad) {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *theta -= config.learning_rate * m_hat / (v_hat.sqrt() + config.eps);
    }
}

/// Relative flatness test on a loss history whose first entry is `L(θ_init)`.
///
/// True once `convergence_window` post-initial losses exist and
/// `(max − min of the last window) / max(|L_now − L_init|, 1e-12)` is at
/// most `convergence_ratio`.
pub fn converged(loss_history: &[f64], config: &DomainConfig) -> bool {
    let window = config.convergence_window;
    if loss_history.len() < window + 1 {
        return false;
    }
    let recent = &loss_history[loss_history.len() - window..];
    let (lo, hi) = recent.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let progress = (loss_history[loss_history.len() - 1] - loss_history[0]).abs();
    (hi - lo) / progress.max(CONVERGENCE_DENOMINATOR_FLOOR) <= config.convergence_ratio
}

/// Spins from angles: the better of `s̃` and its best response
/// `−sgn((J − μI)·s̃ + h)`, where `sgn(0) = +1`.
pub fn extract(model: &IsingModel, mu: f64, theta: &[f64]) -> Result<SpinConfig> {
    check_len(model, theta.len())?;
    let c1 = tilde_s(theta);
    let x: Vec<f64> = c1.iter().map(|&s| f64::from(s)).collect();
    let mut g = vec![0.0; model.d()];
    model.matvec_into(&x, &mut g);
    let c2: Vec<Spin> = g
        .iter()
        .zip(&x)
        .zip(model.fields())
        .map(|((jx, s), h)| if jx - mu * s + h >= 0.0 { -1 } else { 1 })
        .collect();
    let c2 = SpinConfig::from_vec_unchecked(c2);
    if model.energy_of(&c2) < model.energy_of(&c1) {
        Ok(c2)
    } else {
        Ok(c1)
    }
}

/// Initial angles of restart `restart`: `θ_j ~ U(−π, π)` from an
/// independent stream of the master seed.
pub fn initial_theta(d: usize, seed: u64, restart: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    (0..d).map(|_| rng.random_range(-PI..PI)).collect()
}

/// Outcome of a single restart.
#[derive(Clone, Debug)]
pub struct RestartOutcome {
    pub spins: SpinConfig,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub state: DomainState,
}

/// Runs the optimizer from `theta` until convergence or the iteration cap.
pub fn descend(model: &IsingModel, mu: f64, theta: Vec<f64>, config: &DomainConfig) -> Result<RestartOutcome> {
    check_len(model, theta.len())?;
    let d = model.d();
    let mut ws = Workspace::new(d);
    let mut grad = vec![0.0; d];
    let mut state = DomainState::new(theta);
    let mut current = ws.evaluate(model, mu, &state.theta, Some(&mut grad));
    state.loss_history.push(current);
    let mut done = false;
    while state.iteration < config.max_iterations {
        adam_step(&mut state, &grad, config);
        current = ws.evaluate(model, mu, &state.theta, Some(&mut grad));
        state.loss_history.push(current);
        if converged(&state.loss_history, config) {
            done = true;
            break;
        }
    }
    let mut spins = extract(model, mu, &state.theta)?;
    if config.polish {
        spins = steepest_descent(model, &spins)?;
    }
    let energy = model.energy_of(&spins);
    Ok(RestartOutcome { spins, energy, iterations: state.iteration, converged: done, state })
}

/// Best-of-restarts domain selection on `model`.
pub fn run(model: &IsingModel, config: &DomainConfig) -> Result<DomainResult> {
    config.validate()?;
    let d = model.d();
    let mu = config.penalty.resolve(model);
    if d == 0 {
        return Ok(DomainResult {
            best_s: SpinConfig::from_vec_unchecked(Vec::new()),
            best_energy: model.offset(),
            best_restart: 0,
            mu,
            iterations_per_restart: vec![0; config.restarts],
            converged_flags: vec![true; config.restarts],
            restart_energies: vec![model.offset(); config.restarts],
        });
    }
    let outcomes: Vec<RestartOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|r| descend(model, mu, initial_theta(d, config.seed, r), config))
        .collect::<Result<_>>()?;
    let best_restart = outcomes
        .iter()
        .enumerate()
        .fold(0, |best, (r, o)| if o.energy < outcomes[best].energy { r } else { best });
    Ok(DomainResult {
        best_s: outcomes[best_restart].spins.clone(),
        best_energy: outcomes[best_restart].energy,
        best_restart,
        mu,
        iterations_per_restart: outcomes.iter().map(|o| o.iterations).collect(),
        converged_flags: outcomes.iter().map(|o| o.converged).collect(),
        restart_energies: outcomes.iter().map(|o| o.energy).collect(),
    })
}
