//! End-to-end pipeline: prune, select a domain on what is left, lift the
//! answer back to the original spins, and score it.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain_selection::{self, DomainConfig};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::model::{IsingModel, SpinConfig};
use crate::pruning::{self, PruneTrace};

/// Relative tolerance for the lifted-energy consistency check.
const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub domain: DomainConfig,
    pub enable_pruning: bool,
    pub collect_metrics: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { domain: DomainConfig::default(), enable_pruning: true, collect_metrics: true }
    }
}

impl SolveConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.domain.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub s: SpinConfig,
    pub energy: f64,
    /// Pruning rate `1 − d_reduced/d`; zero when pruning is disabled.
    pub eta: f64,
    pub reduced_d: usize,
    /// Domain-selection iterations summed over restarts.
    pub iterations: usize,
    pub iterations_per_restart: Vec<usize>,
    pub converged_flags: Vec<bool>,
    pub best_restart: usize,
    pub mu: f64,
    /// Seconds spent in prune + select + reconstruct.
    pub wall_time: f64,
    pub metrics: Option<MetricReport>,
}

impl SolveResult {
    pub fn chi_hat(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.chi_hat)
    }

    pub fn tts(&self) -> Option<f64> {
        self.metrics.as_ref().and_then(|m| m.tts)
    }

    pub fn speed(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.speed)
    }
}

fn identity_trace(d: usize) -> PruneTrace {
    PruneTrace { rounds: Vec::new(), original_d: d, survivor_map: (0..d).collect() }
}

pub fn solve(model: &IsingModel, config: &SolveConfig) -> Result<SolveResult> {
    config.domain.validate()?;
    let start = Instant::now();
    let (reduced, trace) = if config.enable_pruning {
        let p = pruning::prune(model);
        (p.reduced, p.trace)
    } else {
        (model.clone(), identity_trace(model.d()))
    };
    let selected = domain_selection::run(&reduced, &config.domain)?;
    let s = pruning::reconstruct(&trace, &selected.best_s)?;
    let wall_time = start.elapsed().as_secs_f64();

    let energy = model.energy(&s)?;
    let scale = energy.abs().max(selected.best_energy.abs()).max(1.0);
    if (energy - selected.best_energy).abs() > CONSISTENCY_TOL * scale {
        return Err(Error::Contract(format!(
            "lifted energy {energy} disagrees with reduced energy {}",
            selected.best_energy
        )));
    }
    let metrics = if config.collect_metrics && e_scale_nonzero(model) {
        Some(MetricReport::new(model, energy, wall_time)?)
    } else {
        None
    };
    Ok(SolveResult {
        s,
        energy,
        eta: pruning::pruning_rate(&trace),
        reduced_d: reduced.d(),
        iterations: selected.total_iterations(),
        iterations_per_restart: selected.iterations_per_restart,
        converged_flags: selected.converged_flags,
        best_restart: selected.best_restart,
        mu: selected.mu,
        wall_time,
        metrics,
    })
}

/// χ̂ is undefined on an all-zero model; such solves simply skip metrics.
fn e_scale_nonzero(model: &IsingModel) -> bool {
    crate::metrics::e_max_hat(model) > 0.0
}

/// Solves every model with the same configuration, in parallel. Slot `k` of
/// the output belongs to `models[k]`; a failure stays in its own slot.
pub fn solve_many(models: &[IsingModel], config: &SolveConfig) -> Vec<Result<SolveResult>> {
    models.par_iter().map(|m| solve(m, config)).collect()
}
