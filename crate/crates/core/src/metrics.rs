//! Solution-quality and speed metrics.
//!
//! The Hamiltonian ratio `χ̂` places an energy between norm-based estimates
//! `±(√d·‖J‖_F + ‖h‖₁)` of the energy extremes, so `0.5` is the midpoint and
//! values above `1` are possible. Time-to-solution substitutes the heuristic
//! `e^χ̂ / d` for the unknown per-run success probability.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::baselines::brute_force;
use crate::error::{Error, Result};
use crate::model::IsingModel;

/// `√d·‖J‖_F + ‖h‖₁`, the estimated magnitude of the energy extremes.
pub fn e_max_hat(model: &IsingModel) -> f64 {
    (model.d() as f64).sqrt() * model.frobenius_norm() + model.field_l1()
}

/// `χ̂ = 1/2 − E / (2·(√d·‖J‖_F + ‖h‖₁))`.
pub fn chi_hat(model: &IsingModel, energy: f64) -> Result<f64> {
    let scale = e_max_hat(model);
    if scale <= 0.0 {
        return Err(Error::UndefinedMetric("chi_hat needs a nonzero coupling or field".into()));
    }
    Ok(0.5 - energy / (2.0 * scale))
}

/// Time to reach the optimum with 99% confidence, `T·ln(0.01)/ln(1 − e^χ̂/d)`.
pub fn tts(wall_time_s: f64, chi_hat: f64, d: usize) -> Result<f64> {
    if !(wall_time_s > 0.0) {
        return Err(Error::UndefinedMetric(format!("tts needs a positive time, got {wall_time_s}")));
    }
    let p = chi_hat.exp() / d as f64;
    if !(p < 1.0) {
        return Err(Error::UndefinedMetric(format!("success estimate e^χ̂/d = {p} is not below 1")));
    }
    Ok(wall_time_s * 0.01f64.ln() / (-p).ln_1p())
}

/// `v = χ̂ / T`.
pub fn speed(chi_hat: f64, wall_time_s: f64) -> f64 {
    chi_hat / wall_time_s
}

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Expected first-round determined fraction on a `k`-regular graph with
/// couplings `U(−α, α)` and fields `U(−β, β)`:
///
/// ```text
/// (1/β) ∫₀^β Φ((x − kα/2) / (α·√(k/12))) dx
/// ```
///
/// The coupling mass `Σ|J|` is approximated by a normal with mean `kα/2`
/// and variance `kα²/12`.
pub fn estimate_eta1(k: usize, alpha: f64, beta: f64) -> Result<f64> {
    if k == 0 || !(alpha > 0.0) || !(beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::Contract(format!("need k ≥ 1, α > 0, β > 0; got k={k}, α={alpha}, β={beta}")));
    }
    let mean = k as f64 * alpha / 2.0;
    let sd = alpha * (k as f64 / 12.0).sqrt();
    let f = |x: f64| phi((x - mean) / sd);
    // The integral is at most β, so an absolute 1e-8 on the mean needs β·1e-8.
    Ok(adaptive_simpson(&f, 0.0, beta, 1e-8 * beta) / beta)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Metrics attached to one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub chi_hat: f64,
    /// Absent when `e^χ̂/d ≥ 1` or the time is not positive.
    pub tts: Option<f64>,
    pub speed: f64,
    pub e_hat: f64,
    pub e_max_hat: f64,
    pub d: usize,
    /// Exact `χ`, only for models small enough to enumerate.
    pub chi_exact: Option<f64>,
}

impl MetricReport {
    pub fn new(model: &IsingModel, energy: f64, wall_time_s: f64) -> Result<Self> {
        let chi = chi_hat(model, energy)?;
        Ok(Self {
            chi_hat: chi,
            tts: tts(wall_time_s, chi, model.d()).ok(),
            speed: speed(chi, wall_time_s),
            e_hat: energy,
            e_max_hat: e_max_hat(model),
            d: model.d(),
            chi_exact: None,
        })
    }

    /// Also fills the exact ratio when `d` permits enumeration.
    pub fn with_exact(mut self, model: &IsingModel) -> Result<Self> {
        if model.d() <= crate::baselines::BRUTE_FORCE_MAX_D {
            let (e_min, e_max) = exact_extremes(model)?;
            self.chi_exact = chi_exact(self.e_hat, e_min, e_max);
        }
        Ok(self)
    }
}

/// `χ = (E_max − E) / (E_max − E_min)`; `None` for a constant energy.
pub fn chi_exact(energy: f64, e_min: f64, e_max: f64) -> Option<f64> {
    (e_max > e_min).then(|| (e_max - energy) / (e_max - e_min))
}

/// Exact minimum and maximum energy by enumeration.
pub fn exact_extremes(model: &IsingModel) -> Result<(f64, f64)> {
    let (_, e_min) = brute_force(model)?;
    let negated = IsingModel::new(
        model.d(),
        model.couplings().iter().map(|c| (c.i, c.j, -c.weight)),
        model.fields().iter().map(|h| -h).collect(),
    )?
    .with_offset(-model.offset())?;
    let (_, neg_min) = brute_force(&negated)?;
    Ok((e_min, -neg_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::sk_ising;
    use crate::SpinConfig;

    fn one_field() -> IsingModel {
        IsingModel::new(1, [], vec![2.0]).unwrap()
    }

    #[test]
    fn chi_hat_examples() {
        let m = one_field();
        assert_eq!(chi_hat(&m, -2.0).unwrap(), 1.0);
        assert_eq!(chi_hat(&m, 2.0).unwrap(), 0.0);
        assert_eq!(chi_hat(&sk_ising(20, 1).unwrap(), 0.0).unwrap(), 0.5);
        let zero = IsingModel::new(3, [], vec![0.0; 3]).unwrap();
        assert!(matches!(chi_hat(&zero, 0.0), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn chi_hat_uses_both_triangles() {
        // ‖J‖_F = √(2·0.5²), d = 2.
        let m = IsingModel::new(2, [(0, 1, 0.5)], vec![0.0; 2]).unwrap();
        let scale = 2f64.sqrt() * (2.0 * 0.25f64).sqrt();
        assert!((e_max_hat(&m) - scale).abs() < 1e-15);
        assert!((chi_hat(&m, -1.0).unwrap() - (0.5 + 1.0 / (2.0 * scale))).abs() < 1e-15);
    }

    #[test]
    fn chi_hat_is_affine_and_decreasing() {
        let m = sk_ising(30, 2).unwrap();
        let a = chi_hat(&m, -10.0).unwrap();
        let b = chi_hat(&m, 0.0).unwrap();
        let c = chi_hat(&m, 10.0).unwrap();
        assert!(a > b && b > c);
        assert!(((a - b) - (b - c)).abs() < 1e-15);
    }

    #[test]
    fn tts_examples() {
        let t = tts(1.0, 0.0, 100).unwrap();
        assert!((t - 0.01f64.ln() / 0.99f64.ln()).abs() < 1e-9);
        assert!((t - 458.21).abs() < 0.01);
        assert!((tts(2.0, 0.0, 100).unwrap() - 2.0 * t).abs() < 1e-12);
        let paper_scale = tts(0.196, 1.169, 1000).unwrap();
        assert!((250.0..310.0).contains(&paper_scale), "{paper_scale}");
        assert!(matches!(tts(1.0, 1.0, 2), Err(Error::UndefinedMetric(_))));
        assert!(matches!(tts(0.0, 0.5, 100), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn tts_monotonicity() {
        let mut last = 0.0;
        for k in 1..20 {
            let t = tts(0.1 * k as f64, 0.8, 500).unwrap();
            assert!(t > last);
            last = t;
        }
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let t = tts(1.0, 0.1 * k as f64, 500).unwrap();
            assert!(t < last);
            last = t;
        }
    }

    #[test]
    fn speed_examples() {
        assert!((speed(1.169, 0.196) - 5.964).abs() < 1e-3);
        assert_eq!(speed(0.0, 3.0), 0.0);
        assert_eq!(speed(1.0, 0.5), 2.0);
    }

    #[test]
    fn eta1_symmetric_case() {
        let eta = estimate_eta1(6, 1.0, 6.0).unwrap();
        assert!((eta - 0.5).abs() < 1e-4, "{eta}");
    }

    #[test]
    fn eta1_matches_brute_quadrature() {
        for (k, a, b) in [(3, 1.0, 2.0), (6, 0.5, 10.0), (4, 2.0, 1.0)] {
            let mean = k as f64 * a / 2.0;
            let sd = a * (k as f64 / 12.0).sqrt();
            let n = 200_000;
            let h = b / n as f64;
            // Midpoint rule as an independent check.
            let sum: f64 = (0..n).map(|i| phi(((i as f64 + 0.5) * h - mean) / sd)).sum();
            let est = estimate_eta1(k, a, b).unwrap();
            assert!((est - sum * h / b).abs() < 1e-7, "{est} vs {}", sum * h / b);
        }
    }

    #[test]
    fn eta1_limits_and_monotonicity() {
        // Mean coupling mass 12 sits 8.5 deviations above a vanishing field.
        assert!(estimate_eta1(24, 1.0, 1e-6).unwrap() < 1e-12);
        for k in [1, 3, 6, 12] {
            let mut last = -1.0;
            for b in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
                let e = estimate_eta1(k, 1.0, b).unwrap();
                assert!((0.0..=1.0).contains(&e));
                assert!(e >= last);
                last = e;
            }
        }
        for b in [1.0, 3.0, 6.0] {
            let mut last = 2.0;
            for ka in [0.5, 1.0, 2.0, 4.0] {
                let e = estimate_eta1(6, ka / 6.0 * 2.0, b).unwrap();
                assert!(e <= last);
                last = e;
            }
        }
        assert!(estimate_eta1(0, 1.0, 1.0).is_err());
        assert!(estimate_eta1(6, 0.0, 1.0).is_err());
    }

    #[test]
    fn phi_reference_values() {
        assert!((phi(0.0) - 0.5).abs() < 1e-15);
        assert!((phi(1.959963984540054) - 0.975).abs() < 1e-10);
        assert!((phi(-1.0) - 0.15865525393145707).abs() < 1e-10);
    }

    #[test]
    fn exact_ratio_and_report() {
        let m = sk_ising(8, 3).unwrap();
        let (lo, hi) = exact_extremes(&m).unwrap();
        assert!(lo < hi);
        let ground = crate::baselines::brute_force(&m).unwrap().1;
        let report = MetricReport::new(&m, ground, 0.5).unwrap().with_exact(&m).unwrap();
        assert_eq!(report.chi_exact, Some(1.0));
        assert_eq!(report.d, 8);
        // χ̂ relates to χ through the shared energy.
        let chi_back = (hi - (1.0 - 2.0 * report.chi_hat) * report.e_max_hat) / (hi - lo);
        assert!((chi_back - 1.0).abs() < 1e-12);
        let up = SpinConfig::all_up(8);
        assert!(m.energy(&up).unwrap() <= hi);
        assert_eq!(chi_exact(1.0, 1.0, 1.0), None);
    }
}
