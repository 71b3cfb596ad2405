//! Recursive removal of spins whose optimal value is fixed by the local
//! graph structure.
//!
//! A spin is *determined* when its field dominates twice its total coupling
//! mass (`2·Σ_j |J_ij| < |h_i|`); its optimal value is `−sgn(h_i)` no matter
//! what the rest of the system does. A spin is *semi-determined* when, after
//! discounting determined neighbours, it has a single remaining neighbour
//! (its anchor) whose coupling dominates its effective field; it then
//! follows the anchor as `s_i = −sgn(J_ij)·s_j`. Both classes are folded
//! into the fields and the constant offset of the surviving spins, and the
//! process repeats until nothing more can be removed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IsingModel, Spin, SpinConfig};

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Role of a spin within one pruning round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinClass {
    Determined { sign: Spin },
    SemiDetermined { anchor: usize, coeff: Spin },
    General,
}

/// Per-spin classes of one model, indexed like the model's spins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    classes: Vec<SpinClass>,
}

impl Classification {
    pub fn classes(&self) -> &[SpinClass] {
        &self.classes
    }

    pub fn determined(&self) -> Vec<(usize, Spin)> {
        self.classes
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match *c {
                SpinClass::Determined { sign } => Some((i, sign)),
                _ => None,
            })
            .collect()
    }

    pub fn semi_determined(&self) -> Vec<SemiRecord> {
        self.classes
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match *c {
                SpinClass::SemiDetermined { anchor, coeff } => {
                    Some(SemiRecord { index: i, anchor, coeff })
                }
                _ => None,
            })
            .collect()
    }

    pub fn general(&self) -> Vec<usize> {
        self.classes
            .iter()
            .enumerate()
            .filter_map(|(i, c)| (*c == SpinClass::General).then_some(i))
            .collect()
    }

    /// True when neither determined nor semi-determined spins were found.
    pub fn is_trivial(&self) -> bool {
        self.classes.iter().all(|c| *c == SpinClass::General)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemiRecord {
    pub index: usize,
    pub anchor: usize,
    pub coeff: Spin,
}

/// One application of classify + fold, in original spin indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneRound {
    pub determined: Vec<(usize, Spin)>,
    pub semi: Vec<SemiRecord>,
    pub constant: f64,
}

/// Everything needed to lift a reduced configuration back to the original spins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneTrace {
    pub rounds: Vec<PruneRound>,
    pub original_d: usize,
    /// `survivor_map[k]` is the original index of reduced spin `k`.
    pub survivor_map: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct PrunedProblem {
    pub reduced: IsingModel,
    pub trace: PruneTrace,
}

/// Splits the spins of `model` into determined, semi-determined and general.
///
/// Determined spins are found first from the raw fields. Semi-determined
/// candidates are then scanned in ascending index order against their
/// effective field `h_i + 2·Σ_{j∈D} J_ij·s_j`. A spin that already anchors
/// another, or whose would-be anchor is already semi-determined, stays
/// general for this round.
pub fn classify(model: &IsingModel) -> Classification {
    let d = model.d();
    let h = model.fields();
    let mut classes = vec![SpinClass::General; d];
    for (i, class) in classes.iter_mut().enumerate() {
        if model.degree(i) == 0 && h[i] == 0.0 {
            *class = SpinClass::Determined { sign: 1 };
        } else if 2.0 * model.row_abs_sum(i) < h[i].abs() {
            *class = SpinClass::Determined { sign: if h[i] > 0.0 { -1 } else { 1 } };
        }
    }

    let mut is_anchor = vec![false; d];
    for i in 0..d {
        if classes[i] != SpinClass::General || is_anchor[i] {
            continue;
        }
        let mut effective = h[i];
        let mut free = 0usize;
        let mut candidate = None;
        for (j, w) in model.neighbors(i) {
            match classes[j] {
                SpinClass::Determined { sign } => effective += 2.0 * w * f64::from(sign),
                _ => {
                    free += 1;
                    candidate = Some((j, w));
                }
            }
        }
        let Some((j, w)) = candidate else { continue };
        if free != 1 || matches!(classes[j], SpinClass::SemiDetermined { .. }) {
            continue;
        }
        if 2.0 * w.abs() >= effective.abs() {
            let coeff = if w > 0.0 { -1 } else { 1 };
            classes[i] = SpinClass::SemiDetermined { anchor: j, coeff };
            is_anchor[j] = true;
        }
    }
    Classification { classes }
}

struct Folded {
    model: IsingModel,
    constant: f64,
    general: Vec<usize>,
}

fn fold_inner(model: &IsingModel, classification: &Classification) -> Result<Folded> {
    let d = model.d();
    let classes = classification.classes();
    if classes.len() != d {
        return Err(Error::Contract(format!(
            "classification covers {} spins, model has {d}",
            classes.len()
        )));
    }
    let h = model.fields();

    // Determined spins fold into the constant and into the fields of free neighbours.
    let mut constant = 0.0;
    let mut new_fields: Vec<f64> = h.to_vec();
    for (i, class) in classes.iter().enumerate() {
        match *class {
            SpinClass::Determined { sign } => {
                let si = f64::from(sign);
                constant += h[i] * si;
                for (j, w) in model.neighbors(i) {
                    match classes[j] {
                        // Each unordered pair contributes 2·J·s_i·s_j; count it once.
                        SpinClass::Determined { sign: sj } if j > i => {
                            constant += 2.0 * w * si * f64::from(sj);
                        }
                        SpinClass::Determined { .. } => {}
                        _ => new_fields[j] += 2.0 * w * si,
                    }
                }
            }
            SpinClass::SemiDetermined { anchor, coeff } => {
                if anchor >= d || classes[anchor] != SpinClass::General {
                    return Err(Error::Contract(format!(
                        "spin {i} is anchored to {anchor}, which is not a surviving spin"
                    )));
                }
                let mut anchor_weight = None;
                for (j, w) in model.neighbors(i) {
                    if j == anchor {
                        anchor_weight = Some(w);
                    } else if !matches!(classes[j], SpinClass::Determined { .. }) {
                        return Err(Error::Contract(format!(
                            "semi-determined spin {i} has a second free neighbour {j}"
                        )));
                    }
                }
                let w = anchor_weight.ok_or_else(|| {
                    Error::Contract(format!("spin {i} is not coupled to its anchor {anchor}"))
                })?;
                if f64::from(coeff) != -sgn(w) {
                    return Err(Error::Contract(format!(
                        "spin {i} has coefficient {coeff}, expected {}",
                        -sgn(w)
                    )));
                }
                // 2·J_ik·s_i·s_k with s_k = −sgn(J_ik)·s_i.
                constant -= 2.0 * w.abs();
            }
            SpinClass::General => {}
        }
    }
    // Semi-determined spins push their effective field onto the anchor.
    for (k, class) in classes.iter().enumerate() {
        if let SpinClass::SemiDetermined { anchor, coeff } = *class {
            new_fields[anchor] += f64::from(coeff) * new_fields[k];
        }
    }

    let general = classification.general();
    let mut reduced_index = vec![usize::MAX; d];
    for (k, &g) in general.iter().enumerate() {
        reduced_index[g] = k;
    }
    let couplings = model.couplings().iter().filter_map(|c| {
        let (a, b) = (reduced_index[c.i], reduced_index[c.j]);
        (a != usize::MAX && b != usize::MAX).then_some((a, b, c.weight))
    });
    let fields = general.iter().map(|&g| new_fields[g]).collect();
    let reduced = IsingModel::new(general.len(), couplings, fields)?
        .with_offset(model.offset() + constant)?;
    Ok(Folded { model: reduced, constant, general })
}

/// Substitutes the classified spins into the model, returning the problem
/// over the general spins (in ascending index order) with the removed
/// energy moved into the offset.
pub fn fold(model: &IsingModel, classification: &Classification) -> Result<IsingModel> {
    fold_inner(model, classification).map(|f| f.model)
}

/// Applies classify + fold until a round removes nothing.
pub fn prune(model: &IsingModel) -> PrunedProblem {
    let mut current = model.clone();
    let mut survivor_map: Vec<usize> = (0..model.d()).collect();
    let mut rounds = Vec::new();
    loop {
        let classification = classify(&current);
        if classification.is_trivial() {
            break;
        }
        let folded = fold_inner(&current, &classification)
            .expect("classification produced by classify is consistent with its model");
        rounds.push(PruneRound {
            determined: classification
                .determined()
                .into_iter()
                .map(|(i, s)| (survivor_map[i], s))
                .collect(),
            semi: classification
                .semi_determined()
                .into_iter()
                .map(|r| SemiRecord {
                    index: survivor_map[r.index],
                    anchor: survivor_map[r.anchor],
                    coeff: r.coeff,
                })
                .collect(),
            constant: folded.constant,
        });
        survivor_map = folded.general.iter().map(|&g| survivor_map[g]).collect();
        current = folded.model;
    }
    PrunedProblem {
        reduced: current,
        trace: PruneTrace { rounds, original_d: model.d(), survivor_map },
    }
}

/// Lifts a configuration of the reduced problem to the original spins.
pub fn reconstruct(trace: &PruneTrace, reduced: &SpinConfig) -> Result<SpinConfig> {
    if reduced.len() != trace.survivor_map.len() {
        return Err(Error::DimensionMismatch {
            expected: trace.survivor_map.len(),
            got: reduced.len(),
        });
    }
    let mut full: Vec<Spin> = vec![0; trace.original_d];
    for (k, &orig) in trace.survivor_map.iter().enumerate() {
        full[orig] = reduced[k];
    }
    for round in trace.rounds.iter().rev() {
        for r in &round.semi {
            full[r.index] = r.coeff * full[r.anchor];
        }
        for &(i, sign) in &round.determined {
            full[i] = sign;
        }
    }
    SpinConfig::new(full).map_err(|e| Error::Contract(format!("inconsistent prune trace: {e}")))
}

/// Fraction of spins removed, `1 − d_reduced/d`.
pub fn pruning_rate(trace: &PruneTrace) -> f64 {
    if trace.original_d == 0 {
        return 0.0;
    }
    1.0 - trace.survivor_map.len() as f64 / trace.original_d as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain enumeration over all `2^d` configurations.
    fn ground_energy(model: &IsingModel) -> f64 {
        let d = model.d();
        (0u64..1 << d)
            .map(|bits| {
                let s: Vec<i8> = (0..d).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).collect();
                model.energy(&SpinConfig::new(s).unwrap()).unwrap()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn ground_state(model: &IsingModel) -> SpinConfig {
        let d = model.d();
        (0u64..1 << d)
            .map(|bits| {
                SpinConfig::new((0..d).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).collect())
                    .unwrap()
            })
            .min_by(|a, b| {
                model.energy(a).unwrap().partial_cmp(&model.energy(b).unwrap()).unwrap()
            })
            .unwrap()
    }

    fn chain() -> IsingModel {
        IsingModel::new(2, [(0, 1, 0.5)], vec![3.0, 0.0]).unwrap()
    }

    fn anchored_pair() -> IsingModel {
        IsingModel::new(2, [(0, 1, -1.0)], vec![1.0, 0.0]).unwrap()
    }

    /// Sparse random instance mixing field scales so that every class occurs.
    fn random_instance(rng: &mut ChaCha8Rng, d: usize) -> IsingModel {
        let avg_degree = rng.random_range(1.0..4.0);
        let p = (avg_degree / d.max(2) as f64).min(1.0);
        let field_scale = rng.random_range(0.0..4.0);
        let mut c = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                if rng.random::<f64>() < p {
                    c.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let h = (0..d)
            .map(|_| match rng.random_range(0..3) {
                0 => rng.random_range(-field_scale..=field_scale),
                1 => 0.0,
                _ => rng.random_range(-1.0..1.0_f64).round(),
            })
            .collect();
        IsingModel::new(d, c, h).unwrap()
    }

    #[test]
    fn classify_field_dominated_chain() {
        let c = classify(&chain());
        assert_eq!(c.determined(), vec![(0, -1)]);
        assert!(c.semi_determined().is_empty());
        assert_eq!(c.general(), vec![1]);
    }

    #[test]
    fn classify_anchored_pair() {
        let c = classify(&anchored_pair());
        assert!(c.determined().is_empty());
        assert_eq!(c.semi_determined(), vec![SemiRecord { index: 0, anchor: 1, coeff: 1 }]);
        assert_eq!(c.general(), vec![1]);
    }

    #[test]
    fn classify_nothing_without_fields_or_leaves() {
        // Triangle plus a square, all degrees ≥ 2, h = 0.
        let m = IsingModel::new(
            7,
            [(0, 1, 1.0), (1, 2, -1.0), (0, 2, 0.5), (3, 4, 1.0), (4, 5, 1.0), (5, 6, 1.0), (3, 6, 1.0)],
            vec![0.0; 7],
        )
        .unwrap();
        let c = classify(&m);
        assert!(c.is_trivial());
        assert_eq!(c.general().len(), 7);
    }

    #[test]
    fn isolated_zero_field_spin_is_up() {
        let m = IsingModel::new(1, [], vec![0.0]).unwrap();
        assert_eq!(classify(&m).determined(), vec![(0, 1)]);
    }

    #[test]
    fn equality_is_not_determined() {
        let m = IsingModel::new(2, [(0, 1, 0.5)], vec![1.0, 1.0]).unwrap();
        assert!(classify(&m).determined().is_empty());
    }

    #[test]
    fn leaves_share_an_anchor() {
        // Path 0-1-2 with no fields: both ends follow the middle spin.
        let m = IsingModel::new(3, [(0, 1, 1.0), (1, 2, -1.0)], vec![0.0; 3]).unwrap();
        let c = classify(&m);
        assert_eq!(
            c.semi_determined(),
            vec![
                SemiRecord { index: 0, anchor: 1, coeff: -1 },
                SemiRecord { index: 2, anchor: 1, coeff: 1 }
            ]
        );
        let p = prune(&m);
        assert_eq!(p.reduced.d(), 0);
        let s = reconstruct(&p.trace, &SpinConfig::new(vec![]).unwrap()).unwrap();
        assert_eq!(m.energy(&s).unwrap(), ground_energy(&m));
    }

    #[test]
    fn semi_pair_is_resolved_across_rounds() {
        // An isolated edge: 0 follows 1, and 1 cannot follow a semi-determined spin.
        let m = IsingModel::new(2, [(0, 1, 0.7)], vec![0.0; 2]).unwrap();
        let c = classify(&m);
        assert_eq!(c.semi_determined(), vec![SemiRecord { index: 0, anchor: 1, coeff: -1 }]);
        assert_eq!(c.general(), vec![1]);
        let p = prune(&m);
        assert_eq!(p.trace.rounds.len(), 2);
        assert_eq!(pruning_rate(&p.trace), 1.0);
        let s = reconstruct(&p.trace, &SpinConfig::new(vec![]).unwrap()).unwrap();
        assert_eq!(&*s, &[-1, 1]);
        assert_eq!(m.energy(&s).unwrap(), ground_energy(&m));
    }

    #[test]
    fn fold_anchored_pair() {
        let m = anchored_pair();
        let r = fold(&m, &classify(&m)).unwrap();
        assert_eq!(r.d(), 1);
        assert_eq!(r.fields(), &[1.0]);
        assert_eq!(r.offset(), -2.0);
        let best = r.energy(&SpinConfig::new(vec![-1]).unwrap()).unwrap();
        assert_eq!(best, -3.0);
        assert_eq!(best, ground_energy(&m));
    }

    #[test]
    fn fold_field_dominated_chain() {
        let m = chain();
        let r = fold(&m, &classify(&m)).unwrap();
        assert_eq!(r.fields(), &[-1.0]);
        assert_eq!(r.offset(), -3.0);
        assert_eq!(r.energy(&SpinConfig::new(vec![1]).unwrap()).unwrap(), -4.0);
        assert_eq!(ground_energy(&m), -4.0);
    }

    #[test]
    fn fold_without_pruned_spins_is_identity() {
        let m = IsingModel::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], vec![0.0; 3]).unwrap();
        let c = classify(&m);
        assert!(c.is_trivial());
        assert_eq!(fold(&m, &c).unwrap(), m);
    }

    #[test]
    fn fold_rejects_foreign_classification() {
        let c = classify(&anchored_pair());
        let other = IsingModel::new(3, [], vec![0.0; 3]).unwrap();
        assert!(matches!(fold(&other, &c), Err(Error::Contract(_))));
        // Same size, but spin 0 is not coupled to its recorded anchor.
        let uncoupled = IsingModel::new(2, [], vec![1.0, 0.0]).unwrap();
        assert!(matches!(fold(&uncoupled, &c), Err(Error::Contract(_))));
    }

    #[test]
    fn prune_chain_fully() {
        let m = chain();
        let p = prune(&m);
        assert_eq!(p.trace.rounds.len(), 2);
        assert_eq!(p.reduced.d(), 0);
        assert_eq!(p.reduced.offset(), -4.0);
        let total: f64 = p.trace.rounds.iter().map(|r| r.constant).sum();
        assert_eq!(total, p.reduced.offset());
        assert_eq!(pruning_rate(&p.trace), 1.0);
        let s = reconstruct(&p.trace, &SpinConfig::new(vec![]).unwrap()).unwrap();
        assert_eq!(&*s, &[-1, 1]);
    }

    #[test]
    fn identity_trace() {
        let m = IsingModel::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], vec![0.0; 3]).unwrap();
        let p = prune(&m);
        assert!(p.trace.rounds.is_empty());
        assert_eq!(p.reduced, m);
        assert_eq!(pruning_rate(&p.trace), 0.0);
        let s = SpinConfig::new(vec![1, -1, 1]).unwrap();
        assert_eq!(reconstruct(&p.trace, &s).unwrap(), s);
        assert!(reconstruct(&p.trace, &SpinConfig::new(vec![1]).unwrap()).is_err());
    }

    #[test]
    fn pruning_rate_of_unpruned_d100() {
        let trace = PruneTrace { rounds: vec![], original_d: 100, survivor_map: (0..100).collect() };
        assert_eq!(pruning_rate(&trace), 0.0);
    }

    #[test]
    fn semi_spin_with_determined_neighbour_uses_effective_field() {
        // Spin 1 hangs off 0 weakly but is pinned by the strongly polarised spin 2.
        let m = IsingModel::new(
            4,
            [(0, 1, 0.1), (1, 2, 1.0), (0, 3, 1.0)],
            vec![0.0, 0.0, 100.0, 0.0],
        )
        .unwrap();
        let c = classify(&m);
        assert_eq!(c.determined(), vec![(2, -1)]);
        assert!(!c.semi_determined().iter().any(|r| r.index == 1));
        let p = prune(&m);
        let s = reconstruct(&p.trace, &ground_state(&p.reduced)).unwrap();
        assert!((m.energy(&s).unwrap() - ground_energy(&m)).abs() < 1e-12);
    }

    #[test]
    fn energy_is_conserved_through_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let d = rng.random_range(1..=60);
            let m = random_instance(&mut rng, d);
            let p = prune(&m);
            assert_eq!(p.trace.survivor_map.len(), p.reduced.d());
            assert!(p.trace.rounds.len() <= d);
            let removed: usize =
                p.trace.rounds.iter().map(|r| r.determined.len() + r.semi.len()).sum();
            assert_eq!(removed + p.reduced.d(), d);
            for _ in 0..5 {
                let s_red = SpinConfig::random(p.reduced.d(), &mut rng);
                let full = reconstruct(&p.trace, &s_red).unwrap();
                let e_full = m.energy(&full).unwrap();
                let e_red = p.reduced.energy(&s_red).unwrap();
                assert!((e_full - e_red).abs() <= 1e-9 * e_full.abs().max(1.0));
            }
        }
    }

    #[test]
    fn optimum_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..60 {
            let d = rng.random_range(1..=12);
            let m = random_instance(&mut rng, d);
            let p = prune(&m);
            let full = ground_energy(&m);
            let reduced = ground_energy(&p.reduced);
            assert!((full - reduced).abs() <= 1e-9 * full.abs().max(1.0), "{full} vs {reduced}");
            let lifted = reconstruct(&p.trace, &ground_state(&p.reduced)).unwrap();
            assert!((m.energy(&lifted).unwrap() - full).abs() <= 1e-9 * full.abs().max(1.0));
        }
    }

    #[test]
    fn trace_round_trips_through_json() {
        let p = prune(&chain());
        let text = serde_json::to_string(&p.trace).unwrap();
        let back: PruneTrace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p.trace);
    }
}
