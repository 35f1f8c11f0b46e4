//! Noise → decode → classify trials, failure-rate aggregation and grid sweeps.
//!
//! The trial seed depends on the noise part of a cell only (lattice size and
//! noise model), so every decoder evaluated at the same noise point sees the
//! same error samples. Decoder comparisons are therefore paired.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{LatticeError, LogicalClass, ToricLattice};
use crate::matcher::{Decoder, MatchError, WeightFamily};
use crate::noise::{self, NoiseError, NoiseModel};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("at least one trial is required")]
    NoTrials,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub failed: bool,
    pub class: LogicalClass,
    pub defect_count: usize,
    pub qubits_flipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FailureEstimate {
    pub trials: u64,
    pub failures: u64,
    pub rate: f64,
    pub stderr: f64,
}

impl FailureEstimate {
    pub fn from_counts(trials: u64, failures: u64) -> Self {
        assert!(failures <= trials);
        if trials == 0 {
            return Self::default();
        }
        let rate = failures as f64 / trials as f64;
        Self {
            trials,
            failures,
            rate,
            stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
        }
    }
}

/// One grid point: lattice size, noise model and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub size: usize,
    pub model: NoiseModel,
    pub decoder: WeightFamily,
}

impl CellSpec {
    pub fn new(size: usize, model: NoiseModel, decoder: WeightFamily) -> Self {
        Self {
            size,
            model,
            decoder,
        }
    }

    pub fn noise_key(&self) -> String {
        noise_key(self.size, &self.model)
    }

    /// Canonical text identity of the cell; f64 fields use their shortest
    /// round-trip representation.
    pub fn key(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.noise_key(),
            self.decoder.family,
            self.decoder.lambda_label(),
            self.decoder.resolved_delta(self.size)
        )
    }

    pub fn cell_id(&self) -> u64 {
        seed::key_hash(&self.key())
    }
}

fn noise_key(size: usize, model: &NoiseModel) -> String {
    format!("{}|{}|{}|{}", model.kind, model.xi, model.p, size)
}

pub fn noise_id(size: usize, model: &NoiseModel) -> u64 {
    seed::key_hash(&noise_key(size, model))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub spec: CellSpec,
    pub estimate: FailureEstimate,
    /// Mean fraction of qubits flipped per round over the cell's samples.
    pub effective_rate: f64,
    pub seed: u64,
}

/// Samples one error, decodes it with every decoder, and classifies each residual.
pub fn run_trial_multi(
    lat: &ToricLattice,
    model: &NoiseModel,
    decoders: &[Decoder],
    trial_seed: u64,
) -> Result<Vec<TrialOutcome>, SimError> {
    let mut rng = seed::trial_rng(trial_seed);
    let (e, stats) = noise::sample(lat, model, &mut rng)?;
    let syn = lat.syndrome(&e);
    // Shuffling randomises the direction of half-length paths; the jitter
    // randomises the choice among equal-weight matchings.
    let mut tie_rng = seed::side_stream(&rng, u64::MAX);
    let mut defects = syn.defects().to_vec();
    defects.shuffle(&mut tie_rng);
    let salt = tie_rng.gen::<u64>();
    decoders
        .iter()
        .map(|dec| {
            let mut residual = dec.decode_jittered(&defects, salt)?;
            residual.xor_assign(&e);
            let class = lat.logical_class(&residual)?;
            Ok(TrialOutcome {
                failed: !class.is_trivial(),
                class,
                defect_count: defects.len(),
                qubits_flipped: stats.qubits_flipped,
            })
        })
        .collect()
}

pub fn run_trial(
    lat: &ToricLattice,
    model: &NoiseModel,
    decoder: &Decoder,
    trial_seed: u64,
) -> Result<TrialOutcome, SimError> {
    Ok(run_trial_multi(lat, model, std::slice::from_ref(decoder), trial_seed)?[0])
}

/// Failure estimates for several decoders on common noise samples, plus the
/// mean flipped-qubit fraction.
pub fn estimate_group(
    lat: &ToricLattice,
    model: &NoiseModel,
    families: &[WeightFamily],
    trials: u64,
    master_seed: u64,
) -> Result<(Vec<FailureEstimate>, f64), SimError> {
    if trials == 0 {
        return Err(SimError::NoTrials);
    }
    model.validate(lat)?;
    let decoders = families
        .iter()
        .map(|f| Decoder::new(*lat, f.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let cell = noise_id(lat.size(), model);
    let k = decoders.len();
    let zero = || (vec![0u64; k], 0u64);
    let (failures, flipped) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let outcomes = run_trial_multi(
                lat,
                model,
                &decoders,
                seed::trial_seed(master_seed, cell, t),
            )?;
            let fails = outcomes.iter().map(|o| o.failed as u64).collect();
            Ok::<_, SimError>((
                fails,
                outcomes.first().map_or(0, |o| o.qubits_flipped as u64),
            ))
        })
        .try_reduce(zero, |mut a, b| {
            a.0.iter_mut().zip(&b.0).for_each(|(x, y)| *x += y);
            a.1 += b.1;
            Ok(a)
        })?;
    let estimates = failures
        .into_iter()
        .map(|f| FailureEstimate::from_counts(trials, f))
        .collect();
    let effective = flipped as f64 / (trials as f64 * lat.n_qubits() as f64);
    Ok((estimates, effective))
}

pub fn estimate_failure(
    lat: &ToricLattice,
    model: &NoiseModel,
    decoder: &WeightFamily,
    trials: u64,
    master_seed: u64,
) -> Result<FailureEstimate, SimError> {
    let (est, _) = estimate_group(
        lat,
        model,
        std::slice::from_ref(decoder),
        trials,
        master_seed,
    )?;
    Ok(est[0])
}

/// Evaluates every cell, sharing noise samples between cells that differ only
/// in the decoder. Output order follows `cells`.
pub fn sweep(
    cells: &[CellSpec],
    trials: u64,
    master_seed: u64,
) -> Result<Vec<SweepCell>, SimError> {
    sweep_with(cells, trials, master_seed, |_| {})
}

/// As [`sweep`], calling `on_group` with each batch of finished cells.
pub fn sweep_with(
    cells: &[CellSpec],
    trials: u64,
    master_seed: u64,
    mut on_group: impl FnMut(&[SweepCell]),
) -> Result<Vec<SweepCell>, SimError> {
    let mut out: Vec<Option<SweepCell>> = vec![None; cells.len()];
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        let key = c.noise_key();
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    for (_, members) in groups {
        let first = &cells[members[0]];
        let lat = ToricLattice::new(first.size)?;
        let families: Vec<WeightFamily> =
            members.iter().map(|&i| cells[i].decoder.clone()).collect();
        let (estimates, effective) =
            estimate_group(&lat, &first.model, &families, trials, master_seed)?;
        let done: Vec<SweepCell> = members
            .iter()
            .zip(estimates)
            .map(|(&i, estimate)| SweepCell {
                spec: cells[i].clone(),
                estimate,
                effective_rate: effective,
                seed: master_seed,
            })
            .collect();
        on_group(&done);
        for (&i, c) in members.iter().zip(done) {
            out[i] = Some(c);
        }
    }
    Ok(out
        .into_iter()
        .map(|c| c.expect("every cell evaluated"))
        .collect())
}

/// Failure rates of several decoders conditioned on exactly `t` ballistic
/// events, all starting on one straight line of the lattice (row 0 of
/// vertical edges and column 0 of horizontal edges). Every placement of the
/// `t` starts is decoded `repeats` times with independently shuffled defect
/// orders, so ties are broken at random.
///
/// At low p these aligned configurations are the shortest ones that can
/// defeat a matching decoder, so the failure rate is
/// `line_stratum_weight(..) · rate` to leading order.
pub fn line_stratum(
    lat: &ToricLattice,
    xi: usize,
    t: usize,
    families: &[WeightFamily],
    repeats: u64,
    master_seed: u64,
) -> Result<Vec<FailureEstimate>, SimError> {
    use itertools::Itertools;
    if repeats == 0 {
        return Err(SimError::NoTrials);
    }
    NoiseModel::ballistic(0.0, xi).validate(lat)?;
    let decoders = families
        .iter()
        .map(|f| Decoder::new(*lat, f.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let l = lat.size();
    let lines: [Vec<usize>; 2] = [
        (0..l)
            .map(|x| lat.edge_to_index(lat.v_edge(x as isize, 0)))
            .collect(),
        (0..l)
            .map(|y| lat.edge_to_index(lat.h_edge(0, y as isize)))
            .collect(),
    ];
    let placements: Vec<Vec<usize>> = lines
        .iter()
        .flat_map(|line| line.iter().copied().combinations(t))
        .collect();
    let cell = seed::key_hash(&format!("line-stratum|{l}|{xi}|{t}"));
    let k = decoders.len();
    let failures = placements
        .par_iter()
        .enumerate()
        .map(|(i, starts)| {
            let mut e = crate::lattice::ErrorPattern::zeros(lat.n_qubits());
            for &j in starts {
                noise::apply_ballistic_event(lat, &mut e, j, xi);
            }
            let syn = lat.syndrome(&e);
            let mut fails = vec![0u64; k];
            for r in 0..repeats {
                let mut rng =
                    seed::trial_rng(seed::trial_seed(master_seed, cell, i as u64 * repeats + r));
                let mut defects = syn.defects().to_vec();
                defects.shuffle(&mut rng);
                let salt = rng.gen::<u64>();
                for (f, dec) in fails.iter_mut().zip(&decoders) {
                    let mut residual = dec.decode_jittered(&defects, salt)?;
                    residual.xor_assign(&e);
                    *f += !lat.logical_class(&residual)?.is_trivial() as u64;
                }
            }
            Ok::<_, SimError>(fails)
        })
        .try_reduce(
            || vec![0u64; k],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let total = placements.len() as u64 * repeats;
    Ok(failures
        .into_iter()
        .map(|f| FailureEstimate::from_counts(total, f))
        .collect())
}

/// Probability that ballistic noise at rate `p` fires exactly `t` events, all
/// on one of the `2L` straight lines with the matching orientation.
pub fn line_stratum_weight(size: usize, t: usize, p: f64) -> f64 {
    let n = 2.0 * (size * size) as f64;
    let choose: f64 = (0..t).map(|i| (size - i) as f64 / (i + 1) as f64).product();
    2.0 * size as f64 * choose * p.powi(t as i32) * (1.0 - p).powf(n - t as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_never_fails() {
        let lat = ToricLattice::new(6).unwrap();
        let dec = Decoder::new(lat, WeightFamily::standard()).unwrap();
        for s in 0..20 {
            let o = run_trial(&lat, &NoiseModel::iid(0.0), &dec, s).unwrap();
            assert!(!o.failed);
            assert_eq!(o.defect_count, 0);
        }
        let est =
            estimate_failure(&lat, &NoiseModel::iid(0.0), &WeightFamily::standard(), 1, 0).unwrap();
        assert_eq!((est.rate, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn trials_are_deterministic() {
        let lat = ToricLattice::new(8).unwrap();
        let dec = Decoder::new(lat, WeightFamily::standard()).unwrap();
        let m = NoiseModel::iid(0.12);
        for s in 0..20 {
            assert_eq!(
                run_trial(&lat, &m, &dec, s).unwrap(),
                run_trial(&lat, &m, &dec, s).unwrap()
            );
        }
    }

    #[test]
    fn stderr_scales_with_trials() {
        let a = FailureEstimate::from_counts(1000, 100);
        let b = FailureEstimate::from_counts(2000, 200);
        assert!((a.stderr / b.stderr - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn forced_ballistic_event_is_corrected_by_matching_length() {
        use crate::lattice::ErrorPattern;
        use crate::noise::apply_ballistic_event;
        let lat = ToricLattice::new(12).unwrap();
        let dec = Decoder::new(lat, WeightFamily::single_weight(3)).unwrap();
        for j in [0usize, 17, 150, 200, 287] {
            let mut e = ErrorPattern::zeros(lat.n_qubits());
            apply_ballistic_event(&lat, &mut e, j, 3);
            let syn = lat.syndrome(&e);
            let c = dec.decode(syn.defects()).unwrap();
            assert!(lat.logical_class(&c.xor(&e)).unwrap().is_trivial());
        }
    }

    #[test]
    fn high_noise_randomises_homology() {
        let lat = ToricLattice::new(8).unwrap();
        let est = estimate_failure(
            &lat,
            &NoiseModel::iid(0.4),
            &WeightFamily::standard(),
            3000,
            5,
        )
        .unwrap();
        assert!((est.rate - 0.75).abs() < 3.0 * est.stderr + 0.01, "{est:?}");
    }

    #[test]
    fn sweep_matches_single_cell_and_orders_output() {
        let m = NoiseModel::iid(0.05);
        let cells = vec![
            CellSpec::new(6, m, WeightFamily::standard()),
            CellSpec::new(6, m.with_p(0.08), WeightFamily::standard()),
            CellSpec::new(6, m, WeightFamily::single_weight(2)),
        ];
        let out = sweep(&cells, 300, 11).unwrap();
        assert_eq!(out.len(), 3);
        for (c, r) in cells.iter().zip(&out) {
            assert_eq!(&r.spec, c);
            let lat = ToricLattice::new(c.size).unwrap();
            let single = estimate_failure(&lat, &c.model, &c.decoder, 300, 11).unwrap();
            assert_eq!(single, r.estimate);
        }
        assert_eq!(out[0].effective_rate, out[2].effective_rate);
    }

    #[test]
    fn cell_ids_distinguish_decoders_but_share_noise() {
        let m = NoiseModel::diffusive(0.02, 3);
        let a = CellSpec::new(16, m, WeightFamily::single_weight(2));
        let b = CellSpec::new(16, m, WeightFamily::single_weight(3));
        assert_ne!(a.cell_id(), b.cell_id());
        assert_eq!(a.noise_key(), b.noise_key());
    }

    #[test]
    fn line_stratum_ties_fail_half_the_time() {
        // L = 12, ξ = 3: two non-overlapping events on a line leave the
        // standard decoder a tie between two pairings of equal weight.
        let lat = ToricLattice::new(12).unwrap();
        let fams = [WeightFamily::standard(), WeightFamily::single_weight(3)];
        let est = line_stratum(&lat, 3, 2, &fams, 40, 1).unwrap();
        assert_eq!(est[0].trials, 2 * 66 * 40);
        let tied = 42.0 / 66.0;
        assert!(
            (est[0].rate - tied / 2.0).abs() < 4.0 * est[0].stderr,
            "{est:?}"
        );
        assert!(est[1].rate < est[0].rate);
        let w = line_stratum_weight(12, 2, 1e-3);
        assert!((w - 24.0 * 66.0 * 1e-6 * (1.0f64 - 1e-3).powi(286)).abs() < 1e-12);
    }
}
