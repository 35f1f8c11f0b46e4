//! Event-based bit-flip noise: independent flips, straight-line (ballistic)
//! events and random-walk (diffusive) events.
//!
//! Site `j` always consumes the same two words of the trial's main ChaCha
//! stream, and each diffusive walk reads its own side stream, so a pattern is
//! a pure function of the trial seed.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{ErrorPattern, FaceCoord, Orientation, ToricLattice};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("event probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("event length must be at least 1")]
    ZeroLength,
    #[error("ballistic event length {xi} must be below the lattice size {size}")]
    LengthTooLarge { xi: usize, size: usize },
    #[error("at least one sample is required")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Iid,
    Ballistic,
    Diffusive,
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Iid => "iid",
            NoiseKind::Ballistic => "ballistic",
            NoiseKind::Diffusive => "diffusive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "iid" => Some(NoiseKind::Iid),
            "ballistic" => Some(NoiseKind::Ballistic),
            "diffusive" => Some(NoiseKind::Diffusive),
            _ => None,
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Event probability per site (edge for iid/ballistic, face for diffusive).
    pub p: f64,
    /// Event length ξ; 1 for iid.
    pub xi: usize,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, p: f64, xi: usize) -> Result<Self, NoiseError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(NoiseError::InvalidProbability(p));
        }
        if xi == 0 {
            return Err(NoiseError::ZeroLength);
        }
        let xi = if kind == NoiseKind::Iid { 1 } else { xi };
        Ok(Self { kind, p, xi })
    }

    pub fn iid(p: f64) -> Self {
        Self::new(NoiseKind::Iid, p, 1).expect("valid iid model")
    }

    pub fn ballistic(p: f64, xi: usize) -> Self {
        Self::new(NoiseKind::Ballistic, p, xi).expect("valid ballistic model")
    }

    pub fn diffusive(p: f64, xi: usize) -> Self {
        Self::new(NoiseKind::Diffusive, p, xi).expect("valid diffusive model")
    }

    pub fn with_p(self, p: f64) -> Self {
        Self { p, ..self }
    }

    /// Checks the sampling-time constraints against a lattice.
    pub fn validate(&self, lat: &ToricLattice) -> Result<(), NoiseError> {
        Self::new(self.kind, self.p, self.xi)?;
        if self.kind == NoiseKind::Ballistic && self.xi >= lat.size() {
            return Err(NoiseError::LengthTooLarge {
                xi: self.xi,
                size: lat.size(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SampleStats {
    pub events_fired: usize,
    pub qubits_flipped: usize,
    pub defect_count: usize,
}

impl SampleStats {
    fn measure(lat: &ToricLattice, e: &ErrorPattern, events_fired: usize) -> Self {
        Self {
            events_fired,
            qubits_flipped: e.weight(),
            defect_count: lat.syndrome(e).len(),
        }
    }
}

#[inline]
fn fires(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.gen::<f64>() < p
}

pub fn sample_iid(lat: &ToricLattice, p: f64, rng: &mut ChaCha8Rng) -> (ErrorPattern, SampleStats) {
    let mut e = ErrorPattern::zeros(lat.n_qubits());
    let mut fired = 0;
    for j in 0..lat.n_qubits() {
        if fires(rng, p) {
            e.toggle(j);
            fired += 1;
        }
    }
    let stats = SampleStats::measure(lat, &e, fired);
    (e, stats)
}

/// XORs the straight event that starts at edge `j` into `e`: a vertical edge
/// extends ξ−1 edges to the right, a horizontal edge ξ−1 edges downward.
pub fn apply_ballistic_event(lat: &ToricLattice, e: &mut ErrorPattern, j: usize, xi: usize) {
    let start = lat.index_to_edge(j);
    let (x, y) = (start.x as isize, start.y as isize);
    for s in 0..xi as isize {
        let edge = match start.orientation {
            Orientation::Vertical => lat.v_edge(x + s, y),
            Orientation::Horizontal => lat.h_edge(x, y + s),
        };
        e.toggle(lat.edge_to_index(edge));
    }
}

pub fn sample_ballistic(
    lat: &ToricLattice,
    p: f64,
    xi: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(ErrorPattern, SampleStats), NoiseError> {
    NoiseModel::new(NoiseKind::Ballistic, p, xi)?.validate(lat)?;
    let mut e = ErrorPattern::zeros(lat.n_qubits());
    let mut fired = 0;
    for j in 0..lat.n_qubits() {
        if fires(rng, p) {
            apply_ballistic_event(lat, &mut e, j, xi);
            fired += 1;
        }
    }
    let stats = SampleStats::measure(lat, &e, fired);
    Ok((e, stats))
}

/// XORs a walk from `start` with the given step directions
/// (0: +x, 1: −x, 2: +y, 3: −y) into `e`; returns the end face.
pub fn apply_walk(
    lat: &ToricLattice,
    e: &mut ErrorPattern,
    start: FaceCoord,
    steps: impl IntoIterator<Item = u8>,
) -> FaceCoord {
    let mut f = start;
    for dir in steps {
        let (next, edge) = lat.step_face(f, dir);
        e.toggle(edge);
        f = next;
    }
    f
}

pub fn sample_diffusive(
    lat: &ToricLattice,
    p: f64,
    xi: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(ErrorPattern, SampleStats), NoiseError> {
    NoiseModel::new(NoiseKind::Diffusive, p, xi)?;
    let mut e = ErrorPattern::zeros(lat.n_qubits());
    let mut fired = 0;
    for fi in 0..lat.n_faces() {
        if fires(rng, p) {
            let mut walk = seed::side_stream(rng, fi as u64 + 1);
            let start = lat.face_from_index(fi);
            apply_walk(lat, &mut e, start, (0..xi).map(|_| walk.gen_range(0..4u8)));
            fired += 1;
        }
    }
    let stats = SampleStats::measure(lat, &e, fired);
    Ok((e, stats))
}

pub fn sample(
    lat: &ToricLattice,
    model: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Result<(ErrorPattern, SampleStats), NoiseError> {
    model.validate(lat)?;
    match model.kind {
        NoiseKind::Iid => Ok(sample_iid(lat, model.p, rng)),
        NoiseKind::Ballistic => sample_ballistic(lat, model.p, model.xi, rng),
        NoiseKind::Diffusive => sample_diffusive(lat, model.p, model.xi, rng),
    }
}

/// Mean fraction of flipped qubits per round, with its standard error.
pub fn effective_qubit_rate(
    lat: &ToricLattice,
    model: &NoiseModel,
    samples: usize,
    master_seed: u64,
) -> Result<(f64, f64), NoiseError> {
    if samples == 0 {
        return Err(NoiseError::NoSamples);
    }
    let n = lat.n_qubits() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for s in 0..samples {
        let mut rng = seed::trial_rng(seed::combine(master_seed, s as u64));
        let (_, stats) = sample(lat, model, &mut rng)?;
        let r = stats.qubits_flipped as f64 / n;
        sum += r;
        sum_sq += r * r;
    }
    let m = samples as f64;
    let mean = sum / m;
    let stderr = if samples > 1 {
        ((sum_sq / m - mean * mean).max(0.0) * m / (m - 1.0) / m).sqrt()
    } else {
        (mean * (1.0 - mean) / n).sqrt()
    };
    Ok((mean, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(l: usize) -> ToricLattice {
        ToricLattice::new(l).unwrap()
    }

    #[test]
    fn zero_and_one_probability() {
        let l = lat(6);
        let mut rng = seed::trial_rng(1);
        assert!(sample_iid(&l, 0.0, &mut rng).0.is_zero());
        let (e, s) = sample_iid(&l, 1.0, &mut rng);
        assert_eq!(e.weight(), l.n_qubits());
        assert_eq!(s.defect_count % 2, 0);
        assert!(sample_ballistic(&l, 0.0, 3, &mut rng).unwrap().0.is_zero());
        assert!(sample_diffusive(&l, 0.0, 3, &mut rng).unwrap().0.is_zero());
    }

    #[test]
    fn iid_mean_flip_fraction() {
        let l = lat(16);
        let mut total = 0usize;
        let samples = 10_000;
        for s in 0..samples {
            let mut rng = seed::trial_rng(s);
            total += sample_iid(&l, 0.05, &mut rng).1.qubits_flipped;
        }
        let bits = (samples as usize * l.n_qubits()) as f64;
        let mean = total as f64 / bits;
        let sigma = (0.05f64 * 0.95 / bits).sqrt();
        assert!((mean - 0.05).abs() < 3.0 * sigma, "{mean}");
    }

    #[test]
    fn single_ballistic_event_separation() {
        for size in [7usize, 10] {
            let l = lat(size);
            for xi in 1..=size / 2 {
                for j in 0..l.n_qubits() {
                    let mut e = ErrorPattern::zeros(l.n_qubits());
                    apply_ballistic_event(&l, &mut e, j, xi);
                    assert_eq!(e.weight(), xi);
                    let syn = l.syndrome(&e);
                    assert_eq!(syn.len(), 2);
                    let d = syn.defects();
                    assert_eq!(l.torus_distance(d[0], d[1]), xi);
                }
            }
        }
        assert!(matches!(
            sample_ballistic(&lat(5), 0.1, 5, &mut seed::trial_rng(0)),
            Err(NoiseError::LengthTooLarge { .. })
        ));
    }

    #[test]
    fn aligned_ballistic_events_merge() {
        let l = lat(12);
        let xi = 3;
        let a = l.edge_to_index(l.v_edge(2, 5));
        let b = l.edge_to_index(l.v_edge(2 + xi as isize, 5));
        let mut e = ErrorPattern::zeros(l.n_qubits());
        apply_ballistic_event(&l, &mut e, a, xi);
        apply_ballistic_event(&l, &mut e, b, xi);
        let syn = l.syndrome(&e);
        assert_eq!(syn.len(), 2);
        let d = syn.defects();
        assert_eq!(l.torus_distance(d[0], d[1]), 2 * xi);
    }

    #[test]
    fn diffusive_walk_endpoints() {
        let l = lat(15);
        let start = FaceCoord::new(4, 4);
        let mut e = ErrorPattern::zeros(l.n_qubits());
        apply_walk(&l, &mut e, start, [0u8]);
        assert_eq!(e.weight(), 1);
        assert_eq!(l.syndrome(&e).len(), 2);

        // Even-length walk back to the start is a stabilizer.
        let mut e = ErrorPattern::zeros(l.n_qubits());
        let end = apply_walk(&l, &mut e, start, [0u8, 2, 1, 3]);
        assert_eq!(end, start);
        assert!(l.syndrome(&e).is_empty());
        assert!(l.logical_class(&e).unwrap().is_trivial());

        let mut e = ErrorPattern::zeros(l.n_qubits());
        apply_walk(&l, &mut e, start, [0u8, 1]);
        assert!(e.is_zero());

        let mut rng = seed::trial_rng(77);
        for _ in 0..500 {
            let steps: Vec<u8> = (0..5).map(|_| rng.gen_range(0..4)).collect();
            let mut e = ErrorPattern::zeros(l.n_qubits());
            let end = apply_walk(&l, &mut e, start, steps);
            let syn = l.syndrome(&e);
            assert_eq!(syn.defects().len(), 2);
            assert!(syn.defects().contains(&start) && syn.defects().contains(&end));
            assert_eq!(l.torus_distance(start, end) % 2, 1);
        }
    }

    #[test]
    fn samplers_are_deterministic() {
        let l = lat(10);
        for model in [
            NoiseModel::iid(0.1),
            NoiseModel::ballistic(0.05, 3),
            NoiseModel::diffusive(0.1, 4),
        ] {
            let a = sample(&l, &model, &mut seed::trial_rng(9)).unwrap();
            let b = sample(&l, &model, &mut seed::trial_rng(9)).unwrap();
            assert_eq!(a, b);
            let c = sample(&l, &model, &mut seed::trial_rng(10)).unwrap();
            assert_ne!(a.0, c.0);
        }
    }

    #[test]
    fn effective_rate_matches_event_coverage() {
        let l = lat(16);
        let (r, s) = effective_qubit_rate(&l, &NoiseModel::iid(0.05), 400, 1).unwrap();
        assert!((r - 0.05).abs() < 3.0 * s);
        let p = 1e-3;
        let xi = 4;
        let (r, s) = effective_qubit_rate(&l, &NoiseModel::ballistic(p, xi), 4000, 2).unwrap();
        // Each edge is covered by ξ candidate events; flipped iff an odd number fire.
        let exact = (1.0 - (1.0 - 2.0 * p).powi(xi as i32)) / 2.0;
        assert!((exact - xi as f64 * p).abs() < (xi as f64 * p).powi(2));
        assert!((r - exact).abs() < 3.0 * s, "{r} vs {exact} ± {s}");
        let (r, _) = effective_qubit_rate(&l, &NoiseModel::diffusive(0.0, 3), 10, 3).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn model_validation() {
        assert!(NoiseModel::new(NoiseKind::Iid, 1.5, 1).is_err());
        assert!(NoiseModel::new(NoiseKind::Diffusive, 0.1, 0).is_err());
        assert_eq!(NoiseModel::new(NoiseKind::Iid, 0.1, 7).unwrap().xi, 1);
        assert_eq!(NoiseKind::parse("ballistic"), Some(NoiseKind::Ballistic));
    }
}
