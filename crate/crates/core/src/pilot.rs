//! Short pilot runs that place p values: the crossing bracket for threshold
//! sweeps and the frozen operating point for failure-rate signatures.

use crate::lattice::ToricLattice;
use crate::matcher::WeightFamily;
use crate::montecarlo::{estimate_group, FailureEstimate, SimError};
use crate::noise::{NoiseKind, NoiseModel};

/// Rounds to `digits` significant figures so grid values print compactly.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// `points` evenly spaced values over `p_c·(1 ± rel_halfwidth)`.
pub fn threshold_grid(p_c: f64, points: usize, rel_halfwidth: f64) -> Vec<f64> {
    assert!(points >= 2);
    (0..points)
        .map(|i| {
            let t = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
            round_sig(p_c * (1.0 + rel_halfwidth * t), 4)
        })
        .collect()
}

/// Geometric bisection for the p at which `size_large` starts failing more
/// often than `size_small`.
#[allow(clippy::too_many_arguments)]
pub fn pilot_crossing(
    kind: NoiseKind,
    xi: usize,
    family: &WeightFamily,
    size_small: usize,
    size_large: usize,
    bracket: (f64, f64),
    trials: u64,
    steps: usize,
    master_seed: u64,
) -> Result<f64, SimError> {
    let small = ToricLattice::new(size_small)?;
    let large = ToricLattice::new(size_large)?;
    let fam = std::slice::from_ref(family);
    let (mut lo, mut hi) = bracket;
    for _ in 0..steps {
        let mid = (lo * hi).sqrt();
        let m = NoiseModel::new(kind, mid, xi)?;
        let a = estimate_group(&small, &m, fam, trials, master_seed)?.0[0];
        let b = estimate_group(&large, &m, fam, trials, master_seed)?.0[0];
        if b.rate > a.rate {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub p: f64,
    /// Pilot estimates per family at `p`.
    pub estimates: Vec<FailureEstimate>,
}

impl OperatingPoint {
    pub fn best_rate(&self) -> f64 {
        self.estimates
            .iter()
            .map(|e| e.rate)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Geometric bisection for the p at which the best of `families` fails with
/// probability `target`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_operating_p(
    size: usize,
    kind: NoiseKind,
    xi: usize,
    families: &[WeightFamily],
    target: f64,
    bracket: (f64, f64),
    trials: u64,
    steps: usize,
    master_seed: u64,
) -> Result<OperatingPoint, SimError> {
    let lat = ToricLattice::new(size)?;
    let best = |p: f64| -> Result<Vec<FailureEstimate>, SimError> {
        let m = NoiseModel::new(kind, p, xi)?;
        Ok(estimate_group(&lat, &m, families, trials, master_seed)?.0)
    };
    let (mut lo, mut hi) = bracket;
    for _ in 0..steps {
        let mid = (lo * hi).sqrt();
        let est = best(mid)?;
        let r = est.iter().map(|e| e.rate).fold(f64::INFINITY, f64::min);
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = round_sig((lo * hi).sqrt(), 4);
    Ok(OperatingPoint {
        p,
        estimates: best(p)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_and_grid() {
        assert_eq!(round_sig(0.123456, 3), 0.123);
        assert_eq!(round_sig(0.000987654, 2), 0.00099);
        let g = threshold_grid(0.1, 5, 0.2);
        assert_eq!(g, vec![0.08, 0.09, 0.1, 0.11, 0.12]);
    }

    #[test]
    fn calibration_hits_target_band() {
        let op = calibrate_operating_p(
            8,
            NoiseKind::Iid,
            1,
            &[WeightFamily::standard()],
            0.3,
            (0.01, 0.3),
            600,
            10,
            4,
        )
        .unwrap();
        assert!((op.best_rate() - 0.3).abs() < 0.08, "{op:?}");
    }
}
