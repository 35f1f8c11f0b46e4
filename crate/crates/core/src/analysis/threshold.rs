//! Finite-size-scaling threshold fit: `P = A0 + A1·x + A2·x²` with
//! `x = (p − p_th)·L^{1/μ}`.
//!
//! For fixed `(p_th, μ)` the coefficients follow from weighted linear least
//! squares; the outer search over `(p_th, ln μ)` is a simplex minimisation of
//! the profiled χ².

use super::simplex;
use super::AnalysisError;

/// Standard errors below this are raised to it, so that points with zero
/// observed failures keep a finite weight.
pub const SIGMA_FLOOR: f64 = 1e-4;
pub const PARAM_TOL: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 5_000;
/// Beyond this the scaling variable barely depends on L, so the curves have no
/// usable crossing.
pub const MU_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub size: usize,
    pub p: f64,
    pub rate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdFit {
    pub p_th: f64,
    /// Curvature estimate from the profiled χ², inflated by the reduced χ²
    /// when that exceeds one. NaN if the curvature is not positive definite.
    pub p_th_stderr: f64,
    pub mu: f64,
    pub mu_stderr: f64,
    pub coeffs: [f64; 3],
    /// Weighted sum of squared residuals at the optimum.
    pub residual: f64,
    pub reduced_chi2: f64,
    pub rows: usize,
    pub iterations: usize,
    /// The scaling form explains the data no better than a constant.
    pub degenerate: bool,
    /// The fitted crossing lies outside the sampled p range.
    pub out_of_range: bool,
}

fn sigma(pt: &CurvePoint) -> f64 {
    pt.stderr.max(SIGMA_FLOOR)
}

/// Weighted least squares for `y ≈ c0 + c1·x + c2·x²`; returns coefficients and χ².
fn weighted_quadratic(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<([f64; 3], f64)> {
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        let basis = [1.0, x, x * x];
        for i in 0..3 {
            b[i] += w * basis[i] * y;
            for j in 0..3 {
                a[i][j] += w * basis[i] * basis[j];
            }
        }
    }
    let c = solve3(a, b)?;
    let chi2 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((&x, &y), &w)| w * (y - c[0] - c[1] * x - c[2] * x * x).powi(2))
        .sum();
    Some((c, chi2))
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

struct Data {
    p: Vec<f64>,
    log_l: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Data {
    fn profile(&self, p_th: f64, ln_mu: f64) -> Option<([f64; 3], f64)> {
        let inv_mu = (-ln_mu).exp();
        let xs: Vec<f64> = self
            .p
            .iter()
            .zip(&self.log_l)
            .map(|(&p, &ll)| (p - p_th) * (inv_mu * ll).exp())
            .collect();
        if xs.iter().any(|x| !x.is_finite()) {
            return None;
        }
        weighted_quadratic(&xs, &self.y, &self.w)
    }

    fn chi2(&self, p_th: f64, ln_mu: f64) -> f64 {
        self.profile(p_th, ln_mu).map_or(f64::INFINITY, |(_, c)| c)
    }
}

fn validate(rows: &[CurvePoint]) -> Result<Vec<usize>, AnalysisError> {
    for r in rows {
        let ok = r.size > 0
            && r.p.is_finite()
            && (0.0..=1.0).contains(&r.rate)
            && r.stderr.is_finite()
            && r.stderr >= 0.0;
        if !ok {
            return Err(AnalysisError::InvalidRow(format!("{r:?}")));
        }
    }
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(AnalysisError::TooFewSizes { found: sizes.len() });
    }
    for &s in &sizes {
        let mut ps: Vec<f64> = rows.iter().filter(|r| r.size == s).map(|r| r.p).collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        if ps.len() < 4 {
            return Err(AnalysisError::TooFewPoints {
                size: s,
                found: ps.len(),
            });
        }
    }
    Ok(sizes)
}

/// Where the two largest-L curves cross, by linear interpolation on the
/// smaller curve's p values; the middle of the shared p range if they don't.
pub fn pairwise_crossing(rows: &[CurvePoint], small: usize, large: usize) -> f64 {
    let curve = |s: usize| {
        let mut c: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.size == s)
            .map(|r| (r.p, r.rate))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    };
    let (a, b) = (curve(small), curve(large));
    let interp = |c: &[(f64, f64)], p: f64| -> f64 {
        match c.iter().position(|&(q, _)| q >= p) {
            None => c[c.len() - 1].1,
            Some(0) => c[0].1,
            Some(i) => {
                let (p0, y0) = c[i - 1];
                let (p1, y1) = c[i];
                y0 + (y1 - y0) * (p - p0) / (p1 - p0)
            }
        }
    };
    let lo = a[0].0.max(b[0].0);
    let hi = a[a.len() - 1].0.min(b[b.len() - 1].0);
    let mut grid: Vec<f64> = a
        .iter()
        .chain(&b)
        .map(|&(p, _)| p)
        .filter(|&p| p >= lo && p <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let diff = |p: f64| interp(&b, p) - interp(&a, p);
    for w in grid.windows(2) {
        let (d0, d1) = (diff(w[0]), diff(w[1]));
        if d0 <= 0.0 && d1 > 0.0 {
            return w[0] + (w[1] - w[0]) * (-d0) / (d1 - d0);
        }
    }
    0.5 * (lo + hi)
}

pub fn fit_threshold(rows: &[CurvePoint]) -> Result<ThresholdFit, AnalysisError> {
    let sizes = validate(rows)?;
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| {
        a.size
            .cmp(&b.size)
            .then(a.p.total_cmp(&b.p))
            .then(a.rate.total_cmp(&b.rate))
            .then(a.stderr.total_cmp(&b.stderr))
    });
    let data = Data {
        p: sorted.iter().map(|r| r.p).collect(),
        log_l: sorted.iter().map(|r| (r.size as f64).ln()).collect(),
        y: sorted.iter().map(|r| r.rate).collect(),
        w: sorted.iter().map(|r| sigma(r).powi(-2)).collect(),
    };
    let p_min = data.p.iter().copied().fold(f64::INFINITY, f64::min);
    let p_max = data.p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (p_max - p_min).max(1e-6);

    let n = sizes.len();
    let p0 = pairwise_crossing(&sorted, sizes[n - 2], sizes[n - 1]);
    let start = vec![vec![p0, 0.0], vec![p0 + 0.1 * span, 0.0], vec![p0, 0.3]];
    let min = simplex::minimize(|x| data.chi2(x[0], x[1]), start, PARAM_TOL, MAX_ITERATIONS)
        .map_err(|m| AnalysisError::FitFailure {
            iterations: m.iterations,
        })?;
    let (p_th, ln_mu) = (min.x[0], min.x[1]);
    let (coeffs, chi2) = data.profile(p_th, ln_mu).ok_or(AnalysisError::FitFailure {
        iterations: min.iterations,
    })?;
    if !chi2.is_finite() {
        return Err(AnalysisError::FitFailure {
            iterations: min.iterations,
        });
    }

    // Constant model for the degeneracy test.
    let wsum: f64 = data.w.iter().sum();
    let mean = data.y.iter().zip(&data.w).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let chi2_const: f64 = data
        .y
        .iter()
        .zip(&data.w)
        .map(|(y, w)| w * (y - mean).powi(2))
        .sum();
    // Four extra parameters over the constant model.
    let degenerate = chi2_const - chi2 < 4.0;

    let mu = ln_mu.exp();
    if !degenerate && !(p_th > 0.0 && p_th < 1.0 && mu <= MU_MAX) {
        return Err(AnalysisError::Unphysical { p_th, mu });
    }

    let dof = sorted.len().saturating_sub(5).max(1) as f64;
    let reduced_chi2 = chi2 / dof;
    let (var_p, var_mu) = curvature_variances(&data, p_th, ln_mu, span);
    let inflate = reduced_chi2.max(1.0);
    Ok(ThresholdFit {
        p_th,
        p_th_stderr: (var_p * inflate).sqrt(),
        mu,
        mu_stderr: mu * (var_mu * inflate).sqrt(),
        coeffs,
        residual: chi2,
        reduced_chi2,
        rows: sorted.len(),
        iterations: min.iterations,
        degenerate,
        out_of_range: !(p_min..=p_max).contains(&p_th),
    })
}

/// Diagonal of `2·H⁻¹` for the profiled χ² in `(p_th, ln μ)`.
fn curvature_variances(data: &Data, p: f64, m: f64, span: f64) -> (f64, f64) {
    let h = [1e-3 * span, 1e-3];
    let f = |dp: f64, dm: f64| data.chi2(p + dp, m + dm);
    let f0 = f(0.0, 0.0);
    let hpp = (f(h[0], 0.0) - 2.0 * f0 + f(-h[0], 0.0)) / (h[0] * h[0]);
    let hmm = (f(0.0, h[1]) - 2.0 * f0 + f(0.0, -h[1])) / (h[1] * h[1]);
    let hpm =
        (f(h[0], h[1]) - f(h[0], -h[1]) - f(-h[0], h[1]) + f(-h[0], -h[1])) / (4.0 * h[0] * h[1]);
    let det = hpp * hmm - hpm * hpm;
    if !(hpp > 0.0 && det > 0.0) || !det.is_finite() {
        return (f64::NAN, f64::NAN);
    }
    (2.0 * hmm / det, 2.0 * hpp / det)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(p_th: f64, mu: f64, a: [f64; 3], sizes: &[usize], ps: &[f64]) -> Vec<CurvePoint> {
        let mut rows = Vec::new();
        for &l in sizes {
            for &p in ps {
                let x = (p - p_th) * (l as f64).powf(1.0 / mu);
                rows.push(CurvePoint {
                    size: l,
                    p,
                    rate: a[0] + a[1] * x + a[2] * x * x,
                    stderr: 0.01,
                });
            }
        }
        rows
    }

    fn grid() -> Vec<f64> {
        (0..8).map(|i| 0.08 + 0.005 * i as f64).collect()
    }

    #[test]
    fn recovers_synthetic_parameters() {
        let rows = synthetic(0.10, 1.5, [0.3, 1.0, 0.5], &[8, 12, 16], &grid());
        let fit = fit_threshold(&rows).unwrap();
        assert!((fit.p_th - 0.10).abs() < 1e-4, "{fit:?}");
        assert!((fit.mu - 1.5).abs() < 1e-2);
        assert!((fit.coeffs[0] - 0.3).abs() < 1e-3);
        assert!(fit.residual < 1e-6);
        assert!(!fit.degenerate && !fit.out_of_range);
    }

    #[test]
    fn row_order_does_not_matter() {
        let mut rows = synthetic(0.095, 1.2, [0.3, 1.0, 0.5], &[8, 12, 16, 24], &grid());
        for (i, r) in rows.iter_mut().enumerate() {
            r.rate += 0.004 * ((i * 7919) % 13) as f64 / 13.0 - 0.002;
        }
        let a = fit_threshold(&rows).unwrap();
        rows.reverse();
        rows.swap(3, 17);
        let b = fit_threshold(&rows).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_data_is_degenerate() {
        let rows = synthetic(0.10, 1.0, [0.3, 0.0, 0.0], &[8, 12, 16], &grid());
        assert!(fit_threshold(&rows).unwrap().degenerate);
    }

    #[test]
    fn too_few_sizes_or_points() {
        let rows = synthetic(0.10, 1.0, [0.3, 1.0, 0.0], &[8, 12], &grid());
        assert_eq!(
            fit_threshold(&rows),
            Err(AnalysisError::TooFewSizes { found: 2 })
        );
        let rows = synthetic(0.10, 1.0, [0.3, 1.0, 0.0], &[8, 12, 16], &[0.09, 0.1, 0.11]);
        assert!(matches!(
            fit_threshold(&rows),
            Err(AnalysisError::TooFewPoints { found: 3, .. })
        ));
    }

    #[test]
    fn crossing_outside_range_is_flagged() {
        let ps: Vec<f64> = (0..6).map(|i| 0.02 + 0.005 * i as f64).collect();
        let rows = synthetic(0.10, 1.0, [0.5, 0.3, 0.05], &[8, 12, 16], &ps);
        let fit = fit_threshold(&rows).unwrap();
        assert!(fit.out_of_range);
    }

    #[test]
    fn stderr_shrinks_with_precision() {
        let mut rows = synthetic(0.10, 1.0, [0.3, 0.8, 0.3], &[8, 12, 16], &grid());
        for (i, r) in rows.iter_mut().enumerate() {
            r.rate += 0.01 * (((i * 37) % 11) as f64 / 11.0 - 0.5);
        }
        let a = fit_threshold(&rows).unwrap();
        for r in &mut rows {
            r.stderr = 0.001;
        }
        let b = fit_threshold(&rows).unwrap();
        assert!(a.p_th_stderr.is_finite() && a.p_th_stderr > 0.0);
        // Inflation by the reduced χ² keeps the scatter-driven error comparable.
        assert!(b.p_th_stderr > 0.2 * a.p_th_stderr);
    }

    #[test]
    fn pairwise_crossing_interpolates() {
        let rows: Vec<CurvePoint> = [(8, 0.1, 0.2), (8, 0.2, 0.4), (16, 0.1, 0.1), (16, 0.2, 0.5)]
            .iter()
            .map(|&(size, p, rate)| CurvePoint {
                size,
                p,
                rate,
                stderr: 0.01,
            })
            .collect();
        assert!((pairwise_crossing(&rows, 8, 16) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn runaway_fits_are_rejected() {
        // Rates that fall with L at every p: no crossing anywhere.
        let mut rows = Vec::new();
        for l in [8, 12, 16] {
            for i in 0..6 {
                let p = 0.08 + 0.008 * i as f64;
                let rate = 0.3 + 2.0 * (p - 0.1) - 0.002 * l as f64;
                rows.push(CurvePoint {
                    size: l,
                    p,
                    rate,
                    stderr: 0.001,
                });
            }
        }
        assert!(matches!(
            fit_threshold(&rows),
            Err(AnalysisError::Unphysical { .. })
        ));
    }
}
