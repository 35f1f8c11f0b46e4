//! Signature plots over the decoder parameter λ, the λ* estimators, the
//! λ*–ξ power law, and the two-peak decoder built from a plot.

use std::fmt;

use super::threshold::{fit_threshold, CurvePoint, ThresholdFit};
use super::AnalysisError;
use crate::matcher::{Family, WeightFamily};
use crate::montecarlo::SweepCell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignatureMode {
    /// Value is the fitted threshold p_th.
    Threshold,
    /// Value is the success rate `1 − P_fail` at one fixed (L, p), so that
    /// larger is better in both modes.
    Failure,
}

impl SignatureMode {
    pub fn name(&self) -> &'static str {
        match self {
            SignatureMode::Threshold => "threshold",
            SignatureMode::Failure => "failure",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "threshold" => Some(SignatureMode::Threshold),
            "failure" => Some(SignatureMode::Failure),
            _ => None,
        }
    }
}

impl fmt::Display for SignatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignaturePoint {
    pub lambda: u32,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignaturePlot {
    pub xi: usize,
    pub mode: SignatureMode,
    /// Sorted by λ.
    pub points: Vec<SignaturePoint>,
}

impl SignaturePlot {
    pub fn new(
        xi: usize,
        mode: SignatureMode,
        mut points: Vec<SignaturePoint>,
    ) -> Result<Self, AnalysisError> {
        if points.is_empty() {
            return Err(AnalysisError::InsufficientPoints {
                needed: 1,
                found: 0,
            });
        }
        points.sort_by_key(|p| p.lambda);
        if let Some(w) = points.windows(2).find(|w| w[0].lambda == w[1].lambda) {
            return Err(AnalysisError::DuplicateLambda(w[0].lambda));
        }
        if let Some(p) = points
            .iter()
            .find(|p| !p.value.is_finite() || p.error.is_nan() || p.error < 0.0)
        {
            return Err(AnalysisError::InvalidRow(format!("{p:?}")));
        }
        Ok(Self { xi, mode, points })
    }

    pub fn get(&self, lambda: u32) -> Option<&SignaturePoint> {
        self.points.iter().find(|p| p.lambda == lambda)
    }

    pub fn lambdas(&self) -> Vec<u32> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    /// λ values of `expected` that have no point.
    pub fn missing(&self, expected: &[u32]) -> Vec<u32> {
        expected
            .iter()
            .copied()
            .filter(|&l| self.get(l).is_none())
            .collect()
    }
}

fn lambda_of(cell: &SweepCell) -> Result<u32, AnalysisError> {
    match cell.spec.decoder.family {
        Family::SingleWeight | Family::Gaussian => Ok(cell.spec.decoder.lambda),
        other => Err(AnalysisError::InvalidRow(format!(
            "{other} decoders have no single λ"
        ))),
    }
}

/// Builds a signature plot from sweep output of one noise model and one
/// λ-parametrised family. Failure mode needs exactly one cell per λ; threshold
/// mode fits one threshold per λ.
pub fn build_signature(
    cells: &[SweepCell],
    mode: SignatureMode,
) -> Result<SignaturePlot, AnalysisError> {
    let first = cells.first().ok_or(AnalysisError::InsufficientPoints {
        needed: 1,
        found: 0,
    })?;
    let xi = first.spec.model.xi;
    for c in cells {
        if c.spec.model.kind != first.spec.model.kind
            || c.spec.model.xi != xi
            || c.spec.decoder.family != first.spec.decoder.family
        {
            return Err(AnalysisError::InvalidRow(
                "signature cells must share the noise model and decoder family".into(),
            ));
        }
    }
    let points = match mode {
        SignatureMode::Failure => {
            for c in cells {
                if c.spec.size != first.spec.size || c.spec.model.p != first.spec.model.p {
                    return Err(AnalysisError::InvalidRow(
                        "failure-mode signature needs a single (L, p)".into(),
                    ));
                }
            }
            cells
                .iter()
                .map(|c| {
                    Ok(SignaturePoint {
                        lambda: lambda_of(c)?,
                        value: 1.0 - c.estimate.rate,
                        error: c.estimate.stderr,
                    })
                })
                .collect::<Result<Vec<_>, AnalysisError>>()?
        }
        SignatureMode::Threshold => {
            let mut lambdas = cells.iter().map(lambda_of).collect::<Result<Vec<_>, _>>()?;
            lambdas.sort_unstable();
            lambdas.dedup();
            let mut pts = Vec::new();
            for l in lambdas {
                let rows: Vec<CurvePoint> = cells
                    .iter()
                    .filter(|c| c.spec.decoder.lambda == l)
                    .map(curve_point)
                    .collect();
                let fit = fit_threshold(&rows)?;
                pts.push(threshold_point(l, &fit));
            }
            pts
        }
    };
    SignaturePlot::new(xi, mode, points)
}

pub fn curve_point(c: &SweepCell) -> CurvePoint {
    CurvePoint {
        size: c.spec.size,
        p: c.spec.model.p,
        rate: c.estimate.rate,
        stderr: c.estimate.stderr,
    }
}

pub fn threshold_point(lambda: u32, fit: &ThresholdFit) -> SignaturePoint {
    SignaturePoint {
        lambda,
        value: fit.p_th,
        error: if fit.p_th_stderr.is_finite() {
            fit.p_th_stderr
        } else {
            0.0
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaStar {
    pub discrete: u32,
    pub continuous: f64,
    /// Odd λ values used for the parabola.
    pub window: Vec<u32>,
    /// The odd-λ peak sits at the edge of the available λ range; a wider
    /// λ sweep is advised.
    pub boundary: bool,
}

/// Discrete λ* is the argmax over all points (ties to the smaller λ); the
/// continuous estimate is the vertex of a least-squares parabola through
/// `window` consecutive odd-λ points centred on the odd-λ peak, clamped to
/// the window.
pub fn lambda_star(plot: &SignaturePlot, window: usize) -> Result<LambdaStar, AnalysisError> {
    let window = window.max(3);
    let odd: Vec<&SignaturePoint> = plot.points.iter().filter(|p| p.lambda % 2 == 1).collect();
    if odd.len() < 3 {
        return Err(AnalysisError::InsufficientPoints {
            needed: 3,
            found: odd.len(),
        });
    }
    let argmax = |pts: &[&SignaturePoint]| -> usize {
        let mut best = 0;
        for (i, p) in pts.iter().enumerate() {
            if p.value > pts[best].value {
                best = i;
            }
        }
        best
    };
    let all: Vec<&SignaturePoint> = plot.points.iter().collect();
    let discrete = all[argmax(&all)].lambda;

    let peak = argmax(&odd);
    let w = window.min(odd.len());
    let start = peak.saturating_sub(w / 2).min(odd.len() - w);
    let used = &odd[start..start + w];
    let boundary = peak == 0 || peak == odd.len() - 1;

    let xs: Vec<f64> = used.iter().map(|p| p.lambda as f64).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.value).collect();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let continuous = match parabola(&xs, &ys) {
        Some([_, b, c]) if c < 0.0 => (-b / (2.0 * c)).clamp(lo, hi),
        _ => odd[peak].lambda as f64,
    };
    Ok(LambdaStar {
        discrete,
        continuous,
        window: used.iter().map(|p| p.lambda).collect(),
        boundary,
    })
}

/// Unweighted least-squares `y = a + b·x + c·x²`, centred for conditioning.
fn parabola(xs: &[f64], ys: &[f64]) -> Option<[f64; 3]> {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let u = x - xm;
        let mut pw = 1.0;
        for k in 0..5 {
            s[k] += pw;
            if k < 3 {
                t[k] += pw * y;
            }
            pw *= u;
        }
    }
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(m);
    if d.abs() < 1e-12 {
        return None;
    }
    let col = |k: usize| {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = t[r];
        }
        det3(mk) / d
    };
    let (a, b, c) = (col(0), col(1), col(2));
    // Undo the centring: y = a + b(x − m) + c(x − m)².
    Some([a - b * xm + c * xm * xm, b - 2.0 * c * xm, c])
}

/// Least-squares line through `(ln ξ, ln λ*)`; returns `(a, b)` of `λ* = a·ξ^b`.
pub fn power_law_fit(points: &[(f64, f64)]) -> Result<(f64, f64), AnalysisError> {
    if points.len() < 2 {
        return Err(AnalysisError::InsufficientPoints {
            needed: 2,
            found: points.len(),
        });
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(AnalysisError::NonPositive);
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::InsufficientPoints {
            needed: 2,
            found: 1,
        });
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    Ok(((my - b * mx).exp(), b))
}

/// Two-peak decoder from the two highest odd-λ values (ties to smaller λ).
pub fn synthesize_specialized(plot: &SignaturePlot) -> Result<WeightFamily, AnalysisError> {
    let mut odd: Vec<&SignaturePoint> = plot.points.iter().filter(|p| p.lambda % 2 == 1).collect();
    if odd.len() < 2 {
        return Err(AnalysisError::InsufficientPoints {
            needed: 2,
            found: odd.len(),
        });
    }
    odd.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.lambda.cmp(&b.lambda)));
    Ok(WeightFamily::multi_peak(vec![odd[0].lambda, odd[1].lambda]))
}
