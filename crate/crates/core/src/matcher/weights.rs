use std::fmt;

use serde::{Deserialize, Serialize};

use super::MatchError;

/// Gaussian weights are real-valued; the matcher works on `round(w · 10³)`.
pub const GAUSSIAN_SCALE: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Standard,
    SingleWeight,
    Gaussian,
    MultiPeak,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Standard => "standard",
            Family::SingleWeight => "single_weight",
            Family::Gaussian => "gaussian",
            Family::MultiPeak => "multi_peak",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "standard" => Some(Family::Standard),
            "single_weight" => Some(Family::SingleWeight),
            "gaussian" => Some(Family::Gaussian),
            "multi_peak" => Some(Family::MultiPeak),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One member of a decoder family: the edge-weight function `W_λ(d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightFamily {
    pub family: Family,
    /// Family parameter λ; for the Gaussian family it is the peak centre
    /// (width λ/2). Unused by `Standard` and `MultiPeak`.
    pub lambda: u32,
    /// Penalty factor Δ. `None` resolves to `max(10⁴, 100·L)`.
    pub delta: Option<u64>,
    /// Low-weight separations of the multi-peak family, sorted.
    pub peaks: Vec<u32>,
}

impl WeightFamily {
    pub fn standard() -> Self {
        Self {
            family: Family::Standard,
            lambda: 1,
            delta: None,
            peaks: Vec::new(),
        }
    }

    pub fn single_weight(lambda: u32) -> Self {
        Self {
            family: Family::SingleWeight,
            lambda,
            delta: None,
            peaks: Vec::new(),
        }
    }

    pub fn gaussian(lambda: u32) -> Self {
        Self {
            family: Family::Gaussian,
            lambda,
            delta: None,
            peaks: Vec::new(),
        }
    }

    pub fn multi_peak(mut peaks: Vec<u32>) -> Self {
        peaks.sort_unstable();
        peaks.dedup();
        Self {
            family: Family::MultiPeak,
            lambda: peaks.first().copied().unwrap_or(1),
            delta: None,
            peaks,
        }
    }

    pub fn with_delta(mut self, delta: u64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn resolved_delta(&self, lattice_size: usize) -> u64 {
        self.delta.unwrap_or_else(|| default_delta(lattice_size))
    }

    /// Checks the parameters against a lattice of linear size `lattice_size`.
    pub fn validate(&self, lattice_size: usize) -> Result<(), MatchError> {
        match self.family {
            Family::SingleWeight | Family::Gaussian if self.lambda == 0 => {
                return Err(MatchError::InvalidFamily(
                    "lambda must be at least 1".into(),
                ))
            }
            Family::MultiPeak if self.peaks.is_empty() => {
                return Err(MatchError::InvalidFamily(
                    "multi_peak needs at least one peak".into(),
                ))
            }
            Family::MultiPeak if self.peaks.contains(&0) => {
                return Err(MatchError::InvalidFamily("peaks must be positive".into()))
            }
            _ => {}
        }
        if matches!(self.family, Family::SingleWeight | Family::MultiPeak)
            && self.resolved_delta(lattice_size) <= lattice_size as u64
        {
            return Err(MatchError::InvalidFamily(format!(
                "delta {} must be much larger than L = {lattice_size}",
                self.resolved_delta(lattice_size)
            )));
        }
        Ok(())
    }

    /// Real-valued weight `W(d)`.
    pub fn weight(&self, d: u32, lattice_size: usize) -> f64 {
        let delta = self.resolved_delta(lattice_size);
        match self.family {
            Family::Standard => weight_standard(d) as f64,
            Family::SingleWeight => weight_single(d, self.lambda, delta) as f64,
            Family::Gaussian => weight_gaussian(d, self.lambda),
            Family::MultiPeak => weight_multi_peak(d, &self.peaks, delta) as f64,
        }
    }

    /// Integer weight handed to the matcher.
    pub fn scaled_weight(&self, d: u32, lattice_size: usize) -> i64 {
        let delta = self.resolved_delta(lattice_size);
        match self.family {
            Family::Standard => weight_standard(d) as i64,
            Family::SingleWeight => weight_single(d, self.lambda, delta) as i64,
            Family::Gaussian => (weight_gaussian(d, self.lambda) * GAUSSIAN_SCALE).round() as i64,
            Family::MultiPeak => weight_multi_peak(d, &self.peaks, delta) as i64,
        }
    }

    /// Lambda column text: the parameter, `a+b` for peaks, empty for standard.
    pub fn lambda_label(&self) -> String {
        match self.family {
            Family::Standard => String::new(),
            Family::SingleWeight | Family::Gaussian => self.lambda.to_string(),
            Family::MultiPeak => self
                .peaks
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join("+"),
        }
    }

    pub fn from_label(family: Family, label: &str) -> Option<Self> {
        match family {
            Family::Standard => label.is_empty().then(Self::standard),
            Family::SingleWeight => label.parse().ok().map(Self::single_weight),
            Family::Gaussian => label.parse().ok().map(Self::gaussian),
            Family::MultiPeak => label
                .split('+')
                .map(|s| s.parse().ok())
                .collect::<Option<Vec<u32>>>()
                .map(Self::multi_peak),
        }
    }
}

impl fmt::Display for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Standard => write!(f, "standard"),
            _ => write!(f, "{}({})", self.family, self.lambda_label()),
        }
    }
}

pub fn default_delta(lattice_size: usize) -> u64 {
    10_000u64.max(100 * lattice_size as u64)
}

pub fn weight_standard(d: u32) -> u64 {
    d as u64
}

pub fn weight_single(d: u32, lambda: u32, delta: u64) -> u64 {
    if d == lambda {
        d as u64
    } else {
        d as u64 * delta
    }
}

/// `d · (10⁴ − 9999·exp(−(d−λ)²/(2σ²)))` with σ = λ/2.
pub fn weight_gaussian(d: u32, lambda: u32) -> f64 {
    let d = d as f64;
    let mu = lambda as f64;
    let sigma = mu / 2.0;
    d * (1e4 - 9999.0 * (-(d - mu).powi(2) / (2.0 * sigma * sigma)).exp())
}

pub fn weight_multi_peak(d: u32, peaks: &[u32], delta: u64) -> u64 {
    if peaks.contains(&d) {
        d as u64
    } else {
        d as u64 * delta
    }
}
