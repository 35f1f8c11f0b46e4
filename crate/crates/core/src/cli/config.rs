//! Experiment configuration: TOML schema, parsing and up-front validation.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::analysis::SignatureMode;
use crate::lattice::ToricLattice;
use crate::matcher::{Family, WeightFamily};
use crate::noise::{NoiseKind, NoiseModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(rename = "L")]
    pub sizes: OneOrMany<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: String,
    pub p: Option<OneOrMany<f64>>,
    pub xi: Option<OneOrMany<usize>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub family: String,
    pub lambda: Option<OneOrMany<u32>>,
    pub delta: Option<u64>,
    pub peaks: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    pub threads: Option<usize>,
}

/// Pilot calibration of the operating p for failure-mode signatures: the p at
/// which the best decoder fails with probability `target`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPolicy {
    pub target: f64,
    pub bracket: [f64; 2],
    pub pilot_trials: u64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AnalysisSection {
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_window")]
    pub fit_window: usize,
    pub operating_p: Option<OperatingPolicy>,
}

fn default_mode() -> String {
    "threshold".into()
}

fn default_window() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub lattice: LatticeSection,
    pub noise: NoiseSection,
    pub decoder: Option<DecoderSection>,
    pub run: RunSection,
    pub analysis: Option<AnalysisSection>,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sizes: Vec<usize>,
    pub kind: NoiseKind,
    /// Empty when the operating p is calibrated.
    pub ps: Vec<f64>,
    pub xis: Vec<usize>,
    /// Empty when the config has no decoder section.
    pub families: Vec<WeightFamily>,
    pub trials: u64,
    pub master_seed: u64,
    pub threads: Option<usize>,
    pub mode: SignatureMode,
    pub fit_window: usize,
    pub operating_p: Option<OperatingPolicy>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: Overrides) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_raw(raw, overrides)
    }

    pub fn from_raw(raw: RawConfig, overrides: Overrides) -> Result<Self, ConfigError> {
        let sizes = raw.lattice.sizes.to_vec();
        if sizes.is_empty() {
            return Err(ConfigError::Empty("lattice.L"));
        }
        for &s in &sizes {
            ToricLattice::new(s).map_err(|e| invalid("lattice.L", e.to_string()))?;
        }

        let kind = NoiseKind::parse(&raw.noise.kind)
            .ok_or_else(|| invalid("noise.kind", format!("unknown kind {:?}", raw.noise.kind)))?;
        let xis = raw.noise.xi.map_or(vec![1], |x| x.to_vec());
        if xis.is_empty() {
            return Err(ConfigError::Empty("noise.xi"));
        }
        let ps = raw.noise.p.map(|p| p.to_vec()).unwrap_or_default();

        let analysis = raw.analysis.unwrap_or(AnalysisSection {
            mode: default_mode(),
            fit_window: default_window(),
            operating_p: None,
        });
        let mode = SignatureMode::parse(&analysis.mode).ok_or_else(|| {
            invalid(
                "analysis.mode",
                format!("expected threshold or failure, got {:?}", analysis.mode),
            )
        })?;
        if analysis.fit_window < 3 || analysis.fit_window.is_multiple_of(2) {
            return Err(invalid("analysis.fit-window", "must be odd and at least 3"));
        }
        if let Some(op) = &analysis.operating_p {
            let [lo, hi] = op.bracket;
            if !(0.0 < lo && lo < hi && hi <= 1.0) {
                return Err(invalid(
                    "analysis.operating-p.bracket",
                    "need 0 < lo < hi <= 1",
                ));
            }
            if !(0.0 < op.target && op.target < 1.0) {
                return Err(invalid("analysis.operating-p.target", "must lie in (0, 1)"));
            }
            if op.pilot_trials == 0 {
                return Err(invalid(
                    "analysis.operating-p.pilot_trials",
                    "must be at least 1",
                ));
            }
        } else if ps.is_empty() {
            return Err(ConfigError::Empty("noise.p"));
        }

        let mut models = Vec::new();
        for &xi in &xis {
            for &p in if ps.is_empty() { &[0.0][..] } else { &ps[..] } {
                let m =
                    NoiseModel::new(kind, p, xi).map_err(|e| invalid("noise", e.to_string()))?;
                for &s in &sizes {
                    m.validate(&ToricLattice::new(s).expect("checked above"))
                        .map_err(|e| invalid("noise", format!("L = {s}: {e}")))?;
                }
                models.push(m);
            }
        }

        let families = match &raw.decoder {
            Some(d) => expand_families(d)?,
            None => Vec::new(),
        };
        for f in &families {
            for &s in &sizes {
                f.validate(s)
                    .map_err(|e| invalid("decoder", format!("L = {s}: {e}")))?;
            }
        }

        let trials = overrides.trials.unwrap_or(raw.run.trials);
        if trials == 0 {
            return Err(invalid("run.trials", "must be at least 1"));
        }
        let threads = overrides.threads.or(raw.run.threads);
        if threads == Some(0) {
            return Err(invalid("run.threads", "must be at least 1"));
        }
        Ok(Self {
            sizes,
            kind,
            ps,
            xis,
            families,
            trials,
            master_seed: overrides.seed.unwrap_or(raw.run.master_seed),
            threads,
            mode,
            fit_window: analysis.fit_window,
            operating_p: analysis.operating_p,
        })
    }

    pub fn require_families(&self) -> Result<(), ConfigError> {
        if self.families.is_empty() {
            return Err(ConfigError::Empty("decoder"));
        }
        Ok(())
    }

    pub fn require_ps(&self) -> Result<(), ConfigError> {
        if self.ps.is_empty() {
            return Err(ConfigError::Empty("noise.p"));
        }
        Ok(())
    }

    /// Operating p per ξ in failure mode: one shared value, or one per ξ.
    pub fn fixed_p_for(&self, xi_index: usize) -> Result<f64, ConfigError> {
        match self.ps.len() {
            1 => Ok(self.ps[0]),
            n if n == self.xis.len() => Ok(self.ps[xi_index]),
            _ => Err(invalid(
                "noise.p",
                "failure mode needs one p, or one p per xi, unless operating-p is calibrated",
            )),
        }
    }
}

fn expand_families(d: &DecoderSection) -> Result<Vec<WeightFamily>, ConfigError> {
    let family = Family::parse(&d.family)
        .ok_or_else(|| invalid("decoder.family", format!("unknown family {:?}", d.family)))?;
    let with_delta = |f: WeightFamily| match d.delta {
        Some(delta) => f.with_delta(delta),
        None => f,
    };
    let lambdas = d.lambda.as_ref().map(|l| l.to_vec());
    match family {
        Family::Standard => {
            if lambdas.is_some() || d.peaks.is_some() {
                return Err(invalid(
                    "decoder",
                    "the standard family takes no lambda or peaks",
                ));
            }
            Ok(vec![with_delta(WeightFamily::standard())])
        }
        Family::SingleWeight | Family::Gaussian => {
            let lambdas = lambdas.ok_or(ConfigError::Empty("decoder.lambda"))?;
            if lambdas.is_empty() {
                return Err(ConfigError::Empty("decoder.lambda"));
            }
            if lambdas.contains(&0) {
                return Err(invalid("decoder.lambda", "must be at least 1"));
            }
            let mut seen = lambdas.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != lambdas.len() {
                return Err(invalid("decoder.lambda", "values must be distinct"));
            }
            Ok(lambdas
                .into_iter()
                .map(|l| {
                    with_delta(if family == Family::Gaussian {
                        WeightFamily::gaussian(l)
                    } else {
                        WeightFamily::single_weight(l)
                    })
                })
                .collect())
        }
        Family::MultiPeak => {
            let peaks = d.peaks.clone().ok_or(ConfigError::Empty("decoder.peaks"))?;
            if peaks.is_empty() {
                return Err(ConfigError::Empty("decoder.peaks"));
            }
            if lambdas.is_some() {
                return Err(invalid("decoder", "multi_peak takes peaks, not lambda"));
            }
            Ok(vec![with_delta(WeightFamily::multi_peak(peaks))])
        }
    }
}
