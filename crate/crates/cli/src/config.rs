//! Experiment configuration files (TOML). Unknown keys are rejected and every
//! field has a default, so an empty file reproduces the reference setup of
//! each subcommand.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use kinetic_em::drift::{DriftSpec, TabulatedDrift};
use kinetic_em::integrator::{InitialCondition, DEFAULT_QUAD_ORDER};
use kinetic_em::lab::DEFAULT_TAMING_HORIZON;
use kinetic_em::state::PhaseState;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Zero {},
    Constant { c: Vec<f64> },
    LinearFriction { gamma: f64 },
    SignVelocity {},
    OscillatorySingular { kappa: f64, beta: f64 },
    Tabulated { file: PathBuf },
    Combination { terms: Vec<DriftTerm> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DriftTerm {
    pub weight: f64,
    pub drift: DriftConfig,
}

impl DriftConfig {
    /// Builds the drift; relative table paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<DriftSpec> {
        Ok(match self {
            Self::Zero {} => DriftSpec::Zero,
            Self::Constant { c } => DriftSpec::Constant(c.clone()),
            Self::LinearFriction { gamma } => DriftSpec::LinearFriction { gamma: *gamma },
            Self::SignVelocity {} => DriftSpec::SignVelocity,
            Self::OscillatorySingular { kappa, beta } => DriftSpec::OscillatorySingular {
                kappa: *kappa,
                beta: *beta,
            },
            Self::Tabulated { file } => {
                let path = base.join(file);
                let table = TabulatedDrift::from_csv_file(&path)
                    .with_context(|| format!("loading tabulated drift {}", path.display()))?;
                DriftSpec::Tabulated(Arc::new(table))
            }
            Self::Combination { terms } => DriftSpec::Combination(
                terms
                    .iter()
                    .map(|t| Ok((t.weight, t.drift.build(base)?)))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    /// Table files referenced by this drift, for hashing.
    pub fn files(&self, base: &Path) -> Vec<PathBuf> {
        match self {
            Self::Tabulated { file } => vec![base.join(file)],
            Self::Combination { terms } => terms.iter().flat_map(|t| t.drift.files(base)).collect(),
            _ => Vec::new(),
        }
    }
}

/// Initial state; omitted components are zero.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StartConfig {
    pub x0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
}

impl StartConfig {
    pub fn state(&self, d: usize) -> Result<PhaseState> {
        let pick = |c: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
            match c {
                None => Ok(vec![0.0; d]),
                Some(v) if v.len() == d => Ok(v.clone()),
                Some(v) => bail!("{name} has {} components, expected d = {d}", v.len()),
            }
        };
        Ok(PhaseState::new(pick(&self.x0, "x0")?, pick(&self.v0, "v0")?)?)
    }

    pub fn initial(&self, d: usize) -> Result<InitialCondition> {
        Ok(InitialCondition::Point(self.state(d)?))
    }
}

fn dyadic(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|k| 1u64 << k).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: u64,
    pub drift: DriftConfig,
    pub theta: f64,
    pub n: u64,
    /// Resolution at which the noise is sampled before coarsening to `n`;
    /// runs sharing it and the seed are driven by the same Brownian path.
    pub path_level: Option<u64>,
    pub horizon: f64,
    pub d: usize,
    pub paths: u64,
    pub first_stream: u64,
    pub quad_order: usize,
    pub start: StartConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            drift: DriftConfig::SignVelocity {},
            theta: 0.5,
            n: 64,
            path_level: None,
            horizon: 1.0,
            d: 1,
            paths: 1,
            first_stream: 0,
            quad_order: DEFAULT_QUAD_ORDER,
            start: StartConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    SelfScheme,
    ExactLinear,
}

/// Pass/fail thresholds on a fitted slope.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeChecks {
    pub min_slope: Option<f64>,
    pub max_slope_se: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StrongRateConfig {
    pub seed: u64,
    pub drift: DriftConfig,
    pub theta: f64,
    pub levels: Vec<u64>,
    pub n_ref: u64,
    pub reference: ReferenceChoice,
    pub moment: f64,
    pub samples: usize,
    pub d: usize,
    pub quad_order: usize,
    pub start: StartConfig,
    pub checks: SlopeChecks,
}

impl Default for StrongRateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            drift: DriftConfig::SignVelocity {},
            theta: 0.5,
            levels: dyadic(4, 8),
            n_ref: 1 << 12,
            reference: ReferenceChoice::SelfScheme,
            moment: 2.0,
            samples: 1000,
            d: 1,
            quad_order: DEFAULT_QUAD_ORDER,
            start: StartConfig::default(),
            checks: SlopeChecks::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct WeakRateConfig {
    pub seed: u64,
    pub drift: DriftConfig,
    pub theta: f64,
    pub levels: Vec<u64>,
    pub n_ref: u64,
    pub t_eval: Vec<f64>,
    pub samples: usize,
    pub ref_samples: usize,
    /// Names from the standard test-function set; all of them when absent.
    pub functions: Option<Vec<String>>,
    pub d: usize,
    pub quad_order: usize,
    pub start: StartConfig,
    pub checks: SlopeChecks,
}

impl Default for WeakRateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            drift: DriftConfig::SignVelocity {},
            theta: 0.5,
            levels: dyadic(4, 8),
            n_ref: 1 << 12,
            t_eval: vec![1.0],
            samples: 100_000,
            ref_samples: 400_000,
            functions: None,
            d: 1,
            quad_order: DEFAULT_QUAD_ORDER,
            start: StartConfig::default(),
            checks: SlopeChecks::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TamingFunction {
    Sin,
    Cos,
    Constant,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TamingDemoConfig {
    pub seed: u64,
    pub levels: Vec<u64>,
    pub samples: usize,
    pub horizon: f64,
    pub d: usize,
    /// Applied to the first coordinate of the integral component.
    pub function: TamingFunction,
    /// Fail unless the shifted predictor decays faster than the frozen one.
    pub require_faster_shifted: bool,
    pub checks_frozen: SlopeChecks,
    pub checks_shifted: SlopeChecks,
}

impl Default for TamingDemoConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            levels: dyadic(4, 10),
            samples: 100_000,
            horizon: DEFAULT_TAMING_HORIZON,
            d: 1,
            function: TamingFunction::Sin,
            require_faster_shifted: true,
            checks_frozen: SlopeChecks::default(),
            checks_shifted: SlopeChecks::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct KernelCheckConfig {
    pub seed: u64,
    pub dims: Vec<usize>,
    pub times: Vec<f64>,
    pub probes: usize,
    pub samples: usize,
    pub mass_tolerance: f64,
    pub scaling_tolerance: f64,
    /// Relative tolerance on fitted norm-decay exponents.
    pub exponent_tolerance: f64,
    /// Standard-error multiple for covariance checks.
    pub z_tolerance: f64,
}

impl Default for KernelCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dims: vec![1, 2],
            times: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            probes: 1000,
            samples: 100_000,
            mass_tolerance: 1e-8,
            scaling_tolerance: 1e-12,
            exponent_tolerance: 0.05,
            z_tolerance: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TvProxyConfig {
    pub seed: u64,
    pub drift: DriftConfig,
    pub theta: f64,
    pub levels: Vec<u64>,
    pub n_ref: u64,
    pub t: f64,
    pub bins: usize,
    pub samples: usize,
    pub quad_order: usize,
    pub start: StartConfig,
}

impl Default for TvProxyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            drift: DriftConfig::SignVelocity {},
            theta: 0.5,
            levels: dyadic(2, 6),
            n_ref: 1 << 10,
            t: 1.0,
            bins: 16,
            samples: 100_000,
            quad_order: DEFAULT_QUAD_ORDER,
            start: StartConfig::default(),
        }
    }
}

/// Parses `text`, rejecting unknown keys.
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    Ok(toml::from_str(text)?)
}

pub fn load<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}
