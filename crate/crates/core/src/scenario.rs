//! Declarative scenario configuration.
//!
//! A config file is TOML with a `schema_version` and one or more
//! `[[scenario]]` tables. Each scenario names a metric family preset, a
//! potential, the flow parameters with the curvature conditions to certify,
//! the solver grid and scheme, the checks to sweep, and (optionally) a Monte
//! Carlo block. Unknown keys are rejected so typos fail loudly instead of
//! silently disabling a check.

use serde::{Deserialize, Serialize};

use crate::flowcheck::{ConditionKind, DVariant, FlowParams};
use crate::geometry::chart::ChartKind;
use crate::geometry::curvature::EffectiveDim;
use crate::geometry::family::{ManifoldFamily, TimeScale};
use crate::geometry::potential::PotentialFamily;
use crate::heat::Scheme;
use crate::{CoreError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text)
            .map_err(|e| CoreError::Config(format!("config parse error: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CoreError::Config(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        if cfg.scenarios.is_empty() {
            return Err(CoreError::Config("config declares no scenarios".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for sc in &cfg.scenarios {
            if sc.name.trim().is_empty() {
                return Err(CoreError::Config("scenario with empty name".into()));
            }
            if !seen.insert(sc.name.as_str()) {
                return Err(CoreError::Config(format!(
                    "duplicate scenario name '{}'",
                    sc.name
                )));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub flow: FlowSpec,
    pub grid: GridSpec,
    pub solve: SolveSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default)]
    pub mc: Option<McSpec>,
}

// ---------------------------------------------------------------------------
// geometry
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartSpec {
    Circle {
        period: f64,
    },
    Torus {
        period: f64,
    },
    Line {
        x_min: f64,
        x_max: f64,
    },
    Sphere {
        dim_n: usize,
        theta_min: f64,
        radius: f64,
    },
}

impl ChartSpec {
    pub fn to_chart(&self) -> ChartKind {
        match *self {
            ChartSpec::Circle { period } => ChartKind::Circle { period },
            ChartSpec::Torus { period } => ChartKind::Torus {
                periods: vec![period],
            },
            ChartSpec::Line { x_min, x_max } => ChartKind::Line { x_min, x_max },
            ChartSpec::Sphere {
                dim_n,
                theta_min,
                radius,
            } => ChartKind::SpherePolar {
                dim_n,
                theta_min,
                radius,
            },
        }
    }
}

fn default_theta_min() -> f64 {
    0.05
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    /// Time-independent metric on the given chart.
    StaticFlat { chart: ChartSpec },
    /// `g(t) = e^{2·rate·t}·ĝ` on the given chart.
    ConformalExponential { chart: ChartSpec, rate: f64 },
    /// Shrinking round sphere `c(t) = 1 − 2(n−1)t/r²`.
    RicciFlowSphere {
        dim_n: usize,
        radius: f64,
        #[serde(default = "default_theta_min")]
        theta_min: f64,
    },
    /// Expanding round sphere `c(t) = 1 + 2(n−1)t/r²` (the time-reversed
    /// normalization, a super flow with strict slack).
    BackwardRicciFlowSphere {
        dim_n: usize,
        radius: f64,
        #[serde(default = "default_theta_min")]
        theta_min: f64,
    },
}

impl GeometrySpec {
    pub fn build(&self) -> Result<ManifoldFamily> {
        match *self {
            GeometrySpec::StaticFlat { ref chart } => {
                ManifoldFamily::conformal(chart.to_chart(), TimeScale::Static)
            }
            GeometrySpec::ConformalExponential { ref chart, rate } => {
                ManifoldFamily::conformal(chart.to_chart(), TimeScale::ConformalExp { rate })
            }
            GeometrySpec::RicciFlowSphere {
                dim_n,
                radius,
                theta_min,
            } => ManifoldFamily::conformal(
                ChartKind::SpherePolar {
                    dim_n,
                    theta_min,
                    radius,
                },
                TimeScale::ricci_flow_sphere(dim_n, radius),
            ),
            GeometrySpec::BackwardRicciFlowSphere {
                dim_n,
                radius,
                theta_min,
            } => {
                let c1 = 2.0 * (dim_n as f64 - 1.0) / (radius * radius);
                ManifoldFamily::conformal(
                    ChartKind::SpherePolar {
                        dim_n,
                        theta_min,
                        radius,
                    },
                    TimeScale::Linear { c0: 1.0, c1 },
                )
            }
        }
    }
}

// ---------------------------------------------------------------------------
// potential
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Cosine {
        amplitude: f64,
        #[serde(default)]
        time_slope: f64,
    },
    Quadratic {
        strength: f64,
        #[serde(default)]
        time_slope: f64,
    },
}

impl PotentialSpec {
    pub fn build(&self, family: &ManifoldFamily) -> Result<PotentialFamily> {
        match *self {
            PotentialSpec::Zero => Ok(PotentialFamily::zero(family)),
            PotentialSpec::Cosine {
                amplitude,
                time_slope,
            } => PotentialFamily::cosine(family, amplitude, time_slope),
            PotentialSpec::Quadratic {
                strength,
                time_slope,
            } => PotentialFamily::quadratic(family, strength, time_slope),
        }
    }
}

// ---------------------------------------------------------------------------
// flow parameters
// ---------------------------------------------------------------------------

/// Effective dimension in configs: a number, or the string `"infinite"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MSpec {
    Finite(f64),
    Named(String),
}

impl MSpec {
    pub fn to_effective(&self) -> Result<EffectiveDim> {
        match self {
            MSpec::Finite(v) => Ok(EffectiveDim::Finite(*v)),
            MSpec::Named(s) if s == "infinite" => Ok(EffectiveDim::Infinite),
            MSpec::Named(s) => Err(CoreError::Config(format!(
                "effective dimension must be a number or \"infinite\", got \"{s}\""
            ))),
        }
    }
}

fn default_delta() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    /// Curvature level: conditions are certified at threshold `−k`.
    pub k: f64,
    pub m: MSpec,
    pub alpha: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Conditions to certify before any dependent check may run.
    #[serde(default)]
    pub conditions: Vec<ConditionKind>,
}

impl FlowSpec {
    pub fn params(&self) -> Result<FlowParams> {
        Ok(FlowParams {
            k: self.k,
            m: self.m.to_effective()?,
            alpha: self.alpha,
            gamma: self.gamma,
            delta: self.delta,
        })
    }
}

// ---------------------------------------------------------------------------
// grid / solver
// ---------------------------------------------------------------------------

fn default_cert_times() -> usize {
    5
}
fn default_cert_points() -> usize {
    24
}
fn default_inset() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_x: usize,
    pub n_steps: usize,
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    #[serde(default = "default_cert_times")]
    pub cert_times: usize,
    #[serde(default = "default_cert_points")]
    pub cert_points: usize,
    #[serde(default = "default_inset")]
    pub inset: f64,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    ImplicitEuler,
    #[default]
    CrankNicolson,
    Explicit,
}

impl SchemeSpec {
    pub fn to_scheme(self) -> Scheme {
        match self {
            SchemeSpec::ImplicitEuler => Scheme::ImplicitEuler,
            SchemeSpec::CrankNicolson => Scheme::CrankNicolson,
            SchemeSpec::Explicit => Scheme::Explicit,
        }
    }
}

fn default_baseline() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `baseline + amplitude·cos(k·x)` with the chart's natural wavenumber
    /// (full period on circles, tori and lines; `cos θ` on spheres).
    CosineBump {
        amplitude: f64,
        #[serde(default = "default_baseline")]
        baseline: f64,
    },
    /// Flat-line heat kernel of age `sigma` centred at `center`.
    Fundamental {
        sigma: f64,
        #[serde(default)]
        center: f64,
    },
    Uniform {
        value: f64,
    },
}

impl InitialSpec {
    pub fn sample(&self, chart: &ChartKind, xs: &[f64]) -> Result<Vec<f64>> {
        match *self {
            InitialSpec::CosineBump {
                amplitude,
                baseline,
            } => {
                let (lo, hi, _) = chart.heat_window()?;
                let wave: Box<dyn Fn(f64) -> f64> = match chart {
                    ChartKind::SpherePolar { .. } => Box::new(|x: f64| x.cos()),
                    _ => {
                        let k = std::f64::consts::TAU / (hi - lo);
                        Box::new(move |x: f64| (k * (x - lo)).cos())
                    }
                };
                let u0: Vec<f64> = xs.iter().map(|&x| baseline + amplitude * wave(x)).collect();
                if u0.iter().any(|&v| v <= 0.0) {
                    return Err(CoreError::Parameter(
                        "cosine bump initial data must stay positive".into(),
                    ));
                }
                Ok(u0)
            }
            InitialSpec::Fundamental { sigma, center } => {
                let norm = 1.0 / (4.0 * std::f64::consts::PI * sigma).sqrt();
                if !(sigma > 0.0) {
                    return Err(CoreError::Parameter(format!(
                        "kernel age must be positive, got {sigma}"
                    )));
                }
                Ok(xs
                    .iter()
                    .map(|&x| norm * (-(x - center).powi(2) / (4.0 * sigma)).exp())
                    .collect())
            }
            InitialSpec::Uniform { value } => {
                if !(value > 0.0) {
                    return Err(CoreError::Parameter(format!(
                        "uniform initial value must be positive, got {value}"
                    )));
                }
                Ok(vec![value; xs.len()])
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    #[serde(default)]
    pub scheme: SchemeSpec,
    pub initial: InitialSpec,
    /// Enable the wall-flux monitor with this budget (recommended for
    /// truncated line windows).
    #[serde(default)]
    pub flux_tolerance: Option<f64>,
}

// ---------------------------------------------------------------------------
// checks
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LiYauModeSpec {
    Compact,
    Complete,
    Local { center: f64, radius: f64 },
}

fn default_d_variant() -> DVariant {
    DVariant::Compact
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiYauSpec {
    pub mode: LiYauModeSpec,
    #[serde(default = "default_d_variant")]
    pub d_variant: DVariant,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpnessSpec {
    /// Dimension constant the functional should saturate (`τ·q → m/2`).
    pub m: f64,
    pub window: [f64; 2],
    pub rel_tolerance: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    /// Absolute margin tolerance. Overrides `tol_coeff`.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Discretization-scaled tolerance `tol_coeff·(Δx² + Δt)`.
    #[serde(default)]
    pub tol_coeff: Option<f64>,
    /// Minimum age before samples enter the sweeps (default: 5% of the span).
    #[serde(default)]
    pub t_min: Option<f64>,
    /// Birth time of the solution (default: the grid's `t0`).
    #[serde(default)]
    pub time_origin: Option<f64>,
    #[serde(default)]
    pub hamilton: bool,
    #[serde(default)]
    pub integrated_pairs: Option<usize>,
    #[serde(default)]
    pub parabolic_pairs: Option<usize>,
    #[serde(default)]
    pub li_yau: Option<LiYauSpec>,
    #[serde(default)]
    pub sharpness: Option<SharpnessSpec>,
    #[serde(default)]
    pub mass_drift_per_step: Option<f64>,
}

impl ChecksSpec {
    /// Resolve the margin tolerance for the given grid spacings.
    pub fn resolve_tolerance(&self, dx: f64, dt: f64) -> f64 {
        if let Some(abs) = self.tolerance {
            abs
        } else if let Some(c) = self.tol_coeff {
            c * (dx * dx + dt)
        } else {
            1e-6
        }
    }

    pub fn any_requested(&self) -> bool {
        self.hamilton
            || self.integrated_pairs.is_some()
            || self.parabolic_pairs.is_some()
            || self.li_yau.is_some()
            || self.sharpness.is_some()
            || self.mass_drift_per_step.is_some()
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

fn default_paths() -> usize {
    20_000
}
fn default_mc_steps() -> usize {
    200
}
fn default_seed() -> u64 {
    0x5EED
}
fn default_bias() -> f64 {
    2.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_mc_steps")]
    pub n_steps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Axis points where the backward representation is checked.
    #[serde(default)]
    pub feynman_kac_points: Vec<f64>,
    /// Number of evenly spaced clock times for the martingale check.
    #[serde(default)]
    pub martingale_checkpoints: Option<usize>,
    /// Start point of the martingale ensemble (defaults to the first
    /// Feynman–Kac point).
    #[serde(default)]
    pub martingale_point: Option<f64>,
    #[serde(default = "default_bias")]
    pub bias_coeff: f64,
}
