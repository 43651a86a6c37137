//! Monte Carlo side of the drift heat flow.
//!
//! The axis reduction of the operator is `L = a(t,x)∂² + b(t,x)∂` with
//! `a = g⁰⁰` and `b = −Σ g^{ij}Γ⁰_ij − g⁰⁰φ′`, so the associated diffusion is
//!
//! `dX = b dt + √(2a) dW`,
//!
//! simulated with Euler–Maruyama (weak order one). For a solution of
//! `∂ₜu = L_{g(t)}u` started from `u₀`, the probabilistic representation runs
//! the process *backwards through the metric family*: with geometry frozen at
//! `t₁ − s` while the path clock `s` runs from 0 to `t₁ − t₀`,
//!
//! `u(t₁, x) = E[u₀(X_{t₁−t₀}) | X₀ = x]`,
//!
//! and `M_s = u(t₁ − s, X_s)` is a martingale. Both facts are checked
//! against solved fields with explicit statistical allowances
//! (3 standard errors plus a first-order discretization budget).
//!
//! Every path owns a counter-keyed ChaCha8 stream, so ensembles are bitwise
//! reproducible for a fixed seed regardless of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::family::ManifoldFamily;
use crate::geometry::potential::PotentialFamily;
use crate::harnack::CheckId;
use crate::heat::SpaceTimeField;
use crate::{CoreError, Result};

/// How the path clock maps onto the time parameter of the metric family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TimeOrientation {
    /// Geometry evaluated at `from + s`.
    Forward { from: f64 },
    /// Geometry evaluated at `t₁ − s`: the orientation that represents a
    /// solution at time `t₁` in terms of its initial data.
    ReversedFrom(f64),
}

impl TimeOrientation {
    fn geometry_time(&self, s: f64) -> f64 {
        match *self {
            TimeOrientation::Forward { from } => from + s,
            TimeOrientation::ReversedFrom(t1) => t1 - s,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McOptions {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            n_paths: 10_000,
            n_steps: 200,
            seed: 0x5EED,
        }
    }
}

/// splitmix64 finalizer over `(seed, path index)`: decorrelated, stable,
/// independent of how paths are scheduled across threads.
pub fn mix_seed(seed: u64, idx: u64) -> u64 {
    let mut z = seed ^ idx.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Diffusion and drift coefficients `(a, b)` of the axis reduction at
/// `(t, xₛ)`.
pub fn drift_diffusion_coeffs(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    t: f64,
    xs: f64,
) -> Result<(f64, f64)> {
    let p = family.chart.embed(xs);
    let g_inv = family.metric_inv(t, &p)?;
    let d = family.dim_n();
    let gamma = family.chart.christoffel(&p);
    let mut tr_gamma0 = 0.0;
    for i in 0..d {
        for j in 0..d {
            tr_gamma0 += g_inv[(i, j)] * gamma[(0 * d + i) * d + j];
        }
    }
    let a = g_inv[(0, 0)];
    if !(a.is_finite() && a > 0.0) {
        return Err(CoreError::Degeneracy(format!(
            "diffusion coefficient g⁰⁰ = {a} at (t, x) = ({t}, {xs})"
        )));
    }
    let b = -tr_gamma0 - a * pot.dphi_axis(t, xs);
    if !b.is_finite() {
        return Err(CoreError::Degeneracy(format!(
            "drift is non-finite at (t, x) = ({t}, {xs})"
        )));
    }
    Ok((a, b))
}

/// Positions of a path ensemble at the requested checkpoints, together with
/// boundary-event counters.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    /// Path-clock times at which positions were recorded (ascending, the
    /// last one is the horizon).
    pub checkpoint_times: Vec<f64>,
    /// `positions[c][p]`: path `p` at checkpoint `c`.
    pub positions: Vec<Vec<f64>>,
    /// Total full-period wraps on periodic charts.
    pub wraps: u64,
    /// Total wall reflections on bounded charts.
    pub reflections: u64,
}

impl PathEnsemble {
    pub fn finals(&self) -> &[f64] {
        self.positions
            .last()
            .expect("ensemble always records the horizon")
    }
}

/// Simulate `opts.n_paths` Euler–Maruyama paths from `start` over the given
/// path-clock horizon. `checkpoints` are extra recording times in
/// `(0, horizon)`; the horizon itself is always recorded last.
pub fn sample_paths(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    orientation: TimeOrientation,
    start: f64,
    horizon: f64,
    checkpoints: &[f64],
    opts: &McOptions,
) -> Result<PathEnsemble> {
    if !(horizon > 0.0) || opts.n_paths == 0 || opts.n_steps == 0 {
        return Err(CoreError::Parameter(format!(
            "need horizon > 0, paths > 0, steps > 0; got {horizon}, {}, {}",
            opts.n_paths, opts.n_steps
        )));
    }
    let (lo, hi, periodic) = family.chart.heat_window()?;
    if !(lo..=hi).contains(&start) {
        return Err(CoreError::Domain(format!(
            "start {start} lies outside the chart window [{lo}, {hi}]"
        )));
    }
    let ds = horizon / opts.n_steps as f64;
    let mut steps: Vec<usize> = Vec::new();
    for &cp in checkpoints {
        if !(cp > 0.0 && cp < horizon) {
            return Err(CoreError::Parameter(format!(
                "checkpoint {cp} must lie strictly inside (0, {horizon})"
            )));
        }
        let k = ((cp / ds).round() as usize).clamp(1, opts.n_steps - 1);
        if steps.last() != Some(&k) {
            steps.push(k);
        }
    }
    if steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::Parameter(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    steps.push(opts.n_steps);
    let span = hi - lo;

    let per_path: Vec<(Vec<f64>, u64, u64)> = (0..opts.n_paths)
        .into_par_iter()
        .map(|p| -> Result<(Vec<f64>, u64, u64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, p as u64));
            let mut x = start;
            let (mut wraps, mut reflections) = (0u64, 0u64);
            let mut recorded = Vec::with_capacity(steps.len());
            let mut next_record = 0usize;
            for k in 0..opts.n_steps {
                let t_geom = orientation.geometry_time(k as f64 * ds);
                let (a, b) = drift_diffusion_coeffs(family, pot, t_geom, x)?;
                let z: f64 = StandardNormal.sample(&mut rng);
                x += b * ds + (2.0 * a * ds).sqrt() * z;
                if periodic {
                    let turns = ((x - lo) / span).floor();
                    if turns != 0.0 {
                        wraps += turns.abs() as u64;
                        x -= turns * span;
                    }
                } else {
                    let mut guard = 0;
                    while x < lo || x > hi {
                        x = if x < lo { 2.0 * lo - x } else { 2.0 * hi - x };
                        reflections += 1;
                        guard += 1;
                        if guard > 64 {
                            return Err(CoreError::Stability(format!(
                                "path escaped the window after 64 reflections (x = {x}); \
                                 the step size {ds} is too coarse for this drift"
                            )));
                        }
                    }
                }
                if next_record < steps.len() && k + 1 == steps[next_record] {
                    recorded.push(x);
                    next_record += 1;
                }
            }
            Ok((recorded, wraps, reflections))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut positions = vec![Vec::with_capacity(opts.n_paths); steps.len()];
    let (mut wraps, mut reflections) = (0u64, 0u64);
    for (rec, w, r) in per_path {
        for (c, v) in rec.into_iter().enumerate() {
            positions[c].push(v);
        }
        wraps += w;
        reflections += r;
    }
    Ok(PathEnsemble {
        checkpoint_times: steps.iter().map(|&k| k as f64 * ds).collect(),
        positions,
        wraps,
        reflections,
    })
}

/// Linear interpolation of a solved field in both time and space.
pub fn interp_space_time(field: &SpaceTimeField, t: f64, x: f64) -> f64 {
    let times = &field.times;
    let n_t = times.len();
    if t <= times[0] {
        return field.interp_row(0, x);
    }
    if t >= times[n_t - 1] {
        return field.interp_row(n_t - 1, x);
    }
    let hi = times.partition_point(|&tk| tk < t).min(n_t - 1);
    let lo = hi - 1;
    let w = (t - times[lo]) / (times[hi] - times[lo]);
    let a = field.interp_row(lo, x);
    let b = field.interp_row(hi, x);
    a + w * (b - a)
}

/// Verdict of one probabilistic check against a solved field.
#[derive(Clone, Debug, Serialize)]
pub struct McCheckReport {
    pub check: CheckId,
    pub x_eval: f64,
    /// Path-clock time of the comparison (horizon for endpoint checks).
    pub s_clock: f64,
    pub estimate: f64,
    pub target: f64,
    pub std_error: f64,
    /// `3·std_error + bias_coeff·Δs`.
    pub allowance: f64,
    /// `allowance − |estimate − target|`; the check passes when nonnegative.
    pub margin: f64,
    pub passed: bool,
    pub n_paths: usize,
}

fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Check the backward representation `u(t₁, x) = E[u₀(X_horizon)]` against a
/// solved field. The ensemble runs with geometry reversed from the field's
/// final time; the payoff is the interpolated initial row.
pub fn feynman_kac_check(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    field: &SpaceTimeField,
    x_eval: f64,
    bias_coeff: f64,
    opts: &McOptions,
) -> Result<McCheckReport> {
    let t0 = field.times[0];
    let t1 = *field.times.last().expect("field has at least one row");
    let horizon = t1 - t0;
    if !(horizon > 0.0) {
        return Err(CoreError::Parameter(
            "field must span a positive time interval".into(),
        ));
    }
    let ens = sample_paths(
        family,
        pot,
        TimeOrientation::ReversedFrom(t1),
        x_eval,
        horizon,
        &[],
        opts,
    )?;
    let payoffs: Vec<f64> = ens
        .finals()
        .iter()
        .map(|&x| field.interp_row(0, x))
        .collect();
    let (estimate, std_error) = mean_and_std_error(&payoffs);
    let target = field.interp_row(field.n_t() - 1, x_eval);
    let allowance = 3.0 * std_error + bias_coeff * horizon / opts.n_steps as f64;
    let margin = allowance - (estimate - target).abs();
    Ok(McCheckReport {
        check: CheckId::FeynmanKac,
        x_eval,
        s_clock: horizon,
        estimate,
        target,
        std_error,
        allowance,
        margin,
        passed: margin >= 0.0,
        n_paths: opts.n_paths,
    })
}

/// Check that `M_s = u(t₁ − s, X_s)` has constant expectation along the
/// reversed ensemble: at each of `n_checkpoints` evenly spaced clock times
/// the sampled mean of `M_s` must match `u(t₁, x)` within the allowance.
pub fn martingale_check(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    field: &SpaceTimeField,
    x_eval: f64,
    n_checkpoints: usize,
    bias_coeff: f64,
    opts: &McOptions,
) -> Result<Vec<McCheckReport>> {
    if n_checkpoints < 2 {
        return Err(CoreError::Parameter(format!(
            "need at least 2 checkpoints, got {n_checkpoints}"
        )));
    }
    let t0 = field.times[0];
    let t1 = *field.times.last().expect("field has at least one row");
    let horizon = t1 - t0;
    if !(horizon > 0.0) {
        return Err(CoreError::Parameter(
            "field must span a positive time interval".into(),
        ));
    }
    let interior: Vec<f64> = (1..n_checkpoints)
        .map(|i| horizon * i as f64 / n_checkpoints as f64)
        .collect();
    let ens = sample_paths(
        family,
        pot,
        TimeOrientation::ReversedFrom(t1),
        x_eval,
        horizon,
        &interior,
        opts,
    )?;
    let target = field.interp_row(field.n_t() - 1, x_eval);
    let ds = horizon / opts.n_steps as f64;
    let mut reports = Vec::with_capacity(ens.checkpoint_times.len());
    for (c, &s_c) in ens.checkpoint_times.iter().enumerate() {
        let t_field = t1 - s_c;
        let values: Vec<f64> = ens.positions[c]
            .iter()
            .map(|&x| interp_space_time(field, t_field, x))
            .collect();
        let (estimate, std_error) = mean_and_std_error(&values);
        let allowance = 3.0 * std_error + bias_coeff * ds;
        let margin = allowance - (estimate - target).abs();
        reports.push(McCheckReport {
            check: CheckId::MartingaleBound,
            x_eval,
            s_clock: s_c,
            estimate,
            target,
            std_error,
            allowance,
            margin,
            passed: margin >= 0.0,
            n_paths: opts.n_paths,
        });
    }
    Ok(reports)
}
