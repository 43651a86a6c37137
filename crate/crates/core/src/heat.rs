//! One-dimensional heat flow `∂ₜu = Lu` for the weighted operator
//! `L = Δ_{g(t)} − ∇φ·∇` on the heat axis of an axisymmetric family.
//!
//! The operator is discretized in conservative (divergence) form
//!
//! `Lu = (1/ρ) ∂ₓ( ρ a ∂ₓu )`,   `a = gˣˣ(t,x)`,   `ρ = e^{−φ} √det g`,
//!
//! with midpoint fluxes `w_{i+1/2}(u_{i+1} − u_i)/Δx²`, `w = ρa` evaluated at
//! cell faces. This structure makes the discrete operator self-adjoint in the
//! weighted inner product `⟨u,v⟩ = Σ ρᵢ uᵢ vᵢ Δx` and conserves the discrete
//! mass `Σ ρᵢ uᵢ Δx` exactly (for periodic axes and reflecting walls alike,
//! whenever `ρ` is independent of time — which is exactly the conjugate
//! coupling `∂ₜφ = Tr_g h` between potential and metric rates).
//!
//! Implicit Euler steps invert an M-matrix, so positive data stays positive
//! for any step size; Crank–Nicolson trades that guarantee for second-order
//! accuracy in time; an explicit scheme is available behind a hard stability
//! check.

use std::io::{Read as _, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::chart::{BoundaryKind, ChartKind};
use crate::geometry::family::ManifoldFamily;
use crate::geometry::potential::PotentialFamily;
use crate::{CoreError, Result};

// ---------------------------------------------------------------------------
// grids and fields
// ---------------------------------------------------------------------------

/// Uniform one-dimensional spatial grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceGrid {
    pub xs: Vec<f64>,
    pub dx: f64,
    pub periodic: bool,
}

impl SpaceGrid {
    /// Grid over the chart's heat axis: `n_x` cells around a periodic axis,
    /// or `n_x` inclusive nodes between reflecting walls.
    pub fn from_chart(chart: &ChartKind, n_x: usize) -> Result<Self> {
        let (x0, x1, periodic) = chart.heat_window()?;
        Self::uniform(x0, x1, n_x, periodic)
    }

    pub fn uniform(x0: f64, x1: f64, n_x: usize, periodic: bool) -> Result<Self> {
        if n_x < 8 {
            return Err(CoreError::Parameter(format!(
                "need at least 8 grid nodes, got {n_x}"
            )));
        }
        if !(x1 > x0) {
            return Err(CoreError::Parameter(format!("empty window [{x0}, {x1}]")));
        }
        let (dx, xs) = if periodic {
            let dx = (x1 - x0) / n_x as f64;
            (dx, (0..n_x).map(|i| x0 + i as f64 * dx).collect())
        } else {
            let dx = (x1 - x0) / (n_x - 1) as f64;
            (dx, (0..n_x).map(|i| x0 + i as f64 * dx).collect())
        };
        Ok(SpaceGrid { xs, dx, periodic })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn boundary(&self) -> BoundaryKind {
        if self.periodic {
            BoundaryKind::Periodic
        } else {
            BoundaryKind::NeumannWalls
        }
    }
}

/// Uniform time grid `t0 = τ₀ < … < τ_{n_steps} = t1`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        if !(t1 > t0) || n_steps == 0 {
            return Err(CoreError::Parameter(format!(
                "time grid needs t1 > t0 and n_steps >= 1, got [{t0}, {t1}] with {n_steps} steps"
            )));
        }
        Ok(TimeGrid { t0, t1, n_steps })
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps)
            .map(|k| self.t0 + k as f64 * self.dt())
            .collect()
    }
}

/// A scalar field sampled on the space-time grid, stored row-major
/// (`values[k * n_x + i]` is time row `k`, node `i`).
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    pub space: SpaceGrid,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `sup |u|` over the whole field.
    pub sup_bound: f64,
    /// Whether every sample is strictly positive.
    pub positive: bool,
}

impl SpaceTimeField {
    pub fn new(space: SpaceGrid, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = space.len() * times.len();
        if values.len() != n {
            return Err(CoreError::Shape(format!(
                "field has {} values for a {} x {} grid",
                values.len(),
                times.len(),
                space.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Parameter(
                "field contains non-finite samples".into(),
            ));
        }
        let sup_bound = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let positive = values.iter().all(|&v| v > 0.0);
        Ok(SpaceTimeField {
            space,
            times,
            values,
            sup_bound,
            positive,
        })
    }

    pub fn n_t(&self) -> usize {
        self.times.len()
    }

    pub fn n_x(&self) -> usize {
        self.space.len()
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.n_x() + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.n_x();
        &self.values[k * n..(k + 1) * n]
    }

    /// Running sup of `u` over all rows up to and including row `k` (the
    /// envelope the gradient bounds are stated against).
    pub fn running_sup(&self, k: usize) -> f64 {
        self.values[..(k + 1) * self.n_x()]
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Linear interpolation of time row `k` at an arbitrary axis point
    /// (wrapping on periodic axes, clamping at walls).
    pub fn interp_row(&self, k: usize, x: f64) -> f64 {
        let g = &self.space;
        let n = g.len();
        let x0 = g.xs[0];
        if g.periodic {
            let period = g.dx * n as f64;
            let mut s = (x - x0).rem_euclid(period);
            if !s.is_finite() {
                s = 0.0;
            }
            let cell = (s / g.dx).floor() as usize % n;
            let frac = s / g.dx - (s / g.dx).floor();
            let a = self.value(k, cell);
            let b = self.value(k, (cell + 1) % n);
            a + frac * (b - a)
        } else {
            let xe = g.xs[n - 1];
            let xc = x.clamp(x0, xe);
            let s = (xc - x0) / g.dx;
            let cell = (s.floor() as usize).min(n - 2);
            let frac = s - cell as f64;
            let a = self.value(k, cell);
            let b = self.value(k, cell + 1);
            a + frac * (b - a)
        }
    }
}

// ---------------------------------------------------------------------------
// tridiagonal solvers
// ---------------------------------------------------------------------------

/// Tridiagonal (optionally cyclic) linear system, solved by the Thomas
/// elimination, with the cyclic corner handled by a rank-one update
/// (Sherman–Morrison).
#[derive(Clone, Debug)]
pub(crate) struct Tridiag {
    /// Sub-diagonal `A[i][i−1]`, `sub[0]` unused unless cyclic.
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    /// Super-diagonal `A[i][i+1]`, `sup[n−1]` unused unless cyclic.
    pub sup: Vec<f64>,
    /// Corner entries `(A[0][n−1], A[n−1][0])` for cyclic systems.
    pub corner: Option<(f64, f64)>,
}

impl Tridiag {
    fn solve_plain(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let n = diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = diag[0];
        if denom.abs() < 1e-300 {
            return Err(CoreError::Degeneracy("tridiagonal pivot underflow".into()));
        }
        c[0] = sup[0] / denom;
        d[0] = rhs[0] / denom;
        for i in 1..n {
            denom = diag[i] - sub[i] * c[i - 1];
            if denom.abs() < 1e-300 {
                return Err(CoreError::Degeneracy("tridiagonal pivot underflow".into()));
            }
            if i + 1 < n {
                c[i] = sup[i] / denom;
            }
            d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= c[i] * next;
        }
        Ok(x)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        if self.sub.len() != n || self.sup.len() != n || rhs.len() != n {
            return Err(CoreError::Shape(
                "tridiagonal bands and rhs must share length".into(),
            ));
        }
        match self.corner {
            None => Self::solve_plain(&self.sub, &self.diag, &self.sup, rhs),
            Some((beta, alpha)) => {
                if n < 3 {
                    return Err(CoreError::Shape(
                        "cyclic solve needs at least 3 unknowns".into(),
                    ));
                }
                // rank-one split A = A' + u vᵀ with
                // u = (γ, 0, …, 0, α)ᵀ, v = (1, 0, …, 0, β/γ)ᵀ
                let gamma = -self.diag[0];
                let mut diag = self.diag.clone();
                diag[0] -= gamma;
                diag[n - 1] -= alpha * beta / gamma;
                let x = Self::solve_plain(&self.sub, &diag, &self.sup, rhs)?;
                let mut u = vec![0.0; n];
                u[0] = gamma;
                u[n - 1] = alpha;
                let z = Self::solve_plain(&self.sub, &diag, &self.sup, &u)?;
                let vx = x[0] + beta / gamma * x[n - 1];
                let vz = z[0] + beta / gamma * z[n - 1];
                let denom = 1.0 + vz;
                if denom.abs() < 1e-300 {
                    return Err(CoreError::Degeneracy("cyclic correction underflow".into()));
                }
                let fact = vx / denom;
                Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// the discrete operator
// ---------------------------------------------------------------------------

/// Coefficient arrays of the discrete operator at a fixed time:
/// `(Lu)ᵢ = subᵢ u_{i−1} − (subᵢ + supᵢ) uᵢ + supᵢ u_{i+1}` with periodic
/// index wrap, plus the node weights `ρᵢ`.
#[derive(Clone, Debug)]
pub struct OperatorCoeffs {
    pub sub: Vec<f64>,
    pub sup: Vec<f64>,
    pub rho: Vec<f64>,
    pub periodic: bool,
}

fn node_weight(family: &ManifoldFamily, pot: &PotentialFamily, t: f64, xs: f64) -> Result<f64> {
    let sqrt_det = family.sqrt_det_g(t, xs);
    let w = (-pot.phi_axis(t, xs)).exp() * sqrt_det;
    if !(w.is_finite() && w > 0.0) {
        return Err(CoreError::Degeneracy(format!(
            "node weight e^{{-φ}}√det g = {w:e} at t = {t}, x = {xs}"
        )));
    }
    Ok(w)
}

fn face_conductivity(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    t: f64,
    xs: f64,
) -> Result<f64> {
    let g_axis = family.gxx(t, xs);
    if !(g_axis.is_finite() && g_axis > 0.0) {
        return Err(CoreError::Degeneracy(format!(
            "axis metric component {g_axis:e} at t = {t}, x = {xs}"
        )));
    }
    // contravariant coefficient gˣˣ = 1/g_xx for the diagonal axis metric
    Ok(node_weight(family, pot, t, xs)? / g_axis)
}

/// Assemble the conservative-form operator at time `t`.
pub fn operator_coeffs(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    space: &SpaceGrid,
    t: f64,
) -> Result<OperatorCoeffs> {
    let n = space.len();
    let dx = space.dx;
    let mut rho = Vec::with_capacity(n);
    for &x in &space.xs {
        rho.push(node_weight(family, pot, t, x)?);
    }
    let mut sub = vec![0.0; n];
    let mut sup = vec![0.0; n];
    if space.periodic {
        // face i+1/2 sits between node i and node (i+1) mod n
        let mut faces = Vec::with_capacity(n);
        for i in 0..n {
            faces.push(face_conductivity(family, pot, t, space.xs[i] + 0.5 * dx)?);
        }
        for i in 0..n {
            let w_plus = faces[i];
            let w_minus = faces[(i + n - 1) % n];
            sup[i] = w_plus / (rho[i] * dx * dx);
            sub[i] = w_minus / (rho[i] * dx * dx);
        }
    } else {
        // interior faces only; wall faces carry zero flux (reflection)
        let mut faces = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            faces.push(face_conductivity(family, pot, t, space.xs[i] + 0.5 * dx)?);
        }
        for i in 0..n {
            let w_plus = if i + 1 < n { faces[i] } else { 0.0 };
            let w_minus = if i > 0 { faces[i - 1] } else { 0.0 };
            sup[i] = w_plus / (rho[i] * dx * dx);
            sub[i] = w_minus / (rho[i] * dx * dx);
        }
    }
    Ok(OperatorCoeffs {
        sub,
        sup,
        rho,
        periodic: space.periodic,
    })
}

impl OperatorCoeffs {
    /// Apply the operator to a nodal vector.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let up = if i + 1 < n {
                u[i + 1]
            } else if self.periodic {
                u[0]
            } else {
                u[i] // zero-flux face: coefficient is 0 anyway
            };
            let um = if i > 0 {
                u[i - 1]
            } else if self.periodic {
                u[n - 1]
            } else {
                u[i]
            };
            out[i] = self.sub[i] * um - (self.sub[i] + self.sup[i]) * u[i] + self.sup[i] * up;
        }
        out
    }

    /// Matrix `I − c·L` as a (cyclic) tridiagonal system.
    fn identity_minus(&self, c: f64) -> Tridiag {
        let n = self.sub.len();
        let mut sub = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            sub[i] = -c * self.sub[i];
            sup[i] = -c * self.sup[i];
            diag[i] = 1.0 + c * (self.sub[i] + self.sup[i]);
        }
        let corner = if self.periodic {
            Some((-c * self.sub[0], -c * self.sup[self.sub.len() - 1]))
        } else {
            None
        };
        Tridiag {
            sub,
            diag,
            sup,
            corner,
        }
    }

    /// Weighted mass `Σ ρᵢ uᵢ Δx`.
    pub fn mass(&self, u: &[f64], dx: f64) -> f64 {
        self.rho.iter().zip(u).map(|(r, v)| r * v).sum::<f64>() * dx
    }
}

/// Discrete evaluation of `Lu` at time `t` (exposed for operator-level
/// verification).
pub fn witten_apply(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    space: &SpaceGrid,
    t: f64,
    u: &[f64],
) -> Result<Vec<f64>> {
    if u.len() != space.len() {
        return Err(CoreError::Shape(format!(
            "state has {} nodes, grid has {}",
            u.len(),
            space.len()
        )));
    }
    Ok(operator_coeffs(family, pot, space, t)?.apply(u))
}

// ---------------------------------------------------------------------------
// time stepping
// ---------------------------------------------------------------------------

/// Time integration scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Backward Euler: unconditionally positivity-preserving (M-matrix).
    ImplicitEuler,
    /// Second order in time; no positivity guarantee for coarse steps.
    CrankNicolson,
    /// Forward Euler behind a hard stability check.
    Explicit,
}

/// Options for [`solve_heat`] and [`evolve`].
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub scheme: Scheme,
    /// Reflecting-wall runs abort when the flux through the face nearest a
    /// wall exceeds this (the window is then too small for the data). The
    /// default is infinite (monitor off): on polar windows of a sphere the
    /// axis weight vanishes at the poles and wall flux is physical, so the
    /// monitor is only meaningful for truncated line windows — enable it
    /// there explicitly.
    pub flux_tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            scheme: Scheme::ImplicitEuler,
            flux_tolerance: f64::INFINITY,
        }
    }
}

fn run_steps(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    space: &SpaceGrid,
    time: &TimeGrid,
    u0: &[f64],
    opts: &SolveOptions,
    require_positive: bool,
) -> Result<SpaceTimeField> {
    let n = space.len();
    if u0.len() != n {
        return Err(CoreError::Shape(format!(
            "initial data has {} nodes, grid has {}",
            u0.len(),
            n
        )));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Parameter(
            "initial data contains non-finite values".into(),
        ));
    }
    if require_positive {
        if let Some((i, &v)) = u0.iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(CoreError::PositivityLoss {
                step: 0,
                node: i,
                value: v,
            });
        }
    }
    let times = time.times();
    let dt = time.dt();
    let mut values = Vec::with_capacity((time.n_steps + 1) * n);
    values.extend_from_slice(u0);
    let mut u = u0.to_vec();
    let mut coeffs_now = operator_coeffs(family, pot, space, times[0])?;
    for k in 0..time.n_steps {
        let t_next = times[k + 1];
        let coeffs_next = operator_coeffs(family, pot, space, t_next)?;
        let u_next = match opts.scheme {
            Scheme::ImplicitEuler => coeffs_next.identity_minus(dt).solve(&u)?,
            Scheme::CrankNicolson => {
                let mut rhs = coeffs_now.apply(&u);
                for (r, v) in rhs.iter_mut().zip(&u) {
                    *r = v + 0.5 * dt * *r;
                }
                coeffs_next.identity_minus(0.5 * dt).solve(&rhs)?
            }
            Scheme::Explicit => {
                let lam = coeffs_now
                    .sub
                    .iter()
                    .zip(&coeffs_now.sup)
                    .map(|(a, b)| dt * (a + b))
                    .fold(0.0f64, f64::max);
                if lam > 1.0 {
                    return Err(CoreError::Stability(format!(
                        "explicit step violates the positivity bound: \
                         dt·max(sub+sup) = {lam:.3} > 1; shrink dt by ≥ {:.1}x",
                        lam
                    )));
                }
                let lu = coeffs_now.apply(&u);
                u.iter().zip(&lu).map(|(v, l)| v + dt * l).collect()
            }
        };
        if let Some((i, &v)) = u_next.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(CoreError::Stability(format!(
                "non-finite state at step {} node {i}: {v}",
                k + 1
            )));
        }
        if require_positive {
            if let Some((i, &v)) = u_next.iter().enumerate().find(|(_, &v)| v <= 0.0) {
                return Err(CoreError::PositivityLoss {
                    step: k + 1,
                    node: i,
                    value: v,
                });
            }
        }
        if !space.periodic && n >= 2 {
            let wl = face_conductivity(family, pot, t_next, space.xs[0] + 0.5 * space.dx)?;
            let wr = face_conductivity(family, pot, t_next, space.xs[n - 1] - 0.5 * space.dx)?;
            let flux_l = wl * (u_next[1] - u_next[0]) / space.dx;
            let flux_r = wr * (u_next[n - 1] - u_next[n - 2]) / space.dx;
            let flux = flux_l.abs().max(flux_r.abs());
            if flux > opts.flux_tolerance {
                return Err(CoreError::BoundaryFlux {
                    flux,
                    tol: opts.flux_tolerance,
                    t: t_next,
                });
            }
        }
        values.extend_from_slice(&u_next);
        u = u_next;
        coeffs_now = coeffs_next;
    }
    SpaceTimeField::new(space.clone(), times, values)
}

/// Evolve strictly positive initial data; aborts with
/// [`CoreError::PositivityLoss`] if any sample crosses zero.
pub fn solve_heat(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    space: &SpaceGrid,
    time: &TimeGrid,
    u0: &[f64],
    opts: &SolveOptions,
) -> Result<SpaceTimeField> {
    run_steps(family, pot, space, time, u0, opts, true)
}

/// Evolve sign-free initial data (for operator-level verification against
/// closed-form solutions that change sign).
pub fn evolve(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    space: &SpaceGrid,
    time: &TimeGrid,
    u0: &[f64],
    opts: &SolveOptions,
) -> Result<SpaceTimeField> {
    run_steps(family, pot, space, time, u0, opts, false)
}

/// Gaussian initial slice `(4πσ)^{−1/2} e^{−(x−c)²/(4σ)}` (the flat-line heat
/// kernel at time `σ`), refusing widths the grid cannot resolve.
pub fn fundamental_slice(space: &SpaceGrid, sigma: f64, center: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(CoreError::Parameter(format!(
            "kernel time must be positive, got {sigma}"
        )));
    }
    let width = (2.0 * sigma).sqrt();
    if width < 2.0 * space.dx {
        return Err(CoreError::Parameter(format!(
            "kernel width {width:.3e} under-resolved by dx = {:.3e} (need width ≥ 2dx)",
            space.dx
        )));
    }
    let norm = 1.0 / (4.0 * std::f64::consts::PI * sigma).sqrt();
    Ok(space
        .xs
        .iter()
        .map(|&x| norm * (-(x - center).powi(2) / (4.0 * sigma)).exp())
        .collect())
}

/// Largest per-step drift of the weighted mass `Σ ρᵢ(tₖ) uᵢ Δx`.
pub fn max_mass_drift(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    field: &SpaceTimeField,
) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut prev = None;
    for (k, &t) in field.times.iter().enumerate() {
        let coeffs = operator_coeffs(family, pot, &field.space, t)?;
        let m = coeffs.mass(field.row(k), field.space.dx);
        if let Some(p) = prev {
            worst = worst.max((m - p as f64).abs());
        }
        prev = Some(m);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// derived fields
// ---------------------------------------------------------------------------

/// Finite-difference derivatives of a positive solution, in the form the
/// gradient and differential bounds consume.
#[derive(Clone, Debug)]
pub struct DerivedFields {
    /// `|∇u|²_g = gˣˣ (∂ₓu)²`, row-major like the field.
    pub grad_u_sq: Vec<f64>,
    pub du_dt: Vec<f64>,
    pub log_u: Vec<f64>,
    /// `|∇log u|²_g`.
    pub grad_log_sq: Vec<f64>,
    pub dlog_dt: Vec<f64>,
    /// `t · (|∇log u|² − α ∂ₜ log u)`.
    pub li_yau_f: Vec<f64>,
    pub alpha: f64,
}

fn space_derivative(row: &[f64], dx: f64, periodic: bool) -> Vec<f64> {
    let n = row.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = if periodic {
            (row[(i + 1) % n] - row[(i + n - 1) % n]) / (2.0 * dx)
        } else if i == 0 {
            (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * dx)
        } else if i == n - 1 {
            (3.0 * row[n - 1] - 4.0 * row[n - 2] + row[n - 3]) / (2.0 * dx)
        } else {
            (row[i + 1] - row[i - 1]) / (2.0 * dx)
        };
    }
    out
}

fn time_derivative(values: &[f64], n_t: usize, n_x: usize, dt: f64) -> Vec<f64> {
    let v = |k: usize, i: usize| values[k * n_x + i];
    let mut out = vec![0.0; values.len()];
    for i in 0..n_x {
        for k in 0..n_t {
            out[k * n_x + i] = if k == 0 {
                (-3.0 * v(0, i) + 4.0 * v(1, i) - v(2, i)) / (2.0 * dt)
            } else if k == n_t - 1 {
                (3.0 * v(n_t - 1, i) - 4.0 * v(n_t - 2, i) + v(n_t - 3, i)) / (2.0 * dt)
            } else {
                (v(k + 1, i) - v(k - 1, i)) / (2.0 * dt)
            };
        }
    }
    out
}

/// Differentiate a positive field (second-order stencils everywhere; walls
/// and time ends use one-sided three-point formulas).
pub fn derive_fields(
    family: &ManifoldFamily,
    field: &SpaceTimeField,
    alpha: f64,
) -> Result<DerivedFields> {
    if !field.positive {
        return Err(CoreError::Parameter(
            "derived fields need a strictly positive solution (log u)".into(),
        ));
    }
    let (n_t, n_x) = (field.n_t(), field.n_x());
    if n_t < 3 {
        return Err(CoreError::Parameter(
            "time derivatives need at least 3 time rows".into(),
        ));
    }
    let dt = field.times[1] - field.times[0];
    let log_u: Vec<f64> = field.values.iter().map(|v| v.ln()).collect();
    let du_dt = time_derivative(&field.values, n_t, n_x, dt);
    let dlog_dt = time_derivative(&log_u, n_t, n_x, dt);
    let mut grad_u_sq = vec![0.0; field.values.len()];
    let mut grad_log_sq = vec![0.0; field.values.len()];
    for k in 0..n_t {
        let t = field.times[k];
        let du = space_derivative(field.row(k), field.space.dx, field.space.periodic);
        let dlog = space_derivative(
            &log_u[k * n_x..(k + 1) * n_x],
            field.space.dx,
            field.space.periodic,
        );
        for i in 0..n_x {
            let g_axis = family.gxx(t, field.space.xs[i]);
            if !(g_axis.is_finite() && g_axis > 0.0) {
                return Err(CoreError::Degeneracy(format!(
                    "axis metric component {g_axis:e} at t = {t}, x = {}",
                    field.space.xs[i]
                )));
            }
            grad_u_sq[k * n_x + i] = du[i] * du[i] / g_axis;
            grad_log_sq[k * n_x + i] = dlog[i] * dlog[i] / g_axis;
        }
    }
    let li_yau_f = (0..n_t)
        .flat_map(|k| {
            let t = field.times[k];
            (0..n_x).map(move |i| (k, i, t))
        })
        .map(|(k, i, t)| t * (grad_log_sq[k * n_x + i] - alpha * dlog_dt[k * n_x + i]))
        .collect();
    Ok(DerivedFields {
        grad_u_sq,
        du_dt,
        log_u,
        grad_log_sq,
        dlog_dt,
        li_yau_f,
        alpha,
    })
}

// ---------------------------------------------------------------------------
// field I/O
// ---------------------------------------------------------------------------

const FIELD_MAGIC: &[u8; 8] = b"WLHFIELD";
const FIELD_VERSION: u32 = 1;

/// Write the field as CSV (`node,t,x,u`), thinning rows/columns by the given
/// strides (`1` keeps everything).
pub fn write_csv(
    field: &SpaceTimeField,
    path: &Path,
    stride_t: usize,
    stride_x: usize,
) -> Result<()> {
    let (st, sx) = (stride_t.max(1), stride_x.max(1));
    let mut out = String::from("node,t,x,u\n");
    for k in (0..field.n_t()).step_by(st) {
        for i in (0..field.n_x()).step_by(sx) {
            out.push_str(&format!(
                "{i},{:.12e},{:.12e},{:.12e}\n",
                field.times[k],
                field.space.xs[i],
                field.value(k, i)
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Binary dump: magic, version, grid sizes, axis flag, node coordinates,
/// times, then the row-major samples, all little-endian.
pub fn write_binary(field: &SpaceTimeField, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&FIELD_VERSION.to_le_bytes())?;
    w.write_all(&(field.n_t() as u64).to_le_bytes())?;
    w.write_all(&(field.n_x() as u64).to_le_bytes())?;
    w.write_all(&[u8::from(field.space.periodic)])?;
    w.write_all(&field.space.dx.to_le_bytes())?;
    for &x in &field.space.xs {
        w.write_all(&x.to_le_bytes())?;
    }
    for &t in &field.times {
        w.write_all(&t.to_le_bytes())?;
    }
    for &v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<SpaceTimeField> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(CoreError::Config(format!(
            "not a field dump (magic {magic:02x?})"
        )));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != FIELD_VERSION {
        return Err(CoreError::Config(format!(
            "unsupported field dump version {version}"
        )));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n_t = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let n_x = u64::from_le_bytes(b8) as usize;
    if n_t == 0 || n_x == 0 || n_t.saturating_mul(n_x) > (1 << 34) {
        return Err(CoreError::Config(format!(
            "implausible field dump shape {n_t} x {n_x}"
        )));
    }
    let mut b1 = [0u8; 1];
    r.read_exact(&mut b1)?;
    let periodic = b1[0] != 0;
    let read_f64 = |r: &mut std::io::BufReader<std::fs::File>| -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let dx = read_f64(&mut r)?;
    let mut xs = Vec::with_capacity(n_x);
    for _ in 0..n_x {
        xs.push(read_f64(&mut r)?);
    }
    let mut times = Vec::with_capacity(n_t);
    for _ in 0..n_t {
        times.push(read_f64(&mut r)?);
    }
    let mut values = Vec::with_capacity(n_t * n_x);
    for _ in 0..n_t * n_x {
        values.push(read_f64(&mut r)?);
    }
    SpaceTimeField::new(SpaceGrid { xs, dx, periodic }, times, values)
}
