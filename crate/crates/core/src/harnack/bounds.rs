//! Quantitative gradient and Harnack bounds checked against solved fields.
//!
//! All checks gate on a grid certificate for the matching curvature
//! condition before touching the solution: a bound is only *claimed* where
//! its hypothesis was verified.
//!
//! Conventions shared by the checks:
//! * ages `τ = t − time_origin` (the bounds blow up as `τ → 0`, so samples
//!   below `t_min` are skipped);
//! * `A = sup u` over the whole space-time field;
//! * margins are `RHS − LHS` of the inequality as stated, so a sound bound
//!   yields nonnegative margins up to discretization error.

use crate::flowcheck::{
    constant_d, constant_e, ConditionKind, DVariant, FlowCertificate, FlowParams,
};
use crate::geometry::cutoff::CutoffProfile;
use crate::geometry::distance::distance;
use crate::geometry::family::ManifoldFamily;
use crate::heat::{DerivedFields, SpaceTimeField};
use crate::{CoreError, Result};

use super::{psi_factor, CheckId, HarnackReport, MarginCollector};

/// Shared sweep options for the bound checks.
#[derive(Clone, Copy, Debug)]
pub struct BoundCheckOptions {
    /// Pass iff `worst margin ≥ −tolerance`.
    pub tolerance: f64,
    /// Skip samples younger than this.
    pub t_min: f64,
    /// Ages are measured from here (the birth time of the solution).
    pub time_origin: f64,
    pub stride_t: usize,
    pub stride_x: usize,
    /// Thinning of the exported margin rows.
    pub row_stride: usize,
}

impl Default for BoundCheckOptions {
    fn default() -> Self {
        BoundCheckOptions {
            tolerance: 1e-6,
            t_min: 1e-3,
            time_origin: 0.0,
            stride_t: 1,
            stride_x: 1,
            row_stride: 101,
        }
    }
}

/// Refuse to check a bound whose curvature hypothesis was not certified at
/// least as strongly as requested.
fn require_condition(cert: &FlowCertificate, kind: ConditionKind, k: f64) -> Result<()> {
    if cert.condition != kind {
        return Err(CoreError::Certificate(format!(
            "bound needs a {kind} certificate, got {}",
            cert.condition
        )));
    }
    if !cert.passed {
        return Err(CoreError::Certificate(format!(
            "{} condition failed on the grid (min margin {:.3e} at t = {:.3}, x = {:?})",
            cert.condition, cert.min_margin, cert.margin_t, cert.margin_x
        )));
    }
    if cert.threshold < -k - 1e-12 {
        return Err(CoreError::Certificate(format!(
            "certificate threshold {:.3e} is weaker than the requested −K = {:.3e}",
            cert.threshold, -k
        )));
    }
    Ok(())
}

fn require_positive(field: &SpaceTimeField) -> Result<()> {
    if !field.positive {
        return Err(CoreError::Parameter(
            "gradient bounds apply to strictly positive solutions".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gradient (Hamilton-type) bounds
// ---------------------------------------------------------------------------

/// Check the sharp gradient bound `|∇log u|² ≤ (1/ψ(τ))·log(A/u)` and its
/// additive relaxation `|∇log u|² ≤ (2K + 1/τ)·log(A/u)` under a certified
/// `h + Ric(L) ≥ −K g`. Returns `(sharp, additive)` reports.
pub fn hamilton_margins(
    field: &SpaceTimeField,
    derived: &DerivedFields,
    cert: &FlowCertificate,
    k: f64,
    opts: &BoundCheckOptions,
) -> Result<(HarnackReport, HarnackReport)> {
    if k < 0.0 {
        return Err(CoreError::Parameter(format!(
            "gradient bounds need K ≥ 0, got {k}"
        )));
    }
    require_condition(cert, ConditionKind::SuperPerelman, k)?;
    require_positive(field)?;
    let a = field.sup_bound;
    let n_x = field.n_x();
    let mut sharp = MarginCollector::new(CheckId::HamiltonSharp, opts.tolerance, opts.row_stride);
    let mut additive =
        MarginCollector::new(CheckId::HamiltonAdditive, opts.tolerance, opts.row_stride);
    for kt in (0..field.n_t()).step_by(opts.stride_t.max(1)) {
        let tau = field.times[kt] - opts.time_origin;
        if tau < opts.t_min {
            continue;
        }
        let psi = psi_factor(k, tau)?;
        for i in (0..n_x).step_by(opts.stride_x.max(1)) {
            let u = field.value(kt, i);
            let ratio = (a / u).ln().max(0.0);
            let g2 = derived.grad_log_sq[kt * n_x + i];
            let x = field.space.xs[i];
            sharp.push(field.times[kt], x, ratio / psi - g2);
            additive.push(field.times[kt], x, (2.0 * k + 1.0 / tau) * ratio - g2);
        }
    }
    let notes = format!(
        "A = sup u = {a:.6e}, K = {k}, condition margin {:.3e}",
        cert.min_margin
    );
    Ok((sharp.finish(notes.clone())?, additive.finish(notes)?))
}

/// Integrated form of the gradient bound at a fixed time: for any two points,
///
/// `log u(x) ≤ δ/(1+δ)·log A + 1/(1+δ)·log u(y) + (1+δ⁻¹)/(4(1+δ)) · d_t(x,y)²/ψ(τ)`.
pub fn integrated_harnack_margin(
    family: &ManifoldFamily,
    field: &SpaceTimeField,
    cert: &FlowCertificate,
    k: f64,
    delta: f64,
    n_pairs: usize,
    opts: &BoundCheckOptions,
) -> Result<HarnackReport> {
    if k < 0.0 || !(delta > 0.0) {
        return Err(CoreError::Parameter(format!(
            "integrated bound needs K ≥ 0 and δ > 0, got K = {k}, δ = {delta}"
        )));
    }
    require_condition(cert, ConditionKind::SuperPerelman, k)?;
    require_positive(field)?;
    let a = field.sup_bound;
    let log_a = a.ln();
    let n_x = field.n_x();
    let mut coll =
        MarginCollector::new(CheckId::IntegratedHarnack, opts.tolerance, opts.row_stride);
    let eligible: Vec<usize> = (0..field.n_t())
        .filter(|&kt| field.times[kt] - opts.time_origin >= opts.t_min)
        .collect();
    if eligible.is_empty() {
        return Err(CoreError::Parameter("no time rows older than t_min".into()));
    }
    let coef_d = (1.0 + 1.0 / delta) / (4.0 * (1.0 + delta));
    for p in 0..n_pairs.max(1) {
        // deterministic low-discrepancy pair choice
        let kt = eligible[(p * 7 + 2) % eligible.len()];
        let i = (p * 13 + 5) % n_x;
        let j = (i + n_x / 2 + p * 29) % n_x;
        let t = field.times[kt];
        let tau = t - opts.time_origin;
        let psi = psi_factor(k, tau)?;
        let pi = family.chart.embed(field.space.xs[i]);
        let pj = family.chart.embed(field.space.xs[j]);
        let d = distance(family, t, &pi, &pj)?;
        let lhs = field.value(kt, i).ln();
        let rhs = delta / (1.0 + delta) * log_a
            + field.value(kt, j).ln() / (1.0 + delta)
            + coef_d * d * d / psi;
        coll.push(t, field.space.xs[i], rhs - lhs);
    }
    let notes = format!("A = {a:.6e}, K = {k}, δ = {delta}, pairs = {n_pairs}");
    coll.finish(notes)
}

// ---------------------------------------------------------------------------
// Li–Yau-type bounds
// ---------------------------------------------------------------------------

/// Common envelope `(mα²/4τ)·(1 + fo·τ + √((1 + fo·τ)² + τ²·D/m))` bounding
/// the functional `|∇log u|² − α ∂ₜlog u`. The first-order coefficient `fo`
/// is 0 on closed manifolds, `C₄(K₂+√K₁)` in the complete case, and the
/// radius-corrected `E(R)` for local balls.
pub fn li_yau_bound_value(m: f64, alpha: f64, tau: f64, first_order: f64, d: f64) -> f64 {
    let base = 1.0 + first_order * tau;
    m * alpha * alpha / (4.0 * tau) * (base + (base * base + tau * tau * d / m).sqrt())
}

/// Static-metric reduction `(mα²/2τ)·(1 + C₄√K·τ + Kτ/(α−1))`.
pub fn li_yau_static_bound_value(m: f64, alpha: f64, k: f64, c4: f64, tau: f64) -> f64 {
    m * alpha * alpha / (2.0 * tau) * (1.0 + c4 * k.sqrt() * tau + k * tau / (alpha - 1.0))
}

/// The Young-split weight for which the complete-case envelope with
/// `D = m(2K+γ)²/(α−1)²` collapses onto the static reduction:
/// `γ*(τ) = √(4K(α−1)(1 + C₄√K τ)/τ + 4K²) − 2K`.
pub fn matching_gamma(k: f64, alpha: f64, c4: f64, tau: f64) -> Result<f64> {
    if !(k > 0.0 && alpha > 1.0 && tau > 0.0) {
        return Err(CoreError::Parameter(format!(
            "matching γ needs K > 0, α > 1, τ > 0; got K = {k}, α = {alpha}, τ = {tau}"
        )));
    }
    let c = c4 * k.sqrt() * tau;
    Ok((4.0 * k * (alpha - 1.0) * (1.0 + c) / tau + 4.0 * k * k).sqrt() - 2.0 * k)
}

/// Geometry flavour of a Li–Yau sweep.
#[derive(Clone, Copy, Debug)]
pub enum LiYauMode {
    /// Closed manifold: zeroth-order envelope.
    Compact,
    /// Complete manifold: first-order term `C₄(K₂+√K₁)`.
    Complete,
    /// Ball of the given axis center and radius; samples outside the ball at
    /// the sample's own time are skipped.
    Local { center: f64, radius: f64 },
}

/// Sweep `bound(τ) − (|∇log u|² − α ∂ₜlog u)` under a certified variant-α
/// condition. `cutoff` supplies `C₁, C₂` for the complete and local modes.
#[allow(clippy::too_many_arguments)]
pub fn li_yau_margin(
    family: &ManifoldFamily,
    field: &SpaceTimeField,
    derived: &DerivedFields,
    cert: &FlowCertificate,
    params: &FlowParams,
    cutoff: Option<&CutoffProfile>,
    mode: LiYauMode,
    d_variant: DVariant,
    opts: &BoundCheckOptions,
) -> Result<HarnackReport> {
    require_condition(cert, ConditionKind::VariantAlpha, params.k)?;
    require_positive(field)?;
    let m = params.m.finite("Li–Yau bound")?;
    let alpha = params.alpha;
    if !(alpha > 1.0) {
        return Err(CoreError::Parameter(format!(
            "Li–Yau bound needs α > 1, got {alpha}"
        )));
    }
    if (derived.alpha - alpha).abs() > 1e-12 {
        return Err(CoreError::Parameter(format!(
            "derived fields were built for α = {}, bound asked for α = {alpha}",
            derived.alpha
        )));
    }
    let d_val = constant_d(d_variant, cert, params)?;
    let d_other = constant_d(
        match d_variant {
            DVariant::Compact => DVariant::Complete,
            DVariant::Complete => DVariant::Compact,
        },
        cert,
        params,
    )?;
    let (check, first_order) = match mode {
        LiYauMode::Compact => (CheckId::LiYauCompact, 0.0),
        LiYauMode::Complete => {
            let c = cutoff.ok_or_else(|| {
                CoreError::Parameter("complete-mode bound needs a certified cutoff".into())
            })?;
            (CheckId::LiYauComplete, c.c1 * (cert.k2 + cert.k1.sqrt()))
        }
        LiYauMode::Local { radius, .. } => {
            let c = cutoff.ok_or_else(|| {
                CoreError::Parameter("local bound needs a certified cutoff".into())
            })?;
            let (e, _) = constant_e(c, cert, params, radius)?;
            (CheckId::LiYauLocal, e)
        }
    };
    let n_x = field.n_x();
    let mut coll = MarginCollector::new(check, opts.tolerance, opts.row_stride);
    for kt in (0..field.n_t()).step_by(opts.stride_t.max(1)) {
        let t = field.times[kt];
        let tau = t - opts.time_origin;
        if tau < opts.t_min {
            continue;
        }
        let bound = li_yau_bound_value(m, alpha, tau, first_order, d_val);
        for i in (0..n_x).step_by(opts.stride_x.max(1)) {
            if let LiYauMode::Local { center, radius } = mode {
                let pc = family.chart.embed(center);
                let px = family.chart.embed(field.space.xs[i]);
                if distance(family, t, &pc, &px)? > radius {
                    continue;
                }
            }
            let q = derived.grad_log_sq[kt * n_x + i] - alpha * derived.dlog_dt[kt * n_x + i];
            coll.push(t, field.space.xs[i], bound - q);
        }
    }
    let notes = format!(
        "m = {m}, α = {alpha}, γ = {:.4}, K = {}, D({d_variant:?}) = {d_val:.4e} \
         (other variant {d_other:.4e}), first-order = {first_order:.4e}, \
         A² = {:.3e}, B = {:.3e}, K₁ = {:.3e}, K₂ = {:.3e}",
        params.gamma(),
        params.k,
        cert.a_sq,
        cert.b_const,
        cert.k1,
        cert.k2
    );
    coll.finish(notes)
}

/// Sharpness sweep for the flat-line fundamental solution at `α = 1`:
/// `τ(|∇log u|² − ∂ₜlog u)` should equal `m/2` (margin `= −|relative defect|`).
pub fn sharpness_defect(
    field: &SpaceTimeField,
    derived: &DerivedFields,
    m: f64,
    window: (f64, f64),
    opts: &BoundCheckOptions,
) -> Result<HarnackReport> {
    if (derived.alpha - 1.0).abs() > 1e-12 {
        return Err(CoreError::Parameter(format!(
            "sharpness is stated at α = 1, derived fields use α = {}",
            derived.alpha
        )));
    }
    let n_x = field.n_x();
    let target = m / 2.0;
    let mut coll = MarginCollector::new(CheckId::LiYauSharpness, opts.tolerance, opts.row_stride);
    // interior time rows only: the one-sided end stencils are first-order
    // on the nonlinear functional and would mask the sharpness signal
    for kt in 1..field.n_t().saturating_sub(1) {
        let tau = field.times[kt] - opts.time_origin;
        if tau < opts.t_min {
            continue;
        }
        for i in 0..n_x {
            let x = field.space.xs[i];
            if x < window.0 || x > window.1 {
                continue;
            }
            let f_val = tau * (derived.grad_log_sq[kt * n_x + i] - derived.dlog_dt[kt * n_x + i]);
            let rel = ((f_val - target) / target).abs();
            coll.push(field.times[kt], x, -rel);
        }
    }
    coll.finish(format!(
        "target m/2 = {target}, window [{}, {}]",
        window.0, window.1
    ))
}

// ---------------------------------------------------------------------------
// parabolic Harnack (two space-time points)
// ---------------------------------------------------------------------------

/// Check the integrated two-point consequence of the Li–Yau bound:
///
/// `log u(x₂,t₂) ≥ log u(x₁,t₁) − α·⟨d²⟩/(4Δτ) − (mα/2)·log(τ₂/τ₁) − C₇·Δτ`,
///
/// where `⟨d²⟩` is the time-average of `d_{g(t)}(x₁,x₂)²` over `[t₁,t₂]`
/// (Simpson) and `C₇ = (mα/4)(2·C₄(K₂+√K₁) + √(D/m))` packages the
/// first-order and zeroth-order envelope constants along the path.
#[allow(clippy::too_many_arguments)]
pub fn parabolic_harnack_margin(
    family: &ManifoldFamily,
    field: &SpaceTimeField,
    cert: &FlowCertificate,
    params: &FlowParams,
    cutoff: &CutoffProfile,
    n_pairs: usize,
    d_variant: DVariant,
    opts: &BoundCheckOptions,
) -> Result<HarnackReport> {
    require_condition(cert, ConditionKind::VariantAlpha, params.k)?;
    require_positive(field)?;
    let m = params.m.finite("parabolic Harnack")?;
    let alpha = params.alpha;
    if !(alpha > 1.0) {
        return Err(CoreError::Parameter(format!(
            "parabolic Harnack needs α > 1, got {alpha}"
        )));
    }
    let d_val = constant_d(d_variant, cert, params)?;
    let c4k = cutoff.c1 * (cert.k2 + cert.k1.sqrt());
    let c7 = m * alpha / 4.0 * (2.0 * c4k + (d_val / m).sqrt());
    let eligible: Vec<usize> = (0..field.n_t())
        .filter(|&kt| field.times[kt] - opts.time_origin >= opts.t_min)
        .collect();
    if eligible.len() < 2 {
        return Err(CoreError::Parameter(
            "need at least two time rows older than t_min".into(),
        ));
    }
    let n_x = field.n_x();
    let mut coll = MarginCollector::new(CheckId::ParabolicHarnack, opts.tolerance, opts.row_stride);
    for p in 0..n_pairs.max(1) {
        let a_idx = (p * 5 + 1) % (eligible.len() / 2).max(1);
        let b_idx = eligible.len() / 2 + (p * 3) % (eligible.len() - eligible.len() / 2);
        let (k1t, k2t) = (eligible[a_idx], eligible[b_idx]);
        if k2t <= k1t {
            continue;
        }
        let (t1, t2) = (field.times[k1t], field.times[k2t]);
        let (tau1, tau2) = (t1 - opts.time_origin, t2 - opts.time_origin);
        let i1 = (p * 17 + 3) % n_x;
        let i2 = (i1 + n_x / 3 + p * 11) % n_x;
        let p1 = family.chart.embed(field.space.xs[i1]);
        let p2 = family.chart.embed(field.space.xs[i2]);
        // Simpson average of d_{g(t)}² over [t1, t2]
        let n_iv = 16;
        let h = (t2 - t1) / n_iv as f64;
        let mut acc = 0.0;
        for s in 0..=n_iv {
            let w = if s == 0 || s == n_iv {
                1.0
            } else if s % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let dstr = distance(family, t1 + s as f64 * h, &p1, &p2)?;
            acc += w * dstr * dstr;
        }
        let avg_d2 = acc * h / 3.0 / (t2 - t1);
        let dt = tau2 - tau1;
        let rhs_lower = field.value(k1t, i1).ln()
            - alpha * avg_d2 / (4.0 * dt)
            - m * alpha / 2.0 * (tau2 / tau1).ln()
            - c7 * dt;
        coll.push(
            t2,
            field.space.xs[i2],
            field.value(k2t, i2).ln() - rhs_lower,
        );
    }
    let notes = format!(
        "m = {m}, α = {alpha}, C₇ = {c7:.4e} (C₄(K₂+√K₁) = {c4k:.4e}, D = {d_val:.4e}), \
         pairs = {n_pairs}"
    );
    coll.finish(notes)
}
