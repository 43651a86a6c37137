//! Pointwise differential identities behind the gradient and Harnack bounds.
//!
//! Every check here works on a plain scalar callback `u(t, xₛ)` along the
//! symmetry axis of a chart, differentiates it with centred stencils of step
//! `eps`, and contracts against the *analytic* metric, Christoffel, curvature
//! and potential data of the family. Each function returns the `(lhs, rhs)`
//! pair of its identity so a caller can form the residual `lhs − rhs` (an
//! exact identity) or the margin (a one-sided inequality). Residuals converge
//! at second order in `eps`, which is itself a testable claim.
//!
//! The commutator and Bochner checks hold for *any* smooth callback; the
//! evolution, companion, generator and chain checks additionally require `u`
//! to solve the drift heat equation `∂ₜu = Lu` exactly, so they are meant to
//! be fed closed-form solutions.

use nalgebra::DMatrix;

use crate::flowcheck::s_tensor;
use crate::geometry::curvature::{bakry_emery_ricci, EffectiveDim};
use crate::geometry::family::ManifoldFamily;
use crate::geometry::potential::PotentialFamily;
use crate::{CoreError, Result};

use super::{psi_factor, scalar_witten};

fn fd_x<F: Fn(f64, f64) -> f64>(f: &F, t: f64, x: f64, eps: f64) -> f64 {
    (f(t, x + eps) - f(t, x - eps)) / (2.0 * eps)
}

fn fd_xx<F: Fn(f64, f64) -> f64>(f: &F, t: f64, x: f64, eps: f64) -> f64 {
    (f(t, x + eps) - 2.0 * f(t, x) + f(t, x - eps)) / (eps * eps)
}

fn fd_t<F: Fn(f64, f64) -> f64>(f: &F, t: f64, x: f64, eps: f64) -> f64 {
    (f(t + eps, x) - f(t - eps, x)) / (2.0 * eps)
}

/// Covariant Hessian of an axis profile: `(∇²f)_ij = −Γ⁰_ij f′` plus `f″` in
/// the axis-axis slot (the profile has no transverse derivatives).
fn axis_hessian(gamma: &[f64], d: usize, d1: f64, d2: f64) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            h[(i, j)] = -gamma[(0 * d + i) * d + j] * d1;
        }
    }
    h[(0, 0)] += d2;
    h
}

/// `|A|²_g = g^{ik}g^{jl}A_ij A_kl = tr(g⁻¹A g⁻¹A)` for symmetric `A`.
fn tensor_norm_sq(g_inv: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    (g_inv * a * g_inv * a).trace()
}

/// `T(∇f, ∇f)` for a covariant 2-tensor and the axis gradient `f′ dx⁰`.
fn tensor_on_grad(g_inv: &DMatrix<f64>, tensor: &DMatrix<f64>, d1: f64) -> f64 {
    let d = g_inv.nrows();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += g_inv[(i, 0)] * d1 * tensor[(i, j)] * g_inv[(j, 0)] * d1;
        }
    }
    quad
}

fn ensure_finite(pair: (f64, f64), what: &str) -> Result<(f64, f64)> {
    if pair.0.is_finite() && pair.1.is_finite() {
        Ok(pair)
    } else {
        Err(CoreError::Degeneracy(format!(
            "{what} produced a non-finite value (lhs = {}, rhs = {})",
            pair.0, pair.1
        )))
    }
}

/// Weighted Bochner formula. Returns
/// `lhs = L|∇u|² − 2⟨∇u, ∇Lu⟩` and `rhs = 2|∇²u|² + 2(Ric + ∇²φ)(∇u, ∇u)`,
/// equal for any smooth `u` at fixed time.
pub fn bochner_identity<F: Fn(f64, f64) -> f64>(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    t: f64,
    xs: f64,
    u: &F,
    eps: f64,
) -> Result<(f64, f64)> {
    let p = family.chart.embed(xs);
    let d = family.dim_n();
    let g_inv = family.metric_inv(t, &p)?;
    let gamma = family.chart.christoffel(&p);
    let grad_sq = |tt: f64, yy: f64| {
        let ux = fd_x(u, tt, yy, eps);
        ux * ux / family.gxx(tt, yy)
    };
    let lw = scalar_witten(family, pot, t, xs, &grad_sq, eps)?;
    let lu = |tt: f64, yy: f64| scalar_witten(family, pot, tt, yy, u, eps).unwrap_or(f64::NAN);
    let d1 = fd_x(u, t, xs, eps);
    let grad_dot = d1 * fd_x(&lu, t, xs, eps) / family.gxx(t, xs);
    let lhs = lw - 2.0 * grad_dot;

    let hess = axis_hessian(&gamma, d, d1, fd_xx(u, t, xs, eps));
    let curv = bakry_emery_ricci(family, pot, EffectiveDim::Infinite, t, &p)?;
    let rhs = 2.0 * tensor_norm_sq(&g_inv, &hess) + 2.0 * tensor_on_grad(&g_inv, &curv, d1);
    ensure_finite((lhs, rhs), "Bochner identity")
}

/// Commutator of the time derivative with the drift Laplacian on a moving
/// metric. Returns `lhs = ∂ₜ(Lf) − L(∂ₜf)` and
/// `rhs = −2⟨h, ∇²f⟩ + ⟨S_∞, ∇f⟩`, equal for any smooth `f`.
pub fn mixed_time_commutator<F: Fn(f64, f64) -> f64>(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    t: f64,
    xs: f64,
    f: &F,
    eps: f64,
) -> Result<(f64, f64)> {
    let p = family.chart.embed(xs);
    let d = family.dim_n();
    let g_inv = family.metric_inv(t, &p)?;
    let gamma = family.chart.christoffel(&p);
    let lf = |tt: f64, yy: f64| scalar_witten(family, pot, tt, yy, f, eps).unwrap_or(f64::NAN);
    let dtf = |tt: f64, yy: f64| fd_t(f, tt, yy, eps);
    let lhs = fd_t(&lf, t, xs, eps) - scalar_witten(family, pot, t, xs, &dtf, eps)?;

    let d1 = fd_x(f, t, xs, eps);
    let hess = axis_hessian(&gamma, d, d1, fd_xx(f, t, xs, eps));
    let h = family.metric_rate(t, &p);
    let h_dot_hess = (&g_inv * &h * &g_inv * &hess).trace();
    let s = s_tensor(family, pot, EffectiveDim::Infinite, t, &p, eps)?;
    let mut s_dot_grad = 0.0;
    for (j, s_j) in s.iter().enumerate() {
        s_dot_grad += s_j * g_inv[(j, 0)] * d1;
    }
    let rhs = -2.0 * h_dot_hess + s_dot_grad;
    ensure_finite((lhs, rhs), "time commutator")
}

/// Evolution of the gradient ratio `w = |∇u|²/u` along an exact positive
/// solution of `∂ₜu = Lu`. Returns `lhs = (∂ₜ − L)w` and
/// `rhs = −(2/u)|∇²u − du⊗du/u|² − (2/u)(h + Ric + ∇²φ)(∇u, ∇u)`.
pub fn gradient_ratio_evolution<F: Fn(f64, f64) -> f64>(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    t: f64,
    xs: f64,
    u: &F,
    eps: f64,
) -> Result<(f64, f64)> {
    let u0 = u(t, xs);
    if !(u0 > 0.0) {
        return Err(CoreError::Parameter(format!(
            "gradient-ratio evolution needs u > 0, got {u0} at (t, x) = ({t}, {xs})"
        )));
    }
    let p = family.chart.embed(xs);
    let d = family.dim_n();
    let g_inv = family.metric_inv(t, &p)?;
    let gamma = family.chart.christoffel(&p);
    let ratio = |tt: f64, yy: f64| {
        let ux = fd_x(u, tt, yy, eps);
        ux * ux / (family.gxx(tt, yy) * u(tt, yy))
    };
    let lhs = fd_t(&ratio, t, xs, eps) - scalar_witten(family, pot, t, xs, &ratio, eps)?;

    let d1 = fd_x(u, t, xs, eps);
    let mut p_tensor = axis_hessian(&gamma, d, d1, fd_xx(u, t, xs, eps));
    p_tensor[(0, 0)] -= d1 * d1 / u0;
    let curv =
        family.metric_rate(t, &p) + bakry_emery_ricci(family, pot, EffectiveDim::Infinite, t, &p)?;
    let rhs = -2.0 / u0 * tensor_norm_sq(&g_inv, &p_tensor)
        - 2.0 / u0 * tensor_on_grad(&g_inv, &curv, d1);
    ensure_finite((lhs, rhs), "gradient-ratio evolution")
}

/// Companion evolution for the entropy-like quantity `u·log(A/u)` along an
/// exact positive solution: `lhs = (∂ₜ − L)(u log(A/u))`, `rhs = |∇u|²/u`,
/// for any constant `A > 0`.
pub fn entropy_companion<F: Fn(f64, f64) -> f64>(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    a_const: f64,
    t: f64,
    xs: f64,
    u: &F,
    eps: f64,
) -> Result<(f64, f64)> {
    if !(a_const > 0.0) {
        return Err(CoreError::Parameter(format!(
            "companion needs A > 0, got {a_const}"
        )));
    }
    let u0 = u(t, xs);
    if !(u0 > 0.0) {
        return Err(CoreError::Parameter(format!(
            "companion evolution needs u > 0, got {u0} at (t, x) = ({t}, {xs})"
        )));
    }
    let y = |tt: f64, yy: f64| {
        let v = u(tt, yy);
        v * (a_const / v).ln()
    };
    let lhs = fd_t(&y, t, xs, eps) - scalar_witten(family, pot, t, xs, &y, eps)?;
    let d1 = fd_x(u, t, xs, eps);
    let rhs = d1 * d1 / (family.gxx(t, xs) * u0);
    ensure_finite((lhs, rhs), "entropy companion")
}

/// Generator applied to the sharp gradient-bound comparison function
/// `Φ = ψ_K(τ)·|∇u|²/u − u·log(A/u)` along an exact positive solution.
/// Returns the defect `(∂ₜ − L)Φ`, which is `≤ 0` wherever
/// `h + Ric + ∇²φ ≥ −K g` holds — the maximum-principle input from which the
/// sharp gradient bound follows.
#[allow(clippy::too_many_arguments)]
pub fn max_principle_defect<F: Fn(f64, f64) -> f64>(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    k: f64,
    time_origin: f64,
    a_const: f64,
    t: f64,
    xs: f64,
    u: &F,
    eps: f64,
) -> Result<f64> {
    if k < 0.0 || !(a_const > 0.0) {
        return Err(CoreError::Parameter(format!(
            "generator defect needs K ≥ 0 and A > 0, got K = {k}, A = {a_const}"
        )));
    }
    if t - time_origin <= eps {
        return Err(CoreError::Parameter(format!(
            "age t − origin = {} must exceed the stencil step {eps}",
            t - time_origin
        )));
    }
    let phi = |tt: f64, yy: f64| {
        let v = u(tt, yy);
        let ux = fd_x(u, tt, yy, eps);
        let psi = psi_factor(k, tt - time_origin).unwrap_or(f64::NAN);
        psi * ux * ux / (family.gxx(tt, yy) * v) - v * (a_const / v).ln()
    };
    let defect = fd_t(&phi, t, xs, eps) - scalar_witten(family, pot, t, xs, &phi, eps)?;
    if defect.is_finite() {
        Ok(defect)
    } else {
        Err(CoreError::Degeneracy(
            "generator defect is non-finite".into(),
        ))
    }
}

/// Lower envelope for `(L − ∂ₜ)F` where `F = τ(|∇log u|² − α ∂ₜlog u)`:
///
/// `2F²/(α²mτ) − F/τ − 2⟨∇log u, ∇F⟩ − τα²A²/2 − mα²τ(2K+γ)²/(8(α−1)²) − α²B²τ/(4γ)`.
///
/// `A², B` are the certified flow constants, `K` the curvature level and `γ`
/// the Young-split weight.
#[allow(clippy::too_many_arguments)]
pub fn chain_rhs(
    f_quantity: f64,
    grad_dot: f64,
    tau: f64,
    alpha: f64,
    m: f64,
    a_sq: f64,
    k: f64,
    gamma: f64,
    b_const: f64,
) -> f64 {
    2.0 * f_quantity * f_quantity / (alpha * alpha * m * tau)
        - f_quantity / tau
        - 2.0 * grad_dot
        - tau * alpha * alpha * a_sq / 2.0
        - m * alpha * alpha * tau * (2.0 * k + gamma).powi(2) / (8.0 * (alpha - 1.0).powi(2))
        - alpha * alpha * b_const * b_const * tau / (4.0 * gamma)
}

/// Differential inequality chained from Bochner + curvature condition +
/// Young splits along an exact positive solution: returns
/// `lhs = (L − ∂ₜ)F` and `rhs` = [`chain_rhs`] with the supplied constants;
/// a sound derivation yields `lhs ≥ rhs`.
#[allow(clippy::too_many_arguments)]
pub fn chain_inequality<F: Fn(f64, f64) -> f64>(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    time_origin: f64,
    alpha: f64,
    m: f64,
    a_sq: f64,
    k: f64,
    gamma_split: f64,
    b_const: f64,
    t: f64,
    xs: f64,
    u: &F,
    eps: f64,
) -> Result<(f64, f64)> {
    if !(alpha > 1.0) || !(m > 0.0) || !(gamma_split > 0.0) {
        return Err(CoreError::Parameter(format!(
            "chain bound needs α > 1, m > 0, γ > 0; got α = {alpha}, m = {m}, γ = {gamma_split}"
        )));
    }
    let tau0 = t - time_origin;
    if tau0 <= 2.0 * eps {
        return Err(CoreError::Parameter(format!(
            "age τ = {tau0} must exceed twice the stencil step {eps}"
        )));
    }
    if !(u(t, xs) > 0.0) {
        return Err(CoreError::Parameter(
            "chain bound needs a positive solution".into(),
        ));
    }
    let log_u = |tt: f64, yy: f64| u(tt, yy).ln();
    let f_big = |tt: f64, yy: f64| {
        let fx = fd_x(&log_u, tt, yy, eps);
        let q = fx * fx / family.gxx(tt, yy) - alpha * fd_t(&log_u, tt, yy, eps);
        (tt - time_origin) * q
    };
    let lhs = scalar_witten(family, pot, t, xs, &f_big, eps)? - fd_t(&f_big, t, xs, eps);
    let grad_dot = fd_x(&log_u, t, xs, eps) * fd_x(&f_big, t, xs, eps) / family.gxx(t, xs);
    let rhs = chain_rhs(
        f_big(t, xs),
        grad_dot,
        tau0,
        alpha,
        m,
        a_sq,
        k,
        gamma_split,
        b_const,
    );
    ensure_finite((lhs, rhs), "chain inequality")
}

/// Elementary envelope used by the Young splits: for `a > 0`, `γ > 0` and all
/// real `x`, `a·x⁴ + b·x² + c·x ≥ −(b−γ)²/(4a) − c²/(4γ)`.
pub fn quartic_lower_bound(a: f64, b: f64, c: f64, gamma: f64) -> Result<f64> {
    if !(a > 0.0) || !(gamma > 0.0) {
        return Err(CoreError::Parameter(format!(
            "quartic envelope needs a > 0 and γ > 0, got a = {a}, γ = {gamma}"
        )));
    }
    Ok(-(b - gamma).powi(2) / (4.0 * a) - c * c / (4.0 * gamma))
}
