//! Margin checks for gradient bounds, differential Harnack inequalities and
//! the pointwise identities behind them.
//!
//! Every check reports a signed *margin*: `margin ≥ −tolerance` means the
//! inequality (or identity, with margin `= −|residual|`) held at that sample.
//! Reports keep the worst sample and a thinned trail of rows for export.
//!
//! The time weight used by the gradient bounds is
//!
//! `ψ(t) = (1 − e^{−2Kt}) / (2K)`,
//!
//! which solves `ψ′ + 2Kψ = 1`, `ψ(0) = 0`, degenerates to `ψ = t` at
//! `K = 0`, and satisfies `1/ψ ≤ 2K + 1/t` for `K ≥ 0`.

pub mod bounds;
pub mod comparison;
pub mod identities;

use serde::{Deserialize, Serialize};

use crate::geometry::family::ManifoldFamily;
use crate::geometry::potential::PotentialFamily;
use crate::{CoreError, Result};

/// `ψ(t) = (1 − e^{−2Kt})/(2K)` with a series fallback near `2Kt = 0`.
pub fn psi_factor(k: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(CoreError::Parameter(format!("ψ needs t > 0, got {t}")));
    }
    let z = 2.0 * k * t;
    if z.abs() < 1e-6 {
        // (1 − e^{−z})/z = 1 − z/2 + z²/6 − z³/24 + O(z⁴)
        Ok(t * (1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0))
    } else {
        Ok((1.0 - (-z).exp()) / (2.0 * k))
    }
}

/// `ψ′(t) = e^{−2Kt}`.
pub fn psi_factor_deriv(k: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(CoreError::Parameter(format!("ψ′ needs t > 0, got {t}")));
    }
    Ok((-2.0 * k * t).exp())
}

/// Which inequality or identity a report attests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    HamiltonSharp,
    HamiltonAdditive,
    IntegratedHarnack,
    LiYauCompact,
    LiYauComplete,
    LiYauLocal,
    LiYauStaticReduction,
    LiYauSharpness,
    ParabolicHarnack,
    BochnerIdentity,
    CommutatorIdentity,
    GradientRatioEvolution,
    CompanionEvolution,
    MaxPrincipleGenerator,
    ChainInequality,
    AlgebraicLemma,
    LaplacianComparison,
    CutoffEvolution,
    FeynmanKac,
    MartingaleBound,
    MassConservation,
    BianchiVanishing,
}

impl CheckId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckId::HamiltonSharp => "hamilton_sharp",
            CheckId::HamiltonAdditive => "hamilton_additive",
            CheckId::IntegratedHarnack => "integrated_harnack",
            CheckId::LiYauCompact => "li_yau_compact",
            CheckId::LiYauComplete => "li_yau_complete",
            CheckId::LiYauLocal => "li_yau_local",
            CheckId::LiYauStaticReduction => "li_yau_static_reduction",
            CheckId::LiYauSharpness => "li_yau_sharpness",
            CheckId::ParabolicHarnack => "parabolic_harnack",
            CheckId::BochnerIdentity => "bochner_identity",
            CheckId::CommutatorIdentity => "commutator_identity",
            CheckId::GradientRatioEvolution => "gradient_ratio_evolution",
            CheckId::CompanionEvolution => "companion_evolution",
            CheckId::MaxPrincipleGenerator => "max_principle_generator",
            CheckId::ChainInequality => "chain_inequality",
            CheckId::AlgebraicLemma => "algebraic_lemma",
            CheckId::LaplacianComparison => "laplacian_comparison",
            CheckId::CutoffEvolution => "cutoff_evolution",
            CheckId::FeynmanKac => "feynman_kac",
            CheckId::MartingaleBound => "martingale_bound",
            CheckId::MassConservation => "mass_conservation",
            CheckId::BianchiVanishing => "bianchi_vanishing",
        }
    }
}

impl std::fmt::Display for CheckId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sampled margin.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MarginRow {
    pub t: f64,
    pub x: f64,
    pub margin: f64,
}

/// Outcome of one margin sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarnackReport {
    pub check: CheckId,
    pub worst_margin: f64,
    pub worst_t: f64,
    pub worst_x: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub samples: usize,
    pub notes: String,
    /// Thinned margin trail (always contains the worst sample).
    pub rows: Vec<MarginRow>,
}

/// Accumulates margins, keeping every `stride`-th row plus the worst one.
pub struct MarginCollector {
    check: CheckId,
    tolerance: f64,
    stride: usize,
    seen: usize,
    rows: Vec<MarginRow>,
    worst: Option<MarginRow>,
}

impl MarginCollector {
    pub fn new(check: CheckId, tolerance: f64, stride: usize) -> Self {
        MarginCollector {
            check,
            tolerance,
            stride: stride.max(1),
            seen: 0,
            rows: Vec::new(),
            worst: None,
        }
    }

    pub fn push(&mut self, t: f64, x: f64, margin: f64) {
        let row = MarginRow { t, x, margin };
        if self.seen % self.stride == 0 {
            self.rows.push(row);
        }
        if self.worst.map_or(true, |w| margin < w.margin) {
            self.worst = Some(row);
        }
        self.seen += 1;
    }

    pub fn finish(self, notes: String) -> Result<HarnackReport> {
        let worst = self.worst.ok_or_else(|| {
            CoreError::Parameter(format!("{} swept zero samples", self.check.as_str()))
        })?;
        let mut rows = self.rows;
        if !rows
            .iter()
            .any(|r| r.margin == worst.margin && r.t == worst.t)
        {
            rows.push(worst);
        }
        Ok(HarnackReport {
            check: self.check,
            worst_margin: worst.margin,
            worst_t: worst.t,
            worst_x: worst.x,
            tolerance: self.tolerance,
            passed: worst.margin >= -self.tolerance,
            samples: self.seen,
            notes,
            rows,
        })
    }
}

/// The weighted operator applied to a scalar callback `f(t, xs)` on the heat
/// axis, using centred differences of step `eps` and the chart's analytic
/// Christoffel symbols:
///
/// `Lf = g⁰⁰ f″ − (Σ_{ij} g^{ij} Γ⁰_{ij}) f′ − g⁰⁰ φ′ f′`.
pub fn scalar_witten<F: Fn(f64, f64) -> f64>(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    t: f64,
    xs: f64,
    f: &F,
    eps: f64,
) -> Result<f64> {
    if eps <= 0.0 {
        return Err(CoreError::Parameter(format!(
            "stencil step must be positive, got {eps}"
        )));
    }
    let p = family.chart.embed(xs);
    let g_inv = family.metric_inv(t, &p)?;
    let d = family.dim_n();
    let gamma = family.chart.christoffel(&p);
    let f0 = f(t, xs);
    let fp = f(t, xs + eps);
    let fm = f(t, xs - eps);
    let d1 = (fp - fm) / (2.0 * eps);
    let d2 = (fp - 2.0 * f0 + fm) / (eps * eps);
    let mut tr_gamma0 = 0.0;
    for i in 0..d {
        for j in 0..d {
            tr_gamma0 += g_inv[(i, j)] * gamma[(0 * d + i) * d + j];
        }
    }
    let lap = g_inv[(0, 0)] * d2 - tr_gamma0 * d1;
    Ok(lap - g_inv[(0, 0)] * pot.dphi_axis(t, xs) * d1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::ChartKind;
    use crate::geometry::family::TimeScale;
    use approx::assert_relative_eq;

    #[test]
    fn psi_solves_its_defining_ode() {
        // ψ′ + 2Kψ = 1 across scales, including the series branch.
        for &k in &[0.0, 1e-8, 1e-3, 1.0, 10.0] {
            for &t in &[1e-6, 1e-3, 0.1, 1.0, 5.0] {
                let psi = psi_factor(k, t).unwrap();
                let dpsi = psi_factor_deriv(k, t).unwrap();
                assert_relative_eq!(dpsi + 2.0 * k * psi, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn psi_series_branch_is_continuous() {
        // values straddling the series cutoff z = 2Kt = 1e−6 agree
        let k = 1.0;
        let t_lo = 4.9e-7; // z just below cutoff
        let t_hi = 5.1e-7; // z just above
        let lo = psi_factor(k, t_lo).unwrap();
        let hi = psi_factor(k, t_hi).unwrap();
        // closed form at both points for comparison
        let closed = |t: f64| (1.0 - (-2.0 * k * t).exp()) / (2.0 * k);
        assert_relative_eq!(lo, closed(t_lo), max_relative = 1e-12);
        assert_relative_eq!(hi, closed(t_hi), max_relative = 1e-12);
    }

    #[test]
    fn psi_reciprocal_bound_and_k_zero_limit() {
        for &k in &[0.0, 0.5, 2.0, 10.0] {
            for &t in &[1e-3, 0.1, 1.0, 10.0] {
                let psi = psi_factor(k, t).unwrap();
                assert!(1.0 / psi <= 2.0 * k + 1.0 / t + 1e-12, "K={k}, t={t}");
                assert!(psi <= t + 1e-15, "ψ ≤ t for K ≥ 0");
            }
        }
        assert_relative_eq!(psi_factor(0.0, 0.7).unwrap(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn collector_tracks_worst_and_pass_state() {
        let mut c = MarginCollector::new(CheckId::HamiltonSharp, 1e-6, 2);
        c.push(0.1, 0.0, 5.0);
        c.push(0.2, 1.0, -0.5);
        c.push(0.3, 2.0, 3.0);
        let report = c.finish("demo".into()).unwrap();
        assert_eq!(report.samples, 3);
        assert_relative_eq!(report.worst_margin, -0.5);
        assert_relative_eq!(report.worst_t, 0.2);
        assert!(!report.passed);
        assert!(report.rows.iter().any(|r| r.margin == -0.5));

        let empty = MarginCollector::new(CheckId::HamiltonSharp, 1e-6, 1);
        assert!(empty.finish(String::new()).is_err());
    }

    #[test]
    fn scalar_operator_matches_closed_forms() {
        // static circle, φ = 0: L sin = −sin
        let circle = ManifoldFamily::conformal(
            ChartKind::Circle {
                period: 2.0 * std::f64::consts::PI,
            },
            TimeScale::Static,
        )
        .unwrap();
        let zero = PotentialFamily::zero(&circle);
        let l = scalar_witten(&circle, &zero, 0.0, 0.7, &|_t, x: f64| x.sin(), 1e-4).unwrap();
        assert_relative_eq!(l, -(0.7f64).sin(), epsilon = 1e-7);

        // sphere radius 2, axisymmetric: Δf = (f″ + cot θ f′)/R²
        let sphere = ManifoldFamily::conformal(
            ChartKind::SpherePolar {
                dim_n: 2,
                theta_min: 0.05,
                radius: 2.0,
            },
            TimeScale::Static,
        )
        .unwrap();
        let zero_s = PotentialFamily::zero(&sphere);
        let th = 1.1f64;
        let l = scalar_witten(&sphere, &zero_s, 0.0, th, &|_t, x: f64| x.cos(), 1e-4).unwrap();
        let expect = (-th.cos() + 1.0 / th.tan() * (-th.sin())) / 4.0;
        assert_relative_eq!(l, expect, epsilon = 1e-7);

        // OU line: L x² = 2 − 2x²
        let line = ManifoldFamily::conformal(
            ChartKind::Line {
                x_min: -4.0,
                x_max: 4.0,
            },
            TimeScale::Static,
        )
        .unwrap();
        let ou = PotentialFamily::quadratic(&line, 1.0, 0.0).unwrap();
        let l = scalar_witten(&line, &ou, 0.0, 1.3, &|_t, x: f64| x * x, 1e-4).unwrap();
        assert_relative_eq!(l, 2.0 - 2.0 * 1.3 * 1.3, epsilon = 1e-6);
    }
}
