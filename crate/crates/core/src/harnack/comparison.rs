//! Radial comparison estimates and the cutoff evolution inequality.
//!
//! For a drift Laplacian whose `m`-dimensional curvature tensor satisfies
//! `Ric_m ≥ −K₁ g`, the distance `ρ` to a fixed center obeys
//!
//! `L ρ ≤ (m−1)·κ·coth(κ ρ)` with `κ = √(K₁/(m−1))`,
//!
//! away from the center and the cut locus. On our axisymmetric charts we
//! check this against the radial profile `ρ(y) = d_{g(t)}(center, y)`
//! evaluated along the axis, where the axis is a geodesic and the profile is
//! the true two-point distance. Samples where the profile is not smooth
//! (near the center, or across a periodic cut locus) are detected through
//! the eikonal identity `|∇ρ|² = 1` and skipped.
//!
//! The cutoff evolution inequality packages the same estimate, the scale
//! bound `h ≥ −K₂ g` and the certified profile constants `C₁, C₂` into
//!
//! `(L − ∂ₜ)(η(ρ/R)) ≥ −C₁K₂√η − (C₁/R)·(m−1)κcoth(κρ) − C₂/R²`,
//!
//! the inherited lower bound used when localizing gradient estimates to a
//! ball of radius `R`.

use crate::geometry::cutoff::CutoffProfile;
use crate::geometry::distance::distance;
use crate::geometry::family::ManifoldFamily;
use crate::geometry::potential::PotentialFamily;
use crate::{CoreError, Result};

use super::{scalar_witten, CheckId, HarnackReport, MarginCollector};

/// `√k · coth(√k·ρ)`, continuous down to `k = 0` where it equals `1/ρ`.
/// Switches to the two-term series `1/ρ + kρ/3` once `√k·ρ < 1e−4`.
pub fn sqrtk_coth(k: f64, rho: f64) -> Result<f64> {
    if k < 0.0 || !(rho > 0.0) {
        return Err(CoreError::Parameter(format!(
            "coth kernel needs k ≥ 0 and ρ > 0, got k = {k}, ρ = {rho}"
        )));
    }
    let z = k.sqrt() * rho;
    if z < 1e-4 {
        Ok(1.0 / rho + k * rho / 3.0)
    } else {
        Ok(k.sqrt() / z.tanh())
    }
}

/// Comparison envelope `(m−1)·κ·coth(κρ)` with `κ = √(K₁/(m−1))` for a
/// curvature floor `Ric_m ≥ −K₁ g`.
pub fn comparison_bound_coth(m: f64, k1: f64, rho: f64) -> Result<f64> {
    if !(m > 1.0) {
        return Err(CoreError::Parameter(format!(
            "the coth comparison envelope needs m > 1, got {m}"
        )));
    }
    Ok((m - 1.0) * sqrtk_coth(k1 / (m - 1.0), rho)?)
}

/// Additive relaxation `(m−1)/ρ + √((m−1)K₁)`; always at least the coth
/// form because `coth z ≤ 1/z + 1`.
pub fn comparison_bound_additive(m: f64, k1: f64, rho: f64) -> Result<f64> {
    if !(m > 1.0) || k1 < 0.0 || !(rho > 0.0) {
        return Err(CoreError::Parameter(format!(
            "additive comparison envelope needs m > 1, K₁ ≥ 0, ρ > 0; \
             got m = {m}, K₁ = {k1}, ρ = {rho}"
        )));
    }
    Ok((m - 1.0) / rho + ((m - 1.0) * k1).sqrt())
}

/// Options for the radial sweeps.
#[derive(Clone, Copy, Debug)]
pub struct ComparisonOptions {
    pub tolerance: f64,
    /// Stencil step for the operator applied to the radial profile.
    pub eps: f64,
    /// Samples closer than this to the center are skipped (the profile has a
    /// kink there). Must be at least `4·eps`.
    pub band: f64,
    /// Allowed deviation of the finite-difference `|∇ρ|²` from 1 before a
    /// sample is treated as non-smooth and skipped.
    pub eikonal_slack: f64,
    pub row_stride: usize,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        ComparisonOptions {
            tolerance: 1e-6,
            eps: 1e-4,
            band: 1e-2,
            eikonal_slack: 0.05,
            row_stride: 17,
        }
    }
}

fn radial_profile<'a>(family: &'a ManifoldFamily, center: f64) -> impl Fn(f64, f64) -> f64 + 'a {
    let pc = family.chart.embed(center);
    move |tt: f64, yy: f64| {
        let py = family.chart.embed(yy);
        distance(family, tt, &pc, &py).unwrap_or(f64::NAN)
    }
}

/// Whether the radial profile looks smooth at `(t, xs)`: finite values and
/// `|∇ρ|²_g` within `slack` of 1.
fn profile_is_smooth<F: Fn(f64, f64) -> f64>(
    family: &ManifoldFamily,
    rho: &F,
    t: f64,
    xs: f64,
    eps: f64,
    slack: f64,
) -> bool {
    let (rp, rm) = (rho(t, xs + eps), rho(t, xs - eps));
    if !rp.is_finite() || !rm.is_finite() {
        return false;
    }
    let d1 = (rp - rm) / (2.0 * eps);
    let eik = d1 * d1 / family.gxx(t, xs);
    (eik - 1.0).abs() <= slack
}

/// Sweep `margin = (m−1)κcoth(κρ) − Lρ` over axis samples at a fixed time.
/// `k1` is the certified curvature floor for `Ric_m` (typically
/// `FlowCertificate::k1`). Skipped samples are reported in the notes.
#[allow(clippy::too_many_arguments)]
pub fn laplacian_comparison_margin(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    m: f64,
    k1: f64,
    center: f64,
    t: f64,
    samples: &[f64],
    opts: &ComparisonOptions,
) -> Result<HarnackReport> {
    if opts.band < 4.0 * opts.eps {
        return Err(CoreError::Parameter(format!(
            "exclusion band {} must be at least 4× the stencil step {}",
            opts.band, opts.eps
        )));
    }
    let rho = radial_profile(family, center);
    let mut coll = MarginCollector::new(
        CheckId::LaplacianComparison,
        opts.tolerance,
        opts.row_stride,
    );
    let mut skipped = 0usize;
    let mut additive_worst = f64::INFINITY;
    for &xs in samples {
        let r0 = rho(t, xs);
        if !r0.is_finite() || r0 < opts.band {
            skipped += 1;
            continue;
        }
        if !profile_is_smooth(family, &rho, t, xs, opts.eps, opts.eikonal_slack) {
            skipped += 1;
            continue;
        }
        let l_rho = scalar_witten(family, pot, t, xs, &rho, opts.eps)?;
        if !l_rho.is_finite() {
            skipped += 1;
            continue;
        }
        coll.push(t, xs, comparison_bound_coth(m, k1, r0)? - l_rho);
        additive_worst = additive_worst.min(comparison_bound_additive(m, k1, r0)? - l_rho);
    }
    coll.finish(format!(
        "m = {m}, K₁ = {k1}, center = {center}, skipped = {skipped}, \
         additive-envelope worst margin = {additive_worst:.4e}"
    ))
}

/// Sweep the cutoff evolution inequality for `ψ = η(ρ/R)`:
/// `margin = (L − ∂ₜ)ψ + C₁K₂√ψ + (C₁/R)(m−1)κcoth(κρ) + C₂/R²`.
/// `k1, k2` are the certified floors for `Ric_m` and the metric rate `h`.
#[allow(clippy::too_many_arguments)]
pub fn cutoff_evolution_margin(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    cutoff: &CutoffProfile,
    m: f64,
    k1: f64,
    k2: f64,
    center: f64,
    radius: f64,
    t: f64,
    samples: &[f64],
    opts: &ComparisonOptions,
) -> Result<HarnackReport> {
    if !(radius > 0.0) || k2 < 0.0 {
        return Err(CoreError::Parameter(format!(
            "cutoff evolution needs R > 0 and K₂ ≥ 0, got R = {radius}, K₂ = {k2}"
        )));
    }
    let rho = radial_profile(family, center);
    let psi = |tt: f64, yy: f64| cutoff.eta(rho(tt, yy) / radius);
    let mut coll = MarginCollector::new(CheckId::CutoffEvolution, opts.tolerance, opts.row_stride);
    let mut skipped = 0usize;
    for &xs in samples {
        let r0 = rho(t, xs);
        if !r0.is_finite() {
            skipped += 1;
            continue;
        }
        let inert = r0 < opts.band || r0 / radius >= 2.0;
        // near the center the plateau η ≡ 1 masks the kink of ρ, and beyond
        // 2R the profile is identically 0, so only the transition region
        // needs the smoothness screen
        if !inert && !profile_is_smooth(family, &rho, t, xs, opts.eps, opts.eikonal_slack) {
            skipped += 1;
            continue;
        }
        let psi_p = psi(t + opts.eps, xs);
        let psi_m = psi(t - opts.eps, xs);
        let lhs =
            scalar_witten(family, pot, t, xs, &psi, opts.eps)? - (psi_p - psi_m) / (2.0 * opts.eps);
        let comp = if r0 >= opts.band {
            comparison_bound_coth(m, k1, r0)?
        } else {
            // inside the band the comparison term is only larger; using the
            // band value keeps the certified inequality intact
            comparison_bound_coth(m, k1, opts.band)?
        };
        let rhs = -cutoff.c1 * k2 * psi(t, xs).max(0.0).sqrt()
            - cutoff.c1 / radius * comp
            - cutoff.c2 / (radius * radius);
        if !lhs.is_finite() || !rhs.is_finite() {
            skipped += 1;
            continue;
        }
        coll.push(t, xs, lhs - rhs);
    }
    coll.finish(format!(
        "m = {m}, K₁ = {k1}, K₂ = {k2}, center = {center}, R = {radius}, \
         C₁ = {:.4}, C₂ = {:.4}, skipped = {skipped}",
        cutoff.c1, cutoff.c2
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::ChartKind;
    use crate::geometry::family::TimeScale;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_sphere_static() -> ManifoldFamily {
        ManifoldFamily::conformal(
            ChartKind::SpherePolar {
                dim_n: 2,
                theta_min: 0.05,
                radius: 1.0,
            },
            TimeScale::Static,
        )
        .unwrap()
    }

    #[test]
    fn coth_kernel_limits_and_series_join() {
        // k = 0 degenerates to 1/ρ
        assert_relative_eq!(sqrtk_coth(0.0, 0.8).unwrap(), 1.25, epsilon = 1e-14);
        // large argument saturates at √k
        assert_relative_eq!(sqrtk_coth(4.0, 100.0).unwrap(), 2.0, epsilon = 1e-12);
        // just below the switch the series branch agrees with the closed form
        // to the dropped O(z⁴) term
        let rho = 0.5;
        let k_below = (0.9999e-4_f64 / rho).powi(2);
        let series = sqrtk_coth(k_below, rho).unwrap();
        let closed = k_below.sqrt() / (k_below.sqrt() * rho).tanh();
        assert_relative_eq!(series, closed, max_relative = 1e-12);
        assert!(sqrtk_coth(-1.0, 1.0).is_err());
        assert!(sqrtk_coth(1.0, 0.0).is_err());
    }

    #[test]
    fn additive_envelope_dominates_coth_envelope() {
        for &m in &[2.0, 3.5, 7.0] {
            for &k1 in &[0.0, 0.3, 2.0] {
                for &rho in &[0.05, 0.4, 1.7, 6.0] {
                    let coth = comparison_bound_coth(m, k1, rho).unwrap();
                    let add = comparison_bound_additive(m, k1, rho).unwrap();
                    assert!(
                        add >= coth - 1e-12,
                        "m={m}, K₁={k1}, ρ={rho}: additive {add} < coth {coth}"
                    );
                }
            }
        }
    }

    #[test]
    fn sphere_radial_laplacian_matches_closed_form() {
        // on the static unit 2-sphere with center θc, the radial profile at
        // θ > θc has Lρ = cot θ; with K₁ = 0 the envelope is 1/ρ.
        let family = unit_sphere_static();
        let pot = PotentialFamily::zero(&family);
        let report = laplacian_comparison_margin(
            &family,
            &pot,
            2.0,
            0.0,
            0.6,
            0.0,
            &[1.4],
            &ComparisonOptions::default(),
        )
        .unwrap();
        let expected = 1.0 / 0.8 - 1.0 / (1.4_f64).tan();
        assert_eq!(report.samples, 1);
        assert_relative_eq!(report.worst_margin, expected, epsilon = 1e-6);
        assert!(report.passed);
    }

    #[test]
    fn comparison_holds_with_positive_curvature_floor() {
        // any K₁ ≥ 0 is a valid floor on the positively curved sphere, and
        // larger K₁ only inflates the envelope
        let family = unit_sphere_static();
        let pot = PotentialFamily::zero(&family);
        let samples: Vec<f64> = (1..28).map(|i| 0.1 + i as f64 * 0.1).collect();
        let r0 = laplacian_comparison_margin(
            &family,
            &pot,
            2.0,
            0.0,
            0.3,
            0.0,
            &samples,
            &ComparisonOptions::default(),
        )
        .unwrap();
        let r1 = laplacian_comparison_margin(
            &family,
            &pot,
            2.0,
            1.0,
            0.3,
            0.0,
            &samples,
            &ComparisonOptions::default(),
        )
        .unwrap();
        assert!(r0.passed, "worst {:e}", r0.worst_margin);
        assert!(r1.passed);
        assert!(r1.worst_margin >= r0.worst_margin - 1e-12);
        assert!(r0.samples > 20);
    }

    #[test]
    fn comparison_holds_for_drift_well_on_line() {
        // L = ∂² − x∂ on [−6,6]: Ric_3 = 1 − x²/2 ≥ −1 on |x| ≤ 2
        let family = ManifoldFamily::conformal(
            ChartKind::Line {
                x_min: -6.0,
                x_max: 6.0,
            },
            TimeScale::Static,
        )
        .unwrap();
        let pot = PotentialFamily::quadratic(&family, 1.0, 0.0).unwrap();
        let samples: Vec<f64> = (0..41).map(|i| -2.0 + i as f64 * 0.1).collect();
        let report = laplacian_comparison_margin(
            &family,
            &pot,
            3.0,
            1.0,
            0.0,
            0.0,
            &samples,
            &ComparisonOptions::default(),
        )
        .unwrap();
        assert!(report.passed, "worst {:e}", report.worst_margin);
        // the kink at the center is skipped
        assert!(
            report.samples < 41 && report.samples >= 38,
            "samples {}",
            report.samples
        );
    }

    #[test]
    fn periodic_cut_locus_is_screened_out() {
        let family =
            ManifoldFamily::conformal(ChartKind::Circle { period: 2.0 * PI }, TimeScale::Static)
                .unwrap();
        let pot = PotentialFamily::zero(&family);
        // samples straddling the antipode of the center at 0
        let samples: Vec<f64> = (0..25).map(|i| PI - 0.06 + i as f64 * 0.005).collect();
        let report = laplacian_comparison_margin(
            &family,
            &pot,
            2.0,
            0.0,
            0.0,
            0.0,
            &samples,
            &ComparisonOptions::default(),
        )
        .unwrap();
        assert!(report.samples < 25, "cut-locus samples must be skipped");
        assert!(
            report.samples > 5,
            "points clear of the antipode must survive"
        );
        assert!(report.passed, "worst {:e}", report.worst_margin);
    }

    #[test]
    fn cutoff_evolution_holds_on_static_sphere() {
        let family = unit_sphere_static();
        let pot = PotentialFamily::zero(&family);
        let cutoff = CutoffProfile::standard();
        let samples: Vec<f64> = (0..140).map(|i| 0.06 + i as f64 * 0.01).collect();
        let report = cutoff_evolution_margin(
            &family,
            &pot,
            &cutoff,
            2.0,
            0.0,
            0.0,
            0.3,
            0.5,
            0.0,
            &samples,
            &ComparisonOptions::default(),
        )
        .unwrap();
        assert!(
            report.passed,
            "worst {:e} at x = {}",
            report.worst_margin, report.worst_x
        );
        assert!(report.samples > 120);
        // the packaged constants leave real slack
        assert!(report.worst_margin > 0.1, "worst {:e}", report.worst_margin);
    }

    #[test]
    fn cutoff_evolution_holds_on_shrinking_sphere() {
        let family = ManifoldFamily::conformal(
            ChartKind::SpherePolar {
                dim_n: 2,
                theta_min: 0.05,
                radius: 1.0,
            },
            TimeScale::ricci_flow_sphere(2, 1.0),
        )
        .unwrap();
        let pot = PotentialFamily::zero(&family);
        let cutoff = CutoffProfile::standard();
        let samples: Vec<f64> = (0..140).map(|i| 0.06 + i as f64 * 0.01).collect();
        // at t = 0.2 the scale is c = 0.6, so h ≥ −(1/0.6)·g
        let report = cutoff_evolution_margin(
            &family,
            &pot,
            &cutoff,
            2.0,
            0.0,
            1.0 / 0.6,
            0.3,
            0.5,
            0.2,
            &samples,
            &ComparisonOptions::default(),
        )
        .unwrap();
        assert!(
            report.passed,
            "worst {:e} at x = {}",
            report.worst_margin, report.worst_x
        );
    }
}
