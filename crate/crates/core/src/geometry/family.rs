//! Time-dependent metric families `g(t, x)`.
//!
//! Every bundled family is conformal in time, `g(t, x) = c(t) · ĝ(x)`, which
//! is exactly what makes closed-form geodesic distances available on the model
//! charts. The struct still exposes the metric, its rate `h = ½ ∂ₜg` and the
//! Ricci tensor as callbacks so tests can swap in hand-built families, and the
//! rate callback is cross-checked against a centred finite difference of the
//! metric callback by [`validate_family`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::chart::ChartKind;
use crate::{CoreError, Result};

pub type MetricFn = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;
pub type ScaleFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Conformal time factor `c(t)` (with derivative) for the bundled families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeScale {
    /// `c ≡ 1`.
    Static,
    /// `c(t) = exp(2·rate·t)`, i.e. `h = rate · g`.
    ConformalExp { rate: f64 },
    /// `c(t) = c0 + c1·t` (must stay positive on the window of use).
    Linear { c0: f64, c1: f64 },
}

impl TimeScale {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            TimeScale::Static => (1.0, 0.0),
            TimeScale::ConformalExp { rate } => {
                let c = (2.0 * rate * t).exp();
                (c, 2.0 * rate * c)
            }
            TimeScale::Linear { c0, c1 } => (c0 + c1 * t, c1),
        }
    }

    /// Ricci flow `∂ₜg = −2 Ric` on the round n-sphere of radius `r`:
    /// `c(t) = 1 − 2(n−1)t/r²`, valid while `c > 0`.
    pub fn ricci_flow_sphere(dim_n: usize, radius: f64) -> Self {
        TimeScale::Linear {
            c0: 1.0,
            c1: -2.0 * (dim_n as f64 - 1.0) / (radius * radius),
        }
    }

    /// Backward Ricci flow `∂ₜg = +2 Ric` on the round n-sphere.
    pub fn backward_ricci_flow_sphere(dim_n: usize, radius: f64) -> Self {
        TimeScale::Linear {
            c0: 1.0,
            c1: 2.0 * (dim_n as f64 - 1.0) / (radius * radius),
        }
    }
}

#[derive(Clone)]
pub struct ManifoldFamily {
    pub chart: ChartKind,
    metric: MetricFn,
    metric_rate: MetricFn,
    ricci: MetricFn,
    scale: ScaleFn,
}

impl ManifoldFamily {
    /// Conformal family `g(t) = c(t)·ĝ` on a model chart.
    pub fn conformal(chart: ChartKind, scale: TimeScale) -> Result<Self> {
        chart.validate()?;
        let metric = {
            let chart = chart.clone();
            Arc::new(move |t: f64, x: &[f64]| chart.base_metric(x) * scale.eval(t).0) as MetricFn
        };
        let metric_rate = {
            let chart = chart.clone();
            Arc::new(move |t: f64, x: &[f64]| chart.base_metric(x) * (0.5 * scale.eval(t).1))
                as MetricFn
        };
        let ricci = {
            let chart = chart.clone();
            Arc::new(move |_t: f64, x: &[f64]| chart.base_ricci(x)) as MetricFn
        };
        Ok(ManifoldFamily {
            chart,
            metric,
            metric_rate,
            ricci,
            scale: Arc::new(move |t| scale.eval(t)),
        })
    }

    /// Fully custom family for tests and oracles. The scale callback must
    /// return `(c, dc/dt)` consistent with the metric callback if geodesic
    /// distances are going to be used.
    pub fn custom(
        chart: ChartKind,
        metric: MetricFn,
        metric_rate: MetricFn,
        ricci: MetricFn,
        scale: ScaleFn,
    ) -> Result<Self> {
        chart.validate()?;
        Ok(ManifoldFamily {
            chart,
            metric,
            metric_rate,
            ricci,
            scale,
        })
    }

    /// Manifold dimension n (equals the chart dimension for these models).
    pub fn dim_n(&self) -> usize {
        self.chart.dim()
    }

    pub fn metric(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        (self.metric)(t, x)
    }

    /// `h(t, x)` with `∂ₜ g = 2 h`.
    pub fn metric_rate(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        (self.metric_rate)(t, x)
    }

    pub fn ricci(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        (self.ricci)(t, x)
    }

    /// Conformal factor `(c(t), ċ(t))`.
    pub fn scale_at(&self, t: f64) -> (f64, f64) {
        (self.scale)(t)
    }

    /// Inverse metric; fails with a degeneracy error if `g` is not SPD.
    pub fn metric_inv(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.metric(t, x);
        spd_inverse(&g)
            .ok_or_else(|| CoreError::Degeneracy(format!("metric not SPD at t = {t}, x = {x:?}")))
    }

    // ----- heat-axis scalar reductions -------------------------------------

    /// `g_xx` component along the heat axis.
    pub fn gxx(&self, t: f64, xs: f64) -> f64 {
        let p = self.chart.embed(xs);
        self.metric(t, &p)[(0, 0)]
    }

    /// `√det g` at a heat-axis point (full chart determinant; the angular
    /// suspension factors are 1 on the equatorial embedding).
    pub fn sqrt_det_g(&self, t: f64, xs: f64) -> f64 {
        let p = self.chart.embed(xs);
        let g = self.metric(t, &p);
        let mut det = 1.0;
        for k in 0..g.nrows() {
            det *= g[(k, k)];
        }
        det.sqrt()
    }
}

/// Cholesky-based SPD inverse. Returns `None` when the matrix is not SPD.
pub fn spd_inverse(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(g.clone()).map(|ch| ch.inverse())
}

/// Report of [`validate_family`].
#[derive(Clone, Debug, Serialize)]
pub struct FamilyValidation {
    /// Worst absolute mismatch between `(g(t+ε)−g(t−ε))/(2ε)` and `2h(t)`.
    pub rate_residual: f64,
    /// Worst absolute mismatch between the Ricci callback and the
    /// finite-difference curvature oracle.
    pub ricci_residual: f64,
}

/// Check SPD-ness of the metric, the rate callback against a centred time
/// difference, and the Ricci callback against the curvature oracle at the
/// given sample points.
pub fn validate_family(
    family: &ManifoldFamily,
    times: &[f64],
    points: &[Vec<f64>],
    eps: f64,
) -> Result<FamilyValidation> {
    if eps <= 0.0 {
        return Err(CoreError::Parameter(format!(
            "validation step must be positive, got {eps}"
        )));
    }
    let mut rate_residual: f64 = 0.0;
    let mut ricci_residual: f64 = 0.0;
    for &t in times {
        for x in points {
            let g = family.metric(t, x);
            if spd_inverse(&g).is_none() {
                return Err(CoreError::Degeneracy(format!(
                    "metric not SPD at t = {t}, x = {x:?}"
                )));
            }
            let fd = (family.metric(t + eps, x) - family.metric(t - eps, x)) / (2.0 * eps);
            let diff = fd - family.metric_rate(t, x) * 2.0;
            rate_residual = rate_residual.max(diff.amax());
            let oracle = super::curvature::curvature_oracle(family, t, x, eps)?;
            let rdiff = oracle - family.ricci(t, x);
            ricci_residual = ricci_residual.max(rdiff.amax());
        }
    }
    Ok(FamilyValidation {
        rate_residual,
        ricci_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn conformal_exp_rate_matches_time_difference() {
        let family = ManifoldFamily::conformal(
            ChartKind::Circle {
                period: 2.0 * std::f64::consts::PI,
            },
            TimeScale::ConformalExp { rate: 1.0 },
        )
        .unwrap();
        let t = 0.3;
        let x = [1.2];
        let eps = 1e-5;
        let fd =
            (family.metric(t + eps, &x)[(0, 0)] - family.metric(t - eps, &x)[(0, 0)]) / (2.0 * eps);
        assert_relative_eq!(fd, 2.0 * family.metric_rate(t, &x)[(0, 0)], epsilon = 1e-8);
    }

    #[test]
    fn ricci_flow_sphere_scale_is_one_minus_two_t_on_unit_s2() {
        let scale = TimeScale::ricci_flow_sphere(2, 1.0);
        let (c, cdot) = scale.eval(0.1);
        assert_relative_eq!(c, 0.8, epsilon = 1e-15);
        assert_relative_eq!(cdot, -2.0, epsilon = 1e-15);
    }

    #[test]
    fn shrinking_sphere_is_an_exact_ricci_flow() {
        // On a surface ∂ₜg = −2 Ric means h = −Ric exactly.
        let chart = ChartKind::SpherePolar {
            dim_n: 2,
            theta_min: 0.05,
            radius: 1.0,
        };
        let family =
            ManifoldFamily::conformal(chart, TimeScale::ricci_flow_sphere(2, 1.0)).unwrap();
        let x = [1.0, 0.5];
        for &t in &[0.0, 0.1, 0.2] {
            let h = family.metric_rate(t, &x);
            let ric = family.ricci(t, &x);
            let diff = h + ric;
            assert!(diff.amax() < 1e-14, "h + Ric = {diff}");
        }
    }

    #[test]
    fn heat_axis_weight_on_sphere_is_rn_sin_theta() {
        let chart = ChartKind::SpherePolar {
            dim_n: 2,
            theta_min: 0.05,
            radius: 2.0,
        };
        let family = ManifoldFamily::conformal(chart, TimeScale::Static).unwrap();
        // √det g = r² sinθ for n = 2
        let th: f64 = 0.9;
        assert_relative_eq!(family.sqrt_det_g(0.0, th), 4.0 * th.sin(), epsilon = 1e-14);
    }
}
