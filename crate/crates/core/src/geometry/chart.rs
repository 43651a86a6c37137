//! Model charts. Every family in the lab lives on one of four charts:
//!
//! * `Circle { period }` — flat circle of circumference `period`, coordinate
//!   `x ∈ [0, period)`;
//! * `Torus { periods }` — flat d-torus, one periodic coordinate per entry;
//! * `Line { x_min, x_max }` — truncation window of the real line with
//!   reflecting (Neumann) walls for the heat solver;
//! * `SpherePolar { dim_n, theta_min, radius }` — round n-sphere of radius
//!   `radius` in hyperspherical coordinates `(θ, φ₁, …, φ_{n−1})` with the
//!   polar caps `θ < θ_min` and `θ > π − θ_min` excluded; rotationally
//!   symmetric data only depends on θ, which is the heat axis.
//!
//! The base metric `ĝ(x)` below is time independent; time dependence enters
//! through a conformal factor `c(t)` owned by the family ([`super::family`]).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{CoreError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartKind {
    Circle {
        period: f64,
    },
    Torus {
        periods: Vec<f64>,
    },
    Line {
        x_min: f64,
        x_max: f64,
    },
    SpherePolar {
        dim_n: usize,
        theta_min: f64,
        radius: f64,
    },
}

/// Boundary treatment of the one-dimensional heat axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Periodic,
    /// Reflecting walls: zero weighted flux through both ends.
    NeumannWalls,
}

impl ChartKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            ChartKind::Circle { period } => {
                if !period.is_finite() || *period <= 0.0 {
                    return Err(CoreError::Parameter(format!(
                        "circle period must be positive, got {period}"
                    )));
                }
            }
            ChartKind::Torus { periods } => {
                if periods.is_empty() {
                    return Err(CoreError::Parameter(
                        "torus needs at least one period".into(),
                    ));
                }
                if periods.iter().any(|p| !p.is_finite() || *p <= 0.0) {
                    return Err(CoreError::Parameter(format!(
                        "torus periods must be positive, got {periods:?}"
                    )));
                }
            }
            ChartKind::Line { x_min, x_max } => {
                if !(x_max > x_min) {
                    return Err(CoreError::Parameter(format!(
                        "line window must satisfy x_min < x_max, got [{x_min}, {x_max}]"
                    )));
                }
            }
            ChartKind::SpherePolar {
                dim_n,
                theta_min,
                radius,
            } => {
                if *dim_n < 2 {
                    return Err(CoreError::Parameter(format!(
                        "sphere chart needs dim_n >= 2, got {dim_n}"
                    )));
                }
                if !(*theta_min > 0.0 && *theta_min < PI / 2.0) {
                    return Err(CoreError::Parameter(format!(
                        "theta_min must lie in (0, pi/2), got {theta_min}"
                    )));
                }
                if !radius.is_finite() || *radius <= 0.0 {
                    return Err(CoreError::Parameter(format!(
                        "sphere radius must be positive, got {radius}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of chart coordinates (= manifold dimension n for these models).
    pub fn dim(&self) -> usize {
        match self {
            ChartKind::Circle { .. } | ChartKind::Line { .. } => 1,
            ChartKind::Torus { periods } => periods.len(),
            ChartKind::SpherePolar { dim_n, .. } => *dim_n,
        }
    }

    /// Is the point inside the chart's valid region (stencil-safe)?
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            ChartKind::Circle { .. } | ChartKind::Torus { .. } => true,
            ChartKind::Line { x_min, x_max } => x[0] >= *x_min && x[0] <= *x_max,
            ChartKind::SpherePolar {
                dim_n, theta_min, ..
            } => {
                if !(x[0] >= *theta_min && x[0] <= PI - *theta_min) {
                    return false;
                }
                // The intermediate hyperspherical angles must stay away from
                // their own axes so that the metric remains nondegenerate.
                for j in 1..dim_n - 1 {
                    if !(x[j] > 0.0 && x[j] < PI) {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Base metric `ĝ(x)` (before the family's conformal time factor).
    pub fn base_metric(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        match self {
            ChartKind::Circle { .. } | ChartKind::Line { .. } | ChartKind::Torus { .. } => {
                DMatrix::identity(d, d)
            }
            ChartKind::SpherePolar { radius, .. } => {
                let mut g = DMatrix::zeros(d, d);
                let r2 = radius * radius;
                let mut s = 1.0;
                for k in 0..d {
                    g[(k, k)] = r2 * s;
                    let sk = x[k].sin();
                    s *= sk * sk;
                }
                g
            }
        }
    }

    /// Ricci tensor of the base metric (hence of every conformal-in-time
    /// rescaling of it: Ricci is invariant under constant scaling).
    pub fn base_ricci(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        match self {
            ChartKind::Circle { .. } | ChartKind::Line { .. } | ChartKind::Torus { .. } => {
                DMatrix::zeros(d, d)
            }
            ChartKind::SpherePolar { dim_n, radius, .. } => {
                let factor = (*dim_n as f64 - 1.0) / (radius * radius);
                self.base_metric(x) * factor
            }
        }
    }

    /// Christoffel symbols `Γ^k_{ij}` of the base metric, flattened as
    /// `gamma[(k * d + i) * d + j]`. A conformal time factor does not change
    /// the connection, so these serve every family on this chart.
    pub fn christoffel(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut gamma = vec![0.0; d * d * d];
        if let ChartKind::SpherePolar { .. } = self {
            // diag ĝ_kk = r² Π_{j<k} sin²x_j gives
            //   Γ^k_{kj} = Γ^k_{jk} = cot x_j          (j < k)
            //   Γ^j_{kk} = −sin x_j cos x_j Π_{j<l<k} sin²x_l   (j < k)
            for k in 0..d {
                for j in 0..k {
                    let cot = x[j].cos() / x[j].sin();
                    gamma[(k * d + k) * d + j] = cot;
                    gamma[(k * d + j) * d + k] = cot;
                    let mut prod = 1.0;
                    for l in j + 1..k {
                        let s = x[l].sin();
                        prod *= s * s;
                    }
                    gamma[(j * d + k) * d + k] = -x[j].sin() * x[j].cos() * prod;
                }
            }
        }
        gamma
    }

    // ----- heat-axis helpers (1D reductions) -------------------------------

    pub fn boundary(&self) -> BoundaryKind {
        match self {
            ChartKind::Circle { .. } | ChartKind::Torus { .. } => BoundaryKind::Periodic,
            ChartKind::Line { .. } | ChartKind::SpherePolar { .. } => BoundaryKind::NeumannWalls,
        }
    }

    /// Heat-axis window `(x0, x1, periodic)`. For the periodic charts the
    /// right endpoint identifies with the left one.
    pub fn heat_window(&self) -> Result<(f64, f64, bool)> {
        match self {
            ChartKind::Circle { period } => Ok((0.0, *period, true)),
            ChartKind::Torus { periods } => {
                if periods.len() != 1 {
                    return Err(CoreError::Domain(
                        "heat solves use one-dimensional reductions; a d>=2 torus has no heat axis"
                            .into(),
                    ));
                }
                Ok((0.0, periods[0], true))
            }
            ChartKind::Line { x_min, x_max } => Ok((*x_min, *x_max, false)),
            ChartKind::SpherePolar { theta_min, .. } => Ok((*theta_min, PI - *theta_min, false)),
        }
    }

    /// Embed a heat-axis coordinate into a full chart point. For the sphere
    /// the remaining angles sit on the equator of each suspension so every
    /// metric factor `sin²` evaluates to 1 and rotational symmetry makes the
    /// choice immaterial.
    pub fn embed(&self, xs: f64) -> Vec<f64> {
        let d = self.dim();
        match self {
            ChartKind::SpherePolar { .. } => {
                let mut p = vec![PI / 2.0; d];
                p[0] = xs;
                p
            }
            _ => vec![xs; d.max(1)],
        }
    }

    /// Wrap a heat-axis coordinate into the fundamental window (periodic
    /// charts only; other charts return the input unchanged).
    pub fn wrap_axis(&self, xs: f64) -> f64 {
        match self {
            ChartKind::Circle { period } => xs.rem_euclid(*period),
            ChartKind::Torus { periods } if periods.len() == 1 => xs.rem_euclid(periods[0]),
            _ => xs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_base_metric_is_round() {
        let chart = ChartKind::SpherePolar {
            dim_n: 2,
            theta_min: 0.05,
            radius: 1.0,
        };
        let g = chart.base_metric(&[1.0, 0.7]);
        assert_relative_eq!(g[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(g[(1, 1)], 1.0f64.sin().powi(2), epsilon = 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn sphere_christoffels_match_closed_form_on_s2() {
        let chart = ChartKind::SpherePolar {
            dim_n: 2,
            theta_min: 0.05,
            radius: 1.0,
        };
        let th: f64 = 1.1;
        let gamma = chart.christoffel(&[th, 0.3]);
        let d = 2;
        // Γ^θ_{φφ} = −sinθ cosθ, Γ^φ_{θφ} = cotθ
        assert_relative_eq!(
            gamma[(0 * d + 1) * d + 1],
            -th.sin() * th.cos(),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            gamma[(1 * d + 0) * d + 1],
            th.cos() / th.sin(),
            epsilon = 1e-14
        );
        assert_eq!(gamma[(0 * d + 0) * d + 0], 0.0);
    }

    #[test]
    fn flat_charts_have_zero_christoffels_and_ricci() {
        let chart = ChartKind::Torus {
            periods: vec![1.0, 2.0],
        };
        assert!(chart.christoffel(&[0.3, 0.4]).iter().all(|&v| v == 0.0));
        assert!(chart.base_ricci(&[0.3, 0.4]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sphere_band_membership() {
        let chart = ChartKind::SpherePolar {
            dim_n: 2,
            theta_min: 0.05,
            radius: 1.0,
        };
        assert!(chart.contains(&[0.05, 0.0]));
        assert!(chart.contains(&[PI - 0.05, 3.0]));
        assert!(!chart.contains(&[0.01, 0.0]));
        assert!(!chart.contains(&[PI, 0.0]));
    }

    #[test]
    fn invalid_charts_are_rejected() {
        assert!(ChartKind::Circle { period: -1.0 }.validate().is_err());
        assert!(ChartKind::Line {
            x_min: 1.0,
            x_max: 1.0
        }
        .validate()
        .is_err());
        assert!(ChartKind::SpherePolar {
            dim_n: 1,
            theta_min: 0.05,
            radius: 1.0
        }
        .validate()
        .is_err());
    }
}
