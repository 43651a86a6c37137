//! Geodesic distance `d_t(x, y)` and its time derivative on the model charts.
//!
//! All bundled families are conformal in time, `g(t) = c(t)·ĝ`, so the
//! distance is `√c(t)` times a closed-form base distance: wrap-around on the
//! circle/torus, `|x−y|` on the line, and the great-circle arc on the sphere.
//!
//! The rate is evaluated from the variation formula
//! `∂ₜ d = ∫ h(S, S) ds` along the unit-speed minimal geodesic, by Simpson
//! quadrature of the metric-rate callback — not from the conformal shortcut —
//! so it stays honest for hand-built families and is cross-checkable against
//! a centred time difference of the distance itself.

use super::chart::ChartKind;
use super::family::ManifoldFamily;
use crate::{CoreError, Result};

/// Number of Simpson intervals for the rate quadrature. The bundled
/// integrands are constant along the geodesic, so any even count is exact;
/// 64 keeps hand-built x-dependent rates accurate to O(n⁻⁴).
const SIMPSON_INTERVALS: usize = 64;

fn wrapped_delta(delta: f64, period: f64) -> f64 {
    // signed representative of `delta` in (−period/2, period/2]
    let mut d = delta.rem_euclid(period);
    if d > period / 2.0 {
        d -= period;
    }
    d
}

/// 3D unit-sphere embedding used for great-circle interpolation on S².
fn s2_embed(p: &[f64]) -> [f64; 3] {
    let (th, ph) = (p[0], p[1]);
    [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
}

fn s2_chart(v: [f64; 3]) -> Vec<f64> {
    let th = v[2].clamp(-1.0, 1.0).acos();
    let ph = v[1].atan2(v[0]);
    vec![th, ph]
}

/// Base-chart description of the minimal geodesic from `x` to `y`:
/// a sampler `γ(σ)`, `σ ∈ [0, 1]`, plus the base length.
struct BaseGeodesic {
    sample: Box<dyn Fn(f64) -> Vec<f64>>,
    base_length: f64,
}

fn base_geodesic(chart: &ChartKind, x: &[f64], y: &[f64]) -> Result<BaseGeodesic> {
    let d = chart.dim();
    if x.len() != d || y.len() != d {
        return Err(CoreError::Shape(format!(
            "points have {} / {} coords, chart needs {d}",
            x.len(),
            y.len()
        )));
    }
    match chart {
        ChartKind::Circle { period } => {
            let delta = wrapped_delta(y[0] - x[0], *period);
            let x0 = x[0];
            Ok(BaseGeodesic {
                sample: Box::new(move |s| vec![x0 + s * delta]),
                base_length: delta.abs(),
            })
        }
        ChartKind::Torus { periods } => {
            let deltas: Vec<f64> = periods
                .iter()
                .zip(x.iter().zip(y.iter()))
                .map(|(p, (a, b))| wrapped_delta(b - a, *p))
                .collect();
            let len = deltas.iter().map(|d| d * d).sum::<f64>().sqrt();
            let x0 = x.to_vec();
            Ok(BaseGeodesic {
                sample: Box::new(move |s| {
                    x0.iter()
                        .zip(deltas.iter())
                        .map(|(a, d)| a + s * d)
                        .collect()
                }),
                base_length: len,
            })
        }
        ChartKind::Line { .. } => {
            let (x0, y0) = (x[0], y[0]);
            Ok(BaseGeodesic {
                sample: Box::new(move |s| vec![x0 + s * (y0 - x0)]),
                base_length: (y0 - x0).abs(),
            })
        }
        ChartKind::SpherePolar { dim_n, radius, .. } => {
            let angular_equal = x
                .iter()
                .zip(y.iter())
                .skip(1)
                .all(|(a, b)| (a - b).abs() < 1e-12);
            if angular_equal {
                // both points on one meridian: θ interpolates linearly
                let x0 = x.to_vec();
                let dth = y[0] - x[0];
                let r = *radius;
                return Ok(BaseGeodesic {
                    sample: Box::new(move |s| {
                        let mut p = x0.clone();
                        p[0] += s * dth;
                        p
                    }),
                    base_length: r * dth.abs(),
                });
            }
            if *dim_n != 2 {
                return Err(CoreError::DistanceUnavailable(format!(
                    "sphere chart with n = {dim_n}: closed-form geodesics are implemented for \
                     same-meridian pairs (any n) and for general pairs on n = 2 only"
                )));
            }
            // general S² pair: great-circle slerp through the 3D embedding
            let a = s2_embed(x);
            let b = s2_embed(y);
            let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
            let omega = dot.acos();
            let r = *radius;
            if omega < 1e-14 {
                let x0 = x.to_vec();
                return Ok(BaseGeodesic {
                    sample: Box::new(move |_s| x0.clone()),
                    base_length: 0.0,
                });
            }
            if (std::f64::consts::PI - omega).abs() < 1e-12 {
                return Err(CoreError::DistanceUnavailable(
                    "antipodal pair on S²: minimal geodesic is not unique".into(),
                ));
            }
            let sin_omega = omega.sin();
            Ok(BaseGeodesic {
                sample: Box::new(move |s| {
                    let ca = ((1.0 - s) * omega).sin() / sin_omega;
                    let cb = (s * omega).sin() / sin_omega;
                    s2_chart([
                        ca * a[0] + cb * b[0],
                        ca * a[1] + cb * b[1],
                        ca * a[2] + cb * b[2],
                    ])
                }),
                base_length: r * omega,
            })
        }
    }
}

/// Geodesic distance `d_t(x, y)` under `g(t) = c(t)·ĝ`.
pub fn distance(family: &ManifoldFamily, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let geo = base_geodesic(&family.chart, x, y)?;
    let (c, _) = family.scale_at(t);
    if !(c > 0.0) {
        return Err(CoreError::Degeneracy(format!(
            "conformal factor c({t}) = {c} is not positive"
        )));
    }
    Ok(c.sqrt() * geo.base_length)
}

/// `∂ₜ d_t(x, y) = ∫ h(S, S) ds` along the minimal `g(t)`-unit-speed geodesic.
pub fn distance_rate(family: &ManifoldFamily, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let geo = base_geodesic(&family.chart, x, y)?;
    if geo.base_length == 0.0 {
        return Ok(0.0);
    }
    let d = family.dim_n();
    let n_iv = SIMPSON_INTERVALS;
    let dsig = 1.0 / n_iv as f64;
    // integrand(σ) = h(γ′, γ′)/|γ′|_g  so that ∫…dσ = ∫ h(S,S) ds
    let integrand = |sigma: f64| -> Result<f64> {
        let p = (geo.sample)(sigma);
        // chart-coordinate tangent by a centred difference of the sampler
        let dq = 1e-6;
        let (s0, s1) = if sigma < dq {
            (sigma, sigma + dq)
        } else if sigma > 1.0 - dq {
            (sigma - dq, sigma)
        } else {
            (sigma - dq, sigma + dq)
        };
        let pa = (geo.sample)(s0);
        let pb = (geo.sample)(s1);
        let v: Vec<f64> = pa
            .iter()
            .zip(pb.iter())
            .map(|(a, b)| (b - a) / (s1 - s0))
            .collect();
        let g = family.metric(t, &p);
        let h = family.metric_rate(t, &p);
        let mut vgv = 0.0;
        let mut vhv = 0.0;
        for i in 0..d {
            for j in 0..d {
                vgv += v[i] * g[(i, j)] * v[j];
                vhv += v[i] * h[(i, j)] * v[j];
            }
        }
        if !(vgv > 0.0) {
            return Err(CoreError::Degeneracy(format!(
                "tangent has nonpositive g-norm at σ = {sigma}"
            )));
        }
        Ok(vhv / vgv.sqrt())
    };
    let mut acc = integrand(0.0)? + integrand(1.0)?;
    for k in 1..n_iv {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(k as f64 * dsig)?;
    }
    Ok(acc * dsig / 3.0)
}
