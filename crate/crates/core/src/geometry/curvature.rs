//! Finite-difference curvature oracle and the Bakry–Émery tensor.
//!
//! The oracle differentiates the metric callback only — it never reads the
//! family's Ricci closure or the chart's analytic Christoffels, which is what
//! makes it an independent cross-check:
//!
//! ```text
//! Γ^k_{ij} = ½ g^{kl} (∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})
//! R_{ij}   = ∂_k Γ^k_{ij} − ∂_i Γ^k_{kj} + Γ^k_{kl} Γ^l_{ij} − Γ^k_{il} Γ^l_{kj}
//! ```
//!
//! with centred differences of step ε for every ∂, so the truncation error is
//! O(ε²).

use nalgebra::DMatrix;

use super::chart::ChartKind;
use super::family::{spd_inverse, ManifoldFamily};
use super::potential::PotentialFamily;
use crate::{CoreError, Result};

/// Effective dimension parameter `m` of the Bakry–Émery tensor; `Infinite`
/// drops the `∇φ⊗∇φ/(m−n)` correction.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveDim {
    Finite(f64),
    Infinite,
}

impl EffectiveDim {
    pub fn is_finite(&self) -> bool {
        matches!(self, EffectiveDim::Finite(_))
    }

    /// Finite value or a parameter error mentioning `what`.
    pub fn finite(&self, what: &str) -> Result<f64> {
        match self {
            EffectiveDim::Finite(m) => Ok(*m),
            EffectiveDim::Infinite => Err(CoreError::Parameter(format!(
                "{what} requires a finite effective dimension m"
            ))),
        }
    }
}

impl std::fmt::Display for EffectiveDim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EffectiveDim::Finite(m) => write!(f, "{m}"),
            EffectiveDim::Infinite => write!(f, "inf"),
        }
    }
}

fn shifted(x: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[axis] += delta;
    y
}

fn check_stencil(chart: &ChartKind, x: &[f64], eps: f64) -> Result<()> {
    let d = chart.dim();
    if x.len() != d {
        return Err(CoreError::Shape(format!(
            "point has {} coords, chart needs {d}",
            x.len()
        )));
    }
    for axis in 0..d {
        for &delta in &[-2.0 * eps, 2.0 * eps] {
            let y = shifted(x, axis, delta);
            if !chart.contains(&y) {
                return Err(CoreError::Domain(format!(
                    "finite-difference stencil of step {eps} leaves the chart at {y:?}"
                )));
            }
        }
    }
    Ok(())
}

/// Christoffel symbols from centred differences of the metric callback,
/// flattened as `gamma[(k*d + i)*d + j]`.
pub fn christoffel_fd(family: &ManifoldFamily, t: f64, x: &[f64], eps: f64) -> Result<Vec<f64>> {
    let d = family.dim_n();
    let g = family.metric(t, x);
    let g_inv = spd_inverse(&g)
        .ok_or_else(|| CoreError::Degeneracy(format!("metric not SPD at t = {t}, x = {x:?}")))?;
    // dg[l][i][j] = ∂_l g_ij
    let mut dg = vec![0.0; d * d * d];
    for l in 0..d {
        let gp = family.metric(t, &shifted(x, l, eps));
        let gm = family.metric(t, &shifted(x, l, -eps));
        for i in 0..d {
            for j in 0..d {
                dg[(l * d + i) * d + j] = (gp[(i, j)] - gm[(i, j)]) / (2.0 * eps);
            }
        }
    }
    let mut gamma = vec![0.0; d * d * d];
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut sum = 0.0;
                for l in 0..d {
                    sum += g_inv[(k, l)]
                        * (dg[(i * d + j) * d + l] + dg[(j * d + i) * d + l]
                            - dg[(l * d + i) * d + j]);
                }
                gamma[(k * d + i) * d + j] = 0.5 * sum;
            }
        }
    }
    Ok(gamma)
}

/// Ricci tensor from nested centred differences of the metric callback.
///
/// Fails with a domain error when the double stencil leaves the chart and a
/// degeneracy error when the metric is not SPD anywhere on the stencil.
pub fn curvature_oracle(
    family: &ManifoldFamily,
    t: f64,
    x: &[f64],
    eps: f64,
) -> Result<DMatrix<f64>> {
    if eps <= 0.0 {
        return Err(CoreError::Parameter(format!(
            "oracle step must be positive, got {eps}"
        )));
    }
    check_stencil(&family.chart, x, eps)?;
    let d = family.dim_n();
    let gamma0 = christoffel_fd(family, t, x, eps)?;
    // dgamma[l][k][i][j] = ∂_l Γ^k_ij
    let mut dgamma = vec![0.0; d * d * d * d];
    for l in 0..d {
        let gp = christoffel_fd(family, t, &shifted(x, l, eps), eps)?;
        let gm = christoffel_fd(family, t, &shifted(x, l, -eps), eps)?;
        for idx in 0..d * d * d {
            dgamma[l * d * d * d + idx] = (gp[idx] - gm[idx]) / (2.0 * eps);
        }
    }
    let gam = |k: usize, i: usize, j: usize| gamma0[(k * d + i) * d + j];
    let dgam = |l: usize, k: usize, i: usize, j: usize| dgamma[((l * d + k) * d + i) * d + j];
    let mut ric = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut val = 0.0;
            for k in 0..d {
                val += dgam(k, k, i, j) - dgam(i, k, k, j);
                for l in 0..d {
                    val += gam(k, k, l) * gam(l, i, j) - gam(k, i, l) * gam(l, k, j);
                }
            }
            ric[(i, j)] = val;
        }
    }
    // Symmetrize: the formula is symmetric analytically; this removes the
    // antisymmetric part of the finite-difference noise.
    let ric_t = ric.transpose();
    Ok((ric + ric_t) * 0.5)
}

/// Bakry–Émery tensor
/// `Ric_{m,n}(L) = Ric + ∇²φ − ∇φ⊗∇φ/(m−n)` (lower indices), with the last
/// term dropped for `m = ∞`.
///
/// Contract: `m > n` strictly, or `m = n` with an identically zero potential
/// (the correction is then 0/0 and defined as 0); anything else is a
/// parameter error.
pub fn bakry_emery_ricci(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    m: EffectiveDim,
    t: f64,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    let n = family.dim_n() as f64;
    let ric = family.ricci(t, x);
    let hess = pot.hess_phi(t, x);
    let base = ric + hess;
    match m {
        EffectiveDim::Infinite => Ok(base),
        EffectiveDim::Finite(m) => {
            if m < n {
                return Err(CoreError::Parameter(format!(
                    "effective dimension m = {m} must be >= manifold dimension n = {n}"
                )));
            }
            if (m - n).abs() < f64::EPSILON * n.max(1.0) {
                if pot.is_zero() {
                    return Ok(base);
                }
                return Err(CoreError::Parameter(
                    "m = n is only admissible for the zero potential".into(),
                ));
            }
            let dphi = pot.dphi(t, x);
            let d = family.dim_n();
            let mut corr = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    corr[(i, j)] = dphi[i] * dphi[j] / (m - n);
                }
            }
            Ok(base - corr)
        }
    }
}
