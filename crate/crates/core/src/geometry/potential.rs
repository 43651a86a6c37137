//! Potential families `φ(t, x)` for the drift term of `L = Δ − ∇φ·∇`.
//!
//! A family carries the scalar, its lower-index coordinate differential
//! `(dφ)_i = ∂_i φ`, the covariant Hessian `∇²φ_{ij} = ∂_i∂_j φ − Γ^k_{ij}∂_kφ`
//! (assembled with the chart's analytic Christoffels) and `∂ₜφ`. The raised
//! gradient `∇φ = g⁻¹ dφ` is exposed through the metric family captured at
//! construction time.
//!
//! Bundled presets are axisymmetric — they depend on the heat-axis coordinate
//! only — which is what the one-dimensional reductions of the heat solver and
//! the diffusion sampler require.

use nalgebra::DMatrix;
use std::sync::Arc;

use super::family::ManifoldFamily;
use crate::{CoreError, Result};

type ScalarFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// `(value, d/dxs, d²/dxs², ∂/∂t)` of an axisymmetric scalar profile at
/// `(t, xs)` where `xs` is the heat-axis coordinate.
pub type AxisProfile = Arc<dyn Fn(f64, f64) -> (f64, f64, f64, f64) + Send + Sync>;

#[derive(Clone)]
pub struct PotentialFamily {
    family: ManifoldFamily,
    profile: AxisProfile,
    is_zero: bool,
}

impl PotentialFamily {
    /// Identically zero potential (makes `L` the plain Laplace–Beltrami
    /// operator and allows `m = n`).
    pub fn zero(family: &ManifoldFamily) -> Self {
        PotentialFamily {
            family: family.clone(),
            profile: Arc::new(|_t, _x| (0.0, 0.0, 0.0, 0.0)),
            is_zero: true,
        }
    }

    /// Axisymmetric potential from a `(value, d/dx, d²/dx², ∂ₜ)` profile.
    pub fn from_axis_profile(family: &ManifoldFamily, profile: AxisProfile) -> Self {
        PotentialFamily {
            family: family.clone(),
            profile,
            is_zero: false,
        }
    }

    /// `φ = a·x²/2 + slope·t` on a line chart (the Ornstein–Uhlenbeck well
    /// for `a = 1`).
    pub fn quadratic(family: &ManifoldFamily, a: f64, time_slope: f64) -> Result<Self> {
        use super::chart::ChartKind;
        if !matches!(family.chart, ChartKind::Line { .. }) {
            return Err(CoreError::Parameter(
                "quadratic potential is only defined on line charts".into(),
            ));
        }
        Ok(Self::from_axis_profile(
            family,
            Arc::new(move |t, x| (0.5 * a * x * x + time_slope * t, a * x, a, time_slope)),
        ))
    }

    /// `φ = amp·cos(k·x) + slope·t` where `k` makes one full wave per period
    /// on periodic charts, `k = 1` on a line, and the profile is `amp·cos θ`
    /// (a first spherical harmonic) on sphere charts.
    pub fn cosine(family: &ManifoldFamily, amp: f64, time_slope: f64) -> Result<Self> {
        use super::chart::ChartKind;
        let k = match &family.chart {
            ChartKind::Circle { period } => std::f64::consts::TAU / period,
            ChartKind::Torus { periods } if periods.len() == 1 => {
                std::f64::consts::TAU / periods[0]
            }
            ChartKind::Torus { .. } => {
                return Err(CoreError::Parameter(
                    "cosine potential needs a one-dimensional heat axis".into(),
                ))
            }
            ChartKind::Line { .. } | ChartKind::SpherePolar { .. } => 1.0,
        };
        Ok(Self::from_axis_profile(
            family,
            Arc::new(move |t, x| {
                (
                    amp * (k * x).cos() + time_slope * t,
                    -amp * k * (k * x).sin(),
                    -amp * k * k * (k * x).cos(),
                    time_slope,
                )
            }),
        ))
    }

    /// Sample-table potential on a line chart, interpolated with a natural
    /// cubic spline so that the Hessian stays continuous.
    pub fn table(
        family: &ManifoldFamily,
        xs: &[f64],
        phis: &[f64],
        time_slope: f64,
    ) -> Result<Self> {
        use super::chart::ChartKind;
        if !matches!(family.chart, ChartKind::Line { .. }) {
            return Err(CoreError::Parameter(
                "table potentials are only supported on line charts".into(),
            ));
        }
        let spline = NaturalSpline::fit(xs, phis)?;
        Ok(Self::from_axis_profile(
            family,
            Arc::new(move |t, x| {
                let (v, d1, d2) = spline.eval(x);
                (v + time_slope * t, d1, d2, time_slope)
            }),
        ))
    }

    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    pub fn phi(&self, t: f64, x: &[f64]) -> f64 {
        (self.profile)(t, x[0]).0
    }

    /// Lower-index differential `(∂_i φ)_i`; only the heat-axis component is
    /// nonzero for axisymmetric families.
    pub fn dphi(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.family.dim_n()];
        v[0] = (self.profile)(t, x[0]).1;
        v
    }

    /// Raised gradient `∇φ = g⁻¹ dφ`.
    pub fn grad_phi(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let ginv = self.family.metric_inv(t, x)?;
        let dphi = self.dphi(t, x);
        let d = dphi.len();
        let mut out = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                out[i] += ginv[(i, j)] * dphi[j];
            }
        }
        Ok(out)
    }

    /// Covariant Hessian `∇²φ_{ij} = ∂_i∂_jφ − Γ^k_{ij} ∂_kφ` with the
    /// chart's analytic Christoffels.
    pub fn hess_phi(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let d = self.family.dim_n();
        let (_, d1, d2, _) = (self.profile)(t, x[0]);
        let gamma = self.family.chart.christoffel(x);
        let mut hess = DMatrix::zeros(d, d);
        hess[(0, 0)] = d2;
        for i in 0..d {
            for j in 0..d {
                // only ∂_0 φ is nonzero, so the correction is −Γ^0_{ij} d1
                hess[(i, j)] -= gamma[(0 * d + i) * d + j] * d1;
            }
        }
        hess
    }

    pub fn dphi_dt(&self, t: f64, x: &[f64]) -> f64 {
        (self.profile)(t, x[0]).3
    }

    // ----- heat-axis scalar accessors --------------------------------------

    pub fn phi_axis(&self, t: f64, xs: f64) -> f64 {
        (self.profile)(t, xs).0
    }

    pub fn dphi_axis(&self, t: f64, xs: f64) -> f64 {
        (self.profile)(t, xs).1
    }

    /// Space-time closure form used by identity residual checks.
    pub fn profile_at(&self, t: f64, xs: f64) -> (f64, f64, f64, f64) {
        (self.profile)(t, xs)
    }

    /// Generic scalar view `(t, x) -> φ` for validators.
    pub fn as_scalar_fn(&self) -> ScalarFn {
        let profile = self.profile.clone();
        Arc::new(move |t, x: &[f64]| profile(t, x[0]).0)
    }
}

/// Worst finite-difference mismatches of a potential family's callbacks.
#[derive(Clone, Debug)]
pub struct PotentialValidation {
    pub dphi_residual: f64,
    pub hess_residual: f64,
    pub dt_residual: f64,
}

/// Check `dφ`, the covariant Hessian (with Christoffel correction) and `∂ₜφ`
/// against centred differences of the scalar callback.
pub fn validate_potential(
    family: &ManifoldFamily,
    pot: &PotentialFamily,
    times: &[f64],
    points: &[Vec<f64>],
    eps: f64,
) -> Result<PotentialValidation> {
    if eps <= 0.0 {
        return Err(CoreError::Parameter(format!(
            "validation step must be positive, got {eps}"
        )));
    }
    let d = family.dim_n();
    let phi = |t: f64, x: &[f64]| pot.phi(t, x);
    let mut dphi_residual: f64 = 0.0;
    let mut hess_residual: f64 = 0.0;
    let mut dt_residual: f64 = 0.0;
    for &t in times {
        for x in points {
            let dphi = pot.dphi(t, x);
            let hess = pot.hess_phi(t, x);
            let gamma = family.chart.christoffel(x);
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += eps;
                xm[i] -= eps;
                let fd = (phi(t, &xp) - phi(t, &xm)) / (2.0 * eps);
                dphi_residual = dphi_residual.max((fd - dphi[i]).abs());
                for j in 0..d {
                    let dij = if i == j {
                        (phi(t, &xp) - 2.0 * phi(t, x) + phi(t, &xm)) / (eps * eps)
                    } else {
                        let mut xpp = x.clone();
                        let mut xpm = x.clone();
                        let mut xmp = x.clone();
                        let mut xmm = x.clone();
                        xpp[i] += eps;
                        xpp[j] += eps;
                        xpm[i] += eps;
                        xpm[j] -= eps;
                        xmp[i] -= eps;
                        xmp[j] += eps;
                        xmm[i] -= eps;
                        xmm[j] -= eps;
                        (phi(t, &xpp) - phi(t, &xpm) - phi(t, &xmp) + phi(t, &xmm))
                            / (4.0 * eps * eps)
                    };
                    let mut cov = dij;
                    for k in 0..d {
                        cov -= gamma[(k * d + i) * d + j] * dphi[k];
                    }
                    hess_residual = hess_residual.max((cov - hess[(i, j)]).abs());
                }
            }
            let fdt = (phi(t + eps, x) - phi(t - eps, x)) / (2.0 * eps);
            dt_residual = dt_residual.max((fdt - pot.dphi_dt(t, x)).abs());
        }
    }
    Ok(PotentialValidation {
        dphi_residual,
        hess_residual,
        dt_residual,
    })
}

/// Natural cubic spline through strictly increasing knots.
#[derive(Clone)]
struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m2: Vec<f64>,
}

impl NaturalSpline {
    fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(CoreError::Shape(format!(
                "spline table needs >= 3 matching knots, got {} x and {} phi",
                n,
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::Parameter(
                "spline knots must be strictly increasing".into(),
            ));
        }
        // Tridiagonal system for interior second derivatives; natural ends.
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 1.0;
        diag[n - 1] = 1.0;
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            sub[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            sup[i] = h1 / 6.0;
            rhs[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
        }
        // Thomas elimination.
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m2 = vec![0.0; n];
        m2[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m2[i] = (rhs[i] - sup[i] * m2[i + 1]) / diag[i];
        }
        Ok(NaturalSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m2,
        })
    }

    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.xs.len();
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.m2[i], self.m2[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 =
            (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2 = a * m0 + b * m1;
        (v, d1, d2)
    }
}
