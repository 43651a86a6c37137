//! Model manifolds: charts, time-dependent metric families, potentials,
//! the finite-difference curvature oracle, geodesic distances and certified
//! cutoff profiles.

pub mod chart;
pub mod curvature;
pub mod cutoff;
pub mod distance;
pub mod family;
pub mod potential;

pub use chart::{BoundaryKind, ChartKind};
pub use curvature::{bakry_emery_ricci, christoffel_fd, curvature_oracle, EffectiveDim};
pub use cutoff::CutoffProfile;
pub use distance::{distance, distance_rate};
pub use family::{spd_inverse, validate_family, ManifoldFamily, TimeScale};
pub use potential::{validate_potential, PotentialFamily};
