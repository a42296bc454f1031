//! Barycenters, registration maps, and blue noise on the sphere.

mod barycenter;
mod register;
mod sphere;

pub use barycenter::{
    barycenter_general, barycenter_general_step, barycenter_lloyd, format_trace, BarycenterConfig,
    BarycenterResult, BarycenterSource, OuterIterate, sample_support,
};
pub use register::{register, Registration, SNAPSHOT_TIMES};
pub use sphere::{
    blue_noise_sphere, icosphere, riemannian_barycenter, sphere_atoms, BlueNoiseConfig, BlueNoiseResult,
    RiemannianOutcome, RiemannianParams, SphereDensity, SphereManifold, ANTIPODAL_MARGIN,
};
