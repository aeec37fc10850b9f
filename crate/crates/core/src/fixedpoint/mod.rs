//! Fixed points, their indices, periodic orbits and drift of orbits.

pub mod drift;
pub mod index;
pub mod periodic;
pub mod search;

pub use drift::{drift_classification, sample_grid, DriftClass, DriftTag, DriftThresholds, DriftVerdict};
pub use index::{band_index_sum, displacement, fixed_point_index, winding_number, WindingOptions, WindingReport};
pub use periodic::{find_periodic_orbit, PeriodicOrbitRecord, PeriodicSearch};
pub use search::{
    find_fixed_points, fundamental_region, lefschetz_sum, refine_zero, DegenerateComponent, FixedPointRecord,
    FixedPointSearch,
};
