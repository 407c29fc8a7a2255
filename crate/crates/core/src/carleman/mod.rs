//! Weight geometry, level sets, cutoffs and numerical checks of the
//! weighted (Carleman) inequalities.

pub mod checks;
pub mod cutoff;
pub mod fields;
pub mod geometry;
pub mod level_sets;

pub use checks::{check_combined_carleman, check_elliptic_carleman, check_parabolic_carleman, RatioReport, SweepPoint};
pub use cutoff::Cutoff;
pub use fields::{random_space_time_field, random_spatial_field};
pub use geometry::{build_weight, CarlemanConfig, CarlemanGeometry, DistanceFunction, InvariantCheck};
pub use level_sets::{build_level_sets, LevelSetDomains, SpaceTimeMask};
