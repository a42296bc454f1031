//! Target measures, source atom clouds, and their multilevel hierarchies.

mod hierarchy;
mod io;
mod kmeans;
mod types;

pub use hierarchy::{build_source_hierarchy, build_target_hierarchy, SourceHierarchy, TargetHierarchy};
pub use io::{
    format_point_cloud, load_point_cloud, load_source_hierarchy, load_target_hierarchy,
    parse_point_cloud, read_manifest, validate_measure, write_point_cloud, write_source,
    write_source_hierarchy, write_target, write_target_hierarchy, MeasureDiagnostics, PointCloud,
    MANIFEST,
};
pub use kmeans::{kmeans, Clustering};
pub use types::{SourceAtoms, TargetMeasure, MASS_TOL};

