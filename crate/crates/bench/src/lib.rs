//! Fixtures shared by the benchmarks.

use cat1lab::{
    enumerate_orbit, estimate_alpha, shell_measure, BinnedMeasure, BoundaryPartition, DiskPoint,
    GroupModel, OrbitCatalog,
};

/// Reference catalog to `depth` with its estimated exponent.
pub fn reference_catalog(depth: f64) -> (OrbitCatalog, f64) {
    let cat = enumerate_orbit(&GroupModel::reference(), DiskPoint::ORIGIN, depth).expect("catalog");
    let alpha = estimate_alpha(&cat).expect("exponent").alpha;
    (cat, alpha)
}

/// Normalized shell measure of `cat` on `bins` bins.
pub fn shell(cat: &OrbitCatalog, alpha: f64, bins: usize) -> BinnedMeasure {
    let part = BoundaryPartition::new(bins).expect("bin count");
    shell_measure(cat, alpha, 1.0, part)
        .expect("shell measure")
        .normalized()
}
