use thiserror::Error;

/// Errors raised by the geometry, group, measure and representation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({re}, {im}) is not strictly inside the unit disk")]
    NotInterior { re: f64, im: f64 },
    #[error("Gromov product of a boundary point with itself is infinite")]
    DegenerateBoundaryPair,
    #[error("points are coincident (distance {0:e})")]
    CoincidentPoints(f64),
    #[error("boundary disks {first} and {second} overlap")]
    DisksOverlap { first: usize, second: usize },
    #[error("boundary disk {index} has angular radius {radius} outside (0, pi/2)")]
    DegenerateDisk { index: usize, radius: f64 },
    #[error("expected a positive even number of boundary disks, got {0}")]
    InvalidDiskCount(usize),
    #[error("ping-pong certificate failed for generator {0}")]
    PingPongFailed(usize),
    #[error("orbit enumeration passed the point cap of {cap}")]
    BudgetExceeded { cap: usize },
    #[error("{0}")]
    OutOfRange(String),
    #[error("catalog too shallow: {0}")]
    InsufficientDepth(String),
    #[error("orbit catalog is empty")]
    EmptyCatalog,
    #[error("annulus n={n}, rho={rho} is empty")]
    EmptyAnnulus { n: u32, rho: f64 },
    #[error("shadows are narrower than the bin resolution: {0}")]
    ShadowTooNarrow(String),
    #[error("bin count {0} must be a power of two >= 256")]
    InvalidPartition(usize),
    #[error("step function and measure live on different partitions ({0} vs {1} bins)")]
    PartitionMismatch(usize, usize),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
