//! Harish-Chandra function against an atomic measure, resolved to the depth of the catalog.
//!
//! Binned quadrature stops resolving the peak of `v -> exp(alpha/2 beta_v(x, g x))`
//! once `d(x, g x)` exceeds the log of the bin count. Here the atoms are kept: cells far
//! from the peak contribute through their mass centroid, cells near it atom by atom.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, MoebiusMap};
use crate::group::AnnulusSpec;
use crate::group::OrbitCatalog;
use crate::report::{trailing_log_slope, ConvergenceReport};

#[derive(Clone, Debug)]
struct Cell {
    angle: f64,
    centroid: Complex64,
    mass: f64,
    atoms: Vec<(Complex64, f64)>,
}

/// Atomic probability measure on the boundary, in the frame where the base point is the origin.
#[derive(Clone, Debug)]
pub struct AtomicQuadrature {
    cells: Vec<Cell>,
    window: f64,
}

impl AtomicQuadrature {
    /// Atoms at local angles with positive masses, grouped into `cells` equal cells; cells
    /// within `near_cells` cell widths of the kernel peak are summed atom by atom.
    pub fn new(atoms: &[(f64, f64)], cells: usize, near_cells: usize) -> Result<Self> {
        if cells == 0 || atoms.is_empty() {
            return Err(Error::InvalidMeasure(
                "atomic quadrature needs atoms and cells".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) || atoms.iter().any(|a| !(a.1 >= 0.0)) {
            return Err(Error::InvalidMeasure(
                "atom masses must be nonnegative with positive total".into(),
            ));
        }
        let width = std::f64::consts::TAU / cells as f64;
        let mut grid: Vec<Vec<(Complex64, f64)>> = vec![Vec::new(); cells];
        for &(angle, mass) in atoms {
            let t = angle.rem_euclid(std::f64::consts::TAU);
            let k = ((t / width) as usize).min(cells - 1);
            grid[k].push((Complex64::from_polar(1.0, t), mass / total));
        }
        let cells = grid
            .into_iter()
            .enumerate()
            .filter(|(_, a)| !a.is_empty())
            .map(|(k, atoms)| {
                let mass: f64 = atoms.iter().map(|a| a.1).sum();
                let sum: Complex64 = atoms.iter().map(|a| a.0 * a.1).sum();
                Cell {
                    angle: (k as f64 + 0.5) * width,
                    centroid: sum / sum.norm(),
                    mass,
                    atoms,
                }
            })
            .collect();
        Ok(AtomicQuadrature {
            cells,
            window: (near_cells as f64 + 0.5) * width,
        })
    }

    /// Shell atoms `max_dist - width < d <= max_dist`, weights `e^{-alpha d}`, as seen from
    /// the catalog base point.
    pub fn from_shell(cat: &OrbitCatalog, alpha: f64, width: f64, cells: usize) -> Result<Self> {
        let inner = cat.max_dist() - width;
        let atoms: Vec<(f64, f64)> = cat
            .points()
            .iter()
            .filter(|p| p.dist > inner && !p.word.is_empty())
            .map(|p| {
                (
                    p.local.b().arg() + p.local.a().arg(),
                    (-alpha * p.dist).exp(),
                )
            })
            .collect();
        if atoms.is_empty() {
            return Err(Error::InsufficientDepth(
                "no orbit point in the outer shell".into(),
            ));
        }
        AtomicQuadrature::new(&atoms, cells, 8)
    }

    /// `phi_x(g) = int exp(alpha/2 beta_v(x, g x)) dmu(v)` for `g` in the local frame.
    pub fn phi(&self, local: &MoebiusMap, alpha: f64) -> f64 {
        let (a, b) = (local.a(), local.b());
        let ac = a.conj();
        let kernel = |v: Complex64| (b - ac * v).norm().powf(-alpha);
        let peak = b.arg() + a.arg();
        let has_peak = b.norm() > 1e-12;
        let mut sum = 0.0;
        for c in &self.cells {
            if has_peak && wrap_angle(c.angle - peak).abs() <= self.window {
                sum += c.atoms.iter().map(|&(v, m)| kernel(v) * m).sum::<f64>();
            } else {
                sum += kernel(c.centroid) * c.mass;
            }
        }
        sum
    }
}

/// `phi_x(gamma) e^{alpha d / 2} / (1 + d)` over the catalog, summarized per annulus.
///
/// Columns: minimum, median and maximum over `C_n(x, rho)`. The verdict asks the ratio
/// of the extremes over every element with `d > 4` to stay below 20 and the trailing
/// log-slope of the median to stay within 0.02 of zero.
pub fn hc_report(
    cat: &OrbitCatalog,
    quad: &AtomicQuadrature,
    alpha: f64,
    rho: f64,
    fingerprint: &str,
) -> Result<ConvergenceReport> {
    let ratio = |p: &crate::group::OrbitPoint| {
        quad.phi(&p.local, alpha) * (0.5 * alpha * p.dist).exp() / (1.0 + p.dist)
    };
    let deep: Vec<&crate::group::OrbitPoint> =
        cat.points().iter().filter(|p| p.dist > 4.0).collect();
    if deep.is_empty() {
        return Err(Error::InsufficientDepth(
            "no catalog element beyond distance 4".into(),
        ));
    }
    let values: Vec<(f64, f64)> = deep.par_iter().map(|p| (p.dist, ratio(p))).collect();
    let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.1).fold(0.0, f64::max);
    let mut report =
        ConvergenceReport::new("harish_chandra", fingerprint, &["min", "median", "max"])
            .param("rho", rho)
            .param("alpha", alpha)
            .param("band_min", lo)
            .param("band_max", hi)
            .param("band_ratio", hi / lo);
    let first = (4.0 + rho).ceil() as u32;
    for n in first..=cat.max_annulus(rho) {
        let spec = AnnulusSpec::new(n, rho);
        let mut shell: Vec<f64> = values
            .iter()
            .filter(|v| v.0 >= spec.lower() && v.0 < spec.upper())
            .map(|v| v.1)
            .collect();
        if shell.is_empty() {
            continue;
        }
        shell.sort_by(f64::total_cmp);
        report.push(
            n,
            vec![shell[0], shell[shell.len() / 2], shell[shell.len() - 1]],
        );
    }
    let slope = trailing_log_slope(&report.ns(), &report.column("median").unwrap_or_default());
    report = report.param("median_log_slope", slope);
    report.set_verdict(
        hi / lo < 20.0 && slope.abs() <= 0.02,
        format!(
            "band ratio {:.3}, trailing log-slope of the median {slope:+.4}",
            hi / lo
        ),
    );
    Ok(report)
}
