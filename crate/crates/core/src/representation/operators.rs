//! Annulus averages: the operator-valued measures `M^n`, their limit, `F^n`, `H^n`
//! and the paired-product function `G_n`.
//!
//! Every annulus quantity is a single pass over the catalog. Points are processed in
//! fixed-size chunks in catalog order and the chunk partials are merged in order, so
//! results do not depend on the thread count.

use rayon::prelude::*;

use super::cone::InteriorFunction;
use super::{BoundaryRep, StepFunction};
use crate::error::{Error, Result};
use crate::geometry::{busemann, radial_projection};
use crate::group::{AnnulusSpec, OrbitCatalog, OrbitPoint};
use crate::measure::BinnedMeasure;

const CHUNK: usize = 1024;

/// One group element seen through the representation, restricted to the support of `mu`.
///
/// For support bin `s_j`: `src[j]` is the bin of `gamma^{-1} v`, `dst[j]` the bin of
/// `gamma v`, `k[j] = exp(alpha/2 beta_v(x, gamma x))` and `k_inv[j]` the same for
/// `gamma^{-1}`.
#[derive(Clone, Debug)]
pub struct OrbitTerm {
    src: Vec<u32>,
    dst: Vec<u32>,
    k: Vec<f64>,
    k_inv: Vec<f64>,
    phi: f64,
    phi_inv: f64,
}

impl OrbitTerm {
    /// `phi_x(gamma)`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `phi_x(gamma^{-1})`.
    pub fn phi_inv(&self) -> f64 {
        self.phi_inv
    }

    /// `<pi_x(gamma) xi, eta>` averaged with `<xi, pi_x(gamma^{-1}) eta>`.
    ///
    /// The two agree in exact arithmetic; averaging them makes the quadrature of
    /// `M^n(1)` exactly self-adjoint on inversion-closed annuli.
    pub fn coefficient(&self, rep: &BoundaryRep, xi: &StepFunction, eta: &StepFunction) -> f64 {
        let m = rep.mu().masses();
        let (xv, ev) = (xi.values(), eta.values());
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for (j, &s) in rep.support().iter().enumerate() {
            fwd += xv[self.src[j] as usize] * self.k[j] * ev[s] * m[s];
            bwd += xv[s] * ev[self.dst[j] as usize] * self.k_inv[j] * m[s];
        }
        0.5 * (fwd + bwd)
    }

    /// The normalizer matching [`OrbitTerm::coefficient`]: `(phi(gamma) + phi(gamma^{-1})) / 2`.
    pub fn phi_sym(&self) -> f64 {
        0.5 * (self.phi + self.phi_inv)
    }
}

impl BoundaryRep<'_> {
    /// Precomputes the support-restricted data of a catalog element.
    pub fn term(&self, p: &OrbitPoint) -> OrbitTerm {
        let part = self.partition();
        let m = self.mu().masses();
        let inv = p.map.inverse();
        let local_inv = p.local.inverse();
        let n = self.support().len();
        let mut t = OrbitTerm {
            src: Vec::with_capacity(n),
            dst: Vec::with_capacity(n),
            k: Vec::with_capacity(n),
            k_inv: Vec::with_capacity(n),
            phi: 0.0,
            phi_inv: 0.0,
        };
        for &s in self.support() {
            let v = part.center_direction(s);
            t.src
                .push(part.bin_of(inv.apply_boundary(v).angle()) as u32);
            t.dst
                .push(part.bin_of(p.map.apply_boundary(v).angle()) as u32);
            let k = self.half_density(&p.local, s);
            let k_inv = self.half_density(&local_inv, s);
            t.phi += k * m[s];
            t.phi_inv += k_inv * m[s];
            t.k.push(k);
            t.k_inv.push(k_inv);
        }
        // Same summation order as `coefficient`, so `coefficient(1, 1) == phi_sym()` exactly.
        t
    }
}

/// Per-annulus sums of a vector-valued function of the catalog points.
///
/// Returns `(|C_n|, sums)` for every spec; `f` writes `width` values into its buffer.
pub fn annulus_reduce<F>(
    cat: &OrbitCatalog,
    specs: &[AnnulusSpec],
    width: usize,
    f: F,
) -> Result<Vec<(usize, Vec<f64>)>>
where
    F: Fn(&OrbitPoint, &mut [f64]) -> Result<()> + Sync,
{
    for s in specs {
        cat.annulus(*s)?;
    }
    let lo = specs
        .iter()
        .map(|s| s.lower())
        .fold(f64::INFINITY, f64::min);
    let hi = specs.iter().map(|s| s.upper()).fold(0.0, f64::max);
    let points: Vec<&OrbitPoint> = cat
        .points()
        .iter()
        .filter(|p| p.dist >= lo && p.dist < hi)
        .collect();
    type Partial = Vec<(usize, Vec<f64>)>;
    let partials: Vec<Result<Partial>> = points
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc: Vec<(usize, Vec<f64>)> = vec![(0, vec![0.0; width]); specs.len()];
            let mut buf = vec![0.0; width];
            for p in chunk {
                let hits: Vec<usize> = (0..specs.len())
                    .filter(|&i| p.dist >= specs[i].lower() && p.dist < specs[i].upper())
                    .collect();
                if hits.is_empty() {
                    continue;
                }
                buf.iter_mut().for_each(|b| *b = 0.0);
                f(p, &mut buf)?;
                for i in hits {
                    acc[i].0 += 1;
                    for (a, b) in acc[i].1.iter_mut().zip(&buf) {
                        *a += b;
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total: Vec<(usize, Vec<f64>)> = vec![(0, vec![0.0; width]); specs.len()];
    for part in partials {
        for (t, (c, v)) in total.iter_mut().zip(part?) {
            t.0 += c;
            for (a, b) in t.1.iter_mut().zip(v) {
                *a += b;
            }
        }
    }
    for (s, t) in specs.iter().zip(&total) {
        if t.0 == 0 {
            return Err(Error::EmptyAnnulus { n: s.n, rho: s.rho });
        }
    }
    Ok(total)
}

fn check_base(cat: &OrbitCatalog, rep: &BoundaryRep) -> Result<()> {
    if cat.base_point() != rep.base_point() {
        return Err(Error::OutOfRange(
            "catalog and representation use different base points".into(),
        ));
    }
    Ok(())
}

/// A test triple `(f, xi, eta)` for `<M^n(f) xi, eta>`.
#[derive(Clone, Debug)]
pub struct TestTriple {
    pub f: InteriorFunction,
    pub xi: StepFunction,
    pub eta: StepFunction,
}

/// `<M^n(f) xi, eta>` for every triple and every annulus: rows indexed like `specs`.
pub fn mn_table(
    cat: &OrbitCatalog,
    rep: &BoundaryRep,
    specs: &[AnnulusSpec],
    triples: &[TestTriple],
) -> Result<Vec<Vec<f64>>> {
    check_base(cat, rep)?;
    let x = cat.base_point();
    let sums = annulus_reduce(cat, specs, triples.len(), |p, out| {
        let term = rep.term(p);
        let norm = term.phi_sym();
        for (o, t) in out.iter_mut().zip(triples) {
            let fv = t.f.eval(x, p.image)?;
            if fv != 0.0 {
                *o = fv * term.coefficient(rep, &t.xi, &t.eta) / norm;
            }
        }
        Ok(())
    })?;
    Ok(sums
        .into_iter()
        .map(|(c, v)| v.into_iter().map(|s| s / c as f64).collect())
        .collect())
}

/// `<M^n_{x,rho}(f) xi, eta>` on one annulus.
pub fn mn_coefficient(
    f: &InteriorFunction,
    xi: &StepFunction,
    eta: &StepFunction,
    spec: AnnulusSpec,
    cat: &OrbitCatalog,
    rep: &BoundaryRep,
) -> Result<f64> {
    let triple = TestTriple {
        f: f.clone(),
        xi: xi.clone(),
        eta: eta.clone(),
    };
    Ok(mn_table(cat, rep, &[spec], &[triple])?[0][0])
}

/// `<M_x(f) xi, eta> = (int xi dmu / |mu|) (1 / |mu|) int f eta dmu`.
pub fn limit_coefficient(
    f_boundary: &StepFunction,
    xi: &StepFunction,
    eta: &StepFunction,
    mu: &BinnedMeasure,
) -> f64 {
    let total = mu.total();
    (xi.integral(mu) / total) * f_boundary.inner(eta, mu) / total
}

/// `(max_v F^n(v), max_v H^n(v))` over all bin centers, for every annulus.
pub fn fn_hn_table(
    cat: &OrbitCatalog,
    rep: &BoundaryRep,
    specs: &[AnnulusSpec],
) -> Result<Vec<(f64, f64)>> {
    check_base(cat, rep)?;
    let bins = rep.partition().bin_count();
    let m = rep.mu().masses();
    let sums = annulus_reduce(cat, specs, 2 * bins, |p, out| {
        let (f_part, h_part) = out.split_at_mut(bins);
        for (i, o) in f_part.iter_mut().enumerate() {
            *o = rep.half_density(&p.local, i);
        }
        let mut phi = 0.0;
        let mut norm = 0.0;
        for &s in rep.support() {
            phi += f_part[s] * m[s];
            norm += f_part[s] * f_part[s] * m[s];
        }
        for (h, f) in h_part.iter_mut().zip(f_part.iter_mut()) {
            *h = *f * *f / norm;
            *f /= phi;
        }
        Ok(())
    })?;
    Ok(sums
        .into_iter()
        .map(|(c, v)| {
            let (f, h) = v.split_at(bins);
            let max = |s: &[f64]| s.iter().fold(0.0_f64, |a, &b| a.max(b)) / c as f64;
            (max(f), max(h))
        })
        .collect())
}

/// `(max F^n, max H^n)` on one annulus.
pub fn fn_hn_supnorms(
    spec: AnnulusSpec,
    cat: &OrbitCatalog,
    rep: &BoundaryRep,
) -> Result<(f64, f64)> {
    Ok(fn_hn_table(cat, rep, &[spec])?[0])
}

/// `G_n(v, w) = |C_n|^{-1} sum exp(alpha beta_v(x, gamma^{-1} x)) exp(alpha beta_w(x, gamma x))`
/// at the aligned pair `v = proj(g^{-1} x)`, `w = proj(g x)` of the deepest `g` in the annulus.
pub fn g_n_aligned(cat: &OrbitCatalog, alpha: f64, spec: AnnulusSpec) -> Result<f64> {
    let x = cat.base_point();
    let shell = cat.annulus(spec)?;
    let deepest = shell.last().ok_or(Error::EmptyAnnulus {
        n: spec.n,
        rho: spec.rho,
    })?;
    let v = radial_projection(x, deepest.inverse_image);
    let w = radial_projection(x, deepest.image);
    let sums = annulus_reduce(cat, &[spec], 1, |p, out| {
        out[0] = (alpha * (busemann(v, x, p.inverse_image) + busemann(w, x, p.image))).exp();
        Ok(())
    })?;
    Ok(sums[0].1[0] / sums[0].0 as f64)
}
