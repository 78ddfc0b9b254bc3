//! Closed-form hyperbolic geometry of the Poincare disk.
//!
//! Interior points are complex numbers of modulus < 1, boundary points are
//! angles on the unit circle and isometries are stored as SU(1,1) matrices
//! `[[a, b], [conj(b), conj(a)]]` acting by `z -> (a z + b) / (conj(b) z + conj(a))`.
//! Busemann functions, Gromov products and visual metrics are evaluated from
//! their disk-model closed forms, with base points other than the origin
//! handled through the cocycle identity.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interior points must satisfy `|p| < 1 - BOUNDARY_EPS`.
pub const BOUNDARY_EPS: f64 = 1e-12;

/// Distances below this are treated as coincident points.
pub const COINCIDENT_EPS: f64 = 1e-9;

/// Above this squared entry size the determinant is not recomputed.
const RENORMALIZE_LIMIT: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    pub re: f64,
    pub im: f64,
}

impl DiskPoint {
    pub const ORIGIN: DiskPoint = DiskPoint { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Result<Self> {
        let p = DiskPoint { re, im };
        if !(re.is_finite() && im.is_finite()) || p.norm() >= 1.0 - BOUNDARY_EPS {
            return Err(Error::NotInterior { re, im });
        }
        Ok(p)
    }

    /// The point at hyperbolic distance `dist` from the origin in direction `angle`.
    pub fn from_polar(angle: f64, dist: f64) -> Self {
        let r = (0.5 * dist).tanh();
        DiskPoint {
            re: r * angle.cos(),
            im: r * angle.sin(),
        }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub(crate) fn from_complex(z: Complex64) -> Self {
        DiskPoint { re: z.re, im: z.im }
    }

    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// `1 - |p|^2`, evaluated as `(1 - |p|)(1 + |p|)` to keep relative accuracy near the circle.
    pub fn conformal_denominator(self) -> f64 {
        let r = self.norm();
        (1.0 - r) * (1.0 + r)
    }
}

/// A point of the boundary circle, stored as an angle in `[0, 2pi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDirection {
    angle: f64,
}

impl BoundaryDirection {
    pub fn new(angle: f64) -> Self {
        let mut a = angle.rem_euclid(TAU);
        if a >= TAU {
            a = 0.0;
        }
        BoundaryDirection { angle: a }
    }

    pub fn angle(self) -> f64 {
        self.angle
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.angle.cos(), self.angle.sin())
    }

    pub(crate) fn from_complex(z: Complex64) -> Self {
        BoundaryDirection::new(z.im.atan2(z.re))
    }

    pub fn antipode(self) -> Self {
        BoundaryDirection::new(self.angle + PI)
    }
}

/// A point of the compactified disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Point {
    Interior(DiskPoint),
    Boundary(BoundaryDirection),
}

impl From<DiskPoint> for Point {
    fn from(p: DiskPoint) -> Self {
        Point::Interior(p)
    }
}

impl From<BoundaryDirection> for Point {
    fn from(v: BoundaryDirection) -> Self {
        Point::Boundary(v)
    }
}

/// Orientation-preserving isometry of the disk, as a unit-determinant SU(1,1) matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMap {
    a: Complex64,
    b: Complex64,
}

impl MoebiusMap {
    pub fn identity() -> Self {
        MoebiusMap {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
        }
    }

    /// Builds a map from raw entries, renormalizing the determinant to one.
    ///
    /// Returns `None` when `|a|^2 - |b|^2` is not positive.
    pub fn from_entries(a: Complex64, b: Complex64) -> Option<Self> {
        let det = a.norm_sqr() - b.norm_sqr();
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        let s = det.sqrt();
        Some(MoebiusMap { a: a / s, b: b / s })
    }

    /// Rotation `z -> e^{i theta} z` about the origin.
    pub fn rotation(theta: f64) -> Self {
        MoebiusMap {
            a: Complex64::from_polar(1.0, 0.5 * theta),
            b: Complex64::new(0.0, 0.0),
        }
    }

    /// Hyperbolic translation of length `t` along the real diameter, towards `+1`.
    pub fn real_translation(t: f64) -> Self {
        MoebiusMap {
            a: Complex64::new((0.5 * t).cosh(), 0.0),
            b: Complex64::new((0.5 * t).sinh(), 0.0),
        }
    }

    /// The transvection sending the origin to `p` along the diameter through `p`.
    pub fn transvection_to(p: DiskPoint) -> Self {
        let s = p.conformal_denominator().sqrt();
        MoebiusMap {
            a: Complex64::new(1.0 / s, 0.0),
            b: p.to_complex() / s,
        }
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    /// `[re a, im a, re b, im b]`.
    pub fn entries(&self) -> [f64; 4] {
        [self.a.re, self.a.im, self.b.re, self.b.im]
    }

    pub fn determinant(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    /// `self` after `other`, renormalized to unit determinant.
    ///
    /// For very large entries the computed determinant is pure cancellation
    /// noise, so the product is left as is.
    pub fn compose(&self, other: &MoebiusMap) -> MoebiusMap {
        let a = self.a * other.a + self.b * other.b.conj();
        let b = self.a * other.b + self.b * other.a.conj();
        if a.norm_sqr() + b.norm_sqr() > RENORMALIZE_LIMIT {
            return MoebiusMap { a, b };
        }
        MoebiusMap::from_entries(a, b).unwrap_or(MoebiusMap { a, b })
    }

    pub fn inverse(&self) -> MoebiusMap {
        MoebiusMap {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    fn apply_complex(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    pub fn apply(&self, p: DiskPoint) -> DiskPoint {
        DiskPoint::from_complex(self.apply_complex(p.to_complex()))
    }

    pub fn apply_boundary(&self, v: BoundaryDirection) -> BoundaryDirection {
        BoundaryDirection::from_complex(self.apply_complex(v.to_complex()))
    }

    pub fn apply_any(&self, p: Point) -> Point {
        match p {
            Point::Interior(q) => Point::Interior(self.apply(q)),
            Point::Boundary(v) => Point::Boundary(self.apply_boundary(v)),
        }
    }

    /// `d(0, g.0)`, from `sinh(d/2) = |b|`.
    pub fn displacement_from_origin(&self) -> f64 {
        2.0 * self.b.norm().asinh()
    }

    /// Translation length `2 acosh(|tr|/2)`; zero for elliptic maps.
    pub fn translation_length(&self) -> f64 {
        let half_trace = self.a.re.abs();
        if half_trace <= 1.0 {
            0.0
        } else {
            2.0 * half_trace.acosh()
        }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let id = MoebiusMap::identity();
        let plus = (self.a - id.a).norm() + self.b.norm();
        let minus = (self.a + id.a).norm() + self.b.norm();
        plus.min(minus) <= tol
    }
}

/// Hyperbolic distance, via `sinh(d/2) = |p - q| / sqrt((1-|p|^2)(1-|q|^2))`.
pub fn hyp_dist(p: DiskPoint, q: DiskPoint) -> f64 {
    let diff = (p.to_complex() - q.to_complex()).norm();
    if diff == 0.0 {
        return 0.0;
    }
    let denom = (p.conformal_denominator() * q.conformal_denominator()).sqrt();
    2.0 * (diff / denom).asinh()
}

/// `beta_v(0, y) = log((1 - |y|^2) / |y - v|^2)`.
pub(crate) fn busemann_from_origin(v: Complex64, y: DiskPoint) -> f64 {
    let gap = (y.to_complex() - v).norm_sqr();
    (y.conformal_denominator() / gap).ln()
}

/// Horospherical distance `beta_v(x, y)` from `x` to `y` relative to `v`.
pub fn busemann(v: BoundaryDirection, x: DiskPoint, y: DiskPoint) -> f64 {
    let vz = v.to_complex();
    busemann_from_origin(vz, y) - busemann_from_origin(vz, x)
}

/// Gromov product `(a, b)_x` on the compactified disk.
pub fn gromov_product(a: Point, b: Point, x: DiskPoint) -> Result<f64> {
    match (a, b) {
        (Point::Interior(p), Point::Interior(q)) => {
            Ok(0.5 * (hyp_dist(x, p) + hyp_dist(x, q) - hyp_dist(p, q)))
        }
        (Point::Boundary(v), Point::Interior(y)) | (Point::Interior(y), Point::Boundary(v)) => {
            Ok(0.5 * (busemann(v, x, y) + hyp_dist(x, y)))
        }
        (Point::Boundary(v), Point::Boundary(w)) => {
            let (vz, wz) = (v.to_complex(), w.to_complex());
            let chord = (vz - wz).norm();
            if chord < 1e-15 {
                return Err(Error::DegenerateBoundaryPair);
            }
            let at_origin = -(0.5 * chord).ln();
            let shift = 0.5 * (busemann_from_origin(vz, x) + busemann_from_origin(wz, x));
            Ok(at_origin - shift)
        }
    }
}

/// Visual metric `d_x(v, w) = exp(-(v, w)_x)`, zero on the diagonal.
pub fn visual_dist(v: BoundaryDirection, w: BoundaryDirection, x: DiskPoint) -> f64 {
    let (vz, wz) = (v.to_complex(), w.to_complex());
    let chord = (vz - wz).norm();
    if chord == 0.0 {
        return 0.0;
    }
    let shift = 0.5 * (busemann_from_origin(vz, x) + busemann_from_origin(wz, x));
    0.5 * chord * shift.exp()
}

/// Metric derivative of `g` on `(boundary, d_x)` at `v`: `exp(beta_v(x, g^{-1} x))`.
pub fn conformal_factor(g: &MoebiusMap, v: BoundaryDirection, x: DiskPoint) -> f64 {
    busemann(v, x, g.inverse().apply(x)).exp()
}

/// Boundary direction of the geodesic ray from `x` through `y` (radial projection).
///
/// For `y == x` the convention is the image of angle 0 under the transvection to `x`.
pub fn radial_projection(x: DiskPoint, y: DiskPoint) -> BoundaryDirection {
    let t = MoebiusMap::transvection_to(x);
    let local = t.inverse().apply(y).to_complex();
    let angle = if local.norm() == 0.0 {
        0.0
    } else {
        local.im.atan2(local.re)
    };
    t.apply_boundary(BoundaryDirection::new(angle))
}

/// Point at hyperbolic distance `dist` from `x` on the ray towards `v`.
pub fn point_towards(x: DiskPoint, v: BoundaryDirection, dist: f64) -> DiskPoint {
    let t = MoebiusMap::transvection_to(x);
    let local = t.inverse().apply_boundary(v);
    t.apply(DiskPoint::from_polar(local.angle(), dist))
}

/// Closed arc of the boundary circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub center_angle: f64,
    pub half_width: f64,
}

/// Signed angular difference wrapped to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

impl Arc {
    pub fn new(center_angle: f64, half_width: f64) -> Self {
        Arc {
            center_angle: center_angle.rem_euclid(TAU),
            half_width: half_width.clamp(0.0, PI),
        }
    }

    pub fn full() -> Self {
        Arc::new(0.0, PI)
    }

    /// The counter-clockwise arc from `start` to `end`.
    pub fn between(start: f64, end: f64) -> Self {
        let width = (end - start).rem_euclid(TAU);
        Arc::new(start + 0.5 * width, 0.5 * width)
    }

    pub fn start(&self) -> f64 {
        self.center_angle - self.half_width
    }

    pub fn end(&self) -> f64 {
        self.center_angle + self.half_width
    }

    pub fn is_full(&self) -> bool {
        self.half_width >= PI
    }

    pub fn contains(&self, angle: f64) -> bool {
        self.is_full() || wrap_angle(angle - self.center_angle).abs() <= self.half_width
    }

    pub fn intersects(&self, other: &Arc) -> bool {
        self.is_full()
            || other.is_full()
            || wrap_angle(self.center_angle - other.center_angle).abs()
                <= self.half_width + other.half_width
    }

    /// Lebesgue length of the arc.
    pub fn length(&self) -> f64 {
        2.0 * self.half_width
    }
}

/// Distance from `y` (at distance `dist` from the origin) to the ray from the origin
/// making angle `phi` with the ray through `y`.
fn ray_clearance(sinh_dist: f64, dist: f64, phi: f64) -> f64 {
    if phi >= FRAC_PI_2 {
        dist
    } else {
        (sinh_dist * phi.sin()).asinh()
    }
}

/// Shadow `O_R(x, y)`: boundary points whose ray from `x` meets the closed ball `B(y, R)`.
///
/// The half-width is found by bisection on the ray angle in the frame where `x` is
/// the origin; endpoints are mapped back to the original frame.
pub fn shadow_arc(x: DiskPoint, y: DiskPoint, radius: f64) -> Result<Arc> {
    let dist = hyp_dist(x, y);
    if dist < COINCIDENT_EPS {
        return Err(Error::CoincidentPoints(dist));
    }
    if dist <= radius {
        return Ok(Arc::full());
    }
    let t = MoebiusMap::transvection_to(x);
    let local = t.inverse().apply(y).to_complex();
    let center = local.im.atan2(local.re);
    let sinh_dist = dist.sinh();
    let (mut lo, mut hi) = (0.0_f64, FRAC_PI_2);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if ray_clearance(sinh_dist, dist, mid) <= radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi.min(1.0) {
            break;
        }
    }
    let half = 0.5 * (lo + hi);
    if x == DiskPoint::ORIGIN {
        return Ok(Arc::new(center, half));
    }
    let start = t.apply_boundary(BoundaryDirection::new(center - half));
    let end = t.apply_boundary(BoundaryDirection::new(center + half));
    Ok(Arc::between(start.angle(), end.angle()))
}

/// Hyperbolicity constant and shadow radius used by the estimate audits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryContext {
    pub delta: f64,
    pub shadow_radius: f64,
}

impl Default for GeometryContext {
    fn default() -> Self {
        GeometryContext {
            delta: std::f64::consts::LN_2,
            shadow_radius: 2.0,
        }
    }
}

/// Random interior point at hyperbolic distance at most `max_dist` from the origin.
pub fn random_interior<R: Rng + ?Sized>(rng: &mut R, max_dist: f64) -> DiskPoint {
    DiskPoint::from_polar(rng.gen_range(0.0..TAU), rng.gen_range(0.0..max_dist))
}

pub fn random_boundary<R: Rng + ?Sized>(rng: &mut R) -> BoundaryDirection {
    BoundaryDirection::new(rng.gen_range(0.0..TAU))
}

/// Random isometry: rotation composed with a transvection to a random point.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, max_dist: f64) -> MoebiusMap {
    MoebiusMap::transvection_to(random_interior(rng, max_dist))
        .compose(&MoebiusMap::rotation(rng.gen_range(0.0..TAU)))
}

impl GeometryContext {
    /// Largest violation of the four-point condition
    /// `(a,c)_t >= min{(a,b)_t, (b,c)_t} - delta` over random quadruples.
    ///
    /// `t` is interior; `a, b, c` are interior or boundary with equal odds.
    pub fn four_point_defect<R: Rng + ?Sized>(rng: &mut R, samples: usize, max_dist: f64) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        let draw = |rng: &mut R| -> Point {
            if rng.gen_bool(0.5) {
                Point::Interior(random_interior(rng, max_dist))
            } else {
                Point::Boundary(random_boundary(rng))
            }
        };
        for _ in 0..samples {
            let t = random_interior(rng, max_dist);
            let (a, b, c) = (draw(rng), draw(rng), draw(rng));
            let (Ok(ac), Ok(ab), Ok(bc)) = (
                gromov_product(a, c, t),
                gromov_product(a, b, t),
                gromov_product(b, c, t),
            ) else {
                continue;
            };
            worst = worst.max(ab.min(bc) - ac);
        }
        worst.max(0.0)
    }

    /// Context whose `delta` is the measured four-point defect, never below `log 2`.
    pub fn measured<R: Rng + ?Sized>(rng: &mut R, samples: usize, shadow_radius: f64) -> Self {
        let defect = Self::four_point_defect(rng, samples, 8.0);
        GeometryContext {
            delta: defect.max(std::f64::consts::LN_2),
            shadow_radius,
        }
    }
}

/// Worst violation of each closed-form identity over a batch of random cases.
///
/// Busemann errors are relative to `1 + |value|`, the comparison formula is relative to
/// the visual distance, and `bound` is the excess of `|beta_v(x, y)|` over `d(x, y)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityAudit {
    pub cases: usize,
    pub cocycle: f64,
    pub antisymmetry: f64,
    pub bound: f64,
    pub equivariance: f64,
    pub visual_comparison: f64,
}

impl IdentityAudit {
    pub fn max_violation(&self) -> f64 {
        self.cocycle
            .max(self.antisymmetry)
            .max(self.bound)
            .max(self.equivariance)
            .max(self.visual_comparison)
    }
}

/// Runs `cases` random instances of every identity with interior points within `max_dist`
/// of the origin and isometries moving the origin at most `max_dist`.
pub fn identity_audit<R: Rng + ?Sized>(rng: &mut R, cases: usize, max_dist: f64) -> IdentityAudit {
    let mut audit = IdentityAudit {
        cases,
        ..Default::default()
    };
    let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + a.abs().max(b.abs()));
    for _ in 0..cases {
        let (v, w) = (random_boundary(rng), random_boundary(rng));
        let x = random_interior(rng, max_dist);
        let y = random_interior(rng, max_dist);
        let z = random_interior(rng, max_dist);
        let g = random_isometry(rng, max_dist);
        let xy = busemann(v, x, y);
        audit.cocycle = audit
            .cocycle
            .max(rel(busemann(v, x, z), xy + busemann(v, y, z)));
        audit.antisymmetry = audit.antisymmetry.max(rel(xy, -busemann(v, y, x)));
        audit.bound = audit.bound.max(xy.abs() - hyp_dist(x, y));
        let moved = busemann(g.apply_boundary(v), g.apply(x), g.apply(y));
        audit.equivariance = audit.equivariance.max(rel(moved, xy));
        let dx = visual_dist(v, w, x);
        if dx > 0.0 {
            let predicted = (0.5 * (xy + busemann(w, x, y))).exp() * dx;
            let dy = visual_dist(v, w, y);
            audit.visual_comparison = audit
                .visual_comparison
                .max((dy - predicted).abs() / dy.max(predicted));
        }
    }
    audit
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    /// Composite Simpson rule, used as an oracle for closed forms.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn identity_and_rotation_act_trivially() {
        let p = DiskPoint::new(0.3, 0.4).unwrap();
        assert_eq!(MoebiusMap::identity().apply(p), p);
        let v = BoundaryDirection::new(1.0);
        let w = MoebiusMap::rotation(0.7).apply_boundary(v);
        assert!((w.angle() - 1.7).abs() < 1e-14);
        let w = MoebiusMap::rotation(6.0).apply_boundary(v);
        assert!((w.angle() - (7.0 - TAU)).abs() < 1e-13);
    }

    #[test]
    fn iterated_translation_length_matches_spectral_radius() {
        let g = MoebiusMap::transvection_to(DiskPoint::new(0.2, 0.5).unwrap())
            .compose(&MoebiusMap::rotation(0.4))
            .compose(&MoebiusMap::real_translation(1.3));
        // eigenvalues of [[a, b], [conj b, conj a]]: re(a) +- sqrt(re(a)^2 - 1)
        let h = g.a().re.abs();
        let spectral = h + (h * h - 1.0).sqrt();
        let oracle = 2.0 * spectral.ln();
        assert!((g.translation_length() - oracle).abs() < 1e-12);
        let mut power = MoebiusMap::identity();
        let k = 200;
        for _ in 0..k {
            power = power.compose(&g);
        }
        let rate = power.displacement_from_origin() / k as f64;
        assert!((rate - oracle).abs() < 0.02, "{rate} vs {oracle}");
    }

    #[test]
    fn distance_matches_radial_integral() {
        let p = DiskPoint::new(0.5, 0.0).unwrap();
        let oracle = simpson(|r| 2.0 / (1.0 - r * r), 0.0, 0.5, 2000);
        assert!((hyp_dist(DiskPoint::ORIGIN, p) - oracle).abs() < 1e-10);
        assert!((oracle - 3f64.ln()).abs() < 1e-10);
        assert_eq!(hyp_dist(DiskPoint::ORIGIN, DiskPoint::ORIGIN), 0.0);
    }

    #[test]
    fn distance_is_isometry_invariant() {
        let mut rng = rng();
        for _ in 0..100 {
            let g = random_isometry(&mut rng, 3.0);
            let p = random_interior(&mut rng, 4.0);
            let q = random_interior(&mut rng, 4.0);
            let before = hyp_dist(p, q);
            let after = hyp_dist(g.apply(p), g.apply(q));
            assert!((before - after).abs() < 1e-10, "{before} {after}");
        }
    }

    #[test]
    fn antipodal_gromov_product_matches_ray_limit() {
        let v = BoundaryDirection::new(0.3);
        let w = v.antipode();
        let closed = gromov_product(v.into(), w.into(), DiskPoint::ORIGIN).unwrap();
        assert!(closed.abs() < 1e-14);
        for r in [0.9, 0.99, 0.999] {
            let a = DiskPoint::from_complex(v.to_complex() * r);
            let b = DiskPoint::from_complex(w.to_complex() * r);
            let approx = gromov_product(a.into(), b.into(), DiskPoint::ORIGIN).unwrap();
            assert!(approx.abs() < 1e-9);
        }
    }

    #[test]
    fn boundary_pair_matches_ray_limit_at_generic_base() {
        let x = DiskPoint::new(-0.2, 0.35).unwrap();
        let v = BoundaryDirection::new(0.4);
        let w = BoundaryDirection::new(2.5);
        let closed = gromov_product(v.into(), w.into(), x).unwrap();
        let t = 30.0;
        let a = point_towards(x, v, t);
        let b = point_towards(x, w, t);
        let ray = gromov_product(a.into(), b.into(), x).unwrap();
        assert!((closed - ray).abs() < 1e-6, "{closed} vs {ray}");
    }

    #[test]
    fn mixed_gromov_product_matches_ray_limit() {
        let x = DiskPoint::new(0.1, -0.3).unwrap();
        let a = DiskPoint::new(0.4, 0.2).unwrap();
        let v = BoundaryDirection::new(2.0);
        let closed = gromov_product(v.into(), a.into(), x).unwrap();
        // (a, r(t))_x converges like e^{-2t}; t = 30 is well inside 1e-6.
        let far = point_towards(x, v, 30.0);
        let ray = gromov_product(far.into(), a.into(), x).unwrap();
        assert!((closed - ray).abs() < 1e-6, "{closed} vs {ray}");
    }

    #[test]
    fn gromov_product_degenerate_cases() {
        let v = BoundaryDirection::new(1.0);
        assert_eq!(
            gromov_product(v.into(), v.into(), DiskPoint::ORIGIN),
            Err(Error::DegenerateBoundaryPair)
        );
        let a = DiskPoint::new(0.4, 0.1).unwrap();
        let x = DiskPoint::new(-0.2, 0.0).unwrap();
        let g = gromov_product(a.into(), a.into(), x).unwrap();
        assert!((g - hyp_dist(x, a)).abs() < 1e-14);
    }

    #[test]
    fn busemann_examples() {
        let v = BoundaryDirection::new(0.0);
        let y = DiskPoint::new(0.5, 0.0).unwrap();
        let closed = busemann(v, DiskPoint::ORIGIN, y);
        let far = DiskPoint::from_polar(0.0, 25.0);
        let ray = hyp_dist(DiskPoint::ORIGIN, far) - hyp_dist(y, far);
        assert!((closed - 3f64.ln()).abs() < 1e-12);
        assert!((closed - ray).abs() < 1e-8);
        let x = DiskPoint::new(0.1, 0.7).unwrap();
        assert!(busemann(BoundaryDirection::new(2.0), x, x).abs() < 1e-15);
    }

    #[test]
    fn busemann_identities_on_random_inputs() {
        let mut rng = rng();
        for _ in 0..1000 {
            let v = random_boundary(&mut rng);
            let x = random_interior(&mut rng, 4.0);
            let y = random_interior(&mut rng, 4.0);
            let z = random_interior(&mut rng, 4.0);
            let (xy, yz, xz) = (busemann(v, x, y), busemann(v, y, z), busemann(v, x, z));
            assert!((xy + yz - xz).abs() < 1e-10);
            assert!((xy + busemann(v, y, x)).abs() < 1e-10);
            assert!(xy.abs() <= hyp_dist(x, y) + 1e-10);
            let g = random_isometry(&mut rng, 2.0);
            let moved = busemann(g.apply_boundary(v), g.apply(x), g.apply(y));
            assert!((moved - xy).abs() < 1e-9);
        }
    }

    #[test]
    fn visual_metric_examples() {
        let v = BoundaryDirection::new(1.0);
        assert_eq!(visual_dist(v, v, DiskPoint::ORIGIN), 0.0);
        assert!((visual_dist(v, v.antipode(), DiskPoint::ORIGIN) - 1.0).abs() < 1e-14);
        let w = BoundaryDirection::new(2.2);
        let chord = (v.to_complex() - w.to_complex()).norm();
        assert!((visual_dist(v, w, DiskPoint::ORIGIN) - 0.5 * chord).abs() < 1e-15);
    }

    #[test]
    fn visual_metric_comparison_formula() {
        let mut rng = rng();
        for _ in 0..1000 {
            let v = random_boundary(&mut rng);
            let w = random_boundary(&mut rng);
            let x = random_interior(&mut rng, 3.0);
            let y = random_interior(&mut rng, 3.0);
            let lhs = visual_dist(v, w, y);
            let rhs = (0.5 * (busemann(v, x, y) + busemann(w, x, y))).exp() * visual_dist(v, w, x);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0));
        }
    }

    #[test]
    fn identity_audit_is_tight() {
        let audit = identity_audit(&mut rng(), 2000, 5.0);
        assert_eq!(audit.cases, 2000);
        assert!(audit.max_violation() < 1e-9, "{audit:?}");
    }

    #[test]
    fn visual_metric_triangle_inequality() {
        let mut rng = rng();
        for _ in 0..10 {
            let x = random_interior(&mut rng, 3.0);
            for _ in 0..10_000 {
                let (u, v, w) = (
                    random_boundary(&mut rng),
                    random_boundary(&mut rng),
                    random_boundary(&mut rng),
                );
                let direct = visual_dist(u, w, x);
                let detour = visual_dist(u, v, x) + visual_dist(v, w, x);
                assert!(direct <= detour + 1e-12);
            }
        }
    }

    /// Closest approach of the ray from `x` towards `v` to `y`, by golden-section search.
    fn ray_distance_oracle(x: DiskPoint, v: BoundaryDirection, y: DiskPoint) -> f64 {
        let f = |t: f64| hyp_dist(point_towards(x, v, t), y);
        let (mut a, mut b) = (0.0, 40.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        f(0.5 * (a + b)).min(f(0.0))
    }

    #[test]
    fn shadow_half_width_and_membership() {
        let y = DiskPoint::new(0.5, 0.0).unwrap();
        let arc = shadow_arc(DiskPoint::ORIGIN, y, 1.0).unwrap();
        assert!(arc.center_angle.abs() < 1e-14);
        // right-angled triangle: sin(phi) = sinh R / sinh d
        let closed = (1f64.sinh() / 3f64.ln().sinh()).asin();
        assert!((arc.half_width - closed).abs() < 1e-9);
        let n = 10_000;
        for i in 0..n {
            let theta = (i as f64 + 0.5) / n as f64 * TAU;
            let near_edge = (wrap_angle(theta).abs() - arc.half_width).abs() < 1e-6;
            if near_edge {
                continue;
            }
            let hits =
                ray_distance_oracle(DiskPoint::ORIGIN, BoundaryDirection::new(theta), y) <= 1.0;
            assert_eq!(hits, arc.contains(theta), "theta {theta}");
        }
    }

    #[test]
    fn shadow_from_generic_base_point() {
        let x = DiskPoint::new(0.3, -0.2).unwrap();
        let y = DiskPoint::new(-0.4, 0.5).unwrap();
        let arc = shadow_arc(x, y, 0.8).unwrap();
        let n = 2000;
        for i in 0..n {
            let theta = (i as f64 + 0.5) / n as f64 * TAU;
            let v = BoundaryDirection::new(theta);
            let d = ray_distance_oracle(x, v, y);
            if (d - 0.8).abs() < 1e-4 {
                continue;
            }
            assert_eq!(d <= 0.8, arc.contains(theta), "theta {theta} clearance {d}");
        }
    }

    #[test]
    fn shadows_grow_with_radius_and_reject_coincident_points() {
        let x = DiskPoint::new(0.1, 0.1).unwrap();
        let y = DiskPoint::new(-0.6, 0.2).unwrap();
        let small = shadow_arc(x, y, 0.5).unwrap();
        let large = shadow_arc(x, y, 1.0).unwrap();
        assert!(small.half_width < large.half_width);
        assert!(large.contains(small.start() + 1e-9) && large.contains(small.end() - 1e-9));
        assert!(matches!(
            shadow_arc(x, x, 1.0),
            Err(Error::CoincidentPoints(_))
        ));
        assert!(shadow_arc(x, y, 10.0).unwrap().is_full());
    }

    #[test]
    fn conformal_factor_examples() {
        let v = BoundaryDirection::new(0.9);
        let x = DiskPoint::new(0.2, 0.3).unwrap();
        assert!((conformal_factor(&MoebiusMap::identity(), v, x) - 1.0).abs() < 1e-14);
        let rot = MoebiusMap::rotation(1.1);
        assert!((conformal_factor(&rot, v, DiskPoint::ORIGIN) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn conformal_factor_is_the_metric_derivative() {
        let mut rng = rng();
        for _ in 0..20 {
            let g = random_isometry(&mut rng, 2.0);
            let x = random_interior(&mut rng, 1.5);
            let v = random_boundary(&mut rng);
            let factor = conformal_factor(&g, v, x);
            let mut last = f64::NAN;
            for k in 4..8 {
                let w = BoundaryDirection::new(v.angle() + 10f64.powi(-k));
                let ratio =
                    visual_dist(g.apply_boundary(v), g.apply_boundary(w), x) / visual_dist(v, w, x);
                last = ratio;
            }
            assert!((last - factor).abs() < 1e-5 * factor, "{last} vs {factor}");
        }
    }

    #[test]
    fn four_point_condition_holds_with_log_two() {
        let mut rng = rng();
        let defect = GeometryContext::four_point_defect(&mut rng, 10_000, 6.0);
        assert!(defect <= std::f64::consts::LN_2 + 1e-9, "defect {defect}");
        let ctx = GeometryContext::measured(&mut rng, 2000, 2.0);
        assert!(ctx.delta >= std::f64::consts::LN_2);
    }

    #[test]
    fn busemann_shadow_bounds() {
        let mut rng = rng();
        let ctx = GeometryContext::default();
        let x = DiskPoint::ORIGIN;
        let radius = 1.0;
        for _ in 0..2000 {
            let y = random_interior(&mut rng, 8.0);
            if hyp_dist(x, y) < 1e-6 {
                continue;
            }
            let arc = shadow_arc(x, y, radius).unwrap();
            let w = BoundaryDirection::new(
                arc.center_angle + arc.half_width * rng.gen_range(-1.0..1.0),
            );
            let v = random_boundary(&mut rng);
            if v == w {
                continue;
            }
            let vy = gromov_product(v.into(), y.into(), x).unwrap();
            let vw = gromov_product(v.into(), w.into(), x).unwrap();
            let lower = vw.min(hyp_dist(x, y)) - radius - ctx.delta;
            let upper = vw + radius + ctx.delta;
            assert!(lower <= vy + 1e-9 && vy <= upper + 1e-9);
        }
    }
}
