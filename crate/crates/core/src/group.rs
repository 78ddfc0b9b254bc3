//! Schottky groups from paired boundary disks, orbit catalogs and growth rates.
//!
//! A boundary disk is the closed half-plane cut off by the geodesic whose
//! endpoints sit at `center_angle +- angular_radius`. Disks `2i` and `2i + 1`
//! are paired by generator `i`, which maps the exterior of disk `2i` onto the
//! interior of disk `2i + 1`.
//!
//! Words are stored as letter sequences: letter `2i` is generator `i` and
//! letter `2i + 1` its inverse, so `l ^ 1` inverts a letter.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Arc, BoundaryDirection, DiskPoint, MoebiusMap};
use crate::report::{ls_slope, ConvergenceReport};

/// Default cap on enumerated orbit points.
pub const DEFAULT_POINT_CAP: usize = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDisk {
    pub center_angle: f64,
    pub angular_radius: f64,
}

impl BoundaryDisk {
    pub fn new(center_angle: f64, angular_radius: f64) -> Self {
        BoundaryDisk {
            center_angle,
            angular_radius,
        }
    }

    /// Hyperbolic distance from the origin to the bounding geodesic.
    pub fn depth(&self) -> f64 {
        2.0 * (FRAC_PI_4 - 0.5 * self.angular_radius).tan().atanh()
    }

    pub fn arc(&self) -> Arc {
        Arc::new(self.center_angle, self.angular_radius)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupModel {
    disks: Vec<BoundaryDisk>,
    generators: Vec<MoebiusMap>,
    letters: Vec<MoebiusMap>,
    pub alpha_estimate: Option<f64>,
}

/// Builds the generator pairing disk `2i` with disk `2i + 1`.
fn pairing_map(source: &BoundaryDisk, target: &BoundaryDisk) -> MoebiusMap {
    let shift = source.depth() + target.depth();
    MoebiusMap::rotation(target.center_angle)
        .compose(&MoebiusMap::real_translation(shift))
        .compose(&MoebiusMap::rotation(PI - source.center_angle))
}

/// Checks on the circle that `g` maps the closure of the complement of `source`
/// into `target`, endpoints to endpoints.
fn ping_pong_holds(g: &MoebiusMap, source: &BoundaryDisk, target: &BoundaryDisk) -> bool {
    let tol = 1e-9;
    let lo = g.apply_boundary(BoundaryDirection::new(
        source.center_angle - source.angular_radius,
    ));
    let hi = g.apply_boundary(BoundaryDirection::new(
        source.center_angle + source.angular_radius,
    ));
    let t_lo = target.center_angle - target.angular_radius;
    let t_hi = target.center_angle + target.angular_radius;
    let endpoints_match = (wrap_angle(lo.angle() - t_hi).abs() < tol
        && wrap_angle(hi.angle() - t_lo).abs() < tol)
        || (wrap_angle(lo.angle() - t_lo).abs() < tol && wrap_angle(hi.angle() - t_hi).abs() < tol);
    let outside = g.apply_boundary(BoundaryDirection::new(source.center_angle + PI));
    endpoints_match && target.arc().contains(outside.angle())
}

impl GroupModel {
    /// Builds the Schottky group of an even number of pairwise disjoint boundary disks.
    pub fn schottky(disks: &[BoundaryDisk]) -> Result<Self> {
        if disks.len() < 2 || !disks.len().is_multiple_of(2) || disks.len() > 52 {
            return Err(Error::InvalidDiskCount(disks.len()));
        }
        for (i, d) in disks.iter().enumerate() {
            let r = d.angular_radius;
            if !(r > 0.0 && r < FRAC_PI_2) || !d.center_angle.is_finite() {
                return Err(Error::DegenerateDisk {
                    index: i,
                    radius: r,
                });
            }
        }
        for i in 0..disks.len() {
            for j in i + 1..disks.len() {
                let gap = wrap_angle(disks[i].center_angle - disks[j].center_angle).abs();
                if gap <= disks[i].angular_radius + disks[j].angular_radius {
                    return Err(Error::DisksOverlap {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        let mut generators = Vec::with_capacity(disks.len() / 2);
        let mut letters = Vec::with_capacity(disks.len());
        for (i, pair) in disks.chunks(2).enumerate() {
            let g = pairing_map(&pair[0], &pair[1]);
            if !ping_pong_holds(&g, &pair[0], &pair[1])
                || !ping_pong_holds(&g.inverse(), &pair[1], &pair[0])
            {
                return Err(Error::PingPongFailed(i));
            }
            generators.push(g);
            letters.push(g);
            letters.push(g.inverse());
        }
        Ok(GroupModel {
            disks: disks.to_vec(),
            generators,
            letters,
            alpha_estimate: None,
        })
    }

    /// The symmetric rank-2 example: disks of angular radius 0.7 at `0, pi` and `pi/2, 3pi/2`.
    pub fn reference() -> Self {
        let r = 0.7;
        GroupModel::schottky(&[
            BoundaryDisk::new(0.0, r),
            BoundaryDisk::new(PI, r),
            BoundaryDisk::new(FRAC_PI_2, r),
            BoundaryDisk::new(1.5 * PI, r),
        ])
        .expect("reference disks are disjoint")
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn disks(&self) -> &[BoundaryDisk] {
        &self.disks
    }

    pub fn generators(&self) -> &[MoebiusMap] {
        &self.generators
    }

    /// Letter `l` as a map: generator `l / 2`, inverted when `l` is odd.
    pub fn letter(&self, l: u8) -> &MoebiusMap {
        &self.letters[l as usize]
    }

    pub fn letter_count(&self) -> usize {
        self.letters.len()
    }

    /// Rank-one groups are elementary: the limit set is two points.
    pub fn is_elementary(&self) -> bool {
        self.rank() < 2
    }

    pub fn translation_lengths(&self) -> Vec<f64> {
        self.generators
            .iter()
            .map(|g| g.translation_length())
            .collect()
    }

    /// Stable identifier of the disk configuration.
    pub fn fingerprint(&self) -> String {
        let mut s = format!("schottky-r{}", self.rank());
        for d in &self.disks {
            let _ = write!(s, "-{:.6}:{:.6}", d.center_angle, d.angular_radius);
        }
        s
    }

    /// The map of a reduced word.
    pub fn word_map(&self, word: &[u8]) -> MoebiusMap {
        word.iter().fold(MoebiusMap::identity(), |acc, &l| {
            acc.compose(self.letter(l))
        })
    }
}

/// Reduced word printed as `a`, `b`, ... for generators and `A`, `B`, ... for inverses.
pub fn format_word(word: &[u8]) -> String {
    if word.is_empty() {
        return "-".to_string();
    }
    word.iter()
        .map(|&l| {
            let base = if l % 2 == 0 { b'a' } else { b'A' };
            (base + l / 2) as char
        })
        .collect()
}

pub fn parse_word(s: &str) -> Option<Vec<u8>> {
    if s == "-" {
        return Some(Vec::new());
    }
    s.bytes()
        .map(|c| match c {
            b'a'..=b'z' => Some(2 * (c - b'a')),
            b'A'..=b'Z' => Some(2 * (c - b'A') + 1),
            _ => None,
        })
        .collect()
}

pub fn invert_word(word: &[u8]) -> Vec<u8> {
    word.iter().rev().map(|&l| l ^ 1).collect()
}

pub fn is_reduced(word: &[u8]) -> bool {
    word.windows(2).all(|w| w[0] != w[1] ^ 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitPoint {
    pub word: Vec<u8>,
    /// The group element `gamma`.
    pub map: MoebiusMap,
    /// `gamma` conjugated into the frame where the base point is the origin.
    pub local: MoebiusMap,
    /// `gamma . x`.
    pub image: DiskPoint,
    /// `gamma^{-1} . x`.
    pub inverse_image: DiskPoint,
    /// `d(x, gamma . x)`.
    pub dist: f64,
}

impl OrbitPoint {
    fn new(frame: &MoebiusMap, word: Vec<u8>, local: MoebiusMap) -> Self {
        let map = frame.compose(&local).compose(&frame.inverse());
        OrbitPoint {
            word,
            map,
            image: frame.apply(local.apply(DiskPoint::ORIGIN)),
            inverse_image: frame.apply(local.inverse().apply(DiskPoint::ORIGIN)),
            dist: local.displacement_from_origin(),
            local,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnumerationOptions {
    pub point_cap: usize,
    /// Extra distance beyond `max_dist` before a prefix is abandoned;
    /// defaults to twice the largest generator displacement.
    pub prune_margin: Option<f64>,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            point_cap: DEFAULT_POINT_CAP,
            prune_margin: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitCatalog {
    base_point: DiskPoint,
    max_dist: f64,
    rank: usize,
    points: Vec<OrbitPoint>,
}

/// Half-open annulus `n - rho <= d < n + rho`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub n: u32,
    pub rho: f64,
}

impl AnnulusSpec {
    pub fn new(n: u32, rho: f64) -> Self {
        AnnulusSpec { n, rho }
    }

    pub fn lower(&self) -> f64 {
        self.n as f64 - self.rho
    }

    pub fn upper(&self) -> f64 {
        self.n as f64 + self.rho
    }
}

struct Walker<'a> {
    letters: &'a [MoebiusMap],
    max_dist: f64,
    cutoff: f64,
}

impl Walker<'_> {
    /// Depth-first walk over reduced extensions of `word`; `sink` sees every node
    /// within `max_dist` and returns `false` to abort the walk.
    fn visit(
        &self,
        word: &mut Vec<u8>,
        map: &MoebiusMap,
        sink: &mut dyn FnMut(&[u8], &MoebiusMap) -> bool,
    ) -> bool {
        if map.displacement_from_origin() <= self.max_dist && !sink(word, map) {
            return false;
        }
        let last = word.last().copied();
        for l in 0..self.letters.len() as u8 {
            if last == Some(l ^ 1) {
                continue;
            }
            let child = map.compose(&self.letters[l as usize]);
            if child.displacement_from_origin() > self.cutoff {
                continue;
            }
            word.push(l);
            let ok = self.visit(word, &child, sink);
            word.pop();
            if !ok {
                return false;
            }
        }
        true
    }
}

pub fn enumerate_orbit(group: &GroupModel, x: DiskPoint, max_dist: f64) -> Result<OrbitCatalog> {
    enumerate_orbit_with(group, x, max_dist, &EnumerationOptions::default())
}

/// Depth of the pilot catalog used by [`predict_orbit_size`].
pub const PILOT_DEPTH: f64 = 10.0;

/// Predicted `|{gamma : d(x, gamma x) <= max_dist}|`, extrapolated from a pilot
/// catalog with the estimated exponent: `N(D) ~ N(D0) e^{alpha (D - D0)}`.
///
/// Returns `BudgetExceeded` when the prediction passes `point_cap`, so that hopeless
/// requests fail in milliseconds instead of after a capped counting pass.
pub fn predict_orbit_size(
    group: &GroupModel,
    x: DiskPoint,
    max_dist: f64,
    point_cap: usize,
) -> Result<f64> {
    let pilot_depth = max_dist.min(PILOT_DEPTH);
    let pilot = enumerate_orbit_with(
        group,
        x,
        pilot_depth,
        &EnumerationOptions {
            point_cap,
            prune_margin: None,
        },
    )?;
    let base = pilot.len() as f64;
    let predicted = if max_dist <= pilot_depth {
        base
    } else if group.rank() < 2 {
        base * max_dist / pilot_depth
    } else {
        let alpha = estimate_alpha(&pilot)?.alpha;
        base * (alpha * (max_dist - pilot_depth)).exp()
    };
    if predicted > point_cap as f64 {
        return Err(Error::BudgetExceeded { cap: point_cap });
    }
    Ok(predicted)
}

/// Enumerates `{gamma : d(x, gamma x) <= max_dist}` over reduced words.
///
/// A counting pass runs first so that an over-budget request fails before any
/// point is stored. Subtrees below short prefixes are walked in parallel and the
/// result is sorted by `(dist, word)`.
pub fn enumerate_orbit_with(
    group: &GroupModel,
    x: DiskPoint,
    max_dist: f64,
    opts: &EnumerationOptions,
) -> Result<OrbitCatalog> {
    if !(max_dist > 0.0 && max_dist.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "max_dist must be positive, got {max_dist}"
        )));
    }
    let frame = MoebiusMap::transvection_to(x);
    let letters: Vec<MoebiusMap> = (0..group.letter_count() as u8)
        .map(|l| frame.inverse().compose(group.letter(l)).compose(&frame))
        .collect();
    let widest = letters
        .iter()
        .map(|g| g.displacement_from_origin())
        .fold(0.0, f64::max);
    let margin = opts.prune_margin.unwrap_or(2.0 * widest);
    let walker = Walker {
        letters: &letters,
        max_dist,
        cutoff: max_dist + margin,
    };

    // Breadth-first split into independent subtrees.
    let mut shallow: Vec<(Vec<u8>, MoebiusMap)> = Vec::new();
    let mut seeds = vec![(Vec::new(), MoebiusMap::identity())];
    while seeds.len() < 64 && !seeds.is_empty() && seeds[0].0.len() < 6 {
        let mut next = Vec::new();
        for (word, map) in seeds {
            for l in 0..letters.len() as u8 {
                if word.last() == Some(&(l ^ 1)) {
                    continue;
                }
                let child = map.compose(&letters[l as usize]);
                if child.displacement_from_origin() <= walker.cutoff {
                    let mut w = word.clone();
                    w.push(l);
                    next.push((w, child));
                }
            }
            if map.displacement_from_origin() <= max_dist {
                shallow.push((word, map));
            }
        }
        seeds = next;
    }

    let counter = AtomicUsize::new(shallow.len());
    let cap = opts.point_cap;
    let within_budget = counter.load(Ordering::Relaxed) <= cap
        && seeds.par_iter().all(|(word, map)| {
            let mut w = word.clone();
            walker.visit(&mut w, map, &mut |_, _| {
                counter.fetch_add(1, Ordering::Relaxed) < cap
            })
        });
    if !within_budget {
        return Err(Error::BudgetExceeded { cap });
    }

    let mut points: Vec<OrbitPoint> = shallow
        .into_iter()
        .map(|(w, m)| OrbitPoint::new(&frame, w, m))
        .collect();
    let deep: Vec<Vec<OrbitPoint>> = seeds
        .par_iter()
        .map(|(word, map)| {
            let mut found = Vec::new();
            let mut w = word.clone();
            walker.visit(&mut w, map, &mut |w, m| {
                found.push(OrbitPoint::new(&frame, w.to_vec(), *m));
                true
            });
            found
        })
        .collect();
    points.extend(deep.into_iter().flatten());
    Ok(OrbitCatalog::from_points(x, max_dist, group.rank(), points))
}

impl OrbitCatalog {
    /// Catalog from arbitrary points, sorted by `(dist, word)`.
    pub fn from_points(
        base_point: DiskPoint,
        max_dist: f64,
        rank: usize,
        mut points: Vec<OrbitPoint>,
    ) -> Self {
        points.sort_by(|a, b| a.dist.total_cmp(&b.dist).then_with(|| a.word.cmp(&b.word)));
        OrbitCatalog {
            base_point,
            max_dist,
            rank,
            points,
        }
    }

    /// The one-point catalog `{identity}`.
    pub fn identity_only(base_point: DiskPoint, max_dist: f64) -> Self {
        let frame = MoebiusMap::transvection_to(base_point);
        let p = OrbitPoint::new(&frame, Vec::new(), MoebiusMap::identity());
        OrbitCatalog::from_points(base_point, max_dist, 0, vec![p])
    }

    pub fn base_point(&self) -> DiskPoint {
        self.base_point
    }

    pub fn max_dist(&self) -> f64 {
        self.max_dist
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn points(&self) -> &[OrbitPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `|Gamma_r(x)| = #{gamma : d(x, gamma x) < r}`.
    pub fn count_below(&self, r: f64) -> usize {
        self.points.partition_point(|p| p.dist < r)
    }

    /// The sub-catalog with `dist <= max_dist`.
    pub fn truncated(&self, max_dist: f64) -> OrbitCatalog {
        let end = self.points.partition_point(|p| p.dist <= max_dist);
        OrbitCatalog {
            base_point: self.base_point,
            max_dist: max_dist.min(self.max_dist),
            rank: self.rank,
            points: self.points[..end].to_vec(),
        }
    }

    /// Orbit points with `n - rho <= dist < n + rho`.
    pub fn annulus(&self, spec: AnnulusSpec) -> Result<&[OrbitPoint]> {
        if !(spec.rho > 0.0) || (spec.n as f64) < spec.rho || spec.upper() > self.max_dist + 1e-12 {
            return Err(Error::OutOfRange(format!(
                "annulus n={} rho={} needs rho <= n and n + rho <= {}",
                spec.n, spec.rho, self.max_dist
            )));
        }
        let lo = self.points.partition_point(|p| p.dist < spec.lower());
        let hi = self.points.partition_point(|p| p.dist < spec.upper());
        Ok(&self.points[lo..hi])
    }

    /// Largest `n` for which the annulus of half-width `rho` fits in the catalog.
    pub fn max_annulus(&self, rho: f64) -> u32 {
        (self.max_dist - rho + 1e-12).floor().max(0.0) as u32
    }
}

impl OrbitCatalog {
    /// Line format: a `#` header with base point, `max_dist` and rank, then one
    /// record per point: word, `re a, im a, re b, im b`, image coordinates, distance.
    pub fn to_lines(&self) -> String {
        let mut out = format!(
            "# {:.16e} {:.16e} {:.16e} {}\n",
            self.base_point.re, self.base_point.im, self.max_dist, self.rank
        );
        for p in &self.points {
            let [ar, ai, br, bi] = p.map.entries();
            let _ = writeln!(
                out,
                "{} {ar:.16e} {ai:.16e} {br:.16e} {bi:.16e} {:.16e} {:.16e} {:.16e}",
                format_word(&p.word),
                p.image.re,
                p.image.im,
                p.dist
            );
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self> {
        let parse_err = |line: usize, message: &str| Error::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty catalog"))?;
        let head: Vec<&str> = header
            .strip_prefix('#')
            .ok_or_else(|| parse_err(1, "missing header"))?
            .split_whitespace()
            .collect();
        if head.len() != 4 {
            return Err(parse_err(
                1,
                "header needs base re, base im, max_dist, rank",
            ));
        }
        let num = |s: &str, line: usize| {
            s.parse::<f64>()
                .map_err(|e| parse_err(line, &format!("{s:?}: {e}")))
        };
        let base = DiskPoint::new(num(head[0], 1)?, num(head[1], 1)?)?;
        let max_dist = num(head[2], 1)?;
        let rank = head[3]
            .parse::<usize>()
            .map_err(|e| parse_err(1, &e.to_string()))?;
        let frame = MoebiusMap::transvection_to(base);
        let mut points = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 8 {
                return Err(parse_err(lineno, "expected 8 fields"));
            }
            let word = parse_word(f[0]).ok_or_else(|| parse_err(lineno, "bad word"))?;
            let vals = f[1..]
                .iter()
                .map(|s| num(s, lineno))
                .collect::<Result<Vec<f64>>>()?;
            let a = num_complex::Complex64::new(vals[0], vals[1]);
            let b = num_complex::Complex64::new(vals[2], vals[3]);
            let map = MoebiusMap::from_entries(a, b)
                .ok_or_else(|| parse_err(lineno, "matrix is not in SU(1,1)"))?;
            let local = frame.inverse().compose(&map).compose(&frame);
            let p = OrbitPoint::new(&frame, word, local);
            if (p.dist - vals[6]).abs() > 1e-9 * vals[6].max(1.0) {
                return Err(parse_err(lineno, "distance does not match matrix"));
            }
            points.push(p);
        }
        Ok(OrbitCatalog::from_points(base, max_dist, rank, points))
    }
}

/// Both growth-rate estimates of the critical exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    /// Least-squares slope of `log |Gamma_n|` over the trailing half of `n`.
    pub alpha: f64,
    /// Exponent at which two consecutive shells of the Poincare series carry equal mass.
    pub poincare: f64,
    pub warning: Option<String>,
}

impl AlphaEstimate {
    pub fn relative_gap(&self) -> f64 {
        if self.alpha == 0.0 {
            return 0.0;
        }
        (self.alpha - self.poincare).abs() / self.alpha
    }
}

/// Estimates the critical exponent from orbit growth.
pub fn estimate_alpha(cat: &OrbitCatalog) -> Result<AlphaEstimate> {
    let top = cat.max_dist().floor() as u32;
    let populated = (1..=top)
        .filter(|&n| cat.count_below(n as f64) > cat.count_below(n as f64 - 1.0))
        .count();
    if cat.rank() < 2 {
        return Ok(AlphaEstimate {
            alpha: 0.0,
            poincare: 0.0,
            warning: Some(
                "elementary group: orbit growth is linear, exponent reported as 0".into(),
            ),
        });
    }
    if populated < 8 {
        return Err(Error::InsufficientDepth(format!(
            "{populated} populated unit annuli, need 8"
        )));
    }
    let first = (top / 2).max(1);
    let xs: Vec<f64> = (first..=top).map(|n| n as f64).collect();
    let ys: Vec<f64> = (first..=top)
        .map(|n| (cat.count_below(n as f64) as f64).max(1.0).ln())
        .collect();
    let alpha = ls_slope(&xs, &ys);

    // Equal-mass shells [D - 2w, D - w) and [D - w, D) of the Poincare series.
    let d_max = top as f64;
    let w = 0.25 * d_max;
    let shell = |s: f64, lo: f64, hi: f64| -> f64 {
        let a = cat.count_below(lo);
        let b = cat.count_below(hi);
        cat.points()[a..b]
            .iter()
            .map(|p| (-s * (p.dist - lo)).exp())
            .sum()
    };
    let balance = |s: f64| -> f64 {
        let inner = shell(s, d_max - 2.0 * w, d_max - w);
        let outer = shell(s, d_max - w, d_max);
        (outer.max(1e-300) / inner.max(1e-300)).ln() - s * w
    };
    let (mut lo, mut hi) = (0.0, 4.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(AlphaEstimate {
        alpha,
        poincare: 0.5 * (lo + hi),
        warning: None,
    })
}

/// Annulus counts `|C_n(x, rho)|`, normalized counts `e^{-alpha n} |C_n|` and
/// consecutive ratios for every feasible `n`.
///
/// The verdict asks the trailing coefficient of variation of the normalized
/// counts (last four rows) to stay below 0.1.
pub fn growth_report(cat: &OrbitCatalog, rho: f64, fingerprint: &str) -> Result<ConvergenceReport> {
    let est = estimate_alpha(cat)?;
    let alpha = est.alpha;
    let first = rho.ceil().max(1.0) as u32;
    let last = cat.max_annulus(rho);
    if last < first {
        return Err(Error::OutOfRange(format!(
            "no annulus of half-width {rho} fits below {}",
            cat.max_dist()
        )));
    }
    let mut report = ConvergenceReport::new(
        "growth",
        fingerprint,
        &["count", "normalized", "ratio", "trailing_cv"],
    )
    .param("rho", rho)
    .param("alpha", alpha)
    .param("alpha_poincare", est.poincare)
    .param("max_dist", cat.max_dist())
    .param("exp_alpha", alpha.exp());
    let mut normalized = Vec::new();
    let mut prev: Option<f64> = None;
    for n in first..=last {
        let count = cat.annulus(AnnulusSpec::new(n, rho))?.len() as f64;
        let norm = (-alpha * n as f64).exp() * count;
        normalized.push(norm);
        let ratio = match prev {
            Some(p) if p > 0.0 => count / p,
            _ => f64::NAN,
        };
        let tail = &normalized[normalized.len().saturating_sub(4)..];
        report.push(n, vec![count, norm, ratio, coefficient_of_variation(tail)]);
        prev = Some(count);
    }
    let cv = report.rows.last().map(|r| r.values[3]).unwrap_or(f64::NAN);
    report.set_verdict(
        cv < 0.1,
        format!("trailing coefficient of variation of e^(-alpha n)|C_n| = {cv:.4}"),
    );
    Ok(report)
}

pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt() / mean.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hyp_dist;
    use std::f64::consts::TAU;

    fn symmetric(radius: f64) -> GroupModel {
        GroupModel::schottky(&[
            BoundaryDisk::new(0.0, radius),
            BoundaryDisk::new(PI, radius),
            BoundaryDisk::new(FRAC_PI_2, radius),
            BoundaryDisk::new(1.5 * PI, radius),
        ])
        .unwrap()
    }

    #[test]
    fn ping_pong_by_dense_interval_images() {
        let g = symmetric(0.3);
        assert_eq!(g.rank(), 2);
        assert!(!g.is_elementary());
        for (i, pair) in g.disks().chunks(2).enumerate() {
            let gen = g.generators()[i];
            for k in 0..2000 {
                let theta = k as f64 / 2000.0 * TAU;
                if pair[0].arc().contains(theta) {
                    continue;
                }
                let image = gen.apply_boundary(BoundaryDirection::new(theta));
                assert!(
                    pair[1].arc().contains(image.angle()),
                    "generator {i} angle {theta}"
                );
                if !pair[1].arc().contains(theta) {
                    let back = gen.inverse().apply_boundary(BoundaryDirection::new(theta));
                    assert!(pair[0].arc().contains(back.angle()));
                }
            }
        }
    }

    #[test]
    fn depth_is_distance_to_bounding_geodesic() {
        let d = BoundaryDisk::new(0.0, 0.4);
        // the geodesic through e^{+-ir} meets the real axis at sec r - tan r
        let foot = 1.0 / 0.4f64.cos() - 0.4f64.tan();
        let oracle = hyp_dist(DiskPoint::ORIGIN, DiskPoint::new(foot, 0.0).unwrap());
        assert!((d.depth() - oracle).abs() < 1e-12);
    }

    #[test]
    fn builder_rejects_bad_configurations() {
        let overlap = GroupModel::schottky(&[
            BoundaryDisk::new(0.0, 0.5),
            BoundaryDisk::new(0.8, 0.5),
            BoundaryDisk::new(2.0, 0.2),
            BoundaryDisk::new(4.0, 0.2),
        ]);
        assert_eq!(
            overlap,
            Err(Error::DisksOverlap {
                first: 0,
                second: 1
            })
        );
        let flat = GroupModel::schottky(&[BoundaryDisk::new(0.0, 0.0), BoundaryDisk::new(PI, 0.3)]);
        assert!(matches!(flat, Err(Error::DegenerateDisk { index: 0, .. })));
        let wide = GroupModel::schottky(&[BoundaryDisk::new(0.0, 1.6), BoundaryDisk::new(PI, 0.3)]);
        assert!(matches!(wide, Err(Error::DegenerateDisk { index: 0, .. })));
        let odd = GroupModel::schottky(&[BoundaryDisk::new(0.0, 0.3)]);
        assert_eq!(odd, Err(Error::InvalidDiskCount(1)));
    }

    #[test]
    fn rank_one_is_elementary_with_zero_exponent() {
        let g = GroupModel::schottky(&[BoundaryDisk::new(0.0, 0.5), BoundaryDisk::new(PI, 0.5)])
            .unwrap();
        assert!(g.is_elementary());
        let cat = enumerate_orbit(&g, DiskPoint::ORIGIN, 30.0).unwrap();
        let t = g.translation_lengths()[0];
        assert_eq!(cat.len(), 1 + 2 * (30.0 / t).floor() as usize);
        let est = estimate_alpha(&cat).unwrap();
        assert_eq!(est.alpha, 0.0);
        assert!(est.warning.is_some());
    }

    #[test]
    fn shallow_catalog_is_identity() {
        let g = symmetric(0.6);
        let smallest = g
            .generators()
            .iter()
            .map(|m| m.displacement_from_origin())
            .fold(f64::INFINITY, f64::min);
        let cat = enumerate_orbit(&g, DiskPoint::ORIGIN, smallest - 1e-6).unwrap();
        assert_eq!(cat.len(), 1);
        assert!(cat.points()[0].word.is_empty());
    }

    #[test]
    fn catalog_points_are_consistent() {
        let g = symmetric(0.6);
        let x = DiskPoint::new(0.1, -0.05).unwrap();
        let cat = enumerate_orbit(&g, x, 9.0).unwrap();
        assert!(cat.len() > 100);
        let mut prev = 0;
        for n in 0..=9 {
            let c = cat.count_below(n as f64);
            assert!(c >= prev);
            prev = c;
        }
        for p in cat.points() {
            assert!(is_reduced(&p.word));
            assert!(p.dist <= 9.0);
            assert!((hyp_dist(x, p.image) - p.dist).abs() < 1e-9);
            let direct = g.word_map(&p.word);
            assert!((direct.apply(x).re - p.image.re).abs() < 1e-9);
            let back = direct.inverse().apply(x);
            assert!((back.re - p.inverse_image.re).abs() < 1e-9);
            assert!((back.im - p.inverse_image.im).abs() < 1e-9);
        }
        let pts = cat.points();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                assert!(hyp_dist(pts[i].image, pts[j].image) > 1e-6);
            }
        }
    }

    #[test]
    fn wider_prune_margin_finds_nothing_new() {
        let g = symmetric(0.7);
        let base = enumerate_orbit(&g, DiskPoint::ORIGIN, 10.0).unwrap();
        let widest = g
            .generators()
            .iter()
            .map(|m| m.displacement_from_origin())
            .fold(0.0, f64::max);
        let opts = EnumerationOptions {
            prune_margin: Some(4.0 * widest),
            ..Default::default()
        };
        let wide = enumerate_orbit_with(&g, DiskPoint::ORIGIN, 10.0, &opts).unwrap();
        assert_eq!(base, wide);
    }

    #[test]
    fn orbit_size_prediction() {
        let group = GroupModel::reference();
        let predicted =
            predict_orbit_size(&group, DiskPoint::ORIGIN, 14.0, DEFAULT_POINT_CAP).unwrap();
        let actual = enumerate_orbit(&group, DiskPoint::ORIGIN, 14.0)
            .unwrap()
            .len() as f64;
        assert!(
            (predicted / actual - 1.0).abs() < 0.3,
            "{predicted} vs {actual}"
        );
        assert_eq!(
            predict_orbit_size(&group, DiskPoint::ORIGIN, 30.0, DEFAULT_POINT_CAP),
            Err(Error::BudgetExceeded {
                cap: DEFAULT_POINT_CAP
            })
        );
    }

    #[test]
    fn budget_cap_is_enforced() {
        let g = symmetric(0.7);
        let opts = EnumerationOptions {
            point_cap: 1000,
            ..Default::default()
        };
        assert_eq!(
            enumerate_orbit_with(&g, DiskPoint::ORIGIN, 14.0, &opts),
            Err(Error::BudgetExceeded { cap: 1000 })
        );
        assert!(matches!(
            enumerate_orbit(&g, DiskPoint::ORIGIN, -1.0),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn annulus_bookkeeping() {
        let g = symmetric(0.7);
        let cat = enumerate_orbit(&g, DiskPoint::ORIGIN, 10.0).unwrap();
        let full = cat.annulus(AnnulusSpec::new(5, 5.0)).unwrap();
        assert_eq!(full.len(), cat.count_below(10.0));
        let a = cat.annulus(AnnulusSpec::new(4, 1.0)).unwrap();
        let b = cat.annulus(AnnulusSpec::new(6, 1.0)).unwrap();
        assert!(a.iter().all(|p| !b.iter().any(|q| q.word == p.word)));
        assert!(a.iter().all(|p| (3.0..5.0).contains(&p.dist)));
        assert!(cat.annulus(AnnulusSpec::new(10, 1.0)).is_err());
        assert!(cat.annulus(AnnulusSpec::new(1, 2.0)).is_err());
        assert_eq!(cat.max_annulus(1.0), 9);
    }

    #[test]
    fn line_format_round_trip() {
        let g = symmetric(0.6);
        let x = DiskPoint::new(-0.2, 0.1).unwrap();
        let cat = enumerate_orbit(&g, x, 7.0).unwrap();
        let text = cat.to_lines();
        let back = OrbitCatalog::from_lines(&text).unwrap();
        assert_eq!(back.len(), cat.len());
        let by_word = |c: &OrbitCatalog| {
            let mut v: Vec<(Vec<u8>, f64)> = c
                .points()
                .iter()
                .map(|p| (p.word.clone(), p.dist))
                .collect();
            v.sort_by(|a, b| a.0.cmp(&b.0));
            v
        };
        for (p, q) in by_word(&cat).iter().zip(by_word(&back)) {
            assert_eq!(p.0, q.0);
            assert!((p.1 - q.1).abs() < 1e-10);
        }
        assert!(matches!(
            OrbitCatalog::from_lines("# 0 0 1 2\nab 1 0 0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert_eq!(
            parse_word(&format_word(&[0, 3, 2, 1])),
            Some(vec![0, 3, 2, 1])
        );
        assert_eq!(invert_word(&[0, 3]), vec![2, 1]);
    }

    #[test]
    fn estimators_agree_and_track_disk_size() {
        let big = enumerate_orbit(&symmetric(0.7), DiskPoint::ORIGIN, 14.0).unwrap();
        let est = estimate_alpha(&big).unwrap();
        assert!(est.relative_gap() < 0.02, "{est:?}");
        let small = enumerate_orbit(&symmetric(0.6), DiskPoint::ORIGIN, 14.0).unwrap();
        let est_small = estimate_alpha(&small).unwrap();
        assert!(est_small.alpha < est.alpha);
        let shallow = enumerate_orbit(&symmetric(0.7), DiskPoint::ORIGIN, 5.0).unwrap();
        assert!(matches!(
            estimate_alpha(&shallow),
            Err(Error::InsufficientDepth(_))
        ));
    }

    #[test]
    fn growth_rows_follow_the_annulus_asymptotics() {
        let cat = enumerate_orbit(&symmetric(0.7), DiskPoint::ORIGIN, 14.0).unwrap();
        let alpha = estimate_alpha(&cat).unwrap().alpha;
        let one = growth_report(&cat, 1.0, "t").unwrap();
        let two = growth_report(&cat, 2.0, "t").unwrap();
        let ratios = one.column("ratio").unwrap();
        for r in &ratios[ratios.len() - 4..] {
            assert!((r / alpha.exp() - 1.0).abs() < 0.05, "{r}");
        }
        let tail = |r: &ConvergenceReport| {
            let v = r.column("normalized").unwrap();
            v[v.len() - 3..].iter().sum::<f64>() / 3.0
        };
        let factor = tail(&two) / tail(&one);
        let oracle = (2.0 * alpha).sinh() / alpha.sinh();
        assert!((factor / oracle - 1.0).abs() < 0.1, "{factor} vs {oracle}");
        assert!(growth_report(&cat, 20.0, "t").is_err());
    }
}
