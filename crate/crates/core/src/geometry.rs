//! Exit domains: membership, crossing detection, boundary sampling and the
//! sampled checks on sublevel sets and flow stability.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::landscape::{random_unit, Landscape};
use crate::rng::trajectory_rng;
use crate::{dist, dot, norm, Error, Result};

/// Residual tolerance for boundary points produced by bisection / projection.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("box corners must share a positive dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidArgument("box corners must be finite with lo ≤ hi".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn diagonal(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
    }

    pub fn clip(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.lo.iter().zip(&self.hi)).map(|(xi, (l, h))| xi.clamp(*l, *h)).collect()
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(xi, (l, h))| *l <= *xi && *xi <= *h)
    }

    pub fn padded(&self, pad: f64) -> Self {
        Self { lo: self.lo.iter().map(|l| l - pad).collect(), hi: self.hi.iter().map(|h| h + pad).collect() }
    }
}

/// Built-in level functions `g` for implicit domains `{g < 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelFunction {
    /// `Σ (x_i − c_i)⁴ − R⁴`
    Quartic { center: Vec<f64>, radius: f64 },
    /// `Σ ((x_i − c_i)/s_i)² − 1`
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
}

impl LevelFunction {
    pub fn dim(&self) -> usize {
        match self {
            LevelFunction::Quartic { center, .. } | LevelFunction::Ellipsoid { center, .. } => center.len(),
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            LevelFunction::Quartic { center, .. } | LevelFunction::Ellipsoid { center, .. } => center,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            LevelFunction::Quartic { center, radius } => {
                x.iter().zip(center).map(|(xi, ci)| (xi - ci).powi(4)).sum::<f64>() - radius.powi(4)
            }
            LevelFunction::Ellipsoid { center, semi_axes } => {
                x.iter().zip(center).zip(semi_axes).map(|((xi, ci), si)| ((xi - ci) / si).powi(2)).sum::<f64>() - 1.0
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LevelFunction::Quartic { center, .. } => {
                x.iter().zip(center).map(|(xi, ci)| 4.0 * (xi - ci).powi(3)).collect()
            }
            LevelFunction::Ellipsoid { center, semi_axes } => {
                x.iter().zip(center).zip(semi_axes).map(|((xi, ci), si)| 2.0 * (xi - ci) / (si * si)).collect()
            }
        }
    }

    /// Half-widths of the tight box around `{g ≤ 0}`.
    fn extent(&self) -> Vec<f64> {
        match self {
            LevelFunction::Quartic { center, radius } => vec![*radius; center.len()],
            LevelFunction::Ellipsoid { semi_axes, .. } => semi_axes.clone(),
        }
    }
}

/// The exit domain `G`.
///
/// Interval endpoints set to `None` are infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Interval { lo: Option<f64>, hi: Option<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Implicit { level: LevelFunction, bbox: Aabb },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    /// fraction of the segment `p → q` at which `∂G` is first met
    pub lambda: f64,
    pub point: Vec<f64>,
}

impl DomainSpec {
    pub fn interval(lo: f64, hi: f64) -> Self {
        let wrap = |v: f64| if v.is_finite() { Some(v) } else { None };
        DomainSpec::Interval { lo: wrap(lo), hi: wrap(hi) }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        DomainSpec::Ball { center, radius }
    }

    pub fn implicit(level: LevelFunction, bbox: Aabb) -> Result<Self> {
        if level.dim() != bbox.dim() {
            return Err(Error::DimensionMismatch { expected: level.dim(), got: bbox.dim() });
        }
        let ext = level.extent();
        let strict = level
            .center()
            .iter()
            .zip(&ext)
            .zip(bbox.lo.iter().zip(&bbox.hi))
            .all(|((c, e), (l, h))| *l < c - e && c + e < *h);
        if !strict {
            return Err(Error::InvalidArgument("bounding box must strictly contain {g ≤ 0}".into()));
        }
        Ok(DomainSpec::Implicit { level, bbox })
    }

    /// Checks internal consistency (positive radius, ordered corners, ...).
    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Interval { lo, hi } => {
                if let (Some(l), Some(h)) = (lo, hi) {
                    if !(l < h) {
                        return Err(Error::InvalidArgument("interval needs lo < hi".into()));
                    }
                }
            }
            DomainSpec::Ball { radius, center } => {
                if !(*radius > 0.0) || center.is_empty() {
                    return Err(Error::InvalidArgument("ball needs a positive radius".into()));
                }
            }
            DomainSpec::Box { lo, hi } => {
                Aabb::new(lo.clone(), hi.clone())?;
                if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                    return Err(Error::InvalidArgument("box needs lo < hi on every axis".into()));
                }
            }
            DomainSpec::Implicit { level, bbox } => {
                DomainSpec::implicit(level.clone(), bbox.clone())?;
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Ball { center, .. } => center.len(),
            DomainSpec::Box { lo, .. } => lo.len(),
            DomainSpec::Implicit { level, .. } => level.dim(),
        }
    }

    /// `x ∈ G` (open set).
    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::Interval { lo, hi } => {
                lo.is_none_or(|l| x[0] > l) && hi.is_none_or(|h| x[0] < h)
            }
            DomainSpec::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2 < radius * radius
            }
            DomainSpec::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(xi, (l, h))| l < xi && xi < h),
            DomainSpec::Implicit { level, .. } => level.value(x) < 0.0,
        }
    }

    /// Signed distance for primitives, level value for implicit domains;
    /// negative inside.
    pub fn level(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::Interval { lo, hi } => {
                let a = lo.map_or(f64::NEG_INFINITY, |l| l - x[0]);
                let b = hi.map_or(f64::NEG_INFINITY, |h| x[0] - h);
                a.max(b)
            }
            DomainSpec::Ball { center, radius } => dist(x, center) - radius,
            DomainSpec::Box { lo, hi } => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for ((xi, l), h) in x.iter().zip(lo).zip(hi) {
                    let q = (l - xi).max(xi - h);
                    outside += q.max(0.0).powi(2);
                    inside = inside.max(q);
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
            DomainSpec::Implicit { level, .. } => level.value(x),
        }
    }

    /// Finite bounding box, if the domain is bounded.
    pub fn bounding_box(&self) -> Option<Aabb> {
        match self {
            DomainSpec::Interval { lo: Some(l), hi: Some(h) } => Some(Aabb { lo: vec![*l], hi: vec![*h] }),
            DomainSpec::Interval { .. } => None,
            DomainSpec::Ball { center, radius } => Some(Aabb {
                lo: center.iter().map(|c| c - radius).collect(),
                hi: center.iter().map(|c| c + radius).collect(),
            }),
            DomainSpec::Box { lo, hi } => Some(Aabb { lo: lo.clone(), hi: hi.clone() }),
            DomainSpec::Implicit { bbox, .. } => Some(bbox.clone()),
        }
    }

    /// Distance from an interior point to `∂G` (estimated by rays for
    /// implicit domains).
    pub fn inradius_about(&self, a: &[f64]) -> f64 {
        match self {
            DomainSpec::Interval { lo, hi } => {
                let l = lo.map_or(f64::INFINITY, |l| a[0] - l);
                let h = hi.map_or(f64::INFINITY, |h| h - a[0]);
                l.min(h)
            }
            DomainSpec::Ball { center, radius } => radius - dist(a, center),
            DomainSpec::Box { lo, hi } => a
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(x, (l, h))| (x - l).min(h - x))
                .fold(f64::INFINITY, f64::min),
            DomainSpec::Implicit { bbox, .. } => {
                let mut rng = trajectory_rng(0x1a);
                let far = 2.0 * bbox.diagonal();
                (0..256)
                    .filter_map(|_| {
                        let u = random_unit(&mut rng, a.len());
                        let q: Vec<f64> = a.iter().zip(&u).map(|(ai, ui)| ai + far * ui).collect();
                        self.detect_crossing(a, &q).ok().flatten().map(|c| dist(&c.point, a))
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// First boundary crossing along `p → q`, when `q ∉ G`.
    pub fn detect_crossing(&self, p: &[f64], q: &[f64]) -> Result<Option<Crossing>> {
        if p.len() != self.dim() || q.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.len().min(q.len()) });
        }
        if !self.contains(p) {
            return Err(Error::OutsideDomain);
        }
        if self.contains(q) {
            return Ok(None);
        }
        Ok(Some(self.crossing_unchecked(p, q)))
    }

    /// Crossing for `p ∈ G`, `q ∉ G`; the caller has checked both.
    pub(crate) fn crossing_unchecked(&self, p: &[f64], q: &[f64]) -> Crossing {
        let seg = |lambda: f64| -> Vec<f64> { p.iter().zip(q).map(|(a, b)| a + lambda * (b - a)).collect() };
        match self {
            DomainSpec::Interval { lo, hi } => {
                let (x, y) = (p[0], q[0]);
                let z = match (lo, hi) {
                    (_, Some(h)) if y >= *h => *h,
                    (Some(l), _) => *l,
                    _ => unreachable!("q outside an interval must cross a finite endpoint"),
                };
                Crossing { lambda: ((z - x) / (y - x)).clamp(0.0, 1.0), point: vec![z] }
            }
            DomainSpec::Ball { center, radius } => {
                let d: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
                let pc: Vec<f64> = p.iter().zip(center).map(|(a, b)| a - b).collect();
                let qa = dot(&d, &d);
                let qb = 2.0 * dot(&pc, &d);
                let qc = dot(&pc, &pc) - radius * radius;
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
                let lambda = if qb > 0.0 { 2.0 * qc / (-qb - disc) } else { (-qb + disc) / (2.0 * qa) };
                let lambda = lambda.clamp(0.0, 1.0);
                let z = seg(lambda);
                let zc: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
                let n = norm(&zc);
                let point = center.iter().zip(&zc).map(|(c, v)| c + radius * v / n).collect();
                Crossing { lambda, point }
            }
            DomainSpec::Box { lo, hi } => {
                let mut best = (1.0f64, usize::MAX, 0.0);
                for i in 0..p.len() {
                    let face = if q[i] >= hi[i] {
                        hi[i]
                    } else if q[i] <= lo[i] {
                        lo[i]
                    } else {
                        continue;
                    };
                    let l = (face - p[i]) / (q[i] - p[i]);
                    if l < best.0 || best.1 == usize::MAX {
                        best = (l, i, face);
                    }
                }
                let mut point = seg(best.0);
                point[best.1] = best.2;
                Crossing { lambda: best.0.clamp(0.0, 1.0), point }
            }
            DomainSpec::Implicit { level, .. } => {
                // first sign change on a coarse scan, then bisection
                const SCAN: usize = 32;
                let mut lo_l = 0.0;
                let mut hi_l = 1.0;
                for k in 1..=SCAN {
                    let l = k as f64 / SCAN as f64;
                    if level.value(&seg(l)) >= 0.0 {
                        hi_l = l;
                        lo_l = (k - 1) as f64 / SCAN as f64;
                        break;
                    }
                }
                let mut mid = 0.5 * (lo_l + hi_l);
                for _ in 0..200 {
                    mid = 0.5 * (lo_l + hi_l);
                    let g = level.value(&seg(mid));
                    if g.abs() < 1e-12 {
                        break;
                    }
                    if g < 0.0 {
                        lo_l = mid;
                    } else {
                        hi_l = mid;
                    }
                }
                Crossing { lambda: mid, point: seg(mid) }
            }
        }
    }

    /// `n` points on `∂G`. Intervals return their finite endpoints.
    pub fn sample_boundary(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one boundary sample".into()));
        }
        let mut rng = trajectory_rng(seed);
        match self {
            DomainSpec::Interval { lo, hi } => {
                let pts: Vec<Vec<f64>> = lo.iter().chain(hi.iter()).map(|v| vec![*v]).collect();
                if pts.is_empty() {
                    return Err(Error::UnboundedBoundary);
                }
                Ok(pts)
            }
            DomainSpec::Ball { center, radius } => {
                if center.len() == 1 {
                    return Ok(vec![vec![center[0] - radius], vec![center[0] + radius]]);
                }
                Ok((0..n)
                    .map(|_| {
                        let u = random_unit(&mut rng, center.len());
                        center.iter().zip(&u).map(|(c, ui)| c + radius * ui).collect()
                    })
                    .collect())
            }
            DomainSpec::Box { lo, hi } => {
                let d = lo.len();
                if d == 1 {
                    return Ok(vec![vec![lo[0]], vec![hi[0]]]);
                }
                let widths: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
                let areas: Vec<f64> = (0..d)
                    .map(|i| (0..d).filter(|j| *j != i).map(|j| widths[j]).product::<f64>())
                    .collect();
                let total: f64 = 2.0 * areas.iter().sum::<f64>();
                Ok((0..n)
                    .map(|_| {
                        let mut pick = rng.random::<f64>() * total;
                        let mut face = (0, false);
                        'outer: for (i, a) in areas.iter().enumerate() {
                            for side in [false, true] {
                                if pick < *a {
                                    face = (i, side);
                                    break 'outer;
                                }
                                pick -= a;
                                face = (i, side);
                            }
                        }
                        let mut x: Vec<f64> = (0..d).map(|j| lo[j] + widths[j] * rng.random::<f64>()).collect();
                        x[face.0] = if face.1 { hi[face.0] } else { lo[face.0] };
                        x
                    })
                    .collect())
            }
            DomainSpec::Implicit { level, bbox } => {
                let c = level.center().to_vec();
                let far = bbox.diagonal();
                let mut pts = Vec::with_capacity(n);
                while pts.len() < n {
                    let u = random_unit(&mut rng, c.len());
                    let q: Vec<f64> = c.iter().zip(&u).map(|(ci, ui)| ci + far * ui).collect();
                    let mut z = self.crossing_unchecked(&c, &q).point;
                    // Newton polish onto g = 0
                    for _ in 0..50 {
                        let g = level.value(&z);
                        if g.abs() < 1e-13 {
                            break;
                        }
                        let grad = level.gradient(&z);
                        let gg = dot(&grad, &grad);
                        if gg < 1e-300 {
                            break;
                        }
                        for (zi, gi) in z.iter_mut().zip(&grad) {
                            *zi -= g * gi / gg;
                        }
                    }
                    if level.value(&z).abs() < 1e-9 {
                        pts.push(z);
                    }
                }
                Ok(pts)
            }
        }
    }

    /// Unit normal at `z ∈ ∂G` pointing into `G`.
    pub fn inner_normal(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        let residual = self.level(z).abs();
        if !(residual < 1e-6) {
            return Err(Error::InvalidArgument(format!("point is not on the boundary (residual {residual:e})")));
        }
        match self {
            DomainSpec::Interval { lo, hi } => {
                let dl = lo.map_or(f64::INFINITY, |l| (z[0] - l).abs());
                let dh = hi.map_or(f64::INFINITY, |h| (z[0] - h).abs());
                Ok(vec![if dh <= dl { -1.0 } else { 1.0 }])
            }
            DomainSpec::Ball { center, .. } => {
                let v: Vec<f64> = center.iter().zip(z).map(|(c, x)| c - x).collect();
                let n = norm(&v);
                Ok(v.into_iter().map(|x| x / n).collect())
            }
            DomainSpec::Box { lo, hi } => {
                let mut best = (f64::INFINITY, 0usize, 1.0);
                for i in 0..z.len() {
                    let dl = (z[i] - lo[i]).abs();
                    let dh = (hi[i] - z[i]).abs();
                    if dl < best.0 {
                        best = (dl, i, 1.0);
                    }
                    if dh < best.0 {
                        best = (dh, i, -1.0);
                    }
                }
                let mut n = vec![0.0; z.len()];
                n[best.1] = best.2;
                Ok(n)
            }
            DomainSpec::Implicit { level, .. } => {
                let g = level.gradient(z);
                let gn = norm(&g);
                if gn < 1e-14 {
                    return Err(Error::DegenerateNormal);
                }
                Ok(g.into_iter().map(|x| -x / gn).collect())
            }
        }
    }

    /// Closest point on `∂G` reached along the normal direction (exact for
    /// primitives, Newton iteration for implicit domains).
    pub fn project_to_boundary(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            DomainSpec::Interval { lo, hi } => {
                let dl = lo.map(|l| (x[0] - l).abs());
                let dh = hi.map(|h| (x[0] - h).abs());
                match (dl, dh) {
                    (Some(a), Some(b)) => Some(vec![if a <= b { lo.unwrap() } else { hi.unwrap() }]),
                    (Some(_), None) => Some(vec![lo.unwrap()]),
                    (None, Some(_)) => Some(vec![hi.unwrap()]),
                    (None, None) => None,
                }
            }
            DomainSpec::Ball { center, radius } => {
                let v: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let n = norm(&v);
                if n == 0.0 {
                    return None;
                }
                Some(center.iter().zip(&v).map(|(c, vi)| c + radius * vi / n).collect())
            }
            DomainSpec::Box { lo, hi } => {
                let mut z = x.to_vec();
                let mut best = (f64::INFINITY, 0usize, 0.0);
                for i in 0..z.len() {
                    z[i] = z[i].clamp(lo[i], hi[i]);
                    for face in [lo[i], hi[i]] {
                        let d = (z[i] - face).abs();
                        if d < best.0 {
                            best = (d, i, face);
                        }
                    }
                }
                z[best.1] = best.2;
                Some(z)
            }
            DomainSpec::Implicit { level, .. } => {
                let mut z = x.to_vec();
                for _ in 0..100 {
                    let g = level.value(&z);
                    if g.abs() < 1e-13 {
                        return Some(z);
                    }
                    let grad = level.gradient(&z);
                    let gg = dot(&grad, &grad);
                    if gg < 1e-300 {
                        return None;
                    }
                    for (zi, gi) in z.iter_mut().zip(&grad) {
                        *zi -= g * gi / gg;
                    }
                }
                (level.value(&z).abs() < 1e-9).then_some(z)
            }
        }
    }
}

/// Result of the grid flood fill of `{W_a ≤ H} ∩ G`.
#[derive(Debug, Clone, Serialize)]
pub struct SublevelReport {
    pub bounded: bool,
    pub connected: bool,
    /// boundary samples where `W_a = H` within the grid tolerance
    pub touch_set: Vec<Vec<f64>>,
    pub grid_resolution: f64,
    /// grid nodes in the component of `a`
    pub component_nodes: usize,
    /// sublevel nodes in `G` not reachable from `a`
    pub stray_nodes: usize,
    /// a few of the stray nodes
    pub stray_samples: Vec<Vec<f64>>,
    /// per-axis extent of the component of `a`
    pub extent: Aabb,
}

const MAX_GRID_NODES: usize = 20_000_000;

/// Flood-fills `{x ∈ G : W_a(x) ≤ H}` on a grid of spacing `resolution`.
///
/// `bbox` overrides the grid box; it is required for unbounded domains. For
/// bounded domains the domain box is padded by two cells so that "bounded"
/// means "never reaches the grid edge".
pub fn check_sublevel(
    landscape: &Landscape,
    a: &[f64],
    h: f64,
    domain: &DomainSpec,
    resolution: f64,
    bbox: Option<&Aabb>,
) -> Result<SublevelReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("H must be positive".into()));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let d = landscape.dim();
    if d > 3 {
        return Err(Error::InvalidArgument("sublevel flood fill supports d ≤ 3".into()));
    }
    if a.len() != d || domain.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.len() });
    }
    if !domain.contains(a) {
        return Err(Error::OutsideDomain);
    }
    let grid_box = match (bbox, domain.bounding_box()) {
        (Some(b), _) => b.clone(),
        (None, Some(b)) => b.padded(2.0 * resolution),
        (None, None) => {
            return Err(Error::InvalidArgument("unbounded domain needs an explicit bounding box".into()))
        }
    };
    let counts: Vec<usize> = grid_box
        .lo
        .iter()
        .zip(&grid_box.hi)
        .map(|(l, hh)| ((hh - l) / resolution).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    if total > MAX_GRID_NODES {
        return Err(Error::InvalidArgument(format!("grid of {total} nodes is too fine")));
    }
    let coord = |idx: usize| -> Vec<f64> {
        let mut rem = idx;
        (0..d)
            .map(|k| {
                let i = rem % counts[k];
                rem /= counts[k];
                grid_box.lo[k] + i as f64 * resolution
            })
            .collect()
    };
    let in_set: Vec<bool> = (0..total)
        .map(|idx| {
            let x = coord(idx);
            domain.contains(&x) && landscape.effective_value(a, &x) <= h
        })
        .collect();

    // start from the node nearest to a that lies in the set
    let nearest = {
        let mut idx = 0usize;
        let mut stride = 1usize;
        for k in 0..d {
            let i = ((a[k] - grid_box.lo[k]) / resolution).round().clamp(0.0, (counts[k] - 1) as f64) as usize;
            idx += i * stride;
            stride *= counts[k];
        }
        idx
    };
    let start = if in_set[nearest] {
        Some(nearest)
    } else {
        (0..total)
            .filter(|i| in_set[*i])
            .min_by(|x, y| dist(&coord(*x), a).total_cmp(&dist(&coord(*y), a)))
    };
    let Some(start) = start else {
        return Err(Error::InvalidArgument("no sublevel node near the attractor; refine the grid".into()));
    };

    let mut seen = vec![false; total];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut component = 0usize;
    let mut bounded = true;
    let mut ext_lo = vec![f64::INFINITY; d];
    let mut ext_hi = vec![f64::NEG_INFINITY; d];
    while let Some(idx) = queue.pop_front() {
        component += 1;
        let mut rem = idx;
        let mut stride = 1usize;
        for k in 0..d {
            let i = rem % counts[k];
            rem /= counts[k];
            let x = grid_box.lo[k] + i as f64 * resolution;
            ext_lo[k] = ext_lo[k].min(x);
            ext_hi[k] = ext_hi[k].max(x);
            if i == 0 || i + 1 == counts[k] {
                bounded = false;
            }
            if i > 0 && in_set[idx - stride] && !seen[idx - stride] {
                seen[idx - stride] = true;
                queue.push_back(idx - stride);
            }
            if i + 1 < counts[k] && in_set[idx + stride] && !seen[idx + stride] {
                seen[idx + stride] = true;
                queue.push_back(idx + stride);
            }
            stride *= counts[k];
        }
    }
    let strays: Vec<usize> = (0..total).filter(|i| in_set[*i] && !seen[*i]).collect();

    let touch_set = match domain.sample_boundary(256, 0) {
        Ok(pts) => pts
            .into_iter()
            .filter(|z| {
                let w = landscape.effective_value(a, z);
                let g = norm(&landscape.effective_gradient(a, z));
                (w - h).abs() <= resolution * g + resolution * resolution
            })
            .collect(),
        Err(Error::UnboundedBoundary) => Vec::new(),
        Err(e) => return Err(e),
    };

    Ok(SublevelReport {
        bounded,
        connected: strays.is_empty(),
        touch_set,
        grid_resolution: resolution,
        component_nodes: component,
        stray_nodes: strays.len(),
        stray_samples: strays.iter().take(16).map(|i| coord(*i)).collect(),
        extent: Aabb { lo: ext_lo, hi: ext_hi },
    })
}

/// Minimum of `|∇W_a|` over points of `{W_a = H} ∩ Ḡ` found along rays from `a`.
///
/// Each ray is scanned up to the boundary (or a far cut-off in unbounded
/// directions) for the first point where `W_a ≥ H`, refined by bisection.
/// A value near zero flags a critical point on the level set.
pub fn level_set_min_gradient(
    landscape: &Landscape,
    a: &[f64],
    h: f64,
    domain: &DomainSpec,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let d = landscape.dim();
    if a.len() != d || domain.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.len() });
    }
    if !domain.contains(a) {
        return Err(Error::OutsideDomain);
    }
    let mut rng = trajectory_rng(seed);
    let far = domain.bounding_box().map_or(1e3, |b| 2.0 * b.diagonal().max(1.0));
    let mut best = f64::INFINITY;
    let point = |u: &[f64], t: f64| -> Vec<f64> { a.iter().zip(u).map(|(ai, ui)| ai + t * ui).collect() };
    for k in 0..n.max(1) {
        let u = if d == 1 { vec![if k % 2 == 0 { 1.0 } else { -1.0 }] } else { random_unit(&mut rng, d) };
        let q = point(&u, far);
        let t_max = match domain.detect_crossing(a, &q)? {
            Some(c) => dist(&c.point, a),
            None => far,
        };
        const SCAN: usize = 512;
        let mut prev = 0.0;
        let mut found = None;
        for s in 1..=SCAN {
            let t = t_max * s as f64 / SCAN as f64;
            if landscape.effective_value(a, &point(&u, t)) >= h {
                found = Some((prev, t));
                break;
            }
            prev = t;
        }
        let Some((mut lo, mut hi)) = found else { continue };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if landscape.effective_value(a, &point(&u, mid)) >= h {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let x = point(&u, hi);
        best = best.min(norm(&landscape.effective_gradient(a, &x)));
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::LevelSetNotFound(h))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowStability {
    pub pass: bool,
    pub failures: Vec<Vec<f64>>,
}

/// Integrates `φ̇ = −∇W_a(φ)` from points of `Ḡ` (boundary samples included)
/// and checks that every trajectory stays in `G` for `t > 0` and ends within
/// `1e-3` of `a`.
pub fn check_flow_stability(
    landscape: &Landscape,
    a: &[f64],
    domain: &DomainSpec,
    n_starts: usize,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<FlowStability> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::InvalidArgument("dt and T must be positive".into()));
    }
    let d = landscape.dim();
    let n_starts = n_starts.max(2);
    let mut starts = match domain.sample_boundary((n_starts / 2).max(1), seed) {
        Ok(p) => p,
        Err(Error::UnboundedBoundary) => Vec::new(),
        Err(e) => return Err(e),
    };
    let window = domain.bounding_box().unwrap_or_else(|| {
        let lo: Vec<f64> = (0..d).map(|k| a[k] - 10.0).collect();
        let hi: Vec<f64> = (0..d).map(|k| a[k] + 10.0).collect();
        Aabb { lo, hi }
    });
    let mut rng = trajectory_rng(seed ^ 0xf10f);
    let mut attempts = 0;
    while starts.len() < n_starts && attempts < 1000 * n_starts {
        attempts += 1;
        let x = window.sample(&mut rng);
        if domain.contains(&x) {
            starts.push(x);
        }
    }
    let mut failures = Vec::new();
    for x0 in starts {
        let ok = match crate::dynamics::integrate_effective_flow(&x0, a, landscape, dt, t_end) {
            Ok(path) => {
                let inside = (1..path.len()).all(|i| {
                    let p = path.point(i);
                    domain.contains(p) || domain.level(p) < 1e-9
                });
                let end = path.point(path.len() - 1);
                inside && domain.contains(end) && dist(end, a) < 1e-3
            }
            Err(_) => false,
        };
        if !ok {
            failures.push(x0);
        }
    }
    Ok(FlowStability { pass: failures.is_empty(), failures })
}
