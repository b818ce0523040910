//! Isochrone wave fronts as polylines, and their combinatorics.
//!
//! A front is the curve `q0 -> (q, z)` at fixed time, each vertex carrying
//! the slope `p`. Cusps sit where `dq/dq0` changes sign; sections are the
//! pieces between cusps, each with a branch index that starts at 0 on the
//! noncompact end and moves by ±1 across every cusp. Homogeneous double
//! points (equal indices) whose loop holds exactly two cusps are triangles.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::characteristics::{CharStrand, Domain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontError {
    #[error("front is not long: {0}")]
    NotLong(String),
    #[error("non-generic front: {0}")]
    NonGeneric(String),
    #[error("branch index walk ends at {end} instead of 0 (missed cusp?)")]
    IndexInconsistency { end: i32 },
    #[error("surgery ball of radius {radius} meets a third section near vertex {vertex}")]
    BallTooLarge { radius: f64, vertex: usize },
    #[error("malformed front: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, FrontError>;

/// Relative tie tolerance, scaled by the front's bounding box.
pub const TIE_TOL: f64 = 1e-9;
/// Minimum crossing angle of a transversal double point, in radians.
pub const TANGENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Vertex {
    pub q0: f64,
    pub q: f64,
    pub z: f64,
    pub p: f64,
    /// Inserted by a surgery blend rather than integrated.
    pub blended: bool,
}

impl Vertex {
    pub fn new(q0: f64, q: f64, z: f64, p: f64) -> Vertex {
        Vertex {
            q0,
            q,
            z,
            p,
            blended: false,
        }
    }

    fn shifted(&self, period: f64) -> Vertex {
        Vertex {
            q0: self.q0 + period,
            q: self.q + period,
            ..*self
        }
    }

    fn dist(&self, q: f64, z: f64) -> f64 {
        (self.q - q).hypot(self.z - z)
    }
}

/// Cubic Hermite interpolation of a front segment as a graph over `q`, with
/// `p` as the slope. Returns `(z, p, s)` where `s` is the fraction along `q`.
pub(crate) fn hermite(a: &Vertex, b: &Vertex, q: f64) -> (f64, f64, f64) {
    let h = b.q - a.q;
    if h == 0.0 {
        return (a.z, a.p, 0.0);
    }
    let s = (q - a.q) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let z = (2.0 * s3 - 3.0 * s2 + 1.0) * a.z
        + (s3 - 2.0 * s2 + s) * h * a.p
        + (-2.0 * s3 + 3.0 * s2) * b.z
        + (s3 - s2) * h * b.p;
    let dz = ((6.0 * s2 - 6.0 * s) * a.z
        + (3.0 * s2 - 4.0 * s + 1.0) * h * a.p
        + (-6.0 * s2 + 6.0 * s) * b.z
        + (3.0 * s2 - 2.0 * s) * h * b.p)
        / h;
    (z, dz, s)
}

fn point_on_segment(a: &Vertex, b: &Vertex, q: f64) -> Vertex {
    let (z, p, s) = hermite(a, b, q);
    Vertex {
        q0: a.q0 + s * (b.q0 - a.q0),
        q,
        z,
        p,
        blended: a.blended || b.blended,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontCurve {
    pub vertices: Vec<Vertex>,
    pub time: f64,
    /// For periodic problems the curve runs over exactly one period,
    /// starting and ending on the same single-valued fiber.
    pub period: Option<f64>,
}

impl FrontCurve {
    pub fn new(vertices: Vec<Vertex>, time: f64, period: Option<f64>) -> Result<FrontCurve> {
        if vertices.len() < 3 {
            return Err(FrontError::Malformed("a front needs at least 3 vertices".into()));
        }
        if vertices
            .iter()
            .any(|v| !(v.q0.is_finite() && v.q.is_finite() && v.z.is_finite() && v.p.is_finite()))
        {
            return Err(FrontError::Malformed("non-finite vertex".into()));
        }
        if vertices.windows(2).any(|w| !(w[1].q0 > w[0].q0)) {
            return Err(FrontError::Malformed("vertices must be strictly ordered by q0".into()));
        }
        let first = vertices[0].q;
        let last = vertices[vertices.len() - 1].q;
        let inner = &vertices[1..vertices.len() - 1];
        if !(last > first) || inner.iter().any(|v| v.q <= first || v.q >= last) {
            return Err(FrontError::NotLong(
                "the end vertices must bound the front's q-range".into(),
            ));
        }
        if let Some(p) = period {
            if ((last - first) - p).abs() > 1e-9 * p {
                return Err(FrontError::NotLong(format!(
                    "periodic front spans {} instead of one period {p}",
                    last - first
                )));
            }
        }
        Ok(FrontCurve {
            vertices,
            time,
            period,
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn q_range(&self) -> (f64, f64) {
        (self.vertices[0].q, self.vertices[self.len() - 1].q)
    }

    /// Diagonal of the `(q, z)` bounding box.
    pub fn scale(&self) -> f64 {
        let (mut qa, mut qb, mut za, mut zb) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for v in &self.vertices {
            qa = qa.min(v.q);
            qb = qb.max(v.q);
            za = za.min(v.z);
            zb = zb.max(v.z);
        }
        (qb - qa).hypot(zb - za).max(f64::MIN_POSITIVE)
    }

    /// Maps `q` into the front's fundamental interval on periodic fronts.
    pub fn locate(&self, q: f64) -> f64 {
        match self.period {
            Some(p) => {
                let a = self.vertices[0].q;
                a + (q - a).rem_euclid(p)
            }
            None => q,
        }
    }

    /// Whether `dq/dq0 > 0` everywhere, i.e. the front is a graph.
    pub fn is_graph(&self) -> bool {
        self.vertices.windows(2).all(|w| w[1].q > w[0].q)
    }
}

/// Assembles the front from the final states of `strands` (ordered by `q0`).
/// Periodic fronts are cut open at a single-valued fiber.
pub fn build_front(strands: &[CharStrand], domain: &Domain) -> Result<FrontCurve> {
    if strands.is_empty() {
        return Err(FrontError::Malformed("no strands".into()));
    }
    let time = strands[0].last().t;
    let pts: Vec<Vertex> = strands
        .iter()
        .map(|s| {
            let l = s.last();
            Vertex::new(s.q0, l.q, l.z, l.p)
        })
        .collect();
    match *domain {
        Domain::Windowed { .. } => FrontCurve::new(pts, time, None),
        Domain::Periodic { period, .. } => periodic_cut(&pts, period, time),
    }
}

fn periodic_cut(pts: &[Vertex], period: f64, time: f64) -> Result<FrontCurve> {
    let n = pts.len();
    if n < 3 {
        return Err(FrontError::Malformed("a front needs at least 3 vertices".into()));
    }
    if pts[n - 1].q0 - pts[0].q0 >= period {
        return Err(FrontError::Malformed("seeds must lie within one period".into()));
    }
    let ext: Vec<Vertex> = pts
        .iter()
        .copied()
        .chain(pts.iter().map(|v| v.shifted(period)))
        .chain(std::iter::once(pts[0].shifted(2.0 * period)))
        .collect();
    let dq = |k: usize| ext[k + 1].q - ext[k].q;
    let folds: Vec<f64> = (0..n)
        .filter(|&k| {
            let prev = dq((k + n - 1) % n);
            (prev >= 0.0) != (dq(k) >= 0.0)
        })
        .map(|k| pts[k].q)
        .collect();
    let fiber_count = |qq: f64| -> usize {
        (0..n)
            .map(|k| {
                let (lo, hi) = if dq(k) >= 0.0 {
                    (ext[k].q, ext[k + 1].q)
                } else {
                    (ext[k + 1].q, ext[k].q)
                };
                let count = ((hi - qq) / period).ceil() - ((lo - qq) / period).ceil();
                count.max(0.0) as usize
            })
            .sum()
    };
    let q_cut = if folds.is_empty() {
        pts[0].q
    } else {
        let base = folds[0];
        let mut r: Vec<f64> = folds.iter().map(|f| (f - base).rem_euclid(period)).collect();
        r.sort_by(f64::total_cmp);
        let mut gaps: Vec<(f64, f64)> = (0..r.len())
            .map(|i| {
                let lo = r[i];
                let hi = if i + 1 < r.len() { r[i + 1] } else { r[0] + period };
                (hi - lo, base + 0.5 * (lo + hi))
            })
            .collect();
        gaps.sort_by(|a, b| b.0.total_cmp(&a.0));
        gaps.iter()
            // nudged off the midpoint, which may sit exactly on a seed
            .find(|&&(w, mid)| fiber_count(mid + 1e-7 * w) == 1)
            .map(|&(_, mid)| mid)
            .ok_or_else(|| {
                FrontError::NotLong(format!(
                    "no single-valued fiber at t = {time}; the periodic front cannot be cut"
                ))
            })?
    };
    let (k, m) = (0..n)
        .find_map(|k| {
            let (lo, hi) = if dq(k) >= 0.0 {
                (ext[k].q, ext[k + 1].q)
            } else {
                (ext[k + 1].q, ext[k].q)
            };
            let m = ((lo - q_cut) / period).ceil();
            (q_cut + m * period < hi).then_some((k, m))
        })
        .ok_or_else(|| FrontError::Malformed("cut fiber misses the front".into()))?;
    let qq = q_cut + m * period;
    let c = point_on_segment(&ext[k], &ext[k + 1], qq);
    let mut list = Vec::with_capacity(n + 1);
    list.push(c);
    for v in &ext[k + 1..=k + n] {
        if v.q0 - list[list.len() - 1].q0 > 1e-12 * period {
            list.push(*v);
        }
    }
    let end = c.shifted(period);
    if end.q0 - list[list.len() - 1].q0 <= 1e-12 * period {
        list.pop();
    }
    list.push(end);
    for v in &mut list {
        v.q -= m * period;
    }
    FrontCurve::new(list, time, Some(period))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CuspSign {
    Positive,
    Negative,
}

impl CuspSign {
    pub fn delta(self) -> i32 {
        match self {
            CuspSign::Positive => 1,
            CuspSign::Negative => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cusp {
    /// Vertex where `dq/dq0` changes sign.
    pub vertex: usize,
    pub q: f64,
    pub z: f64,
    pub sign: CuspSign,
}

fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Cusps at sign changes of `dq/dq0`, with positions from a quadratic fit in
/// `q0`. Crossing a cusp with increasing `z`-coorientation makes it positive.
pub fn detect_cusps(f: &FrontCurve) -> Result<Vec<Cusp>> {
    let v = &f.vertices;
    let n = v.len();
    let mut cusps: Vec<Cusp> = Vec::new();
    for k in 1..n - 1 {
        let before = v[k].q - v[k - 1].q;
        let after = v[k + 1].q - v[k].q;
        if (before >= 0.0) == (after >= 0.0) {
            continue;
        }
        if let Some(prev) = cusps.last() {
            if prev.vertex + 1 == k {
                return Err(FrontError::NonGeneric(format!(
                    "cusps at adjacent vertices near q = {} (cusp birth or death)",
                    v[k].q
                )));
            }
        }
        let dp = v[k + 1].p - v[k - 1].p;
        let positive = -sign(before) * sign(dp) > 0.0;
        let (q, z) = quadratic_vertex(&v[k - 1], &v[k], &v[k + 1]);
        cusps.push(Cusp {
            vertex: k,
            q,
            z,
            sign: if positive {
                CuspSign::Positive
            } else {
                CuspSign::Negative
            },
        });
    }
    check_near_births(f)?;
    Ok(cusps)
}

fn quadratic_vertex(a: &Vertex, b: &Vertex, c: &Vertex) -> (f64, f64) {
    let (x0, x1, x2) = (a.q0, b.q0, c.q0);
    let fit = |y0: f64, y1: f64, y2: f64, x: f64| {
        y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
    };
    // extremum of the q-parabola
    let d1 = (b.q - a.q) / (x1 - x0);
    let d2 = (c.q - b.q) / (x2 - x1);
    let curv = (d2 - d1) / (x2 - x0);
    let xs = if curv != 0.0 {
        (0.5 * (x0 + x1) - d1 / (2.0 * curv)).clamp(x0, x2)
    } else {
        x1
    };
    (fit(a.q, b.q, c.q, xs), fit(a.z, b.z, c.z, xs))
}

/// Flags slices sampled within one seed spacing of a cusp pair being born or
/// dying: an extremum of `dq/dq0` whose parabola would reach zero between
/// neighbouring samples.
fn check_near_births(f: &FrontCurve) -> Result<()> {
    let v = &f.vertices;
    let ratio: Vec<(f64, f64, f64)> = v
        .windows(2)
        .map(|w| {
            let h = w[1].q0 - w[0].q0;
            (0.5 * (w[0].q0 + w[1].q0), (w[1].q - w[0].q) / h, h)
        })
        .collect();
    for k in 1..ratio.len().saturating_sub(1) {
        if v[k - 1..=k + 2].iter().any(|x| x.blended) {
            continue;
        }
        let (x0, r0, _) = ratio[k - 1];
        let (x1, r1, h) = ratio[k];
        let (x2, r2, _) = ratio[k + 1];
        if (r0 >= 0.0) != (r1 >= 0.0) || (r1 >= 0.0) != (r2 >= 0.0) {
            continue;
        }
        let (a0, a1, a2) = (r0.abs(), r1.abs(), r2.abs());
        let is_min = a1 <= a0 && a1 <= a2 && (a1 < a0 || a1 < a2);
        if !is_min {
            continue;
        }
        let d1 = (a1 - a0) / (x1 - x0);
        let d2 = (a2 - a1) / (x2 - x1);
        let c = (d2 - d1) / (x2 - x0);
        if c <= 0.0 {
            continue;
        }
        let xs = 0.5 * (x0 + x1) - d1 / (2.0 * c);
        let min = a0 + d1 * (xs - x0) + c * (xs - x0) * (xs - x1);
        let reach = c * h * h;
        if min <= reach {
            return Err(FrontError::NonGeneric(format!(
                "dq/dq0 nearly vanishes near q = {} (cusp birth or death)",
                v[k].q
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Section {
    pub id: usize,
    /// Equal for the two end sections of a periodic front, which are one branch.
    pub branch: usize,
    /// Inclusive vertex range; neighbouring sections share their cusp vertex.
    pub start: usize,
    pub end: usize,
    pub index: i32,
    pub compact: bool,
}

impl Section {
    pub fn contains_segment(&self, seg: usize) -> bool {
        self.start <= seg && seg < self.end
    }
}

/// Cuts the front at its cusps and walks the branch index from 0.
pub fn split_sections(f: &FrontCurve, cusps: &[Cusp]) -> Result<Vec<Section>> {
    let last = f.len() - 1;
    let mut sections = Vec::with_capacity(cusps.len() + 1);
    let mut start = 0;
    let mut index = 0;
    for c in cusps {
        sections.push((start, c.vertex, index));
        index += c.sign.delta();
        start = c.vertex;
    }
    sections.push((start, last, index));
    if index != 0 {
        return Err(FrontError::IndexInconsistency { end: index });
    }
    let m = sections.len();
    Ok(sections
        .into_iter()
        .enumerate()
        .map(|(id, (start, end, index))| Section {
            id,
            branch: if f.period.is_some() && id == m - 1 && m > 1 { 0 } else { id },
            start,
            end,
            index,
            compact: id != 0 && id != m - 1,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoublePoint {
    pub q: f64,
    pub z: f64,
    /// Crossing segments, `seg_a < seg_b`, with the fractions along each.
    pub seg_a: usize,
    pub seg_b: usize,
    pub s_a: f64,
    pub s_b: f64,
    pub section_a: usize,
    pub section_b: usize,
    pub homogeneous: bool,
}

pub(crate) fn section_of_segment(sections: &[Section], seg: usize) -> usize {
    let k = sections.partition_point(|s| s.end <= seg);
    sections[k.min(sections.len() - 1)].id
}

/// All transversal self-intersections, found through a uniform spatial hash.
pub fn double_points(f: &FrontCurve, sections: &[Section]) -> Result<Vec<DoublePoint>> {
    let v = &f.vertices;
    let m = f.segment_count();
    let scale = f.scale();
    let floor = 1e-6 * scale;
    let cq = v.windows(2).map(|w| (w[1].q - w[0].q).abs()).fold(floor, f64::max);
    let cz = v.windows(2).map(|w| (w[1].z - w[0].z).abs()).fold(floor, f64::max);
    let (q_lo, z_lo) = v
        .iter()
        .fold((f64::MAX, f64::MAX), |(a, b), x| (a.min(x.q), b.min(x.z)));
    let cell = |q: f64, z: f64| (((q - q_lo) / cq).floor() as i64, ((z - z_lo) / cz).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..m {
        let (a0, b0) = cell(v[i].q.min(v[i + 1].q), v[i].z.min(v[i + 1].z));
        let (a1, b1) = cell(v[i].q.max(v[i + 1].q), v[i].z.max(v[i + 1].z));
        for a in a0..=a1 {
            for b in b0..=b1 {
                grid.entry((a, b)).or_default().push(i);
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for segs in grid.values() {
        for (x, &i) in segs.iter().enumerate() {
            for &j in &segs[x + 1..] {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                if b > a + 1 {
                    pairs.push((a, b));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut out = Vec::new();
    for (a, b) in pairs {
        if let Some((s, u)) = intersect(&v[a], &v[a + 1], &v[b], &v[b + 1])? {
            let sa = section_of_segment(sections, a);
            let sb = section_of_segment(sections, b);
            out.push(DoublePoint {
                q: v[a].q + s * (v[a + 1].q - v[a].q),
                z: v[a].z + s * (v[a + 1].z - v[a].z),
                seg_a: a,
                seg_b: b,
                s_a: s,
                s_b: u,
                section_a: sa,
                section_b: sb,
                homogeneous: sections[sa].index == sections[sb].index,
            });
        }
    }
    Ok(out)
}

fn intersect(p1: &Vertex, p2: &Vertex, p3: &Vertex, p4: &Vertex) -> Result<Option<(f64, f64)>> {
    let r = (p2.q - p1.q, p2.z - p1.z);
    let s = (p4.q - p3.q, p4.z - p3.z);
    let d = r.0 * s.1 - r.1 * s.0;
    let w = (p3.q - p1.q, p3.z - p1.z);
    let lr = r.0.hypot(r.1);
    let ls = s.0.hypot(s.1);
    if lr == 0.0 || ls == 0.0 {
        return Ok(None);
    }
    if d == 0.0 {
        let off = (w.0 * r.1 - w.1 * r.0).abs() / lr;
        if off == 0.0 {
            let t0 = (w.0 * r.0 + w.1 * r.1) / (lr * lr);
            let t1 = t0 + (s.0 * r.0 + s.1 * r.1) / (lr * lr);
            if t0.max(t1) >= 0.0 && t0.min(t1) < 1.0 {
                return Err(FrontError::NonGeneric(format!(
                    "overlapping segments near q = {}",
                    p1.q
                )));
            }
        }
        return Ok(None);
    }
    let t = (w.0 * s.1 - w.1 * s.0) / d;
    let u = (w.0 * r.1 - w.1 * r.0) / d;
    if !((0.0..1.0).contains(&t) && (0.0..1.0).contains(&u)) {
        return Ok(None);
    }
    if (d / (lr * ls)).abs() < TANGENCY_TOL {
        return Err(FrontError::NonGeneric(format!(
            "tangential self-intersection near q = {}",
            p1.q + t * r.0
        )));
    }
    Ok(Some((t, u)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Triangle {
    /// Index into the double point list; the triangle's vertex.
    pub double_point: usize,
    pub cusps: [usize; 2],
    /// Sections met by the loop, in curve order.
    pub sections: Vec<usize>,
    /// Branch index of the two sections crossing at the vertex.
    pub index: i32,
}

/// Loops through homogeneous double points that contain exactly two cusps.
pub fn find_triangles(
    cusps: &[Cusp],
    sections: &[Section],
    doubles: &[DoublePoint],
) -> Vec<Triangle> {
    let mut out = Vec::new();
    for (i, d) in doubles.iter().enumerate() {
        if !d.homogeneous {
            continue;
        }
        let inside: Vec<usize> = cusps
            .iter()
            .enumerate()
            .filter(|(_, c)| c.vertex > d.seg_a && c.vertex <= d.seg_b)
            .map(|(k, _)| k)
            .collect();
        if inside.len() == 2 {
            out.push(Triangle {
                double_point: i,
                cusps: [inside[0], inside[1]],
                sections: (d.section_a..=d.section_b).collect(),
                index: sections[d.section_a].index,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontAnalysis {
    pub cusps: Vec<Cusp>,
    pub sections: Vec<Section>,
    pub double_points: Vec<DoublePoint>,
    pub triangles: Vec<Triangle>,
}

impl FrontAnalysis {
    pub fn section_of_segment(&self, seg: usize) -> usize {
        section_of_segment(&self.sections, seg)
    }
}

/// Cusps, sections, double points and triangles of a front.
pub fn analyze(f: &FrontCurve) -> Result<FrontAnalysis> {
    let cusps = detect_cusps(f)?;
    let sections = split_sections(f, &cusps)?;
    let double_points = double_points(f, &sections)?;
    let tol = TIE_TOL * f.scale();
    for d in &double_points {
        for c in &cusps {
            if (d.q - c.q).hypot(d.z - c.z) < tol {
                return Err(FrontError::NonGeneric(format!(
                    "cusp and double point coincide near q = {}",
                    c.q
                )));
            }
        }
    }
    let triangles = find_triangles(&cusps, &sections, &double_points);
    Ok(FrontAnalysis {
        cusps,
        sections,
        double_points,
        triangles,
    })
}

fn in_loop(d: &DoublePoint, seg: usize, s: f64) -> bool {
    (seg > d.seg_a && seg < d.seg_b) || (seg == d.seg_a && s > d.s_a) || (seg == d.seg_b && s < d.s_b)
}

fn loop_polygon(f: &FrontCurve, d: &DoublePoint) -> Vec<(f64, f64)> {
    std::iter::once((d.q, d.z))
        .chain(f.vertices[d.seg_a + 1..=d.seg_b].iter().map(|v| (v.q, v.z)))
        .collect()
}

fn point_in_polygon(poly: &[(f64, f64)], q: f64, z: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (qi, zi) = poly[i];
        let (qj, zj) = poly[j];
        if (zi > z) != (zj > z) && q < qi + (z - zi) * (qj - qi) / (zj - zi) {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Conservative combinatorial test for a removable triangle: its region holds
/// no other vertex, no homogeneous crossing joins its loop to the rest of the
/// front, and no outside section of the vertex's index crosses the loop.
pub fn is_vanishing(f: &FrontCurve, a: &FrontAnalysis, t: &Triangle) -> bool {
    let d = &a.double_points[t.double_point];
    let poly = loop_polygon(f, d);
    let (mut qa, mut qb, mut za, mut zb) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(q, z) in &poly {
        qa = qa.min(q);
        qb = qb.max(q);
        za = za.min(z);
        zb = zb.max(z);
    }
    let outside_vertex = |k: usize| k <= d.seg_a || k > d.seg_b;
    let occupied = f.vertices.iter().enumerate().any(|(k, v)| {
        outside_vertex(k)
            && v.q > qa
            && v.q < qb
            && v.z > za
            && v.z < zb
            && point_in_polygon(&poly, v.q, v.z)
    });
    if occupied {
        return false;
    }
    for (i, e) in a.double_points.iter().enumerate() {
        if i == t.double_point {
            continue;
        }
        let ia = in_loop(d, e.seg_a, e.s_a);
        let ib = in_loop(d, e.seg_b, e.s_b);
        if ia == ib {
            continue;
        }
        let outer = if ia { e.section_b } else { e.section_a };
        if e.homogeneous || a.sections[outer].index == t.index {
            return false;
        }
    }
    true
}

/// Default surgery radius: a quarter of the distance from the triangle's
/// vertex to the nearest feature not on its two crossing sections.
pub fn default_ball_radius(f: &FrontCurve, a: &FrontAnalysis, t: &Triangle) -> f64 {
    let d = &a.double_points[t.double_point];
    let mut best = f64::INFINITY;
    for s in &a.sections {
        if s.id == d.section_a || s.id == d.section_b {
            continue;
        }
        for v in &f.vertices[s.start..=s.end] {
            best = best.min(v.dist(d.q, d.z));
        }
    }
    for c in &a.cusps {
        best = best.min((c.q - d.q).hypot(c.z - d.z));
    }
    for (i, e) in a.double_points.iter().enumerate() {
        if i != t.double_point {
            best = best.min((e.q - d.q).hypot(e.z - d.z));
        }
    }
    0.25 * best
}

/// Number of blended vertices inserted by a surgery.
pub const BLEND_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Surgery {
    pub q: f64,
    pub z: f64,
    pub radius: f64,
    pub removed_cusps: usize,
}

/// `Σ − T`: deletes the triangle and joins the two branches through its
/// vertex by a cubic Hermite blend inside a ball around it.
pub fn remove_triangle(
    f: &FrontCurve,
    a: &FrontAnalysis,
    t: &Triangle,
    radius: Option<f64>,
) -> Result<(FrontCurve, Surgery)> {
    let d = &a.double_points[t.double_point];
    let r = radius.unwrap_or_else(|| default_ball_radius(f, a, t));
    let v = &f.vertices;
    let inside = |k: usize| v[k].dist(d.q, d.z) <= r;
    let too_large = |k: usize| FrontError::BallTooLarge { radius: r, vertex: k };
    let ia = (0..=d.seg_a).rev().find(|&k| !inside(k)).ok_or_else(|| too_large(0))?;
    let jb = (d.seg_b + 1..v.len()).find(|&k| !inside(k)).ok_or_else(|| too_large(v.len() - 1))?;
    if let Some(k) = (0..ia).chain(jb + 1..v.len()).find(|&k| inside(k)) {
        return Err(too_large(k));
    }
    let crossing = [d.section_a, d.section_b];
    for k in ia + 1..jb {
        if inside(k) && !crossing.iter().any(|&s| a.sections[s].start <= k && k <= a.sections[s].end) {
            return Err(too_large(k));
        }
    }
    if a.cusps.iter().any(|c| (c.q - d.q).hypot(c.z - d.z) <= r) {
        return Err(too_large(d.seg_a));
    }
    let (p0, p1) = (v[ia], v[jb]);
    if !(p1.q > p0.q) {
        return Err(too_large(jb));
    }
    let mut out = Vec::with_capacity(v.len());
    out.extend_from_slice(&v[..=ia]);
    for i in 1..=BLEND_POINTS {
        let q = p0.q + (p1.q - p0.q) * i as f64 / (BLEND_POINTS + 1) as f64;
        let mut b = point_on_segment(&p0, &p1, q);
        b.blended = true;
        out.push(b);
    }
    out.extend_from_slice(&v[jb..]);
    let removed = a.cusps.iter().filter(|c| c.vertex > ia && c.vertex < jb).count();
    Ok((
        FrontCurve::new(out, f.time, f.period)?,
        Surgery {
            q: d.q,
            z: d.z,
            radius: r,
            removed_cusps: removed,
        },
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontDump<'a> {
    pub time: f64,
    pub period: Option<f64>,
    pub vertices: &'a [Vertex],
    #[serde(flatten)]
    pub analysis: &'a FrontAnalysis,
}

pub fn front_json(f: &FrontCurve, a: &FrontAnalysis) -> serde_json::Value {
    serde_json::to_value(FrontDump {
        time: f.time,
        period: f.period,
        vertices: &f.vertices,
        analysis: a,
    })
    .expect("front dump serializes")
}
