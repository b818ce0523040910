//! Minimax selection on fronts.
//!
//! The fiber over `q` is the list of front points above it in curve order;
//! coupling their heights as critical values leaves one free point, whose
//! height is the minimax. `decompose` sweeps that choice across the front and
//! `eliminate` reaches the same graph by cutting off vanishing triangles.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::characteristics::{evolve, evolve_to, refine_seeds, CharError, CharStrand, ProblemSpec};
use crate::front::{
    analyze, build_front, hermite, is_vanishing, remove_triangle, FrontAnalysis, FrontCurve,
    FrontError, Surgery, TIE_TOL,
};
use crate::grid::{GridSolution, Provenance};
use crate::morse1d::{couple, CriticalPoint, MorseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error(transparent)]
    Front(#[from] FrontError),
    #[error(transparent)]
    Morse(#[from] MorseError),
    #[error(transparent)]
    Char(#[from] CharError),
    #[error("degenerate fiber at q = {q}: {reason}")]
    DegenerateFiber { q: f64, reason: String },
    #[error("inconsistent sweep near q = {q}: {reason}")]
    InconsistentSweep { q: f64, reason: String },
    #[error("slice t = {t} failed: {reason}")]
    Slice { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, SelectError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberPoint {
    pub z: f64,
    pub p: f64,
    pub q0: f64,
    pub segment: usize,
    pub section: usize,
    pub index: i32,
}

/// Front points over `q`, ordered along the curve.
pub fn fiber_points(f: &FrontCurve, a: &FrontAnalysis, q: f64) -> Result<Vec<FiberPoint>> {
    let qq = f.locate(q);
    let (lo_q, hi_q) = f.q_range();
    if qq < lo_q || qq > hi_q {
        return Err(SelectError::DegenerateFiber {
            q,
            reason: format!("outside the front's range [{lo_q}, {hi_q}]"),
        });
    }
    let tol = TIE_TOL * f.scale();
    if let Some(c) = a.cusps.iter().find(|c| (c.q - qq).abs() < tol) {
        return Err(SelectError::DegenerateFiber {
            q,
            reason: format!("cusp at q = {}", c.q),
        });
    }
    let v = &f.vertices;
    let last = f.segment_count() - 1;
    let mut out = Vec::new();
    for i in 0..=last {
        let (lo, hi) = if v[i + 1].q >= v[i].q {
            (v[i].q, v[i + 1].q)
        } else {
            (v[i + 1].q, v[i].q)
        };
        if (lo <= qq && qq < hi) || (i == last && qq == hi) {
            let (z, p, s) = hermite(&v[i], &v[i + 1], qq);
            let section = a.section_of_segment(i);
            out.push(FiberPoint {
                z,
                p,
                q0: v[i].q0 + s * (v[i + 1].q0 - v[i].q0),
                segment: i,
                section,
                index: a.sections[section].index,
            });
        }
    }
    if out.len() % 2 == 0 {
        return Err(SelectError::DegenerateFiber {
            q,
            reason: format!("{} front points over the fiber", out.len()),
        });
    }
    Ok(out)
}

/// Coupling of a fiber: the free point and the `(upper, lower)` pairs, as
/// positions in `pts`.
pub fn couple_fiber(pts: &[FiberPoint]) -> Result<(usize, Vec<(usize, usize)>)> {
    if pts.len() == 1 {
        return Ok((0, Vec::new()));
    }
    let cps: Vec<CriticalPoint> = pts
        .iter()
        .map(|x| CriticalPoint {
            xi: x.q0,
            value: x.z,
            index: x.index,
        })
        .collect();
    let d = couple(&cps)?;
    let pos = |c: &CriticalPoint| pts.iter().position(|x| x.q0 == c.xi).expect("coupled point is in the fiber");
    Ok((pos(&d.free), d.pairs.iter().map(|(u, l)| (pos(u), pos(l))).collect()))
}

/// The free point of the fiber over `q`.
pub fn select_pointwise(f: &FrontCurve, a: &FrontAnalysis, q: f64) -> Result<FiberPoint> {
    let pts = fiber_points(f, a, q)?;
    let (free, _) = couple_fiber(&pts)?;
    Ok(pts[free])
}

/// Pointwise selection that steps off degenerate fibers: the section chosen
/// at `q ± δ` is extended back to `q` to first order. Returns the selection and
/// the fiber size.
pub fn select_robust(f: &FrontCurve, a: &FrontAnalysis, q: f64, delta: f64) -> Result<(FiberPoint, usize)> {
    let mut last_err = None;
    for shift in [0.0, 1.0, -1.0, 0.1, -0.1, 3.0, -3.0] {
        let qs = q + shift * delta;
        match fiber_points(f, a, qs).and_then(|pts| couple_fiber(&pts).map(|(k, _)| (pts[k], pts.len()))) {
            Ok((mut pt, n)) => {
                pt.z += pt.p * (q - qs);
                return Ok((pt, n));
            }
            Err(e @ (SelectError::DegenerateFiber { .. } | SelectError::Morse(MorseError::NonGeneric(_)))) => {
                last_err = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    pub section: usize,
    pub q_lo: f64,
    pub q_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledCurve {
    pub pieces: Vec<Piece>,
    /// Distinct sections, ascending.
    pub sections: Vec<usize>,
    pub cusps: Vec<usize>,
    pub self_intersections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionDecomposition {
    pub minimax: Vec<Piece>,
    pub coupled: Vec<CoupledCurve>,
}

#[derive(Debug, Clone, PartialEq)]
struct Interval {
    lo: f64,
    hi: f64,
    free: usize,
    pairs: Vec<(usize, usize)>,
}

fn interval_coupling(f: &FrontCurve, a: &FrontAnalysis, q: f64) -> Result<(usize, Vec<(usize, usize)>)> {
    let pts = fiber_points(f, a, q).map_err(|e| SelectError::InconsistentSweep {
        q,
        reason: e.to_string(),
    })?;
    let (free, pairs) = couple_fiber(&pts)?;
    let mut pairs: Vec<(usize, usize)> = pairs
        .into_iter()
        .map(|(u, l)| (pts[u].section, pts[l].section))
        .collect();
    pairs.sort_unstable();
    Ok((pts[free].section, pairs))
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Sweeps the fiber coupling over the front: `μ` and the coupled curves `X_i`.
pub fn decompose(f: &FrontCurve, a: &FrontAnalysis) -> Result<SectionDecomposition> {
    let (q_lo, q_hi) = f.q_range();
    let tol = 1e3 * TIE_TOL * f.scale();
    let mut events: Vec<f64> = vec![q_lo, q_hi];
    events.extend(a.cusps.iter().map(|c| c.q));
    events.extend(a.double_points.iter().map(|d| d.q));
    events.sort_by(f64::total_cmp);
    events.dedup_by(|x, y| (*x - *y).abs() <= tol);

    let mut intervals: Vec<Interval> = Vec::new();
    for w in events.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let samples: Vec<(usize, Vec<(usize, usize)>)> = [0.25, 0.5, 0.75]
            .iter()
            .map(|s| interval_coupling(f, a, lo + s * (hi - lo)))
            .collect::<Result<_>>()?;
        if samples.iter().any(|s| *s != samples[0]) {
            return Err(SelectError::InconsistentSweep {
                q: 0.5 * (lo + hi),
                reason: "coupling changes between events".into(),
            });
        }
        let (free, pairs) = samples.into_iter().next().expect("three samples");
        intervals.push(Interval { lo, hi, free, pairs });
    }

    let crossing_at = |q: f64, x: usize, y: usize| {
        a.double_points.iter().any(|d| {
            (d.q - q).abs() <= tol
                && ((d.section_a == x && d.section_b == y) || (d.section_a == y && d.section_b == x))
        })
    };

    let mut minimax: Vec<Piece> = Vec::new();
    for (k, iv) in intervals.iter().enumerate() {
        match minimax.last_mut() {
            Some(last) if last.section == iv.free => last.q_hi = iv.hi,
            _ => {
                if k > 0 {
                    let prev = intervals[k - 1].free;
                    let q = iv.lo;
                    let homogeneous = a.double_points.iter().any(|d| {
                        d.homogeneous
                            && (d.q - q).abs() <= tol
                            && ((d.section_a == prev && d.section_b == iv.free)
                                || (d.section_a == iv.free && d.section_b == prev))
                    });
                    if !homogeneous {
                        return Err(SelectError::InconsistentSweep {
                            q,
                            reason: format!(
                                "minimax jumps from section {prev} to {} away from a homogeneous double point",
                                iv.free
                            ),
                        });
                    }
                }
                minimax.push(Piece {
                    section: iv.free,
                    q_lo: iv.lo,
                    q_hi: iv.hi,
                });
            }
        }
    }

    // union pair occurrences that continue across an event
    let mut nodes: Vec<(usize, (usize, usize))> = Vec::new();
    let mut first_node = Vec::with_capacity(intervals.len());
    for (k, iv) in intervals.iter().enumerate() {
        first_node.push(nodes.len());
        nodes.extend(iv.pairs.iter().map(|&p| (k, p)));
    }
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    for k in 1..intervals.len() {
        let q = intervals[k].lo;
        for i in first_node[k - 1]..first_node[k] {
            let p = nodes[i].1;
            let end = first_node.get(k + 1).copied().unwrap_or(nodes.len());
            for j in first_node[k]..end {
                let n = nodes[j].1;
                let linked = p == n
                    || (p.0 == n.0 && crossing_at(q, p.1, n.1))
                    || (p.1 == n.1 && crossing_at(q, p.0, n.0));
                if linked {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..nodes.len() {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.1.push(i),
            None => groups.push((r, vec![i])),
        }
    }

    let mut coupled = Vec::new();
    for (_, members) in groups {
        let mut pieces: Vec<Piece> = Vec::new();
        for &i in &members {
            let (k, (u, l)) = nodes[i];
            for s in [u, l] {
                let iv = &intervals[k];
                match pieces
                    .iter_mut()
                    .find(|p| p.section == s && (p.q_hi - iv.lo).abs() <= tol)
                {
                    Some(p) => p.q_hi = iv.hi,
                    None => pieces.push(Piece {
                        section: s,
                        q_lo: iv.lo,
                        q_hi: iv.hi,
                    }),
                }
            }
        }
        let mut sections: Vec<usize> = pieces.iter().map(|p| p.section).collect();
        sections.sort_unstable();
        sections.dedup();
        let touches = |s: usize, q: f64| {
            pieces
                .iter()
                .any(|p| p.section == s && ((p.q_lo - q).abs() <= tol || (p.q_hi - q).abs() <= tol))
        };
        let cusps: Vec<usize> = a
            .cusps
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                let left = a.sections.iter().position(|s| s.end == c.vertex);
                matches!(left, Some(j) if touches(j, c.q) && touches(j + 1, c.q))
            })
            .map(|(i, _)| i)
            .collect();
        let strictly_on = |s: usize, q: f64| {
            pieces
                .iter()
                .any(|p| p.section == s && q > p.q_lo + tol && q < p.q_hi - tol)
        };
        let self_intersections = a
            .double_points
            .iter()
            .filter(|d| strictly_on(d.section_a, d.q) && strictly_on(d.section_b, d.q))
            .count();
        coupled.push(CoupledCurve {
            pieces,
            sections,
            cusps,
            self_intersections,
        });
    }
    Ok(SectionDecomposition { minimax, coupled })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Elimination {
    pub front: FrontCurve,
    pub log: Vec<Surgery>,
    /// Set when the front is not smooth but no coupled triangle passes the
    /// vanishing test; pointwise selection is then authoritative.
    pub stalled: Option<String>,
}

/// Removes vanishing coupled triangles until the front is a graph.
pub fn eliminate(f: &FrontCurve) -> Result<Elimination> {
    let mut cur = f.clone();
    let mut log = Vec::new();
    loop {
        let a = analyze(&cur)?;
        if a.cusps.is_empty() {
            return Ok(Elimination {
                front: cur,
                log,
                stalled: None,
            });
        }
        let d = decompose(&cur, &a)?;
        let candidate = a.triangles.iter().find(|t| {
            let mut secs = t.sections.clone();
            secs.sort_unstable();
            d.coupled.iter().any(|x| x.sections == secs) && is_vanishing(&cur, &a, t)
        });
        let Some(t) = candidate else {
            let reason = format!(
                "{} cusps, {} triangles, {} coupled curves and no vanishing triangle",
                a.cusps.len(),
                a.triangles.len(),
                d.coupled.len()
            );
            return Ok(Elimination {
                front: cur,
                log,
                stalled: Some(reason),
            });
        };
        let mut radius = None;
        let mut done = None;
        for _ in 0..6 {
            match remove_triangle(&cur, &a, t, radius) {
                Ok(x) => {
                    done = Some(x);
                    break;
                }
                Err(FrontError::BallTooLarge { radius: r, .. }) => radius = Some(0.5 * r),
                Err(e) => return Err(e.into()),
            }
        }
        let Some((next, surgery)) = done else {
            return Ok(Elimination {
                front: cur,
                log,
                stalled: Some("no admissible surgery ball".into()),
            });
        };
        log.push(surgery);
        cur = next;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Agreement {
    pub samples: usize,
    pub agree: usize,
    pub mismatches_in_balls: usize,
    pub mismatches_outside: usize,
}

impl Agreement {
    pub fn ratio(&self) -> f64 {
        if self.samples == 0 {
            1.0
        } else {
            self.agree as f64 / self.samples as f64
        }
    }
}

/// Compares the section surviving elimination with pointwise selection at
/// each `q`. A sample on a blended stretch takes the section of the original
/// vertex bordering the blend on its side of the surgery point.
pub fn agreement(f: &FrontCurve, a: &FrontAnalysis, e: &Elimination, qs: &[f64], delta: f64) -> Result<Agreement> {
    let g = &e.front;
    let ga = analyze(g)?;
    let mut out = Agreement::default();
    for &q in qs {
        out.samples += 1;
        let (pw, _) = select_robust(f, a, q, delta)?;
        let (el, _) = select_robust(g, &ga, q, delta)?;
        let qq = f.locate(q);
        let ball = e
            .log
            .iter()
            .map(|s| (s, (f.locate(s.q) - qq).abs()))
            .filter(|&(s, d)| d <= s.radius)
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(s, _)| s);
        let blended = g.vertices[el.segment].blended || g.vertices[el.segment + 1].blended;
        let origin = if blended {
            let left = ball.map_or(true, |s| qq < f.locate(s.q));
            if left {
                g.vertices[..=el.segment].iter().rev().find(|v| !v.blended)
            } else {
                g.vertices[el.segment + 1..].iter().find(|v| !v.blended)
            }
        } else {
            Some(&g.vertices[el.segment])
        };
        let same = origin
            .and_then(|v| f.vertices.binary_search_by(|w| w.q0.total_cmp(&v.q0)).ok())
            .map(|k| a.section_of_segment(k.min(f.segment_count() - 1)) == pw.section)
            .unwrap_or(false);
        if same {
            out.agree += 1;
        } else if ball.is_some() || blended {
            out.mismatches_in_balls += 1;
        } else {
            out.mismatches_outside += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOptions {
    pub seeds: usize,
    /// RK4 step; the problem's default when `None`.
    pub step: Option<f64>,
    pub geometric_tol: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            seeds: 1024,
            step: None,
            geometric_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceInfo {
    pub t: f64,
    /// Time actually used; differs from `t` on degenerate slices.
    pub t_used: f64,
    pub degenerate: bool,
    pub refine_depth_exceeded: bool,
    pub cusps: usize,
    pub double_points: usize,
    pub triangles: usize,
}

/// A front ready for selection at one time.
#[derive(Debug, Clone)]
pub struct Slice {
    pub front: FrontCurve,
    pub analysis: FrontAnalysis,
    pub info: SliceInfo,
}

#[derive(Debug, Clone)]
pub struct GridRun {
    pub solution: GridSolution,
    pub slices: Vec<SliceInfo>,
}

fn slice_from(spec: &ProblemSpec, t: f64, strands: &[CharStrand], opts: &GridOptions) -> Result<(FrontCurve, FrontAnalysis, bool)> {
    let step = opts.step.unwrap_or_else(|| spec.default_step());
    let r = refine_seeds(spec, t, strands, opts.geometric_tol, step)?;
    let front = build_front(&r.strands, &spec.domain)?;
    let analysis = analyze(&front)?;
    Ok((front, analysis, r.depth_exceeded))
}

fn retryable(e: &SelectError) -> bool {
    matches!(
        e,
        SelectError::Front(FrontError::NonGeneric(_) | FrontError::IndexInconsistency { .. })
    )
}

/// The front at `t`, moved to `t ± ε` when `t` is a perestroika instant.
pub fn front_slice(spec: &ProblemSpec, t: f64, strands: Option<&[CharStrand]>, eps: f64, opts: &GridOptions) -> Result<Slice> {
    let step = opts.step.unwrap_or_else(|| spec.default_step());
    let seeds = spec.base_seeds(opts.seeds);
    let owned;
    let base = match strands {
        Some(s) => s,
        None => {
            owned = evolve(spec, t, &seeds, step)?;
            &owned
        }
    };
    let mut attempt = slice_from(spec, t, base, opts).map(|x| (x, t));
    for shift in [eps, -eps, 0.5 * eps, -0.5 * eps] {
        match &attempt {
            Err(e) if retryable(e) && t + shift >= 0.0 => {
                let moved = evolve(spec, t + shift, &seeds, step)?;
                attempt = slice_from(spec, t + shift, &moved, opts).map(|x| (x, t + shift));
            }
            _ => break,
        }
    }
    let ((front, analysis, depth_exceeded), t_used) = attempt.map_err(|e| SelectError::Slice {
        t,
        reason: e.to_string(),
    })?;
    Ok(Slice {
        info: SliceInfo {
            t,
            t_used,
            degenerate: t_used != t,
            refine_depth_exceeded: depth_exceeded,
            cusps: analysis.cusps.len(),
            double_points: analysis.double_points.len(),
            triangles: analysis.triangles.len(),
        },
        front,
        analysis,
    })
}

/// Nominal spacing of a node list.
pub(crate) fn spacing(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        1.0
    } else {
        (xs[xs.len() - 1] - xs[0]).abs() / (xs.len() - 1) as f64
    }
}

/// All time slices of a grid run, computed in parallel, in time order.
pub fn grid_slices(spec: &ProblemSpec, times: &[f64], opts: &GridOptions) -> Result<Vec<Slice>> {
    let step = opts.step.unwrap_or_else(|| spec.default_step());
    let seeds = spec.base_seeds(opts.seeds);
    let base = evolve_to(spec, times, &seeds, step)?;
    let eps = spacing(times).min(spec.t_max) / 100.0;
    (0..times.len())
        .into_par_iter()
        .map(|k| {
            let strands: Vec<CharStrand> = base
                .iter()
                .map(|s| CharStrand {
                    q0: s.q0,
                    states: vec![s.states[k]],
                })
                .collect();
            front_slice(spec, times[k], Some(&strands), eps, opts)
        })
        .collect()
}

/// `u(t, q)` by pointwise minimax selection on every slice.
pub fn minimax_grid(spec: &ProblemSpec, times: &[f64], qs: &[f64], opts: &GridOptions) -> Result<GridRun> {
    let slices = grid_slices(spec, times, opts)?;
    let delta = spacing(qs) / 100.0;
    let rows: Vec<Vec<(f64, i64, u32)>> = slices
        .par_iter()
        .map(|s| {
            qs.iter()
                .map(|&q| {
                    let (pt, n) = select_robust(&s.front, &s.analysis, q, delta).map_err(|e| SelectError::Slice {
                        t: s.info.t,
                        reason: format!("q = {q}: {e}"),
                    })?;
                    Ok((pt.z, pt.section as i64, n as u32))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(times.len() * qs.len());
    let mut branch_ids = Vec::with_capacity(values.capacity());
    let mut counts = Vec::with_capacity(values.capacity());
    for row in rows {
        for (z, b, n) in row {
            values.push(z);
            branch_ids.push(b);
            counts.push(n);
        }
    }
    Ok(GridRun {
        solution: GridSolution {
            times: times.to_vec(),
            qs: qs.to_vec(),
            values,
            branch_ids,
            provenance: Provenance::Minimax,
            period: spec.domain.period(),
            fiber_counts: Some(counts),
        },
        slices: slices.into_iter().map(|s| s.info).collect(),
    })
}
