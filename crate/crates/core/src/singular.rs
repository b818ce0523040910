//! Singular set of a solution grid and its classification.
//!
//! Singular cells are traced row by row into clusters, clusters are linked
//! across rows into a graph, and the graph's local shape at each node names
//! the event: arcs are shocks, arcs starting out of nothing are births, two
//! arcs joining are merges. An arc that ends, or splits, going forward in
//! time is forbidden in minimax solutions.

use serde::Serialize;

use crate::grid::{linspace, GridSolution, Provenance};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingularMask {
    pub nt: usize,
    /// Cells per row: `nq` on periodic grids (the last wraps), else `nq − 1`.
    pub cells: usize,
    pub mask: Vec<bool>,
}

impl SingularMask {
    pub fn get(&self, k: usize, j: usize) -> bool {
        self.mask[k * self.cells + j]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn row_has(&self, k: usize) -> bool {
        self.mask[k * self.cells..(k + 1) * self.cells].iter().any(|&b| b)
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Marks cells across which the selected section changes, except where a
/// periodic front's last section wraps into its first. Grids without
/// branch ids fall back to slope jumps larger than 5× the row's median
/// slope variation.
pub fn singular_set(g: &GridSolution) -> SingularMask {
    let (nt, nq) = (g.nt(), g.nq());
    let periodic = g.period.is_some();
    let cells = if periodic { nq } else { nq - 1 };
    let next = |j: usize| (j + 1) % nq;
    let mut mask = vec![false; nt * cells];
    if g.has_branches() {
        for k in 0..nt {
            let top = (0..nq).map(|j| g.branch(k, j)).max().unwrap_or(0);
            for j in 0..cells {
                let (a, b) = (g.branch(k, j), g.branch(k, next(j)));
                // the cut of a periodic front: last section runs on into the first
                let seam = periodic && top > 0 && a == top && b == 0;
                mask[k * cells + j] = a != b && !seam;
            }
        }
        return SingularMask { nt, cells, mask };
    }
    let dq = if nq > 1 { (g.qs[nq - 1] - g.qs[0]) / (nq - 1) as f64 } else { 1.0 };
    for k in 0..nt {
        let u = g.row(k);
        let slope = |j: isize| -> Option<f64> {
            let n = nq as isize;
            if periodic {
                let a = j.rem_euclid(n) as usize;
                Some((u[(a + 1) % nq] - u[a]) / dq)
            } else if j >= 0 && j + 1 < n {
                Some((u[j as usize + 1] - u[j as usize]) / dq)
            } else {
                None
            }
        };
        let jump: Vec<f64> = (0..cells as isize)
            .map(|j| match (slope(j - 1), slope(j + 1)) {
                (Some(a), Some(b)) => (b - a).abs(),
                _ => 0.0,
            })
            .collect();
        let med = median(jump.clone());
        let scale = (0..cells as isize).filter_map(slope).fold(0.0f64, |m, s| m.max(s.abs()));
        let floor = (5.0 * med).max(1e-8 * (1.0 + scale));
        for j in 0..cells {
            let l = if periodic || j > 0 { jump[(j + cells - 1) % cells] } else { 0.0 };
            let r = if periodic || j + 1 < cells { jump[(j + 1) % cells] } else { 0.0 };
            mask[k * cells + j] = jump[j] > floor && jump[j] >= l && jump[j] > r;
        }
    }
    SingularMask { nt, cells, mask }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EventKind {
    Shock,
    ShockBirth,
    ShockMerge,
    ForbiddenA,
    ForbiddenB,
    Unclassified,
}

impl EventKind {
    pub fn is_forbidden(self) -> bool {
        matches!(self, EventKind::ForbiddenA | EventKind::ForbiddenB)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evidence {
    pub row: usize,
    pub predecessors: usize,
    pub successors: usize,
    /// Rows spanned by the arc, for shocks.
    pub arc_rows: Option<usize>,
    /// Front points over the event's `q` one row earlier, for births.
    pub fiber_count_before: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularEvent {
    pub kind: EventKind,
    pub t: f64,
    pub q: f64,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy)]
struct Cluster {
    row: usize,
    /// Position in cell units along the row, possibly past `cells` when a
    /// periodic run wraps.
    pos: f64,
}

fn clusters(mask: &SingularMask, periodic: bool) -> Vec<Vec<Cluster>> {
    let n = mask.cells;
    (0..mask.nt)
        .map(|k| {
            let on = |j: usize| mask.get(k, j % n);
            let mut out = Vec::new();
            if (0..n).all(on) {
                out.push(Cluster { row: k, pos: 0.5 * n as f64 });
                return out;
            }
            // start scanning just after an unmasked cell so periodic runs stay whole
            let start = if periodic { (0..n).find(|&j| !on(j)).map_or(0, |j| j + 1) } else { 0 };
            let mut j = start;
            while j < start + n {
                if on(j) {
                    let a = j;
                    while j < start + n && on(j) {
                        j += 1;
                    }
                    let centre = 0.5 * (a + j - 1) as f64;
                    out.push(Cluster { row: k, pos: centre % n as f64 });
                } else {
                    j += 1;
                }
            }
            out.sort_by(|x, y| x.pos.total_cmp(&y.pos));
            out
        })
        .collect()
}

/// Classifies the singular set's graph nodes and arcs.
pub fn classify(g: &GridSolution, mask: &SingularMask) -> Vec<SingularEvent> {
    let (nt, nq) = (g.nt(), g.nq());
    if nt == 0 || nq < 2 || mask.is_empty() {
        return Vec::new();
    }
    let periodic = g.period.is_some();
    let cells = mask.cells;
    let dq = (g.qs[nq - 1] - g.qs[0]) / (nq - 1) as f64;
    let dt = if nt > 1 { (g.times[nt - 1] - g.times[0]) / (nt - 1) as f64 } else { 1.0 };
    let vmax = (0..nt)
        .flat_map(|k| g.row(k).windows(2).map(|w| ((w[1] - w[0]) / dq).abs()).collect::<Vec<_>>())
        .fold(0.0f64, f64::max);
    let reach = 3.0 + 2.0 * dt * (1.0 + vmax) / dq;
    let dist = |a: f64, b: f64| {
        let d = (a - b).abs();
        if periodic {
            d.min(cells as f64 - d)
        } else {
            d
        }
    };

    let rows = clusters(mask, periodic);
    let mut offset = Vec::with_capacity(nt + 1);
    let mut nodes: Vec<Cluster> = Vec::new();
    for r in &rows {
        offset.push(nodes.len());
        nodes.extend_from_slice(r);
    }
    offset.push(nodes.len());
    let row_nodes = |k: usize| offset[k]..offset[k + 1];

    let nearest = |i: usize, k: usize| -> Option<usize> {
        row_nodes(k)
            .map(|j| (j, dist(nodes[i].pos, nodes[j].pos)))
            .filter(|&(_, d)| d <= reach)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(j, _)| j)
    };
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for k in 0..nt.saturating_sub(1) {
        for i in row_nodes(k) {
            if let Some(j) = nearest(i, k + 1) {
                edges.push((i, j));
            }
        }
        for j in row_nodes(k + 1) {
            if let Some(i) = nearest(j, k) {
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let mut succ = vec![Vec::new(); nodes.len()];
    let mut pred = vec![Vec::new(); nodes.len()];
    for &(i, j) in &edges {
        succ[i].push(j);
        pred[j].push(i);
    }

    let q_at = |c: &Cluster| {
        let x = g.qs[0] + (c.pos + 0.5) * dq;
        match g.period {
            Some(p) => g.qs[0] + (x - g.qs[0]).rem_euclid(p),
            None => x,
        }
    };
    let fiber_before = |c: &Cluster| -> Option<u32> {
        let counts = g.fiber_counts.as_ref()?;
        if c.row == 0 {
            return None;
        }
        let j = (c.pos.round() as usize) % nq;
        Some(counts[(c.row - 1) * nq + j])
    };

    let mut events = Vec::new();
    let last = nt - 1;
    let regular = |i: usize| pred[i].len() == 1 && succ[i].len() == 1;
    for (i, c) in nodes.iter().enumerate() {
        let (np, ns) = (pred[i].len(), succ[i].len());
        let kind = if ns >= 2 {
            Some(EventKind::ForbiddenB)
        } else if ns == 0 && c.row < last {
            Some(EventKind::ForbiddenA)
        } else if np >= 3 {
            Some(EventKind::Unclassified)
        } else if np == 2 {
            Some(EventKind::ShockMerge)
        } else if np == 0 && c.row > 0 {
            Some(EventKind::ShockBirth)
        } else {
            None
        };
        if let Some(kind) = kind {
            events.push(SingularEvent {
                kind,
                t: g.times[c.row],
                q: q_at(c),
                evidence: Evidence {
                    row: c.row,
                    predecessors: np,
                    successors: ns,
                    arc_rows: None,
                    fiber_count_before: if kind == EventKind::ShockBirth { fiber_before(c) } else { None },
                },
            });
        }
    }

    // one shock per arc: maximal chains through regular nodes
    let mut seen = vec![false; nodes.len()];
    for i in 0..nodes.len() {
        if seen[i] || (pred[i].len() == 1 && regular(pred[i][0]) && !seen[pred[i][0]] && succ[pred[i][0]] == vec![i]) {
            continue;
        }
        let mut chain = vec![i];
        seen[i] = true;
        let mut cur = i;
        while succ[cur].len() == 1 {
            let nx = succ[cur][0];
            if seen[nx] || pred[nx].len() != 1 {
                break;
            }
            seen[nx] = true;
            chain.push(nx);
            cur = nx;
        }
        let interior: Vec<usize> = chain.iter().copied().filter(|&x| regular(x)).collect();
        let pick = if interior.is_empty() { &chain } else { &interior };
        let mid = &nodes[pick[pick.len() / 2]];
        events.push(SingularEvent {
            kind: EventKind::Shock,
            t: g.times[mid.row],
            q: q_at(mid),
            evidence: Evidence {
                row: mid.row,
                predecessors: pred[pick[pick.len() / 2]].len(),
                successors: succ[pick[pick.len() / 2]].len(),
                arc_rows: Some(chain.len()),
                fiber_count_before: None,
            },
        });
    }
    events.sort_by(|a, b| {
        a.t.total_cmp(&b.t)
            .then(a.q.total_cmp(&b.q))
            .then(a.kind.cmp(&b.kind))
    });
    events
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForbiddenReport {
    pub forbidden_a: usize,
    pub forbidden_b: usize,
    pub unclassified: usize,
    pub locations: Vec<SingularEvent>,
}

impl ForbiddenReport {
    pub fn clean(&self) -> bool {
        self.forbidden_a == 0 && self.forbidden_b == 0
    }
}

pub fn forbidden_report(events: &[SingularEvent]) -> ForbiddenReport {
    let count = |k: EventKind| events.iter().filter(|e| e.kind == k).count();
    ForbiddenReport {
        forbidden_a: count(EventKind::ForbiddenA),
        forbidden_b: count(EventKind::ForbiddenB),
        unclassified: count(EventKind::Unclassified),
        locations: events
            .iter()
            .filter(|e| e.kind.is_forbidden() || e.kind == EventKind::Unclassified)
            .copied()
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Germ {
    /// `max{t, −|q|}`
    A,
    /// `min{|q|, max{−|q|, t}}`
    B,
}

/// Grid on `[−1, 1]²` sampling a forbidden germ, with the active piece of the
/// max/min formula as branch id.
pub fn germ_fixture(germ: Germ, n: usize) -> GridSolution {
    let times = linspace(-1.0, 1.0, n);
    let qs = linspace(-1.0, 1.0, n);
    let mut values = Vec::with_capacity(n * n);
    let mut branch_ids = Vec::with_capacity(n * n);
    let abs_piece = |q: f64, base: i64| (q.abs(), if q >= 0.0 { base } else { base + 1 });
    let neg_piece = |q: f64, base: i64| (-q.abs(), if q >= 0.0 { base } else { base + 1 });
    let max = |a: (f64, i64), b: (f64, i64)| if b.0 > a.0 { b } else { a };
    let min = |a: (f64, i64), b: (f64, i64)| if b.0 < a.0 { b } else { a };
    for &t in &times {
        for &q in &qs {
            let (u, b) = match germ {
                Germ::A => max((t, 0), neg_piece(q, 1)),
                Germ::B => min(abs_piece(q, 0), max(neg_piece(q, 2), (t, 4))),
            };
            values.push(u);
            branch_ids.push(b);
        }
    }
    GridSolution {
        times,
        qs,
        values,
        branch_ids,
        provenance: Provenance::Minimax,
        period: None,
        fiber_counts: None,
    }
}
