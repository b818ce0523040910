//! Minimax of one-variable functions that are quadratic at infinity.
//!
//! A generic function on the line has alternating minima and maxima. The
//! coupling decomposition repeatedly cancels the incident (adjacent) pair
//! with the smallest value gap; exactly one critical point survives and its
//! value is the minimax. [`persistence`] is an independent route to the same
//! answer through union-find over a sampled sublevel filtration.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MorseError {
    #[error("non-generic input: {0}")]
    NonGeneric(String),
    #[error("resolution too coarse near xi = {xi}")]
    ResolutionTooCoarse { xi: f64 },
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("function is not quadratic at infinity on its window: {0}")]
    NotQuadraticAtInfinity(String),
}

pub type Result<T> = std::result::Result<T, MorseError>;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Bisection accuracy on critical point locations.
    pub xi: f64,
    /// Relative tolerance for value comparisons (scaled by the value range).
    pub value_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            xi: 1e-8,
            value_rel: 1e-10,
        }
    }
}

/// A function of one variable, quadratic at infinity with index 0 (`+ξ²`
/// tails) or 1 (`-ξ²` tails). Outside `window` it is only assumed monotone
/// toward its tails.
#[derive(Clone)]
pub struct FiberFunction {
    f: RealFn,
    df: Option<RealFn>,
    window: (f64, f64),
    infinity_index: u8,
}

impl std::fmt::Debug for FiberFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiberFunction")
            .field("window", &self.window)
            .field("infinity_index", &self.infinity_index)
            .field("has_derivative", &self.df.is_some())
            .finish()
    }
}

impl FiberFunction {
    pub fn new<F>(f: F, window: (f64, f64), infinity_index: u8) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if infinity_index > 1 {
            return Err(MorseError::MalformedInput(format!(
                "index at infinity must be 0 or 1 for a function of one variable, got {infinity_index}"
            )));
        }
        if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
            return Err(MorseError::MalformedInput(format!("bad window {window:?}")));
        }
        Ok(FiberFunction {
            f: Arc::new(f),
            df: None,
            window,
            infinity_index,
        })
    }

    /// Attaches an exact derivative, used instead of central differences.
    pub fn with_derivative<D>(mut self, df: D) -> Self
    where
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.df = Some(Arc::new(df));
        self
    }

    pub fn value(&self, xi: f64) -> f64 {
        (self.f)(xi)
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn infinity_index(&self) -> u8 {
        self.infinity_index
    }

    fn derivative(&self, xi: f64) -> f64 {
        match &self.df {
            Some(df) => df(xi),
            None => {
                let h = 1e-6 * (self.window.1 - self.window.0).max(1.0);
                (self.value(xi + h) - self.value(xi - h)) / (2.0 * h)
            }
        }
    }

    /// Adds a deterministic Gaussian bump of height `1e-9 × amplitude_scale`
    /// centred at a seeded point of the window. Used to break value ties.
    pub fn perturbed(&self, seed: u64, amplitude_scale: f64) -> FiberFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = self.window;
        let centre = rng.gen_range(a..b);
        let width = 0.1 * (b - a);
        let height = 1e-9 * amplitude_scale.max(f64::MIN_POSITIVE);
        let f = self.f.clone();
        let df = self.df.clone();
        let bump = move |x: f64| height * (-((x - centre) / width).powi(2)).exp();
        let dbump = move |x: f64| -2.0 * (x - centre) / (width * width) * bump(x);
        FiberFunction {
            f: Arc::new(move |x| f(x) + bump(x)),
            df: df.map(|d| Arc::new(move |x: f64| d(x) + dbump(x)) as RealFn),
            window: self.window,
            infinity_index: self.infinity_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub xi: f64,
    pub value: f64,
    /// Morse index; 0 for a minimum, 1 for a maximum of a function of one variable.
    pub index: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingDecomposition {
    /// Coupled pairs `(upper, lower)` in the order they were cancelled.
    pub pairs: Vec<(CriticalPoint, CriticalPoint)>,
    pub free: CriticalPoint,
}

impl CouplingDecomposition {
    pub fn minimax_value(&self) -> f64 {
        self.free.value
    }
}

pub fn minimax_value(d: &CouplingDecomposition) -> f64 {
    d.minimax_value()
}

/// Critical points of `f` inside its window, sorted by `xi`.
pub fn critical_points(
    f: &FiberFunction,
    resolution: usize,
    tol: Tolerances,
) -> Result<Vec<CriticalPoint>> {
    if resolution < 64 {
        return Err(MorseError::MalformedInput(format!(
            "resolution must be at least 64, got {resolution}"
        )));
    }
    let (a, b) = f.window;
    let h = (b - a) / resolution as f64;
    let xs: Vec<f64> = (0..=resolution).map(|k| a + k as f64 * h).collect();
    let ds: Vec<f64> = xs.iter().map(|&x| f.derivative(x)).collect();

    // cells [x_k, x_{k+1}] where the derivative changes sign
    // zero counts as non-negative throughout
    let cells: Vec<usize> = (0..resolution)
        .filter(|&k| (ds[k] >= 0.0) != (ds[k + 1] >= 0.0))
        .collect();

    let mut roots = Vec::new();
    let mut k = 0;
    while k < cells.len() {
        let c = cells[k];
        let crowded = k + 1 < cells.len() && cells[k + 1] <= c + 1;
        if crowded {
            // two sign changes in neighbouring cells: resample the pair 16×
            let lo = xs[c];
            let hi = xs[(cells[k + 1] + 1).min(resolution)];
            let sub = refine_cells(f, lo, hi, 32)?;
            if sub.len() < 2 {
                return Err(MorseError::ResolutionTooCoarse { xi: xs[c] });
            }
            roots.extend(sub);
            k += 2;
        } else {
            roots.push((xs[c], xs[c + 1]));
            k += 1;
        }
    }

    let mut points = Vec::with_capacity(roots.len());
    for (lo, hi) in roots {
        let xi = bisect(|x| f.derivative(x), lo, hi, tol.xi);
        let value = f.value(xi);
        let rising = f.derivative(lo) < 0.0;
        let delta = (hi - lo).max(4.0 * tol.xi);
        let second = f.value(xi + delta) - 2.0 * value + f.value(xi - delta);
        let index = if second > 0.0 { 0 } else { 1 };
        if (index == 0) != rising || second == 0.0 {
            return Err(MorseError::NonGeneric(format!(
                "degenerate critical point near xi = {xi}"
            )));
        }
        points.push(CriticalPoint { xi, value, index });
    }
    points.sort_by(|x, y| x.xi.total_cmp(&y.xi));

    // generic: pairwise distinct critical values
    let range = value_range(&points);
    let vtol = tol.value_rel * range.max(1.0);
    let mut vals: Vec<f64> = points.iter().map(|c| c.value).collect();
    vals.sort_by(f64::total_cmp);
    if let Some(w) = vals.windows(2).find(|w| (w[1] - w[0]).abs() <= vtol) {
        return Err(MorseError::NonGeneric(format!(
            "critical values {} and {} coincide",
            w[0], w[1]
        )));
    }

    check_infinity(f, &points)?;
    Ok(points)
}

fn refine_cells(f: &FiberFunction, lo: f64, hi: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|k| lo + k as f64 * h).collect();
    let ds: Vec<f64> = xs.iter().map(|&x| f.derivative(x)).collect();
    let cells: Vec<usize> = (0..n)
        .filter(|&k| (ds[k] >= 0.0) != (ds[k + 1] >= 0.0))
        .collect();
    if cells.windows(2).any(|w| w[1] <= w[0] + 1) {
        return Err(MorseError::ResolutionTooCoarse { xi: lo });
    }
    Ok(cells.into_iter().map(|c| (xs[c], xs[c + 1])).collect())
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let left = g(lo) >= 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (g(mid) >= 0.0) == left {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn value_range(points: &[CriticalPoint]) -> f64 {
    let lo = points.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .map(|c| c.value)
        .fold(f64::NEG_INFINITY, f64::max);
    if points.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

fn check_infinity(f: &FiberFunction, points: &[CriticalPoint]) -> Result<()> {
    let (a, b) = f.window;
    let (fa, fb) = (f.value(a), f.value(b));
    let Some(first) = points.first() else {
        return Err(MorseError::NotQuadraticAtInfinity(
            "no critical point inside the window".into(),
        ));
    };
    let last = points.last().unwrap();
    let tail_index = f.infinity_index as i32;
    // +ξ² tails: window ends lie above every critical value and the outermost
    // critical points are minima; -ξ² tails mirror this.
    let ok = if tail_index == 0 {
        points.iter().all(|c| c.value < fa && c.value < fb)
    } else {
        points.iter().all(|c| c.value > fa && c.value > fb)
    };
    if !ok || first.index != tail_index || last.index != tail_index {
        return Err(MorseError::NotQuadraticAtInfinity(format!(
            "window ends ({fa}, {fb}) do not dominate the critical values"
        )));
    }
    Ok(())
}

/// Incidence coefficient of `a` over `b` for a function of one variable:
/// ±1 when `b` is the immediate left/right neighbour of `a` and one index below.
pub fn incidence(a: &CriticalPoint, b: &CriticalPoint, all: &[CriticalPoint]) -> i32 {
    if a.index != b.index + 1 {
        return 0;
    }
    let pa = all.iter().position(|c| c == a);
    let pb = all.iter().position(|c| c == b);
    match (pa, pb) {
        (Some(i), Some(j)) if j == i + 1 => 1,
        (Some(i), Some(j)) if i == j + 1 => -1,
        _ => 0,
    }
}

pub fn couple(points: &[CriticalPoint]) -> Result<CouplingDecomposition> {
    couple_with_tol(points, Tolerances::default())
}

/// Greedy coupling: cancel the incident pair with the smallest gap, then
/// recompute adjacency among the survivors.
pub fn couple_with_tol(points: &[CriticalPoint], tol: Tolerances) -> Result<CouplingDecomposition> {
    if points.is_empty() {
        return Err(MorseError::MalformedInput("no critical points".into()));
    }
    if let Some(w) = points.windows(2).find(|w| (w[0].index - w[1].index).abs() != 1) {
        return Err(MorseError::MalformedInput(format!(
            "indices do not alternate at xi = {} (indices {} and {})",
            w[1].xi, w[0].index, w[1].index
        )));
    }
    let vtol = tol.value_rel * value_range(points).max(1.0);
    let mut alive: Vec<CriticalPoint> = points.to_vec();
    let mut pairs = Vec::with_capacity(points.len() / 2);
    while alive.len() > 1 {
        let mut best: Option<(usize, f64)> = None;
        let mut runner_up = f64::INFINITY;
        for k in 0..alive.len() - 1 {
            let (x, y) = (&alive[k], &alive[k + 1]);
            let (upper, lower) = if x.index > y.index { (x, y) } else { (y, x) };
            if upper.index != lower.index + 1 || upper.value <= lower.value {
                continue;
            }
            let gap = upper.value - lower.value;
            match best {
                Some((_, g)) if gap >= g => runner_up = runner_up.min(gap),
                Some((_, g)) => {
                    runner_up = g;
                    best = Some((k, gap));
                }
                None => best = Some((k, gap)),
            }
        }
        let Some((k, gap)) = best else {
            return Err(MorseError::MalformedInput(format!(
                "{} critical points left with no incident pair",
                alive.len()
            )));
        };
        if runner_up - gap <= vtol {
            return Err(MorseError::NonGeneric(format!(
                "two incident pairs share the gap {gap}"
            )));
        }
        let y = alive.remove(k + 1);
        let x = alive.remove(k);
        pairs.push(if x.index > y.index { (x, y) } else { (y, x) });
    }
    Ok(CouplingDecomposition {
        pairs,
        free: alive[0],
    })
}

/// Sample-level persistence pairing of a sublevel filtration (or of the
/// superlevel filtration when the index at infinity is 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Persistence {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    /// `(upper, lower)` sample indices: the merging extremum and the younger one it kills.
    pub pairs: Vec<(usize, usize)>,
    /// Sample index of the essential class.
    pub essential: usize,
}

impl Persistence {
    pub fn essential_value(&self) -> f64 {
        self.values[self.essential]
    }
}

pub fn persistence(f: &FiberFunction, resolution: usize) -> Result<Persistence> {
    if resolution < 64 {
        return Err(MorseError::MalformedInput(format!(
            "resolution must be at least 64, got {resolution}"
        )));
    }
    let (a, b) = f.window;
    let h = (b - a) / resolution as f64;
    let xs: Vec<f64> = (0..=resolution).map(|k| a + k as f64 * h).collect();
    let values: Vec<f64> = xs.iter().map(|&x| f.value(x)).collect();
    // work on the sublevel filtration of ±f
    let s = if f.infinity_index == 0 { 1.0 } else { -1.0 };
    let keyed: Vec<f64> = values.iter().map(|v| s * v).collect();
    let (pairs, essential) = union_find_pairs(&keyed);
    Ok(Persistence {
        xs,
        values,
        pairs,
        essential,
    })
}

fn union_find_pairs(values: &[f64]) -> (Vec<(usize, usize)>, usize) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let mut parent: Vec<usize> = (0..n).collect();
    let birth: Vec<usize> = (0..n).collect();
    let mut active = vec![false; n];

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    let mut pairs = Vec::new();
    for &i in &order {
        active[i] = true;
        let mut roots: Vec<usize> = Vec::with_capacity(2);
        for j in [i.wrapping_sub(1), i + 1] {
            if j < n && active[j] {
                let r = find(&mut parent, j);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        match roots.as_slice() {
            [] => {}
            [r] => parent[i] = *r,
            [r1, r2] => {
                let (elder, younger) = if values[birth[*r1]] <= values[birth[*r2]] {
                    (*r1, *r2)
                } else {
                    (*r2, *r1)
                };
                pairs.push((i, birth[younger]));
                parent[younger] = elder;
                parent[i] = elder;
            }
            _ => unreachable!("a sample has at most two neighbours"),
        }
    }
    let root = find(&mut parent, order[0]);
    (pairs, birth[root])
}

/// Minimax through the persistence route: the value of the essential class.
pub fn minimax_oracle(f: &FiberFunction, resolution: usize) -> Result<f64> {
    Ok(persistence(f, resolution)?.essential_value())
}
