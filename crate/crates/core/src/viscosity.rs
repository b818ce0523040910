//! Viscosity solutions, as independent references: the Lax–Oleinik formula
//! for Hamiltonians convex in `p`, and a monotone Lax–Friedrichs scheme for
//! anything else.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::characteristics::{Domain, ProblemSpec};
use crate::expr::{ExprError, Expression, Var};
use crate::grid::{GridSolution, Provenance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViscosityError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("hamiltonian is not convex in p: {0}")]
    NotConvex(String),
    #[error("slope {v} outside the attainable range [{lo}, {hi}]")]
    OutOfRange { v: f64, lo: f64, hi: f64 },
    #[error("cfl {0} exceeds 0.9")]
    CflViolation(f64),
    #[error("scheme blew up at t = {t}, q = {q}")]
    NonFinite { t: f64, q: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ViscosityError>;

const TABLE: usize = 4097;

/// `H(p)` with a sampled convexity certificate and a tabulated Legendre
/// transform for coarse searches.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexHamiltonian {
    pub h: Expression,
    pub window: (f64, f64),
    /// `[H'(pmin), H'(pmax)]`, the slopes whose transform is attained.
    pub slopes: (f64, f64),
    #[serde(skip)]
    table: Vec<f64>,
    /// Chord slopes of `H` between consecutive window samples.
    #[serde(skip)]
    chords: Vec<f64>,
}

impl ConvexHamiltonian {
    pub fn new(h: Expression, window: (f64, f64)) -> Result<ConvexHamiltonian> {
        if h.depends_on(Var::T) || h.depends_on(Var::Q) {
            return Err(ViscosityError::NotConvex("H must depend on p only".into()));
        }
        let (a, b) = window;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(ViscosityError::Invalid(format!("bad p-window [{a}, {b}]")));
        }
        let n = 2049;
        let dp = (b - a) / (n - 1) as f64;
        let vals: Vec<f64> = (0..n)
            .map(|k| h.eval(0.0, 0.0, a + dp * k as f64))
            .collect::<std::result::Result<_, _>>()?;
        for k in 1..n - 1 {
            let second = (vals[k + 1] - 2.0 * vals[k] + vals[k - 1]) / (dp * dp);
            if second < -1e-8 - 1e-14 * vals[k].abs() / (dp * dp) {
                return Err(ViscosityError::NotConvex(format!(
                    "H'' ≈ {second} at p = {}",
                    a + dp * k as f64
                )));
            }
        }
        let lo = h.eval_d(0.0, 0.0, a, Var::P)?.1;
        let hi = h.eval_d(0.0, 0.0, b, Var::P)?.1;
        let mut hc = ConvexHamiltonian {
            h,
            window,
            slopes: (lo, hi),
            table: Vec::new(),
            chords: vals.windows(2).map(|w| (w[1] - w[0]) / dp).collect(),
        };
        hc.table = (0..TABLE)
            .map(|i| hc.legendre(hc.table_v(i)))
            .collect::<Result<_>>()?;
        Ok(hc)
    }

    fn table_v(&self, i: usize) -> f64 {
        let (lo, hi) = self.slopes;
        lo + (hi - lo) * i as f64 / (TABLE - 1) as f64
    }

    fn hp(&self, p: f64) -> f64 {
        self.h.eval(0.0, 0.0, p).unwrap_or(f64::INFINITY)
    }

    /// `L(v) = sup_p (v p − H(p))` over the window, to about 1e-8.
    pub fn legendre(&self, v: f64) -> Result<f64> {
        let (lo, hi) = self.slopes;
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if v < lo - slack || v > hi + slack {
            return Err(ViscosityError::OutOfRange { v, lo, hi });
        }
        let (a, b) = self.window;
        let dp = (b - a) / self.chords.len() as f64;
        let g = |p: f64| v * p - self.hp(p);
        // the sampled maximizer sits where the chord slopes pass v
        let k = self.chords.partition_point(|&c| c < v);
        let best = a + dp * k as f64;
        let (mut x0, mut x1) = ((best - dp).max(a), (best + dp).min(b));
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = x1 - r * (x1 - x0);
        let mut d = x0 + r * (x1 - x0);
        let (mut gc, mut gd) = (g(c), g(d));
        for _ in 0..60 {
            if gc > gd {
                x1 = d;
                d = c;
                gd = gc;
                c = x1 - r * (x1 - x0);
                gc = g(c);
            } else {
                x0 = c;
                c = d;
                gc = gd;
                d = x0 + r * (x1 - x0);
                gd = g(d);
            }
        }
        Ok(g(0.5 * (x0 + x1)).max(g(best)))
    }

    /// Linear interpolation in the Legendre table; only for coarse searches.
    fn legendre_table(&self, v: f64) -> f64 {
        let (lo, hi) = self.slopes;
        let x = ((v - lo) / (hi - lo) * (TABLE - 1) as f64).clamp(0.0, (TABLE - 1) as f64);
        let i = (x.floor() as usize).min(TABLE - 2);
        let s = x - i as f64;
        self.table[i] * (1.0 - s) + self.table[i + 1] * s
    }
}

/// Reduces a concave problem to a convex one: `v = −u` solves the equation
/// with `H(p) ↦ −H(−p)` and initial data `−u0`.
pub fn concave_flip(h: &Expression, u0: &Expression) -> (Expression, Expression) {
    (h.with_p_reflected().negated(), u0.negated())
}

/// Hopf–Lax / Lax–Oleinik: `u(t, q) = min_{q0} u0(q0) + t L((q − q0)/t)`.
pub fn lax_oleinik(hc: &ConvexHamiltonian, u0: &Expression, t: f64, qs: &[f64]) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(ViscosityError::Invalid(format!("negative time {t}")));
    }
    if t == 0.0 {
        return qs
            .iter()
            .map(|&q| u0.eval(0.0, q, 0.0).map_err(Into::into))
            .collect();
    }
    let (vmin, vmax) = hc.slopes;
    let samples = 4096;
    if qs.is_empty() {
        return Ok(Vec::new());
    }
    // linear H: a single admissible velocity
    if vmax - vmin <= 1e-12 * (1.0 + vmax.abs()) {
        let l = hc.legendre(vmin)?;
        return qs
            .iter()
            .map(|&q| Ok(u0.eval(0.0, q - t * vmin, 0.0)? + t * l))
            .collect();
    }
    // one lattice of initial values serves every q
    let dq0 = t * (vmax - vmin) / samples as f64;
    let qlo = qs.iter().copied().fold(f64::INFINITY, f64::min);
    let qhi = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let base = qlo - t * vmax - dq0;
    let len = ((qhi - t * vmin - base) / dq0).ceil() as usize + 2;
    let lattice: Vec<f64> = if len <= 64 * samples {
        (0..=len)
            .map(|m| u0.eval(0.0, base + dq0 * m as f64, 0.0))
            .collect::<std::result::Result<_, _>>()?
    } else {
        Vec::new()
    };
    let initial = |m: usize| -> Result<f64> {
        match lattice.get(m) {
            Some(&u) => Ok(u),
            None => Ok(u0.eval(0.0, base + dq0 * m as f64, 0.0)?),
        }
    };
    qs.par_iter()
        .map(|&q| {
            let exact = |q0: f64| -> Result<f64> {
                let v = ((q - q0) / t).clamp(vmin, vmax);
                Ok(u0.eval(0.0, q0, 0.0)? + t * hc.legendre(v)?)
            };
            let first = ((q - t * vmax - base) / dq0).ceil().max(1.0) as usize;
            let last = (((q - t * vmin - base) / dq0).floor() as usize).min(len - 1);
            let mut best = (first, f64::INFINITY);
            for m in first..=last {
                let q0 = base + dq0 * m as f64;
                let val = initial(m)? + t * hc.legendre_table((q - q0) / t);
                if val < best.1 {
                    best = (m, val);
                }
            }
            let m = best.0;
            let x = [base + dq0 * (m - 1) as f64, base + dq0 * m as f64, base + dq0 * (m + 1) as f64];
            let y = [exact(x[0])?, exact(x[1])?, exact(x[2])?];
            let curv = y[0] - 2.0 * y[1] + y[2];
            let mut out = y[0].min(y[1]).min(y[2]);
            if curv > 0.0 {
                let xs = x[1] + 0.5 * dq0 * (y[0] - y[2]) / curv;
                if xs > x[0] && xs < x[2] {
                    out = out.min(exact(xs)?);
                }
            }
            Ok(out)
        })
        .collect()
}

/// Lax–Oleinik values on a grid, as a viscosity-provenance [`GridSolution`].
pub fn lax_oleinik_grid(
    hc: &ConvexHamiltonian,
    u0: &Expression,
    times: &[f64],
    qs: &[f64],
    period: Option<f64>,
) -> Result<GridSolution> {
    let mut values = Vec::with_capacity(times.len() * qs.len());
    for &t in times {
        values.extend(lax_oleinik(hc, u0, t, qs)?);
    }
    Ok(GridSolution {
        times: times.to_vec(),
        qs: qs.to_vec(),
        branch_ids: vec![-1; values.len()],
        values,
        provenance: Provenance::Viscosity,
        period,
        fiber_counts: None,
    })
}

/// Explicit monotone Lax–Friedrichs scheme on uniform nodes `qs`, reporting
/// the solution at the sorted output `times`. The artificial viscosity is
/// 1.05 × the largest sampled `|H_p|`.
pub fn lax_friedrichs(spec: &ProblemSpec, times: &[f64], qs: &[f64], cfl: f64) -> Result<GridSolution> {
    if !(cfl > 0.0) || cfl > 0.9 {
        return Err(ViscosityError::CflViolation(cfl));
    }
    let n = qs.len();
    if n < 3 {
        return Err(ViscosityError::Invalid("need at least 3 nodes".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| t < 0.0) {
        return Err(ViscosityError::Invalid("output times must be sorted and non-negative".into()));
    }
    let dq = (qs[n - 1] - qs[0]) / (n - 1) as f64;
    let periodic = matches!(spec.domain, Domain::Periodic { .. });
    if let Domain::Periodic { period, .. } = spec.domain {
        if ((dq * n as f64) - period).abs() > 1e-9 * period {
            return Err(ViscosityError::Invalid(
                "periodic nodes must tile one period".into(),
            ));
        }
    }
    let h = &spec.hamiltonian;
    let mut u: Vec<f64> = qs
        .iter()
        .map(|&q| spec.initial.eval(0.0, q, 0.0))
        .collect::<std::result::Result<_, _>>()?;

    let slopes: Vec<f64> = qs
        .iter()
        .map(|&q| spec.initial.eval_d(0.0, q, 0.0, Var::Q).map(|x| x.1))
        .collect::<std::result::Result<_, _>>()?;
    let (smin, smax) = slopes
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &s| (a.min(s), b.max(s)));
    let pad = 0.1 * (smax - smin) + 1e-3;
    let t_end = times.last().copied().unwrap_or(0.0);
    let mut theta: f64 = 0.0;
    for it in 0..5 {
        let t = t_end * it as f64 / 4.0;
        for &q in qs.iter().step_by((n / 64).max(1)) {
            for ip in 0..33 {
                let p = smin - pad + (smax - smin + 2.0 * pad) * ip as f64 / 32.0;
                theta = theta.max(h.eval_d(t, q, p, Var::P)?.1.abs());
            }
        }
    }
    theta *= 1.05;
    let dt_max = if theta > 0.0 { cfl * dq / theta } else { f64::INFINITY };

    let mut values = Vec::with_capacity(times.len() * n);
    let mut t = 0.0;
    let mut next = vec![0.0; n];
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let steps = if dt_max.is_finite() {
                (span / dt_max - 1e-9).ceil().max(1.0) as usize
            } else {
                1
            };
            let dt = span / steps as f64;
            for _ in 0..steps {
                for j in 0..n {
                    let (l, r) = if periodic {
                        (u[(j + n - 1) % n], u[(j + 1) % n])
                    } else {
                        let l = if j == 0 { 2.0 * u[0] - u[1] } else { u[j - 1] };
                        let r = if j == n - 1 { 2.0 * u[n - 1] - u[n - 2] } else { u[j + 1] };
                        (l, r)
                    };
                    let slope = (r - l) / (2.0 * dq);
                    let hv = h.eval(t, qs[j], slope)?;
                    next[j] = u[j] - dt * (hv - theta * (r - 2.0 * u[j] + l) / (2.0 * dq));
                    if !next[j].is_finite() {
                        return Err(ViscosityError::NonFinite { t: t + dt, q: qs[j] });
                    }
                }
                std::mem::swap(&mut u, &mut next);
                t += dt;
            }
            t = target;
        }
        values.extend_from_slice(&u);
    }
    Ok(GridSolution {
        times: times.to_vec(),
        qs: qs.to_vec(),
        branch_ids: vec![-1; values.len()],
        values,
        provenance: Provenance::Viscosity,
        period: spec.domain.period(),
        fiber_counts: None,
    })
}
