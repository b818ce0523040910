//! Characteristic strands of `∂ₜu + H(t, q, ∂_q u) = 0`.
//!
//! Each strand starts on the initial 1-jet `(q0, u0'(q0), u0(q0))` and follows
//! `q' = H_p`, `p' = -H_q`, `z' = p·H_p - H` with fixed-step RK4. The isochrone
//! `{(q, z, p)}` over all seeds is the multivalued solution at that time.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{ExprError, Expression, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("strand seeded at q0 = {q0} diverged at t = {t}: {reason}")]
    NonFinite { q0: f64, t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, CharError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// `q` lives on the circle `[start, start + period)`.
    Periodic { start: f64, period: f64 },
    /// `u0` is constant and `H` does not depend on `p` outside `[qmin, qmax]`.
    Windowed { qmin: f64, qmax: f64 },
}

impl Domain {
    pub fn period(&self) -> Option<f64> {
        match *self {
            Domain::Periodic { period, .. } => Some(period),
            Domain::Windowed { .. } => None,
        }
    }

    /// Maps `q` into the fundamental interval (identity on windowed domains).
    pub fn wrap(&self, q: f64) -> f64 {
        match *self {
            Domain::Periodic { start, period } => start + (q - start).rem_euclid(period),
            Domain::Windowed { .. } => q,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSpec {
    pub hamiltonian: Expression,
    pub initial: Expression,
    pub domain: Domain,
    pub t_max: f64,
}

impl ProblemSpec {
    pub fn new(
        hamiltonian: Expression,
        initial: Expression,
        domain: Domain,
        t_max: f64,
    ) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(CharError::InvalidProblem(format!(
                "t_max must be positive, got {t_max}"
            )));
        }
        match domain {
            Domain::Periodic { start, period } => {
                if !(period > 0.0) || !period.is_finite() || !start.is_finite() {
                    return Err(CharError::InvalidProblem(format!(
                        "period must be positive, got {period}"
                    )));
                }
            }
            Domain::Windowed { qmin, qmax } => {
                if !(qmin < qmax) || !qmin.is_finite() || !qmax.is_finite() {
                    return Err(CharError::InvalidProblem(format!(
                        "window needs qmin < qmax, got [{qmin}, {qmax}]"
                    )));
                }
            }
        }
        if initial.depends_on(Var::T) || initial.depends_on(Var::P) {
            return Err(CharError::InvalidProblem(
                "the initial condition may only depend on q".into(),
            ));
        }
        Ok(ProblemSpec {
            hamiltonian,
            initial,
            domain,
            t_max,
        })
    }

    /// Default RK4 step, `t_max / 2000`.
    pub fn default_step(&self) -> f64 {
        self.t_max / 2000.0
    }

    /// `n` seeds: uniform over one period, or over the window padded by a
    /// quarter of its width on each side so the front ends are graphs.
    pub fn base_seeds(&self, n: usize) -> Vec<f64> {
        match self.domain {
            Domain::Periodic { start, period } => {
                (0..n).map(|k| start + period * k as f64 / n as f64).collect()
            }
            Domain::Windowed { qmin, qmax } => {
                let pad = 0.25 * (qmax - qmin);
                let (a, b) = (qmin - pad, qmax + pad);
                (0..n)
                    .map(|k| a + (b - a) * k as f64 / (n - 1).max(1) as f64)
                    .collect()
            }
        }
    }

    fn frozen(&self, q0: f64) -> bool {
        matches!(self.domain, Domain::Windowed { qmin, qmax } if q0 < qmin || q0 > qmax)
    }

    /// The point of the initial submanifold above `q0`.
    pub fn initial_state(&self, q0: f64) -> Result<StrandState> {
        let (z, p) = self.initial.eval_d(0.0, q0, 0.0, Var::Q)?;
        Ok(StrandState {
            t: 0.0,
            q: q0,
            p,
            z,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrandState {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    /// Front height.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharStrand {
    pub q0: f64,
    pub states: Vec<StrandState>,
}

impl CharStrand {
    pub fn last(&self) -> &StrandState {
        self.states.last().expect("strand has at least one state")
    }
}

/// `(dq/dt, dp/dt, dz/dt)` for the characteristic system of `H`.
pub fn char_rhs(h: &Expression, t: f64, q: f64, p: f64) -> std::result::Result<(f64, f64, f64), ExprError> {
    let (hv, hq, hp) = h.eval_grad_qp(t, q, p)?;
    Ok((hp, -hq, p * hp - hv))
}

fn rk4_step(h: &Expression, s: StrandState, dt: f64) -> std::result::Result<StrandState, ExprError> {
    let f = |t: f64, q: f64, p: f64| char_rhs(h, t, q, p);
    let (t, q, p) = (s.t, s.q, s.p);
    let k1 = f(t, q, p)?;
    let k2 = f(t + 0.5 * dt, q + 0.5 * dt * k1.0, p + 0.5 * dt * k1.1)?;
    let k3 = f(t + 0.5 * dt, q + 0.5 * dt * k2.0, p + 0.5 * dt * k2.1)?;
    let k4 = f(t + dt, q + dt * k3.0, p + dt * k3.1)?;
    let w = dt / 6.0;
    Ok(StrandState {
        t: t + dt,
        q: q + w * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        p: p + w * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        z: s.z + w * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
    })
}

fn integrate_seed(spec: &ProblemSpec, q0: f64, times: &[f64], step: f64) -> Result<CharStrand> {
    let mut state = spec.initial_state(q0)?;
    let mut states = Vec::with_capacity(times.len());
    let frozen = spec.frozen(q0);
    for &target in times {
        let span = target - state.t;
        if frozen {
            state.t = target;
        } else if span > 0.0 {
            let n = (span / step - 1e-9).ceil().max(1.0) as usize;
            let dt = span / n as f64;
            for _ in 0..n {
                state = rk4_step(&spec.hamiltonian, state, dt).map_err(|e| CharError::NonFinite {
                    q0,
                    t: state.t,
                    reason: e.to_string(),
                })?;
            }
            state.t = target;
        }
        if !(state.q.is_finite() && state.p.is_finite() && state.z.is_finite()) {
            return Err(CharError::NonFinite {
                q0,
                t: target,
                reason: "state left the finite range".into(),
            });
        }
        states.push(state);
    }
    Ok(CharStrand { q0, states })
}

/// Integrates every seed from 0 to `t`.
pub fn evolve(spec: &ProblemSpec, t: f64, seeds: &[f64], step: f64) -> Result<Vec<CharStrand>> {
    evolve_to(spec, &[t], seeds, step)
}

/// Largest defect `|dz/dq0 − p dq/dq0|` of the Liouville form over `seeds`
/// at time `t`, by central differences of width `delta` in `q0`, relative to
/// `1 + |dz/dq0|`.
pub fn exactness_residual(spec: &ProblemSpec, t: f64, seeds: &[f64], delta: f64, step: f64) -> Result<f64> {
    let probes: Vec<f64> = seeds.iter().flat_map(|&s| [s - delta, s, s + delta]).collect();
    let strands = evolve(spec, t, &probes, step)?;
    Ok(strands
        .chunks(3)
        .map(|w| {
            let (a, m, b) = (w[0].last(), w[1].last(), w[2].last());
            let dz = (b.z - a.z) / (2.0 * delta);
            let dq = (b.q - a.q) / (2.0 * delta);
            (dz - m.p * dq).abs() / (1.0 + dz.abs())
        })
        .fold(0.0, f64::max))
}

/// Integrates every seed through the nondecreasing output `times`, storing
/// one state per time. Output order follows `seeds`.
pub fn evolve_to(
    spec: &ProblemSpec,
    times: &[f64],
    seeds: &[f64],
    step: f64,
) -> Result<Vec<CharStrand>> {
    if !(step > 0.0) {
        return Err(CharError::InvalidProblem(format!("step must be positive, got {step}")));
    }
    if times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(CharError::InvalidProblem(
            "output times must be finite, non-negative and sorted".into(),
        ));
    }
    seeds
        .par_iter()
        .map(|&q0| integrate_seed(spec, q0, times, step))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Refined {
    pub strands: Vec<CharStrand>,
    /// Set when the depth limit stopped refinement before it was quiescent.
    pub depth_exceeded: bool,
}

pub const MAX_REFINE_DEPTH: usize = 12;

/// Inserts midpoint seeds where neighbouring front points are more than
/// `geometric_tol` apart in `(q, z)`. Next to folds of the projection
/// `q0 -> q` the bound drops to `geometric_tol / 16`, and seeds closer than
/// `geometric_tol / 64` in `q0` are also required.
pub fn refine_seeds(
    spec: &ProblemSpec,
    t: f64,
    strands: &[CharStrand],
    geometric_tol: f64,
    step: f64,
) -> Result<Refined> {
    let mut list: Vec<CharStrand> = strands
        .iter()
        .map(|s| CharStrand {
            q0: s.q0,
            states: vec![*s.last()],
        })
        .collect();
    for _ in 0..MAX_REFINE_DEPTH {
        let mids = gaps_to_split(spec, &list, geometric_tol);
        if mids.is_empty() {
            return Ok(Refined {
                strands: list,
                depth_exceeded: false,
            });
        }
        let fresh = evolve(spec, t, &mids, step)?;
        list.extend(fresh);
        list.sort_by(|a, b| a.q0.total_cmp(&b.q0));
        list.dedup_by(|a, b| a.q0 == b.q0);
    }
    let depth_exceeded = !gaps_to_split(spec, &list, geometric_tol).is_empty();
    Ok(Refined {
        strands: list,
        depth_exceeded,
    })
}

fn gaps_to_split(spec: &ProblemSpec, list: &[CharStrand], tol: f64) -> Vec<f64> {
    let n = list.len();
    if n < 2 {
        return Vec::new();
    }
    let period = spec.domain.period();
    let cyclic = period.is_some();
    let gap_count = if cyclic { n } else { n - 1 };
    // (dq, dz, dq0) of gap k between strand k and k+1 (cyclically)
    let gap = |k: usize| -> (f64, f64, f64) {
        let a = list[k].last();
        if k + 1 < n {
            let b = list[k + 1].last();
            (b.q - a.q, b.z - a.z, list[k + 1].q0 - list[k].q0)
        } else {
            let p = period.unwrap();
            let b = list[0].last();
            (b.q + p - a.q, b.z - a.z, list[0].q0 + p - list[k].q0)
        }
    };
    let gaps: Vec<(f64, f64, f64)> = (0..gap_count).map(gap).collect();
    let dir = |k: isize| -> Option<bool> {
        let g = if cyclic {
            Some(gaps[k.rem_euclid(gap_count as isize) as usize])
        } else if k >= 0 && (k as usize) < gap_count {
            Some(gaps[k as usize])
        } else {
            None
        };
        g.map(|g| g.0 >= 0.0)
    };
    let mut mids = Vec::new();
    for k in 0..gap_count {
        let (dq, dz, dq0) = gaps[k];
        if dq0 <= 1e-14 * (1.0 + list[k].q0.abs()) {
            continue;
        }
        let chord = dq.hypot(dz);
        let ki = k as isize;
        let here = dir(ki);
        let near_fold = [dir(ki - 1), dir(ki + 1)]
            .iter()
            .any(|d| d.is_some() && *d != here);
        if chord > tol || (near_fold && (chord > tol / 16.0 || dq0 > tol / 64.0)) {
            let mut m = list[k].q0 + 0.5 * dq0;
            if let Domain::Periodic { start, period } = spec.domain {
                if m >= start + period {
                    m -= period;
                }
            }
            mids.push(m);
        }
    }
    mids
}

/// Writes `q0,t,q,p,z` rows; periodic `q` is wrapped into the fundamental interval.
pub fn write_strands_csv<W: Write>(out: &mut W, domain: &Domain, strands: &[CharStrand]) -> std::io::Result<()> {
    writeln!(out, "q0,t,q,p,z")?;
    for s in strands {
        for st in &s.states {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.q0,
                st.t,
                domain.wrap(st.q),
                st.p,
                st.z
            )?;
        }
    }
    Ok(())
}
