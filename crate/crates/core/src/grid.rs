//! Solutions sampled on a rectangular `(t, q)` grid, and their CSV form.

use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("inconsistent grid: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Minimax,
    Viscosity,
}

/// Row-major `times.len() × qs.len()` samples. `branch_ids` are the selected
/// front section on each slice for minimax grids and `-1` for viscosity grids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSolution {
    pub times: Vec<f64>,
    pub qs: Vec<f64>,
    pub values: Vec<f64>,
    pub branch_ids: Vec<i64>,
    pub provenance: Provenance,
    /// Fundamental period when `q` is periodic; the last column then
    /// neighbours the first.
    pub period: Option<f64>,
    /// Number of front points over each node, when known.
    #[serde(skip)]
    pub fiber_counts: Option<Vec<u32>>,
}

impl GridSolution {
    pub fn nt(&self) -> usize {
        self.times.len()
    }

    pub fn nq(&self) -> usize {
        self.qs.len()
    }

    pub fn at(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.nq() + j]
    }

    pub fn branch(&self, k: usize, j: usize) -> i64 {
        self.branch_ids[k * self.nq() + j]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.nq()..(k + 1) * self.nq()]
    }

    pub fn has_branches(&self) -> bool {
        self.branch_ids.iter().any(|&b| b >= 0)
    }

    /// `t,q,u,branch_id` rows in `t`-major order.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,q,u,branch_id")?;
        for (k, t) in self.times.iter().enumerate() {
            for (j, q) in self.qs.iter().enumerate() {
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{}",
                    t,
                    q,
                    self.at(k, j),
                    self.branch(k, j)
                )?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, period: Option<f64>) -> Result<GridSolution, GridError> {
        let mut times: Vec<f64> = Vec::new();
        let mut qs: Vec<f64> = Vec::new();
        let mut values = Vec::new();
        let mut branch_ids = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if i == 0 {
                if line != "t,q,u,branch_id" {
                    return Err(GridError::Parse {
                        line: 1,
                        msg: format!("unexpected header {line:?}"),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| GridError::Parse { line: i + 1, msg };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad(format!("expected 4 columns, found {}", cols.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            let (t, q, u) = (num(cols[0])?, num(cols[1])?, num(cols[2])?);
            let b: i64 = cols[3].trim().parse().map_err(|e| bad(format!("{:?}: {e}", cols[3])))?;
            if times.last() != Some(&t) {
                times.push(t);
            }
            if times.len() == 1 {
                qs.push(q);
            } else {
                let j = (values.len()) % qs.len().max(1);
                if qs.get(j) != Some(&q) {
                    return Err(bad(format!("q = {q} breaks the grid layout")));
                }
            }
            values.push(u);
            branch_ids.push(b);
        }
        if times.is_empty() || values.len() != times.len() * qs.len() {
            return Err(GridError::Shape(format!(
                "{} values for {} times and {} nodes",
                values.len(),
                times.len(),
                qs.len()
            )));
        }
        let provenance = if branch_ids.iter().any(|&b| b >= 0) {
            Provenance::Minimax
        } else {
            Provenance::Viscosity
        };
        Ok(GridSolution {
            times,
            qs,
            values,
            branch_ids,
            provenance,
            period,
            fiber_counts: None,
        })
    }
}

/// `n` points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` points covering one period starting at `start`, endpoint excluded.
pub fn periodic_nodes(start: f64, period: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start + period * k as f64 / n as f64).collect()
}
