//! Run configuration: a TOML file with `[problem]`, `[grid]`, `[solver]`,
//! `[output]`, `[run]` and `[classify]` tables.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use minimax_core::characteristics::{Domain, ProblemSpec};
use minimax_core::expr::Expression;
use minimax_core::grid::{linspace, periodic_nodes};
use minimax_core::selector::GridOptions;
use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Outcome};

/// A number written either as a TOML float or as a constant expression
/// such as `"2*pi"`.
#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Expr(String),
}

impl Number {
    pub fn resolve(&self, what: &str) -> Outcome<f64> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Expr(s) => {
                let e = Expression::parse(s).map_err(|e| Failure::Config(format!("{what}: {e}")))?;
                if !e.variables().is_empty() {
                    return Err(Failure::Config(format!("{what}: {s:?} is not a constant")));
                }
                e.eval(0.0, 0.0, 0.0).map_err(|e| Failure::Config(format!("{what}: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSection {
    Periodic {
        #[serde(default = "default_start")]
        start: Number,
        #[serde(default = "default_period")]
        period: Number,
    },
    Windowed {
        qmin: Number,
        qmax: Number,
    },
}

fn default_start() -> Number {
    Number::Value(-PI)
}

fn default_period() -> Number {
    Number::Value(2.0 * PI)
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection::Periodic {
            start: default_start(),
            period: default_period(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(rename = "H")]
    pub h: String,
    pub u0: String,
    pub t_max: f64,
    #[serde(default)]
    pub domain: DomainSection,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nt: usize,
    pub nq: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { nt: 128, nq: 256 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub seeds: usize,
    /// RK4 step; `t_max / 2000` when absent.
    pub step: Option<f64>,
    pub geometric_tol: f64,
    /// Time shift tried when a slice lands on a perestroika.
    pub slice_eps: f64,
    pub cfl: f64,
    /// `p`-window of the Legendre transform; from the slopes of `u0` when absent.
    pub p_window: Option<[f64; 2]>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            seeds: 1024,
            step: None,
            geometric_tol: 0.05,
            slice_eps: 1e-3,
            cfl: 0.9,
            p_window: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// One front JSON per grid time.
    pub fronts: bool,
    /// Times of SVG snapshots written by `solve`.
    pub svg_times: Vec<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            fronts: false,
            svg_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    /// Classify this grid file instead of solving.
    pub grid_csv: Option<PathBuf>,
    /// Period of the file's `q` axis; the problem's when absent.
    pub period: Option<Number>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<ProblemSection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub classify: ClassifySection,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub grid: Option<(usize, usize)>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Outcome<RunConfig> {
        toml::from_str(text).map_err(|e| Failure::Config(e.to_string()))
    }

    /// Reads `path`, applies overrides, resolves relative paths against the
    /// file's directory and validates.
    pub fn load(path: &Path, ov: &Overrides) -> Outcome<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let mut c = RunConfig::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.output.dir = base.join(&c.output.dir);
        if let Some(g) = &c.classify.grid_csv {
            c.classify.grid_csv = Some(base.join(g));
        }
        c.apply(ov);
        c.validate()?;
        Ok(c)
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(o) = &ov.out {
            self.output.dir = o.clone();
        }
        if let Some((nt, nq)) = ov.grid {
            self.grid = GridSection { nt, nq };
        }
        if let Some(s) = ov.seed {
            self.run.seed = s;
        }
        if let Some(w) = ov.workers {
            self.run.workers = w;
        }
    }

    pub fn validate(&self) -> Outcome<()> {
        let bad = |m: String| Err(Failure::Config(m));
        if self.grid.nt < 16 || self.grid.nq < 16 {
            return bad(format!("grid needs nt, nq >= 16, got {}x{}", self.grid.nt, self.grid.nq));
        }
        let s = &self.solver;
        if s.seeds < 16 {
            return bad(format!("solver.seeds must be at least 16, got {}", s.seeds));
        }
        if !(s.geometric_tol > 0.0) || !(s.slice_eps > 0.0) {
            return bad("solver.geometric_tol and solver.slice_eps must be positive".into());
        }
        if let Some(h) = s.step {
            if !(h > 0.0) {
                return bad(format!("solver.step must be positive, got {h}"));
            }
        }
        if !(s.cfl > 0.0 && s.cfl <= 0.9) {
            return bad(format!("solver.cfl must lie in (0, 0.9], got {}", s.cfl));
        }
        if let Some([a, b]) = s.p_window {
            if !(a < b) {
                return bad(format!("solver.p_window needs a < b, got [{a}, {b}]"));
            }
        }
        if let Some(p) = &self.problem {
            let spec = self.spec()?;
            if let Some(&t) = self.output.svg_times.iter().find(|&&t| !(0.0..=p.t_max).contains(&t)) {
                return bad(format!("svg time {t} outside [0, {}]", spec.t_max));
            }
        }
        if let Some(p) = &self.classify.period {
            p.resolve("classify.period")?;
        }
        Ok(())
    }

    pub fn problem(&self) -> Outcome<&ProblemSection> {
        self.problem
            .as_ref()
            .ok_or_else(|| Failure::Config("this command needs a [problem] table".into()))
    }

    pub fn spec(&self) -> Outcome<ProblemSpec> {
        let p = self.problem()?;
        if !(p.t_max > 0.0) || !p.t_max.is_finite() {
            return Err(Failure::Config(format!("problem.t_max must be positive, got {}", p.t_max)));
        }
        let parse = |what: &str, s: &str| Expression::parse(s).map_err(|e| Failure::Config(format!("problem.{what}: {e}")));
        let domain = match &p.domain {
            DomainSection::Periodic { start, period } => Domain::Periodic {
                start: start.resolve("domain.start")?,
                period: period.resolve("domain.period")?,
            },
            DomainSection::Windowed { qmin, qmax } => Domain::Windowed {
                qmin: qmin.resolve("domain.qmin")?,
                qmax: qmax.resolve("domain.qmax")?,
            },
        };
        Ok(ProblemSpec::new(parse("H", &p.h)?, parse("u0", &p.u0)?, domain, p.t_max)?)
    }

    pub fn grid_options(&self) -> GridOptions {
        GridOptions {
            seeds: self.solver.seeds,
            step: self.solver.step,
            geometric_tol: self.solver.geometric_tol,
        }
    }

    pub fn times(&self, spec: &ProblemSpec) -> Vec<f64> {
        linspace(0.0, spec.t_max, self.grid.nt)
    }

    pub fn nodes(&self, spec: &ProblemSpec) -> Vec<f64> {
        match spec.domain {
            Domain::Periodic { start, period } => periodic_nodes(start, period, self.grid.nq),
            Domain::Windowed { qmin, qmax } => linspace(qmin, qmax, self.grid.nq),
        }
    }
}

/// `NTxNQ`, as given to `--grid`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NTxNQ, got {s:?}"))?;
    let n = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((n(a)?, n(b)?))
}
