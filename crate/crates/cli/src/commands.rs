//! The subcommands. Each writes its artifacts under the output directory
//! and returns the human summary printed on stdout.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use minimax_core::characteristics::{evolve, refine_seeds, write_strands_csv, Domain, ProblemSpec};
use minimax_core::expr::{Expression, Var};
use minimax_core::front::front_json;
use minimax_core::grid::GridSolution;
use minimax_core::render::front_svg;
use minimax_core::selector::{decompose, front_slice, grid_slices, minimax_grid, Slice};
use minimax_core::singular::{classify, forbidden_report, singular_set, EventKind, ForbiddenReport, SingularEvent};
use minimax_core::viscosity::{concave_flip, lax_friedrichs, lax_oleinik_grid, ConvexHamiltonian};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::failure::{Failure, Outcome};

fn out_dir(c: &RunConfig) -> Outcome<&Path> {
    fs::create_dir_all(&c.output.dir)?;
    Ok(&c.output.dir)
}

fn write_file(path: &Path, body: &[u8]) -> Outcome<()> {
    fs::write(path, body).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &impl Serialize) -> Outcome<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

fn write_grid(path: &Path, g: &GridSolution) -> Outcome<()> {
    let file = fs::File::create(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    g.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Time as it appears in file names.
fn stamp(t: f64) -> String {
    format!("t{t}")
}

fn check_time(spec: &ProblemSpec, t: f64) -> Outcome<()> {
    if (0.0..=spec.t_max).contains(&t) {
        Ok(())
    } else {
        Err(Failure::Config(format!("--time {t} outside [0, {}]", spec.t_max)))
    }
}

fn slice_at(c: &RunConfig, spec: &ProblemSpec, t: f64) -> Outcome<Slice> {
    Ok(front_slice(spec, t, None, c.solver.slice_eps, &c.grid_options())?)
}

fn svg_of(s: &Slice) -> Outcome<String> {
    let d = decompose(&s.front, &s.analysis)?;
    Ok(front_svg(&s.front, &s.analysis, Some(&d.minimax)))
}

/// Problem and grid echoed into every manifest; worker counts stay out so
/// outputs do not depend on them.
fn manifest(c: &RunConfig, command: &str, files: &[String]) -> serde_json::Value {
    json!({
        "command": command,
        "problem": c.problem,
        "grid": c.grid,
        "solver": c.solver,
        "seed": c.run.seed,
        "files": files,
    })
}

pub fn solve(c: &RunConfig) -> Outcome<String> {
    let spec = c.spec()?;
    let dir = out_dir(c)?;
    let (times, qs) = (c.times(&spec), c.nodes(&spec));
    let run = minimax_grid(&spec, &times, &qs, &c.grid_options())?;
    let mut files = vec!["solution.csv".to_string(), "slices.json".to_string()];
    write_grid(&dir.join("solution.csv"), &run.solution)?;
    write_json(&dir.join("slices.json"), &run.slices)?;
    if c.output.fronts {
        fs::create_dir_all(dir.join("fronts"))?;
        for (k, s) in grid_slices(&spec, &times, &c.grid_options())?.iter().enumerate() {
            let name = format!("fronts/front_{k:05}.json");
            write_json(&dir.join(&name), &front_json(&s.front, &s.analysis))?;
            files.push(name);
        }
    }
    for &t in &c.output.svg_times {
        let name = format!("front_{}.svg", stamp(t));
        write_file(&dir.join(&name), svg_of(&slice_at(c, &spec, t)?)?.as_bytes())?;
        files.push(name);
    }
    write_json(&dir.join("run.json"), &manifest(c, "solve", &files))?;
    let degenerate = run.slices.iter().filter(|s| s.degenerate).count();
    let deep = run.slices.iter().filter(|s| s.refine_depth_exceeded).count();
    Ok(format!(
        "solution.csv: {} x {} grid, {degenerate} shifted slices, {deep} slices at the refinement limit\n",
        times.len(),
        qs.len()
    ))
}

/// Range of `u0'` over the domain.
fn slope_range(spec: &ProblemSpec, u0: &Expression) -> Outcome<(f64, f64)> {
    let (a, b) = match spec.domain {
        Domain::Periodic { start, period } => (start, start + period),
        Domain::Windowed { qmin, qmax } => (qmin, qmax),
    };
    let mut r = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=4096 {
        let s = u0.eval_d(0.0, a + (b - a) * k as f64 / 4096.0, 0.0, Var::Q)?.1;
        r = (r.0.min(s), r.1.max(s));
    }
    Ok(r)
}

fn convex_in(c: &RunConfig, spec: &ProblemSpec, h: &Expression, u0: &Expression) -> Outcome<Option<ConvexHamiltonian>> {
    if h.depends_on(Var::T) || h.depends_on(Var::Q) {
        return Ok(None);
    }
    let window = match c.solver.p_window {
        Some([a, b]) => (a, b),
        None => {
            let (a, b) = slope_range(spec, u0)?;
            let pad = 0.5 * (b - a) + 0.5;
            (a - pad, b + pad)
        }
    };
    Ok(ConvexHamiltonian::new(h.clone(), window).ok())
}

/// Lax–Oleinik on the grid when `H` is convex in `p`, or through the sign
/// flip when it is concave.
fn lax_oleinik_if_possible(c: &RunConfig, spec: &ProblemSpec, times: &[f64], qs: &[f64]) -> Outcome<Option<(GridSolution, &'static str)>> {
    let period = spec.domain.period();
    if let Some(hc) = convex_in(c, spec, &spec.hamiltonian, &spec.initial)? {
        return Ok(Some((lax_oleinik_grid(&hc, &spec.initial, times, qs, period)?, "convex")));
    }
    let (h, v0) = concave_flip(&spec.hamiltonian, &spec.initial);
    if let Some(hc) = convex_in(c, spec, &h, &v0)? {
        let mut g = lax_oleinik_grid(&hc, &v0, times, qs, period)?;
        g.values.iter_mut().for_each(|v| *v = -*v);
        return Ok(Some((g, "concave")));
    }
    Ok(None)
}

#[derive(Debug, Clone, Serialize)]
struct Difference {
    pair: String,
    linf: f64,
    l1: f64,
    tolerance: Option<f64>,
    verdict: &'static str,
}

/// `L∞` and cell-weighted `L¹` over the whole grid.
fn difference(a: &GridSolution, b: &GridSolution, dt: f64, dq: f64) -> (f64, f64) {
    let mut linf = 0.0f64;
    let mut l1 = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        let d = (x - y).abs();
        linf = linf.max(d);
        l1 += d;
    }
    (linf, l1 * dt * dq)
}

pub fn compare(c: &RunConfig) -> Outcome<String> {
    let spec = c.spec()?;
    let dir = out_dir(c)?;
    let (times, qs) = (c.times(&spec), c.nodes(&spec));
    let minimax = minimax_grid(&spec, &times, &qs, &c.grid_options())?.solution;
    let friedrichs = lax_friedrichs(&spec, &times, &qs, c.solver.cfl)?;
    let oleinik = lax_oleinik_if_possible(c, &spec, &times, &qs)?;
    let dq = qs[1] - qs[0];
    let dt = times[1] - times[0];
    let tol = 10.0 * dq;

    let mut rows = Vec::new();
    let mut push = |pair: &str, a: &GridSolution, b: &GridSolution, judged: bool| {
        let (linf, l1) = difference(a, b, dt, dq);
        let verdict = match (judged, linf <= tol) {
            (false, _) => "REPORT",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        rows.push(Difference {
            pair: pair.into(),
            linf,
            l1,
            tolerance: judged.then_some(tol),
            verdict,
        });
    };
    let convexity = match &oleinik {
        Some((lo, kind)) => {
            push("minimax-lax_oleinik", &minimax, lo, true);
            push("minimax-lax_friedrichs", &minimax, &friedrichs, false);
            push("lax_oleinik-lax_friedrichs", lo, &friedrichs, false);
            *kind
        }
        None => {
            push("minimax-lax_friedrichs", &minimax, &friedrichs, false);
            "neither"
        }
    };

    let mut table = format!("# H = {}, u0 = {}, grid {}x{}, h = {:.16e}, H in p: {convexity}\n", spec.hamiltonian.source(), spec.initial.source(), times.len(), qs.len(), dq);
    let _ = writeln!(table, "{:<28} {:<24} {:<24} {:<24} verdict", "pair", "linf", "l1", "tolerance");
    for r in &rows {
        let tol = r.tolerance.map_or("-".to_string(), |t| format!("{t:.16e}"));
        let _ = writeln!(table, "{:<28} {:<24} {:<24} {:<24} {}", r.pair, format!("{:.16e}", r.linf), format!("{:.16e}", r.l1), tol, r.verdict);
    }
    write_file(&dir.join("compare.txt"), table.as_bytes())?;
    write_json(&dir.join("compare.json"), &json!({ "h": dq, "convexity": convexity, "rows": rows }))?;
    write_grid(&dir.join("minimax.csv"), &minimax)?;
    write_grid(&dir.join("lax_friedrichs.csv"), &friedrichs)?;
    let mut files: Vec<String> = ["compare.txt", "compare.json", "minimax.csv", "lax_friedrichs.csv"].map(String::from).to_vec();
    if let Some((lo, _)) = &oleinik {
        write_grid(&dir.join("lax_oleinik.csv"), lo)?;
        files.push("lax_oleinik.csv".into());
    }
    write_json(&dir.join("run.json"), &manifest(c, "compare", &files))?;
    if let Some(r) = rows.iter().find(|r| r.verdict == "FAIL") {
        return Err(Failure::Check(format!("{}: L∞ {:.3e} exceeds {:.3e}\n{table}", r.pair, r.linf, tol)));
    }
    Ok(table)
}

fn grid_for_classify(c: &RunConfig) -> Outcome<(GridSolution, String)> {
    match &c.classify.grid_csv {
        Some(path) => {
            let period = match &c.classify.period {
                Some(p) => Some(p.resolve("classify.period")?),
                None if c.problem.is_some() => c.spec()?.domain.period(),
                None => None,
            };
            let file = fs::File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let g = GridSolution::read_csv(BufReader::new(file), period)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            Ok((g, path.display().to_string()))
        }
        None => {
            let spec = c.spec()?;
            let g = minimax_grid(&spec, &c.times(&spec), &c.nodes(&spec), &c.grid_options())?.solution;
            Ok((g, "minimax".into()))
        }
    }
}

fn summary(source: &str, events: &[SingularEvent], r: &ForbiddenReport) -> String {
    let count = |k: EventKind| events.iter().filter(|e| e.kind == k).count();
    let mut s = format!(
        "{source}: {} shock, {} birth, {} merge, {} forbidden (a), {} forbidden (b), {} unclassified\n",
        count(EventKind::Shock),
        count(EventKind::ShockBirth),
        count(EventKind::ShockMerge),
        r.forbidden_a,
        r.forbidden_b,
        r.unclassified
    );
    for e in events {
        let _ = writeln!(s, "{:?} at t = {:.16e}, q = {:.16e}", e.kind, e.t, e.q);
    }
    s
}

pub fn classify_cmd(c: &RunConfig) -> Outcome<String> {
    let (g, source) = grid_for_classify(c)?;
    let dir = out_dir(c)?;
    let events = classify(&g, &singular_set(&g));
    let report = forbidden_report(&events);
    let text = summary(if c.classify.grid_csv.is_some() { "grid file" } else { "minimax" }, &events, &report);
    write_json(&dir.join("events.json"), &json!({ "events": events, "report": report }))?;
    write_file(&dir.join("summary.txt"), text.as_bytes())?;
    let files = ["events.json", "summary.txt"].map(String::from);
    write_json(&dir.join("run.json"), &manifest(c, "classify", &files))?;
    if !report.clean() {
        return Err(Failure::Check(format!("forbidden singularities in {source}\n{text}")));
    }
    Ok(text)
}

pub fn dump_front(c: &RunConfig, t: f64) -> Outcome<String> {
    let spec = c.spec()?;
    check_time(&spec, t)?;
    let dir = out_dir(c)?;
    let step = c.solver.step.unwrap_or_else(|| spec.default_step());
    let base = evolve(&spec, t, &spec.base_seeds(c.solver.seeds), step)?;
    let refined = refine_seeds(&spec, t, &base, c.solver.geometric_tol, step)?;
    let strands = PathBuf::from(format!("strands_{}.csv", stamp(t)));
    let mut buf = Vec::new();
    write_strands_csv(&mut buf, &spec.domain, &refined.strands)?;
    write_file(&dir.join(&strands), &buf)?;

    let s = front_slice(&spec, t, Some(&base), c.solver.slice_eps, &c.grid_options())?;
    let d = decompose(&s.front, &s.analysis)?;
    let mut v = front_json(&s.front, &s.analysis);
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("slice".into(), serde_json::to_value(&s.info)?);
        m.insert("minimax".into(), serde_json::to_value(&d.minimax)?);
    }
    let name = format!("front_{}.json", stamp(t));
    write_json(&dir.join(&name), &v)?;
    Ok(format!(
        "{name}: {} vertices, {} cusps, {} double points, {} triangles; {}: {} strands\n",
        s.front.len(),
        s.analysis.cusps.len(),
        s.analysis.double_points.len(),
        s.analysis.triangles.len(),
        strands.display(),
        refined.strands.len()
    ))
}

pub fn render(c: &RunConfig, t: f64) -> Outcome<String> {
    let spec = c.spec()?;
    check_time(&spec, t)?;
    let dir = out_dir(c)?;
    let name = format!("front_{}.svg", stamp(t));
    write_file(&dir.join(&name), svg_of(&slice_at(c, &spec, t)?)?.as_bytes())?;
    Ok(format!("{name}\n"))
}
