//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails. An optional argument restricts the run to the
//! criteria whose numbers it lists, e.g. `cargo test --test acceptance -- 2,3`.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use minimax_core::characteristics::{evolve, exactness_residual, ProblemSpec};
use minimax_core::expr::{Expression, Var};
use minimax_core::front::front_json;
use minimax_core::grid::{linspace, periodic_nodes, GridSolution};
use minimax_core::morse1d::{couple, critical_points, persistence, Tolerances};
use minimax_core::selector::{agreement, decompose, eliminate, grid_slices, minimax_grid, GridOptions, Slice};
use minimax_core::singular::{classify, forbidden_report, germ_fixture, singular_set, EventKind, Germ, SingularEvent};
use minimax_core::viscosity::{lax_friedrichs, lax_oleinik_grid, ConvexHamiltonian};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// L∞ distance between the Burgers minimax and Lax–Oleinik grids, measured
/// on the first full run; later runs must stay within ±20%.
const GOLDEN_BURGERS_LINF: f64 = 5.882e-5;

/// L∞ gap between minimax and Lax–Friedrichs on the nonconvex benchmark
/// after its first singular time, recorded on the first run and held to ±20%.
const GOLDEN_NONCONVEX_GAP: f64 = 3.4817e-2;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn burgers_nodes() -> (Vec<f64>, Vec<f64>) {
    (linspace(0.0, 3.0, 256), periodic_nodes(-PI, 2.0 * PI, 512))
}

fn linf(a: &GridSolution, b: &GridSolution, rows: impl Fn(usize) -> bool) -> f64 {
    let mut m = 0.0f64;
    for k in (0..a.nt()).filter(|&k| rows(k)) {
        for j in 0..a.nq() {
            m = m.max((a.at(k, j) - b.at(k, j)).abs());
        }
    }
    m
}

fn events_of(g: &GridSolution) -> Vec<SingularEvent> {
    classify(g, &singular_set(g))
}

struct Burgers {
    minimax: GridSolution,
    seconds: f64,
}

fn c1_free_point() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..500u64 {
        let f = common::random_fiber(seed);
        let pts = match critical_points(&f, 4096, Tolerances::default()) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let free = match couple(&pts) {
            Ok(d) => d.free,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let pers = persistence(&f, 20_000).unwrap();
        let xe = pers.xs[pers.essential];
        let nearest = pts
            .iter()
            .min_by(|a, b| (a.xi - xe).abs().total_cmp(&(b.xi - xe).abs()))
            .unwrap();
        if nearest.xi != free.xi {
            failures.push(format!("seed {seed}: free point {} but essential class at {xe}", free.xi));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        failures.is_empty() && secs < 10.0,
        format!("{} failures of 500, {secs:.2} s {:?}", failures.len(), failures.first()),
    )
}

fn c2_convex_equality(b: &Burgers) -> Outcome {
    let (times, qs) = burgers_nodes();
    let start = Instant::now();
    let hc = ConvexHamiltonian::new(Expression::parse("p^2/2").unwrap(), (-4.0, 4.0)).unwrap();
    let lo = lax_oleinik_grid(&hc, &Expression::parse("cos(q)").unwrap(), &times, &qs, Some(2.0 * PI)).unwrap();
    let secs = b.seconds + start.elapsed().as_secs_f64();
    let h = 2.0 * PI / 512.0;
    let d = linf(&b.minimax, &lo, |_| true);
    let pinned = (d - GOLDEN_BURGERS_LINF).abs() <= 0.2 * GOLDEN_BURGERS_LINF;
    check(
        d <= 10.0 * h && secs < 60.0 && pinned,
        format!("L∞ = {d:.3e} (bound {:.3e}, golden {GOLDEN_BURGERS_LINF:.3e}), {secs:.1} s", 10.0 * h),
    )
}

fn c3_birth(b: &Burgers) -> Outcome {
    let ev = events_of(&b.minimax);
    let births: Vec<&SingularEvent> = ev.iter().filter(|e| e.kind == EventKind::ShockBirth).collect();
    let dt = 3.0 / 255.0;
    let dq = 2.0 * PI / 512.0;
    let ok = births.len() == 1 && (births[0].t - 1.0).abs() <= 2.0 * dt && births[0].q.abs() <= 2.0 * dq;
    check(
        ok,
        format!(
            "{} births {:?}",
            births.len(),
            births.iter().map(|e| (e.t, e.q)).collect::<Vec<_>>()
        ),
    )
}

fn whitelist(name: &str, ev: &[SingularEvent]) -> Result<String, String> {
    let r = forbidden_report(ev);
    let kinds: Vec<EventKind> = ev.iter().map(|e| e.kind).collect();
    let ok = r.clean()
        && r.unclassified == 0
        && kinds
            .iter()
            .all(|k| matches!(k, EventKind::Shock | EventKind::ShockBirth | EventKind::ShockMerge));
    let count = |k: EventKind| kinds.iter().filter(|&&x| x == k).count();
    let line = format!(
        "{name}: {} shock, {} birth, {} merge, {} forbidden, {} unclassified",
        count(EventKind::Shock),
        count(EventKind::ShockBirth),
        count(EventKind::ShockMerge),
        r.forbidden_a + r.forbidden_b,
        r.unclassified
    );
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn run_grid(spec: &ProblemSpec, nt: usize, nq: usize) -> GridSolution {
    let times = linspace(0.0, spec.t_max, nt);
    let qs = periodic_nodes(-PI, 2.0 * PI, nq);
    minimax_grid(spec, &times, &qs, &GridOptions::default()).unwrap().solution
}

fn c4_whitelist(b: &Burgers) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let mut merges = 0;
    let runs: Vec<(&str, GridSolution)> = vec![
        ("burgers", b.minimax.clone()),
        ("two-hump", run_grid(&common::two_hump(), 128, 256)),
        ("merge", run_grid(&common::merging(), 160, 256)),
        ("transport", run_grid(&common::transport(), 64, 256)),
        ("nonconvex", run_grid(&common::nonconvex(), 128, 256)),
    ];
    for (name, g) in &runs {
        let ev = events_of(g);
        merges += ev.iter().filter(|e| e.kind == EventKind::ShockMerge).count();
        match whitelist(name, &ev) {
            Ok(l) => lines.push(l),
            Err(l) => {
                ok = false;
                lines.push(l);
            }
        }
    }
    let germ = forbidden_report(&events_of(&germ_fixture(Germ::A, 64)));
    let caught = germ.forbidden_a + germ.forbidden_b > 0;
    lines.push(format!("germ (a) caught: {caught}"));
    lines.push(format!("merges seen: {merges}"));
    check(ok && caught, lines.join("; "))
}

fn slices_of(spec: &ProblemSpec, nt: usize) -> Vec<Slice> {
    let times = linspace(0.0, spec.t_max, nt);
    grid_slices(spec, &times, &GridOptions::default()).unwrap()
}

fn c5_agreement(burgers: &[Slice], hump: &[Slice]) -> Outcome {
    let qs = periodic_nodes(-PI, 2.0 * PI, 512);
    let mut total = (0usize, 0usize, 0usize);
    let mut problems = Vec::new();
    let mut surgeries = 0;
    for (name, slices) in [("burgers", burgers), ("two-hump", hump)] {
        for s in slices.iter().filter(|s| !s.info.degenerate) {
            match eliminate(&s.front) {
                Ok(e) => {
                    if let Some(why) = &e.stalled {
                        problems.push(format!("{name} t = {}: stalled ({why})", s.info.t));
                        continue;
                    }
                    surgeries += e.log.len();
                    let a = agreement(&s.front, &s.analysis, &e, &qs, 1e-4).unwrap();
                    total.0 += a.samples;
                    total.1 += a.agree;
                    total.2 += a.mismatches_outside;
                }
                Err(err) => problems.push(format!("{name} t = {}: {err}", s.info.t)),
            }
        }
    }
    let ratio = total.1 as f64 / total.0.max(1) as f64;
    check(
        problems.is_empty() && ratio >= 0.999 && total.2 == 0,
        format!(
            "agreement {:.5} over {} samples, {} outside balls, {surgeries} surgeries, problems {:?}",
            ratio,
            total.0,
            total.2,
            problems.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn c6_invariants(all: &[&[Slice]]) -> Outcome {
    let mut bad = Vec::new();
    let mut fronts = 0;
    let mut curves = 0;
    for slices in all {
        for s in slices.iter() {
            fronts += 1;
            let a = &s.analysis;
            let t = s.info.t_used;
            if a.sections.len() != a.cusps.len() + 1 {
                bad.push(format!("t = {t}: {} sections, {} cusps", a.sections.len(), a.cusps.len()));
            }
            if a.sections.first().map(|x| x.index) != Some(0) || a.sections.last().map(|x| x.index) != Some(0) {
                bad.push(format!("t = {t}: index walk does not close at 0"));
            }
            match decompose(&s.front, a) {
                Ok(d) => {
                    for x in &d.coupled {
                        curves += 1;
                        if x.cusps.len() != 2 || x.self_intersections != 0 {
                            bad.push(format!("t = {t}: coupled curve with {} cusps, {} self-intersections", x.cusps.len(), x.self_intersections));
                        }
                    }
                }
                Err(e) => bad.push(format!("t = {t}: {e}")),
            }
        }
    }
    let mut residual = 0.0f64;
    for spec in [common::burgers(), common::two_hump(), common::merging(), common::nonconvex()] {
        let seeds = spec.base_seeds(256);
        for t in [0.25, 0.5, 1.0] {
            let r = exactness_residual(&spec, t * spec.t_max, &seeds, 1e-4, spec.default_step()).unwrap();
            residual = residual.max(r);
        }
    }
    check(
        bad.is_empty() && residual <= 1e-6,
        format!("{fronts} fronts, {curves} coupled curves, exactness residual {residual:.2e}, issues {:?}", bad.iter().take(3).collect::<Vec<_>>()),
    )
}

fn c7_classical(b: &Burgers) -> Outcome {
    let g = &b.minimax;
    let mut m = 0.0f64;
    for k in (0..g.nt()).filter(|&k| g.times[k] < 0.9) {
        for j in 0..g.nq() {
            m = m.max((g.at(k, j) - common::burgers_classical(g.times[k], g.qs[j])).abs());
        }
    }
    check(m <= 1e-6, format!("max |minimax − classical| = {m:.2e} for t < 0.9"))
}

fn rk4_error(step: f64) -> f64 {
    let spec = common::periodic("exp(-t)*p^2/2", "cos(q)", 2.0);
    let seeds = spec.base_seeds(64);
    let t = 2.0f64;
    let e = 1.0 - (-t).exp();
    evolve(&spec, t, &seeds, step)
        .unwrap()
        .iter()
        .map(|s| {
            let st = s.last();
            let q = s.q0 - s.q0.sin() * e;
            let z = s.q0.cos() + 0.5 * s.q0.sin().powi(2) * e;
            (st.q - q).abs().max((st.z - z).abs())
        })
        .fold(0.0, f64::max)
}

fn csv_bytes(g: &GridSolution) -> Vec<u8> {
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    buf
}

fn c8_hygiene() -> Outcome {
    let (e1, e2) = (rk4_error(0.2), rk4_error(0.1));
    let ratio = e1 / e2;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut evaluations = 0;
    while evaluations < 1000 {
        let src = common::random_expression(&mut rng, 4);
        let e = Expression::parse(&src).unwrap();
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        for (i, v) in [Var::T, Var::Q, Var::P].into_iter().enumerate() {
            let (f, d) = e.eval_d(x[0], x[1], x[2], v).unwrap();
            let h = 1e-5;
            let mut lo = x;
            let mut hi = x;
            lo[i] -= h;
            hi[i] += h;
            let fd = (e.eval(hi[0], hi[1], hi[2]).unwrap() - e.eval(lo[0], lo[1], lo[2]).unwrap()) / (2.0 * h);
            worst = worst.max((d - fd).abs() / (1.0 + d.abs().max(f.abs())));
        }
        evaluations += 1;
    }

    let spec = common::burgers();
    let times = linspace(0.0, 3.0, 48);
    let qs = periodic_nodes(-PI, 2.0 * PI, 128);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let g = minimax_grid(&spec, &times, &qs, &GridOptions::default()).unwrap().solution;
            let s = &grid_slices(&spec, &[1.7], &GridOptions::default()).unwrap()[0];
            (csv_bytes(&g), front_json(&s.front, &s.analysis).to_string())
        })
    };
    let a = run(1);
    let b = run(4);
    let c = run(4);
    let deterministic = a == b && b == c;
    check(
        ratio >= 8.0 && worst <= 1e-6 && deterministic,
        format!("RK4 error ratio {ratio:.2}, AD vs FD worst {worst:.2e} over 1000 expressions, deterministic {deterministic}"),
    )
}

fn nonconvex_report() -> (String, f64) {
    let spec = common::nonconvex();
    let times = linspace(0.0, 3.0, 128);
    let qs = periodic_nodes(-PI, 2.0 * PI, 256);
    let mm = minimax_grid(&spec, &times, &qs, &GridOptions::default()).unwrap().solution;
    let lf = lax_friedrichs(&spec, &times, &qs, 0.45).unwrap();
    let mask = singular_set(&mm);
    let first = (0..mm.nt()).find(|&k| mask.row_has(k)).unwrap_or(mm.nt());
    let mut report = String::from("t,linf,l1\n");
    let mut gap = 0.0f64;
    for k in 0..mm.nt() {
        let (mut li, mut l1) = (0.0f64, 0.0);
        for j in 0..mm.nq() {
            let d = (mm.at(k, j) - lf.at(k, j)).abs();
            li = li.max(d);
            l1 += d * 2.0 * PI / qs.len() as f64;
        }
        if k >= first {
            gap = gap.max(li);
        }
        report.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", mm.times[k], li, l1));
    }
    (report, gap)
}

fn c9_nonconvex() -> Outcome {
    let (r1, gap) = nonconvex_report();
    let (r2, _) = nonconvex_report();
    let pinned = (gap - GOLDEN_NONCONVEX_GAP).abs() <= 0.2 * GOLDEN_NONCONVEX_GAP;
    check(
        r1 == r2 && r1.lines().count() == 129 && pinned,
        format!("gap after first singular time {gap:.4e} (golden {GOLDEN_NONCONVEX_GAP:.4e}), reproducible {}", r1 == r2),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::args()
        .skip(1)
        .find(|a| !a.starts_with('-'))
        .map(|a| a.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().map_or(true, |o| o.contains(&n));

    let needs_burgers = [2, 3, 4, 7].iter().any(|&n| wanted(n));
    let burgers = needs_burgers.then(|| {
        let (times, qs) = burgers_nodes();
        let start = Instant::now();
        let minimax = minimax_grid(&common::burgers(), &times, &qs, &GridOptions::default())
            .unwrap()
            .solution;
        Burgers {
            minimax,
            seconds: start.elapsed().as_secs_f64(),
        }
    });
    let slices = (wanted(5) || wanted(6)).then(|| {
        (
            slices_of(&common::burgers(), 256),
            slices_of(&common::two_hump(), 128),
            slices_of(&common::merging(), 160),
        )
    });

    let mut failed = 0;
    let mut report = |n: usize, name: &str, run: &dyn Fn() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {n} {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {n} {name}: {d} [{secs:.1} s]");
            }
        }
    };
    report(1, "free point suite", &c1_free_point);
    if let Some(b) = &burgers {
        report(2, "minimax equals lax-oleinik", &|| c2_convex_equality(b));
        report(3, "shock birth location", &|| c3_birth(b));
        report(4, "singularity whitelist", &|| c4_whitelist(b));
    }
    if let Some((b, h, m)) = &slices {
        report(5, "elimination agreement", &|| c5_agreement(b, h));
        report(6, "front invariants", &|| c6_invariants(&[b, h, m]));
    }
    if let Some(b) = &burgers {
        report(7, "classical regime", &|| c7_classical(b));
    }
    report(8, "numerical hygiene", &c8_hygiene);
    report(9, "nonconvex report", &c9_nonconvex);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
