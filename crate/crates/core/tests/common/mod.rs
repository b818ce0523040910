//! Benchmark problems and random generators shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use minimax_core::characteristics::{Domain, ProblemSpec};
use minimax_core::expr::Expression;
use minimax_core::front::{FrontCurve, Vertex};
use minimax_core::morse1d::FiberFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn periodic(h: &str, u0: &str, t_max: f64) -> ProblemSpec {
    ProblemSpec::new(
        Expression::parse(h).unwrap(),
        Expression::parse(u0).unwrap(),
        Domain::Periodic {
            start: -PI,
            period: 2.0 * PI,
        },
        t_max,
    )
    .unwrap()
}

pub fn burgers() -> ProblemSpec {
    periodic("p^2/2", "cos(q)", 3.0)
}

pub fn two_hump() -> ProblemSpec {
    periodic("p^2/2", "cos(q) + 0.7*cos(2*q)", 1.5)
}

/// Asymmetric two-hump data whose two shocks meet near `(2.57, 0.37)`.
pub fn merging() -> ProblemSpec {
    periodic("p^2/2", "cos(q) + 0.5*cos(2*q + 2)", 2.75)
}

pub fn transport() -> ProblemSpec {
    periodic("0.7*p", "cos(q)", 3.0)
}

pub fn nonconvex() -> ProblemSpec {
    periodic("cos(p) - 1", "cos(q)", 3.0)
}

/// Classical Burgers solution from `u0 = cos q` before the caustic.
pub fn burgers_classical(t: f64, q: f64) -> f64 {
    let mut q0 = q;
    for _ in 0..100 {
        let g = q0 - t * q0.sin() - q;
        let dg = 1.0 - t * q0.cos();
        let step = g / dg;
        q0 -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    q0.cos() + 0.5 * t * q0.sin().powi(2)
}

/// A random trigonometric polynomial plus a `±c ξ²` tail, windowed so that it
/// is monotone toward its tails outside the window.
pub fn random_fiber(seed: u64) -> FiberFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = rng.gen_range(2..=6);
    let coeffs: Vec<(f64, f64, f64)> = (0..terms)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.3..3.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let c = rng.gen_range(0.05..0.5);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let slope: f64 = coeffs.iter().map(|(a, k, _)| a.abs() * k).sum();
    let l = slope / (2.0 * c) + 1.0;
    let index = if sign > 0.0 { 0 } else { 1 };
    let f = move |x: f64| sign * c * x * x + coeffs.iter().map(|(a, k, ph)| a * (k * x + ph).sin()).sum::<f64>();
    FiberFunction::new(f, (-l, l), index).unwrap()
}

/// Random expression source over `t, q, p` whose values stay finite near the
/// unit box.
pub fn random_expression(rng: &mut ChaCha8Rng, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..5) {
            0 => "t".into(),
            1 => "q".into(),
            2 => "p".into(),
            _ => format!("{:.3}", rng.gen_range(-2.0..2.0)),
        };
    }
    let a = random_expression(rng, depth - 1);
    match rng.gen_range(0..11) {
        0 => format!("({a} + {})", random_expression(rng, depth - 1)),
        1 => format!("({a} - {})", random_expression(rng, depth - 1)),
        2 => format!("({a} * {})", random_expression(rng, depth - 1)),
        3 => format!("({a} / (2 + cos({})))", random_expression(rng, depth - 1)),
        4 => format!("sin({a})"),
        5 => format!("cos({a})"),
        6 => format!("exp(tanh({a}))"),
        7 => format!("tanh({a})"),
        8 => format!("sqrt(1 + ({a})^2)"),
        9 => format!("({a})^{}", rng.gen_range(2..4)),
        _ => format!("-{a}"),
    }
}

/// Legendrian curve from `s -> (q, p)` with `z = ∫ p dq` by fine trapezoids.
pub fn legendrian(n: usize, range: (f64, f64), qp: impl Fn(f64) -> (f64, f64)) -> FrontCurve {
    let param = |i: usize| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64;
    let mut vs = Vec::with_capacity(n);
    let mut z = 0.0;
    let sub = 64;
    for i in 0..n {
        if i > 0 {
            let (a, b) = (param(i - 1), param(i));
            for j in 0..sub {
                let (qa, pa) = qp(a + (b - a) * j as f64 / sub as f64);
                let (qb, pb) = qp(a + (b - a) * (j + 1) as f64 / sub as f64);
                z += 0.5 * (qb - qa) * (pa + pb);
            }
        }
        let (q, p) = qp(param(i));
        vs.push(Vertex::new(param(i), q, z, p));
    }
    FrontCurve::new(vs, 0.0, None).unwrap()
}

/// Burgers front at `t = 2.5` from a Gaussian well carrying a narrow dent:
/// the dent's swallowtail sits on the big one's loop.
pub fn nested_fish() -> FrontCurve {
    legendrian(4001, (-6.0, 6.0), |s| {
        let p = -(-s * s).exp() - 0.05 * (-((s + 1.7) / 0.08).powi(2)).exp();
        (s + 2.5 * p, p)
    })
}
