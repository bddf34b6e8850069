#![allow(dead_code)]

use jetgen::dsl::{parse_map, MapProgram};
use jetgen::jet::derivative_matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Map definitions exercised by the jet consistency checks.
pub const CORPUS: &[&str] = &[
    "map (x) -> (x^3)",
    "map (x) -> (x^4 - x^2)",
    "map (x) -> (sin(x) * exp(x), cos(2*x) / (1 + x^2))",
    "map (x) on x in (0.5, inf) -> (log(x), sqrt(x), x^-2)",
    "map (x, y) -> (x^2, y^2)",
    "map (x, y) -> (x^2 - y^2, 2*x*y)",
    "map (x, y) -> (x, y^3 - x*y)",
    "map (x, y) -> (x, y^2)",
    "map (x, y) -> (x, x*y, y^2)",
    "map (x, y) -> (x^2, x*y, y)",
    "map (x, y) -> (exp(x*y) - 1, sin(x + y^2))",
    "map (x, y) on x in (-1.5, 1.5), y in (-1.5, 1.5) -> (1 / (3 - x*y), log(5 + x^3 - y))",
    "map (u, v) -> (u^2 - 4, v, (u + 2)*(u^2 - 4)^2/4)",
    "map (x, y, z) -> (x*y*z, x^2 + y^2 - z^2, cos(x)*sin(y) + z^3)",
    "map (x, y, z, w) -> (x*w - y*z, exp(-(x^2 + y^2 + z^2 + w^2)))",
    "map (s, t) on all in (-3, 3) -> (sqrt(10 + s^2 + t^2), (s - t)^5 / 7)",
    "map (x, y) -> (pi * x - y^4, 2)",
];

pub fn corpus() -> Vec<MapProgram> {
    CORPUS.iter().map(|s| parse_map(s).unwrap_or_else(|e| panic!("{s}: {e}"))).collect()
}

/// A random point of `[-r, r]^n` inside the domain of `g`, at least
/// `pad` away from its boundary.
pub fn interior_point(g: &MapProgram, rng: &mut ChaCha8Rng, r: f64, pad: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..g.n_in()).map(|_| rng.gen_range(-r..=r)).collect();
        let ok = g.domain().intervals().iter().zip(&x).all(|(iv, &v)| iv.lo + pad < v && v < iv.hi - pad);
        if ok {
            return x;
        }
    }
}

/// Largest relative mismatch between jet derivatives and central
/// differences at `x`: `(first partials, second partials)`.
pub fn fd_mismatch(g: &MapProgram, x: &[f64], h: f64) -> (f64, f64) {
    let n = g.n_in();
    let jet = g.jet(x, 2).unwrap();
    let d = derivative_matrix(&jet).unwrap();
    let at = |shift: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(j, s) in shift {
            y[j] += s;
        }
        g.eval(&y).unwrap()
    };
    let rel = |approx: f64, exact: f64| (approx - exact).abs() / exact.abs().max(1.0);
    let mut first = 0.0f64;
    let mut second = 0.0f64;
    for j in 0..n {
        let (p, m) = (at(&[(j, h)]), at(&[(j, -h)]));
        for i in 0..g.n_out() {
            first = first.max(rel((p[i] - m[i]) / (2.0 * h), d[(i, j)]));
        }
    }
    for (i, comp) in jet.components().iter().enumerate() {
        let hess = comp.hessian().unwrap();
        for a in 0..n {
            for b in 0..n {
                let fd = (at(&[(a, h), (b, h)])[i] - at(&[(a, h), (b, -h)])[i] - at(&[(a, -h), (b, h)])[i]
                    + at(&[(a, -h), (b, -h)])[i])
                    / (4.0 * h * h);
                second = second.max(rel(fd, hess[(a, b)]));
            }
        }
    }
    (first, second)
}

fn random_term(rng: &mut ChaCha8Rng, vars: &[&str], depth: usize) -> String {
    let v = vars[rng.gen_range(0..vars.len())];
    let c = (rng.gen_range(-2.0..2.0f64) * 100.0).round() / 100.0;
    if depth == 0 {
        return match rng.gen_range(0..3) {
            0 => format!("{c}"),
            1 => v.to_string(),
            _ => format!("{v}^{}", rng.gen_range(2..4)),
        };
    }
    let a = random_term(rng, vars, depth - 1);
    let b = random_term(rng, vars, depth - 1);
    match rng.gen_range(0..7) {
        0 => format!("({a} + {b})"),
        1 => format!("({a} - {c} * {b})"),
        2 => format!("({a} * {b})"),
        3 => format!("sin({a})"),
        4 => format!("cos({a} + {v})"),
        5 => format!("({a} / (2 + ({b})^2))"),
        _ => format!("exp({c} * sin({a}))"),
    }
}

/// A random smooth map `R^n -> R^l` as DSL source.
pub fn random_map_source(rng: &mut ChaCha8Rng, n: usize, l: usize) -> String {
    let names = ["x", "y", "z", "w", "u"];
    let vars = &names[..n];
    let comps: Vec<String> = (0..l).map(|_| random_term(rng, vars, 2)).collect();
    format!("map ({}) -> ({})", vars.join(", "), comps.join(", "))
}

/// A random polynomial map `R^n -> R^l` of degree at most 3.
pub fn random_polynomial_source(rng: &mut ChaCha8Rng, n: usize, l: usize) -> String {
    let names = ["x", "y", "z", "w"];
    let vars = &names[..n];
    let comps: Vec<String> = (0..l)
        .map(|_| {
            let mut terms = vec![format!("{:.3}", rng.gen_range(-1.0..1.0))];
            for _ in 0..4 {
                let c = rng.gen_range(-1.0..1.0);
                let mono: Vec<String> = (0..rng.gen_range(1..4)).map(|_| vars[rng.gen_range(0..n)].to_string()).collect();
                terms.push(format!("{c:.3} * {}", mono.join("*")));
            }
            terms.join(" + ")
        })
        .collect();
    format!("map ({}) -> ({})", vars.join(", "), comps.join(", "))
}
