//! Shared oracles for the integration suites: an adaptive 2-D quadrature of
//! the gravity integrand, independent of the analytic edge-sum path, plus the
//! unit constants needed to compare against it.

#![allow(dead_code)]

/// Same constant the library applies: 2*Gamma with g/cm^3 and mGal conversions.
pub const GRAVITY_SCALE: f64 = 2.0 * 6.674e-11 * 1e3 * 1e5;

/// 16-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 16] = [
    -0.9894009349916499,
    -0.9445750230732326,
    -0.8656312023878318,
    -0.7554044083550030,
    -0.6178762444026438,
    -0.4580167776572274,
    -0.2816035507792589,
    -0.0950125098376374,
    0.0950125098376374,
    0.2816035507792589,
    0.4580167776572274,
    0.6178762444026438,
    0.7554044083550030,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL_WEIGHTS: [f64; 16] = [
    0.0271524594117541,
    0.0622535239386479,
    0.0951585116824928,
    0.1246289712555339,
    0.1495959888165767,
    0.1691565193950025,
    0.1826034150449236,
    0.1894506104550685,
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

fn gl2d<F: Fn(f64, f64) -> f64>(f: &F, x0: f64, x1: f64, z0: f64, z1: f64) -> f64 {
    let hx = 0.5 * (x1 - x0);
    let cx = 0.5 * (x1 + x0);
    let hz = 0.5 * (z1 - z0);
    let cz = 0.5 * (z1 + z0);
    let mut acc = 0.0;
    for (xi, wx) in GL_NODES.iter().zip(GL_WEIGHTS) {
        let x = cx + hx * xi;
        let mut inner = 0.0;
        for (zi, wz) in GL_NODES.iter().zip(GL_WEIGHTS) {
            inner += wz * f(x, cz + hz * zi);
        }
        acc += wx * inner;
    }
    acc * hx * hz
}

fn adapt<F: Fn(f64, f64) -> f64>(
    f: &F,
    x0: f64,
    x1: f64,
    z0: f64,
    z1: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let whole = gl2d(f, x0, x1, z0, z1);
    let xm = 0.5 * (x0 + x1);
    let zm = 0.5 * (z0 + z1);
    let parts = gl2d(f, x0, xm, z0, zm)
        + gl2d(f, xm, x1, z0, zm)
        + gl2d(f, x0, xm, zm, z1)
        + gl2d(f, xm, x1, zm, z1);
    if depth == 0 || (whole - parts).abs() <= tol {
        return parts;
    }
    let t = tol / 4.0;
    adapt(f, x0, xm, z0, zm, t, depth - 1)
        + adapt(f, xm, x1, z0, zm, t, depth - 1)
        + adapt(f, x0, xm, zm, z1, t, depth - 1)
        + adapt(f, xm, x1, zm, z1, t, depth - 1)
}

/// Adaptive tensor Gauss-Legendre quadrature over a rectangle.
pub fn adaptive_quad2d<F: Fn(f64, f64) -> f64>(
    f: F,
    x0: f64,
    x1: f64,
    z0: f64,
    z1: f64,
    rel_tol: f64,
) -> f64 {
    let first = gl2d(&f, x0, x1, z0, z1);
    let tol = rel_tol * first.abs().max(1e-30);
    adapt(&f, x0, x1, z0, z1, tol, 10)
}

/// Gravity anomaly (mGal) of a station-centered rectangle of unit density
/// (g/cm^3), computed by quadrature of `z/(x^2+z^2)` over the rectangle.
pub fn rectangle_gravity_by_quadrature(x0: f64, x1: f64, z0: f64, z1: f64) -> f64 {
    GRAVITY_SCALE * adaptive_quad2d(|x, z| z / (x * x + z * z), x0, x1, z0, z1, 1e-10)
}
