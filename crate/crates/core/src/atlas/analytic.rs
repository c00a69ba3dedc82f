//! Closed-form family curves, zero-variance thresholds and the scaled variable R.

use crate::families::ClassTag;
use crate::numeric::{brent, linspace, roots_on_grid};
use crate::{Error, Result};

/// `R = 8 r p / (3 q^2)` with `p = 1 - q - r`.
pub fn scaled_r(q: f64, r: f64) -> f64 {
    8.0 * r * (1.0 - q - r) / (3.0 * q * q)
}

/// Smallest `r` with `scaled_r(q, r) = target`, if any.
pub fn r_from_scaled(q: f64, target: f64) -> Option<f64> {
    // r (1 - q - r) = 3 q^2 R / 8
    let c = 3.0 * q * q * target / 8.0;
    let b = 1.0 - q;
    let disc = b * b - 4.0 * c;
    (disc >= 0.0).then(|| 2.0 * c / (b + disc.sqrt()))
}

/// Variance of `(sqrt a, sqrt b, sqrt b, sqrt b)` in the ideal basis.
pub fn delta_one_three(a: f64, b: f64) -> f64 {
    let (sa, sb) = (a.max(0.0).sqrt(), b.max(0.0).sqrt());
    let n = a + 3.0 * b;
    1.0 - ((sa + 3.0 * sb).powi(4) + 3.0 * (sa - sb).powi(4)) / (16.0 * n * n)
}

/// Pair weights `(A, B)` of a product of two factors: roots of `z^2 - (q/p) z + r/p`.
fn pair_roots(q: f64, r: f64) -> Option<(f64, f64)> {
    let p = 1.0 - q - r;
    if p <= 0.0 || q <= 0.0 {
        return None;
    }
    let s = q / p;
    let m = r / p;
    let disc = s * s - 4.0 * m;
    if disc < 0.0 {
        return None;
    }
    let big = 0.5 * (s + disc.sqrt());
    Some((big, if big > 0.0 { m / big } else { 0.0 }))
}

/// Two-pair family minimum `1/2 - 2 r p / q^2`; `None` where no pure state exists.
pub fn bisep22_curve(q: f64, r: f64) -> Option<f64> {
    pair_roots(q, r)?;
    let p = 1.0 - q - r;
    Some(0.5 - 2.0 * r * p / (q * q))
}

/// One-versus-three family minimum over both root assignments.
pub fn bisep13_curve(q: f64, r: f64) -> Option<f64> {
    let (a, b) = pair_roots(q, r)?;
    Some(delta_one_three(a, b / 3.0).min(delta_one_three(b, a / 3.0)))
}

/// Roots `(x, y)` with `x = e^2`, `y = et^2` of the `(e, et, et, et)` product family.
pub fn fs_family_roots(q: f64, r: f64) -> Vec<(f64, f64)> {
    let p = 1.0 - q - r;
    if p <= 0.0 || q <= 0.0 || r < 0.0 {
        return Vec::new();
    }
    let s = q / p;
    let pp = 1.0 / p;
    if r == 0.0 {
        return vec![(s, 0.0)];
    }
    let g = |y: f64| (1.0 + s - 3.0 * y) * (1.0 + y).powi(3) - pp;
    let grid = linspace(0.0, s / 3.0, 2001);
    let mut ys = roots_on_grid(g, &grid, 1e-16);
    // tangential roots are missed by sign scans; check local minima of |g|
    for w in grid.windows(3) {
        let (a, b, c) = (g(w[0]).abs(), g(w[1]).abs(), g(w[2]).abs());
        if b < a && b < c && b < 1e-9 {
            ys.push(w[1]);
        }
    }
    ys.into_iter().map(|y| ((s - 3.0 * y).max(0.0), y)).collect()
}

/// Smallest variance across the `(e, et, et, et)` family members at `(q, r)`.
pub fn fs_family_curve(q: f64, r: f64) -> Option<f64> {
    fs_family_roots(q, r).into_iter().map(|(x, y)| delta_one_three(x, y)).min_by(f64::total_cmp)
}

/// Family closed form for a class, where one exists.
pub fn analytic_curve(tag: ClassTag, q: f64, r: f64) -> Option<f64> {
    match tag {
        ClassTag::FullySeparable => fs_family_curve(q, r),
        ClassTag::Biseparable2x2 => bisep22_curve(q, r),
        ClassTag::Biseparable1x3 => bisep13_curve(q, r),
    }
}

/// Defining relation of the fully separable zero-variance threshold in `(q, r)`:
/// `R = 1 + q / (6 p) + q^2 / (96 p^2)`. Returns `R` minus the right-hand side.
pub fn fs_threshold_residual(q: f64, r: f64) -> f64 {
    let p = 1.0 - q - r;
    scaled_r(q, r) - 1.0 - q / (6.0 * p) - q * q / (96.0 * p * p)
}

/// Threshold residual for any class: fully separable relation above, `R - 2/3`
/// and `R - 1/2` for the biseparable classes.
pub fn threshold_residual(tag: ClassTag, q: f64, r: f64) -> f64 {
    match tag {
        ClassTag::FullySeparable => fs_threshold_residual(q, r),
        ClassTag::Biseparable2x2 => scaled_r(q, r) - 2.0 / 3.0,
        ClassTag::Biseparable1x3 => scaled_r(q, r) - 0.5,
    }
}

/// Smallest `r` at which the pure class minimum reaches zero.
pub fn zero_variance_threshold(tag: ClassTag, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must lie in (0, 1)")));
    }
    let f = |r: f64| threshold_residual(tag, q, r);
    let hi = 1.0 - q;
    let grid: Vec<f64> = linspace(0.0, 1.0, 4001).into_iter().map(|t| hi * t * t).collect();
    let grid = &grid[1..grid.len() - 1];
    for w in grid.windows(2) {
        if f(w[0]).signum() != f(w[1]).signum() {
            if let Some(r) = brent(f, w[0], w[1], 1e-18) {
                return Ok(r);
            }
        }
    }
    Err(Error::NoRoot(format!("{} threshold at q = {q}", tag.name())))
}
