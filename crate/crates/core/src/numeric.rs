//! Small scalar solvers: Brent root polishing, bracketed root scans and a
//! Nelder-Mead simplex minimizer.

/// Brent's method on a sign-changing bracket `[a, b]`.
pub fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Some(b)
}

/// All roots of `f` on the sample grid `xs`, found by sign changes between
/// consecutive samples and polished with Brent.
pub fn roots_on_grid<F: Fn(f64) -> f64>(f: F, xs: &[f64], tol: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    for i in 0..xs.len().saturating_sub(1) {
        let (fa, fb) = (vals[i], vals[i + 1]);
        if fa == 0.0 {
            out.push(xs[i]);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            if let Some(x) = brent(&f, xs[i], xs[i + 1], tol) {
                out.push(x);
            }
        }
    }
    if let (Some(&x), Some(&v)) = (xs.last(), vals.last()) {
        if v == 0.0 {
            out.push(x);
        }
    }
    out
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

#[derive(Clone, Debug)]
pub struct NmOptions {
    pub step: f64,
    pub ftol: f64,
    pub xtol: f64,
    pub max_evals: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions { step: 0.2, ftol: 1e-15, xtol: 1e-10, max_evals: 3000 }
    }
}

/// Nelder-Mead minimization from `x0`. Returns the best point and value.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &NmOptions) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut evals = n + 1;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[n] - vals[0];
        let diam = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.abs() <= opts.ftol && diam <= opts.xtol {
            break;
        }
        if spread.abs() <= opts.ftol * 1e-3 && diam <= opts.xtol * 1e3 {
            break;
        }
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        for i in 0..n {
            trial[i] = centroid[i] + (centroid[i] - worst[i]);
        }
        let fr = f(&trial);
        evals += 1;
        if fr < vals[0] {
            for i in 0..n {
                trial2[i] = centroid[i] + 2.0 * (centroid[i] - worst[i]);
            }
            let fe = f(&trial2);
            evals += 1;
            if fe < fr {
                simplex[n].copy_from_slice(&trial2);
                vals[n] = fe;
            } else {
                simplex[n].copy_from_slice(&trial);
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            simplex[n].copy_from_slice(&trial);
            vals[n] = fr;
            continue;
        }
        let outside = fr < vals[n];
        for i in 0..n {
            trial2[i] = if outside {
                centroid[i] + 0.5 * (trial[i] - centroid[i])
            } else {
                centroid[i] + 0.5 * (worst[i] - centroid[i])
            };
        }
        let fc = f(&trial2);
        evals += 1;
        if fc < fr.min(vals[n]) {
            simplex[n].copy_from_slice(&trial2);
            vals[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for j in 1..=n {
            for i in 0..n {
                simplex[j][i] = best[i] + 0.5 * (simplex[j][i] - best[i]);
            }
            vals[j] = f(&simplex[j]);
        }
        evals += n;
    }
    let (ib, _) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    (simplex[ib].clone(), vals[ib])
}

/// Nelder-Mead followed by restarts from the incumbent until no further improvement.
pub fn nelder_mead_restarted<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    opts: &NmOptions,
    rounds: usize,
) -> (Vec<f64>, f64) {
    let (mut x, mut v) = nelder_mead(&f, x0, opts);
    let mut step = opts.step;
    for _ in 0..rounds {
        step *= 0.3;
        let o = NmOptions { step, ..opts.clone() };
        let (x2, v2) = nelder_mead(&f, &x, &o);
        let improved = v2 < v - 1e-15;
        if v2 <= v {
            x = x2;
            v = v2;
        }
        if !improved {
            break;
        }
    }
    (x, v)
}
