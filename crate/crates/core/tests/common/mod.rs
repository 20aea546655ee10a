//! Independent reference computations used by the integration tests.
//!
//! Nothing here calls the crate's fitter, filter or moment code.

#![allow(dead_code)]

/// Solves a small dense system by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let m = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= m * p;
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Linear least squares on the basis `[1, x, x^2, -tanh((q-e)/f)]` with
/// `x` centred and scaled; returns `(a, b, c, d)` in raw charge units and
/// the sum of squared residuals.
fn linear_part(q: &[f64], v: &[f64], e: f64, f: f64) -> ([f64; 4], f64) {
    let mid = 0.5 * (q[0] + q[q.len() - 1]);
    let half = 0.5 * (q[q.len() - 1] - q[0]);
    let basis = |x: f64| {
        let s = (x - mid) / half;
        [1.0, s, s * s, -((x - e) / f).tanh()]
    };
    let mut ata = vec![vec![0.0; 4]; 4];
    let mut atb = vec![0.0; 4];
    for (&x, &y) in q.iter().zip(v) {
        let row = basis(x);
        for i in 0..4 {
            atb[i] += row[i] * y;
            for j in 0..4 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let Some(sol) = solve(ata, atb) else {
        return ([f64::NAN; 4], f64::INFINITY);
    };
    let sse = q
        .iter()
        .zip(v)
        .map(|(&x, &y)| {
            let r = basis(x);
            let m: f64 = (0..4).map(|i| r[i] * sol[i]).sum();
            (m - y).powi(2)
        })
        .sum();
    let c = sol[2] / (half * half);
    let b = sol[1] / half - 2.0 * sol[2] * mid / (half * half);
    let a = sol[0] - sol[1] * mid / half + sol[2] * mid * mid / (half * half);
    ([a, b, c, sol[3]], sse)
}

#[derive(Debug, Clone, Copy)]
pub struct OracleFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub sse: f64,
}

impl OracleFit {
    pub fn rms(&self, n: usize) -> f64 {
        (self.sse / n as f64).sqrt()
    }

    pub fn positive(&self, q: f64) -> f64 {
        self.a + self.b * q + self.c * q * q
    }
}

/// Derivative-free fit: compass search over `(e, f)` with the four linear
/// parameters eliminated by least squares at every probe.
pub fn coordinate_search_fit(q: &[f64], v: &[f64], e0: f64, f0: f64) -> OracleFit {
    let span = q[q.len() - 1] - q[0];
    let eval = |e: f64, f: f64| {
        if f <= 1e-6 {
            f64::INFINITY
        } else {
            linear_part(q, v, e, f).1
        }
    };
    let (mut e, mut f) = (e0, f0);
    let mut best = eval(e, f);
    let mut step = 0.05 * span;
    while step > 1e-10 * span {
        let mut improved = false;
        for (de, df) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let s = eval(e + de, f + df);
            if s < best {
                best = s;
                e += de;
                f += df;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let ([a, b, c, d], sse) = linear_part(q, v, e, f);
    OracleFit { a, b, c, d, e, f, sse }
}

/// Two-pass weighted Fisher skewness.
pub fn brute_force_skewness(x: &[f64], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let mut mean = 0.0;
    for i in 0..x.len() {
        mean += x[i] * w[i] / total;
    }
    let mut var = 0.0;
    let mut third = 0.0;
    for i in 0..x.len() {
        let d = x[i] - mean;
        var += w[i] / total * d * d;
        third += w[i] / total * d * d * d;
    }
    third / var.powf(1.5)
}

/// Skewness of the dV/dQ peak computed without the crate's filter, fitter
/// or moment code: compass-search fit, plain central differences of the
/// unsmoothed `N(Q)`, thresholding, then brute-force moments.
pub fn oracle_skewness(q: &[f64], v: &[f64], e0: f64, threshold: f64) -> f64 {
    let span = q[q.len() - 1] - q[0];
    let fit = coordinate_search_fit(q, v, e0, 0.02 * span);
    let n: Vec<f64> = q.iter().zip(v).map(|(&x, &y)| fit.positive(x) - y).collect();
    let dq = q[1] - q[0];
    let m = n.len();
    let dn: Vec<f64> = (0..m)
        .map(|k| {
            if k == 0 {
                (n[1] - n[0]) / dq
            } else if k == m - 1 {
                (n[m - 1] - n[m - 2]) / dq
            } else {
                (n[k + 1] - n[k - 1]) / (2.0 * dq)
            }
        })
        .collect();
    let area: f64 = dn.iter().sum::<f64>() * dq;
    let (xs, ws): (Vec<f64>, Vec<f64>) = dn
        .iter()
        .zip(q)
        .filter(|(d, _)| **d / area >= threshold)
        .map(|(d, &x)| (x, d / area))
        .unzip();
    brute_force_skewness(&xs, &ws)
}
