//! Least-squares fit of the positive-electrode surrogate
//!
//! ```text
//! V(Q) ~ a + b Q + c Q^2 - d tanh((Q - e) / f)
//! ```
//!
//! over a voltage window. The quadratic part stands in for the positive
//! electrode, the tanh step for the graphite staging transition.
//!
//! The solver works in normalised charge `x = (Q - mid) / half_span` so the
//! six Jacobian columns are of comparable size, and maps the result back to
//! charge units at the end.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_FIT_SAMPLES: usize = 50;
/// Below this step amplitude (volts) the step location and width are not
/// identifiable from the data.
pub const RANK_DEFICIENT_D: f64 = 1e-6;
/// Scaled gradient norm (volts) required before a fit counts as converged.
pub const GRADIENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub residual_rms: f64,
    pub converged: bool,
    /// Set when `|d|` is too small for `e` and `f` to mean anything.
    pub rank_deficient: bool,
    /// Largest `|J_j . r| / (|J_j| sqrt(n))` over parameters, in volts.
    pub gradient_norm: f64,
    pub iterations: usize,
}

impl SurrogateFit {
    /// Quadratic part `a + b Q + c Q^2`.
    pub fn positive(&self, q: f64) -> f64 {
        self.a + self.b * q + self.c * q * q
    }

    pub fn model(&self, q: f64) -> f64 {
        self.positive(q) - self.d * ((q - self.e) / self.f).tanh()
    }
}

/// Starting point for the step term. The quadratic part is always
/// initialised from an ordinary least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitHints {
    /// Step location, Ah. Defaults to the steepest descent of `v`.
    pub e: Option<f64>,
    /// Step amplitude, volts.
    pub d: f64,
    /// Step width as a fraction of the charge span.
    pub f_fraction: f64,
}

impl Default for FitHints {
    fn default() -> Self {
        Self {
            e: None,
            d: 0.01,
            f_fraction: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// RMS residual (volts) above which a fit is not reported as converged.
    pub fit_tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fit_tol: 5e-3,
            max_iter: 500,
        }
    }
}

/// Model parameters in normalised charge units.
#[derive(Debug, Clone, Copy)]
struct Scaled([f64; 6]);

struct Problem<'a> {
    x: Vec<f64>,
    v: &'a [f64],
}

impl Problem<'_> {
    fn residuals(&self, p: &Scaled) -> DVector<f64> {
        let [a, b, c, d, e, f] = p.0;
        DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .zip(self.v)
                .map(|(&x, &v)| a + b * x + c * x * x - d * ((x - e) / f).tanh() - v),
        )
    }

    fn jacobian(&self, p: &Scaled) -> DMatrix<f64> {
        let [_, _, _, d, e, f] = p.0;
        let mut j = DMatrix::zeros(self.x.len(), 6);
        for (i, &x) in self.x.iter().enumerate() {
            let u = (x - e) / f;
            let th = u.tanh();
            let sech2 = 1.0 - th * th;
            j[(i, 0)] = 1.0;
            j[(i, 1)] = x;
            j[(i, 2)] = x * x;
            j[(i, 3)] = -th;
            j[(i, 4)] = d * sech2 / f;
            j[(i, 5)] = d * sech2 * u / f;
        }
        j
    }
}

fn scaled_gradient(j: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let n = (r.len() as f64).sqrt();
    j.column_iter()
        .map(|col| {
            let norm = col.norm();
            if norm > 0.0 {
                col.dot(r).abs() / (norm * n)
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Ordinary least squares for `v ~ a + b x + c x^2`.
fn quadratic_fit(x: &[f64], v: &[f64]) -> [f64; 3] {
    let design = DMatrix::from_fn(x.len(), 3, |i, k| x[i].powi(k as i32));
    let rhs = DVector::from_column_slice(v);
    let sol = design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .expect("SVD with both factors always solves");
    [sol[0], sol[1], sol[2]]
}

fn steepest_descent(q: &[f64], v: &[f64]) -> f64 {
    let k = (1..q.len())
        .max_by(|&i, &j| {
            let si = (v[i - 1] - v[i]) / (q[i] - q[i - 1]);
            let sj = (v[j - 1] - v[j]) / (q[j] - q[j - 1]);
            si.total_cmp(&sj).then(j.cmp(&i))
        })
        .unwrap_or(1);
    0.5 * (q[k - 1] + q[k])
}

struct LmOutcome {
    params: Scaled,
    cost: f64,
    stopped: bool,
    iterations: usize,
}

fn levenberg_marquardt(problem: &Problem, start: Scaled, max_iter: usize) -> LmOutcome {
    const XTOL: f64 = 1e-13;
    const GTOL: f64 = 1e-13;

    let mut p = start;
    let mut r = problem.residuals(&p);
    let mut cost = r.norm_squared();
    let mut j = problem.jacobian(&p);
    let mut jtj: Matrix6<f64> = (j.transpose() * &j).fixed_view::<6, 6>(0, 0).into_owned();
    let mut jtr: Vector6<f64> = (j.transpose() * &r).fixed_rows::<6>(0).into_owned();
    let max_diag = (0..6).map(|k| jtj[(k, k)]).fold(0.0, f64::max);
    let mut lambda = 1e-3 * max_diag.max(f64::MIN_POSITIVE);
    let mut nu = 2.0;
    let floor = 1e-12 * max_diag.max(f64::MIN_POSITIVE);

    for iter in 0..max_iter {
        if cost == 0.0 || scaled_gradient(&j, &r) <= GTOL {
            return LmOutcome { params: p, cost, stopped: true, iterations: iter };
        }
        let mut damped = jtj;
        for k in 0..6 {
            damped[(k, k)] += lambda * jtj[(k, k)].max(floor);
        }
        let Some(chol) = damped.cholesky() else {
            lambda *= nu;
            nu *= 2.0;
            continue;
        };
        let step = chol.solve(&(-jtr));
        let mut trial = p;
        for k in 0..6 {
            trial.0[k] += step[k];
        }
        let p_norm = p.0.iter().map(|x| x * x).sum::<f64>().sqrt();
        let small_step = step.norm() <= XTOL * (p_norm + XTOL);
        if trial.0[5].abs() < 1e-9 || !trial.0.iter().all(|x| x.is_finite()) {
            lambda *= nu;
            nu *= 2.0;
            continue;
        }
        let r_trial = problem.residuals(&trial);
        let cost_trial = r_trial.norm_squared();
        // Gain ratio against the linearised model.
        let predicted = -(2.0 * step.dot(&jtr) + step.dot(&(jtj * step)));
        let rho = if predicted > 0.0 { (cost - cost_trial) / predicted } else { -1.0 };
        if cost_trial < cost {
            p = trial;
            r = r_trial;
            cost = cost_trial;
            j = problem.jacobian(&p);
            jtj = (j.transpose() * &j).fixed_view::<6, 6>(0, 0).into_owned();
            jtr = (j.transpose() * &r).fixed_rows::<6>(0).into_owned();
            lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
        } else {
            lambda *= nu;
            nu *= 2.0;
        }
        if small_step {
            return LmOutcome { params: p, cost, stopped: true, iterations: iter + 1 };
        }
        if !lambda.is_finite() {
            break;
        }
    }
    LmOutcome { params: p, cost, stopped: false, iterations: max_iter }
}

/// Fits the surrogate to windowed `(q, v)` data.
///
/// Non-convergence is reported through [`SurrogateFit::converged`] with the
/// best parameters found; only malformed input is an error.
pub fn fit_positive_surrogate(q: &[f64], v: &[f64], hints: &FitHints, options: &FitOptions) -> Result<SurrogateFit> {
    if q.len() != v.len() {
        return Err(Error::InvalidParams(format!(
            "charge and voltage lengths differ ({} vs {})",
            q.len(),
            v.len()
        )));
    }
    if q.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_FIT_SAMPLES,
            got: q.len(),
        });
    }
    let (lo, hi) = (q[0], q[q.len() - 1]);
    if !(hi > lo) || q.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("charge span is empty or data is not finite".into()));
    }
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let problem = Problem {
        x: q.iter().map(|&x| (x - mid) / half).collect(),
        v,
    };

    let quad = quadratic_fit(&problem.x, v);
    let e0 = hints.e.unwrap_or_else(|| steepest_descent(q, v));
    let f0 = hints.f_fraction * (hi - lo);
    let start = Scaled([quad[0], quad[1], quad[2], hints.d, (e0 - mid) / half, f0 / half]);
    let nested = Scaled([quad[0], quad[1], quad[2], 0.0, start.0[4], start.0[5]]);
    let nested_cost = problem.residuals(&nested).norm_squared();

    let lm = levenberg_marquardt(&problem, start, options.max_iter);
    let v_scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // The quadratic alone attains the optimum: the step term is absent.
    let tie = (f64::EPSILON * v_scale).powi(2) * 1e4 * q.len() as f64;
    let (mut p, stopped, iterations) = if nested_cost <= lm.cost * (1.0 + 1e-6) + tie {
        (nested, true, lm.iterations)
    } else {
        (lm.params, lm.stopped, lm.iterations)
    };
    if p.0[5] < 0.0 {
        p.0[3] = -p.0[3];
        p.0[5] = -p.0[5];
    }

    let r = problem.residuals(&p);
    let gradient_norm = scaled_gradient(&problem.jacobian(&p), &r);
    let residual_rms = (r.norm_squared() / q.len() as f64).sqrt();
    let [a_s, b_s, c_s, d, e_s, f_s] = p.0;
    let c = c_s / (half * half);
    let b = b_s / half - 2.0 * c_s * mid / (half * half);
    let a = a_s - b_s * mid / half + c_s * mid * mid / (half * half);
    Ok(SurrogateFit {
        a,
        b,
        c,
        d,
        e: mid + half * e_s,
        f: half * f_s,
        residual_rms,
        converged: stopped && residual_rms.is_finite() && residual_rms <= options.fit_tol && gradient_norm < GRADIENT_TOL,
        rank_deficient: d.abs() < RANK_DEFICIENT_D,
        gradient_norm,
        iterations,
    })
}
