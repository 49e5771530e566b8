//! Small dense nonlinear least squares (damped Gauss-Newton / Levenberg-Marquardt).
//!
//! Sized for models with a handful of parameters, so the normal equations are
//! solved directly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Converged once ‖Jᵀr‖ falls to this value.
    pub gradient_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqSolution {
    pub params: Vec<f64>,
    /// Residual sum of squares at `params`.
    pub sse: f64,
    /// JᵀJ at `params`, row-major n×n.
    pub normal_matrix: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Residual vector and Jacobian of a least-squares problem.
pub trait Problem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// Row-major m×n Jacobian ∂r_i/∂p_j.
    fn jacobian(&self, params: &[f64], out: &mut [f64]);
    /// Parameter vectors outside the model's domain are rejected as steps.
    fn admissible(&self, _params: &[f64]) -> bool {
        true
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Forms JᵀJ and Jᵀr.
fn normal_equations(j: &[f64], r: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let m = r.len();
    let mut jtj = vec![0.0; n * n];
    let mut jtr = vec![0.0; n];
    for i in 0..m {
        let row = &j[i * n..(i + 1) * n];
        for a in 0..n {
            jtr[a] += row[a] * r[i];
            for b in 0..n {
                jtj[a * n + b] += row[a] * row[b];
            }
        }
    }
    (jtj, jtr)
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
pub fn solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| m[p * n + col].abs().total_cmp(&m[q * n + col].abs()))
            .unwrap();
        if !(m[piv * n + col].abs() > 1e-14 * scale) {
            return Err(Error::Singular(format!("zero pivot in column {col}")));
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    m[row * n + k] -= f * m[col * n + k];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular("non-finite solution".into()))
    }
}

/// Inverse of a small square matrix (row-major).
pub fn invert(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let col = solve(a, &e)?;
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    Ok(inv)
}

pub fn minimize<P: Problem>(problem: &P, initial: &[f64], opts: &LsqOptions) -> Result<LsqSolution> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    if initial.len() != n {
        return Err(Error::InvalidInput("initial guess has wrong length".into()));
    }
    if m < n {
        return Err(Error::InvalidInput(format!("{m} residuals cannot fix {n} parameters")));
    }
    if !problem.admissible(initial) {
        return Err(Error::InvalidInput("initial guess outside the model domain".into()));
    }

    let mut p = initial.to_vec();
    let mut r = vec![0.0; m];
    let mut j = vec![0.0; m * n];
    let mut trial_r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    let mut sse = sum_sq(&r);
    let mut lambda = opts.initial_damping;
    let mut trace = Vec::new();

    for iter in 0..opts.max_iterations {
        problem.jacobian(&p, &mut j);
        let (jtj, jtr) = normal_equations(&j, &r, n);
        let grad = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !grad.is_finite() || !sse.is_finite() {
            return Err(Error::FitFailed {
                reason: "non-finite residuals".into(),
                iterations: iter,
                trace,
            });
        }
        if grad <= opts.gradient_tolerance {
            return Ok(LsqSolution {
                params: p,
                sse,
                normal_matrix: jtj,
                gradient_norm: grad,
                iterations: iter,
            });
        }

        // Damped retries until a step lowers the cost inside the domain.
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for d in 0..n {
                a[d * n + d] += lambda * jtj[d * n + d].max(1e-300);
            }
            let neg: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let step = match solve(&a, &neg) {
                Ok(s) => s,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            if !problem.admissible(&trial) {
                trace.push(format!("iter {iter}: step left the domain, lambda {lambda:.1e}"));
                lambda *= 4.0;
                continue;
            }
            problem.residuals(&trial, &mut trial_r);
            let trial_sse = sum_sq(&trial_r);
            if trial_sse.is_finite() && trial_sse <= sse {
                let unchanged = trial.iter().zip(&p).all(|(a, b)| a == b);
                p = trial;
                std::mem::swap(&mut r, &mut trial_r);
                sse = trial_sse;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if unchanged {
                    // Step below floating-point resolution: nothing left to gain.
                    problem.jacobian(&p, &mut j);
                    let (jtj, jtr) = normal_equations(&j, &r, n);
                    let grad = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
                    return Ok(LsqSolution {
                        params: p,
                        sse,
                        normal_matrix: jtj,
                        gradient_norm: grad,
                        iterations: iter + 1,
                    });
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction remains at any damping: a stationary point
            // to working precision.
            let rel = grad / (sse.sqrt() * jtj.iter().step_by(n + 1).map(|v| v.sqrt()).fold(0.0, f64::max)).max(1e-300);
            if rel < 1e-8 {
                return Ok(LsqSolution {
                    params: p,
                    sse,
                    normal_matrix: jtj,
                    gradient_norm: grad,
                    iterations: iter,
                });
            }
            trace.push(format!("iter {iter}: no acceptable step, gradient {grad:.3e}"));
            return Err(Error::FitFailed {
                reason: "damping exhausted without descent".into(),
                iterations: iter,
                trace,
            });
        }
    }
    problem.jacobian(&p, &mut j);
    let (jtj, jtr) = normal_equations(&j, &r, n);
    let grad = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(LsqSolution {
        params: p,
        sse,
        normal_matrix: jtj,
        gradient_norm: grad,
        iterations: opts.max_iterations,
    })
}
