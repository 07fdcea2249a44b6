//! Scaled conjugate gradient minimization.
//!
//! Full-batch conjugate gradient where the line search is replaced by a
//! one-sided finite-difference estimate of the local curvature along the
//! search direction, regularized by a Levenberg-Marquardt style scale
//! parameter that grows when a step fails to reduce the loss and shrinks when
//! the quadratic model is trustworthy. Directions restart to steepest descent
//! every `dim` accepted iterations and whenever conjugacy stops producing a
//! descent direction.

use crate::error::{Error, Result};

/// Objective with an exact gradient.
pub trait ScgObjective {
    fn dim(&self) -> usize;
    /// Loss at `params`.
    fn eval(&self, params: &[f64]) -> f64;
    /// Loss at `params`, writing the gradient into `grad`.
    fn eval_grad(&self, params: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct ScgOptions {
    pub max_iters: usize,
    /// Terminate when the gradient infinity norm falls below this.
    pub grad_tol: f64,
    /// Relative offset for the curvature probe.
    pub sigma0: f64,
    /// Initial scale (trust) parameter.
    pub lambda0: f64,
}

impl Default for ScgOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-6,
            sigma0: 1e-4,
            lambda0: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScgOutcome {
    pub params: Vec<f64>,
    /// Initial loss followed by the loss after each accepted step.
    pub loss_history: Vec<f64>,
    /// Number of accepted steps.
    pub iterations: usize,
    /// Whether the gradient tolerance was met.
    pub converged: bool,
    /// Steepest-descent restarts (periodic and non-descent).
    pub restarts: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `objective` starting from `x0`.
///
/// Errors with [`Error::NonFiniteLoss`] if the loss or gradient stops being
/// finite. The returned loss history is non-increasing.
pub fn minimize<O: ScgObjective>(
    objective: &O,
    x0: Vec<f64>,
    opts: &ScgOptions,
) -> Result<ScgOutcome> {
    let dim = objective.dim();
    assert_eq!(x0.len(), dim, "initial point dimension mismatch");
    assert!(opts.max_iters >= 1);

    let mut w = x0;
    let mut grad = vec![0.0f64; dim];
    let mut loss = objective.eval_grad(&w, &mut grad);
    check_finite(loss, &grad, 0)?;

    let mut r: Vec<f64> = grad.iter().map(|g| -g).collect(); // r = -grad
    let mut p = r.clone();
    let mut loss_history = vec![loss];
    let mut lambda = opts.lambda0;
    let mut lambda_bar = 0.0f64;
    let mut iterations = 0usize;
    let mut restarts = 0usize;
    let mut converged = false;

    let mut need_curvature = true;
    let mut delta_raw = 0.0f64;
    let mut probe = vec![0.0f64; dim];
    let mut probe_grad = vec![0.0f64; dim];

    loop {
        if inf_norm(&r) < opts.grad_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }

        let p_norm_sq = dot(&p, &p);
        if p_norm_sq == 0.0 {
            converged = inf_norm(&r) < opts.grad_tol;
            break;
        }

        if need_curvature {
            // curvature along p from a forward gradient difference
            let sigma = opts.sigma0 / p_norm_sq.sqrt();
            for i in 0..dim {
                probe[i] = w[i] + sigma * p[i];
            }
            let probe_loss = objective.eval_grad(&probe, &mut probe_grad);
            check_finite(probe_loss, &probe_grad, iterations)?;
            delta_raw = (0..dim)
                .map(|i| p[i] * (probe_grad[i] - grad[i]) / sigma)
                .sum();
            need_curvature = false;
        }

        // scale the curvature; force positive definiteness
        let mut delta = delta_raw + (lambda - lambda_bar) * p_norm_sq;
        if delta <= 0.0 {
            lambda_bar = 2.0 * (lambda - delta / p_norm_sq);
            delta = -delta + lambda * p_norm_sq;
            lambda = lambda_bar;
        }

        let mu = dot(&p, &r);
        let alpha = mu / delta;
        for i in 0..dim {
            probe[i] = w[i] + alpha * p[i];
        }
        let candidate_loss = objective.eval(&probe);
        if !candidate_loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: iterations });
        }

        // comparison parameter: quality of the quadratic approximation
        let delta_cmp = 2.0 * delta * (loss - candidate_loss) / (mu * mu);

        if delta_cmp >= 0.0 {
            // accepted step
            std::mem::swap(&mut w, &mut probe);
            loss = objective.eval_grad(&w, &mut grad);
            check_finite(loss, &grad, iterations)?;
            let r_new: Vec<f64> = grad.iter().map(|g| -g).collect();
            iterations += 1;
            loss_history.push(loss);
            lambda_bar = 0.0;
            need_curvature = true;

            if iterations % dim == 0 {
                // periodic restart to steepest descent
                p.copy_from_slice(&r_new);
                restarts += 1;
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &r)) / mu;
                for i in 0..dim {
                    p[i] = r_new[i] + beta * p[i];
                }
                // conjugate direction must remain a descent direction
                if dot(&p, &r_new) <= 0.0 {
                    p.copy_from_slice(&r_new);
                    restarts += 1;
                }
            }
            r = r_new;

            if delta_cmp >= 0.75 {
                lambda *= 0.25;
            }
        } else {
            // rejected: raise the scale parameter and retry the direction
            lambda_bar = lambda;
        }

        if delta_cmp < 0.25 {
            lambda += delta * (1.0 - delta_cmp) / p_norm_sq;
        }
        if !lambda.is_finite() || lambda > 1e120 {
            break; // scale exploded; no useful step remains
        }
    }

    Ok(ScgOutcome {
        params: w,
        loss_history,
        iterations,
        converged,
        restarts,
    })
}

fn check_finite(loss: f64, grad: &[f64], iteration: usize) -> Result<()> {
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss { iteration });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    /// f(x) = 1/2 x^T A x - b^T x with SPD A.
    struct Quadratic {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    }

    impl Quadratic {
        fn random(dim: usize, seed: u64) -> Self {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m: Vec<Vec<f64>> = (0..dim)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            // A = M^T M / dim + I, symmetric positive definite
            let mut a = vec![vec![0.0; dim]; dim];
            for i in 0..dim {
                for j in 0..dim {
                    let mut s = 0.0;
                    for row in &m {
                        s += row[i] * row[j];
                    }
                    a[i][j] = s / dim as f64 + if i == j { 1.0 } else { 0.0 };
                }
            }
            let b = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Self { a, b }
        }

        /// Solves A x = b by Gaussian elimination (independent oracle).
        fn minimum(&self) -> Vec<f64> {
            let n = self.b.len();
            let mut m: Vec<Vec<f64>> = self
                .a
                .iter()
                .zip(&self.b)
                .map(|(row, &bi)| {
                    let mut r = row.clone();
                    r.push(bi);
                    r
                })
                .collect();
            for col in 0..n {
                let pivot = (col..n)
                    .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
                    .unwrap();
                m.swap(col, pivot);
                let diag = m[col][col];
                for i in 0..n {
                    if i != col {
                        let factor = m[i][col] / diag;
                        for j in col..=n {
                            m[i][j] -= factor * m[col][j];
                        }
                    }
                }
            }
            (0..n).map(|i| m[i][n] / m[i][i]).collect()
        }
    }

    impl ScgObjective for Quadratic {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn eval(&self, x: &[f64]) -> f64 {
            let mut quad = 0.0;
            for (i, row) in self.a.iter().enumerate() {
                quad += x[i] * dot(row, x);
            }
            0.5 * quad - dot(&self.b, x)
        }
        fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            for (g, row) in grad.iter_mut().zip(&self.a) {
                *g = dot(row, x);
            }
            let loss = 0.5 * dot(grad, x) - dot(&self.b, x);
            for (g, &bi) in grad.iter_mut().zip(&self.b) {
                *g -= bi;
            }
            loss
        }
    }

    #[test]
    fn converges_on_spd_quadratic_within_60_iterations() {
        let q = Quadratic::random(20, 17);
        let opts = ScgOptions {
            max_iters: 60,
            grad_tol: 1e-6,
            ..Default::default()
        };
        let out = minimize(&q, vec![0.0; 20], &opts).unwrap();
        assert!(out.converged, "did not converge in {} iters", out.iterations);
        assert!(out.iterations <= 60);
        let mut grad = vec![0.0; 20];
        q.eval_grad(&out.params, &mut grad);
        assert!(inf_norm(&grad) < 1e-6);
        // against the closed-form minimum A^{-1} b
        let star = q.minimum();
        let gap = out.loss_history.last().unwrap() - q.eval(&star);
        assert!(gap.abs() < 1e-10, "loss gap {gap}");
    }

    #[test]
    fn stationary_start_terminates_immediately() {
        let q = Quadratic::random(8, 3);
        let star = q.minimum();
        let out = minimize(&q, star.clone(), &ScgOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.loss_history.len(), 1);
        assert_eq!(out.params, star);
    }

    #[test]
    fn loss_history_is_non_increasing() {
        for seed in 0..5 {
            let q = Quadratic::random(12, seed);
            let out = minimize(&q, vec![1.0; 12], &ScgOptions::default()).unwrap();
            for pair in out.loss_history.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-15, "{} -> {}", pair[0], pair[1]);
            }
        }
    }

    /// Rosenbrock in 2-D: non-convex, exercises rejected steps and restarts.
    struct Rosenbrock;
    impl ScgObjective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            grad[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
            grad[1] = 200.0 * (x[1] - x[0] * x[0]);
            self.eval(x)
        }
    }

    #[test]
    fn makes_progress_on_rosenbrock() {
        let opts = ScgOptions {
            max_iters: 2000,
            grad_tol: 1e-8,
            ..Default::default()
        };
        let out = minimize(&Rosenbrock, vec![-1.2, 1.0], &opts).unwrap();
        let final_loss = *out.loss_history.last().unwrap();
        assert!(final_loss < 1e-10, "final loss {final_loss}");
        assert!((out.params[0] - 1.0).abs() < 1e-4);
        for pair in out.loss_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15);
        }
    }

    #[test]
    fn non_finite_loss_aborts_with_diagnostic() {
        struct Sqrt;
        impl ScgObjective for Sqrt {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, x: &[f64]) -> f64 {
                x[0].sqrt() // NaN for negative x
            }
            fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
                grad[0] = 0.5 / x[0].sqrt();
                self.eval(x)
            }
        }
        // gradient at 1.0 pushes x negative with a big enough step
        let err = minimize(&Sqrt, vec![1e-12], &ScgOptions::default());
        assert!(matches!(err, Err(Error::NonFiniteLoss { .. })));
    }
}
