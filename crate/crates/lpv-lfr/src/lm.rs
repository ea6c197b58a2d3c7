//! Shared Levenberg-Marquardt engine for nonlinear least squares.
//!
//! The Jacobian is column-norm scaled before damping so that directions
//! made nearly rank-deficient by block-oriented gain non-uniqueness are
//! handled by the damping term instead of corrupting the step. Accepted
//! steps strictly decrease the cost; trial steps whose residuals cannot be
//! evaluated (diverging simulations) are rejected by raising the damping.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait LeastSquaresProblem {
    fn param_count(&self) -> usize;

    /// Residual vector at `params`, or `None` when it cannot be evaluated
    /// (e.g. the trial model diverges).
    fn residuals(&self, params: &DVector<f64>) -> Option<DVector<f64>>;

    /// Jacobian of the residuals with respect to the parameters.
    fn jacobian(&self, params: &DVector<f64>) -> Option<DMatrix<f64>>;
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iter: usize,
    pub lambda_init: f64,
    pub lambda_max: f64,
    /// Terminate when the relative cost decrease of an accepted step falls
    /// below this value.
    pub cost_tol: f64,
    /// Terminate when the infinity norm of the mean-cost gradient falls
    /// below this value.
    pub grad_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 100,
            lambda_init: 1e-3,
            lambda_max: 1e12,
            cost_tol: 1e-10,
            grad_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative cost change dropped below `cost_tol`.
    CostTol,
    /// Gradient norm dropped below `grad_tol`.
    GradTol,
    MaxIter,
    /// No acceptable step exists at the damping cap.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    /// Best parameters found (the last accepted ones).
    pub params: DVector<f64>,
    /// Mean squared residual at `params`.
    pub cost: f64,
    /// Accepted costs, starting with the initial cost. Non-increasing.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

/// Minimizes the mean squared residual starting from `x0`.
///
/// Fails only when the initial residuals cannot be evaluated; stalling at
/// the damping cap is reported through [`Termination::Stalled`] with the
/// best parameters retained.
pub fn minimize(
    problem: &dyn LeastSquaresProblem,
    x0: DVector<f64>,
    opts: &LmOptions,
) -> Result<LmOutcome> {
    let p = problem.param_count();
    if x0.len() != p {
        return Err(Error::dim("x0", p, x0.len()));
    }
    let mut params = x0;
    let mut residual = problem.residuals(&params).ok_or_else(|| {
        Error::InvalidInput("initial parameters do not produce finite residuals".into())
    })?;
    let n_res = residual.len() as f64;
    if n_res == 0.0 {
        return Err(Error::InvalidInput("empty residual vector".into()));
    }
    let mut cost = residual.norm_squared() / n_res;
    let mut history = vec![cost];
    let mut lambda = opts.lambda_init;
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;

    'outer: for iter in 1..=opts.max_iter {
        iterations = iter;
        let jac = match problem.jacobian(&params) {
            Some(j) => j,
            None => {
                termination = Termination::Stalled;
                break;
            }
        };

        let jt = jac.transpose();
        let gradient = &jt * &residual * (2.0 / n_res);
        if gradient.amax() < opts.grad_tol {
            termination = Termination::GradTol;
            break;
        }

        let jtj = &jt * &jac;
        let jtr = &jt * &residual;

        // Column-norm scaling of the Jacobian.
        let mut scale = DVector::from_iterator(p, jac.column_iter().map(|c| c.norm()));
        let smax = scale.max();
        let floor = (smax * 1e-14).max(f64::MIN_POSITIVE);
        for s in scale.iter_mut() {
            if *s < floor {
                *s = floor;
            }
        }

        loop {
            let mut system = DMatrix::zeros(p, p);
            for i in 0..p {
                for k in 0..p {
                    system[(i, k)] = jtj[(i, k)] / (scale[i] * scale[k]);
                }
                system[(i, i)] += lambda;
            }
            let rhs = DVector::from_fn(p, |i, _| -jtr[i] / scale[i]);

            let trial = match system.cholesky() {
                Some(chol) => {
                    let delta_scaled = chol.solve(&rhs);
                    let delta = DVector::from_fn(p, |i, _| delta_scaled[i] / scale[i]);
                    Some(&params + delta)
                }
                None => None,
            };
            let evaluated = trial.and_then(|t| {
                problem.residuals(&t).map(|r| {
                    let c = r.norm_squared() / n_res;
                    (t, r, c)
                })
            });

            match evaluated {
                Some((trial_params, trial_residual, trial_cost))
                    if trial_cost.is_finite() && trial_cost < cost =>
                {
                    let rel_drop = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                    params = trial_params;
                    residual = trial_residual;
                    cost = trial_cost;
                    history.push(cost);
                    lambda = (lambda / 3.0).max(1e-12);
                    if rel_drop < opts.cost_tol || cost == 0.0 {
                        termination = Termination::CostTol;
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    if lambda >= opts.lambda_max {
                        termination = Termination::Stalled;
                        break 'outer;
                    }
                    lambda = (lambda * 10.0).min(opts.lambda_max);
                }
            }
        }
    }

    Ok(LmOutcome {
        params,
        cost,
        cost_history: history,
        iterations,
        termination,
    })
}

/// Forward-difference Jacobian of `residuals` around `params`.
pub fn finite_difference_jacobian(
    residuals: &dyn Fn(&DVector<f64>) -> Option<DVector<f64>>,
    params: &DVector<f64>,
) -> Option<DMatrix<f64>> {
    let base = residuals(params)?;
    let n = base.len();
    let p = params.len();
    let mut jac = DMatrix::zeros(n, p);
    let sqrt_eps = f64::EPSILON.sqrt();
    for i in 0..p {
        let h = sqrt_eps * params[i].abs().max(1.0);
        let mut shifted = params.clone();
        shifted[i] += h;
        let r = residuals(&shifted)?;
        for t in 0..n {
            jac[(t, i)] = (r[t] - base[t]) / h;
        }
    }
    Some(jac)
}
