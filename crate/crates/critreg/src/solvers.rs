//! Iterative routes to critical points of Tikhonov functionals.
//!
//! Three solvers with one report format:
//!
//! * [`rel_subgradient_descent`] follows a clipped relative subgradient
//!   with a chosen step schedule. No descent per step is guaranteed; the
//!   value of the best iterate is what the theory bounds, so the report
//!   carries `best_x` alongside `final_x`.
//! * [`nesterov`] is the accelerated gradient iteration with a fixed step
//!   `1/L`, where `L` combines a power-iteration norm of `K^* K` with the
//!   worst diagonal curvature of the penalty at the restart point. The
//!   momentum is restarted whenever the objective would increase.
//! * [`newton`] solves the critical-point equation `z(x) = 0` with damped
//!   Newton steps on the merit `||z||^2`, materializing `K^* K` once.
//!
//! All three treat the gradient of the Tikhonov functional,
//! `z = K^*(K x - y) + alpha R'(x)`, as the inexactness certificate: the
//! report records `||z||` and the sign `<z, x> <= 0` at the final iterate,
//! and [`check_inexact`] re-evaluates both for any candidate point.

use crate::discrepancy::NormDiscrepancy;
use crate::error::{Error, Result};
use crate::linalg::solve_lu;
use crate::operator::LinearForwardOperator;
use crate::regularizers::Regularizer;
use crate::vector::RealVector;

/// Default clipping bound for the subgradient method.
pub const DEFAULT_CLIP_BOUND: f64 = 1e3;

/// Largest dimension at which Newton materializes the normal matrix.
pub const NEWTON_DENSE_CAP: usize = 4096;

/// Newton's convergence also asks the step to be small relative to the
/// iterate. This keeps kernel coordinates honest at tiny `alpha`, where
/// the gradient norm alone cannot see them.
const NEWTON_STEP_TOL: f64 = 1e-12;

const NEWTON_MAX_BACKTRACKS: usize = 30;

/// The Tikhonov functional `S(x, data) + alpha * R(x)`.
#[derive(Clone, Debug)]
pub struct TikhonovProblem<R: Regularizer> {
    discrepancy: NormDiscrepancy,
    regularizer: R,
    alpha: f64,
    data: RealVector,
}

impl<R: Regularizer> TikhonovProblem<R> {
    pub fn new(
        discrepancy: NormDiscrepancy,
        regularizer: R,
        alpha: f64,
        data: RealVector,
    ) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
        }
        if data.len() != discrepancy.operator().range_dim() {
            return Err(Error::dim(
                "tikhonov data",
                discrepancy.operator().range_dim(),
                data.len(),
            ));
        }
        Ok(TikhonovProblem {
            discrepancy,
            regularizer,
            alpha,
            data,
        })
    }

    pub fn operator(&self) -> &LinearForwardOperator {
        self.discrepancy.operator()
    }

    pub fn regularizer(&self) -> &R {
        &self.regularizer
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn data(&self) -> &RealVector {
        &self.data
    }

    pub fn domain_dim(&self) -> usize {
        self.operator().domain_dim()
    }

    /// `S(x, data) + alpha R(x)`.
    pub fn value(&self, x: &RealVector) -> Result<f64> {
        Ok(self.discrepancy.value(x, &self.data)? + self.alpha * self.regularizer.value(x))
    }

    /// The certificate `z = grad S + alpha R'(x)`.
    pub fn gradient(&self, x: &RealVector) -> Result<RealVector> {
        let g = self.discrepancy.gradient(x, &self.data)?;
        Ok(g.add_scaled(self.alpha, &self.regularizer.rel_subgradient(x)))
    }

    fn diag_curvature_required(&self, x: &RealVector) -> Result<RealVector> {
        self.regularizer.diag_curvature(x).ok_or_else(|| {
            Error::Unsupported(
                "this solver needs a diagonal curvature estimate from the regularizer".into(),
            )
        })
    }
}

/// Step-size schedules for the subgradient method, indexed from `n = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    /// `eta_n = c`.
    Constant(f64),
    /// `eta_n = c / sqrt(n)`: square sum diverges logarithmically.
    DiminishingSqrt(f64),
    /// `eta_n = c / n`: square-summable but not summable.
    SquareSummable(f64),
}

impl StepSchedule {
    fn base(&self) -> f64 {
        match *self {
            StepSchedule::Constant(c)
            | StepSchedule::DiminishingSqrt(c)
            | StepSchedule::SquareSummable(c) => c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.base();
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::param("schedule", format!("step constant must be positive, got {c}")));
        }
        Ok(())
    }

    /// Step for iteration `n >= 1`.
    pub fn step(&self, n: usize) -> f64 {
        assert!(n >= 1, "schedules are indexed from 1");
        match *self {
            StepSchedule::Constant(c) => c,
            StepSchedule::DiminishingSqrt(c) => c / (n as f64).sqrt(),
            StepSchedule::SquareSummable(c) => c / n as f64,
        }
    }
}

/// Why a solve stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// The stopping tolerance was met.
    Tolerance,
    /// The iteration budget ran out.
    MaxIter,
    /// Backtracking could not find an acceptable step.
    StallDetected,
}

/// Outcome of one solver run.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub final_x: RealVector,
    /// Iterate with the smallest recorded objective value.
    pub best_x: RealVector,
    /// Index of `best_x` in `objective_history`.
    pub best_index: usize,
    pub iterations: usize,
    /// Objective at the start point followed by every accepted iterate.
    pub objective_history: Vec<f64>,
    /// `||z||` at `final_x`.
    pub grad_norm: f64,
    /// `<z, final_x> <= 0`.
    pub sign_ok: bool,
    pub converged: bool,
    pub termination: Termination,
    /// How many subgradient steps had their length clipped to the bound.
    pub clipped_steps: usize,
}

impl SolveReport {
    /// Smallest recorded objective value.
    pub fn best_value(&self) -> f64 {
        self.objective_history[self.best_index]
    }
}

/// Relative subgradient descent with clipped steps.
///
/// Updates `x_{n+1} = x_n - eta_n * lambda_n * g_n` where `g_n` is the
/// supplied subgradient selection and `lambda_n = min(1, clip_c/||g_n||)`,
/// so steps never exceed `clip_c` in subgradient length and the descent
/// bound applies verbatim whenever no clipping occurred (see
/// `clipped_steps` in the report). Stops early when the subgradient is
/// zero at machine scale relative to the objective; the scale is capped
/// by the running best value so an exploding objective cannot loosen the
/// tolerance into a false stop.
pub fn rel_subgradient_descent(
    value: impl Fn(&RealVector) -> f64,
    subgradient: impl Fn(&RealVector) -> RealVector,
    x0: &RealVector,
    schedule: StepSchedule,
    clip_c: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    schedule.validate()?;
    if !(clip_c > 0.0) || !clip_c.is_finite() {
        return Err(Error::param("clip_c", format!("must be positive, got {clip_c}")));
    }
    if max_iter < 1 {
        return Err(Error::param("max_iter", "must be at least 1"));
    }

    let mut x = x0.clone();
    let mut f = value(&x);
    if !f.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            context: "relative subgradient descent: non-finite start value".into(),
        });
    }
    let mut history = vec![f];
    let mut best_x = x.clone();
    let mut best_f = f;
    let mut best_index = 0;
    let mut clipped = 0usize;
    let mut iterations = 0usize;
    let mut termination = Termination::MaxIter;

    for n in 1..=max_iter {
        let g = subgradient(&x);
        let ng = g.norm();
        if ng <= 1e-14 * (1.0 + f.abs().min(best_f.abs())) {
            termination = Termination::Tolerance;
            break;
        }
        let lambda = if ng > clip_c {
            clipped += 1;
            clip_c / ng
        } else {
            1.0
        };
        x = x.add_scaled(-schedule.step(n) * lambda, &g);
        f = value(&x);
        if !f.is_finite() || !x.is_all_finite() {
            return Err(Error::Divergence {
                iteration: n,
                context: "relative subgradient descent".into(),
            });
        }
        history.push(f);
        iterations = n;
        if f < best_f {
            best_f = f;
            best_x = x.clone();
            best_index = history.len() - 1;
        }
    }

    let z = subgradient(&x);
    let grad_norm = z.norm();
    let sign_ok = z.dot(&x) <= 0.0;
    let converged = termination == Termination::Tolerance;
    Ok(SolveReport {
        final_x: x,
        best_x,
        best_index,
        iterations,
        objective_history: history,
        grad_norm,
        sign_ok,
        converged,
        termination,
        clipped_steps: clipped,
    })
}

/// Accelerated gradient descent with function-value restarts.
///
/// The step is the fixed `1/L` with
/// `L = ||K^* K|| + alpha * max_i |curvature_i|`, the curvature taken at
/// the start point and refreshed at every restart. When even a
/// momentum-free step increases the objective (the curvature estimate was
/// too optimistic), `L` is doubled before retrying, so the accepted
/// objective history is strictly decreasing.
pub fn nesterov<R: Regularizer>(
    problem: &TikhonovProblem<R>,
    x0: &RealVector,
    max_iter: usize,
    grad_tol: f64,
) -> Result<SolveReport> {
    if x0.len() != problem.domain_dim() {
        return Err(Error::dim("nesterov start", problem.domain_dim(), x0.len()));
    }
    let normal_norm = problem.operator().normal_operator_norm();
    let fresh_l = |p: &TikhonovProblem<R>, at: &RealVector| -> Result<f64> {
        let curv = p.diag_curvature_required(at)?;
        let l = normal_norm + p.alpha() * curv.norm_inf();
        Ok(if l > 0.0 { l } else { 1.0 })
    };

    let mut lipschitz = fresh_l(problem, x0)?;
    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut f = problem.value(&x)?;
    if !f.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            context: "nesterov: non-finite start value".into(),
        });
    }
    let mut history = vec![f];
    let mut best_x = x.clone();
    let mut best_f = f;
    let mut best_index = 0;
    let mut t = 1.0_f64;
    let mut iterations = 0usize;
    let mut termination = Termination::MaxIter;

    for n in 1..=max_iter {
        let z = problem.gradient(&x)?;
        if z.norm() <= grad_tol {
            termination = Termination::Tolerance;
            break;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let y = if beta == 0.0 {
            x.clone()
        } else {
            x.add_scaled(beta, &x.sub(&x_prev))
        };
        let zy = problem.gradient(&y)?;
        let x_new = y.add_scaled(-1.0 / lipschitz, &zy);
        if !x_new.is_all_finite() {
            return Err(Error::Divergence {
                iteration: n,
                context: "nesterov".into(),
            });
        }
        let f_new = problem.value(&x_new)?;
        if !f_new.is_finite() {
            return Err(Error::Divergence {
                iteration: n,
                context: "nesterov".into(),
            });
        }
        iterations = n;
        if f_new > f {
            if t == 1.0 {
                // A plain gradient step overshot: the local curvature grew
                // past the estimate, so back off the step.
                lipschitz *= 2.0;
            } else {
                t = 1.0;
                lipschitz = fresh_l(problem, &x)?;
            }
            continue;
        }
        x_prev = x;
        x = x_new;
        f = f_new;
        t = t_next;
        history.push(f);
        if f < best_f {
            best_f = f;
            best_x = x.clone();
            best_index = history.len() - 1;
        }
    }

    let z = problem.gradient(&x)?;
    let grad_norm = z.norm();
    let sign_ok = z.dot(&x) <= 0.0;
    let converged = termination == Termination::Tolerance;
    Ok(SolveReport {
        final_x: x,
        best_x,
        best_index,
        iterations,
        objective_history: history,
        grad_norm,
        sign_ok,
        converged,
        termination,
        clipped_steps: 0,
    })
}

/// Damped Newton iteration on the critical-point equation, with the
/// default dimension cap for the materialized normal matrix.
pub fn newton<R: Regularizer>(
    problem: &TikhonovProblem<R>,
    x0: &RealVector,
    max_iter: usize,
    grad_tol: f64,
) -> Result<SolveReport> {
    newton_with_cap(problem, x0, max_iter, grad_tol, NEWTON_DENSE_CAP)
}

/// Damped Newton with an explicit dimension cap.
///
/// Each pass solves `J d = -z` with `J = K^* K + alpha diag(curvature)`,
/// then backtracks `s` in `{1, 1/2, 1/4, ...}` until the merit `||z||^2`
/// decreases sufficiently or already sits at the tolerance. A singular
/// factorization is retried once with the shift `mu = 1e-8 trace(J)/n`.
///
/// Convergence requires both `||z|| <= grad_tol` and a relatively small
/// Newton step; when both hold the final step is still taken, which
/// squares away most of the remaining error.
pub fn newton_with_cap<R: Regularizer>(
    problem: &TikhonovProblem<R>,
    x0: &RealVector,
    max_iter: usize,
    grad_tol: f64,
    dense_cap: usize,
) -> Result<SolveReport> {
    let n = problem.domain_dim();
    if x0.len() != n {
        return Err(Error::dim("newton start", n, x0.len()));
    }
    if n > dense_cap {
        return Err(Error::Unsupported(format!(
            "newton materializes the normal matrix; dimension {n} exceeds the cap {dense_cap}"
        )));
    }
    let normal = problem.operator().normal_matrix();

    let mut x = x0.clone();
    let mut f = problem.value(&x)?;
    if !f.is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            context: "newton: non-finite start value".into(),
        });
    }
    let mut history = vec![f];
    let mut best_x = x.clone();
    let mut best_f = f;
    let mut best_index = 0;
    let mut iterations = 0usize;
    let mut termination = Termination::MaxIter;
    let mut converged = false;

    for pass in 1..=max_iter {
        let z = problem.gradient(&x)?;
        let nz = z.norm();
        if nz == 0.0 {
            termination = Termination::Tolerance;
            converged = true;
            break;
        }

        let curv = problem.diag_curvature_required(&x)?;
        let mut jac = normal.clone();
        let scaled: Vec<f64> = curv.iter().map(|c| problem.alpha() * c).collect();
        jac.add_diagonal(&scaled);
        let neg_z: Vec<f64> = z.iter().map(|v| -v).collect();
        let d_raw = match solve_lu(&jac, &neg_z) {
            Some(d) => d,
            None => {
                let mu = 1e-8 * jac.trace() / n as f64;
                jac.add_scaled_identity(mu);
                solve_lu(&jac, &neg_z).ok_or_else(|| {
                    Error::SingularSystem(format!(
                        "newton system at iteration {pass} singular even after shift {mu:e}"
                    ))
                })?
            }
        };
        if !d_raw.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularSystem(format!(
                "newton direction non-finite at iteration {pass}"
            )));
        }
        let d = RealVector::new(d_raw).expect("finiteness checked above");
        let stop_after_step =
            nz <= grad_tol && d.norm() <= NEWTON_STEP_TOL * (1.0 + x.norm());

        let mut s = 1.0_f64;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_BACKTRACKS {
            let cand = x.add_scaled(s, &d);
            if cand.is_all_finite() {
                match problem.gradient(&cand) {
                    Ok(z_try) => {
                        let nt = z_try.norm();
                        if nt.is_finite()
                            && (nt * nt <= nz * nz * (1.0 - 1e-4 * s) || nt <= grad_tol)
                        {
                            x = cand;
                            accepted = true;
                            break;
                        }
                    }
                    // Overflow inside the evaluation counts as a rejected
                    // step, not a solver failure.
                    Err(Error::NonFinite(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            s *= 0.5;
        }
        if !accepted {
            termination = Termination::StallDetected;
            converged = nz <= grad_tol;
            break;
        }

        iterations += 1;
        f = problem.value(&x)?;
        if !f.is_finite() {
            return Err(Error::Divergence {
                iteration: pass,
                context: "newton".into(),
            });
        }
        history.push(f);
        if f < best_f {
            best_f = f;
            best_x = x.clone();
            best_index = history.len() - 1;
        }
        if stop_after_step {
            termination = Termination::Tolerance;
            converged = true;
            break;
        }
    }

    let z = problem.gradient(&x)?;
    let grad_norm = z.norm();
    let sign_ok = z.dot(&x) <= 0.0;
    Ok(SolveReport {
        final_x: x,
        best_x,
        best_index,
        iterations,
        objective_history: history,
        grad_norm,
        sign_ok,
        converged,
        termination,
        clipped_steps: 0,
    })
}

/// The two inexactness conditions evaluated at a candidate point.
#[derive(Clone, Copy, Debug)]
pub struct InexactReport {
    /// `||z|| / alpha`.
    pub ratio: f64,
    /// `ratio <= ratio_tol`.
    pub norm_ok: bool,
    /// `<z, x> <= 0`.
    pub sign_ok: bool,
}

/// Evaluates the inexactness certificate at `x`.
pub fn check_inexact<R: Regularizer>(
    problem: &TikhonovProblem<R>,
    x: &RealVector,
    ratio_tol: f64,
) -> Result<InexactReport> {
    let z = problem.gradient(x)?;
    let ratio = z.norm() / problem.alpha();
    Ok(InexactReport {
        ratio,
        norm_ok: ratio <= ratio_tol,
        sign_ok: z.dot(x) <= 0.0,
    })
}
