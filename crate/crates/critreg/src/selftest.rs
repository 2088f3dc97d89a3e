//! Runtime audit suites behind the `selftest` and `bound-check`
//! commands: the same invariants the test suite pins, re-checkable on an
//! installed binary without cargo.

use crate::analysis::{doublewell_closed_form, ellipsoid_build, hull_critical_point, KernelChoice};
use crate::discrepancy::NormDiscrepancy;
use crate::error::Result;
use crate::experiments::{
    records_to_csv, run_stability, ExperimentConfig, ProblemKind, SolverConfig,
};
use crate::network::{random_network, Activation};
use crate::operator::LinearForwardOperator;
use crate::regularizers::{DoubleWell, DoubleWellHull, Regularizer, SeparableQuartic, SquaredNorm};
use crate::rng::Prng;
use crate::solvers::{
    newton, rel_subgradient_descent, StepSchedule, TikhonovProblem, DEFAULT_CLIP_BOUND,
};
use crate::vector::RealVector;

/// Outcome of one module audit.
#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = std::result::Result<String, String>;

fn run_suite(name: &'static str, body: impl FnOnce() -> Check) -> SuiteResult {
    match body() {
        Ok(detail) => SuiteResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => SuiteResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err_str<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn suite_vector_linalg() -> Check {
    let v = err_str(RealVector::new(vec![3.0, 4.0]))?;
    ensure(v.norm() == 5.0, "norm(3,4) != 5")?;
    let m = crate::linalg::DenseMatrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 3.0]])
        .map_err(|e| e.to_string())?;
    let sol = crate::linalg::solve_lu(&m, &[5.0, 10.0]).ok_or("spd solve reported singular")?;
    ensure(
        (sol[0] - 1.0).abs() <= 1e-12 && (sol[1] - 3.0).abs() <= 1e-12,
        "lu solution wrong",
    )?;
    Ok("norm and lu solve agree with hand values".into())
}

fn suite_operator() -> Check {
    let mut rng = Prng::new(0x5e1f_0001);
    let ops = [
        LinearForwardOperator::cumulative_sum(33).map_err(|e| e.to_string())?,
        LinearForwardOperator::mask(33, (0..33).step_by(2).collect()).map_err(|e| e.to_string())?,
        LinearForwardOperator::diagonal(RealVector::from_fn(33, |i| (i as f64 * 0.3).cos())),
    ];
    let mut worst = 0.0f64;
    for op in &ops {
        for _ in 0..50 {
            let x = RealVector::from_fn(op.domain_dim(), |_| rng.next_uniform_symmetric(2.0));
            let y = RealVector::from_fn(op.range_dim(), |_| rng.next_uniform_symmetric(2.0));
            let kx = err_str(op.apply(&x))?;
            let kty = err_str(op.adjoint_apply(&y))?;
            let gap = (kx.dot(&y) - x.dot(&kty)).abs();
            let scale = kx.norm() * y.norm() + x.norm() * kty.norm();
            worst = worst.max(gap / scale.max(1e-300));
            ensure(gap <= 1e-12 * scale, "adjoint identity violated")?;
        }
    }
    Ok(format!("adjoint identity on 150 probes, worst relative gap {worst:.2e}"))
}

fn suite_discrepancy() -> Check {
    let mut rng = Prng::new(0x5e1f_0002);
    let op = LinearForwardOperator::cumulative_sum(6).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for &p in &[1.5, 2.0, 3.0] {
        let disc = NormDiscrepancy::new(op.clone(), p).map_err(|e| e.to_string())?;
        for _ in 0..40 {
            let x = RealVector::from_fn(6, |_| rng.next_uniform_symmetric(2.0));
            let y = RealVector::from_fn(6, |_| rng.next_uniform_symmetric(2.0));
            let g = err_str(disc.gradient(&x, &y))?;
            let h = 1e-6;
            for i in 0..6 {
                let e = RealVector::standard_basis(6, i);
                let fd = (err_str(disc.value(&x.add_scaled(h, &e), &y))?
                    - err_str(disc.value(&x.add_scaled(-h, &e), &y))?)
                    / (2.0 * h);
                let err = (g[i] - fd).abs() / (1.0 + fd.abs());
                worst = worst.max(err);
                ensure(err <= 1e-6, format!("gradient mismatch at p={p}"))?;
            }
        }
    }
    Ok(format!("gradients match finite differences, worst {worst:.2e}"))
}

fn suite_regularizers() -> Check {
    let reg = SeparableQuartic::new(2.0, 0.1).map_err(|e| e.to_string())?;
    let mut rng = Prng::new(0x5e1f_0003);
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let x = RealVector::from_fn(4, |_| rng.next_uniform_symmetric(5.0));
        let u = RealVector::from_fn(4, |_| rng.next_uniform_symmetric(5.0));
        let r = reg.rel_subgradient(&x);
        let slack = reg.value(&u) + reg.phi_bound(&u) - reg.value(&x) - r.dot(&u.sub(&x));
        worst = worst.min(slack);
        ensure(slack >= -1e-9, "relative subgradient inequality violated")?;
    }
    let hull = DoubleWellHull::new(0.75, RealVector::constant(1, 1.0)).map_err(|e| e.to_string())?;
    // Midpoint convexity of the hull on a grid.
    let mut t = -1.0;
    while t <= 2.0 {
        let a = hull.branch_value(t, 1.0);
        let b = hull.branch_value(t + 0.1, 1.0);
        let mid = hull.branch_value(t + 0.05, 1.0);
        ensure(mid <= 0.5 * (a + b) + 1e-12, "hull not convex")?;
        t += 0.05;
    }
    Ok(format!("defining inequality on 200 pairs, worst slack {worst:.2e}"))
}

fn suite_network() -> Check {
    let net = err_str(random_network(5, &[4, 8, 8, 3], Activation::Relu, 0.0))?;
    let mut rng = Prng::new(0x5e1f_0004);
    for _ in 0..20 {
        let x = RealVector::from_fn(4, |_| rng.next_uniform_symmetric(3.0));
        let rem = err_str(net.quasi_remainder(&x))?;
        ensure(rem == 0.0, "zero-bias remainder not exactly zero")?;
    }
    let biased = err_str(random_network(6, &[4, 8, 3], Activation::Relu, 0.5))?;
    let bound = biased.remainder_norm_bound();
    for _ in 0..20 {
        let x = RealVector::from_fn(4, |_| rng.next_uniform_symmetric(50.0));
        let rem = err_str(biased.quasi_remainder(&x))?;
        ensure(rem <= bound + 1e-12, "remainder bound violated")?;
    }
    Ok("zero-bias remainders exact, biased remainders within bound".into())
}

fn suite_solvers() -> Check {
    let op = LinearForwardOperator::diagonal(RealVector::constant(2, 1.0));
    let y = err_str(RealVector::new(vec![1.0, -2.0]))?;
    let p = err_str(TikhonovProblem::new(
        NormDiscrepancy::least_squares(op),
        SquaredNorm,
        1.0,
        y,
    ))?;
    let report = err_str(newton(&p, &RealVector::zeros(2), 50, 1e-12))?;
    ensure(report.converged, "newton failed on the quadratic")?;
    ensure(
        (report.final_x[0] - 0.5).abs() <= 1e-14 && (report.final_x[1] + 1.0).abs() <= 1e-14,
        "newton missed the closed form",
    )?;
    Ok("newton reproduces the quadratic closed form in one step".into())
}

fn suite_analysis() -> Check {
    let mut rng = Prng::new(0x5e1f_0005);
    let dw = DoubleWell::new(0.7, RealVector::constant(5, 1.2)).map_err(|e| e.to_string())?;
    let hull = DoubleWellHull::new(0.7, RealVector::constant(5, 1.2)).map_err(|e| e.to_string())?;
    for _ in 0..40 {
        let k = RealVector::from_fn(5, |_| rng.next_uniform_symmetric(2.0));
        let y = RealVector::from_fn(5, |_| rng.next_uniform_symmetric(3.0));
        let alpha = 10f64.powf(-2.0 * rng.next_f64());
        let x = err_str(doublewell_closed_form(
            &k,
            &y,
            alpha,
            &dw,
            &[KernelChoice::Zero; 5],
        ))?;
        for i in 0..5 {
            if k[i] == 0.0 {
                continue;
            }
            let resid = k[i] * (k[i] * x[i] - y[i]) + alpha * dw.branch_derivative(x[i], 1.2);
            ensure(resid.abs() <= 1e-12 * (1.0 + y[i].abs()), "closed-form residual")?;
        }
        let sol = err_str(hull_critical_point(&k, &y, alpha, &hull))?;
        for i in 0..5 {
            if k[i] == 0.0 {
                continue;
            }
            let resid = k[i] * (k[i] * sol.point[i] - y[i])
                + alpha * hull.branch_derivative(sol.point[i], 1.2);
            ensure(resid.abs() <= 1e-10 * (1.0 + y[i].abs()), "hull residual")?;
        }
    }
    let op = LinearForwardOperator::diagonal(RealVector::constant(1, 1.0));
    let y = err_str(RealVector::new(vec![2.0]))?;
    let e = err_str(ellipsoid_build(&op, &y, 1.0, 1.0))?;
    ensure(e.center().as_slice() == [1.0], "ellipsoid center")?;
    Ok("componentwise residuals below 1e-12 on 40 random diagonal problems".into())
}

fn suite_experiments() -> Check {
    let cfg = ExperimentConfig {
        problem: ProblemKind::Inpainting { drop_fraction: 0.4 },
        n: 16,
        seed: 5,
        fixed_alphas: vec![1e-2],
        q_exponents: vec![1.0],
        delta_exponents: vec![4, 6],
        solver: SolverConfig {
            nesterov_max_iter: 10_000,
            newton_max_iter: 30,
            grad_tol: 1e-10,
        },
        ..ExperimentConfig::default()
    };
    let a = records_to_csv(&err_str(run_stability(&cfg))?);
    let b = records_to_csv(&err_str(run_stability(&cfg))?);
    ensure(a == b, "stability study not byte-deterministic")?;
    ensure(a.lines().count() == 3, "unexpected record count")?;
    Ok("tiny stability study byte-identical across reruns".into())
}

/// Runs every module audit, in dependency order.
pub fn run_all() -> Vec<SuiteResult> {
    vec![
        run_suite("vector-linalg", suite_vector_linalg),
        run_suite("operator", suite_operator),
        run_suite("discrepancy", suite_discrepancy),
        run_suite("regularizers", suite_regularizers),
        run_suite("network", suite_network),
        run_suite("solvers", suite_solvers),
        run_suite("analysis", suite_analysis),
        run_suite("experiments", suite_experiments),
    ]
}

/// Numbers behind the two headline inequalities.
#[derive(Clone, Debug)]
pub struct BoundCheck {
    /// Random (x, u) pairs tested against the defining inequality.
    pub subgradient_pairs: usize,
    /// Worst slack of `R(u) + phi(u) - R(x) - <r, u - x>`; the
    /// inequality asks for >= 0, tolerance -1e-9.
    pub subgradient_min_slack: f64,
    /// Sample points where the closed-form phi was compared to a grid
    /// search over tangents.
    pub phi_samples: usize,
    /// Worst |closed form - grid oracle| over those samples.
    pub phi_grid_max_error: f64,
    /// Random probes u for the descent bound.
    pub descent_probes: usize,
    /// Worst slack of `rhs(u) - min_i F(x_i)` across probes and
    /// schedules; nonnegative up to -1e-9 when no step was clipped.
    pub descent_min_slack: f64,
    /// Clipped steps observed across the descent runs (0 keeps the bound
    /// literal).
    pub descent_clipped_steps: usize,
}

/// Verifies the defining inequality of relative subgradients for the
/// quartic with its phi, the phi value against a brute-force tangent
/// grid, and the descent bound for all three step schedules.
pub fn bound_check(seed: u64) -> Result<BoundCheck> {
    let reg = SeparableQuartic::new(2.0, 0.1)?;
    let mut rng = Prng::new(seed);

    let n = 8;
    let pairs = 1000;
    let mut sub_min = f64::INFINITY;
    for _ in 0..pairs {
        let x = RealVector::from_fn(n, |_| rng.next_uniform_symmetric(5.0));
        let u = RealVector::from_fn(n, |_| rng.next_uniform_symmetric(5.0));
        let r = reg.rel_subgradient(&x);
        let slack = reg.value(&u) + reg.phi_bound(&u) - reg.value(&x) - r.dot(&u.sub(&x));
        sub_min = sub_min.min(slack);
    }

    // Grid oracle: phi(s) = sup_t [f(t) + f'(t)(s - t)] over the pure
    // quartic part (psi stripped of its convex beta term), brute-forced
    // over tangent points t in [-10, 10] with step 1e-4.
    let beta = reg.beta();
    let f = |t: f64| reg.psi(t) - 0.5 * beta * t * t;
    let f_prime = |t: f64| reg.psi_prime(t) - beta * t;
    let phi_samples = 41;
    let mut phi_err = 0.0f64;
    let steps = 200_000usize;
    for si in 0..phi_samples {
        let s = -10.0 + 20.0 * si as f64 / (phi_samples - 1) as f64;
        let mut best = f64::NEG_INFINITY;
        for ti in 0..=steps {
            let t = -10.0 + 20.0 * ti as f64 / steps as f64;
            best = best.max(f(t) + f_prime(t) * (s - t));
        }
        phi_err = phi_err.max((reg.phi_bound_scalar(s) - best).abs());
    }

    // Descent bound on a quartic Tikhonov problem.
    let op = LinearForwardOperator::diagonal(RealVector::from_fn(n, |i| 0.5 + 0.1 * i as f64));
    let alpha = 0.3;
    let data = RealVector::from_fn(n, |i| 0.4 * ((i as f64) * 0.9).sin());
    let p = TikhonovProblem::new(
        NormDiscrepancy::least_squares(op),
        reg.clone(),
        alpha,
        data,
    )?;
    let clip = DEFAULT_CLIP_BOUND;
    let x0 = RealVector::zeros(n);
    let schedules = [
        StepSchedule::Constant(1e-3),
        StepSchedule::DiminishingSqrt(1e-2),
        StepSchedule::SquareSummable(1e-1),
    ];
    let probes = 50;
    let mut descent_min = f64::INFINITY;
    let mut clipped = 0usize;
    for schedule in schedules {
        let report = rel_subgradient_descent(
            |x| p.value(x).expect("finite iterates"),
            |x| p.gradient(x).expect("finite iterates"),
            &x0,
            schedule,
            clip,
            10_000,
        )?;
        clipped += report.clipped_steps;
        let steps = report.iterations;
        let sum_eta: f64 = (1..=steps).map(|i| schedule.step(i)).sum();
        let sum_eta_sq: f64 = (1..=steps).map(|i| schedule.step(i).powi(2)).sum();
        let min_val = report.best_value();
        for _ in 0..probes {
            let u = RealVector::from_fn(n, |_| rng.next_uniform_symmetric(5.0));
            let rhs = p.value(&u)?
                + alpha * reg.phi_bound(&u)
                + (x0.sub(&u).dot(&x0.sub(&u)) + clip * clip * sum_eta_sq) / (2.0 * sum_eta);
            descent_min = descent_min.min(rhs - min_val);
        }
    }

    Ok(BoundCheck {
        subgradient_pairs: pairs,
        subgradient_min_slack: sub_min,
        phi_samples,
        phi_grid_max_error: phi_err,
        descent_probes: probes,
        descent_min_slack: descent_min,
        descent_clipped_steps: clipped,
    })
}
