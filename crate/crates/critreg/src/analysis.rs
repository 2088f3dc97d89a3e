//! Closed forms and diagnostics: the ellipsoid that contains all
//! relaxed critical points of the quadratic functional, componentwise
//! critical points for diagonal double-well problems (and their convex
//! hull), and the kernel-normality check.

use crate::error::{Error, Result};
use crate::linalg::solve_lu;
use crate::operator::LinearForwardOperator;
use crate::regularizers::{DoubleWell, DoubleWellHull, Regularizer};
use crate::vector::RealVector;

/// Membership data for the ellipsoid around a quadratic Tikhonov
/// minimizer: a point `x0` (an offset from the center) belongs iff
///
/// ```text
/// <x0, lin_vec> + 1/2 <x0, L x0> <= budget,    L = K*K + alpha I.
/// ```
///
/// `lin_vec = L center - K* y` vanishes when the center solves the
/// normal equations; for an arbitrary center the general form is kept.
#[derive(Clone, Debug)]
pub struct EllipsoidCharacterization {
    op: LinearForwardOperator,
    alpha: f64,
    center: RealVector,
    lin_vec: RealVector,
    budget: f64,
}

impl EllipsoidCharacterization {
    pub fn center(&self) -> &RealVector {
        &self.center
    }

    pub fn lin_vec(&self) -> &RealVector {
        &self.lin_vec
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Applies `L = K*K + alpha I` without materializing it.
    pub fn quad_apply(&self, x: &RealVector) -> Result<RealVector> {
        let kx = self.op.apply(x)?;
        Ok(self.op.adjoint_apply(&kx)?.add_scaled(self.alpha, x))
    }

    pub fn contains(&self, x0: &RealVector) -> Result<bool> {
        ellipsoid_contains(self, x0)
    }
}

/// Builds the characterization with the center solved from the normal
/// equations `(K*K + alpha I) x = K* y` by a dense factorization. The
/// recorded `lin_vec` is the residual of that solve, so it is zero up to
/// rounding.
pub fn ellipsoid_build(
    op: &LinearForwardOperator,
    y: &RealVector,
    alpha: f64,
    phi_at_center: f64,
) -> Result<EllipsoidCharacterization> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    if y.len() != op.range_dim() {
        return Err(Error::dim("ellipsoid data", op.range_dim(), y.len()));
    }
    let mut l = op.normal_matrix();
    l.add_scaled_identity(alpha);
    let rhs = op.adjoint_apply(y)?;
    let center_raw = solve_lu(&l, rhs.as_slice()).ok_or_else(|| {
        Error::SingularSystem("normal equations reported singular despite alpha > 0".into())
    })?;
    if !center_raw.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("ellipsoid center"));
    }
    let center = RealVector::new(center_raw).expect("finiteness checked above");
    ellipsoid_with_center(op, y, alpha, center, phi_at_center)
}

/// General form: `lin_vec` is computed from whatever center is supplied,
/// so centers that do not solve the normal equations (minimizers of the
/// phi-shifted functional, say) are handled by the same predicate.
pub fn ellipsoid_with_center(
    op: &LinearForwardOperator,
    y: &RealVector,
    alpha: f64,
    center: RealVector,
    phi_at_center: f64,
) -> Result<EllipsoidCharacterization> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    if y.len() != op.range_dim() {
        return Err(Error::dim("ellipsoid data", op.range_dim(), y.len()));
    }
    if center.len() != op.domain_dim() {
        return Err(Error::dim("ellipsoid center", op.domain_dim(), center.len()));
    }
    if !(phi_at_center >= 0.0) || !phi_at_center.is_finite() {
        return Err(Error::param(
            "phi_at_center",
            format!("must be a finite non-negative real, got {phi_at_center}"),
        ));
    }
    let kc = op.apply(&center)?;
    let lin_vec = op
        .adjoint_apply(&kc)?
        .add_scaled(alpha, &center)
        .sub(&op.adjoint_apply(y)?);
    Ok(EllipsoidCharacterization {
        op: op.clone(),
        alpha,
        center,
        lin_vec,
        budget: alpha * phi_at_center,
    })
}

/// Evaluates the membership inequality for the offset `x0`.
pub fn ellipsoid_contains(e: &EllipsoidCharacterization, x0: &RealVector) -> Result<bool> {
    if x0.len() != e.center.len() {
        return Err(Error::dim("ellipsoid membership", e.center.len(), x0.len()));
    }
    let lx0 = e.quad_apply(x0)?;
    Ok(x0.dot(&e.lin_vec) + 0.5 * x0.dot(&lx0) <= e.budget)
}

/// Which critical point to take on coordinates the operator cannot see.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelChoice {
    /// The origin well.
    Zero,
    /// The shifted well at `w_i`; in general only a local minimizer.
    Well,
}

/// Componentwise critical points of the diagonal double-well problem
///
/// ```text
/// k_i (k_i x_i - y_i) + alpha r_i'(x_i) = 0.
/// ```
///
/// For `k_i != 0` the candidate `k_i y_i / (k_i^2 + alpha)` is taken when
/// it stays at or below the kink `q w_i`, else the shifted-well root
/// `(alpha w_i + k_i y_i) / (k_i^2 + alpha)`. Ties at the threshold go to
/// the first case. For `k_i = 0` the equation is blind to the data and
/// `kernel_choice[i]` picks between the two wells.
pub fn doublewell_closed_form(
    k_diag: &RealVector,
    y: &RealVector,
    alpha: f64,
    dw: &DoubleWell,
    kernel_choice: &[KernelChoice],
) -> Result<RealVector> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    let n = k_diag.len();
    if y.len() != n {
        return Err(Error::dim("closed form data", n, y.len()));
    }
    if dw.weights().len() != n {
        return Err(Error::dim("closed form weights", n, dw.weights().len()));
    }
    if kernel_choice.len() != n {
        return Err(Error::dim("closed form kernel choices", n, kernel_choice.len()));
    }
    let q = dw.q();
    let x = RealVector::from_fn(n, |i| {
        let k = k_diag[i];
        let w = dw.weights()[i];
        if k == 0.0 {
            match kernel_choice[i] {
                KernelChoice::Zero => 0.0,
                KernelChoice::Well => w,
            }
        } else {
            let first = k * y[i] / (k * k + alpha);
            if first <= q * w {
                first
            } else {
                (alpha * w + k * y[i]) / (k * k + alpha)
            }
        }
    });
    Ok(x)
}

/// Critical point of the hull-relaxed diagonal problem, together with a
/// per-coordinate flag marking where the solution is a whole interval
/// rather than a point (only possible for `q = 1/2` on `k_i = 0`
/// coordinates, where every `x_i` in `[0, w_i]` works and `0` is the
/// returned representative).
#[derive(Clone, Debug)]
pub struct HullCriticalPoint {
    pub point: RealVector,
    pub multiplicity: Vec<bool>,
}

/// Solves `k_i (k_i x_i - y_i) + alpha hull_i'(x_i) = 0` componentwise.
///
/// The hull derivative is continuous and nondecreasing, so for
/// `k_i != 0` the residual is strictly increasing in `x_i` and the
/// correct branch follows from comparing `k_i y_i` against the residual's
/// values at the two junctions; no tolerance enters the selection.
pub fn hull_critical_point(
    k_diag: &RealVector,
    y: &RealVector,
    alpha: f64,
    hull: &DoubleWellHull,
) -> Result<HullCriticalPoint> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    let n = k_diag.len();
    if y.len() != n {
        return Err(Error::dim("hull data", n, y.len()));
    }
    if hull.weights().len() != n {
        return Err(Error::dim("hull weights", n, hull.weights().len()));
    }
    let q = hull.q();
    let mut point = Vec::with_capacity(n);
    let mut multiplicity = vec![false; n];
    for i in 0..n {
        let k = k_diag[i];
        let w = hull.weights()[i];
        if k == 0.0 {
            // alpha hull'(x) = 0: q > 1/2 forces the origin; q = 1/2
            // leaves the whole flat segment [0, w].
            if q == 0.5 {
                multiplicity[i] = true;
            }
            point.push(0.0);
            continue;
        }
        let j1 = (q - 0.5) * w;
        let j2 = (q + 0.5) * w;
        let ky = k * y[i];
        // Residual at the junctions; hull' equals j1 on the whole middle
        // branch, including both endpoints.
        let x = if ky <= (k * k + alpha) * j1 {
            ky / (k * k + alpha)
        } else if ky <= k * k * j2 + alpha * j1 {
            (ky - alpha * j1) / (k * k)
        } else {
            (ky + alpha * w) / (k * k + alpha)
        };
        debug_assert!(
            (k * (k * x - y[i]) + alpha * hull.branch_derivative(x, w)).abs()
                <= 1e-10 * (1.0 + ky.abs()),
            "hull branch selection produced a non-root"
        );
        point.push(x);
    }
    Ok(HullCriticalPoint {
        point: RealVector::new(point).expect("componentwise roots of finite data are finite"),
        multiplicity,
    })
}

/// The moduli `|<R'(x_plus), e_i>|` for each supplied kernel basis
/// vector. At a noise-free limit point these vanish: the negative
/// subgradient is normal to the operator kernel.
pub fn normality_check<R: Regularizer>(
    reg: &R,
    x_plus: &RealVector,
    basis: &[RealVector],
) -> Result<Vec<f64>> {
    for (idx, e) in basis.iter().enumerate() {
        if e.len() != x_plus.len() {
            return Err(Error::dim(
                "normality basis vector",
                x_plus.len(),
                basis[idx].len(),
            ));
        }
    }
    let g = reg.rel_subgradient(x_plus);
    Ok(basis.iter().map(|e| g.dot(e).abs()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrepancy::NormDiscrepancy;
    use crate::regularizers::{SeparableQuartic, SquaredNorm};
    use crate::rng::Prng;
    use crate::solvers::{newton, nesterov, TikhonovProblem};

    fn vec_of(v: &[f64]) -> RealVector {
        RealVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ellipsoid_center_solves_normal_equations() {
        // K = I, y = [2], alpha = 1: (1+1)x = 2.
        let op = LinearForwardOperator::diagonal(vec_of(&[1.0]));
        let e = ellipsoid_build(&op, &vec_of(&[2.0]), 1.0, 1.0).unwrap();
        assert_eq!(e.center().as_slice(), &[1.0]);
        assert!(e.lin_vec().norm() <= 1e-14);
        assert_eq!(e.budget(), 1.0);

        let op = LinearForwardOperator::cumulative_sum(5).unwrap();
        let y = vec_of(&[0.3, -0.1, 0.8, 0.2, -0.5]);
        let e = ellipsoid_build(&op, &y, 0.25, 2.0).unwrap();
        // Residual of the normal equations at the solved center.
        assert!(e.lin_vec().norm() <= 1e-12);
    }

    #[test]
    fn zero_budget_collapses_to_singleton() {
        let op = LinearForwardOperator::diagonal(vec_of(&[1.0, 2.0]));
        let e = ellipsoid_build(&op, &vec_of(&[2.0, 1.0]), 1.0, 0.0).unwrap();
        assert!(e.contains(&RealVector::zeros(2)).unwrap());
        let mut rng = Prng::new(0xa11a_0001);
        for _ in 0..25 {
            let x0 = RealVector::from_fn(2, |_| rng.next_uniform_symmetric(3.0));
            if x0.norm() > 1e-6 {
                assert!(!e.contains(&x0).unwrap());
            }
        }
    }

    #[test]
    fn membership_is_even_when_linear_part_vanishes() {
        // Exact-arithmetic center: lin_vec is exactly zero.
        let op = LinearForwardOperator::diagonal(vec_of(&[1.0]));
        let e = ellipsoid_build(&op, &vec_of(&[2.0]), 1.0, 1.0).unwrap();
        assert_eq!(e.lin_vec().as_slice(), &[0.0]);
        for t in [0.1, 0.5, 0.9, 1.0, 1.1, 2.0] {
            let x0 = vec_of(&[t]);
            let neg = vec_of(&[-t]);
            assert_eq!(e.contains(&x0).unwrap(), e.contains(&neg).unwrap());
        }
    }

    #[test]
    fn boundary_point_doubled_leaves_ellipsoid() {
        let op = LinearForwardOperator::diagonal(vec_of(&[1.0]));
        let e = ellipsoid_build(&op, &vec_of(&[2.0]), 1.0, 1.0).unwrap();
        // 1/2 (k^2 + alpha) t^2 = budget = 1 with k^2 + alpha = 2: t = 1.
        assert!(e.contains(&vec_of(&[1.0])).unwrap());
        assert!(!e.contains(&vec_of(&[2.0])).unwrap());
    }

    #[test]
    fn membership_matches_tikhonov_excess_identity() {
        // T(center + x0) - T(center) = <x0, lin_vec> + 1/2 <x0, L x0>
        // for the quadratic functional; membership is that excess being
        // within the budget.
        let op = LinearForwardOperator::cumulative_sum(4).unwrap();
        let y = vec_of(&[0.5, -0.2, 0.9, 0.1]);
        let alpha = 0.3;
        let phi = 1.7;
        let e = ellipsoid_build(&op, &y, alpha, phi).unwrap();
        let p = TikhonovProblem::new(
            NormDiscrepancy::least_squares(op.clone()),
            SquaredNorm,
            alpha,
            y.clone(),
        )
        .unwrap();
        let t_center = p.value(e.center()).unwrap();
        let mut rng = Prng::new(0xa11a_0002);
        for _ in 0..50 {
            let x0 = RealVector::from_fn(4, |_| rng.next_uniform_symmetric(2.0));
            let excess = p.value(&e.center().add_scaled(1.0, &x0)).unwrap() - t_center;
            let form = x0.dot(e.lin_vec()) + 0.5 * x0.dot(&e.quad_apply(&x0).unwrap());
            assert!((excess - form).abs() <= 1e-12 * (1.0 + excess.abs()));
        }
    }

    #[test]
    fn with_center_keeps_general_linear_part() {
        let op = LinearForwardOperator::diagonal(vec_of(&[1.0, 1.0]));
        let y = vec_of(&[2.0, 0.0]);
        let off = vec_of(&[0.5, 0.5]);
        let e = ellipsoid_with_center(&op, &y, 1.0, off, 1.0).unwrap();
        // lin_vec = L c - K* y = 2 c - y = [-1, 1].
        assert!((e.lin_vec()[0] + 1.0).abs() <= 1e-15);
        assert!((e.lin_vec()[1] - 1.0).abs() <= 1e-15);
        // Odd part now matters: membership is no longer even.
        assert_ne!(
            e.contains(&vec_of(&[0.9, 0.0])).unwrap(),
            e.contains(&vec_of(&[-0.9, 0.0])).unwrap()
        );
    }

    #[test]
    fn ellipsoid_validates_inputs() {
        let op = LinearForwardOperator::diagonal(vec_of(&[1.0]));
        assert!(ellipsoid_build(&op, &vec_of(&[1.0]), 0.0, 1.0).is_err());
        assert!(ellipsoid_build(&op, &vec_of(&[1.0, 2.0]), 1.0, 1.0).is_err());
        assert!(ellipsoid_build(&op, &vec_of(&[1.0]), 1.0, -0.5).is_err());
        let e = ellipsoid_build(&op, &vec_of(&[1.0]), 1.0, 1.0).unwrap();
        assert!(e.contains(&RealVector::zeros(2)).is_err());
    }

    #[test]
    fn closed_form_reproduces_worked_examples() {
        let dw = DoubleWell::new(0.75, vec_of(&[1.0])).unwrap();
        // First case: 1*0.5/(1+1) = 0.25 <= 0.75.
        let x = doublewell_closed_form(
            &vec_of(&[1.0]),
            &vec_of(&[0.5]),
            1.0,
            &dw,
            &[KernelChoice::Zero],
        )
        .unwrap();
        assert_eq!(x.as_slice(), &[0.25]);
        // Second case: 1*3/2 = 1.5 > 0.75, so (1 + 3)/2 = 2.
        let x = doublewell_closed_form(
            &vec_of(&[1.0]),
            &vec_of(&[3.0]),
            1.0,
            &dw,
            &[KernelChoice::Zero],
        )
        .unwrap();
        assert_eq!(x.as_slice(), &[2.0]);
        // Kernel coordinate honours the selector.
        let x = doublewell_closed_form(
            &vec_of(&[0.0]),
            &vec_of(&[9.0]),
            1.0,
            &dw,
            &[KernelChoice::Well],
        )
        .unwrap();
        assert_eq!(x.as_slice(), &[1.0]);
        let x = doublewell_closed_form(
            &vec_of(&[0.0]),
            &vec_of(&[9.0]),
            1.0,
            &dw,
            &[KernelChoice::Zero],
        )
        .unwrap();
        assert_eq!(x.as_slice(), &[0.0]);
    }

    #[test]
    fn closed_form_zeroes_componentwise_residual() {
        let mut rng = Prng::new(0xa11a_0003);
        for trial in 0..40 {
            let n = 6;
            let q = 0.5 + 0.49 * rng.next_f64();
            let weights = RealVector::from_fn(n, |_| 0.2 + 2.0 * rng.next_f64());
            let dw = DoubleWell::new(q, weights.clone()).unwrap();
            let k_diag = RealVector::from_fn(n, |i| {
                // A couple of kernel coordinates per trial.
                if (i + trial) % 3 == 0 {
                    0.0
                } else {
                    rng.next_uniform_symmetric(2.0)
                }
            });
            let y = RealVector::from_fn(n, |_| rng.next_uniform_symmetric(3.0));
            let alpha = 10f64.powf(-3.0 * rng.next_f64());
            let choices = vec![KernelChoice::Zero; n];
            let x = doublewell_closed_form(&k_diag, &y, alpha, &dw, &choices).unwrap();
            for i in 0..n {
                let k = k_diag[i];
                if k == 0.0 {
                    continue;
                }
                let resid =
                    k * (k * x[i] - y[i]) + alpha * dw.branch_derivative(x[i], weights[i]);
                assert!(
                    resid.abs() <= 1e-12 * (1.0 + y[i].abs()),
                    "residual {resid} at component {i}"
                );
            }
        }
    }

    #[test]
    fn closed_form_threshold_tie_takes_first_case() {
        // k = 1, alpha = 1, y = 1.5: candidate 0.75 == q w exactly.
        let dw = DoubleWell::new(0.75, vec_of(&[1.0])).unwrap();
        let x = doublewell_closed_form(
            &vec_of(&[1.0]),
            &vec_of(&[1.5]),
            1.0,
            &dw,
            &[KernelChoice::Zero],
        )
        .unwrap();
        assert_eq!(x.as_slice(), &[0.75]);
    }

    #[test]
    fn hull_kernel_coordinates() {
        // q > 1/2 forces 0.
        let hull = DoubleWellHull::new(0.75, vec_of(&[1.0])).unwrap();
        let sol = hull_critical_point(&vec_of(&[0.0]), &vec_of(&[5.0]), 1.0, &hull).unwrap();
        assert_eq!(sol.point.as_slice(), &[0.0]);
        assert_eq!(sol.multiplicity, vec![false]);
        // q = 1/2 leaves the interval [0, w]: flagged.
        let hull = DoubleWellHull::new(0.5, vec_of(&[1.0])).unwrap();
        let sol = hull_critical_point(&vec_of(&[0.0]), &vec_of(&[5.0]), 1.0, &hull).unwrap();
        assert_eq!(sol.point.as_slice(), &[0.0]);
        assert_eq!(sol.multiplicity, vec![true]);
    }

    #[test]
    fn hull_right_branch_matches_double_well() {
        // Far right the hull equals the shifted parabola, so both closed
        // forms give the same root.
        let q = 0.75;
        let w = vec_of(&[1.0]);
        let hull = DoubleWellHull::new(q, w.clone()).unwrap();
        let dw = DoubleWell::new(q, w).unwrap();
        let k = vec_of(&[1.0]);
        let y = vec_of(&[3.0]);
        let sol = hull_critical_point(&k, &y, 1.0, &hull).unwrap();
        let xw = doublewell_closed_form(&k, &y, 1.0, &dw, &[KernelChoice::Zero]).unwrap();
        assert_eq!(sol.point.as_slice(), xw.as_slice());
        assert_eq!(sol.point.as_slice(), &[2.0]);
    }

    #[test]
    fn hull_root_zeroes_residual_across_branches() {
        let mut rng = Prng::new(0xa11a_0004);
        for _ in 0..60 {
            let n = 5;
            let q = 0.5 + 0.49 * rng.next_f64();
            let weights = RealVector::from_fn(n, |_| 0.2 + 2.0 * rng.next_f64());
            let hull = DoubleWellHull::new(q, weights.clone()).unwrap();
            let k_diag = RealVector::from_fn(n, |_| rng.next_uniform_symmetric(2.0));
            let y = RealVector::from_fn(n, |_| rng.next_uniform_symmetric(4.0));
            let alpha = 10f64.powf(-2.0 * rng.next_f64());
            let sol = hull_critical_point(&k_diag, &y, alpha, &hull).unwrap();
            for i in 0..n {
                let k = k_diag[i];
                if k == 0.0 {
                    continue;
                }
                let resid = k * (k * sol.point[i] - y[i])
                    + alpha * hull.branch_derivative(sol.point[i], weights[i]);
                assert!(resid.abs() <= 1e-10 * (1.0 + (k * y[i]).abs()));
            }
        }
    }

    #[test]
    fn hull_middle_branch_is_reachable() {
        // Pick data so the root sits strictly inside the flat segment:
        // x = (ky - alpha j1)/k^2 must land in (j1, j2).
        let q = 0.75;
        let hull = DoubleWellHull::new(q, vec_of(&[1.0])).unwrap();
        let alpha = 1.0;
        // j1 = 0.25, j2 = 1.25; choose y so x = y - 0.25 = 0.6.
        let sol = hull_critical_point(&vec_of(&[1.0]), &vec_of(&[0.85]), alpha, &hull).unwrap();
        assert!((sol.point[0] - 0.6).abs() <= 1e-15);
        assert_eq!(sol.multiplicity, vec![false]);
    }

    #[test]
    fn newton_reaches_closed_form_basins() {
        // Diagonal problem, double-well penalty; Newton initialized in
        // the branch containing the closed-form root reproduces it.
        let q = 0.75;
        let weights = vec_of(&[1.0, 1.0]);
        let dw = DoubleWell::new(q, weights).unwrap();
        let k_diag = vec_of(&[1.0, 1.0]);
        let y = vec_of(&[0.5, 3.0]);
        let alpha = 1.0;
        let expected =
            doublewell_closed_form(&k_diag, &y, alpha, &dw, &[KernelChoice::Zero, KernelChoice::Zero])
                .unwrap();
        let p = TikhonovProblem::new(
            NormDiscrepancy::least_squares(LinearForwardOperator::diagonal(k_diag)),
            dw,
            alpha,
            y,
        )
        .unwrap();
        // Start inside each component's target branch.
        let report = newton(&p, &vec_of(&[0.0, 1.0]), 50, 1e-12).unwrap();
        assert!(report.converged);
        assert!(report.final_x.sub(&expected).norm() <= 1e-8);
    }

    #[test]
    fn normality_empty_basis_is_empty() {
        let out =
            normality_check(&SquaredNorm, &vec_of(&[1.0, 2.0]), &[]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn normality_squared_norm_zero_kernel_entries() {
        // Mask keeping {0, 2}: kernel basis spans coordinates 1 and 3.
        let op = LinearForwardOperator::mask(4, vec![0, 2]).unwrap();
        let basis = op.kernel_basis().unwrap();
        let x_plus = vec_of(&[0.7, 0.0, -0.3, 0.0]);
        let vals = normality_check(&SquaredNorm, &x_plus, &basis).unwrap();
        assert_eq!(vals, vec![0.0, 0.0]);
    }

    #[test]
    fn normality_dimension_mismatch_is_reported() {
        let basis = vec![RealVector::zeros(3).add_scaled(1.0, &RealVector::standard_basis(3, 0))];
        assert!(normality_check(&SquaredNorm, &vec_of(&[1.0, 2.0]), &basis).is_err());
    }

    #[test]
    fn normality_vanishes_at_converged_inpainting_solution() {
        let n = 12;
        let op = LinearForwardOperator::mask(n, vec![0, 2, 3, 5, 7, 8, 10]).unwrap();
        let reg = SeparableQuartic::new(2.0, 0.1).unwrap();
        let alpha = 1e-2;
        let y = RealVector::from_fn(op.range_dim(), |i| 0.5 + 0.2 * (i as f64).sin());
        let p = TikhonovProblem::new(
            NormDiscrepancy::least_squares(op.clone()),
            reg.clone(),
            alpha,
            y,
        )
        .unwrap();
        let warm = nesterov(&p, &RealVector::zeros(n), 50_000, 1e-10).unwrap();
        let report = newton(&p, &warm.final_x, 60, 1e-10).unwrap();
        assert!(report.converged);
        let z = p.gradient(&report.final_x).unwrap();
        let basis = op.kernel_basis().unwrap();
        let vals = normality_check(&reg, &report.final_x, &basis).unwrap();
        for v in vals {
            assert!(v <= 1e-6 * (1.0 + z.norm()));
        }
    }
}
