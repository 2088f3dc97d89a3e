//! Regularization functionals and their relative-subgradient selections.
//!
//! A regularizer here exposes three things: its value, a distinguished
//! relative subgradient (for smooth functionals simply the derivative), and
//! optionally a diagonal second-derivative estimate that Newton-type
//! solvers use to assemble their systems.
//!
//! The quartic family is the running non-convex example: each component is
//! `psi(t) = (t - rho)^2 (t + rho/2)^2 + (beta/2) t^2`, a double well with
//! minima near `rho` and `-rho/2` whose symmetry is broken by the convex
//! `beta` term. Its classical derivative is a valid relative subgradient
//! once the error of the affine minorant is charged to the bound returned
//! by [`SeparableQuartic::phi_bound`].

use crate::error::{Error, Result};
use crate::vector::RealVector;

/// Common surface for all regularizers in this crate.
pub trait Regularizer {
    /// Functional value at `x`.
    fn value(&self, x: &RealVector) -> f64;

    /// The distinguished relative subgradient at `x`.
    fn rel_subgradient(&self, x: &RealVector) -> RealVector;

    /// Diagonal curvature estimate for Newton systems, if available.
    fn diag_curvature(&self, _x: &RealVector) -> Option<RealVector> {
        None
    }
}

/// Classical smooth Tikhonov penalty `||x||^2 / 2`.
#[derive(Clone, Debug)]
pub struct SquaredNorm;

impl Regularizer for SquaredNorm {
    fn value(&self, x: &RealVector) -> f64 {
        0.5 * x.dot(x)
    }

    fn rel_subgradient(&self, x: &RealVector) -> RealVector {
        x.clone()
    }

    fn diag_curvature(&self, x: &RealVector) -> Option<RealVector> {
        Some(RealVector::constant(x.len(), 1.0))
    }
}

/// Separable quartic double well with a convex symmetry-breaking term.
#[derive(Clone, Debug)]
pub struct SeparableQuartic {
    rho: f64,
    beta: f64,
}

impl SeparableQuartic {
    pub fn new(rho: f64, beta: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::param("rho", format!("must be positive, got {rho}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::param("beta", format!("must be nonnegative, got {beta}")));
        }
        Ok(SeparableQuartic { rho, beta })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The pure quartic factor `f(t) = (t - rho)^2 (t + rho/2)^2` written
    /// through `u(t) = (t - rho)(t + rho/2)` so that `f = u^2`.
    fn u(&self, t: f64) -> f64 {
        (t - self.rho) * (t + 0.5 * self.rho)
    }

    fn f(&self, t: f64) -> f64 {
        let u = self.u(t);
        u * u
    }

    /// `f'(t) = 2 u u'` with `u' = 2t - rho/2`. Exactly zero at both well
    /// bottoms because `u` vanishes there in floating point.
    fn f_prime(&self, t: f64) -> f64 {
        2.0 * self.u(t) * (2.0 * t - 0.5 * self.rho)
    }

    /// `f''(t) = 12 t^2 - 6 rho t - (3/2) rho^2`.
    fn f_second(&self, t: f64) -> f64 {
        12.0 * t * t - 6.0 * self.rho * t - 1.5 * self.rho * self.rho
    }

    /// Scalar well `psi(t)`.
    pub fn psi(&self, t: f64) -> f64 {
        self.f(t) + 0.5 * self.beta * t * t
    }

    /// Scalar derivative `psi'(t)`.
    pub fn psi_prime(&self, t: f64) -> f64 {
        self.f_prime(t) + self.beta * t
    }

    /// Scalar second derivative `psi''(t)`.
    pub fn psi_second(&self, t: f64) -> f64 {
        self.f_second(t) + self.beta
    }

    /// Per-component bound `phi_1(s) = sup_t [f(t) + f'(t)(s - t)]`.
    ///
    /// The supremum is over the affine minorants of the pure quartic `f`;
    /// the convex `beta` part needs no charge. Differentiating in `t` gives
    /// `d/dt h_s(t) = f''(t)(s - t)`, so the supremum sits at `t = s` or at
    /// one of the two real roots of `f''`, and those three evaluations are
    /// exact. `h_s` is a quartic in `t` with negative leading coefficient,
    /// hence the sup is finite and attained.
    pub fn phi_bound_scalar(&self, s: f64) -> f64 {
        let h = |t: f64| self.f(t) + self.f_prime(t) * (s - t);
        let disc = 3.0_f64.sqrt();
        let t1 = self.rho * (1.0 - disc) / 4.0;
        let t2 = self.rho * (1.0 + disc) / 4.0;
        self.f(s).max(h(t1)).max(h(t2))
    }

    /// `Sigma_i phi_1(s_i)`, the separable relative-subdifferentiability
    /// bound for the whole vector functional.
    pub fn phi_bound(&self, s: &RealVector) -> f64 {
        s.iter().map(|&si| self.phi_bound_scalar(si)).sum()
    }

    /// All stationary points of the scalar well, sorted increasingly.
    ///
    /// Newton iterations start from the two well bottoms and the hilltop of
    /// the unperturbed quartic; duplicates collapse when `beta` is large
    /// enough to merge wells.
    pub fn stationary_points(&self) -> Vec<f64> {
        let seeds = [-0.5 * self.rho, 0.25 * self.rho, self.rho];
        let mut roots: Vec<f64> = Vec::new();
        for &seed in &seeds {
            let mut t = seed;
            let mut ok = false;
            for _ in 0..100 {
                let g = self.psi_prime(t);
                let h = self.psi_second(t);
                if h == 0.0 {
                    break;
                }
                let step = g / h;
                t -= step;
                if step.abs() <= 1e-14 * (1.0 + t.abs()) {
                    ok = true;
                    break;
                }
            }
            if ok && self.psi_prime(t).abs() <= 1e-9 * (1.0 + self.beta + self.rho.powi(4)) {
                if !roots.iter().any(|r| (r - t).abs() <= 1e-8 * (1.0 + t.abs())) {
                    roots.push(t);
                }
            }
        }
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        roots
    }
}

impl Regularizer for SeparableQuartic {
    fn value(&self, x: &RealVector) -> f64 {
        x.iter().map(|&t| self.psi(t)).sum()
    }

    fn rel_subgradient(&self, x: &RealVector) -> RealVector {
        RealVector::from_fn(x.len(), |i| self.psi_prime(x[i]))
    }

    fn diag_curvature(&self, x: &RealVector) -> Option<RealVector> {
        Some(RealVector::from_fn(x.len(), |i| self.psi_second(x[i])))
    }
}

/// Non-convex piecewise-quadratic double well with per-component well
/// positions `w_i > 0` and a shared shape parameter `q` in `[1/2, 1)`.
///
/// Component `i` is `t^2/2` for `t <= q w_i` and
/// `(t - w_i)^2/2 + (q - 1/2) w_i^2` beyond, so the two parabolas meet at
/// `t = q w_i` at height `q^2 w_i^2 / 2`. The derivative at the kink is
/// fixed to the left value `q w_i`.
#[derive(Clone, Debug)]
pub struct DoubleWell {
    q: f64,
    weights: RealVector,
}

impl DoubleWell {
    pub fn new(q: f64, weights: RealVector) -> Result<Self> {
        if !(0.5..1.0).contains(&q) {
            return Err(Error::param("q", format!("must lie in [1/2, 1), got {q}")));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::param("weights", "well positions must be positive"));
        }
        Ok(DoubleWell { q, weights })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn weights(&self) -> &RealVector {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Scalar branch value for well position `w`.
    pub fn branch_value(&self, t: f64, w: f64) -> f64 {
        if t <= self.q * w {
            0.5 * t * t
        } else {
            0.5 * (t - w) * (t - w) + (self.q - 0.5) * w * w
        }
    }

    /// Scalar derivative with the left-value convention at the kink.
    pub fn branch_derivative(&self, t: f64, w: f64) -> f64 {
        let kink = self.q * w;
        if t < kink {
            t
        } else if t == kink {
            kink
        } else {
            t - w
        }
    }

    fn check_dim(&self, x: &RealVector) {
        assert_eq!(
            x.len(),
            self.weights.len(),
            "double well: dimension mismatch"
        );
    }
}

impl Regularizer for DoubleWell {
    fn value(&self, x: &RealVector) -> f64 {
        self.check_dim(x);
        x.iter()
            .zip(self.weights.iter())
            .map(|(&t, &w)| self.branch_value(t, w))
            .sum()
    }

    fn rel_subgradient(&self, x: &RealVector) -> RealVector {
        self.check_dim(x);
        RealVector::from_fn(x.len(), |i| self.branch_derivative(x[i], self.weights[i]))
    }

    /// Both branches are unit parabolas, so the curvature is 1 everywhere,
    /// including (by the left convention) at the kink.
    fn diag_curvature(&self, x: &RealVector) -> Option<RealVector> {
        self.check_dim(x);
        Some(RealVector::constant(x.len(), 1.0))
    }
}

/// Convexification of [`DoubleWell`]: the outer parabolas joined by their
/// common tangent.
///
/// The affine middle branch lives on `((q - 1/2) w_i, (q + 1/2) w_i)` with
/// slope `(q - 1/2) w_i` and intercept `-(q - 1/2)^2 w_i^2 / 2`; both
/// junctions are then C^1. With `q = 1/2` the segment degenerates to the
/// flat bridge between two wells of equal depth.
#[derive(Clone, Debug)]
pub struct DoubleWellHull {
    q: f64,
    weights: RealVector,
}

impl DoubleWellHull {
    pub fn new(q: f64, weights: RealVector) -> Result<Self> {
        if !(0.5..1.0).contains(&q) {
            return Err(Error::param("q", format!("must lie in [1/2, 1), got {q}")));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::param("weights", "well positions must be positive"));
        }
        Ok(DoubleWellHull { q, weights })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn weights(&self) -> &RealVector {
        &self.weights
    }

    pub fn branch_value(&self, t: f64, w: f64) -> f64 {
        let a = (self.q - 0.5) * w;
        if t <= a {
            0.5 * t * t
        } else if t >= (self.q + 0.5) * w {
            0.5 * (t - w) * (t - w) + (self.q - 0.5) * w * w
        } else {
            a * t - 0.5 * a * a
        }
    }

    pub fn branch_derivative(&self, t: f64, w: f64) -> f64 {
        let a = (self.q - 0.5) * w;
        if t <= a {
            t
        } else if t >= (self.q + 0.5) * w {
            t - w
        } else {
            a
        }
    }

    pub fn branch_curvature(&self, t: f64, w: f64) -> f64 {
        let a = (self.q - 0.5) * w;
        if t <= a || t >= (self.q + 0.5) * w {
            1.0
        } else {
            0.0
        }
    }

    fn check_dim(&self, x: &RealVector) {
        assert_eq!(x.len(), self.weights.len(), "hull: dimension mismatch");
    }
}

impl Regularizer for DoubleWellHull {
    fn value(&self, x: &RealVector) -> f64 {
        self.check_dim(x);
        x.iter()
            .zip(self.weights.iter())
            .map(|(&t, &w)| self.branch_value(t, w))
            .sum()
    }

    fn rel_subgradient(&self, x: &RealVector) -> RealVector {
        self.check_dim(x);
        RealVector::from_fn(x.len(), |i| self.branch_derivative(x[i], self.weights[i]))
    }

    fn diag_curvature(&self, x: &RealVector) -> Option<RealVector> {
        self.check_dim(x);
        Some(RealVector::from_fn(x.len(), |i| {
            self.branch_curvature(x[i], self.weights[i])
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    fn vec_of(v: &[f64]) -> RealVector {
        RealVector::new(v.to_vec()).unwrap()
    }

    fn default_quartic() -> SeparableQuartic {
        SeparableQuartic::new(2.0, 0.1).unwrap()
    }

    #[test]
    fn quartic_frozen_values() {
        let r = default_quartic();
        assert_eq!(r.value(&vec_of(&[2.0])), 0.2);
        assert_eq!(r.value(&vec_of(&[-1.0])), 0.05);
        assert_eq!(r.value(&vec_of(&[0.0])), 4.0);
        assert_eq!(r.rel_subgradient(&vec_of(&[0.0])).as_slice(), &[4.0]);
    }

    #[test]
    fn quartic_gradient_is_beta_term_alone_at_left_well() {
        // At t = -rho/2 the factor (t + rho/2) is exactly zero, so the
        // quartic part of the derivative cancels bit for bit and only
        // beta * t = -beta * rho / 2 remains.
        let r = default_quartic();
        assert_eq!(r.psi_prime(-1.0), -0.1);
        let other = SeparableQuartic::new(3.0, 0.25).unwrap();
        assert_eq!(other.psi_prime(-1.5), -0.25 * 1.5);
    }

    #[test]
    fn quartic_value_grows_quartically() {
        let r = default_quartic();
        let t = 150.0;
        assert!((r.psi(t) / t.powi(4) - 1.0).abs() < 0.05);
    }

    #[test]
    fn quartic_gradient_matches_finite_differences() {
        let r = default_quartic();
        let mut rng = Prng::new(0x0e60_0001);
        let h = 1e-5;
        for _ in 0..100 {
            let x = RealVector::from_fn(6, |_| rng.next_uniform_symmetric(4.0));
            let g = r.rel_subgradient(&x);
            for i in 0..x.len() {
                let e = RealVector::standard_basis(x.len(), i);
                let fd = (r.value(&x.add_scaled(h, &e)) - r.value(&x.add_scaled(-h, &e)))
                    / (2.0 * h);
                assert!(
                    (g[i] - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "component {i}: {a} vs {fd}",
                    a = g[i]
                );
            }
        }
    }

    #[test]
    fn quartic_curvature_matches_finite_differences() {
        let r = default_quartic();
        let mut rng = Prng::new(0x0e60_0002);
        let h = 1e-5;
        for _ in 0..100 {
            let t = rng.next_uniform_symmetric(4.0);
            let fd = (r.psi_prime(t + h) - r.psi_prime(t - h)) / (2.0 * h);
            assert!((r.psi_second(t) - fd).abs() <= 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn phi_dominates_f_and_matches_grid_oracle() {
        let r = default_quartic();
        // phi(s) >= f(s): the t = s candidate is always in the sup.
        let mut rng = Prng::new(0x0e60_0003);
        for _ in 0..200 {
            let s = rng.next_uniform_symmetric(6.0);
            assert!(r.phi_bound_scalar(s) >= r.f(s));
        }
        // Grid oracle at a handful of probe points, step 1e-4 on [-10, 10].
        for &s in &[0.0, -1.0, 0.7, 2.0, 3.5, -4.2] {
            let mut best = f64::NEG_INFINITY;
            let mut t = -10.0;
            while t <= 10.0 {
                let h = r.f(t) + r.f_prime(t) * (s - t);
                if h > best {
                    best = h;
                }
                t += 1e-4;
            }
            let exact = r.phi_bound_scalar(s);
            assert!(
                (exact - best).abs() <= 1e-3,
                "s={s}: exact {exact} vs grid {best}"
            );
            assert!(exact >= best - 1e-9, "grid must not beat the exact sup");
        }
    }

    #[test]
    fn quartic_defining_inequality_on_grid() {
        let r = default_quartic();
        // f(x) + f'(x)(s - x) <= f(s) + phi(s) on a 200 x 200 grid.
        for i in 0..200 {
            let x = -5.0 + 10.0 * (i as f64) / 199.0;
            for j in 0..200 {
                let s = -5.0 + 10.0 * (j as f64) / 199.0;
                let lhs = r.f(x) + r.f_prime(x) * (s - x);
                let rhs = r.f(s) + r.phi_bound_scalar(s);
                assert!(lhs <= rhs + 1e-9, "x={x} s={s}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn quartic_stationary_points_default_parameters() {
        let r = default_quartic();
        let roots = r.stationary_points();
        assert_eq!(roots.len(), 3);
        for &t in &roots {
            assert!(r.psi_prime(t).abs() <= 1e-10, "psi'({t}) not zero");
        }
        // Bracketing: one root near each well bottom, one near the hilltop.
        assert!((roots[0] + 1.0).abs() < 0.02);
        assert!((roots[1] - 0.5).abs() < 0.02);
        assert!((roots[2] - 2.0).abs() < 0.02);
    }

    #[test]
    fn quartic_rejects_bad_parameters() {
        assert!(SeparableQuartic::new(0.0, 0.1).is_err());
        assert!(SeparableQuartic::new(-1.0, 0.1).is_err());
        assert!(SeparableQuartic::new(2.0, -0.1).is_err());
    }

    #[test]
    fn doublewell_frozen_values() {
        let r = DoubleWell::new(0.75, vec_of(&[1.0])).unwrap();
        assert_eq!(r.value(&vec_of(&[0.0])), 0.0);
        assert_eq!(r.value(&vec_of(&[1.0])), 0.25);
        assert_eq!(r.rel_subgradient(&vec_of(&[0.0])).as_slice(), &[0.0]);
        assert_eq!(r.rel_subgradient(&vec_of(&[1.0])).as_slice(), &[0.0]);
        // Kink: derivative takes the left value q w exactly.
        assert_eq!(r.rel_subgradient(&vec_of(&[0.75])).as_slice(), &[0.75]);
    }

    #[test]
    fn doublewell_kink_continuity() {
        let mut rng = Prng::new(0x0e60_0004);
        for _ in 0..50 {
            let q = 0.5 + 0.499 * rng.next_f64();
            let w = 0.25 + 2.0 * rng.next_f64();
            let r = DoubleWell::new(q, vec_of(&[w])).unwrap();
            let kink = q * w;
            let left = 0.5 * kink * kink;
            let right = 0.5 * (kink - w) * (kink - w) + (q - 0.5) * w * w;
            assert!((left - right).abs() <= 1e-12 * (1.0 + left.abs()));
            assert!((left - 0.5 * q * q * w * w).abs() <= 1e-15);
            // The value function is continuous through the kink.
            let eps = 1e-9;
            let below = r.value(&vec_of(&[kink - eps]));
            let above = r.value(&vec_of(&[kink + eps]));
            assert!((below - above).abs() < 1e-7);
        }
    }

    #[test]
    fn doublewell_rejects_bad_parameters() {
        assert!(DoubleWell::new(0.4, vec_of(&[1.0])).is_err());
        assert!(DoubleWell::new(1.0, vec_of(&[1.0])).is_err());
        assert!(DoubleWell::new(0.75, vec_of(&[0.0])).is_err());
        assert!(DoubleWell::new(0.75, vec_of(&[-1.0])).is_err());
    }

    #[test]
    fn hull_junction_values() {
        let r = DoubleWellHull::new(0.75, vec_of(&[1.0])).unwrap();
        // Left junction at t = 0.25.
        assert_eq!(r.value(&vec_of(&[0.25])), 0.03125);
        let a = 0.25;
        let middle = a * 0.25 - 0.5 * a * a;
        assert_eq!(middle, 0.03125);
        // q = 1/2: flat bridge at height zero between the wells.
        let flat = DoubleWellHull::new(0.5, vec_of(&[1.0])).unwrap();
        assert_eq!(flat.value(&vec_of(&[0.5])), 0.0);
        assert_eq!(flat.value(&vec_of(&[0.0])), 0.0);
        assert_eq!(flat.value(&vec_of(&[1.0])), 0.0);
        assert_eq!(flat.rel_subgradient(&vec_of(&[0.5])).as_slice(), &[0.0]);
    }

    #[test]
    fn hull_dominated_by_double_well() {
        let mut rng = Prng::new(0x0e60_0005);
        for _ in 0..20 {
            let q = 0.5 + 0.499 * rng.next_f64();
            let w = 0.25 + 2.0 * rng.next_f64();
            let dw = DoubleWell::new(q, vec_of(&[w])).unwrap();
            let hull = DoubleWellHull::new(q, vec_of(&[w])).unwrap();
            let mut t = -2.0 * w;
            while t <= 2.0 * w {
                let below = hull.branch_value(t, w);
                let above = dw.branch_value(t, w);
                assert!(
                    below <= above + 1e-12 * (1.0 + above.abs()),
                    "hull above dw at t={t} (q={q}, w={w})"
                );
                t += 1e-3;
            }
        }
    }

    #[test]
    fn hull_is_convex_and_c1() {
        let mut rng = Prng::new(0x0e60_0006);
        for _ in 0..20 {
            let q = 0.5 + 0.499 * rng.next_f64();
            let w = 0.25 + 2.0 * rng.next_f64();
            let hull = DoubleWellHull::new(q, vec_of(&[w])).unwrap();
            // Midpoint convexity on random pairs.
            for _ in 0..100 {
                let a = rng.next_uniform_symmetric(3.0 * w);
                let b = rng.next_uniform_symmetric(3.0 * w);
                let lhs = hull.branch_value(0.5 * (a + b), w);
                let rhs = 0.5 * (hull.branch_value(a, w) + hull.branch_value(b, w));
                assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
            }
            // C^1 at both junctions: finite-difference slope across each
            // junction matches the shared tangent slope (q - 1/2) w.
            let slope = (q - 0.5) * w;
            for junction in [(q - 0.5) * w, (q + 0.5) * w] {
                let h = 1e-7 * (1.0 + w);
                let fd = (hull.branch_value(junction + h, w)
                    - hull.branch_value(junction - h, w))
                    / (2.0 * h);
                assert!(
                    (fd - slope).abs() <= 1e-6 * (1.0 + slope.abs()),
                    "junction {junction}: slope {fd} vs {slope}"
                );
            }
        }
    }

    #[test]
    fn hull_agrees_with_double_well_outside_middle_interval() {
        let q = 0.6;
        let w = 1.5;
        let dw = DoubleWell::new(q, vec_of(&[w])).unwrap();
        let hull = DoubleWellHull::new(q, vec_of(&[w])).unwrap();
        for &t in &[-2.0, -0.5, 0.0, 0.1, (q - 0.5) * w, (q + 0.5) * w, 1.8, 3.0] {
            assert_eq!(hull.branch_value(t, w), dw.branch_value(t, w), "t={t}");
        }
    }

    #[test]
    fn curvature_conventions() {
        let r = DoubleWell::new(0.75, vec_of(&[1.0, 1.0, 1.0])).unwrap();
        let x = vec_of(&[0.3, 0.75, 1.4]);
        assert_eq!(
            r.diag_curvature(&x).unwrap().as_slice(),
            &[1.0, 1.0, 1.0]
        );
        let hull = DoubleWellHull::new(0.75, vec_of(&[1.0])).unwrap();
        assert_eq!(hull.diag_curvature(&vec_of(&[0.5])).unwrap().as_slice(), &[0.0]);
        assert_eq!(hull.diag_curvature(&vec_of(&[0.0])).unwrap().as_slice(), &[1.0]);
        assert_eq!(hull.diag_curvature(&vec_of(&[2.0])).unwrap().as_slice(), &[1.0]);
        let quartic = default_quartic();
        // psi''(0) = -(3/2) rho^2 + beta.
        assert_eq!(
            quartic.diag_curvature(&vec_of(&[0.0])).unwrap().as_slice(),
            &[-5.9]
        );
    }
}
