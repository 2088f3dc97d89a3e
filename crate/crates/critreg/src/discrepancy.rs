//! Norm-power data misfit terms `S(x, y) = (1/p) ||K x - y||^p`.

use crate::error::{Error, Result};
use crate::operator::LinearForwardOperator;
use crate::vector::RealVector;

/// A discrepancy functional built from a forward operator and an exponent
/// `p >= 1`. Convex in `x` for every `p` in that range.
#[derive(Clone, Debug)]
pub struct NormDiscrepancy {
    op: LinearForwardOperator,
    p: f64,
}

impl NormDiscrepancy {
    pub fn new(op: LinearForwardOperator, p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::param("p", format!("exponent must satisfy p >= 1, got {p}")));
        }
        Ok(NormDiscrepancy { op, p })
    }

    /// Least-squares misfit, the `p = 2` workhorse.
    pub fn least_squares(op: LinearForwardOperator) -> Self {
        NormDiscrepancy { op, p: 2.0 }
    }

    pub fn operator(&self) -> &LinearForwardOperator {
        &self.op
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    fn residual(&self, x: &RealVector, y: &RealVector) -> Result<RealVector> {
        if y.len() != self.op.range_dim() {
            return Err(Error::dim("discrepancy data", self.op.range_dim(), y.len()));
        }
        self.op.residual(x, y)
    }

    /// `(1/p) ||K x - y||^p`.
    pub fn value(&self, x: &RealVector, y: &RealVector) -> Result<f64> {
        let r = self.residual(x, y)?;
        if self.p == 2.0 {
            // Avoid the sqrt-then-square detour of the generic path.
            return Ok(0.5 * r.dot(&r));
        }
        Ok(r.norm().powf(self.p) / self.p)
    }

    /// Gradient `||r||^{p-2} K^* r` with `r = K x - y`.
    ///
    /// For `p > 1` the functional is differentiable everywhere, with
    /// gradient zero at zero residual. For `p = 1` a zero residual is a
    /// genuine kink and is reported as an error.
    pub fn gradient(&self, x: &RealVector, y: &RealVector) -> Result<RealVector> {
        let r = self.residual(x, y)?;
        let nr = r.norm();
        if self.p == 2.0 {
            return self.op.adjoint_apply(&r);
        }
        if nr == 0.0 {
            if self.p == 1.0 {
                return Err(Error::Nondifferentiable(
                    "p = 1 discrepancy at zero residual".into(),
                ));
            }
            return Ok(RealVector::zeros(x.len()));
        }
        let kr = self.op.adjoint_apply(&r)?;
        Ok(kr.scale(nr.powf(self.p - 2.0)))
    }

    /// Slack of the comparability estimate
    /// `S(z, y) <= 2^{p-1} (S(z, y_d) + (1/p) ||y - y_d||^p)`,
    /// returned as right-hand side minus left-hand side.
    pub fn comparability_slack(
        &self,
        z: &RealVector,
        y: &RealVector,
        y_d: &RealVector,
    ) -> Result<f64> {
        let lhs = self.value(z, y)?;
        let s_d = self.value(z, y_d)?;
        let dist = y.sub(y_d).norm().powf(self.p) / self.p;
        let c = 2.0_f64.powf(self.p - 1.0);
        Ok(c * (s_d + dist) - lhs)
    }
}
