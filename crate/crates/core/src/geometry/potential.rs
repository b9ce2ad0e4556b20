//! Scalar Legendre-type potentials and their closed-form conjugates.

use super::region::Interval;

/// A strictly convex scalar function `G` together with its convex conjugate `H`.
///
/// Each variant is the log-partition function of a one-parameter exponential family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Potential {
    /// `G(θ) = θ²/2`, self-conjugate.
    Quadratic,
    /// `G(θ) = exp(θ)`, `H(μ) = μ log μ − μ`.
    Exponential,
    /// `G(θ) = log(1 + exp(θ))`, `H(μ) = μ log μ + (1 − μ) log(1 − μ)`.
    Logistic,
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl Potential {
    pub fn primal_interval(self) -> Interval {
        Interval::REAL_LINE
    }

    pub fn dual_interval(self) -> Interval {
        match self {
            Potential::Quadratic => Interval::REAL_LINE,
            Potential::Exponential => Interval::POSITIVE,
            Potential::Logistic => Interval::UNIT,
        }
    }

    /// G(θ)
    #[inline]
    pub fn value(self, theta: f64) -> f64 {
        match self {
            Potential::Quadratic => 0.5 * theta * theta,
            Potential::Exponential => theta.exp(),
            Potential::Logistic => theta.max(0.0) + (-theta.abs()).exp().ln_1p(),
        }
    }

    /// g(θ) = G'(θ)
    #[inline]
    pub fn gradient(self, theta: f64) -> f64 {
        match self {
            Potential::Quadratic => theta,
            Potential::Exponential => theta.exp(),
            Potential::Logistic => {
                if theta >= 0.0 {
                    1.0 / (1.0 + (-theta).exp())
                } else {
                    let e = theta.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// G''(θ)
    #[inline]
    pub fn curvature(self, theta: f64) -> f64 {
        match self {
            Potential::Quadratic => 1.0,
            Potential::Exponential => theta.exp(),
            Potential::Logistic => {
                let e = (-theta.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
        }
    }

    /// H(μ)
    #[inline]
    pub fn conjugate_value(self, mu: f64) -> f64 {
        match self {
            Potential::Quadratic => 0.5 * mu * mu,
            Potential::Exponential => mu * mu.ln() - mu,
            Potential::Logistic => mu * mu.ln() + (1.0 - mu) * (-mu).ln_1p(),
        }
    }

    /// H extended by continuity to the finite endpoints of the dual interval.
    #[inline]
    pub fn conjugate_closure_value(self, mu: f64) -> f64 {
        match self {
            Potential::Quadratic => 0.5 * mu * mu,
            Potential::Exponential => xlogx(mu) - mu,
            Potential::Logistic => xlogx(mu) + xlogx(1.0 - mu),
        }
    }

    /// h(μ) = H'(μ), the inverse of `gradient`.
    #[inline]
    pub fn conjugate_gradient(self, mu: f64) -> f64 {
        match self {
            Potential::Quadratic => mu,
            Potential::Exponential => mu.ln(),
            Potential::Logistic => mu.ln() - (-mu).ln_1p(),
        }
    }

    /// H''(μ)
    #[inline]
    pub fn conjugate_curvature(self, mu: f64) -> f64 {
        match self {
            Potential::Quadratic => 1.0,
            Potential::Exponential => 1.0 / mu,
            Potential::Logistic => 1.0 / (mu * (1.0 - mu)),
        }
    }
}
