//! Numerical convex conjugate by root-finding on the gradient map.
//!
//! Used as an independent check of the closed-form conjugates: it only sees
//! `G` and `∇G` as opaque closures.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Absolute residual `|g_i(θ) − μ_i|` accepted per coordinate.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Bracket expansion stops once `|θ_i|` exceeds this.
    pub max_abs_argument: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            tolerance: 1e-10,
            max_iterations: 400,
            max_abs_argument: 1024.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateSolution {
    /// sup_θ {⟨θ, μ⟩ − G(θ)}
    pub value: f64,
    /// The maximizer θ*, with g(θ*) = μ.
    pub argmax: DVector<f64>,
    /// max_i |g_i(θ*) − μ_i|
    pub residual: f64,
}

/// `H(μ) = sup_θ {⟨θ, μ⟩ − G(θ)}` for a separable `G`, with default options.
pub fn numeric_conjugate<F, D>(potential: F, gradient: D, mu: &DVector<f64>) -> Result<ConjugateSolution>
where
    F: Fn(&DVector<f64>) -> f64,
    D: Fn(&DVector<f64>) -> DVector<f64>,
{
    numeric_conjugate_with(potential, gradient, mu, RootOptions::default())
}

/// Solves `g(θ) = μ` one coordinate at a time (other coordinates held at 0)
/// with a bracketed Illinois iteration, then evaluates `⟨θ*, μ⟩ − G(θ*)`.
pub fn numeric_conjugate_with<F, D>(
    potential: F,
    gradient: D,
    mu: &DVector<f64>,
    opts: RootOptions,
) -> Result<ConjugateSolution>
where
    F: Fn(&DVector<f64>) -> f64,
    D: Fn(&DVector<f64>) -> DVector<f64>,
{
    let p = mu.len();
    let mut argmax = DVector::zeros(p);
    for i in 0..p {
        let target = mu[i];
        if !target.is_finite() {
            return Err(Error::OutsideImage {
                coordinate: i,
                value: target,
            });
        }
        let residual = |s: f64| {
            let mut probe = DVector::zeros(p);
            probe[i] = s;
            gradient(&probe)[i] - target
        };
        argmax[i] = solve_monotone(residual, i, target, opts)?;
    }
    let g = gradient(&argmax);
    let residual = g
        .iter()
        .zip(mu.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if residual > opts.tolerance {
        return Err(Error::NonConvergence {
            iterations: opts.max_iterations,
            residual,
        });
    }
    Ok(ConjugateSolution {
        value: argmax.dot(mu) - potential(&argmax),
        argmax,
        residual,
    })
}

/// Root of an increasing function `r`.
fn solve_monotone(
    r: impl Fn(f64) -> f64,
    coordinate: usize,
    target: f64,
    opts: RootOptions,
) -> Result<f64> {
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let (mut rlo, mut rhi) = (r(lo), r(hi));
    while rlo > 0.0 || rlo.is_nan() {
        lo *= 2.0;
        if lo.abs() > opts.max_abs_argument {
            return Err(Error::OutsideImage {
                coordinate,
                value: target,
            });
        }
        rlo = r(lo);
    }
    while rhi < 0.0 || rhi.is_nan() {
        hi *= 2.0;
        if hi > opts.max_abs_argument {
            return Err(Error::OutsideImage {
                coordinate,
                value: target,
            });
        }
        rhi = r(hi);
    }
    if rlo == 0.0 {
        return Ok(lo);
    }
    if rhi == 0.0 {
        return Ok(hi);
    }

    // Illinois variant of regula falsi; falls back to bisection when the
    // secant point is not strictly inside the bracket.
    let mut side = 0i8;
    let mut best = if rlo.abs() < rhi.abs() { lo } else { hi };
    let mut best_res = rlo.abs().min(rhi.abs());
    for _ in 0..opts.max_iterations {
        let mut x = (lo * rhi - hi * rlo) / (rhi - rlo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let rx = r(x);
        if rx.abs() < best_res {
            best = x;
            best_res = rx.abs();
        }
        if rx == 0.0 || best_res <= 0.25 * opts.tolerance {
            return Ok(best);
        }
        if rx < 0.0 {
            lo = x;
            rlo = rx;
            if side == -1 {
                rhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            rhi = rx;
            if side == 1 {
                rlo *= 0.5;
            }
            side = 1;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
    }
    if best_res <= opts.tolerance {
        Ok(best)
    } else {
        Err(Error::NonConvergence {
            iterations: opts.max_iterations,
            residual: best_res,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn exponential_conjugate_at_one() {
        let sol = numeric_conjugate(
            |t: &DVector<f64>| t.map(f64::exp).sum(),
            |t: &DVector<f64>| t.map(f64::exp),
            &v(&[1.0]),
        )
        .unwrap();
        assert!((sol.value - (-1.0)).abs() < 1e-12);
        assert!(sol.argmax[0].abs() < 1e-10);
    }

    #[test]
    fn quadratic_is_self_conjugate() {
        let sol = numeric_conjugate(
            |t: &DVector<f64>| 0.5 * t.norm_squared(),
            |t: &DVector<f64>| t.clone(),
            &v(&[2.0]),
        )
        .unwrap();
        assert!((sol.value - 2.0).abs() < 1e-12);
        assert!((sol.argmax[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn logistic_conjugate_at_half() {
        let sol = numeric_conjugate(
            |t: &DVector<f64>| t.map(|x| x.exp().ln_1p()).sum(),
            |t: &DVector<f64>| t.map(|x| 1.0 / (1.0 + (-x).exp())),
            &v(&[0.5]),
        )
        .unwrap();
        assert!((sol.value + std::f64::consts::LN_2).abs() < 1e-12);
        assert!(sol.argmax[0].abs() < 1e-9);
    }

    #[test]
    fn outside_image_is_rejected() {
        let err = numeric_conjugate(
            |t: &DVector<f64>| t.map(f64::exp).sum(),
            |t: &DVector<f64>| t.map(f64::exp),
            &v(&[-1.0]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutsideImage { coordinate: 0, .. }));

        let err = numeric_conjugate(
            |t: &DVector<f64>| t.map(|x| x.exp().ln_1p()).sum(),
            |t: &DVector<f64>| t.map(|x| 1.0 / (1.0 + (-x).exp())),
            &v(&[1.5]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutsideImage { .. }));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let opts = RootOptions {
            max_iterations: 1,
            ..RootOptions::default()
        };
        let err = numeric_conjugate_with(
            |t: &DVector<f64>| t.map(f64::exp).sum(),
            |t: &DVector<f64>| t.map(f64::exp),
            &v(&[3.7]),
            opts,
        )
        .unwrap_err();
        match err {
            Error::NonConvergence { residual, .. } => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
