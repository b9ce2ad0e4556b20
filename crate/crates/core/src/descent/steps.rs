//! Single-step update rules.
//!
//! Every rule that can leave its open domain returns a [`Step`]: the new
//! point after the domain safeguard, and whether the safeguard moved it.

use nalgebra::DVector;

use crate::error::{Error, Result, Space};
use crate::geometry::{ConjugatePair, Region};

/// Metrics whose condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub point: DVector<f64>,
    pub projected: bool,
}

/// Maps of the tangent space back onto the manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Retraction {
    /// `R_μ(v) = μ + v`.
    #[default]
    Identity,
}

impl Retraction {
    pub fn retract(self, mu: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Retraction::Identity => mu + v,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::StepSize(alpha))
    }
}

fn check_dim(expected: usize, v: &DVector<f64>) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected,
            got: v.len(),
        })
    }
}

/// Projects `point` into `region` (see [`Region::project`]); rejects points
/// the projection cannot repair.
pub fn safeguard(region: &Region, point: DVector<f64>) -> Result<Step> {
    if point.iter().any(|x| !x.is_finite()) {
        return Err(Error::StepRejected(format!("non-finite update {:?}", point.as_slice())));
    }
    match region.project(point) {
        Some((point, projected)) if region.contains(&point) => Ok(Step { point, projected }),
        _ => Err(Error::StepRejected("safeguard could not produce an interior point".into())),
    }
}

/// [`safeguard`] against the `space` domain of `pair`.
pub(crate) fn guard(pair: &ConjugatePair, space: Space, point: DVector<f64>) -> Result<Step> {
    if point.iter().any(|x| !x.is_finite()) {
        return Err(Error::StepRejected(format!("non-finite update {:?}", point.as_slice())));
    }
    match pair.project(space, point) {
        Some((point, projected)) if pair.contains(space, &point) => Ok(Step { point, projected }),
        _ => Err(Error::StepRejected("safeguard could not produce an interior point".into())),
    }
}

/// θ − α·∇f.
pub fn gd_step(grad: &DVector<f64>, theta: &DVector<f64>, alpha: f64) -> DVector<f64> {
    theta - grad * alpha
}

/// argmin_θ' {⟨θ', ∇f⟩ + B_G(θ', θ)/α}, solved through its first-order
/// condition `g(θ') = g(θ) − α∇f`.
pub fn mirror_step_proximal(
    pair: &ConjugatePair,
    grad: &DVector<f64>,
    theta: &DVector<f64>,
    alpha: f64,
) -> Result<Step> {
    check_alpha(alpha)?;
    check_dim(pair.dim(), grad)?;
    pair.check_primal(theta)?;
    let dual = mirror_map_step(pair, grad, &pair.mirror_map(theta), alpha)?;
    let point = pair.inverse_mirror_map(&dual.point);
    if !point.iter().all(|x| x.is_finite()) || !pair.contains(Space::Primal, &point) {
        return Err(Error::StepRejected(format!(
            "inverse mirror map left the primal domain at {:?}",
            point.as_slice()
        )));
    }
    Ok(Step {
        point,
        projected: dual.projected,
    })
}

/// The same update seen in dual coordinates: `μ − α∇f`, with `∇f` the
/// primal gradient at `h(μ)`.
pub fn mirror_map_step(
    pair: &ConjugatePair,
    grad: &DVector<f64>,
    dual_point: &DVector<f64>,
    alpha: f64,
) -> Result<Step> {
    check_alpha(alpha)?;
    check_dim(pair.dim(), grad)?;
    pair.check_dual(dual_point)?;
    guard(pair, Space::Dual, gd_step(grad, dual_point, alpha))
}

/// `[∇²H(μ)]⁻¹ ∇f`, by a diagonal solve. Rejects metrics with condition
/// estimate above [`MAX_CONDITION`].
pub fn riemannian_gradient(
    pair: &ConjugatePair,
    mu: &DVector<f64>,
    euclidean_grad: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim(pair.dim(), euclidean_grad)?;
    pair.check_dual(mu)?;
    let metric = pair.hessian_conjugate_diagonal(mu);
    let (lo, hi) = metric
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if lo.is_nan() || lo <= 0.0 || !hi.is_finite() {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let condition = hi / lo;
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let mut direction = metric;
    direction.zip_apply(euclidean_grad, |m, g| *m = g / *m);
    Ok(direction)
}

/// μ − α[∇²H(μ)]⁻¹∇f̃(μ).
pub fn natural_gradient_step(
    pair: &ConjugatePair,
    grad_mu: &DVector<f64>,
    mu: &DVector<f64>,
    alpha: f64,
) -> Result<Step> {
    check_alpha(alpha)?;
    // −α·d then + μ, rounding exactly as the identity retraction does.
    let mut step = riemannian_gradient(pair, mu, grad_mu)?;
    step *= -alpha;
    step += mu;
    guard(pair, Space::Dual, step)
}

/// `R_μ(−α ∇_ℳ f)` for a Riemannian gradient supplied by the caller.
pub fn retraction_step(
    pair: &ConjugatePair,
    riemannian_grad: &DVector<f64>,
    mu: &DVector<f64>,
    alpha: f64,
    retraction: Retraction,
) -> Result<Step> {
    check_alpha(alpha)?;
    check_dim(pair.dim(), riemannian_grad)?;
    pair.check_dual(mu)?;
    let tangent = riemannian_grad * -alpha;
    guard(pair, Space::Dual, retraction.retract(mu, &tangent))
}

/// Like [`retraction_step`] but starting from a Euclidean gradient.
pub fn retraction_step_euclidean(
    pair: &ConjugatePair,
    euclidean_grad: &DVector<f64>,
    mu: &DVector<f64>,
    alpha: f64,
    retraction: Retraction,
) -> Result<Step> {
    let rg = riemannian_gradient(pair, mu, euclidean_grad)?;
    retraction_step(pair, &rg, mu, alpha, retraction)
}

pub(crate) fn check_interior(pair: &ConjugatePair, space: Space, point: &DVector<f64>) -> Result<()> {
    match space {
        Space::Primal => pair.check_primal(point),
        Space::Dual => pair.check_dual(point),
    }
}
