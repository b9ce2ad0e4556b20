//! Convex-conjugate pairs, their Bregman divergences and the Hessian metrics
//! they induce on the primal (natural) and dual (mean) coordinate systems.
//!
//! A [`ConjugatePair`] is a separable potential `G(θ) = Σ_i G_i(θ_i)` with its
//! conjugate `H(μ) = sup_θ {⟨θ, μ⟩ − G(θ)}`. The gradient maps `g = ∇G` and
//! `h = ∇H` are mutually inverse, and `∇²H(g(θ)) = (∇²G(θ))⁻¹`.
//!
//! Raw maps (`potential`, `mirror_map`, ...) assume interior inputs. The
//! free functions at module level validate domains and are what callers
//! outside the optimizers should use.

mod conjugate;
pub mod identities;
mod potential;
mod region;

use nalgebra::{DMatrix, DVector};

pub use conjugate::{numeric_conjugate, numeric_conjugate_with, ConjugateSolution, RootOptions};
pub use potential::Potential;
pub use region::{Interval, Region, DOMAIN_MARGIN};

use crate::error::{Error, Result, Space};

/// Which side of the duality plays the role of `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// `G` is the log-partition function, primal points are natural parameters.
    Natural,
    /// Roles exchanged: primal points are mean parameters and `G` is the
    /// conjugate of the log-partition function.
    Mean,
}

/// A separable strictly convex potential and its convex conjugate.
///
/// Immutable after construction and cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConjugatePair {
    potentials: Vec<Potential>,
    orientation: Orientation,
}

impl ConjugatePair {
    pub fn new(potentials: Vec<Potential>) -> Result<Self> {
        if potentials.is_empty() {
            return Err(Error::Invalid("a conjugate pair needs dimension ≥ 1".into()));
        }
        Ok(ConjugatePair {
            potentials,
            orientation: Orientation::Natural,
        })
    }

    pub fn gaussian(dim: usize) -> Result<Self> {
        Self::new(vec![Potential::Quadratic; dim])
    }

    pub fn poisson() -> Self {
        ConjugatePair {
            potentials: vec![Potential::Exponential],
            orientation: Orientation::Natural,
        }
    }

    pub fn bernoulli() -> Self {
        ConjugatePair {
            potentials: vec![Potential::Logistic],
            orientation: Orientation::Natural,
        }
    }

    pub fn dim(&self) -> usize {
        self.potentials.len()
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.potentials
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// The same pair with `G` and `H` exchanged: the primal space becomes
    /// the mean coordinates and the mirror map becomes `h`.
    pub fn dual(&self) -> ConjugatePair {
        ConjugatePair {
            potentials: self.potentials.clone(),
            orientation: match self.orientation {
                Orientation::Natural => Orientation::Mean,
                Orientation::Mean => Orientation::Natural,
            },
        }
    }

    fn swapped(&self) -> bool {
        self.orientation == Orientation::Mean
    }

    fn region(&self, dual_side: bool) -> Region {
        Region::new(
            self.potentials
                .iter()
                .map(|p| {
                    if dual_side {
                        p.dual_interval()
                    } else {
                        p.primal_interval()
                    }
                })
                .collect(),
        )
    }

    pub fn primal_domain(&self) -> Region {
        self.region(self.swapped())
    }

    pub fn dual_domain(&self) -> Region {
        self.region(!self.swapped())
    }

    /// G(θ)
    pub fn potential(&self, theta: &DVector<f64>) -> f64 {
        self.potentials
            .iter()
            .zip(theta.iter())
            .map(|(p, &x)| {
                if self.swapped() {
                    p.conjugate_value(x)
                } else {
                    p.value(x)
                }
            })
            .sum()
    }

    /// H(μ)
    pub fn conjugate(&self, mu: &DVector<f64>) -> f64 {
        self.potentials
            .iter()
            .zip(mu.iter())
            .map(|(p, &x)| {
                if self.swapped() {
                    p.value(x)
                } else {
                    p.conjugate_value(x)
                }
            })
            .sum()
    }

    #[inline]
    fn map_coords(&self, x: &DVector<f64>, f: impl Fn(Potential, f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            self.potentials.iter().zip(x.iter()).map(|(&p, &v)| f(p, v)),
        )
    }

    /// g(θ) = ∇G(θ), carrying primal points to the dual space.
    pub fn mirror_map(&self, theta: &DVector<f64>) -> DVector<f64> {
        if self.swapped() {
            self.map_coords(theta, Potential::conjugate_gradient)
        } else {
            self.map_coords(theta, Potential::gradient)
        }
    }

    /// h(μ) = ∇H(μ), the inverse of the mirror map.
    pub fn inverse_mirror_map(&self, mu: &DVector<f64>) -> DVector<f64> {
        if self.swapped() {
            self.map_coords(mu, Potential::gradient)
        } else {
            self.map_coords(mu, Potential::conjugate_gradient)
        }
    }

    /// Diagonal of ∇²G(θ).
    pub fn hessian_potential_diagonal(&self, theta: &DVector<f64>) -> DVector<f64> {
        if self.swapped() {
            self.map_coords(theta, Potential::conjugate_curvature)
        } else {
            self.map_coords(theta, Potential::curvature)
        }
    }

    /// Diagonal of ∇²H(μ).
    pub fn hessian_conjugate_diagonal(&self, mu: &DVector<f64>) -> DVector<f64> {
        if self.swapped() {
            self.map_coords(mu, Potential::curvature)
        } else {
            self.map_coords(mu, Potential::conjugate_curvature)
        }
    }

    /// ∇²G(θ)
    pub fn hessian_potential(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.hessian_potential_diagonal(theta))
    }

    /// ∇²H(μ)
    pub fn hessian_conjugate(&self, mu: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.hessian_conjugate_diagonal(mu))
    }

    /// H extended by continuity onto the finite boundary of the dual domain.
    /// Only meaningful in the natural orientation, where the dual space is
    /// the closure of the family's mean space.
    pub fn conjugate_closure(&self, mu: &DVector<f64>) -> f64 {
        self.potentials
            .iter()
            .zip(mu.iter())
            .map(|(p, &x)| {
                if self.swapped() {
                    p.value(x)
                } else {
                    p.conjugate_closure_value(x)
                }
            })
            .sum()
    }

    fn intervals(&self, space: Space) -> impl Iterator<Item = Interval> + '_ {
        let dual_side = (space == Space::Dual) != self.swapped();
        self.potentials.iter().map(move |p| {
            if dual_side {
                p.dual_interval()
            } else {
                p.primal_interval()
            }
        })
    }

    pub(crate) fn check(&self, space: Space, point: &DVector<f64>) -> Result<()> {
        region::check_bounds(self.intervals(space), self.dim(), point, space)
    }

    pub(crate) fn contains(&self, space: Space, point: &DVector<f64>) -> bool {
        point.len() == self.dim() && self.intervals(space).zip(point.iter()).all(|(b, &x)| b.contains(x))
    }

    /// [`Region::project`] onto the domain of `space`, without building the region.
    pub(crate) fn project(&self, space: Space, point: DVector<f64>) -> Option<(DVector<f64>, bool)> {
        region::project_bounds(self.intervals(space), point)
    }

    pub(crate) fn check_primal(&self, theta: &DVector<f64>) -> Result<()> {
        self.check(Space::Primal, theta)
    }

    pub(crate) fn check_dual(&self, mu: &DVector<f64>) -> Result<()> {
        self.check(Space::Dual, mu)
    }

    fn raw_bregman(&self, theta: &DVector<f64>, theta_ref: &DVector<f64>) -> f64 {
        // Also used on the swapped pair for B_H.
        let lin = self
            .mirror_map(theta_ref)
            .dot(&(theta - theta_ref));
        (self.potential(theta) - self.potential(theta_ref) - lin).max(0.0)
    }
}

/// B_G(θ, θ') = G(θ) − G(θ') − ⟨g(θ'), θ − θ'⟩.
pub fn bregman_primal(
    pair: &ConjugatePair,
    theta: &DVector<f64>,
    theta_ref: &DVector<f64>,
) -> Result<f64> {
    pair.check_primal(theta)?;
    pair.check_primal(theta_ref)?;
    Ok(pair.raw_bregman(theta, theta_ref))
}

/// B_H(μ, μ') = H(μ) − H(μ') − ⟨h(μ'), μ − μ'⟩.
pub fn bregman_dual(pair: &ConjugatePair, mu: &DVector<f64>, mu_ref: &DVector<f64>) -> Result<f64> {
    pair.check_dual(mu)?;
    pair.check_dual(mu_ref)?;
    Ok(pair.dual().raw_bregman(mu, mu_ref))
}

/// B_G(θ, θ') − B_H(g(θ'), g(θ)); zero up to rounding.
pub fn duality_gap(
    pair: &ConjugatePair,
    theta: &DVector<f64>,
    theta_ref: &DVector<f64>,
) -> Result<f64> {
    let primal = bregman_primal(pair, theta, theta_ref)?;
    let dual = bregman_dual(pair, &pair.mirror_map(theta_ref), &pair.mirror_map(theta))?;
    Ok(primal - dual)
}

/// ∇²G(θ), the metric of the primal manifold.
pub fn metric_primal(pair: &ConjugatePair, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
    pair.check_primal(theta)?;
    Ok(pair.hessian_potential(theta))
}

/// ∇²H(μ), the metric of the dual manifold.
pub fn metric_dual(pair: &ConjugatePair, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
    pair.check_dual(mu)?;
    Ok(pair.hessian_conjugate(mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn gaussian_bregman_is_half_squared_distance() {
        let pair = ConjugatePair::gaussian(2).unwrap();
        let b = bregman_primal(&pair, &v(&[1.0, 2.0]), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(b, 2.5);
        let d = bregman_dual(&pair, &v(&[3.0]), &v(&[1.0]));
        assert!(matches!(d, Err(Error::Dimension { .. })));
        let pair1 = ConjugatePair::gaussian(1).unwrap();
        assert_eq!(bregman_dual(&pair1, &v(&[3.0]), &v(&[1.0])).unwrap(), 2.0);
    }

    #[test]
    fn self_divergence_vanishes() {
        for pair in [
            ConjugatePair::gaussian(3).unwrap(),
            ConjugatePair::poisson(),
            ConjugatePair::bernoulli(),
        ] {
            let theta = DVector::from_element(pair.dim(), 0.7);
            assert_eq!(bregman_primal(&pair, &theta, &theta).unwrap(), 0.0);
            let mu = pair.mirror_map(&theta);
            assert_eq!(bregman_dual(&pair, &mu, &mu).unwrap(), 0.0);
            assert_eq!(duality_gap(&pair, &theta, &theta).unwrap(), 0.0);
        }
    }

    #[test]
    fn poisson_divergences_match_hand_values() {
        let pair = ConjugatePair::poisson();
        let e = std::f64::consts::E;
        let bg = bregman_primal(&pair, &v(&[1.0]), &v(&[0.0])).unwrap();
        assert!((bg - (e - 2.0)).abs() < 1e-15);
        // H(μ) − H(μ') − h(μ')(μ − μ') with H(μ) = μ log μ − μ, evaluated by hand.
        let (mu, mu_ref) = (1.0f64, e);
        let oracle = (mu * mu.ln() - mu) - (mu_ref * mu_ref.ln() - mu_ref) - mu_ref.ln() * (mu - mu_ref);
        let bh = bregman_dual(&pair, &v(&[mu]), &v(&[mu_ref])).unwrap();
        assert!((bh - oracle).abs() < 1e-15);
        assert!((bh - (e - 2.0)).abs() < 1e-15);
        assert!(duality_gap(&pair, &v(&[1.0]), &v(&[0.0])).unwrap().abs() < 1e-12);
    }

    #[test]
    fn domain_violations_are_rejected_not_clamped() {
        let pair = ConjugatePair::bernoulli();
        let err = bregman_dual(&pair, &v(&[0.5]), &v(&[1.0])).unwrap_err();
        assert!(matches!(
            err,
            Error::Domain {
                space: Space::Dual,
                coordinate: 0,
                ..
            }
        ));
        assert!(metric_dual(&ConjugatePair::poisson(), &v(&[0.0])).is_err());
        assert!(metric_dual(&ConjugatePair::poisson(), &v(&[-1.0])).is_err());
        assert!(bregman_primal(&pair, &v(&[f64::INFINITY]), &v(&[0.0])).is_err());
    }

    #[test]
    fn metric_values() {
        let g = ConjugatePair::gaussian(3).unwrap();
        assert_eq!(metric_primal(&g, &v(&[1.0, -2.0, 3.0])).unwrap(), DMatrix::identity(3, 3));
        assert_eq!(metric_dual(&g, &v(&[1.0, -2.0, 3.0])).unwrap(), DMatrix::identity(3, 3));
        assert_eq!(metric_primal(&ConjugatePair::bernoulli(), &v(&[0.0])).unwrap()[(0, 0)], 0.25);
        assert_eq!(metric_primal(&ConjugatePair::poisson(), &v(&[0.0])).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn dual_orientation_swaps_roles() {
        let pair = ConjugatePair::poisson();
        let swapped = pair.dual();
        assert_eq!(swapped.dual(), pair);
        let mu = v(&[2.0]);
        assert_eq!(swapped.potential(&mu), pair.conjugate(&mu));
        assert_eq!(swapped.mirror_map(&mu), pair.inverse_mirror_map(&mu));
        assert_eq!(swapped.primal_domain(), pair.dual_domain());
        assert_eq!(swapped.hessian_potential(&mu), pair.hessian_conjugate(&mu));
    }
}
