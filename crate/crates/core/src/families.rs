//! Exponential families in natural form, `p(y | θ) ∝ exp(⟨θ, y⟩ − G(θ))`,
//! built as independent products of scalar Gaussian (unit variance),
//! Poisson and Bernoulli components.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{metric_dual, ConjugatePair, Potential};
use crate::seeding::ReplicateStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarFamily {
    Gaussian,
    Poisson,
    Bernoulli,
}

impl ScalarFamily {
    pub fn potential(self) -> Potential {
        match self {
            ScalarFamily::Gaussian => Potential::Quadratic,
            ScalarFamily::Poisson => Potential::Exponential,
            ScalarFamily::Bernoulli => Potential::Logistic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarFamily::Gaussian => "gaussian",
            ScalarFamily::Poisson => "poisson",
            ScalarFamily::Bernoulli => "bernoulli",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gaussian" => Some(ScalarFamily::Gaussian),
            "poisson" => Some(ScalarFamily::Poisson),
            "bernoulli" => Some(ScalarFamily::Bernoulli),
            _ => None,
        }
    }

    fn admits(self, y: f64) -> bool {
        match self {
            ScalarFamily::Gaussian => y.is_finite(),
            ScalarFamily::Poisson => y >= 0.0 && y.is_finite() && y.fract() == 0.0,
            ScalarFamily::Bernoulli => y == 0.0 || y == 1.0,
        }
    }

    fn draw<R: Rng + ?Sized>(self, mean: f64, rng: &mut R) -> f64 {
        match self {
            ScalarFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                mean + z
            }
            ScalarFamily::Poisson => poisson_draw(mean, rng),
            ScalarFamily::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Inversion of the CDF for small means; `rand_distr` beyond that.
fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    const INVERSION_LIMIT: f64 = 30.0;
    // P(k > 200 | mean < 30) is far below 1e-60; a hit means a degenerate uniform.
    const CAP: u32 = 200;
    if mean >= INVERSION_LIMIT {
        let d = rand_distr::Poisson::new(mean).expect("mean checked positive and finite");
        return d.sample(rng);
    }
    let start = (-mean).exp();
    loop {
        let u: f64 = rng.random();
        let (mut k, mut pk, mut cdf) = (0u32, start, start);
        while u > cdf && k < CAP {
            k += 1;
            pk *= mean / k as f64;
            cdf += pk;
        }
        if k < CAP {
            return k as f64;
        }
    }
}

/// One sample `y` with a positive weight multiplying its loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: DVector<f64>,
    pub weight: f64,
}

impl Observation {
    pub fn new(y: DVector<f64>) -> Self {
        Observation { y, weight: 1.0 }
    }

    pub fn scalar(y: f64) -> Self {
        Observation::new(DVector::from_element(1, y))
    }

    pub fn weighted(y: DVector<f64>, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::Invalid(format!("observation weight must be positive, got {weight}")));
        }
        Ok(Observation { y, weight })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Gaussian,
    Poisson,
    Bernoulli,
    Product,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Poisson => "poisson",
            FamilyKind::Bernoulli => "bernoulli",
            FamilyKind::Product => "product",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFamily {
    kind: FamilyKind,
    components: Vec<ScalarFamily>,
    pair: ConjugatePair,
}

impl ExponentialFamily {
    /// `dim` independent copies of one scalar family.
    pub fn iid(scalar: ScalarFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("family dimension must be ≥ 1".into()));
        }
        let kind = match scalar {
            ScalarFamily::Gaussian => FamilyKind::Gaussian,
            ScalarFamily::Poisson => FamilyKind::Poisson,
            ScalarFamily::Bernoulli => FamilyKind::Bernoulli,
        };
        Self::build(kind, vec![scalar; dim])
    }

    pub fn gaussian(dim: usize) -> Result<Self> {
        Self::iid(ScalarFamily::Gaussian, dim)
    }

    pub fn poisson() -> Self {
        Self::iid(ScalarFamily::Poisson, 1).expect("dimension 1")
    }

    pub fn bernoulli() -> Self {
        Self::iid(ScalarFamily::Bernoulli, 1).expect("dimension 1")
    }

    /// Independent product of arbitrary scalar components.
    pub fn product(components: Vec<ScalarFamily>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Invalid("a product family needs at least one component".into()));
        }
        Self::build(FamilyKind::Product, components)
    }

    fn build(kind: FamilyKind, components: Vec<ScalarFamily>) -> Result<Self> {
        let pair = ConjugatePair::new(components.iter().map(|c| c.potential()).collect())?;
        Ok(ExponentialFamily {
            kind,
            components,
            pair,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn components(&self) -> &[ScalarFamily] {
        &self.components
    }

    pub fn pair(&self) -> &ConjugatePair {
        &self.pair
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn check_observation(&self, obs: &Observation) -> Result<()> {
        if obs.y.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: obs.y.len(),
            });
        }
        for (coordinate, (c, &value)) in self.components.iter().zip(obs.y.iter()).enumerate() {
            if !c.admits(value) {
                return Err(Error::Observation {
                    family: c.name(),
                    coordinate,
                    value,
                });
            }
        }
        Ok(())
    }

    /// `B_G(θ, h(y))` extended by continuity to boundary observations; equals
    /// `G(θ) − ⟨θ, y⟩` up to a θ-independent constant.
    pub fn log_loss_natural(&self, theta: &DVector<f64>, obs: &Observation) -> Result<f64> {
        self.pair.check_primal(theta)?;
        self.check_observation(obs)?;
        Ok(self.natural_loss_unchecked(theta, obs))
    }

    /// `B_H(y, μ)`, extended by continuity in `y` to the boundary.
    pub fn log_loss_mean(&self, mu: &DVector<f64>, obs: &Observation) -> Result<f64> {
        self.pair.check_dual(mu)?;
        self.check_observation(obs)?;
        Ok(self.mean_loss_unchecked(mu, obs))
    }

    /// ∇_θ of `log_loss_natural`: `g(θ) − y`, scaled by the weight.
    pub fn log_loss_natural_gradient(&self, theta: &DVector<f64>, obs: &Observation) -> DVector<f64> {
        (self.pair.mirror_map(theta) - &obs.y) * obs.weight
    }

    /// ∇_μ of `log_loss_mean`: `−∇²H(μ)(y − μ)`, scaled by the weight.
    pub fn log_loss_mean_gradient(&self, mu: &DVector<f64>, obs: &Observation) -> DVector<f64> {
        let mut out = self.pair.hessian_conjugate_diagonal(mu);
        for ((c, &y), &m) in out.iter_mut().zip(obs.y.iter()).zip(mu.iter()) {
            *c = -(*c * (y - m)) * obs.weight;
        }
        out
    }

    pub(crate) fn natural_loss_unchecked(&self, theta: &DVector<f64>, obs: &Observation) -> f64 {
        let value = self.pair.potential(theta) - theta.dot(&obs.y) + self.pair.conjugate_closure(&obs.y);
        obs.weight * value
    }

    pub(crate) fn mean_loss_unchecked(&self, mu: &DVector<f64>, obs: &Observation) -> f64 {
        let lin: f64 = self
            .pair
            .inverse_mirror_map(mu)
            .iter()
            .zip(obs.y.iter().zip(mu.iter()))
            .map(|(h, (y, m))| h * (y - m))
            .sum();
        let value = self.pair.conjugate_closure(&obs.y) - self.pair.conjugate(mu) - lin;
        obs.weight * value
    }

    /// One draw with mean `mu`. Deterministic given `rng`, which it advances.
    pub fn sample<R: Rng + ?Sized>(&self, mu: &DVector<f64>, rng: &mut R) -> Result<Observation> {
        self.pair.check_dual(mu)?;
        Ok(self.sample_unchecked(mu, rng))
    }

    fn sample_unchecked<R: Rng + ?Sized>(&self, mu: &DVector<f64>, rng: &mut R) -> Observation {
        let y = DVector::from_iterator(
            self.dim(),
            self.components
                .iter()
                .zip(mu.iter())
                .map(|(c, &m)| c.draw(m, rng)),
        );
        Observation::new(y)
    }

    /// Draws `len` observations; observation `t` (1-based) comes from step `t`
    /// of the replicate stream.
    pub fn sample_stream(
        &self,
        mu: &DVector<f64>,
        stream: &ReplicateStream,
        len: usize,
    ) -> Result<Vec<Observation>> {
        self.pair.check_dual(mu)?;
        (1..=len as u64)
            .map(|t| Ok(self.sample_unchecked(mu, &mut stream.step(t))))
            .collect()
    }

    /// ℐ(μ) = ∇²H(μ).
    pub fn fisher_information_mean(&self, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
        metric_dual(&self.pair, mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::SeedTree;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn gaussian_natural_loss_is_half_squared_distance() {
        let fam = ExponentialFamily::gaussian(1).unwrap();
        let l = fam.log_loss_natural(&v(&[0.0]), &Observation::scalar(1.0)).unwrap();
        assert_eq!(l, 0.5);
    }

    #[test]
    fn poisson_natural_loss_differs_from_linear_form_by_a_constant() {
        let fam = ExponentialFamily::poisson();
        let obs = Observation::scalar(1.0);
        let offsets: Vec<f64> = [-1.0, 0.0, 0.5, 2.0]
            .iter()
            .map(|&t: &f64| fam.log_loss_natural(&v(&[t]), &obs).unwrap() - (t.exp() - t))
            .collect();
        for o in &offsets {
            assert!((o - offsets[0]).abs() < 1e-14);
        }
        // G(0) − 0·1 = 1, shifted by H(1) = −1.
        assert!((fam.log_loss_natural(&v(&[0.0]), &obs).unwrap() - 0.0).abs() < 1e-15);
    }

    #[test]
    fn mean_loss_hand_values() {
        let e = std::f64::consts::E;
        let l = ExponentialFamily::poisson()
            .log_loss_mean(&v(&[e]), &Observation::scalar(1.0))
            .unwrap();
        assert!((l - (e - 2.0)).abs() < 1e-15);
        let l = ExponentialFamily::bernoulli()
            .log_loss_mean(&v(&[0.5]), &Observation::scalar(1.0))
            .unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let l = ExponentialFamily::poisson()
            .log_loss_mean(&v(&[3.0]), &Observation::scalar(3.0))
            .unwrap();
        assert!(l.abs() < 1e-15);
    }

    #[test]
    fn gradients_vanish_when_mean_matches_observation() {
        for fam in [
            ExponentialFamily::gaussian(2).unwrap(),
            ExponentialFamily::poisson(),
            ExponentialFamily::bernoulli(),
        ] {
            let theta = DVector::from_element(fam.dim(), 0.0);
            let mu = fam.pair().mirror_map(&theta);
            let obs = Observation::new(mu.clone());
            assert_eq!(fam.log_loss_natural_gradient(&theta, &obs).amax(), 0.0);
            assert_eq!(fam.log_loss_mean_gradient(&mu, &obs).amax(), 0.0);
        }
    }

    #[test]
    fn losses_agree_across_coordinates() {
        let fam = ExponentialFamily::product(vec![
            ScalarFamily::Gaussian,
            ScalarFamily::Poisson,
            ScalarFamily::Bernoulli,
        ])
        .unwrap();
        let theta = v(&[0.3, -0.2, 1.1]);
        let obs = Observation::new(v(&[1.5, 0.0, 1.0]));
        let a = fam.log_loss_natural(&theta, &obs).unwrap();
        let b = fam.log_loss_mean(&fam.pair().mirror_map(&theta), &obs).unwrap();
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }

    #[test]
    fn sample_space_is_enforced() {
        let fam = ExponentialFamily::bernoulli();
        assert!(matches!(
            fam.log_loss_mean(&v(&[0.5]), &Observation::scalar(0.5)),
            Err(Error::Observation { .. })
        ));
        assert!(ExponentialFamily::poisson()
            .log_loss_natural(&v(&[0.0]), &Observation::scalar(1.5))
            .is_err());
        assert!(fam.sample(&v(&[1.0]), &mut SeedTree::new(1).replicate(0).step(1)).is_err());
    }

    #[test]
    fn weights_scale_loss_and_gradient() {
        let fam = ExponentialFamily::poisson();
        let theta = v(&[0.4]);
        let one = Observation::scalar(2.0);
        let three = Observation::weighted(v(&[2.0]), 3.0).unwrap();
        let l1 = fam.log_loss_natural(&theta, &one).unwrap();
        let l3 = fam.log_loss_natural(&theta, &three).unwrap();
        assert!((l3 - 3.0 * l1).abs() < 1e-14);
        assert!(Observation::weighted(v(&[2.0]), 0.0).is_err());
    }

    #[test]
    fn fisher_information_is_the_dual_metric() {
        let fam = ExponentialFamily::bernoulli();
        let mu = v(&[0.3]);
        assert_eq!(
            fam.fisher_information_mean(&mu).unwrap(),
            metric_dual(fam.pair(), &mu).unwrap()
        );
    }

    #[test]
    fn sampler_support() {
        let tree = SeedTree::new(9).replicate(0);
        let ys = ExponentialFamily::poisson().sample_stream(&v(&[2.0]), &tree, 500).unwrap();
        assert!(ys.iter().all(|o| o.y[0] >= 0.0 && o.y[0].fract() == 0.0));
        let ys = ExponentialFamily::bernoulli().sample_stream(&v(&[0.25]), &tree, 500).unwrap();
        assert!(ys.iter().all(|o| o.y[0] == 0.0 || o.y[0] == 1.0));
        let big = ExponentialFamily::poisson().sample_stream(&v(&[80.0]), &tree, 50).unwrap();
        assert!(big.iter().all(|o| o.y[0] >= 0.0));
    }
}
