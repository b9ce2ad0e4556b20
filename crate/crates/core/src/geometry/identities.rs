//! Seeded property sweep over the duality identities of a conjugate pair.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bregman_dual, bregman_primal, numeric_conjugate, ConjugatePair, Potential};
use crate::error::Result;

/// Outcome of one named check: the worst error seen against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, max_error: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.into(),
            max_error,
            tolerance,
            pass: max_error.is_finite() && max_error <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityTolerances {
    /// Relative to max(1, B).
    pub duality_gap: f64,
    pub inverse_map: f64,
    pub hessian_reciprocity: f64,
    pub numeric_conjugate: f64,
}

impl Default for IdentityTolerances {
    fn default() -> Self {
        IdentityTolerances {
            duality_gap: 1e-10,
            inverse_map: 1e-9,
            hessian_reciprocity: 1e-7,
            numeric_conjugate: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl IdentityReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Compact box inside the natural-parameter domain used for random draws.
pub fn sampling_box(p: Potential) -> (f64, f64) {
    match p {
        Potential::Quadratic => (-5.0, 5.0),
        Potential::Exponential => (-4.0, 4.0),
        Potential::Logistic => (-5.0, 5.0),
    }
}

/// Uniform draw from the sampling box, in natural coordinates.
pub fn draw_natural<R: Rng>(pair: &ConjugatePair, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(
        pair.dim(),
        pair.potentials().iter().map(|&p| {
            let (lo, hi) = sampling_box(p);
            rng.random_range(lo..hi)
        }),
    )
}

fn sup_norm(x: &DVector<f64>) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Runs every identity on `samples` random point pairs and `conjugate_samples`
/// random dual points. `pair` must be in natural orientation.
pub fn check_identities(
    pair: &ConjugatePair,
    samples: usize,
    conjugate_samples: usize,
    seed: u64,
    tol: IdentityTolerances,
) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = pair.dim();
    let eye = DMatrix::<f64>::identity(p, p);

    let mut gap = 0.0f64;
    let mut dual_gap = 0.0f64;
    let mut inverse = 0.0f64;
    let mut reciprocity = 0.0f64;
    let mut min_positive = f64::INFINITY;
    let mut self_div = 0.0f64;

    for _ in 0..samples {
        let theta = draw_natural(pair, &mut rng);
        let theta_ref = draw_natural(pair, &mut rng);
        let mu = pair.mirror_map(&theta);
        let mu_ref = pair.mirror_map(&theta_ref);

        let bg = bregman_primal(pair, &theta, &theta_ref)?;
        let bh_swapped = bregman_dual(pair, &mu_ref, &mu)?;
        gap = gap.max((bg - bh_swapped).abs() / bg.max(1.0));

        let bh = bregman_dual(pair, &mu, &mu_ref)?;
        let bg_swapped = bregman_primal(pair, &pair.inverse_mirror_map(&mu_ref), &pair.inverse_mirror_map(&mu))?;
        dual_gap = dual_gap.max((bh - bg_swapped).abs() / bh.max(1.0));

        inverse = inverse.max(sup_norm(&(pair.inverse_mirror_map(&mu) - &theta)));

        let product = pair.hessian_conjugate(&mu) * pair.hessian_potential(&theta);
        reciprocity = reciprocity.max((product - &eye).amax());

        self_div = self_div.max(bregman_primal(pair, &theta, &theta)?);
        let nudged = theta.map(|x| x + 1e-3);
        min_positive = min_positive.min(bregman_primal(pair, &nudged, &theta)?);
    }

    let mut conj = 0.0f64;
    for _ in 0..conjugate_samples {
        let mu = pair.mirror_map(&draw_natural(pair, &mut rng));
        let sol = numeric_conjugate(|t| pair.potential(t), |t| pair.mirror_map(t), &mu)?;
        conj = conj.max((sol.value - pair.conjugate(&mu)).abs());
    }

    let mut checks = vec![
        CheckResult::new("duality_gap", gap, tol.duality_gap),
        CheckResult::new("dual_duality_gap", dual_gap, tol.duality_gap),
        CheckResult::new("inverse_map", inverse, tol.inverse_map),
        CheckResult::new("hessian_reciprocity", reciprocity, tol.hessian_reciprocity),
        CheckResult::new("self_divergence", self_div, 0.0),
    ];
    // 1 counts a perturbed pair whose divergence was not strictly positive.
    checks.push(CheckResult::new(
        "strict_positivity",
        if min_positive > 0.0 { 0.0 } else { 1.0 },
        0.0,
    ));
    if conjugate_samples > 0 {
        checks.push(CheckResult::new("numeric_conjugate", conj, tol.numeric_conjugate));
    }

    Ok(IdentityReport {
        samples,
        seed,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_passes_for_catalog_pairs() {
        for pair in [
            ConjugatePair::gaussian(2).unwrap(),
            ConjugatePair::poisson(),
            ConjugatePair::bernoulli(),
        ] {
            let r = check_identities(&pair, 200, 20, 11, IdentityTolerances::default()).unwrap();
            assert!(r.pass(), "{r:?}");
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let pair = ConjugatePair::bernoulli();
        let a = check_identities(&pair, 50, 5, 3, IdentityTolerances::default()).unwrap();
        let b = check_identities(&pair, 50, 5, 3, IdentityTolerances::default()).unwrap();
        assert_eq!(a, b);
    }
}
