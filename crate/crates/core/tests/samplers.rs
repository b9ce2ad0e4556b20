use nalgebra::DVector;

use mdng::families::{ExponentialFamily, ScalarFamily};
use mdng::seeding::SeedTree;

const N: usize = 100_000;

fn moments(fam: &ExponentialFamily, mu: f64, seed: u64) -> (Vec<f64>, f64, f64) {
    let obs = fam
        .sample_stream(&DVector::from_element(1, mu), &SeedTree::new(seed).replicate(0), N)
        .unwrap();
    let ys: Vec<f64> = obs.iter().map(|o| o.y[0]).collect();
    let mean = ys.iter().sum::<f64>() / N as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (N - 1) as f64;
    (ys, mean, var)
}

#[test]
fn gaussian_draws_have_unit_variance_around_the_mean() {
    let fam = ExponentialFamily::gaussian(1).unwrap();
    let (_, mean, var) = moments(&fam, 0.0, 1);
    assert!(mean.abs() <= 4.0 / (N as f64).sqrt(), "mean {mean}");
    // Var of the sample variance is 2σ⁴/(N−1).
    assert!((var - 1.0).abs() <= 5.0 * (2.0 / N as f64).sqrt(), "var {var}");
}

#[test]
fn poisson_variance_equals_mean() {
    let fam = ExponentialFamily::poisson();
    for (mu, seed) in [(2.0, 2), (0.3, 3), (45.0, 4)] {
        let (ys, mean, var) = moments(&fam, mu, seed);
        assert!(ys.iter().all(|&y| y >= 0.0 && y.fract() == 0.0));
        assert!((mean - mu).abs() <= 5.0 * (mu / N as f64).sqrt(), "mu {mu}: mean {mean}");
        // Var(s²) ≈ (μ + 2μ²)/N for Poisson.
        let se = ((mu + 2.0 * mu * mu) / N as f64).sqrt();
        assert!((var - mu).abs() <= 5.0 * se, "mu {mu}: var {var}");
    }
}

#[test]
fn bernoulli_draws_are_binary_with_the_right_rate() {
    let fam = ExponentialFamily::bernoulli();
    let (ys, mean, _) = moments(&fam, 0.3, 5);
    assert!(ys.iter().all(|&y| y == 0.0 || y == 1.0));
    assert!((mean - 0.3).abs() <= 5.0 * (0.21 / N as f64).sqrt(), "mean {mean}");
}

#[test]
fn product_coordinates_are_drawn_independently() {
    let fam = ExponentialFamily::product(vec![ScalarFamily::Poisson, ScalarFamily::Bernoulli]).unwrap();
    let obs = fam
        .sample_stream(&DVector::from_vec(vec![2.0, 0.5]), &SeedTree::new(6).replicate(0), N)
        .unwrap();
    let n = N as f64;
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    for o in &obs {
        sx += o.y[0];
        sy += o.y[1];
        sxy += o.y[0] * o.y[1];
    }
    let cov = sxy / n - (sx / n) * (sy / n);
    let se = (2.0f64 * 0.25 / n).sqrt();
    assert!(cov.abs() <= 5.0 * se, "cov {cov}");
}

#[test]
fn streams_are_reproducible_and_replicates_differ() {
    let fam = ExponentialFamily::poisson();
    let mu = DVector::from_element(1, 3.0);
    let tree = SeedTree::new(11);
    let a = fam.sample_stream(&mu, &tree.replicate(0), 500).unwrap();
    let b = fam.sample_stream(&mu, &tree.replicate(0), 500).unwrap();
    let c = fam.sample_stream(&mu, &tree.replicate(1), 500).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    // Prefixes agree: step t does not depend on the stream length.
    let short = fam.sample_stream(&mu, &tree.replicate(0), 100).unwrap();
    assert_eq!(&a[..100], &short[..]);
}
