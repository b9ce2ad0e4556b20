//! Monte Carlo check that the `α_t = 1/t` natural-gradient (equivalently
//! mirror-descent) estimator of the mean attains the Cramér–Rao bound.
//!
//! Under the log-loss the natural-gradient step in mean coordinates is
//! `μ_{t+1} = μ_t + α_t (y_t − μ_t)`, so with `α_t = 1/t` the iterate is the
//! running sample mean. Its covariance scaled by `T` is compared against
//! `(∇²H(μ*))⁻¹`, the inverse Fisher information in mean coordinates.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::descent::{run_online_summary, ObservationStream, OptimizerKind, StepSchedule};
use crate::equivalence::join;
use crate::error::{Error, Result};
use crate::families::{ExponentialFamily, Observation, ScalarFamily};
use crate::seeding::SeedTree;

pub const SUMMARY_CSV_HEADER: &str = "family,mu_true,T,M,entry_i,entry_j,scaled_cov,bound,ratio,se,pass";
pub const REPLICATE_CSV_HEADER: &str = "replicate,mu_hat,warm_start,projections,status";

/// Fraction of dropped replicates above which a report fails.
pub const MAX_DROP_FRACTION: f64 = 0.01;

/// How the first iterate `μ_1` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Start from the mean of the shortest prefix `y_1..y_k` whose mean is
    /// interior, then continue with `α_t = 1/t`. The estimate after `T`
    /// observations is exactly the sample mean.
    FirstObservation,
    /// Start from a fixed interior point counted as one pseudo-observation
    /// (`α_t = 1/(t+1)`). Biased; efficient only as `T → ∞`.
    Fixed(DVector<f64>),
}

impl InitMode {
    pub fn name(&self) -> &'static str {
        match self {
            InitMode::FirstObservation => "first_observation",
            InitMode::Fixed(_) => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyConfig {
    pub mu_true: DVector<f64>,
    pub horizon: usize,
    pub replicates: usize,
    pub seed: u64,
    pub init: InitMode,
    /// `Natural` or `Mirror`; both give the same estimate.
    pub optimizer: OptimizerKind,
    pub parallel: bool,
}

impl EfficiencyConfig {
    pub fn new(mu_true: DVector<f64>, horizon: usize, replicates: usize, seed: u64) -> Self {
        EfficiencyConfig {
            mu_true,
            horizon,
            replicates,
            seed,
            init: InitMode::FirstObservation,
            optimizer: OptimizerKind::Natural,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub index: usize,
    /// μ̂_T; `None` when the replicate was dropped.
    pub estimate: Option<DVector<f64>>,
    /// Observations consumed by the warm start (0 in fixed mode).
    pub warm_start: usize,
    /// No interior prefix existed and the fixed fallback was used.
    pub fallback: bool,
    pub projections: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryStat {
    pub i: usize,
    pub j: usize,
    pub scaled_cov: f64,
    pub bound: f64,
    /// `scaled_cov / bound` on the diagonal; `scaled_cov / √(b_ii b_jj)` off it.
    pub ratio: f64,
    /// Monte Carlo standard error of `ratio`, widened for discrete components.
    pub se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub family: String,
    pub mu_true: DVector<f64>,
    pub horizon: usize,
    pub replicates: usize,
    pub seed: u64,
    pub init: InitMode,
    /// T · Cov(μ̂_T), unbiased.
    pub scaled_cov: DMatrix<f64>,
    /// T · E[(μ̂_T − μ*)(μ̂_T − μ*)ᵀ]
    pub scaled_mse: DMatrix<f64>,
    /// (∇²H(μ*))⁻¹
    pub bound: DMatrix<f64>,
    pub entries: Vec<EntryStat>,
    pub dropped: usize,
    pub fallbacks: usize,
    pub projections: usize,
    pub outcomes: Vec<ReplicateOutcome>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl EfficiencyReport {
    pub fn entry(&self, i: usize, j: usize) -> Option<&EntryStat> {
        self.entries.iter().find(|e| e.i == i && e.j == j)
    }

    /// Diagonal `T · MSE / bound`.
    pub fn mse_ratio(&self, i: usize) -> f64 {
        self.scaled_mse[(i, i)] / self.bound[(i, i)]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(SUMMARY_CSV_HEADER);
        out.push('\n');
        let mu = join(&self.mu_true);
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.family,
                mu,
                self.horizon,
                self.replicates,
                e.i,
                e.j,
                e.scaled_cov,
                e.bound,
                e.ratio,
                e.se,
                u8::from(e.pass)
            );
        }
        out
    }

    pub fn replicates_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(REPLICATE_CSV_HEADER);
        out.push('\n');
        for o in &self.outcomes {
            let (mu, status) = match (&o.estimate, &o.error) {
                (Some(e), _) if o.fallback => (join(e), "fallback".to_string()),
                (Some(e), _) => (join(e), "ok".to_string()),
                (None, Some(err)) => (String::new(), format!("dropped: {}", err.replace(',', ";"))),
                (None, None) => (String::new(), "dropped".to_string()),
            };
            let _ = writeln!(out, "{},{},{},{},{}", o.index, mu, o.warm_start, o.projections, status);
        }
        out
    }
}

/// Relative band multiplier: 1 for Gaussian components, 1.5 for the
/// discrete families whose sample variances have heavier tails.
fn kurtosis_widening(c: ScalarFamily) -> f64 {
    match c {
        ScalarFamily::Gaussian => 1.0,
        ScalarFamily::Poisson | ScalarFamily::Bernoulli => 1.5,
    }
}

/// A fixed interior point used when no prefix of the stream is interior.
pub fn fallback_init(family: &ExponentialFamily) -> DVector<f64> {
    DVector::from_iterator(
        family.dim(),
        family.components().iter().map(|c| match c {
            ScalarFamily::Gaussian => 0.0,
            ScalarFamily::Poisson => 1.0,
            ScalarFamily::Bernoulli => 0.5,
        }),
    )
}

/// Length of the shortest prefix whose mean lies strictly inside the mean
/// domain, with that mean.
pub fn interior_prefix(family: &ExponentialFamily, obs: &[Observation]) -> Option<(usize, DVector<f64>)> {
    let domain = family.pair().dual_domain();
    let mut sum = DVector::zeros(family.dim());
    for (k, o) in obs.iter().enumerate() {
        sum += &o.y;
        let mean = &sum / (k + 1) as f64;
        if domain.contains(&mean) {
            return Some((k + 1, mean));
        }
    }
    None
}

/// Runs `optimizer` from `init` (mean coordinates) over `obs` and returns
/// the final mean-coordinate estimate and the number of projections.
fn estimate_from(
    family: &ExponentialFamily,
    optimizer: OptimizerKind,
    obs: &[Observation],
    schedule: StepSchedule,
    init_mu: DVector<f64>,
) -> Result<(DVector<f64>, usize)> {
    if obs.is_empty() {
        return Ok((init_mu, 0));
    }
    let pair = family.pair();
    let stream = ObservationStream::new(family, obs)?;
    match optimizer {
        OptimizerKind::Natural | OptimizerKind::Retraction(_) => {
            let s = run_online_summary(optimizer, pair, &stream, schedule, &init_mu, obs.len())?;
            Ok((s.final_point, s.projections))
        }
        OptimizerKind::Mirror | OptimizerKind::GradientDescent => {
            let init = pair.inverse_mirror_map(&init_mu);
            let s = run_online_summary(optimizer, pair, &stream, schedule, &init, obs.len())?;
            Ok((pair.mirror_map(&s.final_point), s.projections))
        }
    }
}

/// Estimate for replicate `index` from a given observation stream.
pub fn replicate_estimate(
    family: &ExponentialFamily,
    obs: &[Observation],
    init: &InitMode,
    optimizer: OptimizerKind,
) -> Result<ReplicateOutcome> {
    let inv_t = StepSchedule::inverse_t(1.0)?;
    let fixed = |mu0: DVector<f64>, fallback: bool| -> Result<ReplicateOutcome> {
        let (estimate, projections) = estimate_from(family, optimizer, obs, inv_t.with_offset(1), mu0)?;
        Ok(ReplicateOutcome {
            index: 0,
            estimate: Some(estimate),
            warm_start: 0,
            fallback,
            projections,
            error: None,
        })
    };
    match init {
        InitMode::Fixed(mu0) => {
            family.pair().check_dual(mu0)?;
            fixed(mu0.clone(), false)
        }
        InitMode::FirstObservation => match interior_prefix(family, obs) {
            Some((k, mean)) => {
                let (estimate, projections) =
                    estimate_from(family, optimizer, &obs[k..], inv_t.with_offset(k), mean)?;
                Ok(ReplicateOutcome {
                    index: 0,
                    estimate: Some(estimate),
                    warm_start: k,
                    fallback: false,
                    projections,
                    error: None,
                })
            }
            None => fixed(fallback_init(family), true),
        },
    }
}

fn run_replicate(family: &ExponentialFamily, cfg: &EfficiencyConfig, tree: SeedTree, index: usize) -> ReplicateOutcome {
    let outcome = family
        .sample_stream(&cfg.mu_true, &tree.replicate(index as u64), cfg.horizon)
        .and_then(|obs| replicate_estimate(family, &obs, &cfg.init, cfg.optimizer));
    match outcome {
        Ok(mut o) => {
            o.index = index;
            o
        }
        Err(e) => ReplicateOutcome {
            index,
            estimate: None,
            warm_start: 0,
            fallback: false,
            projections: 0,
            error: Some(e.to_string()),
        },
    }
}

/// Streaming mean and co-moment matrix, updated in replicate order.
struct Moments {
    n: usize,
    mean: DVector<f64>,
    comoment: DMatrix<f64>,
    about_truth: DMatrix<f64>,
}

impl Moments {
    fn new(p: usize) -> Self {
        Moments {
            n: 0,
            mean: DVector::zeros(p),
            comoment: DMatrix::zeros(p, p),
            about_truth: DMatrix::zeros(p, p),
        }
    }

    fn push(&mut self, x: &DVector<f64>, truth: &DVector<f64>) {
        self.n += 1;
        let delta = x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta_after = x - &self.mean;
        self.comoment += &delta * delta_after.transpose();
        let e = x - truth;
        self.about_truth += &e * e.transpose();
    }
}

pub fn run_efficiency(family: &ExponentialFamily, cfg: &EfficiencyConfig) -> Result<EfficiencyReport> {
    if cfg.horizon < 2 || cfg.replicates < 2 {
        return Err(Error::Invalid(format!(
            "efficiency needs T ≥ 2 and M ≥ 2, got T={} M={}",
            cfg.horizon, cfg.replicates
        )));
    }
    family.pair().check_dual(&cfg.mu_true)?;
    if let InitMode::Fixed(mu0) = &cfg.init {
        family.pair().check_dual(mu0)?;
    }
    let tree = SeedTree::new(cfg.seed);
    let outcomes: Vec<ReplicateOutcome> = if cfg.parallel {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| run_replicate(family, cfg, tree, r))
            .collect()
    } else {
        (0..cfg.replicates).map(|r| run_replicate(family, cfg, tree, r)).collect()
    };

    let p = family.dim();
    let mut moments = Moments::new(p);
    for o in &outcomes {
        if let Some(x) = &o.estimate {
            moments.push(x, &cfg.mu_true);
        }
    }
    let kept = moments.n;
    let dropped = cfg.replicates - kept;
    let fallbacks = outcomes.iter().filter(|o| o.fallback).count();
    let projections = outcomes.iter().map(|o| o.projections).sum();
    let t = cfg.horizon as f64;

    let mut notes = Vec::new();
    if kept < 2 {
        return Err(Error::Invalid(format!("only {kept} replicates survived")));
    }
    let scaled_cov = &moments.comoment * (t / (kept - 1) as f64);
    let scaled_mse = &moments.about_truth * (t / kept as f64);
    let bound = DMatrix::from_diagonal(&family.pair().hessian_conjugate_diagonal(&cfg.mu_true).map(|h| 1.0 / h));

    let base_se = (2.0 / kept as f64).sqrt();
    let comps = family.components();
    let mut entries = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let widen = kurtosis_widening(comps[i]).max(kurtosis_widening(comps[j]));
            let (ratio, se) = if i == j {
                (scaled_cov[(i, i)] / bound[(i, i)], base_se * widen)
            } else {
                let scale = (bound[(i, i)] * bound[(j, j)]).sqrt();
                (scaled_cov[(i, j)] / scale, widen / (kept as f64).sqrt())
            };
            let target = if i == j { 1.0 } else { 0.0 };
            entries.push(EntryStat {
                i,
                j,
                scaled_cov: scaled_cov[(i, j)],
                bound: bound[(i, j)],
                ratio,
                se,
                pass: ratio.is_finite() && (ratio - target).abs() <= 3.0 * se,
            });
        }
    }

    if dropped > 0 {
        notes.push(format!("{dropped} replicates dropped"));
    }
    if fallbacks > 0 {
        notes.push(format!(
            "{fallbacks} replicates had no interior prefix and started from the fixed fallback"
        ));
    }
    if projections > 0 {
        notes.push(format!("{projections} safeguard projections"));
    }
    let drop_ok = (dropped as f64) <= MAX_DROP_FRACTION * cfg.replicates as f64;
    if !drop_ok {
        notes.push("more than 1% of replicates dropped".into());
    }
    let pass = drop_ok && entries.iter().all(|e| e.pass);

    Ok(EfficiencyReport {
        family: family.name().to_string(),
        mu_true: cfg.mu_true.clone(),
        horizon: cfg.horizon,
        replicates: cfg.replicates,
        seed: cfg.seed,
        init: cfg.init.clone(),
        scaled_cov,
        scaled_mse,
        bound,
        entries,
        dropped,
        fallbacks,
        projections,
        outcomes,
        notes,
        pass,
    })
}

/// max_t ‖μ_t − mean(y_1..y_t)‖∞ for the natural-gradient recursion with
/// `α_t = 1/t` started at the first interior prefix mean; the reference
/// mean uses compensated summation. Only prefixes from the warm start on
/// are compared.
pub fn running_mean_identity_check(family: &ExponentialFamily, obs: &[Observation], horizon: usize) -> Result<f64> {
    let obs = &obs[..horizon.min(obs.len())];
    let (k, init) = interior_prefix(family, obs)
        .ok_or_else(|| Error::Invalid("no prefix of the stream has an interior mean".into()))?;
    let p = family.dim();
    let mut sum = vec![0.0f64; p];
    let mut carry = vec![0.0f64; p];
    let add = |sum: &mut [f64], carry: &mut [f64], y: &DVector<f64>| {
        for i in 0..p {
            let v = y[i] - carry[i];
            let s = sum[i] + v;
            carry[i] = (s - sum[i]) - v;
            sum[i] = s;
        }
    };
    for o in &obs[..k] {
        add(&mut sum, &mut carry, &o.y);
    }
    let mut worst = 0.0f64;
    let mut check = |mu: &DVector<f64>, n: usize, sum: &[f64]| {
        for i in 0..p {
            worst = worst.max((mu[i] - sum[i] / n as f64).abs());
        }
    };
    check(&init, k, &sum);
    if k == obs.len() {
        return Ok(worst);
    }
    let rest = &obs[k..];
    let stream = ObservationStream::new(family, rest)?;
    let traj = crate::descent::run_online(
        OptimizerKind::Natural,
        family.pair(),
        &stream,
        StepSchedule::inverse_t(1.0)?.with_offset(k),
        &init,
        rest.len(),
    )
    .map_err(|a| a.error)?;
    // After the update driven by rest[idx], k + idx + 1 observations are in.
    let mut n = k;
    for (idx, o) in rest.iter().enumerate() {
        add(&mut sum, &mut carry, &o.y);
        n += 1;
        let mu = if idx + 1 < traj.iterates.len() {
            traj.iterates[idx + 1].mu.clone().expect("recorded")
        } else {
            traj.final_point.clone().expect("completed run")
        };
        check(&mu, n, &sum);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn stream(ys: &[f64]) -> Vec<Observation> {
        ys.iter().map(|&y| Observation::scalar(y)).collect()
    }

    #[test]
    fn running_mean_of_small_stream() {
        let fam = ExponentialFamily::poisson();
        let obs = stream(&[3.0, 1.0, 2.0]);
        assert_eq!(running_mean_identity_check(&fam, &obs, 3).unwrap(), 0.0);
        let o = replicate_estimate(&fam, &obs, &InitMode::FirstObservation, OptimizerKind::Natural).unwrap();
        assert_eq!(o.estimate.unwrap(), v(&[2.0]));
        assert_eq!(o.warm_start, 1);
    }

    #[test]
    fn constant_stream_is_a_fixed_point() {
        let fam = ExponentialFamily::gaussian(1).unwrap();
        let obs = stream(&[1.25; 40]);
        assert_eq!(running_mean_identity_check(&fam, &obs, 40).unwrap(), 0.0);
    }

    #[test]
    fn boundary_prefix_is_skipped() {
        let fam = ExponentialFamily::bernoulli();
        let obs = stream(&[0.0, 0.0, 1.0, 0.0, 1.0]);
        let (k, mean) = interior_prefix(&fam, &obs).unwrap();
        assert_eq!(k, 3);
        assert!((mean[0] - 1.0 / 3.0).abs() < 1e-16);
        let o = replicate_estimate(&fam, &obs, &InitMode::FirstObservation, OptimizerKind::Natural).unwrap();
        assert!((o.estimate.unwrap()[0] - 0.4).abs() < 1e-15);
        assert_eq!(o.projections, 0);
        assert!(running_mean_identity_check(&fam, &obs, 5).unwrap() < 1e-15);
    }

    #[test]
    fn all_boundary_stream_falls_back() {
        let fam = ExponentialFamily::poisson();
        let obs = stream(&[0.0; 5]);
        let o = replicate_estimate(&fam, &obs, &InitMode::FirstObservation, OptimizerKind::Natural).unwrap();
        assert!(o.fallback);
        // (1 + 0·5) / 6
        assert!((o.estimate.unwrap()[0] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mirror_arm_gives_the_same_estimate() {
        let fam = ExponentialFamily::poisson();
        let obs = fam.sample_stream(&v(&[2.0]), &SeedTree::new(5).replicate(2), 500).unwrap();
        let a = replicate_estimate(&fam, &obs, &InitMode::FirstObservation, OptimizerKind::Natural).unwrap();
        let b = replicate_estimate(&fam, &obs, &InitMode::FirstObservation, OptimizerKind::Mirror).unwrap();
        assert!((a.estimate.unwrap() - b.estimate.unwrap()).amax() < 1e-10);
    }

    #[test]
    fn rejects_degenerate_sizes() {
        let fam = ExponentialFamily::poisson();
        assert!(run_efficiency(&fam, &EfficiencyConfig::new(v(&[2.0]), 1, 10, 0)).is_err());
        assert!(run_efficiency(&fam, &EfficiencyConfig::new(v(&[2.0]), 10, 1, 0)).is_err());
        assert!(run_efficiency(&fam, &EfficiencyConfig::new(v(&[-2.0]), 10, 10, 0)).is_err());
    }

    #[test]
    fn small_run_report_shape() {
        let fam = ExponentialFamily::product(vec![ScalarFamily::Gaussian, ScalarFamily::Bernoulli]).unwrap();
        let cfg = EfficiencyConfig::new(v(&[0.0, 0.3]), 200, 300, 17);
        let r = run_efficiency(&fam, &cfg).unwrap();
        assert_eq!(r.entries.len(), 4);
        assert_eq!(r.outcomes.len(), 300);
        assert!((r.scaled_cov.clone() - r.scaled_cov.transpose()).amax() < 1e-12);
        assert_eq!(r.to_csv().lines().count(), 5);
        assert_eq!(r.replicates_csv().lines().count(), 301);
        assert!(r.pass, "{:?}", r.entries);
    }
}
