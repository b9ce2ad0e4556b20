//! Step-by-step comparison of mirror descent and natural gradient descent on
//! the same log-loss stream.
//!
//! The mirror arm runs on `θ` with proximity `B_G` and gradient `g(θ) − y`;
//! the natural arm runs on `μ` with metric `∇²H` and gradient
//! `−∇²H(μ)(y − μ)`. Neither gradient is derived from the other. If the two
//! methods coincide, `g(θ_t) = μ_t` at every step up to rounding.
//!
//! The cross variant exchanges the roles: mirror descent on `μ` with `B_H`
//! against natural gradient on `θ` with metric `∇²G`.

use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::descent::{run_online, ObservationStream, OptimizerKind, RunAborted, StepSchedule, Trajectory};
use crate::error::Result;
use crate::families::{ExponentialFamily, Observation};
use crate::seeding::SeedTree;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

pub const CSV_HEADER: &str = "t,theta,mu,g_theta,deviation,projected_md,projected_ngd";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Mirror descent on θ vs. natural gradient on μ.
    Standard,
    /// Mirror descent on μ vs. natural gradient on θ.
    Cross,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "equiv",
            Variant::Cross => "cross-equiv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDeviation {
    pub t: usize,
    pub theta: DVector<f64>,
    pub mu: DVector<f64>,
    pub g_theta: DVector<f64>,
    pub deviation: f64,
    pub projected_md: bool,
    pub projected_ngd: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub family: String,
    pub variant: Variant,
    pub horizon: usize,
    pub schedule: StepSchedule,
    pub seed: Option<u64>,
    pub tolerance: f64,
    pub steps: Vec<StepDeviation>,
    /// Deviation of the points after the last update.
    pub final_deviation: f64,
    pub max_deviation: f64,
    pub projections_md: usize,
    pub projections_ngd: usize,
    pub aborted: Option<String>,
    pub pass: bool,
}

impl EquivalenceReport {
    /// No safeguard fired and neither run aborted, so the comparison says
    /// something about the two methods rather than about the safeguard.
    pub fn probative(&self) -> bool {
        self.aborted.is_none() && self.projections_md == 0 && self.projections_ngd == 0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.steps.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.t,
                join(&s.theta),
                join(&s.mu),
                join(&s.g_theta),
                s.deviation,
                u8::from(s.projected_md),
                u8::from(s.projected_ngd),
            );
        }
        out
    }
}

pub(crate) fn join(v: &DVector<f64>) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";")
}

fn sup_dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn unwrap_run(r: std::result::Result<Trajectory, RunAborted>) -> (Trajectory, Option<String>) {
    match r {
        Ok(t) => (t, None),
        Err(RunAborted { partial, error }) => (partial, Some(error.to_string())),
    }
}

fn compare(
    family: &ExponentialFamily,
    variant: Variant,
    observations: &[Observation],
    schedule: StepSchedule,
    init_theta: &DVector<f64>,
    tolerance: f64,
) -> Result<EquivalenceReport> {
    let base = family.pair();
    base.check_primal(init_theta)?;
    let stream = ObservationStream::new(family, observations)?;
    let horizon = observations.len();
    let init_mu = base.mirror_map(init_theta);

    // Natural orientation: primal = θ. Swapped: primal = μ.
    let (md_pair, md_init, ngd_init) = match variant {
        Variant::Standard => (base.clone(), init_theta.clone(), init_mu.clone()),
        Variant::Cross => (base.dual(), init_mu.clone(), init_theta.clone()),
    };
    let (md, md_abort) = unwrap_run(run_online(
        OptimizerKind::Mirror,
        &md_pair,
        &stream,
        schedule,
        &md_init,
        horizon,
    ));
    let (ngd, ngd_abort) = unwrap_run(run_online(
        OptimizerKind::Natural,
        &md_pair,
        &stream,
        schedule,
        &ngd_init,
        horizon,
    ));

    let mut steps = Vec::with_capacity(horizon);
    for (a, b) in md.iterates.iter().zip(ngd.iterates.iter()) {
        // Iterates always carry both representations.
        let (theta, mu, deviation) = match variant {
            Variant::Standard => {
                let theta = a.theta.clone().expect("recorded");
                let mu = b.mu.clone().expect("recorded");
                let d = sup_dist(&base.mirror_map(&theta), &mu);
                (theta, mu, d)
            }
            Variant::Cross => {
                let theta = b.theta.clone().expect("recorded");
                let mu = a.mu.clone().expect("recorded");
                let d = sup_dist(&base.inverse_mirror_map(&mu), &theta);
                (theta, mu, d)
            }
        };
        steps.push(StepDeviation {
            t: a.t,
            g_theta: base.mirror_map(&theta),
            theta,
            mu,
            deviation,
            projected_md: a.projected,
            projected_ngd: b.projected,
        });
    }

    let final_deviation = match (&md.final_point, &ngd.final_point) {
        (Some(x), Some(y)) => match variant {
            Variant::Standard => sup_dist(&base.mirror_map(x), y),
            Variant::Cross => sup_dist(&base.inverse_mirror_map(x), y),
        },
        _ => f64::NAN,
    };
    let max_deviation = steps
        .iter()
        .map(|s| s.deviation)
        .chain(std::iter::once(final_deviation).filter(|d| !d.is_nan()))
        .fold(0.0, f64::max);

    let aborted = match (md_abort, ngd_abort) {
        (None, None) => None,
        (Some(a), None) => Some(format!("mirror arm: {a}")),
        (None, Some(b)) => Some(format!("natural arm: {b}")),
        (Some(a), Some(b)) => Some(format!("mirror arm: {a}; natural arm: {b}")),
    };
    let projections_md = md.projections();
    let projections_ngd = ngd.projections();
    let pass = aborted.is_none()
        && projections_md == 0
        && projections_ngd == 0
        && max_deviation <= tolerance;

    Ok(EquivalenceReport {
        family: family.name().to_string(),
        variant,
        horizon,
        schedule,
        seed: None,
        tolerance,
        steps,
        final_deviation,
        max_deviation,
        projections_md,
        projections_ngd,
        aborted,
        pass,
    })
}

/// Mirror descent on θ against natural gradient descent on μ, started at
/// `μ_1 = g(init_theta)` and fed the same observations and schedule.
pub fn verify_equivalence(
    family: &ExponentialFamily,
    observations: &[Observation],
    schedule: StepSchedule,
    init_theta: &DVector<f64>,
    tolerance: f64,
) -> Result<EquivalenceReport> {
    compare(family, Variant::Standard, observations, schedule, init_theta, tolerance)
}

/// Mirror descent on μ (proximity `B_H`) against natural gradient descent on
/// θ (metric `∇²G`); deviation is `‖h(μ_t) − θ_t‖∞`.
pub fn verify_cross_parameterization(
    family: &ExponentialFamily,
    observations: &[Observation],
    schedule: StepSchedule,
    init_theta: &DVector<f64>,
    tolerance: f64,
) -> Result<EquivalenceReport> {
    compare(family, Variant::Cross, observations, schedule, init_theta, tolerance)
}

/// One cell of a verification grid; the stream is drawn from
/// `SeedTree::new(seed).replicate(0)` with mean `mu_true`.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub family: ExponentialFamily,
    pub variant: Variant,
    pub mu_true: DVector<f64>,
    pub horizon: usize,
    pub schedule: StepSchedule,
    pub init_theta: DVector<f64>,
    pub seed: u64,
    pub tolerance: f64,
}

impl GridCell {
    pub fn run(&self) -> Result<EquivalenceReport> {
        let obs = self
            .family
            .sample_stream(&self.mu_true, &SeedTree::new(self.seed).replicate(0), self.horizon)?;
        let mut report = compare(
            &self.family,
            self.variant,
            &obs,
            self.schedule,
            &self.init_theta,
            self.tolerance,
        )?;
        report.seed = Some(self.seed);
        Ok(report)
    }
}

/// Runs every cell, in parallel, returning reports in cell order.
pub fn run_grid(cells: &[GridCell]) -> Vec<Result<EquivalenceReport>> {
    cells.par_iter().map(GridCell::run).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn gaussian_arms_coincide_exactly() {
        let fam = ExponentialFamily::gaussian(2).unwrap();
        let obs = fam
            .sample_stream(&v(&[0.5, -1.0]), &SeedTree::new(4).replicate(0), 200)
            .unwrap();
        for sched in [
            StepSchedule::constant(0.1).unwrap(),
            StepSchedule::inverse_t(1.0).unwrap(),
        ] {
            let r = verify_equivalence(&fam, &obs, sched, &v(&[0.0, 0.0]), 1e-12).unwrap();
            assert!(r.pass, "{}", r.max_deviation);
            assert_eq!(r.steps.len(), 200);
            let c = verify_cross_parameterization(&fam, &obs, sched, &v(&[0.0, 0.0]), 1e-12).unwrap();
            assert!(c.pass);
        }
    }

    #[test]
    fn boundary_streams_are_non_probative() {
        let fam = ExponentialFamily::poisson();
        let obs: Vec<_> = [0.0, 1.0, 2.0].iter().map(|&y| Observation::scalar(y)).collect();
        let r = verify_equivalence(&fam, &obs, StepSchedule::inverse_t(1.0).unwrap(), &v(&[0.0]), 1e-8).unwrap();
        assert!(!r.probative());
        assert!(!r.pass);
        assert!(r.projections_md > 0 && r.projections_ngd > 0);
    }

    #[test]
    fn csv_layout() {
        let fam = ExponentialFamily::gaussian(2).unwrap();
        let obs = vec![Observation::new(v(&[1.0, 2.0])), Observation::new(v(&[0.0, 1.0]))];
        let r = verify_equivalence(&fam, &obs, StepSchedule::constant(0.5).unwrap(), &v(&[0.0, 0.0]), 1e-12).unwrap();
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "1,0;0,0;0,0;0,0,0,0");
        assert_eq!(lines[2], "2,0.5;1,0.5;1,0.5;1,0,0,0");
    }

    #[test]
    fn grid_is_ordered_and_seeded() {
        let cells: Vec<_> = (0..3)
            .map(|seed| GridCell {
                family: ExponentialFamily::bernoulli(),
                variant: Variant::Standard,
                mu_true: v(&[0.3]),
                horizon: 50,
                schedule: StepSchedule::constant(0.1).unwrap(),
                init_theta: v(&[0.0]),
                seed,
                tolerance: 1e-8,
            })
            .collect();
        let reports = run_grid(&cells);
        for (i, r) in reports.iter().enumerate() {
            let r = r.as_ref().unwrap();
            assert_eq!(r.seed, Some(i as u64));
            assert!(r.pass);
        }
    }
}
