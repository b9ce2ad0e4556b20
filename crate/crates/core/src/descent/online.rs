//! The online protocol: at step `t` the learner holds `x_t`, suffers
//! `f_t(x_t)`, then updates with `∇f_t(x_t)` and `α_t`.

use nalgebra::DVector;

use super::schedule::StepSchedule;
use super::steps::{
    check_interior, mirror_step_proximal, natural_gradient_step, retraction_step_euclidean, guard, gd_step,
    Retraction, Step,
};
use crate::error::{Error, Result, Space};
use crate::families::{ExponentialFamily, Observation};
use crate::geometry::{ConjugatePair, Orientation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    GradientDescent,
    Mirror,
    Natural,
    Retraction(Retraction),
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::GradientDescent => "gd",
            OptimizerKind::Mirror => "mirror",
            OptimizerKind::Natural => "natural",
            OptimizerKind::Retraction(_) => "retraction",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gd" => Some(OptimizerKind::GradientDescent),
            "mirror" => Some(OptimizerKind::Mirror),
            "natural" => Some(OptimizerKind::Natural),
            "retraction" => Some(OptimizerKind::Retraction(Retraction::Identity)),
            _ => None,
        }
    }

    /// Gradient and mirror descent move primal points; natural gradient and
    /// retraction steps move dual points.
    pub fn space(self) -> Space {
        match self {
            OptimizerKind::GradientDescent | OptimizerKind::Mirror => Space::Primal,
            OptimizerKind::Natural | OptimizerKind::Retraction(_) => Space::Dual,
        }
    }
}

/// Parameterization of an exponential family in which a loss is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coordinates {
    Natural,
    Mean,
}

/// Coordinates of `space` for `pair`.
pub fn coordinates_of(pair: &ConjugatePair, space: Space) -> Coordinates {
    match (pair.orientation(), space) {
        (Orientation::Natural, Space::Primal) | (Orientation::Mean, Space::Dual) => Coordinates::Natural,
        _ => Coordinates::Mean,
    }
}

/// A sequence of losses `f_1, f_2, …`, each evaluable in either coordinate system.
pub trait LossStream {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `f_t(x)`, 1-based `t`.
    fn loss(&self, t: usize, coords: Coordinates, point: &DVector<f64>) -> f64;

    fn gradient(&self, t: usize, coords: Coordinates, point: &DVector<f64>) -> DVector<f64>;
}

/// Log-loss stream of a family: `log_loss_natural` in natural coordinates,
/// `log_loss_mean` in mean coordinates, each with its own analytic gradient.
#[derive(Debug, Clone, Copy)]
pub struct ObservationStream<'a> {
    family: &'a ExponentialFamily,
    observations: &'a [Observation],
}

impl<'a> ObservationStream<'a> {
    pub fn new(family: &'a ExponentialFamily, observations: &'a [Observation]) -> Result<Self> {
        for obs in observations {
            family.check_observation(obs)?;
        }
        Ok(ObservationStream {
            family,
            observations,
        })
    }

    pub fn observations(&self) -> &'a [Observation] {
        self.observations
    }
}

impl LossStream for ObservationStream<'_> {
    fn len(&self) -> usize {
        self.observations.len()
    }

    fn loss(&self, t: usize, coords: Coordinates, point: &DVector<f64>) -> f64 {
        let obs = &self.observations[t - 1];
        match coords {
            Coordinates::Natural => self.family.natural_loss_unchecked(point, obs),
            Coordinates::Mean => self.family.mean_loss_unchecked(point, obs),
        }
    }

    fn gradient(&self, t: usize, coords: Coordinates, point: &DVector<f64>) -> DVector<f64> {
        let obs = &self.observations[t - 1];
        match coords {
            Coordinates::Natural => self.family.log_loss_natural_gradient(point, obs),
            Coordinates::Mean => self.family.log_loss_mean_gradient(point, obs),
        }
    }
}

/// Losses given directly as closures in whatever coordinates the optimizer uses.
pub struct ClosureStream<L, D> {
    len: usize,
    loss: L,
    gradient: D,
}

impl<L, D> ClosureStream<L, D>
where
    L: Fn(usize, &DVector<f64>) -> f64,
    D: Fn(usize, &DVector<f64>) -> DVector<f64>,
{
    pub fn new(len: usize, loss: L, gradient: D) -> Self {
        ClosureStream { len, loss, gradient }
    }
}

impl<L, D> LossStream for ClosureStream<L, D>
where
    L: Fn(usize, &DVector<f64>) -> f64,
    D: Fn(usize, &DVector<f64>) -> DVector<f64>,
{
    fn len(&self) -> usize {
        self.len
    }

    fn loss(&self, t: usize, _coords: Coordinates, point: &DVector<f64>) -> f64 {
        (self.loss)(t, point)
    }

    fn gradient(&self, t: usize, _coords: Coordinates, point: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(t, point)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub t: usize,
    /// Natural-coordinate representation.
    pub theta: Option<DVector<f64>>,
    /// Mean-coordinate representation.
    pub mu: Option<DVector<f64>>,
    /// `f_t` at this iterate, before the update.
    pub loss: f64,
    /// Σ_{s ≤ t} f_s(x_s)
    pub cumulative_regret_sum: f64,
    /// The safeguard moved this iterate back inside its domain.
    pub projected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub optimizer: OptimizerKind,
    pub schedule: StepSchedule,
    pub pair: ConjugatePair,
    pub seed: Option<u64>,
    pub iterates: Vec<Iterate>,
    /// Point after the last update, in the optimizer's native coordinates.
    pub final_point: Option<DVector<f64>>,
    pub final_projected: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Projections fired over all updates, including the final one.
    pub fn projections(&self) -> usize {
        self.iterates.iter().filter(|i| i.projected).count() + usize::from(self.final_projected)
    }

    pub fn cumulative_regret_sum(&self) -> f64 {
        self.iterates.last().map_or(0.0, |i| i.cumulative_regret_sum)
    }
}

/// A run that stopped early; `partial` holds every iterate reached.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAborted {
    pub partial: Trajectory,
    pub error: Error,
}

impl std::fmt::Display for RunAborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted after {} iterates: {}", self.partial.len(), self.error)
    }
}

impl std::error::Error for RunAborted {}

/// End state of a run that kept no per-step record.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_point: DVector<f64>,
    pub cumulative_regret_sum: f64,
    pub projections: usize,
    pub steps: usize,
}

fn update(
    optimizer: OptimizerKind,
    pair: &ConjugatePair,
    grad: &DVector<f64>,
    x: &DVector<f64>,
    alpha: f64,
) -> Result<Step> {
    match optimizer {
        OptimizerKind::GradientDescent => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::StepSize(alpha));
            }
            guard(pair, Space::Primal, gd_step(grad, x, alpha))
        }
        OptimizerKind::Mirror => mirror_step_proximal(pair, grad, x, alpha),
        OptimizerKind::Natural => natural_gradient_step(pair, grad, x, alpha),
        OptimizerKind::Retraction(r) => retraction_step_euclidean(pair, grad, x, alpha, r),
    }
}

struct StepRecord<'a> {
    t: usize,
    point: &'a DVector<f64>,
    loss: f64,
    cumulative: f64,
    projected: bool,
}

/// Shared loop. `on_iterate` sees every `x_t` before its update.
#[allow(clippy::too_many_arguments)]
fn drive<S: LossStream + ?Sized>(
    optimizer: OptimizerKind,
    pair: &ConjugatePair,
    stream: &S,
    schedule: &StepSchedule,
    init: &DVector<f64>,
    horizon: usize,
    mut on_iterate: impl FnMut(StepRecord<'_>),
) -> std::result::Result<(DVector<f64>, bool, f64, usize), Error> {
    if horizon == 0 {
        return Err(Error::Invalid("horizon must be ≥ 1".into()));
    }
    if stream.len() < horizon {
        return Err(Error::Invalid(format!(
            "loss stream has {} entries, horizon is {horizon}",
            stream.len()
        )));
    }
    let space = optimizer.space();
    check_interior(pair, space, init)?;
    let coords = coordinates_of(pair, space);

    let mut x = init.clone();
    let mut projected = false;
    let mut cumulative = 0.0;
    let mut projections = 0;
    for t in 1..=horizon {
        let loss = stream.loss(t, coords, &x);
        cumulative += loss;
        on_iterate(StepRecord {
            t,
            point: &x,
            loss,
            cumulative,
            projected,
        });
        let grad = stream.gradient(t, coords, &x);
        let step = update(optimizer, pair, &grad, &x, schedule.alpha(t))?;
        x = step.point;
        projected = step.projected;
        projections += usize::from(projected);
    }
    Ok((x, projected, cumulative, projections))
}

/// Runs `optimizer` for `horizon` steps from `init` (given in the optimizer's
/// native coordinates: primal for gd/mirror, dual for natural/retraction).
pub fn run_online<S: LossStream + ?Sized>(
    optimizer: OptimizerKind,
    pair: &ConjugatePair,
    stream: &S,
    schedule: StepSchedule,
    init: &DVector<f64>,
    horizon: usize,
) -> std::result::Result<Trajectory, RunAborted> {
    let space = optimizer.space();
    let native = coordinates_of(pair, space);
    let mut iterates = Vec::with_capacity(horizon);
    let outcome = drive(optimizer, pair, stream, &schedule, init, horizon, |rec| {
        let other = match space {
            Space::Primal => pair.mirror_map(rec.point),
            Space::Dual => pair.inverse_mirror_map(rec.point),
        };
        let (theta, mu) = match native {
            Coordinates::Natural => (rec.point.clone(), other),
            Coordinates::Mean => (other, rec.point.clone()),
        };
        iterates.push(Iterate {
            t: rec.t,
            theta: Some(theta),
            mu: Some(mu),
            loss: rec.loss,
            cumulative_regret_sum: rec.cumulative,
            projected: rec.projected,
        });
    });
    let mut trajectory = Trajectory {
        optimizer,
        schedule,
        pair: pair.clone(),
        seed: None,
        iterates,
        final_point: None,
        final_projected: false,
    };
    match outcome {
        Ok((x, projected, _, _)) => {
            trajectory.final_point = Some(x);
            trajectory.final_projected = projected;
            Ok(trajectory)
        }
        Err(error) => Err(RunAborted {
            partial: trajectory,
            error,
        }),
    }
}

/// [`run_online`] without the per-step record.
pub fn run_online_summary<S: LossStream + ?Sized>(
    optimizer: OptimizerKind,
    pair: &ConjugatePair,
    stream: &S,
    schedule: StepSchedule,
    init: &DVector<f64>,
    horizon: usize,
) -> Result<RunSummary> {
    let (final_point, _, cumulative_regret_sum, projections) =
        drive(optimizer, pair, stream, &schedule, init, horizon, |_| {})?;
    Ok(RunSummary {
        final_point,
        cumulative_regret_sum,
        projections,
        steps: horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn single_step_regret_is_first_loss() {
        let fam = ExponentialFamily::poisson();
        let obs = vec![Observation::scalar(4.0)];
        let stream = ObservationStream::new(&fam, &obs).unwrap();
        let init = v(&[0.3]);
        let traj = run_online(
            OptimizerKind::Mirror,
            fam.pair(),
            &stream,
            StepSchedule::constant(0.1).unwrap(),
            &init,
            1,
        )
        .unwrap();
        assert_eq!(traj.len(), 1);
        let expected = fam.log_loss_natural(&init, &obs[0]).unwrap();
        assert_eq!(traj.cumulative_regret_sum(), expected);
        assert_eq!(traj.iterates[0].t, 1);
    }

    #[test]
    fn natural_gradient_reproduces_running_mean() {
        let fam = ExponentialFamily::poisson();
        let obs: Vec<_> = [3.0, 1.0, 2.0].iter().map(|&y| Observation::scalar(y)).collect();
        let stream = ObservationStream::new(&fam, &obs).unwrap();
        let traj = run_online(
            OptimizerKind::Natural,
            fam.pair(),
            &stream,
            StepSchedule::inverse_t(1.0).unwrap(),
            &v(&[3.0]),
            3,
        )
        .unwrap();
        assert_eq!(traj.iterates[2].mu.as_ref().unwrap()[0], 2.0);
        assert_eq!(traj.final_point.as_ref().unwrap()[0], 2.0);
        assert_eq!(traj.projections(), 0);
    }

    #[test]
    fn both_representations_recorded() {
        let fam = ExponentialFamily::bernoulli();
        let obs: Vec<_> = [1.0, 0.0, 1.0, 1.0].iter().map(|&y| Observation::scalar(y)).collect();
        let stream = ObservationStream::new(&fam, &obs).unwrap();
        for kind in [OptimizerKind::Mirror, OptimizerKind::Natural] {
            let init = match kind.space() {
                Space::Primal => v(&[0.0]),
                Space::Dual => v(&[0.5]),
            };
            let traj = run_online(kind, fam.pair(), &stream, StepSchedule::constant(0.2).unwrap(), &init, 4).unwrap();
            for it in &traj.iterates {
                let g = fam.pair().mirror_map(it.theta.as_ref().unwrap());
                assert!((g - it.mu.as_ref().unwrap()).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn aborts_with_partial_trajectory() {
        let pair = ConjugatePair::poisson();
        let stream = ClosureStream::new(
            5,
            |_, x: &DVector<f64>| x[0],
            |t, _x: &DVector<f64>| if t == 3 { v(&[f64::NAN]) } else { v(&[0.1]) },
        );
        let err = run_online(
            OptimizerKind::Natural,
            &pair,
            &stream,
            StepSchedule::constant(0.1).unwrap(),
            &v(&[1.0]),
            5,
        )
        .unwrap_err();
        assert_eq!(err.partial.len(), 3);
        assert!(matches!(err.error, Error::StepRejected(_)));
        assert!(err.partial.final_point.is_none());
    }

    #[test]
    fn rejects_bad_setup() {
        let pair = ConjugatePair::bernoulli();
        let stream = ClosureStream::new(2, |_, _: &DVector<f64>| 0.0, |_, _: &DVector<f64>| v(&[0.0]));
        let sched = StepSchedule::constant(0.1).unwrap();
        assert!(run_online(OptimizerKind::Natural, &pair, &stream, sched, &v(&[1.5]), 2).is_err());
        assert!(run_online(OptimizerKind::Natural, &pair, &stream, sched, &v(&[0.5]), 3).is_err());
        assert!(run_online(OptimizerKind::Natural, &pair, &stream, sched, &v(&[0.5]), 0).is_err());
    }

    #[test]
    fn projections_are_flagged_on_the_iterate_they_produce() {
        let fam = ExponentialFamily::poisson();
        let obs: Vec<_> = [0.0, 2.0, 3.0].iter().map(|&y| Observation::scalar(y)).collect();
        let stream = ObservationStream::new(&fam, &obs).unwrap();
        // α_1 = 1 jumps to y_1 = 0, the boundary of (0, ∞).
        let traj = run_online(
            OptimizerKind::Natural,
            fam.pair(),
            &stream,
            StepSchedule::inverse_t(1.0).unwrap(),
            &v(&[1.0]),
            3,
        )
        .unwrap();
        assert!(!traj.iterates[0].projected);
        assert!(traj.iterates[1].projected);
        assert_eq!(traj.projections(), 1);
    }

    #[test]
    fn summary_matches_full_run() {
        let fam = ExponentialFamily::bernoulli();
        let obs: Vec<_> = [1.0, 0.0, 0.0, 1.0, 0.0].iter().map(|&y| Observation::scalar(y)).collect();
        let stream = ObservationStream::new(&fam, &obs).unwrap();
        let sched = StepSchedule::inverse_sqrt_t(0.5).unwrap();
        let full = run_online(OptimizerKind::Mirror, fam.pair(), &stream, sched, &v(&[0.2]), 5).unwrap();
        let summary = run_online_summary(OptimizerKind::Mirror, fam.pair(), &stream, sched, &v(&[0.2]), 5).unwrap();
        assert_eq!(summary.final_point, full.final_point.unwrap());
        assert_eq!(summary.cumulative_regret_sum, full.iterates[4].cumulative_regret_sum);
    }
}
