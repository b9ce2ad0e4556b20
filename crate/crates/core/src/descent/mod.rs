//! Update rules (gradient, mirror, natural gradient, retraction), step-size
//! schedules and the online protocol with regret bookkeeping.

mod online;
mod schedule;
mod steps;

pub use online::{
    coordinates_of, run_online, run_online_summary, ClosureStream, Coordinates, Iterate, LossStream,
    ObservationStream, OptimizerKind, RunAborted, RunSummary, Trajectory,
};
pub use schedule::{ScheduleKind, StepSchedule};
pub use steps::{
    gd_step, mirror_map_step, mirror_step_proximal, natural_gradient_step, retraction_step,
    retraction_step_euclidean, riemannian_gradient, safeguard, Retraction, Step, MAX_CONDITION,
};
