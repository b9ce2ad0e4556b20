use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    Constant,
    InverseT,
    InverseSqrtT,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::InverseT => "inv_t",
            ScheduleKind::InverseSqrtT => "inv_sqrt_t",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "constant" => Some(ScheduleKind::Constant),
            "inv_t" => Some(ScheduleKind::InverseT),
            "inv_sqrt_t" => Some(ScheduleKind::InverseSqrtT),
            _ => None,
        }
    }
}

/// Step sizes `α_t` for `t ≥ 1`: `c`, `c/(t+k)` or `c/√(t+k)`.
///
/// The offset `k` lets a run resume a schedule after `k` observations were
/// consumed elsewhere (e.g. by a warm start).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    kind: ScheduleKind,
    scale: f64,
    offset: usize,
}

impl StepSchedule {
    pub fn new(kind: ScheduleKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::StepSize(scale));
        }
        Ok(StepSchedule {
            kind,
            scale,
            offset: 0,
        })
    }

    pub fn constant(scale: f64) -> Result<Self> {
        Self::new(ScheduleKind::Constant, scale)
    }

    pub fn inverse_t(scale: f64) -> Result<Self> {
        Self::new(ScheduleKind::InverseT, scale)
    }

    pub fn inverse_sqrt_t(scale: f64) -> Result<Self> {
        Self::new(ScheduleKind::InverseSqrtT, scale)
    }

    pub fn with_offset(mut self, offset: usize) -> Self {
        self.offset = offset;
        self
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// α_t, 1-based.
    pub fn alpha(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        let n = (t + self.offset) as f64;
        match self.kind {
            ScheduleKind::Constant => self.scale,
            ScheduleKind::InverseT => self.scale / n,
            ScheduleKind::InverseSqrtT => self.scale / n.sqrt(),
        }
    }
}

impl std::fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}(c={})", self.kind.name(), self.scale)?;
        if self.offset > 0 {
            write!(f, "+{}", self.offset)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let s = StepSchedule::inverse_t(1.0).unwrap();
        assert_eq!(s.alpha(1), 1.0);
        assert_eq!(s.alpha(4), 0.25);
        assert_eq!(StepSchedule::constant(0.1).unwrap().alpha(1000), 0.1);
        assert_eq!(StepSchedule::inverse_sqrt_t(2.0).unwrap().alpha(4), 1.0);
        assert_eq!(s.with_offset(3).alpha(1), 0.25);
    }

    #[test]
    fn rejects_non_positive_scale() {
        assert!(StepSchedule::constant(0.0).is_err());
        assert!(StepSchedule::inverse_t(-1.0).is_err());
        assert!(StepSchedule::inverse_t(f64::NAN).is_err());
    }
}
