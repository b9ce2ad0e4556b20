//! Open boxes in ℝ^p, used as the parameter domains of a conjugate pair.

use nalgebra::DVector;

use crate::error::{Error, Result, Space};

/// Distance kept from a violated finite boundary when a point is projected back inside.
pub const DOMAIN_MARGIN: f64 = 1e-9;

/// An open interval `(lower, upper)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
    pub const POSITIVE: Interval = Interval {
        lower: 0.0,
        upper: f64::INFINITY,
    };
    pub const UNIT: Interval = Interval {
        lower: 0.0,
        upper: 1.0,
    };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::Invalid(format!(
                "interval bounds must satisfy lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Interval { lower, upper })
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    /// Like `contains`, but also admits finite endpoints.
    #[inline]
    pub fn closure_contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper && !x.is_nan()
    }

    /// Moves `x` to the margin of the boundary it crossed. `None` for NaN.
    pub(crate) fn project(&self, x: f64) -> Option<(f64, bool)> {
        if x.is_nan() {
            return None;
        }
        if self.contains(x) {
            return Some((x, false));
        }
        let width = self.upper - self.lower;
        let margin = if width.is_finite() {
            DOMAIN_MARGIN.min(0.5 * width)
        } else {
            DOMAIN_MARGIN
        };
        let y = if x <= self.lower {
            self.lower + margin
        } else {
            self.upper - margin
        };
        if self.contains(y) {
            Some((y, true))
        } else {
            None
        }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let show = |v: f64| {
            if v == f64::INFINITY {
                "inf".to_string()
            } else if v == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                format!("{v}")
            }
        };
        write!(f, "({},{})", show(self.lower), show(self.upper))
    }
}

/// Per-coordinate product of open intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    bounds: Vec<Interval>,
}

impl Region {
    pub fn new(bounds: Vec<Interval>) -> Self {
        Region { bounds }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn contains(&self, point: &DVector<f64>) -> bool {
        point.len() == self.dim()
            && self
                .bounds
                .iter()
                .zip(point.iter())
                .all(|(b, &x)| b.contains(x))
    }

    /// Returns the first offending coordinate as an error.
    pub fn check(&self, point: &DVector<f64>, space: Space) -> Result<()> {
        check_bounds(self.bounds.iter().copied(), self.dim(), point, space)
    }

    /// Projects `point` into the region, moving each violated coordinate to
    /// `DOMAIN_MARGIN` inside its boundary. Returns the point and whether any
    /// coordinate moved, or `None` if a coordinate is NaN.
    pub fn project(&self, point: DVector<f64>) -> Option<(DVector<f64>, bool)> {
        project_bounds(self.bounds.iter().copied(), point)
    }
}

pub(crate) fn check_bounds(
    bounds: impl Iterator<Item = Interval>,
    dim: usize,
    point: &DVector<f64>,
    space: Space,
) -> Result<()> {
    if point.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: point.len(),
        });
    }
    for (coordinate, (b, &value)) in bounds.zip(point.iter()).enumerate() {
        if !b.contains(value) {
            return Err(Error::Domain {
                space,
                coordinate,
                value,
                lower: b.lower,
                upper: b.upper,
            });
        }
    }
    Ok(())
}

pub(crate) fn project_bounds(
    bounds: impl Iterator<Item = Interval>,
    point: DVector<f64>,
) -> Option<(DVector<f64>, bool)> {
    let mut out = point;
    let mut moved = false;
    for (b, x) in bounds.zip(out.iter_mut()) {
        let (y, m) = b.project(*x)?;
        *x = y;
        moved |= m;
    }
    Some((out, moved))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_is_strict_at_finite_endpoints() {
        let unit = Interval::UNIT;
        assert!(!unit.contains(0.0));
        assert!(!unit.contains(1.0));
        assert!(unit.contains(0.5));
        assert!(unit.closure_contains(1.0));
        assert!(Interval::REAL_LINE.contains(-1e300));
        assert!(!Interval::POSITIVE.contains(f64::NAN));
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NEG_INFINITY, 0.0).is_ok());
    }

    #[test]
    fn check_reports_offending_coordinate() {
        let r = Region::new(vec![Interval::REAL_LINE, Interval::POSITIVE]);
        let err = r
            .check(&DVector::from_vec(vec![3.0, -1.0]), Space::Dual)
            .unwrap_err();
        match err {
            Error::Domain {
                coordinate, value, ..
            } => {
                assert_eq!(coordinate, 1);
                assert_eq!(value, -1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            r.check(&DVector::from_vec(vec![1.0]), Space::Dual),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn projection_lands_at_margin() {
        let r = Region::new(vec![Interval::UNIT, Interval::POSITIVE, Interval::REAL_LINE]);
        let (p, moved) = r
            .project(DVector::from_vec(vec![1.2, -3.0, 7.0]))
            .unwrap();
        assert!(moved);
        assert_eq!(p[0], 1.0 - DOMAIN_MARGIN);
        assert_eq!(p[1], DOMAIN_MARGIN);
        assert_eq!(p[2], 7.0);
        assert!(r.contains(&p));

        let (q, moved) = r.project(DVector::from_vec(vec![0.5, 1.0, 0.0])).unwrap();
        assert!(!moved);
        assert_eq!(q, DVector::from_vec(vec![0.5, 1.0, 0.0]));

        assert!(r.project(DVector::from_vec(vec![f64::NAN, 1.0, 0.0])).is_none());
    }
}
