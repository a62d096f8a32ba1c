//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Outcome of comparing an analytic gradient against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest per-entry relative error, `|a - n| / max(|a|, |n|, 1e-8)`.
    pub max_rel_error: f64,
    /// `(row, col)` of the worst entry.
    pub worst_index: (usize, usize),
    /// Analytic gradient at the worst entry.
    pub analytic: f64,
    /// Central-difference estimate at the worst entry.
    pub numeric: f64,
}

/// Floor for the relative-error denominator so near-zero gradients compare
/// sanely.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// Compares `analytic` against `(f(w + eps·e) - f(w - eps·e)) / 2eps` for
/// every entry of `at`.
///
/// `f` must evaluate the scalar objective at an arbitrary value of the
/// checked parameter; central differences are O(eps²) accurate, which is why
/// forward differences are not offered.
pub fn grad_check<F>(mut f: F, analytic: &Matrix, at: &Matrix, epsilon: f64) -> Result<GradCheckReport>
where
    F: FnMut(&Matrix) -> Result<f64>,
{
    if epsilon <= 0.0 {
        return Err(Error::InvalidArgument {
            what: "epsilon",
            details: alloc::format!("must be > 0, got {epsilon}"),
        });
    }
    if analytic.shape() != at.shape() {
        return Err(Error::ShapeMismatch {
            op: "grad_check",
            left: analytic.shape(),
            right: at.shape(),
        });
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: (0, 0),
        analytic: analytic.get(0, 0),
        numeric: 0.0,
    };
    let mut probe = at.clone();
    for r in 0..at.rows() {
        for c in 0..at.cols() {
            let base = at.get(r, c);
            probe.set(r, c, base + epsilon);
            let plus = check_finite(f(&probe)?)?;
            probe.set(r, c, base - epsilon);
            let minus = check_finite(f(&probe)?)?;
            probe.set(r, c, base);

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.get(r, c);
            let denom = math::abs(a).max(math::abs(numeric)).max(REL_ERROR_FLOOR);
            let rel = math::abs(a - numeric) / denom;
            if rel >= report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_index = (r, c);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: "grad_check objective",
            value: v,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares() {
        let at = Matrix::from_rows(&[&[1.0, 2.0]]).unwrap();
        let analytic = Matrix::from_rows(&[&[2.0, 4.0]]).unwrap();
        let report = grad_check(
            |m| Ok(m.data().iter().map(|v| v * v).sum()),
            &analytic,
            &at,
            1e-4,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-7, "rel err {}", report.max_rel_error);
    }

    #[test]
    fn constant_function_has_zero_gradients() {
        let at = Matrix::from_rows(&[&[0.3, -0.7], &[2.0, 5.0]]).unwrap();
        let analytic = Matrix::zeros(2, 2);
        let report = grad_check(|_| Ok(42.0), &analytic, &at, 1e-4).unwrap();
        assert_eq!(report.max_rel_error, 0.0);
        assert_eq!(report.numeric, 0.0);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let at = Matrix::from_rows(&[&[1.0]]).unwrap();
        let analytic = Matrix::zeros(1, 1);
        let err = grad_check(|_| Ok(f64::NAN), &analytic, &at, 1e-4).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        let at = Matrix::zeros(1, 1);
        let err = grad_check(|_| Ok(0.0), &at.clone(), &at, 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument { .. }));
    }
}
