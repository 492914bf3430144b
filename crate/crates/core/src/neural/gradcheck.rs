//! Central finite-difference verification of analytic gradients.
//!
//! Piecewise ops (rectifier, max, k-max, hinge) are only differentiable away
//! from their switching points. Functions under test therefore report a
//! *signature* alongside their value: every discrete decision taken during
//! the forward pass. A coordinate whose `±h` perturbation changes the
//! signature straddles a kink and is skipped.

use serde::Serialize;

/// Value of a function at one point plus its discrete decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub value: f64,
    pub signature: Vec<u32>,
}

impl Probe {
    pub fn smooth(value: f64) -> Self {
        Self {
            value,
            signature: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckResult {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl GradCheckResult {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Default perturbation.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const ABS_FLOOR: f64 = 1e-7;

/// `|a − n| / max(|a|, |n|, ABS_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(ABS_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` (the gradient of `f` at `x`) with central differences.
pub fn gradient_check<F>(mut f: F, x: &[f64], analytic: &[f64], h: f64) -> GradCheckResult
where
    F: FnMut(&[f64]) -> Probe,
{
    assert_eq!(x.len(), analytic.len(), "one analytic partial per coordinate");
    let base = f(x).signature;
    let mut point = x.to_vec();
    let mut out = GradCheckResult {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for k in 0..x.len() {
        point[k] = x[k] + h;
        let plus = f(&point);
        point[k] = x[k] - h;
        let minus = f(&point);
        point[k] = x[k];
        if plus.signature != base || minus.signature != base {
            out.skipped += 1;
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * h);
        out.max_rel_error = out.max_rel_error.max(relative_error(analytic[k], numeric));
        out.checked += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{hinge_loss, hinge_loss_grad};

    #[test]
    fn hinge_passes_away_from_kink() {
        let x = [0.2, 0.5];
        let (gp, gn) = hinge_loss_grad(x[0], x[1]);
        let r = gradient_check(
            |p| Probe {
                value: hinge_loss(p[0], p[1]),
                signature: vec![(1.0 - p[0] + p[1] > 0.0) as u32],
            },
            &x,
            &[gp, gn],
            DEFAULT_STEP,
        );
        assert_eq!(r.checked, 2);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn hinge_kink_is_skipped() {
        let x = [1.0, 0.0];
        let r = gradient_check(
            |p| Probe {
                value: hinge_loss(p[0], p[1]),
                signature: vec![(1.0 - p[0] + p[1] > 0.0) as u32],
            },
            &x,
            &[0.0, 0.0],
            DEFAULT_STEP,
        );
        assert_eq!((r.checked, r.skipped), (0, 2));
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let r = gradient_check(
            |p| Probe::smooth(p[0] * p[0]),
            &[3.0],
            &[5.0],
            DEFAULT_STEP,
        );
        assert!(!r.passes(1e-4));
    }
}
