use super::Scalar;

/// Pairwise max-margin loss `max(0, 1 − rel_pos + rel_neg)`.
pub fn hinge_loss<T: Scalar>(rel_pos: T, rel_neg: T) -> T {
    (T::one() - rel_pos + rel_neg).max(T::zero())
}

/// `(∂L/∂rel_pos, ∂L/∂rel_neg)`; zero unless the margin is violated.
pub fn hinge_loss_grad<T: Scalar>(rel_pos: T, rel_neg: T) -> (T, T) {
    if T::one() - rel_pos + rel_neg > T::zero() {
        (-T::one(), T::one())
    } else {
        (T::zero(), T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_values() {
        assert_eq!(hinge_loss(1.5f64, 0.2), 0.0);
        assert_eq!(hinge_loss(0.5f64, 0.5), 1.0);
        assert!((hinge_loss(0.2f64, 0.5) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn hinge_gradients() {
        assert_eq!(hinge_loss_grad(1.5f64, 0.2), (0.0, 0.0));
        assert_eq!(hinge_loss_grad(0.2f64, 0.5), (-1.0, 1.0));
    }
}
