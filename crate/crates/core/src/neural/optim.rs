use super::{ParamGroup, Scalar};
use crate::error::{Error, Result};

/// Plain SGD: `θ ← θ − lr·∇θ`, then clears the gradients.
///
/// Nothing is updated if any group carries a non-finite gradient.
pub fn sgd_step<T: Scalar>(groups: &mut [ParamGroup<T>], learning_rate: f64) -> Result<()> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    if let Some(bad) = groups.iter().find(|g| !g.grad.all_finite()) {
        return Err(Error::NonFiniteGradient(bad.name.clone()));
    }
    let lr = T::of(learning_rate);
    for g in groups.iter_mut() {
        for (p, &d) in g.tensor.values_mut().iter_mut().zip(g.grad.values()) {
            *p -= lr * d;
        }
        g.zero_grad();
    }
    Ok(())
}
