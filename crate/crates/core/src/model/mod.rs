//! The PACRR scoring network: configuration, parameters, the forward and
//! backward pipeline, and checkpoint persistence.

mod checkpoint;
mod pipeline;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{ParamGroup, RecurrentParams, Scalar, Tensor, GATES};
use crate::simmat::{DistillShape, DistillerRegistry};

pub use checkpoint::{load_params, save_params, MAGIC};
pub use pipeline::{backward, forward, score, score_gradients, Gradients, ScoreTrace};

/// Hyper-parameters of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacrrConfig {
    /// Unified query length.
    pub l_q: usize,
    /// Unified document length.
    pub l_d: usize,
    /// Longest n-gram matched; `l_g − 1` convolution layers.
    pub l_g: usize,
    /// Filters per convolution layer.
    pub n_f: usize,
    /// Signals kept per query term and n-gram size.
    pub n_s: usize,
    /// Registered distiller name (`firstk` or `kwindow`).
    pub mode: String,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PacrrConfig {
    fn default() -> Self {
        Self {
            l_q: 16,
            l_d: 768,
            l_g: 3,
            n_f: 32,
            n_s: 2,
            mode: "firstk".into(),
            learning_rate: 0.001,
            seed: 0,
        }
    }
}

impl PacrrConfig {
    /// Small configuration used for verification and desk-scale experiments.
    pub fn tiny(mode: &str) -> Self {
        Self {
            l_q: 4,
            l_d: 12,
            l_g: 3,
            n_f: 4,
            n_s: 2,
            mode: mode.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.l_g < 2 {
            return bad(format!("l_g must be at least 2, got {}", self.l_g));
        }
        if self.n_s == 0 || self.n_f == 0 || self.l_q == 0 {
            return bad("n_s, n_f and l_q must be positive".into());
        }
        if self.l_d < self.l_g {
            return bad(format!("l_d ({}) must be at least l_g ({})", self.l_d, self.l_g));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        DistillerRegistry::default().get(&self.mode)?;
        Ok(())
    }

    pub fn shape(&self) -> DistillShape {
        DistillShape {
            l_q: self.l_q,
            l_d: self.l_d,
            l_g: self.l_g,
        }
    }

    /// Width of each recurrent input vector: `l_g·n_s` signals plus the IDF weight.
    pub fn recurrent_input_dim(&self) -> usize {
        self.l_g * self.n_s + 1
    }

    pub fn param_count(&self) -> usize {
        let conv: usize = (2..=self.l_g).map(|n| self.n_f * (n * n + 1)).sum();
        conv + GATES * (self.recurrent_input_dim() + 2)
    }
}

/// All trainable weights plus the configuration that shaped them.
///
/// Groups are laid out as `conv{n}.kernel`, `conv{n}.bias` for
/// `n = 2..=l_g`, then `lstm.w`, `lstm.u`, `lstm.b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PacrrParams<T> {
    pub config: PacrrConfig,
    pub groups: Vec<ParamGroup<T>>,
}

fn glorot<T: Scalar>(rng: &mut ChaCha8Rng, dims: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = dims.iter().product();
    let values = (0..n)
        .map(|_| T::of((2.0 * rng.gen::<f64>() - 1.0) * limit))
        .collect();
    Tensor::from_vec(dims, values).expect("sized")
}

/// Draws fresh parameters, fully determined by `config.seed`.
pub fn init_params<T: Scalar>(config: &PacrrConfig) -> Result<PacrrParams<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let nf = config.n_f;
    let mut groups = Vec::new();
    for n in 2..=config.l_g {
        groups.push(ParamGroup::new(
            format!("conv{n}.kernel"),
            glorot(&mut rng, &[nf, n, n], n * n, nf * n * n),
        ));
        groups.push(ParamGroup::new(format!("conv{n}.bias"), Tensor::zeros(&[nf])));
    }
    let d = config.recurrent_input_dim();
    groups.push(ParamGroup::new("lstm.w", glorot(&mut rng, &[GATES, d], d, GATES)));
    groups.push(ParamGroup::new("lstm.u", glorot(&mut rng, &[GATES], 1, GATES)));
    groups.push(ParamGroup::new("lstm.b", Tensor::zeros(&[GATES])));
    Ok(PacrrParams {
        config: config.clone(),
        groups,
    })
}

impl<T: Scalar> PacrrParams<T> {
    fn conv_index(&self, n: usize) -> usize {
        assert!((2..=self.config.l_g).contains(&n), "no convolution for n = {n}");
        2 * (n - 2)
    }

    fn lstm_index(&self) -> usize {
        2 * (self.config.l_g - 1)
    }

    pub fn conv_kernel(&self, n: usize) -> &Tensor<T> {
        &self.groups[self.conv_index(n)].tensor
    }

    pub fn conv_bias(&self, n: usize) -> &Tensor<T> {
        &self.groups[self.conv_index(n) + 1].tensor
    }

    pub fn conv_layers(&self) -> usize {
        self.config.l_g - 1
    }

    pub fn recurrent(&self) -> RecurrentParams<'_, T> {
        let i = self.lstm_index();
        RecurrentParams {
            w: self.groups[i].tensor.values(),
            u: self.groups[i + 1].tensor.values(),
            b: self.groups[i + 2].tensor.values(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> PacrrParams<U> {
        PacrrParams {
            config: self.config.clone(),
            groups: self
                .groups
                .iter()
                .map(|g| ParamGroup::new(g.name.clone(), g.tensor.cast()))
                .collect(),
        }
    }

    /// All parameter values concatenated in group order.
    pub fn flatten(&self) -> Vec<T> {
        self.groups
            .iter()
            .flat_map(|g| g.tensor.values().iter().copied())
            .collect()
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn assign(&mut self, flat: &[T]) {
        let mut offset = 0;
        for g in &mut self.groups {
            let n = g.tensor.len();
            g.tensor.values_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat parameter vector has the wrong length");
    }

    pub fn zero_grad(&mut self) {
        self.groups.iter_mut().for_each(ParamGroup::zero_grad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_params() {
        let c = PacrrConfig::tiny("firstk");
        let a: PacrrParams<f32> = init_params(&c).unwrap();
        let b: PacrrParams<f32> = init_params(&c).unwrap();
        assert_eq!(a, b);
        let other: PacrrParams<f32> = init_params(&PacrrConfig { seed: 1, ..c }).unwrap();
        assert_ne!(a.flatten(), other.flatten());
    }

    #[test]
    fn layer_counts() {
        let c = PacrrConfig {
            l_g: 3,
            ..PacrrConfig::tiny("firstk")
        };
        let p: PacrrParams<f64> = init_params(&c).unwrap();
        assert_eq!(p.conv_layers(), 2);
        assert_eq!(p.conv_kernel(2).dims(), &[4, 2, 2]);
        assert_eq!(p.conv_kernel(3).dims(), &[4, 3, 3]);

        let c = PacrrConfig {
            l_g: 4,
            n_s: 2,
            ..PacrrConfig::tiny("kwindow")
        };
        assert_eq!(c.recurrent_input_dim(), 9);
        let p: PacrrParams<f64> = init_params(&c).unwrap();
        assert_eq!(p.recurrent().w.len(), GATES * 9);
        assert_eq!(p.flatten().len(), c.param_count());
    }

    #[test]
    fn init_bounds_and_zero_biases() {
        let c = PacrrConfig::tiny("firstk");
        let p: PacrrParams<f64> = init_params(&c).unwrap();
        let lim2 = (6.0f64 / (4.0 + 16.0)).sqrt();
        assert!(p.conv_kernel(2).values().iter().all(|v| v.abs() <= lim2));
        assert!(p.conv_bias(2).values().iter().all(|&v| v == 0.0));
        assert!(p.recurrent().b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = PacrrConfig::tiny("firstk");
        for bad in [
            PacrrConfig { l_g: 1, ..base.clone() },
            PacrrConfig { n_s: 0, ..base.clone() },
            PacrrConfig { l_d: 2, ..base.clone() },
            PacrrConfig { mode: "sliding".into(), ..base.clone() },
            PacrrConfig { learning_rate: 0.0, ..base.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
