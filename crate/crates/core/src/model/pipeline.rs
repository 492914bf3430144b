//! Forward and backward passes of the scoring network.
//!
//! ```text
//! per_n[n] ──conv n×n, stride (1, s_n)──► n_f maps ──max over filters──► C^n
//! per_n[1] ─────────────────────────────────────────────────────────────► C^1
//! C^n ──k-max per query row──► P[i][n] (n_s values)
//! for each real query term i: [P[i][1] .. P[i][l_g], softmax(idf)_i] ──► recurrent cell ──► rel
//! ```

use super::PacrrParams;
use crate::error::{Error, Result};
use crate::neural::{
    conv2d, conv2d_backward, kmax_per_row, kmax_per_row_backward, max_over_filters,
    max_over_filters_backward, recurrent_sequence, recurrent_sequence_backward, softmax,
    Conv2dOutput, FilterMaxOutput, KMaxOutput, RecurrentGrads, RecurrentTrace, Scalar, Tensor,
};
use crate::simmat::DistilledInput;

/// Intermediate state of one forward pass.
#[derive(Debug, Clone)]
pub struct ScoreTrace<T> {
    pub query_len: usize,
    inputs: Vec<Tensor<T>>,
    conv: Vec<Conv2dOutput<T>>,
    fmax: Vec<FilterMaxOutput<T>>,
    /// Index `n − 1`; each covers only the real query rows.
    kmax: Vec<KMaxOutput<T>>,
    pub idf_weights: Vec<T>,
    sequence: Vec<Vec<T>>,
    recurrent: RecurrentTrace<T>,
    pub rel: T,
}

impl<T: Scalar> ScoreTrace<T> {
    /// Salient signals for query term `i`: `l_g` rows of `n_s` values.
    pub fn salient(&self, i: usize) -> Vec<Vec<T>> {
        self.kmax
            .iter()
            .map(|k| {
                let n_s = k.output.dims()[1];
                k.output.values()[i * n_s..(i + 1) * n_s].to_vec()
            })
            .collect()
    }

    /// Every discrete decision taken: rectifier masks, winning filters and
    /// k-max sources.
    pub fn signature(&self) -> Vec<u32> {
        let mut sig = Vec::new();
        for c in &self.conv {
            sig.extend(c.active_mask().map(u32::from));
        }
        for f in &self.fmax {
            sig.extend_from_slice(&f.argmax);
        }
        for k in &self.kmax {
            sig.extend(k.sources.iter().map(|s| s.unwrap_or(u32::MAX)));
        }
        sig
    }
}

/// Gradient buffers laid out like [`PacrrParams::groups`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(params: &PacrrParams<T>) -> Self {
        Self {
            tensors: params
                .groups
                .iter()
                .map(|g| Tensor::zeros(g.tensor.dims()))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors
            .iter()
            .flat_map(|t| t.values().iter().copied())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.values().iter().all(|v| *v == T::zero()))
    }

    /// Adds these gradients into the parameter groups' gradient fields.
    pub fn add_into(&self, params: &mut PacrrParams<T>) {
        for (g, t) in params.groups.iter_mut().zip(&self.tensors) {
            for (a, &b) in g.grad.values_mut().iter_mut().zip(t.values()) {
                *a += b;
            }
        }
    }

    pub fn clear(&mut self) {
        self.tensors.iter_mut().for_each(|t| t.fill(T::zero()));
    }
}

fn check_input<T: Scalar>(params: &PacrrParams<T>, input: &DistilledInput, idf: &[f64]) -> Result<()> {
    let c = &params.config;
    if input.l_g() != c.l_g || input.doc_strides.len() != c.l_g {
        return Err(Error::Shape(format!(
            "input has {} n-gram matrices, model expects {}",
            input.l_g(),
            c.l_g
        )));
    }
    if let Some(m) = input.per_n.iter().find(|m| m.rows != c.l_q || m.cols != c.l_d) {
        return Err(Error::Shape(format!(
            "input matrix is {}×{}, model expects {}×{}",
            m.rows, m.cols, c.l_q, c.l_d
        )));
    }
    if input.query_len == 0 || input.query_len > c.l_q {
        return Err(Error::Shape(format!(
            "query length {} outside 1..={}",
            input.query_len, c.l_q
        )));
    }
    if idf.len() != input.query_len {
        return Err(Error::Shape(format!(
            "{} idf values for a {}-term query",
            idf.len(),
            input.query_len
        )));
    }
    Ok(())
}

fn leading_rows<T: Scalar>(t: &Tensor<T>, rows: usize) -> Tensor<T> {
    let w = t.dims()[1];
    Tensor::from_vec(&[rows, w], t.values()[..rows * w].to_vec()).expect("prefix rows")
}

/// Runs the network and keeps everything the backward pass needs.
pub fn forward<T: Scalar>(
    params: &PacrrParams<T>,
    input: &DistilledInput,
    idf: &[f64],
) -> Result<ScoreTrace<T>> {
    check_input(params, input, idf)?;
    let c = &params.config;
    let q = input.query_len;
    let inputs: Vec<Tensor<T>> = input
        .per_n
        .iter()
        .map(|m| {
            Tensor::from_vec(&[m.rows, m.cols], m.data.iter().map(|&v| T::of(v)).collect())
                .expect("matrix-sized")
        })
        .collect();

    let mut kmax = Vec::with_capacity(c.l_g);
    kmax.push(kmax_per_row(&leading_rows(&inputs[0], q), c.n_s));
    let mut conv = Vec::with_capacity(c.l_g - 1);
    let mut fmax = Vec::with_capacity(c.l_g - 1);
    for n in 2..=c.l_g {
        let out = conv2d(
            &inputs[n - 1],
            params.conv_kernel(n),
            params.conv_bias(n),
            (1, input.doc_stride(n)),
        )?;
        let pooled = max_over_filters(&out.output);
        kmax.push(kmax_per_row(&leading_rows(&pooled.output, q), c.n_s));
        conv.push(out);
        fmax.push(pooled);
    }

    let idf_t: Vec<T> = idf.iter().map(|&v| T::of(v)).collect();
    let idf_weights = softmax(&idf_t);
    let sequence: Vec<Vec<T>> = (0..q)
        .map(|i| {
            let mut v = Vec::with_capacity(c.recurrent_input_dim());
            for k in &kmax {
                v.extend_from_slice(&k.output.values()[i * c.n_s..(i + 1) * c.n_s]);
            }
            v.push(idf_weights[i]);
            v
        })
        .collect();
    let (rel, recurrent) = recurrent_sequence(&sequence, params.recurrent());
    Ok(ScoreTrace {
        query_len: q,
        inputs,
        conv,
        fmax,
        kmax,
        idf_weights,
        sequence,
        recurrent,
        rel,
    })
}

/// Relevance score `rel(q, d)` in `(−1, 1)`.
pub fn score<T: Scalar>(params: &PacrrParams<T>, input: &DistilledInput, idf: &[f64]) -> Result<T> {
    forward(params, input, idf).map(|t| t.rel)
}

/// Accumulates `d_rel · ∂rel/∂θ` into `grads`.
pub fn backward<T: Scalar>(
    params: &PacrrParams<T>,
    trace: &ScoreTrace<T>,
    d_rel: T,
    grads: &mut Gradients<T>,
) {
    if d_rel == T::zero() {
        return;
    }
    let c = &params.config;
    let lstm = params.lstm_index();
    let d_seq = {
        let (_, tail) = grads.tensors.split_at_mut(lstm);
        let (w, rest) = tail.split_at_mut(1);
        let (u, b) = rest.split_at_mut(1);
        let mut rg = RecurrentGrads {
            w: w[0].values_mut(),
            u: u[0].values_mut(),
            b: b[0].values_mut(),
        };
        recurrent_sequence_backward(&trace.sequence, params.recurrent(), &trace.recurrent, d_rel, &mut rg)
    };

    let q = trace.query_len;
    for n in 2..=c.l_g {
        let layer = n - 2;
        let mut d_k = Tensor::zeros(&[q, c.n_s]);
        for (i, d) in d_seq.iter().enumerate() {
            d_k.values_mut()[i * c.n_s..(i + 1) * c.n_s]
                .copy_from_slice(&d[(n - 1) * c.n_s..n * c.n_s]);
        }
        let pooled = &trace.fmax[layer].output;
        let mut d_pooled = Tensor::zeros(pooled.dims());
        {
            let w = pooled.dims()[1];
            let mut d_rows = Tensor::zeros(&[q, w]);
            kmax_per_row_backward(&trace.kmax[n - 1], &d_k, &mut d_rows);
            d_pooled.values_mut()[..q * w].copy_from_slice(d_rows.values());
        }
        let conv = &trace.conv[layer];
        let mut d_conv = Tensor::zeros(conv.output.dims());
        max_over_filters_backward(&trace.fmax[layer], &d_pooled, &mut d_conv);

        let idx = params.conv_index(n);
        let (kernel_grad, bias_grad) = {
            let (a, b) = grads.tensors.split_at_mut(idx + 1);
            (&mut a[idx], &mut b[0])
        };
        conv2d_backward(
            &trace.inputs[n - 1],
            params.conv_kernel(n),
            conv,
            &d_conv,
            None,
            kernel_grad,
            bias_grad,
        );
    }
}

/// Gradient of `loss_gradient · rel(q, d)` with respect to every parameter.
pub fn score_gradients<T: Scalar>(
    params: &PacrrParams<T>,
    input: &DistilledInput,
    idf: &[f64],
    loss_gradient: T,
) -> Result<Gradients<T>> {
    let trace = forward(params, input, idf)?;
    let mut grads = Gradients::zeros_like(params);
    backward(params, &trace, loss_gradient, &mut grads);
    Ok(grads)
}
