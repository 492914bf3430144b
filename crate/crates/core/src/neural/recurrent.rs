//! Gated recurrent cell with a single hidden unit.
//!
//! Gate order everywhere is input, forget, output, candidate:
//!
//! ```text
//! a_g = w_g · x_t + u_g · h_{t-1} + b_g
//! i = σ(a_i)  f = σ(a_f)  o = σ(a_o)  ĉ = tanh(a_c)
//! c_t = f · c_{t-1} + i · ĉ
//! h_t = o · tanh(c_t)
//! ```

use super::Scalar;

pub const GATES: usize = 4;
const I: usize = 0;
const F: usize = 1;
const O: usize = 2;
const C: usize = 3;

/// Borrowed view of the cell's weights.
#[derive(Debug, Clone, Copy)]
pub struct RecurrentParams<'a, T> {
    /// `GATES × D` input weights, row per gate.
    pub w: &'a [T],
    /// One recurrent weight per gate.
    pub u: &'a [T],
    /// One bias per gate.
    pub b: &'a [T],
}

/// Mutable gradient buffers matching [`RecurrentParams`].
#[derive(Debug)]
pub struct RecurrentGrads<'a, T> {
    pub w: &'a mut [T],
    pub u: &'a mut [T],
    pub b: &'a mut [T],
}

#[derive(Debug, Clone)]
pub struct RecurrentTrace<T> {
    /// Gate activations per step, in gate order.
    gates: Vec<[T; GATES]>,
    /// `c_0 ..= c_T`.
    cells: Vec<T>,
    /// `h_0 ..= h_T`.
    hidden: Vec<T>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Runs the cell over `inputs` from zero state and returns `h_T`.
pub fn recurrent_sequence<T: Scalar>(
    inputs: &[Vec<T>],
    params: RecurrentParams<'_, T>,
) -> (T, RecurrentTrace<T>) {
    assert!(!inputs.is_empty(), "recurrent sequence needs at least one step");
    let d = inputs[0].len();
    assert_eq!(params.w.len(), GATES * d, "input weights must be GATES×D");
    let mut trace = RecurrentTrace {
        gates: Vec::with_capacity(inputs.len()),
        cells: vec![T::zero()],
        hidden: vec![T::zero()],
    };
    let (mut c, mut h) = (T::zero(), T::zero());
    for x in inputs {
        let pre = |g: usize| dot(&params.w[g * d..(g + 1) * d], x) + params.u[g] * h + params.b[g];
        let gates = [sigmoid(pre(I)), sigmoid(pre(F)), sigmoid(pre(O)), pre(C).tanh()];
        c = gates[F] * c + gates[I] * gates[C];
        h = gates[O] * c.tanh();
        trace.gates.push(gates);
        trace.cells.push(c);
        trace.hidden.push(h);
    }
    (h, trace)
}

/// Backpropagates `d_h` (gradient of the loss w.r.t. `h_T`) through time.
/// Parameter gradients are accumulated into `grads`; the per-step input
/// gradients are returned.
pub fn recurrent_sequence_backward<T: Scalar>(
    inputs: &[Vec<T>],
    params: RecurrentParams<'_, T>,
    trace: &RecurrentTrace<T>,
    d_h: T,
    grads: &mut RecurrentGrads<'_, T>,
) -> Vec<Vec<T>> {
    let d = inputs[0].len();
    let one = T::one();
    let mut d_inputs = vec![vec![T::zero(); d]; inputs.len()];
    let (mut dh, mut dc) = (d_h, T::zero());
    for t in (0..inputs.len()).rev() {
        let [i, f, o, cand] = trace.gates[t];
        let c_prev = trace.cells[t];
        let h_prev = trace.hidden[t];
        let tc = trace.cells[t + 1].tanh();

        let d_o = dh * tc;
        dc += dh * o * (one - tc * tc);
        let d_i = dc * cand;
        let d_cand = dc * i;
        let d_f = dc * c_prev;
        let dc_prev = dc * f;

        let da = [
            d_i * i * (one - i),
            d_f * f * (one - f),
            d_o * o * (one - o),
            d_cand * (one - cand * cand),
        ];
        let mut dh_prev = T::zero();
        for (g, &dag) in da.iter().enumerate() {
            let wg = &params.w[g * d..(g + 1) * d];
            let gw = &mut grads.w[g * d..(g + 1) * d];
            for k in 0..d {
                gw[k] += dag * inputs[t][k];
                d_inputs[t][k] += dag * wg[k];
            }
            grads.u[g] += dag * h_prev;
            grads.b[g] += dag;
            dh_prev += dag * params.u[g];
        }
        dh = dh_prev;
        dc = dc_prev;
    }
    d_inputs
}
