use super::{Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct FilterMaxOutput<T> {
    /// `H × W`.
    pub output: Tensor<T>,
    /// Winning filter per cell; the first one among equals.
    pub argmax: Vec<u32>,
}

/// Elementwise maximum over the leading (filter) axis of an `n_f × H × W` tensor.
pub fn max_over_filters<T: Scalar>(input: &Tensor<T>) -> FilterMaxOutput<T> {
    let &[n_f, h, w] = input.dims() else {
        panic!("max_over_filters expects n_f×H×W, got {:?}", input.dims());
    };
    assert!(n_f >= 1, "need at least one filter");
    let plane = h * w;
    let x = input.values();
    let mut out = x[..plane].to_vec();
    let mut argmax = vec![0u32; plane];
    for f in 1..n_f {
        let layer = &x[f * plane..(f + 1) * plane];
        for (cell, &v) in layer.iter().enumerate() {
            if v > out[cell] {
                out[cell] = v;
                argmax[cell] = f as u32;
            }
        }
    }
    FilterMaxOutput {
        output: Tensor::from_vec(&[h, w], out).expect("plane-sized"),
        argmax,
    }
}

pub fn max_over_filters_backward<T: Scalar>(
    fwd: &FilterMaxOutput<T>,
    d_out: &Tensor<T>,
    d_input: &mut Tensor<T>,
) {
    let plane = fwd.argmax.len();
    let g = d_input.values_mut();
    for (cell, (&f, &d)) in fwd.argmax.iter().zip(d_out.values()).enumerate() {
        g[f as usize * plane + cell] += d;
    }
}

#[derive(Debug, Clone)]
pub struct KMaxOutput<T> {
    /// `H × n_s`, each row sorted descending.
    pub output: Tensor<T>,
    /// Source column for each output cell; `None` where the row was too short
    /// and the output is zero padding.
    pub sources: Vec<Option<u32>>,
}

/// Keeps the `n_s` largest values of each row, in descending order.
///
/// Equal values are taken left to right. Rows shorter than `n_s` are padded
/// with zeros.
pub fn kmax_per_row<T: Scalar>(input: &Tensor<T>, n_s: usize) -> KMaxOutput<T> {
    let &[h, w] = input.dims() else {
        panic!("kmax_per_row expects H×W, got {:?}", input.dims());
    };
    assert!(n_s >= 1, "n_s must be at least 1");
    let x = input.values();
    let mut out = Vec::with_capacity(h * n_s);
    let mut sources = Vec::with_capacity(h * n_s);
    let mut taken = vec![false; w];
    for r in 0..h {
        let row = &x[r * w..(r + 1) * w];
        taken.iter_mut().for_each(|t| *t = false);
        for _ in 0..n_s {
            let mut best: Option<usize> = None;
            for (c, &v) in row.iter().enumerate() {
                if taken[c] {
                    continue;
                }
                match best {
                    Some(b) if row[b] >= v => {}
                    _ => best = Some(c),
                }
            }
            match best {
                Some(c) => {
                    taken[c] = true;
                    out.push(row[c]);
                    sources.push(Some(c as u32));
                }
                None => {
                    out.push(T::zero());
                    sources.push(None);
                }
            }
        }
    }
    KMaxOutput {
        output: Tensor::from_vec(&[h, n_s], out).expect("row-sized"),
        sources,
    }
}

pub fn kmax_per_row_backward<T: Scalar>(
    fwd: &KMaxOutput<T>,
    d_out: &Tensor<T>,
    d_input: &mut Tensor<T>,
) {
    let n_s = fwd.output.dims()[1];
    let w = d_input.dims()[1];
    let g = d_input.values_mut();
    for (i, (src, &d)) in fwd.sources.iter().zip(d_out.values()).enumerate() {
        if let Some(c) = src {
            g[(i / n_s) * w + *c as usize] += d;
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(input: &[T]) -> Vec<T> {
    assert!(!input.is_empty(), "softmax of an empty vector");
    let m = input.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = input.iter().map(|&v| (v - m).exp()).collect();
    let total = exps.iter().copied().fold(T::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / total).collect()
}

/// Input gradient of [`softmax`] given its output `probs` and `d_out`.
pub fn softmax_backward<T: Scalar>(probs: &[T], d_out: &[T]) -> Vec<T> {
    let dot = probs
        .iter()
        .zip(d_out)
        .fold(T::zero(), |acc, (&p, &d)| acc + p * d);
    probs.iter().zip(d_out).map(|(&p, &d)| p * (d - dot)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(dims: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(dims, v.to_vec()).unwrap()
    }

    #[test]
    fn filter_max_cases() {
        let one = t(&[1, 1, 2], &[0.3, -0.2]);
        assert_eq!(max_over_filters(&one).output.values(), &[0.3, -0.2]);
        assert_eq!(max_over_filters(&t(&[2, 1, 1], &[1.0, 3.0])).output.values(), &[3.0]);
        let fm = max_over_filters(&t(&[2, 1, 2], &[2.0, 5.0, 4.0, 1.0]));
        assert_eq!(fm.output.values(), &[4.0, 5.0]);
        assert_eq!(fm.argmax, vec![1, 0]);
    }

    #[test]
    fn filter_max_ties_route_to_first() {
        let fm = max_over_filters(&t(&[3, 1, 1], &[1.0, 1.0, 1.0]));
        assert_eq!(fm.argmax, vec![0]);
        let mut g = Tensor::zeros(&[3, 1, 1]);
        max_over_filters_backward(&fm, &t(&[1, 1], &[2.0]), &mut g);
        assert_eq!(g.values(), &[2.0, 0.0, 0.0]);
    }

    #[test]
    fn kmax_cases() {
        let k = kmax_per_row(&t(&[1, 4], &[0.1, 0.9, 0.5, 0.7]), 2);
        assert_eq!(k.output.values(), &[0.9, 0.7]);
        assert_eq!(k.sources, vec![Some(1), Some(3)]);
        let k = kmax_per_row(&t(&[1, 1], &[0.3]), 3);
        assert_eq!(k.output.values(), &[0.3, 0.0, 0.0]);
        assert_eq!(k.sources, vec![Some(0), None, None]);
        let k = kmax_per_row(&t(&[1, 3], &[0.5, 0.5, 0.5]), 2);
        assert_eq!(k.output.values(), &[0.5, 0.5]);
        assert_eq!(k.sources, vec![Some(0), Some(1)]);
    }

    #[test]
    fn kmax_backward_routes_to_sources() {
        let x = t(&[2, 3], &[0.1, 0.9, 0.5, 0.4, 0.2, 0.8]);
        let k = kmax_per_row(&x, 2);
        let mut g = Tensor::zeros(&[2, 3]);
        kmax_per_row_backward(&k, &t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]), &mut g);
        assert_eq!(g.values(), &[0.0, 1.0, 2.0, 4.0, 0.0, 3.0]);
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.0f64, 0.0]), vec![0.5, 0.5]);
        assert_eq!(softmax(&[1000.0f64, 1000.0]), vec![0.5, 0.5]);
        let s = softmax(&[1.0f64.ln(), 3.0f64.ln()]);
        assert!((s[0] - 0.25).abs() < 1e-12 && (s[1] - 0.75).abs() < 1e-12);
        assert_eq!(softmax(&[7.5f32]), vec![1.0]);
    }
}
