//! Finite-difference verification of every differentiable op and of the full
//! scoring and pairwise-loss pipelines, in f64.
//!
//! Multi-output ops are reduced to a scalar with a random projection so that
//! every output contributes to the checked gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::model::{forward, init_params, score_gradients, Gradients, PacrrConfig, PacrrParams};
use crate::neural::gradcheck::{gradient_check, GradCheckResult, Probe, DEFAULT_STEP};
use crate::neural::{
    conv2d, conv2d_backward, hinge_loss, hinge_loss_grad, kmax_per_row, kmax_per_row_backward,
    max_over_filters, max_over_filters_backward, recurrent_sequence, recurrent_sequence_backward,
    softmax, softmax_backward, RecurrentGrads, RecurrentParams, Tensor, GATES,
};
use crate::simmat::{distiller, DistilledInput, Matrix, SimilarityMatrix};

/// Largest relative error accepted.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpCheck {
    pub name: String,
    #[serde(flatten)]
    pub result: GradCheckResult,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub tolerance: f64,
    pub checks: Vec<OpCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn get(&self, name: &str) -> Option<&OpCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn tensor(dims: &[usize], values: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(dims, values.to_vec()).expect("sized")
}

fn project(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

fn check_conv(rng: &mut ChaCha8Rng, config: &PacrrConfig, stride: (usize, usize)) -> GradCheckResult {
    let (h, w, nf, n) = (config.l_q, config.l_d, config.n_f, 2);
    let sizes = [h * w, nf * n * n, nf];
    let x: Vec<f64> = uniform(rng, sizes.iter().sum(), 1.0);
    let split = |x: &[f64]| {
        (
            tensor(&[h, w], &x[..sizes[0]]),
            tensor(&[nf, n, n], &x[sizes[0]..sizes[0] + sizes[1]]),
            tensor(&[nf], &x[sizes[0] + sizes[1]..]),
        )
    };
    let (input, kernels, bias) = split(&x);
    let fwd = conv2d(&input, &kernels, &bias, stride).expect("valid shapes");
    let r = uniform(rng, fwd.output.len(), 1.0);
    let d_out = tensor(fwd.output.dims(), &r);
    let mut gi = Tensor::zeros(input.dims());
    let mut gk = Tensor::zeros(kernels.dims());
    let mut gb = Tensor::zeros(bias.dims());
    conv2d_backward(&input, &kernels, &fwd, &d_out, Some(&mut gi), &mut gk, &mut gb);
    let analytic: Vec<f64> = [gi.values(), gk.values(), gb.values()].concat();
    gradient_check(
        |p| {
            let (i, k, b) = split(p);
            let o = conv2d(&i, &k, &b, stride).expect("valid shapes");
            Probe {
                value: project(&r, o.output.values()),
                signature: o.active_mask().map(u32::from).collect(),
            }
        },
        &x,
        &analytic,
        DEFAULT_STEP,
    )
}

fn check_filter_max(rng: &mut ChaCha8Rng, config: &PacrrConfig) -> GradCheckResult {
    let dims = [config.n_f, config.l_q, config.l_d];
    let x = uniform(rng, dims.iter().product(), 1.0);
    let fwd = max_over_filters(&tensor(&dims, &x));
    let r = uniform(rng, fwd.output.len(), 1.0);
    let mut g = Tensor::zeros(&dims);
    max_over_filters_backward(&fwd, &tensor(fwd.output.dims(), &r), &mut g);
    gradient_check(
        |p| {
            let o = max_over_filters(&tensor(&dims, p));
            Probe {
                value: project(&r, o.output.values()),
                signature: o.argmax,
            }
        },
        &x,
        g.values(),
        DEFAULT_STEP,
    )
}

fn check_kmax(rng: &mut ChaCha8Rng, config: &PacrrConfig) -> GradCheckResult {
    let dims = [config.l_q, config.l_d];
    let x = uniform(rng, dims.iter().product(), 1.0);
    let fwd = kmax_per_row(&tensor(&dims, &x), config.n_s);
    let r = uniform(rng, fwd.output.len(), 1.0);
    let mut g = Tensor::zeros(&dims);
    kmax_per_row_backward(&fwd, &tensor(fwd.output.dims(), &r), &mut g);
    gradient_check(
        |p| {
            let o = kmax_per_row(&tensor(&dims, p), config.n_s);
            Probe {
                value: project(&r, o.output.values()),
                signature: o.sources.iter().map(|s| s.unwrap_or(u32::MAX)).collect(),
            }
        },
        &x,
        g.values(),
        DEFAULT_STEP,
    )
}

fn check_softmax(rng: &mut ChaCha8Rng, config: &PacrrConfig) -> GradCheckResult {
    let x = uniform(rng, config.l_q, 3.0);
    let r = uniform(rng, x.len(), 1.0);
    let analytic = softmax_backward(&softmax(&x), &r);
    gradient_check(|p| Probe::smooth(project(&r, &softmax(p))), &x, &analytic, DEFAULT_STEP)
}

fn check_recurrent(rng: &mut ChaCha8Rng, config: &PacrrConfig) -> GradCheckResult {
    let (steps, d) = (config.l_q, config.recurrent_input_dim());
    let sizes = [steps * d, GATES * d, GATES, GATES];
    let x = uniform(rng, sizes.iter().sum(), 1.0);
    let split = |x: &[f64]| {
        let (inp, rest) = x.split_at(sizes[0]);
        let (w, rest) = rest.split_at(sizes[1]);
        let (u, b) = rest.split_at(sizes[2]);
        (inp.chunks(d).map(<[f64]>::to_vec).collect::<Vec<_>>(), w.to_vec(), u.to_vec(), b.to_vec())
    };
    let (inputs, w, u, b) = split(&x);
    let params = RecurrentParams { w: &w, u: &u, b: &b };
    let (_, trace) = recurrent_sequence(&inputs, params);
    let (mut gw, mut gu, mut gb) = (vec![0.0; w.len()], vec![0.0; u.len()], vec![0.0; b.len()]);
    let d_inputs = recurrent_sequence_backward(
        &inputs,
        params,
        &trace,
        1.0,
        &mut RecurrentGrads {
            w: &mut gw,
            u: &mut gu,
            b: &mut gb,
        },
    );
    let analytic: Vec<f64> = d_inputs.concat().into_iter().chain(gw).chain(gu).chain(gb).collect();
    gradient_check(
        |p| {
            let (i, w, u, b) = split(p);
            Probe::smooth(recurrent_sequence(&i, RecurrentParams { w: &w, u: &u, b: &b }).0)
        },
        &x,
        &analytic,
        DEFAULT_STEP,
    )
}

fn check_hinge(rng: &mut ChaCha8Rng) -> GradCheckResult {
    let x = uniform(rng, 2, 0.9);
    let (gp, gn) = hinge_loss_grad(x[0], x[1]);
    gradient_check(
        |p| {
            let v = hinge_loss(p[0], p[1]);
            Probe {
                value: v,
                signature: vec![u32::from(1.0 - p[0] + p[1] > 0.0)],
            }
        },
        &x,
        &[gp, gn],
        DEFAULT_STEP,
    )
}

/// Random similarity matrix for a query shorter than `l_q` and a document
/// longer than `l_d`, so padding and truncation are both exercised.
fn random_input(rng: &mut ChaCha8Rng, config: &PacrrConfig) -> (DistilledInput, Vec<f64>) {
    let q = config.l_q.saturating_sub(1).max(1);
    let d = config.l_d + config.l_d / 2;
    let rows: Vec<Vec<f64>> = (0..q).map(|_| uniform(rng, d, 1.0)).collect();
    let sim = SimilarityMatrix::from_values(Matrix::from_rows(&rows));
    let input = distiller(&config.mode)
        .expect("validated mode")
        .distill(&sim, config.shape())
        .expect("valid shape");
    let idf = (0..q).map(|_| rng.gen_range(0.5..4.0)).collect();
    (input, idf)
}

/// Initial parameters with every bias replaced by a nonzero random value.
fn random_params(rng: &mut ChaCha8Rng, config: &PacrrConfig) -> Result<PacrrParams<f64>> {
    let mut params: PacrrParams<f64> = init_params(config)?;
    for g in &mut params.groups {
        if g.name.ends_with("bias") || g.name == "lstm.b" {
            for v in g.tensor.values_mut() {
                *v = rng.gen_range(0.05..0.3) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            }
        }
    }
    Ok(params)
}

fn check_score(rng: &mut ChaCha8Rng, config: &PacrrConfig) -> Result<GradCheckResult> {
    let (input, idf) = random_input(rng, config);
    let mut params = random_params(rng, config)?;
    let x = params.flatten();
    let analytic = score_gradients(&params, &input, &idf, 1.0)?.flatten();
    Ok(gradient_check(
        |p| {
            params.assign(p);
            let t = forward(&params, &input, &idf).expect("validated input");
            Probe {
                value: t.rel,
                signature: t.signature(),
            }
        },
        &x,
        &analytic,
        DEFAULT_STEP,
    ))
}

fn check_pair_loss(rng: &mut ChaCha8Rng, config: &PacrrConfig) -> Result<GradCheckResult> {
    let (pos, idf) = random_input(rng, config);
    let (neg, _) = random_input(rng, config);
    let mut params = random_params(rng, config)?;
    let x = params.flatten();
    let tp = forward(&params, &pos, &idf)?;
    let tn = forward(&params, &neg, &idf)?;
    let (dp, dn) = hinge_loss_grad(tp.rel, tn.rel);
    let mut grads = Gradients::zeros_like(&params);
    crate::model::backward(&params, &tp, dp, &mut grads);
    crate::model::backward(&params, &tn, dn, &mut grads);
    Ok(gradient_check(
        |p| {
            params.assign(p);
            let tp = forward(&params, &pos, &idf).expect("validated input");
            let tn = forward(&params, &neg, &idf).expect("validated input");
            let mut signature = tp.signature();
            signature.extend(tn.signature());
            signature.push(u32::from(1.0 - tp.rel + tn.rel > 0.0));
            Probe {
                value: hinge_loss(tp.rel, tn.rel),
                signature,
            }
        },
        &x,
        &grads.flatten(),
        DEFAULT_STEP,
    ))
}

/// Runs every check with dimensions taken from `config`; `seed` drives all
/// random inputs.
pub fn run_gradcheck_suite(config: &PacrrConfig, seed: u64) -> Result<GradCheckReport> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = |mode: &str| PacrrConfig {
        mode: mode.into(),
        seed,
        ..config.clone()
    };
    let mut raw = vec![
        ("conv2d", check_conv(&mut rng, config, (1, 1))),
        ("conv2d_strided", check_conv(&mut rng, config, (1, 2))),
        ("max_over_filters", check_filter_max(&mut rng, config)),
        ("kmax_per_row", check_kmax(&mut rng, config)),
        ("softmax", check_softmax(&mut rng, config)),
        ("recurrent_sequence", check_recurrent(&mut rng, config)),
        ("hinge_loss", check_hinge(&mut rng)),
    ];
    for (name, mode) in [("score_firstk", "firstk"), ("score_kwindow", "kwindow")] {
        raw.push((name, check_score(&mut rng, &model(mode))?));
    }
    for (name, mode) in [("pair_loss_firstk", "firstk"), ("pair_loss_kwindow", "kwindow")] {
        raw.push((name, check_pair_loss(&mut rng, &model(mode))?));
    }
    let checks: Vec<OpCheck> = raw
        .into_iter()
        .map(|(name, result)| OpCheck {
            name: name.to_string(),
            passed: result.passes(GRADCHECK_TOLERANCE) && result.checked > 0,
            result,
        })
        .collect();
    let passed = checks.iter().all(|c| c.passed);
    Ok(GradCheckReport {
        seed,
        tolerance: GRADCHECK_TOLERANCE,
        checks,
        passed,
    })
}
