//! Batched reverse-mode gradients of the training loss with respect to the
//! network parameters.
//!
//! The network is run once over the whole input batch with every layer's
//! activations kept on a [`Tape`]. The loss then yields an adjoint for each
//! output row (through the compiled equation programs), and the tape pulls
//! those adjoints back through the layers with matrix products.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::expr::Scratch;
use crate::net::{activation, NetworkParams};
use crate::train::{LossMode, LossSpec};

/// Layer activations for one batch of inputs.
#[derive(Debug, Clone)]
pub struct Tape {
    acts: Vec<Array2<f64>>,
}

impl Tape {
    pub fn record(params: &NetworkParams, inputs: &[f64]) -> Tape {
        let batch = inputs.len();
        let theta = params.theta();
        let slots = params.slots();
        let mut acts = Vec::with_capacity(slots.len() + 1);
        acts.push(Array2::from_shape_vec((batch, 1), inputs.to_vec()).expect("column shape"));
        for (k, s) in slots.iter().enumerate() {
            let w = ArrayView2::from_shape((s.fan_out, s.fan_in), &theta[s.weights..s.bias])
                .expect("weight slot shape");
            let b = &theta[s.bias..s.bias + s.fan_out];
            let mut z = Array2::zeros((batch, s.fan_out));
            general_mat_mul(1.0, &acts[k], &w.t(), 0.0, &mut z);
            let last = k + 1 == slots.len();
            for mut row in z.rows_mut() {
                for (v, bi) in row.iter_mut().zip(b) {
                    *v += bi;
                    if !last {
                        *v = activation(*v);
                    }
                }
            }
            acts.push(z);
        }
        Tape { acts }
    }

    pub fn batch(&self) -> usize {
        self.acts[0].nrows()
    }

    pub fn outputs(&self) -> usize {
        self.acts.last().unwrap().ncols()
    }

    pub fn output_row(&self, i: usize) -> &[f64] {
        self.acts
            .last()
            .unwrap()
            .row(i)
            .to_slice()
            .expect("activations are row-major")
    }

    /// First batch row whose output is not finite.
    pub fn first_nonfinite_row(&self) -> Option<usize> {
        let out = self.acts.last().unwrap();
        out.rows()
            .into_iter()
            .position(|r| r.iter().any(|v| !v.is_finite()))
    }

    /// Pulls output adjoints (`batch × outputs`) back to a parameter gradient.
    pub fn backward(&self, params: &NetworkParams, adjoint: Array2<f64>) -> Vec<f64> {
        assert_eq!(adjoint.dim(), (self.batch(), self.outputs()));
        let theta = params.theta();
        let slots = params.slots();
        let mut grad = vec![0.0; theta.len()];
        let mut delta = adjoint;
        for (k, s) in slots.iter().enumerate().rev() {
            let a_prev = &self.acts[k];
            {
                let mut gw = ArrayViewMut2::from_shape(
                    (s.fan_out, s.fan_in),
                    &mut grad[s.weights..s.bias],
                )
                .expect("weight slot shape");
                general_mat_mul(1.0, &delta.t(), a_prev, 0.0, &mut gw);
            }
            for (g, col) in grad[s.bias..s.bias + s.fan_out]
                .iter_mut()
                .zip(delta.columns())
            {
                *g = col.sum();
            }
            if k > 0 {
                let w = ArrayView2::from_shape((s.fan_out, s.fan_in), &theta[s.weights..s.bias])
                    .expect("weight slot shape");
                let mut next = Array2::zeros((self.batch(), s.fan_in));
                general_mat_mul(1.0, &delta, &w, 0.0, &mut next);
                next.zip_mut_with(a_prev, |d, &a| *d *= 1.0 - a * a);
                delta = next;
            }
        }
        grad
    }
}

/// Loss value only.
pub fn loss(params: &NetworkParams, spec: &LossSpec) -> Result<f64> {
    evaluate(params, spec, false).map(|(l, _)| l)
}

/// Loss value and its gradient with respect to the flat parameter vector.
pub fn loss_and_grad(params: &NetworkParams, spec: &LossSpec) -> Result<(f64, Vec<f64>)> {
    evaluate(params, spec, true).map(|(l, g)| (l, g.expect("gradient requested")))
}

fn evaluate(params: &NetworkParams, spec: &LossSpec, want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
    let n_out = spec.outputs();
    if params.outputs() != n_out || params.layer_sizes()[0] != 1 {
        return Err(Error::Config(format!(
            "network maps 1 -> {} but the loss needs 1 -> {}",
            params.outputs(),
            n_out
        )));
    }
    let inputs = spec.batch_inputs();
    let tape = Tape::record(params, &inputs);
    if let Some(row) = tape.first_nonfinite_row() {
        let (point, t) = spec.locate(row);
        return Err(Error::NonFiniteLoss {
            point,
            t,
            equation: None,
        });
    }
    let mut adjoint = if want_grad {
        Array2::zeros((inputs.len(), n_out))
    } else {
        Array2::zeros((0, 0))
    };

    let w = spec.weights();
    let target = spec.target();
    let x_start = tape.output_row(0);
    let mut initial = 0.0;
    for (j, (&x, &x0)) in x_start.iter().zip(target).enumerate() {
        let d = x - x0;
        initial += d * d;
        if want_grad {
            adjoint[(0, j)] = 2.0 * w.initial * d;
        }
    }

    let n_f = spec.n_collocation();
    let scale = 2.0 * w.residual / n_f as f64;
    let programs = spec.system().programs();
    let mut scratch = Scratch::default();
    let mut row_grad = vec![0.0; n_out];
    let mut residual = 0.0;
    for k in 0..n_f {
        let row = k + 1;
        let x = tape.output_row(row);
        let t = spec.collocation()[k];
        let (time, coef) = match spec.mode() {
            LossMode::Homotopy(hp) => (0.0, hp.coefficient(t)),
            LossMode::TimeVarying(_) => (spec.physical_time(t), 1.0),
        };
        row_grad.iter_mut().for_each(|g| *g = 0.0);
        let mut point_sum = 0.0;
        for (i, prog) in programs.iter().enumerate() {
            let mut h = f64::NAN;
            let combine = |fx: f64| match spec.mode() {
                LossMode::Homotopy(hp) => hp.combine(i, t, fx),
                LossMode::TimeVarying(_) => fx,
            };
            let outcome = if want_grad {
                prog.eval_then_grad(
                    x,
                    time,
                    |fx| {
                        h = combine(fx);
                        scale * h * coef
                    },
                    &mut row_grad,
                    &mut scratch,
                )
            } else {
                prog.eval(x, time, &mut scratch).map(|fx| {
                    h = combine(fx);
                    fx
                })
            };
            if let Err(kind) = outcome {
                return Err(Error::LossDomain {
                    point: k,
                    t: spec.physical_time(t),
                    error: crate::error::EvalError { equation: i, kind },
                });
            }
            if !h.is_finite() || !(h * h).is_finite() {
                return Err(Error::NonFiniteLoss {
                    point: k,
                    t: spec.physical_time(t),
                    equation: Some(i),
                });
            }
            point_sum += h * h;
        }
        residual += point_sum;
        if want_grad {
            for (j, g) in row_grad.iter().enumerate() {
                adjoint[(row, j)] = *g;
            }
        }
    }

    let value = w.initial * initial + w.residual * residual / n_f as f64;
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss {
            point: 0,
            t: 0.0,
            equation: None,
        });
    }
    let grad = want_grad.then(|| tape.backward(params, adjoint));
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_system;
    use crate::homotopy::HomotopyProblem;
    use crate::train::LossWeights;

    fn abs_spec(collocation: Vec<f64>) -> LossSpec {
        let sys = parse_system("x^2 - y^2 = 0\n1 - abs(x - y) = 0").unwrap();
        let hp = HomotopyProblem::new(sys, vec![0.0, 0.0], 0.01).unwrap();
        LossSpec::homotopy(hp, collocation).unwrap()
    }

    fn frozen(outputs: &[f64], sizes: Vec<usize>) -> NetworkParams {
        let mut p = NetworkParams::zeros(sizes).unwrap();
        let n = p.len();
        let k = outputs.len();
        p.theta_mut()[n - k..].copy_from_slice(outputs);
        p
    }

    #[test]
    fn hand_evaluated_loss() {
        let spec = abs_spec(vec![1.0]);
        let p = frozen(&[1.0, 0.0], vec![1, 3, 2]);
        assert_eq!(loss(&p, &spec).unwrap(), 2.0);
    }

    #[test]
    fn residual_weight_is_linear() {
        let spec = abs_spec(vec![0.1, 0.5, 0.9]);
        let p = NetworkParams::init_xavier(vec![1, 4, 2], 3).unwrap();
        let base = loss(&p, &spec.clone().with_weights(LossWeights::new(1.0, 0.0).unwrap()))
            .unwrap();
        let one = loss(&p, &spec).unwrap();
        let two = loss(&p, &spec.with_weights(LossWeights::new(1.0, 2.0).unwrap())).unwrap();
        assert!((two - base - 2.0 * (one - base)).abs() < 1e-14 * two);
    }

    #[test]
    fn loss_matches_value_from_gradient_path() {
        let spec = abs_spec(vec![0.0, 0.3, 0.77, 1.0]);
        let p = NetworkParams::init_xavier(vec![1, 5, 5, 2], 11).unwrap();
        let (l, _) = loss_and_grad(&p, &spec).unwrap();
        assert_eq!(l, loss(&p, &spec).unwrap());
    }

    #[test]
    fn backward_matches_finite_differences_of_outputs() {
        let p = NetworkParams::init_xavier(vec![1, 3, 4, 2], 5).unwrap();
        let ts = [0.1, 0.6, 0.95];
        let tape = Tape::record(&p, &ts);
        let mut adj = Array2::zeros((3, 2));
        adj[(0, 0)] = 0.5;
        adj[(1, 1)] = -2.0;
        adj[(2, 0)] = 1.5;
        adj[(2, 1)] = 0.25;
        let g = tape.backward(&p, adj.clone());
        let objective = |q: &NetworkParams| {
            let t = Tape::record(q, &ts);
            (0..3)
                .map(|i| {
                    let r = t.output_row(i);
                    adj[(i, 0)] * r[0] + adj[(i, 1)] * r[1]
                })
                .sum::<f64>()
        };
        let h = 1e-6;
        for k in 0..p.len() {
            let mut plus = p.clone();
            plus.theta_mut()[k] += h;
            let mut minus = p.clone();
            minus.theta_mut()[k] -= h;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "param {k}: {fd} vs {}", g[k]);
        }
    }
}
