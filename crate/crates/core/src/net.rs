//! Fully connected network `x̂(Θ; t)` with scalar input and tanh hidden layers.
//!
//! Parameters live in one flat vector. For each layer `k` (in order) it holds
//! the weight matrix `w_k` of shape `n_k × n_{k-1}` in row-major order,
//! followed by the bias vector `b_k` of length `n_k`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SNAPSHOT_MAGIC: &str = "hann-params v1";

/// Hidden-layer widths; input and output widths come from the problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: Vec<usize>,
}

impl Architecture {
    pub fn new(layers: usize, neurons: usize) -> Self {
        Self {
            hidden: vec![neurons; layers],
        }
    }

    pub fn layer_sizes(&self, outputs: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(1);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(outputs);
        sizes
    }
}

impl Default for Architecture {
    /// Four hidden layers of forty neurons.
    fn default() -> Self {
        Self::new(4, 40)
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// `tanh`, written through `exp` which is markedly cheaper than the libm
/// routine; relative error stays within a few ulps.
#[inline]
pub fn activation(x: f64) -> f64 {
    let a = x.abs();
    if a > 20.0 {
        return 1f64.copysign(x);
    }
    let r = if a < 0.25 {
        let e = (2.0 * a).exp_m1();
        e / (e + 2.0)
    } else {
        let e = (-2.0 * a).exp();
        (1.0 - e) / (1.0 + e)
    };
    r.copysign(x)
}

/// Number of entries of the flat parameter vector for `layer_sizes`.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(
            "a network needs at least an input and an output layer".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config("layer sizes must be positive".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layer_sizes: Vec<usize>,
    theta: Vec<f64>,
}

/// Offsets of one layer inside the flat vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

impl NetworkParams {
    pub fn new(layer_sizes: Vec<usize>, theta: Vec<f64>) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        let expected = param_count(&layer_sizes);
        if theta.len() != expected {
            return Err(Error::Config(format!(
                "parameter vector has {} entries, layer sizes need {expected}",
                theta.len()
            )));
        }
        Ok(Self { layer_sizes, theta })
    }

    pub fn zeros(layer_sizes: Vec<usize>) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        let n = param_count(&layer_sizes);
        Ok(Self {
            layer_sizes,
            theta: vec![0.0; n],
        })
    }

    /// Glorot-uniform weights on `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init_xavier(layer_sizes: Vec<usize>, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in params.slots() {
            let bound = (6.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
            for w in &mut params.theta[slot.weights..slot.bias] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(params)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn into_theta(self) -> Vec<f64> {
        self.theta
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Self {
        assert_eq!(theta.len(), self.theta.len());
        Self {
            layer_sizes: self.layer_sizes.clone(),
            theta,
        }
    }

    /// Overwrites the bias of the output layer.
    pub fn set_output_bias(&mut self, bias: &[f64]) {
        let slot = *self.slots().last().expect("at least one layer");
        assert_eq!(bias.len(), slot.fan_out);
        self.theta[slot.bias..slot.bias + slot.fan_out].copy_from_slice(bias);
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub(crate) fn slots(&self) -> Vec<LayerSlot> {
        let mut off = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let slot = LayerSlot {
                    fan_in: w[0],
                    fan_out: w[1],
                    weights: off,
                    bias: off + w[0] * w[1],
                };
                off = slot.bias + w[1];
                slot
            })
            .collect()
    }

    /// Splits the flat vector into `(weights, biases)` per layer.
    pub fn unpack(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.slots()
            .into_iter()
            .map(|s| {
                (
                    self.theta[s.weights..s.bias].to_vec(),
                    self.theta[s.bias..s.bias + s.fan_out].to_vec(),
                )
            })
            .collect()
    }

    /// Inverse of [`unpack`](Self::unpack).
    pub fn pack(layer_sizes: Vec<usize>, layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let theta = layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect();
        Self::new(layer_sizes, theta)
    }

    pub fn norm(&self) -> f64 {
        self.theta.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Network output at a single input value.
    pub fn forward(&self, t: f64) -> Result<Vec<f64>> {
        let slots = self.slots();
        let mut a = vec![t];
        for (k, s) in slots.iter().enumerate() {
            let w = &self.theta[s.weights..s.bias];
            let b = &self.theta[s.bias..s.bias + s.fan_out];
            let last = k + 1 == slots.len();
            a = (0..s.fan_out)
                .map(|r| {
                    let z = b[r]
                        + w[r * s.fan_in..(r + 1) * s.fan_in]
                            .iter()
                            .zip(&a)
                            .map(|(wi, ai)| wi * ai)
                            .sum::<f64>();
                    if last {
                        z
                    } else {
                        activation(z)
                    }
                })
                .collect();
        }
        if a.iter().all(|v| v.is_finite()) {
            Ok(a)
        } else {
            Err(Error::NonFiniteNetwork)
        }
    }

    /// Outputs at each input, row per input.
    pub fn forward_batch(&self, ts: &[f64]) -> Result<Vec<Vec<f64>>> {
        let tape = crate::autodiff::Tape::record(self, ts);
        if tape.first_nonfinite_row().is_some() {
            return Err(Error::NonFiniteNetwork);
        }
        Ok((0..ts.len()).map(|i| tape.output_row(i).to_vec()).collect())
    }

    /// Writes the text snapshot format (see `docs/formats.md`).
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "{SNAPSHOT_MAGIC}").unwrap();
        let sizes: Vec<String> = self.layer_sizes.iter().map(|v| v.to_string()).collect();
        writeln!(s, "layers {}", sizes.join(" ")).unwrap();
        for v in &self.theta {
            writeln!(s, "{v:e}").unwrap();
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<Option<String>> { Ok(lines.next().transpose()?) };
        match next()? {
            Some(l) if l.trim() == SNAPSHOT_MAGIC => {}
            other => {
                return Err(Error::Snapshot(format!(
                    "expected header `{SNAPSHOT_MAGIC}`, found {other:?}"
                )))
            }
        }
        let sizes_line = next()?.ok_or_else(|| Error::Snapshot("missing layers line".into()))?;
        let rest = sizes_line
            .strip_prefix("layers ")
            .ok_or_else(|| Error::Snapshot("missing layers line".into()))?;
        let layer_sizes = rest
            .split_whitespace()
            .map(|v| v.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Snapshot(e.to_string()))?;
        let mut theta = Vec::new();
        while let Some(l) = next()? {
            if l.trim().is_empty() {
                continue;
            }
            theta.push(
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Snapshot(format!("{e}: `{l}`")))?,
            );
        }
        Self::new(layer_sizes, theta).map_err(|e| Error::Snapshot(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn xavier_is_deterministic() {
        let a = NetworkParams::init_xavier(vec![1, 2, 2, 1], 1234).unwrap();
        let b = NetworkParams::init_xavier(vec![1, 2, 2, 1], 1234).unwrap();
        assert_eq!(a.theta(), b.theta());
        let c = NetworkParams::init_xavier(vec![1, 2, 2, 1], 1235).unwrap();
        assert_ne!(a.theta(), c.theta());
    }

    #[test]
    fn default_architecture_size() {
        let sizes = Architecture::default().layer_sizes(1);
        assert_eq!(sizes, vec![1, 40, 40, 40, 40, 1]);
        assert_eq!(param_count(&sizes), 5041);
        let p = NetworkParams::init_xavier(sizes, 7).unwrap();
        assert_eq!(p.len(), 5041);
    }

    #[test]
    fn fresh_biases_are_zero_and_weights_bounded() {
        let p = NetworkParams::init_xavier(vec![1, 40, 40, 3], 99).unwrap();
        for s in p.slots() {
            assert!(p.theta()[s.bias..s.bias + s.fan_out].iter().all(|&b| b == 0.0));
            let bound = (6.0 / (s.fan_in + s.fan_out) as f64).sqrt();
            assert!(p.theta()[s.weights..s.bias].iter().all(|w| w.abs() <= bound));
        }
    }

    #[test]
    fn invalid_sizes() {
        assert!(NetworkParams::zeros(vec![]).is_err());
        assert!(NetworkParams::zeros(vec![1]).is_err());
        assert!(NetworkParams::init_xavier(vec![1, 0, 1], 1).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = NetworkParams::zeros(vec![1, 5, 5, 2]).unwrap();
        for t in [0.0, 0.3, 1.0, -7.0] {
            assert_eq!(p.forward(t).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn batch_matches_pointwise() {
        let p = NetworkParams::init_xavier(vec![1, 8, 8, 3], 5).unwrap();
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let batch = p.forward_batch(&ts).unwrap();
        for (t, row) in ts.iter().zip(&batch) {
            let single = p.forward(*t).unwrap();
            for (a, b) in row.iter().zip(&single) {
                assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let p = NetworkParams::init_xavier(vec![1, 3, 2], 11).unwrap();
        let mut buf = Vec::new();
        p.write_snapshot(&mut buf).unwrap();
        let q = NetworkParams::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(p, q);
        assert!(NetworkParams::read_snapshot("nope\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(seed in any::<u64>(), h1 in 1usize..6, h2 in 1usize..6, out in 1usize..4) {
            let p = NetworkParams::init_xavier(vec![1, h1, h2, out], seed).unwrap();
            let q = NetworkParams::pack(p.layer_sizes().to_vec(), &p.unpack()).unwrap();
            prop_assert_eq!(p.theta(), q.theta());
        }

        #[test]
        fn output_is_continuous_in_t(seed in any::<u64>(), t in 0.0f64..1.0) {
            let p = NetworkParams::init_xavier(vec![1, 4, 4, 2], seed).unwrap();
            let a = p.forward(t).unwrap();
            let b = p.forward(t + 1e-9).unwrap();
            let bound = 1e-6 * (1.0 + p.norm());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= bound);
            }
        }
    }
}
