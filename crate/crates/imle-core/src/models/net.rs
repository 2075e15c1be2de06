//! Feed-forward implicit generator: a deterministic transform of Gaussian
//! noise with ReLU hidden layers and a sigmoid or identity output layer.

use super::family::ModelError;
use crate::numerics::{Mat64, RngStream, Vec64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Sigmoid,
    Identity,
}

impl OutputActivation {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sigmoid => "sigmoid",
            Self::Identity => "identity",
        }
    }
}

fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

/// Fully connected generator network.
///
/// The flattened parameter vector lays out, for each layer from input to
/// output, the weight matrix in row-major order followed by the bias vector.
/// The ReLU derivative at exactly zero is defined as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    layer_sizes: Vec<usize>,
    weights: Vec<Mat64>,
    biases: Vec<Vec64>,
    output_activation: OutputActivation,
}

impl GeneratorNet {
    /// He-initialized net: weights drawn N(0, 2/fan_in), biases zero.
    pub fn init(
        layer_sizes: &[usize],
        output_activation: OutputActivation,
        rng: &mut RngStream,
    ) -> Result<Self, ModelError> {
        Self::validate_sizes(layer_sizes)?;
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| std * rng.standard_normal())
                .collect();
            weights.push(Mat64::new(fan_out, fan_in, data).expect("finite init"));
            biases.push(Vec64::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            output_activation,
        })
    }

    /// Build from explicit per-layer weights and biases.
    pub fn from_parts(
        layer_sizes: &[usize],
        weights: Vec<Mat64>,
        biases: Vec<Vec64>,
        output_activation: OutputActivation,
    ) -> Result<Self, ModelError> {
        Self::validate_sizes(layer_sizes)?;
        if weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(ModelError::BadArchitecture(format!(
                "expected {} layers of parameters, got {} weight / {} bias blocks",
                layer_sizes.len() - 1,
                weights.len(),
                biases.len()
            )));
        }
        for (l, w) in layer_sizes.windows(2).enumerate() {
            if weights[l].rows() != w[1] || weights[l].cols() != w[0] || biases[l].dim() != w[1] {
                return Err(ModelError::BadArchitecture(format!(
                    "layer {l}: weight {}x{} / bias {} does not match sizes {}->{}",
                    weights[l].rows(),
                    weights[l].cols(),
                    biases[l].dim(),
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            output_activation,
        })
    }

    fn validate_sizes(layer_sizes: &[usize]) -> Result<(), ModelError> {
        if layer_sizes.len() < 2 {
            return Err(ModelError::BadArchitecture(
                "need at least input and output layer sizes".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(ModelError::BadArchitecture(
                "layer sizes must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn latent_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Flattened parameters: per layer, weights row-major then biases.
    pub fn params_flat(&self) -> Vec64 {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        Vec64::from_raw(out)
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<(), ModelError> {
        if params.len() != self.param_count() {
            return Err(ModelError::ParamCount {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut cursor = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let wl = w.rows() * w.cols();
            w.as_mut_slice().copy_from_slice(&params[cursor..cursor + wl]);
            cursor += wl;
            let bl = b.dim();
            let data: Vec<f64> = params[cursor..cursor + bl].to_vec();
            *b = Vec64::from_raw(data);
            cursor += bl;
        }
        Ok(())
    }

    /// In-place `theta <- theta + step .* direction` over the flat layout.
    pub fn axpy_params(&mut self, step: f64, direction: &[f64]) -> Result<(), ModelError> {
        if direction.len() != self.param_count() {
            return Err(ModelError::ParamCount {
                expected: self.param_count(),
                got: direction.len(),
            });
        }
        let mut cursor = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            for v in w.as_mut_slice() {
                *v += step * direction[cursor];
                cursor += 1;
            }
            let mut data = std::mem::replace(b, Vec64::zeros(1)).into_vec();
            for v in &mut data {
                *v += step * direction[cursor];
                cursor += 1;
            }
            *b = Vec64::from_raw(data);
        }
        Ok(())
    }

    pub fn param_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (w, b) in self.weights.iter().zip(&self.biases) {
            acc += w.as_slice().iter().map(|v| v * v).sum::<f64>();
            acc += b.norm_sq();
        }
        acc.sqrt()
    }

    /// Deterministic forward pass.
    pub fn forward(&self, z: &Vec64) -> Result<Vec64, ModelError> {
        let trace = self.forward_trace(z)?;
        Ok(trace.output().clone())
    }

    /// Smallest |pre-activation| over the hidden layers for this input
    /// (infinite when there are none). Gradient tests reject inputs where
    /// this is tiny: finite differences straddle the ReLU kink there.
    pub fn hidden_preactivation_margin(&self, z: &Vec64) -> Result<f64, ModelError> {
        let trace = self.forward_trace(z)?;
        Ok(trace.pre[..trace.pre.len() - 1]
            .iter()
            .flat_map(|a| a.iter())
            .fold(f64::INFINITY, |m, &v| m.min(v.abs())))
    }

    pub(crate) fn forward_trace(&self, z: &Vec64) -> Result<ForwardTrace, ModelError> {
        if z.dim() != self.latent_dim() {
            return Err(ModelError::DimMismatch {
                family: self.latent_dim(),
                point: z.dim(),
            });
        }
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut post = Vec::with_capacity(self.weights.len());
        let mut input = z.as_slice().to_vec();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut a = vec![0.0; w.rows()];
            w.matvec_into(&input, &mut a);
            for (av, bv) in a.iter_mut().zip(b.iter()) {
                *av += bv;
            }
            let last = l == self.weights.len() - 1;
            let h: Vec<f64> = if last {
                match self.output_activation {
                    OutputActivation::Sigmoid => a.iter().map(|&x| sigmoid(x)).collect(),
                    OutputActivation::Identity => a.clone(),
                }
            } else {
                a.iter().map(|&x| x.max(0.0)).collect()
            };
            input = h.clone();
            pre.push(Vec64::from_raw(a));
            post.push(Vec64::from_raw(h));
        }
        Ok(ForwardTrace { pre, post })
    }

    /// Gradient of `upstream . T(z)` with respect to the flattened parameters.
    pub fn backward(&self, z: &Vec64, upstream: &Vec64) -> Result<Vec64, ModelError> {
        let trace = self.forward_trace(z)?;
        let mut grad = vec![0.0; self.param_count()];
        self.backward_into(z, upstream, &trace, &mut grad)?;
        Ok(Vec64::from_raw(grad))
    }

    /// Accumulate the gradient of `upstream . T(z)` into `grad` (flat layout).
    pub(crate) fn backward_into(
        &self,
        z: &Vec64,
        upstream: &Vec64,
        trace: &ForwardTrace,
        grad: &mut [f64],
    ) -> Result<(), ModelError> {
        if upstream.dim() != self.output_dim() {
            return Err(ModelError::DimMismatch {
                family: self.output_dim(),
                point: upstream.dim(),
            });
        }
        debug_assert_eq!(grad.len(), self.param_count());
        let layers = self.weights.len();

        // delta at the output layer
        let mut delta: Vec<f64> = match self.output_activation {
            OutputActivation::Identity => upstream.as_slice().to_vec(),
            OutputActivation::Sigmoid => {
                let y = trace.post[layers - 1].as_slice();
                upstream
                    .iter()
                    .zip(y)
                    .map(|(u, &yv)| u * yv * (1.0 - yv))
                    .collect()
            }
        };

        // parameter block offsets, per layer
        let mut offsets = Vec::with_capacity(layers);
        let mut cursor = 0;
        for w in self.layer_sizes.windows(2) {
            offsets.push(cursor);
            cursor += w[0] * w[1] + w[1];
        }

        for l in (0..layers).rev() {
            let input: &[f64] = if l == 0 {
                z.as_slice()
            } else {
                trace.post[l - 1].as_slice()
            };
            let (rows, cols) = (self.weights[l].rows(), self.weights[l].cols());
            let base = offsets[l];
            // weight block: delta (x) input
            for (r, d) in delta.iter().enumerate() {
                let row = &mut grad[base + r * cols..base + (r + 1) * cols];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            // bias block
            let bias_base = base + rows * cols;
            for (g, d) in grad[bias_base..bias_base + rows].iter_mut().zip(&delta) {
                *g += d;
            }
            if l > 0 {
                let mut back = vec![0.0; cols];
                self.weights[l].matvec_transpose_into(&delta, &mut back);
                // ReLU mask from pre-activations; derivative at 0 is 0
                for (b, a) in back.iter_mut().zip(trace.pre[l - 1].iter()) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
        Ok(())
    }
}

/// Cached activations from one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardTrace {
    pre: Vec<Vec64>,
    post: Vec<Vec64>,
}

impl ForwardTrace {
    pub(crate) fn output(&self) -> &Vec64 {
        self.post.last().expect("net has at least one layer")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, gaussian_sample};

    fn v(values: &[f64]) -> Vec64 {
        Vec64::from_slice(values).unwrap()
    }

    fn identity_2x2() -> GeneratorNet {
        GeneratorNet::from_parts(
            &[2, 2],
            vec![Mat64::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap()],
            vec![Vec64::zeros(2)],
            OutputActivation::Identity,
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_through() {
        let net = identity_2x2();
        let out = net.forward(&v(&[1.0, 2.0])).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_weight_sigmoid_net_emits_half() {
        let net = GeneratorNet::from_parts(
            &[3, 4, 2],
            vec![Mat64::zeros(4, 3), Mat64::zeros(2, 4)],
            vec![Vec64::zeros(4), Vec64::zeros(2)],
            OutputActivation::Sigmoid,
        )
        .unwrap();
        let out = net.forward(&v(&[0.3, -0.7, 2.0])).unwrap();
        assert!(out.iter().all(|&o| o == 0.5));
    }

    #[test]
    fn relu_clamps_negative_hidden_input() {
        let net = GeneratorNet::from_parts(
            &[1, 1, 1],
            vec![
                Mat64::new(1, 1, vec![1.0]).unwrap(),
                Mat64::new(1, 1, vec![1.0]).unwrap(),
            ],
            vec![Vec64::zeros(1), Vec64::zeros(1)],
            OutputActivation::Identity,
        )
        .unwrap();
        let out = net.forward(&v(&[-3.0])).unwrap();
        assert_eq!(out.as_slice(), &[0.0]);
    }

    #[test]
    fn forward_dim_mismatch_errors() {
        let net = identity_2x2();
        assert!(matches!(
            net.forward(&v(&[1.0])),
            Err(ModelError::DimMismatch { .. })
        ));
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let mut rng = RngStream::new(3, 0);
        let net = GeneratorNet::init(&[4, 8, 3], OutputActivation::Sigmoid, &mut rng).unwrap();
        let z = gaussian_sample(&mut rng, 4);
        let a = net.forward(&z).unwrap();
        let b = net.forward(&z).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = RngStream::new(4, 0);
        let net = GeneratorNet::init(&[3, 5, 2], OutputActivation::Identity, &mut rng).unwrap();
        let z = gaussian_sample(&mut rng, 3);
        let g = net.backward(&z, &Vec64::zeros(2)).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn affine_layer_gradient_is_outer_product() {
        // y = W z + b; grad W = u z^T, grad b = u
        let net = GeneratorNet::from_parts(
            &[2, 3],
            vec![Mat64::new(3, 2, vec![0.5, -1.0, 2.0, 0.0, 1.0, 1.0]).unwrap()],
            vec![Vec64::from_slice(&[0.1, 0.2, 0.3]).unwrap()],
            OutputActivation::Identity,
        )
        .unwrap();
        let z = v(&[2.0, -1.0]);
        let u = v(&[1.0, -2.0, 3.0]);
        let g = net.backward(&z, &u).unwrap();
        // weights row-major: rows are outputs
        let expect_w = [2.0, -1.0, -4.0, 2.0, 6.0, -3.0];
        assert_eq!(&g.as_slice()[..6], &expect_w);
        assert_eq!(&g.as_slice()[6..], u.as_slice());
    }

    #[test]
    fn param_count_matches_layout() {
        let mut rng = RngStream::new(5, 0);
        let net = GeneratorNet::init(&[4, 7, 3], OutputActivation::Identity, &mut rng).unwrap();
        assert_eq!(net.param_count(), 4 * 7 + 7 + 7 * 3 + 3);
        assert_eq!(net.params_flat().dim(), net.param_count());
    }

    #[test]
    fn params_roundtrip() {
        let mut rng = RngStream::new(6, 0);
        let net = GeneratorNet::init(&[3, 6, 2], OutputActivation::Sigmoid, &mut rng).unwrap();
        let theta = net.params_flat();
        let mut copy = net.clone();
        copy.set_params_flat(theta.as_slice()).unwrap();
        assert_eq!(copy, net);
    }

    #[test]
    fn backward_matches_finite_differences_on_random_nets() {
        let mut rng = RngStream::new(7, 0);
        let mut checked = 0;
        while checked < 10 {
            let net =
                GeneratorNet::init(&[2, 8, 3], OutputActivation::Identity, &mut rng).unwrap();
            let z = gaussian_sample(&mut rng, 2);
            if net.hidden_preactivation_margin(&z).unwrap() < 1e-4 {
                continue; // too close to a ReLU kink for finite differences
            }
            let u = gaussian_sample(&mut rng, 3);
            let analytic = net.backward(&z, &u).unwrap();
            let theta = net.params_flat();
            let numeric = finite_diff_grad(
                |t| {
                    let mut probe = net.clone();
                    probe.set_params_flat(t.as_slice()).unwrap();
                    probe
                        .forward(&z)
                        .unwrap()
                        .iter()
                        .zip(u.iter())
                        .map(|(y, uv)| y * uv)
                        .sum()
                },
                &theta,
                1e-5,
            )
            .unwrap();
            let num_norm = numeric.norm_sq().sqrt();
            let diff: f64 = analytic
                .iter()
                .zip(numeric.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                diff / num_norm.max(1e-12) <= 1e-5,
                "rel err {} on check {checked}",
                diff / num_norm
            );
            checked += 1;
        }
    }
}
