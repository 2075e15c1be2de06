//! The full training procedure: draw samples from the current model, match
//! each batched data example to its exact nearest sample, then run an inner
//! SGD loop on the matched squared distances.
//!
//! The one reading that matters: the inner loop differentiates
//! `||x_i - T_theta(z_sigma(i))||^2` with respect to the current parameters,
//! so the matched sample is recomputed from its stored latent at every step
//! while the matching itself stays frozen for all `L` steps.

use std::time::Instant;

use thiserror::Error;

use crate::datasets::Dataset;
use crate::models::{GeneratorNet, ModelError};
use crate::nnsearch::{IndexStructure, NearestIndex, NnError};
use crate::numerics::{gaussian_sample, sq_euclidean_slices, RngStream, Vec64};
use crate::theory::McEstimate;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("empty batch passed to matching")]
    EmptyBatch,
    #[error(
        "non-finite loss {loss} at outer iteration {outer}, inner step {inner}: \
         learning rate too high?"
    )]
    NonFiniteLoss {
        outer: usize,
        inner: usize,
        loss: f64,
    },
    #[error("matching audit failed at outer {outer}: pair for data index {data_index} is not optimal")]
    MatchingAudit { outer: usize, data_index: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Training abort carrying the trace accumulated before the failure, so the
/// caller can still flush it.
#[derive(Debug)]
pub struct TrainAbort {
    pub error: TrainError,
    pub trace: TrainTrace,
}

impl std::fmt::Display for TrainAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "training aborted after {} completed outer iterations: {}",
            self.trace.records.len(),
            self.error
        )
    }
}

impl std::error::Error for TrainAbort {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        }
    }
}

/// Configuration of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ImleConfig {
    /// Samples drawn from the model each outer iteration (`m`).
    pub samples_per_iter: usize,
    /// Outer iterations (`K`).
    pub outer_iters: usize,
    /// Inner SGD steps per outer iteration (`L`).
    pub inner_iters: usize,
    /// Learning rate. Note the loss carries the full `n/|batch|` scale from
    /// the update rule, so stable rates shrink like `1/n`.
    pub learning_rate: f64,
    /// Data examples matched per outer iteration (`|S|`).
    pub batch_size: usize,
    /// Examples per inner gradient step (`|S~|`).
    pub minibatch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub index_structure: IndexStructure,
    /// Ablation only: freeze the matched sample vectors inside the residual
    /// for the whole inner loop (gradients still flow through the current
    /// net), instead of recomputing them from the stored latents.
    pub stale_matching: bool,
}

impl ImleConfig {
    /// Desk-scale defaults for a dataset of `n` points.
    pub fn desk_defaults(n: usize, seed: u64) -> Self {
        let batch_size = n.min(256);
        Self {
            samples_per_iter: 4 * batch_size,
            outer_iters: 300,
            inner_iters: 50,
            // The n/|minibatch| loss scale pushes the SGD stability threshold
            // below ~0.05/n; 0.025/n converges on the ring benchmark with a
            // 2x margin.
            learning_rate: 0.025 / n as f64,
            batch_size,
            minibatch_size: batch_size.min(64),
            optimizer: Optimizer::Sgd,
            seed,
            index_structure: IndexStructure::VpTree,
            stale_matching: false,
        }
    }

    /// Hard validation plus advisory warnings.
    pub fn validate(&self, n: usize) -> Result<Vec<String>, TrainError> {
        if self.samples_per_iter < 1 {
            return Err(TrainError::Config("samples_per_iter must be >= 1".into()));
        }
        if self.batch_size < 1 || self.batch_size > n {
            return Err(TrainError::Config(format!(
                "batch_size {} must be in [1, n = {n}]",
                self.batch_size
            )));
        }
        if self.minibatch_size < 1 || self.minibatch_size > self.batch_size {
            return Err(TrainError::Config(format!(
                "minibatch_size {} must be in [1, batch_size = {}]",
                self.minibatch_size, self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        let mut warnings = Vec::new();
        if self.samples_per_iter < self.batch_size {
            warnings.push(format!(
                "samples_per_iter = {} is below batch_size = {}; the estimator is defined \
                 with at least as many samples as matched examples",
                self.samples_per_iter, self.batch_size
            ));
        }
        Ok(warnings)
    }
}

/// One matched (data example, sample) pair, frozen for an inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub data_index: usize,
    pub latent: Vec64,
    pub sample_index: usize,
    /// Sample vector and squared distance as of match time.
    pub matched_sample: Vec64,
    pub sq_dist: f64,
}

/// The frozen matching for one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub pairs: Vec<MatchedPair>,
    pub built_at_outer: usize,
}

impl Matching {
    pub fn mean_sq_dist(&self) -> f64 {
        self.pairs.iter().map(|p| p.sq_dist).sum::<f64>() / self.pairs.len() as f64
    }

    /// Brute-force re-check that every stored pair is still the exact
    /// nearest sample (lowest index on ties) in the frozen sample set.
    pub fn verify_optimal(&self, data: &Dataset, samples: &[Vec64]) -> Result<(), TrainError> {
        for pair in &self.pairs {
            let x = data.point(pair.data_index);
            let mut best = (f64::INFINITY, usize::MAX);
            for (j, s) in samples.iter().enumerate() {
                let d = sq_euclidean_slices(x.as_slice(), s.as_slice());
                if d < best.0 {
                    best = (d, j);
                }
            }
            if best.1 != pair.sample_index || best.0 != pair.sq_dist {
                return Err(TrainError::MatchingAudit {
                    outer: self.built_at_outer,
                    data_index: pair.data_index,
                });
            }
        }
        Ok(())
    }
}

/// Per-outer-iteration record. Wall time is measured, everything else is a
/// pure function of (config, seed, data).
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub outer_iter: usize,
    pub mean_sqdist_pre: f64,
    pub mean_sqdist_post: f64,
    pub wall_ms: f64,
    pub param_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<OuterRecord>,
    /// Labels returned by the observer (checkpoint paths, typically).
    pub checkpoints: Vec<(usize, String)>,
}

impl TrainTrace {
    /// Equality ignoring the measured wall times.
    pub fn same_modulo_wall_time(&self, other: &TrainTrace) -> bool {
        self.records.len() == other.records.len()
            && self.checkpoints == other.checkpoints
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.outer_iter == b.outer_iter
                    && a.mean_sqdist_pre.to_bits() == b.mean_sqdist_pre.to_bits()
                    && a.mean_sqdist_post.to_bits() == b.mean_sqdist_post.to_bits()
                    && a.param_norm.to_bits() == b.param_norm.to_bits()
            })
    }
}

/// Draw `m` latent vectors and their images under the current net; the two
/// lists stay index-aligned.
pub fn draw_model_samples(
    net: &GeneratorNet,
    rng: &mut RngStream,
    m: usize,
) -> (Vec<Vec64>, Vec<Vec64>) {
    assert!(m >= 1, "m must be >= 1");
    let mut latents = Vec::with_capacity(m);
    let mut samples = Vec::with_capacity(m);
    for _ in 0..m {
        let z = gaussian_sample(rng, net.latent_dim());
        let x = net.forward(&z).expect("latent dim matches net");
        latents.push(z);
        samples.push(x);
    }
    (latents, samples)
}

/// Match every batched data example to its exact nearest sample, storing the
/// sample's latent for the inner loop.
pub fn match_batch(
    data: &Dataset,
    batch: &[usize],
    samples: &[Vec64],
    latents: &[Vec64],
    structure: IndexStructure,
    built_at_outer: usize,
) -> Result<Matching, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    debug_assert_eq!(samples.len(), latents.len());
    let index = NearestIndex::build(samples.to_vec(), structure)?;
    let queries: Vec<Vec64> = batch.iter().map(|&i| data.point(i).clone()).collect();
    let results = index.query_batch(&queries)?;
    let pairs = batch
        .iter()
        .zip(results)
        .map(|(&data_index, r)| MatchedPair {
            data_index,
            latent: latents[r.index].clone(),
            sample_index: r.index,
            matched_sample: samples[r.index].clone(),
            sq_dist: r.sq_dist,
        })
        .collect();
    Ok(Matching {
        pairs,
        built_at_outer,
    })
}

/// Optimizer state kept across the whole run (Adam moments persist over
/// outer iterations).
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    pub fn new(kind: Optimizer, param_count: usize) -> Self {
        let len = match kind {
            Optimizer::Sgd => 0,
            Optimizer::Adam => param_count,
        };
        Self {
            kind,
            step: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
        }
    }

    fn apply(&mut self, net: &mut GeneratorNet, grad: &[f64], eta: f64) -> Result<(), ModelError> {
        match self.kind {
            Optimizer::Sgd => net.axpy_params(-eta, grad),
            Optimizer::Adam => {
                self.step += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
                let mut update = vec![0.0; grad.len()];
                for (((u, g), m), v) in update
                    .iter_mut()
                    .zip(grad)
                    .zip(&mut self.first_moment)
                    .zip(&mut self.second_moment)
                {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *u = (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
                }
                net.axpy_params(-eta, &update)
            }
        }
    }
}

/// Run `L` inner steps on a frozen matching. Each step draws a fresh
/// minibatch from the matched pairs without replacement, recomputes the
/// matched samples at the current parameters, and applies one optimizer
/// update on the `n/|minibatch|`-scaled summed squared distance.
///
/// Returns the per-step losses. A non-finite loss aborts with a diagnostic
/// instead of clamping.
pub fn inner_sgd(
    net: &mut GeneratorNet,
    data: &Dataset,
    matching: &Matching,
    cfg: &ImleConfig,
    opt_state: &mut OptimizerState,
    rng: &mut RngStream,
) -> Result<Vec<f64>, TrainError> {
    let pairs = &matching.pairs;
    let take = cfg.minibatch_size.min(pairs.len());
    let scale = data.len() as f64 / take as f64;
    let mut grad = vec![0.0; net.param_count()];
    let mut losses = Vec::with_capacity(cfg.inner_iters);
    for inner in 1..=cfg.inner_iters {
        let picks = rng.sample_without_replacement(pairs.len(), take);
        grad.fill(0.0);
        let mut loss_acc = 0.0;
        for &pick in &picks {
            let pair = &pairs[pick];
            let x = data.point(pair.data_index);
            let trace = net.forward_trace(&pair.latent)?;
            let current = trace.output();
            let target: &Vec64 = if cfg.stale_matching {
                &pair.matched_sample
            } else {
                current
            };
            loss_acc += sq_euclidean_slices(x.as_slice(), target.as_slice());
            let upstream = Vec64::from_raw(
                target
                    .iter()
                    .zip(x.iter())
                    .map(|(t, xv)| 2.0 * (t - xv))
                    .collect(),
            );
            net.backward_into(&pair.latent, &upstream, &trace, &mut grad)?;
        }
        let loss = scale * loss_acc;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                outer: matching.built_at_outer,
                inner,
                loss,
            });
        }
        for g in &mut grad {
            *g *= scale;
        }
        opt_state.apply(net, &grad, cfg.learning_rate)?;
        losses.push(loss);
    }
    Ok(losses)
}

/// Mean squared distance of the matched pairs at the current parameters.
fn matched_sq_dist_now(net: &GeneratorNet, data: &Dataset, matching: &Matching) -> f64 {
    let total: f64 = matching
        .pairs
        .iter()
        .map(|pair| {
            let x = data.point(pair.data_index);
            let out = net.forward(&pair.latent).expect("latent dim matches net");
            sq_euclidean_slices(x.as_slice(), out.as_slice())
        })
        .sum();
    total / matching.pairs.len() as f64
}

// Every AUDIT_EVERY-th outer iteration re-verifies the matching against a
// brute-force scan (about 1% of iterations at the default K).
const AUDIT_EVERY: usize = 100;

/// Full training run; the net is updated in place.
pub fn imle_train(
    net: &mut GeneratorNet,
    data: &Dataset,
    cfg: &ImleConfig,
    rng: &mut RngStream,
) -> Result<TrainTrace, TrainAbort> {
    imle_train_with(net, data, cfg, rng, |_, _| None)
}

/// [`imle_train`] with an observer called after every outer iteration; a
/// returned label (a checkpoint path, say) is recorded in the trace.
pub fn imle_train_with<F>(
    net: &mut GeneratorNet,
    data: &Dataset,
    cfg: &ImleConfig,
    rng: &mut RngStream,
    mut observer: F,
) -> Result<TrainTrace, TrainAbort>
where
    F: FnMut(&OuterRecord, &GeneratorNet) -> Option<String>,
{
    let mut trace = TrainTrace::default();
    let abort = |error, trace| Err(TrainAbort { error, trace });
    if let Err(e) = cfg.validate(data.len()) {
        return abort(e, trace);
    }
    let mut opt_state = OptimizerState::new(cfg.optimizer, net.param_count());
    for outer in 1..=cfg.outer_iters {
        let started = Instant::now();
        let (latents, samples) = draw_model_samples(net, rng, cfg.samples_per_iter);
        let batch = rng.sample_without_replacement(data.len(), cfg.batch_size);
        let matching = match match_batch(
            data,
            &batch,
            &samples,
            &latents,
            cfg.index_structure,
            outer,
        ) {
            Ok(m) => m,
            Err(e) => return abort(e, trace),
        };
        if (outer == 1 || outer.is_multiple_of(AUDIT_EVERY))
            && let Err(e) = matching.verify_optimal(data, &samples)
        {
            return abort(e, trace);
        }
        let pre = matching.mean_sq_dist();
        if let Err(e) = inner_sgd(net, data, &matching, cfg, &mut opt_state, rng) {
            return abort(e, trace);
        }
        let post = matched_sq_dist_now(net, data, &matching);
        let record = OuterRecord {
            outer_iter: outer,
            mean_sqdist_pre: pre,
            mean_sqdist_post: post,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            param_norm: net.param_norm(),
        };
        if let Some(label) = observer(&record, net) {
            trace.checkpoints.push((outer, label));
        }
        trace.records.push(record);
    }
    Ok(trace)
}

/// Anything the objective estimator can draw from: an analytic family or a
/// generator net fed Gaussian noise.
pub trait ModelSampler {
    fn sample_dim(&self) -> usize;
    fn draw(&self, rng: &mut RngStream) -> Vec64;
}

impl ModelSampler for crate::models::AnalyticFamily {
    fn sample_dim(&self) -> usize {
        self.dim()
    }
    fn draw(&self, rng: &mut RngStream) -> Vec64 {
        self.sample_one(rng)
    }
}

impl ModelSampler for GeneratorNet {
    fn sample_dim(&self) -> usize {
        self.output_dim()
    }
    fn draw(&self, rng: &mut RngStream) -> Vec64 {
        let z = gaussian_sample(rng, self.latent_dim());
        self.forward(&z).expect("latent dim matches net")
    }
}

/// Per-trial values of the summed nearest-sample objective; trial `t` draws
/// from its own child stream, so with a cloned parent the first draws of
/// each trial coincide across different `m` (min over a superset, per trial).
pub(crate) fn objective_mc_trials<M: ModelSampler>(
    model: &M,
    data: &Dataset,
    m: usize,
    trials: usize,
    rng: &mut RngStream,
) -> Vec<f64> {
    assert!(m >= 1 && trials >= 1);
    let trial_seed = rng.next_u64();
    (0..trials)
        .map(|t| {
            let mut tr = RngStream::new(trial_seed, t as u64);
            let mut best = vec![f64::INFINITY; data.len()];
            for _ in 0..m {
                let sample = model.draw(&mut tr);
                for (b, x) in best.iter_mut().zip(data.points()) {
                    let d = sq_euclidean_slices(sample.as_slice(), x.as_slice());
                    if d < *b {
                        *b = d;
                    }
                }
            }
            best.iter().sum()
        })
        .collect()
}

/// Monte Carlo estimate of the summed expected nearest-sample distance
/// (the quantity the estimator minimizes) with its standard error.
pub fn imle_objective_mc<M: ModelSampler>(
    model: &M,
    data: &Dataset,
    m: usize,
    trials: usize,
    rng: &mut RngStream,
) -> McEstimate {
    let values = objective_mc_trials(model, data, m, trials, rng);
    McEstimate::from_values(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AnalyticFamily, OutputActivation};
    use crate::numerics::{finite_diff_grad, Mat64};

    fn v(values: &[f64]) -> Vec64 {
        Vec64::from_slice(values).unwrap()
    }

    fn dataset_1d(values: &[f64]) -> Dataset {
        Dataset::new(values.iter().map(|&x| v(&[x])).collect(), "test").unwrap()
    }

    fn zero_sigmoid_net(latent: usize, out: usize) -> GeneratorNet {
        GeneratorNet::from_parts(
            &[latent, out],
            vec![Mat64::zeros(out, latent)],
            vec![Vec64::zeros(out)],
            OutputActivation::Sigmoid,
        )
        .unwrap()
    }

    #[test]
    fn draw_model_samples_is_deterministic() {
        let mut rng = RngStream::new(1, 0);
        let net = GeneratorNet::init(&[2, 4, 2], OutputActivation::Identity, &mut rng).unwrap();
        let mut a = RngStream::new(5, 5);
        let mut b = RngStream::new(5, 5);
        let (la, sa) = draw_model_samples(&net, &mut a, 3);
        let (lb, sb) = draw_model_samples(&net, &mut b, 3);
        assert_eq!(la, lb);
        assert_eq!(sa, sb);
    }

    #[test]
    fn zero_weight_sigmoid_samples_are_all_half() {
        let net = zero_sigmoid_net(3, 2);
        let mut rng = RngStream::new(2, 0);
        let (_, samples) = draw_model_samples(&net, &mut rng, 5);
        for s in samples {
            assert!(s.iter().all(|&x| x == 0.5));
        }
    }

    #[test]
    fn identity_net_sample_covariance_is_near_identity() {
        // single linear layer, W = I, b = 0: samples are the latents
        let dim = 3;
        let eye = {
            let mut m = Mat64::zeros(dim, dim);
            for i in 0..dim {
                m.set(i, i, 1.0);
            }
            m
        };
        let net = GeneratorNet::from_parts(
            &[dim, dim],
            vec![eye],
            vec![Vec64::zeros(dim)],
            OutputActivation::Identity,
        )
        .unwrap();
        let mut rng = RngStream::new(3, 0);
        let m = 100_000;
        let (_, samples) = draw_model_samples(&net, &mut rng, m);
        let mut cov = vec![0.0; dim * dim];
        for s in &samples {
            for i in 0..dim {
                for j in 0..dim {
                    cov[i * dim + j] += s[i] * s[j];
                }
            }
        }
        for (k, c) in cov.iter().enumerate() {
            let expect = if k % (dim + 1) == 0 { 1.0 } else { 0.0 };
            assert!((c / m as f64 - expect).abs() < 0.05, "cov[{k}]");
        }
    }

    #[test]
    fn matching_self_match_has_zero_distance() {
        let data = dataset_1d(&[0.5, -1.0, 2.0]);
        let samples: Vec<Vec64> = data.points().to_vec();
        let latents: Vec<Vec64> = samples.clone();
        let matching = match_batch(
            &data,
            &[0, 1, 2],
            &samples,
            &latents,
            IndexStructure::Brute,
            1,
        )
        .unwrap();
        for pair in &matching.pairs {
            assert_eq!(pair.sq_dist, 0.0);
            assert_eq!(pair.sample_index, pair.data_index);
        }
    }

    #[test]
    fn single_sample_matches_everything() {
        let data = dataset_1d(&[0.0, 1.0, 5.0]);
        let samples = vec![v(&[2.0])];
        let latents = vec![v(&[0.1])];
        let matching =
            match_batch(&data, &[0, 1, 2], &samples, &latents, IndexStructure::VpTree, 1).unwrap();
        assert!(matching.pairs.iter().all(|p| p.sample_index == 0));
    }

    #[test]
    fn empty_batch_errors() {
        let data = dataset_1d(&[0.0]);
        let r = match_batch(&data, &[], &[v(&[0.0])], &[v(&[0.0])], IndexStructure::Brute, 1);
        assert!(matches!(r, Err(TrainError::EmptyBatch)));
    }

    #[test]
    fn matching_agrees_with_brute_force_scan() {
        let mut rng = RngStream::new(4, 0);
        let dim = 8;
        let points: Vec<Vec64> = (0..64).map(|_| gaussian_sample(&mut rng, dim)).collect();
        let data = Dataset::new(points, "t").unwrap();
        let net = GeneratorNet::init(&[4, 16, dim], OutputActivation::Identity, &mut rng).unwrap();
        let (latents, samples) = draw_model_samples(&net, &mut rng, 256);
        let batch: Vec<usize> = (0..64).collect();
        let matching =
            match_batch(&data, &batch, &samples, &latents, IndexStructure::VpTree, 1).unwrap();
        matching.verify_optimal(&data, &samples).unwrap();
    }

    #[test]
    fn inner_sgd_zero_steps_is_a_no_op() {
        let mut rng = RngStream::new(5, 0);
        let mut net = GeneratorNet::init(&[2, 4, 1], OutputActivation::Identity, &mut rng).unwrap();
        let before = net.params_flat();
        let data = dataset_1d(&[1.0]);
        let matching = Matching {
            pairs: vec![MatchedPair {
                data_index: 0,
                latent: v(&[0.0, 0.0]),
                sample_index: 0,
                matched_sample: v(&[0.0]),
                sq_dist: 1.0,
            }],
            built_at_outer: 1,
        };
        let cfg = ImleConfig {
            inner_iters: 0,
            ..ImleConfig::desk_defaults(1, 0)
        };
        let cfg = ImleConfig {
            batch_size: 1,
            minibatch_size: 1,
            ..cfg
        };
        let mut opt = OptimizerState::new(Optimizer::Sgd, net.param_count());
        let losses = inner_sgd(&mut net, &data, &matching, &cfg, &mut opt, &mut rng).unwrap();
        assert!(losses.is_empty());
        assert_eq!(net.params_flat(), before);
    }

    /// Single affine 1-d pair with z = 0: only the bias moves, following
    /// b <- b + 2 eta (n/1) (1 - b).
    #[test]
    fn inner_sgd_hand_iteration_on_linear_net() {
        let mut net = GeneratorNet::from_parts(
            &[1, 1],
            vec![Mat64::new(1, 1, vec![0.7]).unwrap()],
            vec![Vec64::zeros(1)],
            OutputActivation::Identity,
        )
        .unwrap();
        let data = dataset_1d(&[1.0]);
        let matching = Matching {
            pairs: vec![MatchedPair {
                data_index: 0,
                latent: v(&[0.0]),
                sample_index: 0,
                matched_sample: v(&[0.0]),
                sq_dist: 1.0,
            }],
            built_at_outer: 1,
        };
        let cfg = ImleConfig {
            samples_per_iter: 1,
            outer_iters: 1,
            inner_iters: 1,
            learning_rate: 0.1,
            batch_size: 1,
            minibatch_size: 1,
            optimizer: Optimizer::Sgd,
            seed: 0,
            index_structure: IndexStructure::Brute,
            stale_matching: false,
        };
        let mut opt = OptimizerState::new(Optimizer::Sgd, net.param_count());
        let mut rng = RngStream::new(0, 0);
        let losses = inner_sgd(&mut net, &data, &matching, &cfg, &mut opt, &mut rng).unwrap();
        let params = net.params_flat();
        assert_eq!(params[0], 0.7); // weight untouched, z = 0
        assert!((params[1] - 0.2).abs() < 1e-15, "bias {}", params[1]);
        assert_eq!(losses, vec![1.0]); // (1 - 0)^2 * n/|S~| = 1

        // follow the recursion a few more steps
        let mut b = 0.2;
        for _ in 0..5 {
            let l = inner_sgd(&mut net, &data, &matching, &cfg, &mut opt, &mut rng).unwrap();
            let expect_loss = (1.0 - b) * (1.0 - b);
            assert!((l[0] - expect_loss).abs() < 1e-12);
            b += 2.0 * 0.1 * (1.0 - b);
            assert!((net.params_flat()[1] - b).abs() < 1e-12);
        }
    }

    /// Loss on the fixed pairs is non-increasing when eta is below the
    /// stability threshold (1/n for the single-pair affine case).
    #[test]
    fn inner_loss_non_increasing_below_threshold() {
        let mut rng = RngStream::new(6, 0);
        let mut net = GeneratorNet::from_parts(
            &[1, 1],
            vec![Mat64::new(1, 1, vec![0.3]).unwrap()],
            vec![Vec64::zeros(1)],
            OutputActivation::Identity,
        )
        .unwrap();
        let data = dataset_1d(&[2.0]);
        let matching = Matching {
            pairs: vec![MatchedPair {
                data_index: 0,
                latent: v(&[0.0]),
                sample_index: 0,
                matched_sample: v(&[0.0]),
                sq_dist: 4.0,
            }],
            built_at_outer: 1,
        };
        let cfg = ImleConfig {
            samples_per_iter: 1,
            outer_iters: 1,
            inner_iters: 40,
            learning_rate: 0.4, // threshold is 1/n = 1
            batch_size: 1,
            minibatch_size: 1,
            optimizer: Optimizer::Sgd,
            seed: 0,
            index_structure: IndexStructure::Brute,
            stale_matching: false,
        };
        let mut opt = OptimizerState::new(Optimizer::Sgd, net.param_count());
        let losses = inner_sgd(&mut net, &data, &matching, &cfg, &mut opt, &mut rng).unwrap();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn runaway_learning_rate_aborts_with_diagnostic() {
        let mut rng = RngStream::new(7, 0);
        let mut net = GeneratorNet::init(&[2, 8, 1], OutputActivation::Identity, &mut rng).unwrap();
        let data = dataset_1d(&[1.0, -1.0, 3.0]);
        let cfg = ImleConfig {
            samples_per_iter: 8,
            outer_iters: 50,
            inner_iters: 50,
            learning_rate: 1e6,
            batch_size: 3,
            minibatch_size: 2,
            optimizer: Optimizer::Sgd,
            seed: 1,
            index_structure: IndexStructure::Brute,
            stale_matching: false,
        };
        let mut stream = RngStream::new(cfg.seed, 0);
        match imle_train(&mut net, &data, &cfg, &mut stream) {
            Err(TrainAbort {
                error: TrainError::NonFiniteLoss { .. },
                ..
            }) => {}
            other => panic!("expected divergence abort, got {other:?}"),
        }
    }

    #[test]
    fn minibatch_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(8, 0);
        for check in 0..20 {
            let net =
                GeneratorNet::init(&[3, 10, 2], OutputActivation::Identity, &mut rng).unwrap();
            let points: Vec<Vec64> = (0..4).map(|_| gaussian_sample(&mut rng, 2)).collect();
            let data = Dataset::new(points, "t").unwrap();
            let latents: Vec<Vec64> = (0..4).map(|_| gaussian_sample(&mut rng, 3)).collect();
            // kink guard for the finite-difference comparison
            if latents
                .iter()
                .any(|z| net.hidden_preactivation_margin(z).unwrap() < 1e-4)
            {
                continue;
            }
            let scale = data.len() as f64 / latents.len() as f64;
            let loss_at = |theta: &Vec64| {
                let mut probe = net.clone();
                probe.set_params_flat(theta.as_slice()).unwrap();
                let mut acc = 0.0;
                for (i, z) in latents.iter().enumerate() {
                    let out = probe.forward(z).unwrap();
                    acc += sq_euclidean_slices(out.as_slice(), data.point(i).as_slice());
                }
                scale * acc
            };
            // analytic gradient, assembled the same way inner_sgd does
            let mut grad = vec![0.0; net.param_count()];
            for (i, z) in latents.iter().enumerate() {
                let trace = net.forward_trace(z).unwrap();
                let upstream = Vec64::from_raw(
                    trace
                        .output()
                        .iter()
                        .zip(data.point(i).iter())
                        .map(|(t, xv)| 2.0 * (t - xv))
                        .collect(),
                );
                net.backward_into(z, &upstream, &trace, &mut grad).unwrap();
            }
            for g in &mut grad {
                *g *= scale;
            }
            let numeric = finite_diff_grad(loss_at, &net.params_flat(), 1e-5).unwrap();
            let nn = numeric.norm_sq().sqrt();
            let diff: f64 = grad
                .iter()
                .zip(numeric.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(diff / nn.max(1e-12) <= 1e-5, "check {check}: rel {}", diff / nn);
        }
    }

    #[test]
    fn zero_outer_iterations_leaves_net_unchanged() {
        let mut rng = RngStream::new(9, 0);
        let mut net = GeneratorNet::init(&[2, 4, 1], OutputActivation::Identity, &mut rng).unwrap();
        let before = net.params_flat();
        let data = dataset_1d(&[0.0, 1.0]);
        let cfg = ImleConfig {
            outer_iters: 0,
            batch_size: 2,
            minibatch_size: 2,
            ..ImleConfig::desk_defaults(2, 0)
        };
        let mut stream = RngStream::new(0, 0);
        let trace = imle_train(&mut net, &data, &cfg, &mut stream).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(net.params_flat(), before);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let data = {
            let mut rng = RngStream::new(77, 0);
            crate::datasets::gen_ring_mixture(&mut rng, 4, 2.0, 0.2, 64).unwrap()
        };
        let cfg = ImleConfig {
            outer_iters: 5,
            inner_iters: 10,
            batch_size: 32,
            minibatch_size: 16,
            samples_per_iter: 128,
            ..ImleConfig::desk_defaults(64, 3)
        };
        let run = |seed: u64| {
            let mut rng = RngStream::new(seed, 0);
            let mut net =
                GeneratorNet::init(&[4, 16, 16, 2], OutputActivation::Identity, &mut rng).unwrap();
            let mut stream = RngStream::new(cfg.seed, 1);
            let trace = imle_train(&mut net, &data, &cfg, &mut stream).unwrap();
            (net.params_flat(), trace)
        };
        let (theta_a, trace_a) = run(11);
        let (theta_b, trace_b) = run(11);
        assert_eq!(theta_a, theta_b);
        assert!(trace_a.same_modulo_wall_time(&trace_b));
    }

    #[test]
    fn objective_examples_match_analytic_moments() {
        // E[z^2] = 1 for a standard normal around the single data point 0
        let fam = AnalyticFamily::gaussian_1d(0.0, 1.0).unwrap();
        let data = dataset_1d(&[0.0]);
        let mut rng = RngStream::new(10, 0);
        let est = imle_objective_mc(&fam, &data, 1, 20_000, &mut rng);
        assert!((est.mean - 1.0).abs() <= 3.0 * est.stderr, "{est:?}");

        // bias-variance identity: E[(c + z)^2] = 1 + c^2 at c = 3
        let fam_off = AnalyticFamily::gaussian_1d(3.0, 1.0).unwrap();
        let est_off = imle_objective_mc(&fam_off, &data, 1, 20_000, &mut rng);
        assert!((est_off.mean - 10.0).abs() <= 3.0 * est_off.stderr, "{est_off:?}");
    }

    #[test]
    fn degenerate_model_gives_zero_objective() {
        // constant net emitting exactly the data point
        let net = GeneratorNet::from_parts(
            &[1, 1],
            vec![Mat64::zeros(1, 1)],
            vec![Vec64::from_slice(&[0.75]).unwrap()],
            OutputActivation::Identity,
        )
        .unwrap();
        let data = dataset_1d(&[0.75]);
        let mut rng = RngStream::new(11, 0);
        let est = imle_objective_mc(&net, &data, 4, 100, &mut rng);
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn objective_is_monotone_in_m_per_trial() {
        let fam = AnalyticFamily::gaussian_1d(0.5, 1.0).unwrap();
        let data = dataset_1d(&[0.0, 1.5]);
        let trials = 500;
        let values_for = |m: usize| {
            let mut rng = RngStream::new(12, 34);
            objective_mc_trials(&fam, &data, m, trials, &mut rng)
        };
        let m1 = values_for(1);
        let m16 = values_for(16);
        for (a, b) in m1.iter().zip(&m16) {
            assert!(b <= a, "per-trial monotonicity violated: {b} > {a}");
        }
    }

    #[test]
    fn config_validation_and_warnings() {
        let ok = ImleConfig::desk_defaults(100, 0);
        assert!(ok.validate(100).unwrap().is_empty());

        let warned = ImleConfig {
            samples_per_iter: 10,
            batch_size: 100,
            minibatch_size: 10,
            ..ImleConfig::desk_defaults(100, 0)
        };
        assert_eq!(warned.validate(100).unwrap().len(), 1);

        let bad = ImleConfig {
            minibatch_size: 200,
            ..ImleConfig::desk_defaults(100, 0)
        };
        assert!(bad.validate(100).is_err());

        let bad_eta = ImleConfig {
            learning_rate: 0.0,
            ..ImleConfig::desk_defaults(100, 0)
        };
        assert!(bad_eta.validate(100).is_err());
    }
}
