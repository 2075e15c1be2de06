//! Dense vector/matrix arithmetic, seeded random streams, Gaussian sampling,
//! and a finite-difference gradient oracle.
//!
//! Every distance in this crate is *squared* Euclidean; no square root is
//! taken anywhere in a loss computation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("non-finite value at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("matrix data length {len} does not equal rows*cols = {rows}x{cols}")]
    BadShape { len: usize, rows: usize, cols: usize },
    #[error("empty vector is not allowed")]
    Empty,
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("function evaluated non-finite at coordinate {coord} (value {value})")]
    NonFiniteEval { coord: usize, value: f64 },
}

/// Owned vector of finite 64-bit floats.
///
/// Public constructors validate finiteness. Values produced by internal
/// arithmetic can transiently overflow during a diverging optimization run;
/// the training loop detects that through its loss check and aborts.
#[derive(Debug, Clone, PartialEq)]
pub struct Vec64 {
    data: Vec<f64>,
}

impl Vec64 {
    pub fn new(data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.is_empty() {
            return Err(NumericsError::Empty);
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_finite() {
                return Err(NumericsError::NonFinite { index, value });
            }
        }
        Ok(Self { data })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, NumericsError> {
        Self::new(values.to_vec())
    }

    /// All-zero vector of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dim must be >= 1");
        Self {
            data: vec![0.0; dim],
        }
    }

    /// Crate-internal constructor for computed results; skips the finiteness
    /// scan on release builds.
    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty());
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

impl std::ops::Index<usize> for Vec64 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl<'a> IntoIterator for &'a Vec64 {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;
    fn into_iter(self) -> Self::IntoIter {
        self.data.iter()
    }
}

/// Row-major dense matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat64 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat64 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::BadShape {
                len: data.len(),
                rows,
                cols,
            });
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_finite() {
                return Err(NumericsError::NonFinite { index, value });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// y = A x, writing into `out` (len = rows).
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            *o = acc;
        }
    }

    /// y = A^T x, writing into `out` (len = cols).
    pub fn matvec_transpose_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for (r, xv) in x.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * xv;
            }
        }
    }
}

/// Squared Euclidean distance between two equal-dimension vectors.
pub fn sq_euclidean(a: &Vec64, b: &Vec64) -> Result<f64, NumericsError> {
    if a.dim() != b.dim() {
        return Err(NumericsError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(sq_euclidean_slices(a.as_slice(), b.as_slice()))
}

/// Squared Euclidean distance on raw slices; callers guarantee equal length.
#[inline]
pub fn sq_euclidean_slices(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Deterministic seeded random stream.
///
/// Backed by ChaCha8 in counter mode: a `(seed, stream_id)` pair fully
/// determines the output sequence, and distinct `stream_id` values give
/// statistically independent streams under the same seed. A stream is
/// single-owner; concurrent work derives children via [`RngStream::split`]
/// or uses distinct stream ids.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in the half-open-at-zero interval (0, 1].
    ///
    /// 53-bit mantissa resolution; never returns 0, so `ln` of the result is
    /// always finite.
    pub fn uniform_01(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Unbiased uniform integer in `[0, bound)` via widening-multiply rejection.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            let m = (r as u128) * (bound as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// One Box–Muller pair of independent standard normals.
    ///
    /// Consumes exactly two uniforms:
    /// `z0 = sqrt(-2 ln u1) cos(2 pi u2)`, `z1 = sqrt(-2 ln u1) sin(2 pi u2)`.
    /// This transform is the crate's documented Gaussian sampler; runs are
    /// reproducible under this implementation (cross-implementation bit
    /// equality is not promised).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform_01();
        let u2 = self.uniform_01();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        (radius * angle.cos(), radius * angle.sin())
    }

    /// Single standard-normal draw. Consumes a full Box–Muller pair and
    /// discards the second value, so calls stay aligned with the uniform
    /// stream in a data-independent way.
    pub fn standard_normal(&mut self) -> f64 {
        self.normal_pair().0
    }

    /// Derive an independent child stream, advancing this one.
    pub fn split(&mut self) -> RngStream {
        let seed = self.next_u64();
        let stream_id = self.next_u64();
        RngStream::new(seed, stream_id)
    }

    /// `k` indices sampled uniformly without replacement from `[0, n)`
    /// (partial Fisher–Yates).
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} of {n} without replacement");
        let mut indices: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_below((n - i) as u64) as usize;
            indices.swap(i, j);
        }
        indices.truncate(k);
        indices
    }
}

/// Vector of `dim` independent standard-normal draws.
pub fn gaussian_sample(rng: &mut RngStream, dim: usize) -> Vec64 {
    assert!(dim >= 1, "dim must be >= 1");
    let mut data = Vec::with_capacity(dim + 1);
    while data.len() < dim {
        let (a, b) = rng.normal_pair();
        data.push(a);
        data.push(b);
    }
    data.truncate(dim);
    Vec64::from_raw(data)
}

/// Central finite differences `(f(x + h e_j) - f(x - h e_j)) / (2h)`.
///
/// This is the gradient oracle the backprop tests check against; it stays
/// independent of any analytic gradient path.
pub fn finite_diff_grad<F>(mut f: F, theta: &Vec64, h: f64) -> Result<Vec64, NumericsError>
where
    F: FnMut(&Vec64) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(NumericsError::BadStep(h));
    }
    let mut probe = theta.clone();
    let mut grad = Vec::with_capacity(theta.dim());
    for coord in 0..theta.dim() {
        let original = probe.data[coord];
        probe.data[coord] = original + h;
        let plus = f(&probe);
        probe.data[coord] = original - h;
        let minus = f(&probe);
        probe.data[coord] = original;
        for value in [plus, minus] {
            if !value.is_finite() {
                return Err(NumericsError::NonFiniteEval { coord, value });
            }
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(Vec64::from_raw(grad))
}

/// Neumaier compensated summation. Used where an identity must hold to ~1e-10
/// over 1e5-element sums.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}
