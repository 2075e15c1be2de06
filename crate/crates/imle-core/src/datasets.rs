//! Dataset construction: synthetic mixture generators, IDX ingestion, CSV
//! ingestion, and affine normalization records.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::numerics::{RngStream, Vec64};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad IDX magic at byte offset {offset}: expected {expected}, got {got:#04x}")]
    BadMagic {
        offset: usize,
        expected: &'static str,
        got: u8,
    },
    #[error("unsupported IDX element type {got:#04x} at byte offset 2 (only 0x08 unsigned byte)")]
    UnsupportedElementType { got: u8 },
    #[error("unsupported IDX rank {rank} at byte offset 3")]
    UnsupportedRank { rank: u8 },
    #[error("truncated IDX header: need {needed} bytes, file has {len}")]
    TruncatedHeader { needed: usize, len: usize },
    #[error("truncated payload: expected {expected} bytes from offset {offset}, file has {got}")]
    TruncatedPayload {
        offset: usize,
        expected: usize,
        got: usize,
    },
    #[error("trailing garbage: payload ends at offset {end}, file has {len} bytes")]
    TrailingBytes { end: usize, len: usize },
    #[error("CSV line {line}: expected {expected} fields, got {got}")]
    RaggedRow {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("CSV line {line}: cannot parse field {field} ({text:?}) as a float")]
    BadField {
        line: usize,
        field: usize,
        text: String,
    },
    #[error("dataset is empty")]
    Empty,
    #[error("point {index} has dim {got}, expected {expected}")]
    RaggedPoints {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("normalization scale must be nonzero in every coordinate (coordinate {coord})")]
    ZeroScale { coord: usize },
    #[error("no normalization recorded to invert")]
    NoNormalization,
    #[error("mixture weights must sum to 1 (got {sum})")]
    BadWeights { sum: f64 },
    #[error("mixture means must share one dimension")]
    MixtureDims,
    #[error("invalid parameter: {0}")]
    BadParam(String),
}

/// Affine transform applied to stored points: `stored = scale .* raw + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub scale: Vec64,
    pub offset: Vec64,
}

/// Isotropic Gaussian mixture description: shared scalar std, per-component
/// means and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    component_means: Vec<Vec64>,
    component_std: f64,
    weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(
        component_means: Vec<Vec64>,
        component_std: f64,
        weights: Vec<f64>,
    ) -> Result<Self, DatasetError> {
        if component_means.is_empty() || weights.len() != component_means.len() {
            return Err(DatasetError::MixtureDims);
        }
        let dim = component_means[0].dim();
        if component_means.iter().any(|m| m.dim() != dim) {
            return Err(DatasetError::MixtureDims);
        }
        if !(component_std.is_finite() && component_std > 0.0) {
            return Err(DatasetError::BadParam(format!(
                "component_std must be positive, got {component_std}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || weights.iter().any(|&w| w < 0.0) {
            return Err(DatasetError::BadWeights { sum });
        }
        Ok(Self {
            component_means,
            component_std,
            weights,
        })
    }

    pub fn equal_weights(component_means: Vec<Vec64>, component_std: f64) -> Result<Self, DatasetError> {
        let k = component_means.len();
        if k == 0 {
            return Err(DatasetError::MixtureDims);
        }
        // k equal weights summing to 1 exactly would need k | 2^52; build the
        // vector so the sum is exact by assigning the residual to the last.
        let w = 1.0 / k as f64;
        let mut weights = vec![w; k];
        let partial: f64 = weights[..k - 1].iter().sum();
        weights[k - 1] = 1.0 - partial;
        Self::new(component_means, component_std, weights)
    }

    pub fn means(&self) -> &[Vec64] {
        &self.component_means
    }

    pub fn std(&self) -> f64 {
        self.component_std
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.component_means[0].dim()
    }

    pub fn components(&self) -> usize {
        self.component_means.len()
    }

    /// Inverse-CDF component pick from one uniform draw.
    pub(crate) fn pick_component(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u <= acc {
                return k;
            }
        }
        self.weights.len() - 1
    }
}

/// Ordered collection of equal-dimension example vectors with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec64>,
    dim: usize,
    source_tag: String,
    normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(points: Vec<Vec64>, source_tag: impl Into<String>) -> Result<Self, DatasetError> {
        if points.is_empty() {
            return Err(DatasetError::Empty);
        }
        let dim = points[0].dim();
        for (index, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(DatasetError::RaggedPoints {
                    index,
                    got: p.dim(),
                    expected: dim,
                });
            }
        }
        Ok(Self {
            points,
            dim,
            source_tag: source_tag.into(),
            normalization: None,
        })
    }

    pub fn points(&self) -> &[Vec64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Vec64 {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    /// Apply `stored = scale .* stored + offset`, composing with any
    /// previously recorded transform.
    pub fn apply_normalization(&mut self, scale: Vec64, offset: Vec64) -> Result<(), DatasetError> {
        if scale.dim() != self.dim || offset.dim() != self.dim {
            return Err(DatasetError::RaggedPoints {
                index: 0,
                got: scale.dim(),
                expected: self.dim,
            });
        }
        if let Some(coord) = scale.iter().position(|&s| s == 0.0) {
            return Err(DatasetError::ZeroScale { coord });
        }
        for p in &mut self.points {
            let data: Vec<f64> = p
                .iter()
                .zip(scale.iter().zip(offset.iter()))
                .map(|(x, (s, o))| s * x + o)
                .collect();
            *p = Vec64::from_raw(data);
        }
        self.normalization = Some(match self.normalization.take() {
            None => Normalization {
                scale: scale.clone(),
                offset: offset.clone(),
            },
            // compose: s2 .* (s1 x + o1) + o2 = (s2 s1) x + (s2 o1 + o2)
            Some(prev) => {
                let s: Vec<f64> = prev
                    .scale
                    .iter()
                    .zip(scale.iter())
                    .map(|(s1, s2)| s1 * s2)
                    .collect();
                let o: Vec<f64> = prev
                    .offset
                    .iter()
                    .zip(scale.iter().zip(offset.iter()))
                    .map(|(o1, (s2, o2))| s2 * o1 + o2)
                    .collect();
                Normalization {
                    scale: Vec64::from_raw(s),
                    offset: Vec64::from_raw(o),
                }
            }
        });
        Ok(())
    }

    /// Undo the recorded transform, restoring the raw coordinates.
    pub fn invert_normalization(&mut self) -> Result<(), DatasetError> {
        let norm = self.normalization.take().ok_or(DatasetError::NoNormalization)?;
        for p in &mut self.points {
            let data: Vec<f64> = p
                .iter()
                .zip(norm.scale.iter().zip(norm.offset.iter()))
                .map(|(x, (s, o))| (x - o) / s)
                .collect();
            *p = Vec64::from_raw(data);
        }
        Ok(())
    }
}

/// Mixture with equal-weight components spaced uniformly on a circle of the
/// given radius in 2-D.
pub fn ring_mixture_spec(k: usize, radius: f64, std: f64) -> Result<MixtureSpec, DatasetError> {
    if k < 1 {
        return Err(DatasetError::BadParam("k must be >= 1".into()));
    }
    let means = (0..k)
        .map(|j| {
            let angle = std::f64::consts::TAU * j as f64 / k as f64;
            Vec64::from_raw(vec![radius * angle.cos(), radius * angle.sin()])
        })
        .collect();
    MixtureSpec::equal_weights(means, std)
}

/// `n` draws from the ring mixture; the generating spec is recorded in the
/// source tag.
pub fn gen_ring_mixture(
    rng: &mut RngStream,
    k: usize,
    radius: f64,
    std: f64,
    n: usize,
) -> Result<Dataset, DatasetError> {
    if n < k {
        return Err(DatasetError::BadParam(format!("n = {n} must be >= k = {k}")));
    }
    let spec = ring_mixture_spec(k, radius, std)?;
    let points = (0..n)
        .map(|_| {
            let comp = spec.pick_component(rng.uniform_01());
            let mean = &spec.means()[comp];
            let data: Vec<f64> = mean
                .iter()
                .map(|&m| m + std * rng.standard_normal())
                .collect();
            Vec64::from_raw(data)
        })
        .collect();
    Dataset::new(
        points,
        format!("ring-mixture k={k} radius={radius} std={std} n={n}"),
    )
}

/// Parse a big-endian IDX file: two zero bytes, element-type byte (0x08),
/// rank byte, rank-many u32 dimension sizes, then the row-major payload.
/// Pixels are scaled to [0, 1] by dividing by 255 and rows are flattened to
/// vectors; the 1/255 scaling is recorded as the dataset's normalization.
pub fn load_idx(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let tag = format!("idx:{}", path.display());
    parse_idx(&bytes, tag)
}

pub(crate) fn parse_idx(bytes: &[u8], source_tag: String) -> Result<Dataset, DatasetError> {
    if bytes.len() < 4 {
        return Err(DatasetError::TruncatedHeader {
            needed: 4,
            len: bytes.len(),
        });
    }
    for (offset, &byte) in bytes.iter().enumerate().take(2) {
        if byte != 0 {
            return Err(DatasetError::BadMagic {
                offset,
                expected: "0x00",
                got: byte,
            });
        }
    }
    if bytes[2] != 0x08 {
        return Err(DatasetError::UnsupportedElementType { got: bytes[2] });
    }
    let rank = bytes[3];
    if rank == 0 {
        return Err(DatasetError::UnsupportedRank { rank });
    }
    let dims_end = 4 + 4 * rank as usize;
    if bytes.len() < dims_end {
        return Err(DatasetError::TruncatedHeader {
            needed: dims_end,
            len: bytes.len(),
        });
    }
    let dims: Vec<usize> = (0..rank as usize)
        .map(|i| {
            let o = 4 + 4 * i;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect();
    let n = dims[0];
    let point_dim: usize = dims[1..].iter().product::<usize>().max(1);
    let expected = n
        .checked_mul(point_dim)
        .ok_or_else(|| DatasetError::BadParam("IDX dimensions overflow".into()))?;
    let payload = &bytes[dims_end..];
    if payload.len() < expected {
        return Err(DatasetError::TruncatedPayload {
            offset: dims_end,
            expected,
            got: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(DatasetError::TrailingBytes {
            end: dims_end + expected,
            len: bytes.len(),
        });
    }
    if n == 0 {
        return Err(DatasetError::Empty);
    }
    let points: Vec<Vec64> = payload
        .chunks_exact(point_dim)
        .map(|row| Vec64::from_raw(row.iter().map(|&b| b as f64 / 255.0).collect()))
        .collect();
    let mut ds = Dataset::new(points, source_tag)?;
    ds.normalization = Some(Normalization {
        scale: Vec64::from_raw(vec![1.0 / 255.0; point_dim]),
        offset: Vec64::zeros(point_dim),
    });
    Ok(ds)
}

/// Load a CSV of '.'-decimal floats, ',' separators, '\n' line ends. One row
/// becomes one point; an optional header row is skipped.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let tag = format!("csv:{}", path.display());
    parse_csv(&text, has_header, tag)
}

pub(crate) fn parse_csv(
    text: &str,
    has_header: bool,
    source_tag: String,
) -> Result<Dataset, DatasetError> {
    let mut points = Vec::new();
    let mut expected_fields = None;
    for (zero_based, line) in text.lines().enumerate() {
        let line_no = zero_based + 1;
        if line.is_empty() {
            continue;
        }
        if has_header && zero_based == 0 {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = *expected_fields.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(DatasetError::RaggedRow {
                line: line_no,
                expected,
                got: fields.len(),
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for (field_idx, field) in fields.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| DatasetError::BadField {
                line: line_no,
                field: field_idx + 1,
                text: (*field).to_string(),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::BadField {
                    line: line_no,
                    field: field_idx + 1,
                    text: (*field).to_string(),
                });
            }
            row.push(value);
        }
        points.push(Vec64::from_raw(row));
    }
    Dataset::new(points, source_tag)
}
