//! Exact squared-Euclidean nearest-neighbour search over a frozen point set.
//!
//! Two interchangeable backends: a linear scan and a vantage-point tree. Both
//! return the exact argmin with ties broken by lowest point index, so the
//! tree is testable against the scan as an oracle. Candidate comparisons stay
//! in squared-distance space; square roots appear only in the tree's
//! triangle-inequality pruning bounds.

use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{sq_euclidean_slices, RngStream, Vec64};

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("cannot build an index over an empty point set")]
    EmptyPoints,
    #[error("point {index} has dim {got}, expected {expected}")]
    RaggedPoints {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("query dim {got} does not match index dim {expected}")]
    QueryDim { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexStructure {
    Brute,
    VpTree,
}

impl IndexStructure {
    pub fn name(self) -> &'static str {
        match self {
            Self::Brute => "brute",
            Self::VpTree => "vp-tree",
        }
    }
}

/// Exact nearest-neighbour answer: index into the stored point set and the
/// squared Euclidean distance to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub index: usize,
    pub sq_dist: f64,
}

const LEAF_SIZE: usize = 12;
// Arbitrary fixed seed for the pivot-order shuffle; the index must be a
// deterministic function of the point order alone.
const PIVOT_SHUFFLE_SEED: u64 = 0xD1CE_5EED;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        items: Vec<u32>,
    },
    Split {
        pivot: u32,
        radius: f64,
        inside: u32,
        outside: u32,
    },
}

/// Immutable search structure answering exact nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct NearestIndex {
    points: Vec<Vec64>,
    dim: usize,
    structure: IndexStructure,
    nodes: Vec<Node>,
    root: u32,
}

/// Build an index over the given points with the chosen backend.
pub fn build_index(points: Vec<Vec64>, structure: IndexStructure) -> Result<NearestIndex, NnError> {
    NearestIndex::build(points, structure)
}

impl NearestIndex {
    pub fn build(points: Vec<Vec64>, structure: IndexStructure) -> Result<Self, NnError> {
        if points.is_empty() {
            return Err(NnError::EmptyPoints);
        }
        let dim = points[0].dim();
        for (index, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(NnError::RaggedPoints {
                    index,
                    got: p.dim(),
                    expected: dim,
                });
            }
        }
        let mut index = Self {
            points,
            dim,
            structure,
            nodes: Vec::new(),
            root: 0,
        };
        if structure == IndexStructure::VpTree {
            index.build_tree();
        }
        Ok(index)
    }

    fn build_tree(&mut self) {
        let m = self.points.len();
        let mut shuffle = RngStream::new(PIVOT_SHUFFLE_SEED, m as u64);
        let order = shuffle.sample_without_replacement(m, m);
        // rank[i] = position of point i in the shuffled order; each split uses
        // the lowest-rank (first unused) point of its slice as pivot
        let mut rank = vec![0u32; m];
        for (pos, &idx) in order.iter().enumerate() {
            rank[idx] = pos as u32;
        }
        let mut entries: Vec<u32> = (0..m as u32).collect();
        self.root = self.build_node(&mut entries, &rank);
    }

    fn build_node(&mut self, entries: &mut [u32], rank: &[u32]) -> u32 {
        if entries.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                items: entries.to_vec(),
            });
            return (self.nodes.len() - 1) as u32;
        }
        let pivot_pos = entries
            .iter()
            .enumerate()
            .min_by_key(|&(_, &idx)| rank[idx as usize])
            .map(|(pos, _)| pos)
            .unwrap();
        entries.swap(0, pivot_pos);
        let pivot = entries[0];
        let pivot_point = self.points[pivot as usize].clone();
        let rest = &mut entries[1..];

        let mut keyed: Vec<(f64, u32)> = rest
            .iter()
            .map(|&idx| {
                let d = sq_euclidean_slices(
                    self.points[idx as usize].as_slice(),
                    pivot_point.as_slice(),
                )
                .sqrt();
                (d, idx)
            })
            .collect();
        let mid = keyed.len() / 2;
        keyed.select_nth_unstable_by(mid, |a, b| {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        });
        let radius = keyed[mid].0;
        for (slot, (_, idx)) in rest.iter_mut().zip(&keyed) {
            *slot = *idx;
        }
        let (near, far) = rest.split_at_mut(mid);
        // near holds d <= radius, far holds d >= radius
        let inside = self.build_node(near, rank);
        let outside = self.build_node(far, rank);
        self.nodes.push(Node::Split {
            pivot,
            radius,
            inside,
            outside,
        });
        (self.nodes.len() - 1) as u32
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

    pub fn structure(&self) -> IndexStructure {
        self.structure
    }

    pub fn points(&self) -> &[Vec64] {
        &self.points
    }

    /// Exact nearest neighbour; ties broken by lowest point index.
    pub fn query_nearest(&self, q: &Vec64) -> Result<MatchResult, NnError> {
        if q.dim() != self.dim {
            return Err(NnError::QueryDim {
                expected: self.dim,
                got: q.dim(),
            });
        }
        Ok(match self.structure {
            IndexStructure::Brute => self.scan(q.as_slice()),
            IndexStructure::VpTree => {
                let mut best = MatchResult {
                    index: usize::MAX,
                    sq_dist: f64::INFINITY,
                };
                self.search(self.root, q.as_slice(), &mut best);
                best
            }
        })
    }

    /// Element-wise [`NearestIndex::query_nearest`]; order-preserving, and
    /// large batches fan out across worker threads.
    pub fn query_batch(&self, queries: &[Vec64]) -> Result<Vec<MatchResult>, NnError> {
        if let Some(q) = queries.iter().find(|q| q.dim() != self.dim) {
            return Err(NnError::QueryDim {
                expected: self.dim,
                got: q.dim(),
            });
        }
        if queries.len() >= 64 {
            Ok(queries
                .par_iter()
                .map(|q| self.query_nearest(q).expect("dims pre-checked"))
                .collect())
        } else {
            queries.iter().map(|q| self.query_nearest(q)).collect()
        }
    }

    fn scan(&self, q: &[f64]) -> MatchResult {
        let mut best = MatchResult {
            index: 0,
            sq_dist: sq_euclidean_slices(q, self.points[0].as_slice()),
        };
        for (index, p) in self.points.iter().enumerate().skip(1) {
            let sq_dist = sq_euclidean_slices(q, p.as_slice());
            if sq_dist < best.sq_dist {
                best = MatchResult { index, sq_dist };
            }
        }
        best
    }

    #[inline]
    fn consider(&self, idx: u32, q: &[f64], best: &mut MatchResult) {
        let sq_dist = sq_euclidean_slices(q, self.points[idx as usize].as_slice());
        let idx = idx as usize;
        if sq_dist < best.sq_dist || (sq_dist == best.sq_dist && idx < best.index) {
            *best = MatchResult {
                index: idx,
                sq_dist,
            };
        }
    }

    fn search(&self, node: u32, q: &[f64], best: &mut MatchResult) {
        match &self.nodes[node as usize] {
            Node::Leaf { items } => {
                for &idx in items {
                    self.consider(idx, q, best);
                }
            }
            Node::Split {
                pivot,
                radius,
                inside,
                outside,
            } => {
                self.consider(*pivot, q, best);
                let d = sq_euclidean_slices(q, self.points[*pivot as usize].as_slice()).sqrt();
                if d < *radius {
                    self.search(*inside, q, best);
                    // outside points sit at distance >= radius from the pivot,
                    // hence >= radius - d from the query
                    if radius - d <= best.sq_dist.sqrt() {
                        self.search(*outside, q, best);
                    }
                } else {
                    self.search(*outside, q, best);
                    if d - radius <= best.sq_dist.sqrt() {
                        self.search(*inside, q, best);
                    }
                }
            }
        }
    }
}
