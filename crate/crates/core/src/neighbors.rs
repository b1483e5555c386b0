//! Exact k-nearest-neighbor queries under Euclidean distance.
//!
//! This is the substrate for SMOTE, Tomek, CNN, OSS, ENN and NCL, so
//! exactness and a fixed tie-break matter more than speed: distances are
//! compared on the squared metric, and ties break by ascending original
//! index everywhere.

use crate::frame::{Frame, Instance, Label};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeighborError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("reference frame is empty")]
    EmptyReference,
}

/// Neighbors of one query point, sorted ascending by distance then index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query: usize,
    /// `(frame index, true Euclidean distance)` pairs.
    pub neighbors: Vec<(usize, f64)>,
    /// Fewer than `k` eligible points existed; all of them are returned.
    pub short: bool,
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn knn_point(
    frame: &Frame,
    query_point: &[f64],
    skip: Option<usize>,
    k: usize,
    class_filter: Option<Label>,
) -> Vec<(usize, f64)> {
    // Bounded insertion keeps this O(n * k); k is tiny for every caller.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, inst) in frame.instances().iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        if let Some(label) = class_filter {
            if inst.label != label {
                continue;
            }
        }
        let d2 = squared_distance(query_point, &inst.features);
        if best.len() == k {
            let worst = best[k - 1];
            if (d2, i) >= (worst.0, worst.1) {
                continue;
            }
        }
        let pos = best.partition_point(|&(bd, bi)| (bd, bi) < (d2, i));
        best.insert(pos, (d2, i));
        best.truncate(k);
    }
    best.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
}

/// Exact k nearest neighbors of `frame[query_index]`.
///
/// `class_filter` restricts candidates to one label (SMOTE queries only the
/// minority class). When fewer than `k` eligible points exist the list is
/// returned whole and flagged `short`.
pub fn knn(
    frame: &Frame,
    query_index: usize,
    k: usize,
    exclude_self: bool,
    class_filter: Option<Label>,
) -> Result<NeighborList, NeighborError> {
    if k == 0 {
        return Err(NeighborError::ZeroK);
    }
    let query_point = &frame.get(query_index).features;
    let skip = exclude_self.then_some(query_index);
    let neighbors = knn_point(frame, query_point, skip, k, class_filter);
    let short = neighbors.len() < k;
    Ok(NeighborList {
        query: query_index,
        neighbors,
        short,
    })
}

/// Index of the exact 1-NN of `frame[query_index]` among the other instances.
pub(crate) fn nearest_index(frame: &Frame, query_index: usize) -> Option<usize> {
    knn_point(frame, &frame.get(query_index).features, Some(query_index), 1, None)
        .first()
        .map(|&(i, _)| i)
}

/// 1-NN classification of `query` against `reference`; ties break by index.
pub fn nn1_classify(reference: &Frame, query: &Instance) -> Result<Label, NeighborError> {
    if reference.is_empty() {
        return Err(NeighborError::EmptyReference);
    }
    let hit = knn_point(reference, &query.features, None, 1, None);
    Ok(reference.get(hit[0].0).label)
}
