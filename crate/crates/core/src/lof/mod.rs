//! Local Outlier Factor over small-dimension point sets.
//!
//! A fitted [`LofModel`] holds, for every training point, its k-distance,
//! its k-distance neighborhood (closed ball, so distance ties can push the
//! neighbor count above `k`), the reachability distances to those
//! neighbors, the local reachability density (lrd), and the LOF score.
//! Scores near 1 mean the point sits at the same density as its
//! neighborhood; scores well above 1 mean it is isolated relative to it.
//!
//! [`fit`] answers neighbor queries through a kd-tree; [`brute_force_lof`]
//! recomputes everything from the raw pairwise distance definitions and
//! exists so the two routes can be checked against each other.

mod brute;
mod kdtree;

pub use brute::brute_force_lof;

use kdtree::{dist_sq, KdTree, Matrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Default decision boundary on the LOF score.
pub const DEFAULT_THRESHOLD: f64 = 1.5;

/// Largest dataset accepted by [`brute_force_lof`].
pub const BRUTE_FORCE_LIMIT: usize = 10_000;

/// Version tag written into serialized model files.
const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LofError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("dataset has {len} points, need at least {min} for k={k}")]
    DatasetTooSmall { len: usize, min: usize, k: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("point {id} has a non-finite coordinate")]
    NonFiniteCoordinate { id: usize },
    #[error("dataset of {len} points exceeds the brute-force limit of {limit}")]
    BruteForceTooLarge { len: usize, limit: usize },
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One data point: an id into its dataset plus its coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub id: usize,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(id: usize, coords: Vec<f64>) -> Self {
        Point { id, coords }
    }

    /// 1-D point, the shape every inter-arrival-time sample takes.
    pub fn scalar(id: usize, value: f64) -> Self {
        Point {
            id,
            coords: vec![value],
        }
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn distance(p: &Point, o: &Point) -> Result<f64, LofError> {
    if p.coords.len() != o.coords.len() {
        return Err(LofError::DimensionMismatch {
            left: p.coords.len(),
            right: o.coords.len(),
        });
    }
    Ok(dist_sq(&p.coords, &o.coords).sqrt())
}

/// k-distance of `dataset[p]`: the smallest radius containing at least `k`
/// other points, with at most `k - 1` strictly inside it. Returns the
/// radius and every point within it (ties included), ascending by id.
pub fn k_distance(dataset: &[Point], p: usize, k: usize) -> Result<(f64, Vec<usize>), LofError> {
    if k == 0 {
        return Err(LofError::InvalidK);
    }
    if dataset.len() < k + 1 {
        return Err(LofError::DatasetTooSmall {
            len: dataset.len(),
            min: k + 1,
            k,
        });
    }
    let query = &dataset[p];
    let mut d2s: Vec<(f64, usize)> = dataset
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != p)
        .map(|(i, o)| (dist_sq(&query.coords, &o.coords), i))
        .collect();
    d2s.sort_by(|a, b| a.0.total_cmp(&b.0));
    let kdist2 = d2s[k - 1].0;
    let mut neighbors: Vec<usize> = d2s
        .iter()
        .filter(|(d2, _)| *d2 <= kdist2)
        .map(|&(_, i)| i)
        .collect();
    neighbors.sort_unstable();
    Ok((kdist2.sqrt(), neighbors))
}

/// Per-point neighborhood structure produced by [`fit`].
#[derive(Debug, Clone)]
pub struct NeighborhoodTable {
    k: usize,
    k_distance: Vec<f64>,
    neighbors: Vec<Vec<u32>>,
    reach_dists: Vec<Vec<f64>>,
}

impl NeighborhoodTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn k_distance(&self, p: usize) -> f64 {
        self.k_distance[p]
    }

    /// Ids in the k-distance neighborhood of `p`, ascending.
    pub fn neighbors(&self, p: usize) -> &[u32] {
        &self.neighbors[p]
    }

    /// Reachability distances from `p` to its neighbors, aligned with
    /// [`Self::neighbors`].
    pub fn reach_dists(&self, p: usize) -> &[f64] {
        &self.reach_dists[p]
    }

    /// reach-dist(p, o) = max(k-distance(o), d(p, o)).
    pub fn reach_dist(&self, p: &Point, o: &Point) -> f64 {
        self.k_distance[o.id].max(dist_sq(&p.coords, &o.coords).sqrt())
    }
}

/// A fitted LOF model over a training dataset.
#[derive(Debug, Clone)]
pub struct LofModel {
    data: Matrix,
    k: usize,
    table: NeighborhoodTable,
    lrd: Vec<f64>,
    lof: Vec<f64>,
    threshold: f64,
    tree: KdTree,
}

/// Fit a LOF model: neighborhoods, lrd, and LOF score for every point.
///
/// Neighbor queries run in parallel over the immutable dataset; the
/// result is deterministic for a given input. The decision threshold is
/// initialized to [`DEFAULT_THRESHOLD`] and adjusted by the detector's
/// threshold policy.
pub fn fit(dataset: &[Point], k: usize) -> Result<LofModel, LofError> {
    if k == 0 {
        return Err(LofError::InvalidK);
    }
    if dataset.len() < k + 1 {
        return Err(LofError::DatasetTooSmall {
            len: dataset.len(),
            min: k + 1,
            k,
        });
    }
    let dim = dataset[0].coords.len();
    let mut coords = Vec::with_capacity(dataset.len() * dim);
    for p in dataset {
        if p.coords.len() != dim {
            return Err(LofError::DimensionMismatch {
                left: dim,
                right: p.coords.len(),
            });
        }
        if p.coords.iter().any(|c| !c.is_finite()) {
            return Err(LofError::NonFiniteCoordinate { id: p.id });
        }
        coords.extend_from_slice(&p.coords);
    }
    let data = Matrix { dim, coords };
    let tree = KdTree::build(&data);
    let n = data.len();

    // Pass 1: k-distance and closed-ball neighborhood of every point.
    let per_point: Vec<(f64, Vec<u32>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = data.row(i);
            let kdist2 = tree.kth_dist_sq(&data, q, k, i as u32);
            let neighbors = tree.within_radius(&data, q, kdist2, i as u32);
            (kdist2, neighbors)
        })
        .collect();
    let kdist2: Vec<f64> = per_point.iter().map(|(d2, _)| *d2).collect();
    let neighbors: Vec<Vec<u32>> = per_point.into_iter().map(|(_, ns)| ns).collect();

    // Pass 2: reachability distances and local reachability density.
    let reach_dists: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = data.row(i);
            neighbors[i]
                .iter()
                .map(|&o| dist_sq(q, data.row(o as usize)).max(kdist2[o as usize]).sqrt())
                .collect()
        })
        .collect();
    let lrd: Vec<f64> = reach_dists
        .iter()
        .map(|rds| local_reachability_density(rds))
        .collect();

    // Pass 3: LOF as the ratio of the neighborhood's mean lrd to the
    // point's own lrd.
    let lof: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| lof_score(lrd[i], neighbors[i].iter().map(|&o| lrd[o as usize])))
        .collect();

    Ok(LofModel {
        k,
        table: NeighborhoodTable {
            k,
            k_distance: kdist2.iter().map(|d2| d2.sqrt()).collect(),
            neighbors,
            reach_dists,
        },
        lrd,
        lof,
        threshold: DEFAULT_THRESHOLD,
        tree,
        data,
    })
}

/// 1 / mean reachability distance; +inf when every reach-dist is zero
/// (the point sits inside a cluster of duplicates).
fn local_reachability_density(reach_dists: &[f64]) -> f64 {
    let mean = reach_dists.iter().sum::<f64>() / reach_dists.len() as f64;
    if mean == 0.0 {
        f64::INFINITY
    } else {
        1.0 / mean
    }
}

/// mean(lrd of neighbors) / lrd(p). A point inside a duplicate cluster
/// has lrd = +inf and so do all of its neighbors; the cluster is
/// maximally dense, so each inf/inf ratio counts as 1 and the score
/// comes out as 1 instead of NaN.
fn lof_score(lrd_p: f64, neighbor_lrds: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = neighbor_lrds.len() as f64;
    if lrd_p.is_infinite() {
        let inf_ratios = neighbor_lrds.filter(|l| l.is_infinite()).count();
        return inf_ratios as f64 / n;
    }
    neighbor_lrds.sum::<f64>() / n / lrd_p
}

impl LofModel {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn table(&self) -> &NeighborhoodTable {
        &self.table
    }

    pub fn point(&self, i: usize) -> Point {
        Point::new(i, self.data.row(i).to_vec())
    }

    /// Local reachability density of every training point.
    pub fn lrd(&self) -> &[f64] {
        &self.lrd
    }

    /// LOF score of every training point.
    pub fn lof_scores(&self) -> &[f64] {
        &self.lof
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
    }

    /// Score a query point against the trained neighborhoods without
    /// refitting. The query's k nearest training points (ties included)
    /// play the role of its neighborhood: its lrd comes from the
    /// reachability distances to them, and the score is the ratio of
    /// their mean lrd to it.
    pub fn score(&self, q: &Point) -> Result<f64, LofError> {
        if q.coords.len() != self.data.dim {
            return Err(LofError::DimensionMismatch {
                left: self.data.dim,
                right: q.coords.len(),
            });
        }
        let kdist2 = self.tree.kth_dist_sq(&self.data, &q.coords, self.k, u32::MAX);
        let neighbors = self
            .tree
            .within_radius(&self.data, &q.coords, kdist2, u32::MAX);
        let reach_sum: f64 = neighbors
            .iter()
            .map(|&o| {
                let o = o as usize;
                dist_sq(&q.coords, self.data.row(o))
                    .sqrt()
                    .max(self.table.k_distance[o])
            })
            .sum();
        let mean = reach_sum / neighbors.len() as f64;
        let lrd_q = if mean == 0.0 { f64::INFINITY } else { 1.0 / mean };
        Ok(lof_score(
            lrd_q,
            neighbors.iter().map(|&o| self.lrd[o as usize]),
        ))
    }

    /// Indices of training points whose LOF score exceeds the threshold.
    pub fn outliers(&self) -> Vec<usize> {
        self.lof
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > self.threshold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Write the model to a versioned JSON file.
    pub fn save(&self, path: &Path) -> Result<(), LofError> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            k: self.k,
            point_count: self.data.len(),
            dim: self.data.dim,
            coords: self.data.coords.clone(),
            k_distances: self.table.k_distance.clone(),
            lrd: self.lrd.clone(),
            lof: self.lof.clone(),
            threshold: self.threshold,
        };
        let json = serde_json::to_string(&file)
            .map_err(|e| LofError::ModelFormat(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    /// Load a model saved by [`Self::save`]. Neighborhoods are rebuilt
    /// from the stored coordinates and the recomputed statistics are
    /// checked against the stored ones, so a corrupted or hand-edited
    /// file is rejected rather than silently trusted.
    pub fn load(path: &Path) -> Result<Self, LofError> {
        let raw = fs::read_to_string(path)?;
        let file: ModelFile =
            serde_json::from_str(&raw).map_err(|e| LofError::ModelFormat(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(LofError::ModelFormat(format!(
                "unsupported format version {}",
                file.format_version
            )));
        }
        if file.dim == 0 || file.coords.len() != file.point_count * file.dim {
            return Err(LofError::ModelFormat(
                "coordinate count does not match point count".into(),
            ));
        }
        let points: Vec<Point> = file
            .coords
            .chunks(file.dim)
            .enumerate()
            .map(|(i, c)| Point::new(i, c.to_vec()))
            .collect();
        let mut model = fit(&points, file.k)?;
        let consistent = |got: &[f64], want: &[f64]| {
            got.len() == want.len()
                && got
                    .iter()
                    .zip(want)
                    .all(|(g, w)| g == w || (g - w).abs() <= 1e-9 * w.abs().max(1.0))
        };
        if !consistent(&model.table.k_distance, &file.k_distances)
            || !consistent(&model.lrd, &file.lrd)
            || !consistent(&model.lof, &file.lof)
        {
            return Err(LofError::ModelFormat(
                "stored statistics disagree with the stored points".into(),
            ));
        }
        model.threshold = file.threshold;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    k: usize,
    point_count: usize,
    dim: usize,
    coords: Vec<f64>,
    k_distances: Vec<f64>,
    lrd: Vec<f64>,
    lof: Vec<f64>,
    threshold: f64,
}
