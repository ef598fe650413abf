//! Quadratic LOF reference computation.
//!
//! Spells out every pairwise distance and applies the k-distance,
//! reachability-distance, lrd, and LOF definitions directly, with no
//! spatial index and no code shared with [`super::fit`]. The accelerated
//! path is tested for agreement against this one.

use super::{LofError, Point, BRUTE_FORCE_LIMIT};

/// LOF score of every point, by direct application of the definitions.
///
/// Accepts at most [`BRUTE_FORCE_LIMIT`] points; the full distance matrix
/// is materialized.
pub fn brute_force_lof(dataset: &[Point], k: usize) -> Result<Vec<f64>, LofError> {
    if k == 0 {
        return Err(LofError::InvalidK);
    }
    let n = dataset.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(LofError::BruteForceTooLarge {
            len: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if n < k + 1 {
        return Err(LofError::DatasetTooSmall { len: n, min: k + 1, k });
    }
    let dim = dataset[0].coords.len();
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
    }

    // Full squared-distance matrix.
    let mut d2 = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = dataset[i]
                .coords
                .iter()
                .zip(&dataset[j].coords)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2[i * n + j] = v;
            d2[j * n + i] = v;
        }
    }

    // k-distance and closed-ball neighborhood per point: at least k
    // points within the radius, at most k-1 strictly inside it.
    let mut kdist2 = vec![0.0f64; n];
    let mut neighborhoods: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d2[i * n + j]).collect();
        others.sort_by(f64::total_cmp);
        kdist2[i] = others[k - 1];
        let neighborhood: Vec<usize> = (0..n)
            .filter(|&j| j != i && d2[i * n + j] <= kdist2[i])
            .collect();
        debug_assert!(neighborhood.len() >= k);
        neighborhoods.push(neighborhood);
    }

    // lrd(p) = 1 / mean over o of reach-dist(p, o),
    // reach-dist(p, o) = max(k-distance(o), d(p, o)).
    let mut lrd = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = 0.0;
        for &o in &neighborhoods[i] {
            sum += d2[i * n + o].max(kdist2[o]).sqrt();
        }
        let mean = sum / neighborhoods[i].len() as f64;
        lrd[i] = if mean == 0.0 { f64::INFINITY } else { 1.0 / mean };
    }

    // LOF(p) = mean over o of lrd(o) / lrd(p); inf/inf ratios (duplicate
    // clusters) count as 1.
    let mut lof = vec![0.0f64; n];
    for i in 0..n {
        let mut ratio_sum = 0.0;
        for &o in &neighborhoods[i] {
            let ratio = if lrd[o].is_infinite() && lrd[i].is_infinite() {
                1.0
            } else {
                lrd[o] / lrd[i]
            };
            ratio_sum += ratio;
        }
        lof[i] = ratio_sum / neighborhoods[i].len() as f64;
    }
    Ok(lof)
}
