//! RANSAC driver over 7-point samples, Sampson-distance scoring, and the
//! normalized 8-point refit on the consensus set.

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};
use rand::Rng;
use thiserror::Error;

use crate::rng::rng_from_n;

use super::seven_point::{epipolar_row, mat_from_vec, seven_point};
use super::{Correspondence, FundamentalMatrix};

#[derive(Debug, Clone, Copy)]
pub struct RansacOptions {
    /// Inlier gate on the Sampson distance, normalized units.
    pub threshold: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Pairs with fewer consensus inliers than this are unusable.
    pub min_inliers: usize,
    /// Early-exit confidence for the adaptive iteration bound.
    pub confidence: f64,
}

impl Default for RansacOptions {
    fn default() -> Self {
        Self {
            threshold: 1e-3,
            max_iters: 2000,
            seed: 0,
            min_inliers: 15,
            confidence: 0.999,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RansacError {
    #[error("need at least 8 correspondences for RANSAC + refit, got {got}")]
    TooFewCorrespondences { got: usize },
    #[error("best model explains only {got} correspondences (minimum {min}); unusable overlap")]
    InsufficientInliers { got: usize, min: usize },
}

#[derive(Debug, Clone)]
pub struct RansacResult {
    pub fundamental: FundamentalMatrix,
    /// Indices of consensus correspondences under the refit model.
    pub inliers: Vec<usize>,
    pub iterations: usize,
}

/// First-order geometric distance of a correspondence to the epipolar
/// variety, in normalized units.
pub fn sampson_distance(f: &Matrix3<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let av = Vector3::new(a.x, a.y, 1.0);
    let bv = Vector3::new(b.x, b.y, 1.0);
    let fa = f * av;
    let ftb = f.transpose() * bv;
    let num = bv.dot(&fa);
    let den2 = fa.x * fa.x + fa.y * fa.y + ftb.x * ftb.x + ftb.y * ftb.y;
    if den2 <= f64::MIN_POSITIVE {
        return f64::INFINITY;
    }
    num.abs() / den2.sqrt()
}

/// Robust fundamental-matrix estimation.
///
/// Deterministic for a fixed seed: each iteration draws from its own derived
/// RNG stream and ties are broken by the lower iteration index, so the
/// result does not depend on evaluation order. The winning sample is refit
/// on its consensus set with the normalized 8-point algorithm and the
/// inliers are re-evaluated under the refit model.
pub fn ransac_fundamental(
    corr: &[Correspondence],
    options: &RansacOptions,
) -> Result<RansacResult, RansacError> {
    let n = corr.len();
    if n < 8 {
        return Err(RansacError::TooFewCorrespondences { got: n });
    }

    let mut best: Option<(usize, usize, FundamentalMatrix)> = None; // (count, iter, F)
    let mut needed = options.max_iters;
    let mut iter = 0usize;
    while iter < needed {
        let mut rng = rng_from_n(options.seed, "ransac-iter", iter as u64);
        let sample_idx = sample_distinct(&mut rng, n, 7);
        let sample: [Correspondence; 7] = [
            corr[sample_idx[0]],
            corr[sample_idx[1]],
            corr[sample_idx[2]],
            corr[sample_idx[3]],
            corr[sample_idx[4]],
            corr[sample_idx[5]],
            corr[sample_idx[6]],
        ];
        iter += 1;
        let Ok(candidates) = seven_point(&sample) else {
            continue;
        };
        for f in candidates {
            let count = corr
                .iter()
                .filter(|c| sampson_distance(&f.0, &c.a, &c.b) < options.threshold)
                .count();
            let better = match &best {
                Some((bc, _, _)) => count > *bc,
                None => true,
            };
            if better {
                best = Some((count, iter - 1, f));
                // Adaptive bound from the current inlier ratio.
                let w = count as f64 / n as f64;
                let p_good = w.powi(7).clamp(1e-12, 1.0 - 1e-12);
                let bound =
                    ((1.0 - options.confidence).ln() / (1.0 - p_good).ln()).ceil() as usize;
                needed = needed.min(bound.max(iter)).min(options.max_iters);
            }
        }
    }

    let (count, _, f0) = best.ok_or(RansacError::InsufficientInliers {
        got: 0,
        min: options.min_inliers,
    })?;
    if count < options.min_inliers {
        return Err(RansacError::InsufficientInliers {
            got: count,
            min: options.min_inliers,
        });
    }

    let provisional: Vec<usize> = (0..n)
        .filter(|&i| sampson_distance(&f0.0, &corr[i].a, &corr[i].b) < options.threshold)
        .collect();
    let refit = eight_point(corr, &provisional).unwrap_or(f0);
    let inliers: Vec<usize> = (0..n)
        .filter(|&i| sampson_distance(&refit.0, &corr[i].a, &corr[i].b) < options.threshold)
        .collect();
    if inliers.len() < options.min_inliers {
        return Err(RansacError::InsufficientInliers {
            got: inliers.len(),
            min: options.min_inliers,
        });
    }
    Ok(RansacResult {
        fundamental: refit,
        inliers,
        iterations: iter,
    })
}

/// `k` distinct indices in `0..n` (partial Fisher-Yates over a lazy identity).
fn sample_distinct<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut swapped = std::collections::HashMap::new();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let j = rng.gen_range(i..n);
        let vj = *swapped.get(&j).unwrap_or(&j);
        let vi = *swapped.get(&i).unwrap_or(&i);
        out.push(vj);
        swapped.insert(j, vi);
    }
    out
}

/// Normalized (Hartley) 8-point estimate on the given subset, projected to
/// rank 2. `None` when the subset is too small or the system collapses.
pub fn eight_point(corr: &[Correspondence], subset: &[usize]) -> Option<FundamentalMatrix> {
    if subset.len() < 8 {
        return None;
    }
    let (ta, na) = hartley_normalization(subset.iter().map(|&i| corr[i].a));
    let (tb, nb) = hartley_normalization(subset.iter().map(|&i| corr[i].b));

    let mut m = DMatrix::<f64>::zeros(subset.len(), 9);
    for (row, (&i, (a, b))) in subset.iter().zip(na.iter().zip(nb.iter())).enumerate() {
        let c = Correspondence {
            a: *a,
            b: *b,
            timestamp: corr[i].timestamp,
            marker_index: corr[i].marker_index,
        };
        m.set_row(row, &epipolar_row(&c).transpose());
    }
    let ata = m.transpose() * &m;
    let eig = nalgebra::SymmetricEigen::new(ata);
    let mut min_idx = 0;
    for i in 1..9 {
        if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
            min_idx = i;
        }
    }
    let fv = eig.eigenvectors.column(min_idx);
    let f_hat = mat_from_vec(&nalgebra::SVector::<f64, 9>::from_iterator(
        fv.iter().copied(),
    ));

    // Rank-2 projection in the normalized frame, then denormalize.
    let svd = f_hat.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let s = svd.singular_values;
    let f_rank2 = u * Matrix3::from_diagonal(&Vector3::new(s[0], s[1], 0.0)) * vt;
    let f = tb.transpose() * f_rank2 * ta;
    let norm = f.norm();
    (norm > 1e-15).then(|| FundamentalMatrix(f / norm))
}

/// Similarity transform taking the points to zero mean and sqrt(2) RMS
/// radius; returns the matrix and the transformed points.
fn hartley_normalization(
    points: impl Iterator<Item = Vector2<f64>> + Clone,
) -> (Matrix3<f64>, Vec<Vector2<f64>>) {
    let pts: Vec<Vector2<f64>> = points.collect();
    let n = pts.len() as f64;
    let mean = pts.iter().sum::<Vector2<f64>>() / n;
    let mean_dist = pts.iter().map(|p| (p - mean).norm()).sum::<f64>() / n;
    let s = if mean_dist > 1e-12 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    let t = Matrix3::new(s, 0.0, -s * mean.x, 0.0, s, -s * mean.y, 0.0, 0.0, 1.0);
    let moved = pts.iter().map(|p| (p - mean) * s).collect();
    (t, moved)
}
