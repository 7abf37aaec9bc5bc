//! Pairwise extrinsic initialization.
//!
//! For every camera pair with enough shared wand sightings: a fundamental
//! matrix from 7-point RANSAC on undistorted normalized coordinates, the
//! essential matrix, its decomposition with a cheirality vote, and the
//! metric scale of the baseline from the known marker spacings. Pairwise
//! results are then chained into per-camera poses over a maximum-spanning
//! tree rooted at the reference camera.

mod essential;
mod pose_graph;
mod ransac;
mod scale;
mod seven_point;

pub use essential::{
    decompose_essential, essential_from_fundamental, triangulate_nview, triangulate_two_view,
    CheiralityAmbiguous, EssentialMatrix, RelativePoseCandidate,
};
pub use pose_graph::{build_pose_graph, DisconnectedGraph, PairwiseResult};
pub use ransac::{ransac_fundamental, sampson_distance, RansacError, RansacOptions, RansacResult};
pub use scale::{recover_scale, PairedTriple, ScaleError};
pub use seven_point::{seven_point, DegenerateConfiguration};

use nalgebra::Matrix3;
use thiserror::Error;

use crate::geometry::{undistort_pixel, CameraIntrinsics, CameraPose, NormalizedPoint};
use crate::observations::ObservationSet;
use crate::wand::WandSpec;

/// 3x3 epipolar matrix on normalized coordinates, defined up to scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix(pub Matrix3<f64>);

impl FundamentalMatrix {
    /// Epipolar residual `b^T F a`.
    pub fn epipolar_residual(&self, a: &NormalizedPoint, b: &NormalizedPoint) -> f64 {
        let av = nalgebra::Vector3::new(a.x, a.y, 1.0);
        let bv = nalgebra::Vector3::new(b.x, b.y, 1.0);
        bv.dot(&(self.0 * av))
    }
}

/// A pair of matched marker projections in two cameras, undistorted and
/// focal-normalized, from the same trigger instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub a: NormalizedPoint,
    pub b: NormalizedPoint,
    pub timestamp: f64,
    pub marker_index: usize,
}

/// Builds the correspondence list between two cameras from an observation
/// set. Markers whose undistortion fails are skipped.
pub fn correspondences_between(
    set: &ObservationSet,
    intrinsics: &[CameraIntrinsics],
    cam_a: usize,
    cam_b: usize,
) -> Vec<Correspondence> {
    let mut out = Vec::new();
    for (_, group) in set.time_groups() {
        let oa = group.iter().find(|o| o.camera_index == cam_a);
        let ob = group.iter().find(|o| o.camera_index == cam_b);
        let (Some(oa), Some(ob)) = (oa, ob) else { continue };
        for m in 0..3 {
            let (Ok(a), Ok(b)) = (
                undistort_pixel(&intrinsics[cam_a], &oa.markers[m]),
                undistort_pixel(&intrinsics[cam_b], &ob.markers[m]),
            ) else {
                continue;
            };
            out.push(Correspondence {
                a,
                b,
                timestamp: oa.timestamp,
                marker_index: m,
            });
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum InitError {
    #[error(transparent)]
    Disconnected(#[from] DisconnectedGraph),
    #[error("camera pair ({0}, {1}): {2}")]
    PairFailed(usize, usize, String),
}

/// Options for the full initialization chain.
#[derive(Debug, Clone, Copy)]
pub struct InitOptions {
    pub ransac: RansacOptions,
    /// Scale search bracket, meters.
    pub scale_bracket: (f64, f64),
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            ransac: RansacOptions::default(),
            scale_bracket: (0.1, 20.0),
        }
    }
}

/// Runs the full pairwise chain and returns one initial pose per camera
/// (camera 0 fixed to the identity).
///
/// Pairs that fail anywhere along the chain (too few correspondences, too
/// few inliers, ambiguous cheirality, no scale bracket) are simply excluded
/// from the pose graph; only a disconnected graph is fatal.
pub fn initialize_extrinsics(
    set: &ObservationSet,
    intrinsics: &[CameraIntrinsics],
    spec: &WandSpec,
    options: &InitOptions,
) -> Result<Vec<CameraPose>, InitError> {
    let n = set.num_cameras();
    let mut pairwise = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let corr = correspondences_between(set, intrinsics, a, b);
            if corr.len() < options.ransac.min_inliers.max(8) {
                continue;
            }
            let Ok(rr) = ransac_fundamental(&corr, &options.ransac) else {
                continue;
            };
            let e = essential_from_fundamental(
                &rr.fundamental,
                &Matrix3::identity(),
                &Matrix3::identity(),
            );
            let inlier_corr: Vec<Correspondence> =
                rr.inliers.iter().map(|&i| corr[i]).collect();
            let Ok(candidate) = decompose_essential(&e, &inlier_corr) else {
                continue;
            };
            let triples = scale::paired_triples_from_inliers(&corr, &rr.inliers);
            let Ok(k) = recover_scale(&candidate, &triples, spec, options.scale_bracket) else {
                continue;
            };
            pairwise.push(PairwiseResult {
                cam_a: a,
                cam_b: b,
                pose: CameraPose::new(candidate.rotation, candidate.translation_dir * k),
                inlier_count: rr.inliers.len(),
            });
        }
    }
    Ok(build_pose_graph(n, &pairwise)?)
}
