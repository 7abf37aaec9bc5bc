//! Chains pairwise relative poses into per-camera initial poses.

use thiserror::Error;

use crate::geometry::CameraPose;

/// Metric relative pose of `cam_b` with respect to `cam_a` plus its support.
#[derive(Debug, Clone, Copy)]
pub struct PairwiseResult {
    pub cam_a: usize,
    pub cam_b: usize,
    /// Maps camera-A coordinates into camera-B coordinates.
    pub pose: CameraPose,
    pub inlier_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cameras {orphaned:?} share no usable pair with the reference component")]
pub struct DisconnectedGraph {
    pub orphaned: Vec<usize>,
}

/// Maximum-spanning-tree composition over inlier counts, rooted at camera 0.
///
/// Edges are greedily added in decreasing inlier order (ties broken by the
/// camera indices, so the result is deterministic). Cameras unreachable from
/// camera 0 produce [`DisconnectedGraph`].
pub fn build_pose_graph(
    num_cameras: usize,
    pairwise: &[PairwiseResult],
) -> Result<Vec<CameraPose>, DisconnectedGraph> {
    assert!(num_cameras >= 1);
    let mut edges: Vec<&PairwiseResult> = pairwise.iter().collect();
    edges.sort_by(|x, y| {
        y.inlier_count
            .cmp(&x.inlier_count)
            .then(x.cam_a.cmp(&y.cam_a))
            .then(x.cam_b.cmp(&y.cam_b))
    });

    let mut poses = vec![CameraPose::identity(); num_cameras];
    let mut known = vec![false; num_cameras];
    known[0] = true;

    // Prim-style growth: repeatedly take the strongest edge crossing the cut.
    loop {
        let mut attached = false;
        for e in &edges {
            let (pose_new, idx_new) = match (known[e.cam_a], known[e.cam_b]) {
                (true, false) => (e.pose.compose(&poses[e.cam_a]), e.cam_b),
                (false, true) => (e.pose.inverse().compose(&poses[e.cam_b]), e.cam_a),
                _ => continue,
            };
            poses[idx_new] = pose_new;
            known[idx_new] = true;
            attached = true;
            break;
        }
        if !attached {
            break;
        }
    }

    let orphaned: Vec<usize> = (0..num_cameras).filter(|&i| !known[i]).collect();
    if !orphaned.is_empty() {
        return Err(DisconnectedGraph { orphaned });
    }
    Ok(poses)
}
