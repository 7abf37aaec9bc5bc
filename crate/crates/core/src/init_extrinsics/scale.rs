//! Metric scale of a pairwise baseline from the known marker spacings.
//!
//! Triangulating a wand sighting under a unit-baseline pose gives marker
//! distances proportional to the true ones: scaling the baseline by `k`
//! scales every triangulated point by `k`. The search therefore triangulates
//! once at unit scale and golden-sections over `k` on the median absolute
//! deviation between `k`-scaled segment lengths and the reference lengths.

use thiserror::Error;

use crate::geometry::NormalizedPoint;
use crate::optim::golden_section_min;
use crate::wand::WandSpec;

use super::essential::{triangulate_two_view, RelativePoseCandidate};
use super::Correspondence;
use crate::geometry::CameraPose;

/// One wand sighting matched across the camera pair, normalized coordinates.
#[derive(Debug, Clone, Copy)]
pub struct PairedTriple {
    pub a: [NormalizedPoint; 3],
    pub b: [NormalizedPoint; 3],
    pub timestamp: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScaleError {
    #[error("no usable paired triples for scale recovery")]
    NoTriples,
    #[error("scale objective minimized at the bracket boundary ({at} m); wrong pose candidate")]
    NoBracket { at: f64 },
}

/// Collects paired triples from the timestamps whose three markers are all
/// RANSAC inliers.
pub fn paired_triples_from_inliers(
    corr: &[Correspondence],
    inliers: &[usize],
) -> Vec<PairedTriple> {
    use std::collections::BTreeMap;
    let mut by_time: BTreeMap<i64, [Option<&Correspondence>; 3]> = BTreeMap::new();
    for &i in inliers {
        let c = &corr[i];
        let key = (c.timestamp * 1e6).round() as i64;
        by_time.entry(key).or_default()[c.marker_index] = Some(c);
    }
    by_time
        .values()
        .filter_map(|slots| {
            let [Some(c0), Some(c1), Some(c2)] = slots else {
                return None;
            };
            Some(PairedTriple {
                a: [c0.a, c1.a, c2.a],
                b: [c0.b, c1.b, c2.b],
                timestamp: c0.timestamp,
            })
        })
        .collect()
}

/// Recovers the metric baseline scale `k` by golden-section search over
/// `bracket`, minimizing the median absolute error between triangulated
/// inter-marker distances and the reference lengths.
///
/// Converges the bracket below 1e-8 m; a minimum at the bracket edge means
/// the pose candidate cannot explain the wand and is reported as
/// [`ScaleError::NoBracket`].
pub fn recover_scale(
    pose: &RelativePoseCandidate,
    triples: &[PairedTriple],
    spec: &WandSpec,
    bracket: (f64, f64),
) -> Result<f64, ScaleError> {
    let unit_pose = CameraPose::new(pose.rotation, pose.translation_dir);
    // Segment lengths at unit baseline, one entry per (triple, segment).
    let mut unit_lengths: Vec<(f64, f64)> = Vec::new(); // (d_unit, l_ref)
    for triple in triples {
        let pts: Vec<_> = (0..3)
            .map(|i| triangulate_two_view(&unit_pose, &triple.a[i], &triple.b[i]))
            .collect();
        let (Some(x0), Some(x1), Some(x2)) = (pts[0], pts[1], pts[2]) else {
            continue;
        };
        if x0.z <= 0.0 || x1.z <= 0.0 || x2.z <= 0.0 {
            continue;
        }
        unit_lengths.push(((x1 - x0).norm(), spec.l_ref_0));
        unit_lengths.push(((x2 - x1).norm(), spec.l_ref_1));
    }
    if unit_lengths.is_empty() {
        return Err(ScaleError::NoTriples);
    }

    let objective = |k: f64| -> f64 {
        let mut errs: Vec<f64> = unit_lengths
            .iter()
            .map(|&(d, l)| (k * d - l).abs())
            .collect();
        errs.sort_by(|a, b| a.total_cmp(b));
        let n = errs.len();
        if n % 2 == 1 {
            errs[n / 2]
        } else {
            0.5 * (errs[n / 2 - 1] + errs[n / 2])
        }
    };

    let (k, _) = golden_section_min(objective, bracket.0, bracket.1, 1e-8);
    let width = bracket.1 - bracket.0;
    if k - bracket.0 < 1e-6 * width || bracket.1 - k < 1e-6 * width {
        return Err(ScaleError::NoBracket { at: k });
    }
    Ok(k)
}
