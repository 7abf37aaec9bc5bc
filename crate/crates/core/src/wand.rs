//! Wand geometry and marker identification.
//!
//! The wand carries three collinear markers at unequal spacings, so the image
//! distance ratio `|p0 p1| / |p1 p2|` identifies which end is which from any
//! viewpoint. Labeling picks the most collinear 3-subset of blob candidates
//! whose ratio matches the wand, and orders its endpoints accordingly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pixel, Vec2};

/// Physical wand description. Lengths in meters, frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WandSpec {
    /// Distance marker 0 -> marker 1.
    pub l_ref_0: f64,
    /// Distance marker 1 -> marker 2.
    pub l_ref_1: f64,
    pub blink_frequency_hz: f64,
    /// Manufacturing tolerance on the marker spacings.
    pub tolerance_m: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum WandSpecError {
    #[error("marker spacings must be positive (got {0} and {1})")]
    NonPositiveLength(f64, f64),
    #[error("marker spacings must differ for unambiguous ordering")]
    EqualLengths,
    #[error("blink frequency must be in (0, 600] Hz, got {0}")]
    FrequencyOutOfRange(f64),
}

impl WandSpec {
    pub fn new(
        l_ref_0: f64,
        l_ref_1: f64,
        blink_frequency_hz: f64,
        tolerance_m: f64,
    ) -> Result<Self, WandSpecError> {
        let spec = Self {
            l_ref_0,
            l_ref_1,
            blink_frequency_hz,
            tolerance_m,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), WandSpecError> {
        if self.l_ref_0 <= 0.0 || self.l_ref_1 <= 0.0 {
            return Err(WandSpecError::NonPositiveLength(self.l_ref_0, self.l_ref_1));
        }
        if self.l_ref_0 == self.l_ref_1 {
            return Err(WandSpecError::EqualLengths);
        }
        if !(self.blink_frequency_hz > 0.0 && self.blink_frequency_hz <= 600.0) {
            return Err(WandSpecError::FrequencyOutOfRange(self.blink_frequency_hz));
        }
        Ok(())
    }

    /// Reference image-distance ratio `l_ref_0 / l_ref_1`.
    pub fn length_ratio(&self) -> f64 {
        self.l_ref_0 / self.l_ref_1
    }

    pub fn total_length(&self) -> f64 {
        self.l_ref_0 + self.l_ref_1
    }
}

impl Default for WandSpec {
    fn default() -> Self {
        Self {
            l_ref_0: 0.16,
            l_ref_1: 0.32,
            blink_frequency_hz: 500.0,
            tolerance_m: 0.002,
        }
    }
}

/// Ordered marker centers of one wand sighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledTriple {
    pub p0: Pixel,
    pub p1: Pixel,
    pub p2: Pixel,
    pub timestamp: f64,
    pub camera_index: usize,
}

impl LabeledTriple {
    pub fn markers(&self) -> [Pixel; 3] {
        [self.p0, self.p1, self.p2]
    }
}

/// No unambiguous wand in this observation; the observation is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no unambiguous wand triple found")]
pub struct NoWand;

/// Acceptance gates for [`label_markers`].
#[derive(Debug, Clone, Copy)]
pub struct LabelGates {
    /// Maximum point-to-line distance, pixels.
    pub max_collinearity_px: f64,
    /// Relative tolerance on the image distance ratio.
    pub ratio_tolerance: f64,
}

impl Default for LabelGates {
    fn default() -> Self {
        Self {
            max_collinearity_px: 2.0,
            ratio_tolerance: 0.2,
        }
    }
}

/// Candidate triple after geometric analysis of one 3-subset.
struct ScoredTriple {
    ordered: [Pixel; 3],
    score: f64,
}

/// Picks the 3-subset most consistent with the wand and orders its markers.
///
/// Ordering is chosen so `|p0 p1| / |p1 p2|` matches `l_ref_0 / l_ref_1`
/// rather than its reciprocal. Ambiguity (two subsets passing the gates with
/// scores within 1e-9) yields [`NoWand`]: a dropped observation is better
/// than a mislabeled one.
pub fn label_markers(blobs: &[Pixel], spec: &WandSpec) -> Result<LabeledTriple, NoWand> {
    label_markers_with(blobs, spec, &LabelGates::default())
}

pub fn label_markers_with(
    blobs: &[Pixel],
    spec: &WandSpec,
    gates: &LabelGates,
) -> Result<LabeledTriple, NoWand> {
    if blobs.len() < 3 {
        return Err(NoWand);
    }
    // Canonical processing order makes the result independent of input order.
    let mut pts: Vec<Pixel> = blobs.to_vec();
    pts.sort_by(|a, b| a.u.total_cmp(&b.u).then(a.v.total_cmp(&b.v)));

    let rho = spec.length_ratio();
    let mut best: Option<ScoredTriple> = None;
    let mut second_score = f64::INFINITY;

    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            for k in (j + 1)..pts.len() {
                let Some(cand) = score_subset([pts[i], pts[j], pts[k]], rho, gates) else {
                    continue;
                };
                match &best {
                    Some(b) if cand.score >= b.score => {
                        second_score = second_score.min(cand.score);
                    }
                    _ => {
                        if let Some(b) = &best {
                            second_score = second_score.min(b.score);
                        }
                        best = Some(cand);
                    }
                }
            }
        }
    }

    let best = best.ok_or(NoWand)?;
    if (second_score - best.score).abs() < 1e-9 {
        return Err(NoWand);
    }
    Ok(LabeledTriple {
        p0: best.ordered[0],
        p1: best.ordered[1],
        p2: best.ordered[2],
        timestamp: 0.0,
        camera_index: 0,
    })
}

/// Collinearity + ratio analysis of one 3-subset. `None` when a gate fails.
fn score_subset(pts: [Pixel; 3], rho: f64, gates: &LabelGates) -> Option<ScoredTriple> {
    let v: Vec<Vec2> = pts.iter().map(Pixel::as_vec).collect();
    let centroid = (v[0] + v[1] + v[2]) / 3.0;
    let d: Vec<Vec2> = v.iter().map(|p| p - centroid).collect();

    // Principal axis of the three points (eigenvector of the 2x2 scatter).
    let (sxx, sxy, syy) = d.iter().fold((0.0, 0.0, 0.0), |acc, p| {
        (acc.0 + p.x * p.x, acc.1 + p.x * p.y, acc.2 + p.y * p.y)
    });
    let tr = sxx + syy;
    if tr < 1e-12 {
        return None; // coincident points
    }
    let det = sxx * syy - sxy * sxy;
    let lambda = 0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt());
    let axis = if sxy.abs() > 1e-15 {
        Vec2::new(lambda - syy, sxy).normalize()
    } else if sxx >= syy {
        Vec2::new(1.0, 0.0)
    } else {
        Vec2::new(0.0, 1.0)
    };

    let collinearity = d
        .iter()
        .map(|p| (p.x * axis.y - p.y * axis.x).abs())
        .fold(0.0f64, f64::max);
    if collinearity > gates.max_collinearity_px {
        return None;
    }

    // Order along the axis; the middle marker is fixed by geometry.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| d[a].dot(&axis).total_cmp(&d[b].dot(&axis)));
    let (a, m, b) = (order[0], order[1], order[2]);

    let len_am = (v[a] - v[m]).norm();
    let len_mb = (v[m] - v[b]).norm();
    if len_am < 1e-12 || len_mb < 1e-12 {
        return None;
    }

    // Forward and reversed endpoint assignment; keep the closer ratio.
    let err_fwd = (len_am / len_mb - rho).abs() / rho;
    let err_rev = (len_mb / len_am - rho).abs() / rho;
    let (ratio_err, first, last) = if err_fwd <= err_rev {
        (err_fwd, a, b)
    } else {
        (err_rev, b, a)
    };
    if ratio_err > gates.ratio_tolerance {
        return None;
    }

    Some(ScoredTriple {
        ordered: [pts[first], pts[m], pts[last]],
        score: collinearity + ratio_err,
    })
}
