//! Essential matrix construction, SVD decomposition and the cheirality vote.

use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::geometry::{CameraPose, NormalizedPoint, Point3, Vec3};

use super::{Correspondence, FundamentalMatrix};

/// Calibrated epipolar matrix: two equal singular values, third zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialMatrix(pub Matrix3<f64>);

/// No decomposition candidate puts at least 90% of the points in front of
/// both cameras; the inlier set is corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("cheirality vote ambiguous (best candidate: {best_fraction:.2} positive)")]
pub struct CheiralityAmbiguous {
    pub best_fraction: f64,
}

/// Relative pose of camera B with respect to camera A, translation defined
/// up to scale.
#[derive(Debug, Clone, Copy)]
pub struct RelativePoseCandidate {
    pub rotation: UnitQuaternion<f64>,
    /// Unit-norm translation direction.
    pub translation_dir: Vec3,
    /// Points with positive depth in both cameras under this candidate.
    pub inlier_count: usize,
    /// Fraction of the vote the winning candidate received.
    pub cheirality_fraction: f64,
}

/// `E = Kb^T F Ka`, projected onto the essential manifold (singular values
/// `(s, s, 0)` with `s` the mean of the two largest).
pub fn essential_from_fundamental(
    f: &FundamentalMatrix,
    ka: &Matrix3<f64>,
    kb: &Matrix3<f64>,
) -> EssentialMatrix {
    let raw = kb.transpose() * f.0 * ka;
    let svd = raw.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let s = 0.5 * (svd.singular_values[0] + svd.singular_values[1]);
    EssentialMatrix(u * Matrix3::from_diagonal(&Vector3::new(s, s, 0.0)) * vt)
}

/// Linear two-view triangulation with `Pa = [I|0]`, `Pb = [R|t]`.
///
/// Returns the point in camera A coordinates, or `None` when the
/// homogeneous solution is at infinity.
pub fn triangulate_two_view(
    pose_b: &CameraPose,
    a: &NormalizedPoint,
    b: &NormalizedPoint,
) -> Option<Point3> {
    let r = pose_b.rotation_matrix();
    let t = pose_b.translation;
    // Rows of A X = 0 for X homogeneous; camera A is [I|0].
    let mut m = Matrix4::<f64>::zeros();
    m.set_row(0, &nalgebra::RowVector4::new(1.0, 0.0, -a.x, 0.0));
    m.set_row(1, &nalgebra::RowVector4::new(0.0, 1.0, -a.y, 0.0));
    let row2 = nalgebra::RowVector4::new(
        r[(0, 0)] - b.x * r[(2, 0)],
        r[(0, 1)] - b.x * r[(2, 1)],
        r[(0, 2)] - b.x * r[(2, 2)],
        t.x - b.x * t.z,
    );
    let row3 = nalgebra::RowVector4::new(
        r[(1, 0)] - b.y * r[(2, 0)],
        r[(1, 1)] - b.y * r[(2, 1)],
        r[(1, 2)] - b.y * r[(2, 2)],
        t.y - b.y * t.z,
    );
    m.set_row(2, &row2);
    m.set_row(3, &row3);

    let eig = (m.transpose() * m).symmetric_eigen();
    let mut min_idx = 0;
    for i in 1..4 {
        if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
            min_idx = i;
        }
    }
    let h = eig.eigenvectors.column(min_idx);
    if h[3].abs() < 1e-12 * h.norm() {
        return None;
    }
    Some(Point3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
}

/// Linear n-view triangulation on normalized coordinates.
pub fn triangulate_nview(views: &[(CameraPose, NormalizedPoint)]) -> Option<Point3> {
    if views.len() < 2 {
        return None;
    }
    let mut ata = Matrix4::<f64>::zeros();
    for (pose, p) in views {
        let r = pose.rotation_matrix();
        let t = pose.translation;
        let rows = [
            nalgebra::RowVector4::new(
                r[(0, 0)] - p.x * r[(2, 0)],
                r[(0, 1)] - p.x * r[(2, 1)],
                r[(0, 2)] - p.x * r[(2, 2)],
                t.x - p.x * t.z,
            ),
            nalgebra::RowVector4::new(
                r[(1, 0)] - p.y * r[(2, 0)],
                r[(1, 1)] - p.y * r[(2, 1)],
                r[(1, 2)] - p.y * r[(2, 2)],
                t.y - p.y * t.z,
            ),
        ];
        for row in rows {
            ata += row.transpose() * row;
        }
    }
    let eig = ata.symmetric_eigen();
    let mut min_idx = 0;
    for i in 1..4 {
        if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
            min_idx = i;
        }
    }
    let h = eig.eigenvectors.column(min_idx);
    if h[3].abs() < 1e-12 * h.norm() {
        return None;
    }
    Some(Point3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
}

/// Splits `E` into the four `(R, +/-t)` candidates and picks the one that
/// triangulates the most correspondences in front of both cameras.
pub fn decompose_essential(
    e: &EssentialMatrix,
    correspondences: &[Correspondence],
) -> Result<RelativePoseCandidate, CheiralityAmbiguous> {
    assert!(
        !correspondences.is_empty(),
        "cheirality vote needs at least one correspondence"
    );
    let svd = e.0.svd(true, true);
    let mut u = svd.u.unwrap();
    let mut vt = svd.v_t.unwrap();
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    if vt.determinant() < 0.0 {
        vt.row_mut(2).neg_mut();
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * vt;
    let r2 = u * w.transpose() * vt;
    let t = u.column(2).normalize();

    let mut best: Option<(usize, CameraPose)> = None;
    for r in [r1, r2] {
        // R is orthonormal by construction (det-corrected U W V^T).
        let q = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r));
        for sign in [1.0, -1.0] {
            let pose = CameraPose::new(q, Vec3::from(sign * t));
            let count = correspondences
                .iter()
                .filter(|c| {
                    triangulate_two_view(&pose, &c.a, &c.b)
                        .map(|p| {
                            let pb = pose.transform_point(&p);
                            p.z > 0.0 && pb.z > 0.0
                        })
                        .unwrap_or(false)
                })
                .count();
            if best.as_ref().map_or(true, |(bc, _)| count > *bc) {
                best = Some((count, pose));
            }
        }
    }
    let (count, pose) = best.unwrap();
    let fraction = count as f64 / correspondences.len() as f64;
    if fraction <= 0.9 {
        return Err(CheiralityAmbiguous {
            best_fraction: fraction,
        });
    }
    Ok(RelativePoseCandidate {
        rotation: pose.rotation,
        translation_dir: pose.translation,
        inlier_count: count,
        cheirality_fraction: fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn skew(v: &Vec3) -> Matrix3<f64> {
        Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
    }

    fn correspondences_for(pose: &CameraPose, n: usize, seed: u64) -> Vec<Correspondence> {
        let mut rng = crate::rng::rng_from(seed, "essential-test");
        (0..n)
            .map(|i| {
                let p = Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(2.0..6.0),
                );
                let pb = pose.transform_point(&p);
                Correspondence {
                    a: NormalizedPoint::new(p.x / p.z, p.y / p.z),
                    b: NormalizedPoint::new(pb.x / pb.z, pb.y / pb.z),
                    timestamp: i as f64,
                    marker_index: i % 3,
                }
            })
            .collect()
    }

    #[test]
    fn identity_intrinsics_projects_to_essential_manifold() {
        let f = FundamentalMatrix(Matrix3::new(
            0.0, -0.5, 0.1, 0.5, 0.0, -0.7, -0.1, 0.7, 0.02,
        ));
        let e = essential_from_fundamental(&f, &Matrix3::identity(), &Matrix3::identity());
        let s = e.0.svd(false, false).singular_values;
        assert_relative_eq!(s[0], s[1], epsilon = 1e-9 * s[0]);
        assert!(s[2] < 1e-9 * s[0]);
    }

    #[test]
    fn essential_equals_skew_t_times_r() {
        let pose = CameraPose::from_rotvec(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0));
        let e_true = skew(&pose.translation) * pose.rotation_matrix();
        // Build F from E (identity intrinsics) and round trip.
        let e = essential_from_fundamental(
            &FundamentalMatrix(e_true),
            &Matrix3::identity(),
            &Matrix3::identity(),
        );
        // up to scale
        let scale = e_true.norm() / e.0.norm();
        let diff = (e.0 * scale - e_true).norm().min((e.0 * scale + e_true).norm());
        assert!(diff < 1e-9, "diff {diff}");
    }

    #[test]
    fn decompose_pure_x_translation() {
        let pose = CameraPose::from_rotvec(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0));
        let corr = correspondences_for(&pose, 50, 1);
        let e = EssentialMatrix(skew(&pose.translation) * pose.rotation_matrix());
        let cand = decompose_essential(&e, &corr).unwrap();
        assert!(cand.rotation.angle() < 1e-9);
        assert_relative_eq!(cand.translation_dir, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-9);
        assert_eq!(cand.inlier_count, 50);
    }

    #[test]
    fn decompose_recovers_rotation_and_direction() {
        let angle = 10f64.to_radians();
        let pose = CameraPose::from_rotvec(
            Vec3::new(0.0, angle, 0.0),
            Vec3::new(0.5, 0.0, 0.1),
        );
        let corr = correspondences_for(&pose, 80, 2);
        let e = EssentialMatrix(skew(&pose.translation.normalize()) * pose.rotation_matrix());
        let cand = decompose_essential(&e, &corr).unwrap();
        assert!(cand.rotation.angle_to(&pose.rotation) < 1e-6);
        let dir_err = (cand.translation_dir - pose.translation.normalize()).norm();
        assert!(dir_err < 1e-6, "direction error {dir_err}");
    }

    #[test]
    fn mirror_corrupted_inliers_are_ambiguous() {
        // Half the correspondences come from the true geometry (I, +t), half
        // from its mirror (I, -t). Every candidate leaves at least half the
        // points behind a camera, so the vote cannot clear 90%.
        let t = Vec3::new(1.0, 0.0, 0.0);
        let pose_pos = CameraPose::from_rotvec(Vec3::zeros(), t);
        let pose_neg = CameraPose::from_rotvec(Vec3::zeros(), -t);
        let mut rng = crate::rng::rng_from(3, "mirrored");
        let corr: Vec<Correspondence> = (0..40)
            .map(|i| {
                let p = Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(2.0..6.0),
                );
                let pose = if i % 2 == 0 { &pose_pos } else { &pose_neg };
                let pb = pose.transform_point(&p);
                Correspondence {
                    a: NormalizedPoint::new(p.x / p.z, p.y / p.z),
                    b: NormalizedPoint::new(pb.x / pb.z, pb.y / pb.z),
                    timestamp: i as f64,
                    marker_index: i % 3,
                }
            })
            .collect();
        let e = EssentialMatrix(skew(&t) * Matrix3::identity());
        match decompose_essential(&e, &corr) {
            Err(CheiralityAmbiguous { best_fraction }) => {
                assert!(best_fraction <= 0.9);
            }
            Ok(c) => panic!(
                "expected ambiguity, got fraction {}",
                c.cheirality_fraction
            ),
        }
    }

    #[test]
    fn triangulation_recovers_known_point() {
        let pose = CameraPose::from_rotvec(Vec3::new(0.05, -0.1, 0.0), Vec3::new(0.8, 0.1, 0.0));
        let p = Point3::new(0.3, -0.2, 4.0);
        let pb = pose.transform_point(&p);
        let x = triangulate_two_view(
            &pose,
            &NormalizedPoint::new(p.x / p.z, p.y / p.z),
            &NormalizedPoint::new(pb.x / pb.z, pb.y / pb.z),
        )
        .unwrap();
        assert!((x - p).norm() < 1e-9);
    }
}
