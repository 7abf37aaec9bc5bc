//! Residual blocks and their analytic Jacobians.
//!
//! Three families:
//! - reprojection: observed pixel minus the projection of the marker, per
//!   (camera, marker); behind-camera projections contribute a fixed penalty
//!   with zero Jacobian, so steps that push points behind a camera raise the
//!   cost and get rejected.
//! - linearity: the cross product of the two wand segments, per timestamp.
//! - distance: signed deviations of the two segment lengths from the
//!   reference spacings, per timestamp. The absolute-value form has the same
//!   zero set but is not differentiable at the optimum; the signed split is.
//!
//! Pose Jacobians are taken in the left-multiplicative tangent frame used by
//! [`CameraPose::retract`]: `x_cam(d) = exp([dtheta]) R X + t + dt`.

use nalgebra::{Matrix2x3, Matrix3, RowVector3, SMatrix, Vector2, Vector3};

use crate::geometry::{CameraIntrinsics, CameraPose, Point3, Vec3, EPS_Z};
use crate::wand::WandSpec;

/// Penalty residual per coordinate for behind-camera projections, pixels.
pub const BEHIND_CAMERA_PENALTY: f64 = 1e3;

pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Reprojection residual `observed - projected` with Jacobians.
pub struct ReprojectionBlock {
    pub residual: Vector2<f64>,
    /// d residual / d (dtheta, dt), 2x6.
    pub j_pose: SMatrix<f64, 2, 6>,
    /// d residual / d point, 2x3.
    pub j_point: Matrix2x3<f64>,
    /// d residual / d (fx, fy, cx, cy, k1, k2, p1, p2, k3), 2x9.
    pub j_intrinsics: SMatrix<f64, 2, 9>,
    pub behind: bool,
}

pub fn reprojection_block(
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    point: &Point3,
    observed: Vector2<f64>,
    with_jacobians: bool,
) -> ReprojectionBlock {
    let p_cam = pose.transform_point(point);
    if p_cam.z <= EPS_Z {
        return ReprojectionBlock {
            residual: Vector2::new(BEHIND_CAMERA_PENALTY, BEHIND_CAMERA_PENALTY),
            j_pose: SMatrix::zeros(),
            j_point: Matrix2x3::zeros(),
            j_intrinsics: SMatrix::zeros(),
            behind: true,
        };
    }

    let [k1, k2, p1, p2, k3] = intr.dist;
    let inv_z = 1.0 / p_cam.z;
    let xp = p_cam.x * inv_z;
    let yp = p_cam.y * inv_z;
    let r2 = xp * xp + yp * yp;
    let r4 = r2 * r2;
    let r6 = r4 * r2;
    let radial = 1.0 + k1 * r2 + k2 * r4 + k3 * r6;
    let xy = xp * yp;
    let xd = radial * xp + 2.0 * p1 * xy + p2 * (r2 + 2.0 * xp * xp);
    let yd = radial * yp + p1 * (r2 + 2.0 * yp * yp) + 2.0 * p2 * xy;
    let u = intr.fx * xd + intr.cx;
    let v = intr.fy * yd + intr.cy;
    let residual = Vector2::new(observed.x - u, observed.y - v);

    if !with_jacobians {
        return ReprojectionBlock {
            residual,
            j_pose: SMatrix::zeros(),
            j_point: Matrix2x3::zeros(),
            j_intrinsics: SMatrix::zeros(),
            behind: false,
        };
    }

    // d(xd, yd) / d(xp, yp)
    let dradial = k1 + 2.0 * k2 * r2 + 3.0 * k3 * r4;
    let dxd_dxp = radial + 2.0 * xp * xp * dradial + 2.0 * p1 * yp + 6.0 * p2 * xp;
    let dxd_dyp = 2.0 * xy * dradial + 2.0 * p1 * xp + 2.0 * p2 * yp;
    let dyd_dxp = 2.0 * xy * dradial + 2.0 * p1 * xp + 2.0 * p2 * yp;
    let dyd_dyp = radial + 2.0 * yp * yp * dradial + 6.0 * p1 * yp + 2.0 * p2 * xp;

    // d(u, v) / d p_cam via d(xp, yp)/d p_cam = [1/z, 0, -x/z^2; 0, 1/z, -y/z^2]
    let du = RowVector3::new(
        intr.fx * dxd_dxp * inv_z,
        intr.fx * dxd_dyp * inv_z,
        intr.fx * (dxd_dxp * (-xp * inv_z) + dxd_dyp * (-yp * inv_z)),
    );
    let dv = RowVector3::new(
        intr.fy * dyd_dxp * inv_z,
        intr.fy * dyd_dyp * inv_z,
        intr.fy * (dyd_dxp * (-xp * inv_z) + dyd_dyp * (-yp * inv_z)),
    );
    let dpix_dpcam = Matrix2x3::from_rows(&[du, dv]);

    // p_cam = exp([dtheta]) R X + t + dt
    let rx = pose.rotation * point.coords;
    let dpcam_dtheta = -skew(&rx);
    let j_pi_pose = dpix_dpcam * dpcam_dtheta; // 2x3 for dtheta
    let mut j_pose = SMatrix::<f64, 2, 6>::zeros();
    j_pose.fixed_view_mut::<2, 3>(0, 0).copy_from(&(-j_pi_pose));
    j_pose
        .fixed_view_mut::<2, 3>(0, 3)
        .copy_from(&(-dpix_dpcam)); // dt enters p_cam directly

    let j_point = -(dpix_dpcam * pose.rotation_matrix());

    // d(u, v) / d intrinsics, residual sign folded in.
    let mut j_intr = SMatrix::<f64, 2, 9>::zeros();
    j_intr[(0, 0)] = -xd;
    j_intr[(1, 1)] = -yd;
    j_intr[(0, 2)] = -1.0;
    j_intr[(1, 3)] = -1.0;
    j_intr[(0, 4)] = -intr.fx * xp * r2;
    j_intr[(0, 5)] = -intr.fx * xp * r4;
    j_intr[(0, 6)] = -intr.fx * 2.0 * xy;
    j_intr[(0, 7)] = -intr.fx * (r2 + 2.0 * xp * xp);
    j_intr[(0, 8)] = -intr.fx * xp * r6;
    j_intr[(1, 4)] = -intr.fy * yp * r2;
    j_intr[(1, 5)] = -intr.fy * yp * r4;
    j_intr[(1, 6)] = -intr.fy * (r2 + 2.0 * yp * yp);
    j_intr[(1, 7)] = -intr.fy * 2.0 * xy;
    j_intr[(1, 8)] = -intr.fy * yp * r6;

    ReprojectionBlock {
        residual,
        j_pose,
        j_point,
        j_intrinsics: j_intr,
        behind: false,
    }
}

/// Wand linearity residual: `lambda * (X0 - X1) x (X1 - X2)`.
pub struct LinearityBlock {
    pub residual: Vector3<f64>,
    /// d residual / d [X0, X1, X2], 3x9.
    pub jacobian: SMatrix<f64, 3, 9>,
}

pub fn linearity_block(points: &[Point3; 3], lambda: f64, with_jacobians: bool) -> LinearityBlock {
    let u = points[0] - points[1];
    let v = points[1] - points[2];
    let residual = lambda * u.cross(&v);
    let mut jacobian = SMatrix::<f64, 3, 9>::zeros();
    if with_jacobians {
        let su = skew(&u);
        let sv = skew(&v);
        jacobian
            .fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(-lambda * sv));
        jacobian
            .fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(lambda * (sv + su)));
        jacobian
            .fixed_view_mut::<3, 3>(0, 6)
            .copy_from(&(-lambda * su));
    }
    LinearityBlock { residual, jacobian }
}

/// Wand spacing residual: `lambda * (|X0-X1| - l0, |X1-X2| - l1)`.
pub struct DistanceBlock {
    pub residual: Vector2<f64>,
    /// d residual / d [X0, X1, X2], 2x9.
    pub jacobian: SMatrix<f64, 2, 9>,
}

pub fn distance_block(
    points: &[Point3; 3],
    spec: &WandSpec,
    lambda: f64,
    with_jacobians: bool,
) -> DistanceBlock {
    let d0 = points[0] - points[1];
    let d1 = points[1] - points[2];
    let n0 = d0.norm();
    let n1 = d1.norm();
    let residual = Vector2::new(lambda * (n0 - spec.l_ref_0), lambda * (n1 - spec.l_ref_1));
    let mut jacobian = SMatrix::<f64, 2, 9>::zeros();
    if with_jacobians && n0 > 1e-12 && n1 > 1e-12 {
        let g0 = lambda * d0 / n0;
        let g1 = lambda * d1 / n1;
        jacobian.fixed_view_mut::<1, 3>(0, 0).copy_from(&g0.transpose());
        jacobian
            .fixed_view_mut::<1, 3>(0, 3)
            .copy_from(&(-g0).transpose());
        jacobian.fixed_view_mut::<1, 3>(1, 3).copy_from(&g1.transpose());
        jacobian
            .fixed_view_mut::<1, 3>(1, 6)
            .copy_from(&(-g1).transpose());
    }
    DistanceBlock { residual, jacobian }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use approx::assert_relative_eq;

    #[test]
    fn zero_residual_at_exact_projection() {
        let intr = CameraIntrinsics::pinhole(500.0, 500.0, 640.0, 512.0, 1280, 1024);
        let pose = CameraPose::from_rotvec(Vec3::new(0.1, 0.0, -0.05), Vec3::new(0.2, 0.1, 1.0));
        let p = Point3::new(0.4, -0.3, 3.0);
        let px = crate::geometry::project(&intr, &pose, &p).unwrap();
        let block = reprojection_block(&intr, &pose, &p, px.as_vec(), false);
        assert!(block.residual.norm() < 1e-9);
    }

    #[test]
    fn first_order_prediction_matches_small_shift() {
        // Moving the point by +1 mm along camera z at 1 m, fx = 500.
        let intr = CameraIntrinsics::pinhole(500.0, 500.0, 640.0, 512.0, 1280, 1024);
        let pose = CameraPose::identity();
        let p = Point3::new(0.1, 0.05, 1.0);
        let px = crate::geometry::project(&intr, &pose, &p).unwrap();
        let block = reprojection_block(&intr, &pose, &p, px.as_vec(), true);

        let dz = 1e-3;
        let moved = Point3::new(p.x, p.y, p.z + dz);
        let shifted = reprojection_block(&intr, &pose, &moved, px.as_vec(), false);
        let predicted = block.j_point * Vector3::new(0.0, 0.0, dz);
        assert_relative_eq!(shifted.residual, predicted, epsilon = 1e-6);
        // analytic first-order magnitude: |d pixel| = fx * r * dz / z^2
        let expected = 500.0 * (0.1f64.hypot(0.05)) * dz / 1.0;
        assert_relative_eq!(shifted.residual.norm(), expected, epsilon = 1e-6);
    }

    #[test]
    fn behind_camera_penalty_norm() {
        let intr = CameraIntrinsics::pinhole(500.0, 500.0, 640.0, 512.0, 1280, 1024);
        let block = reprojection_block(
            &intr,
            &CameraPose::identity(),
            &Point3::new(0.0, 0.0, -1.0),
            Vector2::zeros(),
            true,
        );
        assert!(block.behind);
        assert_relative_eq!(
            block.residual.norm(),
            BEHIND_CAMERA_PENALTY * std::f64::consts::SQRT_2,
            epsilon = 1e-12
        );
        assert_eq!(block.j_point, Matrix2x3::zeros());
    }

    #[test]
    fn linearity_of_collinear_points_is_zero() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(3.0, 0.0, 0.0),
        ];
        let b = linearity_block(&pts, 10.0, false);
        assert_eq!(b.residual, Vector3::zeros());
    }

    #[test]
    fn linearity_hand_computed_cross() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        // u = (-1,0,0), v = (0,-1,0), u x v = (0,0,1)
        let b = linearity_block(&pts, 10.0, false);
        assert_relative_eq!(b.residual, Vector3::new(0.0, 0.0, 10.0), epsilon = 1e-12);
    }

    #[test]
    fn rotated_collinear_triple_stays_zero() {
        let q = nalgebra::UnitQuaternion::from_scaled_axis(Vec3::new(0.4, -0.8, 0.3));
        let base = Point3::new(0.2, -0.5, 2.0);
        let dir = q * Vec3::new(1.0, 0.0, 0.0);
        let pts = [base, base + 0.16 * dir, base + 0.48 * dir];
        let b = linearity_block(&pts, 10.0, false);
        assert!(b.residual.norm() < 1e-12);
    }

    #[test]
    fn distance_residual_cases() {
        let spec = WandSpec::default();
        let exact = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(spec.l_ref_0, 0.0, 0.0),
            Point3::new(spec.l_ref_0 + spec.l_ref_1, 0.0, 0.0),
        ];
        let b = distance_block(&exact, &spec, 100.0, false);
        assert!(b.residual.norm() < 1e-12);

        // stretch segment 0 by 2 mm
        let stretched = [
            Point3::new(-0.002, 0.0, 0.0),
            exact[1],
            exact[2],
        ];
        let b = distance_block(&stretched, &spec, 100.0, false);
        assert_relative_eq!(b.residual.x, 0.002 * 100.0, epsilon = 1e-12);
        assert_relative_eq!(b.residual.y, 0.0, epsilon = 1e-12);

        // rigid motion leaves distances unchanged
        let q = nalgebra::UnitQuaternion::from_scaled_axis(Vec3::new(-0.3, 0.2, 0.9));
        let t = Vec3::new(0.5, -1.0, 2.0);
        let moved: Vec<Point3> = exact.iter().map(|p| Point3::from(q * p.coords + t)).collect();
        let b = distance_block(&[moved[0], moved[1], moved[2]], &spec, 100.0, false);
        assert!(b.residual.norm() < 1e-12);
    }
}
