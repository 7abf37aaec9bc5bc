//! Camera models, poses and the pinhole + radial-tangential projection chain.
//!
//! Conventions used throughout the crate:
//!
//! - The world frame is the reference camera frame (camera 0).
//! - A [`CameraPose`] maps world coordinates into camera coordinates,
//!   `x_cam = R * x_world + t`, so the projection matrix is `K * [R | t]`.
//! - Rotations are stored as unit quaternions; the optimizer works on
//!   axis-angle increments applied through [`CameraPose::retract`].
//! - Distortion is the 5-coefficient radial-tangential model
//!   `(k1, k2, p1, p2, k3)`.

use nalgebra::{Matrix3, Matrix3x4, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat34 = Matrix3x4<f64>;

/// 3D point in meters, expressed in the reference-camera frame.
pub type Point3 = nalgebra::Point3<f64>;

/// Undistorted, focal-normalized image coordinates.
pub type NormalizedPoint = Vec2;

/// Cheirality cutoff: camera-frame depths below this are "behind" the camera.
pub const EPS_Z: f64 = 1e-6;

const UNDISTORT_MAX_ITERS: usize = 50;
const UNDISTORT_TOL: f64 = 1e-12;

/// Sub-pixel image location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.u, self.v)
    }
}

impl From<Vec2> for Pixel {
    fn from(v: Vec2) -> Self {
        Self { u: v.x, v: v.y }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum IntrinsicsError {
    #[error("focal length must be positive (fx={fx}, fy={fy})")]
    NonPositiveFocal { fx: f64, fy: f64 },
    #[error("principal point ({cx}, {cy}) outside the {width}x{height} sensor")]
    PrincipalPointOutside {
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    },
    #[error("sensor dimensions must be positive")]
    EmptySensor,
}

/// Point projects behind the image plane; the residual must be excluded or
/// the candidate pose rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("point is behind the camera")]
pub struct BehindCamera;

/// Fixed-point distortion inversion failed to converge; the pixel is far
/// outside the region where the distortion model is valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("undistortion did not converge in {UNDISTORT_MAX_ITERS} iterations")]
pub struct NoConvergence;

/// Fixed per-camera projection parameters: camera matrix and distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Radial-tangential coefficients `[k1, k2, p1, p2, k3]`.
    pub dist: [f64; 5],
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        dist: [f64; 5],
        width: u32,
        height: u32,
    ) -> Result<Self, IntrinsicsError> {
        if width == 0 || height == 0 {
            return Err(IntrinsicsError::EmptySensor);
        }
        if !(fx > 0.0 && fy > 0.0) {
            return Err(IntrinsicsError::NonPositiveFocal { fx, fy });
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(IntrinsicsError::PrincipalPointOutside {
                cx,
                cy,
                width,
                height,
            });
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            dist,
            width,
            height,
        })
    }

    /// Distortion-free intrinsics, handy in tests.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Self {
        Self::new(fx, fy, cx, cy, [0.0; 5], width, height).expect("valid pinhole parameters")
    }

    pub fn k_matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Applies radial-tangential distortion to normalized coordinates.
    pub fn distort(&self, p: NormalizedPoint) -> Vec2 {
        let [k1, k2, p1, p2, k3] = self.dist;
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let r4 = r2 * r2;
        let r6 = r4 * r2;
        let radial = 1.0 + k1 * r2 + k2 * r4 + k3 * r6;
        let xy = x * y;
        let dx = 2.0 * p1 * xy + p2 * (r2 + 2.0 * x * x);
        let dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * xy;
        Vec2::new(radial * x + dx, radial * y + dy)
    }

    /// Distorted normalized coordinates -> pixel.
    pub fn normalized_to_pixel(&self, distorted: Vec2) -> Pixel {
        Pixel::new(
            self.fx * distorted.x + self.cx,
            self.fy * distorted.y + self.cy,
        )
    }

    pub fn contains(&self, px: &Pixel) -> bool {
        px.u >= 0.0 && px.v >= 0.0 && px.u < self.width as f64 && px.v < self.height as f64
    }
}

/// Rigid transform taking world (reference-camera) coordinates into this
/// camera's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
}

impl CameraPose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_rotvec(rotvec: Vec3, translation: Vec3) -> Self {
        Self {
            rotation: UnitQuaternion::from_scaled_axis(rotvec),
            translation,
        }
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Point3) -> Vec3 {
        self.rotation * p.coords + self.translation
    }

    /// Composition `self * other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &CameraPose) -> CameraPose {
        CameraPose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> CameraPose {
        let inv_rot = self.rotation.inverse();
        CameraPose {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
        }
    }

    /// Camera center expressed in the world frame, `-R^T t`.
    pub fn center(&self) -> Point3 {
        Point3::from(-(self.rotation.inverse() * self.translation))
    }

    /// Left-multiplicative update used by the optimizer:
    /// `R <- exp([dtheta]x) R`, `t <- t + dt`.
    pub fn retract(&self, dtheta: Vec3, dt: Vec3) -> CameraPose {
        CameraPose {
            rotation: UnitQuaternion::from_scaled_axis(dtheta) * self.rotation,
            translation: self.translation + dt,
        }
    }

    /// Rotation angle (radians) between the two poses.
    pub fn rotation_angle_to(&self, other: &CameraPose) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }
}

/// `K * [R | t]`, the linear (distortion-free) projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix(pub Mat34);

impl ProjectionMatrix {
    pub fn new(intr: &CameraIntrinsics, pose: &CameraPose) -> Self {
        let mut rt = Mat34::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&pose.rotation_matrix());
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&pose.translation);
        ProjectionMatrix(intr.k_matrix() * rt)
    }

    /// Extrinsics-only projection `[R | t]`, for work in normalized coordinates.
    pub fn extrinsic(pose: &CameraPose) -> Self {
        let mut rt = Mat34::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&pose.rotation_matrix());
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&pose.translation);
        ProjectionMatrix(rt)
    }

    pub fn project(&self, p: &Point3) -> Result<Pixel, BehindCamera> {
        let h = self.0 * p.to_homogeneous();
        if h.z <= EPS_Z {
            return Err(BehindCamera);
        }
        Ok(Pixel::new(h.x / h.z, h.y / h.z))
    }
}

/// Projects a world point through pose, perspective division, distortion and K.
pub fn project(
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    point: &Point3,
) -> Result<Pixel, BehindCamera> {
    project_camera_frame(intr, &pose.transform_point(point))
}

/// Same as [`project`] for a point already in the camera frame.
pub fn project_camera_frame(intr: &CameraIntrinsics, p_cam: &Vec3) -> Result<Pixel, BehindCamera> {
    if p_cam.z <= EPS_Z {
        return Err(BehindCamera);
    }
    let norm = Vec2::new(p_cam.x / p_cam.z, p_cam.y / p_cam.z);
    Ok(intr.normalized_to_pixel(intr.distort(norm)))
}

/// Inverts K and the distortion model, returning undistorted normalized
/// coordinates. Fixed-point iteration on the distortion polynomial.
pub fn undistort_pixel(intr: &CameraIntrinsics, px: &Pixel) -> Result<NormalizedPoint, NoConvergence> {
    let target = Vec2::new((px.u - intr.cx) / intr.fx, (px.v - intr.cy) / intr.fy);
    let mut p = target;
    for _ in 0..UNDISTORT_MAX_ITERS {
        let [k1, k2, p1, p2, k3] = intr.dist;
        let r2 = p.x * p.x + p.y * p.y;
        let r4 = r2 * r2;
        let radial = 1.0 + k1 * r2 + k2 * r4 + k3 * r4 * r2;
        let xy = p.x * p.y;
        let dx = 2.0 * p1 * xy + p2 * (r2 + 2.0 * p.x * p.x);
        let dy = p1 * (r2 + 2.0 * p.y * p.y) + 2.0 * p2 * xy;
        p = Vec2::new((target.x - dx) / radial, (target.y - dy) / radial);
        if (intr.distort(p) - target).norm() < UNDISTORT_TOL {
            return Ok(p);
        }
    }
    Err(NoConvergence)
}
