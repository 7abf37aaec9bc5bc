//! Continuous wand motion: Catmull-Rom position spline plus a slerped
//! direction spline for the wand axis.

use rand::Rng;

use crate::geometry::{Point3, Vec3};
use crate::rng::rng_from;
use crate::wand::WandSpec;

use super::RigConfig;

/// Continuous-time wand pose over `[0, duration]`.
///
/// Marker world positions at any time satisfy the exact wand spacings and
/// collinearity by construction: markers sit at 0, `l_ref_0` and
/// `l_ref_0 + l_ref_1` along the unit axis direction.
#[derive(Debug, Clone)]
pub struct WandTrajectory {
    /// Uniform knot spacing, seconds.
    knot_dt: f64,
    /// Time of knot index 1 (index 0 is the padding knot before the start).
    t0: f64,
    positions: Vec<Point3>,
    directions: Vec<Vec3>,
    pub duration: f64,
}

impl WandTrajectory {
    /// Builds a trajectory from explicit waypoints (world frame). Waypoints
    /// are spaced `knot_dt` apart starting at t = 0; ends are padded.
    pub fn from_waypoints(
        positions: Vec<Point3>,
        directions: Vec<Vec3>,
        knot_dt: f64,
    ) -> WandTrajectory {
        assert!(positions.len() >= 2 && positions.len() == directions.len());
        let duration = (positions.len() - 1) as f64 * knot_dt;
        let mut pos = Vec::with_capacity(positions.len() + 2);
        pos.push(positions[0]);
        pos.extend_from_slice(&positions);
        pos.push(*positions.last().unwrap());
        let mut dir: Vec<Vec3> = Vec::with_capacity(directions.len() + 2);
        dir.push(directions[0]);
        dir.extend(directions.iter().map(|d| d.normalize()));
        dir.push(*directions.last().unwrap());
        WandTrajectory {
            knot_dt,
            t0: 0.0,
            positions: pos,
            directions: dir,
            duration,
        }
    }

    fn segment(&self, t: f64) -> (usize, f64) {
        let t = t.clamp(0.0, self.duration);
        let s = (t - self.t0) / self.knot_dt;
        let i = (s.floor() as usize).min(self.positions.len().saturating_sub(4));
        (i, s - i as f64)
    }

    /// Wand origin (marker 0) position.
    pub fn position(&self, t: f64) -> Point3 {
        let (i, u) = self.segment(t);
        let p0 = self.positions[i].coords;
        let p1 = self.positions[i + 1].coords;
        let p2 = self.positions[i + 2].coords;
        let p3 = self.positions[i + 3].coords;
        // Catmull-Rom as cubic Hermite with central-difference tangents.
        let m1 = (p2 - p0) * 0.5;
        let m2 = (p3 - p1) * 0.5;
        let u2 = u * u;
        let u3 = u2 * u;
        let out = p1 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + m1 * (u3 - 2.0 * u2 + u)
            + p2 * (-2.0 * u3 + 3.0 * u2)
            + m2 * (u3 - u2);
        Point3::from(out)
    }

    /// Unit wand axis direction.
    pub fn direction(&self, t: f64) -> Vec3 {
        let (i, u) = self.segment(t);
        slerp(self.directions[i + 1], self.directions[i + 2], u)
    }

    /// World positions of the three markers at `t`.
    pub fn marker_positions(&self, t: f64, spec: &WandSpec) -> [Point3; 3] {
        let p = self.position(t);
        let d = self.direction(t);
        [
            p,
            p + d * spec.l_ref_0,
            p + d * (spec.l_ref_0 + spec.l_ref_1),
        ]
    }

    /// Numerically estimated maximum speed of the wand origin, m/s.
    pub fn max_speed(&self) -> f64 {
        let dt = 1e-3;
        let mut max = 0.0f64;
        let mut t = 0.0;
        while t + dt <= self.duration {
            let v = (self.position(t + dt) - self.position(t)).norm() / dt;
            max = max.max(v);
            t += dt;
        }
        max
    }
}

/// Spherical interpolation between unit vectors.
fn slerp(a: Vec3, b: Vec3, u: f64) -> Vec3 {
    let dot = a.dot(&b).clamp(-1.0, 1.0);
    let theta = dot.acos();
    if theta < 1e-9 {
        return a;
    }
    let s = theta.sin();
    (a * ((1.0 - u) * theta).sin() + b * (u * theta).sin()) / s
}

/// Random wand sweep through the rig's working volume.
///
/// Waypoints random-walk inside the workspace box every 0.4 s with steps
/// bounded so the splined speed stays under the 2 m/s hand-motion cap; the
/// wand axis random-walks inside a 40 degree cone around the room vertical,
/// which keeps it transverse to every camera in the ring.
pub fn random_trajectory(rig: &RigConfig, duration: f64, seed: u64) -> WandTrajectory {
    let mut rng = rng_from(seed, "trajectory");
    let knot_dt = 0.4;
    let n = ((duration / knot_dt).ceil() as usize).max(1) + 1;

    let c = rig.workspace_center_room;
    let he = rig.workspace_half_extents;
    // The wand extends upward from its origin: keep the origin low enough
    // that the top marker stays inside the box.
    let wand_len = 0.48;
    let z_lo = c.z - he.z;
    let z_hi = c.z + he.z - wand_len;

    let mut positions = Vec::with_capacity(n);
    let mut directions = Vec::with_capacity(n);
    let mut p = Point3::new(c.x, c.y, 0.5 * (z_lo + z_hi));
    let mut d = Vec3::new(0.0, 0.0, 1.0);
    let max_tilt = 40f64.to_radians();

    for _ in 0..n {
        positions.push(p);
        directions.push(d);

        let step = Vec3::new(
            rng.gen_range(-0.38..0.38),
            rng.gen_range(-0.38..0.38),
            rng.gen_range(-0.30..0.30),
        );
        p = Point3::new(
            (p.x + step.x).clamp(c.x - he.x, c.x + he.x),
            (p.y + step.y).clamp(c.y - he.y, c.y + he.y),
            (p.z + step.z).clamp(z_lo, z_hi),
        );

        // Random small rotation of the axis, clamped to the cone.
        let tilt_step = Vec3::new(
            rng.gen_range(-0.25..0.25),
            rng.gen_range(-0.25..0.25),
            rng.gen_range(-0.25..0.25),
        );
        let q = nalgebra::UnitQuaternion::from_scaled_axis(tilt_step);
        let mut nd = (q * d).normalize();
        let vertical = Vec3::new(0.0, 0.0, 1.0);
        let angle = nd.dot(&vertical).clamp(-1.0, 1.0).acos();
        if angle > max_tilt {
            nd = slerp(vertical, nd, max_tilt / angle).normalize();
        }
        d = nd;
    }

    // Map waypoints from the room frame into the world (camera 0) frame.
    let world_positions: Vec<Point3> = positions
        .iter()
        .map(|p| Point3::from(rig.room_to_world.transform_point(p)))
        .collect();
    let world_dirs: Vec<Vec3> = directions
        .iter()
        .map(|d| rig.room_to_world.rotation * *d)
        .collect();

    let mut traj = WandTrajectory::from_waypoints(world_positions, world_dirs, knot_dt);
    traj.duration = duration; // trim the ceil() overshoot
    traj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::default_rig;

    #[test]
    fn markers_satisfy_wand_geometry_exactly() {
        let rig = default_rig(42);
        let spec = WandSpec::default();
        let traj = random_trajectory(&rig, 10.0, 42);
        for k in 0..200 {
            let t = k as f64 * 0.05;
            let [m0, m1, m2] = traj.marker_positions(t, &spec);
            assert!(((m1 - m0).norm() - spec.l_ref_0).abs() < 1e-12);
            assert!(((m2 - m1).norm() - spec.l_ref_1).abs() < 1e-12);
            let cross = (m1 - m0).cross(&(m2 - m1)).norm();
            assert!(cross < 1e-12, "markers not collinear: {cross}");
        }
    }

    #[test]
    fn speed_stays_under_hand_motion_cap() {
        let rig = default_rig(1);
        for seed in [0u64, 5, 42] {
            let traj = random_trajectory(&rig, 12.0, seed);
            let v = traj.max_speed();
            assert!(v < 2.0, "seed {seed}: speed {v}");
        }
    }

    #[test]
    fn waypoints_stay_in_workspace() {
        let rig = default_rig(9);
        let spec = WandSpec::default();
        let traj = random_trajectory(&rig, 15.0, 3);
        let world_to_room = rig.room_to_world.inverse();
        let c = rig.workspace_center_room;
        let he = rig.workspace_half_extents;
        for k in 0..750 {
            let t = k as f64 * 0.02;
            for m in traj.marker_positions(t, &spec) {
                let r = world_to_room.transform_point(&m);
                // The wand tip can stick out of the waypoint box by up to
                // 0.48 * sin(40 deg) laterally, plus Catmull-Rom overshoot.
                assert!((r.x - c.x).abs() < he.x + 0.45, "x {:?}", r);
                assert!((r.y - c.y).abs() < he.y + 0.45, "y {:?}", r);
                assert!((r.z - c.z).abs() < he.z + 0.2, "z {:?}", r);
            }
        }
    }

    #[test]
    fn trajectory_is_deterministic() {
        let rig = default_rig(4);
        let a = random_trajectory(&rig, 5.0, 11);
        let b = random_trajectory(&rig, 5.0, 11);
        for k in 0..100 {
            let t = k as f64 * 0.05;
            assert_eq!(a.position(t), b.position(t));
            assert_eq!(a.direction(t), b.direction(t));
        }
    }
}
