//! Frame-camera rendering: markers as Gaussian-profile spots.
//!
//! Spheres project to view-independent circles, so the renderer draws each
//! marker as a radially symmetric spot whose radius follows the true angular
//! size; the geometric center of the spot is the exact (distorted) projection
//! of the marker center, which is what the ground-truth export records.


use crate::frame_detect::GrayImage;
use crate::geometry::{project, Pixel};
use crate::rng::{rng_from_n, standard_normal};
use crate::wand::WandSpec;

use super::{MarkerModel, RigConfig, WandTrajectory};

#[derive(Debug, Clone, Copy)]
pub struct RenderOptions {
    pub marker: MarkerModel,
    /// Additive Gaussian intensity noise (sigma, intensity units).
    pub noise_sigma: f64,
    /// Exposure time; spots render steadily only when it covers at least one
    /// full blink period.
    pub exposure_s: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            marker: MarkerModel::default(),
            noise_sigma: 0.0,
            exposure_s: 0.005,
        }
    }
}

/// Gaussian sigma of a marker spot at camera depth `z`.
fn spot_sigma(fx: f64, radius_m: f64, z: f64) -> f64 {
    0.5 * fx * radius_m / z
}

/// Renders one camera frame at time `t` and returns the exact projected
/// marker centers when all three markers are cleanly inside the image.
///
/// `noise_seed` drives the per-frame noise stream; the same seed reproduces
/// the same frame bit for bit.
pub fn render_frame(
    rig: &RigConfig,
    camera: usize,
    traj: &WandTrajectory,
    spec: &WandSpec,
    opts: &RenderOptions,
    t: f64,
    noise_seed: u64,
) -> (GrayImage, Option<[Pixel; 3]>) {
    let cam = &rig.cameras[camera];
    let intr = &cam.intrinsics;
    let mut img = GrayImage::zeros(intr.width as usize, intr.height as usize);

    // With the exposure shorter than a blink period the spot aliases with
    // the PWM phase: the marker is simply dark on roughly half the frames.
    let steady = opts.exposure_s * spec.blink_frequency_hz >= 1.0;
    let lit = steady || (t * spec.blink_frequency_hz).fract() < 0.5;

    let markers = traj.marker_positions(t, spec);
    let mut centers = [Pixel::new(0.0, 0.0); 3];
    let mut all_visible = true;

    for (i, m) in markers.iter().enumerate() {
        let p_cam = cam.pose.transform_point(m);
        let Ok(px) = project(intr, &cam.pose, m) else {
            all_visible = false;
            continue;
        };
        centers[i] = px;
        let sigma = spot_sigma(intr.fx, opts.marker.radius_m, p_cam.z);

        // Ground-truth slots require the whole detectable core in-image.
        let margin = 2.0 * sigma + 2.0;
        if px.u < margin
            || px.v < margin
            || px.u > intr.width as f64 - 1.0 - margin
            || px.v > intr.height as f64 - 1.0 - margin
        {
            all_visible = false;
        }

        if lit {
            draw_spot(&mut img, px, sigma, opts.marker.peak_intensity as f32);
        }
    }

    if opts.noise_sigma > 0.0 {
        let mut rng = rng_from_n(noise_seed, "frame-noise", camera as u64);
        let s = opts.noise_sigma as f32;
        for v in img.data.iter_mut() {
            *v = (*v + s * standard_normal(&mut rng) as f32).clamp(0.0, 1.0);
        }
    }

    (img, all_visible.then_some(centers))
}

fn draw_spot(img: &mut GrayImage, center: Pixel, sigma: f64, peak: f32) {
    let r = (4.0 * sigma).ceil() as i64;
    let cx = center.u;
    let cy = center.v;
    let x0 = (cx.round() as i64 - r).max(0);
    let x1 = (cx.round() as i64 + r).min(img.width as i64 - 1);
    let y0 = (cy.round() as i64 - r).max(0);
    let y1 = (cy.round() as i64 + r).min(img.height as i64 - 1);
    let inv_2s2 = 1.0 / (2.0 * sigma * sigma);
    for y in y0..=y1 {
        let dy = y as f64 - cy;
        let row = y as usize * img.width;
        for x in x0..=x1 {
            let dx = x as f64 - cx;
            let v = peak * (-(dx * dx + dy * dy) * inv_2s2).exp() as f32;
            let cell = &mut img.data[row + x as usize];
            *cell = (*cell + v).min(1.0);
        }
    }
}

/// Collecting variant over a list of sample times for one camera. Frames are
/// ~5 MB each at full resolution; for long sequences prefer streaming single
/// [`render_frame`] calls.
pub fn render_frames(
    rig: &RigConfig,
    camera: usize,
    traj: &WandTrajectory,
    spec: &WandSpec,
    opts: &RenderOptions,
    times: &[f64],
    seed: u64,
) -> Vec<(GrayImage, Option<[Pixel; 3]>)> {
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            render_frame(
                rig,
                camera,
                traj,
                spec,
                opts,
                t,
                crate::rng::derive_seed_n(seed, "render", ((camera as u64) << 32) | k as u64),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_detect::{detect_blobs, filter_wand_blobs};
    use crate::simulator::{default_rig, random_trajectory};

    #[test]
    fn noiseless_render_centroid_matches_ground_truth() {
        let rig = default_rig(42);
        let spec = WandSpec::default();
        let traj = random_trajectory(&rig, 5.0, 7);
        let opts = RenderOptions::default();

        let mut checked = 0;
        for k in 0..40 {
            let t = k as f64 * 0.1;
            let (img, gt) = render_frame(&rig, 0, &traj, &spec, &opts, t, 1);
            let Some(gt) = gt else { continue };
            let blobs = detect_blobs(&img, 0.12, 9, img.width * img.height / 10);
            let triple = filter_wand_blobs(&blobs, &spec).expect("wand visible");
            for (det, truth) in triple.markers().iter().zip(gt.iter()) {
                assert!(det.distance(truth) < 0.05, "err {}", det.distance(truth));
            }
            checked += 1;
        }
        assert!(checked > 20, "too few visible frames: {checked}");
    }

    #[test]
    fn marker_behind_or_outside_is_not_a_ground_truth_slot() {
        let rig = default_rig(42);
        let spec = WandSpec::default();
        // A waypoint path passing far outside the working volume.
        let far = rig
            .room_to_world
            .transform_point(&crate::geometry::Point3::new(20.0, 2.0, 1.5));
        let traj = WandTrajectory::from_waypoints(
            vec![crate::geometry::Point3::from(far); 3],
            vec![crate::geometry::Vec3::new(0.0, 0.0, 1.0); 3],
            0.4,
        );
        let (_, gt) = render_frame(&rig, 0, &traj, &spec, &RenderOptions::default(), 0.1, 1);
        assert!(gt.is_none());
    }

    #[test]
    fn short_exposure_aliases_with_blink() {
        let rig = default_rig(42);
        let spec = WandSpec::default();
        let traj = random_trajectory(&rig, 4.0, 7);
        let long = RenderOptions {
            exposure_s: 0.005,
            ..Default::default()
        };
        let short = RenderOptions {
            exposure_s: 0.0005, // a quarter blink period
            ..Default::default()
        };

        let times: Vec<f64> = (0..100).map(|k| 0.0401 * k as f64).collect();
        let mut lit_long = 0;
        let mut lit_short = 0;
        for &t in &times {
            let (img_l, gt) = render_frame(&rig, 0, &traj, &spec, &long, t, 1);
            if gt.is_none() {
                continue;
            }
            let (img_s, _) = render_frame(&rig, 0, &traj, &spec, &short, t, 1);
            let area = img_l.width * img_l.height / 10;
            lit_long += (!detect_blobs(&img_l, 0.12, 9, area).is_empty()) as usize;
            lit_short += (!detect_blobs(&img_s, 0.12, 9, area).is_empty()) as usize;
        }
        assert!(lit_long > 0);
        assert!(
            lit_short < lit_long,
            "short exposure should drop frames ({lit_short} vs {lit_long})"
        );
    }

    #[test]
    fn render_is_deterministic() {
        let rig = default_rig(3);
        let spec = WandSpec::default();
        let traj = random_trajectory(&rig, 2.0, 3);
        let opts = RenderOptions {
            noise_sigma: 0.02,
            ..Default::default()
        };
        let (a, _) = render_frame(&rig, 1, &traj, &spec, &opts, 0.5, 99);
        let (b, _) = render_frame(&rig, 1, &traj, &spec, &opts, 0.5, 99);
        assert_eq!(a.data, b.data);
    }
}
