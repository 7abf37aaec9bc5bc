//! Direct observation synthesis, bypassing rendering.
//!
//! Projects the exact marker positions onto every camera at the trigger grid
//! and optionally corrupts them with pixel noise, whole-observation dropouts
//! and uniform outliers. Ground-truth labels (exact pixels, outlier flags)
//! ride along for the solver and RANSAC tests.

use rand::Rng;

use crate::geometry::{project, Pixel};
use crate::observations::WandObservation;
use crate::rng::{rng_from, standard_normal};
use crate::wand::WandSpec;

use super::{RigConfig, WandTrajectory};

#[derive(Debug, Clone, Copy, Default)]
pub struct SampleOptions {
    /// Gaussian pixel noise sigma per coordinate.
    pub noise_sigma_px: f64,
    /// Probability of dropping a (camera, timestamp) observation entirely.
    pub dropout_rate: f64,
    /// Probability of replacing a marker observation by a uniform in-image pixel.
    pub outlier_rate: f64,
}

/// Ground-truth record matching one emitted observation.
#[derive(Debug, Clone, Copy)]
pub struct TruthEntry {
    pub camera_index: usize,
    pub timestamp: f64,
    /// Exact projections before noise/outlier corruption.
    pub exact: [Pixel; 3],
    pub is_outlier: [bool; 3],
}

#[derive(Debug, Clone)]
pub struct SampledObservations {
    pub observations: Vec<WandObservation>,
    pub truth: Vec<TruthEntry>,
}

/// Samples the trajectory on the rig's trigger grid.
///
/// A (camera, timestamp) slot exists when all three markers project in front
/// of the camera and inside the image; dropout and outlier corruption apply
/// on top of that per the options.
pub fn sample_observations(
    rig: &RigConfig,
    traj: &WandTrajectory,
    spec: &WandSpec,
    opts: &SampleOptions,
    seed: u64,
) -> SampledObservations {
    assert!((0.0..1.0).contains(&opts.dropout_rate));
    assert!((0.0..1.0).contains(&opts.outlier_rate));
    let mut rng = rng_from(seed, "sample-observations");
    let times = rig.sample_times(traj.duration);

    let mut observations = Vec::new();
    let mut truth = Vec::new();

    for &t in &times {
        let markers = traj.marker_positions(t, spec);
        for (cam_idx, cam) in rig.cameras.iter().enumerate() {
            let mut exact = [Pixel::new(0.0, 0.0); 3];
            let mut visible = true;
            for (i, m) in markers.iter().enumerate() {
                match project(&cam.intrinsics, &cam.pose, m) {
                    Ok(px) if cam.intrinsics.contains(&px) => exact[i] = px,
                    _ => {
                        visible = false;
                        break;
                    }
                }
            }
            if !visible {
                continue;
            }
            if opts.dropout_rate > 0.0 && rng.gen_bool(opts.dropout_rate) {
                continue;
            }
            let mut markers_px = exact;
            let mut is_outlier = [false; 3];
            for i in 0..3 {
                if opts.outlier_rate > 0.0 && rng.gen_bool(opts.outlier_rate) {
                    is_outlier[i] = true;
                    markers_px[i] = Pixel::new(
                        rng.gen_range(0.0..cam.intrinsics.width as f64),
                        rng.gen_range(0.0..cam.intrinsics.height as f64),
                    );
                } else if opts.noise_sigma_px > 0.0 {
                    markers_px[i] = Pixel::new(
                        exact[i].u + opts.noise_sigma_px * standard_normal(&mut rng),
                        exact[i].v + opts.noise_sigma_px * standard_normal(&mut rng),
                    );
                }
            }
            observations.push(WandObservation {
                camera_index: cam_idx,
                timestamp: t,
                markers: markers_px,
            });
            truth.push(TruthEntry {
                camera_index: cam_idx,
                timestamp: t,
                exact,
                is_outlier,
            });
        }
    }
    SampledObservations {
        observations,
        truth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{default_rig, random_trajectory};

    #[test]
    fn noiseless_observations_equal_projections() {
        let rig = default_rig(42);
        let spec = WandSpec::default();
        let traj = random_trajectory(&rig, 3.0, 5);
        let s = sample_observations(&rig, &traj, &spec, &SampleOptions::default(), 1);
        assert!(!s.observations.is_empty());
        for (obs, truth) in s.observations.iter().zip(&s.truth) {
            for i in 0..3 {
                assert_eq!(obs.markers[i], truth.exact[i]);
            }
        }
    }

    #[test]
    fn ground_truth_reprojection_is_exact() {
        // Re-projecting exported marker positions reproduces exported pixels.
        let rig = default_rig(42);
        let spec = WandSpec::default();
        let traj = random_trajectory(&rig, 3.0, 5);
        let s = sample_observations(&rig, &traj, &spec, &SampleOptions::default(), 1);
        for truth in s.truth.iter().take(500) {
            let markers = traj.marker_positions(truth.timestamp, &spec);
            let cam = &rig.cameras[truth.camera_index];
            for i in 0..3 {
                let px = project(&cam.intrinsics, &cam.pose, &markers[i]).unwrap();
                assert!(px.distance(&truth.exact[i]) < 1e-12);
            }
        }
    }

    #[test]
    fn dropout_rate_is_respected() {
        let rig = default_rig(42);
        let spec = WandSpec::default();
        let traj = random_trajectory(&rig, 20.0, 5);
        let full = sample_observations(&rig, &traj, &spec, &SampleOptions::default(), 1);
        let dropped = sample_observations(
            &rig,
            &traj,
            &spec,
            &SampleOptions {
                dropout_rate: 0.3,
                ..Default::default()
            },
            1,
        );
        // Binomial(n, 0.7): expect within 3 sigma.
        let n = full.observations.len() as f64;
        let expected = 0.7 * n;
        let sigma = (n * 0.3 * 0.7).sqrt();
        let got = dropped.observations.len() as f64;
        assert!(
            (got - expected).abs() < 3.0 * sigma,
            "got {got}, expected {expected} +/- {sigma}"
        );
    }

    #[test]
    fn outliers_are_labeled() {
        let rig = default_rig(42);
        let spec = WandSpec::default();
        let traj = random_trajectory(&rig, 10.0, 5);
        let s = sample_observations(
            &rig,
            &traj,
            &spec,
            &SampleOptions {
                outlier_rate: 0.3,
                ..Default::default()
            },
            1,
        );
        let total: usize = s.truth.len() * 3;
        let outliers: usize = s
            .truth
            .iter()
            .map(|t| t.is_outlier.iter().filter(|&&o| o).count())
            .sum();
        let rate = outliers as f64 / total as f64;
        assert!((rate - 0.3).abs() < 0.05, "outlier rate {rate}");
        // Non-outliers are exact; outliers differ.
        for (obs, truth) in s.observations.iter().zip(&s.truth) {
            for i in 0..3 {
                if truth.is_outlier[i] {
                    assert_ne!(obs.markers[i], truth.exact[i]);
                } else {
                    assert_eq!(obs.markers[i], truth.exact[i]);
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let rig = default_rig(8);
        let spec = WandSpec::default();
        let traj = random_trajectory(&rig, 2.0, 3);
        let opts = SampleOptions {
            noise_sigma_px: 0.5,
            dropout_rate: 0.1,
            outlier_rate: 0.05,
        };
        let a = sample_observations(&rig, &traj, &spec, &opts, 4);
        let b = sample_observations(&rig, &traj, &spec, &opts, 4);
        assert_eq!(a.observations.len(), b.observations.len());
        for (x, y) in a.observations.iter().zip(&b.observations) {
            assert_eq!(x.markers, y.markers);
        }
    }
}
