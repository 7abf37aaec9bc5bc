//! Shared observation containers used by initialization, bundle adjustment
//! and evaluation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::Pixel;

/// One wand sighting: three ordered marker centers in one camera at one
/// trigger instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WandObservation {
    pub camera_index: usize,
    /// Seconds on the shared trigger grid.
    pub timestamp: f64,
    /// Marker centers in wand order (0, 1, 2).
    pub markers: [Pixel; 3],
}

/// Timestamp key quantized to integer microseconds, so grouping does not
/// depend on float round-trips.
pub type TimeKey = i64;

pub fn time_key(t: f64) -> TimeKey {
    (t * 1e6).round() as TimeKey
}

#[derive(Debug, Error, PartialEq)]
pub enum ObservationError {
    #[error("camera {camera} appears twice at t={t}s")]
    DuplicateObservation { camera: usize, t: f64 },
    #[error("camera index {camera} out of range for {num_cameras} cameras")]
    CameraOutOfRange { camera: usize, num_cameras: usize },
    #[error("no timestamp is observed by at least two cameras")]
    NoUsableTimestamps,
}

/// Validated observation log.
///
/// Construction drops timestamps seen by fewer than two cameras (their 3D
/// points would be unconstrained) and rejects duplicate (camera, timestamp)
/// pairs.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    observations: Vec<WandObservation>,
    groups: Vec<(TimeKey, Vec<usize>)>,
    num_cameras: usize,
}

impl ObservationSet {
    pub fn new(
        mut observations: Vec<WandObservation>,
        num_cameras: usize,
    ) -> Result<Self, ObservationError> {
        for obs in &observations {
            if obs.camera_index >= num_cameras {
                return Err(ObservationError::CameraOutOfRange {
                    camera: obs.camera_index,
                    num_cameras,
                });
            }
        }
        observations.sort_by(|a, b| {
            time_key(a.timestamp)
                .cmp(&time_key(b.timestamp))
                .then(a.camera_index.cmp(&b.camera_index))
        });
        for pair in observations.windows(2) {
            if time_key(pair[0].timestamp) == time_key(pair[1].timestamp)
                && pair[0].camera_index == pair[1].camera_index
            {
                return Err(ObservationError::DuplicateObservation {
                    camera: pair[0].camera_index,
                    t: pair[0].timestamp,
                });
            }
        }

        // Group by timestamp and drop under-constrained groups.
        let mut by_time: BTreeMap<TimeKey, Vec<usize>> = BTreeMap::new();
        for (i, obs) in observations.iter().enumerate() {
            by_time.entry(time_key(obs.timestamp)).or_default().push(i);
        }
        let keep: Vec<(TimeKey, Vec<usize>)> = by_time
            .into_iter()
            .filter(|(_, idxs)| idxs.len() >= 2)
            .collect();
        if keep.is_empty() {
            return Err(ObservationError::NoUsableTimestamps);
        }

        let mut kept_obs = Vec::new();
        let mut groups = Vec::with_capacity(keep.len());
        for (key, idxs) in keep {
            let start = kept_obs.len();
            kept_obs.extend(idxs.iter().map(|&i| observations[i]));
            groups.push((key, (start..kept_obs.len()).collect()));
        }
        Ok(Self {
            observations: kept_obs,
            groups,
            num_cameras,
        })
    }

    pub fn observations(&self) -> &[WandObservation] {
        &self.observations
    }

    pub fn num_cameras(&self) -> usize {
        self.num_cameras
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn num_timestamps(&self) -> usize {
        self.groups.len()
    }

    /// Iterates `(time_key, observations-at-that-time)`.
    pub fn time_groups(&self) -> impl Iterator<Item = (TimeKey, Vec<&WandObservation>)> + '_ {
        self.groups.iter().map(move |(key, idxs)| {
            (*key, idxs.iter().map(|&i| &self.observations[i]).collect())
        })
    }

    /// Cameras that share at least one timestamp with `camera`.
    pub fn cameras_sharing(&self, camera: usize) -> Vec<usize> {
        let mut shared = vec![false; self.num_cameras];
        for (_, idxs) in &self.groups {
            let has = idxs
                .iter()
                .any(|&i| self.observations[i].camera_index == camera);
            if has {
                for &i in idxs {
                    shared[self.observations[i].camera_index] = true;
                }
            }
        }
        shared
            .iter()
            .enumerate()
            .filter(|&(i, &s)| s && i != camera)
            .map(|(i, _)| i)
            .collect()
    }
}
