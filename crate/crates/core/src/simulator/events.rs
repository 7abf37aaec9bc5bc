//! Event-camera simulation.
//!
//! Pixels fire on blink edges of the marker illumination when the
//! log-intensity swing exceeds the contrast threshold. A change arriving
//! inside the refractory window is deferred: if the pixel still differs from
//! its reference level when the window expires, the event fires then; if the
//! illumination has already flipped back, the change is lost. This is what
//! caps usable blink frequencies near `1 / (2 * refractory)` and produces
//! the detection-rate rolloff above ~700 Hz for the default 0.7 ms period.

use rand::Rng;

use crate::event_detect::{EventRecord, Polarity};
use crate::geometry::project;
use crate::rng::{rng_from_n, standard_normal};
use crate::wand::WandSpec;

use super::{MarkerModel, RigConfig, SensorKind, WandTrajectory};

#[derive(Debug, Clone, Copy)]
pub struct EventSensorModel {
    /// Log-intensity change needed to trigger an event.
    pub contrast_threshold: f64,
    /// Dead time per pixel after an emitted event, seconds.
    pub refractory_s: f64,
    /// Gaussian timestamp jitter sigma, seconds.
    pub jitter_sigma_s: f64,
    /// Uniform background noise rate, events per pixel per second.
    pub noise_rate_hz: f64,
    /// Ambient scene intensity the markers blink on top of.
    pub ambient_intensity: f64,
}

impl Default for EventSensorModel {
    fn default() -> Self {
        Self {
            contrast_threshold: 0.35,
            refractory_s: 7e-4,
            jitter_sigma_s: 20e-6,
            noise_rate_hz: 0.1,
            ambient_intensity: 0.08,
        }
    }
}

impl EventSensorModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.refractory_s <= 0.0 {
            return Err(format!("refractory period must be > 0, got {}", self.refractory_s));
        }
        if self.contrast_threshold <= 0.0 {
            return Err(format!(
                "contrast threshold must be > 0, got {}",
                self.contrast_threshold
            ));
        }
        Ok(())
    }

    /// Smallest spot amplitude whose on/off swing crosses the threshold.
    fn min_amplitude(&self) -> f64 {
        self.ambient_intensity * (self.contrast_threshold.exp() - 1.0)
    }
}

const NO_PENDING: u8 = 0;
const PENDING_OFF: u8 = 1;
const PENDING_ON: u8 = 2;

struct PixelState {
    last_emit: Vec<f64>,
    ref_on: Vec<bool>,
    pending: Vec<u8>,
    stamp: Vec<u32>,
    pending_dirty: Vec<u32>,
}

impl PixelState {
    fn new(n: usize) -> Self {
        Self {
            last_emit: vec![f64::NEG_INFINITY; n],
            ref_on: vec![false; n],
            pending: vec![NO_PENDING; n],
            stamp: vec![u32::MAX; n],
            pending_dirty: Vec::new(),
        }
    }

    /// Emits any deferred change whose refractory window has expired by `now`.
    fn flush(&mut self, idx: usize, now: f64, refractory: f64, out: &mut Vec<(f64, u32)>) {
        if self.pending[idx] == NO_PENDING {
            return;
        }
        let free_t = self.last_emit[idx] + refractory;
        if free_t > now {
            return;
        }
        let want_on = self.pending[idx] == PENDING_ON;
        self.pending[idx] = NO_PENDING;
        if want_on != self.ref_on[idx] {
            out.push((free_t, encode(idx as u32, want_on)));
            self.ref_on[idx] = want_on;
            self.last_emit[idx] = free_t;
        }
    }

    fn edge(&mut self, idx: usize, t: f64, new_on: bool, refractory: f64, out: &mut Vec<(f64, u32)>) {
        self.flush(idx, t, refractory, out);
        if t >= self.last_emit[idx] + refractory {
            if new_on != self.ref_on[idx] {
                out.push((t, encode(idx as u32, new_on)));
                self.ref_on[idx] = new_on;
                self.last_emit[idx] = t;
            }
        } else {
            if self.pending[idx] == NO_PENDING {
                self.pending_dirty.push(idx as u32);
            }
            self.pending[idx] = if new_on { PENDING_ON } else { PENDING_OFF };
        }
    }
}

fn encode(idx: u32, on: bool) -> u32 {
    (idx << 1) | on as u32
}

/// Generates the event stream of one event camera over `[0, duration]`.
///
/// Deterministic for a fixed seed; the returned stream is globally sorted by
/// timestamp.
#[allow(clippy::too_many_arguments)]
pub fn generate_events(
    rig: &RigConfig,
    camera: usize,
    traj: &WandTrajectory,
    spec: &WandSpec,
    marker: &MarkerModel,
    sensor: &EventSensorModel,
    blink_hz: f64,
    duty: f64,
    duration: f64,
    seed: u64,
) -> Vec<EventRecord> {
    assert!(blink_hz > 0.0 && duty > 0.0 && duty < 1.0);
    sensor.validate().expect("valid sensor model");

    let cam = &rig.cameras[camera];
    let intr = &cam.intrinsics;
    let (w, h) = (intr.width as usize, intr.height as usize);
    let mut state = PixelState::new(w * h);
    // (true emit time, encoded pixel+polarity)
    let mut raw: Vec<(f64, u32)> = Vec::new();

    let a_min = sensor.min_amplitude();
    let peak = marker.peak_intensity;
    let fire_factor = if a_min < peak {
        (2.0 * (peak / a_min).ln()).sqrt()
    } else {
        0.0
    };

    if fire_factor > 0.0 {
        // Spot centers and sigmas per marker, refreshed at every blink edge.
        let mut prev_region: [Option<(f64, f64, f64, f64)>; 3] = [None; 3];
        let period = 1.0 / blink_hz;
        let mut edge_id: u32 = 0;
        let mut k = 0u64;
        loop {
            let t_rise = k as f64 * period;
            if t_rise >= duration {
                break;
            }
            for (t_e, rising) in [(t_rise, true), (t_rise + duty * period, false)] {
                if t_e >= duration {
                    break;
                }
                // Current spot parameters for all three markers:
                // (u, v, fire radius px, gaussian sigma px).
                let markers = traj.marker_positions(t_e, spec);
                let mut spots: [Option<(f64, f64, f64, f64)>; 3] = [None; 3];
                for (i, m) in markers.iter().enumerate() {
                    let p_cam = cam.pose.transform_point(m);
                    if let Ok(px) = project(intr, &cam.pose, m) {
                        let sigma = 0.5 * intr.fx * marker.radius_m / p_cam.z;
                        spots[i] = Some((px.u, px.v, fire_factor * sigma + 1.0, sigma));
                    }
                }

                let amplitude = |x: f64, y: f64| -> f64 {
                    let mut a = 0.0;
                    for s in spots.iter().flatten() {
                        let (su, sv, _, sigma) = *s;
                        let d2 = (x - su) * (x - su) + (y - sv) * (y - sv);
                        a += peak * (-d2 / (2.0 * sigma * sigma)).exp();
                    }
                    a
                };

                for i in 0..3 {
                    // Union of the previous and current fire regions so that
                    // pixels the spot just left still receive their edge.
                    let boxes = [prev_region[i], spots[i]];
                    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
                    for b in boxes.iter().flatten() {
                        let r = b.2.ceil() as i64;
                        x0 = x0.min(b.0.floor() as i64 - r);
                        y0 = y0.min(b.1.floor() as i64 - r);
                        x1 = x1.max(b.0.ceil() as i64 + r);
                        y1 = y1.max(b.1.ceil() as i64 + r);
                    }
                    if x1 < x0 {
                        continue;
                    }
                    let x0 = x0.max(0) as usize;
                    let y0 = y0.max(0) as usize;
                    let x1 = (x1.min(w as i64 - 1)) as usize;
                    let y1 = (y1.min(h as i64 - 1)) as usize;
                    if x0 > x1 || y0 > y1 {
                        continue;
                    }
                    for y in y0..=y1 {
                        for x in x0..=x1 {
                            let idx = y * w + x;
                            if state.stamp[idx] == edge_id {
                                continue;
                            }
                            state.stamp[idx] = edge_id;
                            let lit = rising && amplitude(x as f64, y as f64) >= a_min;
                            state.edge(idx, t_e, lit, sensor.refractory_s, &mut raw);
                        }
                    }
                }
                prev_region = spots;
                edge_id = edge_id.wrapping_add(1);
            }
            k += 1;
        }

        // Deferred changes still parked at the end of the recording.
        let mut dirty = std::mem::take(&mut state.pending_dirty);
        dirty.sort_unstable();
        dirty.dedup();
        for idx in dirty {
            state.flush(idx as usize, duration, sensor.refractory_s, &mut raw);
        }
    }

    let mut rng = rng_from_n(seed, "events", camera as u64);
    let mut events: Vec<EventRecord> = raw
        .into_iter()
        .map(|(t, code)| {
            let idx = code >> 1;
            let jitter = if sensor.jitter_sigma_s > 0.0 {
                sensor.jitter_sigma_s * standard_normal(&mut rng)
            } else {
                0.0
            };
            EventRecord {
                x: (idx as usize % w) as u16,
                y: (idx as usize / w) as u16,
                t: (t + jitter).clamp(0.0, duration),
                polarity: Polarity::from_bit((code & 1) as u8),
            }
        })
        .collect();

    // Uniform background noise.
    let lambda = sensor.noise_rate_hz * (w * h) as f64 * duration;
    let n_noise = sample_poisson(lambda, &mut rng);
    for _ in 0..n_noise {
        events.push(EventRecord {
            x: rng.gen_range(0..w) as u16,
            y: rng.gen_range(0..h) as u16,
            t: rng.gen_range(0.0..duration.max(f64::MIN_POSITIVE)),
            polarity: Polarity::from_bit(rng.gen_range(0..2u8)),
        });
    }

    events.sort_by(|a, b| {
        a.t.total_cmp(&b.t)
            .then(a.x.cmp(&b.x))
            .then(a.y.cmp(&b.y))
            .then((a.polarity == Polarity::On).cmp(&(b.polarity == Polarity::On)))
    });
    events
}

/// Streams for every event camera in the rig: `(camera_index, events)`.
#[allow(clippy::too_many_arguments)]
pub fn generate_rig_events(
    rig: &RigConfig,
    traj: &WandTrajectory,
    spec: &WandSpec,
    marker: &MarkerModel,
    sensor: &EventSensorModel,
    blink_hz: f64,
    duty: f64,
    duration: f64,
    seed: u64,
) -> Vec<(usize, Vec<EventRecord>)> {
    rig.cameras
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == SensorKind::Event)
        .map(|(i, _)| {
            (
                i,
                generate_events(
                    rig, i, traj, spec, marker, sensor, blink_hz, duty, duration, seed,
                ),
            )
        })
        .collect()
}

fn sample_poisson<R: Rng>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < 50.0 {
        // Knuth's product method.
        let l = (-lambda).exp();
        let mut k = 0u64;
        let mut p = 1.0;
        loop {
            p *= rng.gen::<f64>();
            if p <= l {
                return k;
            }
            k += 1;
        }
    }
    let n = lambda + lambda.sqrt() * standard_normal(rng);
    n.round().max(0.0) as u64
}
