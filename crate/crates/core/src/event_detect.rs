//! Marker extraction from event streams.
//!
//! A per-pixel estimator tracks the blink frequency as the smoothed inverse
//! period between consecutive ON events. Pixels whose estimate sits inside a
//! relative band around the wand's blink frequency, and which were updated
//! within the staleness window, form a binary mask; blob detection on that
//! mask yields marker centers.
//!
//! The staleness window is centered on the query time: a pixel is live at
//! `t` when its last event lies in `[t - w/2, t + w/2]`. Centering removes
//! the first-order motion bias a trailing window would leave behind a moving
//! marker; [`detect_wand_events`] therefore streams events half a window
//! ahead of each sample time before extracting.

use thiserror::Error;

use crate::frame_detect::{detect_blobs, Blob, GrayImage};
use crate::geometry::Pixel;
use crate::wand::{label_markers, LabeledTriple, WandSpec};

/// Sign of the log-intensity change that triggered an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    pub fn from_bit(bit: u8) -> Polarity {
        if bit == 0 {
            Polarity::Off
        } else {
            Polarity::On
        }
    }
}

/// One sensor event: pixel, time in seconds, polarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub x: u16,
    pub y: u16,
    pub t: f64,
    pub polarity: Polarity,
}

#[derive(Debug, Error, PartialEq)]
pub enum EventDetectError {
    #[error("event at ({x}, {y}) outside the {width}x{height} sensor")]
    OutOfBounds {
        x: u16,
        y: u16,
        width: usize,
        height: usize,
    },
    #[error("event timestamps decrease at index {index} ({prev} -> {next})")]
    UnsortedStream { index: usize, prev: f64, next: f64 },
}

/// Per-pixel blink-frequency state.
#[derive(Debug, Clone)]
pub struct FrequencyMap {
    width: usize,
    height: usize,
    /// Smoothed frequency estimate in Hz; 0 = no estimate yet.
    freq: Vec<f64>,
    /// Time of the most recent event per pixel; NAN = never.
    last_update: Vec<f64>,
    /// Time of the most recent ON event per pixel; NAN = never.
    last_on: Vec<f64>,
    /// Exponential smoothing factor for new period measurements.
    pub alpha: f64,
    /// Staleness window length in blink periods.
    pub staleness_periods: f64,
}

impl FrequencyMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            freq: vec![0.0; width * height],
            last_update: vec![f64::NAN; width * height],
            last_on: vec![f64::NAN; width * height],
            alpha: 0.3,
            staleness_periods: 4.0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Current estimate for one pixel (0 when no period has been measured).
    pub fn frequency_at(&self, x: usize, y: usize) -> f64 {
        self.freq[y * self.width + x]
    }

    pub fn last_update_at(&self, x: usize, y: usize) -> f64 {
        self.last_update[y * self.width + x]
    }

    /// Folds one event into the per-pixel estimate.
    ///
    /// ON events measure the rising-edge period `1/dt` against the previous
    /// ON event and blend it into the running estimate with factor `alpha`.
    pub fn update(&mut self, e: &EventRecord) -> Result<(), EventDetectError> {
        let (x, y) = (e.x as usize, e.y as usize);
        if x >= self.width || y >= self.height {
            return Err(EventDetectError::OutOfBounds {
                x: e.x,
                y: e.y,
                width: self.width,
                height: self.height,
            });
        }
        let idx = y * self.width + x;
        if e.polarity == Polarity::On {
            let prev = self.last_on[idx];
            if prev.is_finite() {
                let dt = e.t - prev;
                if dt > 0.0 {
                    let inst = 1.0 / dt;
                    self.freq[idx] = if self.freq[idx] == 0.0 {
                        inst
                    } else {
                        self.alpha * inst + (1.0 - self.alpha) * self.freq[idx]
                    };
                }
            }
            self.last_on[idx] = e.t;
        }
        self.last_update[idx] = e.t;
        Ok(())
    }

    fn is_live(&self, idx: usize, target_hz: f64, band: f64, at_time: f64, half_window: f64) -> bool {
        let f = self.freq[idx];
        if f <= 0.0 || (f - target_hz).abs() / target_hz > band {
            return false;
        }
        let last = self.last_update[idx];
        // 1 ns slack so events landing exactly on the window edge stay in.
        last.is_finite() && (last - at_time).abs() <= half_window + 1e-9
    }
}

/// Convenience wrapper over [`FrequencyMap::update`] mirroring the functional
/// style of the rest of the crate.
pub fn update_frequency(map: &mut FrequencyMap, e: &EventRecord) -> Result<(), EventDetectError> {
    map.update(e)
}

/// Masks pixels in the frequency band around `target_hz` that are not stale
/// at `at_time`, then runs blob detection on the mask.
pub fn extract_marker_centers(
    map: &FrequencyMap,
    target_hz: f64,
    band: f64,
    at_time: f64,
) -> Vec<Blob> {
    let candidates: Vec<usize> = (0..map.freq.len()).collect();
    extract_from_candidates(map, &candidates, target_hz, band, at_time)
}

/// Same as [`extract_marker_centers`] but only inspects the listed pixel
/// indices. The detect loop feeds it the pixels that actually saw an event
/// in the window, which is equivalent and avoids a full-sensor scan per
/// sample.
fn extract_from_candidates(
    map: &FrequencyMap,
    candidates: &[usize],
    target_hz: f64,
    band: f64,
    at_time: f64,
) -> Vec<Blob> {
    let half_window = 0.5 * map.staleness_periods / target_hz;
    let mut live: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&idx| map.is_live(idx, target_hz, band, at_time, half_window))
        .collect();
    if live.is_empty() {
        return Vec::new();
    }
    live.sort_unstable();
    live.dedup();

    // Crop to the live bounding box so blob detection touches O(mask) pixels.
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (usize::MAX, usize::MAX, 0, 0);
    for &idx in &live {
        let (x, y) = (idx % map.width, idx / map.width);
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    let (cw, ch) = (max_x - min_x + 1, max_y - min_y + 1);
    let mut mask = GrayImage::zeros(cw, ch);
    for &idx in &live {
        let (x, y) = (idx % map.width, idx / map.width);
        mask.set(x - min_x, y - min_y, 1.0);
    }

    let max_area = map.width * map.height / 10;
    detect_blobs(&mask, 0.5, 9, max_area)
        .into_iter()
        .map(|b| Blob {
            centroid: Pixel::new(b.centroid.u + min_x as f64, b.centroid.v + min_y as f64),
            area: b.area,
            bbox: (
                b.bbox.0 + min_x,
                b.bbox.1 + min_y,
                b.bbox.2 + min_x,
                b.bbox.3 + min_y,
            ),
        })
        .collect()
}

/// Streams an ordered event sequence and labels the wand at each sample time.
///
/// Samples where no unambiguous wand is found are dropped. The stream must be
/// sorted by time; the first violation raises [`EventDetectError::UnsortedStream`].
pub fn detect_wand_events(
    stream: &[EventRecord],
    sensor: (usize, usize),
    spec: &WandSpec,
    sample_times: &[f64],
) -> Result<Vec<LabeledTriple>, EventDetectError> {
    detect_wand_events_at(stream, sensor, spec, spec.blink_frequency_hz, 0.1, sample_times)
}

/// [`detect_wand_events`] with an explicit target frequency and band, used by
/// the frequency-sweep experiments where the blink under test is not a valid
/// [`WandSpec`] frequency.
pub fn detect_wand_events_at(
    stream: &[EventRecord],
    sensor: (usize, usize),
    spec: &WandSpec,
    target_hz: f64,
    band: f64,
    sample_times: &[f64],
) -> Result<Vec<LabeledTriple>, EventDetectError> {
    let mut map = FrequencyMap::new(sensor.0, sensor.1);
    let half_window = 0.5 * map.staleness_periods / target_hz;

    let mut out = Vec::new();
    let mut next_event = 0usize;
    let mut window_start = 0usize;
    let mut prev_t = f64::NEG_INFINITY;

    for &t in sample_times {
        // Fold events up to half a window past the sample time.
        while next_event < stream.len() && stream[next_event].t <= t + half_window {
            let e = &stream[next_event];
            if e.t < prev_t {
                return Err(EventDetectError::UnsortedStream {
                    index: next_event,
                    prev: prev_t,
                    next: e.t,
                });
            }
            prev_t = e.t;
            map.update(e)?;
            next_event += 1;
        }
        // Candidate pixels: those with an event inside the window.
        while window_start < next_event && stream[window_start].t < t - half_window {
            window_start += 1;
        }
        let candidates: Vec<usize> = stream[window_start..next_event]
            .iter()
            .map(|e| e.y as usize * map.width + e.x as usize)
            .collect();

        let blobs = extract_from_candidates(&map, &candidates, target_hz, band, t);
        let centers: Vec<Pixel> = blobs.iter().map(|b| b.centroid).collect();
        if let Ok(mut triple) = label_markers(&centers, spec) {
            triple.timestamp = t;
            out.push(triple);
        }
    }
    Ok(out)
}
