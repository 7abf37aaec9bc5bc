//! Marker extraction from frame-camera images.
//!
//! Thresholding + 4-connected components + sub-pixel centroids, followed by
//! the proximity/alignment filter that keeps only blobs that can form a wand.
//! The pipeline runs on grayscale intensities in `[0, 1]`; a color pre-filter
//! can be slotted in front by mapping whatever channel is relevant onto the
//! gray image before calling [`detect_blobs`].

use thiserror::Error;

use crate::geometry::Pixel;
use crate::wand::{label_markers_with, LabelGates, LabeledTriple, NoWand, WandSpec};

/// Row-major grayscale image, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("data length {got} does not match {width}x{height}")]
    BadLength {
        width: usize,
        height: usize,
        got: usize,
    },
}

impl GrayImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::BadLength {
                width,
                height,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    pub fn fill(&mut self, v: f32) {
        self.data.fill(v);
    }
}

/// Connected bright region with a sub-pixel centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub centroid: Pixel,
    /// Component pixel count.
    pub area: usize,
    /// Inclusive pixel bounds `(min_x, min_y, max_x, max_y)`.
    pub bbox: (usize, usize, usize, usize),
}

/// Finds 4-connected components of pixels above `threshold`, keeps those with
/// area in `[min_area, max_area]`.
///
/// Centroids are intensity-weighted means using the intensity above the
/// threshold as weight, which removes most of the truncation bias at the
/// component boundary.
pub fn detect_blobs(
    img: &GrayImage,
    threshold: f64,
    min_area: usize,
    max_area: usize,
) -> Vec<Blob> {
    let t = threshold as f32;
    let (w, h) = (img.width, img.height);
    let mut visited = vec![false; w * h];
    let mut blobs = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    for start in 0..img.data.len() {
        if visited[start] || img.data[start] <= t {
            continue;
        }
        // Flood fill one component.
        let mut area = 0usize;
        let mut wsum = 0.0f64;
        let mut usum = 0.0f64;
        let mut vsum = 0.0f64;
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (w, h, 0usize, 0usize);
        visited[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (x, y) = (idx % w, idx / w);
            let weight = (img.data[idx] - t) as f64;
            area += 1;
            wsum += weight;
            usum += weight * x as f64;
            vsum += weight * y as f64;
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);

            let mut push = |n: usize| {
                if !visited[n] && img.data[n] > t {
                    visited[n] = true;
                    stack.push(n);
                }
            };
            if x > 0 {
                push(idx - 1);
            }
            if x + 1 < w {
                push(idx + 1);
            }
            if y > 0 {
                push(idx - w);
            }
            if y + 1 < h {
                push(idx + w);
            }
        }
        if area < min_area || area > max_area || wsum <= 0.0 {
            continue;
        }
        blobs.push(Blob {
            centroid: Pixel::new(usum / wsum, vsum / wsum),
            area,
            bbox: (min_x, min_y, max_x, max_y),
        });
    }
    blobs
}

/// Default blob-area band: at least 9 px^2, at most 10% of the image.
pub fn default_area_band(img: &GrayImage) -> (usize, usize) {
    (9, img.width * img.height / 10)
}

/// Proximity gate ahead of marker labeling.
#[derive(Debug, Clone, Copy)]
pub struct WandFilterParams {
    /// All wand blobs must fit in a window of this span (pixels).
    pub window_span_px: f64,
    pub gates: LabelGates,
}

impl Default for WandFilterParams {
    fn default() -> Self {
        Self {
            window_span_px: 400.0,
            gates: LabelGates::default(),
        }
    }
}

/// Drops blobs with fewer than two neighbors inside the proximity window,
/// then labels the survivors with [`label_markers_with`].
pub fn filter_wand_blobs(blobs: &[Blob], spec: &WandSpec) -> Result<LabeledTriple, NoWand> {
    filter_wand_blobs_with(blobs, spec, &WandFilterParams::default())
}

pub fn filter_wand_blobs_with(
    blobs: &[Blob],
    spec: &WandSpec,
    params: &WandFilterParams,
) -> Result<LabeledTriple, NoWand> {
    let centers: Vec<Pixel> = blobs.iter().map(|b| b.centroid).collect();
    let close: Vec<Pixel> = centers
        .iter()
        .filter(|c| {
            centers
                .iter()
                .filter(|o| c.distance(o) > 0.0 && c.distance(o) <= params.window_span_px)
                .count()
                >= 2
        })
        .copied()
        .collect();
    label_markers_with(&close, spec, &params.gates)
}
