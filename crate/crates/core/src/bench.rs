//! Per-frame timing of the monotone, color-enhanced and full volume renderers.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::enhance::{RateMode, TransferFunctionSpec, DEFAULT_MAP_SIZE};
use crate::error::Result;
use crate::fvr::{render_fvr, FvrOptions, TransitionalTF1D};
use crate::raycast::{Camera, CropBounds};
use crate::render::{render_isosurface, RenderOptions, SurfaceAppearance};
use crate::volume::ScalarVolume;

pub const WARMUP_FRAMES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub frames: usize,
    pub image_dims: [u32; 2],
    pub fvr_sample_dist: f64,
    pub mono_ms: f64,
    pub ceir_shallow_ms: f64,
    pub ceir_deep_ms: f64,
    pub fvr_ms: f64,
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median wall time in milliseconds of `frames` calls after the warm-up.
pub fn time_frames<F: FnMut()>(frames: usize, mut f: F) -> f64 {
    for _ in 0..WARMUP_FRAMES {
        f();
    }
    let samples = (0..frames.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    median(samples)
}

/// Times all four renderers on the same view. FVR samples at the transfer
/// function's reference distance; the monotone surface uses the same isovalue.
pub fn run_bench(vol: &ScalarVolume, camera: &Camera, tf: &TransferFunctionSpec, frames: usize) -> Result<BenchReport> {
    camera.validate()?;
    let crop = CropBounds::for_volume(vol);
    let opts = RenderOptions::default();
    let mono = SurfaceAppearance::mono(tf.isovalue, [0.9, 0.9, 0.9]);
    let shallow = SurfaceAppearance::from_spec(&TransferFunctionSpec { mode: RateMode::Shallow, ..tf.clone() }, vol, DEFAULT_MAP_SIZE)?;
    let deep = SurfaceAppearance::from_spec(&TransferFunctionSpec { mode: RateMode::Deep, ..tf.clone() }, vol, DEFAULT_MAP_SIZE)?;
    let ttf = TransitionalTF1D::from_spec(tf)?;
    let fvr_opts = FvrOptions::default();
    Ok(BenchReport {
        frames,
        image_dims: camera.image_dims,
        fvr_sample_dist: tf.std_sample_distance,
        mono_ms: time_frames(frames, || {
            render_isosurface(vol, camera, &crop, &mono, &opts);
        }),
        ceir_shallow_ms: time_frames(frames, || {
            render_isosurface(vol, camera, &crop, &shallow, &opts);
        }),
        ceir_deep_ms: time_frames(frames, || {
            render_isosurface(vol, camera, &crop, &deep, &opts);
        }),
        fvr_ms: time_frames(frames, || {
            render_fvr(vol, camera, &ttf, tf.std_sample_distance, &crop, &fvr_opts);
        }),
    })
}
