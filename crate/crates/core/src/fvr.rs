//! Reference full volume renderer: emission-absorption compositing with a
//! single transitional transfer-function section.

use crate::enhance::{shade, Light, LocalTransferFunction, ShadingParams, TransferFunctionSpec};
use crate::error::Result;
use crate::frame::Image;
use crate::geom::Rgb;
use crate::raycast::{clip_to_box, Camera, CropBounds};
use crate::render::{headlight, par_tiles};
use crate::volume::ScalarVolume;

pub const EARLY_TERMINATION: f64 = 0.999;

/// Transfer function that is transparent below `isovalue`, ramps through the
/// local entries over `[isovalue, isovalue + Δv]` and is opaque above.
///
/// Entry `i` (1-based) sits at the center of its bin,
/// `isovalue + (i − ½)·Δv/n`; values between two centers interpolate linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionalTF1D {
    pub isovalue: f64,
    pub delta_v: f64,
    pub local_tf: LocalTransferFunction,
    pub std_sample_distance: f64,
}

impl TransitionalTF1D {
    pub fn from_spec(spec: &TransferFunctionSpec) -> Result<Self> {
        Ok(TransitionalTF1D {
            isovalue: spec.isovalue,
            delta_v: spec.delta_v,
            local_tf: spec.local_tf()?,
            std_sample_distance: spec.std_sample_distance,
        })
    }

    fn node(&self, i: usize) -> f64 {
        self.isovalue + (i as f64 + 0.5) * self.delta_v / self.local_tf.len() as f64
    }
}

/// RGB and alpha at the reference sample distance.
pub fn eval_tf(tf: &TransitionalTF1D, v: f64) -> (Rgb, f64) {
    let entries = &tf.local_tf.entries;
    let n = entries.len();
    if v < tf.isovalue {
        return ([0.0; 3], 0.0);
    }
    if v <= tf.node(0) {
        return (entries[0].rgb, entries[0].alpha);
    }
    if v >= tf.node(n - 1) {
        return (entries[n - 1].rgb, entries[n - 1].alpha);
    }
    let pos = (v - tf.isovalue) / tf.delta_v * n as f64 - 0.5;
    let i = (pos.floor() as usize).min(n - 2);
    let f = pos - i as f64;
    let (a, b) = (&entries[i], &entries[i + 1]);
    let mut rgb = [0.0; 3];
    for c in 0..3 {
        rgb[c] = a.rgb[c] + f * (b.rgb[c] - a.rgb[c]);
    }
    (rgb, a.alpha + f * (b.alpha - a.alpha))
}

#[derive(Debug, Clone)]
pub struct FvrOptions {
    pub background: Rgb,
    /// Optional gradient shading of each sample; off by default.
    pub shading: Option<ShadingParams>,
    /// Empty selects the camera headlight.
    pub lights: Vec<Light>,
}

impl Default for FvrOptions {
    fn default() -> Self {
        FvrOptions { background: [0.0; 3], shading: None, lights: Vec::new() }
    }
}

/// Composites one ray front to back; returns the color and accumulated alpha.
pub fn composite_ray(
    vol: &ScalarVolume,
    ray: &crate::raycast::Ray,
    tf: &TransitionalTF1D,
    sample_dist: f64,
    crop: &CropBounds,
    options: &FvrOptions,
    lights: &[Light],
) -> (Rgb, f64) {
    let (lo, hi) = crop.world_box(vol.spacing());
    let Some((t0, t1)) = clip_to_box(ray, lo, hi) else {
        return ([0.0; 3], 0.0);
    };
    let mut color = [0.0; 3];
    let mut alpha = 0.0;
    let len = t1 - t0;
    let full = (len / sample_dist).floor() as u64;
    let rem = len - full as f64 * sample_dist;
    let composite = |t: f64, seg: f64, color: &mut Rgb, alpha: &mut f64| {
        let p = ray.at(t);
        let (mut rgb, a_std) = eval_tf(tf, vol.sample_trilinear(p));
        if a_std <= 0.0 {
            return;
        }
        let exponent = seg / tf.std_sample_distance;
        let a = if a_std >= 1.0 {
            1.0
        } else if exponent == 1.0 {
            a_std
        } else {
            1.0 - (1.0 - a_std).powf(exponent)
        };
        if let Some(sp) = &options.shading {
            rgb = shade(rgb, vol.gradient_central(p), lights, ray.dir, sp);
        }
        let w = (1.0 - *alpha) * a;
        for c in 0..3 {
            color[c] += w * rgb[c];
        }
        *alpha += w;
    };
    for k in 0..full {
        composite(t0 + (k as f64 + 0.5) * sample_dist, sample_dist, &mut color, &mut alpha);
        if alpha >= EARLY_TERMINATION {
            return (color, alpha.min(1.0));
        }
    }
    if rem > 1e-12 * sample_dist {
        composite(t1 - 0.5 * rem, rem, &mut color, &mut alpha);
    }
    (color, alpha.min(1.0))
}

pub fn render_fvr(
    vol: &ScalarVolume,
    camera: &Camera,
    tf: &TransitionalTF1D,
    sample_dist: f64,
    crop: &CropBounds,
    options: &FvrOptions,
) -> Image {
    assert!(sample_dist > 0.0, "sample distance must be positive");
    let rig = camera.rig();
    let lights = if options.lights.is_empty() { headlight(camera) } else { options.lights.clone() };
    let pixels = par_tiles(camera.width(), camera.height(), |x, y| {
        let (c, a) = composite_ray(vol, &rig.ray(x, y), tf, sample_dist, crop, options, &lights);
        let bg = options.background;
        [
            (c[0] + (1.0 - a) * bg[0]).clamp(0.0, 1.0),
            (c[1] + (1.0 - a) * bg[1]).clamp(0.0, 1.0),
            (c[2] + (1.0 - a) * bg[2]).clamp(0.0, 1.0),
        ]
    });
    Image { width: camera.width(), height: camera.height(), pixels }
}
