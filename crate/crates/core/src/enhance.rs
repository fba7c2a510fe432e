//! Isosurface color enhancement.
//!
//! The neighbourhood behind an isosurface is treated as a thin semi-transparent
//! layer whose opacity ramps from 0 at `isovalue` to 1 at `isovalue + Δv`.
//! Along a ray the layer is `Δl ≈ Δv / rate` thick, where `rate` is the
//! directional derivative at the hit. Normalizing by
//! `densityFactor = Δv / stdSampleDistance` gives `speed`, and the composited
//! layer color depends on `speed` alone, so it is precomputed once per
//! transfer function into a log-sampled [`SpeedColorMap`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{rgb_add, rgb_clamp, rgb_scale, Rgb, Vec3};
use crate::raycast::Ray;
use crate::volume::ScalarVolume;

/// Lower bound on the scalar changing rate, per world unit.
pub const RATE_FLOOR: f64 = 1e-6;

/// Speed used for the last map entry, whose sampling argument is `−ln 0`.
pub const SPEED_LIMIT: f64 = 1e6;

pub const DEFAULT_MAP_SIZE: usize = 256;
pub const DEFAULT_TF_ENTRIES: usize = 16;
pub const DEFAULT_DEEP_MAX_STEPS: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfEntry {
    pub alpha: f64,
    pub rgb: Rgb,
}

/// Evenly spaced samples of the transitional section, nearest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocalTransferFunction {
    pub entries: Vec<TfEntry>,
}

impl LocalTransferFunction {
    pub fn new(entries: Vec<TfEntry>) -> Result<Self> {
        let tf = LocalTransferFunction { entries };
        tf.validate()?;
        Ok(tf)
    }

    pub fn monochrome(rgb: Rgb, n: usize) -> Self {
        let n = n.max(1);
        let entries = (1..=n).map(|i| TfEntry { alpha: i as f64 / n as f64, rgb }).collect();
        LocalTransferFunction { entries }
    }

    /// `n` entries interpolating color from `near` to `far` with alpha rising
    /// linearly to 1.
    pub fn gradient(near: Rgb, far: Rgb, n: usize) -> Self {
        let n = n.max(1);
        let entries = (1..=n)
            .map(|i| {
                let t = if n == 1 { 1.0 } else { (i - 1) as f64 / (n - 1) as f64 };
                TfEntry {
                    alpha: i as f64 / n as f64,
                    rgb: [
                        near[0] + (far[0] - near[0]) * t,
                        near[1] + (far[1] - near[1]) * t,
                        near[2] + (far[2] - near[2]) * t,
                    ],
                }
            })
            .collect();
        LocalTransferFunction { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.entries.last() else {
            return Err(Error::Config("transfer function needs at least one entry".into()));
        };
        if last.alpha != 1.0 {
            return Err(Error::Config(format!("last transfer function entry must be opaque, got alpha {}", last.alpha)));
        }
        for (i, e) in self.entries.iter().enumerate() {
            let in_unit = |v: f64| (0.0..=1.0).contains(&v);
            if !in_unit(e.alpha) || !e.rgb.iter().all(|&c| in_unit(c)) {
                return Err(Error::Config(format!("transfer function entry {i} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// How the per-sample alpha is derived from the transfer-function alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaForm {
    /// Opacity correction `1 − (1 − α_T)^(1 / (n·speed))`.
    #[default]
    Corrected,
    /// `α_T^(1 / (n·speed))` taken verbatim.
    Literal,
}

/// # Panics
/// If `speed <= 0` or `n == 0`.
#[inline]
pub fn per_sample_alpha(alpha_t: f64, speed: f64, n: usize) -> f64 {
    per_sample_alpha_with(alpha_t, speed, n, AlphaForm::Corrected)
}

#[inline]
pub fn per_sample_alpha_with(alpha_t: f64, speed: f64, n: usize, form: AlphaForm) -> f64 {
    assert!(speed > 0.0, "speed must be positive, got {speed}");
    assert!(n >= 1, "transfer function must have at least one entry");
    let exponent = 1.0 / (n as f64 * speed);
    match form {
        AlphaForm::Corrected => {
            if alpha_t >= 1.0 {
                1.0
            } else {
                1.0 - (1.0 - alpha_t).powf(exponent)
            }
        }
        AlphaForm::Literal => alpha_t.powf(exponent),
    }
}

/// Front-to-back blend of the corrected samples, nearest first.
pub fn accumulate_color(tf: &LocalTransferFunction, speed: f64) -> Rgb {
    accumulate_color_with(tf, speed, AlphaForm::Corrected)
}

pub fn accumulate_color_with(tf: &LocalTransferFunction, speed: f64, form: AlphaForm) -> Rgb {
    let n = tf.len();
    let mut color = [0.0; 3];
    let mut transmittance = 1.0;
    for e in &tf.entries {
        let a = per_sample_alpha_with(e.alpha, speed, n, form);
        color = rgb_add(color, rgb_scale(e.rgb, a * transmittance));
        transmittance *= 1.0 - a;
        if transmittance <= 0.0 {
            break;
        }
    }
    rgb_clamp(color)
}

/// Log-sampled map from speed to accumulated color: entry `j` (1-based) holds
/// the color at speed `−ln(1 − j/m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedColorMap {
    colors: Vec<Rgb>,
}

impl SpeedColorMap {
    pub fn m(&self) -> usize {
        self.colors.len()
    }

    /// Entry `j`, 1-based.
    pub fn entry(&self, j: usize) -> Rgb {
        self.colors[j - 1]
    }

    pub fn colors(&self) -> &[Rgb] {
        &self.colors
    }

    /// Sampling speed of entry `j` (1-based).
    pub fn speed_of(&self, j: usize) -> f64 {
        let m = self.m();
        if j >= m {
            SPEED_LIMIT
        } else {
            -(1.0 - j as f64 / m as f64).ln()
        }
    }

    #[inline]
    pub fn index_of(&self, speed: f64) -> usize {
        let m = self.m();
        let j = (m as f64 * (1.0 - (-speed).exp())).round();
        (j as usize).clamp(1, m)
    }

    #[inline]
    pub fn lookup(&self, speed: f64) -> Rgb {
        self.entry(self.index_of(speed))
    }
}

/// # Panics
/// If `m < 2`.
pub fn build_speed_color_map(tf: &LocalTransferFunction, m: usize) -> SpeedColorMap {
    build_speed_color_map_with(tf, m, AlphaForm::Corrected)
}

pub fn build_speed_color_map_with(tf: &LocalTransferFunction, m: usize, form: AlphaForm) -> SpeedColorMap {
    assert!(m >= 2, "speed-color map needs at least two entries");
    let colors = (1..=m)
        .map(|j| {
            let speed = if j == m { SPEED_LIMIT } else { -(1.0 - j as f64 / m as f64).ln() };
            accumulate_color_with(tf, speed, form)
        })
        .collect();
    SpeedColorMap { colors }
}

pub fn lookup_color(map: &SpeedColorMap, speed: f64) -> Rgb {
    map.lookup(speed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    /// Gradient projected on the ray.
    #[default]
    Shallow,
    /// March along the ray until the scalar reaches `isovalue + Δv`.
    Deep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhanceParams {
    pub isovalue: f64,
    pub delta_v: f64,
    pub std_sample_distance: f64,
    pub mode: RateMode,
    pub deep_step: f64,
    pub deep_max_steps: u32,
}

impl EnhanceParams {
    pub fn density_factor(&self) -> f64 {
        self.delta_v / self.std_sample_distance
    }

    pub fn speed(&self, rate: f64) -> f64 {
        rate / self.density_factor()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.isovalue > 0.0 && self.isovalue < 1.0) {
            return Err(Error::Config(format!("isovalue must be in (0, 1), got {}", self.isovalue)));
        }
        if !(self.delta_v > 0.0) || !(self.std_sample_distance > 0.0) || !(self.deep_step > 0.0) {
            return Err(Error::Config("delta_v, std_sample_distance and deep_step must be positive".into()));
        }
        if self.deep_max_steps == 0 {
            return Err(Error::Config("deep_max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Default deep-search step: half the smallest cell extent.
pub fn default_deep_step(vol: &ScalarVolume) -> f64 {
    let s = vol.spacing();
    0.5 * s.x.min(s.y).min(s.z)
}

/// Rate estimate at a hit, its speed and the looked-up layer color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSample {
    pub rate: f64,
    pub speed: f64,
    pub color: Rgb,
}

#[inline]
pub fn rate_shallow(gradient: Vec3, ray_dir: Vec3) -> f64 {
    gradient.dot(ray_dir).abs().max(RATE_FLOOR)
}

/// `Δv / Δl`, where `Δl` is the arc length from `hit_position` until the
/// sampled scalar first reaches `isovalue + Δv`. Clamped to
/// `Δv / (deep_max_steps · deep_step)` if it is never reached inside the
/// volume.
pub fn rate_deep(vol: &ScalarVolume, hit_position: Vec3, ray: &Ray, params: &EnhanceParams) -> f64 {
    let target = params.isovalue + params.delta_v;
    let step = params.deep_step;
    let mut prev = vol.sample_trilinear(hit_position);
    for k in 1..=params.deep_max_steps {
        let p = hit_position + ray.dir * (k as f64 * step);
        if !vol.contains(p) {
            break;
        }
        let v = vol.sample_trilinear(p);
        if v >= target {
            let frac = if v > prev { ((target - prev) / (v - prev)).clamp(0.0, 1.0) } else { 1.0 };
            let dl = ((k - 1) as f64 + frac) * step;
            return (params.delta_v / dl.max(f64::MIN_POSITIVE)).max(RATE_FLOOR);
        }
        prev = v;
    }
    (params.delta_v / (params.deep_max_steps as f64 * step)).max(RATE_FLOOR)
}

/// Material color at a hit: rate estimate, speed and map lookup.
pub fn material_at(
    vol: &ScalarVolume,
    hit_position: Vec3,
    gradient: Vec3,
    ray: &Ray,
    params: &EnhanceParams,
    map: &SpeedColorMap,
) -> MaterialSample {
    let rate = match params.mode {
        RateMode::Shallow => rate_shallow(gradient, ray.dir),
        RateMode::Deep => rate_deep(vol, hit_position, ray, params),
    };
    let speed = params.speed(rate);
    MaterialSample { rate, speed, color: map.lookup(speed) }
}

/// Directional light; `direction` points from the surface toward the light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Light {
    pub direction: Vec3,
    #[serde(default = "white")]
    pub color: Rgb,
}

fn white() -> Rgb {
    [1.0; 3]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadingParams {
    pub ambient: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub shininess: f64,
}

impl Default for ShadingParams {
    fn default() -> Self {
        ShadingParams { ambient: 0.15, diffuse: 0.7, specular: 0.15, shininess: 32.0 }
    }
}

/// Blinn-Phong with the normal `−∇v`, flipped to face the viewer. A zero
/// gradient leaves only the ambient term.
pub fn shade(material: Rgb, gradient: Vec3, lights: &[Light], view_dir: Vec3, params: &ShadingParams) -> Rgb {
    let ambient = rgb_scale(material, params.ambient);
    let glen = gradient.length();
    if glen == 0.0 || !glen.is_finite() {
        return rgb_clamp(ambient);
    }
    let to_eye = -view_dir.normalized();
    let mut n = -(gradient / glen);
    if n.dot(to_eye) < 0.0 {
        n = -n;
    }
    let mut out = ambient;
    for light in lights {
        let l = light.direction.normalized();
        let ndl = n.dot(l).max(0.0);
        if ndl <= 0.0 {
            continue;
        }
        let h = (l + to_eye).normalized();
        let spec = params.specular * n.dot(h).max(0.0).powf(params.shininess);
        for c in 0..3 {
            out[c] += light.color[c] * (material[c] * params.diffuse * ndl + spec);
        }
    }
    rgb_clamp(out)
}

/// Transfer-function file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunctionSpec {
    pub isovalue: f64,
    pub delta_v: f64,
    pub std_sample_distance: f64,
    pub entries: Vec<TfEntry>,
    #[serde(default)]
    pub mode: RateMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep_max_steps: Option<u32>,
    #[serde(default, skip_serializing_if = "is_default_form")]
    pub alpha_form: AlphaForm,
}

fn is_default_form(f: &AlphaForm) -> bool {
    *f == AlphaForm::Corrected
}

impl TransferFunctionSpec {
    pub fn local_tf(&self) -> Result<LocalTransferFunction> {
        LocalTransferFunction::new(self.entries.clone())
    }

    /// Resolves defaults that depend on the volume and validates.
    pub fn params_for(&self, vol: &ScalarVolume) -> Result<EnhanceParams> {
        let p = EnhanceParams {
            isovalue: self.isovalue,
            delta_v: self.delta_v,
            std_sample_distance: self.std_sample_distance,
            mode: self.mode,
            deep_step: self.deep_step.unwrap_or_else(|| default_deep_step(vol)),
            deep_max_steps: self.deep_max_steps.unwrap_or(DEFAULT_DEEP_MAX_STEPS),
        };
        p.validate()?;
        self.local_tf()?;
        Ok(p)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TransferFunctionSpec = serde_json::from_str(text).map_err(|e| Error::json("transfer function", e))?;
        spec.local_tf()?;
        Ok(spec)
    }

    /// A warm two-color section used by the CLI and examples.
    pub fn example(isovalue: f64, std_sample_distance: f64) -> Self {
        TransferFunctionSpec {
            isovalue,
            delta_v: 0.1,
            std_sample_distance,
            entries: LocalTransferFunction::gradient([0.95, 0.85, 0.55], [0.75, 0.15, 0.1], DEFAULT_TF_ENTRIES).entries,
            mode: RateMode::Shallow,
            deep_step: None,
            deep_max_steps: None,
            alpha_form: AlphaForm::Corrected,
        }
    }
}
