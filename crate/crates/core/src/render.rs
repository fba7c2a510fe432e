//! Tile-parallel first-hit isosurface renderer.
//!
//! One code path serves single-isosurface and labeled multi-structure
//! rendering: a [`SurfaceModel`] says which isovalue (if any) each cell is
//! tested against and how a structure is colored.

use rayon::prelude::*;

use crate::enhance::{
    build_speed_color_map, material_at, EnhanceParams, Light, LocalTransferFunction, ShadingParams, SpeedColorMap,
    TransferFunctionSpec, shade,
};
use crate::error::Result;
use crate::exploration::{selection_color, PeelBuffer, SeedSets, VoxelIdBuffer};
use crate::frame::Image;
use crate::geom::{Rgb, Vec3};
use crate::raycast::{find_crossing, Camera, CropBounds, Hit, SingleIso, SurfaceLookup};
use crate::volume::ScalarVolume;

pub const TILE_SIZE: u32 = 32;

/// Material coloring of one surface.
#[derive(Debug, Clone, PartialEq)]
pub enum ColorMode {
    /// Conventional single-color isosurface.
    Mono(Rgb),
    /// Speed-color lookup driven by the rate estimate at the hit.
    Enhanced { params: EnhanceParams, map: SpeedColorMap },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceAppearance {
    pub isovalue: f64,
    pub color: ColorMode,
}

impl SurfaceAppearance {
    pub fn mono(isovalue: f64, color: Rgb) -> Self {
        SurfaceAppearance { isovalue, color: ColorMode::Mono(color) }
    }

    pub fn enhanced(params: EnhanceParams, tf: &LocalTransferFunction, map_size: usize) -> Self {
        SurfaceAppearance {
            isovalue: params.isovalue,
            color: ColorMode::Enhanced { params, map: build_speed_color_map(tf, map_size) },
        }
    }

    pub fn from_spec(spec: &TransferFunctionSpec, vol: &ScalarVolume, map_size: usize) -> Result<Self> {
        let params = spec.params_for(vol)?;
        Ok(Self::enhanced(params, &spec.local_tf()?, map_size))
    }

    /// Material color at a hit, before lighting.
    #[inline]
    pub fn material(&self, vol: &ScalarVolume, hit: &Hit, gradient: Vec3, ray: &crate::raycast::Ray) -> Rgb {
        match &self.color {
            ColorMode::Mono(c) => *c,
            ColorMode::Enhanced { params, map } => material_at(vol, hit.position, gradient, ray, params, map).color,
        }
    }
}

pub trait SurfaceModel: SurfaceLookup + Sync {
    fn appearance(&self, structure_id: u8) -> &SurfaceAppearance;
}

/// Every cell is tested against one isovalue.
#[derive(Debug, Clone)]
pub struct SingleSurface {
    pub appearance: SurfaceAppearance,
}

impl SurfaceLookup for SingleSurface {
    #[inline]
    fn surface_at(&self, cell: [usize; 3]) -> Option<(f64, u8)> {
        SingleIso(self.appearance.isovalue).surface_at(cell)
    }

    fn iso_bounds(&self) -> (f64, f64) {
        (self.appearance.isovalue, self.appearance.isovalue)
    }
}

impl SurfaceModel for SingleSurface {
    fn appearance(&self, _structure_id: u8) -> &SurfaceAppearance {
        &self.appearance
    }
}

#[derive(Debug, Clone)]
pub struct RenderOptions {
    /// `None` renders the unlit material color.
    pub shading: Option<ShadingParams>,
    /// Empty selects the camera headlight.
    pub lights: Vec<Light>,
    pub background: Rgb,
    pub peel: Option<PeelBuffer>,
    pub selection: Option<SeedSets>,
    pub keep_hits: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            shading: Some(ShadingParams::default()),
            lights: Vec::new(),
            background: [0.0; 3],
            peel: None,
            selection: None,
            keep_hits: false,
        }
    }
}

/// White light slightly above and left of the eye.
pub fn headlight(camera: &Camera) -> Vec<Light> {
    let fwd = (camera.look_at - camera.eye).normalized();
    let right = fwd.cross(camera.up).normalized();
    let up = right.cross(fwd);
    vec![Light { direction: (-fwd + up * 0.35 - right * 0.25).normalized(), color: [1.0; 3] }]
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub image: Image,
    pub ids: VoxelIdBuffer,
    /// Structure id per pixel, 0 on misses and in single-surface mode.
    pub structures: Vec<u8>,
    /// Present when [`RenderOptions::keep_hits`] is set.
    pub hits: Option<Vec<Option<Hit>>>,
}

impl Frame {
    pub fn hit(&self, x: u32, y: u32) -> Option<Hit> {
        self.hits.as_ref().and_then(|h| h[(y * self.image.width + x) as usize])
    }

    pub fn structure(&self, x: u32, y: u32) -> u8 {
        self.structures[(y * self.image.width + x) as usize]
    }
}

/// Runs `f` for every pixel over 32×32 tiles in parallel and returns the
/// results in row-major order.
pub fn par_tiles<T, F>(width: u32, height: u32, f: F) -> Vec<T>
where
    T: Send + Clone + Default,
    F: Fn(u32, u32) -> T + Sync,
{
    let tiles_x = width.div_ceil(TILE_SIZE);
    let tiles_y = height.div_ceil(TILE_SIZE);
    let tiles: Vec<(u32, u32, Vec<T>)> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|t| {
            let x0 = (t % tiles_x) * TILE_SIZE;
            let y0 = (t / tiles_x) * TILE_SIZE;
            let x1 = (x0 + TILE_SIZE).min(width);
            let y1 = (y0 + TILE_SIZE).min(height);
            let mut out = Vec::with_capacity(((x1 - x0) * (y1 - y0)) as usize);
            for y in y0..y1 {
                for x in x0..x1 {
                    out.push(f(x, y));
                }
            }
            (x0, y0, out)
        })
        .collect();
    let mut result = vec![T::default(); (width * height) as usize];
    for (x0, y0, out) in tiles {
        let w = (TILE_SIZE).min(width - x0) as usize;
        for (row, chunk) in out.chunks(w).enumerate() {
            let start = ((y0 as usize + row) * width as usize) + x0 as usize;
            result[start..start + chunk.len()].clone_from_slice(chunk);
        }
    }
    result
}

#[derive(Debug, Clone, Default)]
struct PixelOut {
    color: Rgb,
    id: i32,
    structure: u8,
    hit: Option<Hit>,
}

pub fn render_surfaces<M: SurfaceModel>(
    vol: &ScalarVolume,
    camera: &Camera,
    crop: &CropBounds,
    model: &M,
    options: &RenderOptions,
) -> Frame {
    let rig = camera.rig();
    let (w, h) = (camera.width(), camera.height());
    let lights = if options.lights.is_empty() { headlight(camera) } else { options.lights.clone() };
    let pixels = par_tiles(w, h, |x, y| {
        let ray = rig.ray(x, y);
        let skip = options.peel.as_ref().map_or(0, |p| p.get(x, y));
        let Some(hit) = find_crossing(&ray, vol, crop, skip, model) else {
            return PixelOut { color: options.background, id: VoxelIdBuffer::MISS, structure: 0, hit: None };
        };
        let appearance = model.appearance(hit.structure_id);
        let gradient = vol.gradient_central(hit.position);
        let mut material = appearance.material(vol, &hit, gradient, &ray);
        if let Some(seeds) = &options.selection {
            material = selection_color(hit.cell_id, seeds, material);
        }
        let color = match &options.shading {
            Some(sp) => shade(material, gradient, &lights, ray.dir, sp),
            None => material,
        };
        PixelOut {
            color,
            id: hit.cell_id.0 as i32,
            structure: hit.structure_id,
            hit: options.keep_hits.then_some(hit),
        }
    });
    let mut image = Image::new(w, h, options.background);
    let mut ids = Vec::with_capacity(pixels.len());
    let mut structures = Vec::with_capacity(pixels.len());
    let mut hits = options.keep_hits.then(|| Vec::with_capacity(pixels.len()));
    for (i, p) in pixels.into_iter().enumerate() {
        image.pixels[i] = p.color;
        ids.push(p.id);
        structures.push(p.structure);
        if let Some(hs) = hits.as_mut() {
            hs.push(p.hit);
        }
    }
    Frame { image, ids: VoxelIdBuffer::from_raw(w, h, ids), structures, hits }
}

/// Single-isosurface rendering (monotone or color enhanced).
pub fn render_isosurface(
    vol: &ScalarVolume,
    camera: &Camera,
    crop: &CropBounds,
    appearance: &SurfaceAppearance,
    options: &RenderOptions,
) -> Frame {
    let model = SingleSurface { appearance: appearance.clone() };
    render_surfaces(vol, camera, crop, &model, options)
}
