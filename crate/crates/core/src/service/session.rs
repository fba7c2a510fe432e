//! Per-session exploration state and the commands that mutate it.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::PeelFile;
use crate::enhance::TransferFunctionSpec;
use crate::error::Error;
use crate::exploration::{build_peel_buffer, pick_voxels, PeelWindow, SeedSets, SeedTarget};
use crate::geom::{Rgb, Vec3};
use crate::isoseg::{segment, CutResult};
use crate::raycast::{Camera, CropBounds};
use crate::render::{Frame, RenderOptions, SurfaceAppearance};
use crate::scene::{bake_structure, save_scene, Scene, SurfaceStructure};
use crate::synth::{generate_synthetic, SyntheticSpec};
use crate::volume::{load_pair, ScalarVolume};

/// Error carrying the HTTP status it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: u16,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(msg: impl Into<String>) -> Self {
        ApiError { status: 400, message: msg.into() }
    }

    pub fn not_found(msg: impl Into<String>) -> Self {
        ApiError { status: 404, message: msg.into() }
    }

    pub fn conflict(msg: impl Into<String>) -> Self {
        ApiError { status: 409, message: msg.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Image(_) => ApiError { status: 500, message: e.to_string() },
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;

pub const DEFAULT_IMAGE_DIMS: [u32; 2] = [256, 256];
pub const DEFAULT_SURFACE_COLOR: Rgb = [0.9, 0.9, 0.9];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateBody {
    #[serde(default)]
    pub volume: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub camera: Option<Camera>,
    #[serde(default)]
    pub isovalue: Option<f64>,
}

/// `tf` holds a transfer function without (or with an ignored) isovalue;
/// absent, the surface is drawn in a single color.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsoBody {
    pub isovalue: f64,
    #[serde(default)]
    pub tf: Option<Value>,
    #[serde(default)]
    pub color: Option<Rgb>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickBody {
    pub pixels: Vec<[u32; 2]>,
    pub target: SeedTarget,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentBody {
    #[serde(default)]
    pub crop: Option<CropBounds>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureBody {
    pub side: SeedTarget,
    pub id: u8,
    pub isovalue: f64,
    pub tf: Value,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportBody {
    pub dir: PathBuf,
    pub name: String,
}

/// Commands accepted over HTTP bodies and, tagged, over the stream socket.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "op", content = "body", rename_all = "kebab-case")]
pub enum Command {
    Camera(Camera),
    Iso(IsoBody),
    Crop(CropBounds),
    PeelWindows(PeelFile),
    ClearPeelWindows,
    Pick(PickBody),
    Segment(Option<SegmentBody>),
    Structures(StructureBody),
    Export(ExportBody),
}

impl Command {
    /// Export writes files but leaves the session unchanged.
    pub fn mutates(&self) -> bool {
        !matches!(self, Command::Export(_))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureSummary {
    pub id: u8,
    pub isovalue: f64,
    pub cell_count: usize,
}

#[derive(Debug, Clone)]
pub struct CachedFrame {
    pub revision: u64,
    pub frame: Arc<Frame>,
}

/// Everything needed to render one revision without holding the session.
#[derive(Debug, Clone)]
pub struct RenderJob {
    pub revision: u64,
    pub scene: Scene,
    pub options: RenderOptions,
}

impl RenderJob {
    pub fn run(&self) -> Frame {
        self.scene.render(&self.options)
    }
}

#[derive(Debug)]
pub struct Session {
    pub scene: Scene,
    /// Where the volume came from; synthetic volumes are written on export.
    pub volume_ref: Option<PathBuf>,
    pub isovalue: f64,
    pub seeds: SeedSets,
    pub peel_windows: Vec<PeelWindow>,
    pub last_cut: Option<CutResult>,
    pub last_frame: Option<CachedFrame>,
    pub revision: u64,
}

fn tf_with_iso(tf: &Value, isovalue: f64) -> ApiResult<TransferFunctionSpec> {
    let mut v = tf.clone();
    let obj = v.as_object_mut().ok_or_else(|| ApiError::bad_request("tf: expected an object"))?;
    obj.insert("isovalue".into(), json!(isovalue));
    let spec: TransferFunctionSpec =
        serde_json::from_value(v).map_err(|e| ApiError::bad_request(format!("tf: {e}")))?;
    spec.local_tf().map_err(|e| ApiError::bad_request(format!("tf: {e}")))?;
    Ok(spec)
}

fn check_iso(isovalue: f64) -> ApiResult<()> {
    if isovalue > 0.0 && isovalue < 1.0 {
        Ok(())
    } else {
        Err(ApiError::bad_request(format!("isovalue: must be in (0, 1), got {isovalue}")))
    }
}

pub fn default_camera(vol: &ScalarVolume) -> Camera {
    Camera::orbit(vol, Vec3::new(0.35, 0.25, 1.0), 2.4, 35.0, DEFAULT_IMAGE_DIMS)
}

impl Session {
    pub fn create(body: CreateBody, map_size: usize) -> ApiResult<Session> {
        let (volume, volume_ref) = match (&body.volume, &body.synthetic) {
            (Some(p), None) => (load_pair(p)?, Some(p.clone())),
            (None, Some(spec)) => (generate_synthetic(spec)?, None),
            _ => return Err(ApiError::bad_request("exactly one of volume or synthetic is required")),
        };
        let camera = match body.camera {
            Some(c) => {
                c.validate().map_err(|e| ApiError::bad_request(format!("camera: {e}")))?;
                c
            }
            None => default_camera(&volume),
        };
        let isovalue = body.isovalue.unwrap_or(0.5);
        check_iso(isovalue)?;
        let mut scene = Scene::new(Arc::new(volume), camera);
        scene.map_size = map_size;
        scene.single_iso = Some(SurfaceAppearance::mono(isovalue, DEFAULT_SURFACE_COLOR));
        Ok(Session {
            scene,
            volume_ref,
            isovalue,
            seeds: SeedSets::new(),
            peel_windows: Vec::new(),
            last_cut: None,
            last_frame: None,
            revision: 0,
        })
    }

    pub fn render_options(&self) -> RenderOptions {
        let mut o = RenderOptions::default();
        if !self.peel_windows.is_empty() {
            o.peel = Some(build_peel_buffer(&self.peel_windows, self.scene.camera.image_dims));
        }
        if !self.seeds.is_empty() {
            o.selection = Some(self.seeds.clone());
        }
        o
    }

    pub fn render_job(&self) -> RenderJob {
        RenderJob { revision: self.revision, scene: self.scene.clone(), options: self.render_options() }
    }

    pub fn cached_frame(&self) -> Option<Arc<Frame>> {
        self.last_frame.as_ref().filter(|c| c.revision == self.revision).map(|c| c.frame.clone())
    }

    /// Keeps a rendered frame if it still matches the current revision.
    pub fn store_frame(&mut self, revision: u64, frame: Arc<Frame>) {
        if revision == self.revision {
            self.last_frame = Some(CachedFrame { revision, frame });
        }
    }

    /// Current frame, rendering in place when the cache is stale.
    pub fn frame(&mut self) -> Arc<Frame> {
        if let Some(f) = self.cached_frame() {
            return f;
        }
        let f = Arc::new(self.render_job().run());
        self.store_frame(self.revision, f.clone());
        f
    }

    pub fn structures(&self) -> Vec<StructureSummary> {
        let hist = self.scene.labels.histogram();
        self.scene
            .structures
            .values()
            .map(|s| StructureSummary { id: s.id, isovalue: s.isovalue(), cell_count: hist[s.id as usize] })
            .collect()
    }

    /// Applies one command; mutations bump the revision.
    pub fn apply(&mut self, cmd: Command) -> ApiResult<Value> {
        let mutates = cmd.mutates();
        let mut result = self.apply_inner(cmd)?;
        if mutates {
            self.revision += 1;
        }
        if let Value::Object(m) = &mut result {
            m.insert("revision".into(), json!(self.revision));
        }
        Ok(result)
    }

    fn apply_inner(&mut self, cmd: Command) -> ApiResult<Value> {
        match cmd {
            Command::Camera(c) => {
                c.validate().map_err(|e| ApiError::bad_request(format!("camera: {e}")))?;
                self.scene.camera = c;
                Ok(json!({}))
            }
            Command::Iso(body) => {
                check_iso(body.isovalue)?;
                let appearance = match &body.tf {
                    Some(tf) => {
                        let spec = tf_with_iso(tf, body.isovalue)?;
                        SurfaceAppearance::from_spec(&spec, &self.scene.volume, self.scene.map_size)?
                    }
                    None => SurfaceAppearance::mono(body.isovalue, body.color.unwrap_or(DEFAULT_SURFACE_COLOR)),
                };
                self.isovalue = body.isovalue;
                self.scene.single_iso = Some(appearance);
                Ok(json!({}))
            }
            Command::Crop(c) => {
                c.validate(self.scene.volume.cell_dims()).map_err(|e| ApiError::bad_request(format!("crop: {e}")))?;
                self.scene.crop = c;
                Ok(json!({}))
            }
            Command::PeelWindows(p) => {
                self.peel_windows.extend(p.rects);
                Ok(json!({"windows": self.peel_windows.len()}))
            }
            Command::ClearPeelWindows => {
                self.peel_windows.clear();
                Ok(json!({"windows": 0}))
            }
            Command::Pick(body) => {
                let frame = self.frame();
                let picked = pick_voxels(&frame.ids, &body.pixels);
                let added = self.seeds.add(body.target, picked);
                Ok(json!({"added": added}))
            }
            Command::Segment(body) => {
                if self.seeds.foreground().is_empty() || self.seeds.background().is_empty() {
                    return Err(ApiError::conflict("segmentation needs both foreground and background seeds"));
                }
                let crop = body.and_then(|b| b.crop).unwrap_or(self.scene.crop);
                let (_, cut) = segment(&self.scene.volume, self.isovalue, &self.seeds, &crop)?;
                let summary = json!({
                    "node_count": cut.node_count,
                    "cut_weight": cut.cut_weight,
                    "solve_ms": cut.solve_ms(),
                    "foreground": cut.foreground_cells.len(),
                    "background": cut.background_cells.len(),
                });
                self.last_cut = Some(cut);
                Ok(summary)
            }
            Command::Structures(body) => {
                let cut = self.last_cut.as_ref().ok_or_else(|| ApiError::conflict("no segmentation to bake"))?;
                check_iso(body.isovalue)?;
                let spec = tf_with_iso(&body.tf, body.isovalue)?;
                let structure = SurfaceStructure::new(body.id, body.isovalue, &spec, &self.scene.volume, self.scene.map_size)?;
                let cells = match body.side {
                    SeedTarget::Fg => &cut.foreground_cells,
                    SeedTarget::Bg => &cut.background_cells,
                };
                bake_structure(&mut self.scene.labels, cells, body.id)?;
                let n = cells.len();
                self.scene.add_structure(structure)?;
                // The seeds were consumed by the cut; the preview would only
                // hide the baked colors.
                self.seeds.clear();
                Ok(json!({"id": body.id, "cells": n}))
            }
            Command::Export(body) => {
                let written = self.export(&body.dir, &body.name)?;
                Ok(json!({"scene": written}))
            }
        }
    }

    /// Writes a scene file (plus the volume, for synthetic sessions).
    pub fn export(&self, dir: &Path, name: &str) -> ApiResult<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| ApiError { status: 500, message: e.to_string() })?;
        let volume_ref = match &self.volume_ref {
            Some(p) => std::path::absolute(p).unwrap_or_else(|_| p.clone()),
            None => {
                let stem = PathBuf::from(format!("{name}.volume"));
                self.scene.volume.save_pair(dir.join(&stem))?;
                stem
            }
        };
        Ok(save_scene(&self.scene, dir, name, &volume_ref)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commands_parse_with_tags() {
        let c: Command = serde_json::from_str(r#"{"op":"segment"}"#).unwrap();
        assert!(matches!(c, Command::Segment(None)));
        let c: Command = serde_json::from_str(r#"{"op":"clear-peel-windows"}"#).unwrap();
        assert!(matches!(c, Command::ClearPeelWindows));
        let c: Command = serde_json::from_str(r#"{"op":"pick","body":{"pixels":[[1,2]],"target":"fg"}}"#).unwrap();
        assert!(matches!(c, Command::Pick(_)));
    }
}
