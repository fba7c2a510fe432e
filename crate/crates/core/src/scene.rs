//! Multiple surface structures in one volume: an 8-bit per-cell label grid
//! selects which structure's isovalue and speed-color row a cell uses.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::enhance::{EnhanceParams, Light, SpeedColorMap, TransferFunctionSpec, DEFAULT_MAP_SIZE};
use crate::error::{Error, Result};
use crate::raycast::{Camera, CellId, CropBounds, SurfaceLookup};
use crate::render::{render_isosurface, render_surfaces, ColorMode, Frame, RenderOptions, SurfaceAppearance, SurfaceModel};
use crate::volume::{load_pair, ScalarVolume};

/// Per-cell structure ids, 0 marking empty cells; x-fastest over cell dims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    cell_dims: [usize; 3],
    data: Vec<u8>,
}

impl LabelVolume {
    pub fn empty(cell_dims: [usize; 3]) -> Self {
        LabelVolume { cell_dims, data: vec![0; cell_dims.iter().product()] }
    }

    pub fn from_raw(cell_dims: [usize; 3], data: Vec<u8>) -> Result<Self> {
        let want: usize = cell_dims.iter().product();
        if data.len() != want {
            return Err(Error::Format(format!("label grid holds {} bytes, expected {want}", data.len())));
        }
        Ok(LabelVolume { cell_dims, data })
    }

    pub fn load(path: impl AsRef<Path>, cell_dims: [usize; 3]) -> Result<Self> {
        let path = path.as_ref();
        Self::from_raw(cell_dims, fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, &self.data).map_err(|e| Error::io(path, e))
    }

    pub fn cell_dims(&self) -> [usize; 3] {
        self.cell_dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, cell: [usize; 3]) -> u8 {
        self.data[cell[0] + self.cell_dims[0] * (cell[1] + self.cell_dims[1] * cell[2])]
    }

    #[inline]
    pub fn get_id(&self, id: CellId) -> u8 {
        self.data[id.0 as usize]
    }

    /// Count of cells per label value.
    pub fn histogram(&self) -> [usize; 256] {
        let mut h = [0usize; 256];
        for &l in &self.data {
            h[l as usize] += 1;
        }
        h
    }

    pub fn distinct_labels(&self) -> Vec<u8> {
        let h = self.histogram();
        (1..=255u8).filter(|&l| h[l as usize] > 0).collect()
    }
}

/// Writes `id` into every listed cell; later bakes overwrite earlier ones.
pub fn bake_structure(labels: &mut LabelVolume, cells: &[CellId], id: u8) -> Result<()> {
    if id == 0 {
        return Err(Error::Config("structure id 0 is reserved for empty cells".into()));
    }
    let n = labels.data.len();
    if let Some(bad) = cells.iter().find(|c| c.0 as usize >= n) {
        return Err(Error::Config(format!("cell id {bad} is outside the label grid")));
    }
    for c in cells {
        labels.data[c.0 as usize] = id;
    }
    Ok(())
}

/// One labeled surface: its isovalue, transfer function, rate parameters and
/// the speed-color row derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceStructure {
    pub id: u8,
    pub tf: TransferFunctionSpec,
    appearance: SurfaceAppearance,
}

impl SurfaceStructure {
    /// `isovalue` overrides the one in `tf`.
    pub fn new(id: u8, isovalue: f64, tf: &TransferFunctionSpec, vol: &ScalarVolume, map_size: usize) -> Result<Self> {
        if id == 0 {
            return Err(Error::Config("structure id 0 is reserved for empty cells".into()));
        }
        let tf = TransferFunctionSpec { isovalue, ..tf.clone() };
        let appearance = SurfaceAppearance::from_spec(&tf, vol, map_size)?;
        Ok(SurfaceStructure { id, tf, appearance })
    }

    pub fn isovalue(&self) -> f64 {
        self.appearance.isovalue
    }

    pub fn appearance(&self) -> &SurfaceAppearance {
        &self.appearance
    }

    pub fn enhance(&self) -> &EnhanceParams {
        match &self.appearance.color {
            ColorMode::Enhanced { params, .. } => params,
            ColorMode::Mono(_) => unreachable!("structures are always color enhanced"),
        }
    }

    pub fn lut_row(&self) -> &SpeedColorMap {
        match &self.appearance.color {
            ColorMode::Enhanced { map, .. } => map,
            ColorMode::Mono(_) => unreachable!("structures are always color enhanced"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub volume: Arc<ScalarVolume>,
    pub labels: LabelVolume,
    pub structures: BTreeMap<u8, SurfaceStructure>,
    pub camera: Camera,
    pub crop: CropBounds,
    pub lights: Vec<Light>,
    /// Used when no structure has been baked.
    pub single_iso: Option<SurfaceAppearance>,
    pub map_size: usize,
}

impl Scene {
    pub fn new(volume: Arc<ScalarVolume>, camera: Camera) -> Self {
        let cd = volume.cell_dims();
        Scene {
            labels: LabelVolume::empty(cd),
            crop: CropBounds::full(cd),
            volume,
            structures: BTreeMap::new(),
            camera,
            lights: Vec::new(),
            single_iso: None,
            map_size: DEFAULT_MAP_SIZE,
        }
    }

    pub fn add_structure(&mut self, s: SurfaceStructure) -> Result<()> {
        if self.structures.len() >= 255 && !self.structures.contains_key(&s.id) {
            return Err(Error::Config("at most 255 structures are allowed".into()));
        }
        self.structures.insert(s.id, s);
        Ok(())
    }

    /// Every nonzero label must name a structure.
    pub fn validate(&self) -> Result<()> {
        if self.labels.cell_dims() != self.volume.cell_dims() {
            return Err(Error::Config("label grid does not match the volume's cell dims".into()));
        }
        for l in self.labels.distinct_labels() {
            if !self.structures.contains_key(&l) {
                return Err(Error::Config(format!("label {l} has no structure")));
            }
        }
        self.camera.validate()?;
        self.crop.validate(self.volume.cell_dims())
    }

    /// Labeled rendering once any structure exists, else the single
    /// isosurface, else an empty frame.
    pub fn render(&self, options: &RenderOptions) -> Frame {
        let options = self.with_lights(options);
        match (&self.single_iso, self.structures.is_empty()) {
            (Some(app), true) => render_isosurface(&self.volume, &self.camera, &self.crop, app, &options),
            _ => render_scene(self, &options),
        }
    }

    fn with_lights(&self, options: &RenderOptions) -> RenderOptions {
        let mut o = options.clone();
        if o.lights.is_empty() {
            o.lights = self.lights.clone();
        }
        o
    }
}

/// Row `i` of the table holds structure `i`'s appearance.
struct LabeledModel<'a> {
    labels: &'a LabelVolume,
    rows: Vec<Option<&'a SurfaceAppearance>>,
    iso_bounds: (f64, f64),
}

impl SurfaceLookup for LabeledModel<'_> {
    #[inline]
    fn surface_at(&self, cell: [usize; 3]) -> Option<(f64, u8)> {
        let l = self.labels.get(cell);
        if l == 0 {
            return None;
        }
        self.rows[l as usize].map(|a| (a.isovalue, l))
    }

    fn iso_bounds(&self) -> (f64, f64) {
        self.iso_bounds
    }
}

impl SurfaceModel for LabeledModel<'_> {
    fn appearance(&self, structure_id: u8) -> &SurfaceAppearance {
        self.rows[structure_id as usize].expect("hit cells always carry a known label")
    }
}

/// Multi-structure traversal: label-0 cells are skipped, labeled cells are
/// intersected with their own structure's isovalue and colored with its row.
pub fn render_scene(scene: &Scene, options: &RenderOptions) -> Frame {
    let mut rows = vec![None; 256];
    for (id, s) in &scene.structures {
        rows[*id as usize] = Some(&s.appearance);
    }
    let iso_bounds = scene
        .structures
        .values()
        .map(|s| s.appearance.isovalue)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let model = LabeledModel { labels: &scene.labels, rows, iso_bounds };
    render_surfaces(&scene.volume, &scene.camera, &scene.crop, &model, options)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureRef {
    pub id: u8,
    pub isovalue: f64,
    pub tf_ref: PathBuf,
}

/// `.scene.json` schema; relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub volume_ref: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropBounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<Camera>,
    pub structures: Vec<StructureRef>,
    pub label_ref: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lights: Vec<Light>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_size: Option<usize>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("{what} {}", path.display()), e))
}

/// Loads a scene file. `camera` overrides the file's camera; one of the two
/// must be present.
pub fn load_scene(path: impl AsRef<Path>, camera: Option<Camera>) -> Result<Scene> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    let file: SceneFile = read_json(path, "scene")?;
    let volume = Arc::new(load_pair(resolve(base, &file.volume_ref))?);
    let camera = camera
        .or(file.camera.clone())
        .ok_or_else(|| Error::Config("scene has no camera and none was given".into()))?;
    let mut scene = Scene::new(volume, camera);
    scene.map_size = file.map_size.unwrap_or(DEFAULT_MAP_SIZE);
    scene.lights = file.lights.clone();
    if let Some(c) = file.crop {
        scene.crop = c;
    }
    scene.labels = LabelVolume::load(resolve(base, &file.label_ref), scene.volume.cell_dims())?;
    for s in &file.structures {
        let tf: TransferFunctionSpec = read_json(&resolve(base, &s.tf_ref), "transfer function")?;
        scene.add_structure(SurfaceStructure::new(s.id, s.isovalue, &tf, &scene.volume, scene.map_size)?)?;
    }
    scene.validate()?;
    Ok(scene)
}

/// Writes `<name>.scene.json` into `dir` with the label grid, one transfer
/// function per structure and the volume reference.
pub fn save_scene(scene: &Scene, dir: impl AsRef<Path>, name: &str, volume_ref: &Path) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let label_ref = PathBuf::from(format!("{name}.labels.raw"));
    scene.labels.save(dir.join(&label_ref))?;
    let mut structures = Vec::new();
    for s in scene.structures.values() {
        let tf_ref = PathBuf::from(format!("{name}.s{}.tf.json", s.id));
        let text = serde_json::to_string_pretty(&s.tf).map_err(|e| Error::json("transfer function", e))?;
        let p = dir.join(&tf_ref);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        structures.push(StructureRef { id: s.id, isovalue: s.isovalue(), tf_ref });
    }
    let file = SceneFile {
        volume_ref: volume_ref.to_path_buf(),
        crop: Some(scene.crop),
        camera: Some(scene.camera.clone()),
        structures,
        label_ref,
        lights: scene.lights.clone(),
        map_size: Some(scene.map_size),
    };
    let out = dir.join(format!("{name}.scene.json"));
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::json("scene", e))?;
    fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
    Ok(out)
}

/// Cells of `cells` grouped by label, for checking bakes against cuts.
pub fn labels_of(labels: &LabelVolume, cells: &[CellId]) -> BTreeMap<u8, usize> {
    let mut m = BTreeMap::new();
    for &c in cells {
        *m.entry(labels.get_id(c)).or_insert(0) += 1;
    }
    m
}
