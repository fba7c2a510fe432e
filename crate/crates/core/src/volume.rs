//! Scalar volumes: storage, raw-file loading, trilinear sampling and
//! central-difference gradients.
//!
//! Grid point `(i, j, k)` sits at world position `(i·sx, j·sy, k·sz)`, so the
//! volume occupies the box `[0, (dims − 1)·spacing]`. A *cell* is the cube
//! spanned by eight neighbouring grid points; there are `dims − 1` cells per
//! axis. Data is stored x-fastest and normalized to `[0, 1]` on load.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "u8")]
    U8,
    #[serde(rename = "u16le")]
    U16Le,
    #[serde(rename = "f32le")]
    F32Le,
}

impl Dtype {
    pub fn byte_width(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16Le => 2,
            Dtype::F32Le => 4,
        }
    }
}

/// Geometry and encoding of a volume; doubles as the `.json` sidecar schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    #[serde(rename = "dtype")]
    pub source_dtype: Dtype,
    pub value_range: [f64; 2],
}

impl VolumeMeta {
    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d < 2) {
            return Err(Error::Config(format!("dims must be >= 2 per axis, got {:?}", self.dims)));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Config(format!(
                "spacing must be positive, got {:?}",
                self.spacing
            )));
        }
        let [lo, hi] = self.value_range;
        if !(lo < hi) {
            return Err(Error::Config(format!("value_range must satisfy min < max, got [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn cell_dims(&self) -> [usize; 3] {
        [self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1]
    }
}

/// Immutable scalar grid with values in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct ScalarVolume {
    meta: VolumeMeta,
    data: Vec<f64>,
    spacing: Vec3,
    inv_spacing: Vec3,
    blocks: OnceLock<RangeBlocks>,
}

impl ScalarVolume {
    /// Wraps already-normalized data. Values are clamped into `[0, 1]`.
    pub fn from_normalized(meta: VolumeMeta, mut data: Vec<f64>) -> Result<Self> {
        meta.validate()?;
        if data.len() != meta.point_count() {
            return Err(Error::Format(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                meta.dims
            )));
        }
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        let spacing = Vec3::from(meta.spacing);
        Ok(ScalarVolume {
            inv_spacing: Vec3::new(1.0 / spacing.x, 1.0 / spacing.y, 1.0 / spacing.z),
            spacing,
            meta,
            data,
            blocks: OnceLock::new(),
        })
    }

    pub fn meta(&self) -> &VolumeMeta {
        &self.meta
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn dims(&self) -> [usize; 3] {
        self.meta.dims
    }

    pub fn cell_dims(&self) -> [usize; 3] {
        self.meta.cell_dims()
    }

    pub fn cell_count(&self) -> usize {
        self.cell_dims().iter().product()
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    /// World-space size of the volume box.
    pub fn extent(&self) -> Vec3 {
        let d = self.meta.dims;
        Vec3::new(
            (d[0] - 1) as f64 * self.spacing.x,
            (d[1] - 1) as f64 * self.spacing.y,
            (d[2] - 1) as f64 * self.spacing.z,
        )
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.spacing.length()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let d = self.meta.dims;
        i + d[0] * (j + d[1] * k)
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn grid_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(i as f64, j as f64, k as f64).mul_elem(self.spacing)
    }

    /// The eight corner values of a cell; bit 0 of the corner index selects
    /// +x, bit 1 +y, bit 2 +z.
    #[inline]
    pub fn cell_corners(&self, cell: [usize; 3]) -> [f64; 8] {
        let d = self.meta.dims;
        let base = self.index(cell[0], cell[1], cell[2]);
        let sy = d[0];
        let sz = d[0] * d[1];
        let v = &self.data;
        [
            v[base],
            v[base + 1],
            v[base + sy],
            v[base + sy + 1],
            v[base + sz],
            v[base + sz + 1],
            v[base + sz + sy],
            v[base + sz + sy + 1],
        ]
    }

    /// Per-block value ranges, built on first use.
    pub fn range_blocks(&self) -> &RangeBlocks {
        self.blocks.get_or_init(|| RangeBlocks::build(self))
    }

    /// `(min, max)` of the cell's corner values.
    #[inline]
    pub fn cell_range(&self, cell: [usize; 3]) -> (f64, f64) {
        let c = self.cell_corners(cell);
        let mut lo = c[0];
        let mut hi = c[0];
        for &v in &c[1..] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// World-space box `[lo, hi]` of a cell.
    pub fn cell_box(&self, cell: [usize; 3]) -> (Vec3, Vec3) {
        let lo = self.grid_position(cell[0], cell[1], cell[2]);
        (lo, lo + self.spacing)
    }

    /// Trilinear interpolation at a world position; positions outside the box
    /// are clamped onto it.
    #[inline]
    pub fn sample_trilinear(&self, pos: Vec3) -> f64 {
        let d = self.meta.dims;
        let g = pos.mul_elem(self.inv_spacing);
        let mut cell = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let max = (d[a] - 1) as f64;
            let ga = if g[a].is_nan() { 0.0 } else { g[a].clamp(0.0, max) };
            let i = (ga.floor() as usize).min(d[a] - 2);
            cell[a] = i;
            frac[a] = ga - i as f64;
        }
        let c = self.cell_corners(cell);
        trilinear(&c, frac)
    }

    /// Central-difference gradient with a one-grid-step offset per axis, in
    /// scalar units per world unit.
    pub fn gradient_central(&self, pos: Vec3) -> Vec3 {
        let s = self.spacing;
        let dx = Vec3::new(s.x, 0.0, 0.0);
        let dy = Vec3::new(0.0, s.y, 0.0);
        let dz = Vec3::new(0.0, 0.0, s.z);
        Vec3::new(
            (self.sample_trilinear(pos + dx) - self.sample_trilinear(pos - dx)) / (2.0 * s.x),
            (self.sample_trilinear(pos + dy) - self.sample_trilinear(pos - dy)) / (2.0 * s.y),
            (self.sample_trilinear(pos + dz) - self.sample_trilinear(pos - dz)) / (2.0 * s.z),
        )
    }

    pub fn contains(&self, pos: Vec3) -> bool {
        let e = self.extent();
        (0..3).all(|a| pos[a] >= 0.0 && pos[a] <= e[a])
    }

    /// Writes the `.raw` + `.json` pair as `f32le` with range `[0, 1]`.
    pub fn save_pair(&self, stem: impl AsRef<Path>) -> Result<()> {
        let (raw_path, json_path) = pair_paths(stem.as_ref());
        let meta = VolumeMeta {
            source_dtype: Dtype::F32Le,
            value_range: [0.0, 1.0],
            ..self.meta.clone()
        };
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        fs::write(&raw_path, bytes).map_err(|e| Error::io(&raw_path, e))?;
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::json("volume sidecar", e))?;
        fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
        Ok(())
    }
}

#[inline]
pub(crate) fn trilinear(c: &[f64; 8], f: [f64; 3]) -> f64 {
    let [fx, fy, fz] = f;
    let x00 = c[0] + (c[1] - c[0]) * fx;
    let x10 = c[2] + (c[3] - c[2]) * fx;
    let x01 = c[4] + (c[5] - c[4]) * fx;
    let x11 = c[6] + (c[7] - c[6]) * fx;
    let y0 = x00 + (x10 - x00) * fy;
    let y1 = x01 + (x11 - x01) * fy;
    y0 + (y1 - y0) * fz
}

/// Resolves `p`, `p.raw` or `p.json` to the `(raw, json)` pair.
pub fn pair_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let base = match stem.extension().and_then(|e| e.to_str()) {
        Some("raw") | Some("json") => stem.with_extension(""),
        _ => stem.to_path_buf(),
    };
    let mut raw = base.clone().into_os_string();
    raw.push(".raw");
    let mut json = base.into_os_string();
    json.push(".json");
    (PathBuf::from(raw), PathBuf::from(json))
}

/// Loads a raw scalar file described by `meta`, normalizing by `value_range`.
pub fn load_volume(raw_path: impl AsRef<Path>, meta: &VolumeMeta) -> Result<ScalarVolume> {
    let raw_path = raw_path.as_ref();
    meta.validate()?;
    let bytes = fs::read(raw_path).map_err(|e| Error::io(raw_path, e))?;
    let width = meta.source_dtype.byte_width();
    let expected = meta.point_count() * width;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{} holds {} bytes, expected {} ({:?} x {} bytes)",
            raw_path.display(),
            bytes.len(),
            expected,
            meta.dims,
            width
        )));
    }
    let [lo, hi] = meta.value_range;
    let scale = 1.0 / (hi - lo);
    let norm = |raw: f64| ((raw - lo) * scale).clamp(0.0, 1.0);
    let data: Vec<f64> = match meta.source_dtype {
        Dtype::U8 => bytes.iter().map(|&b| norm(b as f64)).collect(),
        Dtype::U16Le => bytes
            .chunks_exact(2)
            .map(|c| norm(u16::from_le_bytes([c[0], c[1]]) as f64))
            .collect(),
        Dtype::F32Le => bytes
            .chunks_exact(4)
            .map(|c| norm(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect(),
    };
    ScalarVolume::from_normalized(meta.clone(), data)
}

/// Loads a volume pair given its stem (or either file of the pair).
pub fn load_pair(stem: impl AsRef<Path>) -> Result<ScalarVolume> {
    let (raw_path, json_path) = pair_paths(stem.as_ref());
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let meta: VolumeMeta =
        serde_json::from_str(&text).map_err(|e| Error::json(json_path.display().to_string(), e))?;
    load_volume(&raw_path, &meta)
}


/// Cells per block edge in [`RangeBlocks`].
pub const BLOCK_CELLS: usize = 4;

/// Min and max scalar over the grid points of each `BLOCK_CELLS³` block of
/// cells. A block whose range misses an isovalue holds no crossing cell.
#[derive(Debug, Clone)]
pub struct RangeBlocks {
    dims: [usize; 3],
    ranges: Vec<(f64, f64)>,
}

impl RangeBlocks {
    pub fn build(vol: &ScalarVolume) -> RangeBlocks {
        let cd = vol.cell_dims();
        let dims = cd.map(|n| n.div_ceil(BLOCK_CELLS));
        let ranges = (0..dims[0] * dims[1] * dims[2])
            .map(|b| {
                let bi = [b % dims[0], (b / dims[0]) % dims[1], b / (dims[0] * dims[1])];
                let lo = bi.map(|i| i * BLOCK_CELLS);
                let hi = [0, 1, 2].map(|a| ((bi[a] + 1) * BLOCK_CELLS).min(cd[a]));
                let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
                for k in lo[2]..=hi[2] {
                    for j in lo[1]..=hi[1] {
                        let row = vol.index(lo[0], j, k);
                        for &v in &vol.data[row..=row + hi[0] - lo[0]] {
                            mn = mn.min(v);
                            mx = mx.max(v);
                        }
                    }
                }
                (mn, mx)
            })
            .collect();
        RangeBlocks { dims, ranges }
    }

    /// Range of the block containing `cell`.
    #[inline]
    pub fn range(&self, cell: [usize; 3]) -> (f64, f64) {
        self.block_range([cell[0] / BLOCK_CELLS, cell[1] / BLOCK_CELLS, cell[2] / BLOCK_CELLS])
    }

    #[inline]
    pub fn block_range(&self, b: [usize; 3]) -> (f64, f64) {
        self.ranges[b[0] + self.dims[0] * (b[1] + self.dims[1] * b[2])]
    }
}
