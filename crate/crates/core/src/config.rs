//! JSON input files shared by the CLI and the service.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::{pick_voxels, PeelWindow, VoxelIdBuffer};
use crate::raycast::{Camera, CellId, CropBounds};

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>, what: &str) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("{what} {}", path.display()), e))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T, what: &str) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(what, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_camera(path: impl AsRef<Path>) -> Result<Camera> {
    let cam: Camera = read_json(path, "camera")?;
    cam.validate()?;
    Ok(cam)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeelFile {
    pub rects: Vec<PeelWindow>,
}

/// Seed cells given directly, or as pixels resolved through a reference render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedFile {
    Cells { cells: Vec<CellId> },
    Pixels { pixels: Vec<[u32; 2]> },
}

impl SeedFile {
    /// `ids` is needed only for the pixel form.
    pub fn resolve(&self, ids: Option<&VoxelIdBuffer>) -> Result<Vec<CellId>> {
        match self {
            SeedFile::Cells { cells } => Ok(cells.clone()),
            SeedFile::Pixels { pixels } => {
                let ids = ids.ok_or_else(|| Error::Config("pixel seeds need a camera for the reference render".into()))?;
                Ok(pick_voxels(ids, pixels).into_iter().collect())
            }
        }
    }

    pub fn needs_render(&self) -> bool {
        matches!(self, SeedFile::Pixels { .. })
    }
}

/// Parses `lx,ly,lz:hx,hy,hz`.
pub fn parse_crop(s: &str) -> Result<CropBounds> {
    let bad = || Error::Config(format!("crop must look like a,b,c:d,e,f, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let triple = |t: &str| -> Result<[usize; 3]> {
        let v: Vec<usize> = t.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        v.try_into().map_err(|_| bad())
    };
    Ok(CropBounds { lo: triple(lo)?, hi: triple(hi)? })
}
