//! Color-enhanced isosurface rendering with explicit scene exploration:
//! surface peeling, voxel picking, min-cut isosurface segmentation and
//! multi-structure composition, plus a reference full volume renderer.

pub mod bench;
pub mod config;
pub mod enhance;
pub mod error;
pub mod exploration;
pub mod frame;
pub mod fvr;
pub mod geom;
pub mod isoseg;
pub mod raycast;
pub mod render;
pub mod scene;
pub mod synth;
pub mod volume;

#[cfg(feature = "cli")]
pub mod cli;
#[cfg(feature = "service")]
pub mod service;

pub use enhance::{
    accumulate_color, build_speed_color_map, lookup_color, per_sample_alpha, rate_deep, rate_shallow, shade,
    EnhanceParams, LocalTransferFunction, RateMode, SpeedColorMap, TfEntry, TransferFunctionSpec,
};
pub use error::{Error, Result};
pub use exploration::{build_peel_buffer, pick_voxels, selection_color, PeelBuffer, PeelWindow, SeedSets, VoxelIdBuffer};
pub use frame::Image;
pub use fvr::{eval_tf, render_fvr, TransitionalTF1D};
pub use geom::{Rgb, Vec3};
pub use isoseg::{build_graph, cell_contains_iso, face_contour_length, min_cut, CutResult, IsoGraph};
pub use raycast::{
    cubic_from_samples, first_root, intersect_isosurface, linear_cell_id, pixel_ray, traverse_cells, Camera, CellId,
    CropBounds, CubicPoly, Hit, Ray,
};
pub use render::{render_isosurface, Frame, RenderOptions, SurfaceAppearance};
pub use scene::{bake_structure, render_scene, LabelVolume, Scene, SurfaceStructure};
pub use synth::{generate_synthetic, SyntheticKind, SyntheticSpec};
pub use volume::{load_pair, load_volume, ScalarVolume, VolumeMeta};
