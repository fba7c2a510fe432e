//! Image-space exploration state: peel windows, the per-pixel voxel-ID
//! buffer, seed sets and the selection coloring preview.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Rgb;
use crate::raycast::CellId;

/// Axis-aligned pixel rectangle; serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[i64; 4]", into = "[i64; 4]")]
pub struct PeelWindow {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl From<[i64; 4]> for PeelWindow {
    fn from(r: [i64; 4]) -> Self {
        PeelWindow { x: r[0], y: r[1], w: r[2], h: r[3] }
    }
}

impl From<PeelWindow> for [i64; 4] {
    fn from(w: PeelWindow) -> Self {
        [w.x, w.y, w.w, w.h]
    }
}

impl PeelWindow {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        PeelWindow { x, y, w, h }
    }

    /// Pixel ranges `(x0..x1, y0..y1)` after clamping to the image.
    pub fn clamped(&self, width: u32, height: u32) -> (std::ops::Range<u32>, std::ops::Range<u32>) {
        let clamp = |v: i64, max: u32| v.clamp(0, max as i64) as u32;
        let x0 = clamp(self.x, width);
        let y0 = clamp(self.y, height);
        let x1 = clamp(self.x.saturating_add(self.w.max(0)), width);
        let y1 = clamp(self.y.saturating_add(self.h.max(0)), height);
        (x0..x1, y0..y1)
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        let (x, y) = (x as i64, y as i64);
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

/// Per-pixel count of peel windows; a pixel with value `k` shows the
/// `(k + 1)`-th crossing along its ray.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeelBuffer {
    pub width: u32,
    pub height: u32,
    data: Vec<u32>,
}

impl PeelBuffer {
    pub fn zeros(width: u32, height: u32) -> Self {
        PeelBuffer { width, height, data: vec![0; (width * height) as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn add_window(&mut self, win: &PeelWindow) {
        let (xs, ys) = win.clamped(self.width, self.height);
        for y in ys {
            let row = (y * self.width) as usize;
            for x in xs.clone() {
                self.data[row + x as usize] += 1;
            }
        }
    }
}

pub fn build_peel_buffer(windows: &[PeelWindow], image_dims: [u32; 2]) -> PeelBuffer {
    let mut buf = PeelBuffer::zeros(image_dims[0], image_dims[1]);
    for w in windows {
        buf.add_window(w);
    }
    buf
}

/// Per-pixel id of the cell holding the returned hit, or [`VoxelIdBuffer::MISS`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelIdBuffer {
    pub width: u32,
    pub height: u32,
    data: Vec<i32>,
}

impl VoxelIdBuffer {
    pub const MISS: i32 = -1;

    pub fn new(width: u32, height: u32) -> Self {
        VoxelIdBuffer { width, height, data: vec![Self::MISS; (width * height) as usize] }
    }

    pub(crate) fn from_raw(width: u32, height: u32, data: Vec<i32>) -> Self {
        debug_assert_eq!(data.len(), (width * height) as usize);
        VoxelIdBuffer { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Option<CellId> {
        let v = self.data[(y * self.width + x) as usize];
        (v != Self::MISS).then_some(CellId(v as u32))
    }

    #[inline]
    pub fn raw(&self, x: u32, y: u32) -> i32 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    /// Little-endian `i32` per pixel, row-major.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_le_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Distinct hit cells under the given pixels; out-of-image pixels and misses
/// contribute nothing.
pub fn pick_voxels(ids: &VoxelIdBuffer, pixels: &[[u32; 2]]) -> BTreeSet<CellId> {
    pixels
        .iter()
        .filter(|p| p[0] < ids.width && p[1] < ids.height)
        .filter_map(|p| ids.get(p[0], p[1]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedTarget {
    Fg,
    Bg,
}

/// Foreground and background seed cells, each kept sorted and disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedSets {
    foreground: Vec<CellId>,
    background: Vec<CellId>,
}

impl SeedSets {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from two lists; a cell listed on both sides stays foreground.
    pub fn from_lists(fg: impl IntoIterator<Item = CellId>, bg: impl IntoIterator<Item = CellId>) -> Self {
        let mut s = SeedSets::new();
        s.add(SeedTarget::Bg, bg);
        s.add(SeedTarget::Fg, fg);
        s
    }

    pub fn foreground(&self) -> &[CellId] {
        &self.foreground
    }

    pub fn background(&self) -> &[CellId] {
        &self.background
    }

    pub fn is_empty(&self) -> bool {
        self.foreground.is_empty() && self.background.is_empty()
    }

    pub fn contains_fg(&self, id: CellId) -> bool {
        self.foreground.binary_search(&id).is_ok()
    }

    pub fn contains_bg(&self, id: CellId) -> bool {
        self.background.binary_search(&id).is_ok()
    }

    /// Adds cells to one side, moving them off the other. Returns the cells
    /// that were newly added to `target`.
    pub fn add(&mut self, target: SeedTarget, cells: impl IntoIterator<Item = CellId>) -> Vec<CellId> {
        let (mine, other) = match target {
            SeedTarget::Fg => (&mut self.foreground, &mut self.background),
            SeedTarget::Bg => (&mut self.background, &mut self.foreground),
        };
        let mut added = Vec::new();
        for id in cells {
            if let Ok(i) = other.binary_search(&id) {
                other.remove(i);
            }
            if let Err(i) = mine.binary_search(&id) {
                mine.insert(i, id);
                added.push(id);
            }
        }
        added.sort_unstable();
        added
    }

    pub fn remove(&mut self, target: SeedTarget, cells: impl IntoIterator<Item = CellId>) {
        let mine = match target {
            SeedTarget::Fg => &mut self.foreground,
            SeedTarget::Bg => &mut self.background,
        };
        for id in cells {
            if let Ok(i) = mine.binary_search(&id) {
                mine.remove(i);
            }
        }
    }

    pub fn clear(&mut self) {
        self.foreground.clear();
        self.background.clear();
    }
}

pub const HIGHLIGHT_FG: Rgb = [1.0, 0.85, 0.1];
pub const HIGHLIGHT_BG: Rgb = [0.1, 0.8, 1.0];

#[inline]
pub fn selection_color(cell_id: CellId, seeds: &SeedSets, base: Rgb) -> Rgb {
    if seeds.contains_fg(cell_id) {
        HIGHLIGHT_FG
    } else if seeds.contains_bg(cell_id) {
        HIGHLIGHT_BG
    } else {
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_and_full_windows() {
        let b = build_peel_buffer(&[], [7, 5]);
        assert!(b.data().iter().all(|&v| v == 0));
        let b = build_peel_buffer(&[PeelWindow::new(0, 0, 7, 5)], [7, 5]);
        assert!(b.data().iter().all(|&v| v == 1));
    }

    #[test]
    fn overlapping_windows_sum() {
        let a = PeelWindow::new(2, 3, 10, 6);
        let b = PeelWindow::new(7, 1, 8, 5);
        let buf = build_peel_buffer(&[a, b], [20, 12]);
        for y in 0..12 {
            for x in 0..20 {
                let want = a.contains(x, y) as u32 + b.contains(x, y) as u32;
                assert_eq!(buf.get(x, y), want, "({x}, {y})");
            }
        }
        assert_eq!(buf.get(8, 4), 2);
    }

    #[test]
    fn windows_clamp_to_image() {
        let buf = build_peel_buffer(&[PeelWindow::new(-5, -5, 8, 100)], [4, 4]);
        assert_eq!(buf.get(2, 3), 1);
        assert_eq!(buf.get(3, 0), 0);
    }

    #[test]
    fn pick_examples() {
        let mut ids = VoxelIdBuffer::new(4, 4);
        assert!(pick_voxels(&ids, &[[0, 0], [1, 1]]).is_empty());
        ids.data[5] = 42;
        ids.data[6] = 42;
        let got = pick_voxels(&ids, &[[1, 1], [2, 1], [3, 3], [9, 9]]);
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![CellId(42)]);
    }

    #[test]
    fn selection_color_examples() {
        let base = [0.2, 0.2, 0.2];
        let mut seeds = SeedSets::new();
        assert_eq!(selection_color(CellId(3), &seeds, base), base);
        seeds.add(SeedTarget::Fg, [CellId(3)]);
        seeds.add(SeedTarget::Bg, [CellId(9)]);
        assert_eq!(selection_color(CellId(3), &seeds, base), HIGHLIGHT_FG);
        assert_eq!(selection_color(CellId(9), &seeds, base), HIGHLIGHT_BG);
    }

    #[test]
    fn binary_search_membership_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cells: Vec<CellId> = (0..1000).map(|_| CellId(rng.random_range(0..50_000))).collect();
        let mut seeds = SeedSets::new();
        seeds.add(SeedTarget::Fg, cells.iter().copied());
        for _ in 0..10_000 {
            let id = CellId(rng.random_range(0..50_000));
            assert_eq!(seeds.contains_fg(id), cells.contains(&id));
        }
    }

    #[test]
    fn id_buffer_bytes_are_le_i32() {
        let mut ids = VoxelIdBuffer::new(2, 1);
        ids.data[1] = 258;
        assert_eq!(ids.to_le_bytes(), vec![0xff, 0xff, 0xff, 0xff, 2, 1, 0, 0]);
    }

    proptest! {
        #[test]
        fn seed_sets_stay_sorted_and_disjoint(ops in prop::collection::vec((any::<bool>(), any::<bool>(), 0u32..40), 0..200)) {
            let mut s = SeedSets::new();
            for (add, fg, id) in ops {
                let target = if fg { SeedTarget::Fg } else { SeedTarget::Bg };
                if add { s.add(target, [CellId(id)]); } else { s.remove(target, [CellId(id)]); }
                prop_assert!(s.foreground().windows(2).all(|w| w[0] < w[1]));
                prop_assert!(s.background().windows(2).all(|w| w[0] < w[1]));
                prop_assert!(s.foreground().iter().all(|c| !s.contains_bg(*c)));
            }
        }
    }
}
