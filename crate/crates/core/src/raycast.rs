//! Pinhole camera, voxel-exact cell traversal, per-cell cubic fitting and
//! first-root isosurface intersection.
//!
//! Along a ray segment inside one cell the trilinear field is a cubic in the
//! ray parameter. Four samples (entry, the two trisection points and exit)
//! determine it exactly; roots are isolated by splitting at the derivative's
//! real roots and refining each bracketed span.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::volume::{trilinear, ScalarVolume, BLOCK_CELLS};

/// Sequential cell identifier, `ix + iy·cx + iz·cx·cy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub u32);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// # Panics
/// If `index` lies outside `cell_dims`.
#[inline]
pub fn linear_cell_id(index: [usize; 3], cell_dims: [usize; 3]) -> CellId {
    assert!(
        (0..3).all(|a| index[a] < cell_dims[a]),
        "cell index {index:?} outside cell grid {cell_dims:?}"
    );
    CellId((index[0] + cell_dims[0] * (index[1] + cell_dims[1] * index[2])) as u32)
}

/// Inverse of [`linear_cell_id`].
///
/// # Panics
/// If `id` is not below the cell count.
#[inline]
pub fn cell_index(id: CellId, cell_dims: [usize; 3]) -> [usize; 3] {
    let n = id.0 as usize;
    assert!(n < cell_dims.iter().product::<usize>(), "cell id {n} outside cell grid {cell_dims:?}");
    let plane = cell_dims[0] * cell_dims[1];
    [n % cell_dims[0], (n % plane) / cell_dims[0], n / plane]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub eye: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    #[serde(alias = "vfov")]
    pub vfov_deg: f64,
    pub image_dims: [u32; 2],
}

impl Camera {
    /// Looks at the centre of `vol` from `distance · direction` away.
    pub fn orbit(vol: &ScalarVolume, direction: Vec3, distance: f64, vfov_deg: f64, image_dims: [u32; 2]) -> Camera {
        let center = vol.extent() * 0.5;
        let dir = direction.normalized();
        let up = if dir.cross(Vec3::new(0.0, 1.0, 0.0)).length() < 1e-6 {
            Vec3::new(0.0, 0.0, 1.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        Camera { eye: center + dir * distance, look_at: center, up, vfov_deg, image_dims }
    }

    pub fn validate(&self) -> Result<()> {
        let fwd = self.look_at - self.eye;
        if fwd.length() == 0.0 {
            return Err(Error::Config("camera eye and look_at coincide".into()));
        }
        if fwd.normalized().cross(self.up.normalized()).length() < 1e-9 {
            return Err(Error::Config("camera up is parallel to the view direction".into()));
        }
        if !(self.vfov_deg > 0.0 && self.vfov_deg < 180.0) {
            return Err(Error::Config(format!("vfov_deg must be in (0, 180), got {}", self.vfov_deg)));
        }
        if self.image_dims.contains(&0) {
            return Err(Error::Config("image_dims must be at least 1x1".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.image_dims[0]
    }

    pub fn height(&self) -> u32 {
        self.image_dims[1]
    }

    pub fn rig(&self) -> CameraRig {
        let forward = (self.look_at - self.eye).normalized();
        let right = forward.cross(self.up).normalized();
        let up = right.cross(forward);
        let tan_half = (self.vfov_deg.to_radians() * 0.5).tan();
        let aspect = self.image_dims[0] as f64 / self.image_dims[1] as f64;
        CameraRig {
            eye: self.eye,
            forward,
            right: right * (tan_half * aspect),
            up: up * tan_half,
            inv_w: 1.0 / self.image_dims[0] as f64,
            inv_h: 1.0 / self.image_dims[1] as f64,
        }
    }
}

/// Precomputed camera basis; `right` and `up` are pre-scaled to the image
/// plane at unit distance.
#[derive(Debug, Clone, Copy)]
pub struct CameraRig {
    eye: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    inv_w: f64,
    inv_h: f64,
}

impl CameraRig {
    /// Ray through the centre of pixel `(px, py)`; row 0 is the top row.
    #[inline]
    pub fn ray(&self, px: u32, py: u32) -> Ray {
        let sx = (px as f64 + 0.5) * self.inv_w * 2.0 - 1.0;
        let sy = 1.0 - (py as f64 + 0.5) * self.inv_h * 2.0;
        Ray::new(self.eye, self.forward + self.right * sx + self.up * sy)
    }
}

pub fn pixel_ray(camera: &Camera, px: u32, py: u32) -> Ray {
    camera.rig().ray(px, py)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    /// Normalizes `dir`.
    pub fn new(origin: Vec3, dir: Vec3) -> Ray {
        Ray { origin, dir: dir.normalized() }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Inclusive-lo, exclusive-hi cell index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBounds {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl CropBounds {
    pub fn full(cell_dims: [usize; 3]) -> CropBounds {
        CropBounds { lo: [0; 3], hi: cell_dims }
    }

    pub fn for_volume(vol: &ScalarVolume) -> CropBounds {
        CropBounds::full(vol.cell_dims())
    }

    pub fn validate(&self, cell_dims: [usize; 3]) -> Result<()> {
        for a in 0..3 {
            if self.lo[a] >= self.hi[a] || self.hi[a] > cell_dims[a] {
                return Err(Error::Config(format!(
                    "crop {:?}..{:?} invalid for cell grid {:?}",
                    self.lo, self.hi, cell_dims
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, cell: [usize; 3]) -> bool {
        (0..3).all(|a| cell[a] >= self.lo[a] && cell[a] < self.hi[a])
    }

    pub fn cell_count(&self) -> usize {
        (0..3).map(|a| self.hi[a] - self.lo[a]).product()
    }

    /// World-space box of the crop.
    pub fn world_box(&self, spacing: Vec3) -> (Vec3, Vec3) {
        let lo = Vec3::new(self.lo[0] as f64, self.lo[1] as f64, self.lo[2] as f64).mul_elem(spacing);
        let hi = Vec3::new(self.hi[0] as f64, self.hi[1] as f64, self.hi[2] as f64).mul_elem(spacing);
        (lo, hi)
    }
}

/// Slab-test clip of the ray's `t ≥ 0` half against `[lo, hi]`.
pub fn clip_to_box(ray: &Ray, lo: Vec3, hi: Vec3) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        let o = ray.origin[a];
        let d = ray.dir[a];
        if d == 0.0 {
            if o < lo[a] || o > hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (mut ta, mut tb) = ((lo[a] - o) * inv, (hi[a] - o) * inv);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
    }
    (t0 < t1).then_some((t0, t1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStep {
    pub cell: [usize; 3],
    pub t_enter: f64,
    pub t_exit: f64,
}

/// 3D-DDA over the cells of a crop box. Yields steps in increasing `t`;
/// consecutive steps tile the clipped segment without gaps.
#[derive(Debug, Clone)]
pub struct CellWalker {
    origin: Vec3,
    dir: Vec3,
    spacing: Vec3,
    crop: CropBounds,
    cell: [isize; 3],
    step: [isize; 3],
    t_next: [f64; 3],
    t: f64,
    t_end: f64,
    done: bool,
}

impl CellWalker {
    pub fn new(ray: &Ray, vol: &ScalarVolume, crop: &CropBounds) -> CellWalker {
        CellWalker::on_grid(ray, vol.spacing(), crop, crop.world_box(vol.spacing()), 1e-9 * vol.cell_diagonal())
    }

    /// Walks the cells `crop` of a grid with cell size `spacing`, clipped to
    /// the world box `bounds`.
    pub fn on_grid(ray: &Ray, spacing: Vec3, crop: &CropBounds, bounds: (Vec3, Vec3), nudge: f64) -> CellWalker {
        let (lo, hi) = bounds;
        let mut walker = CellWalker {
            origin: ray.origin,
            dir: ray.dir,
            spacing,
            crop: *crop,
            cell: [0; 3],
            step: [0; 3],
            t_next: [f64::INFINITY; 3],
            t: 0.0,
            t_end: 0.0,
            done: true,
        };
        let Some((t0, t1)) = clip_to_box(ray, lo, hi) else {
            return walker;
        };
        let p = ray.at((t0 + nudge).min(0.5 * (t0 + t1)));
        for a in 0..3 {
            let g = (p[a] / spacing[a]).floor() as isize;
            walker.cell[a] = g.clamp(crop.lo[a] as isize, crop.hi[a] as isize - 1);
            walker.step[a] = if ray.dir[a] > 0.0 {
                1
            } else if ray.dir[a] < 0.0 {
                -1
            } else {
                0
            };
        }
        walker.t_next = [walker.boundary_t(0), walker.boundary_t(1), walker.boundary_t(2)];
        walker.t = t0;
        walker.t_end = t1;
        walker.done = false;
        walker
    }

    #[inline]
    fn boundary_t(&self, a: usize) -> f64 {
        match self.step[a] {
            0 => f64::INFINITY,
            s => {
                let plane = if s > 0 { self.cell[a] + 1 } else { self.cell[a] };
                (plane as f64 * self.spacing[a] - self.origin[a]) / self.dir[a]
            }
        }
    }
}

impl Iterator for CellWalker {
    type Item = CellStep;

    #[inline]
    fn next(&mut self) -> Option<CellStep> {
        while !self.done {
            let tb = self.t_next;
            let axis = if tb[0] <= tb[1] && tb[0] <= tb[2] {
                0
            } else if tb[1] <= tb[2] {
                1
            } else {
                2
            };
            let t_exit = tb[axis].min(self.t_end);
            let cell = [self.cell[0] as usize, self.cell[1] as usize, self.cell[2] as usize];
            let t_enter = self.t;
            if t_exit >= self.t_end {
                self.done = true;
            } else {
                self.cell[axis] += self.step[axis];
                let c = self.cell[axis];
                if c < self.crop.lo[axis] as isize || c >= self.crop.hi[axis] as isize {
                    self.done = true;
                }
                self.t_next[axis] = self.boundary_t(axis);
                self.t = t_exit.max(t_enter);
            }
            if t_exit > t_enter {
                return Some(CellStep { cell, t_enter, t_exit });
            }
        }
        None
    }
}

pub fn traverse_cells(ray: &Ray, vol: &ScalarVolume, crop: &CropBounds) -> CellWalker {
    CellWalker::new(ray, vol, crop)
}

/// `v(u) = c0 + c1·u + c2·u² + c3·u³` for `u ∈ [0, 1]` across a cell segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicPoly {
    pub c: [f64; 4],
}

impl CubicPoly {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let c = &self.c;
        ((c[3] * u + c[2]) * u + c[1]) * u + c[0]
    }

    /// Real roots of the derivative strictly inside `(lo, hi)`, ascending.
    fn critical_points(&self, lo: f64, hi: f64) -> ([f64; 2], usize) {
        let a = 3.0 * self.c[3];
        let b = 2.0 * self.c[2];
        let c = self.c[1];
        let mut out = [0.0; 2];
        let mut n = 0;
        let mut push = |r: f64| {
            if r > lo && r < hi && r.is_finite() {
                out[n] = r;
                n += 1;
            }
        };
        if a == 0.0 {
            if b != 0.0 {
                push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
                let (r1, r2) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
                push(r1);
                if r2 != r1 {
                    push(r2);
                }
            }
        }
        (out, n)
    }
}

/// Interpolating cubic through `(0, v0)`, `(1/3, v1)`, `(2/3, v2)`, `(1, v3)`.
#[inline]
pub fn cubic_from_samples(v0: f64, v1: f64, v2: f64, v3: f64) -> CubicPoly {
    CubicPoly {
        c: [
            v0,
            0.5 * (-11.0 * v0 + 18.0 * v1 - 9.0 * v2 + 2.0 * v3),
            4.5 * (2.0 * v0 - 5.0 * v1 + 4.0 * v2 - v3),
            4.5 * (-v0 + 3.0 * v1 - 3.0 * v2 + v3),
        ],
    }
}

/// Up to three roots of `poly(u) = iso` in ascending order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Roots {
    vals: [f64; 3],
    len: usize,
}

impl Roots {
    #[inline]
    fn push(&mut self, r: f64) {
        if self.len < 3 {
            self.vals[self.len] = r;
            self.len += 1;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vals[..self.len]
    }

    pub fn first(&self) -> Option<f64> {
        self.as_slice().first().copied()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Bracketed Illinois iteration on a monotone span with `g(a)`, `g(b)` of
/// opposite sign.
fn refine_root(poly: &CubicPoly, iso: f64, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64) -> f64 {
    let mut side = 0i8;
    for _ in 0..100 {
        if b - a <= 1e-13 {
            break;
        }
        let mut m = (a * gb - b * ga) / (gb - ga);
        if !(m > a && m < b) {
            m = 0.5 * (a + b);
        }
        let gm = poly.eval(m) - iso;
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = m;
            gb = gm;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    let m = 0.5 * (a + b);
    // keep the endpoint with the smaller residual when the bracket collapsed
    let gm = (poly.eval(m) - iso).abs();
    if gm <= ga.abs().min(gb.abs()) {
        m
    } else if ga.abs() <= gb.abs() {
        a
    } else {
        b
    }
}

/// All roots of `poly(u) = iso` in `(lo, hi]` (or `[lo, hi]` when
/// `include_lo`), ascending. A constant polynomial equal to `iso` reports a
/// single root at `lo`.
pub fn roots_in(poly: &CubicPoly, iso: f64, lo: f64, hi: f64, include_lo: bool) -> Roots {
    let mut roots = Roots::default();
    let c = &poly.c;
    if c[1] == 0.0 && c[2] == 0.0 && c[3] == 0.0 {
        if c[0] == iso {
            roots.push(lo);
        }
        return roots;
    }
    let (crit, ncrit) = poly.critical_points(lo, hi);
    let mut a = lo;
    let mut ga = poly.eval(lo) - iso;
    if include_lo && ga == 0.0 {
        roots.push(lo);
    }
    for i in 0..=ncrit {
        let b = if i < ncrit { crit[i] } else { hi };
        let gb = poly.eval(b) - iso;
        if gb == 0.0 {
            if ga != 0.0 {
                roots.push(b);
            }
        } else if ga != 0.0 && (ga < 0.0) != (gb < 0.0) {
            roots.push(refine_root(poly, iso, a, b, ga, gb));
        }
        a = b;
        ga = gb;
    }
    roots
}

/// Smallest `u ∈ [u_lo, u_hi]` with `poly(u) = iso`.
pub fn first_root(poly: &CubicPoly, iso: f64, u_lo: f64, u_hi: f64) -> Option<f64> {
    roots_in(poly, iso, u_lo, u_hi, true).first()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub position: Vec3,
    pub cell: [usize; 3],
    pub cell_id: CellId,
    pub crossings_skipped: u32,
    pub structure_id: u8,
}

/// Per-cell isovalue assignment used by the crossing search.
pub trait SurfaceLookup {
    /// Isovalue and structure id for a cell, or `None` to skip it.
    fn surface_at(&self, cell: [usize; 3]) -> Option<(f64, u8)>;

    /// Smallest and largest isovalue `surface_at` can return.
    fn iso_bounds(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Every cell is tested against the same isovalue.
#[derive(Debug, Clone, Copy)]
pub struct SingleIso(pub f64);

impl SurfaceLookup for SingleIso {
    #[inline]
    fn surface_at(&self, _cell: [usize; 3]) -> Option<(f64, u8)> {
        Some((self.0, 0))
    }

    fn iso_bounds(&self) -> (f64, f64) {
        (self.0, self.0)
    }
}

/// Walks the ray and returns the `(skip + 1)`-th isosurface crossing. Every
/// root counts, including several inside one cell, in `t` order.
pub fn find_crossing<S: SurfaceLookup + ?Sized>(
    ray: &Ray,
    vol: &ScalarVolume,
    crop: &CropBounds,
    skip: u32,
    surfaces: &S,
) -> Option<Hit> {
    let spacing = vol.spacing();
    let inv_spacing = Vec3::new(1.0 / spacing.x, 1.0 / spacing.y, 1.0 / spacing.z);
    let cell_dims = vol.cell_dims();
    let blocks = vol.range_blocks();
    let (iso_lo, iso_hi) = surfaces.iso_bounds();
    let nudge = 1e-9 * vol.cell_diagonal();
    let block_crop = CropBounds {
        lo: crop.lo.map(|i| i / BLOCK_CELLS),
        hi: crop.hi.map(|i| i.div_ceil(BLOCK_CELLS)),
    };
    let block_walker =
        CellWalker::on_grid(ray, spacing * BLOCK_CELLS as f64, &block_crop, crop.world_box(spacing), nudge);
    // Cells of blocks whose value range misses every isovalue are never visited.
    let cells = block_walker
        .filter(|b| {
            let (block_lo, block_hi) = blocks.block_range(b.cell);
            iso_lo <= block_hi && iso_hi >= block_lo
        })
        .flat_map(|b| {
            let sub = CropBounds {
                lo: [0, 1, 2].map(|a| crop.lo[a].max(b.cell[a] * BLOCK_CELLS)),
                hi: [0, 1, 2].map(|a| crop.hi[a].min((b.cell[a] + 1) * BLOCK_CELLS)),
            };
            CellWalker::on_grid(ray, spacing, &sub, sub.world_box(spacing), nudge)
        });
    let mut seen = 0u32;
    for step in cells {
        let Some((iso, structure_id)) = surfaces.surface_at(step.cell) else {
            continue;
        };
        let corners = vol.cell_corners(step.cell);
        let (mut lo, mut hi) = (corners[0], corners[0]);
        for &v in &corners[1..] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if iso < lo || iso > hi {
            continue;
        }
        let (cell_lo, _) = vol.cell_box(step.cell);
        let dt = step.t_exit - step.t_enter;
        let sample = |u: f64| {
            let p = (ray.at(step.t_enter + u * dt) - cell_lo).mul_elem(inv_spacing);
            trilinear(&corners, [p.x, p.y, p.z])
        };
        let poly = cubic_from_samples(sample(0.0), sample(1.0 / 3.0), sample(2.0 / 3.0), sample(1.0));
        let roots = roots_in(&poly, iso, 0.0, 1.0, false);
        for &u in roots.as_slice() {
            if seen == skip {
                let t = step.t_enter + u * dt;
                return Some(Hit {
                    t,
                    position: ray.at(t),
                    cell: step.cell,
                    cell_id: linear_cell_id(step.cell, cell_dims),
                    crossings_skipped: skip,
                    structure_id,
                });
            }
            seen += 1;
        }
    }
    None
}

/// Single-isovalue crossing search.
pub fn intersect_isosurface(ray: &Ray, vol: &ScalarVolume, iso: f64, crop: &CropBounds, skip: u32) -> Option<Hit> {
    find_crossing(ray, vol, crop, skip, &SingleIso(iso))
}
