//! Segmentation on the isosurface: iso-crossing cells form a 6-connected
//! graph weighted by the contour length on each shared face, and a minimum
//! cut separates foreground from background seeds.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::SeedSets;
use crate::raycast::{cell_index, linear_cell_id, CellId, CropBounds};
use crate::volume::ScalarVolume;

/// Sub-grid resolution per face axis for contour-length integration.
pub const FACE_SUBDIV: usize = 64;

/// Half-open tie policy: `min < iso ≤ max`.
#[inline]
pub fn cell_contains_iso(corners: &[f64; 8], iso: f64) -> bool {
    let mut lo = corners[0];
    let mut hi = corners[0];
    for &v in &corners[1..] {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    lo < iso && iso <= hi
}

/// Saddle point `(x, y, value)` of the bilinear face function, if it has one.
pub fn bilinear_saddle(face: &[f64; 4]) -> Option<(f64, f64, f64)> {
    let [v00, v10, v01, v11] = *face;
    let d = v00 + v11 - v10 - v01;
    if d == 0.0 {
        return None;
    }
    Some(((v00 - v01) / d, (v00 - v10) / d, (v00 * v11 - v10 * v01) / d))
}

/// True when the iso-contour on the face splits into two branches: the
/// corner signs alternate around the face and the saddle lies inside it.
pub fn has_two_branches(face: &[f64; 4], iso: f64) -> bool {
    let [v00, v10, v01, v11] = face.map(|v| v >= iso);
    if !(v00 == v11 && v10 == v01 && v00 != v10) {
        return false;
    }
    matches!(bilinear_saddle(face), Some((x, y, _)) if x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0)
}

/// Arc length of the iso-contour of the bilinear interpolant over a face with
/// corners `(v00, v10, v01, v11)` and side lengths `face_dims`. Two-branch
/// faces report half of the summed length.
pub fn face_contour_length(face: &[f64; 4], iso: f64, face_dims: [f64; 2]) -> f64 {
    let inside = face.iter().filter(|&&v| v >= iso).count();
    if inside == 0 || inside == 4 {
        return 0.0;
    }
    let [v00, v10, v01, v11] = *face;
    let n = FACE_SUBDIV;
    let w = n + 1;
    let mut g = vec![0.0; w * w];
    for j in 0..=n {
        let y = j as f64 / n as f64;
        let left = v00 + (v01 - v00) * y;
        let right = v10 + (v11 - v10) * y;
        for i in 0..=n {
            let x = i as f64 / n as f64;
            g[j * w + i] = left + (right - left) * x - iso;
        }
    }
    let sx = face_dims[0] / n as f64;
    let sy = face_dims[1] / n as f64;
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            let a = g[j * w + i];
            let b = g[j * w + i + 1];
            let c = g[(j + 1) * w + i];
            let d = g[(j + 1) * w + i + 1];
            let case = (a >= 0.0) as u8 | ((b >= 0.0) as u8) << 1 | ((c >= 0.0) as u8) << 2 | ((d >= 0.0) as u8) << 3;
            if case == 0 || case == 15 {
                continue;
            }
            let (fi, fj) = (i as f64, j as f64);
            // Crossing points in sub-grid units.
            let bottom = || (fi + a / (a - b), fj);
            let top = || (fi + c / (c - d), fj + 1.0);
            let left = || (fi, fj + a / (a - c));
            let right = || (fi + 1.0, fj + b / (b - d));
            let seg = |p: (f64, f64), q: (f64, f64)| ((q.0 - p.0) * sx).hypot((q.1 - p.1) * sy);
            total += match case {
                1 | 14 => seg(bottom(), left()),
                2 | 13 => seg(bottom(), right()),
                4 | 11 => seg(left(), top()),
                8 | 7 => seg(right(), top()),
                3 | 12 => seg(left(), right()),
                5 | 10 => seg(bottom(), top()),
                9 | 6 => {
                    let center_inside = (a + b + c + d) * 0.25 >= 0.0;
                    let a_inside = case == 9;
                    if center_inside == a_inside {
                        // a and d are joined; cut off b and c.
                        seg(bottom(), right()) + seg(left(), top())
                    } else {
                        seg(bottom(), left()) + seg(right(), top())
                    }
                }
                _ => unreachable!(),
            };
        }
    }
    if has_two_branches(face, iso) {
        total * 0.5
    } else {
        total
    }
}

/// Face shared by `cell` and its `+axis` neighbor as `(v00, v10, v01, v11)`
/// over the two remaining axes in increasing order, plus the face's side
/// lengths.
pub fn shared_face(vol: &ScalarVolume, cell: [usize; 3], axis: usize) -> ([f64; 4], [f64; 2]) {
    let corners = vol.cell_corners(cell);
    let (u, w) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let at = |du: usize, dw: usize| corners[(1 << axis) | (du << u) | (dw << w)];
    let s = vol.spacing();
    ([at(0, 0), at(1, 0), at(0, 1), at(1, 1)], [s[u], s[w]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: CellId,
    pub b: CellId,
    pub weight: f64,
}

/// Iso-crossing cells reachable from the seeds and their weighted 6-neighbor
/// edges. Nodes are sorted ascending; each edge has `a < b`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IsoGraph {
    pub nodes: Vec<CellId>,
    pub edges: Vec<GraphEdge>,
}

impl IsoGraph {
    pub fn node_index(&self, id: CellId) -> Option<usize> {
        self.nodes.binary_search(&id).ok()
    }

    /// Number of connected components (zero-weight edges are already absent).
    pub fn component_count(&self) -> usize {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = n;
        for e in &self.edges {
            let (a, b) = (self.node_index(e.a).unwrap(), self.node_index(e.b).unwrap());
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                count -= 1;
            }
        }
        count
    }
}

fn check_seed(vol: &ScalarVolume, iso: f64, crop: &CropBounds, id: CellId) -> Result<[usize; 3]> {
    if id.0 as usize >= vol.cell_count() {
        return Err(Error::Seed(id));
    }
    let cell = cell_index(id, vol.cell_dims());
    if !crop.contains(cell) || !cell_contains_iso(&vol.cell_corners(cell), iso) {
        return Err(Error::Seed(id));
    }
    Ok(cell)
}

/// Breadth-first search over 6-neighbors from every seed, restricted to
/// iso-crossing cells inside `crop`.
pub fn build_graph(vol: &ScalarVolume, iso: f64, seeds: &SeedSets, crop: &CropBounds) -> Result<IsoGraph> {
    crop.validate(vol.cell_dims())?;
    let cd = vol.cell_dims();
    let ext = [crop.hi[0] - crop.lo[0], crop.hi[1] - crop.lo[1], crop.hi[2] - crop.lo[2]];
    let local = |c: [usize; 3]| (c[0] - crop.lo[0]) + ext[0] * ((c[1] - crop.lo[1]) + ext[1] * (c[2] - crop.lo[2]));
    // 0 = unknown, 1 = crossing and queued, 2 = not crossing.
    let mut state = vec![0u8; ext[0] * ext[1] * ext[2]];
    let mut queue = VecDeque::new();
    for &id in seeds.foreground().iter().chain(seeds.background()) {
        let cell = check_seed(vol, iso, crop, id)?;
        let s = &mut state[local(cell)];
        if *s == 0 {
            *s = 1;
            queue.push_back(cell);
        }
    }
    let mut nodes = Vec::new();
    let mut pairs: Vec<([usize; 3], usize)> = Vec::new();
    while let Some(cell) = queue.pop_front() {
        nodes.push(linear_cell_id(cell, cd));
        for axis in 0..3 {
            for forward in [false, true] {
                let mut nb = cell;
                if forward {
                    if cell[axis] + 1 >= crop.hi[axis] {
                        continue;
                    }
                    nb[axis] += 1;
                } else {
                    if cell[axis] == crop.lo[axis] {
                        continue;
                    }
                    nb[axis] -= 1;
                }
                let li = local(nb);
                if state[li] == 0 {
                    state[li] = if cell_contains_iso(&vol.cell_corners(nb), iso) { 1 } else { 2 };
                    if state[li] == 1 {
                        queue.push_back(nb);
                    }
                }
                if state[li] == 1 && forward {
                    pairs.push((cell, axis));
                }
            }
        }
    }
    nodes.sort_unstable();
    let mut edges: Vec<GraphEdge> = pairs
        .par_iter()
        .filter_map(|&(cell, axis)| {
            let (face, dims) = shared_face(vol, cell, axis);
            let weight = face_contour_length(&face, iso, dims);
            let mut nb = cell;
            nb[axis] += 1;
            (weight > 0.0).then(|| GraphEdge { a: linear_cell_id(cell, cd), b: linear_cell_id(nb, cd), weight })
        })
        .collect();
    edges.sort_unstable_by_key(|e| (e.a, e.b));
    Ok(IsoGraph { nodes, edges })
}

/// Dinic max-flow over an undirected capacity graph.
struct FlowNetwork {
    head: Vec<usize>,
    next: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

const NIL: usize = usize::MAX;

impl FlowNetwork {
    fn new(n: usize) -> Self {
        FlowNetwork { head: vec![NIL; n], next: Vec::new(), to: Vec::new(), cap: Vec::new() }
    }

    /// Adds `a → b` with capacity `c_ab` and `b → a` with `c_ba` as one arc pair.
    fn add(&mut self, a: usize, b: usize, c_ab: f64, c_ba: f64) {
        for (from, to, c) in [(a, b, c_ab), (b, a, c_ba)] {
            self.next.push(self.head[from]);
            self.head[from] = self.to.len();
            self.to.push(to);
            self.cap.push(c);
        }
    }

    fn levels(&self, s: usize, eps: f64) -> Vec<u32> {
        let mut level = vec![u32::MAX; self.head.len()];
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            let mut e = self.head[u];
            while e != NIL {
                let v = self.to[e];
                if self.cap[e] > eps && level[v] == u32::MAX {
                    level[v] = level[u] + 1;
                    q.push_back(v);
                }
                e = self.next[e];
            }
        }
        level
    }

    fn max_flow(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        let mut flow = 0.0;
        loop {
            let level = self.levels(s, eps);
            if level[t] == u32::MAX {
                return flow;
            }
            let mut it = self.head.clone();
            loop {
                let pushed = self.augment(s, t, &level, &mut it, eps);
                if pushed <= 0.0 {
                    break;
                }
                flow += pushed;
            }
        }
    }

    /// Finds one augmenting path in the level graph with an explicit stack.
    fn augment(&mut self, s: usize, t: usize, level: &[u32], it: &mut [usize], eps: f64) -> f64 {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let bottleneck = path.iter().map(|&e| self.cap[e]).fold(f64::INFINITY, f64::min);
                for &e in &path {
                    self.cap[e] -= bottleneck;
                    self.cap[e ^ 1] += bottleneck;
                }
                return bottleneck;
            }
            let mut advanced = false;
            while it[u] != NIL {
                let e = it[u];
                let v = self.to[e];
                if self.cap[e] > eps && level[v] == level[u] + 1 {
                    path.push(e);
                    u = v;
                    advanced = true;
                    break;
                }
                it[u] = self.next[e];
            }
            if !advanced {
                // Dead end: retreat and drop the arc that led here.
                let Some(e) = path.pop() else {
                    return 0.0;
                };
                u = self.to[e ^ 1];
                it[u] = self.next[it[u]];
            }
        }
    }

    fn reachable(&self, s: usize, eps: f64) -> Vec<bool> {
        self.levels(s, eps).into_iter().map(|l| l != u32::MAX).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutResult {
    pub iso: f64,
    pub foreground_cells: Vec<CellId>,
    pub background_cells: Vec<CellId>,
    pub cut_weight: f64,
    pub node_count: usize,
    #[serde(skip)]
    pub max_flow: f64,
    #[serde(skip)]
    pub solve_time: Duration,
}

impl CutResult {
    pub fn solve_ms(&self) -> f64 {
        self.solve_time.as_secs_f64() * 1e3
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("segmentation", e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CutResult> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json("segmentation", e))
    }
}

/// Minimum cut separating all foreground seeds from all background seeds.
/// The foreground side is everything reachable from the source in the final
/// residual graph.
pub fn min_cut(graph: &IsoGraph, seeds: &SeedSets, iso: f64) -> Result<CutResult> {
    let start = Instant::now();
    if seeds.foreground().is_empty() || seeds.background().is_empty() {
        return Err(Error::Config("segmentation needs both foreground and background seeds".into()));
    }
    let n = graph.nodes.len();
    let (src, sink) = (n, n + 1);
    let max_w = graph.edges.iter().map(|e| e.weight).fold(0.0, f64::max);
    let scale = if max_w > 0.0 { max_w } else { 1.0 };
    let infinite = 1e9 * scale;
    let eps = 1e-12 * scale;
    let mut net = FlowNetwork::new(n + 2);
    for e in &graph.edges {
        let a = graph.node_index(e.a).ok_or(Error::Seed(e.a))?;
        let b = graph.node_index(e.b).ok_or(Error::Seed(e.b))?;
        net.add(a, b, e.weight, e.weight);
    }
    for &id in seeds.foreground() {
        net.add(src, graph.node_index(id).ok_or(Error::Seed(id))?, infinite, 0.0);
    }
    for &id in seeds.background() {
        net.add(graph.node_index(id).ok_or(Error::Seed(id))?, sink, infinite, 0.0);
    }
    let max_flow = net.max_flow(src, sink, eps);
    let reach = net.reachable(src, eps);
    let mut foreground_cells = Vec::new();
    let mut background_cells = Vec::new();
    for (i, &id) in graph.nodes.iter().enumerate() {
        if reach[i] {
            foreground_cells.push(id);
        } else {
            background_cells.push(id);
        }
    }
    let cut_weight = graph
        .edges
        .iter()
        .filter(|e| reach[graph.node_index(e.a).unwrap()] != reach[graph.node_index(e.b).unwrap()])
        .map(|e| e.weight)
        .sum();
    Ok(CutResult {
        iso,
        foreground_cells,
        background_cells,
        cut_weight,
        node_count: n,
        max_flow,
        solve_time: start.elapsed(),
    })
}

/// Graph construction plus cut; `solve_time` covers both.
pub fn segment(vol: &ScalarVolume, iso: f64, seeds: &SeedSets, crop: &CropBounds) -> Result<(IsoGraph, CutResult)> {
    let start = Instant::now();
    let graph = build_graph(vol, iso, seeds, crop)?;
    let mut cut = min_cut(&graph, seeds, iso)?;
    cut.solve_time = start.elapsed();
    Ok((graph, cut))
}
