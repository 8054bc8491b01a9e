//! Tetrahedral SDF grid, marching-tetrahedra extraction and the adjoint that
//! routes mesh-vertex gradients back to grid SDF values.
//!
//! The lattice is a regular `(res+1)³` grid; every cube is split into six
//! tetrahedra sharing the cube's main diagonal (Kuhn split), which tiles space
//! consistently across neighbouring cubes. Grid positions are fixed; only the
//! SDF values (and, during the early stage, grid colors) are optimized.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Vec3};

/// Value written over exact zeros before extraction.
pub const ZERO_PERTURBATION: f64 = 1e-10;

const SNAPSHOT_MAGIC: &[u8; 8] = b"SMTETGRD";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TetGrid {
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[u32; 4]>,
    pub sdf: Vec<f64>,
    /// Raw (pre-squash) colors per grid vertex; empty until initialized.
    pub colors: Vec<Vec3>,
    pub resolution: usize,
    pub bbox: (Vec3, Vec3),
}

/// Where each extracted vertex sits: on grid edge `(a, b)` with `a < b`, at
/// `p = x_a + t (x_b − x_a)`. The SDF values used at extraction are kept so
/// the adjoint sees exactly what the forward pass saw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCrossing {
    pub a: u32,
    pub b: u32,
    pub t: f64,
    pub sa: f64,
    pub sb: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtractionMap {
    pub crossings: Vec<EdgeCrossing>,
}

/// The six tets of the unit cube, as corner indices `dx + 2dy + 4dz`; all
/// positively oriented.
const CUBE_TETS: [[usize; 4]; 6] = kuhn_tets();

const fn kuhn_tets() -> [[usize; 4]; 6] {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let odd = [false, true, true, false, false, true];
    let mut out = [[0; 4]; 6];
    let mut i = 0;
    while i < 6 {
        let p = perms[i];
        let c1 = 1 << p[0];
        let c2 = c1 | (1 << p[1]);
        out[i] = if odd[i] { [0, c2, c1, 7] } else { [0, c1, c2, 7] };
        i += 1;
    }
    out
}

/// Orientation-preserving orderings with each corner first.
const EVEN_FIRST: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 0, 3, 2], [2, 0, 1, 3], [3, 0, 2, 1]];

fn permutation_is_odd(p: [usize; 4]) -> bool {
    let mut inversions = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            inversions += usize::from(p[i] > p[j]);
        }
    }
    inversions % 2 == 1
}

pub fn tet_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
}

/// Builds the lattice over `bbox` with `resolution` cells per axis.
pub fn build_grid(resolution: usize, bbox: (Vec3, Vec3)) -> Result<TetGrid> {
    if resolution < 2 {
        return Err(Error::Config(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    let (lo, hi) = bbox;
    if !(0..3).all(|k| hi[k] > lo[k]) {
        return Err(Error::Config("grid bounding box is empty".into()));
    }
    let n = resolution + 1;
    let step = (hi - lo) / resolution as f64;
    let mut vertices = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                vertices.push(lo + Vec3::new(i as f64 * step.x, j as f64 * step.y, k as f64 * step.z));
            }
        }
    }
    let idx = |i: usize, j: usize, k: usize| (i + n * (j + n * k)) as u32;
    let mut tets = Vec::with_capacity(resolution.pow(3) * 6);
    for k in 0..resolution {
        for j in 0..resolution {
            for i in 0..resolution {
                let corner = |c: usize| idx(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                for t in &CUBE_TETS {
                    tets.push(t.map(corner));
                }
            }
        }
    }
    Ok(TetGrid {
        sdf: vec![0.0; vertices.len()],
        vertices,
        tets,
        colors: Vec::new(),
        resolution,
        bbox,
    })
}

impl TetGrid {
    /// Cell edge lengths along each axis.
    pub fn cell_size(&self) -> Vec3 {
        (self.bbox.1 - self.bbox.0) / self.resolution as f64
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    fn lattice_coords(&self, id: u32) -> [usize; 3] {
        let n = self.resolution + 1;
        let id = id as usize;
        [id % n, (id / n) % n, id / (n * n)]
    }

    fn lattice_index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.resolution + 1;
        i + n * (j + n * k)
    }

    /// Checks index validity, positive orientation and finite SDF values.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.sdf.len() != n || !(self.colors.is_empty() || self.colors.len() == n) {
            return Err(Error::Structural("grid arrays have mismatched lengths".into()));
        }
        for (ti, t) in self.tets.iter().enumerate() {
            if t.iter().any(|&i| i as usize >= n) {
                return Err(Error::Structural(format!("tet {ti} has an out-of-range index")));
            }
            let v = t.map(|i| self.vertices[i as usize]);
            if tet_volume(&v[0], &v[1], &v[2], &v[3]) <= 0.0 {
                return Err(Error::Structural(format!("tet {ti} is not positively oriented")));
            }
        }
        if let Some(i) = self.sdf.iter().position(|s| !s.is_finite()) {
            return Err(Error::Structural(format!("sdf at grid vertex {i} is not finite")));
        }
        Ok(())
    }

    /// Sets every grid color to the same raw value.
    pub fn fill_colors(&mut self, raw: Vec3) {
        self.colors = vec![raw; self.vertices.len()];
    }
}

/// `sdf[g] = ‖x_g − center‖ − r`.
pub fn init_sphere_sdf(grid: &mut TetGrid, center: &Vec3, r: f64) {
    assert!(r > 0.0, "sphere radius must be positive");
    for (s, x) in grid.sdf.iter_mut().zip(&grid.vertices) {
        *s = (x - center).norm() - r;
    }
}

/// Extracts the zero level set as a triangle mesh whose normals point toward
/// positive SDF. Grid colors, if present, are interpolated onto the vertices.
pub fn marching_tets(grid: &TetGrid) -> (Mesh, ExtractionMap) {
    let mut sdf = grid.sdf.clone();
    let zeros = sdf.iter_mut().filter(|s| **s == 0.0).map(|s| *s = ZERO_PERTURBATION).count();
    if zeros > 0 {
        log::info!("marching tets: {zeros} grid values at exactly 0 moved to {ZERO_PERTURBATION:e}");
    }

    let nv = grid.vertices.len() as u64;
    let mut lookup: HashMap<u64, u32> = HashMap::new();
    let mut map = ExtractionMap::default();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();

    let mut crossing = |u: u32, w: u32| -> u32 {
        let (a, b) = if u < w { (u, w) } else { (w, u) };
        *lookup.entry(a as u64 * nv + b as u64).or_insert_with(|| {
            let (sa, sb) = (sdf[a as usize], sdf[b as usize]);
            let t = sa / (sa - sb);
            let (xa, xb) = (grid.vertices[a as usize], grid.vertices[b as usize]);
            vertices.push(xa + (xb - xa) * t);
            map.crossings.push(EdgeCrossing { a, b, t, sa, sb });
            (vertices.len() - 1) as u32
        })
    };

    for tet in &grid.tets {
        let neg = tet.map(|g| sdf[g as usize] < 0.0);
        let n_neg = neg.iter().filter(|&&x| x).count();
        match n_neg {
            1 | 3 => {
                // the lone corner and the rest in an orientation-preserving order
                let lone = (0..4).find(|&i| neg[i] == (n_neg == 1)).unwrap();
                let [a, b, c, d] = EVEN_FIRST[lone].map(|i| tet[i]);
                let (pb, pc, pd) = (crossing(a, b), crossing(a, c), crossing(a, d));
                faces.push(if n_neg == 1 { [pb, pc, pd] } else { [pb, pd, pc] });
            }
            2 => {
                let mut order = [0usize; 4];
                let (mut lo, mut hi) = (0, 2);
                for i in 0..4 {
                    if neg[i] {
                        order[lo] = i;
                        lo += 1;
                    } else {
                        order[hi] = i;
                        hi += 1;
                    }
                }
                if permutation_is_odd(order) {
                    order.swap(2, 3);
                }
                let [a, b, c, d] = order.map(|i| tet[i]);
                let ac = crossing(a, c);
                let ad = crossing(a, d);
                let bd = crossing(b, d);
                let bc = crossing(b, c);
                faces.push([ac, ad, bd]);
                faces.push([ac, bd, bc]);
            }
            _ => {}
        }
    }

    let colors = if grid.colors.is_empty() {
        Vec::new()
    } else {
        interpolate_colors(grid, &map, &vertices)
    };
    (Mesh { vertices, faces, colors }, map)
}

/// Trilinear stencil of `p` within the cell anchored at lattice vertex `anchor`:
/// the 8 corner ids, their weights and the weight gradients with respect to `p`.
fn trilinear(grid: &TetGrid, anchor: u32, p: &Vec3) -> ([usize; 8], [f64; 8], [Vec3; 8]) {
    let r = grid.resolution - 1;
    let [i, j, k] = grid.lattice_coords(anchor).map(|c| c.min(r));
    let h = grid.cell_size();
    let origin = grid.vertices[grid.lattice_index(i, j, k)];
    let f = (p - origin).component_div(&h);
    let mut ids = [0; 8];
    let mut w = [0.0; 8];
    let mut dw = [Vec3::zeros(); 8];
    for c in 0..8 {
        let (dx, dy, dz) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
        ids[c] = grid.lattice_index(i + dx, j + dy, k + dz);
        let lerp = |t: f64, bit: usize| if bit == 1 { t } else { 1.0 - t };
        let dlerp = |bit: usize| if bit == 1 { 1.0 } else { -1.0 };
        let (wx, wy, wz) = (lerp(f.x, dx), lerp(f.y, dy), lerp(f.z, dz));
        w[c] = wx * wy * wz;
        dw[c] = Vec3::new(
            dlerp(dx) * wy * wz / h.x,
            wx * dlerp(dy) * wz / h.y,
            wx * wy * dlerp(dz) / h.z,
        );
    }
    (ids, w, dw)
}

/// Raw vertex colors trilinearly interpolated from the grid colors. The cell is
/// the one anchored at the crossing edge's lower endpoint.
pub fn interpolate_colors(grid: &TetGrid, map: &ExtractionMap, positions: &[Vec3]) -> Vec<Vec3> {
    map.crossings
        .iter()
        .zip(positions)
        .map(|(c, p)| {
            let (ids, w, _) = trilinear(grid, c.a, p);
            (0..8).fold(Vec3::zeros(), |acc, m| acc + grid.colors[ids[m]] * w[m])
        })
        .collect()
}

/// Adjoint of [`interpolate_colors`]: returns per-grid-vertex color gradients
/// and the extra `dL/dp` contributed through the interpolation weights.
pub fn interpolate_colors_backward(
    grid: &TetGrid,
    map: &ExtractionMap,
    positions: &[Vec3],
    d_colors: &[Vec3],
) -> (Vec<Vec3>, Vec<Vec3>) {
    let mut d_grid = vec![Vec3::zeros(); grid.vertices.len()];
    let mut d_pos = vec![Vec3::zeros(); positions.len()];
    for (v, ((c, p), g)) in map.crossings.iter().zip(positions).zip(d_colors).enumerate() {
        let (ids, w, dw) = trilinear(grid, c.a, p);
        for m in 0..8 {
            d_grid[ids[m]] += g * w[m];
            d_pos[v] += dw[m] * g.dot(&grid.colors[ids[m]]);
        }
    }
    (d_grid, d_pos)
}

/// Routes `dL/dp` for every extracted vertex to the SDF values of its edge
/// endpoints through `t = s_a / (s_a − s_b)`.
pub fn backprop_to_sdf(map: &ExtractionMap, grid: &TetGrid, dl_dverts: &[Vec3]) -> Vec<f64> {
    assert_eq!(map.crossings.len(), dl_dverts.len());
    let mut out = vec![0.0; grid.vertices.len()];
    for (c, g) in map.crossings.iter().zip(dl_dverts) {
        let edge = grid.vertices[c.b as usize] - grid.vertices[c.a as usize];
        let dl_dt = g.dot(&edge);
        if dl_dt == 0.0 {
            continue;
        }
        let denom = (c.sa - c.sb) * (c.sa - c.sb);
        out[c.a as usize] += dl_dt * (-c.sb / denom);
        out[c.b as usize] += dl_dt * (c.sa / denom);
    }
    out
}

/// Writes the grid state: header (magic, version, resolution, bbox, counts)
/// followed by little-endian `f64` SDF values and, if present, raw colors.
pub fn save_snapshot(grid: &TetGrid, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + grid.sdf.len() * 32);
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.resolution as u64).to_le_bytes());
    for v in [grid.bbox.0, grid.bbox.1] {
        for k in 0..3 {
            buf.extend_from_slice(&v[k].to_le_bytes());
        }
    }
    buf.extend_from_slice(&(grid.sdf.len() as u64).to_le_bytes());
    buf.push(u8::from(!grid.colors.is_empty()));
    for s in &grid.sdf {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    for c in &grid.colors {
        for k in 0..3 {
            buf.extend_from_slice(&c[k].to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    f.write_all(&buf).map_err(|e| Error::file(path, e))
}

pub fn load_snapshot(path: &Path) -> Result<TetGrid> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::file(path, e))?;
    let bad = |m: &str| Error::Structural(format!("{}: {m}", path.display()));
    let mut cur = bytes.as_slice();
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(bad("truncated grid snapshot"));
        }
        let (head, rest) = cur.split_at(n);
        cur = rest;
        Ok(head)
    };
    if take(8)? != SNAPSHOT_MAGIC {
        return Err(bad("not a grid snapshot"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(bad(&format!("unsupported snapshot version {version}")));
    }
    let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
    let resolution = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let mut corners = [0.0; 6];
    for c in &mut corners {
        *c = f64_at(take(8)?);
    }
    let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let has_colors = take(1)?[0] == 1;
    let bbox = (
        Vec3::new(corners[0], corners[1], corners[2]),
        Vec3::new(corners[3], corners[4], corners[5]),
    );
    let mut grid = build_grid(resolution, bbox)?;
    if count != grid.vertices.len() {
        return Err(bad("vertex count does not match resolution"));
    }
    for s in grid.sdf.iter_mut() {
        *s = f64_at(take(8)?);
    }
    if has_colors {
        let mut colors = Vec::with_capacity(count);
        for _ in 0..count {
            colors.push(Vec3::new(f64_at(take(8)?), f64_at(take(8)?), f64_at(take(8)?)));
        }
        grid.colors = colors;
    }
    Ok(grid)
}
