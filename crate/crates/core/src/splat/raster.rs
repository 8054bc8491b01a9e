//! Triangle setup, tile binning and per-pixel fragment generation.

use crate::geometry::{triangle_area, Camera, Vec3, DEGENERATE_AREA};

use super::Fragment;

/// Slack on screen-space barycentrics at triangle edges.
pub const SCREEN_BARY_EPS: f64 = 1e-9;

/// Projected triangle ready for rasterization.
#[derive(Debug, Clone, Copy)]
pub struct TriSetup {
    pub layer: u32,
    pub face: u32,
    pub u: [f64; 3],
    pub v: [f64; 3],
    pub inv_z: [f64; 3],
    pub inv_area2: f64,
    /// Inclusive pixel ranges whose centers fall inside the screen AABB.
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

/// Why a triangle was dropped before rasterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cull {
    Near,
    Far,
    Degenerate,
    Offscreen,
}

/// Projects the triangle and decides whether it can produce fragments.
///
/// Triangles touching or crossing the near plane are dropped whole, as are
/// triangles entirely beyond the far plane, degenerate ones (3D area below
/// `DEGENERATE_AREA` or collapsed to a line on screen), and those whose
/// screen AABB contains no pixel center.
pub fn setup_triangle(
    camera: &Camera,
    layer: u32,
    face: u32,
    verts: [&Vec3; 3],
    projected: [[f64; 3]; 3],
) -> Result<TriSetup, Cull> {
    let z = [projected[0][2], projected[1][2], projected[2][2]];
    if z.iter().any(|&z| !(z > camera.near)) {
        return Err(Cull::Near);
    }
    if z.iter().all(|&z| z >= camera.far) {
        return Err(Cull::Far);
    }
    if triangle_area(verts[0], verts[1], verts[2]) < DEGENERATE_AREA {
        return Err(Cull::Degenerate);
    }
    let u = [projected[0][0], projected[1][0], projected[2][0]];
    let v = [projected[0][1], projected[1][1], projected[2][1]];
    let area2 = (u[1] - u[0]) * (v[2] - v[0]) - (u[2] - u[0]) * (v[1] - v[0]);
    if !(area2.abs() > 1e-12) {
        return Err(Cull::Degenerate);
    }
    let (umin, umax) = min_max(u);
    let (vmin, vmax) = min_max(v);
    let pad = 1e-7;
    let fx0 = (umin - 0.5 - pad).ceil().max(0.0);
    let fx1 = (umax - 0.5 + pad).floor().min(camera.width as f64 - 1.0);
    let fy0 = (vmin - 0.5 - pad).ceil().max(0.0);
    let fy1 = (vmax - 0.5 + pad).floor().min(camera.height as f64 - 1.0);
    if !(fx0 <= fx1 && fy0 <= fy1) {
        return Err(Cull::Offscreen);
    }
    Ok(TriSetup {
        layer,
        face,
        u,
        v,
        inv_z: [1.0 / z[0], 1.0 / z[1], 1.0 / z[2]],
        inv_area2: 1.0 / area2,
        x0: fx0 as usize,
        x1: fx1 as usize,
        y0: fy0 as usize,
        y1: fy1 as usize,
    })
}

fn min_max(a: [f64; 3]) -> (f64, f64) {
    (a[0].min(a[1]).min(a[2]), a[0].max(a[1]).max(a[2]))
}

impl TriSetup {
    /// Screen-space barycentrics of the point `(px, py)`.
    #[inline]
    pub fn screen_bary(&self, px: f64, py: f64) -> [f64; 3] {
        let (u, v) = (&self.u, &self.v);
        let e = |a: usize, b: usize| (u[b] - u[a]) * (py - v[a]) - (v[b] - v[a]) * (px - u[a]);
        [
            e(1, 2) * self.inv_area2,
            e(2, 0) * self.inv_area2,
            e(0, 1) * self.inv_area2,
        ]
    }

    /// Depth-corrected barycentrics and depth at pixel center `(x, y)`, or
    /// `None` when the center falls outside the triangle.
    ///
    /// With screen weights `w'` and vertex depths `z_k`:
    /// `1/z = Σ w'_k / z_k` and `w_k = (w'_k / z_k) · z`.
    #[inline]
    pub fn sample(&self, x: usize, y: usize) -> Option<([f64; 3], f64)> {
        let ws = self.screen_bary(x as f64 + 0.5, y as f64 + 0.5);
        if ws.iter().any(|&w| w < -SCREEN_BARY_EPS) {
            return None;
        }
        Some(perspective_correct(ws, self.inv_z))
    }
}

/// Converts screen-space barycentrics to perspective-correct ones.
pub fn perspective_correct(ws: [f64; 3], inv_z: [f64; 3]) -> ([f64; 3], f64) {
    let a = [ws[0] * inv_z[0], ws[1] * inv_z[1], ws[2] * inv_z[2]];
    let inv_depth = a[0] + a[1] + a[2];
    let z = 1.0 / inv_depth;
    ([a[0] * z, a[1] * z, a[2] * z], z)
}

/// Triangles of every layer, bucketed by the screen tiles their AABB overlaps.
#[derive(Debug, Clone)]
pub struct TileBins {
    pub tile_size: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub setups: Vec<TriSetup>,
    offsets: Vec<usize>,
    items: Vec<u32>,
    pub culled_near: usize,
    pub culled_degenerate: usize,
}

impl TileBins {
    pub fn num_tiles(&self) -> usize {
        self.tiles_x * self.tiles_y
    }

    /// Indices into `setups` for tile `t` (row-major tile order).
    pub fn tile(&self, t: usize) -> &[u32] {
        &self.items[self.offsets[t]..self.offsets[t + 1]]
    }

    /// `(layer, face)` pairs listed in tile `(tx, ty)`.
    pub fn tile_triangles(&self, tx: usize, ty: usize) -> Vec<(u32, u32)> {
        self.tile(ty * self.tiles_x + tx)
            .iter()
            .map(|&i| {
                let s = &self.setups[i as usize];
                (s.layer, s.face)
            })
            .collect()
    }

    /// Pixel rectangle `(x0, y0, x1_exclusive, y1_exclusive)` of tile `t`.
    pub fn tile_rect(&self, t: usize, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let tx = t % self.tiles_x;
        let ty = t / self.tiles_x;
        let x0 = tx * self.tile_size;
        let y0 = ty * self.tile_size;
        (x0, y0, (x0 + self.tile_size).min(width), (y0 + self.tile_size).min(height))
    }
}

/// Bins triangles given per-layer vertex arrays that share `faces`.
pub fn bin_geometry(
    camera: &Camera,
    layer_vertices: &[Vec<Vec3>],
    faces: &[[u32; 3]],
    tile_size: usize,
) -> TileBins {
    assert!(tile_size > 0);
    let tiles_x = camera.width.div_ceil(tile_size);
    let tiles_y = camera.height.div_ceil(tile_size);
    let mut setups = Vec::new();
    let (mut culled_near, mut culled_degenerate) = (0, 0);
    for (l, verts) in layer_vertices.iter().enumerate() {
        let projected: Vec<[f64; 3]> = verts
            .iter()
            .map(|p| {
                let (u, v, z) = camera.project(p);
                [u, v, z]
            })
            .collect();
        for (fi, f) in faces.iter().enumerate() {
            let idx = [f[0] as usize, f[1] as usize, f[2] as usize];
            match setup_triangle(
                camera,
                l as u32,
                fi as u32,
                [&verts[idx[0]], &verts[idx[1]], &verts[idx[2]]],
                [projected[idx[0]], projected[idx[1]], projected[idx[2]]],
            ) {
                Ok(s) => setups.push(s),
                Err(Cull::Near) => culled_near += 1,
                Err(Cull::Degenerate) => culled_degenerate += 1,
                Err(_) => {}
            }
        }
    }
    if culled_near > 0 {
        log::debug!("binning: {culled_near} triangles culled at the near plane");
    }

    // counting sort keeps triangles in submission order within each tile
    let n_tiles = tiles_x * tiles_y;
    let tile_range = |s: &TriSetup| {
        (
            s.x0 / tile_size,
            s.x1 / tile_size,
            s.y0 / tile_size,
            s.y1 / tile_size,
        )
    };
    let mut counts = vec![0usize; n_tiles + 1];
    for s in &setups {
        let (tx0, tx1, ty0, ty1) = tile_range(s);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                counts[ty * tiles_x + tx + 1] += 1;
            }
        }
    }
    for i in 0..n_tiles {
        counts[i + 1] += counts[i];
    }
    let offsets = counts.clone();
    let mut cursor = counts;
    let mut items = vec![0u32; offsets[n_tiles]];
    for (i, s) in setups.iter().enumerate() {
        let (tx0, tx1, ty0, ty1) = tile_range(s);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                let t = ty * tiles_x + tx;
                items[cursor[t]] = i as u32;
                cursor[t] += 1;
            }
        }
    }
    TileBins {
        tile_size,
        tiles_x,
        tiles_y,
        setups,
        offsets,
        items,
        culled_near,
        culled_degenerate,
    }
}

/// Orders fragments near to far; exact depth ties fall back to (layer, face).
pub fn sort_fragments(frags: &mut [Fragment]) {
    frags.sort_unstable_by(|a, b| {
        a.depth
            .total_cmp(&b.depth)
            .then(a.layer.cmp(&b.layer))
            .then(a.face.cmp(&b.face))
    });
}
