//! Incremental isotropic remeshing: split long edges, collapse short ones,
//! flip toward regular valence, then smooth tangentially.
//!
//! Per-vertex state living outside the mesh (optimizer moments, step
//! counters) follows the topology through [`VertexAttributes`].

mod quality;

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Vec3, DEGENERATE_AREA};

pub use quality::{mesh_quality_report, triangle_quality, MeshQuality};

#[derive(Debug, Clone, PartialEq)]
pub struct RemeshConfig {
    pub target_edge: f64,
    pub split_factor: f64,
    pub collapse_factor: f64,
    pub smooth_lambda: f64,
    pub max_ops_per_call: usize,
}

impl RemeshConfig {
    pub fn new(target_edge: f64) -> Self {
        RemeshConfig {
            target_edge,
            split_factor: 4.0 / 3.0,
            collapse_factor: 4.0 / 5.0,
            smooth_lambda: 0.1,
            max_ops_per_call: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_edge > 0.0) {
            return Err(Error::Config("remesh target edge must be positive".into()));
        }
        if !(0.0 < self.collapse_factor && self.collapse_factor < 1.0 && 1.0 < self.split_factor) {
            return Err(Error::Config(
                "remesh factors must satisfy 0 < collapse < 1 < split".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.smooth_lambda) {
            return Err(Error::Config("smoothing lambda must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-vertex data that must track topology edits.
pub trait VertexAttributes {
    fn len(&self) -> usize;
    /// Appends a vertex created at the midpoint of `a` and `b`.
    fn push_midpoint(&mut self, a: usize, b: usize);
    /// `remove` is merged into `keep`.
    fn merge(&mut self, keep: usize, remove: usize);
    /// Keeps rows `keep[0], keep[1], …` in that order.
    fn compact(&mut self, keep: &[usize]);
}

impl VertexAttributes for Vec<Vec3> {
    fn len(&self) -> usize {
        <[Vec3]>::len(self)
    }

    fn push_midpoint(&mut self, a: usize, b: usize) {
        let m = (self[a] + self[b]) * 0.5;
        self.push(m);
    }

    fn merge(&mut self, keep: usize, remove: usize) {
        self[keep] = (self[keep] + self[remove]) * 0.5;
    }

    fn compact(&mut self, keep: &[usize]) {
        *self = keep.iter().map(|&i| self[i]).collect();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RemeshStats {
    pub splits: usize,
    pub collapses: usize,
    pub flips: usize,
    pub rejected_collapses: usize,
}

impl RemeshStats {
    pub fn topology_ops(&self) -> usize {
        self.splits + self.collapses + self.flips
    }
}

/// Checks that every edge has one or two faces, that directed edges are
/// unique (consistent orientation), and that every vertex link is a single
/// fan.
pub fn check_manifold(mesh: &Mesh) -> Result<()> {
    mesh.validate()?;
    let mut directed: Vec<(u32, u32)> = mesh
        .faces
        .iter()
        .flat_map(|f| (0..3).map(move |k| (f[k], f[(k + 1) % 3])))
        .collect();
    directed.sort_unstable();
    if let Some(w) = directed.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Structural(format!(
            "edge ({}, {}) is used twice in the same direction (non-manifold or inconsistently oriented)",
            w[0].0, w[0].1
        )));
    }
    // vertex links: the directed edges opposite each vertex must chain into
    // one path or cycle
    let mut link: Vec<Vec<(u32, u32)>> = vec![Vec::new(); mesh.vertices.len()];
    for f in &mesh.faces {
        for k in 0..3 {
            link[f[k] as usize].push((f[(k + 1) % 3], f[(k + 2) % 3]));
        }
    }
    for (v, edges) in link.iter().enumerate() {
        if edges.is_empty() {
            continue;
        }
        // find a start: an edge whose tail is nobody's head (boundary fan)
        let start = edges
            .iter()
            .position(|e| !edges.iter().any(|o| o.1 == e.0))
            .unwrap_or(0);
        let mut visited = 1;
        let mut cur = edges[start];
        loop {
            match edges.iter().find(|e| e.0 == cur.1) {
                Some(&next) if next != edges[start] && visited < edges.len() => {
                    cur = next;
                    visited += 1;
                }
                _ => break,
            }
        }
        if visited != edges.len() {
            return Err(Error::Structural(format!(
                "vertex {v} has a disconnected link (non-manifold vertex)"
            )));
        }
    }
    Ok(())
}

/// Valence-improving flips may not create a triangle below this quality
/// unless the pair was already worse.
const FLIP_MIN_QUALITY: f64 = 0.4;

struct Work<'a> {
    pos: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vert_alive: Vec<bool>,
    vf: Vec<Vec<u32>>,
    attrs: Vec<&'a mut dyn VertexAttributes>,
}

impl<'a> Work<'a> {
    fn new(mesh: &Mesh, attrs: Vec<&'a mut dyn VertexAttributes>) -> Self {
        let mut vf = vec![Vec::new(); mesh.vertices.len()];
        for (fi, f) in mesh.faces.iter().enumerate() {
            for &v in f {
                vf[v as usize].push(fi as u32);
            }
        }
        Work {
            pos: mesh.vertices.clone(),
            faces: mesh.faces.clone(),
            face_alive: vec![true; mesh.faces.len()],
            vert_alive: vec![true; mesh.vertices.len()],
            vf,
            attrs,
        }
    }

    fn edge_faces(&self, a: u32, b: u32) -> Vec<u32> {
        self.vf[a as usize]
            .iter()
            .copied()
            .filter(|&f| self.faces[f as usize].contains(&b))
            .collect()
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut n: Vec<u32> = self.vf[v as usize]
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&w| w != v)
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    fn is_boundary(&self, v: u32) -> bool {
        let mut n: Vec<u32> = self.vf[v as usize]
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&w| w != v)
            .collect();
        n.sort_unstable();
        // every neighbor of an interior vertex appears in exactly two faces
        n.chunk_by(|a, b| a == b).any(|run| run.len() != 2)
    }

    fn valence_deviation(&self, v: u32, delta: i64) -> f64 {
        let target = if self.is_boundary(v) { 4 } else { 6 };
        let val = self.neighbors(v).len() as i64 + delta;
        ((val - target) * (val - target)) as f64
    }

    fn len(&self, a: u32, b: u32) -> f64 {
        (self.pos[a as usize] - self.pos[b as usize]).norm()
    }

    fn face_normal(&self, f: &[u32; 3]) -> Vec3 {
        let [a, b, c] = f.map(|i| self.pos[i as usize]);
        (b - a).cross(&(c - a))
    }

    fn alive_edges(&self) -> Vec<(u32, u32)> {
        let mut edges: Vec<(u32, u32)> = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &alive)| alive)
            .flat_map(|(f, _)| {
                (0..3).map(move |k| {
                    let (a, b) = (f[k], f[(k + 1) % 3]);
                    (a.min(b), a.max(b))
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    fn remove_face_from(&mut self, v: u32, f: u32) {
        let list = &mut self.vf[v as usize];
        if let Some(i) = list.iter().position(|&x| x == f) {
            list.swap_remove(i);
        }
    }

    fn split(&mut self, a: u32, b: u32) {
        let m = self.pos.len() as u32;
        self.pos.push((self.pos[a as usize] + self.pos[b as usize]) * 0.5);
        self.vert_alive.push(true);
        self.vf.push(Vec::new());
        for attr in self.attrs.iter_mut() {
            attr.push_midpoint(a as usize, b as usize);
        }
        for f in self.edge_faces(a, b) {
            let face = self.faces[f as usize];
            // rotate so the face reads (x, y, c) with x→y the shared edge
            let k = (0..3)
                .find(|&k| {
                    let (x, y) = (face[k], face[(k + 1) % 3]);
                    (x == a && y == b) || (x == b && y == a)
                })
                .unwrap();
            let (x, y, c) = (face[k], face[(k + 1) % 3], face[(k + 2) % 3]);
            self.faces[f as usize] = [x, m, c];
            let nf = self.faces.len() as u32;
            self.faces.push([m, y, c]);
            self.face_alive.push(true);
            self.remove_face_from(y, f);
            self.vf[y as usize].push(nf);
            self.vf[c as usize].push(nf);
            self.vf[m as usize].push(f);
            self.vf[m as usize].push(nf);
        }
    }

    /// Attempts to collapse `b` into `a` at the edge midpoint.
    fn try_collapse(&mut self, a: u32, b: u32, max_len: f64) -> bool {
        let shared = self.edge_faces(a, b);
        if shared.len() != 2 || self.is_boundary(a) || self.is_boundary(b) {
            return false;
        }
        let opposite: Vec<u32> = shared
            .iter()
            .map(|&f| *self.faces[f as usize].iter().find(|&&v| v != a && v != b).unwrap())
            .collect();
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        // link condition: common neighbors are exactly the two opposite vertices
        let common: Vec<u32> = na.iter().copied().filter(|v| nb.binary_search(v).is_ok()).collect();
        if common.len() != 2 || !opposite.iter().all(|o| common.contains(o)) {
            return false;
        }
        if opposite.iter().any(|&o| self.neighbors(o).len() <= 3) || na.len() + nb.len() < 7 {
            return false;
        }
        let mid = (self.pos[a as usize] + self.pos[b as usize]) * 0.5;
        for &v in na.iter().chain(&nb) {
            if v != a && v != b && (self.pos[v as usize] - mid).norm() > max_len {
                return false;
            }
        }
        // incident faces must not flip or degenerate
        for &v in &[a, b] {
            for &f in &self.vf[v as usize] {
                if shared.contains(&f) {
                    continue;
                }
                let face = self.faces[f as usize];
                let old_n = self.face_normal(&face);
                let moved = face.map(|i| if i == a || i == b { mid } else { self.pos[i as usize] });
                let new_n = (moved[1] - moved[0]).cross(&(moved[2] - moved[0]));
                if new_n.dot(&old_n) <= 0.0 || new_n.norm() < 2.0 * DEGENERATE_AREA {
                    return false;
                }
            }
        }

        self.pos[a as usize] = mid;
        for attr in self.attrs.iter_mut() {
            attr.merge(a as usize, b as usize);
        }
        for &f in &shared {
            self.face_alive[f as usize] = false;
            for v in self.faces[f as usize] {
                self.remove_face_from(v, f);
            }
        }
        for f in std::mem::take(&mut self.vf[b as usize]) {
            for v in self.faces[f as usize].iter_mut() {
                if *v == b {
                    *v = a;
                }
            }
            self.vf[a as usize].push(f);
        }
        self.vert_alive[b as usize] = false;
        true
    }

    /// Flips edge `(a, b)` if that lowers the valence deviation.
    fn try_flip(&mut self, a: u32, b: u32) -> bool {
        let shared = self.edge_faces(a, b);
        if shared.len() != 2 {
            return false;
        }
        // orient: f1 = (a, b, c), f2 = (b, a, d)
        let (mut f1, mut f2) = (shared[0], shared[1]);
        let has_dir = |f: u32, x: u32, y: u32| {
            let face = self.faces[f as usize];
            (0..3).any(|k| face[k] == x && face[(k + 1) % 3] == y)
        };
        let (a, b) = if has_dir(f1, a, b) {
            (a, b)
        } else if has_dir(f1, b, a) {
            (b, a)
        } else {
            return false;
        };
        if !has_dir(f2, b, a) {
            std::mem::swap(&mut f1, &mut f2);
            if !has_dir(f1, a, b) || !has_dir(f2, b, a) {
                return false;
            }
        }
        let third = |f: u32| *self.faces[f as usize].iter().find(|&&v| v != a && v != b).unwrap();
        let (c, d) = (third(f1), third(f2));
        if c == d || self.neighbors(c).contains(&d) {
            return false;
        }
        if self.neighbors(a).len() <= 3 || self.neighbors(b).len() <= 3 {
            return false;
        }
        let before = self.valence_deviation(a, 0)
            + self.valence_deviation(b, 0)
            + self.valence_deviation(c, 0)
            + self.valence_deviation(d, 0);
        let after = self.valence_deviation(a, -1)
            + self.valence_deviation(b, -1)
            + self.valence_deviation(c, 1)
            + self.valence_deviation(d, 1);
        let p = |v: u32| self.pos[v as usize];
        let q_before = triangle_quality(&p(a), &p(b), &p(c)).min(triangle_quality(&p(b), &p(a), &p(d)));
        let q_after = triangle_quality(&p(a), &p(d), &p(c)).min(triangle_quality(&p(d), &p(b), &p(c)));
        // valence first; at equal valence cost, flip toward better triangles;
        // never trade a decent pair for a sliver
        let creates_sliver = q_after < q_before && q_after < FLIP_MIN_QUALITY;
        if after > before || (after == before && q_after <= q_before) || creates_sliver {
            return false;
        }
        let n1 = self.face_normal(&[a, b, c]);
        let n2 = self.face_normal(&[b, a, d]);
        let avg = n1.normalize() + n2.normalize();
        let new1 = [a, d, c];
        let new2 = [d, b, c];
        for nf in [&new1, &new2] {
            let n = self.face_normal(nf);
            if n.norm() < 2.0 * DEGENERATE_AREA || n.dot(&avg) <= 0.0 || n.dot(&n1) <= 0.0 || n.dot(&n2) <= 0.0 {
                return false;
            }
        }
        self.faces[f1 as usize] = new1;
        self.faces[f2 as usize] = new2;
        self.remove_face_from(a, f2);
        self.remove_face_from(b, f1);
        self.vf[c as usize].push(f2);
        self.vf[d as usize].push(f1);
        true
    }

    fn smooth(&mut self, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        let n = self.pos.len();
        let mut normals = vec![Vec3::zeros(); n];
        for (f, _) in self.faces.iter().zip(&self.face_alive).filter(|(_, &a)| a) {
            let fn_ = self.face_normal(f);
            for &v in f {
                normals[v as usize] += fn_;
            }
        }
        let updates: Vec<Option<Vec3>> = (0..n as u32)
            .map(|v| {
                if !self.vert_alive[v as usize] || self.vf[v as usize].is_empty() || self.is_boundary(v) {
                    return None;
                }
                let nbrs = self.neighbors(v);
                let centroid = nbrs.iter().map(|&w| self.pos[w as usize]).sum::<Vec3>() / nbrs.len() as f64;
                let d = centroid - self.pos[v as usize];
                let nrm = normals[v as usize];
                let len = nrm.norm();
                if len < 2.0 * DEGENERATE_AREA {
                    return None;
                }
                let nrm = nrm / len;
                Some(self.pos[v as usize] + (d - nrm * nrm.dot(&d)) * lambda)
            })
            .collect();
        for (p, u) in self.pos.iter_mut().zip(updates) {
            if let Some(u) = u {
                *p = u;
            }
        }
    }

    /// Drops dead vertices and faces; attributes are compacted alongside.
    fn finish(mut self) -> Mesh {
        let keep: Vec<usize> = (0..self.pos.len())
            .filter(|&v| self.vert_alive[v] && !self.vf[v].is_empty())
            .collect();
        let mut new_index = vec![u32::MAX; self.pos.len()];
        for (i, &v) in keep.iter().enumerate() {
            new_index[v] = i as u32;
        }
        for attr in self.attrs.iter_mut() {
            attr.compact(&keep);
        }
        let faces = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &a)| a)
            .map(|(f, _)| f.map(|v| new_index[v as usize]))
            .collect();
        let vertices = keep.iter().map(|&v| self.pos[v]).collect();
        Mesh {
            vertices,
            faces,
            colors: Vec::new(),
        }
    }
}

/// One remeshing pass: split, collapse, flip, tangential smoothing.
///
/// `attrs` are external per-vertex arrays (optimizer state) remapped alongside
/// the mesh; the mesh's own colors are averaged the same way.
pub fn remesh_step(
    mesh: &Mesh,
    attrs: &mut [&mut dyn VertexAttributes],
    cfg: &RemeshConfig,
) -> Result<(Mesh, RemeshStats)> {
    cfg.validate()?;
    check_manifold(mesh)?;
    let nv = mesh.vertices.len();
    if let Some(a) = attrs.iter().find(|a| a.len() != nv) {
        return Err(Error::Dimension(format!(
            "vertex attribute has {} rows for {nv} vertices",
            a.len()
        )));
    }
    let has_colors = !mesh.colors.is_empty();
    let mut colors = mesh.colors.clone();
    let mut all: Vec<&mut dyn VertexAttributes> = attrs
        .iter_mut()
        .map(|a| &mut **a as &mut dyn VertexAttributes)
        .collect();
    if has_colors {
        all.push(&mut colors);
    }
    let mut w = Work::new(mesh, all);
    let mut stats = RemeshStats::default();
    let hi = cfg.split_factor * cfg.target_edge;
    let lo = cfg.collapse_factor * cfg.target_edge;
    let budget = cfg.max_ops_per_call;

    // (1) split, longest first
    let mut long: Vec<(f64, u32, u32)> = w
        .alive_edges()
        .into_iter()
        .map(|(a, b)| (w.len(a, b), a, b))
        .filter(|e| e.0 > hi)
        .collect();
    long.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    for (_, a, b) in long {
        if stats.topology_ops() >= budget {
            break;
        }
        w.split(a, b);
        stats.splits += 1;
    }

    // (2) collapse, shortest first
    let mut short: Vec<(f64, u32, u32)> = w
        .alive_edges()
        .into_iter()
        .map(|(a, b)| (w.len(a, b), a, b))
        .filter(|e| e.0 < lo)
        .collect();
    short.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    for (_, a, b) in short {
        if stats.topology_ops() >= budget {
            break;
        }
        if !w.vert_alive[a as usize] || !w.vert_alive[b as usize] || w.len(a, b) >= lo {
            continue;
        }
        if w.try_collapse(a, b, hi) {
            stats.collapses += 1;
        } else {
            stats.rejected_collapses += 1;
        }
    }

    // (3) flip toward valence 6 (4 on the boundary)
    for (a, b) in w.alive_edges() {
        if stats.topology_ops() >= budget {
            break;
        }
        if w.try_flip(a, b) {
            stats.flips += 1;
        }
    }

    // (4) tangential smoothing
    w.smooth(cfg.smooth_lambda);

    let compacted = w.finish();
    let out = Mesh { colors, ..compacted };
    debug_assert!(check_manifold(&out).is_ok(), "remesh broke manifoldness");
    Ok((out, stats))
}

#[cfg(test)]
mod tests;
