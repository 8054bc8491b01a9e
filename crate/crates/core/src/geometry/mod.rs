//! Core value types: indexed triangle meshes, pinhole cameras and float images,
//! plus the exact ray–triangle intersection used by the reference renderers.

mod camera;
mod image;
pub mod obj;
mod ray;

pub use camera::{read_cameras, write_cameras, Camera};
pub use image::Image;
pub use ray::ray_triangle_intersect;

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Faces whose area falls below this are degenerate and skipped by the renderers.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle mesh with per-vertex raw (pre-squash) colors.
///
/// `colors` is either empty or holds one entry per vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub colors: Vec<Vec3>,
}

impl Mesh {
    /// Builds a mesh after checking the index invariants.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>, colors: Vec<Vec3>) -> Result<Self> {
        let mesh = Mesh {
            vertices,
            faces,
            colors,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if !self.colors.is_empty() && self.colors.len() != n {
            return Err(Error::Structural(format!(
                "{} colors for {} vertices",
                self.colors.len(),
                n
            )));
        }
        for (fi, f) in self.faces.iter().enumerate() {
            for &i in f {
                if i as usize >= n {
                    return Err(Error::Structural(format!(
                        "face {fi} references vertex index {i} but the mesh has {n} vertices"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Structural(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
        }
        if let Some(i) = self.vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Structural(format!("vertex {i} is not finite")));
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        triangle_area(&a, &b, &c)
    }

    pub fn is_degenerate(&self, face: usize) -> bool {
        self.face_area(face) < DEGENERATE_AREA
    }

    /// Undirected edges as sorted `(lo, hi)` pairs, each listed once.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut edges: Vec<(u32, u32)> = self
            .faces
            .iter()
            .flat_map(|f| {
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

    /// V − E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    /// Signed enclosed volume (positive for outward-oriented closed meshes).
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn bbox(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Per-vertex unit normals together with a flag for vertices that fell back to +z.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexNormals {
    pub normals: Vec<Vec3>,
    pub flagged: Vec<bool>,
}

/// Area-weighted vertex normals.
///
/// Vertices whose weighted sum vanishes (isolated, only degenerate faces, or
/// exact cancellation) get `(0, 0, 1)` and are flagged.
pub fn compute_vertex_normals(mesh: &Mesh) -> VertexNormals {
    let mut acc = vec![Vec3::zeros(); mesh.vertices.len()];
    for (fi, f) in mesh.faces.iter().enumerate() {
        let [a, b, c] = mesh.triangle(fi);
        // |cross| is twice the area, so the sum is already area weighted.
        let n = (b - a).cross(&(c - a));
        for &i in f {
            acc[i as usize] += n;
        }
    }
    let mut flagged = vec![false; acc.len()];
    let normals = acc
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let len = n.norm();
            if len > 2.0 * DEGENERATE_AREA && len.is_finite() {
                n / len
            } else {
                flagged[i] = true;
                Vec3::z()
            }
        })
        .collect();
    VertexNormals { normals, flagged }
}
