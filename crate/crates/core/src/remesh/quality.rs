use std::collections::HashMap;

use crate::geometry::{Mesh, Vec3};

/// Counts, edge-length statistics and triangle quality of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshQuality {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    pub min_edge: f64,
    pub mean_edge: f64,
    pub max_edge: f64,
    /// Ten equal-width bins spanning `[min_edge, max_edge]`.
    pub edge_histogram: Vec<usize>,
    pub min_quality: f64,
    pub mean_quality: f64,
    pub mean_valence: f64,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
}

impl MeshQuality {
    pub fn is_manifold(&self) -> bool {
        self.nonmanifold_edges == 0
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_edges == 0 && self.nonmanifold_edges == 0
    }

    pub const CSV_HEADER: &'static str =
        "iter,verts,edges,faces,euler,min_edge,mean_edge,max_edge,min_quality,mean_quality,boundary_edges,nonmanifold_edges";

    pub fn csv_row(&self, iter: usize) -> String {
        format!(
            "{iter},{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6},{:.6},{},{}",
            self.vertices,
            self.edges,
            self.faces,
            self.euler,
            self.min_edge,
            self.mean_edge,
            self.max_edge,
            self.min_quality,
            self.mean_quality,
            self.boundary_edges,
            self.nonmanifold_edges
        )
    }
}

/// `2·inradius / circumradius`: 1 for equilateral, 0 for degenerate.
pub fn triangle_quality(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (la, lb, lc) = ((b - c).norm(), (c - a).norm(), (a - b).norm());
    let denom = la * lb * lc;
    if denom <= 0.0 {
        return 0.0;
    }
    ((lb + lc - la) * (lc + la - lb) * (la + lb - lc) / denom).max(0.0)
}

pub fn mesh_quality_report(mesh: &Mesh) -> MeshQuality {
    let mut edge_faces: HashMap<(u32, u32), usize> = HashMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *edge_faces.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let lengths: Vec<f64> = edge_faces
        .keys()
        .map(|&(a, b)| (mesh.vertices[a as usize] - mesh.vertices[b as usize]).norm())
        .collect();
    let (min_edge, max_edge) = lengths
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    let mean_edge = lengths.iter().sum::<f64>() / lengths.len().max(1) as f64;
    let mut edge_histogram = vec![0; 10];
    let span = max_edge - min_edge;
    for &l in &lengths {
        let bin = if span > 0.0 { (((l - min_edge) / span) * 10.0) as usize } else { 0 };
        edge_histogram[bin.min(9)] += 1;
    }
    let qualities: Vec<f64> = (0..mesh.faces.len())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            triangle_quality(&a, &b, &c)
        })
        .collect();
    let used = {
        let mut used = vec![false; mesh.vertices.len()];
        mesh.faces.iter().flatten().for_each(|&v| used[v as usize] = true);
        used.iter().filter(|&&u| u).count()
    };
    MeshQuality {
        vertices: mesh.vertices.len(),
        edges: edge_faces.len(),
        faces: mesh.faces.len(),
        euler: mesh.vertices.len() as i64 - edge_faces.len() as i64 + mesh.faces.len() as i64,
        min_edge: if lengths.is_empty() { 0.0 } else { min_edge },
        mean_edge,
        max_edge,
        edge_histogram,
        min_quality: qualities.iter().copied().fold(f64::INFINITY, f64::min).min(1.0),
        mean_quality: qualities.iter().sum::<f64>() / qualities.len().max(1) as f64,
        mean_valence: 2.0 * edge_faces.len() as f64 / used.max(1) as f64,
        boundary_edges: edge_faces.values().filter(|&&c| c == 1).count(),
        nonmanifold_edges: edge_faces.values().filter(|&&c| c > 2).count(),
    }
}
