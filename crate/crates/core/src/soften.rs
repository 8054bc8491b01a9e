//! Mesh softening: offset copies of the base mesh along vertex normals, their
//! signed distances to the base surface, and the distance-to-alpha mapping.
//!
//! Layer vertices are treated as constants when differentiating the signed
//! distance, so `s = sign(d)·‖v_layer − v_base‖` is a function of the base
//! vertex only and its gradient is `−n` per unit of `dL/ds`. Forward values are
//! unchanged by this: `s` equals the offset `d`.

use rand::Rng;

use crate::appearance::vertex_color;
use crate::geometry::{compute_vertex_normals, Mesh, Vec3};

/// Upper clamp for per-vertex alphas.
pub const ALPHA_MAX: f64 = 0.999;
/// Lower bound on the sharpness `β` (meters).
pub const BETA_MIN: f64 = 1e-4;
/// Minimum |offset| as a fraction of the half-width `δ`.
pub const MIN_OFFSET_FRACTION: f64 = 1e-3;

/// Scene-global sharpness parameter, stored unconstrained.
///
/// `β = β_min + softplus(b)` keeps `β > β_min` for every real `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaParams {
    pub b: f64,
}

impl AlphaParams {
    pub fn beta(&self) -> f64 {
        BETA_MIN + softplus(self.b)
    }

    /// dβ/db
    pub fn dbeta_db(&self) -> f64 {
        crate::appearance::sigmoid(self.b)
    }

    /// Parameters whose `β` equals `beta` (which must exceed `β_min`).
    pub fn from_beta(beta: f64) -> Self {
        let y = beta - BETA_MIN;
        assert!(y > 0.0, "beta must exceed {BETA_MIN}");
        // inverse softplus
        let b = if y > 30.0 { y } else { y.exp_m1().ln() };
        AlphaParams { b }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// The softened multi-layer mesh.
///
/// All layers share `faces`. Offsets are drawn once per layer and shared by
/// every vertex of that layer; `offset(layer, vertex)` exposes the per-vertex
/// view.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSet {
    pub faces: Vec<[u32; 3]>,
    /// Snapshot of the base vertices the layers were built from.
    pub base_positions: Vec<Vec3>,
    /// Detached unit normals of the base vertices.
    pub normals: Vec<Vec3>,
    pub offsets: Vec<f64>,
    pub layer_vertices: Vec<Vec<Vec3>>,
    pub signed_dists: Vec<Vec<f64>>,
    pub alphas: Vec<Vec<f64>>,
    /// Squashed per-base-vertex colors, shared across layers.
    pub colors: Vec<Vec3>,
    pub delta: f64,
}

impl LayerSet {
    /// An empty scene (no layers, no faces).
    pub fn empty() -> Self {
        LayerSet {
            faces: Vec::new(),
            base_positions: Vec::new(),
            normals: Vec::new(),
            offsets: Vec::new(),
            layer_vertices: Vec::new(),
            signed_dists: Vec::new(),
            alphas: Vec::new(),
            colors: Vec::new(),
            delta: 1.0,
        }
    }

    /// Builds layers from explicit parts. Offsets are clamped away from zero
    /// by `ε_d = 1e-3·δ`; signed distances are computed, alphas are left at 0
    /// until [`LayerSet::update_alphas`] runs.
    pub fn from_parts(
        faces: Vec<[u32; 3]>,
        base_positions: Vec<Vec3>,
        normals: Vec<Vec3>,
        raw_colors: &[Vec3],
        offsets: &[f64],
        delta: f64,
    ) -> Self {
        assert!(delta > 0.0);
        assert_eq!(base_positions.len(), normals.len());
        let eps = MIN_OFFSET_FRACTION * delta;
        let offsets: Vec<f64> = offsets.iter().map(|&d| clamp_offset(d, eps)).collect();
        let layer_vertices = offsets
            .iter()
            .map(|&d| {
                base_positions
                    .iter()
                    .zip(&normals)
                    .map(|(v, n)| v + n * d)
                    .collect()
            })
            .collect();
        let colors = if raw_colors.is_empty() {
            vec![Vec3::repeat(0.5); base_positions.len()]
        } else {
            raw_colors.iter().map(vertex_color).collect()
        };
        let mut layers = LayerSet {
            faces,
            alphas: vec![vec![0.0; base_positions.len()]; offsets.len()],
            signed_dists: Vec::new(),
            base_positions,
            normals,
            offsets,
            layer_vertices,
            colors,
            delta,
        };
        layers.signed_dists = signed_distance_forward(&layers);
        layers
    }

    /// Layers at the given offsets around `base`, normals from the base mesh.
    pub fn with_offsets(base: &Mesh, offsets: &[f64], delta: f64) -> Self {
        let normals = compute_vertex_normals(base).normals;
        LayerSet::from_parts(
            base.faces.clone(),
            base.vertices.clone(),
            normals,
            &base.colors,
            offsets,
            delta,
        )
    }

    pub fn num_layers(&self) -> usize {
        self.offsets.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.base_positions.len()
    }

    pub fn offset(&self, layer: usize, _vertex: usize) -> f64 {
        self.offsets[layer]
    }

    /// Recomputes alphas from the stored signed distances.
    pub fn update_alphas(&mut self, params: &AlphaParams) {
        self.alphas = self
            .signed_dists
            .iter()
            .map(|layer| layer.iter().map(|&s| sdf_to_alpha(s, params)).collect())
            .collect();
    }

    /// Total number of renderable triangles over all layers.
    pub fn num_triangles(&self) -> usize {
        self.faces.len() * self.num_layers()
    }
}

fn clamp_offset(d: f64, eps: f64) -> f64 {
    if d.abs() >= eps {
        d
    } else if d < 0.0 {
        -eps
    } else {
        eps
    }
}

/// One stratified draw per layer: layer `i` is uniform in
/// `[−δ + i·2δ/n, −δ + (i+1)·2δ/n]`, then clamped away from zero.
pub fn stratified_offsets<R: Rng + ?Sized>(n: usize, delta: f64, rng: &mut R) -> Vec<f64> {
    let width = 2.0 * delta / n as f64;
    let eps = MIN_OFFSET_FRACTION * delta;
    (0..n)
        .map(|i| {
            let lo = -delta + i as f64 * width;
            clamp_offset(lo + rng.gen::<f64>() * width, eps)
        })
        .collect()
}

/// Softens `base` into `n` layers with fresh stratified offsets.
pub fn sample_layers<R: Rng + ?Sized>(base: &Mesh, n: usize, delta: f64, rng: &mut R) -> LayerSet {
    assert!(n >= 1 && delta > 0.0);
    let offsets = stratified_offsets(n, delta, rng);
    LayerSet::with_offsets(base, &offsets, delta)
}

/// `s = sign(d)·‖v_layer − v_base‖` using the stored base snapshot.
pub fn signed_distance_forward(layers: &LayerSet) -> Vec<Vec<f64>> {
    signed_distances_from(layers, &layers.base_positions)
}

/// Signed distances of the (frozen) layer vertices to a different set of base
/// positions. This is the stop-gradient function the backward pass differentiates.
pub fn signed_distances_from(layers: &LayerSet, base_positions: &[Vec3]) -> Vec<Vec<f64>> {
    layers
        .layer_vertices
        .iter()
        .zip(&layers.offsets)
        .map(|(verts, &d)| {
            verts
                .iter()
                .zip(base_positions)
                .map(|(vl, vb)| d.signum() * (vl - vb).norm())
                .collect()
        })
        .collect()
}

/// Accumulates `dL/dv_base = Σ_layers dL/ds · ∂s/∂v_base` with
/// `∂s/∂v_base = −sign(d)·(v_layer − v_base)/‖v_layer − v_base‖` (which is `−n`).
pub fn signed_distance_backward(layers: &LayerSet, dl_ds: &[Vec<f64>]) -> Vec<Vec3> {
    let mut out = vec![Vec3::zeros(); layers.num_vertices()];
    for (l, (verts, &d)) in layers.layer_vertices.iter().zip(&layers.offsets).enumerate() {
        for (j, (vl, vb)) in verts.iter().zip(&layers.base_positions).enumerate() {
            let g = dl_ds[l][j];
            if g == 0.0 {
                continue;
            }
            let diff = vl - vb;
            let len = diff.norm();
            let dir = if len > 0.0 { diff / len } else { layers.normals[j] * d.signum() };
            out[j] -= dir * (d.signum() * g);
        }
    }
    out
}

/// Unclamped alpha from a signed distance.
pub fn sdf_to_alpha_raw(s: f64, params: &AlphaParams) -> f64 {
    let beta = params.beta();
    if s < 0.0 {
        (1.0 - 0.5 * (s / beta).exp()) / beta
    } else {
        0.5 * (-s / beta).exp() / beta
    }
}

pub fn sdf_to_alpha(s: f64, params: &AlphaParams) -> f64 {
    sdf_to_alpha_raw(s, params).clamp(0.0, ALPHA_MAX)
}

/// Returns `(dL/ds, dL/db)`; both vanish where the alpha is clamped.
pub fn sdf_to_alpha_backward(s: f64, params: &AlphaParams, dl_dalpha: f64) -> (f64, f64) {
    let beta = params.beta();
    let raw = sdf_to_alpha_raw(s, params);
    if raw > ALPHA_MAX || dl_dalpha == 0.0 {
        return (0.0, 0.0);
    }
    let (da_ds, da_dbeta) = if s < 0.0 {
        let e = (s / beta).exp();
        (
            -0.5 * e / (beta * beta),
            -1.0 / (beta * beta) + 0.5 * e * (1.0 + s / beta) / (beta * beta),
        )
    } else {
        (-raw / beta, raw * (s / beta - 1.0) / beta)
    };
    (dl_dalpha * da_ds, dl_dalpha * da_dbeta * params.dbeta_db())
}

/// Chains per-layer-vertex `dL/dα` to `dL/ds` (per layer vertex) and `dL/db`.
pub fn alpha_backward(
    layers: &LayerSet,
    params: &AlphaParams,
    dl_dalpha: &[Vec<f64>],
) -> (Vec<Vec<f64>>, f64) {
    let mut db = 0.0;
    let ds = layers
        .signed_dists
        .iter()
        .zip(dl_dalpha)
        .map(|(s_layer, g_layer)| {
            s_layer
                .iter()
                .zip(g_layer)
                .map(|(&s, &g)| {
                    let (ds, dbi) = sdf_to_alpha_backward(s, params, g);
                    db += dbi;
                    ds
                })
                .collect()
        })
        .collect();
    (ds, db)
}
