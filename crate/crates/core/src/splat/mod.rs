//! Tile-based differentiable splatting of softened mesh layers.
//!
//! Forward: project every layer triangle, bin it to the 16×16 tiles its screen
//! AABB overlaps, gather per-pixel fragments with depth-corrected barycentrics,
//! sort near to far and alpha-composite. Backward: analytic gradients of the
//! composite with respect to fragment alphas and colors, pushed through the
//! barycentric interpolation to per-layer-vertex alphas and per-base-vertex
//! colors, then through the alpha and signed-distance maps to base positions.
//! Screen-space coverage is not differentiated.

mod composite;
mod oracle;
pub mod raster;

use std::time::Instant;

use rayon::prelude::*;

pub use composite::{composite, composite_backward, Composite};
pub use oracle::{oracle_fragments, oracle_render, render_first_hit};
pub use raster::{bin_geometry, TileBins};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Image, Vec3};
use crate::soften::{alpha_backward, signed_distance_backward, AlphaParams, LayerSet};

/// Compositing stops once transmittance falls below this (unless disabled).
pub const TRANSMITTANCE_EPS: f64 = 1e-4;

/// Fixed partition used to reduce backward contributions; independent of the
/// worker count so gradients are bitwise reproducible.
const REDUCTION_CHUNKS: usize = 8;

/// One ray–triangle crossing for a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragment {
    pub layer: u32,
    pub face: u32,
    pub depth: f64,
    pub bary: [f64; 3],
    pub alpha: f64,
    pub color: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSettings {
    pub tile_size: usize,
    /// Per-pixel fragment cap; the nearest are kept.
    pub max_fragments: usize,
    /// Stop compositing when `T < TRANSMITTANCE_EPS`. Gradient checks turn it off.
    pub early_stop: bool,
    pub background: Vec3,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            tile_size: 16,
            max_fragments: 64,
            early_stop: true,
            background: Vec3::zeros(),
        }
    }
}

impl RenderSettings {
    /// Settings for finite-difference checks: no early termination.
    pub fn exact() -> Self {
        RenderSettings {
            early_stop: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub color: Image,
    pub opacity: Image,
    pub fragment_counts: Vec<u32>,
}

impl RenderOutput {
    fn blank(camera: &Camera) -> Self {
        RenderOutput {
            color: Image::new(camera.width, camera.height, 3),
            opacity: Image::new(camera.width, camera.height, 1),
            fragment_counts: vec![0; camera.pixel_count()],
        }
    }
}

/// Per-stage wall time in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RenderTimings {
    pub bin_us: u128,
    pub fragment_us: u128,
    pub composite_us: u128,
    pub backward_us: u128,
}

/// Sorted, capped fragments of one tile, pixel by pixel.
#[derive(Debug, Clone)]
struct TileFragments {
    rect: (usize, usize, usize, usize),
    offsets: Vec<usize>,
    frags: Vec<Fragment>,
}

impl TileFragments {
    fn pixel(&self, local: usize) -> &[Fragment] {
        &self.frags[self.offsets[local]..self.offsets[local + 1]]
    }
}

/// Forward state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardState {
    tiles: Vec<TileFragments>,
    early_stop: bool,
    background: Vec3,
    width: usize,
    height: usize,
}

impl ForwardState {
    /// Fragments of pixel `(x, y)` in compositing order.
    pub fn pixel_fragments(&self, x: usize, y: usize, tile_size: usize) -> &[Fragment] {
        let tiles_x = self.width.div_ceil(tile_size);
        let t = (y / tile_size) * tiles_x + x / tile_size;
        let tile = &self.tiles[t];
        let (x0, y0, x1, _) = tile.rect;
        tile.pixel((y - y0) * (x1 - x0) + (x - x0))
    }

    pub fn total_fragments(&self) -> usize {
        self.tiles.iter().map(|t| t.frags.len()).sum()
    }
}

/// Bins all layer triangles into screen tiles.
pub fn bin_triangles(layers: &LayerSet, camera: &Camera, tile: usize) -> TileBins {
    bin_geometry(camera, &layers.layer_vertices, &layers.faces, tile)
}

/// Interpolates alpha and color of a fragment from its triangle's vertices.
#[inline]
pub(crate) fn shade(layers: &LayerSet, layer: u32, face: u32, bary: [f64; 3], depth: f64) -> Fragment {
    let f = layers.faces[face as usize];
    let alphas = &layers.alphas[layer as usize];
    let mut alpha = 0.0;
    let mut color = Vec3::zeros();
    for k in 0..3 {
        alpha += bary[k] * alphas[f[k] as usize];
        color += layers.colors[f[k] as usize] * bary[k];
    }
    Fragment {
        layer,
        face,
        depth,
        bary,
        alpha,
        color,
    }
}

/// Fragments for pixel `(x, y)` from the triangles binned to its tile, sorted
/// near to far and capped.
pub fn make_fragments(
    bins: &TileBins,
    layers: &LayerSet,
    camera: &Camera,
    x: usize,
    y: usize,
    max_fragments: usize,
) -> Vec<Fragment> {
    let t = (y / bins.tile_size) * bins.tiles_x + x / bins.tile_size;
    let mut out = Vec::new();
    for &si in bins.tile(t) {
        let s = &bins.setups[si as usize];
        if x < s.x0 || x > s.x1 || y < s.y0 || y > s.y1 {
            continue;
        }
        if let Some((w, z)) = s.sample(x, y) {
            if z < camera.far {
                out.push(shade(layers, s.layer, s.face, w, z));
            }
        }
    }
    raster::sort_fragments(&mut out);
    out.truncate(max_fragments);
    out
}

fn tile_fragments(
    bins: &TileBins,
    layers: &LayerSet,
    camera: &Camera,
    t: usize,
    max_fragments: usize,
) -> TileFragments {
    let rect = bins.tile_rect(t, camera.width, camera.height);
    let (x0, y0, x1, y1) = rect;
    let tw = x1 - x0;
    let mut per_pixel: Vec<Vec<Fragment>> = vec![Vec::new(); tw * (y1 - y0)];
    for &si in bins.tile(t) {
        let s = &bins.setups[si as usize];
        for y in s.y0.max(y0)..=s.y1.min(y1 - 1) {
            for x in s.x0.max(x0)..=s.x1.min(x1 - 1) {
                if let Some((w, z)) = s.sample(x, y) {
                    if z < camera.far {
                        per_pixel[(y - y0) * tw + (x - x0)].push(shade(layers, s.layer, s.face, w, z));
                    }
                }
            }
        }
    }
    let mut offsets = Vec::with_capacity(per_pixel.len() + 1);
    let mut frags = Vec::new();
    offsets.push(0);
    for mut list in per_pixel {
        raster::sort_fragments(&mut list);
        list.truncate(max_fragments);
        frags.extend_from_slice(&list);
        offsets.push(frags.len());
    }
    TileFragments {
        rect,
        offsets,
        frags,
    }
}

/// Forward render.
pub fn render(layers: &LayerSet, camera: &Camera, settings: &RenderSettings) -> RenderOutput {
    render_with_state(layers, camera, settings).0
}

/// Forward render that also returns the fragment state for
/// [`render_backward`] and per-stage timings.
pub fn render_with_state(
    layers: &LayerSet,
    camera: &Camera,
    settings: &RenderSettings,
) -> (RenderOutput, ForwardState, RenderTimings) {
    let mut timings = RenderTimings::default();
    let start = Instant::now();
    let bins = bin_triangles(layers, camera, settings.tile_size);
    timings.bin_us = start.elapsed().as_micros();

    let start = Instant::now();
    let tiles: Vec<TileFragments> = (0..bins.num_tiles())
        .into_par_iter()
        .map(|t| tile_fragments(&bins, layers, camera, t, settings.max_fragments))
        .collect();
    timings.fragment_us = start.elapsed().as_micros();

    let start = Instant::now();
    let mut out = RenderOutput::blank(camera);
    for tile in &tiles {
        let (x0, y0, x1, y1) = tile.rect;
        let tw = x1 - x0;
        for y in y0..y1 {
            for x in x0..x1 {
                let frags = tile.pixel((y - y0) * tw + (x - x0));
                let c = composite::composite_pixel(frags, settings.early_stop);
                let color = c.color + settings.background * c.transmittance;
                out.color.pixel_mut(x, y).copy_from_slice(color.as_slice());
                out.opacity.pixel_mut(x, y)[0] = c.opacity;
                out.fragment_counts[y * camera.width + x] = frags.len() as u32;
            }
        }
    }
    timings.composite_us = start.elapsed().as_micros();
    let state = ForwardState {
        tiles,
        early_stop: settings.early_stop,
        background: settings.background,
        width: camera.width,
        height: camera.height,
    };
    (out, state, timings)
}

/// Gradients of the per-layer-vertex alphas and per-base-vertex squashed colors.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub d_alpha: Vec<Vec<f64>>,
    pub d_color: Vec<Vec3>,
}

/// Accumulators mirroring every optimizable array.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientBuffer {
    /// Per base vertex.
    pub d_positions: Vec<Vec3>,
    /// Per base vertex, with respect to the raw (pre-squash) colors.
    pub d_colors: Vec<Vec3>,
    /// With respect to the unconstrained sharpness parameter `b`.
    pub d_beta: f64,
    /// Per grid vertex (marching-tetrahedra stage only).
    pub d_sdf: Vec<f64>,
    /// Per grid vertex raw colors (marching-tetrahedra stage only).
    pub d_grid_colors: Vec<Vec3>,
}

impl GradientBuffer {
    pub fn zeros(num_vertices: usize) -> Self {
        GradientBuffer {
            d_positions: vec![Vec3::zeros(); num_vertices],
            d_colors: vec![Vec3::zeros(); num_vertices],
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_beta.is_finite()
            && self.d_positions.iter().all(|v| v.iter().all(|c| c.is_finite()))
            && self.d_colors.iter().all(|v| v.iter().all(|c| c.is_finite()))
            && self.d_sdf.iter().all(|c| c.is_finite())
            && self.d_grid_colors.iter().all(|v| v.iter().all(|c| c.is_finite()))
    }
}

/// Backward through compositing and barycentric interpolation.
///
/// `d_color` holds `dL/dC` (3 per pixel) and `d_opacity` holds `dL/dO`
/// (1 per pixel, may be empty).
pub fn backward_layers(
    layers: &LayerSet,
    state: &ForwardState,
    d_color: &[f64],
    d_opacity: &[f64],
) -> Result<LayerGradients> {
    let (w, h) = (state.width, state.height);
    if d_color.len() != w * h * 3 || !(d_opacity.is_empty() || d_opacity.len() == w * h) {
        return Err(Error::Dimension(format!(
            "upstream gradients do not match a {w}x{h} image"
        )));
    }
    for i in 0..w * h {
        let bad = d_color[3 * i..3 * i + 3].iter().any(|v| !v.is_finite())
            || d_opacity.get(i).is_some_and(|v| !v.is_finite());
        if bad {
            return Err(Error::NonFiniteUpstream { x: i % w, y: i / w });
        }
    }

    let n_layers = layers.num_layers();
    let nv = layers.num_vertices();
    let n_tiles = state.tiles.len();
    let chunk_len = n_tiles.div_ceil(REDUCTION_CHUNKS).max(1);
    let partials: Vec<LayerGradients> = state
        .tiles
        .par_chunks(chunk_len)
        .map(|tiles| {
            let mut acc = LayerGradients {
                d_alpha: vec![vec![0.0; nv]; n_layers],
                d_color: vec![Vec3::zeros(); nv],
            };
            let mut scratch = Vec::new();
            for tile in tiles {
                let (x0, y0, x1, y1) = tile.rect;
                let tw = x1 - x0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        let frags = tile.pixel((y - y0) * tw + (x - x0));
                        if frags.is_empty() {
                            continue;
                        }
                        let p = y * w + x;
                        let g = Vec3::new(d_color[3 * p], d_color[3 * p + 1], d_color[3 * p + 2]);
                        let go = d_opacity.get(p).copied().unwrap_or(0.0);
                        composite::composite_backward_into(
                            frags,
                            state.early_stop,
                            &g,
                            go,
                            &state.background,
                            &mut scratch,
                        );
                        for (frag, (da, dc)) in frags.iter().zip(&scratch) {
                            let f = layers.faces[frag.face as usize];
                            let da_layer = &mut acc.d_alpha[frag.layer as usize];
                            for k in 0..3 {
                                let vi = f[k] as usize;
                                da_layer[vi] += frag.bary[k] * da;
                                acc.d_color[vi] += dc * frag.bary[k];
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut total = LayerGradients {
        d_alpha: vec![vec![0.0; nv]; n_layers],
        d_color: vec![Vec3::zeros(); nv],
    };
    for part in partials {
        for (t, p) in total.d_alpha.iter_mut().zip(&part.d_alpha) {
            for (a, b) in t.iter_mut().zip(p) {
                *a += b;
            }
        }
        for (a, b) in total.d_color.iter_mut().zip(&part.d_color) {
            *a += b;
        }
    }
    Ok(total)
}

/// Chains layer gradients to base positions, raw colors and `b`.
pub fn chain_to_base(layers: &LayerSet, params: &AlphaParams, grads: &LayerGradients) -> GradientBuffer {
    let (ds, d_beta) = alpha_backward(layers, params, &grads.d_alpha);
    let d_positions = signed_distance_backward(layers, &ds);
    let d_colors = grads
        .d_color
        .iter()
        .zip(&layers.colors)
        .map(|(g, c)| g.component_mul(&c.map(|c| c * (1.0 - c))))
        .collect();
    GradientBuffer {
        d_positions,
        d_colors,
        d_beta,
        d_sdf: Vec::new(),
        d_grid_colors: Vec::new(),
    }
}

/// Full backward: image-space gradients to base positions, raw colors and `b`.
pub fn render_backward(
    layers: &LayerSet,
    params: &AlphaParams,
    state: &ForwardState,
    d_color: &[f64],
    d_opacity: &[f64],
) -> Result<GradientBuffer> {
    let lg = backward_layers(layers, state, d_color, d_opacity)?;
    Ok(chain_to_base(layers, params, &lg))
}
