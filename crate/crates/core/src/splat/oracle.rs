//! Brute-force reference renderers.
//!
//! [`oracle_render`] shoots one exact ray per pixel against every layer
//! triangle, so it shares nothing with the tiled path except the culling
//! predicate and the compositing code. [`render_first_hit`] renders an opaque
//! mesh (ground-truth images and masks).

use rayon::prelude::*;

use super::composite::composite_pixel;
use super::raster::{bin_geometry, setup_triangle, sort_fragments};
use super::{shade, Fragment, RenderOutput, RenderSettings};
use crate::appearance::vertex_color;
use crate::geometry::{ray_triangle_intersect, Camera, Image, Mesh, Vec3};
use crate::soften::LayerSet;

/// Triangles that survive culling, as world-space vertex triples.
fn visible_triangles(layers: &LayerSet, camera: &Camera) -> Vec<(u32, u32, [Vec3; 3])> {
    let mut out = Vec::new();
    for (l, verts) in layers.layer_vertices.iter().enumerate() {
        for (fi, f) in layers.faces.iter().enumerate() {
            let tri = [verts[f[0] as usize], verts[f[1] as usize], verts[f[2] as usize]];
            let projected = tri.map(|p| {
                let (u, v, z) = camera.project(&p);
                [u, v, z]
            });
            if setup_triangle(camera, l as u32, fi as u32, [&tri[0], &tri[1], &tri[2]], projected).is_ok() {
                out.push((l as u32, fi as u32, tri));
            }
        }
    }
    out
}

fn pixel_ray(camera: &Camera, x: usize, y: usize) -> (Vec3, Vec3) {
    (
        camera.center(),
        camera.ray_direction(x as f64 + 0.5, y as f64 + 0.5),
    )
}

fn collect(
    layers: &LayerSet,
    camera: &Camera,
    tris: &[(u32, u32, [Vec3; 3])],
    x: usize,
    y: usize,
    max_fragments: usize,
) -> Vec<Fragment> {
    let (o, d) = pixel_ray(camera, x, y);
    let mut frags = Vec::new();
    for (layer, face, tri) in tris {
        if let Some((t, w)) = ray_triangle_intersect(&o, &d, tri) {
            let depth = camera.to_camera(&(o + d * t)).z;
            if depth > camera.near && depth < camera.far {
                frags.push(shade(layers, *layer, *face, w, depth));
            }
        }
    }
    sort_fragments(&mut frags);
    frags.truncate(max_fragments);
    frags
}

/// Sorted fragments of pixel `(x, y)` found by exhaustive ray casting.
pub fn oracle_fragments(
    layers: &LayerSet,
    camera: &Camera,
    x: usize,
    y: usize,
    settings: &RenderSettings,
) -> Vec<Fragment> {
    let tris = visible_triangles(layers, camera);
    collect(layers, camera, &tris, x, y, settings.max_fragments)
}

/// Exhaustive per-pixel renderer; O(pixels × triangles).
pub fn oracle_render(layers: &LayerSet, camera: &Camera, settings: &RenderSettings) -> RenderOutput {
    let tris = visible_triangles(layers, camera);
    let mut out = RenderOutput::blank(camera);
    let rows: Vec<Vec<(Vec3, f64, u32)>> = (0..camera.height)
        .into_par_iter()
        .map(|y| {
            (0..camera.width)
                .map(|x| {
                    let frags = collect(layers, camera, &tris, x, y, settings.max_fragments);
                    let c = composite_pixel(&frags, settings.early_stop);
                    (
                        c.color + settings.background * c.transmittance,
                        c.opacity,
                        frags.len() as u32,
                    )
                })
                .collect()
        })
        .collect();
    for (y, row) in rows.into_iter().enumerate() {
        for (x, (color, opacity, n)) in row.into_iter().enumerate() {
            out.color.pixel_mut(x, y).copy_from_slice(color.as_slice());
            out.opacity.pixel_mut(x, y)[0] = opacity;
            out.fragment_counts[y * camera.width + x] = n;
        }
    }
    out
}

/// Opaque render of a mesh: nearest-hit interpolated vertex color and a
/// binary coverage mask. Meshes without colors render mid-gray.
pub fn render_first_hit(mesh: &Mesh, camera: &Camera, tile_size: usize) -> (Image, Image) {
    let colors: Vec<Vec3> = if mesh.colors.is_empty() {
        vec![Vec3::repeat(0.5); mesh.vertices.len()]
    } else {
        mesh.colors.iter().map(vertex_color).collect()
    };
    let bins = bin_geometry(camera, std::slice::from_ref(&mesh.vertices), &mesh.faces, tile_size);
    let (o, w) = (camera.center(), camera.width);
    let pixels: Vec<Option<Vec3>> = (0..camera.pixel_count())
        .into_par_iter()
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let t = (y / tile_size) * bins.tiles_x + x / tile_size;
            let d = camera.ray_direction(x as f64 + 0.5, y as f64 + 0.5);
            let mut best: Option<(f64, u32, Vec3)> = None;
            for &si in bins.tile(t) {
                let s = &bins.setups[si as usize];
                let f = mesh.faces[s.face as usize];
                let tri = [
                    mesh.vertices[f[0] as usize],
                    mesh.vertices[f[1] as usize],
                    mesh.vertices[f[2] as usize],
                ];
                if let Some((t, bw)) = ray_triangle_intersect(&o, &d, &tri) {
                    let depth = camera.to_camera(&(o + d * t)).z;
                    if depth <= camera.near || depth >= camera.far {
                        continue;
                    }
                    let closer = match best {
                        None => true,
                        Some((bd, bf, _)) => depth < bd || (depth == bd && s.face < bf),
                    };
                    if closer {
                        let c = colors[f[0] as usize] * bw[0]
                            + colors[f[1] as usize] * bw[1]
                            + colors[f[2] as usize] * bw[2];
                        best = Some((depth, s.face, c));
                    }
                }
            }
            best.map(|b| b.2)
        })
        .collect();
    let mut color = Image::new(camera.width, camera.height, 3);
    let mut mask = Image::new(camera.width, camera.height, 1);
    for (p, c) in pixels.into_iter().enumerate() {
        if let Some(c) = c {
            let (x, y) = (p % w, p / w);
            color.pixel_mut(x, y).copy_from_slice(c.as_slice());
            mask.pixel_mut(x, y)[0] = 1.0;
        }
    }
    (color, mask)
}
