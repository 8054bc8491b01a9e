//! Analytic test meshes, all closed and outward-oriented.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::appearance::logit;
use crate::geometry::{Mesh, Vec3};

/// Subdivided icosahedron projected onto the sphere of radius `r`.
pub fn icosphere(r: f64, subdivisions: usize) -> Mesh {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, p, 0.0),
        (1.0, p, 0.0),
        (-1.0, -p, 0.0),
        (1.0, -p, 0.0),
        (0.0, -1.0, p),
        (0.0, 1.0, p),
        (0.0, -1.0, -p),
        (0.0, 1.0, -p),
        (p, 0.0, -1.0),
        (p, 0.0, 1.0),
        (-p, 0.0, -1.0),
        (-p, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts.into_iter().map(|v| v * r).collect();
    Mesh::new(vertices, faces, vec![]).expect("icosphere is valid")
}

/// Torus around the z axis with major radius `major`, tube radius `minor`,
/// `nu` segments around the axis and `nv` around the tube.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> Mesh {
    assert!(nu >= 3 && nv >= 3);
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let ring = major + minor * v.cos();
            vertices.push(Vec3::new(ring * u.cos(), ring * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + j % nv) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Mesh::new(vertices, faces, vec![]).expect("torus is valid")
}

/// Axis-aligned cube centered at the origin, each face split into
/// `subdivisions²` quads (two triangles each).
pub fn cube(side: f64, subdivisions: usize) -> Mesh {
    let n = subdivisions.max(1);
    let h = side / 2.0;
    let mut index: HashMap<(usize, usize, usize), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vid = |p: (usize, usize, usize), vertices: &mut Vec<Vec3>| {
        *index.entry(p).or_insert_with(|| {
            let c = |k: usize| -h + side * k as f64 / n as f64;
            vertices.push(Vec3::new(c(p.0), c(p.1), c(p.2)));
            (vertices.len() - 1) as u32
        })
    };
    let mut faces = Vec::new();
    // each side: fixed axis `ax` at 0 or n; (u, v) span the other two axes so
    // that u × v points along +ax, flipped on the low side
    for ax in 0..3 {
        let (ua, va) = ((ax + 1) % 3, (ax + 2) % 3);
        for high in [false, true] {
            for i in 0..n {
                for j in 0..n {
                    let point = |di: usize, dj: usize| {
                        let mut p = [0usize; 3];
                        p[ax] = if high { n } else { 0 };
                        p[ua] = i + di;
                        p[va] = j + dj;
                        (p[0], p[1], p[2])
                    };
                    let a = vid(point(0, 0), &mut vertices);
                    let b = vid(point(1, 0), &mut vertices);
                    let c = vid(point(1, 1), &mut vertices);
                    let d = vid(point(0, 1), &mut vertices);
                    if high {
                        faces.push([a, b, c]);
                        faces.push([a, c, d]);
                    } else {
                        faces.push([a, c, b]);
                        faces.push([a, d, c]);
                    }
                }
            }
        }
    }
    Mesh::new(vertices, faces, vec![]).expect("cube is valid")
}

/// Sphere with smooth low-frequency radial noise:
/// `r(u) = radius · (1 + amp · Σ_k w_k sin(f_k ⟨u, a_k⟩ + φ_k))` with unit
/// directions `a_k`, frequencies in `[1, 2.5]` and weights summing to one.
pub fn blob(radius: f64, subdivisions: usize, seed: u64, amp: f64) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(Vec3, f64, f64, f64)> = (0..4)
        .map(|_| {
            let a = loop {
                let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let n = v.norm();
                if n > 0.1 && n <= 1.0 {
                    break v / n;
                }
            };
            (a, rng.gen_range(1.0..2.5), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.5..1.0))
        })
        .collect();
    let wsum: f64 = terms.iter().map(|t| t.3).sum();
    let mut mesh = icosphere(1.0, subdivisions);
    for v in mesh.vertices.iter_mut() {
        let u = *v;
        let noise: f64 = terms.iter().map(|(a, f, phi, w)| w * (f * u.dot(a) + phi).sin()).sum::<f64>() / wsum;
        *v = u * radius * (1.0 + amp * noise);
    }
    mesh
}

/// Fixed smooth color pattern in `[0.15, 0.85]`, returned as raw (pre-squash) values.
pub fn procedural_colors(mesh: &Mesh) -> Vec<Vec3> {
    mesh.vertices
        .iter()
        .map(|p| {
            let c = Vec3::new(
                0.5 + 0.35 * (3.0 * p.x + 1.0).sin(),
                0.5 + 0.35 * (3.0 * p.y + 2.0).sin(),
                0.5 + 0.35 * (3.0 * p.z + 3.0).sin(),
            );
            c.map(logit)
        })
        .collect()
}
