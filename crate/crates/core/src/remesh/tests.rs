use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::harness::shapes;

/// Equilateral triangle lattice (parallelogram patch) with edge `l`.
fn flat_patch(n: usize, l: f64) -> Mesh {
    let idx = |i: usize, j: usize| (i + n * j) as u32;
    let mut vertices = Vec::new();
    for j in 0..n {
        for i in 0..n {
            vertices.push(Vec3::new((i as f64 + 0.5 * j as f64) * l, j as f64 * l * 3f64.sqrt() / 2.0, 0.0));
        }
    }
    let mut faces = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            faces.push([idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
            faces.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Mesh::new(vertices, faces, vec![]).unwrap()
}

fn perturbed_icosphere(seed: u64) -> Mesh {
    let mut mesh = shapes::icosphere(1.0, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in mesh.vertices.iter_mut() {
        *v *= 1.0 + rng.gen_range(-0.02..0.02);
    }
    mesh
}

#[test]
fn equilateral_patch_is_a_fixed_point() {
    let mesh = flat_patch(8, 0.1);
    let (out, stats) = remesh_step(&mesh, &mut [], &RemeshConfig::new(0.1)).unwrap();
    assert_eq!(stats.topology_ops(), 0, "{stats:?}");
    assert_eq!(out.faces, mesh.faces);
    for (a, b) in out.vertices.iter().zip(&mesh.vertices) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn single_long_edge_is_split_once() {
    let l = 0.1;
    let mesh = Mesh::new(
        vec![
            Vec3::zeros(),
            Vec3::new(2.0 * l, 0.0, 0.0),
            Vec3::new(l, 0.85 * l, 0.0),
            Vec3::new(l, -0.85 * l, 0.0),
        ],
        vec![[0, 1, 2], [1, 0, 3]],
        vec![],
    )
    .unwrap();
    let mut attr: Vec<Vec3> = mesh.vertices.clone();
    let (out, stats) = remesh_step(&mesh, &mut [&mut attr], &RemeshConfig::new(l)).unwrap();
    assert_eq!(stats.splits, 1);
    assert_eq!(stats.collapses + stats.flips, 0);
    assert_eq!(out.vertices.len(), 5);
    assert_eq!(out.faces.len(), 4);
    let q = mesh_quality_report(&out);
    assert!(q.max_edge <= 4.0 / 3.0 * l + 1e-12);
    // the new vertex's attribute is the endpoint average
    assert_eq!(attr.len(), 5);
    assert!((attr[4] - Vec3::new(l, 0.0, 0.0)).norm() < 1e-15);
    check_manifold(&out).unwrap();
}

#[test]
fn short_edge_collapses_and_merges_attributes() {
    let mut mesh = shapes::icosphere(1.0, 2);
    // pull one vertex toward a neighbor to create a short edge
    let (a, b) = (mesh.faces[0][0] as usize, mesh.faces[0][1] as usize);
    mesh.vertices[b] = mesh.vertices[a] + (mesh.vertices[b] - mesh.vertices[a]) * 0.1;
    let target = mesh_quality_report(&mesh).mean_edge;
    let mut cfg = RemeshConfig::new(target);
    cfg.smooth_lambda = 0.0;
    cfg.split_factor = 10.0;
    let mut counter: Vec<Vec3> = vec![Vec3::repeat(1.0); mesh.vertices.len()];
    let (out, stats) = remesh_step(&mesh, &mut [&mut counter], &cfg).unwrap();
    assert!(stats.collapses >= 1);
    assert_eq!(counter.len(), out.vertices.len());
    assert_eq!(out.euler_characteristic(), 2);
    check_manifold(&out).unwrap();
}

#[test]
fn icosphere_converges_to_target_length() {
    let mut mesh = perturbed_icosphere(21);
    let lt = 0.1;
    let cfg = RemeshConfig::new(lt);
    let mut attr: Vec<Vec3> = vec![Vec3::zeros(); mesh.vertices.len()];
    for call in 0..50 {
        let before = mesh.signed_volume();
        let (next, _) = remesh_step(&mesh, &mut [&mut attr], &cfg).unwrap();
        mesh = next;
        assert_eq!(attr.len(), mesh.vertices.len());
        let drift = (mesh.signed_volume() - before).abs() / before;
        assert!(drift < 0.01, "call {call}: volume drift {drift}");
    }
    check_manifold(&mesh).unwrap();
    let q = mesh_quality_report(&mesh);
    assert!(q.is_closed());
    assert_eq!(q.euler, 2);
    let edges = mesh.edges();
    let within = edges
        .iter()
        .filter(|&&(a, b)| {
            let l = (mesh.vertices[a as usize] - mesh.vertices[b as usize]).norm();
            (0.5 * lt..=1.5 * lt).contains(&l)
        })
        .count();
    assert!(within as f64 >= 0.9 * edges.len() as f64, "{within}/{}", edges.len());
    assert!((5.8..=6.2).contains(&q.mean_valence), "mean valence {}", q.mean_valence);
    assert!(q.min_quality > 0.3, "min quality {}", q.min_quality);

    // a further call barely changes anything
    let (_, stats) = remesh_step(&mesh, &mut [&mut attr], &cfg).unwrap();
    assert!((stats.topology_ops() as f64) < 0.01 * edges.len() as f64, "{stats:?}");
}

#[test]
fn smoothing_alone_preserves_volume() {
    let mesh = perturbed_icosphere(3);
    let mut cfg = RemeshConfig::new(mesh_quality_report(&mesh).mean_edge);
    cfg.split_factor = 100.0;
    cfg.collapse_factor = 1e-6;
    cfg.smooth_lambda = 1.0;
    let (out, stats) = remesh_step(&mesh, &mut [], &cfg).unwrap();
    let drift = (out.signed_volume() - mesh.signed_volume()).abs() / mesh.signed_volume();
    assert!(drift < 0.01, "{drift} {stats:?}");
}

#[test]
fn non_manifold_input_is_rejected() {
    // three faces on one edge
    let mesh = Mesh::new(
        vec![
            Vec3::zeros(),
            Vec3::x(),
            Vec3::y(),
            Vec3::z(),
            Vec3::new(0.0, -1.0, 0.0),
        ],
        vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        vec![],
    )
    .unwrap();
    assert!(matches!(
        remesh_step(&mesh, &mut [], &RemeshConfig::new(0.5)),
        Err(Error::Structural(_))
    ));
    // two cones touching at a vertex
    let bowtie = Mesh::new(
        vec![Vec3::zeros(), Vec3::x(), Vec3::y(), -Vec3::x(), -Vec3::y()],
        vec![[0, 1, 2], [0, 3, 4]],
        vec![],
    )
    .unwrap();
    assert!(check_manifold(&bowtie).is_err());
    let mut short = vec![Vec3::zeros(); 2];
    assert!(matches!(
        remesh_step(&flat_patch(3, 1.0), &mut [&mut short], &RemeshConfig::new(1.0)),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn regular_tetrahedron_report() {
    let s = 1.0 / 2f64.sqrt();
    let mesh = Mesh::new(
        vec![
            Vec3::new(1.0, 0.0, -s),
            Vec3::new(-1.0, 0.0, -s),
            Vec3::new(0.0, 1.0, s),
            Vec3::new(0.0, -1.0, s),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        vec![],
    )
    .unwrap();
    let q = mesh_quality_report(&mesh);
    assert_eq!((q.vertices, q.edges, q.faces, q.euler), (4, 6, 4, 2));
    assert!((q.min_quality - 1.0).abs() < 1e-12 && (q.mean_quality - 1.0).abs() < 1e-12);
    assert!(q.is_closed());
    assert!(MeshQuality::CSV_HEADER.split(',').count() == q.csv_row(0).split(',').count());
}

#[test]
fn torus_report_has_zero_euler() {
    let q = mesh_quality_report(&shapes::torus(1.0, 0.3, 24, 12));
    assert_eq!(q.euler, 0);
    assert!(q.is_closed());
}

#[test]
fn degenerate_triangle_quality_is_zero() {
    let q = triangle_quality(&Vec3::zeros(), &Vec3::x(), &(Vec3::x() * 2.0));
    assert!(q.abs() < 1e-12);
}

