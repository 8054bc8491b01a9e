use super::*;
use crate::harness::{make_dataset, Shape};
use crate::splat::render;

fn small_config(total: usize, dmtet: usize) -> TrainConfig {
    TrainConfig {
        iters_total: total,
        iters_dmtet: dmtet,
        dmtet_resolution: 12,
        target_edge: 0.15,
        layers: 3,
        delta: 0.05,
        wallclock: false,
        ..Default::default()
    }
}

fn views() -> Vec<View> {
    make_dataset(Shape::Sphere, 4, 32, 0).unwrap().views
}

#[test]
fn schedule_boundary_returns_last_extraction() {
    let views = views();
    let cfg = small_config(4, 4);
    let mut trainer = Trainer::new(&views, cfg, None).unwrap();
    trainer.run().unwrap();
    let (extracted, _) = dmtet::marching_tets(trainer.grid().unwrap());
    assert_eq!(trainer.mesh(), &extracted);
    assert!(trainer.quality.is_empty(), "no remeshing may run");
}

#[test]
fn identical_runs_are_bit_identical() {
    let views = views();
    let cfg = small_config(8, 4);
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = train_loop(&views, &cfg, Some(dir_a.path())).unwrap();
    let b = train_loop(&views, &cfg, Some(dir_b.path())).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.mesh, b.mesh);
    for file in ["metrics.csv", "quality.csv", "final.obj"] {
        let x = std::fs::read(dir_a.path().join(file)).unwrap();
        let y = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
    let csv = std::fs::read_to_string(dir_a.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), MetricsRow::CSV_HEADER);
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn each_stage_updates_only_its_parameters() {
    let views = views();
    let mut trainer = Trainer::new(&views, small_config(6, 3), None).unwrap();
    for t in 1..=6 {
        trainer.step().unwrap();
        let g = &trainer.last_gradients;
        if t <= 3 {
            assert!(g.d_positions.iter().all(|d| *d == Vec3::zeros()));
            assert!(g.d_sdf.iter().any(|d| *d != 0.0));
        } else {
            assert!(g.d_sdf.iter().all(|d| *d == 0.0));
            assert!(g.d_positions.iter().any(|d| *d != Vec3::zeros()));
        }
        assert_eq!(trainer.in_grid_stage(), t < 3);
    }
}

#[test]
fn stage_transition_preserves_the_frame() {
    let views = views();
    let mut trainer = Trainer::new(&views, small_config(5, 3), None).unwrap();
    for _ in 0..3 {
        trainer.step().unwrap();
    }
    let grid = trainer.grid().unwrap();
    let (mut extracted, map) = dmtet::marching_tets(grid);
    extracted.colors = dmtet::interpolate_colors(grid, &map, &extracted.vertices);
    let frozen = trainer.mesh();
    let offsets = [-0.03, 0.0005, 0.04];
    let params = trainer.alpha_params();
    let frame = |m: &Mesh| {
        let mut layers = crate::soften::LayerSet::with_offsets(m, &offsets, 0.05);
        layers.update_alphas(&params);
        render(&layers, &views[0].camera, &RenderSettings::default())
    };
    let (a, b) = (frame(&extracted), frame(frozen));
    for (x, y) in a.color.data.iter().zip(&b.color.data) {
        assert!((x - y).abs() < 1e-6);
    }
    for (x, y) in a.opacity.data.iter().zip(&b.opacity.data) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn sphere_run_reduces_loss() {
    let views = views();
    let cfg = small_config(60, 40);
    let out = train_loop(&views, &cfg, None).unwrap();
    let mean = |r: &[MetricsRow]| r.iter().map(|m| m.loss.total).sum::<f64>() / r.len() as f64;
    let (first, last) = (mean(&out.metrics[..10]), mean(&out.metrics[50..]));
    assert!(last < first, "{first} -> {last}");
    assert!(out.mesh.vertices.len() > 0);
}

#[test]
fn non_finite_loss_aborts_with_checkpoint() {
    let mut views = views();
    views[0].image.data[0] = f64::NAN;
    views[1].image.data[0] = f64::NAN;
    views[2].image.data[0] = f64::NAN;
    views[3].image.data[0] = f64::NAN;
    let dir = tempfile::tempdir().unwrap();
    let err = train_loop(&views, &small_config(4, 2), Some(dir.path())).unwrap_err();
    assert!(matches!(err, Error::Diverged { iteration: 1, .. }), "{err}");
    assert!(dir.path().join("diverged.obj").exists());
}

#[test]
fn inverted_surface_aborts_with_checkpoint() {
    let views = views();
    let dir = tempfile::tempdir().unwrap();
    let mut trainer = Trainer::new(&views, small_config(6, 2), Some(dir.path())).unwrap();
    trainer.step().unwrap();
    trainer.step().unwrap();
    assert!(!trainer.in_grid_stage());
    if let Stage::Surface { mesh, .. } = &mut trainer.stage {
        mesh.faces.iter_mut().for_each(|f| f.swap(1, 2));
    }
    let err = trainer.step().unwrap_err();
    assert!(matches!(err, Error::Diverged { iteration: 3, .. }), "{err}");
    assert!(dir.path().join("diverged.obj").exists());
}

#[test]
fn invalid_inputs_are_rejected() {
    let views = views();
    assert!(matches!(
        Trainer::new(&views[..1], small_config(4, 2), None),
        Err(Error::Empty(_))
    ));
    let mut bad = views.clone();
    bad[1].mask = Image::new(8, 8, 1);
    assert!(matches!(Trainer::new(&bad, small_config(4, 2), None), Err(Error::Dimension(_))));
}
