//! Synthetic datasets, Chamfer evaluation and ablation drivers.

mod chamfer;
pub mod shapes;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

pub use chamfer::{chamfer, sample_surface, sample_surface_with_faces, PointGrid};

use crate::error::{Error, Result};
use crate::geometry::{read_cameras, write_cameras};
use crate::geometry::obj::{load_obj, save_obj};
use crate::geometry::{Camera, Image, Mesh, Vec3};
use crate::splat::render_first_hit;
use crate::train::{TrainConfig, Trainer, View};

/// Ground-truth surface samples per dataset (and per evaluated mesh).
pub const GT_POINTS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Sphere,
    Torus,
    Cube,
    Blob,
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Shape::Sphere),
            "torus" => Ok(Shape::Torus),
            "cube" => Ok(Shape::Cube),
            "blob" => Ok(Shape::Blob),
            other => Err(Error::Config(format!(
                "unknown shape `{other}` (expected sphere, torus, cube or blob)"
            ))),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Sphere => "sphere",
            Shape::Torus => "torus",
            Shape::Cube => "cube",
            Shape::Blob => "blob",
        })
    }
}

/// Ground-truth mesh of `shape`, sized to fit well inside the default grid box.
/// Only the blob depends on the seed.
pub fn gt_mesh(shape: Shape, seed: u64) -> Mesh {
    let mut mesh = match shape {
        Shape::Sphere => shapes::icosphere(0.7, 5),
        Shape::Torus => shapes::torus(0.55, 0.22, 96, 48),
        Shape::Cube => shapes::cube(1.0, 16),
        Shape::Blob => shapes::blob(0.7, 5, seed, 0.15),
    };
    mesh.colors = shapes::procedural_colors(&mesh);
    mesh
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub shape: Shape,
    pub n_views: usize,
    pub resolution: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub views: Vec<View>,
    pub gt_mesh: Mesh,
    pub gt_points: Vec<Vec3>,
}

impl Dataset {
    /// Diagonal of the ground-truth bounding box.
    pub fn scale(&self) -> f64 {
        self.gt_mesh.bbox().map(|(lo, hi)| (hi - lo).norm()).unwrap_or(0.0)
    }

    pub fn cameras(&self) -> Vec<Camera> {
        self.views.iter().map(|v| v.camera.clone()).collect()
    }
}

/// `n` directions on a Fibonacci spiral over the sphere.
pub fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), y, r * phi.sin())
        })
        .collect()
}

/// Cameras on a Fibonacci orbit at 2.5× the object radius, looking at the
/// vertex centroid, with focal length equal to the resolution.
pub fn orbit_cameras(mesh: &Mesh, n: usize, resolution: usize) -> Result<Vec<Camera>> {
    if mesh.vertices.is_empty() {
        return Err(Error::Empty("cannot place cameras around an empty mesh".into()));
    }
    let centroid = mesh.vertices.iter().sum::<Vec3>() / mesh.vertices.len() as f64;
    let radius = mesh.vertices.iter().map(|v| (v - centroid).norm()).fold(0.0, f64::max);
    let dist = 2.5 * radius;
    fibonacci_directions(n)
        .into_iter()
        .map(|d| {
            let up = if d.y.abs() > 0.99 { Vec3::z() } else { Vec3::y() };
            Camera::look_at(
                centroid + d * dist,
                centroid,
                up,
                resolution as f64,
                resolution,
                resolution,
                0.05 * radius,
                10.0 * dist,
            )
        })
        .collect()
}

/// Renders ground truth for `shape` from `n_views` orbit cameras. Images are
/// quantized to 8 bits so the in-memory dataset equals its on-disk form.
pub fn make_dataset(shape: Shape, n_views: usize, resolution: usize, seed: u64) -> Result<Dataset> {
    if n_views < 2 {
        return Err(Error::Config(format!("a dataset needs at least 2 views, got {n_views}")));
    }
    if resolution == 0 {
        return Err(Error::Config("resolution must be positive".into()));
    }
    let gt = gt_mesh(shape, seed);
    let cameras = orbit_cameras(&gt, n_views, resolution)?;
    let views = cameras
        .into_par_iter()
        .map(|camera| {
            let (image, mask) = render_first_hit(&gt, &camera, 16);
            View {
                image: image.quantized(),
                mask,
                camera,
            }
        })
        .collect();
    let gt_points = sample_surface(&gt, GT_POINTS, seed)?;
    Ok(Dataset {
        meta: DatasetMeta {
            shape,
            n_views,
            resolution,
            seed,
        },
        views,
        gt_mesh: gt,
        gt_points,
    })
}

/// Writes `cameras.txt`, `view_%03d.ppm`, `mask_%03d.ppm`, `gt.obj` and `meta.txt`.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    write_cameras(&dir.join("cameras.txt"), &ds.cameras())?;
    for (i, v) in ds.views.iter().enumerate() {
        v.image.write_ppm(&dir.join(format!("view_{i:03}.ppm")))?;
        v.mask.write_ppm(&dir.join(format!("mask_{i:03}.ppm")))?;
    }
    save_obj(&ds.gt_mesh, &dir.join("gt.obj"))?;
    let meta = format!(
        "shape = {}\nviews = {}\nresolution = {}\nseed = {}\nscale = {}\n",
        ds.meta.shape,
        ds.meta.n_views,
        ds.meta.resolution,
        ds.meta.seed,
        ds.scale()
    );
    let path = dir.join("meta.txt");
    std::fs::write(&path, meta).map_err(|e| Error::file(&path, e))
}

fn parse_meta(text: &str) -> Result<DatasetMeta> {
    let mut shape = None;
    let (mut views, mut res, mut seed) = (None, None, None);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse { line: i + 1, message: m };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, found `{line}`")))?;
        let v = v.trim();
        let num = || v.parse::<u64>().map_err(|_| bad(format!("invalid number `{v}`")));
        match k.trim() {
            "shape" => shape = Some(v.parse::<Shape>()?),
            "views" => views = Some(num()? as usize),
            "resolution" => res = Some(num()? as usize),
            "seed" => seed = Some(num()?),
            _ => {}
        }
    }
    match (shape, views, res, seed) {
        (Some(shape), Some(n_views), Some(resolution), Some(seed)) => Ok(DatasetMeta {
            shape,
            n_views,
            resolution,
            seed,
        }),
        _ => Err(Error::Parse {
            line: 0,
            message: "meta.txt needs shape, views, resolution and seed".into(),
        }),
    }
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join("meta.txt");
    let meta = parse_meta(&std::fs::read_to_string(&meta_path).map_err(|e| Error::file(&meta_path, e))?)?;
    let cameras = read_cameras(&dir.join("cameras.txt"))?;
    if cameras.len() != meta.n_views {
        return Err(Error::Structural(format!(
            "meta.txt lists {} views but cameras.txt has {}",
            meta.n_views,
            cameras.len()
        )));
    }
    let views = cameras
        .into_iter()
        .enumerate()
        .map(|(i, camera)| {
            let image = Image::read_ppm(&dir.join(format!("view_{i:03}.ppm")), 3)?;
            let mask = Image::read_ppm(&dir.join(format!("mask_{i:03}.ppm")), 1)?;
            Ok(View { image, mask, camera })
        })
        .collect::<Result<Vec<_>>>()?;
    let gt_mesh = load_obj(&dir.join("gt.obj"))?;
    let gt_points = sample_surface(&gt_mesh, GT_POINTS, meta.seed)?;
    Ok(Dataset {
        meta,
        views,
        gt_mesh,
        gt_points,
    })
}

/// Chamfer distance from a reconstructed mesh to the dataset's ground truth.
pub fn evaluate_mesh(mesh: &Mesh, ds: &Dataset, seed: u64) -> Result<f64> {
    let pts = sample_surface(mesh, GT_POINTS, seed)?;
    chamfer(&pts, &ds.gt_points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationSuite {
    Layers,
    DmtetRes,
    EdgeLen,
}

impl FromStr for AblationSuite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layers" => Ok(AblationSuite::Layers),
            "dmtet_res" => Ok(AblationSuite::DmtetRes),
            "edge_len" => Ok(AblationSuite::EdgeLen),
            other => Err(Error::Config(format!(
                "unknown ablation suite `{other}` (expected layers, dmtet_res or edge_len)"
            ))),
        }
    }
}

impl AblationSuite {
    /// Labeled configurations of the sweep, derived from `base`.
    pub fn configs(self, base: &TrainConfig) -> Vec<(String, TrainConfig)> {
        let with = |f: &dyn Fn(&mut TrainConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c
        };
        match self {
            AblationSuite::Layers => vec![
                // stand-in for the unsoftened variant: one near-opaque layer hugging the surface
                (
                    "layers=1".into(),
                    with(&|c| {
                        c.layers = 1;
                        c.delta = base.delta * crate::soften::MIN_OFFSET_FRACTION;
                    }),
                ),
                ("layers=3".into(), with(&|c| c.layers = 3)),
                ("layers=5".into(), with(&|c| c.layers = 5)),
            ],
            AblationSuite::DmtetRes => vec![
                ("dmtet_res=24".into(), with(&|c| c.dmtet_resolution = 24)),
                ("dmtet_res=48".into(), with(&|c| c.dmtet_resolution = 48)),
                (
                    "dmtet_res=48,no_remesh_stage".into(),
                    with(&|c| {
                        c.dmtet_resolution = 48;
                        c.iters_dmtet = c.iters_total;
                    }),
                ),
            ],
            AblationSuite::EdgeLen => [0.5, 1.0, 2.0]
                .iter()
                .map(|&f| (format!("target_edge={}", base.target_edge * f), with(&|c| c.target_edge = base.target_edge * f)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub chamfer: f64,
    pub verts: usize,
    pub seconds: f64,
    pub memory_mb: f64,
    /// Set when the run was stopped by the divergence guard; the row then
    /// scores the mesh at that iteration.
    pub diverged_at: Option<usize>,
}

impl AblationRow {
    pub const CSV_HEADER: &'static str = "config,chamfer,verts,seconds,memory_mb";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.9e},{},{:.3},{:.3}",
            self.label, self.chamfer, self.verts, self.seconds, self.memory_mb
        )
    }
}

/// Rough peak working set of a run in MiB: grid parameters with their Adam
/// moments, the largest surface mesh with its moments and layers, and the
/// per-pixel image buffers. Fragment lists are excluded (data dependent).
pub fn memory_estimate_mb(cfg: &TrainConfig, max_verts: usize, pixels: usize) -> f64 {
    let f = 8.0;
    let grid_verts = ((cfg.dmtet_resolution + 1) as f64).powi(3);
    let grid = grid_verts * 4.0 * 3.0 * f + grid_verts * 6.0 * 4.0 * 4.0;
    let surface = max_verts as f64 * (6.0 * 3.0 * f + cfg.layers as f64 * 4.0 * f);
    let images = pixels as f64 * (3.0 + 1.0) * 3.0 * f;
    (grid + surface + images) / (1024.0 * 1024.0)
}

/// A training run scored against the dataset's ground truth.
#[derive(Debug, Clone)]
pub struct ScoredRun {
    pub mesh: Mesh,
    pub chamfer: f64,
    pub max_verts: usize,
    pub seconds: f64,
    /// Iteration at which the divergence guard stopped the run, if it did.
    pub diverged_at: Option<usize>,
}

/// Trains `cfg` on `ds` and scores the result. A run stopped by the divergence
/// guard is scored on the mesh it had reached, so one unstable configuration
/// does not abort a whole sweep; every other error is returned.
pub fn train_and_score(ds: &Dataset, cfg: &TrainConfig) -> Result<ScoredRun> {
    let start = Instant::now();
    let mut trainer = Trainer::new(&ds.views, cfg.clone(), None)?;
    let diverged_at = match trainer.run() {
        Ok(()) => None,
        Err(Error::Diverged { iteration, reason }) => {
            log::warn!("run diverged at iteration {iteration}: {reason}");
            Some(iteration)
        }
        Err(e) => return Err(e),
    };
    let seconds = if cfg.wallclock { start.elapsed().as_secs_f64() } else { 0.0 };
    let mesh = trainer.mesh().clone();
    let max_verts = trainer.metrics.iter().map(|m| m.verts).max().unwrap_or(mesh.vertices.len());
    Ok(ScoredRun {
        chamfer: evaluate_mesh(&mesh, ds, cfg.seed)?,
        mesh,
        max_verts,
        seconds,
        diverged_at,
    })
}

/// Trains every configuration of `suite` on `ds` and evaluates it.
pub fn run_ablation(suite: AblationSuite, base: &TrainConfig, ds: &Dataset) -> Result<Vec<AblationRow>> {
    let pixels = ds.meta.resolution * ds.meta.resolution;
    suite
        .configs(base)
        .into_iter()
        .map(|(label, cfg)| {
            log::info!("ablation run `{label}`");
            let run = train_and_score(ds, &cfg)?;
            Ok(AblationRow {
                chamfer: run.chamfer,
                verts: run.mesh.vertices.len(),
                seconds: run.seconds,
                memory_mb: memory_estimate_mb(&cfg, run.max_verts, pixels),
                diverged_at: run.diverged_at,
                label,
            })
        })
        .collect()
}

/// Comment line heading every ablation CSV.
pub const CHAMFER_NOTE: &str =
    "# chamfer = 0.5*(mean_a min_b |a-b| + mean_b min_a |a-b|), Euclidean, scene units, 20000 area-uniform samples per surface";

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("{CHAMFER_NOTE}\n");
    for r in rows {
        if let Some(it) = r.diverged_at {
            s.push_str(&format!("# {} diverged at iteration {it}; scored on the mesh at that point\n", r.label));
        }
    }
    s.push_str(AblationRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}
