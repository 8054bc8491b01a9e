//! Losses, optimizer and the two-stage training loop.
//!
//! Iterations `1..=iters_dmtet` optimize SDF values (and grid colors) on a
//! tetrahedral grid, re-extracting the base mesh every step. After the last
//! grid update the extracted mesh is frozen as the base mesh, and the
//! remaining iterations optimize vertex positions and colors directly, with
//! remeshing at the start of each remesh period.

mod adam;
mod config;
mod loss;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{AdamConfig, AdamState};
pub use config::{TrainConfig, KEYS as CONFIG_KEYS};
pub use loss::{laplacian_smooth_loss, mask_loss, photometric_loss, vertex_neighbors, LossBreakdown, LossWeights};

use crate::dmtet::{self, TetGrid};
use crate::error::{Error, Result};
use crate::geometry::obj::save_obj;
use crate::geometry::{Camera, Image, Mesh, Vec3};
use crate::remesh::{mesh_quality_report, remesh_step, MeshQuality, RemeshConfig, VertexAttributes};
use crate::soften::{sample_layers, AlphaParams};
use crate::splat::{render_backward, render_with_state, GradientBuffer, RenderSettings};

/// One supervised view.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub image: Image,
    pub mask: Image,
    pub camera: Camera,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iter: usize,
    pub loss: LossBreakdown,
    pub verts: usize,
    pub beta: f64,
    pub seconds: f64,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str = "iter,loss_total,loss_img,loss_mask,loss_smooth,verts,beta,seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e},{},{:.9e},{:.3}",
            self.iter,
            self.loss.total,
            self.loss.photometric,
            self.loss.mask,
            self.loss.smooth,
            self.verts,
            self.beta,
            self.seconds
        )
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut s = String::from(MetricsRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::file(path, e))
}

enum Stage {
    Grid {
        grid: TetGrid,
        sdf_adam: AdamState,
        color_adam: AdamState,
    },
    Surface {
        mesh: Mesh,
        pos_adam: AdamState,
        color_adam: AdamState,
    },
}

pub struct Trainer<'a> {
    views: &'a [View],
    cfg: TrainConfig,
    view_rng: ChaCha8Rng,
    layer_rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    params: AlphaParams,
    beta_adam: AdamState,
    stage: Stage,
    /// Mesh rendered in the latest iteration (or the frozen base mesh).
    mesh: Mesh,
    iter: usize,
    start: Instant,
    settings: RenderSettings,
    remesh_cfg: RemeshConfig,
    out_dir: Option<PathBuf>,
    pub metrics: Vec<MetricsRow>,
    pub quality: Vec<(usize, MeshQuality)>,
    /// Gradients of the latest iteration.
    pub last_gradients: GradientBuffer,
    /// Grid at the end of the grid stage, kept for inspection.
    final_grid: Option<TetGrid>,
}

fn check_views(views: &[View]) -> Result<()> {
    if views.len() < 2 {
        return Err(Error::Empty(format!("training needs at least 2 views, got {}", views.len())));
    }
    let (w, h) = (views[0].camera.width, views[0].camera.height);
    for (i, v) in views.iter().enumerate() {
        let ok = v.camera.width == w
            && v.camera.height == h
            && (v.image.width, v.image.height, v.image.channels) == (w, h, 3)
            && (v.mask.width, v.mask.height, v.mask.channels) == (w, h, 1);
        if !ok {
            return Err(Error::Dimension(format!(
                "view {i} does not match the {w}x{h} RGB + mask layout of view 0"
            )));
        }
    }
    Ok(())
}

impl<'a> Trainer<'a> {
    pub fn new(views: &'a [View], cfg: TrainConfig, out_dir: Option<&Path>) -> Result<Self> {
        cfg.validate()?;
        check_views(views)?;
        let e = Vec3::repeat(cfg.grid_extent);
        let mut grid = dmtet::build_grid(cfg.dmtet_resolution, (-e, e))?;
        dmtet::init_sphere_sdf(&mut grid, &Vec3::zeros(), cfg.init_radius);
        grid.fill_colors(Vec3::zeros());
        let n = grid.num_vertices();
        let mut remesh_cfg = RemeshConfig::new(cfg.target_edge);
        remesh_cfg.validate()?;
        remesh_cfg.max_ops_per_call = 1_000_000;
        Ok(Trainer {
            views,
            view_rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            layer_rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5EED_1A7E)),
            order: Vec::new(),
            cursor: 0,
            params: AlphaParams::from_beta(cfg.beta_init),
            beta_adam: AdamState::new(1, 1),
            stage: Stage::Grid {
                grid,
                sdf_adam: AdamState::new(n, 1),
                color_adam: AdamState::new(n, 3),
            },
            mesh: Mesh::default(),
            iter: 0,
            start: Instant::now(),
            settings: RenderSettings {
                tile_size: cfg.tile_size,
                max_fragments: cfg.max_fragments,
                ..Default::default()
            },
            remesh_cfg,
            out_dir: out_dir.map(Path::to_path_buf),
            metrics: Vec::new(),
            quality: Vec::new(),
            last_gradients: GradientBuffer::default(),
            final_grid: None,
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn is_done(&self) -> bool {
        self.iter >= self.cfg.iters_total
    }

    pub fn in_grid_stage(&self) -> bool {
        matches!(self.stage, Stage::Grid { .. })
    }

    pub fn alpha_params(&self) -> AlphaParams {
        self.params
    }

    /// The current base mesh: the latest extraction during the grid stage,
    /// the optimized mesh afterwards.
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// The live grid during the grid stage, the final grid afterwards.
    pub fn grid(&self) -> Option<&TetGrid> {
        match &self.stage {
            Stage::Grid { grid, .. } => Some(grid),
            Stage::Surface { .. } => self.final_grid.as_ref(),
        }
    }

    /// Shuffled round-robin: a fresh permutation of all views per epoch.
    fn next_view(&mut self) -> usize {
        if self.cursor == self.order.len() {
            self.order = (0..self.views.len()).collect();
            self.order.shuffle(&mut self.view_rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    fn checkpoint(&self, name: &str, mesh: &Mesh) -> Result<()> {
        if let Some(dir) = &self.out_dir {
            save_obj(mesh, &dir.join(name))?;
        }
        Ok(())
    }

    /// Runs one iteration and returns its metrics.
    pub fn step(&mut self) -> Result<MetricsRow> {
        if self.is_done() {
            return Err(Error::Config("training already finished".into()));
        }
        let t = self.iter + 1;
        let view_idx = self.next_view();
        let view = &self.views[view_idx];

        // current base mesh (and the extraction map during the grid stage)
        let map = match &mut self.stage {
            Stage::Grid { grid, .. } => {
                let (mesh, map) = dmtet::marching_tets(grid);
                if mesh.faces.is_empty() {
                    return Err(Error::Diverged {
                        iteration: t,
                        reason: "the zero level set vanished from the grid".into(),
                    });
                }
                self.mesh = mesh;
                Some(map)
            }
            Stage::Surface {
                mesh,
                pos_adam,
                color_adam,
            } => {
                let period = self.cfg.remesh_period;
                if period > 0 && (t - self.cfg.iters_dmtet - 1) % period == 0 {
                    let (next, _) = remesh_step(
                        mesh,
                        &mut [pos_adam as &mut dyn VertexAttributes, color_adam],
                        &self.remesh_cfg,
                    )?;
                    *mesh = next;
                    self.quality.push((t, mesh_quality_report(mesh)));
                }
                self.mesh = mesh.clone();
                None
            }
        };
        // a closed outward surface encloses positive volume; once it turns
        // inside out the alpha path pushes every vertex the wrong way and the
        // remesher keeps refining the crumpled result
        if map.is_none() && !(self.mesh.signed_volume() > 0.0) {
            let mesh = self.mesh.clone();
            self.checkpoint("diverged.obj", &mesh)?;
            return Err(Error::Diverged {
                iteration: t,
                reason: format!("the surface turned inside out (enclosed volume {:.3e})", mesh.signed_volume()),
            });
        }

        let mut layers = sample_layers(&self.mesh, self.cfg.layers, self.cfg.delta, &mut self.layer_rng);
        layers.update_alphas(&self.params);
        let (out, state, _) = render_with_state(&layers, &view.camera, &self.settings);
        let (l_img, g_img) = photometric_loss(&out.color, &view.image)?;
        let (l_mask, g_mask) = mask_loss(&out.opacity, &view.mask)?;
        let (l_smooth, g_smooth) = if self.cfg.w_smooth > 0.0 {
            laplacian_smooth_loss(&self.mesh)
        } else {
            (0.0, vec![Vec3::zeros(); self.mesh.vertices.len()])
        };
        let weights = LossWeights {
            image: self.cfg.w_img,
            mask: self.cfg.w_mask,
            smooth: self.cfg.w_smooth,
        };
        let loss = LossBreakdown::combine(l_img, l_mask, l_smooth, &weights);
        if !loss.total.is_finite() {
            let mesh = self.mesh.clone();
            self.checkpoint("diverged.obj", &mesh)?;
            return Err(Error::Diverged {
                iteration: t,
                reason: format!("non-finite loss {loss:?}"),
            });
        }

        let d_color: Vec<f64> = g_img.iter().map(|g| g * weights.image).collect();
        let d_opacity: Vec<f64> = g_mask.iter().map(|g| g * weights.mask).collect();
        let mut grads = render_backward(&layers, &self.params, &state, &d_color, &d_opacity)?;
        for (d, s) in grads.d_positions.iter_mut().zip(&g_smooth) {
            *d += s * weights.smooth;
        }

        match &mut self.stage {
            Stage::Grid {
                grid,
                sdf_adam,
                color_adam,
            } => {
                let map = map.expect("grid stage keeps its extraction map");
                // The color lookup position is detached: letting the color field
                // drag the surface through the trilinear weights adds noise that
                // the alpha path has to fight.
                let (d_grid_colors, _) =
                    dmtet::interpolate_colors_backward(grid, &map, &self.mesh.vertices, &grads.d_colors);
                grads.d_sdf = dmtet::backprop_to_sdf(&map, grid, &grads.d_positions);
                grads.d_grid_colors = d_grid_colors;
                // positions are not parameters in this stage
                grads.d_positions.iter_mut().for_each(|d| *d = Vec3::zeros());
                sdf_adam.step_scalars(&mut grid.sdf, &grads.d_sdf, self.cfg.lr_sdf, "sdf")?;
                color_adam.step_vec3(&mut grid.colors, &grads.d_grid_colors, self.cfg.lr_colors, "grid_colors")?;
            }
            Stage::Surface {
                mesh,
                pos_adam,
                color_adam,
            } => {
                debug_assert!(grads.d_sdf.is_empty());
                pos_adam.step_vec3(&mut mesh.vertices, &grads.d_positions, self.cfg.lr_positions, "positions")?;
                color_adam.step_vec3(&mut mesh.colors, &grads.d_colors, self.cfg.lr_colors, "colors")?;
                self.mesh = mesh.clone();
            }
        }
        self.beta_adam
            .step_scalars(std::slice::from_mut(&mut self.params.b), &[grads.d_beta], self.cfg.lr_beta, "beta")?;
        self.last_gradients = grads;

        if t == self.cfg.iters_dmtet {
            self.freeze_base_mesh();
        }
        self.iter = t;

        let row = MetricsRow {
            iter: t,
            loss,
            verts: self.mesh.vertices.len(),
            beta: self.params.beta(),
            seconds: if self.cfg.wallclock {
                self.start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        if self.cfg.checkpoint_period > 0 && t % self.cfg.checkpoint_period == 0 {
            let mesh = self.mesh.clone();
            self.checkpoint(&format!("checkpoint_{t:06}.obj"), &mesh)?;
        }
        log::debug!("iter {t}: {}", row.csv_row());
        self.metrics.push(row.clone());
        Ok(row)
    }

    /// Ends the grid stage: the extraction of the final SDF becomes the base
    /// mesh, with grid colors interpolated onto its vertices.
    fn freeze_base_mesh(&mut self) {
        let Stage::Grid { grid, .. } = &self.stage else {
            return;
        };
        let (mesh, _) = dmtet::marching_tets(grid);
        let n = mesh.vertices.len();
        log::info!("grid stage finished: base mesh with {n} vertices, {} faces", mesh.faces.len());
        self.mesh = mesh.clone();
        self.final_grid = Some(grid.clone());
        self.stage = Stage::Surface {
            mesh,
            pos_adam: AdamState::new(n, 3),
            color_adam: AdamState::new(n, 3),
        };
    }

    /// Runs to completion.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub mesh: Mesh,
    pub metrics: Vec<MetricsRow>,
    pub quality: Vec<(usize, MeshQuality)>,
    pub beta: f64,
}

/// Trains from scratch. With `out_dir`, writes `metrics.csv`, `quality.csv`,
/// `final.obj` and any periodic checkpoints there.
pub fn train_loop(views: &[View], cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutput> {
    let mut trainer = Trainer::new(views, cfg.clone(), out_dir)?;
    let result = trainer.run();
    if let Some(dir) = out_dir {
        write_metrics_csv(&dir.join("metrics.csv"), &trainer.metrics)?;
        let mut q = String::from(MeshQuality::CSV_HEADER);
        q.push('\n');
        for (it, row) in &trainer.quality {
            q.push_str(&row.csv_row(*it));
            q.push('\n');
        }
        let path = dir.join("quality.csv");
        std::fs::File::create(&path)
            .and_then(|mut f| f.write_all(q.as_bytes()))
            .map_err(|e| Error::file(&path, e))?;
    }
    result?;
    if let Some(dir) = out_dir {
        save_obj(trainer.mesh(), &dir.join("final.obj"))?;
    }
    Ok(TrainOutput {
        mesh: trainer.mesh().clone(),
        metrics: trainer.metrics.clone(),
        quality: trainer.quality.clone(),
        beta: trainer.params.beta(),
    })
}

#[cfg(test)]
mod tests;
