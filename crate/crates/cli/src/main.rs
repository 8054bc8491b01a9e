//! `softmesh` command-line driver: datasets, reconstruction, rendering,
//! evaluation and ablations.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use softmesh::geometry::obj::load_obj;
use softmesh::geometry::{read_cameras, Image};
use softmesh::harness::{
    ablation_csv, chamfer, load_dataset, make_dataset, run_ablation, sample_surface, save_dataset, AblationSuite,
    Dataset, Shape,
};
use softmesh::soften::{sample_layers, AlphaParams};
use softmesh::splat::{oracle_render, render_with_state, RenderSettings};
use softmesh::train::{train_loop, TrainConfig};

#[derive(Parser)]
#[command(name = "softmesh", version, about = "Soft-mesh splatting surface reconstruction")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic ground-truth dataset.
    MakeDataset {
        #[arg(long, default_value = "blob")]
        shape: Shape,
        #[arg(long, default_value_t = 24)]
        views: usize,
        #[arg(long, default_value_t = 128)]
        res: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Reconstruct a mesh from a dataset.
    Reconstruct {
        #[command(flatten)]
        run: RunArgs,
        /// Dataset directory; without it the default blob scene is generated.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Render a mesh as softened layers from dataset cameras.
    Render {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        mesh: PathBuf,
        /// A `cameras.txt` file.
        #[arg(long)]
        cameras: PathBuf,
        /// Render only this camera index.
        #[arg(long)]
        view: Option<usize>,
        /// Use the exhaustive ray-casting reference renderer.
        #[arg(long)]
        oracle: bool,
        /// Print per-phase timings.
        #[arg(long)]
        timing: bool,
    },
    /// Chamfer distance between two meshes.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep one knob and tabulate reconstruction quality.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        suite: AblationSuite,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Summarize ablation CSVs into one table.
    Report {
        /// Ablation CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for all randomness (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    out: PathBuf,
}

/// Errors raised before any work starts are usage errors.
struct Usage(anyhow::Error);

impl RunArgs {
    fn resolve(&self) -> std::result::Result<TrainConfig, Usage> {
        let mut cfg = TrainConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Usage)?;
            cfg.apply_text(&text).map_err(|e| Usage(e.into()))?;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Usage(anyhow::anyhow!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k, v).map_err(|e| Usage(e.into()))?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate().map_err(|e| Usage(e.into()))?;
        Ok(cfg)
    }

    /// Creates the output directory and writes the resolved config snapshot.
    fn prepare(&self, cfg: &TrainConfig) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        fs::write(self.out.join("config.txt"), cfg.to_text()).context("writing config snapshot")?;
        Ok(())
    }
}

fn dataset(data: Option<&Path>, seed: u64) -> Result<Dataset> {
    Ok(match data {
        Some(dir) => load_dataset(dir).with_context(|| format!("loading dataset {}", dir.display()))?,
        None => {
            log::info!("no --data given: generating the blob scene (24 views, 128², seed {seed})");
            make_dataset(Shape::Blob, 24, 128, seed)?
        }
    })
}

fn run(cmd: Command) -> std::result::Result<(), (u8, anyhow::Error)> {
    let usage = |e: Usage| (1u8, e.0);
    let fail = |e: anyhow::Error| (2u8, e);
    match cmd {
        Command::MakeDataset {
            shape,
            views,
            res,
            seed,
            out,
        } => {
            if views < 2 || res == 0 {
                return Err((1, anyhow::anyhow!("need --views ≥ 2 and --res ≥ 1")));
            }
            let ds = make_dataset(shape, views, res, seed).map_err(|e| fail(e.into()))?;
            save_dataset(&ds, &out).map_err(|e| fail(e.into()))?;
            println!("wrote {views} views of `{shape}` to {}", out.display());
        }
        Command::Reconstruct { run, data } => {
            let cfg = run.resolve().map_err(usage)?;
            (|| -> Result<()> {
                run.prepare(&cfg)?;
                let ds = dataset(data.as_deref(), cfg.seed)?;
                let out = train_loop(&ds.views, &cfg, Some(&run.out))?;
                let cd = softmesh::harness::evaluate_mesh(&out.mesh, &ds, cfg.seed)?;
                println!(
                    "verts={} faces={} chamfer={:.9e} chamfer_rel={:.6}",
                    out.mesh.vertices.len(),
                    out.mesh.faces.len(),
                    cd,
                    cd / ds.scale()
                );
                Ok(())
            })()
            .map_err(fail)?;
        }
        Command::Render {
            run,
            mesh,
            cameras,
            view,
            oracle,
            timing,
        } => {
            let cfg = run.resolve().map_err(usage)?;
            (|| -> Result<()> {
                run.prepare(&cfg)?;
                let mesh = load_obj(&mesh)?;
                let cams = read_cameras(&cameras)?;
                let indices: Vec<usize> = match view {
                    Some(v) if v < cams.len() => vec![v],
                    Some(v) => bail!("view {v} out of range ({} cameras)", cams.len()),
                    None => (0..cams.len()).collect(),
                };
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut layers = sample_layers(&mesh, cfg.layers, cfg.delta, &mut rng);
                layers.update_alphas(&AlphaParams::from_beta(cfg.beta_init));
                let settings = RenderSettings {
                    tile_size: cfg.tile_size,
                    max_fragments: cfg.max_fragments,
                    ..Default::default()
                };
                for i in indices {
                    let cam = &cams[i];
                    let (color, opacity): (Image, Image) = if oracle {
                        let o = oracle_render(&layers, cam, &settings);
                        (o.color, o.opacity)
                    } else {
                        let (o, state, t) = render_with_state(&layers, cam, &settings);
                        if timing {
                            println!(
                                "view={i} bin_us={} fragment_us={} composite_us={} fragments={}",
                                t.bin_us,
                                t.fragment_us,
                                t.composite_us,
                                state.total_fragments()
                            );
                        }
                        (o.color, o.opacity)
                    };
                    color.write_ppm(&run.out.join(format!("render_{i:03}.ppm")))?;
                    opacity.write_ppm(&run.out.join(format!("opacity_{i:03}.ppm")))?;
                }
                Ok(())
            })()
            .map_err(fail)?;
        }
        Command::Eval {
            pred,
            gt,
            samples,
            seed,
        } => {
            if samples == 0 {
                return Err((1, anyhow::anyhow!("--samples must be positive")));
            }
            let cd = (|| -> Result<f64> {
                let a = sample_surface(&load_obj(&pred)?, samples, seed)?;
                let b = sample_surface(&load_obj(&gt)?, samples, seed.wrapping_add(1))?;
                Ok(chamfer(&a, &b)?)
            })()
            .map_err(fail)?;
            println!("chamfer={cd:.9e}");
        }
        Command::Ablate { run, suite, data } => {
            let cfg = run.resolve().map_err(usage)?;
            (|| -> Result<()> {
                run.prepare(&cfg)?;
                let ds = dataset(data.as_deref(), cfg.seed)?;
                let rows = run_ablation(suite, &cfg, &ds)?;
                let csv = ablation_csv(&rows);
                let name = format!("ablation_{}.csv", suite_name(suite));
                fs::write(run.out.join(&name), &csv).with_context(|| format!("writing {name}"))?;
                print!("{csv}");
                Ok(())
            })()
            .map_err(fail)?;
        }
        Command::Report { inputs, out } => {
            let table = report(&inputs).map_err(fail)?;
            match out {
                Some(path) => fs::write(&path, &table)
                    .with_context(|| format!("writing {}", path.display()))
                    .map_err(fail)?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn suite_name(s: AblationSuite) -> &'static str {
    match s {
        AblationSuite::Layers => "layers",
        AblationSuite::DmtetRes => "dmtet_res",
        AblationSuite::EdgeLen => "edge_len",
    }
}

/// Markdown table with the columns Config, Memory, Training, Vertices, CD.
fn report(inputs: &[PathBuf]) -> Result<String> {
    let mut s = String::from("| Suite | Config | Memory (MiB) | Training (s) | Vertices | CD |\n|---|---|---|---|---|---|\n");
    for path in inputs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let suite = path.file_stem().and_then(|s| s.to_str()).unwrap_or("?");
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        match lines.next() {
            Some(h) if h == softmesh::harness::AblationRow::CSV_HEADER => {}
            _ => bail!("{}: not an ablation CSV", path.display()),
        }
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                bail!("{}: malformed row `{line}`", path.display());
            }
            let cd: f64 = f[1].parse().with_context(|| format!("bad chamfer in `{line}`"))?;
            s.push_str(&format!("| {suite} | {} | {} | {} | {} | {cd:.6} |\n", f[0], f[4], f[3], f[2]));
        }
    }
    Ok(s)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            if code == 1 {
                eprintln!("usage: softmesh <make-dataset|reconstruct|render|eval|ablate|report> [options] (see --help)");
            }
            ExitCode::from(code)
        }
    }
}
