//! Flat `key = value` training configuration.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iters_total: usize,
    pub iters_dmtet: usize,
    /// Remesh every this many surface-stage iterations; 0 disables remeshing.
    pub remesh_period: usize,
    pub layers: usize,
    pub delta: f64,
    pub dmtet_resolution: usize,
    /// Half-width of the cubic grid box centered at the origin.
    pub grid_extent: f64,
    pub init_radius: f64,
    pub target_edge: f64,
    pub lr_positions: f64,
    pub lr_colors: f64,
    pub lr_sdf: f64,
    pub lr_beta: f64,
    pub beta_init: f64,
    pub w_img: f64,
    pub w_mask: f64,
    pub w_smooth: f64,
    pub seed: u64,
    /// Write an OBJ checkpoint every this many iterations; 0 disables.
    pub checkpoint_period: usize,
    pub tile_size: usize,
    pub max_fragments: usize,
    /// Record elapsed seconds in the metrics; off gives byte-identical logs.
    pub wallclock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iters_total: 3000,
            iters_dmtet: 1500,
            remesh_period: 1,
            layers: 5,
            delta: 0.02,
            dmtet_resolution: 48,
            grid_extent: 1.25,
            init_radius: 1.0,
            target_edge: 0.04,
            lr_positions: 5e-3,
            lr_colors: 2e-2,
            lr_sdf: 2e-3,
            lr_beta: 1e-4,
            beta_init: 1.0,
            w_img: 1.0,
            w_mask: 2.0,
            w_smooth: 0.01,
            seed: 0,
            checkpoint_period: 0,
            tile_size: 16,
            max_fragments: 64,
            wallclock: true,
        }
    }
}

/// Every accepted key, in snapshot order.
pub const KEYS: &[&str] = &[
    "iters_total",
    "iters_dmtet",
    "remesh_period",
    "layers",
    "delta",
    "dmtet_resolution",
    "grid_extent",
    "init_radius",
    "target_edge",
    "lr_positions",
    "lr_colors",
    "lr_sdf",
    "lr_beta",
    "beta_init",
    "w_img",
    "w_mask",
    "w_smooth",
    "seed",
    "checkpoint_period",
    "tile_size",
    "max_fragments",
    "wallclock",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl TrainConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "iters_total" => self.iters_total = parse(key, v)?,
            "iters_dmtet" => self.iters_dmtet = parse(key, v)?,
            "remesh_period" => self.remesh_period = parse(key, v)?,
            "layers" => self.layers = parse(key, v)?,
            "delta" => self.delta = parse(key, v)?,
            "dmtet_resolution" => self.dmtet_resolution = parse(key, v)?,
            "grid_extent" => self.grid_extent = parse(key, v)?,
            "init_radius" => self.init_radius = parse(key, v)?,
            "target_edge" => self.target_edge = parse(key, v)?,
            "lr_positions" => self.lr_positions = parse(key, v)?,
            "lr_colors" => self.lr_colors = parse(key, v)?,
            "lr_sdf" => self.lr_sdf = parse(key, v)?,
            "lr_beta" => self.lr_beta = parse(key, v)?,
            "beta_init" => self.beta_init = parse(key, v)?,
            "w_img" => self.w_img = parse(key, v)?,
            "w_mask" => self.w_mask = parse(key, v)?,
            "w_smooth" => self.w_smooth = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "checkpoint_period" => self.checkpoint_period = parse(key, v)?,
            "tile_size" => self.tile_size = parse(key, v)?,
            "max_fragments" => self.max_fragments = parse(key, v)?,
            "wallclock" => self.wallclock = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            self.set(key, value).map_err(|e| match e {
                Error::Config(message) => Error::Parse { line: i + 1, message },
                e => e,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        TrainConfig::from_text(&text)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "iters_total" => self.iters_total.to_string(),
            "iters_dmtet" => self.iters_dmtet.to_string(),
            "remesh_period" => self.remesh_period.to_string(),
            "layers" => self.layers.to_string(),
            "delta" => self.delta.to_string(),
            "dmtet_resolution" => self.dmtet_resolution.to_string(),
            "grid_extent" => self.grid_extent.to_string(),
            "init_radius" => self.init_radius.to_string(),
            "target_edge" => self.target_edge.to_string(),
            "lr_positions" => self.lr_positions.to_string(),
            "lr_colors" => self.lr_colors.to_string(),
            "lr_sdf" => self.lr_sdf.to_string(),
            "lr_beta" => self.lr_beta.to_string(),
            "beta_init" => self.beta_init.to_string(),
            "w_img" => self.w_img.to_string(),
            "w_mask" => self.w_mask.to_string(),
            "w_smooth" => self.w_smooth.to_string(),
            "seed" => self.seed.to_string(),
            "checkpoint_period" => self.checkpoint_period.to_string(),
            "tile_size" => self.tile_size.to_string(),
            "max_fragments" => self.max_fragments.to_string(),
            "wallclock" => self.wallclock.to_string(),
            _ => return None,
        })
    }

    /// Resolved configuration as parseable text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            writeln!(s, "{key} = {}", self.get(key).unwrap()).unwrap();
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        // equality is allowed: the run then ends right after the grid stage
        if self.iters_dmtet > self.iters_total {
            return fail(format!(
                "iters_dmtet ({}) must not exceed iters_total ({})",
                self.iters_dmtet, self.iters_total
            ));
        }
        if self.layers == 0 {
            return fail("layers must be at least 1".into());
        }
        if self.dmtet_resolution < 2 {
            return fail("dmtet_resolution must be at least 2".into());
        }
        if self.iters_dmtet == 0 {
            return fail("iters_dmtet must be at least 1 (the grid stage builds the initial mesh)".into());
        }
        for (name, v) in [
            ("delta", self.delta),
            ("grid_extent", self.grid_extent),
            ("init_radius", self.init_radius),
            ("target_edge", self.target_edge),
            ("lr_positions", self.lr_positions),
            ("lr_colors", self.lr_colors),
            ("lr_sdf", self.lr_sdf),
            ("lr_beta", self.lr_beta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive"));
            }
        }
        if !(self.beta_init > crate::soften::BETA_MIN) {
            return fail(format!("beta_init must exceed {}", crate::soften::BETA_MIN));
        }
        for (name, v) in [("w_img", self.w_img), ("w_mask", self.w_mask), ("w_smooth", self.w_smooth)] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative"));
            }
        }
        if self.init_radius >= self.grid_extent {
            return fail("init_radius must be smaller than grid_extent".into());
        }
        if self.tile_size == 0 || self.max_fragments == 0 {
            return fail("tile_size and max_fragments must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.set("layers", "3").unwrap();
        cfg.set("delta", "0.05").unwrap();
        cfg.set("wallclock", "false").unwrap();
        assert_eq!(TrainConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(matches!(TrainConfig::from_text("bogus = 1"), Err(Error::Parse { line: 1, .. })));
        assert!(TrainConfig::from_text("# comment\n\nlayers = three").is_err());
        assert!(TrainConfig::from_text("layers 3").is_err());
        assert!(TrainConfig::from_text("iters_total = 10\niters_dmtet = 20").is_err());
        assert!(TrainConfig::from_text("iters_total = 10\niters_dmtet = 10").is_ok());
        assert!(TrainConfig::from_text("lr_sdf = 0").is_err());
        assert!(TrainConfig::from_text("w_mask = -1").is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let cfg = TrainConfig::default();
        for key in KEYS {
            let mut c = cfg.clone();
            c.set(key, &cfg.get(key).unwrap()).unwrap();
            assert_eq!(c, cfg);
        }
    }
}
