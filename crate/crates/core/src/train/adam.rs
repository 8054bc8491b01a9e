//! Adam with per-row step counters, so rows created mid-run by remeshing can
//! carry their own bias-correction state.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::remesh::VertexAttributes;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moments for `rows × dim` parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub dim: usize,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Steps taken per row.
    pub t: Vec<u64>,
    pub cfg: AdamConfig,
}

impl AdamState {
    pub fn new(rows: usize, dim: usize) -> Self {
        AdamState {
            dim,
            m: vec![0.0; rows * dim],
            v: vec![0.0; rows * dim],
            t: vec![0; rows],
            cfg: AdamConfig::default(),
        }
    }

    pub fn rows(&self) -> usize {
        self.t.len()
    }

    #[inline]
    fn update(&mut self, row: usize, k: usize, g: f64, lr: f64) -> f64 {
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let i = row * self.dim + k;
        self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
        self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
        let t = self.t[row] as i32;
        let m_hat = self.m[i] / (1.0 - beta1.powi(t));
        let v_hat = self.v[i] / (1.0 - beta2.powi(t));
        lr * m_hat / (v_hat.sqrt() + eps)
    }

    fn check(&self, rows: usize, grads_ok: bool, name: &str) -> Result<()> {
        if rows != self.rows() {
            return Err(Error::Dimension(format!(
                "optimizer state for `{name}` has {} rows, parameters have {rows}",
                self.rows()
            )));
        }
        if !grads_ok {
            return Err(Error::NonFiniteGradient(name.to_string()));
        }
        Ok(())
    }

    /// One bias-corrected step on scalar parameters (`dim == 1`).
    pub fn step_scalars(&mut self, params: &mut [f64], grads: &[f64], lr: f64, name: &str) -> Result<()> {
        assert_eq!(self.dim, 1);
        assert_eq!(params.len(), grads.len());
        self.check(params.len(), grads.iter().all(|g| g.is_finite()), name)?;
        for (row, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            self.t[row] += 1;
            *p -= self.update(row, 0, g, lr);
        }
        Ok(())
    }

    /// One bias-corrected step on 3-vector parameters (`dim == 3`).
    pub fn step_vec3(&mut self, params: &mut [Vec3], grads: &[Vec3], lr: f64, name: &str) -> Result<()> {
        assert_eq!(self.dim, 3);
        assert_eq!(params.len(), grads.len());
        self.check(
            params.len(),
            grads.iter().all(|g| g.iter().all(|c| c.is_finite())),
            name,
        )?;
        for (row, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            self.t[row] += 1;
            for k in 0..3 {
                p[k] -= self.update(row, k, g[k], lr);
            }
        }
        Ok(())
    }
}

/// Moments are averaged on split and merge. The step counter of a new or
/// merged row is the smaller of its parents' counters: restarting it at zero
/// would apply a fresh bias correction to already-warm moments, scaling the
/// step by `√(1−β₂ᵗ)/(1−β₁ᵗ)` (0.15–0.3 for the first hundred steps), so new
/// vertices would lag their neighbors.
impl VertexAttributes for AdamState {
    fn len(&self) -> usize {
        self.rows()
    }

    fn push_midpoint(&mut self, a: usize, b: usize) {
        for k in 0..self.dim {
            let (ia, ib) = (a * self.dim + k, b * self.dim + k);
            let (m, v) = ((self.m[ia] + self.m[ib]) * 0.5, (self.v[ia] + self.v[ib]) * 0.5);
            self.m.push(m);
            self.v.push(v);
        }
        self.t.push(self.t[a].min(self.t[b]));
    }

    fn merge(&mut self, keep: usize, remove: usize) {
        for k in 0..self.dim {
            let (ia, ib) = (keep * self.dim + k, remove * self.dim + k);
            self.m[ia] = (self.m[ia] + self.m[ib]) * 0.5;
            self.v[ia] = (self.v[ia] + self.v[ib]) * 0.5;
        }
        self.t[keep] = self.t[keep].min(self.t[remove]);
    }

    fn compact(&mut self, keep: &[usize]) {
        let d = self.dim;
        let pick = |src: &[f64]| -> Vec<f64> {
            keep.iter().flat_map(|&r| src[r * d..(r + 1) * d].iter().copied()).collect()
        };
        self.m = pick(&self.m);
        self.v = pick(&self.v);
        self.t = keep.iter().map(|&r| self.t[r]).collect();
    }
}
