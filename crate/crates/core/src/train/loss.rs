//! Image and geometry losses with their gradients.

use crate::error::{Error, Result};
use crate::geometry::{Image, Mesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub photometric: f64,
    pub mask: f64,
    pub smooth: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub image: f64,
    pub mask: f64,
    pub smooth: f64,
}

impl LossBreakdown {
    pub fn combine(photometric: f64, mask: f64, smooth: f64, w: &LossWeights) -> Self {
        LossBreakdown {
            photometric,
            mask,
            smooth,
            total: w.image * photometric + w.mask * mask + w.smooth * smooth,
        }
    }
}

fn same_shape(a: &Image, b: &Image, what: &str) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what}: {}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )))
    }
}

/// Mean absolute error over pixels × channels and its gradient
/// `sign(pred − gt) / (W·H·C)`.
pub fn photometric_loss(pred: &Image, gt: &Image) -> Result<(f64, Vec<f64>)> {
    same_shape(pred, gt, "photometric loss")?;
    let n = pred.data.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .data
        .iter()
        .zip(&gt.data)
        .map(|(p, g)| {
            let d = p - g;
            loss += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((loss / n, grad))
}

/// Mean squared error between rendered opacity and the mask.
pub fn mask_loss(opacity: &Image, mask: &Image) -> Result<(f64, Vec<f64>)> {
    same_shape(opacity, mask, "mask loss")?;
    let n = opacity.data.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = opacity
        .data
        .iter()
        .zip(&mask.data)
        .map(|(o, m)| {
            let d = o - m;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// One-ring neighbor lists (sorted, deduplicated).
pub fn vertex_neighbors(mesh: &Mesh) -> Vec<Vec<u32>> {
    let mut nbrs = vec![Vec::new(); mesh.vertices.len()];
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            nbrs[a as usize].push(b);
            nbrs[b as usize].push(a);
        }
    }
    for n in nbrs.iter_mut() {
        n.sort_unstable();
        n.dedup();
    }
    nbrs
}

/// Mean over connected vertices of `‖v − mean(1-ring)‖²` and its gradient.
pub fn laplacian_smooth_loss(mesh: &Mesh) -> (f64, Vec<Vec3>) {
    let nbrs = vertex_neighbors(mesh);
    let connected = nbrs.iter().filter(|n| !n.is_empty()).count();
    let isolated = nbrs.len() - connected;
    if isolated > 0 {
        log::debug!("smoothness loss: {isolated} isolated vertices skipped");
    }
    let mut grad = vec![Vec3::zeros(); mesh.vertices.len()];
    if connected == 0 {
        return (0.0, grad);
    }
    let scale = 1.0 / connected as f64;
    let mut loss = 0.0;
    for (i, n) in nbrs.iter().enumerate() {
        if n.is_empty() {
            continue;
        }
        let k = n.len() as f64;
        let mean = n.iter().map(|&j| mesh.vertices[j as usize]).sum::<Vec3>() / k;
        let r = mesh.vertices[i] - mean;
        loss += r.norm_squared();
        let g = r * (2.0 * scale);
        grad[i] += g;
        for &j in n {
            grad[j as usize] -= g / k;
        }
    }
    (loss * scale, grad)
}
