//! Per-vertex color model: unbounded raw values squashed to `(0, 1)` per channel.
//!
//! Colors live on base vertices and are shared by every softened layer, so an
//! interpolated fragment color depends only on the face, the barycentrics and
//! the base colors.

use crate::geometry::Vec3;

/// Optimizable raw colors, one RGB triple per base vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColorField {
    pub raw: Vec<Vec3>,
}

impl ColorField {
    pub fn constant(n: usize, rgb: Vec3) -> Self {
        ColorField {
            raw: vec![rgb.map(logit); n],
        }
    }

    pub fn squashed(&self) -> Vec<Vec3> {
        self.raw.iter().map(vertex_color).collect()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`], clamped so that 0 and 1 map to finite values.
pub fn logit(c: f64) -> f64 {
    let c = c.clamp(1e-6, 1.0 - 1e-6);
    (c / (1.0 - c)).ln()
}

pub fn vertex_color(raw: &Vec3) -> Vec3 {
    raw.map(sigmoid)
}

/// Chains `dL/dc` through the squash: `dL/draw = dL/dc · c(1 − c)`.
pub fn vertex_color_backward(raw: &Vec3, d_color: &Vec3) -> Vec3 {
    let c = vertex_color(raw);
    d_color.component_mul(&c.map(|c| c * (1.0 - c)))
}
