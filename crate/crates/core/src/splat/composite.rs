//! Front-to-back alpha compositing and its analytic adjoint.

use super::{Fragment, TRANSMITTANCE_EPS};
use crate::geometry::Vec3;

/// Result of compositing one pixel's fragments.
#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub color: Vec3,
    pub opacity: f64,
    /// Residual transmittance after the last composited fragment.
    pub transmittance: f64,
    /// `α_i T_i` per fragment; zero past early termination.
    pub weights: Vec<f64>,
}

/// Composites sorted fragments near to far:
/// `T_1 = 1`, `w_i = α_i T_i`, `T_{i+1} = T_i (1 − α_i)`.
pub fn composite(fragments: &[Fragment], early_stop: bool) -> Composite {
    let mut weights = vec![0.0; fragments.len()];
    let mut t = 1.0;
    let mut color = Vec3::zeros();
    let mut opacity = 0.0;
    for (i, f) in fragments.iter().enumerate() {
        if early_stop && t < TRANSMITTANCE_EPS {
            break;
        }
        let w = f.alpha * t;
        weights[i] = w;
        color += f.color * w;
        opacity += w;
        t *= 1.0 - f.alpha;
    }
    Composite {
        color,
        opacity,
        transmittance: t,
        weights,
    }
}

/// Allocation-free variant used by the renderer.
pub(crate) fn composite_pixel(fragments: &[Fragment], early_stop: bool) -> Composite {
    let mut t = 1.0;
    let mut color = Vec3::zeros();
    let mut opacity = 0.0;
    for f in fragments {
        if early_stop && t < TRANSMITTANCE_EPS {
            break;
        }
        let w = f.alpha * t;
        color += f.color * w;
        opacity += w;
        t *= 1.0 - f.alpha;
    }
    Composite {
        color,
        opacity,
        transmittance: t,
        weights: Vec::new(),
    }
}

/// Gradients `(dL/dα_i, dL/dc_i)` for every fragment given `dL/dC` and `dL/dO`.
///
/// `background` is blended with the residual transmittance, so it contributes
/// `−bg·T_final/(1−α_i)` to each alpha gradient.
pub fn composite_backward(
    fragments: &[Fragment],
    early_stop: bool,
    d_color: &Vec3,
    d_opacity: f64,
    background: &Vec3,
) -> Vec<(f64, Vec3)> {
    let mut out = Vec::new();
    composite_backward_into(fragments, early_stop, d_color, d_opacity, background, &mut out);
    out
}

pub(crate) fn composite_backward_into(
    fragments: &[Fragment],
    early_stop: bool,
    d_color: &Vec3,
    d_opacity: f64,
    background: &Vec3,
    out: &mut Vec<(f64, Vec3)>,
) {
    out.clear();
    out.resize(fragments.len(), (0.0, Vec3::zeros()));

    // forward sweep: transmittance before each used fragment
    let mut ts = Vec::with_capacity(fragments.len());
    let mut t = 1.0;
    for f in fragments {
        if early_stop && t < TRANSMITTANCE_EPS {
            break;
        }
        ts.push(t);
        t *= 1.0 - f.alpha;
    }
    let used = ts.len();

    // reverse sweep with running suffix sums of g·c_j w_j and w_j
    let g_bg = d_color.dot(background);
    let mut suffix = g_bg * t;
    for i in (0..used).rev() {
        let f = &fragments[i];
        let ti = ts[i];
        let w = f.alpha * ti;
        let gc = d_color.dot(&f.color);
        let one_minus = 1.0 - f.alpha;
        // suffix for opacity: Σ_{j>i} w_j = T_{i+1} − T_final
        let r = ti * one_minus - t;
        let d_alpha = gc * ti - suffix / one_minus + d_opacity * (ti - r / one_minus);
        out[i] = (d_alpha, d_color * w);
        suffix += gc * w;
    }
}
