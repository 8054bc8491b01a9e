use std::fmt::Write as _;

use super::{Mat3, Vec3};
use crate::error::{Error, Result};

/// Pinhole camera in the OpenCV convention: x right, y down, z forward.
///
/// `rotation` and `translation` map world points into camera space.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rotation: Mat3,
        translation: Vec3,
        focal: (f64, f64),
        principal: (f64, f64),
        resolution: (usize, usize),
        near: f64,
        far: f64,
    ) -> Result<Self> {
        let cam = Camera {
            rotation,
            translation,
            fx: focal.0,
            fy: focal.1,
            cx: principal.0,
            cy: principal.1,
            width: resolution.0,
            height: resolution.1,
            near,
            far,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let err = (self.rotation.transpose() * self.rotation - Mat3::identity()).abs().max();
        if !(err <= 1e-6) {
            return Err(Error::Structural(format!(
                "camera rotation is not orthonormal (|RᵀR − I| = {err:e})"
            )));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::Structural(format!(
                "camera clip range must satisfy 0 < near < far, got near={} far={}",
                self.near, self.far
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Structural("camera resolution must be non-zero".into()));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`; `up` only fixes the roll.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        focal: f64,
        width: usize,
        height: usize,
        near: f64,
        far: f64,
    ) -> Result<Self> {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(&up);
        if right.norm() < 1e-9 {
            // up parallel to the view direction: pick any perpendicular axis
            let alt = if forward.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            right = forward.cross(&alt);
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Camera::new(
            rotation,
            translation,
            (focal, focal),
            (width as f64 / 2.0, height as f64 / 2.0),
            (width, height),
            near,
            far,
        )
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Returns `(u, v, z)` with `z` the camera-space depth. `z <= 0` is returned
    /// as is; callers cull.
    pub fn project(&self, p: &Vec3) -> (f64, f64, f64) {
        let c = self.to_camera(p);
        (
            self.fx * c.x / c.z + self.cx,
            self.fy * c.y / c.z + self.cy,
            c.z,
        )
    }

    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vec3 {
        let c = Vec3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z);
        self.rotation.transpose() * (c - self.translation)
    }

    /// Camera center in world space.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    /// Unit world-space direction of the ray through image point `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        let d = Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        (self.rotation.transpose() * d).normalize()
    }

    /// Number of pixels.
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// One-line text form: `fx fy cx cy w h near far r00..r22 t0 t1 t2`.
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{} {} {} {} {} {} {} {}",
            self.fx, self.fy, self.cx, self.cy, self.width, self.height, self.near, self.far
        )
        .unwrap();
        for r in 0..3 {
            for c in 0..3 {
                write!(s, " {}", self.rotation[(r, c)]).unwrap();
            }
        }
        for k in 0..3 {
            write!(s, " {}", self.translation[k]).unwrap();
        }
        s
    }

    pub fn from_line(line: &str, line_no: usize) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 20 {
            return Err(parse_err(format!(
                "expected 20 camera fields, found {}",
                tokens.len()
            )));
        }
        let mut vals = [0.0f64; 20];
        for (i, t) in tokens.iter().enumerate() {
            vals[i] = t
                .parse()
                .map_err(|_| parse_err(format!("invalid number `{t}`")))?;
        }
        let dim = |v: f64, name: &str| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(parse_err(format!("{name} must be a positive integer, got {v}")))
            }
        };
        let rotation = Mat3::from_row_slice(&vals[8..17]);
        let translation = Vec3::new(vals[17], vals[18], vals[19]);
        Camera::new(
            rotation,
            translation,
            (vals[0], vals[1]),
            (vals[2], vals[3]),
            (dim(vals[4], "width")?, dim(vals[5], "height")?),
            vals[6],
            vals[7],
        )
        .map_err(|e| parse_err(e.to_string()))
    }
}

/// Writes one camera per line.
pub fn write_cameras(path: &std::path::Path, cameras: &[Camera]) -> Result<()> {
    let mut s = String::new();
    for c in cameras {
        s.push_str(&c.to_line());
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::file(path, e))
}

pub fn read_cameras(path: &std::path::Path) -> Result<Vec<Camera>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| Camera::from_line(l, i + 1))
        .collect()
}
