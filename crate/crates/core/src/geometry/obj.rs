//! ASCII OBJ subset: `v x y z [r g b]` and triangular `f i j k` lines.
//!
//! Vertex colors are written as squashed values in `[0, 1]` and converted back
//! to raw logits on load. Faces are 1-indexed on disk and 0-indexed in memory.

use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, Vec3};
use crate::appearance::{logit, vertex_color};
use crate::error::{Error, Result};

/// Formats `v` with 9 significant digits, trailing zeros trimmed.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

pub fn write_obj_string(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 48 + mesh.faces.len() * 24);
    let with_color = mesh.colors.len() == mesh.vertices.len() && !mesh.colors.is_empty();
    for (i, v) in mesh.vertices.iter().enumerate() {
        write!(s, "v {} {} {}", fmt_sig9(v.x), fmt_sig9(v.y), fmt_sig9(v.z)).unwrap();
        if with_color {
            let c = vertex_color(&mesh.colors[i]);
            write!(s, " {} {} {}", fmt_sig9(c.x), fmt_sig9(c.y), fmt_sig9(c.z)).unwrap();
        }
        s.push('\n');
    }
    for f in &mesh.faces {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    s
}

pub fn save_obj(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_obj_string(mesh)).map_err(|e| Error::file(path, e))
}

pub fn load_obj(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut colors = Vec::new();
    let mut raw_faces: Vec<(usize, [i64; 3])> = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        let rest: Vec<&str> = tokens.collect();
        match tag {
            "v" => {
                let nums = rest
                    .iter()
                    .map(|t| t.parse::<f64>().map_err(|_| err(format!("invalid number `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                match nums.len() {
                    3 | 6 => {}
                    n => return Err(err(format!("vertex needs 3 or 6 values, found {n}"))),
                }
                vertices.push(Vec3::new(nums[0], nums[1], nums[2]));
                if nums.len() == 6 {
                    colors.push((vertices.len() - 1, Vec3::new(nums[3], nums[4], nums[5])));
                }
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(err(format!(
                        "only triangular faces are supported, found {} indices",
                        rest.len()
                    )));
                }
                let mut idx = [0i64; 3];
                for (k, t) in rest.iter().enumerate() {
                    let head = t.split('/').next().unwrap_or("");
                    idx[k] = head
                        .parse()
                        .map_err(|_| err(format!("invalid face index `{t}`")))?;
                    if idx[k] == 0 {
                        return Err(err("face index 0 is invalid in OBJ".into()));
                    }
                }
                raw_faces.push((line_no, idx));
            }
            "vc" => return Err(err("`vc` color lines are not supported; use `v x y z r g b`".into())),
            "vn" | "vt" | "o" | "g" | "s" | "usemtl" | "mtllib" | "l" => {}
            other => return Err(err(format!("unknown OBJ statement `{other}`"))),
        }
    }

    let n = vertices.len() as i64;
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (line_no, idx) in raw_faces {
        let mut f = [0u32; 3];
        for k in 0..3 {
            let i = if idx[k] < 0 { n + idx[k] } else { idx[k] - 1 };
            if i < 0 || i >= n {
                return Err(Error::Structural(format!(
                    "line {line_no}: face index {} out of range for {n} vertices",
                    idx[k]
                )));
            }
            f[k] = i as u32;
        }
        faces.push(f);
    }

    let colors = if colors.is_empty() {
        Vec::new()
    } else if colors.len() == vertices.len() {
        colors.into_iter().map(|(_, c)| c.map(logit)).collect()
    } else {
        return Err(Error::Structural(format!(
            "{} of {} vertices carry colors; either all or none must",
            colors.len(),
            vertices.len()
        )));
    };
    Mesh::new(vertices, faces, colors)
}
