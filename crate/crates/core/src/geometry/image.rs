use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major float image with 1 (mask/opacity) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "{}x{}x{} image needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural("image contains non-finite values".into()));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Round every value to the nearest 8-bit level, as a PPM round trip would.
    pub fn quantized(&self) -> Image {
        Image {
            data: self.data.iter().map(|&v| to_u8(v) as f64 / 255.0).collect(),
            ..self.clone()
        }
    }

    /// Binary PPM (P6, maxval 255). Single-channel images are written as gray.
    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(self.width * self.height * 3 + 32);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height).unwrap();
        for px in self.data.chunks(self.channels) {
            match self.channels {
                1 => out.extend_from_slice(&[to_u8(px[0]); 3]),
                _ => out.extend(px[..3].iter().map(|&v| to_u8(v))),
            }
        }
        std::fs::write(path, out).map_err(|e| Error::file(path, e))
    }

    /// Reads a P6 file into `channels` (1 keeps the red channel, 3 keeps RGB).
    pub fn read_ppm(path: &Path, channels: usize) -> Result<Image> {
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        let mut reader = BufReader::new(file);
        let mut header = Vec::new();
        while header.len() < 4 {
            let mut line = String::new();
            if reader.read_line(&mut line).map_err(|e| Error::file(path, e))? == 0 {
                return Err(Error::Parse {
                    line: header.len() + 1,
                    message: "truncated PPM header".into(),
                });
            }
            let line = line.split('#').next().unwrap_or("");
            header.extend(line.split_whitespace().map(str::to_owned));
        }
        let bad = |message: &str| Error::Parse {
            line: 1,
            message: format!("{}: {message}", path.display()),
        };
        if header[0] != "P6" {
            return Err(bad("only binary P6 PPM is supported"));
        }
        let nums: Vec<usize> = header[1..4]
            .iter()
            .map(|t| t.parse().map_err(|_| bad("invalid header number")))
            .collect::<Result<_>>()?;
        let (w, h, maxval) = (nums[0], nums[1], nums[2]);
        if maxval != 255 {
            return Err(bad("maxval must be 255"));
        }
        let mut bytes = vec![0u8; w * h * 3];
        reader
            .read_exact(&mut bytes)
            .map_err(|e| Error::file(path, e))?;
        let data = bytes
            .chunks(3)
            .flat_map(|px| px[..channels].iter().map(|&b| b as f64 / 255.0).collect::<Vec<_>>())
            .collect();
        Image::from_data(w, h, channels, data)
    }

    /// Raw little-endian f32 values, row-major, no header.
    pub fn write_f32_sidecar(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect();
        std::fs::write(path, bytes).map_err(|e| Error::file(path, e))
    }

    pub fn read_f32_sidecar(path: &Path, width: usize, height: usize, channels: usize) -> Result<Image> {
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Image::from_data(width, height, channels, data)
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
