//! Images as flat pixel vectors and binary object/background masks.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: &[u8; 6] = b"SIIMG1";

/// A grayscale image stored row-major as a flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVector {
    values: Vec<f64>,
    height: usize,
    width: usize,
}

impl ImageVector {
    pub fn new(values: Vec<f64>, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || height * width != values.len() {
            return Err(Error::Argument(format!(
                "image shape {height}x{width} does not match {} values",
                values.len()
            )));
        }
        if values.len() < 4 {
            return Err(Error::Argument(format!(
                "image needs at least 4 pixels, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("pixel {i} is not finite")));
        }
        Ok(Self {
            values,
            height,
            width,
        })
    }

    /// Square image from `n` values; `n` must be a perfect square.
    pub fn square(values: Vec<f64>) -> Result<Self> {
        let side = square_side(values.len())
            .ok_or_else(|| Error::Argument(format!("{} is not a perfect square", values.len())))?;
        Self::new(values, side, side)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same shape, different pixel values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.height, self.width)
    }

    /// Reads either the binary `SIIMG1` format or plain CSV (one image row per line).
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(IMAGE_MAGIC) {
            Self::decode_binary(&bytes)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Format(format!("{} is neither SIIMG1 nor UTF-8 CSV", path.display())))?;
            Self::parse_csv(&text)
        }
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode_binary()).map_err(|e| Error::io(path, e))
    }

    pub fn encode_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + 8 * self.values.len());
        out.extend_from_slice(IMAGE_MAGIC);
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 14 || !bytes.starts_with(IMAGE_MAGIC) {
            return Err(Error::Format("missing SIIMG1 header".into()));
        }
        let height = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let width = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let body = &bytes[14..];
        if body.len() != 8 * height * width {
            return Err(Error::Format(format!(
                "SIIMG1 body has {} bytes, expected {} for {height}x{width}",
                body.len(),
                8 * height * width
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(values, height, width)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut height = 0;
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        Error::Format(format!("line {}: bad value {s:?}: {e}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Format(format!(
                        "line {}: expected {w} columns, got {}",
                        lineno + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            values.extend(row);
            height += 1;
        }
        Self::new(values, height, width.unwrap_or(0))
    }
}

pub(crate) fn square_side(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

/// Per-pixel binary labels: `true` marks the object, `false` the background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentationMask {
    labels: Vec<bool>,
}

impl SegmentationMask {
    pub fn new(labels: Vec<bool>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn object(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().enumerate().filter(|(_, &l)| l).map(|(i, _)| i)
    }

    pub fn background(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().enumerate().filter(|(_, &l)| !l).map(|(i, _)| i)
    }

    pub fn object_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Run-length encoding starting with the length of the leading background run,
    /// e.g. `0,0,1,1,1,0` becomes `[2, 3, 1]`.
    pub fn run_lengths(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut count = 0;
        for &l in &self.labels {
            if l == current {
                count += 1;
            } else {
                runs.push(count);
                current = l;
                count = 1;
            }
        }
        runs.push(count);
        runs
    }
}
