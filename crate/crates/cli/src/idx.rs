//! IDX containers (MNIST layout): big-endian magic, dimension sizes, `u8` payload.

use std::path::Path;

use semcert_core::tensor::ImageTensor;

use crate::error::{CliError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, msg: impl Into<String>) -> CliError {
        CliError::Parse { path: self.path.to_string(), offset, msg: msg.into() }
    }

    fn u32(&mut self) -> Result<u32> {
        let end = self.pos + 4;
        let b = self.bytes.get(self.pos..end).ok_or_else(|| self.err(self.pos, "truncated header"))?;
        self.pos = end;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, want: u32) -> Result<()> {
        let m = self.u32()?;
        if m != want {
            return Err(self.err(0, format!("bad magic 0x{m:08x}, expected 0x{want:08x}")));
        }
        Ok(())
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).ok_or_else(|| self.err(self.pos, "dimension overflow"))?;
        let p = self.bytes.get(self.pos..end).ok_or_else(|| {
            self.err(
                self.bytes.len(),
                format!("truncated payload: need {len} bytes, found {}", self.bytes.len() - self.pos),
            )
        })?;
        self.pos = end;
        Ok(p)
    }
}

/// Parses an image container into `1×W×H` tensors scaled to `[0, 1]`.
///
/// IDX stores rows then columns; row `r`, column `c` becomes pixel `(i, j) = (c, r)`.
pub fn parse_images(bytes: &[u8], path: &str) -> Result<Vec<ImageTensor>> {
    let mut r = Reader { bytes, pos: 0, path };
    r.magic(IMAGES_MAGIC)?;
    let n = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let per = rows.checked_mul(cols).ok_or_else(|| r.err(4, "dimension overflow"))?;
    let total = n.checked_mul(per).ok_or_else(|| r.err(4, "dimension overflow"))?;
    let data = r.payload(total)?;
    if per == 0 {
        return Err(r.err(8, "zero-sized images"));
    }
    data.chunks_exact(per)
        .map(|img| {
            ImageTensor::from_fn(1, cols, rows, |_, i, j| f64::from(img[j * cols + i]) / 255.0).map_err(CliError::from)
        })
        .collect()
}

pub fn parse_labels(bytes: &[u8], path: &str) -> Result<Vec<usize>> {
    let mut r = Reader { bytes, pos: 0, path };
    r.magic(LABELS_MAGIC)?;
    let n = r.u32()? as usize;
    Ok(r.payload(n)?.iter().map(|&b| usize::from(b)).collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    Ok(std::fs::read(path)?)
}

/// Reads images and, when given, the companion label file.
pub fn read_idx(images: &Path, labels: Option<&Path>) -> Result<(Vec<ImageTensor>, Option<Vec<usize>>)> {
    let xs = parse_images(&read(images)?, &images.display().to_string())?;
    let ys = match labels {
        Some(p) => {
            let ys = parse_labels(&read(p)?, &p.display().to_string())?;
            if ys.len() != xs.len() {
                return Err(CliError::Format {
                    path: p.display().to_string(),
                    msg: format!("{} labels for {} images", ys.len(), xs.len()),
                });
            }
            Some(ys)
        }
        None => None,
    };
    Ok((xs, ys))
}

/// Serializes images (single channel) and labels in IDX layout.
pub fn encode_images(xs: &[ImageTensor]) -> Vec<u8> {
    let (w, h) = xs.first().map(|x| (x.width(), x.height())).unwrap_or((0, 0));
    let mut out = Vec::with_capacity(16 + xs.len() * w * h);
    for v in [IMAGES_MAGIC, xs.len() as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for x in xs {
        for j in 0..h {
            for i in 0..w {
                out.push((x.get(0, i, j).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    out
}

pub fn encode_labels(ys: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + ys.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(ys.len() as u32).to_be_bytes());
    out.extend(ys.iter().map(|&y| y as u8));
    out
}
