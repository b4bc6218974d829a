//! Binary tensor (`SEMT1 K W H`) and linear-weight (`SEMW1 C K W H`) files: an
//! ASCII header line followed by little-endian `f64` values.

use std::path::Path;

use semcert_core::classifiers::LinearClassifier;
use semcert_core::tensor::ImageTensor;

use crate::error::{CliError, Result};

fn format_err(path: &str, msg: impl Into<String>) -> CliError {
    CliError::Format { path: path.to_string(), msg: msg.into() }
}

/// Splits off the header line and parses its tag and sizes.
fn header<'a>(bytes: &'a [u8], path: &str, tag: &str, fields: usize) -> Result<(Vec<usize>, &'a [u8])> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| format_err(path, "missing header line"))?;
    let line = std::str::from_utf8(&bytes[..nl]).map_err(|_| format_err(path, "header is not ASCII"))?;
    let mut parts = line.split_ascii_whitespace();
    let found = parts.next().unwrap_or("");
    if found != tag {
        return Err(format_err(path, format!("unsupported version {found:?}, expected {tag}")));
    }
    let dims: Vec<usize> =
        parts.map(|p| p.parse().map_err(|_| format_err(path, format!("bad size {p:?}")))).collect::<Result<_>>()?;
    if dims.len() != fields {
        return Err(format_err(path, format!("{tag} header needs {fields} sizes, found {}", dims.len())));
    }
    Ok((dims, &bytes[nl + 1..]))
}

fn reals(payload: &[u8], expected: usize, path: &str) -> Result<Vec<f64>> {
    if payload.len() != expected * 8 {
        return Err(format_err(
            path,
            format!("payload length mismatch: expected {} bytes, found {}", expected * 8, payload.len()),
        ));
    }
    Ok(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    Ok(std::fs::read(path)?)
}

pub fn decode_tensor(bytes: &[u8], path: &str) -> Result<ImageTensor> {
    let (d, payload) = header(bytes, path, "SEMT1", 3)?;
    let n = d[0]
        .checked_mul(d[1])
        .and_then(|v| v.checked_mul(d[2]))
        .ok_or_else(|| format_err(path, "dimension overflow"))?;
    let data = reals(payload, n, path)?;
    Ok(ImageTensor::new(d[0], d[1], d[2], data)?)
}

pub fn encode_tensor(x: &ImageTensor) -> Vec<u8> {
    let mut out = format!("SEMT1 {} {} {}\n", x.channels(), x.width(), x.height()).into_bytes();
    for v in x.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_tensor(path: &Path) -> Result<ImageTensor> {
    decode_tensor(&read(path)?, &path.display().to_string())
}

pub fn write_tensor(x: &ImageTensor, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, encode_tensor(x))?)
}

pub fn decode_linear(bytes: &[u8], path: &str) -> Result<LinearClassifier> {
    let (d, payload) = header(bytes, path, "SEMW1", 4)?;
    let (c, k, w, h) = (d[0], d[1], d[2], d[3]);
    let dim = k.checked_mul(w).and_then(|v| v.checked_mul(h)).ok_or_else(|| format_err(path, "dimension overflow"))?;
    let nw = c.checked_mul(dim).ok_or_else(|| format_err(path, "dimension overflow"))?;
    let mut vals = reals(payload, nw + c, path)?;
    if let Some(p) = vals.iter().position(|v| !v.is_finite()) {
        return Err(format_err(path, format!("non-finite value at entry {p}")));
    }
    let bias = vals.split_off(nw);
    Ok(LinearClassifier::new(c, (k, w, h), vals, bias)?)
}

pub fn encode_linear(c: &LinearClassifier) -> Vec<u8> {
    let (k, w, h) = c.shape();
    let mut out = format!("SEMW1 {} {k} {w} {h}\n", c.bias().len()).into_bytes();
    for v in c.weights().iter().chain(c.bias()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_linear_classifier(path: &Path) -> Result<LinearClassifier> {
    decode_linear(&read(path)?, &path.display().to_string())
}

pub fn write_linear_classifier(c: &LinearClassifier, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, encode_linear(c))?)
}
