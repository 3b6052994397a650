//! Instance files: one JSON header line, then little-endian `f64` blocks for
//! `ξ₁` (column-major `N × s1`), `ξ₂` (column-major `N × s2`) and the
//! reference parameters (length `n`).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{GanConfig, GanSaaInstance, SampleSet};
use crate::error::{Error, Result};

const FORMAT: &str = "gan-saa-instance/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    config: GanConfig,
    sample_seed: u64,
}

fn put_col_major<W: Write>(out: &mut W, rows: &[f64], count: usize, cols: usize) -> Result<()> {
    for c in 0..cols {
        for r in 0..count {
            out.write_all(&rows[r * cols + c].to_le_bytes())?;
        }
    }
    Ok(())
}

fn get_f64s<R: Read>(input: &mut R, len: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * len];
    input.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated sample block: {e}")))?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

fn from_col_major(cols_data: &[f64], count: usize, cols: usize) -> Vec<f64> {
    let mut rows = vec![0.0; count * cols];
    for c in 0..cols {
        for r in 0..count {
            rows[r * cols + c] = cols_data[c * count + r];
        }
    }
    rows
}

pub fn write_instance<W: Write>(instance: &GanSaaInstance, mut out: W) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        config: instance.config.clone(),
        sample_seed: instance.samples.seed,
    };
    let line = serde_json::to_string(&header)?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    let sh = instance.shape;
    put_col_major(&mut out, &instance.samples.xi1, instance.samples.count, sh.s1)?;
    put_col_major(&mut out, &instance.samples.xi2, instance.samples.count, sh.s2)?;
    for v in &instance.x_ref {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_instance<R: Read>(mut input: R) -> Result<GanSaaInstance> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        input.read_exact(&mut byte).map_err(|_| Error::Format("missing header line".into()))?;
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
        if line.len() > 1 << 20 {
            return Err(Error::Format("header line too long".into()));
        }
    }
    let header: Header = serde_json::from_slice(&line).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::Format(format!("unsupported format `{}`", header.format)));
    }
    let config = header.config;
    let shape = config.shape()?;
    let count = config.n_samples;
    let xi1 = from_col_major(&get_f64s(&mut input, count * shape.s1)?, count, shape.s1);
    let xi2 = from_col_major(&get_f64s(&mut input, count * shape.s2)?, count, shape.s2);
    let x_ref = get_f64s(&mut input, shape.n())?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after sample blocks".into()));
    }
    if xi1.iter().chain(&xi2).chain(&x_ref).any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite sample value".into()));
    }
    Ok(GanSaaInstance {
        config,
        shape,
        samples: SampleSet { xi1, xi2, count, seed: header.sample_seed },
        x_ref,
    })
}
