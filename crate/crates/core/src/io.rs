//! Binary ensemble snapshots: one JSON header line, then the fields as a
//! little-endian `f64` array of grid values, field after field.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{forward_transform, inverse_transform, FourierField};
use crate::grid::{GridSpec, SpectralGrid};

pub const SNAPSHOT_FORMAT: &str = "sg2d-snapshot-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub grid: GridSpec,
    pub profile: String,
    pub seed: u64,
    /// Number of fields in the body.
    pub fields: usize,
    /// Values per field (`M²`).
    pub values_per_field: usize,
    /// Free-form sampler metadata (chain ids, acceptance rates, times).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl SnapshotHeader {
    pub fn new(grid: &SpectralGrid, seed: u64, fields: usize, metadata: serde_json::Value) -> Self {
        Self {
            format: SNAPSHOT_FORMAT.into(),
            grid: *grid.spec(),
            profile: format!("{:?}", grid.profile()).to_lowercase(),
            seed,
            fields,
            values_per_field: grid.len(),
            metadata,
        }
    }
}

/// Writes raw grid values. Every slice must have `header.values_per_field` entries.
pub fn write_snapshot<W: Write>(mut out: W, header: &SnapshotHeader, fields: &[Vec<f64>]) -> Result<()> {
    if fields.len() != header.fields {
        return Err(Error::DimensionMismatch {
            expected: header.fields,
            found: fields.len(),
        });
    }
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for f in fields {
        if f.len() != header.values_per_field {
            return Err(Error::DimensionMismatch {
                expected: header.values_per_field,
                found: f.len(),
            });
        }
        let mut buf = Vec::with_capacity(8 * f.len());
        for x in f {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot<R: BufRead>(mut input: R) -> Result<(SnapshotHeader, Vec<Vec<f64>>)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: SnapshotHeader = serde_json::from_str(line.trim_end())?;
    if header.format != SNAPSHOT_FORMAT {
        return Err(Error::Snapshot(format!("unknown format tag `{}`", header.format)));
    }
    let m = header.grid.points_per_axis;
    if header.values_per_field != m * m {
        return Err(Error::Snapshot(format!(
            "values_per_field {} does not match an {m}x{m} grid",
            header.values_per_field
        )));
    }
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    let expected = 8 * header.fields * header.values_per_field;
    if body.len() != expected {
        return Err(Error::Snapshot(format!("body has {} bytes, expected {expected}", body.len())));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let fields = if header.values_per_field == 0 {
        vec![Vec::new(); header.fields]
    } else {
        values.chunks(header.values_per_field).map(<[f64]>::to_vec).collect()
    };
    Ok((header, fields))
}

/// Spectral convenience wrapper: fields are stored as grid values.
pub fn write_field_snapshot<W: Write>(
    out: W,
    grid: &SpectralGrid,
    seed: u64,
    fields: &[FourierField],
    metadata: serde_json::Value,
) -> Result<()> {
    let header = SnapshotHeader::new(grid, seed, fields.len(), metadata);
    let values: Vec<Vec<f64>> = fields.iter().map(|f| inverse_transform(grid, f)).collect();
    write_snapshot(out, &header, &values)
}

pub fn read_field_snapshot<R: BufRead>(input: R, grid: &SpectralGrid) -> Result<(SnapshotHeader, Vec<FourierField>)> {
    let (header, values) = read_snapshot(input)?;
    if header.grid.points_per_axis != grid.m() {
        return Err(Error::Snapshot(format!(
            "snapshot grid has M = {}, expected {}",
            header.grid.points_per_axis,
            grid.m()
        )));
    }
    let fields = values.iter().map(|v| forward_transform(grid, v)).collect::<Result<_>>()?;
    Ok((header, fields))
}
