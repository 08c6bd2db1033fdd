//! UDFG: binary sparse-grid files.
//!
//! Little-endian throughout. A 62-byte header
//!
//! | offset | size | field                    |
//! |-------:|-----:|--------------------------|
//! | 0      | 4    | magic `UDFG`             |
//! | 4      | 4    | version `u32` = 1        |
//! | 8      | 1    | kind code `u8` (0..=7)   |
//! | 9      | 1    | flipped `u8` (0 or 1)    |
//! | 10     | 12   | dims `3 x u32`           |
//! | 22     | 24   | origin `3 x f64`, meters |
//! | 46     | 8    | voxel size `f64`, meters |
//! | 54     | 8    | value count `u64`        |
//!
//! is followed by `value_count` 16-byte records `(i u32, j u32, k u32, value f32)`
//! in strictly increasing `(i, j, k)` order. Values are the reported values
//! (flipped when the flag is set) in voxel units.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::grid::{value_in_range, DFKind, GridSpec, SparseDFGrid, VoxelIndex};

pub const GRID_MAGIC: &[u8; 4] = b"UDFG";
pub const GRID_VERSION: u32 = 1;
pub const GRID_HEADER_LEN: usize = 62;
pub const GRID_RECORD_LEN: usize = 16;

/// Decoded UDFG header.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridFileHeader {
    pub kind: DFKind,
    pub flipped: bool,
    pub spec: GridSpec,
    pub value_count: u64,
}

/// Nearest `f32` to `v` that still lies in the allowed range. Rounding can
/// push values onto an open bound (e.g. just below 3 rounding to 3.0).
fn to_f32_in_range(v: f64, signed: bool, flipped: bool) -> f32 {
    let w = v as f32;
    if value_in_range(w as f64, signed, flipped) {
        return w;
    }
    if w == 0.0 {
        // unsigned flipped values are strictly positive
        return f32::from_bits(1);
    }
    // one ulp toward zero
    f32::from_bits(w.to_bits() - 1)
}

pub fn encode_grid(grid: &SparseDFGrid) -> Vec<u8> {
    let spec = grid.spec();
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + grid.len() * GRID_RECORD_LEN);
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    out.push(grid.kind().code());
    out.push(grid.is_flipped() as u8);
    for d in spec.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for o in spec.origin.to_array() {
        out.extend_from_slice(&o.to_le_bytes());
    }
    out.extend_from_slice(&spec.voxel_size.to_le_bytes());
    out.extend_from_slice(&(grid.len() as u64).to_le_bytes());
    let signed = grid.kind().is_signed();
    for (idx, v) in grid.iter() {
        out.extend_from_slice(&idx.i.to_le_bytes());
        out.extend_from_slice(&idx.j.to_le_bytes());
        out.extend_from_slice(&idx.k.to_le_bytes());
        out.extend_from_slice(&to_f32_in_range(v, signed, grid.is_flipped()).to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

pub fn parse_grid_header(bytes: &[u8]) -> Result<GridFileHeader> {
    if bytes.len() < GRID_HEADER_LEN {
        return Err(Error::parse(
            bytes.len() as u64,
            format!("truncated header: {} of {GRID_HEADER_LEN} bytes", bytes.len()),
        ));
    }
    if &bytes[0..4] != GRID_MAGIC {
        return Err(Error::parse(0, "bad magic, expected 'UDFG'"));
    }
    let version = u32_at(bytes, 4);
    if version != GRID_VERSION {
        return Err(Error::parse(4, format!("unsupported version {version}")));
    }
    let kind =
        DFKind::from_code(bytes[8]).ok_or_else(|| Error::parse(8, format!("kind code {} out of range", bytes[8])))?;
    let flipped = match bytes[9] {
        0 => false,
        1 => true,
        f => return Err(Error::parse(9, format!("flipped flag {f} is not 0 or 1"))),
    };
    let dims = [u32_at(bytes, 10), u32_at(bytes, 14), u32_at(bytes, 18)];
    let origin = Point3::new(f64_at(bytes, 22), f64_at(bytes, 30), f64_at(bytes, 38));
    let voxel_size = f64_at(bytes, 46);
    let spec = GridSpec::new(origin, voxel_size, dims).map_err(|e| Error::parse(10, e.to_string()))?;
    let value_count = u64::from_le_bytes(bytes[54..62].try_into().unwrap());
    Ok(GridFileHeader {
        kind,
        flipped,
        spec,
        value_count,
    })
}

pub fn parse_grid(bytes: &[u8]) -> Result<SparseDFGrid> {
    let header = parse_grid_header(bytes)?;
    let payload = bytes.len() - GRID_HEADER_LEN;
    let expected = header
        .value_count
        .checked_mul(GRID_RECORD_LEN as u64)
        .ok_or_else(|| Error::parse(54, "value count overflows"))?;
    if (payload as u64) < expected {
        let whole = payload / GRID_RECORD_LEN;
        return Err(Error::parse(
            (GRID_HEADER_LEN + whole * GRID_RECORD_LEN) as u64,
            format!("truncated records: {whole} of {} present", header.value_count),
        ));
    }
    if payload as u64 > expected {
        return Err(Error::parse(
            (GRID_HEADER_LEN as u64) + expected,
            "trailing bytes after the last record",
        ));
    }

    let signed = header.kind.is_signed();
    let mut values = BTreeMap::new();
    let mut prev: Option<VoxelIndex> = None;
    for r in 0..header.value_count as usize {
        let at = GRID_HEADER_LEN + r * GRID_RECORD_LEN;
        let idx = VoxelIndex::new(u32_at(bytes, at), u32_at(bytes, at + 4), u32_at(bytes, at + 8));
        let v = f32::from_le_bytes(bytes[at + 12..at + 16].try_into().unwrap()) as f64;
        if let Some(p) = prev {
            if idx == p {
                return Err(Error::parse(at as u64, format!("duplicate key {idx:?}")));
            }
            if idx < p {
                return Err(Error::parse(
                    at as u64,
                    format!("unsorted records: {idx:?} after {p:?}"),
                ));
            }
        }
        if !header.spec.contains(idx) {
            return Err(Error::parse(
                at as u64,
                format!("key {idx:?} outside dims {:?}", header.spec.dims),
            ));
        }
        if !value_in_range(v, signed, header.flipped) {
            return Err(Error::parse(
                (at + 12) as u64,
                format!("value {v} out of range for {}", header.kind),
            ));
        }
        values.insert(idx, v);
        prev = Some(idx);
    }
    SparseDFGrid::from_reported(header.spec, header.kind, header.flipped, values)
        .map_err(|e| Error::parse(GRID_HEADER_LEN as u64, e.to_string()))
}

pub fn read_grid(path: &Path) -> Result<SparseDFGrid> {
    parse_grid(&fs::read(path)?)
}

pub fn write_grid(grid: &SparseDFGrid, path: &Path) -> Result<()> {
    fs::write(path, encode_grid(grid))?;
    Ok(())
}
