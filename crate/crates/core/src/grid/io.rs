use std::io::{Read, Write};

use super::{BoundaryMode, FieldState, GridSpec};
use crate::error::{QmxError, Result};

pub const DUMP_MAGIC: &[u8; 4] = b"QMXF";
pub const DUMP_VERSION: u32 = 1;
pub const DUMP_HEADER_LEN: usize = 64;

fn mode_code(m: BoundaryMode) -> u8 {
    match m {
        BoundaryMode::Periodic => 0,
        BoundaryMode::PecBottomOpenTop => 1,
        BoundaryMode::Open => 2,
    }
}

fn mode_from_code(c: u8) -> Result<BoundaryMode> {
    Ok(match c {
        0 => BoundaryMode::Periodic,
        1 => BoundaryMode::PecBottomOpenTop,
        2 => BoundaryMode::Open,
        _ => return Err(QmxError::Io(format!("unknown boundary mode code {c}"))),
    })
}

/// Writes a field dump.
///
/// Header (64 bytes, little endian): magic `QMXF`, version `u32`, cell
/// counts `3 x u32`, spacing `3 x f64`, time `f64`, boundary mode codes
/// `3 x u8`, zero padding. Body: node-major `f64`
/// values, six components per node, first axis fastest.
pub fn write_field_dump<W: Write>(mut w: W, state: &FieldState) -> Result<()> {
    let g = &state.grid;
    let mut header = [0u8; DUMP_HEADER_LEN];
    header[0..4].copy_from_slice(DUMP_MAGIC);
    header[4..8].copy_from_slice(&DUMP_VERSION.to_le_bytes());
    for a in 0..3 {
        let off = 8 + 4 * a;
        header[off..off + 4].copy_from_slice(&(g.cells()[a] as u32).to_le_bytes());
        let off = 20 + 8 * a;
        header[off..off + 8].copy_from_slice(&g.spacing()[a].to_le_bytes());
    }
    header[44..52].copy_from_slice(&state.time.to_le_bytes());
    for a in 0..3 {
        header[52 + a] = mode_code(g.modes()[a]);
    }
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(state.values.len() * 48);
    for v in &state.values {
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a dump written by [`write_field_dump`]. The header carries no
/// origin, so the returned grid starts at zero.
pub fn read_field_dump<R: Read>(mut r: R) -> Result<FieldState> {
    let mut header = [0u8; DUMP_HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[0..4] != DUMP_MAGIC {
        return Err(QmxError::Io("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != DUMP_VERSION {
        return Err(QmxError::Io(format!("unsupported dump version {version}")));
    }
    let mut cells = [0usize; 3];
    let mut spacing = [0.0; 3];
    let mut modes = [BoundaryMode::Periodic; 3];
    for a in 0..3 {
        let off = 8 + 4 * a;
        cells[a] = u32::from_le_bytes(header[off..off + 4].try_into().unwrap()) as usize;
        let off = 20 + 8 * a;
        spacing[a] = f64::from_le_bytes(header[off..off + 8].try_into().unwrap());
        modes[a] = mode_from_code(header[52 + a])?;
    }
    let time = f64::from_le_bytes(header[44..52].try_into().unwrap());
    let grid = GridSpec::new(cells, spacing, [0.0; 3], modes)?;
    let mut body = vec![0u8; grid.node_count() * 48];
    r.read_exact(&mut body)?;
    let values = body
        .chunks_exact(48)
        .map(|c| std::array::from_fn(|k| f64::from_le_bytes(c[8 * k..8 * k + 8].try_into().unwrap())))
        .collect();
    FieldState::new(grid, time, values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormCsvRow {
    pub t: f64,
    pub norm_kind: String,
    pub order: usize,
    pub gamma: f64,
    pub value: f64,
}

/// CSV with header `t,norm_kind,order,gamma,value`.
pub fn write_norm_csv<W: Write>(mut w: W, rows: &[NormCsvRow]) -> Result<()> {
    writeln!(w, "t,norm_kind,order,gamma,value")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.t, r.norm_kind, r.order, r.gamma, r.value)?;
    }
    Ok(())
}
