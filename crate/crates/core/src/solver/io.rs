//! Value-grid files.
//!
//! CSV: header `x1,...,xN,t,value`, one row per (time slice, node), slices in
//! increasing time and nodes in row-major order with the last axis fastest.
//!
//! Binary (little-endian):
//!
//! | field | type |
//! |-------|------|
//! | magic `SHJBGRID` | 8 bytes |
//! | version (= 1) | u32 |
//! | N | u32 |
//! | per axis: node count, lo, hi | u64, f64, f64 |
//! | slice count | u64 |
//! | dt, horizon | f64, f64 |
//! | values `[slice][node]` | f64 each |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{Lattice, ValueGrid};

const MAGIC: &[u8; 8] = b"SHJBGRID";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GridIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed grid file: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridFormat {
    Csv,
    Binary,
}

impl GridFormat {
    /// `.csv` selects CSV; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => GridFormat::Csv,
            _ => GridFormat::Binary,
        }
    }
}

pub fn write_grid(grid: &ValueGrid, path: &Path) -> Result<(), GridIoError> {
    let file = BufWriter::new(File::create(path)?);
    match GridFormat::from_path(path) {
        GridFormat::Csv => write_csv(grid, file),
        GridFormat::Binary => write_binary(grid, file),
    }
}

pub fn read_grid(path: &Path) -> Result<ValueGrid, GridIoError> {
    let file = BufReader::new(File::open(path)?);
    match GridFormat::from_path(path) {
        GridFormat::Csv => read_csv(file),
        GridFormat::Binary => read_binary(file),
    }
}

pub fn write_csv<W: Write>(grid: &ValueGrid, out: W) -> Result<(), GridIoError> {
    let lat = &grid.lattice;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=lat.dim()).map(|i| format!("x{i}")).collect();
    header.push("t".into());
    header.push("value".into());
    w.write_record(&header)?;
    let nodes: Vec<Vec<String>> = (0..lat.node_count())
        .map(|i| lat.node(i).iter().map(|v| v.to_string()).collect())
        .collect();
    for n in 0..grid.slices() {
        let t = grid.time(n).to_string();
        for (i, coords) in nodes.iter().enumerate() {
            let mut rec = coords.clone();
            rec.push(t.clone());
            rec.push(grid.value(i, n).to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<ValueGrid, GridIoError> {
    let mut r = csv::Reader::from_reader(input);
    let dim = r
        .headers()?
        .len()
        .checked_sub(2)
        .filter(|d| *d > 0)
        .ok_or_else(|| GridIoError::Format("expected columns x1..xN,t,value".into()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| GridIoError::Format(format!("line {}: {e}", rows.len() + 2)))?;
        if row.len() != dim + 2 {
            return Err(GridIoError::Format(format!("line {}: wrong field count", rows.len() + 2)));
        }
        rows.push(row);
    }
    let distinct = |col: usize| {
        let mut v: Vec<f64> = rows.iter().map(|r| r[col]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let axes: Vec<Vec<f64>> = (0..dim).map(distinct).collect();
    let times = distinct(dim);
    if axes.iter().any(|a| a.len() < 2) || times.is_empty() {
        return Err(GridIoError::Format("grid needs two nodes per axis".into()));
    }
    let lattice = Lattice::from_shape(
        axes.iter().map(|a| a[0]).collect(),
        axes.iter().map(|a| *a.last().unwrap()).collect(),
        axes.iter().map(|a| a.len()).collect(),
    );
    let m = lattice.node_count();
    if rows.len() != m * times.len() {
        return Err(GridIoError::Format(format!(
            "{} rows for {} nodes x {} slices",
            rows.len(),
            m,
            times.len()
        )));
    }
    let horizon = *times.last().unwrap();
    let steps = times.len() - 1;
    Ok(ValueGrid {
        dt: if steps == 0 { horizon } else { horizon / steps as f64 },
        horizon,
        values: rows.iter().map(|r| r[dim + 1]).collect(),
        lattice,
        clamped_feet: 0,
    })
}

pub fn write_binary<W: Write>(grid: &ValueGrid, mut out: W) -> Result<(), GridIoError> {
    let lat = &grid.lattice;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(lat.dim() as u32).to_le_bytes())?;
    for i in 0..lat.dim() {
        out.write_all(&(lat.shape[i] as u64).to_le_bytes())?;
        out.write_all(&lat.lo[i].to_le_bytes())?;
        out.write_all(&lat.hi[i].to_le_bytes())?;
    }
    out.write_all(&(grid.slices() as u64).to_le_bytes())?;
    out.write_all(&grid.dt.to_le_bytes())?;
    out.write_all(&grid.horizon.to_le_bytes())?;
    for v in &grid.values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn take<const K: usize, R: Read>(input: &mut R) -> Result<[u8; K], GridIoError> {
    let mut buf = [0u8; K];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_binary<R: Read>(mut input: R) -> Result<ValueGrid, GridIoError> {
    if &take::<8, _>(&mut input)? != MAGIC {
        return Err(GridIoError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut input)?);
    if version != VERSION {
        return Err(GridIoError::Format(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(take(&mut input)?) as usize;
    let (mut shape, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..dim {
        shape.push(u64::from_le_bytes(take(&mut input)?) as usize);
        lo.push(f64::from_le_bytes(take(&mut input)?));
        hi.push(f64::from_le_bytes(take(&mut input)?));
    }
    if shape.iter().any(|n| *n < 2) {
        return Err(GridIoError::Format("grid needs two nodes per axis".into()));
    }
    let slices = u64::from_le_bytes(take(&mut input)?) as usize;
    let dt = f64::from_le_bytes(take(&mut input)?);
    let horizon = f64::from_le_bytes(take(&mut input)?);
    let lattice = Lattice::from_shape(lo, hi, shape);
    let count = lattice.node_count() * slices;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(f64::from_le_bytes(take(&mut input)?));
    }
    Ok(ValueGrid { lattice, dt, horizon, values, clamped_feet: 0 })
}
