//! Field dumps: a flat little-endian binary layout (row-major grid, all
//! components of a point contiguous, 64-bit floats) and CSV with coordinates.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::evolve::{MonitorRecord, MONITOR_COLUMNS};
use crate::grid::GridSpec;
use crate::reduction::{SystemState, NCOMP};
use crate::tensor::SYM4_PAIRS;

/// Column names of the 55 state components.
pub fn state_component_names() -> Vec<String> {
    let pair = |(a, b): (usize, usize)| format!("{a}{b}");
    let mut out: Vec<String> = SYM4_PAIRS.iter().map(|&p| format!("v{}", pair(p))).collect();
    out.extend(SYM4_PAIRS.iter().map(|&p| format!("dtv{}", pair(p))));
    for a in 1..=3 {
        out.extend(SYM4_PAIRS.iter().map(|&p| format!("d{a}v{}", pair(p))));
    }
    out.extend(["w", "u0m1", "u1", "u2", "u3"].map(String::from));
    out
}

pub fn write_binary<W: Write>(mut w: W, data: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 8);
    for x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads exactly `grid.len() · ncomp` values.
pub fn read_binary<R: Read>(mut r: R, grid: &GridSpec, ncomp: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![];
    r.read_to_end(&mut bytes)?;
    let expected = grid.len() * ncomp;
    if bytes.len() != expected * 8 {
        return Err(crate::error::GridError::LengthMismatch { expected, got: bytes.len() / 8 }.into());
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

/// One row per point: `x, y, z` followed by the components.
pub fn write_csv<W: Write>(w: W, grid: &GridSpec, data: &[f64], names: &[String]) -> Result<()> {
    let ncomp = names.len();
    if data.len() != grid.len() * ncomp {
        return Err(crate::error::GridError::LengthMismatch { expected: grid.len() * ncomp, got: data.len() }.into());
    }
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["x".to_string(), "y".into(), "z".into()];
    header.extend_from_slice(names);
    wr.write_record(&header).map_err(csv_err)?;
    for p in 0..grid.len() {
        let x = grid.coords(p);
        let row = x.iter().chain(&data[p * ncomp..(p + 1) * ncomp]).map(|v| format!("{v:e}"));
        wr.write_record(row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads the component columns of a file written by [`write_csv`]; the
/// coordinate columns are ignored.
pub fn read_csv<R: Read>(r: R, grid: &GridSpec, ncomp: usize) -> Result<Vec<f64>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::with_capacity(grid.len() * ncomp);
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        if rec.len() != ncomp + 3 {
            return Err(Error::Format { line, message: format!("expected {} columns, found {}", ncomp + 3, rec.len()) });
        }
        for field in rec.iter().skip(3) {
            out.push(field.trim().parse::<f64>().map_err(|e| Error::Format { line, message: format!("{field:?}: {e}") })?);
        }
    }
    if out.len() != grid.len() * ncomp {
        return Err(crate::error::GridError::LengthMismatch { expected: grid.len() * ncomp, got: out.len() }.into());
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Format { line: pos.line() as usize, message: e.to_string() },
        None => Error::Io(e.to_string()),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Writes a state; `.csv` selects the CSV layout, anything else the binary one.
pub fn save_state(path: &Path, s: &SystemState) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        write_csv(f, &s.grid, &s.data, &state_component_names())
    } else {
        write_binary(f, &s.data)
    }
}

/// Initial data from a dump on `grid`.
pub fn load_state(path: &Path, grid: &GridSpec) -> Result<SystemState> {
    let f = BufReader::new(File::open(path)?);
    let data = if is_csv(path) { read_csv(f, grid, NCOMP)? } else { read_binary(f, grid, NCOMP)? };
    SystemState::new(grid.clone(), data)
}

pub fn write_monitors_csv<W: Write>(w: W, records: &[MonitorRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(MONITOR_COLUMNS).map_err(csv_err)?;
    for r in records {
        wr.write_record(r.values().iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_matrix_csv<W: Write>(w: W, m: &DMatrix<f64>) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..m.nrows() {
        wr.write_record(m.row(i).iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn sample() -> SystemState {
        let g = GridSpec::line(1.0, 6, Boundary::Periodic).unwrap();
        let data = (0..6 * NCOMP).map(|i| (i as f64).sin() * 1e-3 + 1e-300 * i as f64).collect();
        SystemState::new(g, data).unwrap()
    }

    #[test]
    fn names_cover_layout() {
        let n = state_component_names();
        assert_eq!(n.len(), NCOMP);
        assert_eq!(n[0], "v00");
        assert_eq!(n[10], "dtv00");
        assert_eq!(n[20], "d1v00");
        assert_eq!(n[50], "w");
    }

    #[test]
    fn binary_roundtrip_is_bitwise() {
        let s = sample();
        let mut buf = vec![];
        write_binary(&mut buf, &s.data).unwrap();
        assert_eq!(buf.len(), s.data.len() * 8);
        assert_eq!(read_binary(&buf[..], &s.grid, NCOMP).unwrap(), s.data);
        assert!(read_binary(&buf[8..], &s.grid, NCOMP).is_err());
    }

    #[test]
    fn csv_roundtrip_is_bitwise() {
        let s = sample();
        let mut buf = vec![];
        write_csv(&mut buf, &s.grid, &s.data, &state_component_names()).unwrap();
        assert_eq!(read_csv(&buf[..], &s.grid, NCOMP).unwrap(), s.data);
    }

    #[test]
    fn csv_reports_line() {
        let g = GridSpec::line(1.0, 4, Boundary::Periodic).unwrap();
        let text = "x,y,z,a\n0,0,0,1\n0,0,0,oops\n0,0,0,1\n0,0,0,1\n";
        match read_csv(text.as_bytes(), &g, 1) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn monitor_header() {
        let mut buf = vec![];
        write_monitors_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), "t,energy_x,norm_drift,harmonic_residual,eps_consistency,a0_min_eig");
    }
}
