//! Dataset CSV files and atomic output.
//!
//! A dataset row holds the nine components of `F` (row-major), the nine
//! components of `Ḟ`, and the six Voigt components of the stress.

use std::io::{Read, Write};
use std::path::Path;

use crate::continuum::{kinematics_from, DeformationState};
use crate::error::{Error, Result};
use crate::tensor::{SymTensor3, Tensor3};

const INDEX: [&str; 9] = ["11", "12", "13", "21", "22", "23", "31", "32", "33"];
pub const STRESS_COLUMNS: [&str; 6] = ["S11", "S22", "S33", "S23", "S13", "S12"];

pub fn dataset_header() -> Vec<String> {
    INDEX
        .iter()
        .map(|i| format!("F{i}"))
        .chain(INDEX.iter().map(|i| format!("Fdot{i}")))
        .chain(STRESS_COLUMNS.iter().map(|s| s.to_string()))
        .collect()
}

/// Header for state-only files (no stress columns).
pub fn state_header() -> Vec<String> {
    dataset_header().into_iter().take(18).collect()
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_dataset<W: Write>(out: W, records: &[(DeformationState, SymTensor3)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dataset_header())?;
    for (state, s) in records {
        let row = state
            .f
            .row_major()
            .iter()
            .chain(state.f_dot.row_major().iter())
            .chain(s.0.iter())
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>();
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_states<W: Write>(out: W, states: &[DeformationState]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(state_header())?;
    for state in states {
        let row = state
            .f
            .row_major()
            .iter()
            .chain(state.f_dot.row_major().iter())
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>();
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::InvalidInput(format!("missing column `{name}`")))
}

struct Layout {
    f: [usize; 9],
    f_dot: [usize; 9],
    stress: Option<[usize; 6]>,
}

fn layout(headers: &csv::StringRecord, need_stress: bool) -> Result<Layout> {
    let mut f = [0; 9];
    let mut f_dot = [0; 9];
    for (k, i) in INDEX.iter().enumerate() {
        f[k] = column_index(headers, &format!("F{i}"))?;
        f_dot[k] = column_index(headers, &format!("Fdot{i}"))?;
    }
    let stress = if need_stress {
        let mut s = [0; 6];
        for (k, name) in STRESS_COLUMNS.iter().enumerate() {
            s[k] = column_index(headers, name)?;
        }
        Some(s)
    } else {
        None
    };
    Ok(Layout { f, f_dot, stress })
}

fn parse_cell(record: &csv::StringRecord, col: usize, line: usize) -> Result<f64> {
    let cell = record
        .get(col)
        .ok_or_else(|| Error::InvalidInput(format!("row {line}: too few columns")))?;
    cell.trim()
        .parse::<f64>()
        .map_err(|e| Error::InvalidInput(format!("row {line}: `{cell}` is not a number ({e})")))
}

fn read_rows<R: Read>(input: R, need_stress: bool) -> Result<Vec<(DeformationState, Option<SymTensor3>)>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let lay = layout(&headers, need_stress)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut f = [0.0; 9];
        let mut fd = [0.0; 9];
        for k in 0..9 {
            f[k] = parse_cell(&rec, lay.f[k], line + 1)?;
            fd[k] = parse_cell(&rec, lay.f_dot[k], line + 1)?;
        }
        let state = kinematics_from(Tensor3::from_row_major(f), Tensor3::from_row_major(fd))
            .map_err(|e| Error::InvalidInput(format!("row {}: {e}", line + 1)))?;
        let stress = match lay.stress {
            Some(cols) => {
                let mut s = [0.0; 6];
                for k in 0..6 {
                    s[k] = parse_cell(&rec, cols[k], line + 1)?;
                }
                Some(SymTensor3(s))
            }
            None => None,
        };
        out.push((state, stress));
    }
    Ok(out)
}

pub fn read_dataset<R: Read>(input: R) -> Result<Vec<(DeformationState, SymTensor3)>> {
    Ok(read_rows(input, true)?
        .into_iter()
        .map(|(s, t)| (s, t.expect("stress columns required")))
        .collect())
}

/// States from a CSV that has at least the `F` and `Fdot` columns.
pub fn read_states<R: Read>(input: R) -> Result<Vec<DeformationState>> {
    Ok(read_rows(input, false)?.into_iter().map(|(s, _)| s).collect())
}

pub fn read_dataset_file(path: &Path) -> Result<Vec<(DeformationState, SymTensor3)>> {
    read_dataset(std::fs::File::open(path)?)
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::{mode_isochoric_uniaxial, mode_simple_shear};

    #[test]
    fn round_trip_is_exact() {
        let records = vec![
            (mode_isochoric_uniaxial(1.0 / 3.0, 17.1).unwrap(), SymTensor3([0.1, -2.0 / 3.0, 1e-300, 5.0, -0.0, 1.0 / 7.0])),
            (mode_simple_shear(0.123456789012345, 0.0).unwrap(), SymTensor3::zero()),
        ];
        let mut buf = Vec::new();
        write_dataset(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("F11,F12,F13,F21,F22,F23,F31,F32,F33,Fdot11"));
        assert!(text.lines().next().unwrap().ends_with("S11,S22,S33,S23,S13,S12"));
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for ((a, sa), (b, sb)) in records.iter().zip(&back) {
            assert_eq!(a.f, b.f);
            assert_eq!(a.f_dot, b.f_dot);
            assert_eq!(sa, sb);
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let err = read_dataset("F11,F12\n1,0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("missing column"));
    }

    #[test]
    fn inverted_state_is_rejected() {
        let mut text = dataset_header().join(",");
        text.push('\n');
        let mut row = vec!["0"; 24];
        row[0] = "-1";
        row[4] = "1";
        row[8] = "1";
        text.push_str(&row.join(","));
        let err = read_dataset(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
