//! CSV output with byte-stable number formatting.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::bifurcation::SampleRow;
use crate::error::Result;

/// Which coordinates to write for diagram rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coords {
    #[default]
    X,
    Z,
}

impl std::str::FromStr for Coords {
    type Err = crate::LcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Coords::X),
            "z" => Ok(Coords::Z),
            other => Err(crate::LcpError::parse(
                "coords",
                format!("expected x or z, got {other:?}"),
            )),
        }
    }
}

/// 12 significant digits in the style of C's `%.12g`; `-0` prints as `0`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn header(prefix: &[&str], coord: char, n: usize) -> String {
    let mut cols: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    cols.extend((1..=n).map(|i| format!("{coord}{i}")));
    cols.join(",")
}

fn row_values(r: &SampleRow, coords: Coords) -> impl Iterator<Item = String> + '_ {
    let v = match coords {
        Coords::X => &r.x,
        Coords::Z => &r.z,
    };
    std::iter::once(format_number(r.lambda)).chain(v.iter().map(|&c| format_number(c)))
}

fn coord_char(coords: Coords) -> char {
    match coords {
        Coords::X => 'x',
        Coords::Z => 'z',
    }
}

/// Single table `branch,l,x1,...`.
pub fn write_diagram_csv<W: Write>(mut out: W, rows: &[SampleRow], n: usize, coords: Coords) -> Result<()> {
    writeln!(out, "{}", header(&["branch", "l"], coord_char(coords), n))?;
    for r in rows {
        let vals: Vec<String> = row_values(r, coords).collect();
        writeln!(out, "{},{}", r.branch, vals.join(","))?;
    }
    Ok(())
}

/// One table `l,x1,...` for a single branch.
pub fn write_branch_csv<W: Write>(mut out: W, rows: &[&SampleRow], n: usize, coords: Coords) -> Result<()> {
    writeln!(out, "{}", header(&["l"], coord_char(coords), n))?;
    for r in rows {
        let vals: Vec<String> = row_values(r, coords).collect();
        writeln!(out, "{}", vals.join(","))?;
    }
    Ok(())
}

/// Writes `<stem>_<k>.csv` next to `out` for each branch id present in
/// `rows`, numbering from 1 in branch order. Returns the written paths.
pub fn write_split(out: &Path, rows: &[SampleRow], n: usize, coords: Coords) -> Result<Vec<PathBuf>> {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "branch".into());
    let dir = out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut ids: Vec<usize> = rows.iter().map(|r| r.branch).collect();
    ids.dedup();
    let mut written = Vec::new();
    for (k, id) in ids.iter().enumerate() {
        let path = dir.join(format!("{stem}_{}.csv", k + 1));
        let mine: Vec<&SampleRow> = rows.iter().filter(|r| r.branch == *id).collect();
        let mut buf = Vec::new();
        write_branch_csv(&mut buf, &mine, n, coords)?;
        fs::write(&path, buf)?;
        written.push(path);
    }
    Ok(written)
}

/// `y1,y2,x1` triples of the folded graph.
pub fn write_surface_csv<W: Write>(mut out: W, pts: &[[f64; 3]]) -> Result<()> {
    writeln!(out, "y1,y2,x1")?;
    for p in pts {
        writeln!(
            out,
            "{},{},{}",
            format_number(p[0]),
            format_number(p[1]),
            format_number(p[2])
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::IndexSet;
    use nalgebra::DVector;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-2.5), "-2.5");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(2.0 / 3.0), "0.666666666667");
        assert_eq!(format_number(4.0 / 3.0 - 4.0), "-2.66666666667");
        assert_eq!(format_number(1e-5), "1e-05");
        assert_eq!(format_number(1.5e-7), "1.5e-07");
        assert_eq!(format_number(123456789012.0), "123456789012");
        assert_eq!(format_number(1.23456789e15), "1.23456789e+15");
        assert_eq!(format_number(0.0001), "0.0001");
    }

    fn row(branch: usize, l: f64, x: &[f64]) -> SampleRow {
        let x = DVector::from_column_slice(x);
        let z = x.map(|v| (-v).max(0.0));
        SampleRow {
            branch,
            alpha: IndexSet::EMPTY,
            lambda: l,
            x,
            z,
        }
    }

    #[test]
    fn csv_layout() {
        let rows = vec![row(0, 0.0, &[-4.0, 8.0]), row(2, 0.5, &[1.0, -0.0])];
        let mut buf = Vec::new();
        write_diagram_csv(&mut buf, &rows, 2, Coords::X).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "branch,l,x1,x2\n0,0,-4,8\n2,0.5,1,0\n");
        let mut buf = Vec::new();
        write_diagram_csv(&mut buf, &rows, 2, Coords::Z).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "branch,l,z1,z2\n0,0,4,0\n2,0.5,0,0\n");
    }

    #[test]
    fn split_files() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row(0, 0.0, &[1.0]), row(0, 1.0, &[2.0]), row(3, 0.5, &[3.0])];
        let paths = write_split(&dir.path().join("diag.csv"), &rows, 1, Coords::X).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths[1].ends_with("diag_2.csv"));
        assert_eq!(fs::read_to_string(&paths[0]).unwrap(), "l,x1\n0,1\n1,2\n");
    }
}
