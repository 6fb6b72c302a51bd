//! JSON file formats and command-line literal parsing.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::LcpProblem;
use crate::error::{LcpError, Result};

/// Serde helpers writing nalgebra values as plain JSON arrays.
pub mod ser {
    use nalgebra::{DMatrix, DVector};
    use serde::ser::{SerializeSeq, Serializer};

    pub fn vector<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn vectors<S: Serializer>(vs: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(vs.len()))?;
        for v in vs {
            seq.serialize_element(&v.iter().collect::<Vec<_>>())?;
        }
        seq.end()
    }

    /// Row-major list of rows.
    pub fn matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        s.collect_seq(rows)
    }

    pub fn matrices<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(ms.len()))?;
        for m in ms {
            let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
            seq.serialize_element(&rows)?;
        }
        seq.end()
    }
}

/// `{"n": 2, "m": [[1,2],[2,1]], "q": [-2,-2]}`; `n` and `q` are optional on input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub m: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
}

impl ProblemFile {
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let m = rows_to_matrix(&self.m, "m")?;
        if m.nrows() != m.ncols() {
            return Err(LcpError::parse(
                "m",
                format!("matrix must be square, got {}x{}", m.nrows(), m.ncols()),
            ));
        }
        if let Some(n) = self.n {
            if n != m.nrows() {
                return Err(LcpError::parse("n", format!("n = {n} but m has {} rows", m.nrows())));
            }
        }
        Ok(m)
    }

    pub fn problem(&self) -> Result<LcpProblem> {
        let m = self.matrix()?;
        let q = self.q.as_ref().ok_or_else(|| LcpError::parse("q", "missing"))?;
        if q.len() != m.nrows() {
            return Err(LcpError::parse(
                "q",
                format!("length {} does not match n = {}", q.len(), m.nrows()),
            ));
        }
        LcpProblem::new(m, DVector::from_column_slice(q))
    }

    pub fn from_problem(p: &LcpProblem) -> Self {
        ProblemFile {
            n: Some(p.n()),
            m: matrix_rows(p.m()),
            q: Some(p.q().iter().copied().collect()),
        }
    }
}

pub fn read_problem_file(path: &Path) -> Result<ProblemFile> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| LcpError::parse(path.display().to_string(), e.to_string()))
}

pub fn rows_to_matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(LcpError::parse(field, "empty matrix"));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(LcpError::parse(field, "rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LcpError::parse(field, "non-finite entry"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Comma-separated reals, e.g. `"-2,-2"`.
pub fn parse_vector(s: &str, field: &str) -> Result<DVector<f64>> {
    let vals = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| LcpError::parse(field, format!("not a finite number: {t:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(vals))
}

/// Exactly `k` comma-separated reals.
pub fn parse_fixed(s: &str, k: usize, field: &str) -> Result<Vec<f64>> {
    let v = parse_vector(s, field)?;
    if v.len() != k {
        return Err(LcpError::parse(field, format!("expected {k} values, got {}", v.len())));
    }
    Ok(v.iter().copied().collect())
}

/// Path literal `"(a,b);(c,d);..."`.
pub fn parse_path(s: &str) -> Result<Vec<DVector<f64>>> {
    let points = s
        .split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let inner = t
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| LcpError::parse("path", format!("waypoint {t:?} must look like (a,b)")))?;
            parse_vector(inner, "path")
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = points.first() {
        if points.iter().any(|p| p.len() != first.len()) {
            return Err(LcpError::parse("path", "waypoints have different lengths"));
        }
    }
    Ok(points)
}

/// Path file: `{"waypoints": [[..], [..]], "domain": [lo, hi]}` (domain optional).
#[derive(Debug, Clone, Deserialize)]
pub struct PathFile {
    pub waypoints: Vec<Vec<f64>>,
    #[serde(default)]
    pub domain: Option<[f64; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_problem_json() {
        let f: ProblemFile = serde_json::from_str(r#"{"n": 2, "m": [[1,2],[2,1]], "q": [-2,-2]}"#).unwrap();
        let p = f.problem().unwrap();
        assert_eq!(p.m()[(0, 1)], 2.0);
        assert_eq!(p.q()[1], -2.0);
        let back = serde_json::to_string(&ProblemFile::from_problem(&p)).unwrap();
        assert_eq!(back, r#"{"n":2,"m":[[1.0,2.0],[2.0,1.0]],"q":[-2.0,-2.0]}"#);
    }

    #[test]
    fn rejects_bad_problem_json() {
        let f: ProblemFile = serde_json::from_str(r#"{"n": 3, "m": [[1,2],[2,1]]}"#).unwrap();
        let err = f.matrix().unwrap_err().to_string();
        assert!(err.contains("n"), "{err}");
        let f: ProblemFile = serde_json::from_str(r#"{"m": [[1,2],[2]]}"#).unwrap();
        assert!(f.matrix().is_err());
        let f: ProblemFile = serde_json::from_str(r#"{"m": [[1,2],[2,1]], "q": [1]}"#).unwrap();
        assert!(f.problem().unwrap_err().to_string().contains("q"));
    }

    #[test]
    fn parses_literals() {
        assert_eq!(parse_vector("-2, -2", "q").unwrap().as_slice(), &[-2.0, -2.0]);
        assert!(parse_vector("1,x", "q").is_err());
        assert!(parse_vector("1,inf", "q").is_err());
        let path = parse_path("(-4,0);(0,-4)").unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(path[1].as_slice(), &[0.0, -4.0]);
        assert!(parse_path("(-4,0);0,-4").is_err());
        assert!(parse_path("(1,2);(1,2,3)").is_err());
        assert_eq!(parse_fixed("0,1,0.25", 3, "grid").unwrap(), vec![0.0, 1.0, 0.25]);
        assert!(parse_fixed("0,1", 3, "grid").is_err());
    }
}
