//! Index sets, complementary matrices and the piecewise-linear map `f_M`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{LcpError, Result};

/// Hard ceiling on the dimension for anything that enumerates `2^n` cones.
pub const MAX_ENUMERATION_DIM: usize = 20;

/// A subset of `{1, ..., n}` stored as a bit mask; bit `i` (0-based) set means
/// index `i + 1` is in the set. Ordering by mask value is the canonical
/// enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct IndexSet(u32);

impl IndexSet {
    pub const EMPTY: IndexSet = IndexSet(0);

    pub fn from_bits(bits: u32) -> Self {
        IndexSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn full(n: usize) -> Self {
        IndexSet(if n >= 32 { u32::MAX } else { (1u32 << n) - 1 })
    }

    /// Builds a set from 0-based indices.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        IndexSet(indices.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    /// 0-based membership test.
    pub fn contains(self, i: usize) -> bool {
        i < 32 && self.0 & (1 << i) != 0
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, n: usize) -> Self {
        IndexSet(!self.0 & Self::full(n).0)
    }

    pub fn fits(self, n: usize) -> bool {
        self.0 & !Self::full(n).0 == 0
    }

    /// 0-based members in increasing order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.contains(i))
    }

    /// All `2^n` subsets of `{1..n}` in canonical order.
    pub fn all(n: usize) -> impl Iterator<Item = IndexSet> {
        (0..(1u32 << n)).map(IndexSet)
    }

    /// `{i : x_i <= 0}`, the orthant `f_M` uses for `x` (ties go to the set).
    pub fn nonpositive(x: &DVector<f64>) -> Self {
        IndexSet::from_indices(x.iter().enumerate().filter(|(_, v)| **v <= 0.0).map(|(i, _)| i))
    }

    /// True when `x` lies in the closed orthant `pos C_I(self)` up to `tol`.
    pub fn sign_consistent(self, x: &DVector<f64>, tol: f64) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &v)| if self.contains(i) { v <= tol } else { v >= -tol })
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl FromStr for IndexSet {
    type Err = LcpError;

    /// Parses `{}`, `{1}`, `{1,2}` (1-based, as displayed).
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| LcpError::parse("index set", format!("expected {{...}}, got {s:?}")))?;
        let mut set = IndexSet::EMPTY;
        for tok in inner.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let i: usize = tok
                .parse()
                .map_err(|_| LcpError::parse("index set", format!("bad index {tok:?}")))?;
            if i == 0 || i > 32 {
                return Err(LcpError::parse("index set", format!("index {i} out of range")));
            }
            set.insert(i - 1);
        }
        Ok(set)
    }
}

impl serde::Serialize for IndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Sign selector for [`complementary_matrix`]: `Plus` builds `C_M(alpha)`,
/// `Minus` builds `C_{-M}(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// A linear complementarity problem LCP(M, q).
#[derive(Debug, Clone, PartialEq)]
pub struct LcpProblem {
    m: DMatrix<f64>,
    q: DVector<f64>,
}

impl LcpProblem {
    pub fn new(m: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        check_square(&m)?;
        if q.len() != m.nrows() {
            return Err(LcpError::DimensionMismatch {
                what: "q length",
                expected: m.nrows(),
                got: q.len(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LcpError::NonFinite("M"));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(LcpError::NonFinite("q"));
        }
        Ok(LcpProblem { m, q })
    }

    pub fn from_rows(rows: &[&[f64]], q: &[f64]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?, DVector::from_column_slice(q))
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }
}

/// Column-by-column complementary cone data for one index set.
#[derive(Debug, Clone)]
pub struct ComplementaryCone {
    pub alpha: IndexSet,
    pub generators: DMatrix<f64>,
    pub det: f64,
    pub degenerate: bool,
}

impl ComplementaryCone {
    pub fn new(m: &DMatrix<f64>, alpha: IndexSet, det_tol: f64) -> Result<Self> {
        let generators = complementary_matrix(m, alpha, Sign::Plus)?;
        let det = generators.determinant();
        Ok(ComplementaryCone {
            alpha,
            generators,
            det,
            degenerate: det.abs() <= det_tol,
        })
    }
}

pub fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(LcpError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Builds a dense matrix from row slices; rows must share one length.
pub fn matrix_from_rows(rows: &[&[f64]]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, |r| r.len());
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(LcpError::DimensionMismatch {
            what: "row length",
            expected: ncols,
            got: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// `C_M(alpha)` for `Sign::Plus` (column j is `-M_j` for j in alpha, `e_j`
/// otherwise) and `C_{-M}(alpha)` for `Sign::Minus` (column j is `+M_j`).
pub fn complementary_matrix(m: &DMatrix<f64>, alpha: IndexSet, sign: Sign) -> Result<DMatrix<f64>> {
    check_square(m)?;
    let n = m.nrows();
    if !alpha.fits(n) {
        return Err(LcpError::IndexOutOfRange {
            alpha: alpha.to_string(),
            n,
        });
    }
    let factor = match sign {
        Sign::Plus => -1.0,
        Sign::Minus => 1.0,
    };
    let mut c = DMatrix::identity(n, n);
    for j in alpha.indices() {
        c.set_column(j, &(m.column(j) * factor));
    }
    Ok(c)
}

/// `C_I(alpha)`: the orthant generator matrix (column j is `-e_j` for j in alpha).
pub fn orthant_matrix(n: usize, alpha: IndexSet) -> DMatrix<f64> {
    let mut c = DMatrix::identity(n, n);
    for j in alpha.indices().filter(|&j| j < n) {
        c[(j, j)] = -1.0;
    }
    c
}

/// The piecewise-linear map `f_M(x) = C_{-M}(alpha) x` with `alpha = {i : x_i <= 0}`.
///
/// Computed column-wise without materialising `C_{-M}(alpha)`: coordinates with
/// `x_i > 0` pass through, the others contribute `x_i * M_i`.
pub fn pwl_apply(m: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(x.len());
    for (j, &xj) in x.iter().enumerate() {
        if xj > 0.0 {
            y[j] += xj;
        } else if xj != 0.0 {
            y.axpy(xj, &m.column(j), 1.0);
        }
    }
    y
}

/// `(z, w) = (max(0, -x), max(0, x))` componentwise.
pub fn x_to_zw(x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    (x.map(|v| (-v).max(0.0)), x.map(|v| v.max(0.0)))
}

/// `x = w - z` for a complementary pair.
pub fn zw_to_x(z: &DVector<f64>, w: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    if z.len() != w.len() {
        return Err(LcpError::DimensionMismatch {
            what: "w length",
            expected: z.len(),
            got: w.len(),
        });
    }
    if let Some(v) = z.iter().copied().find(|v| *v < -tol) {
        return Err(LcpError::Negative { what: "z", value: v });
    }
    if let Some(v) = w.iter().copied().find(|v| *v < -tol) {
        return Err(LcpError::Negative { what: "w", value: v });
    }
    let gap = z.dot(w);
    if gap.abs() > tol {
        return Err(LcpError::ComplementarityViolation { gap });
    }
    Ok(w - z)
}
