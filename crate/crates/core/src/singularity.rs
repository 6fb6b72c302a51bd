//! Clarke generalized Jacobian of `f_M` and regularity of solution points.
//!
//! At `x` the active pieces are `C_{-M}(alpha)` for every closed orthant
//! containing `x`. They differ only in the columns of the zero coordinates of
//! `x`, where column `j` is either `e_j` or `M_j`. The convex hull is therefore
//! the image of a box under an affine map, and `det` on it is multilinear in
//! the box coordinates: it has no zero in the hull iff all vertex
//! determinants are nonzero with one common sign.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{complementary_matrix, IndexSet, Sign};
use crate::error::Result;
use crate::tol::Tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularity {
    Regular,
    Singular,
    /// Not classified.
    Unknown,
}

/// Vertices of `∂f_M(x)`.
#[derive(Debug, Clone)]
pub struct JacobianFamily {
    pub point: DVector<f64>,
    pub active: Vec<IndexSet>,
    pub vertices: Vec<DMatrix<f64>>,
}

impl JacobianFamily {
    pub fn is_singleton(&self) -> bool {
        self.vertices.len() == 1
    }
}

/// Active orthants at `x` (coordinates within `tol` of zero belong to both
/// sides) and their pieces `C_{-M}(alpha)`, in canonical order.
pub fn generalized_jacobian(m: &DMatrix<f64>, x: &DVector<f64>, tol: f64) -> Result<JacobianFamily> {
    let mut fixed = IndexSet::EMPTY;
    let mut free = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        if v.abs() <= tol {
            free.push(i);
        } else if v < 0.0 {
            fixed.insert(i);
        }
    }
    let mut active: Vec<IndexSet> = (0..(1u32 << free.len()))
        .map(|mask| {
            let mut a = fixed;
            for (k, &i) in free.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    a.insert(i);
                }
            }
            a
        })
        .collect();
    active.sort();
    let vertices = active
        .iter()
        .map(|&a| complementary_matrix(m, a, Sign::Minus))
        .collect::<Result<Vec<_>>>()?;
    Ok(JacobianFamily {
        point: x.clone(),
        active,
        vertices,
    })
}

/// Non-smooth singularity test for a point `x`.
///
/// Singular when a vertex determinant vanishes or two vertex determinants
/// have opposite signs; for `n = 2` additionally when the determinant along
/// any segment between two vertices has a root in `[0, 1]`. Regular otherwise.
pub fn classify_regularity(m: &DMatrix<f64>, x: &DVector<f64>, tol: &Tolerance) -> Result<Regularity> {
    let family = generalized_jacobian(m, x, tol.abs(m, None))?;
    Ok(classify_family(&family, tol.det(m)))
}

pub fn classify_family(family: &JacobianFamily, det_tol: f64) -> Regularity {
    let dets: Vec<f64> = family.vertices.iter().map(|v| v.determinant()).collect();
    if dets.iter().any(|d| d.abs() <= det_tol) {
        return Regularity::Singular;
    }
    let has_pos = dets.iter().any(|&d| d > 0.0);
    let has_neg = dets.iter().any(|&d| d < 0.0);
    if has_pos && has_neg {
        return Regularity::Singular;
    }
    if family.point.len() == 2 {
        for (i, a) in family.vertices.iter().enumerate() {
            for b in &family.vertices[i + 1..] {
                if segment_det_vanishes(a, b, det_tol) {
                    return Regularity::Singular;
                }
            }
        }
    }
    Regularity::Regular
}

/// Whether `det((1-t)A + tB)` has a root for `t` in `[0, 1]` (2×2 only).
fn segment_det_vanishes(a: &DMatrix<f64>, b: &DMatrix<f64>, det_tol: f64) -> bool {
    // det(A + tD) = det A + t (a11 d22 + d11 a22 - a12 d21 - d12 a21) + t^2 det D
    let d = b - a;
    let c0 = a.determinant();
    let c1 = a[(0, 0)] * d[(1, 1)] + d[(0, 0)] * a[(1, 1)] - a[(0, 1)] * d[(1, 0)] - d[(0, 1)] * a[(1, 0)];
    let c2 = d.determinant();
    let eval = |t: f64| c0 + t * (c1 + t * c2);
    let mut candidates = vec![0.0, 1.0];
    if c2.abs() > f64::EPSILON {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= 0.0 {
            let r = disc.sqrt();
            candidates.push((-c1 - r) / (2.0 * c2));
            candidates.push((-c1 + r) / (2.0 * c2));
        }
    } else if c1.abs() > f64::EPSILON {
        candidates.push(-c0 / c1);
    }
    candidates
        .into_iter()
        .filter(|t| (0.0..=1.0).contains(t))
        .any(|t| eval(t).abs() <= det_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m12() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn classify(m: &DMatrix<f64>, x: &[f64]) -> Regularity {
        classify_regularity(m, &v(x), &Tolerance::default()).unwrap()
    }

    #[test]
    fn jacobian_on_negative_x2_axis() {
        let fam = generalized_jacobian(&m12(), &v(&[0.0, -2.0]), 1e-9).unwrap();
        assert_eq!(fam.active, vec!["{2}".parse().unwrap(), "{1,2}".parse().unwrap()]);
        assert_eq!(fam.vertices[0], DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        assert_eq!(fam.vertices[1], m12());
    }

    #[test]
    fn interior_point_is_singleton_identity() {
        let fam = generalized_jacobian(&m12(), &v(&[1.0, 3.0]), 1e-9).unwrap();
        assert!(fam.is_singleton());
        assert_eq!(fam.vertices[0], DMatrix::identity(2, 2));
    }

    #[test]
    fn origin_activates_every_orthant() {
        let fam = generalized_jacobian(&m12(), &v(&[0.0, 0.0]), 1e-9).unwrap();
        assert_eq!(fam.vertices.len(), 4);
        assert_eq!(fam.active, IndexSet::all(2).collect::<Vec<_>>());
    }

    #[test]
    fn classification_examples() {
        let m = m12();
        assert_eq!(classify(&m, &[0.0, -2.0]), Regularity::Singular);
        assert_eq!(classify(&m, &[-2.0, 0.0]), Regularity::Singular);
        assert_eq!(classify(&m, &[3.0, -1.0]), Regularity::Regular);
        assert_eq!(classify(&m, &[-1.0, -1.0]), Regularity::Regular);
        // e_1 / M_1 pieces on the positive x_2 axis share det = 1.
        assert_eq!(classify(&m, &[0.0, 2.0]), Regularity::Regular);
    }

    #[test]
    fn singular_vertex_is_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(classify(&m, &[-1.0, -1.0]), Regularity::Singular);
    }

    #[test]
    fn segment_quadratic_finds_interior_root() {
        // det((1-t)I + tB) = 1 - 2t for the swap B; the rotation C keeps det > 0.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(!segment_det_vanishes(&a, &c, 1e-12));
        assert!(segment_det_vanishes(&a, &b, 1e-12));
    }
}
