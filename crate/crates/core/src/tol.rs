use nalgebra::{DMatrix, DVector};

/// Default relative tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// One scale-aware knob for every zero test in the crate.
///
/// The absolute threshold for a problem is `base * max(1, ‖M‖∞, ‖q‖∞)`.
/// Determinants are compared against `abs * max(1, ‖M‖∞)^(n-1)` so the test
/// is homogeneous in the scale of `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub base: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { base: DEFAULT_TOL }
    }
}

impl Tolerance {
    pub fn new(base: f64) -> Self {
        Tolerance { base }
    }

    pub fn scale(m: &DMatrix<f64>, q: Option<&DVector<f64>>) -> f64 {
        let qn = q.map(|q| q.amax()).unwrap_or(0.0);
        1f64.max(inf_norm(m)).max(qn)
    }

    /// Absolute threshold for entries, residuals and complementarity gaps.
    pub fn abs(&self, m: &DMatrix<f64>, q: Option<&DVector<f64>>) -> f64 {
        self.base * Self::scale(m, q)
    }

    /// Threshold below which `det` of an n×n complementary matrix counts as zero.
    pub fn det(&self, m: &DMatrix<f64>) -> f64 {
        let n = m.nrows().max(1) as i32;
        self.base * 1f64.max(inf_norm(m)).powi(n - 1)
    }

    /// Upper edge of the "ill-conditioned" determinant band.
    pub fn ill_conditioned(&self, m: &DMatrix<f64>) -> f64 {
        let n = m.nrows().max(1) as i32;
        1e-6 * 1f64.max(inf_norm(m)).powi(n - 1)
    }
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_uses_row_sums_and_q() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let q = DVector::from_vec(vec![-5.0, 0.0]);
        assert_eq!(Tolerance::scale(&m, None), 3.0);
        assert_eq!(Tolerance::scale(&m, Some(&q)), 5.0);
        let t = Tolerance::default();
        assert!((t.abs(&m, Some(&q)) - 5e-9).abs() < 1e-20);
        assert!((t.det(&m) - 3e-9).abs() < 1e-20);
    }

    #[test]
    fn small_matrices_floor_at_one() {
        let m = DMatrix::from_element(2, 2, 1e-3);
        assert_eq!(Tolerance::scale(&m, None), 1.0);
    }
}
