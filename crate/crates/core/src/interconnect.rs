//! Feedback interconnection of two LCPs and the pleat scenario.
//!
//! Two LCPs coupled through their complementarity variables,
//! `w_a = M_a z_a + H_a z_b + θ_a` and `w_b = M_b z_b + H_b z_a + θ_b`,
//! form a single LCP with block matrix `[[M_a, H_a], [H_b, M_b]]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::LcpProblem;
use crate::bifurcation::PwlPath;
use crate::error::{LcpError, Result};
use crate::io::{rows_to_matrix, ser};

/// Pleat rotation angle `10π/9`.
pub const DEFAULT_S: f64 = 10.0 * PI / 9.0;

/// `v(λ) = constant + λ slope`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineVector {
    pub constant: DVector<f64>,
    pub slope: DVector<f64>,
}

impl AffineVector {
    pub fn constant(v: DVector<f64>) -> Self {
        let slope = DVector::zeros(v.len());
        AffineVector { constant: v, slope }
    }

    pub fn len(&self) -> usize {
        self.constant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constant.is_empty()
    }

    pub fn at(&self, lambda: f64) -> DVector<f64> {
        &self.constant + &self.slope * lambda
    }
}

/// Scalar or list, so 1-vectors may be written as plain numbers.
#[derive(Deserialize)]
#[serde(untagged)]
enum Values {
    Scalar(f64),
    List(Vec<f64>),
}

impl Values {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Values::Scalar(v) => vec![v],
            Values::List(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAffine {
    Affine {
        #[serde(rename = "const")]
        constant: Values,
        #[serde(default)]
        slope: Option<Values>,
    },
    Fixed(Values),
}

impl RawAffine {
    fn build(self, field: &str) -> Result<AffineVector> {
        let (c, s) = match self {
            RawAffine::Fixed(v) => (v.into_vec(), None),
            RawAffine::Affine { constant, slope } => (constant.into_vec(), slope.map(Values::into_vec)),
        };
        let s = s.unwrap_or_else(|| vec![0.0; c.len()]);
        if s.len() != c.len() {
            return Err(LcpError::parse(
                field,
                format!("const has {} entries, slope has {}", c.len(), s.len()),
            ));
        }
        if c.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(LcpError::parse(field, "non-finite entry"));
        }
        Ok(AffineVector {
            constant: DVector::from_vec(c),
            slope: DVector::from_vec(s),
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMatrix {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl RawMatrix {
    fn build(self, field: &str) -> Result<DMatrix<f64>> {
        match self {
            RawMatrix::Scalar(v) => rows_to_matrix(&[vec![v]], field),
            RawMatrix::Rows(rows) => rows_to_matrix(&rows, field),
        }
    }
}

#[derive(Deserialize)]
struct RawSpec {
    m_a: RawMatrix,
    m_b: RawMatrix,
    h_a: RawMatrix,
    h_b: RawMatrix,
    theta_a: RawAffine,
    theta_b: RawAffine,
}

#[derive(Debug, Clone)]
pub struct InterconnectionSpec {
    pub m_a: DMatrix<f64>,
    pub m_b: DMatrix<f64>,
    pub h_a: DMatrix<f64>,
    pub h_b: DMatrix<f64>,
    pub theta_a: AffineVector,
    pub theta_b: AffineVector,
}

impl InterconnectionSpec {
    /// JSON with keys `m_a, m_b, h_a, h_b, theta_a, theta_b`; thetas are
    /// arrays or `{"const": [...], "slope": [...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawSpec =
            serde_json::from_str(text).map_err(|e| LcpError::parse("interconnection spec", e.to_string()))?;
        Ok(InterconnectionSpec {
            m_a: raw.m_a.build("m_a")?,
            m_b: raw.m_b.build("m_b")?,
            h_a: raw.h_a.build("h_a")?,
            h_b: raw.h_b.build("h_b")?,
            theta_a: raw.theta_a.build("theta_a")?,
            theta_b: raw.theta_b.build("theta_b")?,
        })
    }

    pub fn n_a(&self) -> usize {
        self.m_a.nrows()
    }

    pub fn n_b(&self) -> usize {
        self.m_b.nrows()
    }

    fn validate(&self) -> Result<()> {
        let (na, nb) = (self.n_a(), self.n_b());
        let checks: [(&'static str, usize, usize); 8] = [
            ("m_a columns", na, self.m_a.ncols()),
            ("m_b columns", nb, self.m_b.ncols()),
            ("h_a rows", na, self.h_a.nrows()),
            ("h_a columns", nb, self.h_a.ncols()),
            ("h_b rows", nb, self.h_b.nrows()),
            ("h_b columns", na, self.h_b.ncols()),
            ("theta_a", na, self.theta_a.len()),
            ("theta_b", nb, self.theta_b.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(LcpError::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }
}

/// LCP(M, q0 + λ q1).
#[derive(Debug, Clone, Serialize)]
pub struct ParametricLcp {
    #[serde(serialize_with = "ser::matrix")]
    pub m: DMatrix<f64>,
    #[serde(serialize_with = "ser::vector")]
    pub q0: DVector<f64>,
    #[serde(serialize_with = "ser::vector")]
    pub q1: DVector<f64>,
}

impl ParametricLcp {
    pub fn q(&self, lambda: f64) -> DVector<f64> {
        &self.q0 + &self.q1 * lambda
    }

    pub fn at(&self, lambda: f64) -> Result<LcpProblem> {
        LcpProblem::new(self.m.clone(), self.q(lambda))
    }

    /// The single-segment path `q(λ)` over `range`.
    pub fn path(&self, range: [f64; 2]) -> Result<PwlPath> {
        PwlPath::new(vec![self.q(range[0]), self.q(range[1])], range)
    }
}

/// Block matrix `[[M_a, H_a], [H_b, M_b]]` with `q(λ) = (θ_a(λ), θ_b(λ))`.
pub fn interconnect(spec: &InterconnectionSpec) -> Result<ParametricLcp> {
    spec.validate()?;
    let (na, nb) = (spec.n_a(), spec.n_b());
    let n = na + nb;
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (na, na)).copy_from(&spec.m_a);
    m.view_mut((0, na), (na, nb)).copy_from(&spec.h_a);
    m.view_mut((na, 0), (nb, na)).copy_from(&spec.h_b);
    m.view_mut((na, na), (nb, nb)).copy_from(&spec.m_b);
    let stack = |a: &DVector<f64>, b: &DVector<f64>| DVector::from_iterator(n, a.iter().chain(b.iter()).copied());
    Ok(ParametricLcp {
        m,
        q0: stack(&spec.theta_a.constant, &spec.theta_b.constant),
        q1: stack(&spec.theta_a.slope, &spec.theta_b.slope),
    })
}

/// Solution `z` of the scalar LCP(1, 2λ - 1): `max(0, 1 - 2λ)`.
pub fn scalar_ramp_solution(lambda: f64) -> f64 {
    (1.0 - 2.0 * lambda).max(0.0)
}

/// Sign of the scalar subsystem `q_a(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampOrientation {
    /// `q_a = 2λ - 1`, so `z_a = max(0, 1 - 2λ)`.
    Rising,
    /// `q_a = 1 - 2λ`, so `z_a = max(0, 2λ - 1)`.
    Falling,
}

impl RampOrientation {
    pub fn q_a(self, lambda: f64) -> f64 {
        match self {
            RampOrientation::Rising => 2.0 * lambda - 1.0,
            RampOrientation::Falling => 1.0 - 2.0 * lambda,
        }
    }

    pub fn ramp_solution(self, lambda: f64) -> f64 {
        self.q_a(lambda).min(0.0).abs()
    }

    /// `dz_a/dλ` for λ > 1/2.
    fn upper_slope(self) -> f64 {
        match self {
            RampOrientation::Rising => 0.0,
            RampOrientation::Falling => 2.0,
        }
    }
}

impl std::str::FromStr for RampOrientation {
    type Err = LcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rising" => Ok(RampOrientation::Rising),
            "falling" => Ok(RampOrientation::Falling),
            other => Err(LcpError::parse(
                "ramp",
                format!("expected rising or falling, got {other:?}"),
            )),
        }
    }
}

/// Scalar ramp `z_a(λ)` fed through `H_b = (cos s, sin s)` into
/// `M_b = [[1, 2], [2, 1]]`, so that `q_b(λ) = R_s (z_a(λ), λ) + μ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PleatScenario {
    pub s: f64,
    pub mu: [f64; 2],
    pub lambda_range: [f64; 2],
    pub samples: usize,
    pub ramp: RampOrientation,
}

impl Default for PleatScenario {
    fn default() -> Self {
        let ramp = RampOrientation::Falling;
        PleatScenario {
            s: DEFAULT_S,
            mu: on_center_mu(DEFAULT_S, ramp),
            lambda_range: [0.0, 1.0],
            samples: 401,
            ramp,
        }
    }
}

pub fn rotation(s: f64) -> nalgebra::Matrix2<f64> {
    let (sin, cos) = s.sin_cos();
    nalgebra::Matrix2::new(cos, -sin, sin, cos)
}

/// `μ* = -R_s (z_a(1/2), 1/2)`: the path `q_b` passes through the origin at
/// the ramp kink.
pub fn on_center_mu(s: f64, ramp: RampOrientation) -> [f64; 2] {
    let v = rotation(s) * nalgebra::Vector2::new(ramp.ramp_solution(0.5), 0.5);
    [-v[0], -v[1]]
}

/// Unit normal to the direction `q_b` takes after the kink; moving `μ`
/// along it unfolds the organizing center.
pub fn unfolding_direction(s: f64, ramp: RampOrientation) -> [f64; 2] {
    let d = rotation(s) * nalgebra::Vector2::new(ramp.upper_slope(), 1.0);
    let d = d.normalize();
    [-d[1], d[0]]
}

fn validate_scenario(sc: &PleatScenario) -> Result<()> {
    if sc.samples < 2 {
        return Err(LcpError::parse("samples", "need at least 2"));
    }
    let [lo, hi] = sc.lambda_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(LcpError::parse("lambda-range", "need finite lo < hi"));
    }
    if !sc.s.is_finite() || sc.mu.iter().any(|v| !v.is_finite()) {
        return Err(LcpError::NonFinite("pleat scenario"));
    }
    Ok(())
}

/// The interconnection of the pleat scenario before assembly.
pub fn pleat_spec(sc: &PleatScenario) -> InterconnectionSpec {
    let (sin, cos) = sc.s.sin_cos();
    let (qa0, qa1) = match sc.ramp {
        RampOrientation::Rising => (-1.0, 2.0),
        RampOrientation::Falling => (1.0, -2.0),
    };
    InterconnectionSpec {
        m_a: DMatrix::from_element(1, 1, 1.0),
        m_b: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        h_a: DMatrix::zeros(1, 2),
        h_b: DMatrix::from_column_slice(2, 1, &[cos, sin]),
        theta_a: AffineVector {
            constant: DVector::from_element(1, qa0),
            slope: DVector::from_element(1, qa1),
        },
        theta_b: AffineVector {
            constant: DVector::from_column_slice(&sc.mu),
            slope: DVector::from_column_slice(&[-sin, cos]),
        },
    }
}

/// Assembled 3×3 LCP of the scenario and its path over `lambda_range`.
pub fn build_pleat_problem(sc: &PleatScenario) -> Result<(ParametricLcp, PwlPath)> {
    validate_scenario(sc)?;
    let lcp = interconnect(&pleat_spec(sc))?;
    let path = lcp.path(sc.lambda_range)?;
    Ok((lcp, path))
}
