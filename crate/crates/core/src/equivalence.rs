//! LCP equivalence and stability for 2×2 matrices.
//!
//! Equivalence deciders implement [`EquivalenceTest`] and live in an
//! [`EquivalenceRegistry`] keyed by name. The default chain runs the cheap
//! sign test first and falls back to the cone signature.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::algebra::{complementary_matrix, pwl_apply, IndexSet, Sign};
use crate::cone::{check_planar, signature, signatures_match, ConeSignature};
use crate::error::{LcpError, Result};
use crate::io::ser;
use crate::tol::Tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityStatus {
    Stable,
    Unstable,
    /// Nonzero principal minors but a zero off-diagonal entry.
    Boundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityVerdict {
    pub status: StabilityStatus,
    pub reasons: Vec<Condition>,
}

/// The five quantities entering the planar stability and equivalence tests:
/// `M12, M21, det M_{11}, det M_{22}, det M`.
fn planar_conditions(m: &DMatrix<f64>) -> [(&'static str, f64); 5] {
    [
        ("M12", m[(0, 1)]),
        ("M21", m[(1, 0)]),
        ("det M[1,1]", m[(0, 0)]),
        ("det M[2,2]", m[(1, 1)]),
        ("det M", m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]),
    ]
}

/// Nonzero off-diagonals and principal minors make `M` stable; a zero
/// principal minor makes it unstable.
pub fn stability_2x2(m: &DMatrix<f64>, tol: &Tolerance) -> Result<StabilityVerdict> {
    check_planar(m)?;
    let entry_tol = tol.abs(m, None);
    let det_tol = tol.det(m);
    let reasons: Vec<Condition> = planar_conditions(m)
        .into_iter()
        .enumerate()
        .map(|(k, (name, value))| Condition {
            name,
            value,
            passed: value.abs() > if k == 4 { det_tol } else { entry_tol },
        })
        .collect();
    let minors_ok = reasons[2..].iter().all(|c| c.passed);
    let off_ok = reasons[..2].iter().all(|c| c.passed);
    let status = match (minors_ok, off_ok) {
        (false, _) => StabilityStatus::Unstable,
        (true, false) => StabilityStatus::Boundary,
        (true, true) => StabilityStatus::Stable,
    };
    Ok(StabilityVerdict { status, reasons })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SufficientVerdict {
    True,
    Inconclusive,
}

/// All five sign products `M12 N12, M21 N21, det M_aa det N_aa` strictly positive.
/// The condition is only sufficient.
pub fn equivalent_sufficient(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &Tolerance) -> Result<SufficientVerdict> {
    let sa = stability_2x2(a, tol)?;
    let sb = stability_2x2(b, tol)?;
    let holds = sa
        .reasons
        .iter()
        .zip(&sb.reasons)
        .all(|(x, y)| x.passed && y.passed && x.value.signum() == y.value.signum());
    Ok(if holds {
        SufficientVerdict::True
    } else {
        SufficientVerdict::Inconclusive
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Equivalent => "equivalent",
            Verdict::NotEquivalent => "not-equivalent",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceResult {
    pub status: Verdict,
    /// Name of the test that produced the verdict (`"none"` if no test decided).
    pub method: String,
}

/// One way of deciding whether two planar matrices are LCP equivalent.
pub trait EquivalenceTest: Send + Sync {
    fn name(&self) -> &'static str;

    /// `Ok(None)` means the test cannot decide and the next one should run.
    fn decide(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &Tolerance) -> Result<Option<Verdict>>;
}

/// Strict agreement of the five sign conditions.
pub struct SignConditions;

impl EquivalenceTest for SignConditions {
    fn name(&self) -> &'static str {
        "sign-conditions"
    }

    fn decide(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &Tolerance) -> Result<Option<Verdict>> {
        Ok(match equivalent_sufficient(a, b, tol)? {
            SufficientVerdict::True => Some(Verdict::Equivalent),
            SufficientVerdict::Inconclusive => None,
        })
    }
}

/// Cyclic cone-signature comparison. Different signatures rule equivalence
/// out; equal signatures certify it only when both matrices are stable.
pub struct SignatureMatch;

impl EquivalenceTest for SignatureMatch {
    fn name(&self) -> &'static str {
        "signature"
    }

    fn decide(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &Tolerance) -> Result<Option<Verdict>> {
        let (sa, sb) = (signature(a, tol)?, signature(b, tol)?);
        if !signatures_match(&sa, &sb) {
            return Ok(Some(Verdict::NotEquivalent));
        }
        let stable = |m| stability_2x2(m, tol).map(|v| v.status == StabilityStatus::Stable);
        Ok(Some(if stable(a)? && stable(b)? {
            Verdict::Equivalent
        } else {
            Verdict::Unknown
        }))
    }
}

/// Name under which [`EquivalenceRegistry::decide`] runs the whole chain.
pub const CHAIN: &str = "auto";

/// Named equivalence tests, run in registration order by the chain.
pub struct EquivalenceRegistry {
    tests: Vec<Box<dyn EquivalenceTest>>,
}

impl Default for EquivalenceRegistry {
    fn default() -> Self {
        let mut r = EquivalenceRegistry::empty();
        r.register(Box::new(SignConditions));
        r.register(Box::new(SignatureMatch));
        r
    }
}

impl EquivalenceRegistry {
    pub fn empty() -> Self {
        EquivalenceRegistry { tests: Vec::new() }
    }

    /// Adds a test; a test with the same name is replaced in place.
    pub fn register(&mut self, test: Box<dyn EquivalenceTest>) {
        match self.tests.iter().position(|t| t.name() == test.name()) {
            Some(i) => self.tests[i] = test,
            None => self.tests.push(test),
        }
    }

    pub fn get(&self, name: &str) -> Option<&dyn EquivalenceTest> {
        self.tests.iter().find(|t| t.name() == name).map(|t| t.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.tests.iter().map(|t| t.name()).collect()
    }

    /// Runs the named test, or the full chain for [`CHAIN`].
    pub fn decide(
        &self,
        method: &str,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        tol: &Tolerance,
    ) -> Result<EquivalenceResult> {
        let selected: Vec<&dyn EquivalenceTest> = if method == CHAIN {
            self.tests.iter().map(|t| t.as_ref()).collect()
        } else {
            let t = self.get(method).ok_or_else(|| {
                LcpError::parse(
                    "method",
                    format!(
                        "unknown test {method:?}; available: {CHAIN}, {}",
                        self.names().join(", ")
                    ),
                )
            })?;
            vec![t]
        };
        for t in selected {
            if let Some(status) = t.decide(a, b, tol)? {
                return Ok(EquivalenceResult {
                    status,
                    method: t.name().to_string(),
                });
            }
        }
        Ok(EquivalenceResult {
            status: Verdict::Unknown,
            method: "none".to_string(),
        })
    }
}

/// Default chain: sign conditions, then signature.
pub fn equivalent(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &Tolerance) -> Result<EquivalenceResult> {
    EquivalenceRegistry::default().decide(CHAIN, a, b, tol)
}

/// Planar equivalence class, keyed by cone signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClassId {
    /// Class of `K`, the P-matrices.
    P,
    MClass,
    NClass,
    LClass,
    /// Anything else, labelled by the signature digest.
    Other(String),
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassId::P => f.write_str("P"),
            ClassId::MClass => f.write_str("M-class"),
            ClassId::NClass => f.write_str("N-class"),
            ClassId::LClass => f.write_str("L-class"),
            ClassId::Other(h) => write!(f, "other({h})"),
        }
    }
}

impl Serialize for ClassId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// The representative matrices of the four stable planar classes.
pub mod representatives {
    use nalgebra::DMatrix;

    pub fn k() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 1.0])
    }

    pub fn m() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.9, -1.0])
    }

    pub fn n() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.1, -1.0])
    }

    pub fn o() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.5])
    }

    pub fn l() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-0.5, -1.0, -1.0, 0.5])
    }
}

fn representative_signatures() -> &'static [(ClassId, ConeSignature)] {
    static SIGS: OnceLock<Vec<(ClassId, ConeSignature)>> = OnceLock::new();
    SIGS.get_or_init(|| {
        let t = Tolerance::default();
        [
            (ClassId::P, representatives::k()),
            (ClassId::MClass, representatives::m()),
            (ClassId::NClass, representatives::n()),
            (ClassId::LClass, representatives::l()),
        ]
        .into_iter()
        .map(|(id, m)| (id, signature(&m, &t).expect("representatives have nonzero columns")))
        .collect()
    })
}

/// Class of a stable planar matrix; unstable or unmatched matrices get
/// `Other` with their signature digest.
pub fn classify_planar(m: &DMatrix<f64>, tol: &Tolerance) -> Result<ClassId> {
    let sig = signature(m, tol)?;
    if stability_2x2(m, tol)?.status != StabilityStatus::Stable {
        return Ok(ClassId::Other(sig.digest()));
    }
    Ok(representative_signatures()
        .iter()
        .find(|(_, s)| signatures_match(s, &sig))
        .map(|(id, _)| id.clone())
        .unwrap_or_else(|| ClassId::Other(sig.digest())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormalFamily {
    M,
    N,
    O,
}

/// A normal-form matrix. `delta` holds `(δ0, δ1, δ2, δ3)` for the M and N
/// families and `(δ1, δ2, δ3, δ4)` for the O family.
#[derive(Debug, Clone, Serialize)]
pub struct NormalForm {
    pub family: NormalFamily,
    pub delta: [i8; 4],
    #[serde(serialize_with = "ser::matrix")]
    pub matrix: DMatrix<f64>,
}

impl NormalForm {
    pub fn label(&self) -> String {
        let d: Vec<String> = self.delta.iter().map(|v| v.to_string()).collect();
        format!("{:?}[{}]", self.family, d.join(","))
    }
}

/// `M_δ`, `N_δ` (16 each, δ in {-1,1}^4) and the boundary family `O_δ`
/// (δ1, δ2 in {-1,1}; δ3, δ4 in {-1,0,1} with δ3 δ4 = 0), in that order.
pub fn normal_forms() -> Vec<NormalForm> {
    let signs = [-1i8, 1];
    let mut out = Vec::new();
    for (family, k) in [(NormalFamily::M, 2.0), (NormalFamily::N, 0.5)] {
        for d0 in signs {
            for d1 in signs {
                for d2 in signs {
                    for d3 in signs {
                        let (f0, f1, f2, f3) = (d0 as f64, d1 as f64, d2 as f64, d3 as f64);
                        let matrix = DMatrix::from_row_slice(2, 2, &[f1, f3, -f3 * (k * f0 - f1 * f2), f2]);
                        out.push(NormalForm {
                            family,
                            delta: [d0, d1, d2, d3],
                            matrix,
                        });
                    }
                }
            }
        }
    }
    for d1 in signs {
        for d2 in signs {
            for d3 in [-1i8, 0, 1] {
                for d4 in [-1i8, 0, 1] {
                    if d3 * d4 != 0 {
                        continue;
                    }
                    let matrix = DMatrix::from_row_slice(2, 2, &[d1 as f64, d3 as f64, d4 as f64, d2 as f64]);
                    out.push(NormalForm {
                        family: NormalFamily::O,
                        delta: [d1, d2, d3, d4],
                        matrix,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CensusEntry {
    pub form: NormalForm,
    pub stability: StabilityStatus,
    pub class: ClassId,
    pub signature: ConeSignature,
}

/// Stability, class and signature of every normal form, in `normal_forms` order.
pub fn census(tol: &Tolerance) -> Result<Vec<CensusEntry>> {
    normal_forms()
        .into_par_iter()
        .map(|form| {
            Ok(CensusEntry {
                stability: stability_2x2(&form.matrix, tol)?.status,
                class: classify_planar(&form.matrix, tol)?,
                signature: signature(&form.matrix, tol)?,
                form,
            })
        })
        .collect()
}

/// One linear piece of a planar piecewise-linear homeomorphism:
/// `phi(y) = map * y` for `y` in `pos domain`.
#[derive(Debug, Clone)]
pub struct WitnessPiece {
    pub domain: DMatrix<f64>,
    pub map: DMatrix<f64>,
}

/// A candidate `phi` for `f_M = phi ∘ f_N ∘ psi`, together with the cone
/// bijection it is meant to induce (`alpha` of `M` ↦ `beta` of `N`).
#[derive(Debug, Clone)]
pub struct PwlWitness {
    pub pieces: Vec<WitnessPiece>,
    pub cone_map: Vec<(IndexSet, IndexSet)>,
}

impl PwlWitness {
    /// `phi(y) = dst(pairing(alpha)) · perm · src(alpha)^{-1} y` on `pos src(alpha)`,
    /// where `src(alpha)` and `dst(beta)` are `C_S(alpha)` and `C_D(beta)`.
    pub fn from_cone_pairing(
        src: &DMatrix<f64>,
        dst: &DMatrix<f64>,
        pairing: &[(IndexSet, IndexSet)],
        perm: &DMatrix<f64>,
        cone_map: Vec<(IndexSet, IndexSet)>,
    ) -> Result<Self> {
        let pieces = pairing
            .iter()
            .enumerate()
            .map(|(k, &(a, g))| {
                let domain = complementary_matrix(src, a, Sign::Plus)?;
                let inv = domain.clone().try_inverse().ok_or(LcpError::SingularPiece(k))?;
                let map = complementary_matrix(dst, g, Sign::Plus)? * perm * inv;
                Ok(WitnessPiece { domain, map })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PwlWitness { pieces, cone_map })
    }

    /// The identity on the plane, cut along the quadrants, with the identity cone map.
    pub fn identity() -> Self {
        let pieces = IndexSet::all(2)
            .map(|a| WitnessPiece {
                domain: crate::algebra::orthant_matrix(2, a),
                map: DMatrix::identity(2, 2),
            })
            .collect();
        PwlWitness {
            pieces,
            cone_map: IndexSet::all(2).map(|a| (a, a)).collect(),
        }
    }

    fn beta(&self, alpha: IndexSet) -> Option<IndexSet> {
        self.cone_map.iter().find(|(a, _)| *a == alpha).map(|(_, b)| *b)
    }

    fn apply(&self, y: &nalgebra::DVector<f64>, tol: f64) -> Result<nalgebra::DVector<f64>> {
        for piece in &self.pieces {
            if in_cone(&piece.domain, y, tol) {
                return Ok(&piece.map * y);
            }
        }
        Err(LcpError::Uncovered(y.iter().copied().collect()))
    }

    fn apply_inverse(&self, y: &nalgebra::DVector<f64>, tol: f64) -> Result<nalgebra::DVector<f64>> {
        for (k, piece) in self.pieces.iter().enumerate() {
            let image = &piece.map * &piece.domain;
            if in_cone(&image, y, tol) {
                let inv = piece.map.clone().try_inverse().ok_or(LcpError::SingularPiece(k))?;
                return Ok(inv * y);
            }
        }
        Err(LcpError::Uncovered(y.iter().copied().collect()))
    }

    /// Largest jump of `phi` across shared boundary rays of its pieces.
    pub fn continuity_gap(&self, tol: f64) -> f64 {
        let mut gap = 0.0f64;
        for (i, pi) in self.pieces.iter().enumerate() {
            for col in pi.domain.column_iter() {
                let d = col.normalize();
                for (j, pj) in self.pieces.iter().enumerate() {
                    if i != j && in_cone(&pj.domain, &d, tol) {
                        gap = gap.max((&pi.map * &d - &pj.map * &d).amax());
                    }
                }
            }
        }
        gap
    }
}

fn in_cone(generators: &DMatrix<f64>, y: &nalgebra::DVector<f64>, tol: f64) -> bool {
    let scale = 1.0 + y.amax();
    generators
        .clone()
        .lu()
        .solve(y)
        .is_some_and(|p| p.iter().all(|&v| v >= -tol * scale))
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    /// `max ‖f_M(x) - phi(f_N(psi(x)))‖∞ / (1 + ‖f_M(x)‖∞)` over the samples.
    pub max_residual: f64,
    pub samples: usize,
    pub continuity_gap: f64,
}

/// Builds `psi(x) = C_{-N}(beta(alpha))^{-1} phi^{-1}(C_{-M}(alpha) x)` on each
/// orthant and measures how far `f_M = phi ∘ f_N ∘ psi` is from holding on
/// `samples` points drawn uniformly from `[-1, 1]^2`.
pub fn verify_witness(
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    phi: &PwlWitness,
    samples: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<WitnessReport> {
    check_planar(m)?;
    check_planar(n)?;
    let t = tol.base;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = nalgebra::DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let alpha = IndexSet::nonpositive(&x);
        let beta = phi
            .beta(alpha)
            .ok_or_else(|| LcpError::parse("cone_map", format!("no image for {alpha}")))?;
        let c_n = complementary_matrix(n, beta, Sign::Minus)?;
        let c_n_inv = c_n
            .try_inverse()
            .ok_or_else(|| LcpError::SingularCone(beta.to_string()))?;
        let fm = pwl_apply(m, &x);
        let psi = c_n_inv * phi.apply_inverse(&fm, t)?;
        let back = phi.apply(&pwl_apply(n, &psi), t)?;
        worst = worst.max((&fm - back).amax() / (1.0 + fm.amax()));
    }
    Ok(WitnessReport {
        max_residual: worst,
        samples,
        continuity_gap: phi.continuity_gap(t),
    })
}
