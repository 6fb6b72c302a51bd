//! Invariants checked over random inputs.

use lcp_cones::algebra::{complementary_matrix, orthant_matrix, pwl_apply, x_to_zw, zw_to_x};
use lcp_cones::bifurcation::{trace_path, PwlPath, SolutionCount};
use lcp_cones::cone::{signature, signatures_match};
use lcp_cones::equivalence::{EquivalenceTest, SignConditions, SignatureMatch, Verdict};
use lcp_cones::interconnect::{interconnect, AffineVector, InterconnectionSpec};
use lcp_cones::singularity::{classify_regularity, generalized_jacobian, Regularity};
use lcp_cones::solver::{solve_enumeration, verify_solution, SolverOptions};
use lcp_cones::{DMatrix, DVector, IndexSet, LcpProblem, Sign, Tolerance};
use proptest::prelude::*;

fn entry() -> impl Strategy<Value = f64> {
    -3.0..3.0f64
}

fn matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(entry(), n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
}

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(entry(), n).prop_map(DVector::from_vec)
}

fn sized() -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>)> {
    (1usize..=3).prop_flat_map(|n| (matrix(n), vector(n)))
}

fn tol() -> Tolerance {
    Tolerance::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pwl_map_is_continuous_across_faces((m, x) in sized(), i in 0usize..3, eps in 1e-9..1e-6f64) {
        let i = i % x.len();
        let mut left = x.clone();
        let mut right = x.clone();
        left[i] = -eps;
        right[i] = eps;
        let gap = (pwl_apply(&m, &left) - pwl_apply(&m, &right)).amax();
        prop_assert!(gap <= 10.0 * eps * (1.0 + m.amax()));
    }

    #[test]
    fn pwl_map_is_the_orthant_cone_matrix((m, x) in sized()) {
        let alpha = IndexSet::nonpositive(&x);
        let c = complementary_matrix(&m, alpha, Sign::Minus).unwrap();
        prop_assert!((c * &x - pwl_apply(&m, &x)).amax() <= 1e-12 * (1.0 + m.amax() * x.amax()));
    }

    #[test]
    fn cone_matrix_factors_through_orthant(m in (1usize..=3).prop_flat_map(matrix), bits in 0u32..8) {
        let n = m.nrows();
        let alpha = IndexSet::from_bits(bits & ((1 << n) - 1));
        let plus = complementary_matrix(&m, alpha, Sign::Plus).unwrap();
        let minus = complementary_matrix(&m, alpha, Sign::Minus).unwrap();
        prop_assert!((plus - minus * orthant_matrix(n, alpha)).amax() <= 1e-15);
    }

    #[test]
    fn x_zw_round_trip(x in (1usize..=4).prop_flat_map(vector)) {
        let (z, w) = x_to_zw(&x);
        prop_assert!(z.min() >= 0.0 && w.min() >= 0.0 && z.dot(&w) == 0.0);
        prop_assert_eq!(zw_to_x(&z, &w, 0.0).unwrap(), x);
    }

    #[test]
    fn signature_is_scale_invariant(m in matrix(2), s in 0.01..100.0f64) {
        let t = tol();
        let a = signature(&m, &t);
        prop_assume!(a.is_ok());
        let b = signature(&(m * s), &t).unwrap();
        prop_assert!(signatures_match(&a.unwrap(), &b));
    }

    #[test]
    fn every_reported_solution_is_certified((m, q) in sized()) {
        let p = LcpProblem::new(m, q).unwrap();
        let sols = solve_enumeration(&p, &SolverOptions::default()).unwrap();
        for s in &sols.isolated {
            prop_assert!(verify_solution(&p, s, &tol()).certified);
            prop_assert!((pwl_apply(p.m(), &s.x) - p.q()).amax() <= 1e-9 * (1.0 + p.q().amax()));
        }
    }

    #[test]
    fn sign_conditions_never_contradict_signature(a in matrix(2), b in matrix(2)) {
        let t = tol();
        let sufficient = SignConditions.decide(&a, &b, &t);
        let sig = SignatureMatch.decide(&a, &b, &t);
        prop_assume!(sufficient.is_ok() && sig.is_ok());
        if sufficient.unwrap() == Some(Verdict::Equivalent) {
            prop_assert_ne!(sig.unwrap(), Some(Verdict::NotEquivalent));
        }
    }

    #[test]
    fn regularity_agrees_with_sampled_jacobians(m in matrix(3), x in vector(3), zero in 0usize..3) {
        let mut x = x;
        x[zero] = 0.0;
        let t = tol();
        let family = generalized_jacobian(&m, &x, t.base).unwrap();
        // Oracle: sign of det over random convex combinations of the vertices.
        let mut signs = [false, false];
        let mut seed = 0x9e3779b97f4a7c15u64;
        for _ in 0..64 {
            let mut weights: Vec<f64> = family.vertices.iter().map(|_| {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (seed >> 11) as f64 / (1u64 << 53) as f64 + 1e-3
            }).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let j = family.vertices.iter().zip(&weights).fold(DMatrix::zeros(3, 3), |acc, (v, w)| acc + v * *w);
            let d = j.determinant();
            if d > 1e-6 { signs[0] = true; }
            if d < -1e-6 { signs[1] = true; }
        }
        let r = classify_regularity(&m, &x, &t).unwrap();
        if signs[0] && signs[1] {
            prop_assert_eq!(r, Regularity::Singular);
        }
        if r == Regularity::Regular {
            prop_assert!(!(signs[0] && signs[1]));
        }
    }

    #[test]
    fn traced_diagram_matches_pointwise_solves(m in matrix(2), a in vector(2), b in vector(2)) {
        let path = PwlPath::new(vec![a, b], [0.0, 1.0]).unwrap();
        let d = trace_path(&m, &path, &tol()).unwrap();
        prop_assume!(d.continua.is_empty());
        for k in 0..200 {
            let l = (k as f64 + 0.5) / 200.0;
            let q = path.at(l);
            let p = LcpProblem::new(m.clone(), q).unwrap();
            let sols = solve_enumeration(&p, &SolverOptions::default()).unwrap();
            if !sols.continua.is_empty() || d.events.iter().any(|e| (e.lambda - l).abs() < 1e-6) {
                continue;
            }
            prop_assert_eq!(d.count_at(l), SolutionCount::Finite(sols.isolated.len()), "λ = {}", l);
            for s in &sols.isolated {
                let near = d.points_at(l).iter().any(|x| (x - &s.x).amax() <= 1e-7 * (1.0 + s.x.amax()));
                prop_assert!(near, "missing solution at λ = {}", l);
            }
        }
    }

    #[test]
    fn interconnection_projects_to_subproblems(
        ma in matrix(1), mb in matrix(2), ha in prop::collection::vec(entry(), 2),
        hb in prop::collection::vec(entry(), 2), ta in vector(1), tb in vector(2),
    ) {
        let spec = InterconnectionSpec {
            m_a: ma.clone(),
            m_b: mb.clone(),
            h_a: DMatrix::from_row_slice(1, 2, &ha),
            h_b: DMatrix::from_row_slice(2, 1, &hb),
            theta_a: AffineVector::constant(ta.clone()),
            theta_b: AffineVector::constant(tb.clone()),
        };
        let lcp = interconnect(&spec).unwrap();
        let p = LcpProblem::new(lcp.m.clone(), lcp.q(0.0)).unwrap();
        let sols = solve_enumeration(&p, &SolverOptions::default()).unwrap();
        for s in &sols.isolated {
            let za = s.z.rows(0, 1).into_owned();
            let zb = s.z.rows(1, 2).into_owned();
            let wa = &ma * &za + &spec.h_a * &zb + &ta;
            let wb = &mb * &zb + &spec.h_b * &za + &tb;
            prop_assert!(wa.min() >= -1e-9 && wb.min() >= -1e-9);
            prop_assert!(za.dot(&wa).abs() <= 1e-9 * (1.0 + wa.amax()) && zb.dot(&wb).abs() <= 1e-9 * (1.0 + wb.amax()));
        }
    }
}
