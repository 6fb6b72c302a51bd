//! Complete enumeration solver: every complementary cone is visited, so the
//! output contains all isolated solutions and a description of every continuum.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{complementary_matrix, orthant_matrix, x_to_zw, IndexSet, LcpProblem, Sign, MAX_ENUMERATION_DIM};
use crate::error::{LcpError, Result};
use crate::io::ser;
use crate::singularity::Regularity;
use crate::tol::Tolerance;

/// Default cap on `n` for enumeration.
pub const DEFAULT_CAP: usize = 16;

/// Isolated solutions closer than this many tolerances are merged.
const MERGE_FACTOR: f64 = 10.0;

/// Below this many cones the enumeration runs sequentially.
const PARALLEL_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: Tolerance,
    pub cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: Tolerance::default(),
            cap: DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionPoint {
    #[serde(serialize_with = "ser::vector")]
    pub x: DVector<f64>,
    #[serde(serialize_with = "ser::vector")]
    pub z: DVector<f64>,
    #[serde(serialize_with = "ser::vector")]
    pub w: DVector<f64>,
    /// Every cone `alpha` for which `x` is a solution.
    pub witnesses: Vec<IndexSet>,
    pub regularity: Regularity,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub ill_conditioned: bool,
}

impl SolutionPoint {
    pub fn from_x(x: DVector<f64>, witnesses: Vec<IndexSet>) -> Self {
        let (z, w) = x_to_zw(&x);
        SolutionPoint {
            x,
            z,
            w,
            witnesses,
            regularity: Regularity::Unknown,
            ill_conditioned: false,
        }
    }
}

/// A solution set of positive dimension, living in the orthant of `alpha`:
/// `x(t) = base + sum_k t_k directions[k]` with `t_k` in `param_box[k]`.
///
/// For `dim == 1` the box is the exact feasible interval. For higher
/// dimension `base` is a vertex and each box entry bounds its own direction
/// with the others held at zero.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuumSolution {
    pub alpha: IndexSet,
    #[serde(serialize_with = "ser::vector")]
    pub base: DVector<f64>,
    #[serde(serialize_with = "ser::vectors")]
    pub directions: Vec<DVector<f64>>,
    pub param_box: Vec<[f64; 2]>,
    pub dim: usize,
}

impl ContinuumSolution {
    pub fn point(&self, params: &[f64]) -> DVector<f64> {
        let mut x = self.base.clone();
        for (d, t) in self.directions.iter().zip(params) {
            x.axpy(*t, d, 1.0);
        }
        x
    }

    /// The two ends of a one-dimensional continuum (unbounded ends are skipped).
    pub fn endpoints(&self) -> Vec<DVector<f64>> {
        if self.dim != 1 {
            return Vec::new();
        }
        self.param_box[0]
            .iter()
            .filter(|t| t.is_finite())
            .map(|&t| self.point(&[t]))
            .collect()
    }

    /// Sample points along the first direction (others at zero). Infinite
    /// bounds are clipped one unit past the finite end.
    pub fn samples(&self, count: usize) -> Vec<DVector<f64>> {
        let [lo, hi] = self.param_box[0];
        let (lo, hi) = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo, hi),
            (true, false) => (lo, lo + 1.0),
            (false, true) => (hi - 1.0, hi),
            (false, false) => (-1.0, 1.0),
        };
        let count = count.max(2);
        (0..count)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (count - 1) as f64;
                let mut params = vec![0.0; self.dim];
                params[0] = t;
                self.point(&params)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Solutions {
    pub isolated: Vec<SolutionPoint>,
    pub continua: Vec<ContinuumSolution>,
}

impl Solutions {
    pub fn is_empty(&self) -> bool {
        self.isolated.is_empty() && self.continua.is_empty()
    }
}

/// What one complementary cone contributes for a given `q`.
#[derive(Debug, Clone)]
pub enum ConeOutcome {
    None,
    /// Solution in `x` coordinates; the flag marks an ill-conditioned cone.
    Point(DVector<f64>, bool),
    Continuum(ContinuumSolution),
}

/// Solves `C_M(alpha) p = q, p >= 0` for a single cone.
pub fn solve_cone(m: &DMatrix<f64>, alpha: IndexSet, q: &DVector<f64>, tol: &Tolerance) -> Result<ConeOutcome> {
    let c = complementary_matrix(m, alpha, Sign::Plus)?;
    let abs_tol = tol.abs(m, Some(q));
    let det = c.determinant();
    let n = m.nrows();
    if det.abs() > tol.det(m) {
        let Some(p) = c.lu().solve(q) else {
            return Ok(ConeOutcome::None);
        };
        if p.iter().any(|&v| v < -abs_tol) {
            return Ok(ConeOutcome::None);
        }
        let p = p.map(|v| v.max(0.0));
        let ill = det.abs() < tol.ill_conditioned(m);
        return Ok(ConeOutcome::Point(orthant_matrix(n, alpha) * p, ill));
    }
    Ok(degenerate_cone(&c, alpha, q, abs_tol))
}

/// Feasible set `{p >= 0 : C p = q}` for a singular `C`.
pub(crate) fn degenerate_cone(c: &DMatrix<f64>, alpha: IndexSet, q: &DVector<f64>, abs_tol: f64) -> ConeOutcome {
    let n = c.nrows();
    let svd = c.clone().svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
        return ConeOutcome::None;
    };
    let sigma = &svd.singular_values;
    let smin = sigma.min();
    let zero = |s: f64| s <= abs_tol.max(smin);

    // Least-squares p0 over the retained singular values.
    let mut p0 = DVector::zeros(n);
    for k in 0..n {
        if !zero(sigma[k]) {
            let coef = u.column(k).dot(q) / sigma[k];
            p0 += v_t.row(k).transpose() * coef;
        }
    }
    if (c * &p0 - q).amax() > abs_tol {
        return ConeOutcome::None;
    }
    let null: Vec<DVector<f64>> = (0..n)
        .filter(|&k| zero(sigma[k]))
        .map(|k| v_t.row(k).transpose())
        .collect();
    let orth = orthant_matrix(n, alpha);

    if null.len() == 1 {
        let v = &null[0];
        let Some((lo, hi)) = ray_interval(&p0, v, abs_tol) else {
            return ConeOutcome::None;
        };
        if hi - lo <= abs_tol {
            let p = (&p0 + v * (0.5 * (lo + hi))).map(|x| x.max(0.0));
            return ConeOutcome::Point(&orth * p, true);
        }
        return ConeOutcome::Continuum(ContinuumSolution {
            alpha,
            base: &orth * &p0,
            directions: vec![&orth * v],
            param_box: vec![[lo, hi]],
            dim: 1,
        });
    }

    let rank = n - null.len();
    let Some(base) = basic_feasible_point(c, q, rank, abs_tol) else {
        return ConeOutcome::None;
    };
    let param_box = null
        .iter()
        .map(|v| match ray_interval(&base, v, abs_tol) {
            Some((lo, hi)) => [lo, hi],
            None => [0.0, 0.0],
        })
        .collect();
    ConeOutcome::Continuum(ContinuumSolution {
        alpha,
        base: &orth * &base,
        directions: null.iter().map(|v| &orth * v).collect(),
        param_box,
        dim: null.len(),
    })
}

/// `{t : p + t v >= 0}` as a closed interval, `None` when empty beyond `tol`.
fn ray_interval(p: &DVector<f64>, v: &DVector<f64>, tol: f64) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (&pi, &vi) in p.iter().zip(v.iter()) {
        if vi.abs() <= f64::EPSILON {
            if pi < -tol {
                return None;
            }
        } else if vi > 0.0 {
            lo = lo.max(-pi / vi);
        } else {
            hi = hi.min(-pi / vi);
        }
    }
    if lo > hi + tol {
        return None;
    }
    if lo > hi {
        let mid = 0.5 * (lo + hi);
        return Some((mid, mid));
    }
    Some((lo, hi))
}

/// First basic feasible solution of `C p = q, p >= 0` over column subsets of
/// size `rank`, in lexicographic subset order.
fn basic_feasible_point(c: &DMatrix<f64>, q: &DVector<f64>, rank: usize, tol: f64) -> Option<DVector<f64>> {
    let n = c.ncols();
    if rank == 0 {
        return (q.amax() <= tol).then(|| DVector::zeros(n));
    }
    let mut subset: Vec<usize> = (0..rank).collect();
    loop {
        let sub = c.select_columns(subset.iter());
        let svd = sub.clone().svd(true, true);
        if svd.singular_values.min() > tol {
            if let Ok(ps) = svd.solve(q, tol) {
                if ps.iter().all(|&v| v >= -tol) && (&sub * &ps - q).amax() <= tol {
                    let mut p = DVector::zeros(n);
                    for (k, &j) in subset.iter().enumerate() {
                        p[j] = ps[k].max(0.0);
                    }
                    return Some(p);
                }
            }
        }
        // Next combination.
        let mut i = rank;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if subset[i] < n - rank + i {
                subset[i] += 1;
                for k in i + 1..rank {
                    subset[k] = subset[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Enumerates all `2^n` complementary cones of LCP(M, q).
///
/// Isolated solutions found under several cones are merged with their
/// witnesses accumulated; isolated points lying inside a reported continuum
/// are absorbed into it. Output order is canonical: by smallest witness mask,
/// then lexicographically by `x`; continua by mask.
pub fn solve_enumeration(problem: &LcpProblem, opts: &SolverOptions) -> Result<Solutions> {
    let n = problem.n();
    let cap = opts.cap.min(MAX_ENUMERATION_DIM);
    if n > cap {
        return Err(LcpError::TooLarge { n, cap });
    }
    let (m, q) = (problem.m(), problem.q());
    let tol = &opts.tol;
    let abs_tol = tol.abs(m, Some(q));

    let alphas: Vec<IndexSet> = IndexSet::all(n).collect();
    let run = |&alpha: &IndexSet| solve_cone(m, alpha, q, tol).map(|o| (alpha, o));
    let outcomes: Vec<(IndexSet, ConeOutcome)> = if alphas.len() >= PARALLEL_THRESHOLD {
        alphas.par_iter().map(run).collect::<Result<_>>()?
    } else {
        alphas.iter().map(run).collect::<Result<_>>()?
    };

    let mut isolated: Vec<SolutionPoint> = Vec::new();
    let mut continua: Vec<ContinuumSolution> = Vec::new();
    for (alpha, outcome) in outcomes {
        match outcome {
            ConeOutcome::None => {}
            ConeOutcome::Point(x, ill) => {
                match isolated
                    .iter_mut()
                    .find(|s| (&s.x - &x).amax() <= MERGE_FACTOR * abs_tol)
                {
                    Some(s) => {
                        s.witnesses.push(alpha);
                        s.ill_conditioned |= ill;
                    }
                    None => {
                        let mut s = SolutionPoint::from_x(x, vec![alpha]);
                        s.ill_conditioned = ill;
                        isolated.push(s);
                    }
                }
            }
            ConeOutcome::Continuum(c) => continua.push(c),
        }
    }
    isolated.retain(|s| {
        !continua
            .iter()
            .any(|c| c.alpha.sign_consistent(&s.x, MERGE_FACTOR * abs_tol))
    });
    for s in &mut isolated {
        s.witnesses.sort();
    }
    isolated.sort_by(|a, b| a.witnesses[0].cmp(&b.witnesses[0]).then_with(|| lex_cmp(&a.x, &b.x)));
    continua.sort_by_key(|c| c.alpha);
    Ok(Solutions { isolated, continua })
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Residuals of the three LCP conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Largest negative entry of `z` or `w`, as a positive number.
    pub nonnegativity: f64,
    /// `|z'w|`.
    pub complementarity: f64,
    /// `‖w - Mz - q‖∞`.
    pub linear: f64,
    pub certified: bool,
}

pub fn verify_solution(problem: &LcpProblem, s: &SolutionPoint, tol: &Tolerance) -> ResidualReport {
    let (m, q) = (problem.m(), problem.q());
    let neg = s.z.iter().chain(s.w.iter()).fold(0.0f64, |acc, &v| acc.max(-v));
    let complementarity = s.z.dot(&s.w).abs();
    let linear = (&s.w - m * &s.z - q).amax();
    let limit = tol.abs(m, Some(q));
    ResidualReport {
        nonnegativity: neg,
        complementarity,
        linear,
        certified: neg <= limit && complementarity <= limit && linear <= limit,
    }
}
