//! Bifurcation diagrams of LCP(M, q(λ)) along piecewise-linear paths.
//!
//! On each path segment `q(λ) = a + bλ`, so for a nonsingular cone the
//! generator coefficients `p(λ) = C_M(alpha)^{-1} q(λ)` are affine and the
//! feasible λ-set is an interval obtained from ratio bounds. Singular cones
//! contribute only where `q(λ)` enters their range, which is a single λ
//! unless the whole segment lies in it.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::algebra::{complementary_matrix, orthant_matrix, x_to_zw, IndexSet, Sign};
use crate::cone::check_planar;
use crate::error::{LcpError, Result};
use crate::io::{parse_path, ser, PathFile};
use crate::singularity::{classify_regularity, Regularity};
use crate::solver::{solve_cone, ConeOutcome, ContinuumSolution, DEFAULT_CAP};
use crate::tol::Tolerance;

/// Grid resolution used to locate the ends of a λ-band of continua.
const BAND_SCAN_POINTS: usize = 1025;
const BISECTION_STEPS: usize = 60;
/// Solutions closer than this many absolute tolerances are the same point.
const MERGE_FACTOR: f64 = 10.0;
/// λ values closer than this fraction of the domain width coincide.
const LAMBDA_EPS: f64 = 1e-9;

/// `q(λ)` through `waypoints`, each segment covering an equal share of `domain`.
#[derive(Debug, Clone, Serialize)]
pub struct PwlPath {
    #[serde(serialize_with = "ser::vectors")]
    waypoints: Vec<DVector<f64>>,
    domain: [f64; 2],
}

impl PwlPath {
    pub fn new(waypoints: Vec<DVector<f64>>, domain: [f64; 2]) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(LcpError::EmptyPath);
        }
        let n = waypoints[0].len();
        if n == 0 {
            return Err(LcpError::EmptyPath);
        }
        for w in &waypoints {
            if w.len() != n {
                return Err(LcpError::DimensionMismatch {
                    what: "path waypoint",
                    expected: n,
                    got: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(LcpError::NonFinite("path waypoint"));
            }
        }
        if !(domain[0].is_finite() && domain[1].is_finite() && domain[0] < domain[1]) {
            return Err(LcpError::parse(
                "domain",
                format!("need finite lo < hi, got {domain:?}"),
            ));
        }
        Ok(PwlPath { waypoints, domain })
    }

    /// Path over the default domain `[0, 1]`.
    pub fn unit(waypoints: Vec<DVector<f64>>) -> Result<Self> {
        Self::new(waypoints, [0.0, 1.0])
    }

    /// Parses `"(a,b);(c,d);..."`.
    pub fn from_literal(s: &str) -> Result<Self> {
        Self::unit(parse_path(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: PathFile =
            serde_json::from_str(&text).map_err(|e| LcpError::parse(path.display().to_string(), e.to_string()))?;
        let waypoints = f.waypoints.iter().map(|w| DVector::from_column_slice(w)).collect();
        Self::new(waypoints, f.domain.unwrap_or([0.0, 1.0]))
    }

    pub fn dim(&self) -> usize {
        self.waypoints[0].len()
    }

    pub fn segments(&self) -> usize {
        self.waypoints.len() - 1
    }

    pub fn waypoints(&self) -> &[DVector<f64>] {
        &self.waypoints
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    pub fn segment_range(&self, i: usize) -> [f64; 2] {
        let [lo, hi] = self.domain;
        let k = self.segments() as f64;
        let at = |j: usize| {
            if j == self.segments() {
                hi
            } else {
                lo + (hi - lo) * j as f64 / k
            }
        };
        [at(i), at(i + 1)]
    }

    /// `(a, b)` with `q(λ) = a + bλ` on segment `i`.
    pub fn segment_affine(&self, i: usize) -> (DVector<f64>, DVector<f64>) {
        let [l0, l1] = self.segment_range(i);
        let b = (&self.waypoints[i + 1] - &self.waypoints[i]) / (l1 - l0);
        let a = &self.waypoints[i] - &b * l0;
        (a, b)
    }

    pub fn segment_of(&self, lambda: f64) -> usize {
        let [lo, hi] = self.domain;
        let k = self.segments();
        let t = ((lambda - lo) / (hi - lo) * k as f64).floor();
        (t.max(0.0) as usize).min(k - 1)
    }

    /// `q(λ)`, extended affinely beyond the domain ends.
    pub fn at(&self, lambda: f64) -> DVector<f64> {
        let i = self.segment_of(lambda);
        let [l0, l1] = self.segment_range(i);
        let s = (lambda - l0) / (l1 - l0);
        &self.waypoints[i] * (1.0 - s) + &self.waypoints[i + 1] * s
    }

    fn lambda_eps(&self) -> f64 {
        LAMBDA_EPS * (self.domain[1] - self.domain[0]).max(1.0)
    }
}

/// Affine `v(λ) = a + bλ`.
#[derive(Debug, Clone, Serialize)]
pub struct Affine {
    #[serde(serialize_with = "ser::vector")]
    pub a: DVector<f64>,
    #[serde(serialize_with = "ser::vector")]
    pub b: DVector<f64>,
}

impl Affine {
    pub fn at(&self, lambda: f64) -> DVector<f64> {
        &self.a + &self.b * lambda
    }
}

/// Solutions of one cone over a λ-interval of one segment.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionBranch {
    pub segment: usize,
    pub alpha: IndexSet,
    pub interval: [f64; 2],
    pub x_affine: Affine,
    pub p_affine: Affine,
}

impl SolutionBranch {
    pub fn x_at(&self, lambda: f64) -> DVector<f64> {
        self.x_affine.at(lambda)
    }

    pub fn p_at(&self, lambda: f64) -> DVector<f64> {
        self.p_affine.at(lambda)
    }

    pub fn length(&self) -> f64 {
        self.interval[1] - self.interval[0]
    }

    fn contains(&self, lambda: f64, eps: f64) -> bool {
        self.interval[0] - eps <= lambda && lambda <= self.interval[1] + eps
    }
}

/// Continua of a degenerate cone, at one λ (`lambda[0] == lambda[1]`) or over
/// a band. `solution` is the continuum at `lambda[0]`.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuumEntry {
    pub segment: usize,
    pub lambda: [f64; 2],
    pub alpha: IndexSet,
    pub solution: ContinuumSolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionCount {
    Finite(usize),
    Continuum,
}

impl fmt::Display for SolutionCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionCount::Finite(k) => write!(f, "{k}"),
            SolutionCount::Continuum => f.write_str("continuum"),
        }
    }
}

impl Serialize for SolutionCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SolutionCount::Finite(k) => s.serialize_u64(*k as u64),
            SolutionCount::Continuum => s.serialize_str("continuum"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    CountChange,
    FaceCrossing,
    Continuum,
}

#[derive(Debug, Clone, Serialize)]
pub struct Event {
    pub lambda: f64,
    pub kind: EventKind,
    pub count_before: SolutionCount,
    pub count_at: SolutionCount,
    pub count_after: SolutionCount,
}

/// Constant solution count on the open interval `(lo, hi)`.
#[derive(Debug, Clone, Serialize)]
pub struct CountPiece {
    pub lo: f64,
    pub hi: f64,
    pub count: SolutionCount,
}

#[derive(Debug, Clone, Serialize)]
pub struct BifurcationDiagram {
    #[serde(serialize_with = "ser::matrix")]
    pub m: DMatrix<f64>,
    pub path: PwlPath,
    pub branches: Vec<SolutionBranch>,
    pub continua: Vec<ContinuumEntry>,
    pub events: Vec<Event>,
    pub count_fn: Vec<CountPiece>,
    /// Distance below which two solutions are identified.
    pub merge_tol: f64,
    #[serde(skip)]
    tol: Tolerance,
}

impl BifurcationDiagram {
    /// Distinct isolated solutions at λ, from the branches.
    pub fn points_at(&self, lambda: f64) -> Vec<DVector<f64>> {
        let eps = self.path.lambda_eps();
        let mut pts: Vec<DVector<f64>> = Vec::new();
        for b in self.branches.iter().filter(|b| b.contains(lambda, eps)) {
            let x = b.x_at(lambda);
            if !pts.iter().any(|p| (p - &x).amax() <= self.merge_tol) {
                pts.push(x);
            }
        }
        pts
    }

    pub fn count_at(&self, lambda: f64) -> SolutionCount {
        let eps = self.path.lambda_eps();
        if self
            .continua
            .iter()
            .any(|c| c.lambda[0] - eps <= lambda && lambda <= c.lambda[1] + eps)
        {
            return SolutionCount::Continuum;
        }
        SolutionCount::Finite(self.points_at(lambda).len())
    }

    /// Branches of positive length.
    pub fn proper_branches(&self) -> impl Iterator<Item = (usize, &SolutionBranch)> {
        let eps = self.path.lambda_eps();
        self.branches.iter().enumerate().filter(move |(_, b)| b.length() > eps)
    }

    /// Proper branches grouped by continuity: two branches are joined when an
    /// endpoint of one lies on the other. Groups are sorted, in branch order.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let eps = self.path.lambda_eps();
        let ids: Vec<usize> = self.proper_branches().map(|(i, _)| i).collect();
        let mut parent: Vec<usize> = (0..ids.len()).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let touches = |a: &SolutionBranch, b: &SolutionBranch| {
            a.interval
                .iter()
                .any(|&l| b.contains(l, eps) && (a.x_at(l) - b.x_at(l)).amax() <= self.merge_tol)
        };
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                let (a, b) = (&self.branches[ids[i]], &self.branches[ids[j]]);
                if touches(a, b) || touches(b, a) {
                    let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut roots: Vec<usize> = Vec::new();
        for (i, &id) in ids.iter().enumerate() {
            let r = root(&mut parent, i);
            match roots.iter().position(|&x| x == r) {
                Some(k) => groups[k].push(id),
                None => {
                    roots.push(r);
                    groups.push(vec![id]);
                }
            }
        }
        groups
    }

    /// One row per distinct solution at λ.
    pub fn sample_at(&self, lambda: f64) -> Vec<SampleRow> {
        let eps = self.path.lambda_eps();
        let mut rows: Vec<SampleRow> = Vec::new();
        for (id, b) in self.branches.iter().enumerate() {
            if !b.contains(lambda, eps) {
                continue;
            }
            let x = b.x_at(lambda);
            if rows.iter().any(|r| (&r.x - &x).amax() <= self.merge_tol) {
                continue;
            }
            rows.push(SampleRow::new(id, b.alpha, lambda, x));
        }
        rows
    }
}

struct Job {
    segment: usize,
    alpha: IndexSet,
}

enum Traced {
    Branch(SolutionBranch),
    Continuum(ContinuumEntry),
}

/// Exact branches, continua, events and the count function of
/// LCP(M, q(λ)) along `path`.
pub fn trace_path(m: &DMatrix<f64>, path: &PwlPath, tol: &Tolerance) -> Result<BifurcationDiagram> {
    crate::algebra::check_square(m)?;
    let n = m.nrows();
    if n > DEFAULT_CAP {
        return Err(LcpError::TooLarge { n, cap: DEFAULT_CAP });
    }
    if path.dim() != n {
        return Err(LcpError::DimensionMismatch {
            what: "path waypoint",
            expected: n,
            got: path.dim(),
        });
    }
    let q_scale = path.waypoints.iter().map(|w| w.amax()).fold(0.0, f64::max);
    let abs_tol = tol.abs(m, Some(&DVector::from_element(1, q_scale)));

    let jobs: Vec<Job> = (0..path.segments())
        .flat_map(|segment| IndexSet::all(n).map(move |alpha| Job { segment, alpha }))
        .collect();
    let traced: Vec<Vec<Traced>> = jobs
        .par_iter()
        .map(|job| trace_cone(m, path, job, tol, abs_tol))
        .collect::<Result<_>>()?;

    let mut branches = Vec::new();
    let mut continua = Vec::new();
    for t in traced.into_iter().flatten() {
        match t {
            Traced::Branch(b) => branches.push(b),
            Traced::Continuum(c) => continua.push(c),
        }
    }
    // A cone touched at a single λ adds nothing when a proper branch already
    // passes through the same point.
    let eps = path.lambda_eps();
    let merge_tol = MERGE_FACTOR * abs_tol;
    let covered = |b: &SolutionBranch, all: &[SolutionBranch]| {
        let l = b.interval[0];
        b.length() <= eps
            && all
                .iter()
                .any(|o| o.length() > eps && o.contains(l, eps) && (o.x_at(l) - b.x_at(l)).amax() <= merge_tol)
    };
    let keep: Vec<bool> = branches.iter().map(|b| !covered(b, &branches)).collect();
    let branches: Vec<SolutionBranch> = branches
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(b, _)| b)
        .collect();
    let mut d = BifurcationDiagram {
        m: m.clone(),
        path: path.clone(),
        branches,
        continua,
        events: Vec::new(),
        count_fn: Vec::new(),
        merge_tol,
        tol: *tol,
    };
    build_events(&mut d, abs_tol);
    Ok(d)
}

fn trace_cone(m: &DMatrix<f64>, path: &PwlPath, job: &Job, tol: &Tolerance, abs_tol: f64) -> Result<Vec<Traced>> {
    let n = m.nrows();
    let c = complementary_matrix(m, job.alpha, Sign::Plus)?;
    let range = path.segment_range(job.segment);
    let (a, b) = path.segment_affine(job.segment);
    let orth = orthant_matrix(n, job.alpha);

    if c.determinant().abs() > tol.det(m) {
        let lu = c.lu();
        let (Some(pc), Some(pd)) = (lu.solve(&a), lu.solve(&b)) else {
            return Ok(Vec::new());
        };
        let Some(interval) = feasible_interval(&pc, &pd, range, abs_tol, path.lambda_eps()) else {
            return Ok(Vec::new());
        };
        return Ok(vec![Traced::Branch(SolutionBranch {
            segment: job.segment,
            alpha: job.alpha,
            interval,
            x_affine: Affine {
                a: &orth * &pc,
                b: &orth * &pd,
            },
            p_affine: Affine { a: pc, b: pd },
        })]);
    }

    // Singular cone: q(λ) must lie in range C, i.e. u'q(λ) = 0 for left null vectors u.
    let svd = c.clone().svd(true, false);
    let Some(u) = svd.u.as_ref() else {
        return Ok(Vec::new());
    };
    let sigma = &svd.singular_values;
    let smin = sigma.min();
    let h = range[1] - range[0];
    let conditions: Vec<(f64, f64)> = (0..n)
        .filter(|&k| sigma[k] <= abs_tol.max(smin))
        .map(|k| (u.column(k).dot(&a), u.column(k).dot(&b)))
        .collect();
    let lam_eps = path.lambda_eps();
    let at = |lambda: f64| solve_cone(m, job.alpha, &(&a + &b * lambda), tol);

    let steepest = conditions
        .iter()
        .copied()
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .unwrap_or((0.0, 0.0));
    if steepest.1.abs() * h > abs_tol {
        let lambda = -steepest.0 / steepest.1;
        if lambda < range[0] - lam_eps || lambda > range[1] + lam_eps {
            return Ok(Vec::new());
        }
        let lambda = lambda.clamp(range[0], range[1]);
        return Ok(match at(lambda)? {
            ConeOutcome::None => Vec::new(),
            ConeOutcome::Continuum(solution) => vec![Traced::Continuum(ContinuumEntry {
                segment: job.segment,
                lambda: [lambda, lambda],
                alpha: job.alpha,
                solution,
            })],
            ConeOutcome::Point(x, _) => vec![Traced::Branch(point_branch(job, lambda, x, &orth))],
        });
    }
    if conditions
        .iter()
        .any(|&(ua, ub)| (ua + ub * 0.5 * (range[0] + range[1])).abs() > abs_tol)
    {
        return Ok(Vec::new());
    }

    // The whole segment lies in range C; the feasible part is an interval.
    let feasible = |lambda: f64| -> Result<bool> { Ok(!matches!(at(lambda)?, ConeOutcome::None)) };
    let grid: Vec<f64> = (0..BAND_SCAN_POINTS)
        .map(|i| range[0] + h * i as f64 / (BAND_SCAN_POINTS - 1) as f64)
        .collect();
    let flags = grid.iter().map(|&l| feasible(l)).collect::<Result<Vec<bool>>>()?;
    let (Some(i0), Some(i1)) = (flags.iter().position(|&f| f), flags.iter().rposition(|&f| f)) else {
        return Ok(Vec::new());
    };
    let bisect = |mut inside: f64, mut outside: f64| -> Result<f64> {
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (inside + outside);
            if feasible(mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    };
    let lo = if i0 == 0 {
        grid[0]
    } else {
        bisect(grid[i0], grid[i0 - 1])?
    };
    let hi = if i1 == grid.len() - 1 {
        grid[i1]
    } else {
        bisect(grid[i1], grid[i1 + 1])?
    };
    Ok(match at(lo)? {
        ConeOutcome::Continuum(solution) => vec![Traced::Continuum(ContinuumEntry {
            segment: job.segment,
            lambda: [lo, hi],
            alpha: job.alpha,
            solution,
        })],
        // A singular cone whose feasible set stays a single point along the band.
        _ => Vec::new(),
    })
}

fn point_branch(job: &Job, lambda: f64, x: DVector<f64>, orth: &DMatrix<f64>) -> SolutionBranch {
    let n = x.len();
    SolutionBranch {
        segment: job.segment,
        alpha: job.alpha,
        interval: [lambda, lambda],
        p_affine: Affine {
            a: orth * &x,
            b: DVector::zeros(n),
        },
        x_affine: Affine {
            a: x,
            b: DVector::zeros(n),
        },
    }
}

/// `{λ in range : c + dλ >= 0}`. Bounds are the exact ratios `-c_i/d_i`;
/// a coordinate whose slope moves it by less than `tol` over the segment is
/// treated as constant.
fn feasible_interval(c: &DVector<f64>, d: &DVector<f64>, range: [f64; 2], tol: f64, lam_eps: f64) -> Option<[f64; 2]> {
    let (mut lo, mut hi) = (range[0], range[1]);
    let h = hi - lo;
    let mid = 0.5 * (lo + hi);
    for (&ci, &di) in c.iter().zip(d.iter()) {
        if di.abs() * h <= tol {
            if ci + di * mid < -tol {
                return None;
            }
        } else if di > 0.0 {
            lo = lo.max(-ci / di);
        } else {
            hi = hi.min(-ci / di);
        }
    }
    if lo > hi + lam_eps {
        return None;
    }
    if lo > hi {
        let m = 0.5 * (lo + hi);
        return Some([m, m]);
    }
    Some([lo, hi])
}

fn build_events(d: &mut BifurcationDiagram, abs_tol: f64) {
    let eps = d.path.lambda_eps();
    let [dlo, dhi] = d.path.domain();
    let interior = |l: f64| l > dlo + eps && l < dhi - eps;

    let mut candidates: Vec<(f64, bool)> = Vec::new();
    for b in &d.branches {
        for &l in &b.interval {
            if interior(l) && b.p_at(l).min() <= abs_tol {
                candidates.push((l, false));
            }
        }
    }
    for c in &d.continua {
        for &l in &c.lambda {
            candidates.push((l, true));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, bool)> = Vec::new();
    for (l, cont) in candidates {
        match merged.last_mut() {
            Some(last) if l - last.0 <= eps => last.1 |= cont,
            _ => merged.push((l, cont)),
        }
    }

    let mut breaks = vec![dlo];
    breaks.extend(merged.iter().map(|e| e.0).filter(|&l| interior(l)));
    breaks.push(dhi);
    d.count_fn = breaks
        .windows(2)
        .filter(|w| w[1] - w[0] > eps)
        .map(|w| CountPiece {
            lo: w[0],
            hi: w[1],
            count: d.count_at(0.5 * (w[0] + w[1])),
        })
        .collect();

    let piece_count = |l: f64, before: bool| -> Option<SolutionCount> {
        d.count_fn
            .iter()
            .find(|p| {
                if before {
                    (p.hi - l).abs() <= eps
                } else {
                    (p.lo - l).abs() <= eps
                }
            })
            .map(|p| p.count)
    };
    d.events = merged
        .into_iter()
        .map(|(lambda, cont)| {
            let count_at = d.count_at(lambda);
            let count_before = piece_count(lambda, true).unwrap_or(count_at);
            let count_after = piece_count(lambda, false).unwrap_or(count_at);
            let kind = if cont {
                EventKind::Continuum
            } else if count_before != count_after {
                EventKind::CountChange
            } else {
                EventKind::FaceCrossing
            };
            Event {
                lambda,
                kind,
                count_before,
                count_at,
                count_after,
            }
        })
        .collect();
}

#[derive(Debug, Clone, Serialize)]
pub struct MeetingPoint {
    #[serde(serialize_with = "ser::vector")]
    pub x: DVector<f64>,
    pub regularity: Regularity,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnotatedEvent {
    #[serde(flatten)]
    pub event: Event,
    pub annotation: &'static str,
    /// Distinct branch endpoints at the event.
    pub meeting: Vec<MeetingPoint>,
}

/// Annotates every event of `d`, classifying the solutions that meet there.
pub fn detect_bifurcations(d: &BifurcationDiagram) -> Result<Vec<AnnotatedEvent>> {
    let eps = d.path.lambda_eps();
    d.events
        .iter()
        .map(|e| {
            let mut xs: Vec<DVector<f64>> = Vec::new();
            for b in &d.branches {
                if b.interval.iter().any(|&l| (l - e.lambda).abs() <= eps) {
                    let x = b.x_at(e.lambda);
                    if !xs.iter().any(|p| (p - &x).amax() <= d.merge_tol) {
                        xs.push(x);
                    }
                }
            }
            let meeting = xs
                .into_iter()
                .map(|x| {
                    let regularity = classify_regularity(&d.m, &x, &d.tol)?;
                    Ok(MeetingPoint { x, regularity })
                })
                .collect::<Result<Vec<_>>>()?;
            let annotation = match e.kind {
                EventKind::Continuum => "bifurcation (degenerate cone)",
                EventKind::CountChange => "bifurcation",
                EventKind::FaceCrossing => "regular crossing",
            };
            Ok(AnnotatedEvent {
                event: e.clone(),
                annotation,
                meeting,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    /// Branch index; continua follow the branches.
    pub branch: usize,
    pub alpha: IndexSet,
    pub lambda: f64,
    #[serde(serialize_with = "ser::vector")]
    pub x: DVector<f64>,
    #[serde(serialize_with = "ser::vector")]
    pub z: DVector<f64>,
}

impl SampleRow {
    fn new(branch: usize, alpha: IndexSet, lambda: f64, x: DVector<f64>) -> Self {
        let (z, _) = x_to_zw(&x);
        SampleRow {
            branch,
            alpha,
            lambda,
            x,
            z,
        }
    }
}

fn grid(lo: f64, hi: f64, samples: usize) -> impl Iterator<Item = f64> {
    let k = samples.max(2) - 1;
    (0..=k).map(move |i| {
        if i == k {
            hi
        } else {
            lo + (hi - lo) * i as f64 / k as f64
        }
    })
}

/// Uniform samples of every branch (one row for a single-point branch) and
/// of every continuum along its parameter box.
pub fn sample_diagram(d: &BifurcationDiagram, samples: usize) -> Result<Vec<SampleRow>> {
    let eps = d.path.lambda_eps();
    let mut rows = Vec::new();
    for (id, b) in d.branches.iter().enumerate() {
        let [lo, hi] = b.interval;
        if hi - lo <= eps {
            rows.push(SampleRow::new(id, b.alpha, lo, b.x_at(lo)));
            continue;
        }
        rows.extend(grid(lo, hi, samples).map(|l| SampleRow::new(id, b.alpha, l, b.x_at(l))));
    }
    for (k, c) in d.continua.iter().enumerate() {
        let id = d.branches.len() + k;
        let [lo, hi] = c.lambda;
        if hi - lo <= eps {
            rows.extend(
                c.solution
                    .samples(samples)
                    .into_iter()
                    .map(|x| SampleRow::new(id, c.alpha, lo, x)),
            );
            continue;
        }
        for l in grid(lo, hi, samples) {
            if let ConeOutcome::Continuum(s) = solve_cone(&d.m, c.alpha, &d.path.at(l), &d.tol)? {
                rows.extend(s.samples(2).into_iter().map(|x| SampleRow::new(id, c.alpha, l, x)));
            }
        }
    }
    Ok(rows)
}

/// Rectangular grid `lo..=hi` by `step` on both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let v = crate::io::parse_fixed(s, 3, "grid")?;
        let g = GridSpec {
            lo: v[0],
            hi: v[1],
            step: v[2],
        };
        if g.step <= 0.0 || g.hi < g.lo {
            return Err(LcpError::parse("grid", "need lo <= hi and step > 0"));
        }
        Ok(g)
    }

    pub fn points(&self) -> Vec<f64> {
        let k = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=k).map(|i| self.lo + self.step * i as f64).collect()
    }
}

/// `(f_M(x)_1, f_M(x)_2, x_1)` for every grid point `x`: the folded graph of `f_M`.
pub fn sample_pwl_graph(m: &DMatrix<f64>, grid: &GridSpec) -> Result<Vec<[f64; 3]>> {
    check_planar(m)?;
    let pts = grid.points();
    let mut out = Vec::with_capacity(pts.len() * pts.len());
    for &x1 in &pts {
        for &x2 in &pts {
            let y = crate::algebra::pwl_apply(m, &DVector::from_column_slice(&[x1, x2]));
            out.push([y[0], y[1], x1]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, rows)
    }

    fn trace(m: &[f64], path: &str) -> BifurcationDiagram {
        trace_path(&mat(m), &PwlPath::from_literal(path).unwrap(), &Tolerance::default()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn path_segments() {
        let p = PwlPath::from_literal("(0,0);(1,0);(1,1)").unwrap();
        assert_eq!(p.segments(), 2);
        assert_eq!(p.segment_range(1), [0.5, 1.0]);
        assert_eq!(p.at(0.75).as_slice(), &[1.0, 0.5]);
        let (a, b) = p.segment_affine(0);
        assert_eq!((&a + &b * 0.25).as_slice(), &[0.5, 0.0]);
        assert!(matches!(PwlPath::from_literal("(0,0)"), Err(LcpError::EmptyPath)));
    }

    #[test]
    fn constant_segment_is_allowed() {
        let d = trace(&[1.0, 2.0, 2.0, 1.0], "(1,1);(1,1)");
        assert_eq!(d.branches.len(), 1);
        assert_eq!(d.branches[0].interval, [0.0, 1.0]);
        assert!(d.events.is_empty());
    }

    #[test]
    fn case_a_branches() {
        let d = trace(&[1.0, 2.0, 2.0, 1.0], "(-4,0);(0,-4)");
        let got: Vec<(String, [f64; 2])> = d.branches.iter().map(|b| (b.alpha.to_string(), b.interval)).collect();
        assert_eq!(got.len(), 3);
        assert_eq!(got[0].0, "{1}");
        assert!(close(got[0].1[0], 0.0) && close(got[0].1[1], 2.0 / 3.0));
        assert_eq!(got[1].0, "{2}");
        assert!(close(got[1].1[0], 1.0 / 3.0) && close(got[1].1[1], 1.0));
        assert_eq!(got[2].0, "{1,2}");
        assert!(close(got[2].1[0], 1.0 / 3.0) && close(got[2].1[1], 2.0 / 3.0));
        let kinds: Vec<EventKind> = d.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EventKind::CountChange, EventKind::CountChange]);
        let counts: Vec<SolutionCount> = d.count_fn.iter().map(|p| p.count).collect();
        assert_eq!(
            counts,
            vec![
                SolutionCount::Finite(1),
                SolutionCount::Finite(3),
                SolutionCount::Finite(1)
            ]
        );
    }

    #[test]
    fn case_a_events_are_singular() {
        let d = trace(&[1.0, 2.0, 2.0, 1.0], "(-4,0);(0,-4)");
        let ev = detect_bifurcations(&d).unwrap();
        for e in &ev {
            assert_eq!(e.annotation, "bifurcation");
            assert!(e.meeting.iter().all(|p| p.regularity == Regularity::Singular));
        }
    }

    #[test]
    fn case_b_has_only_regular_crossings() {
        let d = trace(&[1.0, 2.0, 2.0, 1.0], "(-1,3);(3,-1)");
        let ev = detect_bifurcations(&d).unwrap();
        let lambdas: Vec<f64> = ev.iter().map(|e| e.event.lambda).collect();
        assert_eq!(lambdas.len(), 2);
        assert!(close(lambdas[0], 0.25) && close(lambdas[1], 0.75));
        assert!(ev.iter().all(|e| e.annotation == "regular crossing"));
        // x = (12λ - 7, 3 - 4λ) on the last branch.
        let rows = d.sample_at(1.0);
        assert_eq!(rows.len(), 1);
        assert!((&rows[0].x - DVector::from_column_slice(&[5.0, -1.0])).amax() < 1e-12);
    }

    #[test]
    fn degenerate_example_has_continuum_event() {
        let d = trace(&[1.0, 1.0, 1.0, 1.0], "(-4,0);(0,-4)");
        assert_eq!(d.events.len(), 1);
        let e = &d.events[0];
        assert_eq!(e.kind, EventKind::Continuum);
        assert!(close(e.lambda, 0.5));
        assert_eq!(e.count_at, SolutionCount::Continuum);
        assert_eq!(
            (e.count_before, e.count_after),
            (SolutionCount::Finite(1), SolutionCount::Finite(1))
        );
        let ends = d.continua[0].solution.endpoints();
        assert_eq!(ends.len(), 2);
        let ev = detect_bifurcations(&d).unwrap();
        assert_eq!(ev[0].annotation, "bifurcation (degenerate cone)");
    }

    #[test]
    fn components_join_on_shared_points() {
        let d = trace(&[1.0, 2.0, 2.0, 1.0], "(-4,0);(0,-4)");
        assert_eq!(d.connected_components(), vec![vec![0, 1, 2]]);
        let d = trace(&[1.0, 1.0, 1.0, 1.0], "(-4,0);(0,-4)");
        assert_eq!(d.connected_components(), vec![vec![0], vec![1]]);
    }

    #[test]
    fn band_of_continua_along_degenerate_cone() {
        // q(λ) runs along the degenerate ray -(1,1) of M = [[1,1],[1,1]].
        let d = trace(&[1.0, 1.0, 1.0, 1.0], "(-1,-1);(-3,-3)");
        assert!(d.continua.iter().any(|c| c.lambda == [0.0, 1.0]));
        assert_eq!(d.count_at(0.5), SolutionCount::Continuum);
    }

    #[test]
    fn sampling() {
        let d = trace(&[1.0, 2.0, 2.0, 1.0], "(-4,0);(0,-4)");
        let rows = sample_diagram(&d, 3).unwrap();
        let first: Vec<f64> = rows.iter().filter(|r| r.branch == 0).map(|r| r.lambda).collect();
        assert_eq!(first.len(), 3);
        assert!(close(first[1], 1.0 / 3.0));
        let r = &rows[1];
        assert!((&r.x - DVector::from_column_slice(&[4.0 / 3.0 - 4.0, 8.0 - 4.0])).amax() < 1e-12);
    }

    #[test]
    fn pwl_graph_examples() {
        let g = GridSpec {
            lo: -1.0,
            hi: 1.0,
            step: 1.0,
        };
        let pts = sample_pwl_graph(&mat(&[1.0, 2.0, 2.0, 1.0]), &g).unwrap();
        assert_eq!(pts.len(), 9);
        assert!(pts.contains(&[0.0, 0.0, 0.0]));
        assert!(pts.contains(&[1.0, 1.0, 1.0]));
        assert!(pts.contains(&[-3.0, -3.0, -1.0]));
        assert!(GridSpec::parse("0,1,0").is_err());
    }
}
