//! Planar cone geometry: the rays of `[I, -M]`, the angular sectors between
//! them, and the cyclic coverage profile ([`ConeSignature`]) used as the key
//! for LCP equivalence in the plane.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::Serialize;

use crate::algebra::{ComplementaryCone, IndexSet};
use crate::error::{LcpError, Result};
use crate::tol::Tolerance;

/// Rays closer than this (radians) are merged.
pub const ANGLE_TOL: f64 = 1e-9;

/// A column of `E_M = [I, -M]` (0-based column index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Generator {
    Identity(usize),
    NegM(usize),
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Identity(j) => write!(f, "I{}", j + 1),
            Generator::NegM(j) => write!(f, "-M{}", j + 1),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Ray {
    /// Angle in `[0, 2π)`.
    pub angle: f64,
    pub direction: [f64; 2],
    pub sources: Vec<Generator>,
}

/// Deduplicated generator rays sorted by angle.
#[derive(Debug, Clone, Serialize)]
pub struct RayArrangement {
    pub rays: Vec<Ray>,
}

impl RayArrangement {
    /// Index of the ray within [`ANGLE_TOL`] of `angle`, if any.
    pub fn ray_at(&self, angle: f64) -> Option<usize> {
        self.rays
            .iter()
            .position(|r| angle_distance(r.angle, angle) <= ANGLE_TOL)
    }

    /// Index `i` of the open sector `(angle_i, angle_{i+1})` containing `angle`.
    /// Callers should rule out [`Self::ray_at`] first.
    pub fn sector_of(&self, angle: f64) -> usize {
        let k = self.rays.len();
        (0..k)
            .find(|&i| {
                let lo = self.rays[i].angle;
                let span = self.sector_span(i);
                let rel = (angle - lo).rem_euclid(TAU);
                rel > 0.0 && rel < span
            })
            .unwrap_or(k - 1)
    }

    /// Angular width of sector `i`.
    pub fn sector_span(&self, i: usize) -> f64 {
        let k = self.rays.len();
        let lo = self.rays[i].angle;
        let hi = self.rays[(i + 1) % k].angle;
        let span = (hi - lo).rem_euclid(TAU);
        if k == 1 || span == 0.0 {
            TAU
        } else {
            span
        }
    }

    /// Unit vector bisecting sector `i`.
    pub fn sector_midpoint(&self, i: usize) -> Vector2<f64> {
        let mid = self.rays[i].angle + 0.5 * self.sector_span(i);
        Vector2::new(mid.cos(), mid.sin())
    }

    /// Position of a generator column in the sorted ray list.
    pub fn ray_of(&self, g: Generator) -> usize {
        self.rays
            .iter()
            .position(|r| r.sources.contains(&g))
            .expect("every generator is carried by a ray")
    }
}

fn angle_of(v: &[f64; 2]) -> f64 {
    v[1].atan2(v[0]).rem_euclid(TAU)
}

fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

pub(crate) fn check_planar(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(LcpError::DimensionMismatch {
            what: "planar matrix size",
            expected: 2,
            got: m.nrows().max(m.ncols()),
        });
    }
    Ok(())
}

/// The rays spanned by `e_1, e_2, -M_1, -M_2`, merged and sorted by angle.
pub fn arrangement(m: &DMatrix<f64>) -> Result<RayArrangement> {
    check_planar(m)?;
    let mut gens: Vec<(Generator, [f64; 2])> = vec![
        (Generator::Identity(0), [1.0, 0.0]),
        (Generator::Identity(1), [0.0, 1.0]),
    ];
    for j in 0..2 {
        let d = [-m[(0, j)], -m[(1, j)]];
        let norm = d[0].hypot(d[1]);
        if norm == 0.0 || !norm.is_finite() {
            return Err(LcpError::ZeroGenerator { column: j + 1 });
        }
        gens.push((Generator::NegM(j), [d[0] / norm, d[1] / norm]));
    }
    gens.sort_by(|a, b| angle_of(&a.1).total_cmp(&angle_of(&b.1)));

    let mut rays: Vec<Ray> = Vec::new();
    for (g, d) in gens {
        let angle = angle_of(&d);
        match rays.iter_mut().find(|r| angle_distance(r.angle, angle) <= ANGLE_TOL) {
            Some(r) => r.sources.push(g),
            None => rays.push(Ray {
                angle,
                direction: d,
                sources: vec![g],
            }),
        }
    }
    Ok(RayArrangement { rays })
}

/// Cyclic coverage profile of a planar cone configuration.
///
/// `sectors[i]` counts the non-degenerate complementary cones containing the
/// open sector that starts at ray `i`; `degenerate_rays[i]` is set when a
/// degenerate complementary cone lies on ray `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConeSignature {
    pub sectors: Vec<u32>,
    pub degenerate_rays: Vec<bool>,
}

impl ConeSignature {
    /// Ray/sector tokens in cyclic order: rays are `-1` (plain) or `-2`
    /// (degenerate), sectors are their coverage counts.
    fn tokens(&self) -> Vec<i64> {
        self.degenerate_rays
            .iter()
            .zip(&self.sectors)
            .flat_map(|(&d, &s)| [if d { -2 } else { -1 }, s as i64])
            .collect()
    }

    /// Lexicographically smallest token sequence over all rotations and the
    /// reflection. Two signatures match iff their canonical forms are equal.
    pub fn canonical(&self) -> Vec<i64> {
        let fwd = self.tokens();
        let len = fwd.len();
        if len == 0 {
            return fwd;
        }
        // Reverse, then rotate so a ray token leads again.
        let mut rev: Vec<i64> = fwd.iter().rev().copied().collect();
        rev.rotate_right(1);
        let mut best: Option<Vec<i64>> = None;
        for seq in [&fwd, &rev] {
            for start in (0..len).step_by(2) {
                let cand: Vec<i64> = seq[start..].iter().chain(&seq[..start]).copied().collect();
                if best.as_ref().is_none_or(|b| cand < *b) {
                    best = Some(cand);
                }
            }
        }
        best.unwrap_or_default()
    }

    /// Stable 64-bit FNV-1a digest of the canonical form, as 16 hex digits.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in self.canonical() {
            for b in t.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }

    /// Distinct sector counts, sorted.
    pub fn count_values(&self) -> Vec<u32> {
        let mut v = self.sectors.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Coverage profile of `M`. Sector `i` is covered by cone `alpha` iff
/// `C_M(alpha) p = midpoint` has a strictly positive solution; the midpoint is
/// never on the boundary of a non-degenerate cone, so no tolerance is needed.
pub fn signature(m: &DMatrix<f64>, tol: &Tolerance) -> Result<ConeSignature> {
    let arr = arrangement(m)?;
    let k = arr.rays.len();
    let mut sectors = vec![0u32; k];
    let mut degenerate_rays = vec![false; k];
    let det_tol = tol.det(m);
    for alpha in IndexSet::all(2) {
        let cone = ComplementaryCone::new(m, alpha, det_tol)?;
        if cone.degenerate {
            for j in 0..2 {
                degenerate_rays[arr.ray_of(column_generator(alpha, j))] = true;
            }
            continue;
        }
        let lu = cone.generators.clone().lu();
        for (i, count) in sectors.iter_mut().enumerate() {
            let mid = arr.sector_midpoint(i);
            let rhs = DVector::from_column_slice(mid.as_slice());
            if let Some(p) = lu.solve(&rhs) {
                if p.iter().all(|&v| v > 0.0) {
                    *count += 1;
                }
            }
        }
    }
    Ok(ConeSignature {
        sectors,
        degenerate_rays,
    })
}

fn column_generator(alpha: IndexSet, j: usize) -> Generator {
    if alpha.contains(j) {
        Generator::NegM(j)
    } else {
        Generator::Identity(j)
    }
}

/// True iff the two cyclic profiles coincide up to rotation and reflection.
pub fn signatures_match(a: &ConeSignature, b: &ConeSignature) -> bool {
    a.sectors.len() == b.sectors.len() && a.canonical() == b.canonical()
}

/// Number of solutions predicted by the sector containing `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RegionCount {
    Count {
        count: u32,
    },
    /// `q` lies on a ray carrying a degenerate cone.
    Continuum,
    /// `q` lies on a non-degenerate ray between two sectors.
    Boundary {
        ray: usize,
        before: u32,
        after: u32,
    },
    Origin,
}

pub fn count_solutions_by_region(m: &DMatrix<f64>, q: &DVector<f64>, tol: &Tolerance) -> Result<RegionCount> {
    check_planar(m)?;
    if q.len() != 2 {
        return Err(LcpError::DimensionMismatch {
            what: "q length",
            expected: 2,
            got: q.len(),
        });
    }
    let arr = arrangement(m)?;
    let sig = signature(m, tol)?;
    if q.amax() <= tol.abs(m, Some(q)) {
        return Ok(RegionCount::Origin);
    }
    let angle = angle_of(&[q[0], q[1]]);
    if let Some(i) = arr.ray_at(angle) {
        if sig.degenerate_rays[i] {
            return Ok(RegionCount::Continuum);
        }
        let k = arr.rays.len();
        return Ok(RegionCount::Boundary {
            ray: i,
            before: sig.sectors[(i + k - 1) % k],
            after: sig.sectors[i],
        });
    }
    Ok(RegionCount::Count {
        count: sig.sectors[arr.sector_of(angle)],
    })
}

/// Smallest angular distance from `q` to any ray of `M`'s arrangement.
pub fn distance_to_rays(m: &DMatrix<f64>, q: &DVector<f64>) -> Result<f64> {
    let arr = arrangement(m)?;
    let angle = angle_of(&[q[0], q[1]]);
    Ok(arr
        .rays
        .iter()
        .map(|r| angle_distance(r.angle, angle))
        .fold(f64::INFINITY, f64::min))
}
