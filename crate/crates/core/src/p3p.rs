//! Candidate LED–receiver distances from three inter-bearing angles.
//!
//! With `d_i` the distance from the optical center to LED `i` and `α_ij` the
//! angle between the bearings to LEDs `i` and `j`, the law of cosines gives
//!
//! ```text
//! d_i² + d_j² − 2 d_i d_j cos α_ij = d_ij²        (ij ∈ {12, 13, 23})
//! ```
//!
//! Substituting `d1 = x d3`, `d2 = y d3`, `d12² = v d3²` and the ratios
//! `a = d23²/d12²`, `b = d13²/d12²` removes the scale and leaves
//!
//! ```text
//! (1−a) y² − a x² + a r x y − p y + 1 = 0
//! (1−b) x² − b y² + b r x y − q x + 1 = 0
//! ```
//!
//! with `r = 2cos α12`, `q = 2cos α13`, `p = 2cos α23`. Both equations are
//! quadratic in `y`; their resultant is a quartic in `x`. Each real positive
//! root gives `y` through the linear combination that cancels `y²`, then the
//! pair is refined with Newton's method on the bivariate system.

use thiserror::Error;

use crate::poly;

/// Bearings closer than this (radians) are treated as degenerate.
pub const MIN_BEARING_ANGLE: f64 = 1e-3;
/// Roots closer than this in `(x, y)` are merged.
pub const DEDUP_TOLERANCE: f64 = 1e-8;
/// Accepted law-of-cosines residual, relative to `d_ij²`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

const NEWTON_TOLERANCE: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum P3pError {
    #[error("invalid P3P problem: {0}")]
    InvalidProblem(&'static str),
    #[error("bearings are nearly collinear")]
    DegenerateGeometry,
    #[error("no positive real solution")]
    NoSolution,
}

/// Known inter-LED distances and measured inter-bearing angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P3pProblem {
    pub d12: f64,
    pub d13: f64,
    pub d23: f64,
    pub alpha12: f64,
    pub alpha13: f64,
    pub alpha23: f64,
}

impl P3pProblem {
    pub fn new(
        d12: f64,
        d13: f64,
        d23: f64,
        alpha12: f64,
        alpha13: f64,
        alpha23: f64,
    ) -> Result<Self, P3pError> {
        let problem = Self {
            d12,
            d13,
            d23,
            alpha12,
            alpha13,
            alpha23,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<(), P3pError> {
        let [d12, d13, d23] = [self.d12, self.d13, self.d23];
        if !(d12 > 0.0 && d13 > 0.0 && d23 > 0.0) || !(d12 + d13 + d23).is_finite() {
            return Err(P3pError::InvalidProblem("distances must be positive"));
        }
        if !(d12 < d13 + d23 && d13 < d12 + d23 && d23 < d12 + d13) {
            return Err(P3pError::InvalidProblem("distances violate the triangle inequality"));
        }
        let in_range = |a: f64| a > 0.0 && a < std::f64::consts::PI;
        if !(in_range(self.alpha12) && in_range(self.alpha13) && in_range(self.alpha23)) {
            return Err(P3pError::InvalidProblem("angles must lie in (0, pi)"));
        }
        Ok(())
    }

    /// Squared known distance and cosine of the measured angle for each
    /// pair, ordered 12, 13, 23.
    fn pairs(&self) -> [(usize, usize, f64, f64); 3] {
        [
            (0, 1, self.d12 * self.d12, self.alpha12.cos()),
            (0, 2, self.d13 * self.d13, self.alpha13.cos()),
            (1, 2, self.d23 * self.d23, self.alpha23.cos()),
        ]
    }
}

/// Scale-free form of a [`P3pProblem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedP3p {
    /// `2 cos α12`
    pub r: f64,
    /// `2 cos α13`
    pub q: f64,
    /// `2 cos α23`
    pub p: f64,
    /// `d23² / d12²`
    pub a: f64,
    /// `d13² / d12²`
    pub b: f64,
}

impl NormalizedP3p {
    /// Residuals of the two eliminated equations at `(x, y)`.
    pub fn residuals(&self, x: f64, y: f64) -> (f64, f64) {
        let Self { r, q, p, a, b } = *self;
        (
            (1.0 - a) * y * y - a * x * x + a * r * x * y - p * y + 1.0,
            (1.0 - b) * x * x - b * y * y + b * r * x * y - q * x + 1.0,
        )
    }

    fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let Self { r, q, p, a, b } = *self;
        [
            [-2.0 * a * x + a * r * y, 2.0 * (1.0 - a) * y + a * r * x - p],
            [2.0 * (1.0 - b) * x + b * r * y - q, -2.0 * b * y + b * r * x],
        ]
    }

    /// Ascending coefficients of the resultant quartic in `x`.
    fn resultant(&self) -> [f64; 5] {
        let [p0, p1, p2] = self.p_coeffs();
        let [q0, q1] = self.q_coeffs();
        let Self { r, q, p, a, b } = *self;
        let s = [-p, p * q + (a - b) * r, -p * (1.0 - b) - a * q * r, a * r];
        // P² − Q·S
        [
            p0 * p0 - q0 * s[0],
            2.0 * p0 * p1 - (q0 * s[1] + q1 * s[0]),
            p1 * p1 + 2.0 * p0 * p2 - (q0 * s[2] + q1 * s[1]),
            2.0 * p1 * p2 - (q0 * s[3] + q1 * s[2]),
            p2 * p2 - q1 * s[3],
        ]
    }

    /// Coefficients of the `y`-free term after cancelling `y²`.
    fn p_coeffs(&self) -> [f64; 3] {
        let Self { q, a, b, .. } = *self;
        [1.0 - a + b, -(1.0 - a) * q, (1.0 - a) * (1.0 - b) - a * b]
    }

    /// Coefficients of the `y` term after cancelling `y²`.
    fn q_coeffs(&self) -> [f64; 2] {
        let Self { r, p, b, .. } = *self;
        [-b * p, b * r]
    }
}

/// One solution of the distance system, with its scale-free auxiliaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceCandidate {
    pub distances: [f64; 3],
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistanceCandidateSet {
    pub candidates: Vec<DistanceCandidate>,
}

impl DistanceCandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DistanceCandidate> {
        self.candidates.iter()
    }
}

pub fn normalize(problem: &P3pProblem) -> Result<NormalizedP3p, P3pError> {
    problem.validate()?;
    let d12sq = problem.d12 * problem.d12;
    Ok(NormalizedP3p {
        r: 2.0 * problem.alpha12.cos(),
        q: 2.0 * problem.alpha13.cos(),
        p: 2.0 * problem.alpha23.cos(),
        a: problem.d23 * problem.d23 / d12sq,
        b: problem.d13 * problem.d13 / d12sq,
    })
}

fn newton_polish(norm: &NormalizedP3p, mut x: f64, mut y: f64) -> (f64, f64) {
    let size = |(e1, e2): (f64, f64)| e1.abs().max(e2.abs());
    let mut best = size(norm.residuals(x, y));
    for _ in 0..NEWTON_MAX_ITERS {
        let (e1, e2) = norm.residuals(x, y);
        let [[j11, j12], [j21, j22]] = norm.jacobian(x, y);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (e1 * j22 - e2 * j12) / det;
        let dy = (j11 * e2 - j21 * e1) / det;
        let (nx, ny) = (x - dx, y - dy);
        let res = size(norm.residuals(nx, ny));
        if !(res <= best) {
            break;
        }
        best = res;
        x = nx;
        y = ny;
        if dx.abs().max(dy.abs()) <= NEWTON_TOLERANCE * (1.0 + x.abs() + y.abs()) {
            break;
        }
    }
    (x, y)
}

/// `y` values paired with a root `x` of the resultant.
fn partner_ys(norm: &NormalizedP3p, x: f64) -> Vec<f64> {
    let [p0, p1, p2] = norm.p_coeffs();
    let [q0, q1] = norm.q_coeffs();
    let pv = p0 + x * (p1 + x * p2);
    let qv = q0 + x * q1;
    let scale = 1.0 + pv.abs() + q0.abs() + (q1 * x).abs();
    let mut ys = Vec::with_capacity(3);
    if qv.abs() > 1e-12 * scale {
        ys.push(-pv / qv);
    }
    if qv.abs() <= 1e-6 * scale {
        // Near a shared root of both relations the linear form is 0/0; take
        // both branches of the second equation (its y² coefficient is -b,
        // never zero) and let the residual test decide.
        let NormalizedP3p { r, q, b, .. } = *norm;
        ys.extend(poly::quadratic_roots((1.0 - b) * x * x - q * x + 1.0, b * r * x, -b));
    }
    ys
}

pub fn solve_candidates(norm: &NormalizedP3p, d12: f64) -> Result<DistanceCandidateSet, P3pError> {
    let limit = 2.0 * MIN_BEARING_ANGLE.cos();
    if norm.r > limit || norm.q > limit || norm.p > limit {
        return Err(P3pError::DegenerateGeometry);
    }
    if !(d12 > 0.0) {
        return Err(P3pError::InvalidProblem("d12 must be positive"));
    }

    let alpha = |c: f64| (c / 2.0).clamp(-1.0, 1.0).acos();
    let problem = P3pProblem {
        d12,
        d13: d12 * norm.b.sqrt(),
        d23: d12 * norm.a.sqrt(),
        alpha12: alpha(norm.r),
        alpha13: alpha(norm.q),
        alpha23: alpha(norm.p),
    };

    let mut roots: Vec<(f64, f64)> = Vec::with_capacity(4);
    for x0 in poly::real_roots(&norm.resultant()) {
        if !(x0 > 0.0) {
            continue;
        }
        for y0 in partner_ys(norm, x0) {
            let (x, y) = newton_polish(norm, x0, y0);
            if !(x > 0.0 && y > 0.0) {
                continue;
            }
            if roots
                .iter()
                .any(|&(rx, ry)| (rx - x).abs() < DEDUP_TOLERANCE && (ry - y).abs() < DEDUP_TOLERANCE)
            {
                continue;
            }
            roots.push((x, y));
        }
    }

    let mut candidates: Vec<DistanceCandidate> = roots
        .into_iter()
        .filter_map(|(x, y)| {
            let v = x * x + y * y - x * y * norm.r;
            if !(v > 0.0) {
                return None;
            }
            let d3 = d12 / v.sqrt();
            let cand = DistanceCandidate {
                distances: [x * d3, y * d3, d3],
                x,
                y,
                v,
            };
            is_consistent(&cand.distances, &problem).then_some(cand)
        })
        .collect();
    if candidates.is_empty() {
        return Err(P3pError::NoSolution);
    }
    candidates.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    candidates.truncate(4);
    Ok(DistanceCandidateSet { candidates })
}

/// Normalizes and solves in one step.
pub fn solve(problem: &P3pProblem) -> Result<DistanceCandidateSet, P3pError> {
    solve_candidates(&normalize(problem)?, problem.d12)
}

fn pair_residuals(d: &[f64; 3], problem: &P3pProblem) -> [(f64, f64); 3] {
    problem.pairs().map(|(i, j, dij2, cos)| {
        let res = d[i] * d[i] + d[j] * d[j] - 2.0 * d[i] * d[j] * cos - dij2;
        (res.abs(), dij2)
    })
}

fn is_consistent(d: &[f64; 3], problem: &P3pProblem) -> bool {
    pair_residuals(d, problem)
        .iter()
        .all(|&(res, dij2)| res <= RESIDUAL_TOLERANCE * dij2)
}

/// Largest absolute law-of-cosines residual over the three pairs.
pub fn law_of_cosines_residual(candidate: &[f64; 3], problem: &P3pProblem) -> f64 {
    pair_residuals(candidate, problem)
        .iter()
        .fold(0.0, |m, &(res, _)| m.max(res))
}
