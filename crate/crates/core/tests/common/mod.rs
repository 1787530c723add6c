//! Shared helpers for integration tests: random P3P problems with known
//! ground truth and a brute-force root finder that does not use the
//! resultant.

#![allow(dead_code)]

use nalgebra::Vector3;
use rand::Rng;
use rp3p::p3p::{NormalizedP3p, P3pProblem};

pub struct GroundTruth {
    pub problem: P3pProblem,
    pub distances: [f64; 3],
}

/// Camera at the origin, three LEDs in front of it at 0.5 to 5 m.
pub fn random_problem<R: Rng>(rng: &mut R) -> GroundTruth {
    loop {
        let leds: [Vector3<f64>; 3] = [(); 3].map(|_| {
            let dir = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.2..1.0),
            )
            .normalize();
            dir * rng.random_range(0.5..5.0)
        });
        let angle = |i: usize, j: usize| leds[i].angle(&leds[j]);
        let (a12, a13, a23) = (angle(0, 1), angle(0, 2), angle(1, 2));
        let area = (leds[1] - leds[0]).cross(&(leds[2] - leds[0])).norm();
        if a12.min(a13).min(a23) < 0.02 || area < 1e-3 {
            continue;
        }
        let d = |i: usize, j: usize| (leds[i] - leds[j]).norm();
        let problem = P3pProblem::new(d(0, 1), d(0, 2), d(1, 2), a12, a13, a23).unwrap();
        return GroundTruth {
            problem,
            distances: leds.map(|l| l.norm()),
        };
    }
}

const X_MIN: f64 = 0.01;
const X_MAX: f64 = 100.0;
const GRID: usize = 40_000;

fn e1(n: &NormalizedP3p, x: f64, y: f64) -> f64 {
    (1.0 - n.a) * y * y - n.a * x * x + n.a * n.r * x * y - n.p * y + 1.0
}

fn e2(n: &NormalizedP3p, x: f64, y: f64) -> f64 {
    (1.0 - n.b) * x * x - n.b * y * y + n.b * n.r * x * y - n.q * x + 1.0
}

/// Point on branch `sign` of the curve `e2 = 0`, which is quadratic in `y`
/// with leading coefficient `-b`.
fn branch(n: &NormalizedP3p, x: f64, sign: f64) -> Option<f64> {
    let c = (1.0 - n.b) * x * x - n.q * x + 1.0;
    let disc = n.b * n.b * n.r * n.r * x * x + 4.0 * n.b * c;
    if disc < 0.0 {
        return None;
    }
    let y = (n.b * n.r * x + sign * disc.sqrt()) / (2.0 * n.b);
    (X_MIN..=X_MAX).contains(&y).then_some(y)
}

/// Real roots of the normalized system in `[0.01, 100]²`, found by walking
/// both branches of `e2 = 0` on a log-spaced grid in `x` and bisecting every
/// sign change of `e1` along the branch.
pub fn oracle_roots(n: &NormalizedP3p) -> Vec<(f64, f64)> {
    let ratio = (X_MAX / X_MIN).ln() / GRID as f64;
    let mut roots: Vec<(f64, f64)> = Vec::new();
    for sign in [-1.0, 1.0] {
        let f = |x: f64| branch(n, x, sign).map(|y| e1(n, x, y));
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=GRID {
            let x = X_MIN * (ratio * i as f64).exp();
            let Some(fx) = f(x) else {
                prev = None;
                continue;
            };
            if let Some((px, pf)) = prev {
                if pf.signum() != fx.signum() || fx == 0.0 {
                    if let Some(root) = bisect(&f, px, pf, x) {
                        let y = branch(n, root, sign).unwrap();
                        let dup = roots
                            .iter()
                            .any(|&(rx, ry)| (rx - root).abs() < 1e-9 * root && (ry - y).abs() < 1e-9 * y);
                        if !dup && e1(n, root, y).abs() < 1e-8 && e2(n, root, y).abs() < 1e-8 {
                            roots.push((root, y));
                        }
                    }
                }
            }
            prev = Some((x, fx));
        }
    }
    roots
}

fn bisect(f: &impl Fn(f64) -> Option<f64>, mut lo: f64, mut flo: f64, mut hi: f64) -> Option<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Solver candidates in `(x, y)` form that match `root` within `rel`.
pub fn matches(solver: &[(f64, f64)], root: (f64, f64), rel: f64) -> bool {
    solver
        .iter()
        .any(|&(x, y)| (x - root.0).abs() <= rel * root.0 && (y - root.1).abs() <= rel * root.1)
}

/// Spearman rank correlation for samples without ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}
