//! Numerical convexity probes and reports.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scaled second differences above this count as strict.
pub const STRICT_SECOND_DIFFERENCE: f64 = 1e-8;
/// Midpoint margins above this count as strict.
pub const STRICT_MARGIN: f64 = 1e-9;
/// Second differences or margins below this are convexity violations.
pub const VIOLATION: f64 = -1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("empty sampling domain")]
    EmptyDomain,
    #[error("grid needs at least three increasing points")]
    BadGrid,
}

/// Midpoint margin `½(f(p₁) + f(p₂)) − f((p₁ + p₂)/2)`.
pub fn midpoint_probe<E>(
    f: impl Fn(&[f64]) -> Result<f64, E>,
    p1: &[f64],
    p2: &[f64],
) -> Result<f64, E> {
    let mid: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(0.5 * (f(p1)? + f(p2)?) - f(&mid)?)
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, p: &[f64], step: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + step;
            let fp = f(&q);
            q[i] = p[i] - step;
            let fm = f(&q);
            q[i] = p[i];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Central-difference Hessian, symmetrised.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, p: &[f64], step: f64) -> DMatrix<f64> {
    let n = p.len();
    let mut h = DMatrix::zeros(n, n);
    let mut q = p.to_vec();
    let f0 = f(p);
    for i in 0..n {
        q[i] = p[i] + step;
        let fp = f(&q);
        q[i] = p[i] - step;
        let fm = f(&q);
        q[i] = p[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (step * step);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                q[i] = p[i] + si * step;
                q[j] = p[j] + sj * step;
                let v = f(&q);
                q[i] = p[i];
                q[j] = p[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * step * step);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    h.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `count` seeded pairs of distinct points in the box `bounds`.
pub fn segment_sampler(
    bounds: &[(f64, f64)],
    count: usize,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>, HarnessError> {
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(HarnessError::EmptyDomain);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        if a != b {
            out.push((a, b));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    StrictlyConvex,
    Convex,
    NotConvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    Violation,
    Inconclusive,
    EvaluationFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub input: Vec<f64>,
    pub value: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub samples: usize,
    pub min_midpoint_margin: f64,
    pub min_second_difference: Option<f64>,
    pub verdict: Verdict,
    pub inconclusive: usize,
    pub failures: Vec<Witness>,
}

fn classify(value: f64, strict: f64) -> Option<WitnessKind> {
    if value < VIOLATION {
        Some(WitnessKind::Violation)
    } else if value <= strict {
        Some(WitnessKind::Inconclusive)
    } else {
        None
    }
}

#[derive(Default)]
struct ReportBuilder {
    samples: usize,
    min_margin: Option<f64>,
    min_second: Option<f64>,
    failures: Vec<Witness>,
}

impl ReportBuilder {
    fn margin(&mut self, input: Vec<f64>, m: f64) {
        self.samples += 1;
        self.min_margin = Some(self.min_margin.map_or(m, |x| x.min(m)));
        if let Some(kind) = classify(m, STRICT_MARGIN) {
            self.failures.push(Witness {
                kind,
                input,
                value: m,
                note: "midpoint margin".into(),
            });
        }
    }

    fn second(&mut self, input: Vec<f64>, d: f64) {
        self.min_second = Some(self.min_second.map_or(d, |x| x.min(d)));
        if let Some(kind) = classify(d, STRICT_SECOND_DIFFERENCE) {
            self.failures.push(Witness {
                kind,
                input,
                value: d,
                note: "second difference".into(),
            });
        }
    }

    fn failure(&mut self, input: Vec<f64>, note: String) {
        self.failures.push(Witness {
            kind: WitnessKind::EvaluationFailure,
            input,
            value: f64::NAN,
            note,
        });
    }

    fn finish(self) -> ConvexityReport {
        let count = |k| self.failures.iter().filter(|w| w.kind == k).count();
        let violations = count(WitnessKind::Violation) + count(WitnessKind::EvaluationFailure);
        let inconclusive = count(WitnessKind::Inconclusive);
        let verdict = if violations > 0 {
            Verdict::NotConvex
        } else if inconclusive > 0 {
            Verdict::Convex
        } else {
            Verdict::StrictlyConvex
        };
        ConvexityReport {
            samples: self.samples,
            min_midpoint_margin: self.min_margin.unwrap_or(f64::NAN),
            min_second_difference: self.min_second,
            verdict,
            inconclusive,
            failures: self.failures,
        }
    }
}

/// Midpoint probes of `f` over the given segments.
pub fn probe_segments<E: std::fmt::Display>(
    f: impl Fn(&[f64]) -> Result<f64, E>,
    segments: &[(Vec<f64>, Vec<f64>)],
) -> ConvexityReport {
    probe_segments_with_margins(f, segments).0
}

/// As [`probe_segments`], also returning each margin (`NaN` where the
/// evaluation failed).
pub fn probe_segments_with_margins<E: std::fmt::Display>(
    f: impl Fn(&[f64]) -> Result<f64, E>,
    segments: &[(Vec<f64>, Vec<f64>)],
) -> (ConvexityReport, Vec<f64>) {
    let mut b = ReportBuilder::default();
    let mut margins = Vec::with_capacity(segments.len());
    for (p1, p2) in segments {
        let mut input = p1.clone();
        input.extend_from_slice(p2);
        match midpoint_probe(&f, p1, p2) {
            Ok(m) => {
                b.margin(input, m);
                margins.push(m);
            }
            Err(e) => {
                b.failure(input, e.to_string());
                margins.push(f64::NAN);
            }
        }
    }
    (b.finish(), margins)
}

/// A scan of a one-variable function over an increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub grid: Vec<f64>,
    /// `None` where evaluation failed.
    pub values: Vec<Option<f64>>,
    /// Divided second differences scaled by the squared local half-span, so
    /// that on a uniform grid they are ordinary second differences.
    pub second_differences: Vec<f64>,
    /// Chord margins: the chord through the two neighbours minus the value.
    pub midpoint_margins: Vec<f64>,
    pub increasing: bool,
    pub decreasing: bool,
    pub report: ConvexityReport,
}

pub fn convexity_scan<E: std::fmt::Display>(
    grid: &[f64],
    f: impl Fn(f64) -> Result<f64, E>,
) -> Result<Scan, HarnessError> {
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(HarnessError::BadGrid);
    }
    let mut b = ReportBuilder::default();
    let values: Vec<Option<f64>> = grid
        .iter()
        .map(|&t| match f(t) {
            Ok(v) => Some(v),
            Err(e) => {
                b.failure(vec![t], e.to_string());
                None
            }
        })
        .collect();
    let mut second_differences = Vec::new();
    let mut midpoint_margins = Vec::new();
    for i in 1..grid.len() - 1 {
        let (Some(f0), Some(f1), Some(f2)) = (values[i - 1], values[i], values[i + 1]) else {
            continue;
        };
        let (t0, t1, t2) = (grid[i - 1], grid[i], grid[i + 1]);
        let slope_r = (f2 - f1) / (t2 - t1);
        let slope_l = (f1 - f0) / (t1 - t0);
        let half = 0.5 * (t2 - t0);
        // divided difference (slope_r − slope_l)/half times half²
        let d2 = (slope_r - slope_l) * half;
        let w = (t1 - t0) / (t2 - t0);
        let margin = (1.0 - w) * f0 + w * f2 - f1;
        b.second(vec![t1], d2);
        b.margin(vec![t0, t1, t2], margin);
        second_differences.push(d2);
        midpoint_margins.push(margin);
    }
    let known: Vec<f64> = values.iter().flatten().copied().collect();
    let increasing = known.windows(2).all(|w| w[1] > w[0]);
    let decreasing = known.windows(2).all(|w| w[1] < w[0]);
    Ok(Scan {
        grid: grid.to_vec(),
        values,
        second_differences,
        midpoint_margins,
        increasing,
        decreasing,
        report: b.finish(),
    })
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyp::wedge_distance;
    use std::convert::Infallible;

    fn ok(v: f64) -> Result<f64, Infallible> {
        Ok(v)
    }

    #[test]
    fn linear_margin_vanishes() {
        let f = |p: &[f64]| ok(2.0 * p[0] - 3.0 * p[1] + 1.0);
        let m = midpoint_probe(f, &[0.3, -1.2], &[2.5, 0.7]).unwrap();
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn wedge_margins_positive() {
        let segs = segment_sampler(&[(-3.0, 3.0), (-3.0, 3.0)], 200, 3).unwrap();
        let r = probe_segments(|p: &[f64]| ok(wedge_distance(p[0], p[1])), &segs);
        assert!(r.min_midpoint_margin > 0.0);
        assert_eq!(r.samples, 200);
    }

    #[test]
    fn quadratic_derivatives() {
        // f = ½ pᵀ Q p + cᵀ p
        let q = [[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 3.0]];
        let c = [1.0, -2.0, 0.5];
        let f = |p: &[f64]| {
            let mut s = 0.0;
            for i in 0..3 {
                s += c[i] * p[i];
                for j in 0..3 {
                    s += 0.5 * q[i][j] * p[i] * p[j];
                }
            }
            s
        };
        let p = [0.4, -0.7, 1.1];
        let h = fd_hessian(f, &p, 1e-4);
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)] - q[i][j]).abs() < 1e-6);
            }
        }
        let g = fd_gradient(f, &p, 1e-4);
        for i in 0..3 {
            let exact: f64 = c[i] + (0..3).map(|j| q[i][j] * p[j]).sum::<f64>();
            assert!((g[i] - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn wedge_hessian_at_origin() {
        let h = fd_hessian(|p| wedge_distance(p[0], p[1]), &[0.0, 0.0], 1e-4);
        assert!(min_eigenvalue(&h) > 0.0);
    }

    #[test]
    fn sampler_contract() {
        assert!(segment_sampler(&[(0.0, 1.0)], 0, 1).unwrap().is_empty());
        assert_eq!(segment_sampler(&[], 3, 1), Err(HarnessError::EmptyDomain));
        assert_eq!(segment_sampler(&[(1.0, 1.0)], 3, 1), Err(HarnessError::EmptyDomain));
        let b = [(-1.0, 2.0), (5.0, 6.0)];
        let s1 = segment_sampler(&b, 50, 9).unwrap();
        assert_eq!(s1, segment_sampler(&b, 50, 9).unwrap());
        for (p, q) in &s1 {
            assert_ne!(p, q);
            for v in [p, q] {
                assert!((-1.0..2.0).contains(&v[0]) && (5.0..6.0).contains(&v[1]));
            }
        }
    }

    #[test]
    fn scan_verdicts() {
        let grid = linspace(-1.0, 1.0, 21);
        let affine = convexity_scan(&grid, |t| ok(3.0 * t - 1.0)).unwrap();
        assert_eq!(affine.report.verdict, Verdict::Convex);
        assert!(affine.second_differences.iter().all(|d| d.abs() < 1e-9));
        assert!(affine.increasing);
        let square = convexity_scan(&grid, |t| ok(t * t)).unwrap();
        assert_eq!(square.report.verdict, Verdict::StrictlyConvex);
        // uniform grid: ordinary second difference 2h²
        let h = 0.1;
        assert!((square.second_differences[3] - 2.0 * h * h).abs() < 1e-12);
        let concave = convexity_scan(&grid, |t| ok(-t * t)).unwrap();
        assert_eq!(concave.report.verdict, Verdict::NotConvex);
        let failing = convexity_scan(&grid, |t| if t > 0.5 { Err("boom") } else { Ok(t * t) }).unwrap();
        assert!(failing
            .report
            .failures
            .iter()
            .any(|w| w.kind == WitnessKind::EvaluationFailure));
        assert_eq!(failing.report.verdict, Verdict::NotConvex);
        assert!(convexity_scan(&[0.0, 1.0], |t| ok(t)).is_err());
    }

    #[test]
    fn nonuniform_grid_scaling() {
        let grid: Vec<f64> = (0..10).map(|i| (0.3 * i as f64).exp()).collect();
        let s = convexity_scan(&grid, |t| ok(t * t)).unwrap();
        for (i, d) in s.second_differences.iter().enumerate() {
            let half = 0.5 * (grid[i + 2] - grid[i]);
            assert!((d - 2.0 * half * half).abs() < 1e-9 * (1.0 + d));
        }
    }

    #[test]
    fn report_serialises() {
        let grid = linspace(0.0, 1.0, 5);
        let s = convexity_scan(&grid, |t| ok(t * t)).unwrap();
        let text = serde_json::to_string(&s.report).unwrap();
        assert!(text.contains(r#""verdict":"StrictlyConvex""#));
    }
}
