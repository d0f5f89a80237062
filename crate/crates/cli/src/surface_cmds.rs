use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};
use shear_core::harness::{convexity_scan, linspace, Verdict};
use shear_core::surface::{
    curve_length, curve_log_length, holonomy, thurston_distance_estimate, CurveWord,
    EarthquakeLine, EarthquakeSide, ShearPoint, StretchLine, SurfaceError, TriangulatedSurface,
};

use crate::output::{field_error, Outcome, Table};
use crate::CliError;

const TORUS_GENERATORS: [&str; 3] = ["0 R 1 L", "1 R 2 L", "2 R 0 L"];
/// Crosses all three torus edges.
const TORUS_TRANSVERSE: &str = "0 L 2 L 1 R 2 R";
/// Relative agreement between the robust length and the matrix trace.
const TRACE_TOL: f64 = 1e-9;

fn torus() -> TriangulatedSurface {
    TriangulatedSurface::punctured_torus()
}

fn words(list: &[&str]) -> Vec<CurveWord> {
    list.iter().map(|w| w.parse().expect("valid word")).collect()
}

fn point(s: &TriangulatedSurface, x: &[f64], field: &str) -> Result<ShearPoint, CliError> {
    s.shear_point(x).map_err(|e| field_error(field, e))
}

fn check_curves(s: &TriangulatedSurface, curves: &[CurveWord]) -> Result<(), CliError> {
    if curves.is_empty() {
        return Err(field_error("curves", "empty"));
    }
    for (k, c) in curves.iter().enumerate() {
        s.resolve(c).map_err(|e| field_error(format!("curves[{k}]"), e))?;
    }
    Ok(())
}

/// Defaults that only make sense on the built-in torus.
fn torus_default<T>(s: &TriangulatedSurface, field: &str, v: Option<T>, d: T) -> Result<T, CliError> {
    match v {
        Some(v) => Ok(v),
        None if *s == torus() => Ok(d),
        None => Err(field_error(field, "required for a custom surface")),
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::StrictlyConvex => "StrictlyConvex",
        Verdict::Convex => "Convex",
        Verdict::NotConvex => "NotConvex",
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthsConfig {
    #[serde(default = "torus")]
    surface: TriangulatedSurface,
    x: Option<Vec<f64>>,
    curves: Option<Vec<CurveWord>>,
}

/// Columns: curve_id, word, trace, length, status.
pub fn lengths(cfg: LengthsConfig) -> Result<Outcome, CliError> {
    let s = &cfg.surface;
    let x = point(s, &cfg.x.unwrap_or_else(|| vec![0.0; s.n_edges()]), "x")?;
    let curves = match cfg.curves {
        Some(c) => c,
        None => {
            let mut c = if *s == torus() {
                words(&TORUS_GENERATORS)
            } else {
                s.closed_words(3)
            };
            c.extend((0..s.puncture_cycles().len()).map(|p| s.peripheral_word(p)));
            c
        }
    };
    check_curves(s, &curves)?;
    let mut table = Table::new(&["curve_id", "word", "trace", "length", "status"]);
    let mut worst = 0.0f64;
    let mut parabolic = 0;
    for (k, c) in curves.iter().enumerate() {
        let tr = holonomy(s, &x, c).expect("validated").trace();
        let (len, status) = match curve_length(s, &x, c) {
            Ok(l) => {
                // the matrix route is only trustworthy away from trace 2
                if tr > 2.5 && tr.is_finite() {
                    let direct = 2.0 * (0.5 * tr).acosh();
                    worst = worst.max((l - direct).abs() / direct);
                }
                (l, "hyperbolic")
            }
            Err(SurfaceError::NotHyperbolic { .. }) => {
                parabolic += 1;
                (f64::NAN, "not_hyperbolic")
            }
            Err(e) => return Err(CliError::Failed(format!("curves[{k}]: {e}"))),
        };
        table.push(vec![k.into(), c.to_string().into(), tr.into(), len.into(), status.into()]);
    }
    Ok(Outcome {
        table,
        summary: json!({
            "curves": curves.len(),
            "not_hyperbolic": parabolic,
            "max_trace_disagreement": worst,
            "tolerance": TRACE_TOL,
        }),
        passed: worst <= TRACE_TOL,
    })
}

fn scan_summary(
    curves: &[CurveWord],
    reports: Vec<shear_core::harness::Scan>,
) -> (Value, bool) {
    let mut passed = true;
    let per_curve: Vec<Value> = curves
        .iter()
        .zip(reports)
        .map(|(c, scan)| {
            passed &= scan.report.verdict != Verdict::NotConvex;
            json!({
                "word": c.to_string(),
                "verdict": verdict_name(scan.report.verdict),
                "min_second_difference": scan.report.min_second_difference,
                "min_midpoint_margin": scan.report.min_midpoint_margin,
                "inconclusive": scan.report.inconclusive,
                "failures": scan.report.failures,
            })
        })
        .collect();
    (Value::Array(per_curve), passed)
}

fn grid_from_step(min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0) || !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(field_error("t_step", "need t_min < t_max and t_step > 0"));
    }
    let count = ((max - min) / step).round() as usize + 1;
    if count < 3 {
        return Err(field_error("t_step", "grid needs at least three points"));
    }
    Ok(linspace(min, max, count))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StretchConfig {
    #[serde(default = "torus")]
    surface: TriangulatedSurface,
    base: Option<Vec<f64>>,
    curves: Option<Vec<CurveWord>>,
    #[serde(default = "minus_three")]
    t_min: f64,
    #[serde(default = "three")]
    t_max: f64,
    #[serde(default = "tenth")]
    t_step: f64,
}

fn minus_three() -> f64 {
    -3.0
}
fn three() -> f64 {
    3.0
}
fn tenth() -> f64 {
    0.1
}

/// Columns: t, u, curve_id, length. Convexity is judged in `u = e^t`.
pub fn stretch(cfg: StretchConfig) -> Result<Outcome, CliError> {
    let s = &cfg.surface;
    let base = torus_default(s, "base", cfg.base, vec![0.5, 0.5, -1.0])?;
    let line = StretchLine {
        base: point(s, &base, "base")?,
    };
    let curves = torus_default(s, "curves", cfg.curves, words(&TORUS_GENERATORS[..1]))?;
    check_curves(s, &curves)?;
    let ts = grid_from_step(cfg.t_min, cfg.t_max, cfg.t_step)?;
    let us: Vec<f64> = ts.iter().map(|t| t.exp()).collect();

    let mut table = Table::new(&["t", "u", "curve_id", "length"]);
    let mut scans = Vec::new();
    for (k, c) in curves.iter().enumerate() {
        let scan = convexity_scan(&us, |u| curve_length(s, &line.point_u(u), c))
            .map_err(|e| field_error("t_step", e))?;
        for ((t, u), v) in ts.iter().zip(&us).zip(&scan.values) {
            table.push(vec![(*t).into(), (*u).into(), k.into(), v.unwrap_or(f64::NAN).into()]);
        }
        scans.push(scan);
    }
    let (per_curve, passed) = scan_summary(&curves, scans);
    Ok(Outcome {
        table,
        summary: json!({
            "parameter": "u",
            "base": line.base.x,
            "grid_points": ts.len(),
            "curves": per_curve,
        }),
        passed,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarthquakeConfig {
    #[serde(default = "torus")]
    surface: TriangulatedSurface,
    base: Option<Vec<f64>>,
    direction: Option<Vec<f64>>,
    #[serde(default = "left")]
    side: EarthquakeSide,
    curves: Option<Vec<CurveWord>>,
    #[serde(default = "minus_one")]
    t_min: f64,
    #[serde(default = "one")]
    t_max: f64,
    #[serde(default = "sixty_one")]
    samples: usize,
}

fn left() -> EarthquakeSide {
    EarthquakeSide::Left
}
fn minus_one() -> f64 {
    -1.0
}
fn one() -> f64 {
    1.0
}
fn sixty_one() -> usize {
    61
}

/// Columns: t, curve_id, length.
pub fn earthquake(cfg: EarthquakeConfig) -> Result<Outcome, CliError> {
    let s = &cfg.surface;
    let base = torus_default(s, "base", cfg.base, vec![0.5, 0.5, -1.0])?;
    let base = point(s, &base, "base")?;
    let direction = torus_default(s, "direction", cfg.direction, vec![1.0, -1.0, 0.0])?;
    let line = EarthquakeLine::new(s, base, direction, cfg.side)
        .map_err(|e| field_error("direction", e))?;
    let curves = torus_default(s, "curves", cfg.curves, words(&[TORUS_TRANSVERSE]))?;
    check_curves(s, &curves)?;
    if cfg.samples < 3 || !(cfg.t_max > cfg.t_min) {
        return Err(field_error("samples", "need at least three points on t_min < t_max"));
    }
    let ts = linspace(cfg.t_min, cfg.t_max, cfg.samples);

    let mut table = Table::new(&["t", "curve_id", "length"]);
    let mut scans = Vec::new();
    for (k, c) in curves.iter().enumerate() {
        let scan = convexity_scan(&ts, |t| curve_length(s, &line.point(t), c))
            .map_err(|e| field_error("samples", e))?;
        for (t, v) in ts.iter().zip(&scan.values) {
            table.push(vec![(*t).into(), k.into(), v.unwrap_or(f64::NAN).into()]);
        }
        scans.push(scan);
    }
    let (per_curve, passed) = scan_summary(&curves, scans);
    Ok(Outcome {
        table,
        summary: json!({
            "base": line.base().x,
            "direction": line.direction(),
            "side": cfg.side,
            "curves": per_curve,
        }),
        passed,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThurstonConfig {
    #[serde(default = "torus")]
    surface: TriangulatedSurface,
    g: Option<Vec<f64>>,
    h: Option<Vec<f64>>,
    curves: Option<Vec<CurveWord>>,
    #[serde(default = "four")]
    max_word_length: usize,
}

fn four() -> usize {
    4
}

/// Columns: curve_id, word, length_g, length_h, log_ratio.
pub fn thurston(cfg: ThurstonConfig, seed: u64) -> Result<Outcome, CliError> {
    let s = &cfg.surface;
    let g = torus_default(s, "g", cfg.g, vec![0.5, 0.5, -1.0])?;
    let g = point(s, &g, "g")?;
    let h = match cfg.h {
        Some(h) => point(s, &h, "h")?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..s.n_edges()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = s.project(&raw).map_err(|e| field_error("surface", e))?;
            point(s, &p, "h")?
        }
    };
    let curves = match cfg.curves {
        Some(c) => c,
        None => {
            if cfg.max_word_length == 0 || cfg.max_word_length > 12 {
                return Err(field_error("max_word_length", "must be between 1 and 12"));
            }
            s.closed_words(cfg.max_word_length)
        }
    };
    check_curves(s, &curves)?;
    let estimate = thurston_distance_estimate(s, &g, &h, &curves)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let mut table = Table::new(&["curve_id", "word", "length_g", "length_h", "log_ratio"]);
    let mut argmax = None;
    for (k, c) in curves.iter().enumerate() {
        let lg = curve_log_length(s, &g, c).map_err(|e| CliError::Failed(e.to_string()))?;
        let lh = curve_log_length(s, &h, c).map_err(|e| CliError::Failed(e.to_string()))?;
        if lh - lg == estimate && estimate > 0.0 && argmax.is_none() {
            argmax = Some(c.to_string());
        }
        table.push(vec![k.into(), c.to_string().into(), lg.exp().into(), lh.exp().into(), (lh - lg).into()]);
    }
    Ok(Outcome {
        table,
        summary: json!({
            "g": g.x,
            "h": h.x,
            "curves": curves.len(),
            "estimate": estimate,
            "attained_by": argmax,
        }),
        passed: estimate >= 0.0,
    })
}
