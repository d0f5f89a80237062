use serde::Deserialize;
use serde_json::json;
use shear_core::harness::{probe_segments_with_margins, segment_sampler, Verdict};
use shear_core::hyp;
use shear_core::strip::{
    core_length, core_minimum, develop, geodesic_length, pw_length, LeafFrame, PwCurveCoords,
    Side, StripShape,
};

use crate::output::{field_error, Outcome, Table};
use crate::CliError;

/// Relative agreement required between variational and developed lengths.
const LENGTH_TOL: f64 = 1e-8;

fn default_strip() -> StripShape {
    StripShape::from_sides(
        &[Side::Left, Side::Right, Side::Left, Side::Right],
        &[0.3, -0.5, 0.8],
    )
    .expect("valid")
}

fn check_shears(strip: &StripShape, x: &[f64], field: &str) -> Result<(), CliError> {
    let expected = strip.n() - 1;
    if x.len() != expected {
        return Err(field_error(field, format!("expected {expected} shears, got {}", x.len())));
    }
    let shape = strip
        .with_shears(x)
        .map_err(|e| field_error(field, e))?;
    develop(&shape).map_err(|e| field_error(field, e))?;
    Ok(())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicConfig {
    #[serde(default = "default_strip")]
    strip: StripShape,
    x: Option<Vec<f64>>,
    #[serde(default = "default_endpoints")]
    endpoints: Vec<[f64; 2]>,
}

fn default_endpoints() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [-1.0, 1.0], [1.5, -0.5], [2.0, 2.0]]
}

/// Columns: case, y_minus, y_plus, length, developed_distance,
/// relative_error, iterations, max_kink_multiplier.
pub fn geodesic(cfg: GeodesicConfig) -> Result<Outcome, CliError> {
    let x = cfg.x.clone().unwrap_or_else(|| cfg.strip.shears().to_vec());
    check_shears(&cfg.strip, &x, "x")?;
    for (k, e) in cfg.endpoints.iter().enumerate() {
        if !e.iter().all(|v| v.is_finite()) {
            return Err(field_error(format!("endpoints[{k}]"), "non-finite"));
        }
    }
    let d = develop(&cfg.strip.with_shears(&x).expect("checked")).expect("checked");
    let n = cfg.strip.n();
    let mut table = Table::new(&[
        "case",
        "y_minus",
        "y_plus",
        "length",
        "developed_distance",
        "relative_error",
        "iterations",
        "max_kink_multiplier",
    ]);
    let mut worst = 0.0f64;
    let mut certified = true;
    for (k, &[ym, yp]) in cfg.endpoints.iter().enumerate() {
        let m = geodesic_length(&cfg.strip, &x, ym, yp)
            .map_err(|e| CliError::Failed(format!("endpoints[{k}]: {e}")))?;
        let a = d.point_on_leaf(0, LeafFrame::After, ym).expect("boundary leaf");
        let b = d.point_on_leaf(n, LeafFrame::Before, yp).expect("boundary leaf");
        let exact = hyp::dist(&a, &b);
        let err = rel(m.length, exact);
        worst = worst.max(err);
        certified &= m.max_kink_multiplier <= 1.0;
        table.push(vec![
            k.into(),
            ym.into(),
            yp.into(),
            m.length.into(),
            exact.into(),
            err.into(),
            m.iterations.into(),
            m.max_kink_multiplier.into(),
        ]);
    }
    let passed = worst <= LENGTH_TOL && certified;
    Ok(Outcome {
        table,
        summary: json!({
            "cases": cfg.endpoints.len(),
            "max_relative_error": worst,
            "tolerance": LENGTH_TOL,
            "kinks_certified": certified,
        }),
        passed,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreConfig {
    #[serde(default = "default_strip")]
    strip: StripShape,
    xs: Option<Vec<Vec<f64>>>,
}

/// Columns: case, core_length, gap, relative_error, iterations.
pub fn core(cfg: CoreConfig) -> Result<Outcome, CliError> {
    let xs = cfg
        .xs
        .clone()
        .unwrap_or_else(|| vec![cfg.strip.shears().to_vec()]);
    for (k, x) in xs.iter().enumerate() {
        check_shears(&cfg.strip, x, &format!("xs[{k}]"))?;
    }
    let mut table = Table::new(&["case", "core_length", "gap", "relative_error", "iterations"]);
    let mut worst = 0.0f64;
    for (k, x) in xs.iter().enumerate() {
        let m = core_minimum(&cfg.strip, x, None)
            .map_err(|e| CliError::Failed(format!("xs[{k}]: {e}")))?;
        let d = develop(&cfg.strip.with_shears(x).expect("checked")).expect("checked");
        let gap = hyp::geodesic_gap(d.lower_boundary(), d.upper_boundary()).expect("checked");
        let err = rel(m.length, gap);
        worst = worst.max(err);
        table.push(vec![
            k.into(),
            m.length.into(),
            gap.into(),
            err.into(),
            m.iterations.into(),
        ]);
    }
    Ok(Outcome {
        table,
        summary: json!({
            "cases": xs.len(),
            "max_relative_error": worst,
            "tolerance": LENGTH_TOL,
        }),
        passed: worst <= LENGTH_TOL,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexityConfig {
    #[serde(default = "default_strip")]
    strip: StripShape,
    #[serde(default = "default_segments")]
    segments: usize,
    #[serde(default = "default_radius")]
    radius: f64,
}

fn default_segments() -> usize {
    1000
}

fn default_radius() -> f64 {
    2.0
}

/// Columns: functional, segment, margin.
pub fn convexity(cfg: ConvexityConfig, seed: u64) -> Result<Outcome, CliError> {
    if !(cfg.radius > 0.0 && cfg.radius.is_finite()) {
        return Err(field_error("radius", "must be positive"));
    }
    let base = &cfg.strip;
    check_shears(base, base.shears(), "strip")?;
    let n = base.n();
    let r = cfg.radius;
    let joint = segment_sampler(&vec![(-r, r); 3 * n - 1], cfg.segments, seed)
        .map_err(|e| field_error("strip", e))?;
    let shears_only = segment_sampler(&vec![(-r, r); n - 1], cfg.segments, seed ^ 0x5eed)
        .map_err(|e| field_error("strip", e))?;

    let split = |q: &[f64]| (q[..n - 1].to_vec(), PwCurveCoords::from_flat(&q[n - 1..]));
    let probes = [
        (
            "pw_length",
            probe_segments_with_margins(
                |q| {
                    let (x, y) = split(q);
                    pw_length(base, &x, &y)
                },
                &joint,
            ),
        ),
        (
            "core_length",
            probe_segments_with_margins(|x| core_length(base, x), &shears_only),
        ),
        (
            "geodesic_length",
            probe_segments_with_margins(
                |x| geodesic_length(base, x, 0.0, 0.0).map(|m| m.length),
                &shears_only,
            ),
        ),
    ];

    let mut table = Table::new(&["functional", "segment", "margin"]);
    let mut summary = serde_json::Map::new();
    let mut passed = true;
    for (name, (report, margins)) in probes {
        for (k, m) in margins.into_iter().enumerate() {
            table.push(vec![name.into(), k.into(), m.into()]);
        }
        passed &= report.verdict != Verdict::NotConvex;
        summary.insert(name.to_owned(), serde_json::to_value(&report).expect("serializable"));
    }
    Ok(Outcome {
        table,
        summary: serde_json::Value::Object(summary),
        passed,
    })
}
