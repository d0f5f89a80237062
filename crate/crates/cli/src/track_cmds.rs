use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;
use shear_core::traintrack::{examples, transport, SplitDirection, SplitStep, TrainTrack};

use crate::output::{field_error, Outcome, Table};
use crate::CliError;

/// Largest admissible disagreement between the two transports.
const PATH_TOL: f64 = 1e-12;

#[derive(Deserialize)]
#[serde(untagged)]
enum TrackSpec {
    Named(String),
    Explicit(TrainTrack),
}

fn default_track() -> TrackSpec {
    TrackSpec::Named("genus_two".into())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    #[serde(default = "default_track")]
    track: TrackSpec,
    paths: Option<[Vec<SplitStep>; 2]>,
    #[serde(default = "default_samples")]
    samples: usize,
}

fn default_samples() -> usize {
    5
}

fn resolve_track(spec: TrackSpec) -> Result<TrainTrack, CliError> {
    match spec {
        TrackSpec::Explicit(t) => Ok(t),
        TrackSpec::Named(name) => match name.as_str() {
            "theta" => Ok(examples::theta()),
            "tetrahedron" => Ok(examples::tetrahedron()),
            "genus_two" => Ok(examples::genus_two()),
            other => Err(field_error(
                "track",
                format!("unknown track {other:?} (theta, tetrahedron, genus_two)"),
            )),
        },
    }
}

/// Splits two distinct large branches in either order.
fn commuting_paths(track: &TrainTrack) -> Result<[Vec<SplitStep>; 2], CliError> {
    let large = track.large_branches();
    let [a, b] = match large.as_slice() {
        [a, b, ..] => [*a, *b],
        _ => return Err(field_error("paths", "required: track has fewer than two large branches")),
    };
    let first = SplitStep {
        branch: a,
        dir: SplitDirection::Left,
    };
    let second = SplitStep {
        branch: b,
        dir: SplitDirection::Right,
    };
    Ok([vec![first, second], vec![second, first]])
}

/// Columns: sample, branch, input, via_first, via_second, deviation.
///
/// Each sample is a random shear vector on the common end track, carried back
/// along both paths.
pub fn transport_cmd(cfg: TransportConfig, seed: u64) -> Result<Outcome, CliError> {
    let track = resolve_track(cfg.track)?;
    let paths = match cfg.paths {
        Some(p) => p,
        None => commuting_paths(&track)?,
    };
    let maps = [0, 1]
        .map(|i| transport(&track, &paths[i]).map_err(|e| field_error(format!("paths[{i}]"), e)));
    let [m0, m1] = maps;
    let (m0, m1) = (m0?, m1?);

    let same_end = m0.end == m1.end;
    let same_carrying = m0.measure_map == m1.measure_map;
    let mut table = Table::new(&["sample", "branch", "input", "via_first", "via_second", "deviation"]);
    let mut max_dev = 0.0f64;
    if same_end {
        let basis = m0.end.weight_space_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in 0..cfg.samples {
            let c: Vec<f64> = (0..basis.ncols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..basis.nrows())
                .map(|i| (0..basis.ncols()).map(|k| basis[(i, k)] * c[k]).sum())
                .collect();
            let (r0, r1) = (m0.apply_shear(&v), m1.apply_shear(&v));
            for (b, ((a0, a1), vi)) in r0.iter().zip(&r1).zip(&v).enumerate() {
                let dev = (a0 - a1).abs();
                max_dev = max_dev.max(dev);
                table.push(vec![s.into(), b.into(), (*vi).into(), (*a0).into(), (*a1).into(), dev.into()]);
            }
        }
    }
    let passed = same_end && same_carrying && max_dev <= PATH_TOL;
    Ok(Outcome {
        table,
        summary: json!({
            "branches": track.n_branches(),
            "paths": paths,
            "same_end_track": same_end,
            "same_carrying": same_carrying,
            "samples": cfg.samples,
            "max_deviation": max_dev,
            "tolerance": PATH_TOL,
        }),
        passed,
    })
}
