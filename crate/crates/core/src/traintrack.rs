//! Generic train tracks and their weight systems.
//!
//! Branches are numbered `0..B`. A switch is a triple `(out, in₁, in₂)` read
//! counter-clockwise around the switch, which fixes the ribbon structure.
//! Shear and measure vectors satisfy `v_out = v_in₁ + v_in₂` at every switch.

use std::collections::{BTreeMap, HashSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type BranchId = usize;

/// Tolerance on switch equations.
pub const SWITCH_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("branch {0} does not occupy exactly two switch slots")]
    BadBranchEnds(BranchId),
    #[error("branch ids must be 0..{expected}")]
    BadBranchIds { expected: usize },
    #[error("unknown branch {0}")]
    UnknownBranch(BranchId),
    #[error("vector has {got} entries, track has {expected} branches")]
    KeyMismatch { expected: usize, got: usize },
    #[error("vector key {0:?} is not a branch id")]
    BadKey(String),
    #[error("branch {0} is not the outgoing branch of two distinct switches")]
    NotSplittable(BranchId),
    #[error("malformed dual path: {0}")]
    MalformedPath(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Switch {
    pub out: BranchId,
    #[serde(rename = "in")]
    pub ins: [BranchId; 2],
}

impl Switch {
    pub fn new(out: BranchId, in1: BranchId, in2: BranchId) -> Self {
        Self { out, ins: [in1, in2] }
    }

    /// Slots in counter-clockwise order.
    pub fn slots(&self) -> [BranchId; 3] {
        [self.out, self.ins[0], self.ins[1]]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainTrack {
    n_branches: usize,
    switches: Vec<Switch>,
}

#[derive(Serialize, Deserialize)]
struct TrackJson {
    branches: Vec<BranchId>,
    switches: Vec<Switch>,
}

impl Serialize for TrainTrack {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TrackJson {
            branches: (0..self.n_branches).collect(),
            switches: self.switches.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrainTrack {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = TrackJson::deserialize(d)?;
        if j.branches.iter().enumerate().any(|(i, &b)| i != b) {
            return Err(serde::de::Error::custom(TrackError::BadBranchIds {
                expected: j.branches.len(),
            }));
        }
        TrainTrack::new(j.branches.len(), j.switches).map_err(serde::de::Error::custom)
    }
}

impl TrainTrack {
    pub fn new(n_branches: usize, switches: Vec<Switch>) -> Result<Self, TrackError> {
        let mut ends = vec![0usize; n_branches];
        for s in &switches {
            for b in s.slots() {
                *ends.get_mut(b).ok_or(TrackError::UnknownBranch(b))? += 1;
            }
        }
        if let Some(b) = ends.iter().position(|&c| c != 2) {
            return Err(TrackError::BadBranchEnds(b));
        }
        Ok(Self {
            n_branches,
            switches,
        })
    }

    pub fn n_branches(&self) -> usize {
        self.n_branches
    }

    pub fn switches(&self) -> &[Switch] {
        &self.switches
    }

    /// One row per switch: `e_out − e_in₁ − e_in₂`.
    pub fn switch_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.switches.len(), self.n_branches);
        for (r, s) in self.switches.iter().enumerate() {
            m[(r, s.out)] += 1.0;
            m[(r, s.ins[0])] -= 1.0;
            m[(r, s.ins[1])] -= 1.0;
        }
        m
    }

    pub fn switch_rank(&self) -> usize {
        self.switch_matrix().rank(1e-9)
    }

    /// Orthonormal basis (as columns) of the vectors satisfying every switch
    /// condition.
    pub fn weight_space_basis(&self) -> DMatrix<f64> {
        let a = self.switch_matrix();
        let gram = a.transpose() * &a;
        let eig = gram.symmetric_eigen();
        let cols: Vec<_> = (0..self.n_branches)
            .filter(|&k| eig.eigenvalues[k].abs() < 1e-9)
            .map(|k| eig.eigenvectors.column(k).into_owned())
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(self.n_branches, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }

    /// Largest switch-condition residual of `v`.
    pub fn residual(&self, v: &[f64]) -> Result<f64, TrackError> {
        self.check_len(v.len())?;
        Ok(self
            .switches
            .iter()
            .map(|s| (v[s.out] - v[s.ins[0]] - v[s.ins[1]]).abs())
            .fold(0.0, f64::max))
    }

    fn check_len(&self, got: usize) -> Result<(), TrackError> {
        if got != self.n_branches {
            return Err(TrackError::KeyMismatch {
                expected: self.n_branches,
                got,
            });
        }
        Ok(())
    }

    fn switches_with_out(&self, e: BranchId) -> Vec<usize> {
        self.switches
            .iter()
            .enumerate()
            .filter(|(_, s)| s.out == e)
            .map(|(i, _)| i)
            .collect()
    }

    /// A branch is large when both of its ends are outgoing.
    pub fn is_splittable(&self, e: BranchId) -> bool {
        self.switches_with_out(e).len() == 2
    }

    pub fn large_branches(&self) -> Vec<BranchId> {
        (0..self.n_branches)
            .filter(|&e| self.is_splittable(e))
            .collect()
    }

    /// Boundary cycles of the ribbon graph, as lists of branches met along
    /// each cycle. These are the vertices of the dual triangulation.
    pub fn boundary_cycles(&self) -> Vec<Vec<BranchId>> {
        // half-edge h = 3·switch + slot
        let nh = 3 * self.switches.len();
        let mut partner = vec![usize::MAX; nh];
        let mut first: Vec<Option<usize>> = vec![None; self.n_branches];
        for (s, sw) in self.switches.iter().enumerate() {
            for (k, b) in sw.slots().into_iter().enumerate() {
                let h = 3 * s + k;
                match first[b] {
                    None => first[b] = Some(h),
                    Some(g) => {
                        partner[h] = g;
                        partner[g] = h;
                    }
                }
            }
        }
        let branch_of = |h: usize| self.switches[h / 3].slots()[h % 3];
        let next = |h: usize| {
            let g = partner[h];
            3 * (g / 3) + (g % 3 + 1) % 3
        };
        let mut seen = vec![false; nh];
        let mut cycles = Vec::new();
        for h0 in 0..nh {
            if seen[h0] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut h = h0;
            while !seen[h] {
                seen[h] = true;
                cyc.push(branch_of(h));
                h = next(h);
            }
            cycles.push(cyc);
        }
        cycles
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.switches.len() as i64 - self.n_branches as i64 + self.boundary_cycles().len() as i64
    }

    /// Splits the large branch `e`.
    ///
    /// With `e`'s ends at switches `(e, a, b)` and `(e, c, d)`, the branches
    /// `a` and `d` lie on the same side of `e`. The central branch of the
    /// split track keeps the id `e`.
    pub fn split(&self, e: BranchId, dir: SplitDirection) -> Result<Split, TrackError> {
        if e >= self.n_branches {
            return Err(TrackError::UnknownBranch(e));
        }
        let at = self.switches_with_out(e);
        if at.len() != 2 {
            return Err(TrackError::NotSplittable(e));
        }
        let (v1, v2) = (at[0], at[1]);
        let [a, b] = self.switches[v1].ins;
        let [c, d] = self.switches[v2].ins;
        let (u1, u2) = match dir {
            SplitDirection::Right => (Switch::new(a, e, d), Switch::new(c, e, b)),
            SplitDirection::Left => (Switch::new(d, a, e), Switch::new(b, c, e)),
        };
        let mut switches = self.switches.clone();
        switches[v1] = u1;
        switches[v2] = u2;
        let track = TrainTrack {
            n_branches: self.n_branches,
            switches,
        };
        let n = self.n_branches;
        // Θ → Θ′ on shears
        let mut forward = DMatrix::identity(n, n);
        forward.row_mut(e).fill(0.0);
        let sign = match dir {
            SplitDirection::Right => -1.0,
            SplitDirection::Left => 1.0,
        };
        forward[(e, d)] += sign;
        forward[(e, a)] -= sign;
        // Θ′ → Θ: the old central branch is recovered from its first switch
        let mut back = DMatrix::identity(n, n);
        back.row_mut(e).fill(0.0);
        back[(e, a)] += 1.0;
        back[(e, b)] += 1.0;
        // incidence: the old central branch is traversed by the new diagonal
        // and by the two branches pulled through it
        let through = match dir {
            SplitDirection::Right => [b, d],
            SplitDirection::Left => [a, c],
        };
        let mut carry = DMatrix::identity(n, n);
        carry.row_mut(e).fill(0.0);
        carry[(e, e)] += 1.0;
        carry[(e, through[0])] += 1.0;
        carry[(e, through[1])] += 1.0;
        Ok(Split {
            track,
            branch: e,
            labels: [a, b, c, d],
            direction: dir,
            forward_shear: forward,
            shear_transport: back,
            measure_carrying: carry,
        })
    }

    /// The dual triangulation: one face per switch, one edge per branch, one
    /// vertex per boundary cycle.
    pub fn dual(&self) -> DualTriangulation {
        let faces = self.switches.iter().map(|s| s.slots()).collect();
        DualTriangulation {
            n_edges: self.n_branches,
            faces,
            n_vertices: self.boundary_cycles().len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitDirection {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

/// Result of one split, with its linear maps as `B × B` matrices.
#[derive(Debug, Clone)]
pub struct Split {
    pub track: TrainTrack,
    pub branch: BranchId,
    /// `[a, b, c, d]` as in [`TrainTrack::split`].
    pub labels: [BranchId; 4],
    pub direction: SplitDirection,
    /// Shears on the original track to shears on the split track.
    pub forward_shear: DMatrix<f64>,
    /// Shears on the split track to shears on the original track.
    pub shear_transport: DMatrix<f64>,
    /// Measures on the split track to the measures they carry on the original:
    /// entry `(x, y)` counts how often new branch `y` runs over old branch `x`.
    pub measure_carrying: DMatrix<f64>,
}

impl Split {
    pub fn apply_forward(&self, v: &[f64]) -> Vec<f64> {
        mat_vec(&self.forward_shear, v)
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * v[c]).sum())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitStep {
    pub branch: BranchId,
    pub dir: SplitDirection,
}

/// Transport along a split sequence `Θ = Θ₀ → … → Θ_m`.
#[derive(Debug, Clone)]
pub struct Transport {
    pub start: TrainTrack,
    pub end: TrainTrack,
    /// Shears on `Θ_m` to shears on `Θ₀`: `p₀₁ ∘ ⋯ ∘ p_{m−1,m}`.
    pub shear_map: DMatrix<f64>,
    /// Measures on `Θ_m` to the measures they carry on `Θ₀`.
    pub measure_map: DMatrix<f64>,
}

impl Transport {
    pub fn apply_shear(&self, v: &[f64]) -> Vec<f64> {
        mat_vec(&self.shear_map, v)
    }

    pub fn apply_measure(&self, v: &[f64]) -> Vec<f64> {
        mat_vec(&self.measure_map, v)
    }
}

pub fn transport(track: &TrainTrack, path: &[SplitStep]) -> Result<Transport, TrackError> {
    let n = track.n_branches;
    let mut cur = track.clone();
    let mut shear_map = DMatrix::identity(n, n);
    let mut measure_map = DMatrix::identity(n, n);
    for step in path {
        let s = cur.split(step.branch, step.dir)?;
        shear_map *= &s.shear_transport;
        measure_map *= &s.measure_carrying;
        cur = s.track;
    }
    Ok(Transport {
        start: track.clone(),
        end: cur,
        shear_map,
        measure_map,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualTriangulation {
    pub n_edges: usize,
    /// Edges of each face, counter-clockwise.
    pub faces: Vec<[BranchId; 3]>,
    pub n_vertices: usize,
}

fn rotate_min(f: [BranchId; 3]) -> [BranchId; 3] {
    let k = (0..3).min_by_key(|&k| (f[k], f[(k + 1) % 3], f[(k + 2) % 3])).unwrap();
    [f[k], f[(k + 1) % 3], f[(k + 2) % 3]]
}

impl DualTriangulation {
    /// Faces up to cyclic rotation, sorted: the combinatorial type.
    pub fn canonical_faces(&self) -> Vec<[BranchId; 3]> {
        let mut f: Vec<_> = self.faces.iter().map(|&f| rotate_min(f)).collect();
        f.sort_unstable();
        f
    }

    pub fn same_combinatorics(&self, other: &Self) -> bool {
        self.n_edges == other.n_edges && self.canonical_faces() == other.canonical_faces()
    }

    /// Replaces edge `e`, the diagonal of the quadrilateral formed by its two
    /// faces, with the other diagonal (reusing the id `e`).
    pub fn flip(&self, e: BranchId) -> Result<Self, TrackError> {
        let hits: Vec<usize> = (0..self.faces.len())
            .filter(|&i| self.faces[i].contains(&e))
            .collect();
        if hits.len() != 2 || hits.iter().any(|&i| self.faces[i].iter().filter(|&&x| x == e).count() != 1) {
            return Err(TrackError::NotSplittable(e));
        }
        let starting_at_e = |f: [BranchId; 3]| {
            let k = f.iter().position(|&x| x == e).unwrap();
            [f[(k + 1) % 3], f[(k + 2) % 3]]
        };
        let [x1, x2] = starting_at_e(self.faces[hits[0]]);
        let [y1, y2] = starting_at_e(self.faces[hits[1]]);
        let mut faces = self.faces.clone();
        faces[hits[0]] = [e, x2, y1];
        faces[hits[1]] = [e, y2, x1];
        Ok(Self {
            n_edges: self.n_edges,
            faces,
            n_vertices: self.n_vertices,
        })
    }
}

/// A branch vector keyed by branch id.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchVector(pub Vec<f64>);

impl Serialize for BranchVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        // numeric key order, not string order
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (i, v) in self.0.iter().enumerate() {
            map.serialize_entry(&i.to_string(), v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for BranchVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let m: BTreeMap<String, f64> = BTreeMap::deserialize(d)?;
        let mut v = vec![None; m.len()];
        for (k, x) in m {
            let i: usize = k
                .parse()
                .map_err(|_| serde::de::Error::custom(TrackError::BadKey(k.clone())))?;
            match v.get_mut(i) {
                Some(slot) => *slot = Some(x),
                None => return Err(serde::de::Error::custom(TrackError::BadKey(k))),
            }
        }
        Ok(BranchVector(v.into_iter().map(|x| x.expect("keys are distinct")).collect()))
    }
}

pub type ShearVector = BranchVector;
pub type MeasureVector = BranchVector;
pub type WidthVector = BranchVector;

/// Whether `v` satisfies every switch condition.
pub fn validate_shear(track: &TrainTrack, v: &ShearVector) -> Result<bool, TrackError> {
    Ok(track.residual(&v.0)? <= SWITCH_TOL)
}

/// Switch conditions plus nonnegativity.
pub fn validate_measure(track: &TrainTrack, m: &MeasureVector) -> Result<bool, TrackError> {
    Ok(validate_shear(track, m)? && m.0.iter().all(|&x| x >= 0.0))
}

/// `W · M`.
pub fn length_pairing(w: &WidthVector, m: &MeasureVector) -> Result<f64, TrackError> {
    if w.0.len() != m.0.len() {
        return Err(TrackError::KeyMismatch {
            expected: w.0.len(),
            got: m.0.len(),
        });
    }
    Ok(w.0.iter().zip(&m.0).map(|(a, b)| a * b).sum())
}

/// Alternating sum `σ₁ − σ₂ + σ₃ − …`.
pub fn alternating_sum(values: &[f64]) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(k, v)| if k % 2 == 0 { *v } else { -*v })
        .sum()
}

/// One dual edge crossed by a path, with the side of the reference
/// transversal on which the crossing happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualStep {
    pub branch: BranchId,
    pub flag: bool,
}

/// Alternating sum of branch shears along a path in the dual graph.
///
/// Consecutive edges must share a dual vertex, flags must alternate and no
/// edge may be crossed more than twice.
pub fn shear_along_dual_path(
    track: &TrainTrack,
    sigma: &ShearVector,
    path: &[DualStep],
) -> Result<f64, TrackError> {
    track.check_len(sigma.0.len())?;
    if path.is_empty() {
        return Err(TrackError::MalformedPath("empty"));
    }
    if let Some(s) = path.iter().find(|s| s.branch >= track.n_branches) {
        return Err(TrackError::UnknownBranch(s.branch));
    }
    if path.windows(2).any(|w| w[0].flag == w[1].flag) {
        return Err(TrackError::MalformedPath("flags do not alternate"));
    }
    let mut count = vec![0usize; track.n_branches];
    for s in path {
        count[s.branch] += 1;
        if count[s.branch] > 2 {
            return Err(TrackError::MalformedPath("edge crossed more than twice"));
        }
    }
    let cycles = track.boundary_cycles();
    let vertices_of = |b: BranchId| -> HashSet<usize> {
        cycles
            .iter()
            .enumerate()
            .filter(|(_, c)| c.contains(&b))
            .map(|(i, _)| i)
            .collect()
    };
    for w in path.windows(2) {
        if vertices_of(w[0].branch).is_disjoint(&vertices_of(w[1].branch)) {
            return Err(TrackError::MalformedPath("consecutive edges share no vertex"));
        }
    }
    let values: Vec<f64> = path.iter().map(|s| sigma.0[s.branch]).collect();
    Ok(alternating_sum(&values))
}

/// Built-in examples.
pub mod examples {
    use super::*;

    /// Two switches and three branches: the punctured torus.
    pub fn theta() -> TrainTrack {
        TrainTrack::new(3, vec![Switch::new(0, 1, 2), Switch::new(0, 1, 2)]).expect("valid")
    }

    /// Dual of the boundary of a tetrahedron: six branches, four switches,
    /// with branches 0 and 5 large.
    /// Branch ids: 01→0, 02→1, 03→2, 12→3, 13→4, 23→5.
    pub fn tetrahedron() -> TrainTrack {
        // faces (0,2,1), (0,1,3), (0,3,2), (1,2,3) by vertices
        TrainTrack::new(
            6,
            vec![
                Switch::new(0, 1, 3),
                Switch::new(0, 4, 2),
                Switch::new(5, 1, 2),
                Switch::new(5, 4, 3),
            ],
        )
        .expect("valid")
    }

    /// Dual of a four-vertex triangulation of the closed genus-two surface:
    /// the one-vertex octagon fan with three faces subdivided.
    pub fn genus_two() -> TrainTrack {
        let fan: [[BranchId; 3]; 6] = [
            [0, 1, 4],
            [4, 0, 5],
            [5, 1, 6],
            [6, 2, 7],
            [7, 3, 8],
            [8, 2, 3],
        ];
        let mut next = 9;
        let mut switches = Vec::new();
        for (i, &[x, y, z]) in fan.iter().enumerate() {
            if i % 2 == 0 {
                let (ea, eb, ec) = (next, next + 1, next + 2);
                next += 3;
                for f in [[x, eb, ea], [y, ec, eb], [z, ea, ec]] {
                    switches.push(Switch::new(f[0], f[1], f[2]));
                }
            } else {
                switches.push(Switch::new(x, y, z));
            }
        }
        TrainTrack::new(next, switches).expect("valid")
    }
}
