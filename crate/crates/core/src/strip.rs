//! Strips with finite wedge cuts.
//!
//! A strip is cut by `n + 1` leaves into `n` wedges. Leaves are indexed
//! `0..=n` from `g⁻` to `g⁺` along the oriented core, wedge `i` lies between
//! leaves `i` and `i + 1`, and interior leaf `j` (`1 ≤ j ≤ n − 1`) carries
//! the shear `shears[j − 1]`.
//!
//! Every leaf is oriented so that its positive direction points to the left
//! of the core. Positions on a leaf are signed arclengths from a distinguished
//! point, measured in that orientation. An interior leaf has two
//! distinguished points, one from each adjacent wedge; the shear is the
//! signed offset from the earlier wedge's point to the later one's.
//!
//! In its standard frame every wedge has sides `x = 0` and `x = 1`, apex
//! `∞`, and distinguished points `(0, 1)` and `(1, 1)`. When the apex lies to
//! the left of the core the wedge is entered through `x = 0` and leaves are
//! oriented upward; when it lies to the right the wedge is entered through
//! `x = 1` and leaves are oriented downward.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyp::{self, Geodesic, HypError, IdealPoint, IdealTriangle, MobiusMap, UhpPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StripError {
    #[error("a strip needs at least two wedges, got {0}")]
    TooFewWedges(usize),
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("index {index} out of range for {what}")]
    IndexOutOfRange { what: &'static str, index: usize },
    #[error("boundary leaves are not disjoint and non-asymptotic: {0}")]
    DegenerateStrip(HypError),
    #[error("minimisation did not converge after {iterations} iterations (best value {best})")]
    Convergence { best: f64, iterations: usize },
    #[error("non-finite input")]
    NonFinite,
}

/// Side of the oriented core on which a wedge's apex lies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeCombinatorics {
    apex_sides: Vec<Side>,
}

impl WedgeCombinatorics {
    pub fn new(apex_sides: Vec<Side>) -> Result<Self, StripError> {
        if apex_sides.len() < 2 {
            return Err(StripError::TooFewWedges(apex_sides.len()));
        }
        Ok(Self { apex_sides })
    }

    pub fn len(&self) -> usize {
        self.apex_sides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apex_sides.is_empty()
    }

    pub fn apex_sides(&self) -> &[Side] {
        &self.apex_sides
    }

    /// All apexes on one side: the boundary leaves share an endpoint.
    pub fn is_fan(&self) -> bool {
        self.apex_sides.windows(2).all(|w| w[0] == w[1])
    }
}

/// Wedge combinatorics together with one shear per interior leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StripShapeJson", into = "StripShapeJson")]
pub struct StripShape {
    combinatorics: WedgeCombinatorics,
    shears: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StripShapeJson {
    n: usize,
    apex_sides: Vec<Side>,
    shears: Vec<f64>,
}

impl TryFrom<StripShapeJson> for StripShape {
    type Error = StripError;

    fn try_from(j: StripShapeJson) -> Result<Self, StripError> {
        if j.apex_sides.len() != j.n {
            return Err(StripError::DimensionMismatch {
                what: "apex_sides",
                expected: j.n,
                got: j.apex_sides.len(),
            });
        }
        StripShape::new(WedgeCombinatorics::new(j.apex_sides)?, j.shears)
    }
}

impl From<StripShape> for StripShapeJson {
    fn from(s: StripShape) -> Self {
        StripShapeJson {
            n: s.n(),
            apex_sides: s.combinatorics.apex_sides,
            shears: s.shears,
        }
    }
}

impl StripShape {
    pub fn new(combinatorics: WedgeCombinatorics, shears: Vec<f64>) -> Result<Self, StripError> {
        let expected = combinatorics.len() - 1;
        if shears.len() != expected {
            return Err(StripError::DimensionMismatch {
                what: "shears",
                expected,
                got: shears.len(),
            });
        }
        if shears.iter().any(|s| !s.is_finite()) {
            return Err(StripError::NonFinite);
        }
        Ok(Self {
            combinatorics,
            shears,
        })
    }

    pub fn from_sides(sides: &[Side], shears: &[f64]) -> Result<Self, StripError> {
        Self::new(WedgeCombinatorics::new(sides.to_vec())?, shears.to_vec())
    }

    /// Number of wedges.
    pub fn n(&self) -> usize {
        self.combinatorics.len()
    }

    pub fn combinatorics(&self) -> &WedgeCombinatorics {
        &self.combinatorics
    }

    pub fn shears(&self) -> &[f64] {
        &self.shears
    }

    pub fn with_shears(&self, shears: &[f64]) -> Result<Self, StripError> {
        Self::new(self.combinatorics.clone(), shears.to_vec())
    }
}

/// Positions `(y_i⁻, y_i⁺)` of the endpoints of each wedge segment, relative
/// to the wedge's own distinguished points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwCurveCoords {
    pub y: Vec<[f64; 2]>,
}

impl PwCurveCoords {
    pub fn zeros(n: usize) -> Self {
        Self { y: vec![[0.0; 2]; n] }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.y.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn from_flat(v: &[f64]) -> Self {
        Self {
            y: v.chunks(2).map(|c| [c[0], c[1]]).collect(),
        }
    }
}

/// Standard-frame chart of the side through which a wedge is entered.
fn entry_chart(side: Side) -> MobiusMap {
    match side {
        Side::Left => MobiusMap::IDENTITY,
        // z ↦ 1 − 1/z: the imaginary axis onto x = 1, reversed, i ↦ 1 + i
        Side::Right => MobiusMap {
            a: 1.0,
            b: -1.0,
            c: 1.0,
            d: 0.0,
        },
    }
}

/// Standard-frame chart of the side through which a wedge is left.
fn exit_chart(side: Side) -> MobiusMap {
    match side {
        Side::Left => MobiusMap::shift(1.0),
        Side::Right => MobiusMap::half_turn(),
    }
}

/// Distance between positions `u` (entry side) and `v` (exit side) inside a
/// wedge, each relative to the wedge's distinguished point on that side.
pub fn wedge_chord(side: Side, u: f64, v: f64) -> f64 {
    match side {
        Side::Left => hyp::wedge_distance(u, v),
        Side::Right => hyp::wedge_distance(-u, -v),
    }
}

fn wedge_chord_derivatives(side: Side, u: f64, v: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    match side {
        Side::Left => hyp::wedge_distance_derivatives(u, v),
        Side::Right => {
            let (d, g, h) = hyp::wedge_distance_derivatives(-u, -v);
            (d, [-g[0], -g[1]], h)
        }
    }
}

/// Which distinguished point of a leaf a position is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafFrame {
    /// The point contributed by the wedge before the leaf.
    Before,
    /// The point contributed by the wedge after the leaf.
    After,
}

/// Geometric realisation of a [`StripShape`] in the upper half-plane.
#[derive(Debug, Clone)]
pub struct DevelopedStrip {
    sides: Vec<Side>,
    frames: Vec<MobiusMap>,
    leaves: Vec<Geodesic>,
}

impl DevelopedStrip {
    pub fn n(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    /// Map placing the standard wedge at wedge `i`.
    pub fn frame(&self, i: usize) -> &MobiusMap {
        &self.frames[i]
    }

    /// Leaf `j`, oriented from its right endpoint to its left endpoint.
    pub fn leaf(&self, j: usize) -> &Geodesic {
        &self.leaves[j]
    }

    pub fn leaves(&self) -> &[Geodesic] {
        &self.leaves
    }

    pub fn lower_boundary(&self) -> &Geodesic {
        &self.leaves[0]
    }

    pub fn upper_boundary(&self) -> &Geodesic {
        &self.leaves[self.n()]
    }

    /// Chart sending the upward imaginary axis onto leaf `j` with `i` going to
    /// the requested distinguished point.
    pub fn leaf_chart(&self, j: usize, frame: LeafFrame) -> Option<MobiusMap> {
        let n = self.n();
        match frame {
            LeafFrame::Before if (1..=n).contains(&j) => {
                Some(self.frames[j - 1] * exit_chart(self.sides[j - 1]))
            }
            LeafFrame::After if j < n => Some(self.frames[j] * entry_chart(self.sides[j])),
            _ => None,
        }
    }

    /// Point of leaf `j` at signed arclength `position` from a distinguished point.
    pub fn point_on_leaf(&self, j: usize, frame: LeafFrame, position: f64) -> Option<UhpPoint> {
        self.leaf_chart(j, frame)
            .map(|m| m.apply_point(&UhpPoint::on_imaginary_axis(position)))
    }

    pub fn marked_point(&self, j: usize, frame: LeafFrame) -> Option<UhpPoint> {
        self.point_on_leaf(j, frame, 0.0)
    }

    /// `A⁻` and `A⁺`, the reference points on the boundary leaves.
    pub fn boundary_marks(&self) -> (UhpPoint, UhpPoint) {
        let n = self.n();
        (
            self.marked_point(0, LeafFrame::After).expect("leaf 0"),
            self.marked_point(n, LeafFrame::Before).expect("leaf n"),
        )
    }

    /// Ideal triangle completing wedge `i` (image of `(0, 1, ∞)`).
    pub fn completing_triangle(&self, i: usize) -> IdealTriangle {
        let m = &self.frames[i];
        IdealTriangle {
            vertices: [
                m.apply_ideal(IdealPoint::Finite(0.0)),
                m.apply_ideal(IdealPoint::Finite(1.0)),
                m.apply_ideal(IdealPoint::Infinity),
            ],
        }
    }

    /// Vertex of wedge `i`'s completing triangle off its exit side.
    fn exit_far_vertex(&self, i: usize) -> IdealPoint {
        let v = match self.sides[i] {
            Side::Left => IdealPoint::Finite(0.0),
            Side::Right => IdealPoint::Finite(1.0),
        };
        self.frames[i].apply_ideal(v)
    }

    /// Vertex of wedge `i`'s completing triangle off its entry side.
    fn entry_far_vertex(&self, i: usize) -> IdealPoint {
        let v = match self.sides[i] {
            Side::Left => IdealPoint::Finite(1.0),
            Side::Right => IdealPoint::Finite(0.0),
        };
        self.frames[i].apply_ideal(v)
    }

    fn check_leaf(&self, j: usize) -> Result<(), StripError> {
        if j == 0 || j >= self.n() {
            return Err(StripError::IndexOutOfRange {
                what: "interior leaf",
                index: j,
            });
        }
        Ok(())
    }

    /// Shear on interior leaf `j`, read off the two distinguished points.
    pub fn measure_shear(&self, j: usize) -> Result<f64, StripError> {
        self.check_leaf(j)?;
        let before = self.marked_point(j, LeafFrame::Before).expect("interior");
        let after = self.marked_point(j, LeafFrame::After).expect("interior");
        Ok(self.leaves[j].signed_offset(&before, &after))
    }

    /// The same shear as a log cross-ratio of the four vertices of the two
    /// completing triangles adjacent to leaf `j`.
    pub fn cross_ratio_shear(&self, j: usize) -> Result<f64, StripError> {
        self.check_leaf(j)?;
        let leaf = &self.leaves[j];
        let p = self.exit_far_vertex(j - 1);
        let q = self.entry_far_vertex(j);
        let cr = hyp::cross_ratio(p, q, leaf.tail(), leaf.head())
            .map_err(StripError::DegenerateStrip)?;
        Ok(-(-cr).ln())
    }

    /// Sum of the shears of the leaves separating wedges `i1 < i2`.
    pub fn shear_between(&self, i1: usize, i2: usize) -> Result<f64, StripError> {
        if i2 >= self.n() {
            return Err(StripError::IndexOutOfRange {
                what: "wedge",
                index: i2,
            });
        }
        if i1 >= i2 {
            return Err(StripError::IndexOutOfRange {
                what: "wedge pair",
                index: i1,
            });
        }
        ((i1 + 1)..=i2).map(|j| self.measure_shear(j)).sum()
    }

    /// Slides a point along the horocycles centred at the wedge apexes from
    /// leaf `from_leaf` to leaf `to_leaf`.
    ///
    /// `position` is measured from the distinguished point of wedge
    /// `from_leaf` on its entry side; the result is measured from the
    /// distinguished point of wedge `to_leaf − 1` on its exit side.
    pub fn horocyclic_project(
        &self,
        from_leaf: usize,
        position: f64,
        to_leaf: usize,
    ) -> Result<f64, StripError> {
        let n = self.n();
        if to_leaf > n {
            return Err(StripError::IndexOutOfRange {
                what: "leaf",
                index: to_leaf,
            });
        }
        if from_leaf >= to_leaf {
            return Err(StripError::IndexOutOfRange {
                what: "leaf pair",
                index: from_leaf,
            });
        }
        let mut p = self
            .point_on_leaf(from_leaf, LeafFrame::After, position)
            .expect("from_leaf < n");
        for i in from_leaf..to_leaf {
            let f = &self.frames[i];
            let q = f.inverse().apply_point(&p);
            // horocycles about ∞ are horizontal lines
            let exit_x = match self.sides[i] {
                Side::Left => 1.0,
                Side::Right => 0.0,
            };
            p = f.apply_point(&UhpPoint { x: exit_x, y: q.y });
        }
        let mark = self
            .marked_point(to_leaf, LeafFrame::Before)
            .expect("to_leaf ≥ 1");
        Ok(self.leaves[to_leaf].signed_offset(&mark, &p))
    }
}

/// Glues the wedges of `shape` edge to edge with the prescribed shears.
pub fn develop(shape: &StripShape) -> Result<DevelopedStrip, StripError> {
    let sides = shape.combinatorics.apex_sides.clone();
    let n = sides.len();
    let mut frames = Vec::with_capacity(n);
    frames.push(MobiusMap::IDENTITY);
    for i in 0..n - 1 {
        let glue = exit_chart(sides[i])
            * MobiusMap::dilation(shape.shears[i])
            * entry_chart(sides[i + 1]).inverse();
        frames.push(frames[i] * glue);
    }
    let axis = Geodesic::imaginary_axis();
    let mut leaves = Vec::with_capacity(n + 1);
    leaves.push((frames[0] * entry_chart(sides[0])).apply_geodesic(&axis));
    for i in 0..n {
        leaves.push((frames[i] * exit_chart(sides[i])).apply_geodesic(&axis));
    }
    hyp::geodesic_gap(&leaves[0], &leaves[n]).map_err(StripError::DegenerateStrip)?;
    Ok(DevelopedStrip {
        sides,
        frames,
        leaves,
    })
}

/// `Δ` padded with zeros on the two boundary leaves: entry `j` is the shear
/// change on leaf `j`.
fn padded_delta(base: &StripShape, x: &[f64]) -> Vec<f64> {
    let n = base.n();
    let mut d = vec![0.0; n + 1];
    for j in 1..n {
        d[j] = x[j - 1] - base.shears[j - 1];
    }
    d
}

fn check_x(base: &StripShape, x: &[f64]) -> Result<(), StripError> {
    if x.len() != base.n() - 1 {
        return Err(StripError::DimensionMismatch {
            what: "shear vector",
            expected: base.n() - 1,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StripError::NonFinite);
    }
    Ok(())
}

/// Terms of the piecewise-geodesic length functional.
#[derive(Debug, Clone, PartialEq)]
pub struct PwLengthTerms {
    /// Wedge-segment lengths, one per wedge.
    pub wedge: Vec<f64>,
    /// Leaf-segment lengths, one per interior leaf.
    pub gap: Vec<f64>,
}

impl PwLengthTerms {
    pub fn total(&self) -> f64 {
        self.wedge.iter().sum::<f64>() + self.gap.iter().sum::<f64>()
    }
}

/// Endpoint positions of each wedge segment once the strip is sheared from
/// `base` to `x`: `(y_i⁻ − Δ_i/2, y_i⁺ + Δ_{i+1}/2)`.
///
/// Half of each shear change is absorbed on either side of the leaf, so the
/// leaf segment joining consecutive wedge segments keeps its length.
pub fn shifted_endpoints(
    base: &StripShape,
    x: &[f64],
    y: &PwCurveCoords,
) -> Result<Vec<[f64; 2]>, StripError> {
    check_x(base, x)?;
    let n = base.n();
    if y.len() != n {
        return Err(StripError::DimensionMismatch {
            what: "curve coordinates",
            expected: n,
            got: y.len(),
        });
    }
    let delta = padded_delta(base, x);
    Ok((0..n)
        .map(|i| [y.y[i][0] - 0.5 * delta[i], y.y[i][1] + 0.5 * delta[i + 1]])
        .collect())
}

pub fn pw_length_terms(
    base: &StripShape,
    x: &[f64],
    y: &PwCurveCoords,
) -> Result<PwLengthTerms, StripError> {
    let ends = shifted_endpoints(base, x, y)?;
    let sides = base.combinatorics.apex_sides();
    let wedge = ends
        .iter()
        .zip(sides)
        .map(|(e, &s)| wedge_chord(s, e[0], e[1]))
        .collect();
    let gap = (1..base.n())
        .map(|j| (y.y[j - 1][1] - y.y[j][0] - base.shears[j - 1]).abs())
        .collect();
    Ok(PwLengthTerms { wedge, gap })
}

/// Length of the piecewise-geodesic curve `y` (recorded on `base`) after
/// shearing the strip to `x`.
pub fn pw_length(base: &StripShape, x: &[f64], y: &PwCurveCoords) -> Result<f64, StripError> {
    Ok(pw_length_terms(base, x, y)?.total())
}

/// Minimiser of the length functional.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub length: f64,
    pub coords: PwCurveCoords,
    pub iterations: usize,
    /// Largest `|∂W/∂v|` across leaves: the subgradient of each leaf term is
    /// `[-1, 1]`, so a value below one certifies optimality at the kinks.
    pub max_kink_multiplier: f64,
}

pub const MAX_ITERATIONS: usize = 10_000;
const GRAD_TOL: f64 = 1e-10;

/// Largest coordinate change of one Newton step.
const MAX_NEWTON_STEP: f64 = 2.0;

/// Solves `(H + μI) p = −g`, raising `μ` from zero until `H + μI` factors.
fn regularised_solve(h: DMatrix<f64>, g: &[f64]) -> Option<DVector<f64>> {
    let rhs = -DVector::from_column_slice(g);
    let scale = 1.0 + h.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut mu = 0.0;
    for _ in 0..12 {
        let shifted = &h + DMatrix::identity(h.nrows(), h.ncols()) * mu;
        if let Some(c) = shifted.cholesky() {
            return Some(c.solve(&rhs));
        }
        mu = if mu == 0.0 { 1e-12 * scale } else { mu * 100.0 };
    }
    None
}

/// Reduced problem: the curve crosses each interior leaf at one point, so
/// every leaf term vanishes. Variable `z_0` is the entry position on leaf 0,
/// `z_j` (`1 ≤ j < n`) the crossing of leaf `j` in the `Before` frame and
/// `z_n` the exit position on leaf `n`.
struct Reduced<'a> {
    sides: &'a [Side],
    x: &'a [f64],
    free: Vec<bool>,
}

impl Reduced<'_> {
    fn n(&self) -> usize {
        self.sides.len()
    }

    fn wedge_args(&self, z: &[f64], i: usize) -> (f64, f64) {
        let shift = if i == 0 { 0.0 } else { self.x[i - 1] };
        (z[i] - shift, z[i + 1])
    }

    fn value(&self, z: &[f64]) -> f64 {
        (0..self.n())
            .map(|i| {
                let (u, v) = self.wedge_args(z, i);
                wedge_chord(self.sides[i], u, v)
            })
            .sum()
    }

    fn derivatives(&self, z: &[f64]) -> (f64, Vec<f64>, Vec<[f64; 3]>) {
        // tridiagonal Hessian stored as (sub, diag, super) per row
        let n = self.n();
        let mut g = vec![0.0; n + 1];
        let mut h = vec![[0.0; 3]; n + 1];
        let mut f = 0.0;
        for i in 0..n {
            let (u, v) = self.wedge_args(z, i);
            let (d, gr, hs) = wedge_chord_derivatives(self.sides[i], u, v);
            f += d;
            g[i] += gr[0];
            g[i + 1] += gr[1];
            h[i][1] += hs[0][0];
            h[i][2] += hs[0][1];
            h[i + 1][0] += hs[1][0];
            h[i + 1][1] += hs[1][1];
        }
        (f, g, h)
    }

    fn free_indices(&self) -> Vec<usize> {
        (0..=self.n()).filter(|&k| self.free[k]).collect()
    }

    fn newton(&self, z: &mut [f64]) -> Option<usize> {
        let idx = self.free_indices();
        let m = idx.len();
        for it in 0..200 {
            let (f, g, h) = self.derivatives(z);
            let gf: Vec<f64> = idx.iter().map(|&k| g[k]).collect();
            let gnorm = gf.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if gnorm <= GRAD_TOL {
                return Some(it);
            }
            let mut hm = DMatrix::<f64>::zeros(m, m);
            for (r, &k) in idx.iter().enumerate() {
                for (c, &l) in idx.iter().enumerate() {
                    hm[(r, c)] = if l + 1 == k {
                        h[k][0]
                    } else if l == k {
                        h[k][1]
                    } else if l == k + 1 {
                        h[k][2]
                    } else {
                        0.0
                    };
                }
            }
            let mut step = regularised_solve(hm, &gf)?;
            // far out on a wedge the chord is nearly affine and the Newton
            // step overshoots by orders of magnitude
            let longest = step.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if longest > MAX_NEWTON_STEP {
                step *= MAX_NEWTON_STEP / longest;
            }
            let slope: f64 = step.iter().zip(&gf).map(|(s, g)| s * g).sum();
            if !(slope < 0.0) {
                return None;
            }
            if -slope < 1e-13 * (1.0 + f.abs()) {
                // decrease below the resolution of f: quadratic regime
                for (r, &k) in idx.iter().enumerate() {
                    z[k] += step[r];
                }
                continue;
            }
            let mut t = 1.0;
            let mut trial = z.to_vec();
            loop {
                for (r, &k) in idx.iter().enumerate() {
                    trial[k] = z[k] + t * step[r];
                }
                let ft = self.value(&trial);
                if ft <= f + 1e-4 * t * slope {
                    break;
                }
                t *= 0.5;
                if t < 1e-12 {
                    // no decrease representable in floating point
                    return if gnorm < 1e-7 { Some(it) } else { None };
                }
            }
            z.copy_from_slice(&trial);
        }
        None
    }

    /// Cyclic coordinate descent with safeguarded one-dimensional Newton
    /// steps, used when the full Newton iteration breaks down.
    fn coordinate_descent(&self, z: &mut [f64], budget: usize) -> Option<usize> {
        let idx = self.free_indices();
        for sweep in 0..budget {
            let mut worst = 0.0f64;
            for &k in &idx {
                for _ in 0..50 {
                    let (_, g, h) = self.derivatives(z);
                    let gk = g[k];
                    worst = worst.max(gk.abs());
                    if gk.abs() <= GRAD_TOL {
                        break;
                    }
                    let f0 = self.value(z);
                    let mut step = if h[k][1] > 0.0 { -gk / h[k][1] } else { -gk };
                    let old = z[k];
                    loop {
                        z[k] = old + step;
                        if self.value(z) < f0 || step.abs() < 1e-16 {
                            break;
                        }
                        step *= 0.5;
                    }
                }
            }
            if worst <= GRAD_TOL {
                return Some(sweep);
            }
        }
        None
    }

    fn minimise(&self, z: &mut [f64]) -> Result<usize, StripError> {
        if let Some(it) = self.newton(z) {
            return Ok(it);
        }
        let start = z.to_vec();
        match self.coordinate_descent(z, MAX_ITERATIONS) {
            Some(it) => Ok(it),
            None => {
                let best = self.value(z).min(self.value(&start));
                Err(StripError::Convergence {
                    best,
                    iterations: MAX_ITERATIONS,
                })
            }
        }
    }
}

fn minimum_from_reduced(
    base: &StripShape,
    x: &[f64],
    red: &Reduced<'_>,
    z: &[f64],
    iterations: usize,
) -> Minimum {
    let n = base.n();
    let delta = padded_delta(base, x);
    let y = (0..n)
        .map(|i| {
            let (u, v) = red.wedge_args(z, i);
            [u + 0.5 * delta[i], v - 0.5 * delta[i + 1]]
        })
        .collect();
    let (length, g, _) = red.derivatives(z);
    let mut max_kink = 0.0f64;
    for i in 0..n - 1 {
        let (u, v) = red.wedge_args(z, i);
        let (_, gr, _) = wedge_chord_derivatives(red.sides[i], u, v);
        max_kink = max_kink.max(gr[1].abs());
    }
    let _ = g;
    Minimum {
        length,
        coords: PwCurveCoords { y },
        iterations,
        max_kink_multiplier: max_kink,
    }
}

fn initial_reduced(base: &StripShape, x: &[f64], init: Option<&PwCurveCoords>) -> Vec<f64> {
    let n = base.n();
    match init {
        None => vec![0.0; n + 1],
        Some(y) => {
            let delta = padded_delta(base, x);
            let mut z = vec![0.0; n + 1];
            z[0] = y.y[0][0];
            for j in 1..=n {
                z[j] = y.y[j - 1][1] + 0.5 * delta[j];
            }
            z
        }
    }
}

fn finish(
    base: &StripShape,
    x: &[f64],
    red: &Reduced<'_>,
    mut z: Vec<f64>,
) -> Result<Minimum, StripError> {
    let it = red.minimise(&mut z)?;
    let m = minimum_from_reduced(base, x, red, &z, it);
    if m.max_kink_multiplier > 1.0 + 1e-9 {
        return Err(StripError::Convergence {
            best: m.length,
            iterations: it,
        });
    }
    Ok(m)
}

/// Length of the geodesic segment from position `y_minus` on `g⁻` to
/// position `y_plus` on `g⁺` (relative to `A⁻`, `A⁺`) in the strip sheared
/// to `x`, obtained by minimising [`pw_length`] over the interior positions.
pub fn geodesic_length(
    base: &StripShape,
    x: &[f64],
    y_minus: f64,
    y_plus: f64,
) -> Result<Minimum, StripError> {
    geodesic_length_from(base, x, y_minus, y_plus, None)
}

/// As [`geodesic_length`], starting the optimiser from `init`.
pub fn geodesic_length_from(
    base: &StripShape,
    x: &[f64],
    y_minus: f64,
    y_plus: f64,
    init: Option<&PwCurveCoords>,
) -> Result<Minimum, StripError> {
    check_x(base, x)?;
    if !y_minus.is_finite() || !y_plus.is_finite() {
        return Err(StripError::NonFinite);
    }
    if let Some(y) = init {
        if y.len() != base.n() {
            return Err(StripError::DimensionMismatch {
                what: "curve coordinates",
                expected: base.n(),
                got: y.len(),
            });
        }
    }
    let n = base.n();
    let mut free = vec![true; n + 1];
    free[0] = false;
    free[n] = false;
    let red = Reduced {
        sides: base.combinatorics.apex_sides(),
        x,
        free,
    };
    let mut z = initial_reduced(base, x, init);
    z[0] = y_minus;
    z[n] = y_plus;
    finish(base, x, &red, z)
}

/// Unconstrained minimum of [`pw_length`]: the length of the core.
pub fn core_length(base: &StripShape, x: &[f64]) -> Result<f64, StripError> {
    core_minimum(base, x, None).map(|m| m.length)
}

pub fn core_minimum(
    base: &StripShape,
    x: &[f64],
    init: Option<&PwCurveCoords>,
) -> Result<Minimum, StripError> {
    check_x(base, x)?;
    // a fan has no core
    develop(&base.with_shears(x)?)?;
    let n = base.n();
    let red = Reduced {
        sides: base.combinatorics.apex_sides(),
        x,
        free: vec![true; n + 1],
    };
    let z = initial_reduced(base, x, init);
    finish(base, x, &red, z)
}
