//! Punctured surfaces with ideal triangulations and global shear coordinates.
//!
//! Triangle sides are numbered `0, 1, 2` counter-clockwise; side `k` runs
//! from vertex `k` to vertex `k + 1`. A closed curve is a cyclic word of edge
//! crossings, each followed by a turn inside the triangle just entered:
//! entering through side `s`, a right turn leaves through side `s + 1` and a
//! left turn through side `s + 2`.
//!
//! Holonomy is the product over the word of `X(x_e)·T`, with
//! `X(x) = diag(e^{x/2}, e^{−x/2})`, `L = [[1, 0], [1, 1]]` and
//! `R = [[1, 1], [0, 1]]`. Every factor has nonnegative entries, so the trace
//! is a Laurent polynomial in the `e^{x_e/2}` with positive coefficients; it
//! is kept in that form to evaluate lengths far out along deformation lines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyp::MobiusMap;

pub use crate::harness::convexity_scan;

pub type EdgeId = usize;

/// Traces within this distance of 2 are treated as parabolic.
pub const PARABOLIC_MARGIN: f64 = 1e-12;
/// Largest admissible distance from the puncture-relation subspace.
pub const RELATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("invalid gluing: {0}")]
    BadGluing(String),
    #[error("Euler characteristic {0} is not negative")]
    NotHyperbolicSurface(i64),
    #[error("puncture cycles {0:?} do not match the gluing")]
    PunctureMismatch(Vec<Vec<EdgeId>>),
    #[error("shear vector has {got} entries, surface has {expected} edges")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shears violate the puncture relations by {0:e}")]
    RelationViolation(f64),
    #[error("invalid curve word: {0}")]
    InvalidWord(String),
    #[error("holonomy is not hyperbolic (trace {trace})")]
    NotHyperbolic { trace: f64 },
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("non-finite input")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Turn {
    L,
    R,
}

/// A side of a triangle, `(triangle, side)`.
pub type Incidence = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangulatedSurface {
    sides: Vec<[EdgeId; 3]>,
    gluings: Vec<[Incidence; 2]>,
    punctures: Vec<Vec<EdgeId>>,
}

#[derive(Serialize, Deserialize)]
struct SurfaceJson {
    triangles: usize,
    edge_gluings: Vec<[Incidence; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    puncture_cycles: Option<Vec<Vec<EdgeId>>>,
}

impl Serialize for TriangulatedSurface {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SurfaceJson {
            triangles: self.sides.len(),
            edge_gluings: self.gluings.clone(),
            puncture_cycles: Some(self.punctures.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TriangulatedSurface {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = SurfaceJson::deserialize(d)?;
        let s = TriangulatedSurface::new(j.triangles, j.edge_gluings)
            .map_err(serde::de::Error::custom)?;
        if let Some(given) = j.puncture_cycles {
            let canon = |c: &[Vec<EdgeId>]| {
                let mut v: Vec<Vec<EdgeId>> = c
                    .iter()
                    .map(|x| {
                        let mut x = x.clone();
                        x.sort_unstable();
                        x
                    })
                    .collect();
                v.sort();
                v
            };
            if canon(&given) != canon(&s.punctures) {
                return Err(serde::de::Error::custom(SurfaceError::PunctureMismatch(given)));
            }
        }
        Ok(s)
    }
}

impl TriangulatedSurface {
    /// Builds a surface from the two triangle sides glued along each edge.
    pub fn new(n_triangles: usize, gluings: Vec<[Incidence; 2]>) -> Result<Self, SurfaceError> {
        let mut sides = vec![[usize::MAX; 3]; n_triangles];
        for (e, pair) in gluings.iter().enumerate() {
            for &(t, k) in pair {
                if t >= n_triangles || k >= 3 {
                    return Err(SurfaceError::BadGluing(format!("side ({t}, {k}) does not exist")));
                }
                if sides[t][k] != usize::MAX {
                    return Err(SurfaceError::BadGluing(format!("side ({t}, {k}) glued twice")));
                }
                sides[t][k] = e;
            }
        }
        if let Some(t) = sides.iter().position(|s| s.contains(&usize::MAX)) {
            return Err(SurfaceError::BadGluing(format!("triangle {t} has a free side")));
        }
        let chi = n_triangles as i64 - gluings.len() as i64;
        if chi >= 0 {
            return Err(SurfaceError::NotHyperbolicSurface(chi));
        }
        let mut s = Self {
            sides,
            gluings,
            punctures: Vec::new(),
        };
        s.punctures = s.corner_cycles();
        Ok(s)
    }

    /// The once-punctured torus: two triangles, three edges, one puncture.
    pub fn punctured_torus() -> Self {
        Self::new(
            2,
            vec![[(0, 0), (1, 1)], [(0, 1), (1, 2)], [(0, 2), (1, 0)]],
        )
        .expect("valid")
    }

    pub fn n_edges(&self) -> usize {
        self.gluings.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.sides.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_triangles() as i64 - self.n_edges() as i64
    }

    pub fn edge_at(&self, inc: Incidence) -> EdgeId {
        self.sides[inc.0][inc.1]
    }

    /// The side glued to `inc`.
    pub fn partner(&self, inc: Incidence) -> Incidence {
        let [a, b] = self.gluings[self.edge_at(inc)];
        if a == inc {
            b
        } else {
            a
        }
    }

    /// Edges crossed while circling each puncture, with multiplicity.
    pub fn puncture_cycles(&self) -> &[Vec<EdgeId>] {
        &self.punctures
    }

    fn corner_cycles(&self) -> Vec<Vec<EdgeId>> {
        // corner (t, k) sits between sides k − 1 and k; crossing side k
        // reaches the corner after the partner side
        let mut seen = vec![[false; 3]; self.n_triangles()];
        let mut cycles = Vec::new();
        for t in 0..self.n_triangles() {
            for k in 0..3 {
                let mut cyc = Vec::new();
                let mut c = (t, k);
                while !seen[c.0][c.1] {
                    seen[c.0][c.1] = true;
                    cyc.push(self.edge_at(c));
                    let (t2, s2) = self.partner(c);
                    c = (t2, (s2 + 1) % 3);
                }
                if !cyc.is_empty() {
                    cycles.push(cyc);
                }
            }
        }
        cycles
    }

    /// One row per puncture: how often each edge is crossed around it.
    pub fn relation_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.punctures.len(), self.n_edges());
        for (p, cyc) in self.punctures.iter().enumerate() {
            for &e in cyc {
                a[(p, e)] += 1.0;
            }
        }
        a
    }

    /// Largest puncture-relation residual.
    pub fn relation_residual(&self, x: &[f64]) -> f64 {
        self.punctures
            .iter()
            .map(|c| c.iter().map(|&e| x[e]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    fn check_len(&self, got: usize) -> Result<(), SurfaceError> {
        if got != self.n_edges() {
            return Err(SurfaceError::DimensionMismatch {
                expected: self.n_edges(),
                got,
            });
        }
        Ok(())
    }

    /// Orthogonal projection onto the puncture-relation subspace.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, SurfaceError> {
        self.check_len(x.len())?;
        let a = self.relation_matrix();
        let xv = DMatrix::from_column_slice(x.len(), 1, x);
        let gram = &a * a.transpose();
        let pinv = gram
            .pseudo_inverse(1e-12)
            .map_err(|_| SurfaceError::NonFinite)?;
        let corr = a.transpose() * pinv * (&a * &xv);
        Ok((xv - corr).iter().copied().collect())
    }

    /// Basis (as columns) of the puncture-relation subspace.
    pub fn relation_subspace(&self) -> DMatrix<f64> {
        let a = self.relation_matrix();
        let eig = (a.transpose() * &a).symmetric_eigen();
        let cols: Vec<_> = (0..self.n_edges())
            .filter(|&k| eig.eigenvalues[k].abs() < 1e-9)
            .map(|k| eig.eigenvectors.column(k).into_owned())
            .collect();
        DMatrix::from_columns(&cols)
    }

    pub fn shear_point(&self, x: &[f64]) -> Result<ShearPoint, SurfaceError> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SurfaceError::NonFinite);
        }
        let p = self.project(x)?;
        let dist = x
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist > RELATION_TOL {
            return Err(SurfaceError::RelationViolation(dist));
        }
        Ok(ShearPoint { x: p })
    }

    /// Follows `word` from side `start`; returns the side entered after the
    /// last step, or `None` if the word does not match the gluing.
    fn follow(&self, start: Incidence, steps: &[(EdgeId, Turn)]) -> Option<Incidence> {
        let mut cur = start;
        for (k, &(_, turn)) in steps.iter().enumerate() {
            let exit = match turn {
                Turn::R => (cur.1 + 1) % 3,
                Turn::L => (cur.1 + 2) % 3,
            };
            let out = (cur.0, exit);
            let next_edge = steps[(k + 1) % steps.len()].0;
            if self.edge_at(out) != next_edge {
                return None;
            }
            cur = self.partner(out);
        }
        Some(cur)
    }

    /// Side through which `word` first enters a triangle, chosen so that the
    /// word closes up.
    pub fn resolve(&self, word: &CurveWord) -> Result<Incidence, SurfaceError> {
        if let Some(&(bad, _)) = word.steps.iter().find(|(e, _)| *e >= self.n_edges()) {
            return Err(SurfaceError::InvalidWord(format!("unknown edge {bad}")));
        }
        self.gluings[word.steps[0].0]
            .iter()
            .copied()
            .find(|&inc| self.follow(inc, &word.steps) == Some(inc))
            .ok_or_else(|| SurfaceError::InvalidWord(format!("{word} does not close up")))
    }

    /// All-right word circling puncture `p`.
    pub fn peripheral_word(&self, p: usize) -> CurveWord {
        CurveWord {
            steps: self.punctures[p].iter().map(|&e| (e, Turn::R)).collect(),
        }
    }

    /// Closed words with at most `max_len` crossings, up to cyclic rotation,
    /// excluding peripheral ones.
    pub fn closed_words(&self, max_len: usize) -> Vec<CurveWord> {
        let mut found = std::collections::BTreeSet::new();
        let starts: Vec<Incidence> = (0..self.n_triangles())
            .flat_map(|t| (0..3).map(move |k| (t, k)))
            .collect();
        for len in 1..=max_len {
            for bits in 0u64..(1 << len) {
                let turns: Vec<Turn> = (0..len)
                    .map(|i| if bits >> i & 1 == 1 { Turn::L } else { Turn::R })
                    .collect();
                if turns.iter().all(|&t| t == turns[0]) {
                    continue;
                }
                for &start in &starts {
                    let mut cur = start;
                    let mut steps = Vec::with_capacity(len);
                    for &turn in &turns {
                        steps.push((self.edge_at(self.partner(cur)), turn));
                        let exit = match turn {
                            Turn::R => (cur.1 + 1) % 3,
                            Turn::L => (cur.1 + 2) % 3,
                        };
                        cur = self.partner((cur.0, exit));
                    }
                    if cur == start {
                        found.insert(CurveWord { steps }.canonical());
                    }
                }
            }
        }
        found.into_iter().collect()
    }
}

/// Shears on the edges, satisfying the puncture relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearPoint {
    pub x: Vec<f64>,
}

/// A closed edge-path with turns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CurveWord {
    steps: Vec<(EdgeId, Turn)>,
}

impl CurveWord {
    pub fn new(steps: Vec<(EdgeId, Turn)>) -> Result<Self, SurfaceError> {
        if steps.is_empty() {
            return Err(SurfaceError::InvalidWord("empty".into()));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(EdgeId, Turn)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rotated(&self, k: usize) -> Self {
        let mut steps = self.steps.clone();
        steps.rotate_left(k % self.steps.len());
        Self { steps }
    }

    /// Least cyclic rotation.
    pub fn canonical(&self) -> Self {
        (0..self.steps.len())
            .map(|k| self.rotated(k))
            .min()
            .expect("nonempty")
    }

    /// Edges crossed, with multiplicity.
    pub fn crossings(&self, n_edges: usize) -> Vec<usize> {
        let mut c = vec![0; n_edges];
        for &(e, _) in &self.steps {
            if e < n_edges {
                c[e] += 1;
            }
        }
        c
    }
}

impl fmt::Display for CurveWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .steps
            .iter()
            .map(|(e, t)| format!("{e} {t:?}"))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for CurveWord {
    type Err = SurfaceError;

    fn from_str(s: &str) -> Result<Self, SurfaceError> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        if tokens.len() % 2 != 0 {
            return Err(SurfaceError::InvalidWord(format!("{s:?}: odd token count")));
        }
        let steps = tokens
            .chunks(2)
            .map(|c| {
                let e = c[0]
                    .parse()
                    .map_err(|_| SurfaceError::InvalidWord(format!("bad edge {:?}", c[0])))?;
                let t = match c[1] {
                    "L" => Turn::L,
                    "R" => Turn::R,
                    other => return Err(SurfaceError::InvalidWord(format!("bad turn {other:?}"))),
                };
                Ok((e, t))
            })
            .collect::<Result<Vec<_>, _>>()?;
        CurveWord::new(steps)
    }
}

impl Serialize for CurveWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CurveWord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

fn turn_matrix(t: Turn) -> MobiusMap {
    match t {
        Turn::L => MobiusMap {
            a: 1.0,
            b: 0.0,
            c: 1.0,
            d: 1.0,
        },
        Turn::R => MobiusMap {
            a: 1.0,
            b: 1.0,
            c: 0.0,
            d: 1.0,
        },
    }
}

fn edge_matrix(x: f64) -> MobiusMap {
    MobiusMap {
        a: (0.5 * x).exp(),
        b: 0.0,
        c: 0.0,
        d: (-0.5 * x).exp(),
    }
}

/// Product of the step matrices; the identity for an empty path.
pub fn path_holonomy(x: &[f64], steps: &[(EdgeId, Turn)]) -> MobiusMap {
    steps.iter().fold(MobiusMap::IDENTITY, |m, &(e, t)| {
        m * edge_matrix(x[e]) * turn_matrix(t)
    })
}

fn check_point(s: &TriangulatedSurface, x: &ShearPoint) -> Result<(), SurfaceError> {
    s.check_len(x.x.len())?;
    let r = s.relation_residual(&x.x);
    if r > RELATION_TOL * (1.0 + x.x.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
        return Err(SurfaceError::RelationViolation(r));
    }
    Ok(())
}

pub fn holonomy(
    s: &TriangulatedSurface,
    x: &ShearPoint,
    c: &CurveWord,
) -> Result<MobiusMap, SurfaceError> {
    check_point(s, x)?;
    s.resolve(c)?;
    Ok(path_holonomy(&x.x, &c.steps))
}

/// Trace of a word's holonomy as `Σ c_k exp(⟨v_k, x⟩ / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePolynomial {
    /// `(v_k, c_k)` with integer exponent vectors and positive coefficients.
    pub terms: Vec<(Vec<i32>, f64)>,
}

type Poly = BTreeMap<Vec<i32>, f64>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<i32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            *out.entry(e).or_insert(0.0) += ca * cb;
        }
    }
    out
}

fn poly_add(a: &Poly, b: &Poly) -> Poly {
    let mut out = a.clone();
    for (e, c) in b {
        *out.entry(e.clone()).or_insert(0.0) += c;
    }
    out
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln ℓ` for the closed geodesic with `cosh(ℓ/2) = 1 + ε`, from `ln ε`.
pub fn log_length_from_log_excess(log_eps: f64) -> f64 {
    if log_eps > 700.0 {
        // ℓ = 2(ln ε + ln(1 + 1/ε + √(1 + 2/ε)))
        let inv = (-log_eps).exp();
        (2.0 * (log_eps + (1.0 + inv + (1.0 + 2.0 * inv).sqrt()).ln())).ln()
    } else if log_eps < -700.0 {
        // ℓ ≈ 2√(2ε)
        std::f64::consts::LN_2 + 0.5 * (std::f64::consts::LN_2 + log_eps)
    } else {
        let e = log_eps.exp();
        (2.0 * (e + e.sqrt() * (e + 2.0).sqrt()).ln_1p()).ln()
    }
}

impl TracePolynomial {
    pub fn of_word(n_edges: usize, steps: &[(EdgeId, Turn)]) -> Self {
        let zero = vec![0i32; n_edges];
        let constant = |c: f64| -> Poly {
            if c == 0.0 {
                Poly::new()
            } else {
                Poly::from([(zero.clone(), c)])
            }
        };
        let mut m: [[Poly; 2]; 2] = [
            [constant(1.0), constant(0.0)],
            [constant(0.0), constant(1.0)],
        ];
        for &(e, t) in steps {
            let mut up = zero.clone();
            up[e] = 1;
            let mut down = zero.clone();
            down[e] = -1;
            let tm = turn_matrix(t);
            // X(x_e)·T has rows (e^{x/2}·T row 0, e^{−x/2}·T row 1)
            let f: [[Poly; 2]; 2] = [
                [
                    if tm.a != 0.0 { Poly::from([(up.clone(), tm.a)]) } else { Poly::new() },
                    if tm.b != 0.0 { Poly::from([(up.clone(), tm.b)]) } else { Poly::new() },
                ],
                [
                    if tm.c != 0.0 { Poly::from([(down.clone(), tm.c)]) } else { Poly::new() },
                    if tm.d != 0.0 { Poly::from([(down.clone(), tm.d)]) } else { Poly::new() },
                ],
            ];
            let mut next: [[Poly; 2]; 2] = Default::default();
            for (i, row) in next.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell = poly_add(&poly_mul(&m[i][0], &f[0][j]), &poly_mul(&m[i][1], &f[1][j]));
                }
            }
            m = next;
        }
        let tr = poly_add(&m[0][0], &m[1][1]);
        Self {
            terms: tr.into_iter().filter(|(_, c)| *c != 0.0).collect(),
        }
    }

    fn exponent(v: &[i32], x: &[f64]) -> f64 {
        0.5 * v.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum::<f64>()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(v, c)| c * Self::exponent(v, x).exp())
            .sum()
    }

    pub fn log_eval(&self, x: &[f64]) -> f64 {
        log_sum_exp(self.terms.iter().map(|(v, c)| c.ln() + Self::exponent(v, x)))
    }

    /// `ln(trace − 2)`, or `None` when the trace is at most 2.
    ///
    /// Terms whose exponent vanishes exactly are summed as integers, so the
    /// difference is accurate even when the trace is within rounding of 2.
    pub fn log_trace_minus_two(&self, x: &[f64]) -> Option<f64> {
        let mut constant = 0.0;
        let mut logs = Vec::new();
        for (v, c) in &self.terms {
            let f = Self::exponent(v, x);
            if f == 0.0 {
                constant += c;
            } else {
                logs.push(c.ln() + f);
            }
        }
        if constant >= 2.0 {
            if constant > 2.0 {
                logs.push((constant - 2.0f64).ln());
            }
            let s = log_sum_exp(logs.into_iter());
            return (s > f64::NEG_INFINITY).then_some(s);
        }
        let s = log_sum_exp(logs.into_iter());
        let deficit = 2.0 - constant;
        let r = deficit * (-s).exp();
        if !(r < 1.0) {
            return None;
        }
        Some(s + (-r).ln_1p())
    }
}

fn log_excess(
    s: &TriangulatedSurface,
    x: &ShearPoint,
    c: &CurveWord,
) -> Result<(TracePolynomial, Option<f64>), SurfaceError> {
    check_point(s, x)?;
    s.resolve(c)?;
    let p = TracePolynomial::of_word(s.n_edges(), &c.steps);
    let l = p.log_trace_minus_two(&x.x);
    Ok((p, l))
}

/// `2·arccosh(|trace| / 2)`.
pub fn curve_length(
    s: &TriangulatedSurface,
    x: &ShearPoint,
    c: &CurveWord,
) -> Result<f64, SurfaceError> {
    let (p, l) = log_excess(s, x, c)?;
    match l {
        Some(l) if l > PARABOLIC_MARGIN.ln() => {
            Ok(log_length_from_log_excess(l - std::f64::consts::LN_2).exp())
        }
        _ => Err(SurfaceError::NotHyperbolic {
            trace: p.eval(&x.x),
        }),
    }
}

/// `ln ℓ`, valid where the length itself over- or underflows. Only an exact
/// trace of at most 2 is rejected.
pub fn curve_log_length(
    s: &TriangulatedSurface,
    x: &ShearPoint,
    c: &CurveWord,
) -> Result<f64, SurfaceError> {
    let (p, l) = log_excess(s, x, c)?;
    match l {
        Some(l) => Ok(log_length_from_log_excess(l - std::f64::consts::LN_2)),
        None => Err(SurfaceError::NotHyperbolic {
            trace: p.eval(&x.x),
        }),
    }
}

/// `Σ r_k ℓ(c_k)`.
pub fn multicurve_length(
    s: &TriangulatedSurface,
    x: &ShearPoint,
    curves: &[(CurveWord, f64)],
) -> Result<f64, SurfaceError> {
    let mut total = 0.0;
    for (c, r) in curves {
        if *r < 0.0 {
            return Err(SurfaceError::NegativeWeight(*r));
        }
        total += r * curve_length(s, x, c)?;
    }
    Ok(total)
}

/// `ln Σ r_k ℓ(c_k)` from log-lengths.
pub fn multicurve_log_length(
    s: &TriangulatedSurface,
    x: &ShearPoint,
    curves: &[(CurveWord, f64)],
) -> Result<f64, SurfaceError> {
    let mut logs = Vec::new();
    for (c, r) in curves {
        if *r < 0.0 {
            return Err(SurfaceError::NegativeWeight(*r));
        }
        if *r > 0.0 {
            logs.push(r.ln() + curve_log_length(s, x, c)?);
        }
    }
    Ok(log_sum_exp(logs.into_iter()))
}

/// Scales all shears by `e^t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StretchLine {
    pub base: ShearPoint,
}

impl StretchLine {
    pub fn point(&self, t: f64) -> ShearPoint {
        self.point_u(t.exp())
    }

    /// Log-arclength parameter `u = e^t`.
    pub fn point_u(&self, u: f64) -> ShearPoint {
        ShearPoint {
            x: self.base.x.iter().map(|v| u * v).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EarthquakeSide {
    Left,
    Right,
}

/// `x₀ + t·d` (left) or `x₀ − t·d` (right).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarthquakeLine {
    base: ShearPoint,
    direction: Vec<f64>,
    side: EarthquakeSide,
}

impl EarthquakeLine {
    pub fn new(
        s: &TriangulatedSurface,
        base: ShearPoint,
        direction: Vec<f64>,
        side: EarthquakeSide,
    ) -> Result<Self, SurfaceError> {
        check_point(s, &base)?;
        s.check_len(direction.len())?;
        if direction.iter().any(|v| !v.is_finite()) {
            return Err(SurfaceError::NonFinite);
        }
        let r = s.relation_residual(&direction);
        if r > RELATION_TOL {
            return Err(SurfaceError::RelationViolation(r));
        }
        Ok(Self {
            base,
            direction,
            side,
        })
    }

    pub fn base(&self) -> &ShearPoint {
        &self.base
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn point(&self, t: f64) -> ShearPoint {
        let sign = match self.side {
            EarthquakeSide::Left => 1.0,
            EarthquakeSide::Right => -1.0,
        };
        ShearPoint {
            x: self
                .base
                .x
                .iter()
                .zip(&self.direction)
                .map(|(b, d)| b + sign * t * d)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DeformationLine {
    Stretch(StretchLine),
    Earthquake(EarthquakeLine),
}

impl DeformationLine {
    pub fn point(&self, t: f64) -> ShearPoint {
        match self {
            DeformationLine::Stretch(l) => l.point(t),
            DeformationLine::Earthquake(l) => l.point(t),
        }
    }
}

pub fn stretch_point(line: &StretchLine, t: f64) -> ShearPoint {
    line.point(t)
}

pub fn earthquake_point(line: &EarthquakeLine, t: f64) -> ShearPoint {
    line.point(t)
}

/// Intersection pattern of a curve with the stump `μ₀` and the horocyclic
/// lamination `λ` of a stretch line, supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub meets_stump: bool,
    pub inside_stump: bool,
    pub meets_horocyclic: bool,
    pub inside_horocyclic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum End {
    PlusInfinity,
    MinusInfinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Limit {
    Infinity,
    Zero,
    Bounded,
}

/// The asymptotic table for lengths along a stretch line.
pub fn predicted_limit(end: End, c: Classification) -> Limit {
    let (meets, inside) = match end {
        End::PlusInfinity => (c.meets_horocyclic, c.inside_horocyclic),
        End::MinusInfinity => (c.meets_stump, c.inside_stump),
    };
    match (meets, inside) {
        (false, _) => Limit::Bounded,
        (true, true) => Limit::Zero,
        (true, false) => Limit::Infinity,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Growth,
    Decay,
    Bounded,
    Mixed,
}

/// Change of `ln ℓ` over a window below which the length counts as settled.
pub const BOUNDED_LOG_VARIATION: f64 = 1e-2;
/// Average slope of `ln ℓ` in `t` required for growth or decay.
pub const TREND_SLOPE: f64 = 0.5;

/// Growth and decay must be strictly monotone with `|d ln ℓ / dt|` at least
/// [`TREND_SLOPE`] on average; a settled window is bounded.
pub fn classify_trend(ts: &[f64], log_lengths: &[f64]) -> Trend {
    let span = ts[ts.len() - 1] - ts[0];
    let rise = log_lengths[log_lengths.len() - 1] - log_lengths[0];
    let lo = log_lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = log_lengths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let up = log_lengths.windows(2).all(|w| w[1] > w[0]);
    let down = log_lengths.windows(2).all(|w| w[1] < w[0]);
    if up && rise >= TREND_SLOPE * span {
        Trend::Growth
    } else if down && -rise >= TREND_SLOPE * span {
        Trend::Decay
    } else if hi - lo <= BOUNDED_LOG_VARIATION {
        Trend::Bounded
    } else {
        Trend::Mixed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub end: End,
    pub ts: Vec<f64>,
    pub log_lengths: Vec<f64>,
    pub predicted: Limit,
    pub observed: Trend,
    pub consistent: bool,
}

/// Samples `ln ℓ` of a weighted multicurve along a stretch line on the
/// window `[5, 10]` or `[−10, −5]` and compares with the table.
pub fn asymptotic_probe(
    s: &TriangulatedSurface,
    line: &StretchLine,
    curves: &[(CurveWord, f64)],
    class: Classification,
    end: End,
    samples: usize,
) -> Result<AsymptoticReport, SurfaceError> {
    let (lo, hi) = match end {
        End::PlusInfinity => (5.0, 10.0),
        End::MinusInfinity => (-10.0, -5.0),
    };
    let ts = crate::harness::linspace(lo, hi, samples.max(2));
    let log_lengths = ts
        .iter()
        .map(|&t| multicurve_log_length(s, &line.point(t), curves))
        .collect::<Result<Vec<_>, _>>()?;
    let predicted = predicted_limit(end, class);
    let observed = classify_trend(&ts, &log_lengths);
    let consistent = matches!(
        (predicted, observed),
        (Limit::Infinity, Trend::Growth) | (Limit::Zero, Trend::Decay) | (Limit::Bounded, Trend::Bounded)
    );
    Ok(AsymptoticReport {
        end,
        ts,
        log_lengths,
        predicted,
        observed,
        consistent,
    })
}

/// `max(0, max_k ln(ℓ_h(c_k) / ℓ_g(c_k)))`: a lower bound for the Thurston
/// distance from `g` to `h`.
pub fn thurston_distance_estimate(
    s: &TriangulatedSurface,
    x_g: &ShearPoint,
    x_h: &ShearPoint,
    family: &[CurveWord],
) -> Result<f64, SurfaceError> {
    let mut best = 0.0f64;
    for c in family {
        let r = curve_log_length(s, x_h, c)? - curve_log_length(s, x_g, c)?;
        best = best.max(r);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus() -> TriangulatedSurface {
        TriangulatedSurface::punctured_torus()
    }

    fn word(s: &str) -> CurveWord {
        s.parse().unwrap()
    }

    #[test]
    fn torus_combinatorics() {
        let t = torus();
        assert_eq!(t.euler_characteristic(), -1);
        assert_eq!(t.puncture_cycles().len(), 1);
        let mut cyc = t.puncture_cycles()[0].clone();
        cyc.sort_unstable();
        assert_eq!(cyc, vec![0, 0, 1, 1, 2, 2]);
        assert_eq!(t.partner((0, 0)), (1, 1));
    }

    #[test]
    fn generator_trace_by_hand() {
        // X(a)·R·X(b)·L = [[e^{(a+b)/2} + e^{(a−b)/2}, e^{(a−b)/2}],
        //                  [e^{−(a+b)/2},              e^{−(a+b)/2}]]
        let (a, b) = (0.7f64, -0.2f64);
        let m = path_holonomy(&[a, b, -(a + b)], word("0 R 1 L").steps());
        let expect = ((a + b) / 2.0).exp() + ((a - b) / 2.0).exp() + (-(a + b) / 2.0).exp();
        assert!((m.trace() - expect).abs() < 1e-14);
        assert!((m.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn words_resolve_or_fail() {
        let t = torus();
        for w in ["0 R 1 L", "1 R 2 L", "2 R 0 L"] {
            assert!(t.resolve(&word(w)).is_ok(), "{w}");
        }
        assert!(t.resolve(&word("0 L 1 R")).is_err());
        assert!(t.resolve(&word("0 R 7 L")).is_err());
        assert!("0 R 1".parse::<CurveWord>().is_err());
        assert!("0 X".parse::<CurveWord>().is_err());
        assert!("".parse::<CurveWord>().is_err());
        assert_eq!(word("0 R 1 L").to_string(), "0 R 1 L");
    }

    #[test]
    fn peripheral_is_parabolic() {
        let t = torus();
        let x = t.shear_point(&[0.4, -1.1, 0.7]).unwrap();
        let p = t.peripheral_word(0);
        assert!(t.resolve(&p).is_ok());
        let tr = holonomy(&t, &x, &p).unwrap().trace();
        assert!((tr - 2.0).abs() < 1e-12);
        assert!(matches!(
            curve_length(&t, &x, &p),
            Err(SurfaceError::NotHyperbolic { .. })
        ));
    }

    #[test]
    fn empty_path_is_identity() {
        assert_eq!(path_holonomy(&[1.0, 2.0, -3.0], &[]), MobiusMap::IDENTITY);
    }

    #[test]
    fn relations_enforced() {
        let t = torus();
        assert!(matches!(
            t.shear_point(&[0.5, 0.5, 0.5]),
            Err(SurfaceError::RelationViolation(_))
        ));
        let p = t.shear_point(&[0.5, 0.5, -1.0 + 1e-12]).unwrap();
        assert!(t.relation_residual(&p.x) < 1e-15);
        assert!(t.shear_point(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn polynomial_matches_matrix_trace() {
        let t = torus();
        let x = [0.3, -1.2, 0.9];
        for w in t.closed_words(6) {
            let p = TracePolynomial::of_word(3, w.steps());
            let m = path_holonomy(&x, w.steps());
            assert!((p.eval(&x) - m.trace()).abs() < 1e-12 * m.trace().abs().max(1.0));
            assert!(p.terms.iter().all(|(_, c)| *c > 0.0));
        }
    }

    #[test]
    fn excess_is_exact_near_two() {
        // trace 2 + e^{−s}: the excess survives far below rounding of 2
        let p = TracePolynomial::of_word(3, word("0 R 1 L").steps());
        let s = 200.0;
        let l = p.log_trace_minus_two(&[-s, s, 0.0]).unwrap();
        assert!((l - (-s)).abs() < 1e-12);
        // ℓ ≈ 2√(2ε) with ε = e^{−s}/2
        let ll = log_length_from_log_excess(l - std::f64::consts::LN_2);
        assert!((ll - (std::f64::consts::LN_2 + 0.5 * l)).abs() < 1e-9);
    }

    #[test]
    fn log_length_regimes_agree() {
        for le in [-699.0, -650.0, -30.0, -1.0, 0.0, 3.0, 30.0, 650.0, 699.0] {
            let direct = {
                let e: f64 = f64::exp(le);
                (2.0 * (e + e.sqrt() * (e + 2.0).sqrt()).ln_1p()).ln()
            };
            assert!((log_length_from_log_excess(le) - direct).abs() < 1e-9, "{le}");
        }
        // continuity across the switch-over points
        for edge in [700.0, -700.0] {
            let a = log_length_from_log_excess(edge - 1e-9);
            let b = log_length_from_log_excess(edge + 1e-9);
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn table_lookup() {
        let c = |ms, is, mh, ih| Classification {
            meets_stump: ms,
            inside_stump: is,
            meets_horocyclic: mh,
            inside_horocyclic: ih,
        };
        use End::*;
        use Limit::*;
        assert_eq!(predicted_limit(PlusInfinity, c(false, false, false, false)), Bounded);
        assert_eq!(predicted_limit(PlusInfinity, c(false, false, true, true)), Zero);
        assert_eq!(predicted_limit(PlusInfinity, c(false, false, true, false)), Infinity);
        assert_eq!(predicted_limit(PlusInfinity, c(true, false, false, false)), Bounded);
        assert_eq!(predicted_limit(PlusInfinity, c(true, false, true, false)), Infinity);
        assert_eq!(predicted_limit(MinusInfinity, c(false, false, true, false)), Bounded);
        assert_eq!(predicted_limit(MinusInfinity, c(true, true, false, false)), Zero);
        assert_eq!(predicted_limit(MinusInfinity, c(true, false, true, true)), Infinity);
    }

    #[test]
    fn trend_classes() {
        let ts = crate::harness::linspace(5.0, 10.0, 6);
        assert_eq!(classify_trend(&ts, &[5.0, 6.0, 7.0, 8.0, 9.0, 10.0]), Trend::Growth);
        assert_eq!(classify_trend(&ts, &[-1.0, -5.0, -9.0, -20.0, -40.0, -80.0]), Trend::Decay);
        assert_eq!(classify_trend(&ts, &[1.0, 1.001, 1.0005, 1.0, 1.0, 1.0]), Trend::Bounded);
        assert_eq!(classify_trend(&ts, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]), Trend::Mixed);
    }

    #[test]
    fn surface_json() {
        let t = torus();
        let text = serde_json::to_string(&t).unwrap();
        let back: TriangulatedSurface = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"triangles":2,"edge_gluings":[[[0,0],[1,1]],[[0,1],[1,2]],[[0,2],[1,0]]],"puncture_cycles":[[0,1]]}"#;
        assert!(serde_json::from_str::<TriangulatedSurface>(bad).is_err());
        let doubled = r#"{"triangles":2,"edge_gluings":[[[0,0],[0,0]],[[0,1],[1,2]],[[0,2],[1,0]]]}"#;
        assert!(serde_json::from_str::<TriangulatedSurface>(doubled).is_err());
        let w: CurveWord = serde_json::from_str(r#""0 R 1 L""#).unwrap();
        assert_eq!(w, word("0 R 1 L"));
    }
}
