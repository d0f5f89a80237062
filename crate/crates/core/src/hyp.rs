//! Upper half-plane primitives: points, ideal points, geodesics, PSL(2,R)
//! isometries, cross-ratios, ideal triangles and the wedge distance function.

use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypError {
    #[error("point ({x}, {y}) is not in the upper half-plane")]
    NotInUhp { x: f64, y: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("ideal points coincide")]
    Coincident,
    #[error("determinant {0} is not positive")]
    BadDeterminant(f64),
    #[error("geodesics cross")]
    Crossing,
    #[error("geodesics are asymptotic")]
    Asymptotic,
}

/// A point of the upper half-plane, `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UhpPoint {
    pub x: f64,
    pub y: f64,
}

impl UhpPoint {
    pub fn new(x: f64, y: f64) -> Result<Self, HypError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(HypError::NonFinite);
        }
        if y <= 0.0 {
            return Err(HypError::NotInUhp { x, y });
        }
        Ok(Self { x, y })
    }

    /// Point on the imaginary axis at signed arclength `s` from `i`.
    pub fn on_imaginary_axis(s: f64) -> Self {
        Self { x: 0.0, y: s.exp() }
    }
}

impl fmt::Display for UhpPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A point of the boundary at infinity `R ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IdealPoint {
    Finite(f64),
    Infinity,
}

impl IdealPoint {
    pub fn finite(self) -> Option<f64> {
        match self {
            IdealPoint::Finite(v) => Some(v),
            IdealPoint::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, IdealPoint::Infinity)
    }
}

impl From<f64> for IdealPoint {
    fn from(v: f64) -> Self {
        IdealPoint::Finite(v)
    }
}

/// A complete geodesic, stored with an orientation from `tail` to `head`.
///
/// Equality ignores the orientation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Geodesic {
    tail: IdealPoint,
    head: IdealPoint,
}

impl Geodesic {
    pub fn new(tail: impl Into<IdealPoint>, head: impl Into<IdealPoint>) -> Result<Self, HypError> {
        let (tail, head) = (tail.into(), head.into());
        if tail == head {
            return Err(HypError::Coincident);
        }
        if let (IdealPoint::Finite(a), IdealPoint::Finite(b)) = (tail, head) {
            if !a.is_finite() || !b.is_finite() {
                return Err(HypError::NonFinite);
            }
        }
        Ok(Self { tail, head })
    }

    /// The imaginary axis oriented upward.
    pub fn imaginary_axis() -> Self {
        Self {
            tail: IdealPoint::Finite(0.0),
            head: IdealPoint::Infinity,
        }
    }

    pub fn tail(&self) -> IdealPoint {
        self.tail
    }

    pub fn head(&self) -> IdealPoint {
        self.head
    }

    pub fn reversed(&self) -> Self {
        Self {
            tail: self.head,
            head: self.tail,
        }
    }

    /// Signed distance from `p` to `q`, both assumed on this geodesic,
    /// positive in the tail-to-head direction.
    pub fn signed_offset(&self, p: &UhpPoint, q: &UhpPoint) -> f64 {
        let n = MobiusMap::normalizing(self);
        let (p, q) = (n.apply_point(p), n.apply_point(q));
        (q.y / p.y).ln()
    }

    /// Hyperbolic distance from `p` to this geodesic.
    pub fn distance_to(&self, p: &UhpPoint) -> f64 {
        let q = MobiusMap::normalizing(self).apply_point(p);
        // distance to the imaginary axis: sinh d = |x| / y
        (q.x.abs() / q.y).asinh()
    }
}

impl PartialEq for Geodesic {
    fn eq(&self, other: &Self) -> bool {
        (self.tail == other.tail && self.head == other.head)
            || (self.tail == other.head && self.head == other.tail)
    }
}

/// Orientation-preserving isometry `z ↦ (az + b)/(cz + d)` with `ad − bc = 1`.
///
/// Two maps are the same isometry when their matrices agree up to sign; use
/// [`MobiusMap::approx_eq`] rather than `==` for that comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MobiusMap {
    pub const IDENTITY: MobiusMap = MobiusMap {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// Builds the map from any matrix with positive determinant, rescaling
    /// it to determinant one.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, HypError> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(HypError::BadDeterminant(det));
        }
        let k = det.sqrt().recip();
        Ok(Self {
            a: a * k,
            b: b * k,
            c: c * k,
            d: d * k,
        })
    }

    fn from_unchecked(a: f64, b: f64, c: f64, d: f64) -> Self {
        let det = a * d - b * c;
        let k = det.sqrt().recip();
        Self {
            a: a * k,
            b: b * k,
            c: c * k,
            d: d * k,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// Dilation `z ↦ e^s z`: translation by `s` along the upward imaginary axis.
    pub fn dilation(s: f64) -> Self {
        let h = 0.5 * s;
        Self {
            a: h.exp(),
            b: 0.0,
            c: 0.0,
            d: (-h).exp(),
        }
    }

    /// Real translation `z ↦ z + t` (parabolic fixing ∞).
    pub fn shift(t: f64) -> Self {
        Self {
            a: 1.0,
            b: t,
            c: 0.0,
            d: 1.0,
        }
    }

    /// Half-turn about `i`: `z ↦ −1/z`.
    pub fn half_turn() -> Self {
        Self {
            a: 0.0,
            b: -1.0,
            c: 1.0,
            d: 0.0,
        }
    }

    /// The map sending the tail of `g` to 0 and its head to ∞.
    pub fn normalizing(g: &Geodesic) -> Self {
        match (g.tail, g.head) {
            (IdealPoint::Finite(a), IdealPoint::Finite(b)) => {
                if a > b {
                    Self::from_unchecked(1.0, -a, 1.0, -b)
                } else {
                    Self::from_unchecked(-1.0, a, 1.0, -b)
                }
            }
            (IdealPoint::Infinity, IdealPoint::Finite(b)) => Self {
                a: 0.0,
                b: -1.0,
                c: 1.0,
                d: -b,
            },
            (IdealPoint::Finite(a), IdealPoint::Infinity) => Self::shift(-a),
            (IdealPoint::Infinity, IdealPoint::Infinity) => unreachable!("degenerate geodesic"),
        }
    }

    /// The unique map sending `(0, 1, ∞)` to `(p, q, r)`, if that triple is
    /// positively (counter-clockwise) ordered on the circle at infinity.
    pub fn from_standard_triple(
        p: IdealPoint,
        q: IdealPoint,
        r: IdealPoint,
    ) -> Result<Option<Self>, HypError> {
        if p == q || q == r || p == r {
            return Err(HypError::Coincident);
        }
        // Inverse map sends p -> 0, q -> 1, r -> ∞.
        use IdealPoint::*;
        let (a, b, c, d) = match (p, q, r) {
            (Infinity, Finite(q), Finite(r)) => (0.0, -(q - r), -1.0, r),
            (Finite(p), Infinity, Finite(r)) => (1.0, -p, 1.0, -r),
            (Finite(p), Finite(q), Infinity) => (-1.0, p, 0.0, -(q - p)),
            (Finite(p), Finite(q), Finite(r)) => (q - r, -p * (q - r), q - p, -r * (q - p)),
            _ => unreachable!("distinct points checked above"),
        };
        let det = a * d - b * c;
        if det > 0.0 {
            Ok(Some(Self::from_unchecked(a, b, c, d).inverse()))
        } else {
            Ok(None)
        }
    }

    /// Hyperbolic translation along `g` by signed length `s`, positive in the
    /// tail-to-head direction of `g`.
    pub fn translate_along(g: &Geodesic, s: f64) -> Self {
        let n = Self::normalizing(g);
        n.inverse() * Self::dilation(s) * n
    }

    pub fn apply_point(&self, p: &UhpPoint) -> UhpPoint {
        // (a z + b)(c z̄ + d) / |c z + d|²
        let (x, y) = (p.x, p.y);
        let nr = self.a * x + self.b;
        let dr = self.c * x + self.d;
        let dc = self.c * y;
        let den = dr * dr + dc * dc;
        UhpPoint {
            x: (nr * dr + self.a * y * dc) / den,
            y: y * self.determinant() / den,
        }
    }

    pub fn apply_ideal(&self, p: IdealPoint) -> IdealPoint {
        match p {
            IdealPoint::Finite(x) => {
                let den = self.c * x + self.d;
                if den == 0.0 {
                    IdealPoint::Infinity
                } else {
                    IdealPoint::Finite((self.a * x + self.b) / den)
                }
            }
            IdealPoint::Infinity => {
                if self.c == 0.0 {
                    IdealPoint::Infinity
                } else {
                    IdealPoint::Finite(self.a / self.c)
                }
            }
        }
    }

    pub fn apply_geodesic(&self, g: &Geodesic) -> Geodesic {
        Geodesic {
            tail: self.apply_ideal(g.tail),
            head: self.apply_ideal(g.head),
        }
    }

    /// Entrywise comparison up to the global sign of the matrix.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let close = |s: f64| {
            (self.a - s * other.a).abs() <= tol
                && (self.b - s * other.b).abs() <= tol
                && (self.c - s * other.c).abs() <= tol
                && (self.d - s * other.d).abs() <= tol
        };
        close(1.0) || close(-1.0)
    }
}

impl Mul for MobiusMap {
    type Output = MobiusMap;

    /// Composition: `(f * g)(z) = f(g(z))`.
    fn mul(self, o: MobiusMap) -> MobiusMap {
        MobiusMap {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }
}

/// Things a [`MobiusMap`] acts on.
pub trait Transform {
    fn transform(&self, m: &MobiusMap) -> Self;
}

impl Transform for UhpPoint {
    fn transform(&self, m: &MobiusMap) -> Self {
        m.apply_point(self)
    }
}

impl Transform for IdealPoint {
    fn transform(&self, m: &MobiusMap) -> Self {
        m.apply_ideal(*self)
    }
}

impl Transform for Geodesic {
    fn transform(&self, m: &MobiusMap) -> Self {
        m.apply_geodesic(self)
    }
}

pub fn apply<T: Transform>(m: &MobiusMap, x: &T) -> T {
    x.transform(m)
}

/// Hyperbolic distance.
pub fn dist(p: &UhpPoint, q: &UhpPoint) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    2.0 * ((dx * dx + dy * dy).sqrt() / (2.0 * (p.y * q.y).sqrt())).asinh()
}

/// `((p1−p3)(p2−p4)) / ((p1−p4)(p2−p3))`; factors containing ∞ cancel pairwise.
pub fn cross_ratio(
    p1: IdealPoint,
    p2: IdealPoint,
    p3: IdealPoint,
    p4: IdealPoint,
) -> Result<f64, HypError> {
    let pts = [p1, p2, p3, p4];
    for i in 0..4 {
        for j in (i + 1)..4 {
            if pts[i] == pts[j] {
                return Err(HypError::Coincident);
            }
        }
    }
    // Each point appears once upstairs and once downstairs, so a factor
    // involving ∞ is replaced by 1 on both sides.
    let diff = |u: IdealPoint, v: IdealPoint| match (u, v) {
        (IdealPoint::Finite(u), IdealPoint::Finite(v)) => u - v,
        _ => 1.0,
    };
    let num = diff(p1, p3) * diff(p2, p4);
    let den = diff(p1, p4) * diff(p2, p3);
    Ok(num / den)
}

/// Ideal triangle with vertices in either cyclic order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealTriangle {
    pub vertices: [IdealPoint; 3],
}

impl IdealTriangle {
    pub fn new(v0: impl Into<IdealPoint>, v1: impl Into<IdealPoint>, v2: impl Into<IdealPoint>) -> Result<Self, HypError> {
        let vertices = [v0.into(), v1.into(), v2.into()];
        if vertices[0] == vertices[1] || vertices[1] == vertices[2] || vertices[0] == vertices[2] {
            return Err(HypError::Coincident);
        }
        Ok(Self { vertices })
    }

    /// Side `k` joins vertex `k` to vertex `k + 1`.
    pub fn side(&self, k: usize) -> Geodesic {
        Geodesic {
            tail: self.vertices[k % 3],
            head: self.vertices[(k + 1) % 3],
        }
    }

    pub fn is_positively_oriented(&self) -> bool {
        let [p, q, r] = self.vertices;
        matches!(MobiusMap::from_standard_triple(p, q, r), Ok(Some(_)))
    }

    /// Tangency points of the inscribed circle; entry `k` lies on side `k`.
    pub fn distinguished_points(&self) -> [UhpPoint; 3] {
        let [p, q, r] = self.vertices;
        let half = UhpPoint { x: 0.5, y: 0.5 };
        let one = UhpPoint { x: 1.0, y: 1.0 };
        let axis = UhpPoint { x: 0.0, y: 1.0 };
        match MobiusMap::from_standard_triple(p, q, r).expect("distinct vertices") {
            // sides (0,1), (1,∞), (∞,0) of the standard triangle
            Some(m) => [m.apply_point(&half), m.apply_point(&one), m.apply_point(&axis)],
            None => {
                let m = MobiusMap::from_standard_triple(p, r, q)
                    .expect("distinct vertices")
                    .expect("reversed triple is positive");
                [m.apply_point(&axis), m.apply_point(&one), m.apply_point(&half)]
            }
        }
    }
}

pub fn distinguished_points(t: &IdealTriangle) -> [UhpPoint; 3] {
    t.distinguished_points()
}

pub fn translate_along(g: &Geodesic, s: f64) -> MobiusMap {
    MobiusMap::translate_along(g, s)
}

/// Length of the common perpendicular of two disjoint, non-asymptotic geodesics.
pub fn geodesic_gap(g1: &Geodesic, g2: &Geodesic) -> Result<f64, HypError> {
    let n = MobiusMap::normalizing(g1);
    let h = n.apply_geodesic(g2);
    let (p, q) = match (h.tail, h.head) {
        (IdealPoint::Finite(p), IdealPoint::Finite(q)) => (p, q),
        _ => return Err(HypError::Asymptotic),
    };
    if p == 0.0 || q == 0.0 || g1 == g2 {
        return Err(HypError::Asymptotic);
    }
    if (p < 0.0) != (q < 0.0) {
        return Err(HypError::Crossing);
    }
    let (lo, hi) = if p.abs() < q.abs() {
        (p.abs(), q.abs())
    } else {
        (q.abs(), p.abs())
    };
    if lo == hi {
        return Err(HypError::Coincident);
    }
    // cosh d = (hi + lo)/(hi − lo)  <=>  d = 2 artanh(sqrt(lo/hi))
    Ok(2.0 * (lo / hi).sqrt().atanh())
}

/// `cosh d − 1` for the standard wedge, written to avoid cancellation.
fn wedge_cosh_excess(a: f64, b: f64) -> f64 {
    let s = a + b;
    let t = 0.5 * (a - b);
    0.5 * (-s).exp() + 2.0 * t.sinh().powi(2)
}

/// Distance between the point at signed arclength `a` above `(0, 1)` on the
/// side `x = 0` and the point at signed arclength `b` above `(1, 1)` on the
/// side `x = 1` of the wedge with apex at ∞.
pub fn wedge_distance(a: f64, b: f64) -> f64 {
    let e = wedge_cosh_excess(a, b);
    (e + (e * (e + 2.0)).sqrt()).ln_1p()
}

/// Value, gradient and Hessian of [`wedge_distance`].
pub fn wedge_distance_derivatives(a: f64, b: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let e = wedge_cosh_excess(a, b);
    let c = 1.0 + e;
    let root = (e * (e + 2.0)).sqrt(); // sqrt(C² − 1)
    let d = (e + root).ln_1p();
    let half_es = 0.5 * (-(a + b)).exp();
    let (sh, ch) = ((a - b).sinh(), (a - b).cosh());
    let ca = -half_es + sh;
    let cb = -half_es - sh;
    let caa = half_es + ch;
    let cab = half_es - ch;
    let grad = [ca / root, cb / root];
    let k = c / (root * root * root);
    let hess = [
        [caa / root - k * ca * ca, cab / root - k * ca * cb],
        [cab / root - k * ca * cb, caa / root - k * cb * cb],
    ];
    (d, grad, hess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64) -> UhpPoint {
        UhpPoint::new(x, y).unwrap()
    }

    fn random_map(rng: &mut ChaCha8Rng) -> MobiusMap {
        loop {
            let (a, b, c, d) = (
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            if let Ok(m) = MobiusMap::new(a, b, c, d) {
                if (a * d - b * c) > 0.1 {
                    return m;
                }
            }
        }
    }

    fn random_point(rng: &mut ChaCha8Rng) -> UhpPoint {
        pt(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0))
    }

    #[test]
    fn dist_examples() {
        let p = pt(0.3, 0.7);
        assert_eq!(dist(&p, &p), 0.0);
        assert!((dist(&pt(0.0, 1.0), &pt(0.0, std::f64::consts::E)) - 1.0).abs() < 1e-15);
        assert!((dist(&pt(0.0, 1.0), &pt(1.0, 1.0)) - 1.5f64.acosh()).abs() < 1e-15);
        assert!((1.5f64.acosh() - 0.9624237).abs() < 1e-7);
    }

    #[test]
    fn dist_is_a_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let (p, q, r) = (random_point(&mut rng), random_point(&mut rng), random_point(&mut rng));
            assert_eq!(dist(&p, &q), dist(&q, &p));
            assert!(dist(&p, &r) <= dist(&p, &q) + dist(&q, &r) + 1e-12);
        }
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(matches!(UhpPoint::new(0.0, -1.0), Err(HypError::NotInUhp { .. })));
        assert!(MobiusMap::new(0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn apply_examples_and_isometry() {
        let p = pt(0.4, 1.3);
        assert_eq!(apply(&MobiusMap::IDENTITY, &p), p);
        let m = MobiusMap::translate_along(&Geodesic::imaginary_axis(), 1.0);
        let q = apply(&m, &pt(0.0, 1.0));
        assert!(q.x.abs() < 1e-15 && (q.y - std::f64::consts::E).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = random_map(&mut rng);
            let (p, q) = (random_point(&mut rng), random_point(&mut rng));
            let d0 = dist(&p, &q);
            let d1 = dist(&m.apply_point(&p), &m.apply_point(&q));
            assert!((d0 - d1).abs() < 1e-10, "{d0} vs {d1}");
        }
    }

    #[test]
    fn composition_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let (f, g) = (random_map(&mut rng), random_map(&mut rng));
            let p = random_point(&mut rng);
            let a = (f * g).apply_point(&p);
            let b = f.apply_point(&g.apply_point(&p));
            assert!(dist(&a, &b) < 1e-9);
            assert!((f * f.inverse()).approx_eq(&MobiusMap::IDENTITY, 1e-12));
        }
    }

    #[test]
    fn cross_ratio_examples() {
        use IdealPoint::*;
        // (0, 1, ∞, x) -> (x − 1)/x
        let x = 2.5;
        let v = cross_ratio(Finite(0.0), Finite(1.0), Infinity, Finite(x)).unwrap();
        assert!((v - (x - 1.0) / x).abs() < 1e-15);
        // (0, ∞, −1, 1): (0+1)/(0−1) = −1
        let v = cross_ratio(Finite(0.0), Infinity, Finite(-1.0), Finite(1.0)).unwrap();
        assert_eq!(v, -1.0);
        assert_eq!(
            cross_ratio(Finite(0.0), Finite(0.0), Finite(1.0), Infinity),
            Err(HypError::Coincident)
        );
    }

    #[test]
    fn cross_ratio_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let m = random_map(&mut rng);
            let pts: Vec<IdealPoint> = (0..4)
                .map(|k| IdealPoint::Finite(k as f64 - 1.5 + rng.gen_range(-0.4..0.4)))
                .collect();
            let before = cross_ratio(pts[0], pts[1], pts[2], pts[3]).unwrap();
            let img: Vec<IdealPoint> = pts.iter().map(|p| m.apply_ideal(*p)).collect();
            let after = cross_ratio(img[0], img[1], img[2], img[3]).unwrap();
            assert!((before - after).abs() < 1e-10 * (1.0 + before.abs()));
        }
    }

    /// Orthogonal projection of `p` onto `g`, computed by moving `g` to the
    /// imaginary axis where the foot of the perpendicular is `(0, |z|)`.
    fn project(g: &Geodesic, p: &UhpPoint) -> UhpPoint {
        let n = MobiusMap::normalizing(g);
        let q = n.apply_point(p);
        n.inverse().apply_point(&pt(0.0, (q.x * q.x + q.y * q.y).sqrt()))
    }

    #[test]
    fn distinguished_points_standard_triangle() {
        let t = IdealTriangle::new(0.0, 1.0, IdealPoint::Infinity).unwrap();
        let d = t.distinguished_points();
        let want = [pt(0.5, 0.5), pt(1.0, 1.0), pt(0.0, 1.0)];
        for (a, b) in d.iter().zip(want.iter()) {
            assert!(dist(a, b) < 1e-14, "{a} vs {b}");
        }
        // projection oracle from the centre (1/2, √3/2)
        let centre = pt(0.5, 3f64.sqrt() / 2.0);
        for k in 0..3 {
            assert!(dist(&project(&t.side(k), &centre), &d[k]) < 1e-12);
        }
        let sym = IdealTriangle::new(-1.0, 1.0, IdealPoint::Infinity).unwrap();
        assert!(dist(&sym.distinguished_points()[0], &pt(0.0, 1.0)) < 1e-14);
    }

    #[test]
    fn distinguished_points_lie_on_sides_in_either_orientation() {
        let t = IdealTriangle::new(1.0, 0.0, IdealPoint::Infinity).unwrap();
        assert!(!t.is_positively_oriented());
        let d = t.distinguished_points();
        for k in 0..3 {
            assert!(t.side(k).distance_to(&d[k]) < 1e-14);
        }
        assert!(dist(&d[0], &pt(0.5, 0.5)) < 1e-14);
    }

    #[test]
    fn distinguished_points_are_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = IdealTriangle::new(0.0, 1.0, IdealPoint::Infinity).unwrap();
        for _ in 0..100 {
            let m = random_map(&mut rng);
            let img = IdealTriangle {
                vertices: t.vertices.map(|v| m.apply_ideal(v)),
            };
            let a = img.distinguished_points();
            let b = t.distinguished_points().map(|p| m.apply_point(&p));
            for k in 0..3 {
                assert!(dist(&a[k], &b[k]) < 1e-10);
            }
        }
    }

    #[test]
    fn translate_along_examples() {
        let g = Geodesic::new(-0.3, 2.0).unwrap();
        assert!(translate_along(&g, 0.0).approx_eq(&MobiusMap::IDENTITY, 1e-15));
        let m = translate_along(&Geodesic::imaginary_axis(), 1.0);
        assert!(m.approx_eq(&MobiusMap::new(std::f64::consts::E, 0.0, 0.0, 1.0).unwrap(), 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = rng.gen_range(-3.0..3.0);
            let b = a + rng.gen_range(0.1..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let g = Geodesic::new(a, b).unwrap();
            let s = rng.gen_range(-3.0..3.0);
            let m = translate_along(&g, s);
            let h = m.apply_geodesic(&g);
            for (e, f) in [(h.tail(), g.tail()), (h.head(), g.head())] {
                match (e, f) {
                    (IdealPoint::Finite(e), IdealPoint::Finite(f)) => assert!((e - f).abs() < 1e-12),
                    _ => panic!("endpoint moved to infinity"),
                }
            }
            // a point on g
            let n = MobiusMap::normalizing(&g);
            let p = n.inverse().apply_point(&pt(0.0, rng.gen_range(0.3..3.0)));
            let q = m.apply_point(&p);
            assert!((dist(&p, &q) - s.abs()).abs() < 1e-10);
            assert!((g.signed_offset(&p, &q) - s).abs() < 1e-9);
        }
    }

    #[test]
    fn geodesic_gap_examples() {
        let g1 = Geodesic::new(0.0, IdealPoint::Infinity).unwrap();
        let g2 = Geodesic::new(1.0, 3.0).unwrap();
        let gap = geodesic_gap(&g1, &g2).unwrap();
        assert!((gap - 2f64.acosh()).abs() < 1e-14);
        assert!((gap - 1.3169579).abs() < 1e-7);

        // brute-force oracle: minimise dist over both geodesics
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            let p = pt(0.0, 0.5 + 3.0 * i as f64 / 400.0);
            for j in 0..=400 {
                let th = std::f64::consts::PI * j as f64 / 400.0;
                let q = UhpPoint { x: 2.0 + th.cos(), y: th.sin().max(1e-9) };
                best = best.min(dist(&p, &q));
            }
        }
        assert!((best - gap).abs() < 1e-3);

        let perp = Geodesic::new(-1.0, 1.0).unwrap();
        let moved = translate_along(&perp, 0.8).apply_geodesic(&g1);
        assert!((geodesic_gap(&g1, &moved).unwrap() - 0.8).abs() < 1e-12);

        let asym = Geodesic::new(0.0, 5.0).unwrap();
        assert_eq!(geodesic_gap(&g1, &asym), Err(HypError::Asymptotic));
        let cross = Geodesic::new(-1.0, 1.0).unwrap();
        assert_eq!(geodesic_gap(&g1, &cross), Err(HypError::Crossing));
    }

    #[test]
    fn wedge_distance_examples() {
        assert!((wedge_distance(0.0, 0.0) - 1.5f64.acosh()).abs() < 1e-15);
        assert_eq!(wedge_distance(1.0, -1.0), wedge_distance(-1.0, 1.0));
    }

    #[test]
    fn wedge_distance_matches_plane_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let (a, b) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let d = dist(&pt(0.0, f64::exp(a)), &pt(1.0, f64::exp(b)));
            assert!((wedge_distance(a, b) - d).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn wedge_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for _ in 0..200 {
            let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let (_, g, hs) = wedge_distance_derivatives(a, b);
            let ga = (wedge_distance(a + h, b) - wedge_distance(a - h, b)) / (2.0 * h);
            let gb = (wedge_distance(a, b + h) - wedge_distance(a, b - h)) / (2.0 * h);
            assert!((g[0] - ga).abs() < 1e-8 && (g[1] - gb).abs() < 1e-8);
            let ga2 = wedge_distance_derivatives(a + h, b).1;
            let ga1 = wedge_distance_derivatives(a - h, b).1;
            let gb2 = wedge_distance_derivatives(a, b + h).1;
            let gb1 = wedge_distance_derivatives(a, b - h).1;
            assert!((hs[0][0] - (ga2[0] - ga1[0]) / (2.0 * h)).abs() < 1e-6);
            assert!((hs[0][1] - (gb2[0] - gb1[0]) / (2.0 * h)).abs() < 1e-6);
            assert!((hs[1][1] - (gb2[1] - gb1[1]) / (2.0 * h)).abs() < 1e-6);
        }
    }
}
