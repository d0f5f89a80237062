use proptest::prelude::*;
use shear_core::hyp::{self, UhpPoint};
use shear_core::strip::{
    core_length, core_minimum, develop, geodesic_length, geodesic_length_from, pw_length,
    shifted_endpoints, LeafFrame, PwCurveCoords, Side, StripShape,
};

fn side_strategy(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Side>> {
    prop::collection::vec(prop::bool::ANY, n)
        .prop_map(|b| {
            b.into_iter()
                .map(|l| if l { Side::Left } else { Side::Right })
                .collect::<Vec<_>>()
        })
        .prop_filter("fans have no core", |s: &Vec<Side>| {
            s.windows(2).any(|w| w[0] != w[1])
        })
}

fn strip_case() -> impl Strategy<Value = (StripShape, Vec<f64>)> {
    side_strategy(2..=7).prop_flat_map(|sides| {
        let k = sides.len() - 1;
        (
            Just(sides),
            prop::collection::vec(-2.0f64..2.0, k),
            prop::collection::vec(-2.0f64..2.0, k),
        )
            .prop_map(|(s, base, x)| (StripShape::from_sides(&s, &base).unwrap(), x))
    })
}

/// Length of the broken geodesic through the points that the coordinates
/// name in the sheared strip, measured directly in the half-plane.
fn broken_length(base: &StripShape, x: &[f64], y: &PwCurveCoords) -> f64 {
    let d = develop(&base.with_shears(x).unwrap()).unwrap();
    let ends = shifted_endpoints(base, x, y).unwrap();
    let n = base.n();
    let mut pts: Vec<(UhpPoint, UhpPoint)> = Vec::new();
    for (i, e) in ends.iter().enumerate() {
        let a = d.point_on_leaf(i, LeafFrame::After, e[0]).unwrap();
        let b = d.point_on_leaf(i + 1, LeafFrame::Before, e[1]).unwrap();
        pts.push((a, b));
    }
    let mut total = 0.0;
    for i in 0..n {
        total += hyp::dist(&pts[i].0, &pts[i].1);
        if i + 1 < n {
            total += hyp::dist(&pts[i].1, &pts[i + 1].0);
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn pw_length_is_broken_geodesic_length(
        (base, x) in strip_case(),
        ys in prop::collection::vec(-2.0f64..2.0, 14),
    ) {
        let y = PwCurveCoords::from_flat(&ys[..2 * base.n()]);
        let v = pw_length(&base, &x, &y).unwrap();
        let w = broken_length(&base, &x, &y);
        prop_assert!((v - w).abs() <= 1e-9 * (1.0 + w), "{v} vs {w}");
    }

    #[test]
    fn measured_shears_reproduce_input((base, x) in strip_case()) {
        let d = develop(&base.with_shears(&x).unwrap()).unwrap();
        for j in 1..base.n() {
            prop_assert!((d.measure_shear(j).unwrap() - x[j - 1]).abs() < 1e-8);
            prop_assert!((d.cross_ratio_shear(j).unwrap() - x[j - 1]).abs() < 1e-8);
        }
    }

    #[test]
    fn horocyclic_projection_accumulates_shear((base, x) in strip_case(), a in -1.5f64..1.5) {
        let d = develop(&base.with_shears(&x).unwrap()).unwrap();
        let n = base.n();
        for i1 in 0..n {
            for i2 in (i1 + 1)..n {
                let sum: f64 = x[i1..i2].iter().sum();
                prop_assert!((d.shear_between(i1, i2).unwrap() - sum).abs() < 1e-8);
                // from wedge i1's entry side to wedge i2's entry leaf
                let p = d.horocyclic_project(i1 + 1, a, i2 + 1).unwrap();
                let q = d.horocyclic_project(i1 + 1, 0.0, i2 + 1).unwrap();
                prop_assert!((p - q - a).abs() < 1e-7);
            }
            let p = d.horocyclic_project(i1, a, n).unwrap();
            prop_assert!(p.is_finite());
        }
    }

    #[test]
    fn geodesic_length_is_distance((base, x) in strip_case(), ym in -1.5f64..1.5, yp in -1.5f64..1.5) {
        let m = geodesic_length(&base, &x, ym, yp).unwrap();
        let d = develop(&base.with_shears(&x).unwrap()).unwrap();
        let n = base.n();
        let a = d.point_on_leaf(0, LeafFrame::After, ym).unwrap();
        let b = d.point_on_leaf(n, LeafFrame::Before, yp).unwrap();
        let exact = hyp::dist(&a, &b);
        prop_assert!((m.length - exact).abs() <= 1e-8 * (1.0 + exact), "{} vs {exact}", m.length);
        prop_assert!(m.max_kink_multiplier < 1.0);
        prop_assert!((pw_length(&base, &x, &m.coords).unwrap() - m.length).abs() < 1e-9);
    }

    #[test]
    fn core_length_is_gap((base, x) in strip_case()) {
        let d = develop(&base.with_shears(&x).unwrap()).unwrap();
        let gap = hyp::geodesic_gap(d.lower_boundary(), d.upper_boundary()).unwrap();
        let c = core_length(&base, &x).unwrap();
        prop_assert!((c - gap).abs() <= 1e-8 * (1.0 + gap), "{c} vs {gap}");
    }

    #[test]
    fn minimiser_is_independent_of_start(
        (base, x) in strip_case(),
        starts in prop::collection::vec(-3.0f64..3.0, 14),
    ) {
        let n = base.n();
        let init = PwCurveCoords::from_flat(&starts[..2 * n]);
        let a = core_minimum(&base, &x, None).unwrap();
        let b = core_minimum(&base, &x, Some(&init)).unwrap();
        prop_assert!((a.length - b.length).abs() < 1e-9);
        let g1 = geodesic_length(&base, &x, 0.3, -0.2).unwrap();
        let g2 = geodesic_length_from(&base, &x, 0.3, -0.2, Some(&init)).unwrap();
        prop_assert!((g1.length - g2.length).abs() < 1e-9);
        for (p, q) in g1.coords.y.iter().zip(&g2.coords.y) {
            prop_assert!((p[0] - q[0]).abs() < 1e-6 && (p[1] - q[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn pw_length_is_convex_in_shears(
        (base, x) in strip_case(),
        x2 in prop::collection::vec(-2.0f64..2.0, 6),
        ys in prop::collection::vec(-2.0f64..2.0, 14),
        t in 0.05f64..0.95,
    ) {
        let n = base.n();
        let y = PwCurveCoords::from_flat(&ys[..2 * n]);
        let x2 = &x2[..n - 1];
        let mid: Vec<f64> = x.iter().zip(x2).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let f = |v: &[f64]| pw_length(&base, v, &y).unwrap();
        prop_assert!(f(&mid) <= (1.0 - t) * f(&x) + t * f(x2) + 1e-10);
    }
}

#[test]
fn shear_sum_along_zigzag_matches_endpoint_shear() {
    // an alternating walk over wedge indices telescopes
    let sides = [Side::Left, Side::Right, Side::Right, Side::Left, Side::Right];
    let base = StripShape::from_sides(&sides, &[0.3, -0.8, 1.1, 0.4]).unwrap();
    let d = develop(&base).unwrap();
    let walk = [0usize, 3, 1, 4];
    let mut total = 0.0;
    for (k, w) in walk.windows(2).enumerate() {
        let (lo, hi) = (w[0].min(w[1]), w[0].max(w[1]));
        let s = d.shear_between(lo, hi).unwrap();
        total += if k % 2 == 0 { s } else { -s };
    }
    assert!((total - d.shear_between(0, 4).unwrap()).abs() < 1e-12);
}

#[test]
fn core_from_a_flat_start() {
    // the start lies far out on nearly affine wedges, where plain Newton
    // steps overshoot
    use Side::{Left as L, Right as R};
    let base = StripShape::from_sides(
        &[L, L, R, R, R, R, L],
        &[-1.406021792109481, -1.649497218053721, 1.4161450159387208, -0.4171298914612809, -0.34514343053588803, 1.2520750036615365],
    )
    .unwrap();
    let x = [1.079969875567265, -1.1609401694623669, -0.8765582886580399, 0.42010319587619893, 0.6669191109473349, -0.38037099964588794];
    let init = PwCurveCoords::from_flat(&[
        1.3144163336832104, -2.512402379664971, -0.9345438780523878, 2.8790307872589658,
        -0.24684905727750905, -1.5320082563495818, -2.4756478487286904, 1.1986836401463172,
        1.7424604712206735, 2.756668032859263, -1.9069341374401771, -2.304755002612001,
        -0.24078961970475543, -2.9119530347100393,
    ]);
    let a = core_minimum(&base, &x, None).unwrap();
    let b = core_minimum(&base, &x, Some(&init)).unwrap();
    assert!((a.length - b.length).abs() < 1e-12);
    assert!(b.iterations < 200);
}
