use super::*;
use crate::measure::ReferenceMeasure;
use crate::metric::{Ball, MetricKind};
use crate::rng::stream_rng;
use rand::Rng as _;

fn threshold() -> LabelFunction {
    let s = MetricSpace::interval(-1.0, 1.0).unwrap();
    LabelFunction::Threshold(Threshold::new(&s, 0.0).unwrap())
}

#[test]
fn threshold_labels_and_margins() {
    let t = threshold();
    assert_eq!(t.label(&[0.25]), 1);
    assert_eq!(t.label(&[0.0]), 1);
    assert_eq!(t.label(&[-1e-300]), 0);
    let m = t.margin(&[0.25]);
    assert_eq!(m.value, 0.25);
    let w = m.witness.unwrap();
    assert_eq!(t.label(&w), 0);
    assert_eq!(t.margin(&[0.0]).value, 0.0);
    assert!(t.is_boundary(&[0.0]));
}

#[test]
fn checkerboard_parity() {
    let s = MetricSpace::unit_cube(MetricKind::Sup, 2).unwrap();
    let c = LabelFunction::Checkerboard(Checkerboard::new(&s, 2).unwrap());
    assert_eq!(c.label(&[0.25, 0.75]), 1);
    assert_eq!(c.label(&[0.25, 0.25]), 0);
    assert_eq!(c.label(&[0.5, 0.25]), 1);
    let m = c.margin(&[0.3, 0.9]);
    assert!((m.value - 0.2).abs() < 1e-15);
    assert_ne!(c.label(&m.witness.unwrap()), c.label(&[0.3, 0.9]));
}

fn grid_margin(f: &LabelFunction, x: &[f64], n: usize) -> f64 {
    let s = f.space();
    let own = f.label(x);
    let d = &s.domain;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let y = [
                d.lo[0] + (d.hi[0] - d.lo[0]) * i as f64 / n as f64,
                d.lo[1] + (d.hi[1] - d.lo[1]) * j as f64 / n as f64,
            ];
            if f.label(&y) != own {
                best = best.min(s.dist(x, &y));
            }
        }
    }
    best
}

#[test]
fn halfspace_sup_margin_matches_dense_grid() {
    let s = MetricSpace::unit_cube(MetricKind::Sup, 2).unwrap();
    let h = LabelFunction::Halfspace(Halfspace::new(&s, vec![1.0, 2.0], 1.2).unwrap());
    let mut rng = stream_rng(5, 0);
    for _ in 0..20 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let m = h.margin(&x);
        let g = grid_margin(&h, &x, 2000);
        // The grid overestimates by at most one grid step.
        assert!(m.value <= g + 1e-12 && g - m.value <= 1.0 / 2000.0 + 1e-9, "{x:?}: {} vs {g}", m.value);
        if let Some(w) = &m.witness {
            assert_ne!(h.label(w), h.label(&x));
            assert!(s.dist(&x, w) <= m.value * (1.0 + 1e-9));
        }
    }
}

#[test]
fn halfspace_euclidean_margin_matches_dense_grid() {
    let s = MetricSpace::unit_cube(MetricKind::Euclidean, 2).unwrap();
    let h = LabelFunction::Halfspace(Halfspace::new(&s, vec![1.0, -0.5], 0.3).unwrap());
    let mut rng = stream_rng(6, 0);
    for _ in 0..20 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let m = h.margin(&x).value;
        let g = grid_margin(&h, &x, 2000);
        assert!(m <= g + 1e-12 && g - m <= 1.5 / 2000.0, "{x:?}: {m} vs {g}");
    }
}

#[test]
fn euclidean_halfspace_in_high_dimension_is_unsupported() {
    let s = MetricSpace::unit_cube(MetricKind::Euclidean, 3).unwrap();
    assert!(matches!(Halfspace::new(&s, vec![1.0, 0.0, 0.0], 0.5), Err(crate::Error::Unsupported(_))));
}

#[test]
fn empty_class_has_unbounded_margin() {
    let s = MetricSpace::unit_interval();
    let t = LabelFunction::Threshold(Threshold::new(&s, -1.0).unwrap());
    assert!(t.margin(&[0.5]).value.is_infinite());
    let c = LabelFunction::Checkerboard(Checkerboard::new(&s, 1).unwrap());
    assert!(c.margin(&[0.5]).value.is_infinite());
}

#[test]
fn ball_union_margins() {
    let s = MetricSpace::unit_cube(MetricKind::Euclidean, 2).unwrap();
    let b = LabelFunction::Balls(
        UnionOfBalls::new(&s, vec![Point(vec![0.3, 0.3]), Point(vec![0.7, 0.7])], vec![0.2, 0.1]).unwrap(),
    );
    assert_eq!(b.label(&[0.3, 0.35]), 1);
    assert!((b.margin(&[0.3, 0.35]).value - 0.15).abs() < 1e-12);
    assert!((b.margin(&[0.7, 0.9]).value - 0.1).abs() < 1e-12);
    let w = b.margin(&[0.7, 0.9]).witness.unwrap();
    assert_eq!(b.label(&w), 1);
    assert!(UnionOfBalls::new(&s, vec![Point(vec![0.3, 0.3]), Point(vec![0.4, 0.4])], vec![0.1, 0.1]).is_err());
}

fn koch() -> LabelFunction {
    let s = MetricSpace::unit_cube(MetricKind::Euclidean, 2).unwrap();
    LabelFunction::Koch(KochCurve::new(&s, 4, 0.3).unwrap())
}

#[test]
fn koch_margin_is_distance_to_polyline() {
    let k = koch();
    let LabelFunction::Koch(curve) = &k else { unreachable!() };
    assert_eq!(curve.vertices().len(), 4usize.pow(4) + 1);
    assert_eq!(k.label(&[0.5, 0.05]), 1);
    assert_eq!(k.label(&[0.5, 0.95]), 0);
    let mut rng = stream_rng(8, 0);
    for _ in 0..200 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let m = k.margin(&x);
        assert!(!m.exact && m.error_bound > 0.0);
        let brute = curve
            .vertices()
            .windows(2)
            .map(|w| planar::segment_distance(MetricKind::Euclidean, x, w[0], w[1]).0)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(m.value, brute);
    }
}

#[test]
fn ml_ball_examples() {
    let t = threshold();
    let b = mutually_labeling_ball(&t, &[0.5], DEFAULT_SAFETY).unwrap();
    assert!((b.radius - 0.99 * 0.5 / 3.0).abs() < 1e-15);
    assert!(mutually_labeling_ball(&t, &[0.0], DEFAULT_SAFETY).is_none());
    let ok = is_mutually_labeling_ball(&t, &Ball { center: 0.5.into(), radius: 0.1 }, DEFAULT_PROBES, 1);
    assert!(ok.mutually_labeling);
    let bad = is_mutually_labeling_ball(&t, &Ball { center: 0.05.into(), radius: 0.1 }, DEFAULT_PROBES, 1);
    assert!(!bad.mutually_labeling);
    assert_eq!(bad.witness.unwrap().0, vec![0.0]);
    assert!(is_mutually_labeling_set(&t, &[Point::scalar(0.7)]).unwrap().mutually_labeling);
}

#[test]
fn v_r_examples() {
    let t = threshold();
    assert!(v_r_membership(&t, &[0.25], 0.2));
    assert!(!v_r_membership(&t, &[0.25], 0.3));
    let m = ReferenceMeasure::lebesgue(t.space());
    let est = m.mass_of_indicator(|x| !v_r_membership(&t, x, 0.2), 100_000, 3);
    assert!((est.value - 0.2).abs() < 3.0 * est.stderr);
}

#[test]
fn ml_cover_of_threshold() {
    let t = threshold();
    let m = ReferenceMeasure::lebesgue(t.space());
    let c = ml_covering_number_estimate(&t, &m, 0.1, &MlCoverParams { seed: 4, ..Default::default() }).unwrap();
    assert!(c.complete);
    assert!(c.count() <= 40, "count {}", c.count());
    assert!(c.leftover.value < 1e-3, "{:?}", c.leftover);
    let total = c.covered.value + c.leftover.value + c.outside.value;
    assert!((total - 1.0).abs() < 1e-12);
    let big = ml_covering_number_estimate(&t, &m, 1.0, &MlCoverParams { seed: 4, ..Default::default() }).unwrap();
    assert!(big.count() <= 4);
}

#[test]
fn ml_cover_respects_budget() {
    let t = threshold();
    let m = ReferenceMeasure::lebesgue(t.space());
    let c =
        ml_covering_number_estimate(&t, &m, 0.01, &MlCoverParams { budget: 3, samples: 10_000, ..Default::default() })
            .unwrap();
    assert!(!c.complete);
    assert_eq!(c.count(), 3);
}

#[test]
fn margin_boundary_checks() {
    let t = threshold();
    let m = ReferenceMeasure::lebesgue(t.space());
    let r = margin_equals_boundary_distance_check(&t, &m, 1000, 10, 1).unwrap();
    assert_eq!(r.max_discrepancy, 0.0);
    let s = MetricSpace::unit_cube(MetricKind::Euclidean, 2).unwrap();
    let h = LabelFunction::Halfspace(Halfspace::new(&s, vec![1.0, 1.0], 1.0).unwrap());
    let r = margin_equals_boundary_distance_check(&h, &ReferenceMeasure::lebesgue(&s), 1000, 10_000, 2).unwrap();
    assert!(r.max_discrepancy < 1e-3, "{r:?}");
    let sup = MetricSpace::unit_cube(MetricKind::Sup, 2).unwrap();
    let hs = LabelFunction::Halfspace(Halfspace::new(&sup, vec![1.0, 1.0], 1.0).unwrap());
    assert!(matches!(
        margin_equals_boundary_distance_check(&hs, &ReferenceMeasure::lebesgue(&sup), 10, 10, 2),
        Err(crate::Error::Unsupported(_))
    ));
}

#[test]
fn cross_class_pairs() {
    let mut rng = stream_rng(2, 0);
    let s = MetricSpace::unit_cube(MetricKind::Euclidean, 2).unwrap();
    let fams = vec![
        threshold(),
        LabelFunction::Halfspace(Halfspace::new(&s, vec![1.0, 0.0], 0.5).unwrap()),
        LabelFunction::Balls(UnionOfBalls::new(&s, vec![Point(vec![0.5, 0.5])], vec![0.25]).unwrap()),
        LabelFunction::Checkerboard(Checkerboard::new(&s, 3).unwrap()),
    ];
    for f in &fams {
        let (a, b) = f.cross_class_pair(0.01, &mut rng).unwrap_or_else(|| panic!("{}", f.name()));
        assert_ne!(f.label(&a), f.label(&b));
        assert!(f.space().dist(&a, &b) < 0.01);
    }
    assert!(koch().cross_class_pair(0.01, &mut rng).is_none());
}
