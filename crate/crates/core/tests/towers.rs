use ordent::maps::Builtin;
use ordent::rokhlin::{
    build_base, build_q_partition, is_tower_base, verify_q_partition, visit_bound_check, CheckKind, Strategy,
    DEFAULT_Q_BUDGET,
};
use ordent::{InvariantMeasure, PiecewiseMonotoneMap};

#[test]
fn doubling_towers_full_pipeline() {
    let map = PiecewiseMonotoneMap::builtin(Builtin::Doubling).unwrap();
    let mu = InvariantMeasure::Lebesgue { lo: 0.0, hi: 1.0 };
    let eps = 0.25;
    for d in [2, 3, 4] {
        let tower = build_base(&map, &mu, d, eps, Strategy::ExactSearch, 1).unwrap();
        assert_eq!(tower.check, CheckKind::Exact);
        assert!(is_tower_base(&map, &tower.base, d));
        assert!(
            tower.base_measure >= (1.0 - eps) / d as f64,
            "d={d}: {}",
            tower.base_measure
        );

        let q = build_q_partition(&map, &mu, tower.base.cells(), d, eps, DEFAULT_Q_BUDGET).unwrap();
        let r = verify_q_partition(&map, &mu, &q);
        assert!(r.intervals && r.self_avoiding && r.entropy_finite, "d={d}: {r:?}");
        assert!(r.good_measure >= 0.75, "d={d}: {}", r.good_measure);
        assert!(r.floor_identity_gap < 1e-12 && r.floor_overlap == 0.0, "d={d}: {r:?}");

        let v = visit_bound_check(&map, &mu, &tower.base, d, 100, 10_000, 1);
        assert_eq!(v.violations, 0, "d={d}: {v:?}");
        assert!(v.max_visits <= v.bound);
    }
}

#[test]
fn first_return_base_is_statistically_checked() {
    let map = PiecewiseMonotoneMap::builtin(Builtin::Tent).unwrap();
    let mu = InvariantMeasure::Lebesgue { lo: 0.0, hi: 1.0 };
    let tower = build_base(&map, &mu, 3, 0.25, Strategy::FirstReturn, 5).unwrap();
    assert_eq!(tower.check, CheckKind::Statistical);
    assert!(tower.overlap_bound.is_some());
    let again = build_base(&map, &mu, 3, 0.25, Strategy::FirstReturn, 5).unwrap();
    assert_eq!(tower, again);
}
