use std::f64::consts::PI;

use proptest::prelude::*;
use wsl_core::cross_section::{modes, CrossSection, ModeBasis};
use wsl_core::riemann::{
    is_physical, metric_d, metric_d_truncated, point_at_distance, tau, BoundaryPoint, SheetPoint, Side, SurfacePoint,
};
use wsl_core::C64;

fn unit() -> ModeBasis {
    modes(&CrossSection::interval(0.0, PI).unwrap(), 12)
}

fn two_interval() -> ModeBasis {
    modes(&CrossSection::new(vec![(0.0, PI), (4.0, 5.5)]).unwrap(), 12)
}

fn surface_point() -> impl Strategy<Value = SurfacePoint> {
    let sheet = (-5.0f64..40.0, -6.0f64..6.0, prop::collection::btree_set(1usize..6, 0..3))
        .prop_map(|(re, im, flipped)| SurfacePoint::Sheet(SheetPoint { re, im, flipped }));
    let boundary = (0.0f64..40.0, any::<bool>())
        .prop_map(|(e, up)| SurfacePoint::Boundary(BoundaryPoint { energy: e, side: if up { Side::Plus } else { Side::Minus } }));
    prop_oneof![3 => sheet, 1 => boundary]
}

#[test]
fn metric_agrees_with_brute_force_enumeration() {
    let b = unit();
    let pts = [
        SurfacePoint::Boundary(BoundaryPoint::plus(4.0)),
        SurfacePoint::Boundary(BoundaryPoint::plus(4.2)),
        SheetPoint::physical(C64::new(10.0, 3.0)).into(),
        SheetPoint::with_flips(C64::new(12.0, -1.0), [1, 2, 3]).into(),
        SheetPoint::physical(C64::new(-3.0, 0.0)).into(),
    ];
    for p in &pts {
        for q in &pts {
            let d = metric_d(p, q, &b).unwrap();
            let brute = metric_d_truncated(p, q, &b, 5000);
            assert!((d - brute).abs() <= 1e-12 * brute.max(1.0), "{d} vs {brute}");
        }
    }
}

#[test]
fn boundary_values_are_limits_from_the_physical_sheet() {
    let b = unit();
    let e = 6.5;
    let edge = SurfacePoint::Boundary(BoundaryPoint::plus(e));
    for eta in [1e-2, 1e-4, 1e-6, 1e-8] {
        let near: SurfacePoint = SheetPoint::physical(C64::new(e, eta)).into();
        let d = metric_d(&edge, &near, &b).unwrap();
        // τ is Lipschitz in z away from thresholds: |Δτ| ≤ |Δz| / (2 min|τ|).
        assert!(d <= eta / (2.0 * (e - 4.0).sqrt()) * 1.01, "η = {eta}: {d}");
    }
}

#[test]
fn flipping_a_cut_continues_analytically() {
    let b = unit();
    let e = 6.5;
    for j in [1, 2] {
        let above: SurfacePoint = SheetPoint::physical(C64::new(e, 1e-9)).into();
        let below_flipped: SurfacePoint = SheetPoint::with_flips(C64::new(e, -1e-9), [j]).into();
        let below: SurfacePoint = SheetPoint::physical(C64::new(e, -1e-9)).into();
        let ta = tau(&above, j, &b).unwrap().value;
        let tf = tau(&below_flipped, j, &b).unwrap().value;
        let tb = tau(&below, j, &b).unwrap().value;
        let s2 = (j * j) as f64;
        assert!((ta - tf).norm() < 1e-8, "mode {j}");
        assert!(((ta - tb).norm() - 2.0 * (e - s2).sqrt()).abs() < 1e-8, "mode {j}");
    }
    // Below its threshold a mode has no cut on the real axis.
    let above: SurfacePoint = SheetPoint::physical(C64::new(e, 1e-9)).into();
    let below: SurfacePoint = SheetPoint::physical(C64::new(e, -1e-9)).into();
    assert!((tau(&above, 3, &b).unwrap().value - tau(&below, 3, &b).unwrap().value).norm() < 1e-8);
}

#[test]
fn real_roots_between_thresholds() {
    let b = two_interval();
    let sig = b.sigmas();
    for w in sig.windows(2) {
        if w[1] - w[0] < 1e-9 {
            continue;
        }
        let e = 0.5 * (w[0] * w[0] + w[1] * w[1]);
        let p = SurfacePoint::Boundary(BoundaryPoint::plus(e));
        let real = (1..=b.len()).filter(|&j| tau(&p, j, &b).unwrap().value.im == 0.0).count();
        assert_eq!(real, b.count_below(e.sqrt()), "E = {e}");
    }
}

#[test]
fn physical_region() {
    let b = unit();
    assert!(is_physical(&SheetPoint::physical(C64::new(3.0, 0.5)), &b));
    assert!(is_physical(&SheetPoint::physical(C64::new(0.5, 0.0)), &b));
    assert!(!is_physical(&SheetPoint::physical(C64::new(3.0, 0.0)), &b));
    assert!(!is_physical(&SheetPoint::with_flips(C64::new(3.0, 0.5), [1]), &b));
    for k in 0..50 {
        let z = C64::new(-5.0 + 0.7 * k as f64, 0.01 + 0.3 * (k % 7) as f64);
        let p: SurfacePoint = SheetPoint::physical(z).into();
        for j in 1..=b.len() {
            assert!(tau(&p, j, &b).unwrap().value.im > 0.0);
        }
    }
}

#[test]
fn points_at_a_prescribed_distance() {
    let b = unit();
    for e in [2.5, 10.0, 45.0] {
        for theta in [0.3, 1.5, 2.9, 3.6, 5.0] {
            let target = 0.1 / (1.0 + e);
            let (p, d) = point_at_distance(e, theta, target, &b).unwrap();
            assert!((d - target).abs() <= 1e-9 * target.max(1.0) + 1e-12, "{d} vs {target}");
            assert_eq!(!p.flipped.is_empty(), theta.sin() < 0.0);
            let centre = SurfacePoint::Boundary(BoundaryPoint::plus(e));
            assert!((metric_d(&centre, &p.clone().into(), &b).unwrap() - d).abs() < 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metric_axioms(p in surface_point(), q in surface_point(), r in surface_point()) {
        let b = unit();
        let pq = metric_d(&p, &q, &b).unwrap();
        let qp = metric_d(&q, &p, &b).unwrap();
        let qr = metric_d(&q, &r, &b).unwrap();
        let pr = metric_d(&p, &r, &b).unwrap();
        prop_assert_eq!(metric_d(&p, &p, &b).unwrap(), 0.0);
        prop_assert!(pq >= 0.0);
        prop_assert!((pq - qp).abs() <= 1e-12 * pq.max(1.0));
        prop_assert!(pr <= pq + qr + 1e-12 * (pq + qr).max(1.0));
    }
}
