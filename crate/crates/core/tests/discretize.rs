use std::f64::consts::PI;

use proptest::prelude::*;
use serde_json::{json, Value};
use wsl_core::discretize::{
    assemble_laplacian, build_grid, discrete_derivative_x, smooth_step_down, weight_value, Grid, WeightKind,
};
use wsl_core::geometry::gallery;
use wsl_core::Error;

/// Max of `|A u − λ u|` over nodes with `|x| < 5` for `u = sin x cos(πy/2)` on
/// the strip `(−1, 1)`, where `−Δu = (1 + π²/4) u`.
fn strip_consistency(h: f64) -> f64 {
    let d = gallery("full_strip", &Value::Null).unwrap();
    let g = build_grid(&d, h, 12.0).unwrap();
    let a = assemble_laplacian(&g);
    let u: Vec<f64> = g.sample(|x, y| x.sin() * (PI * y / 2.0).cos());
    let au = a.apply(&u);
    let lambda = 1.0 + PI * PI / 4.0;
    (0..g.len())
        .filter(|&k| g.position(k)[0].abs() < 5.0)
        .map(|k| (au[k] - lambda * u[k]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn five_point_stencil_is_second_order() {
    let e: Vec<f64> = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0].iter().map(|&h| strip_consistency(h)).collect();
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "errors {e:?}");
    }
}

#[test]
fn transverse_block_has_the_lattice_eigenvalue() {
    let d = gallery("half_strip", &Value::Null).unwrap();
    let h = PI / 16.0;
    let g = build_grid(&d, h, 18.0).unwrap();
    let a = assemble_laplacian(&g);
    let u: Vec<f64> = g.sample(|_, y| y.sin());
    let au = a.apply(&u);
    let lambda = (2.0 / h).powi(2) * (h / 2.0).sin().powi(2);
    for k in 0..g.len() {
        let (i, _) = g.node(k);
        if i >= 2 && i + 2 < g.ncol {
            assert!((au[k] - lambda * u[k]).abs() < 1e-10 * lambda, "node {k}");
        }
    }
}

#[test]
fn product_block_is_a_kronecker_sum() {
    let d = gallery("product_cylinder", &Value::Null).unwrap();
    let h = PI / 8.0;
    let g = build_grid(&d, h, 17.0).unwrap();
    let a = assemble_laplacian(&g);
    let ny = 7;
    let nx = 10;
    let i0 = g.ncol / 2;
    let inv = 1.0 / (h * h);
    // One-dimensional second difference, restricted to the window.
    let second = |p: usize, q: usize| -> f64 {
        if p == q {
            2.0 * inv
        } else if p.abs_diff(q) == 1 {
            -inv
        } else {
            0.0
        }
    };
    // Interior unknowns of the window, ordered column by column.
    let ids: Vec<(usize, usize, usize)> = (0..nx)
        .flat_map(|a| (0..ny).map(move |b| (a, b)))
        .map(|(a, b)| (a, b, g.index((i0 + a) as isize, (b + 1) as isize).expect("window is interior")))
        .collect();
    for &(pa, pb, k) in &ids {
        for &(qa, qb, m) in &ids {
            let kron = second(pa, qa) * (pb == qb) as u8 as f64 + (pa == qa) as u8 as f64 * second(pb, qb);
            assert_eq!(a.matrix.get(k, m), kron, "({pa}, {pb}) ~ ({qa}, {qb})");
        }
    }
}

#[test]
fn laplacian_is_symmetric_and_positive() {
    let d = gallery("hourglass", &Value::Null).unwrap();
    let g = build_grid(&d, 1.0 / 8.0, 13.0).unwrap();
    let a = assemble_laplacian(&g);
    for k in (0..g.len()).step_by(7) {
        let (i, j) = g.node(k);
        for (di, dj) in [(1isize, 0isize), (0, 1)] {
            if let Some(m) = g.index(i as isize + di, j as isize + dj) {
                assert_eq!(a.matrix.get(k, m), a.matrix.get(m, k));
            }
        }
    }
    let u: Vec<f64> = (0..g.len()).map(|k| ((k * 7919) % 101) as f64 - 50.0).collect();
    let q: f64 = a.apply(&u).iter().zip(&u).map(|(x, y)| x * y).sum();
    assert!(q > 0.0);
}

fn hourglass_area(x_lo: f64, x_hi: f64) -> f64 {
    // f(x) = 0.5 + 0.5 S(|x|/2) with S(t) = t³(10 − 15t + 6t²), 1 beyond |x| = 2.
    let f = |x: f64| {
        let t = (x.abs() / 2.0).min(1.0);
        0.5 + 0.5 * t.powi(3) * (10.0 - 15.0 * t + 6.0 * t * t)
    };
    let n = 200_000;
    let dx = (x_hi - x_lo) / n as f64;
    (0..n).map(|k| 2.0 * f(x_lo + (k as f64 + 0.5) * dx) * dx).sum()
}

#[test]
fn masked_area_converges_on_the_hourglass() {
    let d = gallery("hourglass", &Value::Null).unwrap();
    let mut errors = Vec::new();
    let mut counts = Vec::new();
    for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
        let g: Grid = build_grid(&d, h, 13.0).unwrap();
        // Face-column cells reach h/2 beyond the faces.
        let exact = hourglass_area(g.x_lo - h / 2.0, g.x(g.ncol - 1) + h / 2.0);
        let cut: f64 = g.cell_fraction().iter().sum::<f64>() * h * h;
        // Dual cells miss at most a strip of width h/2 along each wall.
        let perimeter = 4.0 * 13.0 + 2.0;
        assert!((g.interior_area() - exact).abs() <= perimeter * h / 2.0, "h = {h}");
        assert!((cut - exact).abs() <= perimeter * h / 2.0, "h = {h}");
        errors.push((g.interior_area() - exact).abs());
        counts.push(g.len() as f64);
    }
    for w in errors.windows(2) {
        let r = w[0] / w[1];
        assert!((1.8..=2.2).contains(&r), "area errors {errors:?}");
    }
    for w in counts.windows(2) {
        let r = w[1] / w[0];
        assert!((3.8..=4.2).contains(&r), "node ratio {r}");
    }
}

#[test]
fn derivative_is_second_order_in_the_interior() {
    let d = gallery("full_strip", &Value::Null).unwrap();
    let err = |h: f64| {
        let g = build_grid(&d, h, 12.0).unwrap();
        let u: Vec<f64> = g.sample(|x, y| x.sin() * (PI * y / 2.0).cos());
        let du = discrete_derivative_x(&g, &u);
        (0..g.len())
            .filter(|&k| g.position(k)[0].abs() < 5.0)
            .map(|k| {
                let [x, y] = g.position(k);
                (du[k] - x.cos() * (PI * y / 2.0).cos()).abs()
            })
            .fold(0.0, f64::max)
    };
    let r = err(1.0 / 8.0) / err(1.0 / 16.0);
    assert!((3.5..=4.5).contains(&r), "{r}");
}

#[test]
fn grid_preconditions() {
    let d = gallery("full_strip", &Value::Null).unwrap();
    assert!(matches!(build_grid(&d, 0.3, 12.0), Err(Error::Grid(_))));
    assert!(matches!(build_grid(&d, 1.0 / 8.0, 10.0), Err(Error::Grid(_))));
    let p = gallery("parabola", &Value::Null).unwrap();
    assert!(matches!(build_grid(&p, 0.1, 40.0), Err(Error::Grid(_))));
    let two = gallery("product_cylinder", &json!({"cross_section": [[0.0, 1.0], [1.5, 2.0]]})).unwrap();
    assert!(build_grid(&two, 1.0 / 16.0, 12.0).is_ok());
    assert!(matches!(build_grid(&two, 0.06, 12.0), Err(Error::Grid(_))));
}

proptest! {
    #[test]
    fn poly_weights_are_monotone_and_reciprocal(delta in 0.01f64..=1.0, x0 in -2.0f64..2.0, a in 0.0f64..50.0, b in 0.0f64..50.0) {
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        let kind = WeightKind::PolyMinus { one_ended: false };
        let plus = WeightKind::PolyPlus { one_ended: false };
        let wn = weight_value(kind, delta, x0, x0 + near).unwrap();
        let wf = weight_value(kind, delta, x0, x0 - far).unwrap();
        prop_assert!(wf <= wn);
        let p = weight_value(plus, delta, x0, x0 + near).unwrap();
        prop_assert!((p * wn - 1.0).abs() < 1e-12);
        let one = WeightKind::PolyMinus { one_ended: true };
        prop_assert!(weight_value(one, delta, x0, x0 + far).unwrap() <= weight_value(one, delta, x0, x0 + near).unwrap());
    }

    #[test]
    fn cutoff_is_monotone_between_zero_and_one(inner in 0.0f64..5.0, width in 0.1f64..5.0, a in 0.0f64..12.0, b in 0.0f64..12.0) {
        let kind = WeightKind::CutoffChi { inner, outer: inner + width };
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        let cn = weight_value(kind, 1.0, 0.0, near).unwrap();
        let cf = weight_value(kind, 1.0, 0.0, -far).unwrap();
        prop_assert!((0.0..=1.0).contains(&cn) && cf <= cn);
        if far <= inner {
            prop_assert_eq!(cf, 1.0);
        }
        if near >= inner + width {
            prop_assert_eq!(cn, 0.0);
        }
    }

    #[test]
    fn morawetz_weight_increases(delta in 0.05f64..2.0, a in 0.0f64..30.0, b in 0.0f64..30.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let wl = weight_value(WeightKind::MorawetzW, delta, 0.0, lo).unwrap();
        let wh = weight_value(WeightKind::MorawetzW, delta, 0.0, hi).unwrap();
        prop_assert!(wl <= wh && wh < 1.0 && wl >= 0.0);
    }

    #[test]
    fn smooth_step_is_symmetric(s in -1.0f64..2.0) {
        prop_assert!((smooth_step_down(s) + smooth_step_down(1.0 - s) - 1.0).abs() < 1e-12);
    }
}
