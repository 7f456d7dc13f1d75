//! Random test functions for the weighted Poincaré check.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wsl_core::discretize::Grid;
use wsl_core::C64;

/// A smooth random grid function supported in `x ≥ x0`, vanishing on the
/// truncation faces and off the mask. It is a sum of one to four terms
/// `c ((x−x0)/s)^p e^{−(x−x0)/s} e^{ik(x−x0)} sin(mπ(y−y_lo)/H)` with a taper
/// that reaches zero one cell before the last lattice column.
pub fn random_trial(grid: &Grid, x0: f64, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let x_end = grid.x(grid.ncol - 1) - grid.h;
    let span = (x_end - x0).max(grid.h);
    let height = grid.h * (grid.nrow - 1) as f64;
    let terms: Vec<(C64, f64, f64, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let s = rng.gen_range((0.2f64).ln()..(0.5 * span).ln()).exp();
            let p = rng.gen_range(0.5..2.0);
            let k = rng.gen_range(0.0..5.0);
            let m = rng.gen_range(1..=3) as f64;
            (c, s, p, k, m)
        })
        .collect();
    let mut u = vec![C64::new(0.0, 0.0); grid.len()];
    for (n, val) in u.iter_mut().enumerate() {
        if grid.is_face_node(n) {
            continue;
        }
        let [x, y] = grid.position(n);
        let r = x - x0;
        if r < 0.0 || x >= x_end {
            continue;
        }
        let taper = 1.0 - (r / span).powi(8);
        let across = std::f64::consts::PI * (y - grid.y_lo) / height;
        *val = terms
            .iter()
            .map(|&(c, s, p, k, m)| c * (r / s).powf(p) * (-r / s).exp() * C64::from_polar(1.0, k * r) * (m * across).sin())
            .sum::<C64>()
            * taper;
    }
    u
}
