use std::f64::consts::PI;

use gllab_core::curvature::{scal_trace_path, sigma_warp, WarpSpec};
use gllab_core::deform::Partition;
use gllab_core::fncore::{integrate_twice, make_piecewise, mollify, scale_warp};
use gllab_core::glcurve::{build_gl_family, select_parameters};
use gllab_core::suite::random_concave_warp;
use gllab_core::torpedo::build_torpedo;
use gllab_core::{CurvatureReport, MetricPath, Piece, SmoothFn1D};
use nalgebra::{DMatrix, Rotation3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn continuous_linear(lengths: &[f64], slopes: &[f64]) -> (Vec<f64>, Vec<Piece>) {
    let mut breaks = vec![0.0];
    let mut pieces = Vec::new();
    let mut value = 0.3;
    for (len, slope) in lengths.iter().zip(slopes) {
        let start = *breaks.last().unwrap();
        pieces.push(Piece::affine(start, value, *slope));
        value += slope * len;
        breaks.push(start + len);
    }
    (breaks, pieces)
}

fn spd(entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(3, 3, entries);
    &a * a.transpose() + DMatrix::identity(3, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mollifier_is_exact_where_the_base_is_affine(
        lengths in prop::collection::vec(0.2..1.0f64, 2..6),
        slopes in prop::collection::vec(-2.0..2.0f64, 6),
        eps_frac in 0.05..0.95f64,
        u in 0.0..1.0f64,
        pick in any::<prop::sample::Index>(),
    ) {
        let (breaks, pieces) = continuous_linear(&lengths, &slopes);
        let shortest = lengths.iter().copied().fold(f64::INFINITY, f64::min);
        let eps = eps_frac * 0.5 * shortest;
        let base = make_piecewise(breaks.clone(), pieces).unwrap();
        let smooth = mollify(&base, eps).unwrap();
        let i = pick.index(lengths.len());
        let room = eps / 4.0 + 1e-9;
        let (lo, hi) = (breaks[i] + room, breaks[i + 1] - room);
        prop_assume!(hi > lo);
        let t = lo + u * (hi - lo);
        prop_assert!((smooth.value(t) - base.jet(t).value).abs() <= 1e-10);
    }

    #[test]
    fn scale_warp_composes(a in 0.2..3.0f64, b in 0.2..3.0f64, u in 0.0..1.0f64) {
        let f = SmoothFn1D::sin(0.0, PI);
        let twice = scale_warp(&scale_warp(&f, a).unwrap(), b).unwrap();
        let once = scale_warp(&f, a * b).unwrap();
        let t = u * a * b * PI;
        let (x, y) = (twice.jet(t), once.jet(t));
        prop_assert!((x.value - y.value).abs() <= 1e-10);
        prop_assert!((x.d1 - y.d1).abs() <= 1e-10);
        prop_assert!((x.d2 - y.d2).abs() <= 1e-10);
    }

    #[test]
    fn integrate_twice_inverts_the_second_derivative(
        c in prop::collection::vec(-2.0..2.0f64, 4),
        t0 in 0.0..2.0f64,
        u in 0.0..1.0f64,
    ) {
        let f = SmoothFn1D::from_piece(0.0, 2.0, Piece::poly(0.0, c.clone())).unwrap();
        let w = SmoothFn1D::from_piece(0.0, 2.0, Piece::poly(0.0, vec![2.0 * c[2], 6.0 * c[3]])).unwrap();
        let j = f.jet(t0);
        let g = integrate_twice(&w, t0, j.value, j.d1).unwrap();
        let t = 2.0 * u;
        prop_assert!((g.value(t) - f.value(t)).abs() <= 1e-8);
    }

    #[test]
    fn scaling_law_for_sigma(seed in any::<u64>(), theta in 0.2..4.0f64, u in 0.05..0.95f64, k in 3usize..8) {
        let f = random_concave_warp(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let t = u * f.domain().1;
        let wf = WarpSpec::new(k, f.clone(), 0.0).unwrap();
        let wg = WarpSpec::new(k, scale_warp(&f, theta).unwrap(), 0.0).unwrap();
        let lhs = sigma_warp(&wg, theta * t).unwrap();
        let rhs = sigma_warp(&wf, t).unwrap() / (theta * theta);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn sigma_branches_meet_at_the_switch(seed in any::<u64>(), k in 3usize..8) {
        let f = random_concave_warp(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let w = WarpSpec::new(k, f, 0.0).unwrap();
        let ts = w.t_switch;
        let below = sigma_warp(&w, ts * (1.0 - 1e-9)).unwrap();
        let above = sigma_warp(&w, ts * (1.0 + 1e-9)).unwrap();
        prop_assert!((below - above).abs() <= 1e-6 * above.abs().max(1.0), "{below} vs {above}");
    }

    #[test]
    fn torpedo_cap_is_a_round_sphere(
        delta in 0.3..3.0f64,
        eps in 0.02..0.1f64,
        k in 3usize..8,
        u in 0.01..1.0f64,
    ) {
        let spec = build_torpedo(delta, eps).unwrap();
        prop_assert!((spec.r_bar() - delta * PI).abs() <= 1e-12 * delta);
        let w = WarpSpec::new(k, spec.f.clone(), 0.0).unwrap();
        let t = u * delta * (0.5 * PI - eps);
        let want = (k * (k - 1)) as f64 / (delta * delta);
        prop_assert!((sigma_warp(&w, t).unwrap() - want).abs() <= 1e-8 * want.max(1.0));
    }

    #[test]
    fn trace_formula_is_rotation_invariant(
        g0 in prop::collection::vec(-1.0..1.0f64, 9),
        g1 in prop::collection::vec(-1.0..1.0f64, 9),
        angles in prop::collection::vec(-PI..PI, 3),
        t in 0.05..0.95f64,
    ) {
        let p = MetricPath::linear(spd(&g0), spd(&g1), 0.0);
        let r = Rotation3::from_euler_angles(angles[0], angles[1], angles[2]);
        let q = DMatrix::from_iterator(3, 3, r.matrix().iter().copied());
        let a = scal_trace_path(&p, t).unwrap();
        let b = scal_trace_path(&p.conjugated(q), t).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn partition_of_unity(n in 1usize..40, t in -0.2..1.2f64) {
        let p = Partition::new(n).unwrap();
        let w = p.weights(t);
        let sums = w.iter().fold([0.0; 3], |acc, (_, v)| [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]);
        prop_assert!((sums[0] - 1.0).abs() <= 1e-12);
        prop_assert!(sums[1].abs() <= 1e-8 * n as f64 && sums[2].abs() <= 1e-6 * (n * n) as f64);
        prop_assert!(w.iter().all(|(_, v)| v[0] >= 0.0));
    }

    #[test]
    fn reports_survive_a_json_round_trip(
        values in prop::collection::vec(-1e6..1e6f64, 0..20),
        bound in -10.0..10.0f64,
        margins in prop::collection::vec(-1.0..1.0f64, 0..4),
    ) {
        prop_assume!(!values.is_empty());
        let mut r = CurvatureReport::new("prop", bound);
        for (i, v) in values.iter().enumerate() {
            r.push(&[("i", i as f64), ("t", v / 7.0)], *v);
        }
        for (i, m) in margins.iter().enumerate() {
            r.condition(format!("c{i}"), *m);
        }
        let r = r.finish();
        let back: CurvatureReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn tube_widths_are_ordered(
        k in 3usize..6,
        eta in 0.05..0.3f64,
        eps0 in 0.05..0.5f64,
        ell in 0.5..3.0f64,
        r0 in 0.6..2.0f64,
    ) {
        let p = select_parameters(k, eta, eps0, ell, r0, 0.0, 0.0).unwrap();
        let fam = build_gl_family(&p, &[1.0]).unwrap();
        prop_assert!(fam.r_inf <= p.eps0 && p.eps0 <= p.r0 && p.r0 < p.rho);
        prop_assert!(fam.length_achieved >= p.ell);
        for smp in fam.curves[0].samples(200) {
            prop_assert!(smp.jet.r >= -1e-12);
        }
    }
}
