use num_complex::Complex64;
use proptest::prelude::*;

use rootlab::adspace::{
    almgren_embed, dist, dist_rad, minimizing_permutations, unit_root, wasserstein2, AlmgrenConfig,
    UnorderedTuple,
};
use rootlab::polycore::{from_roots, MonicPolynomial};
use rootlab::sobolev::{
    fd_derivative, lq_norm_masked, s0s1, sampled_pairs, trapezoid_weights, weak_lp_values, SampledFunction,
};
use rootlab::tracking::{holder_constants, track, unordered_samples, uniform_grid, CoefficientCurve};

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn tuple(d: usize) -> impl Strategy<Value = UnorderedTuple> {
    prop::collection::vec(complex(), d).prop_map(|v| UnorderedTuple::new(v).unwrap())
}

fn tuples(count: usize) -> impl Strategy<Value = Vec<UnorderedTuple>> {
    (1usize..=6).prop_flat_map(move |d| prop::collection::vec(tuple(d), count))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dist_is_a_metric(ts in tuples(3)) {
        let (a, b, c) = (&ts[0], &ts[1], &ts[2]);
        prop_assert_eq!(dist(a, a).unwrap(), 0.0);
        prop_assert_eq!(dist(a, b).unwrap(), dist(b, a).unwrap());
        prop_assert!(dist(a, c).unwrap() <= dist(a, b).unwrap() + dist(b, c).unwrap() + 1e-12);
    }

    #[test]
    fn dist_ignores_order(t in tuple(5), shift in 0usize..5) {
        let mut v = t.values().to_vec();
        v.rotate_left(shift);
        let u = UnorderedTuple::new(v).unwrap();
        prop_assert_eq!(dist(&t, &u).unwrap(), 0.0);
        prop_assert!(t == u);
    }

    #[test]
    fn optimal_transport_agrees_with_assignment(ts in tuples(2)) {
        let (a, b) = (&ts[0], &ts[1]);
        prop_assert!((wasserstein2(a, b).unwrap() - dist(a, b).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn minimizing_permutations_attain_the_distance(ts in tuples(2)) {
        let (a, b) = (&ts[0], &ts[1]);
        let best = dist(a, b).unwrap();
        let perms = minimizing_permutations(a, b, 1e-9).unwrap();
        prop_assert!(!perms.is_empty());
        let d = a.degree() as f64;
        for p in perms {
            let sq: f64 = p.iter().enumerate().map(|(i, &j)| (a.values()[i] - b.values()[j]).norm_sqr()).sum();
            prop_assert!((sq / d).sqrt() <= best + 1e-9 * (1.0 + best) + 1e-15);
        }
    }

    #[test]
    fn almgren_embedding_is_lipschitz(ts in tuples(2)) {
        let (a, b) = (&ts[0], &ts[1]);
        let cfg = AlmgrenConfig::new(a.degree()).unwrap();
        let (ea, eb) = (almgren_embed(a, &cfg).unwrap(), almgren_embed(b, &cfg).unwrap());
        prop_assert_eq!(ea.len(), cfg.target_dim());
        let gap = ea.iter().zip(&eb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(gap <= cfg.lipschitz_bound() * dist(a, b).unwrap() + 1e-12);
    }

    #[test]
    fn radical_distance_is_rotation_invariant(l in complex(), m in complex(), d in 1usize..6, j in 0usize..6) {
        let r = dist_rad(l, m, d);
        prop_assert!(r <= (l - m).norm() + 1e-15);
        let rotated = dist_rad(l, unit_root(d, j % d) * m, d);
        prop_assert!((r - rotated).abs() <= 1e-12);
    }

    #[test]
    fn roots_lie_inside_the_cauchy_bound(coeffs in prop::collection::vec(complex(), 1..=8)) {
        let p = MonicPolynomial::new(coeffs).unwrap();
        let roots = p.roots(1e-12).unwrap();
        prop_assert_eq!(roots.roots.len(), p.degree());
        let bound = p.cauchy_bound();
        prop_assert!(roots.roots.iter().all(|r| r.norm() <= bound));
    }

    #[test]
    fn separated_roots_are_recovered(seed in prop::collection::vec(complex(), 1..=6)) {
        // Spread the roots out so the problem is well conditioned.
        let roots: Vec<Complex64> = seed.iter().enumerate().map(|(k, z)| z * 0.2 + Complex64::new(k as f64, 0.0)).collect();
        let p = from_roots(&roots).unwrap();
        let found = UnorderedTuple::from(p.roots(1e-13).unwrap());
        prop_assert!(dist(&found, &UnorderedTuple::new(roots).unwrap()).unwrap() < 1e-8);
    }

    #[test]
    fn tschirnhausen_form_has_no_subleading_term(coeffs in prop::collection::vec(complex(), 1..=6)) {
        let p = MonicPolynomial::new(coeffs).unwrap();
        let (q, shift) = p.tschirnhausen();
        prop_assert_eq!(q.coeffs()[0], Complex64::new(0.0, 0.0));
        // q(Z) = p(Z + shift).
        let z = Complex64::new(0.3, -0.7);
        let scale = 1.0 + p.residual_scale();
        prop_assert!((q.eval(z) - p.eval(z + shift)).norm() <= 1e-11 * scale * (1.0 + (z + shift).norm()).powi(p.degree() as i32));
    }

    #[test]
    fn split_factors_multiply_back(a in prop::collection::vec(complex(), 1..=3), b in prop::collection::vec(complex(), 1..=3)) {
        // Two clusters far apart.
        let mut roots: Vec<Complex64> = a.iter().map(|z| z * 0.05).collect();
        roots.extend(b.iter().map(|z| z * 0.05 + Complex64::new(10.0, 0.0)));
        let p = from_roots(&roots).unwrap();
        let s = p.split(10.0, 1e-3).unwrap();
        let total: usize = s.factors.iter().map(|f| f.degree()).sum();
        prop_assert_eq!(total, p.degree());
        prop_assert!(s.factors.len() >= 2);
        prop_assert!(s.residual < 1e-8 * (1.0 + p.residual_scale()));
    }

    #[test]
    fn weak_norm_is_dominated_by_the_strong_norm(values in prop::collection::vec(0.0..10.0f64, 3..50), p in 1.0..3.0f64) {
        let grid = uniform_grid(0.0, 1.0, values.len());
        prop_assert!(weak_lp_values(&grid, &values, p) <= lq_norm_masked(&grid, &values, p, None) * (1.0 + 1e-12));
    }

    #[test]
    fn trapezoid_weights_sum_to_the_length(points in 2usize..200, a in -3.0..0.0f64, b in 0.1..3.0f64) {
        let grid = uniform_grid(a, b, points);
        let total: f64 = trapezoid_weights(&grid).iter().sum();
        prop_assert!((total - (b - a)).abs() < 1e-12);
    }

    #[test]
    fn finite_differences_are_exact_for_quadratics(c0 in -2.0..2.0f64, c1 in -2.0..2.0f64, c2 in -2.0..2.0f64, points in 3usize..100) {
        let f = SampledFunction::from_fn(uniform_grid(-1.0, 2.0, points), |x| c0 + c1 * x + c2 * x * x).unwrap();
        let df = fd_derivative(&f).unwrap();
        for (x, v) in df.grid.iter().zip(&df.values) {
            prop_assert!((v - (c1 + 2.0 * c2 * x)).abs() < 1e-9);
        }
    }

    #[test]
    fn sampled_pairs_respect_the_budget(len in 2usize..400, budget in 1usize..5000) {
        let pairs = sampled_pairs(len, budget);
        let all = len * (len - 1) / 2;
        prop_assert!(pairs.len() <= all);
        prop_assert!(pairs.len() <= budget.max(len - 1) + 1 || pairs.len() == all);
        for i in 0..len - 1 {
            prop_assert!(pairs.contains(&(i, i + 1)));
        }
    }
}

/// Coefficient curve of degree 2 with quadratic coefficients in `x`.
fn quadratic_curve(c: [f64; 6], points: usize) -> CoefficientCurve {
    let grid = uniform_grid(-1.0, 1.0, points);
    let samples = grid
        .iter()
        .map(|&x| {
            vec![
                Complex64::new(c[0] + c[1] * x + c[2] * x * x, 0.0),
                Complex64::new(c[3] + c[4] * x + c[5] * x * x, 0.0),
            ]
        })
        .collect();
    CoefficientCurve::from_samples(grid, samples).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tracked_roots_solve_the_polynomials(c in prop::array::uniform6(-1.0..1.0f64)) {
        let curve = quadratic_curve(c, 400);
        let rc = track(&curve, 1e-12, None).unwrap();
        prop_assert_eq!(rc.grid.len(), rc.lambda.len());
        for (m, v) in rc.lambda.iter().enumerate() {
            let p = curve.polynomial_at(m);
            for z in v {
                prop_assert!(p.eval(*z).norm() <= 1e-9 * (1.0 + p.residual_scale()));
            }
        }
    }

    #[test]
    fn tracking_follows_the_seed_order(c in prop::array::uniform6(-1.0..1.0f64)) {
        let curve = quadratic_curve(c, 300);
        let rc = track(&curve, 1e-12, None).unwrap();
        let swapped = vec![rc.lambda[0][1], rc.lambda[0][0]];
        let other = track(&curve, 1e-12, Some(&swapped)).unwrap();
        // Same unordered curve, with the two components exchanged.
        let (a, b) = (unordered_samples(&rc), unordered_samples(&other));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(dist(x, y).unwrap() < 1e-9);
        }
        prop_assert_eq!(other.lambda[0][0], swapped[0]);
    }

    #[test]
    fn hoelder_certificate_holds(c in prop::array::uniform6(-1.0..1.0f64)) {
        let curve = quadratic_curve(c, 300);
        let (h, h1) = holder_constants(&curve);
        prop_assert!(h1 <= h);
        let rc = track(&curve, 1e-12, None).unwrap();
        let t = unordered_samples(&rc);
        for (i, j) in sampled_pairs(t.len(), 20_000) {
            let bound = h * (rc.grid[j] - rc.grid[i]).abs().sqrt();
            prop_assert!(dist(&t[i], &t[j]).unwrap() <= bound + 1e-12);
        }
    }

    #[test]
    fn pair_comparison_is_symmetric(c in prop::array::uniform6(-1.0..1.0f64), e in prop::array::uniform6(-0.1..0.1f64)) {
        let mut shifted = c;
        for k in 0..6 {
            shifted[k] += e[k];
        }
        let f = track(&quadratic_curve(c, 200), 1e-12, None).unwrap();
        let g = track(&quadratic_curve(shifted, 200), 1e-12, None).unwrap();
        let fg = s0s1(&f, &g, 1e-9).unwrap();
        let gf = s0s1(&g, &f, 1e-9).unwrap();
        prop_assert_eq!(&fg.s0, &gf.s0);
        for (x, y) in fg.s1.iter().zip(&gf.s1) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }
}

#[test]
fn tuple_json_round_trip() {
    let t = UnorderedTuple::new(vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.0)]).unwrap();
    let text = serde_json::to_string(&t).unwrap();
    let back: UnorderedTuple = serde_json::from_str(&text).unwrap();
    assert!(t == back);
    assert!(serde_json::from_str::<UnorderedTuple>(r#"{"d":3,"values":[[1,0]]}"#).is_err());
}

#[test]
fn polynomial_json_round_trip() {
    let p = MonicPolynomial::from_real(&[0.0, -1.0]).unwrap();
    let text = serde_json::to_string(&p).unwrap();
    assert_eq!(text, r#"{"d":2,"coeffs":[[0.0,0.0],[-1.0,0.0]]}"#);
    let back: MonicPolynomial = serde_json::from_str(&text).unwrap();
    assert_eq!(p, back);
}
