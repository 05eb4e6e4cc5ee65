//! Randomized invariants: the width table against the floor-sqrt defining
//! property, the counting identity across admissible μ, restriction of
//! sphere polynomials to great circles, exact lattice comparisons against
//! floating point, and exp/log consistency on surfaces.

use std::sync::OnceLock;

use proptest::prelude::*;
use widths_core::crofton::{restrict_to_circle, GreatCircle, SpherePolynomial};
use widths_core::lattice::{cmp_values, count_check, isqrt, width_table, LatticeValue, Rat, WidthTable};
use widths_core::rng::CounterRng;
use widths_core::surface::vec3::{add, dot, norm, normalize, scale, sub};
use widths_core::surface::Surface;
use widths_core::TAU;

fn table() -> &'static WidthTable {
    static TABLE: OnceLock<WidthTable> = OnceLock::new();
    TABLE.get_or_init(|| width_table(20_000))
}

proptest! {
    #[test]
    fn width_is_tau_times_floor_sqrt(p in 1u64..=20_000) {
        let k = table().multiple_of_tau(p);
        prop_assert!(k * k <= p && (k + 1) * (k + 1) > p);
        prop_assert_eq!(k, isqrt(p));
        prop_assert!((table().value(p) - TAU * k as f64).abs() < 1e-12);
        // monotone in p
        if p > 1 {
            prop_assert!(table().multiple_of_tau(p - 1) <= k);
        }
    }

    #[test]
    fn counting_identity_all_admissible_mu(m in 1u32..=10, q in 0i128..1000) {
        // any rational μ < 1/(2m) gives the same count (m+1)² − 1
        let q = 2 * m as i128 + 1 + q;
        let count = count_check(m, Rat::new(1, q)).unwrap();
        prop_assert_eq!(count, ((m as usize + 1) * (m as usize + 1)) - 1);
    }

    #[test]
    fn lattice_order_matches_floats(
        t1 in 0u32..50, s1 in 0u32..100, t2 in 0u32..50, s2 in 0u32..100, q in 3i128..1000,
    ) {
        let mu = Rat::new(1, q);
        let a = LatticeValue { tau: t1, steps: s1 };
        let b = LatticeValue { tau: t2, steps: s2 };
        let fa = a.to_f64(mu);
        let fb = b.to_f64(mu);
        // exact comparison must agree whenever floats are safely apart
        if (fa - fb).abs() > 1e-6 {
            prop_assert_eq!(cmp_values(a, b, mu), fa.partial_cmp(&fb).unwrap());
        }
    }

    #[test]
    fn circle_restriction_agrees_pointwise(
        k in 1usize..=4, seed in any::<u64>(), theta in 0.0..TAU,
    ) {
        let mut rng = CounterRng::new(seed, 0);
        let poly = SpherePolynomial::random(k, &mut rng);
        let circle = GreatCircle::new(rng.next_unit_vector3());
        let trig = restrict_to_circle(&poly, &circle);
        prop_assert!(trig.degree_bound() <= k);
        let direct = poly.eval(circle.point(theta));
        prop_assert!((trig.eval(theta) - direct).abs() < 1e-10 * (1.0 + trig.max_abs_coeff()));
    }

    #[test]
    fn exp_log_roundtrip_on_sphere(seed in any::<u64>(), len in 1e-3f64..3.0) {
        let mut rng = CounterRng::new(seed, 1);
        let p = rng.next_unit_vector3();
        let mut v = rng.next_unit_vector3();
        v = sub(v, scale(p, dot(v, p)));
        prop_assume!(norm(v) > 1e-3);
        v = scale(normalize(v), len);
        let s = Surface::RoundSphere;
        let q = s.exp_map(p, v).unwrap();
        let w = s.log_map(p, q).unwrap();
        prop_assert!(norm(sub(v, w)) < 1e-8);
        prop_assert!((s.distance(p, q).unwrap() - len).abs() < 1e-9);
    }

    #[test]
    fn ellipsoid_distance_is_symmetric(seed in any::<u64>()) {
        let s = Surface::ellipsoid([0.9, 1.1, 1.05]).unwrap();
        let mut rng = CounterRng::new(seed, 2);
        let p = s.project(rng.next_unit_vector3());
        let q = s.project(rng.next_unit_vector3());
        prop_assume!(norm(sub(p, q)) > 1e-2);
        let d1 = s.distance(p, q);
        prop_assume!(d1.is_ok());
        let d1 = d1.unwrap();
        prop_assume!(d1 < 0.9 * s.inj_lower_bound());
        let d2 = s.distance(q, p).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-9);
        // triangle inequality through a midpoint-ish third point
        let m = s.project(normalize(add(p, q)));
        let via = s.distance(p, m).unwrap() + s.distance(m, q).unwrap();
        prop_assert!(d1 <= via + 1e-9);
    }
}
