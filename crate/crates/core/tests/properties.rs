mod common;

use std::f64::consts::PI;

use common::*;
use hopf_rigidity::calculus::{covariant_derivative, field_jet, field_jet_in_frame, node_scalars, DiffMode};
use hopf_rigidity::dual::v4;
use hopf_rigidity::fields::{hopf_field, Twist};
use hopf_rigidity::functionals::FieldIntegrals;
use hopf_rigidity::geom::{
    cap_volume, dot, exp_map, geodesic_velocity, norm, parallel_transport, CapDomain, Quaternion, SpherePoint,
    TangentVector,
};
use hopf_rigidity::phimap::{jacobian_det_analytic, jacobian_det_numeric, PhiParams};
use hopf_rigidity::quadrature::build_gauss_rule;
use hopf_rigidity::verify::small_cap_counterexample_field;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit4() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0..1.0f64).prop_filter("nonzero", |x| norm(x) > 1e-3)
}

fn point() -> impl Strategy<Value = SpherePoint> {
    unit4().prop_map(|x| SpherePoint::project(x).unwrap())
}

/// A point and a random unit tangent vector there.
fn point_and_direction() -> impl Strategy<Value = (SpherePoint, TangentVector)> {
    (point(), any::<u64>()).prop_map(|(p, seed)| {
        let w = TangentVector::random_unit(p, &mut ChaCha8Rng::seed_from_u64(seed));
        (p, w)
    })
}

fn quaternion() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-2.0..2.0f64).prop_map(Quaternion)
}

fn unit_quaternion() -> impl Strategy<Value = Quaternion> {
    unit4().prop_map(|x| Quaternion(v4::normalize(&x)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quaternion_product_is_associative_and_multiplicative(p in quaternion(), q in quaternion(), r in quaternion()) {
        let a = (p * q) * r;
        let b = p * (q * r);
        for k in 0..4 {
            prop_assert!((a.0[k] - b.0[k]).abs() <= 1e-12 * (1.0 + p.norm() * q.norm() * r.norm()));
        }
        prop_assert!(((p * q).norm() - p.norm() * q.norm()).abs() <= 1e-12 * (1.0 + p.norm() * q.norm()));
    }

    #[test]
    fn exp_map_composes_along_the_geodesic(
        (p, w) in point_and_direction(),
        r1 in -4.0..4.0f64,
        r2 in -4.0..4.0f64,
    ) {
        let direct = exp_map(&p, &w, r1 + r2).unwrap();
        let mid = exp_map(&p, &w, r1).unwrap();
        let w1 = geodesic_velocity(&p, &w, r1).unwrap();
        let two_step = exp_map(&mid, &w1, r2).unwrap();
        prop_assert!(norm(&v4::sub(direct.coords(), two_step.coords())) <= 1e-10);
    }

    #[test]
    fn parallel_transport_preserves_inner_products(
        (p, w) in point_and_direction(),
        seed in any::<u64>(),
        rho in 0.0..PI,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = TangentVector::random_unit(p, &mut rng).scaled(1.7);
        let b = TangentVector::random_unit(p, &mut rng);
        let ta = parallel_transport(&p, &w, &a, rho).unwrap();
        let tb = parallel_transport(&p, &w, &b, rho).unwrap();
        prop_assert!((ta.dot(&tb) - a.dot(&b)).abs() <= 1e-10);
        prop_assert!((ta.norm() - a.norm()).abs() <= 1e-10);
        prop_assert!(dot(ta.vector(), ta.base().coords()).abs() <= 1e-12);
    }

    #[test]
    fn cap_volume_is_increasing(r in 1e-3..PI, dr in 1e-6..0.5f64) {
        let c = SpherePoint::identity();
        let r2 = (r + dr).min(PI);
        prop_assume!(r2 > r);
        let a = cap_volume(&CapDomain::new(c, r).unwrap());
        let b = cap_volume(&CapDomain::new(c, r2).unwrap());
        prop_assert!(b > a);
    }

    #[test]
    fn perturbed_field_is_lipschitz_in_amplitude(
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        m in 2u32..5,
        twist_angle in -3.0..3.0f64,
        angular in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let cap = cap_at([0.3, -0.5, 0.7, 0.4], 1.2);
        let twist = if angular { Twist::Angular } else { Twist::Constant(twist_angle) };
        let fa = perturbed(&cap, a, m, twist);
        let fb = perturbed(&cap, b, m, twist);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..64 {
            let x = point_near(cap.center(), 1.3, &mut rng);
            let d = norm(&v4::sub(fa.eval(&x).vector(), fb.eval(&x).vector()));
            prop_assert!(d <= (a - b).abs() + 1e-14);
        }
    }

    #[test]
    fn small_cap_field_is_parallel_along_radii((c, w) in point_and_direction(), rho in 0.0..1.5f64) {
        let (_, v) = small_cap_counterexample_field(&c, 1.5).unwrap();
        let x = exp_map(&c, &w, rho).unwrap();
        let radial = geodesic_velocity(&c, &w, rho).unwrap();
        let d = covariant_derivative(&v, &x, &radial, DiffMode::Ad).unwrap();
        prop_assert!(d.norm() <= 1e-12);
    }

    #[test]
    fn jet_scalars_do_not_depend_on_the_frame(
        index in 0usize..32,
        seed in any::<u64>(),
        theta in -PI..PI,
        flip in any::<bool>(),
    ) {
        let fields = builtin_fields();
        let s = &fields[index % fields.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = point_near(s.cap.center(), s.cap.radius(), &mut rng);
        let base = field_jet(&s.field, &x, DiffMode::Ad);
        let (sn, cs) = theta.sin_cos();
        let sign = if flip { -1.0 } else { 1.0 };
        let e1 = v4::lincomb(cs, &base.e1, sn, &base.e2);
        let e2 = v4::lincomb(-sn * sign, &base.e1, cs * sign, &base.e2);
        let rotated = field_jet_in_frame(
            &s.field,
            &x,
            &TangentVector::project(x, e1),
            &TangentVector::project(x, e2),
            DiffMode::Ad,
        );
        let scale = 1.0 + base.energy_density;
        prop_assert!((rotated.sigma1 - base.sigma1).abs() <= 1e-10 * scale, "{}", s.name);
        prop_assert!((rotated.sigma2 - base.sigma2).abs() <= 1e-10 * scale, "{}", s.name);
        prop_assert!((rotated.energy_density - base.energy_density).abs() <= 1e-10 * scale, "{}", s.name);
        prop_assert!((rotated.volume_integrand - base.volume_integrand).abs() <= 1e-10 * scale, "{}", s.name);
    }

    #[test]
    fn hopf_h_is_a_rotation_generator_in_every_frame(
        axis in unit4(),
        x in point(),
        theta in -PI..PI,
        flip in any::<bool>(),
    ) {
        let axis = Quaternion(v4::normalize(&[0.0, axis[1], axis[2], axis[3]]));
        prop_assume!(axis.0.iter().all(|c| c.is_finite()));
        let h = hopf_field(axis).unwrap();
        let base = field_jet(&h, &x, DiffMode::Ad);
        let (sn, cs) = theta.sin_cos();
        let sign = if flip { -1.0 } else { 1.0 };
        let e1 = TangentVector::project(x, v4::lincomb(cs, &base.e1, sn, &base.e2));
        let e2 = TangentVector::project(x, v4::lincomb(-sn * sign, &base.e1, cs * sign, &base.e2));
        let j = field_jet_in_frame(&h, &x, &e1, &e2, DiffMode::Ad);
        prop_assert!(j.h[0][0].abs() <= 1e-12 && j.h[1][1].abs() <= 1e-12);
        prop_assert!((j.h[0][1] + j.h[1][0]).abs() <= 1e-12);
        prop_assert!((j.h[0][1] * j.h[1][0] + 1.0).abs() <= 1e-12);
        prop_assert!((j.sigma2 - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn jacobian_determinants_agree(index in 0usize..32, seed in any::<u64>(), t in 0.0..0.3f64) {
        let fields = builtin_fields();
        let s = &fields[index % fields.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = point_near(s.cap.center(), s.cap.radius(), &mut rng);
        let params = PhiParams::new(&s.field, t).unwrap();
        let jet = field_jet(&s.field, &x, DiffMode::Ad);
        let analytic = jacobian_det_analytic(t, &jet);
        let numeric = jacobian_det_numeric(&params, &x, DiffMode::Ad).unwrap().det;
        prop_assert!((analytic - numeric).abs() <= 1e-6 * analytic.abs(), "{}: {analytic} vs {numeric}", s.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn functionals_are_isometry_invariant(left in unit_quaternion(), right in unit_quaternion(), a in 0.2..1.2f64) {
        let cap = cap_at([0.3, -0.5, 0.7, 0.4], 1.0);
        let f = perturbed(&cap, a, 3, Twist::Angular);
        let g = f.transformed(&left, &right).unwrap();
        let moved = cap.transformed(&left, &right);
        let before = FieldIntegrals::compute(&f, &build_gauss_rule(&cap, 48, 24, 48).unwrap(), DiffMode::Ad).unwrap();
        let after = FieldIntegrals::compute(&g, &build_gauss_rule(&moved, 48, 24, 48).unwrap(), DiffMode::Ad).unwrap();
        let (e0, e1) = (before.energy().value, after.energy().value);
        let (v0, v1) = (before.volume().value, after.volume().value);
        prop_assert!((e0 - e1).abs() <= 1e-9 * e0, "{e0} vs {e1}");
        prop_assert!((v0 - v1).abs() <= 1e-9 * v0, "{v0} vs {v1}");
    }

    #[test]
    fn hopf_boundary_fields_obey_both_bounds(
        r in 0.5..2.0f64,
        a in -1.5..1.5f64,
        m in 2u32..4,
        g in -3.0..3.0f64,
        center in unit4(),
    ) {
        let cap = CapDomain::new(SpherePoint::project(center).unwrap(), r).unwrap();
        let twist = if r < 1.4 { Twist::Angular } else { Twist::Constant(g) };
        let f = perturbed(&cap, a, m, twist);
        let fi = FieldIntegrals::compute(&f, &build_gauss_rule(&cap, 64, 32, 64).unwrap(), DiffMode::Ad).unwrap();
        let slack = 1e-6 * fi.cap_volume;
        prop_assert!(fi.energy().value - fi.hopf_energy() >= -slack);
        prop_assert!(fi.volume().value - fi.hopf_volume() >= -slack);
        prop_assert!(fi.energy().value >= 1.5 * fi.cap_volume);
        prop_assert!(fi.volume().value >= fi.cap_volume);
        prop_assert!(fi.energy_gap >= -1e-8);
    }

    #[test]
    fn small_caps_beat_hopf(r in 0.01..0.2f64, center in unit4()) {
        let c = SpherePoint::project(center).unwrap();
        let (cap, v) = small_cap_counterexample_field(&c, r).unwrap();
        let fi = FieldIntegrals::compute(&v, &build_gauss_rule(&cap, 16, 8, 16).unwrap(), DiffMode::Ad).unwrap();
        prop_assert!(fi.energy().value < fi.hopf_energy());
        prop_assert!(fi.volume().value < fi.hopf_volume());
    }
}

#[test]
fn every_builtin_field_is_unit_and_tangent() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let points = uniform_points(100_000, &mut rng);
    for s in builtin_fields() {
        // half the points concentrated where the field departs from its far-field value
        let near: Vec<SpherePoint> = (0..50_000).map(|_| point_near(s.cap.center(), s.cap.radius(), &mut rng)).collect();
        for x in points.iter().chain(&near) {
            let v = s.field.eval_ambient(x.coords());
            assert!((norm(&v) - 1.0).abs() <= 1e-10, "{}: |v| = {}", s.name, norm(&v));
            assert!(dot(&v, x.coords()).abs() <= 1e-10, "{}", s.name);
        }
    }
}

#[test]
fn pointwise_links_of_the_inequality_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in builtin_fields() {
        for _ in 0..10_000 {
            let x = point_near(s.cap.center(), s.cap.radius(), &mut rng);
            let j = field_jet(&s.field, &x, DiffMode::Ad);
            let tol = 1e-12 * (1.0 + j.energy_density);
            assert!(j.energy_density >= 2.0 * j.sigma2 - tol, "{}", s.name);
            if j.sigma2 >= -1.0 {
                assert!(j.volume_integrand >= 1.0 + j.sigma2 - tol, "{}", s.name);
            }
            for n in &j.nabla {
                assert!(dot(n, &j.v).abs() <= 1e-10 * (1.0 + norm(n)), "{}", s.name);
            }
        }
    }
}

/// Smallest `1 + σ₁t + σ₂t²` over the nodes of a coarse rule, and the largest `‖h‖`.
fn det_factor_extremes(s: &Sample, t: f64) -> (f64, f64) {
    let rule = build_gauss_rule(&s.cap, 24, 12, 24).unwrap();
    node_scalars(&s.field, &rule, DiffMode::Ad)
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), q| {
            (lo.min(1.0 + q.sigma1 * t + q.sigma2 * t * t), hi.max(q.h_norm_sq.sqrt()))
        })
}

#[test]
fn phi_is_orientation_preserving_while_t_times_gradient_is_below_one() {
    for s in builtin_fields() {
        for t in [0.05, 0.1, 0.15, 0.2, 0.25, 0.3] {
            let (min, h_max) = det_factor_extremes(&s, t);
            if t * h_max < 1.0 {
                assert!(min > 0.0, "{} at t = {t}: {min}", s.name);
            }
        }
    }
}

#[test]
fn phi_stays_orientation_preserving_up_to_t_0_3_on_caps_of_radius_one_and_more() {
    for s in builtin_fields().iter().filter(|s| s.cap.radius() >= 1.0 && !s.name.starts_with("small-cap")) {
        for t in [0.05, 0.1, 0.15, 0.2, 0.25, 0.3] {
            let (min, _) = det_factor_extremes(s, t);
            assert!(min > 0.0, "{} at t = {t}: {min}", s.name);
        }
    }
}

#[test]
fn steep_bumps_leave_the_window_before_t_0_3() {
    let cap = cap_at([1.0, 0.0, 0.0, 0.0], 0.5);
    let s = Sample {
        name: "steep".into(),
        cap,
        field: perturbed(&cap, 1.2, 2, Twist::Constant(0.0)),
    };
    assert!(det_factor_extremes(&s, 0.25).0 > 0.0);
    assert!(det_factor_extremes(&s, 0.3).0 < 0.0);
}
