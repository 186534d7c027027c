//! The translation map `φ_t(x) = x + t·v(x)` onto the sphere of radius
//! `√(1+t²)`, its Jacobian determinant and the volume of `φ_t(K)`.
//!
//! In the frames `{e1, e2, v}` at `x` and `{e1, e2, u}` at `φ_t(x)`, with
//! `u = (v − t·x)/√(1+t²)`, the Jacobian has rows
//!
//! ```text
//! dφ(e_i) = (δ_i1 + t·h_i1,  δ_i2 + t·h_i2,  0)
//! dφ(v)   = (t·⟨∇_v v, e1⟩,  t·⟨∇_v v, e2⟩,  √(1+t²))
//! ```
//!
//! so `det dφ_t = √(1+t²)·(1 + σ₁t + σ₂t²)`.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::calculus::{
    adapted_frame, directional_derivative, effective_mode, node_scalars, DiffMode, FieldJet,
    JetScalars, DEFAULT_FD_STEP,
};
use crate::dual::v4;
use crate::error::{Error, Result};
use crate::fields::UnitField;
use crate::geom::{dot, SpherePoint};
use crate::quadrature::{Estimate, QuadratureRule};

pub const DEFAULT_T_MAX: f64 = 0.5;
/// Smallest admissible `1 + σ₁t + σ₂t²` at any node.
pub const DEFAULT_DET_FLOOR: f64 = 1e-6;
/// `{0.05, 0.10, …, 0.30}`.
pub const DEFAULT_T_GRID: [f64; 6] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30];

#[derive(Clone, Copy, Debug)]
pub struct PhiParams<'a> {
    t: f64,
    field: &'a UnitField,
}

impl<'a> PhiParams<'a> {
    pub fn new(field: &'a UnitField, t: f64) -> Result<Self> {
        Self::with_t_max(field, t, DEFAULT_T_MAX)
    }

    pub fn with_t_max(field: &'a UnitField, t: f64, t_max: f64) -> Result<Self> {
        if !(t >= 0.0 && t <= t_max) {
            return Err(Error::InvalidStep { t, t_max });
        }
        Ok(Self { t, field })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn field(&self) -> &UnitField {
        self.field
    }

    /// Radius of the image sphere.
    pub fn image_radius(&self) -> f64 {
        (1.0 + self.t * self.t).sqrt()
    }
}

pub fn phi(params: &PhiParams<'_>, x: &SpherePoint) -> [f64; 4] {
    let v = params.field.eval(x);
    v4::lincomb(1.0, x.coords(), params.t, v.vector())
}

/// Unit normal-completing field `u = (v − t·x)/√(1+t²)` on the image sphere.
#[derive(Clone, Copy, Debug)]
pub struct ImageField<'a> {
    params: PhiParams<'a>,
}

pub fn u_field<'a>(params: &PhiParams<'a>) -> ImageField<'a> {
    ImageField { params: *params }
}

impl ImageField<'_> {
    /// `(φ_t(x), u(x))`.
    pub fn eval(&self, x: &SpherePoint) -> ([f64; 4], [f64; 4]) {
        let t = self.params.t;
        let s = self.params.image_radius();
        let v = self.params.field.eval(x);
        (
            v4::lincomb(1.0, x.coords(), t, v.vector()),
            v4::lincomb(1.0 / s, v.vector(), -t / s, x.coords()),
        )
    }
}

/// `√(1+t²)·(1 + σ₁t + σ₂t²)`.
pub fn jacobian_det_analytic(t: f64, jet: &FieldJet) -> f64 {
    det_from_sigmas(t, jet.sigma1, jet.sigma2)
}

fn det_from_sigmas(t: f64, sigma1: f64, sigma2: f64) -> f64 {
    (1.0 + t * t).sqrt() * (1.0 + sigma1 * t + sigma2 * t * t)
}

/// Jacobian of `φ_t` at a point, in the frames `{e1, e2, v} → {e1, e2, u}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiJacobian {
    /// `matrix[a][b] = ⟨dφ(e_a), ē_b⟩`.
    pub matrix: [[f64; 3]; 3],
    pub det: f64,
}

/// Differentiates `φ_t` along the geodesics `s ↦ cos s·x + sin s·e_a` and
/// returns the 3×3 Jacobian with its determinant.
pub fn jacobian_det_numeric(params: &PhiParams<'_>, x: &SpherePoint, mode: DiffMode) -> Result<PhiJacobian> {
    let field = params.field;
    let t = params.t;
    let v = field.eval(x);
    let (e1, e2) = adapted_frame(x, &v);
    let (_, u) = u_field(params).eval(x);
    let src = [*e1.vector(), *e2.vector(), *v.vector()];
    let dst = [*e1.vector(), *e2.vector(), u];
    let mode = effective_mode(field, mode);
    let mut matrix = [[0.0; 3]; 3];
    for (a, dir) in src.iter().enumerate() {
        let dphi = match mode {
            // the geodesic has velocity e_a at s = 0
            DiffMode::Ad => v4::lincomb(
                1.0,
                dir,
                t,
                &directional_derivative(field, x.coords(), dir, DiffMode::Ad),
            ),
            DiffMode::Fd => {
                let h = DEFAULT_FD_STEP;
                let at = |s: f64| {
                    let p = SpherePoint::project(v4::lincomb(s.cos(), x.coords(), s.sin(), dir))
                        .expect("geodesic point");
                    phi(params, &p)
                };
                v4::scale(0.5 / h, &v4::sub(&at(h), &at(-h)))
            }
        };
        for (b, target) in dst.iter().enumerate() {
            matrix[a][b] = dot(&dphi, target);
        }
    }
    let det = Matrix3::from_fn(|r, c| matrix[r][c]).determinant();
    if det <= 0.0 {
        return Err(Error::SingularJacobian { det, t });
    }
    Ok(PhiJacobian { matrix, det })
}

/// `vol φ_t(K) = ∫_K √(1+t²)(1 + σ₁t + σ₂t²)`, refusing steps where the
/// polynomial factor drops below `det_floor` at any node.
pub fn image_volume(
    params: &PhiParams<'_>,
    rule: &QuadratureRule,
    mode: DiffMode,
    det_floor: f64,
) -> Result<Estimate> {
    let scalars = node_scalars(params.field, rule, mode);
    image_volume_from_scalars(params.t, &scalars, rule, det_floor)
}

/// [`image_volume`] from precomputed node scalars.
pub fn image_volume_from_scalars(
    t: f64,
    scalars: &[JetScalars],
    rule: &QuadratureRule,
    det_floor: f64,
) -> Result<Estimate> {
    let mut values = Vec::with_capacity(scalars.len());
    for (index, s) in scalars.iter().enumerate() {
        let poly = 1.0 + s.sigma1 * t + s.sigma2 * t * t;
        if poly <= det_floor {
            return Err(Error::BelowDetFloor {
                index,
                value: poly,
                floor: det_floor,
                t,
            });
        }
        values.push(det_from_sigmas(t, s.sigma1, s.sigma2));
    }
    rule.integrate_values(&values)
}

/// Largest `t` on `grid` (ascending) for which every node stays above the floor.
pub fn admissible_steps(scalars: &[JetScalars], grid: &[f64], det_floor: f64) -> Vec<f64> {
    grid.iter()
        .copied()
        .filter(|&t| {
            scalars
                .iter()
                .all(|s| 1.0 + s.sigma1 * t + s.sigma2 * t * t > det_floor)
        })
        .collect()
}

/// Least-squares coefficients of `c₀ + c₁t + c₂t²` through `(t, y)`.
pub fn fit_quadratic(ts: &[f64], ys: &[f64]) -> Result<[f64; 3]> {
    if ts.len() != ys.len() || ts.len() < 3 {
        return Err(Error::InvalidParameter(
            "quadratic fit needs at least three (t, y) pairs".into(),
        ));
    }
    let a = DMatrix::from_fn(ts.len(), 3, |r, c| ts[r].powi(c as i32));
    let b = DVector::from_column_slice(ys);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok([sol[0], sol[1], sol[2]])
}

/// Coefficients recovered from `vol φ_t(K)/√(1+t²)` over a grid of steps,
/// next to the integrals they should reproduce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFit {
    pub ts: Vec<f64>,
    pub image_volumes: Vec<f64>,
    pub coefficients: [f64; 3],
    pub cap_volume: f64,
    pub sigma1_integral: f64,
    pub sigma2_integral: f64,
}

pub fn polynomial_identity(
    field: &UnitField,
    rule: &QuadratureRule,
    ts: &[f64],
    mode: DiffMode,
    det_floor: f64,
) -> Result<PolynomialFit> {
    let scalars = node_scalars(field, rule, mode);
    let mut image_volumes = Vec::with_capacity(ts.len());
    let mut reduced = Vec::with_capacity(ts.len());
    for &t in ts {
        PhiParams::new(field, t)?;
        let vol = image_volume_from_scalars(t, &scalars, rule, det_floor)?.value;
        image_volumes.push(vol);
        reduced.push(vol / (1.0 + t * t).sqrt());
    }
    let coefficients = fit_quadratic(ts, &reduced)?;
    let s1: Vec<f64> = scalars.iter().map(|s| s.sigma1).collect();
    let s2: Vec<f64> = scalars.iter().map(|s| s.sigma2).collect();
    Ok(PolynomialFit {
        ts: ts.to_vec(),
        image_volumes,
        coefficients,
        cap_volume: rule.cap().volume(),
        sigma1_integral: rule.integrate_values(&s1)?.value,
        sigma2_integral: rule.integrate_values(&s2)?.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::field_jet;
    use crate::fields::{hopf_field, perturbed_field, BumpProfile, HopfFrame, Twist};
    use crate::geom::{norm, CapDomain, Quaternion};
    use crate::quadrature::build_gauss_rule;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hopf() -> UnitField {
        hopf_field(Quaternion::I).unwrap()
    }

    fn perturbed(r: f64, a: f64, m: u32, twist: Twist) -> UnitField {
        let cap = CapDomain::new(SpherePoint::identity(), r).unwrap();
        perturbed_field(&cap, BumpProfile::new(a, m).unwrap(), twist, &HopfFrame::standard()).unwrap()
    }

    #[test]
    fn phi_examples() {
        let h = hopf();
        let x = SpherePoint::identity();
        assert_eq!(phi(&PhiParams::new(&h, 0.0).unwrap(), &x), *x.coords());
        let p = phi(&PhiParams::new(&h, 0.5).unwrap(), &x);
        assert_eq!(p, [1.0, 0.5, 0.0, 0.0]);
        // t = 1 exceeds the default window but is a valid map
        let p = phi(&PhiParams::with_t_max(&h, 1.0, 1.0).unwrap(), &x);
        assert_eq!(p, [1.0, 1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(norm(&p), 2f64.sqrt(), epsilon = 1e-15);
        assert!(PhiParams::new(&h, 0.6).is_err());
        assert!(PhiParams::new(&h, -0.1).is_err());
    }

    #[test]
    fn phi_lands_on_image_sphere_and_u_is_tangent_there() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let f = perturbed(1.0, 0.9, 3, Twist::Angular);
        for _ in 0..1000 {
            let x = SpherePoint::random(&mut rng);
            let t = rng.gen_range(0.0..0.5);
            let params = PhiParams::new(&f, t).unwrap();
            let (image, u) = u_field(&params).eval(&x);
            assert_abs_diff_eq!(dot(&image, &image), 1.0 + t * t, epsilon = 1e-12);
            assert_abs_diff_eq!(dot(&u, &u), 1.0, epsilon = 1e-12);
            assert!(dot(&u, &image).abs() < 1e-12);
        }
    }

    #[test]
    fn numeric_jacobian_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let f = perturbed(1.2, 1.0, 2, Twist::Angular);
        for _ in 0..200 {
            let x = SpherePoint::random(&mut rng);
            let t = rng.gen_range(0.0..0.3);
            let params = PhiParams::new(&f, t).unwrap();
            let jac = jacobian_det_numeric(&params, &x, DiffMode::Ad).unwrap();
            assert!(jac.matrix[0][2].abs() < 1e-8);
            assert!(jac.matrix[1][2].abs() < 1e-8);
            assert_abs_diff_eq!(jac.matrix[2][2], (1.0 + t * t).sqrt(), epsilon = 1e-12);
            let jet = field_jet(&f, &x, DiffMode::Ad);
            assert_abs_diff_eq!(jac.matrix[0][0], 1.0 + t * jet.h[0][0], epsilon = 1e-12);
            assert_abs_diff_eq!(jac.matrix[1][0], t * jet.h[1][0], epsilon = 1e-12);
        }
    }

    #[test]
    fn hopf_determinants() {
        let h = hopf();
        let x = SpherePoint::project([0.2, 0.5, -0.1, 0.7]).unwrap();
        let params = PhiParams::new(&h, 0.2).unwrap();
        let jet = field_jet(&h, &x, DiffMode::Ad);
        assert_abs_diff_eq!(jacobian_det_analytic(0.2, &jet), 1.04f64.powf(1.5), epsilon = 1e-12);
        let num = jacobian_det_numeric(&params, &x, DiffMode::Ad).unwrap();
        assert_abs_diff_eq!(num.det, 1.04f64.powf(1.5), epsilon = 1e-6);
        let num_fd = jacobian_det_numeric(&params, &x, DiffMode::Fd).unwrap();
        assert_abs_diff_eq!(num_fd.det, 1.04f64.powf(1.5), epsilon = 1e-6);
        assert_eq!(jacobian_det_analytic(0.0, &jet), 1.0);
        let at_zero = jacobian_det_numeric(&PhiParams::new(&h, 0.0).unwrap(), &x, DiffMode::Ad).unwrap();
        assert_abs_diff_eq!(at_zero.det, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn analytic_matches_numeric_on_perturbed_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let f = perturbed(1.0, 0.5, 3, Twist::Constant(0.0));
        for _ in 0..200 {
            let x = SpherePoint::random(&mut rng);
            let params = PhiParams::new(&f, 0.1).unwrap();
            let jet = field_jet(&f, &x, DiffMode::Ad);
            let num = jacobian_det_numeric(&params, &x, DiffMode::Fd).unwrap();
            assert_abs_diff_eq!(jacobian_det_analytic(0.1, &jet), num.det, epsilon = 1e-6);
        }
    }

    #[test]
    fn image_volume_of_hopf_field() {
        let h = hopf();
        let rule = build_gauss_rule(&CapDomain::full_sphere(), 16, 8, 8).unwrap();
        for t in [0.0, 0.1, 0.3] {
            let params = PhiParams::new(&h, t).unwrap();
            let vol = image_volume(&params, &rule, DiffMode::Ad, DEFAULT_DET_FLOOR).unwrap().value;
            let want = 2.0 * std::f64::consts::PI.powi(2) * (1.0 + t * t).powf(1.5);
            assert!((vol - want).abs() / want < 1e-12);
        }
    }

    #[test]
    fn image_volume_of_hopf_boundary_field_matches_hopf() {
        let cap = CapDomain::new(SpherePoint::identity(), 1.0).unwrap();
        let f = perturbed(1.0, 0.5, 3, Twist::Constant(0.0));
        let rule = build_gauss_rule(&cap, 48, 24, 48).unwrap();
        for t in [0.1, 0.2, 0.3] {
            let params = PhiParams::new(&f, t).unwrap();
            let vol = image_volume(&params, &rule, DiffMode::Ad, DEFAULT_DET_FLOOR).unwrap().value;
            let want = cap.volume() * (1.0 + t * t).powf(1.5);
            assert!((vol - want).abs() / want < 1e-5, "t={t}: {vol} vs {want}");
        }
    }

    #[test]
    fn det_floor_rejects_large_steps() {
        let cap = CapDomain::new(SpherePoint::identity(), 0.5).unwrap();
        let f = perturbed(0.5, 3.0, 2, Twist::Constant(0.0));
        let rule = build_gauss_rule(&cap, 16, 8, 16).unwrap();
        let params = PhiParams::new(&f, 0.5).unwrap();
        let err = image_volume(&params, &rule, DiffMode::Ad, DEFAULT_DET_FLOOR).unwrap_err();
        assert!(matches!(err, Error::BelowDetFloor { .. }), "{err}");
    }

    #[test]
    fn fit_recovers_exact_quadratic() {
        let ts = DEFAULT_T_GRID;
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 - 0.5 * t + 3.0 * t * t).collect();
        let c = fit_quadratic(&ts, &ys).unwrap();
        assert_abs_diff_eq!(c[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c[1], -0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(c[2], 3.0, epsilon = 1e-8);
        assert!(fit_quadratic(&ts[..2], &ys[..2]).is_err());
    }
}
