//! Unit vector fields on S³: Hopf fields, Hopf-boundary perturbations of a
//! Hopf field on a cap, and the radially parallel field on a small cap.
//!
//! Built-in fields are evaluated through one generic routine so that the same
//! code yields values (`f64`) and exact directional derivatives ([`Dual`]).
//! Every evaluator first projects its argument radially onto the sphere, so
//! the ambient extension is 0-homogeneous.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dual::{v4, Dual, Real};
use crate::error::{Error, Result};
use crate::geom::{dot, CapDomain, Quaternion, SpherePoint, TangentVector};

const AXIS_TOL: f64 = 1e-12;

/// Radial bump `f(d) = A·(1 − (d/r)²)^m` on a cap of radius `r`, zero outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub amplitude: f64,
    pub exponent: u32,
}

impl BumpProfile {
    pub fn new(amplitude: f64, exponent: u32) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bump amplitude must be finite, got {amplitude}"
            )));
        }
        if exponent < 2 {
            return Err(Error::InvalidParameter(format!(
                "bump exponent must be at least 2 so the profile is C¹ at the boundary, got {exponent}"
            )));
        }
        Ok(Self {
            amplitude,
            exponent,
        })
    }

    /// Profile in terms of `s = (d/r)²`, valid for `s ≤ 1`.
    #[inline]
    fn of_ratio_sq<T: Real>(&self, s: T) -> T {
        (T::cst(1.0) - s).powi(self.exponent as i32).scale(self.amplitude)
    }

    pub fn value(&self, d: f64, r: f64) -> f64 {
        let s = (d / r).powi(2);
        if s >= 1.0 {
            0.0
        } else {
            self.of_ratio_sq(s)
        }
    }

    /// `df/dd`.
    pub fn slope(&self, d: f64, r: f64) -> f64 {
        let s = (d / r).powi(2);
        if s >= 1.0 {
            0.0
        } else {
            let m = self.exponent as i32;
            -self.amplitude * f64::from(m) * (1.0 - s).powi(m - 1) * 2.0 * d / (r * r)
        }
    }
}

/// Rotation angle of the perturbation inside the plane orthogonal to `H`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Twist {
    /// Fixed angle (0 perturbs toward `E1` only).
    Constant(f64),
    /// Phase along the Hopf fiber through the cap center,
    /// `atan2(⟨x, a·c⟩, ⟨x, c⟩)`; smooth on caps of radius below π/2.
    Angular,
}

impl Default for Twist {
    fn default() -> Self {
        Twist::Constant(0.0)
    }
}

impl fmt::Display for Twist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Twist::Constant(g) if *g == 0.0 => write!(f, "none"),
            Twist::Constant(g) => write!(f, "constant:{g}"),
            Twist::Angular => write!(f, "angular"),
        }
    }
}

impl std::str::FromStr for Twist {
    type Err = Error;

    /// Accepts `none`, `angular`, `constant:g` or a bare angle `g`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let angle = |t: &str| {
            t.parse::<f64>()
                .ok()
                .filter(|g| g.is_finite())
                .map(Twist::Constant)
                .ok_or_else(|| Error::InvalidParameter(format!("unrecognized twist `{s}`")))
        };
        match s {
            "none" => Ok(Twist::Constant(0.0)),
            "angular" => Ok(Twist::Angular),
            _ => angle(s.strip_prefix("constant:").unwrap_or(s)),
        }
    }
}

/// Orthonormal triple of pure quaternions `(a, b, a·b)`; left multiplication
/// by them gives a global orthonormal tangent frame `(a·x, b·x, ab·x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfFrame {
    pub axis: Quaternion,
    pub second: Quaternion,
    pub third: Quaternion,
}

impl HopfFrame {
    pub fn standard() -> Self {
        Self {
            axis: Quaternion::I,
            second: Quaternion::J,
            third: Quaternion::K,
        }
    }

    pub fn new(axis: Quaternion, second: Quaternion) -> Result<Self> {
        for q in [axis, second] {
            if !q.is_unit_imaginary(AXIS_TOL) {
                return Err(Error::InvalidAxis(q.0));
            }
        }
        if dot(&axis.0, &second.0).abs() > AXIS_TOL {
            return Err(Error::InvalidParameter(
                "frame quaternions must be orthogonal".into(),
            ));
        }
        Ok(Self {
            axis,
            second,
            third: axis * second,
        })
    }

    /// Completes `axis` with the normalized part of `j` (or `k`) orthogonal to it.
    pub fn from_axis(axis: Quaternion) -> Result<Self> {
        if !axis.is_unit_imaginary(AXIS_TOL) {
            return Err(Error::InvalidAxis(axis.0));
        }
        let seed = if dot(&axis.0, &Quaternion::J.0).abs() < 0.9 {
            Quaternion::J
        } else {
            Quaternion::K
        };
        let b = v4::sub(&seed.0, &v4::scale(dot(&seed.0, &axis.0), &axis.0));
        Self::new(axis, Quaternion(v4::normalize(&b)))
    }
}

impl Default for HopfFrame {
    fn default() -> Self {
        Self::standard()
    }
}

type CustomEval = Arc<dyn Fn(&[f64; 4]) -> [f64; 4] + Send + Sync>;

#[derive(Clone)]
enum Kind {
    LeftTranslation {
        q: [f64; 4],
    },
    Perturbed {
        center: [f64; 4],
        radius: f64,
        bump: BumpProfile,
        twist: Twist,
        frame: HopfFrame,
    },
    SmallCap {
        center: [f64; 4],
        u0: [f64; 4],
    },
    Isometry {
        inner: Arc<UnitField>,
        left: [f64; 4],
        right: [f64; 4],
    },
    Custom(CustomEval),
}

/// A unit tangent vector field on (a domain of) S³.
#[derive(Clone)]
pub struct UnitField {
    kind: Kind,
    label: String,
    params: Vec<(String, f64)>,
    warnings: Vec<String>,
}

impl fmt::Debug for UnitField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitField")
            .field("label", &self.label)
            .field("params", &self.params)
            .finish()
    }
}

impl UnitField {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Whether forward-mode derivatives are available.
    pub fn supports_ad(&self) -> bool {
        match &self.kind {
            Kind::Custom(_) => false,
            Kind::Isometry { inner, .. } => inner.supports_ad(),
            _ => true,
        }
    }

    /// Field value at a point of the sphere.
    pub fn eval(&self, x: &SpherePoint) -> TangentVector {
        TangentVector::project(*x, self.eval_ambient(x.coords()))
    }

    /// Value of the 0-homogeneous extension at any nonzero `x ∈ R⁴`.
    pub fn eval_ambient(&self, x: &[f64; 4]) -> [f64; 4] {
        match &self.kind {
            Kind::Custom(f) => f(&v4::normalize(x)),
            Kind::Isometry { inner, left, right } => {
                let pulled = pull_back(x, left, right);
                push_forward(&inner.eval_ambient(&pulled), left, right)
            }
            kind => eval_builtin(kind, x),
        }
    }

    /// Dual-number evaluation; `None` when the field has no analytic evaluator.
    pub fn eval_dual(&self, x: &[Dual; 4]) -> Option<[Dual; 4]> {
        match &self.kind {
            Kind::Custom(_) => None,
            Kind::Isometry { inner, left, right } => {
                let pulled = pull_back(x, left, right);
                inner
                    .eval_dual(&pulled)
                    .map(|v| push_forward(&v, left, right))
            }
            kind => Some(eval_builtin(kind, x)),
        }
    }

    /// True when the field coincides with a Hopf field (left translation by
    /// a unit imaginary quaternion) on the boundary of `cap`.
    pub fn is_hopf_on_boundary(&self, cap: &CapDomain) -> bool {
        match &self.kind {
            Kind::LeftTranslation { .. } => true,
            Kind::Perturbed { center, radius, .. } => {
                // equals H outside its own cap, so any cap containing it qualifies
                CapDomain::new(SpherePoint::project(*center).expect("unit center"), *radius)
                    .map(|own| own.is_within(cap))
                    .unwrap_or(false)
            }
            Kind::Isometry { inner, left, right } => {
                let back = cap.transformed(
                    &Quaternion(v4::conj(left)),
                    &Quaternion(v4::conj(right)),
                );
                inner.is_hopf_on_boundary(&back)
            }
            Kind::SmallCap { .. } | Kind::Custom(_) => false,
        }
    }

    /// Push the field forward by the isometry `x ↦ left·x·right` (unit quaternions).
    pub fn transformed(&self, left: &Quaternion, right: &Quaternion) -> Result<UnitField> {
        for q in [left, right] {
            if (q.norm() - 1.0).abs() > AXIS_TOL {
                return Err(Error::NotUnit { norm: q.norm() });
            }
        }
        let mut params = self.params.clone();
        params.extend(
            (0..4).map(|k| (format!("left{k}"), left.0[k])).chain(
                (0..4).map(|k| (format!("right{k}"), right.0[k])),
            ),
        );
        Ok(UnitField {
            kind: Kind::Isometry {
                inner: Arc::new(self.clone()),
                left: left.0,
                right: right.0,
            },
            label: format!("isometry({})", self.label),
            params,
            warnings: self.warnings.clone(),
        })
    }

    /// Field from an arbitrary evaluator. Derivatives fall back to finite differences.
    pub fn from_fn<F>(label: impl Into<String>, f: F) -> UnitField
    where
        F: Fn(&[f64; 4]) -> [f64; 4] + Send + Sync + 'static,
    {
        UnitField {
            kind: Kind::Custom(Arc::new(f)),
            label: label.into(),
            params: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

fn pull_back<T: Real>(x: &[T; 4], left: &[f64; 4], right: &[f64; 4]) -> [T; 4] {
    let lc = v4::lift::<T>(&v4::conj(left));
    let rc = v4::lift::<T>(&v4::conj(right));
    v4::qmul(&v4::qmul(&lc, &v4::normalize(x)), &rc)
}

fn push_forward<T: Real>(v: &[T; 4], left: &[f64; 4], right: &[f64; 4]) -> [T; 4] {
    v4::qmul(&v4::qmul(&v4::lift::<T>(left), v), &v4::lift::<T>(right))
}

fn eval_builtin<T: Real>(kind: &Kind, x: &[T; 4]) -> [T; 4] {
    let x = v4::normalize(x);
    match kind {
        Kind::LeftTranslation { q } => v4::qmul(&v4::lift(q), &x),
        Kind::Perturbed {
            center,
            radius,
            bump,
            twist,
            frame,
        } => {
            let h = v4::qmul(&v4::lift(&frame.axis.0), &x);
            let c = v4::lift::<T>(center);
            let along = v4::dot(&x, &c);
            let perp = v4::sub(&x, &v4::scale(along, &c));
            let perp2 = v4::dot(&perp, &perp);
            // (d/r)²; the gradient of d² vanishes at the center
            let ratio_sq = if perp2.re() == 0.0 {
                T::cst(0.0)
            } else {
                let d = perp2.sqrt().atan2(along);
                (d * d).scale(1.0 / (radius * radius))
            };
            if ratio_sq.re() >= 1.0 {
                return h;
            }
            let f = bump.of_ratio_sq(ratio_sq);
            let g = match twist {
                Twist::Constant(g) => T::cst(*g),
                Twist::Angular => {
                    let ac = v4::lift::<T>(&v4::qmul(&frame.axis.0, center));
                    v4::dot(&x, &ac).atan2(along)
                }
            };
            let e1 = v4::qmul(&v4::lift(&frame.second.0), &x);
            let e2 = v4::qmul(&v4::lift(&frame.third.0), &x);
            let w = v4::lincomb(g.cos(), &e1, g.sin(), &e2);
            v4::lincomb(f.cos(), &h, f.sin(), &w)
        }
        Kind::SmallCap { center, u0 } => {
            // parallel transport of u0 along the radial geodesic from the center
            let p = v4::lift::<T>(center);
            let u = v4::lift::<T>(u0);
            let k = v4::dot(&u, &x) / (T::cst(1.0) + v4::dot(&x, &p));
            v4::sub(&u, &v4::scale(k, &v4::add(&x, &p)))
        }
        Kind::Isometry { .. } | Kind::Custom(_) => {
            unreachable!("handled by the caller")
        }
    }
}

/// Hopf field `x ↦ axis·x`.
pub fn hopf_field(axis: Quaternion) -> Result<UnitField> {
    if !axis.is_unit_imaginary(AXIS_TOL) {
        return Err(Error::InvalidAxis(axis.0));
    }
    Ok(left_translation("hopf", axis))
}

fn left_translation(label: &str, q: Quaternion) -> UnitField {
    UnitField {
        kind: Kind::LeftTranslation { q: q.0 },
        label: label.to_string(),
        params: vec![
            ("axis_i".into(), q.0[1]),
            ("axis_j".into(), q.0[2]),
            ("axis_k".into(), q.0[3]),
        ],
        warnings: Vec::new(),
    }
}

/// The global orthonormal frame `(H, E1, E2) = (a·x, b·x, ab·x)`.
pub fn hopf_frame(frame: &HopfFrame) -> (UnitField, UnitField, UnitField) {
    (
        left_translation("hopf", frame.axis),
        left_translation("frame-e1", frame.second),
        left_translation("frame-e2", frame.third),
    )
}

/// `v = cos f·H + sin f·(cos g·E1 + sin g·E2)` with the radial bump `f`
/// supported in `cap`; equals `H` on the boundary and outside.
pub fn perturbed_field(
    cap: &CapDomain,
    bump: BumpProfile,
    twist: Twist,
    frame: &HopfFrame,
) -> Result<UnitField> {
    if matches!(twist, Twist::Angular) && cap.radius() >= FRAC_PI_2 {
        return Err(Error::InvalidParameter(format!(
            "angular twist is singular at distance π/2 from the center; cap radius {} too large",
            cap.radius()
        )));
    }
    let mut warnings = Vec::new();
    if bump.amplitude.abs() >= PI {
        let msg = format!(
            "amplitude {} reaches π: the field reverses against H inside the cap",
            bump.amplitude
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let twist_param = match twist {
        Twist::Constant(g) => ("twist".to_string(), g),
        Twist::Angular => ("angular_twist".to_string(), 1.0),
    };
    let c = cap.center().coords();
    Ok(UnitField {
        kind: Kind::Perturbed {
            center: *c,
            radius: cap.radius(),
            bump,
            twist,
            frame: *frame,
        },
        label: "perturbed".into(),
        params: vec![
            ("amplitude".into(), bump.amplitude),
            ("exponent".into(), f64::from(bump.exponent)),
            twist_param,
            ("radius".into(), cap.radius()),
            ("center0".into(), c[0]),
            ("center1".into(), c[1]),
            ("center2".into(), c[2]),
            ("center3".into(), c[3]),
        ],
        warnings,
    })
}

/// Radial parallel extension of `u0` from the cap center; nearly parallel on small caps.
pub fn small_cap_field(cap: &CapDomain, u0: &TangentVector) -> Result<UnitField> {
    if cap.is_full_sphere() {
        return Err(Error::InvalidParameter(
            "radial parallel field is undefined at the cut locus; radius must be below π".into(),
        ));
    }
    if u0.base().distance(cap.center()) > 1e-12 {
        return Err(Error::InvalidParameter(
            "u0 must be attached at the cap center".into(),
        ));
    }
    let n = u0.norm();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnit { norm: n });
    }
    Ok(UnitField {
        kind: Kind::SmallCap {
            center: *cap.center().coords(),
            u0: *u0.vector(),
        },
        label: "small-cap".into(),
        params: vec![("radius".into(), cap.radius())],
        warnings: Vec::new(),
    })
}
