//! The unit 3-sphere as unit quaternions in R⁴: points, tangent vectors,
//! great-circle geodesics, parallel transport and geodesic caps.

use std::f64::consts::PI;
use std::ops::Mul;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dual::v4;
use crate::error::{Error, Result};

/// Largest norm drift a point may carry before construction refuses to renormalize it.
pub const DRIFT_GUARD: f64 = 1e-9;

/// Closure tolerance for cap membership tests.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    v4::dot(a, b)
}

#[inline]
pub fn norm(a: &[f64; 4]) -> f64 {
    v4::norm(a)
}

/// Quaternion `w + i·i + j·j + k·k`, stored as `[w, i, j, k]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quaternion(pub [f64; 4]);

impl Quaternion {
    pub const ONE: Quaternion = Quaternion([1.0, 0.0, 0.0, 0.0]);
    pub const I: Quaternion = Quaternion([0.0, 1.0, 0.0, 0.0]);
    pub const J: Quaternion = Quaternion([0.0, 0.0, 1.0, 0.0]);
    pub const K: Quaternion = Quaternion([0.0, 0.0, 0.0, 1.0]);

    pub fn new(w: f64, i: f64, j: f64, k: f64) -> Self {
        Self([w, i, j, k])
    }

    pub fn conj(&self) -> Self {
        Self(v4::conj(&self.0))
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_unit_imaginary(&self, tol: f64) -> bool {
        self.0[0].abs() <= tol && (self.norm() - 1.0).abs() <= tol
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

/// Hamilton product.
pub fn quat_mul(p: &Quaternion, q: &Quaternion) -> Quaternion {
    Quaternion(v4::qmul(&p.0, &q.0))
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        quat_mul(&self, &rhs)
    }
}

/// A point of S³ ⊂ R⁴.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct SpherePoint([f64; 4]);

impl SpherePoint {
    /// Renormalizes `x`, refusing inputs whose norm drifted more than [`DRIFT_GUARD`].
    pub fn new(x: [f64; 4]) -> Result<Self> {
        let n = norm(&x);
        if !n.is_finite() || (n - 1.0).abs() > DRIFT_GUARD {
            return Err(Error::OffSphere { norm: n });
        }
        Ok(Self(v4::scale(1.0 / n, &x)))
    }

    /// Radial projection of any nonzero vector onto the sphere.
    pub fn project(x: [f64; 4]) -> Result<Self> {
        let n = norm(&x);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::OffSphere { norm: n });
        }
        Ok(Self(v4::scale(1.0 / n, &x)))
    }

    pub const fn identity() -> Self {
        Self([1.0, 0.0, 0.0, 0.0])
    }

    /// Uniformly distributed point (rejection from the unit ball).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let x = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n2 = dot(&x, &x);
            if n2 > 1e-6 && n2 <= 1.0 {
                return Self(v4::scale(1.0 / n2.sqrt(), &x));
            }
        }
    }

    #[inline]
    pub fn coords(&self) -> &[f64; 4] {
        &self.0
    }

    pub fn as_quaternion(&self) -> Quaternion {
        Quaternion(self.0)
    }

    pub fn antipode(&self) -> Self {
        Self(v4::scale(-1.0, &self.0))
    }

    /// Great-circle distance in [0, π].
    pub fn distance(&self, other: &SpherePoint) -> f64 {
        let c = dot(&self.0, &other.0);
        let perp = v4::sub(&other.0, &v4::scale(c, &self.0));
        norm(&perp).atan2(c)
    }
}

impl TryFrom<[f64; 4]> for SpherePoint {
    type Error = Error;
    /// Validates without rescaling, so serialized points round-trip bit for bit.
    fn try_from(x: [f64; 4]) -> Result<Self> {
        let n = norm(&x);
        if !n.is_finite() || (n - 1.0).abs() > DRIFT_GUARD {
            return Err(Error::OffSphere { norm: n });
        }
        Ok(Self(x))
    }
}

impl From<SpherePoint> for [f64; 4] {
    fn from(p: SpherePoint) -> Self {
        p.0
    }
}

/// A vector of R⁴ orthogonal to its base point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    base: SpherePoint,
    w: [f64; 4],
}

impl TangentVector {
    /// Projects out the normal component when it is below [`DRIFT_GUARD`]
    /// (relative to `‖w‖`), rejects otherwise.
    pub fn new(base: SpherePoint, w: [f64; 4]) -> Result<Self> {
        let inner = dot(&w, base.coords());
        if !inner.is_finite() || inner.abs() > DRIFT_GUARD * norm(&w).max(1.0) {
            return Err(Error::NotTangent { inner });
        }
        Ok(Self::project(base, w))
    }

    /// Orthogonal projection of `w` onto the tangent space at `base`.
    pub fn project(base: SpherePoint, w: [f64; 4]) -> Self {
        let inner = dot(&w, base.coords());
        Self {
            base,
            w: v4::sub(&w, &v4::scale(inner, base.coords())),
        }
    }

    /// Uniformly distributed unit tangent vector at `base`.
    pub fn random_unit<R: Rng + ?Sized>(base: SpherePoint, rng: &mut R) -> Self {
        loop {
            let y = SpherePoint::random(rng);
            let t = Self::project(base, *y.coords());
            let n = t.norm();
            if n > 1e-3 {
                return Self {
                    base,
                    w: v4::scale(1.0 / n, &t.w),
                };
            }
        }
    }

    #[inline]
    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    #[inline]
    pub fn vector(&self) -> &[f64; 4] {
        &self.w
    }

    pub fn norm(&self) -> f64 {
        norm(&self.w)
    }

    pub fn dot(&self, other: &TangentVector) -> f64 {
        dot(&self.w, &other.w)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            base: self.base,
            w: v4::scale(k, &self.w),
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::NotUnit { norm: n });
        }
        Ok(self.scaled(1.0 / n))
    }

    fn require_unit(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > DRIFT_GUARD {
            return Err(Error::NotUnit { norm: n });
        }
        Ok(())
    }
}

/// Point reached after geodesic time `rho` from `p` in unit direction `w`.
pub fn exp_map(p: &SpherePoint, w: &TangentVector, rho: f64) -> Result<SpherePoint> {
    w.require_unit()?;
    let (s, c) = rho.sin_cos();
    SpherePoint::project(v4::lincomb(c, p.coords(), s, w.vector()))
}

/// Parallel transport of `u0 ∈ T_pS³` along the geodesic `exp_map(p, w, ·)` for time `rho`.
///
/// The component along `w` rotates in the plane `{p, w}`; the part normal to
/// that plane is carried unchanged.
pub fn parallel_transport(
    p: &SpherePoint,
    w: &TangentVector,
    u0: &TangentVector,
    rho: f64,
) -> Result<TangentVector> {
    w.require_unit()?;
    let a = w.dot(u0);
    let normal = v4::sub(u0.vector(), &v4::scale(a, w.vector()));
    let (s, c) = rho.sin_cos();
    let moved = v4::lincomb(-s, p.coords(), c, w.vector());
    let end = exp_map(p, w, rho)?;
    Ok(TangentVector::project(
        end,
        v4::add(&v4::scale(a, &moved), &normal),
    ))
}

/// Velocity of the geodesic `exp_map(p, w, ·)` at time `rho`.
pub fn geodesic_velocity(p: &SpherePoint, w: &TangentVector, rho: f64) -> Result<TangentVector> {
    let end = exp_map(p, w, rho)?;
    let (s, c) = rho.sin_cos();
    Ok(TangentVector::project(
        end,
        v4::lincomb(-s, p.coords(), c, w.vector()),
    ))
}

/// Closed geodesic ball `{x : d(x, center) ≤ radius}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapDomain {
    center: SpherePoint,
    radius: f64,
}

impl CapDomain {
    pub fn new(center: SpherePoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= PI) {
            return Err(Error::InvalidRadius(radius));
        }
        Ok(Self { center, radius })
    }

    /// The whole sphere (minus the antipode of the identity).
    pub fn full_sphere() -> Self {
        Self {
            center: SpherePoint::identity(),
            radius: PI,
        }
    }

    #[inline]
    pub fn center(&self) -> &SpherePoint {
        &self.center
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_full_sphere(&self) -> bool {
        self.radius >= PI
    }

    pub fn volume(&self) -> f64 {
        cap_volume(self)
    }

    /// Membership in the closed cap, together with the geodesic distance to the center.
    pub fn contains(&self, x: &SpherePoint) -> (bool, f64) {
        let d = self.center.distance(x);
        (d <= self.radius + BOUNDARY_TOL, d)
    }

    /// `self ⊆ other`.
    pub fn is_within(&self, other: &CapDomain) -> bool {
        other.is_full_sphere()
            || self.center.distance(&other.center) + self.radius <= other.radius + BOUNDARY_TOL
    }

    /// Image of the cap under the isometry `x ↦ left·x·right`.
    pub fn transformed(&self, left: &Quaternion, right: &Quaternion) -> Self {
        let c = v4::qmul(&v4::qmul(&left.0, self.center.coords()), &right.0);
        Self {
            center: SpherePoint(v4::normalize(&c)),
            radius: self.radius,
        }
    }
}

/// Volume of a geodesic ball of radius `r` in the unit 3-sphere: `2πr − π·sin(2r)`.
pub fn cap_volume(cap: &CapDomain) -> f64 {
    let r = cap.radius;
    2.0 * PI * r - PI * (2.0 * r).sin()
}
