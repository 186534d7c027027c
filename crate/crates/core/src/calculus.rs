//! Derivatives of unit fields and the per-point invariants built from them.
//!
//! Ambient derivatives `Dv[Y]` of the 0-homogeneous extension come from dual
//! numbers (default) or central differences. The Levi-Civita derivative on S³
//! is the tangential part of the ambient one, since `⟨Dv[Y], x⟩ = −⟨v, Y⟩`:
//!
//! ```text
//! Dv[Y] = ∇_Y v − ⟨v, Y⟩ x
//! ```

use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::dual::{v4, Dual};
use crate::error::{Error, Result};
use crate::fields::UnitField;
use crate::geom::{dot, norm, SpherePoint, TangentVector};
use crate::quadrature::QuadratureRule;

/// Base central-difference step; scaled by `max(1, ‖x‖)`.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffMode {
    /// Forward-mode dual numbers.
    #[default]
    Ad,
    /// Central differences with [`DEFAULT_FD_STEP`].
    Fd,
}

impl std::fmt::Display for DiffMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DiffMode::Ad => "ad",
            DiffMode::Fd => "fd",
        })
    }
}

static FALLBACK_WARNED: AtomicBool = AtomicBool::new(false);

/// Mode that will actually be used for `v`.
pub fn effective_mode(v: &UnitField, mode: DiffMode) -> DiffMode {
    if mode == DiffMode::Ad && !v.supports_ad() {
        if !FALLBACK_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!(
                "field `{}` has no dual-number evaluator; falling back to finite differences",
                v.label()
            );
        }
        DiffMode::Fd
    } else {
        mode
    }
}

/// Ambient directional derivative `Dv[y]` at `x`.
pub fn directional_derivative(v: &UnitField, x: &[f64; 4], y: &[f64; 4], mode: DiffMode) -> [f64; 4] {
    match effective_mode(v, mode) {
        DiffMode::Ad => {
            let xd: [Dual; 4] = std::array::from_fn(|k| Dual::new(x[k], y[k]));
            let out = v.eval_dual(&xd).expect("checked by effective_mode");
            out.map(|d| d.eps)
        }
        DiffMode::Fd => directional_derivative_fd(v, x, y, DEFAULT_FD_STEP),
    }
}

/// Central difference `(v(x + h·ŷ) − v(x − h·ŷ)) / 2h`, rescaled to `Dv[y]`.
pub fn directional_derivative_fd(v: &UnitField, x: &[f64; 4], y: &[f64; 4], step: f64) -> [f64; 4] {
    let ny = norm(y);
    if ny == 0.0 {
        return [0.0; 4];
    }
    let h = step * norm(x).max(1.0) / ny;
    let fwd = v.eval_ambient(&v4::add(x, &v4::scale(h, y)));
    let bwd = v.eval_ambient(&v4::sub(x, &v4::scale(h, y)));
    v4::scale(0.5 / h, &v4::sub(&fwd, &bwd))
}

/// 4×4 matrix whose k-th column is `Dv[e_k]` for the standard basis of R⁴.
pub fn ambient_jacobian(v: &UnitField, x: &SpherePoint, mode: DiffMode) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for k in 0..4 {
        let mut e = [0.0; 4];
        e[k] = 1.0;
        let col = directional_derivative(v, x.coords(), &e, mode);
        for r in 0..4 {
            m[(r, k)] = col[r];
        }
    }
    m
}

/// `∇_Y v`: the tangential part of `Dv[Y]`.
pub fn covariant_derivative(
    v: &UnitField,
    x: &SpherePoint,
    y: &TangentVector,
    mode: DiffMode,
) -> Result<TangentVector> {
    let drift = y.base().distance(x);
    let inner = dot(y.vector(), x.coords());
    if drift > 1e-12 || inner.abs() > 1e-12 * y.norm().max(1.0) {
        return Err(Error::NotTangent { inner });
    }
    Ok(TangentVector::project(
        *x,
        directional_derivative(v, x.coords(), y.vector(), mode),
    ))
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Ternary cross product: the vector `X` with `⟨X, y⟩ = det[a b c y]` for all `y`.
pub fn cross3(a: &[f64; 4], b: &[f64; 4], c: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| {
        let rows: Vec<usize> = (0..4).filter(|&r| r != i).collect();
        let minor = std::array::from_fn(|r| {
            let row = rows[r];
            [a[row], b[row], c[row]]
        });
        let sign = if (i + 3) % 2 == 0 { 1.0 } else { -1.0 };
        sign * det3(minor)
    })
}

/// Orthonormal `(e1, e2)` completing the unit tangent `v` at `x`.
///
/// `e1` is Gram–Schmidt applied to whichever of `i·x, j·x, k·x` is least
/// aligned with `v` (first index wins ties); `e2` is fixed by
/// `det[x, e1, e2, v] = +1`.
pub fn adapted_frame(x: &SpherePoint, v: &TangentVector) -> (TangentVector, TangentVector) {
    let xc = x.coords();
    let vv = v.vector();
    let candidates = [
        v4::qmul(&[0.0, 1.0, 0.0, 0.0], xc),
        v4::qmul(&[0.0, 0.0, 1.0, 0.0], xc),
        v4::qmul(&[0.0, 0.0, 0.0, 1.0], xc),
    ];
    let mut best = 0;
    let mut best_align = f64::INFINITY;
    for (k, c) in candidates.iter().enumerate() {
        let a = dot(c, vv).abs();
        if a < best_align {
            best = k;
            best_align = a;
        }
    }
    let seed = &candidates[best];
    let e1 = v4::normalize(&v4::sub(seed, &v4::scale(dot(seed, vv), vv)));
    let e2 = v4::scale(-1.0, &cross3(xc, &e1, vv));
    (TangentVector::project(*x, e1), TangentVector::project(*x, e2))
}

/// `‖a ∧ b‖² = ‖a‖²‖b‖² − ⟨a, b⟩²`, clamped at zero.
pub fn wedge_norm_sq(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    (dot(a, a) * dot(b, b) - dot(a, b).powi(2)).max(0.0)
}

/// Everything the functionals need at one point, in an adapted frame `{e1, e2, v}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldJet {
    pub point: SpherePoint,
    pub v: [f64; 4],
    pub e1: [f64; 4],
    pub e2: [f64; 4],
    /// `∇_{e1} v, ∇_{e2} v, ∇_v v`.
    pub nabla: [[f64; 4]; 3],
    /// `h[i][j] = ⟨∇_{e_i} v, e_j⟩`.
    pub h: [[f64; 2]; 2],
    pub sigma1: f64,
    pub sigma2: f64,
    /// `(⟨∇_v v, e1⟩, ⟨∇_v v, e2⟩)`.
    pub accel: [f64; 2],
    pub energy_density: f64,
    pub volume_integrand: f64,
    pub mode: DiffMode,
}

impl FieldJet {
    /// `Σ h_ij²`.
    pub fn h_norm_sq(&self) -> f64 {
        self.h.iter().flatten().map(|x| x * x).sum()
    }

    /// `‖∇v‖² = Σ_a ‖∇_{e_a} v‖²`.
    pub fn gradient_norm_sq(&self) -> f64 {
        self.nabla.iter().map(|n| dot(n, n)).sum()
    }
}

/// The frame-invariant scalars of a jet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JetScalars {
    pub sigma1: f64,
    pub sigma2: f64,
    pub h_norm_sq: f64,
    pub energy_density: f64,
    pub volume_integrand: f64,
}

impl From<&FieldJet> for JetScalars {
    fn from(j: &FieldJet) -> Self {
        Self {
            sigma1: j.sigma1,
            sigma2: j.sigma2,
            h_norm_sq: j.h_norm_sq(),
            energy_density: j.energy_density,
            volume_integrand: j.volume_integrand,
        }
    }
}

/// Jet scalars at every node of `rule`, in node order.
pub fn node_scalars(v: &UnitField, rule: &QuadratureRule, mode: DiffMode) -> Vec<JetScalars> {
    let mode = effective_mode(v, mode);
    rule.map_nodes(|x| JetScalars::from(&field_jet(v, x, mode)))
}

/// Jet at `x` in the canonical adapted frame.
pub fn field_jet(v: &UnitField, x: &SpherePoint, mode: DiffMode) -> FieldJet {
    let value = v.eval(x);
    let (e1, e2) = adapted_frame(x, &value);
    jet_in_frame(v, x, &value, e1.vector(), e2.vector(), mode)
}

/// Jet at `x` in a caller-supplied frame `(e1, e2)` orthonormal to `v(x)`.
pub fn field_jet_in_frame(
    v: &UnitField,
    x: &SpherePoint,
    e1: &TangentVector,
    e2: &TangentVector,
    mode: DiffMode,
) -> FieldJet {
    let value = v.eval(x);
    jet_in_frame(v, x, &value, e1.vector(), e2.vector(), mode)
}

fn jet_in_frame(
    field: &UnitField,
    x: &SpherePoint,
    value: &TangentVector,
    e1: &[f64; 4],
    e2: &[f64; 4],
    mode: DiffMode,
) -> FieldJet {
    let mode = effective_mode(field, mode);
    let v = *value.vector();
    let xc = x.coords();
    let nabla = [e1, e2, &v].map(|dir| {
        let d = directional_derivative(field, xc, dir, mode);
        v4::sub(&d, &v4::scale(dot(&d, xc), xc))
    });
    let h = [
        [dot(&nabla[0], e1), dot(&nabla[0], e2)],
        [dot(&nabla[1], e1), dot(&nabla[1], e2)],
    ];
    let accel = [dot(&nabla[2], e1), dot(&nabla[2], e2)];
    let sigma1 = h[0][0] + h[1][1];
    let sigma2 = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let h_sq: f64 = h.iter().flatten().map(|x| x * x).sum();
    let energy_density = h_sq + accel[0] * accel[0] + accel[1] * accel[1];
    let first: f64 = nabla.iter().map(|n| dot(n, n)).sum();
    let second = wedge_norm_sq(&nabla[0], &nabla[1])
        + wedge_norm_sq(&nabla[0], &nabla[2])
        + wedge_norm_sq(&nabla[1], &nabla[2]);
    FieldJet {
        point: *x,
        v,
        e1: *e1,
        e2: *e2,
        nabla,
        h,
        sigma1,
        sigma2,
        accel,
        energy_density,
        volume_integrand: (1.0 + first + second).sqrt(),
        mode,
    }
}
