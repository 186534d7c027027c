//! Energy and volume of a unit field over a cap `K`, for n = 3:
//!
//! ```text
//! E(v)   = (3/2)·vol(K) + ½ ∫_K ‖∇v‖²
//! vol(v) = ∫_K √(1 + Σ_a ‖∇_{e_a}v‖² + Σ_{a<b} ‖∇_{e_a}v ∧ ∇_{e_b}v‖²)
//! ```
//!
//! Only pairwise wedges appear: the general formula stops at (n−1)-fold
//! products.

use serde::{Deserialize, Serialize};

use crate::calculus::{node_scalars, DiffMode, JetScalars};
use crate::error::Result;
use crate::fields::UnitField;
use crate::quadrature::{QuadratureRule, RuleKind};

/// Which rule produced a value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSummary {
    pub kind: RuleKind,
    pub orders: Option<[usize; 3]>,
    pub seed: Option<u64>,
    pub nodes: usize,
    pub cap_center: [f64; 4],
    pub cap_radius: f64,
}

impl From<&QuadratureRule> for RuleSummary {
    fn from(rule: &QuadratureRule) -> Self {
        Self {
            kind: rule.kind(),
            orders: rule.orders(),
            seed: rule.seed(),
            nodes: rule.len(),
            cap_center: *rule.cap().center().coords(),
            cap_radius: rule.cap().radius(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub value: f64,
    /// `vol(K)` for both functionals.
    pub base_term: f64,
    /// Energy: `∫‖∇v‖²`. Volume: `value − vol(K)`.
    pub derivative_term: f64,
    pub error_estimate: f64,
    pub rule: RuleSummary,
}

/// Every integral over `K` the functionals and checks are assembled from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldIntegrals {
    pub cap_volume: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub energy_density: f64,
    pub volume_integrand: f64,
    /// `½∫(‖∇v‖² − 2σ₂)`, the slack in the energy lower bound.
    pub energy_gap: f64,
    pub min_sigma2: f64,
    pub errors: IntegralErrors,
    pub rule: RuleSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralErrors {
    pub sigma1: f64,
    pub sigma2: f64,
    pub energy_density: f64,
    pub volume_integrand: f64,
    pub energy_gap: f64,
}

impl FieldIntegrals {
    pub fn compute(v: &UnitField, rule: &QuadratureRule, mode: DiffMode) -> Result<Self> {
        let scalars = node_scalars(v, rule, mode);
        Self::from_scalars(&scalars, rule)
    }

    pub fn from_scalars(scalars: &[JetScalars], rule: &QuadratureRule) -> Result<Self> {
        let column = |f: fn(&JetScalars) -> f64| -> Vec<f64> { scalars.iter().map(f).collect() };
        let sigma1 = rule.integrate_values(&column(|s| s.sigma1))?;
        let sigma2 = rule.integrate_values(&column(|s| s.sigma2))?;
        let density = rule.integrate_values(&column(|s| s.energy_density))?;
        let integrand = rule.integrate_values(&column(|s| s.volume_integrand))?;
        let gap = rule.integrate_values(&column(|s| 0.5 * s.energy_density - s.sigma2))?;
        Ok(Self {
            cap_volume: rule.cap().volume(),
            sigma1: sigma1.value,
            sigma2: sigma2.value,
            energy_density: density.value,
            volume_integrand: integrand.value,
            energy_gap: gap.value,
            min_sigma2: scalars.iter().map(|s| s.sigma2).fold(f64::INFINITY, f64::min),
            errors: IntegralErrors {
                sigma1: sigma1.error,
                sigma2: sigma2.error,
                energy_density: density.error,
                volume_integrand: integrand.error,
                energy_gap: gap.error,
            },
            rule: RuleSummary::from(rule),
        })
    }

    pub fn energy(&self) -> FunctionalReport {
        FunctionalReport {
            value: 1.5 * self.cap_volume + 0.5 * self.energy_density,
            base_term: self.cap_volume,
            derivative_term: self.energy_density,
            error_estimate: 0.5 * self.errors.energy_density,
            rule: self.rule.clone(),
        }
    }

    pub fn volume(&self) -> FunctionalReport {
        FunctionalReport {
            value: self.volume_integrand,
            base_term: self.cap_volume,
            derivative_term: self.volume_integrand - self.cap_volume,
            error_estimate: self.errors.volume_integrand,
            rule: self.rule.clone(),
        }
    }

    /// `E(H)` on the same cap: `(5/2)·vol(K)`.
    pub fn hopf_energy(&self) -> f64 {
        2.5 * self.cap_volume
    }

    /// `vol(H)` on the same cap: `2·vol(K)`.
    pub fn hopf_volume(&self) -> f64 {
        2.0 * self.cap_volume
    }

    /// `∫(1 + σ₂)`, a lower bound for the volume when `σ₂ ≥ −1` everywhere.
    pub fn volume_sigma2_bound(&self) -> f64 {
        self.cap_volume + self.sigma2
    }

    /// Mean of `‖∇v‖²` over the cap.
    pub fn mean_energy_density(&self) -> f64 {
        self.energy_density / self.cap_volume
    }
}

pub fn energy(v: &UnitField, rule: &QuadratureRule, mode: DiffMode) -> Result<FunctionalReport> {
    Ok(FieldIntegrals::compute(v, rule, mode)?.energy())
}

pub fn volume(v: &UnitField, rule: &QuadratureRule, mode: DiffMode) -> Result<FunctionalReport> {
    Ok(FieldIntegrals::compute(v, rule, mode)?.volume())
}

/// `E(v) − [(3/2)vol(K) + ∫_K σ₂(v)]`, integrated as one nonnegative density.
pub fn energy_lower_bound_gap(v: &UnitField, rule: &QuadratureRule, mode: DiffMode) -> Result<f64> {
    Ok(FieldIntegrals::compute(v, rule, mode)?.energy_gap)
}
