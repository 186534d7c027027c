//! Tolerance-bearing checks of the rigidity argument on caps, the
//! constrained-minimization sweep and the small-cap counterexample.
//!
//! For a unit field `v` that equals a Hopf field on `∂K` the chain is
//!
//! ```text
//! vol φ_t(K) = √(1+t²)·∫_K (1 + σ₁t + σ₂t²) = vol(K)·(1+t²)^{3/2}
//!   ⇒ ∫_K σ₁ = 0,  ∫_K σ₂ = vol(K)
//!   ⇒ E(v) ≥ (3/2)vol(K) + ∫_K σ₂ = E(H),   vol(v) ≥ ∫_K (1 + σ₂) = vol(H)
//! ```
//!
//! Every link is a [`CheckReport`].

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::calculus::{effective_mode, field_jet, node_scalars, DiffMode, JetScalars};
use crate::dual::v4;
use crate::error::{Error, Result};
use crate::fields::{hopf_field, perturbed_field, small_cap_field, BumpProfile, HopfFrame, Twist, UnitField};
use crate::functionals::{FieldIntegrals, RuleSummary};
use crate::geom::{CapDomain, Quaternion, SpherePoint, TangentVector};
use crate::phimap::{admissible_steps, fit_quadratic, image_volume_from_scalars, PhiParams, DEFAULT_DET_FLOOR, DEFAULT_T_GRID};
use crate::quadrature::{QuadratureRule, RuleSpec};

pub type Context = BTreeMap<String, Value>;

/// How `lhs` and `rhs` are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// `|lhs − rhs| ≤ tol`
    Abs,
    /// `|lhs − rhs| / scale ≤ tol`
    Rel,
    /// `|lhs − rhs| ≤ tol` or `|lhs − rhs| / scale ≤ tol`
    AbsOrRel,
    /// `lhs ≥ rhs − tol·scale`
    AtLeast,
    /// `lhs < rhs`, tolerance unused
    LessThan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub context: Context,
}

impl CheckReport {
    /// For the one-sided policies the errors measure the violation only,
    /// and are zero whenever the inequality holds.
    pub fn evaluate(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        scale: f64,
        tolerance: f64,
        policy: Policy,
        mut context: Context,
    ) -> Self {
        let abs_err = match policy {
            Policy::Abs | Policy::Rel | Policy::AbsOrRel => (lhs - rhs).abs(),
            Policy::AtLeast => (rhs - lhs).max(0.0),
            Policy::LessThan => (lhs - rhs).max(0.0),
        };
        let rel_err = if scale > 0.0 {
            abs_err / scale
        } else if abs_err == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let finite = lhs.is_finite() && rhs.is_finite();
        let pass = finite
            && match policy {
                Policy::Abs => abs_err <= tolerance,
                Policy::Rel | Policy::AtLeast => rel_err <= tolerance,
                Policy::AbsOrRel => abs_err <= tolerance || rel_err <= tolerance,
                Policy::LessThan => lhs < rhs,
            };
        context.insert("policy".into(), json!(policy));
        context.insert("scale".into(), json!(scale));
        if matches!(policy, Policy::AtLeast | Policy::LessThan) {
            context.insert("surplus".into(), json!(if policy == Policy::AtLeast { lhs - rhs } else { rhs - lhs }));
        }
        Self {
            name: name.into(),
            lhs,
            rhs,
            abs_err,
            rel_err,
            tolerance,
            pass,
            context,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub hopf_constants_ad: f64,
    pub hopf_constants_fd: f64,
    /// `∫σ₂ = vol(K)` and `|∫σ₁| ≤ tol·vol(K)`.
    pub boundary_identity: f64,
    /// Deficit allowed in `E ≥ E(H)` and `vol ≥ vol(H)`, relative to `vol(K)`.
    pub bound: f64,
    /// `E(H) = (5/2)vol(K)`, `vol(H) = 2vol(K)`.
    pub hopf_equality: f64,
    pub energy_gap: f64,
    pub image_volume_hopf: f64,
    pub image_volume: f64,
    pub polynomial_fit: f64,
    pub quadrature_doubling: f64,
    /// Largest `|A|` accepted for the refined sweep minimizer.
    pub sweep_localization: f64,
    /// Ceiling on the mean `‖∇v‖²` of the small-cap field.
    pub counterexample_density: f64,
    /// Allowed distance of the fitted density exponent from 2.
    pub scaling_exponent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hopf_constants_ad: 1e-9,
            hopf_constants_fd: 1e-6,
            boundary_identity: 1e-5,
            bound: 1e-6,
            hopf_equality: 1e-8,
            energy_gap: 1e-8,
            image_volume_hopf: 1e-6,
            image_volume: 1e-5,
            polynomial_fit: 1e-5,
            quadrature_doubling: 1e-8,
            sweep_localization: 0.02,
            counterexample_density: 0.1,
            scaling_exponent: 0.1,
        }
    }
}

impl Tolerances {
    /// The same tolerance for every equality and bound check. Thresholds
    /// that are not tolerances (sweep localization, density ceiling) keep
    /// their defaults.
    pub fn uniform(tol: f64) -> Self {
        Self {
            hopf_constants_ad: tol,
            hopf_constants_fd: tol,
            boundary_identity: tol,
            bound: tol,
            hopf_equality: tol,
            energy_gap: tol,
            image_volume_hopf: tol,
            image_volume: tol,
            polynomial_fit: tol,
            quadrature_doubling: tol,
            ..Self::default()
        }
    }

    pub fn hopf_constants(&self, mode: DiffMode) -> f64 {
        match mode {
            DiffMode::Ad => self.hopf_constants_ad,
            DiffMode::Fd => self.hopf_constants_fd,
        }
    }
}

fn nan_max(acc: f64, x: f64) -> f64 {
    if x.is_nan() || x > acc {
        x
    } else {
        acc
    }
}

fn rule_context(rule: &QuadratureRule) -> Context {
    let mut c = Context::new();
    c.insert("rule".into(), json!(RuleSummary::from(rule)));
    c
}

fn field_context(v: &UnitField, rule: &QuadratureRule, mode: DiffMode) -> Context {
    let mut c = rule_context(rule);
    c.insert("field".into(), json!(v.label()));
    let params: BTreeMap<&str, f64> = v.params().iter().map(|(k, x)| (k.as_str(), *x)).collect();
    c.insert("field_params".into(), json!(params));
    c.insert("mode".into(), json!(effective_mode(v, mode)));
    c
}

/// `max |σ₁(H)|` and `max |σ₂(H) − 1|` over `samples` uniform points.
pub fn check_hopf_constants(samples: usize, seed: u64, mode: DiffMode, tol: &Tolerances) -> [CheckReport; 2] {
    let h = hopf_field(Quaternion::I).expect("i is a unit imaginary quaternion");
    let mode = effective_mode(&h, mode);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<SpherePoint> = (0..samples).map(|_| SpherePoint::random(&mut rng)).collect();
    let errs: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| {
            let j = field_jet(&h, x, mode);
            (j.sigma1.abs(), (j.sigma2 - 1.0).abs())
        })
        .collect();
    let s1 = errs.iter().map(|e| e.0).fold(0.0, nan_max);
    let s2 = errs.iter().map(|e| e.1).fold(0.0, nan_max);
    let mut ctx = Context::new();
    ctx.insert("field".into(), json!("hopf"));
    ctx.insert("mode".into(), json!(mode));
    ctx.insert("samples".into(), json!(samples));
    ctx.insert("seed".into(), json!(seed));
    let t = tol.hopf_constants(mode);
    [
        CheckReport::evaluate("hopf-sigma1", s1, 0.0, 1.0, t, Policy::Abs, ctx.clone()),
        CheckReport::evaluate("hopf-sigma2", s2, 0.0, 1.0, t, Policy::Abs, ctx),
    ]
}

fn require_hopf_boundary(v: &UnitField, cap: &CapDomain) -> Result<()> {
    if v.is_hopf_on_boundary(cap) {
        Ok(())
    } else {
        Err(Error::NotHopfBoundary {
            field: v.label().to_string(),
        })
    }
}

/// Node scalars and integrals of one field on one rule, shared by the checks.
struct Evaluation {
    scalars: Vec<JetScalars>,
    integrals: FieldIntegrals,
    context: Context,
}

impl Evaluation {
    fn new(v: &UnitField, rule: &QuadratureRule, mode: DiffMode) -> Result<Self> {
        let scalars = node_scalars(v, rule, mode);
        let integrals = FieldIntegrals::from_scalars(&scalars, rule)?;
        Ok(Self {
            scalars,
            integrals,
            context: field_context(v, rule, mode),
        })
    }

    fn vol(&self) -> f64 {
        self.integrals.cap_volume
    }

    fn boundary_identity(&self, tol: &Tolerances) -> CheckReport {
        let fi = &self.integrals;
        CheckReport::evaluate(
            "boundary-identity",
            fi.sigma2,
            fi.cap_volume,
            fi.cap_volume,
            tol.boundary_identity,
            Policy::Rel,
            self.context.clone(),
        )
    }

    fn sigma1_integral(&self, tol: &Tolerances) -> CheckReport {
        let fi = &self.integrals;
        CheckReport::evaluate(
            "sigma1-integral",
            fi.sigma1,
            0.0,
            fi.cap_volume,
            tol.boundary_identity,
            Policy::Rel,
            self.context.clone(),
        )
    }

    fn energy_bound(&self, tol: &Tolerances) -> CheckReport {
        let fi = &self.integrals;
        let mut ctx = self.context.clone();
        ctx.insert("energy".into(), json!(fi.energy()));
        CheckReport::evaluate(
            "energy-bound",
            fi.energy().value,
            fi.hopf_energy(),
            fi.cap_volume,
            tol.bound,
            Policy::AtLeast,
            ctx,
        )
    }

    fn volume_bound(&self, tol: &Tolerances) -> CheckReport {
        let fi = &self.integrals;
        let mut ctx = self.context.clone();
        ctx.insert("volume".into(), json!(fi.volume()));
        CheckReport::evaluate(
            "volume-bound",
            fi.volume().value,
            fi.hopf_volume(),
            fi.cap_volume,
            tol.bound,
            Policy::AtLeast,
            ctx,
        )
    }

    fn energy_gap(&self, tol: &Tolerances) -> CheckReport {
        CheckReport::evaluate(
            "energy-gap",
            self.integrals.energy_gap,
            0.0,
            1.0,
            tol.energy_gap,
            Policy::AtLeast,
            self.context.clone(),
        )
    }

    /// `vol(v) ≥ ∫(1 + σ₂)`; only meaningful when `σ₂ ≥ −1` at every node.
    fn volume_sigma2_bound(&self, tol: &Tolerances) -> Option<CheckReport> {
        let fi = &self.integrals;
        (fi.min_sigma2 >= -1.0).then(|| {
            let mut ctx = self.context.clone();
            ctx.insert("min_sigma2".into(), json!(fi.min_sigma2));
            CheckReport::evaluate(
                "volume-sigma2-bound",
                fi.volume().value,
                fi.volume_sigma2_bound(),
                fi.cap_volume,
                tol.bound,
                Policy::AtLeast,
                ctx,
            )
        })
    }

    fn hopf_equalities(&self, tol: &Tolerances) -> [CheckReport; 2] {
        let fi = &self.integrals;
        [
            CheckReport::evaluate(
                "energy-equality",
                fi.energy().value,
                fi.hopf_energy(),
                fi.hopf_energy(),
                tol.hopf_equality,
                Policy::Rel,
                self.context.clone(),
            ),
            CheckReport::evaluate(
                "volume-equality",
                fi.volume().value,
                fi.hopf_volume(),
                fi.hopf_volume(),
                tol.hopf_equality,
                Policy::Rel,
                self.context.clone(),
            ),
        ]
    }

    fn change_of_variables(
        &self,
        rule: &QuadratureRule,
        ts: &[f64],
        det_floor: f64,
        tol: f64,
    ) -> Result<Vec<CheckReport>> {
        let vol = self.vol();
        ts.iter()
            .map(|&t| {
                let image = image_volume_from_scalars(t, &self.scalars, rule, det_floor)?;
                let expected = vol * (1.0 + t * t).powf(1.5);
                let mut ctx = self.context.clone();
                ctx.insert("t".into(), json!(t));
                ctx.insert("det_floor".into(), json!(det_floor));
                ctx.insert("error_estimate".into(), json!(image.error));
                Ok(CheckReport::evaluate(
                    "change-of-variables",
                    image.value,
                    expected,
                    expected,
                    tol,
                    Policy::Rel,
                    ctx,
                ))
            })
            .collect()
    }

    /// Fits `vol φ_t(K)/√(1+t²)` by a quadratic in `t` and compares the
    /// linear and quadratic coefficients with `0` and `vol(K)`.
    fn polynomial_fit(
        &self,
        rule: &QuadratureRule,
        ts: &[f64],
        det_floor: f64,
        tol: &Tolerances,
    ) -> Result<Vec<CheckReport>> {
        let vol = self.vol();
        let reduced = ts
            .iter()
            .map(|&t| Ok(image_volume_from_scalars(t, &self.scalars, rule, det_floor)?.value / (1.0 + t * t).sqrt()))
            .collect::<Result<Vec<f64>>>()?;
        let c = fit_quadratic(ts, &reduced)?;
        let mut ctx = self.context.clone();
        ctx.insert("t_grid".into(), json!(ts));
        ctx.insert("coefficients".into(), json!(c));
        Ok(vec![
            CheckReport::evaluate("polynomial-fit-linear", c[1], 0.0, vol, tol.polynomial_fit, Policy::Rel, ctx.clone()),
            CheckReport::evaluate("polynomial-fit-quadratic", c[2], vol, vol, tol.polynomial_fit, Policy::Rel, ctx),
        ])
    }
}

pub fn check_boundary_identity(v: &UnitField, rule: &QuadratureRule, mode: DiffMode, tol: &Tolerances) -> Result<CheckReport> {
    require_hopf_boundary(v, rule.cap())?;
    Ok(Evaluation::new(v, rule, mode)?.boundary_identity(tol))
}

pub fn check_sigma1_integral(v: &UnitField, rule: &QuadratureRule, mode: DiffMode, tol: &Tolerances) -> Result<CheckReport> {
    require_hopf_boundary(v, rule.cap())?;
    Ok(Evaluation::new(v, rule, mode)?.sigma1_integral(tol))
}

pub fn check_energy_bound(v: &UnitField, rule: &QuadratureRule, mode: DiffMode, tol: &Tolerances) -> Result<CheckReport> {
    require_hopf_boundary(v, rule.cap())?;
    Ok(Evaluation::new(v, rule, mode)?.energy_bound(tol))
}

pub fn check_volume_bound(v: &UnitField, rule: &QuadratureRule, mode: DiffMode, tol: &Tolerances) -> Result<CheckReport> {
    require_hopf_boundary(v, rule.cap())?;
    Ok(Evaluation::new(v, rule, mode)?.volume_bound(tol))
}

/// `E(v) − [(3/2)vol(K) + ∫σ₂] ≥ −tol`; holds for every field.
pub fn check_energy_gap(v: &UnitField, rule: &QuadratureRule, mode: DiffMode, tol: &Tolerances) -> Result<CheckReport> {
    Ok(Evaluation::new(v, rule, mode)?.energy_gap(tol))
}

/// `E(v) = (5/2)vol(K)` and `vol(v) = 2vol(K)`, expected when `v` is a Hopf field.
pub fn check_hopf_equalities(v: &UnitField, rule: &QuadratureRule, mode: DiffMode, tol: &Tolerances) -> Result<[CheckReport; 2]> {
    Ok(Evaluation::new(v, rule, mode)?.hopf_equalities(tol))
}

/// `vol φ_t(K) = vol(K)(1+t²)^{3/2}` for each `t`.
pub fn check_change_of_variables(
    v: &UnitField,
    rule: &QuadratureRule,
    ts: &[f64],
    det_floor: f64,
    mode: DiffMode,
    tol: f64,
) -> Result<Vec<CheckReport>> {
    require_hopf_boundary(v, rule.cap())?;
    for &t in ts {
        PhiParams::new(v, t)?;
    }
    Evaluation::new(v, rule, mode)?.change_of_variables(rule, ts, det_floor, tol)
}

/// Relative change of `E`, `vol`, `∫σ₁` and `∫σ₂` when every Gauss order is doubled.
pub fn check_quadrature_doubling(
    v: &UnitField,
    cap: &CapDomain,
    spec: &RuleSpec,
    mode: DiffMode,
    tol: &Tolerances,
) -> Result<Vec<CheckReport>> {
    let coarse_rule = spec.build(cap)?;
    let fine_rule = spec.doubled().build(cap)?;
    let coarse = FieldIntegrals::compute(v, &coarse_rule, mode)?;
    let fine = FieldIntegrals::compute(v, &fine_rule, mode)?;
    let mut ctx = field_context(v, &coarse_rule, mode);
    ctx.insert("doubled_rule".into(), json!(RuleSummary::from(&fine_rule)));
    let vol = coarse.cap_volume;
    let pairs = [
        ("doubling-energy", coarse.energy().value, fine.energy().value, fine.energy().value),
        ("doubling-volume", coarse.volume().value, fine.volume().value, fine.volume().value),
        ("doubling-sigma1", coarse.sigma1, fine.sigma1, vol),
        ("doubling-sigma2", coarse.sigma2, fine.sigma2, vol),
    ];
    Ok(pairs
        .into_iter()
        .map(|(name, a, b, scale)| {
            CheckReport::evaluate(name, a, b, scale.abs(), tol.quadrature_doubling, Policy::Rel, ctx.clone())
        })
        .collect())
}

/// The amplitude family swept for the minimization experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub amplitudes: Vec<f64>,
    pub exponent: u32,
    pub twist: Twist,
    /// Bracket width at which golden-section refinement stops.
    pub refine_tol: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            amplitudes: vec![-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0],
            exponent: 3,
            twist: Twist::default(),
            refine_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub amplitudes: Vec<f64>,
    pub energies: Vec<f64>,
    pub volumes: Vec<f64>,
    pub energy_argmin: usize,
    pub volume_argmin: usize,
    /// Nonincreasing up to the grid minimum and nondecreasing after it.
    pub energy_unimodal: bool,
    pub volume_unimodal: bool,
    pub refined_energy_argmin: f64,
    pub refined_volume_argmin: f64,
}

impl SweepResult {
    pub fn energy_argmin_amplitude(&self) -> f64 {
        self.amplitudes[self.energy_argmin]
    }

    pub fn volume_argmin_amplitude(&self) -> f64 {
        self.amplitudes[self.volume_argmin]
    }
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

fn unimodal(xs: &[f64], k: usize) -> bool {
    xs[..=k].windows(2).all(|w| w[1] <= w[0]) && xs[k..].windows(2).all(|w| w[1] >= w[0])
}

fn golden_section<F>(mut a: f64, mut b: f64, tol: f64, mut f: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// `E` and `vol` of the perturbed family over the amplitude grid, the grid
/// minimizers, and golden-section refinements between the neighbours of each.
pub fn sweep_family(cap: &CapDomain, spec: &SweepSpec, rule: &QuadratureRule, mode: DiffMode) -> Result<SweepResult> {
    let amps = &spec.amplitudes;
    if amps.is_empty() || !amps.contains(&0.0) {
        return Err(Error::InvalidParameter("sweep grid must contain A = 0".into()));
    }
    if amps.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("sweep grid must be strictly ascending".into()));
    }
    let frame = HopfFrame::standard();
    let integrals = |a: f64| -> Result<FieldIntegrals> {
        let v = perturbed_field(cap, BumpProfile::new(a, spec.exponent)?, spec.twist, &frame)?;
        FieldIntegrals::compute(&v, rule, mode)
    };
    let mut energies = Vec::with_capacity(amps.len());
    let mut volumes = Vec::with_capacity(amps.len());
    for &a in amps {
        let fi = integrals(a)?;
        energies.push(fi.energy().value);
        volumes.push(fi.volume().value);
    }
    let refine = |values: &[f64], pick: fn(&FieldIntegrals) -> f64| -> Result<(usize, f64)> {
        let k = argmin(values);
        if amps.len() == 1 {
            return Ok((k, amps[0]));
        }
        let lo = amps[k.saturating_sub(1)];
        let hi = amps[(k + 1).min(amps.len() - 1)];
        let best = golden_section(lo, hi, spec.refine_tol, |a| Ok(pick(&integrals(a)?)))?;
        Ok((k, best))
    };
    let (energy_argmin, refined_energy_argmin) = refine(&energies, |fi| fi.energy().value)?;
    let (volume_argmin, refined_volume_argmin) = refine(&volumes, |fi| fi.volume().value)?;
    Ok(SweepResult {
        amplitudes: amps.clone(),
        energy_unimodal: unimodal(&energies, energy_argmin),
        volume_unimodal: unimodal(&volumes, volume_argmin),
        energies,
        volumes,
        energy_argmin,
        volume_argmin,
        refined_energy_argmin,
        refined_volume_argmin,
    })
}

/// Grid and refined minimizers of a sweep against `A = 0`.
pub fn sweep_checks(sweep: &SweepResult, rule: &QuadratureRule, spec: &SweepSpec, tol: &Tolerances) -> Vec<CheckReport> {
    let mut ctx = rule_context(rule);
    ctx.insert("amplitudes".into(), json!(sweep.amplitudes));
    ctx.insert("exponent".into(), json!(spec.exponent));
    ctx.insert("twist".into(), json!(spec.twist.to_string()));
    let mut e_ctx = ctx.clone();
    e_ctx.insert("values".into(), json!(sweep.energies));
    e_ctx.insert("unimodal".into(), json!(sweep.energy_unimodal));
    let mut v_ctx = ctx;
    v_ctx.insert("values".into(), json!(sweep.volumes));
    v_ctx.insert("unimodal".into(), json!(sweep.volume_unimodal));
    vec![
        CheckReport::evaluate("sweep-energy-argmin", sweep.energy_argmin_amplitude(), 0.0, 1.0, 0.0, Policy::Abs, e_ctx.clone()),
        CheckReport::evaluate(
            "sweep-energy-refined",
            sweep.refined_energy_argmin,
            0.0,
            1.0,
            tol.sweep_localization,
            Policy::Abs,
            e_ctx,
        ),
        CheckReport::evaluate("sweep-volume-argmin", sweep.volume_argmin_amplitude(), 0.0, 1.0, 0.0, Policy::Abs, v_ctx.clone()),
        CheckReport::evaluate(
            "sweep-volume-refined",
            sweep.refined_volume_argmin,
            0.0,
            1.0,
            tol.sweep_localization,
            Policy::Abs,
            v_ctx,
        ),
    ]
}

/// The radial parallel field on `K(center, radius)` seeded with `i·center`.
pub fn small_cap_counterexample_field(center: &SpherePoint, radius: f64) -> Result<(CapDomain, UnitField)> {
    let cap = CapDomain::new(*center, radius)?;
    let u0 = TangentVector::new(*center, v4::qmul(&Quaternion::I.0, center.coords()))?;
    let v = small_cap_field(&cap, &u0)?;
    Ok((cap, v))
}

/// On a small cap the radial parallel field beats the Hopf field on both
/// functionals, with mean `‖∇v‖²` far below the Hopf value 2.
pub fn check_small_cap_counterexample(
    center: &SpherePoint,
    radius: f64,
    spec: &RuleSpec,
    mode: DiffMode,
    tol: &Tolerances,
) -> Result<Vec<CheckReport>> {
    let (cap, v) = small_cap_counterexample_field(center, radius)?;
    let rule = spec.build(&cap)?;
    let fi = FieldIntegrals::compute(&v, &rule, mode)?;
    let ctx = field_context(&v, &rule, mode);
    Ok(vec![
        CheckReport::evaluate(
            "counterexample-energy",
            fi.energy().value,
            fi.hopf_energy(),
            fi.cap_volume,
            0.0,
            Policy::LessThan,
            ctx.clone(),
        ),
        CheckReport::evaluate(
            "counterexample-volume",
            fi.volume().value,
            fi.hopf_volume(),
            fi.cap_volume,
            0.0,
            Policy::LessThan,
            ctx.clone(),
        ),
        CheckReport::evaluate(
            "counterexample-mean-density",
            fi.mean_energy_density(),
            tol.counterexample_density,
            1.0,
            0.0,
            Policy::LessThan,
            ctx,
        ),
    ])
}

/// Mean `‖∇v‖²` of the small-cap field against the cap radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub radii: Vec<f64>,
    pub mean_densities: Vec<f64>,
    /// Least-squares slope of `log mean` against `log r`.
    pub exponent: f64,
    /// Least-squares `C` in `mean ≈ C·r²`.
    pub constant: f64,
}

pub fn small_cap_scaling(center: &SpherePoint, radii: &[f64], spec: &RuleSpec, mode: DiffMode) -> Result<ScalingFit> {
    if radii.len() < 2 {
        return Err(Error::InvalidParameter("scaling fit needs at least two radii".into()));
    }
    let mean_densities = radii
        .iter()
        .map(|&r| {
            let (cap, v) = small_cap_counterexample_field(center, r)?;
            Ok(FieldIntegrals::compute(&v, &spec.build(&cap)?, mode)?.mean_energy_density())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = radii.len() as f64;
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = mean_densities.iter().map(|m| m.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let r2r4 = radii.iter().zip(&mean_densities).fold((0.0, 0.0), |(num, den), (r, m)| {
        (num + m * r * r, den + r.powi(4))
    });
    Ok(ScalingFit {
        radii: radii.to_vec(),
        mean_densities,
        exponent: sxy / sxx,
        constant: r2r4.0 / r2r4.1,
    })
}

pub fn check_small_cap_scaling(
    center: &SpherePoint,
    radii: &[f64],
    spec: &RuleSpec,
    mode: DiffMode,
    tol: &Tolerances,
) -> Result<CheckReport> {
    let fit = small_cap_scaling(center, radii, spec, mode)?;
    let mut ctx = Context::new();
    ctx.insert("field".into(), json!("small-cap"));
    ctx.insert("cap_center".into(), json!(center.coords()));
    ctx.insert("rule".into(), json!(spec));
    ctx.insert("fit".into(), json!(fit));
    Ok(CheckReport::evaluate(
        "counterexample-scaling",
        fit.exponent,
        2.0,
        2.0,
        tol.scaling_exponent,
        Policy::Abs,
        ctx,
    ))
}

/// A field of the verification matrix, instantiated per cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum FieldSpec {
    Hopf {
        #[serde(default = "default_axis")]
        axis: [f64; 3],
    },
    /// Bump-perturbed Hopf field supported in the cap under test.
    Perturbed {
        amplitude: f64,
        #[serde(default = "default_exponent")]
        exponent: u32,
        #[serde(default)]
        twist: Twist,
        #[serde(default = "default_axis")]
        axis: [f64; 3],
    },
    /// Radial parallel field on the cap of this radius about each tested center.
    SmallCap { radius: f64 },
}

fn default_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn default_exponent() -> u32 {
    3
}

fn axis_quaternion(axis: &[f64; 3]) -> Quaternion {
    Quaternion::new(0.0, axis[0], axis[1], axis[2])
}

impl FieldSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FieldSpec::Hopf { .. } => "hopf",
            FieldSpec::Perturbed { .. } => "perturbed",
            FieldSpec::SmallCap { .. } => "small-cap",
        }
    }

    /// The field on `cap`.
    pub fn build(&self, cap: &CapDomain) -> Result<UnitField> {
        match self {
            FieldSpec::Hopf { axis } => hopf_field(axis_quaternion(axis)),
            FieldSpec::Perturbed {
                amplitude,
                exponent,
                twist,
                axis,
            } => {
                let frame = HopfFrame::from_axis(axis_quaternion(axis))?;
                perturbed_field(cap, BumpProfile::new(*amplitude, *exponent)?, *twist, &frame)
            }
            FieldSpec::SmallCap { radius } => Ok(small_cap_counterexample_field(cap.center(), *radius)?.1),
        }
    }
}

/// The field × cap matrix and every knob of the checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub fields: Vec<FieldSpec>,
    pub caps: Vec<CapDomain>,
    pub rule: RuleSpec,
    pub mode: DiffMode,
    pub t_grid: Vec<f64>,
    pub det_floor: f64,
    pub tolerances: Tolerances,
    pub hopf_samples: usize,
    pub seed: u64,
    /// Also rerun every Hopf-boundary field with doubled orders.
    pub doubling: bool,
    pub sweep: Option<SweepSpec>,
    pub scaling_radii: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            fields: vec![FieldSpec::Hopf { axis: default_axis() }],
            caps: vec![CapDomain::new(SpherePoint::identity(), 1.0).expect("valid radius")],
            rule: RuleSpec::default(),
            mode: DiffMode::Ad,
            t_grid: DEFAULT_T_GRID.to_vec(),
            det_floor: DEFAULT_DET_FLOOR,
            tolerances: Tolerances::default(),
            hopf_samples: 10_000,
            seed: 0,
            doubling: true,
            sweep: None,
            scaling_radii: vec![0.05, 0.1, 0.2],
        }
    }
}

fn hopf_boundary_checks(
    spec: &FieldSpec,
    v: &UnitField,
    rule: &QuadratureRule,
    config: &VerifyConfig,
) -> Result<Vec<CheckReport>> {
    require_hopf_boundary(v, rule.cap())?;
    let tol = &config.tolerances;
    let eval = Evaluation::new(v, rule, config.mode)?;
    let is_hopf = matches!(spec, FieldSpec::Hopf { .. });
    let mut out = vec![
        eval.boundary_identity(tol),
        eval.sigma1_integral(tol),
        eval.energy_bound(tol),
        eval.volume_bound(tol),
        eval.energy_gap(tol),
    ];
    out.extend(eval.volume_sigma2_bound(tol));
    if is_hopf {
        out.extend(eval.hopf_equalities(tol));
    }
    for &t in &config.t_grid {
        PhiParams::new(v, t)?;
    }
    let steps = admissible_steps(&eval.scalars, &config.t_grid, config.det_floor);
    if steps.len() < config.t_grid.len() {
        log::warn!(
            "field `{}`: {} of {} steps fall below the determinant floor and are skipped",
            v.label(),
            config.t_grid.len() - steps.len(),
            config.t_grid.len()
        );
    }
    let image_tol = if is_hopf { tol.image_volume_hopf } else { tol.image_volume };
    out.extend(eval.change_of_variables(rule, &steps, config.det_floor, image_tol)?);
    if steps.len() >= 3 {
        out.extend(eval.polynomial_fit(rule, &steps, config.det_floor, tol)?);
    }
    if config.doubling {
        out.extend(check_quadrature_doubling(v, rule.cap(), &config.rule, config.mode, tol)?);
    }
    Ok(out)
}

/// Every check over the configured matrix, in a fixed order: Hopf
/// constants, then each field on each cap, then the sweep on each cap.
pub fn run_all(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    if config.fields.is_empty() || config.caps.is_empty() {
        return Ok(reports);
    }
    let tol = &config.tolerances;
    reports.extend(check_hopf_constants(config.hopf_samples, config.seed, config.mode, tol));
    for spec in &config.fields {
        match spec {
            FieldSpec::SmallCap { radius } => {
                let mut centers: Vec<SpherePoint> = Vec::new();
                for cap in &config.caps {
                    if !centers.contains(cap.center()) {
                        centers.push(*cap.center());
                    }
                }
                for c in &centers {
                    reports.extend(check_small_cap_counterexample(c, *radius, &config.rule, config.mode, tol)?);
                    if config.scaling_radii.len() >= 2 {
                        reports.push(check_small_cap_scaling(c, &config.scaling_radii, &config.rule, config.mode, tol)?);
                    }
                }
            }
            _ => {
                for cap in &config.caps {
                    let v = spec.build(cap)?;
                    let rule = config.rule.build(cap)?;
                    reports.extend(hopf_boundary_checks(spec, &v, &rule, config)?);
                }
            }
        }
    }
    if let Some(sweep) = &config.sweep {
        for cap in &config.caps {
            let rule = config.rule.build(cap)?;
            let result = sweep_family(cap, sweep, &rule, config.mode)?;
            reports.extend(sweep_checks(&result, &rule, sweep, tol));
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_gauss_rule;

    fn cap(r: f64) -> CapDomain {
        CapDomain::new(SpherePoint::identity(), r).unwrap()
    }

    #[test]
    fn policies() {
        let c = Context::new();
        let r = CheckReport::evaluate("x", 1.0, 1.0 + 1e-9, 1.0, 1e-8, Policy::Rel, c.clone());
        assert!(r.pass);
        assert_eq!(r.context["policy"], json!("rel"));
        let r = CheckReport::evaluate("x", 100.0, 101.0, 100.0, 0.5, Policy::AbsOrRel, c.clone());
        assert!(r.pass && r.abs_err == 1.0 && r.rel_err == 0.01);
        let r = CheckReport::evaluate("x", 2.0, 1.0, 1.0, 0.0, Policy::AtLeast, c.clone());
        assert!(r.pass && r.abs_err == 0.0);
        let r = CheckReport::evaluate("x", 1.0, 2.0, 4.0, 0.1, Policy::AtLeast, c.clone());
        assert!(!r.pass && r.rel_err == 0.25);
        assert!(CheckReport::evaluate("x", 1.0, 2.0, 1.0, 0.0, Policy::LessThan, c.clone()).pass);
        assert!(!CheckReport::evaluate("x", 2.0, 2.0, 1.0, 0.0, Policy::LessThan, c.clone()).pass);
        assert!(!CheckReport::evaluate("x", f64::NAN, 0.0, 1.0, 1.0, Policy::AtLeast, c).pass);
    }

    #[test]
    fn hopf_constants_in_both_modes() {
        let tol = Tolerances::default();
        for r in check_hopf_constants(500, 1, DiffMode::Ad, &tol) {
            assert!(r.pass, "{r:?}");
            assert_eq!(r.tolerance, 1e-9);
        }
        for r in check_hopf_constants(500, 1, DiffMode::Fd, &tol) {
            assert!(r.pass, "{r:?}");
            assert_eq!(r.context["mode"], json!("fd"));
        }
        let strict = Tolerances::uniform(1e-12);
        assert!(check_hopf_constants(500, 1, DiffMode::Fd, &strict).iter().any(|r| !r.pass));
    }

    #[test]
    fn boundary_checks_reject_incompatible_fields() {
        let (_, v) = small_cap_counterexample_field(&SpherePoint::identity(), 0.1).unwrap();
        let rule = build_gauss_rule(&cap(0.1), 8, 4, 8).unwrap();
        let err = check_boundary_identity(&v, &rule, DiffMode::Ad, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::NotHopfBoundary { .. }));
        // perturbed on a larger cap than the one under test
        let f = FieldSpec::Perturbed {
            amplitude: 0.5,
            exponent: 3,
            twist: Twist::default(),
            axis: default_axis(),
        }
        .build(&cap(1.0))
        .unwrap();
        let rule = build_gauss_rule(&cap(0.5), 8, 4, 8).unwrap();
        assert!(check_sigma1_integral(&f, &rule, DiffMode::Ad, &Tolerances::default()).is_err());
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section(-1.0, 2.0, 1e-8, |x| Ok((x - 0.3) * (x - 0.3))).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
    }

    #[test]
    fn sweep_rejects_grids_without_zero() {
        let spec = SweepSpec {
            amplitudes: vec![0.5, 1.0],
            ..SweepSpec::default()
        };
        let rule = build_gauss_rule(&cap(1.0), 8, 4, 8).unwrap();
        assert!(sweep_family(&cap(1.0), &spec, &rule, DiffMode::Ad).is_err());
        let spec = SweepSpec {
            amplitudes: vec![0.5, 0.0],
            ..SweepSpec::default()
        };
        assert!(sweep_family(&cap(1.0), &spec, &rule, DiffMode::Ad).is_err());
    }

    #[test]
    fn single_point_sweep() {
        let spec = SweepSpec {
            amplitudes: vec![0.0],
            ..SweepSpec::default()
        };
        let rule = build_gauss_rule(&cap(1.0), 8, 4, 8).unwrap();
        let s = sweep_family(&cap(1.0), &spec, &rule, DiffMode::Ad).unwrap();
        assert_eq!(s.energies.len(), 1);
        assert_eq!(s.energy_argmin, 0);
        assert_eq!(s.refined_energy_argmin, 0.0);
    }

    #[test]
    fn empty_matrix_gives_empty_report() {
        let config = VerifyConfig {
            fields: vec![],
            ..VerifyConfig::default()
        };
        assert!(run_all(&config).unwrap().is_empty());
    }

    #[test]
    fn field_spec_serde() {
        let s: FieldSpec = serde_json::from_str(r#"{"name":"perturbed","amplitude":0.5}"#).unwrap();
        assert_eq!(
            s,
            FieldSpec::Perturbed {
                amplitude: 0.5,
                exponent: 3,
                twist: Twist::Constant(0.0),
                axis: [1.0, 0.0, 0.0]
            }
        );
        let back: FieldSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
