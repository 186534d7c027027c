//! Integration over geodesic caps.
//!
//! The deterministic rule uses geodesic polar coordinates about the cap
//! center,
//!
//! ```text
//! x(ρ, θ, φ) = cos ρ·c + sin ρ·(cos θ·e_z + sin θ·(cos φ·e_x + sin φ·e_y))
//! dV = sin²ρ · sin θ · dρ dθ dφ
//! ```
//!
//! with Gauss–Legendre in ρ and θ and the periodic trapezoidal rule in φ. The
//! polar axis `e_z = i·c` is the Hopf direction at the center, and
//! `(e_x, e_y) = (j·c, k·c)`.
//!
//! The Monte Carlo rule samples the same cap uniformly and serves as an
//! independent cross-check.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::v4;
use crate::error::{Error, Result};
use crate::geom::{cap_volume, CapDomain, SpherePoint};

pub const DEFAULT_ORDERS: [usize; 3] = [64, 32, 64];
pub const MIN_ORDER: usize = 4;
pub const MIN_MC_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Gauss,
    MonteCarlo,
}

/// Parameters from which a rule over a given cap is built.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RuleSpec {
    Gauss { orders: [usize; 3] },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for RuleSpec {
    fn default() -> Self {
        RuleSpec::Gauss {
            orders: DEFAULT_ORDERS,
        }
    }
}

impl RuleSpec {
    pub fn build(&self, cap: &CapDomain) -> Result<QuadratureRule> {
        match *self {
            RuleSpec::Gauss { orders } => build_gauss_rule(cap, orders[0], orders[1], orders[2]),
            RuleSpec::MonteCarlo { samples, seed } => build_mc_rule(cap, samples, seed),
        }
    }

    /// The same kind of rule with every order (or the sample count) doubled.
    pub fn doubled(&self) -> Self {
        match *self {
            RuleSpec::Gauss { orders } => RuleSpec::Gauss {
                orders: orders.map(|n| 2 * n),
            },
            RuleSpec::MonteCarlo { samples, seed } => RuleSpec::MonteCarlo {
                samples: 2 * samples,
                seed,
            },
        }
    }
}

/// Value of a quadrature sum together with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Nodes and weights over a cap. Weights carry the volume element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    cap: CapDomain,
    kind: RuleKind,
    /// (N_ρ, N_θ, N_φ) for Gauss rules.
    orders: Option<[usize; 3]>,
    seed: Option<u64>,
    nodes: Vec<SpherePoint>,
    weights: Vec<f64>,
    /// Gauss: weight-sum defect against the closed-form cap volume.
    /// Monte Carlo: `vol(K)/√n`, the standard error per unit sample deviation.
    estimated_error: f64,
}

impl QuadratureRule {
    pub fn cap(&self) -> &CapDomain {
        &self.cap
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn orders(&self) -> Option<[usize; 3]> {
        self.orders
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn nodes(&self) -> &[SpherePoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn estimated_error(&self) -> f64 {
        self.estimated_error
    }

    pub fn spec(&self) -> RuleSpec {
        match self.kind {
            RuleKind::Gauss => RuleSpec::Gauss {
                orders: self.orders.expect("gauss rules record orders"),
            },
            RuleKind::MonteCarlo => RuleSpec::MonteCarlo {
                samples: self.len(),
                seed: self.seed.expect("monte carlo rules record seeds"),
            },
        }
    }

    /// Evaluates `f` at every node in parallel, preserving node order.
    pub fn map_nodes<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&SpherePoint) -> T + Sync + Send,
    {
        self.nodes.par_iter().map(f).collect()
    }

    /// `∫_K f`.
    pub fn integrate<F>(&self, f: F) -> Result<Estimate>
    where
        F: Fn(&SpherePoint) -> f64 + Sync + Send,
    {
        let values = self.map_nodes(f);
        self.integrate_values(&values)
    }

    /// Quadrature sum of precomputed node values (same order as [`nodes`](Self::nodes)).
    ///
    /// Summation is pairwise in a fixed order, so the result is reproducible
    /// bit for bit.
    pub fn integrate_values(&self, values: &[f64]) -> Result<Estimate> {
        assert_eq!(values.len(), self.len(), "one value per node");
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                point: *self.nodes[index].coords(),
            });
        }
        match self.kind {
            RuleKind::Gauss => {
                let terms: Vec<f64> = values
                    .iter()
                    .zip(&self.weights)
                    .map(|(f, w)| f * w)
                    .collect();
                let value = pairwise_sum(&terms);
                let abs: Vec<f64> = terms.iter().map(|t| t.abs()).collect();
                let n = self.len().max(2) as f64;
                Ok(Estimate {
                    value,
                    error: f64::EPSILON * n.log2() * pairwise_sum(&abs),
                })
            }
            RuleKind::MonteCarlo => {
                let n = self.len() as f64;
                let vol = self.cap.volume();
                let mean = pairwise_sum(values) / n;
                let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
                let var = if self.len() > 1 {
                    pairwise_sum(&dev) / (n - 1.0)
                } else {
                    0.0
                };
                Ok(Estimate {
                    value: vol * mean,
                    error: var.sqrt() * vol / n.sqrt(),
                })
            }
        }
    }
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().fold(0.0, |acc, x| acc + x)
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Gauss–Legendre nodes (ascending) and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Orthonormal basis of the tangent space at the cap center used as the chart axes.
fn chart_axes(center: &SpherePoint) -> [[f64; 4]; 3] {
    let c = center.coords();
    [
        v4::qmul(&[0.0, 1.0, 0.0, 0.0], c),
        v4::qmul(&[0.0, 0.0, 1.0, 0.0], c),
        v4::qmul(&[0.0, 0.0, 0.0, 1.0], c),
    ]
}

fn chart_point(c: &[f64; 4], axes: &[[f64; 4]; 3], rho: f64, cos_t: f64, sin_t: f64, phi: f64) -> SpherePoint {
    let (sr, cr) = rho.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let dir: [f64; 4] = std::array::from_fn(|k| {
        cos_t * axes[0][k] + sin_t * (cp * axes[1][k] + sp * axes[2][k])
    });
    SpherePoint::project(v4::lincomb(cr, c, sr, &dir)).expect("chart point is nonzero")
}

/// Tensor-product rule in geodesic polar coordinates.
pub fn build_gauss_rule(cap: &CapDomain, n_rho: usize, n_theta: usize, n_phi: usize) -> Result<QuadratureRule> {
    for n in [n_rho, n_theta, n_phi] {
        if n < MIN_ORDER {
            return Err(Error::OrderTooSmall(n));
        }
    }
    let r = cap.radius();
    let (xr, wr) = gauss_legendre(n_rho);
    let (xt, wt) = gauss_legendre(n_theta);
    let c = cap.center().coords();
    let axes = chart_axes(cap.center());
    let dphi = 2.0 * PI / n_phi as f64;

    let mut nodes = Vec::with_capacity(n_rho * n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_rho * n_theta * n_phi);
    for (a, b) in xr.iter().zip(&wr) {
        let rho = 0.5 * r * (a + 1.0);
        let w_rho = 0.5 * r * b * rho.sin().powi(2);
        for (s, u) in xt.iter().zip(&wt) {
            let theta = 0.5 * PI * (s + 1.0);
            let (st, ct) = theta.sin_cos();
            let w_theta = 0.5 * PI * u * st;
            for k in 0..n_phi {
                let phi = k as f64 * dphi;
                nodes.push(chart_point(c, &axes, rho, ct, st, phi));
                weights.push(w_rho * w_theta * dphi);
            }
        }
    }
    let defect = (pairwise_sum(&weights) - cap_volume(cap)).abs();
    Ok(QuadratureRule {
        cap: *cap,
        kind: RuleKind::Gauss,
        orders: Some([n_rho, n_theta, n_phi]),
        seed: None,
        nodes,
        weights,
        estimated_error: defect,
    })
}

/// Inverse of `F(ρ) = (2ρ − sin 2ρ)/(2r − sin 2r)`, the radial CDF of the uniform measure.
fn radial_quantile(u: f64, r: f64) -> f64 {
    let total = 2.0 * r - (2.0 * r).sin();
    let target = u * total;
    let (mut lo, mut hi) = (0.0, r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 2.0 * mid - (2.0 * mid).sin() < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * r {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Uniform samples on the cap, deterministic for a given seed.
pub fn build_mc_rule(cap: &CapDomain, n_samples: usize, seed: u64) -> Result<QuadratureRule> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo rules need at least {MIN_MC_SAMPLES} samples, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = cap.radius();
    let c = cap.center().coords();
    let axes = chart_axes(cap.center());
    let vol = cap_volume(cap);
    let nodes = (0..n_samples)
        .map(|_| {
            let rho = radial_quantile(rng.gen::<f64>(), r);
            let ct: f64 = rng.gen_range(-1.0..1.0);
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            let phi = rng.gen_range(0.0..2.0 * PI);
            chart_point(c, &axes, rho, ct, st, phi)
        })
        .collect();
    Ok(QuadratureRule {
        cap: *cap,
        kind: RuleKind::MonteCarlo,
        orders: None,
        seed: Some(seed),
        nodes,
        weights: vec![vol / n_samples as f64; n_samples],
        estimated_error: vol / (n_samples as f64).sqrt(),
    })
}

/// Identity of a cached rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleKey {
    pub center: [f64; 4],
    pub radius: f64,
    pub spec: RuleSpec,
}

impl RuleKey {
    pub fn new(cap: &CapDomain, spec: RuleSpec) -> Self {
        Self {
            center: *cap.center().coords(),
            radius: cap.radius(),
            spec,
        }
    }

    /// File name derived from the exact bit patterns of the key.
    pub fn file_name(&self) -> String {
        let mut s = String::new();
        for x in self.center.iter().chain(std::iter::once(&self.radius)) {
            s.push_str(&format!("{:016x}", x.to_bits()));
        }
        match self.spec {
            RuleSpec::Gauss { orders } => {
                format!("gauss-{}x{}x{}-{s}.json", orders[0], orders[1], orders[2])
            }
            RuleSpec::MonteCarlo { samples, seed } => format!("mc-{samples}-{seed}-{s}.json"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CachedRule {
    key: RuleKey,
    rule: QuadratureRule,
}

/// JSON cache of built rules on disk.
#[derive(Clone, Debug)]
pub struct RuleCache {
    dir: PathBuf,
}

impl RuleCache {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        Self {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    pub fn path_for(&self, key: &RuleKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    pub fn get_or_build(&self, cap: &CapDomain, spec: RuleSpec) -> Result<QuadratureRule> {
        let key = RuleKey::new(cap, spec);
        let path = self.path_for(&key);
        if path.exists() {
            let cached: CachedRule = serde_json::from_slice(&fs::read(&path)?)?;
            if cached.key == key {
                return Ok(cached.rule);
            }
            log::warn!("stale rule cache entry at {}; rebuilding", path.display());
        }
        let rule = spec.build(cap)?;
        fs::create_dir_all(&self.dir)?;
        fs::write(
            &path,
            serde_json::to_vec(&CachedRule {
                key,
                rule: rule.clone(),
            })?,
        )?;
        Ok(rule)
    }
}
