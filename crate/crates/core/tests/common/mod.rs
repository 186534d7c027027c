#![allow(dead_code)]

use std::f64::consts::TAU;

use hopf_rigidity::fields::{hopf_field, perturbed_field, small_cap_field, BumpProfile, HopfFrame, Twist, UnitField};
use hopf_rigidity::geom::{exp_map, CapDomain, Quaternion, SpherePoint, TangentVector};
use rand::Rng;

/// Uniform point on S³ from three numbers in [0, 1).
pub fn shoemake(u: [f64; 3]) -> SpherePoint {
    let (a, b) = ((1.0 - u[0]).sqrt(), u[0].sqrt());
    let (s1, c1) = (TAU * u[1]).sin_cos();
    let (s2, c2) = (TAU * u[2]).sin_cos();
    SpherePoint::project([a * s1, a * c1, b * s2, b * c2]).unwrap()
}

pub fn uniform_points(n: usize, rng: &mut impl Rng) -> Vec<SpherePoint> {
    (0..n).map(|_| shoemake(rng.gen())).collect()
}

/// Point within `reach` of the cap center.
pub fn point_near(center: &SpherePoint, reach: f64, rng: &mut impl Rng) -> SpherePoint {
    let w = TangentVector::random_unit(*center, rng);
    exp_map(center, &w, rng.gen_range(0.0..reach)).unwrap()
}

pub fn cap_at(center: [f64; 4], r: f64) -> CapDomain {
    CapDomain::new(SpherePoint::project(center).unwrap(), r).unwrap()
}

pub fn perturbed(cap: &CapDomain, a: f64, m: u32, twist: Twist) -> UnitField {
    perturbed_field(cap, BumpProfile::new(a, m).unwrap(), twist, &HopfFrame::standard()).unwrap()
}

/// A built-in field together with the cap it lives on.
pub struct Sample {
    pub name: String,
    pub cap: CapDomain,
    pub field: UnitField,
}

/// Every constructor, with a spread of parameters.
pub fn builtin_fields() -> Vec<Sample> {
    let mut out = Vec::new();
    let c0 = [1.0, 0.0, 0.0, 0.0];
    let c1 = [0.3, -0.5, 0.7, 0.4];
    for axis in [Quaternion::I, Quaternion::new(0.0, 0.6, 0.0, 0.8)] {
        out.push(Sample {
            name: format!("hopf {:?}", axis.0),
            cap: cap_at(c1, 1.0),
            field: hopf_field(axis).unwrap(),
        });
    }
    for (center, r) in [(c0, 0.5), (c1, 1.0), (c0, 1.5)] {
        let cap = cap_at(center, r);
        for (a, m) in [(0.3, 2), (0.5, 3), (1.2, 2)] {
            for twist in [Twist::Constant(0.0), Twist::Constant(0.7), Twist::Angular] {
                out.push(Sample {
                    name: format!("perturbed A={a} m={m} twist={twist} r={r}"),
                    cap,
                    field: perturbed(&cap, a, m, twist),
                });
            }
        }
    }
    for r in [0.1, 1.0] {
        let cap = cap_at(c1, r);
        let c = cap.center();
        let u0 = TangentVector::project(*c, (Quaternion::J * c.as_quaternion()).0);
        out.push(Sample {
            name: format!("small-cap r={r}"),
            cap,
            field: small_cap_field(&cap, &u0).unwrap(),
        });
    }
    let cap = cap_at(c0, 1.0);
    let left = Quaternion::new(0.5, 0.5, -0.5, 0.5);
    let right = Quaternion::new(0.8, 0.0, 0.6, 0.0);
    out.push(Sample {
        name: "isometry of perturbed".into(),
        cap: cap.transformed(&left, &right),
        field: perturbed(&cap, 0.8, 3, Twist::Angular).transformed(&left, &right).unwrap(),
    });
    out
}
