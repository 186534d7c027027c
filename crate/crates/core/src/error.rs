use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point drifted off the unit sphere (norm {norm})")]
    OffSphere { norm: f64 },

    #[error("vector is not tangent at its base point (inner product {inner})")]
    NotTangent { inner: f64 },

    #[error("expected a unit vector, got norm {norm}")]
    NotUnit { norm: f64 },

    #[error("cap radius {0} must lie in (0, π]")]
    InvalidRadius(f64),

    #[error("axis must be a unit imaginary quaternion, got {0:?}")]
    InvalidAxis([f64; 4]),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature order {0} is below the minimum of 4")]
    OrderTooSmall(usize),

    #[error("integrand is not finite at node {index} ({point:?})")]
    NonFinite { index: usize, point: [f64; 4] },

    #[error("field `{field}` does not coincide with a Hopf field on the boundary of the cap")]
    NotHopfBoundary { field: String },

    #[error("1 + σ₁t + σ₂t² = {value:.3e} at node {index} is below the floor {floor:e} for t = {t}")]
    BelowDetFloor {
        index: usize,
        value: f64,
        floor: f64,
        t: f64,
    },

    #[error("Jacobian determinant {det:.3e} ≤ 0 at t = {t}: outside the diffeomorphism regime")]
    SingularJacobian { det: f64, t: f64 },

    #[error("t = {t} outside [0, {t_max}]")]
    InvalidStep { t: f64, t_max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
