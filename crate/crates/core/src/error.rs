use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty spectrum at E={energy}: {energy} is not a sum of two squares")]
    EmptySpectrum { energy: u64 },

    #[error("energy must be a positive integer, got {0}")]
    InvalidEnergy(u64),

    #[error("imaginary residue {residue:e} exceeds bound {bound:e}; coefficients are not conjugate symmetric")]
    NonRealValue { residue: f64, bound: f64 },

    #[error("grid resolution {n} is below the oversampling bound {min}")]
    ResolutionTooCoarse { n: usize, min: usize },

    #[error("ball radius {r} must satisfy 0 < r < 1/2 to embed in the torus")]
    BallTooLarge { r: f64 },

    #[error("ball radius {r} is under-resolved on an N={n} grid (need r*N >= {min_cells})")]
    RadiusUnderResolved { r: f64, n: usize, min_cells: f64 },

    #[error("radius {r} must satisfy 0 < r < {max}")]
    RadiusTooLarge { r: f64, max: f64 },

    #[error("inner ball mass {mass:e} at ({x}, {y}) is numerically negligible")]
    DivisionByNegligibleMass { x: f64, y: f64, mass: f64 },

    #[error("ball B(({x}, {y}), {radius}) leaves the dilated chart |y| <= {chart}")]
    ChartExceeded {
        x: f64,
        y: f64,
        radius: f64,
        chart: f64,
    },

    #[error("test function `{name}` is negative ({value:e}) at ({x}, {y})")]
    NegativeTestFunction {
        name: String,
        value: f64,
        x: f64,
        y: f64,
    },

    #[error("bound chain step `{step}` violated: {lhs} vs {rhs}")]
    ChainStepViolated { step: String, lhs: f64, rhs: f64 },

    #[error("invalid eigenfunction spec: {0}")]
    InvalidSpec(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
