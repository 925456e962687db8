use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("evaluation point coincides with the dislocation at ({0}, {1})")]
    CoincidentPoints(f64, f64),

    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dislocation {index} at ({x}, {y}) lies outside the confinement rectangle")]
    OutsideConfinement { index: usize, x: f64, y: f64 },

    #[error("dislocations {i} and {j} are {distance:e} apart, below the minimal separation {required:e}")]
    SeparationViolated {
        i: usize,
        j: usize,
        distance: f64,
        required: f64,
    },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("support of size {size} exceeds the exact solver cap {cap}")]
    SupportCapExceeded { size: usize, cap: usize },

    #[error("measures have unequal total mass ({left} vs {right})")]
    UnequalMass { left: f64, right: f64 },

    #[error("test function is not 1-Lipschitz in x1 on slip plane {plane}: slope {slope}")]
    LipschitzViolation { plane: f64, slope: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("initial configuration is not stable (residual {residual:e} > tol {tol:e}); relax it first")]
    Unstable { residual: f64, tol: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}
