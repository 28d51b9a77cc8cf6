use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("point ({re}, {im}) is not inside the open unit disk")]
    OutsideDisk { re: f64, im: f64 },
    #[error("point is not in the open upper half-plane")]
    OutsideHalfPlane,
    #[error("coefficients do not define a disk isometry (|a|^2 - |b|^2 <= 0)")]
    NotAnIsometry,
    #[error("negative length {0}")]
    NegativeLength(f64),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("volume profile needs dimension >= 2, got {0}")]
    Dimension(u32),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("intensity {lambda} exceeds the field's lambda_max {lambda_max}")]
    Coupling { lambda: f64, lambda_max: f64 },
    #[error("intensity must be positive and finite, got {0}")]
    Intensity(f64),
    #[error("query radius {radius} beyond supported range {max}")]
    Range { radius: f64, max: f64 },
    #[error("tile width must be positive, got {0}")]
    TileWidth(f64),
    #[error("root coincides with an existing point")]
    DuplicateRoot,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("vertex could not be certified within window cap {cap}")]
    CertificationCap { cap: f64 },
    #[error("intensity {0} outside supported range [0.05, 1]")]
    Intensity(f64),
    #[error("{failed} of {trials} trials could not be certified")]
    TooManyFailures { failed: usize, trials: usize },
    #[error("edge length must be positive, got {0}")]
    Length(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("step length must be positive, got {0}")]
    StepLength(f64),
    #[error("{{{p},{q}}} is not a hyperbolic tessellation")]
    Tessellation { p: u32, q: u32 },
    #[error("matrix {index} has determinant {det}, expected 1")]
    NotUnimodular { index: usize, det: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    Probabilities(f64),
    #[error("empty matrix distribution")]
    EmptyDistribution,
    #[error("at most {max} steps supported, got {got}")]
    TooManySteps { max: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("need at least {needed} samples, got {got}")]
    Insufficient { needed: usize, got: usize },
    #[error("traces have differing lengths")]
    RaggedTraces,
    #[error("trace has no past branch")]
    MissingPast,
    #[error("only {0} usable scales, need 3")]
    TooFewScales(usize),
    #[error("oracle refuses {0} points (limit 200)")]
    OracleSize(usize),
}
