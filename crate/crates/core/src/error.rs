use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("division by an interval containing zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("invalid interval bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("cannot parse `{0}` as a decimal number")]
    Parse(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("scale constant s[{index}] = {value} must be positive")]
    NonPositiveScale { index: usize, value: f64 },
    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Error)]
pub enum CiftError {
    #[error("no evidence of invertibility: ‖I − BA‖ bound {rho1} is not below 1")]
    NotInvertibleEvidence { rho1: f64 },
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("approximate inverse could not be computed")]
    SingularApproximation,
}

#[derive(Debug, Clone, Error)]
pub enum ContinuationError {
    #[error("tangent undefined: null space of the Jacobian is not one-dimensional")]
    TangentUndefined,
    #[error("Newton corrector failed to converge (last residual {residual:e})")]
    CorrectorFailed { residual: f64 },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<ContinuationError>,
    },
    #[error(transparent)]
    Cift(#[from] CiftError),
    #[error("link between boxes {step} and {next} failed")]
    LinkFailed { step: usize, next: usize },
}

#[derive(Debug, Clone, Error)]
pub enum BifurcationError {
    #[error("certification failed at stage `{stage}`: {reason}")]
    CertificationFailed { stage: &'static str, reason: String },
    #[error("condition `{0}` is inconclusive: its enclosure contains the forbidden value")]
    ConditionInconclusive(String),
    #[error("spectrum inconclusive: {0}")]
    SpectrumInconclusive(String),
    #[error("no approximate bifurcation point found: {0}")]
    NotFound(String),
}

#[derive(Debug, Clone, Error)]
pub enum DynamicsError {
    #[error("orbit diverged at iterate {0}")]
    OrbitDiverged(usize),
    #[error("rotation number undefined: {0}")]
    RotationUndefined(String),
    #[error("invalid Farey bounds: {0}")]
    InvalidBounds(String),
}
