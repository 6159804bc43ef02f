use thiserror::Error;

/// Errors surfaced by the analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature failed to converge: requested {requested:.3e}, achieved {achieved:.3e}")]
    QuadratureFailure { requested: f64, achieved: f64 },

    /// Switching times are not strictly increasing inside the period.
    #[error("switching-time ordering violated at state {state:?}: theta_{index} = {value}")]
    OrderingViolation {
        index: usize,
        value: f64,
        state: Vec<f64>,
    },

    /// The vanishing-Delta1 conditions do not hold for the given coefficients.
    #[error("coefficients violate the vanishing-Delta1 conditions (gamma = {0:?})")]
    ConditionViolation((f64, f64, f64)),

    /// Unknown preset name.
    #[error("unknown preset `{0}` (expected `example1` or `example2`)")]
    UnknownPreset(String),

    /// The zero polynomial has no Sturm chain / no isolated roots.
    #[error("operation undefined for the zero polynomial")]
    ZeroPolynomial,

    /// Near-tangential contact with the switching curve: the crossing
    /// assumption fails and no sliding convention is applied.
    #[error("grazing detected at t = {t}: |d(y - x^3)/dt| = {speed:.3e} below threshold")]
    GrazingDetected { t: f64, speed: f64 },

    /// Integrator exceeded its step budget.
    #[error("step limit exceeded after {0} steps")]
    StepLimitExceeded(usize),

    /// The trajectory never returned to the section.
    #[error("trajectory did not return to the section within the step budget")]
    NoReturn,

    /// eps = 0 makes the displacement identically zero: every orbit is
    /// periodic and no cycle is isolated.
    #[error("degenerate system: eps = 0, displacement vanishes identically")]
    DegenerateSystem,

    /// Malformed configuration or input file.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
