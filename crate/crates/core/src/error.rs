use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("evaluation point {point} lies within {tolerance:e} of pole {pole}")]
    AtPole {
        point: String,
        pole: String,
        tolerance: f64,
    },
    #[error("poles {0} and {1} are not separated")]
    CoincidentPoles(usize, usize),
    #[error("residue {0} is zero")]
    ZeroResidue(usize),
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("operation requires constant_at_infinity = 0, got {0}")]
    NonzeroConstant(String),
    #[error("denominator is not monic (leading coefficient {0})")]
    NotMonic(String),
    #[error("denominator has a repeated root near {0}")]
    RepeatedRoot(String),
    #[error("numerator degree {numerator} is not below denominator degree {denominator}")]
    ImproperFraction {
        numerator: usize,
        denominator: usize,
    },
    #[error("polynomial root finding failed: {0}")]
    RootFinding(String),
    #[error("contours cannot be sized: {0}")]
    ContourOverlap(String),
    #[error("entire function '{0}' has no closed residue at infinity")]
    NotPolynomial(String),
    #[error("contour nesting failed: {0}")]
    ContourNesting(String),
    #[error("gradient inconsistent with value: defect {defect:e}")]
    GradientInconsistent { defect: f64 },
    #[error("invalid string: {0}")]
    InvalidString(String),
    #[error("interlacing violated: {0}")]
    Interlacing(String),
    #[error("not the Weyl data of a positive string: {0}")]
    InvalidWeylData(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("string mass overflow: {0}")]
    MassOverflow(String),
    #[error("functional undefined: {0}")]
    Undefined(String),
    #[error("flow aborted: {0}")]
    FlowAborted(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
