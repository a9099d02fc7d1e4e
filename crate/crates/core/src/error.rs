use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("generator count mismatch: {left} vs {right}")]
    GeneratorMismatch { left: usize, right: usize },

    #[error("generator index {index} outside 1..={generators}")]
    GeneratorOutOfRange { index: usize, generators: usize },

    #[error("too many generators: {0} (at most {max})", max = crate::grassmann::MAX_GENERATORS)]
    TooManyGenerators(usize),

    #[error("non-invertible Grassmann element (zero body)")]
    NonInvertible,

    #[error("expected an even Grassmann element, got parity {0}")]
    NotEven(crate::grassmann::Parity),

    #[error("cannot parse Grassmann number {text:?}: {reason}")]
    GrassmannSyntax { text: String, reason: String },

    #[error("lexical error at position {position}: {reason}")]
    Lex { position: usize, reason: String },

    #[error("syntax error at position {position}: {reason}")]
    Syntax { position: usize, reason: String },

    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),

    #[error("parity violation: {0}")]
    ParityViolation(String),

    #[error("invalid coordinate system: {0}")]
    InvalidCoordinates(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix body (pivot {pivot} at column {column})")]
    SingularBody { column: usize, pivot: f64 },

    #[error("inhomogeneous input: {0}")]
    Inhomogeneous(String),

    #[error("left numeric domain W_G at t = {last_valid_time}: {reason}")]
    BlowUp { last_valid_time: f64, reason: String },

    #[error("connection is not torsion-free (max residual {max_residual:e})")]
    NotTorsionFree { max_residual: f64, obstruction: Vec<f64> },

    #[error("not projectively flat difference (max residual {residual:e})")]
    NotProjective { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model file line {line}: {reason}")]
    Model { line: usize, reason: String },
}
