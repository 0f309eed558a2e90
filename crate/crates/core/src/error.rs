use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("empty intersection: no samples within radius {radius} of the requested center")]
    EmptyIntersection { radius: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("oracle limit: brute force enumeration supports Q <= 8, got Q = {0}")]
    OracleLimit(usize),

    #[error("branch point: derivative matching ambiguous (branch gap {gap:e} below {tol:e})")]
    BranchAmbiguity { gap: f64, tol: f64 },

    #[error("operation requires scalar branches (m = 1), got m = {0}")]
    NotScalar(usize),

    #[error("insufficient samples: need at least {needed}, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("recenter first: polynomials have different centers")]
    RecenterFirst,

    #[error("exponent band violated: lambda = {lambda} not in ({lo}, {hi})")]
    ExponentBand { lambda: f64, lo: f64, hi: f64 },

    #[error("too few usable rungs: {found} (need at least {needed})")]
    TooFewRungs { found: usize, needed: usize },

    #[error("hypothesis constants too weak: no dyadic gamma >= 2^-64 satisfies the contraction bound")]
    HypothesisTooWeak,

    #[error("stratum {stratum}: {source}")]
    Stratum {
        stratum: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no admissible (sigma, rho) pairs at this resolution")]
    NoAdmissiblePairs,

    #[error("reflection requires zero trace (max trace {max_trace:e} exceeds {tol:e})")]
    NonZeroTrace { max_trace: f64, tol: f64 },

    #[error("not degree-one homogeneous: deviation {deviation:e} exceeds {tol:e}")]
    NotHomogeneous { deviation: f64, tol: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Malformed or inconsistent input, as opposed to a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
