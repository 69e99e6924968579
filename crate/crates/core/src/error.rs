use crate::geometry::PointId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no sample at point `{0}`")]
    MissingSample(PointId),

    #[error("argument mismatch: {0}")]
    ArgumentMismatch(String),

    #[error("sort mismatch: {0}")]
    SortMismatch(String),

    #[error("degenerate basis at point `{0}`")]
    DegenerateBasis(PointId),

    #[error("point `{0}` lies outside the measure domain")]
    OutsideMeasure(PointId),

    #[error("point `{0}` does not underlie the frame")]
    PointNotInFrame(PointId),

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("index set is not directed: {0}")]
    NotDirected(String),

    #[error("unsupported functional: {0}")]
    Unsupported(String),

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("scenario error at {location}: {reason}")]
    Scenario { location: String, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn scenario(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Scenario {
            location: location.into(),
            reason: reason.into(),
        }
    }
}
