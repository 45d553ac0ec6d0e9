use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid language pair `{0}` (expected `xx-yy`)")]
    BadLangPair(String),
    #[error("token is empty or contains whitespace: {0:?}")]
    BadToken(String),
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("sample `{id}` has a {found} label in a {expected} dataset")]
    LabelKind {
        id: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("language pair {0} has only one class; cannot balance")]
    SingleClass(String),
    #[error("language pair {0} has no English side")]
    NoEnglishSide(String),
    #[error("datasets mix tasks {0} and {1}")]
    TaskMismatch(&'static str, &'static str),
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam {
        name: &'static str,
        reason: String,
    },
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("missing ids: {0}")]
    MissingIds(String),
    #[error("id sets differ: {0}")]
    IdSetMismatch(String),
    #[error("undefined correlation: {0} series is constant")]
    UndefinedCorrelation(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("loss became NaN at epoch {0}")]
    NanLoss(usize),
    #[error("model `{model}`: {source}")]
    Candidate {
        model: String,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
