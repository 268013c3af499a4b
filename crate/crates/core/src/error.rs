use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("no bracketing sign change: {0}")]
    NoBracket(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("trace {0:e} is not zero; not at a Hopf point")]
    NotAtHopf(f64),
    #[error("step size collapsed to {h:e} at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("no stopping event before the time budget {0}")]
    NoEvent(f64),
    #[error("no sign change: {0}")]
    NoSignChange(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("dt = {dt:e} exceeds the explicit diffusion bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("non-finite value at t = {0}")]
    NonFinite(f64),
    #[error("history does not cover the delay window: {0}")]
    HistoryUnderflow(String),
    #[error("i*omega is a multiple root (|D'|^2 = {0:e})")]
    MultipleRoot(f64),
    #[error("path crosses a curve tangentially at ({0}, {1})")]
    PathAmbiguous(f64, f64),
    #[error("degenerate rescaling: {0}")]
    DegenerateRescale(String),
    #[error("singular sigma-to-nu map")]
    SingularMap,
    #[error("every mode is inadmissible over the range")]
    EmptyCurve,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
