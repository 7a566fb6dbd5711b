use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("unknown header column `{0}`")]
    UnknownHeader(String),

    #[error("missing header column `{0}`")]
    MissingHeader(String),

    #[error("row {row}, field `{field}`: {message}")]
    MalformedRow {
        row: usize,
        field: String,
        message: String,
    },

    #[error("row {row}, field `{field}`: value {value} outside [{min}, {max}]")]
    OutOfRange {
        row: usize,
        field: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("series `{series}`: gap of {months} month(s) starting {year}-{month:02}")]
    ClimateGap {
        series: String,
        year: i32,
        month: u32,
        months: usize,
    },

    #[error("series `{series}`: duplicate observation for {year}-{month:02}")]
    DuplicateMonth { series: String, year: i32, month: u32 },

    #[error("series `{series}` has no value for {year}-{month:02}")]
    Unresolvable { series: String, year: i32, month: u32 },

    #[error("missing climate series `{0}`")]
    MissingSeries(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("column count mismatch: model expects {expected}, got {got}")]
    ColumnMismatch { expected: usize, got: usize },

    #[error("ill-conditioned posterior (condition number {condition:.3e}); offending columns {columns:?}")]
    IllConditioned { condition: f64, columns: Vec<usize> },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported model artifact: {0}")]
    Artifact(String),

    #[error("config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
