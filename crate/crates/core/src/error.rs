use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("date index {index} outside 1..={n_dates}")]
    DateOutOfRange { index: usize, n_dates: usize },

    #[error("no PD assigned to obligor {obligor} at date {date}")]
    MissingPd { date: usize, obligor: String },

    #[error("no default flag recorded for obligor {obligor} at date {date}")]
    MissingDefaultFlag { date: usize, obligor: String },

    #[error("portfolio test requires customers at every date (date {0} is empty)")]
    EmptyDate(usize),

    #[error("target mean {target} outside the feasible interval [{lower}, {upper}]")]
    Infeasible { target: f64, lower: f64, upper: f64 },

    #[error("mu_old = {mu_old} exceeds its admissible bound {bound}")]
    MuOldTooLarge { mu_old: f64, bound: f64 },

    #[error("alternative variance bound is not positive ({0}); the bound is vacuous for this panel")]
    VacuousBound(f64),

    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),

    #[error("probability {0} outside (0, 1)")]
    NotAProbability(f64),

    #[error("persistence counts inconsistent with customers per date: {0}")]
    Persistence(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
