use thiserror::Error;

/// Errors raised by the transmitter, channel model and receiver chain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DspError {
    #[error("input shape error: {0}")]
    InputShape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid CAZAC root {root} for length {len}: root must be coprime with the length")]
    InvalidSeed { root: i64, len: usize },

    #[error("no burst found")]
    NoBurstFound,

    #[error("estimation unreliable: {0}")]
    EstimationUnreliable(String),

    #[error("singular channel estimate at bin {bin}")]
    SingularEstimate { bin: usize },

    #[error("zero-forcing division guard tripped at bin {bin}")]
    DivisionGuard { bin: usize },

    #[error("frame sync failure: PMNR {pmnr_db:.2} dB below floor {floor_db:.2} dB")]
    SyncFailure { pmnr_db: f64, floor_db: f64 },

    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    #[error("least-squares oracle singular at bin {bin}")]
    SingularOracle { bin: usize },

    #[error("internal consistency error: {0}")]
    InternalConsistency(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("burst {burst}, stage {stage}: {source}")]
    Stage {
        burst: usize,
        stage: &'static str,
        #[source]
        source: Box<DspError>,
    },
}

impl DspError {
    pub(crate) fn at_stage(self, burst: usize, stage: &'static str) -> Self {
        DspError::Stage {
            burst,
            stage,
            source: Box::new(self),
        }
    }

    /// Name of the failing pipeline stage, when the error carries one.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            DspError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, DspError>;
