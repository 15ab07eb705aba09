use stvenant_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("parse: {0}")]
    Parse(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: CoreError,
    },
    #[error("certify: expected a valid certificate, got: {0}")]
    CertificateInfeasible(String),
    #[error("assertions failed: {}", .0.join("; "))]
    Assertion(Vec<String>),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<CoreError> for LabError {
    fn from(e: CoreError) -> Self {
        LabError::Parse(e.to_string())
    }
}

impl LabError {
    pub fn stage(stage: &'static str) -> impl FnOnce(CoreError) -> LabError {
        move |source| LabError::Stage { stage, source }
    }

    /// 2 parse, 3 regime, 4 certificate infeasible although expected valid,
    /// 5 assertion failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Parse(_) | LabError::UnknownScenario(_) => 2,
            LabError::Stage { source, .. } if source.is_regime() => 3,
            LabError::CertificateInfeasible(_) => 4,
            LabError::Assertion(_) => 5,
            _ => 1,
        }
    }
}
