use std::path::PathBuf;

use proofspace::ablation::AblationError;
use proofspace::axiom_audit::AuditError;
use proofspace::clustering::ClusteringError;
use proofspace::corpus::CorpusError;
use proofspace::geometry::GeometryError;
use proofspace::orchestrator::OrchestratorError;
use proofspace::taxonomy::TaxonomyError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("plot needs a 2-d solution, got k = {0}")]
    DimensionNotTwo(usize),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Ablation(#[from] AblationError),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Geometry(_) | CliError::Clustering(_) => EXIT_NUMERIC,
            CliError::Corpus(CorpusError::DegenerateDistribution | CorpusError::DegenerateLayer { .. } | CorpusError::TooFewPoints { .. }) => {
                EXIT_NUMERIC
            }
            _ => EXIT_DATA,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn json(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Json { path, source }
    }
}
