use thiserror::Error;

use crate::manifold::GrassmannPoint;

pub type Result<T, E = GravError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GravError {
    #[error("matrix is numerically rank deficient (sigma_min / sigma_max = {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("eigenvalue gap {gap:e} at position k is degenerate; the average is not unique")]
    DegenerateGap { gap: f64 },

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("columns are not orthonormal (max |U^T U - I| = {0:e})")]
    NotOrthonormal(f64),

    #[error("tangent vector is not horizontal (max |base^T delta| = {0:e})")]
    NotHorizontal(f64),

    #[error("log map undefined: base^T point is singular")]
    LogMapUndefined,

    #[error("no convergence after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        last: Box<GrassmannPoint>,
    },

    #[error("communication graph is disconnected (lambda_2 = {lambda2:e})")]
    Disconnected { lambda2: f64 },

    #[error("band ratio is unbounded (pass-band minimum {0:e})")]
    UnboundedObjective(f64),

    #[error("empty collection")]
    EmptyCollection,

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<GravError>,
    },

    #[error("agent {agent}, iteration {iteration}: {source}")]
    AtAgent {
        agent: usize,
        iteration: usize,
        #[source]
        source: Box<GravError>,
    },

    #[error("cluster {cluster}: {source}")]
    InCluster {
        cluster: usize,
        #[source]
        source: Box<GravError>,
    },
}

impl GravError {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        GravError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_agent(self, agent: usize, iteration: usize) -> Self {
        GravError::AtAgent {
            agent,
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_cluster(self, cluster: usize) -> Self {
        GravError::InCluster {
            cluster,
            source: Box::new(self),
        }
    }
}
