use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid utility specification: {0}")]
    InvalidUtility(String),

    #[error("utility is not finite at a domain boundary ({0})")]
    DomainBoundary(String),

    #[error("invalid holdings: {0}")]
    InvalidHoldings(String),

    #[error("encounter graph invalid: {0}")]
    Graph(String),

    #[error("({i}, {j}) is not an edge of the encounter graph")]
    NotAnEdge { i: usize, j: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("measurement protocol error: {0}")]
    Protocol(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("nodes {a} and {b} are not grid-adjacent")]
    NotAdjacent { a: String, b: String },

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("oracle domain error: {0}")]
    OracleDomain(String),

    #[error("Legendre minimisation did not converge after {iterations} iterations (last iterate beta={beta}, nu={nu:?})")]
    LegendreNoConvergence {
        iterations: usize,
        beta: f64,
        nu: Vec<f64>,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("zero-variance oracle surface")]
    DegenerateOracle,

    #[error("node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn at_node(node: usize, source: Error) -> Error {
        Error::AtNode {
            node,
            source: Box::new(source),
        }
    }

    /// Whether the failure originates from invalid user input rather than numerics or I/O.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::UnknownPreset(_)
            | Error::InvalidUtility(_)
            | Error::InvalidHoldings(_)
            | Error::Graph(_)
            | Error::DimensionMismatch(_)
            | Error::Grid(_) => true,
            Error::Json(e) => !e.is_io(),
            Error::AtNode { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Json(e) => e.is_io(),
            Error::AtNode { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
