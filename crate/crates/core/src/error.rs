use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("change #{position} ({change}) is inapplicable: {reason}")]
    ChangeInapplicable {
        position: usize,
        change: String,
        reason: String,
    },
    #[error("grid is split into {components} islands")]
    GridDisconnected { components: usize },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DcError {
    #[error("singular nodal system: {0}")]
    SingularSystem(String),
    #[error("outage of branch {branch} islands the grid")]
    IslandingOutage { branch: String },
    #[error("branch {branch} carries no reference flow; the flow-change ratio is indeterminate")]
    ZeroReferenceFlow { branch: String },
    #[error("branch {branch} is not connected in the reference topology")]
    BranchNotConnected { branch: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StError {
    #[error("change set targets {target} more than once")]
    DuplicateChange { target: String },
    #[error("unitary state for change #{position} ({change}) failed: {source}")]
    UnitaryState {
        position: usize,
        change: String,
        #[source]
        source: DcError,
    },
    #[error("observable of change #{position} ({change}) vanishes in the reference state but not in every unitary state")]
    DegenerateObservable { position: usize, change: String },
    #[error("coefficient matrix is singular (pivot {pivot:.3e} at column {column}); the change combination is inconsistent or islanding")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("coefficient system residual {residual:.3e} exceeds {limit:.1e}")]
    Residual { residual: f64, limit: f64 },
    #[error("superposed flow {flow:.3e} on disconnected branch {branch} exceeds the self-check bound")]
    SelfCheckFailed { branch: String, flow: f64 },
    #[error("beta solution does not belong to this basis: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Dc(#[from] DcError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported case feature: {0}")]
    UnsupportedFeature(String),
    #[error("scenario schema error: {0}")]
    Schema(String),
    #[error("unknown {kind} id {id:?}")]
    UnknownId { kind: &'static str, id: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
