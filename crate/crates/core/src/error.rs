use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside 1..={max}", max = crate::sim::MAX_QUBITS)]
    QubitCount(usize),

    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitIndex { index: usize, num_qubits: usize },

    #[error("qubit {0} appears more than once in a target list")]
    DuplicateQubit(usize),

    #[error("amplitude vector of length {0} is not a power of two")]
    AmplitudeLength(usize),

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("invalid graph edge ({0}, {1})")]
    InvalidEdge(usize, usize),

    #[error("duplicate graph edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("forced outcome {outcome} on qubit {qubit} has zero probability")]
    ImpossibleOutcome { qubit: usize, outcome: u8 },

    #[error("invalid basis label {0:?}")]
    InvalidBasis(String),

    #[error("qubits {0:?} are not in a product state with the rest of the register")]
    NotProduct(Vec<usize>),

    #[error("wheel needs at least 3 qubits, got {0}")]
    WheelTooSmall(usize),

    #[error("run is finished; no further hops are possible")]
    RunFinished,

    #[error("{name} = {value} is not a probability")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("gate arity {0} is not supported")]
    InvalidArity(usize),

    #[error("calibration matrix for qubit {0} is singular")]
    SingularCalibration(usize),

    #[error("expected {expected} calibration matrices for a length-{len} distribution, got {got}")]
    CalibrationCount { expected: usize, got: usize, len: usize },

    #[error("missing tomography setting {0}")]
    MissingSetting(String),

    #[error("variant bucket (z={z}, x={x}) received no shots in setting {setting}")]
    EmptyBucket { z: bool, x: bool, setting: String },

    #[error("mixture weights sum to {0}, expected 1")]
    WeightMismatch(f64),

    #[error("bootstrap needs at least 2 resamples, got {0}")]
    BootstrapSize(usize),

    #[error("counts table has no shots in setting {0}")]
    NoShots(String),

    #[error("bootstrap estimator failed on resample {index}: {source}")]
    Bootstrap {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("counts format, line {line}: {msg}")]
    CountsFormat { line: usize, msg: String },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("results format: {0}")]
    ResultsFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
