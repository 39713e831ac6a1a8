use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("level {requested} exceeds the declared level {declared}")]
    LevelOutOfRange { requested: usize, declared: usize },
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("point is not in the partial quadrant: coordinate {index} = {value}")]
    NotInQuadrant { index: usize, value: f64 },
    #[error("operation not supported by this backend: {0}")]
    BackendUnsupported(String),
    #[error("scales have different maximal levels ({0} vs {1})")]
    MismatchedMaxLevel(usize, usize),
    #[error("truncation window exit: {0}")]
    WindowExit(String),
    #[error("map carries no derivative evaluator and finite differences were not requested")]
    MissingDerivative,
    #[error("point leaves the domain: {0}")]
    DomainExit(String),
    #[error("scale has maximal level 0, there is no room to shift")]
    NoRoomToShift,
    #[error("maps are not composable: {0}")]
    Composability(String),
    #[error("projection family is not idempotent (residual {0:e})")]
    NonIdempotent(f64),
    #[error("normalization failure: {0}")]
    Normalization(String),
    #[error("numerical rank is ambiguous: relative singular value {0:e} lies in the guard band")]
    AmbiguousRank(f64),
    #[error("retractions do not share the same image (residual {0:e})")]
    ImageMismatch(f64),
    #[error("map is not invertible on the samples: {0}")]
    NonInvertible(String),
    #[error("degenerate basis (condition number {0:e})")]
    DegenerateBasis(f64),
    #[error("invalid chart data: {0}")]
    InvalidChart(String),
    #[error("points must be mutually distinct")]
    CoincidentPoints,
    #[error("fixed-point iteration did not converge in {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("parameter lies outside the validity radius ({norm} > {radius})")]
    OutsideRadius { norm: f64, radius: f64 },
    #[error("node {node}: {source}")]
    AtNode { node: usize, source: Box<Error> },
    #[error("linearization is not surjective: {0}")]
    NotTransversal(String),
    #[error("morphism table exceeds {0} entries")]
    TableOverflow(usize),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("weak fibered product is empty")]
    EmptyFiberedProduct,
    #[error("bundle element at bi-level ({base}, {fiber}) violates k <= m + 1")]
    Inadmissible { base: usize, fiber: usize },
    #[error("point is not covered by any chart")]
    Uncharted,
    #[error("branch weights must be positive and sum to 1, got {0}")]
    WeightSum(String),
    #[error("bundle models do not match: {0}")]
    ModelMismatch(String),
    #[error("compactness certification failed: {0}")]
    CertificationFailure(String),
    #[error("point is not a solution (Lambda(f(x)) = 0)")]
    NotASolution,
    #[error("no transversal perturbation found after {attempts} attempts (worst min singular value {worst:e})")]
    ExhaustedAttempts { attempts: usize, worst: f64 },
    #[error("form degree {form} does not match dimension {expected}")]
    DegreeMismatch { form: usize, expected: usize },
    #[error("branch {0} carries no orientation")]
    Unoriented(usize),
    #[error("branch {0} has no boundary parametrization")]
    MissingBoundary(usize),
    #[error("point is not covered by the branched subgroupoid")]
    UncoveredPoint,
    #[error("form is not invariant under a sampled morphism (deviation {0:e})")]
    NotInvariant(f64),
    #[error("groupoid axiom violated: {0}")]
    GroupoidAxiom(String),
    #[error("functor law violated: {0}")]
    FunctorLaw(String),
    #[error("left leg is not an equivalence: {0}")]
    NotAnEquivalence(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_node(node: usize, source: Error) -> Self {
        Error::AtNode {
            node,
            source: Box::new(source),
        }
    }
}
