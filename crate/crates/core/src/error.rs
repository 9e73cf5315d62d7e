use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("dimension n = {0} not supported, need n >= 3")]
    Dimension(usize),
    #[error("kernel order {m} outside 1..={m_max}")]
    Order { m: usize, m_max: usize },
    #[error("kernel evaluated at r = {0}, need r > 0")]
    Singular(f64),
    #[error("coincident points")]
    Coincident,
    #[error("point has {got} coordinates, family dimension is {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("finite-difference step {h} too large for separation {r}")]
    Step { h: f64, r: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("non-triangular face at face {0}")]
    NonTriangularFace(usize),
    #[error("face {face} references vertex {vertex}, only {count} vertices")]
    VertexIndex { face: usize, vertex: usize, count: usize },
    #[error("open surface: edge ({0}, {1}) is not shared by exactly two panels")]
    OpenSurface(usize, usize),
    #[error("inconsistent orientation at edge ({0}, {1})")]
    InconsistentOrientation(usize, usize),
    #[error("boundary not connected ({0} components)")]
    NotConnected(usize),
    #[error("panel {0} has zero area")]
    DegeneratePanel(usize),
    #[error("invalid generator parameter: {0}")]
    Parameter(String),
    #[error("cone sampling: {0}")]
    EmptyCone(String),
    #[error("io: {0}")]
    Io(String),
}

impl MeshError {
    /// Stable numeric code per variant.
    pub fn code(&self) -> i32 {
        match self {
            MeshError::MalformedHeader(_) => 10,
            MeshError::Parse { .. } => 11,
            MeshError::NonTriangularFace(_) => 12,
            MeshError::VertexIndex { .. } => 13,
            MeshError::OpenSurface(..) => 14,
            MeshError::InconsistentOrientation(..) => 15,
            MeshError::NotConnected(_) => 16,
            MeshError::DegeneratePanel(_) => 17,
            MeshError::Parameter(_) => 18,
            MeshError::EmptyCone(_) => 19,
            MeshError::Io(_) => 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("operators are only discretised for n = 3, family has n = {0}")]
    Dimension(usize),
    #[error("layer order {0} not allowed here")]
    Order(usize),
    #[error("density belongs to a different mesh")]
    MeshMismatch,
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("point ({0}, {1}, {2}) is outside the domain")]
    Exterior(f64, f64, f64),
    #[error("point at distance {dist:.3e} from the boundary, guard is {guard:.3e}")]
    NearBoundary { dist: f64, guard: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("Robin coefficient b_{index} has a negative entry ({value}) at panel {panel}; need b >= 0 (Robin condition b >= 0 and b not identically 0)")]
    NegativeCoefficient { index: usize, panel: usize, value: f64 },
    #[error("Robin coefficient b_{0} is identically zero; need b >= 0 and b ≢ 0")]
    ZeroCoefficient(usize),
    #[error("problem order must be at least 1")]
    Order,
    #[error("expected {expected} vectors for {what}, got {got}")]
    Count { what: &'static str, expected: usize, got: usize },
    #[error("exponent p = {0} outside (1, inf)")]
    Exponent(f64),
    #[error("system T_{level} is singular or ill-conditioned (estimated condition {cond:.3e})")]
    IllConditioned { level: usize, cond: f64 },
    #[error("system T_{level} solved to relative residual {residual:.3e}, above {limit:.1e}")]
    Residual { level: usize, residual: f64, limit: f64 },
    #[error("order {k} must be below m = {m}")]
    LaplacianOrder { k: usize, m: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("unknown manufactured case '{0}'")]
    UnknownCase(String),
    #[error("unknown suite '{0}'")]
    UnknownSuite(String),
    #[error("could not place {wanted} sample points with margin {margin} ({found} found)")]
    Sampling { wanted: usize, found: usize, margin: f64 },
    #[error("refinement range must be non-empty and increasing, got {0}..{1}")]
    Refinements(u32, u32),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
