use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least 2 cells per side, got {0}")]
    TooFewCells(usize),
    #[error("obstacle rectangle extends outside the unit square: {0}")]
    RectOutOfDomain(String),
    #[error("obstacle rectangle has negative extent: {0}")]
    RectNegativeExtent(String),
    #[error("obstacle rectangle covers the whole domain after snapping")]
    RectCoversDomain,
    #[error("cell index ({i}, {j}) out of range for an {m}x{m} grid")]
    IndexOutOfRange { i: usize, j: usize, m: usize },
    #[error("density coefficient {value} at cell ({i}, {j}) is negative")]
    NegativeDensity { i: usize, j: usize, value: f64 },
    #[error("field length {got} does not match grid with {want} cells")]
    LengthMismatch { got: usize, want: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Error)]
pub enum VelocityError {
    #[error("no visible target: neither the target nor any waypoint is reachable by a straight segment")]
    NoVisibleTarget,
    #[error("potential solve did not reach tolerance {tol} within {sweeps} sweeps (residual {residual})")]
    NonConvergence { tol: f64, sweeps: usize, residual: f64 },
    #[error("target edge selects no boundary cells: {0}")]
    EmptyTargetEdge(String),
}

#[derive(Debug, Error)]
pub enum PushforwardError {
    #[error("CFL violation: dt * max speed = {excess} exceeds cell size h = {h} (dt = {dt})")]
    CflViolation { excess: f64, h: f64, dt: f64 },
    #[error("mass from cell ({i}, {j}) would leave the walkable domain; velocity was not clamped")]
    Unconfined { i: usize, j: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("exact translation oracle does not support obstacle grids")]
    ObstaclesUnsupported,
    #[error("translated support leaves the unit square")]
    SupportEscape,
    #[error("motion map sends point ({x}, {y}) outside the domain")]
    ImageOutsideDomain { x: f64, y: f64 },
    #[error("particle left the walkable region at ({x}, {y})")]
    ParticleEscaped { x: f64, y: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Umbrella error for the engine and front-end paths.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Velocity(#[from] VelocityError),
    #[error(transparent)]
    Pushforward(#[from] PushforwardError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
