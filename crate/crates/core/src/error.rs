use thiserror::Error;

/// Errors shared across the crate. Parameter validation is eager, so
/// numerical routines may assume their inputs satisfy the documented
/// invariants and only report the failure modes listed here.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` must be finite and {constraint}, got {value}")]
    InvalidParameter {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },

    /// Resource mortality eps = 0 makes the rescaling 1/eps undefined.
    #[error("resource mortality eps must be positive (division by zero in rescaling)")]
    ZeroMortality,

    /// (1-D)^2 - 4 eps/alpha <= 0: the two vegetation-only equilibria do not
    /// exist as distinct real points.
    #[error(
        "non-generic regime: discriminant (1-D)^2 - 4 eps/alpha = {discriminant} is not positive"
    )]
    NonGenericRegime { discriminant: f64 },

    /// eps_S * mu = 0: the consumer equation decouples and x_e is undefined.
    #[error("consumer decoupled: eps_S * mu = 0, coexistence abscissa undefined")]
    ConsumerDecoupled,

    /// x_e collides with x0 or x1 (transcritical bifurcation boundary).
    #[error("transcritical boundary: x_e equals {which}")]
    TranscriticalBoundary { which: &'static str },

    #[error("{what} requires {constraint}")]
    Domain {
        what: &'static str,
        constraint: &'static str,
    },

    /// Adaptive step shrank below min_step; carries the last valid point.
    #[error(
        "step size underflow at t = {t} (state {x}, {y}): problem too stiff for the tolerances"
    )]
    StepUnderflow { t: f64, x: f64, y: f64 },

    /// A separatrix failed to reach the section within the time horizon.
    #[error("{manifold} did not cross the section x = {section} within t_max")]
    NoSectionCrossing {
        manifold: &'static str,
        section: f64,
    },

    /// Bisection bracket endpoints have the same gap sign.
    #[error("heteroclinic bracket invalid: gap({lo}) = {gap_lo}, gap({hi}) = {gap_hi} have the same sign")]
    BracketFailure {
        lo: f64,
        hi: f64,
        gap_lo: f64,
        gap_hi: f64,
    },

    /// Return-map iteration hit the iteration cap without converging or
    /// escaping; distinct from a definite "no cycle" answer.
    #[error("limit-cycle search inconclusive: {detail}")]
    Inconclusive { detail: &'static str },

    /// Separatrix offset refinement failed the Richardson consistency check.
    #[error("separatrix offset refinement did not stabilize (last height change {delta})")]
    OffsetUnstable { delta: f64 },

    #[error("sliding segment is degenerate: lambda = x_e - (x0+x1)/2 = 0")]
    DegenerateSliding,

    /// Filippov integration bounced on the switching line too many times.
    #[error("chattering detected: {events} switching events")]
    Chattering { events: usize },

    #[error("point (x_e = {xe}, F = {f}) is not in the one-limit-cycle region")]
    NotInCycleRegion { xe: f64, f: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
