use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::reduction::ReductionResult;
use crate::semilinear::SolveReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug)]
pub enum Error {
    /// Grid construction rejected (degenerate bounds, non-square cells, too few nodes).
    InvalidGrid(String),
    /// Two objects defined on different grids were combined.
    GridMismatch,
    /// A field or parameter contained NaN or an infinity.
    NonFinite(&'static str),
    /// Sobolev exponent outside `[1, 2)`.
    InvalidExponent(f64),
    AtomOutsideDomain { x: f64, y: f64 },
    DuplicateAtom { x: f64, y: f64 },
    /// Mollifier support narrower than two grid cells.
    KernelTooNarrow { radius: f64, h: f64 },
    /// Evaluation node closer to the boundary than the kernel radius.
    TooCloseToBoundary { distance: f64, radius: f64 },
    /// A positive measure was required.
    NotPositive,
    LinearSolve { residual: f64, iterations: usize },
    /// Newton and the monotone fallback both failed; carries the last iterate.
    NonConverged(Box<SolveReport>),
    /// Sampled `f` increases in its second argument.
    MonotonicityViolation { x: f64, y: f64, u_low: f64, u_high: f64 },
    /// A limit ladder did not become Cauchy; carries the partial result and trace.
    NonConvergedSequence(Box<ReductionResult>),
    LadderTooShort { required: usize, got: usize },
    Precondition(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::GridMismatch => write!(f, "operands live on different grids"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::InvalidExponent(q) => write!(f, "Sobolev exponent {q} outside [1, 2)"),
            Error::AtomOutsideDomain { x, y } => {
                write!(f, "atom at ({x}, {y}) is not strictly inside the domain")
            }
            Error::DuplicateAtom { x, y } => write!(f, "two atoms at ({x}, {y})"),
            Error::KernelTooNarrow { radius, h } => write!(
                f,
                "mollifier radius {radius} is narrower than two cells (h = {h})"
            ),
            Error::TooCloseToBoundary { distance, radius } => write!(
                f,
                "node at distance {distance} from the boundary, kernel radius {radius}"
            ),
            Error::NotPositive => write!(f, "measure must be nonnegative"),
            Error::LinearSolve {
                residual,
                iterations,
            } => write!(
                f,
                "linear solve failed: relative residual {residual:e} after {iterations} iterations"
            ),
            Error::NonConverged(report) => write!(
                f,
                "semilinear solve did not converge: residual {:e} after {} Newton iterations",
                report.final_residual, report.newton_iters
            ),
            Error::MonotonicityViolation {
                x,
                y,
                u_low,
                u_high,
            } => write!(
                f,
                "f is increasing in u at ({x}, {y}): f(u={u_low}) < f(u={u_high})"
            ),
            Error::NonConvergedSequence(result) => write!(
                f,
                "{} ladder did not converge after {} levels",
                result.scheme.name(),
                result.trace.len()
            ),
            Error::LadderTooShort { required, got } => {
                write!(f, "ladder needs at least {required} entries, got {got}")
            }
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
