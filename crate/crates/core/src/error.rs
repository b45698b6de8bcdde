use thiserror::Error;

/// Errors raised by the numerical engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fixed-point sweeps did not converge at t = {t} after {iters} iterations (last update {update:e})")]
    NonConvergence { t: f64, iters: usize, update: f64 },

    #[error("non-finite value encountered at t = {t}")]
    Blowup { t: f64 },

    #[error("domain too small: boundary deviation {deviation:e} exceeds threshold {threshold:e}")]
    DomainTooSmall { deviation: f64, threshold: f64 },

    #[error("point (t = {t}, x = {x}) lies outside the surface")]
    OutOfDomain { t: f64, x: f64 },

    #[error("payoff sup-norm {sup} exceeds the cap {cap}")]
    UnboundedPayoff { sup: f64, cap: f64 },

    #[error("flow lost monotonicity (xi = {xi:e} at t = {t}, y0 = {y0})")]
    MonotoneViolation { t: f64, y0: f64, xi: f64 },

    #[error("characteristics left the y-table [{lo}, {hi}] at t = {t}")]
    GridEscape { t: f64, lo: f64, hi: f64 },

    #[error("psi' exceeded the overflow cap {cap:e} at u = {u}")]
    OverflowGuard { u: f64, cap: f64 },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("variant mismatch: {0}")]
    VariantMismatch(String),

    #[error("r must vanish at both endpoints: r(0) = {r0:e}, r(T) = {rt:e}")]
    EndpointViolation { r0: f64, rt: f64 },

    #[error("root is not bracketed on [{lo}, {hi}] (f = {f_lo:e}, {f_hi:e})")]
    BracketFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("no closed form available: {0}")]
    ClosedFormUnavailable(String),

    #[error("generator rejected by audit: {0}")]
    AuditRejected(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Blowup { .. }
                | Error::DomainTooSmall { .. }
                | Error::MonotoneViolation { .. }
                | Error::GridEscape { .. }
                | Error::OverflowGuard { .. }
                | Error::BracketFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
