pub mod interval;
pub mod ivp;
pub mod quad;
pub mod real;

pub use interval::{Interval, IntervalError};
pub use ivp::{solve_ivp, IvpError, IvpSpec, Rhs, RhsError, Trajectory};
pub use quad::{quad_adaptive, CumulativeIntegral, QuadError};
pub use real::{default_precision, Real};
