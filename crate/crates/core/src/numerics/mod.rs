//! Shared numerical kernels: finite differences, small dense linear algebra,
//! ODE steppers with dense output, and the finite-ε dragging oracle.

pub mod dragging;
pub mod fd;
pub mod linalg;
pub mod ode;

pub use dragging::{dragging_oracle, DraggingEstimates, DraggingProbe};
pub use fd::{fd_derivative, FdScheme};
pub use ode::{ode_integrate, IntegratorSettings, OdeMethod};
