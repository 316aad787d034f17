//! Steady-state analysis of the MAP/G_r^(h,H)/1 bulk-service queue with
//! queue-size-dependent single or multiple vacations.

pub mod error;
pub mod kernel;
pub mod linalg;
pub mod map;
pub mod model;
pub mod ph;
pub mod poly;
pub mod presets;
pub mod sim;
pub mod solver;

pub use error::{Error, ErrorKind, Result};
pub use kernel::{Kernel, KernelCoefficients};
pub use map::{validate_map, MarkovianArrivalProcess};
pub use model::{Policy, QueueModel};
pub use ph::PhaseType;
pub use sim::{effective_rate_check, simulate, SimEstimates, SimOptions};
pub use solver::{solve, Solution, SolverOptions};
