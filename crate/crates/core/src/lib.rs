//! Range-renewal processes of i.i.d. discrete samples: streaming simulation,
//! exact evaluation of occupancy expectations and limit constants, and a
//! Monte Carlo harness that checks the classical limit laws (SLLN, power-law
//! intensity profiles, degree statistics of the trace graph, small-world
//! diameter bounds) against theory.
//!
//! Crate layout:
//! - [`dist`]    — discrete laws on {1, 2, ...} with regularity metadata
//! - [`exact`]   — expectations, limit constants, asymptotic leading terms
//! - [`engine`]  — samplers, streaming counters, trace graph, small-world stats
//! - [`verify`]  — claim runner comparing Monte Carlo estimates to theory
//! - [`cli`]     — config-driven experiment orchestration and file emission
//! - [`oracle`]  — brute-force reference computations used by the test suites

pub mod cli;
pub mod dist;
pub mod engine;
pub mod exact;
pub mod oracle;
pub mod verify;

pub use dist::{DistributionSpec, RegularityClass};
