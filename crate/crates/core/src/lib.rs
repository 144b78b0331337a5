//! Simulation and verification toolkit for Galton-Watson processes with very
//! active immigration, where `P{log J > x}` decays like a power of `x`, and for
//! the extremal shot noise processes that arise as their functional limits.
//!
//! The crate is organised bottom-up:
//!
//! * [`lognum`]: overflow-proof nonnegative magnitudes held in log-domain.
//! * [`offspring`] and [`gw`]: offspring laws with O(1) cohort transitions and
//!   the hybrid exact/fluid cohort simulator.
//! * [`immigration`]: exact-tail immigration laws and the `b_n` norming solver.
//! * [`gwi`]: the immigration process `Y`, its truncation and the conditional
//!   mean proxy `Z`, plus normalized observables.
//! * [`limit`]: truncated Poisson random measures, shot noise paths and the
//!   closed-form / quadrature distribution functions of the limits.
//! * [`stats`]: ECDF, Kolmogorov-Smirnov, DKW bands and path distances.
//! * [`checks`]: the named verification procedures exposed by the CLI.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod error;
pub mod gw;
pub mod gwi;
pub mod immigration;
pub mod limit;
pub mod lognum;
pub mod offspring;
pub mod path;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use gw::{FluidConfig, PopulationPath, Regime};
pub use gwi::GwiRun;
pub use immigration::ImmigrationLaw;
pub use limit::{AtomSet, PrmParams, ShotNoiseSpec};
pub use lognum::LogMagnitude;
pub use offspring::OffspringFamily;
pub use path::CadlagPath;
pub use stats::Sample;
