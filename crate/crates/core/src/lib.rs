//! Efficiency assessment of decision-making units under ordinal policy
//! preferences and bounded data uncertainty.
//!
//! The crate combines an uncertainty-tolerant slack-based DEA model (efficiency
//! targets with a band of allowed error around the frontier) with the ordinal
//! priority approach for turning policy rankings into variable weights. The two
//! are fused in a single weighted max-min linear program per unit.
//!
//! Module map:
//!
//! - [`lp`]: dense simplex solver used by every model
//! - [`opa`]: ordinal priority weights
//! - [`sbm`]: slack-based assessment, efficiency tape and its dual
//! - [`hybrid`]: the combined per-unit model
//! - [`scenario`]: policy rankings and preference scenarios
//! - [`emissions`]: fuel-based CO2 accounting
//! - [`analytics`]: clustering, validity indices, ANOVA, sensitivity flags
//! - [`io`] and [`pipeline`]: file formats, configuration and reports

#![allow(clippy::needless_range_loop)]

pub mod analytics;
pub mod emissions;
mod error;
pub mod hybrid;
pub mod io;
pub mod lp;
pub mod opa;
pub mod pipeline;
pub mod sbm;
pub mod scenario;
pub mod synthetic;

pub use error::{Error, Location, Result};
