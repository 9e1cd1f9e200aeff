//! Simulation and numerical verification of the p-Gauss curvature flow for
//! convex graphs with a flat side.

pub mod analysis;
pub mod error;
pub mod io;
pub mod par;
pub mod params;
pub mod solver;
pub mod transforms;

pub use error::{FlowError, Result};
pub use par::Exec;
pub use params::{
    classify_g_regularity, classify_v_regularity, derive_exponents, FlowParams, RegularityClass,
    Variable,
};
