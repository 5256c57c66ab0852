//! Phase-angle dispatch for traction station clusters of a flexible traction
//! power supply: equivalent-model power functions, feasible phase-angle
//! domains, dispatch modes, a Newton-Raphson reference power flow and a
//! time-stepped simulator.

pub mod bench;
pub mod dispatch;
pub mod equivalent;
pub mod error;
pub mod fpad;
pub mod model;
pub mod oracle;
pub mod scenario;
pub mod sim;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cluster.md")]
    mod cluster {}
    #[doc = include_str!("../../../book/src/power-functions.md")]
    mod power_functions {}
    #[doc = include_str!("../../../book/src/feasible-domain.md")]
    mod feasible_domain {}
    #[doc = include_str!("../../../book/src/dispatch.md")]
    mod dispatch {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/reference-power-flow.md")]
    mod reference_power_flow {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/limitations.md")]
    mod limitations {}
}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
