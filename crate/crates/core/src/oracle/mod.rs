//! Reference power flow used to verify the equivalent model and as the
//! baseline for performance comparisons.

pub mod bisect;
pub mod network;
pub mod nr;

pub use bisect::{fpad_bisect, tsc_fpad_bisect, ZsoOracle};
pub use network::{build_network_mso, build_network_tsc, build_network_zso, NetworkModel};
pub use nr::{conservation_check, group_power, solve_nr, ConservationReport, NrOptions, PfSolution};
