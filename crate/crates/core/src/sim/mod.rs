//! Time-stepped cluster simulation.

pub mod engine;
pub mod export;
pub mod ledger;
pub mod schedule;

pub use engine::{run, step, ModeChange, SimConfig, SimOutput, StepRecord};
pub use ledger::EnergyLedger;
pub use schedule::{Direction, PowerSegment, Schedule, TrainPlan};
