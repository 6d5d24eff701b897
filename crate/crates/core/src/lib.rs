//! Host-side simulator of a BTS-room multiple-alarm controller.
//!
//! The crate models the controller's peripherals ([`mcu`]), its four sensors
//! ([`sensors`]), the threshold firmware with its settings menu
//! ([`firmware`]), the alarm box and the multi-site NMC service ([`nmc`]),
//! and a deterministic scenario runner that ties them together ([`sim`]).
//!
//! Runnable walkthroughs live in `examples/`; `cargo run --example` lists them.

pub mod firmware;
pub mod mcu;
pub mod nmc;
pub mod sensors;
pub mod sim;

pub use firmware::{classify_temperature, decode_temperature, AlarmState, Firmware, TempStatus, Thresholds};
pub use mcu::{adc_convert, AdcConfig, EepromImage};
pub use nmc::{AlarmFlags, NmcFrame, NmcState};
pub use sim::{emit_trace, parse_scenario, run_simulation, simulate, SimConfig, Trace, TraceFormat};
